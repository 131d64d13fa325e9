use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signals::Window;

/// Complexity triple `(m, lag, order)`: input count, minimal lag and minimal
/// state order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Complexity {
    pub m: usize,
    pub lag: usize,
    pub order: usize,
}

impl Complexity {
    pub fn new(m: usize, lag: usize, order: usize) -> Result<Self> {
        if lag == 0 {
            return Err(Error::InvalidModel("lag must be at least 1".into()));
        }
        if order < lag {
            return Err(Error::InvalidModel(format!(
                "order {order} is smaller than lag {lag}"
            )));
        }
        Ok(Complexity { m, lag, order })
    }
}

/// Shifted-affine LPV-IO model
/// `sum_i a_i(p(k-i)) y(k-i) = sum_i b_i(p(k-i)) u(k-i)` with
/// `a_i(p) = a_{i,0} + sum_j p_j a_{i,j}` and `a_0 = I`.
#[derive(Debug, Clone, PartialEq)]
pub struct LpvIoModel {
    a: Vec<Vec<DMatrix<f64>>>,
    b: Vec<Vec<DMatrix<f64>>>,
    n_u: usize,
    n_y: usize,
    n_p: usize,
    complexity: Complexity,
}

impl LpvIoModel {
    /// `a[i][j]` is `a_{i,j}` (`n_y x n_y`), `b[i][j]` is `b_{i,j}` (`n_y x n_u`);
    /// the inner length is `1 + n_p` for both.
    pub fn new(
        a: Vec<Vec<DMatrix<f64>>>,
        b: Vec<Vec<DMatrix<f64>>>,
        complexity: Complexity,
    ) -> Result<Self> {
        let first = a
            .first()
            .ok_or_else(|| Error::InvalidModel("a must contain a_0".into()))?;
        if first.len() < 2 {
            return Err(Error::InvalidModel(
                "coefficients need a constant part and at least one scheduling part".into(),
            ));
        }
        let n_p = first.len() - 1;
        let n_y = first[0].nrows();
        if n_y == 0 {
            return Err(Error::InvalidModel("n_y must be at least 1".into()));
        }
        if b.is_empty() {
            return Err(Error::InvalidModel("b must contain b_0".into()));
        }
        let n_u = b[0].first().map(|m| m.ncols()).unwrap_or(0);

        for (i, ai) in a.iter().enumerate() {
            if ai.len() != n_p + 1 {
                return Err(Error::dim(
                    format!("scheduling parts of a_{i}"),
                    n_p + 1,
                    ai.len(),
                ));
            }
            for (j, aij) in ai.iter().enumerate() {
                if aij.shape() != (n_y, n_y) {
                    return Err(Error::InvalidModel(format!(
                        "a_{i},{j} has shape {:?}, expected {:?}",
                        aij.shape(),
                        (n_y, n_y)
                    )));
                }
            }
        }
        for (i, bi) in b.iter().enumerate() {
            if bi.len() != n_p + 1 {
                return Err(Error::dim(
                    format!("scheduling parts of b_{i}"),
                    n_p + 1,
                    bi.len(),
                ));
            }
            for (j, bij) in bi.iter().enumerate() {
                if bij.shape() != (n_y, n_u) {
                    return Err(Error::InvalidModel(format!(
                        "b_{i},{j} has shape {:?}, expected {:?}",
                        bij.shape(),
                        (n_y, n_u)
                    )));
                }
            }
        }
        if first[0] != DMatrix::identity(n_y, n_y)
            || first[1..].iter().any(|m| m.iter().any(|&x| x != 0.0))
        {
            return Err(Error::InvalidModel(
                "a_0 must be the constant identity".into(),
            ));
        }
        if complexity.m != n_u {
            return Err(Error::InvalidModel(format!(
                "declared m = {} but the model has {n_u} inputs",
                complexity.m
            )));
        }
        Ok(LpvIoModel {
            a,
            b,
            n_u,
            n_y,
            n_p,
            complexity,
        })
    }

    pub fn n_u(&self) -> usize {
        self.n_u
    }

    pub fn n_y(&self) -> usize {
        self.n_y
    }

    pub fn n_p(&self) -> usize {
        self.n_p
    }

    pub fn n_w(&self) -> usize {
        self.n_u + self.n_y
    }

    pub fn n_a(&self) -> usize {
        self.a.len() - 1
    }

    pub fn n_b(&self) -> usize {
        self.b.len() - 1
    }

    /// `n_r = max(n_a, n_b)`.
    pub fn n_r(&self) -> usize {
        self.n_a().max(self.n_b())
    }

    pub fn complexity(&self) -> Complexity {
        self.complexity
    }

    pub fn a_coeffs(&self) -> &[Vec<DMatrix<f64>>] {
        &self.a
    }

    pub fn b_coeffs(&self) -> &[Vec<DMatrix<f64>>] {
        &self.b
    }

    /// `a_{i,j}`, zero past `n_a`.
    pub fn a_coeff(&self, i: usize, j: usize) -> DMatrix<f64> {
        self.a
            .get(i)
            .map(|ai| ai[j].clone())
            .unwrap_or_else(|| DMatrix::zeros(self.n_y, self.n_y))
    }

    /// `b_{i,j}`, zero past `n_b`.
    pub fn b_coeff(&self, i: usize, j: usize) -> DMatrix<f64> {
        self.b
            .get(i)
            .map(|bi| bi[j].clone())
            .unwrap_or_else(|| DMatrix::zeros(self.n_y, self.n_u))
    }

    pub fn a_at(&self, i: usize, p: &DVector<f64>) -> DMatrix<f64> {
        affine(self.a.get(i), p, self.n_y, self.n_y)
    }

    pub fn b_at(&self, i: usize, p: &DVector<f64>) -> DMatrix<f64> {
        affine(self.b.get(i), p, self.n_y, self.n_u)
    }

    /// True when every scheduling coefficient vanishes.
    pub fn is_lti(&self) -> bool {
        self.a
            .iter()
            .chain(self.b.iter())
            .all(|c| c[1..].iter().all(|m| m.iter().all(|&x| x == 0.0)))
    }
}

fn affine(
    coeffs: Option<&Vec<DMatrix<f64>>>,
    p: &DVector<f64>,
    rows: usize,
    cols: usize,
) -> DMatrix<f64> {
    match coeffs {
        None => DMatrix::zeros(rows, cols),
        Some(c) => {
            let mut out = c[0].clone();
            for (j, cj) in c[1..].iter().enumerate() {
                out += cj * p[j];
            }
            out
        }
    }
}

fn check_window(model: &LpvIoModel, win: &Window) -> Result<()> {
    if win.w.n_u() != model.n_u || win.w.n_y() != model.n_y {
        return Err(Error::dim("window signal", model.n_w(), win.w.n_w()));
    }
    if win.p.n_p() != model.n_p {
        return Err(Error::dim("window scheduling", model.n_p, win.p.n_p()));
    }
    Ok(())
}

/// Run the IO recursion forward from the past window `init` (at least `n_r`
/// samples, the last one being the sample just before `u[0]`).
pub fn simulate_io(
    model: &LpvIoModel,
    u: &[DVector<f64>],
    p: &[DVector<f64>],
    init: &Window,
) -> Result<Vec<DVector<f64>>> {
    check_window(model, init)?;
    let n_r = model.n_r();
    if init.len() < n_r {
        return Err(Error::InsufficientWindow {
            needed: n_r,
            got: init.len(),
        });
    }
    if u.len() != p.len() {
        return Err(Error::Alignment {
            what: "input/scheduling",
            left: u.len(),
            right: p.len(),
        });
    }
    for (k, (uk, pk)) in u.iter().zip(p).enumerate() {
        if uk.len() != model.n_u {
            return Err(Error::dim(format!("u at k={}", k + 1), model.n_u, uk.len()));
        }
        if pk.len() != model.n_p {
            return Err(Error::dim(format!("p at k={}", k + 1), model.n_p, pk.len()));
        }
    }

    let past = init.tail(n_r);
    let mut us: Vec<DVector<f64>> = past.w.inputs();
    let mut ys: Vec<DVector<f64>> = past.w.outputs();
    let mut ps: Vec<DVector<f64>> = past.p.samples().to_vec();
    let mut out = Vec::with_capacity(u.len());
    for (uk, pk) in u.iter().zip(p) {
        us.push(uk.clone());
        ps.push(pk.clone());
        let k = us.len() - 1;
        let mut y = model.b_at(0, pk) * uk;
        for i in 1..=n_r {
            y -= model.a_at(i, &ps[k - i]) * &ys[k - i];
            y += model.b_at(i, &ps[k - i]) * &us[k - i];
        }
        ys.push(y.clone());
        out.push(y);
    }
    Ok(out)
}

/// Largest absolute entry of the kernel relation evaluated at every time
/// whose full `n_r`-sample past lies inside the window.
pub fn kernel_residual(model: &LpvIoModel, win: &Window) -> Result<f64> {
    check_window(model, win)?;
    let n_r = model.n_r();
    let us = win.w.inputs();
    let ys = win.w.outputs();
    let ps = win.p.samples();
    let mut worst: f64 = 0.0;
    for k in n_r..win.len() {
        let mut r = DVector::zeros(model.n_y);
        for i in 0..=n_r {
            r += model.a_at(i, &ps[k - i]) * &ys[k - i];
            r -= model.b_at(i, &ps[k - i]) * &us[k - i];
        }
        worst = worst.max(r.amax());
    }
    Ok(worst)
}

/// State of the direct realization at the time right after `past`, from its
/// last `n_r` samples:
/// `x_i = sum_{l=i}^{n_r} -a_l(p(k-1-l+i)) y(k-1-l+i) + b_l(p(k-1-l+i)) u(k-1-l+i)`.
pub fn state_from_past(model: &LpvIoModel, past: &Window) -> Result<DVector<f64>> {
    check_window(model, past)?;
    let n_r = model.n_r();
    if past.len() < n_r {
        return Err(Error::InsufficientWindow {
            needed: n_r,
            got: past.len(),
        });
    }
    let n_y = model.n_y;
    let us = past.w.inputs();
    let ys = past.w.outputs();
    let ps = past.p.samples();
    let last = past.len(); // index of time k in the window's frame
    let mut x = DVector::zeros(n_y * n_r);
    for i in 1..=n_r {
        let mut xi = DVector::zeros(n_y);
        for l in i..=n_r {
            let t = last - 1 - (l - i);
            xi -= model.a_at(l, &ps[t]) * &ys[t];
            xi += model.b_at(l, &ps[t]) * &us[t];
        }
        x.rows_mut((i - 1) * n_y, n_y).copy_from(&xi);
    }
    Ok(x)
}

/// Physical parameters of the mass-spring-damper system with a
/// scheduling-dependent spring.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MsdParams {
    pub m: f64,
    pub s0: f64,
    pub s1: f64,
    pub d: f64,
    pub ts: f64,
}

impl MsdParams {
    pub const DEFAULT: MsdParams = MsdParams {
        m: 25.0,
        s0: 5.5,
        s1: 4.5,
        d: 1.0,
        ts: 0.1,
    };
}

impl Default for MsdParams {
    fn default() -> Self {
        Self::DEFAULT
    }
}

/// Euler-discretized mass-spring-damper:
/// `y(k) + a_1 y(k-1) + a_2(p(k-2)) y(k-2) = b_2 u(k-2)`.
pub fn msd_model(m: f64, s0: f64, s1: f64, d: f64, ts: f64) -> Result<LpvIoModel> {
    if !(m > 0.0) || !(ts > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "mass and sampling time must be positive (m = {m}, Ts = {ts})"
        )));
    }
    let s = |x: f64| DMatrix::from_element(1, 1, x);
    let a = vec![
        vec![s(1.0), s(0.0)],
        vec![s(d * ts / m - 2.0), s(0.0)],
        vec![s(1.0 + (s0 * ts * ts - d * ts) / m), s(s1 * ts * ts / m)],
    ];
    let b = vec![
        vec![s(0.0), s(0.0)],
        vec![s(0.0), s(0.0)],
        vec![s(ts * ts / m), s(0.0)],
    ];
    LpvIoModel::new(a, b, Complexity::new(1, 2, 2)?)
}

pub fn msd_default() -> LpvIoModel {
    let p = MsdParams::DEFAULT;
    msd_model(p.m, p.s0, p.s1, p.d, p.ts).expect("default parameters are valid")
}

/// First-order system `y(k) + (1 + p(k-1)) y(k-1) = u(k) + p(k-1) u(k-1)`.
pub fn example2_model() -> LpvIoModel {
    let s = |x: f64| DMatrix::from_element(1, 1, x);
    LpvIoModel::new(
        vec![vec![s(1.0), s(0.0)], vec![s(1.0), s(1.0)]],
        vec![vec![s(1.0), s(0.0)], vec![s(0.0), s(1.0)]],
        Complexity::new(1, 1, 1).expect("valid"),
    )
    .expect("valid model")
}
