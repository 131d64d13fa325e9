use nalgebra::{DMatrix, DVector};

use super::io::LpvIoModel;
use crate::error::{Error, Result};

/// Matrix function of the scheduling variable,
/// `M(p) = M_0 + sum_j p_j M_j + sum_{j,l} p_j p_l M_{j,l}`.
///
/// The quadratic part is only nonzero for the input matrix of a direct
/// realization whose feed-through depends on `p`; it is indexed `j * n_p + l`.
#[derive(Debug, Clone, PartialEq)]
pub struct SchedMatrix {
    pub constant: DMatrix<f64>,
    pub linear: Vec<DMatrix<f64>>,
    pub quadratic: Vec<DMatrix<f64>>,
}

impl SchedMatrix {
    pub fn constant(m: DMatrix<f64>, n_p: usize) -> Self {
        let (r, c) = m.shape();
        SchedMatrix {
            constant: m,
            linear: vec![DMatrix::zeros(r, c); n_p],
            quadratic: Vec::new(),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.constant.shape()
    }

    pub fn n_p(&self) -> usize {
        self.linear.len()
    }

    pub fn at(&self, p: &DVector<f64>) -> DMatrix<f64> {
        let mut out = self.constant.clone();
        for (j, m) in self.linear.iter().enumerate() {
            out += m * p[j];
        }
        let n_p = self.n_p();
        for (idx, m) in self.quadratic.iter().enumerate() {
            out += m * (p[idx / n_p] * p[idx % n_p]);
        }
        out
    }

    pub fn is_constant(&self) -> bool {
        self.linear
            .iter()
            .chain(self.quadratic.iter())
            .all(|m| m.iter().all(|&x| x == 0.0))
    }
}

/// LPV state-space model with static scheduling dependence,
/// `x(k+1) = A(p(k)) x(k) + B(p(k)) u(k)`, `y(k) = C(p(k)) x(k) + D(p(k)) u(k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LpvSsModel {
    pub a: SchedMatrix,
    pub b: SchedMatrix,
    pub c: SchedMatrix,
    pub d: SchedMatrix,
    pub n_x: usize,
    pub n_u: usize,
    pub n_y: usize,
    pub n_p: usize,
}

/// Direct realization of an IO model: companion-form `A(p)` with first block
/// column `-a_i(p)`, `B(p)` rows `b_i(p) - a_i(p) b_0(p)`, `C = [I 0 ... 0]`,
/// `D(p) = b_0(p)`.
pub fn realize_ss(model: &LpvIoModel) -> LpvSsModel {
    let (n_u, n_y, n_p) = (model.n_u(), model.n_y(), model.n_p());
    let n_r = model.n_r();
    let n_x = n_y * n_r;

    let mut a0 = DMatrix::zeros(n_x, n_x);
    let mut a_lin = vec![DMatrix::zeros(n_x, n_x); n_p];
    let mut b0 = DMatrix::zeros(n_x, n_u);
    let mut b_lin = vec![DMatrix::zeros(n_x, n_u); n_p];
    let mut b_quad = vec![DMatrix::zeros(n_x, n_u); n_p * n_p];

    let feed0 = model.b_coeff(0, 0);
    for i in 1..=n_r {
        let r = (i - 1) * n_y;
        let ai0 = model.a_coeff(i, 0);
        a0.view_mut((r, 0), (n_y, n_y)).copy_from(&(-&ai0));
        if i < n_r {
            a0.view_mut((r, r + n_y), (n_y, n_y))
                .copy_from(&DMatrix::identity(n_y, n_y));
        }
        b0.view_mut((r, 0), (n_y, n_u))
            .copy_from(&(model.b_coeff(i, 0) - &ai0 * &feed0));
        for j in 1..=n_p {
            let aij = model.a_coeff(i, j);
            a_lin[j - 1]
                .view_mut((r, 0), (n_y, n_y))
                .copy_from(&(-&aij));
            let bij = model.b_coeff(i, j) - &ai0 * model.b_coeff(0, j) - &aij * &feed0;
            b_lin[j - 1].view_mut((r, 0), (n_y, n_u)).copy_from(&bij);
            for l in 1..=n_p {
                let q = -&aij * model.b_coeff(0, l);
                b_quad[(j - 1) * n_p + (l - 1)]
                    .view_mut((r, 0), (n_y, n_u))
                    .copy_from(&q);
            }
        }
    }
    if b_quad.iter().all(|m| m.iter().all(|&x| x == 0.0)) {
        b_quad.clear();
    }

    let mut c = DMatrix::zeros(n_y, n_x);
    c.view_mut((0, 0), (n_y, n_y))
        .copy_from(&DMatrix::identity(n_y, n_y));

    LpvSsModel {
        a: SchedMatrix {
            constant: a0,
            linear: a_lin,
            quadratic: Vec::new(),
        },
        b: SchedMatrix {
            constant: b0,
            linear: b_lin,
            quadratic: b_quad,
        },
        c: SchedMatrix::constant(c, n_p),
        d: SchedMatrix {
            constant: feed0,
            linear: (1..=n_p).map(|j| model.b_coeff(0, j)).collect(),
            quadratic: Vec::new(),
        },
        n_x,
        n_u,
        n_y,
        n_p,
    }
}

/// Simulate from `x0`; returns the outputs `y(1..N)` and states `x(1..N+1)`.
pub fn simulate_ss(
    ss: &LpvSsModel,
    u: &[DVector<f64>],
    p: &[DVector<f64>],
    x0: &DVector<f64>,
) -> Result<(Vec<DVector<f64>>, Vec<DVector<f64>>)> {
    if x0.len() != ss.n_x {
        return Err(Error::dim("initial state", ss.n_x, x0.len()));
    }
    if u.len() != p.len() {
        return Err(Error::Alignment {
            what: "input/scheduling",
            left: u.len(),
            right: p.len(),
        });
    }
    let mut x = x0.clone();
    let mut ys = Vec::with_capacity(u.len());
    let mut xs = Vec::with_capacity(u.len() + 1);
    xs.push(x.clone());
    for (k, (uk, pk)) in u.iter().zip(p).enumerate() {
        if uk.len() != ss.n_u {
            return Err(Error::dim(format!("u at k={}", k + 1), ss.n_u, uk.len()));
        }
        if pk.len() != ss.n_p {
            return Err(Error::dim(format!("p at k={}", k + 1), ss.n_p, pk.len()));
        }
        ys.push(ss.c.at(pk) * &x + ss.d.at(pk) * uk);
        x = ss.a.at(pk) * &x + ss.b.at(pk) * uk;
        xs.push(x.clone());
    }
    Ok((ys, xs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::io::{example2_model, msd_default};

    fn scalar(m: &DMatrix<f64>) -> f64 {
        assert_eq!(m.shape(), (1, 1));
        m[(0, 0)]
    }

    #[test]
    fn example2_realization() {
        let ss = realize_ss(&example2_model());
        let p = DVector::from_element(1, 0.7);
        assert_eq!(ss.n_x, 1);
        assert!((scalar(&ss.a.at(&p)) + 1.7).abs() < 1e-15);
        assert!((scalar(&ss.b.at(&p)) + 1.0).abs() < 1e-15);
        assert_eq!(scalar(&ss.c.at(&p)), 1.0);
        assert_eq!(scalar(&ss.d.at(&p)), 1.0);
    }

    #[test]
    fn msd_realization_is_companion() {
        let ss = realize_ss(&msd_default());
        assert_eq!(ss.n_x, 2);
        let p = DVector::from_element(1, 0.5);
        let a = ss.a.at(&p);
        let a2 = 1.0 + (5.5 * 0.01 - 0.1) / 25.0 + 0.5 * 4.5 * 0.01 / 25.0;
        assert!((a[(0, 0)] - 1.996).abs() < 1e-15);
        assert!((a[(1, 0)] + a2).abs() < 1e-15);
        assert_eq!((a[(0, 1)], a[(1, 1)]), (1.0, 0.0));
        assert!(ss.b.quadratic.is_empty());
        assert!(ss.d.is_constant());
    }

    #[test]
    fn zero_state_zero_input() {
        let ss = realize_ss(&msd_default());
        let u = vec![DVector::zeros(1); 20];
        let p = vec![DVector::from_element(1, 3.0); 20];
        let (y, x) = simulate_ss(&ss, &u, &p, &DVector::zeros(2)).unwrap();
        assert!(y.iter().all(|v| v[0] == 0.0));
        assert!(x.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn state_dimension_checked() {
        let ss = realize_ss(&msd_default());
        assert!(simulate_ss(&ss, &[], &[], &DVector::zeros(3)).is_err());
    }
}
