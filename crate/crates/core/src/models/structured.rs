//! Scheduling-independent / scheduling-dependent split of a direct
//! realization and the finite-horizon matrices built from it.
//!
//! With `x_1 = y - D(p) u` the first state block, the realization reads
//!
//! ```text
//! x(k+1) = A0 x + B0 u + Ap (p ⊗ x_1) + Bp (p ⊗ u) + Bpp (p ⊗ p ⊗ u)
//! y(k)   = C x + D0 u + Dp (p ⊗ u)
//! ```
//!
//! and, eliminating `x_1` in favour of the measured output,
//!
//! ```text
//! x(k+1) = A0 x + B0 u + Ap (p ⊗ y) + B̃p (p ⊗ u) + B̃pp (p ⊗ p ⊗ u)
//! ```
//!
//! with `B̃p = Bp - Ap (I ⊗ D0)` and `B̃pp = Bpp - Ap (I ⊗ Dp)`.

use nalgebra::{DMatrix, DVector};

use super::io::LpvIoModel;
use super::ss::{realize_ss, LpvSsModel};
use crate::error::{Error, Result};
use crate::linalg::{FullSvd, RankTolerance};
use crate::signals::{blkdiag_kron, kron_samples, vec_samples, SchedulingTrajectory, Window};

#[derive(Debug, Clone, PartialEq)]
pub struct StructuredSs {
    pub a0: DMatrix<f64>,
    /// `n_x x (n_p n_y)`, block `j` multiplies `p_j x_1`.
    pub ap: DMatrix<f64>,
    pub b0: DMatrix<f64>,
    /// `n_x x (n_p n_u)`.
    pub bp: DMatrix<f64>,
    /// `n_x x (n_p^2 n_u)`, block `j n_p + l` multiplies `p_j p_l u`.
    pub bpp: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d0: DMatrix<f64>,
    /// `n_y x (n_p n_u)`.
    pub dp: DMatrix<f64>,
    pub bp_tilde: DMatrix<f64>,
    pub bpp_tilde: DMatrix<f64>,
    pub n_x: usize,
    pub n_u: usize,
    pub n_y: usize,
    pub n_p: usize,
}

fn hcat(blocks: &[DMatrix<f64>], rows: usize, cols: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(rows, cols * blocks.len());
    for (j, b) in blocks.iter().enumerate() {
        out.view_mut((0, j * cols), (rows, cols)).copy_from(b);
    }
    out
}

/// Split a realization produced by [`realize_ss`].
pub fn structured_split(ss: &LpvSsModel) -> Result<StructuredSs> {
    let (n_x, n_u, n_y, n_p) = (ss.n_x, ss.n_u, ss.n_y, ss.n_p);
    if !ss.c.is_constant() {
        return Err(Error::InvalidModel(
            "C must not depend on the scheduling".into(),
        ));
    }
    let mut c_expected = DMatrix::zeros(n_y, n_x);
    c_expected
        .view_mut((0, 0), (n_y, n_y))
        .copy_from(&DMatrix::identity(n_y, n_y));
    if ss.c.constant != c_expected {
        return Err(Error::InvalidModel("C must be [I 0 ... 0]".into()));
    }
    if !ss.a.quadratic.is_empty() || !ss.d.quadratic.is_empty() {
        return Err(Error::InvalidModel(
            "A and D must be affine in the scheduling".into(),
        ));
    }
    for m in &ss.a.linear {
        if m.columns(n_y, n_x - n_y).iter().any(|&x| x != 0.0) {
            return Err(Error::InvalidModel(
                "scheduled part of A must act on the first state block only".into(),
            ));
        }
    }

    let ap_blocks: Vec<_> =
        ss.a.linear
            .iter()
            .map(|m| m.columns(0, n_y).into_owned())
            .collect();
    let ap = hcat(&ap_blocks, n_x, n_y);
    let bp = hcat(&ss.b.linear, n_x, n_u);
    let bpp = if ss.b.quadratic.is_empty() {
        DMatrix::zeros(n_x, n_p * n_p * n_u)
    } else {
        hcat(&ss.b.quadratic, n_x, n_u)
    };
    let d0 = ss.d.constant.clone();
    let dp = hcat(&ss.d.linear, n_y, n_u);

    let i_np = DMatrix::<f64>::identity(n_p, n_p);
    let bp_tilde = &bp - &ap * i_np.kronecker(&d0);
    let bpp_tilde = &bpp - &ap * i_np.kronecker(&dp);

    Ok(StructuredSs {
        a0: ss.a.constant.clone(),
        ap,
        b0: ss.b.constant.clone(),
        bp,
        bpp,
        c: ss.c.constant.clone(),
        d0,
        dp,
        bp_tilde,
        bpp_tilde,
        n_x,
        n_u,
        n_y,
        n_p,
    })
}

/// Realize and split in one go.
pub fn structured_from_io(model: &LpvIoModel) -> StructuredSs {
    structured_split(&realize_ss(model)).expect("direct realizations always split")
}

impl StructuredSs {
    /// Reassemble `(A(p), B(p), D(p))`.
    pub fn matrices_at(&self, p: &DVector<f64>) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
        let (n_x, n_u, n_y, n_p) = (self.n_x, self.n_u, self.n_y, self.n_p);
        let mut a = self.a0.clone();
        let mut b = self.b0.clone();
        let mut d = self.d0.clone();
        for j in 0..n_p {
            let mut aj = a.view_mut((0, 0), (n_x, n_y));
            aj += self.ap.columns(j * n_y, n_y) * p[j];
            b += self.bp.columns(j * n_u, n_u) * p[j];
            d += self.dp.columns(j * n_u, n_u) * p[j];
            for l in 0..n_p {
                b += self.bpp.columns((j * n_p + l) * n_u, n_u) * (p[j] * p[l]);
            }
        }
        (a, b, d)
    }

    /// Output-form recursion; returns outputs and states `x(1..N+1)`.
    pub fn simulate(
        &self,
        u: &[DVector<f64>],
        p: &[DVector<f64>],
        x0: &DVector<f64>,
    ) -> Result<(Vec<DVector<f64>>, Vec<DVector<f64>>)> {
        if x0.len() != self.n_x {
            return Err(Error::dim("initial state", self.n_x, x0.len()));
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
        let mut xs = vec![x.clone()];
        for (uk, pk) in u.iter().zip(p) {
            let up = pk.kronecker(uk);
            let upp = pk.kronecker(&up);
            let y = &self.c * &x + &self.d0 * uk + &self.dp * &up;
            x = &self.a0 * &x
                + &self.b0 * uk
                + &self.ap * pk.kronecker(&y)
                + &self.bp_tilde * &up
                + &self.bpp_tilde * &upp;
            ys.push(y);
            xs.push(x.clone());
        }
        Ok((ys, xs))
    }
}

/// Matrices of the length-`L` output equation
/// `vec y = O x(1) + T vec u + Op vec(y^p) + Tp vec(u^p) + Tpp vec(u^pp)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HorizonMatrices {
    pub o: DMatrix<f64>,
    pub t: DMatrix<f64>,
    pub op: DMatrix<f64>,
    pub tp: DMatrix<f64>,
    pub tpp: DMatrix<f64>,
}

/// Block lower-triangular Toeplitz matrix with `diag` on the diagonal and
/// `markov[k]` (`= C A0^k X`) on the `k+1`-th subdiagonal.
fn toeplitz(
    markov: &[DMatrix<f64>],
    diag: Option<&DMatrix<f64>>,
    n_y: usize,
    cols: usize,
) -> DMatrix<f64> {
    let len = markov.len() + 1;
    let mut out = DMatrix::zeros(len * n_y, len * cols);
    for r in 0..len {
        if let Some(d) = diag {
            out.view_mut((r * n_y, r * cols), (n_y, cols)).copy_from(d);
        }
        for c in 0..r {
            out.view_mut((r * n_y, c * cols), (n_y, cols))
                .copy_from(&markov[r - c - 1]);
        }
    }
    out
}

pub fn horizon_matrices(s: &StructuredSs, depth: usize) -> HorizonMatrices {
    assert!(depth >= 1, "horizon must be at least 1");
    let (n_x, n_u, n_y, n_p) = (s.n_x, s.n_u, s.n_y, s.n_p);
    // C A0^k for k = 0..L-1
    let mut ca = Vec::with_capacity(depth);
    let mut cur = s.c.clone();
    for _ in 0..depth {
        ca.push(cur.clone());
        cur = &cur * &s.a0;
    }
    let mut o = DMatrix::zeros(depth * n_y, n_x);
    for (k, m) in ca.iter().enumerate() {
        o.view_mut((k * n_y, 0), (n_y, n_x)).copy_from(m);
    }
    let markov =
        |x: &DMatrix<f64>| -> Vec<DMatrix<f64>> { ca[..depth - 1].iter().map(|m| m * x).collect() };
    HorizonMatrices {
        o,
        t: toeplitz(&markov(&s.b0), Some(&s.d0), n_y, n_u),
        op: toeplitz(&markov(&s.ap), None, n_y, n_p * n_y),
        tp: toeplitz(&markov(&s.bp_tilde), Some(&s.dp), n_y, n_p * n_u),
        tpp: toeplitz(&markov(&s.bpp_tilde), None, n_y, n_p * n_p * n_u),
    }
}

pub fn observability_rank(s: &StructuredSs, depth: usize, tol: &RankTolerance) -> usize {
    FullSvd::new(&horizon_matrices(s, depth).o).rank(tol)
}

/// `M = I - Op P^{n_y}` and `Q = T + Tp P^{n_u} + Tpp P^{n_u n_p} P^{n_u}` for a
/// scheduling window, so that `M vec y = O x(1) + Q vec u`.
fn output_relation(
    s: &StructuredSs,
    h: &HorizonMatrices,
    p: &[DVector<f64>],
) -> (DMatrix<f64>, DMatrix<f64>) {
    let len = p.len();
    let m = DMatrix::identity(len * s.n_y, len * s.n_y) - &h.op * blkdiag_kron(p, s.n_y);
    let pu = blkdiag_kron(p, s.n_u);
    let q = &h.t + &h.tp * &pu + &h.tpp * (blkdiag_kron(p, s.n_u * s.n_p) * &pu);
    (m, q)
}

/// Basis of the length-`L` windows `w` compatible with the scheduling window
/// `p`. Rows are time-major `w = col(u, y)` samples (the layout of a Hankel
/// column); columns are parametrized by `col(x(1), vec u)`.
pub fn behavior_basis(model: &LpvIoModel, p: &SchedulingTrajectory) -> Result<DMatrix<f64>> {
    if p.n_p() != model.n_p() {
        return Err(Error::dim("scheduling window", model.n_p(), p.n_p()));
    }
    if p.is_empty() {
        return Err(Error::Empty("scheduling window"));
    }
    let s = structured_from_io(model);
    let len = p.len();
    let h = horizon_matrices(&s, len);
    let (m, q) = output_relation(&s, &h, p.samples());
    let rhs = {
        let mut r = DMatrix::zeros(len * s.n_y, s.n_x + len * s.n_u);
        r.columns_mut(0, s.n_x).copy_from(&h.o);
        r.columns_mut(s.n_x, len * s.n_u).copy_from(&q);
        r
    };
    // M is unit lower triangular.
    let y_part = m
        .solve_lower_triangular(&rhs)
        .ok_or_else(|| Error::InvalidModel("singular output relation".into()))?;
    let n_w = s.n_u + s.n_y;
    let mut out = DMatrix::zeros(len * n_w, s.n_x + len * s.n_u);
    for t in 0..len {
        for i in 0..s.n_u {
            out[(t * n_w + i, s.n_x + t * s.n_u + i)] = 1.0;
        }
        out.view_mut((t * n_w + s.n_u, 0), (s.n_y, out.ncols()))
            .copy_from(&y_part.rows(t * s.n_y, s.n_y));
    }
    Ok(out)
}

/// Recover the state right after the window (time `T + 1`) from a window of
/// length `T >= lag`. The window's first state is found by a minimum-norm
/// least-squares inversion of the observability matrix and then propagated
/// through the closed-form state equation.
pub fn initial_state(model: &LpvIoModel, window: &Window) -> Result<DVector<f64>> {
    Ok(initial_state_with(model, window, &RankTolerance::from_env(), 1e-8)?.1)
}

/// Like [`initial_state`] but returns `(x(1), x(T+1))` and takes explicit
/// tolerances; `consistency_tol` is relative to `1 + ||rhs||`.
pub fn initial_state_with(
    model: &LpvIoModel,
    window: &Window,
    tol: &RankTolerance,
    consistency_tol: f64,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let lag = model.complexity().lag;
    let len = window.len();
    if len < lag || len == 0 {
        return Err(Error::InsufficientWindow {
            needed: lag.max(1),
            got: len,
        });
    }
    if window.w.n_u() != model.n_u() || window.w.n_y() != model.n_y() {
        return Err(Error::dim("window signal", model.n_w(), window.w.n_w()));
    }
    if window.p.n_p() != model.n_p() {
        return Err(Error::dim("window scheduling", model.n_p(), window.p.n_p()));
    }
    let s = structured_from_io(model);
    let h = horizon_matrices(&s, len);
    let p = window.p.samples();
    let u = window.w.inputs();
    let y = window.w.outputs();
    let (m, q) = output_relation(&s, &h, p);
    let rhs = &m * vec_samples(&y) - &q * vec_samples(&u);
    let svd = FullSvd::new(&h.o);
    let x1 = svd.solve(&rhs, tol);
    let residual = (&h.o * &x1 - &rhs).norm();
    if residual > consistency_tol * (1.0 + rhs.norm()) {
        return Err(Error::InconsistentWindow { residual });
    }

    // x(T+1) = A0^T x(1) + sum_k A0^{T-k} [B0 u + Ap y^p + B̃p u^p + B̃pp u^pp](k)
    let n_x = s.n_x;
    let mut powers = Vec::with_capacity(len + 1);
    powers.push(DMatrix::<f64>::identity(n_x, n_x));
    for k in 1..=len {
        powers.push(&powers[k - 1] * &s.a0);
    }
    let block_row = |x: &DMatrix<f64>| -> DMatrix<f64> {
        let w = x.ncols();
        let mut out = DMatrix::zeros(n_x, len * w);
        for k in 0..len {
            out.columns_mut(k * w, w)
                .copy_from(&(&powers[len - 1 - k] * x));
        }
        out
    };
    let up = kron_samples(p, &u)?;
    let upp = kron_samples(p, &up)?;
    let yp = kron_samples(p, &y)?;
    let x_end = &powers[len] * &x1
        + block_row(&s.b0) * vec_samples(&u)
        + block_row(&s.ap) * vec_samples(&yp)
        + block_row(&s.bp_tilde) * vec_samples(&up)
        + block_row(&s.bpp_tilde) * vec_samples(&upp);
    Ok((x1, x_end))
}
