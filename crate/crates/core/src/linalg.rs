//! Dense SVD helpers shared by every rank test, null-space computation and
//! least-squares solve in the crate.

use nalgebra::{DMatrix, DVector};

/// Environment variable read by [`RankTolerance::from_env`].
pub const RANK_SAFETY_ENV: &str = "LPVDD_RANK_SAFETY";

/// Relative cutoff for numeric rank decisions.
///
/// A singular value `s` counts toward the rank iff
/// `s > max(rows, cols) * s_max * f64::EPSILON * safety`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankTolerance {
    pub safety: f64,
}

impl Default for RankTolerance {
    fn default() -> Self {
        RankTolerance { safety: 1e3 }
    }
}

impl RankTolerance {
    pub fn new(safety: f64) -> Self {
        assert!(
            safety > 0.0 && safety.is_finite(),
            "rank safety factor must be positive"
        );
        RankTolerance { safety }
    }

    /// Default tolerance, overridden by `LPVDD_RANK_SAFETY` when it parses
    /// to a positive number.
    pub fn from_env() -> Self {
        std::env::var(RANK_SAFETY_ENV)
            .ok()
            .and_then(|s| s.trim().parse::<f64>().ok())
            .filter(|s| *s > 0.0 && s.is_finite())
            .map(RankTolerance::new)
            .unwrap_or_default()
    }

    pub fn cutoff(&self, rows: usize, cols: usize, sigma_max: f64) -> f64 {
        rows.max(cols) as f64 * sigma_max * f64::EPSILON * self.safety
    }
}

/// SVD with singular values sorted in decreasing order and a complete
/// right singular basis (`v` is `cols x cols`, also for wide matrices).
#[derive(Debug, Clone)]
pub struct FullSvd {
    pub rows: usize,
    pub cols: usize,
    /// `rows x k` left singular vectors, `k = min(rows, cols)`.
    pub u: DMatrix<f64>,
    /// `k` singular values, decreasing.
    pub singular_values: Vec<f64>,
    /// `cols x cols`; the first `k` columns pair with `singular_values`.
    pub v: DMatrix<f64>,
}

impl FullSvd {
    pub fn new(a: &DMatrix<f64>) -> Self {
        let (rows, cols) = a.shape();
        let k = rows.min(cols);
        if k == 0 {
            return FullSvd {
                rows,
                cols,
                u: DMatrix::zeros(rows, 0),
                singular_values: Vec::new(),
                v: DMatrix::identity(cols, cols),
            };
        }
        // Zero-padding a wide matrix to square keeps the row space and makes
        // nalgebra return all `cols` right singular vectors.
        let work = if rows < cols {
            let mut padded = DMatrix::zeros(cols, cols);
            padded.view_mut((0, 0), (rows, cols)).copy_from(a);
            padded
        } else {
            a.clone()
        };
        let svd = work.svd(true, true);
        let u_raw = svd.u.expect("u requested");
        let vt_raw = svd.v_t.expect("v_t requested");
        let sv = svd.singular_values;

        let mut order: Vec<usize> = (0..sv.len()).collect();
        order.sort_by(|&i, &j| sv[j].total_cmp(&sv[i]));

        let mut u = DMatrix::zeros(rows, k);
        let mut v = DMatrix::zeros(cols, cols);
        let mut singular_values = Vec::with_capacity(k);
        for (dst, &src) in order.iter().enumerate() {
            if dst < k {
                singular_values.push(sv[src]);
                u.column_mut(dst)
                    .copy_from(&u_raw.view((0, src), (rows, 1)));
            }
            v.column_mut(dst).copy_from(&vt_raw.row(src).transpose());
        }
        // rows >= cols: v_t is already cols x cols and fully populated above.
        FullSvd {
            rows,
            cols,
            u,
            singular_values,
            v,
        }
    }

    pub fn sigma_max(&self) -> f64 {
        self.singular_values.first().copied().unwrap_or(0.0)
    }

    pub fn cutoff(&self, tol: &RankTolerance) -> f64 {
        tol.cutoff(self.rows, self.cols, self.sigma_max())
    }

    pub fn rank(&self, tol: &RankTolerance) -> usize {
        self.rank_above(self.cutoff(tol))
    }

    pub fn rank_above(&self, cutoff: f64) -> usize {
        self.singular_values.iter().filter(|&&s| s > cutoff).count()
    }

    /// Orthonormal basis of the numeric null space (`cols x (cols - rank)`).
    pub fn null_space(&self, tol: &RankTolerance) -> DMatrix<f64> {
        let r = self.rank(tol);
        self.v.columns(r, self.cols - r).into_owned()
    }

    /// Orthonormal basis of the numeric column space.
    pub fn range(&self, tol: &RankTolerance) -> DMatrix<f64> {
        let r = self.rank(tol);
        self.u.columns(0, r).into_owned()
    }

    /// Minimum-norm least-squares solution of `A x = b` using the singular
    /// values above the rank cutoff.
    pub fn solve(&self, b: &DVector<f64>, tol: &RankTolerance) -> DVector<f64> {
        assert_eq!(b.len(), self.rows, "right-hand side length mismatch");
        let r = self.rank(tol);
        let mut x = DVector::zeros(self.cols);
        for i in 0..r {
            let coeff = self.u.column(i).dot(b) / self.singular_values[i];
            x.axpy(coeff, &self.v.column(i), 1.0);
        }
        x
    }

    /// Ratio `s[r-1] / s[r]` between the last kept and first dropped
    /// singular value; `None` when nothing was dropped or kept.
    pub fn gap(&self, rank: usize) -> Option<f64> {
        if rank == 0 || rank >= self.singular_values.len() {
            return None;
        }
        let dropped = self.singular_values[rank];
        Some(if dropped > 0.0 {
            self.singular_values[rank - 1] / dropped
        } else {
            f64::INFINITY
        })
    }
}

pub fn numeric_rank(a: &DMatrix<f64>, tol: &RankTolerance) -> usize {
    FullSvd::new(a).rank(tol)
}

pub fn null_space(a: &DMatrix<f64>, tol: &RankTolerance) -> DMatrix<f64> {
    FullSvd::new(a).null_space(tol)
}

pub fn orth(a: &DMatrix<f64>, tol: &RankTolerance) -> DMatrix<f64> {
    FullSvd::new(a).range(tol)
}

/// Minimum-norm least-squares solve returning the solution and the residual
/// norm `||A x - b||_2`.
pub fn lstsq_min_norm(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    tol: &RankTolerance,
) -> (DVector<f64>, f64) {
    let x = FullSvd::new(a).solve(b, tol);
    let residual = (a * &x - b).norm();
    (x, residual)
}

/// Largest principal angle (radians) between the column spaces of `a` and
/// `b`. Subspaces of different numeric dimension are `pi/2` apart.
pub fn max_principal_angle(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: &RankTolerance) -> f64 {
    let qa = orth(a, tol);
    let qb = orth(b, tol);
    if qa.ncols() != qb.ncols() {
        return std::f64::consts::FRAC_PI_2;
    }
    if qa.ncols() == 0 {
        return 0.0;
    }
    let resid_b = &qb - &qa * (qa.transpose() * &qb);
    let resid_a = &qa - &qb * (qb.transpose() * &qa);
    let sin = FullSvd::new(&resid_b)
        .sigma_max()
        .max(FullSvd::new(&resid_a).sigma_max());
    sin.min(1.0).asin()
}

pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.kronecker(b)
}

/// Stack matrices with equal column counts on top of each other.
pub fn vstack(blocks: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let cols = blocks.first().map(|b| b.ncols()).unwrap_or(0);
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut r = 0;
    for b in blocks {
        assert_eq!(b.ncols(), cols, "vstack: column count mismatch");
        out.view_mut((r, 0), (b.nrows(), cols)).copy_from(*b);
        r += b.nrows();
    }
    out
}

/// Stack vectors into one column.
pub fn vcat(parts: &[&DVector<f64>]) -> DVector<f64> {
    let n: usize = parts.iter().map(|p| p.len()).sum();
    let mut out = DVector::zeros(n);
    let mut r = 0;
    for p in parts {
        out.rows_mut(r, p.len()).copy_from(*p);
        r += p.len();
    }
    out
}
