//! Hankel-matrix representation of a data dictionary and the rank tests
//! deciding whether it describes the full finite-horizon behavior.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{vstack, FullSvd, RankTolerance};
use crate::models::Complexity;
use crate::signals::{
    blkdiag_kron, hankel, kron_lift, kron_samples, HankelMatrix, SchedulingTrajectory, Trajectory,
    Window,
};

/// Where a dictionary came from.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub description: String,
    pub seed: Option<u64>,
}

/// A single recorded `(w, p)` trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct DataDictionary {
    pub w: Trajectory,
    pub p: SchedulingTrajectory,
    pub provenance: Provenance,
}

impl DataDictionary {
    pub fn new(w: Trajectory, p: SchedulingTrajectory, provenance: Provenance) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::Empty("data dictionary"));
        }
        let win = Window::new(w, p)?;
        Ok(DataDictionary {
            w: win.w,
            p: win.p,
            provenance,
        })
    }

    pub fn from_window(win: Window, provenance: Provenance) -> Result<Self> {
        Self::new(win.w, win.p, provenance)
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    pub fn n_u(&self) -> usize {
        self.w.n_u()
    }

    pub fn n_y(&self) -> usize {
        self.w.n_y()
    }

    pub fn n_w(&self) -> usize {
        self.w.n_w()
    }

    pub fn n_p(&self) -> usize {
        self.p.n_p()
    }

    /// Keep the first `len` samples.
    pub fn truncate(&self, len: usize) -> DataDictionary {
        DataDictionary {
            w: self.w.truncate(len),
            p: self.p.truncate(len),
            provenance: self.provenance.clone(),
        }
    }

    pub fn window(&self) -> Window {
        Window {
            w: self.w.clone(),
            p: self.p.clone(),
        }
    }
}

/// Outcome of a rank test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankReport {
    pub rank: usize,
    pub required: usize,
    pub holds: bool,
    /// Numeric rank exceeded `required`: the declared complexity is wrong or
    /// the data is not noise free.
    pub over_rank: bool,
    /// `sigma_r / sigma_{r+1}` at the numeric rank `r`, when defined.
    pub gap: Option<f64>,
}

impl RankReport {
    fn exact(svd: &FullSvd, rank: usize, required: usize) -> Self {
        RankReport {
            rank,
            required,
            holds: rank == required,
            over_rank: rank > required,
            gap: svd.gap(rank),
        }
    }

    fn at_least(svd: &FullSvd, rank: usize, required: usize) -> Self {
        RankReport {
            rank,
            required,
            holds: rank >= required,
            over_rank: false,
            gap: svd.gap(rank),
        }
    }
}

/// Depth-`L` Hankel matrices of `w` and of the lifted `p ⊗ w`.
#[derive(Debug, Clone)]
pub struct DdRepresentation {
    pub hw: HankelMatrix,
    pub hwp: HankelMatrix,
    pub depth: usize,
    pub n_u: usize,
    pub n_y: usize,
    pub n_p: usize,
    pub tol: RankTolerance,
    svd: FullSvd,
}

pub fn build(data: &DataDictionary, depth: usize) -> Result<DdRepresentation> {
    build_with_tol(data, depth, RankTolerance::from_env())
}

pub fn build_with_tol(
    data: &DataDictionary,
    depth: usize,
    tol: RankTolerance,
) -> Result<DdRepresentation> {
    let hw = hankel(data.w.samples(), depth)?;
    let hwp = hankel(&kron_lift(&data.w, &data.p)?, depth)?;
    let svd = FullSvd::new(&vstack(&[&hw.entries, &hwp.entries]));
    Ok(DdRepresentation {
        hw,
        hwp,
        depth,
        n_u: data.n_u(),
        n_y: data.n_y(),
        n_p: data.n_p(),
        tol,
        svd,
    })
}

impl DdRepresentation {
    pub fn n_w(&self) -> usize {
        self.n_u + self.n_y
    }

    pub fn cols(&self) -> usize {
        self.hw.cols()
    }

    /// Singular values of `[Hw; Hwp]`, decreasing.
    pub fn singular_values(&self) -> &[f64] {
        &self.svd.singular_values
    }

    pub fn stacked_rank(&self) -> usize {
        self.svd.rank(&self.tol)
    }

    /// `Hwp - (p ⊛ I_{n_w}) Hw` for a scheduling window of length `L`.
    pub fn restriction_matrix(&self, p_query: &[DVector<f64>]) -> Result<DMatrix<f64>> {
        if p_query.len() != self.depth {
            return Err(Error::Alignment {
                what: "scheduling query/depth",
                left: p_query.len(),
                right: self.depth,
            });
        }
        if let Some(bad) = p_query.iter().find(|v| v.len() != self.n_p) {
            return Err(Error::dim("scheduling query", self.n_p, bad.len()));
        }
        Ok(&self.hwp.entries - blkdiag_kron(p_query, self.n_w()) * &self.hw.entries)
    }
}

/// `rank [Hw; Hwp] = n + (m + n_p n_w) L`.
pub fn gpe_check(rep: &DdRepresentation, c: &Complexity) -> RankReport {
    let required = c.order + (c.m + rep.n_p * rep.n_w()) * rep.depth;
    let rank = rep.stacked_rank();
    RankReport::exact(&rep.svd, rank, required)
}

/// Smallest dictionary length for which the GPE rank is attainable,
/// `(1 + n_w n_p + m) L + n - 1`.
pub fn min_samples(c: &Complexity, n_p: usize, n_w: usize, depth: usize) -> usize {
    (1 + n_w * n_p + c.m) * depth + c.order - 1
}

/// Orthonormal basis of `ker(Hwp - P Hw)`.
pub fn restriction_kernel(
    rep: &DdRepresentation,
    p_query: &SchedulingTrajectory,
) -> Result<DMatrix<f64>> {
    let r = rep.restriction_matrix(p_query.samples())?;
    Ok(FullSvd::new(&r).null_space(&rep.tol))
}

/// `rank(Hw N_p)` against `n + m L`.
pub fn restricted_image_rank(
    rep: &DdRepresentation,
    p_query: &SchedulingTrajectory,
    c: &Complexity,
) -> Result<RankReport> {
    let n = restriction_kernel(rep, p_query)?;
    let img = &rep.hw.entries * n;
    let svd = FullSvd::new(&img);
    let rank = svd.rank(&rep.tol);
    Ok(RankReport::exact(&svd, rank, c.order + c.m * rep.depth))
}

fn stacked_hankels(blocks: &[Vec<DVector<f64>>], depth: usize) -> Result<DMatrix<f64>> {
    let hs = blocks
        .iter()
        .map(|b| hankel(b, depth).map(|h| h.entries))
        .collect::<Result<Vec<_>>>()?;
    Ok(vstack(&hs.iter().collect::<Vec<_>>()))
}

/// Input-only excitation test on `[H(u); H(p ⊗ u)]` at depth `L + n`, with
/// bound `m (1 + n_p) (L + n)`. Known to give false positives under feedback.
pub fn naive_input_pe_check(
    data: &DataDictionary,
    c: &Complexity,
    depth: usize,
) -> Result<RankReport> {
    let d = depth + c.order;
    let u = data.w.inputs();
    let up = kron_samples(data.p.samples(), &u)?;
    let h = stacked_hankels(&[u, up], d)?;
    let svd = FullSvd::new(&h);
    let rank = svd.rank(&RankTolerance::from_env());
    Ok(RankReport::at_least(&svd, rank, c.m * (1 + data.n_p()) * d))
}

/// Excitation test on the inputs of the LTI embedding,
/// `[H(u); H(p ⊗ u); H(p ⊗ y)]` at depth `L + n`, with bound
/// `(m + n_w n_p)(L + n)`.
pub fn embedded_pe_check(
    data: &DataDictionary,
    c: &Complexity,
    depth: usize,
) -> Result<RankReport> {
    let d = depth + c.order;
    let u = data.w.inputs();
    let y = data.w.outputs();
    let up = kron_samples(data.p.samples(), &u)?;
    let yp = kron_samples(data.p.samples(), &y)?;
    let h = stacked_hankels(&[u, up, yp], d)?;
    let svd = FullSvd::new(&h);
    let rank = svd.rank(&RankTolerance::from_env());
    Ok(RankReport::at_least(
        &svd,
        rank,
        (c.m + data.n_w() * data.n_p()) * d,
    ))
}

/// Order implied by the stacked rank when only `m` is known:
/// `rank [Hw; Hwp] - (m + n_p n_w) L`. Negative values mean the data is not
/// rich enough for the estimate to be meaningful.
pub fn estimate_order(rep: &DdRepresentation, m: usize) -> i64 {
    rep.stacked_rank() as i64 - ((m + rep.n_p * rep.n_w()) * rep.depth) as i64
}
