//! Data-driven simulation: the response to an input-scheduling pair after a
//! given initial trajectory, computed from the dictionary alone.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::ddrep::{build_with_tol, DataDictionary};
use crate::error::{Error, Result};
use crate::linalg::{vcat, vstack, FullSvd, RankTolerance};
use crate::signals::{unvec, vec_samples, SchedulingTrajectory, Trajectory};

#[derive(Debug, Clone)]
pub struct SimProblem<'a> {
    pub data: &'a DataDictionary,
    pub w_ini: Trajectory,
    pub p_ini: SchedulingTrajectory,
    pub u_r: Vec<DVector<f64>>,
    pub p_r: SchedulingTrajectory,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Uniqueness {
    Unique,
    /// `freedom` is the dimension of the set of admissible responses.
    NonUnique {
        freedom: usize,
    },
}

impl Uniqueness {
    pub fn is_unique(&self) -> bool {
        matches!(self, Uniqueness::Unique)
    }
}

#[derive(Debug, Clone)]
pub struct SimResult {
    pub y_r: Vec<DVector<f64>>,
    pub g: DVector<f64>,
    /// `||A g - b||_2` of the stacked linear system.
    pub residual: f64,
    /// `residual <= consistency_tol * (1 + ||b||)`.
    pub consistent: bool,
    pub uniqueness: Uniqueness,
}

/// Tolerances of [`dd_simulate_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    pub rank: RankTolerance,
    pub consistency_tol: f64,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            rank: RankTolerance::from_env(),
            consistency_tol: 1e-6,
        }
    }
}

struct Analysis {
    g: DVector<f64>,
    y_r: DVector<f64>,
    residual: f64,
    rhs_norm: f64,
    /// SVD of `Hy N`, with `N` an orthonormal basis of `ker A`.
    free: FullSvd,
    null: DMatrix<f64>,
    h_y: DMatrix<f64>,
    freedom: usize,
}

fn validate(prob: &SimProblem) -> Result<(usize, usize)> {
    let d = prob.data;
    let t_i = prob.w_ini.len();
    let t_r = prob.u_r.len();
    if t_r == 0 {
        return Err(Error::Empty("response input"));
    }
    if prob.w_ini.n_u() != d.n_u() || prob.w_ini.n_y() != d.n_y() {
        return Err(Error::dim("initial trajectory", d.n_w(), prob.w_ini.n_w()));
    }
    if prob.p_ini.len() != t_i {
        return Err(Error::Alignment {
            what: "initial trajectory/scheduling",
            left: t_i,
            right: prob.p_ini.len(),
        });
    }
    if prob.p_r.len() != t_r {
        return Err(Error::Alignment {
            what: "response input/scheduling",
            left: t_r,
            right: prob.p_r.len(),
        });
    }
    if prob.p_ini.n_p() != d.n_p() || prob.p_r.n_p() != d.n_p() {
        return Err(Error::dim("scheduling", d.n_p(), prob.p_r.n_p()));
    }
    if let Some(bad) = prob.u_r.iter().find(|u| u.len() != d.n_u()) {
        return Err(Error::dim("response input", d.n_u(), bad.len()));
    }
    Ok((t_i, t_r))
}

fn analyze(prob: &SimProblem, opts: &SimOptions) -> Result<Analysis> {
    let (t_i, t_r) = validate(prob)?;
    let depth = t_i + t_r;
    let d = prob.data;
    let (n_u, n_y) = (d.n_u(), d.n_y());
    let rep = build_with_tol(d, depth, opts.rank)?;

    let p_all = prob.p_ini.concat(&prob.p_r)?;
    let restriction = rep.restriction_matrix(p_all.samples())?;
    let h_ini = rep.hw.block_rows_range(0, t_i);
    let h_u = rep.hw.select(t_i, t_r, 0, n_u);
    let h_y = rep.hw.select(t_i, t_r, n_u, n_y);

    let a = vstack(&[&h_ini, &h_u, &restriction]);
    let b = vcat(&[
        &prob.w_ini.vec(),
        &vec_samples(&prob.u_r),
        &DVector::zeros(restriction.nrows()),
    ]);

    let svd = FullSvd::new(&a);
    let g = svd.solve(&b, &opts.rank);
    let residual = (&a * &g - &b).norm();
    let null = svd.null_space(&opts.rank);
    let hy_null = &h_y * &null;
    let free = FullSvd::new(&hy_null);
    let cutoff = opts
        .rank
        .cutoff(h_y.nrows(), h_y.ncols(), FullSvd::new(&h_y).sigma_max());
    let freedom = free.rank_above(cutoff);
    Ok(Analysis {
        y_r: &h_y * &g,
        g,
        residual,
        rhs_norm: b.norm(),
        free,
        null,
        h_y,
        freedom,
    })
}

pub fn dd_simulate(prob: &SimProblem) -> Result<SimResult> {
    dd_simulate_with(prob, &SimOptions::default())
}

pub fn dd_simulate_with(prob: &SimProblem, opts: &SimOptions) -> Result<SimResult> {
    let an = analyze(prob, opts)?;
    let n_y = prob.data.n_y();
    Ok(SimResult {
        y_r: unvec(&an.y_r, n_y),
        residual: an.residual,
        consistent: an.residual <= opts.consistency_tol * (1.0 + an.rhs_norm),
        uniqueness: if an.freedom == 0 {
            Uniqueness::Unique
        } else {
            Uniqueness::NonUnique {
                freedom: an.freedom,
            }
        },
        g: an.g,
    })
}

/// `count` admissible responses of a non-unique problem. The first is the
/// minimum-norm response; the others add `sum_i c_i v_i` with `v_i` the
/// orthonormal output directions of the solution set and
/// `c_i ~ N(0, s^2)`, `s = max(||y_min||_2, 1e-2)`.
pub fn solution_samples(
    prob: &SimProblem,
    count: usize,
    seed: u64,
) -> Result<Vec<Vec<DVector<f64>>>> {
    let opts = SimOptions::default();
    let an = analyze(prob, &opts)?;
    if an.freedom == 0 {
        return Err(Error::UniqueResponse);
    }
    if count == 0 {
        return Ok(Vec::new());
    }
    let n_y = prob.data.n_y();
    let scale = an.y_r.norm().max(1e-2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    out.push(unvec(&an.y_r, n_y));
    for _ in 1..count {
        let mut g = an.g.clone();
        for i in 0..an.freedom {
            let c: f64 = StandardNormal.sample(&mut rng);
            let dir = &an.null * an.free.v.column(i) / an.free.singular_values[i];
            g.axpy(scale * c, &dir, 1.0);
        }
        out.push(unvec(&(&an.h_y * &g), n_y));
    }
    Ok(out)
}
