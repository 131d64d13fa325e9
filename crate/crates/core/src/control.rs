//! Iterative data-driven control through an LPV embedding: solve an
//! equality-constrained QP over the Hankel coefficients for a frozen
//! scheduling guess, refresh the guess with the scheduling map, repeat.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::ddrep::{build_with_tol, DataDictionary, DdRepresentation};
use crate::error::{Error, Result};
use crate::linalg::{vcat, vstack, FullSvd, RankTolerance};
use crate::models::SchedulingMap;
use crate::signals::{unvec, vec_samples, SchedulingTrajectory, Trajectory};

/// One solved QP.
#[derive(Debug, Clone)]
pub struct QpSolution {
    pub u_r: Vec<DVector<f64>>,
    pub y_r: Vec<DVector<f64>>,
    pub g: DVector<f64>,
    pub objective: f64,
    /// `||E g - f||_2`.
    pub feasibility: f64,
    /// Residual of the KKT system relative to `1 + ||rhs||`.
    pub kkt_residual: f64,
}

/// Hankel blocks of a control problem, built once and reused for every
/// scheduling guess.
#[derive(Debug, Clone)]
pub struct QpWorkspace {
    rep: DdRepresentation,
    h_ini: DMatrix<f64>,
    h_u: DMatrix<f64>,
    h_y: DMatrix<f64>,
    hessian: DMatrix<f64>,
    q: DMatrix<f64>,
    r: DMatrix<f64>,
    w_ini: Trajectory,
    p_ini: SchedulingTrajectory,
    t_r: usize,
    pub feasibility_tol: f64,
}

impl QpWorkspace {
    pub fn new(
        data: &DataDictionary,
        w_ini: &Trajectory,
        p_ini: &SchedulingTrajectory,
        t_r: usize,
        q: &DMatrix<f64>,
        r: &DMatrix<f64>,
    ) -> Result<Self> {
        let (n_u, n_y) = (data.n_u(), data.n_y());
        let t_i = w_ini.len();
        if t_r == 0 {
            return Err(Error::InvalidParameter(
                "horizon T_r must be at least 1".into(),
            ));
        }
        if w_ini.n_u() != n_u || w_ini.n_y() != n_y {
            return Err(Error::dim("initial trajectory", data.n_w(), w_ini.n_w()));
        }
        if p_ini.len() != t_i {
            return Err(Error::Alignment {
                what: "initial trajectory/scheduling",
                left: t_i,
                right: p_ini.len(),
            });
        }
        if p_ini.n_p() != data.n_p() {
            return Err(Error::dim("initial scheduling", data.n_p(), p_ini.n_p()));
        }
        if q.shape() != (t_r * n_y, t_r * n_y) {
            return Err(Error::dim("output weight Q", t_r * n_y, q.nrows()));
        }
        if r.shape() != (t_r * n_u, t_r * n_u) {
            return Err(Error::dim("input weight R", t_r * n_u, r.nrows()));
        }
        let rep = build_with_tol(data, t_i + t_r, RankTolerance::from_env())?;
        let h_ini = rep.hw.block_rows_range(0, t_i);
        let h_u = rep.hw.select(t_i, t_r, 0, n_u);
        let h_y = rep.hw.select(t_i, t_r, n_u, n_y);
        let hessian = h_y.transpose() * q * &h_y + h_u.transpose() * r * &h_u;
        Ok(QpWorkspace {
            rep,
            h_ini,
            h_u,
            h_y,
            hessian,
            q: q.clone(),
            r: r.clone(),
            w_ini: w_ini.clone(),
            p_ini: p_ini.clone(),
            t_r,
            feasibility_tol: 1e-6,
        })
    }

    pub fn horizon(&self) -> usize {
        self.t_r
    }

    /// Minimize `y' Q y + u' R u` subject to the initial-trajectory rows and
    /// the scheduling restriction for `p_r`. The KKT system is solved with a
    /// truncated SVD, which yields the minimum-norm `g` among the optimizers.
    pub fn solve(&self, p_r: &SchedulingTrajectory) -> Result<QpSolution> {
        if p_r.len() != self.t_r {
            return Err(Error::Alignment {
                what: "response scheduling/horizon",
                left: p_r.len(),
                right: self.t_r,
            });
        }
        let p_all = self.p_ini.concat(p_r)?;
        let restriction = self.rep.restriction_matrix(p_all.samples())?;
        let e = vstack(&[&self.h_ini, &restriction]);
        let f = vcat(&[&self.w_ini.vec(), &DVector::zeros(restriction.nrows())]);

        let n = e.ncols();
        let m = e.nrows();
        let mut kkt = DMatrix::zeros(n + m, n + m);
        kkt.view_mut((0, 0), (n, n))
            .copy_from(&(&self.hessian * 2.0));
        kkt.view_mut((0, n), (n, m)).copy_from(&e.transpose());
        kkt.view_mut((n, 0), (m, n)).copy_from(&e);
        let mut rhs = DVector::zeros(n + m);
        rhs.rows_mut(n, m).copy_from(&f);

        let sol = FullSvd::new(&kkt).solve(&rhs, &self.rep.tol);
        let kkt_residual = (&kkt * &sol - &rhs).norm() / (1.0 + rhs.norm());
        let g = sol.rows(0, n).into_owned();
        let feasibility = (&e * &g - &f).norm();
        if feasibility > self.feasibility_tol * (1.0 + f.norm()) {
            return Err(Error::Infeasible {
                residual: feasibility,
            });
        }
        let u = &self.h_u * &g;
        let y = &self.h_y * &g;
        let objective = y.dot(&(&self.q * &y)) + u.dot(&(&self.r * &u));
        Ok(QpSolution {
            u_r: split(&u, self.rep.n_u, self.t_r),
            y_r: unvec(&y, self.rep.n_y),
            g,
            objective,
            feasibility,
            kkt_residual,
        })
    }
}

fn split(v: &DVector<f64>, block: usize, len: usize) -> Vec<DVector<f64>> {
    if block == 0 {
        vec![DVector::zeros(0); len]
    } else {
        unvec(v, block)
    }
}

/// One-shot QP for a fixed scheduling guess.
pub fn qp_step(
    data: &DataDictionary,
    w_ini: &Trajectory,
    p_ini: &SchedulingTrajectory,
    p_r: &SchedulingTrajectory,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<QpSolution> {
    QpWorkspace::new(data, w_ini, p_ini, p_r.len(), q, r)?.solve(p_r)
}

pub struct ControlProblem<'a> {
    pub data: &'a DataDictionary,
    pub w_ini: Trajectory,
    pub p_ini: SchedulingTrajectory,
    pub t_r: usize,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub psi: &'a dyn SchedulingMap,
    /// Initial scheduling guess; zero when `None`.
    pub p_r_init: Option<SchedulingTrajectory>,
    pub tol: f64,
    pub max_iter: usize,
}

impl<'a> ControlProblem<'a> {
    /// Identity weights, zero initial guess, `tol = 1e-6`, 100 iterations.
    pub fn new(
        data: &'a DataDictionary,
        w_ini: Trajectory,
        p_ini: SchedulingTrajectory,
        t_r: usize,
        psi: &'a dyn SchedulingMap,
    ) -> Self {
        ControlProblem {
            q: DMatrix::identity(t_r * data.n_y(), t_r * data.n_y()),
            r: DMatrix::identity(t_r * data.n_u(), t_r * data.n_u()),
            data,
            w_ini,
            p_ini,
            t_r,
            psi,
            p_r_init: None,
            tol: 1e-6,
            max_iter: 100,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub u: Vec<Vec<f64>>,
    pub y: Vec<Vec<f64>>,
    /// Scheduling used in this iteration's QP.
    pub p: Vec<Vec<f64>>,
    pub objective: f64,
    /// `||psi(u, y) - p||_2` over the whole horizon.
    pub change: f64,
}

#[derive(Debug, Clone)]
pub struct ControlResult {
    pub u_r: Vec<DVector<f64>>,
    pub y_r: Vec<DVector<f64>>,
    /// Scheduling of the last QP; within `tol` of `psi(u_r, y_r)` when
    /// converged.
    pub p_r: SchedulingTrajectory,
    pub g: DVector<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub history: Vec<IterationRecord>,
}

fn to_rows(v: &[DVector<f64>]) -> Vec<Vec<f64>> {
    v.iter().map(|x| x.iter().copied().collect()).collect()
}

pub fn iterate(prob: &ControlProblem) -> Result<ControlResult> {
    if !(prob.tol > 0.0) {
        return Err(Error::InvalidParameter("tolerance must be positive".into()));
    }
    if prob.max_iter == 0 {
        return Err(Error::InvalidParameter(
            "max_iter must be at least 1".into(),
        ));
    }
    let n_p = prob.data.n_p();
    if prob.psi.n_p() != n_p {
        return Err(Error::dim("scheduling map output", n_p, prob.psi.n_p()));
    }
    let ws = QpWorkspace::new(
        prob.data,
        &prob.w_ini,
        &prob.p_ini,
        prob.t_r,
        &prob.q,
        &prob.r,
    )?;
    let mut p_r = match &prob.p_r_init {
        Some(p) => p.clone(),
        None => SchedulingTrajectory::from_samples(vec![DVector::zeros(n_p); prob.t_r], n_p)?,
    };
    let mut history = Vec::new();
    let mut converged = false;
    let mut last = None;
    for it in 1..=prob.max_iter {
        let sol = ws.solve(&p_r)?;
        let p_new = prob.psi.eval_all(&sol.u_r, &sol.y_r);
        let change = (vec_samples(&p_new) - vec_samples(p_r.samples())).norm();
        history.push(IterationRecord {
            iteration: it,
            u: to_rows(&sol.u_r),
            y: to_rows(&sol.y_r),
            p: to_rows(p_r.samples()),
            objective: sol.objective,
            change,
        });
        last = Some(sol);
        if change < prob.tol {
            converged = true;
            break;
        }
        if it < prob.max_iter {
            p_r = SchedulingTrajectory::from_samples(p_new, n_p)?;
        }
    }
    let sol = last.expect("at least one iteration");
    Ok(ControlResult {
        u_r: sol.u_r,
        y_r: sol.y_r,
        p_r,
        g: sol.g,
        iterations: history.len(),
        converged,
        history,
    })
}
