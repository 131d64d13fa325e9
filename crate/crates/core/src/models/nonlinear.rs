use nalgebra::{DMatrix, DVector};

use super::io::{Complexity, LpvIoModel};
use crate::error::{Error, Result};
use crate::signals::Trajectory;

/// Map `(u(k), y(k)) -> p(k)` defining an LPV embedding.
pub trait SchedulingMap: Send + Sync {
    fn name(&self) -> &str;
    fn n_p(&self) -> usize;
    fn eval(&self, u: &DVector<f64>, y: &DVector<f64>) -> DVector<f64>;

    fn eval_all(&self, u: &[DVector<f64>], y: &[DVector<f64>]) -> Vec<DVector<f64>> {
        u.iter().zip(y).map(|(u, y)| self.eval(u, y)).collect()
    }
}

/// Unnormalized cardinal sine `sin(x)/x`.
pub fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        x.sin() / x
    }
}

/// `psi(u, y) = (tanh y, sinc(u) exp(-y^2))`.
#[derive(Debug, Clone, Copy, Default)]
pub struct NlExamplePsi;

impl SchedulingMap for NlExamplePsi {
    fn name(&self) -> &str {
        "nl_example"
    }

    fn n_p(&self) -> usize {
        2
    }

    fn eval(&self, u: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        let (u, y) = (u[0], y[0]);
        DVector::from_vec(vec![y.tanh(), sinc(u) * (-y * y).exp()])
    }
}

/// Names accepted by [`scheduling_map`].
pub const SCHEDULING_MAPS: &[&str] = &["nl_example"];

pub fn scheduling_map(name: &str) -> Result<Box<dyn SchedulingMap>> {
    match name {
        "nl_example" => Ok(Box::new(NlExamplePsi)),
        _ => Err(Error::Unknown {
            kind: "scheduling map",
            name: name.to_string(),
        }),
    }
}

/// Which form of the `u(k-1)` term of the nonlinear example to simulate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reading {
    /// `0.4 sin(u(k-1)) exp(-y(k-1)^2)`
    Sin,
    /// `0.4 sinc(u(k-1)) exp(-y(k-1)^2)`
    Sinc,
}

/// SISO nonlinear system
///
/// ```text
/// y(k) = -(0.2 - 0.4 tanh y(k-1)) y(k-1) - tanh(y(k-2)) y(k-2)
///        + 1.2 u(k-1) + 0.4 s(u(k-1)) exp(-y(k-1)^2)
///        + (1 + 0.6 tanh y(k-2)) u(k-2)
/// ```
///
/// with `s = sin` or `sinc` depending on the [`Reading`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Example4System {
    pub reading: Reading,
}

impl Example4System {
    pub const LAG: usize = 2;

    pub fn step(&self, y1: f64, y2: f64, u1: f64, u2: f64) -> f64 {
        let s = match self.reading {
            Reading::Sin => u1.sin(),
            Reading::Sinc => sinc(u1),
        };
        -(0.2 - 0.4 * y1.tanh()) * y1 - y2.tanh() * y2
            + 1.2 * u1
            + 0.4 * s * (-y1 * y1).exp()
            + (1.0 + 0.6 * y2.tanh()) * u2
    }

    /// Simulate after the past window `init` (at least two samples).
    pub fn simulate(&self, init: &Trajectory, u: &[f64]) -> Result<Vec<f64>> {
        if init.len() < Self::LAG {
            return Err(Error::InsufficientWindow {
                needed: Self::LAG,
                got: init.len(),
            });
        }
        if init.n_u() != 1 || init.n_y() != 1 {
            return Err(Error::dim("nonlinear example signal", 2, init.n_w()));
        }
        let n0 = init.len();
        let mut us: Vec<f64> = init.inputs().iter().map(|v| v[0]).collect();
        let mut ys: Vec<f64> = init.outputs().iter().map(|v| v[0]).collect();
        us.extend_from_slice(u);
        for k in n0..us.len() {
            let y = self.step(ys[k - 1], ys[k - 2], us[k - 1], us[k - 2]);
            ys.push(y);
        }
        Ok(ys.split_off(n0))
    }
}

/// Exact shifted-affine embedding of the `Sin` reading under [`NlExamplePsi`]:
/// `a_1 = 0.2 - 0.4 p_1`, `a_2 = p_1`, `b_1 = 1.2 + 0.4 p_2`,
/// `b_2 = 1 + 0.6 p_1`, `b_0 = 0`.
pub fn nl_example_model() -> LpvIoModel {
    let s = |x: f64| DMatrix::from_element(1, 1, x);
    LpvIoModel::new(
        vec![
            vec![s(1.0), s(0.0), s(0.0)],
            vec![s(0.2), s(-0.4), s(0.0)],
            vec![s(0.0), s(1.0), s(0.0)],
        ],
        vec![
            vec![s(0.0), s(0.0), s(0.0)],
            vec![s(1.2), s(0.0), s(0.4)],
            vec![s(1.0), s(0.6), s(0.0)],
        ],
        Complexity::new(1, 2, 2).expect("valid"),
    )
    .expect("valid model")
}

pub fn nl_example_system() -> (Example4System, NlExamplePsi, LpvIoModel) {
    (
        Example4System {
            reading: Reading::Sin,
        },
        NlExamplePsi,
        nl_example_model(),
    )
}
