//! Random SISO shifted-affine systems for property tests.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::io::{simulate_io, Complexity, LpvIoModel};
use crate::error::{Error, Result};
use crate::signals::Window;

/// Knobs of [`random_siso`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomSystemSpec {
    pub lag: usize,
    pub n_p: usize,
    pub feedthrough: bool,
    /// Minimum `sigma_min / sigma_max` of the Sylvester matrix at `p = 0`.
    pub coprime_margin: f64,
    /// Largest `|y|` tolerated over the bounded-response probe.
    pub response_bound: f64,
}

impl RandomSystemSpec {
    pub fn new(lag: usize, n_p: usize, feedthrough: bool) -> Self {
        RandomSystemSpec {
            lag,
            n_p,
            feedthrough,
            coprime_margin: 1e-3,
            response_bound: 1e3,
        }
    }
}

const MAX_DRAWS: usize = 100_000;
const PROBE_STEPS: usize = 300;

/// Draw coefficients i.i.d. from `U[-1, 1]` until the model passes the
/// coprimeness proxy (well-conditioned Sylvester matrix of `a(z)`, `b(z)` at
/// `p = 0`) and stays bounded for `U[-1, 1]` input and scheduling.
pub fn random_siso<R: Rng + ?Sized>(rng: &mut R, spec: RandomSystemSpec) -> Result<LpvIoModel> {
    let RandomSystemSpec { lag, n_p, .. } = spec;
    if lag == 0 || n_p == 0 {
        return Err(Error::InvalidParameter(
            "lag and n_p must be at least 1".into(),
        ));
    }
    let s = |x: f64| DMatrix::from_element(1, 1, x);
    for _ in 0..MAX_DRAWS {
        let mut a = vec![std::iter::once(s(1.0))
            .chain((0..n_p).map(|_| s(0.0)))
            .collect::<Vec<_>>()];
        for _ in 0..lag {
            a.push((0..=n_p).map(|_| s(rng.random_range(-1.0..=1.0))).collect());
        }
        let mut b = Vec::with_capacity(lag + 1);
        for i in 0..=lag {
            b.push(
                (0..=n_p)
                    .map(|_| {
                        if i == 0 && !spec.feedthrough {
                            s(0.0)
                        } else {
                            s(rng.random_range(-1.0..=1.0))
                        }
                    })
                    .collect(),
            );
        }
        let model = LpvIoModel::new(a, b, Complexity::new(1, lag, lag)?)?;
        if coprime_margin(&model) < spec.coprime_margin {
            continue;
        }
        if !bounded_response(&model, rng, spec.response_bound) {
            continue;
        }
        return Ok(model);
    }
    Err(Error::InvalidParameter(format!(
        "no admissible system found in {MAX_DRAWS} draws"
    )))
}

/// `sigma_min / sigma_max` of the Sylvester matrix of the constant parts
/// `a(z) = z^n + a_1 z^{n-1} + ... + a_n` and `b(z) = b_0 z^n + ... + b_n`.
pub fn coprime_margin(model: &LpvIoModel) -> f64 {
    let n = model.n_r();
    let a: Vec<f64> = (0..=n).map(|i| model.a_coeff(i, 0)[(0, 0)]).collect();
    let b: Vec<f64> = (0..=n).map(|i| model.b_coeff(i, 0)[(0, 0)]).collect();
    let mut syl = DMatrix::zeros(2 * n, 2 * n);
    for r in 0..n {
        for (i, (&ai, &bi)) in a.iter().zip(&b).enumerate() {
            syl[(r, r + i)] = ai;
            syl[(n + r, r + i)] = bi;
        }
    }
    let sv = syl.singular_values();
    let max = sv.max();
    if max == 0.0 {
        0.0
    } else {
        sv.min() / max
    }
}

fn bounded_response<R: Rng + ?Sized>(model: &LpvIoModel, rng: &mut R, bound: f64) -> bool {
    let n_p = model.n_p();
    let u: Vec<_> = (0..PROBE_STEPS)
        .map(|_| DVector::from_element(1, rng.random_range(-1.0..=1.0)))
        .collect();
    let p: Vec<_> = (0..PROBE_STEPS)
        .map(|_| DVector::from_fn(n_p, |_, _| rng.random_range(-1.0..=1.0)))
        .collect();
    let init = Window::zeros(1, 1, n_p, model.n_r());
    match simulate_io(model, &u, &p, &init) {
        Ok(y) => y.iter().all(|v| v[0].is_finite() && v[0].abs() <= bound),
        Err(_) => false,
    }
}
