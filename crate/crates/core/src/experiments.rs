//! Seeded data generators and the end-to-end experiment recipes (the
//! counterexample, the three mass-spring-damper simulation cases, and the
//! nonlinear control example).
//!
//! Every random draw goes through [`ChaCha8Rng`] seeded from a `u64`, so
//! outputs are identical across platforms.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::control::{iterate, ControlProblem, IterationRecord};
use crate::ddrep::{
    build, embedded_pe_check, gpe_check, min_samples, naive_input_pe_check, DataDictionary,
    Provenance, RankReport,
};
use crate::error::{Error, Result};
use crate::models::{
    example2_model, kernel_residual, msd_default, nl_example_model, random_siso, simulate_io,
    Example4System, LpvIoModel, NlExamplePsi, RandomSystemSpec, Reading, SchedulingMap,
};
use crate::signals::{scalars, SchedulingTrajectory, Trajectory, Window};
use crate::simulate::{dd_simulate, solution_samples, SimProblem, Uniqueness};

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `len` i.i.d. `N(0, I_dim)` vectors.
pub fn normal_samples<R: Rng + ?Sized>(rng: &mut R, len: usize, dim: usize) -> Vec<DVector<f64>> {
    (0..len)
        .map(|_| DVector::from_fn(dim, |_, _| StandardNormal.sample(rng)))
        .collect()
}

/// `len` i.i.d. `U[-1, 1]^dim` vectors.
pub fn uniform_samples<R: Rng + ?Sized>(rng: &mut R, len: usize, dim: usize) -> Vec<DVector<f64>> {
    (0..len)
        .map(|_| DVector::from_fn(dim, |_, _| rng.random_range(-1.0..=1.0)))
        .collect()
}

/// Drive `model` from the past window `init` and return the generated window.
pub fn respond(
    model: &LpvIoModel,
    init: &Window,
    u: &[DVector<f64>],
    p: &[DVector<f64>],
) -> Result<Window> {
    let y = simulate_io(model, u, p, init)?;
    Window::from_parts(u, &y, p, model.n_u(), model.n_y(), model.n_p())
}

fn dictionary(win: Window, description: &str, seed: u64) -> Result<DataDictionary> {
    DataDictionary::from_window(
        win,
        Provenance {
            description: description.to_string(),
            seed: Some(seed),
        },
    )
}

/// Mass-spring-damper data with `u, p ~ N(0, 1)` from rest.
pub fn msd_dictionary(n_d: usize, seed: u64) -> Result<DataDictionary> {
    let model = msd_default();
    let mut rng = seeded_rng(seed);
    let u = normal_samples(&mut rng, n_d, 1);
    let p = normal_samples(&mut rng, n_d, 1);
    let win = respond(&model, &Window::zeros(1, 1, 1, model.n_r()), &u, &p)?;
    dictionary(
        win,
        "msd: u ~ N(0,1), p ~ N(0,1), zero initial condition",
        seed,
    )
}

/// Counterexample data: `p ~ N(0, 1)` and the feedback input
/// `u(k) = p(k-1)(1 - u(k-1)) + 2`, starting from `y(0) = u(0) = p(0) = 1`.
pub fn example2_dictionary(n_d: usize, seed: u64) -> Result<DataDictionary> {
    let model = example2_model();
    let mut rng = seeded_rng(seed);
    let p = normal_samples(&mut rng, n_d, 1);
    let mut past = Window::from_parts(
        &scalars(&[1.0]),
        &scalars(&[1.0]),
        &scalars(&[1.0]),
        1,
        1,
        1,
    )?;
    let mut u = Vec::with_capacity(n_d);
    let mut y = Vec::with_capacity(n_d);
    for pk in &p {
        let u_prev = past.w.input(0)[0];
        let p_prev = past.p.samples()[0][0];
        let uk = DVector::from_element(1, p_prev * (1.0 - u_prev) + 2.0);
        let step = respond(
            &model,
            &past,
            std::slice::from_ref(&uk),
            std::slice::from_ref(pk),
        )?;
        y.push(step.w.output(0));
        u.push(uk);
        past = step;
    }
    let win = Window::from_parts(&u, &y, &p, 1, 1, 1)?;
    dictionary(
        win,
        "example2: p ~ N(0,1), feedback input, y(0)=u(0)=p(0)=1",
        seed,
    )
}

/// Nonlinear example under `u ~ N(0, 1)` from rest, with `p = psi(u, y)`.
pub fn nl_dictionary(n_d: usize, seed: u64, reading: Reading) -> Result<DataDictionary> {
    let sys = Example4System { reading };
    let mut rng = seeded_rng(seed);
    let u: Vec<f64> = normal_samples(&mut rng, n_d, 1)
        .iter()
        .map(|v| v[0])
        .collect();
    let init = Trajectory::new(vec![DVector::zeros(2); Example4System::LAG], 1, 1)?;
    let y = sys.simulate(&init, &u)?;
    let (u, y) = (scalars(&u), scalars(&y));
    let p = NlExamplePsi.eval_all(&u, &y);
    let win = Window::from_parts(&u, &y, &p, 1, 1, 2)?;
    dictionary(
        win,
        "nonlinear example: u ~ N(0,1), zero initial condition, p = psi(u, y)",
        seed,
    )
}

/// Random-system data: `u ~ N(0, 1)`, `p ~ U[-1, 1]`, from rest.
pub fn random_dictionary<R: Rng + ?Sized>(
    model: &LpvIoModel,
    n_d: usize,
    rng: &mut R,
) -> Result<DataDictionary> {
    let u = normal_samples(rng, n_d, model.n_u());
    let p = uniform_samples(rng, n_d, model.n_p());
    let win = respond(
        model,
        &Window::zeros(model.n_u(), model.n_y(), model.n_p(), model.n_r()),
        &u,
        &p,
    )?;
    DataDictionary::from_window(
        win,
        Provenance {
            description: "random system: u ~ N(0,1), p ~ U[-1,1], zero initial condition".into(),
            seed: None,
        },
    )
}

/// A trajectory of `model` that starts from a generic state: `warmup`
/// samples of excitation are simulated from rest and discarded.
pub fn generic_trajectory<R: Rng + ?Sized>(
    model: &LpvIoModel,
    len: usize,
    warmup: usize,
    uniform_scheduling: bool,
    rng: &mut R,
) -> Result<(Window, Window)> {
    let total = warmup + len;
    let u = normal_samples(rng, total, model.n_u());
    let p = if uniform_scheduling {
        uniform_samples(rng, total, model.n_p())
    } else {
        normal_samples(rng, total, model.n_p())
    };
    let rest = Window::zeros(model.n_u(), model.n_y(), model.n_p(), model.n_r());
    let full = rest.concat(&respond(model, &rest, &u, &p)?)?;
    let keep_from = full.len() - len;
    Ok((full.window(0, keep_from), full.window(keep_from, len)))
}

fn max_abs_diff(a: &[DVector<f64>], b: &[DVector<f64>]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).amax())
        .fold(0.0, f64::max)
}

fn flat(v: &[DVector<f64>]) -> Vec<f64> {
    v.iter().map(|x| x[0]).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Example2Report {
    pub n_d: usize,
    pub depth: usize,
    pub seed: u64,
    pub naive: RankReport,
    pub embedded: RankReport,
    pub gpe: RankReport,
    pub output_constant: bool,
    pub max_output_deviation: f64,
    pub u: Vec<f64>,
    pub y: Vec<f64>,
    pub p: Vec<f64>,
}

pub fn run_example2(seed: u64) -> Result<Example2Report> {
    let (n_d, depth) = (40, 10);
    let data = example2_dictionary(n_d, seed)?;
    let c = example2_model().complexity();
    let y = data.w.outputs();
    let dev = y.iter().map(|v| (v[0] - 1.0).abs()).fold(0.0, f64::max);
    Ok(Example2Report {
        n_d,
        depth,
        seed,
        naive: naive_input_pe_check(&data, &c, depth)?,
        embedded: embedded_pe_check(&data, &c, depth)?,
        gpe: gpe_check(&build(&data, depth)?, &c),
        output_constant: dev <= 1e-12,
        max_output_deviation: dev,
        u: flat(&data.w.inputs()),
        y: flat(&y),
        p: flat(data.p.samples()),
    })
}

/// Shared data of the three simulation cases.
#[derive(Debug, Clone)]
pub struct MsdSetup {
    pub model: LpvIoModel,
    pub data: DataDictionary,
    /// Samples preceding the initial trajectory, for the model-based oracle.
    pub past: Window,
    /// Initial trajectory of length 5.
    pub initial: Window,
    /// True response of length 35.
    pub response: Window,
}

pub const MSD_DEPTH: usize = 40;
pub const MSD_TI: usize = 5;
pub const MSD_TR: usize = 35;

pub fn msd_setup(seed: u64) -> Result<MsdSetup> {
    let model = msd_default();
    let c = model.complexity();
    let n_d = min_samples(&c, 1, 2, MSD_DEPTH);
    let data = msd_dictionary(n_d, seed)?;
    let mut rng = seeded_rng(seed ^ 0x5eed_0001);
    let (past, test) = generic_trajectory(&model, MSD_TI + MSD_TR, 20, false, &mut rng)?;
    Ok(MsdSetup {
        model,
        data,
        past,
        initial: test.window(0, MSD_TI),
        response: test.window(MSD_TI, MSD_TR),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CaseReport {
    pub case: u8,
    pub n_d: usize,
    pub t_i: usize,
    pub t_r: usize,
    pub gpe: RankReport,
    pub residual: f64,
    pub consistent: bool,
    pub uniqueness: Uniqueness,
    pub max_error: f64,
    pub y_true: Vec<f64>,
    pub y_dd: Vec<f64>,
    /// Extra admissible responses (non-unique case only).
    pub samples: Vec<Vec<f64>>,
    /// Largest kernel residual over the sampled windows.
    pub sample_kernel_residual: f64,
    /// Smallest pairwise max-abs difference between samples.
    pub sample_min_spread: f64,
}

fn run_case(setup: &MsdSetup, case: u8, n_d: usize, t_i: usize, seed: u64) -> Result<CaseReport> {
    let data = setup.data.truncate(n_d);
    let c = setup.model.complexity();
    let ini = setup.initial.tail(t_i);
    let prob = SimProblem {
        data: &data,
        w_ini: ini.w.clone(),
        p_ini: ini.p.clone(),
        u_r: setup.response.w.inputs(),
        p_r: setup.response.p.clone(),
    };
    let gpe = gpe_check(&build(&data, t_i + MSD_TR)?, &c);
    let res = dd_simulate(&prob)?;
    let y_true = setup.response.w.outputs();

    let mut samples = Vec::new();
    let mut sample_kernel_residual: f64 = 0.0;
    let mut sample_min_spread = f64::INFINITY;
    if let Uniqueness::NonUnique { .. } = res.uniqueness {
        let ys = solution_samples(&prob, 5, seed)?;
        for y in &ys {
            let tail = Window::from_parts(&prob.u_r, y, prob.p_r.samples(), 1, 1, 1)?;
            let win = ini.concat(&tail)?;
            sample_kernel_residual =
                sample_kernel_residual.max(kernel_residual(&setup.model, &win)?);
        }
        for i in 0..ys.len() {
            for j in i + 1..ys.len() {
                sample_min_spread = sample_min_spread.min(max_abs_diff(&ys[i], &ys[j]));
            }
        }
        samples = ys.iter().map(|y| flat(y)).collect();
    }
    Ok(CaseReport {
        case,
        n_d,
        t_i,
        t_r: MSD_TR,
        gpe,
        residual: res.residual,
        consistent: res.consistent,
        uniqueness: res.uniqueness,
        max_error: max_abs_diff(&res.y_r, &y_true),
        y_true: flat(&y_true),
        y_dd: flat(&res.y_r),
        samples,
        sample_kernel_residual,
        sample_min_spread,
    })
}

/// The three simulation cases: full dictionary, truncated dictionary (last
/// 10 samples dropped), and a too-short initial trajectory.
pub fn run_msd_cases(seed: u64) -> Result<Vec<CaseReport>> {
    let setup = msd_setup(seed)?;
    let n_d = setup.data.len();
    Ok(vec![
        run_case(&setup, 1, n_d, MSD_TI, seed)?,
        run_case(&setup, 2, n_d - 10, MSD_TI, seed)?,
        run_case(&setup, 3, n_d, 1, seed)?,
    ])
}

/// Initial trajectory of the control example. The printed `y(3)` does not
/// satisfy the system, so it is recomputed from the first two samples;
/// the scheduling is `psi(w_i)`.
pub fn nl_initial_window(reading: Reading) -> Result<Window> {
    let u = [0.75, -0.26, -0.03];
    let mut y = [2.84, 7.31, 0.0];
    y[2] = Example4System { reading }.step(y[1], y[0], u[1], u[0]);
    let (u, y) = (scalars(&u), scalars(&y));
    let p = NlExamplePsi.eval_all(&u, &y);
    Window::from_parts(&u, &y, &p, 1, 1, 2)
}

/// Largest `|y_nonlinear - y_embedding|` over `steps` samples of `N(0, 1)`
/// input from rest, with the embedding driven by `p(k) = psi(u(k), y(k))`.
pub fn embedding_mismatch(reading: Reading, steps: usize, seed: u64) -> Result<f64> {
    let sys = Example4System { reading };
    let model = nl_example_model();
    let mut rng = seeded_rng(seed);
    let u: Vec<f64> = normal_samples(&mut rng, steps, 1)
        .iter()
        .map(|v| v[0])
        .collect();
    let rest = Trajectory::new(vec![DVector::zeros(2); 2], 1, 1)?;
    let y_nl = sys.simulate(&rest, &u)?;

    let mut past = Window::zeros(1, 1, 2, 2);
    let mut worst: f64 = 0.0;
    for (k, &uk) in u.iter().enumerate() {
        let uk = DVector::from_element(1, uk);
        // b_0 = 0: the current scheduling sample does not enter y(k).
        let y = simulate_io(
            &model,
            std::slice::from_ref(&uk),
            &[DVector::zeros(2)],
            &past,
        )?;
        worst = worst.max((y[0][0] - y_nl[k]).abs());
        let pk = NlExamplePsi.eval(&uk, &y[0]);
        let step = Window::from_parts(std::slice::from_ref(&uk), &y, &[pk], 1, 1, 2)?;
        past = past.concat(&step)?.tail(2);
    }
    Ok(worst)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NonlinearReport {
    pub seed: u64,
    pub reading: String,
    pub n_d: usize,
    pub min_samples: usize,
    pub reference_n_d: usize,
    pub depth: usize,
    pub gpe: RankReport,
    pub embedding_mismatch_sin: f64,
    pub embedding_mismatch_sinc: f64,
    pub converged: bool,
    pub iterations: usize,
    /// `||y_true(u_r) - y_r||_2`.
    pub tracking_error: f64,
    /// `max |y_true|` over the last five samples.
    pub tail_max: f64,
    pub u_r: Vec<f64>,
    pub y_r: Vec<f64>,
    pub y_true: Vec<f64>,
    pub history: Vec<IterationRecord>,
}

pub const NL_TI: usize = 3;
pub const NL_TR: usize = 30;
/// Dictionary length stated for the control example; below the GPE bound.
pub const NL_REFERENCE_ND: usize = 139;

pub fn run_nonlinear(seed: u64) -> Result<NonlinearReport> {
    let reading = Reading::Sin;
    let model = nl_example_model();
    let c = model.complexity();
    let depth = NL_TI + NL_TR;
    let n_min = min_samples(&c, 2, 2, depth);
    let data = nl_dictionary(n_min, seed, reading)?;
    let gpe = gpe_check(&build(&data, depth)?, &c);
    let ini = nl_initial_window(reading)?;
    let psi = NlExamplePsi;
    let prob = ControlProblem::new(&data, ini.w.clone(), ini.p.clone(), NL_TR, &psi);
    let res = iterate(&prob)?;

    let sys = Example4System { reading };
    let u_r = flat(&res.u_r);
    let y_true = sys.simulate(&ini.w, &u_r)?;
    let y_r = flat(&res.y_r);
    let tracking_error = y_true
        .iter()
        .zip(&y_r)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    let tail_max = y_true[y_true.len() - 5..]
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(NonlinearReport {
        seed,
        reading: "sin".into(),
        n_d: data.len(),
        min_samples: n_min,
        reference_n_d: NL_REFERENCE_ND,
        depth,
        gpe,
        embedding_mismatch_sin: embedding_mismatch(Reading::Sin, 100, seed)?,
        embedding_mismatch_sinc: embedding_mismatch(Reading::Sinc, 100, seed)?,
        converged: res.converged,
        iterations: res.iterations,
        tracking_error,
        tail_max,
        u_r,
        y_r,
        y_true,
        history: res.history,
    })
}

/// Named dictionary generators understood by the command line.
pub fn generate_named(
    model: &str,
    input: Option<&str>,
    n_d: usize,
    seed: u64,
) -> Result<DataDictionary> {
    if n_d == 0 {
        return Err(Error::InvalidParameter("N_d must be at least 1".into()));
    }
    match (model, input.unwrap_or("default")) {
        ("msd", "default" | "normal") => msd_dictionary(n_d, seed),
        ("example2", "default" | "feedback") => example2_dictionary(n_d, seed),
        ("nonlinear" | "nl_example", "default" | "normal") => {
            nl_dictionary(n_d, seed, Reading::Sin)
        }
        ("msd" | "example2" | "nonlinear" | "nl_example", other) => Err(Error::Unknown {
            kind: "input signal",
            name: other.to_string(),
        }),
        (other, _) => Err(Error::Unknown {
            kind: "model",
            name: other.to_string(),
        }),
    }
}

/// Model behind a generator name.
pub fn named_model(model: &str) -> Result<LpvIoModel> {
    match model {
        "msd" => Ok(msd_default()),
        "example2" => Ok(example2_model()),
        "nonlinear" | "nl_example" => Ok(nl_example_model()),
        other => Err(Error::Unknown {
            kind: "model",
            name: other.to_string(),
        }),
    }
}

/// Scheduling trajectory of zeros, handy as an initial guess.
pub fn zero_scheduling(n_p: usize, len: usize) -> SchedulingTrajectory {
    SchedulingTrajectory::from_samples(vec![DVector::zeros(n_p); len], n_p).expect("n_p >= 1")
}

/// `count` random SISO systems cycling through lag 1..=3, one or two
/// scheduling variables, and with or without feed-through.
pub fn random_systems(count: usize, seed: u64) -> Result<Vec<LpvIoModel>> {
    let mut rng = seeded_rng(seed);
    (0..count)
        .map(|i| {
            let spec = RandomSystemSpec::new(1 + i % 3, 1 + (i / 3) % 2, (i / 6) % 2 == 1);
            random_siso(&mut rng, spec)
        })
        .collect()
}
