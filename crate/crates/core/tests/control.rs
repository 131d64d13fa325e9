use nalgebra::{DMatrix, DVector};

use lpvdd::control::{iterate, qp_step, ControlProblem, QpWorkspace};
use lpvdd::ddrep::{build, DataDictionary, Provenance};
use lpvdd::experiments::{
    nl_dictionary, nl_initial_window, normal_samples, respond, seeded_rng, zero_scheduling, NL_TI,
    NL_TR,
};
use lpvdd::linalg::vstack;
use lpvdd::models::{
    horizon_matrices, initial_state, msd_model, structured_from_io, NlExamplePsi, Reading,
    SchedulingMap,
};
use lpvdd::signals::{vec_samples, SchedulingTrajectory, Trajectory, Window};
use lpvdd::Error;

fn nl_data() -> DataDictionary {
    nl_dictionary(199, 7, Reading::Sin).unwrap()
}

#[test]
fn zero_initial_trajectory_gives_zero_optimum() {
    let data = nl_data();
    let w_ini = Trajectory::new(vec![DVector::zeros(2); NL_TI], 1, 1).unwrap();
    let p_ini = SchedulingTrajectory::constant(DVector::from_vec(vec![0.0, 1.0]), NL_TI).unwrap();
    let mut rng = seeded_rng(51);
    let p_r = SchedulingTrajectory::new(normal_samples(&mut rng, 10, 2)).unwrap();
    let sol = qp_step(
        &data,
        &w_ini,
        &p_ini,
        &p_r,
        &DMatrix::identity(10, 10),
        &DMatrix::identity(10, 10),
    )
    .unwrap();
    assert_eq!(sol.objective, 0.0);
    assert!(sol.u_r.iter().chain(&sol.y_r).all(|v| v.amax() == 0.0));
}

#[test]
fn lti_reduction_matches_a_model_based_kkt_oracle() {
    let model = msd_model(25.0, 5.5, 0.0, 1.0, 0.1).unwrap();
    let (t_i, t_r) = (3, 10);
    let mut rng = seeded_rng(52);
    let zeros = |n: usize| vec![DVector::zeros(1); n];
    let u = normal_samples(&mut rng, 100, 1);
    let win = respond(&model, &Window::zeros(1, 1, 1, 2), &u, &zeros(100)).unwrap();
    let data = DataDictionary::from_window(
        win,
        Provenance {
            description: "lti".into(),
            seed: None,
        },
    )
    .unwrap();

    let past = Window::from_parts(
        &normal_samples(&mut rng, 2, 1),
        &normal_samples(&mut rng, 2, 1),
        &zeros(2),
        1,
        1,
        1,
    )
    .unwrap();
    let ini = respond(
        &model,
        &past,
        &normal_samples(&mut rng, t_i, 1),
        &zeros(t_i),
    )
    .unwrap();
    let q = DMatrix::from_diagonal(&DVector::from_fn(t_r, |i, _| 1.0 + i as f64 / 10.0));
    let r = DMatrix::identity(t_r, t_r) * 0.5;
    let sol = qp_step(&data, &ini.w, &ini.p, &zero_scheduling(1, t_r), &q, &r).unwrap();

    // Oracle: minimize z' diag(R, Q) z over z = (u, y) subject to y - T u = O x.
    let x = initial_state(&model, &ini).unwrap();
    let h = horizon_matrices(&structured_from_io(&model), t_r);
    let n = 2 * t_r;
    let mut kkt = DMatrix::zeros(n + t_r, n + t_r);
    kkt.view_mut((0, 0), (t_r, t_r)).copy_from(&(&r * 2.0));
    kkt.view_mut((t_r, t_r), (t_r, t_r)).copy_from(&(&q * 2.0));
    let e = {
        let mut e = DMatrix::zeros(t_r, n);
        e.view_mut((0, 0), (t_r, t_r)).copy_from(&(-&h.t));
        e.view_mut((0, t_r), (t_r, t_r))
            .copy_from(&DMatrix::identity(t_r, t_r));
        e
    };
    kkt.view_mut((0, n), (n, t_r)).copy_from(&e.transpose());
    kkt.view_mut((n, 0), (t_r, n)).copy_from(&e);
    let mut rhs = DVector::zeros(n + t_r);
    rhs.rows_mut(n, t_r).copy_from(&(&h.o * &x));
    let z = kkt.lu().solve(&rhs).expect("nonsingular oracle");

    let u_dd = vec_samples(&sol.u_r);
    let y_dd = vec_samples(&sol.y_r);
    assert!(
        (&u_dd - z.rows(0, t_r)).amax() <= 1e-8,
        "{:e}",
        (&u_dd - z.rows(0, t_r)).amax()
    );
    assert!((&y_dd - z.rows(t_r, t_r)).amax() <= 1e-8);
    let obj =
        z.rows(t_r, t_r).dot(&(&q * z.rows(t_r, t_r))) + z.rows(0, t_r).dot(&(&r * z.rows(0, t_r)));
    assert!((sol.objective - obj).abs() <= 1e-8 * (1.0 + obj));
}

#[test]
fn first_iteration_from_the_nonlinear_setup_is_feasible() {
    let data = nl_data();
    let win = nl_initial_window(Reading::Sin).unwrap();
    let ws = QpWorkspace::new(
        &data,
        &win.w,
        &win.p,
        NL_TR,
        &DMatrix::identity(NL_TR, NL_TR),
        &DMatrix::identity(NL_TR, NL_TR),
    )
    .unwrap();
    let sol = ws.solve(&zero_scheduling(2, NL_TR)).unwrap();
    assert!(sol.objective.is_finite());
    assert!(sol.feasibility <= 1e-6 * (1.0 + win.w.vec().norm()));
    assert!(sol.kkt_residual <= 1e-8);
}

#[test]
fn every_qp_solve_satisfies_its_kkt_system() {
    let data = nl_data();
    let win = nl_initial_window(Reading::Sin).unwrap();
    let ws = QpWorkspace::new(
        &data,
        &win.w,
        &win.p,
        NL_TR,
        &DMatrix::identity(NL_TR, NL_TR),
        &DMatrix::identity(NL_TR, NL_TR),
    )
    .unwrap();
    let mut rng = seeded_rng(53);
    for _ in 0..5 {
        let p_r = SchedulingTrajectory::new(normal_samples(&mut rng, NL_TR, 2)).unwrap();
        let sol = ws.solve(&p_r).unwrap();
        assert!(sol.kkt_residual <= 1e-8, "{:e}", sol.kkt_residual);
    }
}

#[test]
fn converged_iterate_is_a_consistent_fixed_point() {
    let data = nl_data();
    let win = nl_initial_window(Reading::Sin).unwrap();
    let prob = ControlProblem::new(&data, win.w.clone(), win.p.clone(), NL_TR, &NlExamplePsi);
    let res = iterate(&prob).unwrap();
    assert!(res.converged);
    assert_eq!(res.iterations, res.history.len());

    let psi = NlExamplePsi.eval_all(&res.u_r, &res.y_r);
    let change = (vec_samples(&psi) - vec_samples(res.p_r.samples())).norm();
    assert!(change < prob.tol);
    assert_eq!(res.history.last().unwrap().change, change);

    let rep = build(&data, NL_TI + NL_TR).unwrap();
    let p_all = win.p.concat(&res.p_r).unwrap();
    let restriction = rep.restriction_matrix(p_all.samples()).unwrap();
    let h_ini = rep.hw.block_rows_range(0, NL_TI);
    let e = vstack(&[&h_ini, &restriction]);
    let mut f = DVector::zeros(e.nrows());
    f.rows_mut(0, h_ini.nrows()).copy_from(&win.w.vec());
    assert!((&e * &res.g - f).norm() <= 1e-8);
    let w_r = rep.hw.block_rows_range(NL_TI, NL_TR) * &res.g;
    let w_expected = vec_samples(
        &res.u_r
            .iter()
            .zip(&res.y_r)
            .map(|(u, y)| DVector::from_vec(vec![u[0], y[0]]))
            .collect::<Vec<_>>(),
    );
    assert!((w_r - w_expected).amax() <= 1e-12);

    for (k, rec) in res.history.iter().enumerate() {
        assert_eq!(rec.iteration, k + 1);
        assert!(rec.change.is_finite());
    }
}

#[test]
fn zero_trajectory_is_a_fixed_point() {
    let data = nl_data();
    let w_ini = Trajectory::new(vec![DVector::zeros(2); NL_TI], 1, 1).unwrap();
    let origin = NlExamplePsi.eval(&DVector::zeros(1), &DVector::zeros(1));
    let p_ini = SchedulingTrajectory::constant(origin.clone(), NL_TI).unwrap();

    let mut prob = ControlProblem::new(&data, w_ini.clone(), p_ini.clone(), 10, &NlExamplePsi);
    prob.p_r_init = Some(SchedulingTrajectory::constant(origin.clone(), 10).unwrap());
    let res = iterate(&prob).unwrap();
    assert!(res.converged);
    assert_eq!(res.iterations, 1);
    assert!(res.u_r.iter().chain(&res.y_r).all(|v| v.amax() == 0.0));

    let from_zero = iterate(&ControlProblem::new(&data, w_ini, p_ini, 10, &NlExamplePsi)).unwrap();
    assert!(from_zero.converged);
    assert_eq!(from_zero.iterations, 2);
    assert!(from_zero.p_r.samples().iter().all(|p| p == &origin));
}

#[test]
fn invalid_control_problems_are_rejected() {
    let data = nl_data();
    let win = nl_initial_window(Reading::Sin).unwrap();
    let mut prob = ControlProblem::new(&data, win.w.clone(), win.p.clone(), 5, &NlExamplePsi);
    prob.tol = 0.0;
    assert!(matches!(iterate(&prob), Err(Error::InvalidParameter(_))));
    prob.tol = 1e-6;
    prob.max_iter = 0;
    assert!(matches!(iterate(&prob), Err(Error::InvalidParameter(_))));
    prob.max_iter = 10;
    prob.q = DMatrix::identity(4, 4);
    assert!(matches!(iterate(&prob), Err(Error::Dimension { .. })));
    assert!(QpWorkspace::new(
        &data,
        &win.w,
        &win.p,
        0,
        &DMatrix::zeros(0, 0),
        &DMatrix::zeros(0, 0)
    )
    .is_err());
}

#[test]
fn iteration_stops_at_the_budget() {
    let data = nl_data();
    let win = nl_initial_window(Reading::Sin).unwrap();
    let mut prob = ControlProblem::new(&data, win.w.clone(), win.p.clone(), NL_TR, &NlExamplePsi);
    prob.max_iter = 2;
    let res = iterate(&prob).unwrap();
    assert!(!res.converged);
    assert_eq!(res.iterations, 2);
    let used: Vec<DVector<f64>> = res.history[1]
        .p
        .iter()
        .map(|p| DVector::from_column_slice(p))
        .collect();
    assert_eq!(res.p_r.samples(), used.as_slice());
}
