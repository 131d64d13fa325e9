use std::fs;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use lpvdd::ddrep::{DataDictionary, Provenance};
use lpvdd::experiments::{example2_dictionary, random_systems};
use lpvdd::formats::{
    fmt_f64, read_control_problem, read_dictionary, read_model, read_sim_problem, write_dictionary,
    write_model, write_outputs, WeightSpec,
};
use lpvdd::models::{msd_default, nl_example_model};
use lpvdd::signals::{SchedulingTrajectory, Trajectory};
use lpvdd::Error;

fn tmpdir() -> tempfile::TempDir {
    tempfile::TempDir::new().unwrap()
}

proptest! {
    #[test]
    fn floats_round_trip_through_text(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
        prop_assert_eq!(fmt_f64(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
    }

    #[test]
    fn dictionaries_round_trip_bit_for_bit(
        rows in prop::collection::vec(prop::collection::vec(any::<f64>().prop_filter("finite", |x| x.is_finite()), 5), 1..20),
        seed in any::<Option<u64>>(),
    ) {
        let w: Vec<DVector<f64>> = rows.iter().map(|r| DVector::from_column_slice(&r[..3])).collect();
        let p: Vec<DVector<f64>> = rows.iter().map(|r| DVector::from_column_slice(&r[3..])).collect();
        let data = DataDictionary::new(
            Trajectory::new(w, 1, 2).unwrap(),
            SchedulingTrajectory::new(p).unwrap(),
            Provenance { description: "prop".into(), seed },
        ).unwrap();
        let tmp = tmpdir();
        let dir = tmp.path();
        let path = dir.join("d.csv");
        write_dictionary(&path, &data, None).unwrap();
        let (back, meta) = read_dictionary(&path).unwrap();
        prop_assert_eq!((meta.n_u, meta.n_y, meta.n_p, meta.seed), (1, 2, 2, seed));
        for (a, b) in back.w.samples().iter().zip(data.w.samples()) {
            prop_assert!(a.iter().zip(b.iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
        for (a, b) in back.p.samples().iter().zip(data.p.samples()) {
            prop_assert!(a.iter().zip(b.iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }
}

#[test]
fn models_round_trip() {
    let tmp = tmpdir();
    let dir = tmp.path();
    let mut models = random_systems(6, 5).unwrap();
    models.push(msd_default());
    models.push(nl_example_model());
    for (i, m) in models.iter().enumerate() {
        let path = dir.join(format!("m{i}.json"));
        write_model(&path, m).unwrap();
        let back = read_model(&path).unwrap();
        assert_eq!(back.complexity(), m.complexity());
        assert_eq!(back.a_coeffs(), m.a_coeffs());
        assert_eq!(back.b_coeffs(), m.b_coeffs());
    }
    let text = fs::read_to_string(dir.join("m6.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["n_u"], 1);
    assert_eq!(v["complexity"]["lag"], 2);
    assert_eq!(v["a"][0][0], serde_json::json!([[1.0]]));
}

#[test]
fn malformed_model_files_are_rejected() {
    let tmp = tmpdir();
    let dir = tmp.path();
    let path = dir.join("bad.json");
    fs::write(
        &path,
        r#"{"n_u":1,"n_y":1,"n_p":1,"a":[[[[1.0]]]],"b":[[[[1.0]],[[0.0]]]],"complexity":{"m":1,"lag":1,"order":1}}"#,
    )
    .unwrap();
    assert!(matches!(read_model(&path), Err(Error::Format(_))));
    fs::write(&path, "{").unwrap();
    assert!(matches!(read_model(&path), Err(Error::Json(_))));
}

#[test]
fn dictionary_csv_layout() {
    let tmp = tmpdir();
    let dir = tmp.path();
    let path = dir.join("ex2.csv");
    let data = example2_dictionary(4, 1).unwrap();
    write_dictionary(&path, &data, None).unwrap();
    let text = fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("k,u1,y1,p1"));
    assert!(lines.next().unwrap().starts_with("1,"));
    assert_eq!(text.lines().count(), 5);
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("ex2.json")).unwrap()).unwrap();
    assert_eq!(meta["seed"], 1);
    assert!(meta.get("complexity").is_none());

    fs::write(&path, "k,u1,y1\n1,0.0,0.0\n").unwrap();
    assert!(matches!(read_dictionary(&path), Err(Error::Format(_))));
    fs::write(&path, "k,u1,y1,p1\n1,0.0,zero,0.0\n").unwrap();
    assert!(matches!(read_dictionary(&path), Err(Error::Format(_))));
}

#[test]
fn output_tables_are_one_based() {
    let tmp = tmpdir();
    let dir = tmp.path();
    let path = dir.join("y.csv");
    write_outputs(
        &path,
        &[
            DVector::from_vec(vec![0.5, -1.0]),
            DVector::from_vec(vec![1e-20, 3.0]),
        ],
    )
    .unwrap();
    assert_eq!(
        fs::read_to_string(&path).unwrap(),
        "k,y1,y2\n1,0.5,-1.0\n2,1e-20,3.0\n"
    );
}

#[test]
fn weights() {
    assert_eq!(
        WeightSpec::default().to_matrix(3, "Q").unwrap(),
        DMatrix::identity(3, 3)
    );
    let m = WeightSpec::Matrix(vec![vec![2.0, 1.0], vec![1.0, 3.0]])
        .to_matrix(2, "Q")
        .unwrap();
    assert_eq!(m[(0, 1)], 1.0);
    assert!(WeightSpec::Matrix(vec![vec![2.0, 1.0], vec![0.0, 3.0]])
        .to_matrix(2, "Q")
        .is_err());
    assert!(WeightSpec::Matrix(vec![vec![2.0]])
        .to_matrix(2, "Q")
        .is_err());
    assert!(matches!(
        WeightSpec::Named("diag".into()).to_matrix(2, "Q"),
        Err(Error::Unknown { .. })
    ));
}

#[test]
fn problem_files_resolve_their_dictionary() {
    let tmp = tmpdir();
    let dir = tmp.path();
    let data = example2_dictionary(20, 2).unwrap();
    fs::create_dir_all(dir.join("data")).unwrap();
    write_dictionary(&dir.join("data/ex2.csv"), &data, None).unwrap();
    fs::write(
        dir.join("sim.json"),
        r#"{"dictionary":"data/ex2.csv","w_ini":[[2.0,1.0]],"p_ini":[[0.5]],"u_r":[[1.0],[2.0]],"p_r":[[0.1],[0.2]]}"#,
    )
    .unwrap();
    let sim = read_sim_problem(&dir.join("sim.json")).unwrap();
    assert_eq!(sim.data.len(), 20);
    assert_eq!(sim.w_ini.len(), 1);
    assert_eq!(sim.u_r.len(), 2);
    assert_eq!(sim.p_r.samples()[1][0], 0.2);

    fs::write(
        dir.join("bad.json"),
        r#"{"dictionary":"data/ex2.csv","w_ini":[[2.0]],"p_ini":[[0.5]],"u_r":[[1.0]],"p_r":[[0.1]]}"#,
    )
    .unwrap();
    assert!(matches!(
        read_sim_problem(&dir.join("bad.json")),
        Err(Error::Dimension { .. })
    ));

    fs::write(
        dir.join("ctl.json"),
        r#"{"dictionary":"data/ex2.csv","w_ini":[[2.0,1.0]],"p_ini":[[0.5]],"T_r":3,"R":[[1,0,0],[0,2,0],[0,0,3]]}"#,
    )
    .unwrap();
    let ctl = read_control_problem(&dir.join("ctl.json")).unwrap();
    assert_eq!(ctl.t_r, 3);
    assert_eq!(ctl.q, DMatrix::identity(3, 3));
    assert_eq!(ctl.r[(2, 2)], 3.0);
    assert_eq!(ctl.tol, 1e-6);
    assert_eq!(ctl.max_iter, 100);
    assert_eq!(ctl.psi, "nl_example");
    assert!(ctl.p_r_init.is_none());
}
