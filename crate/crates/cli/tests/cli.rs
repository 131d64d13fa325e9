use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use tempfile::TempDir;

use lpvdd::experiments::{generate_named, msd_dictionary};
use lpvdd::formats::{read_dictionary, write_model};
use lpvdd::models::msd_default;

const MSD_161_SEED_7_SHA256: &str =
    "b2f546b20f23c677a0da9163f5ba4de0af257929eedfd8f02f15445f27153374";

fn lpvdd(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lpvdd"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn sha256(path: &Path) -> String {
    hex::encode(Sha256::digest(fs::read(path).unwrap()))
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let head = lines
        .next()
        .unwrap()
        .split(',')
        .map(str::to_string)
        .collect();
    let rows = lines
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect();
    (head, rows)
}

#[test]
fn msd_dictionary_digest_is_stable() {
    let tmp = TempDir::new().unwrap();
    let out = lpvdd(
        tmp.path(),
        &[
            "generate", "--model", "msd", "--Nd", "161", "--seed", "7", "--out", "msd.csv",
        ],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let (head, rows) = csv_rows(&tmp.path().join("msd.csv"));
    assert_eq!(head, ["k", "u1", "y1", "p1"]);
    assert_eq!(rows.len(), 161);
    assert_eq!(rows[0][0], "1");
    assert_eq!(rows[160][0], "161");
    assert_eq!(sha256(&tmp.path().join("msd.csv")), MSD_161_SEED_7_SHA256);

    let meta = read_json(&tmp.path().join("msd.json"));
    assert_eq!(meta["seed"], 7);
    assert_eq!(meta["n_u"], 1);
    assert_eq!(meta["complexity"], json!({"m": 1, "lag": 2, "order": 2}));
}

#[test]
fn generation_is_byte_identical_across_runs() {
    let tmp = TempDir::new().unwrap();
    for name in ["a.csv", "b.csv"] {
        let out = lpvdd(
            tmp.path(),
            &[
                "generate",
                "--model",
                "nonlinear",
                "--Nd",
                "50",
                "--seed",
                "3",
                "--out",
                name,
            ],
        );
        assert_eq!(code(&out), 0);
    }
    assert_eq!(
        fs::read(tmp.path().join("a.csv")).unwrap(),
        fs::read(tmp.path().join("b.csv")).unwrap()
    );
    assert_eq!(
        fs::read(tmp.path().join("a.json")).unwrap(),
        fs::read(tmp.path().join("b.json")).unwrap()
    );
}

#[test]
fn dictionary_files_reload_bit_for_bit() {
    let tmp = TempDir::new().unwrap();
    let out = lpvdd(
        tmp.path(),
        &[
            "generate", "--model", "msd", "--Nd", "80", "--seed", "11", "--out", "d.csv",
        ],
    );
    assert_eq!(code(&out), 0);
    let (data, meta) = read_dictionary(&tmp.path().join("d.csv")).unwrap();
    let direct = msd_dictionary(80, 11).unwrap();
    assert_eq!(meta.seed, Some(11));
    assert_eq!(data.w.samples(), direct.w.samples());
    assert_eq!(data.p.samples(), direct.p.samples());
}

#[test]
fn feedback_experiment_output_is_one() {
    let tmp = TempDir::new().unwrap();
    let out = lpvdd(
        tmp.path(),
        &[
            "generate", "--model", "example2", "--input", "feedback", "--Nd", "40", "--seed", "7",
            "--out", "ex2.csv",
        ],
    );
    assert_eq!(code(&out), 0);
    let (head, rows) = csv_rows(&tmp.path().join("ex2.csv"));
    assert_eq!(head, ["k", "u1", "y1", "p1"]);
    assert_eq!(rows.len(), 40);
    for r in &rows {
        let y: f64 = r[2].parse().unwrap();
        assert!((y - 1.0).abs() <= 1e-12, "y = {y}");
    }
}

#[test]
fn usage_errors_exit_with_two() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(
        code(&lpvdd(
            tmp.path(),
            &["generate", "--model", "msd", "--Nd", "0", "--seed", "1"]
        )),
        2
    );
    assert_eq!(
        code(&lpvdd(
            tmp.path(),
            &["generate", "--model", "msd", "--Nd", "10"]
        )),
        2
    );
    assert_eq!(
        code(&lpvdd(
            tmp.path(),
            &["generate", "--model", "nope", "--Nd", "10", "--seed", "1"]
        )),
        2
    );
    assert_eq!(
        code(&lpvdd(
            tmp.path(),
            &["generate", "--model", "msd", "--input", "chirp", "--Nd", "10", "--seed", "1"]
        )),
        2
    );
    assert_eq!(
        code(&lpvdd(
            tmp.path(),
            &["check", "--data", "missing.csv", "--L", "5"]
        )),
        2
    );
    assert_eq!(code(&lpvdd(tmp.path(), &["frobnicate"])), 2);
}

#[test]
fn check_exit_code_follows_the_rank_condition() {
    let tmp = TempDir::new().unwrap();
    lpvdd(
        tmp.path(),
        &[
            "generate", "--model", "msd", "--Nd", "161", "--seed", "7", "--out", "full.csv",
        ],
    );
    lpvdd(
        tmp.path(),
        &[
            "generate",
            "--model",
            "msd",
            "--Nd",
            "160",
            "--seed",
            "7",
            "--out",
            "short.csv",
        ],
    );

    let out = lpvdd(
        tmp.path(),
        &[
            "check",
            "--data",
            "full.csv",
            "--L",
            "40",
            "--out",
            "report.json",
        ],
    );
    assert_eq!(code(&out), 0);
    let report = read_json(&tmp.path().join("report.json"));
    assert_eq!(report["min_samples"], 161);
    assert_eq!(report["gpe"]["rank"], 122);
    assert_eq!(report["gpe"]["holds"], true);
    let stdout: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(stdout, report);

    let out = lpvdd(tmp.path(), &["check", "--data", "short.csv", "--L", "40"]);
    assert_eq!(code(&out), 1);
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["gpe"]["holds"], false);
}

#[test]
fn model_files_drive_generation_and_check() {
    let tmp = TempDir::new().unwrap();
    write_model(&tmp.path().join("plant.json"), &msd_default()).unwrap();
    let before = fs::read(tmp.path().join("plant.json")).unwrap();
    let out = lpvdd(
        tmp.path(),
        &[
            "generate",
            "--model",
            "plant.json",
            "--Nd",
            "200",
            "--seed",
            "5",
        ],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read(tmp.path().join("plant.json")).unwrap(), before);
    assert!(tmp.path().join("plant_dictionary.csv").is_file());

    let out = lpvdd(
        tmp.path(),
        &[
            "generate",
            "--model",
            "plant.json",
            "--Nd",
            "20",
            "--seed",
            "5",
            "--out",
            "plant.csv",
        ],
    );
    assert_eq!(code(&out), 2);
    assert_eq!(fs::read(tmp.path().join("plant.json")).unwrap(), before);

    let out = lpvdd(
        tmp.path(),
        &[
            "check",
            "--data",
            "plant_dictionary.csv",
            "--L",
            "10",
            "--model",
            "plant.json",
        ],
    );
    assert_eq!(code(&out), 0);
}

fn write_sim_problem(dir: &Path, t_i: usize, t_r: usize) -> Vec<f64> {
    let data = generate_named("msd", None, 161, 7).unwrap();
    lpvdd::formats::write_dictionary(
        &dir.join("msd.csv"),
        &data,
        Some(msd_default().complexity()),
    )
    .unwrap();
    let rows = |from: usize, len: usize, f: &dyn Fn(usize) -> Vec<f64>| -> Vec<Vec<f64>> {
        (from..from + len).map(f).collect()
    };
    let w = |k: usize| data.w.samples()[k].iter().copied().collect::<Vec<_>>();
    let p = |k: usize| data.p.samples()[k].iter().copied().collect::<Vec<_>>();
    let u = |k: usize| vec![data.w.samples()[k][0]];
    let problem = json!({
        "dictionary": "msd.csv",
        "w_ini": rows(0, t_i, &w),
        "p_ini": rows(0, t_i, &p),
        "u_r": rows(t_i, t_r, &u),
        "p_r": rows(t_i, t_r, &p),
    });
    fs::write(
        dir.join("sim.json"),
        serde_json::to_string(&problem).unwrap(),
    )
    .unwrap();
    (t_i..t_i + t_r).map(|k| data.w.samples()[k][1]).collect()
}

#[test]
fn simulate_reproduces_a_recorded_trajectory() {
    let tmp = TempDir::new().unwrap();
    let expected = write_sim_problem(tmp.path(), 5, 35);
    let out = lpvdd(
        tmp.path(),
        &["simulate", "--problem", "sim.json", "--out", "y.csv"],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let (head, rows) = csv_rows(&tmp.path().join("y.csv"));
    assert_eq!(head, ["k", "y1"]);
    assert_eq!(rows.len(), 35);
    for (k, (r, y)) in rows.iter().zip(&expected).enumerate() {
        assert_eq!(r[0], (k + 1).to_string());
        let v: f64 = r[1].parse().unwrap();
        assert!((v - y).abs() <= 1e-8, "k={} {v} vs {y}", k + 1);
    }
    let diag = read_json(&tmp.path().join("y.json"));
    assert_eq!(diag["uniqueness"]["kind"], "unique");
    assert!(diag["residual"].as_f64().unwrap() <= 1e-9);
    assert!(diag["g_norm"].as_f64().unwrap() > 0.0);
}

#[test]
fn simulate_overrides_shorten_the_problem() {
    let tmp = TempDir::new().unwrap();
    write_sim_problem(tmp.path(), 5, 35);
    let out = lpvdd(
        tmp.path(),
        &[
            "simulate",
            "--problem",
            "sim.json",
            "--Ti",
            "1",
            "--Tr",
            "10",
            "--out",
            "y.csv",
        ],
    );
    assert_eq!(code(&out), 0);
    assert_eq!(csv_rows(&tmp.path().join("y.csv")).1.len(), 10);
    let diag = read_json(&tmp.path().join("y.json"));
    assert_eq!(diag["uniqueness"]["kind"], "non_unique");
    assert!(diag["uniqueness"]["freedom"].as_u64().unwrap() >= 1);

    let out = lpvdd(
        tmp.path(),
        &[
            "simulate",
            "--problem",
            "sim.json",
            "--Ti",
            "6",
            "--out",
            "y.csv",
        ],
    );
    assert_eq!(code(&out), 2);
}

#[test]
fn control_of_the_zero_trajectory_converges() {
    let tmp = TempDir::new().unwrap();
    let out = lpvdd(
        tmp.path(),
        &[
            "generate",
            "--model",
            "nonlinear",
            "--Nd",
            "199",
            "--seed",
            "7",
            "--out",
            "nl.csv",
        ],
    );
    assert_eq!(code(&out), 0);
    let problem = json!({
        "dictionary": "nl.csv",
        "w_ini": [[0.0, 0.0], [0.0, 0.0], [0.0, 0.0]],
        "p_ini": [[0.0, 1.0], [0.0, 1.0], [0.0, 1.0]],
        "T_r": 10,
        "Q": "identity",
        "R": "identity",
        "tol": 1e-6,
        "max_iter": 20,
        "psi": "nl_example",
    });
    fs::write(tmp.path().join("ctl.json"), problem.to_string()).unwrap();
    let out = lpvdd(
        tmp.path(),
        &["control", "--problem", "ctl.json", "--out", "ctl"],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let summary = read_json(&tmp.path().join("ctl/summary.json"));
    assert_eq!(summary["converged"], true);
    let (head, rows) = csv_rows(&tmp.path().join("ctl/trajectory.csv"));
    assert_eq!(head, ["k", "u1", "y1", "p1", "p2"]);
    assert_eq!(rows.len(), 10);
    for r in &rows {
        assert_eq!(r[1].parse::<f64>().unwrap(), 0.0);
        assert_eq!(r[2].parse::<f64>().unwrap(), 0.0);
    }
    let (head, iters) = csv_rows(&tmp.path().join("ctl/iterations.csv"));
    assert_eq!(head, ["iteration", "objective", "change"]);
    assert_eq!(iters.len() as u64, summary["iterations"].as_u64().unwrap());

    let out = lpvdd(
        tmp.path(),
        &[
            "control",
            "--problem",
            "ctl.json",
            "--Tr",
            "0",
            "--out",
            "x",
        ],
    );
    assert_eq!(code(&out), 2);
    let out = lpvdd(
        tmp.path(),
        &[
            "control",
            "--problem",
            "ctl.json",
            "--Tr",
            "5",
            "--out",
            "ctl5",
        ],
    );
    assert_eq!(code(&out), 0);
    assert_eq!(csv_rows(&tmp.path().join("ctl5/trajectory.csv")).1.len(), 5);
}

#[test]
fn control_reports_non_convergence_as_numerical_failure() {
    let tmp = TempDir::new().unwrap();
    lpvdd(
        tmp.path(),
        &[
            "generate",
            "--model",
            "nonlinear",
            "--Nd",
            "199",
            "--seed",
            "7",
            "--out",
            "nl.csv",
        ],
    );
    let problem = json!({
        "dictionary": "nl.csv",
        "w_ini": [[0.0, 0.0], [0.0, 0.0], [0.0, 0.0]],
        "p_ini": [[0.0, 1.0], [0.0, 1.0], [0.0, 1.0]],
        "T_r": 10,
        "max_iter": 1,
    });
    fs::write(tmp.path().join("ctl.json"), problem.to_string()).unwrap();
    let out = lpvdd(
        tmp.path(),
        &["control", "--problem", "ctl.json", "--out", "ctl"],
    );
    assert_eq!(code(&out), 3);
    assert_eq!(
        read_json(&tmp.path().join("ctl/summary.json"))["converged"],
        false
    );
}

#[test]
fn reproduce_example2_reports_the_rank_gap() {
    let tmp = TempDir::new().unwrap();
    let out = lpvdd(tmp.path(), &["reproduce", "example2", "--out", "ex2"]);
    assert_eq!(code(&out), 0);
    let s = read_json(&tmp.path().join("ex2/summary.json"));
    assert_eq!(s["report"]["naive"]["rank"], 22);
    assert_eq!(s["report"]["naive"]["required"], 22);
    assert_eq!(s["report"]["embedded"]["rank"], 24);
    assert_eq!(s["report"]["embedded"]["required"], 33);
    assert_eq!(s["all_pass"], true);
    let (head, rows) = csv_rows(&tmp.path().join("ex2/data.csv"));
    assert_eq!(head, ["k", "u", "y", "p"]);
    assert_eq!(rows.len(), 40);
}

#[test]
fn reproduce_msd_cases_writes_three_cases() {
    let tmp = TempDir::new().unwrap();
    let out = lpvdd(tmp.path(), &["reproduce", "msd-cases", "--out", "msd"]);
    assert_eq!(code(&out), 0);
    let s = read_json(&tmp.path().join("msd/summary.json"));
    let cases = s["report"].as_array().unwrap();
    assert_eq!(cases.len(), 3);
    assert!(cases[0]["max_error"].as_f64().unwrap() <= 1e-6);
    assert!(cases[1]["residual"].as_f64().unwrap() > 1e-3);
    assert_eq!(cases[2]["uniqueness"]["kind"], "non_unique");
    assert!(cases[2]["sampled_outputs"].as_u64().unwrap() >= 3);
    for c in 1..=3 {
        let (head, rows) = csv_rows(&tmp.path().join(format!("msd/case{c}.csv")));
        assert_eq!(&head[..3], ["k", "y_true", "y_dd"]);
        assert!(!rows.is_empty());
    }
    assert!(csv_rows(&tmp.path().join("msd/case3.csv")).0.len() >= 6);

    let again = lpvdd(tmp.path(), &["reproduce", "msd-cases", "--out", "msd2"]);
    assert_eq!(code(&again), 0);
    for c in 1..=3 {
        let name = format!("case{c}.csv");
        assert_eq!(
            sha256(&tmp.path().join("msd").join(&name)),
            sha256(&tmp.path().join("msd2").join(&name))
        );
    }
}

#[test]
fn reproduce_nonlinear_records_the_iterations() {
    let tmp = TempDir::new().unwrap();
    let out = lpvdd(tmp.path(), &["reproduce", "nonlinear", "--out", "nl"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let s = read_json(&tmp.path().join("nl/summary.json"));
    assert_eq!(s["report"]["converged"], true);
    let iterations = s["report"]["iterations"].as_u64().unwrap();
    assert!(iterations <= 30);
    let (_, rows) = csv_rows(&tmp.path().join("nl/iterations.csv"));
    assert_eq!(rows.len() as u64, iterations);
    let (head, rows) = csv_rows(&tmp.path().join("nl/scheduling.csv"));
    assert_eq!(head, ["iteration", "k", "p1", "p2"]);
    assert_eq!(rows.len() as u64, iterations * 30);
    let (head, rows) = csv_rows(&tmp.path().join("nl/trajectory.csv"));
    assert_eq!(head, ["k", "u", "y_dd", "y_true"]);
    assert_eq!(rows.len(), 30);
}
