//! On-disk formats: model JSON, dictionary CSV with a JSON sidecar, and the
//! problem/result files of the simulation and control front ends.
//!
//! Floats are written in shortest round-trip form, so reading a file back
//! reproduces the stored values bit for bit. Time indices in files are
//! 1-based.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::control::{ControlResult, IterationRecord};
use crate::ddrep::{DataDictionary, Provenance};
use crate::error::{Error, Result};
use crate::models::{Complexity, LpvIoModel};
use crate::signals::{SchedulingTrajectory, Trajectory};
use crate::simulate::{SimResult, Uniqueness};

/// Shortest decimal form that parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|r| m.row(r).iter().copied().collect())
        .collect()
}

fn rows_matrix(
    rows: &[Vec<f64>],
    n_rows: usize,
    n_cols: usize,
    what: &str,
) -> Result<DMatrix<f64>> {
    if rows.len() != n_rows || rows.iter().any(|r| r.len() != n_cols) {
        return Err(Error::Format(format!(
            "{what} must be a {n_rows}x{n_cols} matrix"
        )));
    }
    Ok(DMatrix::from_fn(n_rows, n_cols, |r, c| rows[r][c]))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub n_u: usize,
    pub n_y: usize,
    pub n_p: usize,
    /// `a[i][j]` is the row-major matrix `a_{i,j}`, `i = 0..n_a`.
    pub a: Vec<Vec<Vec<Vec<f64>>>>,
    pub b: Vec<Vec<Vec<Vec<f64>>>>,
    pub complexity: Complexity,
}

impl ModelFile {
    pub fn from_model(m: &LpvIoModel) -> Self {
        let conv = |c: &[Vec<DMatrix<f64>>]| {
            c.iter()
                .map(|ci| ci.iter().map(matrix_rows).collect())
                .collect()
        };
        ModelFile {
            n_u: m.n_u(),
            n_y: m.n_y(),
            n_p: m.n_p(),
            a: conv(m.a_coeffs()),
            b: conv(m.b_coeffs()),
            complexity: m.complexity(),
        }
    }

    pub fn to_model(&self) -> Result<LpvIoModel> {
        let conv = |c: &[Vec<Vec<Vec<f64>>>],
                    cols: usize,
                    name: &str|
         -> Result<Vec<Vec<DMatrix<f64>>>> {
            c.iter()
                .enumerate()
                .map(|(i, ci)| {
                    if ci.len() != self.n_p + 1 {
                        return Err(Error::Format(format!(
                            "{name}[{i}] needs {} matrices",
                            self.n_p + 1
                        )));
                    }
                    ci.iter()
                        .enumerate()
                        .map(|(j, m)| rows_matrix(m, self.n_y, cols, &format!("{name}[{i}][{j}]")))
                        .collect()
                })
                .collect()
        };
        let model = LpvIoModel::new(
            conv(&self.a, self.n_y, "a")?,
            conv(&self.b, self.n_u, "b")?,
            self.complexity,
        )?;
        if model.n_u() != self.n_u || model.n_p() != self.n_p {
            return Err(Error::Format(
                "declared dimensions do not match the coefficients".into(),
            ));
        }
        Ok(model)
    }
}

pub fn write_model(path: &Path, model: &LpvIoModel) -> Result<()> {
    write_json(path, &ModelFile::from_model(model))
}

pub fn read_model(path: &Path) -> Result<LpvIoModel> {
    let file: ModelFile = read_json(path)?;
    file.to_model()
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(fs::File::open(path)?)?)
}

/// Metadata stored next to a dictionary CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DictionaryMeta {
    pub n_u: usize,
    pub n_y: usize,
    pub n_p: usize,
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub complexity: Option<Complexity>,
    #[serde(default)]
    pub description: String,
}

/// `data.csv` -> `data.json`.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

fn header(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (1..=n).map(move |i| format!("{prefix}{i}"))
}

/// Write `k,u1..,y1..,p1..` rows and the sidecar JSON.
pub fn write_dictionary(
    path: &Path,
    data: &DataDictionary,
    complexity: Option<Complexity>,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut head = vec!["k".to_string()];
    head.extend(header("u", data.n_u()));
    head.extend(header("y", data.n_y()));
    head.extend(header("p", data.n_p()));
    w.write_record(&head)?;
    for (i, (wk, pk)) in data.w.samples().iter().zip(data.p.samples()).enumerate() {
        let mut rec = vec![(data.w.start() + i as i64).to_string()];
        rec.extend(wk.iter().chain(pk.iter()).map(|&x| fmt_f64(x)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    write_json(
        &sidecar_path(path),
        &DictionaryMeta {
            n_u: data.n_u(),
            n_y: data.n_y(),
            n_p: data.n_p(),
            seed: data.provenance.seed,
            complexity,
            description: data.provenance.description.clone(),
        },
    )
}

/// Read a dictionary and its sidecar.
pub fn read_dictionary(path: &Path) -> Result<(DataDictionary, DictionaryMeta)> {
    let meta: DictionaryMeta = read_json(&sidecar_path(path))?;
    let n_w = meta.n_u + meta.n_y;
    let width = 1 + n_w + meta.n_p;
    let mut r = csv::Reader::from_path(path)?;
    let head = r.headers()?.clone();
    if head.len() != width || &head[0] != "k" {
        return Err(Error::Format(format!(
            "{}: header must be k,u1..u{},y1..y{},p1..p{}",
            path.display(),
            meta.n_u,
            meta.n_y,
            meta.n_p
        )));
    }
    let mut w = Vec::new();
    let mut p = Vec::new();
    let mut start = None;
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() != width {
            return Err(Error::Format(format!(
                "{}: row {} has {} fields",
                path.display(),
                line + 2,
                rec.len()
            )));
        }
        let vals = rec
            .iter()
            .skip(1)
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Format(format!("{}: row {}: {e}", path.display(), line + 2)))?;
        if start.is_none() {
            start =
                Some(rec[0].trim().parse::<i64>().map_err(|e| {
                    Error::Format(format!("{}: bad time index: {e}", path.display()))
                })?);
        }
        w.push(DVector::from_column_slice(&vals[..n_w]));
        p.push(DVector::from_column_slice(&vals[n_w..]));
    }
    let start = start.unwrap_or(1);
    let w = Trajectory::new(w, meta.n_u, meta.n_y)?.with_start(start);
    let p = SchedulingTrajectory::from_samples(p, meta.n_p)?.with_start(start);
    let data = DataDictionary::new(
        w,
        p,
        Provenance {
            description: meta.description.clone(),
            seed: meta.seed,
        },
    )?;
    Ok((data, meta))
}

fn resolve(base: &Path, rel: &str) -> PathBuf {
    let p = Path::new(rel);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.parent().unwrap_or(Path::new(".")).join(p)
    }
}

fn to_vectors(rows: &[Vec<f64>], dim: usize, what: &str) -> Result<Vec<DVector<f64>>> {
    rows.iter()
        .enumerate()
        .map(|(k, r)| {
            if r.len() != dim {
                Err(Error::dim(format!("{what} at k={}", k + 1), dim, r.len()))
            } else {
                Ok(DVector::from_column_slice(r))
            }
        })
        .collect()
}

pub fn vectors_to_rows(v: &[DVector<f64>]) -> Vec<Vec<f64>> {
    v.iter().map(|x| x.iter().copied().collect()).collect()
}

/// Simulation problem. Signal arrays hold one sample per entry; `w_ini`
/// samples are `[u.., y..]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimProblemFile {
    pub dictionary: String,
    #[serde(default)]
    pub w_ini: Vec<Vec<f64>>,
    #[serde(default)]
    pub p_ini: Vec<Vec<f64>>,
    pub u_r: Vec<Vec<f64>>,
    pub p_r: Vec<Vec<f64>>,
}

/// Parsed problem data, ready to be paired with its dictionary.
#[derive(Debug, Clone)]
pub struct LoadedSimProblem {
    pub data: DataDictionary,
    pub w_ini: Trajectory,
    pub p_ini: SchedulingTrajectory,
    pub u_r: Vec<DVector<f64>>,
    pub p_r: SchedulingTrajectory,
}

pub fn read_sim_problem(path: &Path) -> Result<LoadedSimProblem> {
    let file: SimProblemFile = read_json(path)?;
    let (data, _) = read_dictionary(&resolve(path, &file.dictionary))?;
    let (n_u, n_y, n_p) = (data.n_u(), data.n_y(), data.n_p());
    let w_ini = Trajectory::from_samples(to_vectors(&file.w_ini, n_u + n_y, "w_ini")?, n_u, n_y)?;
    let p_ini = SchedulingTrajectory::from_samples(to_vectors(&file.p_ini, n_p, "p_ini")?, n_p)?;
    let u_r = to_vectors(&file.u_r, n_u, "u_r")?;
    let p_r = SchedulingTrajectory::from_samples(to_vectors(&file.p_r, n_p, "p_r")?, n_p)?;
    Ok(LoadedSimProblem {
        data,
        w_ini,
        p_ini,
        u_r,
        p_r,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimDiagnostics {
    pub residual: f64,
    pub consistent: bool,
    pub uniqueness: Uniqueness,
    pub g_norm: f64,
}

/// Write a `k,y1..` table with `k = 1..T_r`.
pub fn write_outputs(path: &Path, y: &[DVector<f64>]) -> Result<()> {
    let n_y = y.first().map(|v| v.len()).unwrap_or(0);
    let mut w = csv::Writer::from_path(path)?;
    let mut head = vec!["k".to_string()];
    head.extend(header("y", n_y));
    w.write_record(&head)?;
    for (k, yk) in y.iter().enumerate() {
        let mut rec = vec![(k + 1).to_string()];
        rec.extend(yk.iter().map(|&x| fmt_f64(x)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// `<stem>.csv` with the outputs and `<stem>.json` with the diagnostics.
pub fn write_sim_result(csv_path: &Path, res: &SimResult) -> Result<()> {
    write_outputs(csv_path, &res.y_r)?;
    write_json(
        &sidecar_path(csv_path),
        &SimDiagnostics {
            residual: res.residual,
            consistent: res.consistent,
            uniqueness: res.uniqueness,
            g_norm: res.g.norm(),
        },
    )
}

/// Weight given either as `"identity"` or as an explicit matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WeightSpec {
    Named(String),
    Matrix(Vec<Vec<f64>>),
}

impl Default for WeightSpec {
    fn default() -> Self {
        WeightSpec::Named("identity".into())
    }
}

impl WeightSpec {
    pub fn to_matrix(&self, n: usize, what: &str) -> Result<DMatrix<f64>> {
        match self {
            WeightSpec::Named(s) if s == "identity" => Ok(DMatrix::identity(n, n)),
            WeightSpec::Named(s) => Err(Error::Unknown {
                kind: "weight",
                name: s.clone(),
            }),
            WeightSpec::Matrix(rows) => {
                let m = rows_matrix(rows, n, n, what)?;
                if (&m - m.transpose()).amax() > 1e-12 * (1.0 + m.amax()) {
                    return Err(Error::InvalidParameter(format!("{what} must be symmetric")));
                }
                Ok(m)
            }
        }
    }
}

fn default_tol() -> f64 {
    1e-6
}

fn default_max_iter() -> usize {
    100
}

fn default_psi() -> String {
    "nl_example".into()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ControlProblemFile {
    pub dictionary: String,
    pub w_ini: Vec<Vec<f64>>,
    pub p_ini: Vec<Vec<f64>>,
    #[serde(rename = "T_r")]
    pub t_r: usize,
    #[serde(rename = "Q", default)]
    pub q: WeightSpec,
    #[serde(rename = "R", default)]
    pub r: WeightSpec,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_psi")]
    pub psi: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_r_init: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone)]
pub struct LoadedControlProblem {
    pub data: DataDictionary,
    pub w_ini: Trajectory,
    pub p_ini: SchedulingTrajectory,
    pub t_r: usize,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub tol: f64,
    pub max_iter: usize,
    pub psi: String,
    pub p_r_init: Option<SchedulingTrajectory>,
}

pub fn read_control_problem(path: &Path) -> Result<LoadedControlProblem> {
    let file: ControlProblemFile = read_json(path)?;
    let (data, _) = read_dictionary(&resolve(path, &file.dictionary))?;
    let (n_u, n_y, n_p) = (data.n_u(), data.n_y(), data.n_p());
    let w_ini = Trajectory::from_samples(to_vectors(&file.w_ini, n_u + n_y, "w_ini")?, n_u, n_y)?;
    let p_ini = SchedulingTrajectory::from_samples(to_vectors(&file.p_ini, n_p, "p_ini")?, n_p)?;
    let p_r_init = file
        .p_r_init
        .as_ref()
        .map(|rows| SchedulingTrajectory::from_samples(to_vectors(rows, n_p, "p_r_init")?, n_p))
        .transpose()?;
    Ok(LoadedControlProblem {
        q: file.q.to_matrix(file.t_r * n_y, "Q")?,
        r: file.r.to_matrix(file.t_r * n_u, "R")?,
        data,
        w_ini,
        p_ini,
        t_r: file.t_r,
        tol: file.tol,
        max_iter: file.max_iter,
        psi: file.psi,
        p_r_init,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ControlSummary {
    pub converged: bool,
    pub iterations: usize,
    pub final_change: f64,
    pub objective: f64,
}

/// `iterations.csv` (`iteration,objective,change`), `trajectory.csv`
/// (`k,u..,y..,p..` of the final iterate) and `summary.json` in `dir`.
pub fn write_control_result(dir: &Path, res: &ControlResult) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_iterations(&dir.join("iterations.csv"), &res.history)?;

    let n_u = res.u_r.first().map(|v| v.len()).unwrap_or(0);
    let n_y = res.y_r.first().map(|v| v.len()).unwrap_or(0);
    let n_p = res.p_r.n_p();
    let mut w = csv::Writer::from_path(dir.join("trajectory.csv"))?;
    let mut head = vec!["k".to_string()];
    head.extend(header("u", n_u));
    head.extend(header("y", n_y));
    head.extend(header("p", n_p));
    w.write_record(&head)?;
    for k in 0..res.y_r.len() {
        let mut rec = vec![(k + 1).to_string()];
        rec.extend(
            res.u_r[k]
                .iter()
                .chain(res.y_r[k].iter())
                .chain(res.p_r.samples()[k].iter())
                .map(|&x| fmt_f64(x)),
        );
        w.write_record(&rec)?;
    }
    w.flush()?;

    let last = res.history.last();
    write_json(
        &dir.join("summary.json"),
        &ControlSummary {
            converged: res.converged,
            iterations: res.iterations,
            final_change: last.map(|r| r.change).unwrap_or(f64::NAN),
            objective: last.map(|r| r.objective).unwrap_or(f64::NAN),
        },
    )
}

pub fn write_iterations(path: &Path, history: &[IterationRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["iteration", "objective", "change"])?;
    for r in history {
        w.write_record([
            r.iteration.to_string(),
            fmt_f64(r.objective),
            fmt_f64(r.change),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Numeric table; the first `n_index` columns are written as integers, the
/// rest in shortest round-trip form.
pub fn write_table(path: &Path, head: &[&str], n_index: usize, rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(head)?;
    for r in rows {
        w.write_record(r.iter().enumerate().map(|(i, &x)| {
            if i < n_index {
                (x as i64).to_string()
            } else {
                fmt_f64(x)
            }
        }))?;
    }
    w.flush()?;
    Ok(())
}
