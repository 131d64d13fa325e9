//! Trajectory containers and the matrix constructions built on them: block
//! Hankel matrices, the Kronecker scheduling lift `p(k) ⊗ w(k)` and the
//! block-diagonal operator `p ⊛ I_n`.
//!
//! Samples are stored 0-based; `start` records the time index of the first
//! sample (1 unless set otherwise) and is what error messages and files use.
//! Vectorization is time-major throughout: `vec(w) = col(w(1), ..., w(N))`.
//! Kronecker products are p-major: block `j` of `p(k) ⊗ w(k)` is `p_j(k) w(k)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

fn check_dims(samples: &[DVector<f64>], n: usize, what: &str, start: i64) -> Result<()> {
    for (i, s) in samples.iter().enumerate() {
        if s.len() != n {
            return Err(Error::dim(
                format!("{what} sample at k={}", start + i as i64),
                n,
                s.len(),
            ));
        }
    }
    Ok(())
}

/// Manifest signal `w = col(u, y)` on a finite time window.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    samples: Vec<DVector<f64>>,
    start: i64,
    n_u: usize,
    n_y: usize,
}

impl Trajectory {
    pub fn new(samples: Vec<DVector<f64>>, n_u: usize, n_y: usize) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Empty("trajectory"));
        }
        Self::from_samples(samples, n_u, n_y)
    }

    /// Zero-length trajectory, used for empty initial windows.
    pub fn empty(n_u: usize, n_y: usize) -> Self {
        assert!(n_y >= 1, "a trajectory needs at least one output");
        Trajectory {
            samples: Vec::new(),
            start: 1,
            n_u,
            n_y,
        }
    }

    /// Like [`Trajectory::new`] but also accepts zero samples.
    pub fn from_samples(samples: Vec<DVector<f64>>, n_u: usize, n_y: usize) -> Result<Self> {
        if n_y == 0 {
            return Err(Error::InvalidParameter("n_y must be at least 1".into()));
        }
        check_dims(&samples, n_u + n_y, "w", 1)?;
        Ok(Trajectory {
            samples,
            start: 1,
            n_u,
            n_y,
        })
    }

    pub fn from_io(u: &[DVector<f64>], y: &[DVector<f64>]) -> Result<Self> {
        if u.len() != y.len() {
            return Err(Error::Alignment {
                what: "input/output",
                left: u.len(),
                right: y.len(),
            });
        }
        let n_u = u.first().map(|v| v.len()).unwrap_or(0);
        let n_y = y.first().map(|v| v.len()).unwrap_or(1);
        check_dims(u, n_u, "u", 1)?;
        check_dims(y, n_y, "y", 1)?;
        let samples = u
            .iter()
            .zip(y)
            .map(|(u, y)| {
                let mut w = DVector::zeros(n_u + n_y);
                w.rows_mut(0, n_u).copy_from(u);
                w.rows_mut(n_u, n_y).copy_from(y);
                w
            })
            .collect();
        Self::from_samples(samples, n_u, n_y)
    }

    pub fn with_start(mut self, start: i64) -> Self {
        self.start = start;
        self
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn n_u(&self) -> usize {
        self.n_u
    }

    pub fn n_y(&self) -> usize {
        self.n_y
    }

    pub fn n_w(&self) -> usize {
        self.n_u + self.n_y
    }

    pub fn start(&self) -> i64 {
        self.start
    }

    pub fn samples(&self) -> &[DVector<f64>] {
        &self.samples
    }

    pub fn input(&self, i: usize) -> DVector<f64> {
        self.samples[i].rows(0, self.n_u).into_owned()
    }

    pub fn output(&self, i: usize) -> DVector<f64> {
        self.samples[i].rows(self.n_u, self.n_y).into_owned()
    }

    pub fn inputs(&self) -> Vec<DVector<f64>> {
        (0..self.len()).map(|i| self.input(i)).collect()
    }

    pub fn outputs(&self) -> Vec<DVector<f64>> {
        (0..self.len()).map(|i| self.output(i)).collect()
    }

    /// Sub-window of `len` samples starting at 0-based offset `from`.
    pub fn window(&self, from: usize, len: usize) -> Trajectory {
        Trajectory {
            samples: self.samples[from..from + len].to_vec(),
            start: self.start + from as i64,
            n_u: self.n_u,
            n_y: self.n_y,
        }
    }

    pub fn truncate(&self, len: usize) -> Trajectory {
        self.window(0, len.min(self.len()))
    }

    /// Time-major `vec(w)`.
    pub fn vec(&self) -> DVector<f64> {
        vec_samples(&self.samples)
    }
}

/// Scheduling signal `p` with an optional declared box `P`.
#[derive(Debug, Clone, PartialEq)]
pub struct SchedulingTrajectory {
    samples: Vec<DVector<f64>>,
    start: i64,
    n_p: usize,
}

impl SchedulingTrajectory {
    pub fn new(samples: Vec<DVector<f64>>) -> Result<Self> {
        let n_p = samples
            .first()
            .map(|s| s.len())
            .ok_or(Error::Empty("scheduling trajectory"))?;
        Self::from_samples(samples, n_p)
    }

    /// Accepts zero samples as long as `n_p` is given.
    pub fn from_samples(samples: Vec<DVector<f64>>, n_p: usize) -> Result<Self> {
        if n_p == 0 {
            return Err(Error::InvalidParameter("n_p must be at least 1".into()));
        }
        check_dims(&samples, n_p, "p", 1)?;
        Ok(SchedulingTrajectory {
            samples,
            start: 1,
            n_p,
        })
    }

    pub fn empty(n_p: usize) -> Self {
        assert!(n_p >= 1, "n_p must be at least 1");
        SchedulingTrajectory {
            samples: Vec::new(),
            start: 1,
            n_p,
        }
    }

    /// Constant trajectory `p(k) = value` for `len` samples.
    pub fn constant(value: DVector<f64>, len: usize) -> Result<Self> {
        let n_p = value.len();
        Self::from_samples(vec![value; len], n_p)
    }

    pub fn with_start(mut self, start: i64) -> Self {
        self.start = start;
        self
    }

    /// Check every sample against the box `lower <= p(k) <= upper`.
    pub fn check_box(&self, lower: &[f64], upper: &[f64]) -> Result<()> {
        if lower.len() != self.n_p || upper.len() != self.n_p {
            return Err(Error::dim(
                "scheduling box",
                self.n_p,
                lower.len().min(upper.len()),
            ));
        }
        for (i, s) in self.samples.iter().enumerate() {
            for j in 0..self.n_p {
                if s[j] < lower[j] || s[j] > upper[j] {
                    return Err(Error::InvalidParameter(format!(
                        "p_{}({}) = {} lies outside [{}, {}]",
                        j + 1,
                        self.start + i as i64,
                        s[j],
                        lower[j],
                        upper[j]
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn n_p(&self) -> usize {
        self.n_p
    }

    pub fn start(&self) -> i64 {
        self.start
    }

    pub fn samples(&self) -> &[DVector<f64>] {
        &self.samples
    }

    pub fn window(&self, from: usize, len: usize) -> SchedulingTrajectory {
        SchedulingTrajectory {
            samples: self.samples[from..from + len].to_vec(),
            start: self.start + from as i64,
            n_p: self.n_p,
        }
    }

    pub fn truncate(&self, len: usize) -> SchedulingTrajectory {
        self.window(0, len.min(self.len()))
    }

    pub fn concat(&self, other: &SchedulingTrajectory) -> Result<SchedulingTrajectory> {
        if self.n_p != other.n_p {
            return Err(Error::dim("scheduling concatenation", self.n_p, other.n_p));
        }
        let mut samples = self.samples.clone();
        samples.extend(other.samples.iter().cloned());
        Ok(SchedulingTrajectory {
            samples,
            start: self.start,
            n_p: self.n_p,
        })
    }
}

/// A `(w, p)` pair on a common time window.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub w: Trajectory,
    pub p: SchedulingTrajectory,
}

impl Window {
    pub fn new(w: Trajectory, p: SchedulingTrajectory) -> Result<Self> {
        if w.len() != p.len() {
            return Err(Error::Alignment {
                what: "signal/scheduling window",
                left: w.len(),
                right: p.len(),
            });
        }
        Ok(Window { w, p })
    }

    /// Build from separate input, output and scheduling sequences.
    pub fn from_parts(
        u: &[DVector<f64>],
        y: &[DVector<f64>],
        p: &[DVector<f64>],
        n_u: usize,
        n_y: usize,
        n_p: usize,
    ) -> Result<Self> {
        if u.len() != y.len() {
            return Err(Error::Alignment {
                what: "input/output",
                left: u.len(),
                right: y.len(),
            });
        }
        let w = if u.is_empty() {
            Trajectory::empty(n_u, n_y)
        } else {
            let w = Trajectory::from_io(u, y)?;
            if w.n_u() != n_u || w.n_y() != n_y {
                return Err(Error::dim("window signal", n_u + n_y, w.n_w()));
            }
            w
        };
        Window::new(w, SchedulingTrajectory::from_samples(p.to_vec(), n_p)?)
    }

    /// All-zero window of the given length.
    pub fn zeros(n_u: usize, n_y: usize, n_p: usize, len: usize) -> Self {
        Window {
            w: Trajectory::from_samples(vec![DVector::zeros(n_u + n_y); len], n_u, n_y)
                .expect("valid dimensions"),
            p: SchedulingTrajectory::from_samples(vec![DVector::zeros(n_p); len], n_p)
                .expect("valid dimensions"),
        }
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    pub fn window(&self, from: usize, len: usize) -> Window {
        Window {
            w: self.w.window(from, len),
            p: self.p.window(from, len),
        }
    }

    /// The last `len` samples.
    pub fn tail(&self, len: usize) -> Window {
        let len = len.min(self.len());
        self.window(self.len() - len, len)
    }

    pub fn concat(&self, other: &Window) -> Result<Window> {
        Ok(Window {
            w: concat(&self.w, &other.w)?,
            p: self.p.concat(&other.p)?,
        })
    }
}

/// Depth-`L` block Hankel matrix: block `(i, j)` (0-based) holds sample
/// `i + j` of the source signal.
#[derive(Debug, Clone, PartialEq)]
pub struct HankelMatrix {
    pub entries: DMatrix<f64>,
    pub depth: usize,
    pub block_rows: usize,
}

impl HankelMatrix {
    pub fn cols(&self) -> usize {
        self.entries.ncols()
    }

    pub fn rows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn block(&self, i: usize, j: usize) -> DVector<f64> {
        self.entries
            .view((i * self.block_rows, j), (self.block_rows, 1))
            .column(0)
            .into_owned()
    }

    /// Rows of block rows `from .. from + count`.
    pub fn block_rows_range(&self, from: usize, count: usize) -> DMatrix<f64> {
        self.entries
            .rows(from * self.block_rows, count * self.block_rows)
            .into_owned()
    }

    /// Rows `offset .. offset + width` inside each of the block rows
    /// `from .. from + count`, stacked. Used to pick the `u` or `y` part out
    /// of a Hankel matrix of `w`.
    pub fn select(&self, from: usize, count: usize, offset: usize, width: usize) -> DMatrix<f64> {
        assert!(offset + width <= self.block_rows);
        let mut out = DMatrix::zeros(count * width, self.cols());
        for t in 0..count {
            let src = (from + t) * self.block_rows + offset;
            out.rows_mut(t * width, width)
                .copy_from(&self.entries.rows(src, width));
        }
        out
    }
}

/// Block Hankel matrix of depth `depth` of a sequence of equally sized vectors.
pub fn hankel(samples: &[DVector<f64>], depth: usize) -> Result<HankelMatrix> {
    if depth == 0 {
        return Err(Error::ZeroDepth);
    }
    if depth > samples.len() {
        return Err(Error::DepthExceedsData {
            depth,
            len: samples.len(),
        });
    }
    let n = samples[0].len();
    check_dims(samples, n, "Hankel source", 1)?;
    let cols = samples.len() - depth + 1;
    let mut entries = DMatrix::zeros(depth * n, cols);
    for j in 0..cols {
        for i in 0..depth {
            entries
                .view_mut((i * n, j), (n, 1))
                .copy_from(&samples[i + j]);
        }
    }
    Ok(HankelMatrix {
        entries,
        depth,
        block_rows: n,
    })
}

/// `p(k) ⊗ w(k)` for each sample, p-major.
pub fn kron_samples(p: &[DVector<f64>], w: &[DVector<f64>]) -> Result<Vec<DVector<f64>>> {
    if p.len() != w.len() {
        return Err(Error::Alignment {
            what: "scheduling lift",
            left: w.len(),
            right: p.len(),
        });
    }
    Ok(p.iter().zip(w).map(|(p, w)| p.kronecker(w)).collect())
}

/// Lifted signal `w^p(k) = p(k) ⊗ w(k)`.
pub fn kron_lift(w: &Trajectory, p: &SchedulingTrajectory) -> Result<Vec<DVector<f64>>> {
    if w.len() != p.len() || (!w.is_empty() && w.start() != p.start()) {
        return Err(Error::Alignment {
            what: "scheduling lift",
            left: w.len(),
            right: p.len(),
        });
    }
    kron_samples(p.samples(), w.samples())
}

/// Auxiliary signal `w'(k) = col(w(k), p(k) ⊗ w(k)) = col(1, p(k)) ⊗ w(k)`.
pub fn extended_lift(w: &Trajectory, p: &SchedulingTrajectory) -> Result<Vec<DVector<f64>>> {
    let lifted = kron_lift(w, p)?;
    Ok(w.samples()
        .iter()
        .zip(lifted)
        .map(|(w, wp)| {
            let mut out = DVector::zeros(w.len() + wp.len());
            out.rows_mut(0, w.len()).copy_from(w);
            out.rows_mut(w.len(), wp.len()).copy_from(&wp);
            out
        })
        .collect())
}

/// Row permutation relating `H_L(w')` to the stacked `[H_L(w); H_L(w^p)]`:
/// row `r` of `H_L(w')` equals row `perm[r]` of the stacked matrix.
pub fn extended_row_permutation(depth: usize, n_w: usize, n_p: usize) -> Vec<usize> {
    let block = (1 + n_p) * n_w;
    let lifted_base = depth * n_w;
    (0..depth * block)
        .map(|r| {
            let (t, o) = (r / block, r % block);
            if o < n_w {
                t * n_w + o
            } else {
                lifted_base + t * n_p * n_w + (o - n_w)
            }
        })
        .collect()
}

/// `blkdiag(p(1) ⊗ I_n, ..., p(N) ⊗ I_n)`, of size `(N n_p n) x (N n)`.
pub fn blkdiag_kron(p: &[DVector<f64>], n: usize) -> DMatrix<f64> {
    let n_p = p.first().map(|s| s.len()).unwrap_or(0);
    let len = p.len();
    let mut out = DMatrix::zeros(len * n_p * n, len * n);
    for (k, pk) in p.iter().enumerate() {
        for j in 0..n_p {
            let r0 = k * n_p * n + j * n;
            let c0 = k * n;
            for d in 0..n {
                out[(r0 + d, c0 + d)] = pk[j];
            }
        }
    }
    out
}

/// Concatenation `a ∧ b`.
pub fn concat(a: &Trajectory, b: &Trajectory) -> Result<Trajectory> {
    if a.n_u != b.n_u || a.n_y != b.n_y {
        return Err(Error::dim("trajectory concatenation", a.n_w(), b.n_w()));
    }
    let mut samples = a.samples.clone();
    samples.extend(b.samples.iter().cloned());
    Ok(Trajectory {
        samples,
        start: if a.is_empty() { b.start } else { a.start },
        n_u: a.n_u,
        n_y: a.n_y,
    })
}

/// Time-major stacking of a sequence of vectors.
pub fn vec_samples(samples: &[DVector<f64>]) -> DVector<f64> {
    let n: usize = samples.iter().map(|s| s.len()).sum();
    let mut out = DVector::zeros(n);
    let mut r = 0;
    for s in samples {
        out.rows_mut(r, s.len()).copy_from(s);
        r += s.len();
    }
    out
}

/// Inverse of [`vec_samples`] for equally sized blocks.
pub fn unvec(v: &DVector<f64>, block: usize) -> Vec<DVector<f64>> {
    assert!(block > 0 && v.len() % block == 0);
    (0..v.len() / block)
        .map(|k| v.rows(k * block, block).into_owned())
        .collect()
}

/// Scalar samples as 1-vectors.
pub fn scalars(values: &[f64]) -> Vec<DVector<f64>> {
    values
        .iter()
        .map(|&x| DVector::from_element(1, x))
        .collect()
}
