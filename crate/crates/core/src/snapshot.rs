//! Trajectory storage, CSV ingestion and the paired snapshot matrices.
//!
//! The on-disk format is one row per `(trajectory, time)` pair:
//!
//! ```text
//! traj_id,t,x0,x1,...,x{n-1}
//! 1,1,0.5,-1.25
//! 1,2,0.25,0.75
//! ```
//!
//! `traj_id` runs from 1 to `N`, `t` from 1 to `T`. Rows may come in any order
//! as long as the pairs tile the full `N×T` grid.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::io::fmt_f64;
use crate::linalg::thin_svd;

/// `N` trajectories of `T` states each, all in `R^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotSet {
    n: usize,
    trajectories: Vec<Vec<DVector<f64>>>,
}

impl SnapshotSet {
    /// Validates shape invariants: `N ≥ 1`, `T ≥ 2`, every trajectory of the
    /// same length and every state of dimension `n ≥ 1`.
    pub fn new(trajectories: Vec<Vec<DVector<f64>>>) -> Result<Self> {
        let first = trajectories
            .first()
            .ok_or_else(|| Error::InvalidInput("snapshot set needs at least one trajectory".into()))?;
        let t_len = first.len();
        if t_len < 2 {
            return Err(Error::InvalidInput(format!(
                "trajectories need at least 2 states, got {t_len}"
            )));
        }
        let n = first[0].len();
        if n == 0 {
            return Err(Error::InvalidInput("state dimension must be positive".into()));
        }
        for (i, traj) in trajectories.iter().enumerate() {
            if traj.len() != t_len {
                return Err(Error::Ragged(format!(
                    "trajectory {} has {} states, trajectory 1 has {t_len}",
                    i + 1,
                    traj.len()
                )));
            }
            if let Some(bad) = traj.iter().position(|x| x.len() != n) {
                return Err(Error::InvalidInput(format!(
                    "trajectory {} state {} has dimension {}, expected {n}",
                    i + 1,
                    bad + 1,
                    traj[bad].len()
                )));
            }
        }
        Ok(Self { n, trajectories })
    }

    /// State dimension `n`.
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Trajectory count `N`.
    pub fn num_trajectories(&self) -> usize {
        self.trajectories.len()
    }

    /// Snapshots per trajectory `T`.
    pub fn horizon(&self) -> usize {
        self.trajectories[0].len()
    }

    pub fn trajectories(&self) -> &[Vec<DVector<f64>>] {
        &self.trajectories
    }

    /// State `x^i_t` with 1-based indices, as in the file format.
    pub fn state(&self, traj: usize, t: usize) -> &DVector<f64> {
        &self.trajectories[traj - 1][t - 1]
    }

    /// First state of trajectory 1, the default initial condition.
    pub fn first_state(&self) -> &DVector<f64> {
        &self.trajectories[0][0]
    }
}

/// Predecessor matrix `X` and successor matrix `Y`, both `n×m` with
/// `m = (T−1)·N`. Column `j` of `Y` is the time successor of column `j` of `X`.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrices {
    pub x: DMatrix<f64>,
    pub y: DMatrix<f64>,
}

impl DataMatrices {
    /// Builds directly from paired matrices of identical shape.
    pub fn new(x: DMatrix<f64>, y: DMatrix<f64>) -> Result<Self> {
        if x.shape() != y.shape() {
            return Err(Error::InvalidInput(format!(
                "X is {:?} but Y is {:?}",
                x.shape(),
                y.shape()
            )));
        }
        Ok(Self { x, y })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn m(&self) -> usize {
        self.x.ncols()
    }
}

pub fn build_data_matrices(s: &SnapshotSet) -> DataMatrices {
    let n = s.dim();
    let t_len = s.horizon();
    let m = (t_len - 1) * s.num_trajectories();
    let mut x = DMatrix::zeros(n, m);
    let mut y = DMatrix::zeros(n, m);
    let mut j = 0;
    for traj in s.trajectories() {
        for pair in traj.windows(2) {
            x.set_column(j, &pair[0]);
            y.set_column(j, &pair[1]);
            j += 1;
        }
    }
    DataMatrices { x, y }
}

/// Numerical-rank diagnostics for a pair of snapshot matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct RankReport {
    pub n: usize,
    pub m: usize,
    pub tol: f64,
    pub rank_x: usize,
    pub rank_y: usize,
    pub sigma_x: Vec<f64>,
    pub sigma_y: Vec<f64>,
}

impl RankReport {
    pub fn m_le_n(&self) -> bool {
        self.m <= self.n
    }

    /// Both matrices have full column rank `m`.
    pub fn full_rank(&self) -> bool {
        self.rank_x == self.m && self.rank_y == self.m
    }

    /// The standing assumption of the closed-form solver: `m ≤ n` and
    /// `rank(X) = rank(Y) = m`.
    pub fn assumptions_hold(&self) -> bool {
        self.m_le_n() && self.full_rank()
    }
}

fn singular_values(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    let f = if m.nrows() >= m.ncols() {
        thin_svd(m)?
    } else {
        thin_svd(&m.transpose())?
    };
    Ok(f.sigma.iter().copied().collect())
}

/// Reports the numerical ranks of `X` and `Y` (singular values above
/// `tol·σ_max`). Never modifies the data.
pub fn validate_rank_assumptions(d: &DataMatrices, tol: f64) -> Result<RankReport> {
    let sigma_x = singular_values(&d.x)?;
    let sigma_y = singular_values(&d.y)?;
    Ok(RankReport {
        n: d.n(),
        m: d.m(),
        tol,
        rank_x: crate::linalg::numerical_rank(&sigma_x, tol),
        rank_y: crate::linalg::numerical_rank(&sigma_y, tol),
        sigma_x,
        sigma_y,
    })
}

fn format_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

pub fn load_snapshots(path: impl AsRef<Path>) -> Result<SnapshotSet> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);

    let header = reader.headers().map_err(|e| format_err(path, e.to_string()))?.clone();
    if header.len() < 3 || &header[0] != "traj_id" || &header[1] != "t" {
        return Err(format_err(path, "header must be traj_id,t,x0,...,x{n-1}"));
    }
    let n = header.len() - 2;
    for (i, name) in header.iter().skip(2).enumerate() {
        if name != format!("x{i}") {
            return Err(format_err(
                path,
                format!("column {} should be x{i}, found {name}", i + 3),
            ));
        }
    }

    let mut cells: BTreeMap<usize, BTreeMap<usize, DVector<f64>>> = BTreeMap::new();
    for (row_idx, record) in reader.records().enumerate() {
        let line = row_idx + 2;
        let record = record.map_err(|e| format_err(path, format!("line {line}: {e}")))?;
        if record.len() != n + 2 {
            return Err(format_err(
                path,
                format!("line {line}: expected {} fields, found {}", n + 2, record.len()),
            ));
        }
        let index = |k: usize, name: &str| -> Result<usize> {
            let v: usize = record[k].parse().map_err(|_| {
                format_err(
                    path,
                    format!("line {line}: {name} '{}' is not a positive integer", &record[k]),
                )
            })?;
            if v == 0 {
                return Err(format_err(path, format!("line {line}: {name} must start at 1")));
            }
            Ok(v)
        };
        let traj = index(0, "traj_id")?;
        let t = index(1, "t")?;
        let mut state = DVector::zeros(n);
        for c in 0..n {
            let v: f64 = record[c + 2]
                .parse()
                .map_err(|_| format_err(path, format!("line {line}: value '{}' is not numeric", &record[c + 2])))?;
            if !v.is_finite() {
                return Err(format_err(path, format!("line {line}: non-finite value")));
            }
            state[c] = v;
        }
        if cells.entry(traj).or_default().insert(t, state).is_some() {
            return Err(format_err(
                path,
                format!("line {line}: duplicate key (traj_id={traj}, t={t})"),
            ));
        }
    }
    if cells.is_empty() {
        return Err(format_err(path, "no data rows"));
    }

    let mut trajectories = Vec::with_capacity(cells.len());
    for (expected, (traj, states)) in (1..).zip(cells) {
        if traj != expected {
            return Err(format_err(
                path,
                format!("traj_id {expected} is missing (ids must be contiguous from 1)"),
            ));
        }
        for (expected_t, t) in (1..).zip(states.keys()) {
            if *t != expected_t {
                return Err(format_err(
                    path,
                    format!("trajectory {traj}: time index {expected_t} is missing"),
                ));
            }
        }
        trajectories.push(states.into_values().collect::<Vec<_>>());
    }
    SnapshotSet::new(trajectories).map_err(|e| match e {
        Error::Ragged(msg) => Error::Ragged(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Writes the snapshot CSV with 17 significant digits, which round-trips
/// every `f64` exactly.
pub fn write_snapshots<W: Write>(s: &SnapshotSet, mut out: W) -> std::io::Result<()> {
    let mut header = String::from("traj_id,t");
    for c in 0..s.dim() {
        header.push_str(&format!(",x{c}"));
    }
    writeln!(out, "{header}")?;
    for (i, traj) in s.trajectories().iter().enumerate() {
        for (t, x) in traj.iter().enumerate() {
            write!(out, "{},{}", i + 1, t + 1)?;
            for v in x.iter() {
                write!(out, ",{}", fmt_f64(*v))?;
            }
            writeln!(out)?;
        }
    }
    Ok(())
}

pub fn save_snapshots(s: &SnapshotSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    let mut out = std::io::BufWriter::new(file);
    write_snapshots(s, &mut out).map_err(io_err)?;
    out.flush().map_err(io_err)
}
