//! Synthetic benchmark: a random rank-`r` symmetric operator, three snapshot
//! regimes, and a rank sweep over the three fitters.
//!
//! * Setting `i`: one trajectory `x_t = Ĝ·x_{t−1}` of length `m + 1`, with `Ĝ`
//!   the operator divided by its spectral radius. After the first step every
//!   iterate lies in `range(G)`, so each successor is (numerically) a linear
//!   combination of the predecessors.
//! * Setting `ii`: `m` independent pairs `(x, G·x)` from standard-normal `x`.
//! * Setting `iii`: `m` independent pairs `(x, G·(x + x∘x∘x))`.
//!
//! Randomness comes from ChaCha20 seeded with a `u64`; each purpose draws
//! from its own ChaCha stream (0 for the operator, 1–3 for the settings), and
//! normal variates use `rand_distr::StandardNormal`.

use std::fmt;
use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::io::fmt_f64;
use crate::linalg::{thin_svd, DEFAULT_SVD_TOL};
use crate::snapshot::{build_data_matrices, validate_rank_assumptions, DataMatrices, SnapshotSet};
use crate::solvers::{
    fit_optimal_lowrank_dmd, fit_projected_dmd, fit_truncated_exact_dmd, residual_norm, DmdOperator, FitOptions,
};

/// Generator description written into run metadata.
pub const RNG_DESCRIPTION: &str = "ChaCha20Rng (rand_chacha 0.9) seeded via seed_from_u64, stream per purpose; StandardNormal (rand_distr 0.5, ziggurat)";

/// Header of the benchmark result CSV.
pub const CSV_HEADER: &str = "setting,method,k,residual,companion_residual,wall_time_ms";

fn rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn normal_vector(rng: &mut ChaCha20Rng, n: usize) -> DVector<f64> {
    DVector::from_iterator(n, (0..n).map(|_| StandardNormal.sample(rng)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyModel {
    /// Symmetric positive semidefinite `n×n` operator of rank `r`.
    pub g: DMatrix<f64>,
    pub n: usize,
    pub r: usize,
    pub seed: u64,
    /// Factor the original sum of outer products was divided by (1 = none).
    pub normalization: f64,
}

impl ToyModel {
    /// Largest eigenvalue, which is the spectral radius for a PSD matrix.
    pub fn spectral_radius(&self) -> f64 {
        SymmetricEigen::new(self.g.clone())
            .eigenvalues
            .iter()
            .copied()
            .fold(0.0, f64::max)
    }

    pub fn spectrally_normalized(&self) -> ToyModel {
        let rho = self.spectral_radius();
        if rho == 0.0 {
            return self.clone();
        }
        ToyModel {
            g: &self.g / rho,
            normalization: self.normalization * rho,
            ..self.clone()
        }
    }
}

/// `G = Σ_{i=1}^{r} ξ_i·ξ_iᵀ` with i.i.d. standard-normal `ξ_i ∈ R^n`.
pub fn generate_toy_operator(n: usize, r: usize, seed: u64) -> Result<ToyModel> {
    if n == 0 || r == 0 || r > n {
        return Err(Error::InvalidInput(format!("need 1 ≤ r ≤ n, got n = {n}, r = {r}")));
    }
    let mut rng = rng(seed, 0);
    let mut g = DMatrix::zeros(n, n);
    for _ in 0..r {
        let xi = normal_vector(&mut rng, n);
        g.ger(1.0, &xi, &xi, 1.0);
    }
    Ok(ToyModel {
        g,
        n,
        r,
        seed,
        normalization: 1.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Setting {
    I,
    II,
    III,
}

impl Setting {
    pub const ALL: [Setting; 3] = [Setting::I, Setting::II, Setting::III];

    pub fn name(self) -> &'static str {
        match self {
            Setting::I => "i",
            Setting::II => "ii",
            Setting::III => "iii",
        }
    }

    fn stream(self) -> u64 {
        match self {
            Setting::I => 1,
            Setting::II => 2,
            Setting::III => 3,
        }
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Setting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "i" | "1" => Ok(Setting::I),
            "ii" | "2" => Ok(Setting::II),
            "iii" | "3" => Ok(Setting::III),
            other => Err(Error::InvalidInput(format!(
                "unknown setting '{other}' (expected i, ii or iii)"
            ))),
        }
    }
}

/// The three fitters compared in the sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BenchMethod {
    /// Optimal closed-form low-rank solver.
    A,
    /// Rank-`k` truncation of exact DMD.
    B,
    /// Projected low-rank DMD.
    C,
}

impl BenchMethod {
    pub const ALL: [BenchMethod; 3] = [BenchMethod::A, BenchMethod::B, BenchMethod::C];

    pub fn name(self) -> &'static str {
        match self {
            BenchMethod::A => "a",
            BenchMethod::B => "b",
            BenchMethod::C => "c",
        }
    }

    pub fn fit(self, d: &DataMatrices, k: usize, opts: &FitOptions) -> Result<DmdOperator> {
        match self {
            BenchMethod::A => fit_optimal_lowrank_dmd(d, k, opts).map(|(op, _)| op),
            BenchMethod::B => fit_truncated_exact_dmd(d, k, opts),
            BenchMethod::C => fit_projected_dmd(d, k, opts),
        }
    }
}

impl fmt::Display for BenchMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BenchMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "a" | "optimal" => Ok(BenchMethod::A),
            "b" | "truncated" => Ok(BenchMethod::B),
            "c" | "projected" => Ok(BenchMethod::C),
            other => Err(Error::InvalidInput(format!(
                "unknown method '{other}' (expected a, b or c)"
            ))),
        }
    }
}

/// Snapshots for one setting. Setting `i` always runs on the spectrally
/// normalized operator; the trajectory is checked for overflow.
pub fn generate_snapshots(model: &ToyModel, setting: Setting, m: usize, seed: u64) -> Result<SnapshotSet> {
    let n = model.n;
    if m == 0 || m > n {
        return Err(Error::InvalidInput(format!("need 1 ≤ m ≤ n, got m = {m}, n = {n}")));
    }
    let mut rng = rng(seed, setting.stream());
    let trajectories = match setting {
        Setting::I => {
            let g = model.spectrally_normalized().g;
            let mut traj = vec![normal_vector(&mut rng, n)];
            for t in 1..=m {
                let next = &g * &traj[t - 1];
                if !next.iter().all(|v| v.is_finite()) {
                    return Err(Error::Diverged {
                        t: t + 1,
                        norm: next.norm(),
                    });
                }
                traj.push(next);
            }
            vec![traj]
        }
        Setting::II => (0..m)
            .map(|_| {
                let x = normal_vector(&mut rng, n);
                let y = &model.g * &x;
                vec![x, y]
            })
            .collect(),
        Setting::III => (0..m)
            .map(|_| {
                let x = normal_vector(&mut rng, n);
                let y = &model.g * (&x + x.map(|v| v * v * v));
                vec![x, y]
            })
            .collect(),
    };
    SnapshotSet::new(trajectories)
}

/// `‖Y − X·X†·Y‖_F / ‖Y‖_F`: how far the successors are from the column span
/// of the predecessors (zero when a companion matrix exists).
pub fn companion_residual(d: &DataMatrices, tol: f64) -> Result<f64> {
    let y_norm = d.y.norm();
    if y_norm == 0.0 {
        return Ok(0.0);
    }
    let basis = if d.n() >= d.m() {
        let f = thin_svd(&d.x)?;
        let r = f.numerical_rank(tol);
        f.w.columns(0, r).into_owned()
    } else {
        let f = thin_svd(&d.x.transpose())?;
        let r = f.numerical_rank(tol);
        f.v.columns(0, r).into_owned()
    };
    let projected = &basis * (basis.transpose() * &d.y);
    Ok((&d.y - projected).norm() / y_norm)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub n: usize,
    pub r: usize,
    pub m: usize,
    pub settings: Vec<Setting>,
    pub methods: Vec<BenchMethod>,
    pub k_values: Vec<usize>,
    pub seed: u64,
    pub output: Option<PathBuf>,
    /// Record wall-clock time per fit. Off by default so that repeated runs
    /// produce identical bytes; the column then reads `nan`.
    pub timing: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            n: 50,
            r: 30,
            m: 40,
            settings: Setting::ALL.to_vec(),
            methods: BenchMethod::ALL.to_vec(),
            k_values: (1..=40).collect(),
            seed: 1,
            output: None,
            timing: false,
        }
    }
}

fn parse_list<T: FromStr<Err = Error>>(value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(T::from_str)
        .collect()
}

/// Parses `1..40`, `1..=40`, `1,2,5` or mixtures like `1..5,10`.
pub fn parse_k_values(value: &str) -> Result<Vec<usize>> {
    let bad = |s: &str| Error::InvalidInput(format!("bad k value '{s}'"));
    let mut out = Vec::new();
    for part in value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        if let Some((lo, hi)) = part.split_once("..") {
            let hi = hi.strip_prefix('=').unwrap_or(hi);
            let lo: usize = lo.trim().parse().map_err(|_| bad(part))?;
            let hi: usize = hi.trim().parse().map_err(|_| bad(part))?;
            out.extend(lo..=hi);
        } else {
            out.push(part.parse().map_err(|_| bad(part))?);
        }
    }
    Ok(out)
}

fn format_k_values(ks: &[usize]) -> String {
    let contiguous = ks.windows(2).all(|w| w[1] == w[0] + 1);
    match (ks.first(), ks.last()) {
        (Some(lo), Some(hi)) if contiguous && ks.len() > 2 => format!("{lo}..{hi}"),
        _ => ks.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(","),
    }
}

impl BenchConfig {
    /// Reads the flat `key = value` format; `#` starts a comment. Keys not
    /// present keep their defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = BenchConfig::default();
        let mut k_given = false;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::InvalidInput(format!("line {}: expected key = value", lineno + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            let num = |v: &str| -> Result<usize> {
                v.parse().map_err(|_| {
                    Error::InvalidInput(format!("line {}: {key} must be a non-negative integer", lineno + 1))
                })
            };
            match key {
                "n" => cfg.n = num(value)?,
                "r" => cfg.r = num(value)?,
                "m" => cfg.m = num(value)?,
                "settings" => cfg.settings = parse_list(value)?,
                "methods" => cfg.methods = parse_list(value)?,
                "k_values" => {
                    cfg.k_values = parse_k_values(value)?;
                    k_given = true;
                }
                "seed" => {
                    cfg.seed = value
                        .parse()
                        .map_err(|_| Error::InvalidInput(format!("line {}: seed must be a u64", lineno + 1)))?
                }
                "output" => cfg.output = (!value.is_empty()).then(|| PathBuf::from(value)),
                "timing" => {
                    cfg.timing = value.parse().map_err(|_| {
                        Error::InvalidInput(format!("line {}: timing must be true or false", lineno + 1))
                    })?
                }
                other => {
                    return Err(Error::InvalidInput(format!(
                        "line {}: unknown key '{other}'",
                        lineno + 1
                    )))
                }
            }
        }
        if !k_given {
            cfg.k_values = (1..=cfg.m).collect();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_kv_string(&self) -> String {
        let join = |v: Vec<&str>| v.join(",");
        let mut s = String::new();
        s.push_str(&format!("n = {}\nr = {}\nm = {}\n", self.n, self.r, self.m));
        s.push_str(&format!(
            "settings = {}\n",
            join(self.settings.iter().map(|x| x.name()).collect())
        ));
        s.push_str(&format!(
            "methods = {}\n",
            join(self.methods.iter().map(|x| x.name()).collect())
        ));
        s.push_str(&format!("k_values = {}\n", format_k_values(&self.k_values)));
        s.push_str(&format!("seed = {}\n", self.seed));
        if let Some(out) = &self.output {
            s.push_str(&format!("output = {}\n", out.display()));
        }
        s.push_str(&format!("timing = {}\n", self.timing));
        s
    }

    /// Checks dimensions and puts settings, methods and ranks in canonical
    /// order without duplicates.
    pub fn validate(&mut self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if self.r == 0 || self.r > self.n {
            return bad(format!("need 1 ≤ r ≤ n, got r = {}, n = {}", self.r, self.n));
        }
        if self.m == 0 || self.m > self.n {
            return bad(format!("need 1 ≤ m ≤ n, got m = {}, n = {}", self.m, self.n));
        }
        for (name, empty) in [
            ("settings", self.settings.is_empty()),
            ("methods", self.methods.is_empty()),
            ("k_values", self.k_values.is_empty()),
        ] {
            if empty {
                return bad(format!("{name} must not be empty"));
            }
        }
        if let Some(k) = self.k_values.iter().find(|&&k| k == 0 || k > self.m) {
            return bad(format!("k = {k} outside 1..={}", self.m));
        }
        self.settings.sort();
        self.settings.dedup();
        self.methods.sort();
        self.methods.dedup();
        self.k_values.sort();
        self.k_values.dedup();
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub setting: Setting,
    pub method: BenchMethod,
    pub k: usize,
    /// `NaN` when the fit failed.
    pub residual: f64,
    pub companion_residual: f64,
    pub wall_time_ms: Option<f64>,
    pub error: Option<String>,
}

/// Per-setting data summary.
#[derive(Debug, Clone, PartialEq)]
pub struct SettingSummary {
    pub setting: Setting,
    pub y_norm: f64,
    pub rank_x: usize,
    pub rank_y: usize,
    pub companion_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchResult {
    pub rows: Vec<BenchRow>,
    pub summaries: Vec<SettingSummary>,
}

impl BenchResult {
    pub fn summary(&self, setting: Setting) -> Option<&SettingSummary> {
        self.summaries.iter().find(|s| s.setting == setting)
    }

    pub fn residual(&self, setting: Setting, method: BenchMethod, k: usize) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.setting == setting && r.method == method && r.k == k)
            .map(|r| r.residual)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{CSV_HEADER}")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                r.setting,
                r.method,
                r.k,
                fmt_f64(r.residual),
                fmt_f64(r.companion_residual),
                r.wall_time_ms.map_or_else(|| "nan".to_string(), |t| format!("{t:.3}")),
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV output is ASCII")
    }
}

/// Runs the full sweep: one operator, one dataset per setting, one fit per
/// `(setting, method, k)`. Fitter failures are recorded in the row and do
/// not stop the sweep.
pub fn run_benchmark(cfg: &BenchConfig) -> Result<BenchResult> {
    let mut cfg = cfg.clone();
    cfg.validate()?;
    let model = generate_toy_operator(cfg.n, cfg.r, cfg.seed)?;
    let opts = FitOptions {
        svd_tol: DEFAULT_SVD_TOL,
        strict_rank: false,
        clamp_rank: true,
    };

    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    for &setting in &cfg.settings {
        let data = build_data_matrices(&generate_snapshots(&model, setting, cfg.m, cfg.seed)?);
        let companion = companion_residual(&data, DEFAULT_SVD_TOL)?;
        let ranks = validate_rank_assumptions(&data, DEFAULT_SVD_TOL)?;
        summaries.push(SettingSummary {
            setting,
            y_norm: data.y.norm(),
            rank_x: ranks.rank_x,
            rank_y: ranks.rank_y,
            companion_residual: companion,
        });
        for &method in &cfg.methods {
            for &k in &cfg.k_values {
                let start = Instant::now();
                let outcome = method.fit(&data, k, &opts).and_then(|op| residual_norm(&op, &data));
                let elapsed = start.elapsed().as_secs_f64() * 1e3;
                let (residual, error) = match outcome {
                    Ok(r) => (r, None),
                    Err(e) => (f64::NAN, Some(e.to_string())),
                };
                rows.push(BenchRow {
                    setting,
                    method,
                    k,
                    residual,
                    companion_residual: companion,
                    wall_time_ms: cfg.timing.then_some(elapsed),
                    error,
                });
            }
        }
    }
    Ok(BenchResult { rows, summaries })
}
