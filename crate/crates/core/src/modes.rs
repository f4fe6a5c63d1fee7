//! Low-rank DMD modes, eigenvalues and amplitudes from the optimal factors.
//!
//! Given `A = P·Qᵀ` and the thin SVD `Q = W_Q·Σ_Q·V_Qᵀ`, the operator factors
//! as `A = (P·V_Q·Σ_Q)·W_Qᵀ`, so its nonzero eigenvalues are those of the
//! small `k×k` matrix `Ã = W_Qᵀ·P·V_Q·Σ_Q`. For an eigenvector `w` of `Ã`
//! two mode definitions are available:
//!
//! * [`ModeVariant::AsStated`]: `φ = W_Q·w`.
//! * [`ModeVariant::ExactReconstruction`]: `φ = λ⁻¹·P·V_Q·Σ_Q·w`, which is an
//!   eigenvector of `A` because `A·(P·V_Q·Σ_Q·w) = P·V_Q·Σ_Q·Ã·w`.
//!
//! Use [`verify_eigenpairs`] to measure `‖A·φ − λ·φ‖` for either variant.

use std::fmt;
use std::str::FromStr;

use log::warn;
use nalgebra::{DMatrix, DVector};

use crate::eig::{eigen_decompose, C64};
use crate::error::{Error, Result};
use crate::linalg::thin_svd;
use crate::solvers::{DmdOperator, OptimalLowRankFactors};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ModeVariant {
    AsStated,
    #[default]
    ExactReconstruction,
}

impl fmt::Display for ModeVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModeVariant::AsStated => "as-stated",
            ModeVariant::ExactReconstruction => "exact",
        })
    }
}

impl FromStr for ModeVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "as-stated" | "as_stated" => Ok(ModeVariant::AsStated),
            "exact" | "exact-reconstruction" | "exact_reconstruction" => Ok(ModeVariant::ExactReconstruction),
            other => Err(Error::InvalidInput(format!("unknown mode variant '{other}'"))),
        }
    }
}

/// Eigenvalue/mode pairs. Modes have unit norm with the largest-magnitude
/// entry real and positive.
#[derive(Debug, Clone)]
pub struct DmdModes {
    pub eigenvalues: Vec<C64>,
    /// `n×k'` with `k' ≤ k` (zero-eigenvalue modes are dropped in the exact
    /// variant).
    pub modes: DMatrix<C64>,
    pub variant: ModeVariant,
    pub source_rank: usize,
}

impl DmdModes {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }
}

/// `ν[(t−1, i)] = λ_i^{t−1}·φ_iᴴ·θ` for `t = 1..=T`.
#[derive(Debug, Clone)]
pub struct AmplitudeSchedule {
    pub values: DMatrix<C64>,
    pub theta: DVector<f64>,
}

impl AmplitudeSchedule {
    pub fn horizon(&self) -> usize {
        self.values.nrows()
    }
}

fn normalize_mode(mut v: DVector<C64>) -> DVector<C64> {
    let norm = v.norm();
    v.unscale_mut(norm);
    let mut best = 0.0;
    let mut phase = C64::new(1.0, 0.0);
    for x in v.iter() {
        if x.norm() > best {
            best = x.norm();
            phase = x / x.norm();
        }
    }
    v * phase.conj()
}

/// Runs the modes algorithm on the optimal-solver factors.
///
/// `tol` is the relative threshold for declaring `Q` rank deficient and for
/// treating an eigenvalue as zero.
pub fn compute_modes(f: &OptimalLowRankFactors, variant: ModeVariant, tol: f64) -> Result<DmdModes> {
    let k = f.rank();
    let qs = thin_svd(&f.q)?;
    let rank_q = qs.numerical_rank(tol);
    if rank_q < k {
        return Err(Error::RankDeficient {
            what: "Q",
            rank: rank_q,
            expected: k,
        });
    }
    // P·V_Q·Σ_Q
    let mut pvs = &f.p * &qs.v;
    for (j, s) in qs.sigma.iter().enumerate() {
        pvs.column_mut(j).scale_mut(*s);
    }
    let reduced = qs.w.transpose() * &pvs;
    let eig = eigen_decompose(&reduced)?;

    let basis = match variant {
        ModeVariant::AsStated => &qs.w,
        ModeVariant::ExactReconstruction => &pvs,
    };
    let basis = basis.map(|v| C64::new(v, 0.0));
    let scale = eig.values.iter().map(|v| v.norm()).fold(0.0, f64::max);

    let mut eigenvalues = Vec::with_capacity(k);
    let mut columns = Vec::with_capacity(k);
    for (i, &lambda) in eig.values.iter().enumerate() {
        let mut phi = &basis * eig.vectors.column(i);
        if variant == ModeVariant::ExactReconstruction {
            if lambda.norm() <= tol * scale {
                warn!("dropping mode {i}: zero eigenvalue has no exact-reconstruction mode");
                continue;
            }
            phi /= lambda;
        }
        eigenvalues.push(lambda);
        columns.push(normalize_mode(phi));
    }
    let n = f.p.nrows();
    let modes = if columns.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&columns)
    };
    Ok(DmdModes {
        eigenvalues,
        modes,
        variant,
        source_rank: k,
    })
}

/// Per-mode eigenpair residuals `‖A·φ_i − λ_i·φ_i‖₂`.
#[derive(Debug, Clone)]
pub struct EigenpairReport {
    pub residuals: Vec<f64>,
    pub tolerance: f64,
}

impl EigenpairReport {
    pub fn passed(&self) -> Vec<bool> {
        self.residuals.iter().map(|&r| r <= self.tolerance).collect()
    }

    pub fn all_passed(&self) -> bool {
        self.residuals.iter().all(|&r| r <= self.tolerance)
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }
}

/// Evaluates the eigenpair residuals through the operator factors and flags
/// each against `tolerance` (absolute).
pub fn verify_eigenpairs(modes: &DmdModes, op: &DmdOperator, tolerance: f64) -> Result<EigenpairReport> {
    if modes.modes.nrows() != op.dim() {
        return Err(Error::InvalidInput(format!(
            "modes live in R^{} but the operator acts on R^{}",
            modes.modes.nrows(),
            op.dim()
        )));
    }
    let residuals = modes
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(i, &lambda)| {
            let phi = modes.modes.column(i);
            let re = phi.map(|v| v.re);
            let im = phi.map(|v| v.im);
            let a_re = op.apply(&re);
            let a_im = op.apply(&im);
            // (λ·φ) split into real and imaginary parts
            let l_re = &re * lambda.re - &im * lambda.im;
            let l_im = &im * lambda.re + &re * lambda.im;
            ((a_re - l_re).norm_squared() + (a_im - l_im).norm_squared()).sqrt()
        })
        .collect();
    Ok(EigenpairReport { residuals, tolerance })
}

/// Amplitude schedule for `t = 1..=horizon`, built by the geometric
/// recurrence `ν_{i,t+1} = λ_i·ν_{i,t}`.
pub fn amplitudes(modes: &DmdModes, theta: &DVector<f64>, horizon: usize) -> Result<AmplitudeSchedule> {
    if horizon == 0 {
        return Err(Error::InvalidInput("horizon must be ≥ 1".into()));
    }
    if theta.len() != modes.modes.nrows() {
        return Err(Error::InvalidInput(format!(
            "initial condition has dimension {}, modes have {}",
            theta.len(),
            modes.modes.nrows()
        )));
    }
    let k = modes.len();
    let theta_c = theta.map(|v| C64::new(v, 0.0));
    let mut values = DMatrix::<C64>::zeros(horizon, k);
    for i in 0..k {
        let mut nu = modes.modes.column(i).dotc(&theta_c);
        for t in 0..horizon {
            values[(t, i)] = nu;
            nu *= modes.eigenvalues[i];
        }
    }
    Ok(AmplitudeSchedule {
        values,
        theta: theta.clone(),
    })
}
