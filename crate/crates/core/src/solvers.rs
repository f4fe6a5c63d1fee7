//! Rank-constrained DMD fitters and the least-squares objective.
//!
//! All fitters return a [`DmdOperator`] in factored form `A = left·right`
//! with `left` of size `n×ρ` and `right` of size `ρ×n`; no `n×n` matrix is
//! formed unless [`materialize`] is called.
//!
//! * [`fit_optimal_lowrank_dmd`]: `A = P·Pᵀ·Y·X†` with `P` the dominant
//!   `k`-dimensional left singular basis of `Y`. This is the global minimizer
//!   of `‖Y − A·X‖_F` over `rank(A) ≤ k` when `X` has full column rank.
//! * [`fit_exact_dmd`]: the unconstrained minimizer `Y·X†`.
//! * [`fit_truncated_exact_dmd`]: best rank-`k` approximation of `Y·X†`.
//! * [`fit_projected_dmd`]: rank-`k` truncation inside the basis of `X`'s
//!   left singular vectors.

use std::fmt;

use log::warn;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{thin_svd, top_left_singular_basis, truncate_rank, SvdFactors, DEFAULT_SVD_TOL};
use crate::snapshot::DataMatrices;

/// Largest `n` that [`materialize`] will allocate.
pub const MATERIALIZE_LIMIT: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Optimal,
    TruncatedExact,
    Projected,
    ExactFull,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Optimal => "optimal",
            Method::TruncatedExact => "truncated_exact",
            Method::Projected => "projected",
            Method::ExactFull => "exact_full",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Relative singular-value threshold for numerical rank and pseudo-inverse.
    pub svd_tol: f64,
    /// Turn a rank-deficient `X` into an error instead of a warning.
    pub strict_rank: bool,
    /// For the optimal solver, use `min(k, rank(Y))` instead of failing when
    /// `k` exceeds the numerical rank of `Y`. The operator is the same for
    /// every `k ≥ rank(Y)`.
    pub clamp_rank: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            svd_tol: DEFAULT_SVD_TOL,
            strict_rank: false,
            clamp_rank: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitDiagnostics {
    pub n: usize,
    pub m: usize,
    pub rank_x: usize,
    /// Only computed by the optimal solver.
    pub rank_y: Option<usize>,
    pub requested_rank: Option<usize>,
}

impl FitDiagnostics {
    /// `X` has full column rank, so the pseudo-inverse is exact.
    pub fn x_full_rank(&self) -> bool {
        self.rank_x == self.m
    }
}

/// A fitted linear operator `A = left·right` of rank at most `declared_rank`.
#[derive(Debug, Clone, PartialEq)]
pub struct DmdOperator {
    pub left: DMatrix<f64>,
    pub right: DMatrix<f64>,
    pub declared_rank: usize,
    pub method: Method,
    pub diagnostics: FitDiagnostics,
}

impl DmdOperator {
    pub fn dim(&self) -> usize {
        self.left.nrows()
    }

    /// `A·x` in `O(n·ρ)`.
    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.left * (&self.right * x)
    }

    /// `A·M` for an `n×c` matrix, without forming `A`.
    pub fn apply_matrix(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        &self.left * (&self.right * m)
    }
}

/// Factors produced by the optimal solver and consumed by the modes and
/// reduced-order modules.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimalLowRankFactors {
    /// `n×k` orthonormal basis of the dominant left singular subspace of `Y`.
    pub p: DMatrix<f64>,
    /// `n×k` matrix `(Y·X†)ᵀ·P`, so that `A = P·Qᵀ`.
    pub q: DMatrix<f64>,
    /// Thin SVD of `X` restricted to its numerical rank.
    pub x_svd: SvdFactors,
}

impl OptimalLowRankFactors {
    pub fn rank(&self) -> usize {
        self.p.ncols()
    }

    pub fn operator(&self, diagnostics: FitDiagnostics) -> DmdOperator {
        DmdOperator {
            left: self.p.clone(),
            right: self.q.transpose(),
            declared_rank: self.rank(),
            method: Method::Optimal,
            diagnostics,
        }
    }
}

fn check_rank_arg(k: usize) -> Result<()> {
    if k == 0 {
        Err(Error::InvalidInput("rank must be ≥ 1".into()))
    } else {
        Ok(())
    }
}

/// Thin SVD of `X` cut to its numerical rank, with the rank-deficiency policy
/// applied.
fn effective_x_svd(d: &DataMatrices, opts: &FitOptions) -> Result<SvdFactors> {
    let (n, m) = (d.n(), d.m());
    if m == 0 {
        return Err(Error::InvalidInput("no snapshot pairs".into()));
    }
    if m > n {
        return Err(Error::InvalidInput(format!(
            "need m ≤ n, got m = {m} snapshot pairs for state dimension n = {n}"
        )));
    }
    let full = thin_svd(&d.x)?;
    let rank = full.numerical_rank(opts.svd_tol);
    if rank == 0 {
        return Err(Error::RankDeficient {
            what: "X",
            rank: 0,
            expected: m,
        });
    }
    if rank < m {
        if opts.strict_rank {
            return Err(Error::RankDeficient {
                what: "X",
                rank,
                expected: m,
            });
        }
        warn!("X is numerically rank deficient ({rank} < {m}); using a thresholded pseudo-inverse");
    }
    Ok(truncate_rank(&full, rank))
}

/// `M·V·Σ⁻¹` for the effective SVD of `X`.
fn times_v_sigma_inv(m: &DMatrix<f64>, xs: &SvdFactors) -> DMatrix<f64> {
    let mut f = m * &xs.v;
    for (j, s) in xs.sigma.iter().enumerate() {
        f.column_mut(j).unscale_mut(*s);
    }
    f
}

fn diagnostics(d: &DataMatrices, xs: &SvdFactors, rank_y: Option<usize>, k: Option<usize>) -> FitDiagnostics {
    FitDiagnostics {
        n: d.n(),
        m: d.m(),
        rank_x: xs.len(),
        rank_y,
        requested_rank: k,
    }
}

/// Unconstrained least-squares operator `Y·X† = (Y·V·Σ⁻¹)·Wᵀ`.
pub fn fit_exact_dmd(d: &DataMatrices, opts: &FitOptions) -> Result<DmdOperator> {
    let xs = effective_x_svd(d, opts)?;
    Ok(DmdOperator {
        left: times_v_sigma_inv(&d.y, &xs),
        right: xs.w.transpose(),
        declared_rank: xs.len(),
        method: Method::ExactFull,
        diagnostics: diagnostics(d, &xs, None, None),
    })
}

/// Best rank-`k` approximation of `Y·X†`.
///
/// With `F = Y·V·Σ⁻¹ = U·S·Zᵀ` and `Y·X† = F·Wᵀ`, the SVD of the operator is
/// `U·S·(W·Z)ᵀ` because `W` has orthonormal columns, so only the `n×r` factor
/// is decomposed.
pub fn fit_truncated_exact_dmd(d: &DataMatrices, k: usize, opts: &FitOptions) -> Result<DmdOperator> {
    check_rank_arg(k)?;
    let xs = effective_x_svd(d, opts)?;
    let f = thin_svd(&times_v_sigma_inv(&d.y, &xs))?;
    let kept = truncate_rank(&f, k);
    let mut left = kept.w.clone();
    for (j, s) in kept.sigma.iter().enumerate() {
        left.column_mut(j).scale_mut(*s);
    }
    let right = (&xs.w * &kept.v).transpose();
    Ok(DmdOperator {
        left,
        right,
        declared_rank: kept.len(),
        method: Method::TruncatedExact,
        diagnostics: diagnostics(d, &xs, None, Some(k)),
    })
}

/// Rank-`k` operator `W·W_B·Λ_B·V_Bᵀ·Σ⁻¹·Wᵀ`, where `W_B·Λ_B·V_Bᵀ` is the
/// rank-`k` truncated SVD of `B = Wᵀ·Y·V` and `X = W·Σ·Vᵀ`.
pub fn fit_projected_dmd(d: &DataMatrices, k: usize, opts: &FitOptions) -> Result<DmdOperator> {
    check_rank_arg(k)?;
    let xs = effective_x_svd(d, opts)?;
    let b = xs.w.transpose() * &d.y * &xs.v;
    let bk = truncate_rank(&thin_svd(&b)?, k);
    let mut wb_lambda = bk.w.clone();
    for (j, s) in bk.sigma.iter().enumerate() {
        wb_lambda.column_mut(j).scale_mut(*s);
    }
    let left = &xs.w * wb_lambda;
    let mut vb_sigma_inv = bk.v.transpose();
    for (j, s) in xs.sigma.iter().enumerate() {
        vb_sigma_inv.column_mut(j).unscale_mut(*s);
    }
    let right = vb_sigma_inv * xs.w.transpose();
    Ok(DmdOperator {
        left,
        right,
        declared_rank: bk.len(),
        method: Method::Projected,
        diagnostics: diagnostics(d, &xs, None, Some(k)),
    })
}

/// Closed-form minimizer of `‖Y − A·X‖_F` over `rank(A) ≤ k`:
/// `A = P·Pᵀ·Y·X† = P·Qᵀ`.
///
/// `P` comes from [`top_left_singular_basis`], which works on the `m×m` Gram
/// matrix of `Y`. Requires `k ≤ rank(Y)` unless [`FitOptions::clamp_rank`] is
/// set. If `X` is rank deficient the formula is still applied with the
/// thresholded pseudo-inverse, but optimality is then not guaranteed.
///
/// When `σ_k(Y) = σ_{k+1}(Y)` the minimizer is not unique; the one returned
/// is fixed by the deterministic SVD convention and only the objective value
/// is meaningful.
pub fn fit_optimal_lowrank_dmd(
    d: &DataMatrices,
    k: usize,
    opts: &FitOptions,
) -> Result<(DmdOperator, OptimalLowRankFactors)> {
    check_rank_arg(k)?;
    let xs = effective_x_svd(d, opts)?;
    let rank_y = thin_svd(&d.y)?.numerical_rank(opts.svd_tol);
    let k_eff = if k > rank_y {
        if !opts.clamp_rank || rank_y == 0 {
            return Err(Error::RankExceeded {
                what: "Y",
                requested: k,
                available: rank_y,
            });
        }
        rank_y
    } else {
        k
    };

    let p = top_left_singular_basis(&d.y, k_eff, opts.svd_tol)?;
    // Q = (Y·X†)ᵀ·P = W·Σ⁻¹·Vᵀ·Yᵀ·P
    let mut t = xs.v.transpose() * (d.y.transpose() * &p);
    for (i, s) in xs.sigma.iter().enumerate() {
        t.row_mut(i).unscale_mut(*s);
    }
    let q = &xs.w * t;

    let diag = diagnostics(d, &xs, Some(rank_y), Some(k));
    let factors = OptimalLowRankFactors { p, q, x_svd: xs };
    Ok((factors.operator(diag), factors))
}

/// `‖Y − A·X‖_F` evaluated through the factors of `A`.
pub fn residual_norm(op: &DmdOperator, d: &DataMatrices) -> Result<f64> {
    if op.right.ncols() != d.n() || op.left.nrows() != d.n() {
        return Err(Error::InvalidInput(format!(
            "operator acts on R^{} but data live in R^{}",
            op.right.ncols(),
            d.n()
        )));
    }
    Ok((&d.y - op.apply_matrix(&d.x)).norm())
}

/// Dense `n×n` matrix `left·right`.
pub fn materialize(op: &DmdOperator) -> Result<DMatrix<f64>> {
    let n = op.dim();
    if n > MATERIALIZE_LIMIT {
        return Err(Error::TooLarge {
            n,
            limit: MATERIALIZE_LIMIT,
        });
    }
    Ok(&op.left * &op.right)
}
