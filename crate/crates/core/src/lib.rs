//! Low-rank dynamic mode decomposition.
//!
//! Given snapshot pairs `(x_t, x_{t+1})` collected in matrices `X` and `Y`,
//! this crate fits linear operators `A` of rank at most `k` that minimize
//! `‖Y − A·X‖_F`, extracts their eigenvalues and modes, and runs reduced-order
//! simulations with them.
//!
//! The closed-form optimum is `A = P·Pᵀ·Y·X†`, where the columns of `P` span
//! the dominant `k`-dimensional left singular subspace of `Y`. Two common
//! baselines are provided for comparison (rank truncation of exact DMD, and
//! projected DMD), along with a synthetic benchmark that sweeps all three over
//! `k`.
//!
//! ```
//! use lowrank_dmd::{build_data_matrices, fit_optimal_lowrank_dmd, residual_norm, FitOptions, SnapshotSet};
//! use nalgebra::dvector;
//!
//! let traj = vec![dvector![1.0, 0.0, 0.0], dvector![0.0, 1.0, 0.0], dvector![0.0, 0.0, 1.0]];
//! let data = build_data_matrices(&SnapshotSet::new(vec![traj]).unwrap());
//! let (op, _) = fit_optimal_lowrank_dmd(&data, 1, &FitOptions::default()).unwrap();
//! assert!((residual_norm(&op, &data).unwrap() - 1.0).abs() < 1e-12);
//! ```
//!
//! A longer walk-through lives in the `book/` directory of the repository.

pub mod bench;
pub mod eig;
pub mod error;
pub mod io;
pub mod linalg;
pub mod modes;
pub mod rom;
pub mod snapshot;
pub mod solvers;

pub use bench::{
    companion_residual, generate_snapshots, generate_toy_operator, run_benchmark, BenchConfig, BenchMethod,
    BenchResult, BenchRow, Setting, ToyModel,
};
pub use eig::C64;
pub use error::{Error, Result};
pub use linalg::{pseudo_inverse, thin_svd, top_left_singular_basis, truncate_rank, SvdFactors, DEFAULT_SVD_TOL};
pub use modes::{
    amplitudes, compute_modes, verify_eigenpairs, AmplitudeSchedule, DmdModes, EigenpairReport, ModeVariant,
};
pub use rom::{reconstruct_from_modes, simulate_full, simulate_reduced, ModalReconstruction, RomTrajectory};
pub use snapshot::{
    build_data_matrices, load_snapshots, save_snapshots, validate_rank_assumptions, write_snapshots, DataMatrices,
    RankReport, SnapshotSet,
};
pub use solvers::{
    fit_exact_dmd, fit_optimal_lowrank_dmd, fit_projected_dmd, fit_truncated_exact_dmd, materialize, residual_norm,
    DmdOperator, FitDiagnostics, FitOptions, Method, OptimalLowRankFactors,
};

// Compile and run the guide's code samples as doctests.
#[cfg(doctest)]
pub mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub struct Introduction;
    #[doc = include_str!("../../../book/src/snapshots.md")]
    pub struct Snapshots;
    #[doc = include_str!("../../../book/src/optimal.md")]
    pub struct Optimal;
    #[doc = include_str!("../../../book/src/baselines.md")]
    pub struct Baselines;
    #[doc = include_str!("../../../book/src/modes.md")]
    pub struct Modes;
    #[doc = include_str!("../../../book/src/rom.md")]
    pub struct Rom;
    #[doc = include_str!("../../../book/src/benchmark.md")]
    pub struct Benchmark;
}
