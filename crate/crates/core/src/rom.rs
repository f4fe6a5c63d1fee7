//! Reduced-order trajectory generation.
//!
//! Three routes produce the surrogate trajectory `x̃_1 = θ`, `x̃_t = A·x̃_{t−1}`:
//!
//! * [`simulate_reduced`] runs the `k`-dimensional recursion
//!   `z_2 = Qᵀ·θ`, `z_t = (Qᵀ·P)·z_{t−1}` and lifts with `x̃_t = P·z_t`.
//!   `Qᵀ·P = Pᵀ·Y·X†·P` is formed once, so each step costs `O(k²)`.
//! * [`simulate_full`] applies the factored operator repeatedly.
//! * [`reconstruct_from_modes`] sums `Σ_i ν_{i,t}·φ_i`. This equals the other
//!   two routes only when the modes are orthonormal (symmetric `A`), and at
//!   `t = 1` it gives the projection of `θ` onto the modes.

use std::io::Write;

use log::warn;
use nalgebra::DVector;

use crate::eig::C64;
use crate::error::{Error, Result};
use crate::io::fmt_f64;
use crate::modes::{AmplitudeSchedule, DmdModes};
use crate::solvers::{DmdOperator, OptimalLowRankFactors};

/// States with norm above this abort the simulation.
pub const DIVERGENCE_LIMIT: f64 = 1e150;

/// Imaginary parts above this fraction of the state norm trigger a warning.
const IMAGINARY_WARN: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct RomTrajectory {
    /// 1-based time index of each stored state.
    pub times: Vec<usize>,
    pub states: Vec<DVector<f64>>,
    /// Reduced coordinates aligned with `states`; at `t = 1` this holds
    /// `Pᵀ·θ`, and `states[t] = P·z_t` holds from `t = 2` on.
    pub reduced_states: Option<Vec<DVector<f64>>>,
}

impl RomTrajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Keeps every `stride`-th stored state, starting with the first.
    pub fn subsample(&self, stride: usize) -> RomTrajectory {
        let stride = stride.max(1);
        let pick = |v: &Vec<DVector<f64>>| v.iter().step_by(stride).cloned().collect::<Vec<_>>();
        RomTrajectory {
            times: self.times.iter().step_by(stride).copied().collect(),
            states: pick(&self.states),
            reduced_states: self.reduced_states.as_ref().map(pick),
        }
    }

    /// Writes `t,x0,...,x{n-1}`, one row per stored state.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let n = self.states.first().map_or(0, |s| s.len());
        let mut header = String::from("t");
        for c in 0..n {
            header.push_str(&format!(",x{c}"));
        }
        writeln!(out, "{header}")?;
        for (t, x) in self.times.iter().zip(&self.states) {
            write!(out, "{t}")?;
            for v in x.iter() {
                write!(out, ",{}", fmt_f64(*v))?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

fn check_inputs(theta: &DVector<f64>, n: usize, horizon: usize) -> Result<()> {
    if horizon == 0 {
        return Err(Error::InvalidInput("horizon must be ≥ 1".into()));
    }
    if theta.len() != n {
        return Err(Error::InvalidInput(format!(
            "initial condition has dimension {}, expected {n}",
            theta.len()
        )));
    }
    Ok(())
}

fn guard(t: usize, x: &DVector<f64>) -> Result<()> {
    let norm = x.norm();
    if !norm.is_finite() || norm > DIVERGENCE_LIMIT {
        Err(Error::Diverged { t, norm })
    } else {
        Ok(())
    }
}

/// Surrogate trajectory through the `k`-dimensional recursion.
pub fn simulate_reduced(f: &OptimalLowRankFactors, theta: &DVector<f64>, horizon: usize) -> Result<RomTrajectory> {
    check_inputs(theta, f.p.nrows(), horizon)?;
    let transition = f.q.transpose() * &f.p;
    let mut states = vec![theta.clone()];
    let mut reduced = vec![f.p.transpose() * theta];
    let mut z = f.q.transpose() * theta;
    for t in 2..=horizon {
        if t > 2 {
            z = &transition * &z;
        }
        let x = &f.p * &z;
        guard(t, &x)?;
        states.push(x);
        reduced.push(z.clone());
    }
    Ok(RomTrajectory {
        times: (1..=horizon).collect(),
        states,
        reduced_states: Some(reduced),
    })
}

/// Surrogate trajectory by repeated application of the factored operator.
pub fn simulate_full(op: &DmdOperator, theta: &DVector<f64>, horizon: usize) -> Result<RomTrajectory> {
    check_inputs(theta, op.dim(), horizon)?;
    let mut states = vec![theta.clone()];
    for t in 2..=horizon {
        let x = op.apply(&states[t - 2]);
        guard(t, &x)?;
        states.push(x);
    }
    Ok(RomTrajectory {
        times: (1..=horizon).collect(),
        states,
        reduced_states: None,
    })
}

#[derive(Debug, Clone)]
pub struct ModalReconstruction {
    /// Real parts of `Σ_i ν_{i,t}·φ_i`.
    pub trajectory: RomTrajectory,
    /// `‖Im(Σ_i ν_{i,t}·φ_i)‖₂` per time step.
    pub imaginary_norms: Vec<f64>,
}

/// `x̃_t = Σ_i ν_{i,t}·φ_i`; the imaginary part is reported separately and
/// should vanish for conjugate-closed mode sets.
pub fn reconstruct_from_modes(modes: &DmdModes, amps: &AmplitudeSchedule) -> Result<ModalReconstruction> {
    if amps.values.ncols() != modes.len() {
        return Err(Error::InvalidInput(format!(
            "{} amplitudes per step for {} modes",
            amps.values.ncols(),
            modes.len()
        )));
    }
    let n = modes.modes.nrows();
    let mut states = Vec::with_capacity(amps.horizon());
    let mut imaginary_norms = Vec::with_capacity(amps.horizon());
    for t in 0..amps.horizon() {
        let mut x = DVector::<C64>::zeros(n);
        for i in 0..modes.len() {
            x.axpy(amps.values[(t, i)], &modes.modes.column(i), C64::new(1.0, 0.0));
        }
        let re = x.map(|v| v.re);
        let im = x.map(|v| v.im).norm();
        guard(t + 1, &re)?;
        if im > IMAGINARY_WARN * re.norm() && im > 0.0 {
            warn!(
                "modal reconstruction at t = {} has imaginary part {im:e} (state norm {:e})",
                t + 1,
                re.norm()
            );
        }
        states.push(re);
        imaginary_norms.push(im);
    }
    Ok(ModalReconstruction {
        trajectory: RomTrajectory {
            times: (1..=amps.horizon()).collect(),
            states,
            reduced_states: None,
        },
        imaginary_norms,
    })
}
