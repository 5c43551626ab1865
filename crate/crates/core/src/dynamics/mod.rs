//! Time evolution in the frame rotating with `H0 + Hχ`.
//!
//! Coherent work uses the photon-number block structure of the drive: every
//! Fock mode evolves as an independent two-level system `|g n⟩ ↔ |x n⟩`,
//! `x = e` (ge) or `f` (gf). Open-system evolution runs on the full space
//! because cavity decay couples the blocks.

mod coherent;
mod lindblad;
mod system;

pub use coherent::{
    ideal_final_state, propagate_mode, propagate_modes, propagate_state, record_trajectory,
    ModeState, NoJumpTrajectory,
};
pub use lindblad::{process_map, propagate_lindblad, ProcessMap};
pub use system::{NoiseRates, Protocol, SystemParams};

use serde::{Deserialize, Serialize};

use crate::error::{Result, SnapError};
use crate::scalar::Real;

/// Minimum number of integrator steps per gate.
pub const MIN_STEPS: usize = 1000;

/// Fixed-step fourth-order Runge-Kutta settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct PropagationConfig<T: Real> {
    /// Steps per gate.
    pub steps: usize,
    /// Upper bound on the step size; raises the step count for long gates.
    pub max_step: Option<T>,
    /// Number of samples (including both end points) kept in trajectories.
    pub trajectory_samples: usize,
    /// Re-run at half the step size and compare.
    pub audit: bool,
    /// Largest tolerated amplitude change in the audit.
    pub audit_tolerance: T,
}

impl<T: Real> Default for PropagationConfig<T> {
    fn default() -> Self {
        Self {
            steps: 20_000,
            max_step: None,
            trajectory_samples: 2001,
            audit: true,
            audit_tolerance: T::lit(1e-9),
        }
    }
}

impl<T: Real> PropagationConfig<T> {
    pub fn with_steps(steps: usize) -> Self {
        Self {
            steps,
            ..Self::default()
        }
    }

    pub fn without_audit(mut self) -> Self {
        self.audit = false;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps < MIN_STEPS {
            return Err(SnapError::config(
                "steps",
                format!("at least {MIN_STEPS} steps per gate are required, got {}", self.steps),
            ));
        }
        if let Some(h) = self.max_step {
            if !(h > T::zero()) {
                return Err(SnapError::config("max_step", "must be positive"));
            }
        }
        if self.trajectory_samples < 3 {
            return Err(SnapError::config("trajectory_samples", "need at least 3 samples"));
        }
        if !(self.audit_tolerance > T::zero()) {
            return Err(SnapError::config("audit_tolerance", "must be positive"));
        }
        Ok(())
    }

    /// Step count actually used for a gate of duration `t_gate`.
    pub fn steps_for(&self, t_gate: T) -> usize {
        let mut n = self.steps;
        if let Some(h) = self.max_step {
            let needed = (t_gate / h).ceil().to_usize().unwrap_or(usize::MAX);
            n = n.max(needed);
        }
        n
    }

    /// Step count rounded up so that trajectory samples fall on steps.
    pub(crate) fn steps_for_trajectory(&self, t_gate: T) -> usize {
        let intervals = self.trajectory_samples - 1;
        let n = self.steps_for(t_gate);
        n.div_ceil(intervals) * intervals
    }
}
