//! Simulation, correction and analysis of SNAP gates on a dispersively
//! coupled cavity-transmon system.
//!
//! Everything numerical is generic over [`Real`] (`f32` or `f64`). The
//! aliases at the bottom of this file fix the scalar to `f64`, which is what
//! the command line tool and the acceptance suite use.

pub mod analytics;
pub mod dynamics;
pub mod error;
pub mod errors;
pub mod hilbert;
pub mod optimizer;
pub mod pulse;
pub mod scalar;
pub mod tomography;

pub use error::{Result, SnapError};
pub use scalar::{cis, wrap_phase, Real, C};

pub type Complex64 = C<f64>;
pub type HilbertLayout = hilbert::HilbertLayout;
pub type Level = hilbert::Level;
pub type CMatrix64 = hilbert::CMatrix<f64>;
pub type QuantumState64 = hilbert::QuantumState<f64>;
pub type DensityMatrix64 = hilbert::DensityMatrix<f64>;
pub type TargetOp64 = pulse::TargetOp<f64>;
pub type PulseSpec64 = pulse::PulseSpec<f64>;
pub type SystemParams64 = dynamics::SystemParams<f64>;
pub type NoiseRates64 = dynamics::NoiseRates<f64>;
pub type PropagationConfig64 = dynamics::PropagationConfig<f64>;
pub type NoJumpTrajectory64 = dynamics::NoJumpTrajectory<f64>;
pub type CoherentErrorSet64 = errors::CoherentErrorSet<f64>;
pub type FidelityReport64 = errors::FidelityReport<f64>;
pub type OptimizerConfig64 = optimizer::OptimizerConfig<f64>;
pub type OptimizerReport64 = optimizer::OptimizerReport<f64>;
pub type ErrorBudget64 = analytics::ErrorBudget<f64>;
pub type PopulationTable64 = tomography::PopulationTable<f64>;
