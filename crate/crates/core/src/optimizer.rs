//! The iterative correction loop: simulate, extract the coherent errors,
//! correct each error with its own pulse parameter, repeat.

use serde::{Deserialize, Serialize};

use crate::dynamics::{propagate_mode, propagate_modes, PropagationConfig, SystemParams};
use crate::error::{Result, SnapError};
use crate::errors::{coherent_mean_overlap_error, extract_errors, CoherentErrorSet};
use crate::pulse::{apply_corrections, make_unoptimized, EnvelopeSpec, PulseSpec, TargetOp};
use crate::scalar::{wrap_phase, Real};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct OptimizerConfig<T: Real> {
    /// Learning rate scaling every correction.
    pub eta: T,
    /// Convergence threshold on the coherent mean overlap error.
    pub threshold: T,
    pub max_iterations: usize,
    /// Iterations without a relative improvement of `min_improvement` in the
    /// best error after which the run is declared failed.
    pub divergence_window: usize,
    pub min_improvement: T,
    /// Additionally require every `|ε_n|` and `|Δθ_n|` below this value.
    /// Used when the trajectory end points must be pinned, since the mean
    /// overlap is blind to a common phase.
    pub endpoint_tolerance: Option<T>,
    /// Smooth the pulse edges.
    pub envelope: bool,
    /// Integrator settings. The step-halving audit, if enabled, is run once
    /// on the converged pulse rather than on every iteration.
    pub propagation: PropagationConfig<T>,
}

impl<T: Real> Default for OptimizerConfig<T> {
    fn default() -> Self {
        Self {
            eta: T::half(),
            threshold: T::lit(1e-5),
            max_iterations: 500,
            divergence_window: 25,
            min_improvement: T::lit(0.01),
            endpoint_tolerance: None,
            envelope: false,
            propagation: PropagationConfig::default(),
        }
    }
}

impl<T: Real> OptimizerConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > T::zero() && self.eta <= T::one()) {
            return Err(SnapError::config("eta", format!("must lie in (0, 1], got {}", self.eta)));
        }
        if !(self.threshold > T::zero()) {
            return Err(SnapError::config("threshold", "must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(SnapError::config("max_iterations", "must be at least 1"));
        }
        if self.divergence_window == 0 {
            return Err(SnapError::config("divergence_window", "must be at least 1"));
        }
        if let Some(t) = self.endpoint_tolerance {
            if !(t > T::zero()) {
                return Err(SnapError::config("endpoint_tolerance", "must be positive"));
            }
        }
        self.propagation.validate()
    }
}

/// Why an optimization stopped without converging.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Failure {
    /// No sufficient improvement over the divergence window.
    Stalled,
    /// A correction would have made an amplitude non-positive.
    Divergence,
    /// The upper level of some mode was never reached.
    Degenerate,
    IterationLimit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct OptimizerReport<T: Real> {
    pub converged: bool,
    pub failure: Option<Failure>,
    /// Number of corrections applied.
    pub iterations: usize,
    /// Coherent mean overlap error of every simulated pulse, starting with
    /// the initial one.
    pub trace: Vec<T>,
    pub final_error: T,
    pub errors: CoherentErrorSet<T>,
    /// Converged pulse, or the best pulse seen on failure.
    pub pulse: PulseSpec<T>,
}

/// Optimizes the pulse for `target` at gate time `t_gate`, starting from the
/// unoptimized pulse.
pub fn optimize<T: Real>(
    target: &TargetOp<T>,
    t_gate: T,
    system: &SystemParams<T>,
    config: &OptimizerConfig<T>,
) -> Result<OptimizerReport<T>> {
    let mut start = make_unoptimized(target, t_gate, system)?;
    if config.envelope {
        start = start.with_envelope(EnvelopeSpec::standard(t_gate));
    }
    refine(start, target, system, config)
}

/// Runs the correction loop from an arbitrary starting pulse.
pub fn refine<T: Real>(
    start: PulseSpec<T>,
    target: &TargetOp<T>,
    system: &SystemParams<T>,
    config: &OptimizerConfig<T>,
) -> Result<OptimizerReport<T>> {
    config.validate()?;
    start.validate()?;
    if start.len() != target.modes() {
        return Err(SnapError::DimensionMismatch {
            expected: target.modes(),
            got: start.len(),
        });
    }
    let inner = config.propagation.clone().without_audit();
    let mut pulse = start;
    let mut trace = Vec::new();
    let mut best: Option<(T, PulseSpec<T>, CoherentErrorSet<T>)> = None;
    let mut since_improvement = 0;

    let finish = |converged: bool,
                  failure: Option<Failure>,
                  trace: Vec<T>,
                  best: Option<(T, PulseSpec<T>, CoherentErrorSet<T>)>,
                  fallback: PulseSpec<T>| {
        let (final_error, pulse, errors) = match best {
            Some(b) => b,
            None => (T::one(), fallback.clone(), CoherentErrorSet::zeros(fallback.len())),
        };
        OptimizerReport {
            converged,
            failure,
            iterations: trace.len().saturating_sub(1),
            trace,
            final_error,
            errors,
            pulse,
        }
    };

    for iteration in 0..=config.max_iterations {
        let states = propagate_modes(&pulse, system, &inner)?;
        let error = coherent_mean_overlap_error(&states, target)?;
        trace.push(error);
        let errors = match extract_errors(&states, target) {
            Ok(e) => e,
            Err(SnapError::Degenerate(_)) => {
                return Ok(finish(false, Some(Failure::Degenerate), trace, best, pulse));
            }
            Err(e) => return Err(e),
        };
        let endpoints_ok = config
            .endpoint_tolerance
            .is_none_or(|tol| errors.max_abs() < tol);
        if error < config.threshold && endpoints_ok {
            if config.propagation.audit {
                propagate_modes(&pulse, system, &config.propagation)?;
            }
            let best = Some((error, pulse.clone(), errors));
            return Ok(finish(true, None, trace, best, pulse));
        }
        let improved = match &best {
            None => true,
            Some((b, _, _)) => error < *b * (T::one() - config.min_improvement),
        };
        if improved {
            since_improvement = 0;
        } else {
            since_improvement += 1;
        }
        if best.as_ref().is_none_or(|(b, _, _)| error < *b) {
            best = Some((error, pulse.clone(), errors.clone()));
        }
        if since_improvement >= config.divergence_window {
            return Ok(finish(false, Some(Failure::Stalled), trace, best, pulse));
        }
        if iteration == config.max_iterations {
            break;
        }
        pulse = match apply_corrections(&pulse, &errors, config.eta) {
            Ok(p) => p,
            Err(SnapError::Divergence(_)) => {
                return Ok(finish(false, Some(Failure::Divergence), trace, best, pulse));
            }
            Err(e) => return Err(e),
        };
    }
    Ok(finish(false, Some(Failure::IterationLimit), trace, best, pulse))
}

/// Finite-difference step sizes for [`first_order_sensitivities`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SensitivityConfig<T: Real> {
    /// Amplitude step relative to `λ_n`.
    pub lambda_step: T,
    /// Frequency step in units of `1/T`.
    pub omega_step: T,
    /// Phase step in radians.
    pub alpha_step: T,
    pub propagation: PropagationConfig<T>,
}

impl<T: Real> Default for SensitivityConfig<T> {
    fn default() -> Self {
        Self {
            lambda_step: T::lit(1e-4),
            omega_step: T::lit(1e-4),
            alpha_step: T::lit(1e-4),
            propagation: PropagationConfig::default().without_audit(),
        }
    }
}

/// Central-difference Jacobian of `(ε_L, ε_T, Δθ)` of mode `mode_n` with
/// respect to `(λ_n, ω_n, α_n)`. Rows are errors, columns parameters.
///
/// The frequency is varied with its reference held fixed, so the centre
/// phase term of the pulse follows the shift.
pub fn first_order_sensitivities<T: Real>(
    pulse: &PulseSpec<T>,
    target: &TargetOp<T>,
    system: &SystemParams<T>,
    mode_n: usize,
    config: &SensitivityConfig<T>,
) -> Result<[[T; 3]; 3]> {
    if mode_n >= pulse.len() || mode_n >= target.modes() {
        return Err(SnapError::OutOfRange(format!("mode {mode_n}")));
    }
    let floor = T::lit(1e-9);
    if config.lambda_step < floor || config.omega_step < floor || config.alpha_step < floor {
        return Err(SnapError::Precision(
            "finite-difference step below 1e-9; the difference would be dominated by roundoff".into(),
        ));
    }
    let mut base = pulse.clone();
    for m in &mut base.modes {
        m.omega_ref = Some(m.reference_omega());
    }
    let single = TargetOp::new(vec![target.theta()[mode_n]])?;
    let eval = |p: &PulseSpec<T>| -> Result<[T; 3]> {
        let s = propagate_mode(p, system, mode_n, &config.propagation)?;
        let e = extract_errors(&[s], &single)?.modes()[0];
        Ok([e.eps_l, e.eps_t, e.dtheta])
    };
    let deltas = [
        base.modes[mode_n].lambda * config.lambda_step,
        config.omega_step / base.t_gate,
        config.alpha_step,
    ];
    let mut jac = [[T::zero(); 3]; 3];
    for (col, &delta) in deltas.iter().enumerate() {
        let shifted = |sign: T| {
            let mut p = base.clone();
            let m = &mut p.modes[mode_n];
            match col {
                0 => m.lambda = m.lambda + sign * delta,
                1 => m.omega = m.omega + sign * delta,
                _ => m.alpha = m.alpha + sign * delta,
            }
            p
        };
        let plus = eval(&shifted(T::one()))?;
        let minus = eval(&shifted(-T::one()))?;
        for row in 0..3 {
            let mut diff = plus[row] - minus[row];
            if row == 2 {
                diff = wrap_phase(diff);
            }
            jac[row][col] = diff / (T::two() * delta);
        }
    }
    Ok(jac)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct LimitSearchConfig<T: Real> {
    /// Ascending `χT` values scanned before bisection.
    pub grid: Vec<T>,
    /// Bisection stops once the bracket is this narrow (in `χT`).
    pub resolution: T,
    pub optimizer: OptimizerConfig<T>,
}

impl<T: Real> LimitSearchConfig<T> {
    /// `χT` from `lo·π` to `hi·π` in steps of `0.25π`, resolved to `0.01π`.
    pub fn standard(lo_pi: f64, hi_pi: f64) -> Self {
        let mut grid = Vec::new();
        let mut k = 0;
        loop {
            let v = lo_pi + 0.25 * k as f64;
            if v > hi_pi + 1e-9 {
                break;
            }
            grid.push(T::lit(v * std::f64::consts::PI));
            k += 1;
        }
        Self {
            grid,
            resolution: T::lit(0.01 * std::f64::consts::PI),
            optimizer: OptimizerConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(SnapError::config("chiT_grid", "the scan grid is empty"));
        }
        if self.grid.windows(2).any(|w| !(w[0] < w[1])) || !(self.grid[0] > T::zero()) {
            return Err(SnapError::config("chiT_grid", "must be positive and strictly increasing"));
        }
        if !(self.resolution > T::zero()) {
            return Err(SnapError::config("resolution", "must be positive"));
        }
        self.optimizer.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct LimitResult<T: Real> {
    /// Smallest converging `χT`, resolved to the configured resolution;
    /// `None` when no grid point converged.
    pub limit: Option<T>,
    /// `(χT, converged)` for every grid point.
    pub scan: Vec<(T, bool)>,
    /// `(χT, converged)` for every bisection probe.
    pub bisection: Vec<(T, bool)>,
    /// Whether every scanned point above the limit converged.
    pub monotonic: bool,
}

/// Locates the optimization limit of `target` by grid scan and bisection.
pub fn find_optimization_limit<T: Real>(
    target: &TargetOp<T>,
    system: &SystemParams<T>,
    config: &LimitSearchConfig<T>,
) -> Result<LimitResult<T>> {
    config.validate()?;
    let converges = |chi_t: T| -> Result<bool> {
        Ok(optimize(target, system.gate_time(chi_t), system, &config.optimizer)?.converged)
    };
    let mut scan = Vec::with_capacity(config.grid.len());
    for &chi_t in &config.grid {
        scan.push((chi_t, converges(chi_t)?));
    }
    let Some(first) = scan.iter().position(|(_, ok)| *ok) else {
        return Ok(LimitResult {
            limit: None,
            scan,
            bisection: Vec::new(),
            monotonic: false,
        });
    };
    let monotonic = scan[first..].iter().all(|(_, ok)| *ok);
    let mut bisection = Vec::new();
    let mut hi = scan[first].0;
    if first > 0 {
        let mut lo = scan[first - 1].0;
        while hi - lo > config.resolution {
            let mid = (lo + hi) * T::half();
            let ok = converges(mid)?;
            bisection.push((mid, ok));
            if ok {
                hi = mid;
            } else {
                lo = mid;
            }
        }
    }
    Ok(LimitResult {
        limit: Some(hi),
        scan,
        bisection,
        monotonic,
    })
}
