//! First-order error budgets of the SNAP protocols.
//!
//! Closed forms hold for `χT → ∞` and `ΓT → 0`. They are averaged over
//! initial cavity states, target phases and the oscillations in `χT`.
//! Path-independence (PD) violations of optimized pulses have no closed form
//! and are integrated along simulated no-jump trajectories.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{record_trajectory, NoJumpTrajectory, NoiseRates, PropagationConfig, Protocol, SystemParams};
use crate::error::{Result, SnapError};
use crate::optimizer::{find_optimization_limit, optimize, LimitSearchConfig, OptimizerConfig};
use crate::pulse::TargetOp;
use crate::scalar::{wrap_phase, Real};

/// Largest deviation of `μ_n(T)` from 1 or `φ_xn(T)` from 0 accepted by
/// [`pd_violation_errors`].
pub const PD_ENDPOINT_TOLERANCE: f64 = 1e-4;

/// `Σ_{n≠m} (m−n)^{-2}` over `n, m ∈ 0..L`.
pub fn inverse_square_pair_sum<T: Real>(modes: usize) -> T {
    let mut s = T::zero();
    for d in 1..modes {
        // (L−d) ordered pairs at each distance, in both directions
        s = s + T::two() * T::of(modes - d) / T::of(d * d);
    }
    s
}

fn check_modes(modes: usize) -> Result<()> {
    if modes == 0 {
        return Err(SnapError::Domain("at least one Fock mode is required".into()));
    }
    Ok(())
}

fn check_gamma_t<T: Real>(gamma_t: T) -> Result<()> {
    if !(gamma_t >= T::zero() && gamma_t.is_finite()) {
        return Err(SnapError::Domain(format!("ΓT must be finite and non-negative, got {gamma_t}")));
    }
    Ok(())
}

/// Averaged coherent error of the unoptimized pulse.
///
/// Without error correction `1 − F_e = (3/(4L))(π/χT)² S`; with it
/// `1 − F_g − F_e` removes `(5/(4L(L+1)))(π/χT)² S`.
pub fn coherent_error_avg<T: Real>(modes: usize, chi_t: T, error_correction: bool) -> Result<T> {
    check_modes(modes)?;
    if !(chi_t > T::zero()) {
        return Err(SnapError::Domain(format!("χT must be positive, got {chi_t}")));
    }
    let l = T::of(modes);
    let scale = (T::PI() / chi_t).powi(2) * inverse_square_pair_sum::<T>(modes);
    let mut err = T::lit(3.0) / (T::lit(4.0) * l) * scale;
    if error_correction {
        err = err - T::lit(5.0) / (T::lit(4.0) * l * (l + T::one())) * scale;
    }
    Ok(err)
}

/// Transmon decay (`e → g` for ge, `f → e` for gf).
///
/// The χ-matched gf protocol with error correction is immune at first
/// order; its residual lives in the PD-violation term.
pub fn transmon_decay_error<T: Real>(modes: usize, gamma_t: T, protocol: Protocol, error_correction: bool) -> Result<T> {
    check_modes(modes)?;
    check_gamma_t(gamma_t)?;
    let l = T::of(modes);
    let denom = T::lit(4.0) * (l + T::one());
    Ok(match (protocol, error_correction) {
        (Protocol::Ge, false) => (T::two() * l + T::one()) / denom * gamma_t,
        (Protocol::Ge, true) => (T::two() * l - T::two()) / denom * gamma_t,
        (Protocol::Gf, true) => T::zero(),
        (Protocol::Gf, false) => {
            return Err(SnapError::NotApplicable(
                "the gf protocol is only defined with error detection".into(),
            ))
        }
    })
}

/// Transmon dephasing: `ΓT/8` without error correction, zero with it.
pub fn dephasing_error<T: Real>(gamma_t: T, error_correction: bool) -> Result<T> {
    check_gamma_t(gamma_t)?;
    Ok(if error_correction { T::zero() } else { gamma_t / T::lit(8.0) })
}

/// Cavity decay with Fock modes `0..L` addressed.
pub fn cavity_decay_error<T: Real>(modes: usize, gamma_t: T, error_correction: bool) -> Result<T> {
    check_modes(modes)?;
    check_gamma_t(gamma_t)?;
    let l = T::of(modes);
    let lm1 = l - T::one();
    let denom = T::lit(8.0) * (l + T::one());
    let f_e_loss = lm1 * (T::lit(4.0) * l + T::one()) / denom;
    let f_g = lm1 / denom;
    Ok(if error_correction { (f_e_loss - f_g) * gamma_t } else { f_e_loss * gamma_t })
}

/// PD-violation integrals per unit rate, in the trajectory's time unit.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct PdIntegrals<T: Real> {
    pub decay: T,
    pub dephasing: T,
}

impl<T: Real> PdIntegrals<T> {
    fn scaled(self, decay_rate: T, dephasing_rate: T) -> (T, T) {
        (self.decay * decay_rate, self.dephasing * dephasing_rate)
    }
}

fn trapezoid<T: Real>(times: &[T], f: impl Fn(usize) -> T) -> T {
    let mut s = T::zero();
    for k in 1..times.len() {
        s = s + (times[k] - times[k - 1]) * (f(k) + f(k - 1)) * T::half();
    }
    s
}

/// Integrals of the decay and dephasing PD-violation errors along `traj`.
///
/// Decay: `(1/L)Σ∫μ_n − (1/(L(L+1)))Σ(1+δ)∫√(μ_nμ_n′) cos(φ_xn′−φ_xn)`.
/// Dephasing: `(1/L)Σ∫μ_n − A_g − A_x` with
/// `A_g = (1/(L(L+1)))Σ(1+δ)∫√(μμ′(1−μ)(1−μ′)) cos(φ_xn−φ_xn′+φ_gn−φ_gn′)` and
/// `A_x = (1/(L(L+1)))Σ(1+δ)∫μ_nμ_n′`.
pub fn pd_integrals<T: Real>(traj: &NoJumpTrajectory<T>, target: &TargetOp<T>) -> Result<PdIntegrals<T>> {
    let l = traj.modes();
    if l != target.modes() {
        return Err(SnapError::DimensionMismatch {
            expected: target.modes(),
            got: l,
        });
    }
    check_modes(l)?;
    let samples = traj.times.len();
    if samples < 2 || traj.mu.iter().chain(&traj.phi_g).chain(&traj.phi_x).any(|v| v.len() != samples) {
        return Err(SnapError::InputContract("trajectory arrays disagree in length".into()));
    }
    let tol = T::lit(PD_ENDPOINT_TOLERANCE);
    for n in 0..l {
        let mu_end = traj.mu[n][samples - 1];
        let phi_end = wrap_phase(traj.phi_x[n][samples - 1]);
        if !((T::one() - mu_end).abs() <= tol && phi_end.abs() <= tol) {
            return Err(SnapError::InputContract(format!(
                "mode {n} ends at μ = {mu_end}, φ = {phi_end}; optimized end points are required"
            )));
        }
    }

    let lf = T::of(l);
    let pair_weight = T::one() / (lf * (lf + T::one()));
    let times = &traj.times;
    let mu = &traj.mu;
    let mut populated = T::zero();
    for m in mu {
        populated = populated + trapezoid(times, |k| m[k]);
    }
    populated = populated / lf;

    let (mut coherent_x, mut coherent_g, mut overlap_x) = (T::zero(), T::zero(), T::zero());
    for n in 0..l {
        for np in 0..l {
            let w = if n == np { T::two() } else { T::one() };
            let (pg, px) = (&traj.phi_g, &traj.phi_x);
            coherent_x = coherent_x
                + w * trapezoid(times, |k| (mu[n][k] * mu[np][k]).max(T::zero()).sqrt() * (px[np][k] - px[n][k]).cos());
            coherent_g = coherent_g
                + w * trapezoid(times, |k| {
                    let amp = mu[n][k] * mu[np][k] * (T::one() - mu[n][k]) * (T::one() - mu[np][k]);
                    amp.max(T::zero()).sqrt() * (px[n][k] - px[np][k] + pg[n][k] - pg[np][k]).cos()
                });
            overlap_x = overlap_x + w * trapezoid(times, |k| mu[n][k] * mu[np][k]);
        }
    }
    Ok(PdIntegrals {
        decay: populated - pair_weight * coherent_x,
        dephasing: populated - pair_weight * (coherent_g + overlap_x),
    })
}

/// First-order PD-violation errors `(ΔF_decay, ΔF_dephasing)`.
///
/// Decay uses `Γ_eg` (ge) or `Γ_fe` (gf); dephasing uses `Γ_ee` or `Γ_ff`.
pub fn pd_violation_errors<T: Real>(
    traj: &NoJumpTrajectory<T>,
    target: &TargetOp<T>,
    rates: &NoiseRates<T>,
) -> Result<(T, T)> {
    rates.validate()?;
    let (decay, dephasing) = match traj.protocol {
        Protocol::Ge => (rates.gamma_eg, rates.gamma_ee),
        Protocol::Gf => (rates.gamma_fe, rates.gamma_ff),
    };
    Ok(pd_integrals(traj, target)?.scaled(decay, dephasing))
}

/// Uniform random target phases in `[0, 2π)^L`.
pub fn sample_targets<T: Real>(modes: usize, samples: usize, seed: u64) -> Result<Vec<TargetOp<T>>> {
    check_modes(modes)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..samples)
        .map(|_| {
            let theta: Vec<f64> = (0..modes).map(|_| rng.random::<f64>() * std::f64::consts::TAU).collect();
            TargetOp::from_f64(&theta)
        })
        .collect()
}

/// Protocols compared in the budget.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BudgetProtocol {
    Ge,
    GeEc,
    GfEc,
}

impl BudgetProtocol {
    pub const ALL: [BudgetProtocol; 3] = [BudgetProtocol::Ge, BudgetProtocol::GeEc, BudgetProtocol::GfEc];

    pub fn protocol(self) -> Protocol {
        match self {
            BudgetProtocol::Ge | BudgetProtocol::GeEc => Protocol::Ge,
            BudgetProtocol::GfEc => Protocol::Gf,
        }
    }

    pub fn error_correction(self) -> bool {
        !matches!(self, BudgetProtocol::Ge)
    }

    pub fn label(self) -> &'static str {
        match self {
            BudgetProtocol::Ge => "ge",
            BudgetProtocol::GeEc => "ge_ec",
            BudgetProtocol::GfEc => "gf_ec",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "ge" => Ok(BudgetProtocol::Ge),
            "ge_ec" => Ok(BudgetProtocol::GeEc),
            "gf_ec" => Ok(BudgetProtocol::GfEc),
            other => Err(SnapError::config("protocol", format!("unknown protocol {other:?}"))),
        }
    }
}

/// Per-contribution error of one protocol at one gate time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ErrorBudget<T: Real> {
    pub protocol: BudgetProtocol,
    pub optimized: bool,
    pub error_correction: bool,
    pub chi_t: T,
    pub modes: usize,
    pub rates: NoiseRates<T>,
    pub coherent: T,
    pub transmon_decay: T,
    pub transmon_dephasing: T,
    pub cavity_decay: T,
    pub pd_violation_decay: T,
    pub pd_violation_dephasing: T,
    /// Target samples behind the PD terms, and how many of them converged.
    pub pd_samples: usize,
    pub pd_converged: usize,
}

impl<T: Real> ErrorBudget<T> {
    pub const COLUMNS: [&'static str; 6] = [
        "coherent",
        "transmon_decay",
        "transmon_dephasing",
        "cavity_decay",
        "pd_violation_decay",
        "pd_violation_dephasing",
    ];

    pub fn contributions(&self) -> [T; 6] {
        [
            self.coherent,
            self.transmon_decay,
            self.transmon_dephasing,
            self.cavity_decay,
            self.pd_violation_decay,
            self.pd_violation_dephasing,
        ]
    }

    pub fn total(&self) -> T {
        self.contributions().into_iter().fold(T::zero(), |a, b| a + b)
    }
}

/// Settings for the simulated parts of a budget.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct BudgetConfig<T: Real> {
    /// Random targets averaged for PD terms and the optimization limit.
    pub theta_samples: usize,
    pub seed: u64,
    pub optimizer: OptimizerConfig<T>,
    /// Settings for the no-jump trajectories of converged pulses.
    pub trajectory: PropagationConfig<T>,
    /// `χT` below which optimized protocols are not applicable. Computed with
    /// [`averaged_optimization_limit`] when absent.
    pub optimization_limit: Option<T>,
    /// Scan used when the limit has to be computed.
    pub limit_search: LimitSearchConfig<T>,
}

impl<T: Real> Default for BudgetConfig<T> {
    fn default() -> Self {
        let mut optimizer = OptimizerConfig::default();
        optimizer.endpoint_tolerance = Some(T::lit(PD_ENDPOINT_TOLERANCE));
        let mut limit_search = LimitSearchConfig::standard(1.5, 6.0);
        limit_search.optimizer = OptimizerConfig::default();
        Self {
            theta_samples: 64,
            seed: 2024,
            optimizer,
            trajectory: PropagationConfig::default().without_audit(),
            optimization_limit: None,
            limit_search,
        }
    }
}

impl<T: Real> BudgetConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.theta_samples == 0 {
            return Err(SnapError::config("theta_samples", "must be at least 1"));
        }
        if let Some(l) = self.optimization_limit {
            if !(l > T::zero()) {
                return Err(SnapError::config("optimization_limit", "must be positive"));
            }
        }
        self.optimizer.validate()?;
        self.trajectory.validate()
    }
}

/// Optimization limit averaged over random targets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct AveragedLimit<T: Real> {
    /// Mean of the per-target limits.
    pub mean: T,
    /// Largest per-target limit: above it every sampled target converges.
    pub max: T,
    pub per_target: Vec<Option<T>>,
    /// Targets with no converging grid point; left out of `mean` and `max`.
    pub not_found: usize,
}

pub fn averaged_optimization_limit<T: Real>(
    modes: usize,
    system: &SystemParams<T>,
    samples: usize,
    seed: u64,
    search: &LimitSearchConfig<T>,
) -> Result<AveragedLimit<T>> {
    let targets = sample_targets::<T>(modes, samples, seed)?;
    let per_target = targets
        .iter()
        .map(|t| Ok(find_optimization_limit(t, system, search)?.limit))
        .collect::<Result<Vec<_>>>()?;
    summarize_limits(per_target)
}

/// Folds per-target limits into an [`AveragedLimit`].
pub fn summarize_limits<T: Real>(per_target: Vec<Option<T>>) -> Result<AveragedLimit<T>> {
    let found: Vec<T> = per_target.iter().flatten().copied().collect();
    if found.is_empty() {
        return Err(SnapError::NotApplicable("no sampled target reached convergence".into()));
    }
    let mean = found.iter().fold(T::zero(), |a, &b| a + b) / T::of(found.len());
    let max = found.iter().fold(T::neg_infinity(), |a, &b| a.max(b));
    Ok(AveragedLimit {
        mean,
        max,
        not_found: per_target.len() - found.len(),
        per_target,
    })
}

/// PD integrals averaged over the targets whose optimization converged.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct PdAverage<T: Real> {
    pub integrals: PdIntegrals<T>,
    pub samples: usize,
    pub converged: usize,
}

/// Optimizes every target at `χT` and averages its PD integrals.
pub fn pd_average<T: Real>(
    targets: &[TargetOp<T>],
    chi_t: T,
    system: &SystemParams<T>,
    config: &BudgetConfig<T>,
) -> Result<PdAverage<T>> {
    let t_gate = system.gate_time(chi_t);
    let mut sum = PdIntegrals::<T>::default();
    let mut converged = 0;
    for target in targets {
        let report = optimize(target, t_gate, system, &config.optimizer)?;
        if !report.converged {
            continue;
        }
        let traj = record_trajectory(&report.pulse, target, system, &config.trajectory)?;
        let p = pd_integrals(&traj, target)?;
        sum.decay = sum.decay + p.decay;
        sum.dephasing = sum.dephasing + p.dephasing;
        converged += 1;
    }
    if converged == 0 {
        return Err(SnapError::NotApplicable(format!(
            "no sampled target converged at χT = {chi_t}"
        )));
    }
    let c = T::of(converged);
    Ok(PdAverage {
        integrals: PdIntegrals {
            decay: sum.decay / c,
            dephasing: sum.dephasing / c,
        },
        samples: targets.len(),
        converged,
    })
}

/// Error budget of `protocol` at `χT` with `L` addressed modes.
///
/// Rates are read from `system` in its own time unit. Optimized protocols
/// have zero coherent error and are not applicable below the optimization
/// limit. PD terms are included for optimized protocols with error
/// detection only.
pub fn protocol_budget<T: Real>(
    protocol: BudgetProtocol,
    optimized: bool,
    modes: usize,
    chi_t: T,
    system: &SystemParams<T>,
    config: &BudgetConfig<T>,
) -> Result<ErrorBudget<T>> {
    config.validate()?;
    check_modes(modes)?;
    let system = system.clone().with_protocol(protocol.protocol());
    system.validate()?;
    let ec = protocol.error_correction();
    let t_gate = system.gate_time(chi_t);
    let r = system.rates;

    let mut budget = ErrorBudget {
        protocol,
        optimized,
        error_correction: ec,
        chi_t,
        modes,
        rates: r,
        coherent: T::zero(),
        transmon_decay: T::zero(),
        transmon_dephasing: T::zero(),
        cavity_decay: cavity_decay_error(modes, r.gamma_cav * t_gate, ec)?,
        pd_violation_decay: T::zero(),
        pd_violation_dephasing: T::zero(),
        pd_samples: 0,
        pd_converged: 0,
    };
    match protocol.protocol() {
        Protocol::Ge => {
            budget.transmon_decay = transmon_decay_error(modes, r.gamma_eg * t_gate, Protocol::Ge, ec)?;
            budget.transmon_dephasing = dephasing_error(r.gamma_ee * t_gate, ec)?;
        }
        Protocol::Gf => {
            budget.transmon_decay = transmon_decay_error(modes, r.gamma_fe * t_gate, Protocol::Gf, ec)?;
            budget.transmon_dephasing = dephasing_error(r.gamma_ff * t_gate, ec)?;
        }
    }

    if !optimized {
        budget.coherent = coherent_error_avg(modes, chi_t, ec)?;
        return Ok(budget);
    }

    let limit = match config.optimization_limit {
        Some(l) => l,
        None => {
            averaged_optimization_limit(modes, &system, config.theta_samples, config.seed, &config.limit_search)?.mean
        }
    };
    if chi_t < limit {
        return Err(SnapError::NotApplicable(format!(
            "χT = {chi_t} lies below the optimization limit {limit}"
        )));
    }
    if ec {
        let targets = sample_targets::<T>(modes, config.theta_samples, config.seed)?;
        let pd = pd_average(&targets, chi_t, &system, config)?;
        let (decay_rate, dephasing_rate) = match system.protocol {
            // the ge protocol's decay is already covered by its closed form
            Protocol::Ge => (T::zero(), r.gamma_ee),
            Protocol::Gf => (r.gamma_fe, r.gamma_ff),
        };
        let (d, p) = pd.integrals.scaled(decay_rate, dephasing_rate);
        budget.pd_violation_decay = d;
        budget.pd_violation_dephasing = p;
        budget.pd_samples = pd.samples;
        budget.pd_converged = pd.converged;
    }
    Ok(budget)
}

/// Best gate time of a protocol on a `χT` grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct WorkingPoint<T: Real> {
    pub best: ErrorBudget<T>,
    /// Every applicable grid point.
    pub scan: Vec<ErrorBudget<T>>,
}

pub fn optimal_working_point<T: Real>(
    protocol: BudgetProtocol,
    optimized: bool,
    modes: usize,
    grid: &[T],
    system: &SystemParams<T>,
    config: &BudgetConfig<T>,
) -> Result<WorkingPoint<T>> {
    if grid.is_empty() {
        return Err(SnapError::config("chiT_grid", "the scan grid is empty"));
    }
    let mut config = config.clone();
    if optimized && config.optimization_limit.is_none() {
        let sys = system.clone().with_protocol(protocol.protocol());
        let limit =
            averaged_optimization_limit(modes, &sys, config.theta_samples, config.seed, &config.limit_search)?;
        config.optimization_limit = Some(limit.mean);
    }
    let mut scan = Vec::new();
    for &chi_t in grid {
        match protocol_budget(protocol, optimized, modes, chi_t, system, &config) {
            Ok(b) => scan.push(b),
            Err(SnapError::NotApplicable(_)) => {}
            Err(e) => return Err(e),
        }
    }
    let best = scan
        .iter()
        .min_by(|a, b| a.total().partial_cmp(&b.total()).expect("finite budgets"))
        .cloned()
        .ok_or_else(|| SnapError::NotApplicable("no grid point is applicable".into()))?;
    Ok(WorkingPoint { best, scan })
}

/// Indices of `points` ordered from the largest to the smallest total error.
pub fn rank_by_error<T: Real>(points: &[ErrorBudget<T>]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..points.len()).collect();
    idx.sort_by(|&a, &b| points[b].total().partial_cmp(&points[a].total()).expect("finite budgets"));
    idx
}
