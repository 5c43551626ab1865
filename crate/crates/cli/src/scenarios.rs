//! The six scenarios. Each has a compute function returning typed results
//! and a renderer turning them into artifacts.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::Serialize;
use snap_core::analytics::{
    coherent_error_avg, protocol_budget, sample_targets, summarize_limits, AveragedLimit, BudgetConfig,
    BudgetProtocol, ErrorBudget, PD_ENDPOINT_TOLERANCE,
};
use snap_core::dynamics::{propagate_lindblad, propagate_modes, PropagationConfig, Protocol, SystemParams};
use snap_core::errors::coherent_mean_overlap_error;
use snap_core::hilbert::{CMatrix, HilbertLayout, Level, QuantumState};
use snap_core::optimizer::{find_optimization_limit, optimize, LimitResult, LimitSearchConfig, OptimizerReport};
use snap_core::pulse::{make_unoptimized, EnvelopeSpec, PulseSpec, TargetOp};
use snap_core::tomography::{
    interference_first_order, interference_populations, phase_space_grid, populations, solve_phase_errors, wigner,
    wigner_csv, PhaseEstimate, PhaseSolverConfig, PopulationTable, Provenance,
};
use snap_core::{SnapError, C};

use crate::config::ScenarioConfig;
use crate::output::{Artifacts, Csv};
use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scenario {
    DurationScan,
    Optimize,
    ProtocolCompare,
    Interference,
    Wigner,
    LimitSearch,
}

impl Scenario {
    pub const ALL: [Scenario; 6] = [
        Scenario::DurationScan,
        Scenario::Optimize,
        Scenario::ProtocolCompare,
        Scenario::Interference,
        Scenario::Wigner,
        Scenario::LimitSearch,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::DurationScan => "duration-scan",
            Scenario::Optimize => "optimize",
            Scenario::ProtocolCompare => "protocol-compare",
            Scenario::Interference => "interference",
            Scenario::Wigner => "wigner",
            Scenario::LimitSearch => "limit-search",
        }
    }
}

/// Validates `config` and evaluates `scenario` on a pool of
/// `config.workers` threads (all cores when unset).
pub fn run_scenario(scenario: Scenario, config: &ScenarioConfig) -> Result<Artifacts, CliError> {
    config.validate()?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = config.workers {
        if n == 0 {
            return Err(CliError::Config {
                field: "workers".into(),
                reason: "must be at least 1".into(),
            });
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| CliError::Pool(e.to_string()))?;
    pool.install(|| match scenario {
        Scenario::DurationScan => duration_scan(config).map(|r| render_duration_scan(config, &r)),
        Scenario::Optimize => optimize_target(config).map(|r| render_optimize(&r)),
        Scenario::ProtocolCompare => protocol_compare(config).map(|r| render_comparison(&r)),
        Scenario::Interference => interference(config).map(|r| render_interference(&r)),
        Scenario::Wigner => wigner_map(config).map(|r| render_wigner(&r)),
        Scenario::LimitSearch => limit_search(config).map(|r| render_limits(&r)),
    })
}

fn start_pulse(
    target: &TargetOp<f64>,
    t_gate: f64,
    system: &SystemParams<f64>,
    config: &ScenarioConfig,
) -> Result<PulseSpec<f64>, CliError> {
    let p = make_unoptimized(target, t_gate, system)?;
    Ok(if config.optimizer.envelope {
        p.with_envelope(EnvelopeSpec::standard(t_gate))
    } else {
        p
    })
}

fn theta_cell(t: &TargetOp<f64>) -> String {
    let parts: Vec<String> = t.theta().iter().map(|v| v.to_string()).collect();
    parts.join(" ")
}

// ---------------------------------------------------------------- duration scan

#[derive(Clone, Debug, Serialize)]
pub struct ScanPoint {
    pub chi_t_over_pi: f64,
    pub target: usize,
    pub unoptimized_error: f64,
    pub optimized_error: f64,
    pub converged: bool,
    pub iterations: usize,
    /// θ-averaged closed form for the unoptimized pulse.
    pub analytic_average: f64,
}

pub fn duration_scan(config: &ScenarioConfig) -> Result<Vec<ScanPoint>, CliError> {
    let system = config.dimensionless_system();
    let targets = config.targets()?;
    let jobs: Vec<(f64, usize)> = config
        .chi_t_grid
        .iter()
        .flat_map(|&c| (0..targets.len()).map(move |k| (c, k)))
        .collect();
    jobs.par_iter()
        .map(|&(c, k)| {
            let target = &targets[k];
            let chi_t = c * PI;
            let t_gate = system.gate_time(chi_t);
            let pulse = start_pulse(target, t_gate, &system, config)?;
            let states = propagate_modes(&pulse, &system, &config.optimizer.propagation)?;
            let report = optimize(target, t_gate, &system, &config.optimizer)?;
            Ok(ScanPoint {
                chi_t_over_pi: c,
                target: k,
                unoptimized_error: coherent_mean_overlap_error(&states, target)?,
                optimized_error: report.final_error,
                converged: report.converged,
                iterations: report.iterations,
                analytic_average: coherent_error_avg(target.modes(), chi_t, config.error_correction)?,
            })
        })
        .collect()
}

fn render_duration_scan(config: &ScenarioConfig, points: &[ScanPoint]) -> Artifacts {
    let mut csv = Csv::new(&[
        "chiT_over_pi",
        "target",
        "unoptimized_error",
        "optimized_error",
        "converged",
        "iterations",
        "analytic_average",
    ]);
    for p in points {
        csv.row(&[
            &p.chi_t_over_pi,
            &p.target,
            &p.unoptimized_error,
            &p.optimized_error,
            &p.converged,
            &p.iterations,
            &p.analytic_average,
        ]);
    }
    let mut out = Artifacts::default();
    out.add_text("duration_scan.csv", csv.finish());
    let targets = config.targets().unwrap_or_default();
    let mut t = Csv::new(&["target", "theta"]);
    for (k, target) in targets.iter().enumerate() {
        t.row(&[&k, &theta_cell(target)]);
    }
    out.add_text("targets.csv", t.finish());
    out
}

// ---------------------------------------------------------------- optimize

#[derive(Clone, Debug, Serialize)]
pub struct OptimizeRun {
    pub theta: Vec<f64>,
    pub chi_t_over_pi: f64,
    pub report: OptimizerReport<f64>,
}

pub fn optimize_target(config: &ScenarioConfig) -> Result<OptimizeRun, CliError> {
    let system = config.dimensionless_system();
    let target = config.targets()?.swap_remove(0);
    let t_gate = system.gate_time(config.chi_t * PI);
    let report = optimize(&target, t_gate, &system, &config.optimizer)?;
    Ok(OptimizeRun {
        theta: target.theta().to_vec(),
        chi_t_over_pi: config.chi_t,
        report,
    })
}

fn render_optimize(run: &OptimizeRun) -> Artifacts {
    let mut out = Artifacts::default();
    let mut trace = Csv::new(&["iteration", "error"]);
    for (i, e) in run.report.trace.iter().enumerate() {
        trace.row(&[&i, e]);
    }
    out.add_text("trace.csv", trace.finish());
    let mut modes = Csv::new(&["n", "theta", "lambda", "omega", "alpha", "eps_l", "eps_t", "dtheta"]);
    for (n, (drive, err)) in run.report.pulse.modes.iter().zip(run.report.errors.modes()).enumerate() {
        modes.row(&[
            &n,
            &run.theta[n],
            &drive.lambda,
            &drive.omega,
            &drive.alpha,
            &err.eps_l,
            &err.eps_t,
            &err.dtheta,
        ]);
    }
    out.add_text("modes.csv", modes.finish());
    out.add_json("pulse.json", &run.report.pulse);
    out.add_json("optimize.json", run);
    out
}

// ---------------------------------------------------------------- limits

fn limit_config(config: &ScenarioConfig, grid_pi: &[f64]) -> LimitSearchConfig<f64> {
    LimitSearchConfig {
        grid: grid_pi.iter().map(|v| v * PI).collect(),
        resolution: config.limit_resolution * PI,
        optimizer: config.optimizer.clone(),
    }
}

fn limits_for(
    targets: &[TargetOp<f64>],
    system: &SystemParams<f64>,
    search: &LimitSearchConfig<f64>,
) -> Result<Vec<LimitResult<f64>>, CliError> {
    targets
        .par_iter()
        .map(|t| find_optimization_limit(t, system, search).map_err(CliError::from))
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct LimitRun {
    pub theta: Vec<Vec<f64>>,
    pub results: Vec<LimitResult<f64>>,
    /// Absent when no target converged anywhere on the grid.
    pub average: Option<AveragedLimit<f64>>,
}

pub fn limit_search(config: &ScenarioConfig) -> Result<LimitRun, CliError> {
    let system = config.dimensionless_system();
    let targets = config.targets()?;
    let results = limits_for(&targets, &system, &limit_config(config, &config.chi_t_grid))?;
    let average = match summarize_limits(results.iter().map(|r| r.limit).collect()) {
        Ok(a) => Some(a),
        Err(SnapError::NotApplicable(_)) => None,
        Err(e) => return Err(e.into()),
    };
    Ok(LimitRun {
        theta: targets.iter().map(|t| t.theta().to_vec()).collect(),
        results,
        average,
    })
}

#[derive(Serialize)]
struct LimitSummary {
    targets: usize,
    not_found: usize,
    mean_over_pi: Option<f64>,
    max_over_pi: Option<f64>,
}

fn limit_summary(n: usize, average: Option<&AveragedLimit<f64>>) -> LimitSummary {
    LimitSummary {
        targets: n,
        not_found: average.map_or(n, |a| a.not_found),
        mean_over_pi: average.map(|a| a.mean / PI),
        max_over_pi: average.map(|a| a.max / PI),
    }
}

fn render_limits(run: &LimitRun) -> Artifacts {
    let mut limits = Csv::new(&["target", "theta", "limit_over_pi", "monotonic"]);
    let mut scan = Csv::new(&["target", "stage", "chiT_over_pi", "converged"]);
    for (k, (theta, r)) in run.theta.iter().zip(&run.results).enumerate() {
        let theta: Vec<String> = theta.iter().map(|v| v.to_string()).collect();
        let limit = r.limit.map_or_else(String::new, |l| (l / PI).to_string());
        limits.row(&[&k, &theta.join(" "), &limit, &r.monotonic]);
        for (stage, points) in [("scan", &r.scan), ("bisection", &r.bisection)] {
            for (chi_t, ok) in points {
                scan.row(&[&k, &stage, &(chi_t / PI), ok]);
            }
        }
    }
    let mut out = Artifacts::default();
    out.add_text("limits.csv", limits.finish());
    out.add_text("limit_scan.csv", scan.finish());
    out.add_json("summary.json", &limit_summary(run.results.len(), run.average.as_ref()));
    out
}

// ---------------------------------------------------------------- protocol comparison

/// The compared protocols as `(protocol, optimized)`.
pub const PROTOCOLS: [(BudgetProtocol, bool); 5] = [
    (BudgetProtocol::Ge, false),
    (BudgetProtocol::Ge, true),
    (BudgetProtocol::GeEc, true),
    (BudgetProtocol::GfEc, false),
    (BudgetProtocol::GfEc, true),
];

pub fn protocol_label(protocol: BudgetProtocol, optimized: bool) -> String {
    let kind = if optimized { "optimized" } else { "unoptimized" };
    format!("{}_{kind}", protocol.label())
}

#[derive(Clone, Debug, Serialize)]
pub struct ComparisonRow {
    pub label: String,
    pub best: ErrorBudget<f64>,
    pub scan: Vec<ErrorBudget<f64>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Comparison {
    pub modes: usize,
    /// θ-averaged optimization limit per transmon protocol.
    pub limits: BTreeMap<String, AveragedLimit<f64>>,
    pub rows: Vec<ComparisonRow>,
}

impl Comparison {
    /// Row indices ordered from the largest to the smallest optimal error.
    pub fn ranking(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.rows.len()).collect();
        idx.sort_by(|&a, &b| self.rows[b].best.total().total_cmp(&self.rows[a].best.total()));
        idx
    }
}

/// System used for the comparison: no Kerr or χ′, rates from `system`.
pub fn comparison_system(config: &ScenarioConfig) -> SystemParams<f64> {
    let mut c = config.clone();
    c.higher_order = false;
    c.dimensionless_system()
}

pub fn protocol_compare(config: &ScenarioConfig) -> Result<Comparison, CliError> {
    let base = comparison_system(config);
    let modes = config.modes;
    let targets = sample_targets::<f64>(modes, config.theta_samples, config.seed)?;
    let search = limit_config(config, &config.limit_grid);

    let mut limits = BTreeMap::new();
    for protocol in [Protocol::Ge, Protocol::Gf] {
        let system = base.clone().with_protocol(protocol);
        let results = limits_for(&targets, &system, &search)?;
        let avg = summarize_limits(results.iter().map(|r| r.limit).collect())?;
        limits.insert(format!("{protocol:?}").to_lowercase(), avg);
    }

    let mut optimizer = config.optimizer.clone();
    optimizer.endpoint_tolerance.get_or_insert(PD_ENDPOINT_TOLERANCE);
    let budget = |limit: f64| BudgetConfig {
        theta_samples: config.theta_samples,
        seed: config.seed,
        optimizer: optimizer.clone(),
        trajectory: PropagationConfig {
            steps: config.optimizer.propagation.steps,
            ..PropagationConfig::default()
        }
        .without_audit(),
        optimization_limit: Some(limit),
        limit_search: search.clone(),
    };

    // every applicable (row, χT) pair, run on the pool
    let grid = config.grid();
    let mut jobs = Vec::new();
    for (row, &(protocol, optimized)) in PROTOCOLS.iter().enumerate() {
        let limit = limits[&format!("{:?}", protocol.protocol()).to_lowercase()].mean;
        let mut points = grid.clone();
        if optimized {
            points.retain(|&c| c >= limit);
            points.insert(0, limit);
        }
        jobs.extend(points.into_iter().map(|c| (row, c, limit)));
    }
    let budgets: Vec<Option<ErrorBudget<f64>>> = jobs
        .par_iter()
        .map(|&(row, chi_t, limit)| {
            let (protocol, optimized) = PROTOCOLS[row];
            match protocol_budget(protocol, optimized, modes, chi_t, &base, &budget(limit)) {
                Ok(b) => Ok(Some(b)),
                Err(SnapError::NotApplicable(_)) => Ok(None),
                Err(e) => Err(CliError::from(e)),
            }
        })
        .collect::<Result<_, _>>()?;

    let mut rows = Vec::new();
    for (row, &(protocol, optimized)) in PROTOCOLS.iter().enumerate() {
        let scan: Vec<ErrorBudget<f64>> = jobs
            .iter()
            .zip(&budgets)
            .filter(|((r, _, _), _)| *r == row)
            .filter_map(|(_, b)| b.clone())
            .collect();
        let best = scan
            .iter()
            .min_by(|a, b| a.total().total_cmp(&b.total()))
            .cloned()
            .ok_or_else(|| {
                CliError::Core(SnapError::NotApplicable(format!(
                    "{} has no applicable grid point",
                    protocol_label(protocol, optimized)
                )))
            })?;
        rows.push(ComparisonRow {
            label: protocol_label(protocol, optimized),
            best,
            scan,
        });
    }
    Ok(Comparison { modes, limits, rows })
}

fn budget_cells(b: &ErrorBudget<f64>) -> Vec<String> {
    let mut cells = vec![(b.chi_t / PI).to_string(), b.total().to_string()];
    cells.extend(b.contributions().iter().map(|v| v.to_string()));
    cells
}

fn render_comparison(c: &Comparison) -> Artifacts {
    let mut header = vec!["protocol", "rank", "chiT_over_pi", "total"];
    header.extend(ErrorBudget::<f64>::COLUMNS);
    header.extend(["pd_converged", "pd_samples"]);
    let mut table = Csv::new(&header);
    let ranking = c.ranking();
    for (k, row) in c.rows.iter().enumerate() {
        let rank = ranking.iter().position(|&i| i == k).expect("ranked") + 1;
        let mut cells = vec![row.label.clone(), rank.to_string()];
        cells.extend(budget_cells(&row.best));
        cells.extend([row.best.pd_converged.to_string(), row.best.pd_samples.to_string()]);
        let refs: Vec<&dyn std::fmt::Display> = cells.iter().map(|s| s as _).collect();
        table.row(&refs);
    }

    let mut header = vec!["protocol", "chiT_over_pi", "total"];
    header.extend(ErrorBudget::<f64>::COLUMNS);
    let mut scan = Csv::new(&header);
    for row in &c.rows {
        for b in &row.scan {
            let mut cells = vec![row.label.clone()];
            cells.extend(budget_cells(b));
            let refs: Vec<&dyn std::fmt::Display> = cells.iter().map(|s| s as _).collect();
            scan.row(&refs);
        }
    }

    let limits: BTreeMap<&str, LimitSummary> = c
        .limits
        .iter()
        .map(|(k, a)| (k.as_str(), limit_summary(a.per_target.len(), Some(a))))
        .collect();
    let mut out = Artifacts::default();
    out.add_text("protocol_compare.csv", table.finish());
    out.add_text("protocol_scan.csv", scan.finish());
    out.add_json("limits.json", &limits);
    out
}

// ---------------------------------------------------------------- interference

/// Normalized coherent-state amplitudes `|α⟩` on `levels` Fock states.
pub fn coherent_profile(alpha: f64, levels: usize) -> Vec<f64> {
    let mut c = Vec::with_capacity(levels);
    let mut term = (-alpha * alpha / 2.0).exp();
    for n in 0..levels {
        if n > 0 {
            term *= alpha / (n as f64).sqrt();
        }
        c.push(term);
    }
    let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
    c.iter().map(|v| v / norm).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct InterferenceRun {
    pub populations: Vec<f64>,
    pub displaced: Vec<f64>,
    pub first_order: Vec<f64>,
    /// `(ε, Σ_n |exact − first order|)`.
    pub deviation: Vec<(f64, f64)>,
    /// Phase errors relative to mode 0, as the solver reports them.
    pub truth: Vec<f64>,
    pub noiseless: PhaseEstimate<f64>,
    pub noisy: Vec<PhaseEstimate<f64>>,
    /// RMS deviation of the noisy estimates from `truth` over modes 1..L.
    pub scatter: f64,
}

pub fn interference(config: &ScenarioConfig) -> Result<InterferenceRun, CliError> {
    let ic = &config.interference;
    let c = coherent_profile(ic.alpha, ic.fock_levels);
    let l = ic.theta.len();
    let phases: Vec<f64> = (0..ic.fock_levels)
        .map(|n| if n < l { ic.theta[n] + ic.dtheta[n] } else { 0.0 })
        .collect();
    let amps: Vec<C<f64>> = c.iter().zip(&phases).map(|(a, t)| C::from_polar(*a, *t)).collect();
    let layout = HilbertLayout::new(2, ic.fock_levels)?;
    let rho = QuantumState::cavity_superposition(layout, Level::G, &amps)?.to_density_matrix();

    let p = populations(&rho);
    let pe = interference_populations(&rho, ic.epsilon)?;
    let first = interference_first_order(&c, &phases, ic.epsilon)?;
    let deviation = ic
        .epsilon_scan
        .iter()
        .map(|&e| {
            let exact = interference_populations(&rho, e)?;
            let model = interference_first_order(&c, &phases, e)?;
            let d = exact.g()?.iter().zip(model.g()?).map(|(a, b)| (a - b).abs()).sum();
            Ok((e, d))
        })
        .collect::<Result<Vec<_>, SnapError>>()?;

    let solver = PhaseSolverConfig::default();
    let noiseless = solve_phase_errors(&p, &pe, &ic.theta, ic.epsilon, &solver)?;
    let truth: Vec<f64> = ic.dtheta.iter().map(|d| d - ic.dtheta[0]).collect();
    let noise = Normal::new(0.0, ic.noise_sigma).map_err(|e| CliError::Config {
        field: "interference.noise_sigma".into(),
        reason: e.to_string(),
    })?;
    let (pg, peg) = (p.g()?.to_vec(), pe.g()?.to_vec());
    let noisy = (0..ic.noise_samples as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(k));
            let mut jitter = |v: &[f64]| -> Result<PopulationTable<f64>, SnapError> {
                let noisy = v.iter().map(|x| (x + noise.sample(&mut rng)).max(0.0)).collect();
                PopulationTable::ground(noisy, Provenance::Ingested)
            };
            let (a, b) = (jitter(&pg)?, jitter(&peg)?);
            solve_phase_errors(&a, &b, &ic.theta, ic.epsilon, &solver)
        })
        .collect::<Result<Vec<_>, SnapError>>()?;
    let mut sq = 0.0;
    let mut count = 0usize;
    for est in &noisy {
        for n in 1..l {
            sq += (est.dtheta[n] - truth[n]).powi(2);
            count += 1;
        }
    }
    let scatter = if count > 0 { (sq / count as f64).sqrt() } else { 0.0 };
    Ok(InterferenceRun {
        populations: pg,
        displaced: peg,
        first_order: first.g()?.to_vec(),
        deviation,
        truth,
        noiseless,
        noisy,
        scatter,
    })
}

fn render_interference(run: &InterferenceRun) -> Artifacts {
    let mut pop = Csv::new(&["n", "p_g", "p_g_displaced", "first_order"]);
    for n in 0..run.populations.len() {
        pop.row(&[&n, &run.populations[n], &run.displaced[n], &run.first_order[n]]);
    }
    let mut dev = Csv::new(&["epsilon", "deviation"]);
    for (e, d) in &run.deviation {
        dev.row(&[e, d]);
    }
    let mut est = Csv::new(&["sample", "n", "dtheta", "uncertainty"]);
    let labelled = std::iter::once(("noiseless".to_string(), &run.noiseless))
        .chain(run.noisy.iter().enumerate().map(|(k, e)| (k.to_string(), e)));
    for (label, e) in labelled {
        for (n, (d, u)) in e.dtheta.iter().zip(&e.uncertainty).enumerate() {
            est.row(&[&label, &n, d, u]);
        }
    }
    #[derive(Serialize)]
    struct Summary<'a> {
        truth: &'a [f64],
        noiseless: &'a PhaseEstimate<f64>,
        noise_samples: usize,
        scatter: f64,
    }
    let mut out = Artifacts::default();
    out.add_text("populations.csv", pop.finish());
    out.add_text("epsilon_scan.csv", dev.finish());
    out.add_text("phase_estimates.csv", est.finish());
    out.add_json(
        "summary.json",
        &Summary {
            truth: &run.truth,
            noiseless: &run.noiseless,
            noise_samples: run.noisy.len(),
            scatter: run.scatter,
        },
    );
    out
}

// ---------------------------------------------------------------- wigner

#[derive(Clone, Debug, Serialize)]
pub struct WignerRun {
    pub theta: Vec<f64>,
    pub converged: Option<bool>,
    /// Probability of finding the transmon in the driven level.
    pub success_probability: f64,
    /// Overlap of the post-selected cavity state with the ideal output.
    pub target_fidelity: f64,
    #[serde(skip)]
    pub grid: Vec<C<f64>>,
    #[serde(skip)]
    pub simulated: Vec<f64>,
    #[serde(skip)]
    pub ideal: Vec<f64>,
}

pub fn wigner_map(config: &ScenarioConfig) -> Result<WignerRun, CliError> {
    let wc = &config.wigner;
    let system = config.dimensionless_system();
    let target = config.targets()?.swap_remove(0);
    let t_gate = system.gate_time(config.chi_t * PI);
    let (pulse, converged) = if wc.optimized {
        let r = optimize(&target, t_gate, &system, &config.optimizer)?;
        (r.pulse, Some(r.converged))
    } else {
        (start_pulse(&target, t_gate, &system, config)?, None)
    };

    let c = coherent_profile(wc.alpha, wc.fock_levels);
    let amps: Vec<C<f64>> = c.iter().map(|&a| C::new(a, 0.0)).collect();
    let layout = HilbertLayout::new(system.protocol.transmon_levels(), wc.fock_levels)?;
    let rho0 = QuantumState::cavity_superposition(layout, Level::G, &amps)?.to_density_matrix();
    let rho = propagate_lindblad(&pulse, &system, &rho0, &config.optimizer.propagation)?;

    // cavity state conditioned on the driven level
    let upper = system.protocol.upper();
    let block = CMatrix::from_fn(wc.fock_levels, |m, n| rho.element((upper, m), (upper, n)));
    let success = block.trace().re;
    if !(success > 0.0) {
        return Err(SnapError::Degenerate("the driven level is never populated".into()).into());
    }
    let cavity = block.scale(C::new(1.0 / success, 0.0));

    let l = target.modes();
    let norm = c[..l].iter().map(|v| v * v).sum::<f64>().sqrt();
    let ideal_amps: Vec<C<f64>> = (0..wc.fock_levels)
        .map(|n| if n < l { C::from_polar(c[n] / norm, target.theta()[n]) } else { C::new(0.0, 0.0) })
        .collect();
    let ideal = CMatrix::outer(&ideal_amps, &ideal_amps);
    let fidelity = (0..wc.fock_levels)
        .flat_map(|m| (0..wc.fock_levels).map(move |n| (m, n)))
        .map(|(m, n)| ideal_amps[m].conj() * cavity.get(m, n) * ideal_amps[n])
        .sum::<C<f64>>()
        .re;

    let axis: Vec<f64> = (0..wc.points)
        .map(|k| -wc.extent + 2.0 * wc.extent * k as f64 / (wc.points - 1) as f64)
        .collect();
    let grid = phase_space_grid(&axis, &axis);
    Ok(WignerRun {
        theta: target.theta().to_vec(),
        converged,
        success_probability: success,
        target_fidelity: fidelity,
        simulated: wigner(&cavity, &grid)?,
        ideal: wigner(&ideal, &grid)?,
        grid,
    })
}

fn render_wigner(run: &WignerRun) -> Artifacts {
    let mut out = Artifacts::default();
    out.add_text("wigner.csv", wigner_csv(&run.grid, &run.simulated));
    out.add_text("wigner_target.csv", wigner_csv(&run.grid, &run.ideal));
    out.add_json("summary.json", run);
    out
}
