use std::f64::consts::PI;

use snap_core::analytics::*;
use snap_core::dynamics::*;
use snap_core::errors::{averaged_fidelity, AmplitudeEnsemble, Averaging, ProcessOutputs};
use snap_core::optimizer::{optimize, OptimizerConfig};
use snap_core::pulse::{make_unoptimized, PulseSpec, TargetOp};
use snap_core::SnapError;

fn cfg(steps: usize) -> PropagationConfig<f64> {
    PropagationConfig::with_steps(steps).without_audit()
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * b.abs()
}

/// Haar-averaged error of `pulse` under the master equation.
fn lindblad_error(pulse: &PulseSpec<f64>, target: &TargetOp<f64>, sys: &SystemParams<f64>, ec: bool, steps: usize) -> f64 {
    let layout = sys.layout(target.modes()).unwrap();
    let map = process_map(pulse, sys, layout, &cfg(steps)).unwrap();
    averaged_fidelity(&ProcessOutputs::Process(&map), target, sys.protocol, ec, Averaging::Exact, AmplitudeEnsemble::Complex)
        .unwrap()
        .error()
}

/// First-order deficit caused by `rates`, with the noiseless error removed.
fn noise_deficit(proto: Protocol, rates: NoiseRates<f64>, theta: &[f64], chi_t: f64, ec: bool) -> f64 {
    let clean = SystemParams::dimensionless(proto);
    let target = TargetOp::from_f64(theta).unwrap();
    let pulse = make_unoptimized(&target, chi_t, &clean).unwrap();
    let noisy = clean.clone().with_rates(rates);
    lindblad_error(&pulse, &target, &noisy, ec, 8000) - lindblad_error(&pulse, &target, &clean, ec, 8000)
}

#[test]
fn pair_sum_matches_double_loop() {
    for l in 1..8usize {
        let mut s = 0.0;
        for n in 0..l {
            for m in 0..l {
                if n != m {
                    s += 1.0 / ((m as f64 - n as f64).powi(2));
                }
            }
        }
        assert!((inverse_square_pair_sum::<f64>(l) - s).abs() < 1e-14);
    }
}

#[test]
fn closed_form_examples() {
    assert_eq!(coherent_error_avg::<f64>(1, 3.0, false).unwrap(), 0.0);
    assert!((coherent_error_avg::<f64>(2, 10.0 * PI, false).unwrap() - 7.5e-3).abs() < 1e-15);
    assert!((transmon_decay_error::<f64>(3, 0.01, Protocol::Ge, false).unwrap() - 4.375e-3).abs() < 1e-15);
    assert!((transmon_decay_error::<f64>(3, 0.01, Protocol::Ge, true).unwrap() - 2.5e-3).abs() < 1e-15);
    assert_eq!(transmon_decay_error(3, 0.01, Protocol::Gf, true).unwrap(), 0.0);
    assert!(matches!(
        transmon_decay_error(3, 0.01, Protocol::Gf, false),
        Err(SnapError::NotApplicable(_))
    ));
    assert!((dephasing_error::<f64>(0.01, false).unwrap() - 1.25e-3).abs() < 1e-15);
    assert_eq!(dephasing_error(0.01, true).unwrap(), 0.0);
    // 3·17/(8·5)·0.01
    assert!((cavity_decay_error::<f64>(4, 0.01, false).unwrap() - 1.275e-2).abs() < 1e-15);
    assert_eq!(cavity_decay_error(1, 0.01, false).unwrap(), 0.0);
    assert_eq!(cavity_decay_error(1, 0.01, true).unwrap(), 0.0);
    assert!(coherent_error_avg(0, 1.0, false).is_err());
    assert!(dephasing_error(-1.0, false).is_err());
}

#[test]
fn coherent_error_falls_as_inverse_square() {
    let a = coherent_error_avg(3, 10.0 * PI, true).unwrap();
    let b = coherent_error_avg(3, 100.0 * PI, true).unwrap();
    let slope = (b / a).ln() / 10f64.ln();
    assert!((slope + 2.0).abs() < 1e-12);
}

#[test]
fn coherent_closed_form_matches_averaged_simulation() {
    // 64 random targets, 16 gate times spanning one 2π period of χT around 10π
    let sys = SystemParams::dimensionless(Protocol::Ge);
    let targets = sample_targets::<f64>(2, 64, 11).unwrap();
    for ec in [false, true] {
        let mut sum = 0.0;
        let mut count = 0.0;
        for target in &targets {
            for k in 0..16 {
                let chi_t = 10.0 * PI + 2.0 * PI * (k as f64 / 16.0 - 0.5);
                let p = make_unoptimized(target, chi_t, &sys).unwrap();
                let st = propagate_modes(&p, &sys, &cfg(4000)).unwrap();
                let r = averaged_fidelity(&ProcessOutputs::Coherent(&st), target, Protocol::Ge, ec, Averaging::Exact, AmplitudeEnsemble::Complex)
                    .unwrap();
                sum += r.error();
                count += 1.0;
            }
        }
        let sim = sum / count;
        let formula = coherent_error_avg(2, 10.0 * PI, ec).unwrap();
        assert!(close(sim, formula, 0.10), "ec={ec}: {sim} vs {formula}");
    }
}

#[test]
fn transmon_decay_matches_master_equation() {
    let chi_t = 40.0 * PI;
    let gamma = 0.01 / chi_t;
    let rates = NoiseRates { gamma_eg: gamma, ..NoiseRates::zero() };
    for ec in [false, true] {
        let sim = noise_deficit(Protocol::Ge, rates, &[0.0, 1.0], chi_t, ec);
        let formula = transmon_decay_error(2, 0.01, Protocol::Ge, ec).unwrap();
        assert!(close(sim, formula, 0.10), "ec={ec}: {sim} vs {formula}");
    }
}

#[test]
fn dephasing_matches_master_equation() {
    let chi_t = 40.0 * PI;
    let rates = NoiseRates { gamma_ee: 0.01 / chi_t, ..NoiseRates::zero() };
    let sim = noise_deficit(Protocol::Ge, rates, &[0.0, 1.0], chi_t, false);
    assert!(close(sim, dephasing_error(0.01, false).unwrap(), 0.10), "{sim}");
    let sim_ec = noise_deficit(Protocol::Ge, rates, &[0.0, 1.0], chi_t, true);
    assert!(sim_ec.abs() <= 1e-4, "{sim_ec}");
}

#[test]
fn cavity_decay_matches_master_equation() {
    let chi_t = 40.0 * PI;
    let rates = NoiseRates { gamma_cav: 0.01 / chi_t, ..NoiseRates::zero() };
    for ec in [false, true] {
        let sim = noise_deficit(Protocol::Ge, rates, &[0.0, 2.0], chi_t, ec);
        let formula = cavity_decay_error(2, 0.01, ec).unwrap();
        assert!(close(sim, formula, 0.10), "ec={ec}: {sim} vs {formula}");
    }
}

#[test]
fn chi_matched_gf_tolerates_decay() {
    let chi_t = 40.0 * PI;
    let rates = NoiseRates { gamma_fe: 0.01 / chi_t, ..NoiseRates::zero() };
    let sim = noise_deficit(Protocol::Gf, rates, &[0.0, 1.0], chi_t, true);
    assert!(sim.abs() <= 1e-4, "{sim}");
}

fn synthetic(mu: Vec<Vec<f64>>, phi: Vec<Vec<f64>>, times: Vec<f64>, protocol: Protocol) -> NoJumpTrajectory<f64> {
    let final_states = vec![ModeState::ground(); mu.len()];
    NoJumpTrajectory { protocol, phi_g: vec![vec![0.0; times.len()]; mu.len()], mu, phi_x: phi, times, final_states }
}

#[test]
fn identical_modes_have_no_pd_violation() {
    // every mode follows the resonant trajectory μ = sin²(πt/2T)
    let t_gate = 5.0;
    let times: Vec<f64> = (0..=500).map(|k| t_gate * k as f64 / 500.0).collect();
    let mu: Vec<f64> = times.iter().map(|t| (PI * t / (2.0 * t_gate)).sin().powi(2)).collect();
    let l = 4;
    let traj = synthetic(vec![mu; l], vec![vec![0.0; times.len()]; l], times, Protocol::Gf);
    let target = TargetOp::from_f64(&[0.0, 1.0, 2.0, 3.0]).unwrap();
    let p = pd_integrals(&traj, &target).unwrap();
    assert!(p.decay.abs() < 1e-12, "{}", p.decay);
    assert!(p.dephasing.abs() < 1e-12, "{}", p.dephasing);
}

#[test]
fn single_mode_has_no_pd_violation() {
    let sys = SystemParams::dimensionless(Protocol::Gf);
    let target = TargetOp::from_f64(&[0.4]).unwrap();
    let p = make_unoptimized(&target, 3.0, &sys).unwrap();
    let mut c = cfg(4000);
    c.trajectory_samples = 401;
    let traj = record_trajectory(&p, &target, &sys, &c).unwrap();
    let r = pd_integrals(&traj, &target).unwrap();
    assert!(r.decay.abs() < 1e-12 && r.dephasing.abs() < 1e-12);
}

#[test]
fn pd_requires_optimized_end_points() {
    let sys = SystemParams::dimensionless(Protocol::Gf);
    let target = TargetOp::from_f64(&[0.0, -PI / 4.0, PI / 2.0]).unwrap();
    let p = make_unoptimized(&target, 2.5 * PI, &sys).unwrap();
    let mut c = cfg(4000);
    c.trajectory_samples = 401;
    let traj = record_trajectory(&p, &target, &sys, &c).unwrap();
    assert!(matches!(pd_integrals(&traj, &target), Err(SnapError::InputContract(_))));
}

#[test]
fn pd_integrals_predict_master_equation_deficit() {
    let sys = SystemParams::dimensionless(Protocol::Gf);
    let target = sample_targets::<f64>(4, 1, 5).unwrap().remove(0);
    let chi_t = 4.0 * PI;
    let opt = OptimizerConfig {
        endpoint_tolerance: Some(1e-5),
        propagation: cfg(4000),
        ..OptimizerConfig::default()
    };
    let r = optimize(&target, chi_t, &sys, &opt).unwrap();
    assert!(r.converged, "{:?}", r.failure);
    let mut c = cfg(4000);
    c.trajectory_samples = 401;
    let traj = record_trajectory(&r.pulse, &target, &sys, &c).unwrap();
    let gamma = 1e-3 / chi_t;
    let base = lindblad_error(&r.pulse, &target, &sys, true, 4000);
    for (rates, pick) in [
        (NoiseRates { gamma_fe: gamma, ..NoiseRates::zero() }, 0),
        (NoiseRates { gamma_ff: gamma, ..NoiseRates::zero() }, 1),
    ] {
        let predicted = pd_violation_errors(&traj, &target, &rates).unwrap();
        let predicted = if pick == 0 { predicted.0 } else { predicted.1 };
        let sim = lindblad_error(&r.pulse, &target, &sys.clone().with_rates(rates), true, 4000) - base;
        assert!(predicted > 0.0);
        assert!(close(sim, predicted, 0.15), "channel {pick}: {sim} vs {predicted}");
    }
}

#[test]
fn budget_without_noise_is_the_coherent_term() {
    let sys = SystemParams::dimensionless(Protocol::Ge);
    let config = BudgetConfig::default();
    for p in BudgetProtocol::ALL {
        let b = protocol_budget(p, false, 3, 6.0 * PI, &sys, &config).unwrap();
        let expected = coherent_error_avg(3, 6.0 * PI, p.error_correction()).unwrap();
        assert!((b.total() - expected).abs() < 1e-15);
        assert_eq!(b.contributions().iter().filter(|&&c| c != 0.0).count(), 1);
        assert_eq!(BudgetProtocol::parse(p.label()).unwrap(), p);
    }
    assert!(BudgetProtocol::parse("fg").is_err());
}

#[test]
fn budget_sums_closed_forms() {
    let sys = SystemParams::<f64>::table_s2(Protocol::Ge).without_higher_order().to_dimensionless();
    let chi_t = 6.5 * PI;
    let b = protocol_budget(BudgetProtocol::Ge, false, 4, chi_t, &sys, &BudgetConfig::default()).unwrap();
    let r = sys.rates;
    let expected = coherent_error_avg(4, chi_t, false).unwrap()
        + transmon_decay_error(4, r.gamma_eg * chi_t, Protocol::Ge, false).unwrap()
        + dephasing_error(r.gamma_ee * chi_t, false).unwrap()
        + cavity_decay_error(4, r.gamma_cav * chi_t, false).unwrap();
    assert!((b.total() - expected).abs() < 1e-15);
    // near the tabulated working point of the vanilla protocol
    assert!(close(b.total(), 0.0951, 0.05), "{}", b.total());
}

#[test]
fn optimized_budget_is_gated_by_the_limit() {
    let sys = SystemParams::dimensionless(Protocol::Ge);
    let config = BudgetConfig { optimization_limit: Some(2.7 * PI), ..BudgetConfig::default() };
    let r = protocol_budget(BudgetProtocol::Ge, true, 4, 2.0 * PI, &sys, &config);
    assert!(matches!(r, Err(SnapError::NotApplicable(_))));
    let b = protocol_budget(BudgetProtocol::Ge, true, 4, 3.0 * PI, &sys, &config).unwrap();
    assert_eq!(b.coherent, 0.0);
    assert_eq!(b.pd_samples, 0);
}

#[test]
fn working_point_and_ranking() {
    let sys = SystemParams::<f64>::table_s2(Protocol::Ge).without_higher_order().to_dimensionless();
    let config = BudgetConfig::default();
    let grid: Vec<f64> = (20..=40).map(|k| k as f64 * 0.25 * PI).collect();
    let wp = optimal_working_point(BudgetProtocol::Ge, false, 4, &grid, &sys, &config).unwrap();
    assert_eq!(wp.scan.len(), grid.len());
    assert!(wp.scan.iter().all(|b| b.total() >= wp.best.total()));
    assert!((wp.best.chi_t / PI - 6.5).abs() <= 0.25 + 1e-9);
    let order = rank_by_error(&wp.scan);
    for w in order.windows(2) {
        assert!(wp.scan[w[0]].total() >= wp.scan[w[1]].total());
    }
    match optimal_working_point(BudgetProtocol::Ge, false, 4, &[], &sys, &config) {
        Err(SnapError::Config { field, .. }) => assert_eq!(field, "chiT_grid"),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn targets_are_reproducible() {
    let a = sample_targets::<f64>(4, 8, 3).unwrap();
    let b = sample_targets::<f64>(4, 8, 3).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, sample_targets::<f64>(4, 8, 4).unwrap());
}

#[test]
fn limits_are_summarized_over_found_targets() {
    let s = summarize_limits(vec![Some(2.0), None, Some(3.0)]).unwrap();
    assert_eq!(s.mean, 2.5);
    assert_eq!(s.max, 3.0);
    assert_eq!(s.not_found, 1);
    assert!(summarize_limits::<f64>(vec![None, None]).is_err());
}
