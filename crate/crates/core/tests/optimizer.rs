use std::f64::consts::PI;

use snap_core::dynamics::{propagate_modes, PropagationConfig, Protocol, SystemParams};
use snap_core::errors::{coherent_mean_overlap_error, extract_errors};
use snap_core::optimizer::*;
use snap_core::pulse::{make_unoptimized, TargetOp};
use snap_core::SnapError;

fn ge() -> SystemParams<f64> {
    SystemParams::dimensionless(Protocol::Ge)
}

fn quick() -> OptimizerConfig<f64> {
    OptimizerConfig {
        propagation: PropagationConfig::with_steps(4000).without_audit(),
        ..OptimizerConfig::default()
    }
}

#[test]
fn single_mode_is_already_exact() {
    let target = TargetOp::from_f64(&[1.1]).unwrap();
    let r = optimize(&target, 2.0, &ge(), &quick()).unwrap();
    assert!(r.converged);
    assert_eq!(r.iterations, 0);
    assert!(r.final_error < 1e-12);
}

#[test]
fn single_mode_amplitude_error_corrected_in_two_steps() {
    let target = TargetOp::from_f64(&[0.4]).unwrap();
    let t_gate = 3.0;
    let mut start = make_unoptimized(&target, t_gate, &ge()).unwrap();
    start.modes[0].lambda *= 1.05;
    start.modes[0].alpha += 0.02;
    let cfg = OptimizerConfig { eta: 1.0, ..quick() };
    let r = refine(start, &target, &ge(), &cfg).unwrap();
    assert!(r.converged, "{:?}", r.trace);
    assert!(r.iterations <= 2, "{} iterations", r.iterations);
    assert!((r.pulse.modes[0].lambda - PI / (2.0 * t_gate)).abs() < 1e-3);
}

#[test]
fn three_mode_target_converges_at_three_and_a_quarter_pi() {
    let target = TargetOp::from_f64(&[0.0, PI, 0.0]).unwrap();
    let r = optimize(&target, 3.25 * PI, &ge(), &quick()).unwrap();
    assert!(r.converged, "{:?}", r.failure);
    assert!(r.final_error < 1e-5);
    assert!(r.trace[0] > 1e-2);
    // the reported pulse reproduces the reported error
    let st = propagate_modes(&r.pulse, &ge(), &PropagationConfig::with_steps(4000).without_audit()).unwrap();
    let e = coherent_mean_overlap_error(&st, &target).unwrap();
    assert!((e - r.final_error).abs() < 1e-12);
    assert_eq!(r.trace.len(), r.iterations + 1);
    assert_eq!(*r.trace.last().unwrap(), r.final_error);
}

#[test]
fn converged_pulse_is_a_fixed_point() {
    let target = TargetOp::from_f64(&[0.0, PI / 2.0, -PI / 3.0]).unwrap();
    let cfg = OptimizerConfig { endpoint_tolerance: Some(1e-4), ..quick() };
    let r = optimize(&target, 4.0 * PI, &ge(), &cfg).unwrap();
    assert!(r.converged);
    assert!(r.errors.max_abs() < 1e-4);
    let again = refine(r.pulse.clone(), &target, &ge(), &cfg).unwrap();
    assert!(again.converged);
    assert_eq!(again.iterations, 0);
    assert_eq!(again.pulse, r.pulse);
}

#[test]
fn initial_trace_entry_is_the_unoptimized_error() {
    let target = TargetOp::from_f64(&[0.0, -PI / 4.0, PI / 2.0]).unwrap();
    let t_gate = 3.0 * PI;
    let r = optimize(&target, t_gate, &ge(), &quick()).unwrap();
    let p = make_unoptimized(&target, t_gate, &ge()).unwrap();
    let st = propagate_modes(&p, &ge(), &PropagationConfig::with_steps(4000).without_audit()).unwrap();
    let e0 = coherent_mean_overlap_error(&st, &target).unwrap();
    assert!((r.trace[0] - e0).abs() < 1e-14);
}

#[test]
fn short_gate_fails_cleanly() {
    let target = TargetOp::from_f64(&[0.0, -PI / 4.0, PI / 2.0]).unwrap();
    let r = optimize(&target, 1.0 * PI, &ge(), &quick()).unwrap();
    assert!(!r.converged);
    assert!(r.failure.is_some());
    // the best pulse seen is returned
    let best = r.trace.iter().cloned().fold(f64::INFINITY, f64::min);
    assert_eq!(r.final_error, best);
}

#[test]
fn invalid_settings_are_rejected() {
    let target = TargetOp::from_f64(&[0.0, 1.0]).unwrap();
    for cfg in [
        OptimizerConfig { eta: 0.0, ..quick() },
        OptimizerConfig { eta: 1.5, ..quick() },
        OptimizerConfig { threshold: -1.0, ..quick() },
        OptimizerConfig { max_iterations: 0, ..quick() },
        OptimizerConfig { endpoint_tolerance: Some(0.0), ..quick() },
    ] {
        assert!(matches!(optimize(&target, 10.0, &ge(), &cfg), Err(SnapError::Config { .. })));
    }
    let start = make_unoptimized(&TargetOp::from_f64(&[0.0]).unwrap(), 10.0, &ge()).unwrap();
    assert!(matches!(
        refine(start, &target, &ge(), &quick()),
        Err(SnapError::DimensionMismatch { .. })
    ));
}

fn long_gate_jacobian(theta: &[f64], n: usize) -> [[f64; 3]; 3] {
    let target = TargetOp::from_f64(theta).unwrap();
    let p = make_unoptimized(&target, 50.0 * PI, &ge()).unwrap();
    let cfg = SensitivityConfig {
        propagation: PropagationConfig::with_steps(20_000).without_audit(),
        ..SensitivityConfig::default()
    };
    first_order_sensitivities(&p, &target, &ge(), n, &cfg).unwrap()
}

#[test]
fn single_mode_jacobian_is_diagonal_at_long_gates() {
    // first-order expectations: ∂ε_L/∂λ = 2T, ∂ε_T/∂ω = −2T/π, ∂Δθ/∂α = 1
    let t_gate = 50.0 * PI;
    let expected = [2.0 * t_gate, -2.0 * t_gate / PI, 1.0];
    let j = long_gate_jacobian(&[0.7], 0);
    for i in 0..3 {
        let rel = (j[i][i] - expected[i]) / expected[i];
        assert!(rel.abs() < 0.01, "J[{i}][{i}] = {} vs {}", j[i][i], expected[i]);
        for k in 0..3 {
            if k != i {
                assert!((j[i][k] / j[k][k]).abs() < 0.05, "J[{i}][{k}] = {}", j[i][k]);
            }
        }
    }
}

#[test]
fn crosstalk_keeps_jacobian_nearly_diagonal() {
    // λ and ω measured in units of 1/T so all columns are dimensionless
    let t_gate = 50.0 * PI;
    let scale = [1.0 / t_gate, 1.0 / t_gate, 1.0];
    for n in 0..3 {
        let j = long_gate_jacobian(&[0.0, 1.0, -2.0], n);
        for i in 0..3 {
            let d = j[i][i] * scale[i];
            for k in (0..3).filter(|&k| k != i) {
                let r = j[i][k] * scale[k] / d;
                assert!(r.abs() < 0.05, "mode {n} J[{i}][{k}] ratio {r}");
            }
        }
    }
}

#[test]
fn sensitivities_check_inputs() {
    let target = TargetOp::from_f64(&[0.0, 1.0]).unwrap();
    let p = make_unoptimized(&target, 20.0, &ge()).unwrap();
    let cfg = SensitivityConfig { alpha_step: 1e-12, ..SensitivityConfig::default() };
    assert!(matches!(
        first_order_sensitivities(&p, &target, &ge(), 0, &cfg),
        Err(SnapError::Precision(_))
    ));
    assert!(matches!(
        first_order_sensitivities(&p, &target, &ge(), 2, &SensitivityConfig::default()),
        Err(SnapError::OutOfRange(_))
    ));
}

#[test]
fn limit_search_brackets_the_transition() {
    let target = TargetOp::from_f64(&[0.0, PI, 0.0]).unwrap();
    let mut cfg = LimitSearchConfig::standard(2.0, 3.5);
    cfg.optimizer = quick();
    cfg.resolution = 0.05 * PI;
    let res = find_optimization_limit(&target, &ge(), &cfg).unwrap();
    let limit = res.limit.expect("limit inside the grid");
    assert!(limit <= 3.25 * PI + 1e-9);
    assert!(res.monotonic);
    assert!(optimize(&target, limit, &ge(), &quick()).unwrap().converged);
    if res.scan[0].1 {
        assert_eq!(limit, res.scan[0].0);
    } else {
        let below = limit - cfg.resolution;
        assert!(!optimize(&target, below, &ge(), &quick()).unwrap().converged);
    }
    let empty = LimitSearchConfig { grid: vec![], ..cfg.clone() };
    match find_optimization_limit(&target, &ge(), &empty) {
        Err(SnapError::Config { field, .. }) => assert_eq!(field, "chiT_grid"),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn optimized_errors_are_small_per_mode() {
    let target = TargetOp::from_f64(&[0.0, PI, 0.0]).unwrap();
    let cfg = OptimizerConfig { endpoint_tolerance: Some(1e-4), ..quick() };
    let r = optimize(&target, 3.5 * PI, &ge(), &cfg).unwrap();
    let st = propagate_modes(&r.pulse, &ge(), &cfg.propagation).unwrap();
    let e = extract_errors(&st, &target).unwrap();
    assert_eq!(e, r.errors);
    assert!(e.max_abs() < 1e-4);
}

