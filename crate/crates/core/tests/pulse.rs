use std::f64::consts::PI;

use snap_core::dynamics::{Protocol, SystemParams};
use snap_core::errors::{CoherentErrorSet, ModeErrors};
use snap_core::pulse::*;
use snap_core::{wrap_phase, SnapError, C};

fn sys() -> SystemParams<f64> {
    SystemParams::dimensionless(Protocol::Ge)
}

#[test]
fn unoptimized_pulse_matches_direct_sum() {
    let target = TargetOp::from_f64(&[0.0, 1.0, -2.0]).unwrap();
    let t_gate = 5.0 * PI;
    let p = make_unoptimized(&target, t_gate, &sys()).unwrap();
    let lambda = PI / (2.0 * t_gate);
    for &t in &[0.0, 0.3, 7.7, t_gate] {
        // Σ λ e^{i(χ n t + θ_n + π/2)}
        let direct: C<f64> = target
            .theta()
            .iter()
            .enumerate()
            .map(|(n, th)| C::from_polar(lambda, n as f64 * t + th + PI / 2.0))
            .sum();
        assert!((p.evaluate(t).unwrap() - direct).norm() < 1e-14);
    }
}

#[test]
fn evaluate_rejects_times_outside_gate() {
    let target = TargetOp::from_f64(&[0.0]).unwrap();
    let p = make_unoptimized(&target, 2.0, &sys()).unwrap();
    assert!(matches!(p.evaluate(-1e-9), Err(SnapError::Domain(_))));
    assert!(matches!(p.evaluate(2.0 + 1e-9), Err(SnapError::Domain(_))));
}

#[test]
fn envelope_has_unit_mean_and_smooth_edges() {
    let t_gate = 3.0;
    let spec = EnvelopeSpec::standard(t_gate);
    let n = 200_000;
    let h = t_gate / n as f64;
    // composite Simpson
    let mut s = envelope(&spec, 0.0, t_gate).unwrap() + envelope(&spec, t_gate, t_gate).unwrap();
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        s += w * envelope(&spec, k as f64 * h, t_gate).unwrap();
    }
    let integral = s * h / 3.0;
    assert!((integral - t_gate).abs() < 1e-9, "∫env = {integral}");
    assert_eq!(envelope(&spec, 0.0, t_gate).unwrap(), 0.0);
    assert!(envelope(&spec, t_gate, t_gate).unwrap().abs() < 1e-15);
    let mid = envelope(&spec, t_gate / 2.0, t_gate).unwrap();
    let beta = spec.beta;
    assert!((mid - beta * t_gate / (beta * t_gate - PI)).abs() < 1e-15);
    let ten = EnvelopeSpec { beta: 10.0 * PI / t_gate, enabled: true };
    assert!((envelope(&ten, t_gate / 2.0, t_gate).unwrap() - 10.0 / 9.0).abs() < 1e-14);
    // symmetric about the centre
    for &t in &[0.01, 0.1, 0.2, 0.29] {
        let a = envelope(&spec, t, t_gate).unwrap();
        let b = envelope(&spec, t_gate - t, t_gate).unwrap();
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn envelope_requires_room_for_ramps() {
    let spec = EnvelopeSpec { beta: 1.0, enabled: true };
    assert!(matches!(spec.validate(2.0 * PI), Err(SnapError::Config { .. })));
    assert!(EnvelopeSpec::<f64>::rectangular(1.0).validate(1.0).is_ok());
}

#[test]
fn frame_corrections_shift_frequency_and_phase() {
    let s = SystemParams::<f64>::table_s2(Protocol::Ge).to_dimensionless();
    let target = TargetOp::from_f64(&[0.0, 0.5, 1.0]).unwrap();
    let t_gate = 4.0 * PI;
    let p = make_unoptimized(&target, t_gate, &s).unwrap();
    for (n, m) in p.modes.iter().enumerate() {
        let nn = (n * n) as f64 - n as f64;
        let omega = n as f64 - s.chi_prime * nn / 2.0;
        let alpha = target.theta()[n] + PI / 2.0 - (s.kerr - s.chi_prime) * nn * t_gate / 2.0;
        assert!((m.omega - omega).abs() < 1e-15);
        assert!(wrap_phase(m.alpha - alpha).abs() < 1e-12);
    }
}

#[test]
fn corrections_follow_update_rule() {
    let target = TargetOp::from_f64(&[0.0, PI]).unwrap();
    let t_gate = 6.0;
    let p = make_unoptimized(&target, t_gate, &sys()).unwrap();
    let errs = CoherentErrorSet::new(vec![
        ModeErrors { eps_l: 0.1, eps_t: -0.2, dtheta: 0.05 },
        ModeErrors { eps_l: -0.05, eps_t: 0.0, dtheta: -0.3 },
    ])
    .unwrap();
    let eta = 0.5;
    let q = apply_corrections(&p, &errs, eta).unwrap();
    for ((a, b), e) in p.modes.iter().zip(&q.modes).zip(errs.modes()) {
        assert!((b.lambda - (a.lambda - eta * e.eps_l / (2.0 * t_gate))).abs() < 1e-15);
        assert!((b.omega - (a.omega + eta * PI * e.eps_t / (2.0 * t_gate))).abs() < 1e-15);
        assert!(wrap_phase(b.alpha - (a.alpha - eta * e.dtheta)).abs() < 1e-15);
        assert_eq!(b.omega_ref, Some(a.omega));
    }
    // the centre-phase term keeps Ω(T/2) unchanged when only ω moves
    let only_t = CoherentErrorSet::new(vec![
        ModeErrors { eps_l: 0.0, eps_t: 0.3, dtheta: 0.0 },
        ModeErrors { eps_l: 0.0, eps_t: -0.3, dtheta: 0.0 },
    ])
    .unwrap();
    let r = apply_corrections(&p, &only_t, 1.0).unwrap();
    let mid = t_gate / 2.0;
    assert!((r.evaluate(mid).unwrap() - p.evaluate(mid).unwrap()).norm() < 1e-14);
}

#[test]
fn corrections_reject_bad_inputs() {
    let target = TargetOp::from_f64(&[0.0]).unwrap();
    let mut p = make_unoptimized(&target, 1.0, &sys()).unwrap();
    p.modes[0].lambda = 0.5;
    let big = CoherentErrorSet::new(vec![ModeErrors { eps_l: 1.9, eps_t: 0.0, dtheta: 0.0 }]).unwrap();
    assert!(matches!(apply_corrections(&p, &big, 1.0), Err(SnapError::Divergence(_))));
    assert!(matches!(apply_corrections(&p, &big, 0.0), Err(SnapError::Config { .. })));
    let two = CoherentErrorSet::zeros(2);
    assert!(matches!(apply_corrections(&p, &two, 0.5), Err(SnapError::DimensionMismatch { .. })));
}

#[test]
fn pulse_json_round_trip() {
    let target = TargetOp::from_f64(&[0.0, 1.0]).unwrap();
    let p = make_unoptimized(&target, 3.0, &sys()).unwrap();
    let q = apply_corrections(&p, &CoherentErrorSet::new(vec![ModeErrors::default(); 2]).unwrap(), 0.5).unwrap();
    let text = serde_json::to_string(&q).unwrap();
    assert!(text.contains("\"T\""));
    let back: PulseSpec<f64> = serde_json::from_str(&text).unwrap();
    assert_eq!(back, q);
    // omega_ref is optional on input
    let text = serde_json::to_string(&p).unwrap();
    assert!(!text.contains("omega_ref"));
}

#[test]
fn target_phases_are_wrapped() {
    let t = TargetOp::<f64>::from_f64(&[3.0 * PI, -PI / 2.0]).unwrap();
    assert!((t.theta()[0] - PI).abs() < 1e-12);
    assert!(TargetOp::<f64>::from_f64(&[]).is_err());
    assert!(TargetOp::<f64>::from_f64(&[f64::NAN]).is_err());
}

#[test]
fn single_precision_pulse() {
    let target = TargetOp::<f32>::from_f64(&[0.0, 1.0]).unwrap();
    let p = make_unoptimized(&target, 4.0f32, &SystemParams::dimensionless(Protocol::Ge)).unwrap();
    let v = p.evaluate(1.0).unwrap();
    let w = make_unoptimized(&TargetOp::<f64>::from_f64(&[0.0, 1.0]).unwrap(), 4.0, &sys())
        .unwrap()
        .evaluate(1.0)
        .unwrap();
    assert!((v.re as f64 - w.re).abs() < 1e-6 && (v.im as f64 - w.im).abs() < 1e-6);
}
