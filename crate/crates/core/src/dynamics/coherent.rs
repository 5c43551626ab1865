use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use super::{PropagationConfig, Protocol, SystemParams};
use crate::error::{Result, SnapError};
use crate::hilbert::{CMatrix, HilbertLayout, Level, QuantumState};
use crate::pulse::{PulseSpec, TargetOp};
use crate::scalar::{cis, unwrap_towards, Real, C};

/// Final amplitudes of one Fock mode on the driven pair, in the frame of
/// `H0 + Hχ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ModeState<T: Real> {
    pub g: C<T>,
    pub x: C<T>,
}

impl<T: Real> ModeState<T> {
    pub fn ground() -> Self {
        Self {
            g: C::one(),
            x: C::zero(),
        }
    }

    pub fn norm_sqr(&self) -> T {
        self.g.norm_sqr() + self.x.norm_sqr()
    }

    pub fn distance(&self, other: &Self) -> T {
        (self.g - other.g).norm().max((self.x - other.x).norm())
    }
}

/// Time samples of the coherent evolution, parameterized per mode as
/// `√(1−μ) e^{iφ_g}|g n⟩ + √μ e^{i(θ_n+φ_x)}|x n⟩`.
///
/// For the ge protocol `phi_x` is the excited-state phase.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct NoJumpTrajectory<T: Real> {
    pub protocol: Protocol,
    pub times: Vec<T>,
    pub mu: Vec<Vec<T>>,
    pub phi_g: Vec<Vec<T>>,
    pub phi_x: Vec<Vec<T>>,
    pub final_states: Vec<ModeState<T>>,
}

impl<T: Real> NoJumpTrajectory<T> {
    pub fn modes(&self) -> usize {
        self.mu.len()
    }

    pub fn gate_time(&self) -> T {
        *self.times.last().expect("trajectory has samples")
    }
}

/// Pulse sampled on the half-step grid of the integrator.
struct DriveGrid<T: Real> {
    h: T,
    steps: usize,
    samples: Vec<C<T>>,
}

impl<T: Real> DriveGrid<T> {
    fn new(pulse: &PulseSpec<T>, steps: usize) -> Self {
        let h = pulse.t_gate / T::of(steps);
        let samples = pulse.sample_uniform(h * T::half(), 2 * steps + 1);
        Self { h, steps, samples }
    }
}

/// `e^{-iν k dt}` for `k = 0..count`, by recurrence with periodic refresh.
fn detuning_phasors<T: Real>(nu: T, dt: T, count: usize) -> Vec<C<T>> {
    const REFRESH: usize = 256;
    let step = cis(-nu * dt);
    let mut p = C::one();
    let mut out = Vec::with_capacity(count);
    for k in 0..count {
        if k % REFRESH == 0 {
            p = cis(-nu * dt * T::of(k));
        }
        out.push(p);
        p = p * step;
    }
    out
}

#[inline(always)]
fn minus_i<T: Real>(z: C<T>) -> C<T> {
    C::new(z.im, -z.re)
}

/// RK4 on `ġ = −i w* x`, `ẋ = −i w g` with `w(t) = Ω(t) e^{−iν t}`.
/// Calls `observe(step, g, x)` every `stride` steps, including step 0 and
/// the last step when `stride` divides the step count.
fn integrate_mode<T: Real>(
    grid: &DriveGrid<T>,
    nu: T,
    stride: Option<usize>,
    mut observe: impl FnMut(usize, C<T>, C<T>),
) -> ModeState<T> {
    let h = grid.h;
    let half = h * T::half();
    let sixth = h / T::lit(6.0);
    let rot = detuning_phasors(nu, half, grid.samples.len());
    let mut g = C::one();
    let mut x = C::zero();
    if stride.is_some() {
        observe(0, g, x);
    }
    for k in 0..grid.steps {
        let w0 = grid.samples[2 * k] * rot[2 * k];
        let wm = grid.samples[2 * k + 1] * rot[2 * k + 1];
        let w1 = grid.samples[2 * k + 2] * rot[2 * k + 2];

        let k1g = minus_i(w0.conj() * x);
        let k1x = minus_i(w0 * g);
        let g2 = g + k1g * half;
        let x2 = x + k1x * half;
        let k2g = minus_i(wm.conj() * x2);
        let k2x = minus_i(wm * g2);
        let g3 = g + k2g * half;
        let x3 = x + k2x * half;
        let k3g = minus_i(wm.conj() * x3);
        let k3x = minus_i(wm * g3);
        let g4 = g + k3g * h;
        let x4 = x + k3x * h;
        let k4g = minus_i(w1.conj() * x4);
        let k4x = minus_i(w1 * g4);

        let two = T::two();
        g = g + (k1g + k2g * two + k3g * two + k4g) * sixth;
        x = x + (k1x + k2x * two + k3x * two + k4x) * sixth;
        if let Some(s) = stride {
            if (k + 1) % s == 0 {
                observe(k + 1, g, x);
            }
        }
    }
    ModeState { g, x }
}

/// Converts from the per-mode detuned frame back to the frame of `H0 + Hχ`.
fn to_lab_frame<T: Real>(system: &SystemParams<T>, n: usize, t: T, g: C<T>, x: C<T>) -> (C<T>, C<T>) {
    let (eg, ex) = system.kerr_energies(n);
    if eg == T::zero() && ex == T::zero() {
        return (g, x);
    }
    (g * cis(-eg * t), x * cis(-ex * t))
}

fn check_inputs<T: Real>(pulse: &PulseSpec<T>, system: &SystemParams<T>, config: &PropagationConfig<T>) -> Result<()> {
    pulse.validate()?;
    system.validate()?;
    config.validate()
}

fn final_states<T: Real>(pulse: &PulseSpec<T>, system: &SystemParams<T>, steps: usize) -> Vec<ModeState<T>> {
    let grid = DriveGrid::new(pulse, steps);
    (0..pulse.len())
        .map(|n| {
            let s = integrate_mode(&grid, system.mode_detuning(n), None, |_, _, _| {});
            let (g, x) = to_lab_frame(system, n, pulse.t_gate, s.g, s.x);
            ModeState { g, x }
        })
        .collect()
}

fn audit<T: Real>(
    pulse: &PulseSpec<T>,
    system: &SystemParams<T>,
    config: &PropagationConfig<T>,
    steps: usize,
    coarse: &[ModeState<T>],
) -> Result<()> {
    let fine = final_states(pulse, system, 2 * steps);
    for (n, (a, b)) in coarse.iter().zip(&fine).enumerate() {
        let d = a.distance(b);
        if !(d <= config.audit_tolerance) {
            return Err(SnapError::Precision(format!(
                "mode {n}: halving the step changed the final amplitudes by {d:e}"
            )));
        }
    }
    Ok(())
}

/// Final state of every addressed mode, starting from `|g n⟩`.
pub fn propagate_modes<T: Real>(
    pulse: &PulseSpec<T>,
    system: &SystemParams<T>,
    config: &PropagationConfig<T>,
) -> Result<Vec<ModeState<T>>> {
    check_inputs(pulse, system, config)?;
    let steps = config.steps_for(pulse.t_gate);
    let states = final_states(pulse, system, steps);
    if config.audit {
        audit(pulse, system, config, steps, &states)?;
    }
    Ok(states)
}

/// Final state of Fock mode `fock_n`, starting from `|g n⟩`.
///
/// Modes beyond the pulse's addressed set are allowed; they are driven only
/// off-resonantly.
pub fn propagate_mode<T: Real>(
    pulse: &PulseSpec<T>,
    system: &SystemParams<T>,
    fock_n: usize,
    config: &PropagationConfig<T>,
) -> Result<ModeState<T>> {
    check_inputs(pulse, system, config)?;
    let run = |steps: usize| {
        let grid = DriveGrid::new(pulse, steps);
        let s = integrate_mode(&grid, system.mode_detuning(fock_n), None, |_, _, _| {});
        let (g, x) = to_lab_frame(system, fock_n, pulse.t_gate, s.g, s.x);
        ModeState { g, x }
    };
    let steps = config.steps_for(pulse.t_gate);
    let state = run(steps);
    if config.audit {
        let d = state.distance(&run(2 * steps));
        if !(d <= config.audit_tolerance) {
            return Err(SnapError::Precision(format!(
                "mode {fock_n}: halving the step changed the final amplitudes by {d:e}"
            )));
        }
    }
    Ok(state)
}

/// Samples `(μ_n, φ_gn, φ_xn)` on a uniform grid of
/// `config.trajectory_samples` points.
///
/// Phases are unwrapped continuously in time. Where an amplitude is below
/// `1e-12` its phase is undefined and the previous value is held (zero at
/// the start).
pub fn record_trajectory<T: Real>(
    pulse: &PulseSpec<T>,
    target: &TargetOp<T>,
    system: &SystemParams<T>,
    config: &PropagationConfig<T>,
) -> Result<NoJumpTrajectory<T>> {
    check_inputs(pulse, system, config)?;
    if target.modes() != pulse.len() {
        return Err(SnapError::DimensionMismatch {
            expected: pulse.len(),
            got: target.modes(),
        });
    }
    let samples = config.trajectory_samples;
    let steps = config.steps_for_trajectory(pulse.t_gate);
    let stride = steps / (samples - 1);
    let grid = DriveGrid::new(pulse, steps);
    let times: Vec<T> = (0..samples)
        .map(|j| pulse.t_gate * T::of(j) / T::of(samples - 1))
        .collect();
    let floor = T::lit(1e-12);

    let mut mu = Vec::with_capacity(pulse.len());
    let mut phi_g = Vec::with_capacity(pulse.len());
    let mut phi_x = Vec::with_capacity(pulse.len());
    let mut finals = Vec::with_capacity(pulse.len());
    for (n, &theta) in target.theta().iter().enumerate() {
        let mut m = Vec::with_capacity(samples);
        let mut pg = Vec::with_capacity(samples);
        let mut px = Vec::with_capacity(samples);
        let (mut last_g, mut last_x) = (T::zero(), T::zero());
        let state = integrate_mode(&grid, system.mode_detuning(n), Some(stride), |k, g, x| {
            let t = times[k / stride];
            let (g, x) = to_lab_frame(system, n, t, g, x);
            let norm = g.norm_sqr() + x.norm_sqr();
            m.push(x.norm_sqr() / norm);
            if g.norm() >= floor {
                last_g = unwrap_towards(last_g, g.arg());
            }
            if x.norm() >= floor {
                last_x = unwrap_towards(last_x, x.arg() - theta);
            }
            pg.push(last_g);
            px.push(last_x);
        });
        let (g, x) = to_lab_frame(system, n, pulse.t_gate, state.g, state.x);
        finals.push(ModeState { g, x });
        mu.push(m);
        phi_g.push(pg);
        phi_x.push(px);
    }
    if config.audit {
        audit(pulse, system, config, steps, &finals)?;
    }
    Ok(NoJumpTrajectory {
        protocol: system.protocol,
        times,
        mu,
        phi_g,
        phi_x,
        final_states: finals,
    })
}

/// Coherent evolution of an arbitrary pure state on the full space.
///
/// Integrates the dense Hamiltonian directly rather than the per-mode
/// reduction; every Fock level of the layout is driven.
pub fn propagate_state<T: Real>(
    pulse: &PulseSpec<T>,
    system: &SystemParams<T>,
    initial: &QuantumState<T>,
    config: &PropagationConfig<T>,
) -> Result<QuantumState<T>> {
    check_inputs(pulse, system, config)?;
    let layout = initial.layout();
    if layout.transmon_levels() < system.protocol.transmon_levels() {
        return Err(SnapError::config(
            "transmon_levels",
            "layout lacks the driven transmon level",
        ));
    }
    let steps = config.steps_for(pulse.t_gate);
    let h = pulse.t_gate / T::of(steps);
    let hamiltonian = |t: T| dense_hamiltonian(pulse, system, layout, t);
    let deriv = |hm: &CMatrix<T>, v: &[C<T>]| -> Vec<C<T>> { hm.apply(v).into_iter().map(minus_i).collect() };
    let mut psi = initial.amplitudes().to_vec();
    for k in 0..steps {
        let t = h * T::of(k);
        let h0 = hamiltonian(t);
        let hm = hamiltonian(t + h * T::half());
        let h1 = hamiltonian((t + h).min(pulse.t_gate));
        let k1 = deriv(&h0, &psi);
        let y2: Vec<_> = psi.iter().zip(&k1).map(|(a, b)| *a + *b * (h * T::half())).collect();
        let k2 = deriv(&hm, &y2);
        let y3: Vec<_> = psi.iter().zip(&k2).map(|(a, b)| *a + *b * (h * T::half())).collect();
        let k3 = deriv(&hm, &y3);
        let y4: Vec<_> = psi.iter().zip(&k3).map(|(a, b)| *a + *b * h).collect();
        let k4 = deriv(&h1, &y4);
        let sixth = h / T::lit(6.0);
        for i in 0..psi.len() {
            psi[i] = psi[i] + (k1[i] + k2[i] * T::two() + k3[i] * T::two() + k4[i]) * sixth;
        }
    }
    QuantumState::new(layout, psi)
}

/// `H(t)` in the frame of `H0 + Hχ`: drive `Ω(t) e^{−iχ_x n t}|x n⟩⟨g n| + h.c.`
/// plus the static Kerr and χ′ energies.
pub(crate) fn dense_hamiltonian<T: Real>(
    pulse: &PulseSpec<T>,
    system: &SystemParams<T>,
    layout: HilbertLayout,
    t: T,
) -> CMatrix<T> {
    let omega = pulse.evaluate_unchecked(t);
    let upper = system.protocol.upper();
    let chi_x = system.drive_chi();
    let mut hm = CMatrix::zeros(layout.dim());
    for n in 0..layout.fock_truncation() {
        let w = omega * cis(-chi_x * T::of(n) * t);
        let ig = layout.index(Level::G, n);
        let ix = layout.index(upper, n);
        hm.set(ix, ig, w);
        hm.set(ig, ix, w.conj());
        let (eg, ex) = system.kerr_energies(n);
        hm.set(ig, ig, C::new(eg, T::zero()));
        hm.set(ix, ix, C::new(ex, T::zero()));
    }
    hm
}

/// Target state for a measurement outcome: `Σ c_n |g n⟩` for `g`, and
/// `Σ c_n e^{iθ_n} |o n⟩` for the excited outcomes `o`.
pub fn ideal_final_state<T: Real>(
    target: &TargetOp<T>,
    amplitudes: &[C<T>],
    outcome: Level,
    protocol: Protocol,
) -> Result<QuantumState<T>> {
    if !protocol.outcomes().contains(&outcome) {
        return Err(SnapError::Domain(format!(
            "outcome {} is not defined for the {:?} protocol",
            outcome.label(),
            protocol
        )));
    }
    if amplitudes.len() != target.modes() {
        return Err(SnapError::DimensionMismatch {
            expected: target.modes(),
            got: amplitudes.len(),
        });
    }
    let layout = HilbertLayout::for_modes(protocol.transmon_levels(), target.modes())?;
    let coefficients: Vec<C<T>> = amplitudes
        .iter()
        .zip(target.theta())
        .map(|(c, &theta)| if outcome == Level::G { *c } else { *c * cis(theta) })
        .collect();
    QuantumState::cavity_superposition(layout, outcome, &coefficients)
}
