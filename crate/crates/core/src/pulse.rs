//! SNAP drive waveforms: the unoptimized multi-tone pulse, its corrected
//! form, the smoothing envelope and the error-driven parameter update.

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::dynamics::SystemParams;
use crate::error::{Result, SnapError};
use crate::errors::CoherentErrorSet;
use crate::scalar::{cis, wrap_phase, Real, C};

/// Target phases `θ_n` of `SNAP(θ) = Σ e^{iθ_n}|n⟩⟨n|`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct TargetOp<T: Real> {
    theta: Vec<T>,
}

impl<T: Real> TargetOp<T> {
    pub fn new(theta: Vec<T>) -> Result<Self> {
        if theta.is_empty() {
            return Err(SnapError::config("theta", "at least one Fock mode is required"));
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(SnapError::config("theta", "phases must be finite"));
        }
        Ok(Self {
            theta: theta.into_iter().map(wrap_phase).collect(),
        })
    }

    pub fn from_f64(theta: &[f64]) -> Result<Self> {
        Self::new(theta.iter().map(|&t| T::lit(t)).collect())
    }

    pub fn theta(&self) -> &[T] {
        &self.theta
    }

    pub fn modes(&self) -> usize {
        self.theta.len()
    }
}

/// Raised-cosine smoothing of the pulse edges.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct EnvelopeSpec<T: Real> {
    pub beta: T,
    pub enabled: bool,
}

impl<T: Real> EnvelopeSpec<T> {
    /// Ramps of width `0.1 T` at each end, i.e. `β = 2π/(0.2 T)`.
    pub fn standard(t_gate: T) -> Self {
        Self {
            beta: T::two() * T::PI() / (T::lit(0.2) * t_gate),
            enabled: true,
        }
    }

    /// Rectangular pulse. `beta` is kept at the standard value so the spec
    /// stays valid if the envelope is switched on later.
    pub fn rectangular(t_gate: T) -> Self {
        Self {
            enabled: false,
            ..Self::standard(t_gate)
        }
    }

    pub fn validate(&self, t_gate: T) -> Result<()> {
        if self.enabled && !(self.beta * t_gate > T::two() * T::PI()) {
            return Err(SnapError::config(
                "envelope.beta",
                format!("beta*T = {} must exceed 2π", self.beta * t_gate),
            ));
        }
        Ok(())
    }

    /// Envelope value without range checks; callers guarantee `0 ≤ t ≤ T`.
    #[inline]
    pub(crate) fn value_unchecked(&self, t: T, t_gate: T) -> T {
        if !self.enabled {
            return T::one();
        }
        let beta = self.beta;
        let scale = beta * t_gate / (beta * t_gate - T::PI());
        let ramp = T::PI() / beta;
        let shape = if t < ramp {
            T::half() * (T::one() - (beta * t).cos())
        } else if t > t_gate - ramp {
            T::half() * (T::one() - (beta * (t_gate - t)).cos())
        } else {
            T::one()
        };
        scale * shape
    }
}

/// `env(t)`; equals 1 everywhere when the envelope is disabled.
pub fn envelope<T: Real>(spec: &EnvelopeSpec<T>, t: T, t_gate: T) -> Result<T> {
    spec.validate(t_gate)?;
    check_time(t, t_gate)?;
    Ok(spec.value_unchecked(t, t_gate))
}

fn check_time<T: Real>(t: T, t_gate: T) -> Result<()> {
    if !(t >= T::zero() && t <= t_gate) {
        return Err(SnapError::Domain(format!("t = {t} outside [0, {t_gate}]")));
    }
    Ok(())
}

/// Drive parameters of one spectral component.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ModeDrive<T: Real> {
    pub lambda: T,
    pub omega: T,
    pub alpha: T,
    /// Frequency of the unoptimized pulse for this mode. The drive phase is
    /// referenced to the pulse centre through `−(ω − ω_ref) T/2`. Absent in
    /// input means `omega`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_ref: Option<T>,
}

impl<T: Real> ModeDrive<T> {
    pub fn reference_omega(&self) -> T {
        self.omega_ref.unwrap_or(self.omega)
    }

    /// Complex amplitude of this component at `t = 0`.
    #[inline]
    pub(crate) fn phasor_at_zero(&self, t_gate: T) -> C<T> {
        let dw = self.omega - self.reference_omega();
        cis(self.alpha - dw * t_gate * T::half()) * self.lambda
    }
}

/// Multi-tone selective pulse `Ω(t) = env(t) Σ_n λ_n e^{i(ω_n t + α_n − Δω_n T/2)}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct PulseSpec<T: Real> {
    #[serde(rename = "T")]
    pub t_gate: T,
    pub modes: Vec<ModeDrive<T>>,
    pub envelope: EnvelopeSpec<T>,
    pub frame_corrections: bool,
}

impl<T: Real> PulseSpec<T> {
    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn with_envelope(mut self, envelope: EnvelopeSpec<T>) -> Self {
        self.envelope = envelope;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_gate > T::zero()) || !self.t_gate.is_finite() {
            return Err(SnapError::config("T", "gate time must be positive"));
        }
        if self.modes.is_empty() {
            return Err(SnapError::config("modes", "pulse has no spectral components"));
        }
        for (n, m) in self.modes.iter().enumerate() {
            if !(m.lambda > T::zero()) || !m.lambda.is_finite() {
                return Err(SnapError::config(
                    format!("modes[{n}].lambda"),
                    format!("amplitude must be positive, got {}", m.lambda),
                ));
            }
            if !m.omega.is_finite() || !m.alpha.is_finite() {
                return Err(SnapError::config(format!("modes[{n}]"), "non-finite parameter"));
            }
        }
        self.envelope.validate(self.t_gate)
    }

    /// `Ω(t)` for `0 ≤ t ≤ T`.
    pub fn evaluate(&self, t: T) -> Result<C<T>> {
        check_time(t, self.t_gate)?;
        Ok(self.evaluate_unchecked(t))
    }

    pub(crate) fn evaluate_unchecked(&self, t: T) -> C<T> {
        let half_t = self.t_gate * T::half();
        let sum = self.modes.iter().fold(C::zero(), |acc, m| {
            let dw = m.omega - m.reference_omega();
            acc + cis(m.omega * t + m.alpha - dw * half_t) * m.lambda
        });
        sum * self.envelope.value_unchecked(t, self.t_gate)
    }

    /// Samples `Ω` on `t_k = k·dt`, `k = 0..count`, by phasor recurrence.
    ///
    /// Phasors are recomputed exactly every few hundred samples so that the
    /// accumulated rounding stays far below the integrator tolerance.
    pub(crate) fn sample_uniform(&self, dt: T, count: usize) -> Vec<C<T>> {
        const REFRESH: usize = 256;
        let mut out = vec![C::zero(); count];
        for m in &self.modes {
            let start = m.phasor_at_zero(self.t_gate);
            let step = cis(m.omega * dt);
            let mut p = start;
            for (k, slot) in out.iter_mut().enumerate() {
                if k % REFRESH == 0 {
                    p = start * cis(m.omega * dt * T::of(k));
                }
                *slot = *slot + p;
                p = p * step;
            }
        }
        if self.envelope.enabled {
            for (k, slot) in out.iter_mut().enumerate() {
                let t = (dt * T::of(k)).min(self.t_gate);
                *slot = *slot * self.envelope.value_unchecked(t, self.t_gate);
            }
        }
        out
    }
}

/// Unoptimized pulse `λ = π/(2T)`, `ω_n` on the mode resonance and
/// `α_n = θ_n + π/2`, with Kerr/χ′ pre-compensation when the system asks
/// for frame corrections.
pub fn make_unoptimized<T: Real>(
    target: &TargetOp<T>,
    t_gate: T,
    system: &SystemParams<T>,
) -> Result<PulseSpec<T>> {
    if !(t_gate > T::zero()) || !t_gate.is_finite() {
        return Err(SnapError::config("T", "gate time must be positive"));
    }
    let lambda = T::PI() / (T::two() * t_gate);
    let modes = target
        .theta()
        .iter()
        .enumerate()
        .map(|(n, &theta)| {
            let (omega, alpha) = if system.frame_corrections {
                // The upper level accumulates e^{-i E_x T}; pre-rotate against it.
                let (_, ex) = system.kerr_energies(n);
                (system.mode_detuning(n), theta + T::FRAC_PI_2() + ex * t_gate)
            } else {
                (system.drive_chi() * T::of(n), theta + T::FRAC_PI_2())
            };
            ModeDrive {
                lambda,
                omega,
                alpha: wrap_phase(alpha),
                omega_ref: None,
            }
        })
        .collect();
    Ok(PulseSpec {
        t_gate,
        modes,
        envelope: EnvelopeSpec::rectangular(t_gate),
        frame_corrections: system.frame_corrections,
    })
}

/// One correction step: `λ −= η ε_L/(2T)`, `ω += η π ε_T/(2T)`, `α −= η Δθ`.
///
/// The reference frequency is pinned on first update so the centre-phase
/// term follows the accumulated frequency shift.
pub fn apply_corrections<T: Real>(
    pulse: &PulseSpec<T>,
    errors: &CoherentErrorSet<T>,
    eta: T,
) -> Result<PulseSpec<T>> {
    if !(eta > T::zero() && eta <= T::one()) {
        return Err(SnapError::config("eta", format!("must lie in (0, 1], got {eta}")));
    }
    if errors.len() != pulse.len() {
        return Err(SnapError::DimensionMismatch {
            expected: pulse.len(),
            got: errors.len(),
        });
    }
    let two_t = T::two() * pulse.t_gate;
    let mut next = pulse.clone();
    for (n, (m, e)) in next.modes.iter_mut().zip(errors.modes()).enumerate() {
        let lambda = m.lambda - eta * e.eps_l / two_t;
        if !(lambda > T::zero()) {
            return Err(SnapError::Divergence(format!(
                "amplitude of mode {n} would become {lambda}"
            )));
        }
        m.omega_ref = Some(m.reference_omega());
        m.lambda = lambda;
        m.omega = m.omega + eta * T::PI() * e.eps_t / two_t;
        m.alpha = wrap_phase(m.alpha - eta * e.dtheta);
    }
    Ok(next)
}
