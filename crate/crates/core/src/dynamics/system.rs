use serde::{Deserialize, Serialize};

use crate::error::{Result, SnapError};
use crate::hilbert::{HilbertLayout, Level};
use crate::scalar::Real;

/// Which transmon transition the selective pulse drives.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Ge,
    Gf,
}

impl Protocol {
    /// Level reached by the ideal first stage.
    pub fn upper(self) -> Level {
        match self {
            Protocol::Ge => Level::E,
            Protocol::Gf => Level::F,
        }
    }

    pub fn transmon_levels(self) -> usize {
        match self {
            Protocol::Ge => 2,
            Protocol::Gf => 3,
        }
    }

    /// Measurement outcomes that count towards the fidelity with error correction.
    pub fn outcomes(self) -> &'static [Level] {
        match self {
            Protocol::Ge => &[Level::G, Level::E],
            Protocol::Gf => &[Level::G, Level::E, Level::F],
        }
    }
}

/// Lindblad rates, in the same time unit as the Hamiltonian parameters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct NoiseRates<T: Real> {
    pub gamma_eg: T,
    pub gamma_fe: T,
    pub gamma_ee: T,
    pub gamma_ff: T,
    pub gamma_cav: T,
}

impl<T: Real> NoiseRates<T> {
    pub fn zero() -> Self {
        Self {
            gamma_eg: T::zero(),
            gamma_fe: T::zero(),
            gamma_ee: T::zero(),
            gamma_ff: T::zero(),
            gamma_cav: T::zero(),
        }
    }

    /// Rates from coherence times: decay at `1/T1`, pure dephasing
    /// `Γ_φ = 1/T2 − 1/(2 T1)` entering the Lindblad operator `|e⟩⟨e|` as
    /// `Γ_ee = 2 Γ_φ` so that the g–e coherence decays at `Γ_φ`.
    ///
    /// The f level reuses the e-level times since no separate values exist.
    pub fn from_coherence_times(t1: T, t2: T, t1_cavity: T) -> Result<Self> {
        if t1 <= T::zero() || t2 <= T::zero() || t1_cavity <= T::zero() {
            return Err(SnapError::config("coherence_times", "must be positive"));
        }
        let gamma_phi = T::one() / t2 - T::one() / (T::two() * t1);
        if gamma_phi < T::zero() {
            return Err(SnapError::config("t2", "T2 exceeds 2 T1"));
        }
        let decay = T::one() / t1;
        let dephasing = T::two() * gamma_phi;
        Ok(Self {
            gamma_eg: decay,
            gamma_fe: decay,
            gamma_ee: dephasing,
            gamma_ff: dephasing,
            gamma_cav: T::one() / t1_cavity,
        })
    }

    pub fn scaled(&self, factor: T) -> Self {
        Self {
            gamma_eg: self.gamma_eg * factor,
            gamma_fe: self.gamma_fe * factor,
            gamma_ee: self.gamma_ee * factor,
            gamma_ff: self.gamma_ff * factor,
            gamma_cav: self.gamma_cav * factor,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.gamma_eg == T::zero()
            && self.gamma_fe == T::zero()
            && self.gamma_ee == T::zero()
            && self.gamma_ff == T::zero()
            && self.gamma_cav == T::zero()
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("gamma_eg", self.gamma_eg),
            ("gamma_fe", self.gamma_fe),
            ("gamma_ee", self.gamma_ee),
            ("gamma_ff", self.gamma_ff),
            ("gamma_cav", self.gamma_cav),
        ] {
            if !(v >= T::zero()) || !v.is_finite() {
                return Err(SnapError::config(name, format!("rate must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Physical constants of the cavity-transmon system.
///
/// Frequencies are angular. In the dimensionless convention `chi = 1` and
/// times are measured in units of `1/chi`, so `T = chi_t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SystemParams<T: Real> {
    pub chi: T,
    pub chi_f: T,
    pub chi_prime: T,
    pub kerr: T,
    /// Bookkeeping only; the rotating frame removes the bare frequencies.
    pub omega_ge: Option<T>,
    pub omega_gf: Option<T>,
    pub omega_c: Option<T>,
    pub rates: NoiseRates<T>,
    pub protocol: Protocol,
    pub dimensionless: bool,
    /// Whether synthesized pulses pre-compensate Kerr and χ′.
    pub frame_corrections: bool,
}

impl<T: Real> SystemParams<T> {
    /// `chi = chi_f = 1`, no higher-order terms, no noise.
    pub fn dimensionless(protocol: Protocol) -> Self {
        Self {
            chi: T::one(),
            chi_f: T::one(),
            chi_prime: T::zero(),
            kerr: T::zero(),
            omega_ge: None,
            omega_gf: None,
            omega_c: None,
            rates: NoiseRates::zero(),
            protocol,
            dimensionless: true,
            frame_corrections: false,
        }
    }

    /// The measured device parameters in SI units (rad/s, 1/s), χ-matched.
    pub fn table_s2(protocol: Protocol) -> Self {
        let two_pi = T::lit(2.0 * std::f64::consts::PI);
        let chi = two_pi * T::lit(486.1e3);
        Self {
            chi,
            chi_f: chi,
            chi_prime: two_pi * T::lit(0.97e3),
            kerr: two_pi * T::lit(699.0),
            omega_ge: Some(two_pi * T::lit(4.092820e9)),
            omega_gf: None,
            omega_c: Some(two_pi * T::lit(4.484628e9)),
            rates: NoiseRates::from_coherence_times(T::lit(110e-6), T::lit(48e-6), T::lit(1e-3))
                .expect("tabulated coherence times are consistent"),
            protocol,
            dimensionless: false,
            frame_corrections: true,
        }
    }

    /// Rescales every frequency and rate by `1/chi` so that `chi = 1`.
    pub fn to_dimensionless(&self) -> Self {
        if self.dimensionless {
            return self.clone();
        }
        let s = T::one() / self.chi;
        Self {
            chi: T::one(),
            chi_f: self.chi_f * s,
            chi_prime: self.chi_prime * s,
            kerr: self.kerr * s,
            omega_ge: self.omega_ge.map(|w| w * s),
            omega_gf: self.omega_gf.map(|w| w * s),
            omega_c: self.omega_c.map(|w| w * s),
            rates: self.rates.scaled(s),
            protocol: self.protocol,
            dimensionless: true,
            frame_corrections: self.frame_corrections,
        }
    }

    pub fn with_protocol(mut self, protocol: Protocol) -> Self {
        self.protocol = protocol;
        self
    }

    pub fn with_rates(mut self, rates: NoiseRates<T>) -> Self {
        self.rates = rates;
        self
    }

    /// Drops Kerr and χ′, as done for the protocol comparison.
    pub fn without_higher_order(mut self) -> Self {
        self.kerr = T::zero();
        self.chi_prime = T::zero();
        self.frame_corrections = false;
        self
    }

    /// Gate duration for a given dimensionless `chi * T`.
    pub fn gate_time(&self, chi_t: T) -> T {
        chi_t / self.chi
    }

    /// Dispersive shift of the driven level.
    pub fn drive_chi(&self) -> T {
        match self.protocol {
            Protocol::Ge => self.chi,
            Protocol::Gf => self.chi_f,
        }
    }

    /// Detuning `ν_n` of the `|g n⟩ ↔ |x n⟩` transition in the frame of
    /// `H0 + Hχ`. Kerr corrections are only modelled for the ge drive.
    pub fn mode_detuning(&self, n: usize) -> T {
        match self.protocol {
            Protocol::Ge => {
                let nn = T::of(n * n.saturating_sub(1));
                self.chi * T::of(n) - self.chi_prime * nn * T::half()
            }
            Protocol::Gf => self.chi_f * T::of(n),
        }
    }

    /// Static energies of `|g n⟩` and `|x n⟩` from the Kerr and χ′ terms.
    pub fn kerr_energies(&self, n: usize) -> (T, T) {
        match self.protocol {
            Protocol::Ge => {
                let nn = T::of(n * n.saturating_sub(1)) * T::half();
                (-self.kerr * nn, -(self.kerr - self.chi_prime) * nn)
            }
            Protocol::Gf => (T::zero(), T::zero()),
        }
    }

    pub fn layout(&self, modes: usize) -> Result<HilbertLayout> {
        HilbertLayout::for_modes(self.protocol.transmon_levels(), modes)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.chi > T::zero()) {
            return Err(SnapError::config("chi", "must be positive"));
        }
        if !(self.chi_f > T::zero()) {
            return Err(SnapError::config("chi_f", "must be positive"));
        }
        if !self.kerr.is_finite() || !self.chi_prime.is_finite() {
            return Err(SnapError::config("kerr", "higher-order terms must be finite"));
        }
        self.rates.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coherence_time_mapping() {
        let r = NoiseRates::<f64>::from_coherence_times(110e-6, 48e-6, 1e-3).unwrap();
        assert!((r.gamma_eg - 1.0 / 110e-6).abs() < 1e-6);
        let phi = 1.0 / 48e-6 - 1.0 / 220e-6;
        assert!((r.gamma_ee - 2.0 * phi).abs() < 1e-6);
        assert!((r.gamma_cav - 1000.0).abs() < 1e-9);
        assert!(NoiseRates::from_coherence_times(10e-6, 48e-6, 1e-3).is_err());
    }

    #[test]
    fn dimensionless_rescaling() {
        let p = SystemParams::<f64>::table_s2(Protocol::Ge).to_dimensionless();
        assert_eq!(p.chi, 1.0);
        let chi = 2.0 * std::f64::consts::PI * 486.1e3;
        assert!((p.rates.gamma_eg - 1.0 / (110e-6 * chi)).abs() < 1e-15);
        assert!((p.kerr - 699.0 / 486.1e3).abs() < 1e-15);
    }

    #[test]
    fn kerr_detuning_shift() {
        let p = SystemParams::<f64>::table_s2(Protocol::Ge);
        assert!((p.mode_detuning(2) - (2.0 * p.chi - p.chi_prime)).abs() < 1e-6);
        assert_eq!(p.mode_detuning(1), p.chi);
        let (eg, ex) = p.kerr_energies(2);
        assert!((ex - eg - p.chi_prime).abs() < 1e-9);
    }
}
