//! Coherent error geometry of the terminal state and Haar-averaged
//! mean-squared-overlap fidelities.

use num_traits::Zero;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dynamics::{ModeState, ProcessMap, Protocol};
use crate::error::{Result, SnapError};
use crate::hilbert::{CMatrix, HilbertLayout, Level};
use crate::pulse::TargetOp;
use crate::scalar::{cis, wrap_phase, Real, C};

/// Longitudinal, transversal and phase error of one Fock mode.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ModeErrors<T: Real> {
    pub eps_l: T,
    pub eps_t: T,
    pub dtheta: T,
}

impl<T: Real> ModeErrors<T> {
    /// `ε = (ε_L + iε_T) e^{iΔθ}`.
    pub fn epsilon(&self) -> C<T> {
        C::new(self.eps_l, self.eps_t) * cis(self.dtheta)
    }

    /// Terminal state `(−ε/2, √(1−|ε|²/4) e^{i(θ+Δθ)})`.
    pub fn terminal_state(&self, theta: T) -> ModeState<T> {
        let eps = self.epsilon();
        let mag = (T::one() - eps.norm_sqr() / T::lit(4.0)).max(T::zero()).sqrt();
        ModeState {
            g: -eps * T::half(),
            x: cis(theta + self.dtheta) * mag,
        }
    }
}

/// Per-mode coherent errors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct CoherentErrorSet<T: Real> {
    modes: Vec<ModeErrors<T>>,
}

impl<T: Real> CoherentErrorSet<T> {
    pub fn new(modes: Vec<ModeErrors<T>>) -> Result<Self> {
        for (n, m) in modes.iter().enumerate() {
            if !(m.eps_l.is_finite() && m.eps_t.is_finite() && m.dtheta.is_finite()) {
                return Err(SnapError::InputContract(format!("mode {n} has non-finite errors")));
            }
            if m.epsilon().norm() > T::two() + T::lit(1e-9) {
                return Err(SnapError::InputContract(format!("mode {n} has |ε| > 2")));
            }
        }
        Ok(Self { modes })
    }

    pub fn zeros(modes: usize) -> Self {
        Self {
            modes: vec![ModeErrors::default(); modes],
        }
    }

    pub fn modes(&self) -> &[ModeErrors<T>] {
        &self.modes
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    /// Largest `|ε_n|` or `|Δθ_n|` over all modes.
    pub fn max_abs(&self) -> T {
        self.modes.iter().fold(T::zero(), |acc, m| {
            acc.max(m.epsilon().norm()).max(m.dtheta.abs())
        })
    }
}

/// Inverts the terminal-state decomposition: `ε = −2 g`,
/// `Δθ = arg x − θ`, `ε_L + iε_T = ε e^{−iΔθ}`.
pub fn extract_errors<T: Real>(states: &[ModeState<T>], target: &TargetOp<T>) -> Result<CoherentErrorSet<T>> {
    if states.len() != target.modes() {
        return Err(SnapError::DimensionMismatch {
            expected: target.modes(),
            got: states.len(),
        });
    }
    let modes = states
        .iter()
        .zip(target.theta())
        .enumerate()
        .map(|(n, (s, &theta))| {
            if s.x.norm() < T::lit(1e-9) {
                return Err(SnapError::Degenerate(format!(
                    "mode {n} has no upper-level amplitude; its phase is undefined"
                )));
            }
            let eps = -s.g * T::two();
            let dtheta = wrap_phase(s.x.arg() - theta);
            let rotated = eps * cis(-dtheta);
            Ok(ModeErrors {
                eps_l: rotated.re,
                eps_t: rotated.im,
                dtheta,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CoherentErrorSet { modes })
}

/// Bloch vector of a two-level mode state, oriented so that the ideal
/// terminal state `|x⟩` sits at the south pole `z = −1`.
///
/// `x = ⟨σ_x⟩`, `y = ⟨σ_y⟩` with `σ_x = |x⟩⟨g| + h.c.` and
/// `σ_y = i|x⟩⟨g| − i|g⟩⟨x|`; `z = |g|² − |x|²`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct BlochVector<T: Real> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> BlochVector<T> {
    pub fn new(x: T, y: T, z: T) -> Self {
        Self { x, y, z }
    }

    pub fn from_state(s: &ModeState<T>) -> Self {
        let coherence = s.g.conj() * s.x * T::two();
        Self {
            x: coherence.re,
            y: coherence.im,
            z: s.g.norm_sqr() - s.x.norm_sqr(),
        }
    }
}

/// Lambert azimuthal equal-area projection about the south pole, with axes
/// rotated to the meridian at `target_angle`:
/// `(X, Y) = √(2/(1−z)) (⟨σ_α⟩, ⟨σ_{α+π/2}⟩)`.
///
/// For a terminal state with target phase `θ` and `target_angle = θ + π/2`
/// this returns `(ε_T, ε_L)`.
pub fn lambert_projection<T: Real>(bloch: &BlochVector<T>, target_angle: T) -> Result<(T, T)> {
    if !(bloch.z < T::one()) {
        return Err(SnapError::Domain("the projection pole z = 1 has no image".into()));
    }
    let scale = (T::two() / (T::one() - bloch.z)).sqrt();
    let (s, c) = target_angle.sin_cos();
    let along = bloch.x * c + bloch.y * s;
    let across = -bloch.x * s + bloch.y * c;
    Ok((scale * along, scale * across))
}

/// Haar averaging method.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Averaging {
    /// Second/fourth-moment identities, no sampling.
    Exact,
    MonteCarlo { samples: usize, seed: u64 },
}

/// Distribution of the initial amplitude vector `c`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmplitudeEnsemble {
    /// Uniform on the complex unit sphere.
    #[default]
    Complex,
    /// Uniform on the real unit sphere.
    Real,
}

/// Evolved data the fidelity is computed from.
#[derive(Clone, Debug)]
pub enum ProcessOutputs<'a, T: Real> {
    /// Noiseless per-mode final states.
    Coherent(&'a [ModeState<T>]),
    /// Images of the matrix units under a noisy gate.
    Process(&'a ProcessMap<T>),
}

impl<T: Real> ProcessOutputs<'_, T> {
    fn modes(&self) -> usize {
        match self {
            ProcessOutputs::Coherent(s) => s.len(),
            ProcessOutputs::Process(m) => m.modes(),
        }
    }

    /// `M[n][n'][a][b] = ⟨o n|E_ab|o n'⟩` flattened, for outcome level `o`.
    fn overlap_tensor(&self, outcome: Level, protocol: Protocol) -> Vec<C<T>> {
        let l = self.modes();
        let mut m = vec![C::zero(); l * l * l * l];
        let idx = |n: usize, np: usize, a: usize, b: usize| ((n * l + np) * l + a) * l + b;
        match self {
            ProcessOutputs::Coherent(states) => {
                let amp = |s: &ModeState<T>| {
                    if outcome == Level::G {
                        s.g
                    } else if outcome == protocol.upper() {
                        s.x
                    } else {
                        C::zero()
                    }
                };
                for n in 0..l {
                    for np in 0..l {
                        m[idx(n, np, n, np)] = amp(&states[n]) * amp(&states[np]).conj();
                    }
                }
            }
            ProcessOutputs::Process(map) => {
                let layout = map.layout();
                for a in 0..l {
                    for b in 0..l {
                        let e = map.unit(a, b);
                        for n in 0..l {
                            for np in 0..l {
                                m[idx(n, np, a, b)] = e.get(layout.index(outcome, n), layout.index(outcome, np));
                            }
                        }
                    }
                }
            }
        }
        m
    }
}

/// Mean squared overlap with its per-outcome components.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct FidelityReport<T: Real> {
    pub fidelity: T,
    pub f_g: T,
    pub f_e: T,
    pub f_f: Option<T>,
    pub protocol: Protocol,
    pub error_correction: bool,
    pub coherent_only: bool,
    pub averaging: Averaging,
    pub ensemble: AmplitudeEnsemble,
    /// Standard error of the mean of `fidelity` for Monte Carlo averaging.
    pub standard_error: Option<T>,
}

impl<T: Real> FidelityReport<T> {
    pub fn error(&self) -> T {
        T::one() - self.fidelity
    }

    pub fn component(&self, level: Level) -> Option<T> {
        match level {
            Level::G => Some(self.f_g),
            Level::E => Some(self.f_e),
            Level::F => self.f_f,
        }
    }
}

/// Target phase carried by outcome `o`: `0` for `g`, `θ_n` otherwise.
fn outcome_phases<T: Real>(target: &TargetOp<T>, outcome: Level) -> Vec<C<T>> {
    target
        .theta()
        .iter()
        .map(|&t| if outcome == Level::G { C::new(T::one(), T::zero()) } else { cis(t) })
        .collect()
}

fn exact_average<T: Real>(m: &[C<T>], phases: &[C<T>], ensemble: AmplitudeEnsemble) -> T {
    let l = phases.len();
    let idx = |n: usize, np: usize, a: usize, b: usize| ((n * l + np) * l + a) * l + b;
    let mut paired: C<T> = C::zero();
    let mut swapped = C::zero();
    let mut diagonal = C::zero();
    for n in 0..l {
        for np in 0..l {
            let w = phases[n].conj() * phases[np];
            paired = paired + w * m[idx(n, np, n, np)];
            swapped = swapped + w * m[idx(n, np, np, n)];
        }
        for a in 0..l {
            diagonal = diagonal + m[idx(n, n, a, a)];
        }
    }
    let lf = T::of(l);
    match ensemble {
        AmplitudeEnsemble::Complex => (paired + diagonal).re / (lf * (lf + T::one())),
        AmplitudeEnsemble::Real => (paired + diagonal + swapped).re / (lf * (lf + T::two())),
    }
}

/// Draws `c` uniformly from the unit sphere of the ensemble.
pub fn sample_amplitudes<T: Real, R: rand::Rng>(rng: &mut R, modes: usize, ensemble: AmplitudeEnsemble) -> Vec<C<T>> {
    loop {
        let c: Vec<C<T>> = (0..modes)
            .map(|_| {
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = match ensemble {
                    AmplitudeEnsemble::Complex => StandardNormal.sample(rng),
                    AmplitudeEnsemble::Real => 0.0,
                };
                C::new(T::lit(re), T::lit(im))
            })
            .collect();
        let norm = c.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt();
        if norm > T::lit(1e-12) {
            return c.into_iter().map(|z| z / norm).collect();
        }
    }
}

/// `⟨ψ_o(c)|ρ(c)|ψ_o(c)⟩` from the overlap tensor.
fn sampled_overlap<T: Real>(m: &[C<T>], phases: &[C<T>], c: &[C<T>]) -> T {
    let l = c.len();
    let mut acc = C::zero();
    let mut i = 0;
    for n in 0..l {
        let left = (c[n] * phases[n]).conj();
        for np in 0..l {
            let lr = left * c[np] * phases[np];
            for a in 0..l {
                let la = lr * c[a];
                for b in 0..l {
                    acc = acc + la * c[b].conj() * m[i];
                    i += 1;
                }
            }
        }
    }
    acc.re
}

/// Haar-averaged mean squared overlap.
///
/// Without error correction the fidelity is the overlap with the target of
/// the successful outcome (`e` for ge, `f` for gf); with error correction
/// it is the sum over all outcomes of the protocol.
pub fn averaged_fidelity<T: Real>(
    outputs: &ProcessOutputs<'_, T>,
    target: &TargetOp<T>,
    protocol: Protocol,
    error_correction: bool,
    averaging: Averaging,
    ensemble: AmplitudeEnsemble,
) -> Result<FidelityReport<T>> {
    let l = target.modes();
    if outputs.modes() != l {
        return Err(SnapError::DimensionMismatch {
            expected: l,
            got: outputs.modes(),
        });
    }
    if let ProcessOutputs::Process(map) = outputs {
        if map.layout().transmon_levels() < protocol.transmon_levels() {
            return Err(SnapError::config("protocol", "process map lacks the protocol's levels"));
        }
    }
    let outcomes = protocol.outcomes();
    let tensors: Vec<(Level, Vec<C<T>>, Vec<C<T>>)> = outcomes
        .iter()
        .map(|&o| (o, outputs.overlap_tensor(o, protocol), outcome_phases(target, o)))
        .collect();
    let counted = |o: Level| error_correction || o == protocol.upper();

    let (components, standard_error) = match averaging {
        Averaging::Exact => {
            let comps: Vec<T> = tensors.iter().map(|(_, m, p)| exact_average(m, p, ensemble)).collect();
            (comps, None)
        }
        Averaging::MonteCarlo { samples, seed } => {
            if samples < 2 {
                return Err(SnapError::config("samples", "Monte Carlo needs at least 2 samples"));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut sums = vec![T::zero(); tensors.len()];
            let (mut total, mut total_sq) = (T::zero(), T::zero());
            for _ in 0..samples {
                let c = sample_amplitudes::<T, _>(&mut rng, l, ensemble);
                let mut f = T::zero();
                for (k, (o, m, p)) in tensors.iter().enumerate() {
                    let v = sampled_overlap(m, p, &c);
                    sums[k] = sums[k] + v;
                    if counted(*o) {
                        f = f + v;
                    }
                }
                total = total + f;
                total_sq = total_sq + f * f;
            }
            let n = T::of(samples);
            let mean = total / n;
            let var = (total_sq / n - mean * mean).max(T::zero()) * n / (n - T::one());
            (sums.into_iter().map(|s| s / n).collect(), Some((var / n).sqrt()))
        }
    };

    let mut report = FidelityReport {
        fidelity: T::zero(),
        f_g: T::zero(),
        f_e: T::zero(),
        f_f: None,
        protocol,
        error_correction,
        coherent_only: matches!(outputs, ProcessOutputs::Coherent(_)),
        averaging,
        ensemble,
        standard_error,
    };
    for ((o, _, _), v) in tensors.iter().zip(components) {
        match o {
            Level::G => report.f_g = v,
            Level::E => report.f_e = v,
            Level::F => report.f_f = Some(v),
        }
        if counted(*o) {
            report.fidelity = report.fidelity + v;
        }
    }
    Ok(report)
}

/// `1 − F` of the successful outcome from noiseless per-mode states:
/// `1 − (|Σ e^{−iθ_n} x_n|² + Σ |x_n|²)/(L(L+1))`.
pub fn coherent_mean_overlap_error<T: Real>(states: &[ModeState<T>], target: &TargetOp<T>) -> Result<T> {
    if states.len() != target.modes() {
        return Err(SnapError::DimensionMismatch {
            expected: target.modes(),
            got: states.len(),
        });
    }
    let l = T::of(states.len());
    let mut coherent: C<T> = C::zero();
    let mut diag = T::zero();
    for (s, &theta) in states.iter().zip(target.theta()) {
        coherent = coherent + s.x * cis(-theta);
        diag = diag + s.x.norm_sqr();
    }
    let f = (coherent.norm_sqr() + diag) / (l * (l + T::one()));
    Ok((T::one() - f).max(T::zero()))
}

/// Process map of the noiseless gate built from per-mode final states,
/// `E_ab = |ψ_a⟩⟨ψ_b|` with `|ψ_a⟩ = g_a|g a⟩ + x_a|x a⟩`.
pub fn coherent_process_map<T: Real>(
    states: &[ModeState<T>],
    layout: HilbertLayout,
    protocol: Protocol,
) -> Result<ProcessMap<T>> {
    let l = states.len();
    layout.check_modes(l)?;
    let upper = protocol.upper();
    let vectors: Vec<Vec<C<T>>> = states
        .iter()
        .enumerate()
        .map(|(a, s)| {
            let mut v = vec![C::zero(); layout.dim()];
            v[layout.index(Level::G, a)] = s.g;
            v[layout.index(upper, a)] = s.x;
            v
        })
        .collect();
    let mut units = Vec::with_capacity(l * l);
    for a in 0..l {
        for b in 0..l {
            units.push(CMatrix::outer(&vectors[a], &vectors[b]));
        }
    }
    ProcessMap::from_units(layout, l, units)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn direct_inversion_example() {
        let target = TargetOp::<f64>::from_f64(&[0.7]).unwrap();
        let s = ModeState {
            g: C::new(-0.1, 0.0),
            x: cis(0.7) * 0.99f64.sqrt(),
        };
        let e = extract_errors(&[s], &target).unwrap().modes()[0];
        assert!((e.eps_l - 0.2).abs() < 1e-14);
        assert!(e.eps_t.abs() < 1e-14);
        assert!(e.dtheta.abs() < 1e-14);
    }

    #[test]
    fn degenerate_state_rejected() {
        let target = TargetOp::<f64>::from_f64(&[0.0]).unwrap();
        let r = extract_errors(&[ModeState::ground()], &target);
        assert!(matches!(r, Err(SnapError::Degenerate(_))));
    }

    #[test]
    fn lambert_examples() {
        let south = BlochVector::new(0.0, 0.0, -1.0);
        assert_eq!(lambert_projection(&south, 0.3).unwrap(), (0.0, 0.0));
        let (x, y) = lambert_projection(&BlochVector::new(1.0, 0.0, 0.0), 0.0).unwrap();
        assert!((x - 2f64.sqrt()).abs() < 1e-15 && y.abs() < 1e-15);
        assert!(lambert_projection(&BlochVector::new(0.0, 0.0, 1.0), 0.0).is_err());
    }

    #[test]
    fn exact_target_has_unit_fidelity() {
        let target = TargetOp::<f64>::from_f64(&[0.0, PI, 0.4]).unwrap();
        let states: Vec<_> = target
            .theta()
            .iter()
            .map(|&t| ModeState { g: C::zero(), x: cis(t) })
            .collect();
        let r = averaged_fidelity(
            &ProcessOutputs::Coherent(&states),
            &target,
            Protocol::Ge,
            false,
            Averaging::Exact,
            AmplitudeEnsemble::Complex,
        )
        .unwrap();
        assert!((r.fidelity - 1.0).abs() < 1e-14);
        assert!(coherent_mean_overlap_error(&states, &target).unwrap() < 1e-14);
    }
}
