use num_traits::{One, Zero};

use super::{PropagationConfig, SystemParams};
use crate::error::{Result, SnapError};
use crate::hilbert::{CMatrix, DensityMatrix, HilbertLayout, Level};
use crate::pulse::PulseSpec;
use crate::scalar::{cis, Real, C};

const NO_PARTNER: usize = usize::MAX;

/// Master-equation right-hand side with the time-dependent jump operators
/// `e^{iχ n t}|g⟩⟨e|`, `e^{i(χ_f−χ) n t}|e⟩⟨f|`, `|e⟩⟨e|`, `|f⟩⟨f|` and
/// `e^{i(χ|e⟩⟨e| + χ_f|f⟩⟨f|)t} a`, written out elementwise.
struct Liouvillian<T: Real> {
    levels: usize,
    nf: usize,
    dim: usize,
    upper: usize,
    chi: T,
    chi_f: T,
    chi_x: T,
    energy: Vec<T>,
    partner: Vec<usize>,
    out_rate: Vec<T>,
    sqrt_n: Vec<T>,
    gamma_eg: T,
    gamma_fe: T,
    gamma_ee: T,
    gamma_ff: T,
    gamma_cav: T,
}

/// Time-dependent coefficients at one integrator node.
struct Node<T: Real> {
    coupling: Vec<C<T>>,
    a_pow: Vec<C<T>>,
    b_pow: Vec<C<T>>,
    level_phase: [C<T>; 3],
}

impl<T: Real> Liouvillian<T> {
    fn new(system: &SystemParams<T>, layout: HilbertLayout) -> Self {
        let levels = layout.transmon_levels();
        let nf = layout.fock_truncation();
        let dim = layout.dim();
        let upper = system.protocol.upper().index();
        let r = system.rates;
        let mut energy = vec![T::zero(); dim];
        let mut partner = vec![NO_PARTNER; dim];
        let mut out_rate = vec![T::zero(); dim];
        for n in 0..nf {
            let (eg, ex) = system.kerr_energies(n);
            let ig = layout.index(Level::G, n);
            let ix = upper * nf + n;
            energy[ig] = eg;
            energy[ix] = ex;
            partner[ig] = ix;
            partner[ix] = ig;
            for t in 0..levels {
                let i = t * nf + n;
                let mut rate = r.gamma_cav * T::of(n);
                if t == 1 {
                    rate = rate + r.gamma_eg + r.gamma_ee;
                }
                if t == 2 {
                    rate = rate + r.gamma_fe + r.gamma_ff;
                }
                out_rate[i] = rate;
            }
        }
        Self {
            levels,
            nf,
            dim,
            upper,
            chi: system.chi,
            chi_f: system.chi_f,
            chi_x: system.drive_chi(),
            energy,
            partner,
            out_rate,
            sqrt_n: (0..=nf).map(|n| T::of(n).sqrt()).collect(),
            gamma_eg: r.gamma_eg,
            gamma_fe: if levels > 2 { r.gamma_fe } else { T::zero() },
            gamma_ee: r.gamma_ee,
            gamma_ff: if levels > 2 { r.gamma_ff } else { T::zero() },
            gamma_cav: r.gamma_cav,
        }
    }

    fn node(&self, omega: C<T>, t: T) -> Node<T> {
        let nf = self.nf;
        let mut coupling = vec![C::zero(); self.dim];
        let z = cis(-self.chi_x * t);
        let a = cis(self.chi * t);
        let b = cis((self.chi_f - self.chi) * t);
        let mut zp = C::one();
        let mut ap = C::one();
        let mut bp = C::one();
        let mut a_pow = Vec::with_capacity(nf);
        let mut b_pow = Vec::with_capacity(nf);
        for n in 0..nf {
            let w = omega * zp;
            coupling[n] = w.conj();
            coupling[self.upper * nf + n] = w;
            a_pow.push(ap);
            b_pow.push(bp);
            zp = zp * z;
            ap = ap * a;
            bp = bp * b;
        }
        Node {
            coupling,
            a_pow,
            b_pow,
            level_phase: [C::one(), cis(self.chi * t), cis(self.chi_f * t)],
        }
    }

    fn apply(&self, node: &Node<T>, rho: &[C<T>], out: &mut [C<T>]) {
        let d = self.dim;
        let nf = self.nf;
        let half = T::half();
        for i in 0..d {
            let (ti, ni) = (i / nf, i % nf);
            let pi = self.partner[i];
            let ci = node.coupling[i];
            for j in 0..d {
                let (tj, nj) = (j / nf, j % nf);
                let r = rho[i * d + j];
                let mut comm = r * (self.energy[i] - self.energy[j]);
                if pi != NO_PARTNER {
                    comm = comm + ci * rho[pi * d + j];
                }
                let pj = self.partner[j];
                if pj != NO_PARTNER {
                    comm = comm - rho[i * d + pj] * node.coupling[pj];
                }
                let mut v = C::new(comm.im, -comm.re) - r * ((self.out_rate[i] + self.out_rate[j]) * half);
                if ti == tj {
                    match ti {
                        0 if self.levels > 1 && self.gamma_eg > T::zero() => {
                            let src = rho[(nf + ni) * d + nf + nj];
                            v = v + src * node.a_pow[ni] * node.a_pow[nj].conj() * self.gamma_eg;
                        }
                        1 => {
                            v = v + r * self.gamma_ee;
                            if self.gamma_fe > T::zero() {
                                let src = rho[(2 * nf + ni) * d + 2 * nf + nj];
                                v = v + src * node.b_pow[ni] * node.b_pow[nj].conj() * self.gamma_fe;
                            }
                        }
                        2 => v = v + r * self.gamma_ff,
                        _ => {}
                    }
                }
                if self.gamma_cav > T::zero() && ni + 1 < nf && nj + 1 < nf {
                    let src = rho[(i + 1) * d + j + 1];
                    let phase = node.level_phase[ti] * node.level_phase[tj].conj();
                    v = v + src * phase * (self.gamma_cav * self.sqrt_n[ni + 1] * self.sqrt_n[nj + 1]);
                }
                out[i * d + j] = v;
            }
        }
    }
}

fn evolve<T: Real>(
    pulse: &PulseSpec<T>,
    system: &SystemParams<T>,
    layout: HilbertLayout,
    initial: &CMatrix<T>,
    config: &PropagationConfig<T>,
) -> CMatrix<T> {
    let liou = Liouvillian::new(system, layout);
    let steps = config.steps_for(pulse.t_gate);
    let h = pulse.t_gate / T::of(steps);
    let half = h * T::half();
    let drive = pulse.sample_uniform(half, 2 * steps + 1);
    let size = liou.dim * liou.dim;
    let mut rho = initial.data().to_vec();
    let mut k1 = vec![C::zero(); size];
    let mut k2 = vec![C::zero(); size];
    let mut k3 = vec![C::zero(); size];
    let mut k4 = vec![C::zero(); size];
    let mut tmp = vec![C::zero(); size];
    let mut node_start = liou.node(drive[0], T::zero());
    for k in 0..steps {
        let t = h * T::of(k);
        let node_mid = liou.node(drive[2 * k + 1], t + half);
        let node_end = liou.node(drive[2 * k + 2], t + h);
        liou.apply(&node_start, &rho, &mut k1);
        for (y, (r, d)) in tmp.iter_mut().zip(rho.iter().zip(&k1)) {
            *y = *r + *d * half;
        }
        liou.apply(&node_mid, &tmp, &mut k2);
        for (y, (r, d)) in tmp.iter_mut().zip(rho.iter().zip(&k2)) {
            *y = *r + *d * half;
        }
        liou.apply(&node_mid, &tmp, &mut k3);
        for (y, (r, d)) in tmp.iter_mut().zip(rho.iter().zip(&k3)) {
            *y = *r + *d * h;
        }
        liou.apply(&node_end, &tmp, &mut k4);
        let sixth = h / T::lit(6.0);
        let two = T::two();
        for i in 0..size {
            rho[i] = rho[i] + (k1[i] + k2[i] * two + k3[i] * two + k4[i]) * sixth;
        }
        node_start = node_end;
    }
    CMatrix::from_vec(liou.dim, rho).expect("size preserved")
}

fn check_state<T: Real>(rho: &CMatrix<T>) -> Result<()> {
    let tr = rho.trace();
    if (tr.re - T::one()).abs() > T::lit(1e-8) || tr.im.abs() > T::lit(1e-8) {
        return Err(SnapError::Precision(format!("trace drifted to {tr}")));
    }
    let herm = rho.hermiticity_defect();
    if herm > T::lit(1e-10) {
        return Err(SnapError::Precision(format!("Hermiticity defect {herm:e}")));
    }
    let min = rho.hermitian_eigenvalues()[0];
    if min < T::lit(-1e-6) {
        return Err(SnapError::Precision(format!(
            "eigenvalue {min:e} below zero; the integrator step is too coarse"
        )));
    }
    Ok(())
}

/// Evolves `initial` through the pulse under the master equation.
pub fn propagate_lindblad<T: Real>(
    pulse: &PulseSpec<T>,
    system: &SystemParams<T>,
    initial: &DensityMatrix<T>,
    config: &PropagationConfig<T>,
) -> Result<DensityMatrix<T>> {
    pulse.validate()?;
    system.validate()?;
    config.validate()?;
    let layout = initial.layout();
    if layout.transmon_levels() < system.protocol.transmon_levels() {
        return Err(SnapError::config(
            "transmon_levels",
            "layout lacks the driven transmon level",
        ));
    }
    initial.validate(T::lit(1e-10), T::lit(1e-10), T::lit(1e-9))?;
    let out = evolve(pulse, system, layout, initial.matrix(), config);
    check_state(&out)?;
    DensityMatrix::from_matrix(layout, out)
}

/// Images `E_ab` of the matrix units `|g a⟩⟨g b|` under the noisy gate,
/// for `a, b` over the addressed modes.
#[derive(Clone, Debug)]
pub struct ProcessMap<T: Real> {
    layout: HilbertLayout,
    modes: usize,
    units: Vec<CMatrix<T>>,
}

impl<T: Real> ProcessMap<T> {
    /// Builds a map from explicit images, `units[a * modes + b] = E_ab`.
    pub fn from_units(layout: HilbertLayout, modes: usize, units: Vec<CMatrix<T>>) -> Result<Self> {
        if units.len() != modes * modes {
            return Err(SnapError::DimensionMismatch {
                expected: modes * modes,
                got: units.len(),
            });
        }
        for u in &units {
            if u.dim() != layout.dim() {
                return Err(SnapError::DimensionMismatch {
                    expected: layout.dim(),
                    got: u.dim(),
                });
            }
        }
        Ok(Self { layout, modes, units })
    }

    pub fn layout(&self) -> HilbertLayout {
        self.layout
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn unit(&self, a: usize, b: usize) -> &CMatrix<T> {
        &self.units[a * self.modes + b]
    }

    /// `Σ_ab c_a c_b* E_ab`.
    pub fn apply(&self, c: &[C<T>]) -> Result<CMatrix<T>> {
        if c.len() != self.modes {
            return Err(SnapError::DimensionMismatch {
                expected: self.modes,
                got: c.len(),
            });
        }
        let mut out = CMatrix::zeros(self.layout.dim());
        for a in 0..self.modes {
            for b in 0..self.modes {
                let w = c[a] * c[b].conj();
                for (o, u) in out.data_mut().iter_mut().zip(self.unit(a, b).data()) {
                    *o = *o + *u * w;
                }
            }
        }
        Ok(out)
    }
}

/// Evolves the `L(L+1)/2` independent matrix units and fills the rest by
/// Hermitian conjugation.
pub fn process_map<T: Real>(
    pulse: &PulseSpec<T>,
    system: &SystemParams<T>,
    layout: HilbertLayout,
    config: &PropagationConfig<T>,
) -> Result<ProcessMap<T>> {
    pulse.validate()?;
    system.validate()?;
    config.validate()?;
    let modes = pulse.len();
    layout.check_modes(modes)?;
    if layout.transmon_levels() < system.protocol.transmon_levels() {
        return Err(SnapError::config(
            "transmon_levels",
            "layout lacks the driven transmon level",
        ));
    }
    let mut units = vec![CMatrix::zeros(layout.dim()); modes * modes];
    for a in 0..modes {
        for b in a..modes {
            let mut unit = CMatrix::zeros(layout.dim());
            unit.set(layout.index(Level::G, a), layout.index(Level::G, b), C::one());
            let image = evolve(pulse, system, layout, &unit, config);
            if a == b {
                check_state(&image)?;
            } else {
                units[b * modes + a] = image.adjoint();
            }
            units[a * modes + b] = image;
        }
    }
    Ok(ProcessMap { layout, modes, units })
}
