//! Measurement models: photon-resolved populations, displaced interference
//! populations, phase-error inversion and Wigner maps.

use std::fmt::Write as _;

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SnapError};
use crate::hilbert::{CMatrix, DensityMatrix, Level};
use crate::scalar::{wrap_phase, Real, C};

/// Where a population table came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Simulated,
    Ingested,
    Model,
}

/// `P(level, n)` for `n = 0..N`. Levels that were not measured are absent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct PopulationTable<T: Real> {
    fock: usize,
    rows: Vec<(Level, Vec<T>)>,
    pub provenance: Provenance,
}

impl<T: Real> PopulationTable<T> {
    pub fn new(rows: Vec<(Level, Vec<T>)>, provenance: Provenance) -> Result<Self> {
        let fock = rows.first().map(|(_, v)| v.len()).unwrap_or(0);
        if fock == 0 {
            return Err(SnapError::Table("no populations".into()));
        }
        for (i, (level, v)) in rows.iter().enumerate() {
            if v.len() != fock {
                return Err(SnapError::DimensionMismatch {
                    expected: fock,
                    got: v.len(),
                });
            }
            if rows[..i].iter().any(|(l, _)| l == level) {
                return Err(SnapError::Table(format!("level {} listed twice", level.label())));
            }
            if v.iter().any(|p| !p.is_finite()) {
                return Err(SnapError::Table("non-finite probability".into()));
            }
        }
        Ok(Self { fock, rows, provenance })
    }

    /// Ground-state row only.
    pub fn ground(p: Vec<T>, provenance: Provenance) -> Result<Self> {
        Self::new(vec![(Level::G, p)], provenance)
    }

    pub fn fock_levels(&self) -> usize {
        self.fock
    }

    pub fn levels(&self) -> impl Iterator<Item = Level> + '_ {
        self.rows.iter().map(|(l, _)| *l)
    }

    pub fn row(&self, level: Level) -> Option<&[T]> {
        self.rows.iter().find(|(l, _)| *l == level).map(|(_, v)| v.as_slice())
    }

    /// `P(g, ·)`; every table carries it.
    pub fn g(&self) -> Result<&[T]> {
        self.row(Level::G)
            .ok_or_else(|| SnapError::Table("the table has no ground-state row".into()))
    }

    pub fn get(&self, level: Level, n: usize) -> Option<T> {
        self.row(level).and_then(|r| r.get(n).copied())
    }

    pub fn total(&self) -> T {
        self.rows.iter().flat_map(|(_, v)| v.iter()).fold(T::zero(), |a, &b| a + b)
    }

    /// Entries in `[−tol, 1+tol]` and, if `normalized`, summing to one within `tol`.
    pub fn check(&self, tol: T, normalized: bool) -> Result<()> {
        for (level, v) in &self.rows {
            for (n, &p) in v.iter().enumerate() {
                if p < -tol || p > T::one() + tol {
                    return Err(SnapError::Table(format!("P({}, {n}) = {p} is not a probability", level.label())));
                }
            }
        }
        if normalized && (self.total() - T::one()).abs() > tol {
            return Err(SnapError::Table(format!("populations sum to {}", self.total())));
        }
        Ok(())
    }

    /// CSV with header `level,n,probability`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("level,n,probability\n");
        for (level, v) in &self.rows {
            for (n, p) in v.iter().enumerate() {
                let _ = writeln!(out, "{},{n},{p:e}", level.label());
            }
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| SnapError::Table("empty input".into()))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols != ["level", "n", "probability"] {
            return Err(SnapError::Table(format!("unexpected header {header:?}")));
        }
        let mut entries: Vec<(Level, usize, T)> = Vec::new();
        for (i, line) in lines.enumerate() {
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 3 {
                return Err(SnapError::Table(format!("line {}: expected 3 fields", i + 2)));
            }
            let level = match f[0] {
                "g" => Level::G,
                "e" => Level::E,
                "f" => Level::F,
                other => return Err(SnapError::Table(format!("line {}: unknown level {other:?}", i + 2))),
            };
            let n: usize = f[1]
                .parse()
                .map_err(|_| SnapError::Table(format!("line {}: bad photon number", i + 2)))?;
            let p: f64 = f[2]
                .parse()
                .map_err(|_| SnapError::Table(format!("line {}: bad probability", i + 2)))?;
            entries.push((level, n, T::lit(p)));
        }
        let fock = entries.iter().map(|e| e.1 + 1).max().unwrap_or(0);
        let mut rows: Vec<(Level, Vec<Option<T>>)> = Vec::new();
        for (level, n, p) in entries {
            let pos = match rows.iter().position(|(l, _)| *l == level) {
                Some(pos) => pos,
                None => {
                    rows.push((level, vec![None; fock]));
                    rows.len() - 1
                }
            };
            if rows[pos].1[n].replace(p).is_some() {
                return Err(SnapError::Table(format!("P({}, {n}) given twice", level.label())));
            }
        }
        let rows = rows
            .into_iter()
            .map(|(level, v)| {
                let v = v
                    .into_iter()
                    .enumerate()
                    .map(|(n, p)| p.ok_or_else(|| SnapError::Table(format!("P({}, {n}) missing", level.label()))))
                    .collect::<Result<Vec<T>>>()?;
                Ok((level, v))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(rows, Provenance::Ingested)
    }
}

/// `P(level, n) = ⟨level n|ρ|level n⟩`.
pub fn populations<T: Real>(rho: &DensityMatrix<T>) -> PopulationTable<T> {
    let layout = rho.layout();
    let rows = layout
        .levels()
        .map(|level| {
            let v = (0..layout.fock_truncation())
                .map(|n| {
                    let i = layout.index(level, n);
                    rho.get(i, i).re
                })
                .collect();
            (level, v)
        })
        .collect();
    PopulationTable::new(rows, Provenance::Simulated).expect("layout has at least one level")
}

/// Generalized Laguerre polynomial `L_n^{(k)}(x)` by upward recurrence.
pub fn laguerre<T: Real>(n: usize, k: usize, x: T) -> T {
    let a = T::of(k);
    let mut prev = T::one();
    if n == 0 {
        return prev;
    }
    let mut cur = T::one() + a - x;
    for j in 1..n {
        let jf = T::of(j);
        let next = ((T::two() * jf + T::one() + a - x) * cur - (jf + a) * prev) / (jf + T::one());
        prev = cur;
        cur = next;
    }
    cur
}

/// Matrix of the cavity displacement `D(ε) = exp(εa† − ε*a)` on `dim` Fock
/// levels.
///
/// Entries are exact: `d_mn = √(n!/m!) ε^{m−n} e^{−|ε|²/2} L_n^{(m−n)}(|ε|²)`
/// for `m ≥ n` and `d_mn(ε) = d_nm(−ε)*` otherwise. The truncated matrix is
/// therefore not unitary near the cutoff.
pub fn displacement_matrix<T: Real>(epsilon: C<T>, dim: usize) -> Result<CMatrix<T>> {
    if dim < 2 {
        return Err(SnapError::Domain(format!("displacement needs at least 2 levels, got {dim}")));
    }
    let x = epsilon.norm_sqr();
    let damp = (-x * T::half()).exp();
    // lower(m, n, e) for m ≥ n
    let lower = |m: usize, n: usize, e: C<T>| -> C<T> {
        let mut ratio = T::one();
        for j in n + 1..=m {
            ratio = ratio / T::of(j);
        }
        // √(n!/m!) · e^{m−n}
        let mut pow = C::new(T::one(), T::zero());
        for _ in n..m {
            pow = pow * e;
        }
        pow * (ratio.sqrt() * damp * laguerre(n, m - n, x))
    };
    Ok(CMatrix::from_fn(dim, |m, n| {
        if m >= n {
            lower(m, n, epsilon)
        } else {
            lower(n, m, -epsilon).conj()
        }
    }))
}

/// Exact populations after displacing the cavity by real `epsilon`:
/// `P_ε(level, n) = ⟨level n|D ρ D†|level n⟩`.
pub fn interference_populations<T: Real>(rho: &DensityMatrix<T>, epsilon: T) -> Result<PopulationTable<T>> {
    if !epsilon.is_finite() {
        return Err(SnapError::Domain("displacement must be finite".into()));
    }
    let layout = rho.layout();
    let nf = layout.fock_truncation();
    let d = displacement_matrix(C::new(epsilon, T::zero()), nf)?;
    let rows = layout
        .levels()
        .map(|level| {
            let v = (0..nf)
                .map(|n| {
                    let mut acc: C<T> = C::zero();
                    for a in 0..nf {
                        let da = d.get(n, a);
                        if da == C::zero() {
                            continue;
                        }
                        for b in 0..nf {
                            acc = acc + da * rho.get(layout.index(level, a), layout.index(level, b)) * d.get(n, b).conj();
                        }
                    }
                    acc.re
                })
                .collect();
            (level, v)
        })
        .collect();
    PopulationTable::new(rows, Provenance::Simulated)
}

/// First-order interference populations for real amplitudes `c` and phases
/// `theta`: `|c_n|² + 2ε c_n c_{n−1} √n cos(θ_n−θ_{n−1}) − 2ε c_n c_{n+1} √(n+1) cos(θ_n−θ_{n+1})`.
pub fn interference_first_order<T: Real>(c: &[T], theta: &[T], epsilon: T) -> Result<PopulationTable<T>> {
    if c.len() != theta.len() {
        return Err(SnapError::DimensionMismatch {
            expected: c.len(),
            got: theta.len(),
        });
    }
    let k = c.len();
    let p = (0..k)
        .map(|n| {
            let mut v = c[n] * c[n];
            if n > 0 {
                v = v + T::two() * epsilon * c[n] * c[n - 1] * T::of(n).sqrt() * (theta[n] - theta[n - 1]).cos();
            }
            if n + 1 < k {
                v = v - T::two() * epsilon * c[n] * c[n + 1] * T::of(n + 1).sqrt() * (theta[n] - theta[n + 1]).cos();
            }
            v
        })
        .collect();
    PopulationTable::ground(p, Provenance::Model)
}

/// Model of the displaced ground-state populations from measured `P(g, ·)`
/// and phases `θ + Δθ`, assuming real final amplitudes.
pub fn interference_model<T: Real>(p_g: &[T], phases: &[T], epsilon: T) -> Result<Vec<T>> {
    if p_g.len() != phases.len() {
        return Err(SnapError::DimensionMismatch {
            expected: p_g.len(),
            got: phases.len(),
        });
    }
    let k = p_g.len();
    let d = displacement_matrix(C::new(epsilon, T::zero()), k)?;
    let amp: Vec<T> = p_g.iter().map(|&p| p.max(T::zero()).sqrt()).collect();
    Ok((0..k)
        .map(|n| {
            let mut v = T::zero();
            for n1 in 0..k {
                let d1 = d.get(n, n1).re;
                v = v + d1 * d1 * amp[n1] * amp[n1];
                for n2 in n1 + 1..k {
                    v = v + T::two() * d1 * d.get(n, n2).re * amp[n1] * amp[n2] * (phases[n2] - phases[n1]).cos();
                }
            }
            v
        })
        .collect())
}

/// Solver settings for [`solve_phase_errors`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct PhaseSolverConfig<T: Real> {
    pub max_iterations: usize,
    /// Stop once the step norm falls below this.
    pub tolerance: T,
    pub finite_difference_step: T,
    /// Normal matrices with a larger condition number are flagged.
    pub condition_limit: T,
}

impl<T: Real> Default for PhaseSolverConfig<T> {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            tolerance: T::lit(1e-12),
            finite_difference_step: T::lit(1e-6),
            condition_limit: T::lit(1e10),
        }
    }
}

/// Phase errors recovered from an interference measurement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct PhaseEstimate<T: Real> {
    /// `Δθ_n`, with `Δθ_0 = 0` as gauge.
    pub dtheta: Vec<T>,
    /// One-sigma uncertainty from the residual scatter and `(JᵀJ)⁻¹`.
    pub uncertainty: Vec<T>,
    pub residual_norm: T,
    pub condition_number: T,
    pub ill_conditioned: bool,
    pub iterations: usize,
}

/// Inverts the interference model for the phase errors `Δθ_1..Δθ_{L−1}`.
///
/// `theta` holds the target phases of the addressed modes; populated levels
/// above them carry zero phase and no unknown. Damped Gauss-Newton with a
/// numerical Jacobian.
pub fn solve_phase_errors<T: Real>(
    p: &PopulationTable<T>,
    p_eps: &PopulationTable<T>,
    theta: &[T],
    epsilon: T,
    config: &PhaseSolverConfig<T>,
) -> Result<PhaseEstimate<T>> {
    let pg = p.g()?;
    let pe = p_eps.g()?;
    if pg.len() != pe.len() {
        return Err(SnapError::DimensionMismatch {
            expected: pg.len(),
            got: pe.len(),
        });
    }
    let l = theta.len();
    if l < 2 || l > pg.len() {
        return Err(SnapError::Domain(format!(
            "need between 2 and {} target phases, got {l}",
            pg.len()
        )));
    }
    let unknowns = l - 1;
    let phases_for = |dt: &[T]| -> Vec<T> {
        (0..pg.len())
            .map(|n| match n {
                0 => theta[0],
                n if n < l => theta[n] + dt[n - 1],
                _ => T::zero(),
            })
            .collect()
    };
    let residual = |dt: &[T]| -> Result<Vec<T>> {
        let model = interference_model(pg, &phases_for(dt), epsilon)?;
        Ok(model.iter().zip(pe).map(|(m, d)| *m - *d).collect())
    };
    let norm2 = |r: &[T]| r.iter().fold(T::zero(), |a, &b| a + b * b);
    let jacobian = |dt: &[T]| -> Result<Vec<Vec<T>>> {
        let h = config.finite_difference_step;
        let mut cols = Vec::with_capacity(unknowns);
        for k in 0..unknowns {
            let mut up = dt.to_vec();
            let mut down = dt.to_vec();
            up[k] = up[k] + h;
            down[k] = down[k] - h;
            let (ru, rd) = (residual(&up)?, residual(&down)?);
            cols.push(ru.iter().zip(&rd).map(|(a, b)| (*a - *b) / (T::two() * h)).collect());
        }
        Ok(cols)
    };
    let normal = |cols: &[Vec<T>], r: &[T]| -> (Vec<Vec<T>>, Vec<T>) {
        let a = (0..unknowns)
            .map(|i| (0..unknowns).map(|j| dot(&cols[i], &cols[j])).collect())
            .collect();
        let b = (0..unknowns).map(|i| dot(&cols[i], r)).collect();
        (a, b)
    };

    let mut dt = vec![T::zero(); unknowns];
    let mut r = residual(&dt)?;
    let mut mu = T::lit(1e-3);
    let mut iterations = 0;
    while iterations < config.max_iterations {
        iterations += 1;
        let cols = jacobian(&dt)?;
        let (a, b) = normal(&cols, &r);
        let current = norm2(&r);
        let mut accepted = None;
        for _ in 0..40 {
            let mut damped = a.clone();
            for (i, row) in damped.iter_mut().enumerate() {
                row[i] = row[i] + mu * (a[i][i] + T::lit(1e-12));
            }
            let Some(step) = solve_symmetric(damped, b.clone()) else {
                mu = mu * T::lit(10.0);
                continue;
            };
            let trial: Vec<T> = dt.iter().zip(&step).map(|(x, s)| *x - *s).collect();
            let rt = residual(&trial)?;
            if norm2(&rt) <= current {
                accepted = Some((trial, rt, step));
                mu = (mu / T::lit(3.0)).max(T::lit(1e-12));
                break;
            }
            mu = mu * T::lit(4.0);
        }
        let Some((trial, rt, step)) = accepted else {
            break;
        };
        dt = trial;
        r = rt;
        if norm2(&step).sqrt() < config.tolerance {
            break;
        }
    }

    let cols = jacobian(&dt)?;
    let (a, _) = normal(&cols, &r);
    let eig = CMatrix::from_fn(unknowns, |i, j| C::new(a[i][j], T::zero())).hermitian_eigenvalues();
    let (lo, hi) = eig.iter().fold((T::infinity(), T::zero()), |(lo, hi), &e| (lo.min(e.abs()), hi.max(e.abs())));
    let condition_number = if lo > T::zero() { hi / lo } else { T::infinity() };
    let ill_conditioned = !(condition_number <= config.condition_limit);

    let rss = norm2(&r);
    let dof = pe.len().saturating_sub(unknowns).max(1);
    let s2 = rss / T::of(dof);
    let uncertainty = match invert_symmetric(&a) {
        Some(inv) if !ill_conditioned => (0..unknowns).map(|i| (s2 * inv[i][i]).max(T::zero()).sqrt()).collect(),
        _ => vec![T::infinity(); unknowns],
    };
    let mut full = vec![T::zero()];
    full.extend(dt.iter().map(|&x| wrap_phase(x)));
    let mut unc = vec![T::zero()];
    unc.extend(uncertainty);
    Ok(PhaseEstimate {
        dtheta: full,
        uncertainty: unc,
        residual_norm: rss.sqrt(),
        condition_number,
        ill_conditioned,
        iterations,
    })
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (x, y)| acc + *x * *y)
}

/// Gaussian elimination with partial pivoting; `None` if singular.
fn solve_symmetric<T: Real>(mut a: Vec<Vec<T>>, mut b: Vec<T>) -> Option<Vec<T>> {
    let n = b.len();
    for i in 0..n {
        let piv = (i..n).max_by(|&x, &y| a[x][i].abs().partial_cmp(&a[y][i].abs()).expect("finite"))?;
        if !(a[piv][i].abs() > T::lit(1e-300)) {
            return None;
        }
        a.swap(i, piv);
        b.swap(i, piv);
        for r in i + 1..n {
            let f = a[r][i] / a[i][i];
            for c in i..n {
                a[r][c] = a[r][c] - f * a[i][c];
            }
            b[r] = b[r] - f * b[i];
        }
    }
    let mut x = vec![T::zero(); n];
    for i in (0..n).rev() {
        let s = (i + 1..n).fold(b[i], |acc, c| acc - a[i][c] * x[c]);
        x[i] = s / a[i][i];
    }
    Some(x)
}

fn invert_symmetric<T: Real>(a: &[Vec<T>]) -> Option<Vec<Vec<T>>> {
    let n = a.len();
    let mut inv = vec![vec![T::zero(); n]; n];
    for j in 0..n {
        let mut e = vec![T::zero(); n];
        e[j] = T::one();
        let col = solve_symmetric(a.to_vec(), e)?;
        for i in 0..n {
            inv[i][j] = col[i];
        }
    }
    Some(inv)
}

/// Extra Fock levels used beyond the state's support when displacing for
/// the Wigner function at amplitude `|α|`.
fn wigner_padding<T: Real>(alpha: T) -> usize {
    let a = alpha.to_f64().unwrap_or(0.0);
    20 + (2.0 * a * a + 8.0 * a).ceil() as usize
}

/// `W(α) = (2/π) Tr[D†(α) ρ D(α) Π]` on the cavity state `rho`.
pub fn wigner<T: Real>(rho_cavity: &CMatrix<T>, alphas: &[C<T>]) -> Result<Vec<T>> {
    let nf = rho_cavity.dim();
    if nf == 0 {
        return Err(SnapError::Domain("empty cavity state".into()));
    }
    let scale = T::two() / T::PI();
    alphas
        .iter()
        .map(|&alpha| {
            if !(alpha.re.is_finite() && alpha.im.is_finite()) {
                return Err(SnapError::Domain("non-finite phase-space point".into()));
            }
            let dim = nf + wigner_padding(alpha.norm());
            let d = displacement_matrix(alpha, dim)?;
            // Σ_k (−1)^k Σ_ij D*_ik ρ_ij D_jk
            let mut w = T::zero();
            for k in 0..dim {
                let mut acc: C<T> = C::zero();
                for i in 0..nf {
                    let dik = d.get(i, k).conj();
                    for j in 0..nf {
                        acc = acc + dik * rho_cavity.get(i, j) * d.get(j, k);
                    }
                }
                w = if k % 2 == 0 { w + acc.re } else { w - acc.re };
            }
            Ok(scale * w)
        })
        .collect()
}

/// Row-major grid of phase-space points, `re` varying fastest.
pub fn phase_space_grid<T: Real>(re: &[T], im: &[T]) -> Vec<C<T>> {
    im.iter().flat_map(|&y| re.iter().map(move |&x| C::new(x, y))).collect()
}

/// CSV with header `re,im,w`.
pub fn wigner_csv<T: Real>(alphas: &[C<T>], values: &[T]) -> String {
    let mut out = String::from("re,im,w\n");
    for (a, w) in alphas.iter().zip(values) {
        let _ = writeln!(out, "{:e},{:e},{w:e}", a.re, a.im);
    }
    out
}
