//! Operator and state algebra on the composite transmon ⊗ truncated-cavity space.
//!
//! Composite index ordering is transmon-major: `index = level * N_tr + n`.
//! Every other module relies on this single convention.

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SnapError};
use crate::scalar::{cis, Real, C};

/// Transmon level.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    G,
    E,
    F,
}

impl Level {
    pub const fn index(self) -> usize {
        match self {
            Level::G => 0,
            Level::E => 1,
            Level::F => 2,
        }
    }

    pub fn from_index(i: usize) -> Result<Self> {
        match i {
            0 => Ok(Level::G),
            1 => Ok(Level::E),
            2 => Ok(Level::F),
            _ => Err(SnapError::OutOfRange(format!("transmon level {i}"))),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Level::G => "g",
            Level::E => "e",
            Level::F => "f",
        }
    }
}

/// Default number of Fock levels kept above the addressed modes.
pub const DEFAULT_HEADROOM: usize = 4;

/// Shape of the composite Hilbert space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HilbertLayout {
    transmon_levels: usize,
    fock_truncation: usize,
}

impl HilbertLayout {
    pub fn new(transmon_levels: usize, fock_truncation: usize) -> Result<Self> {
        if !(2..=3).contains(&transmon_levels) {
            return Err(SnapError::config(
                "transmon_levels",
                format!("must be 2 or 3, got {transmon_levels}"),
            ));
        }
        if fock_truncation < 1 {
            return Err(SnapError::config("fock_truncation", "must be at least 1"));
        }
        Ok(Self {
            transmon_levels,
            fock_truncation,
        })
    }

    /// Layout addressing `modes` Fock levels with the default headroom.
    pub fn for_modes(transmon_levels: usize, modes: usize) -> Result<Self> {
        Self::with_headroom(transmon_levels, modes, DEFAULT_HEADROOM)
    }

    pub fn with_headroom(transmon_levels: usize, modes: usize, headroom: usize) -> Result<Self> {
        if modes == 0 {
            return Err(SnapError::config("modes", "at least one Fock mode is required"));
        }
        if headroom < 2 {
            return Err(SnapError::config(
                "fock_truncation",
                format!("needs at least 2 levels of headroom above {modes} modes"),
            ));
        }
        Self::new(transmon_levels, modes + headroom)
    }

    pub fn transmon_levels(&self) -> usize {
        self.transmon_levels
    }

    pub fn fock_truncation(&self) -> usize {
        self.fock_truncation
    }

    pub fn dim(&self) -> usize {
        self.transmon_levels * self.fock_truncation
    }

    #[inline]
    pub fn index(&self, level: Level, n: usize) -> usize {
        level.index() * self.fock_truncation + n
    }

    /// Checked composite index.
    pub fn try_index(&self, level: Level, n: usize) -> Result<usize> {
        if level.index() >= self.transmon_levels {
            return Err(SnapError::OutOfRange(format!(
                "level {} in a {}-level transmon",
                level.label(),
                self.transmon_levels
            )));
        }
        if n >= self.fock_truncation {
            return Err(SnapError::OutOfRange(format!(
                "Fock state {n} beyond truncation {}",
                self.fock_truncation
            )));
        }
        Ok(self.index(level, n))
    }

    /// Inverse of [`HilbertLayout::index`]: (transmon level index, Fock number).
    #[inline]
    pub fn split(&self, index: usize) -> (usize, usize) {
        (index / self.fock_truncation, index % self.fock_truncation)
    }

    pub fn levels(&self) -> impl Iterator<Item = Level> {
        [Level::G, Level::E, Level::F]
            .into_iter()
            .take(self.transmon_levels)
    }

    pub fn check_modes(&self, modes: usize) -> Result<()> {
        if self.fock_truncation < modes + 2 {
            return Err(SnapError::config(
                "fock_truncation",
                format!(
                    "{} Fock levels leave no headroom above {modes} addressed modes",
                    self.fock_truncation
                ),
            ));
        }
        Ok(())
    }
}

/// Dense row-major complex square matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix<T> {
    dim: usize,
    data: Vec<C<T>>,
}

impl<T: Real> CMatrix<T> {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![C::zero(); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = C::one();
        }
        m
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> C<T>) -> Self {
        let mut data = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                data.push(f(i, j));
            }
        }
        Self { dim, data }
    }

    pub fn from_vec(dim: usize, data: Vec<C<T>>) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(SnapError::DimensionMismatch {
                expected: dim * dim,
                got: data.len(),
            });
        }
        Ok(Self { dim, data })
    }

    /// `|a⟩⟨b|`.
    pub fn outer(a: &[C<T>], b: &[C<T>]) -> Self {
        let dim = a.len();
        Self::from_fn(dim, |i, j| a[i] * b[j].conj())
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn data(&self) -> &[C<T>] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [C<T>] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C<T> {
        self.data[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: C<T>) {
        self.data[i * self.dim + j] = v;
    }

    pub fn matmul(&self, other: &Self) -> Self {
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a.is_zero() {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] = out.data[i * n + j] + a * other.data[k * n + j];
                }
            }
        }
        out
    }

    pub fn apply(&self, v: &[C<T>]) -> Vec<C<T>> {
        let n = self.dim;
        (0..n)
            .map(|i| {
                self.data[i * n..(i + 1) * n]
                    .iter()
                    .zip(v)
                    .fold(C::zero(), |acc, (a, b)| acc + *a * *b)
            })
            .collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self.get(j, i).conj())
    }

    pub fn scale(&self, s: C<T>) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|x| *x * s).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| *a + *b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(C::new(-T::one(), T::zero())))
    }

    pub fn trace(&self) -> C<T> {
        (0..self.dim).fold(C::zero(), |acc, i| acc + self.get(i, i))
    }

    pub fn commutator(&self, other: &Self) -> Self {
        self.matmul(other).sub(&other.matmul(self))
    }

    pub fn frobenius_norm(&self) -> T {
        self.data
            .iter()
            .fold(T::zero(), |acc, x| acc + x.norm_sqr())
            .sqrt()
    }

    pub fn frobenius_distance(&self, other: &Self) -> T {
        self.data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |acc, (a, b)| acc + (*a - *b).norm_sqr())
            .sqrt()
    }

    /// Largest entrywise deviation from Hermiticity.
    pub fn hermiticity_defect(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.dim {
            for j in i..self.dim {
                let d = (self.get(i, j) - self.get(j, i).conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    /// Eigenvalues of the Hermitian part, ascending.
    ///
    /// Uses the real symmetric embedding `[[A, -B], [B, A]]` of `A + iB`, whose
    /// spectrum is that of the Hermitian matrix with every eigenvalue doubled.
    pub fn hermitian_eigenvalues(&self) -> Vec<T> {
        let n = self.dim;
        let m = 2 * n;
        let mut a = vec![T::zero(); m * m];
        for i in 0..n {
            for j in 0..n {
                let h = (self.get(i, j) + self.get(j, i).conj()) * T::half();
                a[i * m + j] = h.re;
                a[(i + n) * m + (j + n)] = h.re;
                a[i * m + (j + n)] = -h.im;
                a[(i + n) * m + j] = h.im;
            }
        }
        let mut eig = symmetric_eigenvalues(&mut a, m);
        eig.sort_by(|x, y| x.partial_cmp(y).expect("finite eigenvalues"));
        eig.into_iter().step_by(2).collect()
    }
}

/// Cyclic Jacobi eigenvalue iteration for a real symmetric `m × m` matrix.
fn symmetric_eigenvalues<T: Real>(a: &mut [T], m: usize) -> Vec<T> {
    let eps = T::epsilon();
    for _sweep in 0..100 {
        let mut off = T::zero();
        let mut total = T::zero();
        for i in 0..m {
            for j in 0..m {
                let v = a[i * m + j] * a[i * m + j];
                total = total + v;
                if i != j {
                    off = off + v;
                }
            }
        }
        if off <= eps * eps * total || off == T::zero() {
            break;
        }
        for p in 0..m {
            for q in (p + 1)..m {
                let apq = a[p * m + q];
                if apq.abs() <= T::min_positive_value() {
                    continue;
                }
                let app = a[p * m + p];
                let aqq = a[q * m + q];
                let theta = (aqq - app) / (T::two() * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..m {
                    let akp = a[k * m + p];
                    let akq = a[k * m + q];
                    a[k * m + p] = c * akp - s * akq;
                    a[k * m + q] = s * akp + c * akq;
                }
                for k in 0..m {
                    let apk = a[p * m + k];
                    let aqk = a[q * m + k];
                    a[p * m + k] = c * apk - s * aqk;
                    a[q * m + k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..m).map(|i| a[i * m + i]).collect()
}

/// Operator on the composite space.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator<T> {
    layout: HilbertLayout,
    matrix: CMatrix<T>,
}

impl<T: Real> Operator<T> {
    pub fn new(layout: HilbertLayout, matrix: CMatrix<T>) -> Result<Self> {
        if matrix.dim() != layout.dim() {
            return Err(SnapError::DimensionMismatch {
                expected: layout.dim(),
                got: matrix.dim(),
            });
        }
        Ok(Self { layout, matrix })
    }

    pub fn layout(&self) -> HilbertLayout {
        self.layout
    }

    pub fn matrix(&self) -> &CMatrix<T> {
        &self.matrix
    }

    pub fn get(&self, i: usize, j: usize) -> C<T> {
        self.matrix.get(i, j)
    }

    pub fn compose(&self, other: &Self) -> Self {
        Self {
            layout: self.layout,
            matrix: self.matrix.matmul(&other.matrix),
        }
    }

    pub fn adjoint(&self) -> Self {
        Self {
            layout: self.layout,
            matrix: self.matrix.adjoint(),
        }
    }

    pub fn apply(&self, state: &QuantumState<T>) -> Result<QuantumState<T>> {
        check_dim(self.layout.dim(), state.amplitudes.len())?;
        Ok(QuantumState {
            layout: self.layout,
            amplitudes: self.matrix.apply(&state.amplitudes),
        })
    }

    /// Builds `Σ_{t,n} f(t, n) |t n⟩⟨t n|`.
    fn diagonal(layout: HilbertLayout, f: impl Fn(usize, usize) -> C<T>) -> Self {
        let matrix = CMatrix::from_fn(layout.dim(), |i, j| {
            if i == j {
                let (t, n) = layout.split(i);
                f(t, n)
            } else {
                C::zero()
            }
        });
        Self { layout, matrix }
    }

    /// Lifts a transmon operator `Σ m_ab |a⟩⟨b|` to `m ⊗ 1_cavity`.
    fn transmon(layout: HilbertLayout, f: impl Fn(usize, usize) -> C<T>) -> Self {
        let matrix = CMatrix::from_fn(layout.dim(), |i, j| {
            let (ti, ni) = layout.split(i);
            let (tj, nj) = layout.split(j);
            if ni == nj {
                f(ti, tj)
            } else {
                C::zero()
            }
        });
        Self { layout, matrix }
    }
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(SnapError::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// The standard operator set on a layout.
///
/// Pauli operators act on the drive pair `g ↔ upper`, where `upper` is `e`
/// for the ge protocol and `f` for the gf protocol. With this orientation
/// `σ_α = σ_x cos α + σ_y sin α = e^{iα}|upper⟩⟨g| + h.c.` and
/// `σ_z = |upper⟩⟨upper| − |g⟩⟨g|`.
#[derive(Clone, Debug)]
pub struct OperatorSet<T> {
    pub layout: HilbertLayout,
    pub upper: Level,
    pub a: Operator<T>,
    pub a_dag: Operator<T>,
    pub number: Operator<T>,
    pub sigma_x: Operator<T>,
    pub sigma_y: Operator<T>,
    pub sigma_z: Operator<T>,
}

impl<T: Real> OperatorSet<T> {
    /// `|i⟩⟨j| ⊗ 1` on the transmon factor.
    pub fn projector(&self, i: Level, j: Level) -> Result<Operator<T>> {
        let levels = self.layout.transmon_levels();
        if i.index() >= levels || j.index() >= levels {
            return Err(SnapError::OutOfRange(format!(
                "|{}⟩⟨{}| on a {levels}-level transmon",
                i.label(),
                j.label()
            )));
        }
        Ok(Operator::transmon(self.layout, |a, b| {
            if a == i.index() && b == j.index() {
                C::one()
            } else {
                C::zero()
            }
        }))
    }

    /// `σ_α = σ_x cos α + σ_y sin α` on the drive pair.
    pub fn sigma_alpha(&self, angle: T) -> Operator<T> {
        let g = Level::G.index();
        let u = self.upper.index();
        let phasor = cis(angle);
        Operator::transmon(self.layout, |a, b| {
            if a == u && b == g {
                phasor
            } else if a == g && b == u {
                phasor.conj()
            } else {
                C::zero()
            }
        })
    }

    pub fn identity(&self) -> Operator<T> {
        Operator {
            layout: self.layout,
            matrix: CMatrix::identity(self.layout.dim()),
        }
    }
}

/// Operator set for the ge drive pair.
pub fn build_operators<T: Real>(layout: HilbertLayout) -> OperatorSet<T> {
    build_operators_for(layout, Level::E).expect("e exists on every layout")
}

/// Operator set whose Pauli operators act on `g ↔ upper`.
pub fn build_operators_for<T: Real>(
    layout: HilbertLayout,
    upper: Level,
) -> Result<OperatorSet<T>> {
    if upper == Level::G || upper.index() >= layout.transmon_levels() {
        return Err(SnapError::OutOfRange(format!(
            "drive level {} on a {}-level transmon",
            upper.label(),
            layout.transmon_levels()
        )));
    }
    let nt = layout.fock_truncation();
    let a_matrix = CMatrix::from_fn(layout.dim(), |i, j| {
        let (ti, ni) = layout.split(i);
        let (tj, nj) = layout.split(j);
        if ti == tj && nj == ni + 1 && nj < nt {
            C::new(T::of(nj).sqrt(), T::zero())
        } else {
            C::zero()
        }
    });
    let a = Operator {
        layout,
        matrix: a_matrix,
    };
    let a_dag = a.adjoint();
    let number = Operator::diagonal(layout, |_, n| C::new(T::of(n), T::zero()));
    let g = Level::G.index();
    let u = upper.index();
    let sigma_x = Operator::transmon(layout, |p, q| {
        if (p == u && q == g) || (p == g && q == u) {
            C::one()
        } else {
            C::zero()
        }
    });
    let sigma_y = Operator::transmon(layout, |p, q| {
        if p == u && q == g {
            C::i()
        } else if p == g && q == u {
            -C::i()
        } else {
            C::zero()
        }
    });
    let sigma_z = Operator::transmon(layout, |p, q| {
        if p == q && p == u {
            C::one()
        } else if p == q && p == g {
            -C::one()
        } else {
            C::zero()
        }
    });
    Ok(OperatorSet {
        layout,
        upper,
        a,
        a_dag,
        number,
        sigma_x,
        sigma_y,
        sigma_z,
    })
}

/// Pure state on the composite space.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantumState<T> {
    layout: HilbertLayout,
    amplitudes: Vec<C<T>>,
}

impl<T: Real> QuantumState<T> {
    pub fn new(layout: HilbertLayout, amplitudes: Vec<C<T>>) -> Result<Self> {
        check_dim(layout.dim(), amplitudes.len())?;
        Ok(Self { layout, amplitudes })
    }

    pub fn zero(layout: HilbertLayout) -> Self {
        Self {
            layout,
            amplitudes: vec![C::zero(); layout.dim()],
        }
    }

    pub fn layout(&self) -> HilbertLayout {
        self.layout
    }

    pub fn amplitudes(&self) -> &[C<T>] {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut [C<T>] {
        &mut self.amplitudes
    }

    pub fn amplitude(&self, level: Level, n: usize) -> C<T> {
        self.amplitudes[self.layout.index(level, n)]
    }

    pub fn norm_sqr(&self) -> T {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn inner(&self, other: &Self) -> Result<C<T>> {
        check_dim(self.amplitudes.len(), other.amplitudes.len())?;
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .fold(C::zero(), |acc, (a, b)| acc + a.conj() * *b))
    }

    pub fn normalized(mut self) -> Result<Self> {
        let norm = self.norm_sqr().sqrt();
        if norm <= T::epsilon() {
            return Err(SnapError::Degenerate("cannot normalize a zero vector".into()));
        }
        for a in &mut self.amplitudes {
            *a = *a / norm;
        }
        Ok(self)
    }

    pub fn to_density_matrix(&self) -> DensityMatrix<T> {
        DensityMatrix {
            layout: self.layout,
            matrix: CMatrix::outer(&self.amplitudes, &self.amplitudes),
        }
    }

    /// `Σ_n c_n |level, n⟩` for an amplitude vector over the low Fock states.
    pub fn cavity_superposition(
        layout: HilbertLayout,
        level: Level,
        coefficients: &[C<T>],
    ) -> Result<Self> {
        let mut state = Self::zero(layout);
        for (n, c) in coefficients.iter().enumerate() {
            let idx = layout.try_index(level, n)?;
            state.amplitudes[idx] = *c;
        }
        Ok(state)
    }
}

/// Unit vector `|level⟩ ⊗ |n⟩`.
pub fn tensor_basis_state<T: Real>(
    layout: HilbertLayout,
    level: Level,
    n: usize,
) -> Result<QuantumState<T>> {
    let idx = layout.try_index(level, n)?;
    let mut state = QuantumState::zero(layout);
    state.amplitudes[idx] = C::one();
    Ok(state)
}

/// Density operator on the composite space.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix<T> {
    layout: HilbertLayout,
    matrix: CMatrix<T>,
}

impl<T: Real> DensityMatrix<T> {
    /// Wraps a matrix without validating it as a state; used for process-map
    /// inputs such as off-diagonal matrix units.
    pub fn from_matrix(layout: HilbertLayout, matrix: CMatrix<T>) -> Result<Self> {
        check_dim(layout.dim(), matrix.dim())?;
        Ok(Self { layout, matrix })
    }

    pub fn layout(&self) -> HilbertLayout {
        self.layout
    }

    pub fn matrix(&self) -> &CMatrix<T> {
        &self.matrix
    }

    pub fn matrix_mut(&mut self) -> &mut CMatrix<T> {
        &mut self.matrix
    }

    pub fn into_matrix(self) -> CMatrix<T> {
        self.matrix
    }

    pub fn get(&self, i: usize, j: usize) -> C<T> {
        self.matrix.get(i, j)
    }

    pub fn element(&self, a: (Level, usize), b: (Level, usize)) -> C<T> {
        self.matrix
            .get(self.layout.index(a.0, a.1), self.layout.index(b.0, b.1))
    }

    pub fn trace(&self) -> C<T> {
        self.matrix.trace()
    }

    pub fn adjoint(&self) -> Self {
        Self {
            layout: self.layout,
            matrix: self.matrix.adjoint(),
        }
    }

    /// Checks Hermiticity, unit trace and positivity with the given tolerances.
    pub fn validate(&self, herm_tol: T, trace_tol: T, eig_tol: T) -> Result<()> {
        let defect = self.matrix.hermiticity_defect();
        if defect > herm_tol {
            return Err(SnapError::InputContract(format!(
                "density matrix not Hermitian (defect {defect})"
            )));
        }
        let tr = self.trace();
        if (tr.re - T::one()).abs() > trace_tol || tr.im.abs() > trace_tol {
            return Err(SnapError::InputContract(format!(
                "density matrix trace {tr} differs from 1"
            )));
        }
        let min = self.min_eigenvalue();
        if min < -eig_tol {
            return Err(SnapError::InputContract(format!(
                "density matrix has eigenvalue {min}"
            )));
        }
        Ok(())
    }

    pub fn min_eigenvalue(&self) -> T {
        self.matrix
            .hermitian_eigenvalues()
            .first()
            .copied()
            .unwrap_or_else(T::zero)
    }

    /// `⟨ψ|ρ|ψ⟩`.
    pub fn overlap(&self, state: &QuantumState<T>) -> Result<T> {
        check_dim(self.layout.dim(), state.amplitudes().len())?;
        let rho_psi = self.matrix.apply(state.amplitudes());
        Ok(state
            .amplitudes()
            .iter()
            .zip(&rho_psi)
            .fold(C::zero(), |acc, (a, b)| acc + a.conj() * *b)
            .re)
    }

    /// Reduced cavity state obtained by tracing out the transmon.
    pub fn cavity_reduced(&self) -> CMatrix<T> {
        let nt = self.layout.fock_truncation();
        CMatrix::from_fn(nt, |m, n| {
            self.layout.levels().fold(C::zero(), |acc, level| {
                acc + self
                    .matrix
                    .get(self.layout.index(level, m), self.layout.index(level, n))
            })
        })
    }

    /// `U ρ U†`.
    pub fn conjugate_by(&self, unitary: &CMatrix<T>) -> Self {
        Self {
            layout: self.layout,
            matrix: unitary.matmul(&self.matrix).matmul(&unitary.adjoint()),
        }
    }
}

/// Anything an expectation value can be taken of.
pub trait Expectation<T: Real> {
    fn expectation(&self, op: &Operator<T>) -> Result<C<T>>;
}

impl<T: Real> Expectation<T> for QuantumState<T> {
    fn expectation(&self, op: &Operator<T>) -> Result<C<T>> {
        let applied = op.apply(self)?;
        self.inner(&applied)
    }
}

impl<T: Real> Expectation<T> for DensityMatrix<T> {
    fn expectation(&self, op: &Operator<T>) -> Result<C<T>> {
        check_dim(self.layout.dim(), op.layout().dim())?;
        Ok(self.matrix.matmul(op.matrix()).trace())
    }
}

/// `⟨ψ|O|ψ⟩` or `Tr(ρ O)`.
pub fn expectation<T: Real, S: Expectation<T>>(state: &S, op: &Operator<T>) -> Result<C<T>> {
    state.expectation(op)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn layout() -> HilbertLayout {
        HilbertLayout::for_modes(2, 3).unwrap()
    }

    #[test]
    fn layout_rejects_bad_shapes() {
        assert!(HilbertLayout::new(4, 5).is_err());
        assert!(HilbertLayout::new(1, 5).is_err());
        assert!(HilbertLayout::with_headroom(2, 3, 1).is_err());
        assert_eq!(layout().fock_truncation(), 7);
        assert!(layout().check_modes(6).is_err());
    }

    #[test]
    fn sigma_alpha_special_angles() {
        let ops = build_operators::<f64>(layout());
        let s0 = ops.sigma_alpha(0.0);
        assert!(s0.matrix().frobenius_distance(ops.sigma_x.matrix()) < 1e-15);
        let s90 = ops.sigma_alpha(PI / 2.0);
        assert!(s90.matrix().frobenius_distance(ops.sigma_y.matrix()) < 1e-15);
        let g0 = layout().index(Level::G, 0);
        let e0 = layout().index(Level::E, 0);
        assert_eq!(s0.get(e0, g0), C::new(1.0, 0.0));
        assert_eq!(s0.get(g0, e0), C::new(1.0, 0.0));
    }

    #[test]
    fn number_operator_diagonal() {
        let l = layout();
        let ops = build_operators::<f64>(l);
        for n in 0..l.fock_truncation() {
            let s = tensor_basis_state::<f64>(l, Level::G, n).unwrap();
            let v = expectation(&s, &ops.number).unwrap();
            assert!((v.re - n as f64).abs() < 1e-15 && v.im == 0.0);
        }
        // a†a equals the composed operator.
        let composed = ops.a_dag.compose(&ops.a);
        assert!(composed.matrix().frobenius_distance(ops.number.matrix()) < 1e-14);
    }

    #[test]
    fn canonical_commutator_below_truncation() {
        let l = layout();
        let ops = build_operators::<f64>(l);
        let comm = ops.a.matrix().commutator(ops.a_dag.matrix());
        for i in 0..l.dim() {
            let (_, n) = l.split(i);
            for j in 0..l.dim() {
                if n + 1 >= l.fock_truncation() {
                    continue;
                }
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((comm.get(i, j) - C::new(expected, 0.0)).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn sigma_alpha_squares_to_identity_on_pair() {
        let l = layout();
        let ops = build_operators::<f64>(l);
        for k in 0..16 {
            let alpha = k as f64 * 0.41 - 3.0;
            let s = ops.sigma_alpha(alpha);
            let sq = s.compose(&s);
            let p = ops.projector(Level::G, Level::G).unwrap().matrix().add(
                ops.projector(Level::E, Level::E).unwrap().matrix(),
            );
            assert!(sq.matrix().frobenius_distance(&p) < 1e-13);
        }
    }

    #[test]
    fn basis_states_orthonormal_and_ordered() {
        let l = HilbertLayout::for_modes(3, 2).unwrap();
        let g0 = tensor_basis_state::<f64>(l, Level::G, 0).unwrap();
        assert_eq!(g0.amplitudes()[0], C::new(1.0, 0.0));
        let e1 = tensor_basis_state::<f64>(l, Level::E, 1).unwrap();
        assert!((e1.norm_sqr() - 1.0).abs() < 1e-15);
        assert_eq!(e1.amplitudes()[l.fock_truncation() + 1], C::new(1.0, 0.0));
        let mut all = Vec::new();
        for level in l.levels() {
            for n in 0..l.fock_truncation() {
                all.push(tensor_basis_state::<f64>(l, level, n).unwrap());
            }
        }
        for (i, a) in all.iter().enumerate() {
            for (j, b) in all.iter().enumerate() {
                let ip = a.inner(b).unwrap();
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((ip - C::new(expected, 0.0)).norm() < 1e-15);
            }
        }
        assert!(tensor_basis_state::<f64>(l, Level::G, 99).is_err());
        let two = HilbertLayout::for_modes(2, 2).unwrap();
        assert!(tensor_basis_state::<f64>(two, Level::F, 0).is_err());
    }

    #[test]
    fn expectation_values() {
        let l = layout();
        let ops = build_operators::<f64>(l);
        let g0 = tensor_basis_state::<f64>(l, Level::G, 0).unwrap();
        assert!((expectation(&g0, &ops.sigma_z).unwrap().re + 1.0).abs() < 1e-15);
        let g1 = tensor_basis_state::<f64>(l, Level::G, 1).unwrap();
        assert!((expectation(&g1, &ops.number).unwrap().re - 1.0).abs() < 1e-15);
        let rho = g1.to_density_matrix();
        let tr = expectation(&rho, &ops.identity()).unwrap();
        assert!((tr.re - 1.0).abs() < 1e-15);
        let wrong = HilbertLayout::for_modes(2, 5).unwrap();
        let other = build_operators::<f64>(wrong);
        assert!(expectation(&g1, &other.number).is_err());
    }

    #[test]
    fn eigenvalues_of_mixed_state() {
        let l = HilbertLayout::for_modes(2, 1).unwrap();
        let mut m = CMatrix::<f64>::zeros(l.dim());
        m.set(0, 0, C::new(0.7, 0.0));
        m.set(1, 1, C::new(0.3, 0.0));
        m.set(0, 1, C::new(0.1, 0.2));
        m.set(1, 0, C::new(0.1, -0.2));
        let ev = m.hermitian_eigenvalues();
        // 2x2 block eigenvalues: 0.5 ± sqrt(0.04 + 0.05)
        let r = (0.04f64 + 0.05).sqrt();
        assert!((ev[ev.len() - 1] - (0.5 + r)).abs() < 1e-12);
        assert!(ev.iter().any(|x| (x - (0.5 - r)).abs() < 1e-12));
        let rho = DensityMatrix::from_matrix(l, m).unwrap();
        assert!(rho.validate(1e-12, 1e-10, 1e-9).is_ok());
    }
}
