//! State-space primitives: vectors on the unit hermitian sphere in ℂ^d,
//! skew-hermitian free-flow matrices, symmetric coupling networks, and
//! N-particle ensembles, plus seeded random generation of all of them.
//!
//! The inner product ⟨w,z⟩ = Σ_α conj(w_α) z_α conjugates the FIRST slot, so
//! ⟨w,z⟩ = conj(⟨z,w⟩) and ⟨z,z⟩ = ‖z‖².

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub type C64 = Complex64;

/// Tolerance for structural matrix checks (skew-hermitian defect, symmetry).
pub const STRUCT_TOL: f64 = 1e-12;

/// Default construction tolerance for unit-norm states.
pub const UNIT_NORM_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum SphereError {
    #[error("vector dimension must be at least 1")]
    EmptyVector,
    #[error("state norm deviates from 1 by {deviation:.3e} (tolerance {tol:.3e})")]
    NotUnitNorm { deviation: f64, tol: f64 },
    #[error("matrix is not skew-hermitian: max |Ω + Ω†| entry = {defect:.3e}")]
    NotSkewHermitian { defect: f64 },
    #[error("coupling matrix is not symmetric: max |a_jk - a_kj| = {defect:.3e}")]
    NotSymmetric { defect: f64 },
    #[error("coupling weight a[{row}][{col}] = {value} is negative")]
    NegativeWeight { row: usize, col: usize, value: f64 },
    #[error("matrix rows have inconsistent lengths")]
    RaggedMatrix,
    #[error("ensemble needs at least one particle")]
    EmptyEnsemble,
    #[error("ensemble states have mixed dimensions")]
    MixedDimensions,
    #[error("spread {spread} outside [0, 2]")]
    BadSpread { spread: f64 },
    #[error("could not realize an ensemble with diameter <= {spread} in {attempts} attempts")]
    SpreadInfeasible { spread: f64, attempts: usize },
}

/// Inner product kernel on raw component slices. Panics on length mismatch:
/// mixing dimensions is a programming error, not a recoverable condition.
#[inline]
pub fn inner_slices(w: &[C64], z: &[C64]) -> C64 {
    assert_eq!(w.len(), z.len(), "inner product dimension mismatch");
    let mut acc = C64::new(0.0, 0.0);
    for (a, b) in w.iter().zip(z.iter()) {
        acc += a.conj() * b;
    }
    acc
}

#[inline]
pub fn norm_slice(z: &[C64]) -> f64 {
    z.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

/// Euclidean distance ‖w − z‖ on raw slices.
#[inline]
pub fn dist_slices(w: &[C64], z: &[C64]) -> f64 {
    assert_eq!(w.len(), z.len(), "distance dimension mismatch");
    w.iter()
        .zip(z.iter())
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// A vector in ℂ^d. General (not necessarily unit-norm); use [`ComplexVec::unit`]
/// when a sphere state is required.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexVec {
    components: Vec<C64>,
}

impl ComplexVec {
    pub fn new(components: Vec<C64>) -> Result<Self, SphereError> {
        if components.is_empty() {
            return Err(SphereError::EmptyVector);
        }
        Ok(Self { components })
    }

    /// A sphere state: enforces |‖z‖ − 1| ≤ norm_tol at construction.
    pub fn unit(components: Vec<C64>, norm_tol: f64) -> Result<Self, SphereError> {
        let v = Self::new(components)?;
        let deviation = (v.norm() - 1.0).abs();
        if deviation > norm_tol {
            return Err(SphereError::NotUnitNorm {
                deviation,
                tol: norm_tol,
            });
        }
        Ok(v)
    }

    pub fn from_real(components: &[f64]) -> Result<Self, SphereError> {
        Self::new(components.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[C64] {
        &self.components
    }

    pub fn norm(&self) -> f64 {
        norm_slice(&self.components)
    }

    pub fn normalized(&self) -> Self {
        let n = self.norm();
        Self {
            components: self.components.iter().map(|c| c / n).collect(),
        }
    }

    pub fn max_imag_abs(&self) -> f64 {
        self.components
            .iter()
            .map(|c| c.im.abs())
            .fold(0.0, f64::max)
    }
}

/// ⟨w,z⟩ with the first slot conjugated.
pub fn inner(w: &ComplexVec, z: &ComplexVec) -> C64 {
    inner_slices(w.components(), z.components())
}

pub fn dist(w: &ComplexVec, z: &ComplexVec) -> f64 {
    dist_slices(w.components(), z.components())
}

/// Dense square complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    dim: usize,
    entries: Vec<C64>,
}

impl ComplexMatrix {
    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            entries: vec![C64::new(0.0, 0.0); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zero(dim);
        for i in 0..dim {
            m.set(i, i, C64::new(1.0, 0.0));
        }
        m
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self, SphereError> {
        let dim = rows.len();
        if dim == 0 {
            return Err(SphereError::EmptyVector);
        }
        let mut entries = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(SphereError::RaggedMatrix);
            }
            entries.extend_from_slice(row);
        }
        Ok(Self { dim, entries })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.entries[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        self.entries[i * self.dim + j] = v;
    }

    /// Matrix-vector product A v into a fresh vector.
    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(v.len(), self.dim, "matrix apply dimension mismatch");
        let mut out = vec![C64::new(0.0, 0.0); self.dim];
        for i in 0..self.dim {
            let mut acc = C64::new(0.0, 0.0);
            let row = &self.entries[i * self.dim..(i + 1) * self.dim];
            for (a, x) in row.iter().zip(v.iter()) {
                acc += a * x;
            }
            out[i] = acc;
        }
        out
    }

    /// Conjugate transpose A†.
    pub fn dagger(&self) -> Self {
        let mut out = Self::zero(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                out.set(j, i, self.get(i, j).conj());
            }
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Operator ∞-norm: max row sum of entry moduli.
    pub fn inf_norm(&self) -> f64 {
        (0..self.dim)
            .map(|i| {
                self.entries[i * self.dim..(i + 1) * self.dim]
                    .iter()
                    .map(|c| c.norm())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            dim: self.dim,
            entries: self.entries.iter().map(|c| c * s).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "matrix subtraction dimension mismatch");
        Self {
            dim: self.dim,
            entries: self
                .entries
                .iter()
                .zip(other.entries.iter())
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn max_imag_abs(&self) -> f64 {
        self.entries.iter().map(|c| c.im.abs()).fold(0.0, f64::max)
    }
}

/// Bound ‖A v‖ ≤ ‖A‖_F ‖v‖ evaluated on concrete inputs; returns
/// (‖A v‖, ‖A‖_F ‖v‖). Used as a cheap a-priori estimate and in tests.
pub fn frobenius_apply_bound(a: &ComplexMatrix, v: &ComplexVec) -> (f64, f64) {
    let image_norm = norm_slice(&a.apply(v.components()));
    (image_norm, a.frobenius_norm() * v.norm())
}

/// Skew-hermitian matrix: Ω + Ω† = 0 within [`STRUCT_TOL`], checked at
/// construction. Generates the isometric free flow e^{Ωt}.
#[derive(Debug, Clone, PartialEq)]
pub struct SkewHermitian {
    matrix: ComplexMatrix,
}

impl SkewHermitian {
    pub fn new(matrix: ComplexMatrix) -> Result<Self, SphereError> {
        let mut defect = 0.0f64;
        for i in 0..matrix.dim() {
            for j in 0..matrix.dim() {
                let s = matrix.get(i, j) + matrix.get(j, i).conj();
                defect = defect.max(s.norm());
            }
        }
        if defect > STRUCT_TOL {
            return Err(SphereError::NotSkewHermitian { defect });
        }
        Ok(Self { matrix })
    }

    /// The planar rotation generator [[0, −ν], [ν, 0]].
    pub fn rotation_2d(nu: f64) -> Self {
        let mut m = ComplexMatrix::zero(2);
        m.set(0, 1, C64::new(-nu, 0.0));
        m.set(1, 0, C64::new(nu, 0.0));
        Self { matrix: m }
    }

    /// Random skew-hermitian matrix: draw B with entries uniform in the
    /// complex unit square, antisymmetrize to (B − B†)/2, then rescale so the
    /// operator ∞-norm equals `inf_norm` (zero stays zero).
    pub fn random(rng: &mut impl Rng, dim: usize, inf_norm: f64) -> Self {
        assert!(dim >= 1, "dimension must be at least 1");
        assert!(inf_norm >= 0.0, "target norm must be non-negative");
        let mut b = ComplexMatrix::zero(dim);
        for i in 0..dim {
            for j in 0..dim {
                b.set(i, j, C64::new(rng.random::<f64>(), rng.random::<f64>()));
            }
        }
        let mut m = ComplexMatrix::zero(dim);
        for i in 0..dim {
            for j in 0..dim {
                m.set(i, j, (b.get(i, j) - b.get(j, i).conj()) * 0.5);
            }
        }
        let current = m.inf_norm();
        let m = if current > 0.0 && inf_norm > 0.0 {
            m.scale(inf_norm / current)
        } else {
            ComplexMatrix::zero(dim)
        };
        Self { matrix: m }
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        self.matrix.apply(v)
    }

    pub fn inf_norm(&self) -> f64 {
        self.matrix.inf_norm()
    }

    /// True when the matrix is real skew-symmetric (imaginary parts below
    /// [`STRUCT_TOL`]); the real-valued model forms require this.
    pub fn is_real(&self) -> bool {
        self.matrix.max_imag_abs() <= STRUCT_TOL
    }
}

/// Symmetric non-negative coupling network a_jk.
#[derive(Debug, Clone, PartialEq)]
pub struct Adjacency {
    n: usize,
    entries: Vec<f64>,
}

impl Adjacency {
    pub fn new(rows: &[Vec<f64>]) -> Result<Self, SphereError> {
        let n = rows.len();
        if n == 0 {
            return Err(SphereError::EmptyEnsemble);
        }
        let mut entries = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(SphereError::RaggedMatrix);
            }
            entries.extend_from_slice(row);
        }
        for i in 0..n {
            for j in 0..n {
                let v = entries[i * n + j];
                if v < 0.0 {
                    return Err(SphereError::NegativeWeight {
                        row: i,
                        col: j,
                        value: v,
                    });
                }
                let defect = (v - entries[j * n + i]).abs();
                if defect > STRUCT_TOL {
                    return Err(SphereError::NotSymmetric { defect });
                }
            }
        }
        Ok(Self { n, entries })
    }

    /// All-ones network (self-weights included; the k = j coupling terms
    /// vanish identically, so the diagonal only enters remainder constants).
    pub fn complete(n: usize) -> Self {
        Self {
            n,
            entries: vec![1.0; n * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.entries[j * self.n + k]
    }

    /// Largest entry max_{j,k} a_jk.
    pub fn max_entry(&self) -> f64 {
        self.entries.iter().copied().fold(0.0, f64::max)
    }

    /// Largest row gap max_{i,j} max_k |a_ik − a_jk|; zero iff all rows agree.
    pub fn max_row_gap(&self) -> f64 {
        let mut gap = 0.0f64;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                for k in 0..self.n {
                    gap = gap.max((self.get(i, k) - self.get(j, k)).abs());
                }
            }
        }
        gap
    }
}

/// A time-stamped ensemble of N sphere states in ℂ^d, stored as one flat
/// particle-major buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    time: f64,
    n: usize,
    d: usize,
    data: Vec<C64>,
}

impl Ensemble {
    /// Builds an ensemble from per-particle states, enforcing equal dimensions
    /// and unit norms within `norm_tol`.
    pub fn new(time: f64, states: &[ComplexVec], norm_tol: f64) -> Result<Self, SphereError> {
        if states.is_empty() {
            return Err(SphereError::EmptyEnsemble);
        }
        let d = states[0].dim();
        let mut data = Vec::with_capacity(states.len() * d);
        for s in states {
            if s.dim() != d {
                return Err(SphereError::MixedDimensions);
            }
            let deviation = (s.norm() - 1.0).abs();
            if deviation > norm_tol {
                return Err(SphereError::NotUnitNorm {
                    deviation,
                    tol: norm_tol,
                });
            }
            data.extend_from_slice(s.components());
        }
        Ok(Self {
            time,
            n: states.len(),
            d,
            data,
        })
    }

    /// Wraps a flat particle-major buffer without norm checks. The integrator
    /// owns drift control, so its intermediate ensembles bypass the
    /// construction tolerance.
    pub fn from_flat(time: f64, n: usize, d: usize, data: Vec<C64>) -> Self {
        assert_eq!(data.len(), n * d, "flat ensemble buffer length mismatch");
        assert!(n >= 1 && d >= 1, "ensemble shape must be at least 1x1");
        Self { time, n, d, data }
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn set_time(&mut self, t: f64) {
        self.time = t;
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn state(&self, j: usize) -> &[C64] {
        &self.data[j * self.d..(j + 1) * self.d]
    }

    pub fn states(&self) -> impl Iterator<Item = &[C64]> {
        self.data.chunks_exact(self.d)
    }

    pub fn flat(&self) -> &[C64] {
        &self.data
    }

    pub fn flat_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    /// Centroid z_c = (1/N) Σ_k z_k.
    pub fn centroid(&self) -> Vec<C64> {
        let mut c = vec![C64::new(0.0, 0.0); self.d];
        for s in self.states() {
            for (acc, z) in c.iter_mut().zip(s.iter()) {
                *acc += z;
            }
        }
        let inv = 1.0 / self.n as f64;
        for acc in c.iter_mut() {
            *acc *= inv;
        }
        c
    }

    /// max_j |‖z_j‖ − 1|.
    pub fn max_norm_deviation(&self) -> f64 {
        self.states()
            .map(|s| (norm_slice(s) - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_imag_abs(&self) -> f64 {
        self.data.iter().map(|c| c.im.abs()).fold(0.0, f64::max)
    }

    /// Renormalizes every particle onto the sphere in place.
    pub fn project(&mut self) {
        for j in 0..self.n {
            let s = &mut self.data[j * self.d..(j + 1) * self.d];
            let norm = norm_slice(s);
            for c in s.iter_mut() {
                *c /= norm;
            }
        }
    }
}

fn random_unit_vector(rng: &mut impl Rng, d: usize, real: bool) -> Vec<C64> {
    loop {
        let v: Vec<C64> = (0..d)
            .map(|_| {
                let re = rng.random_range(-1.0..1.0);
                let im = if real { 0.0 } else { rng.random_range(-1.0..1.0) };
                C64::new(re, im)
            })
            .collect();
        let n = norm_slice(&v);
        // Reject near-zero draws; normalizing them would amplify noise.
        if n > 1e-3 {
            return v.iter().map(|c| c / n).collect();
        }
    }
}

fn random_ensemble_impl(
    seed: u64,
    n: usize,
    d: usize,
    spread: f64,
    real: bool,
) -> Result<Ensemble, SphereError> {
    if !(0.0..=2.0).contains(&spread) || !spread.is_finite() {
        return Err(SphereError::BadSpread { spread });
    }
    assert!(n >= 1 && d >= 1, "ensemble shape must be at least 1x1");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = random_unit_vector(&mut rng, d, real);
    if spread == 0.0 {
        let mut data = Vec::with_capacity(n * d);
        for _ in 0..n {
            data.extend_from_slice(&base);
        }
        return Ok(Ensemble::from_flat(0.0, n, d, data));
    }
    const ATTEMPTS: usize = 64;
    let mut radius = 0.35 * spread;
    for _ in 0..ATTEMPTS {
        let mut data = Vec::with_capacity(n * d);
        for _ in 0..n {
            let dir = random_unit_vector(&mut rng, d, real);
            let scale = radius * rng.random::<f64>();
            let v: Vec<C64> = base
                .iter()
                .zip(dir.iter())
                .map(|(b, u)| b + u * scale)
                .collect();
            let norm = norm_slice(&v);
            data.extend(v.iter().map(|c| c / norm));
        }
        let e = Ensemble::from_flat(0.0, n, d, data);
        if ensemble_diameter(&e) <= spread {
            return Ok(e);
        }
        radius *= 0.8;
    }
    Err(SphereError::SpreadInfeasible {
        spread,
        attempts: ATTEMPTS,
    })
}

/// Seeded random ensemble with pairwise diameter at most `spread`: perturbs a
/// random base point and renormalizes, rejecting draws that exceed the spread.
/// Identical seeds reproduce identical ensembles bitwise.
pub fn random_ensemble(seed: u64, n: usize, d: usize, spread: f64) -> Result<Ensemble, SphereError> {
    random_ensemble_impl(seed, n, d, spread, false)
}

/// As [`random_ensemble`] but with all imaginary parts exactly zero, for the
/// real-valued model forms.
pub fn random_real_ensemble(
    seed: u64,
    n: usize,
    d: usize,
    spread: f64,
) -> Result<Ensemble, SphereError> {
    random_ensemble_impl(seed, n, d, spread, true)
}

// Local copy of the diameter to keep sphere self-contained; the diagnostics
// module re-exports the public version.
pub(crate) fn ensemble_diameter(e: &Ensemble) -> f64 {
    let mut max = 0.0f64;
    for i in 0..e.n() {
        for j in (i + 1)..e.n() {
            max = max.max(dist_slices(e.state(i), e.state(j)));
        }
    }
    max
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn inner_conjugates_first_slot() {
        // ⟨(i), (1)⟩ = conj(i)·1 = −i
        let w = ComplexVec::new(vec![c(0.0, 1.0)]).unwrap();
        let z = ComplexVec::new(vec![c(1.0, 0.0)]).unwrap();
        let g = inner(&w, &z);
        assert_eq!(g, c(0.0, -1.0));
    }

    #[test]
    fn inner_self_is_norm_squared() {
        let z = ComplexVec::new(vec![c(0.6, 0.0), c(0.0, 0.8)]).unwrap();
        let g = inner(&z, &z);
        assert!((g.re - 1.0).abs() < 1e-15);
        assert_eq!(g.im, 0.0);
    }

    #[test]
    #[should_panic(expected = "dimension mismatch")]
    fn inner_panics_on_dimension_mismatch() {
        let w = ComplexVec::new(vec![c(1.0, 0.0)]).unwrap();
        let z = ComplexVec::new(vec![c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
        let _ = inner(&w, &z);
    }

    #[test]
    fn unit_constructor_enforces_tolerance() {
        assert!(ComplexVec::unit(vec![c(1.0, 0.0)], UNIT_NORM_TOL).is_ok());
        let err = ComplexVec::unit(vec![c(1.1, 0.0)], UNIT_NORM_TOL).unwrap_err();
        assert!(matches!(err, SphereError::NotUnitNorm { .. }));
    }

    #[test]
    fn rotation_generator_is_skew() {
        let omega = SkewHermitian::rotation_2d(1.0);
        assert_eq!(omega.inf_norm(), 1.0);
        assert!(omega.is_real());
        // Direct skew check through the validating constructor.
        assert!(SkewHermitian::new(omega.matrix().clone()).is_ok());
    }

    #[test]
    fn skew_hermitian_rejects_hermitian() {
        let m = ComplexMatrix::identity(2);
        let err = SkewHermitian::new(m).unwrap_err();
        assert!(matches!(err, SphereError::NotSkewHermitian { .. }));
    }

    #[test]
    fn random_skew_hermitian_hits_requested_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for d in 1..=4 {
            let omega = SkewHermitian::random(&mut rng, d, 2.5);
            assert!((omega.inf_norm() - 2.5).abs() < 1e-12, "d = {d}");
            // Structural invariant survives scaling.
            assert!(SkewHermitian::new(omega.matrix().clone()).is_ok());
        }
    }

    #[test]
    fn skew_quadratic_form_is_purely_imaginary() {
        // Re⟨Ωz, z⟩ = 0: the mechanism behind norm conservation.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let omega = SkewHermitian::random(&mut rng, 3, 1.0);
            let z = random_unit_vector(&mut rng, 3, false);
            let oz = omega.apply(&z);
            let g = inner_slices(&oz, &z);
            assert!(g.re.abs() <= 1e-12, "Re⟨Ωz,z⟩ = {}", g.re);
        }
    }

    #[test]
    fn frobenius_bound_holds_on_rotation() {
        let a = SkewHermitian::rotation_2d(1.0);
        let v = ComplexVec::from_real(&[1.0, 0.0]).unwrap();
        let (image, bound) = frobenius_apply_bound(a.matrix(), &v);
        assert!((image - 1.0).abs() < 1e-15);
        assert!((bound - std::f64::consts::SQRT_2).abs() < 1e-15);
        assert!(image <= bound);
    }

    #[test]
    fn adjacency_validation() {
        assert!(Adjacency::new(&[vec![0.0, 1.0], vec![1.0, 0.0]]).is_ok());
        let asym = Adjacency::new(&[vec![0.0, 1.0], vec![0.5, 0.0]]).unwrap_err();
        assert!(matches!(asym, SphereError::NotSymmetric { .. }));
        let neg = Adjacency::new(&[vec![0.0, -1.0], vec![-1.0, 0.0]]).unwrap_err();
        assert!(matches!(neg, SphereError::NegativeWeight { .. }));
    }

    #[test]
    fn complete_graph_has_no_row_gap() {
        let a = Adjacency::complete(4);
        assert_eq!(a.max_entry(), 1.0);
        assert_eq!(a.max_row_gap(), 0.0);
    }

    #[test]
    fn ensemble_flat_layout_round_trips() {
        let states = vec![
            ComplexVec::from_real(&[1.0, 0.0]).unwrap(),
            ComplexVec::new(vec![c(0.0, 0.0), c(0.0, 1.0)]).unwrap(),
        ];
        let e = Ensemble::new(0.5, &states, UNIT_NORM_TOL).unwrap();
        assert_eq!(e.n(), 2);
        assert_eq!(e.dim(), 2);
        assert_eq!(e.time(), 0.5);
        assert_eq!(e.state(0), states[0].components());
        assert_eq!(e.state(1), states[1].components());
    }

    #[test]
    fn ensemble_rejects_norm_violations() {
        let states = vec![ComplexVec::from_real(&[0.9, 0.0]).unwrap()];
        let err = Ensemble::new(0.0, &states, UNIT_NORM_TOL).unwrap_err();
        assert!(matches!(err, SphereError::NotUnitNorm { .. }));
    }

    #[test]
    fn random_ensemble_is_deterministic_and_within_spread() {
        let a = random_ensemble(11, 6, 3, 0.25).unwrap();
        let b = random_ensemble(11, 6, 3, 0.25).unwrap();
        assert_eq!(a, b);
        assert!(ensemble_diameter(&a) <= 0.25);
        assert!(a.max_norm_deviation() <= 1e-12);
        let c = random_ensemble(12, 6, 3, 0.25).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn random_ensemble_zero_spread_collapses() {
        let e = random_ensemble(3, 4, 2, 0.0).unwrap();
        assert_eq!(ensemble_diameter(&e), 0.0);
    }

    #[test]
    fn random_real_ensemble_has_no_imaginary_part() {
        let e = random_real_ensemble(5, 4, 2, 0.3).unwrap();
        assert_eq!(e.max_imag_abs(), 0.0);
        assert!(ensemble_diameter(&e) <= 0.3);
    }

    #[test]
    fn random_ensemble_rejects_bad_spread() {
        assert!(matches!(
            random_ensemble(1, 2, 2, -0.1).unwrap_err(),
            SphereError::BadSpread { .. }
        ));
        assert!(matches!(
            random_ensemble(1, 2, 2, 2.5).unwrap_err(),
            SphereError::BadSpread { .. }
        ));
    }

    #[test]
    fn centroid_of_orthogonal_pair() {
        let states = vec![
            ComplexVec::from_real(&[1.0, 0.0]).unwrap(),
            ComplexVec::from_real(&[0.0, 1.0]).unwrap(),
        ];
        let e = Ensemble::new(0.0, &states, UNIT_NORM_TOL).unwrap();
        let zc = e.centroid();
        assert_eq!(zc, vec![c(0.5, 0.0), c(0.5, 0.0)]);
    }
}
