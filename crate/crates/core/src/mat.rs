//! Dense complex matrices and the exact linear-algebra primitives the rest
//! of the crate is built on.
//!
//! Everything downstream (operator bases, channels, measurement, inversion)
//! manipulates small dense N x N complex matrices, so this module keeps the
//! representation deliberately simple: a row-major `Vec<Complex64>` with the
//! dimension carried alongside. Heavy decompositions (Hermitian eigenvalues,
//! singular values) are delegated to nalgebra.
//!
//! Index convention: public accessors are 0-based. Physics-facing modules
//! that speak in 1-based level indices (|j><k| with j,k starting at 1) do
//! the conversion at their own boundary and say so in their docs.

use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::de::Error as DeError;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{CoreError, Result};
use crate::numeric::CompensatedSum;

/// Default tolerance for Hermiticity, trace, and positivity validation.
///
/// Chosen to sit far above double-precision accumulation error at the
/// matrix sizes this crate handles, and far below any physical signal.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Dense square complex matrix, row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    /// Zero matrix of size `dim` x `dim`. Dimensions below 2 are rejected;
    /// nothing in this domain is scalar.
    pub fn zeros(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(CoreError::InvalidDimension(dim));
        }
        Ok(Self {
            dim,
            data: vec![Complex64::new(0.0, 0.0); dim * dim],
        })
    }

    /// Identity matrix.
    pub fn identity(dim: usize) -> Result<Self> {
        let mut m = Self::zeros(dim)?;
        for i in 0..dim {
            m.set(i, i, Complex64::new(1.0, 0.0));
        }
        Ok(m)
    }

    /// All-ones matrix. This is what a dephasing multiplier looks like at
    /// t = 0, so it shows up in several identity checks.
    pub fn ones(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(CoreError::InvalidDimension(dim));
        }
        Ok(Self {
            dim,
            data: vec![Complex64::new(1.0, 0.0); dim * dim],
        })
    }

    /// Build a matrix by evaluating `f(row, col)` at every position.
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Result<Self> {
        let mut m = Self::zeros(dim)?;
        for r in 0..dim {
            for c in 0..dim {
                m.set(r, c, f(r, c));
            }
        }
        Ok(m)
    }

    /// Build from a flat row-major slice. Length must be a perfect square
    /// of the dimension.
    pub fn from_row_major(dim: usize, data: &[Complex64]) -> Result<Self> {
        if dim < 2 {
            return Err(CoreError::InvalidDimension(dim));
        }
        if data.len() != dim * dim {
            return Err(CoreError::DimMismatch {
                expected: dim * dim,
                got: data.len(),
            });
        }
        Ok(Self {
            dim,
            data: data.to_vec(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Row-major view of the raw entries.
    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    /// Entry at `(row, col)`.
    ///
    /// # Panics
    /// Panics if either index is outside `[0, dim)`. Out-of-range access is
    /// always a caller bug here, never something to paper over.
    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        assert!(
            row < self.dim && col < self.dim,
            "matrix index ({row},{col}) out of range for dim {}",
            self.dim
        );
        self.data[row * self.dim + col]
    }

    /// Overwrite the entry at `(row, col)`.
    ///
    /// # Panics
    /// Panics if either index is outside `[0, dim)`.
    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: Complex64) {
        assert!(
            row < self.dim && col < self.dim,
            "matrix index ({row},{col}) out of range for dim {}",
            self.dim
        );
        self.data[row * self.dim + col] = value;
    }

    /// Entrywise sum.
    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_dim(other)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        Ok(Self {
            dim: self.dim,
            data,
        })
    }

    /// Entrywise difference.
    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_dim(other)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Self {
            dim: self.dim,
            data,
        })
    }

    /// Multiply every entry by a complex scalar.
    pub fn scale(&self, s: Complex64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|a| a * s).collect(),
        }
    }

    /// Ordinary matrix product `self * other`.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        self.check_same_dim(other)?;
        let n = self.dim;
        let mut out = Self::zeros(n)?;
        for r in 0..n {
            for c in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for k in 0..n {
                    acc += self.get(r, k) * other.get(k, c);
                }
                out.set(r, c, acc);
            }
        }
        Ok(out)
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> Self {
        let n = self.dim;
        let mut out = Self {
            dim: n,
            data: vec![Complex64::new(0.0, 0.0); n * n],
        };
        for r in 0..n {
            for c in 0..n {
                out.set(c, r, self.get(r, c).conj());
            }
        }
        out
    }

    /// Transpose without conjugation.
    pub fn transpose(&self) -> Self {
        let n = self.dim;
        let mut out = Self {
            dim: n,
            data: vec![Complex64::new(0.0, 0.0); n * n],
        };
        for r in 0..n {
            for c in 0..n {
                out.set(c, r, self.get(r, c));
            }
        }
        out
    }

    /// Sum of diagonal entries.
    pub fn trace(&self) -> Complex64 {
        let mut re = CompensatedSum::new();
        let mut im = CompensatedSum::new();
        for i in 0..self.dim {
            let d = self.get(i, i);
            re.add(d.re);
            im.add(d.im);
        }
        Complex64::new(re.value(), im.value())
    }

    /// Largest entry magnitude. Used as a max-norm for deviation checks.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Frobenius norm.
    pub fn frobenius_norm(&self) -> f64 {
        let mut acc = CompensatedSum::new();
        for z in &self.data {
            acc.add_product(z.re, z.re);
            acc.add_product(z.im, z.im);
        }
        acc.value().sqrt()
    }

    /// Largest entrywise deviation from the conjugate transpose,
    /// `max |m[r][c] - conj(m[c][r])|`. Zero for an exactly Hermitian matrix.
    pub fn hermitian_deviation(&self) -> f64 {
        let n = self.dim;
        let mut dev: f64 = 0.0;
        for r in 0..n {
            for c in r..n {
                let d = self.get(r, c) - self.get(c, r).conj();
                dev = dev.max(d.norm());
            }
        }
        dev
    }

    /// Hermiticity test against an absolute entrywise tolerance.
    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_deviation() <= tol
    }

    /// Eigenvalues of a Hermitian matrix, ascending. The input is symmetrized
    /// as (m + m†)/2 first so that floating-point asymmetry on the order of
    /// rounding error cannot leak into the decomposition.
    pub fn hermitian_eigenvalues(&self) -> Vec<f64> {
        let herm = self.add(&self.dagger()).expect("same dim").scale(Complex64::new(0.5, 0.0));
        let na = herm.to_nalgebra();
        let eig = na.symmetric_eigen();
        let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        vals.sort_by(|a, b| a.partial_cmp(b).expect("eigenvalues are finite"));
        vals
    }

    /// Singular values, descending.
    pub fn singular_values(&self) -> Vec<f64> {
        let na = self.to_nalgebra();
        let svd = na.svd(false, false);
        let mut vals: Vec<f64> = svd.singular_values.iter().copied().collect();
        vals.sort_by(|a, b| b.partial_cmp(a).expect("singular values are finite"));
        vals
    }

    pub(crate) fn to_nalgebra(&self) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.dim, self.dim, |r, c| self.get(r, c))
    }

    pub(crate) fn from_nalgebra(m: &DMatrix<Complex64>) -> Result<Self> {
        let dim = m.nrows();
        if m.ncols() != dim {
            return Err(CoreError::DimMismatch {
                expected: dim,
                got: m.ncols(),
            });
        }
        Self::from_fn(dim, |r, c| m[(r, c)])
    }

    fn check_same_dim(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim {
            return Err(CoreError::DimMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        Ok(())
    }
}

impl fmt::Display for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in 0..self.dim {
            for c in 0..self.dim {
                let z = self.get(r, c);
                write!(f, "{:>12.5}{:+.5}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// JSON shape for matrices: a `dim` field plus row-major nested arrays of
/// `[re, im]` pairs. Kept as a separate struct so the wire format stays
/// decoupled from the in-memory layout.
#[derive(Serialize, Deserialize)]
struct MatrixRepr {
    dim: usize,
    entries: Vec<Vec<[f64; 2]>>,
}

impl Serialize for ComplexMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let entries = (0..self.dim)
            .map(|r| {
                (0..self.dim)
                    .map(|c| {
                        let z = self.get(r, c);
                        [z.re, z.im]
                    })
                    .collect()
            })
            .collect();
        MatrixRepr {
            dim: self.dim,
            entries,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ComplexMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = MatrixRepr::deserialize(deserializer)?;
        if repr.dim < 2 {
            return Err(D::Error::custom(format!(
                "matrix dimension must be at least 2, got {}",
                repr.dim
            )));
        }
        if repr.entries.len() != repr.dim {
            return Err(D::Error::custom(format!(
                "expected {} rows, got {}",
                repr.dim,
                repr.entries.len()
            )));
        }
        for (r, row) in repr.entries.iter().enumerate() {
            if row.len() != repr.dim {
                return Err(D::Error::custom(format!(
                    "ragged matrix rows: row {} has {} entries, expected {}",
                    r,
                    row.len(),
                    repr.dim
                )));
            }
        }
        let mut m = ComplexMatrix::zeros(repr.dim).map_err(D::Error::custom)?;
        for (r, row) in repr.entries.iter().enumerate() {
            for (c, pair) in row.iter().enumerate() {
                m.set(r, c, Complex64::new(pair[0], pair[1]));
            }
        }
        Ok(m)
    }
}

/// Entrywise (Schur) product of two equal-dimension matrices.
pub fn hadamard_product(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    if a.dim() != b.dim() {
        return Err(CoreError::DimMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    let data = a
        .data
        .iter()
        .zip(&b.data)
        .map(|(x, y)| x * y)
        .collect::<Vec<_>>();
    ComplexMatrix::from_row_major(a.dim(), &data)
}

/// Tr{a * b} without forming the product matrix.
///
/// The sum runs over dim^2 complex terms, so the real and imaginary parts
/// are accumulated with compensated products. Expectation values feed
/// linear systems whose conditioning can exceed 1e8; a plain left-to-right
/// sum would waste digits the inversion step cannot afford to lose.
pub fn trace_inner_product(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<Complex64> {
    if a.dim() != b.dim() {
        return Err(CoreError::DimMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    let n = a.dim();
    let mut re = CompensatedSum::new();
    let mut im = CompensatedSum::new();
    for i in 0..n {
        for j in 0..n {
            let x = a.get(i, j);
            let y = b.get(j, i);
            // (xr + i xi)(yr + i yi), each partial product tracked exactly
            re.add_product(x.re, y.re);
            re.add_product(-x.im, y.im);
            im.add_product(x.re, y.im);
            im.add_product(x.im, y.re);
        }
    }
    Ok(Complex64::new(re.value(), im.value()))
}

/// Outcome of a positive-semidefiniteness check.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PsdReport {
    /// True when the minimum eigenvalue is at least `-tol`.
    pub psd: bool,
    /// The minimum eigenvalue itself, as a quantitative margin.
    pub min_eigenvalue: f64,
}

/// Check positive semidefiniteness of a Hermitian matrix.
///
/// Judged on the minimum eigenvalue rather than Cholesky success so that
/// callers get a number to report, not just a verdict. Inputs that are not
/// Hermitian within `tol` are rejected.
pub fn is_psd(m: &ComplexMatrix, tol: f64) -> Result<PsdReport> {
    let dev = m.hermitian_deviation();
    if dev > tol {
        return Err(CoreError::NotHermitian { max_dev: dev, tol });
    }
    let min_eigenvalue = m.hermitian_eigenvalues()[0];
    Ok(PsdReport {
        psd: min_eigenvalue >= -tol,
        min_eigenvalue,
    })
}

/// A validated quantum state: Hermitian, unit trace, positive semidefinite,
/// each within the tolerance supplied at construction.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct DensityMatrix {
    mat: ComplexMatrix,
}

impl DensityMatrix {
    /// Validate with the default tolerance of `1e-9`.
    pub fn new(mat: ComplexMatrix) -> Result<Self> {
        Self::with_tolerance(mat, DEFAULT_TOL)
    }

    /// Validate with an explicit tolerance applied to all three conditions:
    /// Hermiticity, trace one, and minimum eigenvalue at least `-tol`.
    pub fn with_tolerance(mat: ComplexMatrix, tol: f64) -> Result<Self> {
        let dev = mat.hermitian_deviation();
        if dev > tol {
            return Err(CoreError::NotHermitian { max_dev: dev, tol });
        }
        let tr = mat.trace();
        if (tr.re - 1.0).abs() > tol || tr.im.abs() > tol {
            return Err(CoreError::InvalidDensity {
                reason: format!("trace is {:.12}{:+.3e}i, expected 1", tr.re, tr.im),
            });
        }
        let min_eig = mat.hermitian_eigenvalues()[0];
        if min_eig < -tol {
            return Err(CoreError::InvalidDensity {
                reason: format!("minimum eigenvalue {min_eig:.6e} is below -{tol:.1e}"),
            });
        }
        Ok(Self { mat })
    }

    /// Wrap a matrix that is Hermitian with unit trace by construction but
    /// may have lost positivity, for instance the output of a channel whose
    /// multiplier failed its own positivity condition. Crate-internal:
    /// public constructors always validate.
    pub(crate) fn from_hermitian_unit_trace(mat: ComplexMatrix) -> Self {
        debug_assert!(mat.hermitian_deviation() <= 1e-9);
        debug_assert!((mat.trace().re - 1.0).abs() <= 1e-9);
        Self { mat }
    }

    pub fn mat(&self) -> &ComplexMatrix {
        &self.mat
    }

    pub fn dim(&self) -> usize {
        self.mat.dim()
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.mat
    }
}

impl<'de> Deserialize<'de> for DensityMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let mat = ComplexMatrix::deserialize(deserializer)?;
        DensityMatrix::new(mat).map_err(|e| D::Error::custom(e.to_string()))
    }
}

/// A labeled Hermitian operator, the thing one measures.
#[derive(Debug, Clone)]
pub struct HermitianObservable {
    mat: ComplexMatrix,
    label: String,
}

impl HermitianObservable {
    pub fn new(label: impl Into<String>, mat: ComplexMatrix) -> Result<Self> {
        let dev = mat.hermitian_deviation();
        if dev > DEFAULT_TOL {
            return Err(CoreError::NotHermitian {
                max_dev: dev,
                tol: DEFAULT_TOL,
            });
        }
        Ok(Self {
            mat,
            label: label.into(),
        })
    }

    pub fn mat(&self) -> &ComplexMatrix {
        &self.mat
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

/// Draw a random density matrix from the Ginibre construction: fill G with
/// independent standard complex Gaussians, then form G G† / Tr(G G†).
///
/// The result is exactly Hermitian and unit-trace up to rounding, positive
/// semidefinite by its Gram-matrix form, and bitwise reproducible for a
/// fixed seed.
pub fn random_density_matrix(dim: usize, seed: u64) -> Result<DensityMatrix> {
    if dim < 2 {
        return Err(CoreError::InvalidDimension(dim));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = StandardNormal;
    let mut g = ComplexMatrix::zeros(dim)?;
    for r in 0..dim {
        for c in 0..dim {
            let re: f64 = normal.sample(&mut rng);
            let im: f64 = normal.sample(&mut rng);
            g.set(r, c, Complex64::new(re, im));
        }
    }
    let gram = g.matmul(&g.dagger())?;
    let tr = gram.trace().re;
    let mat = gram.scale(Complex64::new(1.0 / tr, 0.0));
    // The scaled Gram matrix can miss the validation tolerance only through
    // rounding on the order of machine epsilon, far inside the default tol.
    DensityMatrix::new(mat)
}

/// Distances between two states, reported in the two norms used for
/// round-trip scoring.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StateDistance {
    /// Half the sum of singular values of the difference. In [0, 1].
    pub trace_distance: f64,
    /// Frobenius norm of the difference. In [0, sqrt(2)].
    pub hs_distance: f64,
}

/// Trace distance and Hilbert-Schmidt distance between two states.
pub fn state_distance(a: &DensityMatrix, b: &DensityMatrix) -> Result<StateDistance> {
    let diff = a.mat().sub(b.mat())?;
    // The difference of two Hermitian matrices is Hermitian, so its
    // singular values are the absolute eigenvalues.
    let eigs = diff.hermitian_eigenvalues();
    let trace_distance = 0.5 * eigs.iter().map(|e| e.abs()).sum::<f64>();
    let hs_distance = diff.frobenius_norm();
    Ok(StateDistance {
        trace_distance,
        hs_distance,
    })
}

/// Uhlmann fidelity between two states: the squared trace of
/// sqrt(sqrt(a) b sqrt(a)). One for identical states, zero for states
/// with orthogonal support, |<psi|phi>|^2 for pure states.
pub fn fidelity(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    let n = a.dim();
    if b.dim() != n {
        return Err(CoreError::DimMismatch {
            expected: n,
            got: b.dim(),
        });
    }
    // Matrix square root of `a` through its spectral decomposition.
    // Rounding can leave eigenvalues a hair below zero; clip them so the
    // root stays real.
    let eig = a.mat().to_nalgebra().symmetric_eigen();
    let roots: Vec<f64> = eig
        .eigenvalues
        .iter()
        .map(|&l| l.max(0.0).sqrt())
        .collect();
    let diag = DMatrix::<Complex64>::from_fn(n, n, |r, c| {
        if r == c {
            Complex64::new(roots[r], 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let sqrt_a = &eig.eigenvectors * diag * eig.eigenvectors.adjoint();
    let inner = &sqrt_a * b.mat().to_nalgebra() * &sqrt_a;
    let root_sum: f64 = ComplexMatrix::from_nalgebra(&inner)?
        .hermitian_eigenvalues()
        .iter()
        .map(|&l| l.max(0.0).sqrt())
        .sum();
    Ok((root_sum * root_sum).min(1.0))
}
