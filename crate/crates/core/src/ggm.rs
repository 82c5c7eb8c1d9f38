//! Generalized Gell-Mann (GGM) operator bases and Bloch-vector conversion.
//!
//! For an N-level system the N^2 - 1 GGM matrices extend the Pauli (N = 2)
//! and Gell-Mann (N = 3) families: symmetric and antisymmetric off-diagonal
//! generators for every level pair plus N - 1 traceless diagonal ones. They
//! are Hermitian, traceless, and orthogonal under the trace inner product
//! with normalization Tr{G_a G_b} = 2 delta_ab, which makes the expansion
//!
//!   rho = I/N + (1/2) sum_a s_a G_a,   s_a = Tr{G_a rho}
//!
//! an exact, invertible coordinate change between density matrices and real
//! Bloch vectors. Reconstruction works entirely in these coordinates.
//!
//! Index convention: generator indices are 1-based (level pairs (j,k) with
//! 1 <= j < k <= N, diagonal index 1 <= l <= N-1) to match the standard
//! formulas; storage inside matrices is 0-based.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use serde::de::Error as DeError;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{CoreError, Result};
use crate::mat::{is_psd, trace_inner_product, ComplexMatrix, DensityMatrix, HermitianObservable, PsdReport, DEFAULT_TOL};

/// Which of the three GGM families a generator belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GgmKind {
    /// |j><k| + |k><j|
    Symmetric,
    /// -i|j><k| + i|k><j|
    Antisymmetric,
    /// sqrt(2/(l(l+1))) (sum_{j<=l} |j><j| - l |l+1><l+1|)
    Diagonal,
}

/// Index of a single GGM generator within dimension `dim`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GgmIndex {
    kind: GgmKind,
    /// Level pair (j, k) for off-diagonal kinds, (l, 0) for diagonal.
    j: usize,
    k: usize,
    dim: usize,
}

impl GgmIndex {
    /// Symmetric generator for the level pair (j, k), 1 <= j < k <= dim.
    pub fn symmetric(j: usize, k: usize, dim: usize) -> Result<Self> {
        Self::check_pair(j, k, dim)?;
        Ok(Self {
            kind: GgmKind::Symmetric,
            j,
            k,
            dim,
        })
    }

    /// Antisymmetric generator for the level pair (j, k), 1 <= j < k <= dim.
    pub fn antisymmetric(j: usize, k: usize, dim: usize) -> Result<Self> {
        Self::check_pair(j, k, dim)?;
        Ok(Self {
            kind: GgmKind::Antisymmetric,
            j,
            k,
            dim,
        })
    }

    /// Diagonal generator with index 1 <= l <= dim - 1.
    pub fn diagonal(l: usize, dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(CoreError::InvalidDimension(dim));
        }
        if l < 1 || l > dim - 1 {
            return Err(CoreError::IndexOutOfRange(format!(
                "diagonal GGM index l={l} outside 1..={} for dim {dim}",
                dim - 1
            )));
        }
        Ok(Self {
            kind: GgmKind::Diagonal,
            j: l,
            k: 0,
            dim,
        })
    }

    fn check_pair(j: usize, k: usize, dim: usize) -> Result<()> {
        if dim < 2 {
            return Err(CoreError::InvalidDimension(dim));
        }
        if j < 1 || k <= j || k > dim {
            return Err(CoreError::IndexOutOfRange(format!(
                "GGM level pair ({j},{k}) must satisfy 1 <= j < k <= {dim}"
            )));
        }
        Ok(())
    }

    pub fn kind(&self) -> GgmKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Level pair for off-diagonal generators. None for diagonal ones.
    pub fn pair(&self) -> Option<(usize, usize)> {
        match self.kind {
            GgmKind::Diagonal => None,
            _ => Some((self.j, self.k)),
        }
    }

    /// Diagonal index l. None for off-diagonal generators.
    pub fn diag_index(&self) -> Option<usize> {
        match self.kind {
            GgmKind::Diagonal => Some(self.j),
            _ => None,
        }
    }

    /// Compact text form used as observable label and report key,
    /// for instance `Ls_1_2`, `La_2_4`, `Ld_3`.
    pub fn label(&self) -> String {
        match self.kind {
            GgmKind::Symmetric => format!("Ls_{}_{}", self.j, self.k),
            GgmKind::Antisymmetric => format!("La_{}_{}", self.j, self.k),
            GgmKind::Diagonal => format!("Ld_{}", self.j),
        }
    }
}

impl fmt::Display for GgmIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.label())
    }
}

/// Flat JSON shape: {"kind": "s"|"a"|"d", "j": .., "k": .., "l": .., "dim": N}
/// with only the fields relevant to the kind present.
#[derive(Serialize, Deserialize)]
struct GgmIndexRepr {
    kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    j: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    l: Option<usize>,
    dim: usize,
}

impl Serialize for GgmIndex {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let repr = match self.kind {
            GgmKind::Symmetric => GgmIndexRepr {
                kind: "s".into(),
                j: Some(self.j),
                k: Some(self.k),
                l: None,
                dim: self.dim,
            },
            GgmKind::Antisymmetric => GgmIndexRepr {
                kind: "a".into(),
                j: Some(self.j),
                k: Some(self.k),
                l: None,
                dim: self.dim,
            },
            GgmKind::Diagonal => GgmIndexRepr {
                kind: "d".into(),
                j: None,
                k: None,
                l: Some(self.j),
                dim: self.dim,
            },
        };
        repr.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for GgmIndex {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = GgmIndexRepr::deserialize(deserializer)?;
        let need = |field: Option<usize>, name: &str| {
            field.ok_or_else(|| {
                D::Error::custom(format!("kind {:?} requires field {name:?}", repr.kind))
            })
        };
        let idx = match repr.kind.as_str() {
            "s" => GgmIndex::symmetric(need(repr.j, "j")?, need(repr.k, "k")?, repr.dim),
            "a" => GgmIndex::antisymmetric(need(repr.j, "j")?, need(repr.k, "k")?, repr.dim),
            "d" => GgmIndex::diagonal(need(repr.l, "l")?, repr.dim),
            other => {
                return Err(D::Error::custom(format!(
                    "unknown GGM kind {other:?}, expected \"s\", \"a\", or \"d\""
                )))
            }
        };
        idx.map_err(|e| D::Error::custom(e.to_string()))
    }
}

/// Raw matrix for a GGM index. Entries are exact: 0, +-1, +-i, and square
/// roots of small rationals on the diagonal family.
pub(crate) fn ggm_matrix(index: &GgmIndex) -> ComplexMatrix {
    let n = index.dim;
    let mut m = ComplexMatrix::zeros(n).expect("dim validated at index construction");
    match index.kind {
        GgmKind::Symmetric => {
            let (j, k) = (index.j - 1, index.k - 1);
            m.set(j, k, Complex64::new(1.0, 0.0));
            m.set(k, j, Complex64::new(1.0, 0.0));
        }
        GgmKind::Antisymmetric => {
            let (j, k) = (index.j - 1, index.k - 1);
            m.set(j, k, Complex64::new(0.0, -1.0));
            m.set(k, j, Complex64::new(0.0, 1.0));
        }
        GgmKind::Diagonal => {
            let l = index.j;
            let scale = (2.0 / (l as f64 * (l + 1) as f64)).sqrt();
            for d in 0..l {
                m.set(d, d, Complex64::new(scale, 0.0));
            }
            m.set(l, l, Complex64::new(-(l as f64) * scale, 0.0));
        }
    }
    m
}

/// The GGM generator for `index` as a labeled Hermitian observable.
pub fn ggm(index: &GgmIndex) -> HermitianObservable {
    HermitianObservable::new(index.label(), ggm_matrix(index))
        .expect("GGM matrices are Hermitian by construction")
}

/// The canonical ordering of all N^2 - 1 generator indices for a dimension:
/// every symmetric pair in lexicographic (j,k) order, then every
/// antisymmetric pair in the same order, then diagonals by ascending l.
/// Bloch vectors are addressed in exactly this order everywhere.
pub fn canonical_order(dim: usize) -> Result<Vec<GgmIndex>> {
    if dim < 2 {
        return Err(CoreError::InvalidDimension(dim));
    }
    let mut order = Vec::with_capacity(dim * dim - 1);
    for j in 1..=dim {
        for k in (j + 1)..=dim {
            order.push(GgmIndex::symmetric(j, k, dim)?);
        }
    }
    for j in 1..=dim {
        for k in (j + 1)..=dim {
            order.push(GgmIndex::antisymmetric(j, k, dim)?);
        }
    }
    for l in 1..dim {
        order.push(GgmIndex::diagonal(l, dim)?);
    }
    debug_assert_eq!(order.len(), dim * dim - 1);
    Ok(order)
}

/// Position of `index` within [`canonical_order`] for its dimension.
pub fn canonical_position(index: &GgmIndex) -> usize {
    let n = index.dim;
    let pairs = n * (n - 1) / 2;
    // offset of lexicographic pair (j,k) among all pairs:
    // sum_{i<j} (n - i) full blocks, then the distance within block j
    let pair_offset = |j: usize, k: usize| (j - 1) * n - j * (j - 1) / 2 + (k - j - 1);
    match index.kind {
        GgmKind::Symmetric => pair_offset(index.j, index.k),
        GgmKind::Antisymmetric => pairs + pair_offset(index.j, index.k),
        GgmKind::Diagonal => 2 * pairs + index.j - 1,
    }
}

static BASIS_CACHE: OnceLock<Mutex<HashMap<usize, Arc<Vec<HermitianObservable>>>>> =
    OnceLock::new();

/// All generators for a dimension in canonical order, cached after first
/// construction. Inversion code asks for these constantly; rebuilding
/// O(N^2) matrices each time would dominate small-N profiles.
pub fn canonical_basis(dim: usize) -> Result<Arc<Vec<HermitianObservable>>> {
    if dim < 2 {
        return Err(CoreError::InvalidDimension(dim));
    }
    let cache = BASIS_CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("basis cache lock poisoned");
    if let Some(found) = guard.get(&dim) {
        return Ok(Arc::clone(found));
    }
    let basis: Vec<HermitianObservable> = canonical_order(dim)?.iter().map(ggm).collect();
    let arc = Arc::new(basis);
    guard.insert(dim, Arc::clone(&arc));
    Ok(arc)
}

/// The standard 3x3 Gell-Mann matrix lambda_i, 1 <= i <= 8.
///
/// Correspondence to the generalized family: lambda_1 = Ls(1,2),
/// lambda_2 = La(1,2), lambda_3 = Ld(1), lambda_4 = Ls(1,3),
/// lambda_5 = La(1,3), lambda_6 = Ls(2,3), lambda_7 = La(2,3),
/// lambda_8 = Ld(2).
pub fn gellmann_qutrit(i: usize) -> Result<HermitianObservable> {
    let index = match i {
        1 => GgmIndex::symmetric(1, 2, 3)?,
        2 => GgmIndex::antisymmetric(1, 2, 3)?,
        3 => GgmIndex::diagonal(1, 3)?,
        4 => GgmIndex::symmetric(1, 3, 3)?,
        5 => GgmIndex::antisymmetric(1, 3, 3)?,
        6 => GgmIndex::symmetric(2, 3, 3)?,
        7 => GgmIndex::antisymmetric(2, 3, 3)?,
        8 => GgmIndex::diagonal(2, 3)?,
        other => {
            return Err(CoreError::IndexOutOfRange(format!(
                "Gell-Mann index {other} outside 1..=8"
            )))
        }
    };
    Ok(HermitianObservable::new(format!("lambda_{i}"), ggm_matrix(&index))
        .expect("Gell-Mann matrices are Hermitian"))
}

/// Real expansion coefficients of a state over the canonical GGM basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlochVector {
    dim: usize,
    components: Vec<f64>,
}

impl BlochVector {
    /// Wrap raw components; the length must be dim^2 - 1.
    pub fn new(dim: usize, components: Vec<f64>) -> Result<Self> {
        if dim < 2 {
            return Err(CoreError::InvalidDimension(dim));
        }
        let expected = dim * dim - 1;
        if components.len() != expected {
            return Err(CoreError::DimMismatch {
                expected,
                got: components.len(),
            });
        }
        Ok(Self { dim, components })
    }

    pub fn zeros(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(CoreError::InvalidDimension(dim));
        }
        Ok(Self {
            dim,
            components: vec![0.0; dim * dim - 1],
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> &[f64] {
        &self.components
    }

    /// Component for a specific generator index.
    pub fn component(&self, index: &GgmIndex) -> f64 {
        assert_eq!(index.dim(), self.dim, "GGM index dimension mismatch");
        self.components[canonical_position(index)]
    }

    /// Overwrite the component for a specific generator index.
    pub fn set_component(&mut self, index: &GgmIndex, value: f64) {
        assert_eq!(index.dim(), self.dim, "GGM index dimension mismatch");
        self.components[canonical_position(index)] = value;
    }
}

/// Project a state onto the canonical basis: s_a = Tr{G_a rho}.
pub fn bloch_decompose(rho: &DensityMatrix) -> Result<BlochVector> {
    let basis = canonical_basis(rho.dim())?;
    let mut components = Vec::with_capacity(basis.len());
    for g in basis.iter() {
        let val = trace_inner_product(g.mat(), rho.mat())?;
        // both factors Hermitian, so the trace is real up to rounding
        components.push(val.re);
    }
    BlochVector::new(rho.dim(), components)
}

/// Result of assembling a matrix from Bloch components. The linear formula
/// guarantees Hermiticity and unit trace but not positivity, so the matrix
/// comes paired with its positivity report instead of being blessed as a
/// state outright.
#[derive(Debug, Clone)]
pub struct BlochAssembly {
    pub mat: ComplexMatrix,
    pub psd: PsdReport,
}

impl BlochAssembly {
    /// Promote to a validated state. Fails when the assembly was flagged
    /// non-positive beyond the tolerance.
    pub fn into_density(self, tol: f64) -> Result<DensityMatrix> {
        DensityMatrix::with_tolerance(self.mat, tol)
    }
}

/// Rebuild a matrix from Bloch components: rho = I/N + (1/2) sum s_a G_a.
///
/// The positivity check runs on every call and its verdict travels with the
/// result; no projection or repair happens here.
pub fn bloch_assemble(s: &BlochVector) -> Result<BlochAssembly> {
    let n = s.dim();
    let basis = canonical_basis(n)?;
    let mut mat = ComplexMatrix::identity(n)?.scale(Complex64::new(1.0 / n as f64, 0.0));
    for (g, &coeff) in basis.iter().zip(s.components()) {
        if coeff != 0.0 {
            mat = mat.add(&g.mat().scale(Complex64::new(0.5 * coeff, 0.0)))?;
        }
    }
    let psd = is_psd(&mat, DEFAULT_TOL)?;
    Ok(BlochAssembly { mat, psd })
}
