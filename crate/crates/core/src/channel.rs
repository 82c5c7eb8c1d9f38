//! Phase-damping (pure dephasing) channels: the time-dependent Hadamard
//! multiplier D(t), its validity checks, and its decomposition into a
//! small operator basis.
//!
//! A channel here is determined entirely by one decoherence rate per level
//! pair. At time t the multiplier has ones on the diagonal and
//! exp(-gamma_jk t) at the off-diagonal position (j,k); applying the
//! channel is an entrywise product with the state, so populations never
//! move and coherences decay independently.
//!
//! Validity is subtle: the diagonal and initial-time conditions hold for
//! any positive rates, but positivity of D(t) does not. Some perfectly
//! positive rate assignments produce a multiplier with negative
//! eigenvalues at intermediate times, which would map states to
//! non-states. Construction therefore never rejects rates; a separate
//! validation pass scans positivity over a time grid and reports
//! violations, and front ends decide how hard to fail.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_complex::Complex64;
use serde::de::{Error as DeError, MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{CoreError, Result};
use crate::mat::{hadamard_product, is_psd, ComplexMatrix, DensityMatrix};

/// Relative tolerance for deciding that two rates coincide. Rates closer
/// than this (relative to the largest rate) make the reconstruction system
/// singular in practice, so the flag gates inversion but not simulation.
pub const RATE_DISTINCTNESS_RTOL: f64 = 1e-9;

/// One positive decoherence rate per level pair (j,k), 1 <= j < k <= N.
///
/// A rate of exactly zero is accepted only for pairs explicitly flagged
/// frozen, which models coherences that the physical setup is known to
/// preserve. Frozen pairs take no part in dynamics (their factor stays 1).
#[derive(Debug, Clone, PartialEq)]
pub struct DecoherenceRates {
    dim: usize,
    rates: BTreeMap<(usize, usize), f64>,
    frozen: BTreeSet<(usize, usize)>,
}

impl DecoherenceRates {
    /// Build from a complete pair map. Every pair (j,k) with
    /// 1 <= j < k <= dim must be present and strictly positive unless
    /// listed in `frozen` with value exactly zero.
    pub fn new(
        dim: usize,
        rates: BTreeMap<(usize, usize), f64>,
        frozen: BTreeSet<(usize, usize)>,
    ) -> Result<Self> {
        if dim < 2 {
            return Err(CoreError::InvalidDimension(dim));
        }
        for j in 1..=dim {
            for k in (j + 1)..=dim {
                let value = *rates
                    .get(&(j, k))
                    .ok_or(CoreError::MissingRate { j, k })?;
                let is_frozen = frozen.contains(&(j, k));
                if is_frozen {
                    if value != 0.0 {
                        return Err(CoreError::BadRateKey {
                            key: format!("{j},{k}"),
                            reason: format!(
                                "pair is flagged frozen but has rate {value}, expected exactly 0"
                            ),
                        });
                    }
                } else if !(value > 0.0) || !value.is_finite() {
                    return Err(CoreError::NonPositiveRate { j, k, value });
                }
            }
        }
        for &(j, k) in rates.keys() {
            if j < 1 || k <= j || k > dim {
                return Err(CoreError::BadRateKey {
                    key: format!("{j},{k}"),
                    reason: format!("indices must satisfy 1 <= j < k <= {dim}"),
                });
            }
        }
        for &(j, k) in &frozen {
            if !rates.contains_key(&(j, k)) {
                return Err(CoreError::BadRateKey {
                    key: format!("{j},{k}"),
                    reason: "frozen flag refers to a pair with no rate entry".into(),
                });
            }
        }
        Ok(Self { dim, rates, frozen })
    }

    /// Convenience constructor: assign `values` to the level pairs in
    /// lexicographic order (1,2), (1,3), ..., (N-1,N). No frozen pairs.
    pub fn from_ordered(dim: usize, values: &[f64]) -> Result<Self> {
        if dim < 2 {
            return Err(CoreError::InvalidDimension(dim));
        }
        let expected = dim * (dim - 1) / 2;
        if values.len() != expected {
            return Err(CoreError::DimMismatch {
                expected,
                got: values.len(),
            });
        }
        let mut rates = BTreeMap::new();
        let mut it = values.iter();
        for j in 1..=dim {
            for k in (j + 1)..=dim {
                rates.insert((j, k), *it.next().expect("length checked"));
            }
        }
        Self::new(dim, rates, BTreeSet::new())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// The rate for an unordered pair; argument order does not matter.
    pub fn rate(&self, j: usize, k: usize) -> Result<f64> {
        let key = if j < k { (j, k) } else { (k, j) };
        self.rates
            .get(&key)
            .copied()
            .ok_or(CoreError::MissingRate { j: key.0, k: key.1 })
    }

    pub fn is_frozen(&self, j: usize, k: usize) -> bool {
        let key = if j < k { (j, k) } else { (k, j) };
        self.frozen.contains(&key)
    }

    /// Pairs in lexicographic order with their rates.
    pub fn ordered(&self) -> Vec<((usize, usize), f64)> {
        self.rates.iter().map(|(&p, &r)| (p, r)).collect()
    }

    /// Largest rate. At least one pair exists since dim >= 2.
    pub fn max_rate(&self) -> f64 {
        self.rates.values().copied().fold(0.0, f64::max)
    }

    /// Smallest strictly positive rate, if any pair is not frozen.
    pub fn min_positive_rate(&self) -> Option<f64> {
        self.rates
            .values()
            .copied()
            .filter(|&r| r > 0.0)
            .fold(None, |acc, r| Some(acc.map_or(r, |a: f64| a.min(r))))
    }

    /// True when no two rates coincide within the relative tolerance.
    /// Near-degenerate rates do not break simulation, but they collapse
    /// columns of the reconstruction system, so inversion code consults
    /// this flag before trying.
    pub fn pairwise_distinct(&self, rtol: f64) -> bool {
        self.first_coincident_pair(rtol).is_none()
    }

    /// The first pair of level pairs whose rates coincide within the
    /// relative tolerance, with the absolute gap, or None when all rates
    /// are distinct.
    pub fn first_coincident_pair(
        &self,
        rtol: f64,
    ) -> Option<((usize, usize), (usize, usize), f64)> {
        let scale = self.max_rate().max(f64::MIN_POSITIVE);
        // Frozen pairs are excluded: they never contribute a column to an
        // inversion system, so their shared zero rate is not a degeneracy.
        // A zero column that does get used collides with the constant
        // column instead, and the coefficient-matrix scan catches that.
        let entries: Vec<_> = self
            .ordered()
            .into_iter()
            .filter(|&((j, k), _)| !self.is_frozen(j, k))
            .collect();
        for (i, &(pa, ra)) in entries.iter().enumerate() {
            for &(pb, rb) in entries.iter().skip(i + 1) {
                let diff = (ra - rb).abs();
                if diff <= rtol * scale {
                    return Some((pa, pb, diff));
                }
            }
        }
        None
    }
}

impl fmt::Display for DecoherenceRates {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "dim {}:", self.dim)?;
        for ((j, k), r) in self.ordered() {
            let tag = if self.is_frozen(j, k) { " (frozen)" } else { "" };
            write!(f, " ({j},{k})={r}{tag}")?;
        }
        Ok(())
    }
}

fn parse_pair_key(key: &str) -> Result<(usize, usize)> {
    let mut parts = key.split(',');
    let bad = |reason: &str| CoreError::BadRateKey {
        key: key.to_string(),
        reason: reason.to_string(),
    };
    let j: usize = parts
        .next()
        .ok_or_else(|| bad("expected \"j,k\""))?
        .trim()
        .parse()
        .map_err(|_| bad("first index is not an integer"))?;
    let k: usize = parts
        .next()
        .ok_or_else(|| bad("expected \"j,k\""))?
        .trim()
        .parse()
        .map_err(|_| bad("second index is not an integer"))?;
    if parts.next().is_some() {
        return Err(bad("expected exactly two indices"));
    }
    if j == k {
        return Err(bad("indices must name two different levels"));
    }
    Ok(if j < k { (j, k) } else { (k, j) })
}

/// Inner map of the rates file. Custom visitor so that duplicate keys,
/// including "2,1" duplicating "1,2", are rejected instead of silently
/// keeping the last occurrence as a plain JSON map would.
struct RateMap(BTreeMap<(usize, usize), f64>);

impl<'de> Deserialize<'de> for RateMap {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct RateMapVisitor;

        impl<'de> Visitor<'de> for RateMapVisitor {
            type Value = RateMap;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a map from \"j,k\" pair keys to rates")
            }

            fn visit_map<A: MapAccess<'de>>(
                self,
                mut access: A,
            ) -> std::result::Result<RateMap, A::Error> {
                let mut out = BTreeMap::new();
                while let Some((key, value)) = access.next_entry::<String, f64>()? {
                    let pair = parse_pair_key(&key).map_err(A::Error::custom)?;
                    if out.insert(pair, value).is_some() {
                        return Err(A::Error::custom(format!(
                            "duplicate rate key {key:?} in rates file"
                        )));
                    }
                }
                Ok(RateMap(out))
            }
        }

        deserializer.deserialize_map(RateMapVisitor)
    }
}

#[derive(Deserialize)]
struct RatesRepr {
    dim: usize,
    rates: RateMap,
    #[serde(default)]
    frozen: Vec<String>,
}

impl<'de> Deserialize<'de> for DecoherenceRates {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = RatesRepr::deserialize(deserializer)?;
        let mut frozen = BTreeSet::new();
        for key in &repr.frozen {
            let pair = parse_pair_key(key).map_err(D::Error::custom)?;
            if !frozen.insert(pair) {
                return Err(D::Error::custom(format!(
                    "duplicate frozen key {key:?}"
                )));
            }
        }
        DecoherenceRates::new(repr.dim, repr.rates.0, frozen).map_err(D::Error::custom)
    }
}

impl Serialize for DecoherenceRates {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr<'a> {
            dim: usize,
            rates: PairMap<'a>,
            #[serde(skip_serializing_if = "Vec::is_empty")]
            frozen: Vec<String>,
        }
        struct PairMap<'a>(&'a BTreeMap<(usize, usize), f64>);
        impl Serialize for PairMap<'_> {
            fn serialize<S: Serializer>(
                &self,
                serializer: S,
            ) -> std::result::Result<S::Ok, S::Error> {
                let mut map = serializer.serialize_map(Some(self.0.len()))?;
                for (&(j, k), &rate) in self.0 {
                    map.serialize_entry(&format!("{j},{k}"), &rate)?;
                }
                map.end()
            }
        }
        Repr {
            dim: self.dim,
            rates: PairMap(&self.rates),
            frozen: self
                .frozen
                .iter()
                .map(|&(j, k)| format!("{j},{k}"))
                .collect(),
        }
        .serialize(serializer)
    }
}

/// The time-dependent multiplier D(t) of a phase-damping channel.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicMatrix {
    rates: DecoherenceRates,
}

/// Wrap a complete rate assignment as a dynamic matrix.
pub fn build_dynamic_matrix(rates: DecoherenceRates) -> DynamicMatrix {
    DynamicMatrix { rates }
}

impl DynamicMatrix {
    pub fn dim(&self) -> usize {
        self.rates.dim()
    }

    pub fn rates(&self) -> &DecoherenceRates {
        &self.rates
    }

    /// D(t): ones on the diagonal, exp(-gamma_jk t) elsewhere. Real and
    /// symmetric for every t.
    pub fn evaluate(&self, t: f64) -> Result<ComplexMatrix> {
        if t < 0.0 || !t.is_finite() {
            return Err(CoreError::NegativeTime(t));
        }
        let n = self.dim();
        let mut m = ComplexMatrix::identity(n)?;
        for j in 1..=n {
            for k in (j + 1)..=n {
                let gamma = self.rates.rate(j, k)?;
                let factor = Complex64::new((-gamma * t).exp(), 0.0);
                m.set(j - 1, k - 1, factor);
                m.set(k - 1, j - 1, factor);
            }
        }
        Ok(m)
    }
}

/// Apply the channel: rho(t) = D(t) entrywise-times rho0. The diagonal of
/// the state, and with it the trace, is untouched for any t.
pub fn evolve(rho0: &DensityMatrix, dm: &DynamicMatrix, t: f64) -> Result<DensityMatrix> {
    if rho0.dim() != dm.dim() {
        return Err(CoreError::DimMismatch {
            expected: dm.dim(),
            got: rho0.dim(),
        });
    }
    let d = dm.evaluate(t)?;
    let mat = hadamard_product(&d, rho0.mat())?;
    // Hermitian because D is real symmetric; trace exactly that of rho0.
    // Positivity can fail when D itself fails its positivity condition,
    // which is precisely what validation reports are for, so it is not
    // re-checked here.
    Ok(DensityMatrix::from_hermitian_unit_trace(mat))
}

/// A single positivity violation found while scanning D(t).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PositivityViolation {
    pub t: f64,
    pub min_eigenvalue: f64,
}

/// Outcome of scanning a channel against its defining conditions.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub dim: usize,
    /// Unit diagonal at every sampled t.
    pub diagonal_ok: bool,
    /// D(0) is the all-ones matrix.
    pub initial_ok: bool,
    /// d_jk = d_kj at every sampled t.
    pub symmetric_ok: bool,
    /// Times where D(t) had an eigenvalue below -tol.
    pub violations: Vec<PositivityViolation>,
    /// Smallest eigenvalue seen across the whole scan.
    pub min_eigenvalue_seen: f64,
    /// Number of time samples scanned.
    pub samples: usize,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.diagonal_ok && self.initial_ok && self.symmetric_ok && self.violations.is_empty()
    }

    /// Convert a failed scan into the error a pipeline should raise.
    pub fn into_error(self) -> Option<CoreError> {
        if let Some(v) = self.violations.first() {
            return Some(CoreError::ChannelNotPositive {
                t: v.t,
                min_eig: v.min_eigenvalue,
            });
        }
        None
    }
}

/// Check the three defining conditions of a phase-damping multiplier over
/// the given time samples: positivity (numerically, per sample), unit
/// diagonal, and all-ones at t = 0.
///
/// The diagonal and symmetry checks are exact comparisons because the
/// constructor writes those entries directly; any deviation means memory
/// corruption, not rounding. Positivity is judged by `tol` on the minimum
/// eigenvalue.
pub fn validate_channel(
    dm: &DynamicMatrix,
    time_samples: &[f64],
    tol: f64,
) -> Result<ValidationReport> {
    if time_samples.is_empty() {
        return Err(CoreError::Parse(
            "channel validation requires at least one time sample".into(),
        ));
    }
    for &t in time_samples {
        if t < 0.0 || !t.is_finite() {
            return Err(CoreError::NegativeTime(t));
        }
    }
    let n = dm.dim();
    let mut diagonal_ok = true;
    let mut symmetric_ok = true;
    let mut violations = Vec::new();
    let mut min_seen = f64::INFINITY;
    for &t in time_samples {
        let d = dm.evaluate(t)?;
        for i in 0..n {
            if d.get(i, i) != Complex64::new(1.0, 0.0) {
                diagonal_ok = false;
            }
            for j in (i + 1)..n {
                if d.get(i, j) != d.get(j, i) {
                    symmetric_ok = false;
                }
            }
        }
        let report = is_psd(&d, tol)?;
        min_seen = min_seen.min(report.min_eigenvalue);
        if !report.psd {
            violations.push(PositivityViolation {
                t,
                min_eigenvalue: report.min_eigenvalue,
            });
        }
    }
    let d0 = dm.evaluate(0.0)?;
    let ones = ComplexMatrix::ones(n)?;
    let initial_ok = d0 == ones;
    Ok(ValidationReport {
        dim: n,
        diagonal_ok,
        initial_ok,
        symmetric_ok,
        violations,
        min_eigenvalue_seen: min_seen,
        samples: time_samples.len(),
    })
}

/// Default positivity scan grid: t = 0 plus 50 log-spaced samples from
/// 1e-3 divided by the largest rate (well before any coherence has
/// decayed) out to 10 divided by the smallest positive rate (long past
/// the slowest decay). Channels with every pair frozen have no dynamics
/// and get a token [0, 1] window.
pub fn default_sample_grid(rates: &DecoherenceRates) -> Vec<f64> {
    const SAMPLES: usize = 50;
    let (lo, hi) = match rates.min_positive_rate() {
        Some(min_rate) => (1e-3 / rates.max_rate(), 10.0 / min_rate),
        None => (1e-3, 1.0),
    };
    let mut grid = Vec::with_capacity(SAMPLES + 1);
    grid.push(0.0);
    let log_lo = lo.ln();
    let log_hi = hi.ln();
    for i in 0..SAMPLES {
        let frac = i as f64 / (SAMPLES - 1) as f64;
        grid.push((log_lo + frac * (log_hi - log_lo)).exp());
    }
    grid
}

/// The multiplier family written over a fixed operator basis: the identity
/// plus one symmetric 0/1 pair matrix per level pair, each weighted by its
/// own decaying exponential. The basis has mu = N(N-1)/2 + 1 elements and
/// the weights are linearly independent functions of t exactly when the
/// rates are pairwise distinct, which is what makes reconstruction a
/// square solvable system.
#[derive(Debug, Clone)]
pub struct ChannelDecomposition {
    dim: usize,
    /// Basis matrices: index 0 is the identity, then the pair matrices in
    /// lexicographic (j,k) order.
    basis: Vec<ComplexMatrix>,
    /// Level pair behind each basis element; None for the identity.
    pairs: Vec<Option<(usize, usize)>>,
    /// Decay rate of each weight; 0 for the identity term.
    rates: Vec<f64>,
}

impl ChannelDecomposition {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of terms, N(N-1)/2 + 1.
    pub fn mu(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[ComplexMatrix] {
        &self.basis
    }

    pub fn pairs(&self) -> &[Option<(usize, usize)>] {
        &self.pairs
    }

    /// Decay rates aligned with the basis, identity first with rate 0.
    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    /// The weight functions evaluated at t: [1, exp(-gamma_12 t), ...].
    pub fn functions_at(&self, t: f64) -> Result<Vec<f64>> {
        if t < 0.0 || !t.is_finite() {
            return Err(CoreError::NegativeTime(t));
        }
        Ok(self.rates.iter().map(|&g| (-g * t).exp()).collect())
    }

    /// Rebuild D(t) from the decomposition. Used by tests to pin the
    /// reassembly identity and by the measurement fast path.
    pub fn reassemble(&self, t: f64) -> Result<ComplexMatrix> {
        let weights = self.functions_at(t)?;
        let mut out = ComplexMatrix::zeros(self.dim)?;
        for (mat, &w) in self.basis.iter().zip(&weights) {
            out = out.add(&mat.scale(Complex64::new(w, 0.0)))?;
        }
        Ok(out)
    }
}

/// Split a dynamic matrix into its identity-plus-pair-matrices form.
pub fn decompose(dm: &DynamicMatrix) -> ChannelDecomposition {
    let n = dm.dim();
    let mut basis = Vec::with_capacity(n * (n - 1) / 2 + 1);
    let mut pairs = Vec::with_capacity(basis.capacity());
    let mut rates = Vec::with_capacity(basis.capacity());
    basis.push(ComplexMatrix::identity(n).expect("dim >= 2"));
    pairs.push(None);
    rates.push(0.0);
    for ((j, k), gamma) in dm.rates().ordered() {
        let mut a = ComplexMatrix::zeros(n).expect("dim >= 2");
        a.set(j - 1, k - 1, Complex64::new(1.0, 0.0));
        a.set(k - 1, j - 1, Complex64::new(1.0, 0.0));
        basis.push(a);
        pairs.push(Some((j, k)));
        rates.push(gamma);
    }
    ChannelDecomposition {
        dim: n,
        basis,
        pairs,
        rates,
    }
}
