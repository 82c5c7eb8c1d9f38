//! Measurement schemes, expectation-value time series, and their file
//! formats.
//!
//! Each reconstruction scheme fixes a small set of observables and a number
//! of measurement times. The dynamic observables are built as sums of GGM
//! generators chosen so that the entrywise product with each channel basis
//! matrix isolates exactly one generator; that is the structural fact that
//! turns a time series of expectation values into a solvable linear system
//! for Bloch components. The product bookkeeping (which column of the
//! channel decomposition maps to which generator) travels with the
//! observable set so the reconstruction code never re-derives it.
//!
//! Expectation values can be computed two ways: directly as
//! Tr{Q (D(t) o rho)}, or through the decomposition as
//! sum_k alpha_k(t) Tr{(Q o A_k) rho}. The two must agree to rounding;
//! debug and test builds assert that on every measurement.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::channel::{decompose, ChannelDecomposition, DecoherenceRates, DynamicMatrix};
use crate::error::{CoreError, Result};
use crate::ggm::{ggm, ggm_matrix, GgmIndex};
use crate::mat::{hadamard_product, trace_inner_product, ComplexMatrix, DensityMatrix, HermitianObservable};
use crate::numeric::CompensatedSum;

/// The four reconstruction schemes this crate implements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Three-level system, two observables at four time instants.
    Qutrit,
    /// Four-level system, two observables at seven instants plus one
    /// static diagonal measurement.
    Fourlevel,
    /// Bell-diagonal two-qubit states, a single observable at three
    /// instants.
    Bell,
    /// General N-level system, two observables at N(N-1)/2 + 1 instants
    /// plus N - 3 static diagonal measurements.
    Qudit,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Qutrit, Scheme::Fourlevel, Scheme::Bell, Scheme::Qudit];

    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Qutrit => "qutrit",
            Scheme::Fourlevel => "fourlevel",
            Scheme::Bell => "bell",
            Scheme::Qudit => "qudit",
        }
    }

    /// Check that a dimension is legal for the scheme.
    pub fn check_dim(&self, dim: usize) -> Result<()> {
        let ok = match self {
            Scheme::Qutrit => dim == 3,
            Scheme::Fourlevel | Scheme::Bell => dim == 4,
            Scheme::Qudit => dim >= 3,
        };
        if ok {
            Ok(())
        } else {
            Err(CoreError::SchemeMismatch(format!(
                "scheme {} does not support dimension {dim}",
                self.name()
            )))
        }
    }

    /// Number of time instants the scheme demands.
    pub fn grid_len(&self, dim: usize) -> usize {
        match self {
            Scheme::Qutrit => 4,
            Scheme::Fourlevel => 7,
            Scheme::Bell => 3,
            Scheme::Qudit => dim * (dim - 1) / 2 + 1,
        }
    }

    /// Number of static (t = 0 only) diagonal measurements.
    pub fn static_count(&self, dim: usize) -> usize {
        match self {
            Scheme::Qutrit | Scheme::Bell => 0,
            Scheme::Fourlevel => 1,
            Scheme::Qudit => dim.saturating_sub(3),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "qutrit" => Ok(Scheme::Qutrit),
            "fourlevel" => Ok(Scheme::Fourlevel),
            "bell" => Ok(Scheme::Bell),
            "qudit" => Ok(Scheme::Qudit),
            other => Err(CoreError::Parse(format!(
                "unknown scheme {other:?}, expected qutrit, fourlevel, bell, or qudit"
            ))),
        }
    }
}

/// A time-series observable together with its product table: entry k names
/// the GGM generator equal to the entrywise product of the observable with
/// channel basis matrix k (identity first, then level pairs in
/// lexicographic order), or None where that product vanishes.
#[derive(Debug, Clone)]
pub struct DynamicObservable {
    observable: HermitianObservable,
    products: Vec<Option<GgmIndex>>,
}

impl DynamicObservable {
    /// Build the observable as the sum of its product generators. Because
    /// the generators of distinct columns have disjoint support, the
    /// product table is then correct by construction.
    fn from_products(
        label: &str,
        dim: usize,
        products: Vec<Option<GgmIndex>>,
    ) -> Result<Self> {
        let mut mat = ComplexMatrix::zeros(dim)?;
        for index in products.iter().flatten() {
            mat = mat.add(&ggm_matrix(index))?;
        }
        Ok(Self {
            observable: HermitianObservable::new(label, mat)?,
            products,
        })
    }

    pub fn observable(&self) -> &HermitianObservable {
        &self.observable
    }

    pub fn label(&self) -> &str {
        self.observable.label()
    }

    /// Product table aligned with the channel decomposition columns.
    pub fn products(&self) -> &[Option<GgmIndex>] {
        &self.products
    }
}

/// The complete observable complement of a scheme at a dimension.
#[derive(Debug, Clone)]
pub struct ObservableSet {
    dim: usize,
    scheme: Scheme,
    dynamic: Vec<DynamicObservable>,
    statics: Vec<GgmIndex>,
}

impl ObservableSet {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    /// The observables measured across the time grid.
    pub fn dynamic(&self) -> &[DynamicObservable] {
        &self.dynamic
    }

    /// Diagonal generators measured once at t = 0.
    pub fn statics(&self) -> &[GgmIndex] {
        &self.statics
    }

    /// Static generators as labeled observables.
    pub fn static_observables(&self) -> Vec<HermitianObservable> {
        self.statics.iter().map(ggm).collect()
    }

    /// Total observable count, dynamic plus static.
    pub fn observable_count(&self) -> usize {
        self.dynamic.len() + self.statics.len()
    }

    /// Entries a complete record holds: every dynamic observable at every
    /// grid instant plus one entry per static observable.
    pub fn expected_entries(&self) -> usize {
        self.dynamic.len() * self.scheme.grid_len(self.dim) + self.statics.len()
    }
}

/// Column order helper: the channel decomposition lists the identity first
/// and then level pairs lexicographically; this enumerates those pairs.
fn lex_pairs(dim: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::with_capacity(dim * (dim - 1) / 2);
    for j in 1..=dim {
        for k in (j + 1)..=dim {
            pairs.push((j, k));
        }
    }
    pairs
}

/// Two observables for a three-level system. Their product tables split
/// the eight Gell-Mann generators into two groups of four, one group per
/// observable, so four time instants per observable recover all eight
/// Bloch components.
pub fn observables_qutrit() -> ObservableSet {
    let dim = 3;
    let q1 = DynamicObservable::from_products(
        "Q1",
        dim,
        vec![
            Some(GgmIndex::diagonal(1, dim).expect("valid")),
            Some(GgmIndex::symmetric(1, 2, dim).expect("valid")),
            Some(GgmIndex::antisymmetric(1, 3, dim).expect("valid")),
            Some(GgmIndex::antisymmetric(2, 3, dim).expect("valid")),
        ],
    )
    .expect("qutrit Q1 is well-formed");
    let q2 = DynamicObservable::from_products(
        "Q2",
        dim,
        vec![
            Some(GgmIndex::diagonal(2, dim).expect("valid")),
            Some(GgmIndex::antisymmetric(1, 2, dim).expect("valid")),
            Some(GgmIndex::symmetric(1, 3, dim).expect("valid")),
            Some(GgmIndex::symmetric(2, 3, dim).expect("valid")),
        ],
    )
    .expect("qutrit Q2 is well-formed");
    ObservableSet {
        dim,
        scheme: Scheme::Qutrit,
        dynamic: vec![q1, q2],
        statics: Vec::new(),
    }
}

/// Two observables plus one static diagonal for a four-level system. The
/// product tables cover all twelve off-diagonal generators and the first
/// two diagonal ones; the third diagonal generator is measured statically.
pub fn observables_fourlevel() -> ObservableSet {
    let dim = 4;
    let q1 = DynamicObservable::from_products(
        "Q1",
        dim,
        vec![
            Some(GgmIndex::diagonal(1, dim).expect("valid")),
            Some(GgmIndex::symmetric(1, 2, dim).expect("valid")),
            Some(GgmIndex::antisymmetric(1, 3, dim).expect("valid")),
            Some(GgmIndex::symmetric(1, 4, dim).expect("valid")),
            Some(GgmIndex::antisymmetric(2, 3, dim).expect("valid")),
            Some(GgmIndex::symmetric(2, 4, dim).expect("valid")),
            Some(GgmIndex::antisymmetric(3, 4, dim).expect("valid")),
        ],
    )
    .expect("fourlevel Q1 is well-formed");
    let q2 = DynamicObservable::from_products(
        "Q2",
        dim,
        vec![
            Some(GgmIndex::diagonal(2, dim).expect("valid")),
            Some(GgmIndex::antisymmetric(1, 2, dim).expect("valid")),
            Some(GgmIndex::symmetric(1, 3, dim).expect("valid")),
            Some(GgmIndex::antisymmetric(1, 4, dim).expect("valid")),
            Some(GgmIndex::symmetric(2, 3, dim).expect("valid")),
            Some(GgmIndex::antisymmetric(2, 4, dim).expect("valid")),
            Some(GgmIndex::symmetric(3, 4, dim).expect("valid")),
        ],
    )
    .expect("fourlevel Q2 is well-formed");
    ObservableSet {
        dim,
        scheme: Scheme::Fourlevel,
        dynamic: vec![q1, q2],
        statics: vec![GgmIndex::diagonal(3, dim).expect("valid")],
    }
}

/// One observable for states diagonal in the Bell basis. Only the (1,4)
/// and (2,3) coherences and one diagonal generator carry information for
/// such states, so a single observable at three instants suffices. Four of
/// its product-table columns vanish on purpose.
pub fn observable_bell() -> ObservableSet {
    let dim = 4;
    let q = DynamicObservable::from_products(
        "Q",
        dim,
        vec![
            Some(GgmIndex::diagonal(1, dim).expect("valid")),
            None,
            None,
            Some(GgmIndex::symmetric(1, 4, dim).expect("valid")),
            Some(GgmIndex::symmetric(2, 3, dim).expect("valid")),
            None,
            None,
        ],
    )
    .expect("bell Q is well-formed");
    ObservableSet {
        dim,
        scheme: Scheme::Bell,
        dynamic: vec![q],
        statics: Vec::new(),
    }
}

/// Per-parity split used by the general qudit construction: level pairs
/// (j,k) with odd j contribute their symmetric generator to Q1 and their
/// antisymmetric generator to Q2; pairs with even j swap roles. Returns
/// (odd first-index count, even first-index count) over j in 1..N.
pub fn qudit_parity_counts(dim: usize) -> (usize, usize) {
    let odd = (1..dim).filter(|j| j % 2 == 1).count();
    let even = (1..dim).filter(|j| j % 2 == 0).count();
    (odd, even)
}

/// Two observables plus N - 3 static diagonals for an N-level system.
///
/// Every level pair contributes exactly one generator to each observable,
/// chosen by the parity of the pair's first index, so each observable's
/// product table covers all mu = N(N-1)/2 + 1 decomposition columns and
/// the two tables together cover every off-diagonal generator exactly
/// once. The diagonal generators beyond the first two cannot be reached
/// through the dynamics (the channel never mixes populations) and are
/// measured once at t = 0.
pub fn observables_qudit(dim: usize) -> Result<ObservableSet> {
    if dim < 3 {
        return Err(CoreError::SchemeMismatch(format!(
            "qudit scheme requires dimension >= 3, got {dim}"
        )));
    }
    let mut q1_products = vec![Some(GgmIndex::diagonal(1, dim)?)];
    let mut q2_products = vec![Some(GgmIndex::diagonal(2, dim)?)];
    for (j, k) in lex_pairs(dim) {
        if j % 2 == 1 {
            q1_products.push(Some(GgmIndex::symmetric(j, k, dim)?));
            q2_products.push(Some(GgmIndex::antisymmetric(j, k, dim)?));
        } else {
            q1_products.push(Some(GgmIndex::antisymmetric(j, k, dim)?));
            q2_products.push(Some(GgmIndex::symmetric(j, k, dim)?));
        }
    }
    let q1 = DynamicObservable::from_products("Q1", dim, q1_products)?;
    let q2 = DynamicObservable::from_products("Q2", dim, q2_products)?;
    let statics = (3..dim)
        .map(|l| GgmIndex::diagonal(l, dim))
        .collect::<Result<Vec<_>>>()?;
    Ok(ObservableSet {
        dim,
        scheme: Scheme::Qudit,
        dynamic: vec![q1, q2],
        statics,
    })
}

/// Observable set for any scheme, with the dimension checked against the
/// scheme's constraint.
pub fn observables_for(scheme: Scheme, dim: usize) -> Result<ObservableSet> {
    scheme.check_dim(dim)?;
    Ok(match scheme {
        Scheme::Qutrit => observables_qutrit(),
        Scheme::Fourlevel => observables_fourlevel(),
        Scheme::Bell => observable_bell(),
        Scheme::Qudit => observables_qudit(dim)?,
    })
}

/// Arithmetic measurement grid: instants t, 2t, ..., pt. The missing zero
/// offset is deliberate; a zero instant would duplicate the static
/// measurements and contribute a degenerate row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    step: f64,
    count: usize,
}

impl TimeGrid {
    pub fn new(step: f64, count: usize) -> Result<Self> {
        if !(step > 0.0) || !step.is_finite() {
            return Err(CoreError::Parse(format!(
                "grid step must be positive and finite, got {step}"
            )));
        }
        if count == 0 {
            return Err(CoreError::Parse("grid needs at least one instant".into()));
        }
        Ok(Self { step, count })
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn instants(&self) -> Vec<f64> {
        (1..=self.count).map(|j| j as f64 * self.step).collect()
    }
}

/// Default base step: half the fastest decay time, 1/(2 gamma_max). This
/// keeps every decay factor exp(-gamma t) in a comfortable band inside
/// (0,1) at the first instant, which in turn keeps the reconstruction
/// system as well-conditioned as an arithmetic grid allows.
pub fn default_step(rates: &DecoherenceRates) -> f64 {
    let gmax = rates.max_rate();
    if gmax > 0.0 {
        1.0 / (2.0 * gmax)
    } else {
        0.5
    }
}

/// Expectation value by the direct route: Tr{Q (D(t) o rho0)}.
pub fn expectation_direct(
    rho0: &DensityMatrix,
    dm: &DynamicMatrix,
    q: &HermitianObservable,
    t: f64,
) -> Result<f64> {
    if rho0.dim() != dm.dim() || q.mat().dim() != dm.dim() {
        return Err(CoreError::DimMismatch {
            expected: dm.dim(),
            got: if rho0.dim() != dm.dim() {
                rho0.dim()
            } else {
                q.mat().dim()
            },
        });
    }
    let d = dm.evaluate(t)?;
    let evolved = hadamard_product(&d, rho0.mat())?;
    let value = trace_inner_product(q.mat(), &evolved)?;
    Ok(value.re)
}

/// Expectation value through the channel decomposition:
/// sum_k alpha_k(t) Tr{(Q o A_k) rho0}.
///
/// The identity holds with the transpose of each basis matrix; all basis
/// matrices here are symmetric, so the transpose is dropped. Debug builds
/// re-assert that symmetry instead of trusting it silently.
pub fn expectation_decomposed(
    rho0: &DensityMatrix,
    decomp: &ChannelDecomposition,
    q: &HermitianObservable,
    t: f64,
) -> Result<f64> {
    if rho0.dim() != decomp.dim() || q.mat().dim() != decomp.dim() {
        return Err(CoreError::DimMismatch {
            expected: decomp.dim(),
            got: if rho0.dim() != decomp.dim() {
                rho0.dim()
            } else {
                q.mat().dim()
            },
        });
    }
    let weights = decomp.functions_at(t)?;
    let mut acc = CompensatedSum::new();
    for (a_k, &alpha) in decomp.basis().iter().zip(&weights) {
        debug_assert_eq!(a_k.transpose(), *a_k, "channel basis matrix not symmetric");
        let qa = hadamard_product(q.mat(), a_k)?;
        let x = trace_inner_product(&qa, rho0.mat())?;
        acc.add_product(alpha, x.re);
    }
    Ok(acc.value())
}

/// Expectation value of `q` on the evolved state at time `t`.
///
/// Release builds take the direct route. Debug and test builds compute
/// both routes and assert they agree to 1e-12, which continuously checks
/// the identity the whole reconstruction scheme rests on.
pub fn measure(
    rho0: &DensityMatrix,
    dm: &DynamicMatrix,
    q: &HermitianObservable,
    t: f64,
) -> Result<f64> {
    let direct = expectation_direct(rho0, dm, q, t)?;
    if cfg!(debug_assertions) {
        let decomp = decompose(dm);
        let via_decomposition = expectation_decomposed(rho0, &decomp, q, t)?;
        debug_assert!(
            (direct - via_decomposition).abs() <= 1e-12,
            "measurement route mismatch at t={t}: direct {direct:.17e} vs decomposed {via_decomposition:.17e}"
        );
    }
    Ok(direct)
}

/// One measured data point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementEntry {
    pub observable: String,
    pub time: f64,
    pub value: f64,
}

/// A complete set of measurement outcomes for one scheme run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub scheme: Scheme,
    pub dim: usize,
    /// Standard deviation of the Gaussian noise added to every value;
    /// zero means exact expectation values.
    pub sigma: f64,
    /// Master seed behind the noise draws, when noise was added.
    pub seed: Option<u64>,
    pub entries: Vec<MeasurementEntry>,
}

impl MeasurementRecord {
    /// The recorded value for an observable at a time, matched with a
    /// relative time tolerance wide enough for round-tripping through the
    /// 12-significant-digit file format and far too tight to confuse
    /// neighboring grid instants.
    pub fn value_at(&self, observable: &str, time: f64) -> Result<f64> {
        let tol = 1e-9 * time.abs().max(1.0);
        self.entries
            .iter()
            .find(|e| e.observable == observable && (e.time - time).abs() <= tol)
            .map(|e| e.value)
            .ok_or_else(|| CoreError::MissingEntry {
                label: observable.to_string(),
                time,
            })
    }
}

/// Format a time with 12 significant digits in fixed-point notation.
pub fn format_time(t: f64) -> String {
    if t == 0.0 {
        return "0.000000000000".to_string();
    }
    let exponent = t.abs().log10().floor() as i32;
    let decimals = (11 - exponent).max(0) as usize;
    format!("{t:.decimals$}")
}

/// Measure a full record: every dynamic observable at every grid instant,
/// then every static observable at t = 0.
///
/// With `sigma > 0`, independent zero-mean Gaussian noise is added to each
/// value. Each entry's draw comes from its own counter-indexed stream of
/// the seeded generator, so the noise on entry i never depends on how many
/// entries came before it or on evaluation order.
pub fn measure_series(
    rho0: &DensityMatrix,
    dm: &DynamicMatrix,
    set: &ObservableSet,
    grid: &TimeGrid,
    sigma: f64,
    seed: Option<u64>,
) -> Result<MeasurementRecord> {
    if rho0.dim() != set.dim() || dm.dim() != set.dim() {
        return Err(CoreError::DimMismatch {
            expected: set.dim(),
            got: if rho0.dim() != set.dim() {
                rho0.dim()
            } else {
                dm.dim()
            },
        });
    }
    if sigma < 0.0 {
        return Err(CoreError::NegativeSigma(sigma));
    }
    let required = set.scheme().grid_len(set.dim());
    if grid.count() != required {
        return Err(CoreError::GridMismatch {
            expected: required,
            got: grid.count(),
        });
    }
    let instants = grid.instants();
    let mut entries = Vec::with_capacity(set.expected_entries());
    for dynamic in set.dynamic() {
        for &t in &instants {
            let value = measure(rho0, dm, dynamic.observable(), t)?;
            entries.push(MeasurementEntry {
                observable: dynamic.label().to_string(),
                time: t,
                value,
            });
        }
    }
    for obs in set.static_observables() {
        let value = measure(rho0, dm, &obs, 0.0)?;
        entries.push(MeasurementEntry {
            observable: obs.label().to_string(),
            time: 0.0,
            value,
        });
    }
    if sigma > 0.0 {
        let master = seed.unwrap_or(0);
        for (i, entry) in entries.iter_mut().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(master);
            rng.set_stream(i as u64 + 1);
            let z: f64 = StandardNormal.sample(&mut rng);
            entry.value += sigma * z;
        }
    }
    Ok(MeasurementRecord {
        scheme: set.scheme(),
        dim: set.dim(),
        sigma,
        seed: if sigma > 0.0 { seed.or(Some(0)) } else { seed },
        entries,
    })
}

/// Header of every measurement CSV.
pub const CSV_HEADER: &str = "observable,time,value";

/// Render a record as CSV: the fixed header, then one `label,time,value`
/// row per entry, times in fixed-point with 12 significant digits, values
/// in shortest round-trip form.
pub fn to_csv(record: &MeasurementRecord) -> String {
    let mut out = String::with_capacity(32 * (record.entries.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for e in &record.entries {
        out.push_str(&e.observable);
        out.push(',');
        out.push_str(&format_time(e.time));
        out.push(',');
        out.push_str(&format!("{}", e.value));
        out.push('\n');
    }
    out
}

/// Parse measurement CSV produced by [`to_csv`] (or by hand, as long as
/// the header and the three-column shape are respected).
pub fn parse_csv(text: &str) -> Result<Vec<MeasurementEntry>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(header) if header.trim_end() == CSV_HEADER => {}
        Some(other) => {
            return Err(CoreError::Parse(format!(
                "bad CSV header {other:?}, expected {CSV_HEADER:?}"
            )))
        }
        None => return Err(CoreError::Parse("empty CSV".into())),
    }
    let mut entries = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(CoreError::Parse(format!(
                "line {}: expected 3 comma-separated fields, got {}",
                lineno + 2,
                fields.len()
            )));
        }
        let time: f64 = fields[1].trim().parse().map_err(|_| {
            CoreError::Parse(format!("line {}: bad time {:?}", lineno + 2, fields[1]))
        })?;
        let value: f64 = fields[2].trim().parse().map_err(|_| {
            CoreError::Parse(format!("line {}: bad value {:?}", lineno + 2, fields[2]))
        })?;
        entries.push(MeasurementEntry {
            observable: fields[0].trim().to_string(),
            time,
            value,
        });
    }
    Ok(entries)
}

/// Companion metadata written next to each measurement CSV. Everything
/// needed to reproduce or invert the record travels here; the timestamp is
/// informational and excluded from determinism guarantees.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecordSidecar {
    pub scheme: Scheme,
    pub dim: usize,
    pub step: f64,
    pub count: usize,
    pub sigma: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub rates: DecoherenceRates,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub created_unix: Option<u64>,
}
