//! Linear inversion: from measurement records back to the initial state.
//!
//! Each dynamic observable contributes one square linear system. Its
//! coefficient matrix collects the channel weight functions at the grid
//! instants; over an arithmetic grid t, 2t, ..., pt those rows are powers
//! of the per-column decay factors, a generalized Vandermonde structure
//! whose conditioning degrades quickly as columns multiply or decay
//! factors crowd together. The solver therefore carries explicit
//! conditioning metadata and refuses, rather than degrades, past a
//! documented limit.
//!
//! Two numerical commitments keep noiseless round trips at the floor set
//! by conditioning instead of orders of magnitude above it. First, the
//! coefficient entries are computed by exactly the same expression as the
//! simulated channel weights, so both sides of the linear system hold
//! bitwise-identical exponentials and the only perturbation left is the
//! rounding of each stored expectation value. Second, systems are solved
//! by LU with compensated-residual refinement, which recovers essentially
//! all the accuracy the conditioning permits.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::channel::{DecoherenceRates, RATE_DISTINCTNESS_RTOL};
use crate::error::{CoreError, Result};
use crate::ggm::{bloch_assemble, BlochVector, GgmIndex};
use crate::mat::{ComplexMatrix, DensityMatrix, PsdReport, DEFAULT_TOL};
use crate::measure::{
    observables_for, MeasurementRecord, ObservableSet, Scheme, TimeGrid,
};
use crate::numeric::{lu_factor, solve_refined, CompensatedSum};

/// Condition-number ceiling for any inversion. Above this, double
/// precision cannot certify even the leading digits of the solution, so
/// the solver fails loudly instead of returning an answer.
pub const COND_LIMIT: f64 = 1e12;

/// The square system matrix for one dynamic observable: a leading constant
/// column, then one decaying-exponential column per contributing level
/// pair, evaluated down the measurement grid.
#[derive(Debug, Clone)]
pub struct CoefficientMatrix {
    size: usize,
    entries: Vec<f64>,
    column_labels: Vec<String>,
    cond: f64,
    det_sign: i8,
    det_log10: Option<f64>,
    coincident: Option<(String, String, f64)>,
    coincidence_tol: f64,
}

/// Build the coefficient matrix for the given non-constant columns over an
/// arithmetic grid. `rate_columns` carries one (label, rate) per column,
/// in system order; the constant column is implicit and leads. The system
/// must come out square: grid length equal to column count plus one.
pub fn coefficient_matrix(
    rate_columns: &[(String, f64)],
    grid: &TimeGrid,
) -> Result<CoefficientMatrix> {
    let size = rate_columns.len() + 1;
    if grid.count() != size {
        return Err(CoreError::GridMismatch {
            expected: size,
            got: grid.count(),
        });
    }
    let instants = grid.instants();
    let mut entries = vec![0.0; size * size];
    for (r, &t) in instants.iter().enumerate() {
        entries[r * size] = 1.0;
        for (c, (_, rate)) in rate_columns.iter().enumerate() {
            // same expression as the channel evaluator, hence bitwise
            // identical to the weights that produced the data
            entries[r * size + c + 1] = (-rate * t).exp();
        }
    }

    // Coincidence scan over all column rates including the implicit zero
    // of the constant column. Two coincident rates mean two (numerically)
    // identical columns, and the tolerance is relative to the largest
    // rate, matching the distinctness flag on rate configurations.
    let mut all_rates: Vec<(&str, f64)> = Vec::with_capacity(size);
    all_rates.push(("constant", 0.0));
    for (label, rate) in rate_columns {
        all_rates.push((label.as_str(), *rate));
    }
    let scale = all_rates
        .iter()
        .map(|&(_, r)| r.abs())
        .fold(0.0f64, f64::max)
        .max(f64::MIN_POSITIVE);
    let coincidence_tol = RATE_DISTINCTNESS_RTOL * scale;
    let mut coincident = None;
    'outer: for (i, &(la, ra)) in all_rates.iter().enumerate() {
        for &(lb, rb) in all_rates.iter().skip(i + 1) {
            let diff = (ra - rb).abs();
            if diff <= coincidence_tol {
                coincident = Some((la.to_string(), lb.to_string(), diff));
                break 'outer;
            }
        }
    }

    let na = DMatrix::from_row_slice(size, size, &entries);
    let svd = na.svd(false, false);
    let smax = svd
        .singular_values
        .iter()
        .copied()
        .fold(0.0f64, f64::max);
    let smin = svd
        .singular_values
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };

    let (det_sign, det_log10) = match lu_factor(size, &entries) {
        Ok(factors) => {
            let (sign, log10) = factors.det_parts();
            (sign, Some(log10))
        }
        Err(_) => (0, None),
    };

    let mut column_labels = Vec::with_capacity(size);
    column_labels.push("constant".to_string());
    column_labels.extend(rate_columns.iter().map(|(l, _)| l.clone()));

    Ok(CoefficientMatrix {
        size,
        entries,
        column_labels,
        cond,
        det_sign,
        det_log10,
        coincident,
        coincidence_tol,
    })
}

impl CoefficientMatrix {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn entry(&self, row: usize, col: usize) -> f64 {
        assert!(row < self.size && col < self.size, "index out of range");
        self.entries[row * self.size + col]
    }

    pub fn column_labels(&self) -> &[String] {
        &self.column_labels
    }

    /// Spectral condition number (ratio of extreme singular values).
    pub fn cond(&self) -> f64 {
        self.cond
    }

    /// Determinant sign: +1, -1, or 0 when factorization broke down.
    pub fn det_sign(&self) -> i8 {
        self.det_sign
    }

    /// log10 of the determinant magnitude, None when singular.
    pub fn det_log10_magnitude(&self) -> Option<f64> {
        self.det_log10
    }

    /// The colliding column pair, when two rates coincide within the
    /// distinctness tolerance.
    pub fn coincident_columns(&self) -> Option<&(String, String, f64)> {
        self.coincident.as_ref()
    }

    /// True when the system is structurally solvable: square by
    /// construction, positive grid step by construction, and no two
    /// column rates coincident.
    pub fn invertible(&self) -> bool {
        self.coincident.is_none()
    }
}

/// Solution of one coefficient system.
#[derive(Debug, Clone)]
pub struct SolveOutcome {
    /// Recovered projections, one per column in column order.
    pub projections: Vec<f64>,
    /// Largest back-substitution residual |b - A x| over the rows.
    pub residual_inf: f64,
}

/// Solve a coefficient system for its projection vector.
///
/// Refusal is part of the contract: coincident rates or a condition
/// number beyond [`COND_LIMIT`] raise errors instead of producing a
/// least-squares answer that would look plausible and be garbage.
pub fn solve_projections(cm: &CoefficientMatrix, data: &[f64]) -> Result<SolveOutcome> {
    if data.len() != cm.size {
        return Err(CoreError::DimMismatch {
            expected: cm.size,
            got: data.len(),
        });
    }
    if let Some((a, b, diff)) = &cm.coincident {
        return Err(CoreError::CoincidentRates {
            pair_a: a.clone(),
            pair_b: b.clone(),
            diff: *diff,
            tol: cm.coincidence_tol,
        });
    }
    if !cm.cond.is_finite() || cm.cond > COND_LIMIT {
        return Err(CoreError::IllConditioned {
            cond: cm.cond,
            limit: COND_LIMIT,
        });
    }
    let projections = solve_refined(cm.size, &cm.entries, data)?;
    let mut residual_inf = 0.0f64;
    for r in 0..cm.size {
        let mut acc = CompensatedSum::new();
        acc.add(data[r]);
        for c in 0..cm.size {
            acc.add_product(-cm.entries[r * cm.size + c], projections[c]);
        }
        residual_inf = residual_inf.max(acc.value().abs());
    }
    Ok(SolveOutcome {
        projections,
        residual_inf,
    })
}

/// Conditioning and residual numbers for one solved system.
#[derive(Debug, Clone, Serialize)]
pub struct SystemDiagnostics {
    /// Label of the observable whose time series fed the system.
    pub observable: String,
    pub cond: f64,
    pub residual_inf: f64,
    pub det_sign: i8,
    pub det_log10_magnitude: Option<f64>,
}

/// Everything a reconstruction produces: the assembled matrix, its Bloch
/// components with provenance, per-system diagnostics, and the positivity
/// verdict. The matrix is the raw linear-inversion output; any repair is
/// recorded separately and never applied silently.
#[derive(Debug, Clone, Serialize)]
pub struct ReconstructionReport {
    pub scheme: Scheme,
    pub dim: usize,
    /// Raw assembled matrix: Hermitian with unit trace by construction,
    /// not necessarily positive when the data was noisy.
    pub matrix: ComplexMatrix,
    /// Bloch components keyed by generator label.
    pub components: BTreeMap<String, f64>,
    /// Per-component source: "dynamic" (solved from the time series) or
    /// "static" (copied from a t = 0 measurement).
    pub provenance: BTreeMap<String, String>,
    pub systems: Vec<SystemDiagnostics>,
    /// Positivity check of the raw matrix.
    pub psd: PsdReport,
    /// Whether a repair step actually modified the state.
    pub psd_repair_applied: bool,
    /// Repaired state, present only after repair was requested.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub repaired: Option<DensityMatrix>,
    #[serde(skip)]
    bloch: BlochVector,
}

impl ReconstructionReport {
    /// The recovered Bloch vector.
    pub fn bloch(&self) -> &BlochVector {
        &self.bloch
    }

    /// Validate the raw matrix as a state under the given tolerance.
    pub fn state(&self, tol: f64) -> Result<DensityMatrix> {
        DensityMatrix::with_tolerance(self.matrix.clone(), tol)
    }

    /// Run the eigenvalue clip-and-renormalize repair, record its outcome
    /// in the report, and return the repaired state.
    pub fn apply_psd_repair(&mut self) -> Result<DensityMatrix> {
        let outcome = psd_repair(&self.matrix)?;
        self.psd_repair_applied = outcome.applied;
        self.repaired = Some(outcome.state.clone());
        Ok(outcome.state)
    }
}

fn lex_pairs(dim: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::with_capacity(dim * (dim - 1) / 2);
    for j in 1..=dim {
        for k in (j + 1)..=dim {
            pairs.push((j, k));
        }
    }
    pairs
}

/// Shared reconstruction path for the schemes that recover a full state:
/// solve one system per dynamic observable, merge in the static diagonal
/// values, assemble.
fn reconstruct_with_statics(
    set: &ObservableSet,
    record: &MeasurementRecord,
    rates: &DecoherenceRates,
    grid: &TimeGrid,
    statics: &[(GgmIndex, f64)],
) -> Result<ReconstructionReport> {
    if record.scheme != set.scheme() {
        return Err(CoreError::SchemeMismatch(format!(
            "record is from scheme {}, expected {}",
            record.scheme,
            set.scheme()
        )));
    }
    if record.dim != set.dim() {
        return Err(CoreError::SchemeMismatch(format!(
            "record has dimension {}, expected {}",
            record.dim,
            set.dim()
        )));
    }
    if rates.dim() != set.dim() {
        return Err(CoreError::DimMismatch {
            expected: set.dim(),
            got: rates.dim(),
        });
    }
    let dim = set.dim();
    let required = set.scheme().grid_len(dim);
    if grid.count() != required {
        return Err(CoreError::GridMismatch {
            expected: required,
            got: grid.count(),
        });
    }

    let instants = grid.instants();
    let pairs = lex_pairs(dim);
    let mut bloch = BlochVector::zeros(dim)?;
    let mut systems = Vec::with_capacity(set.dynamic().len());
    let mut provenance = BTreeMap::new();

    for dynamic in set.dynamic() {
        let products = dynamic.products();
        assert!(
            products[0].is_some(),
            "every scheme routes a diagonal generator through the constant column"
        );
        let mut rate_columns = Vec::new();
        let mut targets = vec![products[0].expect("checked above")];
        for (col, product) in products.iter().enumerate().skip(1) {
            let Some(generator) = product else { continue };
            let (j, k) = pairs[col - 1];
            rate_columns.push((format!("({j},{k})"), rates.rate(j, k)?));
            targets.push(*generator);
        }

        let cm = coefficient_matrix(&rate_columns, grid)?;
        let data = instants
            .iter()
            .map(|&t| record.value_at(dynamic.label(), t))
            .collect::<Result<Vec<f64>>>()?;
        let outcome = solve_projections(&cm, &data)?;

        for (generator, &value) in targets.iter().zip(&outcome.projections) {
            bloch.set_component(generator, value);
            provenance.insert(generator.label(), "dynamic".to_string());
        }
        systems.push(SystemDiagnostics {
            observable: dynamic.label().to_string(),
            cond: cm.cond(),
            residual_inf: outcome.residual_inf,
            det_sign: cm.det_sign(),
            det_log10_magnitude: cm.det_log10_magnitude(),
        });
    }

    for (generator, value) in statics {
        bloch.set_component(generator, *value);
        provenance.insert(generator.label(), "static".to_string());
    }

    let assembly = bloch_assemble(&bloch)?;
    let components: BTreeMap<String, f64> = crate::ggm::canonical_order(dim)?
        .iter()
        .map(|g| (g.label(), bloch.component(g)))
        .collect();
    Ok(ReconstructionReport {
        scheme: set.scheme(),
        dim,
        matrix: assembly.mat,
        components,
        provenance,
        systems,
        psd: assembly.psd,
        psd_repair_applied: false,
        repaired: None,
        bloch,
    })
}

/// Read the scheme's static diagonal values out of a record's t = 0
/// entries, in ascending diagonal index order.
pub fn extract_statics(set: &ObservableSet, record: &MeasurementRecord) -> Result<Vec<f64>> {
    set.statics()
        .iter()
        .map(|g| record.value_at(&g.label(), 0.0))
        .collect()
}

/// Reconstruct a three-level state from its two four-instant time series.
pub fn reconstruct_qutrit(
    record: &MeasurementRecord,
    rates: &DecoherenceRates,
    grid: &TimeGrid,
) -> Result<ReconstructionReport> {
    let set = observables_for(Scheme::Qutrit, 3)?;
    reconstruct_with_statics(&set, record, rates, grid, &[])
}

/// Reconstruct a four-level state from two seven-instant time series plus
/// the static diagonal measurement, which must be present in the record.
pub fn reconstruct_fourlevel(
    record: &MeasurementRecord,
    rates: &DecoherenceRates,
    grid: &TimeGrid,
) -> Result<ReconstructionReport> {
    let set = observables_for(Scheme::Fourlevel, 4)?;
    let static_values = extract_statics(&set, record)?;
    let statics: Vec<(GgmIndex, f64)> = set
        .statics()
        .iter()
        .copied()
        .zip(static_values)
        .collect();
    reconstruct_with_statics(&set, record, rates, grid, &statics)
}

/// Reconstruct an N-level state from the general two-observable series
/// plus explicitly supplied static diagonal values (ascending diagonal
/// index, length N - 3).
///
/// The statics are an argument rather than read from the record so that
/// callers control their source; [`extract_statics`] recovers them from a
/// simulated record.
pub fn reconstruct_qudit(
    record: &MeasurementRecord,
    rates: &DecoherenceRates,
    grid: &TimeGrid,
    diag_static: &[f64],
) -> Result<ReconstructionReport> {
    let dim = record.dim;
    let set = observables_for(Scheme::Qudit, dim)?;
    let expected = set.statics().len();
    if diag_static.len() != expected {
        return Err(CoreError::StaticCountMismatch {
            expected,
            got: diag_static.len(),
        });
    }
    let statics: Vec<(GgmIndex, f64)> = set
        .statics()
        .iter()
        .copied()
        .zip(diag_static.iter().copied())
        .collect();
    reconstruct_with_statics(&set, record, rates, grid, &statics)
}

/// A statistical mixture of the four Bell states, stored as the first
/// three weights with the fourth derived from normalization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BellMixture {
    p: [f64; 4],
}

impl BellMixture {
    /// Probability-vector tolerance: weights may stick out of [0,1] by at
    /// most this much, absorbing rounding in otherwise exact pipelines.
    pub const TOL: f64 = 1e-9;

    pub fn new(p1: f64, p2: f64, p3: f64) -> Result<Self> {
        let p4 = 1.0 - p1 - p2 - p3;
        let p = [p1, p2, p3, p4];
        for (i, &pi) in p.iter().enumerate() {
            if !(-Self::TOL..=1.0 + Self::TOL).contains(&pi) {
                return Err(CoreError::InvalidProbabilities(format!(
                    "p{} = {pi} is outside [0, 1]",
                    i + 1
                )));
            }
        }
        Ok(Self { p })
    }

    /// All four weights, the last one derived.
    pub fn probabilities(&self) -> [f64; 4] {
        self.p
    }
}

/// The four Bell vectors in the computational basis, rows of amplitudes.
fn bell_vectors() -> [[Complex64; 4]; 4] {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let z = Complex64::new(0.0, 0.0);
    let a = Complex64::new(s, 0.0);
    let b = Complex64::new(-s, 0.0);
    [
        [a, z, z, a], // (|00> + |11>)/sqrt(2)
        [a, z, z, b], // (|00> - |11>)/sqrt(2)
        [z, a, a, z], // (|01> + |10>)/sqrt(2)
        [z, a, b, z], // (|01> - |10>)/sqrt(2)
    ]
}

/// The density matrix of a Bell mixture: sum_i p_i |bell_i><bell_i|.
pub fn bell_mixture_state(mixture: &BellMixture) -> Result<DensityMatrix> {
    let vectors = bell_vectors();
    let mut mat = ComplexMatrix::zeros(4)?;
    for (weight, vector) in mixture.probabilities().iter().zip(&vectors) {
        if *weight == 0.0 {
            continue;
        }
        for r in 0..4 {
            for c in 0..4 {
                let add = vector[r] * vector[c].conj() * *weight;
                mat.set(r, c, mat.get(r, c) + add);
            }
        }
    }
    // Weights can undershoot zero by BellMixture::TOL at most, so validate
    // with a matching slack.
    DensityMatrix::with_tolerance(mat, 10.0 * BellMixture::TOL)
}

/// Outcome of the single-observable Bell reconstruction. Raw weights are
/// the honest linear-inversion output; they can leave [0,1] under noise
/// and are clamped only on explicit request.
#[derive(Debug, Clone, Serialize)]
pub struct BellReport {
    /// Recovered projections onto the three informative generators, in
    /// system order: diagonal, then the (1,4) and (2,3) coherences.
    pub projections: [f64; 3],
    /// Raw recovered weights p1..p4.
    pub raw: [f64; 4],
    /// True when every raw weight already lies in [0,1] within tolerance.
    pub within_range: bool,
    pub system: SystemDiagnostics,
}

impl BellReport {
    /// The raw weights as a validated mixture. Fails when noise pushed
    /// them outside [0,1] beyond tolerance.
    pub fn mixture(&self) -> Result<BellMixture> {
        BellMixture::new(self.raw[0], self.raw[1], self.raw[2])
    }

    /// Clip the weights to [0,1] and renormalize their sum to one. The
    /// opt-in repair for noisy data.
    pub fn clamped(&self) -> Result<BellMixture> {
        let clipped: Vec<f64> = self.raw.iter().map(|&p| p.clamp(0.0, 1.0)).collect();
        let total: f64 = clipped.iter().sum();
        if total <= 0.0 {
            return Err(CoreError::InvalidProbabilities(
                "all weights clipped to zero".into(),
            ));
        }
        BellMixture::new(
            clipped[0] / total,
            clipped[1] / total,
            clipped[2] / total,
        )
    }
}

/// Recover a Bell mixture from the single-observable record.
///
/// The three-instant series determines the projections onto the diagonal
/// generator and the two surviving coherences; those three numbers invert
/// linearly to the first three weights. Only the rates of the (1,4) and
/// (2,3) pairs enter the system, so the remaining rates may take any
/// value, including frozen zeros, without affecting the result.
pub fn reconstruct_bell(
    record: &MeasurementRecord,
    rates: &DecoherenceRates,
    grid: &TimeGrid,
) -> Result<BellReport> {
    let set = observables_for(Scheme::Bell, 4)?;
    if record.scheme != Scheme::Bell || record.dim != 4 {
        return Err(CoreError::SchemeMismatch(format!(
            "record is from scheme {} at dimension {}, expected bell at 4",
            record.scheme, record.dim
        )));
    }
    if rates.dim() != 4 {
        return Err(CoreError::DimMismatch {
            expected: 4,
            got: rates.dim(),
        });
    }
    if grid.count() != 3 {
        return Err(CoreError::GridMismatch {
            expected: 3,
            got: grid.count(),
        });
    }

    let dynamic = &set.dynamic()[0];
    let rate_columns = vec![
        ("(1,4)".to_string(), rates.rate(1, 4)?),
        ("(2,3)".to_string(), rates.rate(2, 3)?),
    ];
    let cm = coefficient_matrix(&rate_columns, grid)?;
    let data = grid
        .instants()
        .iter()
        .map(|&t| record.value_at(dynamic.label(), t))
        .collect::<Result<Vec<f64>>>()?;
    let outcome = solve_projections(&cm, &data)?;
    let (u, v, w) = (
        outcome.projections[0],
        outcome.projections[1],
        outcome.projections[2],
    );

    // Invert the linear relations between the three projections and the
    // weights: u = p1 + p2 - 1/2, v = p1 - p2, w = p1 + p2 + 2 p3 - 1.
    let p1 = (u + 0.5 + v) / 2.0;
    let p2 = (u + 0.5 - v) / 2.0;
    let p3 = (w + 0.5 - u) / 2.0;
    let p4 = 1.0 - p1 - p2 - p3;
    let raw = [p1, p2, p3, p4];
    let within_range = raw
        .iter()
        .all(|&p| (-BellMixture::TOL..=1.0 + BellMixture::TOL).contains(&p));

    Ok(BellReport {
        projections: [u, v, w],
        raw,
        within_range,
        system: SystemDiagnostics {
            observable: dynamic.label().to_string(),
            cond: cm.cond(),
            residual_inf: outcome.residual_inf,
            det_sign: cm.det_sign(),
            det_log10_magnitude: cm.det_log10_magnitude(),
        },
    })
}

/// Result of the positivity repair.
#[derive(Debug, Clone)]
pub struct RepairOutcome {
    pub state: DensityMatrix,
    /// False when the input already was a valid state and came back
    /// untouched.
    pub applied: bool,
    /// Total magnitude of the clipped negative eigenvalues.
    pub clipped_mass: f64,
}

/// Clip negative eigenvalues to zero and renormalize the spectrum to unit
/// trace. Inputs that already satisfy the state conditions pass through
/// unchanged with `applied = false`.
///
/// A trace further than 0.1 from one is rejected: inversion preserves the
/// trace by construction, so such a matrix signals a broken pipeline, not
/// measurement noise.
pub fn psd_repair(raw: &ComplexMatrix) -> Result<RepairOutcome> {
    let dev = raw.hermitian_deviation();
    if dev > DEFAULT_TOL {
        return Err(CoreError::NotHermitian {
            max_dev: dev,
            tol: DEFAULT_TOL,
        });
    }
    let trace = raw.trace().re;
    if (trace - 1.0).abs() > 0.1 {
        return Err(CoreError::TraceOutOfRange { trace });
    }

    let eigenvalues = raw.hermitian_eigenvalues();
    let min_eig = eigenvalues[0];
    if min_eig >= -DEFAULT_TOL && (trace - 1.0).abs() <= DEFAULT_TOL {
        return Ok(RepairOutcome {
            state: DensityMatrix::with_tolerance(raw.clone(), DEFAULT_TOL)?,
            applied: false,
            clipped_mass: 0.0,
        });
    }

    // Full eigendecomposition on the symmetrized matrix, then rebuild
    // from the clipped, renormalized spectrum.
    let herm = raw
        .add(&raw.dagger())
        .expect("same dim")
        .scale(Complex64::new(0.5, 0.0));
    let eigen = herm.to_nalgebra().symmetric_eigen();
    let clipped: Vec<f64> = eigen.eigenvalues.iter().map(|&e| e.max(0.0)).collect();
    let clipped_mass: f64 = eigen
        .eigenvalues
        .iter()
        .filter(|&&e| e < 0.0)
        .map(|&e| -e)
        .sum();
    let total: f64 = clipped.iter().sum();
    if total <= 0.0 {
        return Err(CoreError::InvalidDensity {
            reason: "entire spectrum clipped to zero".into(),
        });
    }
    let n = raw.dim();
    let diag = DMatrix::<Complex64>::from_fn(n, n, |r, c| {
        if r == c {
            Complex64::new(clipped[r] / total, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let rebuilt = &eigen.eigenvectors * diag * eigen.eigenvectors.adjoint();
    let mat = ComplexMatrix::from_nalgebra(&rebuilt)?;
    Ok(RepairOutcome {
        state: DensityMatrix::new(mat)?,
        applied: true,
        clipped_mass,
    })
}
