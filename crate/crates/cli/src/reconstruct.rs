//! The reconstruct command: invert a measurement CSV back into a state
//! report (or a Bell weight report), optionally scored against a
//! provided ground-truth state.

use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde::Serialize;

use phasedamp_core::mat::{ComplexMatrix, DensityMatrix};
use phasedamp_core::measure::{observables_for, parse_csv, MeasurementRecord, Scheme, TimeGrid};
use phasedamp_core::recon::{
    extract_statics, reconstruct_bell, reconstruct_fourlevel, reconstruct_qudit,
    reconstruct_qutrit, BellReport, ReconstructionReport,
};

use crate::config::ExperimentConfig;
use crate::failure::Failure;

#[derive(Serialize)]
struct StateDocument {
    #[serde(flatten)]
    report: ReconstructionReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    trace_distance: Option<f64>,
}

#[derive(Serialize)]
struct BellDocument {
    #[serde(flatten)]
    report: BellReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    trace_distance: Option<f64>,
}

pub fn run(
    cfg: &ExperimentConfig,
    data_path: &Path,
    truth_path: Option<&Path>,
) -> Result<(), Failure> {
    let text = fs::read_to_string(data_path).map_err(|e| Failure::in_file(data_path, e))?;
    let entries = parse_csv(&text).map_err(|e| Failure::in_file(data_path, e))?;
    let record = MeasurementRecord {
        scheme: cfg.scheme,
        dim: cfg.dim,
        sigma: cfg.sigma,
        seed: None,
        entries,
    };

    let truth: Option<DensityMatrix> = match truth_path {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Failure::in_file(path, e))?;
            let state: DensityMatrix =
                serde_json::from_str(&text).map_err(|e| Failure::in_file(path, e))?;
            if state.dim() != cfg.dim {
                return Err(Failure::input(format!(
                    "{}: truth state has dimension {}, experiment wants {}",
                    path.display(),
                    state.dim(),
                    cfg.dim
                )));
            }
            Some(state)
        }
        None => None,
    };

    let grid = cfg.grid()?;
    fs::create_dir_all(&cfg.out)?;
    let report_path = cfg.out.join("report.json");

    if cfg.scheme == Scheme::Bell {
        let report = reconstruct_bell(&record, &cfg.rates, &grid)?;
        let trace_distance = truth
            .as_ref()
            .map(|t| hermitian_trace_distance(&bell_weights_matrix(&report.raw), t.mat()));
        println!(
            "recovered Bell weights [{:.6}, {:.6}, {:.6}, {:.6}], within range: {}",
            report.raw[0],
            report.raw[1],
            report.raw[2],
            report.raw[3],
            if report.within_range { "yes" } else { "no" }
        );
        if let Some(td) = trace_distance {
            println!("trace distance to truth: {td:.3e}");
        }
        write_json(&report_path, &BellDocument {
            report,
            trace_distance,
        })?;
    } else {
        let mut report = reconstruct_record(cfg, &record, &grid)?;
        if cfg.psd_repair && !report.psd.psd {
            report.apply_psd_repair()?;
        }
        let final_mat = report
            .repaired
            .as_ref()
            .map(|d| d.mat().clone())
            .unwrap_or_else(|| report.matrix.clone());
        let trace_distance = truth
            .as_ref()
            .map(|t| hermitian_trace_distance(&final_mat, t.mat()));
        let worst_cond = report
            .systems
            .iter()
            .map(|s| s.cond)
            .fold(0.0f64, f64::max);
        println!(
            "reconstructed {} [dim {}]: psd = {}, worst cond = {:.3e}, repair applied = {}",
            cfg.scheme.name(),
            cfg.dim,
            report.psd.psd,
            worst_cond,
            report.psd_repair_applied
        );
        if let Some(td) = trace_distance {
            println!("trace distance to truth: {td:.3e}");
        }
        write_json(&report_path, &StateDocument {
            report,
            trace_distance,
        })?;
    }
    println!("wrote {}", report_path.display());
    Ok(())
}

/// Dispatch a record to the reconstruction routine for its scheme. Bell
/// records have their own weight-report path and are not handled here.
pub(crate) fn reconstruct_record(
    cfg: &ExperimentConfig,
    record: &MeasurementRecord,
    grid: &TimeGrid,
) -> Result<ReconstructionReport, Failure> {
    let report = match cfg.scheme {
        Scheme::Qutrit => reconstruct_qutrit(record, &cfg.rates, grid)?,
        Scheme::Fourlevel => reconstruct_fourlevel(record, &cfg.rates, grid)?,
        Scheme::Qudit => {
            let set = observables_for(Scheme::Qudit, cfg.dim)?;
            let statics = extract_statics(&set, record)?;
            reconstruct_qudit(record, &cfg.rates, grid, &statics)?
        }
        Scheme::Bell => {
            return Err(Failure::other(
                "bell records reconstruct into weight reports, not state reports",
            ))
        }
    };
    Ok(report)
}

/// Trace distance between two Hermitian matrices, without requiring
/// either to be a valid state. Used for scoring raw reconstructions that
/// noise may have pushed slightly outside the state body.
pub(crate) fn hermitian_trace_distance(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    let diff = a.sub(b).expect("dimensions checked upstream");
    0.5 * diff.hermitian_eigenvalues().iter().map(|e| e.abs()).sum::<f64>()
}

/// The Bell-diagonal density matrix with the given weights, built
/// entrywise so that raw (possibly out-of-range) weights are accepted.
pub(crate) fn bell_weights_matrix(weights: &[f64; 4]) -> ComplexMatrix {
    let [p1, p2, p3, p4] = *weights;
    let mut mat = ComplexMatrix::zeros(4).expect("dim 4 is valid");
    mat.set(0, 0, Complex64::new((p1 + p2) / 2.0, 0.0));
    mat.set(3, 3, Complex64::new((p1 + p2) / 2.0, 0.0));
    mat.set(1, 1, Complex64::new((p3 + p4) / 2.0, 0.0));
    mat.set(2, 2, Complex64::new((p3 + p4) / 2.0, 0.0));
    mat.set(0, 3, Complex64::new((p1 - p2) / 2.0, 0.0));
    mat.set(3, 0, Complex64::new((p1 - p2) / 2.0, 0.0));
    mat.set(1, 2, Complex64::new((p3 - p4) / 2.0, 0.0));
    mat.set(2, 1, Complex64::new((p3 - p4) / 2.0, 0.0));
    mat
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Failure::other(e.to_string()))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}
