//! The roundtrip command: generate seeded random states, run simulate
//! and reconstruct in-process, and score every trial against the state
//! it started from.

use std::fs;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use phasedamp_core::channel::build_dynamic_matrix;
use phasedamp_core::mat::{fidelity, random_density_matrix, DensityMatrix};
use phasedamp_core::measure::{measure_series, observables_for, Scheme};
use phasedamp_core::recon::{bell_mixture_state, reconstruct_bell, BellMixture};

use crate::config::ExperimentConfig;
use crate::failure::Failure;
use crate::reconstruct::{bell_weights_matrix, hermitian_trace_distance, reconstruct_record, write_json};

#[derive(Serialize)]
struct TrialResult {
    trial: usize,
    seed: u64,
    trace_distance: f64,
    hs_distance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    fidelity: Option<f64>,
    psd: bool,
    repair_applied: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_weight_error: Option<f64>,
}

#[derive(Serialize)]
struct Aggregate {
    trials: usize,
    max_trace_distance: f64,
    mean_trace_distance: f64,
    median_trace_distance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    min_fidelity: Option<f64>,
    repairs_applied: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_weight_error: Option<f64>,
}

#[derive(Serialize)]
struct RoundtripDocument<'a> {
    config: &'a ExperimentConfig,
    trials: Vec<TrialResult>,
    aggregate: Aggregate,
}

pub fn run(cfg: &ExperimentConfig) -> Result<(), Failure> {
    let set = observables_for(cfg.scheme, cfg.dim)?;
    let grid = cfg.grid()?;
    let dm = build_dynamic_matrix(cfg.rates.clone());

    let mut results = Vec::with_capacity(cfg.trials);
    for trial in 0..cfg.trials {
        let seed = cfg.seed.wrapping_add(trial as u64);
        let result = if cfg.scheme == Scheme::Bell {
            let mixture = draw_bell_mixture(seed);
            let rho = bell_mixture_state(&mixture)?;
            let record = measure_series(&rho, &dm, &set, &grid, cfg.sigma, Some(seed))?;
            let report = reconstruct_bell(&record, &cfg.rates, &grid)?;
            let max_weight_error = report
                .raw
                .iter()
                .zip(mixture.probabilities())
                .map(|(got, want)| (got - want).abs())
                .fold(0.0f64, f64::max);
            let recon_mat = bell_weights_matrix(&report.raw);
            let diff = hermitian_trace_distance(&recon_mat, rho.mat());
            TrialResult {
                trial,
                seed,
                trace_distance: diff,
                hs_distance: recon_mat
                    .sub(rho.mat())
                    .expect("same dimension")
                    .frobenius_norm(),
                fidelity: None,
                psd: report.within_range,
                repair_applied: false,
                max_weight_error: Some(max_weight_error),
            }
        } else {
            let rho = random_density_matrix(cfg.dim, seed)?;
            let record = measure_series(&rho, &dm, &set, &grid, cfg.sigma, Some(seed))?;
            let mut report = reconstruct_record(cfg, &record, &grid)?;
            if cfg.psd_repair && !report.psd.psd {
                report.apply_psd_repair()?;
            }
            let final_mat = report
                .repaired
                .as_ref()
                .map(|d| d.mat().clone())
                .unwrap_or_else(|| report.matrix.clone());
            // Fidelity needs a valid state on both sides; noise can leave
            // the raw reconstruction slightly outside the body, in which
            // case the trial reports distances only.
            let fid = DensityMatrix::with_tolerance(final_mat.clone(), 1e-6)
                .ok()
                .and_then(|state| fidelity(&rho, &state).ok());
            TrialResult {
                trial,
                seed,
                trace_distance: hermitian_trace_distance(&final_mat, rho.mat()),
                hs_distance: final_mat
                    .sub(rho.mat())
                    .expect("same dimension")
                    .frobenius_norm(),
                fidelity: fid,
                psd: report.psd.psd,
                repair_applied: report.psd_repair_applied,
                max_weight_error: None,
            }
        };
        results.push(result);
    }

    // Aggregation is order-independent; keep the contract visible even
    // though sequential generation already leaves the list sorted.
    results.sort_by_key(|r| r.trial);

    let mut tds: Vec<f64> = results.iter().map(|r| r.trace_distance).collect();
    tds.sort_by(|a, b| a.partial_cmp(b).expect("distances are finite"));
    let aggregate = Aggregate {
        trials: results.len(),
        max_trace_distance: *tds.last().expect("at least one trial"),
        mean_trace_distance: tds.iter().sum::<f64>() / tds.len() as f64,
        median_trace_distance: median(&tds),
        min_fidelity: results
            .iter()
            .filter_map(|r| r.fidelity)
            .min_by(|a, b| a.partial_cmp(b).expect("fidelities are finite")),
        repairs_applied: results.iter().filter(|r| r.repair_applied).count(),
        max_weight_error: results
            .iter()
            .filter_map(|r| r.max_weight_error)
            .max_by(|a, b| a.partial_cmp(b).expect("weight errors are finite")),
    };

    println!(
        "{} trials: max trace distance {:.3e}, median {:.3e}, repairs applied {}",
        aggregate.trials,
        aggregate.max_trace_distance,
        aggregate.median_trace_distance,
        aggregate.repairs_applied
    );
    if let Some(w) = aggregate.max_weight_error {
        println!("max Bell weight error: {w:.3e}");
    }

    fs::create_dir_all(&cfg.out)?;
    let path = cfg.out.join("roundtrip.json");
    write_json(&path, &RoundtripDocument {
        config: cfg,
        trials: results,
        aggregate,
    })?;
    println!("wrote {}", path.display());
    Ok(())
}

/// A uniform draw from the weight simplex: four unit-exponential
/// variates (inverse CDF over ChaCha uniforms) normalized to sum one.
fn draw_bell_mixture(seed: u64) -> BellMixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draws = [0.0f64; 4];
    for value in &mut draws {
        let u: f64 = rng.gen();
        *value = -(1.0 - u).ln();
    }
    let total: f64 = draws.iter().sum();
    if total <= 0.0 {
        // all four uniforms landed on exactly zero; fall back to the
        // center of the simplex rather than dividing by zero
        return BellMixture::new(0.25, 0.25, 0.25).expect("flat mixture is valid");
    }
    BellMixture::new(draws[0] / total, draws[1] / total, draws[2] / total)
        .expect("normalized weights lie in the simplex")
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}
