//! The simulate command: evolve an initial state under the configured
//! channel and write its measurement record plus a metadata sidecar.

use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use phasedamp_core::channel::{
    build_dynamic_matrix, default_sample_grid, validate_channel, RATE_DISTINCTNESS_RTOL,
};
use phasedamp_core::mat::{DensityMatrix, DEFAULT_TOL};
use phasedamp_core::measure::{measure_series, observables_for, to_csv, RecordSidecar};

use crate::config::ExperimentConfig;
use crate::failure::Failure;

pub fn run(cfg: &ExperimentConfig, state_path: &Path) -> Result<(), Failure> {
    let text = fs::read_to_string(state_path).map_err(|e| Failure::in_file(state_path, e))?;
    let rho0: DensityMatrix =
        serde_json::from_str(&text).map_err(|e| Failure::in_file(state_path, e))?;
    if rho0.dim() != cfg.dim {
        return Err(Failure::input(format!(
            "{}: state has dimension {}, experiment wants {}",
            state_path.display(),
            rho0.dim(),
            cfg.dim
        )));
    }

    // Degenerate non-frozen rates would produce a record that cannot be
    // inverted later; reject the configuration up front.
    if let Some((a, b, diff)) = cfg.rates.first_coincident_pair(RATE_DISTINCTNESS_RTOL) {
        return Err(Failure::degenerate(format!(
            "rates for pairs ({},{}) and ({},{}) coincide (gap {diff:.3e}); \
             the resulting records would not be invertible",
            a.0, a.1, b.0, b.1
        )));
    }

    if !cfg.force {
        let dm = build_dynamic_matrix(cfg.rates.clone());
        let report = validate_channel(&dm, &default_sample_grid(&cfg.rates), DEFAULT_TOL)?;
        if let Some(err) = report.into_error() {
            return Err(Failure::channel(format!(
                "{err} (pass --force to simulate anyway)"
            )));
        }
    }

    let set = observables_for(cfg.scheme, cfg.dim)?;
    let grid = cfg.grid()?;
    let dm = build_dynamic_matrix(cfg.rates.clone());
    let record = measure_series(&rho0, &dm, &set, &grid, cfg.sigma, Some(cfg.seed))?;

    fs::create_dir_all(&cfg.out)?;
    let csv_path = cfg.out.join("measurements.csv");
    fs::write(&csv_path, to_csv(&record))?;

    let sidecar = RecordSidecar {
        scheme: cfg.scheme,
        dim: cfg.dim,
        step: grid.step(),
        count: grid.count(),
        sigma: cfg.sigma,
        seed: record.seed,
        rates: cfg.rates.clone(),
        created_unix: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .ok()
            .map(|d| d.as_secs()),
    };
    let sidecar_path = cfg.out.join("sidecar.json");
    let mut sidecar_json =
        serde_json::to_string_pretty(&sidecar).map_err(|e| Failure::other(e.to_string()))?;
    sidecar_json.push('\n');
    fs::write(&sidecar_path, sidecar_json)?;

    println!(
        "simulated {} [dim {}] over {} instants (step {}), sigma = {}",
        cfg.scheme.name(),
        cfg.dim,
        grid.count(),
        grid.step(),
        cfg.sigma
    );
    println!(
        "wrote {} ({} rows) and {}",
        csv_path.display(),
        record.entries.len(),
        sidecar_path.display()
    );
    Ok(())
}
