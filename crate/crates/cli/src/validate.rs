//! The validate command: check a rate file against the channel validity
//! conditions, report rate distinctness, and list the schemes the
//! configuration supports.

use std::path::Path;

use phasedamp_core::channel::{
    build_dynamic_matrix, default_sample_grid, validate_channel, RATE_DISTINCTNESS_RTOL,
};
use phasedamp_core::mat::DEFAULT_TOL;

use crate::config::load_rates_file;
use crate::failure::Failure;

pub fn run(rates_path: &Path, dim: Option<usize>) -> Result<(), Failure> {
    let rates = load_rates_file(rates_path)?;
    if let Some(d) = dim {
        if d != rates.dim() {
            return Err(Failure::input(format!(
                "{}: rates are for dimension {}, --dim says {d}",
                rates_path.display(),
                rates.dim()
            )));
        }
    }

    let dm = build_dynamic_matrix(rates.clone());
    let report = validate_channel(&dm, &default_sample_grid(&rates), DEFAULT_TOL)?;

    let verdict = |ok: bool| if ok { "pass" } else { "fail" };
    println!("rates: {rates}");
    println!("sampled {} time instants", report.samples);
    println!(
        "condition 1 (positive semidefinite at sampled times): {}",
        verdict(report.violations.is_empty())
    );
    for violation in report.violations.iter().take(5) {
        println!(
            "  negative eigenvalue {:.6e} at t = {}",
            violation.min_eigenvalue, violation.t
        );
    }
    if report.violations.len() > 5 {
        println!("  ... and {} more", report.violations.len() - 5);
    }
    println!("condition 2 (unit diagonal): {}", verdict(report.diagonal_ok));
    println!("condition 3 (symmetric): {}", verdict(report.symmetric_ok));
    println!(
        "condition 4 (all-ones at t = 0): {}",
        verdict(report.initial_ok)
    );
    println!("minimum eigenvalue seen: {:.6e}", report.min_eigenvalue_seen);

    let distinct = rates.pairwise_distinct(RATE_DISTINCTNESS_RTOL);
    println!(
        "non-frozen rates pairwise distinct: {}",
        if distinct { "yes" } else { "no" }
    );
    if !distinct {
        println!("reconstruction unsupported: degenerate rates");
    }

    let schemes = match rates.dim() {
        3 => "qutrit, qudit",
        4 => "fourlevel, bell, qudit",
        _ => "qudit",
    };
    println!("schemes for dimension {}: {}", rates.dim(), schemes);
    Ok(())
}
