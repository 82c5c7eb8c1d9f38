//! Experiment configuration: one JSON artifact capturing every input to
//! a run, with command-line flags overriding individual fields.
//!
//! The file shape mirrors the flag set:
//!
//! ```json
//! {
//!   "scheme": "qutrit",
//!   "dim": 3,
//!   "rates": {"dim": 3, "rates": {"1,2": 1.0, "1,3": 2.0, "2,3": 3.0}},
//!   "step": "auto",
//!   "sigma": 0.0,
//!   "seed": 7,
//!   "trials": 100,
//!   "out": "runs/qutrit",
//!   "force": false,
//!   "psd_repair": false
//! }
//! ```
//!
//! `rates` takes either an inline rate object or a string path to a
//! rates JSON file. `step` is a positive number or `"auto"`, which
//! resolves to 1/(2 γ_max). Boolean flags on the command line can turn a
//! setting on but not off.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Args;
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use phasedamp_core::channel::DecoherenceRates;
use phasedamp_core::measure::{default_step, Scheme, TimeGrid};

use crate::failure::Failure;

/// Base time step: an explicit value or automatic placement from the
/// fastest decay rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSpec {
    Auto,
    Fixed(f64),
}

impl Serialize for StepSpec {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            StepSpec::Auto => serializer.serialize_str("auto"),
            StepSpec::Fixed(v) => serializer.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for StepSpec {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct StepVisitor;

        impl<'de> Visitor<'de> for StepVisitor {
            type Value = StepSpec;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                write!(f, "\"auto\" or a number")
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<StepSpec, E> {
                if v == "auto" {
                    Ok(StepSpec::Auto)
                } else {
                    Err(E::custom(format!(
                        "step must be \"auto\" or a number, got {v:?}"
                    )))
                }
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<StepSpec, E> {
                Ok(StepSpec::Fixed(v))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<StepSpec, E> {
                Ok(StepSpec::Fixed(v as f64))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<StepSpec, E> {
                Ok(StepSpec::Fixed(v as f64))
            }
        }

        deserializer.deserialize_any(StepVisitor)
    }
}

impl FromStr for StepSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "auto" {
            return Ok(StepSpec::Auto);
        }
        s.parse::<f64>()
            .map(StepSpec::Fixed)
            .map_err(|_| format!("expected \"auto\" or a number, got {s:?}"))
    }
}

/// Where the rates come from: a path inside the config, or the rate
/// object written inline.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum RatesSource {
    File(PathBuf),
    Inline(DecoherenceRates),
}

/// Raw configuration file. Every field is optional; flags can supply
/// whatever the file leaves out, and resolution checks completeness.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub scheme: Option<Scheme>,
    pub dim: Option<usize>,
    pub rates: Option<RatesSource>,
    pub step: Option<StepSpec>,
    pub sigma: Option<f64>,
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub out: Option<PathBuf>,
    pub force: Option<bool>,
    pub psd_repair: Option<bool>,
}

/// Configuration flags shared by the experiment subcommands. Each one
/// overrides the matching config-file field.
#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// Experiment configuration JSON file
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Measurement scheme: qutrit, fourlevel, bell, or qudit
    #[arg(long)]
    pub scheme: Option<Scheme>,

    /// Hilbert space dimension (defaults from the scheme where fixed)
    #[arg(long)]
    pub dim: Option<usize>,

    /// Rates JSON file (overrides any rates in the config)
    #[arg(long, value_name = "FILE")]
    pub rates: Option<PathBuf>,

    /// Base time step: a positive number or "auto"
    #[arg(long)]
    pub step: Option<StepSpec>,

    /// Standard deviation of Gaussian measurement noise
    #[arg(long)]
    pub sigma: Option<f64>,

    /// Master seed for state generation and noise
    #[arg(long)]
    pub seed: Option<u64>,

    /// Number of roundtrip trials
    #[arg(long)]
    pub trials: Option<usize>,

    /// Output directory
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,

    /// Skip channel validation during simulate
    #[arg(long)]
    pub force: bool,

    /// Clip negative eigenvalues and renormalize when a reconstruction
    /// leaves the state body
    #[arg(long = "psd-repair")]
    pub psd_repair: bool,
}

/// Fully resolved inputs for one experiment.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    pub scheme: Scheme,
    pub dim: usize,
    pub rates: DecoherenceRates,
    pub step: StepSpec,
    pub sigma: f64,
    pub seed: u64,
    pub trials: usize,
    pub out: PathBuf,
    pub force: bool,
    pub psd_repair: bool,
}

pub fn load_config_file(path: &Path) -> Result<ConfigFile, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::in_file(path, e))?;
    serde_json::from_str(&text).map_err(|e| Failure::in_file(path, e))
}

pub fn load_rates_file(path: &Path) -> Result<DecoherenceRates, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::in_file(path, e))?;
    serde_json::from_str(&text).map_err(|e| Failure::in_file(path, e))
}

impl ExperimentConfig {
    /// Merge the config file (if any) with the flags, check consistency,
    /// and load rates from disk where referenced.
    pub fn resolve(args: &ConfigArgs) -> Result<Self, Failure> {
        let file = match &args.config {
            Some(path) => load_config_file(path)?,
            None => ConfigFile::default(),
        };

        let scheme = args.scheme.or(file.scheme).ok_or_else(|| {
            Failure::input("no scheme given; pass --scheme or set it in the config file")
        })?;
        let default_dim = match scheme {
            Scheme::Qutrit => Some(3),
            Scheme::Fourlevel | Scheme::Bell => Some(4),
            Scheme::Qudit => None,
        };
        let dim = args.dim.or(file.dim).or(default_dim).ok_or_else(|| {
            Failure::input("the qudit scheme needs an explicit --dim")
        })?;
        scheme
            .check_dim(dim)
            .map_err(|e| Failure::input(e.to_string()))?;

        let rates = match (&args.rates, file.rates) {
            (Some(path), _) => load_rates_file(path)?,
            (None, Some(RatesSource::File(path))) => load_rates_file(&path)?,
            (None, Some(RatesSource::Inline(r))) => r,
            (None, None) => {
                return Err(Failure::input(
                    "no rates given; pass --rates or set the config's rates field",
                ))
            }
        };
        if rates.dim() != dim {
            return Err(Failure::input(format!(
                "rates are for dimension {}, experiment is dimension {dim}",
                rates.dim()
            )));
        }

        let step = args.step.or(file.step).unwrap_or(StepSpec::Auto);
        if let StepSpec::Fixed(s) = step {
            if !(s.is_finite() && s > 0.0) {
                return Err(Failure::input(format!(
                    "step must be positive and finite, got {s}"
                )));
            }
        }

        let sigma = args.sigma.or(file.sigma).unwrap_or(0.0);
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(Failure::input(format!(
                "sigma must be non-negative and finite, got {sigma}"
            )));
        }

        let trials = args.trials.or(file.trials).unwrap_or(1);
        if trials == 0 {
            return Err(Failure::input("trials must be at least 1"));
        }

        Ok(ExperimentConfig {
            scheme,
            dim,
            rates,
            step,
            sigma,
            seed: args.seed.or(file.seed).unwrap_or(0),
            trials,
            out: args
                .out
                .clone()
                .or(file.out)
                .unwrap_or_else(|| PathBuf::from(".")),
            force: args.force || file.force.unwrap_or(false),
            psd_repair: args.psd_repair || file.psd_repair.unwrap_or(false),
        })
    }

    /// The base step with "auto" resolved against the configured rates.
    pub fn base_step(&self) -> f64 {
        match self.step {
            StepSpec::Fixed(s) => s,
            StepSpec::Auto => default_step(&self.rates),
        }
    }

    /// The arithmetic grid this scheme measures on.
    pub fn grid(&self) -> Result<TimeGrid, Failure> {
        TimeGrid::new(self.base_step(), self.scheme.grid_len(self.dim)).map_err(Failure::from)
    }
}
