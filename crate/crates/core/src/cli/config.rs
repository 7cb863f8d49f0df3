//! Run configuration: a flat `key = value` file, overridden by flags.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};
use std::fmt;
use std::path::{Path, PathBuf};

use crate::ensemble::EnsembleParams;
use crate::field::SchmidtPair;
use crate::interferometer::{DetectorModel, Interferometer};
use crate::polarimetry::schmidt_from_dop;

/// Every accepted key.
pub const KEYS: &[&str] = &[
    "kappa1",
    "dop",
    "intensity",
    "n_realizations",
    "samples_per_realization",
    "seed",
    "detector_noise",
    "phase_error",
    "angle_grid_step",
    "output_path",
    "output_format",
];

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{origin}: expected `key = value`, found `{text}`")]
    Syntax { origin: String, text: String },
    #[error("{origin}: unknown key `{key}`")]
    UnknownKey { origin: String, key: String },
    #[error("{origin}: key `{key}` given more than once")]
    DuplicateKey { origin: String, key: String },
    #[error("{origin}: key `{key}` has no value")]
    MissingValue { origin: String, key: String },
    #[error("kappa1 and dop are mutually exclusive; give only one")]
    Conflict,
    #[error("{key} = `{value}` is not a valid {expected}")]
    Malformed {
        key: String,
        value: String,
        expected: &'static str,
    },
    #[error("{key} = {value} is out of range: {range}")]
    OutOfRange {
        key: String,
        value: String,
        range: &'static str,
    },
}

impl ConfigError {
    pub fn exit_code(&self) -> i32 {
        match self {
            ConfigError::Io { .. } => super::EXIT_IO,
            _ => super::EXIT_USAGE,
        }
    }
}

/// How the field's polarization was specified.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Polarization {
    Kappa1(f64),
    Dop(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        })
    }
}

/// A validated run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub polarization: Polarization,
    /// Schmidt coefficients resolved from `polarization`.
    pub schmidt: SchmidtPair,
    pub intensity: f64,
    pub n_realizations: usize,
    pub samples_per_realization: usize,
    pub seed: u64,
    pub detector_noise: f64,
    pub phase_error: f64,
    pub angle_grid_step: f64,
    pub output_path: Option<PathBuf>,
    pub output_format: OutputFormat,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            polarization: Polarization::Dop(0.0),
            schmidt: SchmidtPair::unpolarized(),
            intensity: 1.0,
            n_realizations: EnsembleParams::DEFAULT_REALIZATIONS,
            samples_per_realization: EnsembleParams::DEFAULT_SAMPLES,
            seed: 0,
            detector_noise: 0.0,
            phase_error: 0.0,
            angle_grid_step: PI / 36.0,
            output_path: None,
            output_format: OutputFormat::Csv,
        }
    }
}

impl RunConfig {
    pub fn ensemble_params(&self) -> EnsembleParams {
        EnsembleParams::new(self.n_realizations, self.samples_per_realization, self.seed)
            .expect("sizes validated at load time")
    }

    pub fn interferometer(&self) -> Interferometer {
        Interferometer {
            detector: DetectorModel::new(self.detector_noise, self.detector_noise > 0.0)
                .expect("noise validated at load time"),
            phase_error: self.phase_error,
        }
    }

    /// Seed of the detector-noise streams, distinct from the field seed.
    pub fn noise_seed(&self) -> u64 {
        self.seed ^ 0xD7E7_C70A_5EED_0001
    }
}

/// One `key = value` assignment and where it came from.
#[derive(Debug, Clone)]
pub struct Assignment {
    pub origin: String,
    pub key: String,
    pub value: String,
}

/// Parse config text into assignments. `#` starts a comment.
pub fn parse_assignments(text: &str, source: &str) -> Result<Vec<Assignment>, ConfigError> {
    let mut out: Vec<Assignment> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let origin = format!("{source}:{}", i + 1);
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError::Syntax {
                origin,
                text: line.to_string(),
            });
        };
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            return Err(ConfigError::Syntax {
                origin,
                text: line.to_string(),
            });
        }
        if out.iter().any(|a| a.key == key) {
            return Err(ConfigError::DuplicateKey {
                origin,
                key: key.to_string(),
            });
        }
        out.push(Assignment {
            origin,
            key: key.to_string(),
            value: value.to_string(),
        });
    }
    Ok(out)
}

/// Load the optional config file, apply flag overrides, and validate.
pub fn parse_config(file: Option<&Path>, overrides: &[(String, String)]) -> Result<RunConfig, ConfigError> {
    let mut assignments = match file {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
                path: path.to_path_buf(),
                source,
            })?;
            parse_assignments(&text, &path.display().to_string())?
        }
        None => Vec::new(),
    };
    for a in &assignments {
        if !KEYS.contains(&a.key.as_str()) {
            return Err(ConfigError::UnknownKey {
                origin: a.origin.clone(),
                key: a.key.clone(),
            });
        }
    }
    for (key, value) in overrides {
        let key = key.replace('-', "_");
        if !KEYS.contains(&key.as_str()) {
            return Err(ConfigError::UnknownKey {
                origin: "command line".into(),
                key,
            });
        }
        // A polarization flag replaces whichever form the file used.
        if key == "kappa1" || key == "dop" {
            assignments.retain(|a| a.origin == "command line" || (a.key != "kappa1" && a.key != "dop"));
        }
        assignments.retain(|a| a.key != key);
        assignments.push(Assignment {
            origin: "command line".into(),
            key,
            value: value.clone(),
        });
    }
    build(&assignments)
}

fn build(assignments: &[Assignment]) -> Result<RunConfig, ConfigError> {
    let mut cfg = RunConfig::default();
    let mut polarization = None;
    for a in assignments {
        if a.value.is_empty() {
            return Err(ConfigError::MissingValue {
                origin: a.origin.clone(),
                key: a.key.clone(),
            });
        }
        let key = a.key.as_str();
        let v = a.value.as_str();
        match key {
            "kappa1" | "dop" => {
                if polarization.is_some() {
                    return Err(ConfigError::Conflict);
                }
                let x = real(key, v)?;
                polarization = Some(if key == "kappa1" {
                    if !(FRAC_1_SQRT_2 - 1e-12..=1.0).contains(&x) {
                        return Err(out_of_range(key, v, "1/√2 ≤ kappa1 ≤ 1"));
                    }
                    Polarization::Kappa1(x)
                } else {
                    if !(0.0..=1.0).contains(&x) {
                        return Err(out_of_range(key, v, "0 ≤ dop ≤ 1"));
                    }
                    Polarization::Dop(x)
                });
            }
            "intensity" => {
                cfg.intensity = real(key, v)?;
                if !(cfg.intensity > 0.0) {
                    return Err(out_of_range(key, v, "intensity > 0"));
                }
            }
            "n_realizations" => cfg.n_realizations = positive(key, v)?,
            "samples_per_realization" => cfg.samples_per_realization = positive(key, v)?,
            "seed" => {
                cfg.seed = v.parse().map_err(|_| malformed(key, v, "unsigned 64-bit integer"))?;
            }
            "detector_noise" => {
                cfg.detector_noise = real(key, v)?;
                if !(0.0..DetectorModel::MAX_RELATIVE_NOISE).contains(&cfg.detector_noise) {
                    return Err(out_of_range(key, v, "0 ≤ detector_noise < 0.1"));
                }
            }
            "phase_error" => cfg.phase_error = angle(key, v)?,
            "angle_grid_step" => {
                cfg.angle_grid_step = angle(key, v)?;
                if !(cfg.angle_grid_step > 0.0 && cfg.angle_grid_step <= FRAC_PI_2) {
                    return Err(out_of_range(key, v, "0 < angle_grid_step ≤ π/2"));
                }
            }
            "output_path" => cfg.output_path = Some(PathBuf::from(v)),
            "output_format" => {
                cfg.output_format = match v {
                    "csv" => OutputFormat::Csv,
                    "json" => OutputFormat::Json,
                    _ => return Err(malformed(key, v, "format (csv or json)")),
                }
            }
            _ => {
                return Err(ConfigError::UnknownKey {
                    origin: a.origin.clone(),
                    key: a.key.clone(),
                })
            }
        }
    }
    if let Some(p) = polarization {
        cfg.polarization = p;
    }
    cfg.schmidt = match cfg.polarization {
        Polarization::Kappa1(k) => SchmidtPair::from_kappa1(k.max(FRAC_1_SQRT_2)),
        Polarization::Dop(p) => schmidt_from_dop(p),
    }
    .expect("polarization validated above");
    Ok(cfg)
}

fn malformed(key: &str, value: &str, expected: &'static str) -> ConfigError {
    ConfigError::Malformed {
        key: key.to_string(),
        value: value.to_string(),
        expected,
    }
}

fn out_of_range(key: &str, value: &str, range: &'static str) -> ConfigError {
    ConfigError::OutOfRange {
        key: key.to_string(),
        value: value.to_string(),
        range,
    }
}

fn real(key: &str, v: &str) -> Result<f64, ConfigError> {
    v.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| malformed(key, v, "finite number"))
}

fn positive(key: &str, v: &str) -> Result<usize, ConfigError> {
    let n: usize = v.parse().map_err(|_| malformed(key, v, "positive integer"))?;
    if n == 0 {
        return Err(out_of_range(key, v, "at least 1"));
    }
    Ok(n)
}

/// Radians, or degrees with a `deg` suffix.
pub fn parse_angle(v: &str) -> Option<f64> {
    let v = v.trim();
    let (number, scale) = match v.strip_suffix("deg") {
        Some(n) => (n.trim(), PI / 180.0),
        None => (v, 1.0),
    };
    number.parse::<f64>().ok().filter(|x| x.is_finite()).map(|x| x * scale)
}

fn angle(key: &str, v: &str) -> Result<f64, ConfigError> {
    parse_angle(v).ok_or_else(|| malformed(key, v, "angle (radians, or degrees with a `deg` suffix)"))
}

/// Comma-separated angles.
pub fn parse_angle_list(v: &str) -> Option<Vec<f64>> {
    v.split(',').map(parse_angle).collect()
}
