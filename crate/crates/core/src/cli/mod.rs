//! Command-line front end.
//!
//! Subcommands `tomography`, `scan`, `bell` and `simulate-experiment` read a
//! [`RunConfig`](config::RunConfig) from an optional `key = value` file plus
//! flags, compute, and only then write their records. Exit codes: 0 success,
//! 1 usage or configuration error, 2 physically degenerate configuration,
//! 3 I/O error.

pub mod config;
pub mod output;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bell::{chsh, gisin_settings, maximize_bell_with, scan_correlation, BellResult, BellSettings};
use crate::correlation::{measurement_rng, Analytic, CorrelationProvider, EnsembleProtocol, SymbolicProtocol};
use crate::ensemble::{generate, FieldEnsemble};
use crate::error::Error;
use crate::field::{Angle, BeamState, Component, SchmidtPair};
use crate::interferometer::{measure_quad, SampledBeam};
use crate::polarimetry::{tomography, tomography_from_stokes, StokesVector, Tomography};

use config::{parse_angle_list, parse_config, ConfigError, RunConfig};
use output::{scan_svg, write_atomic, Table, Value};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DEGENERATE: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Physics(#[from] Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(e) => e.exit_code(),
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Physics(Error::Degenerate(_)) => EXIT_DEGENERATE,
            CliError::Physics(Error::InvalidParameter(_)) => EXIT_USAGE,
            CliError::Io { .. } => EXIT_IO,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "bellfield",
    version,
    about = "CHSH tests on classically entangled stochastic light"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

/// Flags mirroring the config keys.
#[derive(Debug, Args)]
struct GlobalArgs {
    /// Config file of `key = value` lines
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_name = "N")]
    seed: Option<String>,
    /// Output file (default: standard output)
    #[arg(long, global = true, visible_alias = "output_path", value_name = "PATH")]
    output: Option<String>,
    /// csv or json
    #[arg(long, global = true, visible_alias = "output_format", value_name = "FORMAT")]
    format: Option<String>,
    /// Larger Schmidt coefficient
    #[arg(long, global = true, allow_hyphen_values = true)]
    kappa1: Option<String>,
    /// Degree of polarization
    #[arg(long, global = true, allow_hyphen_values = true)]
    dop: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    intensity: Option<String>,
    #[arg(long, global = true, alias = "n_realizations")]
    n_realizations: Option<String>,
    #[arg(long, global = true, alias = "samples_per_realization")]
    samples_per_realization: Option<String>,
    /// Relative detector noise
    #[arg(long, global = true, alias = "detector_noise", allow_hyphen_values = true)]
    detector_noise: Option<String>,
    /// Interferometer phase error (radians, or degrees with `deg`)
    #[arg(long, global = true, alias = "phase_error", allow_hyphen_values = true)]
    phase_error: Option<String>,
    #[arg(long, global = true, alias = "angle_grid_step", allow_hyphen_values = true)]
    angle_grid_step: Option<String>,
}

impl GlobalArgs {
    fn overrides(&self) -> Vec<(String, String)> {
        let pairs = [
            ("seed", &self.seed),
            ("output_path", &self.output),
            ("output_format", &self.format),
            ("kappa1", &self.kappa1),
            ("dop", &self.dop),
            ("intensity", &self.intensity),
            ("n_realizations", &self.n_realizations),
            ("samples_per_realization", &self.samples_per_realization),
            ("detector_noise", &self.detector_noise),
            ("phase_error", &self.phase_error),
            ("angle_grid_step", &self.angle_grid_step),
        ];
        pairs
            .into_iter()
            .filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone())))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    /// Closed-form correlations
    Analytic,
    /// Interferometer applied to the exact beam state
    Protocol,
    /// Interferometer applied to sampled fields
    MonteCarlo,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Stokes parameters, degree of polarization and Schmidt coefficients
    Tomography {
        /// Measured Stokes values: S1,S2,S3 normalized to S0, or S0,S1,S2,S3
        #[arg(long, allow_hyphen_values = true, value_name = "VALUES")]
        stokes: Option<String>,
        /// Also write the generated field samples to this file
        #[arg(long, value_name = "PATH")]
        dump: Option<PathBuf>,
    },
    /// Correlation C(a, b) across a at fixed values of b
    Scan {
        /// Fixed b values, comma separated
        #[arg(
            long = "b",
            allow_hyphen_values = true,
            value_name = "ANGLES",
            default_value = "0,0.785398163,1.57079633,2.35619449"
        )]
        b: String,
        #[arg(long, value_enum, default_value_t = Method::Analytic)]
        method: Method,
        /// SVG plot path (default: the output path with an .svg extension)
        #[arg(long, value_name = "PATH")]
        svg: Option<PathBuf>,
    },
    /// Bell parameter at given, Gisin, or optimized settings
    Bell {
        /// Optimize all four angles (default)
        #[arg(long, conflicts_with_all = ["settings", "gisin"])]
        maximize: bool,
        /// a,a',b,b'
        #[arg(long, allow_hyphen_values = true, value_name = "ANGLES", conflicts_with = "gisin")]
        settings: Option<String>,
        /// Closed-form optimal settings of the field
        #[arg(long)]
        gisin: bool,
        #[arg(long, value_enum, default_value_t = Method::Analytic)]
        method: Method,
    },
    /// Full measurement: tomography, stripping, and the interferometric
    /// projections on a sampled field
    SimulateExperiment {
        /// a,a',b,b' (default: optimal settings for the measured field)
        #[arg(long, allow_hyphen_values = true, value_name = "ANGLES")]
        settings: Option<String>,
    },
}

/// What a successful command produced.
#[derive(Debug, Default)]
struct Outcome {
    main: String,
    extra_files: Vec<(PathBuf, Vec<u8>)>,
    summary: Vec<String>,
}

/// Run the CLI on `args` (including the program name) and return the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let cfg = parse_config(cli.global.config.as_deref(), &cli.global.overrides())?;
    let outcome = match cli.command {
        Command::Tomography { stokes, dump } => cmd_tomography(&cfg, stokes.as_deref(), dump)?,
        Command::Scan { b, method, svg } => cmd_scan(&cfg, &b, method, svg)?,
        Command::Bell {
            maximize: _,
            settings,
            gisin,
            method,
        } => {
            let request = match (settings, gisin) {
                (Some(s), _) => SettingsRequest::Given(parse_settings(&s)?),
                (None, true) => SettingsRequest::Gisin,
                (None, false) => SettingsRequest::Maximize,
            };
            cmd_bell(&cfg, request, method)?
        }
        Command::SimulateExperiment { settings } => {
            let settings = settings.as_deref().map(parse_settings).transpose()?;
            cmd_simulate_experiment(&cfg, settings)?
        }
    };
    emit(&cfg, outcome)
}

fn emit(cfg: &RunConfig, outcome: Outcome) -> Result<(), CliError> {
    match &cfg.output_path {
        Some(path) => write_atomic(path, outcome.main.as_bytes()).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?,
        None => print!("{}", outcome.main),
    }
    for (path, bytes) in &outcome.extra_files {
        write_atomic(path, bytes).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
    }
    for line in outcome.summary {
        eprintln!("{line}");
    }
    Ok(())
}

fn parse_settings(s: &str) -> Result<BellSettings, CliError> {
    match parse_angle_list(s).as_deref() {
        Some(&[a, ap, b, bp]) => Ok(BellSettings::new(a, ap, b, bp)),
        _ => Err(CliError::Usage(format!(
            "settings must be four angles a,a',b,b', got `{s}`"
        ))),
    }
}

fn sample_field(cfg: &RunConfig) -> Result<(FieldEnsemble, Tomography), CliError> {
    let ensemble = generate(cfg.schmidt, cfg.intensity, cfg.ensemble_params())?;
    let tomo = tomography(&ensemble)?;
    Ok((ensemble, tomo))
}

fn kappa_summary(t: &Tomography) -> String {
    format!(
        "DOP = {:.6}, kappa = ({:.6}, {:.6})",
        t.dop,
        t.schmidt.kappa1(),
        t.schmidt.kappa2()
    )
}

/// `tomography`: one record with the Stokes vector and derived quantities.
pub fn cmd_tomography_record(t: &Tomography) -> Table {
    let mut table = Table::new(&[
        "S0",
        "S1",
        "S2",
        "S3",
        "dop",
        "kappa1",
        "kappa2",
        "frame_rad",
        "samples",
    ]);
    table.push(vec![
        Value::Real(t.stokes.s0),
        Value::Real(t.stokes.s1),
        Value::Real(t.stokes.s2),
        Value::Real(t.stokes.s3),
        Value::Real(t.dop),
        Value::Real(t.schmidt.kappa1()),
        Value::Real(t.schmidt.kappa2()),
        Value::Real(t.frame.radians()),
        Value::Int(t.samples as i64),
    ]);
    table
}

fn cmd_tomography(cfg: &RunConfig, stokes: Option<&str>, dump: Option<PathBuf>) -> Result<Outcome, CliError> {
    let mut outcome = Outcome::default();
    let tomo = match stokes {
        Some(text) => {
            if dump.is_some() {
                return Err(CliError::Usage("--dump needs a sampled field, not --stokes".into()));
            }
            let values: Vec<f64> = text
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|_| CliError::Usage(format!("Stokes values must be numbers, got `{text}`")))?;
            let stokes = match *values.as_slice() {
                [s1, s2, s3] => StokesVector::new(1.0, s1, s2, s3)?,
                [s0, s1, s2, s3] => StokesVector::new(s0, s1, s2, s3)?,
                _ => return Err(CliError::Usage("--stokes takes three or four values".into())),
            };
            tomography_from_stokes(stokes)?
        }
        None => {
            let (ensemble, tomo) = sample_field(cfg)?;
            if let Some(path) = dump {
                let mut bytes = Vec::new();
                ensemble.write_dump(&mut bytes).expect("writing to memory");
                outcome.extra_files.push((path, bytes));
            }
            tomo
        }
    };
    outcome.main = cmd_tomography_record(&tomo).render(cfg.output_format);
    outcome.summary.push(kappa_summary(&tomo));
    Ok(outcome)
}

/// Evaluate `f` with the correlation provider selected by `method`. The
/// Monte Carlo provider sets its stripping polarizer from the tomography of
/// the sampled field.
fn with_provider<R>(
    cfg: &RunConfig,
    method: Method,
    f: impl FnOnce(&dyn CorrelationProvider, SchmidtPair) -> Result<R, CliError>,
) -> Result<R, CliError> {
    match method {
        Method::Analytic => f(&Analytic { schmidt: cfg.schmidt }, cfg.schmidt),
        Method::Protocol => {
            let provider = SymbolicProtocol {
                source: BeamState::schmidt(cfg.schmidt, cfg.intensity)?,
                strip_kappa: cfg.schmidt,
                setup: cfg.interferometer(),
                noise_seed: cfg.noise_seed(),
            };
            f(&provider, cfg.schmidt)
        }
        Method::MonteCarlo => {
            let (ensemble, tomo) = sample_field(cfg)?;
            let provider = EnsembleProtocol::new(&ensemble, tomo.schmidt, cfg.interferometer(), cfg.noise_seed());
            f(&provider, tomo.schmidt)
        }
    }
}

fn scan_grid(step: f64) -> Vec<Angle> {
    let n = (std::f64::consts::PI / step).round() as usize;
    (0..=n).map(|i| Angle::new(i as f64 * step)).collect()
}

fn cmd_scan(cfg: &RunConfig, b_list: &str, method: Method, svg: Option<PathBuf>) -> Result<Outcome, CliError> {
    let bs = parse_angle_list(b_list)
        .ok_or_else(|| CliError::Usage(format!("--b must be a list of angles, got `{b_list}`")))?;
    let grid = scan_grid(cfg.angle_grid_step);
    let mut table = Table::new(&["a_rad", "b_rad", "C", "stderr"]);
    with_provider(cfg, method, |provider, _| {
        for &b in &bs {
            for p in scan_correlation(Angle::new(b), &grid, provider)? {
                table.push(vec![
                    Value::Real(p.a.radians()),
                    Value::Real(p.b.radians()),
                    Value::Real(p.correlation.value),
                    Value::Real(p.correlation.stderr),
                ]);
            }
        }
        Ok(())
    })?;
    let csv = table.to_csv();
    let svg_path = svg.or_else(|| cfg.output_path.as_deref().map(default_svg_path));
    let mut outcome = Outcome::default();
    if let Some(path) = svg_path {
        let plot = scan_svg(&csv).map_err(CliError::Usage)?;
        outcome.extra_files.push((path, plot.into_bytes()));
    }
    outcome.main = table.render(cfg.output_format);
    outcome
        .summary
        .push(format!("{} curves, {} points each", bs.len(), grid.len()));
    Ok(outcome)
}

#[derive(Debug, Clone, Copy)]
enum SettingsRequest {
    Given(BellSettings),
    Gisin,
    Maximize,
}

fn bell_table(results: &[BellResult]) -> Table {
    let mut table = Table::new(&[
        "a_rad",
        "a_prime_rad",
        "b_rad",
        "b_prime_rad",
        "C_ab",
        "C_apb",
        "C_abp",
        "C_apbp",
        "B",
        "stderr",
    ]);
    for r in results {
        let s = r.settings;
        let mut row: Vec<Value> = [s.a, s.a_prime, s.b, s.b_prime]
            .iter()
            .map(|x| Value::Real(x.radians()))
            .collect();
        row.extend(r.correlations.iter().map(|&c| Value::Real(c)));
        row.push(Value::Real(r.b_value));
        row.push(Value::Real(r.stderr));
        table.push(row);
    }
    table
}

fn bell_summary(r: &BellResult) -> String {
    if r.stderr > 0.0 {
        format!("B = {:.6} ± {:.6}", r.b_value, r.stderr)
    } else {
        format!("B = {:.6}", r.b_value)
    }
}

fn cmd_bell(cfg: &RunConfig, request: SettingsRequest, method: Method) -> Result<Outcome, CliError> {
    let result = with_provider(cfg, method, |provider, kappa| {
        let result = match (request, method) {
            (SettingsRequest::Given(s), _) => chsh(s, provider)?,
            (SettingsRequest::Gisin, _) => chsh(gisin_settings(kappa)?, provider)?,
            // Sampled correlations are too costly to optimize directly; the
            // optimum of the measured field's closed form is evaluated instead.
            (SettingsRequest::Maximize, Method::MonteCarlo) => {
                let best = maximize_bell_with(&Analytic { schmidt: kappa }, cfg.angle_grid_step)?;
                chsh(best.settings, provider)?
            }
            (SettingsRequest::Maximize, _) => maximize_bell_with(provider, cfg.angle_grid_step)?,
        };
        Ok(result)
    })?;
    Ok(Outcome {
        main: bell_table(&[result]).render(cfg.output_format),
        extra_files: Vec::new(),
        summary: vec![bell_summary(&result)],
    })
}

fn cmd_simulate_experiment(cfg: &RunConfig, settings: Option<BellSettings>) -> Result<Outcome, CliError> {
    let (ensemble, tomo) = sample_field(cfg)?;
    let kappa = tomo.schmidt;
    let settings = match settings {
        Some(s) => s,
        None => maximize_bell_with(&Analytic { schmidt: kappa }, cfg.angle_grid_step)?.settings,
    };
    let setup = cfg.interferometer();
    let source = SampledBeam::source(&ensemble);
    let mut table = Table::new(&["a_rad", "b_rad", "j", "k", "I_total", "I_arm", "I_aux", "I_out", "P"]);
    for (a, b) in settings.pairs() {
        let mut rng = measurement_rng(cfg.noise_seed(), a, b);
        let q = measure_quad(&source, kappa, a, b, &setup, &mut rng)?;
        for j in Component::BOTH {
            for k in Component::BOTH {
                let m = &q.records[j.index()][k.index()];
                table.push(vec![
                    Value::Real(a.radians()),
                    Value::Real(b.radians()),
                    Value::Int(j.label() as i64),
                    Value::Int(k.label() as i64),
                    Value::Real(m.readings.i_total),
                    Value::Real(m.readings.i_arm),
                    Value::Real(m.readings.i_aux),
                    Value::Real(m.readings.i_out),
                    Value::Real(m.p),
                ]);
            }
        }
    }
    let provider = EnsembleProtocol::new(&ensemble, kappa, setup, cfg.noise_seed());
    let result = chsh(settings, &provider)?;
    Ok(Outcome {
        main: table.render(cfg.output_format),
        extra_files: Vec::new(),
        summary: vec![kappa_summary(&tomo), bell_summary(&result)],
    })
}

/// Path the `scan` SVG goes to when `--svg` is not given.
pub fn default_svg_path(output: &Path) -> PathBuf {
    output.with_extension("svg")
}
