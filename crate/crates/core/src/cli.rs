//! Command line front end: `calibrate`, `simulate`, `accuracy`, `montecarlo`, `sensitivity`.
//!
//! Structured output goes to stdout as JSON; `--verbose` adds a human-readable
//! summary on stderr. Exit codes: 0 success, 1 input error, 2 numerical failure.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::accuracy::{
    monte_carlo, offset_covariance, EquationSet, MonteCarloConfig, MonteCarloReport,
    OffsetCovariance,
};
use crate::error::Error;
use crate::geometry::Geometry;
use crate::identification::{calibrate, Method};
use crate::io::{simulation_info, CalibrationReport, MeasurementFile};
use crate::kinematics::{sensitivity_table, JointOffsets};
use crate::measurement::{simulate, MeasurementSet, MeasurementShape, NoiseModel};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "orthocal",
    version,
    about = "Joint-offset calibration of Orthoglide-type manipulators"
)]
pub struct Cli {
    /// Print a human-readable summary on stderr.
    #[arg(long, short, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Identify joint offsets from a measurement file.
    Calibrate {
        /// Measurement file (JSON).
        file: PathBuf,
        #[arg(long, value_enum)]
        method: CliMethod,
        /// Geometry override (JSON).
        #[arg(long)]
        geometry: Option<PathBuf>,
        /// Also write the report to this path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate a measurement file for given offsets.
    Simulate {
        /// Offsets `x,y,z` in mm.
        #[arg(long, value_parser = parse_offsets, allow_hyphen_values = true)]
        offsets: JointOffsets,
        #[arg(long, default_value_t = 0.0)]
        sigma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "double-reduced")]
        method: CliShape,
        /// Number of measurement cycles, stored as replicate arrays when above one.
        #[arg(long, default_value_t = 1)]
        repetitions: usize,
        /// Round every reading to a multiple of this resolution, mm.
        #[arg(long)]
        quantize: Option<f64>,
        #[arg(long)]
        geometry: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Analytic offset accuracy of the six and twelve equation methods.
    Accuracy {
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long)]
        geometry: Option<PathBuf>,
    },
    /// Monte-Carlo study of the estimator accuracy.
    Montecarlo {
        #[arg(long, value_parser = parse_offsets, allow_hyphen_values = true, default_value = "0.1,0.1,0.1")]
        offsets: JointOffsets,
        #[arg(long, default_value_t = 0.01)]
        sigma: f64,
        #[arg(long, default_value_t = 10_000)]
        runs: usize,
        #[arg(long, default_value_t = 20)]
        replications: usize,
        #[arg(long, value_enum, default_value = "nonlinear6")]
        method: CliMethod,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Run a preset study instead of the flags above.
        #[arg(long, value_enum)]
        reproduce: Option<Preset>,
        #[arg(long)]
        geometry: Option<PathBuf>,
    },
    /// First-order sensitivity of the leg deviations to the offsets.
    Sensitivity {
        #[arg(long, value_parser = parse_offsets, allow_hyphen_values = true, default_value = "1,1,1")]
        offsets: JointOffsets,
        #[arg(long)]
        geometry: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CliMethod {
    ClosedForm,
    LinearSingle,
    Linear6,
    Linear12,
    Nonlinear6,
    Nonlinear12,
}

impl From<CliMethod> for Method {
    fn from(m: CliMethod) -> Method {
        match m {
            CliMethod::ClosedForm => Method::ClosedForm,
            CliMethod::LinearSingle => Method::LinearSingle,
            CliMethod::Linear6 => Method::Linear6,
            CliMethod::Linear12 => Method::Linear12,
            CliMethod::Nonlinear6 => Method::Nonlinear6,
            CliMethod::Nonlinear12 => Method::Nonlinear12,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CliShape {
    SinglePosture,
    DoubleFull,
    DoubleReduced,
}

impl From<CliShape> for MeasurementShape {
    fn from(s: CliShape) -> MeasurementShape {
        match s {
            CliShape::SinglePosture => MeasurementShape::SinglePosture,
            CliShape::DoubleFull => MeasurementShape::DoubleFull,
            CliShape::DoubleReduced => MeasurementShape::DoubleReduced,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Preset {
    /// Six and twelve equation methods at 0.1 mm and 1 mm offsets, sigma 0.01 mm, 20 x 10000 runs.
    Table3,
}

fn parse_offsets(s: &str) -> Result<JointOffsets, String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(format!("expected three comma-separated values, got '{s}'"));
    }
    let mut v = [0.0; 3];
    for (slot, part) in v.iter_mut().zip(&parts) {
        *slot = part
            .trim()
            .parse::<f64>()
            .map_err(|e| format!("'{part}': {e}"))?;
        if !slot.is_finite() {
            return Err(format!("'{part}' is not finite"));
        }
    }
    Ok(JointOffsets::from_array(v))
}

/// Failure of a command, carrying its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl From<Error> for CliError {
    fn from(e: Error) -> CliError {
        CliError {
            code: if e.is_numerical() {
                EXIT_NUMERICAL
            } else {
                EXIT_INPUT
            },
            message: e.to_string(),
        }
    }
}

fn input_error(message: impl Into<String>) -> CliError {
    CliError {
        code: EXIT_INPUT,
        message: message.into(),
    }
}

struct Io<'a> {
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
    verbose: bool,
}

impl Io<'_> {
    fn emit(&mut self, text: &str) -> Result<(), CliError> {
        self.out
            .write_all(text.as_bytes())
            .map_err(|e| input_error(format!("cannot write output: {e}")))
    }

    fn note(&mut self, text: &str) {
        if self.verbose {
            let _ = writeln!(self.err, "{text}");
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<'a, I, S>(args: I, out: &'a mut dyn Write, err: &'a mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let sink: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = write!(sink, "{}", e.render());
            return code;
        }
    };
    let mut io = Io {
        out,
        err,
        verbose: cli.verbose,
    };
    match dispatch(cli.command, &mut io) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(io.err, "error: {}", e.message);
            e.code
        }
    }
}

fn dispatch(command: Command, io: &mut Io<'_>) -> Result<(), CliError> {
    match command {
        Command::Calibrate {
            file,
            method,
            geometry,
            out,
        } => cmd_calibrate(
            &file,
            method.into(),
            geometry.as_deref(),
            out.as_deref(),
            io,
        ),
        Command::Simulate {
            offsets,
            sigma,
            seed,
            method,
            repetitions,
            quantize,
            geometry,
            out,
        } => {
            let geom = load_geometry(geometry.as_deref(), None)?;
            let text = cmd_simulate(
                offsets,
                sigma,
                seed,
                method.into(),
                repetitions,
                quantize,
                &geom,
            )?;
            if let Some(path) = out {
                write_file(&path, &text)?;
            }
            io.emit(&text)
        }
        Command::Accuracy { sigma, geometry } => {
            let geom = load_geometry(geometry.as_deref(), None)?;
            cmd_accuracy(sigma, &geom, io)
        }
        Command::Montecarlo {
            offsets,
            sigma,
            runs,
            replications,
            method,
            seed,
            reproduce,
            geometry,
        } => {
            let geom = load_geometry(geometry.as_deref(), None)?;
            match reproduce {
                Some(Preset::Table3) => cmd_reference_study(seed, &geom, io),
                None => {
                    let config = MonteCarloConfig {
                        true_offsets: offsets,
                        sigma,
                        runs,
                        replications,
                        method: method.into(),
                        seed,
                    };
                    let report = monte_carlo(&config, &geom)?;
                    io.note(&format!(
                        "{}: pooled std {:.5} mm (+/- {:.5}) over {} x {} runs, {} failures",
                        config.method,
                        report.pooled_std,
                        report.pooled_std_spread,
                        replications,
                        runs,
                        report.failed_runs
                    ));
                    io.emit(&to_json(&report))
                }
            }
        }
        Command::Sensitivity { offsets, geometry } => {
            let geom = load_geometry(geometry.as_deref(), None)?;
            cmd_sensitivity(&offsets, &geom, io)
        }
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| input_error(format!("cannot read {}: {e}", path.display())))
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text)
        .map_err(|e| input_error(format!("cannot write {}: {e}", path.display())))
}

fn load_geometry(path: Option<&Path>, fallback: Option<Geometry>) -> Result<Geometry, CliError> {
    let geom = match path {
        Some(p) => {
            let bytes = read_file(p)?;
            serde_json::from_slice::<Geometry>(&bytes)
                .map_err(|e| input_error(format!("malformed geometry file {}: {e}", p.display())))?
        }
        None => fallback.unwrap_or_default(),
    };
    geom.validate()?;
    Ok(geom)
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serialisable");
    s.push('\n');
    s
}

fn cmd_calibrate(
    file: &Path,
    method: Method,
    geometry: Option<&Path>,
    out: Option<&Path>,
    io: &mut Io<'_>,
) -> Result<(), CliError> {
    let bytes = read_file(file)?;
    let text = std::str::from_utf8(&bytes)
        .map_err(|_| input_error(format!("{} is not UTF-8", file.display())))?;
    let mfile = MeasurementFile::parse(text)
        .map_err(|e| input_error(format!("{}: {e}", file.display())))?;
    let geom = load_geometry(geometry, mfile.geometry)?;
    let set = mfile.measurements()?;
    let result = calibrate(&set, method, &geom)?;
    let report = CalibrationReport::new(&result, &geom, &bytes)?;
    io.note(&format!(
        "{method}: offsets ({:+.4}, {:+.4}, {:+.4}) mm, residual rms {:.4} mm, sigma_hat {:.4} mm, {} iterations",
        report.offsets.x, report.offsets.y, report.offsets.z, report.residual_rms, report.sigma_hat, report.diagnostics.iterations
    ));
    for (name, r) in &report.residuals {
        io.note(&format!("  {name:>12} {r:+.4}"));
    }
    let json = report.to_json();
    if let Some(path) = out {
        write_file(path, &json)?;
    }
    io.emit(&json)
}

/// Produces the JSON text of a simulated measurement file.
pub fn cmd_simulate(
    offsets: JointOffsets,
    sigma: f64,
    seed: u64,
    shape: MeasurementShape,
    repetitions: usize,
    quantize: Option<f64>,
    geom: &Geometry,
) -> Result<String, CliError> {
    offsets.check(geom)?;
    if let Some(q) = quantize {
        if !(q > 0.0 && q.is_finite()) {
            return Err(input_error(format!("--quantize must be positive, got {q}")));
        }
    }
    let noise = NoiseModel::new(sigma, seed)?;
    let mut generator = noise.generator();
    let mut sets = simulate(shape, &offsets, geom, &mut generator, repetitions)?;
    if let Some(q) = quantize {
        sets = sets
            .iter()
            .map(|s| {
                let v: Vec<f64> = s.values().iter().map(|x| (x / q).round() * q).collect();
                MeasurementSet::from_values(shape, &v)
            })
            .collect::<Result<_, _>>()?;
    }
    let mut file = if repetitions == 1 {
        MeasurementFile::from_set(&sets[0])
    } else {
        MeasurementFile::from_replicates(&sets)?
    };
    if *geom != Geometry::PROTOTYPE {
        file.geometry = Some(*geom);
    }
    file.simulation = Some(simulation_info(offsets, noise, repetitions, quantize));
    Ok(file.to_json())
}

#[derive(Serialize)]
struct AccuracyEntry {
    sigma_rho: f64,
    factor: f64,
    covariance: [[f64; 3]; 3],
}

impl AccuracyEntry {
    fn new(c: &OffsetCovariance, sigma: f64) -> AccuracyEntry {
        let v = c.v;
        AccuracyEntry {
            sigma_rho: c.sigma_rho,
            factor: if sigma > 0.0 {
                c.sigma_rho / sigma
            } else {
                f64::NAN
            },
            covariance: [0, 1, 2].map(|i| [0, 1, 2].map(|j| v[(i, j)])),
        }
    }
}

#[derive(Serialize)]
struct AccuracyOutput {
    sigma: f64,
    six: AccuracyEntry,
    twelve: AccuracyEntry,
}

fn cmd_accuracy(sigma: f64, geom: &Geometry, io: &mut Io<'_>) -> Result<(), CliError> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(input_error(format!(
            "--sigma must be positive, got {sigma}"
        )));
    }
    let six = offset_covariance(geom, sigma, EquationSet::Six)?;
    let twelve = offset_covariance(geom, sigma, EquationSet::Twelve)?;
    io.note(&format!(
        "sigma_rho / sigma: six {:.2}, twelve {:.2}",
        six.sigma_rho / sigma,
        twelve.sigma_rho / sigma
    ));
    let out = AccuracyOutput {
        sigma,
        six: AccuracyEntry::new(&six, sigma),
        twelve: AccuracyEntry::new(&twelve, sigma),
    };
    io.emit(&to_json(&out))
}

#[derive(Serialize)]
struct Table3Row {
    method: Method,
    offset: f64,
    pooled_std: f64,
    pooled_std_spread: f64,
    failed_runs: usize,
}

/// The two-by-two accuracy study: six and twelve equations at 0.1 mm and 1 mm offsets.
pub fn reference_study(seed: u64, geom: &Geometry) -> Result<Vec<MonteCarloReport>, Error> {
    let mut out = Vec::new();
    for method in [Method::Nonlinear6, Method::Nonlinear12] {
        for (k, offset) in [0.1, 1.0].into_iter().enumerate() {
            let config = MonteCarloConfig {
                true_offsets: JointOffsets::new(offset, offset, offset),
                sigma: 0.01,
                runs: 10_000,
                replications: 20,
                method,
                seed: seed.wrapping_add(1000 * k as u64),
            };
            out.push(monte_carlo(&config, geom)?);
        }
    }
    Ok(out)
}

fn cmd_reference_study(seed: u64, geom: &Geometry, io: &mut Io<'_>) -> Result<(), CliError> {
    let reports = reference_study(seed, geom)?;
    let rows: Vec<Table3Row> = reports
        .iter()
        .map(|r| Table3Row {
            method: r.config.method,
            offset: r.config.true_offsets.x,
            pooled_std: r.pooled_std,
            pooled_std_spread: r.pooled_std_spread,
            failed_runs: r.failed_runs,
        })
        .collect();
    io.note("method        offset 0.1 mm          offset 1.0 mm");
    for pair in rows.chunks(2) {
        io.note(&format!(
            "{:<12}  {:.4} mm (+/- {:.4})  {:.4} mm (+/- {:.4})",
            pair[0].method.as_str(),
            pair[0].pooled_std,
            pair[0].pooled_std_spread,
            pair[1].pooled_std,
            pair[1].pooled_std_spread
        ));
    }
    io.emit(&to_json(&rows))
}

fn cmd_sensitivity(
    offsets: &JointOffsets,
    geom: &Geometry,
    io: &mut Io<'_>,
) -> Result<(), CliError> {
    let rows = sensitivity_table(geom, offsets);
    io.note("posture            leg  plane  deviation (mm)");
    for row in &rows {
        let group = match row.group {
            crate::kinematics::PostureGroup::Isotropic => "isotropic".to_string(),
            crate::kinematics::PostureGroup::Displacement(a) => format!("max/min {a}"),
        };
        let values: Vec<String> = row.values.iter().map(|(_, v)| format!("{v:+.4}")).collect();
        io.note(&format!(
            "{group:<18} {:<4} {:<6} {}",
            row.leg.to_string(),
            row.plane.to_string(),
            values.join(" / ")
        ));
    }
    io.emit(&to_json(&rows))
}
