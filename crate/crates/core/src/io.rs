//! JSON measurement files and calibration reports.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::accuracy::propagate;
use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::identification::{system_for, CalibrationResult, Method};
use crate::kinematics::JointOffsets;
use crate::measurement::{MeasurementSet, MeasurementShape, NoiseModel, GENERATOR_ID};

pub const SCHEMA_VERSION: u32 = 1;
pub const UNITS: &str = "mm";
pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Measurement data sets from the prototype, as shipped with the toolkit.
pub mod fixtures {
    pub const EXPERIMENT_1: &str = include_str!("../fixtures/experiment1.json");
    pub const EXPERIMENT_2: &str = include_str!("../fixtures/experiment2.json");
    pub const EXPERIMENT_3: &str = include_str!("../fixtures/experiment3.json");

    /// Fixture text by experiment number (1 to 3).
    pub fn experiment(n: usize) -> Option<&'static str> {
        match n {
            1 => Some(EXPERIMENT_1),
            2 => Some(EXPERIMENT_2),
            3 => Some(EXPERIMENT_3),
            _ => None,
        }
    }
}

/// How a simulated file was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationInfo {
    pub offsets: JointOffsets,
    pub noise: NoiseModel,
    pub generator: String,
    pub repetitions: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quantize: Option<f64>,
}

/// On-disk measurement set.
///
/// Each required key is given either as a single value in `values` or as an
/// array of replicate readings in `repetitions`, which is averaged on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementFile {
    pub schema_version: u32,
    pub units: String,
    pub method: MeasurementShape,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry: Option<Geometry>,
    #[serde(default)]
    pub values: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub repetitions: BTreeMap<String, Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationInfo>,
}

impl MeasurementFile {
    pub fn parse(text: &str) -> Result<MeasurementFile> {
        let file: MeasurementFile = serde_json::from_str(text)
            .map_err(|e| Error::InvalidInput(format!("malformed measurement file: {e}")))?;
        file.validate()?;
        Ok(file)
    }

    pub fn from_set(set: &MeasurementSet) -> MeasurementFile {
        let values = set.shape().names().into_iter().zip(set.values()).collect();
        MeasurementFile {
            schema_version: SCHEMA_VERSION,
            units: UNITS.to_string(),
            method: set.shape(),
            source: None,
            geometry: None,
            values,
            repetitions: BTreeMap::new(),
            simulation: None,
        }
    }

    /// File holding each replicate cycle separately.
    pub fn from_replicates(sets: &[MeasurementSet]) -> Result<MeasurementFile> {
        let first = sets
            .first()
            .ok_or_else(|| Error::InvalidInput("no replicate sets".into()))?;
        let shape = first.shape();
        let mut repetitions: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for set in sets {
            if set.shape() != shape {
                return Err(Error::InvalidInput("replicates of different shapes".into()));
            }
            for (name, v) in shape.names().into_iter().zip(set.values()) {
                repetitions.entry(name).or_default().push(v);
            }
        }
        Ok(MeasurementFile {
            repetitions,
            values: BTreeMap::new(),
            ..MeasurementFile::from_set(first)
        })
    }

    fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.schema_version != SCHEMA_VERSION {
            problems.push(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        if self.units != UNITS {
            problems.push(format!(
                "units: expected \"{UNITS}\", got \"{}\"",
                self.units
            ));
        }
        if let Some(g) = &self.geometry {
            if let Err(e) = g.validate() {
                problems.push(format!("geometry: {e}"));
            }
        }
        let names = self.method.names();
        for name in &names {
            match (self.values.get(name), self.repetitions.get(name)) {
                (None, None) => problems.push(format!("missing key '{name}'")),
                (Some(_), Some(_)) => problems.push(format!(
                    "key '{name}' given both as a value and as repetitions"
                )),
                (None, Some(reps)) if reps.is_empty() => {
                    problems.push(format!("key '{name}' has no repetitions"))
                }
                _ => {}
            }
        }
        for key in self.values.keys().chain(self.repetitions.keys()) {
            if !names.contains(key) {
                problems.push(format!("unexpected key '{key}' for {} data", self.method));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidInput(problems.join("; ")))
        }
    }

    /// Measurement set in the shape's own order, replicates averaged.
    pub fn measurements(&self) -> Result<MeasurementSet> {
        self.validate()?;
        let values: Vec<f64> = self
            .method
            .names()
            .iter()
            .map(|name| match self.values.get(name) {
                Some(v) => *v,
                None => {
                    let reps = &self.repetitions[name];
                    reps.iter().sum::<f64>() / reps.len() as f64
                }
            })
            .collect();
        MeasurementSet::from_values(self.method, &values)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("measurement file serialises");
        s.push('\n');
        s
    }
}

/// Records how a simulated file was produced.
pub fn simulation_info(
    offsets: JointOffsets,
    noise: NoiseModel,
    repetitions: usize,
    quantize: Option<f64>,
) -> SimulationInfo {
    SimulationInfo {
        offsets,
        noise,
        generator: GENERATOR_ID.to_string(),
        repetitions,
        quantize,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverDiagnostics {
    pub iterations: usize,
    pub converged: bool,
    pub gradient_norm: f64,
}

/// Result of a calibration run as written by the command line tool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationReport {
    pub schema_version: u32,
    pub toolkit_version: String,
    /// `sha256:` followed by the hex digest of the input file bytes.
    pub input_digest: String,
    pub method: Method,
    pub units: String,
    pub geometry: Geometry,
    pub offsets: JointOffsets,
    /// Observed minus predicted, keyed by measurement name.
    pub residuals: BTreeMap<String, f64>,
    pub residual_rms: f64,
    pub sigma_hat: f64,
    /// Predicted offset accuracy when the gauge noise equals `sigma_hat`.
    pub sigma_rho: f64,
    pub diagnostics: SolverDiagnostics,
}

impl CalibrationReport {
    pub fn new(
        result: &CalibrationResult,
        geom: &Geometry,
        input: &[u8],
    ) -> Result<CalibrationReport> {
        let sys = system_for(result.method.system(), geom);
        let n = sys.rows();
        let noise = nalgebra::DMatrix::identity(n, n) * (2.0 * result.sigma_hat * result.sigma_hat);
        // full double-posture data share isotropic readings
        let noise = if n == 12 {
            crate::accuracy::g_matrix() * (result.sigma_hat * result.sigma_hat)
        } else {
            noise
        };
        let v = propagate(&sys.design, &noise)?;
        Ok(CalibrationReport {
            schema_version: SCHEMA_VERSION,
            toolkit_version: TOOLKIT_VERSION.to_string(),
            input_digest: digest(input),
            method: result.method,
            units: UNITS.to_string(),
            geometry: *geom,
            offsets: result.offsets,
            residuals: result
                .residual_names
                .iter()
                .cloned()
                .zip(result.residuals.iter().copied())
                .collect(),
            residual_rms: result.residual_rms,
            sigma_hat: result.sigma_hat,
            sigma_rho: crate::accuracy::sigma_rho(&v),
            diagnostics: SolverDiagnostics {
                iterations: result.iterations,
                converged: result.converged,
                gradient_norm: result.gradient_norm,
            },
        })
    }

    pub fn parse(text: &str) -> Result<CalibrationReport> {
        let report: CalibrationReport = serde_json::from_str(text)
            .map_err(|e| Error::InvalidInput(format!("malformed report: {e}")))?;
        if report.schema_version != SCHEMA_VERSION {
            return Err(Error::InvalidInput(format!(
                "report schema_version {} is not supported",
                report.schema_version
            )));
        }
        Ok(report)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialises");
        s.push('\n');
        s
    }
}

pub fn digest(bytes: &[u8]) -> String {
    let hash = Sha256::digest(bytes);
    let hex: String = hash.iter().map(|b| format!("{b:02x}")).collect();
    format!("sha256:{hex}")
}
