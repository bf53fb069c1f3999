//! Estimation of the joint offsets from leg-deviation observations.

use std::fmt;

use nalgebra::{DMatrix, DVector, RowVector3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Extreme, Geometry};
use crate::kinematics::JointOffsets;
use crate::measurement::{
    double_posture_jacobian, reduced_jacobian, Channel, DoublePostureMeasurements, MeasurementSet,
    MeasurementShape, SinglePostureMeasurements,
};

/// Relative singular-value threshold used for the numerical rank.
const RANK_TOLERANCE: f64 = 1e-10;

/// Linear-model coefficients, all dimensionless.
///
/// `a*` belong to the single-posture system, `b1, c1, b2, c2` to the twelve
/// equation system and `b, c` to the six equation system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationCoefficients {
    pub a1: f64,
    pub a2: f64,
    pub b1: f64,
    pub c1: f64,
    pub b2: f64,
    pub c2: f64,
    pub b: f64,
    pub c: f64,
}

impl CalibrationCoefficients {
    fn bc(&self, extreme: Extreme) -> (f64, f64) {
        match extreme {
            Extreme::Max => (self.b1, self.c1),
            Extreme::Min => (self.b2, self.c2),
        }
    }
}

pub fn coefficients(geom: &Geometry) -> CalibrationCoefficients {
    let hi = geom.alpha_max();
    let lo = geom.alpha_min();
    let a1 = geom.rho_max / (geom.leg_length.powi(2) - geom.rho_max.powi(2)).sqrt();
    let a2 = geom.rho_min / (geom.leg_length.powi(2) - geom.rho_min.powi(2)).sqrt();
    let b1 = hi.sin;
    let c1 = (0.5 + hi.sin) * hi.tan;
    let b2 = lo.sin;
    let c2 = (0.5 + lo.sin) * lo.tan;
    CalibrationCoefficients {
        a1,
        a2,
        b1,
        c1,
        b2,
        c2,
        b: b1 - b2,
        c: c1 - c2,
    }
}

/// Which linear calibration system a matrix belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SystemKind {
    SinglePosture,
    TwelveEquation,
    SixEquation,
}

impl SystemKind {
    pub fn shape(self) -> MeasurementShape {
        match self {
            SystemKind::SinglePosture => MeasurementShape::SinglePosture,
            SystemKind::TwelveEquation => MeasurementShape::DoubleFull,
            SystemKind::SixEquation => MeasurementShape::DoubleReduced,
        }
    }
}

/// Overdetermined linear model `design * offsets = observations`.
///
/// `labels[i]` names the observation paired with row `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    pub kind: SystemKind,
    pub design: DMatrix<f64>,
    pub labels: Vec<String>,
}

impl LinearSystem {
    pub fn rows(&self) -> usize {
        self.design.nrows()
    }

    /// Observation vector in row order.
    ///
    /// The six equation system also accepts full double-posture data, which it
    /// reduces first.
    pub fn rhs(&self, m: &MeasurementSet) -> Result<DVector<f64>> {
        let by_name: Vec<(String, f64)> = match (self.kind, m) {
            (SystemKind::SixEquation, MeasurementSet::Double(d)) => {
                named(MeasurementShape::DoubleReduced, &d.reduce().to_array())
            }
            _ if m.shape() == self.kind.shape() => named(m.shape(), &m.values()),
            _ => {
                return Err(Error::InvalidInput(format!(
                    "{:?} system cannot use {} data",
                    self.kind,
                    m.shape()
                )))
            }
        };
        let values = self
            .labels
            .iter()
            .map(|label| {
                by_name
                    .iter()
                    .find(|(n, _)| n == label)
                    .map(|(_, v)| *v)
                    .ok_or_else(|| Error::InvalidInput(format!("missing observation '{label}'")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(DVector::from_vec(values))
    }

    /// Numerical rank of the design matrix.
    pub fn rank(&self) -> usize {
        numerical_rank(&self.design)
    }
}

fn named(shape: MeasurementShape, values: &[f64]) -> Vec<(String, f64)> {
    shape
        .names()
        .into_iter()
        .zip(values.iter().copied())
        .collect()
}

fn numerical_rank(m: &DMatrix<f64>) -> usize {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.max();
    sv.iter().filter(|&&s| s > RANK_TOLERANCE * max).count()
}

fn stack_rows(rows: &[RowVector3<f64>]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), 3, |i, j| rows[i][j])
}

fn row_for(channel: Channel, b: f64, c: f64) -> RowVector3<f64> {
    let mut row = RowVector3::zeros();
    row[channel.direction.index()] = b;
    row[channel.leg.index()] = c;
    row
}

/// Six rows `[0 0 1; 0 0 1; a1 0 1; a2 0 1; 0 a1 1; 0 a2 1]`.
pub fn build_single_posture_system(geom: &Geometry) -> LinearSystem {
    let k = coefficients(geom);
    #[rustfmt::skip]
    let design = DMatrix::from_row_slice(6, 3, &[
        0.0, 0.0, 1.0,
        0.0, 0.0, 1.0,
        k.a1, 0.0, 1.0,
        k.a2, 0.0, 1.0,
        0.0, k.a1, 1.0,
        0.0, k.a2, 1.0,
    ]);
    LinearSystem {
        kind: SystemKind::SinglePosture,
        design,
        labels: SinglePostureMeasurements::NAMES
            .iter()
            .map(|s| s.to_string())
            .collect(),
    }
}

/// Twelve rows, grouped in blocks of four per coordinate plane.
pub fn build_twelve_eq_system(geom: &Geometry) -> LinearSystem {
    let k = coefficients(geom);
    let layout = DoublePostureMeasurements::layout();
    let rows: Vec<RowVector3<f64>> = layout
        .iter()
        .map(|&(ch, e)| {
            let (b, c) = k.bc(e);
            row_for(ch, b, c)
        })
        .collect();
    LinearSystem {
        kind: SystemKind::TwelveEquation,
        design: stack_rows(&rows),
        labels: layout.iter().map(|(ch, e)| ch.name_at(*e)).collect(),
    }
}

/// Six rows pairing `dx_y, dy_x, dy_z, dz_y, dx_z, dz_x` with `(b, c)` patterns.
pub fn build_six_eq_system(geom: &Geometry) -> LinearSystem {
    let k = coefficients(geom);
    let channels: Vec<Channel> = Channel::PLANE_PAIRS.iter().flatten().copied().collect();
    let rows: Vec<RowVector3<f64>> = channels.iter().map(|&ch| row_for(ch, k.b, k.c)).collect();
    LinearSystem {
        kind: SystemKind::SixEquation,
        design: stack_rows(&rows),
        labels: channels.iter().map(Channel::name).collect(),
    }
}

pub fn system_for(kind: SystemKind, geom: &Geometry) -> LinearSystem {
    match kind {
        SystemKind::SinglePosture => build_single_posture_system(geom),
        SystemKind::TwelveEquation => build_twelve_eq_system(geom),
        SystemKind::SixEquation => build_six_eq_system(geom),
    }
}

/// Estimation method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Sequential pairwise solution of the single-posture system.
    ClosedForm,
    /// Pseudoinverse of the single-posture system.
    LinearSingle,
    #[serde(rename = "linear6")]
    Linear6,
    #[serde(rename = "linear12")]
    Linear12,
    #[serde(rename = "nonlinear6")]
    Nonlinear6,
    #[serde(rename = "nonlinear12")]
    Nonlinear12,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::ClosedForm,
        Method::LinearSingle,
        Method::Linear6,
        Method::Linear12,
        Method::Nonlinear6,
        Method::Nonlinear12,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::ClosedForm => "closed-form",
            Method::LinearSingle => "linear-single",
            Method::Linear6 => "linear6",
            Method::Linear12 => "linear12",
            Method::Nonlinear6 => "nonlinear6",
            Method::Nonlinear12 => "nonlinear12",
        }
    }

    pub fn system(self) -> SystemKind {
        match self {
            Method::ClosedForm | Method::LinearSingle => SystemKind::SinglePosture,
            Method::Linear6 | Method::Nonlinear6 => SystemKind::SixEquation,
            Method::Linear12 | Method::Nonlinear12 => SystemKind::TwelveEquation,
        }
    }

    pub fn is_nonlinear(self) -> bool {
        matches!(self, Method::Nonlinear6 | Method::Nonlinear12)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Method> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown method '{s}'")))
    }
}

/// Estimated offsets together with fit quality and solver diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationResult {
    pub offsets: JointOffsets,
    pub method: Method,
    /// Observed minus predicted, in the row order of `residual_names`.
    pub residuals: Vec<f64>,
    pub residual_names: Vec<String>,
    pub residual_rms: f64,
    pub sigma_hat: f64,
    pub iterations: usize,
    pub converged: bool,
    pub gradient_norm: f64,
    /// Sum of squared residuals at the start and after each accepted step.
    pub objective_history: Vec<f64>,
}

impl CalibrationResult {
    pub fn residual(&self, name: &str) -> Option<f64> {
        self.residual_names
            .iter()
            .position(|n| n == name)
            .map(|i| self.residuals[i])
    }

    pub fn ssr(&self) -> f64 {
        self.residuals.iter().map(|r| r * r).sum()
    }
}

/// Residual vector with its RMS and the noise estimate `sqrt(SSR / (n - 3))`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    pub names: Vec<String>,
    pub residuals: Vec<f64>,
    pub rms: f64,
    pub sigma_hat: f64,
}

impl ResidualReport {
    fn new(names: Vec<String>, residuals: Vec<f64>) -> ResidualReport {
        let (rms, sigma_hat) = fit_statistics(&residuals);
        ResidualReport {
            names,
            residuals,
            rms,
            sigma_hat,
        }
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.residuals[i])
    }
}

fn fit_statistics(residuals: &[f64]) -> (f64, f64) {
    let n = residuals.len();
    let ssr: f64 = residuals.iter().map(|r| r * r).sum();
    let rms = (ssr / n as f64).sqrt();
    let sigma_hat = if n > 3 {
        (ssr / (n - 3) as f64).sqrt()
    } else {
        f64::NAN
    };
    (rms, sigma_hat)
}

fn linear_result(
    sys: &LinearSystem,
    rhs: &DVector<f64>,
    x: Vector3<f64>,
    method: Method,
) -> CalibrationResult {
    let r = rhs - &sys.design * x;
    let residuals: Vec<f64> = r.iter().copied().collect();
    let (rms, sigma_hat) = fit_statistics(&residuals);
    let grad = sys.design.transpose() * &r;
    CalibrationResult {
        offsets: JointOffsets::new(x[0], x[1], x[2]),
        method,
        residual_names: sys.labels.clone(),
        residual_rms: rms,
        sigma_hat,
        iterations: 0,
        converged: true,
        gradient_norm: grad.norm(),
        objective_history: vec![r.norm_squared()],
        residuals,
    }
}

/// Sequential solution of the single-posture system: `d_rho_z` from the two
/// isotropic readings, then `d_rho_x` and `d_rho_y` from their displacement pairs.
pub fn solve_single_posture_closed_form(
    m: &SinglePostureMeasurements,
    geom: &Geometry,
) -> CalibrationResult {
    let k = coefficients(geom);
    let z = (m.dz_x0 + m.dz_y0) / 2.0;
    let norm = k.a1 * k.a1 + k.a2 * k.a2;
    let x = (k.a1 * (m.dz_x_plus - z) + k.a2 * (m.dz_x_minus - z)) / norm;
    let y = (k.a1 * (m.dz_y_plus - z) + k.a2 * (m.dz_y_minus - z)) / norm;
    let sys = build_single_posture_system(geom);
    let rhs = DVector::from_row_slice(&m.to_array());
    linear_result(&sys, &rhs, Vector3::new(x, y, z), Method::ClosedForm)
}

/// Minimum-norm-residual solution of an overdetermined system, via SVD.
pub fn least_squares_solve(sys: &LinearSystem, m: &MeasurementSet) -> Result<CalibrationResult> {
    let rhs = sys.rhs(m)?;
    let x = solve_lsq(&sys.design, &rhs)?;
    let method = match sys.kind {
        SystemKind::SinglePosture => Method::LinearSingle,
        SystemKind::SixEquation => Method::Linear6,
        SystemKind::TwelveEquation => Method::Linear12,
    };
    Ok(linear_result(sys, &rhs, x, method))
}

fn solve_lsq(design: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<Vector3<f64>> {
    let svd = design.clone().svd(true, true);
    let max = svd.singular_values.max();
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > RANK_TOLERANCE * max)
        .count();
    if rank < 3 {
        return Err(Error::Rank { rank });
    }
    let x = svd
        .solve(rhs, RANK_TOLERANCE * max)
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    Ok(Vector3::new(x[0], x[1], x[2]))
}

/// How the Gauss-Newton iteration linearises the deviation model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JacobianMode {
    /// Exact derivatives of the nonlinear model at the current iterate.
    #[default]
    Exact,
    /// The constant design matrix of the matching linear system.
    Linearized,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonlinearOptions {
    pub max_iterations: usize,
    /// Converged once a Gauss-Newton step is shorter than this, mm.
    pub step_tolerance: f64,
    pub gradient_tolerance: f64,
    /// If no halving of a step shorter than this lowers the objective, the
    /// iterate is taken as converged (the model is at round-off level), mm.
    pub stagnation_step: f64,
    pub max_halvings: usize,
    pub jacobian: JacobianMode,
}

impl Default for NonlinearOptions {
    fn default() -> Self {
        NonlinearOptions {
            max_iterations: 100,
            step_tolerance: 1e-9,
            gradient_tolerance: 1e-12,
            stagnation_step: 1e-6,
            max_halvings: 20,
            jacobian: JacobianMode::Exact,
        }
    }
}

/// The exact deviation model for one kind of double-posture data.
struct DeviationModel<'a> {
    geom: &'a Geometry,
    kind: SystemKind,
    observed: DVector<f64>,
    linear: DMatrix<f64>,
}

impl DeviationModel<'_> {
    /// Residuals `predicted - observed` and, if asked, the model Jacobian.
    fn evaluate(
        &self,
        x: &Vector3<f64>,
        with_jacobian: bool,
    ) -> Result<(DVector<f64>, Option<DMatrix<f64>>)> {
        let offsets = JointOffsets::new(x[0], x[1], x[2]);
        let (pred, rows): (Vec<f64>, Vec<RowVector3<f64>>) = match self.kind {
            SystemKind::SixEquation => {
                let (m, rows) = reduced_jacobian(&offsets, self.geom)?;
                // canonical order -> six equation row order
                let order = six_eq_order();
                (
                    order.iter().map(|&i| m.to_array()[i]).collect(),
                    order.iter().map(|&i| rows[i]).collect(),
                )
            }
            SystemKind::TwelveEquation => {
                let (m, rows) = double_posture_jacobian(&offsets, self.geom)?;
                (m.to_array().to_vec(), rows.to_vec())
            }
            SystemKind::SinglePosture => unreachable!("no nonlinear single-posture model"),
        };
        let r = DVector::from_vec(pred) - &self.observed;
        let jac = with_jacobian.then(|| stack_rows(&rows));
        Ok((r, jac))
    }
}

fn six_eq_order() -> [usize; 6] {
    let canon = Channel::CANONICAL;
    let mut out = [0; 6];
    for (k, ch) in Channel::PLANE_PAIRS.iter().flatten().enumerate() {
        out[k] = canon.iter().position(|c| c == ch).unwrap();
    }
    out
}

/// Least-squares fit of the exact deviation model to double-posture data.
///
/// Reduced data (or full data with `kind = SixEquation`) fits the six
/// maximum-minus-minimum deviations; full data with `kind = TwelveEquation`
/// fits all twelve. The iteration is Gauss-Newton with step halving; without
/// an initial guess it starts from the matching linear solution.
pub fn nonlinear_identify(
    m: &MeasurementSet,
    kind: SystemKind,
    geom: &Geometry,
    initial: Option<JointOffsets>,
    opts: &NonlinearOptions,
) -> Result<CalibrationResult> {
    if kind == SystemKind::SinglePosture {
        return Err(Error::InvalidInput(
            "nonlinear identification needs double-posture data".into(),
        ));
    }
    let sys = system_for(kind, geom);
    let observed = sys.rhs(m)?;
    if observed.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("measurements must be finite".into()));
    }
    let start = match initial {
        Some(x) => {
            x.check(geom)?;
            x
        }
        None => {
            let x = least_squares_solve(&sys, m)?.offsets;
            // data that only offsets beyond the bound explain are a model failure
            x.check(geom)
                .map_err(|e| Error::Domain(format!("linear start: {e}")))?;
            x
        }
    };

    let model = DeviationModel {
        geom,
        kind,
        observed,
        linear: sys.design.clone(),
    };
    let method = match kind {
        SystemKind::SixEquation => Method::Nonlinear6,
        _ => Method::Nonlinear12,
    };

    let mut x = start.to_vector();
    let (mut r, _) = model.evaluate(&x, false)?;
    let mut f = r.norm_squared();
    let mut history = vec![f];
    let mut last_step = f64::INFINITY;

    for iteration in 0..opts.max_iterations {
        let jac = match opts.jacobian {
            JacobianMode::Exact => model.evaluate(&x, true)?.1.expect("requested"),
            JacobianMode::Linearized => model.linear.clone(),
        };
        let grad = jac.transpose() * &r;
        let grad_norm = grad.norm();
        if grad_norm < opts.gradient_tolerance {
            return Ok(finish(
                &sys, x, r, method, iteration, true, grad_norm, history,
            ));
        }
        let step = -solve_lsq(&jac, &r)?;
        last_step = step.norm();
        if last_step < opts.step_tolerance {
            let candidate = x + step;
            let (r_new, _) = model.evaluate(&candidate, false)?;
            let f_new = r_new.norm_squared();
            if f_new <= f {
                x = candidate;
                r = r_new;
                history.push(f_new);
            }
            let grad_norm = (jac.transpose() * &r).norm();
            return Ok(finish(
                &sys,
                x,
                r,
                method,
                iteration + 1,
                true,
                grad_norm,
                history,
            ));
        }

        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..=opts.max_halvings {
            let candidate = x + step * scale;
            let candidate_offsets = JointOffsets::from_vector(&candidate);
            if candidate_offsets.check(geom).is_ok() {
                if let Ok((r_new, _)) = model.evaluate(&candidate, false) {
                    let f_new = r_new.norm_squared();
                    if f_new <= f {
                        x = candidate;
                        r = r_new;
                        f = f_new;
                        history.push(f);
                        accepted = true;
                        break;
                    }
                }
            }
            scale *= 0.5;
        }
        if !accepted {
            if last_step < opts.stagnation_step {
                return Ok(finish(
                    &sys,
                    x,
                    r,
                    method,
                    iteration + 1,
                    true,
                    grad_norm,
                    history,
                ));
            }
            return Err(Error::Convergence {
                iterations: iteration + 1,
                last_step,
            });
        }
    }
    Err(Error::Convergence {
        iterations: opts.max_iterations,
        last_step,
    })
}

#[allow(clippy::too_many_arguments)]
fn finish(
    sys: &LinearSystem,
    x: Vector3<f64>,
    r: DVector<f64>,
    method: Method,
    iterations: usize,
    converged: bool,
    gradient_norm: f64,
    objective_history: Vec<f64>,
) -> CalibrationResult {
    // report observed - predicted
    let residuals: Vec<f64> = r.iter().map(|v| -v).collect();
    let (rms, sigma_hat) = fit_statistics(&residuals);
    CalibrationResult {
        offsets: JointOffsets::from_vector(&x),
        method,
        residuals,
        residual_names: sys.labels.clone(),
        residual_rms: rms,
        sigma_hat,
        iterations,
        converged,
        gradient_norm,
        objective_history,
    }
}

/// Runs any estimation method on a measurement set of the matching shape.
pub fn calibrate(m: &MeasurementSet, method: Method, geom: &Geometry) -> Result<CalibrationResult> {
    calibrate_with(m, method, geom, &NonlinearOptions::default())
}

pub fn calibrate_with(
    m: &MeasurementSet,
    method: Method,
    geom: &Geometry,
    opts: &NonlinearOptions,
) -> Result<CalibrationResult> {
    match (method, m) {
        (Method::ClosedForm, MeasurementSet::Single(s)) => {
            Ok(solve_single_posture_closed_form(s, geom))
        }
        (Method::ClosedForm, other) => Err(Error::InvalidInput(format!(
            "closed-form method needs single-posture data, got {}",
            other.shape()
        ))),
        (Method::Nonlinear6 | Method::Nonlinear12, _) => {
            nonlinear_identify(m, method.system(), geom, None, opts)
        }
        _ => least_squares_solve(&system_for(method.system(), geom), m),
    }
}

/// Which forward model residuals are computed against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResidualModel {
    Linear,
    Nonlinear,
}

/// Observed minus predicted deviations for a given set of offsets.
///
/// Single-posture data is always compared against its linear system. The
/// nonlinear model of double-posture data is the exact deviation model.
pub fn residual_report(
    offsets: &JointOffsets,
    m: &MeasurementSet,
    geom: &Geometry,
    model: ResidualModel,
) -> Result<ResidualReport> {
    let kind = match m {
        MeasurementSet::Single(_) => SystemKind::SinglePosture,
        MeasurementSet::Double(_) => SystemKind::TwelveEquation,
        MeasurementSet::Reduced(_) => SystemKind::SixEquation,
    };
    let sys = system_for(kind, geom);
    let observed = sys.rhs(m)?;
    let residuals: Vec<f64> = match (model, kind) {
        (ResidualModel::Linear, _) | (_, SystemKind::SinglePosture) => (observed
            - &sys.design * offsets.to_vector())
        .iter()
        .copied()
        .collect(),
        (ResidualModel::Nonlinear, _) => {
            let dm = DeviationModel {
                geom,
                kind,
                observed,
                linear: sys.design.clone(),
            };
            dm.evaluate(&offsets.to_vector(), false)?
                .0
                .iter()
                .map(|v| -v)
                .collect()
        }
    };
    Ok(ResidualReport::new(sys.labels, residuals))
}
