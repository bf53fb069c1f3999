//! Propagation of gauge noise into the identified offsets.
//!
//! For a linear system with design matrix `J` and observation-error covariance
//! `E`, the least-squares estimate has covariance
//! `(J'J)^-1 J' E J (J'J)^-1`. Reduced data has `E = 2 sigma^2 I`; full
//! double-posture data shares the isotropic reading between the maximum and
//! minimum deviations of a channel, giving `E = sigma^2 G` with a block
//! structure. The scalar accuracy measure is `sigma_rho = sqrt(trace(V) / 3)`.

use nalgebra::{DMatrix, Matrix3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::identification::{
    build_six_eq_system, build_twelve_eq_system, calibrate_with, Method, NonlinearOptions,
};
use crate::kinematics::JointOffsets;
use crate::measurement::{add_noise, predict, GaussianNoise, NoiseModel, GENERATOR_ID};

/// Largest tolerated fraction of failed Monte-Carlo runs.
pub const MAX_FAILURE_RATE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CovarianceStructure {
    ScaledIdentity,
    BlockG,
    Custom,
}

/// Covariance of the observation errors, mm^2.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseCovariance {
    pub matrix: DMatrix<f64>,
    pub structure: CovarianceStructure,
}

impl NoiseCovariance {
    /// `2 sigma^2 I_6` of the reduced deviations.
    pub fn six(sigma: f64) -> NoiseCovariance {
        NoiseCovariance {
            matrix: DMatrix::identity(6, 6) * (2.0 * sigma * sigma),
            structure: CovarianceStructure::ScaledIdentity,
        }
    }

    /// `sigma^2 G` of the full double-posture deviations.
    pub fn twelve(sigma: f64) -> NoiseCovariance {
        NoiseCovariance {
            matrix: g_matrix() * (sigma * sigma),
            structure: CovarianceStructure::BlockG,
        }
    }
}

/// Block-diagonal correlation pattern of the twelve deviations.
///
/// Within each plane block the rows are `c1+, c2+, c1-, c2-`; a channel's
/// maximum and minimum deviations share their isotropic reading.
pub fn g_matrix() -> DMatrix<f64> {
    #[rustfmt::skip]
    let block = DMatrix::from_row_slice(4, 4, &[
        2.0, 0.0, 1.0, 0.0,
        0.0, 2.0, 0.0, 1.0,
        1.0, 0.0, 2.0, 0.0,
        0.0, 1.0, 0.0, 2.0,
    ]);
    let mut g = DMatrix::zeros(12, 12);
    for b in 0..3 {
        g.view_mut((4 * b, 4 * b), (4, 4)).copy_from(&block);
    }
    g
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EquationSet {
    Six,
    Twelve,
}

/// Covariance of the offset estimates, mm^2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OffsetCovariance {
    pub v: Matrix3<f64>,
    pub sigma_rho: f64,
    pub equations: EquationSet,
}

/// Sandwich propagation `(J'J)^-1 J' E J (J'J)^-1`.
pub fn propagate(design: &DMatrix<f64>, noise: &DMatrix<f64>) -> Result<Matrix3<f64>> {
    if design.ncols() != 3 || noise.nrows() != design.nrows() || noise.ncols() != design.nrows() {
        return Err(Error::InvalidInput(
            "covariance dimensions do not match the design".into(),
        ));
    }
    let jtj = design.transpose() * design;
    let sv = jtj.clone().svd(false, false).singular_values;
    let rank = sv.iter().filter(|&&s| s > 1e-12 * sv.max()).count();
    let inv = match jtj.try_inverse() {
        Some(inv) if rank == 3 => inv,
        _ => return Err(Error::Rank { rank }),
    };
    let v = &inv * design.transpose() * noise * design * &inv;
    // symmetrise away rounding
    let v = (&v + v.transpose()) * 0.5;
    Ok(Matrix3::from_iterator(v.iter().copied()))
}

pub fn sigma_rho(v: &Matrix3<f64>) -> f64 {
    (v.trace() / 3.0).sqrt()
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma >= 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "sigma must be finite and non-negative, got {sigma}"
        )))
    }
}

pub fn offset_covariance_six(geom: &Geometry, sigma: f64) -> Result<OffsetCovariance> {
    check_sigma(sigma)?;
    let v = propagate(
        &build_six_eq_system(geom).design,
        &NoiseCovariance::six(sigma).matrix,
    )?;
    Ok(OffsetCovariance {
        v,
        sigma_rho: sigma_rho(&v),
        equations: EquationSet::Six,
    })
}

pub fn offset_covariance_twelve(geom: &Geometry, sigma: f64) -> Result<OffsetCovariance> {
    check_sigma(sigma)?;
    let v = propagate(
        &build_twelve_eq_system(geom).design,
        &NoiseCovariance::twelve(sigma).matrix,
    )?;
    Ok(OffsetCovariance {
        v,
        sigma_rho: sigma_rho(&v),
        equations: EquationSet::Twelve,
    })
}

pub fn offset_covariance(
    geom: &Geometry,
    sigma: f64,
    equations: EquationSet,
) -> Result<OffsetCovariance> {
    match equations {
        EquationSet::Six => offset_covariance_six(geom, sigma),
        EquationSet::Twelve => offset_covariance_twelve(geom, sigma),
    }
}

/// Settings of a Monte-Carlo accuracy study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloConfig {
    pub true_offsets: JointOffsets,
    pub sigma: f64,
    pub runs: usize,
    pub replications: usize,
    pub method: Method,
    pub seed: u64,
}

/// Error statistics of one replication.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplicationStats {
    pub seed: u64,
    pub successful_runs: usize,
    pub failed_runs: usize,
    pub mean_error: [f64; 3],
    pub std_error: [f64; 3],
    /// `sqrt(mean of the three per-axis variances)`.
    pub pooled_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub config: MonteCarloConfig,
    pub generator: String,
    /// Replication `r` draws from a stream seeded with `seed + r`.
    pub seeding: String,
    pub replications: Vec<ReplicationStats>,
    /// Per-axis mean error, averaged over replications, mm.
    pub mean_error: [f64; 3],
    /// Per-axis error std, averaged over replications, mm.
    pub std_error: [f64; 3],
    /// Pooled std averaged over replications, mm.
    pub pooled_std: f64,
    /// Sample std of the pooled std across replications, mm.
    pub pooled_std_spread: f64,
    pub failed_runs: usize,
}

impl MonteCarloReport {
    pub fn failure_rate(&self) -> f64 {
        let total = self.config.runs * self.config.replications;
        self.failed_runs as f64 / total as f64
    }
}

/// Repeats simulate-then-identify with fresh noise and summarises the errors.
///
/// Replications run in parallel, each on its own deterministic stream; the
/// report does not depend on thread scheduling. Runs whose estimator fails are
/// excluded and counted; more than 0.1% failures is an error.
pub fn monte_carlo(config: &MonteCarloConfig, geom: &Geometry) -> Result<MonteCarloReport> {
    if config.runs < 1 || config.replications < 1 {
        return Err(Error::InvalidInput(
            "runs and replications must be at least 1".into(),
        ));
    }
    check_sigma(config.sigma)?;
    config.true_offsets.check(geom)?;
    let shape = match config.method {
        Method::ClosedForm | Method::LinearSingle => {
            crate::measurement::MeasurementShape::SinglePosture
        }
        m => m.system().shape(),
    };
    let clean = predict(shape, &config.true_offsets, geom)?;
    let truth = config.true_offsets.to_array();
    let opts = NonlinearOptions::default();

    let replications: Vec<ReplicationStats> = (0..config.replications)
        .into_par_iter()
        .map(|r| {
            let seed = config.seed.wrapping_add(r as u64);
            let mut noise: GaussianNoise = NoiseModel {
                sigma: config.sigma,
                seed,
            }
            .generator();
            let mut errors: Vec<[f64; 3]> = Vec::with_capacity(config.runs);
            let mut failed = 0;
            for _ in 0..config.runs {
                let noisy = add_noise(&clean, &mut noise);
                match calibrate_with(&noisy, config.method, geom, &opts) {
                    Ok(res) => {
                        let est = res.offsets.to_array();
                        errors.push([est[0] - truth[0], est[1] - truth[1], est[2] - truth[2]]);
                    }
                    Err(_) => failed += 1,
                }
            }
            replication_stats(seed, &errors, failed)
        })
        .collect();

    let failed_runs: usize = replications.iter().map(|r| r.failed_runs).sum();
    let n = replications.len() as f64;
    let avg = |f: &dyn Fn(&ReplicationStats) -> f64| replications.iter().map(f).sum::<f64>() / n;
    let mean_error = [0, 1, 2].map(|k| avg(&|r| r.mean_error[k]));
    let std_error = [0, 1, 2].map(|k| avg(&|r| r.std_error[k]));
    let pooled_std = avg(&|r| r.pooled_std);
    let pooled_std_spread = if replications.len() > 1 {
        (replications
            .iter()
            .map(|r| (r.pooled_std - pooled_std).powi(2))
            .sum::<f64>()
            / (n - 1.0))
            .sqrt()
    } else {
        0.0
    };
    let report = MonteCarloReport {
        config: *config,
        generator: GENERATOR_ID.to_string(),
        seeding: format!("replication r uses seed {} + r", config.seed),
        replications,
        mean_error,
        std_error,
        pooled_std,
        pooled_std_spread,
        failed_runs,
    };
    if report.failure_rate() > MAX_FAILURE_RATE {
        return Err(Error::TooManyFailures {
            failed: report.failed_runs,
            total: config.runs * config.replications,
        });
    }
    Ok(report)
}

fn replication_stats(seed: u64, errors: &[[f64; 3]], failed: usize) -> ReplicationStats {
    let n = errors.len();
    let mut mean = [0.0; 3];
    let mut std = [0.0; 3];
    if n > 0 {
        for k in 0..3 {
            mean[k] = errors.iter().map(|e| e[k]).sum::<f64>() / n as f64;
        }
    }
    if n > 1 {
        for k in 0..3 {
            let ss: f64 = errors.iter().map(|e| (e[k] - mean[k]).powi(2)).sum();
            std[k] = (ss / (n - 1) as f64).sqrt();
        }
    }
    let pooled = ((std[0].powi(2) + std[1].powi(2) + std[2].powi(2)) / 3.0).sqrt();
    ReplicationStats {
        seed,
        successful_runs: n,
        failed_runs: failed,
        mean_error: mean,
        std_error: std,
        pooled_std: pooled,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const G: Geometry = Geometry::PROTOTYPE;

    #[test]
    fn identity_design_propagation() {
        let design = DMatrix::identity(3, 3);
        let sigma = 0.3;
        let v = propagate(&design, &(DMatrix::identity(3, 3) * (2.0 * sigma * sigma))).unwrap();
        assert!(
            (v - Matrix3::identity() * (2.0 * sigma * sigma))
                .abs()
                .max()
                < 1e-15
        );
        assert!((sigma_rho(&v) - 2f64.sqrt() * sigma).abs() < 1e-15);
    }

    #[test]
    fn prototype_factors() {
        let six = offset_covariance_six(&G, 1.0).unwrap();
        let twelve = offset_covariance_twelve(&G, 1.0).unwrap();
        assert!((six.sigma_rho - 1.98).abs() < 0.01, "{}", six.sigma_rho);
        assert!(
            (twelve.sigma_rho - 2.06).abs() < 0.01,
            "{}",
            twelve.sigma_rho
        );
        assert!(twelve.sigma_rho > six.sigma_rho);
    }

    #[test]
    fn sigma_rho_scales_linearly() {
        let a = offset_covariance_six(&G, 0.01).unwrap().sigma_rho;
        let b = offset_covariance_six(&G, 0.02).unwrap().sigma_rho;
        assert!((b - 2.0 * a).abs() < 1e-15);
    }

    #[test]
    fn sandwich_collapses_for_identity_noise() {
        let j = build_twelve_eq_system(&G).design;
        let v = propagate(&j, &DMatrix::identity(12, 12)).unwrap();
        let direct = (j.transpose() * &j).try_inverse().unwrap();
        let direct = Matrix3::from_iterator(direct.iter().copied());
        assert!((v - direct).abs().max() < 1e-12);
    }

    #[test]
    fn correlation_structure_matters() {
        let j = build_twelve_eq_system(&G).design;
        let with_g = sigma_rho(&propagate(&j, &g_matrix()).unwrap());
        let with_2i = sigma_rho(&propagate(&j, &(DMatrix::identity(12, 12) * 2.0)).unwrap());
        assert!((with_g - with_2i).abs() / with_g > 0.01);
    }

    #[test]
    fn covariance_is_symmetric_positive_definite() {
        for eq in [EquationSet::Six, EquationSet::Twelve] {
            let v = offset_covariance(&G, 0.01, eq).unwrap().v;
            let asym = (v - v.transpose()).abs().max();
            assert!(asym <= 1e-14 * v.abs().max());
            let eig = v.symmetric_eigenvalues();
            assert!(eig.iter().all(|&e| e > 0.0));
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(offset_covariance_six(&G, -1.0).is_err());
        let cfg = MonteCarloConfig {
            true_offsets: JointOffsets::ZERO,
            sigma: 0.01,
            runs: 0,
            replications: 1,
            method: Method::Linear6,
            seed: 1,
        };
        assert!(monte_carlo(&cfg, &G).is_err());
        let design = DMatrix::from_element(6, 3, 1.0);
        assert!(matches!(
            propagate(&design, &DMatrix::identity(6, 6)),
            Err(Error::Rank { .. })
        ));
    }

    #[test]
    fn noiseless_monte_carlo() {
        let cfg = MonteCarloConfig {
            true_offsets: JointOffsets::new(1.0, 1.0, 1.0),
            sigma: 0.0,
            runs: 5,
            replications: 2,
            method: Method::Nonlinear6,
            seed: 3,
        };
        let rep = monte_carlo(&cfg, &G).unwrap();
        assert_eq!(rep.pooled_std, 0.0);
        assert!(rep.mean_error.iter().all(|e| e.abs() <= 1e-6));
    }

    #[test]
    fn monte_carlo_is_deterministic() {
        let cfg = MonteCarloConfig {
            true_offsets: JointOffsets::new(0.1, 0.1, 0.1),
            sigma: 0.01,
            runs: 200,
            replications: 4,
            method: Method::Nonlinear12,
            seed: 11,
        };
        assert_eq!(
            monte_carlo(&cfg, &G).unwrap(),
            monte_carlo(&cfg, &G).unwrap()
        );
    }
}
