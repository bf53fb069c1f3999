//! Joint-offset calibration for Orthoglide-type translational parallel manipulators.
//!
//! The manipulator's three prismatic actuators are mutually orthogonal. At a
//! handful of postures each leg of the nominal machine stays parallel to a
//! pair of Cartesian planes, so a dial gauge placed along the leg reads the
//! same value before and after a motion. Encoder offsets break that
//! parallelism; this crate models the effect exactly, estimates the offsets
//! from gauge deviations, and quantifies how gauge noise propagates into the
//! estimates.
//!
//! - [`kinematics`]: inverse and direct kinematics with offsets, Jacobians,
//!   the canonical calibration postures.
//! - [`measurement`]: forward simulation of the gauge readings, seeded noise.
//! - [`identification`]: closed-form, linear least-squares and Gauss-Newton
//!   estimators.
//! - [`accuracy`]: covariance propagation and the Monte-Carlo harness.
//! - [`io`]: measurement files, reports and the bundled prototype data.
//!
//! All lengths are in millimetres and all angles in radians.
//!
//! ```
//! use orthocal::io::{fixtures, MeasurementFile};
//! use orthocal::{calibrate, Geometry, Method};
//!
//! let data = MeasurementFile::parse(fixtures::EXPERIMENT_2)?.measurements()?;
//! let fit = calibrate(&data, Method::Nonlinear6, &Geometry::PROTOTYPE)?;
//! assert!((fit.offsets.z + 1.76).abs() < 0.02);
//! # Ok::<(), orthocal::Error>(())
//! ```

pub mod accuracy;
pub mod cli;
pub mod error;
pub mod geometry;
pub mod identification;
pub mod io;
pub mod kinematics;
pub mod measurement;

pub use error::{Error, Result};
pub use geometry::{Axis, Extreme, Geometry, Posture, PostureAngles};
pub use identification::{calibrate, CalibrationResult, Method};
pub use kinematics::{CartesianPoint, ConfigurationIndices, JointCoords, JointOffsets};
pub use measurement::{MeasurementSet, MeasurementShape, NoiseModel};
