//! Manipulator geometry, the three Cartesian axes and the seven calibration postures.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One of the three mutually orthogonal actuator axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }

    pub fn from_index(i: usize) -> Axis {
        Axis::ALL[i]
    }

    pub fn lower(self) -> char {
        match self {
            Axis::X => 'x',
            Axis::Y => 'y',
            Axis::Z => 'z',
        }
    }

    /// The two axes other than `self`, in increasing order.
    pub fn others(self) -> [Axis; 2] {
        match self {
            Axis::X => [Axis::Y, Axis::Z],
            Axis::Y => [Axis::X, Axis::Z],
            Axis::Z => [Axis::X, Axis::Y],
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Axis::X => "X",
            Axis::Y => "Y",
            Axis::Z => "Z",
        };
        f.write_str(s)
    }
}

/// Leg geometry of the simplified PSS model.
///
/// All lengths are in millimetres. `tool_offset` and `parallelogram_width` are
/// carried for bookkeeping only; the simplified model does not use them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    /// Length of the leg link.
    pub leg_length: f64,
    /// Lower joint limit, relative to the isotropic joint value (negative).
    pub rho_min: f64,
    /// Upper joint limit, relative to the isotropic joint value (positive).
    pub rho_max: f64,
    #[serde(default = "default_tool_offset")]
    pub tool_offset: f64,
    #[serde(default = "default_parallelogram_width")]
    pub parallelogram_width: f64,
}

fn default_tool_offset() -> f64 {
    Geometry::PROTOTYPE.tool_offset
}

fn default_parallelogram_width() -> f64 {
    Geometry::PROTOTYPE.parallelogram_width
}

impl Geometry {
    /// The small-scale prototype.
    pub const PROTOTYPE: Geometry = Geometry {
        leg_length: 310.25,
        rho_min: -100.0,
        rho_max: 60.0,
        tool_offset: 31.0,
        parallelogram_width: 80.0,
    };

    pub fn new(leg_length: f64, rho_min: f64, rho_max: f64) -> Result<Geometry> {
        let geom = Geometry {
            leg_length,
            rho_min,
            rho_max,
            ..Geometry::PROTOTYPE
        };
        geom.validate()?;
        Ok(geom)
    }

    pub fn validate(&self) -> Result<()> {
        let Geometry {
            leg_length,
            rho_min,
            rho_max,
            ..
        } = *self;
        if !(leg_length.is_finite() && rho_min.is_finite() && rho_max.is_finite()) {
            return Err(Error::InvalidInput("geometry values must be finite".into()));
        }
        if leg_length <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "leg length must be positive, got {leg_length}"
            )));
        }
        if !(rho_min < 0.0 && rho_max > 0.0) {
            return Err(Error::InvalidInput(format!(
                "joint limits must satisfy rho_min < 0 < rho_max, got [{rho_min}, {rho_max}]"
            )));
        }
        if rho_min.abs() >= leg_length || rho_max.abs() >= leg_length {
            return Err(Error::InvalidInput(
                "joint limits must be smaller than the leg length in magnitude".into(),
            ));
        }
        Ok(())
    }

    /// Angle between the idle legs and their axes at the maximum-displacement postures.
    pub fn alpha_max(&self) -> PostureAngles {
        PostureAngles::from_sine(self.rho_max / self.leg_length)
    }

    /// Same for the minimum-displacement postures; the angle is negative.
    pub fn alpha_min(&self) -> PostureAngles {
        PostureAngles::from_sine(self.rho_min / self.leg_length)
    }

    /// Bound on offset magnitudes beyond which the model is not trusted.
    pub fn offset_bound(&self) -> f64 {
        self.leg_length / 10.0
    }
}

impl Default for Geometry {
    fn default() -> Self {
        Geometry::PROTOTYPE
    }
}

/// Trigonometric values of a posture angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PostureAngles {
    pub alpha: f64,
    pub sin: f64,
    pub cos: f64,
    pub tan: f64,
}

impl PostureAngles {
    fn from_sine(sin: f64) -> PostureAngles {
        let cos = (1.0 - sin * sin).sqrt();
        PostureAngles {
            alpha: sin.asin(),
            sin,
            cos,
            tan: sin / cos,
        }
    }
}

/// Which end of the stroke a displacement posture sits at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Extreme {
    Max,
    Min,
}

impl Extreme {
    pub fn angles(self, geom: &Geometry) -> PostureAngles {
        match self {
            Extreme::Max => geom.alpha_max(),
            Extreme::Min => geom.alpha_min(),
        }
    }

    pub fn suffix(self) -> &'static str {
        match self {
            Extreme::Max => "plus",
            Extreme::Min => "minus",
        }
    }
}

/// The seven postures used for calibration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Posture {
    Isotropic,
    MaxDisplacement(Axis),
    MinDisplacement(Axis),
}

impl Posture {
    pub const ALL: [Posture; 7] = [
        Posture::Isotropic,
        Posture::MaxDisplacement(Axis::X),
        Posture::MaxDisplacement(Axis::Y),
        Posture::MaxDisplacement(Axis::Z),
        Posture::MinDisplacement(Axis::X),
        Posture::MinDisplacement(Axis::Y),
        Posture::MinDisplacement(Axis::Z),
    ];

    pub fn displacement(extreme: Extreme, axis: Axis) -> Posture {
        match extreme {
            Extreme::Max => Posture::MaxDisplacement(axis),
            Extreme::Min => Posture::MinDisplacement(axis),
        }
    }

    /// Axis and stroke end of a displacement posture; `None` for the isotropic one.
    pub fn split(self) -> Option<(Axis, Extreme)> {
        match self {
            Posture::Isotropic => None,
            Posture::MaxDisplacement(a) => Some((a, Extreme::Max)),
            Posture::MinDisplacement(a) => Some((a, Extreme::Min)),
        }
    }
}

impl fmt::Display for Posture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Posture::Isotropic => f.write_str("isotropic"),
            Posture::MaxDisplacement(a) => write!(f, "{a}-maximum"),
            Posture::MinDisplacement(a) => write!(f, "{a}-minimum"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prototype_is_valid() {
        Geometry::PROTOTYPE.validate().unwrap();
    }

    #[test]
    fn rejects_bad_limits() {
        assert!(Geometry::new(310.25, 10.0, 60.0).is_err());
        assert!(Geometry::new(310.25, -100.0, -1.0).is_err());
        assert!(Geometry::new(310.25, -400.0, 60.0).is_err());
        assert!(Geometry::new(0.0, -100.0, 60.0).is_err());
        assert!(Geometry::new(f64::NAN, -100.0, 60.0).is_err());
    }

    #[test]
    fn posture_angles() {
        let g = Geometry::PROTOTYPE;
        let a1 = g.alpha_max();
        let a2 = g.alpha_min();
        assert!(a1.alpha > 0.0 && a2.alpha < 0.0);
        for a in [a1, a2] {
            assert!((a.sin * a.sin + a.cos * a.cos - 1.0).abs() < 1e-12);
            assert!((a.alpha.sin() - a.sin).abs() < 1e-15);
            assert!((a.alpha.tan() - a.tan).abs() < 1e-14);
        }
        assert!((a1.sin * g.leg_length - 60.0).abs() < 1e-12);
    }

    #[test]
    fn seven_distinct_postures() {
        let set: std::collections::HashSet<_> = Posture::ALL.iter().collect();
        assert_eq!(set.len(), 7);
    }
}
