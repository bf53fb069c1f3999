//! Exact kinematics of the simplified PSS model with encoder offsets.
//!
//! Each leg is a rigid link of length `L` joining the tool centre point `p` to a
//! prismatic joint sliding on one Cartesian axis. With effective joint positions
//! `q_i = rho_i + d_rho_i` the model is
//!
//! ```text
//! (p_x - q_x)^2 + p_y^2 + p_z^2 = L^2
//! p_x^2 + (p_y - q_y)^2 + p_z^2 = L^2
//! p_x^2 + p_y^2 + (p_z - q_z)^2 = L^2
//! ```
//!
//! The frame origin is the intersection of the actuator axes, so the nominal
//! isotropic posture is `p = 0`, `rho = (L, L, L)`.

use std::ops::{Index, IndexMut};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Axis, Extreme, Geometry, Posture};

/// Residual tolerance of the kinematic model, in mm.
pub const KINEMATIC_TOLERANCE: f64 = 1e-9;
/// Smallest admissible denominator, in mm.
pub const SINGULARITY_GUARD: f64 = 1e-9;

macro_rules! triple {
    ($(#[$meta:meta])* $name:ident { $x:ident, $y:ident, $z:ident }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
        pub struct $name {
            pub $x: f64,
            pub $y: f64,
            pub $z: f64,
        }

        impl $name {
            pub const fn new($x: f64, $y: f64, $z: f64) -> Self {
                Self { $x, $y, $z }
            }

            pub const fn from_array(a: [f64; 3]) -> Self {
                Self { $x: a[0], $y: a[1], $z: a[2] }
            }

            pub fn to_array(self) -> [f64; 3] {
                [self.$x, self.$y, self.$z]
            }

            pub fn to_vector(self) -> Vector3<f64> {
                Vector3::new(self.$x, self.$y, self.$z)
            }

            pub fn from_vector(v: &Vector3<f64>) -> Self {
                Self::new(v[0], v[1], v[2])
            }

            pub fn is_finite(&self) -> bool {
                self.$x.is_finite() && self.$y.is_finite() && self.$z.is_finite()
            }
        }

        impl Index<Axis> for $name {
            type Output = f64;
            fn index(&self, axis: Axis) -> &f64 {
                match axis {
                    Axis::X => &self.$x,
                    Axis::Y => &self.$y,
                    Axis::Z => &self.$z,
                }
            }
        }

        impl IndexMut<Axis> for $name {
            fn index_mut(&mut self, axis: Axis) -> &mut f64 {
                match axis {
                    Axis::X => &mut self.$x,
                    Axis::Y => &mut self.$y,
                    Axis::Z => &mut self.$z,
                }
            }
        }
    };
}

triple!(
    /// Tool centre point position, mm.
    CartesianPoint { x, y, z }
);
triple!(
    /// Prismatic joint readings, mm.
    JointCoords { x, y, z }
);
triple!(
    /// Encoder offsets: the difference between true and reported joint zero, mm.
    JointOffsets { x, y, z }
);

impl CartesianPoint {
    pub const ORIGIN: CartesianPoint = CartesianPoint::new(0.0, 0.0, 0.0);

    pub fn norm(&self) -> f64 {
        self.to_vector().norm()
    }

    pub fn distance(&self, other: &CartesianPoint) -> f64 {
        (self.to_vector() - other.to_vector()).norm()
    }
}

impl JointCoords {
    /// Joint positions the mechanism actually sits at once the offsets are added.
    pub fn effective(self, offsets: &JointOffsets) -> JointCoords {
        JointCoords::new(self.x + offsets.x, self.y + offsets.y, self.z + offsets.z)
    }
}

impl JointOffsets {
    pub const ZERO: JointOffsets = JointOffsets::new(0.0, 0.0, 0.0);

    pub fn max_abs(&self) -> f64 {
        self.x.abs().max(self.y.abs()).max(self.z.abs())
    }

    /// Rejects non-finite offsets and offsets beyond `L/10`.
    pub fn check(&self, geom: &Geometry) -> Result<()> {
        if !self.is_finite() {
            return Err(Error::InvalidInput("joint offsets must be finite".into()));
        }
        let bound = geom.offset_bound();
        if self.max_abs() > bound {
            return Err(Error::InvalidInput(format!(
                "joint offset {:.4} mm exceeds the model bound {bound:.4} mm",
                self.max_abs()
            )));
        }
        Ok(())
    }
}

/// Branch selector of the inverse kinematics, one sign per leg.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigurationIndices {
    pub x: i8,
    pub y: i8,
    pub z: i8,
}

impl ConfigurationIndices {
    /// The branch fixed by the prototype assembly.
    pub const ASSEMBLY: ConfigurationIndices = ConfigurationIndices { x: 1, y: 1, z: 1 };

    pub fn new(x: i8, y: i8, z: i8) -> Result<ConfigurationIndices> {
        for s in [x, y, z] {
            if s != 1 && s != -1 {
                return Err(Error::InvalidInput(format!(
                    "configuration index must be +1 or -1, got {s}"
                )));
            }
        }
        Ok(ConfigurationIndices { x, y, z })
    }

    fn sign(&self, axis: Axis) -> f64 {
        let s = match axis {
            Axis::X => self.x,
            Axis::Y => self.y,
            Axis::Z => self.z,
        };
        f64::from(s)
    }

    /// Indices realised by a pose: the signs of `q_i - p_i`.
    pub fn of_pose(p: &CartesianPoint, effective: &JointCoords) -> ConfigurationIndices {
        let s = |a: Axis| if effective[a] - p[a] >= 0.0 { 1 } else { -1 };
        ConfigurationIndices {
            x: s(Axis::X),
            y: s(Axis::Y),
            z: s(Axis::Z),
        }
    }
}

impl Default for ConfigurationIndices {
    fn default() -> Self {
        ConfigurationIndices::ASSEMBLY
    }
}

/// Joint values from the inverse kinematics, with any joint-limit violations.
///
/// Limit violations are warnings: the joints are still returned.
#[derive(Debug, Clone, PartialEq)]
pub struct InverseSolution {
    pub joints: JointCoords,
    pub limit_warnings: Vec<Error>,
}

pub fn inverse_kinematics(
    p: &CartesianPoint,
    offsets: &JointOffsets,
    geom: &Geometry,
    config: ConfigurationIndices,
) -> Result<InverseSolution> {
    let l2 = geom.leg_length * geom.leg_length;
    let mut joints = JointCoords::default();
    for axis in Axis::ALL {
        let [j, k] = axis.others();
        let arg = l2 - p[j] * p[j] - p[k] * p[k];
        if arg <= 0.0 {
            return Err(Error::Domain(format!(
                "point ({:.4}, {:.4}, {:.4}) is out of reach of the {axis}-leg",
                p.x, p.y, p.z
            )));
        }
        joints[axis] = p[axis] + config.sign(axis) * arg.sqrt() - offsets[axis];
    }
    let limit_warnings = joint_limit_violations(&joints, geom);
    Ok(InverseSolution {
        joints,
        limit_warnings,
    })
}

/// Joint limits about the isotropic value: `[L + rho_min, L + rho_max]`.
pub fn joint_limit_violations(joints: &JointCoords, geom: &Geometry) -> Vec<Error> {
    let min = geom.leg_length + geom.rho_min;
    let max = geom.leg_length + geom.rho_max;
    Axis::ALL
        .into_iter()
        .filter(|&a| joints[a] < min - KINEMATIC_TOLERANCE || joints[a] > max + KINEMATIC_TOLERANCE)
        .map(|axis| Error::Limit {
            axis,
            value: joints[axis],
            min,
            max,
        })
        .collect()
}

/// Which quadratic root the direct kinematics kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RootChoice {
    Plus,
    Minus,
}

/// The quadratic `A t^2 + B t + B C = 0` solved by the direct kinematics.
///
/// `t_plus` and `t_minus` are the roots `(-B +/- sqrt(B^2 - 4ABC)) / 2A`; the
/// rejected root is kept for inspection together with the pose it would give.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticRoots {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub discriminant: f64,
    pub t_plus: f64,
    pub t_minus: f64,
    pub selected: RootChoice,
    pub discarded_point: CartesianPoint,
}

impl QuadraticRoots {
    pub fn selected_t(&self) -> f64 {
        match self.selected {
            RootChoice::Plus => self.t_plus,
            RootChoice::Minus => self.t_minus,
        }
    }

    /// `A t^2 + B t + B C` relative to the magnitude of its terms.
    pub fn relative_residual(&self, t: f64) -> f64 {
        let terms = [self.a * t * t, self.b * t, self.b * self.c];
        let scale = terms.iter().map(|v| v.abs()).fold(0.0, f64::max);
        terms.iter().sum::<f64>().abs() / scale
    }
}

/// Tool position for given joint readings and offsets.
///
/// Writing `p_i = q_i/2 + t/q_i` turns the three sphere constraints into one
/// quadratic in `t`. Both roots are checked against the assembly branch
/// (`q_i > p_i` on every leg) and the admissible one closest to the origin is
/// kept; the other root lies near `2L/3` on each axis, outside the workspace.
pub fn direct_kinematics(
    rho: &JointCoords,
    offsets: &JointOffsets,
    geom: &Geometry,
) -> Result<(CartesianPoint, QuadraticRoots)> {
    let q = rho.effective(offsets);
    if Axis::ALL.iter().any(|&a| q[a].abs() < SINGULARITY_GUARD) {
        return Err(Error::Singular(format!(
            "effective joint value vanishes: ({:.4}, {:.4}, {:.4})",
            q.x, q.y, q.z
        )));
    }
    let (qx2, qy2, qz2) = (q.x * q.x, q.y * q.y, q.z * q.z);
    let l2 = geom.leg_length * geom.leg_length;

    // normalised form: a t^2 + t + c = 0, with a = A/B and c = C
    let a_norm = 1.0 / qx2 + 1.0 / qy2 + 1.0 / qz2;
    let c = (qx2 + qy2 + qz2 - 4.0 * l2) / 4.0;
    let disc_norm = 1.0 - 4.0 * a_norm * c;
    if disc_norm < 0.0 {
        return Err(Error::Domain(format!(
            "joint set ({:.4}, {:.4}, {:.4}) has no real tool position",
            q.x, q.y, q.z
        )));
    }
    let sqrt_disc = disc_norm.sqrt();
    let qq = -0.5 * (1.0 + sqrt_disc);
    let t_minus = qq / a_norm;
    let t_plus = if qq != 0.0 { c / qq } else { 0.0 };

    let point_for = |t: f64| {
        CartesianPoint::new(
            q.x / 2.0 + t / q.x,
            q.y / 2.0 + t / q.y,
            q.z / 2.0 + t / q.z,
        )
    };
    let p_plus = point_for(t_plus);
    let p_minus = point_for(t_minus);
    let admissible =
        |p: &CartesianPoint| ConfigurationIndices::of_pose(p, &q) == ConfigurationIndices::ASSEMBLY;

    let choice = match (admissible(&p_plus), admissible(&p_minus)) {
        (true, true) => {
            if p_plus.norm() <= p_minus.norm() {
                RootChoice::Plus
            } else {
                RootChoice::Minus
            }
        }
        (true, false) => RootChoice::Plus,
        (false, true) => RootChoice::Minus,
        (false, false) => {
            return Err(Error::Singular(format!(
                "no root of the direct kinematics lies on the assembly branch for joints ({:.4}, {:.4}, {:.4})",
                q.x, q.y, q.z
            )))
        }
    };

    let b = qx2 * qy2 * qz2;
    let a = qy2 * qz2 + qx2 * qz2 + qx2 * qy2;
    let (p, discarded_point) = match choice {
        RootChoice::Plus => (p_plus, p_minus),
        RootChoice::Minus => (p_minus, p_plus),
    };
    let roots = QuadraticRoots {
        a,
        b,
        c,
        discriminant: b * b * disc_norm,
        t_plus,
        t_minus,
        selected: choice,
        discarded_point,
    };
    Ok((p, roots))
}

/// Left-hand sides of the three constraints minus `L^2`, in mm^2.
pub fn constraint_residuals(
    p: &CartesianPoint,
    rho: &JointCoords,
    offsets: &JointOffsets,
    geom: &Geometry,
) -> [f64; 3] {
    let q = rho.effective(offsets);
    let l2 = geom.leg_length * geom.leg_length;
    Axis::ALL.map(|axis| {
        let [j, k] = axis.others();
        let d = p[axis] - q[axis];
        d * d + p[j] * p[j] + p[k] * p[k] - l2
    })
}

/// Matrix `d rho / d p` of the constraint equations.
///
/// Unit diagonal, off-diagonal entries `p_j / (p_i - q_i)` where `q` holds the
/// effective joint positions (readings plus offsets).
pub fn inverse_jacobian(p: &CartesianPoint, effective: &JointCoords) -> Result<Matrix3<f64>> {
    let mut m = Matrix3::identity();
    for i in Axis::ALL {
        let den = p[i] - effective[i];
        if den.abs() < SINGULARITY_GUARD {
            return Err(Error::Singular(format!(
                "{i}-leg is orthogonal to its axis (p - q = {den:e})"
            )));
        }
        for j in i.others() {
            m[(i.index(), j.index())] = p[j] / den;
        }
    }
    Ok(m)
}

/// Matrix `d p / d q`: the sensitivity of the tool position to the joints.
pub fn jacobian(p: &CartesianPoint, effective: &JointCoords) -> Result<Matrix3<f64>> {
    inverse_jacobian(p, effective)?
        .try_inverse()
        .ok_or_else(|| Error::Singular("inverse Jacobian is not invertible".into()))
}

/// Joint readings that place the nominal manipulator in a calibration posture.
pub fn posture_commanded_joints(posture: Posture, geom: &Geometry) -> JointCoords {
    let l = geom.leg_length;
    match posture.split() {
        None => JointCoords::new(l, l, l),
        Some((axis, extreme)) => {
            let ang = extreme.angles(geom);
            let mut joints = JointCoords::new(l * ang.cos, l * ang.cos, l * ang.cos);
            joints[axis] = l + l * ang.sin;
            joints
        }
    }
}

/// Nominal tool position of a calibration posture.
pub fn posture_tcp(posture: Posture, geom: &Geometry) -> CartesianPoint {
    let mut p = CartesianPoint::ORIGIN;
    if let Some((axis, extreme)) = posture.split() {
        p[axis] = geom.leg_length * extreme.angles(geom).sin;
    }
    p
}

/// Closed form of `d p / d q` at a nominal calibration posture.
///
/// Identity at the isotropic posture; at a displacement posture along axis `i`
/// the column `i` carries `tan(alpha)` on its off-diagonal rows.
pub fn posture_jacobian(posture: Posture, geom: &Geometry) -> Matrix3<f64> {
    let mut m = Matrix3::identity();
    if let Some((axis, extreme)) = posture.split() {
        let t = extreme.angles(geom).tan;
        for j in axis.others() {
            m[(j.index(), axis.index())] = t;
        }
    }
    m
}

/// Coordinate plane spanned by two axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Plane {
    XY,
    XZ,
    YZ,
}

impl Plane {
    /// The axis normal to the plane.
    pub fn normal(self) -> Axis {
        match self {
            Plane::XY => Axis::Z,
            Plane::XZ => Axis::Y,
            Plane::YZ => Axis::X,
        }
    }

    /// The plane containing `leg` and normal to `normal`.
    pub fn containing(leg: Axis, normal: Axis) -> Plane {
        match (leg, normal) {
            (Axis::X, Axis::Z) | (Axis::Y, Axis::Z) => Plane::XY,
            (Axis::X, Axis::Y) | (Axis::Z, Axis::Y) => Plane::XZ,
            _ => Plane::YZ,
        }
    }
}

impl std::fmt::Display for Plane {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Plane::XY => "XY",
            Plane::XZ => "XZ",
            Plane::YZ => "YZ",
        })
    }
}

/// Group of postures a sensitivity row belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PostureGroup {
    Isotropic,
    Displacement(Axis),
}

/// One row of the linear sensitivity table.
///
/// `values` holds one entry for isotropic rows and two (maximum, minimum) for
/// displacement rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityRow {
    pub group: PostureGroup,
    pub leg: Axis,
    pub plane: Plane,
    pub values: Vec<(Posture, f64)>,
}

/// First-order deviation of each leg from its reference planes.
///
/// At the isotropic posture the deviation normal to a plane is the offset of
/// the normal axis. At a displacement posture along `i` it is
/// `tan(alpha) * d_rho_i + d_rho_j`, `j` the plane normal.
pub fn sensitivity_table(geom: &Geometry, offsets: &JointOffsets) -> Vec<SensitivityRow> {
    let mut rows = Vec::with_capacity(12);
    for leg in Axis::ALL {
        for normal in leg.others().into_iter().rev() {
            rows.push(SensitivityRow {
                group: PostureGroup::Isotropic,
                leg,
                plane: Plane::containing(leg, normal),
                values: vec![(Posture::Isotropic, offsets[normal])],
            });
        }
    }
    for leg in Axis::ALL {
        for normal in leg.others().into_iter().rev() {
            let values = [Extreme::Max, Extreme::Min]
                .map(|e| {
                    let t = e.angles(geom).tan;
                    (
                        Posture::displacement(e, leg),
                        t * offsets[leg] + offsets[normal],
                    )
                })
                .to_vec();
            rows.push(SensitivityRow {
                group: PostureGroup::Displacement(leg),
                leg,
                plane: Plane::containing(leg, normal),
                values,
            });
        }
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const G: Geometry = Geometry::PROTOTYPE;
    const L: f64 = 310.25;

    fn ik(p: CartesianPoint, d: JointOffsets) -> JointCoords {
        inverse_kinematics(&p, &d, &G, ConfigurationIndices::ASSEMBLY)
            .unwrap()
            .joints
    }

    #[test]
    fn ik_isotropic() {
        let j = ik(CartesianPoint::ORIGIN, JointOffsets::ZERO);
        assert_eq!(j, JointCoords::new(L, L, L));
        let j = ik(CartesianPoint::ORIGIN, JointOffsets::new(1.0, 2.0, 3.0));
        assert_eq!(j, JointCoords::new(309.25, 308.25, 307.25));
    }

    #[test]
    fn ik_x_max_point() {
        let p = CartesianPoint::new(60.0, 0.0, 0.0);
        let j = ik(p, JointOffsets::ZERO);
        // sqrt(310.25^2 - 60^2) = 304.392930...
        let side = (L * L - 3600.0f64).sqrt();
        assert_relative_eq!(j.x, 370.25, epsilon = 1e-12);
        assert_relative_eq!(j.y, side, epsilon = 1e-12);
        assert!((j.y - 304.3929).abs() < 1e-4);
        let r = constraint_residuals(&p, &j, &JointOffsets::ZERO, &G);
        assert!(r.iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn ik_unreachable() {
        let p = CartesianPoint::new(0.0, 300.0, 100.0);
        let err = inverse_kinematics(&p, &JointOffsets::ZERO, &G, ConfigurationIndices::ASSEMBLY);
        assert!(matches!(err, Err(Error::Domain(_))));
    }

    #[test]
    fn ik_reports_limits_without_failing() {
        let p = CartesianPoint::new(59.9, 0.0, 0.0);
        let sol = inverse_kinematics(
            &p,
            &JointOffsets::new(-0.5, 0.0, 0.0),
            &G,
            ConfigurationIndices::ASSEMBLY,
        )
        .unwrap();
        assert_eq!(sol.limit_warnings.len(), 1);
        assert!(matches!(
            sol.limit_warnings[0],
            Error::Limit { axis: Axis::X, .. }
        ));
    }

    #[test]
    fn configuration_index_validation() {
        assert!(ConfigurationIndices::new(1, -1, 1).is_ok());
        assert!(ConfigurationIndices::new(0, 1, 1).is_err());
    }

    #[test]
    fn dk_isotropic_and_root_discrimination() {
        let (p, roots) =
            direct_kinematics(&JointCoords::new(L, L, L), &JointOffsets::ZERO, &G).unwrap();
        assert!(p.norm() < 1e-12);
        let d = roots.discarded_point;
        for v in d.to_array() {
            assert_relative_eq!(v, 2.0 * L / 3.0, epsilon = 1e-9);
        }
        // the "plus" root is the far one here
        assert_eq!(roots.selected, RootChoice::Minus);
        for t in [roots.t_plus, roots.t_minus] {
            assert!(roots.relative_residual(t) < 1e-10);
        }
        assert!(roots.discriminant >= 0.0);
    }

    #[test]
    fn dk_symmetric_shift() {
        let (p, _) = direct_kinematics(
            &JointCoords::new(311.25, 311.25, 311.25),
            &JointOffsets::ZERO,
            &G,
        )
        .unwrap();
        // smaller root of 3p^2 - 2 rho p + rho^2 - L^2 = 0
        let rho = 311.25f64;
        let disc = 4.0 * rho * rho - 12.0 * (rho * rho - L * L);
        let expected = (2.0 * rho - disc.sqrt()) / 6.0;
        for v in p.to_array() {
            assert_relative_eq!(v, expected, epsilon = 1e-10);
        }
        assert!((expected - 1.00324).abs() < 1e-5);
    }

    #[test]
    fn dk_inverts_ik_example() {
        let rho = JointCoords::new(
            370.25,
            (L * L - 3600.0f64).sqrt(),
            (L * L - 3600.0f64).sqrt(),
        );
        let (p, _) = direct_kinematics(&rho, &JointOffsets::ZERO, &G).unwrap();
        assert!(p.distance(&CartesianPoint::new(60.0, 0.0, 0.0)) < 1e-9);
    }

    #[test]
    fn dk_domain_and_singular_errors() {
        let far = JointCoords::new(1000.0, 1000.0, 1000.0);
        assert!(matches!(
            direct_kinematics(&far, &JointOffsets::ZERO, &G),
            Err(Error::Domain(_))
        ));
        let zero = JointCoords::new(0.0, L, L);
        assert!(matches!(
            direct_kinematics(&zero, &JointOffsets::ZERO, &G),
            Err(Error::Singular(_))
        ));
    }

    #[test]
    fn inverse_jacobian_identity_at_isotropic() {
        let m = inverse_jacobian(&CartesianPoint::ORIGIN, &JointCoords::new(L, L, L)).unwrap();
        assert_eq!(m, Matrix3::identity());
    }

    #[test]
    fn inverse_jacobian_singular_guard() {
        let p = CartesianPoint::new(10.0, 0.0, 0.0);
        let q = JointCoords::new(10.0, L, L);
        assert!(matches!(inverse_jacobian(&p, &q), Err(Error::Singular(_))));
    }

    #[test]
    fn commanded_joints() {
        assert_eq!(
            posture_commanded_joints(Posture::Isotropic, &G),
            JointCoords::new(L, L, L)
        );
        let j = posture_commanded_joints(Posture::MaxDisplacement(Axis::X), &G);
        assert_relative_eq!(j.x, 370.25, epsilon = 1e-12);
        assert!((j.y - 304.3929).abs() < 1e-4 && j.y == j.z);
        let j = posture_commanded_joints(Posture::MinDisplacement(Axis::X), &G);
        assert_relative_eq!(j.x, 210.25, epsilon = 1e-12);
        assert!((j.y - 293.6921).abs() < 1e-4 && j.y == j.z);
        for posture in Posture::ALL {
            let j = posture_commanded_joints(posture, &G);
            assert!(joint_limit_violations(&j, &G).is_empty(), "{posture}");
        }
    }

    #[test]
    fn posture_jacobian_patterns() {
        assert_eq!(
            posture_jacobian(Posture::Isotropic, &G),
            Matrix3::identity()
        );
        let m = posture_jacobian(Posture::MaxDisplacement(Axis::X), &G);
        let t = 60.0 / (L * L - 3600.0f64).sqrt();
        assert_eq!(m[(0, 0)], 1.0);
        assert_relative_eq!(m[(1, 0)], t, epsilon = 1e-15);
        assert_relative_eq!(m[(2, 0)], t, epsilon = 1e-15);
        assert_eq!(m[(0, 1)] + m[(0, 2)] + m[(1, 2)] + m[(2, 1)], 0.0);
        assert!((t - 0.1971).abs() < 1e-4);
        let m = posture_jacobian(Posture::MinDisplacement(Axis::Y), &G);
        assert!((m[(0, 1)] + 0.3405).abs() < 1e-4);
        assert_eq!(m[(0, 1)], m[(2, 1)]);
        assert_eq!(m[(1, 0)], 0.0);
    }

    #[test]
    fn jacobians_are_mutual_inverses_at_postures() {
        for posture in Posture::ALL {
            let p = posture_tcp(posture, &G);
            let q = posture_commanded_joints(posture, &G);
            let inv = inverse_jacobian(&p, &q).unwrap();
            let fwd = posture_jacobian(posture, &G);
            let prod = inv * fwd;
            assert!(
                (prod - Matrix3::identity()).abs().max() < 1e-10,
                "{posture}"
            );
            let direct = jacobian(&p, &q).unwrap();
            assert!((direct - fwd).abs().max() < 1e-10, "{posture}");
        }
    }

    #[test]
    fn sensitivity_rows() {
        let rows = sensitivity_table(&G, &JointOffsets::new(1.0, 1.0, 1.0));
        assert_eq!(rows.len(), 12);
        for r in &rows[..6] {
            assert_eq!(r.values.len(), 1);
            assert_eq!(r.values[0].1, 1.0);
        }
        let x_xy = rows
            .iter()
            .find(|r| r.group == PostureGroup::Displacement(Axis::X) && r.plane == Plane::XY)
            .unwrap();
        let min = x_xy.values[1].1;
        assert!((min - 0.66).abs() < 0.005, "{min}");
        let max = x_xy.values[0].1;
        assert!((max - 1.20).abs() < 0.005, "{max}");
        let zeros = sensitivity_table(&G, &JointOffsets::ZERO);
        assert!(zeros
            .iter()
            .all(|r| r.values.iter().all(|(_, v)| *v == 0.0)));
    }

    #[test]
    fn sensitivity_isotropic_layout_matches_table() {
        let rows = sensitivity_table(&G, &JointOffsets::new(1.0, 2.0, 3.0));
        let expected = [
            (Axis::X, Plane::XY, 3.0),
            (Axis::X, Plane::XZ, 2.0),
            (Axis::Y, Plane::XY, 3.0),
            (Axis::Y, Plane::YZ, 1.0),
            (Axis::Z, Plane::XZ, 2.0),
            (Axis::Z, Plane::YZ, 1.0),
        ];
        for (row, (leg, plane, v)) in rows.iter().zip(expected) {
            assert_eq!((row.leg, row.plane, row.values[0].1), (leg, plane, v));
        }
    }
}
