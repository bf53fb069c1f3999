//! Forward model of the gauge measurements.
//!
//! A gauge sits at the midpoint of a leg while the manipulator is in the
//! isotropic posture and reads the leg position along one Cartesian direction.
//! Moving the manipulator to a displacement posture along the leg's axis and
//! reading again gives a deviation that vanishes for the nominal machine.
//!
//! Deviations are named `d{direction}_{leg}`: `dy_x` is the Y-direction
//! deviation of the X-leg. The double-posture technique records the
//! maximum-minus-isotropic and minimum-minus-isotropic deviations of the six
//! channels; the reduced form keeps only maximum minus minimum.

use std::fmt;

use nalgebra::{Matrix3, RowVector3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Axis, Extreme, Geometry, Posture};
use crate::kinematics::{
    direct_kinematics, jacobian, posture_commanded_joints, CartesianPoint, JointOffsets,
    SINGULARITY_GUARD,
};

/// Identifier of the random stream: ChaCha8 seeded from a `u64`, standard
/// normal draws by the ziggurat method of `rand_distr`.
pub const GENERATOR_ID: &str = "chacha8-ziggurat/rand_distr-0.5";

/// A deviation channel: the reading along `direction` of the gauge on `leg`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Channel {
    pub direction: Axis,
    pub leg: Axis,
}

impl Channel {
    pub const fn new(direction: Axis, leg: Axis) -> Channel {
        Channel { direction, leg }
    }

    /// Wire order of reduced data: `dx_y, dx_z, dy_x, dy_z, dz_x, dz_y`.
    pub const CANONICAL: [Channel; 6] = [
        Channel::new(Axis::X, Axis::Y),
        Channel::new(Axis::X, Axis::Z),
        Channel::new(Axis::Y, Axis::X),
        Channel::new(Axis::Y, Axis::Z),
        Channel::new(Axis::Z, Axis::X),
        Channel::new(Axis::Z, Axis::Y),
    ];

    /// Channel pairs sharing a coordinate plane, in the row order of the linear systems.
    pub const PLANE_PAIRS: [[Channel; 2]; 3] = [
        [
            Channel::new(Axis::X, Axis::Y),
            Channel::new(Axis::Y, Axis::X),
        ],
        [
            Channel::new(Axis::Y, Axis::Z),
            Channel::new(Axis::Z, Axis::Y),
        ],
        [
            Channel::new(Axis::X, Axis::Z),
            Channel::new(Axis::Z, Axis::X),
        ],
    ];

    pub fn name(&self) -> String {
        format!("d{}_{}", self.direction.lower(), self.leg.lower())
    }

    pub fn name_at(&self, extreme: Extreme) -> String {
        format!("{}_{}", self.name(), extreme.suffix())
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// Observations of the single-posture, two-sensor technique (Z direction only).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SinglePostureMeasurements {
    pub dz_x0: f64,
    pub dz_y0: f64,
    pub dz_x_plus: f64,
    pub dz_x_minus: f64,
    pub dz_y_plus: f64,
    pub dz_y_minus: f64,
}

impl SinglePostureMeasurements {
    pub const NAMES: [&'static str; 6] = [
        "dz_x0",
        "dz_y0",
        "dz_x_plus",
        "dz_x_minus",
        "dz_y_plus",
        "dz_y_minus",
    ];

    pub fn to_array(&self) -> [f64; 6] {
        [
            self.dz_x0,
            self.dz_y0,
            self.dz_x_plus,
            self.dz_x_minus,
            self.dz_y_plus,
            self.dz_y_minus,
        ]
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        SinglePostureMeasurements {
            dz_x0: a[0],
            dz_y0: a[1],
            dz_x_plus: a[2],
            dz_x_minus: a[3],
            dz_y_plus: a[4],
            dz_y_minus: a[5],
        }
    }
}

/// Twelve double-posture deviations, stored in linear-system row order:
/// for each plane pair `(c1, c2)`: `c1+, c2+, c1-, c2-`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DoublePostureMeasurements {
    values: [f64; 12],
}

impl DoublePostureMeasurements {
    /// `(channel, extreme)` of each stored slot.
    pub fn layout() -> [(Channel, Extreme); 12] {
        let mut out = [(Channel::CANONICAL[0], Extreme::Max); 12];
        for (block, [c1, c2]) in Channel::PLANE_PAIRS.iter().enumerate() {
            out[4 * block] = (*c1, Extreme::Max);
            out[4 * block + 1] = (*c2, Extreme::Max);
            out[4 * block + 2] = (*c1, Extreme::Min);
            out[4 * block + 3] = (*c2, Extreme::Min);
        }
        out
    }

    pub fn names() -> Vec<String> {
        Self::layout().iter().map(|(c, e)| c.name_at(*e)).collect()
    }

    pub fn from_array(values: [f64; 12]) -> Self {
        DoublePostureMeasurements { values }
    }

    pub fn to_array(&self) -> [f64; 12] {
        self.values
    }

    fn slot(channel: Channel, extreme: Extreme) -> usize {
        Self::layout()
            .iter()
            .position(|&(c, e)| c == channel && e == extreme)
            .expect("every channel has two slots")
    }

    pub fn get(&self, channel: Channel, extreme: Extreme) -> f64 {
        self.values[Self::slot(channel, extreme)]
    }

    pub fn set(&mut self, channel: Channel, extreme: Extreme, value: f64) {
        self.values[Self::slot(channel, extreme)] = value;
    }

    /// Maximum-minus-minimum differences.
    pub fn reduce(&self) -> ReducedMeasurements {
        let mut out = ReducedMeasurements::default();
        for ch in Channel::CANONICAL {
            out.set(ch, self.get(ch, Extreme::Max) - self.get(ch, Extreme::Min));
        }
        out
    }
}

/// Six maximum-minus-minimum deviations in canonical order
/// (`dx_y, dx_z, dy_x, dy_z, dz_x, dz_y`).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ReducedMeasurements {
    values: [f64; 6],
}

impl ReducedMeasurements {
    pub fn names() -> Vec<String> {
        Channel::CANONICAL.iter().map(Channel::name).collect()
    }

    pub fn from_array(values: [f64; 6]) -> Self {
        ReducedMeasurements { values }
    }

    pub fn to_array(&self) -> [f64; 6] {
        self.values
    }

    fn slot(channel: Channel) -> usize {
        Channel::CANONICAL
            .iter()
            .position(|&c| c == channel)
            .expect("channel is canonical")
    }

    pub fn get(&self, channel: Channel) -> f64 {
        self.values[Self::slot(channel)]
    }

    pub fn set(&mut self, channel: Channel, value: f64) {
        self.values[Self::slot(channel)] = value;
    }
}

/// Componentwise maximum-minus-minimum differences of a double-posture set.
pub fn reduce(m: &DoublePostureMeasurements) -> ReducedMeasurements {
    m.reduce()
}

/// Which measurement technique a data set comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeasurementShape {
    SinglePosture,
    DoubleFull,
    DoubleReduced,
}

impl MeasurementShape {
    pub fn names(self) -> Vec<String> {
        match self {
            MeasurementShape::SinglePosture => SinglePostureMeasurements::NAMES
                .iter()
                .map(|s| s.to_string())
                .collect(),
            MeasurementShape::DoubleFull => DoublePostureMeasurements::names(),
            MeasurementShape::DoubleReduced => ReducedMeasurements::names(),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MeasurementShape::SinglePosture => "single-posture",
            MeasurementShape::DoubleFull => "double-full",
            MeasurementShape::DoubleReduced => "double-reduced",
        }
    }
}

impl fmt::Display for MeasurementShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Any of the three observation vectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MeasurementSet {
    Single(SinglePostureMeasurements),
    Double(DoublePostureMeasurements),
    Reduced(ReducedMeasurements),
}

impl MeasurementSet {
    pub fn shape(&self) -> MeasurementShape {
        match self {
            MeasurementSet::Single(_) => MeasurementShape::SinglePosture,
            MeasurementSet::Double(_) => MeasurementShape::DoubleFull,
            MeasurementSet::Reduced(_) => MeasurementShape::DoubleReduced,
        }
    }

    pub fn values(&self) -> Vec<f64> {
        match self {
            MeasurementSet::Single(m) => m.to_array().to_vec(),
            MeasurementSet::Double(m) => m.to_array().to_vec(),
            MeasurementSet::Reduced(m) => m.to_array().to_vec(),
        }
    }

    /// Builds a set from values in the shape's own order.
    pub fn from_values(shape: MeasurementShape, values: &[f64]) -> Result<MeasurementSet> {
        let expected = shape.names().len();
        if values.len() != expected {
            return Err(Error::InvalidInput(format!(
                "{shape} data needs {expected} values, got {}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "value '{}' is not finite",
                shape.names()[i]
            )));
        }
        Ok(match shape {
            MeasurementShape::SinglePosture => MeasurementSet::Single(
                SinglePostureMeasurements::from_array(values.try_into().unwrap()),
            ),
            MeasurementShape::DoubleFull => MeasurementSet::Double(
                DoublePostureMeasurements::from_array(values.try_into().unwrap()),
            ),
            MeasurementShape::DoubleReduced => {
                MeasurementSet::Reduced(ReducedMeasurements::from_array(values.try_into().unwrap()))
            }
        })
    }

    /// Componentwise mean of repeated measurement cycles of one shape.
    pub fn mean(sets: &[MeasurementSet]) -> Result<MeasurementSet> {
        let first = sets
            .first()
            .ok_or_else(|| Error::InvalidInput("no measurement sets to average".into()))?;
        let shape = first.shape();
        let mut acc = vec![0.0; first.values().len()];
        for set in sets {
            if set.shape() != shape {
                return Err(Error::InvalidInput(
                    "cannot average measurement sets of different shapes".into(),
                ));
            }
            for (a, v) in acc.iter_mut().zip(set.values()) {
                *a += v;
            }
        }
        let n = sets.len() as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        MeasurementSet::from_values(shape, &acc)
    }
}

/// Gaussian measurement noise: standard deviation and stream seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub sigma: f64,
    pub seed: u64,
}

impl NoiseModel {
    pub fn new(sigma: f64, seed: u64) -> Result<NoiseModel> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "noise sigma must be finite and non-negative, got {sigma}"
            )));
        }
        Ok(NoiseModel { sigma, seed })
    }

    pub fn generator(&self) -> GaussianNoise {
        GaussianNoise {
            sigma: self.sigma,
            rng: ChaCha8Rng::seed_from_u64(self.seed),
        }
    }
}

/// Deterministic source of i.i.d. `N(0, sigma^2)` gauge errors.
///
/// The stream advances with every draw; callers that need independent streams
/// seed separate generators.
#[derive(Debug, Clone)]
pub struct GaussianNoise {
    sigma: f64,
    rng: ChaCha8Rng,
}

impl GaussianNoise {
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Error on one raw gauge reading.
    pub fn draw(&mut self) -> f64 {
        let z: f64 = StandardNormal.sample(&mut self.rng);
        self.sigma * z
    }
}

/// Perturbs a measurement set as if each raw gauge reading carried its own error.
///
/// Single-posture values are differences of two absolute readings. Double-posture
/// channels share one isotropic reading between their maximum and minimum
/// deviations, which correlates the pair. Reduced values difference the maximum
/// and minimum readings, so each gets two independent errors.
pub fn add_noise(m: &MeasurementSet, noise: &mut GaussianNoise) -> MeasurementSet {
    match m {
        MeasurementSet::Single(s) => {
            let mut v = s.to_array();
            for x in v.iter_mut() {
                let near = noise.draw();
                let far = noise.draw();
                *x += far - near;
            }
            MeasurementSet::Single(SinglePostureMeasurements::from_array(v))
        }
        MeasurementSet::Double(d) => {
            let mut out = *d;
            for ch in Channel::CANONICAL {
                let iso = noise.draw();
                let plus = noise.draw();
                let minus = noise.draw();
                out.set(ch, Extreme::Max, d.get(ch, Extreme::Max) + plus - iso);
                out.set(ch, Extreme::Min, d.get(ch, Extreme::Min) + minus - iso);
            }
            MeasurementSet::Double(out)
        }
        MeasurementSet::Reduced(r) => {
            let mut out = *r;
            for ch in Channel::CANONICAL {
                let plus = noise.draw();
                let minus = noise.draw();
                out.set(ch, r.get(ch) + plus - minus);
            }
            MeasurementSet::Reduced(out)
        }
    }
}

/// Gauge position at the leg midpoint of the isotropic posture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaugeLocation {
    pub leg: Axis,
    pub position: CartesianPoint,
}

/// Deliberate gauge misplacement along each leg's axis, mm. Zero by default.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GaugePlacement {
    pub axial_shift: [f64; 3],
}

/// Tool position at a posture for the given offsets, and its sensitivity to them.
#[derive(Debug, Clone, Copy)]
struct PoseState {
    /// Effective joint positions.
    q: Vector3<f64>,
    p: Vector3<f64>,
    /// d p / d offsets.
    dp: Matrix3<f64>,
}

fn pose_state(
    posture: Posture,
    offsets: &JointOffsets,
    geom: &Geometry,
    with_jacobian: bool,
) -> Result<PoseState> {
    let rho = posture_commanded_joints(posture, geom);
    let (p, _) = direct_kinematics(&rho, offsets, geom).map_err(|e| annotate(e, posture))?;
    let q = rho.effective(offsets);
    let dp = if with_jacobian {
        jacobian(&p, &q).map_err(|e| annotate(e, posture))?
    } else {
        Matrix3::zeros()
    };
    Ok(PoseState {
        q: q.to_vector(),
        p: p.to_vector(),
        dp,
    })
}

fn annotate(err: Error, posture: Posture) -> Error {
    match err {
        Error::Domain(msg) => Error::Domain(format!("{posture} posture: {msg}")),
        Error::Singular(msg) => Error::Singular(format!("{posture} posture: {msg}")),
        other => other,
    }
}

/// Gauge positions for the three legs, from the exact isotropic tool position.
pub fn gauge_locations(offsets: &JointOffsets, geom: &Geometry) -> Result<[GaugeLocation; 3]> {
    let iso = pose_state(Posture::Isotropic, offsets, geom, false)?;
    Ok(Axis::ALL.map(|leg| {
        let mut pos = CartesianPoint::from_vector(&(iso.p / 2.0));
        pos[leg] = (iso.q[leg.index()] + iso.p[leg.index()]) / 2.0;
        GaugeLocation { leg, position: pos }
    }))
}

/// Where along the leg line the gauge sits, as the fraction `mu` of the way
/// from the prismatic joint to the tool point: `mu = (q_l - g_l) / (q_l - p_l)`.
///
/// With the gauge at the isotropic midpoint this is 0.5 in the isotropic
/// posture and `0.5 + sin(alpha)` in a nominal displacement posture.
pub fn leg_line_scaling(
    posture: Posture,
    leg: Axis,
    offsets: &JointOffsets,
    geom: &Geometry,
) -> Result<f64> {
    let iso = pose_state(Posture::Isotropic, offsets, geom, false)?;
    let state = if posture == Posture::Isotropic {
        iso
    } else {
        pose_state(posture, offsets, geom, false)?
    };
    let gauge = gauge_coordinate(&iso, leg, 0.0);
    scaling(&state, leg, gauge)
}

fn gauge_coordinate(iso: &PoseState, leg: Axis, shift: f64) -> f64 {
    let i = leg.index();
    (iso.q[i] + iso.p[i]) / 2.0 + shift
}

fn scaling(state: &PoseState, leg: Axis, gauge: f64) -> Result<f64> {
    let i = leg.index();
    let den = state.q[i] - state.p[i];
    if den.abs() < SINGULARITY_GUARD {
        return Err(Error::Singular(format!(
            "{leg}-leg line is orthogonal to its axis"
        )));
    }
    Ok((state.q[i] - gauge) / den)
}

/// Deviation of a gauge reading between `state` and the isotropic posture,
/// with its gradient with respect to the offsets when requested.
fn channel_deviation(
    iso: &PoseState,
    state: &PoseState,
    channel: Channel,
    shift: f64,
    with_gradient: bool,
) -> Result<(f64, RowVector3<f64>)> {
    let l = channel.leg.index();
    let d = channel.direction.index();
    let gauge = gauge_coordinate(iso, channel.leg, shift);
    let mu = scaling(state, channel.leg, gauge)?;
    let mu0 = scaling(iso, channel.leg, gauge)?;
    let value = mu * state.p[d] - mu0 * iso.p[d];
    if !with_gradient {
        return Ok((value, RowVector3::zeros()));
    }
    let e_l = {
        let mut e = RowVector3::zeros();
        e[l] = 1.0;
        e
    };
    let d_gauge = (e_l + iso.dp.row(l)) / 2.0;
    let d_mu = |s: &PoseState, m: f64| {
        let den = s.q[l] - s.p[l];
        let d_num = e_l - d_gauge;
        let d_den = e_l - s.dp.row(l);
        (d_num - d_den * m) / den
    };
    let grad = d_mu(state, mu) * state.p[d] + state.dp.row(d) * mu
        - d_mu(iso, mu0) * iso.p[d]
        - iso.dp.row(d) * mu0;
    Ok((value, grad))
}

fn double_posture_model(
    offsets: &JointOffsets,
    geom: &Geometry,
    placement: &GaugePlacement,
    with_gradient: bool,
) -> Result<(DoublePostureMeasurements, [RowVector3<f64>; 12])> {
    let iso = pose_state(Posture::Isotropic, offsets, geom, with_gradient)?;
    let mut states = Vec::with_capacity(6);
    for extreme in [Extreme::Max, Extreme::Min] {
        for axis in Axis::ALL {
            let posture = Posture::displacement(extreme, axis);
            states.push((
                (axis, extreme),
                pose_state(posture, offsets, geom, with_gradient)?,
            ));
        }
    }
    let mut out = DoublePostureMeasurements::default();
    let mut grads = [RowVector3::zeros(); 12];
    for (slot, (channel, extreme)) in DoublePostureMeasurements::layout().into_iter().enumerate() {
        let state = &states
            .iter()
            .find(|(key, _)| *key == (channel.leg, extreme))
            .expect("all displacement postures evaluated")
            .1;
        let shift = placement.axial_shift[channel.leg.index()];
        let (v, g) = channel_deviation(&iso, state, channel, shift, with_gradient)?;
        out.values[slot] = v;
        grads[slot] = g;
    }
    Ok((out, grads))
}

/// Exact double-posture deviations produced by the given offsets.
pub fn predict_double_posture(
    offsets: &JointOffsets,
    geom: &Geometry,
) -> Result<DoublePostureMeasurements> {
    predict_double_posture_with(offsets, geom, &GaugePlacement::default())
}

pub fn predict_double_posture_with(
    offsets: &JointOffsets,
    geom: &Geometry,
    placement: &GaugePlacement,
) -> Result<DoublePostureMeasurements> {
    Ok(double_posture_model(offsets, geom, placement, false)?.0)
}

pub fn predict_reduced(offsets: &JointOffsets, geom: &Geometry) -> Result<ReducedMeasurements> {
    Ok(predict_double_posture(offsets, geom)?.reduce())
}

/// Double-posture deviations and their 12x3 Jacobian with respect to the offsets.
pub fn double_posture_jacobian(
    offsets: &JointOffsets,
    geom: &Geometry,
) -> Result<(DoublePostureMeasurements, [RowVector3<f64>; 12])> {
    double_posture_model(offsets, geom, &GaugePlacement::default(), true)
}

/// Reduced deviations and their 6x3 Jacobian, canonical row order.
pub fn reduced_jacobian(
    offsets: &JointOffsets,
    geom: &Geometry,
) -> Result<(ReducedMeasurements, [RowVector3<f64>; 6])> {
    let (full, grads) = double_posture_jacobian(offsets, geom)?;
    let layout = DoublePostureMeasurements::layout();
    let slot = |ch: Channel, e: Extreme| layout.iter().position(|&x| x == (ch, e)).unwrap();
    let rows =
        Channel::CANONICAL.map(|ch| grads[slot(ch, Extreme::Max)] - grads[slot(ch, Extreme::Min)]);
    Ok((full.reduce(), rows))
}

/// Exact single-posture readings: the tool height above the XY plane, which is
/// the difference of the two leg-end distances for both the X- and Y-legs.
pub fn predict_single_posture(
    offsets: &JointOffsets,
    geom: &Geometry,
) -> Result<SinglePostureMeasurements> {
    let z =
        |posture: Posture| -> Result<f64> { Ok(pose_state(posture, offsets, geom, false)?.p[2]) };
    let iso = z(Posture::Isotropic)?;
    Ok(SinglePostureMeasurements {
        dz_x0: iso,
        dz_y0: iso,
        dz_x_plus: z(Posture::MaxDisplacement(Axis::X))?,
        dz_x_minus: z(Posture::MinDisplacement(Axis::X))?,
        dz_y_plus: z(Posture::MaxDisplacement(Axis::Y))?,
        dz_y_minus: z(Posture::MinDisplacement(Axis::Y))?,
    })
}

/// Noise-free prediction of the given shape.
pub fn predict(
    shape: MeasurementShape,
    offsets: &JointOffsets,
    geom: &Geometry,
) -> Result<MeasurementSet> {
    Ok(match shape {
        MeasurementShape::SinglePosture => {
            MeasurementSet::Single(predict_single_posture(offsets, geom)?)
        }
        MeasurementShape::DoubleFull => {
            MeasurementSet::Double(predict_double_posture(offsets, geom)?)
        }
        MeasurementShape::DoubleReduced => MeasurementSet::Reduced(predict_reduced(offsets, geom)?),
    })
}

/// Simulates `repetitions` noisy measurement cycles of one shape.
pub fn simulate(
    shape: MeasurementShape,
    offsets: &JointOffsets,
    geom: &Geometry,
    noise: &mut GaussianNoise,
    repetitions: usize,
) -> Result<Vec<MeasurementSet>> {
    if repetitions == 0 {
        return Err(Error::InvalidInput("repetitions must be at least 1".into()));
    }
    let clean = predict(shape, offsets, geom)?;
    Ok((0..repetitions).map(|_| add_noise(&clean, noise)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    const G: Geometry = Geometry::PROTOTYPE;

    #[test]
    fn zero_offsets_give_zero_everywhere() {
        let d = predict_double_posture(&JointOffsets::ZERO, &G).unwrap();
        assert!(d.to_array().iter().all(|v| v.abs() <= 1e-12), "{d:?}");
        let s = predict_single_posture(&JointOffsets::ZERO, &G).unwrap();
        assert!(s.to_array().iter().all(|v| v.abs() <= 1e-12));
    }

    #[test]
    fn layout_matches_system_rows() {
        let names = DoublePostureMeasurements::names();
        assert_eq!(
            names,
            [
                "dx_y_plus",
                "dy_x_plus",
                "dx_y_minus",
                "dy_x_minus",
                "dy_z_plus",
                "dz_y_plus",
                "dy_z_minus",
                "dz_y_minus",
                "dx_z_plus",
                "dz_x_plus",
                "dx_z_minus",
                "dz_x_minus"
            ]
        );
        assert_eq!(
            ReducedMeasurements::names(),
            ["dx_y", "dx_z", "dy_x", "dy_z", "dz_x", "dz_y"]
        );
    }

    #[test]
    fn reduce_is_plus_minus_minus() {
        let mut d = DoublePostureMeasurements::default();
        let ch = Channel::new(Axis::Y, Axis::X);
        d.set(ch, Extreme::Max, 0.3);
        d.set(ch, Extreme::Min, 0.1);
        let r = reduce(&d);
        assert!((r.get(ch) - 0.2).abs() < 1e-15);
        assert_eq!(
            reduce(&DoublePostureMeasurements::default()),
            ReducedMeasurements::default()
        );
    }

    #[test]
    fn gauge_at_zero_offsets() {
        let g = gauge_locations(&JointOffsets::ZERO, &G).unwrap();
        assert_eq!(g[0].position, CartesianPoint::new(155.125, 0.0, 0.0));
        assert_eq!(g[2].position, CartesianPoint::new(0.0, 0.0, 155.125));
    }

    #[test]
    fn gauge_follows_isotropic_tcp() {
        let d = JointOffsets::new(1.0, 1.0, 1.0);
        let g = gauge_locations(&d, &G).unwrap();
        let (p0, _) =
            direct_kinematics(&posture_commanded_joints(Posture::Isotropic, &G), &d, &G).unwrap();
        assert!((g[0].position.x - (155.125 + (p0.x + 1.0) / 2.0)).abs() < 1e-12);
        assert!((g[0].position.y - p0.y / 2.0).abs() < 1e-12);

        let g = gauge_locations(&JointOffsets::new(0.1, 0.0, 0.0), &G).unwrap();
        assert!((g[1].position.x - 0.05).abs() < 1e-4);
    }

    #[test]
    fn scaling_at_nominal_postures() {
        let a1 = G.alpha_max().sin;
        let a2 = G.alpha_min().sin;
        let z = JointOffsets::ZERO;
        let mu = leg_line_scaling(Posture::MaxDisplacement(Axis::X), Axis::X, &z, &G).unwrap();
        assert!((mu - (0.5 + a1)).abs() < 1e-12 && (mu - 0.6934).abs() < 1e-4);
        let mu = leg_line_scaling(Posture::MinDisplacement(Axis::Y), Axis::Y, &z, &G).unwrap();
        assert!((mu - (0.5 + a2)).abs() < 1e-12 && (mu - 0.1777).abs() < 1e-4);
        let mu = leg_line_scaling(Posture::Isotropic, Axis::Z, &z, &G).unwrap();
        assert!((mu - 0.5).abs() < 1e-15);
        for posture in Posture::ALL {
            let mu =
                leg_line_scaling(posture, Axis::X, &JointOffsets::new(0.3, -0.2, 0.5), &G).unwrap();
            assert!(mu > 0.0 && mu < 1.0);
        }
    }

    #[test]
    fn first_order_deviation_of_x_leg() {
        let d = predict_double_posture(&JointOffsets::new(0.1, 0.0, 0.0), &G).unwrap();
        let a = G.alpha_max();
        let c1 = (0.5 + a.sin) * a.tan;
        let v = d.get(Channel::new(Axis::Y, Axis::X), Extreme::Max);
        assert!((v - c1 * 0.1).abs() < 1e-4, "{v} vs {}", c1 * 0.1);
        assert!((v - 0.01367).abs() < 1e-4);
    }

    #[test]
    fn single_posture_first_order() {
        let s = predict_single_posture(&JointOffsets::new(0.0, 0.0, 1.0), &G).unwrap();
        assert!((s.dz_x0 - 1.0).abs() < 2e-3 && (s.dz_y0 - 1.0).abs() < 2e-3);
        let s = predict_single_posture(&JointOffsets::new(1.0, 0.0, 0.0), &G).unwrap();
        assert!(
            (s.dz_x_plus - G.alpha_max().tan).abs() < 2e-3,
            "{}",
            s.dz_x_plus
        );
        assert!((s.dz_x_plus - 0.197).abs() < 2e-3);
    }

    #[test]
    fn zero_sigma_is_identity() {
        let clean = predict(
            MeasurementShape::DoubleFull,
            &JointOffsets::new(0.2, 0.1, -0.3),
            &G,
        )
        .unwrap();
        let mut noise = NoiseModel::new(0.0, 9).unwrap().generator();
        assert_eq!(add_noise(&clean, &mut noise), clean);
    }

    #[test]
    fn same_seed_same_noise() {
        let clean = MeasurementSet::Reduced(ReducedMeasurements::default());
        let model = NoiseModel::new(0.01, 42).unwrap();
        let (mut a, mut b) = (model.generator(), model.generator());
        for _ in 0..10 {
            assert_eq!(add_noise(&clean, &mut a), add_noise(&clean, &mut b));
        }
        let mut c = NoiseModel::new(0.01, 43).unwrap().generator();
        assert_ne!(
            add_noise(&clean, &mut model.generator()),
            add_noise(&clean, &mut c)
        );
    }

    #[test]
    fn negative_sigma_rejected() {
        assert!(NoiseModel::new(-1.0, 0).is_err());
        assert!(NoiseModel::new(f64::NAN, 0).is_err());
    }

    #[test]
    fn averaging_repeated_cycles() {
        let a = MeasurementSet::Reduced(ReducedMeasurements::from_array([1.0; 6]));
        let b = MeasurementSet::Reduced(ReducedMeasurements::from_array([3.0; 6]));
        assert_eq!(
            MeasurementSet::mean(&[a, b]).unwrap().values(),
            vec![2.0; 6]
        );
        let s = MeasurementSet::Single(SinglePostureMeasurements::default());
        assert!(MeasurementSet::mean(&[a, s]).is_err());
        assert!(MeasurementSet::mean(&[]).is_err());
    }

    #[test]
    fn shifted_gauge_changes_prediction() {
        let d = JointOffsets::new(0.5, -0.5, 0.2);
        let base = predict_double_posture(&d, &G).unwrap();
        let same = predict_double_posture_with(&d, &G, &GaugePlacement::default()).unwrap();
        assert_eq!(base, same);
        let shifted = predict_double_posture_with(
            &d,
            &G,
            &GaugePlacement {
                axial_shift: [5.0, 0.0, 0.0],
            },
        )
        .unwrap();
        assert_ne!(base, shifted);
        // nominal machine stays parallel wherever the gauge is
        let zero = predict_double_posture_with(
            &JointOffsets::ZERO,
            &G,
            &GaugePlacement {
                axial_shift: [5.0, -3.0, 2.0],
            },
        )
        .unwrap();
        assert!(zero.to_array().iter().all(|v| v.abs() < 1e-12));
    }
}
