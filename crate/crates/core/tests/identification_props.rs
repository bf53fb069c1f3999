use nalgebra::Vector3;
use orthocal::geometry::Geometry;
use orthocal::identification::*;
use orthocal::kinematics::JointOffsets;
use orthocal::measurement::*;
use proptest::prelude::*;

const G: Geometry = Geometry::PROTOTYPE;

fn offsets(bound: f64) -> impl Strategy<Value = JointOffsets> {
    (-bound..bound, -bound..bound, -bound..bound).prop_map(|(x, y, z)| JointOffsets::new(x, y, z))
}

fn gap(a: &JointOffsets, b: &JointOffsets) -> f64 {
    (a.to_vector() - b.to_vector()).abs().max()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn nonlinear_recovers_noise_free_offsets(truth in offsets(2.0)) {
        for (method, shape) in [(Method::Nonlinear6, MeasurementShape::DoubleReduced), (Method::Nonlinear12, MeasurementShape::DoubleFull)] {
            let m = predict(shape, &truth, &G).unwrap();
            let r = calibrate(&m, method, &G).unwrap();
            prop_assert!(gap(&r.offsets, &truth) < 1e-6, "{method}: {:?}", r.offsets);
        }
    }

    #[test]
    fn linear_recovery_is_within_linearization_bias(truth in offsets(2.0)) {
        let size = truth.max_abs();
        for (method, shape) in [
            (Method::Linear6, MeasurementShape::DoubleReduced),
            (Method::Linear12, MeasurementShape::DoubleFull),
            (Method::LinearSingle, MeasurementShape::SinglePosture),
        ] {
            let m = predict(shape, &truth, &G).unwrap();
            let r = calibrate(&m, method, &G).unwrap();
            prop_assert!(gap(&r.offsets, &truth) <= 0.05 * size + 1e-12, "{method}");
        }
    }

    #[test]
    fn linear_recovery_is_tight_for_small_offsets(truth in offsets(0.1)) {
        for (method, shape) in [(Method::Linear6, MeasurementShape::DoubleReduced), (Method::Linear12, MeasurementShape::DoubleFull)] {
            let m = predict(shape, &truth, &G).unwrap();
            let r = calibrate(&m, method, &G).unwrap();
            prop_assert!(gap(&r.offsets, &truth) < 1e-3, "{method}");
        }
    }

    #[test]
    fn objective_never_increases(truth in offsets(2.0), seed in any::<u64>()) {
        let mut gen = NoiseModel::new(0.05, seed).unwrap().generator();
        let m = simulate(MeasurementShape::DoubleFull, &truth, &G, &mut gen, 1).unwrap().remove(0);
        for method in [Method::Nonlinear6, Method::Nonlinear12] {
            let start = NonlinearOptions::default();
            let r = nonlinear_identify(&m, method.system(), &G, Some(JointOffsets::ZERO), &start).unwrap();
            prop_assert!(r.objective_history.windows(2).all(|w| w[1] <= w[0]), "{:?}", r.objective_history);
        }
    }

    #[test]
    fn pseudoinverse_is_a_minimizer(truth in offsets(1.0), seed in any::<u64>()) {
        let mut gen = NoiseModel::new(0.05, seed).unwrap().generator();
        let m = simulate(MeasurementShape::DoubleFull, &truth, &G, &mut gen, 1).unwrap().remove(0);
        for kind in [SystemKind::SixEquation, SystemKind::TwelveEquation] {
            let sys = system_for(kind, &G);
            let rhs = sys.rhs(&m).unwrap();
            let x = least_squares_solve(&sys, &m).unwrap().offsets.to_vector();
            let ssr = |v: Vector3<f64>| (&rhs - &sys.design * v).norm_squared();
            let best = ssr(x);
            for axis in 0..3 {
                for step in [0.01, -0.01] {
                    let mut y = x;
                    y[axis] += step;
                    prop_assert!(ssr(y) >= best);
                }
            }
        }
    }

    #[test]
    fn analytic_model_jacobian_matches_finite_differences(d in offsets(2.0)) {
        let h = 1e-4;
        let (_, rows12) = double_posture_jacobian(&d, &G).unwrap();
        let (_, rows6) = reduced_jacobian(&d, &G).unwrap();
        let scale12 = rows12.iter().map(|r| r.abs().max()).fold(0.0, f64::max);
        let scale6 = rows6.iter().map(|r| r.abs().max()).fold(0.0, f64::max);
        for axis in 0..3 {
            let shifted = |s: f64| {
                let mut v = d.to_vector();
                v[axis] += s;
                JointOffsets::from_vector(&v)
            };
            let up = predict_double_posture(&shifted(h), &G).unwrap().to_array();
            let down = predict_double_posture(&shifted(-h), &G).unwrap().to_array();
            for (i, row) in rows12.iter().enumerate() {
                let fd = (up[i] - down[i]) / (2.0 * h);
                prop_assert!((fd - row[axis]).abs() <= 1e-5 * scale12, "row {i} axis {axis}: {fd} vs {}", row[axis]);
            }
            let up = predict_reduced(&shifted(h), &G).unwrap().to_array();
            let down = predict_reduced(&shifted(-h), &G).unwrap().to_array();
            for (i, row) in rows6.iter().enumerate() {
                let fd = (up[i] - down[i]) / (2.0 * h);
                prop_assert!((fd - row[axis]).abs() <= 1e-5 * scale6);
            }
        }
    }

    #[test]
    fn linear_solution_scales_with_measurements(values in prop::array::uniform6(-2.0..2.0f64), k in -10.0..10.0f64) {
        let sys = system_for(SystemKind::SixEquation, &G);
        let m = MeasurementSet::Reduced(ReducedMeasurements::from_array(values));
        let scaled = MeasurementSet::Reduced(ReducedMeasurements::from_array(values.map(|v| v * k)));
        let x = least_squares_solve(&sys, &m).unwrap().offsets.to_vector();
        let y = least_squares_solve(&sys, &scaled).unwrap().offsets.to_vector();
        prop_assert!((y - x * k).abs().max() <= 1e-12 * (1.0 + x.abs().max() * k.abs()));
    }
}

#[test]
fn power_of_two_scaling_is_exact() {
    let values = [0.31, -0.27, 0.05, 0.48, -0.12, 0.09];
    for kind in [SystemKind::SixEquation, SystemKind::SinglePosture] {
        let sys = system_for(kind, &G);
        let m = MeasurementSet::from_values(kind.shape(), &values).unwrap();
        let scaled = MeasurementSet::from_values(kind.shape(), &values.map(|v| v * 4.0)).unwrap();
        let x = least_squares_solve(&sys, &m).unwrap().offsets.to_vector();
        let y = least_squares_solve(&sys, &scaled)
            .unwrap()
            .offsets
            .to_vector();
        assert_eq!(y, x * 4.0, "{kind:?}");
    }
}

#[test]
fn closed_form_matches_pseudoinverse_on_consistent_data() {
    let truth = JointOffsets::new(0.4, -0.7, 1.1);
    let sys = system_for(SystemKind::SinglePosture, &G);
    let rhs = &sys.design * truth.to_vector();
    let m = SinglePostureMeasurements::from_array(rhs.as_slice().try_into().unwrap());
    let cf = solve_single_posture_closed_form(&m, &G);
    assert!(gap(&cf.offsets, &truth) < 1e-12);
}
