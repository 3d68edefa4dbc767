use std::sync::OnceLock;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use tsdsim::dataset::{generate_database_with, GenerateOptions, MonotonicityGate, SlopeDatabase, SweepSpec};
use tsdsim::inverse::{
    backcalculate, backcalculate_batch, backcalculate_lookup, residual, sensitivity_report, sensitivity_table,
    ForwardModel, InverseProblem, Method, Slopes,
};
use tsdsim::tsd::TsdConfiguration;

fn model() -> &'static ForwardModel {
    static M: OnceLock<ForwardModel> = OnceLock::new();
    M.get_or_init(ForwardModel::default)
}

fn observe(e: f64) -> Slopes {
    model().reading(e).unwrap()
}

fn local_db() -> &'static SlopeDatabase {
    static DB: OnceLock<SlopeDatabase> = OnceLock::new();
    DB.get_or_init(|| {
        let spec = SweepSpec::subgrade(SweepSpec::range(90.0, 110.0, 1.0).unwrap());
        let opts = GenerateOptions {
            gate: MonotonicityGate::Record,
            ..GenerateOptions::default()
        };
        generate_database_with(&spec, &TsdConfiguration::default(), opts).unwrap().0
    })
}

#[test]
fn residual_vanishes_at_the_generating_modulus() {
    let p = InverseProblem::new(observe(100.0));
    assert!(residual(&p, 100.0).unwrap() <= 1e-20);
}

#[test]
fn single_weight_residual_is_one_squared_error() {
    let mut p = InverseProblem::new(observe(100.0));
    p.weights = [1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
    let d = observe(140.0)[0] - p.observed[0];
    assert_eq!(residual(&p, 140.0).unwrap(), d * d);
}

#[test]
fn residual_is_unimodal_around_the_truth() {
    let p = InverseProblem::new(observe(50.0));
    let scan: Vec<f64> = (0..=18).map(|i| residual(&p, 16.0 + 13.0 * i as f64).unwrap()).collect();
    let best = (0..scan.len()).min_by(|&a, &b| scan[a].total_cmp(&scan[b])).unwrap();
    assert!(scan[..=best].windows(2).all(|w| w[1] < w[0]));
    assert!(scan[best..].windows(2).all(|w| w[1] > w[0]));
    assert!(residual(&p, 250.0).unwrap() > residual(&p, 50.0).unwrap());
}

#[test]
fn ten_point_round_trip() {
    let truth: Vec<f64> = (0..10).map(|i| 16.0 + 26.0 * i as f64).collect();
    let problems: Vec<InverseProblem> = truth.iter().map(|&e| InverseProblem::new(observe(e))).collect();
    for (e, sol) in truth.iter().zip(backcalculate_batch(&problems)) {
        let sol = sol.unwrap();
        assert!((sol.modulus_mpa - e).abs() < 0.01, "{e}: {sol:?}");
        assert_eq!(sol.method, Method::Bracketed);
    }
}

#[test]
fn interior_and_boundary_estimates() {
    let sol = backcalculate(&InverseProblem::new(observe(123.0))).unwrap();
    assert!((sol.modulus_mpa - 123.0).abs() < 0.01, "{sol:?}");
    assert!(!sol.at_bound);
    assert!(sol.residual_norm < 1e-3);

    let sol = backcalculate(&InverseProblem::new(observe(16.0))).unwrap();
    assert!((sol.modulus_mpa - 16.0).abs() < 0.01, "{sol:?}");
    assert!(sol.at_bound);
}

#[test]
fn weights_scale_out_of_the_argmin() {
    let obs = observe(87.5);
    let plain = backcalculate(&InverseProblem::new(obs)).unwrap();
    let mut scaled = InverseProblem::new(obs);
    scaled.weights = [3.7; 7];
    let scaled = backcalculate(&scaled).unwrap();
    assert!((plain.modulus_mpa - scaled.modulus_mpa).abs() < 1e-3, "{plain:?} vs {scaled:?}");
}

#[test]
fn lookup_returns_exact_row() {
    let db = local_db();
    let row = &db.rows[10];
    let sol = backcalculate_lookup(&row.slopes, db, &[1.0; 7]).unwrap();
    assert_eq!(sol.modulus_mpa, row.modulus_mpa);
    assert_eq!(sol.method, Method::Lookup);
}

#[test]
fn lookup_between_rows_lands_between_them() {
    let db = local_db();
    let (a, b) = (&db.rows[10], &db.rows[11]);
    assert_eq!((a.modulus_mpa, b.modulus_mpa), (100.0, 101.0));
    let mid: Slopes = std::array::from_fn(|k| 0.5 * (a.slopes[k] + b.slopes[k]));
    let sol = backcalculate_lookup(&mid, db, &[1.0; 7]).unwrap();
    assert!(sol.modulus_mpa > 100.0 && sol.modulus_mpa < 101.0, "{sol:?}");
}

#[test]
fn lookup_clamps_far_readings_with_warning() {
    let db = local_db();
    for (reading, bound) in [(observe(20.0), 90.0), (observe(240.0), 110.0)] {
        let sol = backcalculate_lookup(&reading, db, &[1.0; 7]).unwrap();
        assert_eq!(sol.modulus_mpa, bound);
        assert!(sol.at_bound);
        assert!(!sol.warnings.is_empty());
    }
}

#[test]
fn estimators_agree_inside_the_database() {
    let db = local_db();
    for e in [93.3, 100.0, 106.8] {
        let obs = observe(e);
        let a = backcalculate(&InverseProblem::new(obs)).unwrap();
        let b = backcalculate_lookup(&obs, db, &[1.0; 7]).unwrap();
        assert!((a.modulus_mpa - b.modulus_mpa).abs() < 0.5, "{e}: {} vs {}", a.modulus_mpa, b.modulus_mpa);
    }
}

#[test]
fn noisy_readings_stay_in_regression_band() {
    // 1% Gaussian multiplicative noise per sensor, 100 fixed-seed draws.
    // Measured: max |error| 2.793 MPa, mean -0.006, sd 0.957.
    let clean = observe(100.0);
    let mut rng = ChaCha8Rng::seed_from_u64(20240917);
    let noise = Normal::new(0.0, 0.01).unwrap();
    let problems: Vec<InverseProblem> = (0..100)
        .map(|_| InverseProblem::new(std::array::from_fn(|k| clean[k] * (1.0 + noise.sample(&mut rng)))))
        .collect();
    let errors: Vec<f64> = backcalculate_batch(&problems)
        .into_iter()
        .map(|s| s.unwrap().modulus_mpa - 100.0)
        .collect();
    let worst = errors.iter().fold(0.0f64, |m, e| m.max(e.abs()));
    let mean = errors.iter().sum::<f64>() / errors.len() as f64;
    assert!(worst <= 2.8, "worst {worst}");
    assert!(mean.abs() <= 0.1, "mean {mean}");
}

#[test]
fn sensitivities_are_stable_under_step_halving() {
    let moduli = [20.0, 50.0, 100.0, 175.0, 240.0];
    let coarse = sensitivity_report(model(), &moduli).unwrap();
    let fine = sensitivity_table(|e| model().reading(e), &moduli, 0.25).unwrap();
    for (a, b) in coarse.rows.iter().zip(&fine.rows) {
        for (x, y) in a.derivatives.iter().zip(&b.derivatives) {
            assert!((x - y).abs() <= 0.05 * y.abs(), "E = {}: {x} vs {y}", a.modulus_mpa);
        }
    }
}

#[test]
fn spread_table_is_reported() {
    let moduli: Vec<f64> = (0..10).map(|i| 16.0 + 26.0 * i as f64).collect();
    let report = sensitivity_report(model(), &moduli).unwrap();
    println!("relative spread Sn1..Sn7: {:?}", report.relative_spread);
    assert!(report.relative_spread.iter().all(|s| s.is_finite() && *s > 0.0));
    // observation only: Sn7 spreads more than Sn1 here, but Sn1 > Sn2
    println!("outer sensors spread more: {}", report.outer_sensors_spread_more());
}
