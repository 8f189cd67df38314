mod common;

use common::*;
use horseshoe_em::models::{linear_fit, logistic_fit, normal_means_fit};
use horseshoe_em::{EmConfig, Error};
use ndarray::{Array1, Array2, Axis};
use rand::Rng;

fn strong_predictor_sample(seed: u64) -> (Array2<f64>, Array1<f64>) {
    let mut rng = rng(seed);
    let x = normal_matrix(&mut rng, 200, 5);
    let y = x.column(0).mapv(|v| 5.0 * v) + normal_vector(&mut rng, 200);
    (x, y)
}

#[test]
fn single_strong_predictor_is_selected_alone() {
    let runs = 40;
    let config = EmConfig::default();
    let hits = (0..runs)
        .filter(|&seed| {
            let (x, y) = strong_predictor_sample(seed);
            let fit = linear_fit(x.view(), y.view(), None, &config).unwrap();
            let only_first = fit.beta[0] != 0.0 && fit.beta.iter().skip(1).all(|b| *b == 0.0);
            only_first && (fit.beta[0] - 5.0).abs() < 0.3
        })
        .count();
    assert!(hits as f64 >= 0.95 * runs as f64, "{hits}/{runs}");
}

#[test]
fn noiseless_signal_is_recovered() {
    let mut rng = rng(3);
    let x = normal_matrix(&mut rng, 50, 4);
    let y = x.column(0).mapv(|v| 2.0 * v + 1.0);
    let fit = linear_fit(x.view(), y.view(), None, &EmConfig::default()).unwrap();
    assert!((fit.beta[0] - 2.0).abs() < 1e-3, "{}", fit.beta[0]);
    assert!(fit.beta.iter().skip(1).all(|b| *b == 0.0), "{:?}", fit.beta);
    assert!((fit.intercept - 1.0).abs() < 1e-3);
    assert!(fit.state.sigma_sq < 1e-4);
}

#[test]
fn target_scale_carries_through() {
    let (x, y) = strong_predictor_sample(7);
    let config = EmConfig {
        tolerance: 1e-10,
        ..EmConfig::default()
    };
    let base = linear_fit(x.view(), y.view(), None, &config).unwrap();
    let c = 7.5;
    let y_shifted = y.mapv(|v| c * v);
    let scaled = linear_fit(x.view(), y_shifted.view(), None, &config).unwrap();
    for (a, b) in base.beta.iter().zip(scaled.beta.iter()) {
        assert!((c * a - b).abs() <= 1e-4 * b.abs().max(1.0), "{a} {b}");
    }
    assert!((c * base.intercept - scaled.intercept).abs() < 1e-4);
}

#[test]
fn column_rescaling_rescales_coefficient() {
    let (x, y) = strong_predictor_sample(8);
    let config = EmConfig::default();
    let base = linear_fit(x.view(), y.view(), None, &config).unwrap();
    let mut x2 = x.clone();
    x2.column_mut(0).mapv_inplace(|v| 10.0 * v + 3.0);
    let moved = linear_fit(x2.view(), y.view(), None, &config).unwrap();
    assert!((base.beta[0] - 10.0 * moved.beta[0]).abs() < 1e-8);
    let fitted_a = x.dot(&base.beta) + base.intercept;
    let fitted_b = x2.dot(&moved.beta) + moved.intercept;
    for (a, b) in fitted_a.iter().zip(fitted_b.iter()) {
        assert!((a - b).abs() < 1e-8);
    }
}

#[test]
fn constant_column_is_named() {
    let mut rng = rng(9);
    let mut x = normal_matrix(&mut rng, 20, 3);
    x.column_mut(1).fill(4.0);
    let y = normal_vector(&mut rng, 20);
    let names: Vec<String> = ["age", "sex", "bmi"].iter().map(|s| s.to_string()).collect();
    let err = linear_fit(x.view(), y.view(), Some(&names), &EmConfig::default()).unwrap_err();
    assert!(matches!(err, Error::ConstantColumn { ref name } if name == "sex"), "{err}");
}

#[test]
fn pure_noise_normal_means_selects_nothing() {
    let runs = 50;
    let clean = (0..runs)
        .filter(|&seed| {
            let y = normal_vector(&mut rng(1000 + seed), 100);
            normal_means_fit(y.view(), &EmConfig::default()).unwrap().selected() == 0
        })
        .count();
    assert!(clean as f64 >= 0.9 * runs as f64, "{clean}/{runs} empty fits");
}

#[test]
fn normal_means_large_signals_survive() {
    let mut y = normal_vector(&mut rng(5), 200);
    for j in 0..5 {
        y[j] += 12.0;
    }
    let fit = normal_means_fit(y.view(), &EmConfig::default()).unwrap();
    for j in 0..5 {
        assert!((fit.beta[j] - y[j]).abs() < 1.0, "{} vs {}", fit.beta[j], y[j]);
    }
}

fn logistic_sample(seed: u64, n: usize, p: usize, coef: f64) -> (Array2<f64>, Array1<f64>) {
    let mut rng = rng(seed);
    let x = normal_matrix(&mut rng, n, p);
    let y = x
        .column(0)
        .mapv(|v| 1.0 / (1.0 + (-coef * v).exp()))
        .mapv(|prob| if rng.random::<f64>() < prob { 1.0 } else { 0.0 });
    (x, y)
}

#[test]
fn logistic_strong_separator_is_found() {
    let runs = 30;
    let config = EmConfig::default();
    let hits = (0..runs)
        .filter(|&seed| {
            let (x, y) = logistic_sample(500 + seed, 200, 5, 3.0);
            let fit = logistic_fit(x.view(), y.view(), None, &config).unwrap();
            fit.beta[0] > 0.0
        })
        .count();
    assert!(hits as f64 >= 0.95 * runs as f64, "{hits}/{runs}");
}

#[test]
fn logistic_null_stays_sparse() {
    let runs = 50;
    let config = EmConfig::default();
    let small = (0..runs)
        .filter(|&seed| {
            let (x, y) = logistic_sample(800 + seed, 200, 50, 0.0);
            logistic_fit(x.view(), y.view(), None, &config).unwrap().selected() <= 2
        })
        .count();
    assert!(small as f64 >= 0.9 * runs as f64, "{small}/{runs}");
}

#[test]
fn logistic_intercept_tracks_base_rate() {
    let mut rng = rng(21);
    let x = normal_matrix(&mut rng, 400, 3);
    let y = Array1::from_shape_simple_fn(400, || if rng.random::<f64>() < 0.8 { 1.0 } else { 0.0 });
    let fit = logistic_fit(x.view(), y.view(), None, &EmConfig::default()).unwrap();
    let rate = y.mean().unwrap();
    assert!((fit.intercept - (rate / (1.0 - rate)).ln()).abs() < 0.1, "{}", fit.intercept);
    assert!(x.mean_axis(Axis(0)).is_some());
}
