//! Exact Shapley values checked against a brute-force average over every feature ordering.

mod common;

use common::small_model;
use epfx_core::attribution::{shap_exact, shap_mc, BackgroundSet, ShapConfig};
use epfx_core::mlp::FnForecaster;
use epfx_core::{Activation, Forecaster, ScalerKind};

/// Average marginal contribution over all n! orderings and every background row.
fn brute_force<F: Forecaster>(model: &F, x: &[f64], bg: &[Vec<f64>]) -> Vec<f64> {
    let n = x.len();
    let m = model.n_outputs();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut orders = Vec::new();
    heap_permutations(n, &mut perm, &mut orders);
    let mut phi = vec![0.0; m * n];
    let mut before = vec![0.0; m];
    let mut after = vec![0.0; m];
    for z in bg {
        for order in &orders {
            let mut state = z.clone();
            for &i in order {
                model.predict_into(&state, &mut before);
                state[i] = x[i];
                model.predict_into(&state, &mut after);
                for o in 0..m {
                    phi[o * n + i] += after[o] - before[o];
                }
            }
        }
    }
    let count = (orders.len() * bg.len()) as f64;
    phi.iter_mut().for_each(|v| *v /= count);
    phi
}

fn heap_permutations(k: usize, a: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if k <= 1 {
        out.push(a.clone());
        return;
    }
    for i in 0..k {
        heap_permutations(k - 1, a, out);
        if k.is_multiple_of(2) {
            a.swap(i, k - 1);
        } else {
            a.swap(0, k - 1);
        }
    }
}

fn background(n: usize, rows: usize, shift: f64) -> Vec<Vec<f64>> {
    (0..rows).map(|r| (0..n).map(|i| ((r * 7 + i * 3) as f64 * 0.77 + shift).sin() * 4.0 + i as f64).collect()).collect()
}

fn bg_set(rows: &[Vec<f64>]) -> BackgroundSet {
    BackgroundSet::new(rows[0].len(), rows.concat()).unwrap()
}

#[test]
fn permutation_count() {
    let mut a: Vec<usize> = (0..5).collect();
    let mut out = Vec::new();
    heap_permutations(5, &mut a, &mut out);
    out.sort();
    out.dedup();
    assert_eq!(out.len(), 120);
}

#[test]
fn exact_matches_brute_force_on_networks() {
    for (seed, n) in [(1u64, 2usize), (2, 3), (3, 4), (4, 5), (5, 5)] {
        for activation in [Activation::Softplus, Activation::Selu] {
            for scaler in [ScalerKind::Std, ScalerKind::Arcsinh] {
                let model = small_model(&[n, 7, 5, 3], activation, scaler, seed);
                let rows = background(n, 6, seed as f64);
                let x: Vec<f64> = (0..n).map(|i| 2.0 * i as f64 - 1.5 + seed as f64 * 0.3).collect();
                let exact = shap_exact(&model, &x, &bg_set(&rows)).unwrap();
                let brute = brute_force(&model, &x, &rows);
                for (a, b) in exact.values.iter().zip(&brute) {
                    assert!((a - b).abs() <= 1e-10 * b.abs().max(1.0), "{a} vs {b}");
                }
            }
        }
    }
}

#[test]
fn exact_matches_brute_force_on_interactions() {
    let model = FnForecaster {
        n_inputs: 4,
        n_outputs: 2,
        f: |z: &[f64], out: &mut [f64]| {
            out[0] = z[0] * z[1] * z[2] + z[3].max(0.5);
            out[1] = (z[0] - z[3]).abs() + z[1] * z[1];
        },
    };
    let rows = background(4, 5, 0.2);
    let x = [1.5, -2.0, 3.0, 0.25];
    let exact = shap_exact(&model, &x, &bg_set(&rows)).unwrap();
    let brute = brute_force(&model, &x, &rows);
    for (a, b) in exact.values.iter().zip(&brute) {
        assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{a} vs {b}");
    }
}

#[test]
fn product_of_two_hand_computed() {
    let model = FnForecaster { n_inputs: 2, n_outputs: 1, f: |z: &[f64], out: &mut [f64]| out[0] = z[0] * z[1] };
    let rows = vec![vec![0.0, 0.0], vec![1.0, 1.0]];
    let exact = shap_exact(&model, &[2.0, 3.0], &bg_set(&rows)).unwrap();
    assert_eq!(exact.values, vec![2.5, 3.0]);
    assert_eq!(exact.baseline, vec![0.5]);
}

#[test]
fn monte_carlo_converges_to_brute_force() {
    let model = small_model(&[4, 8, 6, 2], Activation::Softplus, ScalerKind::Arcsinh, 9);
    let rows = background(4, 4, 1.0);
    let x = [3.0, -1.0, 6.0, 2.0];
    let brute = brute_force(&model, &x, &rows);
    let mc = shap_mc(&model, &x, &bg_set(&rows), ShapConfig { n_pairs: 20_000, antithetic: true }, 5).unwrap();
    for ((a, b), se) in mc.values.iter().zip(&brute).zip(&mc.std_err) {
        assert!((a - b).abs() <= (5.0 * se).max(1e-9), "{a} vs {b} (se {se})");
    }
}
