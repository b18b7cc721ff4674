mod common;

use common::{block_features, shap_tensor, small_model};
use epfx_core::analytics::{complexity_metrics, heatmap, performance_metrics, Aggregation};
use epfx_core::attribution::{shap_mc, AttributionKind, AttributionTensor, BackgroundSet, ShapConfig};
use epfx_core::sshap::{aggregate, kernel_smooth, Group, Partition};
use epfx_core::{Activation, Day, Forecaster, ScalerKind};
use proptest::prelude::*;

fn activation() -> impl Strategy<Value = Activation> {
    prop_oneof![Just(Activation::Softplus), Just(Activation::Selu), Just(Activation::Linear)]
}

fn scaler() -> impl Strategy<Value = ScalerKind> {
    prop_oneof![Just(ScalerKind::Std), Just(ScalerKind::Arcsinh)]
}

/// Random partition of `n` features into at most `k` non-empty groups.
fn random_partition(features: Vec<epfx_core::FeatureId>, owners: &[usize]) -> Partition {
    let mut groups: Vec<Group> = Vec::new();
    for (i, &o) in owners.iter().enumerate() {
        let label = format!("G{o}");
        match groups.iter_mut().find(|g| g.label == label) {
            Some(g) => g.members.push(i),
            None => groups.push(Group { label, members: vec![i] }),
        }
    }
    Partition::new(features, groups).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn shapley_values_add_up_to_the_forecast_gap(
        n in 2usize..10,
        activation in activation(),
        out_scaler in scaler(),
        seed in any::<u64>(),
        n_pairs in 1usize..12,
        antithetic in any::<bool>(),
        xs in prop::collection::vec(-6.0f64..6.0, 10),
        bgs in prop::collection::vec(-6.0f64..6.0, 30),
    ) {
        let model = small_model(&[n, 9, 5, 24], activation, out_scaler, seed);
        let x = &xs[..n];
        let bg = BackgroundSet::new(n, bgs[..3 * n].to_vec()).unwrap();
        let est = shap_mc(&model, x, &bg, ShapConfig { n_pairs, antithetic }, seed).unwrap();
        let mut fx = vec![0.0; 24];
        model.predict_into(x, &mut fx);
        for (o, f) in fx.iter().enumerate() {
            let b = est.baseline[o];
            let scale = f.abs().max(b.abs()).max(1e-12);
            prop_assert!((est.output_sum(o) - (f - b)).abs() / scale <= 1e-9, "output {o}: sum {} vs {f} - {b}", est.output_sum(o));
        }
    }

    #[test]
    fn grouped_values_preserve_totals_and_refine(
        blocks in 1usize..4,
        owners_seed in prop::collection::vec(0usize..6, 96),
        vals in prop::collection::vec(-10.0f64..10.0, 96 * 3 * 2),
    ) {
        let features = block_features(blocks);
        let nf = features.len();
        let n_out = 3;
        let tensor = shap_tensor(features.clone(), n_out, vals[..2 * n_out * nf].to_vec(), vec![1.0; 2 * n_out]);
        let part = random_partition(features, &owners_seed[..nf]);
        let sshap = aggregate(&tensor, &part).unwrap();
        for r in 0..2 * n_out {
            let shap_sum: f64 = tensor.values[r * nf..(r + 1) * nf].iter().sum();
            let ng = part.groups.len();
            let sshap_sum: f64 = sshap.values[r * ng..(r + 1) * ng].iter().sum();
            prop_assert!((shap_sum - sshap_sum).abs() <= 1e-9 * shap_sum.abs().max(1.0));
        }
        // merging two groups gives the sum of their values
        if part.groups.len() >= 2 {
            let a = part.groups[0].label.clone();
            let b = part.groups[1].label.clone();
            let merged = aggregate(&tensor, &part.merge("AB", &[&a, &b]).unwrap()).unwrap();
            let g = merged.group_index("AB").unwrap();
            for i in 0..2 {
                for o in 0..n_out {
                    let expect = sshap.get(i, o, 0) + sshap.get(i, o, 1);
                    prop_assert!((merged.get(i, o, g) - expect).abs() <= 1e-12 * expect.abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn smoother_is_linear_and_order_free(
        obs in prop::collection::vec((0.0f64..200.0, -20.0f64..20.0, -20.0f64..20.0), 1..60),
        alpha in -3.0f64..3.0,
        beta in -3.0f64..3.0,
        bandwidth in 0.5f64..20.0,
        rotate in 0usize..60,
    ) {
        let prices: Vec<f64> = obs.iter().map(|o| o.0).collect();
        let a: Vec<f64> = obs.iter().map(|o| o.1).collect();
        let b: Vec<f64> = obs.iter().map(|o| o.2).collect();
        let grid: Vec<f64> = (0..25).map(|k| k as f64 * 8.0).collect();
        let combo: Vec<f64> = a.iter().zip(&b).map(|(x, y)| alpha * x + beta * y).collect();
        let sa = kernel_smooth(&prices, &a, &grid, bandwidth).unwrap();
        let sb = kernel_smooth(&prices, &b, &grid, bandwidth).unwrap();
        let sc = kernel_smooth(&prices, &combo, &grid, bandwidth).unwrap();
        for k in 0..grid.len() {
            match (sa[k], sb[k], sc[k]) {
                (Some(x), Some(y), Some(z)) => prop_assert!((alpha * x + beta * y - z).abs() <= 1e-9),
                (None, None, None) => {}
                other => prop_assert!(false, "inconsistent support {other:?}"),
            }
        }
        let r = rotate % prices.len();
        let mut p2 = prices.clone();
        let mut a2 = a.clone();
        p2.rotate_left(r);
        a2.rotate_left(r);
        let s2 = kernel_smooth(&p2, &a2, &grid, bandwidth).unwrap();
        for (x, y) in sa.iter().zip(&s2) {
            match (x, y) {
                (Some(x), Some(y)) => prop_assert!((x - y).abs() <= 1e-9),
                (None, None) => {}
                _ => prop_assert!(false),
            }
        }
    }

    #[test]
    fn smoothing_a_constant_returns_it(
        prices in prop::collection::vec(0.0f64..100.0, 1..40),
        c in -50.0f64..50.0,
    ) {
        let values = vec![c; prices.len()];
        let grid = [prices[0], 50.0];
        for v in kernel_smooth(&prices, &values, &grid, 5.0).unwrap().into_iter().flatten() {
            prop_assert!((v - c).abs() <= 1e-12 * c.abs().max(1.0));
        }
    }

    #[test]
    fn mean_abs_heatmap_is_non_negative_and_bounds_mean(
        vals in prop::collection::vec(-5.0f64..5.0, 3 * 24 * 48),
    ) {
        let features = block_features(2);
        let t = shap_tensor(features, 24, vals, vec![0.0; 3 * 24]);
        let abs = heatmap(&t, Aggregation::MeanAbs).unwrap();
        let mean = heatmap(&t, Aggregation::Mean).unwrap();
        for (a, m) in abs.cells().zip(mean.cells()) {
            prop_assert!(a >= 0.0);
            prop_assert!(m.abs() <= a + 1e-12);
        }
    }

    #[test]
    fn repeated_instances_have_zero_non_linearity(
        row in prop::collection::vec(-5.0f64..5.0, 24 * 24),
        copies in 2usize..6,
    ) {
        let features = block_features(1);
        let grad = AttributionTensor {
            kind: AttributionKind::Gradient,
            instances: (0..copies as i32).map(Day).collect(),
            features: features.clone(),
            n_outputs: 24,
            values: row.repeat(copies),
            baseline: Vec::new(),
        };
        let hm = heatmap(&shap_tensor(features, 24, row.clone(), vec![0.0; 24]), Aggregation::MeanAbs).unwrap();
        prop_assert_eq!(complexity_metrics(&grad, &hm, 0.5).unwrap().non_linearity, 0.0);
    }

    #[test]
    fn relative_error_ignores_common_scale(
        data in prop::collection::vec((1.0f64..100.0, 1.0f64..100.0, 1.0f64..100.0), 2..50),
        k in 0.1f64..10.0,
    ) {
        let p: Vec<f64> = data.iter().map(|d| d.0).collect();
        let y: Vec<f64> = data.iter().map(|d| d.1).collect();
        let z: Vec<f64> = data.iter().map(|d| d.2 + 0.5).collect();
        prop_assume!(z.iter().zip(&y).any(|(a, b)| a != b));
        let base = performance_metrics(&p, &y, &z).unwrap();
        let s = |v: &[f64]| v.iter().map(|x| x * k).collect::<Vec<_>>();
        let scaled = performance_metrics(&s(&p), &s(&y), &s(&z)).unwrap();
        prop_assert!((base.rmae - scaled.rmae).abs() <= 1e-9 * base.rmae.max(1.0));
        prop_assert!((base.smape - scaled.smape).abs() <= 1e-9);
        prop_assert!((base.mae * k - scaled.mae).abs() <= 1e-9 * scaled.mae.max(1.0));
    }
}
