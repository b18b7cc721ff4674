//! Reference checks runnable from the command line: Monte-Carlo Shapley values against
//! exact enumeration, the linear closed form, dummy features, and analytic Jacobians
//! against central finite differences.

use epfx_core::attribution::{shap_exact, shap_mc, BackgroundSet, ShapConfig};
use epfx_core::math::{standard_normal, sub_seed};
use epfx_core::mlp::FnForecaster;
use epfx_core::{Activation, Init, MarketId, ModelSpec, ScalerKind, ScalerParams, TrainedModel, HOURS};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Debug, Clone, Copy)]
pub struct ShapBattery {
    pub n_models: usize,
    pub max_features: usize,
    pub n_pairs: usize,
    pub background_size: usize,
    pub seed: u64,
}

impl Default for ShapBattery {
    fn default() -> Self {
        ShapBattery { n_models: 20, max_features: 10, n_pairs: 2000, background_size: 16, seed: 7 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ShapBatteryReport {
    pub models: usize,
    pub entries: usize,
    /// Entries with `|mc − exact| > max(3·SE, 1e-6)`.
    pub violations: usize,
    /// Largest count of violations consistent with sampling noise.
    pub allowed_violations: usize,
    pub max_z: f64,
    pub max_abs_diff: f64,
    pub linear_max_err: f64,
    pub dummy_max_exact: f64,
    pub dummy_max_mc: f64,
    pub passed: bool,
}

/// Share of entries allowed outside three standard errors. Entries of one model share
/// their sampled pairs, so exceedances cluster; the allowance is set well above the
/// nominal normal tail to absorb that.
pub const ALLOWED_EXCEEDANCE_SHARE: f64 = 0.01;

/// No entry may be further than this many standard errors from the exact value.
pub const HARD_Z_LIMIT: f64 = 6.0;

pub fn allowed_exceedances(n: usize) -> usize {
    (n as f64 * ALLOWED_EXCEEDANCE_SHARE).ceil() as usize
}

fn random_rows<R: Rng>(rng: &mut R, rows: usize, locs: &[f64], scales: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(rows * locs.len());
    for _ in 0..rows {
        for (l, s) in locs.iter().zip(scales) {
            out.push(l + s * standard_normal(rng));
        }
    }
    out
}

/// Random small MLP with fitted scalers; feature `dummy` (if any) has zero fan-out.
pub fn random_mlp(n_features: usize, dummy: Option<usize>, seed: u64) -> (TrainedModel, Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let activation = if rng.random_bool(0.5) { Activation::Softplus } else { Activation::Selu };
    let init = [Init::GlorotUniform, Init::HeNormal, Init::LecunUniform, Init::LecunNormal][rng.random_range(0..4)];
    let h1 = rng.random_range(6..16);
    let h2 = rng.random_range(4..12);
    let output_scaler = if rng.random_bool(0.5) { ScalerKind::Std } else { ScalerKind::Arcsinh };
    let spec = ModelSpec {
        layer_sizes: vec![n_features, h1, h2, HOURS],
        activation,
        dropout_rate: 0.0,
        l1_factor: 0.0,
        init,
        input_scaler: ScalerKind::Std,
        output_scaler,
        seed: sub_seed(seed, 1),
    };
    let mut model = TrainedModel::init(spec).expect("valid spec");
    let locs: Vec<f64> = (0..n_features).map(|_| rng.random_range(-20.0..60.0)).collect();
    let scales: Vec<f64> = (0..n_features).map(|_| rng.random_range(0.5..15.0)).collect();
    let fit_rows = random_rows(&mut rng, 64, &locs, &scales);
    model.input_scaler = ScalerParams::fit(ScalerKind::Std, &fit_rows, n_features).expect("fit");
    let targets = random_rows(&mut rng, 64, &[40.0; HOURS], &[12.0; HOURS]);
    model.output_scaler = ScalerParams::fit(output_scaler, &targets, HOURS).expect("fit");
    for layer in &mut model.layers {
        for b in &mut layer.bias {
            *b = 0.3 * standard_normal(&mut rng);
        }
    }
    if let Some(d) = dummy {
        let first = &mut model.layers[0];
        for r in 0..first.rows {
            first.weights[r * first.cols + d] = 0.0;
        }
    }
    (model, locs, scales)
}

pub fn run_shap_battery(cfg: &ShapBattery) -> epfx_core::Result<ShapBatteryReport> {
    let mut report = ShapBatteryReport {
        models: cfg.n_models,
        entries: 0,
        violations: 0,
        allowed_violations: 0,
        max_z: 0.0,
        max_abs_diff: 0.0,
        linear_max_err: 0.0,
        dummy_max_exact: 0.0,
        dummy_max_mc: 0.0,
        passed: false,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let shap_cfg = ShapConfig { n_pairs: cfg.n_pairs, antithetic: true };
    for k in 0..cfg.n_models {
        let n = rng.random_range(2..=cfg.max_features.max(2));
        let dummy = rng.random_range(0..n);
        let (model, locs, scales) = random_mlp(n, Some(dummy), sub_seed(cfg.seed, k as u64));
        let bg = BackgroundSet::new(n, random_rows(&mut rng, cfg.background_size, &locs, &scales))?;
        let x = random_rows(&mut rng, 1, &locs, &scales);
        let exact = shap_exact(&model, &x, &bg)?;
        let mc = shap_mc(&model, &x, &bg, shap_cfg, sub_seed(cfg.seed, 1000 + k as u64))?;
        for (e, ((m, ex), se)) in mc.values.iter().zip(&exact.values).zip(&mc.std_err).enumerate() {
            let diff = (m - ex).abs();
            report.entries += 1;
            report.max_abs_diff = report.max_abs_diff.max(diff);
            if diff > (3.0 * se).max(1e-6) {
                report.violations += 1;
            }
            if diff > 1e-6 {
                report.max_z = report.max_z.max(if *se > 0.0 { diff / se } else { f64::INFINITY });
            }
            if e % n == dummy {
                report.dummy_max_exact = report.dummy_max_exact.max(ex.abs());
                report.dummy_max_mc = report.dummy_max_mc.max(m.abs());
            }
        }

        // linear model with the same background: exact values match a_i (x_i − mean_i)
        let a: Vec<f64> = (0..n).map(|_| standard_normal(&mut rng)).collect();
        let c = standard_normal(&mut rng);
        let linear = FnForecaster {
            n_inputs: n,
            n_outputs: 1,
            f: |z: &[f64], out: &mut [f64]| out[0] = c + a.iter().zip(z).map(|(ai, zi)| ai * zi).sum::<f64>(),
        };
        let lin = shap_exact(&linear, &x, &bg)?;
        for i in 0..n {
            let mean = (0..bg.len()).map(|r| bg.row(r)[i]).sum::<f64>() / bg.len() as f64;
            let closed = a[i] * (x[i] - mean);
            report.linear_max_err = report.linear_max_err.max((lin.get(0, i) - closed).abs() / closed.abs().max(1.0));
        }
    }
    report.allowed_violations = allowed_exceedances(report.entries);
    report.passed = report.violations <= report.allowed_violations
        && report.max_z <= HARD_Z_LIMIT
        && report.linear_max_err <= 1e-9
        && report.dummy_max_exact == 0.0
        && report.dummy_max_mc == 0.0;
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct GradientBatteryReport {
    pub instances: usize,
    pub entries: usize,
    pub step: f64,
    pub max_rel_err: f64,
    pub max_abs_err: f64,
    pub passed: bool,
}

/// Relative gap between an analytic and a numeric derivative. The floor keeps entries
/// that are zero up to rounding from dominating.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Floor used by [`relative_error`] in the gradient battery.
pub const GRADIENT_REL_FLOOR: f64 = 1e-4;

/// Model with the French architecture and scalers fitted to price-like data.
pub fn french_sized_model(seed: u64) -> TrainedModel {
    let spec = ModelSpec::builtin(MarketId::Fr, seed);
    let n = spec.n_inputs();
    let mut model = TrainedModel::init(spec).expect("valid spec");
    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(seed, 1));
    let rows = random_rows(&mut rng, 200, &vec![45.0; n], &vec![15.0; n]);
    model.input_scaler = ScalerParams::fit(model.spec.input_scaler, &rows, n).expect("fit");
    let targets = random_rows(&mut rng, 200, &[45.0; HOURS], &[15.0; HOURS]);
    model.output_scaler = ScalerParams::fit(model.spec.output_scaler, &targets, HOURS).expect("fit");
    model
}

/// Central differences in normalised input space, `n_outputs × n_inputs`.
pub fn finite_difference_jacobian(model: &TrainedModel, x_norm: &[f64], h: f64) -> Vec<f64> {
    let n = x_norm.len();
    let m = model.spec.n_outputs();
    let eval = |z: &[f64]| {
        let y = model.forward(z).expect("finite");
        model.output_scaler.inverse_transform(&y).expect("width")
    };
    let mut out = vec![0.0; m * n];
    let mut z = x_norm.to_vec();
    for i in 0..n {
        z[i] = x_norm[i] + h;
        let up = eval(&z);
        z[i] = x_norm[i] - h;
        let down = eval(&z);
        z[i] = x_norm[i];
        for j in 0..m {
            out[j * n + i] = (up[j] - down[j]) / (2.0 * h);
        }
    }
    out
}

pub fn run_gradient_battery(instances: usize, h: f64, seed: u64) -> GradientBatteryReport {
    let model = french_sized_model(seed);
    let n = model.spec.n_inputs();
    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(seed, 2));
    let mut report = GradientBatteryReport { instances, entries: 0, step: h, max_rel_err: 0.0, max_abs_err: 0.0, passed: false };
    for _ in 0..instances {
        let raw = random_rows(&mut rng, 1, &vec![45.0; n], &vec![15.0; n]);
        let x_norm = model.normalise_input(&raw);
        let analytic = model.jacobian_normalised(&x_norm);
        let numeric = finite_difference_jacobian(&model, &x_norm, h);
        for (a, b) in analytic.iter().zip(&numeric) {
            report.entries += 1;
            report.max_abs_err = report.max_abs_err.max((a - b).abs());
            report.max_rel_err = report.max_rel_err.max(relative_error(*a, *b, GRADIENT_REL_FLOOR));
        }
    }
    report.passed = report.max_rel_err <= 1e-5;
    report
}
