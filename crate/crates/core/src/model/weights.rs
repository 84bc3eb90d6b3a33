//! Parameter naming, initialization and grouping.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::features::FEATURE_DIM;
use crate::model::config::ModelConfig;
use crate::numerics::{ParamSet, Tensor};

/// Prefix of every geometry-head parameter.
pub const HEAD_PREFIX: &str = "head.";
/// Name of the geometry head in checkpoint `frozen` lists.
pub const HEAD_GROUP: &str = "geometry_head";

/// Inverse of softplus, for initializing softplus-parameterized scalars.
pub fn softplus_inverse(y: f64) -> f64 {
    y.exp_m1().ln()
}

pub const GATE_INIT: f64 = 0.1;
pub const TEMPERATURE_INIT: f64 = 1.0;
pub const FUSION_INIT: f64 = 0.5;

pub fn layer_name(layer: usize, field: &str) -> String {
    format!("layer{layer}.{field}")
}

fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor {
    let bound = 1.0 / (rows as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| rng.random_range(-bound..bound))
        .collect();
    Tensor::matrix(rows, cols, data).expect("sized")
}

/// Fresh parameters: fan-in uniform matrices, zero biases, unit LN gains.
pub fn init_params(cfg: &ModelConfig, seed: u64) -> ParamSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = cfg.d_model;
    let mut p = ParamSet::new();
    let mut matrix = |p: &mut ParamSet, name: String, rows: usize, cols: usize| {
        p.insert(name, uniform(&mut rng, rows, cols));
    };
    let zeros =
        |p: &mut ParamSet, name: String, cols: usize| p.insert(name, Tensor::zeros(1, cols));
    let ones =
        |p: &mut ParamSet, name: String, cols: usize| p.insert(name, Tensor::filled(1, cols, 1.0));

    matrix(&mut p, "input.w_f".into(), FEATURE_DIM, d);
    zeros(&mut p, "input.b_f".into(), d);
    matrix(&mut p, "gpe.w_g".into(), FEATURE_DIM, d);
    ones(&mut p, "gpe.ln_gain".into(), d);
    zeros(&mut p, "gpe.ln_bias".into(), d);
    p.insert("gpe.alpha_raw", Tensor::scalar(softplus_inverse(GATE_INIT)));

    for m in 0..cfg.layers {
        let n = |f: &str| layer_name(m, f);
        ones(&mut p, n("ln1_gain"), d);
        zeros(&mut p, n("ln1_bias"), d);
        for w in ["q", "k", "v", "o"] {
            matrix(&mut p, n(&format!("w_{w}")), d, d);
            zeros(&mut p, n(&format!("b_{w}")), d);
        }
        matrix(&mut p, n("w_ga"), FEATURE_DIM, d);
        p.insert(
            n("tau_raw"),
            Tensor::scalar(softplus_inverse(TEMPERATURE_INIT)),
        );
        p.insert(n("lambda"), Tensor::scalar(FUSION_INIT));
        ones(&mut p, n("ln2_gain"), d);
        zeros(&mut p, n("ln2_bias"), d);
        matrix(&mut p, n("ffn_w1"), d, cfg.ffn_dim());
        zeros(&mut p, n("ffn_b1"), cfg.ffn_dim());
        matrix(&mut p, n("ffn_w2"), cfg.ffn_dim(), d);
        zeros(&mut p, n("ffn_b2"), d);
    }

    matrix(&mut p, "head.w1".into(), d, d);
    zeros(&mut p, "head.b1".into(), d);
    matrix(&mut p, "head.w2".into(), d, 9);
    zeros(&mut p, "head.b2".into(), 9);

    matrix(&mut p, "cls.w_r".into(), 4, 2 * d);
    zeros(&mut p, "cls.b_r".into(), 2 * d);
    matrix(&mut p, "cls.w1".into(), d, d);
    zeros(&mut p, "cls.b1".into(), d);
    matrix(&mut p, "cls.w2".into(), d, 2);
    zeros(&mut p, "cls.b2".into(), 2);
    p
}

pub fn is_head_param(name: &str) -> bool {
    name.starts_with(HEAD_PREFIX)
}

/// Whether `forward` reads parameter `name` under `cfg`.
pub fn is_used(name: &str, cfg: &ModelConfig) -> bool {
    if name.starts_with("gpe.") {
        return cfg.use_gpe;
    }
    if name.ends_with(".w_ga") || name.ends_with(".tau_raw") || name.ends_with(".lambda") {
        return cfg.use_ga;
    }
    if is_head_param(name) || name.starts_with("cls.w_r") || name.starts_with("cls.b_r") {
        return cfg.use_ema;
    }
    true
}

/// Names of every parameter the classifier stage updates.
pub fn classifier_trainable(params: &ParamSet, cfg: &ModelConfig) -> Vec<String> {
    params
        .names()
        .filter(|n| !is_head_param(n) && is_used(n, cfg))
        .cloned()
        .collect()
}

/// Names of the geometry-head parameters.
pub fn head_trainable(params: &ParamSet) -> Vec<String> {
    params
        .names()
        .filter(|n| is_head_param(n))
        .cloned()
        .collect()
}

/// Shapes `init_params` would produce, for validating loaded checkpoints.
pub fn expected_shapes(cfg: &ModelConfig) -> Vec<(String, Vec<usize>)> {
    init_params(cfg, 0)
        .iter()
        .map(|(n, t)| (n.clone(), t.shape().to_vec()))
        .collect()
}
