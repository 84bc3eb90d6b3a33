//! Helpers shared by several test targets.
#![allow(dead_code)]

use geovid::geometry::features::{estimate_frame, FEATURE_DIM};
use geovid::geometry::vanishing::VpConfig;
use geovid::linalg::axis_angle_between;
use geovid::model::weights::layer_name;
use geovid::model::{init_params, ModelConfig};
use geovid::numerics::ParamSet;
use geovid::synthworld::dataset::{generate_sample, DatasetConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Initial parameters with every entry (biases and gains included) jittered.
pub fn random_params(cfg: &ModelConfig, seed: u64) -> ParamSet {
    let mut p = init_params(cfg, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x77);
    let names: Vec<String> = p.names().cloned().collect();
    for n in names {
        for v in p.get_mut(&n).unwrap().data_mut() {
            *v += rng.random_range(-0.3..0.3);
        }
    }
    p
}

pub fn random_features(seed: u64, t: usize) -> Vec<[f64; FEATURE_DIM]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..t)
        .map(|_| std::array::from_fn(|_| rng.random_range(-1.0..1.0)))
        .collect()
}

pub type M = Vec<Vec<f64>>;

fn mat(p: &ParamSet, name: &str) -> M {
    p.get(name).unwrap().to_rows()
}

fn vecp(p: &ParamSet, name: &str) -> Vec<f64> {
    p.get(name).unwrap().data().to_vec()
}

fn mm(a: &M, b: &M) -> M {
    a.iter()
        .map(|row| {
            (0..b[0].len())
                .map(|j| row.iter().zip(b).map(|(x, brow)| x * brow[j]).sum())
                .collect()
        })
        .collect()
}

fn plus_bias(a: &M, b: &[f64]) -> M {
    a.iter()
        .map(|r| r.iter().zip(b).map(|(x, y)| x + y).collect())
        .collect()
}

fn add(a: &M, b: &M) -> M {
    a.iter()
        .zip(b)
        .map(|(r, s)| r.iter().zip(s).map(|(x, y)| x + y).collect())
        .collect()
}

fn layer_norm(a: &M, gain: &[f64], bias: &[f64], eps: f64) -> M {
    a.iter()
        .map(|r| {
            let n = r.len() as f64;
            let mean = r.iter().sum::<f64>() / n;
            let var = r.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
            r.iter()
                .enumerate()
                .map(|(i, x)| (x - mean) / (var + eps).sqrt() * gain[i] + bias[i])
                .collect()
        })
        .collect()
}

fn softmax(r: &[f64]) -> Vec<f64> {
    let m = r.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = r.iter().map(|x| (x - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|x| x / s).collect()
}

fn positions(t: usize, d: usize) -> M {
    (0..t)
        .map(|pos| {
            (0..d)
                .map(|i| {
                    let pair = (i / 2 * 2) as f64;
                    let angle = pos as f64 / 10000f64.powf(pair / d as f64);
                    if i % 2 == 0 {
                        angle.sin()
                    } else {
                        angle.cos()
                    }
                })
                .collect()
        })
        .collect()
}

fn reference_layer(p: &ParamSet, cfg: &ModelConfig, m: usize, x: &M) -> M {
    let n = |f: &str| layer_name(m, f);
    let x1 = layer_norm(
        x,
        &vecp(p, &n("ln1_gain")),
        &vecp(p, &n("ln1_bias")),
        cfg.ln_eps,
    );
    let q = plus_bias(&mm(&x1, &mat(p, &n("w_q"))), &vecp(p, &n("b_q")));
    let k = plus_bias(&mm(&x1, &mat(p, &n("w_k"))), &vecp(p, &n("b_k")));
    let v = plus_bias(&mm(&x1, &mat(p, &n("w_v"))), &vecp(p, &n("b_v")));
    let dh = cfg.d_model / cfg.heads;
    let t = x.len();
    let mut concat = vec![vec![0.0; cfg.d_model]; t];
    for h in 0..cfg.heads {
        let cols = h * dh..(h + 1) * dh;
        for i in 0..t {
            let scores: Vec<f64> = (0..t)
                .map(|j| cols.clone().map(|c| q[i][c] * k[j][c]).sum::<f64>() / (dh as f64).sqrt())
                .collect();
            let a = softmax(&scores);
            for c in cols.clone() {
                concat[i][c] = (0..t).map(|j| a[j] * v[j][c]).sum();
            }
        }
    }
    let attn = plus_bias(&mm(&concat, &mat(p, &n("w_o"))), &vecp(p, &n("b_o")));
    let x2 = add(x, &attn);
    let x3 = layer_norm(
        &x2,
        &vecp(p, &n("ln2_gain")),
        &vecp(p, &n("ln2_bias")),
        cfg.ln_eps,
    );
    let hidden: M = plus_bias(&mm(&x3, &mat(p, &n("ffn_w1"))), &vecp(p, &n("ffn_b1")))
        .into_iter()
        .map(|r| r.into_iter().map(|v| v.max(0.0)).collect())
        .collect();
    let ffn = plus_bias(&mm(&hidden, &mat(p, &n("ffn_w2"))), &vecp(p, &n("ffn_b2")));
    add(&x2, &ffn)
}

/// Backbone output and logits of a plain pre-LN transformer classifier.
pub fn reference_forward(
    p: &ParamSet,
    cfg: &ModelConfig,
    features: &[[f64; FEATURE_DIM]],
) -> (M, [f64; 2]) {
    let f: M = features.iter().map(|r| r.to_vec()).collect();
    let mut x = add(
        &plus_bias(&mm(&f, &mat(p, "input.w_f")), &vecp(p, "input.b_f")),
        &positions(f.len(), cfg.d_model),
    );
    for m in 0..cfg.layers {
        x = reference_layer(p, cfg, m, &x);
    }
    let pooled: Vec<f64> = (0..cfg.d_model)
        .map(|c| x.iter().map(|r| r[c]).sum::<f64>() / x.len() as f64)
        .collect();
    let z: M = plus_bias(&mm(&vec![pooled], &mat(p, "cls.w1")), &vecp(p, "cls.b1"))
        .into_iter()
        .map(|r| r.into_iter().map(|v| v.max(0.0)).collect())
        .collect();
    let l = plus_bias(&mm(&z, &mat(p, "cls.w2")), &vecp(p, "cls.b2"));
    (x, [l[0][0], l[0][1]])
}

// ---- geometry oracle ----

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v[v.len() / 2]
}

/// Angular errors (degrees) between each ground-truth axis and the closest detected direction.
pub fn frame_errors(cfg: &DatasetConfig, samples: usize) -> Vec<f64> {
    let mut errs = Vec::new();
    for i in 0..samples {
        let s = generate_sample(cfg, i).unwrap();
        for (t, fl) in s.frames.iter().enumerate() {
            let est = estimate_frame(fl, &s.intrinsics[t], &VpConfig::default()).unwrap();
            for gt in &s.gt_directions[t] {
                let best = (0..3)
                    .filter(|&j| est.visible[j])
                    .map(|j| axis_angle_between(&est.vp3d[j], gt).to_degrees())
                    .fold(f64::INFINITY, f64::min);
                errs.push(best.min(90.0));
            }
        }
    }
    errs
}
