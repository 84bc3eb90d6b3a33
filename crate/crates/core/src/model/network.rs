//! The forward graph, recorded onto a [`Tape`].

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::features::FEATURE_DIM;
use crate::model::config::ModelConfig;
use crate::model::temporal::{
    ema_matrix, first_difference_matrix, second_difference_matrix, shift_matrix,
};
use crate::model::weights::layer_name;
use crate::numerics::{Bound, Tape, Tensor, Var};

/// Handles to the interesting nodes of one forward pass.
#[derive(Debug, Clone)]
pub struct Graph {
    /// `[1, 2]` logits, `[real, generated]`.
    pub logits: Var,
    /// Input embedding after positional encoding, `[T, d_model]`.
    pub embedding: Var,
    /// Output of the last transformer layer, `[T, d_model]`.
    pub backbone: Var,
    /// Geometry-head directions `[T, 9]`, three unit 3-vectors per row.
    pub u: Option<Var>,
    pub u_hat: Option<Var>,
    /// `[T, 4]` residuals.
    pub residuals: Option<Var>,
    /// Per layer, per head: fused attention `A_tg`.
    pub attention: Vec<Vec<Var>>,
}

/// Inverted dropout driven by an explicit generator.
pub struct Dropout<'a> {
    pub rate: f64,
    pub rng: &'a mut ChaCha8Rng,
}

fn apply_dropout(tape: &mut Tape, x: Var, drop: &mut Option<Dropout<'_>>) -> Result<Var> {
    let Some(d) = drop else { return Ok(x) };
    if d.rate == 0.0 {
        return Ok(x);
    }
    let (m, n) = tape.value(x).dims()?;
    let keep = 1.0 / (1.0 - d.rate);
    let mask = (0..m * n)
        .map(|_| {
            if d.rng.random::<f64>() < d.rate {
                0.0
            } else {
                keep
            }
        })
        .collect();
    let mask = tape.constant(Tensor::matrix(m, n, mask)?)?;
    tape.mul(x, mask)
}

fn linear(tape: &mut Tape, b: &Bound, x: Var, w: &str, bias: &str) -> Result<Var> {
    let y = tape.matmul(x, b.var(w)?)?;
    tape.add_row(y, b.var(bias)?)
}

fn affine_layer_norm(
    tape: &mut Tape,
    b: &Bound,
    x: Var,
    gain: &str,
    bias: &str,
    eps: f64,
) -> Result<Var> {
    let n = tape.layer_norm(x, eps)?;
    let n = tape.mul_row(n, b.var(gain)?)?;
    tape.add_row(n, b.var(bias)?)
}

/// `f_t - f_{t-1}`, with a zero first row.
pub fn temporal_differences(features: &Tensor) -> Tensor {
    let (t, n) = (features.rows(), features.cols());
    let mut out = Tensor::zeros(t, n);
    for r in 1..t {
        for c in 0..n {
            out.set(r, c, features.get(r, c) - features.get(r - 1, c));
        }
    }
    out
}

/// Standard sinusoidal position encoding, `[t, d]`.
pub fn sinusoidal_encoding(t: usize, d: usize) -> Tensor {
    let mut out = Tensor::zeros(t, d);
    for pos in 0..t {
        for i in 0..d {
            let freq = 10000f64.powf(-((i - i % 2) as f64) / d as f64);
            let a = pos as f64 * freq;
            out.set(pos, i, if i % 2 == 0 { a.sin() } else { a.cos() });
        }
    }
    out
}

/// Input embedding `X_t = W_f f_t + alpha E_t`, with `E_t = LN(W_g (f_t - f_{t-1}))`,
/// or sinusoidal positions in place of `alpha E_t` when the encoding is disabled.
pub fn gpe_encode(tape: &mut Tape, b: &Bound, features: &Tensor, cfg: &ModelConfig) -> Result<Var> {
    let t = features.rows();
    if t < 2 {
        return Err(Error::TooShort(t));
    }
    if features.cols() != FEATURE_DIM {
        return Err(Error::shape(
            "gpe_encode",
            format!("{} feature columns", features.cols()),
        ));
    }
    let f = tape.constant(features.clone())?;
    let x = linear(tape, b, f, "input.w_f", "input.b_f")?;
    if cfg.use_gpe {
        let delta = tape.constant(temporal_differences(features))?;
        let g = tape.matmul(delta, b.var("gpe.w_g")?)?;
        let e = affine_layer_norm(tape, b, g, "gpe.ln_gain", "gpe.ln_bias", cfg.ln_eps)?;
        let alpha = tape.softplus(b.var("gpe.alpha_raw")?)?;
        let gated = tape.mul_scalar(e, alpha)?;
        tape.add(x, gated)
    } else {
        let pe = tape.constant(sinusoidal_encoding(t, cfg.d_model))?;
        tape.add(x, pe)
    }
}

/// Row-stochastic geometric affinity `softmax(cos(W f_i, W f_j) / tau)`.
pub fn geometric_attention(tape: &mut Tape, b: &Bound, layer: usize, f: Var) -> Result<Var> {
    let g = tape.matmul(f, b.var(&layer_name(layer, "w_ga"))?)?;
    let cos = tape.cosine_similarity_matrix(g)?;
    let tau = tape.softplus(b.var(&layer_name(layer, "tau_raw"))?)?;
    let inv_tau = tape.recip(tau)?;
    let logits = tape.mul_scalar(cos, inv_tau)?;
    tape.row_softmax(logits)
}

/// One pre-LN layer with temporal and geometric attention fused as
/// `A_tg = A_t + lambda A_g`. Returns the output and the per-head `A_tg`.
pub fn gat_layer(
    tape: &mut Tape,
    b: &Bound,
    layer: usize,
    x_in: Var,
    f: Var,
    cfg: &ModelConfig,
    drop: &mut Option<Dropout<'_>>,
) -> Result<(Var, Vec<Var>)> {
    let n = |field: &str| layer_name(layer, field);
    let x1 = affine_layer_norm(tape, b, x_in, &n("ln1_gain"), &n("ln1_bias"), cfg.ln_eps)?;
    let q = linear(tape, b, x1, &n("w_q"), &n("b_q"))?;
    let k = linear(tape, b, x1, &n("w_k"), &n("b_k"))?;
    let v = linear(tape, b, x1, &n("w_v"), &n("b_v"))?;

    let fused = if cfg.use_ga {
        let a_g = geometric_attention(tape, b, layer, f)?;
        Some(tape.mul_scalar(a_g, b.var(&n("lambda"))?)?)
    } else {
        None
    };

    let dh = cfg.head_dim();
    let scale = 1.0 / (dh as f64).sqrt();
    let mut heads = Vec::with_capacity(cfg.heads);
    let mut maps = Vec::with_capacity(cfg.heads);
    for h in 0..cfg.heads {
        let (lo, hi) = (h * dh, (h + 1) * dh);
        let qh = tape.slice_cols(q, lo, hi)?;
        let kh = tape.slice_cols(k, lo, hi)?;
        let vh = tape.slice_cols(v, lo, hi)?;
        let scores = tape.matmul_nt(qh, kh)?;
        let scores = tape.scale(scores, scale)?;
        let a_t = tape.row_softmax(scores)?;
        let a_tg = match fused {
            Some(g) => tape.add(a_t, g)?,
            None => a_t,
        };
        maps.push(a_tg);
        heads.push(tape.matmul(a_tg, vh)?);
    }
    let x_a = tape.concat_cols(&heads)?;
    let attn = linear(tape, b, x_a, &n("w_o"), &n("b_o"))?;
    let attn = apply_dropout(tape, attn, drop)?;
    let x2 = tape.add(x_in, attn)?;

    let x3 = affine_layer_norm(tape, b, x2, &n("ln2_gain"), &n("ln2_bias"), cfg.ln_eps)?;
    let hidden = linear(tape, b, x3, &n("ffn_w1"), &n("ffn_b1"))?;
    let hidden = tape.relu(hidden)?;
    let ffn = linear(tape, b, hidden, &n("ffn_w2"), &n("ffn_b2"))?;
    let ffn = apply_dropout(tape, ffn, drop)?;
    Ok((tape.add(x2, ffn)?, maps))
}

/// Two-layer MLP to three unit, sign-canonical directions per frame, `[T, 9]`.
pub fn geometry_head(tape: &mut Tape, b: &Bound, x: Var) -> Result<Var> {
    let h = linear(tape, b, x, "head.w1", "head.b1")?;
    let h = tape.relu(h)?;
    let raw = linear(tape, b, h, "head.w2", "head.b2")?;
    tape.block_normalize(raw, 3)
}

/// EMA-smoothed directions and the `[T, 4]` residual matrix.
pub fn ema_residuals(tape: &mut Tape, u: Var, alpha: f64) -> Result<(Var, Var)> {
    let t = tape.value(u).rows();
    let l = tape.constant(ema_matrix(t, alpha))?;
    let u_hat = tape.matmul(l, u)?;

    let shift = tape.constant(shift_matrix(t))?;
    let prev = tape.matmul(shift, u_hat)?;
    let angles = tape.block_angle(u, prev)?;
    let third = tape.constant(Tensor::filled(3, 1, 1.0 / 3.0))?;
    let ang = tape.matmul(angles, third)?;

    let d1 = tape.constant(first_difference_matrix(t))?;
    let vel = tape.matmul(d1, u_hat)?;
    let vel = tape.row_norm(vel)?;

    let d2 = tape.constant(second_difference_matrix(t))?;
    let acc = tape.matmul(d2, u_hat)?;
    let acc = tape.row_norm(acc)?;

    let ort = tape.gram_deviation(u_hat)?;
    let r = tape.concat_cols(&[ang, vel, acc, ort])?;
    Ok((u_hat, r))
}

/// FiLM modulation by the residuals (when given), mean pooling and a two-layer MLP.
pub fn film_classify(
    tape: &mut Tape,
    b: &Bound,
    x: Var,
    residuals: Option<Var>,
    d_model: usize,
) -> Result<Var> {
    let h = match residuals {
        Some(r) => {
            let gb = linear(tape, b, r, "cls.w_r", "cls.b_r")?;
            let gamma = tape.slice_cols(gb, 0, d_model)?;
            let beta = tape.slice_cols(gb, d_model, 2 * d_model)?;
            tape.film(x, gamma, beta)?
        }
        None => x,
    };
    let pooled = tape.mean_rows(h)?;
    let z = linear(tape, b, pooled, "cls.w1", "cls.b1")?;
    let z = tape.relu(z)?;
    linear(tape, b, z, "cls.w2", "cls.b2")
}

/// Records the full model on `tape`.
pub fn build_graph(
    tape: &mut Tape,
    b: &Bound,
    features: &Tensor,
    cfg: &ModelConfig,
    mut drop: Option<Dropout<'_>>,
) -> Result<Graph> {
    let x0 = gpe_encode(tape, b, features, cfg)?;
    let f = tape.constant(features.clone())?;
    let mut x = x0;
    let mut attention = Vec::with_capacity(cfg.layers);
    for m in 0..cfg.layers {
        let (out, maps) = gat_layer(tape, b, m, x, f, cfg, &mut drop)?;
        x = out;
        attention.push(maps);
    }
    let (u, u_hat, residuals) = if cfg.use_ema {
        let head_in = if cfg.head_on_input { x0 } else { x };
        let u = geometry_head(tape, b, head_in)?;
        let (u_hat, r) = ema_residuals(tape, u, cfg.ema_alpha)?;
        (Some(u), Some(u_hat), Some(r))
    } else {
        (None, None, None)
    };
    let logits = film_classify(tape, b, x, residuals, cfg.d_model)?;
    Ok(Graph {
        logits,
        embedding: x0,
        backbone: x,
        u,
        u_hat,
        residuals,
        attention,
    })
}
