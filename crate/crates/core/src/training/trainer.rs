//! Geometry-head pretraining and classifier training loops.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::metrics::roc_auc;
use crate::geometry::features::{frame_seed, FeatureSequence, Label};
use crate::model::network::{build_graph, geometry_head, Dropout};
use crate::model::weights::{classifier_trainable, head_trainable, is_head_param};
use crate::model::{feature_tensor, Model, ModelConfig};
use crate::numerics::{AdamW, Gradients, ParamSet, Tape, Tensor};
use crate::training::config::{learning_rate, TrainConfig};
use crate::training::losses::{geometry_loss_on, smoothed_cross_entropy_on};

/// One line of the training history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_auc: Option<f64>,
    pub lr: f64,
}

#[derive(Debug, Clone)]
pub struct PretrainOutcome {
    /// Model with the trained head, marked frozen.
    pub model: Model,
    pub history: Vec<EpochRecord>,
    /// Mean per-sequence combined loss before the first and after the last update.
    pub initial_loss: f64,
    pub final_loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the best validation AUC (the last epoch without validation data).
    pub model: Model,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
}

fn accumulate(total: &mut Gradients, g: Gradients) {
    for (name, t) in g {
        match total.get_mut(&name) {
            Some(acc) => {
                for (a, b) in acc.data_mut().iter_mut().zip(t.data()) {
                    *a += b;
                }
            }
            None => {
                total.insert(name, t);
            }
        }
    }
}

fn scale_all(g: &mut Gradients, s: f64) {
    for t in g.values_mut() {
        for v in t.data_mut() {
            *v *= s;
        }
    }
}

fn epoch_order(n: usize, seed: u64, epoch: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(frame_seed(seed, epoch)));
    order
}

/// Runs `step` over shuffled mini-batches. `step` returns a sequence's loss and
/// gradients; the batch update uses their mean.
fn run_epoch<F>(
    n: usize,
    cfg: &TrainConfig,
    epoch: usize,
    params: &mut ParamSet,
    opt: &mut AdamW,
    trainable: &[String],
    step: F,
) -> Result<f64>
where
    F: Fn(&ParamSet, usize) -> Result<(f64, Gradients)> + Sync,
{
    let order = epoch_order(n, cfg.seed, epoch);
    let mut loss_sum = 0.0;
    for batch in order.chunks(cfg.batch_size) {
        let p: &ParamSet = params;
        let results: Vec<(f64, Gradients)> = batch
            .par_iter()
            .map(|&i| step(p, i))
            .collect::<Result<_>>()?;
        let mut total = Gradients::new();
        for (l, g) in results {
            loss_sum += l;
            accumulate(&mut total, g);
        }
        scale_all(&mut total, 1.0 / batch.len() as f64);
        for name in trainable {
            if !total.contains_key(name) {
                let shape = params.get(name)?.shape().to_vec();
                let len = params.get(name)?.len();
                total.insert(name.clone(), Tensor::new(shape, vec![0.0; len])?);
            }
        }
        opt.step(params, &total, trainable)?;
    }
    Ok(loss_sum / n as f64)
}

/// Backbone output the head reads, computed once: the backbone is frozen while pretraining.
fn head_inputs(model: &Model, data: &[FeatureSequence]) -> Result<Vec<Tensor>> {
    let cfg = ModelConfig {
        use_ema: true,
        ..model.config.clone()
    };
    data.par_iter()
        .map(|s| {
            let mut tape = Tape::new();
            let b = model.params.bind(&mut tape, &|_| false)?;
            let x = feature_tensor(&s.features)?;
            let g = build_graph(&mut tape, &b, &x, &cfg, None)?;
            let head_in = if cfg.head_on_input {
                g.embedding
            } else {
                g.backbone
            };
            Ok(tape.value(head_in).clone())
        })
        .collect()
}

fn head_loss(
    params: &ParamSet,
    input: &Tensor,
    seq: &FeatureSequence,
    cfg: &TrainConfig,
    grads: bool,
) -> Result<(f64, Gradients)> {
    let mut tape = Tape::new();
    let b = params.bind(&mut tape, &|n| grads && is_head_param(n))?;
    let x = tape.constant(input.clone())?;
    let u = geometry_head(&mut tape, &b, x)?;
    let l = geometry_loss_on(&mut tape, u, &seq.lines, &seq.k_ref, cfg.geometry_weights())?;
    let v = tape.value(l).item()?;
    if !grads {
        return Ok((v, Gradients::new()));
    }
    tape.backward(l)?;
    Ok((v, b.gradients(&tape)))
}

fn mean_head_loss(
    params: &ParamSet,
    inputs: &[Tensor],
    data: &[FeatureSequence],
    cfg: &TrainConfig,
) -> Result<f64> {
    let losses: Vec<f64> = inputs
        .par_iter()
        .zip(data)
        .map(|(x, s)| head_loss(params, x, s, cfg, false).map(|r| r.0))
        .collect::<Result<_>>()?;
    Ok(losses.iter().sum::<f64>() / data.len() as f64)
}

/// Trains only the geometry head on real sequences, with the randomly
/// initialized backbone held fixed. Dropout is not applied.
pub fn pretrain_geometry_head(
    data: &[FeatureSequence],
    model_cfg: &ModelConfig,
    cfg: &TrainConfig,
) -> Result<PretrainOutcome> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if let Some(s) = data.iter().find(|s| s.label != Label::Real) {
        return Err(Error::LabelError(format!(
            "pretraining needs real sequences, `{}` is {}",
            s.video_id,
            s.label.as_str()
        )));
    }
    cfg.validate()?;
    let mut model = Model::new(model_cfg.clone(), cfg.seed)?;
    let inputs = head_inputs(&model, data)?;
    let trainable = head_trainable(&model.params);
    let mut opt = AdamW::new(cfg.lr, cfg.weight_decay).with_clip(cfg.clip());
    let initial_loss = mean_head_loss(&model.params, &inputs, data, cfg)?;
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let lr = learning_rate(cfg, epoch);
        opt.lr = lr;
        let train_loss = run_epoch(
            data.len(),
            cfg,
            epoch,
            &mut model.params,
            &mut opt,
            &trainable,
            |p, i| head_loss(p, &inputs[i], &data[i], cfg, true),
        )?;
        history.push(EpochRecord {
            epoch,
            train_loss,
            val_auc: None,
            lr,
        });
    }
    let final_loss = mean_head_loss(&model.params, &inputs, data, cfg)?;
    model.freeze_head();
    Ok(PretrainOutcome {
        model,
        history,
        initial_loss,
        final_loss,
    })
}

/// Generated-class scores of every sequence, in order.
pub fn score_sequences(model: &Model, data: &[FeatureSequence]) -> Result<Vec<f64>> {
    data.par_iter()
        .map(|s| model.forward(&s.features).map(|o| o.score))
        .collect()
}

/// ROC AUC on `data`, or `None` when it lacks one of the classes.
pub fn validation_auc(model: &Model, data: &[FeatureSequence]) -> Result<Option<f64>> {
    let labels: Vec<bool> = data.iter().map(|s| s.label.is_positive()).collect();
    if !labels.iter().any(|&l| l) || labels.iter().all(|&l| l) {
        return Ok(None);
    }
    let scores = score_sequences(model, data)?;
    roc_auc(&scores, &labels).map(Some)
}

/// Trains everything but the frozen geometry head with label-smoothed cross-entropy.
///
/// `model` must come from [`pretrain_geometry_head`] (or a checkpoint of it);
/// its config, including ablation switches, is used as is.
pub fn train_classifier(
    train: &[FeatureSequence],
    val: &[FeatureSequence],
    model: &Model,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    if !model.head_frozen() {
        return Err(Error::FrozenHeadMissing);
    }
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    cfg.validate()?;
    let mut model = model.clone();
    let mcfg = model.config.clone();
    let trainable = classifier_trainable(&model.params, &mcfg);
    let mut opt = AdamW::new(cfg.lr, cfg.weight_decay).with_clip(cfg.clip());
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, ParamSet)> = None;
    for epoch in 0..cfg.epochs {
        let lr = learning_rate(cfg, epoch);
        opt.lr = lr;
        let epoch_seed = frame_seed(cfg.seed ^ 0xD0_0D, epoch);
        let train_loss = run_epoch(
            train.len(),
            cfg,
            epoch,
            &mut model.params,
            &mut opt,
            &trainable,
            |p, i| {
                let seq = &train[i];
                let mut tape = Tape::new();
                let b = p.bind(&mut tape, &|n| trainable.iter().any(|t| t == n))?;
                let x = feature_tensor(&seq.features)?;
                let mut rng = ChaCha8Rng::seed_from_u64(frame_seed(epoch_seed, i));
                let drop = Dropout {
                    rate: mcfg.dropout,
                    rng: &mut rng,
                };
                let g = build_graph(&mut tape, &b, &x, &mcfg, Some(drop))?;
                let l = smoothed_cross_entropy_on(
                    &mut tape,
                    g.logits,
                    seq.label.class_index(),
                    cfg.label_smoothing,
                )?;
                let v = tape.value(l).item()?;
                tape.backward(l)?;
                Ok((v, b.gradients(&tape)))
            },
        )?;
        let val_auc = validation_auc(&model, val)?;
        history.push(EpochRecord {
            epoch,
            train_loss,
            val_auc,
            lr,
        });
        if let Some(auc) = val_auc {
            if best.as_ref().is_none_or(|(b, _, _)| auc > *b) {
                best = Some((auc, epoch, model.params.clone()));
            }
        }
    }
    let best_epoch = match best {
        Some((_, epoch, params)) => {
            model.params = params;
            epoch
        }
        None => cfg.epochs - 1,
    };
    Ok(TrainOutcome {
        model,
        history,
        best_epoch,
    })
}
