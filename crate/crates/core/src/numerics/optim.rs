use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::numerics::params::{Gradients, ParamSet};

/// AdamW with decoupled weight decay and optional global-norm clipping.
#[derive(Debug, Clone)]
pub struct AdamW {
    pub lr: f64,
    pub betas: (f64, f64),
    pub eps: f64,
    pub weight_decay: f64,
    pub max_grad_norm: Option<f64>,
    step: u64,
    first: BTreeMap<String, Vec<f64>>,
    second: BTreeMap<String, Vec<f64>>,
}

impl AdamW {
    pub fn new(lr: f64, weight_decay: f64) -> Self {
        AdamW {
            lr,
            betas: (0.9, 0.999),
            eps: 1e-8,
            weight_decay,
            max_grad_norm: Some(1.0),
            step: 0,
            first: BTreeMap::new(),
            second: BTreeMap::new(),
        }
    }

    pub fn with_betas(mut self, b1: f64, b2: f64) -> Self {
        self.betas = (b1, b2);
        self
    }

    pub fn with_clip(mut self, max_norm: Option<f64>) -> Self {
        self.max_grad_norm = max_norm;
        self
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Updates every parameter in `trainable`; each must have a gradient.
    ///
    /// Returns the global gradient norm before clipping.
    pub fn step(
        &mut self,
        params: &mut ParamSet,
        grads: &Gradients,
        trainable: &[String],
    ) -> Result<f64> {
        for name in trainable {
            if !grads.contains_key(name) {
                return Err(Error::MissingGrad(name.clone()));
            }
        }
        let norm = global_norm(trainable.iter().map(|n| &grads[n]));
        let clip = match self.max_grad_norm {
            Some(max) if norm > max => max / norm,
            _ => 1.0,
        };
        self.step += 1;
        let (b1, b2) = self.betas;
        let bc1 = 1.0 - b1.powi(self.step as i32);
        let bc2 = 1.0 - b2.powi(self.step as i32);
        for name in trainable {
            let g = grads[name].data();
            let p = params.get_mut(name)?;
            let len = p.len();
            if g.len() != len {
                return Err(Error::shape(
                    "adamw",
                    format!("grad of `{name}` has {} values, param {len}", g.len()),
                ));
            }
            let m = self
                .first
                .entry(name.clone())
                .or_insert_with(|| vec![0.0; len]);
            let v = self
                .second
                .entry(name.clone())
                .or_insert_with(|| vec![0.0; len]);
            for (i, w) in p.data_mut().iter_mut().enumerate() {
                let gi = g[i] * clip;
                m[i] = b1 * m[i] + (1.0 - b1) * gi;
                v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
                let mhat = m[i] / bc1;
                let vhat = v[i] / bc2;
                *w -= self.lr * self.weight_decay * *w;
                *w -= self.lr * mhat / (vhat.sqrt() + self.eps);
            }
        }
        Ok(norm)
    }
}

pub fn global_norm<'a>(grads: impl Iterator<Item = &'a crate::numerics::tensor::Tensor>) -> f64 {
    grads.map(|g| g.sq_norm()).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::tensor::Tensor;

    fn single(value: f64, grad: f64) -> (ParamSet, Gradients, Vec<String>) {
        let mut p = ParamSet::new();
        p.insert("p", Tensor::scalar(value));
        let mut g = Gradients::new();
        g.insert("p".into(), Tensor::scalar(grad));
        (p, g, vec!["p".into()])
    }

    #[test]
    fn zero_grad_no_decay_is_noop() {
        let (mut p, g, names) = single(1.5, 0.0);
        let mut opt = AdamW::new(0.1, 0.0);
        opt.step(&mut p, &g, &names).unwrap();
        assert_eq!(p.get("p").unwrap().data(), &[1.5]);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let (mut p, g, names) = single(2.0, 1.0);
        let mut opt = AdamW::new(0.1, 0.0).with_betas(0.9, 0.999);
        opt.step(&mut p, &g, &names).unwrap();
        // bias-corrected m = v = 1, so the step is lr / (1 + eps)
        let expected = 2.0 - 0.1 / (1.0 + 1e-8);
        assert!((p.get("p").unwrap().data()[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn clipping_scales_gradients() {
        let mut p = ParamSet::new();
        p.insert("a", Tensor::matrix(1, 2, vec![0.0, 0.0]).unwrap());
        let mut g = Gradients::new();
        g.insert("a".into(), Tensor::matrix(1, 2, vec![3.0, 4.0]).unwrap());
        let names = vec!["a".to_string()];
        let mut opt = AdamW::new(1.0, 0.0).with_clip(Some(1.0));
        let norm = opt.step(&mut p, &g, &names).unwrap();
        assert_eq!(norm, 5.0);
        // the first moment holds (1 - b1) * clipped grad
        let m = &opt.first["a"];
        assert!((m[0] - 0.1 * 0.6).abs() < 1e-15);
        assert!((m[1] - 0.1 * 0.8).abs() < 1e-15);
    }

    #[test]
    fn missing_grad_is_error() {
        let (mut p, _, names) = single(1.0, 0.0);
        let mut opt = AdamW::new(0.1, 0.0);
        let err = opt.step(&mut p, &Gradients::new(), &names).unwrap_err();
        assert!(matches!(err, Error::MissingGrad(n) if n == "p"));
    }
}
