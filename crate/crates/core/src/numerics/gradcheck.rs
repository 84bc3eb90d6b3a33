//! Central finite differences: the independent check for `Tape::backward`.

use crate::error::{Error, Result};
use crate::numerics::params::{Gradients, ParamSet};
use crate::numerics::tensor::Tensor;

/// Estimates `d f / d p` for every coordinate of the named parameters with
/// `(f(p + h) - f(p - h)) / 2h`.
pub fn finite_difference_gradient<F>(
    params: &ParamSet,
    names: &[String],
    h: f64,
    mut f: F,
) -> Result<Gradients>
where
    F: FnMut(&ParamSet) -> Result<f64>,
{
    if h <= 0.0 || !h.is_finite() {
        return Err(Error::InvalidArgument(format!("step must be > 0, got {h}")));
    }
    let mut work = params.clone();
    let mut out = Gradients::new();
    for name in names {
        let len = work.get(name)?.len();
        let shape = work.get(name)?.shape().to_vec();
        let mut grad = vec![0.0; len];
        for i in 0..len {
            let orig = work.get(name)?.data()[i];
            work.get_mut(name)?.data_mut()[i] = orig + h;
            let plus = f(&work)?;
            work.get_mut(name)?.data_mut()[i] = orig - h;
            let minus = f(&work)?;
            work.get_mut(name)?.data_mut()[i] = orig;
            let g = (plus - minus) / (2.0 * h);
            if !g.is_finite() {
                return Err(Error::NonFiniteValue("finite_difference_gradient"));
            }
            grad[i] = g;
        }
        out.insert(name.clone(), Tensor::new(shape, grad)?);
    }
    Ok(out)
}

/// Scalar convenience form.
pub fn finite_difference_scalar(x: f64, h: f64, f: impl Fn(f64) -> f64) -> Result<f64> {
    if h <= 0.0 {
        return Err(Error::InvalidArgument(format!("step must be > 0, got {h}")));
    }
    let g = (f(x + h) - f(x - h)) / (2.0 * h);
    if g.is_finite() {
        Ok(g)
    } else {
        Err(Error::NonFiniteValue("finite_difference_scalar"))
    }
}

/// Largest relative deviation between two gradient sets over the names of `reference`.
///
/// Each coordinate uses `|a - b| / max(|a|, |b|, floor)`; `floor` keeps
/// coordinates whose true gradient is ~0 from dividing round-off by round-off.
pub fn max_relative_error(analytic: &Gradients, reference: &Gradients, floor: f64) -> f64 {
    let mut worst: f64 = 0.0;
    for (name, r) in reference {
        let zeros;
        let a = match analytic.get(name) {
            Some(a) => a.data(),
            None => {
                zeros = vec![0.0; r.len()];
                &zeros
            }
        };
        for (x, y) in a.iter().zip(r.data()) {
            let denom = x.abs().max(y.abs()).max(floor);
            worst = worst.max((x - y).abs() / denom);
        }
    }
    worst
}
