//! EMA smoothing of per-frame direction triples and the four temporal residuals.
//!
//! The free functions here work on plain arrays and are generic over the
//! scalar; the `*_matrix` helpers express the same linear maps as constant
//! `T x T` operators for use on a tape.

use crate::linalg::{angle_between, Vec3};
use crate::numerics::Tensor;
use crate::scalar::Scalar;

/// Three directions of one frame.
pub type Directions<T> = [Vec3<T>; 3];

/// Number of residual channels: angular, velocity, acceleration, orthogonality.
pub const RESIDUAL_DIM: usize = 4;

/// `u_hat[0] = u[0]`, `u_hat[t] = alpha u[t] + (1 - alpha) u_hat[t - 1]`. No renormalization.
pub fn ema_smooth<T: Scalar>(u: &[Directions<T>], alpha: T) -> Vec<Directions<T>> {
    let mut out: Vec<Directions<T>> = Vec::with_capacity(u.len());
    for (t, frame) in u.iter().enumerate() {
        if t == 0 {
            out.push(*frame);
            continue;
        }
        let prev = out[t - 1];
        out.push(std::array::from_fn(|i| {
            frame[i].scale(alpha) + prev[i].scale(T::one() - alpha)
        }));
    }
    out
}

fn frobenius<T: Scalar>(d: &Directions<T>) -> T {
    (d[0].norm_sq() + d[1].norm_sq() + d[2].norm_sq()).sqrt()
}

/// `||U^T U - I||_F` with the three directions as the columns of `U`.
pub fn orthogonality_residual<T: Scalar>(d: &Directions<T>) -> T {
    let mut s = T::zero();
    for i in 0..3 {
        for j in 0..3 {
            let e = d[i].dot(&d[j]) - if i == j { T::one() } else { T::zero() };
            s = s + e * e;
        }
    }
    s.sqrt()
}

/// Per frame `[r_ang, r_vel, r_acc, r_ort]`.
pub fn residuals<T: Scalar>(
    u: &[Directions<T>],
    u_hat: &[Directions<T>],
) -> Vec<[T; RESIDUAL_DIM]> {
    let three = T::lit(3.0);
    (0..u.len())
        .map(|t| {
            let ang = if t == 0 {
                T::zero()
            } else {
                (0..3)
                    .map(|i| angle_between(&u[t][i], &u_hat[t - 1][i]))
                    .fold(T::zero(), |a, b| a + b)
                    / three
            };
            let vel = if t == 0 {
                T::zero()
            } else {
                frobenius(&std::array::from_fn(|i| u_hat[t][i] - u_hat[t - 1][i]))
            };
            let acc = if t < 2 {
                T::zero()
            } else {
                let two = T::lit(2.0);
                frobenius(&std::array::from_fn(|i| {
                    u_hat[t][i] - u_hat[t - 1][i].scale(two) + u_hat[t - 2][i]
                }))
            };
            [ang, vel, acc, orthogonality_residual(&u_hat[t])]
        })
        .collect()
}

/// Lower-triangular `L` with `L * U` equal to [`ema_smooth`] of the rows of `U`.
pub fn ema_matrix(t: usize, alpha: f64) -> Tensor {
    let mut m = Tensor::zeros(t, t);
    for r in 0..t {
        m.set(r, 0, (1.0 - alpha).powi(r as i32));
        for c in 1..=r {
            m.set(r, c, alpha * (1.0 - alpha).powi((r - c) as i32));
        }
    }
    m
}

/// Row `t` picks row `t - 1`; row 0 is zero.
pub fn shift_matrix(t: usize) -> Tensor {
    let mut m = Tensor::zeros(t, t);
    for r in 1..t {
        m.set(r, r - 1, 1.0);
    }
    m
}

/// Row `t` is `x_t - x_{t-1}`; row 0 is zero.
pub fn first_difference_matrix(t: usize) -> Tensor {
    let mut m = Tensor::zeros(t, t);
    for r in 1..t {
        m.set(r, r, 1.0);
        m.set(r, r - 1, -1.0);
    }
    m
}

/// Row `t` is `x_t - 2 x_{t-1} + x_{t-2}`; rows 0 and 1 are zero.
pub fn second_difference_matrix(t: usize) -> Tensor {
    let mut m = Tensor::zeros(t, t);
    for r in 2..t {
        m.set(r, r, 1.0);
        m.set(r, r - 1, -2.0);
        m.set(r, r - 2, 1.0);
    }
    m
}
