//! Pinhole intrinsics, unprojection and cross-domain direction normalization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Mat3, Vec3};
use crate::scalar::Scalar;

/// Zero-skew pinhole intrinsics `K = [[fx, 0, cx], [0, fy, cy], [0, 0, 1]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics<T> {
    pub fx: T,
    pub fy: T,
    pub cx: T,
    pub cy: T,
}

impl<T: Scalar> Intrinsics<T> {
    pub fn new(fx: T, fy: T, cx: T, cy: T) -> Result<Self> {
        let k = Intrinsics { fx, fy, cx, cy };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.fx, self.fy, self.cx, self.cy]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.fx <= T::zero() || self.fy <= T::zero() {
            return Err(Error::InvalidIntrinsics(format!(
                "fx={:?} fy={:?} cx={:?} cy={:?}",
                self.fx, self.fy, self.cx, self.cy
            )));
        }
        Ok(())
    }

    pub fn matrix(&self) -> Mat3<T> {
        let (o, z) = (T::one(), T::zero());
        Mat3([[self.fx, z, self.cx], [z, self.fy, self.cy], [z, z, o]])
    }

    /// Closed-form `K^-1`.
    pub fn inverse_matrix(&self) -> Mat3<T> {
        let (o, z) = (T::one(), T::zero());
        Mat3([
            [o / self.fx, z, -self.cx / self.fx],
            [z, o / self.fy, -self.cy / self.fy],
            [z, z, o],
        ])
    }

    /// `dehomogenize(K v)`; `None` when `v` is parallel to the image plane.
    pub fn project(&self, v: &Vec3<T>) -> Option<[T; 2]> {
        if v.z().abs() <= T::epsilon() {
            return None;
        }
        Some([
            self.fx * v.x() / v.z() + self.cx,
            self.fy * v.y() / v.z() + self.cy,
        ])
    }

    /// Anisotropic rescale for a change of image resolution.
    pub fn rescale(&self, from: (T, T), to: (T, T)) -> Result<Self> {
        let positive = |v: T| v > T::zero() && v.is_finite();
        if !(positive(from.0) && positive(from.1) && positive(to.0) && positive(to.1)) {
            return Err(Error::ZeroDimension);
        }
        let sw = to.0 / from.0;
        let sh = to.1 / from.1;
        Intrinsics::new(self.fx * sw, self.fy * sh, self.cx * sw, self.cy * sh)
    }

    pub fn cast<U: Scalar>(&self) -> Intrinsics<U> {
        Intrinsics {
            fx: U::lit(self.fx.as_f64()),
            fy: U::lit(self.fy.as_f64()),
            cx: U::lit(self.cx.as_f64()),
            cy: U::lit(self.cy.as_f64()),
        }
    }
}

/// Unit ray direction of a homogeneous image point, sign-canonical.
pub fn unproject_homogeneous<T: Scalar>(p: &Vec3<T>, k: &Intrinsics<T>) -> Option<Vec3<T>> {
    k.inverse_matrix()
        .mul_vec(p)
        .normalized()
        .map(|d| d.sign_canonical())
}

/// `K^-1 [u, v, 1]^T`, unit length, largest-magnitude component positive.
pub fn unproject<T: Scalar>(p: [T; 2], k: &Intrinsics<T>) -> Vec3<T> {
    unproject_homogeneous(&Vec3::new(p[0], p[1], T::one()), k).expect("third coordinate is 1")
}

/// Re-expresses a per-frame observation in the reference camera: the calibrated
/// direction `K_t^-1 p` is mapped by `K_ref^-1 K_t`, then unit-normalized.
pub fn normalize_direction_real<T: Scalar>(
    p: [T; 2],
    k_t: &Intrinsics<T>,
    k_ref: &Intrinsics<T>,
) -> Vec3<T> {
    let hom = Vec3::new(p[0], p[1], T::one());
    let ray = k_t.inverse_matrix().mul_vec(&hom);
    let mapped = (k_ref.inverse_matrix() * k_t.matrix()).mul_vec(&ray);
    mapped
        .normalized()
        .expect("third coordinate stays 1")
        .sign_canonical()
}

/// Generated frames carry no per-frame calibration: unproject with the paired reference.
pub fn normalize_direction_gen<T: Scalar>(p: [T; 2], k_ref_gen: &Intrinsics<T>) -> Vec3<T> {
    unproject(p, k_ref_gen)
}

fn median<T: Scalar>(mut values: Vec<T>) -> T {
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite intrinsics"));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / T::lit(2.0)
    }
}

/// Componentwise median; even counts average the two middle values.
pub fn reference_intrinsics<T: Scalar>(per_frame: &[Intrinsics<T>]) -> Result<Intrinsics<T>> {
    if per_frame.is_empty() {
        return Err(Error::EmptyList);
    }
    for k in per_frame {
        k.validate()?;
    }
    Intrinsics::new(
        median(per_frame.iter().map(|k| k.fx).collect()),
        median(per_frame.iter().map(|k| k.fy).collect()),
        median(per_frame.iter().map(|k| k.cx).collect()),
        median(per_frame.iter().map(|k| k.cy).collect()),
    )
}
