//! Fixed-size 3-vector and 3x3 matrix helpers.

use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize, serde::Deserialize)]
pub struct Vec3<T>(pub [T; 3]);

impl<T: Scalar> Vec3<T> {
    pub fn new(x: T, y: T, z: T) -> Self {
        Vec3([x, y, z])
    }

    pub fn zero() -> Self {
        Vec3([T::zero(); 3])
    }

    pub fn unit(axis: usize) -> Self {
        let mut v = Self::zero();
        v.0[axis] = T::one();
        v
    }

    pub fn x(&self) -> T {
        self.0[0]
    }
    pub fn y(&self) -> T {
        self.0[1]
    }
    pub fn z(&self) -> T {
        self.0[2]
    }

    pub fn dot(&self, o: &Self) -> T {
        self.0[0] * o.0[0] + self.0[1] * o.0[1] + self.0[2] * o.0[2]
    }

    pub fn cross(&self, o: &Self) -> Self {
        let [a1, a2, a3] = self.0;
        let [b1, b2, b3] = o.0;
        Vec3([a2 * b3 - a3 * b2, a3 * b1 - a1 * b3, a1 * b2 - a2 * b1])
    }

    pub fn norm_sq(&self) -> T {
        self.dot(self)
    }

    pub fn norm(&self) -> T {
        self.norm_sq().sqrt()
    }

    pub fn scale(&self, s: T) -> Self {
        Vec3([self.0[0] * s, self.0[1] * s, self.0[2] * s])
    }

    /// Unit vector in the same direction; `None` for the zero vector.
    pub fn normalized(&self) -> Option<Self> {
        let n = self.norm();
        if n > T::zero() && n.is_finite() {
            Some(self.scale(T::one() / n))
        } else {
            None
        }
    }

    /// Flips the sign so the largest-magnitude component is positive.
    pub fn sign_canonical(&self) -> Self {
        let idx = self.argmax_abs();
        if self.0[idx] < T::zero() {
            -*self
        } else {
            *self
        }
    }

    pub fn argmax_abs(&self) -> usize {
        let mut best = 0;
        for i in 1..3 {
            if self.0[i].abs() > self.0[best].abs() {
                best = i;
            }
        }
        best
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn cast<U: Scalar>(&self) -> Vec3<U> {
        Vec3(self.0.map(|v| U::lit(v.as_f64())))
    }
}

/// Angle between two directions, ignoring sign (in `[0, pi/2]`).
pub fn axis_angle_between<T: Scalar>(a: &Vec3<T>, b: &Vec3<T>) -> T {
    let c = a.cross(b).norm();
    let d = a.dot(b).abs();
    c.atan2(d)
}

/// Signed angle between two vectors (in `[0, pi]`).
pub fn angle_between<T: Scalar>(a: &Vec3<T>, b: &Vec3<T>) -> T {
    a.cross(b).norm().atan2(a.dot(b))
}

impl<T: Scalar> Add for Vec3<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Vec3([self.0[0] + o.0[0], self.0[1] + o.0[1], self.0[2] + o.0[2]])
    }
}

impl<T: Scalar> Sub for Vec3<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Vec3([self.0[0] - o.0[0], self.0[1] - o.0[1], self.0[2] - o.0[2]])
    }
}

impl<T: Scalar> Neg for Vec3<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Vec3(self.0.map(|v| -v))
    }
}

impl<T> Index<usize> for Vec3<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        &self.0[i]
    }
}

impl<T> IndexMut<usize> for Vec3<T> {
    fn index_mut(&mut self, i: usize) -> &mut T {
        &mut self.0[i]
    }
}

/// Row-major 3x3 matrix.
#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize, serde::Deserialize)]
pub struct Mat3<T>(pub [[T; 3]; 3]);

impl<T: Scalar> Mat3<T> {
    pub fn zero() -> Self {
        Mat3([[T::zero(); 3]; 3])
    }

    pub fn identity() -> Self {
        let mut m = Self::zero();
        for i in 0..3 {
            m.0[i][i] = T::one();
        }
        m
    }

    pub fn from_cols(c0: Vec3<T>, c1: Vec3<T>, c2: Vec3<T>) -> Self {
        let mut m = Self::zero();
        for r in 0..3 {
            m.0[r] = [c0.0[r], c1.0[r], c2.0[r]];
        }
        m
    }

    pub fn col(&self, c: usize) -> Vec3<T> {
        Vec3([self.0[0][c], self.0[1][c], self.0[2][c]])
    }

    pub fn row(&self, r: usize) -> Vec3<T> {
        Vec3(self.0[r])
    }

    pub fn set_col(&mut self, c: usize, v: Vec3<T>) {
        for r in 0..3 {
            self.0[r][c] = v.0[r];
        }
    }

    pub fn transpose(&self) -> Self {
        let mut m = Self::zero();
        for r in 0..3 {
            for c in 0..3 {
                m.0[c][r] = self.0[r][c];
            }
        }
        m
    }

    pub fn mul_vec(&self, v: &Vec3<T>) -> Vec3<T> {
        Vec3([self.row(0).dot(v), self.row(1).dot(v), self.row(2).dot(v)])
    }

    pub fn det(&self) -> T {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Inverse via the adjugate; `None` when singular.
    pub fn inverse(&self) -> Option<Self> {
        let det = self.det();
        if det == T::zero() || !det.is_finite() {
            return None;
        }
        let m = &self.0;
        let inv_det = T::one() / det;
        let mut out = Self::zero();
        for r in 0..3 {
            for c in 0..3 {
                let (r1, r2) = ((c + 1) % 3, (c + 2) % 3);
                let (c1, c2) = ((r + 1) % 3, (r + 2) % 3);
                out.0[r][c] = (m[r1][c1] * m[r2][c2] - m[r1][c2] * m[r2][c1]) * inv_det;
            }
        }
        Some(out)
    }

    pub fn scale(&self, s: T) -> Self {
        Mat3(self.0.map(|row| row.map(|v| v * s)))
    }

    /// Frobenius norm.
    pub fn norm(&self) -> T {
        self.0
            .iter()
            .flat_map(|r| r.iter())
            .fold(T::zero(), |acc, &v| acc + v * v)
            .sqrt()
    }

    /// Rotation about a unit axis by `angle` radians (Rodrigues).
    pub fn rotation(axis: Vec3<T>, angle: T) -> Self {
        let Some(k) = axis.normalized() else {
            return Self::identity();
        };
        let (s, c) = angle.sin_cos();
        let t = T::one() - c;
        let [x, y, z] = k.0;
        Mat3([
            [t * x * x + c, t * x * y - s * z, t * x * z + s * y],
            [t * x * y + s * z, t * y * y + c, t * y * z - s * x],
            [t * x * z - s * y, t * y * z + s * x, t * z * z + c],
        ])
    }

    /// Rotation `exp([w]x)` for a rotation vector `w`.
    pub fn exp_so3(w: Vec3<T>) -> Self {
        let angle = w.norm();
        if angle == T::zero() {
            Self::identity()
        } else {
            Self::rotation(w, angle)
        }
    }

    /// Geodesic rotation angle of a rotation matrix.
    pub fn rotation_angle(&self) -> T {
        let tr = self.0[0][0] + self.0[1][1] + self.0[2][2];
        let c = ((tr - T::one()) / T::lit(2.0)).max(-T::one()).min(T::one());
        c.acos()
    }

    /// Nearest rotation by Gram-Schmidt on the columns, keeping the first column's direction.
    pub fn orthonormalized(&self) -> Self {
        let c0 = self.col(0).normalized().unwrap_or(Vec3::unit(0));
        let c1 = self.col(1);
        let c1 = (c1 - c0.scale(c0.dot(&c1)))
            .normalized()
            .unwrap_or(Vec3::unit(1));
        let c2 = c0.cross(&c1);
        Self::from_cols(c0, c1, c2)
    }
}

impl<T: Scalar> Mul for Mat3<T> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let mut m = Self::zero();
        for r in 0..3 {
            for c in 0..3 {
                let mut acc = T::zero();
                for k in 0..3 {
                    acc = acc + self.0[r][k] * o.0[k][c];
                }
                m.0[r][c] = acc;
            }
        }
        m
    }
}

impl<T: Scalar> Sub for Mat3<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        let mut m = self;
        for r in 0..3 {
            for c in 0..3 {
                m.0[r][c] = m.0[r][c] - o.0[r][c];
            }
        }
        m
    }
}

/// Eigen-decomposition of a symmetric 3x3 matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues ascending and the matching unit eigenvectors.
pub fn symmetric_eigen<T: Scalar>(m: &Mat3<T>) -> ([T; 3], [Vec3<T>; 3]) {
    let mut a = *m;
    let mut v = Mat3::<T>::identity();
    for _sweep in 0..50 {
        let off = a.0[0][1].abs() + a.0[0][2].abs() + a.0[1][2].abs();
        if off <= T::epsilon() * T::lit(1e-3) * (a.norm() + T::min_positive_value()) {
            break;
        }
        for (p, q) in [(0usize, 1usize), (0, 2), (1, 2)] {
            let apq = a.0[p][q];
            if apq == T::zero() {
                continue;
            }
            let theta = (a.0[q][q] - a.0[p][p]) / (T::lit(2.0) * apq);
            let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
            let c = T::one() / (t * t + T::one()).sqrt();
            let s = t * c;
            let mut rot = Mat3::<T>::identity();
            rot.0[p][p] = c;
            rot.0[q][q] = c;
            rot.0[p][q] = s;
            rot.0[q][p] = -s;
            a = rot.transpose() * a * rot;
            v = v * rot;
        }
    }
    let mut idx = [0usize, 1, 2];
    idx.sort_by(|&i, &j| {
        a.0[i][i]
            .partial_cmp(&a.0[j][j])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let vals = idx.map(|i| a.0[i][i]);
    let vecs = idx.map(|i| v.col(i));
    (vals, vecs)
}
