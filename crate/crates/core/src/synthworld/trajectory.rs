//! Smooth camera trajectories and rotational jitter.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Mat3, Vec3};

/// Camera poses over time. `rotations[t]` maps camera to world coordinates,
/// so world points map to the camera as `R^T (X - translation)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraTrajectory {
    pub rotations: Vec<Mat3<f64>>,
    pub translations: Vec<Vec3<f64>>,
    pub fps: f64,
}

impl CameraTrajectory {
    pub fn len(&self) -> usize {
        self.rotations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rotations.is_empty()
    }

    /// Geodesic angle between consecutive rotations, radians.
    pub fn step_angles(&self) -> Vec<f64> {
        self.rotations
            .windows(2)
            .map(|w| (w[0].transpose() * w[1]).rotation_angle())
            .collect()
    }

    pub fn mean_step_angle(&self) -> f64 {
        let a = self.step_angles();
        if a.is_empty() {
            0.0
        } else {
            a.iter().sum::<f64>() / a.len() as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryConfig {
    pub fps: f64,
    /// Bound on the angular speed of the smooth motion, degrees per second.
    pub max_angular_velocity_deg: f64,
    /// Bound on the translational speed, meters per second.
    pub max_speed: f64,
    /// Heading range, degrees about the vertical axis.
    pub yaw_deg: (f64, f64),
    /// Downward tilt range, degrees.
    pub pitch_deg: (f64, f64),
    /// Room extent `[x, y, z]` in meters; `y` points down.
    pub room: [f64; 3],
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        TrajectoryConfig {
            fps: 30.0,
            max_angular_velocity_deg: 10.0,
            max_speed: 0.3,
            yaw_deg: (22.0, 32.0),
            pitch_deg: (15.0, 30.0),
            room: [6.0, 3.0, 8.0],
        }
    }
}

/// Base orientation looking into the room, yawed and tilted downward.
pub fn look_rotation(yaw: f64, pitch: f64) -> Mat3<f64> {
    Mat3::rotation(Vec3::unit(1), yaw) * Mat3::rotation(Vec3::unit(0), -pitch)
}

struct Wave {
    amplitude: f64,
    omega: f64,
    phase: f64,
}

impl Wave {
    fn at(&self, t: f64) -> f64 {
        self.amplitude * ((self.omega * t + self.phase).sin() - self.phase.sin())
    }
}

/// Splits `budget` over `n` sinusoids with random frequencies so the summed peak
/// rates stay within the budget.
fn waves(rng: &mut ChaCha8Rng, n: usize, budget: f64) -> Vec<Wave> {
    let weights: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..1.0)).collect();
    let total: f64 = weights.iter().sum();
    weights
        .iter()
        .map(|w| {
            let omega = std::f64::consts::TAU * rng.random_range(0.05..0.3);
            let phase = rng.random_range(0.0..std::f64::consts::TAU);
            Wave {
                amplitude: budget * w / total / omega,
                omega,
                phase,
            }
        })
        .collect()
}

/// Smooth trajectory: yaw/pitch/roll offsets and a translation path built from
/// low-frequency sinusoids whose rates stay below the configured bounds.
pub fn generate_trajectory(
    seed: u64,
    frames: usize,
    cfg: &TrajectoryConfig,
) -> Result<CameraTrajectory> {
    if frames < 2 {
        return Err(Error::TooShort(frames));
    }
    if cfg.fps <= 0.0 || cfg.max_angular_velocity_deg < 0.0 || cfg.max_speed < 0.0 {
        return Err(Error::InvalidArgument(
            "trajectory rates must be nonnegative, fps positive".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let yaw = rng.random_range(cfg.yaw_deg.0..=cfg.yaw_deg.1).to_radians();
    let pitch = rng
        .random_range(cfg.pitch_deg.0..=cfg.pitch_deg.1)
        .to_radians();
    let base = look_rotation(yaw, pitch);
    let [rx, ry, rz] = cfg.room;
    let start = Vec3::new(
        rng.random_range(0.35..0.5) * rx,
        rng.random_range(0.4..0.6) * ry,
        rng.random_range(0.12..0.2) * rz,
    );

    // Angular speed of R_y(a) R_x(b) R_z(c) is at most |a'| + |b'| + |c'|.
    let ang = waves(&mut rng, 3, 0.9 * cfg.max_angular_velocity_deg.to_radians());
    // Translation speed is at most the sum of the per-axis rates.
    let lin = waves(&mut rng, 3, 0.9 * cfg.max_speed);

    let mut rotations = Vec::with_capacity(frames);
    let mut translations = Vec::with_capacity(frames);
    for f in 0..frames {
        let t = f as f64 / cfg.fps;
        let offset = Mat3::rotation(Vec3::unit(1), ang[0].at(t))
            * Mat3::rotation(Vec3::unit(0), ang[1].at(t))
            * Mat3::rotation(Vec3::unit(2), ang[2].at(t));
        rotations.push(base * offset);
        translations.push(start + Vec3::new(lin[0].at(t), lin[1].at(t), lin[2].at(t)));
    }
    Ok(CameraTrajectory {
        rotations,
        translations,
        fps: cfg.fps,
    })
}

/// Per-frame corruption knobs. Rotation and translation jitter apply to
/// generated-like samples; the rendering knobs apply to every sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JitterSpec {
    /// Random-walk increment per axis, degrees per frame.
    pub sigma_rot_deg: f64,
    /// Random-walk increment per axis, meters per frame.
    pub sigma_trans: f64,
    pub dropout: f64,
    /// Gaussian endpoint noise, pixels.
    pub sigma_px: f64,
    /// Fraction of the frame area covered by the masking rectangle.
    pub mask_ratio: f64,
}

impl Default for JitterSpec {
    fn default() -> Self {
        JitterSpec {
            sigma_rot_deg: 2.0,
            sigma_trans: 0.005,
            dropout: 0.05,
            sigma_px: 0.5,
            mask_ratio: 0.0,
        }
    }
}

impl JitterSpec {
    /// No corruption at all.
    pub fn clean() -> Self {
        JitterSpec {
            sigma_rot_deg: 0.0,
            sigma_trans: 0.0,
            dropout: 0.0,
            sigma_px: 0.0,
            mask_ratio: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let vals = [
            self.sigma_rot_deg,
            self.sigma_trans,
            self.dropout,
            self.sigma_px,
            self.mask_ratio,
        ];
        if vals.iter().any(|v| !v.is_finite() || *v < 0.0)
            || self.dropout > 1.0
            || self.mask_ratio > 1.0
        {
            return Err(Error::InvalidArgument(format!(
                "invalid jitter spec {self:?}"
            )));
        }
        Ok(())
    }
}

/// Composes every rotation with a random-walk perturbation `R_t Exp(w_t)`,
/// `w_t = w_{t-1} + N(0, sigma^2 I)`, and re-orthonormalizes.
pub fn apply_jitter(
    traj: &CameraTrajectory,
    spec: &JitterSpec,
    seed: u64,
) -> Result<CameraTrajectory> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = traj.clone();
    if spec.sigma_rot_deg > 0.0 {
        let normal = Normal::new(0.0, spec.sigma_rot_deg.to_radians()).expect("valid sigma");
        let mut w = Vec3::<f64>::zero();
        for r in out.rotations.iter_mut() {
            w = w + Vec3::new(
                normal.sample(&mut rng),
                normal.sample(&mut rng),
                normal.sample(&mut rng),
            );
            *r = (*r * Mat3::exp_so3(w)).orthonormalized();
        }
    }
    if spec.sigma_trans > 0.0 {
        let normal = Normal::new(0.0, spec.sigma_trans).expect("valid sigma");
        let mut d = Vec3::<f64>::zero();
        for p in out.translations.iter_mut() {
            d = d + Vec3::new(
                normal.sample(&mut rng),
                normal.sample(&mut rng),
                normal.sample(&mut rng),
            );
            *p = *p + d;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_velocity_gives_identical_poses() {
        let cfg = TrajectoryConfig {
            max_angular_velocity_deg: 0.0,
            max_speed: 0.0,
            ..Default::default()
        };
        let tr = generate_trajectory(3, 2, &cfg).unwrap();
        assert_eq!(tr.rotations[0], tr.rotations[1]);
        assert_eq!(tr.translations[0], tr.translations[1]);
    }

    #[test]
    fn deterministic() {
        let cfg = TrajectoryConfig::default();
        assert_eq!(
            generate_trajectory(9, 40, &cfg).unwrap(),
            generate_trajectory(9, 40, &cfg).unwrap()
        );
    }

    #[test]
    fn step_angle_bounded_by_max_velocity() {
        let cfg = TrajectoryConfig::default();
        for seed in 0..20 {
            let tr = generate_trajectory(seed, 60, &cfg).unwrap();
            let bound = (cfg.max_angular_velocity_deg / cfg.fps).to_radians();
            assert!(tr.step_angles().iter().all(|&a| a <= bound), "seed {seed}");
        }
    }

    #[test]
    fn zero_sigma_leaves_trajectory_unchanged() {
        let tr = generate_trajectory(1, 10, &TrajectoryConfig::default()).unwrap();
        let j = apply_jitter(&tr, &JitterSpec::clean(), 5).unwrap();
        assert_eq!(tr, j);
    }

    #[test]
    fn jittered_rotations_stay_orthonormal() {
        let tr = generate_trajectory(1, 40, &TrajectoryConfig::default()).unwrap();
        let j = apply_jitter(&tr, &JitterSpec::default(), 5).unwrap();
        for r in &j.rotations {
            assert!((r.transpose() * *r - Mat3::identity()).norm() < 1e-9);
            assert!((r.det() - 1.0).abs() < 1e-9);
        }
    }
}
