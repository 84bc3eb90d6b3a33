use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use geovid::geometry::camera::Intrinsics;
use geovid::synthworld::dataset::{generate_sample, make_dataset, DatasetConfig};
use geovid::synthworld::render::{render_line_segments, Scene, SceneSpec};
use geovid::synthworld::trajectory::{
    apply_jitter, generate_trajectory, JitterSpec, TrajectoryConfig,
};
use proptest::prelude::*;

fn tree_bytes(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn small_config(seed: u64) -> DatasetConfig {
    DatasetConfig {
        n_real: 4,
        n_generated: 4,
        frames: 6,
        seed,
        ..Default::default()
    }
}

#[test]
fn same_seed_gives_identical_files() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    make_dataset(a.path(), &small_config(11)).unwrap();
    make_dataset(b.path(), &small_config(11)).unwrap();
    let (ta, tb) = (tree_bytes(a.path()), tree_bytes(b.path()));
    assert_eq!(ta.len(), 1 + 8 * 3);
    assert_eq!(ta, tb);

    let c = tempfile::tempdir().unwrap();
    make_dataset(c.path(), &small_config(12)).unwrap();
    assert_ne!(ta, tree_bytes(c.path()));
}

#[test]
fn rotational_jitter_doubles_step_angles() {
    let cfg = TrajectoryConfig::default();
    let spec = JitterSpec {
        sigma_rot_deg: 2.0,
        ..JitterSpec::clean()
    };
    let (mut clean, mut jittered) = (0.0, 0.0);
    for seed in 0..20 {
        let t = generate_trajectory(seed, 40, &cfg).unwrap();
        clean += t.mean_step_angle();
        jittered += apply_jitter(&t, &spec, seed + 1000)
            .unwrap()
            .mean_step_angle();
    }
    assert!(jittered >= 2.0 * clean, "{jittered} vs {clean}");
}

#[test]
fn generated_ground_truth_moves_faster() {
    let cfg = DatasetConfig {
        n_real: 20,
        n_generated: 20,
        frames: 20,
        ..Default::default()
    };
    let speeds = |range: std::ops::Range<usize>| {
        let mut v: Vec<f64> = range
            .flat_map(|i| {
                let s = generate_sample(&cfg, i).unwrap();
                s.gt_directions
                    .windows(2)
                    .map(|w| {
                        (0..3)
                            .map(|a| w[0][a].dot(&w[1][a]).abs().min(1.0).acos())
                            .sum::<f64>()
                            / 3.0
                    })
                    .collect::<Vec<_>>()
            })
            .collect();
        v.sort_by(f64::total_cmp);
        v
    };
    let real = speeds(0..20);
    let generated = speeds(20..40);
    for q in [0.1, 0.25, 0.5, 0.75, 0.9] {
        let at = |v: &[f64]| v[((v.len() - 1) as f64 * q) as usize];
        assert!(at(&generated) > at(&real), "quantile {q}");
    }
}

fn removed_fraction(ratio: f64, samples: u64) -> f64 {
    let k = Intrinsics::new(500.0, 500.0, 320.0, 240.0).unwrap();
    let spec = JitterSpec {
        mask_ratio: ratio,
        ..JitterSpec::clean()
    };
    let mut fractions = Vec::new();
    for seed in 0..samples {
        let scene = Scene::build(&SceneSpec {
            seed,
            ..SceneSpec::default()
        })
        .unwrap();
        let traj = generate_trajectory(seed, 10, &TrajectoryConfig::default()).unwrap();
        for t in 0..traj.len() {
            let render = |s: &JitterSpec| {
                render_line_segments(
                    &scene,
                    &traj.rotations[t],
                    &traj.translations[t],
                    &k,
                    (640, 480),
                    s,
                    t,
                    seed * 100 + t as u64,
                )
                .unwrap()
                .lines
                .segments
                .len()
            };
            let full = render(&JitterSpec::clean());
            let kept = render(&spec);
            if full > 0 {
                fractions.push(1.0 - kept as f64 / full as f64);
            }
        }
    }
    fractions.iter().sum::<f64>() / fractions.len() as f64
}

#[test]
fn block_mask_removes_about_its_area() {
    for r in [0.2, 0.4, 0.6] {
        let f = removed_fraction(r, 10);
        assert!((f - r).abs() <= 0.15, "ratio {r}: removed {f}");
    }
    assert_eq!(removed_fraction(0.0, 2), 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn ground_truth_is_orthonormal(seed in any::<u64>(), index in 0usize..2) {
        let cfg = DatasetConfig { n_real: 1, n_generated: 1, frames: 5, seed, ..Default::default() };
        let s = generate_sample(&cfg, index).unwrap();
        for d in &s.gt_directions {
            for i in 0..3 {
                prop_assert!((d[i].norm() - 1.0).abs() <= 1e-12);
                for j in i + 1..3 {
                    prop_assert!(d[i].dot(&d[j]).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn samples_depend_only_on_seed_and_index(seed in any::<u64>(), index in 0usize..2) {
        let cfg = DatasetConfig { n_real: 1, n_generated: 1, frames: 4, seed, ..Default::default() };
        prop_assert_eq!(generate_sample(&cfg, index).unwrap(), generate_sample(&cfg, index).unwrap());
    }
}
