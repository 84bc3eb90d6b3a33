use geovid::geometry::camera::{reference_intrinsics, Intrinsics};
use geovid::geometry::features::{
    build_sequence, FeatureSequence, FrameRecord, Label, SequenceConfig,
};
use geovid::linalg::Vec3;
use geovid::model::network::geometry_head;
use geovid::model::weights::{classifier_trainable, head_trainable, is_head_param};
use geovid::model::{build_graph, feature_tensor, Directions, Model, ModelConfig};
use geovid::numerics::{finite_difference_gradient, max_relative_error, Tape, Tensor};
use geovid::synthworld::dataset::{generate_sample, DatasetConfig};
use geovid::training::losses::{
    geometry_loss_on, line_loss, line_loss_on, reprojection_loss, reprojection_loss_on,
    smoothed_cross_entropy_on, temporal_loss, temporal_loss_on, GeometryWeights,
};
use geovid::training::{
    learning_rate, pretrain_geometry_head, score_sequences, train_classifier, TrainConfig,
};
use geovid::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn tiny_model() -> ModelConfig {
    ModelConfig {
        d_model: 16,
        layers: 2,
        heads: 2,
        ffn_mult: 2,
        ..ModelConfig::default()
    }
}

fn sequences(n_real: usize, n_generated: usize, frames: usize, seed: u64) -> Vec<FeatureSequence> {
    let cfg = DatasetConfig {
        n_real,
        n_generated,
        frames,
        seed,
        ..Default::default()
    };
    (0..n_real + n_generated)
        .map(|i| {
            let s = generate_sample(&cfg, i).unwrap();
            let k_ref = reference_intrinsics(&s.intrinsics).unwrap();
            let frames: Vec<_> = s
                .frames
                .iter()
                .cloned()
                .zip(s.intrinsics.iter().copied())
                .collect();
            build_sequence(&s.id, &frames, s.label, &k_ref, &SequenceConfig::default()).unwrap()
        })
        .collect()
}

fn quick_pretrain(data: &[FeatureSequence]) -> Model {
    let reals: Vec<_> = data
        .iter()
        .filter(|s| s.label == Label::Real)
        .cloned()
        .collect();
    let cfg = TrainConfig {
        epochs: 2,
        batch_size: 4,
        ..TrainConfig::pretrain()
    };
    pretrain_geometry_head(&reals, &tiny_model(), &cfg)
        .unwrap()
        .model
}

fn k() -> Intrinsics<f64> {
    Intrinsics::new(500.0, 480.0, 320.0, 240.0).unwrap()
}

fn tilted_axes(seed: u64) -> Directions<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = geovid::linalg::Mat3::exp_so3(Vec3::new(
        rng.random_range(0.2..0.6),
        rng.random_range(0.2..0.6),
        rng.random_range(-0.3..0.3),
    ));
    [r.row(0), r.row(1), r.row(2)]
}

/// Records whose VPs are exactly the projections of `u`, with lines through them.
fn consistent_records(u: &[Directions<f64>], k: &Intrinsics<f64>) -> Vec<FrameRecord> {
    u.iter()
        .enumerate()
        .map(|(t, dirs)| {
            let mut vp2d = [[0.0; 2]; 3];
            let mut visible = [false; 3];
            let mut segments = Vec::new();
            let mut assignments = Vec::new();
            for i in 0..3 {
                if let Some(p) = k.project(&dirs[i]) {
                    vp2d[i] = p;
                    visible[i] = true;
                    for off in [[40.0, 10.0], [-25.0, 30.0]] {
                        segments.push([
                            p[0] + off[0],
                            p[1] + off[1],
                            p[0] + 3.0 * off[0],
                            p[1] + 3.0 * off[1],
                        ]);
                        assignments.push(i as i64);
                    }
                }
            }
            FrameRecord {
                frame: t,
                width: 640,
                height: 480,
                segments,
                assignments,
                vp2d,
                visible,
            }
        })
        .collect()
}

fn u_tensor(u: &[Directions<f64>]) -> Tensor {
    Tensor::matrix(
        u.len(),
        9,
        u.iter().flat_map(|d| d.iter().flat_map(|v| v.0)).collect(),
    )
    .unwrap()
}

#[test]
fn losses_vanish_at_their_minima() {
    let u: Vec<Directions<f64>> = vec![tilted_axes(1); 4];
    let recs = consistent_records(&u, &k());
    let vp: Vec<_> = recs.iter().map(|r| r.vp2d).collect();
    let vis: Vec<_> = recs.iter().map(|r| r.visible).collect();
    assert!(reprojection_loss(&u, &vp, &vis, &k()) < 1e-12);
    assert_eq!(temporal_loss(&u), 0.0);
    assert!(line_loss(&u, &recs, &k()) < 1e-9);
    assert_eq!(temporal_loss(&u[..1]), 0.0);
    let none = vec![[false; 3]; 4];
    assert_eq!(reprojection_loss(&u, &vp, &none, &k()), 0.0);
}

#[test]
fn point_line_distance_example() {
    let u = vec![[
        Vec3::new(3.0 / 500.0, 4.0 / 480.0, 1.0),
        Vec3::unit(1),
        Vec3::unit(0),
    ]];
    // vertical line x = 320 through the principal point: ell = (1, 0, -320)
    let rec = FrameRecord {
        frame: 0,
        width: 640,
        height: 480,
        segments: vec![[320.0, 10.0, 320.0, 400.0]],
        assignments: vec![0],
        vp2d: [[0.0; 2]; 3],
        visible: [false; 3],
    };
    assert!((line_loss(&u, &[rec], &k()) - 3.0).abs() < 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn tape_losses_match_plain_losses(seed in any::<u64>(), t in 1usize..6) {
        let truth: Vec<_> = (0..t).map(|i| tilted_axes(seed ^ i as u64)).collect();
        let recs = consistent_records(&truth, &k());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u: Vec<Directions<f64>> = truth
            .iter()
            .map(|d| d.map(|v| (v + Vec3::new(rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1))).normalized().unwrap()))
            .collect();
        let mut tape = Tape::new();
        let uv = tape.constant(u_tensor(&u)).unwrap();
        let r = reprojection_loss_on(&mut tape, uv, &recs, &k()).unwrap();
        let tl = temporal_loss_on(&mut tape, uv).unwrap();
        let l = line_loss_on(&mut tape, uv, &recs, &k()).unwrap();
        let vp: Vec<_> = recs.iter().map(|r| r.vp2d).collect();
        let vis: Vec<_> = recs.iter().map(|r| r.visible).collect();
        let plain = [reprojection_loss(&u, &vp, &vis, &k()), temporal_loss(&u), line_loss(&u, &recs, &k())];
        for (var, p) in [r, tl, l].into_iter().zip(plain) {
            let v = tape.value(var).item().unwrap();
            prop_assert!(v >= 0.0);
            prop_assert!((v - p).abs() <= 1e-9 * p.max(1.0), "{} vs {}", v, p);
        }
    }

    #[test]
    fn schedule_warms_up_then_decays(
        epochs in 1usize..150,
        warmup in 0usize..10,
        lr in 1e-6f64..1e-2,
    ) {
        let cfg = TrainConfig { epochs, warmup_epochs: warmup, lr, ..TrainConfig::classifier() };
        let rates: Vec<f64> = (0..epochs).map(|e| learning_rate(&cfg, e)).collect();
        let w = warmup.min(epochs);
        for e in 1..epochs {
            if e < w {
                prop_assert!(rates[e] >= rates[e - 1]);
            } else if e > w {
                prop_assert!(rates[e] <= rates[e - 1] + 1e-18);
            }
        }
        // warmup longer than the run is cut to the run length
        if w > 0 {
            prop_assert!((rates[0] - lr / w as f64).abs() <= 1e-15 * lr);
        }
        if epochs > warmup + 1 {
            prop_assert!(*rates.last().unwrap() <= 1e-2 * lr * (1.0 + 1e-12));
        }
        prop_assert!(rates.iter().all(|&r| r > 0.0 && r <= lr * (1.0 + 1e-12)));
    }
}

#[test]
fn head_gradient_matches_finite_differences_on_two_frames() {
    let data = sequences(1, 0, 2, 8);
    let seq = &data[0];
    let model = Model::new(tiny_model(), 2).unwrap();
    let input = {
        let mut tape = Tape::new();
        let b = model.params.bind(&mut tape, &|_| false).unwrap();
        let g = build_graph(
            &mut tape,
            &b,
            &feature_tensor(&seq.features).unwrap(),
            &model.config,
            None,
        )
        .unwrap();
        tape.value(g.backbone).clone()
    };
    let w = GeometryWeights {
        repj: 1.0,
        temp: 1.0,
        line: 1.0,
    };
    let loss = |p: &geovid::numerics::ParamSet, grads: bool| {
        let mut tape = Tape::new();
        let b = p.bind(&mut tape, &|n| grads && is_head_param(n))?;
        let x = tape.constant(input.clone())?;
        let u = geometry_head(&mut tape, &b, x)?;
        let l = geometry_loss_on(&mut tape, u, &seq.lines, &seq.k_ref, w)?;
        let v = tape.value(l).item()?;
        let g = if grads {
            tape.backward(l)?;
            b.gradients(&tape)
        } else {
            Default::default()
        };
        Ok::<_, Error>((v, g))
    };
    let analytic = loss(&model.params, true).unwrap().1;
    let names = head_trainable(&model.params);
    // the loss is in squared pixels, so a larger step keeps round-off down
    let reference =
        finite_difference_gradient(&model.params, &names, 1e-6, |p| loss(p, false).map(|r| r.0))
            .unwrap();
    let scale = reference
        .values()
        .flat_map(|t| t.data())
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let err = max_relative_error(&analytic, &reference, 1e-6 * scale);
    assert!(err < 1e-4, "relative error {err:e}");
}

#[test]
fn pretraining_rejects_generated_and_empty_input() {
    let data = sequences(1, 1, 4, 3);
    let cfg = TrainConfig {
        epochs: 1,
        ..TrainConfig::pretrain()
    };
    assert!(matches!(
        pretrain_geometry_head(&data, &tiny_model(), &cfg),
        Err(Error::LabelError(_))
    ));
    assert!(matches!(
        pretrain_geometry_head(&[], &tiny_model(), &cfg),
        Err(Error::EmptyDataset)
    ));
}

#[test]
fn pretraining_is_deterministic_and_freezes_head() {
    let data = sequences(4, 0, 6, 5);
    let cfg = TrainConfig {
        epochs: 3,
        batch_size: 2,
        ..TrainConfig::pretrain()
    };
    let a = pretrain_geometry_head(&data, &tiny_model(), &cfg).unwrap();
    let b = pretrain_geometry_head(&data, &tiny_model(), &cfg).unwrap();
    assert_eq!(a.final_loss, b.final_loss);
    assert_eq!(a.history, b.history);
    assert!(a.model.head_frozen());
    assert!(a.final_loss < a.initial_loss);
}

#[test]
fn classifier_needs_frozen_head() {
    let data = sequences(2, 2, 4, 6);
    let model = Model::new(tiny_model(), 0).unwrap();
    let cfg = TrainConfig {
        epochs: 1,
        ..TrainConfig::classifier()
    };
    assert!(matches!(
        train_classifier(&data, &[], &model, &cfg),
        Err(Error::FrozenHeadMissing)
    ));
}

#[test]
fn zero_learning_rate_changes_nothing() {
    let data = sequences(3, 3, 6, 7);
    let geo = quick_pretrain(&data);
    let cfg = TrainConfig {
        epochs: 2,
        lr: 0.0,
        batch_size: 4,
        ..TrainConfig::classifier()
    };
    let out = train_classifier(&data, &[], &geo, &cfg).unwrap();
    assert_eq!(out.model.params, geo.params);
}

#[test]
fn frozen_head_gets_no_gradient_and_stays_put() {
    let data = sequences(3, 3, 6, 9);
    let geo = quick_pretrain(&data);
    let trainable = classifier_trainable(&geo.params, &geo.config);
    assert!(trainable.iter().all(|n| !is_head_param(n)));

    let seq = &data[0];
    let mut tape = Tape::new();
    let b = geo
        .params
        .bind(&mut tape, &|n| trainable.iter().any(|t| t == n))
        .unwrap();
    let g = build_graph(
        &mut tape,
        &b,
        &feature_tensor(&seq.features).unwrap(),
        &geo.config,
        None,
    )
    .unwrap();
    let l = smoothed_cross_entropy_on(&mut tape, g.logits, 1, 0.02).unwrap();
    tape.backward(l).unwrap();
    let grads = b.gradients(&tape);
    assert!(grads.keys().all(|n| !is_head_param(n)));
    assert!(grads.contains_key("cls.w_r"));

    let cfg = TrainConfig {
        epochs: 3,
        batch_size: 2,
        ..TrainConfig::classifier()
    };
    let out = train_classifier(&data, &data, &geo, &cfg).unwrap();
    for name in head_trainable(&geo.params) {
        assert_eq!(
            out.model.params.get(&name).unwrap(),
            geo.params.get(&name).unwrap(),
            "{name}"
        );
    }
    assert_ne!(out.model.params, geo.params);
}

#[test]
fn eight_sequences_can_be_memorized() {
    let data = sequences(4, 4, 8, 21);
    let geo = quick_pretrain(&data);
    let cfg = TrainConfig {
        epochs: 200,
        batch_size: 8,
        lr: 1e-3,
        warmup_epochs: 5,
        ..TrainConfig::classifier()
    };
    let out = train_classifier(&data, &[], &geo, &cfg).unwrap();
    let scores = score_sequences(&out.model, &data).unwrap();
    let correct = data
        .iter()
        .zip(&scores)
        .filter(|(s, &p)| (p >= 0.5) == s.label.is_positive())
        .count();
    assert_eq!(correct, 8, "scores {scores:?}");
}

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    let data = sequences(2, 2, 6, 13);
    let geo = quick_pretrain(&data);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    geo.save(&path).unwrap();
    let back = Model::load(&path).unwrap();
    assert_eq!(back, geo);
    for s in &data {
        assert_eq!(
            back.forward(&s.features).unwrap(),
            geo.forward(&s.features).unwrap()
        );
    }
}

#[test]
fn corrupted_checkpoints_are_rejected() {
    let geo = Model::new(tiny_model(), 1).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    geo.save(&path).unwrap();
    let mut json: serde_json::Value =
        serde_json::from_slice(&std::fs::read(&path).unwrap()).unwrap();
    json["params"].as_object_mut().unwrap().remove("cls.b2");
    std::fs::write(&path, serde_json::to_vec(&json).unwrap()).unwrap();
    assert!(matches!(Model::load(&path), Err(Error::Checkpoint(_))));
}
