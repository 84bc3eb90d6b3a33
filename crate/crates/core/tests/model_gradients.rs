use geovid::geometry::features::{build_sequence, Label, SequenceConfig};
use geovid::model::weights::classifier_trainable;
use geovid::model::{build_graph, feature_tensor, init_params, ModelConfig};
use geovid::numerics::{finite_difference_gradient, max_relative_error, ParamSet, Tape};
use geovid::synthworld::dataset::{generate_sample, DatasetConfig};
use std::time::Instant;

/// Central-difference step and the magnitude below which errors are measured absolutely.
const FD_STEP: f64 = 1e-5;
const GRAD_FLOOR: f64 = 1e-6;

fn small_config() -> ModelConfig {
    ModelConfig {
        d_model: 16,
        layers: 2,
        heads: 2,
        dropout: 0.0,
        ..ModelConfig::default()
    }
}

fn features(frames: usize, index: usize) -> Vec<[f64; 21]> {
    let cfg = DatasetConfig {
        n_real: 1,
        n_generated: 1,
        frames,
        ..Default::default()
    };
    let s = generate_sample(&cfg, index).unwrap();
    let frames: Vec<_> = s
        .frames
        .iter()
        .cloned()
        .zip(s.intrinsics.iter().copied())
        .collect();
    build_sequence(
        &s.id,
        &frames,
        s.label,
        &s.intrinsics[0],
        &SequenceConfig::default(),
    )
    .unwrap()
    .features
}

/// Cross-entropy of the generated class, built independently of the training code.
fn loss(
    params: &ParamSet,
    cfg: &ModelConfig,
    f: &[[f64; 21]],
    trainable: &[String],
) -> (f64, Option<geovid::numerics::Gradients>) {
    let mut tape = Tape::new();
    let b = params
        .bind(&mut tape, &|n| trainable.iter().any(|t| t == n))
        .unwrap();
    let x = feature_tensor(f).unwrap();
    let g = build_graph(&mut tape, &b, &x, cfg, None).unwrap();
    let ls = tape.log_softmax(g.logits).unwrap();
    let picked = tape.gather(ls, &[Label::Generated.class_index()]).unwrap();
    let nll = tape.scale(picked, -1.0).unwrap();
    let l = tape.sum(nll).unwrap();
    let v = tape.value(l).item().unwrap();
    tape.backward(l).unwrap();
    (v, Some(b.gradients(&tape)))
}

#[test]
fn full_model_gradient_matches_finite_differences() {
    let start = Instant::now();
    let cfg = small_config();
    for (seed, sample) in [(11, 1), (12, 0)] {
        let params = init_params(&cfg, seed);
        let f = features(8, sample);
        let names = classifier_trainable(&params, &cfg);
        let (_, analytic) = loss(&params, &cfg, &f, &names);
        let analytic = analytic.unwrap();
        let numeric =
            finite_difference_gradient(&params, &names, FD_STEP, |p| Ok(loss(p, &cfg, &f, &[]).0))
                .unwrap();
        let err = max_relative_error(&analytic, &numeric, GRAD_FLOOR);
        eprintln!("max rel err {err:e} in {:?}", start.elapsed());
        assert!(err < 1e-4, "max relative error {err}");
    }
    assert!(start.elapsed().as_secs() < 60);
}
