//! End-to-end checks of the K-to-1 model: loss arithmetic, training,
//! prediction and a frozen forward pass.

use std::path::PathBuf;

use dinseg::autodiff::{Adam, NdArray, Tape};
use dinseg::data::synth_correlated_classes;
use dinseg::decomposition::{decompose, DecompositionMethod, LabelMap};
use dinseg::network::{argmax_channels, predict, train_step, KTo1Model, KTo1Spec, TrainItem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_image(rng: &mut ChaCha8Rng, dims: &[usize]) -> NdArray {
    let n: usize = dims.iter().product();
    let shape = std::iter::once(1).chain(dims.iter().copied()).collect();
    NdArray::new(shape, (0..n).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap()
}

fn random_label(rng: &mut ChaCha8Rng, dims: &[usize], k: u8) -> LabelMap {
    let n: usize = dims.iter().product();
    LabelMap::new(dims.to_vec(), (0..n).map(|_| rng.random_range(0..=k)).collect(), k).unwrap()
}

fn class_spec(k: u8, spatial: usize, depth: usize, base: usize) -> KTo1Spec {
    KTo1Spec::for_method(&DecompositionMethod::Class, k, spatial, depth, base, true).unwrap()
}

#[test]
fn uniform_predictions_give_log_class_counts() {
    let model = KTo1Model::zeroed(class_spec(2, 2, 1, 2)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let image = random_image(&mut rng, &[4, 4]);
    let label = random_label(&mut rng, &[4, 4], 2);
    let subs = decompose(&label, &DecompositionMethod::Class).unwrap();
    let b = model.composite_loss(&image, &label, &subs).unwrap();
    assert_eq!(b.lambda, 0.5);
    assert!((b.total - (3f64.ln() + 2f64.ln())).abs() < 1e-9, "{b:?}");
    assert!((b.main - 3f64.ln()).abs() < 1e-12);
    for s in &b.sub {
        assert!((s - 2f64.ln()).abs() < 1e-12);
    }
}

#[test]
fn total_matches_recomputed_terms() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut spec = class_spec(2, 2, 1, 2);
    spec.lambda = 0.37;
    let model = KTo1Model::build(spec, 2).unwrap();
    let image = random_image(&mut rng, &[8, 8]);
    let label = random_label(&mut rng, &[8, 8], 2);
    let subs = decompose(&label, &DecompositionMethod::Class).unwrap();
    let b = model.composite_loss(&image, &label, &subs).unwrap();

    // each term by hand from the forward probabilities
    let out = model.forward_all(&image).unwrap();
    let ce = |probs: &NdArray, target: &[u8]| {
        let n = probs.spatial_len();
        (0..n).map(|i| -probs.data()[usize::from(target[i]) * n + i].ln()).sum::<f64>() / n as f64
    };
    let main = ce(&out.final_probs, label.labels());
    let sub: Vec<f64> = out.stage1.iter().zip(&subs.sub_maps).map(|(p, s)| ce(p, s.labels())).collect();
    assert!((b.main - main).abs() < 1e-12);
    for (got, want) in b.sub.iter().zip(&sub) {
        assert!((got - want).abs() < 1e-12);
    }
    assert!((b.total - (main + 0.37 * sub.iter().sum::<f64>())).abs() < 1e-12);
}

#[test]
fn lambda_scales_the_sub_block_linearly() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let image = random_image(&mut rng, &[8, 8]);
    let label = random_label(&mut rng, &[8, 8], 2);
    let subs = decompose(&label, &DecompositionMethod::Class).unwrap();
    let at = |lambda: f64| {
        let mut spec = class_spec(2, 2, 1, 2);
        spec.lambda = lambda;
        KTo1Model::build(spec, 3).unwrap().composite_loss(&image, &label, &subs).unwrap()
    };
    let zero = at(0.0);
    assert_eq!(zero.total, zero.main);
    let (one, three) = (at(0.25), at(0.75));
    let block = |b: &dinseg::network::LossBreakdown| b.total - b.main;
    assert!((block(&three) - 3.0 * block(&one)).abs() < 1e-12);
}

#[test]
fn identical_identity_modules_give_equal_sub_losses() {
    let method = DecompositionMethod::Identity { copies: 2 };
    let spec = KTo1Spec::for_method(&method, 2, 2, 1, 2, true).unwrap();
    let mut model = KTo1Model::build(spec, 4).unwrap();
    let per_module = model.parameters().len() / 3;
    let first: Vec<_> = model.parameters()[..per_module].to_vec();
    model.parameters_mut()[per_module..2 * per_module].clone_from_slice(&first);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let image = random_image(&mut rng, &[8, 8]);
    let label = random_label(&mut rng, &[8, 8], 2);
    let subs = decompose(&label, &method).unwrap();
    let b = model.composite_loss(&image, &label, &subs).unwrap();
    assert_eq!(b.sub[0], b.sub[1]);
}

#[test]
fn overfits_one_batch() {
    let method = DecompositionMethod::Class;
    let mut model = KTo1Model::build(class_spec(2, 2, 1, 4), 6).unwrap();
    let data = synth_correlated_classes(2, &[24, 24], 6).unwrap();
    let batch: Vec<TrainItem> = data.iter().map(|s| TrainItem::new(s, &method).unwrap()).collect();
    let adam = Adam::default();
    let losses: Vec<f64> = (0..200)
        .map(|i| train_step(&mut model, &adam, &batch, 2e-3, i).unwrap().loss.total)
        .collect();
    for t in 0..losses.len() - 50 {
        assert!(losses[t + 50] < losses[t], "step {t}: {} then {}", losses[t], losses[t + 50]);
    }
}

#[test]
fn stitched_prediction_equals_whole_forward() {
    // with 1x1 kernels every output pixel depends only on its own 2x2 pool
    // block, so grid-aligned windows reproduce the whole-image pass
    let mut spec = class_spec(2, 2, 1, 3);
    for m in spec.stage1.iter_mut().chain(std::iter::once(&mut spec.integrator)) {
        m.kernel_size = 1;
    }
    let model = KTo1Model::build(spec, 7).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let image = random_image(&mut rng, &[16, 12]);
    let whole = argmax_channels(&model.forward_all(&image).unwrap().final_probs);
    let stitched = predict(&model, &image, &[8, 8], 4).unwrap();
    assert_eq!(stitched.labels(), whole.as_slice());
}

#[test]
fn outputs_are_distributions_in_3d() {
    let model = KTo1Model::build(class_spec(2, 3, 1, 2), 8).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let image = random_image(&mut rng, &[4, 4, 6]);
    let out = model.forward_all(&image).unwrap();
    assert_eq!(out.final_probs.shape(), &[3, 4, 4, 6]);
    for p in out.stage1.iter().chain(std::iter::once(&out.final_probs)) {
        let n = p.spatial_len();
        for i in 0..n {
            let s: f64 = (0..p.channels()).map(|c| p.data()[c * n + i]).sum();
            assert!((s - 1.0).abs() < 1e-9);
        }
    }
    assert!(model.forward_all(&random_image(&mut rng, &[4, 4, 5])).is_err());
}

#[test]
fn forward_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let image = random_image(&mut rng, &[8, 8]);
    let a = KTo1Model::build(class_spec(2, 2, 1, 2), 9).unwrap();
    let b = KTo1Model::build(class_spec(2, 2, 1, 2), 9).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.forward_all(&image).unwrap(), b.forward_all(&image).unwrap());
    let mut t = Tape::new();
    let vars = a.bind(&mut t);
    let x = t.input(image.clone());
    let f = a.forward_on(&mut t, &vars, x).unwrap();
    let p = t.softmax(f.final_logits);
    assert_eq!(t.value(p), &a.forward_all(&image).unwrap().final_probs);
}

fn golden_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/golden_forward.json")
}

/// Set `DINSEG_BLESS=1` to regenerate the frozen output.
#[test]
fn forward_matches_golden_file() {
    let model = KTo1Model::build(class_spec(2, 2, 2, 2), 2024).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let image = random_image(&mut rng, &[8, 8]);
    // stored as bit patterns so the comparison is exact
    let probs: Vec<u64> = model.forward_all(&image).unwrap().final_probs.data().iter().map(|v| v.to_bits()).collect();
    let path = golden_path();
    if std::env::var_os("DINSEG_BLESS").is_some() {
        std::fs::write(&path, serde_json::to_string(&probs).unwrap()).unwrap();
    }
    let frozen: Vec<u64> = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(probs, frozen);
}
