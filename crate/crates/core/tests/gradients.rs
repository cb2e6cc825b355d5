//! Finite-difference checks of every differentiable op and of small
//! composite networks.

use dinseg::autodiff::{grad_check, NdArray, Objective, Padding, Parameter, Tape, Var};
use dinseg::decomposition::{decompose, DecompositionMethod, LabelMap};
use dinseg::network::{BatchObjective, KTo1Model, KTo1Spec, TrainItem};
use dinseg::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const H: f64 = 1e-5;
const SEEDS: u64 = 100;

/// Parameters plus a closure building a scalar loss from their vars.
struct OpCheck<F> {
    params: Vec<Parameter>,
    build: F,
}

impl<F: Fn(&mut Tape, &[Var]) -> Result<Var>> Objective for OpCheck<F> {
    fn parameters(&self) -> &[Parameter] {
        &self.params
    }

    fn parameters_mut(&mut self) -> &mut [Parameter] {
        &mut self.params
    }

    fn build_loss(&self, tape: &mut Tape) -> Result<Var> {
        let vars: Vec<Var> = self.params.iter().enumerate().map(|(i, p)| tape.param(i, p)).collect();
        (self.build)(tape, &vars)
    }
}

fn uniform(rng: &mut ChaCha8Rng, shape: &[usize]) -> NdArray {
    let n = shape.iter().product();
    NdArray::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

/// Values with magnitude in [0.1, 1), so relu kinks are never crossed.
fn away_from_zero(rng: &mut ChaCha8Rng, shape: &[usize]) -> NdArray {
    let n = shape.iter().product();
    let data = (0..n)
        .map(|_| {
            let m = rng.random_range(0.1..1.0);
            if rng.random_bool(0.5) {
                m
            } else {
                -m
            }
        })
        .collect();
    NdArray::new(shape.to_vec(), data).unwrap()
}

fn targets(rng: &mut ChaCha8Rng, n: usize, classes: u8) -> Vec<u8> {
    (0..n).map(|_| rng.random_range(0..classes)).collect()
}

fn max_error<F: Fn(&mut Tape, &[Var]) -> Result<Var>>(params: Vec<Parameter>, build: F, seed: u64) -> f64 {
    let mut check = OpCheck { params, build };
    grad_check(&mut check, H, usize::MAX, seed).unwrap().max_relative_error
}

fn param(a: NdArray) -> Parameter {
    Parameter::new(a)
}

#[test]
fn conv_2d_and_3d_over_seeds() {
    for seed in 0..SEEDS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let three_d = seed % 2 == 1;
        let (x_shape, k_shape): (Vec<usize>, Vec<usize>) = if three_d {
            (vec![2, 3, 4, 3], vec![2, 2, 3, 3, 3])
        } else {
            (vec![2, 5, 4], vec![2, 2, 3, 3])
        };
        let padding = if seed % 4 < 2 { Padding::Same } else { Padding::Valid };
        let params = vec![
            param(uniform(&mut rng, &x_shape)),
            param(uniform(&mut rng, &k_shape)),
            param(uniform(&mut rng, &[2])),
        ];
        let out_len = {
            let mut t = Tape::new();
            let v: Vec<Var> = params.iter().enumerate().map(|(i, p)| t.param(i, p)).collect();
            let y = t.conv(v[0], v[1], v[2], padding).unwrap();
            t.value(y).spatial_len()
        };
        let tg = targets(&mut rng, out_len, 2);
        let err = max_error(
            params,
            move |t: &mut Tape, v: &[Var]| {
                let y = t.conv(v[0], v[1], v[2], padding)?;
                t.cross_entropy(y, &tg)
            },
            seed,
        );
        assert!(err < 1e-4, "seed {seed}: {err}");
    }
}

#[test]
fn conv_single_channel_tight() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let params = vec![
        param(uniform(&mut rng, &[1, 3, 3])),
        param(uniform(&mut rng, &[1, 1, 3, 3])),
        param(uniform(&mut rng, &[1])),
    ];
    let err = max_error(
        params,
        |t: &mut Tape, v: &[Var]| {
            let y = t.conv(v[0], v[1], v[2], Padding::Same)?;
            Ok(t.sum(y))
        },
        0,
    );
    assert!(err < 1e-6, "{err}");
}

#[test]
fn relu_over_seeds() {
    for seed in 0..SEEDS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = away_from_zero(&mut rng, &[2, 4, 4]);
        let tg = targets(&mut rng, 16, 2);
        let err = max_error(
            vec![param(x)],
            move |t: &mut Tape, v: &[Var]| {
                let y = t.relu(v[0]);
                t.cross_entropy(y, &tg)
            },
            seed,
        );
        assert!(err < 1e-6, "seed {seed}: {err}");
    }
}

#[test]
fn downsample_and_upsample_over_seeds() {
    for seed in 0..SEEDS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let three_d = seed % 2 == 1;
        let shape: Vec<usize> = if three_d { vec![2, 4, 4, 4] } else { vec![2, 4, 4] };
        let spatial: usize = shape[1..].iter().product();
        let down_t = targets(&mut rng, spatial >> shape[1..].len(), 2);
        let up_t = targets(&mut rng, spatial << shape[1..].len(), 2);
        let x = uniform(&mut rng, &shape);
        let err = max_error(
            vec![param(x.clone())],
            move |t: &mut Tape, v: &[Var]| {
                let y = t.downsample2(v[0])?;
                t.cross_entropy(y, &down_t)
            },
            seed,
        );
        assert!(err < 1e-6, "downsample seed {seed}: {err}");
        let err = max_error(
            vec![param(x)],
            move |t: &mut Tape, v: &[Var]| {
                let y = t.upsample2(v[0])?;
                t.cross_entropy(y, &up_t)
            },
            seed,
        );
        assert!(err < 1e-4, "upsample seed {seed}: {err}");
    }
}

#[test]
fn concat_softmax_add_scale_over_seeds() {
    for seed in 0..SEEDS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = uniform(&mut rng, &[1, 3, 3]);
        let b = uniform(&mut rng, &[2, 3, 3]);
        let c = uniform(&mut rng, &[3, 3, 3]);
        let tg = targets(&mut rng, 9, 3);
        let err = max_error(
            vec![param(a), param(b), param(c)],
            move |t: &mut Tape, v: &[Var]| {
                let joined = t.channel_concat(&[v[0], v[1]])?;
                let p = t.softmax(joined);
                let s = t.scale(v[2], 0.7);
                let mixed = t.add(p, s)?;
                t.cross_entropy(mixed, &tg)
            },
            seed,
        );
        assert!(err < 1e-4, "seed {seed}: {err}");
    }
}

#[test]
fn cross_entropy_matches_hand_computation() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let logits = uniform(&mut rng, &[2, 4, 4]);
    let tg = targets(&mut rng, 16, 2);
    let mut expected = 0.0;
    for i in 0..16 {
        let (z0, z1) = (logits.data()[i], logits.data()[16 + i]);
        let z = [z0, z1][usize::from(tg[i])];
        expected += -(z - (z0.exp() + z1.exp()).ln());
    }
    expected /= 16.0;
    let mut t = Tape::new();
    let x = t.input(logits.clone());
    let l = t.cross_entropy(x, &tg).unwrap();
    assert!((t.value(l).data()[0] - expected).abs() < 1e-12);

    let tg2 = tg.clone();
    let err = max_error(
        vec![param(logits)],
        move |t: &mut Tape, v: &[Var]| t.cross_entropy(v[0], &tg2),
        7,
    );
    assert!(err < 1e-5, "{err}");
}

#[test]
fn two_layer_net_tight() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let x = uniform(&mut rng, &[1, 4, 4]);
    let tg = targets(&mut rng, 16, 2);
    let params = vec![
        param(uniform(&mut rng, &[3, 1, 3, 3])),
        param(uniform(&mut rng, &[3])),
        param(uniform(&mut rng, &[2, 3, 3, 3])),
        param(uniform(&mut rng, &[2])),
    ];
    let err = max_error(
        params,
        move |t: &mut Tape, v: &[Var]| {
            let input = t.input(x.clone());
            let h = t.conv(input, v[0], v[1], Padding::Same)?;
            let h = t.relu(h);
            let y = t.conv(h, v[2], v[3], Padding::Same)?;
            t.cross_entropy(y, &tg)
        },
        11,
    );
    assert!(err < 1e-5, "{err}");
}

fn jitter(model: &mut KTo1Model, seed: u64) {
    // move biases off zero so no pre-activation sits exactly on a kink
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for p in model.parameters_mut() {
        for v in p.value.data_mut() {
            *v += rng.random_range(-0.05..0.05);
        }
    }
}

#[test]
fn two_level_encoder_decoder() {
    let method = DecompositionMethod::Identity { copies: 1 };
    let spec = KTo1Spec::for_method(&method, 1, 2, 2, 2, false).unwrap();
    let mut model = KTo1Model::build(spec, 5).unwrap();
    jitter(&mut model, 5);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let image = NdArray::new(vec![1, 8, 8], (0..64).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap();
    let label = LabelMap::new(vec![8, 8], targets(&mut rng, 64, 2), 1).unwrap();
    let subs = decompose(&label, &method).unwrap();
    let mut obj = BatchObjective {
        model,
        items: vec![TrainItem { image, label, subs }],
    };
    let report = grad_check(&mut obj, H, 256, 5).unwrap();
    assert!(report.checked >= 64);
    assert!(report.max_relative_error < 1e-4, "{report:?}");
}
