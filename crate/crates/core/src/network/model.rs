use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::spec::{KTo1Spec, SegModuleSpec};
use crate::autodiff::{NdArray, Padding, Parameter, Tape, Var};
use crate::decomposition::{DecompositionResult, LabelMap};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct ConvIds {
    kernel: usize,
    bias: usize,
}

/// Parameter ids of one encoder-decoder module.
#[derive(Debug, Clone, PartialEq, Eq)]
struct ModuleIds {
    /// Two convs per encoder level, levels `0..=depth`.
    encoder: Vec<[ConvIds; 2]>,
    /// Two convs per decoder level, indexed by the level they restore.
    decoder: Vec<[ConvIds; 2]>,
    head: ConvIds,
}

/// Stage-1 and final logits of one forward pass on a tape.
#[derive(Debug, Clone)]
pub struct ForwardVars {
    pub stage1_logits: Vec<Var>,
    pub stage1_probs: Vec<Var>,
    pub final_logits: Var,
}

/// Softmax outputs of every module.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    pub stage1: Vec<NdArray>,
    pub final_probs: NdArray,
}

/// Per-term values of the composite loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub main: f64,
    pub sub: Vec<f64>,
    pub lambda: f64,
}

impl LossBreakdown {
    pub fn all_finite(&self) -> bool {
        self.total.is_finite() && self.main.is_finite() && self.sub.iter().all(|v| v.is_finite())
    }
}

/// Loss nodes of one sample on a tape.
#[derive(Debug, Clone)]
pub struct CompositeVars {
    pub total: Var,
    pub main: Var,
    pub sub: Vec<Var>,
    pub forward: ForwardVars,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KTo1Model {
    spec: KTo1Spec,
    params: Vec<Parameter>,
    /// K stage-1 modules followed by the integrator.
    modules: Vec<ModuleIds>,
}

fn conv_shape(out: usize, inp: usize, k: usize, spatial_dims: usize) -> Vec<usize> {
    let mut s = vec![out, inp];
    s.extend(std::iter::repeat_n(k, spatial_dims));
    s
}

impl KTo1Model {
    /// He-normal kernels drawn in parameter order from a generator seeded
    /// with `seed`; zero biases.
    pub fn build(spec: KTo1Spec, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::assemble(spec, |shape| {
            let fan_in: usize = shape[1..].iter().product();
            let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive std");
            let n: usize = shape.iter().product();
            (0..n).map(|_| normal.sample(&mut rng)).collect()
        })
    }

    /// Every parameter zero, so all outputs are uniform.
    pub fn zeroed(spec: KTo1Spec) -> Result<Self> {
        Self::assemble(spec, |shape| vec![0.0; shape.iter().product()])
    }

    fn assemble(spec: KTo1Spec, mut init: impl FnMut(&[usize]) -> Vec<f64>) -> Result<Self> {
        spec.validate()?;
        let d = spec.spatial_dims;
        let mut params = Vec::new();
        let mut conv = |params: &mut Vec<Parameter>, out: usize, inp: usize, k: usize| -> Result<ConvIds> {
            let shape = conv_shape(out, inp, k, d);
            let kernel = params.len();
            params.push(Parameter::new(NdArray::new(shape.clone(), init(&shape))?));
            params.push(Parameter::new(NdArray::zeros(&[out])));
            Ok(ConvIds { kernel, bias: kernel + 1 })
        };
        let mut modules = Vec::new();
        for m in spec.stage1.iter().chain(std::iter::once(&spec.integrator)) {
            let k = m.kernel_size;
            let mut encoder = Vec::new();
            let mut prev = m.in_channels;
            for level in 0..=m.depth {
                let w = m.width(level);
                encoder.push([conv(&mut params, w, prev, k)?, conv(&mut params, w, w, k)?]);
                prev = w;
            }
            let mut decoder = vec![None; m.depth];
            for level in (0..m.depth).rev() {
                let w = m.width(level);
                decoder[level] = Some([conv(&mut params, w, prev + w, k)?, conv(&mut params, w, w, k)?]);
                prev = w;
            }
            let head = conv(&mut params, m.out_channels, prev, 1)?;
            modules.push(ModuleIds {
                encoder,
                decoder: decoder.into_iter().map(|c| c.expect("every level filled")).collect(),
                head,
            });
        }
        Ok(Self { spec, params, modules })
    }

    /// Rebuilds a model from stored parameters, checking every shape.
    pub fn from_parameters(spec: KTo1Spec, params: Vec<Parameter>) -> Result<Self> {
        let mut model = Self::zeroed(spec)?;
        if params.len() != model.params.len() {
            return Err(Error::Shape(format!(
                "spec needs {} parameter arrays, got {}",
                model.params.len(),
                params.len()
            )));
        }
        for (i, (want, got)) in model.params.iter().zip(&params).enumerate() {
            if want.value.shape() != got.value.shape() {
                return Err(Error::Shape(format!(
                    "parameter {i}: expected shape {:?}, got {:?}",
                    want.value.shape(),
                    got.value.shape()
                )));
            }
        }
        model.params = params;
        Ok(model)
    }

    pub fn spec(&self) -> &KTo1Spec {
        &self.spec
    }

    pub fn parameters(&self) -> &[Parameter] {
        &self.params
    }

    pub fn parameters_mut(&mut self) -> &mut [Parameter] {
        &mut self.params
    }

    pub fn num_weights(&self) -> usize {
        self.params.iter().map(Parameter::len).sum()
    }

    /// Checks an input image against the spec.
    pub fn check_input(&self, image: &NdArray) -> Result<()> {
        if image.channels() != self.spec.image_channels || image.spatial().len() != self.spec.spatial_dims {
            return Err(Error::Shape(format!(
                "model expects {} channel(s) and {} spatial dims, got shape {:?}",
                self.spec.image_channels,
                self.spec.spatial_dims,
                image.shape()
            )));
        }
        let m = self.spec.size_multiple();
        if image.spatial().iter().any(|&s| s % m != 0) {
            return Err(Error::Shape(format!(
                "spatial dims {:?} must be multiples of {m}; pad the input",
                image.spatial()
            )));
        }
        Ok(())
    }

    /// Puts every parameter on the tape, in id order.
    pub fn bind(&self, tape: &mut Tape) -> Vec<Var> {
        self.params.iter().enumerate().map(|(i, p)| tape.param(i, p)).collect()
    }

    fn conv_relu(tape: &mut Tape, vars: &[Var], c: ConvIds, x: Var) -> Result<Var> {
        let y = tape.conv(x, vars[c.kernel], vars[c.bias], Padding::Same)?;
        Ok(tape.relu(y))
    }

    fn module_forward(tape: &mut Tape, vars: &[Var], ids: &ModuleIds, spec: &SegModuleSpec, input: Var) -> Result<Var> {
        let mut skips = Vec::with_capacity(spec.depth + 1);
        let mut x = input;
        for (level, [a, b]) in ids.encoder.iter().enumerate() {
            if level > 0 {
                x = tape.downsample2(x)?;
            }
            x = Self::conv_relu(tape, vars, *a, x)?;
            x = Self::conv_relu(tape, vars, *b, x)?;
            skips.push(x);
        }
        for level in (0..spec.depth).rev() {
            let [a, b] = ids.decoder[level];
            x = tape.upsample2(x)?;
            x = tape.channel_concat(&[x, skips[level]])?;
            x = Self::conv_relu(tape, vars, a, x)?;
            x = Self::conv_relu(tape, vars, b, x)?;
        }
        tape.conv(x, vars[ids.head.kernel], vars[ids.head.bias], Padding::Same)
    }

    /// Stage-1 modules on the image, then the integrator on their softmax
    /// outputs (plus the image when configured).
    pub fn forward_on(&self, tape: &mut Tape, vars: &[Var], image: Var) -> Result<ForwardVars> {
        self.check_input(tape.value(image))?;
        let k = self.spec.k();
        let mut stage1_logits = Vec::with_capacity(k);
        let mut stage1_probs = Vec::with_capacity(k);
        for (ids, spec) in self.modules[..k].iter().zip(&self.spec.stage1) {
            let logits = Self::module_forward(tape, vars, ids, spec, image)?;
            stage1_probs.push(tape.softmax(logits));
            stage1_logits.push(logits);
        }
        let mut inputs = stage1_probs.clone();
        if self.spec.feed_raw_to_integrator {
            inputs.push(image);
        }
        let joined = tape.channel_concat(&inputs)?;
        let final_logits = Self::module_forward(tape, vars, &self.modules[k], &self.spec.integrator, joined)?;
        Ok(ForwardVars {
            stage1_logits,
            stage1_probs,
            final_logits,
        })
    }

    pub fn forward_all(&self, image: &NdArray) -> Result<ForwardOutput> {
        let mut tape = Tape::new();
        let vars = self.bind(&mut tape);
        let x = tape.input(image.clone());
        let f = self.forward_on(&mut tape, &vars, x)?;
        let final_probs = tape.softmax(f.final_logits);
        Ok(ForwardOutput {
            stage1: f.stage1_probs.iter().map(|v| tape.value(*v).clone()).collect(),
            final_probs: tape.value(final_probs).clone(),
        })
    }

    fn check_targets(&self, image: &NdArray, label: &LabelMap, subs: &DecompositionResult) -> Result<()> {
        if subs.sub_maps.len() != self.spec.k() {
            return Err(Error::InvalidArgument(format!(
                "model has {} stage-1 modules but the decomposition has {} sub-maps",
                self.spec.k(),
                subs.sub_maps.len()
            )));
        }
        for m in std::iter::once(label).chain(&subs.sub_maps) {
            if m.dims() != image.spatial() {
                return Err(Error::Shape(format!(
                    "target dims {:?} differ from image dims {:?}",
                    m.dims(),
                    image.spatial()
                )));
            }
        }
        Ok(())
    }

    /// Main cross entropy plus `lambda` times the summed sub-problem cross
    /// entropies, built on `tape`.
    pub fn composite_on(
        &self,
        tape: &mut Tape,
        vars: &[Var],
        image: &NdArray,
        label: &LabelMap,
        subs: &DecompositionResult,
    ) -> Result<CompositeVars> {
        self.check_targets(image, label, subs)?;
        let x = tape.input(image.clone());
        let forward = self.forward_on(tape, vars, x)?;
        let main = tape.cross_entropy(forward.final_logits, label.labels())?;
        let mut sub = Vec::with_capacity(subs.sub_maps.len());
        for (logits, target) in forward.stage1_logits.iter().zip(&subs.sub_maps) {
            sub.push(tape.cross_entropy(*logits, target.labels())?);
        }
        let mut sub_sum = sub[0];
        for &s in &sub[1..] {
            sub_sum = tape.add(sub_sum, s)?;
        }
        let weighted = tape.scale(sub_sum, self.spec.lambda);
        let total = tape.add(main, weighted)?;
        Ok(CompositeVars {
            total,
            main,
            sub,
            forward,
        })
    }

    pub fn composite_loss(&self, image: &NdArray, label: &LabelMap, subs: &DecompositionResult) -> Result<LossBreakdown> {
        let mut tape = Tape::new();
        let vars = self.bind(&mut tape);
        let c = self.composite_on(&mut tape, &vars, image, label, subs)?;
        Ok(breakdown(&tape, &c, self.spec.lambda))
    }
}

pub(crate) fn breakdown(tape: &Tape, c: &CompositeVars, lambda: f64) -> LossBreakdown {
    let scalar = |v: Var| tape.value(v).data()[0];
    LossBreakdown {
        total: scalar(c.total),
        main: scalar(c.main),
        sub: c.sub.iter().map(|v| scalar(*v)).collect(),
        lambda,
    }
}

/// Per-pixel argmax over channels; ties go to the lower class.
pub fn argmax_channels(probs: &NdArray) -> Vec<u8> {
    let c = probs.channels();
    let n = probs.spatial_len();
    let d = probs.data();
    (0..n)
        .map(|i| {
            let mut best = 0;
            for k in 1..c {
                if d[k * n + i] > d[best * n + i] {
                    best = k;
                }
            }
            best as u8
        })
        .collect()
}
