use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{argmax_channels, breakdown, KTo1Model, LossBreakdown};
use crate::autodiff::{Adam, NdArray, Objective, Tape, Var};
use crate::data::{augment_with_rng, Sample};
use crate::decomposition::{decompose, DecompositionMethod, DecompositionResult, LabelMap};
use crate::error::{Error, Result};

/// Stream of the data generator, kept apart from the one used for
/// parameter init.
const DATA_STREAM: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    pub initial: f64,
    pub dropped: f64,
    /// First iteration that uses `dropped`.
    pub drop_at: u64,
}

impl Default for LrSchedule {
    fn default() -> Self {
        Self {
            initial: 5e-4,
            dropped: 5e-5,
            drop_at: 30_000,
        }
    }
}

impl LrSchedule {
    pub fn at(&self, iteration: u64) -> f64 {
        if iteration < self.drop_at {
            self.initial
        } else {
            self.dropped
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Training window; `None` picks 192x192 for 2D and 64x64x64 for 3D.
    pub window: Option<Vec<usize>>,
    pub batch: usize,
    pub max_iters: u64,
    pub lr: LrSchedule,
    pub seed: u64,
    pub rotate: bool,
    pub flip: bool,
    /// Iterations between checkpoints; 0 disables periodic checkpoints.
    pub checkpoint_every: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            window: None,
            batch: 8,
            max_iters: 60_000,
            lr: LrSchedule::default(),
            seed: 0,
            rotate: true,
            flip: true,
            checkpoint_every: 0,
        }
    }
}

impl TrainConfig {
    pub fn window_for(&self, spatial_dims: usize) -> Vec<usize> {
        self.window.clone().unwrap_or_else(|| match spatial_dims {
            3 => vec![64; 3],
            _ => vec![192; 2],
        })
    }
}

/// One training window with its decomposed targets.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainItem {
    pub image: NdArray,
    pub label: LabelMap,
    pub subs: DecompositionResult,
}

impl TrainItem {
    pub fn new(sample: &Sample, method: &DecompositionMethod) -> Result<Self> {
        Ok(Self {
            subs: decompose(&sample.label, method)?,
            image: sample.image.clone(),
            label: sample.label.clone(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    /// Batch means of every loss term.
    pub loss: LossBreakdown,
    /// Fraction of batch pixels whose final argmax equals the label.
    pub accuracy: f64,
}

struct ItemResult {
    loss: LossBreakdown,
    correct: usize,
    pixels: usize,
    grads: Vec<NdArray>,
}

fn run_item(model: &KTo1Model, item: &TrainItem) -> Result<ItemResult> {
    let mut tape = Tape::new();
    let vars = model.bind(&mut tape);
    let c = model.composite_on(&mut tape, &vars, &item.image, &item.label, &item.subs)?;
    let loss = breakdown(&tape, &c, model.spec().lambda);
    let pred = argmax_channels(tape.value(c.forward.final_logits));
    let correct = pred.iter().zip(item.label.labels()).filter(|(a, b)| a == b).count();
    let mut grads: Vec<NdArray> = model
        .parameters()
        .iter()
        .map(|p| NdArray::zeros(p.value.shape()))
        .collect();
    tape.backward(c.total)?.accumulate_into_arrays(&mut grads);
    Ok(ItemResult {
        loss,
        correct,
        pixels: pred.len(),
        grads,
    })
}

fn run_items(model: &KTo1Model, batch: &[TrainItem]) -> Result<Vec<ItemResult>> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        batch.par_iter().map(|item| run_item(model, item)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        batch.iter().map(|item| run_item(model, item)).collect()
    }
}

/// Forward and backward on every item, gradients averaged over the batch
/// in item order, one Adam update, gradients cleared. A non-finite loss
/// aborts before the update.
pub fn train_step(model: &mut KTo1Model, adam: &Adam, batch: &[TrainItem], lr: f64, iteration: u64) -> Result<StepStats> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let results = run_items(model, batch)?;
    let scale = 1.0 / batch.len() as f64;
    let k = model.spec().k();
    let mut loss = LossBreakdown {
        total: 0.0,
        main: 0.0,
        sub: vec![0.0; k],
        lambda: model.spec().lambda,
    };
    let (mut correct, mut pixels) = (0, 0);
    for r in &results {
        loss.total += r.loss.total * scale;
        loss.main += r.loss.main * scale;
        for (a, b) in loss.sub.iter_mut().zip(&r.loss.sub) {
            *a += b * scale;
        }
        correct += r.correct;
        pixels += r.pixels;
    }
    if !loss.all_finite() {
        return Err(Error::NonFiniteLoss {
            iteration,
            detail: format!("main {} sub {:?} total {}", loss.main, loss.sub, loss.total),
        });
    }
    let params = model.parameters_mut();
    for p in params.iter_mut() {
        p.zero_grad();
    }
    for r in &results {
        for (p, g) in params.iter_mut().zip(&r.grads) {
            p.grad.data_mut().iter_mut().zip(g.data()).for_each(|(a, b)| *a += b * scale);
        }
    }
    adam.step(params, lr)?;
    for p in params.iter_mut() {
        p.zero_grad();
    }
    Ok(StepStats {
        loss,
        accuracy: correct as f64 / pixels as f64,
    })
}

/// Mean composite loss over a fixed set of items; the gradient checker's
/// view of a model.
#[derive(Debug, Clone)]
pub struct BatchObjective {
    pub model: KTo1Model,
    pub items: Vec<TrainItem>,
}

impl Objective for BatchObjective {
    fn parameters(&self) -> &[crate::autodiff::Parameter] {
        self.model.parameters()
    }

    fn parameters_mut(&mut self) -> &mut [crate::autodiff::Parameter] {
        self.model.parameters_mut()
    }

    fn build_loss(&self, tape: &mut Tape) -> Result<Var> {
        let vars = self.model.bind(tape);
        let mut total: Option<Var> = None;
        for item in &self.items {
            let c = self.model.composite_on(tape, &vars, &item.image, &item.label, &item.subs)?;
            total = Some(match total {
                Some(t) => tape.add(t, c.total)?,
                None => c.total,
            });
        }
        let total = total.ok_or_else(|| Error::InvalidArgument("objective without items".into()))?;
        Ok(tape.scale(total, 1.0 / self.items.len() as f64))
    }
}

/// One training-log row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub iter: u64,
    pub lr: f64,
    pub loss: f64,
    pub main: f64,
    pub sub: Vec<f64>,
    pub accuracy: f64,
}

/// Owns a model, its optimizer and the data generator for one run.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub model: KTo1Model,
    pub adam: Adam,
    pub method: DecompositionMethod,
    pub config: TrainConfig,
    rng: ChaCha8Rng,
    iteration: u64,
}

/// Generator position needed to resume a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngState {
    pub seed: u64,
    pub stream: u64,
    /// Decimal, since JSON numbers cannot carry 128 bits.
    #[serde(with = "u128_string")]
    pub word_pos: u128,
}

mod u128_string {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &u128, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u128, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl Trainer {
    pub fn new(model: KTo1Model, method: DecompositionMethod, config: TrainConfig) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(DATA_STREAM);
        Self::check(&model, &method, &config)?;
        Ok(Self {
            model,
            adam: Adam::default(),
            method,
            config,
            rng,
            iteration: 0,
        })
    }

    /// Continues a run from saved state.
    pub fn resume(
        model: KTo1Model,
        adam: Adam,
        method: DecompositionMethod,
        config: TrainConfig,
        iteration: u64,
        rng: RngState,
    ) -> Result<Self> {
        Self::check(&model, &method, &config)?;
        let mut gen = ChaCha8Rng::seed_from_u64(rng.seed);
        gen.set_stream(rng.stream);
        gen.set_word_pos(rng.word_pos);
        Ok(Self {
            model,
            adam,
            method,
            config,
            rng: gen,
            iteration,
        })
    }

    fn check(model: &KTo1Model, method: &DecompositionMethod, config: &TrainConfig) -> Result<()> {
        let spec = model.spec();
        let k = method.sub_map_count(spec.num_classes);
        if k != spec.k() {
            return Err(Error::InvalidArgument(format!(
                "method {} yields {k} sub-maps but the model has {} stage-1 modules",
                method.name(),
                spec.k()
            )));
        }
        if config.batch == 0 {
            return Err(Error::InvalidArgument("batch must be at least 1".into()));
        }
        let window = config.window_for(spec.spatial_dims);
        let m = spec.size_multiple();
        if window.len() != spec.spatial_dims || window.iter().any(|&w| w == 0 || w % m != 0) {
            return Err(Error::InvalidArgument(format!(
                "window {window:?} must have {} dims, each a positive multiple of {m}",
                spec.spatial_dims
            )));
        }
        Ok(())
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn rng_state(&self) -> RngState {
        RngState {
            seed: self.config.seed,
            stream: self.rng.get_stream(),
            word_pos: self.rng.get_word_pos(),
        }
    }

    /// Draws `batch` random windows, augments them and decomposes each
    /// window's label map.
    pub fn next_batch(&mut self, dataset: &[Sample]) -> Result<Vec<TrainItem>> {
        if dataset.is_empty() {
            return Err(Error::InvalidArgument("empty training set".into()));
        }
        let window = self.config.window_for(self.model.spec().spatial_dims);
        (0..self.config.batch)
            .map(|_| {
                let s = &dataset[self.rng.random_range(0..dataset.len())];
                let a = augment_with_rng(s, Some(&window), self.config.rotate, self.config.flip, &mut self.rng)?;
                TrainItem::new(&a, &self.method)
            })
            .collect()
    }

    pub fn step(&mut self, dataset: &[Sample]) -> Result<LogRow> {
        let batch = self.next_batch(dataset)?;
        let lr = self.config.lr.at(self.iteration);
        let stats = train_step(&mut self.model, &self.adam, &batch, lr, self.iteration)?;
        self.iteration += 1;
        Ok(LogRow {
            iter: self.iteration,
            lr,
            loss: stats.loss.total,
            main: stats.loss.main,
            sub: stats.loss.sub,
            accuracy: stats.accuracy,
        })
    }

    /// Steps until `until` iterations are done, handing each row to
    /// `on_row`.
    pub fn run_until(
        &mut self,
        dataset: &[Sample],
        until: u64,
        mut on_row: impl FnMut(&Trainer, &LogRow) -> Result<()>,
    ) -> Result<()> {
        while self.iteration < until {
            let row = self.step(dataset)?;
            on_row(self, &row)?;
        }
        Ok(())
    }
}

/// Trains for `config.max_iters` iterations and returns the log.
pub fn fit(model: KTo1Model, dataset: &[Sample], method: DecompositionMethod, config: TrainConfig) -> Result<(Trainer, Vec<LogRow>)> {
    if dataset.is_empty() {
        return Err(Error::InvalidArgument("empty training set".into()));
    }
    let until = config.max_iters;
    let mut trainer = Trainer::new(model, method, config)?;
    let mut log = Vec::new();
    trainer.run_until(dataset, until, |_, row| {
        log.push(row.clone());
        Ok(())
    })?;
    Ok((trainer, log))
}
