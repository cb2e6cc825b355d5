//! Procedural datasets that exercise each decomposition mode.
//!
//! Objects are stamped onto a blank canvas at random positions and kept at
//! least `gap` background pixels apart (Chebyshev distance), so connected
//! components recover them under any connectivity.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::sample::Sample;
use crate::autodiff::NdArray;
use crate::decomposition::LabelMap;
use crate::error::{Error, Result};

type Offset = [i64; 3];

/// Shared image model: per-class mean intensity plus Gaussian noise,
/// clamped to [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntensityModel {
    /// Mean intensity for background followed by classes 1..=K.
    pub means: Vec<f64>,
    pub noise_sigma: f64,
}

impl IntensityModel {
    fn render<R: Rng + ?Sized>(&self, label: &LabelMap, rng: &mut R) -> Result<NdArray> {
        let noise = Normal::new(0.0, self.noise_sigma)
            .map_err(|e| Error::InvalidArgument(format!("noise sigma: {e}")))?;
        let data = label
            .labels()
            .iter()
            .map(|&v| (self.means[usize::from(v)] + noise.sample(rng)).clamp(0.0, 1.0))
            .collect();
        let mut shape = vec![1];
        shape.extend_from_slice(label.dims());
        NdArray::new(shape, data)
    }
}

struct Canvas {
    /// Spatial dims padded to rank 3.
    dims: [usize; 3],
    rank: usize,
    labels: Vec<u8>,
    blocked: Vec<bool>,
    gap: i64,
}

impl Canvas {
    fn new(dims: &[usize], gap: usize) -> Result<Self> {
        let padded = match *dims {
            [h, w] => [1, h, w],
            [d, h, w] => [d, h, w],
            _ => {
                return Err(Error::UnsupportedDimension(format!(
                    "{} spatial dims",
                    dims.len()
                )))
            }
        };
        let n = padded.iter().product();
        Ok(Self {
            dims: padded,
            rank: dims.len(),
            labels: vec![0; n],
            blocked: vec![false; n],
            gap: gap as i64,
        })
    }

    fn flat(&self, p: Offset) -> Option<usize> {
        let mut idx = 0;
        for k in 0..3 {
            if p[k] < 0 || p[k] >= self.dims[k] as i64 {
                return None;
            }
            idx = idx * self.dims[k] + p[k] as usize;
        }
        Some(idx)
    }

    /// Picks a random origin for `footprint` that keeps it in bounds and
    /// clear of earlier objects. Returns `None` after `tries` failures.
    fn find_origin<R: Rng + ?Sized>(&self, footprint: &[Offset], tries: usize, rng: &mut R) -> Option<Offset> {
        let mut lo = [i64::MAX; 3];
        let mut hi = [i64::MIN; 3];
        for p in footprint {
            for k in 0..3 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        if (0..3).any(|k| hi[k] - lo[k] >= self.dims[k] as i64) {
            return None;
        }
        for _ in 0..tries {
            let mut origin = [0i64; 3];
            for k in 0..3 {
                origin[k] = rng.random_range(-lo[k]..=self.dims[k] as i64 - 1 - hi[k]);
            }
            let clear = footprint.iter().all(|p| {
                let q = [origin[0] + p[0], origin[1] + p[1], origin[2] + p[2]];
                self.flat(q).is_some_and(|i| !self.blocked[i])
            });
            if clear {
                return Some(origin);
            }
        }
        None
    }

    /// Reserves `footprint` at `origin` plus a `gap`-wide margin.
    fn reserve(&mut self, footprint: &[Offset], origin: Offset) {
        let g = self.gap;
        let dz = if self.rank == 3 { g } else { 0 };
        for p in footprint {
            for z in -dz..=dz {
                for y in -g..=g {
                    for x in -g..=g {
                        let q = [origin[0] + p[0] + z, origin[1] + p[1] + y, origin[2] + p[2] + x];
                        if let Some(i) = self.flat(q) {
                            self.blocked[i] = true;
                        }
                    }
                }
            }
        }
    }

    /// Writes `label` at the given pixels and returns the object's anchor
    /// (its smallest pixel in row-major order).
    fn paint(&mut self, pixels: &[Offset], origin: Offset, label: u8) -> Vec<usize> {
        let mut first = usize::MAX;
        for p in pixels {
            let q = [origin[0] + p[0], origin[1] + p[1], origin[2] + p[2]];
            let i = self.flat(q).expect("painted pixel lies inside its reserved footprint");
            self.labels[i] = label;
            first = first.min(i);
        }
        let (h, w) = (self.dims[1], self.dims[2]);
        let full = [first / (h * w), (first / w) % h, first % w];
        full[3 - self.rank..].to_vec()
    }

    fn spatial_dims(&self) -> Vec<usize> {
        self.dims[3 - self.rank..].to_vec()
    }

    fn into_label(self, num_classes: u8) -> Result<LabelMap> {
        let dims = self.spatial_dims();
        LabelMap::new(dims, self.labels, num_classes)
    }
}

/// Integer offsets within Euclidean radius `r` of the origin.
fn ball(rank: usize, r: f64) -> Vec<Offset> {
    let ri = r.floor() as i64;
    let rz = if rank == 3 { ri } else { 0 };
    let mut out = Vec::new();
    for z in -rz..=rz {
        for y in -ri..=ri {
            for x in -ri..=ri {
                if ((z * z + y * y + x * x) as f64) <= r * r {
                    out.push([z, y, x]);
                }
            }
        }
    }
    out
}

fn check_count(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample count must be at least 1".into()));
    }
    Ok(())
}

fn sample_id(prefix: &str, i: usize) -> String {
    format!("{prefix}_{i:04}")
}

/// Class-1 cores each wrapped by a class-2 annulus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelatedConfig {
    /// Inclusive integer range of core radii.
    pub core_radius: (u32, u32),
    /// Inclusive integer range of annulus widths.
    pub ring_width: (u32, u32),
    /// Inclusive range of blobs attempted per image.
    pub blobs: (usize, usize),
    pub gap: usize,
    pub intensity: IntensityModel,
}

impl Default for CorrelatedConfig {
    fn default() -> Self {
        Self {
            core_radius: (3, 6),
            ring_width: (2, 3),
            blobs: (1, 4),
            gap: 2,
            intensity: IntensityModel {
                means: vec![0.1, 0.8, 0.45],
                noise_sigma: 0.08,
            },
        }
    }
}

impl CorrelatedConfig {
    fn max_outer(&self) -> f64 {
        f64::from(self.core_radius.1 + self.ring_width.1)
    }

    /// Expected ratio of class-2 to class-1 pixel counts. Blob positions
    /// are drawn against the largest possible footprint before the radii
    /// are drawn, so the blob count is independent of blob size and the
    /// ratio of expected counts is the ratio of per-blob averages.
    pub fn expected_class_ratio(&self, rank: usize) -> f64 {
        let (mut core, mut ring) = (0.0, 0.0);
        for r in self.core_radius.0..=self.core_radius.1 {
            for w in self.ring_width.0..=self.ring_width.1 {
                let c = ball(rank, f64::from(r)).len() as f64;
                core += c;
                ring += ball(rank, f64::from(r + w)).len() as f64 - c;
            }
        }
        ring / core
    }
}

pub fn synth_correlated_classes(n: usize, dims: &[usize], seed: u64) -> Result<Vec<Sample>> {
    synth_correlated_classes_with(n, dims, seed, &CorrelatedConfig::default())
}

pub fn synth_correlated_classes_with(
    n: usize,
    dims: &[usize],
    seed: u64,
    config: &CorrelatedConfig,
) -> Result<Vec<Sample>> {
    check_count(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut canvas = Canvas::new(dims, config.gap)?;
        let footprint = ball(canvas.rank, config.max_outer());
        let target = rng.random_range(config.blobs.0..=config.blobs.1);
        let mut centers = Vec::new();
        for _ in 0..target {
            if let Some(origin) = canvas.find_origin(&footprint, 50, &mut rng) {
                canvas.reserve(&footprint, origin);
                centers.push(origin);
            }
        }
        if centers.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "dims {dims:?} cannot hold a blob of radius {}",
                config.max_outer()
            )));
        }
        for origin in centers {
            let r = rng.random_range(config.core_radius.0..=config.core_radius.1);
            let w = rng.random_range(config.ring_width.0..=config.ring_width.1);
            canvas.paint(&ball(canvas.rank, f64::from(r + w)), origin, 2);
            canvas.paint(&ball(canvas.rank, f64::from(r)), origin, 1);
        }
        let label = canvas.into_label(2)?;
        let image = config.intensity.render(&label, &mut rng)?;
        out.push(Sample::new(sample_id("corr", i), image, label)?);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeKind {
    Ellipse,
    UShape,
    LShape,
}

impl ShapeKind {
    /// Whether the generator means the object to read as convex.
    pub fn intended_convex(self) -> bool {
        self == ShapeKind::Ellipse
    }
}

/// What the generator placed: one record per object.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectRecord {
    pub anchor: Vec<usize>,
    pub label: u8,
    pub kind: ShapeKind,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSample {
    pub sample: Sample,
    pub objects: Vec<ObjectRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeMixConfig {
    pub num_classes: u8,
    pub objects: (usize, usize),
    /// Range of ellipse semi-axes.
    pub semi_axis: (f64, f64),
    /// Range of U/L bounding-box sides.
    pub bar_length: (i64, i64),
    /// Range of U/L stroke thickness.
    pub bar_width: (i64, i64),
    /// Probability that an object is an ellipse; the rest split evenly
    /// between U and L shapes.
    pub p_ellipse: f64,
    pub gap: usize,
    pub intensity: IntensityModel,
}

impl Default for ShapeMixConfig {
    fn default() -> Self {
        Self {
            num_classes: 2,
            objects: (2, 5),
            semi_axis: (3.0, 7.0),
            bar_length: (8, 12),
            bar_width: (2, 3),
            p_ellipse: 0.5,
            gap: 2,
            intensity: IntensityModel {
                means: vec![0.1, 0.8, 0.5],
                noise_sigma: 0.08,
            },
        }
    }
}

fn ellipse(a: f64, b: f64, angle: f64) -> Vec<Offset> {
    let r = a.max(b).ceil() as i64;
    let (s, c) = angle.sin_cos();
    let mut out = Vec::new();
    for y in -r..=r {
        for x in -r..=r {
            let (xf, yf) = (x as f64, y as f64);
            let u = (xf * c + yf * s) / a;
            let v = (-xf * s + yf * c) / b;
            if u * u + v * v <= 1.0 {
                out.push([0, y, x]);
            }
        }
    }
    out
}

/// U or L stroke shape in a `len`-sided box, turned by `quarter_turns`.
fn bar_shape(kind: ShapeKind, len: i64, width: i64, quarter_turns: u8) -> Vec<Offset> {
    let mut out = Vec::new();
    for y in 0..len {
        for x in 0..len {
            let left = x < width;
            let right = x >= len - width;
            let bottom = y >= len - width;
            let inside = match kind {
                ShapeKind::UShape => left || right || bottom,
                ShapeKind::LShape => left || bottom,
                ShapeKind::Ellipse => unreachable!("ellipses are not bar shapes"),
            };
            if inside {
                let (mut yy, mut xx) = (y, x);
                for _ in 0..quarter_turns {
                    (yy, xx) = (len - 1 - xx, yy);
                }
                out.push([0, yy, xx]);
            }
        }
    }
    out
}

fn random_shape<R: Rng + ?Sized>(config: &ShapeMixConfig, rng: &mut R) -> (ShapeKind, Vec<Offset>) {
    if rng.random_bool(config.p_ellipse) {
        let a = rng.random_range(config.semi_axis.0..=config.semi_axis.1);
        let b = rng.random_range(config.semi_axis.0..=config.semi_axis.1);
        let angle = rng.random_range(0.0..std::f64::consts::PI);
        (ShapeKind::Ellipse, ellipse(a, b, angle))
    } else {
        let kind = if rng.random_bool(0.5) {
            ShapeKind::UShape
        } else {
            ShapeKind::LShape
        };
        let len = rng.random_range(config.bar_length.0..=config.bar_length.1);
        let width = rng.random_range(config.bar_width.0..=config.bar_width.1);
        (kind, bar_shape(kind, len, width, rng.random_range(0..4u8)))
    }
}

pub fn synth_shape_mix(n: usize, dims: &[usize], seed: u64) -> Result<Vec<SynthSample>> {
    synth_shape_mix_with(n, dims, seed, &ShapeMixConfig::default())
}

pub fn synth_shape_mix_with(
    n: usize,
    dims: &[usize],
    seed: u64,
    config: &ShapeMixConfig,
) -> Result<Vec<SynthSample>> {
    check_count(n)?;
    if dims.len() != 2 {
        return Err(Error::UnsupportedDimension(
            "shape mix is defined on 2D images only".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut canvas = Canvas::new(dims, config.gap)?;
        let target = rng.random_range(config.objects.0..=config.objects.1);
        let mut objects = Vec::new();
        for _ in 0..target {
            let (kind, pixels) = random_shape(config, &mut rng);
            let label = rng.random_range(1..=config.num_classes);
            if let Some(origin) = canvas.find_origin(&pixels, 50, &mut rng) {
                canvas.reserve(&pixels, origin);
                let anchor = canvas.paint(&pixels, origin, label);
                objects.push(ObjectRecord {
                    anchor,
                    label,
                    kind,
                    size: pixels.len(),
                });
            }
        }
        if objects.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "dims {dims:?} too small for the configured shapes"
            )));
        }
        let label = canvas.into_label(config.num_classes)?;
        let image = config.intensity.render(&label, &mut rng)?;
        out.push(SynthSample {
            sample: Sample::new(sample_id("shape", i), image, label)?,
            objects,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountMixConfig {
    pub num_classes: u8,
    /// Object count range for multi-object images.
    pub multi: (usize, usize),
    pub radius: (f64, f64),
    pub gap: usize,
    /// Whole-image layouts tried before giving up.
    pub layout_tries: usize,
    pub intensity: IntensityModel,
}

impl Default for CountMixConfig {
    fn default() -> Self {
        Self {
            num_classes: 1,
            multi: (2, 5),
            radius: (2.5, 5.0),
            gap: 2,
            layout_tries: 200,
            intensity: IntensityModel {
                means: vec![0.15, 0.75],
                noise_sigma: 0.08,
            },
        }
    }
}

pub fn synth_count_mix(n: usize, dims: &[usize], seed: u64, p_single: f64) -> Result<Vec<SynthSample>> {
    synth_count_mix_with(n, dims, seed, p_single, &CountMixConfig::default())
}

pub fn synth_count_mix_with(
    n: usize,
    dims: &[usize],
    seed: u64,
    p_single: f64,
    config: &CountMixConfig,
) -> Result<Vec<SynthSample>> {
    check_count(n)?;
    if !(0.0..=1.0).contains(&p_single) {
        return Err(Error::InvalidArgument(format!(
            "p_single must lie in [0, 1], got {p_single}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let count = if rng.random_bool(p_single) {
            1
        } else {
            rng.random_range(config.multi.0..=config.multi.1)
        };
        let mut placed = None;
        for _ in 0..config.layout_tries {
            let mut canvas = Canvas::new(dims, config.gap)?;
            let mut objects = Vec::with_capacity(count);
            for _ in 0..count {
                let r = rng.random_range(config.radius.0..=config.radius.1);
                let pixels = ball(canvas.rank, r);
                let label = rng.random_range(1..=config.num_classes);
                let Some(origin) = canvas.find_origin(&pixels, 20, &mut rng) else {
                    break;
                };
                canvas.reserve(&pixels, origin);
                let anchor = canvas.paint(&pixels, origin, label);
                objects.push(ObjectRecord {
                    anchor,
                    label,
                    kind: ShapeKind::Ellipse,
                    size: pixels.len(),
                });
            }
            if objects.len() == count {
                placed = Some((canvas, objects));
                break;
            }
        }
        let (canvas, objects) = placed.ok_or_else(|| {
            Error::InvalidArgument(format!("could not fit {count} objects into dims {dims:?}"))
        })?;
        let label = canvas.into_label(config.num_classes)?;
        let image = config.intensity.render(&label, &mut rng)?;
        out.push(SynthSample {
            sample: Sample::new(sample_id("count", i), image, label)?,
            objects,
        });
    }
    Ok(out)
}
