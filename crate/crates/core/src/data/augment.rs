//! Random crop, 90-degree rotation and axis flips applied identically to
//! an image and its label map. Every transform is a pixel permutation (or
//! selection, for crops), so label values are never interpolated.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::sample::Sample;
use crate::autodiff::NdArray;
use crate::decomposition::LabelMap;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentationConfig {
    /// Crop window per spatial dim; `None` keeps the full extent.
    pub crop: Option<Vec<usize>>,
    /// Rotations by multiples of 90 degrees in the last two spatial dims.
    pub rotate: bool,
    /// Independent flips along each spatial dim.
    pub flip: bool,
    pub seed: u64,
}

/// One concrete draw of the random transform.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AugmentDraw {
    pub offset: Vec<usize>,
    pub window: Vec<usize>,
    pub quarter_turns: u8,
    pub flips: Vec<bool>,
}

pub fn augment(sample: &Sample, config: &AugmentationConfig) -> Result<Sample> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    augment_with_rng(sample, config.crop.as_deref(), config.rotate, config.flip, &mut rng)
}

pub fn augment_with_rng<R: Rng + ?Sized>(
    sample: &Sample,
    crop: Option<&[usize]>,
    rotate: bool,
    flip: bool,
    rng: &mut R,
) -> Result<Sample> {
    let draw = draw_transform(sample.dims(), crop, rotate, flip, rng)?;
    apply(sample, &draw)
}

pub fn draw_transform<R: Rng + ?Sized>(
    dims: &[usize],
    crop: Option<&[usize]>,
    rotate: bool,
    flip: bool,
    rng: &mut R,
) -> Result<AugmentDraw> {
    let window = crop.map_or_else(|| dims.to_vec(), <[usize]>::to_vec);
    if window.len() != dims.len() || window.iter().zip(dims).any(|(w, d)| *w == 0 || w > d) {
        return Err(Error::InvalidArgument(format!(
            "crop window {window:?} does not fit image dims {dims:?}"
        )));
    }
    let offset = window
        .iter()
        .zip(dims)
        .map(|(&w, &d)| rng.random_range(0..=d - w))
        .collect();
    let n = window.len();
    let quarter_turns = if !rotate {
        0
    } else if window[n - 1] == window[n - 2] {
        rng.random_range(0..4u8)
    } else {
        // non-square windows only admit half turns
        2 * rng.random_range(0..2u8)
    };
    let flips = (0..n).map(|_| flip && rng.random_bool(0.5)).collect();
    Ok(AugmentDraw {
        offset,
        window,
        quarter_turns,
        flips,
    })
}

fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * dims[k + 1];
    }
    s
}

/// Output dims and, for each output pixel, its flat source index.
pub fn source_indices(dims: &[usize], draw: &AugmentDraw) -> (Vec<usize>, Vec<usize>) {
    let n = dims.len();
    let src_strides = strides(dims);
    // crop: start from the window's own coordinates
    let mut cur_dims = draw.window.clone();
    let total: usize = cur_dims.iter().product();
    let mut map: Vec<usize> = (0..total)
        .map(|i| {
            let mut rem = i;
            let mut flat = 0;
            for k in (0..n).rev() {
                let c = rem % cur_dims[k];
                rem /= cur_dims[k];
                flat += (c + draw.offset[k]) * src_strides[k];
            }
            flat
        })
        .collect();

    for _ in 0..draw.quarter_turns {
        // out[.., y, x] = in[.., x, W - 1 - y] with out dims (.., W, H)
        let (h, w) = (cur_dims[n - 2], cur_dims[n - 1]);
        let mut out_dims = cur_dims.clone();
        out_dims[n - 2] = w;
        out_dims[n - 1] = h;
        let plane = h * w;
        let mut next = vec![0; map.len()];
        for (i, slot) in next.iter_mut().enumerate() {
            let outer = i / plane;
            let y = (i % plane) / h;
            let x = i % h;
            *slot = map[outer * plane + x * w + (w - 1 - y)];
        }
        map = next;
        cur_dims = out_dims;
    }

    let cur_strides = strides(&cur_dims);
    for (k, &f) in draw.flips.iter().enumerate() {
        if !f {
            continue;
        }
        let (len, s) = (cur_dims[k], cur_strides[k]);
        let mut next = vec![0; map.len()];
        for (i, slot) in next.iter_mut().enumerate() {
            let c = (i / s) % len;
            let j = i - c * s + (len - 1 - c) * s;
            *slot = map[j];
        }
        map = next;
    }
    (cur_dims, map)
}

pub fn apply(sample: &Sample, draw: &AugmentDraw) -> Result<Sample> {
    let (out_dims, src) = source_indices(sample.dims(), draw);
    let labels = src.iter().map(|&i| sample.label.labels()[i]).collect();
    let label = LabelMap::new(out_dims.clone(), labels, sample.label.num_classes())?;
    let mut image = Vec::with_capacity(src.len() * sample.image.channels());
    for c in 0..sample.image.channels() {
        let ch = sample.image.channel(c);
        image.extend(src.iter().map(|&i| ch[i]));
    }
    let mut shape = vec![sample.image.channels()];
    shape.extend_from_slice(&out_dims);
    Sample::new(sample.id.clone(), NdArray::new(shape, image)?, label)
}
