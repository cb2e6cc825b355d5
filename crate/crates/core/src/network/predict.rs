use super::model::{argmax_channels, KTo1Model};
use crate::autodiff::NdArray;
use crate::data::{source_indices, AugmentDraw};
use crate::decomposition::LabelMap;
use crate::error::{Error, Result};

/// Window origins along one axis: stride `window - overlap`, with the last
/// window flush against the far edge.
fn starts(len: usize, window: usize, overlap: usize) -> Vec<usize> {
    let stride = window - overlap;
    let mut out: Vec<usize> = (0..).map(|i| i * stride).take_while(|&s| s + window < len).collect();
    out.push(len - window);
    out.dedup();
    out
}

/// Sliding-window inference: final-output probabilities are averaged where
/// windows overlap, then reduced by argmax with ties to the lower class.
pub fn predict(model: &KTo1Model, image: &NdArray, window: &[usize], overlap: usize) -> Result<LabelMap> {
    let dims = image.spatial().to_vec();
    if window.len() != dims.len() {
        return Err(Error::Shape(format!("window {window:?} for image dims {dims:?}")));
    }
    if window.iter().any(|&w| overlap >= w) {
        return Err(Error::InvalidArgument(format!(
            "overlap {overlap} must be smaller than every window side {window:?}"
        )));
    }
    if window.iter().zip(&dims).any(|(w, d)| w > d) {
        return Err(Error::Shape(format!(
            "image dims {dims:?} are smaller than the window {window:?}; pad the image"
        )));
    }
    let axes: Vec<Vec<usize>> = dims
        .iter()
        .zip(window)
        .map(|(&d, &w)| starts(d, w, overlap))
        .collect();
    let mut origins: Vec<Vec<usize>> = vec![vec![]];
    for axis in &axes {
        origins = origins
            .into_iter()
            .flat_map(|o| {
                axis.iter().map(move |&s| {
                    let mut n = o.clone();
                    n.push(s);
                    n
                })
            })
            .collect();
    }

    let pixels: usize = dims.iter().product();
    let channels = image.channels();
    let classes = usize::from(model.spec().num_classes) + 1;
    let mut sum = vec![0.0; classes * pixels];
    let mut count = vec![0u32; pixels];
    let patch_of = |origin: &Vec<usize>| -> Result<(Vec<usize>, NdArray)> {
        let draw = AugmentDraw {
            offset: origin.clone(),
            window: window.to_vec(),
            quarter_turns: 0,
            flips: vec![false; dims.len()],
        };
        let (_, src) = source_indices(&dims, &draw);
        let mut data = Vec::with_capacity(channels * src.len());
        for c in 0..channels {
            let ch = image.channel(c);
            data.extend(src.iter().map(|&i| ch[i]));
        }
        let mut shape = vec![channels];
        shape.extend_from_slice(window);
        let probs = model.forward_all(&NdArray::new(shape, data)?)?.final_probs;
        Ok((src, probs))
    };
    #[cfg(feature = "parallel")]
    let patches: Vec<(Vec<usize>, NdArray)> = {
        use rayon::prelude::*;
        origins.par_iter().map(patch_of).collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let patches: Vec<(Vec<usize>, NdArray)> = origins.iter().map(patch_of).collect::<Result<_>>()?;

    for (src, probs) in &patches {
        let n = src.len();
        for (j, &i) in src.iter().enumerate() {
            count[i] += 1;
            for c in 0..classes {
                sum[c * pixels + i] += probs.data()[c * n + j];
            }
        }
    }
    for chunk in sum.chunks_mut(pixels) {
        for (v, &n) in chunk.iter_mut().zip(&count) {
            *v /= f64::from(n);
        }
    }
    let mut shape = vec![classes];
    shape.extend_from_slice(&dims);
    let labels = argmax_channels(&NdArray::new(shape, sum)?);
    LabelMap::new(dims, labels, model.spec().num_classes)
}
