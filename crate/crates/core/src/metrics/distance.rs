//! Boundary extraction and boundary-distance metrics (ADB, Hausdorff).
//!
//! Nearest distances come from an exact squared Euclidean distance
//! transform, so every per-pixel distance is `sqrt` of an exact integer and
//! matches an all-pairs scan bit for bit.

use super::mask::BinaryMask;
use crate::error::{Error, Result};

/// Foreground pixels with at least one background or out-of-bounds face
/// neighbour, as ascending flat indices.
pub fn boundary_extract(mask: &BinaryMask) -> Vec<usize> {
    let dims = mask.dims();
    let v = mask.values();
    let mut strides = vec![1usize; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * dims[k + 1];
    }
    let mut out = Vec::new();
    for i in 0..v.len() {
        if !v[i] {
            continue;
        }
        let on_boundary = dims.iter().zip(&strides).any(|(&d, &s)| {
            let c = (i / s) % d;
            c == 0 || c + 1 == d || !v[i - s] || !v[i + s]
        });
        if on_boundary {
            out.push(i);
        }
    }
    out
}

const FAR: i64 = i64::MAX / 4;

/// 1D lower envelope of parabolas (Felzenszwalb & Huttenlocher) over a
/// strided line of `f`, written back in place.
fn edt_line(
    f: &mut [i64],
    (start, stride, n): (usize, usize, usize),
    v: &mut Vec<usize>,
    z: &mut Vec<f64>,
    scratch: &mut Vec<i64>,
) {
    scratch.clear();
    scratch.extend((0..n).map(|q| f[start + q * stride]));
    v.clear();
    z.clear();
    for q in 0..n {
        if scratch[q] >= FAR {
            continue;
        }
        let fq = (scratch[q] + (q * q) as i64) as f64;
        loop {
            let Some(&p) = v.last() else {
                v.push(q);
                z.push(f64::NEG_INFINITY);
                break;
            };
            let fp = (scratch[p] + (p * p) as i64) as f64;
            let s = (fq - fp) / (2.0 * (q as f64 - p as f64));
            if s <= *z.last().unwrap() {
                v.pop();
                z.pop();
            } else {
                v.push(q);
                z.push(s);
                break;
            }
        }
    }
    if v.is_empty() {
        return;
    }
    let mut k = 0;
    for q in 0..n {
        while k + 1 < v.len() && z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        let d = q as i64 - p as i64;
        f[start + q * stride] = d * d + scratch[p];
    }
}

/// Squared distance from every pixel to the nearest pixel in `sites`.
pub(crate) fn squared_distance_transform(dims: &[usize], sites: &[usize]) -> Vec<i64> {
    let n: usize = dims.iter().product();
    let mut f = vec![FAR; n];
    for &s in sites {
        f[s] = 0;
    }
    let mut strides = vec![1usize; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * dims[k + 1];
    }
    let (mut v, mut z, mut scratch) = (Vec::new(), Vec::new(), Vec::new());
    for (&len, &stride) in dims.iter().zip(&strides) {
        // every line along this axis starts at an index whose coordinate on
        // the axis is zero
        for start in 0..n {
            if (start / stride) % len != 0 {
                continue;
            }
            edt_line(&mut f, (start, stride, len), &mut v, &mut z, &mut scratch);
        }
    }
    f
}

/// Distances from each pixel of `from` to the nearest pixel of `to`, in
/// the order of `from`.
pub(crate) fn nearest_distances(dims: &[usize], from: &[usize], to: &[usize]) -> Vec<f64> {
    let dt = squared_distance_transform(dims, to);
    from.iter().map(|&i| (dt[i] as f64).sqrt()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectedDistances {
    pub mean: f64,
    pub max: f64,
}

fn summarize(d: &[f64]) -> DirectedDistances {
    let sum: f64 = d.iter().sum();
    let max = d.iter().copied().fold(0.0, f64::max);
    DirectedDistances {
        mean: sum / d.len() as f64,
        max,
    }
}

fn boundaries(a: &BinaryMask, b: &BinaryMask) -> Result<(Vec<usize>, Vec<usize>)> {
    a.check_same_dims(b)?;
    if a.is_blank() || b.is_blank() {
        return Err(Error::Undefined(
            "boundary distance with an empty mask".into(),
        ));
    }
    Ok((boundary_extract(a), boundary_extract(b)))
}

/// (∂A → ∂B, ∂B → ∂A) nearest-distance summaries.
pub fn boundary_distances(a: &BinaryMask, b: &BinaryMask) -> Result<(DirectedDistances, DirectedDistances)> {
    let (ba, bb) = boundaries(a, b)?;
    let ab = nearest_distances(a.dims(), &ba, &bb);
    let ba_d = nearest_distances(a.dims(), &bb, &ba);
    Ok((summarize(&ab), summarize(&ba_d)))
}

/// Average symmetric boundary distance: the mean of the two directed mean
/// nearest distances.
pub fn adb(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    let (ab, ba) = boundary_distances(a, b)?;
    Ok((ab.mean + ba.mean) / 2.0)
}

/// Exact symmetric Hausdorff distance between boundaries.
pub fn hausdorff(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    let (ab, ba) = boundary_distances(a, b)?;
    Ok(ab.max.max(ba.max))
}
