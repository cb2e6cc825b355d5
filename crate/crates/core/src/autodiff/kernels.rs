//! Forward and backward kernels on plain arrays. The tape in [`super::tape`]
//! wires these together; they are kept free of tape bookkeeping so they can
//! be tested in isolation.

use serde::{Deserialize, Serialize};

use super::array::{Extent3, NdArray};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Padding {
    Same,
    Valid,
}

/// Resolved geometry of one convolution call.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ConvGeometry {
    pub cin: usize,
    pub cout: usize,
    pub input: Extent3,
    pub kernel: Extent3,
    pub output: Extent3,
    pub pad: Extent3,
}

pub(crate) fn conv_geometry(
    input: &NdArray,
    kernel: &NdArray,
    bias: &NdArray,
    padding: Padding,
) -> Result<ConvGeometry> {
    let in_spatial = input.spatial();
    let kshape = kernel.shape();
    if kshape.len() != in_spatial.len() + 2 {
        return Err(Error::Shape(format!(
            "kernel shape {kshape:?} does not match input spatial rank {} (expected [out, in, k..])",
            in_spatial.len()
        )));
    }
    let cout = kshape[0];
    let cin = kshape[1];
    if cin != input.channels() {
        return Err(Error::Shape(format!(
            "kernel expects {cin} input channels, input has {}",
            input.channels()
        )));
    }
    if bias.len() != cout {
        return Err(Error::Shape(format!(
            "bias has {} entries for {cout} output channels",
            bias.len()
        )));
    }
    let ksp = &kshape[2..];
    if let Some(k) = ksp.iter().find(|k| *k % 2 == 0) {
        return Err(Error::Shape(format!(
            "kernel spatial dims {ksp:?} must be odd (found {k})"
        )));
    }
    let inp = Extent3::from_spatial(in_spatial)?;
    let ker = Extent3::from_spatial(ksp)?;
    let (pad, output) = match padding {
        Padding::Same => (
            Extent3 {
                d: ker.d / 2,
                h: ker.h / 2,
                w: ker.w / 2,
            },
            inp,
        ),
        Padding::Valid => {
            if ker.d > inp.d || ker.h > inp.h || ker.w > inp.w {
                return Err(Error::Shape(format!(
                    "kernel {ksp:?} larger than input {in_spatial:?} under valid padding"
                )));
            }
            (
                Extent3 { d: 0, h: 0, w: 0 },
                Extent3 {
                    d: inp.d - ker.d + 1,
                    h: inp.h - ker.h + 1,
                    w: inp.w - ker.w + 1,
                },
            )
        }
    };
    Ok(ConvGeometry {
        cin,
        cout,
        input: inp,
        kernel: ker,
        output,
        pad,
    })
}

impl ConvGeometry {
    fn output_shape(&self, rank3: bool) -> Vec<usize> {
        if rank3 {
            vec![self.cout, self.output.d, self.output.h, self.output.w]
        } else {
            vec![self.cout, self.output.h, self.output.w]
        }
    }

    /// Visits every (kernel tap, output row) pair that touches the input,
    /// handing the callback flat offsets of the output row, the input row
    /// and the overlapping x-range.
    #[inline]
    fn for_each_row(&self, mut f: impl FnMut(usize, usize, usize, usize)) {
        let (o, i, k, p) = (self.output, self.input, self.kernel, self.pad);
        for a in 0..k.d {
            for b in 0..k.h {
                for c in 0..k.w {
                    let tap = (a * k.h + b) * k.w + c;
                    // x range where 0 <= x + c - p.w < i.w
                    let x0 = p.w.saturating_sub(c);
                    let x1 = o.w.min((i.w + p.w).saturating_sub(c));
                    if x0 >= x1 {
                        continue;
                    }
                    for z in 0..o.d {
                        let iz = z + a;
                        if iz < p.d || iz - p.d >= i.d {
                            continue;
                        }
                        let iz = iz - p.d;
                        for y in 0..o.h {
                            let iy = y + b;
                            if iy < p.h || iy - p.h >= i.h {
                                continue;
                            }
                            let iy = iy - p.h;
                            let out_row = (z * o.h + y) * o.w;
                            let in_row = (iz * i.h + iy) * i.w + x0 + c - p.w;
                            f(tap, out_row + x0, in_row, x1 - x0);
                        }
                    }
                }
            }
        }
    }
}

pub(crate) fn conv_forward(
    input: &NdArray,
    kernel: &NdArray,
    bias: &NdArray,
    padding: Padding,
) -> Result<NdArray> {
    let g = conv_geometry(input, kernel, bias, padding)?;
    let in_plane = g.input.len();
    let out_plane = g.output.len();
    let taps = g.kernel.len();
    let mut out = vec![0.0; g.cout * out_plane];
    let x = input.data();
    let kd = kernel.data();
    for oc in 0..g.cout {
        let dst = &mut out[oc * out_plane..(oc + 1) * out_plane];
        dst.fill(bias.data()[oc]);
        for ic in 0..g.cin {
            let src = &x[ic * in_plane..(ic + 1) * in_plane];
            let wbase = (oc * g.cin + ic) * taps;
            g.for_each_row(|tap, o, i, n| {
                let wv = kd[wbase + tap];
                for (d, s) in dst[o..o + n].iter_mut().zip(&src[i..i + n]) {
                    *d += wv * s;
                }
            });
        }
    }
    NdArray::new(g.output_shape(input.spatial().len() == 3), out)
}

/// Returns gradients with respect to (input, kernel, bias).
pub(crate) fn conv_backward(
    input: &NdArray,
    kernel: &NdArray,
    bias: &NdArray,
    padding: Padding,
    grad_out: &NdArray,
) -> Result<(NdArray, NdArray, NdArray)> {
    let g = conv_geometry(input, kernel, bias, padding)?;
    let in_plane = g.input.len();
    let out_plane = g.output.len();
    let taps = g.kernel.len();
    let x = input.data();
    let kd = kernel.data();
    let go = grad_out.data();
    let mut gx = vec![0.0; x.len()];
    let mut gk = vec![0.0; kd.len()];
    let mut gb = vec![0.0; g.cout];
    for oc in 0..g.cout {
        let gsrc = &go[oc * out_plane..(oc + 1) * out_plane];
        gb[oc] = gsrc.iter().sum();
        for ic in 0..g.cin {
            let src = &x[ic * in_plane..(ic + 1) * in_plane];
            let gdst = &mut gx[ic * in_plane..(ic + 1) * in_plane];
            let wbase = (oc * g.cin + ic) * taps;
            g.for_each_row(|tap, o, i, n| {
                let wv = kd[wbase + tap];
                let gslice = &gsrc[o..o + n];
                let mut acc = 0.0;
                for ((gd, s), gv) in gdst[i..i + n].iter_mut().zip(&src[i..i + n]).zip(gslice) {
                    *gd += wv * gv;
                    acc += gv * s;
                }
                gk[wbase + tap] += acc;
            });
        }
    }
    Ok((
        NdArray::new(input.shape().to_vec(), gx)?,
        NdArray::new(kernel.shape().to_vec(), gk)?,
        NdArray::new(bias.shape().to_vec(), gb)?,
    ))
}

/// NaN passes through so a diverging run cannot hide behind the clamp.
pub(crate) fn relu_forward(input: &NdArray) -> NdArray {
    let data = input.data().iter().map(|&v| if v < 0.0 { 0.0 } else { v }).collect();
    NdArray::new(input.shape().to_vec(), data).expect("same shape")
}

/// Subgradient at exactly zero is taken as 0.
pub(crate) fn relu_backward(input: &NdArray, grad_out: &NdArray) -> NdArray {
    let data = input
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&x, &g)| if x > 0.0 { g } else { 0.0 })
        .collect();
    NdArray::new(input.shape().to_vec(), data).expect("same shape")
}

fn pool_factors(spatial: &[usize]) -> Extent3 {
    if spatial.len() == 3 {
        Extent3 { d: 2, h: 2, w: 2 }
    } else {
        Extent3 { d: 1, h: 2, w: 2 }
    }
}

/// 2x max-pool over every spatial dim. Returns the pooled array plus, for
/// each output element, the flat input index that won (first max on ties).
pub(crate) fn maxpool2_forward(input: &NdArray) -> Result<(NdArray, Vec<usize>)> {
    let sp = input.spatial();
    if let Some(d) = sp.iter().find(|d| *d % 2 != 0) {
        return Err(Error::Shape(format!(
            "downsample2 needs even spatial dims, got {sp:?} (dim {d})"
        )));
    }
    let e = Extent3::from_spatial(sp)?;
    let f = pool_factors(sp);
    let o = Extent3 {
        d: e.d / f.d,
        h: e.h / f.h,
        w: e.w / f.w,
    };
    let c = input.channels();
    let x = input.data();
    let mut out = Vec::with_capacity(c * o.len());
    let mut arg = Vec::with_capacity(c * o.len());
    for ch in 0..c {
        let base = ch * e.len();
        for z in 0..o.d {
            for y in 0..o.h {
                for xx in 0..o.w {
                    let mut best = f64::NEG_INFINITY;
                    let mut best_i = usize::MAX;
                    for a in 0..f.d {
                        for b in 0..f.h {
                            for cc in 0..f.w {
                                let i = base
                                    + ((z * f.d + a) * e.h + y * f.h + b) * e.w
                                    + xx * f.w
                                    + cc;
                                if best_i == usize::MAX || x[i] > best {
                                    best = x[i];
                                    best_i = i;
                                }
                            }
                        }
                    }
                    out.push(best);
                    arg.push(best_i);
                }
            }
        }
    }
    let mut shape = vec![c];
    shape.extend(sp.iter().map(|d| d / 2));
    Ok((NdArray::new(shape, out)?, arg))
}

pub(crate) fn maxpool2_backward(input_shape: &[usize], argmax: &[usize], grad_out: &NdArray) -> NdArray {
    let mut g = NdArray::zeros(input_shape);
    let gd = g.data_mut();
    for (&i, &v) in argmax.iter().zip(grad_out.data()) {
        gd[i] += v;
    }
    g
}

/// Nearest-neighbour 2x replication along every spatial dim.
pub(crate) fn upsample2_forward(input: &NdArray) -> Result<NdArray> {
    let sp = input.spatial();
    let e = Extent3::from_spatial(sp)?;
    let f = pool_factors(sp);
    let o = Extent3 {
        d: e.d * f.d,
        h: e.h * f.h,
        w: e.w * f.w,
    };
    let c = input.channels();
    let x = input.data();
    let mut out = Vec::with_capacity(c * o.len());
    for ch in 0..c {
        let base = ch * e.len();
        for z in 0..o.d {
            for y in 0..o.h {
                let row = base + ((z / f.d) * e.h + y / f.h) * e.w;
                out.extend((0..o.w).map(|xx| x[row + xx / f.w]));
            }
        }
    }
    let mut shape = vec![c];
    shape.extend(sp.iter().map(|d| d * 2));
    NdArray::new(shape, out)
}

pub(crate) fn upsample2_backward(input_shape: &[usize], grad_out: &NdArray) -> NdArray {
    let sp = &input_shape[1..];
    let e = Extent3::from_spatial(sp).expect("validated in forward");
    let f = pool_factors(sp);
    let (oh, ow) = (e.h * f.h, e.w * f.w);
    let od = e.d * f.d;
    let mut g = NdArray::zeros(input_shape);
    let gd = g.data_mut();
    let go = grad_out.data();
    for ch in 0..input_shape[0] {
        let ibase = ch * e.len();
        let obase = ch * od * oh * ow;
        for z in 0..od {
            for y in 0..oh {
                let row = ibase + ((z / f.d) * e.h + y / f.h) * e.w;
                let orow = obase + (z * oh + y) * ow;
                for xx in 0..ow {
                    gd[row + xx / f.w] += go[orow + xx];
                }
            }
        }
    }
    g
}

pub(crate) fn concat_forward(inputs: &[&NdArray]) -> Result<NdArray> {
    let first = inputs
        .first()
        .ok_or_else(|| Error::InvalidArgument("channel_concat of zero arrays".into()))?;
    let sp = first.spatial();
    let mut channels = 0;
    let mut data = Vec::new();
    for (i, a) in inputs.iter().enumerate() {
        if a.spatial() != sp {
            return Err(Error::Shape(format!(
                "channel_concat input {i} has spatial dims {:?}, expected {sp:?}",
                a.spatial()
            )));
        }
        channels += a.channels();
        data.extend_from_slice(a.data());
    }
    let mut shape = vec![channels];
    shape.extend_from_slice(sp);
    NdArray::new(shape, data)
}

/// Per-pixel softmax over the channel dim.
pub(crate) fn softmax_forward(logits: &NdArray) -> NdArray {
    let c = logits.channels();
    let n = logits.spatial_len();
    let x = logits.data();
    let mut out = vec![0.0; x.len()];
    for p in 0..n {
        let mut m = f64::NEG_INFINITY;
        for ch in 0..c {
            m = m.max(x[ch * n + p]);
        }
        let mut s = 0.0;
        for ch in 0..c {
            let e = (x[ch * n + p] - m).exp();
            out[ch * n + p] = e;
            s += e;
        }
        for ch in 0..c {
            out[ch * n + p] /= s;
        }
    }
    NdArray::new(logits.shape().to_vec(), out).expect("same shape")
}

pub(crate) fn softmax_backward(probs: &NdArray, grad_out: &NdArray) -> NdArray {
    let c = probs.channels();
    let n = probs.spatial_len();
    let p = probs.data();
    let g = grad_out.data();
    let mut out = vec![0.0; p.len()];
    for px in 0..n {
        let dot: f64 = (0..c).map(|ch| p[ch * n + px] * g[ch * n + px]).sum();
        for ch in 0..c {
            let i = ch * n + px;
            out[i] = p[i] * (g[i] - dot);
        }
    }
    NdArray::new(probs.shape().to_vec(), out).expect("same shape")
}

pub(crate) fn check_targets(logits: &NdArray, target: &[u8]) -> Result<()> {
    if target.len() != logits.spatial_len() {
        return Err(Error::Shape(format!(
            "target has {} pixels, logits have spatial dims {:?}",
            target.len(),
            logits.spatial()
        )));
    }
    let c = logits.channels();
    if let Some((i, t)) = target.iter().enumerate().find(|(_, t)| usize::from(**t) >= c) {
        return Err(Error::InvalidArgument(format!(
            "target value {t} at pixel {i} is not below the channel count {c}"
        )));
    }
    Ok(())
}

/// Mean over pixels of -log softmax(logits)[target]; also returns the
/// softmax probabilities for the backward pass.
pub(crate) fn cross_entropy_forward(logits: &NdArray, target: &[u8]) -> Result<(f64, NdArray)> {
    check_targets(logits, target)?;
    let c = logits.channels();
    let n = logits.spatial_len();
    let x = logits.data();
    let mut probs = vec![0.0; x.len()];
    let mut total = 0.0;
    for (p, &t) in target.iter().enumerate() {
        let mut m = f64::NEG_INFINITY;
        for ch in 0..c {
            m = m.max(x[ch * n + p]);
        }
        let mut s = 0.0;
        for ch in 0..c {
            let e = (x[ch * n + p] - m).exp();
            probs[ch * n + p] = e;
            s += e;
        }
        for ch in 0..c {
            probs[ch * n + p] /= s;
        }
        total += m + s.ln() - x[usize::from(t) * n + p];
    }
    Ok((
        total / n as f64,
        NdArray::new(logits.shape().to_vec(), probs)?,
    ))
}

pub(crate) fn cross_entropy_backward(probs: &NdArray, target: &[u8], grad_out: f64) -> NdArray {
    let n = probs.spatial_len();
    let scale = grad_out / n as f64;
    let mut g: Vec<f64> = probs.data().iter().map(|p| p * scale).collect();
    for (p, &t) in target.iter().enumerate() {
        g[usize::from(t) * n + p] -= scale;
    }
    NdArray::new(probs.shape().to_vec(), g).expect("same shape")
}
