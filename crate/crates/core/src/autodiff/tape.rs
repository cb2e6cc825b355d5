//! Tape-based reverse-mode differentiation over [`NdArray`] values.
//!
//! Every op appends a node holding its forward value and whatever it needs
//! for the backward pass. Nodes only reference earlier nodes, so the tape is
//! always in topological order and [`Tape::backward`] is a single reverse
//! sweep.

use super::array::NdArray;
use super::kernels::{self, Padding};
use super::optim::Parameter;
use crate::error::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Input,
    Param(usize),
    Conv {
        input: usize,
        kernel: usize,
        bias: usize,
        padding: Padding,
    },
    Relu(usize),
    MaxPool {
        input: usize,
        argmax: Vec<usize>,
    },
    Upsample(usize),
    Concat(Vec<usize>),
    Softmax(usize),
    CrossEntropy {
        logits: usize,
        target: Vec<u8>,
        probs: NdArray,
    },
    Add(usize, usize),
    Scale(usize, f64),
    Sum(usize),
}

#[derive(Debug)]
struct Node {
    value: NdArray,
    op: Op,
    needs_grad: bool,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &NdArray {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: NdArray, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, ids: &[usize]) -> bool {
        ids.iter().any(|&i| self.nodes[i].needs_grad)
    }

    /// Constant input; no gradient flows into it.
    pub fn input(&mut self, value: NdArray) -> Var {
        self.push(value, Op::Input, false)
    }

    /// Leaf bound to parameter `id`; its gradient is reported under that id.
    pub fn param(&mut self, id: usize, p: &Parameter) -> Var {
        self.push(p.value.clone(), Op::Param(id), true)
    }

    pub fn conv(&mut self, input: Var, kernel: Var, bias: Var, padding: Padding) -> Result<Var> {
        let out = kernels::conv_forward(
            self.value(input),
            self.value(kernel),
            self.value(bias),
            padding,
        )?;
        let needs = self.needs(&[input.0, kernel.0, bias.0]);
        Ok(self.push(
            out,
            Op::Conv {
                input: input.0,
                kernel: kernel.0,
                bias: bias.0,
                padding,
            },
            needs,
        ))
    }

    pub fn relu(&mut self, input: Var) -> Var {
        let out = kernels::relu_forward(self.value(input));
        let needs = self.needs(&[input.0]);
        self.push(out, Op::Relu(input.0), needs)
    }

    /// 2x max-pool along every spatial dim.
    pub fn downsample2(&mut self, input: Var) -> Result<Var> {
        let (out, argmax) = kernels::maxpool2_forward(self.value(input))?;
        let needs = self.needs(&[input.0]);
        Ok(self.push(
            out,
            Op::MaxPool {
                input: input.0,
                argmax,
            },
            needs,
        ))
    }

    /// 2x nearest-neighbour upsampling along every spatial dim.
    pub fn upsample2(&mut self, input: Var) -> Result<Var> {
        let out = kernels::upsample2_forward(self.value(input))?;
        let needs = self.needs(&[input.0]);
        Ok(self.push(out, Op::Upsample(input.0), needs))
    }

    pub fn channel_concat(&mut self, inputs: &[Var]) -> Result<Var> {
        let arrays: Vec<&NdArray> = inputs.iter().map(|v| self.value(*v)).collect();
        let out = kernels::concat_forward(&arrays)?;
        let ids: Vec<usize> = inputs.iter().map(|v| v.0).collect();
        let needs = self.needs(&ids);
        Ok(self.push(out, Op::Concat(ids), needs))
    }

    pub fn softmax(&mut self, logits: Var) -> Var {
        let out = kernels::softmax_forward(self.value(logits));
        let needs = self.needs(&[logits.0]);
        self.push(out, Op::Softmax(logits.0), needs)
    }

    /// Pixel-mean softmax cross entropy against integer class targets.
    pub fn cross_entropy(&mut self, logits: Var, target: &[u8]) -> Result<Var> {
        let (loss, probs) = kernels::cross_entropy_forward(self.value(logits), target)?;
        let needs = self.needs(&[logits.0]);
        Ok(self.push(
            NdArray::scalar(loss),
            Op::CrossEntropy {
                logits: logits.0,
                target: target.to_vec(),
                probs,
            },
            needs,
        ))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape() != vb.shape() {
            return Err(Error::Shape(format!(
                "add of {:?} and {:?}",
                va.shape(),
                vb.shape()
            )));
        }
        let mut out = va.clone();
        out.add_assign(vb);
        let needs = self.needs(&[a.0, b.0]);
        Ok(self.push(out, Op::Add(a.0, b.0), needs))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let mut out = self.value(a).clone();
        out.data_mut().iter_mut().for_each(|v| *v *= factor);
        let needs = self.needs(&[a.0]);
        self.push(out, Op::Scale(a.0, factor), needs)
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().sum();
        let needs = self.needs(&[a.0]);
        self.push(NdArray::scalar(s), Op::Sum(a.0), needs)
    }

    /// Reverse sweep from a scalar node.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let root = &self.nodes[loss.0];
        if !root.value.is_scalar() {
            return Err(Error::Shape(format!(
                "backward needs a scalar loss, got shape {:?}",
                root.value.shape()
            )));
        }
        let mut grads: Vec<Option<NdArray>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(NdArray::scalar(1.0));

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.needs_grad {
                grads[i] = Some(g);
                continue;
            }
            match &node.op {
                Op::Input | Op::Param(_) => {}
                Op::Conv {
                    input,
                    kernel,
                    bias,
                    padding,
                } => {
                    let (gi, gk, gb) = kernels::conv_backward(
                        &self.nodes[*input].value,
                        &self.nodes[*kernel].value,
                        &self.nodes[*bias].value,
                        *padding,
                        &g,
                    )?;
                    self.accumulate(&mut grads, *input, gi);
                    self.accumulate(&mut grads, *kernel, gk);
                    self.accumulate(&mut grads, *bias, gb);
                }
                Op::Relu(x) => {
                    let gx = kernels::relu_backward(&self.nodes[*x].value, &g);
                    self.accumulate(&mut grads, *x, gx);
                }
                Op::MaxPool { input, argmax } => {
                    let gx =
                        kernels::maxpool2_backward(self.nodes[*input].value.shape(), argmax, &g);
                    self.accumulate(&mut grads, *input, gx);
                }
                Op::Upsample(x) => {
                    let gx = kernels::upsample2_backward(self.nodes[*x].value.shape(), &g);
                    self.accumulate(&mut grads, *x, gx);
                }
                Op::Concat(ids) => {
                    let mut start = 0;
                    for &id in ids {
                        let c = self.nodes[id].value.channels();
                        let part = g.slice_channels(start, start + c)?;
                        start += c;
                        self.accumulate(&mut grads, id, part);
                    }
                }
                Op::Softmax(x) => {
                    let gx = kernels::softmax_backward(&node.value, &g);
                    self.accumulate(&mut grads, *x, gx);
                }
                Op::CrossEntropy {
                    logits,
                    target,
                    probs,
                } => {
                    let gx = kernels::cross_entropy_backward(probs, target, g.data()[0]);
                    self.accumulate(&mut grads, *logits, gx);
                }
                Op::Add(a, b) => {
                    self.accumulate(&mut grads, *a, g.clone());
                    self.accumulate(&mut grads, *b, g.clone());
                }
                Op::Scale(a, f) => {
                    let mut ga = g.clone();
                    ga.data_mut().iter_mut().for_each(|v| *v *= f);
                    self.accumulate(&mut grads, *a, ga);
                }
                Op::Sum(a) => {
                    let ga = NdArray::full(self.nodes[*a].value.shape(), g.data()[0]);
                    self.accumulate(&mut grads, *a, ga);
                }
            }
            grads[i] = Some(g);
        }

        let params = self
            .nodes
            .iter()
            .enumerate()
            .filter_map(|(i, n)| match n.op {
                Op::Param(id) => Some((id, i)),
                _ => None,
            })
            .collect();
        Ok(Gradients { grads, params })
    }

    fn accumulate(&self, grads: &mut [Option<NdArray>], id: usize, g: NdArray) {
        if !self.nodes[id].needs_grad {
            return;
        }
        match &mut grads[id] {
            Some(existing) => existing.add_assign(&g),
            slot @ None => *slot = Some(g),
        }
    }
}

/// Result of a backward sweep.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<NdArray>>,
    params: Vec<(usize, usize)>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&NdArray> {
        self.grads[v.0].as_ref()
    }

    /// Adds each parameter leaf's gradient into `params[id].grad`. Leaves the
    /// loss did not reach contribute nothing.
    pub fn accumulate_into(&self, params: &mut [Parameter]) {
        for &(id, node) in &self.params {
            if let Some(g) = &self.grads[node] {
                params[id].grad.add_assign(g);
            }
        }
    }

    /// Same as [`Gradients::accumulate_into`] but into bare arrays indexed
    /// by parameter id.
    pub fn accumulate_into_arrays(&self, grads: &mut [NdArray]) {
        for &(id, node) in &self.params {
            if let Some(g) = &self.grads[node] {
                grads[id].add_assign(g);
            }
        }
    }
}
