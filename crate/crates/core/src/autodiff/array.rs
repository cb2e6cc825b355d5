use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense float64 array laid out channels-first, then 2 or 3 spatial dims.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NdArray {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl NdArray {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if shape.is_empty() || shape.contains(&0) {
            return Err(Error::Shape(format!("shape {shape:?} has an empty or zero dim")));
        }
        if expected != data.len() {
            return Err(Error::Shape(format!(
                "shape {shape:?} holds {expected} values but data has {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, 0.0)
    }

    pub fn full(shape: &[usize], value: f64) -> Self {
        let n = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![value; n],
        }
    }

    pub fn scalar(value: f64) -> Self {
        Self {
            shape: vec![1],
            data: vec![value],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_scalar(&self) -> bool {
        self.data.len() == 1
    }

    /// Channel count, i.e. the leading dim.
    pub fn channels(&self) -> usize {
        self.shape[0]
    }

    pub fn spatial(&self) -> &[usize] {
        &self.shape[1..]
    }

    pub fn spatial_len(&self) -> usize {
        self.shape[1..].iter().product()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub(crate) fn add_assign(&mut self, other: &NdArray) {
        debug_assert_eq!(self.shape, other.shape);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    /// Copies channels `start..end` into a new array.
    pub fn slice_channels(&self, start: usize, end: usize) -> Result<NdArray> {
        if start >= end || end > self.channels() {
            return Err(Error::Shape(format!(
                "channel range {start}..{end} out of bounds for {} channels",
                self.channels()
            )));
        }
        let plane = self.spatial_len();
        let mut shape = self.shape.clone();
        shape[0] = end - start;
        Ok(NdArray {
            shape,
            data: self.data[start * plane..end * plane].to_vec(),
        })
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let plane = self.spatial_len();
        &self.data[c * plane..(c + 1) * plane]
    }
}

/// Spatial extent normalized to (depth, height, width); 2D arrays have depth 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Extent3 {
    pub d: usize,
    pub h: usize,
    pub w: usize,
}

impl Extent3 {
    pub fn from_spatial(spatial: &[usize]) -> Result<Self> {
        match *spatial {
            [h, w] => Ok(Self { d: 1, h, w }),
            [d, h, w] => Ok(Self { d, h, w }),
            _ => Err(Error::Shape(format!(
                "expected 2 or 3 spatial dims, got {spatial:?}"
            ))),
        }
    }

    pub fn len(&self) -> usize {
        self.d * self.h * self.w
    }
}
