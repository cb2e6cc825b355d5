use serde::{Deserialize, Serialize};

use crate::decomposition::LabelMap;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryMask {
    dims: Vec<usize>,
    values: Vec<bool>,
}

impl BinaryMask {
    pub fn new(dims: Vec<usize>, values: Vec<bool>) -> Result<Self> {
        let n: usize = dims.iter().product();
        if dims.is_empty() || n != values.len() {
            return Err(Error::Shape(format!(
                "mask dims {dims:?} do not match {} values",
                values.len()
            )));
        }
        Ok(Self { dims, values })
    }

    pub fn empty(dims: Vec<usize>) -> Self {
        let n = dims.iter().product();
        Self {
            dims,
            values: vec![false; n],
        }
    }

    pub fn from_indices(dims: Vec<usize>, indices: &[usize]) -> Self {
        let mut m = Self::empty(dims);
        for &i in indices {
            m.values[i] = true;
        }
        m
    }

    /// Pixels equal to `class`.
    pub fn from_class(map: &LabelMap, class: u8) -> Self {
        Self {
            dims: map.dims().to_vec(),
            values: map.labels().iter().map(|&v| v == class).collect(),
        }
    }

    /// Pixels with any foreground label.
    pub fn foreground(map: &LabelMap) -> Self {
        Self {
            dims: map.dims().to_vec(),
            values: map.labels().iter().map(|&v| v != 0).collect(),
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn values(&self) -> &[bool] {
        &self.values
    }

    pub fn count(&self) -> usize {
        self.values.iter().filter(|v| **v).count()
    }

    pub fn is_blank(&self) -> bool {
        !self.values.iter().any(|v| *v)
    }

    pub fn coords(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.dims.len()];
        for (slot, &d) in out.iter_mut().zip(&self.dims).rev() {
            *slot = index % d;
            index /= d;
        }
        out
    }

    pub(crate) fn check_same_dims(&self, other: &BinaryMask) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::Shape(format!(
                "mask dims differ: {:?} vs {:?}",
                self.dims, other.dims
            )));
        }
        Ok(())
    }
}
