use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Integer annotation map over 2 or 3 spatial dims. 0 is background;
/// 1..=num_classes are foreground classes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabelMap {
    dims: Vec<usize>,
    labels: Vec<u8>,
    num_classes: u8,
}

impl LabelMap {
    pub fn new(dims: Vec<usize>, labels: Vec<u8>, num_classes: u8) -> Result<Self> {
        if !(2..=3).contains(&dims.len()) || dims.contains(&0) {
            return Err(Error::UnsupportedDimension(format!(
                "label maps need 2 or 3 non-zero dims, got {dims:?}"
            )));
        }
        let n: usize = dims.iter().product();
        if n != labels.len() {
            return Err(Error::Shape(format!(
                "dims {dims:?} hold {n} pixels but {} labels were given",
                labels.len()
            )));
        }
        if num_classes == 0 {
            return Err(Error::InvalidArgument("num_classes must be at least 1".into()));
        }
        let map = Self {
            dims,
            labels,
            num_classes,
        };
        if let Some(i) = map.labels.iter().position(|&v| v > num_classes) {
            return Err(Error::LabelOutOfRange {
                value: map.labels[i],
                position: map.coords(i),
                num_classes,
            });
        }
        Ok(map)
    }

    pub fn background(dims: Vec<usize>, num_classes: u8) -> Result<Self> {
        let n = dims.iter().product();
        Self::new(dims, vec![0; n], num_classes)
    }

    pub fn from_rows(rows: &[&[u8]], num_classes: u8) -> Result<Self> {
        let h = rows.len();
        let w = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != w) {
            return Err(Error::Shape("ragged rows".into()));
        }
        Self::new(vec![h, w], rows.concat(), num_classes)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn num_classes(&self) -> u8 {
        self.num_classes
    }

    pub fn is_2d(&self) -> bool {
        self.dims.len() == 2
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn foreground_count(&self) -> usize {
        self.labels.iter().filter(|&&v| v != 0).count()
    }

    /// Row-major coordinates of a flat index.
    pub fn coords(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.dims.len()];
        for (slot, &d) in out.iter_mut().zip(&self.dims).rev() {
            *slot = index % d;
            index /= d;
        }
        out
    }

    pub fn index(&self, coords: &[usize]) -> usize {
        coords
            .iter()
            .zip(&self.dims)
            .fold(0, |acc, (&c, &d)| acc * d + c)
    }

    pub fn get(&self, coords: &[usize]) -> u8 {
        self.labels[self.index(coords)]
    }

    /// Same dims and class count, new labels. Values are re-validated.
    pub fn with_labels(&self, labels: Vec<u8>) -> Result<Self> {
        Self::new(self.dims.clone(), labels, self.num_classes)
    }

    pub(crate) fn with_labels_unchecked(&self, labels: Vec<u8>, num_classes: u8) -> Self {
        debug_assert_eq!(labels.len(), self.labels.len());
        Self {
            dims: self.dims.clone(),
            labels,
            num_classes,
        }
    }
}
