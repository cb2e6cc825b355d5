use crate::autodiff::NdArray;
use crate::decomposition::LabelMap;
use crate::error::{Error, Result};

/// An (image, annotation) pair. The image has one channel with values in
/// [0, 1] and the same spatial dims as the label map.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: String,
    pub image: NdArray,
    pub label: LabelMap,
}

impl Sample {
    pub fn new(id: impl Into<String>, image: NdArray, label: LabelMap) -> Result<Self> {
        if image.spatial() != label.dims() {
            return Err(Error::Shape(format!(
                "image spatial dims {:?} differ from label dims {:?}",
                image.spatial(),
                label.dims()
            )));
        }
        Ok(Self {
            id: id.into(),
            image,
            label,
        })
    }

    pub fn dims(&self) -> &[usize] {
        self.label.dims()
    }
}
