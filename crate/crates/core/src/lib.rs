//! Decompose-and-integrate learning for multi-class segmentation.
//!
//! Annotation maps are split into sub-maps (per class, per object shape,
//! or by image-level object count). A K-to-1 network trains one small
//! segmentation module per sub-map and an integration module on top of
//! their outputs, all end to end under a composite cross-entropy loss.

pub mod autodiff;
pub mod data;
pub mod decomposition;
pub mod error;
pub mod metrics;
pub mod network;

pub use error::{Error, Result};
