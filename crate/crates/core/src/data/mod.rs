//! Samples, file formats, augmentation and synthetic datasets.

mod augment;
mod io;
mod manifest;
mod sample;
mod synth;

pub use augment::{apply, augment, augment_with_rng, draw_transform, source_indices, AugmentDraw, AugmentationConfig};
pub use io::{load_label_map, load_sample, sample_paths, save_label_map, save_sample, DimsKind, RawDtype, RawHeader};
pub use manifest::{DatasetManifest, Split, Splits};
pub use sample::Sample;
pub use synth::{
    synth_correlated_classes, synth_correlated_classes_with, synth_count_mix, synth_count_mix_with,
    synth_shape_mix, synth_shape_mix_with, CorrelatedConfig, CountMixConfig, IntensityModel,
    ObjectRecord, ShapeKind, ShapeMixConfig, SynthSample,
};
