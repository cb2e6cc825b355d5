//! Annotation-map decomposition: per class, per object convexity, and by
//! image-level object count, plus the partition check every output must
//! pass.

mod components;
mod decompose;
mod hull;
mod label_map;

pub use components::{connected_components, Connectivity, ObjectComponent};
pub use decompose::{
    decompose, decompose_by_class, decompose_by_class_with, decompose_by_image_level,
    decompose_by_image_level_with, decompose_by_shape, decompose_by_shape_with, decompose_identity,
    decompose_with, verify_partition, DecompositionMethod, DecompositionResult, ObjectAssignment,
    PartitionReport, PartitionViolation, ShapeThreshold, DEFAULT_T_SHAPE,
};
pub use hull::{convex_hull, convexity_ratio, convexity_ratio_of_points, rasterized_area, GridPoint};
pub use label_map::LabelMap;
