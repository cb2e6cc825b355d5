use serde::{Deserialize, Serialize};

use super::components::{connected_components, Connectivity, ObjectComponent};
use super::hull::convexity_ratio;
use super::label_map::LabelMap;
use crate::error::{Error, Result};

pub const DEFAULT_T_SHAPE: f64 = 0.9;

/// Convexity threshold in (0, 1]. Objects with ratio strictly above it are
/// convex-like.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct ShapeThreshold(f64);

impl ShapeThreshold {
    pub fn new(t: f64) -> Result<Self> {
        if t > 0.0 && t <= 1.0 {
            Ok(Self(t))
        } else {
            Err(Error::InvalidArgument(format!(
                "shape threshold must lie in (0, 1], got {t}"
            )))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl Default for ShapeThreshold {
    fn default() -> Self {
        Self(DEFAULT_T_SHAPE)
    }
}

impl TryFrom<f64> for ShapeThreshold {
    type Error = Error;
    fn try_from(t: f64) -> Result<Self> {
        Self::new(t)
    }
}

impl From<ShapeThreshold> for f64 {
    fn from(t: ShapeThreshold) -> f64 {
        t.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum DecompositionMethod {
    /// One binary map per foreground class.
    Class,
    /// Convex-like objects vs concave-like objects.
    Shape { t_shape: ShapeThreshold },
    /// Whole map routed by object count: single object vs several.
    ImageLevel,
    /// `copies` sub-maps that all equal the source (the no-decomposition
    /// ablation).
    Identity { copies: usize },
}

impl DecompositionMethod {
    pub fn name(&self) -> &'static str {
        match self {
            DecompositionMethod::Class => "class",
            DecompositionMethod::Shape { .. } => "shape",
            DecompositionMethod::ImageLevel => "image_level",
            DecompositionMethod::Identity { .. } => "identity",
        }
    }

    /// Number of sub-maps produced for a source with `num_classes` classes.
    pub fn sub_map_count(&self, num_classes: u8) -> usize {
        match self {
            DecompositionMethod::Class => usize::from(num_classes),
            DecompositionMethod::Shape { .. } | DecompositionMethod::ImageLevel => 2,
            DecompositionMethod::Identity { copies } => *copies,
        }
    }

    /// Softmax channels a module needs to model one sub-map: class sub-maps
    /// are binary, every other method keeps the source labels.
    pub fn sub_problem_channels(&self, num_classes: u8) -> usize {
        match self {
            DecompositionMethod::Class => 2,
            _ => usize::from(num_classes) + 1,
        }
    }
}

/// Where one source object ended up.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectAssignment {
    pub component: usize,
    pub label: u8,
    pub anchor: Vec<usize>,
    pub size: usize,
    pub sub_map: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub convexity_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionResult {
    pub method: DecompositionMethod,
    pub sub_maps: Vec<LabelMap>,
    pub assignments: Vec<ObjectAssignment>,
}

fn assignment(c: &ObjectComponent, sub_map: usize, ratio: Option<f64>) -> ObjectAssignment {
    ObjectAssignment {
        component: c.id,
        label: c.label,
        anchor: c.anchor(),
        size: c.len(),
        sub_map,
        convexity_ratio: ratio,
    }
}

/// Sub-map `k` is 1 exactly where the source equals class `k + 1`.
pub fn decompose_by_class(map: &LabelMap) -> Result<DecompositionResult> {
    decompose_by_class_with(map, Connectivity::default_for(map.dims().len()))
}

pub fn decompose_by_class_with(map: &LabelMap, connectivity: Connectivity) -> Result<DecompositionResult> {
    let sub_maps = (1..=map.num_classes())
        .map(|k| {
            let bin = map.labels().iter().map(|&v| u8::from(v == k)).collect();
            map.with_labels_unchecked(bin, 1)
        })
        .collect();
    let assignments = connected_components(map, connectivity)?
        .iter()
        .map(|c| assignment(c, usize::from(c.label) - 1, None))
        .collect();
    Ok(DecompositionResult {
        method: DecompositionMethod::Class,
        sub_maps,
        assignments,
    })
}

/// Sub-map 0 holds convex-like objects (ratio > t), sub-map 1 the rest.
/// Objects keep their class labels.
pub fn decompose_by_shape(map: &LabelMap, t: ShapeThreshold) -> Result<DecompositionResult> {
    decompose_by_shape_with(map, t, Connectivity::default_for(map.dims().len()))
}

pub fn decompose_by_shape_with(
    map: &LabelMap,
    t: ShapeThreshold,
    connectivity: Connectivity,
) -> Result<DecompositionResult> {
    if !map.is_2d() {
        return Err(Error::UnsupportedDimension(format!(
            "shape decomposition is 2D only, got dims {:?}",
            map.dims()
        )));
    }
    let mut convex = vec![0u8; map.len()];
    let mut concave = vec![0u8; map.len()];
    let mut assignments = Vec::new();
    for c in connected_components(map, connectivity)? {
        let ratio = convexity_ratio(&c)?;
        let (target, idx) = if ratio > t.value() {
            (&mut convex, 0)
        } else {
            (&mut concave, 1)
        };
        for &i in &c.indices {
            target[i] = c.label;
        }
        assignments.push(assignment(&c, idx, Some(ratio)));
    }
    let k = map.num_classes();
    Ok(DecompositionResult {
        method: DecompositionMethod::Shape { t_shape: t },
        sub_maps: vec![
            map.with_labels_unchecked(convex, k),
            map.with_labels_unchecked(concave, k),
        ],
        assignments,
    })
}

/// (single-object map, multiple-object map). A map with exactly one object
/// goes to the first slot, two or more to the second, none leaves both
/// empty.
pub fn decompose_by_image_level(map: &LabelMap) -> Result<DecompositionResult> {
    decompose_by_image_level_with(map, Connectivity::default_for(map.dims().len()))
}

pub fn decompose_by_image_level_with(
    map: &LabelMap,
    connectivity: Connectivity,
) -> Result<DecompositionResult> {
    let comps = connected_components(map, connectivity)?;
    let k = map.num_classes();
    let empty = map.with_labels_unchecked(vec![0; map.len()], k);
    let (sub_maps, slot) = match comps.len() {
        0 => (vec![empty.clone(), empty], 0),
        1 => (vec![map.clone(), empty], 0),
        _ => (vec![empty, map.clone()], 1),
    };
    Ok(DecompositionResult {
        method: DecompositionMethod::ImageLevel,
        sub_maps,
        assignments: comps.iter().map(|c| assignment(c, slot, None)).collect(),
    })
}

pub fn decompose_identity(map: &LabelMap, copies: usize) -> Result<DecompositionResult> {
    if copies == 0 {
        return Err(Error::InvalidArgument(
            "identity decomposition needs at least one copy".into(),
        ));
    }
    let comps = connected_components(map, Connectivity::default_for(map.dims().len()))?;
    Ok(DecompositionResult {
        method: DecompositionMethod::Identity { copies },
        sub_maps: vec![map.clone(); copies],
        assignments: comps.iter().map(|c| assignment(c, 0, None)).collect(),
    })
}

pub fn decompose(map: &LabelMap, method: &DecompositionMethod) -> Result<DecompositionResult> {
    decompose_with(map, method, Connectivity::default_for(map.dims().len()))
}

pub fn decompose_with(
    map: &LabelMap,
    method: &DecompositionMethod,
    connectivity: Connectivity,
) -> Result<DecompositionResult> {
    match method {
        DecompositionMethod::Class => decompose_by_class_with(map, connectivity),
        DecompositionMethod::Shape { t_shape } => decompose_by_shape_with(map, *t_shape, connectivity),
        DecompositionMethod::ImageLevel => decompose_by_image_level_with(map, connectivity),
        DecompositionMethod::Identity { copies } => decompose_identity(map, *copies),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionViolation {
    pub position: Vec<usize>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionReport {
    pub valid: bool,
    /// First few violations; `valid` reflects all of them.
    pub violations: Vec<PartitionViolation>,
}

const MAX_REPORTED_VIOLATIONS: usize = 16;

/// Checks that every foreground pixel of `source` lands in exactly one
/// sub-map with its source label, and nothing else does. Class sub-maps are
/// binary, so a 1 in sub-map `k` stands for label `k + 1`. Identity results
/// are checked for every copy equalling the source instead.
pub fn verify_partition(source: &LabelMap, result: &DecompositionResult) -> PartitionReport {
    let mut found = Violations::default();

    let expected = result.method.sub_map_count(source.num_classes());
    if result.sub_maps.len() != expected {
        found.push(
            vec![],
            format!("expected {expected} sub-maps, found {}", result.sub_maps.len()),
        );
    }
    for (k, s) in result.sub_maps.iter().enumerate() {
        if s.dims() != source.dims() {
            found.push(vec![], format!("sub-map {k} has dims {:?}, source {:?}", s.dims(), source.dims()));
        }
    }
    if found.count > 0 {
        return found.into_report();
    }

    let is_class = matches!(result.method, DecompositionMethod::Class);
    if let DecompositionMethod::Identity { .. } = result.method {
        for (k, s) in result.sub_maps.iter().enumerate() {
            if let Some(i) = (0..source.len()).find(|&i| s.labels()[i] != source.labels()[i]) {
                found.push(source.coords(i), format!("identity copy {k} differs from the source"));
            }
        }
    } else {
        for (i, &src) in source.labels().iter().enumerate() {
            let mut owners = 0usize;
            let mut recovered = 0u8;
            let mut bad_value = None;
            for (k, s) in result.sub_maps.iter().enumerate() {
                let v = s.labels()[i];
                if v == 0 {
                    continue;
                }
                owners += 1;
                if is_class {
                    if v != 1 {
                        bad_value = Some((k, v));
                    }
                    recovered = recovered.max(k as u8 + 1);
                } else {
                    recovered = recovered.max(v);
                }
            }
            if let Some((k, v)) = bad_value {
                found.push(source.coords(i), format!("class sub-map {k} holds non-binary value {v}"));
            } else if src == 0 && owners > 0 {
                found.push(source.coords(i), format!("background pixel set in {owners} sub-map(s)"));
            } else if src != 0 && owners != 1 {
                found.push(source.coords(i), format!("foreground pixel present in {owners} sub-maps"));
            } else if recovered != src {
                found.push(
                    source.coords(i),
                    format!("source label {src} reconstructed as {recovered}"),
                );
            }
        }
    }
    found.into_report()
}

#[derive(Default)]
struct Violations {
    list: Vec<PartitionViolation>,
    count: usize,
}

impl Violations {
    fn push(&mut self, position: Vec<usize>, message: String) {
        self.count += 1;
        if self.list.len() < MAX_REPORTED_VIOLATIONS {
            self.list.push(PartitionViolation { position, message });
        }
    }

    fn into_report(self) -> PartitionReport {
        PartitionReport {
            valid: self.count == 0,
            violations: self.list,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn class_decomposition_hand_trace() {
        let m = LabelMap::from_rows(&[&[0, 1], &[2, 1]], 2).unwrap();
        let r = decompose_by_class(&m).unwrap();
        assert_eq!(r.sub_maps.len(), 2);
        assert_eq!(r.sub_maps[0].labels(), &[0, 1, 0, 1]);
        assert_eq!(r.sub_maps[1].labels(), &[0, 0, 1, 0]);
        assert!(verify_partition(&m, &r).valid);
    }

    #[test]
    fn class_decomposition_of_background() {
        let m = LabelMap::background(vec![3, 3], 3).unwrap();
        let r = decompose_by_class(&m).unwrap();
        assert_eq!(r.sub_maps.len(), 3);
        assert!(r.sub_maps.iter().all(|s| s.foreground_count() == 0));
    }

    #[test]
    fn single_class_is_binarization() {
        let m = LabelMap::from_rows(&[&[0, 1, 1], &[1, 0, 0]], 1).unwrap();
        let r = decompose_by_class(&m).unwrap();
        assert_eq!(r.sub_maps, vec![m.clone()]);
    }

    fn shapes_map() -> LabelMap {
        // 3x3 square at left, L-pentomino at right
        LabelMap::from_rows(
            &[
                &[1, 1, 1, 0, 0, 1, 0, 0],
                &[1, 1, 1, 0, 0, 1, 0, 0],
                &[1, 1, 1, 0, 0, 1, 1, 1],
                &[0, 0, 0, 0, 0, 0, 0, 0],
            ],
            1,
        )
        .unwrap()
    }

    #[test]
    fn shape_decomposition_routes_objects() {
        let m = shapes_map();
        let r = decompose_by_shape(&m, ShapeThreshold::default()).unwrap();
        assert_eq!(r.sub_maps[0].foreground_count(), 9);
        assert_eq!(r.sub_maps[1].foreground_count(), 5);
        assert_eq!(r.assignments[0].convexity_ratio, Some(1.0));
        assert_eq!(r.assignments[1].sub_map, 1);
        assert!(verify_partition(&m, &r).valid);
    }

    #[test]
    fn ratio_equal_to_threshold_is_concave() {
        let m = shapes_map();
        let t = ShapeThreshold::new(5.0 / 6.0).unwrap();
        let r = decompose_by_shape(&m, t).unwrap();
        assert_eq!(r.assignments[1].sub_map, 1);
        let t = ShapeThreshold::new(1.0).unwrap();
        let r = decompose_by_shape(&m, t).unwrap();
        assert_eq!(r.sub_maps[0].foreground_count(), 0);
    }

    #[test]
    fn shape_decomposition_rejects_3d() {
        let m = LabelMap::background(vec![2, 2, 2], 1).unwrap();
        assert!(matches!(
            decompose_by_shape(&m, ShapeThreshold::default()),
            Err(Error::UnsupportedDimension(_))
        ));
    }

    #[test]
    fn threshold_bounds() {
        assert!(ShapeThreshold::new(0.0).is_err());
        assert!(ShapeThreshold::new(1.0).is_ok());
        assert!(ShapeThreshold::new(1.2).is_err());
    }

    #[test]
    fn image_level_branches() {
        let one = LabelMap::from_rows(&[&[0, 1, 1], &[0, 0, 0]], 1).unwrap();
        let r = decompose_by_image_level(&one).unwrap();
        assert_eq!(r.sub_maps[0], one);
        assert_eq!(r.sub_maps[1].foreground_count(), 0);

        let two = LabelMap::from_rows(&[&[1, 0, 1]], 1).unwrap();
        let r = decompose_by_image_level(&two).unwrap();
        assert_eq!(r.sub_maps[0].foreground_count(), 0);
        assert_eq!(r.sub_maps[1], two);

        let none = LabelMap::background(vec![2, 3], 1).unwrap();
        let r = decompose_by_image_level(&none).unwrap();
        assert!(r.sub_maps.iter().all(|s| s.foreground_count() == 0));
        assert!(verify_partition(&none, &r).valid);
    }

    #[test]
    fn flipped_pixel_is_reported() {
        let m = shapes_map();
        let mut r = decompose_by_shape(&m, ShapeThreshold::default()).unwrap();
        let mut labels = r.sub_maps[1].labels().to_vec();
        labels[m.index(&[3, 7])] = 1;
        r.sub_maps[1] = r.sub_maps[1].with_labels(labels).unwrap();
        let report = verify_partition(&m, &r);
        assert!(!report.valid);
        assert_eq!(report.violations[0].position, vec![3, 7]);
    }

    #[test]
    fn identity_is_valid() {
        let m = shapes_map();
        let r = decompose_identity(&m, 1).unwrap();
        assert_eq!(r.sub_maps, vec![m.clone()]);
        assert!(verify_partition(&m, &r).valid);
        let r = decompose_identity(&m, 3).unwrap();
        assert!(verify_partition(&m, &r).valid);
    }

    #[test]
    fn method_serde_shape() {
        let m = DecompositionMethod::Shape {
            t_shape: ShapeThreshold::default(),
        };
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, r#"{"method":"shape","t_shape":0.9}"#);
        let back: DecompositionMethod = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
        assert!(serde_json::from_str::<DecompositionMethod>(r#"{"method":"shape","t_shape":2.0}"#).is_err());
    }
}
