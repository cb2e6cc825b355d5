//! Browser bindings: decompose a hand-drawn label map, score one map
//! against another, and generate synthetic samples. Maps travel as flat
//! row-major `u8` arrays; results come back as JSON strings.

use dinseg::data::{synth_correlated_classes, synth_shape_mix, Sample};
use dinseg::decomposition::{decompose, verify_partition, DecompositionMethod, LabelMap, ShapeThreshold};
use dinseg::metrics::evaluate;
use serde_json::json;
use wasm_bindgen::prelude::*;

fn label_map(width: usize, height: usize, labels: &[u8], k: u8) -> Result<LabelMap, String> {
    LabelMap::new(vec![height, width], labels.to_vec(), k).map_err(|e| e.to_string())
}

fn method(name: &str, t_shape: f64, k: u8) -> Result<DecompositionMethod, String> {
    Ok(match name {
        "class" => DecompositionMethod::Class,
        "shape" => DecompositionMethod::Shape {
            t_shape: ShapeThreshold::new(t_shape).map_err(|e| e.to_string())?,
        },
        "image-level" => DecompositionMethod::ImageLevel,
        "identity" => DecompositionMethod::Identity { copies: usize::from(k) },
        other => return Err(format!("unknown method {other:?}")),
    })
}

pub fn decompose_json(width: usize, height: usize, labels: &[u8], k: u8, name: &str, t_shape: f64) -> Result<String, String> {
    let map = label_map(width, height, labels, k)?;
    let result = decompose(&map, &method(name, t_shape, k)?).map_err(|e| e.to_string())?;
    let partition = verify_partition(&map, &result);
    Ok(json!({
        "sub_maps": result.sub_maps.iter().map(|m| m.labels()).collect::<Vec<_>>(),
        "assignments": result.assignments,
        "partition_valid": partition.valid,
    })
    .to_string())
}

pub fn metrics_json(width: usize, height: usize, gt: &[u8], pred: &[u8], k: u8) -> Result<String, String> {
    let gt = label_map(width, height, gt, k)?;
    let pred = label_map(width, height, pred, k)?;
    let report = evaluate(&gt, &pred, k).map_err(|e| e.to_string())?;
    serde_json::to_string(&report).map_err(|e| e.to_string())
}

fn sample_json(s: &Sample) -> String {
    let image: Vec<u8> = s.image.data().iter().map(|v| (v * 255.0).round() as u8).collect();
    json!({ "image": image, "labels": s.label.labels(), "k": s.label.num_classes() }).to_string()
}

pub fn synth_json(kind: &str, width: usize, height: usize, seed: u64) -> Result<String, String> {
    let dims = [height, width];
    let sample = match kind {
        "correlated" => synth_correlated_classes(1, &dims, seed).map_err(|e| e.to_string())?.remove(0),
        "shapes" => synth_shape_mix(1, &dims, seed).map_err(|e| e.to_string())?.remove(0).sample,
        other => return Err(format!("unknown kind {other:?}")),
    };
    Ok(sample_json(&sample))
}

/// Sub-maps, per-object assignments and the partition check as JSON.
#[wasm_bindgen]
pub fn decompose_map(width: usize, height: usize, labels: &[u8], k: u8, method: &str, t_shape: f64) -> Result<String, JsError> {
    decompose_json(width, height, labels, k, method, t_shape).map_err(|e| JsError::new(&e))
}

/// Full metrics report of `pred` against `gt` as JSON.
#[wasm_bindgen]
pub fn compare_maps(width: usize, height: usize, gt: &[u8], pred: &[u8], k: u8) -> Result<String, JsError> {
    metrics_json(width, height, gt, pred, k).map_err(|e| JsError::new(&e))
}

/// One synthetic sample (`correlated` or `shapes`) with an 8-bit image.
#[wasm_bindgen]
pub fn synth_sample(kind: &str, width: usize, height: usize, seed: u32) -> Result<String, JsError> {
    synth_json(kind, width, height, u64::from(seed)).map_err(|e| JsError::new(&e))
}
