//! On-disk sample formats.
//!
//! 2D samples are a pair of grayscale PNGs, `<id>_image.png` (written as
//! 16-bit, read as 8- or 16-bit) and `<id>_label.png` (8-bit, pixel value is
//! the class id). 3D samples are raw little-endian blobs with a JSON header
//! next to them: `<id>_image.{raw,json}` and `<id>_label.{raw,json}`.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::sample::Sample;
use crate::autodiff::NdArray;
use crate::decomposition::LabelMap;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DimsKind {
    #[serde(rename = "2d")]
    TwoD,
    #[serde(rename = "3d")]
    ThreeD,
}

impl DimsKind {
    pub fn of(dims: &[usize]) -> Result<Self> {
        match dims.len() {
            2 => Ok(DimsKind::TwoD),
            3 => Ok(DimsKind::ThreeD),
            n => Err(Error::UnsupportedDimension(format!("{n} spatial dims"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RawDtype {
    U8,
    F32,
}

/// Sidecar header of a 3D blob. Data is z-major (x varies fastest).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawHeader {
    pub dims: Vec<usize>,
    pub dtype: RawDtype,
    pub k: u8,
}

/// Paths of the image and label files for `id` under `dir`.
pub fn sample_paths(dir: &Path, id: &str, kind: DimsKind) -> Vec<PathBuf> {
    match kind {
        DimsKind::TwoD => vec![
            dir.join(format!("{id}_image.png")),
            dir.join(format!("{id}_label.png")),
        ],
        DimsKind::ThreeD => ["image", "label"]
            .iter()
            .flat_map(|part| {
                [
                    dir.join(format!("{id}_{part}.raw")),
                    dir.join(format!("{id}_{part}.json")),
                ]
            })
            .collect(),
    }
}

pub fn save_sample(dir: &Path, sample: &Sample) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    match DimsKind::of(sample.dims())? {
        DimsKind::TwoD => {
            let [h, w] = [sample.dims()[0], sample.dims()[1]];
            let image: Vec<u8> = sample
                .image
                .channel(0)
                .iter()
                .flat_map(|&v| quantize16(v).to_be_bytes())
                .collect();
            write_png(&dir.join(format!("{}_image.png", sample.id)), w, h, png::BitDepth::Sixteen, &image)?;
            save_label_map(dir, &format!("{}_label", sample.id), &sample.label).map(drop)
        }
        DimsKind::ThreeD => {
            let k = sample.label.num_classes();
            let image: Vec<u8> = sample
                .image
                .channel(0)
                .iter()
                .flat_map(|&v| (v as f32).to_le_bytes())
                .collect();
            write_raw(dir, &format!("{}_image", sample.id), sample.dims(), RawDtype::F32, k, &image)?;
            save_label_map(dir, &format!("{}_label", sample.id), &sample.label).map(drop)
        }
    }
}

/// Writes a label map on its own as `<stem>.png` (2D) or
/// `<stem>.{raw,json}` (3D) and returns the written paths.
pub fn save_label_map(dir: &Path, stem: &str, map: &LabelMap) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    match DimsKind::of(map.dims())? {
        DimsKind::TwoD => {
            let path = dir.join(format!("{stem}.png"));
            write_png(&path, map.dims()[1], map.dims()[0], png::BitDepth::Eight, map.labels())?;
            Ok(vec![path])
        }
        DimsKind::ThreeD => {
            write_raw(dir, stem, map.dims(), RawDtype::U8, map.num_classes(), map.labels())?;
            Ok(vec![dir.join(format!("{stem}.raw")), dir.join(format!("{stem}.json"))])
        }
    }
}

/// Reads a map written by [`save_label_map`].
pub fn load_label_map(dir: &Path, stem: &str, kind: DimsKind, num_classes: u8) -> Result<LabelMap> {
    let (path, dims, labels) = match kind {
        DimsKind::TwoD => {
            let path = dir.join(format!("{stem}.png"));
            let (dims, raw, scale) = read_png_gray(&path)?;
            if scale != 255.0 {
                return Err(Error::format(&path, "label PNG must be 8-bit"));
            }
            (path, dims, raw.iter().map(|&v| v as u8).collect())
        }
        DimsKind::ThreeD => {
            let (header, bytes) = read_raw(dir, stem)?;
            let path = dir.join(format!("{stem}.raw"));
            if header.dtype != RawDtype::U8 {
                return Err(Error::format(&path, "label blob must be u8"));
            }
            (path, header.dims, bytes)
        }
    };
    LabelMap::new(dims, labels, num_classes).map_err(|e| Error::format(&path, e.to_string()))
}

pub fn load_sample(dir: &Path, id: &str, kind: DimsKind, num_classes: u8) -> Result<Sample> {
    let (image, label) = match kind {
        DimsKind::TwoD => {
            let image_path = dir.join(format!("{id}_image.png"));
            let (dims, image, full_scale) = read_png_gray(&image_path)?;
            let label_path = dir.join(format!("{id}_label.png"));
            let (label_dims, raw, label_scale) = read_png_gray(&label_path)?;
            if label_scale != 255.0 {
                return Err(Error::format(&label_path, "label PNG must be 8-bit"));
            }
            if label_dims != dims {
                return Err(Error::format(
                    &label_path,
                    format!("label dims {label_dims:?} differ from image dims {dims:?}"),
                ));
            }
            let labels = raw.iter().map(|&v| v as u8).collect();
            let label = LabelMap::new(dims.clone(), labels, num_classes).map_err(|e| Error::format(&label_path, e.to_string()))?;
            let mut shape = vec![1];
            shape.extend_from_slice(&dims);
            (NdArray::new(shape, image.iter().map(|v| v / full_scale).collect())?, label)
        }
        DimsKind::ThreeD => {
            let (header, bytes) = read_raw(dir, &format!("{id}_image"))?;
            let image_path = dir.join(format!("{id}_image.raw"));
            let values: Vec<f64> = match header.dtype {
                RawDtype::F32 => bytes
                    .chunks_exact(4)
                    .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
                    .collect(),
                RawDtype::U8 => bytes.iter().map(|&b| f64::from(b) / 255.0).collect(),
            };
            let (label_header, label_bytes) = read_raw(dir, &format!("{id}_label"))?;
            let label_path = dir.join(format!("{id}_label.raw"));
            if label_header.dtype != RawDtype::U8 {
                return Err(Error::format(&label_path, "label blob must be u8"));
            }
            if label_header.dims != header.dims {
                return Err(Error::format(
                    &label_path,
                    format!("label dims {:?} differ from image dims {:?}", label_header.dims, header.dims),
                ));
            }
            let label = LabelMap::new(header.dims.clone(), label_bytes, num_classes)
                .map_err(|e| Error::format(&label_path, e.to_string()))?;
            let mut shape = vec![1];
            shape.extend_from_slice(&header.dims);
            let image = NdArray::new(shape, values).map_err(|e| Error::format(&image_path, e.to_string()))?;
            (image, label)
        }
    };
    Sample::new(id, image, label)
}

fn quantize16(v: f64) -> u16 {
    (v.clamp(0.0, 1.0) * 65535.0).round() as u16
}

fn write_png(path: &Path, width: usize, height: usize, depth: png::BitDepth, data: &[u8]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut encoder = png::Encoder::new(BufWriter::new(file), width as u32, height as u32);
    encoder.set_color(png::ColorType::Grayscale);
    encoder.set_depth(depth);
    let mut writer = encoder
        .write_header()
        .map_err(|e| Error::format(path, e.to_string()))?;
    writer
        .write_image_data(data)
        .map_err(|e| Error::format(path, e.to_string()))?;
    writer.finish().map_err(|e| Error::format(path, e.to_string()))
}

/// Spatial dims `[h, w]`, raw sample values and the bit depth's full-scale
/// value.
fn read_png_gray(path: &Path) -> Result<(Vec<usize>, Vec<f64>, f64)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = png::Decoder::new(BufReader::new(file))
        .read_info()
        .map_err(|e| Error::format(path, e.to_string()))?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::format(path, "image too large"))?;
    let mut buf = vec![0; size];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| Error::format(path, e.to_string()))?;
    if info.color_type != png::ColorType::Grayscale {
        return Err(Error::format(path, format!("expected grayscale, found {:?}", info.color_type)));
    }
    let (w, h) = (info.width as usize, info.height as usize);
    let (values, full_scale) = match info.bit_depth {
        png::BitDepth::Eight => (buf[..w * h].iter().map(|&b| f64::from(b)).collect(), 255.0),
        png::BitDepth::Sixteen => (
            buf[..2 * w * h]
                .chunks_exact(2)
                .map(|c| f64::from(u16::from_be_bytes([c[0], c[1]])))
                .collect(),
            65535.0,
        ),
        d => return Err(Error::format(path, format!("unsupported bit depth {d:?}"))),
    };
    Ok((vec![h, w], values, full_scale))
}

fn write_raw(dir: &Path, stem: &str, dims: &[usize], dtype: RawDtype, k: u8, bytes: &[u8]) -> Result<()> {
    let header = RawHeader {
        dims: dims.to_vec(),
        dtype,
        k,
    };
    let json_path = dir.join(format!("{stem}.json"));
    let raw_path = dir.join(format!("{stem}.raw"));
    fs::write(&json_path, serde_json::to_vec(&header)?).map_err(|e| Error::io(&json_path, e))?;
    fs::write(&raw_path, bytes).map_err(|e| Error::io(&raw_path, e))
}

fn read_raw(dir: &Path, stem: &str) -> Result<(RawHeader, Vec<u8>)> {
    let json_path = dir.join(format!("{stem}.json"));
    let raw_path = dir.join(format!("{stem}.raw"));
    let text = fs::read(&json_path).map_err(|e| Error::io(&json_path, e))?;
    let header: RawHeader =
        serde_json::from_slice(&text).map_err(|e| Error::format(&json_path, e.to_string()))?;
    if header.dims.len() != 3 {
        return Err(Error::format(&json_path, format!("expected 3 dims, found {:?}", header.dims)));
    }
    let bytes = fs::read(&raw_path).map_err(|e| Error::io(&raw_path, e))?;
    let width = match header.dtype {
        RawDtype::U8 => 1,
        RawDtype::F32 => 4,
    };
    let expected = header.dims.iter().product::<usize>() * width;
    if bytes.len() != expected {
        return Err(Error::format(
            &raw_path,
            format!("length mismatch: header {:?} needs {expected} bytes, found {}", header.dims, bytes.len()),
        ));
    }
    Ok((header, bytes))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_2d() -> Sample {
        let label = LabelMap::from_rows(&[&[0, 1, 2], &[2, 1, 0]], 2).unwrap();
        let image = NdArray::new(vec![1, 2, 3], vec![0.0, 0.25, 0.5, 0.75, 1.0, 0.1]).unwrap();
        Sample::new("a", image, label).unwrap()
    }

    #[test]
    fn png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let s = sample_2d();
        save_sample(dir.path(), &s).unwrap();
        let back = load_sample(dir.path(), "a", DimsKind::TwoD, 2).unwrap();
        assert_eq!(back.label, s.label);
        for (a, b) in back.image.data().iter().zip(s.image.data()) {
            assert!((a - b).abs() <= 0.5 / 65535.0);
        }
    }

    #[test]
    fn label_above_k_names_pixel() {
        let dir = tempfile::tempdir().unwrap();
        save_sample(dir.path(), &sample_2d()).unwrap();
        let err = load_sample(dir.path(), "a", DimsKind::TwoD, 1).unwrap_err().to_string();
        assert!(err.contains("a_label.png") && err.contains("[0, 2]"), "{err}");
    }

    #[test]
    fn eight_bit_image_is_accepted() {
        let dir = tempfile::tempdir().unwrap();
        let s = sample_2d();
        save_sample(dir.path(), &s).unwrap();
        write_png(&dir.path().join("a_image.png"), 3, 2, png::BitDepth::Eight, &[0, 51, 102, 153, 204, 255]).unwrap();
        let back = load_sample(dir.path(), "a", DimsKind::TwoD, 2).unwrap();
        assert_eq!(back.image.data(), &[0.0, 0.2, 0.4, 0.6, 0.8, 1.0]);
    }

    #[test]
    fn raw_round_trip_and_length_check() {
        let dir = tempfile::tempdir().unwrap();
        let labels: Vec<u8> = (0..64).map(|i| (i % 3) as u8).collect();
        let image: Vec<f64> = (0..64).map(|i| f64::from(i as u8) / 64.0).collect();
        let s = Sample::new(
            "v",
            NdArray::new(vec![1, 4, 4, 4], image).unwrap(),
            LabelMap::new(vec![4, 4, 4], labels, 2).unwrap(),
        )
        .unwrap();
        save_sample(dir.path(), &s).unwrap();
        assert_eq!(load_sample(dir.path(), "v", DimsKind::ThreeD, 2).unwrap(), s);

        fs::write(dir.path().join("v_label.raw"), vec![0u8; 63]).unwrap();
        let err = load_sample(dir.path(), "v", DimsKind::ThreeD, 2).unwrap_err();
        assert!(err.to_string().contains("length mismatch"), "{err}");
    }

    #[test]
    fn label_map_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let flat = LabelMap::from_rows(&[&[0, 3, 1], &[2, 0, 0]], 3).unwrap();
        let paths = save_label_map(dir.path(), "sub", &flat).unwrap();
        assert_eq!(paths, vec![dir.path().join("sub.png")]);
        assert_eq!(load_label_map(dir.path(), "sub", DimsKind::TwoD, 3).unwrap(), flat);
        let cube = LabelMap::new(vec![2, 2, 2], vec![0, 1, 0, 1, 1, 0, 0, 0], 1).unwrap();
        save_label_map(dir.path(), "cube", &cube).unwrap();
        assert_eq!(load_label_map(dir.path(), "cube", DimsKind::ThreeD, 1).unwrap(), cube);
    }

    #[test]
    fn mismatched_dims_are_reported() {
        let dir = tempfile::tempdir().unwrap();
        save_sample(dir.path(), &sample_2d()).unwrap();
        write_png(&dir.path().join("a_label.png"), 2, 2, png::BitDepth::Eight, &[0, 1, 1, 0]).unwrap();
        let err = load_sample(dir.path(), "a", DimsKind::TwoD, 2).unwrap_err();
        assert!(matches!(err, Error::Format { .. }));
    }
}
