use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::io::{load_sample, sample_paths, DimsKind};
use super::sample::Sample;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<String>,
    pub test: Vec<String>,
}

/// Dataset index. A relative `root` is resolved against the manifest's own
/// directory when loaded from a file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub root: PathBuf,
    pub k: u8,
    pub dims_kind: DimsKind,
    pub splits: Splits,
}

impl DatasetManifest {
    pub fn ids(&self, split: Split) -> &[String] {
        match split {
            Split::Train => &self.splits.train,
            Split::Test => &self.splits.test,
        }
    }

    /// Parses and validates a manifest file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read(path).map_err(|e| Error::io(path, e))?;
        let mut m: DatasetManifest =
            serde_json::from_slice(&text).map_err(|e| Error::format(path, e.to_string()))?;
        if m.root.is_relative() {
            let base = path.parent().unwrap_or_else(|| Path::new(""));
            m.root = base.join(&m.root);
        }
        m.validate().map_err(|e| match e {
            Error::InvalidArgument(msg) => Error::format(path, msg),
            other => other,
        })?;
        Ok(m)
    }

    /// Writes the manifest with `root` stored as given.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidArgument("k must be at least 1".into()));
        }
        let mut seen = HashSet::new();
        for (split, ids) in [("train", &self.splits.train), ("test", &self.splits.test)] {
            for id in ids {
                if !seen.insert(id.as_str()) {
                    return Err(Error::InvalidArgument(format!(
                        "id {id:?} appears more than once ({split} split)"
                    )));
                }
                for p in sample_paths(&self.root, id, self.dims_kind) {
                    if !p.is_file() {
                        return Err(Error::InvalidArgument(format!(
                            "missing file {} for id {id:?}",
                            p.display()
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn load_split(&self, split: Split) -> Result<Vec<Sample>> {
        self.ids(split)
            .iter()
            .map(|id| load_sample(&self.root, id, self.dims_kind, self.k))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::NdArray;
    use crate::data::io::save_sample;
    use crate::decomposition::LabelMap;

    fn write_dataset(dir: &Path, ids: &[&str]) {
        for id in ids {
            let label = LabelMap::from_rows(&[&[0, 1], &[1, 0]], 1).unwrap();
            let s = Sample::new(*id, NdArray::zeros(&[1, 2, 2]), label).unwrap();
            save_sample(dir, &s).unwrap();
        }
    }

    fn manifest(train: &[&str], test: &[&str]) -> DatasetManifest {
        DatasetManifest {
            root: PathBuf::from("."),
            k: 1,
            dims_kind: DimsKind::TwoD,
            splits: Splits {
                train: train.iter().map(|s| s.to_string()).collect(),
                test: test.iter().map(|s| s.to_string()).collect(),
            },
        }
    }

    #[test]
    fn round_trip_and_load() {
        let dir = tempfile::tempdir().unwrap();
        write_dataset(dir.path(), &["a", "b", "c"]);
        let m = manifest(&["a", "b"], &["c"]);
        let path = dir.path().join("manifest.json");
        m.save(&path).unwrap();
        let back = DatasetManifest::load(&path).unwrap();
        assert_eq!(back.splits, m.splits);
        assert_eq!(back.load_split(Split::Train).unwrap().len(), 2);
        assert_eq!(back.load_split(Split::Test).unwrap()[0].id, "c");
    }

    #[test]
    fn overlapping_splits_rejected() {
        let dir = tempfile::tempdir().unwrap();
        write_dataset(dir.path(), &["a", "b"]);
        let path = dir.path().join("manifest.json");
        manifest(&["a", "b"], &["b"]).save(&path).unwrap();
        let err = DatasetManifest::load(&path).unwrap_err().to_string();
        assert!(err.contains("\"b\""), "{err}");
    }

    #[test]
    fn missing_files_rejected() {
        let dir = tempfile::tempdir().unwrap();
        write_dataset(dir.path(), &["a"]);
        let path = dir.path().join("manifest.json");
        manifest(&["a", "ghost"], &[]).save(&path).unwrap();
        let err = DatasetManifest::load(&path).unwrap_err().to_string();
        assert!(err.contains("ghost_image.png"), "{err}");
        let missing = DatasetManifest::load(&dir.path().join("nope.json")).unwrap_err();
        assert!(missing.to_string().contains("nope.json"));
    }
}
