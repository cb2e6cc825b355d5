//! Training run configuration: defaults, a JSON file on top, then
//! `key=value` overrides with dotted keys for nested fields.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use dinseg::decomposition::{DecompositionMethod, ShapeThreshold, DEFAULT_T_SHAPE};
use dinseg::network::{KTo1Spec, LrSchedule, TrainConfig};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::failure::{CmdResult, Failure};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum MethodName {
    Class,
    Shape,
    ImageLevel,
    Identity,
}

/// `copies` of `None` means one copy per foreground class, matching the
/// sub-map count of class decomposition.
pub fn resolve_method(name: MethodName, t_shape: f64, copies: Option<usize>, k: u8) -> CmdResult<DecompositionMethod> {
    Ok(match name {
        MethodName::Class => DecompositionMethod::Class,
        MethodName::Shape => DecompositionMethod::Shape {
            t_shape: ShapeThreshold::new(t_shape)?,
        },
        MethodName::ImageLevel => DecompositionMethod::ImageLevel,
        MethodName::Identity => {
            let copies = copies.unwrap_or(usize::from(k));
            if copies == 0 {
                return Err(Failure::input("copies must be at least 1"));
            }
            DecompositionMethod::Identity { copies }
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub manifest: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub method: MethodName,
    pub t_shape: f64,
    pub copies: Option<usize>,
    pub depth: usize,
    pub base_channels: usize,
    /// `None` gives 1/K.
    pub lambda: Option<f64>,
    pub feed_raw_to_integrator: bool,
    pub window: Option<Vec<usize>>,
    pub batch: usize,
    pub max_iters: u64,
    pub lr: LrSchedule,
    pub seed: u64,
    pub rotate: bool,
    pub flip: bool,
    pub checkpoint_every: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            manifest: None,
            out: None,
            method: MethodName::Class,
            t_shape: DEFAULT_T_SHAPE,
            copies: None,
            depth: 2,
            base_channels: 8,
            lambda: None,
            feed_raw_to_integrator: true,
            window: t.window,
            batch: t.batch,
            max_iters: t.max_iters,
            lr: t.lr,
            seed: t.seed,
            rotate: t.rotate,
            flip: t.flip,
            checkpoint_every: t.checkpoint_every,
        }
    }
}

impl RunConfig {
    /// Defaults, then `file` if given, then each `key=value` override.
    pub fn load(file: Option<&Path>, overrides: &[String]) -> CmdResult<Self> {
        let mut merged = serde_json::to_value(Self::default()).expect("defaults serialize");
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
            let value: Value = serde_json::from_str(&text)
                .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
            let Value::Object(fields) = value else {
                return Err(Failure::input(format!("{}: config must be a JSON object", path.display())));
            };
            for (k, v) in fields {
                merge(&mut merged, &k, v).map_err(|m| Failure::input(format!("{}: {m}", path.display())))?;
            }
        }
        for o in overrides {
            let (key, raw) = o
                .split_once('=')
                .ok_or_else(|| Failure::input(format!("override {o:?} is not key=value")))?;
            // bare words that are not JSON are taken as strings
            let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
            set_dotted(&mut merged, key, value).map_err(|m| Failure::input(format!("override {o:?}: {m}")))?;
        }
        serde_json::from_value(merged).map_err(|e| Failure::input(format!("config: {e}")))
    }

    pub fn method(&self, k: u8) -> CmdResult<DecompositionMethod> {
        resolve_method(self.method, self.t_shape, self.copies, k)
    }

    pub fn spec(&self, k: u8, spatial_dims: usize) -> CmdResult<KTo1Spec> {
        let method = self.method(k)?;
        let mut spec = KTo1Spec::for_method(
            &method,
            k,
            spatial_dims,
            self.depth,
            self.base_channels,
            self.feed_raw_to_integrator,
        )?;
        if let Some(l) = self.lambda {
            if !l.is_finite() || l < 0.0 {
                return Err(Failure::input(format!("lambda must be finite and non-negative, got {l}")));
            }
            spec.lambda = l;
        }
        Ok(spec)
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            window: self.window.clone(),
            batch: self.batch,
            max_iters: self.max_iters,
            lr: self.lr,
            seed: self.seed,
            rotate: self.rotate,
            flip: self.flip,
            checkpoint_every: self.checkpoint_every,
        }
    }
}

/// Replaces a top-level field, recursing into objects so a file can set
/// only some nested fields.
fn merge(target: &mut Value, key: &str, value: Value) -> Result<(), String> {
    let Value::Object(map) = target else {
        return Err(format!("cannot set {key:?} on a non-object"));
    };
    let slot = map.get_mut(key).ok_or_else(|| format!("unknown key {key:?}"))?;
    match (slot, value) {
        (slot @ Value::Object(_), Value::Object(fields)) => {
            for (k, v) in fields {
                merge(slot, &k, v)?;
            }
            Ok(())
        }
        (slot, value) => {
            *slot = value;
            Ok(())
        }
    }
}

fn set_dotted(target: &mut Value, key: &str, value: Value) -> Result<(), String> {
    match key.split_once('.') {
        None => merge(target, key, value),
        Some((head, rest)) => {
            let Value::Object(map) = target else {
                return Err(format!("cannot descend into {head:?}"));
            };
            let inner = map.get_mut(head).ok_or_else(|| format!("unknown key {head:?}"))?;
            if !inner.is_object() {
                return Err(format!("{head:?} has no nested fields"));
            }
            set_dotted(inner, rest, value)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_the_training_protocol() {
        let c = RunConfig::load(None, &[]).unwrap();
        assert_eq!(c.batch, 8);
        assert_eq!(c.max_iters, 60_000);
        assert_eq!(c.lr.initial, 5e-4);
        assert_eq!(c.lr.dropped, 5e-5);
        assert_eq!(c.lr.drop_at, 30_000);
        assert_eq!(c.method, MethodName::Class);
    }

    #[test]
    fn file_then_overrides() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        std::fs::write(&path, r#"{"max_iters": 10, "lr": {"initial": 0.01}, "method": "identity"}"#).unwrap();
        let c = RunConfig::load(
            Some(&path),
            &["max_iters=0".into(), "lr.drop_at=5".into(), "window=[32,32]".into(), "method=shape".into()],
        )
        .unwrap();
        assert_eq!(c.max_iters, 0);
        assert_eq!(c.lr.initial, 0.01);
        assert_eq!(c.lr.dropped, 5e-5);
        assert_eq!(c.lr.drop_at, 5);
        assert_eq!(c.window, Some(vec![32, 32]));
        assert_eq!(c.method, MethodName::Shape);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert_eq!(RunConfig::load(None, &["max_iter=3".into()]).unwrap_err().code, 1);
        assert!(RunConfig::load(None, &["lr.start=3".into()]).is_err());
        assert!(RunConfig::load(None, &["batch".into()]).is_err());
        assert!(RunConfig::load(None, &["batch=many".into()]).is_err());
    }

    #[test]
    fn identity_copies_default_to_class_count() {
        let c = RunConfig::load(None, &["method=identity".into()]).unwrap();
        assert_eq!(c.method(3).unwrap(), DecompositionMethod::Identity { copies: 3 });
        assert_eq!(c.spec(3, 2).unwrap().k(), 3);
    }
}
