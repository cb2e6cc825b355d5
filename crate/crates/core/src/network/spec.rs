use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::decomposition::DecompositionMethod;
use crate::error::{Error, Result};

/// One encoder-decoder segmentation module.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegModuleSpec {
    /// Number of downsampling levels.
    pub depth: usize,
    pub base_channels: usize,
    pub in_channels: usize,
    /// Softmax classes of the module's problem.
    pub out_channels: usize,
    #[serde(default = "default_kernel_size")]
    pub kernel_size: usize,
}

fn default_kernel_size() -> usize {
    3
}

impl SegModuleSpec {
    pub fn new(depth: usize, base_channels: usize, in_channels: usize, out_channels: usize) -> Self {
        Self {
            depth,
            base_channels,
            in_channels,
            out_channels,
            kernel_size: default_kernel_size(),
        }
    }

    pub fn validate(&self, name: &str) -> Result<()> {
        if self.depth < 1 {
            return Err(Error::InvalidArgument(format!("{name}: depth must be at least 1")));
        }
        if self.base_channels < 1 || self.in_channels < 1 || self.out_channels < 1 {
            return Err(Error::InvalidArgument(format!(
                "{name}: channel counts must be at least 1, got base {} in {} out {}",
                self.base_channels, self.in_channels, self.out_channels
            )));
        }
        if self.kernel_size % 2 == 0 {
            return Err(Error::InvalidArgument(format!(
                "{name}: kernel size must be odd, got {}",
                self.kernel_size
            )));
        }
        Ok(())
    }

    /// Channels at encoder level `l`.
    pub fn width(&self, level: usize) -> usize {
        self.base_channels << level
    }
}

/// Topology of a K-to-1 network: K stage-1 modules whose softmax outputs
/// (optionally with the raw image) feed one integration module.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KTo1Spec {
    /// Foreground classes of the main problem; the final output has
    /// `num_classes + 1` channels.
    pub num_classes: u8,
    pub spatial_dims: usize,
    pub image_channels: usize,
    pub stage1: Vec<SegModuleSpec>,
    pub integrator: SegModuleSpec,
    /// Weight on the summed sub-problem losses.
    pub lambda: f64,
    pub feed_raw_to_integrator: bool,
}

impl KTo1Spec {
    /// Stage-1 modules sized for `method`, all sharing depth and width, with
    /// `lambda = 1/K`.
    pub fn for_method(
        method: &DecompositionMethod,
        num_classes: u8,
        spatial_dims: usize,
        depth: usize,
        base_channels: usize,
        feed_raw_to_integrator: bool,
    ) -> Result<Self> {
        let k = method.sub_map_count(num_classes);
        if k == 0 {
            return Err(Error::InvalidArgument("decomposition yields no sub-maps".into()));
        }
        let sub_channels = method.sub_problem_channels(num_classes);
        let image_channels = 1;
        let stage1 = vec![SegModuleSpec::new(depth, base_channels, image_channels, sub_channels); k];
        let integrator_in = k * sub_channels + if feed_raw_to_integrator { image_channels } else { 0 };
        let spec = Self {
            num_classes,
            spatial_dims,
            image_channels,
            stage1,
            integrator: SegModuleSpec::new(depth, base_channels, integrator_in, usize::from(num_classes) + 1),
            lambda: 1.0 / k as f64,
            feed_raw_to_integrator,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn k(&self) -> usize {
        self.stage1.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.stage1.is_empty() {
            return Err(Error::InvalidArgument("at least one stage-1 module is required".into()));
        }
        if !matches!(self.spatial_dims, 2 | 3) {
            return Err(Error::UnsupportedDimension(format!(
                "{} spatial dims",
                self.spatial_dims
            )));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!("lambda must be finite and >= 0, got {}", self.lambda)));
        }
        for (k, m) in self.stage1.iter().enumerate() {
            let name = format!("stage-1 module {k}");
            m.validate(&name)?;
            if m.in_channels != self.image_channels {
                return Err(Error::InvalidArgument(format!(
                    "{name}: in_channels {} but the image has {} channels",
                    m.in_channels, self.image_channels
                )));
            }
        }
        self.integrator.validate("integrator")?;
        let expected = self.stage1.iter().map(|m| m.out_channels).sum::<usize>()
            + if self.feed_raw_to_integrator { self.image_channels } else { 0 };
        if self.integrator.in_channels != expected {
            return Err(Error::InvalidArgument(format!(
                "integrator: in_channels {} but stage-1 modules{} provide {expected}",
                self.integrator.in_channels,
                if self.feed_raw_to_integrator { " plus the image" } else { "" }
            )));
        }
        if self.integrator.out_channels != usize::from(self.num_classes) + 1 {
            return Err(Error::InvalidArgument(format!(
                "integrator: out_channels {} but the main problem has {} classes",
                self.integrator.out_channels,
                usize::from(self.num_classes) + 1
            )));
        }
        Ok(())
    }

    /// Largest downsampling factor any module applies; input dims must be
    /// multiples of it.
    pub fn size_multiple(&self) -> usize {
        let depth = self
            .stage1
            .iter()
            .chain(std::iter::once(&self.integrator))
            .map(|m| m.depth)
            .max()
            .unwrap_or(0);
        1 << depth
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("spec serializes");
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }
}
