use std::path::PathBuf;

use clap::Args;
use dinseg::data::{DatasetManifest, Split};
use dinseg::metrics::{evaluate, summarize, SampleReport};
use dinseg::network::{predict, Checkpoint, KTo1Model};

use crate::failure::{CmdResult, Failure};
use crate::write_json;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SplitName {
    Train,
    Test,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Not needed with --pred-from-gt.
    #[arg(long, required_unless_present = "pred_from_gt")]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, value_enum, default_value_t = SplitName::Test)]
    pub split: SplitName,
    /// Report file.
    #[arg(long)]
    pub out: PathBuf,
    /// Inference window, comma separated; defaults to the whole image.
    #[arg(long, value_delimiter = ',')]
    pub window: Option<Vec<usize>>,
    #[arg(long, default_value_t = 0)]
    pub overlap: usize,
    /// Score the ground truth against itself instead of running a model.
    #[arg(long)]
    pub pred_from_gt: bool,
}

fn load_model(path: &PathBuf, manifest: &DatasetManifest, spatial_dims: usize) -> CmdResult<KTo1Model> {
    let ckpt = Checkpoint::load(path)?;
    let spec = &ckpt.header.spec;
    if spec.num_classes != manifest.k || spec.spatial_dims != spatial_dims {
        return Err(Failure::input(format!(
            "{}: model spec (hash {}) has {} classes in {}D, the dataset has {} classes in {}D",
            path.display(),
            ckpt.header.spec_hash,
            spec.num_classes,
            spec.spatial_dims,
            manifest.k,
            spatial_dims
        )));
    }
    Ok(ckpt.model()?)
}

pub fn run(args: &EvalArgs) -> CmdResult {
    let manifest = DatasetManifest::load(&args.manifest)?;
    let split = match args.split {
        SplitName::Train => Split::Train,
        SplitName::Test => Split::Test,
    };
    let samples = manifest.load_split(split)?;
    if samples.is_empty() {
        return Err(Failure::input(format!("{}: the {:?} split is empty", args.manifest.display(), args.split)));
    }
    let spatial_dims = samples[0].dims().len();
    let model = match (&args.checkpoint, args.pred_from_gt) {
        (_, true) => None,
        (Some(path), false) => Some(load_model(path, &manifest, spatial_dims)?),
        (None, false) => return Err(Failure::input("--checkpoint is required unless --pred-from-gt is set")),
    };
    let mut reports = Vec::with_capacity(samples.len());
    for s in &samples {
        let pred = match &model {
            None => s.label.clone(),
            Some(m) => {
                let window = match &args.window {
                    Some(w) => w.clone(),
                    None => {
                        let step = m.spec().size_multiple();
                        if s.dims().iter().any(|d| d % step != 0) {
                            return Err(Failure::input(format!(
                                "sample {:?} has dims {:?}, not multiples of {step}; pass --window",
                                s.id,
                                s.dims()
                            )));
                        }
                        s.dims().to_vec()
                    }
                };
                predict(m, &s.image, &window, args.overlap)?
            }
        };
        reports.push(SampleReport {
            id: s.id.clone(),
            report: evaluate(&s.label, &pred, manifest.k)?,
        });
    }
    let report = summarize(reports)?;
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| dinseg::Error::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    write_json(&args.out, &report)?;
    println!(
        "evaluated {} samples; mean dice {:.4}; report at {}",
        report.summary.samples,
        report.summary.mean.dice,
        args.out.display()
    );
    Ok(())
}
