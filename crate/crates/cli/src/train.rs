use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Args;
use dinseg::data::{DatasetManifest, Split};
use dinseg::network::{Checkpoint, KTo1Model, Trainer};

use crate::config::RunConfig;
use crate::failure::{CmdResult, Failure};
use crate::write_json;

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// JSON run configuration; every field is optional.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// `key=value` with dotted keys for nested fields, e.g. `lr.initial=0.001`.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Output directory; overrides `out` from the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Continue from a checkpoint written by an earlier run of the same config.
    #[arg(long)]
    pub resume: Option<PathBuf>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> dinseg::Error + '_ {
    move |source| dinseg::Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn checkpoint_name(iteration: u64) -> String {
    format!("checkpoint_{iteration:06}.ckpt")
}

pub fn run(args: &TrainArgs) -> CmdResult {
    let mut cfg = RunConfig::load(args.config.as_deref(), &args.overrides)?;
    if let Some(out) = &args.out {
        cfg.out = Some(out.clone());
    }
    let out = cfg.out.clone().ok_or_else(|| Failure::input("no output directory: pass --out or set out"))?;
    let manifest_path = cfg
        .manifest
        .clone()
        .ok_or_else(|| Failure::input("config has no manifest"))?;
    let manifest = DatasetManifest::load(&manifest_path)?;
    let dataset = manifest.load_split(Split::Train)?;
    if dataset.is_empty() {
        return Err(Failure::input(format!("{}: empty training split", manifest_path.display())));
    }
    let spatial_dims = dataset[0].dims().len();
    let spec = cfg.spec(manifest.k, spatial_dims)?;
    let method = cfg.method(manifest.k)?;

    let mut trainer = match &args.resume {
        None => Trainer::new(KTo1Model::build(spec, cfg.seed)?, method, cfg.train_config())?,
        Some(path) => {
            let ckpt = Checkpoint::load(path)?;
            if ckpt.header.spec_hash != spec.hash() {
                return Err(Failure::input(format!(
                    "{}: checkpoint spec hash {} does not match the config's {}",
                    path.display(),
                    ckpt.header.spec_hash,
                    spec.hash()
                )));
            }
            if ckpt.header.method != method {
                return Err(Failure::input(format!(
                    "{}: checkpoint was trained with method {}, config asks for {}",
                    path.display(),
                    ckpt.header.method.name(),
                    method.name()
                )));
            }
            if ckpt.header.rng.seed != cfg.seed {
                return Err(Failure::input(format!(
                    "{}: checkpoint seed {} differs from config seed {}",
                    path.display(),
                    ckpt.header.rng.seed,
                    cfg.seed
                )));
            }
            ckpt.trainer(cfg.train_config())?
        }
    };

    fs::create_dir_all(&out).map_err(io_err(&out))?;
    write_json(&out.join("config.json"), &cfg)?;
    let log_path = out.join("log.jsonl");
    let timing_path = out.join("timing.jsonl");
    let mut log = BufWriter::new(File::create(&log_path).map_err(io_err(&log_path))?);
    let mut timing = BufWriter::new(File::create(&timing_path).map_err(io_err(&timing_path))?);
    let start = Instant::now();
    let every = cfg.checkpoint_every;
    let outcome = trainer.run_until(&dataset, cfg.max_iters, |t, row| {
        writeln!(log, "{}", serde_json::to_string(row)?).map_err(io_err(&log_path))?;
        let elapsed = serde_json::json!({ "iter": row.iter, "elapsed_s": start.elapsed().as_secs_f64() });
        writeln!(timing, "{elapsed}").map_err(io_err(&timing_path))?;
        if every > 0 && row.iter % every == 0 {
            Checkpoint::from_trainer(t).save(&out.join(checkpoint_name(row.iter)))?;
        }
        Ok(())
    });
    log.flush().map_err(io_err(&log_path))?;
    timing.flush().map_err(io_err(&timing_path))?;
    outcome?;
    Checkpoint::from_trainer(&trainer).save(&out.join("final.ckpt"))?;
    println!(
        "trained to iteration {} ({} weights); outputs in {}",
        trainer.iteration(),
        trainer.model.num_weights(),
        out.display()
    );
    Ok(())
}
