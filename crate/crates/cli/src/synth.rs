use std::path::PathBuf;

use clap::{Args, ValueEnum};
use dinseg::data::{
    save_sample, synth_correlated_classes, synth_count_mix, synth_shape_mix, DatasetManifest, DimsKind, ObjectRecord,
    Sample, Splits,
};
use serde::Serialize;

use crate::failure::{CmdResult, Failure};
use crate::write_json;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SynthKind {
    /// Two classes in fixed spatial relation (core and ring).
    Correlated,
    /// Convex ellipses mixed with concave U and L shapes (2D only).
    Shapes,
    /// Images with one object or several.
    Counts,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_enum)]
    pub kind: SynthKind,
    /// Training samples.
    #[arg(long)]
    pub n: usize,
    /// Extra samples for the test split, drawn after the training ones.
    #[arg(long, default_value_t = 0)]
    pub n_test: usize,
    /// Spatial dims, comma separated (2 or 3 values).
    #[arg(long, value_delimiter = ',', required = true)]
    pub dims: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Probability of a single-object image (counts only).
    #[arg(long, default_value_t = 0.5)]
    pub p_single: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct ObjectsEntry<'a> {
    id: &'a str,
    objects: &'a [ObjectRecord],
}

pub fn run(args: &SynthArgs) -> CmdResult {
    if args.n == 0 {
        return Err(Failure::input("--n must be at least 1"));
    }
    let total = args.n + args.n_test;
    let (samples, objects): (Vec<Sample>, Option<Vec<Vec<ObjectRecord>>>) = match args.kind {
        SynthKind::Correlated => (synth_correlated_classes(total, &args.dims, args.seed)?, None),
        SynthKind::Shapes => split(synth_shape_mix(total, &args.dims, args.seed)?),
        SynthKind::Counts => split(synth_count_mix(total, &args.dims, args.seed, args.p_single)?),
    };
    for s in &samples {
        save_sample(&args.out, s)?;
    }
    let ids: Vec<String> = samples.iter().map(|s| s.id.clone()).collect();
    let manifest = DatasetManifest {
        root: PathBuf::from("."),
        k: samples[0].label.num_classes(),
        dims_kind: DimsKind::of(&args.dims)?,
        splits: Splits {
            train: ids[..args.n].to_vec(),
            test: ids[args.n..].to_vec(),
        },
    };
    manifest.save(&args.out.join("manifest.json"))?;
    if let Some(objects) = &objects {
        let entries: Vec<ObjectsEntry> = ids
            .iter()
            .zip(objects)
            .map(|(id, o)| ObjectsEntry { id, objects: o })
            .collect();
        write_json(&args.out.join("objects.json"), &entries)?;
    }
    println!("wrote {} samples ({} train, {} test) to {}", total, args.n, args.n_test, args.out.display());
    Ok(())
}

fn split(v: Vec<dinseg::data::SynthSample>) -> (Vec<Sample>, Option<Vec<Vec<ObjectRecord>>>) {
    let (s, o): (Vec<_>, Vec<_>) = v.into_iter().map(|x| (x.sample, x.objects)).unzip();
    (s, Some(o))
}
