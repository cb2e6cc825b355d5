use std::path::PathBuf;

use clap::{Args, ValueEnum};
use dinseg::data::{save_label_map, DatasetManifest, Split};
use dinseg::decomposition::{decompose, verify_partition, DecompositionMethod, DecompositionResult, LabelMap, ObjectAssignment};
use serde::Serialize;

use crate::config::{resolve_method, MethodName};
use crate::failure::{CmdResult, Failure};
use crate::write_json;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitChoice {
    Train,
    Test,
    All,
}

impl SplitChoice {
    pub fn splits(self) -> Vec<Split> {
        match self {
            SplitChoice::Train => vec![Split::Train],
            SplitChoice::Test => vec![Split::Test],
            SplitChoice::All => vec![Split::Train, Split::Test],
        }
    }
}

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    /// Dataset manifest.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub method: MethodName,
    #[arg(long, default_value_t = dinseg::decomposition::DEFAULT_T_SHAPE)]
    pub t_shape: f64,
    /// Identity copies; defaults to the manifest's class count.
    #[arg(long)]
    pub copies: Option<usize>,
    #[arg(long, value_enum, default_value_t = SplitChoice::All)]
    pub split: SplitChoice,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct SampleAssignments {
    id: String,
    sub_map_files: Vec<PathBuf>,
    /// Foreground objects per sub-map.
    objects_per_sub_map: Vec<usize>,
    assignments: Vec<ObjectAssignment>,
}

#[derive(Serialize)]
struct AssignmentsFile {
    method: DecompositionMethod,
    samples: Vec<SampleAssignments>,
}

/// Exit-2 guard: a decomposition that fails the partition check is a bug.
pub fn check_partition(id: &str, source: &LabelMap, result: &DecompositionResult) -> CmdResult {
    let report = verify_partition(source, result);
    if report.valid {
        return Ok(());
    }
    let first = report
        .violations
        .first()
        .map(|v| format!(" at {:?}: {}", v.position, v.message))
        .unwrap_or_default();
    Err(Failure::partition(format!(
        "sample {id:?}: {} decomposition violates the partition property{first}",
        result.method.name()
    )))
}

pub fn run(args: &DecomposeArgs) -> CmdResult {
    let manifest = DatasetManifest::load(&args.input)?;
    let method = resolve_method(args.method, args.t_shape, args.copies, manifest.k)?;
    let mut samples = Vec::new();
    for split in args.split.splits() {
        for s in manifest.load_split(split)? {
            let result = decompose(&s.label, &method)?;
            check_partition(&s.id, &s.label, &result)?;
            let mut files = Vec::new();
            for (k, m) in result.sub_maps.iter().enumerate() {
                for p in save_label_map(&args.out, &format!("{}_sub{k}", s.id), m)? {
                    files.push(PathBuf::from(p.file_name().expect("file path")));
                }
            }
            samples.push(SampleAssignments {
                objects_per_sub_map: (0..result.sub_maps.len())
                    .map(|k| result.assignments.iter().filter(|a| a.sub_map == k).count())
                    .collect(),
                id: s.id,
                sub_map_files: files,
                assignments: result.assignments,
            });
        }
    }
    if samples.is_empty() {
        return Err(Failure::input(format!("{}: no samples in the selected split", args.input.display())));
    }
    let n = samples.len();
    write_json(&args.out.join("assignments.json"), &AssignmentsFile { method, samples })?;
    println!("decomposed {n} samples with method {} into {}", method.name(), args.out.display());
    Ok(())
}
