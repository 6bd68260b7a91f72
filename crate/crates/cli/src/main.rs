//! Single entry point for dataset generation, episode sampling, program
//! induction, imagination, rendering, text emission and evaluation.
//!
//! Exit codes: 0 success, 64 usage errors, 2 validation errors, 74 i/o
//! errors. Every subcommand is deterministic given its flags; outputs are
//! never clobbered without `--force`.

use arith_mnist::builder::{self, BuildError, GenerateConfig, GlyphSets};
use arith_mnist::dataset::{Dataset, DatasetError, Part, TextRecord};
use arith_mnist::eval::{score, EvalError};
use arith_mnist::imagination::{imagine_dataset, write_imagined, ImagineError};
use arith_mnist::manifest::{plan_split, Overrides, PlanError};
use arith_mnist::mnist::{GlyphStore, MnistError};
use arith_mnist::scene::{describe, render, SceneError};
use arith_mnist::solver::{ambiguity_report, solve_part, Policy, PredictionRecord, SolveError};
use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

const EXIT_OK: u8 = 0;
const EXIT_VALIDATION: u8 = 2;
const EXIT_USAGE: u8 = 64;
const EXIT_IO: u8 = 74;

struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        CliError { code: EXIT_USAGE, message: message.into() }
    }

    fn validation(message: impl Into<String>) -> Self {
        CliError { code: EXIT_VALIDATION, message: message.into() }
    }

    fn io(message: impl Into<String>) -> Self {
        CliError { code: EXIT_IO, message: message.into() }
    }
}

impl From<PlanError> for CliError {
    fn from(e: PlanError) -> Self {
        match &e {
            PlanError::UnknownSplit(_)
            | PlanError::UnknownOverrideKey(_)
            | PlanError::BadOverrideValue { .. } => CliError::usage(e.to_string()),
            PlanError::OverrideConflict(_) => CliError::validation(e.to_string()),
        }
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        match &e {
            DatasetError::UnknownPart(_) => CliError::usage(e.to_string()),
            DatasetError::Io { .. } => CliError::io(e.to_string()),
            _ => CliError::validation(e.to_string()),
        }
    }
}

impl From<BuildError> for CliError {
    fn from(e: BuildError) -> Self {
        match &e {
            BuildError::Io { .. } => CliError::io(e.to_string()),
            BuildError::Dataset(inner) => match inner {
                DatasetError::Io { .. } => CliError::io(e.to_string()),
                _ => CliError::validation(e.to_string()),
            },
            _ => CliError::validation(e.to_string()),
        }
    }
}

impl From<SolveError> for CliError {
    fn from(e: SolveError) -> Self {
        match &e {
            SolveError::UnknownPolicy(_) => CliError::usage(e.to_string()),
            SolveError::Dataset(DatasetError::Io { .. }) => CliError::io(e.to_string()),
            _ => CliError::validation(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match &e {
            EvalError::Dataset(DatasetError::Io { .. }) => CliError::io(e.to_string()),
            _ => CliError::validation(e.to_string()),
        }
    }
}

impl From<MnistError> for CliError {
    fn from(e: MnistError) -> Self {
        match &e {
            MnistError::Io { .. } => CliError::io(e.to_string()),
            _ => CliError::validation(e.to_string()),
        }
    }
}

impl From<ImagineError> for CliError {
    fn from(e: ImagineError) -> Self {
        match &e {
            ImagineError::Dataset(DatasetError::Io { .. }) => CliError::io(e.to_string()),
            _ => CliError::validation(e.to_string()),
        }
    }
}

impl From<SceneError> for CliError {
    fn from(e: SceneError) -> Self {
        CliError::validation(e.to_string())
    }
}

#[derive(Parser)]
#[command(
    name = "arith-mnist",
    about = "Deterministic generation, solving and evaluation of the Arith-MNIST benchmark",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct MnistPaths {
    /// MNIST training images (IDX, magic 2051); omit all four to use the
    /// deterministic builtin glyphs.
    #[arg(long)]
    mnist_train_images: Option<PathBuf>,
    /// MNIST training labels (IDX, magic 2049).
    #[arg(long)]
    mnist_train_labels: Option<PathBuf>,
    /// MNIST test images.
    #[arg(long)]
    mnist_test_images: Option<PathBuf>,
    /// MNIST test labels.
    #[arg(long)]
    mnist_test_labels: Option<PathBuf>,
}

impl MnistPaths {
    /// Builds glyph pools: IDX files when all four paths are given, the
    /// builtin store when none are.
    fn load(&self) -> Result<(GlyphSets, &'static str), CliError> {
        let paths = [
            &self.mnist_train_images,
            &self.mnist_train_labels,
            &self.mnist_test_images,
            &self.mnist_test_labels,
        ];
        let given = paths.iter().filter(|p| p.is_some()).count();
        match given {
            0 => Ok((GlyphSets::builtin(64), "builtin")),
            4 => {
                let train = GlyphStore::load_pair(
                    self.mnist_train_images.as_ref().unwrap(),
                    self.mnist_train_labels.as_ref().unwrap(),
                )?;
                let test = GlyphStore::load_pair(
                    self.mnist_test_images.as_ref().unwrap(),
                    self.mnist_test_labels.as_ref().unwrap(),
                )?;
                Ok((GlyphSets { train, test }, "idx"))
            }
            _ => Err(CliError::usage(
                "provide all four --mnist-* paths, or none to use builtin glyphs",
            )),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a split (manifest, tasks, optional images and text).
    Gen {
        /// Split name: easy, medium, hard or percep.
        #[arg(long)]
        split: String,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Write images/<sample_id>.ppm for every sample.
        #[arg(long)]
        images: bool,
        /// Write text/<part>.jsonl descriptions.
        #[arg(long)]
        text: bool,
        /// Manifest overrides as key=value (e.g. dataset_size=500).
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Worker threads; output bytes do not depend on this.
        #[arg(long)]
        jobs: Option<usize>,
        /// Overwrite a non-empty output directory.
        #[arg(long)]
        force: bool,
        #[command(flatten)]
        mnist: MnistPaths,
    },
    /// Sample few-shot episodes for one part of a generated dataset.
    Episodes {
        #[arg(long)]
        data: PathBuf,
        /// Part: train, val, test_op, test_order or test_percep.
        #[arg(long)]
        part: String,
        /// Support-set size; defaults to the manifest value.
        #[arg(long)]
        support: Option<usize>,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        force: bool,
    },
    /// Brute-force induction over a part's episodes; writes predictions.
    Solve {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        part: String,
        /// Prediction policy: unanimous, majority or first.
        #[arg(long, default_value = "unanimous")]
        policy: String,
        /// Hypothesis space: `manifest` (the split's grammar) or `full`
        /// (all five conditions, all six operations).
        #[arg(long, default_value = "manifest")]
        grammar: String,
        #[arg(long)]
        out: PathBuf,
        /// Also write an identifiability report (JSON).
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        force: bool,
    },
    /// Sample imagined episodes from a dataset's train scenes.
    Imagine {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        episodes: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Support-set size; defaults to the manifest value.
        #[arg(long)]
        support: Option<usize>,
        #[arg(long)]
        force: bool,
    },
    /// Re-render one sample to a PPM file.
    Render {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        sample: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        force: bool,
        #[command(flatten)]
        mnist: MnistPaths,
    },
    /// Emit text-modality lines for one part (stdout or --out).
    Text {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        part: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        force: bool,
    },
    /// Score prediction files against a dataset.
    Eval {
        /// Predictions JSONL; repeat to merge several files.
        #[arg(long, required = true)]
        pred: Vec<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        /// Output format: table or json.
        #[arg(long, default_value = "table")]
        format: String,
    },
    /// Print a manifest summary of a generated dataset.
    Inspect {
        #[arg(long)]
        data: PathBuf,
    },
}

fn refuse_clobber(path: &Path, force: bool) -> Result<(), CliError> {
    if path.exists() && !force {
        return Err(CliError::validation(format!(
            "{} already exists (pass --force to overwrite)",
            path.display()
        )));
    }
    Ok(())
}

fn parse_part(s: &str) -> Result<Part, CliError> {
    Part::from_str(s).map_err(|e| CliError::usage(e.to_string()))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes)
        .map_err(|e| CliError::io(format!("failed to write {}: {e}", path.display())))
}

/// Bulk stdout writer; a closed pipe (e.g. `| head`) ends output quietly.
fn print_stdout(text: &str) -> Result<(), CliError> {
    use std::io::Write;
    match std::io::stdout().write_all(text.as_bytes()) {
        Ok(()) => Ok(()),
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        Err(e) => Err(CliError::io(format!("failed to write to stdout: {e}"))),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Gen { split, seed, out, images, text, overrides, jobs, force, mnist } => {
            let overrides = Overrides::parse(&overrides)?;
            let manifest = plan_split(&split, seed, &overrides)?;
            let (glyphs, kind) = mnist.load()?;
            let config =
                GenerateConfig { emit_images: images, emit_text: text, jobs, force };
            let summary = builder::generate(&manifest, &glyphs, kind, &out, &config)?;
            println!("generated split `{}` at {}", summary.split_name, out.display());
            println!("training tasks: {}", summary.training_tasks);
            for (part, count) in &summary.samples {
                println!("{part}: {count} samples");
            }
            Ok(())
        }
        Command::Episodes { data, part, support, seed, force } => {
            let part = parse_part(&part)?;
            let dataset = Dataset::load(&data)?;
            refuse_clobber(&dataset.episodes_path(part), force)?;
            let support = support.unwrap_or(dataset.manifest.support_size);
            let episodes = builder::sample_episodes(&dataset, part, support, seed)?;
            println!("wrote {} episodes to {}", episodes.len(), dataset.episodes_path(part).display());
            Ok(())
        }
        Command::Solve { data, part, policy, grammar, out, report, force } => {
            let part = parse_part(&part)?;
            let policy = Policy::from_str(&policy)?;
            refuse_clobber(&out, force)?;
            if let Some(report_path) = &report {
                refuse_clobber(report_path, force)?;
            }
            let dataset = Dataset::load(&data)?;
            let grammar = match grammar.as_str() {
                "manifest" => dataset
                    .manifest
                    .grammar
                    .to_grammar()
                    .map_err(|e| CliError::validation(e.to_string()))?,
                "full" => arith_mnist::dsl::Grammar::full(),
                other => return Err(CliError::usage(format!("unknown grammar `{other}`"))),
            };
            let predictions = solve_part(&dataset, part, &grammar, policy)?;
            arith_mnist::dataset::write_jsonl(&out, &predictions)?;
            println!("wrote {} predictions to {}", predictions.len(), out.display());
            if let Some(report_path) = report {
                let ambiguity = ambiguity_report(&dataset, part, &grammar)?;
                let mut json = serde_json::to_string_pretty(&ambiguity)
                    .map_err(|e| CliError::validation(e.to_string()))?;
                json.push('\n');
                write_bytes(&report_path, json.as_bytes())?;
                println!(
                    "identifiability rate {:.3} over {} episodes",
                    ambiguity.identifiable_rate, ambiguity.episodes
                );
            }
            Ok(())
        }
        Command::Imagine { data, episodes, seed, out, support, force } => {
            refuse_clobber(&out, force)?;
            let dataset = Dataset::load(&data)?;
            let support = support.unwrap_or(dataset.manifest.support_size);
            let imagined = imagine_dataset(&dataset, episodes, support, seed)?;
            write_imagined(&out, &imagined)?;
            println!("wrote {} imagined episodes to {}", imagined.len(), out.display());
            Ok(())
        }
        Command::Render { data, sample, out, force, mnist } => {
            refuse_clobber(&out, force)?;
            let dataset = Dataset::load(&data)?;
            let record = dataset.sample(sample)?;
            let part = dataset.sample_part(sample)?;
            let (glyphs, _) = mnist.load()?;
            let store = match part {
                Part::Train | Part::Val => &glyphs.train,
                _ => &glyphs.test,
            };
            let expected = match part {
                Part::Train | Part::Val => dataset.manifest.glyph_source.train_pool_sizes,
                _ => dataset.manifest.glyph_source.test_pool_sizes,
            };
            if store.pool_lens() != expected {
                return Err(CliError::validation(
                    "glyph pools do not match the manifest's glyph_source; \
                     pass the --mnist-* files the dataset was generated with"
                        .to_string(),
                ));
            }
            let image = render(&record.scene, store, &dataset.manifest.palette)?;
            write_bytes(&out, &image.to_ppm())?;
            println!("rendered sample {sample} to {}", out.display());
            Ok(())
        }
        Command::Text { data, part, out, force } => {
            let part = parse_part(&part)?;
            let dataset = Dataset::load(&data)?;
            let lines: Vec<TextRecord> = dataset
                .tasks(part)?
                .iter()
                .flat_map(|t| &t.samples)
                .map(|s| TextRecord {
                    sample_id: s.sample_id,
                    text: describe(&s.scene, &dataset.manifest.color_names, s.output),
                })
                .collect();
            match out {
                Some(path) => {
                    refuse_clobber(&path, force)?;
                    arith_mnist::dataset::write_jsonl(&path, &lines)?;
                    println!("wrote {} lines to {}", lines.len(), path.display());
                }
                None => {
                    let mut out = String::new();
                    for line in &lines {
                        out.push_str(
                            &serde_json::to_string(line)
                                .map_err(|e| CliError::validation(e.to_string()))?,
                        );
                        out.push('\n');
                    }
                    print_stdout(&out)?;
                }
            }
            Ok(())
        }
        Command::Eval { pred, data, format } => {
            let dataset = Dataset::load(&data)?;
            let mut predictions: Vec<PredictionRecord> = Vec::new();
            for path in &pred {
                predictions.extend(arith_mnist::dataset::read_jsonl::<PredictionRecord>(path)?);
            }
            let scores = score(&predictions, &dataset)?;
            match format.as_str() {
                "json" => print_stdout(&scores.to_json())?,
                "table" => print_stdout(&scores.to_text_table())?,
                other => return Err(CliError::usage(format!("unknown format `{other}`"))),
            }
            Ok(())
        }
        Command::Inspect { data } => {
            let dataset = Dataset::load(&data)?;
            let m = &dataset.manifest;
            println!("split: {}", m.split_name);
            println!("master_seed: {}", m.master_seed);
            println!(
                "grammar: conditions [{}], operations [{}], max {} ops",
                m.grammar.conditions.join(", "),
                m.grammar.operations.join(", "),
                m.grammar.max_operations
            );
            println!("training tasks: {}", m.num_training_tasks());
            println!("dataset size: {}", m.dataset_size);
            println!(
                "held out: {} condition seqs, {} operation seqs, {} percep pairs",
                m.heldout_condition_seqs.len(),
                m.heldout_operation_seqs.len(),
                m.percep_holdouts.len()
            );
            println!("glyphs: {}", m.glyph_source.kind);
            for part in dataset.parts_present() {
                let episodes = if dataset.has_episodes(part) { "episodes sampled" } else { "no episodes" };
                println!(
                    "{part}: {} tasks, {} samples, {episodes}",
                    dataset.tasks(part).map(|t| t.len()).unwrap_or(0),
                    dataset.total_samples(part),
                );
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help and --version are not usage errors.
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::from(EXIT_OK),
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
