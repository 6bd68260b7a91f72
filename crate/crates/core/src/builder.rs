//! Deterministic dataset materialization and episode sampling.
//!
//! Every task draws its samples from an independent stream tagged
//! `task/<task_id>`, so generation parallelizes across tasks without
//! changing a single output byte. Sample ids are assigned from precomputed
//! per-task offsets; file contents depend only on the manifest.
//!
//! Part layout:
//! - train/val: the cross product of train condition and operation
//!   sequences, each task's tail `val_percent` of samples held out as val;
//! - test_op: train condition sequences crossed with held-out operation
//!   sequences;
//! - test_order: held-out condition sequences crossed with train operation
//!   sequences;
//! - test_percep (percep split): the training programs on scenes forced to
//!   contain at least one held-out (magnitude, color) pair.

use crate::dataset::{
    write_jsonl, Dataset, DatasetError, EpisodeRecord, Part, SampleRecord, TaskRecord, TextRecord,
};
use crate::dsl::{parse_program, Program};
use crate::exec::execute_value;
use crate::manifest::{GlyphSource, SplitManifest};
use crate::mnist::GlyphStore;
use crate::rng::derive_stream;
use crate::scene::{describe, render, sample_scene, Scene, SceneError};
use rayon::prelude::*;
use std::collections::HashSet;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BuildError {
    #[error("output directory {0} is not empty (pass force to overwrite)")]
    OutDirNotEmpty(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("task {task_id} has {available} usable support samples, need {needed}")]
    TaskTooSmall { task_id: u64, needed: usize, available: usize },
    #[error("failed to build thread pool: {0}")]
    ThreadPool(String),
    #[error("dataset verification failed: {0}")]
    Verify(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> BuildError + '_ {
    move |source| BuildError::Io { path: path.display().to_string(), source }
}

/// Train and test glyph pools; train-part scenes draw from the train pool,
/// test-part scenes from the test pool.
pub struct GlyphSets {
    pub train: GlyphStore,
    pub test: GlyphStore,
}

impl GlyphSets {
    pub fn builtin(per_class: usize) -> Self {
        GlyphSets {
            train: crate::mnist::builtin_store("train", per_class),
            test: crate::mnist::builtin_store("test", per_class),
        }
    }

    fn for_part(&self, part: Part) -> &GlyphStore {
        match part {
            Part::Train | Part::Val => &self.train,
            _ => &self.test,
        }
    }

    pub fn source(&self, kind: &str) -> GlyphSource {
        GlyphSource {
            kind: kind.to_string(),
            train_pool_sizes: self.train.pool_lens(),
            test_pool_sizes: self.test.pool_lens(),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct GenerateConfig {
    pub emit_images: bool,
    pub emit_text: bool,
    /// Worker threads for task generation; `None` uses the rayon default.
    /// Output bytes are identical for any value.
    pub jobs: Option<usize>,
    pub force: bool,
}

/// Per-part sample counts of a finished generation run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenerateSummary {
    pub split_name: String,
    pub training_tasks: usize,
    pub samples: Vec<(Part, usize)>,
}

struct TaskPlan {
    task_id: u64,
    part: Part,
    program: Program,
    program_text: String,
    n_samples: usize,
    first_sample_id: u64,
    /// Scene constraint: `Exclude` keeps held-out pairs out (train-side
    /// distribution), `Require` rejection-samples until one is present.
    holdout_mode: HoldoutMode,
}

#[derive(Clone, Copy, PartialEq)]
enum HoldoutMode {
    None,
    Exclude,
    Require,
}

/// Spreads `total` samples over `n` tasks: `total / n` each, the first
/// `total % n` tasks taking one extra, so counts always sum to `total`.
fn spread(total: usize, n: usize) -> Vec<usize> {
    let base = total / n;
    let extra = total % n;
    (0..n).map(|i| base + usize::from(i < extra)).collect()
}

/// How many tasks carry one test axis. All programs of the axis are used
/// when each would still get a healthy sample count; otherwise a subset is
/// drawn from the stream tagged `test-tasks/<part>`.
fn test_task_count(set_len: usize, per_axis: usize, support_size: usize) -> usize {
    let min_per_task = (2 * (support_size + 1)).max(8);
    set_len.min((per_axis / min_per_task).max(1))
}

fn parse_seq_programs(
    cond_seqs: &[String],
    op_seqs: &[String],
) -> Vec<(String, Program)> {
    let mut out = Vec::with_capacity(cond_seqs.len() * op_seqs.len());
    for cond in cond_seqs {
        for op in op_seqs {
            let text = format!("{cond} | {op}");
            let program = parse_program(&text).expect("manifest sequences are well-formed");
            let canonical = crate::dsl::format_program(&program);
            out.push((canonical, program));
        }
    }
    out
}

fn plan_tasks(manifest: &SplitManifest) -> Vec<TaskPlan> {
    let mut plans: Vec<TaskPlan> = Vec::new();
    let mut next_task_id: u64 = 0;
    let mut next_sample_id: u64 = 0;
    let holdout_train = if manifest.percep_holdouts.is_empty() {
        HoldoutMode::None
    } else {
        HoldoutMode::Exclude
    };

    let mut push_axis = |plans: &mut Vec<TaskPlan>,
                         programs: Vec<(String, Program)>,
                         counts: Vec<usize>,
                         part: Part,
                         holdout_mode: HoldoutMode| {
        for ((program_text, program), n_samples) in programs.into_iter().zip(counts) {
            plans.push(TaskPlan {
                task_id: next_task_id,
                part,
                program,
                program_text,
                n_samples,
                first_sample_id: next_sample_id,
                holdout_mode,
            });
            next_task_id += 1;
            next_sample_id += n_samples as u64;
        }
    };

    // Training tasks: full cross product, dataset_size spread across them.
    let train_programs =
        parse_seq_programs(&manifest.train_condition_seqs, &manifest.train_operation_seqs);
    let train_counts = spread(manifest.dataset_size, train_programs.len());
    push_axis(&mut plans, train_programs, train_counts, Part::Train, holdout_train);

    // Test axes: op (train conds x held-out ops), order (held-out conds x
    // train ops), percep (training programs on held-out scenes).
    let mut test_axes: Vec<(Part, Vec<(String, Program)>, HoldoutMode)> = vec![
        (
            Part::TestOp,
            parse_seq_programs(&manifest.train_condition_seqs, &manifest.heldout_operation_seqs),
            holdout_train,
        ),
        (
            Part::TestOrder,
            parse_seq_programs(&manifest.heldout_condition_seqs, &manifest.train_operation_seqs),
            holdout_train,
        ),
    ];
    if !manifest.percep_holdouts.is_empty() {
        test_axes.push((
            Part::TestPercep,
            parse_seq_programs(&manifest.train_condition_seqs, &manifest.train_operation_seqs),
            HoldoutMode::Require,
        ));
    }

    for (part, programs, mode) in test_axes {
        if programs.is_empty() || manifest.test_samples_per_axis == 0 {
            continue;
        }
        let n_tasks =
            test_task_count(programs.len(), manifest.test_samples_per_axis, manifest.support_size);
        let chosen: Vec<(String, Program)> = if n_tasks == programs.len() {
            programs
        } else {
            let mut stream =
                derive_stream(manifest.master_seed, &format!("test-tasks/{}", part.name()));
            stream
                .sample_indices(programs.len(), n_tasks)
                .into_iter()
                .map(|i| programs[i].clone())
                .collect()
        };
        let counts = spread(manifest.test_samples_per_axis, chosen.len());
        push_axis(&mut plans, chosen, counts, part, mode);
    }
    plans
}

fn generate_task(
    plan: &TaskPlan,
    manifest: &SplitManifest,
    glyphs: &GlyphSets,
) -> Result<TaskRecord, BuildError> {
    let mut stream = derive_stream(manifest.master_seed, &format!("task/{}", plan.task_id));
    let store = glyphs.for_part(plan.part);
    let mut samples = Vec::with_capacity(plan.n_samples);
    for i in 0..plan.n_samples {
        let scene = match plan.holdout_mode {
            HoldoutMode::None => sample_scene(&mut stream, &[], store)?,
            HoldoutMode::Exclude => sample_scene(&mut stream, &manifest.percep_holdouts, store)?,
            HoldoutMode::Require => loop {
                let candidate = sample_scene(&mut stream, &[], store)?;
                if scene_has_holdout(&candidate, &manifest.percep_holdouts) {
                    break candidate;
                }
            },
        };
        let output = execute_value(&plan.program, &scene);
        samples.push(SampleRecord {
            sample_id: plan.first_sample_id + i as u64,
            scene,
            output,
        });
    }
    Ok(TaskRecord { task_id: plan.task_id, program: plan.program_text.clone(), samples })
}

fn scene_has_holdout(scene: &Scene, holdouts: &[(u8, u8)]) -> bool {
    scene.digits().iter().any(|d| holdouts.contains(&(d.magnitude, d.color_index)))
}

/// Materializes a split into `out_dir`.
///
/// Byte-identical across runs with the same manifest and glyph pools,
/// independent of the job count. The written manifest records the actual
/// glyph provenance.
pub fn generate(
    manifest: &SplitManifest,
    glyphs: &GlyphSets,
    glyph_kind: &str,
    out_dir: &Path,
    config: &GenerateConfig,
) -> Result<GenerateSummary, BuildError> {
    if out_dir.exists() {
        let occupied = out_dir.read_dir().map_err(io_err(out_dir))?.next().is_some();
        if occupied && !config.force {
            return Err(BuildError::OutDirNotEmpty(out_dir.display().to_string()));
        }
        if occupied {
            std::fs::remove_dir_all(out_dir).map_err(io_err(out_dir))?;
        }
    }
    std::fs::create_dir_all(out_dir.join("tasks")).map_err(io_err(out_dir))?;

    let mut manifest = manifest.clone();
    manifest.glyph_source = glyphs.source(glyph_kind);

    let plans = plan_tasks(&manifest);

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs.unwrap_or(0))
        .build()
        .map_err(|e| BuildError::ThreadPool(e.to_string()))?;
    let tasks: Vec<TaskRecord> = pool.install(|| {
        plans
            .par_iter()
            .map(|plan| generate_task(plan, &manifest, glyphs))
            .collect::<Result<Vec<_>, _>>()
    })?;

    // Split training tasks into train/val sample subsets: the final
    // val_percent of each task's samples are held out from train.
    let mut part_tasks: Vec<(Part, Vec<TaskRecord>)> = Vec::new();
    let mut train_tasks = Vec::new();
    let mut val_tasks = Vec::new();
    for (plan, task) in plans.iter().zip(&tasks) {
        if plan.part == Part::Train {
            let n_val = task.samples.len() * manifest.val_percent / 100;
            let split_at = task.samples.len() - n_val;
            train_tasks.push(TaskRecord {
                task_id: task.task_id,
                program: task.program.clone(),
                samples: task.samples[..split_at].to_vec(),
            });
            val_tasks.push(TaskRecord {
                task_id: task.task_id,
                program: task.program.clone(),
                samples: task.samples[split_at..].to_vec(),
            });
        }
    }
    part_tasks.push((Part::Train, train_tasks));
    part_tasks.push((Part::Val, val_tasks));
    for part in [Part::TestOp, Part::TestOrder, Part::TestPercep] {
        let of_part: Vec<TaskRecord> = plans
            .iter()
            .zip(&tasks)
            .filter(|(plan, _)| plan.part == part)
            .map(|(_, task)| task.clone())
            .collect();
        if !of_part.is_empty() {
            part_tasks.push((part, of_part));
        }
    }

    let manifest_path = out_dir.join("manifest.json");
    std::fs::write(&manifest_path, manifest.to_json()).map_err(io_err(&manifest_path))?;

    for (part, records) in &part_tasks {
        let path = out_dir.join("tasks").join(format!("{part}.jsonl"));
        write_jsonl(&path, records)?;
    }

    if config.emit_text {
        let dir = out_dir.join("text");
        std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        for (part, records) in &part_tasks {
            let lines: Vec<TextRecord> = records
                .iter()
                .flat_map(|task| &task.samples)
                .map(|s| TextRecord {
                    sample_id: s.sample_id,
                    text: describe(&s.scene, &manifest.color_names, s.output),
                })
                .collect();
            write_jsonl(&dir.join(format!("{part}.jsonl")), &lines)?;
        }
    }

    if config.emit_images {
        let dir = out_dir.join("images");
        std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        for (part, records) in &part_tasks {
            let store = glyphs.for_part(*part);
            for task in records {
                for sample in &task.samples {
                    let image = render(&sample.scene, store, &manifest.palette)?;
                    let path = dir.join(format!("{}.ppm", sample.sample_id));
                    std::fs::write(&path, image.to_ppm()).map_err(io_err(&path))?;
                }
            }
        }
    }

    Ok(GenerateSummary {
        split_name: manifest.split_name.clone(),
        training_tasks: manifest.num_training_tasks(),
        samples: part_tasks
            .iter()
            .map(|(part, records)| (*part, records.iter().map(|t| t.samples.len()).sum()))
            .collect(),
    })
}

/// Samples one episode per query sample of `part` and writes
/// `episodes/<part>.jsonl`.
///
/// Every sample of the part appears as a query exactly once. Support comes
/// from the same task: for the val part it is drawn from the task's train
/// samples, elsewhere from the part's own samples minus the query.
pub fn sample_episodes(
    dataset: &Dataset,
    part: Part,
    support_size: usize,
    seed: u64,
) -> Result<Vec<EpisodeRecord>, BuildError> {
    let tasks = dataset.tasks(part)?;
    let train_tasks: std::collections::HashMap<u64, &TaskRecord> = if part == Part::Val {
        dataset.tasks(Part::Train)?.iter().map(|t| (t.task_id, t)).collect()
    } else {
        Default::default()
    };

    let mut stream = derive_stream(seed, &format!("episodes/{part}"));
    let mut episodes = Vec::new();
    let mut episode_id = part.episode_base();
    for task in tasks {
        for (qi, query) in task.samples.iter().enumerate() {
            let pool: Vec<u64> = if part == Part::Val {
                let train = train_tasks
                    .get(&task.task_id)
                    .ok_or(DatasetError::MissingPart(Part::Train))?;
                train.samples.iter().map(|s| s.sample_id).collect()
            } else {
                task.samples
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| *i != qi)
                    .map(|(_, s)| s.sample_id)
                    .collect()
            };
            if pool.len() < support_size {
                return Err(BuildError::TaskTooSmall {
                    task_id: task.task_id,
                    needed: support_size,
                    available: pool.len(),
                });
            }
            let support: Vec<u64> = stream
                .sample_indices(pool.len(), support_size)
                .into_iter()
                .map(|i| pool[i])
                .collect();
            episodes.push(EpisodeRecord {
                episode_id,
                task_id: task.task_id,
                support,
                query: query.sample_id,
            });
            episode_id += 1;
        }
    }

    let dir = dataset.root().join("episodes");
    std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    write_jsonl(&dataset.episodes_path(part), &episodes)?;
    Ok(episodes)
}

/// Re-checks a generated dataset against its manifest: label validity,
/// train/held-out disjointness, percep leakage freedom and cardinalities.
pub fn verify(dataset: &Dataset) -> Result<(), BuildError> {
    let manifest = &dataset.manifest;
    let fail = |msg: String| Err(BuildError::Verify(msg));

    let train_conds: HashSet<&String> = manifest.train_condition_seqs.iter().collect();
    let heldout_conds: HashSet<&String> = manifest.heldout_condition_seqs.iter().collect();
    let train_ops: HashSet<&String> = manifest.train_operation_seqs.iter().collect();
    let heldout_ops: HashSet<&String> = manifest.heldout_operation_seqs.iter().collect();
    if !train_conds.is_disjoint(&heldout_conds) || !train_ops.is_disjoint(&heldout_ops) {
        return fail("train and held-out sequence sets overlap".into());
    }

    let split_seq = |text: &str| -> (String, String) {
        let (c, o) = text.split_once('|').expect("canonical program text");
        (c.trim().to_string(), o.trim().to_string())
    };

    for part in dataset.parts_present() {
        for task in dataset.tasks(part)? {
            let program = parse_program(&task.program)
                .map_err(|e| BuildError::Verify(format!("task {}: {e}", task.task_id)))?;
            let (cond, op) = split_seq(&task.program);
            let placement_ok = match part {
                Part::Train | Part::Val | Part::TestPercep => {
                    train_conds.contains(&cond) && train_ops.contains(&op)
                }
                Part::TestOp => train_conds.contains(&cond) && heldout_ops.contains(&op),
                Part::TestOrder => heldout_conds.contains(&cond) && train_ops.contains(&op),
            };
            if !placement_ok {
                return fail(format!(
                    "task {} program `{}` does not belong in part {part}",
                    task.task_id, task.program
                ));
            }
            for sample in &task.samples {
                if execute_value(&program, &sample.scene) != sample.output {
                    return fail(format!("sample {} label mismatch", sample.sample_id));
                }
                let has_holdout = scene_has_holdout(&sample.scene, &manifest.percep_holdouts);
                match part {
                    Part::TestPercep if !has_holdout => {
                        return fail(format!(
                            "test_percep sample {} has no held-out pair",
                            sample.sample_id
                        ));
                    }
                    Part::Train | Part::Val | Part::TestOp | Part::TestOrder if has_holdout => {
                        return fail(format!(
                            "sample {} in {part} leaks a held-out pair",
                            sample.sample_id
                        ));
                    }
                    _ => {}
                }
            }
        }
    }

    let train_total = dataset.total_samples(Part::Train) + dataset.total_samples(Part::Val);
    if train_total != manifest.dataset_size {
        return fail(format!(
            "train+val cardinality {train_total} != dataset_size {}",
            manifest.dataset_size
        ));
    }
    if dataset.tasks(Part::Train)?.len() != manifest.num_training_tasks() {
        return fail("training task count does not match manifest".into());
    }
    for part in [Part::TestOp, Part::TestOrder, Part::TestPercep] {
        if dataset.has_part(part)
            && dataset.total_samples(part) != manifest.test_samples_per_axis
        {
            return fail(format!("{part} cardinality != test_samples_per_axis"));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifest::{plan_split, Overrides};
    use sha2::{Digest, Sha256};
    use std::collections::HashMap;
    use std::path::PathBuf;

    fn small_overrides(size: usize) -> Overrides {
        Overrides {
            dataset_size: Some(size),
            test_samples_per_axis: Some(60),
            ..Default::default()
        }
    }

    fn gen_split(
        name: &str,
        seed: u64,
        overrides: &Overrides,
        dir: &Path,
        config: &GenerateConfig,
    ) -> GenerateSummary {
        let manifest = plan_split(name, seed, overrides).unwrap();
        let glyphs = GlyphSets::builtin(16);
        generate(&manifest, &glyphs, "builtin", dir, config).unwrap()
    }

    fn dir_hashes(dir: &Path) -> HashMap<PathBuf, [u8; 32]> {
        let mut out = HashMap::new();
        let mut stack = vec![dir.to_path_buf()];
        while let Some(d) = stack.pop() {
            for entry in std::fs::read_dir(&d).unwrap() {
                let path = entry.unwrap().path();
                if path.is_dir() {
                    stack.push(path);
                } else {
                    let bytes = std::fs::read(&path).unwrap();
                    let rel = path.strip_prefix(dir).unwrap().to_path_buf();
                    out.insert(rel, Sha256::digest(&bytes).into());
                }
            }
        }
        out
    }

    #[test]
    fn spread_sums_and_balances() {
        assert_eq!(spread(5000, 5), vec![1000; 5]);
        let counts = spread(30_000, 1980);
        assert_eq!(counts.iter().sum::<usize>(), 30_000);
        assert_eq!(counts.iter().filter(|&&c| c == 16).count(), 30_000 - 1980 * 15);
        assert!(counts.iter().all(|&c| c == 15 || c == 16));
    }

    #[test]
    fn easy_split_small_end_to_end() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("easy");
        let summary =
            gen_split("easy", 42, &small_overrides(500), &out, &GenerateConfig::default());
        assert_eq!(summary.training_tasks, 5);
        let by_part: HashMap<Part, usize> = summary.samples.iter().cloned().collect();
        assert_eq!(by_part[&Part::Train], 450);
        assert_eq!(by_part[&Part::Val], 50);
        assert_eq!(by_part[&Part::TestOp], 60);
        assert_eq!(by_part[&Part::TestOrder], 60);
        assert!(!by_part.contains_key(&Part::TestPercep));

        let dataset = Dataset::load(&out).unwrap();
        verify(&dataset).unwrap();
        assert_eq!(dataset.tasks(Part::Train).unwrap().len(), 5);
        // Easy op axis holds out exactly (sub, add).
        for task in dataset.tasks(Part::TestOp).unwrap() {
            assert_eq!(task.program, "left,right,bottom | sub,add");
        }
    }

    #[test]
    fn regeneration_is_byte_identical_and_jobs_invariant() {
        let dir = tempfile::tempdir().unwrap();
        let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
        let over = small_overrides(300);
        let config = GenerateConfig { emit_text: true, emit_images: true, ..Default::default() };
        gen_split("easy", 42, &over, &a, &config);
        gen_split("easy", 42, &over, &b, &config);
        let jobs1 = GenerateConfig { jobs: Some(1), ..config.clone() };
        gen_split("easy", 42, &over, &c, &jobs1);
        let (ha, hb, hc) = (dir_hashes(&a), dir_hashes(&b), dir_hashes(&c));
        assert_eq!(ha, hb);
        assert_eq!(ha, hc);
        assert!(ha.keys().any(|p| p.starts_with("images")));
        assert!(ha.keys().any(|p| p.starts_with("text")));

        // Different seed, different bytes.
        let d = dir.path().join("d");
        gen_split("easy", 43, &over, &d, &config);
        assert_ne!(ha, dir_hashes(&d));
    }

    #[test]
    fn refuses_to_clobber_without_force() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("x");
        let over = small_overrides(100);
        gen_split("easy", 1, &over, &out, &GenerateConfig::default());
        let manifest = plan_split("easy", 1, &over).unwrap();
        let glyphs = GlyphSets::builtin(16);
        let err = generate(&manifest, &glyphs, "builtin", &out, &GenerateConfig::default());
        assert!(matches!(err, Err(BuildError::OutDirNotEmpty(_))));
        let forced = GenerateConfig { force: true, ..Default::default() };
        generate(&manifest, &glyphs, "builtin", &out, &forced).unwrap();
    }

    #[test]
    fn percep_split_respects_holdouts_everywhere() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("percep");
        gen_split("percep", 7, &small_overrides(400), &out, &GenerateConfig::default());
        let dataset = Dataset::load(&out).unwrap();
        verify(&dataset).unwrap();
        let holdouts = dataset.manifest.percep_holdouts.clone();
        assert_eq!(holdouts.len(), 12);
        for part in [Part::Train, Part::Val, Part::TestOp, Part::TestOrder] {
            for task in dataset.tasks(part).unwrap() {
                for sample in &task.samples {
                    assert!(!scene_has_holdout(&sample.scene, &holdouts));
                }
            }
        }
        let percep_tasks = dataset.tasks(Part::TestPercep).unwrap();
        assert_eq!(percep_tasks.iter().map(|t| t.samples.len()).sum::<usize>(), 60);
        for task in percep_tasks {
            for sample in &task.samples {
                assert!(scene_has_holdout(&sample.scene, &holdouts));
            }
        }
    }

    #[test]
    fn medium_test_order_caps_task_count() {
        // 120 held-out cond seqs x 30 train ops = 3600 programs, far more
        // than the axis budget; the planner must cap tasks so episodes
        // remain possible.
        let manifest = plan_split("medium", 3, &Overrides::default()).unwrap();
        let plans = plan_tasks(&manifest);
        let order_tasks: Vec<_> = plans.iter().filter(|p| p.part == Part::TestOrder).collect();
        assert_eq!(order_tasks.len(), 125);
        assert!(order_tasks.iter().all(|p| p.n_samples == 8));
        let op_tasks: Vec<_> = plans.iter().filter(|p| p.part == Part::TestOp).collect();
        assert_eq!(op_tasks.len(), 60); // all 5 x 12 programs fit
        assert_eq!(op_tasks.iter().map(|p| p.n_samples).sum::<usize>(), 1000);
    }

    #[test]
    fn episodes_cover_every_query_once() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("e");
        gen_split("easy", 5, &small_overrides(200), &out, &GenerateConfig::default());
        let dataset = Dataset::load(&out).unwrap();
        let episodes = sample_episodes(&dataset, Part::Train, 3, 11).unwrap();
        assert_eq!(episodes.len(), dataset.total_samples(Part::Train));
        let queries: HashSet<u64> = episodes.iter().map(|e| e.query).collect();
        assert_eq!(queries.len(), episodes.len());
        for e in &episodes {
            assert_eq!(e.support.len(), 3);
            assert!(!e.support.contains(&e.query));
            let support_set: HashSet<u64> = e.support.iter().cloned().collect();
            assert_eq!(support_set.len(), 3);
            for &sid in &e.support {
                let (qp, sp) =
                    (dataset.sample_part(e.query).unwrap(), dataset.sample_part(sid).unwrap());
                assert_eq!(qp, sp);
            }
            assert!(e.episode_id >= Part::Train.episode_base());
        }
        // Reading back gives the same records.
        assert_eq!(dataset.episodes(Part::Train).unwrap(), episodes);
    }

    #[test]
    fn val_episodes_draw_support_from_train() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("v");
        gen_split("easy", 5, &small_overrides(200), &out, &GenerateConfig::default());
        let dataset = Dataset::load(&out).unwrap();
        let episodes = sample_episodes(&dataset, Part::Val, 3, 11).unwrap();
        assert_eq!(episodes.len(), dataset.total_samples(Part::Val));
        for e in &episodes {
            assert_eq!(dataset.sample_part(e.query).unwrap(), Part::Val);
            for &sid in &e.support {
                assert_eq!(dataset.sample_part(sid).unwrap(), Part::Train);
            }
        }
    }

    #[test]
    fn episode_sampling_is_seed_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("d");
        gen_split("easy", 5, &small_overrides(120), &out, &GenerateConfig::default());
        let dataset = Dataset::load(&out).unwrap();
        let a = sample_episodes(&dataset, Part::TestOp, 3, 2).unwrap();
        let bytes_a = std::fs::read(dataset.episodes_path(Part::TestOp)).unwrap();
        let b = sample_episodes(&dataset, Part::TestOp, 3, 2).unwrap();
        let bytes_b = std::fs::read(dataset.episodes_path(Part::TestOp)).unwrap();
        assert_eq!(a, b);
        assert_eq!(bytes_a, bytes_b);
        let c = sample_episodes(&dataset, Part::TestOp, 3, 3).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn too_small_task_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("t");
        gen_split("easy", 5, &small_overrides(100), &out, &GenerateConfig::default());
        let dataset = Dataset::load(&out).unwrap();
        // Train tasks have 18 train samples each; support 18 needs 18 others.
        let err = sample_episodes(&dataset, Part::Train, 18, 0);
        assert!(matches!(err, Err(BuildError::TaskTooSmall { needed: 18, available: 17, .. })));
    }
}
