//! Brute-force program induction over few-shot episodes.
//!
//! The full grammar has at most 125 x 42 = 5250 programs, so exhaustive
//! filtering against the support set needs no pruning. The consistent set
//! quantifies task identifiability; prediction policies turn it into an
//! answer or an abstention.

use crate::dataset::{Dataset, DatasetError, EpisodeRecord, Part};
use crate::dsl::{enumerate_programs, Grammar, Program};
use crate::exec::execute_value;
use crate::scene::Scene;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("no program in the grammar is consistent with the support set")]
    NoConsistentProgram,
    #[error("unknown policy `{0}` (expected unanimous, majority or first)")]
    UnknownPolicy(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

/// How to turn the consistent set into a prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Policy {
    /// Answer only when every consistent program agrees on the query.
    Unanimous,
    /// Most frequent query value, ties broken toward the smaller value.
    Majority,
    /// The first consistent program in enumeration order.
    First,
}

impl FromStr for Policy {
    type Err = SolveError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "unanimous" => Ok(Policy::Unanimous),
            "majority" => Ok(Policy::Majority),
            "first" => Ok(Policy::First),
            other => Err(SolveError::UnknownPolicy(other.to_string())),
        }
    }
}

/// A prediction, or a refusal to guess.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Prediction {
    Value(i64),
    Abstain,
}

// Predictions serialize as a bare integer or the string "abstain".
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum PredictionRepr {
    Value(i64),
    Text(String),
}

impl Serialize for Prediction {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Prediction::Value(v) => PredictionRepr::Value(*v).serialize(serializer),
            Prediction::Abstain => PredictionRepr::Text("abstain".to_string()).serialize(serializer),
        }
    }
}

impl<'de> Deserialize<'de> for Prediction {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        match PredictionRepr::deserialize(deserializer)? {
            PredictionRepr::Value(v) => Ok(Prediction::Value(v)),
            PredictionRepr::Text(s) if s == "abstain" => Ok(Prediction::Abstain),
            PredictionRepr::Text(s) => {
                Err(serde::de::Error::custom(format!("expected integer or \"abstain\", got `{s}`")))
            }
        }
    }
}

/// One line of a predictions file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub episode_id: u64,
    pub prediction: Prediction,
}

/// All grammar programs reproducing every support pair, in enumeration order.
pub fn consistent_programs(support: &[(&Scene, i64)], grammar: &Grammar) -> Vec<Program> {
    let programs = enumerate_programs(grammar);
    let indices = consistent_indices(support, &programs);
    indices.into_iter().map(|i| programs[i].clone()).collect()
}

/// Index form of [`consistent_programs`] against a pre-enumerated space.
fn consistent_indices(support: &[(&Scene, i64)], programs: &[Program]) -> Vec<usize> {
    programs
        .iter()
        .enumerate()
        .filter(|(_, p)| support.iter().all(|(scene, output)| execute_value(p, scene) == *output))
        .map(|(i, _)| i)
        .collect()
}

/// Applies a policy to the consistent set evaluated on the query scene.
pub fn predict(
    support: &[(&Scene, i64)],
    query: &Scene,
    grammar: &Grammar,
    policy: Policy,
) -> Result<Prediction, SolveError> {
    let programs = enumerate_programs(grammar);
    let indices = consistent_indices(support, &programs);
    predict_from_indices(&indices, &programs, query, policy)
}

fn predict_from_indices(
    indices: &[usize],
    programs: &[Program],
    query: &Scene,
    policy: Policy,
) -> Result<Prediction, SolveError> {
    if indices.is_empty() {
        return Err(SolveError::NoConsistentProgram);
    }
    let values: Vec<i64> = indices.iter().map(|&i| execute_value(&programs[i], query)).collect();
    Ok(match policy {
        Policy::Unanimous => {
            if values.iter().all(|v| *v == values[0]) {
                Prediction::Value(values[0])
            } else {
                Prediction::Abstain
            }
        }
        Policy::Majority => {
            let mut counts: HashMap<i64, usize> = HashMap::new();
            for v in &values {
                *counts.entry(*v).or_default() += 1;
            }
            let best = counts
                .into_iter()
                .max_by(|(va, ca), (vb, cb)| ca.cmp(cb).then(vb.cmp(va)))
                .expect("non-empty values");
            Prediction::Value(best.0)
        }
        Policy::First => Prediction::Value(values[0]),
    })
}

fn episode_support<'a>(
    dataset: &'a Dataset,
    episode: &EpisodeRecord,
) -> Result<(Vec<(&'a Scene, i64)>, &'a Scene), SolveError> {
    let support = episode
        .support
        .iter()
        .map(|&sid| dataset.sample(sid).map(|s| (&s.scene, s.output)))
        .collect::<Result<Vec<_>, _>>()?;
    let query = &dataset.sample(episode.query)?.scene;
    Ok((support, query))
}

/// Solves every episode of a part, in episode order.
pub fn solve_part(
    dataset: &Dataset,
    part: Part,
    grammar: &Grammar,
    policy: Policy,
) -> Result<Vec<PredictionRecord>, SolveError> {
    let programs = enumerate_programs(grammar);
    let episodes = dataset.episodes(part)?;
    let mut out = Vec::with_capacity(episodes.len());
    for episode in &episodes {
        let (support, query) = episode_support(dataset, episode)?;
        let indices = consistent_indices(&support, &programs);
        let prediction = predict_from_indices(&indices, &programs, query, policy)?;
        out.push(PredictionRecord { episode_id: episode.episode_id, prediction });
    }
    Ok(out)
}

/// Per-task ambiguity statistics for one part's episodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskAmbiguity {
    pub task_id: u64,
    pub episodes: usize,
    /// Episodes whose consistent programs all agree on the query.
    pub identifiable: usize,
    pub mean_consistent: f64,
}

/// Identifiability report: how often a support set pins down the query
/// answer across all grammar-consistent programs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmbiguityReport {
    pub split: String,
    pub part: String,
    pub support_size: usize,
    pub episodes: usize,
    pub identifiable_rate: f64,
    pub mean_consistent: f64,
    pub tasks: Vec<TaskAmbiguity>,
}

/// Computes ambiguity statistics over a part's existing episodes.
pub fn ambiguity_report(
    dataset: &Dataset,
    part: Part,
    grammar: &Grammar,
) -> Result<AmbiguityReport, SolveError> {
    let programs = enumerate_programs(grammar);
    let episodes = dataset.episodes(part)?;
    let mut per_task: HashMap<u64, (usize, usize, usize)> = HashMap::new();
    let mut support_size = 0;
    for episode in &episodes {
        support_size = episode.support.len();
        let (support, query) = episode_support(dataset, episode)?;
        let indices = consistent_indices(&support, &programs);
        let identifiable = match predict_from_indices(&indices, &programs, query, Policy::Unanimous)?
        {
            Prediction::Value(_) => 1,
            Prediction::Abstain => 0,
        };
        let entry = per_task.entry(episode.task_id).or_default();
        entry.0 += 1;
        entry.1 += identifiable;
        entry.2 += indices.len();
    }

    let mut tasks: Vec<TaskAmbiguity> = per_task
        .into_iter()
        .map(|(task_id, (episodes, identifiable, consistent_sum))| TaskAmbiguity {
            task_id,
            episodes,
            identifiable,
            mean_consistent: consistent_sum as f64 / episodes as f64,
        })
        .collect();
    tasks.sort_by_key(|t| t.task_id);

    let episodes_total: usize = tasks.iter().map(|t| t.episodes).sum();
    let identifiable_total: usize = tasks.iter().map(|t| t.identifiable).sum();
    let consistent_total: f64 =
        tasks.iter().map(|t| t.mean_consistent * t.episodes as f64).sum();
    Ok(AmbiguityReport {
        split: dataset.manifest.split_name.clone(),
        part: part.name().to_string(),
        support_size,
        episodes: episodes_total,
        identifiable_rate: identifiable_total as f64 / episodes_total.max(1) as f64,
        mean_consistent: consistent_total / episodes_total.max(1) as f64,
        tasks,
    })
}
