//! Scoring predictions against dataset ground truth.
//!
//! Accuracy is exact integer match over the predicted (non-abstained)
//! episodes of each axis; abstentions count against coverage instead.
//! Reports render as fixed-key JSON or a plain text table.

use crate::dataset::{Dataset, DatasetError, Part};
use crate::solver::{Prediction, PredictionRecord};
use serde::Serialize;
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("unknown episode id {0} (no sampled episode has it)")]
    UnknownEpisode(u64),
    #[error("episode {0} predicted more than once")]
    DuplicatePrediction(u64),
    #[error("part `{0}` is not an evaluation axis")]
    NotAnAxis(Part),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

const AXES: [Part; 4] = [Part::Val, Part::TestOp, Part::TestOrder, Part::TestPercep];

/// Counts for one evaluation axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct AxisStats {
    pub episodes: usize,
    pub predicted: usize,
    pub correct: usize,
    pub abstained: usize,
}

impl AxisStats {
    /// Exact-match accuracy over predicted episodes; None when nothing was
    /// predicted.
    pub fn accuracy(&self) -> Option<f64> {
        (self.predicted > 0).then(|| self.correct as f64 / self.predicted as f64)
    }

    /// Fraction of the axis's episodes that received a value.
    pub fn coverage(&self) -> Option<f64> {
        (self.predicted + self.abstained > 0)
            .then(|| self.predicted as f64 / self.episodes as f64)
    }
}

/// Scores for one split, per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Scores {
    pub split: String,
    pub axes: HashMap<Part, AxisStats>,
}

/// Scores a prediction list against a dataset's episodes.
///
/// Episode ids resolve to axes by their id range; every prediction must
/// reference a sampled episode and each episode may be predicted once.
pub fn score(predictions: &[PredictionRecord], dataset: &Dataset) -> Result<Scores, EvalError> {
    let mut truth: HashMap<u64, i64> = HashMap::new();
    let mut totals: HashMap<Part, usize> = HashMap::new();
    for part in AXES {
        if !dataset.has_episodes(part) {
            continue;
        }
        let episodes = dataset.episodes(part)?;
        totals.insert(part, episodes.len());
        for e in &episodes {
            truth.insert(e.episode_id, dataset.sample(e.query)?.output);
        }
    }

    let mut seen: HashMap<u64, ()> = HashMap::new();
    let mut axes: HashMap<Part, AxisStats> = HashMap::new();
    for record in predictions {
        let id = record.episode_id;
        let part = Part::of_episode_id(id).ok_or(EvalError::UnknownEpisode(id))?;
        if !AXES.contains(&part) {
            return Err(EvalError::NotAnAxis(part));
        }
        let expected = *truth.get(&id).ok_or(EvalError::UnknownEpisode(id))?;
        if seen.insert(id, ()).is_some() {
            return Err(EvalError::DuplicatePrediction(id));
        }
        let stats = axes.entry(part).or_default();
        match record.prediction {
            Prediction::Value(v) => {
                stats.predicted += 1;
                if v == expected {
                    stats.correct += 1;
                }
            }
            Prediction::Abstain => stats.abstained += 1,
        }
    }
    for (part, stats) in axes.iter_mut() {
        stats.episodes = totals[part];
    }
    Ok(Scores { split: dataset.manifest.split_name.clone(), axes })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct CoverageReport {
    val: Option<f64>,
    op: Option<f64>,
    order: Option<f64>,
    percep: Option<f64>,
}

/// JSON face of [`Scores`]: fixed key order, unevaluated axes explicit null.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreReport {
    split: String,
    val: Option<f64>,
    op: Option<f64>,
    order: Option<f64>,
    percep: Option<f64>,
    coverage: CoverageReport,
}

impl Scores {
    fn axis(&self, part: Part) -> Option<&AxisStats> {
        self.axes.get(&part)
    }

    pub fn to_report(&self) -> ScoreReport {
        let acc = |p: Part| self.axis(p).and_then(AxisStats::accuracy);
        let cov = |p: Part| self.axis(p).and_then(AxisStats::coverage);
        ScoreReport {
            split: self.split.clone(),
            val: acc(Part::Val),
            op: acc(Part::TestOp),
            order: acc(Part::TestOrder),
            percep: acc(Part::TestPercep),
            coverage: CoverageReport {
                val: cov(Part::Val),
                op: cov(Part::TestOp),
                order: cov(Part::TestOrder),
                percep: cov(Part::TestPercep),
            },
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_report()).expect("report serializes");
        s.push('\n');
        s
    }

    /// Plain text table, one row per axis.
    pub fn to_text_table(&self) -> String {
        let mut out = format!("split: {}\n", self.split);
        out.push_str("axis        accuracy  coverage  predicted  correct  episodes\n");
        for (part, label) in
            [(Part::Val, "val"), (Part::TestOp, "op"), (Part::TestOrder, "order"), (Part::TestPercep, "percep")]
        {
            let stats = self.axis(part).copied().unwrap_or_default();
            let fmt = |x: Option<f64>| match x {
                Some(v) => format!("{v:.3}"),
                None => "-".to_string(),
            };
            out.push_str(&format!(
                "{label:<10}  {:>8}  {:>8}  {:>9}  {:>7}  {:>8}\n",
                fmt(stats.accuracy()),
                fmt(stats.coverage()),
                stats.predicted,
                stats.correct,
                stats.episodes,
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builder::{generate, sample_episodes, GenerateConfig, GlyphSets};
    use crate::manifest::{plan_split, Overrides};

    fn tiny_dataset(dir: &std::path::Path) -> Dataset {
        let overrides = Overrides {
            dataset_size: Some(100),
            test_samples_per_axis: Some(40),
            ..Default::default()
        };
        let manifest = plan_split("easy", 3, &overrides).unwrap();
        let glyphs = GlyphSets::builtin(8);
        generate(&manifest, &glyphs, "builtin", dir, &GenerateConfig::default()).unwrap();
        let dataset = Dataset::load(dir).unwrap();
        for part in [Part::Val, Part::TestOp, Part::TestOrder] {
            sample_episodes(&dataset, part, 3, 5).unwrap();
        }
        dataset
    }

    fn truth_predictions(dataset: &Dataset, part: Part) -> Vec<PredictionRecord> {
        dataset
            .episodes(part)
            .unwrap()
            .iter()
            .map(|e| PredictionRecord {
                episode_id: e.episode_id,
                prediction: Prediction::Value(dataset.sample(e.query).unwrap().output),
            })
            .collect()
    }

    #[test]
    fn ground_truth_predictions_score_one() {
        let dir = tempfile::tempdir().unwrap();
        let dataset = tiny_dataset(dir.path());
        let mut predictions = truth_predictions(&dataset, Part::Val);
        predictions.extend(truth_predictions(&dataset, Part::TestOp));
        let scores = score(&predictions, &dataset).unwrap();
        let report = scores.to_report();
        assert_eq!(report.val, Some(1.0));
        assert_eq!(report.op, Some(1.0));
        assert_eq!(report.order, None);
        assert_eq!(report.percep, None);
        assert_eq!(report.coverage.val, Some(1.0));
    }

    #[test]
    fn abstentions_hit_coverage_not_accuracy() {
        let dir = tempfile::tempdir().unwrap();
        let dataset = tiny_dataset(dir.path());
        let predictions: Vec<PredictionRecord> = dataset
            .episodes(Part::Val)
            .unwrap()
            .iter()
            .map(|e| PredictionRecord { episode_id: e.episode_id, prediction: Prediction::Abstain })
            .collect();
        let scores = score(&predictions, &dataset).unwrap();
        let stats = scores.axes[&Part::Val];
        assert_eq!(stats.coverage(), Some(0.0));
        assert_eq!(stats.accuracy(), None);
        let report = scores.to_report();
        assert_eq!(report.val, None);
        assert_eq!(report.coverage.val, Some(0.0));
    }

    #[test]
    fn wrong_values_lower_accuracy_only() {
        let dir = tempfile::tempdir().unwrap();
        let dataset = tiny_dataset(dir.path());
        let mut predictions = truth_predictions(&dataset, Part::Val);
        let n = predictions.len();
        for p in predictions.iter_mut().take(n / 2) {
            p.prediction = Prediction::Value(10_000);
        }
        let scores = score(&predictions, &dataset).unwrap();
        let stats = scores.axes[&Part::Val];
        assert_eq!(stats.coverage(), Some(1.0));
        let expected = (n - n / 2) as f64 / n as f64;
        assert!((stats.accuracy().unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn scoring_is_permutation_invariant() {
        let dir = tempfile::tempdir().unwrap();
        let dataset = tiny_dataset(dir.path());
        let mut predictions = truth_predictions(&dataset, Part::Val);
        predictions.extend(truth_predictions(&dataset, Part::TestOrder));
        let forward = score(&predictions, &dataset).unwrap();
        predictions.reverse();
        let backward = score(&predictions, &dataset).unwrap();
        assert_eq!(forward, backward);
    }

    #[test]
    fn unknown_and_duplicate_episodes_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let dataset = tiny_dataset(dir.path());
        let bogus = vec![PredictionRecord {
            episode_id: Part::Val.episode_base() + 999_999,
            prediction: Prediction::Value(0),
        }];
        assert!(matches!(score(&bogus, &dataset), Err(EvalError::UnknownEpisode(_))));

        let mut twice = truth_predictions(&dataset, Part::Val);
        twice.push(twice[0].clone());
        assert!(matches!(score(&twice, &dataset), Err(EvalError::DuplicatePrediction(_))));

        let train = vec![PredictionRecord {
            episode_id: Part::Train.episode_base(),
            prediction: Prediction::Value(0),
        }];
        assert!(matches!(score(&train, &dataset), Err(EvalError::UnknownEpisode(_) | EvalError::NotAnAxis(_))));
    }

    #[test]
    fn report_renders_golden_json_and_table() {
        let scores = Scores {
            split: "easy".to_string(),
            axes: HashMap::from([
                (Part::Val, AxisStats { episodes: 10, predicted: 10, correct: 10, abstained: 0 }),
                (Part::TestOp, AxisStats { episodes: 40, predicted: 30, correct: 27, abstained: 10 }),
            ]),
        };
        assert_eq!(
            scores.to_json(),
            "{\n  \"split\": \"easy\",\n  \"val\": 1.0,\n  \"op\": 0.9,\n  \"order\": null,\n  \
             \"percep\": null,\n  \"coverage\": {\n    \"val\": 1.0,\n    \"op\": 0.75,\n    \
             \"order\": null,\n    \"percep\": null\n  }\n}\n"
        );
        assert_eq!(
            scores.to_text_table(),
            "split: easy\n\
             axis        accuracy  coverage  predicted  correct  episodes\n\
             val            1.000     1.000         10       10        10\n\
             op             0.900     0.750         30       27        40\n\
             order              -         -          0        0         0\n\
             percep             -         -          0        0         0\n"
        );
    }
}
