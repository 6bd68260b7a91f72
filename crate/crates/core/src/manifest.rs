//! Split planning: everything needed to regenerate a dataset byte-exactly.
//!
//! A [`SplitManifest`] pins the grammar, the train/held-out sequence sets,
//! the palette and color names, perception holdouts, sizes and the glyph
//! provenance. Sequence subsets for the medium/hard splits are drawn from
//! tagged streams of the master seed; the easy/percep sets are fixed.

use crate::dsl::{
    enumerate_condition_sequences, enumerate_operation_sequences, Condition, Grammar, Operation,
};
use crate::rng::derive_stream;
use crate::scene::{default_color_names, Palette, NUM_COLORS};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("unknown split `{0}` (expected easy, medium, hard or percep)")]
    UnknownSplit(String),
    #[error("override conflict: {0}")]
    OverrideConflict(String),
    #[error("unknown override key `{0}`")]
    UnknownOverrideKey(String),
    #[error("override `{key}` has invalid value `{value}`")]
    BadOverrideValue { key: String, value: String },
}

/// Grammar as stored in the manifest: primitive names plus the operation
/// count bound.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrammarSpec {
    pub conditions: Vec<String>,
    pub operations: Vec<String>,
    pub max_operations: usize,
}

impl GrammarSpec {
    pub fn from_grammar(grammar: &Grammar) -> Self {
        GrammarSpec {
            conditions: grammar.conditions().iter().map(|c| c.name().to_string()).collect(),
            operations: grammar.operations().iter().map(|o| o.name().to_string()).collect(),
            max_operations: grammar.max_operations(),
        }
    }

    pub fn to_grammar(&self) -> Result<Grammar, crate::dsl::DslError> {
        let conditions = self
            .conditions
            .iter()
            .map(|n| {
                Condition::ALL
                    .into_iter()
                    .find(|c| c.name() == n)
                    .ok_or_else(|| crate::dsl::DslError::UnknownToken(n.clone()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let operations = self
            .operations
            .iter()
            .map(|n| {
                Operation::ALL
                    .into_iter()
                    .find(|o| o.name() == n)
                    .ok_or_else(|| crate::dsl::DslError::UnknownToken(n.clone()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Grammar::new(&conditions, &operations, self.max_operations)
    }
}

/// Where glyph pixels come from; pool sizes pin the glyph-index ranges that
/// scene sampling draws from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GlyphSource {
    /// `builtin` or `idx`.
    pub kind: String,
    pub train_pool_sizes: [usize; 10],
    pub test_pool_sizes: [usize; 10],
}

impl GlyphSource {
    pub fn builtin(per_class: usize) -> Self {
        GlyphSource {
            kind: "builtin".to_string(),
            train_pool_sizes: [per_class; 10],
            test_pool_sizes: [per_class; 10],
        }
    }
}

/// Full recipe for deterministic regeneration of one split.
///
/// Field order here is the canonical key order of `manifest.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub format_version: u32,
    pub split_name: String,
    pub master_seed: u64,
    pub grammar: GrammarSpec,
    pub train_condition_seqs: Vec<String>,
    pub heldout_condition_seqs: Vec<String>,
    pub train_operation_seqs: Vec<String>,
    pub heldout_operation_seqs: Vec<String>,
    pub palette: Palette,
    pub color_names: [String; NUM_COLORS],
    /// Held-out (magnitude, color_index) pairs; empty for non-percep splits.
    pub percep_holdouts: Vec<(u8, u8)>,
    pub dataset_size: usize,
    pub support_size: usize,
    pub val_percent: usize,
    pub test_samples_per_axis: usize,
    pub glyph_source: GlyphSource,
}

impl SplitManifest {
    pub fn grammar(&self) -> Grammar {
        self.grammar.to_grammar().expect("manifest grammar is valid")
    }

    pub fn num_training_tasks(&self) -> usize {
        self.train_condition_seqs.len() * self.train_operation_seqs.len()
    }

    /// Serializes with canonical key order, UTF-8, LF, trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }
}

/// Optional `key=value` overrides accepted by `plan_split`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Overrides {
    pub dataset_size: Option<usize>,
    pub support_size: Option<usize>,
    pub val_percent: Option<usize>,
    pub test_samples_per_axis: Option<usize>,
    pub train_cond_count: Option<usize>,
    pub train_op_count: Option<usize>,
    pub percep_holdout_count: Option<usize>,
}

impl Overrides {
    /// Parses CLI-style `key=value` pairs.
    pub fn parse(pairs: &[String]) -> Result<Self, PlanError> {
        let mut out = Overrides::default();
        for pair in pairs {
            let (key, value) = pair
                .split_once('=')
                .ok_or_else(|| PlanError::BadOverrideValue {
                    key: pair.clone(),
                    value: String::new(),
                })?;
            let parsed: usize = value.parse().map_err(|_| PlanError::BadOverrideValue {
                key: key.to_string(),
                value: value.to_string(),
            })?;
            match key {
                "dataset_size" => out.dataset_size = Some(parsed),
                "support_size" => out.support_size = Some(parsed),
                "val_percent" => out.val_percent = Some(parsed),
                "test_samples_per_axis" => out.test_samples_per_axis = Some(parsed),
                "train_cond_count" => out.train_cond_count = Some(parsed),
                "train_op_count" => out.train_op_count = Some(parsed),
                "percep_holdout_count" => out.percep_holdout_count = Some(parsed),
                other => return Err(PlanError::UnknownOverrideKey(other.to_string())),
            }
        }
        Ok(out)
    }
}

pub fn cond_seq_to_string(seq: &[Condition; 3]) -> String {
    seq.iter().map(|c| c.name()).collect::<Vec<_>>().join(",")
}

pub fn op_seq_to_string(seq: &[Operation]) -> String {
    seq.iter().map(|o| o.name()).collect::<Vec<_>>().join(",")
}

fn sample_subset<T: Clone>(
    items: &[T],
    count: usize,
    master_seed: u64,
    tag: &str,
) -> (Vec<T>, Vec<T>) {
    let mut stream = derive_stream(master_seed, tag);
    let picked = stream.sample_indices(items.len(), count);
    let chosen: Vec<T> = picked.iter().map(|&i| items[i].clone()).collect();
    let picked_set: std::collections::HashSet<usize> = picked.into_iter().collect();
    let rest: Vec<T> = items
        .iter()
        .enumerate()
        .filter(|(i, _)| !picked_set.contains(i))
        .map(|(_, t)| t.clone())
        .collect();
    (chosen, rest)
}

/// Held-out (magnitude, color) pairs for the percep split.
///
/// Pairs are taken in shuffled order, skipping any pair that would be the
/// sixth held-out color of its magnitude, so the scene sampler always
/// terminates.
fn sample_percep_holdouts(master_seed: u64, count: usize) -> Vec<(u8, u8)> {
    let mut stream = derive_stream(master_seed, "percep-holdouts");
    let mut pairs: Vec<(u8, u8)> = (0..10u8)
        .flat_map(|m| (0..NUM_COLORS as u8).map(move |c| (m, c)))
        .collect();
    stream.shuffle(&mut pairs);
    let mut held_per_magnitude = [0usize; 10];
    let mut out = Vec::with_capacity(count);
    for (m, c) in pairs {
        if out.len() == count {
            break;
        }
        if held_per_magnitude[m as usize] + 1 < NUM_COLORS {
            held_per_magnitude[m as usize] += 1;
            out.push((m, c));
        }
    }
    out
}

/// The five distinct-position permutations other than (left, right, bottom),
/// in enumeration order.
fn easy_heldout_condition_seqs() -> Vec<[Condition; 3]> {
    let train = [Condition::Left, Condition::Right, Condition::Bottom];
    enumerate_condition_sequences(&Grammar::easy())
        .into_iter()
        .filter(|seq| {
            let mut sorted = *seq;
            sorted.sort();
            sorted == [Condition::Left, Condition::Right, Condition::Bottom] && *seq != train
        })
        .collect()
}

fn easy_train_operation_seqs() -> Vec<Vec<Operation>> {
    use Operation::{Add, Sub};
    vec![vec![Add, Sub], vec![Add, Add], vec![Sub, Sub], vec![Add], vec![Sub]]
}

/// Plans one of the four named splits.
pub fn plan_split(
    name: &str,
    master_seed: u64,
    overrides: &Overrides,
) -> Result<SplitManifest, PlanError> {
    let reject_if = |cond: bool, msg: &str| {
        if cond {
            Err(PlanError::OverrideConflict(msg.to_string()))
        } else {
            Ok(())
        }
    };

    let (grammar, default_size) = match name {
        "easy" | "percep" => (Grammar::easy(), 5000),
        "medium" | "hard" => (Grammar::full(), 30_000),
        other => return Err(PlanError::UnknownSplit(other.to_string())),
    };

    let all_conds = enumerate_condition_sequences(&grammar);
    let all_ops = enumerate_operation_sequences(&grammar);

    let (train_conds, heldout_conds, train_ops, heldout_ops) = match name {
        "easy" | "percep" => {
            reject_if(
                overrides.train_cond_count.is_some() || overrides.train_op_count.is_some(),
                "easy/percep train sequences are fixed",
            )?;
            let train_conds = vec![[Condition::Left, Condition::Right, Condition::Bottom]];
            let train_ops = easy_train_operation_seqs();
            let heldout_ops = vec![vec![Operation::Sub, Operation::Add]];
            (train_conds, easy_heldout_condition_seqs(), train_ops, heldout_ops)
        }
        _ => {
            let cond_count = overrides.train_cond_count.unwrap_or(match name {
                "medium" => 5,
                _ => 55,
            });
            let op_count = overrides.train_op_count.unwrap_or(match name {
                "medium" => 30,
                _ => 36,
            });
            reject_if(
                cond_count == 0 || cond_count >= all_conds.len(),
                &format!("train_cond_count must be in [1, {}]", all_conds.len() - 1),
            )?;
            reject_if(
                op_count == 0 || op_count >= all_ops.len(),
                &format!("train_op_count must be in [1, {}]", all_ops.len() - 1),
            )?;
            let (tc, hc) = sample_subset(&all_conds, cond_count, master_seed, "cond-seqs");
            let (to, ho) = sample_subset(&all_ops, op_count, master_seed, "op-seqs");
            (tc, hc, to, ho)
        }
    };

    let percep_holdouts = if name == "percep" {
        let count = overrides.percep_holdout_count.unwrap_or(12);
        reject_if(
            count == 0 || count > 10 * (NUM_COLORS - 1),
            "percep_holdout_count must be in [1, 50]",
        )?;
        sample_percep_holdouts(master_seed, count)
    } else {
        reject_if(
            overrides.percep_holdout_count.is_some(),
            "percep_holdout_count only applies to the percep split",
        )?;
        Vec::new()
    };

    let val_percent = overrides.val_percent.unwrap_or(10);
    reject_if(val_percent > 90, "val_percent must be at most 90")?;

    Ok(SplitManifest {
        format_version: FORMAT_VERSION,
        split_name: name.to_string(),
        master_seed,
        grammar: GrammarSpec::from_grammar(&grammar),
        train_condition_seqs: train_conds.iter().map(cond_seq_to_string).collect(),
        heldout_condition_seqs: heldout_conds.iter().map(cond_seq_to_string).collect(),
        train_operation_seqs: train_ops.iter().map(|s| op_seq_to_string(s)).collect(),
        heldout_operation_seqs: heldout_ops.iter().map(|s| op_seq_to_string(s)).collect(),
        palette: Palette::default(),
        color_names: default_color_names(),
        percep_holdouts,
        dataset_size: overrides.dataset_size.unwrap_or(default_size),
        support_size: overrides.support_size.unwrap_or(3),
        val_percent,
        test_samples_per_axis: overrides.test_samples_per_axis.unwrap_or(1000),
        glyph_source: GlyphSource::builtin(64),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn easy_split_composition_is_fixed() {
        let m = plan_split("easy", 42, &Overrides::default()).unwrap();
        assert_eq!(m.train_condition_seqs, vec!["left,right,bottom"]);
        let train_ops: HashSet<&str> = m.train_operation_seqs.iter().map(String::as_str).collect();
        assert_eq!(
            train_ops,
            HashSet::from(["add,sub", "add,add", "sub,sub", "add", "sub"])
        );
        assert_eq!(m.heldout_operation_seqs, vec!["sub,add"]);
        assert_eq!(m.num_training_tasks(), 5);
        assert_eq!(m.dataset_size, 5000);
        // The five distinct-position permutations.
        assert_eq!(
            m.heldout_condition_seqs,
            vec![
                "left,bottom,right",
                "right,left,bottom",
                "right,bottom,left",
                "bottom,left,right",
                "bottom,right,left"
            ]
        );
    }

    #[test]
    fn medium_and_hard_task_counts() {
        let m = plan_split("medium", 1, &Overrides::default()).unwrap();
        assert_eq!(m.train_condition_seqs.len(), 5);
        assert_eq!(m.train_operation_seqs.len(), 30);
        assert_eq!(m.num_training_tasks(), 150);
        assert_eq!(m.heldout_condition_seqs.len(), 120);
        assert_eq!(m.heldout_operation_seqs.len(), 12);

        let h = plan_split("hard", 1, &Overrides::default()).unwrap();
        assert_eq!(h.num_training_tasks(), 55 * 36);
        assert_eq!(h.dataset_size, 30_000);
    }

    #[test]
    fn train_and_heldout_sets_are_disjoint() {
        for (name, seed) in [("easy", 0u64), ("medium", 7), ("hard", 9), ("percep", 3)] {
            let m = plan_split(name, seed, &Overrides::default()).unwrap();
            let tc: HashSet<_> = m.train_condition_seqs.iter().collect();
            let hc: HashSet<_> = m.heldout_condition_seqs.iter().collect();
            assert!(tc.is_disjoint(&hc), "{name} condition seqs overlap");
            let to: HashSet<_> = m.train_operation_seqs.iter().collect();
            let ho: HashSet<_> = m.heldout_operation_seqs.iter().collect();
            assert!(to.is_disjoint(&ho), "{name} operation seqs overlap");
        }
    }

    #[test]
    fn unknown_split_is_rejected() {
        assert!(matches!(
            plan_split("bogus", 0, &Overrides::default()),
            Err(PlanError::UnknownSplit(_))
        ));
    }

    #[test]
    fn override_conflicts_are_rejected() {
        let over = Overrides { train_op_count: Some(50), ..Default::default() };
        assert!(matches!(
            plan_split("medium", 0, &over),
            Err(PlanError::OverrideConflict(_))
        ));
        let over = Overrides { train_op_count: Some(30), ..Default::default() };
        assert!(plan_split("medium", 0, &over).is_ok());
        let over = Overrides { train_cond_count: Some(2), ..Default::default() };
        assert!(matches!(plan_split("easy", 0, &over), Err(PlanError::OverrideConflict(_))));
    }

    #[test]
    fn percep_holdouts_default_twelve_and_never_exhaust_a_magnitude() {
        let m = plan_split("percep", 42, &Overrides::default()).unwrap();
        assert_eq!(m.percep_holdouts.len(), 12);
        let unique: HashSet<_> = m.percep_holdouts.iter().collect();
        assert_eq!(unique.len(), 12);
        for magnitude in 0..10u8 {
            let held = m.percep_holdouts.iter().filter(|(m, _)| *m == magnitude).count();
            assert!(held < NUM_COLORS);
        }
        // Maximal holdout still leaves one color per magnitude.
        let over = Overrides { percep_holdout_count: Some(50), ..Default::default() };
        let m = plan_split("percep", 9, &over).unwrap();
        assert_eq!(m.percep_holdouts.len(), 50);
        for magnitude in 0..10u8 {
            assert_eq!(m.percep_holdouts.iter().filter(|(m, _)| *m == magnitude).count(), 5);
        }
        let over = Overrides { percep_holdout_count: Some(51), ..Default::default() };
        assert!(matches!(plan_split("percep", 9, &over), Err(PlanError::OverrideConflict(_))));
    }

    #[test]
    fn planning_is_seed_deterministic() {
        let a = plan_split("hard", 77, &Overrides::default()).unwrap();
        let b = plan_split("hard", 77, &Overrides::default()).unwrap();
        let c = plan_split("hard", 78, &Overrides::default()).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.train_condition_seqs, c.train_condition_seqs);
        assert_eq!(a.to_json(), b.to_json());
    }

    #[test]
    fn override_parsing() {
        let o = Overrides::parse(&["dataset_size=500".into(), "support_size=5".into()]).unwrap();
        assert_eq!(o.dataset_size, Some(500));
        assert_eq!(o.support_size, Some(5));
        assert!(matches!(
            Overrides::parse(&["bogus=1".into()]),
            Err(PlanError::UnknownOverrideKey(_))
        ));
        assert!(matches!(
            Overrides::parse(&["dataset_size=abc".into()]),
            Err(PlanError::BadOverrideValue { .. })
        ));
    }

    #[test]
    fn manifest_round_trips_through_json() {
        let m = plan_split("percep", 5, &Overrides::default()).unwrap();
        let parsed: SplitManifest = serde_json::from_str(&m.to_json()).unwrap();
        assert_eq!(parsed, m);
        assert!(m.to_json().contains("\"split_name\": \"percep\""));
    }
}
