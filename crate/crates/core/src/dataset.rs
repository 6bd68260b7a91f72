//! On-disk dataset layout and loading.
//!
//! A generated split directory contains:
//!
//! ```text
//! manifest.json                       split recipe (canonical key order)
//! tasks/{train,val,test_op,test_order[,test_percep]}.jsonl
//! episodes/<part>.jsonl               written by episode sampling
//! images/<sample_id>.ppm              with --images
//! text/<part>.jsonl                   with --text
//! ```
//!
//! Task lines are `{task_id, program, samples: [{sample_id, scene, output}]}`
//! with fixed field order; all JSON numbers are integers.

use crate::manifest::SplitManifest;
use crate::scene::Scene;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use thiserror::Error;

/// Episode ids are offset per part so one predictions file can span parts.
const EPISODE_ID_STRIDE: u64 = 10_000_000;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed JSON in {path} line {line}: {source}")]
    Json {
        path: String,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("unknown part `{0}` (expected train, val, test_op, test_order or test_percep)")]
    UnknownPart(String),
    #[error("part `{0}` has no tasks file in this dataset")]
    MissingPart(Part),
    #[error("episodes for part `{0}` not found; run the episode sampler first")]
    MissingEpisodes(Part),
    #[error("unknown sample id {0}")]
    UnknownSample(u64),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io { path: path.display().to_string(), source }
}

/// The five dataset parts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Part {
    Train,
    Val,
    TestOp,
    TestOrder,
    TestPercep,
}

impl Part {
    pub const ALL: [Part; 5] =
        [Part::Train, Part::Val, Part::TestOp, Part::TestOrder, Part::TestPercep];

    pub fn name(self) -> &'static str {
        match self {
            Part::Train => "train",
            Part::Val => "val",
            Part::TestOp => "test_op",
            Part::TestOrder => "test_order",
            Part::TestPercep => "test_percep",
        }
    }

    /// First episode id of this part's range.
    pub fn episode_base(self) -> u64 {
        (self as u64) * EPISODE_ID_STRIDE
    }

    /// Inverse of [`Part::episode_base`] over id ranges.
    pub fn of_episode_id(id: u64) -> Option<Part> {
        Part::ALL.get((id / EPISODE_ID_STRIDE) as usize).copied()
    }
}

impl fmt::Display for Part {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Part {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Part::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| DatasetError::UnknownPart(s.to_string()))
    }
}

/// One labeled sample: full scene ground truth plus the executed output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub sample_id: u64,
    pub scene: Scene,
    pub output: i64,
}

/// One task line: the hidden program in canonical DSL text and its samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub task_id: u64,
    pub program: String,
    pub samples: Vec<SampleRecord>,
}

/// One few-shot episode; members reference sample ids of the same task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode_id: u64,
    pub task_id: u64,
    pub support: Vec<u64>,
    pub query: u64,
}

/// One text-modality line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextRecord {
    pub sample_id: u64,
    pub text: String,
}

/// Writes records as compact JSONL with LF line endings.
pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<(), DatasetError> {
    let file = std::fs::File::create(path).map_err(io_err(path))?;
    let mut w = std::io::BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, r).map_err(|source| DatasetError::Json {
            path: path.display().to_string(),
            line: 0,
            source,
        })?;
        w.write_all(b"\n").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, DatasetError> {
    let file = std::fs::File::open(path).map_err(io_err(path))?;
    let reader = BufReader::new(file);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|source| DatasetError::Json {
            path: path.display().to_string(),
            line: i + 1,
            source,
        })?);
    }
    Ok(out)
}

/// A loaded split directory with an id index over all samples.
pub struct Dataset {
    root: PathBuf,
    pub manifest: SplitManifest,
    parts: HashMap<Part, Vec<TaskRecord>>,
    sample_index: HashMap<u64, (Part, usize, usize)>,
}

impl Dataset {
    pub fn load(root: &Path) -> Result<Self, DatasetError> {
        let manifest_path = root.join("manifest.json");
        let manifest_text =
            std::fs::read_to_string(&manifest_path).map_err(io_err(&manifest_path))?;
        let manifest: SplitManifest =
            serde_json::from_str(&manifest_text).map_err(|source| DatasetError::Json {
                path: manifest_path.display().to_string(),
                line: 0,
                source,
            })?;

        let mut parts = HashMap::new();
        let mut sample_index = HashMap::new();
        for part in Part::ALL {
            let path = root.join("tasks").join(format!("{part}.jsonl"));
            if !path.exists() {
                continue;
            }
            let tasks: Vec<TaskRecord> = read_jsonl(&path)?;
            for (ti, task) in tasks.iter().enumerate() {
                for (si, sample) in task.samples.iter().enumerate() {
                    sample_index.insert(sample.sample_id, (part, ti, si));
                }
            }
            parts.insert(part, tasks);
        }
        Ok(Dataset { root: root.to_path_buf(), manifest, parts, sample_index })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn has_part(&self, part: Part) -> bool {
        self.parts.contains_key(&part)
    }

    pub fn tasks(&self, part: Part) -> Result<&[TaskRecord], DatasetError> {
        self.parts.get(&part).map(Vec::as_slice).ok_or(DatasetError::MissingPart(part))
    }

    pub fn parts_present(&self) -> Vec<Part> {
        Part::ALL.into_iter().filter(|p| self.parts.contains_key(p)).collect()
    }

    pub fn sample(&self, sample_id: u64) -> Result<&SampleRecord, DatasetError> {
        let (part, ti, si) = *self
            .sample_index
            .get(&sample_id)
            .ok_or(DatasetError::UnknownSample(sample_id))?;
        Ok(&self.parts[&part][ti].samples[si])
    }

    /// Which part a sample was emitted in.
    pub fn sample_part(&self, sample_id: u64) -> Result<Part, DatasetError> {
        Ok(self.sample_index.get(&sample_id).ok_or(DatasetError::UnknownSample(sample_id))?.0)
    }

    pub fn episodes_path(&self, part: Part) -> PathBuf {
        self.root.join("episodes").join(format!("{part}.jsonl"))
    }

    pub fn episodes(&self, part: Part) -> Result<Vec<EpisodeRecord>, DatasetError> {
        let path = self.episodes_path(part);
        if !path.exists() {
            return Err(DatasetError::MissingEpisodes(part));
        }
        read_jsonl(&path)
    }

    pub fn has_episodes(&self, part: Part) -> bool {
        self.episodes_path(part).exists()
    }

    pub fn total_samples(&self, part: Part) -> usize {
        self.parts.get(&part).map(|ts| ts.iter().map(|t| t.samples.len()).sum()).unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn part_names_round_trip() {
        for part in Part::ALL {
            assert_eq!(Part::from_str(part.name()).unwrap(), part);
        }
        assert!(Part::from_str("bogus").is_err());
    }

    #[test]
    fn episode_id_ranges_resolve_to_parts() {
        assert_eq!(Part::of_episode_id(0), Some(Part::Train));
        assert_eq!(Part::of_episode_id(10_000_000), Some(Part::Val));
        assert_eq!(Part::of_episode_id(20_000_001), Some(Part::TestOp));
        assert_eq!(Part::of_episode_id(49_999_999), Some(Part::TestPercep));
        assert_eq!(Part::of_episode_id(50_000_000), None);
    }

    #[test]
    fn task_record_serializes_with_fixed_field_order() {
        let record = TaskRecord {
            task_id: 3,
            program: "left,right,bottom | add".to_string(),
            samples: vec![SampleRecord {
                sample_id: 17,
                scene: crate::scene::scene_from_values([1, -2, 3]),
                output: -1,
            }],
        };
        let json = serde_json::to_string(&record).unwrap();
        assert_eq!(
            json,
            "{\"task_id\":3,\"program\":\"left,right,bottom | add\",\"samples\":[{\"sample_id\":17,\
             \"scene\":{\"digits\":[\
             {\"position\":\"left\",\"magnitude\":1,\"color_index\":0,\"glyph_index\":0},\
             {\"position\":\"right\",\"magnitude\":2,\"color_index\":3,\"glyph_index\":0},\
             {\"position\":\"bottom\",\"magnitude\":3,\"color_index\":0,\"glyph_index\":0}\
             ]},\"output\":-1}]}"
        );
        let parsed: TaskRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(parsed, record);
    }

    #[test]
    fn jsonl_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.jsonl");
        let records = vec![
            EpisodeRecord { episode_id: 1, task_id: 0, support: vec![5, 6, 7], query: 8 },
            EpisodeRecord { episode_id: 2, task_id: 0, support: vec![8, 6, 5], query: 7 },
        ];
        write_jsonl(&path, &records).unwrap();
        let loaded: Vec<EpisodeRecord> = read_jsonl(&path).unwrap();
        assert_eq!(loaded, records);
    }
}
