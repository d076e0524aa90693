//! Reading, aligning and preparing meter data.
//!
//! File shapes:
//!
//! * aggregate CSV: `timestamp,line_1,...,line_R`
//! * appliance CSV: `timestamp,watts`
//! * estimates CSV: `timestamp,<appliance name>...`
//! * truth CSV: `timestamp,<appliance name>...` holding zero-based state indices
//!
//! Timestamps are integer epoch seconds, strictly increasing within a file.
//! A dataset bundle is a directory holding `aggregate.csv`, one
//! `appliance_<name>.csv` per appliance and optionally `model.json` and
//! `truth.csv` when the ground truth is known.

mod csvio;
mod synthetic;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub use csvio::{read_stream, write_stream, Stream};
pub use synthetic::{generate, joint_signature_separation, Connectivity, Levels, SyntheticSpec};

use crate::error::{Error, Result};
use crate::setfn::{AggregateSeries, HouseholdModel, StateAssignment};
use crate::training::ApplianceSeries;

pub const AGGREGATE_FILE: &str = "aggregate.csv";
pub const MODEL_FILE: &str = "model.json";
pub const TRUTH_FILE: &str = "truth.csv";
const APPLIANCE_PREFIX: &str = "appliance_";

/// Aggregate readings with optional sub-metered readings and planted truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub aggregate: AggregateSeries,
    pub appliances: Option<ApplianceSeries>,
    pub planted_model: Option<HouseholdModel>,
    pub planted_states: Option<StateAssignment>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.aggregate.len()
    }

    pub fn is_empty(&self) -> bool {
        self.aggregate.is_empty()
    }

    pub fn timestamps(&self) -> Option<&[i64]> {
        self.aggregate.timestamps()
    }

    pub fn slice(&self, start: usize, end: usize) -> Dataset {
        Dataset {
            aggregate: self.aggregate.slice(start, end),
            appliances: self.appliances.as_ref().map(|a| a.slice(start, end)),
            planted_model: self.planted_model.clone(),
            planted_states: self.planted_states.as_ref().map(|s| s.slice(start, end)),
        }
    }

    /// Unaligned view of the same data, one stream per file.
    pub fn to_streams(&self) -> Result<RawStreams> {
        let ts = self
            .timestamps()
            .ok_or_else(|| Error::InvalidInput("dataset has no timestamps".into()))?
            .to_vec();
        let aggregate = Stream {
            columns: line_columns(self.aggregate.num_lines()),
            timestamps: ts.clone(),
            rows: self.aggregate.rows().map(<[f64]>::to_vec).collect(),
        };
        let appliances = self
            .appliances
            .iter()
            .flat_map(|a| a.names.iter().zip(&a.values))
            .map(|(name, v)| {
                (
                    name.clone(),
                    Stream {
                        columns: vec!["watts".into()],
                        timestamps: ts.clone(),
                        rows: v.iter().map(|&x| vec![x]).collect(),
                    },
                )
            })
            .collect();
        Ok(RawStreams {
            aggregate,
            appliances,
        })
    }
}

fn line_columns(r: usize) -> Vec<String> {
    (1..=r).map(|k| format!("line_{k}")).collect()
}

/// Streams as read from disk, before timestamp alignment.
#[derive(Debug, Clone, PartialEq)]
pub struct RawStreams {
    pub aggregate: Stream,
    pub appliances: Vec<(String, Stream)>,
}

/// Reads an aggregate file and any number of named appliance files.
pub fn load_streams(agg_path: &Path, appliance_paths: &[(String, PathBuf)]) -> Result<RawStreams> {
    let aggregate = read_stream(agg_path, None)?;
    let appliances = appliance_paths
        .iter()
        .map(|(name, p)| Ok((name.clone(), read_stream(p, Some(1))?)))
        .collect::<Result<_>>()?;
    Ok(RawStreams {
        aggregate,
        appliances,
    })
}

/// Keeps only timestamps present in every stream.
pub fn align(raw: &RawStreams) -> Result<Dataset> {
    let mut common: Vec<i64> = raw.aggregate.timestamps.clone();
    for (_, s) in &raw.appliances {
        let set: std::collections::HashSet<i64> = s.timestamps.iter().copied().collect();
        common.retain(|t| set.contains(t));
    }
    if common.is_empty() {
        return Err(Error::EmptyIntersection);
    }
    let pick = |s: &Stream| -> Vec<Vec<f64>> {
        let index: BTreeMap<i64, usize> = s.timestamps.iter().enumerate().map(|(k, &t)| (t, k)).collect();
        common.iter().map(|t| s.rows[index[t]].clone()).collect()
    };
    let aggregate = AggregateSeries::from_rows(pick(&raw.aggregate))?.with_timestamps(common.clone())?;
    let appliances = if raw.appliances.is_empty() {
        None
    } else {
        let names = raw.appliances.iter().map(|(n, _)| n.clone()).collect();
        let values = raw
            .appliances
            .iter()
            .map(|(_, s)| pick(s).into_iter().map(|r| r[0]).collect())
            .collect();
        Some(ApplianceSeries::new(names, values)?.with_timestamps(common)?)
    };
    Ok(Dataset {
        aggregate,
        appliances,
        planted_model: None,
        planted_states: None,
    })
}

/// Loads and inner-joins an aggregate file with appliance files.
pub fn load_csv(agg_path: &Path, appliance_paths: &[(String, PathBuf)]) -> Result<Dataset> {
    align(&load_streams(agg_path, appliance_paths)?)
}

fn bucket_means(s: &Stream) -> Stream {
    let mut out = Stream {
        columns: s.columns.clone(),
        timestamps: Vec::new(),
        rows: Vec::new(),
    };
    let mut count = 0usize;
    for (ts, row) in s.timestamps.iter().zip(&s.rows) {
        let minute = ts.div_euclid(60) * 60;
        if out.timestamps.last() != Some(&minute) {
            if let Some(last) = out.rows.last_mut() {
                last.iter_mut().for_each(|v| *v /= count as f64);
            }
            out.timestamps.push(minute);
            out.rows.push(vec![0.0; row.len()]);
            count = 0;
        }
        let acc = out.rows.last_mut().unwrap();
        acc.iter_mut().zip(row).for_each(|(a, v)| *a += v);
        count += 1;
    }
    if let Some(last) = out.rows.last_mut() {
        last.iter_mut().for_each(|v| *v /= count as f64);
    }
    out
}

/// Averages every stream over whole minutes (floor of the timestamp) and
/// keeps the minutes present in all streams.
pub fn downsample_1min(raw: &RawStreams) -> Result<Dataset> {
    let bucketed = RawStreams {
        aggregate: bucket_means(&raw.aggregate),
        appliances: raw
            .appliances
            .iter()
            .map(|(n, s)| (n.clone(), bucket_means(s)))
            .collect(),
    };
    align(&bucketed)
}

/// First `ceil(T / 2)` ticks for training, the rest for testing.
pub fn split_halves(ds: &Dataset) -> Result<(Dataset, Dataset)> {
    let t = ds.len();
    if t < 2 {
        return Err(Error::InvalidInput(format!("cannot split {t} samples in halves")));
    }
    let cut = t.div_ceil(2);
    Ok((ds.slice(0, cut), ds.slice(cut, t)))
}

fn check_name(name: &str) -> Result<()> {
    let ok = !name.is_empty()
        && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '.');
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "appliance name `{name}` must use only letters, digits, '_', '-' or '.'"
        )))
    }
}

pub fn appliance_file_name(name: &str) -> String {
    format!("{APPLIANCE_PREFIX}{name}.csv")
}

/// Writes a dataset bundle directory, creating it if needed.
pub fn save_dir(ds: &Dataset, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let raw = ds.to_streams()?;
    write_stream(&dir.join(AGGREGATE_FILE), &raw.aggregate)?;
    for (name, s) in &raw.appliances {
        check_name(name)?;
        write_stream(&dir.join(appliance_file_name(name)), s)?;
    }
    if let Some(model) = &ds.planted_model {
        write_model(&dir.join(MODEL_FILE), model)?;
    }
    if let (Some(states), Some(model)) = (&ds.planted_states, &ds.planted_model) {
        let truth = Stream {
            columns: model.names(),
            timestamps: raw.aggregate.timestamps.clone(),
            rows: (0..states.horizon())
                .map(|t| states.at_time(t).iter().map(|&s| s as f64).collect())
                .collect(),
        };
        write_stream(&dir.join(TRUTH_FILE), &truth)?;
    }
    Ok(())
}

/// Names of the appliance files in a bundle. Uses the order of `model.json`
/// when present, alphabetical order otherwise.
pub fn bundle_appliances(dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    let model_path = dir.join(MODEL_FILE);
    let names: Vec<String> = if model_path.exists() {
        read_model(&model_path)?.names()
    } else {
        let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
        let mut names = Vec::new();
        for entry in entries {
            let entry = entry.map_err(|e| Error::io(dir, e))?;
            let file = entry.file_name().to_string_lossy().into_owned();
            if let Some(name) = file.strip_prefix(APPLIANCE_PREFIX).and_then(|f| f.strip_suffix(".csv")) {
                names.push(name.to_string());
            }
        }
        names.sort();
        names
    };
    names
        .into_iter()
        .map(|n| {
            let p = dir.join(appliance_file_name(&n));
            if p.exists() {
                Ok((n, p))
            } else {
                Err(Error::io(&p, std::io::Error::new(std::io::ErrorKind::NotFound, "missing appliance file")))
            }
        })
        .collect()
}

/// Reads a dataset bundle directory.
pub fn load_dir(dir: &Path) -> Result<Dataset> {
    let appliance_paths = bundle_appliances(dir)?;
    let mut ds = load_csv(&dir.join(AGGREGATE_FILE), &appliance_paths)?;
    let model_path = dir.join(MODEL_FILE);
    if model_path.exists() {
        let model = read_model(&model_path)?;
        let truth_path = dir.join(TRUTH_FILE);
        if truth_path.exists() {
            let truth = read_stream(&truth_path, Some(model.num_appliances()))?;
            let index: BTreeMap<i64, usize> =
                truth.timestamps.iter().enumerate().map(|(k, &t)| (t, k)).collect();
            let mut states = Vec::with_capacity(ds.len() * model.num_appliances());
            for t in ds.timestamps().unwrap_or_default() {
                let k = *index.get(t).ok_or_else(|| {
                    Error::InvalidInput(format!("{}: no state row for timestamp {t}", truth_path.display()))
                })?;
                for &v in &truth.rows[k] {
                    if v < 0.0 || v.fract() != 0.0 {
                        return Err(Error::InvalidInput(format!(
                            "{}: state `{v}` is not a non-negative integer",
                            truth_path.display()
                        )));
                    }
                    states.push(v as usize);
                }
            }
            let s = StateAssignment::from_time_major(model.num_appliances(), states)?;
            s.validate(&model, ds.len())?;
            ds.planted_states = Some(s);
        }
        ds.planted_model = Some(model);
    }
    Ok(ds)
}

pub fn read_model(path: &Path) -> Result<HouseholdModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_model(path: &Path, model: &HouseholdModel) -> Result<()> {
    let mut text = model.to_json();
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Appliance-level estimates as written by the disaggregation command.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimates {
    pub timestamps: Vec<i64>,
    pub names: Vec<String>,
    /// `power[i][t]`.
    pub power: Vec<Vec<f64>>,
}

pub fn write_estimates(path: &Path, est: &Estimates) -> Result<()> {
    let horizon = est.timestamps.len();
    let stream = Stream {
        columns: est.names.clone(),
        timestamps: est.timestamps.clone(),
        rows: (0..horizon).map(|t| est.power.iter().map(|p| p[t]).collect()).collect(),
    };
    write_stream(path, &stream)
}

pub fn read_estimates(path: &Path) -> Result<Estimates> {
    let s = read_stream(path, None)?;
    let power = (0..s.width())
        .map(|i| s.rows.iter().map(|r| r[i]).collect())
        .collect();
    Ok(Estimates {
        timestamps: s.timestamps,
        names: s.columns,
        power,
    })
}
