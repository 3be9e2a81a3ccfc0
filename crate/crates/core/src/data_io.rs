//! Dataset files, the uniform trajectory subsampler and train/validation splits.
//!
//! CSV layout: header `traj,t,x1,...,xd`, one row per `(trajectory, step)`,
//! sorted by `(traj, t)`. Labels are integers; only their order matters.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lsem::TrajectoryDataset;

/// Number of trajectories to draw and the seed of the draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsampleSpec {
    pub subsample_size: usize,
    pub seed: u64,
}

/// JSON mirror of a dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct DatasetDocument {
    dim: usize,
    lag_order: usize,
    n_traj: usize,
    horizon: usize,
    trajectories: Vec<Vec<Vec<f64>>>,
}

pub fn load_dataset(path: impl AsRef<Path>, lag_order: usize) -> Result<TrajectoryDataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::artifact(path, e))?;
    read_dataset_csv(BufReader::new(file), lag_order)
}

/// Parses the CSV layout from any reader. Row numbers in errors are file
/// line numbers (the header is line 1).
pub fn read_dataset_csv<R: std::io::Read>(reader: R, lag_order: usize) -> Result<TrajectoryDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    let dim = header.len().saturating_sub(2);
    if header.len() < 3 || &header[0] != "traj" || &header[1] != "t" {
        return Err(Error::Parse {
            row: 1,
            msg: "header must be `traj,t,x1,...,xd` with d >= 1".into(),
        });
    }
    for (k, name) in header.iter().skip(2).enumerate() {
        if name != format!("x{}", k + 1) {
            return Err(Error::Parse {
                row: 1,
                msg: format!("column {} should be `x{}`, found `{name}`", k + 3, k + 1),
            });
        }
    }

    let mut trajectories: Vec<Vec<Vec<f64>>> = Vec::new();
    let mut last: Option<(i64, i64)> = None;
    for record in rdr.records() {
        let record = record?;
        let row = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != dim + 2 {
            return Err(Error::Parse {
                row,
                msg: format!("expected {} columns, found {}", dim + 2, record.len()),
            });
        }
        let label = |k: usize, what: &str| -> Result<i64> {
            record[k].parse::<i64>().map_err(|_| Error::Parse {
                row,
                msg: format!("{what} `{}` is not an integer", &record[k]),
            })
        };
        let (traj, t) = (label(0, "traj")?, label(1, "t")?);
        let slice = (0..dim)
            .map(|i| {
                let cell = &record[i + 2];
                match cell.parse::<f64>() {
                    Ok(v) if v.is_finite() => Ok(v),
                    _ => Err(Error::Parse {
                        row,
                        msg: format!("x{} value `{cell}` is not a finite number", i + 1),
                    }),
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        match last {
            Some((lt, _)) if traj < lt => {
                return Err(Error::Parse {
                    row,
                    msg: format!("trajectory label {traj} after {lt}: rows must be sorted"),
                })
            }
            Some((lt, ls)) if traj == lt && t <= ls => {
                return Err(Error::Parse {
                    row,
                    msg: format!("step {t} after {ls} in trajectory {traj}: rows must be sorted"),
                })
            }
            Some((lt, _)) if traj == lt => trajectories.last_mut().expect("open trajectory").push(slice),
            _ => trajectories.push(vec![slice]),
        }
        last = Some((traj, t));
    }
    if trajectories.is_empty() {
        return Err(Error::Validation("dataset file has no rows".into()));
    }
    let horizon = trajectories[0].len();
    if let Some(n) = trajectories.iter().position(|tr| tr.len() != horizon) {
        return Err(Error::Validation(format!(
            "trajectory {} has {} steps, the first has {horizon}",
            n + 1,
            trajectories[n].len()
        )));
    }
    if horizon <= lag_order {
        return Err(Error::Validation(format!(
            "trajectories have T={horizon} steps, need T > p={lag_order}"
        )));
    }
    TrajectoryDataset::from_trajectories(&trajectories, lag_order)
}

pub fn save_dataset(data: &TrajectoryDataset, path: impl AsRef<Path>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_dataset_csv(data, &mut out)?;
    out.flush()?;
    Ok(())
}

/// Writes the CSV layout with 1-based trajectory and step labels.
pub fn write_dataset_csv<W: Write>(data: &TrajectoryDataset, out: &mut W) -> Result<()> {
    write!(out, "traj,t")?;
    for i in 1..=data.dim() {
        write!(out, ",x{i}")?;
    }
    writeln!(out)?;
    for n in 0..data.n_traj() {
        for t in 0..data.horizon() {
            write!(out, "{},{}", n + 1, t + 1)?;
            for v in data.slice(n, t) {
                write!(out, ",{v}")?;
            }
            writeln!(out)?;
        }
    }
    Ok(())
}

pub fn dataset_to_json(data: &TrajectoryDataset) -> Result<String> {
    let doc = DatasetDocument {
        dim: data.dim(),
        lag_order: data.lag_order(),
        n_traj: data.n_traj(),
        horizon: data.horizon(),
        trajectories: data.to_trajectories(),
    };
    Ok(serde_json::to_string_pretty(&doc)?)
}

pub fn dataset_from_json(text: &str) -> Result<TrajectoryDataset> {
    let doc: DatasetDocument = serde_json::from_str(text)?;
    let data = TrajectoryDataset::from_trajectories(&doc.trajectories, doc.lag_order)?;
    if data.dim() != doc.dim || data.n_traj() != doc.n_traj || data.horizon() != doc.horizon {
        return Err(Error::Validation(
            "declared (dim, n_traj, horizon) disagree with the trajectories".into(),
        ));
    }
    Ok(data)
}

/// Sorted indices of `S` distinct trajectories drawn uniformly without
/// replacement.
pub fn subsample_indices(n_traj: usize, spec: &SubsampleSpec) -> Result<Vec<usize>> {
    if spec.subsample_size == 0 || spec.subsample_size > n_traj {
        return Err(Error::Bounds(format!(
            "subsample size {} must be in 1..={n_traj}",
            spec.subsample_size
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut picked = index::sample(&mut rng, n_traj, spec.subsample_size).into_vec();
    picked.sort_unstable();
    Ok(picked)
}

pub fn subsample(data: &TrajectoryDataset, spec: &SubsampleSpec) -> Result<TrajectoryDataset> {
    data.select(&subsample_indices(data.n_traj(), spec)?)
}

/// Trajectory-level partition: `(train, validation)` sorted index lists.
pub fn split_indices(n_traj: usize, val_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if n_traj < 2 {
        return Err(Error::Bounds(format!(
            "need at least 2 trajectories to split, have {n_traj}"
        )));
    }
    if !(val_fraction > 0.0 && val_fraction < 1.0) {
        return Err(Error::Validation(format!(
            "val_fraction {val_fraction} must lie in (0, 1)"
        )));
    }
    let n_val = ((val_fraction * n_traj as f64).round() as usize).clamp(1, n_traj - 1);
    let mut order: Vec<usize> = (0..n_traj).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut val = order[..n_val].to_vec();
    let mut train = order[n_val..].to_vec();
    val.sort_unstable();
    train.sort_unstable();
    Ok((train, val))
}

pub fn train_val_split(
    data: &TrajectoryDataset,
    val_fraction: f64,
    seed: u64,
) -> Result<(TrajectoryDataset, TrajectoryDataset)> {
    let (train, val) = split_indices(data.n_traj(), val_fraction, seed)?;
    Ok((data.select(&train)?, data.select(&val)?))
}
