use std::collections::BTreeMap;
use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// States `s_0..s_L` sampled every `dt` time units.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T: Real> {
    pub states: Vec<T>,
    pub dt: T,
}

impl<T: Real> Trajectory<T> {
    pub fn new(states: Vec<T>, dt: T) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::TrajectoryTooShort {
                transitions: 0,
                needed: 1,
            });
        }
        if !(dt > T::zero()) || !dt.is_finite_real() {
            return Err(Error::InvalidConfig(format!("dt must be positive, got {dt}")));
        }
        if states.iter().any(|s| !s.is_finite_real()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { states, dt })
    }

    /// Number of transitions L.
    pub fn transitions(&self) -> usize {
        self.states.len() - 1
    }

    pub(crate) fn require(&self, needed: usize) -> Result<()> {
        if self.transitions() < needed {
            return Err(Error::TrajectoryTooShort {
                transitions: self.transitions(),
                needed,
            });
        }
        Ok(())
    }
}

/// Overlapping windows `(s_j, …, s_{j+window−1})`, `j = 0..=L+1−window`.
pub fn split_trajectory<T: Real>(traj: &Trajectory<T>, window: usize) -> Result<Vec<Trajectory<T>>> {
    if !(2..=3).contains(&window) {
        return Err(Error::InvalidConfig(format!("window must be 2 or 3, got {window}")));
    }
    traj.require(window - 1)?;
    Ok(traj
        .states
        .windows(window)
        .map(|w| Trajectory {
            states: w.to_vec(),
            dt: traj.dt,
        })
        .collect())
}

/// Sidecar manifest for a trajectory CSV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryManifest {
    pub dt: f64,
    #[serde(rename = "L")]
    pub transitions: usize,
}

#[derive(Serialize, Deserialize)]
struct TrajectoryRow {
    traj_id: usize,
    step: usize,
    state: f64,
}

/// Writes `traj_id,step,state` rows and the `{"dt":…,"L":…}` manifest.
/// All trajectories must share `dt` and `L`.
pub fn write_trajectories<T: Real>(csv_path: &Path, manifest_path: &Path, trajs: &[Trajectory<T>]) -> Result<()> {
    let first = trajs.first().ok_or(Error::EmptyBuffer)?;
    let manifest = TrajectoryManifest {
        dt: first.dt.as_f64(),
        transitions: first.transitions(),
    };
    if trajs
        .iter()
        .any(|t| t.dt != first.dt || t.transitions() != manifest.transitions)
    {
        return Err(Error::InvalidConfig("trajectories differ in dt or length".into()));
    }
    let mut w = csv::Writer::from_path(csv_path)?;
    w.write_record(["traj_id", "step", "state"])?;
    for (id, t) in trajs.iter().enumerate() {
        for (step, s) in t.states.iter().enumerate() {
            w.write_record([id.to_string(), step.to_string(), format!("{:.16e}", s.as_f64())])?;
        }
    }
    w.flush()?;
    serde_json::to_writer(File::create(manifest_path)?, &manifest)?;
    Ok(())
}

/// Reads trajectories written by [`write_trajectories`]. Rows may appear in
/// any order, but each trajectory must have steps `0..=L` exactly once.
pub fn read_trajectories<T: Real>(csv_path: &Path, manifest_path: &Path) -> Result<Vec<Trajectory<T>>> {
    let manifest: TrajectoryManifest = serde_json::from_reader(File::open(manifest_path)?)?;
    let len = manifest.transitions + 1;
    let mut rdr = csv::Reader::from_path(csv_path)?;
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["traj_id", "step", "state"] {
        return Err(Error::Parse {
            line: 1,
            message: "expected header traj_id,step,state".into(),
        });
    }
    let mut by_id: BTreeMap<usize, Vec<Option<f64>>> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let row: TrajectoryRow = rec.deserialize(Some(&headers)).map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        if row.step >= len {
            return Err(Error::Parse {
                line,
                message: format!("step {} beyond L = {}", row.step, manifest.transitions),
            });
        }
        let slot = &mut by_id.entry(row.traj_id).or_insert_with(|| vec![None; len])[row.step];
        if slot.replace(row.state).is_some() {
            return Err(Error::Parse {
                line,
                message: format!("duplicate step {} of trajectory {}", row.step, row.traj_id),
            });
        }
    }
    if by_id.is_empty() {
        return Err(Error::EmptyFile);
    }
    let dt = T::lit(manifest.dt);
    by_id
        .into_iter()
        .map(|(id, steps)| {
            let states = steps
                .into_iter()
                .map(|s| s.map(T::lit))
                .collect::<Option<Vec<T>>>()
                .ok_or_else(|| Error::InvalidConfig(format!("trajectory {id} is missing steps")))?;
            Trajectory::new(states, dt)
        })
        .collect()
}
