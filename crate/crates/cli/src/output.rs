//! In-memory run results, flushed to the output directory only on success.

use std::fs;
use std::path::Path;

use gaborheat::propagator::Trajectory;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::config::{RunConfig, TrajectoryLayout};
use crate::error::CliError;

#[derive(Debug, Default)]
pub struct Run {
    files: Vec<(String, Vec<u8>)>,
    pub scalars: Map<String, Value>,
    pub warnings: Vec<String>,
}

impl Run {
    pub fn file(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        self.files.push((name.into(), bytes));
    }

    /// Writes through a sink that expects `std::io::Write`.
    pub fn write_with(
        &mut self,
        name: impl Into<String>,
        write: impl FnOnce(&mut Vec<u8>) -> gaborheat::Result<()>,
    ) -> Result<(), CliError> {
        let mut buf = Vec::new();
        write(&mut buf)?;
        self.file(name, buf);
        Ok(())
    }

    pub fn csv<I, R>(&mut self, name: &str, header: &[&str], rows: I) -> Result<(), CliError>
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator<Item = String>,
    {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for row in rows {
            w.write_record(row)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Io(e.into_error()))?;
        self.file(name, bytes);
        Ok(())
    }

    pub fn scalar(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).unwrap_or(Value::Null);
        self.scalars.insert(key.to_string(), v);
    }

    pub fn trajectory(&mut self, stem: &str, traj: &Trajectory, layout: TrajectoryLayout) -> Result<(), CliError> {
        match layout {
            TrajectoryLayout::Long => {
                let rows = traj.times.iter().zip(&traj.states).flat_map(|(&t, u)| {
                    let grid = *u.grid();
                    u.values().iter().enumerate().map(move |(i, v)| {
                        [t, i as f64, grid.point(i)[0], v.re, v.im].map(|x| x.to_string())
                    })
                });
                self.csv(&format!("{stem}.csv"), &["t", "index", "x", "re", "im"], rows)
            }
            TrajectoryLayout::Slices => {
                for (i, u) in traj.states.iter().enumerate() {
                    self.write_with(format!("{stem}_{i:04}.csv"), |b| u.write_csv(b))?;
                }
                self.csv(
                    &format!("{stem}_times.csv"),
                    &["slice", "t"],
                    traj.times.iter().enumerate().map(|(i, t)| [i.to_string(), t.to_string()]),
                )
            }
        }
    }

    pub fn names(&self) -> Vec<String> {
        self.files.iter().map(|(n, _)| n.clone()).collect()
    }

    /// Writes all files, then `<command>.manifest.json`.
    pub fn flush(self, dir: &Path, manifest: &Manifest) -> Result<(), CliError> {
        fs::create_dir_all(dir)?;
        for (name, bytes) in &self.files {
            fs::write(dir.join(name), bytes)?;
        }
        let text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
        fs::write(dir.join(format!("{}.manifest.json", manifest.command)), text + "\n")?;
        Ok(())
    }
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub version: &'static str,
    pub config: RunConfig,
    pub seed: u64,
    pub threads: usize,
    pub wall_time_s: f64,
    pub outputs: Vec<String>,
    pub scalars: Map<String, Value>,
    pub warnings: Vec<String>,
}
