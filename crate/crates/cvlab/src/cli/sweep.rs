//! `sweep`: a config template run over the cartesian product of a parameter
//! grid. Parameters are JSON pointers into the template, e.g.
//! `{"parameters": {"/grid/tau": [1.0, 1.5], "/model/gamma_mode": ["literal", "solved"]}}`.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::Deserialize;
use serde_json::Value;

use super::config::RunConfig;
use super::run::{self, Overrides, RunSummary};
use crate::error::{CvError, Result};
use crate::fmt_f64;

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParameterGrid {
    /// Insertion order is kept so that the point numbering is stable.
    pub parameters: serde_json::Map<String, Value>,
}

impl ParameterGrid {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| CvError::Config(format!("{}: {e}", path.display())))
    }

    fn axes(&self) -> Result<Vec<(String, Vec<Value>)>> {
        self.parameters
            .iter()
            .map(|(k, v)| match v {
                Value::Array(vals) if !vals.is_empty() => Ok((k.clone(), vals.clone())),
                _ => Err(CvError::Config(format!("parameter `{k}` needs a non-empty array of values"))),
            })
            .collect()
    }

    /// Cartesian product, last parameter fastest.
    pub fn points(&self) -> Result<Vec<Vec<(String, Value)>>> {
        let axes = self.axes()?;
        let mut points: Vec<Vec<(String, Value)>> = vec![vec![]];
        for (name, values) in &axes {
            points = points
                .into_iter()
                .flat_map(|p| {
                    values.iter().map(move |v| {
                        let mut q = p.clone();
                        q.push((name.clone(), v.clone()));
                        q
                    })
                })
                .collect();
        }
        Ok(points)
    }
}

/// Substitutes one grid point into the template.
pub fn instantiate(template: &Value, point: &[(String, Value)]) -> Result<RunConfig> {
    let mut doc = template.clone();
    for (pointer, value) in point {
        let missing = || CvError::Config(format!("parameter `{pointer}` does not resolve in the template"));
        if let Some(slot) = doc.pointer_mut(pointer) {
            *slot = value.clone();
            continue;
        }
        // a field left at its default: insert it into the parent object
        let (parent, key) = pointer.rsplit_once('/').ok_or_else(missing)?;
        match doc.pointer_mut(parent) {
            Some(Value::Object(map)) => {
                map.insert(key.replace("~1", "/").replace("~0", "~"), value.clone());
            }
            _ => return Err(missing()),
        }
    }
    RunConfig::from_value(doc)
}

#[derive(Clone, Debug)]
pub struct SweepRow {
    pub index: usize,
    pub point: Vec<(String, Value)>,
    pub outcome: std::result::Result<RunSummary, String>,
}

/// Worker count from `CVLAB_THREADS`, if set to a positive integer.
pub fn thread_cap() -> Option<usize> {
    std::env::var("CVLAB_THREADS")
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
}

fn run_point(
    template: &Value,
    overrides: &Overrides,
    out_dir: &Path,
    index: usize,
    point: &[(String, Value)],
) -> SweepRow {
    let dir = out_dir.join(format!("point_{index:03}"));
    let outcome = instantiate(template, point)
        .and_then(|mut cfg| {
            overrides.apply(&mut cfg)?;
            cfg.name = format!("{}_point_{index:03}", cfg.name);
            run::execute(&cfg, &dir)
        })
        .map_err(|e| e.to_string());
    match &outcome {
        Ok(s) if s.ok() => info!("point {index}: done"),
        Ok(s) => warn!("point {index}: {}", s.error.as_deref().unwrap_or("aborted")),
        Err(e) => warn!("point {index}: {e}"),
    }
    SweepRow {
        index,
        point: point.to_vec(),
        outcome,
    }
}

#[cfg(feature = "parallel")]
fn run_all(
    template: &Value,
    overrides: &Overrides,
    out_dir: &Path,
    points: &[Vec<(String, Value)>],
) -> Result<Vec<SweepRow>> {
    use rayon::prelude::*;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_cap() {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| CvError::InvalidArgument(format!("worker pool: {e}")))?;
    Ok(pool.install(|| {
        points
            .par_iter()
            .enumerate()
            .map(|(i, p)| run_point(template, overrides, out_dir, i, p))
            .collect()
    }))
}

#[cfg(not(feature = "parallel"))]
fn run_all(
    template: &Value,
    overrides: &Overrides,
    out_dir: &Path,
    points: &[Vec<(String, Value)>],
) -> Result<Vec<SweepRow>> {
    Ok(points
        .iter()
        .enumerate()
        .map(|(i, p)| run_point(template, overrides, out_dir, i, p))
        .collect())
}

fn cell(v: &Value) -> String {
    match v {
        Value::Number(n) => n.as_f64().map_or_else(|| n.to_string(), fmt_f64),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
    .replace([',', '\n'], ";")
}

pub fn write_aggregate<W: Write>(mut w: W, rows: &[SweepRow]) -> Result<()> {
    let names: Vec<&str> = rows
        .first()
        .map(|r| r.point.iter().map(|(k, _)| k.as_str()).collect())
        .unwrap_or_default();
    let mut header = vec!["point".to_string()];
    header.extend(names.iter().map(|s| s.to_string()));
    header.extend(
        [
            "status",
            "final_fidelity",
            "final_squeezing_db",
            "final_norm",
            "max_leakage",
            "runtime_s",
            "error",
        ]
        .map(String::from),
    );
    writeln!(w, "{}", header.join(","))?;
    for r in rows {
        let mut cells = vec![r.index.to_string()];
        cells.extend(r.point.iter().map(|(_, v)| cell(v)));
        match &r.outcome {
            Ok(s) => {
                cells.push(s.status.clone());
                for x in [s.final_fidelity, s.final_squeezing_db, s.final_norm, s.max_leakage, s.runtime_s] {
                    cells.push(fmt_f64(x));
                }
                cells.push(s.error.clone().unwrap_or_default().replace([',', '\n'], ";"));
            }
            Err(e) => {
                cells.push("error".into());
                cells.extend(std::iter::repeat_n(String::new(), 5));
                cells.push(e.replace([',', '\n'], ";"));
            }
        }
        writeln!(w, "{}", cells.join(","))?;
    }
    Ok(())
}

/// Runs every grid point into `out_dir/point_<i>` and writes
/// `out_dir/sweep.csv`. Per-point failures are recorded, not propagated.
pub fn execute(template_path: &Path, grid: &ParameterGrid, overrides: &Overrides, out_dir: &Path) -> Result<Vec<SweepRow>> {
    let text = fs::read_to_string(template_path)?;
    let template: Value = serde_json::from_str(&text)?;
    // The template itself must be a valid config.
    RunConfig::from_value(template.clone())?;
    let points = grid.points()?;
    fs::create_dir_all(out_dir)?;
    info!("sweep over {} point(s)", points.len());
    let rows = run_all(&template, overrides, out_dir, &points)?;
    let mut w = BufWriter::new(File::create(out_dir.join("sweep.csv"))?);
    write_aggregate(&mut w, &rows)?;
    w.flush()?;
    Ok(rows)
}

pub fn default_out_dir(template_path: &Path) -> PathBuf {
    let stem = template_path.file_stem().and_then(|s| s.to_str()).unwrap_or("sweep");
    PathBuf::from("out").join(format!("{stem}_sweep"))
}
