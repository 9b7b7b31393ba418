//! `run`: one trajectory from a config, with CSV and JSON artifacts.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use super::config::{FidelityConvention, ModelBlock, Prepared, RunConfig, Source, TargetBlock};
use crate::dynamics::{evolve_with, Method};
use crate::error::{CvError, Result};
use crate::fmt_f64;
use crate::fockspace::StateVector;
use crate::metrics::{self, MetricSeries};
use crate::protocols::{GammaMode, PairRates, PhaseAccumulator};

/// Command-line overrides applied on top of a config.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub steps: Option<usize>,
    pub dims: Option<Vec<usize>>,
    /// `literal`/`solved` for single-mode runs, `formula`/`caption_scaled`
    /// for two-mode runs.
    pub gamma_mode: Option<String>,
    pub seed: Option<u64>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) -> Result<()> {
        if let Some(s) = self.steps {
            cfg.grid.steps = s;
        }
        if let Some(d) = &self.dims {
            // a single value applies to every mode
            cfg.dims = match d.as_slice() {
                [n] => vec![*n; cfg.model.modes()],
                _ => d.clone(),
            };
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(mode) = &self.gamma_mode {
            match &mut cfg.model {
                ModelBlock::SingleSqueeze { gamma_mode, .. } => {
                    *gamma_mode = match mode.as_str() {
                        "literal" => GammaMode::Literal,
                        "solved" => GammaMode::Solved,
                        other => {
                            return Err(CvError::Config(format!(
                                "gamma mode `{other}` is not one of literal, solved"
                            )))
                        }
                    }
                }
                ModelBlock::TwoSqueeze { rates, .. } => {
                    *rates = match mode.as_str() {
                        "formula" | "literal" => PairRates::Formula,
                        "caption_scaled" => PairRates::CaptionScaled { target: 0.5 },
                        other => {
                            return Err(CvError::Config(format!(
                                "gamma mode `{other}` is not one of formula, caption_scaled"
                            )))
                        }
                    }
                }
                _ => return Err(CvError::Config("--gamma-mode needs a squeezing model".into())),
            }
        }
        cfg.validate()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunSummary {
    pub name: String,
    pub model: String,
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub final_fidelity: f64,
    pub final_fidelity_raw: f64,
    pub final_fidelity_normalized: f64,
    pub fidelity_convention: FidelityConvention,
    pub final_squeezing_db: f64,
    /// Same quadrature read from the truncated operator product.
    #[serde(default)]
    pub final_squeezing_db_truncated: f64,
    pub final_norm: f64,
    pub max_leakage: f64,
    pub runtime_s: f64,
    pub flagged: bool,
    pub method: Method,
    pub dims: Vec<usize>,
    pub steps: usize,
    pub tau: f64,
    /// Solved/literal γ for single-mode runs, rate mode for two-mode runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_mode: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub gammas: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_db: Option<f64>,
    /// Weight of the ideal target inside the truncation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_retained: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_f_i: Option<f64>,
    /// Sample times written as `snapshot_<i>.csv`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub snapshot_times: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub within_budget: Option<bool>,
}

impl RunSummary {
    pub fn ok(&self) -> bool {
        self.status == "ok"
    }
}

#[derive(Default)]
struct Rows {
    metrics: MetricSeries,
    leakage: Vec<f64>,
    snapshots: Vec<(f64, StateVector)>,
}

fn mode_label(cfg: &RunConfig, source: &Source) -> (Option<String>, Vec<f64>) {
    match (source, &cfg.model) {
        (Source::Single(r), ModelBlock::SingleSqueeze { gamma_override, .. }) => {
            let label = match (gamma_override, r.protocol.gamma_mode) {
                (Some(_), _) => "override",
                (None, GammaMode::Solved) => "solved",
                (None, GammaMode::Literal) => "literal",
            };
            let mut g: Vec<f64> = r.breakpoints();
            g.insert(0, 0.0);
            let gammas = g.iter().map(|&t| r.gamma.value(t)).collect();
            (Some(label.to_string()), gammas)
        }
        (Source::Two(r), _) => {
            let label = match r.protocol.rates {
                PairRates::Formula => "formula".to_string(),
                PairRates::CaptionScaled { target } => format!("caption_scaled({target})"),
                PairRates::Explicit { .. } => "explicit".to_string(),
            };
            (Some(label), vec![r.gamma1, r.gamma2])
        }
        _ => (None, vec![]),
    }
}

fn phase_series(source: &Source, times: &[f64]) -> Result<Option<Vec<PhaseAccumulator>>> {
    Ok(match source {
        Source::Single(r) => Some(r.phase_series(times)?),
        Source::Two(r) => Some(r.phase_series(times)?),
        _ => None,
    })
}

fn schedule_csv<W: Write>(source: &Source, mut w: W, times: &[f64]) -> Result<()> {
    match source {
        Source::Single(r) => r.write_schedule_csv(&mut w, times)?,
        Source::Two(r) => r.write_schedule_csv(&mut w, times)?,
        Source::Three(p) => p.write_schedule_csv(&mut w, times)?,
        Source::Schedule(s) => {
            writeln!(w, "t,Omega,omega,gamma")?;
            for &t in times {
                let row = [t, s.big_omega.value(t), s.omega.value(t), s.gamma.value(t)];
                let cells: Vec<String> = row.iter().map(|&x| fmt_f64(x)).collect();
                writeln!(w, "{}", cells.join(","))?;
            }
        }
    }
    Ok(())
}

fn write_schedule(source: &Source, path: &Path, times: &[f64]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    schedule_csv(source, &mut w, times)?;
    w.flush()?;
    Ok(())
}

/// One row per observed sample: state metrics, frame phases, then the
/// control values at that time.
fn write_trajectory(path: &Path, rows: &Rows, phases: Option<&[PhaseAccumulator]>, source: &Source) -> Result<()> {
    let m = &rows.metrics;
    let mut controls = Vec::new();
    schedule_csv(source, &mut controls, &m.times)?;
    let controls = String::from_utf8(controls).expect("schedule CSV is UTF-8");
    // drop the leading t column of every schedule line
    let mut tails = controls.lines().map(|l| l.split_once(',').map_or("", |(_, rest)| rest));

    let mut w = BufWriter::new(File::create(path)?);
    let modes = m.mean_photons.first().map_or(0, Vec::len);
    let mut header = String::from("t,norm,leakage,fidelity,fidelity_normalized,squeezing_db,squeezing_db_truncated,f_r,f_i");
    for k in 1..=modes {
        header.push_str(&format!(",mean_n_{k}"));
    }
    match tails.next() {
        Some(h) if !h.is_empty() => writeln!(w, "{header},{h}")?,
        _ => writeln!(w, "{header}")?,
    }
    for i in 0..m.len() {
        let (fr, fi) = phases.map_or((f64::NAN, f64::NAN), |p| (p[i].f_r, p[i].f_i));
        let mut row = vec![
            m.times[i],
            m.norm[i],
            rows.leakage[i],
            m.fidelity[i],
            m.fidelity_normalized[i],
            m.squeezing_db[i],
            m.squeezing_db_truncated[i],
            fr,
            fi,
        ];
        row.extend(&m.mean_photons[i]);
        let mut line = row.into_iter().map(fmt_f64).collect::<Vec<_>>().join(",");
        if let Some(c) = tails.next().filter(|c| !c.is_empty()) {
            line.push(',');
            line.push_str(c);
        }
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

/// Runs `cfg` and writes artifacts into `out_dir`. Errors during the
/// integration (leakage abort, divergence) still produce partial CSVs and a
/// summary with `status = "aborted"`; the summary is returned either way.
/// Only setup and I/O failures are returned as `Err`.
pub fn execute(cfg: &RunConfig, out_dir: &Path) -> Result<RunSummary> {
    let started = Instant::now();
    fs::create_dir_all(out_dir)?;
    let prepared = cfg.prepare()?;
    let Prepared {
        space,
        model,
        grid,
        psi0,
        target,
        target_retained,
        quadrature,
        options,
        source,
    } = &prepared;
    info!(
        "{}: {} on {:?}, {} steps to τ = {}",
        cfg.name,
        cfg.model_label(),
        space.mode_dims(),
        grid.steps,
        grid.t1
    );

    let margin = options.margin.unwrap_or_else(|| space.default_margin());
    let edge = space.edge_mask(margin);
    let sample_times: Vec<f64> = grid.sample_indices(options.samples).into_iter().map(|i| grid.time(i)).collect();
    let snapshot_at: Vec<f64> = cfg
        .snapshots
        .iter()
        .map(|&s| {
            *sample_times
                .iter()
                .min_by(|a, b| (*a - s).abs().total_cmp(&(*b - s).abs()))
                .expect("at least two samples")
        })
        .collect();

    let mut rows = Rows::default();
    let outcome = evolve_with(model, psi0, grid, options, |t, psi| {
        let m = &mut rows.metrics;
        m.times.push(t);
        let n = psi.norm();
        m.norm.push(n);
        m.mean_photons.push(psi.mean_photons());
        rows.leakage.push(if n > 0.0 {
            psi.masked_population(&edge) / (n * n)
        } else {
            0.0
        });
        match target {
            Some(tg) => {
                m.fidelity.push(metrics::fidelity(psi, tg, false)?);
                m.fidelity_normalized.push(metrics::fidelity(psi, tg, true)?);
            }
            None => {
                m.fidelity.push(f64::NAN);
                m.fidelity_normalized.push(f64::NAN);
            }
        }
        let (db, db_truncated) = match quadrature {
            Some(x) => (metrics::squeezing_level(psi, x)?, metrics::squeezing_level_truncated(psi, x)?),
            None => (f64::NAN, f64::NAN),
        };
        m.squeezing_db.push(db);
        m.squeezing_db_truncated.push(db_truncated);
        if snapshot_at.contains(&t) {
            rows.snapshots.push((t, psi.clone()));
        }
        Ok(())
    });

    let (status, error, flagged, method) = match &outcome {
        Ok(traj) => ("ok", None, traj.flagged, traj.method),
        Err(e) => {
            warn!("{}: {e}", cfg.name);
            ("aborted", Some(e.to_string()), true, options.method.resolve(space.total_dim()))
        }
    };
    let done = rows.metrics.len();
    // the sample that triggered an abort is not observed
    let abort_leakage = match &outcome {
        Err(CvError::LeakageAbort { leakage, .. }) => *leakage,
        _ => 0.0,
    };
    let phases = phase_series(source, &rows.metrics.times)?;
    write_schedule(source, &out_dir.join("schedule.csv"), &sample_times)?;
    write_trajectory(&out_dir.join("trajectory.csv"), &rows, phases.as_deref(), source)?;
    rows.metrics.write_csv(BufWriter::new(File::create(out_dir.join("metrics.csv"))?))?;
    for (i, (_, psi)) in rows.snapshots.iter().enumerate() {
        let mut w = BufWriter::new(File::create(out_dir.join(format!("snapshot_{i}.csv")))?);
        psi.write_csv(&mut w)?;
        w.flush()?;
    }

    let last = |v: &[f64]| v.last().copied().unwrap_or(f64::NAN);
    let m = &rows.metrics;
    let (raw, normalized) = (last(&m.fidelity), last(&m.fidelity_normalized));
    let (gamma_mode, gammas) = mode_label(cfg, source);
    let target_db = match (&cfg.target, source) {
        (TargetBlock::Squeezed { r, .. }, _) => Some(metrics::squeezing_from_r(*r)),
        (TargetBlock::Frame { .. }, Source::Single(r)) => Some(metrics::squeezing_from_r(r.protocol.theta.value(grid.t1))),
        (TargetBlock::Frame { .. }, Source::Two(r)) => Some(metrics::squeezing_from_r(r.protocol.theta.value(grid.t1))),
        _ => None,
    };
    let runtime_s = started.elapsed().as_secs_f64();
    let summary = RunSummary {
        name: cfg.name.clone(),
        model: cfg.model_label().to_string(),
        status: status.to_string(),
        error,
        final_fidelity: match cfg.fidelity {
            FidelityConvention::Raw => raw,
            FidelityConvention::Normalized => normalized,
        },
        final_fidelity_raw: raw,
        final_fidelity_normalized: normalized,
        fidelity_convention: cfg.fidelity,
        final_squeezing_db: last(&m.squeezing_db),
        final_squeezing_db_truncated: last(&m.squeezing_db_truncated),
        final_norm: last(&m.norm),
        max_leakage: rows.leakage.iter().copied().fold(abort_leakage, f64::max),
        runtime_s,
        flagged,
        method,
        dims: cfg.dims.clone(),
        steps: cfg.grid.steps,
        tau: cfg.grid.tau,
        gamma_mode,
        gammas,
        target_db,
        target_retained: *target_retained,
        final_f_i: phases.as_ref().and_then(|p| p.last().map(|x| x.f_i)),
        snapshot_times: rows.snapshots.iter().map(|(t, _)| *t).collect(),
        budget_s: cfg.budget_s,
        within_budget: cfg.budget_s.map(|b| runtime_s <= b),
    };
    let json = serde_json::to_string_pretty(&summary)?;
    fs::write(out_dir.join("summary.json"), json + "\n")?;
    info!(
        "{}: {status} after {done} samples, F = {:.6}, S = {:.3} dB, |ψ| = {:.6}, {:.1} s",
        cfg.name, summary.final_fidelity, summary.final_squeezing_db, summary.final_norm, runtime_s
    );
    Ok(summary)
}

/// Output directory: flag, then config field, then `out/<name>`.
pub fn resolve_out_dir(cfg: &RunConfig, flag: Option<&Path>) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| {
            let name = if cfg.name.is_empty() { "run" } else { &cfg.name };
            PathBuf::from("out").join(name)
        })
}
