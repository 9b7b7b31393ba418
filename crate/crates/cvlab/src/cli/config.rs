//! Run configuration (JSON, versioned schema). Times are in units of T and
//! rates in units of 1/T.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::{EvolveOptions, HamiltonianModel, Method, SingleSchedule, TimeGrid};
use crate::error::{CvError, Result};
use crate::fockspace::{self, FockSpace, StateVector};
use crate::frames::Ramp;
use crate::metrics;
use crate::protocols::{
    GammaMode, GammaSchedule, LiteralReading, OmegaRule, PairRates, PhaseRule, ResolvedSingle, ResolvedTwo,
    SingleModeProtocol, ThreeModeProtocol, TwoModeProtocol,
};

pub const SCHEMA_VERSION: u32 = 1;

fn zero_ramp() -> Ramp {
    Ramp::constant(0.0)
}
fn default_gamma0() -> f64 {
    0.5
}
fn default_stage_floor() -> f64 {
    0.01
}
fn default_split() -> f64 {
    0.5
}
fn default_lambda_two() -> f64 {
    0.02
}
fn default_samples() -> usize {
    crate::dynamics::DEFAULT_SAMPLES
}
fn default_warn() -> f64 {
    crate::dynamics::LEAK_WARN
}
fn default_abort() -> Option<f64> {
    Some(crate::dynamics::LEAK_ABORT)
}
fn default_tau1_fraction() -> f64 {
    6.0 / 7.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameBlock {
    pub theta: Ramp,
    #[serde(default = "zero_ramp")]
    pub alpha: Ramp,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelBlock {
    SingleSqueeze {
        frame: FrameBlock,
        phi: f64,
        #[serde(default)]
        gamma_mode: GammaMode,
        #[serde(default = "default_gamma0")]
        gamma0: f64,
        #[serde(default)]
        lambda: f64,
        #[serde(default)]
        literal_reading: LiteralReading,
        #[serde(default)]
        omega_rule: OmegaRule,
        #[serde(default = "default_stage_floor")]
        stage_floor: f64,
        /// Replaces the synthesized γ(t) when set.
        #[serde(default)]
        gamma_override: Option<GammaSchedule>,
    },
    TwoSqueeze {
        frame: FrameBlock,
        phi: f64,
        #[serde(default = "default_lambda_two")]
        lambda: f64,
        #[serde(default)]
        rates: PairRates,
        #[serde(default = "default_split")]
        omega_split: f64,
        #[serde(default)]
        omega_rule: OmegaRule,
    },
    ThreeMode {
        theta1: Ramp,
        theta2: Ramp,
        #[serde(default)]
        alpha1: f64,
        #[serde(default)]
        phase_rule: PhaseRule,
    },
    /// Explicit single-mode controls; all zero gives the empty protocol.
    SingleSchedule {
        #[serde(default = "zero_ramp")]
        big_omega: Ramp,
        #[serde(default = "zero_ramp")]
        omega: Ramp,
        #[serde(default = "zero_ramp")]
        gamma: Ramp,
        #[serde(default)]
        phi: f64,
    },
}

impl ModelBlock {
    pub fn modes(&self) -> usize {
        match self {
            ModelBlock::SingleSqueeze { .. } | ModelBlock::SingleSchedule { .. } => 1,
            ModelBlock::TwoSqueeze { .. } => 2,
            ModelBlock::ThreeMode { .. } => 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    pub steps: usize,
    /// τ/T.
    pub tau: f64,
    /// τ₁/τ for two-stage schedules.
    #[serde(default = "default_tau1_fraction")]
    pub tau1_fraction: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialState {
    #[default]
    Vacuum,
    Basis { occupations: Vec<usize> },
    /// Displacements as [re, im] per mode.
    Coherent { alphas: Vec<[f64; 2]> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetBlock {
    /// Squeezed vacuum with the frame's θ(τ), α(τ).
    Frame {
        #[serde(default)]
        construction: TargetConstruction,
    },
    Squeezed {
        modes: Vec<usize>,
        r: f64,
        phi: f64,
        #[serde(default)]
        construction: TargetConstruction,
    },
    Vacuum,
    None,
}

impl Default for TargetBlock {
    fn default() -> Self {
        TargetBlock::Frame {
            construction: TargetConstruction::default(),
        }
    }
}

/// How a squeezed-vacuum target is put on the truncated basis.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetConstruction {
    /// Closed-form amplitudes cut at the truncation and renormalized.
    #[default]
    Projected,
    /// exp(G)|0⟩ with the truncated generator.
    TruncatedExponential,
}

fn build_target(
    space: &FockSpace,
    modes: &[usize],
    r: f64,
    phi: f64,
    construction: TargetConstruction,
) -> Result<(StateVector, f64)> {
    match construction {
        TargetConstruction::Projected => fockspace::squeezed_vacuum_projected(space, modes, r, phi),
        TargetConstruction::TruncatedExponential => {
            let tail = fockspace::squeezed_tail_mass(space, modes, r)?;
            Ok((fockspace::squeezed_target(space, modes, r, phi)?, 1.0 - tail))
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FidelityConvention {
    #[default]
    Raw,
    Normalized,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureBlock {
    pub modes: Vec<usize>,
    #[serde(default)]
    pub alpha: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeakageBlock {
    #[serde(default)]
    pub margin: Option<usize>,
    #[serde(default = "default_warn")]
    pub warn: f64,
    #[serde(default = "default_abort")]
    pub abort: Option<f64>,
}

impl Default for LeakageBlock {
    fn default() -> Self {
        LeakageBlock {
            margin: None,
            warn: default_warn(),
            abort: default_abort(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub model: ModelBlock,
    pub dims: Vec<usize>,
    pub grid: GridBlock,
    #[serde(default)]
    pub method: Method,
    #[serde(default)]
    pub initial_state: InitialState,
    #[serde(default)]
    pub target: TargetBlock,
    #[serde(default)]
    pub fidelity: FidelityConvention,
    #[serde(default)]
    pub quadrature: Option<QuadratureBlock>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub leakage: LeakageBlock,
    /// Times (units of T) at which the state is dumped.
    #[serde(default)]
    pub snapshots: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    /// Declared wall-time budget in seconds.
    #[serde(default)]
    pub budget_s: Option<f64>,
}

/// Everything a run needs, resolved from a config.
pub struct Prepared {
    pub space: FockSpace,
    pub model: HamiltonianModel,
    pub grid: TimeGrid,
    pub psi0: StateVector,
    pub target: Option<StateVector>,
    /// Weight of the ideal squeezed target kept by the truncation.
    pub target_retained: Option<f64>,
    pub quadrature: Option<metrics::Quadrature>,
    pub options: EvolveOptions,
    pub source: Source,
}

/// The resolved protocol, kept for schedule export and phase integrals.
pub enum Source {
    Single(ResolvedSingle),
    Two(ResolvedTwo),
    Three(ThreeModeProtocol),
    Schedule(SingleSchedule),
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        Self::from_value(value)
    }

    pub fn from_value(value: serde_json::Value) -> Result<Self> {
        match value.get("schema_version").and_then(|v| v.as_u64()) {
            Some(v) if v == SCHEMA_VERSION as u64 => {}
            Some(v) => {
                return Err(CvError::Config(format!(
                    "schema_version {v} is not supported (expected {SCHEMA_VERSION})"
                )))
            }
            None => return Err(CvError::Config("missing schema_version".into())),
        }
        let cfg: RunConfig = serde_json::from_value(value).map_err(|e| CvError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| match e {
            CvError::Config(m) => CvError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let want = self.model.modes();
        if self.dims.len() != want {
            return Err(CvError::Config(format!(
                "{} model needs {want} dims, got {}",
                self.model_label(),
                self.dims.len()
            )));
        }
        if self.grid.steps == 0 || !(self.grid.tau > 0.0) {
            return Err(CvError::Config("grid needs steps > 0 and tau > 0".into()));
        }
        if !(self.grid.tau1_fraction > 0.0 && self.grid.tau1_fraction < 1.0) {
            return Err(CvError::Config("tau1_fraction must lie in (0, 1)".into()));
        }
        if self.samples < 2 {
            return Err(CvError::Config("samples must be at least 2".into()));
        }
        Ok(())
    }

    pub fn model_label(&self) -> &'static str {
        match self.model {
            ModelBlock::SingleSqueeze { .. } => "single_squeeze",
            ModelBlock::TwoSqueeze { .. } => "two_squeeze",
            ModelBlock::ThreeMode { .. } => "three_mode",
            ModelBlock::SingleSchedule { .. } => "single_schedule",
        }
    }

    pub fn single_protocol(&self) -> Option<SingleModeProtocol> {
        if let ModelBlock::SingleSqueeze {
            frame,
            phi,
            gamma_mode,
            gamma0,
            lambda,
            literal_reading,
            omega_rule,
            stage_floor,
            ..
        } = &self.model
        {
            Some(SingleModeProtocol {
                tau: self.grid.tau,
                tau1: self.grid.tau1_fraction * self.grid.tau,
                phi: *phi,
                theta: frame.theta.clone(),
                alpha: frame.alpha.clone(),
                gamma_mode: *gamma_mode,
                gamma0: *gamma0,
                lambda: *lambda,
                literal_reading: *literal_reading,
                omega_rule: *omega_rule,
                stage_floor: *stage_floor,
            })
        } else {
            None
        }
    }

    pub fn two_protocol(&self) -> Option<TwoModeProtocol> {
        if let ModelBlock::TwoSqueeze {
            frame,
            phi,
            lambda,
            rates,
            omega_split,
            omega_rule,
        } = &self.model
        {
            Some(TwoModeProtocol {
                tau: self.grid.tau,
                phi: *phi,
                theta: frame.theta.clone(),
                alpha: frame.alpha.clone(),
                lambda: *lambda,
                rates: *rates,
                omega_split: *omega_split,
                omega_rule: *omega_rule,
            })
        } else {
            None
        }
    }

    /// The resolved protocol (schedules, rates) without building operators.
    pub fn source(&self) -> Result<Source> {
        let tau = self.grid.tau;
        Ok(match &self.model {
            ModelBlock::SingleSqueeze { gamma_override, .. } => {
                let p = self.single_protocol().expect("single block");
                Source::Single(match gamma_override {
                    Some(g) => ResolvedSingle::with_gamma(p, g.clone())?,
                    None => ResolvedSingle::new(p)?,
                })
            }
            ModelBlock::TwoSqueeze { .. } => Source::Two(ResolvedTwo::new(self.two_protocol().expect("two block"))?),
            ModelBlock::ThreeMode {
                theta1,
                theta2,
                alpha1,
                phase_rule,
            } => Source::Three(ThreeModeProtocol {
                tau,
                theta1: theta1.clone(),
                theta2: theta2.clone(),
                alpha1: *alpha1,
                phase_rule: *phase_rule,
            }),
            ModelBlock::SingleSchedule {
                big_omega,
                omega,
                gamma,
                phi,
            } => Source::Schedule(SingleSchedule {
                big_omega: big_omega.clone(),
                omega: omega.clone(),
                gamma: gamma.clone(),
                phi: *phi,
            }),
        })
    }

    pub fn prepare(&self) -> Result<Prepared> {
        let space = FockSpace::new(&self.dims)?;
        let tau = self.grid.tau;
        let source = self.source()?;
        // default target modes/strength/phase and quadrature modes/phase
        let (model, default_target, default_quad) = match &source {
            Source::Single(r) => {
                let (th, a) = (r.protocol.theta.value(tau), r.protocol.alpha.value(tau));
                let model = HamiltonianModel::single_squeeze(&space, 0, Arc::new(r.clone()))?;
                (model, Some((vec![0], th, a)), Some((vec![0], a)))
            }
            Source::Two(r) => {
                let (th, a) = (r.protocol.theta.value(tau), r.protocol.alpha.value(tau));
                let model = HamiltonianModel::two_squeeze(&space, [0, 1], Arc::new(r.clone()))?;
                (model, Some((vec![0, 1], th, a)), Some((vec![0, 1], a)))
            }
            Source::Three(p) => (HamiltonianModel::three_mode(&space, [0, 1, 2], p.clone())?, None, None),
            Source::Schedule(s) => (
                HamiltonianModel::single_squeeze(&space, 0, Arc::new(s.clone()))?,
                None,
                Some((vec![0], 0.0)),
            ),
        };

        let psi0 = match &self.initial_state {
            InitialState::Vacuum => StateVector::vacuum(&space),
            InitialState::Basis { occupations } => StateVector::basis(&space, occupations)?,
            InitialState::Coherent { alphas } => {
                let a: Vec<Complex64> = alphas.iter().map(|[re, im]| Complex64::new(*re, *im)).collect();
                StateVector::coherent(&space, &a)?
            }
        };

        let (target, target_retained) = match &self.target {
            TargetBlock::Frame { construction } => match default_target {
                Some((modes, r, a)) => {
                    let (t, kept) = build_target(&space, &modes, r, a, *construction)?;
                    (Some(t), Some(kept))
                }
                None => (None, None),
            },
            TargetBlock::Squeezed {
                modes,
                r,
                phi,
                construction,
            } => {
                let (t, kept) = build_target(&space, modes, *r, *phi, *construction)?;
                (Some(t), Some(kept))
            }
            TargetBlock::Vacuum => (Some(StateVector::vacuum(&space)), None),
            TargetBlock::None => (None, None),
        };

        let quad = match &self.quadrature {
            Some(q) => Some((q.modes.clone(), q.alpha)),
            None => default_quad,
        };
        let quadrature = match quad {
            Some((modes, a)) => Some(metrics::squeezed_quadrature(&space, &modes, a)?),
            None => None,
        };

        let options = EvolveOptions {
            method: self.method,
            samples: self.samples,
            margin: self.leakage.margin,
            leak_warn: self.leakage.warn,
            leak_abort: self.leakage.abort,
            keep_states: false,
            ..Default::default()
        };
        let grid = TimeGrid::new(0.0, tau, self.grid.steps)?;
        Ok(Prepared {
            space,
            model,
            grid,
            psi0,
            target,
            target_retained,
            quadrature,
            options,
            source,
        })
    }
}
