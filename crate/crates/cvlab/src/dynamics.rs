//! Hamiltonian assembly, Schrödinger-equation integration and invariance
//! residuals.
//!
//! A model is a fixed list of sparse operators with time-dependent complex
//! coefficients, H(t) = Σ_j c_j(t) O_j, so a step never reassembles a matrix.

use std::sync::Arc;

use log::warn;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{CvError, Result};
use crate::expm::{self, LinearCombination, LinearOperator};
use crate::fockspace::{self, BosonOperator, FockSpace, StateVector};
use crate::frames::{ancillary_operator, Ramp, SymplecticFrame};
use crate::kernels;
use crate::protocols::{
    three_mode_controls, ResolvedSingle, ResolvedTwo, SingleControls, ThreeModeProtocol,
    TwoControls,
};
use crate::quad;
use crate::sparse::CsrMatrix;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

pub const LEAK_WARN: f64 = 1e-6;
pub const LEAK_ABORT: f64 = 1e-3;
pub const DEFAULT_SAMPLES: usize = 500;
pub const AUTO_EXPONENTIAL_MAX_DIM: usize = 2000;
pub const ORACLE_MAX_DIM: usize = 400;

/// Time-dependent controls of the single-mode squeezing Hamiltonian.
pub trait SingleDrive: Send + Sync {
    fn controls(&self, t: f64) -> Result<SingleControls>;
    fn phi(&self) -> f64;
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }
}

impl SingleDrive for ResolvedSingle {
    fn controls(&self, t: f64) -> Result<SingleControls> {
        ResolvedSingle::controls(self, t)
    }
    fn phi(&self) -> f64 {
        self.protocol.phi
    }
    fn breakpoints(&self) -> Vec<f64> {
        ResolvedSingle::breakpoints(self)
    }
}

/// Explicit single-mode schedules, used for toy models and oracles.
#[derive(Clone, Debug)]
pub struct SingleSchedule {
    pub big_omega: Ramp,
    pub omega: Ramp,
    pub gamma: Ramp,
    pub phi: f64,
}

impl SingleDrive for SingleSchedule {
    fn controls(&self, t: f64) -> Result<SingleControls> {
        Ok(SingleControls {
            big_omega: self.big_omega.value(t),
            omega: self.omega.value(t),
            gamma: self.gamma.value(t),
        })
    }
    fn phi(&self) -> f64 {
        self.phi
    }
}

pub trait TwoDrive: Send + Sync {
    fn controls(&self, t: f64) -> Result<TwoControls>;
    fn phi(&self) -> f64;
}

impl TwoDrive for ResolvedTwo {
    fn controls(&self, t: f64) -> Result<TwoControls> {
        ResolvedTwo::controls(self, t)
    }
    fn phi(&self) -> f64 {
        self.protocol.phi
    }
}

#[derive(Clone, Debug)]
pub struct TwoSchedule {
    pub g: Ramp,
    pub omega1: Ramp,
    pub omega2: Ramp,
    pub gamma1: f64,
    pub gamma2: f64,
    pub phi: f64,
}

impl TwoDrive for TwoSchedule {
    fn controls(&self, t: f64) -> Result<TwoControls> {
        Ok(TwoControls {
            g: self.g.value(t),
            omega1: self.omega1.value(t),
            omega2: self.omega2.value(t),
            gamma1: self.gamma1,
            gamma2: self.gamma2,
        })
    }
    fn phi(&self) -> f64 {
        self.phi
    }
}

#[derive(Clone)]
pub enum ModelKind {
    SingleSqueeze { drive: Arc<dyn SingleDrive>, mode: usize },
    TwoSqueeze { drive: Arc<dyn TwoDrive>, modes: [usize; 2] },
    ThreeMode { protocol: ThreeModeProtocol, modes: [usize; 3] },
    /// i g(t)[(a₁†)^j a₂^k − a₁^j (a₂†)^k]
    Nonlinear { j: u32, k: u32, g: Ramp, modes: [usize; 2] },
    /// Σ_j c_j O_j with constant coefficients.
    Constant { coeffs: Vec<Complex64> },
}

impl std::fmt::Debug for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl ModelKind {
    pub fn label(&self) -> &'static str {
        match self {
            ModelKind::SingleSqueeze { .. } => "single-squeeze",
            ModelKind::TwoSqueeze { .. } => "two-squeeze",
            ModelKind::ThreeMode { .. } => "three-mode",
            ModelKind::Nonlinear { .. } => "nonlinear",
            ModelKind::Constant { .. } => "constant",
        }
    }
}

#[derive(Clone, Debug)]
pub struct HamiltonianModel {
    space: FockSpace,
    kind: ModelKind,
    terms: Vec<CsrMatrix>,
    norms: Vec<f64>,
    sign: f64,
}

fn product(ops: &[BosonOperator]) -> Result<BosonOperator> {
    let mut acc = ops[0].clone();
    for op in &ops[1..] {
        acc = acc.mul(op)?;
    }
    Ok(acc)
}

fn power(op: &BosonOperator, n: u32) -> Result<BosonOperator> {
    let mut acc = BosonOperator::identity(op.space());
    for _ in 0..n {
        acc = acc.mul(op)?;
    }
    Ok(acc)
}

impl HamiltonianModel {
    fn build(space: &FockSpace, kind: ModelKind, ops: Vec<BosonOperator>) -> Self {
        let terms: Vec<CsrMatrix> = ops.into_iter().map(|o| o.into_matrix()).collect();
        let norms = terms.iter().map(|m| m.norm_bound()).collect();
        HamiltonianModel {
            space: space.clone(),
            kind,
            terms,
            norms,
            sign: 1.0,
        }
    }

    /// H = [ω − iγ/2] a†a + Ω e^{iφ} a†² + Ω e^{−iφ} a².
    pub fn single_squeeze(space: &FockSpace, mode: usize, drive: Arc<dyn SingleDrive>) -> Result<Self> {
        let a = fockspace::lower(space, mode)?;
        let ad = a.adjoint();
        let ops = vec![fockspace::number(space, mode)?, ad.mul(&ad)?, a.mul(&a)?];
        Ok(Self::build(space, ModelKind::SingleSqueeze { drive, mode }, ops))
    }

    /// H = Σ_k [ω_k − iγ_k/2] a_k†a_k + g e^{iφ} a₁†a₂† + g e^{−iφ} a₁a₂.
    pub fn two_squeeze(space: &FockSpace, modes: [usize; 2], drive: Arc<dyn TwoDrive>) -> Result<Self> {
        let a1 = fockspace::lower(space, modes[0])?;
        let a2 = fockspace::lower(space, modes[1])?;
        if modes[0] == modes[1] {
            return Err(CvError::InvalidArgument("two-mode model needs distinct modes".into()));
        }
        let pair = a1.mul(&a2)?;
        let ops = vec![
            fockspace::number(space, modes[0])?,
            fockspace::number(space, modes[1])?,
            pair.adjoint(),
            pair,
        ];
        Ok(Self::build(space, ModelKind::TwoSqueeze { drive, modes }, ops))
    }

    /// H = g₁ e^{iφ₁} a₁a₃† + g₂ e^{iφ₂} a₂†a₃† + h.c.
    pub fn three_mode(space: &FockSpace, modes: [usize; 3], protocol: ThreeModeProtocol) -> Result<Self> {
        let a = modes
            .iter()
            .map(|&m| fockspace::lower(space, m))
            .collect::<Result<Vec<_>>>()?;
        let x13 = a[0].mul(&a[2].adjoint())?;
        let s23 = a[1].adjoint().mul(&a[2].adjoint())?;
        let ops = vec![x13.clone(), x13.adjoint(), s23.clone(), s23.adjoint()];
        Ok(Self::build(space, ModelKind::ThreeMode { protocol, modes }, ops))
    }

    pub fn nonlinear(space: &FockSpace, modes: [usize; 2], j: u32, k: u32, g: Ramp) -> Result<Self> {
        let a1 = fockspace::lower(space, modes[0])?;
        let a2 = fockspace::lower(space, modes[1])?;
        let up = product(&[power(&a1.adjoint(), j)?, power(&a2, k)?])?;
        let ops = vec![up.clone(), up.adjoint()];
        Ok(Self::build(space, ModelKind::Nonlinear { j, k, g, modes }, ops))
    }

    /// Time-independent H = Σ c_j O_j.
    pub fn constant(space: &FockSpace, terms: Vec<(Complex64, BosonOperator)>) -> Result<Self> {
        for (_, op) in &terms {
            if op.space() != space {
                return Err(CvError::SpaceMismatch);
            }
        }
        let (coeffs, ops): (Vec<_>, Vec<_>) = terms.into_iter().unzip();
        Ok(Self::build(space, ModelKind::Constant { coeffs }, ops))
    }

    /// The same model with H → −H.
    pub fn negated(&self) -> Self {
        let mut m = self.clone();
        m.sign = -m.sign;
        m
    }

    pub fn space(&self) -> &FockSpace {
        &self.space
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        match &self.kind {
            ModelKind::SingleSqueeze { drive, .. } => drive.breakpoints(),
            _ => Vec::new(),
        }
    }

    /// c_j(t) for every stored operator.
    pub fn coefficients(&self, t: f64) -> Result<Vec<Complex64>> {
        let c = match &self.kind {
            ModelKind::SingleSqueeze { drive, .. } => {
                let c = drive.controls(t)?;
                let phi = drive.phi();
                vec![
                    Complex64::new(c.omega, -c.gamma / 2.0),
                    Complex64::from_polar(c.big_omega, phi),
                    Complex64::from_polar(c.big_omega, -phi),
                ]
            }
            ModelKind::TwoSqueeze { drive, .. } => {
                let c = drive.controls(t)?;
                let phi = drive.phi();
                vec![
                    Complex64::new(c.omega1, -c.gamma1 / 2.0),
                    Complex64::new(c.omega2, -c.gamma2 / 2.0),
                    Complex64::from_polar(c.g, phi),
                    Complex64::from_polar(c.g, -phi),
                ]
            }
            ModelKind::ThreeMode { protocol, .. } => {
                let c = three_mode_controls(protocol, t);
                vec![
                    Complex64::from_polar(c.g1, c.phi1),
                    Complex64::from_polar(c.g1, -c.phi1),
                    Complex64::from_polar(c.g2, c.phi2),
                    Complex64::from_polar(c.g2, -c.phi2),
                ]
            }
            ModelKind::Nonlinear { g, .. } => {
                let gv = g.value(t);
                vec![I * gv, -I * gv]
            }
            ModelKind::Constant { coeffs } => coeffs.clone(),
        };
        if c.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(CvError::SingularControl(format!("non-finite control at t = {t}")));
        }
        Ok(c.into_iter().map(|z| z * self.sign).collect())
    }

    pub fn operator_at(&self, t: f64) -> Result<LinearCombination<'_>> {
        let c = self.coefficients(t)?;
        Ok(LinearCombination::new(
            c.into_iter().zip(self.terms.iter()).collect(),
            self.norms.clone(),
        ))
    }

    /// Loss/gain rates at t (zero for models without them).
    pub fn rates(&self, t: f64) -> Result<Vec<f64>> {
        Ok(match &self.kind {
            ModelKind::SingleSqueeze { drive, .. } => vec![drive.controls(t)?.gamma],
            ModelKind::TwoSqueeze { drive, .. } => {
                let c = drive.controls(t)?;
                vec![c.gamma1, c.gamma2]
            }
            _ => vec![],
        })
    }
}

/// H(t) as an assembled sparse operator.
pub fn hamiltonian(model: &HamiltonianModel, t: f64) -> Result<BosonOperator> {
    let c = model.coefficients(t)?;
    let n = model.space.total_dim();
    let mut m = CsrMatrix::zeros(n, n);
    for (cj, op) in c.iter().zip(&model.terms) {
        if *cj != ZERO {
            m = m.add_scaled(op, *cj);
        }
    }
    BosonOperator::from_matrix(&model.space, m)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Rk4,
    MidpointExponential,
    /// Midpoint-exponential up to 2000 basis states, rk4 above.
    #[default]
    Auto,
}

impl Method {
    pub fn resolve(self, dim: usize) -> Method {
        match self {
            Method::Auto if dim <= AUTO_EXPONENTIAL_MAX_DIM => Method::MidpointExponential,
            Method::Auto => Method::Rk4,
            m => m,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid {
    pub t0: f64,
    pub t1: f64,
    pub steps: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, t1: f64, steps: usize) -> Result<Self> {
        if steps == 0 || !(t1 > t0) {
            return Err(CvError::InvalidArgument(format!(
                "time grid needs t1 > t0 and steps > 0 (got [{t0}, {t1}], {steps})"
            )));
        }
        Ok(TimeGrid { t0, t1, steps })
    }

    pub fn dt(&self) -> f64 {
        (self.t1 - self.t0) / self.steps as f64
    }

    pub fn time(&self, i: usize) -> f64 {
        if i == self.steps {
            self.t1
        } else {
            self.t0 + i as f64 * self.dt()
        }
    }

    /// Step indices at which a decimated trajectory is sampled (always
    /// including the first and last).
    pub fn sample_indices(&self, samples: usize) -> Vec<usize> {
        let samples = samples.max(2).min(self.steps + 1);
        let mut idx: Vec<usize> = (0..samples)
            .map(|k| ((k as f64) * self.steps as f64 / (samples - 1) as f64).round() as usize)
            .collect();
        idx.dedup();
        idx
    }
}

#[derive(Clone, Debug)]
pub struct EvolveOptions {
    pub method: Method,
    pub samples: usize,
    /// Top levels counted as leakage; `None` selects max(2, dim/4).
    pub margin: Option<usize>,
    pub leak_warn: f64,
    /// `None` disables the abort.
    pub leak_abort: Option<f64>,
    pub tol: f64,
    pub keep_states: bool,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions {
            method: Method::Auto,
            samples: DEFAULT_SAMPLES,
            margin: None,
            leak_warn: LEAK_WARN,
            leak_abort: Some(LEAK_ABORT),
            tol: expm::DEFAULT_TOL,
            keep_states: true,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub norms: Vec<f64>,
    pub leakage: Vec<f64>,
    pub states: Vec<StateVector>,
    pub final_state: StateVector,
    pub max_leakage: f64,
    /// Set when leakage exceeded the warning threshold at any sample.
    pub flagged: bool,
    pub method: Method,
}

fn rk4_step(
    model: &HamiltonianModel,
    t: f64,
    dt: f64,
    psi: &mut [Complex64],
    scratch: &mut [Vec<Complex64>; 3],
) -> Result<()> {
    let n = psi.len();
    let deriv = |time: f64, x: &[Complex64], out: &mut [Complex64]| -> Result<()> {
        model.operator_at(time)?.apply(x, out);
        kernels::scale(-I, out);
        Ok(())
    };
    let [k, acc, tmp] = scratch;
    acc.copy_from_slice(psi);
    deriv(t, psi, k)?;
    kernels::axpy((dt / 6.0).into(), k, acc);
    for (stage, (c, w)) in [(0.5, 2.0), (0.5, 2.0), (1.0, 1.0)].into_iter().enumerate() {
        tmp.copy_from_slice(psi);
        kernels::axpy((c * dt).into(), k, tmp);
        let time = if stage == 2 { t + dt } else { t + 0.5 * dt };
        deriv(time, &tmp[..n], k)?;
        kernels::axpy((w * dt / 6.0).into(), k, acc);
    }
    psi.copy_from_slice(acc);
    Ok(())
}

fn exp_step(model: &HamiltonianModel, t: f64, dt: f64, psi: &mut Vec<Complex64>, tol: f64) -> Result<()> {
    let op = model.operator_at(t + 0.5 * dt)?;
    *psi = expm::expm_multiply(&op, Complex64::new(0.0, -dt), psi, tol)?;
    Ok(())
}

/// Integrates i∂_tψ = H(t)ψ over `grid`, storing decimated samples.
pub fn evolve(
    model: &HamiltonianModel,
    psi0: &StateVector,
    grid: &TimeGrid,
    opts: &EvolveOptions,
) -> Result<Trajectory> {
    evolve_with(model, psi0, grid, opts, |_, _| Ok(()))
}

/// As [`evolve`], calling `observe(t, ψ)` at every sample.
pub fn evolve_with<F>(
    model: &HamiltonianModel,
    psi0: &StateVector,
    grid: &TimeGrid,
    opts: &EvolveOptions,
    mut observe: F,
) -> Result<Trajectory>
where
    F: FnMut(f64, &StateVector) -> Result<()>,
{
    if psi0.space() != model.space() {
        return Err(CvError::SpaceMismatch);
    }
    let space = model.space().clone();
    let n = space.total_dim();
    let method = opts.method.resolve(n);
    let margin = opts.margin.unwrap_or_else(|| space.default_margin());
    let edge = space.edge_mask(margin);
    let sample_at = grid.sample_indices(opts.samples);
    let breaks: Vec<f64> = model
        .breakpoints()
        .into_iter()
        .filter(|&b| b > grid.t0 && b < grid.t1)
        .collect();

    let mut traj = Trajectory {
        times: Vec::with_capacity(sample_at.len()),
        norms: Vec::with_capacity(sample_at.len()),
        leakage: Vec::with_capacity(sample_at.len()),
        states: Vec::new(),
        final_state: psi0.clone(),
        max_leakage: 0.0,
        flagged: false,
        method,
    };
    let mut psi = psi0.amplitudes().to_vec();
    let mut scratch = [vec![ZERO; n], vec![ZERO; n], vec![ZERO; n]];
    let mut next_sample = 0;
    let mut warned = false;

    let mut record = |i: usize, psi: &[Complex64], traj: &mut Trajectory| -> Result<()> {
        let t = grid.time(i);
        let state = StateVector::new(&space, psi.to_vec())?;
        let norm2 = kernels::norm_sqr(psi);
        if !norm2.is_finite() {
            return Err(CvError::NonConvergence(format!("state diverged at t = {t}")));
        }
        let leak = if norm2 > 0.0 {
            state.masked_population(&edge) / norm2
        } else {
            0.0
        };
        traj.times.push(t);
        traj.norms.push(norm2.sqrt());
        traj.leakage.push(leak);
        traj.max_leakage = traj.max_leakage.max(leak);
        if leak > opts.leak_warn {
            traj.flagged = true;
            if !warned {
                warn!("truncation leakage {leak:.3e} at t = {t}");
                warned = true;
            }
        }
        if let Some(limit) = opts.leak_abort {
            if leak > limit {
                return Err(CvError::LeakageAbort {
                    t,
                    leakage: leak,
                    threshold: limit,
                });
            }
        }
        observe(t, &state)?;
        if opts.keep_states {
            traj.states.push(state);
        }
        Ok(())
    };

    for i in 0..grid.steps {
        if next_sample < sample_at.len() && sample_at[next_sample] == i {
            record(i, &psi, &mut traj)?;
            next_sample += 1;
        }
        let (t_a, t_b) = (grid.time(i), grid.time(i + 1));
        let mut cuts = vec![t_a];
        cuts.extend(breaks.iter().copied().filter(|&b| b > t_a && b < t_b));
        cuts.push(t_b);
        for w in cuts.windows(2) {
            let (t, dt) = (w[0], w[1] - w[0]);
            match method {
                Method::Rk4 => rk4_step(model, t, dt, &mut psi, &mut scratch)?,
                _ => exp_step(model, t, dt, &mut psi, opts.tol)?,
            }
        }
    }
    record(grid.steps, &psi, &mut traj)?;
    traj.final_state = StateVector::new(&space, psi)?;
    Ok(traj)
}

/// Ordered product Π exp(−i H(t_m) h) over midpoints of `substeps` sub-intervals
/// per grid step, with dense Padé exponentials.
pub fn dense_propagator_oracle(
    model: &HamiltonianModel,
    grid: &TimeGrid,
    substeps: usize,
) -> Result<DMatrix<Complex64>> {
    let n = model.space().total_dim();
    if n > ORACLE_MAX_DIM {
        return Err(CvError::DimensionGuard(format!(
            "dense oracle limited to {ORACLE_MAX_DIM} basis states, got {n}"
        )));
    }
    let dense_terms: Vec<DMatrix<Complex64>> = model.terms.iter().map(|m| m.to_dense()).collect();
    let breaks = model.breakpoints();
    let mut u = DMatrix::<Complex64>::identity(n, n);
    for i in 0..grid.steps {
        let (t_a, t_b) = (grid.time(i), grid.time(i + 1));
        let mut cuts = vec![t_a];
        cuts.extend(breaks.iter().copied().filter(|&b| b > t_a && b < t_b));
        cuts.push(t_b);
        for w in cuts.windows(2) {
            let h = (w[1] - w[0]) / substeps as f64;
            for s in 0..substeps {
                let tm = w[0] + (s as f64 + 0.5) * h;
                let c = model.coefficients(tm)?;
                let mut hm = DMatrix::<Complex64>::zeros(n, n);
                for (cj, tj) in c.iter().zip(&dense_terms) {
                    hm += tj * *cj;
                }
                u = (hm * Complex64::new(0.0, -h)).exp() * u;
            }
        }
    }
    Ok(u)
}

pub fn apply_dense(u: &DMatrix<Complex64>, psi: &StateVector) -> Result<StateVector> {
    let v = u * DVector::from_column_slice(psi.amplitudes());
    StateVector::new(psi.space(), v.as_slice().to_vec())
}

/// Family t ↦ J(t) of operators.
pub type OperatorFamily<'a> = dyn Fn(f64) -> Result<BosonOperator> + 'a;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ResidualReport {
    pub residual: f64,
    pub delta: f64,
    pub halvings: u32,
}

fn residual_at(
    model: &HamiltonianModel,
    j: &OperatorFamily<'_>,
    t: f64,
    delta: f64,
    mask: &[bool],
) -> Result<f64> {
    let jp = j(t + delta)?;
    let jm = j(t - delta)?;
    let j0 = j(t)?;
    let h = hamiltonian(model, t)?;
    let fd = jp.sub(&jm)?.scale_re(1.0 / (2.0 * delta));
    let r = fd.add_scaled(&h.commutator(&j0)?, I)?;
    let denom = j0.matrix().frobenius_masked(mask);
    if denom == 0.0 {
        return Err(CvError::InvalidArgument("J vanishes on the interior".into()));
    }
    Ok(r.matrix().frobenius_masked(mask) / denom)
}

/// ‖P[(J(t+δ) − J(t−δ))/2δ + i[H(t), J(t)]]P‖_F / ‖P J(t) P‖_F with P the
/// projector on occupations ≤ dim − margin. δ is halved while the residual
/// still falls quadratically.
pub fn heisenberg_residual(
    model: &HamiltonianModel,
    j: &OperatorFamily<'_>,
    t: f64,
    delta: f64,
    margin: usize,
) -> Result<ResidualReport> {
    let mask = model.space().interior_mask(margin);
    heisenberg_residual_masked(model, j, t, delta, &mask)
}

pub fn heisenberg_residual_masked(
    model: &HamiltonianModel,
    j: &OperatorFamily<'_>,
    t: f64,
    delta: f64,
    mask: &[bool],
) -> Result<ResidualReport> {
    let mut d = delta;
    let mut r = residual_at(model, j, t, d, mask)?;
    let mut halvings = 0;
    while halvings < 8 && r > 1e-9 {
        let r_half = residual_at(model, j, t, d / 2.0, mask)?;
        if r_half < r / 3.0 {
            d /= 2.0;
            r = r_half;
            halvings += 1;
        } else {
            break;
        }
    }
    Ok(ResidualReport {
        residual: r,
        delta: d,
        halvings,
    })
}

/// ∫_{t0}^{t1} of a complex rate by adaptive quadrature.
fn integrate_complex<F: Fn(f64) -> Complex64>(f: F, t0: f64, t1: f64, breaks: &[f64]) -> Result<Complex64> {
    let re = quad::integrate(|s| f(s).re, t0, t1, breaks, 1e-14)?;
    let im = quad::integrate(|s| f(s).im, t0, t1, breaks, 1e-14)?;
    Ok(Complex64::new(re, im))
}

/// Dressed ket invariant of the single-mode protocol about a reference time
/// t_ref: J(t) = e^{i∫_{t_ref}^t ḟ} K(t) with K = cosh θ a + sinh θ e^{−iα} a†
/// and ḟ = h + tanh θ (iθ̇ − 2Ω e^{−i(φ+α)}), h = ω − iγ/2.
pub fn single_ket_invariant<'a>(
    resolved: &'a ResolvedSingle,
    space: &'a FockSpace,
    mode: usize,
    t_ref: f64,
) -> Result<impl Fn(f64) -> Result<BosonOperator> + 'a> {
    let frame = resolved.protocol.frame().mirrored(&[true]).on_modes(&[mode])?;
    let p = &resolved.protocol;
    let rate = move |s: f64| -> Complex64 {
        let Ok(c) = resolved.controls(s) else {
            return Complex64::new(f64::NAN, f64::NAN);
        };
        let th = p.theta.value(s);
        let beta = p.phi + p.alpha.value(s);
        Complex64::new(c.omega, -c.gamma / 2.0)
            + th.tanh() * (I * p.theta.deriv(s) - 2.0 * c.big_omega * Complex64::from_polar(1.0, -beta))
    };
    let breaks = resolved.breakpoints();
    Ok(move |t: f64| {
        let f = integrate_complex(rate, t_ref, t, &breaks)?;
        Ok(ancillary_operator(&frame, t, space, 0)?.scale((I * f).exp()))
    })
}

/// Single-mode μ†(t) from the frame, dressed for ∂_tJ = +i[H, J]:
/// J = e^{−∫κ} μ† with κ = θ̇ tanh θ − ih − 2iΩ tanh θ e^{i(φ+α)}.
/// Checked by passing the negated model to the residual.
pub fn single_mu_dagger<'a>(
    resolved: &'a ResolvedSingle,
    space: &'a FockSpace,
    mode: usize,
    t_ref: f64,
) -> Result<impl Fn(f64) -> Result<BosonOperator> + 'a> {
    let frame = resolved.protocol.frame().on_modes(&[mode])?;
    let p = &resolved.protocol;
    let kappa = move |s: f64| -> Complex64 {
        let Ok(c) = resolved.controls(s) else {
            return Complex64::new(f64::NAN, f64::NAN);
        };
        let th = p.theta.value(s);
        let beta = p.phi + p.alpha.value(s);
        let h = Complex64::new(c.omega, -c.gamma / 2.0);
        p.theta.deriv(s) * th.tanh() - I * h - 2.0 * I * c.big_omega * th.tanh() * Complex64::from_polar(1.0, beta)
    };
    let breaks = resolved.breakpoints();
    Ok(move |t: f64| {
        let k = integrate_complex(kappa, t_ref, t, &breaks)?;
        Ok(ancillary_operator(&frame, t, space, 0)?.adjoint().scale((-k).exp()))
    })
}

/// Two-mode dressed ket invariant: K = cosh θ a₁ + sinh θ e^{−iα} a₂†,
/// ḟ = h₁ + tanh θ (iθ̇ − g e^{−i(φ+α)}).
pub fn two_ket_invariant<'a>(
    resolved: &'a ResolvedTwo,
    space: &'a FockSpace,
    modes: [usize; 2],
    t_ref: f64,
) -> Result<impl Fn(f64) -> Result<BosonOperator> + 'a> {
    let frame = resolved.protocol.frame().mirrored(&[true]).on_modes(&modes)?;
    let p = &resolved.protocol;
    let rate = move |s: f64| -> Complex64 {
        let Ok(c) = resolved.controls(s) else {
            return Complex64::new(f64::NAN, f64::NAN);
        };
        let th = p.theta.value(s);
        let beta = p.phi + p.alpha.value(s);
        Complex64::new(c.omega1, -c.gamma1 / 2.0)
            + th.tanh() * (I * p.theta.deriv(s) - c.g * Complex64::from_polar(1.0, -beta))
    };
    Ok(move |t: f64| {
        let f = integrate_complex(rate, t_ref, t, &[])?;
        Ok(ancillary_operator(&frame, t, space, 0)?.scale((I * f).exp()))
    })
}

/// Three-mode passage operators: the chain frame with θ₂ mirrored. Index 0 is
/// μ₁, 1 is μ₂, 2 is μ₃†.
pub fn three_mode_invariant<'a>(
    protocol: &'a ThreeModeProtocol,
    space: &'a FockSpace,
    modes: [usize; 3],
    which: usize,
) -> Result<impl Fn(f64) -> Result<BosonOperator> + 'a> {
    if which > 2 {
        return Err(CvError::InvalidArgument(format!("three-mode operator index {which} > 2")));
    }
    let frame = protocol.frame().mirrored(&[false, true]).on_modes(&modes)?;
    Ok(move |t: f64| {
        let op = ancillary_operator(&frame, t, space, which)?;
        Ok(if which == 2 { op.adjoint() } else { op })
    })
}

/// ‖[H(t), μ₁(t)]ψ‖ / ‖ψ‖.
pub fn dark_mode_residual(
    model: &HamiltonianModel,
    frame: &SymplecticFrame,
    t: f64,
    psi: &StateVector,
) -> Result<f64> {
    let h = hamiltonian(model, t)?;
    let mu = ancillary_operator(frame, t, model.space(), 0)?;
    let out = h.commutator(&mu)?.apply(psi)?;
    let n = psi.norm();
    if n == 0.0 {
        return Err(CvError::ZeroNorm);
    }
    Ok(out.norm() / n)
}

/// First-moment generator A(t) with d/dt(⟨a⟩, ⟨a†⟩) = A (⟨a⟩, ⟨a†⟩) for a
/// Hermitian quadratic model. Ordering: (a_1, …, a_N, a_1†, …, a_N†).
fn moment_matrix(model: &HamiltonianModel, t: f64) -> Result<DMatrix<Complex64>> {
    let s = model.sign;
    match &model.kind {
        ModelKind::SingleSqueeze { drive, .. } => {
            let c = drive.controls(t)?;
            let w = Complex64::new(s * c.omega, 0.0);
            let d = 2.0 * s * c.big_omega;
            let e = Complex64::from_polar(1.0, drive.phi());
            Ok(DMatrix::from_row_slice(
                2,
                2,
                &[-I * w, -I * d * e, I * d * e.conj(), I * w],
            ))
        }
        ModelKind::TwoSqueeze { drive, .. } => {
            let c = drive.controls(t)?;
            let (w1, w2) = (s * c.omega1, s * c.omega2);
            let g = s * c.g;
            let e = Complex64::from_polar(g, drive.phi());
            let mut m = DMatrix::<Complex64>::zeros(4, 4);
            m[(0, 0)] = -I * w1;
            m[(0, 3)] = -I * e;
            m[(1, 1)] = -I * w2;
            m[(1, 2)] = -I * e;
            m[(2, 2)] = I * w1;
            m[(2, 1)] = I * e.conj();
            m[(3, 3)] = I * w2;
            m[(3, 0)] = I * e.conj();
            Ok(m)
        }
        other => Err(CvError::InvalidArgument(format!(
            "first-moment system not available for {}",
            other.label()
        ))),
    }
}

fn moment_modes(model: &HamiltonianModel) -> Vec<usize> {
    match &model.kind {
        ModelKind::SingleSqueeze { mode, .. } => vec![*mode],
        ModelKind::TwoSqueeze { modes, .. } => modes.to_vec(),
        _ => vec![],
    }
}

/// Largest |⟨a_k⟩(t) − m_k(t)| over the grid samples, where ⟨a_k⟩ comes from
/// `evolve` and m_k from the linear first-moment system.
pub fn adjoint_moment_check(
    model: &HamiltonianModel,
    psi0: &StateVector,
    grid: &TimeGrid,
    opts: &EvolveOptions,
) -> Result<f64> {
    for k in 0..=grid.steps {
        let t = grid.time(k);
        if model.rates(t)?.iter().any(|&g| g != 0.0) {
            return Err(CvError::Precondition(
                "first-moment equivalence is checked in the Hermitian limit (γ = 0)".into(),
            ));
        }
    }
    let modes = moment_modes(model);
    let space = model.space();
    let lowers = modes
        .iter()
        .map(|&m| fockspace::lower(space, m))
        .collect::<Result<Vec<_>>>()?;
    let moments = |psi: &StateVector| -> Result<DVector<Complex64>> {
        let mut v = Vec::with_capacity(2 * lowers.len());
        for a in &lowers {
            v.push(fockspace::expectation(a, psi, true)?);
        }
        let conj: Vec<Complex64> = v.iter().map(|z| z.conj()).collect();
        v.extend(conj);
        Ok(DVector::from_vec(v))
    };
    let mut m = moments(psi0)?;
    let opts = EvolveOptions {
        samples: grid.steps + 1,
        keep_states: false,
        ..opts.clone()
    };
    let mut worst: f64 = 0.0;
    let mut t_prev = grid.t0;
    let sub = 50;
    evolve_with(model, psi0, grid, &opts, |t, psi| {
        let h = (t - t_prev) / sub as f64;
        for s in 0..sub {
            let tm = t_prev + (s as f64 + 0.5) * h;
            m = (moment_matrix(model, tm)? * Complex64::new(h, 0.0)).exp() * &m;
        }
        t_prev = t;
        let got = moments(psi)?;
        for k in 0..lowers.len() {
            worst = worst.max((got[k] - m[k]).norm());
        }
        Ok(())
    })?;
    Ok(worst)
}

/// Two-diagonal invariant ansatz of the (1,2) nonlinear model:
/// μ = Σ cos θ_{n,m}(t) |n−1,m⟩⟨n,m| − Σ sin θ̃_{n,m}(t) |n,m−2⟩⟨n,m|.
pub fn nonlinear_invariant(
    space: &FockSpace,
    modes: [usize; 2],
    t: f64,
    theta: &dyn Fn(usize, usize, f64) -> f64,
    theta_tilde: &dyn Fn(usize, usize, f64) -> f64,
) -> Result<BosonOperator> {
    space.check_mode(modes[0])?;
    space.check_mode(modes[1])?;
    let (s1, s2) = (space.stride(modes[0]), space.stride(modes[1]));
    let mut trip = Vec::new();
    for i in 0..space.total_dim() {
        let n = space.occupation(i, modes[0]);
        let m = space.occupation(i, modes[1]);
        if n >= 1 {
            trip.push((i - s1, i, Complex64::new(theta(n, m, t).cos(), 0.0)));
        }
        if m >= 2 {
            trip.push((i - 2 * s2, i, Complex64::new(-theta_tilde(n, m, t).sin(), 0.0)));
        }
    }
    let d = space.total_dim();
    BosonOperator::from_matrix(space, CsrMatrix::from_triplets(d, d, trip))
}

/// Basis states with 2n₁ + n₂ ≤ `excitations`, where the ansatz closes.
pub fn excitation_lattice(space: &FockSpace, modes: [usize; 2], excitations: usize) -> Vec<bool> {
    (0..space.total_dim())
        .map(|i| 2 * space.occupation(i, modes[0]) + space.occupation(i, modes[1]) <= excitations)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_indices_cover_ends() {
        let g = TimeGrid::new(0.0, 1.0, 1000).unwrap();
        let idx = g.sample_indices(500);
        assert_eq!(idx.first(), Some(&0));
        assert_eq!(idx.last(), Some(&1000));
        assert_eq!(idx.len(), 500);
        assert_eq!(TimeGrid::new(0.0, 1.0, 3).unwrap().sample_indices(500), vec![0, 1, 2, 3]);
    }

    #[test]
    fn auto_method_switches_on_dimension() {
        assert_eq!(Method::Auto.resolve(2000), Method::MidpointExponential);
        assert_eq!(Method::Auto.resolve(2001), Method::Rk4);
        assert_eq!(Method::Rk4.resolve(10), Method::Rk4);
    }

    #[test]
    fn oracle_guards_dimension() {
        let s = FockSpace::single(401).unwrap();
        let m = HamiltonianModel::constant(&s, vec![(Complex64::new(1.0, 0.0), fockspace::number(&s, 0).unwrap())]).unwrap();
        let g = TimeGrid::new(0.0, 1.0, 1).unwrap();
        assert!(matches!(
            dense_propagator_oracle(&m, &g, 1),
            Err(CvError::DimensionGuard(_))
        ));
    }
}
