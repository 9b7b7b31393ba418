//! Time-dependent symplectic frames and the ancillary operators they define.
//!
//! A frame over N modes carries hyperbolic angles θ_k(t) and phases α_k(t).
//! Operators are handled as linear forms over (a_1, …, a_N, a_1†, …, a_N†).
//! The chain is built pairwise: starting from b_0 = a_1,
//!
//!   μ_k  =  cosh θ_k b_{k−1} − sinh θ_k e^{−iα_k} a_{k+1}†
//!   b_k† = −sinh θ_k e^{iα_k} b_{k−1} + cosh θ_k a_{k+1}†
//!
//! and the last bright operator is μ_N. A single-mode frame is the same step
//! with the partner a_1† in place of a_2†.

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{CvError, Result};
use crate::expm;
use crate::fockspace::{self, BosonOperator, FockSpace, StateVector};
use crate::sparse::CsrMatrix;

const I: Complex64 = Complex64::new(0.0, 1.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Scalar schedule with first and second derivatives.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Ramp {
    Constant {
        value: f64,
    },
    /// offset + slope·t
    Linear {
        slope: f64,
        #[serde(default)]
        offset: f64,
    },
    /// amplitude·(1 − cos(πt/duration))/2 on [0, duration], held afterwards.
    CosineSmoothed {
        amplitude: f64,
        duration: f64,
    },
    /// Σ c_k t^k
    Polynomial {
        coeffs: Vec<f64>,
    },
    /// offset + amplitude·sin(2πt/period + phase)
    Sinusoidal {
        amplitude: f64,
        period: f64,
        #[serde(default)]
        phase: f64,
        #[serde(default)]
        offset: f64,
    },
    /// Uniform samples starting at t0, linearly interpolated.
    Sampled {
        t0: f64,
        dt: f64,
        values: Vec<f64>,
    },
    Scaled {
        factor: f64,
        inner: Box<Ramp>,
    },
}

impl Ramp {
    pub fn constant(value: f64) -> Self {
        Ramp::Constant { value }
    }

    pub fn linear(slope: f64) -> Self {
        Ramp::Linear { slope, offset: 0.0 }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        match self {
            Ramp::Scaled { factor: f, inner } => Ramp::Scaled {
                factor: f * factor,
                inner: inner.clone(),
            },
            other => Ramp::Scaled {
                factor,
                inner: Box::new(other.clone()),
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(CvError::InvalidArgument(m.to_string()));
        match self {
            Ramp::CosineSmoothed { duration, .. } if !(*duration > 0.0) => {
                bad("cosine ramp duration must be positive")
            }
            Ramp::Sinusoidal { period, .. } if !(*period > 0.0) => {
                bad("sinusoidal ramp period must be positive")
            }
            Ramp::Sampled { dt, values, .. } if !(*dt > 0.0) || values.len() < 2 => {
                bad("sampled ramp needs dt > 0 and at least two samples")
            }
            Ramp::Scaled { inner, .. } => inner.validate(),
            _ => Ok(()),
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        match self {
            Ramp::Constant { value } => *value,
            Ramp::Linear { slope, offset } => offset + slope * t,
            Ramp::CosineSmoothed { amplitude, duration } => {
                let x = t.clamp(0.0, *duration);
                amplitude * (1.0 - (std::f64::consts::PI * x / duration).cos()) / 2.0
            }
            Ramp::Polynomial { coeffs } => coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c),
            Ramp::Sinusoidal {
                amplitude,
                period,
                phase,
                offset,
            } => offset + amplitude * (std::f64::consts::TAU * t / period + phase).sin(),
            Ramp::Sampled { t0, dt, values } => {
                let x = ((t - t0) / dt).clamp(0.0, (values.len() - 1) as f64);
                let i = (x.floor() as usize).min(values.len() - 2);
                let w = x - i as f64;
                values[i] * (1.0 - w) + values[i + 1] * w
            }
            Ramp::Scaled { factor, inner } => factor * inner.value(t),
        }
    }

    pub fn deriv(&self, t: f64) -> f64 {
        use std::f64::consts::{PI, TAU};
        match self {
            Ramp::Constant { .. } => 0.0,
            Ramp::Linear { slope, .. } => *slope,
            Ramp::CosineSmoothed { amplitude, duration } => {
                if t < 0.0 || t > *duration {
                    0.0
                } else {
                    amplitude * PI / (2.0 * duration) * (PI * t / duration).sin()
                }
            }
            Ramp::Polynomial { coeffs } => coeffs
                .iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(0.0, |acc, (k, c)| acc * t + k as f64 * c),
            Ramp::Sinusoidal {
                amplitude,
                period,
                phase,
                ..
            } => amplitude * TAU / period * (TAU * t / period + phase).cos(),
            Ramp::Sampled { dt, .. } => {
                let h = dt / 16.0;
                (self.value(t + h) - self.value(t - h)) / (2.0 * h)
            }
            Ramp::Scaled { factor, inner } => factor * inner.deriv(t),
        }
    }

    pub fn second_deriv(&self, t: f64) -> f64 {
        use std::f64::consts::{PI, TAU};
        match self {
            Ramp::Constant { .. } | Ramp::Linear { .. } => 0.0,
            Ramp::CosineSmoothed { amplitude, duration } => {
                if t < 0.0 || t > *duration {
                    0.0
                } else {
                    amplitude * PI * PI / (2.0 * duration * duration) * (PI * t / duration).cos()
                }
            }
            Ramp::Polynomial { coeffs } => coeffs
                .iter()
                .enumerate()
                .skip(2)
                .rev()
                .fold(0.0, |acc, (k, c)| acc * t + (k * (k - 1)) as f64 * c),
            Ramp::Sinusoidal {
                amplitude,
                period,
                phase,
                ..
            } => -amplitude * (TAU / period).powi(2) * (TAU * t / period + phase).sin(),
            Ramp::Sampled { dt, .. } => {
                let h = dt / 16.0;
                (self.value(t + h) - 2.0 * self.value(t) + self.value(t - h)) / (h * h)
            }
            Ramp::Scaled { factor, inner } => factor * inner.second_deriv(t),
        }
    }

    /// True when θ̇ is constant, which the paired-rate formula requires.
    pub fn is_linear(&self) -> bool {
        match self {
            Ramp::Constant { .. } | Ramp::Linear { .. } => true,
            Ramp::Polynomial { coeffs } => coeffs.iter().skip(2).all(|&c| c == 0.0),
            Ramp::Scaled { inner, .. } => inner.is_linear(),
            _ => false,
        }
    }
}

/// Linear combination Σ c_k a_k + Σ d_k a_k† over the frame's modes.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearForm {
    pub coeffs: Vec<Complex64>,
}

impl LinearForm {
    pub fn zero(modes: usize) -> Self {
        LinearForm {
            coeffs: vec![ZERO; 2 * modes],
        }
    }

    pub fn modes(&self) -> usize {
        self.coeffs.len() / 2
    }

    pub fn lower(modes: usize, k: usize) -> Self {
        let mut f = Self::zero(modes);
        f.coeffs[k] = ONE;
        f
    }

    pub fn raise(modes: usize, k: usize) -> Self {
        let mut f = Self::zero(modes);
        f.coeffs[modes + k] = ONE;
        f
    }

    pub fn adjoint(&self) -> Self {
        let n = self.modes();
        let mut f = Self::zero(n);
        for k in 0..n {
            f.coeffs[k] = self.coeffs[n + k].conj();
            f.coeffs[n + k] = self.coeffs[k].conj();
        }
        f
    }

    fn combine(terms: &[(Complex64, &LinearForm)]) -> Self {
        let mut f = Self::zero(terms[0].1.modes());
        for (s, g) in terms {
            for (x, y) in f.coeffs.iter_mut().zip(&g.coeffs) {
                *x += s * y;
            }
        }
        f
    }

    /// [A, B†] for two forms, a c-number: Σ_k (A_k conj(B_k) − A_{k†} conj(B_{k†})).
    pub fn commutator_with_adjoint(&self, other: &LinearForm) -> Complex64 {
        let n = self.modes();
        (0..n)
            .map(|k| {
                self.coeffs[k] * other.coeffs[k].conj()
                    - self.coeffs[n + k] * other.coeffs[n + k].conj()
            })
            .sum()
    }

    /// [A, B] for two forms: Σ_k (A_k B_{k†} − A_{k†} B_k).
    pub fn commutator(&self, other: &LinearForm) -> Complex64 {
        let n = self.modes();
        (0..n)
            .map(|k| self.coeffs[k] * other.coeffs[n + k] - self.coeffs[n + k] * other.coeffs[k])
            .sum()
    }

    /// Builds the operator on `space`, with local mode k mapped to `modes[k]`.
    pub fn to_operator(&self, space: &FockSpace, modes: &[usize]) -> Result<BosonOperator> {
        let n = self.modes();
        if modes.len() != n {
            return Err(CvError::InvalidArgument(format!("expected {n} modes, got {}", modes.len())));
        }
        let mut op = BosonOperator::zero(space);
        for (k, &mode) in modes.iter().enumerate().take(n) {
            if self.coeffs[k] != ZERO {
                op = op.add_scaled(&fockspace::lower(space, mode)?, self.coeffs[k])?;
            }
            if self.coeffs[n + k] != ZERO {
                op = op.add_scaled(&fockspace::raise(space, mode)?, self.coeffs[n + k])?;
            }
        }
        Ok(op)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FrameKind {
    Single { mode: usize },
    Two { modes: [usize; 2] },
    Chain { modes: Vec<usize> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SymplecticFrame {
    kind: FrameKind,
    theta: Vec<Ramp>,
    alpha: Vec<Ramp>,
}

/// Forms of the ancillary operators μ_k and bright operators b_k† at one
/// instant, with their time derivatives.
#[derive(Clone, Debug)]
pub struct FrameForms {
    pub mu: Vec<LinearForm>,
    pub mu_dot: Vec<LinearForm>,
    pub bright_dagger: Vec<LinearForm>,
    pub bright_dagger_dot: Vec<LinearForm>,
}

impl SymplecticFrame {
    pub fn single(theta: Ramp, alpha: Ramp) -> Self {
        SymplecticFrame {
            kind: FrameKind::Single { mode: 0 },
            theta: vec![theta],
            alpha: vec![alpha],
        }
    }

    pub fn two(theta: Ramp, alpha: Ramp) -> Self {
        SymplecticFrame {
            kind: FrameKind::Two { modes: [0, 1] },
            theta: vec![theta],
            alpha: vec![alpha],
        }
    }

    pub fn chain(thetas: Vec<Ramp>, alphas: Vec<Ramp>) -> Result<Self> {
        if thetas.is_empty() || thetas.len() != alphas.len() {
            return Err(CvError::InvalidArgument(
                "chain frame needs N−1 ≥ 1 matching θ and α schedules".into(),
            ));
        }
        let n = thetas.len() + 1;
        Ok(SymplecticFrame {
            kind: FrameKind::Chain {
                modes: (0..n).collect(),
            },
            theta: thetas,
            alpha: alphas,
        })
    }

    /// Places the frame on other modes of a larger space.
    pub fn on_modes(mut self, modes: &[usize]) -> Result<Self> {
        if modes.len() != self.modes() {
            return Err(CvError::InvalidArgument("mode list length mismatch".into()));
        }
        self.kind = match self.kind {
            FrameKind::Single { .. } => FrameKind::Single { mode: modes[0] },
            FrameKind::Two { .. } => FrameKind::Two {
                modes: [modes[0], modes[1]],
            },
            FrameKind::Chain { .. } => FrameKind::Chain {
                modes: modes.to_vec(),
            },
        };
        Ok(self)
    }

    pub fn kind(&self) -> &FrameKind {
        &self.kind
    }

    pub fn theta(&self, k: usize) -> &Ramp {
        &self.theta[k]
    }

    pub fn alpha(&self, k: usize) -> &Ramp {
        &self.alpha[k]
    }

    pub fn stages(&self) -> usize {
        self.theta.len()
    }

    pub fn modes(&self) -> usize {
        match &self.kind {
            FrameKind::Single { .. } => 1,
            FrameKind::Two { .. } => 2,
            FrameKind::Chain { modes } => modes.len(),
        }
    }

    pub fn mode_indices(&self) -> Vec<usize> {
        match &self.kind {
            FrameKind::Single { mode } => vec![*mode],
            FrameKind::Two { modes } => modes.to_vec(),
            FrameKind::Chain { modes } => modes.clone(),
        }
    }

    /// Frame with θ_k → −θ_k for every stage k where `which[k]` is set.
    pub fn mirrored(&self, which: &[bool]) -> Self {
        let mut f = self.clone();
        for (k, &m) in which.iter().enumerate() {
            if m {
                f.theta[k] = f.theta[k].scaled(-1.0);
            }
        }
        f
    }

    pub fn theta_at_start(&self) -> Vec<f64> {
        self.theta.iter().map(|r| r.value(0.0)).collect()
    }

    pub fn forms(&self, t: f64) -> FrameForms {
        let n = self.modes();
        let single = matches!(self.kind, FrameKind::Single { .. });
        let mut b = LinearForm::lower(n, 0);
        let mut b_dot = LinearForm::zero(n);
        let mut mu = Vec::with_capacity(n);
        let mut mu_dot = Vec::with_capacity(n);
        let mut bd = Vec::with_capacity(n);
        let mut bd_dot = Vec::with_capacity(n);
        for k in 0..self.theta.len() {
            let (th, th_d) = (self.theta[k].value(t), self.theta[k].deriv(t));
            let (al, al_d) = (self.alpha[k].value(t), self.alpha[k].deriv(t));
            let (c, s) = (th.cosh(), th.sinh());
            let e = Complex64::from_polar(1.0, -al);
            let partner = LinearForm::raise(n, if single { 0 } else { k + 1 });

            let p = -s * e;
            let p_dot = -th_d * c * e + I * al_d * s * e;
            let m = LinearForm::combine(&[(c.into(), &b), (p, &partner)]);
            let m_dot = LinearForm::combine(&[
                ((th_d * s).into(), &b),
                (c.into(), &b_dot),
                (p_dot, &partner),
            ]);

            let q = -s * e.conj();
            let q_dot = -th_d * c * e.conj() - I * al_d * s * e.conj();
            let bdag = LinearForm::combine(&[(q, &b), (c.into(), &partner)]);
            let bdag_dot = LinearForm::combine(&[
                (q_dot, &b),
                (q, &b_dot),
                ((th_d * s).into(), &partner),
            ]);

            mu.push(m);
            mu_dot.push(m_dot);
            b = bdag.adjoint();
            b_dot = bdag_dot.adjoint();
            bd.push(bdag);
            bd_dot.push(bdag_dot);
        }
        if !single {
            mu.push(b);
            mu_dot.push(b_dot);
        }
        FrameForms {
            mu,
            mu_dot,
            bright_dagger: bd,
            bright_dagger_dot: bd_dot,
        }
    }

    pub fn ancillary_form(&self, t: f64, k: usize) -> Result<LinearForm> {
        self.forms(t)
            .mu
            .into_iter()
            .nth(k)
            .ok_or(CvError::InvalidMode {
                index: k,
                modes: self.modes(),
            })
    }

    /// Bright operator b_k† (k = 1 … N−1); b_{N−1}† coincides with μ_N.
    pub fn bright_dagger_form(&self, t: f64, k: usize) -> Result<LinearForm> {
        if k == 0 || k > self.theta.len() {
            return Err(CvError::InvalidArgument(format!(
                "bright operator index {k} out of range 1..={}",
                self.theta.len()
            )));
        }
        Ok(self.forms(t).bright_dagger.swap_remove(k - 1))
    }
}

/// 2N×2N matrix mapping (a, a†) to (μ, μ†) at time t.
#[derive(Clone, Debug)]
pub struct FrameMatrix {
    pub t: f64,
    pub entries: DMatrix<Complex64>,
}

impl FrameMatrix {
    pub fn modes(&self) -> usize {
        self.entries.nrows() / 2
    }

    /// ‖M η M† − η‖_max with η = diag(I, −I).
    pub fn symplectic_defect(&self) -> f64 {
        let eta = metric(self.modes());
        let d = &self.entries * &eta * self.entries.adjoint() - eta;
        d.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    /// 2×2 view on rows/columns (i, j): e.g. (0, 1) is the single-mode block,
    /// (0, N+1) is the (μ_1, μ_2†) × (a_1, a_2†) block of a two-mode frame.
    pub fn view(&self, i: usize, j: usize) -> Matrix2<Complex64> {
        let e = &self.entries;
        Matrix2::new(e[(i, i)], e[(i, j)], e[(j, i)], e[(j, j)])
    }
}

fn metric(n: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(2 * n, 2 * n, |r, c| {
        if r != c {
            ZERO
        } else if r < n {
            ONE
        } else {
            -ONE
        }
    })
}

fn forms_to_matrix(forms: &[LinearForm]) -> DMatrix<Complex64> {
    let n = forms.len();
    let mut m = DMatrix::from_element(2 * n, 2 * n, ZERO);
    for (r, f) in forms.iter().enumerate() {
        let fa = f.adjoint();
        for c in 0..2 * n {
            m[(r, c)] = f.coeffs[c];
            m[(n + r, c)] = fa.coeffs[c];
        }
    }
    m
}

pub fn frame_matrix(frame: &SymplecticFrame, t: f64) -> FrameMatrix {
    FrameMatrix {
        t,
        entries: forms_to_matrix(&frame.forms(t).mu),
    }
}

/// Ṁ(t) from the analytic derivatives of the ramps.
pub fn frame_matrix_derivative(frame: &SymplecticFrame, t: f64) -> DMatrix<Complex64> {
    forms_to_matrix(&frame.forms(t).mu_dot)
}

/// 𝒜(t) = i [M†(0)]⁻¹ M⁻¹(t) Ṁ(t) M⁻¹(0).
pub fn gauge_potential(frame: &SymplecticFrame, t: f64) -> Result<DMatrix<Complex64>> {
    let inv = |m: DMatrix<Complex64>| {
        m.try_inverse()
            .ok_or_else(|| CvError::InvalidArgument("singular frame matrix".into()))
    };
    let m0 = frame_matrix(frame, 0.0).entries;
    let m0_inv = inv(m0.clone())?;
    let m0_adj_inv = inv(m0.adjoint())?;
    let mt_inv = inv(frame_matrix(frame, t).entries)?;
    let md = frame_matrix_derivative(frame, t);
    Ok(m0_adj_inv * mt_inv * md * m0_inv * I)
}

/// μ_k(t) on `space` (k is zero-based).
pub fn ancillary_operator(
    frame: &SymplecticFrame,
    t: f64,
    space: &FockSpace,
    k: usize,
) -> Result<BosonOperator> {
    check_space(frame, space)?;
    frame
        .ancillary_form(t, k)?
        .to_operator(space, &frame.mode_indices())
}

fn check_space(frame: &SymplecticFrame, space: &FockSpace) -> Result<()> {
    for m in frame.mode_indices() {
        space.check_mode(m)?;
    }
    Ok(())
}

/// Generator G with S(ξ) = exp(G) for stage `k` of the frame at time t.
/// Single mode: (ξa² − ξ*a†²)/2. Pairwise stages: ξ b a − ξ* b† a† with b the
/// incoming operator of the stage (b_0 = a_1).
fn stage_generator(
    frame: &SymplecticFrame,
    t: f64,
    space: &FockSpace,
    k: usize,
) -> Result<BosonOperator> {
    let modes = frame.mode_indices();
    let xi = Complex64::from_polar(frame.theta[k].value(t), -frame.alpha[k].value(t));
    if let FrameKind::Single { mode } = frame.kind {
        return fockspace::squeeze_generator(space, &[mode], xi);
    }
    let b = if k == 0 {
        fockspace::lower(space, modes[0])?
    } else {
        frame.forms(t).bright_dagger[k - 1]
            .adjoint()
            .to_operator(space, &modes)?
    };
    let a = fockspace::lower(space, modes[k + 1])?;
    let ba = b.mul(&a)?;
    let ba_dag = ba.adjoint();
    ba.scale(xi).add_scaled(&ba_dag, -xi.conj())
}

/// V(t) = Π_k S_k†(θ_k(t)e^{−iα_k(t)}) S_k(θ_k(0)e^{−iα_k(0)}), built column by
/// column. Fails if V†V deviates from the identity by more than 1e-6 on
/// basis states with every occupation ≤ dim/2.
pub fn rotation_unitary(frame: &SymplecticFrame, t: f64, space: &FockSpace) -> Result<BosonOperator> {
    check_space(frame, space)?;
    let n = space.total_dim();
    if n > 4096 {
        return Err(CvError::DimensionGuard(format!(
            "rotation unitary is assembled densely; dimension {n} > 4096"
        )));
    }
    let mut factors = Vec::new();
    for k in 0..frame.stages() {
        factors.push(stage_generator(frame, t, space, k)?.scale(-ONE));
        factors.push(stage_generator(frame, 0.0, space, k)?);
    }
    // V e_j = F_1 F_2 … F_m e_j: apply the rightmost factor first.
    let mut dense = DMatrix::from_element(n, n, ZERO);
    for j in 0..n {
        let mut col = vec![ZERO; n];
        col[j] = ONE;
        for g in factors.iter().rev() {
            col = expm::expm_multiply(g.matrix(), ONE, &col, expm::DEFAULT_TOL)?;
        }
        for (i, v) in col.into_iter().enumerate() {
            dense[(i, j)] = v;
        }
    }
    let mask: Vec<usize> = (0..n)
        .filter(|&i| (0..space.modes()).all(|k| 2 * space.occupation(i, k) <= space.dim(k)))
        .collect();
    let vv = dense.adjoint() * &dense;
    let mut defect: f64 = 0.0;
    for &r in &mask {
        for &c in &mask {
            let want = if r == c { ONE } else { ZERO };
            defect = defect.max((vv[(r, c)] - want).norm());
        }
    }
    if defect > 1e-6 {
        return Err(CvError::TruncationTooSmall(format!(
            "rotation unitary loses unitarity on the interior ({defect:.3e})"
        )));
    }
    BosonOperator::from_matrix(space, CsrMatrix::from_dense(&dense, 1e-300))
}

/// Largest |[μ_j, μ_k†] − δ_jk| and |[μ_j, b_k]| over all pairs, evaluated on
/// the forms (exact, no truncation).
pub fn canonical_defect(frame: &SymplecticFrame, t: f64) -> f64 {
    let f = frame.forms(t);
    let mut worst: f64 = 0.0;
    for (j, mj) in f.mu.iter().enumerate() {
        for (k, mk) in f.mu.iter().enumerate() {
            let want = if j == k { ONE } else { ZERO };
            worst = worst.max((mj.commutator_with_adjoint(mk) - want).norm());
            worst = worst.max(mj.commutator(mk).norm());
        }
        // μ_j commutes with b_k for k ≥ j; the last b† is μ_N† itself.
        let bright = &f.bright_dagger[..f.bright_dagger.len().saturating_sub(1)];
        for bk in bright.iter().skip(j) {
            worst = worst.max(mj.commutator(&bk.adjoint()).norm());
        }
    }
    worst
}

/// max over interior basis pairs of |⟨m|[A, B] − c·I|n⟩|.
pub fn interior_commutator_defect(
    a: &BosonOperator,
    b: &BosonOperator,
    c: Complex64,
    margin: usize,
) -> Result<f64> {
    let comm = a.commutator(b)?;
    let target = BosonOperator::identity(a.space()).scale(c);
    let diff = comm.sub(&target)?;
    let mask = a.space().interior_mask(margin);
    let mut worst: f64 = 0.0;
    for (r, cidx, v) in diff.matrix().triplets() {
        if mask[r] && mask[cidx] {
            worst = worst.max(v.norm());
        }
    }
    Ok(worst)
}

/// max over interior basis pairs of |⟨m|A − B|n⟩|.
pub fn interior_difference(a: &BosonOperator, b: &BosonOperator, margin: usize) -> Result<f64> {
    let diff = a.sub(b)?;
    let mask = a.space().interior_mask(margin);
    Ok(diff
        .matrix()
        .triplets()
        .into_iter()
        .filter(|(r, c, _)| mask[*r] && mask[*c])
        .fold(0.0, |m, (_, _, v)| m.max(v.norm())))
}

/// Applies μ_k(t) to a state; convenience for annihilation checks.
pub fn apply_ancillary(
    frame: &SymplecticFrame,
    t: f64,
    k: usize,
    psi: &StateVector,
) -> Result<StateVector> {
    ancillary_operator(frame, t, psi.space(), k)?.apply(psi)
}
