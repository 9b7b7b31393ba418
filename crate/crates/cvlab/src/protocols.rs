//! Control-schedule synthesis for the single-, two- and three-mode protocols.
//!
//! Times are in units of the ramp constant T and rates in units of 1/T.

use std::f64::consts::FRAC_PI_2;
use std::io::Write;

use nalgebra::Matrix2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{CvError, Result};
use crate::fmt_f64;
use crate::frames::{frame_matrix, frame_matrix_derivative, Ramp, SymplecticFrame};
use crate::quad;

const I: Complex64 = Complex64::new(0.0, 1.0);
const QUAD_TOL: f64 = 1e-13;
/// |sin(φ+α)| below this is treated as a singular drive.
const SIN_FLOOR: f64 = 1e-9;

/// θ(t) = πt/(2T).
pub fn theta_linear(t: f64, big_t: f64) -> f64 {
    std::f64::consts::PI * t / (2.0 * big_t)
}

pub fn theta_linear_ramp(big_t: f64) -> Ramp {
    Ramp::linear(std::f64::consts::PI / (2.0 * big_t))
}

/// Which closed form determines the detuning ω.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OmegaRule {
    /// ω = −[α̇ + 2Ω cos(φ+α)] coth 2θ (two modes: ω₁+ω₂ = −2[α̇ + g cos(φ+α)] coth 2θ).
    #[default]
    Standard,
    /// ω = α̇/2 + 2Ω cos(φ+α) coth 2θ (two modes: ω₁+ω₂ = α̇ + 2g cos(φ+α) coth 2θ),
    /// the value that transports the ket annihilation condition.
    KetConsistent,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaMode {
    Literal,
    #[default]
    Solved,
}

/// How the trigonometric factors of the literal two-stage formula are read.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LiteralReading {
    #[default]
    Sinh,
    Sin,
}

/// Loss/gain rate γ(t).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GammaSchedule {
    Constant {
        value: f64,
    },
    /// `before` on [0, switch), `after` on [switch, ∞).
    TwoStage {
        switch: f64,
        before: f64,
        after: f64,
    },
    /// γ = λ[(F(θ(τ₁)) − F(θ(0)))/(2θ̇) − τ₁] on [0, τ₁],
    /// γ = −λ[(F(θ(τ)) − F(θ(τ₁)))/(2θ̇) − (τ − τ₁)] on [τ₁, τ],
    /// with F = sinh 2θ (or sin 2θ for the `Sin` reading, which keeps sinh 2θ(0)).
    Literal {
        lambda: f64,
        tau1: f64,
        tau: f64,
        reading: LiteralReading,
        theta: Ramp,
    },
}

impl GammaSchedule {
    pub fn value(&self, t: f64) -> f64 {
        match self {
            GammaSchedule::Constant { value } => *value,
            GammaSchedule::TwoStage {
                switch,
                before,
                after,
            } => {
                if t < *switch {
                    *before
                } else {
                    *after
                }
            }
            GammaSchedule::Literal {
                lambda,
                tau1,
                tau,
                reading,
                theta,
            } => {
                let f = |x: f64| match reading {
                    LiteralReading::Sinh => (2.0 * x).sinh(),
                    LiteralReading::Sin => (2.0 * x).sin(),
                };
                let thd = theta.deriv(t);
                if t < *tau1 {
                    lambda
                        * ((f(theta.value(*tau1)) - (2.0 * theta.value(0.0)).sinh()) / (2.0 * thd)
                            - tau1)
                } else {
                    -lambda
                        * ((f(theta.value(*tau)) - (2.0 * theta.value(*tau1)).sinh()) / (2.0 * thd)
                            - (tau - tau1))
                }
            }
        }
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            GammaSchedule::Constant { .. } => vec![],
            GammaSchedule::TwoStage { switch, .. } => vec![*switch],
            GammaSchedule::Literal { tau1, .. } => vec![*tau1],
        }
    }
}

/// Complex global phase f = f_r + i f_i; the dressed invariant carries e^{if}
/// so |e^{if}| = e^{−f_i}.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseAccumulator {
    pub f_r: f64,
    pub f_i: f64,
}

impl PhaseAccumulator {
    pub fn modulus(&self) -> f64 {
        (-self.f_i).exp()
    }
}

/// Rate of the global phase: the lower-right entry of 𝓗 = H^μ − 𝒜 on a
/// 2×2 frame view, with H^μ = (M⁻¹)† H^a M⁻¹ and
/// 𝒜 = i [M†(0)]⁻¹ M⁻¹(t) Ṁ(t) M⁻¹(0). Returns (ḟ_r, ḟ_i) = (Re, −Im).
pub fn phase_rate(frame: &SymplecticFrame, view: (usize, usize), h_a: Matrix2<Complex64>, t: f64) -> Result<(f64, f64)> {
    let (i, j) = view;
    let full_t = frame_matrix(frame, t);
    let m_t = full_t.view(i, j);
    let m_0 = frame_matrix(frame, 0.0).view(i, j);
    let d = frame_matrix_derivative(frame, t);
    let m_dot = Matrix2::new(d[(i, i)], d[(i, j)], d[(j, i)], d[(j, j)]);
    let singular = || CvError::InvalidArgument("singular frame matrix".into());
    let m_t_inv = m_t.try_inverse().ok_or_else(singular)?;
    let m_0_inv = m_0.try_inverse().ok_or_else(singular)?;
    let m_0_adj_inv = m_0.adjoint().try_inverse().ok_or_else(singular)?;
    let h_mu = m_t_inv.adjoint() * h_a * m_t_inv;
    let gauge = m_0_adj_inv * m_t_inv * m_dot * m_0_inv * I;
    let slot = h_mu[(1, 1)] - gauge[(1, 1)];
    Ok((slot.re, -slot.im))
}

fn integrate_phase<F>(rate: F, breaks: &[f64], t0: f64, t1: f64) -> Result<PhaseAccumulator>
where
    F: Fn(f64) -> Result<(f64, f64)>,
{
    let err = std::cell::Cell::new(None);
    let pick = |k: usize| {
        let err = &err;
        let rate = &rate;
        move |s: f64| match rate(s) {
            Ok(v) => {
                if k == 0 {
                    v.0
                } else {
                    v.1
                }
            }
            Err(e) => {
                err.set(Some(e.to_string()));
                f64::NAN
            }
        }
    };
    let f_r = quad::integrate(pick(0), t0, t1, breaks, QUAD_TOL);
    let f_i = quad::integrate(pick(1), t0, t1, breaks, QUAD_TOL);
    if let Some(e) = err.take() {
        return Err(CvError::SingularControl(e));
    }
    Ok(PhaseAccumulator { f_r: f_r?, f_i: f_i? })
}

/// Cumulative phase on a sorted time grid starting at 0.
fn phase_series<F>(rate: F, breaks: &[f64], times: &[f64]) -> Result<Vec<PhaseAccumulator>>
where
    F: Fn(f64) -> Result<(f64, f64)> + Copy,
{
    let mut out = Vec::with_capacity(times.len());
    let mut acc = PhaseAccumulator::default();
    let mut prev = 0.0;
    for &t in times {
        let inc = integrate_phase(rate, breaks, prev, t)?;
        acc.f_r += inc.f_r;
        acc.f_i += inc.f_i;
        out.push(acc);
        prev = t;
    }
    Ok(out)
}

fn check_drive_phase(s: f64, what: &str, t: f64) -> Result<()> {
    if s.abs() < SIN_FLOOR {
        Err(CvError::SingularControl(format!(
            "sin(φ+α) = {s:.3e} at t = {t}: {what} is undefined"
        )))
    } else {
        Ok(())
    }
}

/// bracket·coth 2θ with the removable case bracket ≡ 0 returning exactly 0.
fn coth_term(bracket: f64, theta: f64, t: f64) -> Result<f64> {
    if bracket == 0.0 {
        return Ok(0.0);
    }
    let s = (2.0 * theta).sinh();
    if s == 0.0 {
        return Err(CvError::SingularControl(format!(
            "coth 2θ diverges at θ = 0 (t = {t}) with nonzero bracket {bracket:.3e}"
        )));
    }
    Ok(bracket * (2.0 * theta).cosh() / s)
}

/// Zeroes values that are round-off of an exactly vanishing expression
/// such as cos(π/2).
fn snap(x: f64, scale: f64) -> f64 {
    if x.abs() <= 1e-14 * scale.max(1.0) {
        0.0
    } else {
        x
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingleModeProtocol {
    /// Terminal time τ.
    pub tau: f64,
    /// Stage switch τ₁.
    pub tau1: f64,
    /// Drive phase φ.
    pub phi: f64,
    pub theta: Ramp,
    pub alpha: Ramp,
    pub gamma_mode: GammaMode,
    /// First-stage rate of the solved schedule.
    pub gamma0: f64,
    /// Scale of the literal schedule.
    pub lambda: f64,
    pub literal_reading: LiteralReading,
    pub omega_rule: OmegaRule,
    /// Minimum second-stage length as a fraction of τ.
    pub stage_floor: f64,
}

impl SingleModeProtocol {
    /// θ = πt/(2T), φ = π/2, α = 0, τ₁ = 6τ/7, solved γ with γ₀T = 0.5.
    pub fn standard(tau: f64) -> Self {
        SingleModeProtocol {
            tau,
            tau1: 6.0 * tau / 7.0,
            phi: FRAC_PI_2,
            theta: theta_linear_ramp(1.0),
            alpha: Ramp::constant(0.0),
            gamma_mode: GammaMode::Solved,
            gamma0: 0.5,
            lambda: 0.0,
            literal_reading: LiteralReading::Sinh,
            omega_rule: OmegaRule::Standard,
            stage_floor: 0.01,
        }
    }

    pub fn frame(&self) -> SymplecticFrame {
        SymplecticFrame::single(self.theta.clone(), self.alpha.clone())
    }

    pub fn validate(&self) -> Result<()> {
        self.theta.validate()?;
        self.alpha.validate()?;
        if !(self.tau > 0.0) {
            return Err(CvError::InvalidArgument("τ must be positive".into()));
        }
        if !(self.tau1 > 0.0 && self.tau1 < self.tau) {
            return Err(CvError::InvalidArgument(format!(
                "stage switch τ₁ = {} must lie in (0, τ = {})",
                self.tau1, self.tau
            )));
        }
        check_phase_grid(self.phi, &self.alpha, self.tau)
    }
}

fn check_phase_grid(phi: f64, alpha: &Ramp, tau: f64) -> Result<()> {
    for k in 0..=1000 {
        let t = tau * k as f64 / 1000.0;
        check_drive_phase((phi + alpha.value(t)).sin(), "the drive", t)?;
    }
    Ok(())
}

/// (Ω, ω) at time t for a given loss rate γ.
pub fn drive_single(p: &SingleModeProtocol, gamma: f64, t: f64) -> Result<(f64, f64)> {
    let th = p.theta.value(t);
    let thd = p.theta.deriv(t);
    let beta = p.phi + p.alpha.value(t);
    let (sb, cb) = (beta.sin(), snap(beta.cos(), 1.0));
    check_drive_phase(sb, "Ω", t)?;
    let big_omega = -(thd + gamma * th.sinh() * th.cosh()) / (2.0 * sb);
    let ad = p.alpha.deriv(t);
    let omega = match p.omega_rule {
        OmegaRule::Standard => -coth_term(ad + 2.0 * big_omega * cb, th, t)?,
        OmegaRule::KetConsistent => ad / 2.0 + coth_term(2.0 * big_omega * cb, th, t)?,
    };
    Ok((big_omega, omega))
}

/// (ḟ_r, ḟ_i) of the single-mode frame with the controls synthesized for a
/// loss rate γ at time t.
fn single_rate(p: &SingleModeProtocol, gamma: f64, t: f64) -> Result<(f64, f64)> {
    let (big_omega, omega) = drive_single(p, gamma, t)?;
    let h_a = Matrix2::new(
        Complex64::new(omega, -gamma / 2.0),
        Complex64::from_polar(big_omega, p.phi),
        Complex64::from_polar(big_omega, -p.phi),
        0.0.into(),
    );
    phase_rate(&p.frame(), (0, 1), h_a, t)
}

/// Weight w(t) with ḟ_i = γ(t)·w(t). The rate is affine in γ through the
/// loss term and Ω, and its γ-free part vanishes.
fn single_weight(p: &SingleModeProtocol, t: f64) -> Result<f64> {
    Ok(single_rate(p, 1.0, t)?.1 - single_rate(p, 0.0, t)?.1)
}

pub fn gamma_single(p: &SingleModeProtocol, mode: GammaMode) -> Result<GammaSchedule> {
    p.validate()?;
    match mode {
        GammaMode::Literal => Ok(GammaSchedule::Literal {
            lambda: p.lambda,
            tau1: p.tau1,
            tau: p.tau,
            reading: p.literal_reading,
            theta: p.theta.clone(),
        }),
        GammaMode::Solved => {
            if p.tau - p.tau1 < p.stage_floor * p.tau {
                return Err(CvError::InvalidArgument(format!(
                    "second stage τ − τ₁ = {:.3e} is below the floor {}·τ",
                    p.tau - p.tau1,
                    p.stage_floor
                )));
            }
            let w = |s: f64| single_weight(p, s).unwrap_or(f64::NAN);
            let ia = quad::integrate(w, 0.0, p.tau1, &[], QUAD_TOL)?;
            let ib = quad::integrate(w, p.tau1, p.tau, &[], QUAD_TOL)?;
            if ib == 0.0 || !ib.is_finite() {
                return Err(CvError::InvalidArgument(
                    "zero weight on the second stage; γ cannot cancel".into(),
                ));
            }
            Ok(GammaSchedule::TwoStage {
                switch: p.tau1,
                before: p.gamma0,
                after: -p.gamma0 * ia / ib,
            })
        }
    }
}

/// Controls of one single-mode sample.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SingleControls {
    pub big_omega: f64,
    pub omega: f64,
    pub gamma: f64,
}

#[derive(Clone, Debug)]
pub struct ResolvedSingle {
    pub protocol: SingleModeProtocol,
    pub gamma: GammaSchedule,
}

impl ResolvedSingle {
    pub fn new(protocol: SingleModeProtocol) -> Result<Self> {
        let gamma = gamma_single(&protocol, protocol.gamma_mode)?;
        Ok(ResolvedSingle { protocol, gamma })
    }

    pub fn with_gamma(protocol: SingleModeProtocol, gamma: GammaSchedule) -> Result<Self> {
        protocol.validate()?;
        Ok(ResolvedSingle { protocol, gamma })
    }

    pub fn controls(&self, t: f64) -> Result<SingleControls> {
        let gamma = self.gamma.value(t);
        let (big_omega, omega) = drive_single(&self.protocol, gamma, t)?;
        Ok(SingleControls {
            big_omega,
            omega,
            gamma,
        })
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        self.gamma.breakpoints()
    }

    fn rate(&self, t: f64) -> Result<(f64, f64)> {
        single_rate(&self.protocol, self.gamma.value(t), t)
    }

    pub fn global_phase(&self, t: f64) -> Result<PhaseAccumulator> {
        integrate_phase(|s| self.rate(s), &self.breakpoints(), 0.0, t)
    }

    pub fn phase_series(&self, times: &[f64]) -> Result<Vec<PhaseAccumulator>> {
        phase_series(|s| self.rate(s), &self.breakpoints(), times)
    }

    pub fn write_schedule_csv<W: Write>(&self, mut w: W, times: &[f64]) -> Result<()> {
        writeln!(w, "t,theta,alpha,Omega,omega,gamma,f_r,f_i")?;
        let phases = self.phase_series(times)?;
        for (&t, ph) in times.iter().zip(&phases) {
            let c = self.controls(t)?;
            let row = [
                t,
                self.protocol.theta.value(t),
                self.protocol.alpha.value(t),
                c.big_omega,
                c.omega,
                c.gamma,
                ph.f_r,
                ph.f_i,
            ];
            write_row(&mut w, &row)?;
        }
        Ok(())
    }
}

pub(crate) fn write_row<W: Write>(w: &mut W, row: &[f64]) -> Result<()> {
    let cells: Vec<String> = row.iter().map(|&x| fmt_f64(x)).collect();
    writeln!(w, "{}", cells.join(","))?;
    Ok(())
}

/// How the paired constant rates are obtained.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PairRates {
    /// γ₁,₂ = ∓λ[sinh 2θ(τ) ± 2θ̇τ].
    #[default]
    Formula,
    /// The formula rescaled so that |γ₁T| equals `target`.
    CaptionScaled { target: f64 },
    Explicit { gamma1: f64, gamma2: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoModeProtocol {
    pub tau: f64,
    pub phi: f64,
    pub theta: Ramp,
    pub alpha: Ramp,
    pub lambda: f64,
    pub rates: PairRates,
    /// ω₁ = split·(ω₁+ω₂), ω₂ = (1 − split)·(ω₁+ω₂).
    pub omega_split: f64,
    pub omega_rule: OmegaRule,
}

impl TwoModeProtocol {
    /// θ = πt/(2T), φ = π/2, α = 0, λ = 0.02, paired rates from the formula.
    pub fn standard(tau: f64) -> Self {
        TwoModeProtocol {
            tau,
            phi: FRAC_PI_2,
            theta: theta_linear_ramp(1.0),
            alpha: Ramp::constant(0.0),
            lambda: 0.02,
            rates: PairRates::Formula,
            omega_split: 0.5,
            omega_rule: OmegaRule::Standard,
        }
    }

    pub fn frame(&self) -> SymplecticFrame {
        SymplecticFrame::two(self.theta.clone(), self.alpha.clone())
    }

    pub fn validate(&self) -> Result<()> {
        self.theta.validate()?;
        self.alpha.validate()?;
        if !(self.tau > 0.0) {
            return Err(CvError::InvalidArgument("τ must be positive".into()));
        }
        check_phase_grid(self.phi, &self.alpha, self.tau)
    }
}

/// γ₁ = −λ[sinh 2θ(τ) + 2θ̇τ], γ₂ = λ[sinh 2θ(τ) − 2θ̇τ] for a linear ramp from 0.
pub fn gamma_pair(tau: f64, lambda: f64, theta: &Ramp) -> Result<(f64, f64)> {
    if !theta.is_linear() {
        return Err(CvError::Precondition("paired rates require a linear θ ramp".into()));
    }
    if theta.value(0.0) != 0.0 {
        return Err(CvError::Precondition("paired rates require θ(0) = 0".into()));
    }
    let s = (2.0 * theta.value(tau)).sinh();
    let v = 2.0 * theta.deriv(0.0) * tau;
    Ok((-lambda * (s + v), lambda * (s - v)))
}

/// γ₁∫sinh²θ + γ₂∫cosh²θ over [0, τ] from the closed-form integrals of a
/// linear ramp.
pub fn pair_cancellation(tau: f64, theta: &Ramp, gamma1: f64, gamma2: f64) -> f64 {
    let thd = theta.deriv(0.0);
    let u = (2.0 * theta.value(tau)).sinh() / (2.0 * thd);
    gamma1 * (u - tau) / 2.0 + gamma2 * (u + tau) / 2.0
}

pub fn resolve_pair(p: &TwoModeProtocol) -> Result<(f64, f64)> {
    match p.rates {
        PairRates::Formula => gamma_pair(p.tau, p.lambda, &p.theta),
        PairRates::CaptionScaled { target } => {
            let (g1, g2) = gamma_pair(p.tau, p.lambda, &p.theta)?;
            if g1 == 0.0 {
                return Err(CvError::InvalidArgument("cannot rescale zero rates".into()));
            }
            let k = target / g1.abs();
            Ok((g1 * k, g2 * k))
        }
        PairRates::Explicit { gamma1, gamma2 } => Ok((gamma1, gamma2)),
    }
}

/// (g, ω₁, ω₂) at time t for constant rates γ₁, γ₂.
pub fn couple_two(p: &TwoModeProtocol, gamma1: f64, gamma2: f64, t: f64) -> Result<(f64, f64, f64)> {
    let th = p.theta.value(t);
    let thd = p.theta.deriv(t);
    let beta = p.phi + p.alpha.value(t);
    let (sb, cb) = (beta.sin(), snap(beta.cos(), 1.0));
    check_drive_phase(sb, "g", t)?;
    let g = -(2.0 * thd + (gamma1 + gamma2) * th.sinh() * th.cosh()) / (2.0 * sb);
    let ad = p.alpha.deriv(t);
    let sum = match p.omega_rule {
        OmegaRule::Standard => -2.0 * coth_term(ad + g * cb, th, t)?,
        OmegaRule::KetConsistent => ad + coth_term(2.0 * g * cb, th, t)?,
    };
    Ok((g, p.omega_split * sum, (1.0 - p.omega_split) * sum))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoControls {
    pub g: f64,
    pub omega1: f64,
    pub omega2: f64,
    pub gamma1: f64,
    pub gamma2: f64,
}

#[derive(Clone, Debug)]
pub struct ResolvedTwo {
    pub protocol: TwoModeProtocol,
    pub gamma1: f64,
    pub gamma2: f64,
}

impl ResolvedTwo {
    pub fn new(protocol: TwoModeProtocol) -> Result<Self> {
        protocol.validate()?;
        let (gamma1, gamma2) = resolve_pair(&protocol)?;
        Ok(ResolvedTwo {
            protocol,
            gamma1,
            gamma2,
        })
    }

    pub fn controls(&self, t: f64) -> Result<TwoControls> {
        let (g, omega1, omega2) = couple_two(&self.protocol, self.gamma1, self.gamma2, t)?;
        Ok(TwoControls {
            g,
            omega1,
            omega2,
            gamma1: self.gamma1,
            gamma2: self.gamma2,
        })
    }

    /// Rate on the reduced (a₁, a₂†) view, where the a₂ term sits in the
    /// lower-right slot: H^a = [[h₁, g e^{iφ}], [g e^{−iφ}, h₂]].
    fn rate(&self, t: f64) -> Result<(f64, f64)> {
        let c = self.controls(t)?;
        let phi = self.protocol.phi;
        let h1 = Complex64::new(c.omega1, -c.gamma1 / 2.0);
        let h2 = Complex64::new(c.omega2, -c.gamma2 / 2.0);
        let h_a = Matrix2::new(
            h1,
            Complex64::from_polar(c.g, phi),
            Complex64::from_polar(c.g, -phi),
            h2,
        );
        phase_rate(&self.protocol.frame(), (0, 3), h_a, t)
    }

    pub fn global_phase(&self, t: f64) -> Result<PhaseAccumulator> {
        integrate_phase(|s| self.rate(s), &[], 0.0, t)
    }

    pub fn phase_series(&self, times: &[f64]) -> Result<Vec<PhaseAccumulator>> {
        phase_series(|s| self.rate(s), &[], times)
    }

    pub fn write_schedule_csv<W: Write>(&self, mut w: W, times: &[f64]) -> Result<()> {
        writeln!(w, "t,theta,alpha,g,omega_1,omega_2,gamma_1,gamma_2,f_r,f_i")?;
        let phases = self.phase_series(times)?;
        for (&t, ph) in times.iter().zip(&phases) {
            let c = self.controls(t)?;
            let row = [
                t,
                self.protocol.theta.value(t),
                self.protocol.alpha.value(t),
                c.g,
                c.omega1,
                c.omega2,
                c.gamma1,
                c.gamma2,
                ph.f_r,
                ph.f_i,
            ];
            write_row(&mut w, &row)?;
        }
        Ok(())
    }
}

/// Phase relation between the two three-mode couplings.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseRule {
    /// φ₁ = π/2, φ₂ = π/2 + α₁.
    #[default]
    Standard,
    /// φ₁ = π/2 + α₁, φ₂ = π/2. Keeps μ₁ dark and μ₂, μ₃† invariant for any
    /// α₁; agrees with `Standard` when α₁ = 0.
    Swapped,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThreeModeProtocol {
    pub tau: f64,
    pub theta1: Ramp,
    pub theta2: Ramp,
    pub alpha1: f64,
    #[serde(default)]
    pub phase_rule: PhaseRule,
}

impl ThreeModeProtocol {
    /// Chain frame (θ₁, α₁), (θ₂, α₂ = 0) over modes 1–2–3.
    pub fn frame(&self) -> SymplecticFrame {
        SymplecticFrame::chain(
            vec![self.theta1.clone(), self.theta2.clone()],
            vec![Ramp::constant(self.alpha1), Ramp::constant(0.0)],
        )
        .expect("two stages")
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThreeModeControls {
    pub g1: f64,
    pub g2: f64,
    pub phi1: f64,
    pub phi2: f64,
    pub alpha2: f64,
}

/// φ₁, φ₂ from the phase rule, α₂ = 0, g₁ = θ̇₂ sinh θ₁, g₂ = −θ̇₂ cosh θ₁.
pub fn three_mode_controls(p: &ThreeModeProtocol, t: f64) -> ThreeModeControls {
    let th1 = p.theta1.value(t);
    let thd2 = p.theta2.deriv(t);
    ThreeModeControls {
        g1: thd2 * th1.sinh(),
        g2: -thd2 * th1.cosh(),
        phi1: match p.phase_rule {
            PhaseRule::Standard => FRAC_PI_2,
            PhaseRule::Swapped => FRAC_PI_2 + p.alpha1,
        },
        phi2: match p.phase_rule {
            PhaseRule::Standard => FRAC_PI_2 + p.alpha1,
            PhaseRule::Swapped => FRAC_PI_2,
        },
        alpha2: 0.0,
    }
}

impl ThreeModeProtocol {
    pub fn write_schedule_csv<W: Write>(&self, mut w: W, times: &[f64]) -> Result<()> {
        writeln!(w, "t,theta_1,theta_2,alpha_1,g_1,g_2,phi_1,phi_2,alpha_2")?;
        for &t in times {
            let c = three_mode_controls(self, t);
            let row = [
                t,
                self.theta1.value(t),
                self.theta2.value(t),
                self.alpha1,
                c.g1,
                c.g2,
                c.phi1,
                c.phi2,
                c.alpha2,
            ];
            write_row(&mut w, &row)?;
        }
        Ok(())
    }
}
