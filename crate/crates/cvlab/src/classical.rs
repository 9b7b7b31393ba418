//! Classical oscillators in complex canonical variables: Hamilton's equations,
//! the ancillary canonical variables u_k, and the fast-forward potential of a
//! scale-invariant trap.

use std::f64::consts::FRAC_PI_2;
use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::TimeGrid;
use crate::error::{CvError, Result};
use crate::fmt_f64;
use crate::frames::Ramp;
use crate::protocols::{couple_two, drive_single, SingleModeProtocol, TwoModeProtocol};
use crate::quad;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Phase-space point (a_1, …, a_N) at time t.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassicalState {
    pub a: Vec<Complex64>,
    pub t: f64,
}

impl ClassicalState {
    pub fn new(a: Vec<Complex64>, t: f64) -> Self {
        ClassicalState { a, t }
    }

    /// a = (√(mω) q + i p/√(mω))/√2 per mode.
    pub fn from_qp(q: &[f64], p: &[f64], m: f64, omega: f64, t: f64) -> Result<Self> {
        if !(m * omega > 0.0) {
            return Err(CvError::InvalidArgument("(q, p) ↔ a needs mω > 0".into()));
        }
        if q.len() != p.len() {
            return Err(CvError::InvalidArgument("q and p differ in length".into()));
        }
        let s = (m * omega).sqrt();
        let a = q
            .iter()
            .zip(p)
            .map(|(&q, &p)| Complex64::new(s * q, p / s) / std::f64::consts::SQRT_2)
            .collect();
        Ok(ClassicalState { a, t })
    }

    pub fn to_qp(&self, m: f64, omega: f64) -> (Vec<f64>, Vec<f64>) {
        let s = (m * omega).sqrt();
        let r2 = std::f64::consts::SQRT_2;
        (
            self.a.iter().map(|a| r2 * a.re / s).collect(),
            self.a.iter().map(|a| r2 * a.im * s).collect(),
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassicalKind {
    /// H = ω a*a + iΩ(a*² e^{−2iωt} − a² e^{2iωt})
    Single,
    /// H = ω Σ a_k*a_k + iΩ(a₁*a₂* e^{−2iωt} − a₁a₂ e^{2iωt})
    Double,
}

/// Coupling Ω(t): either a multiple of θ̇ or an explicit schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassicalDrive {
    ThetaRate { factor: f64 },
    Explicit { schedule: Ramp },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassicalModel {
    pub kind: ClassicalKind,
    pub omega: f64,
    pub theta: Ramp,
    pub drive: ClassicalDrive,
}

impl ClassicalModel {
    /// Single oscillator with Ω = θ̇/2.
    pub fn single(omega: f64, theta: Ramp) -> Self {
        ClassicalModel {
            kind: ClassicalKind::Single,
            omega,
            theta,
            drive: ClassicalDrive::ThetaRate { factor: 0.5 },
        }
    }

    /// Oscillator pair with Ω = θ̇.
    pub fn double(omega: f64, theta: Ramp) -> Self {
        ClassicalModel {
            kind: ClassicalKind::Double,
            omega,
            theta,
            drive: ClassicalDrive::ThetaRate { factor: 1.0 },
        }
    }

    pub fn with_drive(mut self, drive: ClassicalDrive) -> Self {
        self.drive = drive;
        self
    }

    pub fn modes(&self) -> usize {
        match self.kind {
            ClassicalKind::Single => 1,
            ClassicalKind::Double => 2,
        }
    }

    pub fn coupling(&self, t: f64) -> f64 {
        match &self.drive {
            ClassicalDrive::ThetaRate { factor } => factor * self.theta.deriv(t),
            ClassicalDrive::Explicit { schedule } => schedule.value(t),
        }
    }

    /// max over `times` of |Ω − θ̇/2| (single) or |Ω − θ̇| (double).
    pub fn constraint_defect(&self, times: &[f64]) -> f64 {
        let want = match self.kind {
            ClassicalKind::Single => 0.5,
            ClassicalKind::Double => 1.0,
        };
        times
            .iter()
            .map(|&t| (self.coupling(t) - want * self.theta.deriv(t)).abs())
            .fold(0.0, f64::max)
    }

    /// Kinetic and potential control factors (λ, χ) = 1 ∓ 2Ω sin(2ωt)/ω of the
    /// single-oscillator (q, p) Hamiltonian.
    pub fn lambda_chi(&self, t: f64) -> (f64, f64) {
        let x = 2.0 * self.coupling(t) * (2.0 * self.omega * t).sin() / self.omega;
        (1.0 - x, 1.0 + x)
    }

    fn rhs(&self, t: f64, a: &[Complex64], out: &mut [Complex64]) {
        let big = self.coupling(t);
        let rot = Complex64::from_polar(1.0, -2.0 * self.omega * t);
        match self.kind {
            ClassicalKind::Single => {
                out[0] = -I * (self.omega * a[0] + 2.0 * I * big * a[0].conj() * rot);
            }
            ClassicalKind::Double => {
                out[0] = -I * (self.omega * a[0] + I * big * a[1].conj() * rot);
                out[1] = -I * (self.omega * a[1] + I * big * a[0].conj() * rot);
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct ClassicalTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<Complex64>>,
}

/// RK4 integration of i da_k/dt = ∂H/∂a_k*.
pub fn integrate_hamilton(
    model: &ClassicalModel,
    state0: &ClassicalState,
    grid: &TimeGrid,
) -> Result<ClassicalTrajectory> {
    let n = model.modes();
    if state0.a.len() != n {
        return Err(CvError::InvalidArgument(format!(
            "model has {n} modes, state has {}",
            state0.a.len()
        )));
    }
    let zero = Complex64::new(0.0, 0.0);
    let mut a = state0.a.clone();
    let (mut k1, mut k2, mut k3, mut k4) = (vec![zero; n], vec![zero; n], vec![zero; n], vec![zero; n]);
    let mut tmp = vec![zero; n];
    let mut traj = ClassicalTrajectory {
        times: Vec::with_capacity(grid.steps + 1),
        states: Vec::with_capacity(grid.steps + 1),
    };
    traj.times.push(grid.t0);
    traj.states.push(a.clone());
    for i in 0..grid.steps {
        let t = grid.time(i);
        let h = grid.time(i + 1) - t;
        model.rhs(t, &a, &mut k1);
        for j in 0..n {
            tmp[j] = a[j] + 0.5 * h * k1[j];
        }
        model.rhs(t + 0.5 * h, &tmp, &mut k2);
        for j in 0..n {
            tmp[j] = a[j] + 0.5 * h * k2[j];
        }
        model.rhs(t + 0.5 * h, &tmp, &mut k3);
        for j in 0..n {
            tmp[j] = a[j] + h * k3[j];
        }
        model.rhs(t + h, &tmp, &mut k4);
        for j in 0..n {
            a[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        traj.times.push(grid.time(i + 1));
        traj.states.push(a.clone());
    }
    Ok(traj)
}

/// Ancillary canonical variables at time t: b_k = −a_k e^{iωt}, then
/// u = cosh θ b − sinh θ b* (single) or u₁ = cosh θ b₁ − sinh θ b₂*,
/// u₂ = cosh θ b₂ − sinh θ b₁* (double).
pub fn invariant_u(model: &ClassicalModel, state: &ClassicalState) -> Vec<Complex64> {
    let th = model.theta.value(state.t);
    let (c, s) = (th.cosh(), th.sinh());
    let rot = Complex64::from_polar(1.0, model.omega * state.t);
    let b: Vec<Complex64> = state.a.iter().map(|a| -a * rot).collect();
    match model.kind {
        ClassicalKind::Single => vec![c * b[0] - s * b[0].conj()],
        ClassicalKind::Double => vec![c * b[0] - s * b[1].conj(), c * b[1] - s * b[0].conj()],
    }
}

/// max_t ‖u(t) − u(0)‖ / ‖u(0)‖ along a trajectory.
pub fn invariant_drift(model: &ClassicalModel, traj: &ClassicalTrajectory) -> Result<f64> {
    let series = invariant_series(model, traj);
    let u0 = &series[0];
    let n0 = u0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if n0 == 0.0 {
        return Err(CvError::ZeroNorm);
    }
    Ok(series
        .iter()
        .map(|u| u.iter().zip(u0).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt() / n0)
        .fold(0.0, f64::max))
}

fn invariant_series(model: &ClassicalModel, traj: &ClassicalTrajectory) -> Vec<Vec<Complex64>> {
    traj.times
        .iter()
        .zip(&traj.states)
        .map(|(&t, a)| invariant_u(model, &ClassicalState::new(a.clone(), t)))
        .collect()
}

/// Largest deviation of the (q, p) Poisson brackets of the u_k from
/// {u_j, u_k*} = −iδ_jk and {u_j, u_k} = 0, using a central-difference
/// Jacobian at the given state (m = 1).
pub fn poisson_bracket_defect(model: &ClassicalModel, state: &ClassicalState) -> f64 {
    let n = model.modes();
    let (q0, p0) = state.to_qp(1.0, model.omega);
    let u_at = |q: &[f64], p: &[f64]| {
        let s = ClassicalState::from_qp(q, p, 1.0, model.omega, state.t).expect("positive frequency");
        invariant_u(model, &s)
    };
    let h = 1e-4 * (1.0 + q0.iter().chain(&p0).fold(0.0f64, |m, x| m.max(x.abs())));
    // jac[k][j] = (∂u_k/∂q_j, ∂u_k/∂p_j)
    let mut jac = vec![vec![(Complex64::default(), Complex64::default()); n]; n];
    for j in 0..n {
        let (mut qp, mut qm) = (q0.clone(), q0.clone());
        qp[j] += h;
        qm[j] -= h;
        let (up, um) = (u_at(&qp, &p0), u_at(&qm, &p0));
        for k in 0..n {
            jac[k][j].0 = (up[k] - um[k]) / (2.0 * h);
        }
        let (mut pp, mut pm) = (p0.clone(), p0.clone());
        pp[j] += h;
        pm[j] -= h;
        let (up, um) = (u_at(&q0, &pp), u_at(&q0, &pm));
        for k in 0..n {
            jac[k][j].1 = (up[k] - um[k]) / (2.0 * h);
        }
    }
    let bracket = |x: &[(Complex64, Complex64)], y: &[(Complex64, Complex64)]| -> Complex64 {
        (0..n).map(|j| x[j].0 * y[j].1 - x[j].1 * y[j].0).sum()
    };
    let conj = |row: &[(Complex64, Complex64)]| -> Vec<(Complex64, Complex64)> {
        row.iter().map(|(a, b)| (a.conj(), b.conj())).collect()
    };
    let mut worst: f64 = 0.0;
    for j in 0..n {
        for k in 0..n {
            let want = if j == k { -I } else { Complex64::default() };
            worst = worst.max((bracket(&jac[j], &conj(&jac[k])) - want).norm());
            worst = worst.max(bracket(&jac[j], &jac[k]).norm());
        }
    }
    worst
}

/// Phase-space CSV: t, re/im a_k, re/im u_k, drift (plus λ, χ for a single
/// oscillator).
pub fn write_phase_space_csv<W: Write>(
    model: &ClassicalModel,
    traj: &ClassicalTrajectory,
    mut w: W,
) -> Result<()> {
    let n = model.modes();
    let mut header = vec!["t".to_string()];
    for k in 1..=n {
        header.push(format!("re_a_{k}"));
        header.push(format!("im_a_{k}"));
    }
    for k in 1..=n {
        header.push(format!("re_u_{k}"));
        header.push(format!("im_u_{k}"));
    }
    header.push("drift".into());
    if model.kind == ClassicalKind::Single {
        header.push("lambda".into());
        header.push("chi".into());
    }
    writeln!(w, "{}", header.join(","))?;
    let series = invariant_series(model, traj);
    let u0 = &series[0];
    let n0 = u0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    for ((t, a), u) in traj.times.iter().zip(&traj.states).zip(&series) {
        let mut row = vec![*t];
        for z in a {
            row.extend([z.re, z.im]);
        }
        for z in u {
            row.extend([z.re, z.im]);
        }
        row.push(u.iter().zip(u0).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt() / n0);
        if model.kind == ClassicalKind::Single {
            let (l, c) = model.lambda_chi(*t);
            row.extend([l, c]);
        }
        let cells: Vec<String> = row.into_iter().map(fmt_f64).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    Ok(())
}

/// Scale-invariant trap steered along (β(t), η(t)).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleInvariant {
    pub m: f64,
    pub beta: Ramp,
    pub eta: Ramp,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FastForward {
    /// Generating function F₂(q, t).
    pub f2: f64,
    /// ∂_t F₂ at fixed q.
    pub f2_t: f64,
    /// Velocity field v = ∂_q F₂ / m.
    pub v: f64,
    /// Acceleration field.
    pub acc: f64,
    /// Potential U(q, t).
    pub potential: f64,
}

/// F₂ = m(η̇/2η)(q−β)² + mβ̇(q−β) + (m/2)∫₀ᵗ β̇², v = (η̇/η)(q−β) + β̇,
/// acc = (η̈/η)(q−β) + β̈, U = −(m/2)(η̈/η)(q−β)² − mβ̈(q−β).
pub fn fast_forward(ff: &ScaleInvariant, q: f64, t: f64) -> Result<FastForward> {
    let eta = ff.eta.value(t);
    if !(eta > 0.0) {
        return Err(CvError::InvalidArgument(format!("η({t}) = {eta} must be positive")));
    }
    let (ed, edd) = (ff.eta.deriv(t), ff.eta.second_deriv(t));
    let (beta, bd, bdd) = (ff.beta.value(t), ff.beta.deriv(t), ff.beta.second_deriv(t));
    let m = ff.m;
    let x = q - beta;
    let kin = quad::integrate(|s| ff.beta.deriv(s).powi(2), 0.0, t, &[], 1e-14)?;
    let f2 = m * ed / (2.0 * eta) * x * x + m * bd * x + 0.5 * m * kin;
    let f2_t = 0.5 * m * (edd / eta - (ed / eta).powi(2)) * x * x - m * (ed / eta) * x * bd + m * bdd * x
        - m * bd * bd
        + 0.5 * m * bd * bd;
    Ok(FastForward {
        f2,
        f2_t,
        v: ed / eta * x + bd,
        acc: edd / eta * x + bdd,
        potential: -0.5 * m * edd / eta * x * x - m * bdd * x,
    })
}

/// ∂_tF₂ + (∂_qF₂)²/2m + U at (q, t).
pub fn hamilton_jacobi_residual(ff: &ScaleInvariant, q: f64, t: f64) -> Result<f64> {
    let r = fast_forward(ff, q, t)?;
    let p = ff.m * r.v;
    Ok(r.f2_t + p * p / (2.0 * ff.m) + r.potential)
}

/// Largest gaps |Ω_quantum − θ̇/2| and |g − θ̇| between the quantum drive rules
/// at γ = 0, α = 0, φ = −π/2 and the classical constraints.
pub fn correspondence_defect(theta: &Ramp, times: &[f64]) -> Result<(f64, f64)> {
    let tau = times.iter().copied().fold(f64::MIN_POSITIVE, f64::max);
    let mut single = SingleModeProtocol::standard(tau);
    single.phi = -FRAC_PI_2;
    single.theta = theta.clone();
    let mut two = TwoModeProtocol::standard(tau);
    two.phi = -FRAC_PI_2;
    two.theta = theta.clone();
    let (mut d1, mut d2) = (0.0f64, 0.0f64);
    for &t in times {
        let (big, _) = drive_single(&single, 0.0, t)?;
        d1 = d1.max((big - theta.deriv(t) / 2.0).abs());
        let (g, _, _) = couple_two(&two, 0.0, 0.0, t)?;
        d2 = d2.max((g - theta.deriv(t)).abs());
    }
    Ok((d1, d2))
}
