//! Truncated multimode Fock spaces, state vectors and sparse bosonic operators.
//!
//! Basis states |n_1, …, n_N⟩ are stored row-major over the modes in
//! declaration order: the flat index is Σ_k n_k · stride_k with the last mode
//! varying fastest.

use std::io::Write;

use log::warn;
use num_complex::Complex64;

use crate::error::{CvError, Result};
use crate::expm::{self, LinearOperator};
use crate::kernels;
use crate::sparse::CsrMatrix;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Tail population above which `squeezed_vacuum` refuses to build a state.
pub const TAIL_MASS_LIMIT: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FockSpace {
    mode_dims: Vec<usize>,
    strides: Vec<usize>,
    total_dim: usize,
}

impl FockSpace {
    pub fn new(mode_dims: &[usize]) -> Result<Self> {
        if mode_dims.is_empty() {
            return Err(CvError::InvalidSpace("no modes".into()));
        }
        if let Some(d) = mode_dims.iter().find(|&&d| d < 2) {
            return Err(CvError::InvalidSpace(format!("mode dimension {d} < 2")));
        }
        let mut strides = vec![1; mode_dims.len()];
        for k in (0..mode_dims.len() - 1).rev() {
            strides[k] = strides[k + 1] * mode_dims[k + 1];
        }
        let total_dim = mode_dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| CvError::InvalidSpace("dimension overflow".into()))?;
        Ok(FockSpace {
            mode_dims: mode_dims.to_vec(),
            strides,
            total_dim,
        })
    }

    pub fn single(dim: usize) -> Result<Self> {
        Self::new(&[dim])
    }

    pub fn modes(&self) -> usize {
        self.mode_dims.len()
    }

    pub fn mode_dims(&self) -> &[usize] {
        &self.mode_dims
    }

    pub fn dim(&self, mode: usize) -> usize {
        self.mode_dims[mode]
    }

    pub fn total_dim(&self) -> usize {
        self.total_dim
    }

    pub fn stride(&self, mode: usize) -> usize {
        self.strides[mode]
    }

    pub fn check_mode(&self, mode: usize) -> Result<()> {
        if mode < self.modes() {
            Ok(())
        } else {
            Err(CvError::InvalidMode {
                index: mode,
                modes: self.modes(),
            })
        }
    }

    pub fn flat_index(&self, occupations: &[usize]) -> Result<usize> {
        if occupations.len() != self.modes() {
            return Err(CvError::InvalidArgument(format!(
                "expected {} occupations, got {}",
                self.modes(),
                occupations.len()
            )));
        }
        let mut idx = 0;
        for (k, &n) in occupations.iter().enumerate() {
            if n >= self.mode_dims[k] {
                return Err(CvError::InvalidArgument(format!(
                    "occupation {n} exceeds truncation of mode {k}"
                )));
            }
            idx += n * self.strides[k];
        }
        Ok(idx)
    }

    pub fn occupations(&self, flat: usize) -> Vec<usize> {
        (0..self.modes())
            .map(|k| (flat / self.strides[k]) % self.mode_dims[k])
            .collect()
    }

    /// Occupation of a single mode for a flat index.
    pub fn occupation(&self, flat: usize, mode: usize) -> usize {
        (flat / self.strides[mode]) % self.mode_dims[mode]
    }

    /// Default truncation margin max(2, dim/4), taken over the smallest mode.
    pub fn default_margin(&self) -> usize {
        let d = *self.mode_dims.iter().min().unwrap();
        (d / 4).max(2)
    }

    /// Basis states with every occupation n_k ≤ dim_k − margin.
    pub fn interior_mask(&self, margin: usize) -> Vec<bool> {
        (0..self.total_dim)
            .map(|i| {
                (0..self.modes()).all(|k| self.occupation(i, k) + margin <= self.mode_dims[k])
            })
            .collect()
    }

    /// Basis states with at least one mode in its top `margin` levels.
    pub fn edge_mask(&self, margin: usize) -> Vec<bool> {
        (0..self.total_dim)
            .map(|i| {
                (0..self.modes()).any(|k| self.occupation(i, k) + margin >= self.mode_dims[k])
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    space: FockSpace,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    pub fn new(space: &FockSpace, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != space.total_dim() {
            return Err(CvError::InvalidArgument(format!(
                "amplitude vector has length {}, space has dimension {}",
                amplitudes.len(),
                space.total_dim()
            )));
        }
        Ok(StateVector {
            space: space.clone(),
            amplitudes,
        })
    }

    pub fn zeros(space: &FockSpace) -> Self {
        StateVector {
            space: space.clone(),
            amplitudes: vec![ZERO; space.total_dim()],
        }
    }

    pub fn vacuum(space: &FockSpace) -> Self {
        let mut s = Self::zeros(space);
        s.amplitudes[0] = ONE;
        s
    }

    pub fn basis(space: &FockSpace, occupations: &[usize]) -> Result<Self> {
        let mut s = Self::zeros(space);
        let i = space.flat_index(occupations)?;
        s.amplitudes[i] = ONE;
        Ok(s)
    }

    /// Product of truncated coherent states, one amplitude per mode.
    pub fn coherent(space: &FockSpace, alphas: &[Complex64]) -> Result<Self> {
        if alphas.len() != space.modes() {
            return Err(CvError::InvalidArgument("one amplitude per mode required".into()));
        }
        let factors: Vec<Vec<Complex64>> = alphas
            .iter()
            .enumerate()
            .map(|(k, &a)| {
                let mut c = Vec::with_capacity(space.dim(k));
                let mut v = Complex64::new((-a.norm_sqr() / 2.0).exp(), 0.0);
                for n in 0..space.dim(k) {
                    c.push(v);
                    v = v * a / ((n + 1) as f64).sqrt();
                }
                c
            })
            .collect();
        let amps = (0..space.total_dim())
            .map(|i| {
                (0..space.modes())
                    .map(|k| factors[k][space.occupation(i, k)])
                    .product()
            })
            .collect();
        StateVector::new(space, amps)
    }

    pub fn space(&self) -> &FockSpace {
        &self.space
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    pub fn amplitude(&self, occupations: &[usize]) -> Result<Complex64> {
        Ok(self.amplitudes[self.space.flat_index(occupations)?])
    }

    pub fn norm(&self) -> f64 {
        kernels::norm(&self.amplitudes)
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(CvError::ZeroNorm);
        }
        let mut out = self.clone();
        kernels::scale(Complex64::new(1.0 / n, 0.0), &mut out.amplitudes);
        Ok(out)
    }

    /// ⟨self|other⟩
    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        if self.space != other.space {
            return Err(CvError::SpaceMismatch);
        }
        Ok(kernels::dot(&self.amplitudes, &other.amplitudes))
    }

    pub fn scaled(&self, s: Complex64) -> Self {
        let mut out = self.clone();
        kernels::scale(s, &mut out.amplitudes);
        out
    }

    /// Population in basis states where `mask` is true.
    pub fn masked_population(&self, mask: &[bool]) -> f64 {
        self.amplitudes
            .iter()
            .zip(mask)
            .filter(|(_, &m)| m)
            .map(|(a, _)| a.norm_sqr())
            .sum()
    }

    /// Fraction of the population in the top `margin` levels of any mode.
    pub fn leakage(&self, margin: usize) -> f64 {
        let total = kernels::norm_sqr(&self.amplitudes);
        if total == 0.0 {
            return 0.0;
        }
        self.masked_population(&self.space.edge_mask(margin)) / total
    }

    /// Mean occupation of each mode, normalized by the state norm.
    pub fn mean_photons(&self) -> Vec<f64> {
        let total = kernels::norm_sqr(&self.amplitudes);
        (0..self.space.modes())
            .map(|k| {
                let s: f64 = self
                    .amplitudes
                    .iter()
                    .enumerate()
                    .map(|(i, a)| a.norm_sqr() * self.space.occupation(i, k) as f64)
                    .sum();
                if total > 0.0 {
                    s / total
                } else {
                    0.0
                }
            })
            .collect()
    }

    /// Writes `flat_index, n_1, …, n_N, re, im`, skipping amplitudes below 1e-300.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        write!(w, "flat_index")?;
        for k in 1..=self.space.modes() {
            write!(w, ",n_{k}")?;
        }
        writeln!(w, ",re,im")?;
        for (i, a) in self.amplitudes.iter().enumerate() {
            if a.norm() < 1e-300 {
                continue;
            }
            write!(w, "{i}")?;
            for n in self.space.occupations(i) {
                write!(w, ",{n}")?;
            }
            writeln!(w, ",{},{}", crate::fmt_f64(a.re), crate::fmt_f64(a.im))?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LadderKind {
    Lower,
    Raise,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BosonOperator {
    space: FockSpace,
    matrix: CsrMatrix,
}

impl BosonOperator {
    pub fn from_matrix(space: &FockSpace, matrix: CsrMatrix) -> Result<Self> {
        if matrix.nrows() != space.total_dim() || matrix.ncols() != space.total_dim() {
            return Err(CvError::InvalidArgument("matrix does not match space".into()));
        }
        Ok(BosonOperator {
            space: space.clone(),
            matrix,
        })
    }

    pub fn zero(space: &FockSpace) -> Self {
        BosonOperator {
            space: space.clone(),
            matrix: CsrMatrix::zeros(space.total_dim(), space.total_dim()),
        }
    }

    pub fn identity(space: &FockSpace) -> Self {
        BosonOperator {
            space: space.clone(),
            matrix: CsrMatrix::identity(space.total_dim()),
        }
    }

    pub fn space(&self) -> &FockSpace {
        &self.space
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CsrMatrix {
        self.matrix
    }

    fn check(&self, other: &Self) -> Result<()> {
        if self.space == other.space {
            Ok(())
        } else {
            Err(CvError::SpaceMismatch)
        }
    }

    pub fn adjoint(&self) -> Self {
        BosonOperator {
            space: self.space.clone(),
            matrix: self.matrix.adjoint(),
        }
    }

    pub fn scale(&self, s: Complex64) -> Self {
        BosonOperator {
            space: self.space.clone(),
            matrix: self.matrix.scale(s),
        }
    }

    pub fn scale_re(&self, s: f64) -> Self {
        self.scale(Complex64::new(s, 0.0))
    }

    /// self + s·other
    pub fn add_scaled(&self, other: &Self, s: Complex64) -> Result<Self> {
        self.check(other)?;
        Ok(BosonOperator {
            space: self.space.clone(),
            matrix: self.matrix.add_scaled(&other.matrix, s),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.add_scaled(other, ONE)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add_scaled(other, -ONE)
    }

    /// Operator product self·other.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        Ok(BosonOperator {
            space: self.space.clone(),
            matrix: self.matrix.matmul(&other.matrix),
        })
    }

    pub fn commutator(&self, other: &Self) -> Result<Self> {
        self.mul(other)?.sub(&other.mul(self)?)
    }

    /// ‖A − A†‖_F / max(1, ‖A‖_F)
    pub fn hermiticity_defect(&self) -> f64 {
        let d = self.matrix.add_scaled(&self.matrix.adjoint(), -ONE).frobenius();
        d / self.matrix.frobenius().max(1.0)
    }

    pub fn apply(&self, psi: &StateVector) -> Result<StateVector> {
        if self.space != psi.space {
            return Err(CvError::SpaceMismatch);
        }
        let mut out = vec![ZERO; self.space.total_dim()];
        self.matrix.matvec(&psi.amplitudes, &mut out);
        StateVector::new(&self.space, out)
    }
}

/// Annihilation (`Lower`) or creation (`Raise`) operator of one mode.
pub fn ladder(space: &FockSpace, mode: usize, kind: LadderKind) -> Result<BosonOperator> {
    space.check_mode(mode)?;
    let stride = space.stride(mode);
    let mut trip = Vec::with_capacity(space.total_dim());
    for i in 0..space.total_dim() {
        let n = space.occupation(i, mode);
        if n > 0 {
            let v = Complex64::new((n as f64).sqrt(), 0.0);
            match kind {
                LadderKind::Lower => trip.push((i - stride, i, v)),
                LadderKind::Raise => trip.push((i, i - stride, v)),
            }
        }
    }
    let n = space.total_dim();
    BosonOperator::from_matrix(space, CsrMatrix::from_triplets(n, n, trip))
}

pub fn lower(space: &FockSpace, mode: usize) -> Result<BosonOperator> {
    ladder(space, mode, LadderKind::Lower)
}

pub fn raise(space: &FockSpace, mode: usize) -> Result<BosonOperator> {
    ladder(space, mode, LadderKind::Raise)
}

/// a_k† a_k as an exact diagonal.
pub fn number(space: &FockSpace, mode: usize) -> Result<BosonOperator> {
    space.check_mode(mode)?;
    let diag: Vec<Complex64> = (0..space.total_dim())
        .map(|i| Complex64::new(space.occupation(i, mode) as f64, 0.0))
        .collect();
    BosonOperator::from_matrix(space, CsrMatrix::diagonal(&diag))
}

/// Σ_k w_k a_k + w_k* a_k†
pub fn quadrature(space: &FockSpace, weights: &[Complex64]) -> Result<BosonOperator> {
    if weights.len() != space.modes() {
        return Err(CvError::InvalidArgument(format!(
            "expected {} weights, got {}",
            space.modes(),
            weights.len()
        )));
    }
    if weights.iter().all(|w| *w == ZERO) {
        return Err(CvError::InvalidArgument("all quadrature weights are zero".into()));
    }
    let mut op = BosonOperator::zero(space);
    for (k, &w) in weights.iter().enumerate() {
        if w == ZERO {
            continue;
        }
        op = op.add_scaled(&lower(space, k)?, w)?;
        op = op.add_scaled(&raise(space, k)?, w.conj())?;
    }
    Ok(op)
}

/// Single mode: (ξ a² − ξ* a†²)/2. Two modes: ξ a_1 a_2 − ξ* a_1† a_2†.
pub fn squeeze_generator(space: &FockSpace, modes: &[usize], xi: Complex64) -> Result<BosonOperator> {
    for &m in modes {
        space.check_mode(m)?;
    }
    match modes {
        [m] => {
            let a = lower(space, *m)?;
            let a2 = a.mul(&a)?;
            let ad2 = a2.adjoint();
            a2.scale(xi * 0.5).add_scaled(&ad2, -xi.conj() * 0.5)
        }
        [m1, m2] => {
            if m1 == m2 {
                return Err(CvError::InvalidArgument(
                    "two-mode squeezing needs distinct modes".into(),
                ));
            }
            let ab = lower(space, *m1)?.mul(&lower(space, *m2)?)?;
            let abd = ab.adjoint();
            ab.scale(xi).add_scaled(&abd, -xi.conj())
        }
        _ => Err(CvError::InvalidArgument(format!(
            "squeeze generator acts on one or two modes, got {}",
            modes.len()
        ))),
    }
}

/// exp(G)ψ to relative tolerance 1e-12.
pub fn apply_exponential(g: &BosonOperator, psi: &StateVector) -> Result<StateVector> {
    apply_exponential_tol(g, psi, expm::DEFAULT_TOL)
}

pub fn apply_exponential_tol(g: &BosonOperator, psi: &StateVector, tol: f64) -> Result<StateVector> {
    if g.space != psi.space {
        return Err(CvError::SpaceMismatch);
    }
    let out = expm::expm_multiply(&g.matrix as &dyn LinearOperator, ONE, &psi.amplitudes, tol)?;
    StateVector::new(&psi.space, out)
}

/// Analytic population of a squeezed vacuum above the truncation.
///
/// Single mode: P(2n) = (2n)!/(4ⁿ n!²) tanh²ⁿr / cosh r, summed over 2n ≥ dim.
/// Two modes: P(n) = tanh²ⁿr / cosh²r, so the tail above min(dim) is tanh²ᵐr.
pub fn squeezed_tail_mass(space: &FockSpace, modes: &[usize], r: f64) -> Result<f64> {
    let t2 = r.tanh().powi(2);
    match modes {
        [m] => {
            space.check_mode(*m)?;
            let dim = space.dim(*m);
            let mut p = 1.0 / r.cosh();
            let mut kept = 0.0;
            let mut n = 0usize;
            while 2 * n < dim {
                kept += p;
                p *= (2 * n + 1) as f64 / (2 * n + 2) as f64 * t2;
                n += 1;
            }
            Ok((1.0 - kept).max(0.0))
        }
        [m1, m2] => {
            space.check_mode(*m1)?;
            space.check_mode(*m2)?;
            let m = space.dim(*m1).min(space.dim(*m2));
            Ok(t2.powi(m as i32))
        }
        _ => Err(CvError::InvalidArgument("one or two modes required".into())),
    }
}

/// exp(G(ξ = r e^{−iφ}))|0⟩ with the truncation checked analytically first.
pub fn squeezed_vacuum(space: &FockSpace, modes: &[usize], r: f64, phi: f64) -> Result<StateVector> {
    if !(r >= 0.0) {
        return Err(CvError::InvalidArgument(format!("squeezing strength {r} < 0")));
    }
    let tail = squeezed_tail_mass(space, modes, r)?;
    if tail > TAIL_MASS_LIMIT {
        return Err(CvError::TruncationTooSmall(format!(
            "r = {r}: {tail:.3e} of the population lies above the cutoff"
        )));
    }
    let mean = r.sinh().powi(2);
    if modes.iter().any(|&m| mean > space.dim(m) as f64 / 4.0) {
        warn!("mean photon number {mean:.1} exceeds a quarter of the truncation");
    }
    squeezed_target(space, modes, r, phi)
}

/// Same state as [`squeezed_vacuum`] without the truncation precondition.
/// Used for fidelity targets where the truncated state is the reference.
pub fn squeezed_target(space: &FockSpace, modes: &[usize], r: f64, phi: f64) -> Result<StateVector> {
    let xi = Complex64::from_polar(r, -phi);
    let g = squeeze_generator(space, modes, xi)?;
    apply_exponential(&g, &StateVector::vacuum(space))
}

/// The ideal squeezed vacuum S(ξ)|0⟩, ξ = r e^{−iφ}, from its closed-form Fock
/// amplitudes, projected onto the truncated basis and renormalized. Same
/// conventions as [`squeeze_generator`]. Also returns the retained weight
/// ‖P S|0⟩‖², so the overlap with the untruncated state is
/// `retained · |⟨ψ|target⟩|²`.
///
/// Unlike [`squeezed_target`], no truncated generator is exponentiated, so
/// the state is not distorted when the cutoff is close to the photon tail.
pub fn squeezed_vacuum_projected(space: &FockSpace, modes: &[usize], r: f64, phi: f64) -> Result<(StateVector, f64)> {
    for &m in modes {
        space.check_mode(m)?;
    }
    if !r.is_finite() {
        return Err(CvError::InvalidArgument(format!("squeezing parameter {r}")));
    }
    let z = -Complex64::from_polar(r.tanh(), phi);
    let mut psi = StateVector::zeros(space);
    let mut occ = vec![0; space.modes()];
    match modes {
        [m] => {
            let mut c = Complex64::new(1.0 / r.cosh().sqrt(), 0.0);
            let mut n = 0usize;
            while 2 * n < space.dim(*m) {
                occ[*m] = 2 * n;
                psi.amplitudes[space.flat_index(&occ)?] = c;
                let k = n as f64;
                c *= z * ((2.0 * k + 1.0) * (2.0 * k + 2.0)).sqrt() / (2.0 * k + 2.0);
                n += 1;
            }
        }
        [m1, m2] if m1 != m2 => {
            let mut c = Complex64::new(1.0 / r.cosh(), 0.0);
            for n in 0..space.dim(*m1).min(space.dim(*m2)) {
                occ[*m1] = n;
                occ[*m2] = n;
                psi.amplitudes[space.flat_index(&occ)?] = c;
                c *= z;
            }
        }
        _ => {
            return Err(CvError::InvalidArgument(format!(
                "squeezed vacuum on modes {modes:?}: need one mode or two distinct modes"
            )))
        }
    }
    let retained = kernels::norm_sqr(&psi.amplitudes);
    Ok((psi.normalized()?, retained))
}

/// ⟨ψ|O|ψ⟩, divided by ⟨ψ|ψ⟩ when `normalized`.
pub fn expectation(op: &BosonOperator, psi: &StateVector, normalized: bool) -> Result<Complex64> {
    let o_psi = op.apply(psi)?;
    let v = psi.inner(&o_psi)?;
    if normalized {
        let n2 = kernels::norm_sqr(&psi.amplitudes);
        if n2 == 0.0 {
            return Err(CvError::ZeroNorm);
        }
        Ok(v / n2)
    } else {
        Ok(v)
    }
}

/// ⟨O²⟩ − ⟨O⟩² with normalized moments. O must be Hermitian.
pub fn variance(op: &BosonOperator, psi: &StateVector) -> Result<f64> {
    let defect = op.hermiticity_defect();
    if defect > 1e-10 {
        return Err(CvError::NotHermitian(defect));
    }
    let n2 = kernels::norm_sqr(&psi.amplitudes);
    if n2 == 0.0 {
        return Err(CvError::ZeroNorm);
    }
    let o_psi = op.apply(psi)?;
    let mean = psi.inner(&o_psi)?.re / n2;
    let second = kernels::norm_sqr(&o_psi.amplitudes) / n2;
    Ok(second - mean * mean)
}
