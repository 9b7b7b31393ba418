//! Action of a matrix exponential on a vector, exp(s·A)x, by a scaled and
//! truncated Taylor series.
//!
//! The step count is chosen so that each sub-step has ‖s·A/m‖ ≤ `SUBSTEP_NORM`
//! in the bound returned by [`LinearOperator::norm_bound`]; within a sub-step the
//! series is summed until two consecutive terms fall below the tolerance.

use num_complex::Complex64;

use crate::error::{CvError, Result};
use crate::kernels;
use crate::sparse::CsrMatrix;

pub const DEFAULT_TOL: f64 = 1e-12;
const SUBSTEP_NORM: f64 = 2.0;
const MAX_TERMS: usize = 80;

pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[Complex64], y: &mut [Complex64]);
    /// Upper bound on the spectral norm.
    fn norm_bound(&self) -> f64;
}

impl CsrMatrix {
    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.nrows())
            .map(|r| self.row(r).map(|(_, v)| v.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

impl LinearOperator for CsrMatrix {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        self.matvec(x, y)
    }

    fn norm_bound(&self) -> f64 {
        // ‖A‖₂ ≤ √(‖A‖₁‖A‖∞) ≤ max of the two
        self.norm_one().max(self.norm_inf())
    }
}

/// Σ c_j A_j applied term by term, without assembling the sum.
pub struct LinearCombination<'a> {
    terms: Vec<(Complex64, &'a CsrMatrix)>,
    norms: Vec<f64>,
    dim: usize,
}

impl<'a> LinearCombination<'a> {
    /// `norms[j]` must bound ‖A_j‖₂; callers cache them because the operators
    /// are fixed while the coefficients change every step.
    pub fn new(terms: Vec<(Complex64, &'a CsrMatrix)>, norms: Vec<f64>) -> Self {
        assert_eq!(terms.len(), norms.len());
        let dim = terms.first().map(|t| t.1.nrows()).unwrap_or(0);
        LinearCombination { terms, norms, dim }
    }
}

impl LinearOperator for LinearCombination<'_> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        y.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        let mut tmp = vec![Complex64::new(0.0, 0.0); self.dim];
        for (c, m) in &self.terms {
            if *c == Complex64::new(0.0, 0.0) {
                continue;
            }
            m.matvec(x, &mut tmp);
            kernels::axpy(*c, &tmp, y);
        }
    }

    fn norm_bound(&self) -> f64 {
        self.terms
            .iter()
            .zip(&self.norms)
            .map(|((c, _), n)| c.norm() * n)
            .sum()
    }
}

/// exp(s·A)x to relative tolerance `tol`.
pub fn expm_multiply(
    a: &dyn LinearOperator,
    s: Complex64,
    x: &[Complex64],
    tol: f64,
) -> Result<Vec<Complex64>> {
    let n = a.dim();
    if x.len() != n {
        return Err(CvError::SpaceMismatch);
    }
    let total = s.norm() * a.norm_bound();
    if !total.is_finite() {
        return Err(CvError::NonConvergence("operator norm is not finite".into()));
    }
    if total == 0.0 {
        return Ok(x.to_vec());
    }
    let steps = (total / SUBSTEP_NORM).ceil().max(1.0) as usize;
    let h = s / steps as f64;

    let mut out = x.to_vec();
    let mut term = vec![Complex64::new(0.0, 0.0); n];
    let mut next = vec![Complex64::new(0.0, 0.0); n];
    for _ in 0..steps {
        term.copy_from_slice(&out);
        let mut small = 0;
        let mut converged = false;
        for k in 1..=MAX_TERMS {
            a.apply(&term, &mut next);
            let c = h / k as f64;
            for v in next.iter_mut() {
                *v *= c;
            }
            std::mem::swap(&mut term, &mut next);
            kernels::axpy(Complex64::new(1.0, 0.0), &term, &mut out);
            let tn = kernels::norm(&term);
            let on = kernels::norm(&out);
            if tn <= tol * on || tn == 0.0 {
                small += 1;
                if small == 2 {
                    converged = true;
                    break;
                }
            } else {
                small = 0;
            }
        }
        if !converged {
            return Err(CvError::NonConvergence(format!(
                "Taylor series did not reach {tol:e} within {MAX_TERMS} terms"
            )));
        }
    }
    Ok(out)
}
