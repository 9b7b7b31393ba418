//! Fidelity, quadrature squeezing and per-sample diagnostics.

use std::f64::consts::{LN_10, SQRT_2};
use std::io::Write;

use log::warn;
use num_complex::Complex64;

use crate::error::{CvError, Result};
use crate::fmt_f64;
use crate::fockspace::{self, BosonOperator, FockSpace, StateVector};

/// |⟨ψ|target⟩|², with ψ normalized first when `normalized` is set.
pub fn fidelity(psi: &StateVector, target: &StateVector, normalized: bool) -> Result<f64> {
    let tn = target.norm();
    if (tn - 1.0).abs() > 1e-8 {
        return Err(CvError::Precondition(format!("target norm {tn} is not 1")));
    }
    let overlap = psi.inner(target)?.norm_sqr();
    if normalized {
        let n2 = psi.norm().powi(2);
        if n2 == 0.0 {
            return Err(CvError::ZeroNorm);
        }
        Ok(overlap / n2)
    } else {
        Ok(overlap)
    }
}

/// Linear quadrature X = Σ_k (w_k a_k + w_k* a_k†) with its weights kept, so
/// that ⟨X²⟩ can include the a†|N−1⟩ component the truncated operator drops.
#[derive(Clone, Debug)]
pub struct Quadrature {
    op: BosonOperator,
    weights: Vec<Complex64>,
}

impl Quadrature {
    pub fn new(space: &FockSpace, weights: &[Complex64]) -> Result<Self> {
        Ok(Self {
            op: fockspace::quadrature(space, weights)?,
            weights: weights.to_vec(),
        })
    }

    pub fn operator(&self) -> &BosonOperator {
        &self.op
    }

    /// ΔX² with normalized moments, ⟨X²⟩ = ‖Xψ‖² taken in the untruncated
    /// space. The overflow of mode k is w_k* √N_k times the top-level slice,
    /// orthogonal to the space and to the other modes' overflow.
    pub fn variance(&self, psi: &StateVector) -> Result<f64> {
        let truncated = fockspace::variance(&self.op, psi)?;
        let space = psi.space();
        let n2 = psi.norm().powi(2);
        let mut overflow = 0.0;
        for (k, w) in self.weights.iter().enumerate() {
            if w.norm_sqr() == 0.0 {
                continue;
            }
            let top = space.dim(k) - 1;
            let p_top: f64 = psi
                .amplitudes()
                .iter()
                .enumerate()
                .filter(|(i, _)| space.occupation(*i, k) == top)
                .map(|(_, z)| z.norm_sqr())
                .sum();
            overflow += w.norm_sqr() * (top + 1) as f64 * p_top;
        }
        Ok(truncated + overflow / n2)
    }

    /// ΔX² from the truncated operator alone, ‖X_N ψ‖² − ⟨X⟩². It omits the
    /// top-level overflow and can fall below the ideal squeezed variance.
    pub fn truncated_variance(&self, psi: &StateVector) -> Result<f64> {
        fockspace::variance(&self.op, psi)
    }
}

fn db_of_variance(var: f64) -> f64 {
    if var <= 0.0 {
        warn!("quadrature variance {var:e} is not positive; reporting +inf dB");
        return f64::INFINITY;
    }
    -10.0 * (2.0 * var).log10()
}

/// −10 log₁₀(2 ΔX²) with normalized moments.
pub fn squeezing_level(psi: &StateVector, x: &Quadrature) -> Result<f64> {
    Ok(db_of_variance(x.variance(psi)?))
}

/// Squeezing read from the truncated operator product.
pub fn squeezing_level_truncated(psi: &StateVector, x: &Quadrature) -> Result<f64> {
    Ok(db_of_variance(x.truncated_variance(psi)?))
}

/// Squeezing of an ideal squeezed vacuum with strength r: (20/ln 10)·r dB.
pub fn squeezing_from_r(r: f64) -> f64 {
    20.0 * r / LN_10
}

/// Quadrature squeezed by S(r e^{−iα}) on one mode, (e^{−iα/2} a + h.c.)/√2,
/// or on two modes, Σ_k (e^{−iα/2} a_k + h.c.)/2. Vacuum variance is 1/2.
pub fn squeezed_quadrature(space: &FockSpace, modes: &[usize], alpha: f64) -> Result<Quadrature> {
    let scale = match modes.len() {
        1 => 1.0 / SQRT_2,
        2 => 0.5,
        n => {
            return Err(CvError::InvalidArgument(format!(
                "squeezed quadrature defined for one or two modes, got {n}"
            )))
        }
    };
    let mut w = vec![Complex64::new(0.0, 0.0); space.modes()];
    for &m in modes {
        space.check_mode(m)?;
        w[m] = Complex64::from_polar(scale, -alpha / 2.0);
    }
    Quadrature::new(space, &w)
}

/// Per-sample metrics of a trajectory.
#[derive(Clone, Debug, Default)]
pub struct MetricSeries {
    pub times: Vec<f64>,
    pub fidelity: Vec<f64>,
    pub fidelity_normalized: Vec<f64>,
    pub squeezing_db: Vec<f64>,
    pub squeezing_db_truncated: Vec<f64>,
    pub norm: Vec<f64>,
    pub mean_photons: Vec<Vec<f64>>,
}

impl MetricSeries {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, t: f64, psi: &StateVector, target: &StateVector, x: &Quadrature) -> Result<()> {
        self.times.push(t);
        self.fidelity.push(fidelity(psi, target, false)?);
        self.fidelity_normalized.push(fidelity(psi, target, true)?);
        self.squeezing_db.push(squeezing_level(psi, x)?);
        self.squeezing_db_truncated.push(squeezing_level_truncated(psi, x)?);
        self.norm.push(psi.norm());
        self.mean_photons.push(psi.mean_photons());
        Ok(())
    }

    pub fn from_states<'a, I>(samples: I, target: &StateVector, x: &Quadrature) -> Result<Self>
    where
        I: IntoIterator<Item = (f64, &'a StateVector)>,
    {
        let mut m = Self::new();
        for (t, psi) in samples {
            m.push(t, psi, target, x)?;
        }
        Ok(m)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let modes = self.mean_photons.first().map_or(0, Vec::len);
        let mut header = String::from("t,fidelity,fidelity_normalized,squeezing_db,squeezing_db_truncated,norm");
        for k in 1..=modes {
            header.push_str(&format!(",mean_n_{k}"));
        }
        writeln!(w, "{header}")?;
        for i in 0..self.len() {
            let mut row = vec![
                self.times[i],
                self.fidelity[i],
                self.fidelity_normalized[i],
                self.squeezing_db[i],
                self.squeezing_db_truncated[i],
                self.norm[i],
            ];
            row.extend(&self.mean_photons[i]);
            let cells: Vec<String> = row.into_iter().map(fmt_f64).collect();
            writeln!(w, "{}", cells.join(","))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vacuum_is_zero_db() {
        let s = FockSpace::single(10).unwrap();
        let x = squeezed_quadrature(&s, &[0], 0.0).unwrap();
        let db = squeezing_level(&StateVector::vacuum(&s), &x).unwrap();
        assert!(db.abs() < 1e-12);
    }

    #[test]
    fn db_of_strength() {
        assert_eq!(squeezing_from_r(0.0), 0.0);
        assert!((squeezing_from_r(3.0 * std::f64::consts::FRAC_PI_4) - 20.4657).abs() < 1e-3);
    }
}
