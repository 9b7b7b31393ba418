//! Vector kernels with a data-parallel path and a sequential fallback.
//!
//! Reductions are computed over fixed-size chunks whose partial sums are
//! combined in index order, so results are bitwise identical whether or not
//! the `parallel` feature is enabled and regardless of the worker count.

use num_complex::Complex64;

/// Chunk length used for reductions and for deciding when to go parallel.
pub const CHUNK: usize = 4096;

fn dot_chunk(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        acc += x.conj() * y;
    }
    acc
}

fn norm_sqr_chunk(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

/// ⟨a|b⟩ (conjugate-linear in `a`), sequential.
pub fn dot_seq(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.chunks(CHUNK)
        .zip(b.chunks(CHUNK))
        .map(|(x, y)| dot_chunk(x, y))
        .fold(Complex64::new(0.0, 0.0), |s, p| s + p)
}

#[cfg(feature = "parallel")]
pub fn dot_par(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    use rayon::prelude::*;
    let parts: Vec<Complex64> = a
        .par_chunks(CHUNK)
        .zip(b.par_chunks(CHUNK))
        .map(|(x, y)| dot_chunk(x, y))
        .collect();
    parts.into_iter().fold(Complex64::new(0.0, 0.0), |s, p| s + p)
}

pub fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    assert_eq!(a.len(), b.len());
    #[cfg(feature = "parallel")]
    if a.len() > 4 * CHUNK {
        return dot_par(a, b);
    }
    dot_seq(a, b)
}

pub fn norm_sqr_seq(a: &[Complex64]) -> f64 {
    a.chunks(CHUNK).map(norm_sqr_chunk).fold(0.0, |s, p| s + p)
}

#[cfg(feature = "parallel")]
pub fn norm_sqr_par(a: &[Complex64]) -> f64 {
    use rayon::prelude::*;
    let parts: Vec<f64> = a.par_chunks(CHUNK).map(norm_sqr_chunk).collect();
    parts.into_iter().fold(0.0, |s, p| s + p)
}

pub fn norm_sqr(a: &[Complex64]) -> f64 {
    #[cfg(feature = "parallel")]
    if a.len() > 4 * CHUNK {
        return norm_sqr_par(a);
    }
    norm_sqr_seq(a)
}

pub fn norm(a: &[Complex64]) -> f64 {
    norm_sqr(a).sqrt()
}

/// y += s·x
pub fn axpy(s: Complex64, x: &[Complex64], y: &mut [Complex64]) {
    assert_eq!(x.len(), y.len());
    #[cfg(feature = "parallel")]
    if x.len() > 4 * CHUNK {
        use rayon::prelude::*;
        y.par_chunks_mut(CHUNK)
            .zip(x.par_chunks(CHUNK))
            .for_each(|(yc, xc)| {
                for (yi, xi) in yc.iter_mut().zip(xc) {
                    *yi += s * xi;
                }
            });
        return;
    }
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += s * xi;
    }
}

pub fn scale(s: Complex64, x: &mut [Complex64]) {
    for v in x.iter_mut() {
        *v *= s;
    }
}

/// Largest absolute value, used for cheap convergence tests.
pub fn max_abs(a: &[Complex64]) -> f64 {
    a.iter().fold(0.0_f64, |m, z| m.max(z.norm()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(n: usize) -> Vec<Complex64> {
        (0..n)
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect()
    }

    #[test]
    fn dot_matches_naive_sum() {
        let a = ramp(10_000);
        let b = ramp(10_000);
        let naive: f64 = a.iter().map(|z| z.norm_sqr()).sum();
        assert!((dot(&a, &b).re - naive).abs() < 1e-9 * naive);
        assert!(dot(&a, &b).im.abs() < 1e-9);
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn parallel_reductions_are_bitwise_identical() {
        let a = ramp(100_003);
        let b: Vec<_> = a.iter().rev().cloned().collect();
        assert_eq!(dot_seq(&a, &b), dot_par(&a, &b));
        assert_eq!(norm_sqr_seq(&a), norm_sqr_par(&a));
    }
}
