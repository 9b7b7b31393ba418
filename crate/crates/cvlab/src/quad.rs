//! Adaptive Gauss–Kronrod (7/15) quadrature.

#![allow(clippy::excessive_precision)]

use crate::error::{CvError, Result};

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

const MAX_DEPTH: u32 = 40;
/// Relative floor on the requested tolerance, against ∫|f| over the range.
const REL_TOL: f64 = 1e-12;

/// (Kronrod estimate, |Kronrod − Gauss|, Kronrod estimate of ∫|f|).
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    let mut abs = fc.abs() * WGK[7];
    for j in 0..7 {
        let x = h * XGK[j];
        let (lo, hi) = (f(c - x), f(c + x));
        kronrod += WGK[j] * (lo + hi);
        abs += WGK[j] * (lo.abs() + hi.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (lo + hi);
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs(), abs * h.abs())
}

fn adapt<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> Result<f64> {
    let (val, err, abs) = gk15(f, a, b);
    if !val.is_finite() {
        return Err(CvError::NonConvergence(format!("non-finite integrand on [{a}, {b}]")));
    }
    // below 50ε∫|f| the error estimate is round-off
    if err <= tol.max(50.0 * f64::EPSILON * abs) || (b - a).abs() < 1e-15 * (1.0 + a.abs()) {
        return Ok(val);
    }
    if depth >= MAX_DEPTH {
        return Err(CvError::NonConvergence(format!(
            "quadrature error {err:.3e} above {tol:.3e} on [{a}, {b}]"
        )));
    }
    let m = 0.5 * (a + b);
    Ok(adapt(f, a, m, tol / 2.0, depth + 1)? + adapt(f, m, b, tol / 2.0, depth + 1)?)
}

/// ∫_a^b f to absolute tolerance `tol` (floored at 1e-12·∫|f|), splitting at
/// the given interior points (discontinuities of the integrand).
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, breaks: &[f64], tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mut pts = vec![lo];
    pts.extend(breaks.iter().copied().filter(|&x| x > lo && x < hi));
    pts.push(hi);
    pts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let pieces = (pts.len() - 1) as f64;
    let magnitude: f64 = pts.windows(2).map(|w| gk15(&f, w[0], w[1]).2).sum();
    let tol = tol.max(REL_TOL * magnitude);
    let mut total = 0.0;
    for w in pts.windows(2) {
        total += adapt(&f, w[0], w[1], tol / pieces, 0)?;
    }
    Ok(sign * total)
}
