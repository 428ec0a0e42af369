//! Derivative-free scalar solvers shared by the threshold, companion-point and
//! candidate-price computations.
//!
//! Every defining equation in this crate is monotone (or at least sign-changing)
//! on a known bracket, so plain bisection run to floating-point resolution is
//! enough and never needs a derivative.

use crate::error::{PricingError, Result};

const MAX_BISECT: usize = 400;
const MAX_DOUBLINGS: usize = 1100;

/// Bisects `f` on `[lo, hi]`, which must bracket a sign change.
///
/// Iterates until the bracket collapses to adjacent floats (or `abs_tol`),
/// returning the midpoint.
pub fn bisect<F>(mut f: F, lo: f64, hi: f64, abs_tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    let (mut a, mut b) = (lo, hi);
    let fa = f(a);
    let fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.is_nan() || fb.is_nan() || (fa > 0.0) == (fb > 0.0) {
        return Err(PricingError::NoConvergence(format!("no sign change on [{lo}, {hi}] (f = {fa}, {fb})")));
    }
    let neg_at_a = fa < 0.0;
    for _ in 0..MAX_BISECT {
        let m = 0.5 * (a + b);
        if m <= a || m >= b || (b - a) <= abs_tol {
            break;
        }
        let fm = f(m);
        if fm == 0.0 {
            return Ok(m);
        }
        if (fm < 0.0) == neg_at_a {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

/// Doubles the distance `hi - lo` until `f(hi) > 0`, given `f(lo) <= 0`.
pub fn expand_upper<F>(mut f: F, lo: f64, first_hi: f64) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    let mut hi = first_hi;
    for _ in 0..MAX_DOUBLINGS {
        if !hi.is_finite() {
            break;
        }
        if f(hi) > 0.0 {
            return Ok(hi);
        }
        hi = lo + 2.0 * (hi - lo);
    }
    Err(PricingError::NoConvergence(format!("bracket expansion from {lo} overflowed")))
}

/// Evaluates `f` on `n` equispaced points of `[lo, hi]` (both ends included).
pub fn scan<F>(mut f: F, lo: f64, hi: f64, n: usize) -> Vec<(f64, f64)>
where
    F: FnMut(f64) -> f64,
{
    let n = n.max(2);
    (0..n)
        .map(|i| {
            let x = if i + 1 == n { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 };
            (x, f(x))
        })
        .collect()
}

/// Which root to select when a scan finds several sign changes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pick {
    LeftMost,
    RightMost,
}

/// Locates a root of `f` on `[lo, hi]` by scanning `n` points for sign
/// changes and refining the selected one by bisection. Returns `None` when the
/// scan sees no sign change.
pub fn scan_root<F>(mut f: F, lo: f64, hi: f64, n: usize, pick: Pick) -> Result<Option<f64>>
where
    F: FnMut(f64) -> f64,
{
    let table = scan(&mut f, lo, hi, n);
    let mut changes = table
        .windows(2)
        .filter(|w| w[0].1.is_finite() && w[1].1.is_finite())
        .filter(|w| (w[0].1 < 0.0) != (w[1].1 < 0.0));
    let window = match pick {
        Pick::LeftMost => changes.next(),
        Pick::RightMost => changes.next_back(),
    };
    match window {
        None => Ok(None),
        Some(w) => bisect(f, w[0].0, w[1].0, 0.0).map(Some),
    }
}

/// Golden-section maximization of a unimodal `f` on `[lo, hi]`.
pub fn golden_max<F>(mut f: F, lo: f64, hi: f64, tol: f64) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a) > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
        if b - a <= f64::EPSILON * b.abs().max(1.0) {
            break;
        }
    }
    let candidates = [(a, f(a)), (c, fc), (d, fd), (b, f(b))];
    candidates.into_iter().fold((lo, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best })
}
