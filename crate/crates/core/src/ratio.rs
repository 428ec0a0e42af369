//! Worst-case competitive ratio and worst-case revenue of a fixed price.
//!
//! The competitive ratio at `p` decomposes as
//! `min(inf_tail / sup_tail, p / sup_cond_exp)` below the right threshold
//! and vanishes above it. Besides the general evaluator this module carries
//! closed forms for the variance and power-moment families, which serve as
//! independent cross-checks of each other.

use serde::Serialize;

use crate::ambiguity::{DispersionMode, MarketInfo};
use crate::bounds::{self, Regime};
use crate::error::{PricingError, Result};
use crate::extremal::BAND;

/// Which term of the decomposition is binding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BindingTerm {
    TailRatio,
    PriceOverCondExp,
    /// The ratio is pinned by the market itself: a point mass at the mean,
    /// or a price above the right threshold.
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatioBreakdown {
    pub p: f64,
    pub cr: f64,
    pub branch: BindingTerm,
    pub tail_ratio: f64,
    pub price_over_y: f64,
    pub regime: Regime,
}

impl RatioBreakdown {
    fn from_terms(p: f64, tail_ratio: f64, price_over_y: f64, regime: Regime) -> Self {
        // ties go to the tail ratio
        let (cr, branch) = if tail_ratio <= price_over_y {
            (tail_ratio, BindingTerm::TailRatio)
        } else {
            (price_over_y, BindingTerm::PriceOverCondExp)
        };
        RatioBreakdown { p, cr: cr.clamp(0.0, 1.0), branch, tail_ratio, price_over_y, regime }
    }

    fn zero(p: f64, price_over_y: f64, regime: Regime) -> Self {
        RatioBreakdown { p, cr: 0.0, branch: BindingTerm::Degenerate, tail_ratio: 0.0, price_over_y, regime }
    }
}

fn check_price(p: f64, beta: f64) -> Result<()> {
    if !(p > 0.0 && p <= beta) {
        return Err(PricingError::OutOfRange { p, lo: 0.0, hi: beta });
    }
    Ok(())
}

fn degenerate(p: f64, mu: f64) -> RatioBreakdown {
    if p <= mu {
        RatioBreakdown {
            p,
            cr: p / mu,
            branch: BindingTerm::Degenerate,
            tail_ratio: 1.0,
            price_over_y: p / mu,
            regime: Regime::LowTwoPoint,
        }
    } else {
        RatioBreakdown::zero(p, 0.0, Regime::AboveTau2)
    }
}

/// Worst-case competitive ratio of price `p` for any dispersion measure.
///
/// In upper-bound mode this evaluates [`worst_case_cr_dispersion_ub`].
/// With unbounded valuations the ratio of any price at or above the mean
/// is zero (the limit of the three-point regime as `beta` grows).
pub fn worst_case_cr(market: &MarketInfo, p: f64) -> Result<RatioBreakdown> {
    market.require_feasible()?;
    let (mu, beta) = (market.mu(), market.beta());
    check_price(p, beta)?;
    if market.is_degenerate() {
        return Ok(degenerate(p, mu));
    }
    let exact = market.mode() == DispersionMode::Exact;
    let t2 = market.tau2();
    if exact && p > t2 + BAND * t2.max(1.0) {
        return Ok(RatioBreakdown::zero(p, p / beta, Regime::AboveTau2));
    }
    if !beta.is_finite() && p >= mu {
        let regime = if p >= t2 { Regime::AboveTau2 } else { Regime::MidThreePoint };
        return Ok(RatioBreakdown::zero(p, 0.0, regime));
    }
    let tb = bounds::tail_bounds(market, p)?;
    let tail_ratio = if tb.sup_tail > 0.0 { tb.inf_tail / tb.sup_tail } else { 0.0 };
    Ok(RatioBreakdown::from_terms(p, tail_ratio, p / tb.sup_cond_exp, tb.regime))
}

/// Worst-case competitive ratio when the dispersion is only an upper bound:
/// the two-point branch below `tau1`, the mean-range ratio up to `mu`, and
/// zero beyond.
pub fn worst_case_cr_dispersion_ub(market: &MarketInfo, p: f64) -> Result<RatioBreakdown> {
    if market.mode() != DispersionMode::UpperBound {
        return Err(PricingError::ModeMismatch { expected: "upper-bound" });
    }
    worst_case_cr(market, p)
}

/// Closed-form ratio for the mean/variance market.
pub fn worst_case_cr_variance(mu: f64, sigma: f64, beta: f64, p: f64) -> Result<RatioBreakdown> {
    if !(mu > 0.0 && beta > mu) {
        return Err(PricingError::InvalidMarket(format!("need 0 < mu < beta, got mu = {mu}, beta = {beta}")));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(PricingError::InvalidMarket(format!("invalid standard deviation {sigma}")));
    }
    let v = sigma * sigma;
    let cap = mu * (beta - mu);
    if v > cap * (1.0 + 1e-12) {
        return Err(PricingError::Infeasible { tau2: mu + v / mu, beta });
    }
    check_price(p, beta)?;
    if v == 0.0 {
        return Ok(degenerate(p, mu));
    }
    if v >= cap * (1.0 - 1e-12) {
        return Ok(RatioBreakdown::from_terms(p, 1.0, p / beta, Regime::MidThreePoint));
    }
    let t2 = mu + v / mu;
    let t1 = if beta.is_finite() { mu - v / (beta - mu) } else { mu };
    let band = BAND * t2.max(1.0);
    let low = |p: f64| {
        let d = mu - p;
        (d * d / (d * d + v), p * d / (mu * d + v))
    };
    let mid = |p: f64| {
        let tail = p * (mu * mu + v - p * mu) / ((beta - p) * (mu * (beta + p - mu) - v));
        (tail, p / beta)
    };
    if p > t2 + band {
        return Ok(RatioBreakdown::zero(p, p / beta, Regime::AboveTau2));
    }
    if !beta.is_finite() {
        return Ok(if p < mu {
            let (a, b) = low(p);
            RatioBreakdown::from_terms(p, a, b, Regime::LowTwoPoint)
        } else {
            RatioBreakdown::zero(p, 0.0, Regime::MidThreePoint)
        });
    }
    if (p - t1).abs() <= band {
        let (a, b) = low(p);
        let (c, d) = mid(p);
        let cr = agree_cr(a.min(b), c.min(d))?;
        let mut bd = RatioBreakdown::from_terms(p, c, d, Regime::MidThreePoint);
        bd.cr = cr;
        return Ok(bd);
    }
    let regime = if p < t1 { Regime::LowTwoPoint } else { Regime::MidThreePoint };
    let (a, b) = if p < t1 { low(p) } else { mid(p) };
    Ok(RatioBreakdown::from_terms(p, a, b, regime))
}

fn agree_cr(a: f64, b: f64) -> Result<f64> {
    if (a - b).abs() > 1e-9 {
        return Err(PricingError::InconsistentBoundary { what: "tau1", left: a, right: b });
    }
    Ok(0.5 * (a + b))
}

/// Closed-form ratio for the power-moment market `E[X^q] = s`, evaluated
/// from the companion point and the three-point masses directly.
pub fn worst_case_cr_power(mu: f64, s: f64, q: f64, beta: f64, p: f64) -> Result<RatioBreakdown> {
    let market = MarketInfo::power(mu, s, q, beta)?;
    market.require_feasible()?;
    check_price(p, beta)?;
    if market.is_degenerate() {
        return Ok(degenerate(p, mu));
    }
    let (t1, t2) = (market.tau1(), market.tau2());
    let band = BAND * t2.max(1.0);
    if p > t2 + band {
        return Ok(RatioBreakdown::zero(p, p / beta, Regime::AboveTau2));
    }
    if market.is_saturated() {
        return Ok(RatioBreakdown::from_terms(p, 1.0, p / beta, Regime::MidThreePoint));
    }
    let low = |p: f64| -> Result<(f64, f64)> {
        let a = market.alpha_of_p(p.min(t1))?;
        Ok(((mu - p) / (a - p), p / a))
    };
    let mid = |p: f64| {
        let pq = p.powf(q);
        let tail = (p * s - mu * pq) / (mu * (beta.powf(q) - pq) - s * (beta - p));
        (tail.max(0.0), p / beta)
    };
    if !beta.is_finite() {
        return if p < mu {
            let (a, b) = low(p)?;
            Ok(RatioBreakdown::from_terms(p, a, b, Regime::LowTwoPoint))
        } else {
            Ok(RatioBreakdown::zero(p, 0.0, Regime::MidThreePoint))
        };
    }
    if (p - t1).abs() <= band {
        let (a, b) = low(p)?;
        let (c, d) = mid(p);
        let cr = agree_cr(a.min(b), c.min(d))?;
        let mut bd = RatioBreakdown::from_terms(p, c, d, Regime::MidThreePoint);
        bd.cr = cr;
        return Ok(bd);
    }
    if p < t1 {
        let (a, b) = low(p)?;
        Ok(RatioBreakdown::from_terms(p, a, b, Regime::LowTwoPoint))
    } else {
        let (c, d) = mid(p);
        Ok(RatioBreakdown::from_terms(p, c, d, Regime::MidThreePoint))
    }
}

/// Worst-case competitive ratio knowing only the mean and the maximum.
pub fn worst_case_cr_mean_range(mu: f64, beta: f64, p: f64) -> Result<f64> {
    check_price(p, beta)?;
    if p >= mu {
        return Ok(0.0);
    }
    Ok(((mu - p) / (beta - p)).min(p / beta))
}

/// Worst-case expected revenue `p * inf_tail(p)`.
pub fn worst_case_revenue(market: &MarketInfo, p: f64) -> Result<f64> {
    market.require_feasible()?;
    check_price(p, market.beta())?;
    if market.is_degenerate() {
        return Ok(if p <= market.mu() { p } else { 0.0 });
    }
    let t2 = market.tau2();
    if market.mode() == DispersionMode::Exact && p > t2 + BAND * t2.max(1.0) {
        return Ok(0.0);
    }
    if !market.beta().is_finite() && p >= market.mu() {
        return Ok(0.0);
    }
    bounds::inf_tail(market, p).map(|t| p * t)
}
