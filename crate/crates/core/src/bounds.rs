//! Tight bounds on the tail probability `P(X >= p)` and on the conditional
//! expectation `E[X | X >= p]` over the ambiguity set.

use serde::Serialize;

use crate::ambiguity::{DispersionMode, MarketInfo};
use crate::error::{PricingError, Result};
use crate::extremal::{three_point_masses, two_point_masses, BAND};

/// Branch agreement required at the regime boundaries.
const BOUNDARY_AGREEMENT: f64 = 1e-9;

/// Which extremal construction is active at a price.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `p <= tau1`: two-point distributions on `{p, alpha(p)}`.
    LowTwoPoint,
    /// `tau1 <= p <= tau2`: three-point distributions on `{0, p, beta}`.
    MidThreePoint,
    /// `p > tau2`: all mass can sit below `p`.
    AboveTau2,
}

impl Regime {
    pub fn label(self) -> &'static str {
        match self {
            Regime::LowTwoPoint => "low_two_point",
            Regime::MidThreePoint => "mid_three_point",
            Regime::AboveTau2 => "above_tau2",
        }
    }
}

/// The bounds that enter the competitive ratio at one price.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailBounds {
    pub p: f64,
    pub inf_tail: f64,
    pub sup_tail: f64,
    /// Largest achievable `E[X | X >= p]`.
    pub sup_cond_exp: f64,
    /// `p * sup_tail`.
    pub best_case_rev: f64,
    pub regime: Regime,
}

#[derive(Debug, Clone, Copy)]
struct Branch {
    sup: f64,
    inf: f64,
    y: f64,
}

fn check_price(market: &MarketInfo, p: f64) -> Result<()> {
    if !(p > 0.0 && p <= market.beta()) {
        return Err(PricingError::OutOfRange { p, lo: 0.0, hi: market.beta() });
    }
    Ok(())
}

fn low_branch(market: &MarketInfo, p: f64) -> Result<Branch> {
    let p = p.min(market.tau1());
    let alpha = market.alpha_of_p(p)?;
    let (_, va) = two_point_masses(market.mu(), p, alpha);
    Ok(Branch { sup: 1.0, inf: va, y: alpha })
}

fn mid_branch(market: &MarketInfo, p: f64) -> Result<Branch> {
    market.require_finite_beta("three-point regime")?;
    let (_, wp, wb) = three_point_masses(market, p);
    Ok(Branch { sup: (wp + wb).clamp(0.0, 1.0), inf: wb.clamp(0.0, 1.0), y: market.beta() })
}

fn high_branch(market: &MarketInfo, p: f64) -> Result<Branch> {
    let p = p.max(market.tau2());
    let alpha = market.alpha_of_p(p)?;
    let (vp, _) = two_point_masses(market.mu(), p, alpha);
    Ok(Branch { sup: vp.clamp(0.0, 1.0), inf: 0.0, y: market.beta() })
}

fn agree(what: &'static str, a: f64, b: f64) -> Result<f64> {
    if a == b {
        return Ok(a);
    }
    if !((a - b).abs() <= BOUNDARY_AGREEMENT) {
        return Err(PricingError::InconsistentBoundary { what, left: a, right: b });
    }
    Ok(0.5 * (a + b))
}

fn merge(what: &'static str, a: Branch, b: Branch) -> Result<Branch> {
    let y = if a.y.is_finite() && b.y.is_finite() {
        agree(what, a.y / b.y, 1.0)?;
        0.5 * (a.y + b.y)
    } else {
        a.y.max(b.y)
    };
    Ok(Branch { sup: agree(what, a.sup, b.sup)?, inf: agree(what, a.inf, b.inf)?, y })
}

/// Exact-mode bounds, dispatched on the regime of `p`. Inside a narrow band
/// around each threshold both adjacent formulas are evaluated and must agree.
fn exact_bounds(market: &MarketInfo, p: f64) -> Result<(Regime, Branch)> {
    let (mu, beta) = (market.mu(), market.beta());
    if market.is_degenerate() {
        let b = if p <= mu {
            Branch { sup: 1.0, inf: 1.0, y: mu }
        } else {
            Branch { sup: 0.0, inf: 0.0, y: if beta.is_finite() { beta } else { p } }
        };
        let regime = if p <= mu { Regime::LowTwoPoint } else { Regime::AboveTau2 };
        return Ok((regime, b));
    }
    if market.is_saturated() {
        let r = mu / beta;
        return Ok((Regime::MidThreePoint, Branch { sup: r, inf: r, y: beta }));
    }
    let (t1, t2) = (market.tau1(), market.tau2());
    let band = BAND * t2.max(1.0);
    if !beta.is_finite() {
        // tau1 = mu here; the three-point regime does not exist
        return if p < t1 {
            Ok((Regime::LowTwoPoint, low_branch(market, p)?))
        } else if p >= t2 {
            Ok((Regime::AboveTau2, high_branch(market, p)?))
        } else {
            Err(PricingError::UnboundedSupport("three-point regime"))
        };
    }
    if (p - t1).abs() <= band {
        let b = merge("tau1", low_branch(market, p)?, mid_branch(market, p)?)?;
        return Ok((Regime::MidThreePoint, b));
    }
    if (p - t2).abs() <= band {
        let b = merge("tau2", mid_branch(market, p)?, high_branch(market, p)?)?;
        return Ok((Regime::MidThreePoint, b));
    }
    if p < t1 {
        Ok((Regime::LowTwoPoint, low_branch(market, p)?))
    } else if p < t2 {
        Ok((Regime::MidThreePoint, mid_branch(market, p)?))
    } else {
        Ok((Regime::AboveTau2, high_branch(market, p)?))
    }
}

/// Upper-bound mode: the set admits every dispersion up to `s`, so any
/// price up to the mean can be met with certainty and the mean-range bound
/// takes over the inf tail between `tau1` and `mu`.
fn upper_bound_bounds(market: &MarketInfo, p: f64) -> Result<(Regime, Branch)> {
    let exact = market.with_mode(DispersionMode::Exact);
    let (mu, beta) = (market.mu(), market.beta());
    let t1 = market.tau1();
    let y = exact_bounds(&exact, p).map(|(_, b)| b.y).or_else(|e| match e {
        PricingError::UnboundedSupport(_) => Ok(beta),
        e => Err(e),
    })?;
    if market.is_degenerate() || p >= mu {
        let sup = if p <= mu {
            1.0
        } else {
            match exact_bounds(&exact, p) {
                Ok((_, b)) => b.sup,
                Err(PricingError::UnboundedSupport(_)) => mu / p,
                Err(e) => return Err(e),
            }
        };
        let inf = if p <= mu && market.is_degenerate() { 1.0 } else { 0.0 };
        let regime = if p <= t1 { Regime::LowTwoPoint } else { Regime::AboveTau2 };
        return Ok((regime, Branch { sup, inf, y }));
    }
    let band = BAND * market.tau2().max(1.0);
    let mean_range = |p: f64| (mu - p) / (beta - p);
    if market.is_saturated() || p > t1 + band {
        return Ok((Regime::MidThreePoint, Branch { sup: 1.0, inf: mean_range(p), y }));
    }
    let low = low_branch(market, p)?;
    if (p - t1).abs() <= band {
        let inf = agree("tau1", low.inf, mean_range(p))?;
        return Ok((Regime::MidThreePoint, Branch { sup: 1.0, inf, y }));
    }
    Ok((Regime::LowTwoPoint, Branch { sup: 1.0, inf: low.inf, y }))
}

fn dispatch(market: &MarketInfo, p: f64) -> Result<(Regime, Branch)> {
    market.require_feasible()?;
    check_price(market, p)?;
    match market.mode() {
        DispersionMode::Exact => exact_bounds(market, p),
        DispersionMode::UpperBound => upper_bound_bounds(market, p),
    }
}

/// All bounds at price `p` in one pass.
pub fn tail_bounds(market: &MarketInfo, p: f64) -> Result<TailBounds> {
    let (regime, b) = dispatch(market, p)?;
    Ok(TailBounds { p, inf_tail: b.inf, sup_tail: b.sup, sup_cond_exp: b.y, best_case_rev: p * b.sup, regime })
}

/// Regime of price `p`.
pub fn regime(market: &MarketInfo, p: f64) -> Result<Regime> {
    dispatch(market, p).map(|(r, _)| r)
}

/// Largest probability of a sale at price `p`.
pub fn sup_tail(market: &MarketInfo, p: f64) -> Result<f64> {
    dispatch(market, p).map(|(_, b)| b.sup)
}

/// Smallest probability of a sale at price `p`. In upper-bound mode this is
/// [`inf_tail_dispersion_ub`].
pub fn inf_tail(market: &MarketInfo, p: f64) -> Result<f64> {
    dispatch(market, p).map(|(_, b)| b.inf)
}

/// Largest `E[X | X >= p]`.
pub fn sup_cond_exp(market: &MarketInfo, p: f64) -> Result<f64> {
    dispatch(market, p).map(|(_, b)| b.y)
}

/// Best-case revenue `p * sup_tail(p)`, defined up to `tau2`.
pub fn best_case_revenue(market: &MarketInfo, p: f64) -> Result<f64> {
    market.require_feasible()?;
    if p > market.tau2() {
        return Err(PricingError::OutOfRange { p, lo: 0.0, hi: market.tau2() });
    }
    sup_tail(market, p).map(|s| p * s)
}

/// Tail bounds knowing only the mean and the maximum valuation.
/// Returns `(inf, sup)`.
pub fn mean_range_tail_bounds(mu: f64, beta: f64, p: f64) -> Result<(f64, f64)> {
    if !(p > 0.0 && p <= beta) {
        return Err(PricingError::OutOfRange { p, lo: 0.0, hi: beta });
    }
    let inf = if beta.is_finite() { ((mu - p) / (beta - p)).max(0.0) } else { 0.0 };
    Ok((inf, (mu / p).min(1.0)))
}

/// Inf tail when the dispersion is only bounded above by `s`.
pub fn inf_tail_dispersion_ub(market: &MarketInfo, p: f64) -> Result<f64> {
    if market.mode() != DispersionMode::UpperBound {
        return Err(PricingError::ModeMismatch { expected: "upper-bound" });
    }
    inf_tail(market, p)
}
