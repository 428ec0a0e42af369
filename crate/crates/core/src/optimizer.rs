//! Optimal robust prices.
//!
//! For the mean/variance market the maximin competitive-ratio price is one
//! of three closed-form candidates: a low price driven by the two-point
//! regime and two high prices in the three-point regime. The winner switches
//! from low to high at a dispersion threshold. The maximin-revenue price has
//! the same structure with its own pair of candidates. For power moments the
//! candidates are roots of scalar equations, and for anything else the
//! worst-case objective is maximized numerically.

use serde::Serialize;

use crate::ambiguity::MarketInfo;
use crate::error::{PricingError, Result};
use crate::ratio::{worst_case_cr, worst_case_cr_power, worst_case_cr_variance, worst_case_revenue};
use crate::roots::{bisect, golden_max, scan, scan_root, Pick};

const THRESHOLD_SCAN: usize = 200;
const CANDIDATE_SCAN: usize = 2001;

/// Objective being maximized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    CompetitiveRatio,
    Revenue,
}

/// Whether the chosen price sits in the low (two-point) or high
/// (three-point) part of the price range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PriceRegime {
    Low,
    High,
}

/// A candidate price and its worst-case objective value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Candidate {
    pub label: &'static str,
    pub price: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PriceSolution {
    pub price: f64,
    pub value: f64,
    pub objective: Objective,
    pub regime: PriceRegime,
    /// Label of the winning candidate.
    pub label: &'static str,
    pub candidates: Vec<Candidate>,
    /// Dispersion level at which the optimum switches from the low to the
    /// high candidate, when known.
    pub threshold: Option<f64>,
}

impl PriceSolution {
    fn pick(
        objective: Objective,
        low: Candidate,
        high: Option<Candidate>,
        mut candidates: Vec<Candidate>,
        threshold: Option<f64>,
    ) -> Self {
        let (win, regime) = match high {
            Some(h) if h.value > low.value => (h, PriceRegime::High),
            _ => (low, PriceRegime::Low),
        };
        candidates.sort_by(|a, b| a.price.total_cmp(&b.price).then(a.label.cmp(b.label)));
        PriceSolution { price: win.price, value: win.value, objective, regime, label: win.label, candidates, threshold }
    }

    fn point(objective: Objective, price: f64, value: f64, label: &'static str) -> Self {
        let c = Candidate { label, price, value };
        PriceSolution::pick(objective, c.clone(), None, vec![c], None)
    }
}

/// Which closed form to use for the low candidate price.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LowPriceFormula {
    /// The stationary point of the low-regime ratio.
    #[default]
    Stationary,
    /// Variant with `mu / (2 sigma)` unsquared under the radical. Kept only
    /// to document that it does not reproduce the reference prices.
    Unsquared,
}

fn check_variance(mu: f64, sigma: f64, beta: f64) -> Result<()> {
    if !(mu > 0.0 && mu.is_finite() && beta > mu) {
        return Err(PricingError::InvalidMarket(format!("need 0 < mu < beta, got mu = {mu}, beta = {beta}")));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(PricingError::InvalidMarket(format!("invalid standard deviation {sigma}")));
    }
    let v = sigma * sigma;
    if v > mu * (beta - mu) * (1.0 + 1e-12) {
        return Err(PricingError::Infeasible { tau2: mu + v / mu, beta });
    }
    Ok(())
}

/// Low candidate: maximizer of the two-point-regime ratio.
pub fn low_price_variance(mu: f64, sigma: f64, formula: LowPriceFormula) -> f64 {
    if sigma == 0.0 {
        return mu;
    }
    let a = mu / (2.0 * sigma);
    let (plus, minus) = match formula {
        LowPriceFormula::Stationary => {
            let r = (8.0 / 27.0 + a * a).sqrt();
            // a - r written without cancellation
            (a + r, -(8.0 / 27.0) / (a + r))
        }
        LowPriceFormula::Unsquared => {
            let r = (8.0 / 27.0 + a).sqrt();
            (a + r, a - r)
        }
    };
    mu - sigma * (plus.cbrt() + minus.cbrt())
}

/// High candidates `(secant, half)`: the interior stationary point of the
/// three-point ratio and half the right threshold.
pub fn high_prices_variance(mu: f64, sigma: f64, beta: f64) -> (f64, f64) {
    let t2 = mu + sigma * sigma / mu;
    let disc = (3.0 * beta - t2).powi(2) - 4.0 * beta * beta;
    (0.5 * (beta + t2 - disc.max(0.0).sqrt()), 0.5 * t2)
}

fn cr_var(mu: f64, sigma: f64, beta: f64, p: f64) -> f64 {
    worst_case_cr_variance(mu, sigma, beta, p).map(|r| r.cr).unwrap_or(0.0)
}

fn variance_candidates(
    mu: f64,
    sigma: f64,
    beta: f64,
    formula: LowPriceFormula,
) -> (Candidate, Option<Candidate>, Vec<Candidate>) {
    let pl = low_price_variance(mu, sigma, formula);
    let low = Candidate { label: "p_l", price: pl, value: cr_var(mu, sigma, beta, pl) };
    if !beta.is_finite() {
        return (low.clone(), None, vec![low]);
    }
    let (h1, h2) = high_prices_variance(mu, sigma, beta);
    let c1 = Candidate { label: "p_h1", price: h1, value: cr_var(mu, sigma, beta, h1) };
    let c2 = Candidate { label: "p_h2", price: h2, value: cr_var(mu, sigma, beta, h2) };
    let high = if h1 >= h2 { c1.clone() } else { c2.clone() };
    (low.clone(), Some(high), vec![low, c1, c2])
}

/// Maximin competitive-ratio price for the mean/variance market.
pub fn optimal_price_variance(mu: f64, sigma: f64, beta: f64) -> Result<PriceSolution> {
    optimal_price_variance_with(mu, sigma, beta, LowPriceFormula::Stationary)
}

pub fn optimal_price_variance_with(mu: f64, sigma: f64, beta: f64, formula: LowPriceFormula) -> Result<PriceSolution> {
    check_variance(mu, sigma, beta)?;
    if sigma == 0.0 {
        return Ok(PriceSolution::point(Objective::CompetitiveRatio, mu, 1.0, "p_l"));
    }
    let (low, high, all) = variance_candidates(mu, sigma, beta, formula);
    let threshold = if beta.is_finite() { sigma_star_with(mu, beta, formula).ok() } else { None };
    Ok(PriceSolution::pick(Objective::CompetitiveRatio, low, high, all, threshold))
}

/// Locates the first downward crossing of `gap` on `(0, sigma_max)`.
fn crossing<F: Fn(f64) -> f64>(gap: F, sigma_max: f64, what: &'static str) -> Result<f64> {
    let table = scan(&gap, sigma_max * 1e-3, sigma_max * (1.0 - 1e-9), THRESHOLD_SCAN);
    let window = table.windows(2).find(|w| w[0].1 > 0.0 && w[1].1 <= 0.0).map(|w| (w[0].0, w[1].0));
    match window {
        Some((lo, hi)) => bisect(&gap, lo, hi, 0.0),
        None => Err(PricingError::ThresholdNotFound { what, scan: table }),
    }
}

/// Dispersion level at which the low and high candidate ratios coincide.
pub fn sigma_star(mu: f64, beta: f64) -> Result<f64> {
    sigma_star_with(mu, beta, LowPriceFormula::Stationary)
}

fn sigma_star_with(mu: f64, beta: f64, formula: LowPriceFormula) -> Result<f64> {
    if !beta.is_finite() {
        return Err(PricingError::ThresholdAtInfinity("competitive-ratio threshold"));
    }
    check_variance(mu, 0.0, beta)?;
    let gap = |sigma: f64| {
        let (low, high, _) = variance_candidates(mu, sigma, beta, formula);
        low.value - high.map_or(0.0, |h| h.value)
    };
    crossing(gap, (mu * (beta - mu)).sqrt(), "competitive-ratio threshold")
}

/// Revenue candidates `(low, high)` for the mean/variance market.
pub fn revenue_prices_variance(mu: f64, sigma: f64, beta: f64) -> (f64, f64) {
    let low = if sigma == 0.0 {
        mu
    } else {
        let k = mu / sigma;
        let r = (1.0 + k * k).sqrt();
        mu - sigma * ((k + r).cbrt() + (-1.0 / (k + r)).cbrt())
    };
    let t2 = mu + sigma * sigma / mu;
    let high = beta - (beta * (beta - t2)).max(0.0).sqrt();
    (low, high)
}

fn revenue_candidates(market: &MarketInfo) -> Result<(Candidate, Option<Candidate>, Vec<Candidate>)> {
    let sigma = market.sigma().ok_or(PricingError::ModeMismatch { expected: "variance" })?;
    let (l, h) = revenue_prices_variance(market.mu(), sigma, market.beta());
    let low = Candidate { label: "pi_l", price: l, value: worst_case_revenue(market, l)? };
    if !market.beta().is_finite() {
        return Ok((low.clone(), None, vec![low]));
    }
    let high = Candidate { label: "pi_h", price: h, value: worst_case_revenue(market, h)? };
    Ok((low.clone(), Some(high.clone()), vec![low, high]))
}

/// Maximin-revenue price for the mean/variance market.
pub fn optimal_price_revenue_variance(mu: f64, sigma: f64, beta: f64) -> Result<PriceSolution> {
    check_variance(mu, sigma, beta)?;
    if sigma == 0.0 {
        return Ok(PriceSolution::point(Objective::Revenue, mu, mu, "pi_l"));
    }
    let market = MarketInfo::variance(mu, sigma, beta)?;
    let (low, high, all) = revenue_candidates(&market)?;
    let threshold = if beta.is_finite() { delta_star(mu, beta).ok() } else { None };
    Ok(PriceSolution::pick(Objective::Revenue, low, high, all, threshold))
}

/// Dispersion level at which the two revenue candidates tie.
pub fn delta_star(mu: f64, beta: f64) -> Result<f64> {
    if !beta.is_finite() {
        return Err(PricingError::ThresholdAtInfinity("revenue threshold"));
    }
    check_variance(mu, 0.0, beta)?;
    let gap = |sigma: f64| {
        MarketInfo::variance(mu, sigma, beta)
            .and_then(|m| revenue_candidates(&m))
            .map(|(l, h, _)| l.value - h.map_or(0.0, |h| h.value))
            .unwrap_or(f64::NAN)
    };
    crossing(gap, (mu * (beta - mu)).sqrt(), "revenue threshold")
}

/// Maximin competitive-ratio price for `E[X^q] = s`.
///
/// Four candidate prices are computed from scalar equations; the best low
/// candidate and the best high candidate are compared.
pub fn optimal_price_power(mu: f64, s: f64, q: f64, beta: f64) -> Result<PriceSolution> {
    let market = MarketInfo::power(mu, s, q, beta)?;
    market.require_feasible()?;
    if market.is_degenerate() {
        return Ok(PriceSolution::point(Objective::CompetitiveRatio, mu, 1.0, "p_l"));
    }
    let cr = |p: f64| worst_case_cr_power(mu, s, q, beta, p).map(|r| r.cr);
    let (t1, t2) = (market.tau1(), market.tau2());
    if market.is_saturated() {
        return Ok(PriceSolution::point(Objective::CompetitiveRatio, t2, cr(t2)?, "tau2"));
    }
    let alpha = |p: f64| market.alpha_of_p(p).unwrap_or(f64::NAN);
    let lo = 1e-12 * mu;
    let hi = mu * (1.0 - 1e-6);
    let bar_low = scan_root(
        |p| {
            let a = alpha(p);
            p - a + (a * (a - mu)).sqrt()
        },
        lo,
        hi,
        CANDIDATE_SCAN,
        Pick::LeftMost,
    )?;
    let hat_low = scan_root(
        |p| {
            let a = alpha(p);
            (a.powf(q) - p.powf(q)) / (a - p) - q * s / mu
        },
        lo,
        hi,
        CANDIDATE_SCAN,
        Pick::LeftMost,
    )?;

    let mut all = Vec::new();
    let mut low_pool = vec![("tau1", t1)];
    low_pool.extend(bar_low.map(|p| ("bar_p_l", p)));
    low_pool.extend(hat_low.map(|p| ("hat_p_l", p)));
    for &(label, p) in &low_pool {
        all.push(Candidate { label, price: p, value: cr(p)? });
    }
    let low_pick = low_pool.iter().copied().min_by(|a, b| a.1.total_cmp(&b.1)).expect("pool holds tau1");
    let low = Candidate { label: low_pick.0, price: low_pick.1, value: cr(low_pick.1)? };

    if !beta.is_finite() {
        return Ok(PriceSolution::pick(Objective::CompetitiveRatio, low, None, all, None));
    }

    let bar_high = scan_root(
        |p| s * (2.0 * beta - p) - mu * (beta.powf(q) - p.powf(q) + beta * p.powf(q - 1.0)),
        t1.max(lo),
        t2,
        CANDIDATE_SCAN,
        Pick::RightMost,
    )?;
    let hat_high = (s / (q * mu)).powf(1.0 / (q - 1.0));
    let mut high_pool = vec![("hat_p_h", hat_high)];
    high_pool.extend(bar_high.map(|p| ("bar_p_h", p)));
    for &(label, p) in &high_pool {
        if p <= t2 {
            all.push(Candidate { label, price: p, value: cr(p)? });
        }
    }
    high_pool.push(("tau1", t1));
    let high_pick = high_pool.iter().copied().max_by(|a, b| a.1.total_cmp(&b.1)).expect("pool is nonempty");
    let (label, price) = if high_pick.1 > t2 { ("tau2", t2) } else { high_pick };
    let high = Candidate { label, price, value: cr(price)? };
    Ok(PriceSolution::pick(Objective::CompetitiveRatio, low, Some(high), all, None))
}

fn maximize_scan<F>(f: F, lo: f64, hi: f64, tol: f64) -> (f64, f64)
where
    F: Fn(f64) -> f64,
{
    let table = scan(&f, lo, hi, CANDIDATE_SCAN);
    let mut best = (lo, f64::NEG_INFINITY);
    for i in 0..table.len() {
        let v = table[i].1;
        let left = if i > 0 { table[i - 1].1 } else { f64::NEG_INFINITY };
        let right = table.get(i + 1).map_or(f64::NEG_INFINITY, |t| t.1);
        if !(v >= left && v >= right) {
            continue;
        }
        let a = table[i.saturating_sub(1)].0;
        let b = table[(i + 1).min(table.len() - 1)].0;
        let (x, fx) = golden_max(&f, a, b, tol);
        let (x, fx) = if v > fx { (table[i].0, v) } else { (x, fx) };
        if fx > best.1 {
            best = (x, fx);
        }
    }
    best
}

fn general(market: &MarketInfo, tol: f64, objective: Objective) -> Result<PriceSolution> {
    market.require_feasible()?;
    let mu = market.mu();
    if market.is_degenerate() {
        let value = match objective {
            Objective::CompetitiveRatio => 1.0,
            Objective::Revenue => mu,
        };
        return Ok(PriceSolution::point(objective, mu, value, "scan"));
    }
    let hi = if market.beta().is_finite() { market.tau2().min(market.beta()) } else { mu };
    let eval = |p: f64| -> f64 {
        let r = match objective {
            Objective::CompetitiveRatio => worst_case_cr(market, p).map(|r| r.cr),
            Objective::Revenue => worst_case_revenue(market, p),
        };
        r.unwrap_or(f64::NEG_INFINITY)
    };
    let (price, value) = maximize_scan(eval, hi * 1e-9, hi, tol);
    let regime = if price <= market.tau1() { PriceRegime::Low } else { PriceRegime::High };
    let c = Candidate { label: "scan", price, value };
    Ok(PriceSolution { price, value, objective, regime, label: "scan", candidates: vec![c], threshold: None })
}

/// Numerical maximin competitive-ratio price for any market: a fine scan
/// followed by golden-section refinement around every local maximum.
pub fn optimal_price_general(market: &MarketInfo, tol: f64) -> Result<PriceSolution> {
    general(market, tol, Objective::CompetitiveRatio)
}

/// Numerical maximin-revenue price for any market.
pub fn optimal_price_revenue_general(market: &MarketInfo, tol: f64) -> Result<PriceSolution> {
    general(market, tol, Objective::Revenue)
}

/// Low and high prices under both objectives, and whether they are ordered
/// as expected away from the thresholds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PriceOrdering {
    pub revenue_low: f64,
    pub ratio_low: f64,
    pub revenue_high: Option<f64>,
    pub ratio_high: Option<f64>,
    pub sigma_star: Option<f64>,
    pub delta_star: Option<f64>,
    /// `sigma <= min(sigma*, delta*)`: both objectives pick their low price.
    pub low_applies: bool,
    /// The revenue low price lies strictly below the ratio low price.
    pub low_ordered: bool,
    /// `sigma >= max(sigma*, delta*)`: both objectives pick their high price.
    pub high_applies: bool,
    /// The revenue high price lies strictly above the ratio high price.
    pub high_ordered: bool,
}

/// Compares the maximin-revenue prices with the maximin-ratio prices.
pub fn compare_prices(mu: f64, sigma: f64, beta: f64) -> Result<PriceOrdering> {
    check_variance(mu, sigma, beta)?;
    let (rl, rh) = revenue_prices_variance(mu, sigma, beta);
    let pl = low_price_variance(mu, sigma, LowPriceFormula::Stationary);
    let finite = beta.is_finite();
    let ph = finite.then(|| {
        let (h1, h2) = high_prices_variance(mu, sigma, beta);
        h1.max(h2)
    });
    let (ss, ds) = if finite { (sigma_star(mu, beta).ok(), delta_star(mu, beta).ok()) } else { (None, None) };
    let nondegenerate = sigma > 0.0;
    let low_applies = nondegenerate && ss.zip(ds).map_or(!finite, |(a, b)| sigma <= a.min(b));
    let high_applies = nondegenerate && ss.zip(ds).is_some_and(|(a, b)| sigma >= a.max(b));
    Ok(PriceOrdering {
        revenue_low: rl,
        ratio_low: pl,
        revenue_high: finite.then_some(rh),
        ratio_high: ph,
        sigma_star: ss,
        delta_star: ds,
        low_applies,
        low_ordered: rl < pl,
        high_applies,
        high_ordered: ph.is_some_and(|ph| rh > ph),
    })
}
