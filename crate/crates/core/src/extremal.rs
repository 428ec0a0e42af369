//! Finite-support extremal distributions of the ambiguity set.

use serde::Serialize;

use crate::ambiguity::{DispersionMode, MarketInfo};
use crate::bounds;
use crate::error::{PricingError, Result};

/// Masses in `[-CLAMP_TOL, 0)` are floating-point noise at regime boundaries.
const CLAMP_TOL: f64 = 1e-10;
/// Atoms lighter than this are dropped from a distribution.
const ZERO_MASS: f64 = 1e-14;
/// Band around `tau1`/`tau2` inside which a price counts as on the boundary.
pub(crate) const BAND: f64 = 1e-12;

/// A probability distribution with finitely many atoms.
///
/// Supports are strictly increasing and every stored mass is positive; zero
/// masses are dropped on construction so that equal distributions compare
/// equal.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteDistribution {
    supports: Vec<f64>,
    masses: Vec<f64>,
}

impl DiscreteDistribution {
    /// Builds a distribution from atoms in any order. Duplicate supports are
    /// merged, masses within `1e-14` of zero are dropped and the rest are
    /// renormalized.
    pub fn new(supports: Vec<f64>, masses: Vec<f64>) -> Result<Self> {
        if supports.len() != masses.len() || supports.is_empty() {
            return Err(PricingError::InvalidMarket("supports and masses must be nonempty and of equal length".into()));
        }
        let mut atoms: Vec<(f64, f64)> = supports.into_iter().zip(masses).collect();
        if atoms.iter().any(|&(x, w)| !x.is_finite() || !(w >= -CLAMP_TOL)) {
            return Err(PricingError::InvalidMarket(format!("invalid atoms {atoms:?}")));
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
        for (x, w) in atoms {
            match merged.last_mut() {
                Some(last) if last.0 == x => last.1 += w,
                _ => merged.push((x, w)),
            }
        }
        merged.retain(|&(_, w)| w > ZERO_MASS);
        let total: f64 = merged.iter().map(|a| a.1).sum();
        if !(total > 0.0) || (total - 1.0).abs() > 1e-8 {
            return Err(PricingError::InvalidMarket(format!("masses sum to {total}, not one")));
        }
        Ok(DiscreteDistribution {
            supports: merged.iter().map(|a| a.0).collect(),
            masses: merged.iter().map(|a| a.1 / total).collect(),
        })
    }

    pub fn point_mass(x: f64) -> Self {
        DiscreteDistribution { supports: vec![x], masses: vec![1.0] }
    }

    pub fn supports(&self) -> &[f64] {
        &self.supports
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn len(&self) -> usize {
        self.supports.len()
    }

    pub fn is_empty(&self) -> bool {
        self.supports.is_empty()
    }

    /// `E[f(X)]`.
    pub fn expect<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.supports.iter().zip(&self.masses).map(|(&x, &w)| w * f(x)).sum()
    }

    pub fn mean(&self) -> f64 {
        self.expect(|x| x)
    }

    /// `P(X >= t)`.
    pub fn tail(&self, t: f64) -> f64 {
        self.supports.iter().zip(&self.masses).filter(|(&x, _)| x >= t).map(|(_, &w)| w).sum()
    }

    /// Expected revenue `p * P(X >= p)` of posting price `p`.
    pub fn revenue(&self, p: f64) -> f64 {
        p * self.tail(p)
    }

    /// Full-information benchmark: the best revenue over all prices, which
    /// for finite support is attained at an atom.
    pub fn optimal_revenue(&self) -> f64 {
        self.supports.iter().map(|&t| self.revenue(t)).fold(0.0, f64::max)
    }

    /// Revenue of price `p` relative to the full-information benchmark.
    pub fn competitive_ratio(&self, p: f64) -> f64 {
        let opt = self.optimal_revenue();
        if opt > 0.0 {
            self.revenue(p) / opt
        } else {
            0.0
        }
    }

    /// Largest absolute violation of the mean and dispersion constraints of
    /// `market` (dispersion only as an upper bound in that mode).
    pub fn moment_residual(&self, market: &MarketInfo) -> f64 {
        let mean = (self.mean() - market.mu()).abs();
        let disp = self.expect(|x| market.phi(x)) - market.s();
        let disp = match market.mode() {
            DispersionMode::Exact => disp.abs(),
            DispersionMode::UpperBound => disp.max(0.0),
        };
        mean.max(disp)
    }
}

/// Masses `(v_p, v_alpha)` of the two-point distribution on `{p, alpha}`.
pub(crate) fn two_point_masses(mu: f64, p: f64, alpha: f64) -> (f64, f64) {
    ((alpha - mu) / (alpha - p), (mu - p) / (alpha - p))
}

/// Masses `(w_0, w_p, w_beta)` of the three-point distribution on
/// `{0, p, beta}` matching the mean and dispersion. Unclamped.
pub(crate) fn three_point_masses(market: &MarketInfo, p: f64) -> (f64, f64, f64) {
    let (mu, s, beta) = (market.mu(), market.s(), market.beta());
    let (f0, fp, fb) = (market.phi(0.0), market.phi(p), market.phi(beta));
    let d = beta * (f0 - fp) + p * (fb - f0);
    let w0 = (s * (beta - p) + (mu - beta) * fp + (p - mu) * fb) / d;
    let wp = (beta * (f0 - s) + mu * (fb - f0)) / d;
    let wb = (mu * (f0 - fp) - p * (f0 - s)) / d;
    (w0, wp, wb)
}

fn clamp_mass(w: f64) -> Result<f64> {
    if w >= 0.0 {
        Ok(w)
    } else if w >= -CLAMP_TOL {
        Ok(0.0)
    } else {
        Err(PricingError::NoConvergence(format!("negative mass {w}")))
    }
}

fn saturated(market: &MarketInfo) -> DiscreteDistribution {
    let r = market.mu() / market.beta();
    DiscreteDistribution { supports: vec![0.0, market.beta()], masses: vec![1.0 - r, r] }
}

fn check_price(market: &MarketInfo, p: f64, lo: f64) -> Result<()> {
    let beta = market.beta();
    if !(p >= lo && p <= beta) || p.is_nan() {
        return Err(PricingError::OutOfRange { p, lo, hi: beta });
    }
    Ok(())
}

/// Two-point distribution on `{p, alpha(p)}`; needs `alpha(p)` inside
/// `[0, beta]`, which holds for `p <= tau1` and `p >= tau2`.
pub fn two_point(market: &MarketInfo, p: f64) -> Result<DiscreteDistribution> {
    market.require_feasible()?;
    if market.is_degenerate() {
        return Ok(DiscreteDistribution::point_mass(market.mu()));
    }
    check_price(market, p, 0.0)?;
    let beta = market.beta();
    if market.is_saturated() && (p == 0.0 || p == beta) {
        return Ok(saturated(market));
    }
    let alpha = market.alpha_of_p(p)?;
    let alpha = if alpha > beta && alpha <= beta * (1.0 + 1e-9) { beta } else { alpha };
    if alpha > beta || alpha < 0.0 {
        return Err(PricingError::SupportViolation { p, alpha, beta });
    }
    let (vp, va) = two_point_masses(market.mu(), p, alpha);
    DiscreteDistribution::new(vec![p, alpha], vec![clamp_mass(vp)?, clamp_mass(va)?])
}

/// Three-point distribution on `{0, p, beta}` for `p` in `[tau1, tau2]`.
pub fn three_point(market: &MarketInfo, p: f64) -> Result<DiscreteDistribution> {
    market.require_feasible()?;
    market.require_finite_beta("three-point distribution")?;
    if market.is_degenerate() {
        return Ok(DiscreteDistribution::point_mass(market.mu()));
    }
    let (t1, t2) = (market.tau1(), market.tau2());
    let band = BAND * t2.max(1.0);
    if !(p >= t1 - band && p <= t2 + band) {
        return Err(PricingError::OutOfRange { p, lo: t1, hi: t2 });
    }
    if market.is_saturated() {
        return Ok(saturated(market));
    }
    let (w0, wp, wb) = three_point_masses(market, p);
    DiscreteDistribution::new(vec![0.0, p, market.beta()], vec![clamp_mass(w0)?, clamp_mass(wp)?, clamp_mass(wb)?])
}

/// The distribution that drives both the competitive ratio and the revenue
/// of price `p` to their infimum, realized at the left limit `p - eps`.
///
/// Above `tau2` this is the two-point distribution on `{0, tau2}`, under
/// which nobody buys.
pub fn worst_case_distribution(market: &MarketInfo, p: f64, eps: f64) -> Result<DiscreteDistribution> {
    market.require_feasible()?;
    if market.mode() != DispersionMode::Exact {
        return Err(PricingError::ModeMismatch { expected: "exact" });
    }
    if !(eps > 0.0 && eps < p) {
        return Err(PricingError::OutOfRange { p: eps, lo: 0.0, hi: p });
    }
    check_price(market, p, 0.0)?;
    if market.is_degenerate() {
        return Ok(DiscreteDistribution::point_mass(market.mu()));
    }
    let (mu, t2) = (market.mu(), market.tau2());
    if p > t2 {
        return DiscreteDistribution::new(vec![0.0, t2], vec![1.0 - mu / t2, mu / t2]);
    }
    let x = p - eps;
    let tb = bounds::tail_bounds(market, x)?;
    DiscreteDistribution::new(
        vec![0.0, x, tb.sup_cond_exp],
        vec![clamp_mass(1.0 - tb.sup_tail)?, clamp_mass(tb.sup_tail - tb.inf_tail)?, clamp_mass(tb.inf_tail)?],
    )
}

/// Worst case of the mean-and-range ambiguity set at price `p <= mu`:
/// atoms at `p - eps` and `beta`.
pub fn mean_range_two_point(mu: f64, beta: f64, p: f64, eps: f64) -> Result<DiscreteDistribution> {
    if !(mu > 0.0 && beta > mu) {
        return Err(PricingError::InvalidMarket(format!("need 0 < mu < beta, got mu = {mu}, beta = {beta}")));
    }
    if !(p > 0.0 && p <= mu) {
        return Err(PricingError::OutOfRange { p, lo: 0.0, hi: mu });
    }
    if !(eps > 0.0 && eps < p) {
        return Err(PricingError::OutOfRange { p: eps, lo: 0.0, hi: p });
    }
    let x = p - eps;
    let d = beta - x;
    DiscreteDistribution::new(vec![x, beta], vec![(beta - mu) / d, (mu - x) / d])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    fn check_moments(d: &DiscreteDistribution, m: &MarketInfo, tol: f64) {
        assert!(d.moment_residual(m) <= tol, "residual {}", d.moment_residual(m));
        close(d.masses().iter().sum(), 1.0, 1e-12);
    }

    #[test]
    fn two_point_examples() {
        let m = MarketInfo::variance(0.5, 0.5, 1.6).unwrap();
        let d = two_point(&m, 0.25).unwrap();
        assert_eq!(d.supports(), &[0.25, 1.5]);
        close(d.masses()[0], 0.8, 1e-15);
        close(d.masses()[1], 0.2, 1e-15);
        check_moments(&d, &m, 1e-14);

        let m = MarketInfo::variance(0.5, 0.5, 1.0).unwrap();
        let d = two_point(&m, 0.0).unwrap();
        assert_eq!(d.supports(), &[0.0, 1.0]);
        close(d.masses()[0], 0.5, 1e-15);

        let deg = MarketInfo::variance(0.5, 0.0, 1.0).unwrap();
        assert_eq!(two_point(&deg, 0.2).unwrap(), DiscreteDistribution::point_mass(0.5));

        let m = MarketInfo::variance(0.5, 0.5, 1.2).unwrap();
        assert!(matches!(two_point(&m, 0.3), Err(PricingError::SupportViolation { .. })));
    }

    #[test]
    fn three_point_examples() {
        let m = MarketInfo::variance(0.5, 0.5, 1.2).unwrap();
        let d = three_point(&m, 0.6).unwrap();
        assert_eq!(d.supports(), &[0.0, 0.6, 1.2]);
        close(d.masses()[0], 4.0 / 9.0, 1e-12);
        close(d.masses()[1], 5.0 / 18.0, 1e-12);
        close(d.masses()[2], 5.0 / 18.0, 1e-12);
        check_moments(&d, &m, 1e-14);

        // at tau1 the atom at zero vanishes
        let d = three_point(&m, m.tau1()).unwrap();
        assert_eq!(d.len(), 2);
        close(d.supports()[0], m.tau1(), 1e-15);

        // at tau2 the masses on {p, beta} add up to v_p(tau2)
        let (_, wp, wb) = three_point_masses(&m, m.tau2());
        let (vp, _) = two_point_masses(0.5, m.tau2(), m.alpha_of_p(m.tau2()).unwrap());
        close(wp + wb, vp, 1e-12);

        assert!(three_point(&m, 1.1).is_err());
        let inf = MarketInfo::variance(0.5, 0.5, f64::INFINITY).unwrap();
        assert!(matches!(three_point(&inf, 0.6), Err(PricingError::UnboundedSupport(_))));
    }

    #[test]
    fn three_point_general_formula_matches_variance_formula() {
        let v = MarketInfo::variance(0.5, 0.5, 1.2).unwrap();
        let q = MarketInfo::power(0.5, 0.5, 2.0, 1.2).unwrap();
        for p in [0.15, 0.3, 0.6, 0.9, 0.99] {
            let a = three_point_masses(&v, p);
            let b = three_point_masses(&q, p);
            close(a.0, b.0, 1e-12);
            close(a.1, b.1, 1e-12);
            close(a.2, b.2, 1e-12);
        }
    }

    #[test]
    fn worst_case_examples() {
        let m = MarketInfo::variance(0.5, 0.5, 1.2).unwrap();
        let d = worst_case_distribution(&m, 0.6, 1e-9).unwrap();
        assert_eq!(d.len(), 3);
        close(d.supports()[1], 0.6, 1e-8);
        close(d.masses()[0], 4.0 / 9.0, 1e-8);
        close(d.masses()[2], 5.0 / 18.0, 1e-8);
        check_moments(&d, &m, 1e-8);

        let d = worst_case_distribution(&m, 1.1, 1e-9).unwrap();
        assert_eq!(d.supports(), &[0.0, 1.0]);
        close(d.masses()[0], 0.5, 1e-15);

        let deg = MarketInfo::variance(0.5, 0.0, 1.0).unwrap();
        assert_eq!(worst_case_distribution(&deg, 0.4, 1e-9).unwrap(), DiscreteDistribution::point_mass(0.5));
        assert!(worst_case_distribution(&m, 0.6, 0.7).is_err());
    }

    #[test]
    fn mean_range_examples() {
        let d = mean_range_two_point(0.5, 1.0, 0.25, 1e-12).unwrap();
        close(d.masses()[0], 2.0 / 3.0, 1e-11);
        close(d.masses()[1], 1.0 / 3.0, 1e-11);
        let d = mean_range_two_point(0.5, 1.0, 0.5, 1e-9).unwrap();
        assert!(d.masses()[1] > 0.0 && d.masses()[1] < 1e-8);
        let d = mean_range_two_point(0.5, 1.0, 0.4, 1e-9).unwrap();
        close(d.masses()[1], 1.0 / 6.0, 1e-8);
        close(d.mean(), 0.5, 1e-15);
        assert!(mean_range_two_point(0.5, 1.0, 0.6, 1e-9).is_err());
    }

    #[test]
    fn competitive_ratio_on_atoms() {
        let d = DiscreteDistribution::new(vec![1.0, 0.0, 2.0], vec![0.25, 0.5, 0.25]).unwrap();
        assert_eq!(d.supports(), &[0.0, 1.0, 2.0]);
        close(d.tail(1.0), 0.5, 0.0);
        close(d.optimal_revenue(), 0.5, 0.0);
        close(d.competitive_ratio(2.0), 1.0, 0.0);
        close(d.competitive_ratio(0.5), 0.5, 0.0);
    }
}
