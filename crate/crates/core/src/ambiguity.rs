//! The ambiguity set of valuation distributions with a given mean, dispersion
//! and maximum valuation, together with its structural thresholds.

use serde::Serialize;

use crate::dispersion::DispersionMeasure;
use crate::error::{PricingError, Result};
use crate::roots::{bisect, expand_upper};

/// Relative tolerance under which `s` is treated as equal to `phi(mu)`.
pub(crate) const DEGENERATE_TOL: f64 = 1e-12;
/// Relative tolerance under which the right threshold is treated as `beta`.
pub(crate) const SATURATION_TOL: f64 = 1e-12;

/// Whether the dispersion statistic is known exactly or only bounded above.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DispersionMode {
    #[default]
    Exact,
    UpperBound,
}

/// What the seller knows: mean `mu`, dispersion `E[phi(X)] = s` and the
/// maximum valuation `beta` (possibly infinite).
///
/// Construction validates the parameters and caches the two support
/// thresholds. A market whose right threshold exceeds `beta` can still be
/// built so that [`MarketInfo::check_feasible`] can explain the failure, but
/// every pricing operation refuses it.
#[derive(Debug, Clone)]
pub struct MarketInfo {
    mu: f64,
    s: f64,
    beta: f64,
    measure: DispersionMeasure,
    mode: DispersionMode,
    // sigma^2 when the measure is the variance, kept separately so the closed
    // forms do not suffer cancellation in s - mu^2
    var: Option<f64>,
    degenerate: bool,
    tau2: f64,
    tau1: f64,
}

/// Result of the feasibility test `mu <= tau2 <= beta`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Feasibility {
    pub feasible: bool,
    pub tau2: f64,
    pub beta: f64,
    /// Which inequality fails, if any.
    pub reason: Option<String>,
}

/// The ambiguity set after subtracting a unit cost `c` from every valuation.
///
/// Valuations become `x - c` on `[-c, beta - c]`, the mean shifts to
/// `mu - c` and the dispersion function becomes `x -> phi(x + c)` with the
/// same statistic `s`.
#[derive(Debug, Clone)]
pub struct ShiftedProblem {
    pub c: f64,
    pub mu_shift: f64,
    pub beta_shift: f64,
    pub lower_shift: f64,
    pub s: f64,
    base: DispersionMeasure,
}

impl ShiftedProblem {
    /// The shifted dispersion function `phi(x + c)` for `x >= -c`.
    pub fn phi_shift(&self, x: f64) -> Result<f64> {
        self.base.eval(x + self.c)
    }

    pub fn base_measure(&self) -> &DispersionMeasure {
        &self.base
    }
}

impl MarketInfo {
    /// General market with dispersion statistic `s` under `measure`.
    pub fn new(mu: f64, s: f64, beta: f64, measure: DispersionMeasure, mode: DispersionMode) -> Result<Self> {
        let var = if measure.is_variance() { Some(s - mu * mu) } else { None };
        Self::build(mu, s, beta, measure, mode, var)
    }

    /// Mean/variance market: `phi(x) = x^2`, `s = mu^2 + sigma^2`.
    pub fn variance(mu: f64, sigma: f64, beta: f64) -> Result<Self> {
        Self::variance_with_mode(mu, sigma, beta, DispersionMode::Exact)
    }

    pub fn variance_with_mode(mu: f64, sigma: f64, beta: f64, mode: DispersionMode) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(PricingError::InvalidMarket(format!(
                "standard deviation {sigma} must be finite and nonnegative"
            )));
        }
        let var = sigma * sigma;
        Self::build(mu, mu * mu + var, beta, DispersionMeasure::Variance, mode, Some(var))
    }

    /// Power-moment market: `phi(x) = x^q`.
    pub fn power(mu: f64, s: f64, q: f64, beta: f64) -> Result<Self> {
        Self::new(mu, s, beta, DispersionMeasure::power(q)?, DispersionMode::Exact)
    }

    fn build(
        mu: f64,
        s: f64,
        beta: f64,
        measure: DispersionMeasure,
        mode: DispersionMode,
        var: Option<f64>,
    ) -> Result<Self> {
        measure.check()?;
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(PricingError::InvalidMarket(format!("mean {mu} must be positive and finite")));
        }
        if beta.is_nan() || beta <= mu {
            return Err(PricingError::InvalidMarket(format!("maximum valuation {beta} must exceed the mean {mu}")));
        }
        if !s.is_finite() {
            return Err(PricingError::InvalidMarket(format!("dispersion {s} must be finite")));
        }
        if let DispersionMeasure::Custom(_) = measure {
            let upper = if beta.is_finite() { beta } else { 10.0 * mu };
            measure.validate_on(upper, 1000)?;
        }
        let phi_mu = measure.phi(mu);
        let slack = s - phi_mu;
        let tol = DEGENERATE_TOL * phi_mu.abs().max(1.0);
        if slack < -tol {
            return Err(PricingError::InfeasibleDispersion { s, phi_mu });
        }
        let degenerate = match var {
            Some(v) => v <= tol,
            None => slack <= tol,
        };
        let mut market =
            MarketInfo { mu, s, beta, measure, mode, var: var.map(|v| v.max(0.0)), degenerate, tau2: mu, tau1: mu };
        if degenerate {
            return Ok(market);
        }
        market.tau2 = market.compute_tau2()?;
        if market.is_saturated() {
            market.tau2 = beta;
        }
        if market.tau2 <= beta && beta.is_finite() {
            market.tau1 = market.compute_tau1()?;
        }
        Ok(market)
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn measure(&self) -> &DispersionMeasure {
        &self.measure
    }

    pub fn mode(&self) -> DispersionMode {
        self.mode
    }

    /// Same market with a different dispersion mode.
    pub fn with_mode(&self, mode: DispersionMode) -> Self {
        MarketInfo { mode, ..self.clone() }
    }

    /// Variance `sigma^2` if the measure is the variance.
    pub fn variance_value(&self) -> Option<f64> {
        self.var
    }

    /// Standard deviation if the measure is the variance.
    pub fn sigma(&self) -> Option<f64> {
        self.var.map(f64::sqrt)
    }

    /// `s = phi(mu)`: the only feasible distribution is the point mass at `mu`.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    /// `tau2 = beta`: the only feasible distribution is the two-point
    /// distribution on `{0, beta}`.
    pub fn is_saturated(&self) -> bool {
        if self.degenerate || !self.beta.is_finite() {
            return false;
        }
        if let Some(v) = self.var {
            let cap = self.mu * (self.beta - self.mu);
            return v >= cap * (1.0 - SATURATION_TOL) && v <= cap * (1.0 + SATURATION_TOL);
        }
        let t = self.tau2;
        t >= self.beta * (1.0 - SATURATION_TOL) && t <= self.beta * (1.0 + SATURATION_TOL)
    }

    pub(crate) fn phi(&self, x: f64) -> f64 {
        self.measure.phi(x)
    }

    /// Right threshold: the right support point of the feasible two-point
    /// distribution on `{0, tau2}`.
    pub fn tau2(&self) -> f64 {
        self.tau2
    }

    /// Left threshold: the left support point of the feasible two-point
    /// distribution on `{tau1, beta}`. Equals `mu` for unbounded valuations
    /// and for the degenerate market.
    pub fn tau1(&self) -> f64 {
        self.tau1
    }

    fn compute_tau2(&self) -> Result<f64> {
        if let Some(v) = self.var {
            return Ok(self.mu + v / self.mu);
        }
        if let DispersionMeasure::Power { q } = self.measure {
            return Ok((self.s / self.mu).powf(1.0 / (q - 1.0)));
        }
        let phi0 = self.phi(0.0);
        let slope = (self.s - phi0) / self.mu;
        let k = |t: f64| self.phi(t) - phi0 - slope * t;
        let hi = expand_upper(k, self.mu, 2.0 * self.mu)?;
        bisect(k, self.mu, hi, 0.0)
    }

    fn compute_tau1(&self) -> Result<f64> {
        let (mu, beta) = (self.mu, self.beta);
        if let Some(v) = self.var {
            return Ok((mu - v / (beta - mu)).max(0.0));
        }
        let phi_beta = self.phi(beta);
        let h = |t: f64| (self.phi(t) * (beta - mu) + phi_beta * (mu - t)) / (beta - t) - self.s;
        if h(0.0) <= 0.0 {
            return Ok(0.0);
        }
        bisect(h, 0.0, mu, 0.0)
    }

    /// Tests `mu <= tau2 <= beta`.
    pub fn check_feasible(&self) -> Feasibility {
        let ok = if self.degenerate {
            true
        } else if let Some(v) = self.var {
            v <= self.mu * (self.beta - self.mu) * (1.0 + SATURATION_TOL)
        } else {
            self.tau2 <= self.beta
        };
        Feasibility {
            feasible: ok,
            tau2: self.tau2,
            beta: self.beta,
            reason: (!ok).then(|| format!("tau2 = {} exceeds the maximum valuation beta = {}", self.tau2, self.beta)),
        }
    }

    pub(crate) fn require_feasible(&self) -> Result<()> {
        if self.check_feasible().feasible {
            Ok(())
        } else {
            Err(PricingError::Infeasible { tau2: self.tau2, beta: self.beta })
        }
    }

    pub(crate) fn require_finite_beta(&self, what: &'static str) -> Result<()> {
        if self.beta.is_finite() {
            Ok(())
        } else {
            Err(PricingError::UnboundedSupport(what))
        }
    }

    /// Companion point `alpha(p)`: the other support point of the feasible
    /// two-point distribution that has an atom at `p`.
    ///
    /// For `p < mu` the result lies above `mu` and may exceed `beta`; callers
    /// that need it inside the support check that themselves. For `p > mu` a
    /// root in `[0, mu)` exists only when `p >= tau2`.
    pub fn alpha_of_p(&self, p: f64) -> Result<f64> {
        self.require_feasible()?;
        let mu = self.mu;
        if !(p >= 0.0 && p.is_finite()) {
            return Err(PricingError::OutOfRange { p, lo: 0.0, hi: self.beta });
        }
        if self.degenerate {
            return Ok(mu);
        }
        if p == mu {
            return Err(PricingError::Singularity { mu });
        }
        if p > mu && p < self.tau2 {
            return Err(PricingError::SupportViolation { p, alpha: f64::NAN, beta: self.beta });
        }
        if let Some(v) = self.var {
            return Ok((mu + v / (mu - p)).max(0.0));
        }
        let (s, phi_p) = (self.s, self.phi(p));
        let g = |a: f64| self.phi(a) * (mu - p) + phi_p * (a - mu) - s * (a - p);
        if p < mu {
            let hi = expand_upper(g, mu, 2.0 * mu)?;
            bisect(g, mu, hi, 0.0)
        } else if g(0.0) >= 0.0 {
            Ok(0.0)
        } else {
            bisect(g, 0.0, mu, 0.0)
        }
    }

    /// Subtracts a unit cost `c` from every valuation. Only the parameter
    /// mapping is provided.
    pub fn shift_unit_cost(&self, c: f64) -> Result<ShiftedProblem> {
        if !(c >= 0.0 && c < self.mu) {
            return Err(PricingError::InvalidCost { c, mu: self.mu });
        }
        Ok(ShiftedProblem {
            c,
            mu_shift: self.mu - c,
            beta_shift: self.beta - c,
            lower_shift: -c,
            s: self.s,
            base: self.measure.clone(),
        })
    }

    /// Rescales valuations by `1/mu` so the mean becomes one. Returns the
    /// scaled market and the factor `mu`; prices map back as `p = mu * p'`.
    pub fn scale_to_unit_mean(&self) -> Result<(MarketInfo, f64)> {
        let q = self.measure.exponent().ok_or(PricingError::UnsupportedScaling)?;
        let mu = self.mu;
        let beta = self.beta / mu;
        let scaled = match self.var {
            Some(v) => {
                let var = v / (mu * mu);
                MarketInfo::build(1.0, 1.0 + var, beta, self.measure.clone(), self.mode, Some(var))?
            }
            None => MarketInfo::build(1.0, self.s / mu.powf(q), beta, self.measure.clone(), self.mode, None)?,
        };
        Ok((scaled, mu))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    #[test]
    fn tau2_examples() {
        close(MarketInfo::variance(0.5, 0.5, 1.2).unwrap().tau2(), 1.0, 1e-15);
        close(MarketInfo::variance(0.5, 0.0, 1.0).unwrap().tau2(), 0.5, 0.0);
        let m = MarketInfo::power(0.5, 0.45, 1.5, 1.0).unwrap();
        close(m.tau2(), 0.81, 1e-14);
        // residual of the defining secant equation
        close(m.tau2().powf(1.5) / m.tau2(), 0.45 / 0.5, 1e-12);
        let deg = MarketInfo::power(0.5, 0.5f64.powf(1.5), 1.5, 1.0).unwrap();
        assert!(deg.is_degenerate());
        close(deg.tau2(), 0.5, 0.0);
    }

    #[test]
    fn tau1_examples() {
        close(MarketInfo::variance(0.5, 0.5, 1.2).unwrap().tau1(), 0.5 - 0.25 / 0.7, 1e-15);
        close(MarketInfo::variance(0.5, 0.0, 1.0).unwrap().tau1(), 0.5, 0.0);
        close(MarketInfo::variance(0.5, 0.5, 1.0).unwrap().tau1(), 0.0, 1e-15);
        close(MarketInfo::variance(0.5, 0.5, f64::INFINITY).unwrap().tau1(), 0.5, 0.0);
    }

    #[test]
    fn root_path_matches_variance_closed_forms() {
        let v = MarketInfo::variance(0.5, 0.5, 1.2).unwrap();
        let q = MarketInfo::power(0.5, 0.5, 2.0, 1.2).unwrap();
        close(v.tau1(), q.tau1(), 1e-14);
        close(v.tau2(), q.tau2(), 1e-14);
        for p in [0.05, 0.1, 0.25, 0.4, 1.0, 1.1, 1.2] {
            close(v.alpha_of_p(p).unwrap(), q.alpha_of_p(p).unwrap(), 1e-12);
        }
    }

    #[test]
    fn feasibility_examples() {
        assert!(MarketInfo::variance(0.5, 0.5, 1.2).unwrap().check_feasible().feasible);
        let bad = MarketInfo::variance(0.5, 0.8, 1.0).unwrap().check_feasible();
        assert!(!bad.feasible);
        close(bad.tau2, 1.78, 1e-12);
        assert!(bad.reason.is_some());
        assert!(MarketInfo::variance(0.5, 0.0, 1.0).unwrap().check_feasible().feasible);
        assert!(matches!(MarketInfo::power(0.5, 0.1, 2.0, 1.0), Err(PricingError::InfeasibleDispersion { .. })));
        assert!(MarketInfo::variance(0.5, 0.1, 0.4).is_err());
    }

    #[test]
    fn alpha_examples() {
        let m = MarketInfo::variance(0.5, 0.5, 1.2).unwrap();
        close(m.alpha_of_p(0.25).unwrap(), 1.5, 1e-15);
        close(m.alpha_of_p(0.1).unwrap(), 1.125, 1e-15);
        assert!(matches!(m.alpha_of_p(0.5), Err(PricingError::Singularity { .. })));
        assert!(matches!(m.alpha_of_p(0.8), Err(PricingError::SupportViolation { .. })));
        // moment reconstruction for {0.25, 1.5}
        let (p, a) = (0.25, 1.5);
        let (vp, va) = ((a - 0.5) / (a - p), (0.5 - p) / (a - p));
        close(vp * p + va * a, 0.5, 1e-15);
        close(vp * p * p + va * a * a, 0.5, 1e-15);
        let deg = MarketInfo::variance(0.5, 0.0, 1.0).unwrap();
        close(deg.alpha_of_p(0.499).unwrap(), 0.5, 0.0);
    }

    #[test]
    fn alpha_hits_thresholds() {
        let m = MarketInfo::power(0.7, 0.7f64.powf(1.7) * 1.4, 1.7, 2.0).unwrap();
        close(m.alpha_of_p(m.tau1()).unwrap(), 2.0, 1e-8);
        close(m.alpha_of_p(0.0).unwrap(), m.tau2(), 1e-8);
    }

    #[test]
    fn shift_examples() {
        let m = MarketInfo::variance(0.5, 0.3, 1.2).unwrap();
        let id = m.shift_unit_cost(0.0).unwrap();
        assert_eq!((id.mu_shift, id.beta_shift, id.lower_shift), (0.5, 1.2, 0.0));
        let sh = m.shift_unit_cost(0.1).unwrap();
        close(sh.mu_shift, 0.4, 1e-15);
        close(sh.beta_shift, 1.1, 1e-15);
        close(sh.lower_shift, -0.1, 0.0);
        close(sh.phi_shift(0.4).unwrap(), 0.25, 1e-15);
        assert!(matches!(m.shift_unit_cost(0.5), Err(PricingError::InvalidCost { .. })));
    }

    #[test]
    fn scaling_examples() {
        let (m, k) = MarketInfo::variance(0.5, 0.3, 1.0).unwrap().scale_to_unit_mean().unwrap();
        assert_eq!(k, 0.5);
        close(m.mu(), 1.0, 0.0);
        close(m.sigma().unwrap(), 0.6, 1e-15);
        close(m.beta(), 2.0, 0.0);
        let (m, _) = MarketInfo::power(2.0, 8.0, 1.5, 4.0).unwrap().scale_to_unit_mean().unwrap();
        close(m.s(), 8.0 / 2f64.powf(1.5), 1e-14);
        close(m.beta(), 2.0, 0.0);
        let (m, k) = MarketInfo::variance(1.0, 0.4, 3.0).unwrap().scale_to_unit_mean().unwrap();
        assert_eq!(k, 1.0);
        close(m.sigma().unwrap(), 0.4, 1e-16);
        let custom = MarketInfo::new(
            0.5,
            1.2,
            1.5,
            DispersionMeasure::custom("cosh", f64::cosh, f64::sinh),
            DispersionMode::Exact,
        )
        .unwrap();
        assert!(matches!(custom.scale_to_unit_mean(), Err(PricingError::UnsupportedScaling)));
    }

    #[test]
    fn custom_measure_thresholds() {
        // cosh: phi(0) = 1, thresholds via root finding only
        let m = MarketInfo::new(
            0.5,
            1.2,
            1.5,
            DispersionMeasure::custom("cosh", f64::cosh, f64::sinh),
            DispersionMode::Exact,
        )
        .unwrap();
        let t2 = m.tau2();
        close((t2.cosh() - 1.0) / t2, (1.2 - 1.0) / 0.5, 1e-12);
        let t1 = m.tau1();
        let h = t1.cosh() * (1.5 - 0.5) / (1.5 - t1) + 1.5f64.cosh() * (0.5 - t1) / (1.5 - t1);
        close(h, 1.2, 1e-12);
    }
}
