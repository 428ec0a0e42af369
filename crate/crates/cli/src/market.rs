use std::str::FromStr;

use clap::{Args, ValueEnum};
use robustprice::optimizer::{self, LowPriceFormula, PriceSolution};
use robustprice::{DispersionMeasure, DispersionMode, MarketInfo, PricingError};
use serde_json::{json, Value};

use crate::Failure;

/// Parses a valuation cap, accepting `inf`.
pub fn parse_beta(s: &str) -> Result<f64, String> {
    match s.trim().to_ascii_lowercase().as_str() {
        "inf" | "infinity" | "+inf" => Ok(f64::INFINITY),
        t => t.parse::<f64>().map_err(|e| format!("{s}: {e}")),
    }
}

fn parse_measure(s: &str) -> Result<DispersionMeasure, String> {
    DispersionMeasure::from_str(s).map_err(|e| e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Exact,
    UpperBound,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ObjectiveArg {
    Cr,
    Rev,
    Both,
}

/// Market parameters shared by every subcommand.
#[derive(Debug, Clone, Args)]
pub struct MarketArgs {
    /// Mean valuation.
    #[arg(long, global = true)]
    pub mu: Option<f64>,
    /// Standard deviation (variance measure only).
    #[arg(long, global = true, conflicts_with = "s")]
    pub sigma: Option<f64>,
    /// Expected dispersion E[phi(X)].
    #[arg(long, global = true)]
    pub s: Option<f64>,
    /// Maximum valuation; `inf` for none.
    #[arg(long, global = true, value_parser = parse_beta, default_value = "inf")]
    pub beta: f64,
    /// Dispersion measure: `variance` or `power:q=<q>`.
    #[arg(long, global = true, value_parser = parse_measure, default_value = "variance")]
    pub phi: DispersionMeasure,
    /// Whether the dispersion is known exactly or only bounded above.
    #[arg(long, global = true, value_enum, default_value = "exact")]
    pub mode: Mode,
    /// Objective of the price optimization.
    #[arg(long, global = true, value_enum, default_value = "cr")]
    pub objective: ObjectiveArg,
    /// Use the unsquared variant of the low-price closed form.
    #[arg(long, global = true)]
    pub compat_printed_pl: bool,
}

/// Dispersion as given on the command line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Spread {
    Sigma(f64),
    S(f64),
}

/// A fully specified market, one point of a sweep.
#[derive(Debug, Clone)]
pub struct MarketSpec {
    pub mu: f64,
    pub spread: Spread,
    pub beta: f64,
    pub phi: DispersionMeasure,
    pub mode: DispersionMode,
    pub formula: LowPriceFormula,
}

impl MarketArgs {
    pub fn spec(&self) -> Result<MarketSpec, Failure> {
        let mu = self.mu.ok_or_else(|| Failure::Usage("--mu is required".into()))?;
        let spread = match (self.sigma, self.s) {
            (Some(sigma), None) => Spread::Sigma(sigma),
            (None, Some(s)) => Spread::S(s),
            _ => return Err(Failure::Usage("exactly one of --sigma and --s is required".into())),
        };
        let spec = MarketSpec {
            mu,
            spread,
            beta: self.beta,
            phi: self.phi.clone(),
            mode: match self.mode {
                Mode::Exact => DispersionMode::Exact,
                Mode::UpperBound => DispersionMode::UpperBound,
            },
            formula: if self.compat_printed_pl { LowPriceFormula::Unsquared } else { LowPriceFormula::Stationary },
        };
        if matches!(spread, Spread::Sigma(_)) && !spec.phi.is_variance() {
            return Err(Failure::Usage("--sigma needs --phi variance; use --s".into()));
        }
        Ok(spec)
    }
}

impl MarketSpec {
    /// The standard deviation, for variance markets.
    pub fn sigma(&self) -> Option<f64> {
        if !self.phi.is_variance() {
            return None;
        }
        match self.spread {
            Spread::Sigma(s) => Some(s),
            Spread::S(s) => Some((s - self.mu * self.mu).max(0.0).sqrt()),
        }
    }

    pub fn s(&self) -> f64 {
        match self.spread {
            Spread::Sigma(sigma) => self.mu * self.mu + sigma * sigma,
            Spread::S(s) => s,
        }
    }

    pub fn market(&self) -> Result<MarketInfo, PricingError> {
        match self.sigma() {
            Some(sigma) => MarketInfo::variance_with_mode(self.mu, sigma, self.beta, self.mode),
            None => MarketInfo::new(self.mu, self.s(), self.beta, self.phi.clone(), self.mode),
        }
    }

    /// Uses the closed forms when they apply.
    fn closed_form(&self) -> bool {
        self.mode == DispersionMode::Exact
    }

    pub fn solve(&self, revenue: bool) -> Result<PriceSolution, PricingError> {
        let exact = self.closed_form();
        match (self.sigma(), self.phi.exponent(), revenue) {
            (Some(sigma), _, false) if exact => {
                optimizer::optimal_price_variance_with(self.mu, sigma, self.beta, self.formula)
            }
            (Some(sigma), _, true) if exact => optimizer::optimal_price_revenue_variance(self.mu, sigma, self.beta),
            (None, Some(q), false) if exact => optimizer::optimal_price_power(self.mu, self.s(), q, self.beta),
            (_, _, false) => optimizer::optimal_price_general(&self.market()?, 1e-10),
            (_, _, true) => optimizer::optimal_price_revenue_general(&self.market()?, 1e-10),
        }
    }

    pub fn to_json(&self) -> Value {
        json!({
            "mu": self.mu,
            "s": self.s(),
            "sigma": self.sigma(),
            "beta": beta_json(self.beta),
            "phi": self.phi.label(),
            "mode": match self.mode {
                DispersionMode::Exact => "exact",
                DispersionMode::UpperBound => "upper_bound",
            },
        })
    }
}

pub fn beta_json(beta: f64) -> Value {
    if beta.is_finite() {
        json!(beta)
    } else {
        json!("inf")
    }
}
