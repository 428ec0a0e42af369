//! Self-verification: reproduces the reference price tables and runs the
//! randomized cross-checks between the closed forms, the brute-force oracle
//! and the dual certificates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::ambiguity::MarketInfo;
use crate::bounds;
use crate::error::Result;
use crate::optimizer::{
    compare_prices, delta_star, optimal_price_power, optimal_price_variance_with, sigma_star, LowPriceFormula,
};
use crate::oracle::{self, CertificateOutcome, TailTarget};
use crate::ratio::{worst_case_cr, worst_case_cr_power, worst_case_cr_variance};

/// Reference rows `(sigma, price, ratio)` for `mu = 0.5`, `beta = 1`.
pub const SIGMA_SWEEP_CAPPED: [(f64, f64, f64); 11] = [
    (0.00, 0.5000, 1.0000),
    (0.05, 0.4076, 0.7734),
    (0.10, 0.3672, 0.6382),
    (0.15, 0.3404, 0.5310),
    (0.20, 0.3213, 0.4439),
    (0.25, 0.3073, 0.3728),
    (0.30, 0.2967, 0.3147),
    (0.35, 0.3725, 0.3524),
    (0.40, 0.4763, 0.4763),
    (0.45, 0.6406, 0.6406),
    (0.50, 1.0000, 1.0000),
];

/// Reference rows `(sigma, price, ratio)` for the price chosen without a
/// cap, `mu = 0.5`. The ratio is that of the uncapped price in the market
/// capped at `beta = 1`.
pub const SIGMA_SWEEP_UNCAPPED: [(f64, f64, f64); 11] = [
    (0.00, 0.5000, 1.0000),
    (0.05, 0.4076, 0.7734),
    (0.10, 0.3672, 0.6382),
    (0.15, 0.3404, 0.5310),
    (0.20, 0.3213, 0.4439),
    (0.25, 0.3073, 0.3728),
    (0.30, 0.2967, 0.3147),
    (0.35, 0.2886, 0.2886),
    (0.40, 0.2823, 0.2823),
    (0.45, 0.2773, 0.2773),
    (0.50, 0.2733, 0.2733),
];

/// Reference rows `(mu, beta, label, price, ratio)` for `sigma = 0.5`.
pub const BETA_SWEEP: [(f64, f64, &str, f64, f64); 17] = [
    (0.5, 1.0, "p_h1", 1.0000, 1.0000),
    (0.5, 1.1, "p_h1", 0.7146, 0.6496),
    (0.5, 1.2, "p_h1", 0.6000, 0.5000),
    (0.5, 1.3, "p_h1", 0.5077, 0.3906),
    (0.5, 1.4, "p_h2", 0.5000, 0.3086),
    (0.5, 1.5, "p_h2", 0.5000, 0.2500),
    (0.5, 1.6, "p_h2", 0.5000, 0.2066),
    (0.5, 1.8, "p_l", 0.2733, 0.1705),
    (0.5, 2.0, "p_l", 0.2733, 0.1705),
    (0.5, f64::INFINITY, "p_l", 0.2733, 0.1705),
    (1.0, 1.3, "p_h1", 1.0188, 0.7837),
    (1.0, 1.4, "p_h1", 0.8606, 0.6147),
    (1.0, 1.5, "p_h1", 0.7500, 0.5000),
    (1.0, 1.6, "p_h1", 0.6565, 0.4103),
    (1.0, 1.8, "p_l", 0.6145, 0.3728),
    (1.0, 2.0, "p_l", 0.6145, 0.3728),
    (1.0, f64::INFINITY, "p_l", 0.6145, 0.3728),
];

/// Tolerance for the four-decimal reference tables.
pub const TABLE_TOL: f64 = 5e-4;

/// One line of the verification summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRow {
    pub name: &'static str,
    pub instances: usize,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckRow {
    fn new(name: &'static str, instances: usize, max_deviation: f64, tolerance: f64) -> Self {
        CheckRow { name, instances, max_deviation, tolerance, passed: max_deviation <= tolerance }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SuiteConfig {
    pub trials: usize,
    pub grid: usize,
    pub seed: u64,
    pub formula: LowPriceFormula,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig { trials: 50, grid: 201, seed: 7, formula: LowPriceFormula::Stationary }
    }
}

/// A random feasible mean/variance market and a price.
#[derive(Debug, Clone, Copy)]
pub struct Instance {
    pub mu: f64,
    pub sigma: f64,
    pub beta: f64,
    pub p: f64,
}

impl Instance {
    pub fn market(&self) -> MarketInfo {
        MarketInfo::variance(self.mu, self.sigma, self.beta).expect("sampled markets are feasible")
    }
}

/// Samples a market with `mu` in `[0.2, 2]`, `beta / mu` in `[1.2, 4]` and
/// `sigma` strictly inside its feasible range, and a price in
/// `(0, 1.1 tau2] ∩ (0, beta]`.
pub fn random_instance(rng: &mut ChaCha8Rng) -> Instance {
    let mu: f64 = rng.random_range(0.2..2.0);
    let beta: f64 = mu * rng.random_range(1.2..4.0);
    let sigma = rng.random_range(0.05..0.95) * (mu * (beta - mu)).sqrt();
    let t2 = mu + sigma * sigma / mu;
    let p = (rng.random_range(0.02..1.1) * t2).min(beta);
    Instance { mu, sigma, beta, p }
}

/// Price inside the requested regime of `market`.
pub fn price_in_regime(market: &MarketInfo, regime: bounds::Regime, u: f64) -> f64 {
    let (t1, t2, beta) = (market.tau1(), market.tau2(), market.beta());
    match regime {
        bounds::Regime::LowTwoPoint => t1 * (0.02 + 0.96 * u),
        bounds::Regime::MidThreePoint => t1 + (t2 - t1) * (0.02 + 0.96 * u),
        bounds::Regime::AboveTau2 => t2 + (beta - t2) * (0.02 + 0.96 * u),
    }
}

/// Worst deviation of `solve` from a reference sweep.
pub fn table_deviation<F>(rows: &[(f64, f64, f64)], mut solve: F) -> f64
where
    F: FnMut(f64) -> Option<(f64, f64)>,
{
    rows.iter()
        .map(|&(sigma, price, value)| match solve(sigma) {
            Some((p, v)) => (p - price).abs().max((v - value).abs()),
            None => f64::INFINITY,
        })
        .fold(0.0, f64::max)
}

/// Capped sweep at `mu = 0.5`, `beta = 1`.
pub fn check_sigma_sweep(formula: LowPriceFormula) -> CheckRow {
    let dev = table_deviation(&SIGMA_SWEEP_CAPPED, |sigma| {
        optimal_price_variance_with(0.5, sigma, 1.0, formula).ok().map(|s| (s.price, s.value))
    });
    let dev_uncapped = table_deviation(&SIGMA_SWEEP_UNCAPPED, |sigma| {
        let s = optimal_price_variance_with(0.5, sigma, f64::INFINITY, formula).ok()?;
        let capped = worst_case_cr_variance(0.5, sigma, 1.0, s.price).ok()?;
        Some((s.price, capped.cr))
    });
    CheckRow::new("sigma_sweep_table", 22, dev.max(dev_uncapped), TABLE_TOL)
}

/// Beta sweep at `sigma = 0.5` including the winning candidate label.
pub fn check_beta_sweep(formula: LowPriceFormula) -> CheckRow {
    let mut dev = 0.0f64;
    for &(mu, beta, label, price, value) in &BETA_SWEEP {
        match optimal_price_variance_with(mu, 0.5, beta, formula) {
            Ok(s) if s.label == label => {
                dev = dev.max((s.price - price).abs()).max((s.value - value).abs());
            }
            _ => dev = f64::INFINITY,
        }
    }
    CheckRow::new("beta_sweep_table", BETA_SWEEP.len(), dev, TABLE_TOL)
}

pub fn check_sigma_star() -> CheckRow {
    let dev = sigma_star(0.5, 1.0).map_or(f64::INFINITY, |s| (s - 0.3194).abs());
    CheckRow::new("sigma_star", 1, dev, 1e-3)
}

/// Oracle upper bounds the closed-form ratio from above, within 0.02.
/// Returns the row plus per-instance deviations.
pub fn check_oracle_sandwich(trials: usize, grid: usize, seed: u64) -> Result<(CheckRow, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut devs = Vec::with_capacity(trials);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let inst = random_instance(&mut rng);
        let m = inst.market();
        let closed = worst_case_cr(&m, inst.p)?.cr;
        let found = oracle::oracle_worst_case_cr(&m, inst.p, grid)?.value;
        let d = found - closed;
        devs.push(d);
        // below the closed form is a hard failure; above is grid error
        worst = worst.max(if d < -1e-9 { f64::INFINITY } else { d });
    }
    Ok((CheckRow::new("oracle_sandwich", trials, worst, 0.02), devs))
}

/// Certificates for both tails in all three regimes.
pub fn check_certificates(trials: usize, seed: u64) -> Result<CheckRow> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xce27);
    let regimes = [bounds::Regime::LowTwoPoint, bounds::Regime::MidThreePoint, bounds::Regime::AboveTau2];
    let mut worst = 0.0f64;
    let mut count = 0;
    for _ in 0..trials {
        let m = random_instance(&mut rng).market();
        for regime in regimes {
            let p = price_in_regime(&m, regime, rng.random_range(0.0..1.0));
            for target in [TailTarget::SupTail, TailTarget::InfTail] {
                count += 1;
                match oracle::verify_dual_certificate(&m, p, target, 2001)? {
                    CertificateOutcome::Checked(r) => {
                        let dev = r.max_violation.max(r.slackness_gap).max((r.dual_objective - r.primal_bound).abs());
                        worst = worst.max(if r.regime == regime { dev } else { f64::INFINITY });
                    }
                    CertificateOutcome::DegenerateSkip => {}
                }
            }
        }
    }
    Ok(CheckRow::new("dual_certificates", count, worst, oracle::CERT_TOL))
}

/// Largest distance between matched atoms of two witnesses, or infinity if
/// their atom counts differ.
pub fn witness_distance(a: &[f64], b: &[f64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// The ratio-minimizing and revenue-minimizing oracle witnesses coincide.
pub fn check_witness_agreement(trials: usize, grid: usize, seed: u64) -> Result<CheckRow> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x3a3a);
    let mut worst = 0.0f64;
    let mut count = 0;
    let mut spacing = 0.0f64;
    while count < trials {
        let inst = random_instance(&mut rng);
        let m = inst.market();
        if inst.p > m.tau2() {
            continue;
        }
        count += 1;
        let cr = oracle::oracle_worst_case_cr(&m, inst.p, grid)?;
        let rev = oracle::oracle_worst_case_rev(&m, inst.p, grid)?;
        let h = m.beta() / (grid - 1) as f64;
        spacing = spacing.max(h);
        worst = worst.max(witness_distance(cr.witness.supports(), rev.witness.supports()) / h);
    }
    // measured in grid spacings
    Ok(CheckRow::new("witness_agreement", count, worst, 1.0))
}

/// Best-case revenue is non-decreasing up to the right threshold.
pub fn check_best_case_monotone(markets: usize, points: usize, seed: u64) -> Result<CheckRow> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6060);
    let mut worst = 0.0f64;
    for k in 0..markets {
        let inst = random_instance(&mut rng);
        let m = if k % 2 == 0 {
            inst.market()
        } else {
            let q = rng.random_range(1.2..3.0);
            let lo = inst.mu.powf(q);
            let hi = inst.mu * inst.beta.powf(q - 1.0);
            MarketInfo::power(inst.mu, lo + rng.random_range(0.05..0.95) * (hi - lo), q, inst.beta)?
        };
        let t2 = m.tau2();
        let mut prev = 0.0;
        for i in 1..=points {
            let p = (t2 * i as f64 / points as f64).min(t2);
            let g = bounds::best_case_revenue(&m, p)?;
            worst = worst.max(prev - g);
            prev = g;
        }
    }
    Ok(CheckRow::new("best_case_monotone", markets, worst, 1e-12))
}

/// Power path with `q = 2` against the variance closed forms, and the
/// general decomposition against both.
pub fn check_square_equivalence() -> Result<CheckRow> {
    let (mu, beta) = (0.5, 1.0);
    let mut price_dev = 0.0f64;
    let mut ratio_dev = 0.0f64;
    for &(sigma, _, _) in &SIGMA_SWEEP_CAPPED {
        let s = mu * mu + sigma * sigma;
        let v = optimal_price_variance_with(mu, sigma, beta, LowPriceFormula::Stationary)?;
        let q = optimal_price_power(mu, s, 2.0, beta)?;
        price_dev = price_dev.max((v.price - q.price).abs()).max((v.value - q.value).abs());
        if sigma == 0.0 {
            continue;
        }
        let general = MarketInfo::power(mu, s, 2.0, beta)?;
        for i in 1..=200 {
            let p = beta * i as f64 / 200.0;
            let a = worst_case_cr_variance(mu, sigma, beta, p)?.cr;
            let b = worst_case_cr_power(mu, s, 2.0, beta, p)?.cr;
            let c = worst_case_cr(&general, p)?.cr;
            ratio_dev = ratio_dev.max((a - c).abs()).max((b - c).abs());
        }
    }
    let mut row = CheckRow::new("square_equivalence", SIGMA_SWEEP_CAPPED.len(), price_dev, 1e-8);
    row.passed &= ratio_dev <= 1e-10;
    Ok(row)
}

/// Revenue-optimal prices bracket the ratio-optimal prices away from the
/// thresholds. Returns the number of instances checked on each side.
pub fn check_price_ordering(trials: usize, seed: u64) -> Result<CheckRow> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x0d0d);
    let mut low = 0;
    let mut high = 0;
    let mut failures = 0;
    let mut attempts = 0;
    while (low < trials || high < trials) && attempts < 100 * trials {
        attempts += 1;
        let mu: f64 = rng.random_range(0.2..2.0);
        let beta: f64 = mu * rng.random_range(1.2..4.0);
        let (Ok(ss), Ok(ds)) = (sigma_star(mu, beta), delta_star(mu, beta)) else {
            failures += 1;
            continue;
        };
        let smax = (mu * (beta - mu)).sqrt();
        let want_low = low < trials && (high >= trials || rng.random_bool(0.5));
        let sigma = if want_low {
            ss.min(ds) * rng.random_range(0.02..1.0)
        } else {
            let a = ss.max(ds);
            a + (smax - a) * rng.random_range(0.0..0.98)
        };
        let o = compare_prices(mu, sigma, beta)?;
        if want_low {
            low += 1;
            failures += usize::from(!(o.low_applies && o.low_ordered));
        } else {
            high += 1;
            failures += usize::from(!(o.high_applies && o.high_ordered));
        }
    }
    Ok(CheckRow::new("price_ordering", low + high, failures as f64, 0.0))
}

/// Runs every check. The oracle-based checks scale with `trials` and
/// `grid`.
pub fn run(config: &SuiteConfig) -> Result<Vec<CheckRow>> {
    let mut rows = vec![check_sigma_sweep(config.formula), check_beta_sweep(config.formula), check_sigma_star()];
    rows.push(check_oracle_sandwich(config.trials, config.grid, config.seed)?.0);
    rows.push(check_certificates(config.trials, config.seed)?);
    rows.push(check_witness_agreement(config.trials, config.grid, config.seed)?);
    rows.push(check_best_case_monotone(config.trials, 10_000, config.seed)?);
    rows.push(check_square_equivalence()?);
    rows.push(check_price_ordering(config.trials, config.seed)?);
    Ok(rows)
}
