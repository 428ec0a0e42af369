//! Brute-force checks of the closed forms.
//!
//! Any extreme point of the moment problem has at most three atoms, so
//! enumerating every feasible distribution on at most three points of a fine
//! grid gives an upper bound on each infimum that converges as the grid is
//! refined. Dual certificates give the matching lower bounds.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::cmp::Ordering;

use crate::ambiguity::{DispersionMode, MarketInfo};
use crate::bounds;
use crate::error::{PricingError, Result};
use crate::extremal::DiscreteDistribution;

/// Masses down to this (negative) value are accepted and clamped to zero.
const MASS_TOL: f64 = 1e-10;
/// Moment systems whose determinant is this small relative to the Hadamard
/// bound are skipped as numerically singular.
const SINGULAR: f64 = 1e-12;
/// Objective values closer than this count as tied.
const TIE_QUANTUM: f64 = 1e-12;
/// Tolerance of the certificate checks.
pub const CERT_TOL: f64 = 1e-9;

/// Which worst-case objective to minimize.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Goal {
    Ratio,
    Revenue,
}

/// Minimum found by the enumeration and a distribution attaining it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleResult {
    pub value: f64,
    pub witness: DiscreteDistribution,
    /// Number of feasible distributions examined.
    pub examined: usize,
}

#[derive(Debug, Clone, Copy)]
struct Atoms {
    value: f64,
    rev: f64,
    n: usize,
    x: [f64; 3],
    w: [f64; 3],
}

impl Atoms {
    // values within the quantum tie and fall back to revenue, so a ratio
    // minimizer is also revenue-minimal when the ratio has several minimizers
    fn key_cmp(&self, other: &Atoms) -> Ordering {
        quantize(self.value)
            .cmp(&quantize(other.value))
            .then(self.rev.total_cmp(&other.rev))
            .then(self.n.cmp(&other.n))
            .then_with(|| {
                for k in 0..3 {
                    let c = self.x[k].total_cmp(&other.x[k]);
                    if c != Ordering::Equal {
                        return c;
                    }
                }
                Ordering::Equal
            })
    }
}

fn quantize(v: f64) -> i64 {
    (v / TIE_QUANTUM).round() as i64
}

fn better(a: Option<(Atoms, usize)>, b: Option<(Atoms, usize)>) -> Option<(Atoms, usize)> {
    match (a, b) {
        (None, b) => b,
        (a, None) => a,
        (Some((a, na)), Some((b, nb))) => {
            let best = if b.key_cmp(&a) == Ordering::Less { b } else { a };
            Some((best, na + nb))
        }
    }
}

/// Evaluation grid: `n` uniform points on `[0, beta]` plus the price, its
/// left neighbour at distance `eps`, and the thresholds.
pub fn oracle_grid(market: &MarketInfo, p: f64, n: usize) -> Vec<f64> {
    let beta = market.beta();
    let eps = left_offset(beta, n);
    let mut g: Vec<f64> = (0..n).map(|i| beta * i as f64 / (n - 1) as f64).collect();
    g.extend([0.0, p, p - eps, market.tau1(), market.tau2().min(beta), beta]);
    g.retain(|x| (0.0..=beta).contains(x));
    g.sort_by(f64::total_cmp);
    g.dedup();
    g
}

/// Distance of the left-limit point below the price.
pub fn left_offset(beta: f64, n: usize) -> f64 {
    beta / n as f64 / 1000.0
}

fn revenue(p: f64, x: &[f64], w: &[f64]) -> f64 {
    p * x.iter().zip(w).filter(|(&xi, _)| xi >= p).map(|(_, &wi)| wi).sum::<f64>()
}

fn objective(goal: Goal, p: f64, x: &[f64], w: &[f64]) -> f64 {
    let tail = |t: f64| -> f64 { x.iter().zip(w).filter(|(&xi, _)| xi >= t).map(|(_, &wi)| wi).sum() };
    let rev = p * tail(p);
    match goal {
        Goal::Revenue => rev,
        Goal::Ratio => {
            let opt = x.iter().map(|&t| t * tail(t)).fold(0.0, f64::max);
            if opt > 0.0 {
                rev / opt
            } else {
                0.0
            }
        }
    }
}

fn clamp_masses(w: &mut [f64]) -> bool {
    if w.iter().any(|&m| !(m >= -MASS_TOL)) {
        return false;
    }
    for m in w.iter_mut() {
        if *m < 0.0 {
            *m = 0.0;
        }
    }
    let total: f64 = w.iter().sum();
    if !(total > 0.0) {
        return false;
    }
    for m in w.iter_mut() {
        *m /= total;
    }
    true
}

fn det3(c0: [f64; 3], c1: [f64; 3], c2: [f64; 3]) -> f64 {
    c0[0] * (c1[1] * c2[2] - c1[2] * c2[1]) - c1[0] * (c0[1] * c2[2] - c0[2] * c2[1])
        + c2[0] * (c0[1] * c1[2] - c0[2] * c1[1])
}

fn norm(c: [f64; 3]) -> f64 {
    (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt()
}

/// Masses on three atoms matching total mass, mean and dispersion.
fn solve_three(x: [f64; 3], f: [f64; 3], rhs: [f64; 3]) -> Option<[f64; 3]> {
    let cols = [[1.0, x[0], f[0]], [1.0, x[1], f[1]], [1.0, x[2], f[2]]];
    let d = det3(cols[0], cols[1], cols[2]);
    if !(d.abs() > SINGULAR * norm(cols[0]) * norm(cols[1]) * norm(cols[2])) {
        return None;
    }
    Some([det3(rhs, cols[1], cols[2]) / d, det3(cols[0], rhs, cols[2]) / d, det3(cols[0], cols[1], rhs) / d])
}

fn make(goal: Goal, p: f64, x: &[f64], w: &[f64]) -> Atoms {
    let mut xs = [0.0; 3];
    let mut ws = [0.0; 3];
    xs[..x.len()].copy_from_slice(x);
    ws[..w.len()].copy_from_slice(w);
    Atoms {
        value: objective(goal, p, x, w),
        rev: revenue(p, x, w),
        n: w.iter().filter(|&&m| m > 0.0).count(),
        x: xs,
        w: ws,
    }
}

fn enumerate(market: &MarketInfo, p: f64, grid_n: usize, goal: Goal) -> Result<OracleResult> {
    market.require_feasible()?;
    market.require_finite_beta("oracle enumeration")?;
    if grid_n < 21 {
        return Err(PricingError::InvalidMarket(format!("grid of {grid_n} points is below 21")));
    }
    if !(p > 0.0 && p <= market.beta()) {
        return Err(PricingError::OutOfRange { p, lo: 0.0, hi: market.beta() });
    }
    let (mu, s, beta) = (market.mu(), market.s(), market.beta());
    if market.is_degenerate() {
        let d = DiscreteDistribution::point_mass(mu);
        let value = objective(goal, p, &[mu], &[1.0]);
        return Ok(OracleResult { value, witness: d, examined: 1 });
    }
    let grid = oracle_grid(market, p, grid_n);
    let phi: Vec<f64> = grid.iter().map(|&x| market.phi(x)).collect();
    let n = grid.len();
    let upper = market.mode() == DispersionMode::UpperBound;

    // two atoms: each grid point with its exact companion
    let pairs = grid
        .par_iter()
        .filter_map(|&x| {
            if x == mu {
                return None;
            }
            let a = market.alpha_of_p(x).ok()?;
            if !(0.0..=beta).contains(&a) || a == x {
                return None;
            }
            let (lo, hi) = if x < a { (x, a) } else { (a, x) };
            let mut w = [(hi - mu) / (hi - lo), (mu - lo) / (hi - lo)];
            if !clamp_masses(&mut w) {
                return None;
            }
            Some((make(goal, p, &[lo, hi], &w), 1))
        })
        .map(Some)
        .reduce(|| None, better);

    // with an upper bound on dispersion, two-atom distributions only need to
    // match the mean
    let mean_only = if upper {
        let single = Some((make(goal, p, &[mu], &[1.0]), 1));
        (0..n)
            .into_par_iter()
            .filter(|&i| grid[i] < mu)
            .flat_map_iter(|i| {
                let (grid, phi) = (&grid, &phi);
                (i + 1..n).filter_map(move |j| {
                    let (lo, hi) = (grid[i], grid[j]);
                    if hi <= mu {
                        return None;
                    }
                    let w = [(hi - mu) / (hi - lo), (mu - lo) / (hi - lo)];
                    if w[0] * phi[i] + w[1] * phi[j] > s {
                        return None;
                    }
                    Some((make(goal, p, &[lo, hi], &w), 1))
                })
            })
            .map(Some)
            .reduce(|| None, better)
            .map_or(single, |b| better(single, Some(b)))
    } else {
        None
    };

    let triples = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut best: Option<(Atoms, usize)> = None;
            for j in i + 1..n {
                for k in j + 1..n {
                    let x = [grid[i], grid[j], grid[k]];
                    let f = [phi[i], phi[j], phi[k]];
                    let Some(mut w) = solve_three(x, f, [1.0, mu, s]) else { continue };
                    if !clamp_masses(&mut w) {
                        continue;
                    }
                    best = better(best, Some((make(goal, p, &x, &w), 1)));
                }
            }
            best
        })
        .reduce(|| None, better);

    let (best, examined) = better(better(pairs, mean_only), triples).ok_or(PricingError::InfeasibleGrid)?;
    let witness = DiscreteDistribution::new(best.x[..3].to_vec(), best.w[..3].to_vec())?;
    Ok(OracleResult { value: best.value, witness, examined })
}

/// Smallest competitive ratio of price `p` over all grid distributions with
/// at most three atoms.
pub fn oracle_worst_case_cr(market: &MarketInfo, p: f64, grid_n: usize) -> Result<OracleResult> {
    enumerate(market, p, grid_n, Goal::Ratio)
}

/// Smallest expected revenue `p * P(X >= p)` over the same distributions.
pub fn oracle_worst_case_rev(market: &MarketInfo, p: f64, grid_n: usize) -> Result<OracleResult> {
    enumerate(market, p, grid_n, Goal::Revenue)
}

/// Smallest competitive ratio among `count` random feasible distributions
/// on four atoms. A control for the three-atom reduction: it can never beat
/// the enumeration by more than the grid error.
pub fn four_point_control(market: &MarketInfo, p: f64, count: usize, seed: u64) -> Option<f64> {
    let (mu, s, beta) = (market.mu(), market.s(), market.beta());
    if market.is_degenerate() || !beta.is_finite() {
        return None;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = f64::INFINITY;
    let mut found = 0;
    for _ in 0..count * 2000 {
        if found == count {
            break;
        }
        let mut x = [0.0; 4];
        for v in x.iter_mut() {
            *v = rng.random_range(0.0..=beta);
        }
        x.sort_by(f64::total_cmp);
        let w4: f64 = rng.random_range(0.0..1.0);
        let f: Vec<f64> = x.iter().map(|&t| market.phi(t)).collect();
        let rhs = [1.0 - w4, mu - w4 * x[3], s - w4 * f[3]];
        let Some(w) = solve_three([x[0], x[1], x[2]], [f[0], f[1], f[2]], rhs) else { continue };
        if w.iter().any(|&m| m < 0.0) {
            continue;
        }
        found += 1;
        let cr = objective(Goal::Ratio, p, &x, &[w[0], w[1], w[2], w4]);
        best = best.min(cr);
    }
    (found > 0).then_some(best)
}

/// Which tail bound a certificate proves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TailTarget {
    SupTail,
    InfTail,
}

/// Direction of the pointwise inequality between `F` and the indicator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Sense {
    /// `F(x) >= 1{x >= p}`: proves an upper bound on the tail.
    DominatesIndicator,
    /// `F(x) <= 1{x > p}`: proves a lower bound on the tail.
    DominatedByIndicator,
}

/// Dual solution `F(x) = lambda0 + lambda1 x + lambda2 phi(x)` of the tail
/// moment problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DualCertificate {
    pub lambda0: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub sense: Sense,
    pub target: TailTarget,
}

impl DualCertificate {
    pub fn eval(&self, market: &MarketInfo, x: f64) -> f64 {
        self.lambda0 + self.lambda1 * x + self.lambda2 * market.phi(x)
    }

    /// Weak-duality bound `lambda0 + lambda1 mu + lambda2 s`.
    pub fn objective(&self, market: &MarketInfo) -> f64 {
        self.lambda0 + self.lambda1 * market.mu() + self.lambda2 * market.s()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificateReport {
    pub certificate: DualCertificate,
    pub regime: bounds::Regime,
    /// Largest violation of the pointwise inequality on the grid.
    pub max_violation: f64,
    pub worst_x: f64,
    /// Largest `|F - indicator|` at the atoms of the extremal distribution.
    pub slackness_gap: f64,
    pub dual_objective: f64,
    pub primal_bound: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateOutcome {
    Checked(CertificateReport),
    /// The point-mass market has nothing to certify.
    DegenerateSkip,
}

/// Builds the dual certificate for the active regime of `p`, together with
/// the atoms where it must touch the indicator.
pub fn dual_certificate(
    market: &MarketInfo,
    p: f64,
    target: TailTarget,
) -> Result<(DualCertificate, bounds::Regime, Vec<f64>)> {
    market.require_feasible()?;
    market.require_finite_beta("dual certificate")?;
    let beta = market.beta();
    if !(p > 0.0 && p <= beta) {
        return Err(PricingError::OutOfRange { p, lo: 0.0, hi: beta });
    }
    let (t1, t2) = (market.tau1(), market.tau2());
    let sense = match target {
        TailTarget::SupTail => Sense::DominatesIndicator,
        TailTarget::InfTail => Sense::DominatedByIndicator,
    };
    let cert = |l0: f64, l1: f64, l2: f64| DualCertificate { lambda0: l0, lambda1: l1, lambda2: l2, sense, target };
    let phi = |x: f64| market.phi(x);
    let regime = if p <= t1 && !market.is_saturated() {
        bounds::Regime::LowTwoPoint
    } else if p <= t2 {
        bounds::Regime::MidThreePoint
    } else {
        bounds::Regime::AboveTau2
    };
    let out = match (target, regime) {
        (TailTarget::SupTail, bounds::Regime::LowTwoPoint) => {
            let a = market.alpha_of_p(p)?;
            (cert(1.0, 0.0, 0.0), vec![p, a])
        }
        (_, bounds::Regime::MidThreePoint) => {
            let (f0, fp, fb) = (phi(0.0), phi(p), phi(beta));
            let d = beta * (f0 - fp) + p * (fb - f0);
            let c = match target {
                TailTarget::SupTail => cert(f0 * (beta - p) / d, (fb - fp) / d, (p - beta) / d),
                TailTarget::InfTail => cert(-p * f0 / d, (f0 - fp) / d, p / d),
            };
            (c, vec![0.0, p, beta])
        }
        (TailTarget::SupTail, bounds::Regime::AboveTau2) => {
            let a = market.alpha_of_p(p)?;
            let da = market.measure().dphi(a);
            let d = phi(p) - (p - a) * da - phi(a);
            (cert((a * da - phi(a)) / d, -da / d, 1.0 / d), vec![a, p])
        }
        (TailTarget::InfTail, bounds::Regime::LowTwoPoint) => {
            let a = market.alpha_of_p(p)?;
            let da = market.measure().dphi(a);
            let d = phi(p) - (p - a) * da - phi(a);
            (cert((phi(p) - p * da) / d, da / d, -1.0 / d), vec![p, a])
        }
        (TailTarget::InfTail, bounds::Regime::AboveTau2) => (cert(0.0, 0.0, 0.0), vec![0.0, t2]),
    };
    Ok((out.0, regime, out.1))
}

/// Checks the certificate for `p` on `grid_n` points of `[0, beta]`: the
/// pointwise inequality, complementary slackness at the extremal atoms, and
/// equality of the dual objective with the closed-form bound.
pub fn verify_dual_certificate(
    market: &MarketInfo,
    p: f64,
    target: TailTarget,
    grid_n: usize,
) -> Result<CertificateOutcome> {
    if market.mode() != DispersionMode::Exact {
        return Err(PricingError::ModeMismatch { expected: "exact" });
    }
    if market.is_degenerate() {
        return Ok(CertificateOutcome::DegenerateSkip);
    }
    let (c, regime, atoms) = dual_certificate(market, p, target)?;
    let beta = market.beta();
    let indicator = |x: f64| -> f64 {
        match target {
            TailTarget::SupTail => f64::from(u8::from(x >= p)),
            TailTarget::InfTail => f64::from(u8::from(x > p)),
        }
    };
    let n = grid_n.max(2);
    let mut max_violation = 0.0f64;
    let mut worst_x = 0.0;
    let points = (0..n).map(|i| beta * i as f64 / (n - 1) as f64).chain(atoms.iter().copied());
    for x in points {
        let gap = c.eval(market, x) - indicator(x);
        let violation = match target {
            TailTarget::SupTail => -gap,
            TailTarget::InfTail => gap,
        };
        if violation > max_violation {
            max_violation = violation;
            worst_x = x;
        }
    }
    let slackness_gap = atoms.iter().map(|&x| (c.eval(market, x) - indicator(x)).abs()).fold(0.0, f64::max);
    let dual_objective = c.objective(market);
    let primal_bound = match target {
        TailTarget::SupTail => bounds::sup_tail(market, p)?,
        TailTarget::InfTail => bounds::inf_tail(market, p)?,
    };
    let passed =
        max_violation <= CERT_TOL && slackness_gap <= CERT_TOL && (dual_objective - primal_bound).abs() <= CERT_TOL;
    Ok(CertificateOutcome::Checked(CertificateReport {
        certificate: c,
        regime,
        max_violation,
        worst_x,
        slackness_gap,
        dual_objective,
        primal_bound,
        passed,
    }))
}
