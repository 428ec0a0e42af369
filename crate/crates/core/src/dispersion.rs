//! Convex dispersion measures `phi` and their elementary algebra.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{PricingError, Result};

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A user-supplied strictly convex, differentiable dispersion function given
/// as a (value, derivative) pair.
#[derive(Clone)]
pub struct CustomMeasure {
    name: String,
    value: ScalarFn,
    derivative: ScalarFn,
}

impl CustomMeasure {
    pub fn new<V, D>(name: impl Into<String>, value: V, derivative: D) -> Self
    where
        V: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self { name: name.into(), value: Arc::new(value), derivative: Arc::new(derivative) }
    }

    pub fn name(&self) -> &str {
        &self.name
    }
}

impl fmt::Debug for CustomMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomMeasure").field("name", &self.name).finish()
    }
}

/// The dispersion statistic `E[phi(X)] = s` known to the seller.
///
/// `Variance` is the power family with `q = 2`; both variants evaluate with
/// the same arithmetic so they are interchangeable bit for bit. The
/// distinction only matters to code that wants the variance closed forms.
#[derive(Debug, Clone)]
pub enum DispersionMeasure {
    Power { q: f64 },
    Variance,
    Custom(CustomMeasure),
}

impl DispersionMeasure {
    /// Power moment `x^q`; requires `q > 1`.
    pub fn power(q: f64) -> Result<Self> {
        let m = DispersionMeasure::Power { q };
        m.check()?;
        Ok(m)
    }

    pub fn custom<V, D>(name: impl Into<String>, value: V, derivative: D) -> Self
    where
        V: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        DispersionMeasure::Custom(CustomMeasure::new(name, value, derivative))
    }

    pub(crate) fn check(&self) -> Result<()> {
        match self {
            DispersionMeasure::Power { q } if !(q.is_finite() && *q > 1.0) => {
                Err(PricingError::InvalidMeasure(format!("power exponent q = {q} must exceed 1")))
            }
            _ => Ok(()),
        }
    }

    /// Exponent of the power family, if this is one.
    pub fn exponent(&self) -> Option<f64> {
        match self {
            DispersionMeasure::Power { q } => Some(*q),
            DispersionMeasure::Variance => Some(2.0),
            DispersionMeasure::Custom(_) => None,
        }
    }

    pub fn is_variance(&self) -> bool {
        matches!(self, DispersionMeasure::Variance)
    }

    /// `phi(x)` without domain checks. Callers guarantee `x >= 0`.
    #[inline]
    pub(crate) fn phi(&self, x: f64) -> f64 {
        match self {
            DispersionMeasure::Variance => x * x,
            DispersionMeasure::Power { q } => powq(x, *q),
            DispersionMeasure::Custom(c) => (c.value)(x),
        }
    }

    /// `phi'(x)` without domain checks; the right limit at zero.
    #[inline]
    pub(crate) fn dphi(&self, x: f64) -> f64 {
        match self {
            DispersionMeasure::Variance => 2.0 * x,
            DispersionMeasure::Power { q } => {
                if *q == 2.0 {
                    2.0 * x
                } else if x == 0.0 {
                    0.0
                } else {
                    q * x.powf(q - 1.0)
                }
            }
            DispersionMeasure::Custom(c) => (c.derivative)(x),
        }
    }

    /// Evaluates `phi(x)` for `x >= 0`.
    pub fn eval(&self, x: f64) -> Result<f64> {
        self.check()?;
        if !(x >= 0.0) {
            return Err(PricingError::Domain { x });
        }
        Ok(self.phi(x))
    }

    /// Evaluates `phi'(x)` for `x >= 0`. At `x = 0` the right limit is
    /// returned, which is `0` for every power `q > 1`.
    pub fn derivative(&self, x: f64) -> Result<f64> {
        self.check()?;
        if !(x >= 0.0) {
            return Err(PricingError::Domain { x });
        }
        Ok(self.dphi(x))
    }

    /// Slope of the chord of `phi` between `a` and `b`.
    pub fn secant_slope(&self, a: f64, b: f64) -> Result<f64> {
        self.check()?;
        if !(a >= 0.0) {
            return Err(PricingError::Domain { x: a });
        }
        if !(b >= 0.0) {
            return Err(PricingError::Domain { x: b });
        }
        if a == b {
            return Err(PricingError::DegenerateInterval { a, b });
        }
        Ok((self.phi(b) - self.phi(a)) / (b - a))
    }

    /// Sampled check of strict convexity, nonnegativity and derivative
    /// consistency on `[0, upper]`.
    ///
    /// Custom evaluators cannot be verified symbolically, so this runs
    /// `samples` random triples from a fixed seed.
    pub fn validate_on(&self, upper: f64, samples: usize) -> Result<()> {
        self.check()?;
        if !(upper.is_finite() && upper > 0.0) {
            return Err(PricingError::InvalidMeasure(format!("validation interval [0, {upper}] must be finite")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        for _ in 0..samples {
            let mut a = rng.random_range(0.0..upper);
            let mut b = rng.random_range(0.0..upper);
            if a > b {
                std::mem::swap(&mut a, &mut b);
            }
            if b - a < 1e-6 * upper {
                continue;
            }
            let t: f64 = rng.random_range(0.05..0.95);
            let (fa, fb) = (self.phi(a), self.phi(b));
            let mid = self.phi(t * a + (1.0 - t) * b);
            let chord = t * fa + (1.0 - t) * fb;
            if !(mid < chord) {
                return Err(PricingError::InvalidMeasure(format!("not strictly convex on [{a}, {b}]")));
            }
            if !(fa >= 0.0 && fb >= 0.0) {
                return Err(PricingError::InvalidMeasure(format!("negative value on [{a}, {b}]")));
            }
            let x = 0.5 * (a + b);
            let h = 1e-6 * x.max(1.0);
            if x > h {
                let fd = (self.phi(x + h) - self.phi(x - h)) / (2.0 * h);
                let d = self.dphi(x);
                if (fd - d).abs() > 1e-5 * d.abs().max(1.0) {
                    return Err(PricingError::InvalidMeasure(format!(
                        "derivative mismatch at {x}: {d} vs finite difference {fd}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Short label used in CLI and JSON output.
    pub fn label(&self) -> String {
        match self {
            DispersionMeasure::Variance => "variance".to_string(),
            DispersionMeasure::Power { q } => format!("power:q={q}"),
            DispersionMeasure::Custom(c) => format!("custom:{}", c.name),
        }
    }
}

impl PartialEq for DispersionMeasure {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (DispersionMeasure::Variance, DispersionMeasure::Variance) => true,
            (DispersionMeasure::Power { q: a }, DispersionMeasure::Power { q: b }) => a == b,
            (DispersionMeasure::Custom(a), DispersionMeasure::Custom(b)) => Arc::ptr_eq(&a.value, &b.value),
            _ => false,
        }
    }
}

impl fmt::Display for DispersionMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Parses `variance` or `power:q=<q>`.
impl FromStr for DispersionMeasure {
    type Err = PricingError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("variance") {
            return Ok(DispersionMeasure::Variance);
        }
        let q = s
            .strip_prefix("power:")
            .and_then(|rest| rest.trim().strip_prefix("q="))
            .and_then(|q| q.trim().parse::<f64>().ok())
            .ok_or_else(|| PricingError::InvalidMeasure(format!("expected `variance` or `power:q=<q>`, got `{s}`")))?;
        DispersionMeasure::power(q)
    }
}

#[inline]
fn powq(x: f64, q: f64) -> f64 {
    if q == 2.0 {
        x * x
    } else {
        x.powf(q)
    }
}
