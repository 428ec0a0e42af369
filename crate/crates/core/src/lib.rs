//! Robust fixed pricing when only the mean, a convex dispersion statistic and
//! the maximum of the buyer's valuation are known.
//!
//! The seller posts a single price `p`. Nature picks the valuation
//! distribution from the ambiguity set of all distributions on `[0, beta]`
//! with mean `mu` and `E[phi(X)] = s`. This crate computes
//!
//! * tight tail and conditional-expectation bounds over that set ([`bounds`]),
//! * the extremal two- and three-point distributions attaining them ([`extremal`]),
//! * the worst-case competitive ratio and revenue of a price ([`ratio`]),
//! * the prices maximizing either objective ([`optimizer`]),
//! * and a brute-force enumeration that checks all of the above ([`oracle`]).
//!
//! ```
//! use robustprice::{optimizer, MarketInfo};
//!
//! let sol = optimizer::optimal_price_variance(0.5, 0.3, 1.0).unwrap();
//! assert!((sol.price - 0.2967).abs() < 1e-4);
//! assert!((sol.value - 0.3147).abs() < 1e-4);
//!
//! let market = MarketInfo::variance(0.5, 0.5, 1.2).unwrap();
//! let r = robustprice::ratio::worst_case_cr(&market, 0.6).unwrap();
//! assert!((r.cr - 0.5).abs() < 1e-12);
//! ```

// NaN must fail range checks, so negated comparisons are deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ambiguity;
pub mod bounds;
pub mod dispersion;
pub mod error;
pub mod extremal;
pub mod optimizer;
pub mod oracle;
pub mod ratio;
pub mod roots;
pub mod suite;

pub use ambiguity::{DispersionMode, Feasibility, MarketInfo, ShiftedProblem};
pub use bounds::{Regime, TailBounds};
pub use dispersion::{CustomMeasure, DispersionMeasure};
pub use error::{PricingError, Result};
pub use extremal::DiscreteDistribution;
pub use optimizer::{PriceRegime, PriceSolution};
pub use ratio::{BindingTerm, RatioBreakdown};
