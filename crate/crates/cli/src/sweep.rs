use clap::{Args, ValueEnum};
use log::debug;
use rayon::prelude::*;
use robustprice::{DispersionMeasure, PriceSolution, PricingError};

use crate::market::{parse_beta, MarketArgs, MarketSpec, ObjectiveArg, Spread};
use crate::output::{csv_text, fixed};
use crate::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Param {
    Sigma,
    Beta,
    Q,
    S,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    /// Parameter to vary.
    #[arg(long, value_enum)]
    pub vary: Param,
    #[arg(long)]
    pub from: Option<f64>,
    #[arg(long)]
    pub to: Option<f64>,
    /// Number of evenly spaced points, ends included.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Explicit comma-separated values instead of a range; `inf` allowed.
    #[arg(long, value_delimiter = ',', value_parser = parse_beta, conflicts_with_all = ["from", "to", "steps"])]
    pub values: Option<Vec<f64>>,
}

impl SweepArgs {
    pub fn points(&self) -> Result<Vec<f64>, Failure> {
        if let Some(v) = &self.values {
            if v.is_empty() {
                return Err(Failure::Usage("--values is empty".into()));
            }
            return Ok(v.clone());
        }
        let (Some(from), Some(to), Some(steps)) = (self.from, self.to, self.steps) else {
            return Err(Failure::Usage("give --from, --to and --steps, or --values".into()));
        };
        if from.partial_cmp(&to) != Some(std::cmp::Ordering::Less) || steps < 2 {
            return Err(Failure::Usage("need --from < --to and --steps >= 2".into()));
        }
        let h = (to - from) / (steps - 1) as f64;
        Ok((0..steps).map(|i| if i + 1 == steps { to } else { from + h * i as f64 }).collect())
    }
}

impl MarketArgs {
    /// Market template for a sweep; the varied parameter need not be given.
    pub fn spec_for_sweep(&self, args: &SweepArgs) -> Result<MarketSpec, Failure> {
        let mut filled = self.clone();
        match args.vary {
            Param::Sigma => {
                filled.s = None;
                filled.sigma = Some(0.0);
            }
            Param::S => {
                filled.sigma = None;
                filled.s = Some(0.0);
            }
            Param::Q => {
                if self.s.is_none() {
                    return Err(Failure::Usage("a sweep over q needs --s".into()));
                }
                filled.phi = DispersionMeasure::power(2.0)?;
            }
            Param::Beta => {}
        }
        filled.spec()
    }
}

fn at(spec: &MarketSpec, param: Param, x: f64) -> Result<MarketSpec, PricingError> {
    let mut s = spec.clone();
    match param {
        Param::Sigma => s.spread = Spread::Sigma(x),
        Param::S => s.spread = Spread::S(x),
        Param::Beta => s.beta = x,
        Param::Q => s.phi = DispersionMeasure::power(x)?,
    }
    Ok(s)
}

fn infeasible(e: &PricingError) -> bool {
    matches!(
        e,
        PricingError::Infeasible { .. } | PricingError::InfeasibleDispersion { .. } | PricingError::InvalidMarket(_)
    )
}

type Row = (Option<PriceSolution>, Option<PriceSolution>);

fn solve_row(spec: &MarketSpec, param: Param, x: f64, objective: ObjectiveArg) -> Result<Row, PricingError> {
    let s = at(spec, param, x)?;
    let cr = matches!(objective, ObjectiveArg::Cr | ObjectiveArg::Both);
    let rev = matches!(objective, ObjectiveArg::Rev | ObjectiveArg::Both);
    let attempt = || -> Result<Row, PricingError> {
        Ok((if cr { Some(s.solve(false)?) } else { None }, if rev { Some(s.solve(true)?) } else { None }))
    };
    match attempt() {
        Err(e) if infeasible(&e) => {
            debug!("{x}: {e}");
            Ok((None, None))
        }
        r => r,
    }
}

/// Sweep table; rows that describe an infeasible market have empty numeric
/// fields and regime `infeasible`.
pub fn run(args: &SweepArgs, spec: &MarketSpec, objective: ObjectiveArg) -> Result<String, Failure> {
    if args.vary == Param::Sigma && !spec.phi.is_variance() {
        return Err(Failure::Usage("a sweep over sigma needs --phi variance".into()));
    }
    let points = args.points()?;
    let rows: Vec<Row> =
        points.par_iter().map(|&x| solve_row(spec, args.vary, x, objective)).collect::<Result<_, _>>()?;

    let both = objective == ObjectiveArg::Both;
    let mut header = vec!["param", "price", "regime", "value"];
    if both {
        header.extend(["price_rev", "value_rev"]);
    }
    let lines: Vec<Vec<String>> = points
        .iter()
        .zip(&rows)
        .map(|(&x, (cr, rev))| {
            let main = if objective == ObjectiveArg::Rev { rev } else { cr };
            let mut line = vec![fixed(x)];
            match main {
                Some(s) => line.extend([fixed(s.price), s.label.to_string(), fixed(s.value)]),
                None => line.extend([String::new(), "infeasible".into(), String::new()]),
            }
            if both {
                match rev {
                    Some(s) => line.extend([fixed(s.price), fixed(s.value)]),
                    None => line.extend([String::new(), String::new()]),
                }
            }
            line
        })
        .collect();
    csv_text(&header, &lines)
}
