//! `robustprice`: robust fixed prices from the command line.
//!
//! Single-shot commands print one JSON object; `sweep` and `verify` write
//! CSV. Exit codes: 1 bad usage, 2 infeasible or invalid market, 3 output
//! not writable, 4 verification failure.

mod market;
mod output;
mod sweep;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::info;
use robustprice::extremal::worst_case_distribution;
use robustprice::optimizer::{compare_prices, LowPriceFormula};
use robustprice::suite::{self, SuiteConfig};
use robustprice::{bounds, ratio, DispersionMode, PricingError};
use serde_json::{json, Value};

use market::{MarketArgs, ObjectiveArg};
use output::{csv_text, emit, emit_json};

#[derive(Debug, Parser)]
#[command(name = "robustprice", version, about = "Robust fixed pricing under moment information")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    market: MarketArgs,
    /// Write the result here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for randomized checks.
    #[arg(long, global = true, default_value_t = 7)]
    seed: u64,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Optimal robust price.
    Price,
    /// Worst-case competitive ratio of a price.
    Cr {
        #[arg(long)]
        p: f64,
    },
    /// Tight tail and conditional-expectation bounds at a price.
    Bounds {
        #[arg(long)]
        p: f64,
    },
    /// Worst-case distribution at a price.
    Dist {
        #[arg(long)]
        p: f64,
        /// Offset of the left limit; defaults to 1e-9 times the cap.
        #[arg(long)]
        eps: Option<f64>,
    },
    /// Optimal prices over a range of one parameter, as CSV.
    Sweep(sweep::SweepArgs),
    /// Run the verification suite.
    Verify {
        #[arg(long, default_value_t = 50)]
        trials: usize,
        #[arg(long, default_value_t = 201)]
        grid: usize,
    },
    /// Ratio-optimal against revenue-optimal prices (variance markets).
    Compare,
}

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Pricing(PricingError),
    Io(String),
    Verify,
}

impl From<PricingError> for Failure {
    fn from(e: PricingError) -> Self {
        Failure::Pricing(e)
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Pricing(_) => 2,
            Failure::Io(_) => 3,
            Failure::Verify => 4,
        }
    }

    fn report(&self) {
        match self {
            Failure::Usage(msg) => eprintln!("error: {msg}"),
            Failure::Pricing(e) => eprintln!("{}", output::round_json(error_json(e))),
            Failure::Io(msg) => eprintln!("error: cannot write output: {msg}"),
            Failure::Verify => eprintln!("error: verification failed"),
        }
    }
}

fn error_kind(e: &PricingError) -> String {
    let dbg = format!("{e:?}");
    let name = dbg.split(|c: char| !c.is_alphanumeric()).next().unwrap_or("Error");
    let mut out = String::new();
    for (i, c) in name.chars().enumerate() {
        if c.is_uppercase() && i > 0 {
            out.push('_');
        }
        out.push(c.to_ascii_lowercase());
    }
    out
}

fn error_json(e: &PricingError) -> Value {
    let mut v = json!({ "error": error_kind(e), "message": e.to_string() });
    if let PricingError::Infeasible { tau2, beta } = e {
        v["tau2"] = json!(tau2);
        v["beta"] = market::beta_json(*beta);
    }
    v
}

fn remark_level(mode: DispersionMode) -> bool {
    mode == DispersionMode::UpperBound
}

fn solution_json(sol: &robustprice::PriceSolution) -> Value {
    serde_json::to_value(sol).unwrap_or(Value::Null)
}

fn run(cli: Cli) -> Result<(), Failure> {
    let out = cli.out.as_deref();
    match cli.command {
        Command::Price => {
            let spec = cli.market.spec()?;
            info!("price for {:?}", spec);
            let revenue = cli.market.objective == ObjectiveArg::Rev;
            let mut v = solution_json(&spec.solve(revenue)?);
            if cli.market.objective == ObjectiveArg::Both {
                v["revenue"] = solution_json(&spec.solve(true)?);
            }
            v["market"] = spec.to_json();
            emit_json(v, out)
        }
        Command::Cr { p } => {
            let spec = cli.market.spec()?;
            let m = spec.market()?;
            let mut v = serde_json::to_value(ratio::worst_case_cr(&m, p)?).unwrap_or(Value::Null);
            v["revenue"] = json!(ratio::worst_case_revenue(&m, p)?);
            v["remark_level"] = json!(remark_level(spec.mode));
            v["market"] = spec.to_json();
            emit_json(v, out)
        }
        Command::Bounds { p } => {
            let spec = cli.market.spec()?;
            let m = spec.market()?;
            let mut v = serde_json::to_value(bounds::tail_bounds(&m, p)?).unwrap_or(Value::Null);
            v["tau1"] = json!(m.tau1());
            v["tau2"] = json!(m.tau2());
            v["remark_level"] = json!(remark_level(spec.mode));
            v["market"] = spec.to_json();
            emit_json(v, out)
        }
        Command::Dist { p, eps } => {
            let spec = cli.market.spec()?;
            let m = spec.market()?;
            let eps = eps.unwrap_or(1e-9 * if m.beta().is_finite() { m.beta() } else { m.tau2() });
            let d = worst_case_distribution(&m, p, eps)?;
            let v = json!({
                "p": p,
                "eps": eps,
                "supports": d.supports(),
                "masses": d.masses(),
                "cr": d.competitive_ratio(p),
                "revenue": d.revenue(p),
                "market": spec.to_json(),
            });
            emit_json(v, out)
        }
        Command::Sweep(args) => {
            let spec = cli.market.spec_for_sweep(&args)?;
            let text = sweep::run(&args, &spec, cli.market.objective)?;
            emit(&text, out)
        }
        Command::Verify { trials, grid } => {
            let config = SuiteConfig {
                trials,
                grid,
                seed: cli.seed,
                formula: if cli.market.compat_printed_pl {
                    LowPriceFormula::Unsquared
                } else {
                    LowPriceFormula::Stationary
                },
            };
            info!("verify {config:?}");
            let rows = suite::run(&config)?;
            let lines: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    vec![
                        r.name.to_string(),
                        r.instances.to_string(),
                        format!("{:.6e}", r.max_deviation),
                        format!("{:.6e}", r.tolerance),
                        if r.passed { "pass" } else { "fail" }.to_string(),
                    ]
                })
                .collect();
            emit(&csv_text(&["check", "instances", "max_deviation", "tolerance", "result"], &lines)?, out)?;
            if rows.iter().all(|r| r.passed) {
                Ok(())
            } else {
                Err(Failure::Verify)
            }
        }
        Command::Compare => {
            let spec = cli.market.spec()?;
            let sigma = spec.sigma().ok_or_else(|| Failure::Usage("compare needs --phi variance".into()))?;
            let mut v = serde_json::to_value(compare_prices(spec.mu, sigma, spec.beta)?).unwrap_or(Value::Null);
            v["market"] = spec.to_json();
            emit_json(v, out)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ROBUSTPRICE_LOG", "error"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            f.report();
            ExitCode::from(f.code())
        }
    }
}
