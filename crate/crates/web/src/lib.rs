//! WebAssembly bindings behind the demo page in `www/`.
//!
//! Every export takes plain numbers and returns a JSON string; the page
//! parses it and draws on a canvas. `beta` may be `Infinity`.

use robustprice::extremal::worst_case_distribution;
use robustprice::optimizer::{optimal_price_revenue_variance, optimal_price_variance, sigma_star};
use robustprice::ratio::{worst_case_cr, worst_case_revenue};
use robustprice::{bounds, MarketInfo};
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Debug, Serialize)]
pub struct Curve {
    pub prices: Vec<f64>,
    pub ratios: Vec<f64>,
    pub revenues: Vec<f64>,
    pub best_price: f64,
    pub best_value: f64,
    pub best_label: &'static str,
    pub tau1: f64,
    pub tau2: f64,
}

/// Worst-case ratio and revenue over `points` prices up to the cap (or up to
/// twice the right threshold when there is none).
pub fn curve(mu: f64, sigma: f64, beta: f64, points: usize) -> Result<Curve, String> {
    let m = MarketInfo::variance(mu, sigma, beta).map_err(|e| e.to_string())?;
    let best = optimal_price_variance(mu, sigma, beta).map_err(|e| e.to_string())?;
    let top = if beta.is_finite() { beta } else { 2.0 * m.tau2() };
    let points = points.clamp(2, 2000);
    let mut c = Curve {
        prices: Vec::with_capacity(points),
        ratios: Vec::with_capacity(points),
        revenues: Vec::with_capacity(points),
        best_price: best.price,
        best_value: best.value,
        best_label: best.label,
        tau1: m.tau1(),
        tau2: m.tau2(),
    };
    for i in 1..=points {
        let p = top * i as f64 / points as f64;
        c.prices.push(p);
        c.ratios.push(worst_case_cr(&m, p).map_err(|e| e.to_string())?.cr);
        c.revenues.push(worst_case_revenue(&m, p).map_err(|e| e.to_string())?);
    }
    Ok(c)
}

#[derive(Debug, Serialize)]
pub struct Sweep {
    pub sigma: Vec<f64>,
    pub price: Vec<f64>,
    pub value: Vec<f64>,
    pub price_rev: Vec<f64>,
    pub value_rev: Vec<f64>,
    pub sigma_star: Option<f64>,
}

/// Ratio- and revenue-optimal prices as the standard deviation runs over
/// its feasible range.
pub fn sweep(mu: f64, beta: f64, points: usize) -> Result<Sweep, String> {
    if !(mu > 0.0 && beta > mu) {
        return Err(format!("need 0 < mu < beta, got mu = {mu}, beta = {beta}"));
    }
    let top = if beta.is_finite() { (mu * (beta - mu)).sqrt() } else { 2.0 * mu };
    let points = points.clamp(2, 1000);
    let mut s = Sweep {
        sigma: Vec::new(),
        price: Vec::new(),
        value: Vec::new(),
        price_rev: Vec::new(),
        value_rev: Vec::new(),
        sigma_star: sigma_star(mu, beta).ok(),
    };
    for i in 0..points {
        let sigma = top * i as f64 / (points - 1) as f64;
        let cr = optimal_price_variance(mu, sigma, beta).map_err(|e| e.to_string())?;
        let rev = optimal_price_revenue_variance(mu, sigma, beta).map_err(|e| e.to_string())?;
        s.sigma.push(sigma);
        s.price.push(cr.price);
        s.value.push(cr.value);
        s.price_rev.push(rev.price);
        s.value_rev.push(rev.value);
    }
    Ok(s)
}

#[derive(Debug, Serialize)]
pub struct Worst {
    pub supports: Vec<f64>,
    pub masses: Vec<f64>,
    pub cr: f64,
    pub revenue: f64,
    pub regime: &'static str,
}

/// The distribution that minimizes both objectives at price `p`.
pub fn worst(mu: f64, sigma: f64, beta: f64, p: f64) -> Result<Worst, String> {
    let m = MarketInfo::variance(mu, sigma, beta).map_err(|e| e.to_string())?;
    let regime = bounds::regime(&m, p).map_err(|e| e.to_string())?;
    let eps = 1e-9 * if beta.is_finite() { beta } else { m.tau2() };
    let d = worst_case_distribution(&m, p, eps).map_err(|e| e.to_string())?;
    Ok(Worst {
        cr: d.competitive_ratio(p),
        revenue: d.revenue(p),
        supports: d.supports().to_vec(),
        masses: d.masses().to_vec(),
        regime: regime.label(),
    })
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsValue> {
    r.and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string())).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = ratioCurve)]
pub fn ratio_curve(mu: f64, sigma: f64, beta: f64, points: usize) -> Result<String, JsValue> {
    to_js(curve(mu, sigma, beta, points))
}

#[wasm_bindgen(js_name = sigmaSweep)]
pub fn sigma_sweep(mu: f64, beta: f64, points: usize) -> Result<String, JsValue> {
    to_js(sweep(mu, beta, points))
}

#[wasm_bindgen(js_name = worstCase)]
pub fn worst_case(mu: f64, sigma: f64, beta: f64, p: f64) -> Result<String, JsValue> {
    to_js(worst(mu, sigma, beta, p))
}
