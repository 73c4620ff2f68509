//! Browser bindings: the support staircase, a full solve and a risk-aversion
//! sweep, each taking and returning JSON strings.

use kelly_support::market::Market;
use kelly_support::support::{simultaneous_support, single_event_support, threshold};
use kelly_support::{fixed_support_solve, SolverConfig, Utility};
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Debug, Serialize)]
pub struct Step {
    pub label: String,
    pub edge_ratio: f64,
    /// (1 − P)/(1 − Q) of the prefix before this outcome; absent when Q ≥ 1.
    pub threshold_before: Option<f64>,
    pub active: bool,
}

#[derive(Debug, Serialize)]
pub struct Staircase {
    pub event: String,
    pub k: usize,
    pub steps: Vec<Step>,
}

#[derive(Debug, Serialize)]
pub struct Stake {
    pub event: String,
    pub outcome: String,
    pub g: f64,
}

#[derive(Debug, Serialize)]
pub struct Solution {
    pub utility: String,
    pub cash: f64,
    pub lambda: f64,
    pub objective: f64,
    pub converged: bool,
    pub wagers: Vec<Stake>,
    pub active: Vec<Vec<String>>,
}

#[derive(Debug, Serialize)]
pub struct SweepPoint {
    pub gamma: f64,
    pub cash: f64,
    pub wagers: Vec<Stake>,
    pub active: Vec<Vec<String>>,
}

#[derive(Debug, Serialize)]
pub struct Sweep {
    pub points: Vec<SweepPoint>,
    /// Whether every point bet on the same outcomes.
    pub support_constant: bool,
}

fn parse_market(text: &str) -> Result<Market, String> {
    let market = Market::from_json(text).map_err(|e| format!("invalid market JSON: {e}"))?;
    let report = market.validate();
    if let Some(e) = report.errors().next() {
        return Err(format!("{}: {}", e.event.as_deref().unwrap_or("market"), e.message));
    }
    Ok(market)
}

fn stakes(market: &Market, wagers: &[Vec<f64>]) -> Vec<Stake> {
    market
        .events
        .iter()
        .zip(wagers)
        .flat_map(|(e, g)| {
            e.outcomes.iter().zip(g).map(|(o, &g)| Stake {
                event: e.label.clone(),
                outcome: o.label.clone(),
                g,
            })
        })
        .collect()
}

fn active_labels(market: &Market, wagers: &[Vec<f64>]) -> Vec<Vec<String>> {
    market
        .events
        .iter()
        .zip(wagers)
        .map(|(e, g)| {
            e.outcomes
                .iter()
                .zip(g)
                .filter(|(_, &g)| g > 0.0)
                .map(|(o, _)| o.label.clone())
                .collect()
        })
        .collect()
}

pub fn staircase_json(market_json: &str) -> Result<String, String> {
    let market = parse_market(market_json)?;
    let mut out = Vec::with_capacity(market.events.len());
    for event in &market.events {
        let support = single_event_support(event).map_err(|e| e.to_string())?;
        let (mut p, mut q) = (0.0, 0.0);
        let steps = support
            .order
            .iter()
            .enumerate()
            .map(|(rank, &i)| {
                let o = &event.outcomes[i];
                let step = Step {
                    label: o.label.clone(),
                    edge_ratio: o.edge_ratio(),
                    threshold_before: threshold(p, q).ok(),
                    active: rank < support.prefix.k,
                };
                p += o.p;
                q += o.price;
                step
            })
            .collect();
        out.push(Staircase {
            event: event.label.clone(),
            k: support.prefix.k,
            steps,
        });
    }
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

pub fn solve_json(market_json: &str, utility_json: &str) -> Result<String, String> {
    let market = parse_market(market_json)?;
    let utility: Utility = serde_json::from_str(utility_json).map_err(|e| format!("invalid utility JSON: {e}"))?;
    let utility = utility.canonical();
    utility.validate().map_err(|e| e.to_string())?;
    let support = simultaneous_support(&market).map_err(|e| e.to_string())?;
    let report = fixed_support_solve(&market, &support, &utility, &SolverConfig::default()).map_err(|e| e.to_string())?;
    let solution = Solution {
        utility: utility.name(),
        cash: report.cash(),
        lambda: report.lambda(),
        objective: report.objective,
        converged: report.converged,
        wagers: stakes(&market, &report.portfolio.wagers),
        active: active_labels(&market, &report.portfolio.wagers),
    };
    serde_json::to_string(&solution).map_err(|e| e.to_string())
}

pub fn sweep_json(market_json: &str, gamma_min: f64, gamma_max: f64, steps: usize) -> Result<String, String> {
    if !(gamma_min > 0.0 && gamma_max >= gamma_min && (1..=200).contains(&steps)) {
        return Err("need 0 < gamma_min <= gamma_max and 1 <= steps <= 200".into());
    }
    let market = parse_market(market_json)?;
    let support = simultaneous_support(&market).map_err(|e| e.to_string())?;
    let mut points = Vec::with_capacity(steps);
    for s in 0..steps {
        // geometric spacing so that low and high risk aversion both show up
        let t = if steps == 1 { 0.0 } else { s as f64 / (steps - 1) as f64 };
        let gamma = gamma_min * (gamma_max / gamma_min).powf(t);
        let report = fixed_support_solve(&market, &support, &Utility::crra(gamma), &SolverConfig::default())
            .map_err(|e| e.to_string())?;
        points.push(SweepPoint {
            gamma,
            cash: report.cash(),
            wagers: stakes(&market, &report.portfolio.wagers),
            active: active_labels(&market, &report.portfolio.wagers),
        });
    }
    let support_constant = points.windows(2).all(|w| w[0].active == w[1].active);
    serde_json::to_string(&Sweep {
        points,
        support_constant,
    })
    .map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn support_staircase(market_json: &str) -> Result<String, JsValue> {
    staircase_json(market_json).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn solve(market_json: &str, utility_json: &str) -> Result<String, JsValue> {
    solve_json(market_json, utility_json).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn risk_aversion_sweep(market_json: &str, gamma_min: f64, gamma_max: f64, steps: usize) -> Result<String, JsValue> {
    sweep_json(market_json, gamma_min, gamma_max, steps).map_err(|e| JsValue::from_str(&e))
}
