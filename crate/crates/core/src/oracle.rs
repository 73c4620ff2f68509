//! Brute-force reference solver for small markets.
//!
//! Every outcome of every event is a decision variable; no support rule is
//! assumed. Expectations are sums over the enumerated product states, and
//! the program is solved by spectral projected-gradient ascent on the
//! cash-eliminated wagers over {g ≥ 0, Σ π g ≤ 1}. This module shares only
//! the market types and the utility closed forms with the main solver.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::market::{Market, Portfolio};
use crate::solver::SolveReport;
use crate::utility::Utility;

pub const ACTIVITY_EPS: f64 = 1e-7;
pub const DEFAULT_MAX_STATES: usize = 1_000_000;
pub const DEFAULT_SEEDS: [u64; 4] = [0x5eed_0001, 0x5eed_0002, 0x5eed_0003, 0x5eed_0004];

#[derive(Debug, Clone, PartialEq)]
pub struct OracleConfig {
    pub activity_eps: f64,
    /// Projected-gradient norm at which a run stops.
    pub tol: f64,
    pub max_iters: usize,
    pub max_states: usize,
    /// Seeds for the pseudo-random starts; the all-cash start always runs.
    pub seeds: Vec<u64>,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            activity_eps: ACTIVITY_EPS,
            tol: 1e-9,
            max_iters: 20_000,
            max_states: DEFAULT_MAX_STATES,
            seeds: DEFAULT_SEEDS.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleSolution {
    pub portfolio: Portfolio,
    pub objective: f64,
    /// Outcomes with wager above `activity_eps`, ascending, per event.
    pub support: Vec<Vec<usize>>,
    /// E[U'(W)] when cash exceeds `activity_eps`.
    pub multiplier: Option<f64>,
    /// Largest wager at or below `activity_eps`.
    pub largest_inactive: f64,
    /// Smallest wager above `activity_eps`.
    pub smallest_active: Option<f64>,
    /// Max over outcomes of the KKT violation of the reduced gradient.
    pub first_order_residual: f64,
    pub projected_gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Product states of a market, enumerated once.
pub struct StateSpace {
    pub probs: Vec<f64>,
    /// Flat outcome offsets: `columns[s * m + ℓ]` is the flat index of the
    /// outcome event ℓ takes in state s.
    pub columns: Vec<usize>,
    pub events: usize,
}

impl StateSpace {
    pub fn enumerate(market: &Market, max_states: usize) -> Result<Self> {
        let states = market.product_states();
        if states > max_states as u128 {
            return Err(Error::OracleLimit {
                states,
                limit: max_states,
            });
        }
        let m = market.events.len();
        let offsets: Vec<usize> = market
            .events
            .iter()
            .scan(0, |acc, e| {
                let o = *acc;
                *acc += e.len();
                Some(o)
            })
            .collect();
        let n_states = states as usize;
        let mut probs = Vec::with_capacity(n_states);
        let mut columns = Vec::with_capacity(n_states * m);
        let mut digits = vec![0usize; m];
        for _ in 0..n_states {
            let mut p = 1.0;
            for (l, &d) in digits.iter().enumerate() {
                p *= market.events[l].outcomes[d].p;
                columns.push(offsets[l] + d);
            }
            probs.push(p);
            for l in (0..m).rev() {
                digits[l] += 1;
                if digits[l] < market.events[l].len() {
                    break;
                }
                digits[l] = 0;
            }
        }
        Ok(Self {
            probs,
            columns,
            events: m,
        })
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn wealth(&self, state: usize, cash: f64, flat: &[f64]) -> f64 {
        let m = self.events;
        cash + self.columns[state * m..(state + 1) * m]
            .iter()
            .map(|&j| flat[j])
            .sum::<f64>()
    }

    /// E[f(W)] by direct summation over states.
    pub fn expect(&self, cash: f64, flat: &[f64], f: impl Fn(f64) -> f64) -> f64 {
        (0..self.len())
            .map(|s| self.probs[s] * f(self.wealth(s, cash, flat)))
            .sum()
    }
}

struct Problem<'a> {
    states: &'a StateSpace,
    prices: Vec<f64>,
    utility: Utility,
}

impl Problem<'_> {
    fn cash(&self, g: &[f64]) -> f64 {
        1.0 - self.prices.iter().zip(g).map(|(p, x)| p * x).sum::<f64>()
    }

    fn value(&self, g: &[f64]) -> f64 {
        let c = self.cash(g);
        let mut total = 0.0;
        for s in 0..self.states.len() {
            let w = self.states.wealth(s, c, g);
            if !(w > 0.0) {
                return f64::NEG_INFINITY;
            }
            total += self.states.probs[s] * self.utility.value(w);
        }
        total
    }

    /// Gradient of the cash-eliminated objective and E[U'(W)].
    fn gradient(&self, g: &[f64]) -> (Vec<f64>, f64) {
        let c = self.cash(g);
        let m = self.states.events;
        let mut slice = vec![0.0; g.len()];
        let mut em = 0.0;
        for s in 0..self.states.len() {
            let w = self.states.wealth(s, c, g);
            let t = self.states.probs[s] * self.utility.marginal(w);
            em += t;
            for &j in &self.states.columns[s * m..(s + 1) * m] {
                slice[j] += t;
            }
        }
        let grad = slice
            .iter()
            .zip(&self.prices)
            .map(|(s, p)| s - p * em)
            .collect();
        (grad, em)
    }

    /// Euclidean projection onto {g ≥ 0, Σ π g ≤ 1}.
    fn project(&self, y: &[f64]) -> Vec<f64> {
        let clipped: Vec<f64> = y.iter().map(|v| v.max(0.0)).collect();
        let spend = |g: &[f64]| self.prices.iter().zip(g).map(|(p, x)| p * x).sum::<f64>();
        if spend(&clipped) <= 1.0 {
            return clipped;
        }
        // g(μ) = max(y − μπ, 0); spend(g(μ)) decreases in μ.
        let shifted = |mu: f64| -> Vec<f64> {
            y.iter()
                .zip(&self.prices)
                .map(|(v, p)| (v - mu * p).max(0.0))
                .collect()
        };
        let mut lo = 0.0;
        let mut hi = y
            .iter()
            .zip(&self.prices)
            .map(|(v, p)| v / p)
            .fold(0.0, f64::max);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if spend(&shifted(mid)) > 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        shifted(hi)
    }
}

fn norm_inf(v: impl Iterator<Item = f64>) -> f64 {
    v.fold(0.0, |a, x| a.max(x.abs()))
}

struct Run {
    g: Vec<f64>,
    value: f64,
    pg_norm: f64,
    iterations: usize,
}

fn ascend(problem: &Problem, start: Vec<f64>, cfg: &OracleConfig) -> Run {
    let mut g = problem.project(&start);
    let mut value = problem.value(&g);
    let (mut grad, _) = problem.gradient(&g);
    let mut step = 1.0;
    let mut pg_norm = f64::INFINITY;
    let mut iterations = 0;
    while iterations < cfg.max_iters {
        let full: Vec<f64> = g.iter().zip(&grad).map(|(x, d)| x + d).collect();
        let pg = problem.project(&full);
        pg_norm = norm_inf(pg.iter().zip(&g).map(|(a, b)| a - b));
        if pg_norm <= cfg.tol {
            break;
        }
        iterations += 1;

        let trial: Vec<f64> = g.iter().zip(&grad).map(|(x, d)| x + step * d).collect();
        let target = problem.project(&trial);
        let dir: Vec<f64> = target.iter().zip(&g).map(|(a, b)| a - b).collect();
        let slope: f64 = dir.iter().zip(&grad).map(|(d, gr)| d * gr).sum();
        let mut t = 1.0;
        let mut next = None;
        for _ in 0..60 {
            let cand: Vec<f64> = g.iter().zip(&dir).map(|(x, d)| x + t * d).collect();
            let v = problem.value(&cand);
            if v >= value + 1e-4 * t * slope {
                next = Some((cand, v));
                break;
            }
            t *= 0.5;
        }
        let Some((cand, v)) = next else {
            break;
        };
        let (new_grad, _) = problem.gradient(&cand);
        // Barzilai–Borwein step for an ascent problem: sᵀs / (−sᵀy).
        let s: Vec<f64> = cand.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy: f64 = s
            .iter()
            .zip(new_grad.iter().zip(&grad))
            .map(|(si, (a, b))| si * (a - b))
            .sum();
        let ss: f64 = s.iter().map(|x| x * x).sum();
        step = if sy < 0.0 { (ss / -sy).clamp(1e-10, 1e10) } else { 1e3 };
        if cand == g {
            break;
        }
        g = cand;
        value = v;
        grad = new_grad;
    }
    Run {
        g,
        value,
        pg_norm,
        iterations,
    }
}

fn random_start(rng: &mut ChaCha8Rng, prices: &[f64]) -> Vec<f64> {
    let raw: Vec<f64> = prices.iter().map(|_| rng.gen::<f64>()).collect();
    let spend: f64 = raw.iter().zip(prices).map(|(x, p)| x * p).sum();
    let budget = 0.05 + 0.85 * rng.gen::<f64>();
    raw.iter().map(|x| x * budget / spend.max(1e-300)).collect()
}

/// Solves max E[U(W)] over all cash/wager portfolios by enumeration.
pub fn oracle_solve(market: &Market, utility: &Utility, cfg: &OracleConfig) -> Result<OracleSolution> {
    utility.validate()?;
    let states = StateSpace::enumerate(market, cfg.max_states)?;
    let prices: Vec<f64> = market
        .events
        .iter()
        .flat_map(|e| e.outcomes.iter().map(|o| o.price))
        .collect();
    let problem = Problem {
        states: &states,
        prices: prices.clone(),
        utility: *utility,
    };

    let mut starts = vec![vec![0.0; prices.len()]];
    for &seed in &cfg.seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        starts.push(random_start(&mut rng, &prices));
    }
    let mut best: Option<Run> = None;
    let mut iterations = 0;
    for start in starts {
        let run = ascend(&problem, start, cfg);
        iterations += run.iterations;
        let better = match &best {
            None => true,
            Some(b) => run.value > b.value,
        };
        if better {
            best = Some(run);
        }
    }
    let best = best.expect("at least the all-cash start runs");
    let converged = best.pg_norm <= cfg.tol;

    let cash = problem.cash(&best.g).max(0.0);
    let (grad, em) = problem.gradient(&best.g);
    let first_order_residual = norm_inf(
        best.g
            .iter()
            .zip(&grad)
            .map(|(&x, &d)| if x > 0.0 { d } else { d.max(0.0) }),
    );

    let mut wagers = Vec::with_capacity(market.events.len());
    let mut support = Vec::with_capacity(market.events.len());
    let mut offset = 0;
    let mut largest_inactive: f64 = 0.0;
    let mut smallest_active: Option<f64> = None;
    for e in &market.events {
        let g = best.g[offset..offset + e.len()].to_vec();
        offset += e.len();
        let mut active = Vec::new();
        for (i, &x) in g.iter().enumerate() {
            if x > cfg.activity_eps {
                active.push(i);
                smallest_active = Some(smallest_active.map_or(x, |s: f64| s.min(x)));
            } else {
                largest_inactive = largest_inactive.max(x);
            }
        }
        support.push(active);
        wagers.push(g);
    }

    Ok(OracleSolution {
        portfolio: Portfolio { cash, wagers },
        objective: best.value,
        support,
        multiplier: (cash > cfg.activity_eps).then_some(em),
        largest_inactive,
        smallest_active,
        first_order_residual,
        projected_gradient_norm: best.pg_norm,
        iterations,
        converged,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub support_equal: bool,
    pub oracle_support: Vec<Vec<usize>>,
    pub solver_support: Vec<Vec<usize>>,
    pub max_wager_deviation: f64,
    pub cash_deviation: f64,
    /// Φ(oracle) − Φ(solver).
    pub objective_gap: f64,
    pub multiplier_gap: Option<f64>,
    /// Support equality and |objective gap| ≤ `objective_tol`.
    pub passed: bool,
}

pub const OBJECTIVE_TOL: f64 = 1e-9;

/// Oracle vs fixed-support solver on the same market and utility.
pub fn compare(oracle: &OracleSolution, report: &SolveReport, activity_eps: f64) -> ComparisonReport {
    let solver_support = report.portfolio.positive_sets(activity_eps);
    let support_equal = solver_support == oracle.support;
    let max_wager_deviation = oracle
        .portfolio
        .wagers
        .iter()
        .flatten()
        .zip(report.portfolio.wagers.iter().flatten())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let objective_gap = oracle.objective - report.objective;
    let multiplier_gap = oracle
        .multiplier
        .map(|m| (m - report.kkt.lambda).abs());
    ComparisonReport {
        support_equal,
        oracle_support: oracle.support.clone(),
        solver_support,
        max_wager_deviation,
        cash_deviation: (oracle.portfolio.cash - report.portfolio.cash).abs(),
        objective_gap,
        multiplier_gap,
        passed: support_equal && objective_gap.abs() <= OBJECTIVE_TOL,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::Event;

    fn ev(label: &str, p: &[f64], prices: &[f64]) -> Event {
        Event::from_slices(label, p, prices)
    }

    #[test]
    fn log_single_event_matches_closed_form() {
        let m = Market::new(vec![ev("a", &[0.6, 0.4], &[0.5, 0.55])]);
        let sol = oracle_solve(&m, &Utility::Log, &OracleConfig::default()).unwrap();
        assert!(sol.converged);
        assert!((sol.portfolio.cash - 0.8).abs() < 1e-7);
        assert!((sol.portfolio.wagers[0][0] - 0.4).abs() < 1e-7);
        assert!(sol.portfolio.wagers[0][1] <= ACTIVITY_EPS);
        let closed = 0.6 * 1.2f64.ln() + 0.4 * 0.8f64.ln();
        assert!((sol.objective - closed).abs() < 1e-12);
        assert_eq!(sol.support, vec![vec![0]]);
        assert!((sol.multiplier.unwrap() - 1.0).abs() < 1e-7);
    }

    #[test]
    fn no_edge_means_all_cash() {
        let m = Market::new(vec![ev("a", &[0.5, 0.5], &[0.55, 0.55]), ev("b", &[0.2, 0.8], &[0.25, 0.85])]);
        for u in [Utility::Log, Utility::crra(3.0), Utility::neg_exp(1.0)] {
            let sol = oracle_solve(&m, &u, &OracleConfig::default()).unwrap();
            assert!(sol.support.iter().all(Vec::is_empty));
            assert!((sol.portfolio.cash - 1.0).abs() <= ACTIVITY_EPS);
        }
    }

    #[test]
    fn two_event_log_market() {
        let m = Market::new(vec![ev("a", &[0.6, 0.4], &[0.5, 0.55]), ev("b", &[0.6, 0.4], &[0.5, 0.55])]);
        let sol = oracle_solve(&m, &Utility::Log, &OracleConfig::default()).unwrap();
        assert_eq!(sol.support, vec![vec![0], vec![0]]);
        assert!((sol.portfolio.wagers[0][0] - 5.0 / 13.0).abs() < 1e-7);
    }

    #[test]
    fn projection_lands_in_feasible_set() {
        let states = StateSpace::enumerate(&Market::new(vec![ev("a", &[0.5, 0.5], &[0.6, 0.7])]), 10).unwrap();
        let p = Problem {
            states: &states,
            prices: vec![0.6, 0.7],
            utility: Utility::Log,
        };
        let g = p.project(&[3.0, -1.0]);
        assert_eq!(g[1], 0.0);
        assert!(p.cash(&g) >= 0.0 && p.cash(&g) < 1e-12);
        assert_eq!(p.project(&[0.2, 0.3]), vec![0.2, 0.3]);
    }

    #[test]
    fn state_limit() {
        let e = ev("a", &[0.5, 0.5], &[0.55, 0.55]);
        let m = Market::new(vec![e.clone(), e.clone(), e]);
        let cfg = OracleConfig {
            max_states: 7,
            ..OracleConfig::default()
        };
        assert!(matches!(
            oracle_solve(&m, &Utility::Log, &cfg),
            Err(Error::OracleLimit { states: 8, limit: 7 })
        ));
    }
}
