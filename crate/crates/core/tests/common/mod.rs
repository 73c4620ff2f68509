#![allow(dead_code)]

use kelly_support::market::{Event, Market, Outcome, Portfolio};
use kelly_support::utility::Utility;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const MARKET_SEED: u64 = 0x6b656c6c79;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn utilities() -> [Utility; 4] {
    [
        Utility::Log,
        Utility::crra(0.5),
        Utility::crra(3.0),
        Utility::neg_exp(1.0),
    ]
}

/// One event with `n` outcomes, raw edge ratios drawn from [0.5, 1.5] and
/// prices scaled to the given overround.
pub fn random_event(rng: &mut ChaCha8Rng, label: String, n: usize, overround: f64) -> Event {
    let weights: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = weights.iter().sum();
    let p: Vec<f64> = weights.iter().map(|w| w / total).collect();
    let raw: Vec<f64> = p.iter().map(|&pi| pi / rng.gen_range(0.5..1.5)).collect();
    let scale = overround / raw.iter().sum::<f64>();
    let outcomes = p
        .iter()
        .zip(&raw)
        .enumerate()
        .map(|(i, (&pi, &q))| Outcome::new(format!("o{}", i + 1), pi, q * scale))
        .collect();
    Event::new(label, outcomes)
}

/// m ∈ {1, 2, 3}, n ∈ {2..6}, overround uniform in [1.02, 1.20].
pub fn random_market(rng: &mut ChaCha8Rng) -> Market {
    let m = rng.gen_range(1..=3);
    let events = (0..m)
        .map(|l| {
            let n = rng.gen_range(2..=6);
            let overround = rng.gen_range(1.02..=1.20);
            random_event(rng, format!("e{}", l + 1), n, overround)
        })
        .collect();
    Market::new(events)
}

pub fn random_markets(count: usize) -> Vec<Market> {
    let mut r = rng(MARKET_SEED);
    (0..count).map(|_| random_market(&mut r)).collect()
}

/// Feasible portfolio with cash in [cash_lo, cash_hi] and positive wagers on
/// a random nonempty subset of each event (possibly empty events when
/// `allow_empty`).
pub fn random_portfolio(rng: &mut ChaCha8Rng, market: &Market, cash_lo: f64, cash_hi: f64, allow_empty: bool) -> Portfolio {
    let mut wagers: Vec<Vec<f64>> = market
        .events
        .iter()
        .map(|e| {
            let mut g: Vec<f64> = (0..e.len())
                .map(|_| if rng.gen_bool(0.6) { rng.gen_range(0.05..1.0) } else { 0.0 })
                .collect();
            if !allow_empty && g.iter().all(|&x| x == 0.0) {
                let i = rng.gen_range(0..e.len());
                g[i] = rng.gen_range(0.05..1.0);
            }
            g
        })
        .collect();
    let spend: f64 = market
        .events
        .iter()
        .zip(&wagers)
        .map(|(e, g)| e.outcomes.iter().zip(g).map(|(o, x)| o.price * x).sum::<f64>())
        .sum();
    let cash = rng.gen_range(cash_lo..cash_hi);
    if spend > 0.0 {
        let s = (1.0 - cash) / spend;
        for g in &mut wagers {
            for x in g.iter_mut() {
                *x *= s;
            }
        }
    }
    let mut pf = Portfolio { cash: 0.0, wagers };
    // c = 1 − Σ π g exactly as the budget check computes it
    pf.cash = -pf.budget_residual(market);
    pf
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}
