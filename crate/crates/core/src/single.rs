//! Exact single-event solver.
//!
//! Once the support A is fixed, every active wealth is W_i = (U')⁻¹(λ / r_i)
//! and the cash is c = (U')⁻¹(λ (1 − Q) / (1 − P)), so the bankroll
//! constraint collapses to one monotone scalar equation in λ.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::market::Event;
use crate::support::EventSupport;
use crate::utility::Utility;

/// Cash at or below this is treated as the boundary c = 0.
pub const BOUNDARY_CASH: f64 = 1e-12;

const TARGET_RESIDUAL: f64 = 1e-13;
const BISECTION_WIDTH: f64 = 1e-8;
const MAX_DOUBLINGS: usize = 200;
const MAX_NEWTON: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SingleEventSolution {
    pub lambda: f64,
    pub cash: f64,
    /// (outcome index, W_i) for active outcomes, in support order.
    pub active_wealths: Vec<(usize, f64)>,
    /// Wagers in original outcome order.
    pub wagers: Vec<f64>,
    pub boundary_cash: bool,
}

fn interior_masses(event: &Event, support: &EventSupport) -> Result<(f64, f64)> {
    let (p, q) = (support.prefix.p_mass, support.prefix.q_mass);
    if !(q < 1.0 && p < 1.0) {
        return Err(Error::DegenerateDenominator {
            event: event.label.clone(),
            p_mass: p,
            q_mass: q,
        });
    }
    Ok((p, q))
}

/// (1 − Q)(U')⁻¹(λ(1 − Q)/(1 − P)) + Σ_{i∈A} π_i (U')⁻¹(λ / r_i) − 1.
///
/// Strictly decreasing in λ.
pub fn budget_residual_single(
    lambda: f64,
    event: &Event,
    support: &EventSupport,
    utility: &Utility,
) -> Result<f64> {
    let (p, q) = interior_masses(event, support)?;
    let mut total = (1.0 - q) * utility.marginal_inverse(lambda * (1.0 - q) / (1.0 - p))?;
    for &i in support.active() {
        let o = &event.outcomes[i];
        total += o.price * utility.marginal_inverse(lambda / o.edge_ratio())?;
    }
    Ok(total - 1.0)
}

fn residual_slope(lambda: f64, event: &Event, support: &EventSupport, utility: &Utility) -> Result<f64> {
    let (p, q) = interior_masses(event, support)?;
    let scale = (1.0 - q) / (1.0 - p);
    let mut slope = (1.0 - q) * scale * utility.marginal_inverse_derivative(lambda * scale)?;
    for &i in support.active() {
        let o = &event.outcomes[i];
        let r = o.edge_ratio();
        slope += o.price / r * utility.marginal_inverse_derivative(lambda / r)?;
    }
    Ok(slope)
}

/// Sign of the residual with domain errors counted as negative: they only
/// occur once λ is past the point where some implied wealth reaches zero.
fn signed(lambda: f64, event: &Event, support: &EventSupport, utility: &Utility) -> Result<f64> {
    match budget_residual_single(lambda, event, support, utility) {
        Ok(r) => Ok(r),
        Err(Error::Domain { .. }) => Ok(f64::NEG_INFINITY),
        Err(e) => Err(e),
    }
}

/// Root of the single-event budget equation.
///
/// Log utility collapses the equation to 1/λ − 1 = 0, so λ = 1 is returned
/// without iterating. Otherwise the bracket is grown geometrically from
/// U'(1), bisected to relative width 1e-8 and polished by Newton.
pub fn solve_lambda_single(event: &Event, support: &EventSupport, utility: &Utility) -> Result<f64> {
    interior_masses(event, support)?;
    if utility.canonical() == Utility::Log {
        return Ok(1.0);
    }
    let f = |l: f64| signed(l, event, support, utility);

    let start = utility.marginal(1.0);
    let (mut lo, mut hi);
    let r0 = f(start)?;
    if r0 == 0.0 {
        return Ok(start);
    }
    if r0 > 0.0 {
        lo = start;
        hi = 2.0 * start;
        let mut n = 0;
        while f(hi)? > 0.0 {
            lo = hi;
            hi *= 2.0;
            n += 1;
            if n > MAX_DOUBLINGS {
                return Err(Error::BracketFailure(format!(
                    "residual still positive at lambda = {hi:e}"
                )));
            }
        }
    } else {
        hi = start;
        lo = 0.5 * start;
        let mut n = 0;
        while f(lo)? <= 0.0 {
            hi = lo;
            lo *= 0.5;
            n += 1;
            if n > MAX_DOUBLINGS {
                return Err(Error::BracketFailure(format!(
                    "residual still non-positive at lambda = {lo:e}"
                )));
            }
        }
    }

    while hi - lo > BISECTION_WIDTH * hi {
        let mid = 0.5 * (lo + hi);
        if f(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    // Newton polish inside the bracket; fall back to bisection if a step
    // leaves it or lands outside the domain.
    let mut x = 0.5 * (lo + hi);
    let mut best = (f64::INFINITY, x);
    for _ in 0..(MAX_NEWTON + 200) {
        let r = f(x)?;
        if r.abs() < best.0 {
            best = (r.abs(), x);
        }
        if r.abs() <= TARGET_RESIDUAL {
            return Ok(x);
        }
        if r > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let newton = if r.is_finite() {
            residual_slope(x, event, support, utility)
                .ok()
                .map(|s| x - r / s)
                .filter(|n| *n > lo && *n < hi)
        } else {
            None
        };
        let next = newton.unwrap_or(0.5 * (lo + hi));
        if next == x || hi <= lo {
            break;
        }
        x = next;
    }
    if best.0.is_finite() && best.0 <= TARGET_RESIDUAL {
        return Ok(best.1);
    }
    Err(Error::BracketFailure(format!(
        "bracket collapsed at lambda = {:e} with residual {:e} (no interior multiplier)",
        best.1, best.0
    )))
}

/// Cash, active wealths and wagers from a multiplier.
pub fn assemble_single(
    event: &Event,
    support: &EventSupport,
    utility: &Utility,
    lambda: f64,
) -> Result<SingleEventSolution> {
    let (p, q) = interior_masses(event, support)?;
    let cash = utility.marginal_inverse(lambda * (1.0 - q) / (1.0 - p))?;
    let mut wagers = vec![0.0; event.len()];
    let mut active_wealths = Vec::with_capacity(support.prefix.k);
    for &i in support.active() {
        let w = utility.marginal_inverse(lambda / event.outcomes[i].edge_ratio())?;
        let g = w - cash;
        if !(g > 0.0) {
            return Err(Error::SupportInconsistency {
                event: event.label.clone(),
                outcome: i,
                wager: g,
            });
        }
        wagers[i] = g;
        active_wealths.push((i, w));
    }
    Ok(SingleEventSolution {
        lambda,
        cash,
        active_wealths,
        wagers,
        boundary_cash: cash <= BOUNDARY_CASH,
    })
}

pub fn solve_single(event: &Event, support: &EventSupport, utility: &Utility) -> Result<SingleEventSolution> {
    let lambda = solve_lambda_single(event, support, utility)?;
    assemble_single(event, support, utility, lambda)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::support::single_event_support;

    fn ev(p: &[f64], prices: &[f64]) -> Event {
        Event::from_slices("e", p, prices)
    }

    fn budget(event: &Event, s: &SingleEventSolution) -> f64 {
        s.cash
            + event
                .outcomes
                .iter()
                .zip(&s.wagers)
                .map(|(o, g)| o.price * g)
                .sum::<f64>()
            - 1.0
    }

    #[test]
    fn log_residual_vanishes_at_one() {
        for (p, pr) in [
            (vec![0.6, 0.4], vec![0.5, 0.55]),
            (vec![0.9, 0.1], vec![0.8, 0.3]),
            (vec![0.5, 0.3, 0.2], vec![0.3, 0.4, 0.4]),
        ] {
            let e = ev(&p, &pr);
            let s = single_event_support(&e).unwrap();
            let r = budget_residual_single(1.0, &e, &s, &Utility::Log).unwrap();
            assert!(r.abs() < 1e-15, "{r}");
        }
    }

    #[test]
    fn crra2_residual_changes_sign_on_bracket() {
        // Frozen from the closed form 0.5 sqrt(0.8/λ) + 0.5 sqrt(1.2/λ) − 1.
        let e = ev(&[0.6, 0.4], &[0.5, 0.55]);
        let s = single_event_support(&e).unwrap();
        let u = Utility::crra(2.0);
        let at_lo = budget_residual_single(0.5, &e, &s, &u).unwrap();
        let at_hi = budget_residual_single(2.0, &e, &s, &u).unwrap();
        assert!((at_lo - 0.407_052_201_275_159_4).abs() < 1e-12);
        assert!((at_hi + 0.296_473_899_362_420_3).abs() < 1e-12);
    }

    #[test]
    fn empty_support_residual() {
        let e = ev(&[0.5, 0.5], &[0.55, 0.55]);
        let s = single_event_support(&e).unwrap();
        for u in [Utility::crra(3.0), Utility::neg_exp(1.0)] {
            let lam = u.marginal(1.0);
            assert!(budget_residual_single(lam, &e, &s, &u).unwrap().abs() < 1e-15);
            let sol = solve_single(&e, &s, &u).unwrap();
            assert!((sol.cash - 1.0).abs() < 1e-12);
            assert!(sol.wagers.iter().all(|&g| g == 0.0));
        }
    }

    #[test]
    fn log_closed_form_examples() {
        let e = ev(&[0.6, 0.4], &[0.5, 0.55]);
        let s = single_event_support(&e).unwrap();
        let sol = solve_single(&e, &s, &Utility::Log).unwrap();
        assert_eq!(sol.lambda, 1.0);
        assert!((sol.cash - 0.8).abs() < 1e-15);
        assert!((sol.wagers[0] - 0.4).abs() < 1e-15);
        assert_eq!(sol.wagers[1], 0.0);
        assert!(budget(&e, &sol).abs() < 1e-12);

        let e = ev(&[0.9, 0.1], &[0.8, 0.3]);
        let s = single_event_support(&e).unwrap();
        let sol = solve_single(&e, &s, &Utility::Log).unwrap();
        assert!((sol.cash - 0.5).abs() < 1e-15);
        assert!((sol.wagers[0] - 0.625).abs() < 1e-15);
        assert!(budget(&e, &sol).abs() < 1e-12);
    }

    #[test]
    fn crra2_multiplier_frozen() {
        // Independent root of 0.5 sqrt(0.8/λ) + 0.5 sqrt(1.2/λ) = 1 (brentq).
        let e = ev(&[0.6, 0.4], &[0.5, 0.55]);
        let s = single_event_support(&e).unwrap();
        let u = Utility::crra(2.0);
        let lam = solve_lambda_single(&e, &s, &u).unwrap();
        assert!(budget_residual_single(lam, &e, &s, &u).unwrap().abs() <= 1e-13);
        assert!((lam - 0.989_897_948_556_635_6).abs() < 1e-12);
        let sol = assemble_single(&e, &s, &u, lam).unwrap();
        assert!((sol.cash - 0.898_979_485_566_356_2).abs() < 1e-12);
        assert!((sol.wagers[0] - 0.202_041_028_867_287_6).abs() < 1e-12);
    }

    #[test]
    fn neg_exp_multiplier_frozen() {
        // Independent root of 0.2(−ln(2λ)) + 0.8(−ln(λ/1.125)) = 1 (brentq).
        let e = ev(&[0.9, 0.1], &[0.8, 0.3]);
        let s = single_event_support(&e).unwrap();
        let u = Utility::neg_exp(1.0);
        let lam = solve_lambda_single(&e, &s, &u).unwrap();
        assert!(budget_residual_single(lam, &e, &s, &u).unwrap().abs() <= 1e-13);
        assert!((lam - 0.351_901_839_409_936_36).abs() < 1e-12);
        let sol = assemble_single(&e, &s, &u, lam).unwrap();
        assert!((sol.cash - 0.351_255_827_026_937).abs() < 1e-11);
        assert!((sol.wagers[0] - 0.810_930_216_216_328_8).abs() < 1e-11);
        assert!(budget(&e, &sol).abs() < 1e-12);
    }

    #[test]
    fn stationarity_and_identity_hold() {
        let e = ev(&[0.45, 0.3, 0.15, 0.1], &[0.3, 0.28, 0.2, 0.3]);
        let s = single_event_support(&e).unwrap();
        assert!(s.prefix.k >= 1);
        let theta = s.prefix.threshold().unwrap();
        for u in [Utility::Log, Utility::crra(0.5), Utility::crra(3.0), Utility::neg_exp(1.0)] {
            let sol = solve_single(&e, &s, &u).unwrap();
            for &(i, w) in &sol.active_wealths {
                let r = e.outcomes[i].edge_ratio();
                assert!(((u.marginal(w) * r - sol.lambda) / sol.lambda).abs() < 1e-10);
            }
            let ratio = sol.lambda / u.marginal(sol.cash);
            assert!(((ratio - theta) / theta).abs() < 1e-10, "{u:?}");
            assert!(budget(&e, &sol).abs() < 1e-12);
            // higher edge ratio, larger wager
            let active = s.active();
            for pair in active.windows(2) {
                if e.outcomes[pair[0]].edge_ratio() > e.outcomes[pair[1]].edge_ratio() {
                    assert!(sol.wagers[pair[0]] > sol.wagers[pair[1]]);
                }
            }
        }
    }

    #[test]
    fn wrong_support_is_inconsistent() {
        // Forcing the r = 0.727 outcome active cannot give it a positive wager.
        let e = ev(&[0.6, 0.4], &[0.5, 0.55]);
        let s = EventSupport::from_active(&e, &[0, 1]);
        assert!(matches!(
            solve_single(&e, &s, &Utility::Log),
            Err(Error::SupportInconsistency { outcome: 1, .. }) | Err(Error::DegenerateDenominator { .. })
        ));
        let e = ev(&[0.5, 0.3, 0.2], &[0.3, 0.4, 0.4]);
        let s = EventSupport::from_active(&e, &[0, 2]);
        assert!(matches!(
            solve_single(&e, &s, &Utility::crra(2.0)),
            Err(Error::SupportInconsistency { outcome: 2, .. })
        ));
    }
}
