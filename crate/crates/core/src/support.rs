//! Utility-invariant support selection.
//!
//! Each event is sorted by decreasing edge ratio and grown greedily: outcome
//! k+1 joins the prefix only if its edge ratio strictly exceeds
//! (1 − P_k) / (1 − Q_k). Equality stops the scan, so tied outcomes stay in
//! cash. Events never exchange data, and no utility enters the rule.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::market::{sort_event, Event, Market};

/// (1 − P) / (1 − Q).
pub fn threshold(p_mass: f64, q_mass: f64) -> Result<f64> {
    if !(q_mass < 1.0) {
        return Err(Error::DegenerateDenominator {
            event: String::new(),
            p_mass,
            q_mass,
        });
    }
    Ok((1.0 - p_mass) / (1.0 - q_mass))
}

/// Active prefix length with its probability and price masses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrefixState {
    pub k: usize,
    #[serde(rename = "P")]
    pub p_mass: f64,
    #[serde(rename = "Q")]
    pub q_mass: f64,
}

impl PrefixState {
    pub const EMPTY: PrefixState = PrefixState {
        k: 0,
        p_mass: 0.0,
        q_mass: 0.0,
    };

    pub fn threshold(&self) -> Result<f64> {
        threshold(self.p_mass, self.q_mass)
    }
}

/// Support of one event: the first `prefix.k` entries of `order` are active.
///
/// For selector output `order` is the edge-ratio sort; hand-built supports
/// put their active outcomes first and keep the rest in sorted order.
#[derive(Debug, Clone, PartialEq)]
pub struct EventSupport {
    pub order: Vec<usize>,
    pub prefix: PrefixState,
}

impl EventSupport {
    /// Support consisting of exactly the outcomes in `active`.
    pub fn from_active(event: &Event, active: &[usize]) -> Self {
        let sorted = sort_event(event);
        let mut order: Vec<usize> = sorted.iter().copied().filter(|i| active.contains(i)).collect();
        let k = order.len();
        order.extend(sorted.iter().copied().filter(|i| !active.contains(i)));
        let prefix = prefix_masses(event, &order, k);
        Self { order, prefix }
    }

    pub fn active(&self) -> &[usize] {
        &self.order[..self.prefix.k]
    }

    pub fn inactive(&self) -> &[usize] {
        &self.order[self.prefix.k..]
    }

    pub fn is_active(&self, outcome: usize) -> bool {
        self.active().contains(&outcome)
    }

    /// Edge ratio of the first excluded outcome minus the threshold; `None`
    /// for full support or a degenerate denominator.
    pub fn margin(&self, event: &Event) -> Option<f64> {
        let next = *self.order.get(self.prefix.k)?;
        let t = self.prefix.threshold().ok()?;
        Some(event.outcomes[next].edge_ratio() - t)
    }
}

fn prefix_masses(event: &Event, order: &[usize], k: usize) -> PrefixState {
    let (mut p_mass, mut q_mass) = (0.0, 0.0);
    for &i in &order[..k] {
        p_mass += event.outcomes[i].p;
        q_mass += event.outcomes[i].price;
    }
    PrefixState { k, p_mass, q_mass }
}

/// Greedy prefix for one event.
///
/// Returns the smallest k with k = n or r_{k+1} ≤ (1 − P_k)/(1 − Q_k).
/// Fails with `DegenerateDenominator` if the scan must continue past a
/// prefix with Q_k ≥ 1, or if it swallows the whole event (P = 1, which
/// only a sub-fair event can produce and which leaves no interior cash).
pub fn single_event_support(event: &Event) -> Result<EventSupport> {
    let order = sort_event(event);
    let n = order.len();
    let mut state = PrefixState::EMPTY;
    let degenerate = |s: &PrefixState| Error::DegenerateDenominator {
        event: event.label.clone(),
        p_mass: s.p_mass,
        q_mass: s.q_mass,
    };
    while state.k < n {
        if !(state.q_mass < 1.0) {
            return Err(degenerate(&state));
        }
        let t = (1.0 - state.p_mass) / (1.0 - state.q_mass);
        let next = &event.outcomes[order[state.k]];
        if next.edge_ratio() <= t {
            break;
        }
        state.p_mass += next.p;
        state.q_mass += next.price;
        state.k += 1;
    }
    if n > 0 && state.k == n {
        return Err(degenerate(&state));
    }
    Ok(EventSupport {
        order,
        prefix: state,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SupportFamily {
    pub events: Vec<EventSupport>,
}

impl SupportFamily {
    pub fn from_active_sets(market: &Market, active: &[Vec<usize>]) -> Self {
        assert_eq!(market.events.len(), active.len());
        Self {
            events: market
                .events
                .iter()
                .zip(active)
                .map(|(e, a)| EventSupport::from_active(e, a))
                .collect(),
        }
    }

    pub fn prefix_lengths(&self) -> Vec<usize> {
        self.events.iter().map(|s| s.prefix.k).collect()
    }

    /// Active outcome indices per event, ascending.
    pub fn active_sets(&self) -> Vec<Vec<usize>> {
        self.events
            .iter()
            .map(|s| {
                let mut a = s.active().to_vec();
                a.sort_unstable();
                a
            })
            .collect()
    }
}

/// Eventwise union of the single-event supports.
pub fn simultaneous_support(market: &Market) -> Result<SupportFamily> {
    let events = market
        .events
        .iter()
        .map(single_event_support)
        .collect::<Result<Vec<_>>>()?;
    Ok(SupportFamily { events })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(p: &[f64], prices: &[f64]) -> Event {
        Event::from_slices("e", p, prices)
    }

    #[test]
    fn threshold_examples() {
        assert_eq!(threshold(0.0, 0.0).unwrap(), 1.0);
        assert!((threshold(0.6, 0.5).unwrap() - 0.8).abs() < 1e-15);
        assert!((threshold(0.9, 0.8).unwrap() - 0.5).abs() < 1e-15);
        assert!(matches!(
            threshold(0.5, 1.0),
            Err(Error::DegenerateDenominator { .. })
        ));
    }

    #[test]
    fn single_event_examples() {
        let s = single_event_support(&ev(&[0.6, 0.4], &[0.5, 0.55])).unwrap();
        assert_eq!(s.prefix.k, 1);
        assert_eq!(s.prefix.p_mass, 0.6);
        assert_eq!(s.prefix.q_mass, 0.5);
        assert_eq!(s.active(), &[0]);

        let s = single_event_support(&ev(&[0.5, 0.5], &[0.55, 0.55])).unwrap();
        assert_eq!(s.prefix.k, 0);

        let e = ev(&[0.9, 0.1], &[0.8, 0.3]);
        let s = single_event_support(&e).unwrap();
        assert_eq!(s.prefix.k, 1);
        assert!((s.prefix.threshold().unwrap() - 0.5).abs() < 1e-12);
        assert!((s.margin(&e).unwrap() - (1.0 / 3.0 - 0.5)).abs() < 1e-12);
    }

    #[test]
    fn equality_at_threshold_stays_inactive() {
        // r = (1.5, 0.5, 0.25); after the first outcome P = 0.75, Q = 0.5 and
        // the threshold is exactly 0.5.
        let e = ev(&[0.75, 0.125, 0.125], &[0.5, 0.25, 0.5]);
        let s = single_event_support(&e).unwrap();
        assert_eq!(s.prefix.k, 1);
        assert_eq!(s.margin(&e), Some(0.0));
        assert!(!s.is_active(1));
    }

    #[test]
    fn sub_fair_event_is_degenerate() {
        let e = ev(&[0.5, 0.5], &[0.45, 0.45]);
        assert!(matches!(
            single_event_support(&e),
            Err(Error::DegenerateDenominator { .. })
        ));
        // A fair event stops at the tie and keeps everything in cash.
        let s = single_event_support(&ev(&[0.5, 0.5], &[0.5, 0.5])).unwrap();
        assert_eq!(s.prefix.k, 0);
    }

    #[test]
    fn simultaneous_is_eventwise() {
        let a = ev(&[0.6, 0.4], &[0.5, 0.55]);
        let b = ev(&[0.5, 0.5], &[0.55, 0.55]);
        let m = Market::new(vec![a.clone(), a.clone()]);
        assert_eq!(simultaneous_support(&m).unwrap().prefix_lengths(), vec![1, 1]);
        let m = Market::new(vec![b.clone(), a]);
        let fam = simultaneous_support(&m).unwrap();
        assert_eq!(fam.prefix_lengths(), vec![0, 1]);
        assert_eq!(fam, simultaneous_support(&m).unwrap());
        let m = Market::new(vec![b.clone(), b]);
        assert_eq!(simultaneous_support(&m).unwrap().prefix_lengths(), vec![0, 0]);
    }

    #[test]
    fn degenerate_error_names_event() {
        let m = Market::new(vec![Event::from_slices("subfair", &[0.5, 0.5], &[0.4, 0.4])]);
        match simultaneous_support(&m) {
            Err(Error::DegenerateDenominator { event, .. }) => assert_eq!(event, "subfair"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn from_active_builds_masses() {
        let e = ev(&[0.5, 0.3, 0.2], &[0.3, 0.4, 0.4]);
        let s = EventSupport::from_active(&e, &[2, 0]);
        assert_eq!(s.prefix.k, 2);
        assert_eq!(s.active(), &[0, 2]);
        assert!((s.prefix.p_mass - 0.7).abs() < 1e-15);
        assert!((s.prefix.q_mass - 0.7).abs() < 1e-15);
        assert_eq!(s.inactive(), &[1]);
    }
}
