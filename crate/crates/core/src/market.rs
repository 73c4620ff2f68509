//! Markets of independent events priced by state prices, plus portfolios.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

/// Absolute tolerance on Σ p = 1 for every event.
pub const PROBABILITY_SUM_TOL: f64 = 1e-12;

/// Absolute tolerance on the bankroll constraint c + Σ π g = 1.
pub const BUDGET_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outcome {
    pub label: String,
    pub p: f64,
    pub price: f64,
}

impl Outcome {
    pub fn new(label: impl Into<String>, p: f64, price: f64) -> Self {
        Self {
            label: label.into(),
            p,
            price,
        }
    }

    /// p / π
    pub fn edge_ratio(&self) -> f64 {
        edge_ratio(self)
    }
}

pub fn edge_ratio(outcome: &Outcome) -> f64 {
    outcome.p / outcome.price
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Event {
    pub label: String,
    pub outcomes: Vec<Outcome>,
}

impl Event {
    pub fn new(label: impl Into<String>, outcomes: Vec<Outcome>) -> Self {
        Self {
            label: label.into(),
            outcomes,
        }
    }

    /// Builds an event with outcomes labelled `o1, o2, ...`.
    pub fn from_slices(label: impl Into<String>, p: &[f64], prices: &[f64]) -> Self {
        assert_eq!(p.len(), prices.len(), "probability/price length mismatch");
        let outcomes = p
            .iter()
            .zip(prices)
            .enumerate()
            .map(|(i, (&p, &price))| Outcome::new(format!("o{}", i + 1), p, price))
            .collect();
        Self::new(label, outcomes)
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.outcomes.iter().map(|o| o.p).collect()
    }

    pub fn prices(&self) -> Vec<f64> {
        self.outcomes.iter().map(|o| o.price).collect()
    }

    pub fn edge_ratios(&self) -> Vec<f64> {
        self.outcomes.iter().map(edge_ratio).collect()
    }

    pub fn probability_sum(&self) -> f64 {
        self.outcomes.iter().map(|o| o.p).sum()
    }

    /// Σ π; strictly above 1 means strict overround.
    pub fn overround(&self) -> f64 {
        self.outcomes.iter().map(|o| o.price).sum()
    }

    /// Outcome indices by strictly decreasing edge ratio, ties kept in input
    /// order.
    pub fn sorted_order(&self) -> Vec<usize> {
        sort_event(self)
    }
}

pub fn sort_event(event: &Event) -> Vec<usize> {
    let ratios = event.edge_ratios();
    let mut order: Vec<usize> = (0..ratios.len()).collect();
    // `sort_by` is stable, so equal ratios keep ascending index order.
    order.sort_by(|&a, &b| ratios[b].total_cmp(&ratios[a]));
    order
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OverroundPolicy {
    /// Every event must satisfy Σ π > 1.
    #[default]
    RequireStrict,
    /// Fair or sub-fair events only produce a warning.
    AllowWithWarning,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Market {
    pub events: Vec<Event>,
    #[serde(skip)]
    pub overround_policy: OverroundPolicy,
}

impl Market {
    pub fn new(events: Vec<Event>) -> Self {
        Self {
            events,
            overround_policy: OverroundPolicy::RequireStrict,
        }
    }

    pub fn with_policy(mut self, policy: OverroundPolicy) -> Self {
        self.overround_policy = policy;
        self
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("market serialization cannot fail")
    }

    pub fn num_events(&self) -> usize {
        self.events.len()
    }

    pub fn num_outcomes(&self) -> usize {
        self.events.iter().map(Event::len).sum()
    }

    /// Number of joint outcomes Π n_ℓ, saturating in u128.
    pub fn product_states(&self) -> u128 {
        self.events
            .iter()
            .fold(1u128, |acc, e| acc.saturating_mul(e.len() as u128))
    }

    /// Copy with every event's probabilities divided by their sum.
    pub fn renormalized(&self) -> Market {
        let events = self
            .events
            .iter()
            .map(|e| {
                let total = e.probability_sum();
                let outcomes = e
                    .outcomes
                    .iter()
                    .map(|o| Outcome::new(o.label.clone(), o.p / total, o.price))
                    .collect();
                Event::new(e.label.clone(), outcomes)
            })
            .collect();
        Market {
            events,
            overround_policy: self.overround_policy,
        }
    }

    pub fn validate(&self) -> ValidationReport {
        validate_market(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IssueKind {
    EmptyMarket,
    EmptyEvent,
    NonFinite,
    NonPositiveProbability,
    NonPositivePrice,
    ProbabilitySum,
    DuplicateLabel,
    /// Σ π ≤ 1: the event admits the fair-event cash-shift degeneracy.
    Overround,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Issue {
    pub severity: Severity,
    pub kind: IssueKind,
    pub event: Option<String>,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    fn push(&mut self, severity: Severity, kind: IssueKind, event: Option<&str>, message: String) {
        self.issues.push(Issue {
            severity,
            kind,
            event: event.map(str::to_string),
            message,
        });
    }

    pub fn errors(&self) -> impl Iterator<Item = &Issue> {
        self.issues.iter().filter(|i| i.severity == Severity::Error)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Issue> {
        self.issues.iter().filter(|i| i.severity == Severity::Warning)
    }

    pub fn is_ok(&self) -> bool {
        self.errors().next().is_none()
    }

    /// True when the only errors are overround violations.
    pub fn only_degeneracy_errors(&self) -> bool {
        let mut any = false;
        for e in self.errors() {
            if e.kind != IssueKind::Overround {
                return false;
            }
            any = true;
        }
        any
    }
}

fn round12(x: f64) -> f64 {
    (x * 1e12).round() / 1e12
}

pub fn validate_market(market: &Market) -> ValidationReport {
    let mut report = ValidationReport::default();
    if market.events.is_empty() {
        report.push(
            Severity::Error,
            IssueKind::EmptyMarket,
            None,
            "market has no events".to_string(),
        );
    }
    let mut event_labels = HashSet::new();
    for event in &market.events {
        let label = Some(event.label.as_str());
        if !event_labels.insert(event.label.as_str()) {
            report.push(
                Severity::Error,
                IssueKind::DuplicateLabel,
                label,
                format!("duplicate event label `{}`", event.label),
            );
        }
        if event.outcomes.is_empty() {
            report.push(
                Severity::Error,
                IssueKind::EmptyEvent,
                label,
                "event has no outcomes".to_string(),
            );
            continue;
        }
        let mut labels = HashSet::new();
        let mut finite = true;
        for o in &event.outcomes {
            if !labels.insert(o.label.as_str()) {
                report.push(
                    Severity::Error,
                    IssueKind::DuplicateLabel,
                    label,
                    format!("duplicate outcome label `{}`", o.label),
                );
            }
            if !o.p.is_finite() || !o.price.is_finite() {
                finite = false;
                report.push(
                    Severity::Error,
                    IssueKind::NonFinite,
                    label,
                    format!("outcome `{}` has a non-finite p or price", o.label),
                );
                continue;
            }
            if o.p <= 0.0 {
                report.push(
                    Severity::Error,
                    IssueKind::NonPositiveProbability,
                    label,
                    format!("outcome `{}` has non-positive probability {}", o.label, o.p),
                );
            }
            if o.price <= 0.0 {
                report.push(
                    Severity::Error,
                    IssueKind::NonPositivePrice,
                    label,
                    format!("outcome `{}` has non-positive price {}", o.label, o.price),
                );
            }
        }
        if !finite {
            continue;
        }
        let total = event.probability_sum();
        if (total - 1.0).abs() > PROBABILITY_SUM_TOL {
            report.push(
                Severity::Error,
                IssueKind::ProbabilitySum,
                label,
                format!("probabilities sum to {}", round12(total)),
            );
        }
        let overround = event.overround();
        if overround <= 1.0 {
            let severity = match market.overround_policy {
                OverroundPolicy::RequireStrict => Severity::Error,
                OverroundPolicy::AllowWithWarning => Severity::Warning,
            };
            report.push(
                severity,
                IssueKind::Overround,
                label,
                format!(
                    "price sum {} is not above 1: fair-event cash-shift degeneracy risk",
                    round12(overround)
                ),
            );
        }
    }
    report
}

/// Cash plus nonnegative wagers, indexed `[event][outcome]` in original
/// outcome order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Portfolio {
    pub cash: f64,
    pub wagers: Vec<Vec<f64>>,
}

impl Portfolio {
    pub fn all_cash(market: &Market) -> Self {
        Self {
            cash: 1.0,
            wagers: market.events.iter().map(|e| vec![0.0; e.len()]).collect(),
        }
    }

    /// c + Σ π g − 1
    pub fn budget_residual(&self, market: &Market) -> f64 {
        let staked: f64 = market
            .events
            .iter()
            .zip(&self.wagers)
            .flat_map(|(e, g)| e.outcomes.iter().zip(g).map(|(o, g)| o.price * g))
            .sum();
        self.cash + staked - 1.0
    }

    /// Wealth in the product state `state` (one outcome index per event).
    pub fn wealth(&self, state: &[usize]) -> f64 {
        self.cash
            + self
                .wagers
                .iter()
                .zip(state)
                .map(|(g, &i)| g[i])
                .sum::<f64>()
    }

    /// Minimum wealth over all product states: events are independent, so it
    /// is the cash plus the smallest wager of each event.
    pub fn min_wealth(&self) -> f64 {
        self.cash
            + self
                .wagers
                .iter()
                .map(|g| g.iter().copied().fold(f64::INFINITY, f64::min))
                .filter(|m| m.is_finite())
                .sum::<f64>()
    }

    /// Outcome indices with strictly positive wagers, per event.
    pub fn positive_sets(&self, threshold: f64) -> Vec<Vec<usize>> {
        self.wagers
            .iter()
            .map(|g| {
                g.iter()
                    .enumerate()
                    .filter(|(_, &x)| x > threshold)
                    .map(|(i, _)| i)
                    .collect()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(p: &[f64], prices: &[f64]) -> Event {
        Event::from_slices("e", p, prices)
    }

    #[test]
    fn overround_above_one_is_clean() {
        let m = Market::new(vec![ev(&[0.5, 0.5], &[0.55, 0.55])]);
        let r = validate_market(&m);
        assert!(r.is_ok());
        assert!(r.issues.is_empty());
    }

    #[test]
    fn fair_event_rejected_under_strict_policy() {
        let m = Market::new(vec![ev(&[0.5, 0.5], &[0.5, 0.5])]);
        let r = validate_market(&m);
        assert!(!r.is_ok());
        assert!(r.only_degeneracy_errors());
        let msg = &r.errors().next().unwrap().message;
        assert!(msg.contains("fair-event cash-shift degeneracy risk"), "{msg}");

        let r = validate_market(&m.clone().with_policy(OverroundPolicy::AllowWithWarning));
        assert!(r.is_ok());
        assert_eq!(r.warnings().count(), 1);
    }

    #[test]
    fn probability_sum_error_message() {
        let m = Market::new(vec![ev(&[0.7, 0.4], &[0.7, 0.5])]);
        let r = validate_market(&m);
        let e = r.errors().next().unwrap();
        assert_eq!(e.kind, IssueKind::ProbabilitySum);
        assert_eq!(e.message, "probabilities sum to 1.1");
    }

    #[test]
    fn nonpositive_and_duplicate_inputs() {
        let mut e = ev(&[0.0, 1.0], &[0.5, -0.6]);
        e.outcomes[1].label = "o1".into();
        let r = validate_market(&Market::new(vec![e]));
        let kinds: Vec<IssueKind> = r.errors().map(|i| i.kind).collect();
        assert!(kinds.contains(&IssueKind::NonPositiveProbability));
        assert!(kinds.contains(&IssueKind::NonPositivePrice));
        assert!(kinds.contains(&IssueKind::DuplicateLabel));
        assert!(!r.only_degeneracy_errors());
        assert!(!validate_market(&Market::new(vec![])).is_ok());
    }

    #[test]
    fn validation_is_idempotent() {
        let m = Market::new(vec![ev(&[0.7, 0.4], &[0.5, 0.4]), ev(&[0.5, 0.5], &[0.5, 0.5])]);
        assert_eq!(validate_market(&m), validate_market(&m));
    }

    #[test]
    fn edge_ratio_examples() {
        assert_eq!(Outcome::new("a", 0.6, 0.5).edge_ratio(), 1.2);
        assert_eq!(Outcome::new("a", 0.5, 0.5).edge_ratio(), 1.0);
        let r = Outcome::new("a", 0.4, 0.55).edge_ratio();
        assert!((r - 0.727_272_727_272_727_3).abs() < 1e-12);
    }

    #[test]
    fn sort_examples() {
        // ratios (0.8, 1.2, 1.0)
        let e = ev(&[0.4, 0.36, 0.24], &[0.5, 0.3, 0.24]);
        assert_eq!(sort_event(&e), vec![1, 2, 0]);
        let e = ev(&[0.25; 4], &[0.3; 4]);
        assert_eq!(sort_event(&e), vec![0, 1, 2, 3]);
        let e = ev(&[1.0], &[1.1]);
        assert_eq!(sort_event(&e), vec![0]);
    }

    #[test]
    fn renormalize_fixes_sums() {
        let m = Market::new(vec![ev(&[0.7, 0.4], &[0.6, 0.5])]).renormalized();
        assert!(validate_market(&m).is_ok());
        assert!((m.events[0].outcomes[0].p - 0.7 / 1.1).abs() < 1e-15);
    }

    #[test]
    fn json_schema_is_strict() {
        let text = r#"{"events":[{"label":"race","outcomes":[{"label":"a","p":0.6,"price":0.5},{"label":"b","p":0.4,"price":0.55}]}]}"#;
        let m = Market::from_json(text).unwrap();
        assert_eq!(m.events[0].outcomes[1].price, 0.55);
        assert_eq!(m.to_json(), text);
        let typo = text.replace("\"price\":0.5}", "\"prcie\":0.5}");
        assert!(Market::from_json(&typo).is_err());
        let extra = text.replace("{\"events\"", "{\"policy\":1,\"events\"");
        assert!(Market::from_json(&extra).is_err());
    }

    #[test]
    fn portfolio_wealth_helpers() {
        let m = Market::new(vec![ev(&[0.6, 0.4], &[0.5, 0.55]), ev(&[0.6, 0.4], &[0.5, 0.55])]);
        let pf = Portfolio {
            cash: 0.6,
            wagers: vec![vec![0.4, 0.0], vec![0.4, 0.0]],
        };
        assert!(pf.budget_residual(&m).abs() < 1e-15);
        assert_eq!(pf.min_wealth(), 0.6);
        assert!((pf.wealth(&[0, 0]) - 1.4).abs() < 1e-15);
        assert_eq!(pf.positive_sets(0.0), vec![vec![0], vec![0]]);
        assert_eq!(Portfolio::all_cash(&m).budget_residual(&m), 0.0);
    }
}
