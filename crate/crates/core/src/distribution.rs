//! Exact discrete payout distributions and the expectations taken over them.
//!
//! Events are independent, so the law of the total payout Σ_ℓ g_{ℓ,X_ℓ} is
//! the convolution of the per-event payout laws. Atoms are merged only on
//! exact value equality and kept in ascending order; every expectation is
//! accumulated in that order with compensated summation.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::utility::Utility;

pub const DEFAULT_MAX_ATOMS: usize = 10_000_000;

/// Neumaier's variant of Kahan summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Atom {
    pub value: f64,
    pub prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PayoutDistribution {
    atoms: Vec<Atom>,
}

fn sorted_merged(mut atoms: Vec<Atom>) -> Vec<Atom> {
    // stable sort keeps the generation order among equal values, so merged
    // probabilities are summed in a fixed order
    atoms.sort_by(|a, b| a.value.total_cmp(&b.value));
    let mut out: Vec<Atom> = Vec::with_capacity(atoms.len());
    for atom in atoms {
        match out.last_mut() {
            Some(last) if last.value == atom.value => last.prob += atom.prob,
            _ => out.push(atom),
        }
    }
    out
}

impl PayoutDistribution {
    /// Degenerate law at `value`; `point(0.0)` is the convolution identity.
    pub fn point(value: f64) -> Self {
        Self {
            atoms: vec![Atom { value, prob: 1.0 }],
        }
    }

    /// Law of g_{X} for one event: atom (g_i, p_i) per outcome.
    pub fn from_event(wagers: &[f64], probs: &[f64]) -> Self {
        assert_eq!(wagers.len(), probs.len());
        let atoms = wagers
            .iter()
            .zip(probs)
            .map(|(&value, &prob)| Atom { value, prob })
            .collect();
        Self {
            atoms: sorted_merged(atoms),
        }
    }

    pub fn from_atoms(atoms: Vec<Atom>) -> Self {
        Self {
            atoms: sorted_merged(atoms),
        }
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn min_value(&self) -> f64 {
        self.atoms.first().map_or(f64::NAN, |a| a.value)
    }

    pub fn total_probability(&self) -> f64 {
        let mut s = CompensatedSum::default();
        for a in &self.atoms {
            s.add(a.prob);
        }
        s.value()
    }

    /// Law of the sum of two independent payouts.
    pub fn convolve(&self, other: &Self, max_atoms: usize) -> Result<Self> {
        let atoms = self.atoms.len() as u128 * other.atoms.len() as u128;
        if atoms > max_atoms as u128 {
            return Err(Error::AtomBudgetExceeded {
                atoms,
                limit: max_atoms,
            });
        }
        let mut out = Vec::with_capacity(atoms as usize);
        for a in &self.atoms {
            for b in &other.atoms {
                out.push(Atom {
                    value: a.value + b.value,
                    prob: a.prob * b.prob,
                });
            }
        }
        Ok(Self {
            atoms: sorted_merged(out),
        })
    }

    /// Convolution of many laws, left to right.
    pub fn convolve_all<'a>(
        parts: impl IntoIterator<Item = &'a PayoutDistribution>,
        max_atoms: usize,
    ) -> Result<Self> {
        let mut acc = Self::point(0.0);
        for d in parts {
            acc = acc.convolve(d, max_atoms)?;
        }
        Ok(acc)
    }

    /// E[f(shift + V)] accumulated in ascending value order.
    pub fn expect(&self, shift: f64, f: impl Fn(f64) -> f64) -> f64 {
        let mut s = CompensatedSum::default();
        for a in &self.atoms {
            s.add(a.prob * f(shift + a.value));
        }
        s.value()
    }

    fn check_positive(&self, shift: f64) -> Result<()> {
        let w = shift + self.min_value();
        if !(w > 0.0) {
            return Err(Error::NonpositiveWealth { wealth: w });
        }
        Ok(())
    }

    /// E[U'(shift + V)].
    pub fn expected_marginal(&self, shift: f64, utility: &Utility) -> Result<f64> {
        expected_marginal(self, shift, utility)
    }

    /// E[U''(shift + V)].
    pub fn expected_curvature(&self, shift: f64, utility: &Utility) -> Result<f64> {
        self.check_positive(shift)?;
        Ok(self.expect(shift, |w| utility.curvature(w)))
    }

    /// E[U(shift + V)].
    pub fn expected_utility(&self, shift: f64, utility: &Utility) -> Result<f64> {
        self.check_positive(shift)?;
        Ok(self.expect(shift, |w| utility.value(w)))
    }
}

pub fn convolve(a: &PayoutDistribution, b: &PayoutDistribution, max_atoms: usize) -> Result<PayoutDistribution> {
    a.convolve(b, max_atoms)
}

pub fn event_payout_distribution(wagers: &[f64], probs: &[f64]) -> PayoutDistribution {
    PayoutDistribution::from_event(wagers, probs)
}

pub fn expected_marginal(dist: &PayoutDistribution, shift: f64, utility: &Utility) -> Result<f64> {
    dist.check_positive(shift)?;
    Ok(dist.expect(shift, |w| utility.marginal(w)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pairs(d: &PayoutDistribution) -> Vec<(f64, f64)> {
        d.atoms().iter().map(|a| (a.value, a.prob)).collect()
    }

    #[test]
    fn event_payouts() {
        let d = event_payout_distribution(&[0.4, 0.0], &[0.6, 0.4]);
        assert_eq!(pairs(&d), vec![(0.0, 0.4), (0.4, 0.6)]);
        let d = event_payout_distribution(&[0.0, 0.0, 0.0], &[0.2, 0.3, 0.5]);
        assert_eq!(d.len(), 1);
        assert!((d.atoms()[0].prob - 1.0).abs() < 1e-15);
        let d = event_payout_distribution(&[0.2, 0.2, 0.0], &[0.5, 0.3, 0.2]);
        assert_eq!(pairs(&d), vec![(0.0, 0.2), (0.2, 0.8)]);
    }

    #[test]
    fn convolution_examples() {
        let d = event_payout_distribution(&[0.4, 0.0], &[0.6, 0.4]);
        let id = PayoutDistribution::point(0.0);
        assert_eq!(convolve(&id, &d, 100).unwrap(), d);
        let dd = convolve(&d, &d, 100).unwrap();
        let got = pairs(&dd);
        let want = [(0.0, 0.16), (0.4, 0.48), (0.8, 0.36)];
        assert_eq!(got.len(), 3);
        for ((v, p), (wv, wp)) in got.iter().zip(want) {
            assert_eq!(*v, wv);
            assert!((p - wp).abs() < 1e-15);
        }
    }

    #[test]
    fn atom_budget_is_hard() {
        let d = event_payout_distribution(&[0.1, 0.2, 0.3], &[0.2, 0.3, 0.5]);
        assert!(matches!(
            convolve(&d, &d, 8),
            Err(Error::AtomBudgetExceeded { atoms: 9, limit: 8 })
        ));
        assert!(convolve(&d, &d, 9).is_ok());
    }

    #[test]
    fn expected_marginal_examples() {
        let d = PayoutDistribution::point(0.0);
        assert_eq!(expected_marginal(&d, 0.8, &Utility::Log).unwrap(), 1.25);
        let d = PayoutDistribution::from_atoms(vec![
            Atom { value: 0.0, prob: 0.5 },
            Atom { value: 1.0, prob: 0.5 },
        ]);
        assert_eq!(expected_marginal(&d, 1.0, &Utility::Log).unwrap(), 0.75);
        assert!(matches!(
            expected_marginal(&d, 0.0, &Utility::Log),
            Err(Error::NonpositiveWealth { .. })
        ));
    }

    proptest! {
        #[test]
        fn compensated_matches_naive(
            raw in proptest::collection::vec((0.0f64..3.0, 0.01f64..1.0), 1..60),
            shift in 0.05f64..2.0,
        ) {
            let total: f64 = raw.iter().map(|x| x.1).sum();
            let atoms: Vec<Atom> = raw.iter().map(|&(v, p)| Atom { value: v, prob: p / total }).collect();
            let naive: f64 = atoms.iter().rev().map(|a| a.prob / (shift + a.value)).sum();
            let d = PayoutDistribution::from_atoms(atoms);
            let ordered = expected_marginal(&d, shift, &Utility::Log).unwrap();
            prop_assert!(((ordered - naive) / naive).abs() <= 1e-14);
        }

        #[test]
        fn convolution_preserves_mass_and_order(
            a in proptest::collection::vec((0.0f64..1.0, 0.01f64..1.0), 1..8),
            b in proptest::collection::vec((0.0f64..1.0, 0.01f64..1.0), 1..8),
        ) {
            let norm = |v: &[(f64, f64)]| {
                let t: f64 = v.iter().map(|x| x.1).sum();
                PayoutDistribution::from_atoms(v.iter().map(|&(x, p)| Atom { value: x, prob: p / t }).collect())
            };
            let (da, db) = (norm(&a), norm(&b));
            let c = da.convolve(&db, 1000).unwrap();
            prop_assert!((c.total_probability() - 1.0).abs() < 1e-13);
            prop_assert!(c.atoms().windows(2).all(|w| w[0].value < w[1].value));
            let mean = |d: &PayoutDistribution| d.expect(0.0, |x| x);
            prop_assert!((mean(&c) - mean(&da) - mean(&db)).abs() < 1e-13);
            let flipped = db.convolve(&da, 1000).unwrap();
            prop_assert_eq!(c.len(), flipped.len());
            for (x, y) in c.atoms().iter().zip(flipped.atoms()) {
                prop_assert_eq!(x.value, y.value);
                prop_assert!((x.prob - y.prob).abs() <= 1e-15);
            }
        }
    }
}
