//! Admissible utilities: strictly increasing, strictly concave, C¹ on (0, ∞).
//!
//! Every member carries exact closed forms for the value, the marginal
//! utility, its inverse and the curvature, so that the single-event
//! reduction never needs a numerical inversion.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", from = "UtilityRepr")]
pub enum Utility {
    /// U(w) = ln w
    #[default]
    Log,
    /// U(w) = w^(1-γ) / (1-γ); γ = 1 is treated as `Log`.
    Crra { gamma: f64 },
    /// U(w) = -exp(-a w), so U'(w) = a exp(-a w) ranges over (0, a).
    NegExp { a: f64 },
}

// struct variants so that `{"kind":"log","gamma":2}` is rejected
#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum UtilityRepr {
    Log {},
    Crra { gamma: f64 },
    NegExp { a: f64 },
}

impl From<UtilityRepr> for Utility {
    fn from(r: UtilityRepr) -> Self {
        match r {
            UtilityRepr::Log {} => Utility::Log,
            UtilityRepr::Crra { gamma } => Utility::Crra { gamma },
            UtilityRepr::NegExp { a } => Utility::NegExp { a },
        }
    }
}

impl Utility {
    pub fn crra(gamma: f64) -> Self {
        Utility::Crra { gamma }.canonical()
    }

    pub fn neg_exp(a: f64) -> Self {
        Utility::NegExp { a }
    }

    /// Maps `Crra { gamma: 1 }` onto `Log`.
    pub fn canonical(self) -> Self {
        match self {
            Utility::Crra { gamma: 1.0 } => Utility::Log,
            other => other,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Utility::Log => Ok(()),
            Utility::Crra { gamma } if gamma.is_finite() && gamma > 0.0 => Ok(()),
            Utility::Crra { gamma } => Err(Error::InvalidUtility(format!(
                "crra gamma must be a positive finite number, got {gamma}"
            ))),
            Utility::NegExp { a } if a.is_finite() && a > 0.0 => Ok(()),
            Utility::NegExp { a } => Err(Error::InvalidUtility(format!(
                "neg_exp coefficient must be a positive finite number, got {a}"
            ))),
        }
    }

    pub fn name(&self) -> String {
        match self.canonical() {
            Utility::Log => "log".to_string(),
            Utility::Crra { gamma } => format!("crra({gamma})"),
            Utility::NegExp { a } => format!("neg_exp({a})"),
        }
    }

    pub fn value(&self, w: f64) -> f64 {
        if w <= 0.0 {
            return f64::NEG_INFINITY;
        }
        match self.canonical() {
            Utility::Log => w.ln(),
            Utility::Crra { gamma } => w.powf(1.0 - gamma) / (1.0 - gamma),
            Utility::NegExp { a } => -(-a * w).exp(),
        }
    }

    /// U'(w)
    pub fn marginal(&self, w: f64) -> f64 {
        match self.canonical() {
            Utility::Log => 1.0 / w,
            Utility::Crra { gamma } => w.powf(-gamma),
            Utility::NegExp { a } => a * (-a * w).exp(),
        }
    }

    /// U''(w), strictly negative.
    pub fn curvature(&self, w: f64) -> f64 {
        match self.canonical() {
            Utility::Log => -1.0 / (w * w),
            Utility::Crra { gamma } => -gamma * w.powf(-gamma - 1.0),
            Utility::NegExp { a } => -a * a * (-a * w).exp(),
        }
    }

    /// Supremum of the range of U' over (0, ∞).
    pub fn marginal_sup(&self) -> f64 {
        match self.canonical() {
            Utility::Log | Utility::Crra { .. } => f64::INFINITY,
            Utility::NegExp { a } => a,
        }
    }

    /// (U')⁻¹(y). Fails when `y` lies outside (0, sup U').
    pub fn marginal_inverse(&self, y: f64) -> Result<f64> {
        let sup = self.marginal_sup();
        if !(y > 0.0 && y < sup) {
            return Err(Error::Domain { argument: y, sup });
        }
        Ok(match self.canonical() {
            Utility::Log => 1.0 / y,
            Utility::Crra { gamma } => y.powf(-1.0 / gamma),
            Utility::NegExp { a } => -(y / a).ln() / a,
        })
    }

    /// d/dy (U')⁻¹(y) = 1 / U''((U')⁻¹(y)).
    pub fn marginal_inverse_derivative(&self, y: f64) -> Result<f64> {
        let w = self.marginal_inverse(y)?;
        Ok(1.0 / self.curvature(w))
    }
}
