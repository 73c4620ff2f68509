use thiserror::Error;

use crate::solver::SolveReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid utility: {0}")]
    InvalidUtility(String),

    #[error("invalid market: {0}")]
    InvalidMarket(String),

    /// A prefix reached price mass Q >= 1 (or probability mass P = 1), so the
    /// threshold (1 - P) / (1 - Q) has no meaningful denominator.
    #[error("degenerate denominator in event `{event}`: P = {p_mass}, Q = {q_mass} (fair or sub-fair prefix)")]
    DegenerateDenominator {
        event: String,
        p_mass: f64,
        q_mass: f64,
    },

    #[error("marginal utility has no preimage at {argument} (range is (0, {sup}))")]
    Domain { argument: f64, sup: f64 },

    #[error("multiplier bracket search failed: {0}")]
    BracketFailure(String),

    #[error("support inconsistency: active outcome {outcome} of event `{event}` gets wager {wager}")]
    SupportInconsistency {
        event: String,
        outcome: usize,
        wager: f64,
    },

    #[error("payout distribution would need {atoms} atoms, limit is {limit}")]
    AtomBudgetExceeded { atoms: u128, limit: usize },

    #[error("wealth {wealth} is not positive")]
    NonpositiveWealth { wealth: f64 },

    #[error("market has {states} product states, oracle limit is {limit}")]
    OracleLimit { states: u128, limit: usize },

    #[error("no convergence after {iterations} iterations (stationarity residual {residual:e})")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        best: Option<Box<SolveReport>>,
    },
}
