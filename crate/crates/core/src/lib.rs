//! Optimal wagering on simultaneous independent events under an arbitrary
//! admissible utility.
//!
//! The active support is chosen per event by a greedy edge-ratio prefix rule
//! that never looks at the utility ([`support`]). Wager sizes then come from
//! an exact one-dimensional multiplier equation for a single event
//! ([`single`]) or a Newton solve over exact convolved expectations for many
//! events ([`solver`]). [`oracle`] re-solves small instances by brute force
//! so both can be checked from the outside.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod distribution;
pub mod error;
pub mod market;
pub mod oracle;
pub mod single;
pub mod solver;
pub mod support;
pub mod utility;

#[cfg(feature = "cli")]
pub mod cli;

pub use error::{Error, Result};
pub use market::{Event, Market, Outcome, OverroundPolicy, Portfolio, ValidationReport};
pub use solver::{fixed_support_solve, SolveReport, SolverConfig};
pub use support::{simultaneous_support, SupportFamily};
pub use utility::Utility;

/// Support selection followed by the fixed-support solve.
pub fn solve(market: &Market, utility: &Utility, cfg: &SolverConfig) -> Result<(SupportFamily, SolveReport)> {
    let support = simultaneous_support(market)?;
    let report = fixed_support_solve(market, &support, utility, cfg)?;
    Ok((support, report))
}
