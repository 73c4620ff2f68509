//! Simultaneous-event solver on a fixed support family, with the full
//! stationarity / continuation-factor / threshold-identity diagnostics.
//!
//! Expectations are exact: the per-event payout laws are convolved (see
//! [`crate::distribution`]) into the law of the total payout and into the
//! leave-one-out and leave-two-out laws needed for the gradient and Hessian.
//!
//! The optimizer treats cash as one more coordinate with price 1, so the
//! feasible set is {z ≥ 0, Σ price·z = 1}. Each iteration eliminates the
//! coordinate with the largest budget share, pins coordinates sitting at zero
//! whose reduced gradient points outward, and takes a damped Newton step on
//! the rest (gradient step when the reduced Hessian is ill-conditioned).
//! Interior and c = 0 solves go through the same loop.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::distribution::{PayoutDistribution, DEFAULT_MAX_ATOMS};
use crate::error::{Error, Result};
use crate::market::{Market, Portfolio};
use crate::support::SupportFamily;
use crate::utility::Utility;

/// Cash below this after projection means the c = 0 regime.
pub const BOUNDARY_CASH: f64 = 1e-10;

const MAX_CONDITION: f64 = 1e12;
const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub max_atoms: usize,
    pub max_iters: usize,
    /// Stationarity target, relative to max(1, λ).
    pub tol: f64,
    /// Worker threads for the per-event convolutions; 1 runs inline.
    pub threads: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_atoms: DEFAULT_MAX_ATOMS,
            max_iters: 500,
            tol: 1e-10,
            threads: 1,
        }
    }
}

struct Exec {
    #[cfg(feature = "parallel")]
    pool: Option<rayon::ThreadPool>,
}

impl Exec {
    fn new(threads: usize) -> Self {
        #[cfg(feature = "parallel")]
        {
            let pool = if threads > 1 {
                rayon::ThreadPoolBuilder::new().num_threads(threads).build().ok()
            } else {
                None
            };
            Exec { pool }
        }
        #[cfg(not(feature = "parallel"))]
        {
            let _ = threads;
            Exec {}
        }
    }

    /// `(0..n).map(f)` with results in index order regardless of scheduling.
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if let Some(pool) = &self.pool {
            use rayon::prelude::*;
            return pool.install(|| (0..n).into_par_iter().map(&f).collect());
        }
        (0..n).map(f).collect()
    }
}

/// Payout laws for one portfolio.
struct Laws {
    cash: f64,
    /// Σ_ℓ g_{ℓ,X_ℓ}
    total: PayoutDistribution,
    /// Σ_{r≠ℓ} g_{r,X_r}, indexed by ℓ
    leave_one_out: Vec<PayoutDistribution>,
}

impl Laws {
    fn build(market: &Market, portfolio: &Portfolio, max_atoms: usize, exec: &Exec) -> Result<Self> {
        let per_event: Vec<PayoutDistribution> = market
            .events
            .iter()
            .zip(&portfolio.wagers)
            .map(|(e, g)| PayoutDistribution::from_event(g, &e.probabilities()))
            .collect();
        let total = PayoutDistribution::convolve_all(&per_event, max_atoms)?;
        let m = per_event.len();
        let leave_one_out = exec
            .map(m, |l| {
                PayoutDistribution::convolve_all(
                    per_event.iter().enumerate().filter(|(r, _)| *r != l).map(|(_, d)| d),
                    max_atoms,
                )
            })
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            cash: portfolio.cash,
            total,
            leave_one_out,
        })
    }
}

/// E[U(W)] for a portfolio, by convolution.
pub fn objective(market: &Market, portfolio: &Portfolio, utility: &Utility, max_atoms: usize) -> Result<f64> {
    let per_event: Vec<PayoutDistribution> = market
        .events
        .iter()
        .zip(&portfolio.wagers)
        .map(|(e, g)| PayoutDistribution::from_event(g, &e.probabilities()))
        .collect();
    let total = PayoutDistribution::convolve_all(&per_event, max_atoms)?;
    total.expected_utility(portfolio.cash, utility)
}

/// K_ℓ = E_{−ℓ}[U'(R_ℓ)], with R_ℓ = c + Σ_{r≠ℓ} g_{r,X_r}.
pub fn continuation_factor(
    market: &Market,
    portfolio: &Portfolio,
    event: usize,
    utility: &Utility,
    max_atoms: usize,
) -> Result<f64> {
    let background = market
        .events
        .iter()
        .zip(&portfolio.wagers)
        .enumerate()
        .filter(|(r, _)| *r != event)
        .map(|(_, (e, g))| PayoutDistribution::from_event(g, &e.probabilities()));
    let mut law = PayoutDistribution::point(portfolio.cash);
    for d in background {
        law = law.convolve(&d, max_atoms)?;
    }
    law.expected_marginal(0.0, utility)
}

/// Active coordinates (event, outcome) in support order; coordinate 0 of the
/// optimizer vector is cash.
fn active_coords(support: &SupportFamily) -> Vec<(usize, usize)> {
    support
        .events
        .iter()
        .enumerate()
        .flat_map(|(l, s)| s.active().iter().map(move |&i| (l, i)))
        .collect()
}

/// Objective, full gradient and (optionally) full Hessian over (c, g_A).
struct Derivatives {
    objective: f64,
    grad: Vec<f64>,
    hess: Option<DMatrix<f64>>,
}

fn derivatives(
    market: &Market,
    portfolio: &Portfolio,
    coords: &[(usize, usize)],
    utility: &Utility,
    cfg: &SolverConfig,
    exec: &Exec,
    with_hessian: bool,
) -> Result<Derivatives> {
    let laws = Laws::build(market, portfolio, cfg.max_atoms, exec)?;
    let c = laws.cash;
    let n = coords.len() + 1;
    let objective = laws.total.expected_utility(c, utility)?;
    let mut grad = vec![0.0; n];
    grad[0] = laws.total.expected_marginal(c, utility)?;
    let mut diag = vec![0.0; n];
    for (k, &(l, i)) in coords.iter().enumerate() {
        let p = market.events[l].outcomes[i].p;
        let shift = c + portfolio.wagers[l][i];
        grad[k + 1] = p * laws.leave_one_out[l].expected_marginal(shift, utility)?;
        if with_hessian {
            diag[k + 1] = p * laws.leave_one_out[l].expected_curvature(shift, utility)?;
        }
    }
    if !with_hessian {
        return Ok(Derivatives {
            objective,
            grad,
            hess: None,
        });
    }

    let mut h = DMatrix::zeros(n, n);
    h[(0, 0)] = laws.total.expected_curvature(c, utility)?;
    for k in 1..n {
        h[(0, k)] = diag[k];
        h[(k, 0)] = diag[k];
        h[(k, k)] = diag[k];
    }
    // Cross-event blocks need the law of the payout from the remaining events.
    let m = market.events.len();
    let pairs: Vec<(usize, usize)> = (0..m)
        .flat_map(|a| (a + 1..m).map(move |b| (a, b)))
        .filter(|&(a, b)| {
            coords.iter().any(|&(l, _)| l == a) && coords.iter().any(|&(l, _)| l == b)
        })
        .collect();
    let per_event: Vec<PayoutDistribution> = market
        .events
        .iter()
        .zip(&portfolio.wagers)
        .map(|(e, g)| PayoutDistribution::from_event(g, &e.probabilities()))
        .collect();
    let leave_two_out = exec
        .map(pairs.len(), |q| {
            let (a, b) = pairs[q];
            PayoutDistribution::convolve_all(
                per_event
                    .iter()
                    .enumerate()
                    .filter(|(r, _)| *r != a && *r != b)
                    .map(|(_, d)| d),
                cfg.max_atoms,
            )
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    for (q, &(a, b)) in pairs.iter().enumerate() {
        let law = &leave_two_out[q];
        for (k1, &(l1, i)) in coords.iter().enumerate() {
            if l1 != a {
                continue;
            }
            for (k2, &(l2, j)) in coords.iter().enumerate() {
                if l2 != b {
                    continue;
                }
                let pij = market.events[a].outcomes[i].p * market.events[b].outcomes[j].p;
                let shift = c + portfolio.wagers[a][i] + portfolio.wagers[b][j];
                let v = pij * law.expected_curvature(shift, utility)?;
                h[(k1 + 1, k2 + 1)] = v;
                h[(k2 + 1, k1 + 1)] = v;
            }
        }
    }
    Ok(Derivatives {
        objective,
        grad,
        hess: Some(h),
    })
}

/// Gradient of E[U(W)] in the active wagers after eliminating
/// c = 1 − Σ π g: ∂_i = p_i E_{−ℓ}[U'(g_i + R_ℓ)] − π_i E[U'(W)].
pub fn reduced_gradient(
    market: &Market,
    portfolio: &Portfolio,
    support: &SupportFamily,
    utility: &Utility,
    cfg: &SolverConfig,
) -> Result<Vec<f64>> {
    let coords = active_coords(support);
    let d = derivatives(market, portfolio, &coords, utility, cfg, &Exec::new(1), false)?;
    Ok(coords
        .iter()
        .enumerate()
        .map(|(k, &(l, i))| d.grad[k + 1] - market.events[l].outcomes[i].price * d.grad[0])
        .collect())
}

fn to_portfolio(market: &Market, coords: &[(usize, usize)], z: &[f64]) -> Portfolio {
    let mut wagers: Vec<Vec<f64>> = market.events.iter().map(|e| vec![0.0; e.len()]).collect();
    for (k, &(l, i)) in coords.iter().enumerate() {
        wagers[l][i] = z[k + 1];
    }
    Portfolio { cash: z[0], wagers }
}

/// Starting point: each event's log-optimal single-event stake r_i − θ_ℓ,
/// averaged over the events that bet.
fn initial_point(market: &Market, support: &SupportFamily, coords: &[(usize, usize)]) -> Vec<f64> {
    let mut z = vec![0.0; coords.len() + 1];
    let betting = support.events.iter().filter(|s| s.prefix.k > 0).count().max(1) as f64;
    let mut stake = 0.0;
    for (k, &(l, i)) in coords.iter().enumerate() {
        let s = &support.events[l];
        let o = &market.events[l].outcomes[i];
        let theta = s.prefix.threshold().ok().filter(|t| *t > 0.0);
        let raw = match theta {
            Some(t) if o.edge_ratio() > t => o.edge_ratio() - t,
            _ => 0.5 / (s.prefix.k as f64 * o.price),
        };
        z[k + 1] = raw / betting;
        stake += o.price * z[k + 1];
    }
    if stake > 0.95 {
        let shrink = 0.95 / stake;
        for v in z.iter_mut().skip(1) {
            *v *= shrink;
        }
        stake = 0.95;
    }
    z[0] = 1.0 - stake;
    z
}

struct Optimum {
    z: Vec<f64>,
    iterations: usize,
    residual: f64,
    converged: bool,
}

fn optimize(
    market: &Market,
    support: &SupportFamily,
    coords: &[(usize, usize)],
    utility: &Utility,
    cfg: &SolverConfig,
    exec: &Exec,
) -> Result<Optimum> {
    let prices: Vec<f64> = std::iter::once(1.0)
        .chain(coords.iter().map(|&(l, i)| market.events[l].outcomes[i].price))
        .collect();
    let n = prices.len();
    let mut z = initial_point(market, support, coords);
    let mut residual = f64::INFINITY;

    for it in 0..cfg.max_iters {
        let pf = to_portfolio(market, coords, &z);
        let d = derivatives(market, &pf, coords, utility, cfg, exec, true)?;
        let h = d.hess.expect("hessian requested");

        let basic = (0..n)
            .max_by(|&a, &b| (prices[a] * z[a]).total_cmp(&(prices[b] * z[b])).then(b.cmp(&a)))
            .expect("cash coordinate always present");
        let lam = d.grad[basic] / prices[basic];
        let ratio = |j: usize| prices[j] / prices[basic];
        let rg: Vec<f64> = (0..n).map(|j| d.grad[j] - prices[j] * lam).collect();
        let free: Vec<usize> = (0..n)
            .filter(|&j| j != basic && !(z[j] <= 0.0 && rg[j] <= 0.0))
            .collect();
        residual = free.iter().map(|&j| rg[j].abs()).fold(0.0, f64::max);
        if residual <= cfg.tol * lam.max(1.0) {
            return Ok(Optimum {
                z,
                iterations: it,
                residual,
                converged: true,
            });
        }

        let nf = free.len();
        let mut neg_h = DMatrix::zeros(nf, nf);
        for (a, &j) in free.iter().enumerate() {
            for (b, &k) in free.iter().enumerate() {
                let v = h[(j, k)] - ratio(j) * h[(basic, k)] - ratio(k) * h[(j, basic)]
                    + ratio(j) * ratio(k) * h[(basic, basic)];
                neg_h[(a, b)] = -v;
            }
        }
        let g = DVector::from_iterator(nf, free.iter().map(|&j| rg[j]));
        let eig = SymmetricEigen::new(neg_h.clone());
        let (min_e, max_e) = eig
            .eigenvalues
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &e| (lo.min(e), hi.max(e)));
        let newton = if min_e > 0.0 && max_e / min_e <= MAX_CONDITION {
            neg_h.cholesky().map(|ch| ch.solve(&g))
        } else {
            None
        };
        let dir = newton.unwrap_or_else(|| {
            let scale = if max_e > 0.0 { 1.0 / max_e } else { 1.0 };
            &g * scale
        });

        let phi = d.objective;
        let trial = |t: f64| -> Option<(Vec<f64>, f64)> {
            let mut zt = z.clone();
            for (a, &j) in free.iter().enumerate() {
                zt[j] = (z[j] + t * dir[a]).max(0.0);
            }
            let spent: f64 = (0..n).filter(|&j| j != basic).map(|j| prices[j] * zt[j]).sum();
            zt[basic] = (1.0 - spent) / prices[basic];
            if zt[basic] < 0.0 {
                return None;
            }
            let pf = to_portfolio(market, coords, &zt);
            if !(pf.min_wealth() > 0.0) {
                return None;
            }
            let value = objective(market, &pf, utility, cfg.max_atoms).ok()?;
            let gain: f64 = free.iter().map(|&j| rg[j] * (zt[j] - z[j])).sum();
            Some((zt, value - phi - ARMIJO * gain))
        };

        let slack = 1e-15 * phi.abs().max(1.0);
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            if let Some((zt, excess)) = trial(t) {
                if excess >= -slack {
                    accepted = Some(zt);
                    break;
                }
            }
            t *= 0.5;
        }
        match accepted {
            Some(zt) if zt != z => z = zt,
            _ => {
                return Ok(Optimum {
                    z,
                    iterations: it,
                    residual,
                    converged: false,
                })
            }
        }
    }
    Ok(Optimum {
        z,
        iterations: cfg.max_iters,
        residual,
        converged: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OutcomeValue {
    pub outcome: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EventDiagnostics {
    pub label: String,
    pub k: usize,
    #[serde(rename = "P")]
    pub p_mass: f64,
    #[serde(rename = "Q")]
    pub q_mass: f64,
    /// (1 − P)/(1 − Q); `None` when Q ≥ 1.
    pub threshold: Option<f64>,
    /// K_ℓ; `None` if some background wealth is not positive.
    #[serde(rename = "K")]
    pub continuation: Option<f64>,
    /// λ / K_ℓ
    pub threshold_ratio: Option<f64>,
    /// |λ(1 − Q) − (1 − P)K| / λ
    pub identity_residual: Option<f64>,
    /// |λ(1 − Q) − (1 − P)K − ν| / λ
    pub modified_identity_residual: Option<f64>,
    /// |E[U'(W)] − Σ_A p_i E_{−ℓ}[U'(g_i + R_ℓ)] − (1 − P)K| / E[U'(W)];
    /// holds at every feasible portfolio.
    pub conditioning_residual: Option<f64>,
    /// (p_i E_{−ℓ}[U'(g_i + R_ℓ)] − λπ_i) / λ for active outcomes.
    pub active_residuals: Vec<OutcomeValue>,
    /// λπ_j − p_j K_ℓ for inactive outcomes; nonnegative at an optimum.
    pub reduced_cost_margins: Vec<OutcomeValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryDiagnostics {
    pub active: bool,
    /// λ − E[U'(W)]; zero in the interior.
    pub nu: f64,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KktReport {
    pub lambda: f64,
    /// E[U'(W)]
    pub expected_marginal: f64,
    pub events: Vec<EventDiagnostics>,
    pub boundary: BoundaryDiagnostics,
    /// Largest |active residual| over outcomes with a positive wager.
    pub max_stationarity_residual: f64,
}

/// Stationarity, reduced-cost and threshold-identity diagnostics at any
/// feasible portfolio.
///
/// λ is E[U'(W)] when cash is interior. At c = 0 it is read from the first
/// active outcome holding a positive wager and the slack ν = λ − E[U'(W)] is
/// reported.
pub fn kkt_and_identity_report(
    market: &Market,
    portfolio: &Portfolio,
    support: &SupportFamily,
    utility: &Utility,
    cfg: &SolverConfig,
) -> Result<KktReport> {
    let exec = Exec::new(cfg.threads);
    let laws = Laws::build(market, portfolio, cfg.max_atoms, &exec)?;
    let c = portfolio.cash;
    let em = laws.total.expected_marginal(c, utility)?;

    // slice[ℓ][a] = E_{−ℓ}[U'(c + g_i + S_{−ℓ})] for the a-th active outcome
    let mut slices = Vec::with_capacity(market.events.len());
    let mut conts = Vec::with_capacity(market.events.len());
    for (l, s) in support.events.iter().enumerate() {
        let law = &laws.leave_one_out[l];
        let slice = s
            .active()
            .iter()
            .map(|&i| law.expected_marginal(c + portfolio.wagers[l][i], utility))
            .collect::<Result<Vec<f64>>>()?;
        slices.push(slice);
        conts.push(law.expected_marginal(c, utility).ok());
    }

    let boundary = c < BOUNDARY_CASH;
    let lambda = if boundary {
        support
            .events
            .iter()
            .enumerate()
            .flat_map(|(l, s)| s.active().iter().enumerate().map(move |(a, &i)| (l, a, i)))
            .find(|&(l, _, i)| portfolio.wagers[l][i] > 0.0)
            .map(|(l, a, i)| {
                let o = &market.events[l].outcomes[i];
                o.p * slices[l][a] / o.price
            })
            .unwrap_or(em)
    } else {
        em
    };
    let nu = if boundary { lambda - em } else { 0.0 };

    let mut events = Vec::with_capacity(market.events.len());
    let mut max_stationarity: f64 = 0.0;
    for (l, s) in support.events.iter().enumerate() {
        let event = &market.events[l];
        let k_l = conts[l];
        let inactive_p: f64 = s.inactive().iter().map(|&j| event.outcomes[j].p).sum();
        // Σ_{j∉A} p_j K_ℓ, an empty sum when every outcome is active
        let inactive_term = if s.inactive().is_empty() {
            Some(0.0)
        } else {
            k_l.map(|k| inactive_p * k)
        };
        let one_minus_q = 1.0 - s.prefix.q_mass;

        let mut active_residuals = Vec::with_capacity(s.prefix.k);
        let mut active_sum = 0.0;
        for (a, &i) in s.active().iter().enumerate() {
            let o = &event.outcomes[i];
            let lhs = o.p * slices[l][a];
            active_sum += lhs;
            let value = (lhs - lambda * o.price) / lambda;
            if portfolio.wagers[l][i] > 0.0 {
                max_stationarity = max_stationarity.max(value.abs());
            }
            active_residuals.push(OutcomeValue { outcome: i, value });
        }
        let reduced_cost_margins = match k_l {
            Some(k) => s
                .inactive()
                .iter()
                .map(|&j| OutcomeValue {
                    outcome: j,
                    value: lambda * event.outcomes[j].price - event.outcomes[j].p * k,
                })
                .collect(),
            None => Vec::new(),
        };
        events.push(EventDiagnostics {
            label: event.label.clone(),
            k: s.prefix.k,
            p_mass: s.prefix.p_mass,
            q_mass: s.prefix.q_mass,
            threshold: s.prefix.threshold().ok(),
            continuation: k_l,
            threshold_ratio: k_l.map(|k| lambda / k),
            identity_residual: inactive_term.map(|t| (lambda * one_minus_q - t).abs() / lambda),
            modified_identity_residual: inactive_term
                .map(|t| (lambda * one_minus_q - t - nu).abs() / lambda),
            conditioning_residual: inactive_term.map(|t| (em - active_sum - t).abs() / em),
            active_residuals,
            reduced_cost_margins,
        });
    }

    let note = boundary.then(|| {
        "cash is at its lower bound: the interior threshold identity does not apply; \
         cross-check this support with the oracle"
            .to_string()
    });
    Ok(KktReport {
        lambda,
        expected_marginal: em,
        events,
        boundary: BoundaryDiagnostics {
            active: boundary,
            nu,
            note,
        },
        max_stationarity_residual: max_stationarity,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub utility: Utility,
    pub portfolio: Portfolio,
    pub objective: f64,
    pub kkt: KktReport,
    pub iterations: usize,
    /// Max reduced-gradient magnitude over free coordinates at exit.
    pub stationarity: f64,
    pub converged: bool,
}

impl SolveReport {
    pub fn lambda(&self) -> f64 {
        self.kkt.lambda
    }

    pub fn cash(&self) -> f64 {
        self.portfolio.cash
    }
}

/// Maximizes E[U(W)] over portfolios supported on `support`.
pub fn fixed_support_solve(
    market: &Market,
    support: &SupportFamily,
    utility: &Utility,
    cfg: &SolverConfig,
) -> Result<SolveReport> {
    utility.validate()?;
    if support.events.len() != market.events.len() {
        return Err(Error::InvalidMarket(format!(
            "support has {} events, market has {}",
            support.events.len(),
            market.events.len()
        )));
    }
    let exec = Exec::new(cfg.threads);
    let coords = active_coords(support);
    let out = optimize(market, support, &coords, utility, cfg, &exec)?;
    let portfolio = to_portfolio(market, &coords, &out.z);
    let objective = objective(market, &portfolio, utility, cfg.max_atoms)?;
    let kkt = kkt_and_identity_report(market, &portfolio, support, utility, cfg)?;
    let report = SolveReport {
        utility: *utility,
        portfolio,
        objective,
        kkt,
        iterations: out.iterations,
        stationarity: out.residual,
        converged: out.converged,
    };
    if !report.converged {
        return Err(Error::NoConvergence {
            iterations: out.iterations,
            residual: out.residual,
            best: Some(Box::new(report)),
        });
    }
    Ok(report)
}
