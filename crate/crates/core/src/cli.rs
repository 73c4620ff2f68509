//! Command-line front end.
//!
//! Exit codes: 0 ok, 2 invalid input, 3 degenerate (fair or sub-fair)
//! event, 4 no convergence, 5 oracle/solver mismatch.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::market::{Market, OverroundPolicy};
use crate::oracle::{compare, oracle_solve, OracleConfig, OracleSolution};
use crate::solver::{fixed_support_solve, SolveReport, SolverConfig};
use crate::support::{simultaneous_support, SupportFamily};
use crate::utility::Utility;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_DEGENERATE: i32 = 3;
pub const EXIT_NO_CONVERGENCE: i32 = 4;
pub const EXIT_MISMATCH: i32 = 5;

pub const THREADS_ENV: &str = "KELLY_SUPPORT_THREADS";

#[derive(Debug, Parser)]
#[command(name = "kelly-support", version, about = "Utility-invariant wagering support and exact solves")]
pub struct Cli {
    #[command(subcommand)]
    pub command: CommandKind,
    #[command(flatten)]
    pub options: Options,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum CommandKind {
    /// Per-event greedy prefix supports and thresholds
    Support,
    /// Solve on the selected support and print the full diagnostics
    Solve,
    /// Cross-check the solver against the brute-force oracle
    Verify,
    /// Run only the brute-force oracle
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum UtilityKind {
    Log,
    Crra,
    NegExp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Format {
    #[default]
    Json,
    Table,
}

#[derive(Debug, Clone, Args)]
pub struct Options {
    /// Market JSON file
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "log", global = true)]
    pub utility: UtilityKind,
    /// CRRA relative risk aversion
    #[arg(long, global = true)]
    pub gamma: Option<f64>,
    /// Negative-exponential absolute risk aversion
    #[arg(long = "a", global = true)]
    pub a: Option<f64>,
    /// Stationarity tolerance for the solver
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long, global = true)]
    pub max_atoms: Option<usize>,
    #[arg(long, value_enum, default_value = "json", global = true)]
    pub format: Format,
    /// Divide each event's probabilities by their sum instead of rejecting
    #[arg(long, global = true)]
    pub renormalize: bool,
    /// Accept events with price sum ≤ 1 (with a warning)
    #[arg(long, global = true)]
    pub allow_subfair: bool,
    /// Support override JSON: {"events":[{"label":..,"active":[..]}]}
    #[arg(long, global = true)]
    pub support: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CliConfig {
    pub command: CommandKind,
    pub input: PathBuf,
    pub utility: Utility,
    pub solver: SolverConfig,
    pub format: Format,
    pub renormalize: bool,
    pub policy: OverroundPolicy,
    pub support_override: Option<PathBuf>,
}

impl CliConfig {
    pub fn from_cli(cli: Cli) -> Result<Self, String> {
        let o = cli.options;
        let input = o.input.ok_or("--input PATH is required")?;
        let utility = match o.utility {
            UtilityKind::Log => Utility::Log,
            UtilityKind::Crra => Utility::crra(o.gamma.ok_or("--utility crra needs --gamma")?),
            UtilityKind::NegExp => Utility::neg_exp(o.a.ok_or("--utility neg_exp needs --a")?),
        };
        utility.validate().map_err(|e| e.to_string())?;
        let mut solver = SolverConfig {
            threads: threads_from_env(),
            ..SolverConfig::default()
        };
        if let Some(tol) = o.tol {
            if !(tol > 0.0) {
                return Err(format!("--tol must be positive, got {tol}"));
            }
            solver.tol = tol;
        }
        if let Some(n) = o.max_atoms {
            solver.max_atoms = n;
        }
        Ok(Self {
            command: cli.command,
            input,
            utility,
            solver,
            format: o.format,
            renormalize: o.renormalize,
            policy: if o.allow_subfair {
                OverroundPolicy::AllowWithWarning
            } else {
                OverroundPolicy::RequireStrict
            },
            support_override: o.support,
        })
    }
}

/// Thread cap from `KELLY_SUPPORT_THREADS`, else the available parallelism.
pub fn threads_from_env() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CommandOutput {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl CommandOutput {
    fn fail(code: i32, message: impl Into<String>) -> Self {
        let mut stderr = message.into();
        stderr.push('\n');
        Self {
            code,
            stdout: String::new(),
            stderr,
        }
    }
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::DegenerateDenominator { .. } => EXIT_DEGENERATE,
        Error::NoConvergence { .. } | Error::BracketFailure(_) => EXIT_NO_CONVERGENCE,
        _ => EXIT_VALIDATION,
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string(value).expect("report serialization cannot fail");
    s.push('\n');
    s
}

/// Loads, optionally renormalizes and validates the market.
fn load_market(config: &CliConfig, warnings: &mut String) -> Result<Market, CommandOutput> {
    let text = std::fs::read_to_string(&config.input).map_err(|e| {
        CommandOutput::fail(
            EXIT_VALIDATION,
            format!("cannot read {}: {e}", config.input.display()),
        )
    })?;
    let mut market = Market::from_json(&text)
        .map_err(|e| CommandOutput::fail(EXIT_VALIDATION, format!("invalid market JSON: {e}")))?
        .with_policy(config.policy);
    if config.renormalize {
        market = market.renormalized();
    }
    let report = market.validate();
    for w in report.warnings() {
        let _ = writeln!(warnings, "warning: {}: {}", w.event.as_deref().unwrap_or("-"), w.message);
    }
    if !report.is_ok() {
        let code = if report.only_degeneracy_errors() {
            EXIT_DEGENERATE
        } else {
            EXIT_VALIDATION
        };
        let mut msg = String::new();
        for e in report.errors() {
            let _ = writeln!(msg, "error: {}: {}", e.event.as_deref().unwrap_or("-"), e.message);
        }
        return Err(CommandOutput::fail(code, msg.trim_end()));
    }
    Ok(market)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SupportFile {
    events: Vec<SupportFileEvent>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SupportFileEvent {
    label: String,
    active: Vec<String>,
}

fn load_support_override(path: &Path, market: &Market) -> Result<SupportFamily, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let file: SupportFile = serde_json::from_str(&text).map_err(|e| format!("invalid support JSON: {e}"))?;
    let mut sets = vec![Vec::new(); market.events.len()];
    for entry in file.events {
        let l = market
            .events
            .iter()
            .position(|e| e.label == entry.label)
            .ok_or_else(|| format!("support names unknown event `{}`", entry.label))?;
        for label in entry.active {
            let i = market.events[l]
                .outcomes
                .iter()
                .position(|o| o.label == label)
                .ok_or_else(|| format!("support names unknown outcome `{label}` in `{}`", entry.label))?;
            sets[l].push(i);
        }
    }
    Ok(SupportFamily::from_active_sets(market, &sets))
}

fn support_for(config: &CliConfig, market: &Market) -> Result<SupportFamily, CommandOutput> {
    match &config.support_override {
        Some(path) => load_support_override(path, market).map_err(|m| CommandOutput::fail(EXIT_VALIDATION, m)),
        None => simultaneous_support(market).map_err(|e| CommandOutput::fail(exit_code(&e), e.to_string())),
    }
}

// ---------------------------------------------------------------- support

#[derive(Debug, Serialize)]
struct SupportOutcomeRow {
    rank: usize,
    label: String,
    p: f64,
    price: f64,
    edge_ratio: f64,
    active: bool,
}

#[derive(Debug, Serialize)]
struct SupportEventRow {
    label: String,
    k: usize,
    #[serde(rename = "P")]
    p_mass: f64,
    #[serde(rename = "Q")]
    q_mass: f64,
    threshold: Option<f64>,
    /// r_{k+1} − threshold
    margin: Option<f64>,
    outcomes: Vec<SupportOutcomeRow>,
}

#[derive(Debug, Serialize)]
struct SupportOutput {
    events: Vec<SupportEventRow>,
}

fn support_output(market: &Market, support: &SupportFamily) -> SupportOutput {
    let events = market
        .events
        .iter()
        .zip(&support.events)
        .map(|(e, s)| SupportEventRow {
            label: e.label.clone(),
            k: s.prefix.k,
            p_mass: s.prefix.p_mass,
            q_mass: s.prefix.q_mass,
            threshold: s.prefix.threshold().ok(),
            margin: s.margin(e),
            outcomes: s
                .order
                .iter()
                .enumerate()
                .map(|(rank, &i)| {
                    let o = &e.outcomes[i];
                    SupportOutcomeRow {
                        rank: rank + 1,
                        label: o.label.clone(),
                        p: o.p,
                        price: o.price,
                        edge_ratio: o.edge_ratio(),
                        active: rank < s.prefix.k,
                    }
                })
                .collect(),
        })
        .collect();
    SupportOutput { events }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| x.to_string())
}

fn support_table(out: &SupportOutput) -> String {
    let mut s = String::new();
    for e in &out.events {
        let _ = writeln!(
            s,
            "event {}  k={}  P={}  Q={}  threshold={}  margin={}",
            e.label,
            e.k,
            e.p_mass,
            e.q_mass,
            opt(e.threshold),
            opt(e.margin)
        );
        let _ = writeln!(s, "  {:>4}  {:<16} {:>22} {:>22} {:>22}  active", "rank", "outcome", "p", "price", "edge_ratio");
        for o in &e.outcomes {
            let _ = writeln!(
                s,
                "  {:>4}  {:<16} {:>22} {:>22} {:>22}  {}",
                o.rank, o.label, o.p, o.price, o.edge_ratio, o.active
            );
        }
    }
    s
}

pub fn cmd_support(config: &CliConfig) -> CommandOutput {
    let mut stderr = String::new();
    let market = match load_market(config, &mut stderr) {
        Ok(m) => m,
        Err(out) => return out,
    };
    let support = match support_for(config, &market) {
        Ok(s) => s,
        Err(mut out) => {
            out.stderr.insert_str(0, &stderr);
            return out;
        }
    };
    let out = support_output(&market, &support);
    let stdout = match config.format {
        Format::Json => to_json(&out),
        Format::Table => support_table(&out),
    };
    CommandOutput {
        code: EXIT_OK,
        stdout,
        stderr,
    }
}

// ------------------------------------------------------------------ solve

#[derive(Debug, Serialize)]
struct WagerRow {
    event: String,
    outcome: String,
    g: f64,
}

#[derive(Debug, Serialize)]
struct SupportBlock {
    event: String,
    k: usize,
    active: Vec<String>,
}

#[derive(Debug, Serialize)]
struct MarginRow {
    outcome: String,
    margin: f64,
}

#[derive(Debug, Serialize)]
struct ResidualRow {
    outcome: String,
    residual: f64,
}

#[derive(Debug, Serialize)]
struct EventRow {
    label: String,
    k: usize,
    #[serde(rename = "P")]
    p_mass: f64,
    #[serde(rename = "Q")]
    q_mass: f64,
    threshold: Option<f64>,
    #[serde(rename = "K")]
    continuation: Option<f64>,
    identity_residual: Option<f64>,
    reduced_cost_margins: Vec<MarginRow>,
    threshold_ratio: Option<f64>,
    modified_identity_residual: Option<f64>,
    conditioning_residual: Option<f64>,
    active_residuals: Vec<ResidualRow>,
}

#[derive(Debug, Serialize)]
struct BoundaryBlock {
    active: bool,
    nu: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    note: Option<String>,
}

#[derive(Debug, Serialize)]
struct SolveOutput {
    utility: Utility,
    converged: bool,
    iterations: usize,
    objective: f64,
    cash: f64,
    lambda: f64,
    wagers: Vec<WagerRow>,
    support: Vec<SupportBlock>,
    events: Vec<EventRow>,
    boundary: BoundaryBlock,
}

fn solve_output(market: &Market, support: &SupportFamily, report: &SolveReport) -> SolveOutput {
    let label = |l: usize, i: usize| market.events[l].outcomes[i].label.clone();
    let wagers = market
        .events
        .iter()
        .enumerate()
        .flat_map(|(l, e)| {
            e.outcomes.iter().enumerate().map(move |(i, o)| WagerRow {
                event: e.label.clone(),
                outcome: o.label.clone(),
                g: report.portfolio.wagers[l][i],
            })
        })
        .collect();
    let support_rows = support
        .events
        .iter()
        .enumerate()
        .map(|(l, s)| SupportBlock {
            event: market.events[l].label.clone(),
            k: s.prefix.k,
            active: s.active().iter().map(|&i| label(l, i)).collect(),
        })
        .collect();
    let events = report
        .kkt
        .events
        .iter()
        .enumerate()
        .map(|(l, e)| EventRow {
            label: e.label.clone(),
            k: e.k,
            p_mass: e.p_mass,
            q_mass: e.q_mass,
            threshold: e.threshold,
            continuation: e.continuation,
            identity_residual: e.identity_residual,
            reduced_cost_margins: e
                .reduced_cost_margins
                .iter()
                .map(|m| MarginRow {
                    outcome: label(l, m.outcome),
                    margin: m.value,
                })
                .collect(),
            threshold_ratio: e.threshold_ratio,
            modified_identity_residual: e.modified_identity_residual,
            conditioning_residual: e.conditioning_residual,
            active_residuals: e
                .active_residuals
                .iter()
                .map(|r| ResidualRow {
                    outcome: label(l, r.outcome),
                    residual: r.value,
                })
                .collect(),
        })
        .collect();
    SolveOutput {
        utility: report.utility,
        converged: report.converged,
        iterations: report.iterations,
        objective: report.objective,
        cash: report.portfolio.cash,
        lambda: report.kkt.lambda,
        wagers,
        support: support_rows,
        events,
        boundary: BoundaryBlock {
            active: report.kkt.boundary.active,
            nu: report.kkt.boundary.nu,
            note: report.kkt.boundary.note.clone(),
        },
    }
}

fn solve_table(out: &SolveOutput) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "utility {}  converged={}  iterations={}",
        out.utility.name(),
        out.converged,
        out.iterations
    );
    let _ = writeln!(s, "objective {}", out.objective);
    let _ = writeln!(s, "cash      {}", out.cash);
    let _ = writeln!(s, "lambda    {}", out.lambda);
    let _ = writeln!(s, "boundary  active={} nu={}", out.boundary.active, out.boundary.nu);
    let _ = writeln!(s, "{:<16} {:<16} {:>24}", "event", "outcome", "g");
    for w in &out.wagers {
        let _ = writeln!(s, "{:<16} {:<16} {:>24}", w.event, w.outcome, w.g);
    }
    for e in &out.events {
        let _ = writeln!(
            s,
            "event {}  k={}  P={}  Q={}  threshold={}  K={}  identity_residual={}",
            e.label,
            e.k,
            e.p_mass,
            e.q_mass,
            opt(e.threshold),
            opt(e.continuation),
            opt(e.identity_residual)
        );
        for m in &e.reduced_cost_margins {
            let _ = writeln!(s, "  reduced cost margin {:<16} {}", m.outcome, m.margin);
        }
    }
    s
}

pub fn cmd_solve(config: &CliConfig) -> CommandOutput {
    let mut stderr = String::new();
    let market = match load_market(config, &mut stderr) {
        Ok(m) => m,
        Err(out) => return out,
    };
    let support = match support_for(config, &market) {
        Ok(s) => s,
        Err(mut out) => {
            out.stderr.insert_str(0, &stderr);
            return out;
        }
    };
    let render = |report: &SolveReport| {
        let out = solve_output(&market, &support, report);
        match config.format {
            Format::Json => to_json(&out),
            Format::Table => solve_table(&out),
        }
    };
    match fixed_support_solve(&market, &support, &config.utility, &config.solver) {
        Ok(report) => CommandOutput {
            code: EXIT_OK,
            stdout: render(&report),
            stderr,
        },
        Err(Error::NoConvergence {
            iterations,
            residual,
            best,
        }) => {
            let _ = writeln!(
                stderr,
                "error: no convergence after {iterations} iterations (residual {residual:e}); best iterate follows"
            );
            CommandOutput {
                code: EXIT_NO_CONVERGENCE,
                stdout: best.map(|b| render(&b)).unwrap_or_default(),
                stderr,
            }
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            CommandOutput {
                code: exit_code(&e),
                stdout: String::new(),
                stderr,
            }
        }
    }
}

// ----------------------------------------------------------------- oracle

#[derive(Debug, Serialize)]
struct OracleOutput {
    utility: Utility,
    converged: bool,
    iterations: usize,
    objective: f64,
    cash: f64,
    multiplier: Option<f64>,
    wagers: Vec<WagerRow>,
    support: Vec<SupportBlock>,
    largest_inactive: f64,
    smallest_active: Option<f64>,
    first_order_residual: f64,
    projected_gradient_norm: f64,
}

fn oracle_output(market: &Market, utility: Utility, sol: &OracleSolution) -> OracleOutput {
    OracleOutput {
        utility,
        converged: sol.converged,
        iterations: sol.iterations,
        objective: sol.objective,
        cash: sol.portfolio.cash,
        multiplier: sol.multiplier,
        wagers: market
            .events
            .iter()
            .enumerate()
            .flat_map(|(l, e)| {
                e.outcomes.iter().enumerate().map(move |(i, o)| WagerRow {
                    event: e.label.clone(),
                    outcome: o.label.clone(),
                    g: sol.portfolio.wagers[l][i],
                })
            })
            .collect(),
        support: market
            .events
            .iter()
            .zip(&sol.support)
            .map(|(e, a)| SupportBlock {
                event: e.label.clone(),
                k: a.len(),
                active: a.iter().map(|&i| e.outcomes[i].label.clone()).collect(),
            })
            .collect(),
        largest_inactive: sol.largest_inactive,
        smallest_active: sol.smallest_active,
        first_order_residual: sol.first_order_residual,
        projected_gradient_norm: sol.projected_gradient_norm,
    }
}

fn oracle_table(out: &OracleOutput) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "oracle {}  converged={}  iterations={}", out.utility.name(), out.converged, out.iterations);
    let _ = writeln!(s, "objective  {}", out.objective);
    let _ = writeln!(s, "cash       {}", out.cash);
    let _ = writeln!(s, "multiplier {}", opt(out.multiplier));
    for w in &out.wagers {
        let _ = writeln!(s, "{:<16} {:<16} {:>24}", w.event, w.outcome, w.g);
    }
    s
}

pub fn cmd_oracle(config: &CliConfig) -> CommandOutput {
    let mut stderr = String::new();
    let market = match load_market(config, &mut stderr) {
        Ok(m) => m,
        Err(out) => return out,
    };
    match oracle_solve(&market, &config.utility, &OracleConfig::default()) {
        Ok(sol) => {
            let out = oracle_output(&market, config.utility, &sol);
            let code = if sol.converged { EXIT_OK } else { EXIT_NO_CONVERGENCE };
            CommandOutput {
                code,
                stdout: match config.format {
                    Format::Json => to_json(&out),
                    Format::Table => oracle_table(&out),
                },
                stderr,
            }
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            CommandOutput {
                code: exit_code(&e),
                stdout: String::new(),
                stderr,
            }
        }
    }
}

// ----------------------------------------------------------------- verify

#[derive(Debug, Serialize)]
struct VerifyOutput {
    utility: Utility,
    passed: bool,
    support_equal: bool,
    oracle_support: Vec<SupportBlock>,
    solver_support: Vec<SupportBlock>,
    objective_solver: f64,
    objective_oracle: f64,
    objective_gap: f64,
    max_wager_deviation: f64,
    cash_deviation: f64,
    multiplier_gap: Option<f64>,
}

fn label_sets(market: &Market, sets: &[Vec<usize>]) -> Vec<SupportBlock> {
    market
        .events
        .iter()
        .zip(sets)
        .map(|(e, a)| SupportBlock {
            event: e.label.clone(),
            k: a.len(),
            active: a.iter().map(|&i| e.outcomes[i].label.clone()).collect(),
        })
        .collect()
}

pub fn cmd_verify(config: &CliConfig) -> CommandOutput {
    let mut stderr = String::new();
    let market = match load_market(config, &mut stderr) {
        Ok(m) => m,
        Err(out) => return out,
    };
    let oracle_cfg = OracleConfig::default();
    let states = market.product_states();
    if states > oracle_cfg.max_states as u128 {
        return CommandOutput::fail(
            EXIT_VALIDATION,
            format!(
                "{stderr}error: market has {states} product states; the oracle handles at most {}",
                oracle_cfg.max_states
            ),
        );
    }
    let support = match support_for(config, &market) {
        Ok(s) => s,
        Err(mut out) => {
            out.stderr.insert_str(0, &stderr);
            return out;
        }
    };
    let report = match fixed_support_solve(&market, &support, &config.utility, &config.solver) {
        Ok(r) => r,
        Err(e) => return CommandOutput::fail(exit_code(&e), format!("{stderr}error: {e}")),
    };
    let oracle = match oracle_solve(&market, &config.utility, &oracle_cfg) {
        Ok(o) => o,
        Err(e) => return CommandOutput::fail(exit_code(&e), format!("{stderr}error: {e}")),
    };
    let cmp = compare(&oracle, &report, oracle_cfg.activity_eps);
    let out = VerifyOutput {
        utility: config.utility,
        passed: cmp.passed,
        support_equal: cmp.support_equal,
        oracle_support: label_sets(&market, &cmp.oracle_support),
        solver_support: label_sets(&market, &cmp.solver_support),
        objective_solver: report.objective,
        objective_oracle: oracle.objective,
        objective_gap: cmp.objective_gap,
        max_wager_deviation: cmp.max_wager_deviation,
        cash_deviation: cmp.cash_deviation,
        multiplier_gap: cmp.multiplier_gap,
    };
    let stdout = match config.format {
        Format::Json => to_json(&out),
        Format::Table => {
            let mut s = String::new();
            let _ = writeln!(s, "passed               {}", out.passed);
            let _ = writeln!(s, "support_equal        {}", out.support_equal);
            let _ = writeln!(s, "objective_solver     {}", out.objective_solver);
            let _ = writeln!(s, "objective_oracle     {}", out.objective_oracle);
            let _ = writeln!(s, "objective_gap        {}", out.objective_gap);
            let _ = writeln!(s, "max_wager_deviation  {}", out.max_wager_deviation);
            let _ = writeln!(s, "cash_deviation       {}", out.cash_deviation);
            let _ = writeln!(s, "multiplier_gap       {}", opt(out.multiplier_gap));
            s
        }
    };
    if !cmp.passed {
        let _ = writeln!(stderr, "error: oracle and solver disagree");
    }
    CommandOutput {
        code: if cmp.passed { EXIT_OK } else { EXIT_MISMATCH },
        stdout,
        stderr,
    }
}

pub fn run(config: &CliConfig) -> CommandOutput {
    match config.command {
        CommandKind::Support => cmd_support(config),
        CommandKind::Solve => cmd_solve(config),
        CommandKind::Verify => cmd_verify(config),
        CommandKind::Oracle => cmd_oracle(config),
    }
}

/// Parses argv and runs; clap's own usage errors exit with code 2.
pub fn run_from_args<I, T>(args: I) -> CommandOutput
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
            let text = e.render().to_string();
            return if code == EXIT_OK {
                CommandOutput {
                    code,
                    stdout: text,
                    stderr: String::new(),
                }
            } else {
                CommandOutput::fail(code, text.trim_end())
            };
        }
    };
    match CliConfig::from_cli(cli) {
        Ok(config) => run(&config),
        Err(msg) => CommandOutput::fail(EXIT_VALIDATION, format!("error: {msg}")),
    }
}
