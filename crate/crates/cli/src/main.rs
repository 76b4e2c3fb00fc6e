//! `twoway`: bounds and simulations for two-way channels with a fixed pool
//! of energy units.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use twoway_energy::protocol::{self, CodingParams, Node};
use twoway_energy::{
    build_kernel, optimize_outer_sum, optimize_outer_weighted, optimize_sum_rate, rates_for_policy,
    stationary, sweep, EnergyBudget, MarginalPolicy, SearchConfig,
};

const DEFAULT_BUDGET: u32 = 2;
const DEFAULT_SWEEP_BUDGET: u32 = 16;
const DEFAULT_LAMBDA: f64 = 0.5;
const DEFAULT_BLOCKLENGTH: usize = 100_000;
const DEFAULT_EPSILON: f64 = 0.02;
const DEFAULT_DELTA: f64 = 0.05;
const DEFAULT_TRIALS: usize = 100;
const DEFAULT_BITS: usize = 100_000;
const DEFAULT_FRAME: u64 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "twoway",
    version,
    about = "Capacity bounds and protocol simulations for two-way channels with exchanged energy units"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Stationary law and transition kernel of a policy.
    Stationary,
    /// Optimized achievable rates for a weight (default policy search).
    Inner,
    /// Outer bound: the sum-rate bound, or the weighted bound if --lambda is given.
    Outer,
    /// Conventional, optimized, and outer sum rates for U = 1..=--budget, as CSV.
    Sweep,
    /// Monte Carlo error rate of the random-coding scheme.
    Simulate,
    /// The single-unit strategies: fixed frames, variable-length code, time sharing.
    U1,
}

/// Every option may also come from the JSON file given by --config, using
/// the same names with underscores. Flags win over the file.
#[derive(Args, Debug, Default, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Opts {
    /// JSON file with option values.
    #[arg(long, global = true, value_name = "JSON")]
    #[serde(skip)]
    config: Option<PathBuf>,

    /// Total energy units U; the largest U for `sweep` [default: 2, sweep: 16]
    #[arg(long, global = true)]
    budget: Option<u32>,

    /// Weight on node 1's rate, in [0, 1] [default: 0.5]
    #[arg(long, global = true)]
    lambda: Option<f64>,

    /// Local searches per optimization [default: 32]
    #[arg(long, global = true)]
    restarts: Option<usize>,

    /// Stop a local search once a sweep gains less than this [default: 1e-10]
    #[arg(long, global = true)]
    tol: Option<f64>,

    /// Seed for every random choice [default: 0]
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Channel uses per block [default: 100000]
    #[arg(long, global = true)]
    blocklength: Option<usize>,

    /// Occupancy margin [default: 0.02]
    #[arg(long, global = true)]
    epsilon: Option<f64>,

    /// Rate margin; negative values oversize the codebooks [default: 0.05]
    #[arg(long, global = true, allow_negative_numbers = true)]
    delta: Option<f64>,

    /// Monte Carlo trials [default: 100]
    #[arg(long, global = true)]
    trials: Option<usize>,

    /// Node 1's energy before the first use [default: ceil(U/2) for simulate]
    #[arg(long, global = true)]
    initial_state: Option<usize>,

    /// Use the same probability of "1" at every level [default policy for stationary: 0.5]
    #[arg(long, global = true)]
    p: Option<f64>,

    /// JSON file {"p1": [...], "p2": [...]} with U + 1 entries each, indexed by the node's own energy
    #[arg(long, global = true, value_name = "JSON")]
    policy: Option<PathBuf>,

    /// Use the optimized policy for --lambda [default policy for simulate]
    #[arg(long, global = true)]
    #[serde(skip)]
    optimized: bool,

    /// Bits per node for `u1` [default: 100000]
    #[arg(long, global = true)]
    bits: Option<usize>,

    /// Frame size for the fixed-frame strategy of `u1` [default: 2]
    #[arg(long, global = true)]
    frame: Option<u64>,

    /// Write the sweep CSV here instead of stdout.
    #[arg(long, global = true, value_name = "CSV")]
    out: Option<PathBuf>,

    /// Write the channel uses of one block (simulate) or of the time-sharing run (u1) as `i u x1 x2` lines.
    #[arg(long, global = true, value_name = "FILE")]
    transcript: Option<PathBuf>,
}

impl Opts {
    fn over(self, file: Opts) -> Opts {
        Opts {
            config: self.config,
            budget: self.budget.or(file.budget),
            lambda: self.lambda.or(file.lambda),
            restarts: self.restarts.or(file.restarts),
            tol: self.tol.or(file.tol),
            seed: self.seed.or(file.seed),
            blocklength: self.blocklength.or(file.blocklength),
            epsilon: self.epsilon.or(file.epsilon),
            delta: self.delta.or(file.delta),
            trials: self.trials.or(file.trials),
            initial_state: self.initial_state.or(file.initial_state),
            p: self.p.or(file.p),
            policy: self.policy.or(file.policy),
            optimized: self.optimized,
            bits: self.bits.or(file.bits),
            frame: self.frame.or(file.frame),
            out: self.out.or(file.out),
            transcript: self.transcript.or(file.transcript),
        }
    }
}

/// Maps failures to exit codes: 2 for bad input, 1 for everything else.
#[derive(Debug)]
enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<twoway_energy::Error> for Failure {
    fn from(e: twoway_energy::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

fn usage(msg: impl std::fmt::Display) -> Failure {
    Failure::Usage(anyhow!("{msg}"))
}

type CliResult<T> = std::result::Result<T, Failure>;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PolicyFile {
    p1: Vec<f64>,
    p2: Vec<f64>,
}

struct Settings {
    command: Command,
    opts: Opts,
    budget: EnergyBudget,
    lambda: f64,
    search: SearchConfig,
    seed: u64,
}

impl Settings {
    fn resolve(cli: Cli) -> CliResult<Self> {
        let file = match &cli.opts.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
                serde_json::from_str(&text)
                    .map_err(|e| usage(format!("bad config {}: {e}", path.display())))?
            }
            None => Opts::default(),
        };
        let opts = cli.opts.over(file);
        let default_budget = if cli.command == Command::Sweep {
            DEFAULT_SWEEP_BUDGET
        } else {
            DEFAULT_BUDGET
        };
        let budget = EnergyBudget::new(opts.budget.unwrap_or(default_budget)).map_err(usage)?;
        let lambda = opts.lambda.unwrap_or(DEFAULT_LAMBDA);
        if !(0.0..=1.0).contains(&lambda) {
            return Err(usage(format!("--lambda {lambda} is outside [0, 1]")));
        }
        let seed = opts.seed.unwrap_or(0);
        let defaults = SearchConfig::default();
        let search = SearchConfig {
            restarts: opts.restarts.unwrap_or(defaults.restarts),
            tol: opts.tol.unwrap_or(defaults.tol),
            seed,
            ..defaults
        };
        if search.restarts == 0 {
            return Err(usage("--restarts must be at least 1"));
        }
        if search.tol.is_nan() || search.tol <= 0.0 {
            return Err(usage("--tol must be positive"));
        }
        let sources = opts.p.is_some() as u8 + opts.policy.is_some() as u8 + opts.optimized as u8;
        if sources > 1 {
            return Err(usage("give at most one of --p, --policy, --optimized"));
        }
        Ok(Self {
            command: cli.command,
            opts,
            budget,
            lambda,
            search,
            seed,
        })
    }

    /// The policy named by --p, --policy, or --optimized. Without any of
    /// them: the optimized policy if `optimized_by_default`, else p = 0.5.
    fn policy(&self, optimized_by_default: bool) -> CliResult<(MarginalPolicy<f64>, String)> {
        if let Some(p) = self.opts.p {
            let policy = MarginalPolicy::uniform(self.budget, p).map_err(usage)?;
            return Ok((policy, format!("uniform p={p}")));
        }
        if let Some(path) = &self.opts.policy {
            return Ok((
                read_policy(path, self.budget)?,
                format!("file {}", path.display()),
            ));
        }
        if self.opts.optimized || optimized_by_default {
            let r = optimize_sum_rate(self.budget, self.lambda, &self.search)?;
            return Ok((r.policy, format!("optimized for lambda={}", self.lambda)));
        }
        Ok((
            MarginalPolicy::uniform(self.budget, 0.5)?,
            "uniform p=0.5".into(),
        ))
    }
}

fn read_policy(path: &Path, budget: EnergyBudget) -> CliResult<MarginalPolicy<f64>> {
    let text = fs::read_to_string(path)
        .map_err(|e| usage(format!("cannot read policy {}: {e}", path.display())))?;
    let f: PolicyFile = serde_json::from_str(&text)
        .map_err(|e| usage(format!("bad policy file {}: {e}", path.display())))?;
    MarginalPolicy::new(budget, f.p1, f.p2)
        .map_err(|e| usage(format!("bad policy file {}: {e}", path.display())))
}

fn fmt_levels(v: &[f64]) -> String {
    v.iter()
        .map(|x| format!("{x:.6}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn cmd_stationary(s: &Settings) -> CliResult<String> {
    let (policy, source) = s.policy(false)?;
    let kernel = build_kernel(&policy)?;
    let pi = stationary(&kernel)?;
    let total = s.budget.total() as usize;
    let mut out = String::new();
    let _ = writeln!(out, "# U={total} policy: {source}");
    let _ = writeln!(out, "u\tpi\tp1[u]\tp2[U-u]\tdown\tstay\tup");
    for u in 0..=total {
        let _ = writeln!(
            out,
            "{u}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}",
            pi.get(u),
            policy.p1()[u],
            policy.p2()[total - u],
            kernel.down()[u],
            kernel.stay(u),
            kernel.up()[u]
        );
    }
    let _ = writeln!(out, "kernel rows:");
    for row in kernel.rows() {
        let _ = writeln!(out, "{}", fmt_levels(&row));
    }
    let _ = writeln!(
        out,
        "balance residual: {:.3e}",
        pi.balance_residual(&kernel)
    );
    Ok(out)
}

fn cmd_inner(s: &Settings) -> CliResult<String> {
    let r = optimize_sum_rate(s.budget, s.lambda, &s.search)?;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "U={} lambda={} restarts={}",
        s.budget.total(),
        r.lambda,
        r.restarts_used
    );
    let _ = writeln!(out, "R1\t{:.6}", r.rates.r1);
    let _ = writeln!(out, "R2\t{:.6}", r.rates.r2);
    let _ = writeln!(out, "sum\t{:.6}", r.rates.sum());
    let _ = writeln!(out, "objective\t{:.6}", r.objective);
    let _ = writeln!(out, "p1\t{}", fmt_levels(r.policy.p1()));
    let _ = writeln!(out, "p2\t{}", fmt_levels(r.policy.p2()));
    let _ = writeln!(out, "pi\t{}", fmt_levels(r.stationary.probs()));
    Ok(out)
}

fn cmd_outer(s: &Settings) -> CliResult<String> {
    let r = match s.opts.lambda {
        Some(l) => optimize_outer_weighted(s.budget, l, &s.search)?,
        None => optimize_outer_sum(s.budget, &s.search)?,
    };
    let mut out = String::new();
    match s.opts.lambda {
        Some(l) => {
            let _ = writeln!(out, "U={} lambda={l} (weighted bound)", s.budget.total());
        }
        None => {
            let _ = writeln!(out, "U={} (sum-rate bound)", s.budget.total());
        }
    }
    let _ = writeln!(out, "R1 bound\t{:.6}", r.values.r1_bound);
    let _ = writeln!(out, "R2 bound\t{:.6}", r.values.r2_bound);
    let _ = writeln!(out, "sum bound\t{:.6}", r.values.sum_bound);
    let _ = writeln!(out, "objective\t{:.6}", r.objective);
    let _ = writeln!(out, "pi\t{}", fmt_levels(r.values.stationary.probs()));
    Ok(out)
}

fn cmd_sweep(s: &Settings) -> CliResult<String> {
    let points = sweep::sweep(s.budget.total(), &s.search)?;
    let rows: Vec<_> = points.iter().map(|p| p.row).collect();
    let csv = sweep::to_csv(&rows);
    match &s.opts.out {
        Some(path) => {
            fs::write(path, &csv).with_context(|| format!("cannot write {}", path.display()))?;
            Ok(format!("wrote {} rows to {}\n", rows.len(), path.display()))
        }
        None => Ok(csv),
    }
}

fn cmd_simulate(s: &Settings) -> CliResult<String> {
    let trials = s.opts.trials.unwrap_or(DEFAULT_TRIALS);
    if trials == 0 {
        return Err(usage("--trials must be at least 1"));
    }
    let params = CodingParams {
        blocklength: s.opts.blocklength.unwrap_or(DEFAULT_BLOCKLENGTH),
        epsilon: s.opts.epsilon.unwrap_or(DEFAULT_EPSILON),
        delta: s.opts.delta.unwrap_or(DEFAULT_DELTA),
    };
    if params.blocklength == 0 {
        return Err(usage("--blocklength must be positive"));
    }
    if !(0.0..1.0).contains(&params.epsilon) {
        return Err(usage("--epsilon must be in [0, 1)"));
    }
    let total = s.budget.total() as usize;
    if let Some(u) = s.opts.initial_state {
        if u > total {
            return Err(usage(format!(
                "--initial-state {u} exceeds the budget {total}"
            )));
        }
    }
    let (policy, source) = s.policy(true)?;
    let books = protocol::build_codebooks(s.budget, &policy, params, s.seed)?;
    let initial = s
        .opts
        .initial_state
        .unwrap_or_else(|| books.default_initial_state());
    let report = protocol::monte_carlo_error(&books, trials, Some(initial), s.seed)?;
    let prop1 = rates_for_policy(&policy)?;

    let mut out = String::new();
    let _ = writeln!(
        out,
        "U={total} n={} epsilon={} delta={} trials={trials} seed={} initial_state={initial}",
        params.blocklength, params.epsilon, params.delta, s.seed
    );
    let _ = writeln!(out, "policy: {source}");
    let _ = writeln!(out, "p1\t{}", fmt_levels(policy.p1()));
    let _ = writeln!(out, "p2\t{}", fmt_levels(policy.p2()));
    let _ = writeln!(
        out,
        "error rate\t{:.6}\t({} of {trials} trials)",
        report.error_rate, report.failures
    );
    let _ = writeln!(out, "node\tlevel\tstate\tlength\tlog2K\tE1\tE2");
    for (e, b) in report.events.iter().zip(books.books()) {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            e.node, e.level, b.state, b.length, b.message_bits, e.e1, e.e2
        );
    }
    let _ = writeln!(out, "state\tanalytic\tempirical");
    for (u, (a, m)) in books
        .stationary
        .probs()
        .iter()
        .zip(&report.mean_occupancy)
        .enumerate()
    {
        let _ = writeln!(out, "{u}\t{a:.6}\t{m:.6}");
    }
    let _ = writeln!(out, "scheme sum rate\t{:.6}", report.sum_rate);
    let _ = writeln!(out, "achievable sum rate of the policy\t{:.6}", prop1.sum());

    if let Some(path) = &s.opts.transcript {
        let (_, o, t) = protocol::random_trial(&books, initial, s.seed)?;
        fs::write(path, t.to_text()).with_context(|| format!("cannot write {}", path.display()))?;
        let _ = writeln!(
            out,
            "transcript: {} uses, decoded node 1 {}, node 2 {}",
            t.len(),
            o.decoded_ok[Node::One.index()],
            o.decoded_ok[Node::Two.index()]
        );
    }
    Ok(out)
}

fn cmd_u1(s: &Settings) -> CliResult<String> {
    if s.opts.budget.is_some_and(|b| b != 1) {
        return Err(usage(
            "u1 runs with a single energy unit; drop --budget or pass 1",
        ));
    }
    let m = s.opts.bits.unwrap_or(DEFAULT_BITS);
    if m == 0 {
        return Err(usage("--bits must be at least 1"));
    }
    let frame = s.opts.frame.unwrap_or(DEFAULT_FRAME);
    let frame_rate = protocol::naive_frame_rate(frame).map_err(usage)?;
    let vl = protocol::variable_length_sim(m, s.seed)?;
    let ts = protocol::optimal_timeshare_random(m, s.seed.wrapping_add(1))?;
    let mut out = String::new();
    let _ = writeln!(out, "scheme\tbits/node\tuses\thandoffs\tsum rate\tdecoded");
    let _ = writeln!(out, "frame F={frame}\t-\t-\t-\t{frame_rate:.6}\t-");
    for (name, r) in [("variable-length", &vl), ("time-sharing", &ts)] {
        let _ = writeln!(
            out,
            "{name}\t{m}\t{}\t{}\t{:.6}\t{}",
            r.transcript.len(),
            r.handoff_uses,
            r.sum_rate(),
            r.decoded_exactly()
        );
    }
    if let Some(path) = &s.opts.transcript {
        fs::write(path, ts.transcript.to_text())
            .with_context(|| format!("cannot write {}", path.display()))?;
    }
    Ok(out)
}

fn run(cli: Cli) -> CliResult<String> {
    let s = Settings::resolve(cli)?;
    match s.command {
        Command::Stationary => cmd_stationary(&s),
        Command::Inner => cmd_inner(&s),
        Command::Outer => cmd_outer(&s),
        Command::Sweep => cmd_sweep(&s),
        Command::Simulate => cmd_simulate(&s),
        Command::U1 => cmd_u1(&s),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
