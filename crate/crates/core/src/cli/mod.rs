//! Command-line front end: scenario files in, CSV out.

mod scenario_file;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use sha2::{Digest, Sha256};

pub use scenario_file::{ScenarioFile, SemiStrategicSection};

use crate::ctmc::{self, Attribution, SweepVar};
use crate::error::{Error, Result};
use crate::model::{MempoolSnapshot, Scenario};
use crate::rng::substream;
use crate::sim;
use crate::strategy::{self, Strategy, CURVE_POOL_DRAWS};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
/// Environment variable capping the worker threads.
pub const THREADS_ENV: &str = "FEE_TIMING_THREADS";

#[derive(Debug, Parser)]
#[command(name = "fee-timing", version, about = "Fee and broadcast-time strategies against an observable mempool")]
pub struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = THREADS_ENV)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate one strategy at one elapsed time.
    Eval(EvalArgs),
    /// Expected utility over a grid of elapsed times.
    Curve(CurveArgs),
    /// Solve the fee-bumping chain, optionally sweeping one parameter.
    Ctmc(CtmcArgs),
    /// Monte Carlo simulation.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    #[default]
    Csv,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Scenario file (TOML).
    #[arg(long)]
    pub scenario: PathBuf,
    /// Write the CSV here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Override the valuation from the scenario file.
    #[arg(long)]
    pub valuation: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: Common,
    /// nbr, ibr, fbr, baseline or fixed:<fee>.
    #[arg(long)]
    pub strategy: String,
    /// Time since the last block.
    #[arg(long, default_value_t = 0.0)]
    pub elapsed: f64,
    /// Pending fees: inline list "1.5,2,3", a CSV file, or draw:<seed>.
    #[arg(long, default_value = "")]
    pub pool: String,
}

#[derive(Debug, Clone, Args)]
pub struct CurveArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub strategy: String,
    /// Elapsed times: "start:stop:step" or a comma list.
    #[arg(long)]
    pub grid: String,
    /// Pools drawn per elapsed time for ibr and fbr.
    #[arg(long, default_value_t = CURVE_POOL_DRAWS)]
    pub draws: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct CtmcArgs {
    #[command(flatten)]
    pub common: Common,
    /// "<var>=<v1>,<v2>,..." with var one of gamma_s, gamma, v_hat, m, n.
    #[arg(long)]
    pub sweep: Option<String>,
    #[arg(long, value_enum, default_value_t = AttributionArg::Standing)]
    pub attribution: AttributionArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AttributionArg {
    Standing,
    TopLevelOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    /// Oblivious competitors, one strategy.
    Oblivious,
    /// Fee-bumping game.
    Semi,
    /// Broadcast after observing further arrivals (exponential blocks).
    Postpone,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum, default_value_t = Mode::Oblivious)]
    pub mode: Mode,
    #[arg(long, default_value = "nbr")]
    pub strategy: String,
    #[arg(long, default_value_t = 0.0)]
    pub elapsed: f64,
    /// Condition on this pool instead of drawing one per trial.
    #[arg(long)]
    pub pool: Option<String>,
    /// Postponements in observed arrivals, comma separated.
    #[arg(long, default_value = "0,5,10,20,40")]
    pub delays: String,
    #[arg(long, default_value_t = 100_000)]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Rows plus the metadata that heads every CSV.
struct Table {
    seed: Option<u64>,
    config: String,
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(seed: Option<u64>, config: String, header: Vec<&'static str>) -> Self {
        Table { seed, config, header, rows: Vec::new() }
    }

    fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    fn write(&self, out: &mut dyn Write) -> Result<()> {
        let digest = Sha256::digest(self.config.as_bytes());
        let hash: String = digest.iter().take(8).map(|b| format!("{b:02x}")).collect();
        let seed = self.seed.map_or("none".to_string(), |s| s.to_string());
        let io = |e: std::io::Error| Error::Numerical(format!("write failed: {e}"));
        writeln!(out, "# fee-timing {VERSION} seed={seed} config={hash}").map_err(io)?;
        let mut w = csv::Writer::from_writer(out);
        let csv_err = |e: csv::Error| Error::Numerical(format!("write failed: {e}"));
        w.write_record(&self.header).map_err(csv_err)?;
        for r in &self.rows {
            w.write_record(r).map_err(csv_err)?;
        }
        w.flush().map_err(io)
    }
}

fn num(x: f64) -> String {
    format!("{x}")
}

fn load(common: &Common) -> Result<ScenarioFile> {
    ScenarioFile::load(&common.scenario)
}

fn oblivious_scenario(file: &ScenarioFile, common: &Common) -> Result<Scenario> {
    let s = file.scenario()?;
    match common.valuation {
        Some(v) => s.with_valuation(v),
        None => Ok(s),
    }
}

fn config_text(file: &ScenarioFile, scenario: Option<&Scenario>, extra: &str) -> String {
    let v = scenario.map_or(String::new(), |s| format!("valuation={}\n", s.valuation));
    format!("{}{v}{extra}", file.to_toml())
}

/// Parses a pool: empty, an inline fee list, a CSV file, or `draw:<seed>`.
pub fn parse_pool(spec: &str, scenario: &Scenario, elapsed: f64) -> Result<MempoolSnapshot> {
    let spec = spec.trim();
    if spec.is_empty() {
        return MempoolSnapshot::empty(elapsed);
    }
    if let Some(seed) = spec.strip_prefix("draw:") {
        let seed: u64 = seed.parse().map_err(|_| Error::Parse(format!("bad pool seed in '{spec}'")))?;
        return MempoolSnapshot::draw(scenario, elapsed, &mut substream(seed, 0));
    }
    let path = Path::new(spec);
    if path.is_file() {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .comment(Some(b'#'))
            .from_path(path)
            .map_err(|e| Error::Parse(format!("{spec}: {e}")))?;
        let mut fees = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| Error::Parse(format!("{spec}: {e}")))?;
            for field in rec.iter().filter(|f| !f.trim().is_empty()) {
                match field.trim().parse::<f64>() {
                    Ok(x) => fees.push(x),
                    Err(_) if i == 0 => {}
                    Err(_) => return Err(Error::Parse(format!("{spec}: line {}: '{field}' is not a fee", i + 1))),
                }
            }
        }
        return MempoolSnapshot::new(fees, elapsed);
    }
    let fees = spec
        .split(',')
        .map(|f| f.trim().parse::<f64>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|_| Error::Parse(format!("pool '{spec}' is neither a file, a fee list nor draw:<seed>")))?;
    MempoolSnapshot::new(fees, elapsed)
}

/// "a:b:step" (inclusive) or "x,y,z".
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let bad = || Error::Parse(format!("bad grid '{spec}'"));
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() == 3 {
        let v: Vec<f64> = parts.iter().map(|p| p.trim().parse::<f64>().map_err(|_| bad())).collect::<Result<_>>()?;
        let (a, b, step) = (v[0], v[1], v[2]);
        if step.is_nan() || step <= 0.0 || b < a {
            return Err(bad());
        }
        let n = ((b - a) / step + 1e-9).floor() as usize;
        return Ok((0..=n).map(|i| a + step * i as f64).collect());
    }
    let v: Vec<f64> = spec.split(',').map(|p| p.trim().parse::<f64>().map_err(|_| bad())).collect::<Result<_>>()?;
    if v.is_empty() {
        return Err(bad());
    }
    Ok(v)
}

fn parse_sweep(spec: &str) -> Result<(SweepVar, Vec<f64>)> {
    let (var, values) =
        spec.split_once('=').ok_or_else(|| Error::Parse(format!("sweep '{spec}' must look like gamma_s=1,2,4")))?;
    Ok((var.parse()?, parse_grid(values)?))
}

pub fn cmd_eval(args: &EvalArgs, out: &mut dyn Write) -> Result<()> {
    let file = load(&args.common)?;
    let s = oblivious_scenario(&file, &args.common)?;
    let strategy: Strategy = args.strategy.parse()?;
    let pool = parse_pool(&args.pool, &s, args.elapsed)?;
    let d = strategy::decide(&s, strategy, &pool)?;
    let config = config_text(&file, Some(&s), &format!("eval {strategy} {} {:?}", args.elapsed, pool.fees()));
    let mut t = Table::new(
        None,
        config,
        vec!["strategy", "elapsed", "fee", "broadcast_time", "utility", "win_prob", "fee_rule"],
    );
    let rule = match d.fee_rule {
        strategy::FeeRule::Posted => "posted",
        strategy::FeeRule::ThresholdPlusTick => "threshold-plus-tick",
    };
    t.push(vec![
        strategy.to_string(),
        num(args.elapsed),
        num(d.fee),
        num(d.broadcast_time),
        num(d.expected_utility),
        num(d.inclusion_probability),
        rule.to_string(),
    ]);
    t.write(out)
}

pub fn cmd_curve(args: &CurveArgs, out: &mut dyn Write) -> Result<()> {
    let file = load(&args.common)?;
    let s = oblivious_scenario(&file, &args.common)?;
    let strategy: Strategy = args.strategy.parse()?;
    let grid = parse_grid(&args.grid)?;
    let points = strategy::utility_vs_elapsed_curve(&s, strategy, &grid, args.draws, args.seed)?;
    let config = config_text(&file, Some(&s), &format!("curve {strategy} {grid:?} {}", args.draws));
    let mut t = Table::new(Some(args.seed), config, vec!["t_elapsed", "utility", "fee", "win_prob"]);
    for p in points {
        t.push(vec![num(p.elapsed), num(p.utility), num(p.fee), num(p.win_prob)]);
    }
    t.write(out)
}

pub fn cmd_ctmc(args: &CtmcArgs, out: &mut dyn Write) -> Result<()> {
    let file = load(&args.common)?;
    let params = file.ctmc_params()?;
    let rule = match args.attribution {
        AttributionArg::Standing => Attribution::Standing,
        AttributionArg::TopLevelOnly => Attribution::TopLevelOnly,
    };
    let (var, grid) = match &args.sweep {
        Some(spec) => parse_sweep(spec)?,
        None => (SweepVar::GammaS, vec![params.gamma_s]),
    };
    let rows = grid
        .iter()
        .map(|&value| {
            let p = params.with_var(var, value)?;
            let dist = ctmc::solve(&p)?;
            Ok(vec![
                num(value),
                num(ctmc::expected_utility_with(&p, &dist, rule)),
                format!("{:e}", dist.residual),
                p.state_count().to_string(),
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    let config = config_text(&file, None, &format!("ctmc {var} {grid:?} {rule:?}"));
    let mut t = Table::new(None, config, vec!["swept_value", "utility", "residual", "state_count"]);
    rows.into_iter().for_each(|r| t.push(r));
    t.write(out)
}

pub fn cmd_simulate(args: &SimulateArgs, out: &mut dyn Write) -> Result<()> {
    let file = load(&args.common)?;
    let header = vec!["mode", "strategy", "elapsed", "trials", "seed", "mean_utility", "utility_stderr", "inclusion_rate"];
    match args.mode {
        Mode::Semi => {
            let p = file.ctmc_params()?;
            let r = sim::simulate_semi_strategic(&p, args.trials, args.seed)?;
            let config = config_text(&file, None, &format!("simulate semi {}", args.trials));
            let mut t = Table::new(Some(args.seed), config, header);
            t.push(report_row("semi", "bump", 0.0, &r));
            t.write(out)
        }
        Mode::Oblivious => {
            let s = oblivious_scenario(&file, &args.common)?;
            let strategy: Strategy = args.strategy.parse()?;
            let (r, pool_desc) = match &args.pool {
                Some(spec) => {
                    let pool = parse_pool(spec, &s, args.elapsed)?;
                    (sim::simulate_oblivious_from(&s, strategy, &pool, args.trials, args.seed)?, format!("{:?}", pool.fees()))
                }
                None => (sim::simulate_oblivious(&s, strategy, args.elapsed, args.trials, args.seed)?, "drawn".into()),
            };
            let config = config_text(
                &file,
                Some(&s),
                &format!("simulate oblivious {strategy} {} {} {pool_desc}", args.elapsed, args.trials),
            );
            let mut t = Table::new(Some(args.seed), config, header);
            t.push(report_row("oblivious", &strategy.to_string(), args.elapsed, &r));
            t.write(out)
        }
        Mode::Postpone => {
            let s = oblivious_scenario(&file, &args.common)?;
            let pool = parse_pool(args.pool.as_deref().unwrap_or(""), &s, args.elapsed)?;
            let delays = args
                .delays
                .split(',')
                .map(|d| d.trim().parse::<u64>().map_err(|_| Error::Parse(format!("bad delay '{d}'"))))
                .collect::<Result<Vec<_>>>()?;
            let pts = sim::paired_postponement_experiment(&s, &pool, &delays, args.trials, args.seed)?;
            let config = config_text(
                &file,
                Some(&s),
                &format!("simulate postpone {delays:?} {} {:?} {}", args.elapsed, pool.fees(), args.trials),
            );
            let mut t = Table::new(
                Some(args.seed),
                config,
                vec!["delay", "mean_utility", "utility_stderr", "optimal_fee", "broadcast_rate"],
            );
            for p in pts {
                t.push(vec![
                    p.delay.to_string(),
                    num(p.mean_utility),
                    num(p.utility_stderr),
                    num(p.optimal_fee),
                    num(p.broadcast_rate),
                ]);
            }
            t.write(out)
        }
    }
}

fn report_row(mode: &str, strategy: &str, elapsed: f64, r: &sim::SimulationReport) -> Vec<String> {
    vec![
        mode.to_string(),
        strategy.to_string(),
        num(elapsed),
        r.trials.to_string(),
        r.seed.to_string(),
        num(r.mean_utility),
        num(r.utility_stderr),
        num(r.inclusion_rate),
    ]
}

/// Runs a parsed command line, writing CSV to `--out` or to `stdout`.
pub fn run(cli: &Cli, stdout: &mut dyn Write) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::domain("thread count must be positive"));
        }
        // a global pool may already exist when called twice in one process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let out_path = match &cli.command {
        Command::Eval(a) => &a.common.out,
        Command::Curve(a) => &a.common.out,
        Command::Ctmc(a) => &a.common.out,
        Command::Simulate(a) => &a.common.out,
    };
    let mut buf = Vec::new();
    match &cli.command {
        Command::Eval(a) => cmd_eval(a, &mut buf)?,
        Command::Curve(a) => cmd_curve(a, &mut buf)?,
        Command::Ctmc(a) => cmd_ctmc(a, &mut buf)?,
        Command::Simulate(a) => cmd_simulate(a, &mut buf)?,
    }
    match out_path {
        Some(p) => std::fs::write(p, &buf).map_err(|e| Error::Domain(format!("cannot write {}: {e}", p.display()))),
        None => stdout.write_all(&buf).map_err(|e| Error::Numerical(format!("write failed: {e}"))),
    }
}
