//! The `gmib` command-line harness.
//!
//! Every command writes `<command>.csv` into the output directory. Exit
//! codes: 0 success, 2 usage error, 3 numerical failure, 4 I/O error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{ConfigError, GridSpec, RunConfig};
use crate::contract::{AnnuityTiming, FeeStructure, MarketModel};
use crate::error::Error;
use crate::experiments::{fair_rate_table, sweep_grid, volatility_study, FairRow, GridCell};
use crate::output::{currency, provenance, rate, read_table, CsvTable};
use crate::regression::{fit_polynomial, nested_f_test};
use crate::reset::{
    critical_rate_surface, CriticalRate, CriticalStatus, DeferralAnalysis, ResetScenario,
};
use crate::simulation::simulate_trajectories;
use crate::valuation::{FairRateOptions, ValuationResult};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "gmib", version, about = "GMIB rider valuation and reset-option experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FeeArg {
    F1,
    F2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BbModeArg {
    Extension,
    Contract,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Toggle {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TimingArg {
    Due,
    Immediate,
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Monte Carlo paths per valuation.
    #[arg(long, global = true)]
    paths: Option<usize>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long = "fee-structure", global = true)]
    fee_structure: Option<FeeArg>,
    #[arg(long, global = true)]
    sigma: Option<f64>,
    /// Fee rate; restricts fee grids to this single value.
    #[arg(long, global = true)]
    c: Option<f64>,
    /// Payment rate; restricts payment-rate grids to this single value.
    #[arg(long, global = true)]
    g: Option<f64>,
    /// Number of payment rates in the [0.05, 0.10] grid.
    #[arg(long = "g-count", global = true)]
    g_count: Option<usize>,
    #[arg(long = "bb-rate-mode", global = true)]
    bb_rate_mode: Option<BbModeArg>,
    #[arg(long = "extension-fee", global = true)]
    extension_fee: Option<Toggle>,
    #[arg(long = "annuity-timing", global = true)]
    annuity_timing: Option<TimingArg>,
    #[arg(long, global = true)]
    antithetic: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Account trajectories: path_id, year, value_post_fee.
    Paths {
        #[arg(long, default_value_t = 100)]
        n: usize,
    },
    /// Rider value for one (c, g).
    Price,
    /// Exercise probability for one (c, g).
    Prob,
    /// Fair payment rate for each fee rate.
    #[command(name = "fair-g")]
    FairG,
    /// Exercise probability over the (c, g) grid.
    #[command(name = "sweep-prob")]
    SweepProb,
    /// Rider value over the (c, g) grid.
    #[command(name = "sweep-value")]
    SweepValue,
    /// Critical deferral rate for one (c, g).
    #[command(name = "reset-critical")]
    ResetCritical,
    /// Critical deferral rate over the (c, g) grid.
    #[command(name = "sweep-critical")]
    SweepCritical,
    /// Quadratic fits of r*(g) per fee rate.
    #[command(name = "fit-critical")]
    FitCritical {
        /// Surface CSV; defaults to `<out>/sweep-critical.csv`.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Sweeps and fair rates at several volatilities.
    #[command(name = "volatility-study")]
    VolatilityStudy,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Paths { .. } => "paths",
            Command::Price => "price",
            Command::Prob => "prob",
            Command::FairG => "fair-g",
            Command::SweepProb => "sweep-prob",
            Command::SweepValue => "sweep-value",
            Command::ResetCritical => "reset-critical",
            Command::SweepCritical => "sweep-critical",
            Command::FitCritical { .. } => "fit-critical",
            Command::VolatilityStudy => "volatility-study",
        }
    }
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Usage(e.to_string())
        }
    }
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Numerical(_) => EXIT_NUMERICAL,
            CliError::Io(_) => EXIT_IO,
        }
    }
}

/// Effective settings after applying flag overrides.
struct Run {
    command: &'static str,
    config: RunConfig,
    out_dir: PathBuf,
    /// Machine-readable numerical failures for the sidecar file.
    failures: Vec<Vec<String>>,
}

const FAILURE_COLUMNS: &[&str] = &["c", "g", "kind", "detail"];

fn build_config(common: &CommonArgs) -> Result<RunConfig, CliError> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path).map_err(|e| match e {
            ConfigError::Io { .. } => CliError::Io(std::io::Error::other(e.to_string())),
            other => CliError::Usage(other.to_string()),
        })?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.sim.seed = seed;
    }
    if let Some(paths) = common.paths {
        cfg.sim.n_paths = paths;
    }
    if let Some(workers) = common.workers {
        cfg.sim.workers = Some(workers);
    }
    if common.antithetic {
        cfg.sim.antithetic = true;
    }
    if let Some(out) = &common.out {
        cfg.output.dir = out.clone();
    }
    if let Some(f) = common.fee_structure {
        cfg.contract.fee_structure = match f {
            FeeArg::F1 => FeeStructure::F1,
            FeeArg::F2 => FeeStructure::F2,
        };
    }
    if let Some(sigma) = common.sigma {
        cfg.market.sigma = sigma;
        cfg.grids.sigma = vec![sigma];
    }
    if let Some(c) = common.c {
        cfg.contract.fee_rate = c;
        cfg.grids.c = GridSpec::single(c);
    }
    if let Some(count) = common.g_count {
        cfg.grids.g.count = count;
    }
    if let Some(g) = common.g {
        cfg.contract.payment_rate = g;
        cfg.grids.g = GridSpec::single(g);
    }
    if let Some(mode) = common.bb_rate_mode {
        cfg.reset.bb_rate_mode = match mode {
            BbModeArg::Extension => crate::reset::BbRateMode::AtExtensionRate,
            BbModeArg::Contract => crate::reset::BbRateMode::AtContractRate,
        };
    }
    if let Some(t) = common.extension_fee {
        cfg.reset.charge_extension_fees = t == Toggle::On;
    }
    if let Some(t) = common.annuity_timing {
        cfg.contract.annuity_timing = match t {
            TimingArg::Due => AnnuityTiming::Due,
            TimingArg::Immediate => AnnuityTiming::Immediate,
        };
    }
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(cfg)
}

/// Parses `argv` (including the program name), runs the command and
/// returns the process exit code.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let command = cli.command.name();
    let config = match build_config(&cli.common) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("gmib {command}: {e}");
            return e.exit_code();
        }
    };
    let mut run = Run {
        command,
        out_dir: config.output.dir.clone(),
        config,
        failures: Vec::new(),
    };
    let result = dispatch(&cli.command, &mut run);
    let result = result.and_then(|summary| {
        if run.failures.is_empty() {
            Ok(summary)
        } else {
            let mut table = CsvTable::new(provenance(command, &run.config), FAILURE_COLUMNS);
            for f in run.failures.drain(..) {
                table.push(f);
            }
            table.write_atomic(&run.out_dir.join(format!("{command}.errors.csv")))?;
            Err(CliError::Numerical(format!(
                "{summary}; {} failure(s) recorded in {command}.errors.csv",
                table.rows.len()
            )))
        }
    });
    match result {
        Ok(summary) => {
            println!(
                "{command}: {summary} (seed={}, n_paths={})",
                run.config.sim.seed, run.config.sim.n_paths
            );
            EXIT_OK
        }
        Err(e) => {
            eprintln!(
                "gmib {command}: {e} (seed={}, n_paths={})",
                run.config.sim.seed, run.config.sim.n_paths
            );
            e.exit_code()
        }
    }
}

fn dispatch(command: &Command, run: &mut Run) -> Result<String, CliError> {
    match command {
        Command::Paths { n } => cmd_paths(run, *n),
        Command::Price => cmd_single(run, Metric::Value),
        Command::Prob => cmd_single(run, Metric::Probability),
        Command::FairG => cmd_fair_g(run),
        Command::SweepProb => cmd_sweep(run, Metric::Probability),
        Command::SweepValue => cmd_sweep(run, Metric::Value),
        Command::ResetCritical => cmd_reset_critical(run),
        Command::SweepCritical => cmd_sweep_critical(run),
        Command::FitCritical { input } => cmd_fit_critical(run, input.as_deref()),
        Command::VolatilityStudy => cmd_volatility_study(run),
    }
}

#[derive(Clone, Copy)]
enum Metric {
    Value,
    Probability,
}

const VALUE_COLUMNS: &[&str] = &["c", "g", "estimate", "std_error", "n_paths"];

fn value_row(c: f64, g: f64, v: &ValuationResult, metric: Metric) -> Vec<String> {
    let fmt = match metric {
        Metric::Value => currency,
        Metric::Probability => rate,
    };
    vec![rate(c), rate(g), fmt(v.estimate), fmt(v.std_error), v.n_paths.to_string()]
}

fn grid_table(run: &Run, name: &str, cells: &[GridCell], metric: Metric) -> CsvTable {
    let mut table = CsvTable::new(provenance(name, &run.config), VALUE_COLUMNS);
    for cell in cells {
        let v = match metric {
            Metric::Value => &cell.value,
            Metric::Probability => &cell.probability,
        };
        table.push(value_row(cell.c, cell.g, v, metric));
    }
    table
}

fn write(run: &Run, table: &CsvTable, file: &str) -> Result<PathBuf, CliError> {
    let path = run.out_dir.join(file);
    table.write_atomic(&path)?;
    Ok(path)
}

fn write_main(run: &Run, table: &CsvTable) -> Result<String, CliError> {
    let path = write(run, table, &format!("{}.csv", run.command))?;
    Ok(format!("wrote {} ({} rows)", path.display(), table.rows.len()))
}

fn cmd_paths(run: &mut Run, n: usize) -> Result<String, CliError> {
    let mut plan = run.config.plan();
    plan.n_paths = n;
    run.config.sim.n_paths = n;
    let trajectories = simulate_trajectories(&run.config.contract, &run.config.market, &plan)?;
    let mut table = CsvTable::new(
        provenance(run.command, &run.config),
        &["path_id", "year", "value_post_fee"],
    );
    for (id, path) in trajectories.iter().enumerate() {
        for (year, v) in path.post_fee_values.iter().enumerate() {
            table.push(vec![id.to_string(), (year + 1).to_string(), currency(*v)]);
        }
    }
    write_main(run, &table)
}

fn cmd_single(run: &mut Run, metric: Metric) -> Result<String, CliError> {
    let t = run.config.contract;
    let cells = sweep_grid(&t, &run.config.market, &run.config.plan(), &[t.payment_rate], &[t.fee_rate])?;
    let table = grid_table(run, run.command, &cells, metric);
    write_main(run, &table)
}

fn cmd_sweep(run: &mut Run, metric: Metric) -> Result<String, CliError> {
    let cfg = &run.config;
    let cells = sweep_grid(
        &cfg.contract,
        &cfg.market,
        &cfg.plan(),
        &cfg.grids.g.values(),
        &cfg.grids.c.values(),
    )?;
    let table = grid_table(run, run.command, &cells, metric);
    write_main(run, &table)
}

const FAIR_COLUMNS: &[&str] = &["c", "g", "estimate", "std_error", "n_paths", "g_star"];

fn fair_rows(run: &mut Run, rows: &[FairRow], table: &mut CsvTable, sigma: Option<f64>) {
    for row in rows {
        match &row.outcome {
            Ok(fair) => {
                let g = fair.solution.g_star;
                let mut cells = vec![
                    rate(row.c),
                    rate(g),
                    currency(fair.value.estimate),
                    currency(fair.value.std_error),
                    fair.value.n_paths.to_string(),
                    rate(g),
                ];
                if let Some(s) = sigma {
                    cells.insert(0, rate(s));
                    let (lo, hi) = crate::experiments::COMPETITIVE_G_RANGE;
                    cells.push(((lo..=hi).contains(&g)).to_string());
                }
                table.push(cells);
            }
            Err(e) => run.failures.push(vec![
                rate(row.c),
                String::new(),
                "no_root".into(),
                match sigma {
                    Some(s) => format!("sigma={}: {e}", rate(s)),
                    None => e.to_string(),
                },
            ]),
        }
    }
}

fn cmd_fair_g(run: &mut Run) -> Result<String, CliError> {
    let cfg = run.config.clone();
    let rows = fair_rate_table(
        &cfg.contract,
        &cfg.market,
        &cfg.plan(),
        &cfg.grids.c.values(),
        &FairRateOptions::default(),
    )?;
    let mut table = CsvTable::new(provenance(run.command, &cfg), FAIR_COLUMNS);
    fair_rows(run, &rows, &mut table, None);
    write_main(run, &table)
}

fn scenario(cfg: &RunConfig, c: f64, g: f64) -> ResetScenario {
    ResetScenario {
        terms: cfg.contract.with_fee_rate(c).with_payment_rate(g),
        model: cfg.market,
        rate_grid: cfg.grids.rate.values(),
        bb_rate_mode: cfg.reset.bb_rate_mode,
        charge_extension_fees: cfg.reset.charge_extension_fees,
    }
}

const CRITICAL_COLUMNS: &[&str] = &["c", "g", "r_star", "status"];

fn critical_row(run: &mut Run, c: f64, g: f64, critical: &CriticalRate) -> Vec<String> {
    if critical.status != CriticalStatus::Found {
        run.failures.push(vec![
            rate(c),
            rate(g),
            critical.status.as_str().into(),
            format!("D(low)={} D(high)={}", currency(critical.d_low), currency(critical.d_high)),
        ]);
    }
    vec![
        rate(c),
        rate(g),
        critical.r_star.map(rate).unwrap_or_default(),
        critical.status.as_str().into(),
    ]
}

fn cmd_reset_critical(run: &mut Run) -> Result<String, CliError> {
    let cfg = run.config.clone();
    let (c, g) = (cfg.contract.fee_rate, cfg.contract.payment_rate);
    let scenario = scenario(&cfg, c, g);
    let analysis = DeferralAnalysis::new(&scenario, &cfg.plan())?;
    let critical = analysis.critical_rate()?;
    if cfg.output.plot_data {
        let mut curve = CsvTable::new(
            provenance(run.command, &cfg),
            &["rate", "benefit_base", "account_mean", "account_std_error", "difference"],
        );
        for p in analysis.curve()? {
            curve.push(vec![
                rate(p.rate),
                currency(p.benefit_base),
                currency(p.account.estimate),
                currency(p.account.std_error),
                currency(p.difference()),
            ]);
        }
        write(run, &curve, "reset-critical.curve.csv")?;
    }
    let mut table = CsvTable::new(provenance(run.command, &cfg), CRITICAL_COLUMNS);
    let row = critical_row(run, c, g, &critical);
    table.push(row);
    write_main(run, &table)
}

fn cmd_sweep_critical(run: &mut Run) -> Result<String, CliError> {
    let cfg = run.config.clone();
    let base = scenario(&cfg, cfg.contract.fee_rate, cfg.contract.payment_rate);
    let surface = critical_rate_surface(&cfg.grids.g.values(), &cfg.grids.c.values(), &base, &cfg.plan())?;
    let mut table = CsvTable::new(provenance(run.command, &cfg), CRITICAL_COLUMNS);
    for e in &surface.entries {
        let row = critical_row(run, e.c, e.g, &e.critical);
        table.push(row);
    }
    // Out-of-range cells are recorded in the sidecar but are not fatal.
    if !run.failures.is_empty() {
        let mut side = CsvTable::new(provenance(run.command, &cfg), FAILURE_COLUMNS);
        for f in run.failures.drain(..) {
            side.push(f);
        }
        write(run, &side, "sweep-critical.errors.csv")?;
    }
    write_main(run, &table)
}

/// Groups `(g, r*)` points by fee rate, keeping first-seen order.
/// Surface rows grouped by fee rate: `(c, [(g, r*)])`.
type SurfacePoints = Vec<(f64, Vec<(f64, f64)>)>;

fn surface_points(path: &Path) -> Result<SurfacePoints, CliError> {
    let (headers, rows) = read_table(path)?;
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Usage(format!("{} has no `{name}` column", path.display())))
    };
    let (ci, gi, ri, si) = (col("c")?, col("g")?, col("r_star")?, col("status")?);
    let parse = |s: &str| {
        s.parse::<f64>()
            .map_err(|_| CliError::Usage(format!("bad number `{s}` in {}", path.display())))
    };
    let mut groups: Vec<(f64, Vec<(f64, f64)>)> = Vec::new();
    for row in rows {
        let c = parse(&row[ci])?;
        let idx = match groups.iter().position(|(gc, _)| *gc == c) {
            Some(i) => i,
            None => {
                groups.push((c, Vec::new()));
                groups.len() - 1
            }
        };
        if CriticalStatus::parse(&row[si]) == Some(CriticalStatus::Found) {
            groups[idx].1.push((parse(&row[gi])?, parse(&row[ri])?));
        }
    }
    Ok(groups)
}

fn cmd_fit_critical(run: &mut Run, input: Option<&Path>) -> Result<String, CliError> {
    let path = input
        .map(Path::to_path_buf)
        .unwrap_or_else(|| run.out_dir.join("sweep-critical.csv"));
    let groups = surface_points(&path)?;
    let mut table = CsvTable::new(
        format!("{} input={}", provenance(run.command, &run.config), path.display()),
        &["c", "a2", "a1", "a0", "r_squared_adj", "p_value_vs_linear"],
    );
    let mut better = 0;
    for (c, points) in &groups {
        let fits = fit_polynomial(points, 1).and_then(|l| Ok((l, fit_polynomial(points, 2)?)));
        match fits.and_then(|(l, q)| Ok((nested_f_test(&l, &q)?, q))) {
            Ok((test, q)) => {
                better += usize::from(test.significant());
                table.push(vec![
                    rate(*c),
                    rate(q.coefficients[0]),
                    rate(q.coefficients[1]),
                    rate(q.coefficients[2]),
                    rate(q.adjusted_r_squared),
                    crate::output::significant(test.p_value, 6),
                ]);
            }
            Err(e) => run.failures.push(vec![rate(*c), String::new(), "fit".into(), e.to_string()]),
        }
    }
    let summary = write_main(run, &table)?;
    Ok(format!(
        "{summary}; quadratic significantly better (p < 0.01) for {better}/{} fee levels",
        groups.len()
    ))
}

fn cmd_volatility_study(run: &mut Run) -> Result<String, CliError> {
    let cfg = run.config.clone();
    let studies = volatility_study(
        &cfg.contract,
        &cfg.market,
        &cfg.plan(),
        &cfg.grids.sigma,
        &cfg.grids.g.values(),
        &cfg.grids.c.values(),
        &FairRateOptions::default(),
    )?;
    let mut columns = vec!["sigma"];
    columns.extend_from_slice(FAIR_COLUMNS);
    columns.push("in_range");
    let mut table = CsvTable::new(provenance(run.command, &cfg), &columns);
    let mut flagged = 0;
    for study in &studies {
        let mut sigma_cfg = cfg.clone();
        sigma_cfg.market = MarketModel {
            sigma: study.sigma,
            ..cfg.market
        };
        let tag = format!("sigma-{}", rate(study.sigma));
        for (name, metric) in [("sweep-prob", Metric::Probability), ("sweep-value", Metric::Value)] {
            let mut t = CsvTable::new(provenance(name, &sigma_cfg), VALUE_COLUMNS);
            t.rows = grid_table(run, name, &study.grid, metric).rows;
            write(run, &t, &format!("volatility-study.{tag}.{name}.csv"))?;
        }
        fair_rows(run, &study.fair, &mut table, Some(study.sigma));
        flagged += study.out_of_range().len();
    }
    let summary = write_main(run, &table)?;
    Ok(format!(
        "{summary}; {flagged} fair rate(s) outside [0.05, 0.10]"
    ))
}
