use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{Map, Value};

use ration_lab::bounds::{kappa_a, kappa_p, kappa_tfr, lp_verify, GuaranteeTable};
use ration_lab::experiments::{table2, DpOptions, Setting, Table2Config};
use ration_lab::extensions::{multi_resource_guarantee, optimize_endowment, wpm_welfare, MultiResourceSpec};
use ration_lab::instances::{
    example1_instance, hard_instance_overdemanded, hard_instance_underdemanded, worstcase_tfr_model,
};
use ration_lab::io::{load_instance, parse_traces, InstanceFile};
use ration_lab::policies::DEFAULT_STATE_BUDGET;
use ration_lab::seir::{build_bank, SeirConfig};
use ration_lab::{evaluate_policy, Error, FairnessReport, Policy, PolicySpec, Result};

#[derive(Parser)]
#[command(name = "ration-lab", version, about = "Fair sequential rationing: policies, bounds and simulations")]
struct Cli {
    /// Base random seed.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "RATION_LAB_THREADS")]
    threads: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Output file (standard output if absent).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form guarantees at one scarcity level.
    Bounds {
        #[arg(long)]
        mu: f64,
        #[arg(long)]
        n: usize,
    },
    /// Evaluate policies on an instance file.
    Run(RunArgs),
    /// Generate an instance file.
    #[command(subcommand)]
    Gen(GenCommand),
    /// SEIR simulation.
    #[command(subcommand)]
    Seir(SeirCommand),
    /// Solve the factor-revealing LP and compare with its dual certificate.
    LpVerify {
        #[arg(long)]
        mu: f64,
        #[arg(long)]
        n: usize,
    },
    /// Budgeted supply levels across resources.
    Endowment(EndowmentArgs),
    /// Weighted power-mean welfare of recorded traces.
    Welfare {
        /// Fairness parameter; `inf` gives the minimum fill rate.
        #[arg(long)]
        alpha: String,
        #[arg(long)]
        trace: PathBuf,
    },
    /// Compare policies on simulated epidemic demand.
    Table2(Table2Args),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Policy strings: ppa, ppa-monotone, tfr:<tau>, opt-tfr, fixed:<csv>,
    /// offline, dp:<eps>, fptas:<eps>. Repeat or comma-free list.
    #[arg(long = "policy")]
    policies: Vec<String>,
    /// Monte Carlo paths when the model is too large to enumerate.
    #[arg(long, default_value_t = 10_000)]
    paths: usize,
}

#[derive(Subcommand)]
enum GenCommand {
    /// Hard instance for the ex-post guarantee.
    Hard {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        mu: f64,
        #[arg(long, value_enum)]
        regime: Option<Regime>,
    },
    /// Two-agent instance separating PPA from the DP.
    Example1 {
        #[arg(long, default_value_t = 0.01)]
        eps: f64,
    },
    /// Worst case for target-fill-rate policies.
    WorstTfr {
        #[arg(long)]
        mu: f64,
        #[arg(long, default_value_t = 0.01)]
        eps: f64,
        #[arg(long, default_value_t = 2000)]
        atoms: usize,
        #[arg(long, default_value_t = 2)]
        agents: usize,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Regime {
    Over,
    Under,
}

#[derive(Subcommand)]
enum SeirCommand {
    /// Simulate peak demands and write a bank (JSON lines).
    Simulate {
        /// SEIR configuration JSON; defaults to a four-location line.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 1000)]
        paths: usize,
    },
}

#[derive(Args)]
struct EndowmentArgs {
    #[arg(long)]
    budget: f64,
    #[arg(long)]
    costs: String,
    #[arg(long)]
    weights: String,
    #[arg(long)]
    mus: String,
    #[arg(long)]
    n: usize,
}

#[derive(Args)]
struct Table2Args {
    /// base, xi_misspec or lambda_misspec.
    #[arg(long, default_value = "base")]
    scenario: String,
    #[arg(long, default_value_t = 1000)]
    paths: usize,
    /// Calibration bank size (defaults to --paths).
    #[arg(long)]
    calibration_paths: Option<usize>,
    #[arg(long)]
    with_dp: bool,
    #[arg(long, default_value_t = 20)]
    dp_levels: usize,
    #[arg(long, default_value_t = 10_000)]
    dp_paths: usize,
}

fn parse_csv(s: &str, what: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidArgument(format!("bad number {t:?} in --{what}")))
        })
        .collect()
}

fn parse_alpha(s: &str) -> Result<f64> {
    match s {
        "inf" | "infinity" | "Inf" => Ok(f64::INFINITY),
        _ => s
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("bad alpha {s:?}"))),
    }
}

/// Report row for `run`: the policy report next to the guarantees.
#[derive(Serialize)]
struct RunRow {
    #[serde(flatten)]
    report: FairnessReport,
    kappa_p: f64,
    kappa_a: f64,
    kappa_tfr: f64,
    /// Ex-post fairness minus `kappa_p`.
    margin_over_kappa_p: f64,
    /// Ex-post value relative to the offline optimum.
    ratio_to_offline: f64,
}

fn cmd_run(args: &RunArgs, seed: u64) -> Result<Value> {
    if args.policies.is_empty() {
        return Err(Error::InvalidArgument("at least one --policy is required".into()));
    }
    let instance = load_instance(&args.instance)?;
    let specs: Vec<PolicySpec> = args.policies.iter().map(|p| p.parse()).collect::<Result<_>>()?;
    let mu = instance.mu();
    let n = instance.n_agents;
    let mut rows = Vec::new();
    for spec in &specs {
        let policy = Policy::build(spec, &instance)?;
        let report = evaluate_policy(&instance, &policy, args.paths, seed)?;
        rows.push(RunRow {
            kappa_p: kappa_p(mu, n),
            kappa_a: kappa_a(mu, n),
            kappa_tfr: kappa_tfr(mu),
            margin_over_kappa_p: report.ex_post_fairness - kappa_p(mu, n),
            ratio_to_offline: if report.offline_ex_post > 0.0 {
                report.ex_post / report.offline_ex_post
            } else {
                1.0
            },
            report,
        });
    }
    Ok(serde_json::to_value(rows)?)
}

fn cmd_gen(cmd: &GenCommand) -> Result<Value> {
    let model = match *cmd {
        GenCommand::Hard { n, mu, regime } => {
            let over = match regime {
                Some(Regime::Over) => true,
                Some(Regime::Under) => false,
                None => mu >= 1.0 + 1.0 / n.max(1) as f64,
            };
            if over {
                hard_instance_overdemanded(n, mu)?
            } else {
                hard_instance_underdemanded(n, mu)?
            }
        }
        GenCommand::Example1 { eps } => example1_instance(eps)?,
        GenCommand::WorstTfr { mu, eps, atoms, agents } => worstcase_tfr_model(mu, eps, atoms, agents)?,
    };
    Ok(serde_json::to_value(InstanceFile::from_model(&model, 1.0)?)?)
}

fn cmd_endowment(a: &EndowmentArgs) -> Result<Value> {
    let mut spec = MultiResourceSpec {
        supplies: vec![],
        mus: parse_csv(&a.mus, "mus")?,
        weights: parse_csv(&a.weights, "weights")?,
        costs: parse_csv(&a.costs, "costs")?,
        budget: a.budget,
    };
    let s = optimize_endowment(&spec, a.n)?;
    spec.supplies = s.clone();
    let guarantee = multi_resource_guarantee(&spec, a.n)?;
    let spent: f64 = s.iter().zip(&spec.costs).map(|(x, c)| x * c).sum();
    Ok(serde_json::json!({ "supplies": s, "guarantee": guarantee, "spent": spent }))
}

fn cmd_welfare(alpha: &str, trace: &Path) -> Result<Value> {
    let alpha = parse_alpha(alpha)?;
    let traces = parse_traces(&std::fs::read_to_string(trace)?)?;
    let rows = traces
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let u = wpm_welfare(alpha, &t.demands, &t.allocations)?;
            let min = wpm_welfare(f64::INFINITY, &t.demands, &t.allocations)?;
            Ok(serde_json::json!({ "path": i, "welfare": u, "min_fill_rate": min }))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Value::Array(rows))
}

fn cmd_table2(a: &Table2Args, seed: u64) -> Result<Value> {
    let setting: Setting = a.scenario.parse()?;
    if a.paths < 100 {
        return Err(Error::InvalidArgument("table2 needs --paths >= 100".into()));
    }
    let mut cfg = Table2Config::new(setting, a.paths, seed);
    cfg.calibration_paths = a.calibration_paths.unwrap_or(a.paths);
    if a.with_dp {
        cfg.dp = Some(DpOptions {
            levels: a.dp_levels,
            calibration_paths: a.dp_paths,
            state_budget: DEFAULT_STATE_BUDGET,
        });
    }
    let report = table2(&cfg)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    Ok(serde_json::to_value(report)?)
}

fn flatten_into(prefix: &str, v: &Value, out: &mut Map<String, Value>) {
    let key = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                flatten_into(&key(k), x, out);
            }
        }
        Value::Array(xs) if xs.iter().any(|x| x.is_object() || x.is_array()) => {
            for (i, x) in xs.iter().enumerate() {
                flatten_into(&key(&i.to_string()), x, out);
            }
        }
        Value::Array(xs) => {
            let joined = xs.iter().map(scalar).collect::<Vec<_>>().join(";");
            out.insert(prefix.to_string(), Value::String(joined));
        }
        _ => {
            out.insert(prefix.to_string(), v.clone());
        }
    }
}

fn scalar(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

/// One CSV row per array element (or a single row), nested fields dotted.
fn write_csv<W: Write>(v: &Value, w: W) -> Result<()> {
    let items: Vec<&Value> = match v {
        Value::Array(xs) => xs.iter().collect(),
        other => vec![other],
    };
    let rows: Vec<Map<String, Value>> = items
        .into_iter()
        .map(|x| {
            let mut m = Map::new();
            flatten_into("", x, &mut m);
            m
        })
        .collect();
    let mut header: Vec<String> = Vec::new();
    for r in &rows {
        for k in r.keys() {
            if !header.contains(k) {
                header.push(k.clone());
            }
        }
    }
    let mut wr = csv::Writer::from_writer(w);
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    wr.write_record(&header).map_err(io)?;
    for r in &rows {
        wr.write_record(header.iter().map(|k| r.get(k).map(scalar).unwrap_or_default()))
            .map_err(io)?;
    }
    wr.flush()?;
    Ok(())
}

fn emit(v: &Value, format: Format, out: Option<&Path>) -> Result<()> {
    let mut sink: Box<dyn Write> = match out {
        Some(p) => Box::new(File::create(p)?),
        None => Box::new(std::io::stdout().lock()),
    };
    match format {
        Format::Json => {
            serde_json::to_writer_pretty(&mut sink, v)?;
            writeln!(sink)?;
        }
        Format::Csv => write_csv(v, &mut sink)?,
    }
    sink.flush()?;
    Ok(())
}

fn execute(cli: &Cli) -> Result<()> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(Error::InvalidArgument("--threads must be >= 1".into()));
        }
        // Fails only if a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    let value = match &cli.command {
        Command::Bounds { mu, n } => {
            if !(*mu >= 0.0) || *n == 0 {
                return Err(Error::InvalidArgument("need mu >= 0 and n >= 1".into()));
            }
            serde_json::to_value(GuaranteeTable::new(*mu, *n))?
        }
        Command::Run(a) => cmd_run(a, cli.seed)?,
        Command::Gen(g) => cmd_gen(g)?,
        Command::Seir(SeirCommand::Simulate { config, paths }) => {
            let config: SeirConfig = match config {
                Some(p) => serde_json::from_reader(BufReader::new(File::open(p)?))?,
                None => SeirConfig::default(),
            };
            let bank = build_bank(&config, *paths, cli.seed)?;
            // Banks are always JSON lines.
            return match &cli.out {
                Some(p) => bank.write_jsonl(std::io::BufWriter::new(File::create(p)?)),
                None => bank.write_jsonl(std::io::stdout().lock()),
            };
        }
        Command::LpVerify { mu, n } => serde_json::to_value(lp_verify(*n, *mu)?)?,
        Command::Endowment(a) => cmd_endowment(a)?,
        Command::Welfare { alpha, trace } => cmd_welfare(alpha, trace)?,
        Command::Table2(a) => cmd_table2(a, cli.seed)?,
    };
    emit(&value, cli.format, cli.out.as_deref())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config_error() { 2 } else { 3 })
        }
    }
}
