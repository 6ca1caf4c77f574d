//! Command-line front end.
//!
//! Exit codes: 0 on success, 2 on a validation error (nothing is written),
//! 3 when a verification subcommand finds a violated inequality (the report
//! with the counterexample is still written).

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::bounds::{iid_pac_bound, markov_pac_bound, BoundReport, MarkovTerms, RademacherInput};
use crate::complexity::{
    bound_theorem_terms, estimate_rademacher, exact_rademacher, make_fplus, monte_carlo_rademacher,
    ContractionReport, FiniteHypothesisTable, RademacherEstimate, RademacherMode, TheoremBound,
};
use crate::error::{Error, Result};
use crate::experiments::{
    contraction_instance_dnn, contraction_instance_highdim, coverage_experiment,
    domination_instance, mse_experiment, mse_instance, verify_margin_constants, CoverageConfig,
    CoverageResult, DataSource, DominationReport, MarginConstantReport, MseReport,
};
use crate::io::{
    load_chain, load_dataset_csv, load_hypothesis_csv, load_network, read_text, ExperimentConfig,
};
use crate::markov::{analyze, ChainAnalysis};
use crate::network::NetworkSpec;
use crate::parallel::Workers;
use crate::report::{csv_sibling, format_f64, sha256_hex, to_json, write_atomic, Envelope, Table};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_VIOLATION: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "genbound",
    version,
    about = "Generalization bounds for feed-forward networks on i.i.d. and Markov data"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Experiment config (TOML)
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override a config key, e.g. `bound.delta=0.1`; repeatable
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,
    /// Report path (JSON); a CSV table is written next to it when one exists
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Master seed; overrides `seed` in the config
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: $GENBOUND_WORKERS or all cores)
    #[arg(long, global = true)]
    pub workers: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// PAC bounds on the misclassification risk
    #[command(subcommand)]
    Bound(BoundCmd),
    /// Rademacher complexity estimates and the closed-form bound
    #[command(subcommand)]
    Rademacher(RademacherCmd),
    /// Markov chain analysis
    #[command(subcommand)]
    Chain(ChainCmd),
    /// Randomized checks of the inequalities
    #[command(subcommand)]
    Verify(VerifyCmd),
    /// Config file validation
    #[command(subcommand)]
    Config(ConfigCmd),
}

#[derive(Debug, Subcommand)]
pub enum BoundCmd {
    Iid {
        #[arg(long)]
        network: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    Markov {
        #[arg(long)]
        network: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        chain: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    /// signed supremum (scalar tables)
    SignedSup,
    /// supremum of the sup-norm
    AbsSup,
}

#[derive(Debug, Args)]
pub struct TableArgs {
    /// Hypothesis CSV (header s<i>c<j>)
    #[arg(long)]
    pub table: PathBuf,
    /// Close the class under negation and add the zero function first
    #[arg(long)]
    pub fplus: bool,
    /// Default: signed_sup for scalar tables, abs_sup otherwise
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
}

#[derive(Debug, Subcommand)]
pub enum RademacherCmd {
    Exact(TableArgs),
    Mc {
        #[command(flatten)]
        table: TableArgs,
        /// Number of sign vectors (default: rademacher.draws)
        #[arg(long)]
        draws: Option<u64>,
    },
    Theorem {
        #[arg(long)]
        network: PathBuf,
        #[arg(long)]
        n: usize,
    },
}

#[derive(Debug, Subcommand)]
pub enum ChainCmd {
    Analyze {
        #[arg(long)]
        chain: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ContractionKind {
    Highdim,
    Dnn,
    Both,
}

#[derive(Debug, Subcommand)]
pub enum VerifyCmd {
    /// Random instances of the contraction inequalities
    Contraction {
        #[arg(long, value_enum, default_value = "both")]
        kind: ContractionKind,
        #[arg(long, default_value_t = 200)]
        instances: u64,
    },
    /// Transfer constant of the configured margin model
    Margin {
        #[arg(long, default_value_t = 100_000)]
        trials: usize,
    },
    /// PAC coverage simulation from the [coverage] config section
    Coverage,
    /// Ergodic-average MSE against its bound
    Mse {
        /// Chain file; uses the [mse] config section for f, n, n0
        #[arg(long)]
        chain: Option<PathBuf>,
        /// Random (chain, f) pairs when no chain is given
        #[arg(long, default_value_t = 20)]
        pairs: u64,
        #[arg(long, default_value_t = 10_000)]
        trajectories: usize,
    },
    /// Exact Rademacher averages of small network classes against the closed form
    Domination {
        #[arg(long, default_value_t = 100)]
        instances: u64,
        #[arg(long, default_value_t = 24)]
        networks: usize,
    },
}

#[derive(Debug, Subcommand)]
pub enum ConfigCmd {
    Check,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Bound(BoundCmd::Iid { .. }) => "bound iid",
            Command::Bound(BoundCmd::Markov { .. }) => "bound markov",
            Command::Rademacher(RademacherCmd::Exact(_)) => "rademacher exact",
            Command::Rademacher(RademacherCmd::Mc { .. }) => "rademacher mc",
            Command::Rademacher(RademacherCmd::Theorem { .. }) => "rademacher theorem",
            Command::Chain(ChainCmd::Analyze { .. }) => "chain analyze",
            Command::Verify(VerifyCmd::Contraction { .. }) => "verify contraction",
            Command::Verify(VerifyCmd::Margin { .. }) => "verify margin",
            Command::Verify(VerifyCmd::Coverage) => "verify coverage",
            Command::Verify(VerifyCmd::Mse { .. }) => "verify mse",
            Command::Verify(VerifyCmd::Domination { .. }) => "verify domination",
            Command::Config(ConfigCmd::Check) => "config check",
        }
    }
}

/// Outcome of one command before it is written.
struct Output {
    result: serde_json::Value,
    table: Option<Table>,
    violated: bool,
}

impl Output {
    fn new<T: Serialize>(result: &T) -> Result<Self> {
        Ok(Output {
            result: serde_json::to_value(result).map_err(|e| Error::Parse(e.to_string()))?,
            table: None,
            violated: false,
        })
    }

    fn with_table(mut self, table: Table) -> Self {
        self.table = Some(table);
        self
    }

    fn violated(mut self, v: bool) -> Self {
        self.violated = v;
        self
    }
}

/// Tracks input files so they can be folded into the config digest.
#[derive(Default)]
struct Inputs(BTreeMap<String, String>);

impl Inputs {
    fn read(&mut self, path: &Path) -> Result<()> {
        let text = read_text(path)?;
        self.0
            .insert(path.display().to_string(), sha256_hex(text.as_bytes()));
        Ok(())
    }

    fn network(&mut self, path: &Path) -> Result<NetworkSpec> {
        self.read(path)?;
        let net = load_network(path)?;
        Ok(net)
    }
}

struct Context {
    config: ExperimentConfig,
    seed: u64,
    workers: Workers,
    inputs: Inputs,
}

fn rademacher_mode(table: &FiniteHypothesisTable, arg: Option<ModeArg>) -> RademacherMode {
    match arg {
        Some(ModeArg::SignedSup) => RademacherMode::SignedSup,
        Some(ModeArg::AbsSup) => RademacherMode::AbsSupInfNorm,
        None if table.coords() == 1 => RademacherMode::SignedSup,
        None => RademacherMode::AbsSupInfNorm,
    }
}

#[derive(Serialize)]
struct RademacherResult {
    functions: usize,
    samples: usize,
    coords: usize,
    fplus: bool,
    mode: RademacherMode,
    estimate: RademacherEstimate,
}

#[derive(Serialize)]
struct TheoremResult {
    n: usize,
    depth: usize,
    input_dim: usize,
    alphas: Vec<f64>,
    values_at_zero: Vec<f64>,
    bound: TheoremBound,
}

#[derive(Serialize)]
struct ChainResult {
    chain_digest: String,
    analysis: ChainAnalysis,
    mixing_lower: f64,
    mixing_upper: f64,
}

#[derive(Serialize)]
struct ContractionSummary {
    instances: usize,
    failures: usize,
    min_slack: f64,
    reports: Vec<NamedContraction>,
}

#[derive(Serialize)]
struct NamedContraction {
    kind: &'static str,
    report: ContractionReport,
}

#[derive(Serialize)]
struct MseSummary {
    pairs: usize,
    failures: usize,
    reports: Vec<MseReport>,
}

#[derive(Serialize)]
struct DominationSummary {
    instances: usize,
    failures: usize,
    reports: Vec<DominationReport>,
}

#[derive(Serialize)]
struct ConfigCheck {
    valid: bool,
    config: ExperimentConfig,
}

fn load_table(
    ctx: &mut Context,
    args: &TableArgs,
) -> Result<(FiniteHypothesisTable, RademacherMode)> {
    ctx.inputs.read(&args.table)?;
    let mut table = load_hypothesis_csv(&args.table)?;
    if args.fplus {
        table = make_fplus(&table);
    }
    let mode = rademacher_mode(&table, args.mode);
    Ok((table, mode))
}

fn gamma_table(report: &BoundReport) -> Table {
    let mut t = Table::new(&[
        "gamma",
        "empirical_margin_risk",
        "complexity_term",
        "loglog_term",
        "confidence_term",
        "total",
    ]);
    for g in &report.per_gamma {
        t.push(
            [
                g.gamma,
                g.empirical_margin_risk,
                g.complexity_term,
                g.loglog_term,
                g.confidence_term,
                g.total,
            ]
            .iter()
            .map(|&v| format_f64(v))
            .collect(),
        );
    }
    t
}

fn bound_command(
    ctx: &mut Context,
    network: &Path,
    data: &Path,
    chain: Option<&Path>,
) -> Result<Output> {
    let model = ctx.config.margin.model()?;
    let net = ctx.inputs.network(network)?;
    ctx.inputs.read(data)?;
    let (xs, ys) = load_dataset_csv(data, &model)?;
    let margins = xs
        .iter()
        .zip(&ys)
        .map(|(x, &y)| model.margin(&net.forward(x)?, y))
        .collect::<Result<Vec<_>>>()?;
    let n = margins.len();
    let rademacher = match &ctx.config.rademacher.table {
        Some(p) => {
            let path = ctx.config.resolve(p);
            ctx.inputs.read(&path)?;
            let table = make_fplus(&load_hypothesis_csv(&path)?);
            let mode = rademacher_mode(&table, None);
            let r = &ctx.config.rademacher;
            RademacherInput::from(estimate_rademacher(
                &table,
                mode,
                r.enumeration_cutoff,
                r.draws,
                ctx.seed,
                ctx.workers,
            )?)
        }
        None => RademacherInput::closed_form(&net, n, ctx.config.bound.sigma0_at_zero)?,
    };
    let settings = ctx.config.bound.settings();
    let report = match chain {
        None => iid_pac_bound(&margins, &net, &model, rademacher, &settings)?,
        Some(c) => {
            ctx.inputs.read(c)?;
            let chain = load_chain(c)?;
            let analysis = analyze(&chain, &ctx.config.markov.options())?;
            let m_f = ctx.config.markov.m_f.unwrap_or(model.label_bound());
            markov_pac_bound(
                &margins,
                &net,
                &model,
                rademacher,
                &settings,
                MarkovTerms::from_analysis(&analysis, m_f),
            )?
        }
    };
    Ok(Output::new(&report)?.with_table(gamma_table(&report)))
}

fn coverage_command(ctx: &mut Context) -> Result<Output> {
    let section =
        ctx.config.coverage.clone().ok_or_else(|| {
            Error::arg("verify coverage needs a [coverage] section in the config")
        })?;
    let margin = ctx.config.margin.model()?;
    let networks = section
        .networks
        .iter()
        .map(|p| ctx.inputs.network(&ctx.config.resolve(p)))
        .collect::<Result<Vec<_>>>()?;
    let source = match (&section.distribution, &section.chain) {
        (Some(d), None) => DataSource::Iid(d.clone()),
        (None, Some(c)) => {
            let path = ctx.config.resolve(c);
            ctx.inputs.read(&path)?;
            DataSource::Markov {
                chain: load_chain(&path)?,
                embedding: ctx
                    .config
                    .embedding()?
                    .ok_or_else(|| Error::arg("coverage.embedding missing"))?,
            }
        }
        _ => {
            return Err(Error::arg(
                "coverage needs exactly one of `distribution` and `chain`",
            ))
        }
    };
    let cfg = CoverageConfig {
        source,
        networks,
        margin,
        n: section.n,
        trials: section.trials,
        seed: ctx.seed,
        settings: ctx.config.bound.settings(),
        sigma0_at_zero: ctx.config.bound.sigma0_at_zero,
        analysis: ctx.config.markov.options(),
        m_f: ctx.config.markov.m_f,
    };
    let result: CoverageResult = coverage_experiment(&cfg, ctx.workers)?;
    let mut t = Table::new(&["trial", "min_slack", "worst_function", "violated"]);
    for r in &result.per_trial {
        t.push(vec![
            r.trial.to_string(),
            format_f64(r.min_slack),
            r.worst_function.to_string(),
            r.violated.to_string(),
        ]);
    }
    let bad = !result.within_tolerance();
    Ok(Output::new(&result)?.with_table(t).violated(bad))
}

fn execute(command: &Command, ctx: &mut Context) -> Result<Output> {
    match command {
        Command::Bound(BoundCmd::Iid { network, data }) => bound_command(ctx, network, data, None),
        Command::Bound(BoundCmd::Markov {
            network,
            data,
            chain,
        }) => bound_command(ctx, network, data, Some(chain)),
        Command::Rademacher(RademacherCmd::Exact(args)) => {
            let (table, mode) = load_table(ctx, args)?;
            let estimate = exact_rademacher(&table, mode, ctx.workers)?;
            Output::new(&RademacherResult {
                functions: table.functions(),
                samples: table.samples(),
                coords: table.coords(),
                fplus: args.fplus,
                mode,
                estimate,
            })
        }
        Command::Rademacher(RademacherCmd::Mc { table: args, draws }) => {
            let (table, mode) = load_table(ctx, args)?;
            let draws = draws.unwrap_or(ctx.config.rademacher.draws);
            let estimate = monte_carlo_rademacher(&table, mode, draws, ctx.seed, ctx.workers)?;
            Output::new(&RademacherResult {
                functions: table.functions(),
                samples: table.samples(),
                coords: table.coords(),
                fplus: args.fplus,
                mode,
                estimate,
            })
        }
        Command::Rademacher(RademacherCmd::Theorem { network, n }) => {
            let net = ctx.inputs.network(network)?;
            let s0 = ctx.config.bound.sigma0_at_zero;
            Output::new(&TheoremResult {
                n: *n,
                depth: net.depth(),
                input_dim: net.input_dim(),
                alphas: net.alphas(),
                values_at_zero: net.values_at_zero(s0),
                bound: bound_theorem_terms(&net, *n, s0)?,
            })
        }
        Command::Chain(ChainCmd::Analyze { chain }) => {
            ctx.inputs.read(chain)?;
            let chain = load_chain(chain)?;
            let analysis = analyze(&chain, &ctx.config.markov.options())?;
            let (lo, hi) = analysis.mixing_sandwich();
            Output::new(&ChainResult {
                chain_digest: chain.digest(),
                analysis,
                mixing_lower: lo,
                mixing_upper: hi,
            })
        }
        Command::Verify(VerifyCmd::Contraction { kind, instances }) => {
            let mut reports = Vec::new();
            for i in 0..*instances {
                let seed = ctx.seed.wrapping_add(i);
                if matches!(kind, ContractionKind::Highdim | ContractionKind::Both) {
                    reports.push(NamedContraction {
                        kind: "highdim",
                        report: contraction_instance_highdim(seed, ctx.workers)?,
                    });
                }
                if matches!(kind, ContractionKind::Dnn | ContractionKind::Both) {
                    reports.push(NamedContraction {
                        kind: "dnn",
                        report: contraction_instance_dnn(seed, ctx.workers)?,
                    });
                }
            }
            let failures = reports.iter().filter(|r| !r.report.holds).count();
            let min_slack = reports
                .iter()
                .map(|r| r.report.slack)
                .fold(f64::INFINITY, f64::min);
            let mut t = Table::new(&["kind", "instance_seed", "lhs", "rhs", "slack", "holds"]);
            for r in &reports {
                t.push(vec![
                    r.kind.to_string(),
                    r.report.instance_seed.unwrap_or_default().to_string(),
                    format_f64(r.report.lhs),
                    format_f64(r.report.rhs),
                    format_f64(r.report.slack),
                    r.report.holds.to_string(),
                ]);
            }
            let summary = ContractionSummary {
                instances: reports.len(),
                failures,
                min_slack,
                reports,
            };
            Ok(Output::new(&summary)?.with_table(t).violated(failures > 0))
        }
        Command::Verify(VerifyCmd::Margin { trials }) => {
            let model = ctx.config.margin.model()?;
            let report: MarginConstantReport =
                verify_margin_constants(&model, *trials, ctx.seed, ctx.workers)?;
            let bad = !report.holds;
            Ok(Output::new(&report)?.violated(bad))
        }
        Command::Verify(VerifyCmd::Coverage) => coverage_command(ctx),
        Command::Verify(VerifyCmd::Mse {
            chain,
            pairs,
            trajectories,
        }) => {
            let reports = match chain {
                Some(c) => {
                    let section = ctx.config.mse.clone().ok_or_else(|| {
                        Error::arg("verify mse --chain needs an [mse] config section")
                    })?;
                    ctx.inputs.read(c)?;
                    let chain = load_chain(c)?;
                    vec![mse_experiment(
                        &chain,
                        &section.f,
                        section.n,
                        section.n0,
                        section.trajectories,
                        ctx.seed,
                        ctx.workers,
                    )?]
                }
                None => (0..*pairs)
                    .map(|i| mse_instance(ctx.seed.wrapping_add(i), *trajectories, ctx.workers))
                    .collect::<Result<Vec<_>>>()?,
            };
            let failures = reports.iter().filter(|r| !r.holds).count();
            let mut t = Table::new(&[
                "n",
                "n0",
                "m_f",
                "empirical_mse",
                "std_error",
                "bound",
                "holds",
            ]);
            for r in &reports {
                t.push(vec![
                    r.n.to_string(),
                    r.n0.to_string(),
                    format_f64(r.m_f),
                    format_f64(r.empirical_mse),
                    format_f64(r.std_error),
                    format_f64(r.bound),
                    r.holds.to_string(),
                ]);
            }
            let summary = MseSummary {
                pairs: reports.len(),
                failures,
                reports,
            };
            Ok(Output::new(&summary)?.with_table(t).violated(failures > 0))
        }
        Command::Verify(VerifyCmd::Domination {
            instances,
            networks,
        }) => {
            let reports = (0..*instances)
                .map(|i| domination_instance(ctx.seed.wrapping_add(i), *networks, ctx.workers))
                .collect::<Result<Vec<_>>>()?;
            let failures = reports.iter().filter(|r| !r.holds).count();
            let mut t = Table::new(&["seed", "depth", "n", "empirical", "bound", "holds"]);
            for r in &reports {
                t.push(vec![
                    r.seed.to_string(),
                    r.depth.to_string(),
                    r.n.to_string(),
                    format_f64(r.empirical),
                    format_f64(r.bound),
                    r.holds.to_string(),
                ]);
            }
            let summary = DominationSummary {
                instances: reports.len(),
                failures,
                reports,
            };
            Ok(Output::new(&summary)?.with_table(t).violated(failures > 0))
        }
        Command::Config(ConfigCmd::Check) => {
            if let Some(c) = &ctx.config.coverage {
                for p in &c.networks {
                    ctx.inputs.network(&ctx.config.resolve(p))?;
                }
                if let Some(ch) = &c.chain {
                    let chain = load_chain(&ctx.config.resolve(ch))?;
                    if let Some(emb) = ctx.config.embedding()? {
                        if emb.points.len() != chain.states() {
                            return Err(Error::dim(
                                "coverage.embedding does not cover every chain state",
                            ));
                        }
                    }
                }
            }
            Output::new(&ConfigCheck {
                valid: true,
                config: ctx.config.clone(),
            })
        }
    }
}

fn digest(command: &str, ctx: &Context) -> String {
    #[derive(Serialize)]
    struct DigestInput<'a> {
        command: &'a str,
        seed: u64,
        config: &'a ExperimentConfig,
        inputs: &'a BTreeMap<String, String>,
    }
    let json = serde_json::to_string(&DigestInput {
        command,
        seed: ctx.seed,
        config: &ctx.config,
        inputs: &ctx.inputs.0,
    })
    .expect("serializable");
    sha256_hex(json.as_bytes())
}

fn run_parsed(cli: Cli) -> Result<i32> {
    let config = ExperimentConfig::load(cli.common.config.as_deref(), &cli.common.overrides)?;
    let seed = cli.common.seed.or(config.seed).unwrap_or(0);
    let workers = cli
        .common
        .workers
        .map(Workers::new)
        .unwrap_or_else(Workers::from_env);
    let mut ctx = Context {
        config,
        seed,
        workers,
        inputs: Inputs::default(),
    };
    if let Some(p) = &cli.common.config {
        ctx.inputs.read(p)?;
    }
    let output = execute(&cli.command, &mut ctx)?;
    let name = cli.command.name();
    let envelope = Envelope::new(name, digest(name, &ctx), seed, output.result);
    let json = to_json(&envelope)?;
    match &cli.common.out {
        Some(path) => {
            if let Some(t) = &output.table {
                write_atomic(&csv_sibling(path), &t.to_csv()?)?;
            }
            write_atomic(path, &json)?;
        }
        None => print!("{json}"),
    }
    if output.violated {
        eprintln!("{name}: inequality violated; see the report");
        Ok(EXIT_VIOLATION)
    } else {
        Ok(EXIT_OK)
    }
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() {
                EXIT_INVALID
            } else {
                EXIT_OK
            };
            let _ = e.print();
            return code;
        }
    };
    match run_parsed(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_INVALID
        }
    }
}
