use std::path::{Path, PathBuf};
use std::process::ExitCode;

use acp_opf::acp::AngleModel;
use acp_opf::par::Execution;
use acp_opf::pipeline::{self, ErrorRecord, Mode, OutputFormat, RunSpec};
use acp_opf::relaxation::ObjectiveKind;
use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "acp-opf", version, about = "AC OPF through a tightened SOCP relaxation and penalty convex-concave recovery")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one case.
    Run(RunArgs),
    /// Run a suite of specs and print a summary.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ObjectiveArg {
    Cost,
    Loss,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    RelaxOnly,
    Acp,
    Verify,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputArg {
    Json,
    Table,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum AngleArg {
    Taylor6Sine,
    Taylor6,
    LinearSine,
}

#[derive(Args)]
struct RunArgs {
    /// JSON run spec; flags given on the command line override its fields.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// MATPOWER case file.
    #[arg(long)]
    case: Option<PathBuf>,
    #[arg(long, value_enum)]
    objective: Option<ObjectiveArg>,
    /// Angle-difference limit in degrees.
    #[arg(long)]
    theta_max_deg: Option<f64>,
    /// Uniform thermal limit in MVA.
    #[arg(long)]
    smax_mva: Option<f64>,
    /// Pin the reference bus voltage (p.u.); 1.0 when given without a value.
    #[arg(long, num_args = 0..=1, default_missing_value = "1.0")]
    pin_ref_voltage: Option<f64>,
    /// Uniform voltage bounds in p.u.
    #[arg(long, num_args = 2, value_names = ["VMIN", "VMAX"])]
    voltage_bounds: Option<Vec<f64>>,
    /// Zero all line-charging susceptances.
    #[arg(long)]
    no_line_charging: bool,
    /// Ignore the case thermal ratings.
    #[arg(long)]
    no_branch_ratings: bool,
    #[arg(long)]
    tau0: Option<f64>,
    #[arg(long)]
    tau_max: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    delta1: Option<f64>,
    #[arg(long)]
    delta2: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long, value_enum)]
    angle_model: Option<AngleArg>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Solution to check in verify mode (a report or its `solution` object).
    #[arg(long)]
    solution: Option<PathBuf>,
    #[arg(long, value_enum)]
    output: Option<OutputArg>,
    /// Objective the sub-optimality gap is measured against.
    #[arg(long)]
    reference_objective: Option<f64>,
    /// Write the iteration trace as CSV.
    #[arg(long)]
    trace_out: Option<PathBuf>,
    #[arg(long)]
    label: Option<String>,
    /// Disable data parallelism.
    #[arg(long)]
    sequential: bool,
}

#[derive(Args)]
struct BenchArgs {
    /// JSON array of run specs; relative case paths resolve against its directory.
    #[arg(long)]
    suite: PathBuf,
    #[arg(long, value_enum, default_value = "table")]
    output: OutputArg,
    #[arg(long)]
    sequential: bool,
}

fn execution(sequential: bool) -> Execution {
    if sequential {
        Execution::Sequential
    } else {
        Execution::default()
    }
}

fn build_spec(a: &RunArgs) -> anyhow::Result<RunSpec> {
    let mut spec = match &a.spec {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text)
                .map_err(|e| acp_opf::Error::Spec(format!("{}: {e}", path.display())))?
        }
        None => RunSpec::default(),
    };
    if let Some(c) = &a.case {
        spec.case = c.clone();
    }
    if let Some(o) = a.objective {
        spec.objective = match o {
            ObjectiveArg::Cost => ObjectiveKind::Cost,
            ObjectiveArg::Loss => ObjectiveKind::Loss,
        };
    }
    if let Some(t) = a.theta_max_deg {
        spec.theta_max_deg = t;
    }
    if a.smax_mva.is_some() {
        spec.smax_mva = a.smax_mva;
    }
    if a.pin_ref_voltage.is_some() {
        spec.pin_ref_voltage = a.pin_ref_voltage;
    }
    if let Some(b) = &a.voltage_bounds {
        spec.voltage_bounds = Some((b[0], b[1]));
    }
    spec.drop_line_charging |= a.no_line_charging;
    spec.drop_branch_ratings |= a.no_branch_ratings;
    let acp = &mut spec.acp;
    if let Some(v) = a.tau0 {
        acp.tau0 = v;
        if a.tau_max.is_none() && acp.tau_max < v {
            acp.tau_max = v;
        }
    }
    if let Some(v) = a.tau_max {
        acp.tau_max = v;
    }
    if let Some(v) = a.mu {
        acp.mu = v;
    }
    if let Some(v) = a.delta1 {
        acp.delta1 = v;
    }
    if let Some(v) = a.delta2 {
        acp.delta2 = v;
    }
    if let Some(v) = a.max_iters {
        acp.max_iters = v;
    }
    if let Some(m) = a.angle_model {
        acp.angle_model = match m {
            AngleArg::Taylor6Sine => AngleModel::Taylor6Sine,
            AngleArg::Taylor6 => AngleModel::Taylor6,
            AngleArg::LinearSine => AngleModel::LinearSine,
        };
    }
    if let Some(m) = a.mode {
        spec.mode = match m {
            ModeArg::RelaxOnly => Mode::RelaxOnly,
            ModeArg::Acp => Mode::Acp,
            ModeArg::Verify => Mode::Verify,
        };
    }
    if a.solution.is_some() {
        spec.solution = a.solution.clone();
    }
    if let Some(o) = a.output {
        spec.output = output_format(o);
    }
    if a.reference_objective.is_some() {
        spec.reference_objective = a.reference_objective;
    }
    if a.label.is_some() {
        spec.label = a.label.clone();
    }
    if spec.case.as_os_str().is_empty() {
        return Err(acp_opf::Error::Spec("no case given (use --case or a spec file)".into()).into());
    }
    Ok(spec)
}

fn output_format(o: OutputArg) -> OutputFormat {
    match o {
        OutputArg::Json => OutputFormat::Json,
        OutputArg::Table => OutputFormat::Table,
        OutputArg::Csv => OutputFormat::Csv,
    }
}

fn cmd_run(a: &RunArgs) -> anyhow::Result<ExitCode> {
    let spec = build_spec(a)?;
    let report = pipeline::run_with(&spec, execution(a.sequential))?;
    let trace = report.acp.as_ref().map(|x| x.trace.as_slice()).unwrap_or_default();
    if let Some(path) = &a.trace_out {
        std::fs::write(path, pipeline::trace_csv(trace)).with_context(|| format!("writing {}", path.display()))?;
    }
    match spec.output {
        OutputFormat::Json => println!("{}", pipeline::to_canonical_json(&report)?),
        OutputFormat::Table => print!("{}", pipeline::report_table(&report)),
        OutputFormat::Csv => print!("{}", pipeline::trace_csv(trace)),
    }
    Ok(if report.success { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn resolve(base: &Path, spec: &mut RunSpec) {
    for p in [Some(&mut spec.case), spec.solution.as_mut()].into_iter().flatten() {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    }
}

fn cmd_bench(a: &BenchArgs) -> anyhow::Result<ExitCode> {
    let text = std::fs::read_to_string(&a.suite).with_context(|| format!("reading {}", a.suite.display()))?;
    let mut suite: Vec<RunSpec> = serde_json::from_str(&text)
        .map_err(|e| acp_opf::Error::Spec(format!("{}: {e}", a.suite.display())))?;
    let base = a.suite.parent().map(Path::to_path_buf).unwrap_or_default();
    suite.iter_mut().for_each(|s| resolve(&base, s));
    let outcome = pipeline::bench(&suite, execution(a.sequential));
    match a.output {
        OutputArg::Json => println!("{}", pipeline::to_canonical_json(&outcome)?),
        OutputArg::Table => print!("{}", outcome.summary_table()),
        OutputArg::Csv => bail!("csv output is only available for single runs"),
    }
    Ok(if outcome.all_succeeded() { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Bench(a) => cmd_bench(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let record = match e.downcast_ref::<acp_opf::Error>() {
                Some(inner) => ErrorRecord::from(inner),
                None => ErrorRecord {
                    kind: if e.downcast_ref::<std::io::Error>().is_some() { "io" } else { "usage" }.into(),
                    message: format!("{e:#}"),
                    exit_code: 2,
                },
            };
            eprintln!("error: {e:#}");
            println!("{}", serde_json::json!({ "error": record }));
            ExitCode::from(record.exit_code as u8)
        }
    }
}
