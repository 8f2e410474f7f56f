//! End-to-end runs driven by a [`RunSpec`], producing a [`RunReport`] in
//! physical units.
//!
//! Everything below this module works in per unit; conversion to MW, MVAr
//! and degrees happens only when a report is assembled.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::acp::{check_kkt_certificate, extract_point, run_acp_with, AcpConfig, AcpIterate, AcpStatus};
use crate::case::{apply_overrides, parse_case, NetworkCase, Overrides};
use crate::conic::{self, SolveStatus, Tolerances};
use crate::par::{self, Execution};
use crate::relaxation::{build_socpt, ObjectiveKind, RelaxationOptions};
use crate::verify::{branch_flows, evaluate_model1, suboptimality_gap, CheckLimits, FeasibilityReport, OperatingPoint};
use crate::{Error, Result};

/// Largest polar violation (p.u.) a verified point may carry.
pub const VERIFY_TOLERANCE: f64 = 1e-4;
/// Largest lifted-equality residual a certified ACP point may carry.
pub const CERTIFICATE_TOLERANCE: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Solve only the tightened relaxation.
    RelaxOnly,
    /// Relaxation, recovery loop, then verification of the recovered point.
    #[default]
    Acp,
    /// Verify a supplied solution without optimizing.
    Verify,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Json,
    Table,
    Csv,
}

/// One reproducible run. Every field has a default, so a JSON spec only
/// needs the fields it changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSpec {
    pub case: PathBuf,
    /// Display name in summaries; the case file stem when absent.
    pub label: Option<String>,
    pub objective: ObjectiveKind,
    /// Global angle-difference limit (degrees).
    pub theta_max_deg: f64,
    /// Uniform thermal limit (MVA) replacing the case ratings.
    pub smax_mva: Option<f64>,
    /// Fixes the reference bus voltage magnitude (p.u.).
    pub pin_ref_voltage: Option<f64>,
    /// Uniform `[vmin, vmax]` (p.u.) for every bus.
    pub voltage_bounds: Option<(f64, f64)>,
    pub drop_line_charging: bool,
    pub drop_branch_ratings: bool,
    pub acp: AcpConfig,
    pub mode: Mode,
    /// Solution file checked in verify mode: a report or its `solution` part.
    pub solution: Option<PathBuf>,
    /// Objective the gap is measured against.
    pub reference_objective: Option<f64>,
    pub output: OutputFormat,
}

impl Default for RunSpec {
    fn default() -> Self {
        RunSpec {
            case: PathBuf::new(),
            label: None,
            objective: ObjectiveKind::Cost,
            theta_max_deg: 10.0,
            smax_mva: None,
            pin_ref_voltage: None,
            voltage_bounds: None,
            drop_line_charging: false,
            drop_branch_ratings: false,
            acp: AcpConfig::default(),
            mode: Mode::Acp,
            solution: None,
            reference_objective: None,
            output: OutputFormat::Json,
        }
    }
}

impl RunSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Spec(m));
        if !(self.theta_max_deg > 0.0 && self.theta_max_deg < 90.0) {
            return bad(format!("theta_max_deg must lie in (0, 90), got {}", self.theta_max_deg));
        }
        if let Some(s) = self.smax_mva {
            if !(s > 0.0 && s.is_finite()) {
                return bad(format!("smax_mva must be positive, got {s}"));
            }
        }
        if let Some(v) = self.pin_ref_voltage {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("pin_ref_voltage must be positive, got {v}"));
            }
        }
        if let Some((lo, hi)) = self.voltage_bounds {
            if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
                return bad(format!("voltage bounds must satisfy 0 < lo <= hi, got ({lo}, {hi})"));
            }
        }
        if let Some(r) = self.reference_objective {
            if !r.is_finite() || r == 0.0 {
                return bad(format!("reference_objective must be finite and nonzero, got {r}"));
            }
        }
        if self.mode == Mode::Verify && self.solution.is_none() {
            return bad("verify mode needs a solution file".into());
        }
        self.acp.validate().map_err(|e| Error::Spec(e.to_string()))
    }

    pub fn display_label(&self) -> String {
        self.label.clone().unwrap_or_else(|| {
            self.case
                .file_stem()
                .map_or_else(|| self.case.display().to_string(), |s| s.to_string_lossy().into_owned())
        })
    }

    pub fn theta_u(&self) -> f64 {
        self.theta_max_deg.to_radians()
    }

    /// Reads and adjusts the case named by the spec.
    pub fn load_case(&self) -> Result<NetworkCase> {
        let text = read_file(&self.case)?;
        let (case, _) = parse_case(&text)?;
        self.prepare(&case)
    }

    /// Applies the spec's scenario overrides to an already parsed case.
    pub fn prepare(&self, case: &NetworkCase) -> Result<NetworkCase> {
        let ov = Overrides {
            smax: self.smax_mva.map(|s| s / case.base_mva),
            theta_u: None,
            fixed_ref_voltage: self.pin_ref_voltage,
            voltage_bounds: self.voltage_bounds,
            drop_line_charging: self.drop_line_charging,
            drop_branch_ratings: self.drop_branch_ratings,
        };
        Ok(apply_overrides(case, &ov)?)
    }

    fn relaxation_options(&self, case: &NetworkCase) -> RelaxationOptions {
        RelaxationOptions {
            objective: self.objective,
            theta_u: self.theta_u(),
            smax: self.smax_mva.map(|s| s / case.base_mva),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RunStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalTrouble,
    IterationLimit,
    FeasibleKkt,
    ConvergedInfeasible,
    SolverFailure,
    Verified,
    NotVerified,
}

impl From<SolveStatus> for RunStatus {
    fn from(s: SolveStatus) -> Self {
        match s {
            SolveStatus::Optimal => RunStatus::Optimal,
            SolveStatus::Infeasible => RunStatus::Infeasible,
            SolveStatus::Unbounded => RunStatus::Unbounded,
            SolveStatus::NumericalTrouble => RunStatus::NumericalTrouble,
            SolveStatus::IterationLimit => RunStatus::IterationLimit,
        }
    }
}

impl From<AcpStatus> for RunStatus {
    fn from(s: AcpStatus) -> Self {
        match s {
            AcpStatus::FeasibleKkt => RunStatus::FeasibleKkt,
            AcpStatus::ConvergedInfeasible => RunStatus::ConvergedInfeasible,
            AcpStatus::IterationLimit => RunStatus::IterationLimit,
            AcpStatus::SolverFailure => RunStatus::SolverFailure,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelaxationReport {
    pub status: SolveStatus,
    pub objective: f64,
    pub solve_time_s: f64,
}

/// One line of the convergence trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub k: usize,
    pub tau: f64,
    pub v_penalized: f64,
    pub v_true: f64,
    pub slack_sum: f64,
    pub solve_time_s: f64,
}

impl From<&AcpIterate> for TraceRow {
    fn from(it: &AcpIterate) -> Self {
        TraceRow {
            k: it.k,
            tau: it.tau,
            v_penalized: it.objective_penalized,
            v_true: it.objective_true,
            slack_sum: it.slack_sum,
            solve_time_s: it.solve_time,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcpReport {
    pub status: AcpStatus,
    pub iterations: usize,
    /// Conic solves including the seeding relaxation.
    pub total_solves: usize,
    pub objective: Option<f64>,
    pub final_slack_sum: f64,
    /// Slacks and lifted residuals both within [`CERTIFICATE_TOLERANCE`].
    pub certified: bool,
    pub trace: Vec<TraceRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BusResult {
    pub id: u32,
    pub vm_pu: f64,
    pub va_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorResult {
    pub bus: u32,
    pub pg_mw: f64,
    pub qg_mvar: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchResult {
    pub from: u32,
    pub to: u32,
    pub p_from_mw: f64,
    pub q_from_mvar: f64,
    pub p_to_mw: f64,
    pub q_to_mvar: f64,
}

/// An operating point in physical units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionReport {
    pub buses: Vec<BusResult>,
    pub generators: Vec<GeneratorResult>,
    pub branches: Vec<BranchResult>,
}

impl SolutionReport {
    pub fn from_point(case: &NetworkCase, point: &OperatingPoint) -> Self {
        let base = case.base_mva;
        let buses = case
            .buses
            .iter()
            .enumerate()
            .map(|(i, b)| BusResult {
                id: b.id,
                vm_pu: point.vm[i],
                va_deg: point.va[i].to_degrees(),
            })
            .collect();
        let generators = case
            .generators
            .iter()
            .enumerate()
            .map(|(g, gen)| GeneratorResult {
                bus: case.buses[gen.bus].id,
                pg_mw: point.pg[g] * base,
                qg_mvar: point.qg[g] * base,
            })
            .collect();
        let branches = case
            .branches
            .iter()
            .zip(branch_flows(case, &point.vm, &point.va))
            .map(|(br, f)| BranchResult {
                from: case.buses[br.from].id,
                to: case.buses[br.to].id,
                p_from_mw: f[0] * base,
                q_from_mvar: f[1] * base,
                p_to_mw: f[2] * base,
                q_to_mvar: f[3] * base,
            })
            .collect();
        SolutionReport {
            buses,
            generators,
            branches,
        }
    }

    /// Per-unit point for `case`, matching buses by id and generators by order.
    pub fn to_point(&self, case: &NetworkCase) -> Result<OperatingPoint> {
        let nb = case.buses.len();
        if self.buses.len() != nb || self.generators.len() != case.generators.len() {
            return Err(Error::Spec(format!(
                "solution has {} buses and {} generators, case has {} and {}",
                self.buses.len(),
                self.generators.len(),
                nb,
                case.generators.len()
            )));
        }
        let mut point = OperatingPoint {
            vm: vec![f64::NAN; nb],
            va: vec![f64::NAN; nb],
            pg: self.generators.iter().map(|g| g.pg_mw / case.base_mva).collect(),
            qg: self.generators.iter().map(|g| g.qg_mvar / case.base_mva).collect(),
        };
        for b in &self.buses {
            let i = case
                .bus_index(b.id)
                .ok_or_else(|| Error::Spec(format!("solution names unknown bus {}", b.id)))?;
            point.vm[i] = b.vm_pu;
            point.va[i] = b.va_deg.to_radians();
        }
        if point.vm.iter().any(|v| v.is_nan()) {
            return Err(Error::Spec("solution repeats a bus and omits another".into()));
        }
        Ok(point)
    }

    /// Reads a solution from a report file or a bare solution object.
    pub fn read(path: &Path) -> Result<Self> {
        let text = read_file(path)?;
        let value: Value =
            serde_json::from_str(&text).map_err(|e| Error::Spec(format!("{}: {e}", path.display())))?;
        let body = match value.get("solution") {
            Some(s) => s.clone(),
            None => value,
        };
        serde_json::from_value(body).map_err(|e| Error::Spec(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Timings {
    pub parse_s: f64,
    pub relaxation_s: f64,
    pub acp_s: f64,
    pub verify_s: f64,
    pub total_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub spec: RunSpec,
    pub label: String,
    pub status: RunStatus,
    /// Whether the run met its mode's success condition.
    pub success: bool,
    pub relaxation: Option<RelaxationReport>,
    pub acp: Option<AcpReport>,
    pub solution: Option<SolutionReport>,
    pub feasibility: Option<FeasibilityReport>,
    pub timings: Timings,
}

impl RunReport {
    /// Objective of the final point: ACP, verified point, or relaxation.
    pub fn objective(&self) -> Option<f64> {
        match self.spec.mode {
            Mode::RelaxOnly => self.relaxation.as_ref().map(|r| r.objective),
            Mode::Acp => self.acp.as_ref().and_then(|a| a.objective),
            Mode::Verify => self.feasibility.as_ref().map(|f| f.objective),
        }
    }

    pub fn gap_percent(&self) -> Option<f64> {
        self.feasibility.as_ref().and_then(|f| f.gap_percent).or_else(|| {
            let r = self.spec.reference_objective?;
            suboptimality_gap(self.objective()?, r).ok()
        })
    }

    pub fn iterations(&self) -> usize {
        self.acp.as_ref().map_or(0, |a| a.trace.len())
    }
}

fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|error| Error::Io {
        path: path.to_path_buf(),
        error,
    })
}

/// Loads the case named by `spec` and runs it.
pub fn run(spec: &RunSpec) -> Result<RunReport> {
    run_with(spec, Execution::default())
}

pub fn run_with(spec: &RunSpec, exec: Execution) -> Result<RunReport> {
    spec.validate()?;
    let start = Instant::now();
    let case = spec.load_case()?;
    let parse_s = start.elapsed().as_secs_f64();
    let mut report = run_prepared(spec, &case, exec)?;
    report.timings.parse_s = parse_s;
    report.timings.total_s = start.elapsed().as_secs_f64();
    Ok(report)
}

/// Runs `spec` on a case that already carries the spec's overrides. The
/// `case` path of the spec is not read.
pub fn run_prepared(spec: &RunSpec, case: &NetworkCase, exec: Execution) -> Result<RunReport> {
    spec.validate()?;
    let start = Instant::now();
    let options = spec.relaxation_options(case);
    let limits = CheckLimits {
        theta_u: options.theta_u,
        smax: options.smax,
        objective: spec.objective,
    };
    let mut timings = Timings::default();
    let mut report = RunReport {
        spec: spec.clone(),
        label: spec.display_label(),
        status: RunStatus::Optimal,
        success: false,
        relaxation: None,
        acp: None,
        solution: None,
        feasibility: None,
        timings: Timings::default(),
    };
    let with_gap = |mut f: FeasibilityReport| -> Result<FeasibilityReport> {
        if let Some(r) = spec.reference_objective {
            f.gap_percent = Some(suboptimality_gap(f.objective, r)?);
        }
        Ok(f)
    };

    match spec.mode {
        Mode::RelaxOnly => {
            let art = build_socpt(case, &options)?;
            let res = conic::solve(&art.program, &Tolerances::default())?;
            timings.relaxation_s = res.solve_time;
            report.status = res.status.into();
            report.success = res.status == SolveStatus::Optimal;
            if report.success {
                let point = extract_point(&art.varmap, &res.x);
                report.solution = Some(SolutionReport::from_point(case, &point));
            }
            report.relaxation = Some(RelaxationReport {
                status: res.status,
                objective: res.objective,
                solve_time_s: res.solve_time,
            });
        }
        Mode::Acp => {
            let t = Instant::now();
            let result = run_acp_with(case, &spec.acp, &options, None, exec)?;
            let wall = t.elapsed().as_secs_f64();
            if let Some(r) = &result.relaxation {
                timings.relaxation_s = r.solve_time;
                report.relaxation = Some(RelaxationReport {
                    status: r.status,
                    objective: r.objective,
                    solve_time_s: r.solve_time,
                });
            }
            timings.acp_s = wall - timings.relaxation_s;
            let certified = result.status == AcpStatus::FeasibleKkt
                && check_kkt_certificate(case, &result, CERTIFICATE_TOLERANCE);
            report.status = result.status.into();
            report.success = result.status == AcpStatus::FeasibleKkt;
            report.acp = Some(AcpReport {
                status: result.status,
                iterations: result.trace.len(),
                total_solves: result.total_solves(),
                objective: result.objective(),
                final_slack_sum: result.final_slack_sum(),
                certified,
                trace: result.trace.iter().map(TraceRow::from).collect(),
            });
            if !result.trace.is_empty() {
                let t = Instant::now();
                let point = &result.solution.point;
                let f = evaluate_model1(case, point, &limits, Some((&result.varmap, &result.solution.x)))?;
                report.feasibility = Some(with_gap(f)?);
                report.solution = Some(SolutionReport::from_point(case, point));
                timings.verify_s = t.elapsed().as_secs_f64();
            }
        }
        Mode::Verify => {
            let t = Instant::now();
            let path = spec.solution.as_ref().expect("validated");
            let point = SolutionReport::read(path)?.to_point(case)?;
            let f = with_gap(evaluate_model1(case, &point, &limits, None)?)?;
            let ok = f.pf_converged
                && f.violations.max_polar() <= VERIFY_TOLERANCE
                && f.violations.lifted.max() <= CERTIFICATE_TOLERANCE;
            report.status = if ok { RunStatus::Verified } else { RunStatus::NotVerified };
            report.success = ok;
            report.feasibility = Some(f);
            report.solution = Some(SolutionReport::from_point(case, &point));
            timings.verify_s = t.elapsed().as_secs_f64();
        }
    }
    timings.total_s = start.elapsed().as_secs_f64();
    report.timings = timings;
    Ok(report)
}

/// Machine-readable description of a failed run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub kind: String,
    pub message: String,
    pub exit_code: i32,
}

impl From<&Error> for ErrorRecord {
    fn from(e: &Error) -> Self {
        let (kind, exit_code) = match e {
            Error::Io { .. } => ("io", 2),
            Error::Case(_) => ("case", 2),
            Error::Spec(_) => ("spec", 2),
            Error::Conic(_) => ("solver", 3),
            Error::Acp(_) => ("acp", 3),
            Error::Verify(_) => ("verify", 4),
        };
        ErrorRecord {
            kind: kind.into(),
            message: e.to_string(),
            exit_code,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchEntry {
    pub label: String,
    pub report: Option<RunReport>,
    pub error: Option<ErrorRecord>,
}

/// One summary row per suite entry, in the layout of a results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub label: String,
    pub objective_kind: ObjectiveKind,
    pub status: Option<RunStatus>,
    pub reference_objective: Option<f64>,
    pub relaxation_objective: Option<f64>,
    pub objective: Option<f64>,
    pub gap_percent: Option<f64>,
    pub iterations: usize,
    pub relaxation_s: f64,
    pub acp_s: f64,
    pub total_s: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BenchOutcome {
    pub entries: Vec<BenchEntry>,
    pub summary: Vec<SummaryRow>,
}

impl BenchOutcome {
    pub fn all_succeeded(&self) -> bool {
        self.entries.iter().all(|e| e.report.as_ref().is_some_and(|r| r.success))
    }

    pub fn summary_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<16} {:<5} {:>14} {:>14} {:>14} {:>9} {:>5} {:>9} {:>9}  status",
            "case", "obj", "reference", "relaxation", "acp", "gap %", "iter", "relax s", "total s"
        );
        let num = |v: Option<f64>, p: usize| v.map_or_else(|| "-".to_string(), |v| format!("{v:.p$}"));
        for r in &self.summary {
            let status = match (&r.status, &r.error) {
                (_, Some(e)) => format!("error: {e}"),
                (Some(s), None) => format!("{s:?}"),
                (None, None) => "-".into(),
            };
            let kind = match r.objective_kind {
                ObjectiveKind::Cost => "cost",
                ObjectiveKind::Loss => "loss",
            };
            let _ = writeln!(
                out,
                "{:<16} {:<5} {:>14} {:>14} {:>14} {:>9} {:>5} {:>9.3} {:>9.3}  {}",
                r.label,
                kind,
                num(r.reference_objective, 4),
                num(r.relaxation_objective, 4),
                num(r.objective, 4),
                num(r.gap_percent, 3),
                r.iterations,
                r.relaxation_s,
                r.total_s,
                status
            );
        }
        out
    }
}

/// Runs every spec, concurrently under [`Execution::Parallel`], and
/// collects the results in suite order. A failing spec becomes an error
/// record; the others still run.
pub fn bench(suite: &[RunSpec], exec: Execution) -> BenchOutcome {
    let entries: Vec<BenchEntry> = par::map(exec, suite, |spec| match run_with(spec, exec) {
        Ok(report) => BenchEntry {
            label: report.label.clone(),
            report: Some(report),
            error: None,
        },
        Err(e) => BenchEntry {
            label: spec.display_label(),
            report: None,
            error: Some(ErrorRecord::from(&e)),
        },
    });
    let summary = suite
        .iter()
        .zip(&entries)
        .map(|(spec, e)| match &e.report {
            Some(r) => SummaryRow {
                label: e.label.clone(),
                objective_kind: spec.objective,
                status: Some(r.status),
                reference_objective: spec.reference_objective,
                relaxation_objective: r.relaxation.as_ref().map(|x| x.objective),
                objective: r.objective(),
                gap_percent: r.gap_percent(),
                iterations: r.iterations(),
                relaxation_s: r.timings.relaxation_s,
                acp_s: r.timings.acp_s,
                total_s: r.timings.total_s,
                error: None,
            },
            None => SummaryRow {
                label: e.label.clone(),
                objective_kind: spec.objective,
                status: None,
                reference_objective: spec.reference_objective,
                relaxation_objective: None,
                objective: None,
                gap_percent: None,
                iterations: 0,
                relaxation_s: 0.0,
                acp_s: 0.0,
                total_s: 0.0,
                error: e.error.as_ref().map(|x| x.message.clone()),
            },
        })
        .collect();
    BenchOutcome { entries, summary }
}

/// Rounds to 9 significant digits.
pub fn round_significant(v: f64) -> f64 {
    if !v.is_finite() || v == 0.0 {
        return v;
    }
    format!("{v:.8e}").parse().unwrap_or(v)
}

fn canonicalize(v: Value) -> Value {
    match v {
        Value::Number(n) if !(n.is_i64() || n.is_u64()) => n
            .as_f64()
            .and_then(|f| serde_json::Number::from_f64(round_significant(f)))
            .map_or(Value::Null, Value::Number),
        Value::Array(a) => Value::Array(a.into_iter().map(canonicalize).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, canonicalize(v))).collect()),
        other => other,
    }
}

/// Pretty JSON with sorted keys and floats at 9 significant digits.
/// Parsing the output and emitting it again reproduces it byte for byte.
pub fn to_canonical_json<T: Serialize>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value).map_err(|e| Error::Spec(e.to_string()))?;
    serde_json::to_string_pretty(&canonicalize(v)).map_err(|e| Error::Spec(e.to_string()))
}

pub const TRACE_CSV_HEADER: &str = "k,tau,v_penalized,v_true,slack_sum,solve_time_s";

pub fn trace_csv(rows: &[TraceRow]) -> String {
    let mut out = String::from(TRACE_CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{:e},{:.9e},{:.9e},{:.9e},{:.6}",
            r.k, r.tau, r.v_penalized, r.v_true, r.slack_sum, r.solve_time_s
        );
    }
    out
}

/// Short human-readable rendering of one report.
pub fn report_table(r: &RunReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "case        {}", r.label);
    let _ = writeln!(out, "status      {:?}", r.status);
    if let Some(x) = &r.relaxation {
        let _ = writeln!(out, "relaxation  {:.6} ({:?}, {:.3} s)", x.objective, x.status, x.solve_time_s);
    }
    if let Some(a) = &r.acp {
        if let Some(v) = a.objective {
            let _ = writeln!(out, "acp         {v:.6}");
        }
        let _ = writeln!(
            out,
            "iterations  {} ({} solves), slack sum {:.3e}, certified {}",
            a.iterations, a.total_solves, a.final_slack_sum, a.certified
        );
    }
    if let Some(f) = &r.feasibility {
        let _ = writeln!(
            out,
            "power flow  converged {} in {:?} iterations, max mismatch {:.3e}",
            f.pf_converged, f.pf_iterations, f.max_power_mismatch
        );
        let _ = writeln!(
            out,
            "violations  polar {:.3e}, lifted {:.3e}",
            f.violations.max_polar(),
            f.violations.lifted.max()
        );
    }
    if let Some(g) = r.gap_percent() {
        let _ = writeln!(out, "gap         {g:.4} %");
    }
    if let Some(s) = &r.solution {
        let _ = writeln!(out, "\n{:>6} {:>9} {:>10}", "bus", "V (pu)", "angle (deg)");
        for b in &s.buses {
            let _ = writeln!(out, "{:>6} {:>9.4} {:>10.3}", b.id, b.vm_pu, b.va_deg);
        }
        let _ = writeln!(out, "\n{:>6} {:>10} {:>10}", "gen", "P (MW)", "Q (MVAr)");
        for g in &s.generators {
            let _ = writeln!(out, "{:>6} {:>10.3} {:>10.3}", g.bus, g.pg_mw, g.qg_mvar);
        }
    }
    let _ = writeln!(out, "\ntotal time  {:.3} s", r.timings.total_s);
    out
}
