//! Penalty convex-concave recovery of an AC-feasible point.
//!
//! Every nonconvex equality of the lifted model is rewritten as `f = g` with
//! `f` and `g` convex. Each iteration replaces the concave side of both
//! inequalities `f ≤ g` and `g ≤ f` by its first-order Taylor minorant
//! around the previous iterate, relaxes the result with nonnegative slacks,
//! and penalizes the slacks in the objective:
//!
//! ```text
//! f_m(x) − ĝ_m(x; x_k) ≤ ε_m       m = 1..6
//! g_3(x) − f̂_3(x; x_k) ≤ ε_7
//! g_m(x) − f_m(x) ≤ 0               m ∈ {1, 2, 4, 5, 6}   (already convex)
//! ```
//!
//! [`AngleModel::Taylor6Sine`] adds a seventh pair, the degree-7 sine
//! polynomial `s = θ − θα/6 + θβ/120 − θγ/5040`, slacked on both sides
//! (`ε_8`, `ε_9`).
//!
//! with `ĝ(x; x0) = g(x0) + ∇g(x0)ᵀ(x − x0)`.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::case::NetworkCase;
use crate::conic::{self, ConicProgram, FinalizedProgram, LinExpr, QuadraticForm, SolveStatus, Tolerances};
use crate::par::{self, Execution};
use crate::relaxation::{
    build_lifted_flows, build_objective, build_socpt, build_thermal_limits, lift_point, Layout,
    OpfVariableMap, RelaxationOptions, Registry,
};
use crate::verify::OperatingPoint;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AcpError {
    #[error("linearization point has {found} entries, expected at least {expected}")]
    MissingLinearizationPoint { expected: usize, found: usize },
    #[error("linearization point has a non-finite entry at column {0}")]
    NonFinitePoint(usize),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("relaxation solve ended with status {0:?}")]
    RelaxationFailed(SolveStatus),
}

/// `Σ_k (a_k·x + c_k)² + (l·x + l_0)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConvexQuadratic {
    pub squares: Vec<LinExpr>,
    pub linear: LinExpr,
}

impl ConvexQuadratic {
    pub fn linear(expr: LinExpr) -> Self {
        ConvexQuadratic {
            squares: Vec::new(),
            linear: expr,
        }
    }

    pub fn squares(squares: Vec<LinExpr>) -> Self {
        ConvexQuadratic {
            squares,
            linear: LinExpr::default(),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.squares.iter().map(|e| e.eval(x).powi(2)).sum::<f64>() + self.linear.eval(x)
    }

    /// Sparse gradient at `x`, with repeated columns merged.
    pub fn gradient(&self, x: &[f64]) -> Vec<(usize, f64)> {
        let mut g = self.linear.clone();
        g.constant = 0.0;
        for sq in &self.squares {
            g = g.plus(sq, 2.0 * sq.eval(x));
            g.constant = 0.0;
        }
        g.compact().terms
    }

    /// First-order Taylor expansion around `x0`.
    pub fn linearize(&self, x0: &[f64]) -> LinExpr {
        let grad = self.gradient(x0);
        let dot: f64 = grad.iter().map(|&(i, c)| c * x0[i]).sum();
        LinExpr::from_terms(&grad, self.eval(x0) - dot)
    }
}

/// One difference-of-convex pair `f_m = g_m` on a branch.
#[derive(Debug, Clone, PartialEq)]
pub struct DcPair {
    pub branch: usize,
    pub index: u8,
    pub f: ConvexQuadratic,
    pub g: ConvexQuadratic,
}

/// The convex pairs of one branch: three bilinear pairs, three angle-power
/// pairs when the map has powers, and the sine tie when it has slacks for it.
pub fn dc_pairs_for_branch(case: &NetworkCase, vm: &OpfVariableMap, e: usize) -> Vec<DcPair> {
    let br = &case.branches[e];
    let v = &vm.branches[e];
    let (ui, uj) = (vm.buses[br.from].u, vm.buses[br.to].u);
    let sum = |a: usize, ca: f64, b: usize, cb: f64| LinExpr::from_terms(&[(a, ca), (b, cb)], 0.0);
    let pair = |index, f, g| DcPair { branch: e, index, f, g };
    let mut out = vec![
        pair(
            1,
            ConvexQuadratic::squares(vec![sum(ui, 1.0, uj, 1.0)]),
            ConvexQuadratic::squares(vec![LinExpr::term(v.k, 2.0), LinExpr::term(v.l, 2.0), sum(ui, 1.0, uj, -1.0)]),
        ),
        pair(
            2,
            ConvexQuadratic::linear(LinExpr::constant(1.0)),
            ConvexQuadratic::squares(vec![LinExpr::var(v.s), LinExpr::var(v.c)]),
        ),
        pair(
            3,
            ConvexQuadratic::squares(vec![sum(v.s, 1.0, v.k, 1.0), sum(v.c, 1.0, v.l, -1.0)]),
            ConvexQuadratic::squares(vec![sum(v.s, 1.0, v.k, -1.0), sum(v.c, 1.0, v.l, 1.0)]),
        ),
    ];
    if let Some([a, b, c]) = v.powers {
        out.push(pair(
            4,
            ConvexQuadratic::linear(LinExpr::var(a)),
            ConvexQuadratic::squares(vec![LinExpr::var(v.theta)]),
        ));
        out.push(pair(
            5,
            ConvexQuadratic::linear(LinExpr::var(b)),
            ConvexQuadratic::squares(vec![LinExpr::var(a)]),
        ));
        out.push(pair(
            6,
            ConvexQuadratic::squares(vec![sum(a, 1.0, c, 1.0)]),
            ConvexQuadratic::squares(vec![sum(a, 1.0, c, -1.0), LinExpr::term(b, 2.0)]),
        ));
        if v.slacks[7].is_some() {
            let th = v.theta;
            let sq = |w: usize, sign: f64, weight: f64| {
                let r = weight.sqrt();
                LinExpr::from_terms(&[(th, r), (w, sign * r)], 0.0)
            };
            let (w1, w2, w3) = (1.0 / 24.0, 1.0 / 480.0, 1.0 / 20160.0);
            out.push(pair(
                7,
                ConvexQuadratic {
                    squares: vec![sq(a, 1.0, w1), sq(b, -1.0, w2), sq(c, 1.0, w3)],
                    linear: sum(v.s, 1.0, th, -1.0),
                },
                ConvexQuadratic::squares(vec![sq(a, -1.0, w1), sq(b, 1.0, w2), sq(c, -1.0, w3)]),
            ));
        }
    }
    out
}

/// Slack column index of the reversed row `g − f̂ ≤ ε` for two-sided pairs.
fn reverse_slack(index: u8) -> Option<usize> {
    match index {
        3 => Some(6),
        7 => Some(8),
        _ => None,
    }
}

/// `1 − θ²/2 + θ⁴/24 − θ⁶/720`.
pub fn taylor_cos(theta: f64) -> f64 {
    let t2 = theta * theta;
    1.0 - t2 / 2.0 + t2 * t2 / 24.0 - t2 * t2 * t2 / 720.0
}

/// `θ − θ³/6 + θ⁵/120 − θ⁷/5040`.
pub fn taylor_sin(theta: f64) -> f64 {
    let t2 = theta * theta;
    theta * (1.0 - t2 / 6.0 + t2 * t2 / 120.0 - t2 * t2 * t2 / 5040.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AngleModel {
    /// Cosine through its degree-6 Taylor polynomial in `θ²`, `θ⁴`, `θ⁶`.
    Taylor6,
    /// [`AngleModel::Taylor6`] plus the degree-7 sine polynomial over the
    /// same powers, which fixes the sign of `s` at small angles.
    #[default]
    Taylor6Sine,
    /// `s = θ`, with the cosine fixed by the unit-circle pair alone.
    LinearSine,
}

/// Which tests end the loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StoppingRule {
    /// Whichever of the slack-sum and objective-change tests fires first.
    #[default]
    Either,
    /// Only the relative objective change at the final penalty weight.
    ObjectiveChange,
    /// Only the slack sum.
    SlackSum,
}

/// How the relaxation optimum becomes the first linearization point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Seed {
    /// Voltages from `√U`, bus angles fitted to `atan2(L, K)` on every
    /// branch, and all lifted symbols recomputed from that polar point.
    #[default]
    Products,
    /// The relaxation's symbol values as they are, with angle powers taken
    /// from its branch angles.
    Symbols,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AcpConfig {
    pub tau0: f64,
    pub tau_max: f64,
    pub mu: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub max_iters: usize,
    pub angle_model: AngleModel,
    pub stopping: StoppingRule,
    pub seed: Seed,
}

impl Default for AcpConfig {
    fn default() -> Self {
        AcpConfig {
            tau0: 1e5,
            tau_max: 1e5,
            mu: 2.0,
            delta1: 1e-6,
            delta2: 1e-5,
            max_iters: 50,
            angle_model: AngleModel::Taylor6Sine,
            stopping: StoppingRule::Either,
            seed: Seed::Products,
        }
    }
}

impl AcpConfig {
    pub fn validate(&self) -> Result<(), AcpError> {
        let bad = |m: &str| Err(AcpError::InvalidConfig(m.to_string()));
        if !(self.tau0 > 0.0 && self.tau0 <= self.tau_max && self.tau_max.is_finite()) {
            return bad("need 0 < tau0 <= tau_max < inf");
        }
        if !(self.mu > 1.0) {
            return bad("need mu > 1");
        }
        if !(self.delta1 > 0.0 && self.delta2 > 0.0) {
            return bad("need delta1, delta2 > 0");
        }
        if self.max_iters == 0 {
            return bad("need max_iters >= 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcpIterate {
    pub k: usize,
    /// Symbol values of the solution of this iteration's subproblem.
    #[serde(skip)]
    pub x: Vec<f64>,
    pub tau: f64,
    pub objective_true: f64,
    pub objective_penalized: f64,
    pub slack_sum: f64,
    pub solve_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AcpStatus {
    FeasibleKkt,
    ConvergedInfeasible,
    IterationLimit,
    SolverFailure,
}

/// The relaxation solve that seeds the loop.
#[derive(Debug, Clone, PartialEq)]
pub struct RelaxationSummary {
    pub status: SolveStatus,
    pub objective: f64,
    pub solve_time: f64,
    pub x: Vec<f64>,
    pub varmap: OpfVariableMap,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AcpSolution {
    pub x: Vec<f64>,
    pub point: OperatingPoint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AcpResult {
    pub status: AcpStatus,
    pub relaxation: Option<RelaxationSummary>,
    pub trace: Vec<AcpIterate>,
    pub solution: AcpSolution,
    pub varmap: OpfVariableMap,
    pub config: AcpConfig,
}

impl AcpResult {
    pub fn final_slack_sum(&self) -> f64 {
        self.trace.last().map_or(f64::INFINITY, |it| it.slack_sum)
    }

    pub fn objective(&self) -> Option<f64> {
        self.trace.last().map(|it| it.objective_true)
    }

    /// Conic solves performed, counting the seeding relaxation.
    pub fn total_solves(&self) -> usize {
        self.trace.len() + usize::from(self.relaxation.is_some())
    }
}

/// The iteration-independent part of the slacked subproblem.
#[derive(Debug, Clone)]
pub struct DcModel {
    pub base: ConicProgram,
    pub varmap: OpfVariableMap,
    pub pairs: Vec<DcPair>,
    pub registry: Registry,
}

impl DcModel {
    pub fn new(case: &NetworkCase, options: &RelaxationOptions, angle: AngleModel) -> crate::Result<Self> {
        let bounds = crate::case::derive_bounds(case, options.theta_u)?;
        let layout = match angle {
            AngleModel::Taylor6 => Layout::DifferenceOfConvex { sine_tie: false },
            AngleModel::Taylor6Sine => Layout::DifferenceOfConvex { sine_tie: true },
            AngleModel::LinearSine => Layout::SmallAngle,
        };
        let mut program = ConicProgram::new();
        let varmap = OpfVariableMap::allocate(case, &bounds, layout, &mut program);
        let mut registry = Registry::new();
        build_objective(case, &varmap, options.objective, &mut program)?;
        build_lifted_flows(case, &varmap, &mut program, &mut registry)?;
        build_thermal_limits(case, &varmap, options.smax, &mut program, &mut registry)?;
        crate::relaxation::build_soc_cone(case, &varmap, &mut program, &mut registry)?;
        for v in &varmap.branches {
            program.add_affine_soc(&LinExpr::constant(1.0), &[LinExpr::var(v.s), LinExpr::var(v.c)])?;
            match v.powers {
                Some([a, b, c]) => {
                    program.add_equality(&[(v.c, 1.0), (a, 0.5), (b, -1.0 / 24.0), (c, 1.0 / 720.0)], 1.0)?;
                    program.add_quadratic_leq(QuadraticForm::SumOfSquares(vec![LinExpr::var(v.theta)]), &[(a, -1.0)], 0.0)?;
                    program.add_quadratic_leq(QuadraticForm::SumOfSquares(vec![LinExpr::var(a)]), &[(b, -1.0)], 0.0)?;
                    program.add_affine_soc(
                        &LinExpr::from_terms(&[(a, 1.0), (c, 1.0)], 0.0),
                        &[LinExpr::from_terms(&[(a, 1.0), (c, -1.0)], 0.0), LinExpr::term(b, 2.0)],
                    )?;
                }
                None => {
                    program.add_equality(&[(v.s, 1.0), (v.theta, -1.0)], 0.0)?;
                }
            }
        }
        let pairs = (0..case.branches.len())
            .flat_map(|e| dc_pairs_for_branch(case, &varmap, e))
            .collect();
        Ok(DcModel {
            base: program,
            varmap,
            pairs,
            registry,
        })
    }

    pub fn num_slacks(&self) -> usize {
        self.varmap.slack_indices().count()
    }

    /// The slacked convex subproblem linearized at `x_k`.
    pub fn subproblem(&self, x_k: &[f64], tau: f64, exec: Execution) -> Result<FinalizedProgram, crate::Error> {
        let n = self.varmap.num_symbols;
        if x_k.len() < n {
            return Err(AcpError::MissingLinearizationPoint {
                expected: n,
                found: x_k.len(),
            }
            .into());
        }
        if let Some(i) = x_k[..n].iter().position(|v| !v.is_finite()) {
            return Err(AcpError::NonFinitePoint(i).into());
        }
        let rows = par::map(exec, &self.pairs, |p| {
            let slacks = &self.varmap.branches[p.branch].slacks;
            let mut rows = vec![(p.f.clone(), p.g.linearize(x_k), slacks[p.index as usize - 1])];
            if let Some(r) = reverse_slack(p.index) {
                rows.push((p.g.clone(), p.f.linearize(x_k), slacks[r]));
            }
            rows
        });
        let mut program = self.base.clone();
        for (convex, minorant, slack) in rows.into_iter().flatten() {
            let slack = slack.expect("layout allocates a slack for every pair");
            let lin = convex.linear.clone().plus(&minorant, -1.0).add_term(slack, -1.0).compact();
            if convex.squares.is_empty() {
                program.add_affine_leq(&lin)?;
            } else {
                program.add_quadratic_leq(QuadraticForm::SumOfSquares(convex.squares), &lin.terms, -lin.constant)?;
            }
        }
        let penalty: Vec<(usize, f64)> = self.varmap.slack_indices().map(|i| (i, tau)).collect();
        program.add_objective(&LinExpr::from_terms(&penalty, 0.0))?;
        Ok(program.finalize())
    }
}

/// Copies shared symbols between two variable maps of the same case and
/// seeds angle powers from the branch angles. Bilinear products and slacks
/// are not carried over.
pub fn transfer_point(src: &OpfVariableMap, x: &[f64], dst: &OpfVariableMap) -> Vec<f64> {
    let mut out = vec![0.0; dst.num_symbols];
    for (s, d) in src.buses.iter().zip(&dst.buses) {
        out[d.u] = x[s.u];
        out[d.theta] = x[s.theta];
    }
    for (s, d) in src.gens.iter().zip(&dst.gens) {
        out[d.p] = x[s.p];
        out[d.q] = x[s.q];
    }
    for (s, d) in src.branches.iter().zip(&dst.branches) {
        for (a, b) in [
            (s.p_from, d.p_from),
            (s.q_from, d.q_from),
            (s.p_to, d.p_to),
            (s.q_to, d.q_to),
            (s.k, d.k),
            (s.l, d.l),
            (s.s, d.s),
            (s.c, d.c),
            (s.theta, d.theta),
        ] {
            out[b] = x[a];
        }
        if let Some([a, b, c]) = d.powers {
            let th = x[s.theta];
            out[a] = th.powi(2);
            out[b] = th.powi(4);
            out[c] = th.powi(6);
        }
    }
    out
}

/// Bus angles fitted in the least-squares sense to the branch angles
/// `atan2(L, K)` implied by the lifted products, with the reference at zero.
pub fn angles_from_products(case: &NetworkCase, vm: &OpfVariableMap, x: &[f64]) -> Vec<f64> {
    let n = case.buses.len();
    let r = case.ref_bus();
    let mut lap = nalgebra::DMatrix::<f64>::zeros(n, n);
    let mut rhs = nalgebra::DVector::<f64>::zeros(n);
    for (br, v) in case.branches.iter().zip(&vm.branches) {
        let a = x[v.l].atan2(x[v.k]) + br.shift;
        let (i, j) = (br.from, br.to);
        lap[(i, i)] += 1.0;
        lap[(j, j)] += 1.0;
        lap[(i, j)] -= 1.0;
        lap[(j, i)] -= 1.0;
        rhs[i] += a;
        rhs[j] -= a;
    }
    for k in 0..n {
        lap[(r, k)] = 0.0;
    }
    lap[(r, r)] = 1.0;
    rhs[r] = 0.0;
    match lap.lu().solve(&rhs) {
        Some(th) => th.iter().copied().collect(),
        None => vm.buses.iter().map(|b| x[b.theta]).collect(),
    }
}

/// Polar operating point read from the symbols: magnitudes `√U`, angles
/// from the bus angle variables.
pub fn extract_point(vm: &OpfVariableMap, x: &[f64]) -> OperatingPoint {
    OperatingPoint {
        vm: vm.buses.iter().map(|b| x[b.u].max(0.0).sqrt()).collect(),
        va: vm.buses.iter().map(|b| x[b.theta]).collect(),
        pg: vm.gens.iter().map(|g| x[g.p]).collect(),
        qg: vm.gens.iter().map(|g| x[g.q]).collect(),
    }
}

/// Runs the recovery loop. Without a warm start the tightened relaxation is
/// solved first and its optimum seeds the first linearization.
pub fn run_acp(
    case: &NetworkCase,
    config: &AcpConfig,
    options: &RelaxationOptions,
    warm_start: Option<&OperatingPoint>,
) -> crate::Result<AcpResult> {
    run_acp_with(case, config, options, warm_start, Execution::default())
}

pub fn run_acp_with(
    case: &NetworkCase,
    config: &AcpConfig,
    options: &RelaxationOptions,
    warm_start: Option<&OperatingPoint>,
    exec: Execution,
) -> crate::Result<AcpResult> {
    config.validate()?;
    let tol = Tolerances::default();
    let model = DcModel::new(case, options, config.angle_model)?;
    let (mut x, relaxation) = match warm_start {
        Some(p) => (lift_point(case, &model.varmap, &p.vm, &p.va, &p.pg, &p.qg), None),
        None => {
            let art = build_socpt(case, options)?;
            let res = conic::solve(&art.program, &tol)?;
            if res.status != SolveStatus::Optimal {
                return Err(AcpError::RelaxationFailed(res.status).into());
            }
            let x0 = match config.seed {
                Seed::Products => {
                    let mut p = extract_point(&art.varmap, &res.x);
                    p.va = angles_from_products(case, &art.varmap, &res.x);
                    lift_point(case, &model.varmap, &p.vm, &p.va, &p.pg, &p.qg)
                }
                Seed::Symbols => transfer_point(&art.varmap, &res.x, &model.varmap),
            };
            let summary = RelaxationSummary {
                status: res.status,
                objective: res.objective,
                solve_time: res.solve_time,
                x: res.x[..art.varmap.num_symbols].to_vec(),
                varmap: art.varmap,
            };
            (x0, Some(summary))
        }
    };

    let mut trace: Vec<AcpIterate> = Vec::new();
    let mut tau = config.tau0;
    let mut status = AcpStatus::IterationLimit;
    for k in 0..config.max_iters {
        let start = Instant::now();
        let program = model.subproblem(&x, tau, exec)?;
        let res = conic::solve(&program, &tol)?;
        if res.status != SolveStatus::Optimal {
            status = AcpStatus::SolverFailure;
            break;
        }
        let xs = res.x[..model.varmap.num_symbols].to_vec();
        let slack_sum = model.varmap.slack_sum(&xs);
        let objective_true = options.objective.evaluate(case, &model.varmap.dispatch(&xs));
        let it = AcpIterate {
            k: k + 1,
            x: xs.clone(),
            tau,
            objective_true,
            objective_penalized: objective_true + tau * slack_sum,
            slack_sum,
            solve_time: start.elapsed().as_secs_f64(),
        };
        let settled = match trace.last() {
            Some(prev) if prev.tau == config.tau_max && tau == config.tau_max => {
                let v = it.objective_penalized;
                (prev.objective_penalized - v).abs() <= config.delta1 * v.abs()
            }
            _ => false,
        };
        trace.push(it);
        x = xs;
        let feasible = slack_sum <= config.delta2;
        let stop = match config.stopping {
            StoppingRule::Either => feasible || settled,
            StoppingRule::ObjectiveChange => settled,
            StoppingRule::SlackSum => feasible,
        };
        if stop {
            status = if feasible {
                AcpStatus::FeasibleKkt
            } else {
                AcpStatus::ConvergedInfeasible
            };
            break;
        }
        tau = (config.mu * tau).min(config.tau_max);
    }
    let point = extract_point(&model.varmap, &x);
    Ok(AcpResult {
        status,
        relaxation,
        trace,
        solution: AcpSolution { x, point },
        varmap: model.varmap,
        config: *config,
    })
}

/// Residuals of the lifted equalities at `x`, with the trigonometric
/// functions evaluated exactly at the bus angle differences.
pub fn lifted_residuals(case: &NetworkCase, vm: &OpfVariableMap, x: &[f64]) -> LiftedResiduals {
    let mut r = LiftedResiduals::default();
    for (br, v) in case.branches.iter().zip(&vm.branches) {
        let (ui, uj) = (x[vm.buses[br.from].u], x[vm.buses[br.to].u]);
        let (k, l, s, c) = (x[v.k], x[v.l], x[v.s], x[v.c]);
        let th = x[vm.buses[br.from].theta] - x[vm.buses[br.to].theta] - br.shift;
        r.voltage_product = r.voltage_product.max((k * k + l * l - ui * uj).abs());
        r.angle_product = r.angle_product.max((th.sin() * k - th.cos() * l).abs());
        r.sine = r.sine.max((s - th.sin()).abs());
        r.cosine = r.cosine.max((c - th.cos()).abs());
        r.unit_circle = r.unit_circle.max((s * s + c * c - 1.0).abs());
        r.bilinear = r.bilinear.max((s * k - c * l).abs());
    }
    r
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LiftedResiduals {
    /// `|K² + L² − U_i U_j|`
    pub voltage_product: f64,
    /// `|sin θ K − cos θ L|`
    pub angle_product: f64,
    /// `|s − sin θ|`
    pub sine: f64,
    /// `|c − cos θ|`
    pub cosine: f64,
    /// `|s² + c² − 1|`
    pub unit_circle: f64,
    /// `|s K − c L|`
    pub bilinear: f64,
}

impl LiftedResiduals {
    /// Worst residual over the lifted equalities.
    pub fn max(&self) -> f64 {
        [
            self.voltage_product,
            self.angle_product,
            self.sine,
            self.cosine,
            self.unit_circle,
            self.bilinear,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// True when the run ended with vanishing slacks and the final point meets
/// the lifted equalities within `tol`.
pub fn check_kkt_certificate(case: &NetworkCase, result: &AcpResult, tol: f64) -> bool {
    result.status == AcpStatus::FeasibleKkt
        && result.final_slack_sum() <= tol
        && lifted_residuals(case, &result.varmap, &result.solution.x).max() <= tol
}
