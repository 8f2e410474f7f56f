//! Lifted OPF variables and the tightened SOCP relaxation.
//!
//! Voltages enter only through `U_i = V_i²`, `K_ij = V_i V_j cos θ_ij` and
//! `L_ij = V_i V_j sin θ_ij`, which makes every branch flow linear. With an
//! off-nominal tap `t`, phase shift `φ` and charging `bc` the flows are
//!
//! ```text
//! p_ij =  g/t² U_i − (g K + b L)/t        p_ji =  g U_j − (g K − b L)/t
//! q_ij = −(b + bc/2)/t² U_i + (b K − g L)/t
//! q_ji = −(b + bc/2) U_j + (b K + g L)/t
//! θ_ij = θ_i − θ_j − φ
//! ```
//!
//! which is the plain line model when `t = 1` and `φ = bc = 0`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::case::{derive_bounds, BoundConstants, NetworkCase};
use crate::conic::{
    ConicError, ConicProgram, ConstraintId, FinalizedProgram, LinExpr, QuadraticForm,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectiveKind {
    /// Total generation cost ($/h).
    #[default]
    Cost,
    /// Total active loss (MW), i.e. generation minus the fixed load.
    Loss,
}

impl ObjectiveKind {
    /// Objective value at a dispatch `pg` (p.u.).
    pub fn evaluate(self, case: &NetworkCase, pg: &[f64]) -> f64 {
        match self {
            ObjectiveKind::Cost => case
                .generators
                .iter()
                .zip(pg)
                .map(|(g, &p)| g.cost.per_unit(case.base_mva).eval(p))
                .sum(),
            ObjectiveKind::Loss => (pg.iter().sum::<f64>() - case.total_load()) * case.base_mva,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelaxationOptions {
    pub objective: ObjectiveKind,
    /// Global angle-difference limit (radians).
    pub theta_u: f64,
    /// Uniform apparent-power limit (p.u.); `None` keeps the case limits.
    pub smax: Option<f64>,
}

/// Which extra per-branch symbols a program carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    /// Bilinear products `m = sK`, `n = cL` for the McCormick rows.
    Relaxation,
    /// Angle powers `α, β, γ` and seven slacks per branch, plus two more
    /// for the sine tie when `sine_tie` is set.
    DifferenceOfConvex { sine_tie: bool },
    /// Linear sine: no angle powers, slacks for the three bilinear pairs.
    SmallAngle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BusVars {
    pub u: usize,
    pub theta: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenVars {
    pub p: usize,
    pub q: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchVars {
    pub p_from: usize,
    pub q_from: usize,
    pub p_to: usize,
    pub q_to: usize,
    pub k: usize,
    pub l: usize,
    pub s: usize,
    pub c: usize,
    pub theta: usize,
    /// `(m, n)` in the relaxation layout.
    pub products: Option<(usize, usize)>,
    /// `(α, β, γ)` in the difference-of-convex layout.
    pub powers: Option<[usize; 3]>,
    /// Slack per convexified row, indexed by pair number minus one; `None`
    /// where the layout has no such row.
    pub slacks: [Option<usize>; 9],
}

/// Physical symbol → program column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpfVariableMap {
    pub buses: Vec<BusVars>,
    pub gens: Vec<GenVars>,
    pub branches: Vec<BranchVars>,
    /// Number of symbol columns; they occupy `0..num_symbols`.
    pub num_symbols: usize,
}

impl OpfVariableMap {
    /// Allocates every symbol for `layout` at the front of `program`, with
    /// the box constraints of the original problem as variable bounds.
    pub fn allocate(
        case: &NetworkCase,
        bounds: &BoundConstants,
        layout: Layout,
        program: &mut ConicProgram,
    ) -> Self {
        assert_eq!(program.num_vars(), 0, "symbols must come first");
        let inf = f64::INFINITY;
        let ref_bus = case.ref_bus();
        let buses = case
            .buses
            .iter()
            .enumerate()
            .map(|(i, b)| {
                let u = program.add_variable(format!("U[{}]", b.id), b.vmin * b.vmin, b.vmax * b.vmax);
                let theta = if i == ref_bus {
                    program.add_variable(format!("theta[{}]", b.id), 0.0, 0.0)
                } else {
                    program.free_variable(format!("theta[{}]", b.id))
                };
                BusVars { u, theta }
            })
            .collect();
        let gens = case
            .generators
            .iter()
            .enumerate()
            .map(|(g, gen)| GenVars {
                p: program.add_variable(format!("pg[{g}]"), gen.pmin, gen.pmax),
                q: program.add_variable(format!("qg[{g}]"), gen.qmin, gen.qmax),
            })
            .collect();
        let branches = case
            .branches
            .iter()
            .zip(&bounds.branches)
            .enumerate()
            .map(|(e, (_, bb))| {
                let relax = layout == Layout::Relaxation;
                let (kl, ku, ll, lu, sl, su, cl, cu) = if relax {
                    (bb.kl, bb.ku, bb.ll, bb.lu, bb.sl, bb.su, bb.cl, bb.cu)
                } else {
                    (-inf, inf, -inf, inf, -inf, inf, -inf, inf)
                };
                let mut v = BranchVars {
                    p_from: program.free_variable(format!("p_from[{e}]")),
                    q_from: program.free_variable(format!("q_from[{e}]")),
                    p_to: program.free_variable(format!("p_to[{e}]")),
                    q_to: program.free_variable(format!("q_to[{e}]")),
                    k: program.add_variable(format!("K[{e}]"), kl, ku),
                    l: program.add_variable(format!("L[{e}]"), ll, lu),
                    s: program.add_variable(format!("s[{e}]"), sl, su),
                    c: program.add_variable(format!("c[{e}]"), cl, cu),
                    theta: program.add_variable(format!("theta_br[{e}]"), -bb.theta_u, bb.theta_u),
                    products: None,
                    powers: None,
                    slacks: [None; 9],
                };
                match layout {
                    Layout::Relaxation => {
                        v.products = Some((
                            program.free_variable(format!("m[{e}]")),
                            program.free_variable(format!("n[{e}]")),
                        ));
                    }
                    Layout::DifferenceOfConvex { sine_tie } => {
                        v.powers = Some([
                            program.free_variable(format!("alpha[{e}]")),
                            program.free_variable(format!("beta[{e}]")),
                            program.free_variable(format!("gamma[{e}]")),
                        ]);
                        let count = if sine_tie { 9 } else { 7 };
                        for (m, slot) in v.slacks.iter_mut().enumerate().take(count) {
                            *slot = Some(program.add_variable(format!("eps{}[{e}]", m + 1), 0.0, inf));
                        }
                    }
                    Layout::SmallAngle => {
                        for m in [0, 1, 2, 6] {
                            v.slacks[m] = Some(program.add_variable(format!("eps{}[{e}]", m + 1), 0.0, inf));
                        }
                    }
                }
                v
            })
            .collect();
        OpfVariableMap {
            buses,
            gens,
            branches,
            num_symbols: program.num_vars(),
        }
    }

    pub fn slack_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.branches.iter().flat_map(|b| b.slacks.iter().flatten().copied())
    }

    pub fn slack_sum(&self, x: &[f64]) -> f64 {
        self.slack_indices().map(|i| x[i].max(0.0)).sum()
    }

    pub fn dispatch(&self, x: &[f64]) -> Vec<f64> {
        self.gens.iter().map(|g| x[g.p]).collect()
    }
}

/// Constraint row groups of the relaxation, by role.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ConstraintFamily {
    AngleDifference,
    ActiveBalance,
    ReactiveBalance,
    ActiveFlowFrom,
    ActiveFlowTo,
    ReactiveFlowFrom,
    ReactiveFlowTo,
    ThermalFrom,
    ThermalTo,
    VoltageProductCone,
    SineUpper,
    SineLower,
    CosineUpper,
    CosineLower,
    UnitCircle,
    SinProductEnvelope,
    CosProductEnvelope,
    ProductCoupling,
}

pub type Registry = BTreeMap<ConstraintFamily, Vec<ConstraintId>>;

fn record(reg: &mut Registry, fam: ConstraintFamily, id: ConstraintId) {
    reg.entry(fam).or_default().push(id);
}

/// Affine expressions of the four branch flows in `(U_i, U_j, K, L)`.
pub fn flow_expressions(case: &NetworkCase, vm: &OpfVariableMap, e: usize) -> [LinExpr; 4] {
    let br = &case.branches[e];
    let v = &vm.branches[e];
    let (ui, uj) = (vm.buses[br.from].u, vm.buses[br.to].u);
    let (g, b, t) = (br.g, br.b, br.tap);
    let bsh = b + br.bc / 2.0;
    let p_from = LinExpr::from_terms(&[(ui, g / (t * t)), (v.k, -g / t), (v.l, -b / t)], 0.0);
    let q_from = LinExpr::from_terms(&[(ui, -bsh / (t * t)), (v.k, b / t), (v.l, -g / t)], 0.0);
    let p_to = LinExpr::from_terms(&[(uj, g), (v.k, -g / t), (v.l, b / t)], 0.0);
    let q_to = LinExpr::from_terms(&[(uj, -bsh), (v.k, b / t), (v.l, g / t)], 0.0);
    [p_from, q_from, p_to, q_to]
}

/// Angle relation, branch flow definitions, and nodal balance rows.
pub fn build_lifted_flows(
    case: &NetworkCase,
    vm: &OpfVariableMap,
    program: &mut ConicProgram,
    reg: &mut Registry,
) -> Result<(), ConicError> {
    use ConstraintFamily::*;
    for (e, br) in case.branches.iter().enumerate() {
        let v = &vm.branches[e];
        let id = program.add_equality(
            &[
                (v.theta, 1.0),
                (vm.buses[br.from].theta, -1.0),
                (vm.buses[br.to].theta, 1.0),
            ],
            -br.shift,
        )?;
        record(reg, AngleDifference, id);
        let flows = flow_expressions(case, vm, e);
        let targets = [
            (v.p_from, ActiveFlowFrom),
            (v.q_from, ReactiveFlowFrom),
            (v.p_to, ActiveFlowTo),
            (v.q_to, ReactiveFlowTo),
        ];
        for (expr, (var, fam)) in flows.iter().zip(targets) {
            let id = program.add_affine_eq(&expr.clone().add_term(var, -1.0))?;
            record(reg, fam, id);
        }
    }
    let gens_at = case.generators_at();
    for (i, bus) in case.buses.iter().enumerate() {
        let mut p = LinExpr::from_terms(&[(vm.buses[i].u, bus.gsh)], bus.pd);
        let mut q = LinExpr::from_terms(&[(vm.buses[i].u, -bus.bsh)], bus.qd);
        for &g in &gens_at[i] {
            p = p.add_term(vm.gens[g].p, -1.0);
            q = q.add_term(vm.gens[g].q, -1.0);
        }
        for &e in &case.adjacency[i] {
            let v = &vm.branches[e];
            if case.branches[e].from == i {
                p = p.add_term(v.p_from, 1.0);
                q = q.add_term(v.q_from, 1.0);
            } else {
                p = p.add_term(v.p_to, 1.0);
                q = q.add_term(v.q_to, 1.0);
            }
        }
        record(reg, ActiveBalance, program.add_affine_eq(&p)?);
        record(reg, ReactiveBalance, program.add_affine_eq(&q)?);
    }
    Ok(())
}

/// Apparent-power limits at both branch ends, through a head variable
/// pinned to the limit.
pub fn build_thermal_limits(
    case: &NetworkCase,
    vm: &OpfVariableMap,
    smax: Option<f64>,
    program: &mut ConicProgram,
    reg: &mut Registry,
) -> Result<(), ConicError> {
    for (e, br) in case.branches.iter().enumerate() {
        let Some(limit) = smax.or(br.smax) else { continue };
        let v = &vm.branches[e];
        let head = program.free_variable(format!("smax[{e}]"));
        program.add_equality(&[(head, 1.0)], limit)?;
        record(reg, ConstraintFamily::ThermalFrom, program.add_soc(head, &[v.p_from, v.q_from])?);
        record(reg, ConstraintFamily::ThermalTo, program.add_soc(head, &[v.p_to, v.q_to])?);
    }
    Ok(())
}

/// `‖(2K, 2L, U_i − U_j)‖ ≤ U_i + U_j` for every branch.
pub fn build_soc_cone(
    case: &NetworkCase,
    vm: &OpfVariableMap,
    program: &mut ConicProgram,
    reg: &mut Registry,
) -> Result<(), ConicError> {
    for (e, br) in case.branches.iter().enumerate() {
        let v = &vm.branches[e];
        let (ui, uj) = (vm.buses[br.from].u, vm.buses[br.to].u);
        let id = program.add_affine_soc(
            &LinExpr::from_terms(&[(ui, 1.0), (uj, 1.0)], 0.0),
            &[
                LinExpr::term(v.k, 2.0),
                LinExpr::term(v.l, 2.0),
                LinExpr::from_terms(&[(ui, 1.0), (uj, -1.0)], 0.0),
            ],
        )?;
        record(reg, ConstraintFamily::VoltageProductCone, id);
    }
    Ok(())
}

/// Upper sine envelope at angle `theta` for limit `theta_u`.
pub fn sine_upper(theta: f64, theta_u: f64) -> f64 {
    let h = theta_u / 2.0;
    h.cos() * (theta - h) + h.sin()
}

pub fn sine_lower(theta: f64, theta_u: f64) -> f64 {
    let h = theta_u / 2.0;
    h.cos() * (theta + h) - h.sin()
}

/// Concave quadratic upper bound on the cosine.
pub fn cosine_upper(theta: f64, theta_u: f64) -> f64 {
    1.0 - (1.0 - theta_u.cos()) * theta * theta / (theta_u * theta_u)
}

/// Sine and cosine envelopes over `[−θᵘ, θᵘ]` plus the unit-disk row.
pub fn build_trig_envelopes(
    vm: &OpfVariableMap,
    bounds: &BoundConstants,
    program: &mut ConicProgram,
    reg: &mut Registry,
) -> Result<(), ConicError> {
    use ConstraintFamily::*;
    for (v, bb) in vm.branches.iter().zip(&bounds.branches) {
        let h = bb.theta_u / 2.0;
        let rhs = h.sin() - h.cos() * h;
        record(reg, SineUpper, program.add_inequality(&[(v.s, 1.0), (v.theta, -h.cos())], rhs)?);
        record(reg, SineLower, program.add_inequality(&[(v.s, -1.0), (v.theta, h.cos())], rhs)?);
        let curvature = (1.0 - bb.theta_u.cos()) / (bb.theta_u * bb.theta_u);
        let id = program.add_quadratic_leq(
            QuadraticForm::SumOfSquares(vec![LinExpr::term(v.theta, curvature.sqrt())]),
            &[(v.c, 1.0)],
            1.0,
        )?;
        record(reg, CosineUpper, id);
        record(reg, CosineLower, program.add_inequality(&[(v.c, -1.0)], -bb.cl)?);
        let id = program.add_affine_soc(&LinExpr::constant(1.0), &[LinExpr::var(v.s), LinExpr::var(v.c)])?;
        record(reg, UnitCircle, id);
    }
    Ok(())
}

/// The four McCormick rows for `w = x·y` over `[xl, xu] × [yl, yu]`, each as
/// `(terms over (w, x, y), rhs)` meaning `terms ≤ rhs`.
pub fn mccormick_rows(xl: f64, xu: f64, yl: f64, yu: f64) -> [([f64; 3], f64); 4] {
    [
        // w ≥ xl·y + x·yl − xl·yl
        ([-1.0, yl, xl], xl * yl),
        // w ≥ xu·y + x·yu − xu·yu
        ([-1.0, yu, xu], xu * yu),
        // w ≤ xl·y + x·yu − xl·yu
        ([1.0, -yu, -xl], -xl * yu),
        // w ≤ xu·y + x·yl − xu·yl
        ([1.0, -yl, -xu], -xu * yl),
    ]
}

/// McCormick envelopes for `m = s·K` and `n = c·L`, plus `m = n`.
pub fn build_mccormick(
    vm: &OpfVariableMap,
    bounds: &BoundConstants,
    program: &mut ConicProgram,
    reg: &mut Registry,
) -> Result<(), ConicError> {
    for (v, bb) in vm.branches.iter().zip(&bounds.branches) {
        let (m, n) = v.products.expect("relaxation layout");
        for (coef, rhs) in mccormick_rows(bb.sl, bb.su, bb.kl, bb.ku) {
            let id = program.add_inequality(&[(m, coef[0]), (v.s, coef[1]), (v.k, coef[2])], rhs)?;
            record(reg, ConstraintFamily::SinProductEnvelope, id);
        }
        for (coef, rhs) in mccormick_rows(bb.cl, bb.cu, bb.ll, bb.lu) {
            let id = program.add_inequality(&[(n, coef[0]), (v.c, coef[1]), (v.l, coef[2])], rhs)?;
            record(reg, ConstraintFamily::CosProductEnvelope, id);
        }
        record(reg, ConstraintFamily::ProductCoupling, program.add_equality(&[(m, 1.0), (n, -1.0)], 0.0)?);
    }
    Ok(())
}

/// Installs the OPF objective (cost through per-generator epigraphs, or
/// loss as generation minus load in MW).
pub fn build_objective(
    case: &NetworkCase,
    vm: &OpfVariableMap,
    kind: ObjectiveKind,
    program: &mut ConicProgram,
) -> Result<(), ConicError> {
    match kind {
        ObjectiveKind::Cost => {
            for (gen, gv) in case.generators.iter().zip(&vm.gens) {
                let c = gen.cost.per_unit(case.base_mva);
                if c.c2 > 0.0 {
                    program.add_quadratic_objective(QuadraticForm::SumOfSquares(vec![LinExpr::term(
                        gv.p,
                        c.c2.sqrt(),
                    )]))?;
                }
                program.add_objective(&LinExpr::from_terms(&[(gv.p, c.c1)], c.c0))?;
            }
        }
        ObjectiveKind::Loss => {
            let terms: Vec<(usize, f64)> = vm.gens.iter().map(|g| (g.p, case.base_mva)).collect();
            program.add_objective(&LinExpr::from_terms(&terms, -case.total_load() * case.base_mva))?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct RelaxationArtifacts {
    pub program: FinalizedProgram,
    pub varmap: OpfVariableMap,
    pub bounds: BoundConstants,
    pub registry: Registry,
    pub options: RelaxationOptions,
}

/// Assembles the tightened SOCP relaxation.
pub fn build_socpt(case: &NetworkCase, options: &RelaxationOptions) -> crate::Result<RelaxationArtifacts> {
    let bounds = derive_bounds(case, options.theta_u)?;
    let mut program = ConicProgram::new();
    let varmap = OpfVariableMap::allocate(case, &bounds, Layout::Relaxation, &mut program);
    let mut registry = Registry::new();
    build_objective(case, &varmap, options.objective, &mut program)?;
    build_lifted_flows(case, &varmap, &mut program, &mut registry)?;
    build_thermal_limits(case, &varmap, options.smax, &mut program, &mut registry)?;
    build_soc_cone(case, &varmap, &mut program, &mut registry)?;
    build_trig_envelopes(&varmap, &bounds, &mut program, &mut registry)?;
    build_mccormick(&varmap, &bounds, &mut program, &mut registry)?;
    Ok(RelaxationArtifacts {
        program: program.finalize(),
        varmap,
        bounds,
        registry,
        options: *options,
    })
}

/// Lifts a polar operating point into the symbol columns of `vm`.
///
/// Flows and lifted products are computed from their trigonometric
/// definitions; angle powers are `θ², θ⁴, θ⁶`; slacks are zero.
pub fn lift_point(
    case: &NetworkCase,
    vm: &OpfVariableMap,
    vmag: &[f64],
    vang: &[f64],
    pg: &[f64],
    qg: &[f64],
) -> Vec<f64> {
    let mut x = vec![0.0; vm.num_symbols];
    for (i, b) in vm.buses.iter().enumerate() {
        x[b.u] = vmag[i] * vmag[i];
        x[b.theta] = vang[i];
    }
    for (g, gv) in vm.gens.iter().enumerate() {
        x[gv.p] = pg[g];
        x[gv.q] = qg[g];
    }
    for (e, br) in case.branches.iter().enumerate() {
        let v = &vm.branches[e];
        let th = vang[br.from] - vang[br.to] - br.shift;
        let vv = vmag[br.from] * vmag[br.to];
        x[v.k] = vv * th.cos();
        x[v.l] = vv * th.sin();
        x[v.s] = th.sin();
        x[v.c] = th.cos();
        x[v.theta] = th;
        if let Some((m, n)) = v.products {
            x[m] = x[v.s] * x[v.k];
            x[n] = x[v.c] * x[v.l];
        }
        if let Some([a, b, c]) = v.powers {
            x[a] = th.powi(2);
            x[b] = th.powi(4);
            x[c] = th.powi(6);
        }
        let flows = flow_expressions(case, vm, e);
        x[v.p_from] = flows[0].eval(&x);
        x[v.q_from] = flows[1].eval(&x);
        x[v.p_to] = flows[2].eval(&x);
        x[v.q_to] = flows[3].eval(&x);
    }
    x
}

/// Extends a symbol vector with the auxiliary columns a program adds after
/// the symbols (objective epigraphs set tight, thermal heads, quadratic
/// auxiliaries).
pub fn complete_point(program: &FinalizedProgram, vm: &OpfVariableMap, symbols: &[f64]) -> Vec<f64> {
    program.complete_auxiliaries(&symbols[..vm.num_symbols])
}
