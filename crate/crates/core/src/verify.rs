//! Independent checks of a recovered operating point: constraint
//! violations of the original polar model, a Newton-Raphson power flow from
//! the point, and the sub-optimality gap.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::acp::{lifted_residuals, LiftedResiduals};
use crate::case::{branch_angle_limit, wrap_angle, BusType, NetworkCase};
use crate::relaxation::{lift_point, Layout, ObjectiveKind, OpfVariableMap};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VerifyError {
    #[error("power flow did not converge in {iterations} iterations (mismatch {mismatch:e})")]
    Diverged { iterations: usize, mismatch: f64 },
    #[error("singular power-flow Jacobian at iteration {0}")]
    SingularJacobian(usize),
    #[error("reference objective is zero")]
    ZeroReference,
    #[error("operating point has {found} entries for {what}, expected {expected}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
}

/// Polar state of every bus plus generator dispatch, all per unit.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub vm: Vec<f64>,
    /// Radians.
    pub va: Vec<f64>,
    pub pg: Vec<f64>,
    pub qg: Vec<f64>,
}

impl OperatingPoint {
    pub fn flat(case: &NetworkCase) -> Self {
        OperatingPoint {
            vm: vec![1.0; case.buses.len()],
            va: vec![0.0; case.buses.len()],
            pg: case.generators.iter().map(|g| g.pg).collect(),
            qg: case.generators.iter().map(|g| g.qg).collect(),
        }
    }

    fn check(&self, case: &NetworkCase) -> Result<(), VerifyError> {
        let nb = case.buses.len();
        let ng = case.generators.len();
        for (what, expected, found) in [
            ("vm", nb, self.vm.len()),
            ("va", nb, self.va.len()),
            ("pg", ng, self.pg.len()),
            ("qg", ng, self.qg.len()),
        ] {
            if expected != found {
                return Err(VerifyError::DimensionMismatch { what, expected, found });
            }
        }
        Ok(())
    }
}

/// Dense bus admittance matrix with taps, phase shifts, charging and shunts.
pub fn admittance_matrix(case: &NetworkCase) -> DMatrix<Complex64> {
    let n = case.buses.len();
    let mut y = DMatrix::<Complex64>::zeros(n, n);
    for br in &case.branches {
        let ys = Complex64::new(br.g, br.b);
        let ych = Complex64::new(0.0, br.bc / 2.0);
        let a = Complex64::from_polar(br.tap, br.shift);
        let (i, j) = (br.from, br.to);
        y[(i, i)] += (ys + ych) / (br.tap * br.tap);
        y[(j, j)] += ys + ych;
        y[(i, j)] -= ys / a.conj();
        y[(j, i)] -= ys / a;
    }
    for (i, bus) in case.buses.iter().enumerate() {
        y[(i, i)] += Complex64::new(bus.gsh, bus.bsh);
    }
    y
}

/// Complex power injected into the network at every bus.
pub fn injections(y: &DMatrix<Complex64>, vm: &[f64], va: &[f64]) -> Vec<Complex64> {
    let v: Vec<Complex64> = vm.iter().zip(va).map(|(&m, &a)| Complex64::from_polar(m, a)).collect();
    (0..v.len())
        .map(|i| {
            let current: Complex64 = (0..v.len()).map(|k| y[(i, k)] * v[k]).sum();
            v[i] * current.conj()
        })
        .collect()
}

/// Branch flows `(p_ij, q_ij, p_ji, q_ji)` from polar voltages.
pub fn branch_flows(case: &NetworkCase, vm: &[f64], va: &[f64]) -> Vec<[f64; 4]> {
    case.branches
        .iter()
        .map(|br| {
            let (vi, vj) = (vm[br.from], vm[br.to]);
            let th = va[br.from] - va[br.to] - br.shift;
            let (ui, uj) = (vi * vi, vj * vj);
            let (k, l) = (vi * vj * th.cos(), vi * vj * th.sin());
            let (g, b, t) = (br.g, br.b, br.tap);
            let bsh = b + br.bc / 2.0;
            [
                g / (t * t) * ui - (g * k + b * l) / t,
                -bsh / (t * t) * ui + (b * k - g * l) / t,
                g * uj - (g * k - b * l) / t,
                -bsh * uj + (b * k + g * l) / t,
            ]
        })
        .collect()
}

/// Bus types and specified injections for a power flow.
#[derive(Debug, Clone, PartialEq)]
pub struct PfSetpoints {
    pub kind: Vec<BusType>,
    /// Net specified active injection (generation minus load).
    pub p_spec: Vec<f64>,
    /// Net specified reactive injection, used at PQ buses.
    pub q_spec: Vec<f64>,
    /// Voltage magnitude held at PV and REF buses.
    pub v_set: Vec<f64>,
}

impl PfSetpoints {
    /// Generator buses become PV at the point's magnitudes; the reference bus
    /// keeps its role; every other bus is PQ.
    pub fn from_point(case: &NetworkCase, point: &OperatingPoint) -> Self {
        let n = case.buses.len();
        let gens_at = case.generators_at();
        let mut p_spec: Vec<f64> = case.buses.iter().map(|b| -b.pd).collect();
        let mut q_spec: Vec<f64> = case.buses.iter().map(|b| -b.qd).collect();
        for (g, gen) in case.generators.iter().enumerate() {
            p_spec[gen.bus] += point.pg[g];
            q_spec[gen.bus] += point.qg[g];
        }
        let kind = (0..n)
            .map(|i| match case.buses[i].kind {
                BusType::Ref => BusType::Ref,
                _ if !gens_at[i].is_empty() => BusType::Pv,
                _ => BusType::Pq,
            })
            .collect();
        PfSetpoints {
            kind,
            p_spec,
            q_spec,
            v_set: point.vm.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PfSolution {
    pub point: OperatingPoint,
    /// Newton updates applied; zero when the start already meets the tolerance.
    pub iterations: usize,
    pub max_mismatch: f64,
}

pub const PF_TOLERANCE: f64 = 1e-8;
pub const PF_MAX_ITERATIONS: usize = 50;

/// Polar Newton-Raphson power flow with the full Jacobian.
pub fn newton_raphson_pf(
    case: &NetworkCase,
    setpoints: &PfSetpoints,
    start: &OperatingPoint,
) -> Result<PfSolution, VerifyError> {
    start.check(case)?;
    let n = case.buses.len();
    let y = admittance_matrix(case);
    let mut vm = start.vm.clone();
    let mut va = start.va.clone();
    for i in 0..n {
        if setpoints.kind[i] != BusType::Pq {
            vm[i] = setpoints.v_set[i];
        }
    }
    let pvpq: Vec<usize> = (0..n).filter(|&i| setpoints.kind[i] != BusType::Ref).collect();
    let pq: Vec<usize> = (0..n).filter(|&i| setpoints.kind[i] == BusType::Pq).collect();
    let dim = pvpq.len() + pq.len();

    let mismatch = |vm: &[f64], va: &[f64]| -> DVector<f64> {
        let s = injections(&y, vm, va);
        let mut f = DVector::zeros(dim);
        for (r, &i) in pvpq.iter().enumerate() {
            f[r] = s[i].re - setpoints.p_spec[i];
        }
        for (r, &i) in pq.iter().enumerate() {
            f[pvpq.len() + r] = s[i].im - setpoints.q_spec[i];
        }
        f
    };

    let mut iterations = 0;
    loop {
        let f = mismatch(&vm, &va);
        let worst = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let finite = f.iter().all(|v| v.is_finite());
        if finite && worst <= PF_TOLERANCE {
            break;
        }
        if iterations == PF_MAX_ITERATIONS || !finite {
            return Err(VerifyError::Diverged { iterations, mismatch: worst });
        }
        let jac = jacobian(&y, &vm, &va, &pvpq, &pq);
        let dx = jac.lu().solve(&(-f)).ok_or(VerifyError::SingularJacobian(iterations))?;
        for (r, &i) in pvpq.iter().enumerate() {
            va[i] += dx[r];
        }
        for (r, &i) in pq.iter().enumerate() {
            vm[i] += dx[pvpq.len() + r];
        }
        iterations += 1;
    }

    let s = injections(&y, &vm, &va);
    let mut pg = start.pg.clone();
    let mut qg = start.qg.clone();
    for (i, gens) in case.generators_at().iter().enumerate() {
        if gens.is_empty() {
            continue;
        }
        let share = gens.len() as f64;
        let p_need = s[i].re + case.buses[i].pd - gens.iter().map(|&g| pg[g]).sum::<f64>();
        let q_need = s[i].im + case.buses[i].qd - gens.iter().map(|&g| qg[g]).sum::<f64>();
        for &g in gens {
            if setpoints.kind[i] == BusType::Ref {
                pg[g] += p_need / share;
            }
            qg[g] += q_need / share;
        }
    }
    let max_mismatch = mismatch(&vm, &va).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(PfSolution {
        point: OperatingPoint { vm, va, pg, qg },
        iterations,
        max_mismatch,
    })
}

/// `∂(P, Q)/∂(θ, V)` restricted to the unknowns.
fn jacobian(y: &DMatrix<Complex64>, vm: &[f64], va: &[f64], pvpq: &[usize], pq: &[usize]) -> DMatrix<f64> {
    let n = vm.len();
    let v: Vec<Complex64> = vm.iter().zip(va).map(|(&m, &a)| Complex64::from_polar(m, a)).collect();
    let vn: Vec<Complex64> = va.iter().map(|&a| Complex64::from_polar(1.0, a)).collect();
    let current: Vec<Complex64> = (0..n).map(|i| (0..n).map(|k| y[(i, k)] * v[k]).sum()).collect();
    let j = Complex64::i();
    // dS_i/dθ_k and dS_i/dV_k
    let ds_da = |i: usize, k: usize| {
        let diag = if i == k { current[i].conj() } else { Complex64::new(0.0, 0.0) };
        j * v[i] * (diag - (y[(i, k)] * v[k]).conj())
    };
    let ds_dv = |i: usize, k: usize| {
        let diag = if i == k { current[i].conj() * vn[i] } else { Complex64::new(0.0, 0.0) };
        v[i] * (y[(i, k)] * vn[k]).conj() + diag
    };
    let np = pvpq.len();
    let dim = np + pq.len();
    let mut jac = DMatrix::zeros(dim, dim);
    for (r, &i) in pvpq.iter().enumerate() {
        for (c, &k) in pvpq.iter().enumerate() {
            jac[(r, c)] = ds_da(i, k).re;
        }
        for (c, &k) in pq.iter().enumerate() {
            jac[(r, np + c)] = ds_dv(i, k).re;
        }
    }
    for (r, &i) in pq.iter().enumerate() {
        for (c, &k) in pvpq.iter().enumerate() {
            jac[(np + r, c)] = ds_da(i, k).im;
        }
        for (c, &k) in pq.iter().enumerate() {
            jac[(np + r, np + c)] = ds_dv(i, k).im;
        }
    }
    jac
}

/// Largest violation per constraint family (all nonnegative).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Violations {
    pub voltage: f64,
    pub active_generation: f64,
    pub reactive_generation: f64,
    pub angle_difference: f64,
    pub thermal: f64,
    pub active_balance: f64,
    pub reactive_balance: f64,
    pub lifted: LiftedResiduals,
}

impl Violations {
    /// Worst violation over the polar constraint families.
    pub fn max_polar(&self) -> f64 {
        [
            self.voltage,
            self.active_generation,
            self.reactive_generation,
            self.angle_difference,
            self.thermal,
            self.active_balance,
            self.reactive_balance,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub pf_converged: bool,
    pub pf_iterations: Option<usize>,
    /// Largest bus power mismatch at the evaluated point.
    pub max_power_mismatch: f64,
    /// Largest magnitude change the power flow made to reach its solution.
    pub pf_voltage_deviation: Option<f64>,
    /// Largest angle change (degrees) the power flow made.
    pub pf_angle_deviation_deg: Option<f64>,
    pub violations: Violations,
    pub objective: f64,
    pub gap_percent: Option<f64>,
}

/// Limits the point is checked against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckLimits {
    /// Global angle-difference limit (radians).
    pub theta_u: f64,
    /// Uniform apparent-power limit (p.u.); `None` uses the case limits.
    pub smax: Option<f64>,
    pub objective: ObjectiveKind,
}

/// Evaluates the polar constraints at `point`, runs a power flow from it,
/// and reports the lifted residuals of `lifted` (a symbol vector over
/// `varmap`) or, if absent, of the point's own trigonometric lift.
pub fn evaluate_model1(
    case: &NetworkCase,
    point: &OperatingPoint,
    limits: &CheckLimits,
    lifted: Option<(&OpfVariableMap, &[f64])>,
) -> Result<FeasibilityReport, VerifyError> {
    point.check(case)?;
    let mut v = Violations::default();
    for (i, bus) in case.buses.iter().enumerate() {
        v.voltage = v.voltage.max(bus.vmin - point.vm[i]).max(point.vm[i] - bus.vmax);
    }
    for (g, gen) in case.generators.iter().enumerate() {
        v.active_generation = v.active_generation.max(gen.pmin - point.pg[g]).max(point.pg[g] - gen.pmax);
        v.reactive_generation = v.reactive_generation.max(gen.qmin - point.qg[g]).max(point.qg[g] - gen.qmax);
    }
    let flows = branch_flows(case, &point.vm, &point.va);
    let mut p_bal: Vec<f64> = case.buses.iter().map(|b| -b.pd).collect();
    let mut q_bal: Vec<f64> = case.buses.iter().map(|b| -b.qd).collect();
    for (g, gen) in case.generators.iter().enumerate() {
        p_bal[gen.bus] += point.pg[g];
        q_bal[gen.bus] += point.qg[g];
    }
    for (i, bus) in case.buses.iter().enumerate() {
        let u = point.vm[i] * point.vm[i];
        p_bal[i] -= bus.gsh * u;
        q_bal[i] += bus.bsh * u;
    }
    for (br, f) in case.branches.iter().zip(&flows) {
        p_bal[br.from] -= f[0];
        q_bal[br.from] -= f[1];
        p_bal[br.to] -= f[2];
        q_bal[br.to] -= f[3];
        let th = wrap_angle(point.va[br.from] - point.va[br.to] - br.shift);
        v.angle_difference = v.angle_difference.max(th.abs() - branch_angle_limit(br, limits.theta_u));
        if let Some(s) = limits.smax.or(br.smax) {
            let worst = f[0].hypot(f[1]).max(f[2].hypot(f[3]));
            v.thermal = v.thermal.max(worst - s);
        }
    }
    v.active_balance = p_bal.iter().fold(0.0, |m, r| m.max(r.abs()));
    v.reactive_balance = q_bal.iter().fold(0.0, |m, r| m.max(r.abs()));
    v.lifted = match lifted {
        Some((vm, x)) => lifted_residuals(case, vm, x),
        None => {
            let mut program = crate::conic::ConicProgram::new();
            let bounds = crate::case::BoundConstants {
                branches: vec![crate::case::BranchBounds::default(); case.branches.len()],
            };
            let vm = OpfVariableMap::allocate(case, &bounds, Layout::Relaxation, &mut program);
            let x = lift_point(case, &vm, &point.vm, &point.va, &point.pg, &point.qg);
            lifted_residuals(case, &vm, &x)
        }
    };

    let setpoints = PfSetpoints::from_point(case, point);
    let pf = newton_raphson_pf(case, &setpoints, point);
    let (pf_converged, pf_iterations, dv, da) = match &pf {
        Ok(sol) => {
            let dv = sol.point.vm.iter().zip(&point.vm).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            let da = sol.point.va.iter().zip(&point.va).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            (true, Some(sol.iterations), Some(dv), Some(da.to_degrees()))
        }
        Err(_) => (false, None, None, None),
    };
    Ok(FeasibilityReport {
        pf_converged,
        pf_iterations,
        max_power_mismatch: v.active_balance.max(v.reactive_balance),
        pf_voltage_deviation: dv,
        pf_angle_deviation_deg: da,
        violations: v,
        objective: limits.objective.evaluate(case, &point.pg),
        gap_percent: None,
    })
}

/// `(v_other − v_ref) / |v_ref| × 100`.
pub fn suboptimality_gap(v_other: f64, v_ref: f64) -> Result<f64, VerifyError> {
    if v_ref == 0.0 {
        return Err(VerifyError::ZeroReference);
    }
    Ok((v_other - v_ref) / v_ref.abs() * 100.0)
}
