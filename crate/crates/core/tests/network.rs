mod common;

use acp_opf::acp::{run_acp, AcpConfig, AcpStatus, DcModel, check_kkt_certificate};
use acp_opf::case::{parse_case, write_matpower};
use acp_opf::conic::{self, Tolerances};
use acp_opf::par::Execution;
use acp_opf::relaxation::{build_socpt, complete_point, flow_expressions, lift_point, ObjectiveKind, RelaxationOptions};
use acp_opf::verify::{
    branch_flows, evaluate_model1, newton_raphson_pf, CheckLimits, OperatingPoint, PfSetpoints,
};
use approx::assert_relative_eq;
use num_complex::Complex64;

const TWO_BUS: &str = "
mpc.baseMVA = 100;
mpc.bus = [
 1 3 0 0 0 0 1 1 0 230 1 1.1 0.9;
 2 1 50 20 0 0 1 1 0 230 1 1.1 0.9;
];
mpc.gen = [ 1 0 0 300 -300 1 100 1 250 0 0 0 0 0 0 0 0 0 0 0 0; ];
mpc.branch = [ 1 2 0.01 0.1 0 0 0 0 0 0 1 -360 360; ];
mpc.gencost = [ 2 0 0 3 0.1 10 0; ];
";

const ZERO_LOAD_TRIANGLE: &str = "
mpc.baseMVA = 100;
mpc.bus = [
 1 3 0 0 0 0 1 1 0 230 1 1.1 0.9;
 2 2 0 0 0 0 1 1 0 230 1 1.1 0.9;
 3 1 0 0 0 0 1 1 0 230 1 1.1 0.9;
];
mpc.gen = [
 1 0 0 100 -100 1 100 1 200 0 0 0 0 0 0 0 0 0 0 0 0;
 2 0 0 100 -100 1 100 1 200 0 0 0 0 0 0 0 0 0 0 0 0;
];
mpc.branch = [
 1 2 0.01 0.1 0 0 0 0 0 0 1 -360 360;
 2 3 0.01 0.1 0 0 0 0 0 0 1 -360 360;
 1 3 0.01 0.1 0 0 0 0 0 0 1 -360 360;
];
mpc.gencost = [ 2 0 0 3 0 1 0; 2 0 0 3 0 1 0; ];
";

/// Bus-2 injection of the 2-bus line, computed directly from `S = V (y ΔV)*`.
fn two_bus_injection(v: f64, th: f64) -> Complex64 {
    let y = 1.0 / Complex64::new(0.01, 0.1);
    let v2 = Complex64::from_polar(v, th);
    v2 * (y * (v2 - Complex64::new(1.0, 0.0))).conj()
}

fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    let flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn two_bus_power_flow_matches_grid_search_oracle() {
    let target = Complex64::new(-0.5, -0.2);
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for i in 0..=400 {
        for j in 0..=400 {
            let v = 0.8 + 0.3 * i as f64 / 400.0;
            let th = -0.3 + 0.3 * j as f64 / 400.0;
            let r = (two_bus_injection(v, th) - target).norm();
            if r < best.0 {
                best = (r, v, th);
            }
        }
    }
    let step = (0.3 / 400.0) * 4.0;
    let theta_for = |v: f64| bisect(best.2 - step, best.2 + step, |th| two_bus_injection(v, th).re - target.re);
    let v_star = bisect(best.1 - step, best.1 + step, |v| two_bus_injection(v, theta_for(v)).im - target.im);
    let th_star = theta_for(v_star);

    let (case, _) = parse_case(TWO_BUS).unwrap();
    let start = OperatingPoint::flat(&case);
    let sol = newton_raphson_pf(&case, &PfSetpoints::from_point(&case, &start), &start).unwrap();
    assert!((sol.point.vm[1] - v_star).abs() < 1e-8, "{} vs {v_star}", sol.point.vm[1]);
    assert!((sol.point.va[1] - th_star).abs() < 1e-8, "{} vs {th_star}", sol.point.va[1]);
}

#[test]
fn zero_load_flat_start_is_a_fixed_point() {
    let (case, _) = parse_case(ZERO_LOAD_TRIANGLE).unwrap();
    let mut start = OperatingPoint::flat(&case);
    start.pg = vec![0.0; 2];
    start.qg = vec![0.0; 2];
    let sol = newton_raphson_pf(&case, &PfSetpoints::from_point(&case, &start), &start).unwrap();
    assert!(sol.iterations <= 1);
    assert!(sol.point.vm.iter().all(|v| (v - 1.0).abs() < 1e-12));
    assert!(sol.point.va.iter().all(|a| a.abs() < 1e-12));
}

#[test]
fn zero_load_network_recovers_in_one_iteration() {
    let (case, _) = parse_case(ZERO_LOAD_TRIANGLE).unwrap();
    let opts = RelaxationOptions {
        objective: ObjectiveKind::Cost,
        theta_u: 10f64.to_radians(),
        smax: None,
    };
    let r = run_acp(&case, &AcpConfig::default(), &opts, None).unwrap();
    assert_eq!(r.status, AcpStatus::FeasibleKkt);
    assert_eq!(r.trace.len(), 1);
    assert!(r.final_slack_sum() < 1e-6);
}

#[test]
fn matpower_round_trip_preserves_the_case() {
    for name in ["case9", "case14", "case30"] {
        let case = common::load(name);
        let (again, _) = parse_case(&write_matpower(&case)).unwrap();
        assert_eq!(again.buses.len(), case.buses.len());
        assert_eq!(again.base_mva, case.base_mva);
        for (a, b) in case.buses.iter().zip(&again.buses) {
            assert_eq!(a.id, b.id);
            assert_relative_eq!(a.pd, b.pd, epsilon = 1e-12);
            assert_relative_eq!(a.qd, b.qd, epsilon = 1e-12);
            assert_relative_eq!(a.vmax, b.vmax, epsilon = 1e-12);
        }
        for (a, b) in case.branches.iter().zip(&again.branches) {
            assert_relative_eq!(a.g, b.g, epsilon = 1e-9, max_relative = 1e-12);
            assert_relative_eq!(a.b, b.b, epsilon = 1e-9, max_relative = 1e-12);
            assert_relative_eq!(a.tap, b.tap, epsilon = 1e-12);
            assert_relative_eq!(a.shift, b.shift, epsilon = 1e-12);
        }
        for (a, b) in case.generators.iter().zip(&again.generators) {
            assert_relative_eq!(a.pmax, b.pmax, epsilon = 1e-12);
            assert_eq!(a.cost.per_unit(100.0), b.cost.per_unit(100.0));
        }
    }
}

/// Power-flow solution of a bundled case from its stored dispatch.
fn solved(name: &str) -> (acp_opf::case::NetworkCase, OperatingPoint) {
    let case = common::load(name);
    let start = OperatingPoint::flat(&case);
    let sol = newton_raphson_pf(&case, &PfSetpoints::from_point(&case, &start), &start).unwrap();
    (case, sol.point)
}

#[test]
fn lifted_flows_equal_polar_flows_and_loss_identity_holds() {
    for name in ["case9", "case14", "case57"] {
        let (case, p) = solved(name);
        let opts = RelaxationOptions {
            objective: ObjectiveKind::Loss,
            theta_u: 60f64.to_radians(),
            smax: None,
        };
        let art = build_socpt(&case, &opts).unwrap();
        let x = lift_point(&case, &art.varmap, &p.vm, &p.va, &p.pg, &p.qg);
        let flows = branch_flows(&case, &p.vm, &p.va);
        let mut series_loss = 0.0;
        for (e, br) in case.branches.iter().enumerate() {
            let lifted = flow_expressions(&case, &art.varmap, e);
            for side in 0..4 {
                assert!((lifted[side].eval(&x) - flows[e][side]).abs() < 1e-10);
            }
            let v = &art.varmap.branches[e];
            let (ui, uj) = (x[art.varmap.buses[br.from].u], x[art.varmap.buses[br.to].u]);
            series_loss += br.g * (ui / (br.tap * br.tap) + uj - 2.0 * x[v.k] / br.tap);
            assert!((flows[e][0] + flows[e][2] - br.g * (ui / (br.tap * br.tap) + uj - 2.0 * x[v.k] / br.tap)).abs() < 1e-10);
        }
        let shunt: f64 = case.buses.iter().zip(&p.vm).map(|(b, v)| b.gsh * v * v).sum();
        let gen: f64 = p.pg.iter().sum();
        assert!((gen - case.total_load() - shunt - series_loss).abs() < 1e-7, "{name}");
    }
}

#[test]
fn power_flow_output_passes_model_one_balance() {
    for name in ["case9", "case30"] {
        let (case, p) = solved(name);
        let limits = CheckLimits {
            theta_u: 60f64.to_radians(),
            smax: None,
            objective: ObjectiveKind::Cost,
        };
        let r = evaluate_model1(&case, &p, &limits, None).unwrap();
        assert!(r.violations.active_balance <= 1e-7 && r.violations.reactive_balance <= 1e-7);
        assert!(r.violations.lifted.max() <= 1e-12);
        assert!(r.pf_converged);
    }
}

#[test]
fn relaxation_contains_every_feasible_ac_point() {
    for name in ["case9", "case14", "case30"] {
        let (mut case, p) = solved(name);
        for (i, b) in case.buses.iter_mut().enumerate() {
            b.vmin = b.vmin.min(p.vm[i] - 0.01);
            b.vmax = b.vmax.max(p.vm[i] + 0.01);
        }
        for (g, gen) in case.generators.iter_mut().enumerate() {
            gen.qmin = gen.qmin.min(p.qg[g] - 0.01);
            gen.qmax = gen.qmax.max(p.qg[g] + 0.01);
            gen.pmin = gen.pmin.min(p.pg[g] - 0.01);
            gen.pmax = gen.pmax.max(p.pg[g] + 0.01);
        }
        for br in &mut case.branches {
            br.smax = None;
        }
        let opts = RelaxationOptions {
            objective: ObjectiveKind::Cost,
            theta_u: 60f64.to_radians(),
            smax: None,
        };
        let art = build_socpt(&case, &opts).unwrap();
        let x = lift_point(&case, &art.varmap, &p.vm, &p.va, &p.pg, &p.qg);
        let full = complete_point(&art.program, &art.varmap, &x);
        assert!(art.program.max_violation(&full) < 1e-9, "{name}: {}", art.program.max_violation(&full));
        let res = conic::solve(&art.program, &Tolerances::default()).unwrap();
        let at_point = ObjectiveKind::Cost.evaluate(&case, &p.pg);
        assert!(res.objective <= at_point + 1e-6 * at_point.abs());
    }
}

fn loss_fourteen() -> (acp_opf::case::NetworkCase, RelaxationOptions, AcpConfig) {
    let spec = common::loss_run("case14", 0.635);
    let case = spec.load_case().unwrap();
    let opts = RelaxationOptions {
        objective: ObjectiveKind::Loss,
        theta_u: spec.theta_u(),
        smax: None,
    };
    (case, opts, spec.acp)
}

#[test]
fn penalized_objective_is_nonincreasing_at_fixed_weight() {
    let (case, opts, cfg) = loss_fourteen();
    let cfg = AcpConfig {
        tau0: 10.0,
        tau_max: 10.0,
        stopping: acp_opf::acp::StoppingRule::ObjectiveChange,
        max_iters: 15,
        ..cfg
    };
    let r = run_acp(&case, &cfg, &opts, None).unwrap();
    assert!(r.trace.len() >= 2);
    // Slack sums at the solver noise floor (about 1e-6) move the value by tau times that.
    let noise = cfg.tau_max * 2e-6;
    for w in r.trace.windows(2) {
        let (a, b) = (w[0].objective_penalized, w[1].objective_penalized);
        assert!(b <= a + noise, "{a} -> {b}");
        assert_eq!(w[1].tau, cfg.tau_max);
    }
}

#[test]
fn penalty_weight_follows_the_geometric_schedule() {
    let (case, opts, cfg) = loss_fourteen();
    let cfg = AcpConfig {
        stopping: acp_opf::acp::StoppingRule::ObjectiveChange,
        max_iters: 25,
        ..cfg
    };
    let r = run_acp(&case, &cfg, &opts, None).unwrap();
    assert!(r.trace.iter().any(|it| it.tau == cfg.tau_max));
    assert_eq!(r.trace[0].tau, cfg.tau0);
    for w in r.trace.windows(2) {
        assert_eq!(w[1].tau, (w[0].tau * cfg.mu).min(cfg.tau_max));
    }
}

#[test]
fn previous_iterate_is_feasible_for_the_next_subproblem() {
    let (case, opts, cfg) = loss_fourteen();
    let r = run_acp(&case, &cfg, &opts, None).unwrap();
    let model = DcModel::new(&case, &opts, cfg.angle_model).unwrap();
    for it in &r.trace {
        let program = model.subproblem(&it.x, cfg.tau_max, Execution::Sequential).unwrap();
        let full = program.complete_auxiliaries(&it.x);
        assert!(program.max_violation(&full) < 1e-6, "iterate {}: {}", it.k, program.max_violation(&full));
    }
}

#[test]
fn feasible_lift_gives_a_zero_slack_subproblem() {
    let (case, p) = solved("case9");
    let opts = RelaxationOptions {
        objective: ObjectiveKind::Cost,
        theta_u: 60f64.to_radians(),
        smax: None,
    };
    let mut wide = case.clone();
    for (g, gen) in wide.generators.iter_mut().enumerate() {
        gen.qmin = gen.qmin.min(p.qg[g] - 0.01);
        gen.qmax = gen.qmax.max(p.qg[g] + 0.01);
    }
    let model = DcModel::new(&wide, &opts, Default::default()).unwrap();
    let x = lift_point(&wide, &model.varmap, &p.vm, &p.va, &p.pg, &p.qg);
    assert_eq!(model.varmap.slack_sum(&x), 0.0);
    let program = model.subproblem(&x, 1e5, Execution::Sequential).unwrap();
    let full = program.complete_auxiliaries(&x);
    assert!(program.max_violation(&full) < 1e-9);
    let res = conic::solve(&program, &Tolerances::default()).unwrap();
    let at_lift = ObjectiveKind::Cost.evaluate(&wide, &p.pg);
    assert!(res.objective <= at_lift + 1e-6 * at_lift);
}

#[test]
fn truncated_run_is_not_certified() {
    let (case, opts, _) = loss_fourteen();
    let cfg = AcpConfig {
        tau0: 1e-3,
        tau_max: 1e-3,
        max_iters: 1,
        ..AcpConfig::default()
    };
    let r = run_acp(&case, &cfg, &opts, None).unwrap();
    assert!(!check_kkt_certificate(&case, &r, 1e-5));
    let mut forged = r.clone();
    forged.status = AcpStatus::FeasibleKkt;
    if let Some(last) = forged.trace.last_mut() {
        last.slack_sum = 0.1;
    }
    assert!(!check_kkt_certificate(&case, &forged, 1e-5));
}

#[test]
fn parallel_and_sequential_subproblems_agree() {
    let (case, opts, cfg) = loss_fourteen();
    let model = DcModel::new(&case, &opts, cfg.angle_model).unwrap();
    let (_, p) = solved("case14");
    let x = lift_point(&case, &model.varmap, &p.vm, &p.va, &p.pg, &p.qg);
    let a = model.subproblem(&x, 10.0, Execution::Sequential).unwrap();
    let b = model.subproblem(&x, 10.0, Execution::Parallel).unwrap();
    assert_eq!(a.dump(), b.dump());
}
