//! Acceptance suite: one line per criterion, exit status reflects the binding ones.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use acp_opf::acp::{dc_pairs_for_branch, taylor_cos, AcpStatus, AngleModel, DcModel, StoppingRule};
use acp_opf::conic::{ConicProgram, LinExpr, QuadraticForm};
use acp_opf::par::Execution;
use acp_opf::pipeline::{run_prepared, RunReport, RunSpec};
use acp_opf::relaxation::{cosine_upper, mccormick_rows, sine_lower, sine_upper, ObjectiveKind, RelaxationOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CONGESTED_OBJECTIVE: f64 = 5412.98;
const CONGESTED_REL_TOL: f64 = 1e-3;
const CONGESTED_SLACK_MAX: f64 = 1e-5;
const CONGESTED_MAX_SOLVES: usize = 10;
const CONGESTED_MAX_SECONDS: f64 = 10.0;

const LARGE_ANGLE_VM: [f64; 9] = [1.000, 1.100, 1.100, 0.931, 0.942, 1.054, 1.030, 1.047, 0.926];
const LARGE_ANGLE_VA_DEG: [f64; 9] = [0.0, -26.305, -28.262, -33.251, -35.482, -31.043, -32.899, -30.564, -36.327];
const LARGE_ANGLE_VM_TOL: f64 = 0.002;
const LARGE_ANGLE_VA_TOL_DEG: f64 = 0.05;
const LARGE_ANGLE_MAX_PF_ITERS: usize = 3;

const SANDWICH_REL_TOL: f64 = 1e-6;
const TAYLOR_SMALL_TOL: f64 = 1e-10;
const TAYLOR_WIDE_TOL: f64 = 1e-3;
const MONOTONE_REL_TOL: f64 = 1e-7;
const POLAR_TOL: f64 = 1e-4;
const LIFTED_TOL: f64 = 1e-5;

const LOSS_REFERENCES: [(&str, f64); 3] = [("case14", 0.635), ("case30", 1.777), ("case57", 12.148)];
const STRETCH_REFERENCE: (&str, f64) = ("case118", 10.667);
const LOSS_ADVISORY_REL_TOL: f64 = 0.02;
const LOSS_GAP_MAX_PERCENT: f64 = 0.5;
const STRETCH_MAX_SECONDS: f64 = 300.0;

const ENVELOPE_SAMPLES: usize = 10_000;
/// Rounding in `sin² + cos² - 1` and the envelope arithmetic.
const ENVELOPE_ROUNDOFF: f64 = 4.0 * f64::EPSILON;
const GRADIENT_REL_TOL: f64 = 1e-6;
const LOWERING_POINTS: usize = 1_000;

struct Line {
    id: u8,
    binding: bool,
    pass: bool,
    detail: String,
}

fn run(spec: &RunSpec, case: &acp_opf::case::NetworkCase) -> (RunReport, f64) {
    let start = Instant::now();
    let report = run_prepared(spec, case, Execution::default()).expect("run completes");
    (report, start.elapsed().as_secs_f64())
}

fn prepared(spec: &RunSpec) -> acp_opf::case::NetworkCase {
    spec.load_case().expect("case loads")
}

fn acp_objective(r: &RunReport) -> f64 {
    r.acp.as_ref().and_then(|a| a.objective).unwrap_or(f64::NAN)
}

fn criterion_1(r: &RunReport, secs: f64) -> Line {
    let acp = r.acp.as_ref().unwrap();
    let obj = acp_objective(r);
    let rel = (obj - CONGESTED_OBJECTIVE).abs() / CONGESTED_OBJECTIVE;
    let pass = rel <= CONGESTED_REL_TOL
        && acp.final_slack_sum <= CONGESTED_SLACK_MAX
        && acp.total_solves <= CONGESTED_MAX_SOLVES
        && secs <= CONGESTED_MAX_SECONDS;
    Line {
        id: 1,
        binding: true,
        pass,
        detail: format!(
            "9-bus congested: objective {obj:.2} (rel err {rel:.2e}), slack {:.1e}, solves {}, {secs:.2} s",
            acp.final_slack_sum, acp.total_solves
        ),
    }
}

fn criterion_2(runs: &[(&str, &RunReport)]) -> Line {
    let mut worst = f64::NEG_INFINITY;
    let mut pass = true;
    for (_, r) in runs {
        let lower = r.relaxation.as_ref().unwrap().objective;
        let upper = acp_objective(r);
        let excess = (lower - upper) / upper.abs().max(1.0);
        worst = worst.max(excess);
        pass &= upper.is_finite() && excess <= SANDWICH_REL_TOL;
    }
    Line {
        id: 2,
        binding: true,
        pass,
        detail: format!("relaxation below recovered objective on {} runs, worst (lower-upper)/upper {worst:.2e}", runs.len()),
    }
}

fn criterion_3(r: &RunReport) -> Line {
    let sol = r.solution.as_ref().unwrap();
    let dv = sol.buses.iter().zip(LARGE_ANGLE_VM).map(|(b, v)| (b.vm_pu - v).abs()).fold(0.0, f64::max);
    let da = sol.buses.iter().zip(LARGE_ANGLE_VA_DEG).map(|(b, a)| (b.va_deg - a).abs()).fold(0.0, f64::max);
    let feas = r.feasibility.as_ref().unwrap();
    let iters = feas.pf_iterations.unwrap_or(usize::MAX);
    let pass = dv <= LARGE_ANGLE_VM_TOL && da <= LARGE_ANGLE_VA_TOL_DEG && feas.pf_converged && iters <= LARGE_ANGLE_MAX_PF_ITERS;
    Line {
        id: 3,
        binding: true,
        pass,
        detail: format!("large-angle 9-bus: max |dV| {dv:.4} p.u., max |dtheta| {da:.4} deg, power flow {iters} iterations"),
    }
}

fn sweep_max(deg: f64) -> f64 {
    (0..=100_000)
        .map(|i| (-deg + 2.0 * deg * i as f64 / 100_000.0).to_radians())
        .map(|t| (t.cos() - taylor_cos(t)).abs())
        .fold(0.0, f64::max)
}

fn criterion_4() -> Line {
    let (small, wide) = (sweep_max(10.0), sweep_max(90.0));
    Line {
        id: 4,
        binding: true,
        pass: small < TAYLOR_SMALL_TOL && wide < TAYLOR_WIDE_TOL,
        detail: format!("cosine Taylor error {small:.2e} on +-10 deg, {wide:.2e} on +-90 deg"),
    }
}

fn criterion_5(runs: &[(&str, &RunReport)]) -> Line {
    let mut windows = 0;
    let mut worst = f64::NEG_INFINITY;
    let mut offender = String::new();
    for (name, r) in runs {
        let acp = r.acp.as_ref().unwrap();
        let tau_max = r.spec.acp.tau_max;
        for w in acp.trace.windows(2) {
            if w[0].tau == tau_max && w[1].tau == tau_max {
                windows += 1;
                let rise = (w[1].v_penalized - w[0].v_penalized) / w[0].v_penalized.abs().max(1.0);
                if rise > worst {
                    worst = rise;
                    offender = format!("{name} k={}", w[1].k);
                }
            }
        }
    }
    let detail = if windows == 0 {
        "no run spent two consecutive iterations at tau_max".to_string()
    } else {
        format!("{windows} consecutive pairs at tau_max, worst relative rise {worst:.2e} ({offender})")
    };
    Line {
        id: 5,
        binding: true,
        pass: windows == 0 || worst <= MONOTONE_REL_TOL,
        detail,
    }
}

fn criterion_6(runs: &[(&str, &RunReport)]) -> Line {
    let mut checked = 0;
    let (mut polar, mut lifted) = (0.0f64, 0.0f64);
    for (_, r) in runs {
        if r.acp.as_ref().map(|a| a.status) != Some(AcpStatus::FeasibleKkt) {
            continue;
        }
        checked += 1;
        let v = &r.feasibility.as_ref().unwrap().violations;
        polar = polar.max(v.max_polar());
        lifted = lifted.max(v.lifted.max());
    }
    Line {
        id: 6,
        binding: true,
        pass: checked > 0 && polar <= POLAR_TOL && lifted <= LIFTED_TOL,
        detail: format!("{checked} FeasibleKkt runs: worst polar violation {polar:.2e} p.u., worst lifted residual {lifted:.2e}"),
    }
}

fn criterion_7(losses: &[(&str, f64, &RunReport, f64)], stretch: Option<(&RunReport, f64)>) -> Vec<Line> {
    let mut advisory = true;
    let mut gaps = true;
    let mut parts = Vec::new();
    for (name, reference, r, _) in losses {
        let obj = acp_objective(r);
        let rel = (obj - reference) / reference;
        let gap = r.feasibility.as_ref().and_then(|f| f.gap_percent).unwrap_or(f64::NAN);
        advisory &= rel.abs() <= LOSS_ADVISORY_REL_TOL;
        gaps &= r.acp.as_ref().unwrap().status == AcpStatus::FeasibleKkt && gap <= LOSS_GAP_MAX_PERCENT;
        parts.push(format!("{name} {obj:.4} MW ({:+.2}%)", 100.0 * rel));
    }
    let mut lines = vec![
        Line {
            id: 7,
            binding: false,
            pass: advisory,
            detail: format!("advisory 2% band on reference losses: {}", parts.join(", ")),
        },
        Line {
            id: 7,
            binding: true,
            pass: gaps,
            detail: format!(
                "binding gap <= {LOSS_GAP_MAX_PERCENT}% vs reference: {}",
                losses
                    .iter()
                    .map(|(n, _, r, _)| format!("{n} {:+.3}%", r.feasibility.as_ref().and_then(|f| f.gap_percent).unwrap_or(f64::NAN)))
                    .collect::<Vec<_>>()
                    .join(", ")
            ),
        },
    ];
    if let Some((r, secs)) = stretch {
        let gap = r.feasibility.as_ref().and_then(|f| f.gap_percent).unwrap_or(f64::NAN);
        let ok = r.acp.as_ref().unwrap().status == AcpStatus::FeasibleKkt && gap <= LOSS_GAP_MAX_PERCENT && secs <= STRETCH_MAX_SECONDS;
        lines.push(Line {
            id: 7,
            binding: false,
            pass: ok,
            detail: format!("stretch 118-bus: {:.4} MW, gap {gap:+.3}%, {secs:.1} s", acp_objective(r)),
        });
    }
    lines
}

fn criterion_8() -> Line {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for deg in [1.0, 10.0, 30.0, 40.0, 60.0, 89.0] {
        let tu = f64::to_radians(deg);
        for _ in 0..ENVELOPE_SAMPLES {
            let t = rng.gen_range(-tu..=tu);
            let (s, c) = t.sin_cos();
            worst = worst
                .max(s - sine_upper(t, tu))
                .max(sine_lower(t, tu) - s)
                .max(c - cosine_upper(t, tu))
                .max(tu.cos() - c)
                .max(s * s + c * c - 1.0);
        }
    }
    let mut corner = 0.0f64;
    for _ in 0..ENVELOPE_SAMPLES {
        let (xl, yl) = (rng.gen_range(-2.0..1.0), rng.gen_range(-2.0..1.0));
        let (xu, yu) = (xl + rng.gen_range(0.01..2.0), yl + rng.gen_range(0.01..2.0));
        let rows = mccormick_rows(xl, xu, yl, yu);
        for (x, y) in [(xl, yl), (xl, yu), (xu, yl), (xu, yu)] {
            let w = x * y;
            let tight = rows.iter().filter(|(c, rhs)| (c[0] * w + c[1] * x + c[2] * y - rhs).abs() < 1e-12).count();
            let slack = rows.iter().map(|(c, rhs)| c[0] * w + c[1] * x + c[2] * y - rhs).fold(f64::NEG_INFINITY, f64::max);
            corner = corner.max(slack.max(0.0));
            if tight < 2 {
                corner = corner.max(1.0);
            }
        }
    }
    Line {
        id: 8,
        binding: true,
        pass: worst <= ENVELOPE_ROUNDOFF && corner <= 1e-12,
        detail: format!(
            "{} envelope samples, worst violation {worst:.1e}; {} McCormick boxes, corner error {corner:.1e}",
            6 * ENVELOPE_SAMPLES,
            ENVELOPE_SAMPLES
        ),
    }
}

fn gradient_error() -> (usize, f64) {
    let case = common::load("case9");
    let opts = RelaxationOptions {
        objective: ObjectiveKind::Cost,
        theta_u: 30f64.to_radians(),
        smax: None,
    };
    let model = DcModel::new(&case, &opts, AngleModel::Taylor6Sine).unwrap();
    let n = model.varmap.num_symbols;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst = 0.0f64;
    let mut checked = 0;
    for _ in 0..20 {
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.5..1.5)).collect();
        for e in 0..case.branches.len() {
            for pair in dc_pairs_for_branch(&case, &model.varmap, e) {
                for q in [&pair.f, &pair.g] {
                    let mut grad = vec![0.0; n];
                    for (i, c) in q.gradient(&x) {
                        grad[i] += c;
                    }
                    for (i, &gi) in grad.iter().enumerate() {
                        let h = 1e-5 * x[i].abs().max(1.0);
                        let (mut a, mut b) = (x.clone(), x.clone());
                        a[i] += h;
                        b[i] -= h;
                        let fd = (q.eval(&a) - q.eval(&b)) / (2.0 * h);
                        worst = worst.max((gi - fd).abs() / gi.abs().max(fd.abs()).max(1.0));
                        checked += 1;
                    }
                }
            }
        }
    }
    (checked, worst)
}

/// Counts sample points where the lowered program and the direct inequality disagree.
fn lowering_mismatches(program: ConicProgram, n: usize, direct: impl Fn(&[f64]) -> f64, seed: u64) -> usize {
    let fin = program.finalize();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bad = 0;
    for _ in 0..LOWERING_POINTS {
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let margin = direct(&x);
        if margin.abs() < 1e-9 {
            continue;
        }
        let full = fin.complete_auxiliaries(&x);
        if (fin.max_violation(&full) <= 1e-12) != (margin < 0.0) {
            bad += 1;
        }
    }
    bad
}

fn lowering_forms() -> Vec<(&'static str, usize)> {
    let mut out = Vec::new();

    let mut p = ConicProgram::new();
    let x: Vec<usize> = (0..3).map(|i| p.free_variable(format!("x{i}"))).collect();
    let sq = vec![
        LinExpr::from_terms(&[(x[0], 1.0), (x[1], -0.5)], 0.2),
        LinExpr::from_terms(&[(x[2], 0.7)], 0.0),
    ];
    p.add_quadratic_leq(QuadraticForm::SumOfSquares(sq.clone()), &[(x[1], 0.3)], 1.5).unwrap();
    out.push(("sum-of-squares", lowering_mismatches(p, 3, |v| sq.iter().map(|e| e.eval(v).powi(2)).sum::<f64>() + 0.3 * v[1] - 1.5, 31)));

    let mut p = ConicProgram::new();
    let x: Vec<usize> = (0..3).map(|i| p.free_variable(format!("x{i}"))).collect();
    let q = vec![(x[0], x[0], 2.0), (x[0], x[1], 0.5), (x[1], x[1], 1.0), (x[2], x[2], 0.25)];
    p.add_quadratic_leq(QuadraticForm::Symmetric(q), &[(x[2], -1.0)], 2.0).unwrap();
    out.push((
        "symmetric",
        lowering_mismatches(p, 3, |v| 2.0 * v[0] * v[0] + v[0] * v[1] + v[1] * v[1] + 0.25 * v[2] * v[2] - v[2] - 2.0, 32),
    ));

    let mut p = ConicProgram::new();
    let (a, b, w) = (p.free_variable("a"), p.free_variable("b"), p.free_variable("w"));
    p.add_rotated_soc(a, b, &[LinExpr::var(w)]).unwrap();
    out.push((
        "rotated",
        lowering_mismatches(p, 3, |v| if v[0] < 0.0 || v[1] < 0.0 { 1.0 } else { v[2] * v[2] - 2.0 * v[0] * v[1] }, 33),
    ));

    let mut p = ConicProgram::new();
    let (s, c) = (p.free_variable("s"), p.free_variable("c"));
    p.add_affine_soc(&LinExpr::constant(1.0), &[LinExpr::var(s), LinExpr::var(c)]).unwrap();
    out.push(("affine", lowering_mismatches(p, 2, |v| v[0].hypot(v[1]) - 1.0, 34)));
    out
}

fn criterion_9() -> Line {
    let (checked, worst) = gradient_error();
    let forms = lowering_forms();
    let mismatches: usize = forms.iter().map(|(_, m)| m).sum();
    Line {
        id: 9,
        binding: true,
        pass: worst <= GRADIENT_REL_TOL && mismatches == 0,
        detail: format!(
            "{checked} gradient entries, worst relative error {worst:.1e}; lowering mismatches over {LOWERING_POINTS} points each: {}",
            forms.iter().map(|(n, m)| format!("{n} {m}")).collect::<Vec<_>>().join(", ")
        ),
    }
}

fn main() -> ExitCode {
    let table1 = common::congested_nine_bus();
    let (r1, t1) = run(&table1, &prepared(&table1));
    let (table2, case2) = common::large_angle_nine_bus();
    let (r2, _) = run(&table2, &case2);

    let mut losses = Vec::new();
    for (name, reference) in LOSS_REFERENCES {
        let spec = common::loss_run(name, reference);
        let (r, secs) = run(&spec, &prepared(&spec));
        losses.push((name, reference, r, secs));
    }
    let stretch = if std::env::var_os("ACCEPTANCE_SKIP_STRETCH").is_some() {
        None
    } else {
        let spec = common::loss_run(STRETCH_REFERENCE.0, STRETCH_REFERENCE.1);
        Some(run(&spec, &prepared(&spec)))
    };

    // Fixed penalty weight from the first iteration, so every step is taken at tau_max.
    let mut fixed = common::loss_run("case14", 0.635);
    fixed.acp.tau0 = 10.0;
    fixed.acp.tau_max = 10.0;
    fixed.acp.stopping = StoppingRule::ObjectiveChange;
    fixed.acp.max_iters = 20;
    let (r_fixed, _) = run(&fixed, &prepared(&fixed));

    let mut all: Vec<(&str, &RunReport)> = vec![("case9 congested", &r1), ("case9 large-angle", &r2), ("case14 fixed tau", &r_fixed)];
    all.extend(losses.iter().map(|(n, _, r, _)| (*n, r)));
    if let Some((r, _)) = &stretch {
        all.push((STRETCH_REFERENCE.0, r));
    }

    let loss_refs: Vec<(&str, f64, &RunReport, f64)> = losses.iter().map(|(n, f, r, s)| (*n, *f, r, *s)).collect();
    let mut lines = vec![criterion_1(&r1, t1), criterion_2(&all), criterion_3(&r2), criterion_4(), criterion_5(&all), criterion_6(&all)];
    lines.extend(criterion_7(&loss_refs, stretch.as_ref().map(|(r, s)| (r, *s))));
    lines.push(criterion_8());
    lines.push(criterion_9());

    let mut failed = 0;
    for l in &lines {
        let tag = match (l.pass, l.binding) {
            (true, _) => "PASS",
            (false, true) => "FAIL",
            (false, false) => "FAIL (advisory)",
        };
        println!("[{tag}] criterion {}: {}", l.id, l.detail);
        if l.binding && !l.pass {
            failed += 1;
        }
    }
    println!("acceptance: {} binding criteria failed", failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
