//! Solver-agnostic convex conic programs.
//!
//! A [`ConicProgram`] is assembled append-only, then [`ConicProgram::finalize`]d
//! into an immutable [`FinalizedProgram`] that any [`ConicBackend`] can solve.
//! Every cone is stored over affine expressions, `‖(e_1, …, e_k)‖₂ ≤ e_0`;
//! rotated cones and convex quadratic rows are lowered into that single form
//! when they are added.

use std::fmt::Write as _;
use std::time::Instant;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};
use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConicError {
    #[error("variable index {index} out of range for {n} variables")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("sparse row repeats column {0}")]
    DuplicateColumn(usize),
    #[error("quadratic form is not positive semidefinite (eigenvalue {0:e})")]
    NotPsd(f64),
    #[error("backend failure: {0}")]
    BackendFailure(String),
}

/// Affine form `Σ coef·x_idx + constant`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LinExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn var(i: usize) -> Self {
        Self::term(i, 1.0)
    }

    pub fn term(i: usize, coef: f64) -> Self {
        LinExpr {
            terms: vec![(i, coef)],
            constant: 0.0,
        }
    }

    pub fn constant(c: f64) -> Self {
        LinExpr {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn from_terms(terms: &[(usize, f64)], constant: f64) -> Self {
        LinExpr {
            terms: terms.to_vec(),
            constant,
        }
    }

    pub fn add_term(mut self, i: usize, coef: f64) -> Self {
        self.terms.push((i, coef));
        self
    }

    pub fn plus(mut self, other: &LinExpr, scale: f64) -> Self {
        self.terms.extend(other.terms.iter().map(|&(i, c)| (i, c * scale)));
        self.constant += other.constant * scale;
        self
    }

    pub fn scaled(mut self, s: f64) -> Self {
        self.terms.iter_mut().for_each(|t| t.1 *= s);
        self.constant *= s;
        self
    }

    /// Merges repeated columns and drops exact zeros.
    pub fn compact(mut self) -> Self {
        self.terms.sort_by_key(|t| t.0);
        let mut out: Vec<(usize, f64)> = Vec::with_capacity(self.terms.len());
        for (i, c) in self.terms {
            match out.last_mut() {
                Some(last) if last.0 == i => last.1 += c,
                _ => out.push((i, c)),
            }
        }
        out.retain(|t| t.1 != 0.0);
        self.terms = out;
        self
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(i, c)| c * x[i]).sum::<f64>() + self.constant
    }
}

/// A convex quadratic expression supplied to [`ConicProgram::add_quadratic_leq`].
#[derive(Debug, Clone, PartialEq)]
pub enum QuadraticForm {
    /// `Σ_k (a_k·x + c_k)²`.
    SumOfSquares(Vec<LinExpr>),
    /// `xᵀ Q x` from symmetric triplets; each off-diagonal pair is given once
    /// per triangle entry and mirrored.
    Symmetric(Vec<(usize, usize, f64)>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConstraintId {
    Equality(usize),
    Inequality(usize),
    Cone(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConeOrigin {
    Soc,
    RotatedSoc,
    Quadratic,
}

/// `head ≥ ‖tail‖₂` over affine expressions.
#[derive(Debug, Clone, PartialEq)]
pub struct Cone {
    pub head: LinExpr,
    pub tail: Vec<LinExpr>,
    pub origin: ConeOrigin,
}

impl Cone {
    /// Positive part of `‖tail‖ − head`.
    pub fn violation(&self, x: &[f64]) -> f64 {
        let norm = self.tail.iter().map(|e| e.eval(x).powi(2)).sum::<f64>().sqrt();
        (norm - self.head.eval(x)).max(0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearRow {
    pub terms: Vec<(usize, f64)>,
    pub rhs: f64,
}

impl LinearRow {
    pub fn lhs(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(i, c)| c * x[i]).sum()
    }
}

#[derive(Debug, Clone, Default)]
struct ProgramData {
    names: Vec<String>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    objective: LinExpr,
    equalities: Vec<LinearRow>,
    inequalities: Vec<LinearRow>,
    cones: Vec<Cone>,
    /// `(aux, equality row)` for each quadratic-lowering auxiliary.
    quad_aux: Vec<(usize, usize)>,
    /// `(epigraph variable, cone)` for each quadratic objective term.
    epigraphs: Vec<(usize, usize)>,
}

/// A conic program under construction.
#[derive(Debug, Clone, Default)]
pub struct ConicProgram {
    data: ProgramData,
}

impl ConicProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_vars(&self) -> usize {
        self.data.lower.len()
    }

    pub fn add_variable(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> usize {
        self.data.names.push(name.into());
        self.data.lower.push(lower);
        self.data.upper.push(upper);
        self.data.lower.len() - 1
    }

    pub fn free_variable(&mut self, name: impl Into<String>) -> usize {
        self.add_variable(name, f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) -> Result<(), ConicError> {
        self.check_index(var)?;
        self.data.lower[var] = lower;
        self.data.upper[var] = upper;
        Ok(())
    }

    pub fn bounds(&self, var: usize) -> (f64, f64) {
        (self.data.lower[var], self.data.upper[var])
    }

    fn check_index(&self, i: usize) -> Result<(), ConicError> {
        let n = self.num_vars();
        if i < n {
            Ok(())
        } else {
            Err(ConicError::IndexOutOfRange { index: i, n })
        }
    }

    fn check_row(&self, terms: &[(usize, f64)]) -> Result<(), ConicError> {
        let mut cols: Vec<usize> = terms.iter().map(|t| t.0).collect();
        for &c in &cols {
            self.check_index(c)?;
        }
        cols.sort_unstable();
        if let Some(w) = cols.windows(2).find(|w| w[0] == w[1]) {
            return Err(ConicError::DuplicateColumn(w[0]));
        }
        Ok(())
    }

    fn check_expr(&self, e: &LinExpr) -> Result<LinExpr, ConicError> {
        for &(i, _) in &e.terms {
            self.check_index(i)?;
        }
        Ok(e.clone().compact())
    }

    /// Adds `c·x` terms (and a constant) to the minimized objective.
    pub fn add_objective(&mut self, expr: &LinExpr) -> Result<(), ConicError> {
        let e = self.check_expr(expr)?;
        self.data.objective = std::mem::take(&mut self.data.objective).plus(&e, 1.0).compact();
        Ok(())
    }

    /// Adds a convex quadratic term to the objective through an epigraph
    /// variable `t ≥ quad`, so the backend only sees a linear objective.
    pub fn add_quadratic_objective(&mut self, quad: QuadraticForm) -> Result<usize, ConicError> {
        let t = self.free_variable("objective_epigraph");
        if let ConstraintId::Cone(c) = self.add_quadratic_leq(quad, &[(t, -1.0)], 0.0)? {
            self.data.epigraphs.push((t, c));
        }
        self.add_objective(&LinExpr::var(t))?;
        Ok(t)
    }

    pub fn add_equality(&mut self, terms: &[(usize, f64)], rhs: f64) -> Result<ConstraintId, ConicError> {
        self.check_row(terms)?;
        self.data.equalities.push(LinearRow {
            terms: terms.to_vec(),
            rhs,
        });
        Ok(ConstraintId::Equality(self.data.equalities.len() - 1))
    }

    /// `terms·x ≤ rhs`.
    pub fn add_inequality(&mut self, terms: &[(usize, f64)], rhs: f64) -> Result<ConstraintId, ConicError> {
        self.check_row(terms)?;
        self.data.inequalities.push(LinearRow {
            terms: terms.to_vec(),
            rhs,
        });
        Ok(ConstraintId::Inequality(self.data.inequalities.len() - 1))
    }

    /// `expr ≤ 0` for an affine expression.
    pub fn add_affine_leq(&mut self, expr: &LinExpr) -> Result<ConstraintId, ConicError> {
        let e = self.check_expr(expr)?;
        self.add_inequality(&e.terms, -e.constant)
    }

    /// `expr = 0` for an affine expression.
    pub fn add_affine_eq(&mut self, expr: &LinExpr) -> Result<ConstraintId, ConicError> {
        let e = self.check_expr(expr)?;
        self.add_equality(&e.terms, -e.constant)
    }

    /// `‖(x_t1, …, x_tk)‖₂ ≤ x_head`.
    pub fn add_soc(&mut self, head: usize, tail: &[usize]) -> Result<ConstraintId, ConicError> {
        self.check_index(head)?;
        for &t in tail {
            self.check_index(t)?;
        }
        self.push_cone(Cone {
            head: LinExpr::var(head),
            tail: tail.iter().map(|&t| LinExpr::var(t)).collect(),
            origin: ConeOrigin::Soc,
        })
    }

    /// `‖(e_1, …, e_k)‖₂ ≤ e_0` over affine expressions.
    pub fn add_affine_soc(&mut self, head: &LinExpr, tail: &[LinExpr]) -> Result<ConstraintId, ConicError> {
        let head = self.check_expr(head)?;
        let tail = tail
            .iter()
            .map(|e| self.check_expr(e))
            .collect::<Result<Vec<_>, _>>()?;
        self.push_cone(Cone {
            head,
            tail,
            origin: ConeOrigin::Soc,
        })
    }

    /// `‖v‖² ≤ 2·x_a·x_b` with `x_a, x_b ≥ 0`.
    pub fn add_rotated_soc(&mut self, a: usize, b: usize, tail: &[LinExpr]) -> Result<ConstraintId, ConicError> {
        self.check_index(a)?;
        self.check_index(b)?;
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let mut entries = vec![LinExpr::from_terms(&[(a, r), (b, -r)], 0.0).compact()];
        for e in tail {
            entries.push(self.check_expr(e)?);
        }
        self.push_cone(Cone {
            head: LinExpr::from_terms(&[(a, r), (b, r)], 0.0).compact(),
            tail: entries,
            origin: ConeOrigin::RotatedSoc,
        })
    }

    /// `quad(x) + lin·x ≤ rhs`, lowered to one second-order cone over a
    /// fresh auxiliary `t = rhs − lin·x`:
    /// `‖((t−1)/2, w_1, …, w_k)‖ ≤ (t+1)/2` with `quad = Σ w_k²`.
    pub fn add_quadratic_leq(
        &mut self,
        quad: QuadraticForm,
        lin: &[(usize, f64)],
        rhs: f64,
    ) -> Result<ConstraintId, ConicError> {
        self.check_row(lin)?;
        let squares = match quad {
            QuadraticForm::SumOfSquares(sq) => sq
                .iter()
                .map(|e| self.check_expr(e))
                .collect::<Result<Vec<_>, _>>()?,
            QuadraticForm::Symmetric(triplets) => {
                for &(i, j, _) in &triplets {
                    self.check_index(i)?;
                    self.check_index(j)?;
                }
                square_root_factor(&triplets)?
            }
        };
        let t = self.free_variable("quadratic_aux");
        let mut row = lin.to_vec();
        row.push((t, 1.0));
        if let ConstraintId::Equality(r) = self.add_equality(&row, rhs)? {
            self.data.quad_aux.push((t, r));
        }
        let mut tail = vec![LinExpr::from_terms(&[(t, 0.5)], -0.5)];
        tail.extend(squares);
        self.push_cone(Cone {
            head: LinExpr::from_terms(&[(t, 0.5)], 0.5),
            tail,
            origin: ConeOrigin::Quadratic,
        })
    }

    fn push_cone(&mut self, cone: Cone) -> Result<ConstraintId, ConicError> {
        self.data.cones.push(cone);
        Ok(ConstraintId::Cone(self.data.cones.len() - 1))
    }

    pub fn finalize(self) -> FinalizedProgram {
        FinalizedProgram { data: self.data }
    }
}

/// Factor `Q = Σ λ_k v_k v_kᵀ` into square terms `(√λ_k v_k·x)²`.
fn square_root_factor(triplets: &[(usize, usize, f64)]) -> Result<Vec<LinExpr>, ConicError> {
    let mut cols: Vec<usize> = triplets.iter().flat_map(|&(i, j, _)| [i, j]).collect();
    cols.sort_unstable();
    cols.dedup();
    let pos = |v: usize| cols.binary_search(&v).expect("collected above");
    let k = cols.len();
    let mut q = DMatrix::<f64>::zeros(k, k);
    for &(i, j, v) in triplets {
        let (a, b) = (pos(i), pos(j));
        if a == b {
            q[(a, a)] += v;
        } else {
            q[(a, b)] += v;
            q[(b, a)] += v;
        }
    }
    let eig = SymmetricEigen::new(q);
    let scale = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let mut out = Vec::new();
    for (idx, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda < -1e-10 * scale {
            return Err(ConicError::NotPsd(lambda));
        }
        if lambda <= 1e-14 * scale {
            continue;
        }
        let root = lambda.sqrt();
        let v = eig.eigenvectors.column(idx);
        let terms: Vec<(usize, f64)> = cols
            .iter()
            .enumerate()
            .map(|(r, &c)| (c, root * v[r]))
            .filter(|t| t.1 != 0.0)
            .collect();
        out.push(LinExpr { terms, constant: 0.0 });
    }
    Ok(out)
}

/// An immutable conic program, ready to solve.
#[derive(Debug, Clone)]
pub struct FinalizedProgram {
    data: ProgramData,
}

impl FinalizedProgram {
    pub fn num_vars(&self) -> usize {
        self.data.lower.len()
    }

    pub fn objective(&self) -> &LinExpr {
        &self.data.objective
    }

    pub fn equalities(&self) -> &[LinearRow] {
        &self.data.equalities
    }

    pub fn inequalities(&self) -> &[LinearRow] {
        &self.data.inequalities
    }

    pub fn cones(&self) -> &[Cone] {
        &self.data.cones
    }

    pub fn bounds(&self, var: usize) -> (f64, f64) {
        (self.data.lower[var], self.data.upper[var])
    }

    pub fn name(&self, var: usize) -> &str {
        &self.data.names[var]
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.data.objective.eval(x)
    }

    /// Largest absolute violation over bounds, rows and cones.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for (i, &v) in x.iter().enumerate() {
            worst = worst.max(self.data.lower[i] - v).max(v - self.data.upper[i]);
        }
        for row in &self.data.equalities {
            worst = worst.max((row.lhs(x) - row.rhs).abs());
        }
        for row in &self.data.inequalities {
            worst = worst.max(row.lhs(x) - row.rhs);
        }
        for cone in &self.data.cones {
            worst = worst.max(cone.violation(x));
        }
        worst
    }

    /// Extends `x` (covering the first `x.len()` variables) with the values
    /// implied for later columns: variables pinned by a single-term equality,
    /// tight objective epigraphs, and quadratic-lowering auxiliaries.
    pub fn complete_auxiliaries(&self, x: &[f64]) -> Vec<f64> {
        let d = &self.data;
        let mut full = x.to_vec();
        full.resize(self.num_vars(), 0.0);
        for row in &d.equalities {
            if let [(j, c)] = row.terms[..] {
                if j >= x.len() && c != 0.0 {
                    full[j] = row.rhs / c;
                }
            }
        }
        for &(t, c) in &d.epigraphs {
            if t >= x.len() {
                full[t] = d.cones[c].tail[1..].iter().map(|e| e.eval(&full).powi(2)).sum();
            }
        }
        for &(aux, r) in &d.quad_aux {
            if aux >= x.len() {
                let row = &d.equalities[r];
                let rest: f64 = row.terms.iter().filter(|t| t.0 != aux).map(|&(i, c)| c * full[i]).sum();
                full[aux] = row.rhs - rest;
            }
        }
        full
    }

    /// One-constraint-per-line text dump.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let expr = |e: &LinExpr| {
            let mut out = String::new();
            for &(i, c) in &e.terms {
                let _ = write!(out, "{c:+e}*x{i} ");
            }
            let _ = write!(out, "{:+e}", e.constant);
            out
        };
        let _ = writeln!(s, "vars {}", self.num_vars());
        for i in 0..self.num_vars() {
            let _ = writeln!(
                s,
                "var x{i} {} [{:e}, {:e}]",
                self.data.names[i], self.data.lower[i], self.data.upper[i]
            );
        }
        let _ = writeln!(s, "minimize {}", expr(&self.data.objective));
        for row in &self.data.equalities {
            let _ = writeln!(s, "eq {} = {:e}", expr(&LinExpr::from_terms(&row.terms, 0.0)), row.rhs);
        }
        for row in &self.data.inequalities {
            let _ = writeln!(s, "le {} <= {:e}", expr(&LinExpr::from_terms(&row.terms, 0.0)), row.rhs);
        }
        for cone in &self.data.cones {
            let tail: Vec<String> = cone.tail.iter().map(|e| format!("({})", expr(e))).collect();
            let _ = writeln!(s, "soc norm[{}] <= {}", tail.join(", "), expr(&cone.head));
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalTrouble,
    IterationLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    pub solve_time: f64,
    pub iterations: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub feasibility: f64,
    pub gap_abs: f64,
    pub gap_rel: f64,
    pub max_iter: u32,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            feasibility: 1e-7,
            gap_abs: 1e-7,
            gap_rel: 1e-7,
            max_iter: 200,
        }
    }
}

/// Contract for anything that can solve a finalized conic program.
pub trait ConicBackend {
    fn solve(&self, program: &FinalizedProgram, tol: &Tolerances) -> Result<SolveResult, ConicError>;
}

/// Interior-point backend built on the Clarabel solver.
#[derive(Debug, Clone, Copy, Default)]
pub struct InteriorPoint;

impl ConicBackend for InteriorPoint {
    fn solve(&self, program: &FinalizedProgram, tol: &Tolerances) -> Result<SolveResult, ConicError> {
        let start = Instant::now();
        let d = &program.data;
        let n = program.num_vars();

        let mut rows = RowBuilder::default();
        let mut cones = Vec::new();

        let zero_start = rows.b.len();
        for row in &d.equalities {
            rows.push(&row.terms, row.rhs);
        }
        for i in 0..n {
            if d.lower[i] == d.upper[i] {
                rows.push(&[(i, 1.0)], d.lower[i]);
            }
        }
        if rows.b.len() > zero_start {
            cones.push(SupportedConeT::ZeroConeT(rows.b.len() - zero_start));
        }

        let nonneg_start = rows.b.len();
        for row in &d.inequalities {
            rows.push(&row.terms, row.rhs);
        }
        for i in 0..n {
            if d.lower[i] == d.upper[i] {
                continue;
            }
            if d.lower[i].is_finite() {
                rows.push(&[(i, -1.0)], -d.lower[i]);
            }
            if d.upper[i].is_finite() {
                rows.push(&[(i, 1.0)], d.upper[i]);
            }
        }
        if rows.b.len() > nonneg_start {
            cones.push(SupportedConeT::NonnegativeConeT(rows.b.len() - nonneg_start));
        }

        for cone in &d.cones {
            let neg = |e: &LinExpr| -> Vec<(usize, f64)> { e.terms.iter().map(|&(i, c)| (i, -c)).collect() };
            rows.push(&neg(&cone.head), cone.head.constant);
            for e in &cone.tail {
                rows.push(&neg(e), e.constant);
            }
            cones.push(SupportedConeT::SecondOrderConeT(1 + cone.tail.len()));
        }

        let m = rows.b.len();
        let a = CscMatrix::new_from_triplets(m, n, rows.rows, rows.cols, rows.vals);
        let b = rows.b;
        let p = CscMatrix::<f64>::zeros((n, n));
        let mut q = vec![0.0; n];
        for &(i, c) in &d.objective.terms {
            q[i] += c;
        }
        let settings = |cautious: bool| {
            DefaultSettingsBuilder::default()
                .verbose(false)
                .tol_feas(tol.feasibility)
                .tol_gap_abs(tol.gap_abs)
                .tol_gap_rel(tol.gap_rel)
                .max_iter(tol.max_iter)
                .presolve_enable(false)
                .equilibrate_max_iter(if cautious { 50 } else { 10 })
                .max_step_fraction(if cautious { 0.95 } else { 0.99 })
                .build()
                .map_err(|e| ConicError::BackendFailure(format!("{e:?}")))
        };
        let attempt = |cautious: bool| -> Result<(SolveStatus, Vec<f64>, u32), ConicError> {
            let mut solver = DefaultSolver::new(&p, &q, &a, &b, &cones, settings(cautious)?)
                .map_err(|e| ConicError::BackendFailure(format!("{e:?}")))?;
            solver.solve();
            let sol = &solver.solution;
            let status = match sol.status {
                SolverStatus::Solved | SolverStatus::AlmostSolved => SolveStatus::Optimal,
                SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => SolveStatus::Infeasible,
                SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => SolveStatus::Unbounded,
                SolverStatus::MaxIterations | SolverStatus::MaxTime => SolveStatus::IterationLimit,
                _ => SolveStatus::NumericalTrouble,
            };
            Ok((status, sol.x.clone(), sol.iterations))
        };
        let (mut status, mut x, mut iterations) = attempt(false)?;
        if matches!(status, SolveStatus::NumericalTrouble | SolveStatus::IterationLimit) {
            let (s2, x2, it2) = attempt(true)?;
            if s2 == SolveStatus::Optimal {
                (status, x) = (s2, x2);
            }
            iterations += it2;
        }
        let objective = program.objective_value(&x);
        Ok(SolveResult {
            status,
            x,
            objective,
            solve_time: start.elapsed().as_secs_f64(),
            iterations,
        })
    }
}

/// Constraint rows in Clarabel's `s = b − A x` convention.
#[derive(Default)]
struct RowBuilder {
    rows: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    b: Vec<f64>,
}

impl RowBuilder {
    fn push(&mut self, terms: &[(usize, f64)], rhs: f64) {
        let r = self.b.len();
        for &(j, c) in terms {
            self.rows.push(r);
            self.cols.push(j);
            self.vals.push(c);
        }
        self.b.push(rhs);
    }
}

/// Solves with the default interior-point backend.
pub fn solve(program: &FinalizedProgram, tol: &Tolerances) -> Result<SolveResult, ConicError> {
    InteriorPoint.solve(program, tol)
}
