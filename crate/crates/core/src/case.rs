//! MATPOWER case files and the per-unit network model.
//!
//! The parser reads the `mpc.*` assignments of a MATPOWER version 2 case
//! script. Everything downstream of [`parse_case`] is in per-unit on the
//! case `baseMVA`; angles are radians. Generator cost coefficients keep the
//! MATPOWER convention ($/h as a polynomial in MW) and are rescaled by
//! [`CostCurve::per_unit`] where a per-unit objective is needed.

use std::collections::VecDeque;
use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CaseError {
    #[error("matrix `{matrix}` row {row}: expected {expected} columns, found {found}")]
    MalformedMatrix {
        matrix: String,
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("case file has no `mpc.{0}` assignment")]
    MissingField(String),
    #[error("could not parse `{token}` in `mpc.{field}`")]
    BadNumber { field: String, token: String },
    #[error("gencost row {row}: {reason}")]
    UnsupportedCost { row: usize, reason: String },
    #[error("network is disconnected; buses unreachable from bus {root}: {unreachable:?}")]
    DisconnectedNetwork { root: u32, unreachable: Vec<u32> },
    #[error("expected exactly one reference bus, found {0}")]
    ReferenceBus(usize),
    #[error("angle limit {0} rad is outside (0, pi/2)")]
    InvalidAngleLimit(f64),
    #[error("invalid data: {0}")]
    InvalidData(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BusType {
    Pq,
    Pv,
    Ref,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bus {
    pub id: u32,
    pub kind: BusType,
    pub pd: f64,
    pub qd: f64,
    pub gsh: f64,
    pub bsh: f64,
    pub vmin: f64,
    pub vmax: f64,
    /// Voltage magnitude and angle stored in the case (power flow start values).
    pub vm: f64,
    pub va: f64,
    pub base_kv: f64,
}

/// A branch oriented from `from` to `to`; both are positions in
/// [`NetworkCase::buses`], not MATPOWER bus numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub from: usize,
    pub to: usize,
    /// Series admittance `1 / (r + jx) = g + jb`.
    pub g: f64,
    pub b: f64,
    /// Total line-charging susceptance.
    pub bc: f64,
    pub tap: f64,
    pub shift: f64,
    pub smax: Option<f64>,
    pub thetamax: Option<f64>,
}

impl Branch {
    pub fn impedance(&self) -> (f64, f64) {
        let den = self.g * self.g + self.b * self.b;
        (self.g / den, -self.b / den)
    }

    /// Replaces the series impedance `r + jx`.
    pub fn set_impedance(&mut self, r: f64, x: f64) {
        let den = r * r + x * x;
        self.g = r / den;
        self.b = -x / den;
    }
}

/// Polynomial generator cost `c2 P^2 + c1 P + c0` with `P` in MW.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CostCurve {
    pub c2: f64,
    pub c1: f64,
    pub c0: f64,
}

impl CostCurve {
    /// Coefficients for the same curve as a function of per-unit output.
    pub fn per_unit(&self, base_mva: f64) -> CostCurve {
        CostCurve {
            c2: self.c2 * base_mva * base_mva,
            c1: self.c1 * base_mva,
            c0: self.c0,
        }
    }

    pub fn eval(&self, p: f64) -> f64 {
        (self.c2 * p + self.c1) * p + self.c0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    pub bus: usize,
    pub pg: f64,
    pub qg: f64,
    pub vg: f64,
    pub pmin: f64,
    pub pmax: f64,
    pub qmin: f64,
    pub qmax: f64,
    pub cost: CostCurve,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkCase {
    pub base_mva: f64,
    pub buses: Vec<Bus>,
    pub branches: Vec<Branch>,
    pub generators: Vec<Generator>,
    /// Incident branch indices for every bus.
    pub adjacency: Vec<Vec<usize>>,
}

impl NetworkCase {
    /// Assembles a case from parts, deriving adjacency and checking invariants.
    pub fn new(
        base_mva: f64,
        buses: Vec<Bus>,
        branches: Vec<Branch>,
        generators: Vec<Generator>,
    ) -> Result<Self, CaseError> {
        let mut adjacency = vec![Vec::new(); buses.len()];
        for (k, br) in branches.iter().enumerate() {
            if br.from >= buses.len() || br.to >= buses.len() {
                return Err(CaseError::InvalidData(format!(
                    "branch {k} references a missing bus"
                )));
            }
            adjacency[br.from].push(k);
            adjacency[br.to].push(k);
        }
        let case = NetworkCase {
            base_mva,
            buses,
            branches,
            generators,
            adjacency,
        };
        case.validate()?;
        Ok(case)
    }

    fn validate(&self) -> Result<(), CaseError> {
        if !(self.base_mva > 0.0) {
            return Err(CaseError::InvalidData("baseMVA must be positive".into()));
        }
        for bus in &self.buses {
            if !(bus.vmin > 0.0) || bus.vmin > bus.vmax {
                return Err(CaseError::InvalidData(format!(
                    "bus {}: voltage bounds [{}, {}]",
                    bus.id, bus.vmin, bus.vmax
                )));
            }
        }
        for (k, br) in self.branches.iter().enumerate() {
            if br.from == br.to {
                return Err(CaseError::InvalidData(format!("branch {k} is a self loop")));
            }
            if !(br.tap > 0.0) {
                return Err(CaseError::InvalidData(format!("branch {k}: tap {}", br.tap)));
            }
            if !(br.g.is_finite() && br.b.is_finite()) {
                return Err(CaseError::InvalidData(format!("branch {k}: zero impedance")));
            }
            if let Some(s) = br.smax {
                if !(s > 0.0) {
                    return Err(CaseError::InvalidData(format!("branch {k}: smax {s}")));
                }
            }
            if let Some(t) = br.thetamax {
                if !(t > 0.0 && t < FRAC_PI_2) {
                    return Err(CaseError::InvalidAngleLimit(t));
                }
            }
        }
        for (k, gen) in self.generators.iter().enumerate() {
            if gen.bus >= self.buses.len() {
                return Err(CaseError::InvalidData(format!("generator {k}: missing bus")));
            }
            if gen.pmin > gen.pmax || gen.qmin > gen.qmax {
                return Err(CaseError::InvalidData(format!("generator {k}: inverted bounds")));
            }
            if gen.cost.c2 < 0.0 {
                return Err(CaseError::UnsupportedCost {
                    row: k + 1,
                    reason: "negative quadratic coefficient".into(),
                });
            }
        }
        let refs = self.buses.iter().filter(|b| b.kind == BusType::Ref).count();
        if refs != 1 {
            return Err(CaseError::ReferenceBus(refs));
        }
        self.check_connected()
    }

    fn check_connected(&self) -> Result<(), CaseError> {
        if self.buses.is_empty() {
            return Ok(());
        }
        let mut seen = vec![false; self.buses.len()];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(i) = queue.pop_front() {
            for &k in &self.adjacency[i] {
                let br = &self.branches[k];
                let j = if br.from == i { br.to } else { br.from };
                if !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        let unreachable: Vec<u32> = self
            .buses
            .iter()
            .zip(&seen)
            .filter(|(_, s)| !**s)
            .map(|(b, _)| b.id)
            .collect();
        if unreachable.is_empty() {
            Ok(())
        } else {
            Err(CaseError::DisconnectedNetwork {
                root: self.buses[0].id,
                unreachable,
            })
        }
    }

    pub fn ref_bus(&self) -> usize {
        self.buses
            .iter()
            .position(|b| b.kind == BusType::Ref)
            .expect("validated case has a reference bus")
    }

    pub fn bus_index(&self, id: u32) -> Option<usize> {
        self.buses.iter().position(|b| b.id == id)
    }

    pub fn total_load(&self) -> f64 {
        self.buses.iter().map(|b| b.pd).sum()
    }

    /// Generator indices attached to each bus.
    pub fn generators_at(&self) -> Vec<Vec<usize>> {
        let mut at = vec![Vec::new(); self.buses.len()];
        for (g, gen) in self.generators.iter().enumerate() {
            at[gen.bus].push(g);
        }
        at
    }
}

/// Something in the source file that was read but not modelled.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseWarning(pub String);

/// Parses MATPOWER case text. Unsupported fields are skipped and reported
/// in the returned warning list.
pub fn parse_case(text: &str) -> Result<(NetworkCase, Vec<ParseWarning>), CaseError> {
    let mut warnings = Vec::new();
    let fields = scan_assignments(&strip_comments(text), &mut warnings);

    let lookup = |name: &str| fields.iter().find(|(n, _)| n == name).map(|(_, v)| v);
    let base_mva = match lookup("baseMVA") {
        Some(Value::Scalar(s)) => parse_number("baseMVA", s)?,
        Some(_) => return Err(CaseError::MissingField("baseMVA".into())),
        None => return Err(CaseError::MissingField("baseMVA".into())),
    };
    let matrix = |name: &str| -> Result<Vec<Vec<f64>>, CaseError> {
        match lookup(name) {
            Some(Value::Matrix(body)) => parse_matrix(name, body),
            _ => Err(CaseError::MissingField(name.into())),
        }
    };
    let bus_rows = matrix("bus")?;
    let gen_rows = matrix("gen")?;
    let branch_rows = matrix("branch")?;
    let cost_rows = matrix("gencost")?;
    require_width("bus", &bus_rows, 13)?;
    require_width("gen", &gen_rows, 10)?;
    require_width("branch", &branch_rows, 11)?;
    require_width("gencost", &cost_rows, 5)?;

    for (name, _) in &fields {
        if !matches!(name.as_str(), "version" | "baseMVA" | "bus" | "gen" | "branch" | "gencost") {
            warnings.push(ParseWarning(format!("ignored unsupported field mpc.{name}")));
        }
    }

    let mut buses = Vec::new();
    let mut bus_pos = std::collections::HashMap::new();
    for row in &bus_rows {
        let id = row[0] as u32;
        let kind = match row[1] as i64 {
            1 => BusType::Pq,
            2 => BusType::Pv,
            3 => BusType::Ref,
            4 => {
                warnings.push(ParseWarning(format!("dropped isolated bus {id}")));
                continue;
            }
            other => {
                return Err(CaseError::InvalidData(format!("bus {id}: unknown type {other}")))
            }
        };
        bus_pos.insert(id, buses.len());
        buses.push(Bus {
            id,
            kind,
            pd: row[2] / base_mva,
            qd: row[3] / base_mva,
            gsh: row[4] / base_mva,
            bsh: row[5] / base_mva,
            vm: row[7],
            va: row[8].to_radians(),
            base_kv: row[9],
            vmax: row[11],
            vmin: row[12],
        });
    }

    let mut branches = Vec::new();
    for (k, row) in branch_rows.iter().enumerate() {
        if row[10] <= 0.0 {
            warnings.push(ParseWarning(format!("dropped out-of-service branch {}", k + 1)));
            continue;
        }
        let (from, to) = match (bus_pos.get(&(row[0] as u32)), bus_pos.get(&(row[1] as u32))) {
            (Some(&f), Some(&t)) => (f, t),
            _ => {
                warnings.push(ParseWarning(format!(
                    "dropped branch {} touching a missing or isolated bus",
                    k + 1
                )));
                continue;
            }
        };
        let (r, x) = (row[2], row[3]);
        let den = r * r + x * x;
        let angle_limit = if row.len() >= 13 {
            let lim = row[11].abs().min(row[12].abs());
            (lim > 0.0 && lim < 90.0).then(|| lim.to_radians())
        } else {
            None
        };
        branches.push(Branch {
            from,
            to,
            g: r / den,
            b: -x / den,
            bc: row[4],
            tap: if row[8] == 0.0 { 1.0 } else { row[8] },
            shift: row[9].to_radians(),
            smax: (row[5] > 0.0).then(|| row[5] / base_mva),
            thetamax: angle_limit,
        });
    }

    let ng = gen_rows.len();
    if cost_rows.len() < ng {
        return Err(CaseError::InvalidData(format!(
            "gencost has {} rows for {ng} generators",
            cost_rows.len()
        )));
    }
    if cost_rows.len() > ng {
        warnings.push(ParseWarning("ignored reactive power cost rows".into()));
    }
    let mut generators = Vec::new();
    let mut extended_columns = false;
    for (k, row) in gen_rows.iter().enumerate() {
        let cost = parse_cost(k + 1, &cost_rows[k])?;
        if row[7] <= 0.0 {
            warnings.push(ParseWarning(format!("dropped out-of-service generator {}", k + 1)));
            continue;
        }
        if row.len() > 10 && row[10..].iter().any(|v| *v != 0.0) {
            extended_columns = true;
        }
        let bus = *bus_pos.get(&(row[0] as u32)).ok_or_else(|| {
            CaseError::InvalidData(format!("generator {} at missing bus {}", k + 1, row[0]))
        })?;
        generators.push(Generator {
            bus,
            pg: row[1] / base_mva,
            qg: row[2] / base_mva,
            qmax: row[3] / base_mva,
            qmin: row[4] / base_mva,
            vg: row[5],
            pmax: row[8] / base_mva,
            pmin: row[9] / base_mva,
            cost,
        });
    }
    if extended_columns {
        warnings.push(ParseWarning(
            "ignored generator capability/ramp columns 11 and beyond".into(),
        ));
    }

    let case = NetworkCase::new(base_mva, buses, branches, generators)?;
    Ok((case, warnings))
}

fn parse_cost(row_no: usize, row: &[f64]) -> Result<CostCurve, CaseError> {
    let model = row[0] as i64;
    if model == 1 {
        return Err(CaseError::UnsupportedCost {
            row: row_no,
            reason: "piecewise-linear cost".into(),
        });
    }
    if model != 2 {
        return Err(CaseError::UnsupportedCost {
            row: row_no,
            reason: format!("unknown cost model {model}"),
        });
    }
    let n = row[3] as usize;
    if row.len() < 4 + n {
        return Err(CaseError::MalformedMatrix {
            matrix: "gencost".into(),
            row: row_no,
            expected: 4 + n,
            found: row.len(),
        });
    }
    let coeffs = &row[4..4 + n];
    // Highest order first; leading zeros do not raise the degree.
    let first_nonzero = coeffs.iter().position(|c| *c != 0.0).unwrap_or(n);
    if n.saturating_sub(first_nonzero) > 3 {
        return Err(CaseError::UnsupportedCost {
            row: row_no,
            reason: format!("polynomial degree {} > 2", n - first_nonzero - 1),
        });
    }
    let at = |power: usize| if power < n { coeffs[n - 1 - power] } else { 0.0 };
    let cost = CostCurve {
        c2: at(2),
        c1: at(1),
        c0: at(0),
    };
    if cost.c2 < 0.0 {
        return Err(CaseError::UnsupportedCost {
            row: row_no,
            reason: "negative quadratic coefficient".into(),
        });
    }
    Ok(cost)
}

fn require_width(name: &str, rows: &[Vec<f64>], min: usize) -> Result<(), CaseError> {
    match rows.first() {
        Some(r) if r.len() < min => Err(CaseError::MalformedMatrix {
            matrix: name.into(),
            row: 1,
            expected: min,
            found: r.len(),
        }),
        _ => Ok(()),
    }
}

enum Value {
    Scalar(String),
    Matrix(String),
    Other,
}

fn strip_comments(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for line in text.lines() {
        let mut in_quote = false;
        for ch in line.chars() {
            match ch {
                '\'' => in_quote = !in_quote,
                '%' if !in_quote => break,
                _ => {}
            }
            out.push(ch);
        }
        out.push('\n');
    }
    out
}

/// Splits the script into `mpc.<name> = <value>` assignments.
fn scan_assignments(text: &str, warnings: &mut Vec<ParseWarning>) -> Vec<(String, Value)> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut pos = 0;
    while pos < bytes.len() {
        while pos < bytes.len() && (bytes[pos] as char).is_whitespace() {
            pos += 1;
        }
        if pos >= bytes.len() {
            break;
        }
        let rest = &text[pos..];
        let line_end = rest.find('\n').map_or(text.len(), |e| pos + e);
        if !rest.starts_with("mpc.") {
            let stmt = text[pos..line_end].trim();
            if !stmt.starts_with("function") && !stmt.is_empty() && stmt != "end" {
                warnings.push(ParseWarning(format!("ignored statement `{stmt}`")));
            }
            pos = line_end;
            continue;
        }
        let Some(eq) = rest.find('=') else { break };
        let name = rest[4..eq].trim().to_string();
        pos += eq + 1;
        while pos < bytes.len() && (bytes[pos] == b' ' || bytes[pos] == b'\t') {
            pos += 1;
        }
        let value = match bytes.get(pos) {
            Some(b'[') => {
                let close = text[pos..].find(']').map_or(text.len(), |c| pos + c);
                let body = text[pos + 1..close.min(text.len())].to_string();
                pos = close + 1;
                Value::Matrix(body)
            }
            Some(b'{') => {
                let close = text[pos..].find('}').map_or(text.len(), |c| pos + c);
                pos = close + 1;
                Value::Other
            }
            _ => {
                let end = text[pos..]
                    .find([';', '\n'])
                    .map_or(text.len(), |e| pos + e);
                let raw = text[pos..end].trim().to_string();
                pos = end;
                if raw.starts_with('\'') {
                    Value::Other
                } else {
                    Value::Scalar(raw)
                }
            }
        };
        // Trailing `;` after the value.
        while pos < bytes.len() && (bytes[pos] == b';' || bytes[pos] == b' ' || bytes[pos] == b'\t') {
            pos += 1;
        }
        out.push((name, value));
    }
    out
}

fn parse_number(field: &str, token: &str) -> Result<f64, CaseError> {
    let t = token.trim();
    let parsed = match t {
        "Inf" | "inf" | "+Inf" => Ok(f64::INFINITY),
        "-Inf" | "-inf" => Ok(f64::NEG_INFINITY),
        _ => t.parse::<f64>(),
    };
    parsed.map_err(|_| CaseError::BadNumber {
        field: field.into(),
        token: t.into(),
    })
}

fn parse_matrix(name: &str, body: &str) -> Result<Vec<Vec<f64>>, CaseError> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for raw in body.split([';', '\n']) {
        let cells: Vec<&str> = raw
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .collect();
        if cells.is_empty() {
            continue;
        }
        let row = cells
            .iter()
            .map(|c| parse_number(name, c))
            .collect::<Result<Vec<_>, _>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(CaseError::MalformedMatrix {
                    matrix: name.into(),
                    row: rows.len() + 1,
                    expected: first.len(),
                    found: row.len(),
                });
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Writes the case back out in MATPOWER units and layout.
pub fn write_matpower(case: &NetworkCase) -> String {
    let base = case.base_mva;
    let mut s = String::new();
    let _ = writeln!(s, "function mpc = exported\nmpc.version = '2';");
    let _ = writeln!(s, "mpc.baseMVA = {};", fmt(base));
    let _ = writeln!(s, "mpc.bus = [");
    for bus in &case.buses {
        let kind = match bus.kind {
            BusType::Pq => 1,
            BusType::Pv => 2,
            BusType::Ref => 3,
        };
        let _ = writeln!(
            s,
            "\t{}\t{kind}\t{}\t{}\t{}\t{}\t1\t{}\t{}\t{}\t1\t{}\t{};",
            bus.id,
            fmt(bus.pd * base),
            fmt(bus.qd * base),
            fmt(bus.gsh * base),
            fmt(bus.bsh * base),
            fmt(bus.vm),
            fmt(bus.va.to_degrees()),
            fmt(bus.base_kv),
            fmt(bus.vmax),
            fmt(bus.vmin),
        );
    }
    let _ = writeln!(s, "];\nmpc.gen = [");
    for gen in &case.generators {
        let _ = writeln!(
            s,
            "\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t1\t{}\t{};",
            case.buses[gen.bus].id,
            fmt(gen.pg * base),
            fmt(gen.qg * base),
            fmt(gen.qmax * base),
            fmt(gen.qmin * base),
            fmt(gen.vg),
            fmt(base),
            fmt(gen.pmax * base),
            fmt(gen.pmin * base),
        );
    }
    let _ = writeln!(s, "];\nmpc.branch = [");
    for br in &case.branches {
        let (r, x) = br.impedance();
        let rate = br.smax.map_or(0.0, |v| v * base);
        let ang = br.thetamax.map_or(360.0, f64::to_degrees);
        let _ = writeln!(
            s,
            "\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t1\t{}\t{};",
            case.buses[br.from].id,
            case.buses[br.to].id,
            fmt(r),
            fmt(x),
            fmt(br.bc),
            fmt(rate),
            fmt(rate),
            fmt(rate),
            fmt(br.tap),
            fmt(br.shift.to_degrees()),
            fmt(-ang),
            fmt(ang),
        );
    }
    let _ = writeln!(s, "];\nmpc.gencost = [");
    for gen in &case.generators {
        let c = gen.cost;
        let _ = writeln!(s, "\t2\t0\t0\t3\t{}\t{}\t{};", fmt(c.c2), fmt(c.c1), fmt(c.c0));
    }
    let _ = writeln!(s, "];");
    s
}

fn fmt(v: f64) -> String {
    format!("{v:e}")
}

/// Per-branch relaxation bounds on the lifted variables.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BranchBounds {
    pub theta_u: f64,
    pub sl: f64,
    pub su: f64,
    pub cl: f64,
    pub cu: f64,
    pub kl: f64,
    pub ku: f64,
    pub ll: f64,
    pub lu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    pub branches: Vec<BranchBounds>,
}

/// Effective angle limit for one branch: the tighter of the case limit and
/// the global `theta_u`.
pub fn branch_angle_limit(branch: &Branch, theta_u: f64) -> f64 {
    branch.thetamax.map_or(theta_u, |t| t.min(theta_u))
}

pub fn derive_bounds(case: &NetworkCase, theta_u: f64) -> Result<BoundConstants, CaseError> {
    if !(theta_u > 0.0 && theta_u < FRAC_PI_2) {
        return Err(CaseError::InvalidAngleLimit(theta_u));
    }
    let branches = case
        .branches
        .iter()
        .map(|br| {
            let t = branch_angle_limit(br, theta_u);
            let (fb, tb) = (&case.buses[br.from], &case.buses[br.to]);
            let su = t.sin();
            let cl = t.cos();
            let vl2 = fb.vmin * tb.vmin;
            let vu2 = fb.vmax * tb.vmax;
            BranchBounds {
                theta_u: t,
                sl: -su,
                su,
                cl,
                cu: 1.0,
                kl: vl2 * cl,
                ku: vu2,
                ll: -vu2 * su,
                lu: vu2 * su,
            }
        })
        .collect();
    Ok(BoundConstants { branches })
}

/// Scenario adjustments applied on top of a parsed case.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    /// Uniform apparent-power limit for every branch (p.u.).
    pub smax: Option<f64>,
    /// Uniform angle-difference limit (radians).
    pub theta_u: Option<f64>,
    /// Pins the reference bus voltage magnitude (p.u.).
    pub fixed_ref_voltage: Option<f64>,
    /// Uniform `[vmin, vmax]` for every bus.
    pub voltage_bounds: Option<(f64, f64)>,
    /// Zeroes every branch charging susceptance.
    pub drop_line_charging: bool,
    /// Removes every case thermal rating (a uniform `smax` still applies).
    pub drop_branch_ratings: bool,
}

pub fn apply_overrides(case: &NetworkCase, ov: &Overrides) -> Result<NetworkCase, CaseError> {
    let mut out = case.clone();
    if let Some(t) = ov.theta_u {
        if !(t > 0.0 && t < FRAC_PI_2) {
            return Err(CaseError::InvalidAngleLimit(t));
        }
        out.branches.iter_mut().for_each(|b| b.thetamax = Some(t));
    }
    if ov.drop_branch_ratings {
        out.branches.iter_mut().for_each(|b| b.smax = None);
    }
    if let Some(s) = ov.smax {
        if !(s > 0.0) {
            return Err(CaseError::InvalidData(format!("smax override {s}")));
        }
        out.branches.iter_mut().for_each(|b| b.smax = Some(s));
    }
    if ov.drop_line_charging {
        out.branches.iter_mut().for_each(|b| b.bc = 0.0);
    }
    if let Some((lo, hi)) = ov.voltage_bounds {
        for bus in &mut out.buses {
            bus.vmin = lo;
            bus.vmax = hi;
        }
    }
    if let Some(v) = ov.fixed_ref_voltage {
        let r = out.ref_bus();
        out.buses[r].vmin = v;
        out.buses[r].vmax = v;
    }
    out.validate()?;
    Ok(out)
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a % (2.0 * PI);
    if w <= -PI {
        w += 2.0 * PI;
    } else if w > PI {
        w -= 2.0 * PI;
    }
    w
}
