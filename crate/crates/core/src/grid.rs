//! Power-network input for the demand-response case study: a MATPOWER-subset
//! parser, DC injection shift factors, and the affine demand-response constraints.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use crate::design::ConstraintSet;
use crate::error::{Error, Result};

/// The IEEE 30-bus case shipped with the crate.
pub const CASE30: &str = include_str!("../data/case30.m");

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Bus {
    pub id: usize,
    /// MATPOWER bus type; 3 marks the reference (slack) bus.
    pub kind: u8,
    /// Real power demand, MW.
    pub demand: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Generator {
    pub bus: usize,
    /// Real power output, MW.
    pub output: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Branch {
    pub from: usize,
    pub to: usize,
    pub resistance: f64,
    /// Series reactance, p.u.
    pub reactance: f64,
    /// Flow limit in MW; `None` when the source lists 0 (unlimited).
    pub limit: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridCase {
    pub base_mva: f64,
    pub buses: Vec<Bus>,
    pub generators: Vec<Generator>,
    pub branches: Vec<Branch>,
    pub slack: usize,
}

struct Table {
    rows: Vec<(usize, Vec<f64>)>,
}

fn strip_comment(line: &str) -> &str {
    line.split('%').next().unwrap_or("")
}

fn parse_numbers(text: &str, line: usize) -> Result<Vec<f64>> {
    text.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| Error::Parse { line, msg: format!("non-numeric field {t:?}") }))
        .collect()
}

fn tables(text: &str) -> Result<(HashMap<String, Table>, Option<f64>, usize)> {
    let mut out: HashMap<String, Table> = HashMap::new();
    let mut base_mva = None;
    let mut current: Option<(String, Table)> = None;
    let mut last_line = 0;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        last_line = line_no;
        let mut line = strip_comment(raw).trim();
        if current.is_none() {
            let Some(rest) = line.strip_prefix("mpc.") else { continue };
            let Some((name, value)) = rest.split_once('=') else { continue };
            let name = name.trim().to_string();
            let value = value.trim();
            if let Some(body) = value.strip_prefix('[') {
                current = Some((name, Table { rows: Vec::new() }));
                line = body.trim();
            } else {
                if name == "baseMVA" {
                    let v = value.trim_end_matches(';').trim();
                    base_mva = Some(
                        v.parse::<f64>()
                            .map_err(|_| Error::Parse { line: line_no, msg: format!("non-numeric baseMVA {v:?}") })?,
                    );
                }
                continue;
            }
        }
        let (_, table) = current.as_mut().expect("inside a table");
        let (body, closed) = match line.split_once(']') {
            Some((b, _)) => (b, true),
            None => (line, false),
        };
        for row in body.split(';') {
            let nums = parse_numbers(row, line_no)?;
            if !nums.is_empty() {
                table.rows.push((line_no, nums));
            }
        }
        if closed {
            let (name, table) = current.take().expect("inside a table");
            out.insert(name, table);
        }
    }
    if let Some((name, _)) = current {
        return Err(Error::Parse { line: last_line, msg: format!("unterminated {name} table") });
    }
    Ok((out, base_mva, last_line))
}

fn column(row: &(usize, Vec<f64>), j: usize, table: &str, what: &str) -> Result<f64> {
    row.1
        .get(j)
        .copied()
        .ok_or_else(|| Error::Parse { line: row.0, msg: format!("{table} row is missing column {} ({what})", j + 1) })
}

fn as_id(v: f64, line: usize, what: &str) -> Result<usize> {
    if v >= 1.0 && v.fract() == 0.0 && v < 1e9 {
        Ok(v as usize)
    } else {
        Err(Error::Parse { line, msg: format!("{what} must be a positive integer, got {v}") })
    }
}

/// Parses the `bus`, `gen` and `branch` tables (and `baseMVA`) of a MATPOWER case.
/// Out-of-service generators and branches are skipped; extra columns are ignored.
pub fn parse_case(text: &str) -> Result<GridCase> {
    let (tables, base_mva, last_line) = tables(text)?;
    let get = |name: &str| {
        tables.get(name).ok_or_else(|| Error::Parse { line: last_line, msg: format!("missing {name} table") })
    };
    let (bus_t, gen_t, branch_t) = (get("bus")?, get("gen")?, get("branch")?);

    let mut buses = Vec::with_capacity(bus_t.rows.len());
    for row in &bus_t.rows {
        let id = as_id(column(row, 0, "bus", "bus_i")?, row.0, "bus id")?;
        let kind = column(row, 1, "bus", "type")?;
        let demand = column(row, 2, "bus", "Pd")?;
        buses.push(Bus { id, kind: kind as u8, demand });
    }
    let mut generators = Vec::new();
    for row in &gen_t.rows {
        let bus = as_id(column(row, 0, "gen", "bus")?, row.0, "generator bus")?;
        let output = column(row, 1, "gen", "Pg")?;
        if row.1.get(7).is_some_and(|s| *s <= 0.0) {
            continue;
        }
        generators.push(Generator { bus, output });
    }
    let mut branches = Vec::new();
    for row in &branch_t.rows {
        let from = as_id(column(row, 0, "branch", "fbus")?, row.0, "branch from bus")?;
        let to = as_id(column(row, 1, "branch", "tbus")?, row.0, "branch to bus")?;
        let resistance = column(row, 2, "branch", "r")?;
        let reactance = column(row, 3, "branch", "x")?;
        let rate = row.1.get(5).copied().unwrap_or(0.0);
        if row.1.get(10).is_some_and(|s| *s <= 0.0) {
            continue;
        }
        if !(reactance > 0.0) {
            return Err(Error::Parse {
                line: row.0,
                msg: format!("branch {from}-{to} reactance must be positive, got {reactance}"),
            });
        }
        if rate < 0.0 {
            return Err(Error::Parse { line: row.0, msg: format!("branch {from}-{to} has negative rating {rate}") });
        }
        branches.push(Branch { from, to, resistance, reactance, limit: (rate > 0.0).then_some(rate) });
    }
    let slacks: Vec<usize> = buses.iter().filter(|b| b.kind == 3).map(|b| b.id).collect();
    let slack = match slacks.as_slice() {
        [s] => *s,
        [] => return Err(Error::GridValidation("no slack (type 3) bus".into())),
        many => return Err(Error::GridValidation(format!("multiple slack buses {many:?}"))),
    };
    let case = GridCase { base_mva: base_mva.unwrap_or(100.0), buses, generators, branches, slack };
    case.validate()?;
    Ok(case)
}

impl GridCase {
    pub fn bus_index(&self) -> BTreeMap<usize, usize> {
        self.buses.iter().enumerate().map(|(k, b)| (b.id, k)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let index = self.bus_index();
        if index.len() != self.buses.len() {
            return Err(Error::GridValidation("duplicate bus ids".into()));
        }
        if !index.contains_key(&self.slack) {
            return Err(Error::GridValidation(format!("slack bus {} is not in the bus table", self.slack)));
        }
        for g in &self.generators {
            if !index.contains_key(&g.bus) {
                return Err(Error::GridValidation(format!("generator at unknown bus {}", g.bus)));
            }
        }
        for br in &self.branches {
            if !index.contains_key(&br.from) || !index.contains_key(&br.to) {
                return Err(Error::GridValidation(format!("branch {}-{} references an unknown bus", br.from, br.to)));
            }
            if br.from == br.to {
                return Err(Error::GridValidation(format!("branch {}-{} is a self loop", br.from, br.to)));
            }
            if !(br.reactance > 0.0) {
                return Err(Error::GridValidation(format!("branch {}-{} reactance must be positive", br.from, br.to)));
            }
        }
        // Connectivity from the slack bus.
        let mut adj = vec![Vec::new(); self.buses.len()];
        for br in &self.branches {
            let (a, b) = (index[&br.from], index[&br.to]);
            adj[a].push(b);
            adj[b].push(a);
        }
        let mut seen = vec![false; self.buses.len()];
        let mut stack = vec![index[&self.slack]];
        seen[stack[0]] = true;
        while let Some(k) = stack.pop() {
            for &m in &adj[k] {
                if !seen[m] {
                    seen[m] = true;
                    stack.push(m);
                }
            }
        }
        if let Some(k) = seen.iter().position(|s| !s) {
            return Err(Error::GridValidation(format!(
                "network is disconnected: bus {} unreachable",
                self.buses[k].id
            )));
        }
        Ok(())
    }

    /// Buses with positive demand, in bus-table order.
    pub fn load_buses(&self) -> Vec<&Bus> {
        self.buses.iter().filter(|b| b.demand > 0.0).collect()
    }

    pub fn total_demand(&self) -> f64 {
        self.buses.iter().map(|b| b.demand).sum()
    }

    pub fn total_generation(&self) -> f64 {
        self.generators.iter().map(|g| g.output).sum()
    }

    /// Serializes the parsed subset back to MATPOWER text.
    pub fn to_matpower(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "function mpc = case\nmpc.version = '2';\nmpc.baseMVA = {};\n", self.base_mva);
        let _ = writeln!(s, "%\tbus_i\ttype\tPd\nmpc.bus = [");
        for b in &self.buses {
            let _ = writeln!(s, "\t{}\t{}\t{};", b.id, b.kind, b.demand);
        }
        let _ = writeln!(s, "];\n\n%\tbus\tPg\nmpc.gen = [");
        for g in &self.generators {
            let _ = writeln!(s, "\t{}\t{};", g.bus, g.output);
        }
        let _ = writeln!(s, "];\n\n%\tfbus\ttbus\tr\tx\tb\trateA\nmpc.branch = [");
        for br in &self.branches {
            let _ = writeln!(
                s,
                "\t{}\t{}\t{}\t{}\t0\t{};",
                br.from,
                br.to,
                br.resistance,
                br.reactance,
                br.limit.unwrap_or(0.0)
            );
        }
        let _ = writeln!(s, "];");
        s
    }
}

/// DC injection shift factors, slack-referenced: entry `(l, k)` is the MW flow on
/// branch `l` (positive from → to) per MW injected at bus `k` and withdrawn at the slack.
pub fn shift_factor_matrix(g: &GridCase) -> Result<DMatrix<f64>> {
    let index = g.bus_index();
    let nb = g.buses.len();
    let nl = g.branches.len();
    let slack = index[&g.slack];
    let reduced: Vec<usize> = (0..nb).filter(|&k| k != slack).collect();
    let position: HashMap<usize, usize> = reduced.iter().enumerate().map(|(r, &k)| (k, r)).collect();

    let mut b_bus = DMatrix::<f64>::zeros(nb, nb);
    let mut b_f = DMatrix::<f64>::zeros(nl, nb);
    for (l, br) in g.branches.iter().enumerate() {
        let (f, t) = (index[&br.from], index[&br.to]);
        let y = 1.0 / br.reactance;
        b_f[(l, f)] += y;
        b_f[(l, t)] -= y;
        b_bus[(f, f)] += y;
        b_bus[(t, t)] += y;
        b_bus[(f, t)] -= y;
        b_bus[(t, f)] -= y;
    }
    let m = reduced.len();
    let mut h = DMatrix::<f64>::zeros(nl, nb);
    if m == 0 {
        return Ok(h);
    }
    let b_red = DMatrix::from_fn(m, m, |r, c| b_bus[(reduced[r], reduced[c])]);
    let chol = b_red
        .cholesky()
        .ok_or_else(|| Error::Singular("reduced susceptance matrix is not positive definite".into()))?;
    let b_f_red = DMatrix::from_fn(nl, m, |l, c| b_f[(l, reduced[c])]);
    // H_red = B_f,red · B_red⁻¹ = (B_red⁻¹ · B_f,redᵀ)ᵀ since B_red is symmetric.
    let h_red = chol.solve(&b_f_red.transpose()).transpose();
    for (k, &r) in &position {
        h.set_column(*k, &h_red.column(r));
    }
    Ok(h)
}

/// Monetized demand-response scenario.
#[derive(Debug, Clone)]
pub struct DrScenario {
    pub case: GridCase,
    pub scale: f64,
    /// Dollars per kWh.
    pub rate: f64,
    pub hours: f64,
    pub load_buses: Vec<usize>,
    /// `L_i`, dollars.
    pub load: Vec<f64>,
    pub generator_buses: Vec<usize>,
    /// `P_j`, dollars.
    pub generation: Vec<f64>,
    /// `f^max_l` in dollars; `None` for unlimited branches.
    pub flow_limits: Vec<Option<f64>>,
    pub h_load: DMatrix<f64>,
    pub h_gen: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioSummary {
    pub buses: usize,
    pub generators: usize,
    pub branches: usize,
    pub load_buses: Vec<usize>,
    pub scale: f64,
    pub rate: f64,
    pub hours: f64,
    pub total_load: f64,
    pub total_generation: f64,
}

/// Converts MW to dollars: `MW × hours × 1000 kW/MW × rate`.
pub fn monetize(g: &GridCase, scale: f64, rate: f64, hours: f64) -> Result<DrScenario> {
    for (what, v) in [("scale", scale), ("rate", rate), ("hours", hours)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidArgument(format!("{what} must be positive, got {v}")));
        }
    }
    let factor = hours * 1000.0 * rate;
    let h = shift_factor_matrix(g)?;
    let index = g.bus_index();
    let loads = g.load_buses();
    let load_cols: Vec<usize> = loads.iter().map(|b| index[&b.id]).collect();
    let gen_cols: Vec<usize> = g.generators.iter().map(|x| index[&x.bus]).collect();
    Ok(DrScenario {
        scale,
        rate,
        hours,
        load_buses: loads.iter().map(|b| b.id).collect(),
        load: loads.iter().map(|b| b.demand * scale * factor).collect(),
        generator_buses: g.generators.iter().map(|x| x.bus).collect(),
        generation: g.generators.iter().map(|x| x.output * factor).collect(),
        flow_limits: g.branches.iter().map(|br| br.limit.map(|f| f * factor)).collect(),
        h_load: h.select_columns(&load_cols),
        h_gen: h.select_columns(&gen_cols),
        case: g.clone(),
    })
}

impl DrScenario {
    /// Branch flows in dollars, `H_p·P − H_l·(L − s)`, for load shifts `s`.
    pub fn line_flows(&self, shifts: &[f64]) -> Result<Vec<f64>> {
        if shifts.len() != self.load.len() {
            return Err(Error::Dimension(format!("{} shifts for {} load buses", shifts.len(), self.load.len())));
        }
        let net = DVector::from_iterator(self.load.len(), self.load.iter().zip(shifts).map(|(l, s)| l - s));
        let p = DVector::from_column_slice(&self.generation);
        Ok((&self.h_gen * p - &self.h_load * net).iter().copied().collect())
    }

    pub fn total_load(&self) -> f64 {
        self.load.iter().sum()
    }

    pub fn total_generation(&self) -> f64 {
        self.generation.iter().sum()
    }

    pub fn summary(&self) -> ScenarioSummary {
        ScenarioSummary {
            buses: self.case.buses.len(),
            generators: self.case.generators.len(),
            branches: self.case.branches.len(),
            load_buses: self.load_buses.clone(),
            scale: self.scale,
            rate: self.rate,
            hours: self.hours,
            total_load: self.total_load(),
            total_generation: self.total_generation(),
        }
    }

    pub fn branch_label(&self, l: usize) -> String {
        let br = &self.case.branches[l];
        format!("line{}_{}_{}", l + 1, br.from, br.to)
    }
}

/// Demand caps `s_i <= L_i`, the generation balance `Σ(L_i − s_i) <= Σ P_j`, and
/// both directions of every limited branch flow, as rows over `(s, R)`.
pub fn build_dr_constraints(s: &DrScenario) -> Result<ConstraintSet> {
    let n = s.load.len();
    if s.h_load.ncols() != n || s.h_gen.ncols() != s.generation.len() || s.h_load.nrows() != s.flow_limits.len() {
        return Err(Error::Dimension("scenario shift-factor blocks do not match its vectors".into()));
    }
    let mut cs = ConstraintSet::new(n);
    for (i, (&bus, &l)) in s.load_buses.iter().zip(&s.load).enumerate() {
        let mut row = vec![0.0; n];
        row[i] = 1.0;
        cs.add(row, 0.0, l, format!("demand_cap_bus{bus}"))?;
    }
    cs.add(vec![-1.0; n], 0.0, s.total_generation() - s.total_load(), "generation_balance")?;
    let base = s.line_flows(&vec![0.0; n])?;
    for (l, limit) in s.flow_limits.iter().enumerate() {
        let Some(fmax) = limit else { continue };
        // flow(s) = base + H_l·s
        let coeffs: Vec<f64> = s.h_load.row(l).iter().copied().collect();
        let label = s.branch_label(l);
        cs.add(coeffs.clone(), 0.0, fmax - base[l], format!("{label}_max"))?;
        cs.add(coeffs.iter().map(|v| -v).collect(), 0.0, fmax + base[l], format!("{label}_min"))?;
    }
    Ok(cs)
}
