//! Free-format MPS export of the big-M model, a parser for the same subset of the
//! format, and an exhaustive solver over the binary columns.

use crate::error::{Error, Result};
use crate::numerics::simplex::{solve_lp, LpBuilder, LpStatus, RowKind};
use crate::penalty::PenaltyFamily;
use crate::reformulate::MipModel;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    E,
    L,
    G,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub cost: f64,
    pub lower: f64,
    pub upper: f64,
    pub integer: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub name: String,
    pub sense: Sense,
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
}

/// A linear program with some integer columns, in MPS terms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MipProblem {
    pub name: String,
    pub columns: Vec<Column>,
    pub rows: Vec<Row>,
    /// Integer columns grouped as they appear between INTORG/INTEND markers.
    pub int_blocks: Vec<Vec<usize>>,
}

impl MipProblem {
    pub fn num_integer(&self) -> usize {
        self.columns.iter().filter(|c| c.integer).count()
    }
}

/// Role of one MPS column in the model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "role", rename_all = "snake_case")]
pub enum ColumnRole {
    /// Continuous variable with its index in the complementarity layout.
    Variable { index: usize },
    /// Binary of complementarity pair `pair`.
    Binary { pair: usize },
}

/// Metadata written next to the MPS file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sidecar {
    pub columns: Vec<(String, ColumnRole)>,
    pub family: PenaltyFamily,
    pub lambda: f64,
    pub a: f64,
    pub n: f64,
    pub dim: usize,
    pub penalized: Vec<usize>,
    pub big_m: f64,
    /// n·p·(a+1)λ²/2 for SCAD, 0 for MCP; add to the MPS optimum with `loss_constant`.
    pub objective_offset: f64,
    pub loss_constant: f64,
}

impl Sidecar {
    pub fn reported_value(&self, mps_objective: f64) -> f64 {
        mps_objective + self.objective_offset + self.loss_constant
    }

    /// β from an MPS solution vector.
    pub fn beta(&self, x: &[f64]) -> Vec<f64> {
        let mut beta = vec![0.0; self.dim];
        for (j, (_, role)) in self.columns.iter().enumerate() {
            if let ColumnRole::Variable { index } = role {
                if *index < self.dim {
                    beta[*index] = x[j];
                }
            }
        }
        beta
    }
}

fn var_name(mip: &MipModel, j: usize) -> String {
    let lay = mip.lpcc.layout;
    let (d, p) = (lay.dim, lay.p);
    if j < d {
        format!("B_{j}")
    } else if j < d + p {
        format!("G_{}", j - d)
    } else if j < d + 2 * p {
        format!("H_{}", j - d - p)
    } else if j < d + 6 * p {
        let t = (j - d - 2 * p) / p;
        format!("MU{}_{}", t + 1, (j - d - 2 * p) % p)
    } else {
        format!("RHO_{}", j - d - 6 * p)
    }
}

/// The big-M model as an MPS problem: continuous columns in layout order, then one
/// binary per core pair (first integer block) and per box pair (second block).
pub fn mip_problem(mip: &MipModel) -> (MipProblem, Sidecar) {
    let model = &mip.lpcc;
    let nv = model.num_vars();
    let mut columns: Vec<Column> = (0..nv)
        .map(|j| Column {
            name: var_name(mip, j),
            cost: model.objective[j],
            lower: if model.is_multiplier(j) { 0.0 } else { f64::NEG_INFINITY },
            upper: f64::INFINITY,
            integer: false,
        })
        .collect();
    let mut roles: Vec<(String, ColumnRole)> = (0..nv).map(|j| (columns[j].name.clone(), ColumnRole::Variable { index: j })).collect();
    let mut blocks = vec![vec![], vec![]];
    for (k, _) in model.pairs.iter().enumerate() {
        let name = format!("Z_{k}");
        blocks[usize::from(k >= model.core_pairs)].push(columns.len());
        roles.push((name.clone(), ColumnRole::Binary { pair: k }));
        columns.push(Column { name, cost: 0.0, lower: 0.0, upper: 1.0, integer: true });
    }
    blocks.retain(|b| !b.is_empty());
    let mut rows = vec![];
    for ((coeffs, rhs), name) in model.eq_rows.iter().zip(&model.row_names) {
        rows.push(Row { name: name.clone(), sense: Sense::E, coeffs: coeffs.clone(), rhs: *rhs });
    }
    let bm = mip.big_m;
    for (k, pair) in model.pairs.iter().enumerate() {
        let z = nv + k;
        rows.push(Row { name: format!("CPL_{k}_L"), sense: Sense::L, coeffs: vec![(pair.var, 1.0), (z, -bm)], rhs: 0.0 });
        let mut t = pair.expr.terms.clone();
        t.push((z, bm));
        rows.push(Row { name: format!("CPL_{k}_R"), sense: Sense::L, coeffs: t, rhs: bm - pair.expr.constant });
        match pair.expr.as_variable() {
            Some(j) => columns[j].lower = columns[j].lower.max(0.0),
            None => rows.push(Row {
                name: format!("SGN_{k}"),
                sense: Sense::G,
                coeffs: pair.expr.terms.clone(),
                rhs: 0.0 - pair.expr.constant,
            }),
        }
    }
    for r in &mut rows {
        r.coeffs.sort_by_key(|&(j, _)| j);
    }
    let sidecar = Sidecar {
        columns: roles,
        family: model.family,
        lambda: model.spec.lambda,
        a: model.spec.a,
        n: model.n,
        dim: model.layout.dim,
        penalized: model.penalized.clone(),
        big_m: bm,
        objective_offset: model.penalty_offset,
        loss_constant: model.loss_constant,
    };
    (MipProblem { name: "FCGO".into(), columns, rows, int_blocks: blocks }, sidecar)
}

fn num(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

pub fn write_mps(p: &MipProblem) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "NAME {}", p.name);
    let _ = writeln!(s, "OBJSENSE\n    MIN");
    let _ = writeln!(s, "ROWS\n N OBJ");
    for r in &p.rows {
        let _ = writeln!(s, " {:?} {}", r.sense, r.name);
    }
    // entries per column
    let mut by_col: Vec<Vec<(usize, f64)>> = vec![vec![]; p.columns.len()];
    for (i, r) in p.rows.iter().enumerate() {
        for &(j, v) in &r.coeffs {
            by_col[j].push((i, v));
        }
    }
    let _ = writeln!(s, "COLUMNS");
    let block_of: HashMap<usize, usize> = p.int_blocks.iter().enumerate().flat_map(|(b, cols)| cols.iter().map(move |&j| (j, b))).collect();
    let mut open: Option<usize> = None;
    for (j, c) in p.columns.iter().enumerate() {
        let blk = block_of.get(&j).copied();
        if blk != open {
            if open.is_some() {
                let _ = writeln!(s, "    MARKER 'MARKER' 'INTEND'");
            }
            if blk.is_some() {
                let _ = writeln!(s, "    MARKER 'MARKER' 'INTORG'");
            }
            open = blk;
        }
        if c.cost != 0.0 {
            let _ = writeln!(s, "    {} OBJ {}", c.name, num(c.cost));
        }
        for &(i, v) in &by_col[j] {
            let _ = writeln!(s, "    {} {} {}", c.name, p.rows[i].name, num(v));
        }
        if c.cost == 0.0 && by_col[j].is_empty() {
            let _ = writeln!(s, "    {} OBJ 0", c.name);
        }
    }
    if open.is_some() {
        let _ = writeln!(s, "    MARKER 'MARKER' 'INTEND'");
    }
    let _ = writeln!(s, "RHS");
    for r in &p.rows {
        if r.rhs != 0.0 {
            let _ = writeln!(s, "    RHS {} {}", r.name, num(r.rhs));
        }
    }
    let _ = writeln!(s, "BOUNDS");
    for c in &p.columns {
        match (c.lower, c.upper) {
            (l, u) if l == f64::NEG_INFINITY && u == f64::INFINITY => {
                let _ = writeln!(s, " FR BND {}", c.name);
            }
            (l, u) => {
                if l == f64::NEG_INFINITY {
                    let _ = writeln!(s, " MI BND {}", c.name);
                } else if l != 0.0 || c.integer {
                    let _ = writeln!(s, " LO BND {} {}", c.name, num(l));
                }
                if u != f64::INFINITY {
                    let _ = writeln!(s, " UP BND {} {}", c.name, num(u));
                }
            }
        }
    }
    let _ = writeln!(s, "ENDATA");
    s
}

fn parse_err(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Data(format!("MPS line {line}: {msg}"))
}

fn parse_num(tok: &str, line: usize) -> Result<f64> {
    let v: f64 = tok.parse().map_err(|_| parse_err(line, format!("bad number {tok:?}")))?;
    if !v.is_finite() {
        return Err(parse_err(line, format!("non-finite number {tok:?}")));
    }
    Ok(v)
}

/// Parses free-format MPS with one N row, E/L/G rows, integer markers and
/// LO/UP/FX/FR/MI/PL/BV bounds. RANGES and MAX objectives are rejected.
pub fn parse_mps(text: &str) -> Result<MipProblem> {
    #[derive(PartialEq)]
    enum Sec {
        None,
        Rows,
        Columns,
        Rhs,
        Bounds,
        ObjSense,
    }
    let mut sec = Sec::None;
    let mut name = String::new();
    let mut obj_row: Option<String> = None;
    let mut rows: Vec<Row> = vec![];
    let mut row_ix: HashMap<String, usize> = HashMap::new();
    let mut columns: Vec<Column> = vec![];
    let mut col_ix: HashMap<String, usize> = HashMap::new();
    let mut blocks: Vec<Vec<usize>> = vec![];
    let mut in_int = false;
    let mut seen_end = false;
    for (ln, raw) in text.lines().enumerate() {
        let ln = ln + 1;
        let line = raw.trim_end();
        if line.trim().is_empty() || line.starts_with('*') {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if !raw.starts_with(' ') && !raw.starts_with('\t') {
            match toks[0] {
                "NAME" => {
                    name = toks.get(1).unwrap_or(&"").to_string();
                    sec = Sec::None;
                }
                "OBJSENSE" => {
                    sec = Sec::ObjSense;
                    if let Some(t) = toks.get(1) {
                        if *t != "MIN" && *t != "MINIMIZE" {
                            return Err(parse_err(ln, "only minimization is supported"));
                        }
                        sec = Sec::None;
                    }
                }
                "ROWS" => sec = Sec::Rows,
                "COLUMNS" => sec = Sec::Columns,
                "RHS" => sec = Sec::Rhs,
                "BOUNDS" => sec = Sec::Bounds,
                "RANGES" => return Err(parse_err(ln, "RANGES are not supported")),
                "ENDATA" => {
                    seen_end = true;
                    break;
                }
                other => return Err(parse_err(ln, format!("unknown section {other}"))),
            }
            continue;
        }
        match sec {
            Sec::ObjSense => {
                if toks[0] != "MIN" && toks[0] != "MINIMIZE" {
                    return Err(parse_err(ln, "only minimization is supported"));
                }
            }
            Sec::Rows => {
                if toks.len() != 2 {
                    return Err(parse_err(ln, "row entry needs a type and a name"));
                }
                let sense = match toks[0] {
                    "N" => {
                        if obj_row.is_some() {
                            return Err(parse_err(ln, "more than one objective row"));
                        }
                        obj_row = Some(toks[1].to_string());
                        continue;
                    }
                    "E" => Sense::E,
                    "L" => Sense::L,
                    "G" => Sense::G,
                    t => return Err(parse_err(ln, format!("unknown row type {t}"))),
                };
                if row_ix.insert(toks[1].to_string(), rows.len()).is_some() {
                    return Err(parse_err(ln, format!("duplicate row {}", toks[1])));
                }
                rows.push(Row { name: toks[1].to_string(), sense, coeffs: vec![], rhs: 0.0 });
            }
            Sec::Columns => {
                if toks.len() >= 3 && toks[1] == "'MARKER'" {
                    match toks[2] {
                        "'INTORG'" => {
                            in_int = true;
                            blocks.push(vec![]);
                        }
                        "'INTEND'" => in_int = false,
                        m => return Err(parse_err(ln, format!("unknown marker {m}"))),
                    }
                    continue;
                }
                if toks.len() != 3 && toks.len() != 5 {
                    return Err(parse_err(ln, "column entry needs name, row, value pairs"));
                }
                let j = match col_ix.get(toks[0]) {
                    Some(&j) => j,
                    None => {
                        col_ix.insert(toks[0].to_string(), columns.len());
                        if in_int {
                            blocks.last_mut().expect("open block").push(columns.len());
                        }
                        columns.push(Column {
                            name: toks[0].to_string(),
                            cost: 0.0,
                            lower: 0.0,
                            upper: if in_int { 1.0 } else { f64::INFINITY },
                            integer: in_int,
                        });
                        columns.len() - 1
                    }
                };
                for pair in toks[1..].chunks(2) {
                    let v = parse_num(pair[1], ln)?;
                    if Some(pair[0]) == obj_row.as_deref() {
                        columns[j].cost += v;
                    } else {
                        let &i = row_ix.get(pair[0]).ok_or_else(|| parse_err(ln, format!("unknown row {}", pair[0])))?;
                        rows[i].coeffs.push((j, v));
                    }
                }
            }
            Sec::Rhs => {
                if toks.len() != 3 && toks.len() != 5 {
                    return Err(parse_err(ln, "RHS entry needs set, row, value"));
                }
                for pair in toks[1..].chunks(2) {
                    let v = parse_num(pair[1], ln)?;
                    if Some(pair[0]) == obj_row.as_deref() {
                        return Err(parse_err(ln, "objective constants are not supported"));
                    }
                    let &i = row_ix.get(pair[0]).ok_or_else(|| parse_err(ln, format!("unknown row {}", pair[0])))?;
                    rows[i].rhs = v;
                }
            }
            Sec::Bounds => {
                if toks.len() < 3 {
                    return Err(parse_err(ln, "bound entry needs type, set, column"));
                }
                let &j = col_ix.get(toks[2]).ok_or_else(|| parse_err(ln, format!("unknown column {}", toks[2])))?;
                let val = || -> Result<f64> { parse_num(toks.get(3).ok_or_else(|| parse_err(ln, "missing bound value"))?, ln) };
                let c = &mut columns[j];
                match toks[0] {
                    "LO" => c.lower = val()?,
                    "UP" => c.upper = val()?,
                    "FX" => {
                        let v = val()?;
                        c.lower = v;
                        c.upper = v;
                    }
                    "FR" => {
                        c.lower = f64::NEG_INFINITY;
                        c.upper = f64::INFINITY;
                    }
                    "MI" => c.lower = f64::NEG_INFINITY,
                    "PL" => c.upper = f64::INFINITY,
                    "BV" => {
                        c.lower = 0.0;
                        c.upper = 1.0;
                        c.integer = true;
                    }
                    t => return Err(parse_err(ln, format!("unsupported bound type {t}"))),
                }
            }
            Sec::None => return Err(parse_err(ln, "entry outside a section")),
        }
    }
    if !seen_end {
        return Err(Error::Data("MPS: missing ENDATA".into()));
    }
    if obj_row.is_none() {
        return Err(Error::Data("MPS: no objective row".into()));
    }
    Ok(MipProblem { name, columns, rows, int_blocks: blocks })
}

pub fn sidecar_path(mps: &Path) -> PathBuf {
    mps.with_extension("json")
}

/// Writes `path` (MPS) and its sidecar JSON.
pub fn export_model(mip: &MipModel, path: &Path) -> Result<(MipProblem, Sidecar)> {
    let (p, side) = mip_problem(mip);
    std::fs::write(path, write_mps(&p))?;
    std::fs::write(sidecar_path(path), serde_json::to_string_pretty(&side)?)?;
    Ok((p, side))
}

pub fn read_model(path: &Path) -> Result<(MipProblem, Sidecar)> {
    let text = std::fs::read_to_string(path)?;
    let p = parse_mps(&text)?;
    let side: Sidecar = serde_json::from_str(&std::fs::read_to_string(sidecar_path(path))?)?;
    if side.columns.len() != p.columns.len() || side.columns.iter().zip(&p.columns).any(|(a, b)| a.0 != b.name) {
        return Err(Error::Data("sidecar columns do not match the MPS file".into()));
    }
    Ok((p, side))
}

#[derive(Clone, Debug, PartialEq)]
pub struct MipSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// Complete binary assignments whose LP was solved.
    pub leaves: usize,
}

pub const ENUMERATION_MAX_BINARIES: usize = 24;

/// Minimizes over every 0/1 assignment of the integer columns. Partial assignments whose
/// LP relaxation is infeasible are skipped along with their completions.
pub fn solve_by_enumeration(p: &MipProblem) -> Result<MipSolution> {
    let ints: Vec<usize> = (0..p.columns.len()).filter(|&j| p.columns[j].integer).collect();
    if ints.len() > ENUMERATION_MAX_BINARIES {
        return Err(Error::SizeGuard(format!("enumeration handles at most {ENUMERATION_MAX_BINARIES} binaries, got {}", ints.len())));
    }
    if let Some(&j) = ints.iter().find(|&&j| p.columns[j].lower < 0.0 || p.columns[j].upper > 1.0) {
        return Err(Error::InvalidInstance(format!("integer column {} is not binary", p.columns[j].name)));
    }
    let mut lp = LpBuilder::new();
    for c in &p.columns {
        lp.add_var(c.cost, c.lower, c.upper);
    }
    for r in &p.rows {
        let kind = match r.sense {
            Sense::E => RowKind::Eq,
            Sense::L => RowKind::Le,
            Sense::G => RowKind::Ge,
        };
        lp.add_row(r.coeffs.clone(), kind, r.rhs);
    }
    let mut best: Option<MipSolution> = None;
    let mut leaves = 0;
    let mut fixed: Vec<(f64, f64)> = ints.iter().map(|&j| (p.columns[j].lower, p.columns[j].upper)).collect();
    fn dfs(
        depth: usize,
        ints: &[usize],
        fixed: &mut Vec<(f64, f64)>,
        lp: &mut LpBuilder,
        best: &mut Option<MipSolution>,
        leaves: &mut usize,
    ) -> Result<()> {
        for (t, &j) in ints.iter().enumerate() {
            lp.set_bounds(j, fixed[t].0, fixed[t].1);
        }
        let sol = solve_lp(&lp.build(), None);
        match sol.status {
            LpStatus::Infeasible => return Ok(()),
            LpStatus::Optimal => {}
            // unbounded with free binaries can still be bounded once they are fixed
            LpStatus::Unbounded if depth < ints.len() => {}
            s => return Err(Error::Numerical(format!("enumeration LP ended with {s:?}"))),
        }
        if depth == ints.len() {
            *leaves += 1;
            if best.as_ref().is_none_or(|b| sol.objective < b.objective) {
                *best = Some(MipSolution { x: sol.x[..lp.num_vars()].to_vec(), objective: sol.objective, leaves: 0 });
            }
            return Ok(());
        }
        let saved = fixed[depth];
        for v in [0.0, 1.0] {
            if v < saved.0 || v > saved.1 {
                continue;
            }
            fixed[depth] = (v, v);
            dfs(depth + 1, ints, fixed, lp, best, leaves)?;
        }
        fixed[depth] = saved;
        Ok(())
    }
    dfs(0, &ints, &mut fixed, &mut lp, &mut best, &mut leaves)?;
    let mut sol = best.ok_or_else(|| Error::Infeasible("no feasible binary assignment".into()))?;
    sol.leaves = leaves;
    Ok(sol)
}
