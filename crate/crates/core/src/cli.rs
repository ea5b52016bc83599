//! Run configuration, command implementations and output writers behind the
//! `phototaxis` binary.

use crate::basicstate::solve_basic_state;
use crate::error::{Error, Result};
use crate::numerics::linspace;
use crate::photomodel::SuspensionParams;
use crate::radiative::solve_radiation;
use crate::stability::{
    eigenfunction_field, normalised_w, Branch, Model, NeutralCurve, SolverSettings, StabilityProblem,
};
use crate::upswim::compare_models;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Embedded Tables II–IV.
pub const REFERENCE_TABLES: &str = include_str!("../data/reference_tables.csv");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Ndjson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub format: OutputFormat,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("out"),
            format: OutputFormat::Csv,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BasicStateOptions {
    /// Samples of `z` in `basic_state.csv`; 0 writes the solver grid.
    pub samples: usize,
}

impl Default for BasicStateOptions {
    fn default() -> Self {
        Self { samples: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NeutralCurveOptions {
    pub model: Model,
}

impl Default for NeutralCurveOptions {
    fn default() -> Self {
        Self { model: Model::Full }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModeFieldOptions {
    /// Wavenumber; with `rayleigh` unset the critical point is used.
    pub k: Option<f64>,
    pub rayleigh: Option<f64>,
    /// Explicit frame times; empty means six equal steps over one period
    /// (a single frame for a stationary mode).
    pub times: Vec<f64>,
    pub frames: usize,
    pub n_x: usize,
    /// Samples per period in the time series at the strongest-|W| point.
    pub series_samples: usize,
}

impl Default for ModeFieldOptions {
    fn default() -> Self {
        Self {
            k: None,
            rayleigh: None,
            times: Vec::new(),
            frames: 6,
            n_x: 81,
            series_samples: 200,
        }
    }
}

/// Everything a run needs; every key has a default and unknown keys are
/// rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub suspension: SuspensionParams,
    pub solver: SolverSettings,
    pub output: OutputConfig,
    pub basic_state: BasicStateOptions,
    pub neutral_curve: NeutralCurveOptions,
    pub mode_field: ModeFieldOptions,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.suspension.validate()?;
        cfg.solver.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }
}

/// Shortest decimal with at most nine significant digits.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    let s = if (-5..9).contains(&exp) {
        format!("{:.*}", (8 - exp).max(0) as usize, x)
    } else {
        format!("{:.8e}", x)
    };
    trim_zeros(&s)
}

fn trim_zeros(s: &str) -> String {
    let (mant, exp) = match s.find('e') {
        Some(i) => (&s[..i], &s[i..]),
        None => (s, ""),
    };
    let mant = if mant.contains('.') {
        mant.trim_end_matches('0').trim_end_matches('.')
    } else {
        mant
    };
    format!("{mant}{exp}")
}

/// A cell of an output table.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Bool(bool),
    Empty,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.into())
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Num)
    }
}

/// Header, rows and comment lines written as CSV or NDJSON.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
    pub comments: Vec<String>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Self {
            header: header.to_vec(),
            ..Default::default()
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self, format: OutputFormat) -> String {
        let mut out = String::new();
        match format {
            OutputFormat::Csv => {
                for c in &self.comments {
                    let _ = writeln!(out, "# {c}");
                }
                let _ = writeln!(out, "{}", self.header.join(","));
                for row in &self.rows {
                    let cells: Vec<String> = row
                        .iter()
                        .map(|c| match c {
                            Cell::Num(v) => fmt_num(*v),
                            Cell::Int(v) => v.to_string(),
                            Cell::Text(s) => s.clone(),
                            Cell::Bool(b) => b.to_string(),
                            Cell::Empty => String::new(),
                        })
                        .collect();
                    let _ = writeln!(out, "{}", cells.join(","));
                }
            }
            OutputFormat::Ndjson => {
                for c in &self.comments {
                    let _ = writeln!(out, "{}", serde_json::json!({ "comment": c }));
                }
                for row in &self.rows {
                    let mut obj = serde_json::Map::new();
                    for (key, c) in self.header.iter().zip(row) {
                        let v = match c {
                            // the shortest 9-digit decimal reparsed keeps the same digits
                            Cell::Num(v) => fmt_num(*v)
                                .parse::<f64>()
                                .ok()
                                .and_then(serde_json::Number::from_f64)
                                .map_or(serde_json::Value::Null, serde_json::Value::Number),
                            Cell::Int(v) => serde_json::Value::from(*v),
                            Cell::Text(s) => serde_json::Value::from(s.clone()),
                            Cell::Bool(b) => serde_json::Value::from(*b),
                            Cell::Empty => serde_json::Value::Null,
                        };
                        obj.insert((*key).to_string(), v);
                    }
                    let _ = writeln!(out, "{}", serde_json::Value::Object(obj));
                }
            }
        }
        out
    }
}

fn extension(format: OutputFormat) -> &'static str {
    match format {
        OutputFormat::Csv => "csv",
        OutputFormat::Ndjson => "ndjson",
    }
}

/// Writes tables under the output directory.
pub struct Sink {
    pub dir: PathBuf,
    pub format: OutputFormat,
    pub written: Vec<PathBuf>,
}

impl Sink {
    pub fn new(dir: &Path, format: OutputFormat) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            format,
            written: Vec::new(),
        })
    }

    pub fn table(&mut self, stem: &str, table: &Table) -> Result<PathBuf> {
        let path = self.dir.join(format!("{stem}.{}", extension(self.format)));
        std::fs::write(&path, table.render(self.format))?;
        self.written.push(path.clone());
        Ok(path)
    }

    pub fn text(&mut self, name: &str, body: &str) -> Result<PathBuf> {
        let path = self.dir.join(name);
        std::fs::write(&path, body)?;
        self.written.push(path.clone());
        Ok(path)
    }
}

pub fn cmd_basic_state(cfg: &RunConfig, sink: &mut Sink) -> Result<()> {
    let p = &cfg.suspension;
    let field = solve_radiation(p, cfg.solver.n_tau)?;
    let st = solve_basic_state(p, &field, cfg.solver.n_z)?;
    let mut t = Table::new(&["z", "n_s", "G_s", "G_s_coll", "G_s_diff", "q_s", "T_s"]);
    t.comments.push(format!("integral of n_s = {}", fmt_num(st.mass)));
    let zs = if cfg.basic_state.samples >= 2 {
        linspace(0.0, 1.0, cfg.basic_state.samples)
    } else {
        st.z.clone()
    };
    for z in zs {
        let tau = st.tau_at(z);
        let gc = st.field.g_coll_at(tau);
        let g = st.field.g_total_at(tau);
        let n = crate::numerics::interp_cubic_uniform(0.0, st.h, &st.n, z);
        t.push(vec![
            z.into(),
            n.into(),
            g.into(),
            gc.into(),
            (g - gc).into(),
            st.field.flux_at(tau).into(),
            st.taxis.value(g).into(),
        ]);
    }
    sink.table("basic_state", &t)?;
    let mut body = match st.taxis.root {
        Some(gc) => format!("# heights where G_s = G_c ({})\n", fmt_num(gc)),
        None => "# the phototaxis curve has no sign change\n".to_string(),
    };
    for z in &st.sublayer {
        let _ = writeln!(body, "{}", fmt_num(*z));
    }
    sink.text("sublayer.txt", &body)?;
    Ok(())
}

pub fn cmd_uniform_intensity(cfg: &RunConfig, sink: &mut Sink) -> Result<()> {
    let field = solve_radiation(&cfg.suspension, cfg.solver.n_tau)?;
    let kappa = cfg.suspension.extinction;
    let mut t = Table::new(&["z", "G", "G_coll", "G_diff", "q"]);
    for z in linspace(0.0, 1.0, cfg.solver.n_z) {
        let tau = kappa * (1.0 - z);
        t.push(vec![
            z.into(),
            field.g_total_at(tau).into(),
            field.g_coll_at(tau).into(),
            field.g_diff_at(tau).into(),
            field.flux_at(tau).into(),
        ]);
    }
    sink.table("uniform_intensity", &t)?;
    Ok(())
}

fn check_sweep(s: &SolverSettings) -> Result<()> {
    if !(s.k_min > 0.0 && s.k_max > s.k_min) || s.n_k < 2 {
        return Err(Error::Config(format!(
            "empty wavenumber range [{}, {}] with {} points",
            s.k_min, s.k_max, s.n_k
        )));
    }
    Ok(())
}

pub fn curve_table(curve: &NeutralCurve) -> Table {
    let mut t = Table::new(&["k", "R", "Im_gamma", "branch"]);
    for (k, why) in &curve.gaps {
        t.comments.push(format!("gap at k = {}: {why}", fmt_num(*k)));
    }
    for kb in &curve.junctions {
        t.comments.push(format!("branch junction near k = {}", fmt_num(*kb)));
    }
    for branch in [Branch::Stationary, Branch::Oscillatory] {
        for p in curve.branch(branch) {
            t.push(vec![p.k.into(), p.r.into(), p.frequency.into(), branch.name().into()]);
        }
    }
    t
}

pub fn cmd_neutral_curve(cfg: &RunConfig, sink: &mut Sink) -> Result<NeutralCurve> {
    check_sweep(&cfg.solver)?;
    let pr = StabilityProblem::new(&cfg.suspension, &cfg.solver, cfg.neutral_curve.model)?;
    let s = &cfg.solver;
    let curve = pr.trace_neutral_curve(s.k_min, s.k_max, s.n_k)?;
    sink.table("neutral_curve", &curve_table(&curve))?;
    Ok(curve)
}

const CRITICAL_HEADER: [&str; 6] = ["k_c", "R_c", "lambda_c", "Im_gamma", "mode", "overstable"];

pub fn cmd_critical(cfg: &RunConfig, sink: &mut Sink) -> Result<()> {
    check_sweep(&cfg.solver)?;
    let pr = StabilityProblem::new(&cfg.suspension, &cfg.solver, cfg.neutral_curve.model)?;
    let (c, curve) = pr.critical()?;
    let mut t = Table::new(&CRITICAL_HEADER);
    t.push(vec![
        c.k_c.into(),
        c.r_c.into(),
        c.lambda_c.into(),
        c.frequency.into(),
        c.mode.into(),
        c.overstable.into(),
    ]);
    sink.table("critical", &t)?;
    sink.table("neutral_curve", &curve_table(&curve))?;
    Ok(())
}

/// One row of an embedded reference table.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct ReferenceRow {
    pub table: u8,
    pub row: u8,
    pub swim_speed: f64,
    pub albedo: f64,
    pub extinction: f64,
    pub diffuse: f64,
    pub incidence_deg: f64,
    pub lambda_c: f64,
    pub r_c: f64,
    pub im_gamma: f64,
    pub mode: usize,
    /// Minimum on an oscillatory branch.
    pub overstable: bool,
    /// The first branch of the neutral curve is oscillatory.
    pub starred: bool,
}

impl ReferenceRow {
    /// Suspension parameters of the row over a base set.
    pub fn params(&self, base: &SuspensionParams) -> SuspensionParams {
        SuspensionParams {
            swim_speed: self.swim_speed,
            albedo: self.albedo,
            extinction: self.extinction,
            diffuse: self.diffuse,
            incidence_deg: self.incidence_deg,
            ..base.clone()
        }
    }
}

pub fn reference_rows(table: u8) -> Result<Vec<ReferenceRow>> {
    let mut lines = REFERENCE_TABLES.lines();
    let header: Vec<&str> = lines.next().unwrap_or_default().split(',').collect();
    let mut rows = Vec::new();
    for line in lines.filter(|l| !l.trim().is_empty()) {
        let obj: serde_json::Map<String, serde_json::Value> = header
            .iter()
            .zip(line.split(','))
            .map(|(k, v)| {
                let val = serde_json::from_str(v).unwrap_or_else(|_| serde_json::Value::from(v));
                ((*k).to_string(), val)
            })
            .collect();
        let row: ReferenceRow = serde_json::from_value(serde_json::Value::Object(obj))
            .map_err(|e| Error::Config(format!("reference table: {e}")))?;
        if row.table == table {
            rows.push(row);
        }
    }
    if rows.is_empty() {
        return Err(Error::Config(format!("unknown table {table}; expected 2, 3 or 4")));
    }
    Ok(rows)
}

/// Relative error `computed/reference − 1`.
pub fn rel_err(computed: f64, reference: f64) -> f64 {
    computed / reference - 1.0
}

pub fn cmd_reproduce_table(cfg: &RunConfig, table_id: u8, sink: &mut Sink) -> Result<usize> {
    let rows = reference_rows(table_id)?;
    let mut t = Table::new(&[
        "row",
        "swim_speed",
        "extinction",
        "diffuse",
        "incidence_deg",
        "paper_lambda_c",
        "paper_R_c",
        "paper_Im_gamma",
        "paper_mode",
        "lambda_c",
        "R_c",
        "Im_gamma",
        "mode",
        "overstable",
        "rel_err_lambda",
        "rel_err_R",
        "rel_err_Im",
        "status",
    ]);
    let mut failures = 0;
    for row in &rows {
        let p = row.params(&cfg.suspension);
        let res = StabilityProblem::new(&p, &cfg.solver, Model::Full).and_then(|pr| pr.critical());
        let mut cells: Vec<Cell> = vec![
            (row.row as usize).into(),
            row.swim_speed.into(),
            row.extinction.into(),
            row.diffuse.into(),
            row.incidence_deg.into(),
            row.lambda_c.into(),
            row.r_c.into(),
            row.im_gamma.into(),
            row.mode.into(),
        ];
        match res {
            Ok((c, _)) => {
                let im = if row.im_gamma > 0.0 {
                    Some(rel_err(c.frequency, row.im_gamma))
                } else {
                    None
                };
                cells.extend([
                    c.lambda_c.into(),
                    c.r_c.into(),
                    c.frequency.into(),
                    c.mode.into(),
                    c.overstable.into(),
                    rel_err(c.lambda_c, row.lambda_c).into(),
                    rel_err(c.r_c, row.r_c).into(),
                    im.into(),
                    "ok".into(),
                ]);
            }
            Err(e) => {
                failures += 1;
                cells.extend(std::iter::repeat_n(Cell::Empty, 8));
                cells.push(Cell::Text(format!("failed: {}", e.to_string().replace(',', ";"))));
            }
        }
        t.push(cells);
    }
    sink.table(&format!("reproduce_table_{table_id}"), &t)?;
    Ok(failures)
}

pub fn cmd_mode_field(cfg: &RunConfig, sink: &mut Sink) -> Result<()> {
    let opts = &cfg.mode_field;
    let pr = StabilityProblem::new(&cfg.suspension, &cfg.solver, Model::Full)?;
    let (k, r) = match (opts.k, opts.rayleigh) {
        (Some(k), Some(r)) => (k, r),
        (Some(k), None) => (k, pr.neutral_r(k)?.r),
        (None, _) => {
            check_sweep(&cfg.solver)?;
            let (c, _) = pr.critical()?;
            (c.k_c, c.r_c)
        }
    };
    let red = pr.reduced(k)?;
    let (gamma, x) = red.eigenpair(r)?;
    if gamma.re.abs() > 1e-3 * gamma.norm().max(1.0) {
        return Err(Error::Domain(format!(
            "(k, R) = ({}, {}) is not near neutral: leading Re γ = {}",
            fmt_num(k),
            fmt_num(r),
            fmt_num(gamma.re)
        )));
    }
    let w = normalised_w(&x, pr.state.n_z());
    let omega = gamma.im.abs();
    let gamma = Complex64::new(gamma.re, omega);
    let times: Vec<f64> = if !opts.times.is_empty() {
        opts.times.clone()
    } else if omega > 1e-6 {
        let period = 2.0 * PI / omega;
        (0..opts.frames.max(1)).map(|i| period * i as f64 / opts.frames.max(1) as f64).collect()
    } else {
        vec![0.0]
    };
    let mut summary = Table::new(&["k", "R", "Re_gamma", "Im_gamma", "period", "frame", "t"]);
    let period = if omega > 1e-6 { Some(2.0 * PI / omega) } else { None };
    for (i, &t) in times.iter().enumerate() {
        let f = eigenfunction_field(&w, &pr.state.z, gamma, k, opts.n_x, t);
        let mut tab = Table::new(&["x", "z", "w1"]);
        for (ix, xv) in f.x.iter().enumerate() {
            for (iz, zv) in f.z.iter().enumerate() {
                tab.push(vec![(*xv).into(), (*zv).into(), f.values[ix][iz].into()]);
            }
        }
        sink.table(&format!("w1_t{i:03}"), &tab)?;
        summary.push(vec![
            k.into(),
            r.into(),
            gamma.re.into(),
            omega.into(),
            period.into(),
            i.into(),
            t.into(),
        ]);
    }
    sink.table("mode_frames", &summary)?;
    if let Some(period) = period {
        // time series and (w₁, dw₁/dt) orbit at x = 0 and the strongest-|W| height
        let iz = (0..w.len()).max_by(|&a, &b| w[a].norm().total_cmp(&w[b].norm())).unwrap_or(0);
        let mut ts = Table::new(&["t", "w1", "dw1_dt"]);
        let m = opts.series_samples.max(2);
        for j in 0..=m {
            let t = period * j as f64 / m as f64;
            let e = w[iz] * (gamma * t).exp();
            ts.push(vec![t.into(), e.re.into(), (gamma * e).re.into()]);
        }
        sink.table("mode_timeseries", &ts)?;
    }
    Ok(())
}

pub fn cmd_compare_upswim(cfg: &RunConfig, sink: &mut Sink) -> Result<()> {
    check_sweep(&cfg.solver)?;
    let pr = StabilityProblem::new(&cfg.suspension, &cfg.solver, Model::Full)?;
    let s = &cfg.solver;
    let cmp = compare_models(&pr, s.k_min, s.k_max, s.n_k)?;
    let mut t = Table::new(&["k", "R_full", "branch_full", "R_upswim", "branch_upswim", "rel_diff"]);
    t.comments.push(format!("max relative difference {}", fmt_num(cmp.max_rel_diff)));
    if let Some((lo, hi)) = cmp.divergence_band {
        t.comments.push(format!(
            "largest divergence for wavelengths in [{}, {}]",
            fmt_num(lo),
            fmt_num(hi)
        ));
    }
    let name = |b: Option<Branch>| b.map_or(Cell::Empty, |b| Cell::Text(b.name().into()));
    for row in &cmp.rows {
        t.push(vec![
            row.k.into(),
            row.r_full.into(),
            name(row.branch_full),
            row.r_upswim.into(),
            name(row.branch_upswim),
            row.rel_diff.into(),
        ]);
    }
    sink.table("compare_upswim", &t)?;
    Ok(())
}
