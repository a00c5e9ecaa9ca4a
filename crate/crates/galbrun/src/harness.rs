//! Convergence studies, rate estimation and machine-readable reports.
//!
//! A study sweeps a list of structured-mesh resolutions: per level it builds
//! the space and lifting, manufactures the right-hand side from the chosen
//! exact solution, solves, and records the graph-distance error. Rates come
//! from a least-squares fit of log(error) against log(h), with a
//! finest-pair fallback when coarse levels are visibly pre-asymptotic.
//!
//! Everything here is f64: reports are serialized and the solver backend is
//! double precision.

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::assembly::{assemble_gram, assemble_rhs, assemble_system, scatter_free};
use crate::dgops::{assemble_lifting, graph_distance_deg, LiftingOperator};
use crate::error::{Error, Result};
use crate::felib::space::BdmSpace;
use crate::linalg::dot;
use crate::mesh::{AxisBox, Mesh};
use crate::physics::{
    mach_report, manufactured_preset, parameter_preset, strong_residual, AnalyticVectorField,
    MachReport, ParameterSet,
};
use crate::solver::{infsup_sigma_extremes, solve_linear};

pub const DEFAULT_SOLVER_TOL: f64 = 1e-10;
pub const DEFAULT_CPI_SHARP: f64 = 2.0;
pub const DEFAULT_MACH_GRID: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(Error::Config(format!("unknown format '{other}' (csv or json)"))),
        }
    }
}

/// Configuration of one convergence study.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct StudyConfig {
    pub preset: String,
    pub mms: String,
    pub k: usize,
    pub l: usize,
    pub levels: Vec<usize>,
    pub quad_assembly: Option<usize>,
    pub quad_error: Option<usize>,
    pub strict_mach: bool,
    pub solver_tol: f64,
    pub cpi_sharp: f64,
    pub mach_grid: usize,
    pub out: Option<String>,
    pub format: ReportFormat,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            preset: "constant".into(),
            mms: "sine".into(),
            k: 1,
            l: 1,
            levels: vec![1, 2],
            quad_assembly: None,
            quad_error: None,
            strict_mach: false,
            solver_tol: DEFAULT_SOLVER_TOL,
            cpi_sharp: DEFAULT_CPI_SHARP,
            mach_grid: DEFAULT_MACH_GRID,
            out: None,
            format: ReportFormat::Csv,
        }
    }
}

impl StudyConfig {
    /// Parse the flat `key = value` config format. Lists are comma
    /// separated; `#` starts a comment. A `refinements = r` key expands to
    /// levels 1, 2, 4, ..., 2^r.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = StudyConfig::default();
        let mut l_set = false;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config(format!(
                    "line {}: expected 'key = value', got '{raw}'",
                    lineno + 1
                )));
            };
            let key = key.trim();
            let value = value.trim();
            let bad =
                |what: &str| Error::Config(format!("line {}: bad {what}: '{value}'", lineno + 1));
            match key {
                "preset" => cfg.preset = value.to_string(),
                "mms" => cfg.mms = value.to_string(),
                "k" => cfg.k = value.parse().map_err(|_| bad("integer"))?,
                "l" => {
                    cfg.l = value.parse().map_err(|_| bad("integer"))?;
                    l_set = true;
                }
                "levels" => {
                    cfg.levels = value
                        .split(',')
                        .map(|v| v.trim().parse::<usize>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| bad("level list"))?;
                }
                "refinements" => {
                    let r: u32 = value.parse().map_err(|_| bad("integer"))?;
                    cfg.levels = (0..=r).map(|i| 1usize << i).collect();
                }
                "quad_assembly" => cfg.quad_assembly = Some(value.parse().map_err(|_| bad("integer"))?),
                "quad_error" => cfg.quad_error = Some(value.parse().map_err(|_| bad("integer"))?),
                "strict_mach" => cfg.strict_mach = value.parse().map_err(|_| bad("bool"))?,
                "solver_tol" => cfg.solver_tol = value.parse().map_err(|_| bad("float"))?,
                "cpi_sharp" => cfg.cpi_sharp = value.parse().map_err(|_| bad("float"))?,
                "mach_grid" => cfg.mach_grid = value.parse().map_err(|_| bad("integer"))?,
                "out" => cfg.out = Some(value.to_string()),
                "format" => cfg.format = value.parse()?,
                other => {
                    return Err(Error::Config(format!("line {}: unknown key '{other}'", lineno + 1)))
                }
            }
        }
        // the full convergence rate needs the lifting degree to match k
        if !l_set {
            cfg.l = cfg.k;
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.k) {
            return Err(Error::Config(format!("k must be in 1..=3, got {}", self.k)));
        }
        if self.l == 0 {
            return Err(Error::Config("l must be at least 1".into()));
        }
        if self.levels.iter().any(|&n| n == 0) {
            return Err(Error::Config("levels must be positive".into()));
        }
        if !(self.solver_tol > 0.0) {
            return Err(Error::Config("solver_tol must be positive".into()));
        }
        Ok(())
    }

    pub fn validate_for_rates(&self) -> Result<()> {
        self.validate()?;
        if self.levels.len() < 2 {
            return Err(Error::Config(
                "at least 2 mesh levels are required for rate estimation".into(),
            ));
        }
        Ok(())
    }

    /// Key/value echo for report metadata (deterministic order).
    pub fn echo(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        m.insert("preset".into(), self.preset.clone());
        m.insert("mms".into(), self.mms.clone());
        m.insert("k".into(), self.k.to_string());
        m.insert("l".into(), self.l.to_string());
        m.insert(
            "levels".into(),
            self.levels.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(","),
        );
        if let Some(q) = self.quad_assembly {
            m.insert("quad_assembly".into(), q.to_string());
        }
        if let Some(q) = self.quad_error {
            m.insert("quad_error".into(), q.to_string());
        }
        m.insert("strict_mach".into(), self.strict_mach.to_string());
        m.insert("solver_tol".into(), format!("{}", self.solver_tol));
        m.insert("cpi_sharp".into(), format!("{}", self.cpi_sharp));
        m.insert("mach_grid".into(), self.mach_grid.to_string());
        m
    }
}

/// Serializable mirror of a Mach report.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MachData {
    pub mach_norm: f64,
    pub c_m: f64,
    pub theta: f64,
    pub cpi_sharp: f64,
    pub cpi_heuristic: Option<f64>,
    pub threshold: f64,
    pub satisfied: bool,
    pub sample_grid: usize,
}

impl From<&MachReport<f64>> for MachData {
    fn from(r: &MachReport<f64>) -> Self {
        MachData {
            mach_norm: r.mach_norm,
            c_m: r.c_m,
            theta: r.theta,
            cpi_sharp: r.cpi_sharp,
            cpi_heuristic: r.cpi_heuristic,
            threshold: r.threshold,
            satisfied: r.satisfied,
            sample_grid: r.sample_grid,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct LevelRow {
    pub level: usize,
    pub h_max: f64,
    pub ndof: usize,
    pub dn_error: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ConvergenceTable {
    pub rows: Vec<LevelRow>,
    /// Rate reported by the study (least-squares fit, or the finest pair
    /// when the pre-asymptotic guard fires).
    pub fitted_rate: Option<f64>,
    pub global_fit: Option<f64>,
    pub finest_pair_rate: Option<f64>,
    pub used_finest_pair: bool,
    pub config_echo: BTreeMap<String, String>,
    pub mach: Option<MachData>,
    pub failure: Option<String>,
}

impl ConvergenceTable {
    fn empty(config: &StudyConfig) -> Self {
        ConvergenceTable {
            rows: Vec::new(),
            fitted_rate: None,
            global_fit: None,
            finest_pair_rate: None,
            used_finest_pair: false,
            config_echo: config.echo(),
            mach: None,
            failure: None,
        }
    }
}

/// Failure carrying the partial table accumulated so far.
#[derive(Debug)]
pub struct StudyFailure {
    pub level: Option<usize>,
    pub error: Error,
    pub partial: ConvergenceTable,
}

impl std::fmt::Display for StudyFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.level {
            Some(n) => write!(f, "study failed at level n = {n}: {}", self.error),
            None => write!(f, "study failed: {}", self.error),
        }
    }
}

/// Least-squares slope of log(error) against log(h).
pub fn estimate_rate(errors: &[f64], hs: &[f64]) -> Result<f64> {
    if errors.len() != hs.len() || errors.len() < 2 {
        return Err(Error::invalid("need equally many errors and hs, at least two"));
    }
    for w in hs.windows(2) {
        if !(w[1] < w[0]) {
            return Err(Error::invalid("hs must be strictly decreasing"));
        }
    }
    if errors.iter().any(|&e| !(e > 0.0)) || hs.iter().any(|&h| !(h > 0.0)) {
        return Err(Error::invalid("errors and hs must be positive"));
    }
    let n = errors.len() as f64;
    let lx: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let ly: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..errors.len() {
        num += (lx[i] - mx) * (ly[i] - my);
        den += (lx[i] - mx) * (lx[i] - mx);
    }
    Ok(num / den)
}

/// Everything needed to run levels of one study.
struct StudySetup {
    params: ParameterSet<f64>,
    exact: AnalyticVectorField<f64>,
    mach: MachReport<f64>,
}

fn setup(config: &StudyConfig) -> Result<StudySetup> {
    let params = parameter_preset::<f64>(&config.preset)?;
    params.validate(8)?;
    let exact = manufactured_preset::<f64>(&config.mms)?;
    check_normal_trace(&exact, &params.domain)?;
    let mach = mach_report(&params, config.cpi_sharp, config.mach_grid)?;
    Ok(StudySetup { params, exact, mach })
}

/// Sampled check that the manufactured solution satisfies nu.u = 0 on the
/// box boundary.
fn check_normal_trace(u: &AnalyticVectorField<f64>, domain: &AxisBox<f64>) -> Result<()> {
    let mut rng = crate::linalg::SplitMix64::new(0x5eed);
    for _ in 0..32 {
        let a = rng.next_unit::<f64>();
        let b = rng.next_unit::<f64>();
        let span = |d: usize, t: f64| domain.lo[d] + (domain.hi[d] - domain.lo[d]) * t;
        let pts = [
            ([domain.lo[0], span(1, a), span(2, b)], [1.0, 0.0, 0.0]),
            ([domain.hi[0], span(1, a), span(2, b)], [1.0, 0.0, 0.0]),
            ([span(0, a), domain.lo[1], span(2, b)], [0.0, 1.0, 0.0]),
            ([span(0, a), domain.hi[1], span(2, b)], [0.0, 1.0, 0.0]),
            ([span(0, a), span(1, b), domain.lo[2]], [0.0, 0.0, 1.0]),
            ([span(0, a), span(1, b), domain.hi[2]], [0.0, 0.0, 1.0]),
        ];
        for (x, n) in pts {
            if dot(u.value(x), n).abs() > 1e-10 {
                return Err(Error::invalid(format!(
                    "manufactured solution '{}' has nonzero normal trace at {x:?}",
                    u.name
                )));
            }
        }
    }
    Ok(())
}

fn run_level(config: &StudyConfig, setup: &StudySetup, n: usize) -> Result<LevelRow> {
    let start = Instant::now();
    let quad_assembly = config.quad_assembly.unwrap_or(2 * config.k + 2);
    let quad_error = config.quad_error.unwrap_or(2 * config.k + 6);
    let mesh = Arc::new(Mesh::build_structured_cube(n, setup.params.domain)?);
    let h_max = mesh.h_max;
    let space = BdmSpace::new(mesh, config.k)?;
    let lifting: LiftingOperator<f64> = assemble_lifting(
        &space,
        setup.params.velocity.as_velocity_field(),
        config.l,
        2 * config.k + 2,
    )?;
    let system = assemble_system(
        &space,
        &lifting,
        &setup.params,
        &setup.mach,
        config.strict_mach,
        quad_assembly,
    )?;
    let f = strong_residual(&setup.exact, &setup.params);
    let rhs = assemble_rhs(&space, f, quad_assembly)?;
    let x = solve_linear(&system, &rhs, config.solver_tol)?;
    let full = scatter_free(&space, &x);

    let exact = &setup.exact;
    let b = setup.params.velocity.as_velocity_field();
    let dn_error = graph_distance_deg(
        &space,
        &lifting,
        |x| exact.value(x),
        |x| exact.divergence(x),
        |x| exact.convective(x, b(x)),
        &full,
        quad_error,
    );
    if !dn_error.is_finite() {
        return Err(Error::Singular(format!("non-finite error at level n = {n}")));
    }
    Ok(LevelRow {
        level: n,
        h_max,
        ndof: space.nfree,
        dn_error,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Run the full study: per level build, assemble, solve and measure, then
/// fit the rate. On failure the partial table is returned inside the error.
pub fn run_convergence(config: &StudyConfig) -> std::result::Result<ConvergenceTable, Box<StudyFailure>> {
    let fail = |level: Option<usize>, error: Error, partial: ConvergenceTable| {
        Box::new(StudyFailure { level, error, partial })
    };
    let mut table = ConvergenceTable::empty(config);
    if let Err(e) = config.validate_for_rates() {
        let mut t = table.clone();
        t.failure = Some(e.to_string());
        return Err(fail(None, e, t));
    }
    let setup = match setup(config) {
        Ok(s) => s,
        Err(e) => {
            table.failure = Some(e.to_string());
            return Err(fail(None, e, table));
        }
    };
    table.mach = Some(MachData::from(&setup.mach));

    for &n in &config.levels {
        match run_level(config, &setup, n) {
            Ok(row) => {
                if let Some(prev) = table.rows.last() {
                    if !(row.h_max < prev.h_max) {
                        let e = Error::invalid(format!(
                            "levels must have strictly decreasing h_max (n = {n})"
                        ));
                        table.failure = Some(e.to_string());
                        return Err(fail(Some(n), e, table));
                    }
                }
                table.rows.push(row);
            }
            Err(e) => {
                table.failure = Some(format!("level n = {n}: {e}"));
                return Err(fail(Some(n), e, table));
            }
        }
    }

    let errs: Vec<f64> = table.rows.iter().map(|r| r.dn_error).collect();
    let hs: Vec<f64> = table.rows.iter().map(|r| r.h_max).collect();
    if errs.iter().all(|&e| e > 0.0) {
        let global = estimate_rate(&errs, &hs).ok();
        let m = errs.len();
        let finest = estimate_rate(&errs[m - 2..], &hs[m - 2..]).ok();
        table.global_fit = global;
        table.finest_pair_rate = finest;
        table.fitted_rate = global;
        if let (Some(g), Some(f)) = (global, finest) {
            if m >= 3 && (g - f).abs() > 0.3 {
                table.fitted_rate = finest;
                table.used_finest_pair = true;
            }
        }
    }
    Ok(table)
}

/// Single-level solve for the CLI `solve` subcommand.
pub fn run_single(config: &StudyConfig, n: usize) -> Result<(LevelRow, MachData)> {
    config.validate()?;
    let setup = setup(config)?;
    let row = run_level(config, &setup, n)?;
    Ok((row, MachData::from(&setup.mach)))
}

/// Assemble the system at one level and export it in coordinate text
/// format (row, col, re, im per line).
pub fn export_system_matrix(config: &StudyConfig, n: usize, path: &str) -> Result<()> {
    config.validate()?;
    let setup = setup(config)?;
    let quad_assembly = config.quad_assembly.unwrap_or(2 * config.k + 2);
    let mesh = Arc::new(Mesh::build_structured_cube(n, setup.params.domain)?);
    let space = BdmSpace::new(mesh, config.k)?;
    let lifting = assemble_lifting(
        &space,
        setup.params.velocity.as_velocity_field(),
        config.l,
        2 * config.k + 2,
    )?;
    let system = assemble_system(
        &space,
        &lifting,
        &setup.params,
        &setup.mach,
        config.strict_mach,
        quad_assembly,
    )?;
    system.export_coo(path)
}

/// Inf-sup diagnostic on a coarse level.
pub fn run_infsup(config: &StudyConfig, n: usize, cap: usize) -> Result<(f64, f64, usize)> {
    config.validate()?;
    let setup = setup(config)?;
    let quad_assembly = config.quad_assembly.unwrap_or(2 * config.k + 2);
    let mesh = Arc::new(Mesh::build_structured_cube(n, setup.params.domain)?);
    let space = BdmSpace::new(mesh, config.k)?;
    let lifting = assemble_lifting(
        &space,
        setup.params.velocity.as_velocity_field(),
        config.l,
        2 * config.k + 2,
    )?;
    let system = assemble_system(
        &space,
        &lifting,
        &setup.params,
        &setup.mach,
        config.strict_mach,
        quad_assembly,
    )?;
    let gram = assemble_gram(&space, &lifting, quad_assembly)?;
    let (lo, hi) = infsup_sigma_extremes(&system, &gram, cap)?;
    Ok((lo, hi, space.nfree))
}

/// Render a table in the requested format.
pub fn render_report(table: &ConvergenceTable, format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Csv => {
            let mut s = String::from("level,h_max,ndof,dn_error,seconds\n");
            for r in &table.rows {
                s.push_str(&format!(
                    "{},{},{},{},{}\n",
                    r.level, r.h_max, r.ndof, r.dn_error, r.seconds
                ));
            }
            Ok(s)
        }
        ReportFormat::Json => serde_json::to_string_pretty(table)
            .map_err(|e| Error::Config(format!("serialization failed: {e}"))),
    }
}

/// Write the rendered report to a file.
pub fn emit_report(table: &ConvergenceTable, format: ReportFormat, path: &str) -> Result<()> {
    let text = render_report(table, format)?;
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    w.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))?;
    Ok(())
}
