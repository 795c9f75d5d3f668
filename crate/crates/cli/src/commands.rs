//! One handler per subcommand. Handlers return a report plus named verdicts;
//! CSV outputs go to `--out` or, when absent, to standard output.

use std::fs::File;
use std::io::{self, Read};
use std::path::Path;

use bregvar::convex::LogGrid;
use bregvar::hardystein::{
    elliptic_exit_mc, elliptic_identity_bm, mc_parabolic, parabolic_identity, Affine,
    ExitMcConfig, McParabolicConfig, ParabolicConfig,
};
use bregvar::orlicz::{luxemburg_norm, DiscreteMeasure, WeightedSample};
use bregvar::paths::{simulate, RandomPartition, SamplePath, SimSpec};
use bregvar::semigroup::{transition_density, Grid, GridFunction, LevySymbol};
use bregvar::suite::{run_criterion, Level, SuiteConfig, SuiteReport, CRITERIA};
use bregvar::variation::{definition_trace, discrete_variation, pathwise_variation};
use bregvar::verify::{
    doob_check, enumerate_isometry, mc_isometry, mc_stopped_isometry, sum_of_independent,
    FiniteMartingale, McConfig,
};
use bregvar::{Error, Execution, YoungFunction};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::args::*;
use crate::output::{sig, TABLE_DIGITS};

/// Version of the CSV and JSON layouts written by this tool.
pub const SCHEMA_VERSION: u32 = 1;

/// Why a command did not produce a report.
#[derive(Debug)]
pub enum Failure {
    /// Bad configuration or input; exit status 2.
    Usage(String),
    /// Numerical or resolution failure; exit status 3.
    Numerical(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Numerical(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Numerical(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::UnknownFamily(_)
            | Error::InvalidParameter(_)
            | Error::LengthMismatch { .. }
            | Error::PartitionPoint(_)
            | Error::DepthExceeded { .. }
            | Error::OutsideGrid { .. }
            | Error::OutsideInterval { .. } => Failure::Usage(e.to_string()),
            _ => Failure::Numerical(e.to_string()),
        }
    }
}

fn io_failure(path: &Path) -> impl Fn(io::Error) -> Failure + '_ {
    move |e| Failure::Usage(format!("{}: {e}", path.display()))
}

fn csv_failure(e: csv::Error) -> Failure {
    Failure::Usage(format!("csv: {e}"))
}

pub type Outcome<T> = Result<T, Failure>;

/// Report, verdicts and optional raw text of one command.
#[derive(Debug)]
pub struct Output {
    pub report: Value,
    pub checks: Vec<(String, bool)>,
    /// Printed instead of the report table when `--json` is off.
    pub text: Option<String>,
}

impl Output {
    fn report<T: Serialize>(report: &T) -> Self {
        Self {
            report: serde_json::to_value(report).expect("serializable report"),
            checks: Vec::new(),
            text: None,
        }
    }

    fn check(mut self, name: &str, passed: bool) -> Self {
        self.checks.push((name.to_string(), passed));
        self
    }
}

/// Settings shared by all handlers.
#[derive(Debug, Clone, Copy)]
pub struct Context {
    pub exec: Execution,
}

pub fn resolve_seed(seed: Option<u64>) -> Outcome<u64> {
    if let Some(s) = seed {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Failure::Usage(format!("{SEED_ENV}=`{v}` is not a 64-bit seed"))),
        Err(_) => Ok(DEFAULT_SEED),
    }
}

fn parse_phi(spec: &str) -> Outcome<YoungFunction> {
    Ok(spec.parse::<YoungFunction>()?)
}

fn required<T: Clone>(value: &Option<T>, key: &str) -> Outcome<T> {
    value
        .clone()
        .ok_or_else(|| Failure::Usage(format!("missing required key `{key}`")))
}

/// Writes CSV rows to `out`, or returns them as text.
fn emit_csv<R: Serialize>(out: Option<&Path>, rows: impl Iterator<Item = R>) -> Outcome<Option<String>> {
    match out {
        Some(path) => {
            let file = File::create(path).map_err(io_failure(path))?;
            let mut w = csv::Writer::from_writer(file);
            for r in rows {
                w.serialize(r).map_err(csv_failure)?;
            }
            w.flush().map_err(io_failure(path))?;
            Ok(None)
        }
        None => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for r in rows {
                w.serialize(r).map_err(csv_failure)?;
            }
            let bytes = w.into_inner().map_err(|e| Failure::Usage(e.to_string()))?;
            Ok(Some(String::from_utf8(bytes).expect("csv is utf-8")))
        }
    }
}

fn read_input(path: &Path) -> Outcome<String> {
    let mut s = String::new();
    if path.as_os_str() == "-" {
        io::stdin()
            .read_to_string(&mut s)
            .map_err(io_failure(path))?;
    } else {
        File::open(path)
            .and_then(|mut f| f.read_to_string(&mut s))
            .map_err(io_failure(path))?;
    }
    Ok(s)
}

pub fn young(a: &YoungArgs) -> Outcome<Output> {
    let phi = match &a.phi {
        Some(spec) => parse_phi(spec)?,
        None => match a.family.as_str() {
            "power" => YoungFunction::builtin("power", &[a.p])?,
            "plog" => YoungFunction::builtin("plog", &[a.p, a.gamma])?,
            other => return Err(Error::UnknownFamily(other.to_string()).into()),
        },
    };
    Ok(match a.mode {
        YoungMode::Info => {
            let k = phi.delta2_constant(&LogGrid::default())?;
            let ind = phi.indices()?;
            Output::report(&json!({
                "k_phi": k.k_phi,
                "d_phi": ind.lower,
                "D_phi": ind.upper,
                "c_phi": ind.doob_constant().ok(),
                "exact": k.exact && ind.exact,
            }))
        }
        YoungMode::Bregman => {
            let (x, y) = (required(&a.x, "x")?, required(&a.y, "y")?);
            let value = phi.bregman_divergence(x, y)?;
            Output::report(&json!({"x": x, "y": y, "divergence": value}))
        }
        YoungMode::Conjugate => {
            let x = required(&a.x, "x")?;
            let value = phi.legendre_transform(x, 1e12)?;
            Output::report(&json!({"x": x, "conjugate": value}))
        }
    })
}

#[derive(Deserialize)]
struct WeightRow {
    value: f64,
    weight: f64,
}

pub fn orlicz(a: &OrliczArgs) -> Outcome<Output> {
    let path = required(&a.data, "data")?;
    let text = read_input(&path)?;
    let mut values = Vec::new();
    let mut weights = Vec::new();
    for row in csv::Reader::from_reader(text.as_bytes()).deserialize() {
        let r: WeightRow = row.map_err(csv_failure)?;
        values.push(r.value);
        weights.push(r.weight);
    }
    let phi = parse_phi(&a.phi)?;
    let mu = DiscreteMeasure::from_weights(weights)?;
    let n = values.len();
    let norm = luxemburg_norm(&WeightedSample::new(values), &mu, &phi, a.tol)?;
    let mut out = Output::report(&json!({"phi": a.phi, "points": n, "norm": norm}));
    out.text = Some(format!("{}\n", sig(norm, TABLE_DIGITS)));
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct PathRow {
    t: f64,
    x: f64,
    is_jump: u8,
    x_left: f64,
}

pub fn simulate_cmd(a: &SimulateArgs, seed: u64) -> Outcome<Output> {
    let spec = SimSpec::new(a.horizon, a.steps)
        .with_levels(a.levels)
        .with_x0(a.x0);
    let path = simulate(&a.model.0, &spec, seed)?;
    let rows = path.rows().map(|(t, x, j, l)| PathRow {
        t,
        x,
        is_jump: u8::from(j),
        x_left: l,
    });
    let text = emit_csv(a.out.as_deref(), rows)?;
    let mut out = Output::report(&json!({
        "seed": seed,
        "nodes": path.len(),
        "jumps": path.jumps.len(),
        "terminal": path.terminal(),
        "out": a.out,
    }));
    out.text = text;
    Ok(out)
}

fn read_path(path: &Path, qv_rate: f64) -> Outcome<SamplePath> {
    let text = read_input(path)?;
    let mut rows = Vec::new();
    for row in csv::Reader::from_reader(text.as_bytes()).deserialize() {
        let r: PathRow = row.map_err(csv_failure)?;
        rows.push((r.t, r.x, r.is_jump != 0, r.x_left));
    }
    Ok(SamplePath::from_rows(&rows, qv_rate)?)
}

#[derive(Serialize)]
struct TraceRow {
    t: f64,
    v: f64,
    cont_term: f64,
    jump_term: f64,
}

pub fn variation(a: &VariationArgs) -> Outcome<Output> {
    let input = required(&a.input, "in")?;
    let phi = parse_phi(&a.phi)?;
    let trace = match a.route {
        Route::Pathwise => {
            let sigma2 = required(&a.sigma2, "sigma2")?;
            pathwise_variation(&phi, &read_path(&input, sigma2)?)?
        }
        Route::Definition => {
            let path = read_path(&input, a.sigma2.unwrap_or(0.0))?;
            definition_trace(&phi, &path, &RandomPartition::full(&path))?
        }
        Route::Discrete => discrete_variation(&phi, &read_path(&input, 0.0)?.values)?,
    };
    let rows = (0..trace.values.len()).map(|k| TraceRow {
        t: trace.times[k],
        v: trace.values[k],
        cont_term: trace.cont[k],
        jump_term: trace.jump[k],
    });
    let text = emit_csv(a.out.as_deref(), rows)?;
    let mut out = Output::report(&json!({
        "route": a.route,
        "nodes": trace.values.len(),
        "terminal": trace.terminal(),
        "continuous_term": trace.continuous_term(),
        "jump_term": trace.jump_term(),
        "monotone": trace.is_monotone(),
        "form_gap": trace.form_gap,
    }));
    out.text = text;
    Ok(out)
}

pub fn isometry(a: &IsometryArgs, seed: u64, ctx: Context) -> Outcome<Output> {
    let phi = parse_phi(&a.phi)?;
    let mc = || {
        McConfig::new(SimSpec::new(a.horizon, a.steps).with_x0(a.x0), a.paths, seed)
            .with_exec(ctx.exec)
    };
    let report = match a.mode {
        IsometryMode::Enumerate => {
            let walk = FiniteMartingale::symmetric_walk(a.depth, a.x0, a.step)?;
            enumerate_isometry(&walk, &phi)?
        }
        IsometryMode::Mc => mc_isometry(&a.model.0, &phi, &mc())?,
        IsometryMode::Stopped => {
            let Pair(l, r) = required(&a.interval, "interval")?;
            mc_stopped_isometry(&a.model.0, &phi, (l, r), &mc())?
        }
    };
    Ok(Output::report(&report).check("isometry", report.verdict.passed()))
}

pub fn doob(a: &DoobArgs, seed: u64, ctx: Context) -> Outcome<Output> {
    let phi = parse_phi(&a.phi)?;
    let cfg = McConfig::new(SimSpec::new(a.horizon, a.steps).with_x0(a.x0), a.paths, seed)
        .with_exec(ctx.exec);
    let report = doob_check(&a.model.0, &phi, &cfg)?;
    Ok(Output::report(&report).check("doob", report.verdict.passed()))
}

pub fn sum_indep(a: &SumIndepArgs, seed: u64, ctx: Context) -> Outcome<Output> {
    let phi = parse_phi(&a.phi)?;
    let cfg = McConfig::new(SimSpec::new(a.horizon, a.steps), a.paths, seed).with_exec(ctx.exec);
    let r = sum_of_independent(&a.model_x.0, &a.model_y.0, &phi, &cfg)?;
    Ok(Output::report(&r)
        .check("lower", r.lower.verdict.passed())
        .check("upper", r.upper.verdict.passed()))
}

#[derive(Serialize)]
struct DensityRow {
    x: f64,
    p: f64,
}

pub fn semigroup(a: &SemigroupArgs) -> Outcome<Output> {
    let SemigroupMode::Density = a.mode;
    let symbol = LevySymbol::from_model(&a.symbol.0)?;
    let grid = Grid::new(a.half_width, a.m)?;
    let p = transition_density(&symbol, a.t, grid)?;
    let rows = (0..grid.len()).map(|j| DensityRow {
        x: grid.x(j),
        p: p.values[j],
    });
    let text = emit_csv(a.out.as_deref(), rows)?;
    let mut out = Output::report(&json!({
        "t": a.t,
        "points": grid.len(),
        "mass": p.integral(),
        "p_at_origin": p.values[grid.len() / 2],
    }));
    out.text = text;
    Ok(out)
}

fn initial_function(spec: &str, grid: Grid) -> Outcome<GridFunction> {
    let parts: Vec<&str> = spec.split(':').collect();
    let num = |t: &str| {
        t.trim()
            .parse::<f64>()
            .map_err(|_| Failure::Usage(format!("bad number `{t}` in f = `{spec}`")))
    };
    match parts.as_slice() {
        ["gaussian", s] => Ok(GridFunction::gaussian(grid, num(s)?, 1.0)),
        ["gaussian", s, amp] => Ok(GridFunction::gaussian(grid, num(s)?, num(amp)?)),
        _ => Err(Failure::Usage(format!(
            "f must be gaussian:S or gaussian:S:AMPLITUDE, got `{spec}`"
        ))),
    }
}

pub fn hardy_stein(a: &HardySteinArgs, seed: u64, ctx: Context) -> Outcome<Output> {
    let phi = parse_phi(&a.phi)?;
    match a.mode {
        HardySteinMode::Parabolic | HardySteinMode::ParabolicMc => {
            let grid = Grid::new(a.half_width, a.m)?;
            let f = initial_function(&a.f, grid)?;
            if a.mode == HardySteinMode::Parabolic {
                let defaults = ParabolicConfig::default();
                let cfg = ParabolicConfig {
                    horizon: a.horizon,
                    levels: a.levels,
                    time_nodes: a.time_nodes,
                    tolerance: a.tolerance.unwrap_or(defaults.tolerance),
                    exec: ctx.exec,
                    ..defaults
                };
                let symbol = LevySymbol::from_model(&a.symbol.0)?;
                let r = parabolic_identity(&f, &symbol, &phi, &cfg)?;
                Ok(Output::report(&r).check("parabolic", r.verdict.passed()))
            } else {
                let paths = a.paths.unwrap_or(10_000);
                let cfg = McParabolicConfig {
                    steps: a.steps,
                    exec: ctx.exec,
                    ..McParabolicConfig::new(a.horizon, paths, seed)
                };
                let r = mc_parabolic(&f, &a.symbol.0, &phi, &cfg)?;
                Ok(Output::report(&r).check("parabolic-mc", r.verdict.passed()))
            }
        }
        HardySteinMode::Elliptic => {
            let u = Affine { a: a.u.0, b: a.u.1 };
            let interval = (a.interval.0, a.interval.1);
            let tol = a.tolerance.unwrap_or(1e-8);
            let exact = elliptic_identity_bm(u, &phi, interval, a.x, a.sigma2, tol)?;
            let mut checks = vec![("elliptic".to_string(), exact.verdict.passed())];
            let exit = match a.paths {
                Some(paths) => {
                    let cfg = ExitMcConfig {
                        dt: a.dt,
                        paths,
                        seed,
                        exec: ctx.exec,
                    };
                    let r = elliptic_exit_mc(u, &phi, interval, a.x, a.sigma2, &cfg)?;
                    checks.push(("exit-mc".to_string(), r.verdict.passed()));
                    Some(r)
                }
                None => None,
            };
            let mut out = Output::report(&json!({"identity": exact, "exit_mc": exit}));
            out.checks = checks;
            Ok(out)
        }
    }
}

pub fn suite(a: &SuiteArgs, seed: u64, ctx: Context) -> Outcome<Output> {
    let level = match a.effective_level() {
        SuiteLevel::Quick => Level::Quick,
        SuiteLevel::Full => Level::Full,
    };
    let mut cfg = SuiteConfig::new(level, seed);
    cfg.exec = ctx.exec;
    for s in &a.tol {
        cfg.tol.set(&s.key, s.value)?;
    }
    let ids: Vec<u32> = if a.only.is_empty() {
        CRITERIA.iter().map(|c| c.0).collect()
    } else {
        a.only.clone()
    };
    let mut criteria = Vec::new();
    let mut text = String::new();
    for id in ids {
        let r = run_criterion(id, &cfg)?;
        let line = format!(
            "C{:<2} {}  {}  ({:.2} s)\n",
            r.id,
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.seconds
        );
        text.push_str(&line);
        for f in &r.failures {
            text.push_str(&format!("      {f}\n"));
        }
        if let Some(e) = &r.error {
            text.push_str(&format!("      error: {e}\n"));
        }
        criteria.push(r);
    }
    let passed = criteria.iter().filter(|c| c.passed).count();
    text.push_str(&format!("{passed} of {} checks passed\n", criteria.len()));
    let report = SuiteReport {
        config: cfg,
        failed: criteria.len() - passed,
        passed,
        criteria,
    };
    let mut out = Output::report(&report);
    for c in &report.criteria {
        out = out.check(&format!("C{}", c.id), c.passed);
    }
    out.text = Some(text);
    Ok(out)
}
