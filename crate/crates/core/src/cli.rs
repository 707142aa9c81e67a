//! Batch front end: `key = value` experiment files, subcommand dispatch and
//! CSV output.
//!
//! Column orders:
//!
//! | result  | columns |
//! |---------|---------|
//! | solve   | `t,F,F_second,sup_norm,energy` |
//! | sweep   | `eps,lifespan,uncertainty,status,doubling_time,dx,steps` |
//! | fit     | `kappa_fit,kappa_theory,r_squared,points_used,intercept,case` |
//! | kato    | `m,t_threshold,bound,t_blowup_numeric,condition_met,certified,scale_ratio,lower_bound_margin` |
//! | gn-probe translates | `k,ratio` (last row `slope,<value>`) |
//! | gn-probe stress     | `member,ratio` |
//! | gn-probe refine     | `dx,ratio` |
//!
//! Floats are written with 17 significant digits.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::Parser;

use crate::domain::{Grid1D, ProblemSpec, ProfileKind};
use crate::error::{Error, Result};
use crate::gn;
use crate::kato::{self, KatoConfig, KatoReport, Stepping};
use crate::lifespan::{self, CaseLabel, FitResult, GridPolicy, SweepResult};
use crate::wave_fd::{self, FdConfig, SolveResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    Solve,
    Sweep,
    Fit,
    Kato,
    GnProbe,
}

impl Subcommand {
    fn from_name(s: &str) -> Option<Subcommand> {
        Some(match s {
            "solve" => Subcommand::Solve,
            "sweep" => Subcommand::Sweep,
            "fit" => Subcommand::Fit,
            "kato" => Subcommand::Kato,
            "gn-probe" => Subcommand::GnProbe,
            _ => return None,
        })
    }

    fn required(&self) -> &'static [&'static str] {
        match self {
            Subcommand::Solve => &["p", "alpha", "epsilon", "R", "f", "g"],
            Subcommand::Sweep | Subcommand::Fit => &["p", "alpha", "R", "f"],
            Subcommand::Kato => &["p", "a", "q", "B", "R", "T0", "F0", "F1"],
            Subcommand::GnProbe => &["p", "b", "mode"],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Num(f64),
    Text(String),
    List(Vec<f64>),
}

#[derive(Debug, Clone, Copy)]
enum Kind {
    Num,
    Int,
    Bool,
    Profile,
    Case,
    Mode,
    List,
    Path,
}

struct KeySpec {
    name: &'static str,
    kind: Kind,
    /// Range check and its description.
    check: Option<(fn(f64) -> bool, &'static str)>,
}

macro_rules! key {
    ($n:literal, $k:ident) => {
        KeySpec { name: $n, kind: Kind::$k, check: None }
    };
    ($n:literal, $k:ident, $c:expr, $d:literal) => {
        KeySpec { name: $n, kind: Kind::$k, check: Some(($c, $d)) }
    };
}

const KEYS: &[KeySpec] = &[
    key!("p", Num, |v| v > 1.0, "p > 1"),
    key!("alpha", Num, |v| v > -1.0, "alpha > -1"),
    key!("epsilon", Num, |v| v > 0.0, "epsilon > 0"),
    key!("R", Num, |v| v > 0.0, "R > 0"),
    key!("f", Profile),
    key!("g", Profile),
    key!("nonlinear", Bool),
    key!("dx", Num, |v| v > 0.0, "dx > 0"),
    key!("cfl", Num, |v| v > 0.0 && v <= 1.0, "0 < cfl <= 1"),
    key!("t_max", Num, |v| v > 0.0, "t_max > 0"),
    key!("sample_stride", Int, |v| v >= 1.0, "sample_stride >= 1"),
    key!("case", Case),
    key!("eps_max", Num, |v| v > 0.0, "eps_max > 0"),
    key!("eps_ratio", Num, |v| v > 0.0 && v < 1.0, "0 < eps_ratio < 1"),
    key!("eps_count", Int, |v| v >= 1.0, "eps_count >= 1"),
    key!("cells_per_lifespan", Num, |v| v >= 1.0, "cells_per_lifespan >= 1"),
    key!("headroom", Num, |v| v >= 1.0, "headroom >= 1"),
    key!("prefactor", Num, |v| v > 0.0, "prefactor > 0"),
    key!("drop_largest", Int, |v| v >= 0.0, "drop_largest >= 0"),
    key!("sweep_csv", Path),
    key!("a", Num, |v| v > 0.0, "a > 0"),
    key!("q", Num, |v| v >= 0.0, "q >= 0"),
    key!("B", Num, |v| v > 0.0, "B > 0"),
    key!("A", Num, |v| v >= 0.0, "A >= 0"),
    key!("T0", Num, |v| v >= 0.0, "T0 >= 0"),
    key!("F0", Num, |v| v >= 0.0, "F0 >= 0"),
    key!("F1", Num, |v| v >= 0.0, "F1 >= 0"),
    key!("t0", Num, |v| v > 0.0, "t0 > 0"),
    key!("C0", Num, |v| v > 0.0, "C0 > 0"),
    key!("measure_A", Bool),
    key!("b", Num, |v| v.is_finite(), "b finite"),
    key!("mode", Mode),
    key!("chi", Profile),
    key!("k_values", List),
    key!("dx_values", List),
    key!("output", Path),
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub subcommand: Subcommand,
    pub params: BTreeMap<String, Value>,
    pub output_path: Option<PathBuf>,
    pub verbosity: u8,
}

/// Parses a number, accepting `a/b` fractions.
fn parse_number(s: &str) -> Option<f64> {
    if let Some((a, b)) = s.split_once('/') {
        let a: f64 = a.trim().parse().ok()?;
        let b: f64 = b.trim().parse().ok()?;
        return if b != 0.0 { Some(a / b) } else { None };
    }
    s.parse().ok()
}

fn parse_value(spec: &KeySpec, raw: &str, line: usize) -> Result<Value> {
    let err = |message: String| Error::Config { line, message };
    let value = match spec.kind {
        Kind::Num | Kind::Int => {
            let v = parse_number(raw).ok_or_else(|| err(format!("{}: '{raw}' is not a number", spec.name)))?;
            if !v.is_finite() {
                return Err(err(format!("{}: value must be finite", spec.name)));
            }
            if matches!(spec.kind, Kind::Int) && v.fract() != 0.0 {
                return Err(err(format!("{}: '{raw}' is not an integer", spec.name)));
            }
            Value::Num(v)
        }
        Kind::Bool => match raw {
            "true" | "1" | "yes" => Value::Num(1.0),
            "false" | "0" | "no" => Value::Num(0.0),
            _ => return Err(err(format!("{}: expected true or false, got '{raw}'", spec.name))),
        },
        Kind::Profile => {
            if ProfileKind::from_name(raw, 1.0).is_none() {
                return Err(err(format!("{}: unknown profile '{raw}' (bump, hat, cos2, null)", spec.name)));
            }
            Value::Text(raw.to_string())
        }
        Kind::Case => match raw {
            "positive_g" | "zero_g" => Value::Text(raw.to_string()),
            _ => return Err(err(format!("case: expected positive_g or zero_g, got '{raw}'"))),
        },
        Kind::Mode => match raw {
            "translates" | "stress" | "refine" => Value::Text(raw.to_string()),
            _ => return Err(err(format!("mode: expected translates, stress or refine, got '{raw}'"))),
        },
        Kind::List => {
            let vals = raw
                .split(',')
                .map(|s| parse_number(s.trim()))
                .collect::<Option<Vec<f64>>>()
                .ok_or_else(|| err(format!("{}: expected comma-separated numbers", spec.name)))?;
            if vals.is_empty() || vals.iter().any(|v| !v.is_finite()) {
                return Err(err(format!("{}: expected finite numbers", spec.name)));
            }
            Value::List(vals)
        }
        Kind::Path => {
            if raw.is_empty() {
                return Err(err(format!("{}: empty path", spec.name)));
            }
            Value::Text(raw.to_string())
        }
    };
    if let (Some((check, constraint)), Value::Num(v)) = (spec.check, &value) {
        if !check(*v) {
            return Err(err(format!("{} = {v} violates {constraint}", spec.name)));
        }
    }
    Ok(value)
}

/// Parses a `key = value` document. Blank lines and `#` comments are
/// skipped; each key may appear once.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut params = BTreeMap::new();
    let mut subcommand = None;
    for (idx, raw_line) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw_line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, raw) = content.split_once('=').ok_or(Error::Config {
            line,
            message: format!("expected 'key = value', got '{content}'"),
        })?;
        let key = key.trim();
        let raw = raw.trim();
        if key.is_empty() {
            return Err(Error::Config { line, message: "missing key".into() });
        }
        if key == "subcommand" {
            if subcommand.is_some() {
                return Err(Error::Config { line, message: "duplicate key 'subcommand'".into() });
            }
            subcommand = Some(Subcommand::from_name(raw).ok_or(Error::Config {
                line,
                message: format!("unknown subcommand '{raw}' (solve, sweep, fit, kato, gn-probe)"),
            })?);
            continue;
        }
        let spec = KEYS.iter().find(|k| k.name == key).ok_or(Error::Config {
            line,
            message: format!("unknown key '{key}'"),
        })?;
        if params.contains_key(key) {
            return Err(Error::Config { line, message: format!("duplicate key '{key}'") });
        }
        params.insert(key.to_string(), parse_value(spec, raw, line)?);
    }

    let cfg = RunConfig {
        subcommand: subcommand.ok_or_else(|| Error::ConfigValue("missing required key 'subcommand'".into()))?,
        output_path: match params.get("output") {
            Some(Value::Text(s)) => Some(PathBuf::from(s)),
            _ => None,
        },
        params,
        verbosity: 0,
    };
    cfg.cross_check()?;
    for key in cfg.subcommand.required() {
        if !cfg.params.contains_key(*key) {
            return Err(Error::ConfigValue(format!("missing required key '{key}'")));
        }
    }
    Ok(cfg)
}

impl RunConfig {
    pub fn num(&self, key: &str) -> Option<f64> {
        match self.params.get(key) {
            Some(Value::Num(v)) => Some(*v),
            _ => None,
        }
    }

    fn num_or(&self, key: &str, default: f64) -> f64 {
        self.num(key).unwrap_or(default)
    }

    fn req(&self, key: &str) -> Result<f64> {
        self.num(key)
            .ok_or_else(|| Error::ConfigValue(format!("missing required key '{key}'")))
    }

    fn text(&self, key: &str) -> Option<&str> {
        match self.params.get(key) {
            Some(Value::Text(s)) => Some(s),
            _ => None,
        }
    }

    fn list(&self, key: &str) -> Option<&[f64]> {
        match self.params.get(key) {
            Some(Value::List(v)) => Some(v),
            _ => None,
        }
    }

    fn flag(&self, key: &str, default: bool) -> bool {
        self.num(key).map_or(default, |v| v != 0.0)
    }

    fn case(&self) -> Option<CaseLabel> {
        match self.text("case")? {
            "zero_g" => Some(CaseLabel::ZeroG),
            _ => Some(CaseLabel::PositiveG),
        }
    }

    /// Constraints that involve several keys. Runs before the
    /// required-key check so that hypothesis violations are named first.
    fn cross_check(&self) -> Result<()> {
        let p = self.num("p");
        let alpha = self.num("alpha");
        if let (Some(CaseLabel::ZeroG), Some(p), Some(alpha)) = (self.case(), p, alpha) {
            if !(alpha >= 0.0 && alpha < p - 1.0) {
                return Err(Error::ConfigValue(format!(
                    "case = zero_g requires 0 <= alpha < p - 1 = {}, got alpha = {alpha}",
                    p - 1.0
                )));
            }
        }
        match (self.case(), self.text("g")) {
            (Some(CaseLabel::ZeroG), Some(g)) if g != "null" && g != "zero" => {
                return Err(Error::ConfigValue("case = zero_g requires g = null".into()));
            }
            (Some(CaseLabel::PositiveG), Some("null" | "zero")) => {
                return Err(Error::ConfigValue("case = positive_g requires a nonzero g".into()));
            }
            _ => {}
        }
        if self.subcommand == Subcommand::GnProbe {
            if let Some(b) = self.num("b") {
                let mode = self.text("mode").unwrap_or("");
                let ok = match mode {
                    "translates" => b < 1.0,
                    "stress" => (0.0..1.0).contains(&b),
                    _ => true,
                };
                if !ok {
                    return Err(Error::ConfigValue(format!("mode = {mode} does not allow b = {b}")));
                }
            }
            if self.text("mode") == Some("translates") && self.list("k_values").is_none() {
                return Err(Error::ConfigValue("mode = translates needs k_values".into()));
            }
            if self.text("mode") == Some("refine") && self.list("dx_values").is_none() {
                return Err(Error::ConfigValue("mode = refine needs dx_values".into()));
            }
        }
        if let Some(k) = self.list("k_values") {
            if k.iter().any(|&v| v < 0.0) || k.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::ConfigValue("k_values must be nonnegative and increasing".into()));
            }
        }
        if let Some(d) = self.list("dx_values") {
            if d.iter().any(|&v| v <= 0.0) {
                return Err(Error::ConfigValue("dx_values must be positive".into()));
            }
        }
        if self.subcommand == Subcommand::Kato {
            if let (Some(f1), Some(_)) = (self.num("F1"), self.num("t0")) {
                if f1 != 0.0 {
                    return Err(Error::ConfigValue("t0 selects the F1 = 0 variant".into()));
                }
            }
        }
        Ok(())
    }

    fn profile(&self, key: &str, radius: f64) -> Option<ProfileKind> {
        self.text(key).and_then(|s| ProfileKind::from_name(s, radius))
    }

    /// Problem template; `epsilon` defaults to 1 for sweeps.
    pub fn problem(&self) -> Result<ProblemSpec> {
        let r = self.req("R")?;
        let f = self.profile("f", r).unwrap_or(ProfileKind::Null);
        let g = match (self.profile("g", r), self.case()) {
            (Some(g), _) => g,
            (None, Some(CaseLabel::ZeroG)) => ProfileKind::Null,
            (None, _) => ProfileKind::SmoothBump { radius: r },
        };
        let spec = ProblemSpec::new(self.req("p")?, self.req("alpha")?, self.num_or("epsilon", 1.0), r, f, g)?;
        Ok(if self.flag("nonlinear", true) { spec } else { spec.linear() })
    }

    fn fd_config(&self) -> FdConfig {
        FdConfig {
            cfl: self.num_or("cfl", 0.9),
            t_max: self.num_or("t_max", 10.0),
            sample_stride: self.num_or("sample_stride", 1.0) as usize,
            ..FdConfig::default()
        }
    }

    fn policy(&self) -> GridPolicy {
        let d = GridPolicy::default();
        GridPolicy {
            base_dx: self.num_or("dx", d.base_dx),
            cells_per_lifespan: self.num_or("cells_per_lifespan", d.cells_per_lifespan),
            headroom: self.num_or("headroom", d.headroom),
            prefactor: self.num("prefactor"),
            ..d
        }
    }

    fn eps_values(&self) -> Vec<f64> {
        let top = self.num_or("eps_max", 1.0);
        let ratio = self.num_or("eps_ratio", 0.5);
        let n = self.num_or("eps_count", 8.0) as i32;
        (0..n).map(|k| top * ratio.powi(k)).collect()
    }

    fn kato_config(&self) -> Result<KatoConfig> {
        Ok(KatoConfig {
            p: self.req("p")?,
            a: self.req("a")?,
            q: self.req("q")?,
            lower_coef: self.num_or("A", 0.0),
            b: self.req("B")?,
            radius: self.req("R")?,
            t_lower: self.req("T0")?,
            f0: self.req("F0")?,
            f1: self.req("F1")?,
            doubling_time: self.num("t0"),
            c0: self.num("C0"),
        })
    }
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn solve_csv(result: &SolveResult) -> String {
    let d = &result.diagnostics;
    let mut out = String::from("t,F,F_second,sup_norm,energy\n");
    for k in 0..d.len() {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            fmt(d.times[k]),
            fmt(d.f[k]),
            fmt(d.f_second[k]),
            fmt(d.sup_norm[k]),
            fmt(d.energy[k])
        );
    }
    out
}

pub const SWEEP_HEADER: &str = "eps,lifespan,uncertainty,status,doubling_time,dx,steps";

pub fn sweep_csv(sweep: &SweepResult) -> String {
    let mut out = format!("{SWEEP_HEADER}\n");
    let doubling = sweep.doubling_times();
    for k in 0..sweep.eps_values.len() {
        let r = &sweep.results[k];
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            fmt(sweep.eps_values[k]),
            fmt(sweep.lifespans[k]),
            fmt(sweep.uncertainties[k]),
            r.termination.name(),
            fmt(doubling[k]),
            fmt(r.grid.dx),
            r.steps
        );
    }
    out
}

pub const FIT_HEADER: &str = "kappa_fit,kappa_theory,r_squared,points_used,intercept,case";

pub fn fit_csv(fit: Option<&FitResult>) -> String {
    let mut out = format!("{FIT_HEADER}\n");
    if let Some(f) = fit {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            fmt(f.kappa_fit),
            fmt(f.kappa_theory),
            fmt(f.r_squared),
            f.points_used,
            fmt(f.intercept),
            f.case_label.name()
        );
    }
    out
}

pub fn kato_csv(reports: &[KatoReport]) -> String {
    let mut out =
        String::from("m,t_threshold,bound,t_blowup_numeric,condition_met,certified,scale_ratio,lower_bound_margin\n");
    for r in reports {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            fmt(r.m),
            fmt(r.t_threshold),
            fmt(r.bound),
            fmt(r.t_blowup_numeric),
            r.condition_met,
            r.certified,
            fmt(r.scale_ratio),
            fmt(r.lower_bound_margin)
        );
    }
    out
}

pub fn table_csv(header: (&str, &str), rows: &[(String, f64)]) -> String {
    let mut out = format!("{},{}\n", header.0, header.1);
    for (label, v) in rows {
        let _ = writeln!(out, "{label},{}", fmt(*v));
    }
    out
}

/// Writes `content` to `path` in one call.
pub fn emit_csv(content: &str, path: &Path) -> Result<()> {
    std::fs::write(path, content).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads the `eps` and `lifespan` columns of a sweep CSV.
fn read_sweep_csv(path: &Path, template: &ProblemSpec) -> Result<SweepResult> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut lines = text.lines();
    if lines.next() != Some(SWEEP_HEADER) {
        return Err(Error::ConfigValue(format!("{}: not a sweep CSV", path.display())));
    }
    let mut eps = Vec::new();
    let mut life = Vec::new();
    for (n, line) in lines.enumerate() {
        let cols: Vec<&str> = line.split(',').collect();
        let parse = |s: &str| s.parse::<f64>().ok();
        match (cols.first().and_then(|s| parse(s)), cols.get(1).and_then(|s| parse(s))) {
            (Some(e), Some(t)) => {
                eps.push(e);
                life.push(t);
            }
            _ => {
                return Err(Error::ConfigValue(format!("{}: bad row {}", path.display(), n + 2)));
            }
        }
    }
    let failures = life
        .iter()
        .enumerate()
        .filter(|(_, t)| !t.is_finite())
        .map(|(k, _)| k)
        .collect();
    Ok(SweepResult {
        spec_template: *template,
        case_label: CaseLabel::of(template),
        uncertainties: vec![f64::NAN; eps.len()],
        eps_values: eps,
        lifespans: life,
        failures,
        prefactor: f64::NAN,
        results: Vec::new(),
    })
}

fn log(cfg: &RunConfig, level: u8, msg: impl FnOnce() -> String) {
    if cfg.verbosity >= level {
        eprintln!("{}", msg());
    }
}

/// Runs the configured experiment and returns the CSV text.
pub fn run(cfg: &RunConfig) -> Result<String> {
    match cfg.subcommand {
        Subcommand::Solve => {
            let spec = cfg.problem()?;
            let fd = cfg.fd_config();
            let dx = cfg.num_or("dx", 1.0 / 256.0);
            let grid = Grid1D::covering(fd.t_max + spec.radius + 4.0 * dx, dx)?;
            let res = wave_fd::solve(&spec, &grid, &fd)?;
            log(cfg, 1, || {
                format!(
                    "{} after {} steps, lifespan {:?}",
                    res.termination.name(),
                    res.steps,
                    res.lifespan_estimate
                )
            });
            Ok(solve_csv(&res))
        }
        Subcommand::Sweep => {
            let spec = cfg.problem()?;
            let eps = cfg.eps_values();
            log(cfg, 1, || format!("sweeping {} epsilon values", eps.len()));
            let s = lifespan::sweep(&spec, &eps, &cfg.policy(), &cfg.fd_config())?;
            Ok(sweep_csv(&s))
        }
        Subcommand::Fit => {
            let spec = cfg.problem()?;
            let s = match cfg.text("sweep_csv") {
                Some(path) => read_sweep_csv(Path::new(path), &spec)?,
                None => lifespan::sweep(&spec, &cfg.eps_values(), &cfg.policy(), &cfg.fd_config())?,
            };
            let fit = lifespan::fit_exponent(&s, cfg.num_or("drop_largest", 2.0) as usize)?;
            log(cfg, 1, || format!("kappa {} vs theory {}", fit.kappa_fit, fit.kappa_theory));
            Ok(fit_csv(Some(&fit)))
        }
        Subcommand::Kato => {
            let stepping = Stepping::default();
            let mut k = cfg.kato_config()?;
            if cfg.flag("measure_A", false) {
                k = kato::with_measured_lower_bound(&k, &stepping)?;
            }
            let report = kato::certify_lemma(&k, &stepping)?;
            Ok(kato_csv(&[report]))
        }
        Subcommand::GnProbe => run_gn(cfg),
    }
}

fn run_gn(cfg: &RunConfig) -> Result<String> {
    let p = cfg.req("p")?;
    let b = cfg.req("b")?;
    let dx = cfg.num_or("dx", 1.0 / 128.0);
    let chi = cfg.profile("chi", 1.0).unwrap_or(ProfileKind::SmoothBump { radius: 1.0 });
    match cfg.text("mode").unwrap_or("") {
        "translates" => {
            let k = cfg.list("k_values").unwrap_or(&[]);
            let s = gn::translate_scan(chi, b, p, k, dx)?;
            let mut rows: Vec<(String, f64)> = s
                .k_values
                .iter()
                .zip(&s.ratios)
                .map(|(k, r)| (fmt(*k), *r))
                .collect();
            rows.push(("slope".into(), s.slope));
            Ok(table_csv(("k", "ratio"), &rows))
        }
        "stress" => {
            let family = gn::stress_family(chi, dx)?;
            let rows = family
                .iter()
                .map(|m| Ok((m.label.clone(), gn::gn_ratio(&m.samples, &m.grid, b, p)?)))
                .collect::<Result<Vec<_>>>()?;
            Ok(table_csv(("member", "ratio"), &rows))
        }
        _ => {
            let dxs = cfg.list("dx_values").unwrap_or(&[]);
            let rows: Vec<(String, f64)> = gn::singular_refinement_scan(chi, b, p, dxs)?
                .into_iter()
                .map(|(d, r)| (fmt(d), r))
                .collect();
            Ok(table_csv(("dx", "ratio"), &rows))
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "weighted-wave", about = "Blow-up experiments for u_tt - u_xx = |x|^alpha |u|^p")]
struct Args {
    /// Experiment file with `key = value` lines.
    config: PathBuf,
    /// Output CSV path (default: the `output` key, else stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    verbose: u8,
}

/// Exit code 0 on success, 1 on configuration errors, 2 on runtime errors.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args = match Args::try_parse_from(args) {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {}: {e}", args.config.display());
            return 1;
        }
    };
    let mut cfg = match parse_config(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return 1;
        }
    };
    cfg.verbosity = args.verbose;
    if let Some(out) = args.out {
        cfg.output_path = Some(out);
    }
    let csv = match run(&cfg) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    match &cfg.output_path {
        Some(path) => match emit_csv(&csv, path) {
            Ok(()) => 0,
            Err(e) => {
                eprintln!("error: {e}");
                2
            }
        },
        None => {
            print!("{csv}");
            0
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SOLVE: &str = "p = 2\nalpha = 0\nepsilon = 1\nR = 1\nf = bump\ng = bump\nsubcommand = solve";

    #[test]
    fn schema_example_parses() {
        let c = parse_config(SOLVE).unwrap();
        assert_eq!(c.subcommand, Subcommand::Solve);
        assert_eq!(c.num("p"), Some(2.0));
        let spec = c.problem().unwrap();
        assert_eq!(spec.f, ProfileKind::SmoothBump { radius: 1.0 });
    }

    #[test]
    fn p_gate_names_constraint() {
        let e = parse_config("p = 0.5").unwrap_err().to_string();
        assert!(e.contains("p > 1"), "{e}");
        assert!(e.contains("line 1"), "{e}");
    }

    #[test]
    fn zero_g_hypothesis() {
        let e = parse_config("alpha = 1\np = 2\ncase = zero_g\nsubcommand = sweep")
            .unwrap_err()
            .to_string();
        assert!(e.contains("alpha < p - 1 = 1"), "{e}");
    }

    #[test]
    fn unknown_key_reports_line() {
        let e = parse_config("# comment\n\np = 2\nbogus = 3\n").unwrap_err();
        assert!(matches!(e, Error::Config { line: 4, .. }), "{e}");
    }

    #[test]
    fn malformed_and_missing() {
        assert!(matches!(parse_config("p 2"), Err(Error::Config { line: 1, .. })));
        let e = parse_config("subcommand = solve\np = 2").unwrap_err().to_string();
        assert!(e.contains("missing required key 'alpha'"), "{e}");
        assert!(parse_config("p = 2").is_err());
        assert!(parse_config("p = 2\np = 3").is_err());
    }

    #[test]
    fn full_precision_and_fractions() {
        let c = parse_config(&format!("{SOLVE}\ndx = 1/3\nt_max = 0.1000000000000000055511151231257827")).unwrap();
        assert_eq!(c.num("dx"), Some(1.0 / 3.0));
        assert_eq!(c.num("t_max"), Some(0.1));
        assert!(parse_config(&format!("{SOLVE}\nsample_stride = 1.5")).is_err());
    }

    #[test]
    fn empty_fit_is_header_only() {
        assert_eq!(fit_csv(None), format!("{FIT_HEADER}\n"));
    }

    #[test]
    fn solve_output_columns() {
        let c = parse_config(&format!("{SOLVE}\nt_max = 0.5\ndx = 1/32\nsample_stride = 4")).unwrap();
        let csv = run(&c).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("t,F,F_second,sup_norm,energy"));
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row.len(), 5);
        assert_eq!(row[0], "0.0000000000000000e0");
        assert_eq!(csv, run(&c).unwrap());
    }

    #[test]
    fn fit_from_sweep_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let mut text = format!("{SWEEP_HEADER}\n");
        for k in 0..6 {
            let e = 0.5f64.powi(k);
            text.push_str(&format!("{},{},0,blew_up,NaN,0.1,10\n", fmt(e), fmt(2.0 / e)));
        }
        std::fs::write(&path, text).unwrap();
        let cfg = parse_config(&format!(
            "subcommand = fit\np = 3\nalpha = 0\nR = 1\nf = bump\nsweep_csv = {}",
            path.display()
        ))
        .unwrap();
        let csv = run(&cfg).unwrap();
        let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
        assert!((row[0].parse::<f64>().unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(row[3], "4");
    }
}
