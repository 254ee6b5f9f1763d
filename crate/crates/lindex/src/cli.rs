//! Run configuration, command dispatch and report output.
//!
//! Configs are TOML. Top-level keys: `n`, `beta`, `f`, `l` (array of component
//! texts), `seed`, `threshold`, `order`. Each command reads its own section.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64 as C64;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use toml::Table;

use crate::criteria::{self, BallMode, CheckOpts, HaymanForm, Thm2Mode};
use crate::error::{Error, Result};
use crate::exec;
use crate::expr::Expr;
use crate::growth;
use crate::index;
use crate::jet::jet_from_expr;
use crate::lfield::{self, LField, LocalGrid};
use crate::multiindex::MultiIndex;
use crate::parse::{parse_complex, parse_real};
use crate::pde::{self, Equation, PdeSystem, PdeVariant};
use crate::report::{point_repr, CriterionReport, Verdict, Witness};
use crate::sampling;

pub const USAGE_EXIT: i32 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Index,
    Dominate,
    Criterion,
    Growth,
    Lclass,
    Pde,
}

impl Command {
    pub fn parse(s: &str) -> Result<Command> {
        Ok(match s {
            "index" => Command::Index,
            "dominate" => Command::Dominate,
            "criterion" => Command::Criterion,
            "growth" => Command::Growth,
            "lclass" => Command::Lclass,
            "pde" => Command::Pde,
            other => return Err(Error::Config(format!("unknown command '{other}'"))),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Command::Index => "index",
            Command::Dominate => "dominate",
            Command::Criterion => "criterion",
            Command::Growth => "growth",
            Command::Lclass => "lclass",
            Command::Pde => "pde",
        }
    }
}

/// Exit code for an error raised while running a command.
pub fn error_exit_code(e: &Error) -> i32 {
    match e {
        Error::Parse(_)
        | Error::Config(_)
        | Error::Io(_)
        | Error::BetaTooSmall { .. }
        | Error::DimensionMismatch { .. }
        | Error::EmptyGrid
        | Error::Inadmissible(_)
        | Error::SandwichViolated { .. }
        | Error::LeadVanishes { .. }
        | Error::MissingBound(_)
        | Error::PolydiscEscapesBall { .. }
        | Error::BallEscapesDomain { .. } => USAGE_EXIT,
        Error::ResidualFailure { .. } => 1,
        _ => 2,
    }
}

/// Reads `path` and applies `--set section.key=value` overrides in order.
pub fn load_config(path: &Path, sets: &[String]) -> Result<Table> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut table: Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    for s in sets {
        apply_set(&mut table, s)?;
    }
    Ok(table)
}

/// `a.b.c=value`; the value is read as a TOML value, falling back to a bare string.
pub fn apply_set(table: &mut Table, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("--set expects key=value, got '{assignment}'")))?;
    let value = format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(Error::Config(format!("bad key path '{path}'")));
    }
    let mut cur = table;
    for k in &keys[..keys.len() - 1] {
        let entry = cur.entry(k.to_string()).or_insert_with(|| toml::Value::Table(Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("'{k}' is not a table")))?;
    }
    cur.insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}

/// SHA-256 of the canonical serialization of the merged config and seed.
pub fn config_hash(table: &Table, seed: u64) -> String {
    let text = toml::to_string(table).unwrap_or_default();
    let mut h = Sha256::new();
    h.update(text.as_bytes());
    h.update(seed.to_le_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Section-then-top-level key lookup.
struct Cfg<'a> {
    root: &'a Table,
    section: Option<&'a Table>,
}

impl<'a> Cfg<'a> {
    fn new(root: &'a Table, section: &str) -> Result<Cfg<'a>> {
        let section = match root.get(section) {
            None => None,
            Some(toml::Value::Table(t)) => Some(t),
            Some(_) => return Err(Error::Config(format!("'{section}' must be a table"))),
        };
        Ok(Cfg { root, section })
    }

    fn get(&self, key: &str) -> Option<&'a toml::Value> {
        self.section.and_then(|s| s.get(key)).or_else(|| self.root.get(key))
    }

    fn f64(&self, key: &str) -> Result<Option<f64>> {
        match self.get(key) {
            None => Ok(None),
            Some(toml::Value::Float(x)) => Ok(Some(*x)),
            Some(toml::Value::Integer(x)) => Ok(Some(*x as f64)),
            Some(_) => Err(Error::Config(format!("'{key}' must be a number"))),
        }
    }

    fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        Ok(self.f64(key)?.unwrap_or(default))
    }

    fn uint(&self, key: &str) -> Result<Option<u64>> {
        match self.get(key) {
            None => Ok(None),
            Some(toml::Value::Integer(x)) if *x >= 0 => Ok(Some(*x as u64)),
            Some(_) => Err(Error::Config(format!("'{key}' must be a nonnegative integer"))),
        }
    }

    fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        Ok(self.uint(key)?.map_or(default, |v| v as usize))
    }

    fn u32_opt(&self, key: &str) -> Result<Option<u32>> {
        Ok(self.uint(key)?.map(|v| v as u32))
    }

    fn str(&self, key: &str) -> Result<Option<&'a str>> {
        match self.get(key) {
            None => Ok(None),
            Some(toml::Value::String(s)) => Ok(Some(s)),
            Some(_) => Err(Error::Config(format!("'{key}' must be a string"))),
        }
    }

    fn strings(&self, key: &str) -> Result<Option<Vec<String>>> {
        match self.get(key) {
            None => Ok(None),
            Some(toml::Value::Array(a)) => a
                .iter()
                .map(|v| v.as_str().map(str::to_string).ok_or_else(|| Error::Config(format!("'{key}' must hold strings"))))
                .collect::<Result<Vec<_>>>()
                .map(Some),
            Some(_) => Err(Error::Config(format!("'{key}' must be an array of strings"))),
        }
    }

    fn floats(&self, key: &str) -> Result<Option<Vec<f64>>> {
        match self.get(key) {
            None => Ok(None),
            Some(toml::Value::Array(a)) => a.iter().map(|v| num(v, key)).collect::<Result<Vec<_>>>().map(Some),
            Some(v) => Ok(Some(vec![num(v, key)?])),
        }
    }

    fn float_rows(&self, key: &str) -> Result<Option<Vec<Vec<f64>>>> {
        match self.get(key) {
            None => Ok(None),
            Some(toml::Value::Array(a)) => a
                .iter()
                .map(|row| match row {
                    toml::Value::Array(r) => r.iter().map(|v| num(v, key)).collect::<Result<Vec<_>>>(),
                    _ => Err(Error::Config(format!("'{key}' must be an array of arrays"))),
                })
                .collect::<Result<Vec<_>>>()
                .map(Some),
            Some(_) => Err(Error::Config(format!("'{key}' must be an array of arrays"))),
        }
    }
}

fn num(v: &toml::Value, key: &str) -> Result<f64> {
    match v {
        toml::Value::Float(x) => Ok(*x),
        toml::Value::Integer(x) => Ok(*x as f64),
        _ => Err(Error::Config(format!("'{key}' must hold numbers"))),
    }
}

/// Shared pieces every command needs.
struct Setup {
    n: usize,
    beta: f64,
    opts: CheckOpts,
}

fn setup(root: &Table, seed: u64) -> Result<Setup> {
    let top = Cfg { root, section: None };
    let n = top.uint("n")?.ok_or_else(|| Error::Config("missing 'n'".into()))? as usize;
    if !(1..=4).contains(&n) {
        return Err(Error::Config(format!("n = {n} must lie in [1, 4]")));
    }
    let beta = top.f64("beta")?.ok_or_else(|| Error::Config("missing 'beta'".into()))?;
    if beta <= (n as f64).sqrt() {
        return Err(Error::BetaTooSmall { beta, n });
    }
    let mut opts = CheckOpts::for_dim(n);
    opts.seed = seed;
    if let Some(t) = top.f64("threshold")? {
        if t <= 0.0 {
            return Err(Error::Config("'threshold' must be positive".into()));
        }
        opts.threshold = t;
    }
    if let Some(o) = top.uint("order")? {
        opts.order = o as usize;
    }
    Ok(Setup { n, beta, opts })
}

fn function(cfg: &Cfg, n: usize) -> Result<Expr> {
    let text = cfg.str("f")?.ok_or_else(|| Error::Config("missing 'f'".into()))?;
    Ok(parse_complex(text, n)?)
}

fn weight(cfg: &Cfg, key: &str, n: usize, beta: f64) -> Result<LField> {
    let texts = cfg.strings(key)?.ok_or_else(|| Error::Config(format!("missing '{key}'")))?;
    if texts.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: texts.len() });
    }
    let comps = texts.iter().map(|t| parse_real(t, n)).collect::<std::result::Result<Vec<_>, _>>()?;
    LField::new(beta, comps)
}

/// `points = [[re1, im1, re2, im2, ...], ...]`, or `anchors` Halton points in the ball of
/// radius `rmax`.
fn anchors(cfg: &Cfg, n: usize, default_count: usize, default_rmax: f64) -> Result<Vec<Vec<C64>>> {
    if let Some(rows) = cfg.float_rows("points")? {
        return rows
            .iter()
            .map(|r| {
                if r.len() != 2 * n {
                    return Err(Error::DimensionMismatch { expected: 2 * n, got: r.len() });
                }
                Ok(r.chunks(2).map(|c| C64::new(c[0], c[1])).collect())
            })
            .collect();
    }
    let count = cfg.usize_or("anchors", default_count)?;
    let rmax = cfg.f64_or("rmax", default_rmax)?;
    if count == 0 {
        return Err(Error::EmptyGrid);
    }
    if !(0.0..1.0).contains(&rmax) {
        return Err(Error::Config("'rmax' must lie in [0, 1)".into()));
    }
    Ok(sampling::halton_ball(n, count, rmax))
}

fn radii(cfg: &Cfg, key: &str, n: usize, default: Option<f64>) -> Result<Vec<f64>> {
    match cfg.floats(key)? {
        Some(v) if v.len() == 1 => Ok(vec![v[0]; n]),
        Some(v) if v.len() == n => Ok(v),
        Some(v) => Err(Error::DimensionMismatch { expected: n, got: v.len() }),
        None => default.map(|d| vec![d; n]).ok_or_else(|| Error::Config(format!("missing '{key}'"))),
    }
}

fn radius_sequence(cfg: &Cfg, n: usize, lo: f64, hi: f64, count: usize) -> Result<Vec<Vec<f64>>> {
    if let Some(rows) = cfg.float_rows("radii_sequence")? {
        return Ok(rows);
    }
    let lo = cfg.f64_or("lo", lo)?;
    let hi = cfg.f64_or("hi", hi)?;
    let count = cfg.usize_or("count", count)?;
    if count == 0 || !(hi < 1.0 && lo > 0.0 && lo <= hi) {
        return Err(Error::Config("radius sweep needs 0 < lo <= hi < 1 and count > 0".into()));
    }
    Ok(growth::diagonal_sequence(n, lo, hi, count))
}

/// Everything a command produces.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub verdict: Verdict,
    pub checks: Vec<CriterionReport>,
    pub data: Value,
    pub csv: Option<String>,
}

impl RunOutput {
    fn single(rep: CriterionReport, data: Value) -> RunOutput {
        RunOutput { verdict: rep.verdict, checks: vec![rep], data, csv: None }
    }
}

fn combine(checks: &[CriterionReport]) -> Verdict {
    checks.iter().fold(Verdict::Pass, |v, r| v.combine(r.verdict))
}

fn run_index(root: &Table, s: &Setup) -> Result<RunOutput> {
    let cfg = Cfg::new(root, "index")?;
    let f = function(&cfg, s.n)?;
    let l = weight(&cfg, "l", s.n, s.beta)?;
    let pts = anchors(&cfg, s.n, 50, 0.6)?;
    let g = index::global_index_estimate(&f, &l, &pts, s.opts.order)?;
    let mut rep = CriterionReport::new("index");
    rep.samples_used = pts.len();
    let expect = cfg.u32_opt("expect")?;
    match g.sup {
        Some(k) => {
            rep.set("index", k as f64);
            if let Some(e) = expect {
                rep.set("expect", e as f64);
                rep.worst_margin = e as f64 - k as f64;
                rep.verdict = if k <= e { Verdict::Pass } else { Verdict::Fail };
            } else {
                rep.worst_margin = 0.0;
            }
        }
        None => {
            let lower = g
                .reports
                .iter()
                .filter(|r| r.local_index.is_none())
                .map(|r| r.argmax_k.norm())
                .max()
                .unwrap_or(0);
            rep.set("index_lower_bound", lower as f64);
            rep.note("local index exceeds the jet validity at some anchor");
            match expect {
                Some(e) if lower > e => {
                    rep.set("expect", e as f64);
                    rep.worst_margin = e as f64 - lower as f64;
                    rep.verdict = Verdict::Fail;
                }
                _ => rep.verdict = Verdict::Indeterminate,
            }
        }
    }
    let exceed = g.reports.iter().filter(|r| r.local_index.map_or(true, |k| expect.map_or(false, |e| k > e))).count();
    rep.set("anchors_exceeding", exceed as f64);
    rep.witness = Some(Witness { point: Some(g.witness.clone()), ..Default::default() });
    let locals: Vec<Value> = g.reports.iter().map(|r| json!({"anchor": r.anchor, "local_index": r.local_index})).collect();
    Ok(RunOutput::single(rep, json!({ "local": locals })))
}

fn run_dominate(root: &Table, s: &Setup) -> Result<RunOutput> {
    let cfg = Cfg::new(root, "dominate")?;
    let f = function(&cfg, s.n)?;
    let l = weight(&cfg, "l", s.n, s.beta)?;
    let pts = anchors(&cfg, s.n, 8, 0.5)?;
    let d = cfg.f64_or("d", s.beta / (s.n as f64).sqrt())?;
    let big_n = cfg.u32_opt("N")?;
    let samples = cfg.usize_or("samples", 128)?;
    let results = exec::map(&pts, |z| -> Result<(index::DominationCertificate, CriterionReport)> {
        let jet = jet_from_expr(&f, z, s.opts.order)?;
        let cert = index::dominating_polynomial(&jet, &l, d, big_n, samples)?;
        let mut rep = index::verify_dominance(&jet, cert.k0, &cert.skeleton_radii, samples);
        rep.set("m0", cert.m0 as f64);
        rep.set("limit", (2 * cert.n_cap + 1) as f64);
        if cert.m0 > (2 * cert.n_cap + 1) as usize {
            rep.verdict = Verdict::Fail;
        }
        Ok((cert, rep))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let checks: Vec<CriterionReport> = results.iter().map(|r| r.1.clone()).collect();
    let certs: Vec<Value> = results
        .iter()
        .zip(&pts)
        .map(|((c, _), z)| json!({"anchor": point_repr(z), "certificate": c}))
        .collect();
    Ok(RunOutput { verdict: combine(&checks), checks, data: json!({ "certificates": certs }), csv: None })
}

fn run_criterion(root: &Table, s: &Setup) -> Result<RunOutput> {
    let cfg = Cfg::new(root, "criterion")?;
    let f = function(&cfg, s.n)?;
    let l = weight(&cfg, "l", s.n, s.beta)?;
    let pts = anchors(&cfg, s.n, 20, 0.5)?;
    let check = cfg.str("check")?.unwrap_or("thm1");
    let n = s.n;
    let o = &s.opts;
    let rep = match check {
        "thm1" => criteria::check_thm1(&f, &l, &radii(&cfg, "r", n, Some(1.0))?, &pts, cfg.u32_opt("n0")?, cfg.f64("p0")?, o)?,
        "thm2" | "thm2_necessary" | "thm2_sufficient" => {
            let mode = if check == "thm2_sufficient" { Thm2Mode::Sufficient } else { Thm2Mode::Necessary };
            criteria::check_thm2(&f, &l, &radii(&cfg, "r", n, Some(1.0))?, &pts, mode, cfg.u32_opt("n0")?, cfg.f64("p")?, o)?
        }
        "thm5" => criteria::check_thm5(&f, &l, &radii(&cfg, "r1", n, Some(0.5))?, &radii(&cfg, "r2", n, Some(1.2))?, &pts, o)?,
        "directional" => {
            let j = cfg.usize_or("j", 1)?;
            if j == 0 || j > n {
                return Err(Error::Config(format!("'j' must lie in [1, {n}]")));
            }
            criteria::check_directional(&f, &l, j - 1, cfg.f64_or("r1", 0.5)?, cfg.f64_or("r2", 1.2)?, &pts, o)?
        }
        "hayman" | "hayman_factorial" => {
            let form = if check == "hayman" { HaymanForm::Plain } else { HaymanForm::Factorial };
            let p = cfg.u32_opt("p")?.ok_or_else(|| Error::Config("missing 'p'".into()))?;
            criteria::check_hayman(&f, &l, p, &pts, form, cfg.f64("c")?, o)?
        }
        "tail" => {
            let big_n = cfg.u32_opt("N")?.ok_or_else(|| Error::Config("missing 'N'".into()))?;
            let theta = radii(&cfg, "theta", n, Some(0.5))?;
            let cap = cfg.u32_opt("tail_cap")?.unwrap_or(big_n + 24);
            criteria::check_tail(&f, &l, big_n, cfg.f64("c")?, &theta, cap, &pts, o)?
        }
        "thm3" => {
            let lt = weight(&cfg, "ltilde", n, s.beta)?;
            let p = cfg.u32_opt("p")?.ok_or_else(|| Error::Config("missing 'p'".into()))?;
            criteria::check_thm3_equiv(&f, &l, &lt, &radii(&cfg, "theta1", n, None)?, &radii(&cfg, "theta2", n, None)?, p, &pts, o)?
        }
        "ball_necessary" | "ball_sufficient" | "ball_modmax" | "ball_modmax_axis" => {
            let mode = match check {
                "ball_necessary" => BallMode::Necessary,
                "ball_sufficient" => BallMode::Sufficient,
                "ball_modmax" => BallMode::ModMax,
                _ => BallMode::ModMaxAxis,
            };
            criteria::check_ball_variant(&f, &l, cfg.f64_or("r", 1.0)?, &pts, mode, cfg.u32_opt("n0")?, cfg.f64("bound")?, o)?
        }
        other => return Err(Error::Config(format!("unknown check '{other}'"))),
    };
    Ok(RunOutput::single(rep, json!({ "check": check })))
}

fn run_growth(root: &Table, s: &Setup) -> Result<RunOutput> {
    let cfg = Cfg::new(root, "growth")?;
    let n = s.n;
    let kind = cfg.str("kind")?.unwrap_or("ratio");
    match kind {
        "ratio" => {
            let f = function(&cfg, n)?;
            let l = weight(&cfg, "l", n, s.beta)?;
            let seq = radius_sequence(&cfg, n, 0.5, 0.99, 20)?;
            let per_dim = cfg.uint("theta_per_dim")?.map(|v| v as usize);
            let (curve, rep) = growth::growth_ratio_limsup(&f, &l, &seq, per_dim, cfg.f64("cap")?)?;
            let csv = curve.to_csv();
            let mut out = RunOutput::single(rep, json!({ "curve": curve }));
            out.csv = Some(csv);
            Ok(out)
        }
        "lemma4" => {
            let l = weight(&cfg, "l", n, s.beta)?;
            let seq = radius_sequence(&cfg, n, 0.5, 0.99, 10)?;
            let curve = growth::lemma4_divergence(&l, &seq)?;
            let mut rep = CriterionReport::new("envelope");
            rep.samples_used = curve.len();
            let worst = curve.lhs.iter().zip(&curve.rhs).map(|(a, b)| a - b).fold(f64::INFINITY, f64::min);
            rep.set("min_excess", worst);
            rep.worst_margin = worst;
            rep.verdict = if worst >= -1e-7 { Verdict::Pass } else { Verdict::Fail };
            let csv = curve.to_csv();
            let mut out = RunOutput::single(rep, json!({ "curve": curve }));
            out.csv = Some(csv);
            Ok(out)
        }
        "integral" => {
            let l = weight(&cfg, "l", n, s.beta)?;
            let r = radii(&cfg, "r", n, None)?;
            let r0 = match cfg.floats("r0")? {
                Some(v) => v,
                None => r.iter().map(|x| x / 2.0).collect(),
            };
            let per_dim = cfg.usize_or("theta_per_dim", 8)?;
            let m = growth::growth_integral_min(&l, &r, &r0, &sampling::theta_grid(n, per_dim))?;
            let mut rep = CriterionReport::new("growth_integral");
            rep.set("value", m.value);
            rep.samples_used = m.evaluations;
            rep.worst_margin = 0.0;
            Ok(RunOutput::single(rep, json!({ "minimum": m })))
        }
        "thm15" => {
            let f = function(&cfg, n)?;
            let l = weight(&cfg, "l", n, s.beta)?;
            let r = radii(&cfg, "r", n, None)?;
            let theta = radii(&cfg, "theta", n, Some(0.0))?;
            let big_n = cfg.u32_opt("N")?.unwrap_or(0);
            let rep = growth::thm15_derivative_bound(&f, &l, &r, &theta, big_n)?;
            Ok(RunOutput::single(rep, Value::Null))
        }
        "w" => {
            let l = weight(&cfg, "l", n, s.beta)?;
            let seq = radius_sequence(&cfg, n, 0.2, 0.99, 16)?;
            let thetas = growth::angle_grid(&l, cfg.uint("theta_per_dim")?.map(|v| v as usize));
            let rep = growth::check_w_condition(&l, &seq, cfg.usize_or("t_points", 33)?, &thetas)?;
            Ok(RunOutput::single(rep, Value::Null))
        }
        "lagrange" => {
            let sol = growth::lagrange_h_max(n);
            let mut rep = CriterionReport::new("lagrange");
            let err = (sol.h - (n as f64).sqrt()).abs();
            rep.set("H", sol.h);
            rep.set("kkt_residual", sol.kkt_residual);
            rep.worst_margin = 1e-9 - err;
            rep.verdict = if err <= 1e-9 && sol.kkt_residual < 1e-9 { Verdict::Pass } else { Verdict::Fail };
            Ok(RunOutput::single(rep, json!({ "solution": sol })))
        }
        "gamma" => {
            let r = cfg.f64_or("r", (n as f64).sqrt())?;
            let sweep = growth::gamma_diagonal_sweep(n, r, cfg.u32_opt("max_norm")?.unwrap_or(200));
            let mut rep = CriterionReport::new("gamma_ratio");
            rep.set("r", r);
            rep.samples_used = sweep.norms.len();
            match sweep.n2 {
                Some(k) => {
                    rep.set("n2", k as f64);
                    rep.worst_margin = -sweep.ln_values.last().copied().unwrap_or(0.0);
                }
                None => {
                    rep.verdict = Verdict::Fail;
                    rep.worst_margin = -sweep.ln_values.last().copied().unwrap_or(0.0);
                    rep.witness = Some(Witness {
                        index: Some(MultiIndex(vec![*sweep.norms.last().unwrap() / n as u32; n])),
                        value: sweep.ln_values.last().map(|v| v.exp()),
                        ..Default::default()
                    });
                }
            }
            Ok(RunOutput::single(rep, json!({ "sweep": sweep })))
        }
        other => Err(Error::Config(format!("unknown growth kind '{other}'"))),
    }
}

fn run_lclass(root: &Table, s: &Setup) -> Result<RunOutput> {
    let cfg = Cfg::new(root, "lclass")?;
    let n = s.n;
    let check = cfg.str("check")?.unwrap_or("cone");
    let threshold = s.opts.threshold;
    let rep = match check {
        "cone" => {
            let l = weight(&cfg, "l", n, s.beta)?;
            lfield::check_cone_condition(&l, &anchors(&cfg, n, 512, 0.99)?)?
        }
        "q" => {
            let l = weight(&cfg, "l", n, s.beta)?;
            let grid = match cfg.float_rows("r_grid")? {
                Some(g) => g,
                None => vec![radii(&cfg, "r", n, Some(1.0))?],
            };
            lfield::check_q_membership(&l, &grid, &anchors(&cfg, n, 64, 0.9)?, LocalGrid::for_dim(n), threshold)?
        }
        "k" => {
            let l = weight(&cfg, "l", n, s.beta)?;
            let seq = radius_sequence(&cfg, n, 0.1, 0.9, 9)?;
            lfield::check_k_membership(&l, &seq, cfg.usize_or("theta_per_dim", 8)?, threshold)?
        }
        "thm13" => {
            let raw = cfg.strings("raw")?.ok_or_else(|| Error::Config("missing 'raw'".into()))?;
            let raw = raw.iter().map(|t| parse_complex(t, n)).collect::<std::result::Result<Vec<_>, _>>()?;
            let c = cfg.f64_or("c", 1.0)?;
            lfield::check_theorem13(&raw, c, s.beta, &radii(&cfg, "r", n, Some(1.0))?, &anchors(&cfg, n, 32, 0.9)?, LocalGrid::for_dim(n), threshold)?
        }
        other => return Err(Error::Config(format!("unknown lclass check '{other}'"))),
    };
    Ok(RunOutput::single(rep, json!({ "check": check })))
}

fn equations(cfg: &Cfg, n: usize) -> Result<Vec<Equation>> {
    let list = match cfg.get("equation") {
        Some(toml::Value::Array(a)) => a,
        _ => return Err(Error::Config("missing [[pde.equation]] blocks".into())),
    };
    list.iter()
        .map(|v| {
            let t = v.as_table().ok_or_else(|| Error::Config("equation must be a table".into()))?;
            let e = Cfg { root: t, section: None };
            let order = e.u32_opt("order")?.ok_or_else(|| Error::Config("equation needs 'order'".into()))?;
            let lead = parse_complex(e.str("lead")?.unwrap_or("1"), n)?;
            let rhs = e.str("rhs")?.map(|h| parse_complex(h, n)).transpose()?;
            let mut lower = Vec::new();
            if let Some(toml::Value::Array(items)) = t.get("lower") {
                for item in items {
                    let it = item.as_table().ok_or_else(|| Error::Config("lower term must be a table".into()))?;
                    let ic = Cfg { root: it, section: None };
                    let s = ic.floats("s")?.ok_or_else(|| Error::Config("lower term needs 's'".into()))?;
                    if s.iter().any(|x| *x < 0.0 || x.fract() != 0.0) {
                        return Err(Error::Config("'s' must hold nonnegative integers".into()));
                    }
                    let g = ic.str("g")?.ok_or_else(|| Error::Config("lower term needs 'g'".into()))?;
                    lower.push((MultiIndex(s.iter().map(|x| *x as u32).collect()), parse_complex(g, n)?));
                }
            }
            Ok(Equation { order, lead, lower, rhs })
        })
        .collect()
}

fn run_pde(root: &Table, s: &Setup) -> Result<RunOutput> {
    let cfg = Cfg::new(root, "pde")?;
    let n = s.n;
    let f = function(&cfg, n)?;
    let l = weight(&cfg, "l", n, s.beta)?;
    let sys = PdeSystem::new(n, equations(&cfg, n)?)?;
    let variant = match cfg.str("variant")? {
        Some(v) => PdeVariant::parse(v)?,
        None => PdeVariant::default_for(&sys),
    };
    let exclusion = radii(&cfg, "exclusion", n, Some(pde::DEFAULT_EXCLUSION))?;
    let region = sampling::halton_ball_excluding(n, cfg.usize_or("samples", 200)?, cfg.f64_or("radius", 0.95)?, &exclusion);
    let seq = radius_sequence(&cfg, n, 0.5, 0.99, 20)?;
    let rep = pde::verify_solution(&f, &sys, &l, &region, variant, &seq, &s.opts)?;
    let checks = vec![rep.residual.clone(), rep.hayman.clone(), rep.growth.clone()];
    let csv = rep.curve.to_csv();
    Ok(RunOutput {
        verdict: rep.verdict(),
        checks,
        data: json!({
            "variant": rep.variant,
            "c": rep.c,
            "p": rep.p,
            "growth_cap": rep.growth_cap,
            "coefficient_bounds": rep.coefficient_bounds,
            "curve": rep.curve,
        }),
        csv: Some(csv),
    })
}

/// Dispatches `cmd` on a merged config.
pub fn run_command(cmd: Command, config: &Table, seed: u64) -> Result<RunOutput> {
    let s = setup(config, seed)?;
    let mut out = match cmd {
        Command::Index => run_index(config, &s),
        Command::Dominate => run_dominate(config, &s),
        Command::Criterion => run_criterion(config, &s),
        Command::Growth => run_growth(config, &s),
        Command::Lclass => run_lclass(config, &s),
        Command::Pde => run_pde(config, &s),
    }?;
    out.verdict = combine(&out.checks).combine(out.verdict);
    Ok(out)
}

/// Structured report with config hash; free of timing so that it is reproducible.
pub fn report_document(cmd: Command, config: &Table, seed: u64, result: &std::result::Result<RunOutput, Error>) -> Value {
    let mut doc = BTreeMap::new();
    doc.insert("command", json!(cmd.name()));
    doc.insert("config_hash", json!(config_hash(config, seed)));
    doc.insert("seed", json!(seed));
    match result {
        Ok(out) => {
            doc.insert("verdict", json!(out.verdict));
            doc.insert("exit_code", json!(out.verdict.exit_code()));
            doc.insert("checks", serde_json::to_value(&out.checks).unwrap_or(Value::Null));
            doc.insert("data", out.data.clone());
        }
        Err(e) => {
            doc.insert("verdict", json!("error"));
            doc.insert("exit_code", json!(error_exit_code(e)));
            doc.insert("error", json!(e.to_string()));
        }
    }
    serde_json::to_value(doc).unwrap_or(Value::Null)
}

#[derive(Clone, Debug)]
pub struct Invocation {
    pub command: String,
    pub config: PathBuf,
    pub sets: Vec<String>,
    pub jobs: Option<usize>,
    pub seed: Option<u64>,
    pub out: PathBuf,
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Full run: writes `report.json`, `timing.json` and, when available, `curve.csv` into
/// the output directory; returns the exit code.
pub fn execute(inv: &Invocation) -> (i32, String) {
    let cmd = match Command::parse(&inv.command) {
        Ok(c) => c,
        Err(e) => return (USAGE_EXIT, e.to_string()),
    };
    let config = match load_config(&inv.config, &inv.sets) {
        Ok(c) => c,
        Err(e) => return (USAGE_EXIT, e.to_string()),
    };
    let seed = match inv.seed {
        Some(s) => s,
        None => match (Cfg { root: &config, section: None }).uint("seed") {
            Ok(s) => s.unwrap_or(sampling::DEFAULT_SEED),
            Err(e) => return (USAGE_EXIT, e.to_string()),
        },
    };
    let start = Instant::now();
    let result = exec::with_jobs(inv.jobs, || run_command(cmd, &config, seed));
    let elapsed = start.elapsed().as_secs_f64();
    let doc = report_document(cmd, &config, seed, &result);
    let code = match &result {
        Ok(out) => out.verdict.exit_code(),
        Err(e) => error_exit_code(e),
    };
    if let Err(e) = fs::create_dir_all(&inv.out).map_err(|e| Error::Io(format!("{}: {e}", inv.out.display()))) {
        return (USAGE_EXIT, e.to_string());
    }
    let mut text = serde_json::to_string_pretty(&doc).unwrap_or_default();
    text.push('\n');
    let timing = format!("{}\n", json!({ "command": cmd.name(), "elapsed_seconds": elapsed }));
    let mut writes = vec![write(&inv.out.join("report.json"), &text), write(&inv.out.join("timing.json"), &timing)];
    if let Ok(RunOutput { csv: Some(csv), .. }) = &result {
        writes.push(write(&inv.out.join("curve.csv"), csv));
    }
    if let Some(Err(e)) = writes.into_iter().find(|w| w.is_err()) {
        return (USAGE_EXIT, e.to_string());
    }
    let summary = match &result {
        Ok(out) => format!("{}: {}", cmd.name(), serde_json::to_string(&out.verdict).unwrap_or_default().trim_matches('"')),
        Err(e) => format!("{}: error: {e}", cmd.name()),
    };
    (code, summary)
}
