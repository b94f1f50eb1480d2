//! Configuration handling and the `lrl` subcommands.
//!
//! Every command reads one JSON config of the form
//! `{"spec": {"family", "params"}, "ctx": {"ell", "energy"}, "options": {...}}`
//! and writes CSV or JSON. Floats are printed as `%.17g` so that numbers
//! round-trip exactly, and object keys are sorted.

use crate::friction_lab::{self, FrictionError, FrictionSpec, Termination};
use crate::lrl_engine::{self, Branch, EngineError, Form, Table1Row};
use crate::oracle::{self, finite_diff, Integrand, OdeOptions, OracleError, StepPolicy};
use crate::potentials::{self, PotentialError, PotentialSpec, RadialContext, Regime, RegimeOptions};
use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Parser)]
#[command(name = "lrl", version, about = "Generalized Laplace-Runge-Lenz vectors for central potentials")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Landmarks,
    Trajectory,
    Verify,
    Sweep,
}

#[derive(Debug, clap::Args)]
pub struct CommonArgs {
    /// JSON run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Write the result here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Regime, stationary points, turning points and bound margins.
    Landmarks(CommonArgs),
    /// Sampled orbit `phi,r,x,y,lrl_x,lrl_y,lrl_mod`.
    Trajectory(CommonArgs),
    /// Run the invariant checks; exit status 1 if any fails.
    Verify(CommonArgs),
    /// Evaluate landmarks over a parameter grid.
    Sweep(CommonArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
    Text,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("domain: {0}")]
    Domain(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 2 for domain and regime errors, 3 for usage, parse and I/O errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Domain(_) => 2,
            CliError::Usage(_) | CliError::Io(_) => 3,
        }
    }
}

impl From<PotentialError> for CliError {
    fn from(e: PotentialError) -> Self {
        CliError::Domain(e.to_string())
    }
}
impl From<EngineError> for CliError {
    fn from(e: EngineError) -> Self {
        CliError::Domain(e.to_string())
    }
}
impl From<FrictionError> for CliError {
    fn from(e: FrictionError) -> Self {
        CliError::Domain(e.to_string())
    }
}
impl From<OracleError> for CliError {
    fn from(e: OracleError) -> Self {
        CliError::Domain(e.to_string())
    }
}
impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecConfig {
    pub family: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CtxConfig {
    pub ell: f64,
    pub energy: f64,
}

/// Values for one swept parameter, either listed or generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub param: String,
    #[serde(default)]
    pub values: Option<Vec<f64>>,
    #[serde(default)]
    pub start: Option<f64>,
    #[serde(default)]
    pub stop: Option<f64>,
    #[serde(default)]
    pub count: Option<usize>,
    #[serde(default)]
    pub log: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Options {
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    /// `"minus"` or `"plus"`.
    pub branch: Option<String>,
    pub phi_start: Option<f64>,
    pub revolutions: Option<f64>,
    pub samples: Option<usize>,
    pub rel_tol: Option<f64>,
    /// Radial periods for the drift check.
    pub periods: Option<f64>,
    /// Scale applied to `g` before the checks (fault injection).
    pub corrupt_g: Option<f64>,
    pub grid: Option<Grid>,
    /// Add an LRL drift column to sweeps.
    pub drift: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub spec: SpecConfig,
    #[serde(default)]
    pub ctx: Option<CtxConfig>,
    #[serde(default)]
    pub options: Options,
    /// Free-form note, ignored.
    #[serde(default)]
    pub description: Option<String>,
    /// Reference numbers for presets, ignored by the commands.
    #[serde(default)]
    pub expected: Option<Value>,
}

/// A parsed model: a conservative central problem or the friction system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Model {
    Central(PotentialSpec, RadialContext),
    Friction(FrictionSpec),
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Usage(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn model(&self) -> Result<Model, CliError> {
        if self.spec.family == "friction" {
            return Ok(Model::Friction(friction_from(&self.spec.params)?));
        }
        let spec = spec_from(&self.spec)?;
        let ctx = self.ctx.ok_or_else(|| CliError::Usage("missing \"ctx\"".into()))?;
        Ok(Model::Central(spec, RadialContext { ell: ctx.ell, energy: ctx.energy }))
    }

    pub fn rel_tol(&self) -> Result<f64, CliError> {
        let tol = self.options.rel_tol.unwrap_or(1e-12);
        if !(1e-14..=1e-3).contains(&tol) {
            return Err(CliError::Usage(format!("rel_tol {tol} outside [1e-14, 1e-3]")));
        }
        Ok(tol)
    }

    fn branch(&self) -> Result<Branch, CliError> {
        match self.options.branch.as_deref().unwrap_or("minus") {
            "minus" => Ok(Branch::Minus),
            "plus" => Ok(Branch::Plus),
            other => Err(CliError::Usage(format!("branch must be \"minus\" or \"plus\", got {other:?}"))),
        }
    }

    fn constants(&self) -> (f64, f64) {
        match (self.options.c1, self.options.c2) {
            (None, None) => (1.0, 0.0),
            (c1, c2) => (c1.unwrap_or(0.0), c2.unwrap_or(0.0)),
        }
    }
}

fn take(params: &BTreeMap<String, f64>, allowed: &[&str], family: &str) -> Result<Vec<f64>, CliError> {
    if let Some(extra) = params.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(CliError::Usage(format!("unknown parameter {extra:?} for family {family:?}")));
    }
    allowed
        .iter()
        .map(|name| {
            params.get(*name).copied().ok_or_else(|| CliError::Usage(format!("family {family:?} needs {name:?}")))
        })
        .collect()
}

/// Build a [`PotentialSpec`] from its JSON description.
pub fn spec_from(cfg: &SpecConfig) -> Result<PotentialSpec, CliError> {
    let p = &cfg.params;
    let f = cfg.family.as_str();
    let spec = match f {
        "kepler" => {
            let v = take(p, &["k"], f)?;
            PotentialSpec::Kepler { k: v[0] }
        }
        "harmonic" => {
            let v = take(p, &["k"], f)?;
            PotentialSpec::Harmonic { k: v[0] }
        }
        "oblate" => {
            let v = take(p, &["b", "k"], f)?;
            PotentialSpec::Oblate { b: v[0], k: v[1] }
        }
        "cosmological" => {
            let v = take(p, &["k", "lambda"], f)?;
            PotentialSpec::Cosmological { k: v[0], lambda: v[1] }
        }
        "cornell" => {
            let v = take(p, &["a", "b"], f)?;
            PotentialSpec::Cornell { a: v[0], b: v[1] }
        }
        "gr" => {
            let v = take(p, &["c", "gm"], f)?;
            PotentialSpec::GrMassive { c: v[0], gm: v[1] }
        }
        "str" => {
            let v = take(p, &["e_rel", "k", "l", "m0"], f)?;
            PotentialSpec::StrCoulomb { e_rel: v[0], k: v[1], l: v[2], m0: v[3] }
        }
        other => return Err(CliError::Usage(format!("unknown family {other:?}"))),
    };
    spec.validate()?;
    Ok(spec)
}

fn friction_from(p: &BTreeMap<String, f64>) -> Result<FrictionSpec, CliError> {
    let has_xi0 = p.contains_key("xi0");
    let names: &[&str] =
        if has_xi0 { &["a_mag", "alpha", "mu", "phi0", "xi0"] } else { &["a_mag", "alpha", "beta", "mu", "phi0"] };
    let v = take(p, names, "friction")?;
    let spec = if has_xi0 {
        FrictionSpec::from_xi0(v[1], v[2], v[0], v[4], v[3])
    } else {
        FrictionSpec { a_mag: v[0], alpha: v[1], beta: v[2], mu: v[3], phi0: v[4] }
    };
    spec.validate()?;
    Ok(spec)
}

/// `{"family", "params"}` for a spec, in the config vocabulary.
pub fn spec_to_json(spec: &PotentialSpec) -> Value {
    let (family, params) = match *spec {
        PotentialSpec::Kepler { k } => ("kepler", json!({ "k": k })),
        PotentialSpec::Harmonic { k } => ("harmonic", json!({ "k": k })),
        PotentialSpec::Oblate { k, b } => ("oblate", json!({ "k": k, "b": b })),
        PotentialSpec::Cosmological { k, lambda } => ("cosmological", json!({ "k": k, "lambda": lambda })),
        PotentialSpec::Cornell { a, b } => ("cornell", json!({ "a": a, "b": b })),
        PotentialSpec::GrMassive { gm, c } => ("gr", json!({ "gm": gm, "c": c })),
        PotentialSpec::StrCoulomb { k, m0, e_rel, l } => ("str", json!({ "k": k, "m0": m0, "e_rel": e_rel, "l": l })),
    };
    json!({ "family": family, "params": params })
}

// ---------------------------------------------------------------------------
// Canonical output
// ---------------------------------------------------------------------------

/// C `%.17g`.
pub fn fmt_g17(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    const P: i32 = 17;
    let sci = format!("{:.*e}", (P - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("exponent digits");
    if (-4..P).contains(&exp) {
        let fixed = format!("{:.*}", (P - 1 - exp) as usize, x);
        strip_zeros(&fixed).to_string()
    } else {
        let m = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

struct G17Formatter;

impl serde_json::ser::Formatter for G17Formatter {
    fn write_f64<W: ?Sized + std::io::Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        writer.write_all(fmt_g17(value).as_bytes())
    }
}

/// Compact JSON with sorted keys and `%.17g` floats.
pub fn canonical_json(value: &Value) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, G17Formatter);
    value.serialize(&mut ser).expect("serializing a Value cannot fail");
    String::from_utf8(buf).expect("JSON is UTF-8")
}

fn num(x: f64) -> Value {
    // JSON has no NaN or infinity.
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

/// Outcome of a command: what to print and the exit status.
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub body: String,
    pub exit_code: i32,
}

pub fn run(cli: &Cli) -> Result<Output, CliError> {
    let (kind, args) = match &cli.command {
        Command::Landmarks(a) => (CommandKind::Landmarks, a),
        Command::Trajectory(a) => (CommandKind::Trajectory, a),
        Command::Verify(a) => (CommandKind::Verify, a),
        Command::Sweep(a) => (CommandKind::Sweep, a),
    };
    let config = RunConfig::load(&args.config)?;
    let out = dispatch(kind, &config, args.format)?;
    if let Some(path) = &args.out {
        std::fs::write(path, &out.body)?;
        return Ok(Output { body: String::new(), exit_code: out.exit_code });
    }
    Ok(out)
}

pub fn dispatch(kind: CommandKind, config: &RunConfig, format: Option<Format>) -> Result<Output, CliError> {
    let ok = |body: String| Ok(Output { body, exit_code: 0 });
    match kind {
        CommandKind::Landmarks => {
            let doc = cmd_landmarks(config)?;
            match format.unwrap_or(Format::Json) {
                Format::Json => ok(canonical_json(&doc) + "\n"),
                f => Err(CliError::Usage(format!("landmarks writes json, not {f:?}"))),
            }
        }
        CommandKind::Trajectory => match format.unwrap_or(Format::Csv) {
            Format::Csv => ok(cmd_trajectory(config)?),
            f => Err(CliError::Usage(format!("trajectory writes csv, not {f:?}"))),
        },
        CommandKind::Verify => {
            let report = cmd_verify(config)?;
            let exit_code = if report.all_pass() { 0 } else { 1 };
            let body = match format.unwrap_or(Format::Text) {
                Format::Text => report.to_text(),
                Format::Json => canonical_json(&report.to_json()) + "\n",
                Format::Csv => return Err(CliError::Usage("verify writes text or json".into())),
            };
            Ok(Output { body, exit_code })
        }
        CommandKind::Sweep => match format.unwrap_or(Format::Csv) {
            Format::Csv => {
                let (body, rows, failed) = cmd_sweep(config)?;
                let exit_code = if rows > 0 && failed == rows { 2 } else { 0 };
                Ok(Output { body, exit_code })
            }
            f => Err(CliError::Usage(format!("sweep writes csv, not {f:?}"))),
        },
    }
}

/// Regime, extrema, turning points and the inequalities behind them.
pub fn cmd_landmarks(config: &RunConfig) -> Result<Value, CliError> {
    match config.model()? {
        Model::Friction(fs) => Ok(json!({
            "family": "friction",
            "params": friction_params(&fs),
            "ell0": num(fs.beta - fs.alpha * fs.phi0),
            "xi0": num(fs.xi0()),
            "crash_angle": num(fs.crash_angle()),
            "r0": num(1.0 / fs.a_mag),
        })),
        Model::Central(spec, ctx) => central_landmarks(&spec, &ctx),
    }
}

fn friction_params(fs: &FrictionSpec) -> Value {
    json!({ "alpha": fs.alpha, "mu": fs.mu, "beta": fs.beta, "a_mag": fs.a_mag, "phi0": fs.phi0 })
}

fn central_landmarks(spec: &PotentialSpec, ctx: &RadialContext) -> Result<Value, CliError> {
    let desitter = matches!(spec, PotentialSpec::Cosmological { lambda, .. } if *lambda > 0.0);
    let report =
        potentials::classify_regime(spec, ctx, &RegimeOptions { allow_critical: desitter, ..Default::default() })?;
    let (cspec, cctx) = potentials::canonical(spec, ctx);
    let mut doc = Map::new();
    let head = spec_to_json(spec);
    doc.insert("family".into(), head["family"].clone());
    doc.insert("params".into(), head["params"].clone());
    doc.insert("ctx".into(), json!({ "ell": num(ctx.ell), "energy": num(ctx.energy) }));
    doc.insert("regime".into(), json!(report.regime.name()));
    if let Some(why) = &report.failed {
        doc.insert("regime_detail".into(), json!(why));
    }
    let stationary = potentials::stationary_points(&cspec, &cctx).ok();
    let points: Vec<Value> = stationary
        .iter()
        .flat_map(|s| s.points.iter())
        .map(|p| json!({ "r": num(p.r), "kind": format!("{:?}", p.kind).to_lowercase(), "value": num(p.value) }))
        .collect();
    doc.insert("stationary".into(), Value::Array(points));
    let roots = potentials::reality_roots(&cspec, &cctx);
    doc.insert(
        "reality_roots".into(),
        json!({
            "real": roots.real_roots.iter().map(|&r| num(r)).collect::<Vec<_>>(),
            "complex": roots.complex_pairs.iter().map(|&(a, b)| json!([num(a), num(b)])).collect::<Vec<_>>(),
            "degenerate": roots.degenerate,
        }),
    );
    let mut bounds: Vec<Value> = report
        .margins
        .iter()
        .map(|(name, &m)| json!({ "inequality": name, "margin": num(m), "holds": m >= 0.0 }))
        .collect();
    if matches!(report.regime, Regime::Bounded | Regime::CriticalMax) {
        let tp = potentials::turning_points_for(&cspec, &cctx, &report)?;
        doc.insert("turning_points".into(), json!({ "r1": num(tp.r1), "r2": num(tp.r2) }));
        if let Some(well) = report.well {
            for (name, m) in [("r1 < r_min", well - tp.r1), ("r_min < r2", tp.r2 - well)] {
                bounds.push(json!({ "inequality": name, "margin": num(m), "holds": m > 0.0 }));
            }
        }
        let extras = family_extras(&cspec, &cctx, tp.r1, tp.r2, &roots.real_roots);
        if !extras.is_empty() {
            doc.insert("family_landmarks".into(), Value::Object(extras));
        }
    }
    doc.insert("bounds".into(), Value::Array(bounds));
    Ok(Value::Object(doc))
}

fn family_extras(spec: &PotentialSpec, ctx: &RadialContext, r1: f64, r2: f64, roots: &[f64]) -> Map<String, Value> {
    let mut m = Map::new();
    let below = roots.iter().copied().filter(|&r| r < r1 * (1.0 - 1e-9)).fold(f64::NAN, f64::max);
    let above = roots.iter().copied().filter(|&r| r > r2 * (1.0 + 1e-9)).fold(f64::NAN, f64::min);
    match *spec {
        PotentialSpec::Kepler { k } => {
            m.insert("eccentricity".into(), num((1.0 + 2.0 * ctx.energy * ctx.ell * ctx.ell / (k * k)).sqrt()));
        }
        PotentialSpec::Harmonic { .. } => {
            m.insert("b1".into(), num(1.0 - (r1 / r2).powi(2)));
            m.insert("b2".into(), num((r2 / r1).powi(2) - 1.0));
        }
        PotentialSpec::Oblate { k, b } => {
            m.insert("alpha".into(), num(ctx.ell.powi(4) / (12.0 * k * b)));
            m.insert("r0".into(), num(below));
        }
        PotentialSpec::Cosmological { .. } | PotentialSpec::Cornell { .. } => {
            m.insert("r0".into(), num(below));
            if above.is_finite() {
                m.insert("r3".into(), num(above));
            }
        }
        _ => {}
    }
    m
}

fn csv_row(w: &mut csv::Writer<Vec<u8>>, values: &[f64]) -> Result<(), CliError> {
    w.write_record(values.iter().map(|&v| fmt_g17(v)))?;
    Ok(())
}

fn finish_csv(w: csv::Writer<Vec<u8>>) -> Result<String, CliError> {
    let bytes = w.into_inner().map_err(|e| CliError::Usage(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Usage(e.to_string()))
}

/// Uniform `φ` samples: `samples` points over `revolutions` turns.
fn phi_samples(config: &RunConfig, default_start: f64) -> Vec<f64> {
    let n = config.options.samples.unwrap_or(721);
    let start = config.options.phi_start.unwrap_or(default_start);
    let span = 2.0 * PI * config.options.revolutions.unwrap_or(1.0);
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..n).map(|i| start + span * i as f64 / (n - 1) as f64).collect(),
    }
}

pub const TRAJECTORY_HEADER: [&str; 7] = ["phi", "r", "x", "y", "lrl_x", "lrl_y", "lrl_mod"];

/// CSV trajectory. Friction orbits stop at the crash or escape angle.
pub fn cmd_trajectory(config: &RunConfig) -> Result<String, CliError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(TRAJECTORY_HEADER)?;
    match config.model()? {
        Model::Central(spec, ctx) => {
            let (c1, c2) = config.constants();
            let pair = lrl_engine::closed_form_pair(&spec, &ctx, c1, c2)?;
            let branch = config.branch()?;
            for phi in phi_samples(config, 0.0) {
                let (r, v) = lrl_engine::trajectory_point(&pair, phi, branch)?;
                csv_row(&mut w, &[phi, r, r * phi.cos(), r * phi.sin(), v.x, v.y, v.modulus])?;
            }
        }
        Model::Friction(fs) => {
            let phis = phi_samples(config, fs.phi0);
            if let (Some(&first), Some(&last)) = (phis.first(), phis.last()) {
                if first != fs.phi0 {
                    return Err(CliError::Usage("friction trajectories start at phi0".into()));
                }
                let path = friction_lab::friction_path(&fs, last, phis.len())?;
                let (ax, ay) = (fs.a_mag * fs.phi0.cos(), fs.a_mag * fs.phi0.sin());
                for (&phi, &r) in path.phi.iter().zip(&path.r) {
                    csv_row(&mut w, &[phi, r, r * phi.cos(), r * phi.sin(), ax, ay, fs.a_mag])?;
                }
                if let Some(t) = path.termination {
                    let note = match t {
                        Termination::Crash { phi, .. } => format!("crash at phi = {}", fmt_g17(phi)),
                        Termination::Escape { phi } => format!("escape at phi = {}", fmt_g17(phi)),
                    };
                    eprintln!("lrl: trajectory truncated: {note}");
                }
            }
        }
    }
    finish_csv(w)
}

/// One invariant with its measured value and pass threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl Check {
    fn below(name: &str, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), value, threshold, pass: value < threshold }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub family: String,
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("verify {}\n", self.family);
        for c in &self.checks {
            let tag = if c.pass { "PASS" } else { "FAIL" };
            s += &format!("{tag} {:<24} {:>12.3e} < {:.1e}\n", c.name, c.value, c.threshold);
        }
        s += if self.all_pass() { "all invariants hold\n" } else { "invariant failures\n" };
        s
    }

    pub fn to_json(&self) -> Value {
        json!({
            "family": self.family,
            "all_pass": self.all_pass(),
            "checks": self.checks.iter().map(|c| json!({
                "name": c.name, "value": num(c.value), "threshold": num(c.threshold), "pass": c.pass,
            })).collect::<Vec<_>>(),
        })
    }
}

pub fn cmd_verify(config: &RunConfig) -> Result<VerifyReport, CliError> {
    match config.model()? {
        Model::Central(spec, ctx) => verify_central(config, &spec, &ctx),
        Model::Friction(fs) => verify_friction(config, &fs),
    }
}

fn verify_central(config: &RunConfig, spec: &PotentialSpec, ctx: &RadialContext) -> Result<VerifyReport, CliError> {
    let (c1, c2) = config.constants();
    let pair = lrl_engine::closed_form_pair(spec, ctx, c1, c2)?;
    let scale_g = config.options.corrupt_g.unwrap_or(1.0);
    let mut checks = Vec::new();
    let span = pair.r2 - pair.r1;
    let wide = pair.r2 > 100.0 * pair.r1;
    let grid = |n: usize, margin: f64| -> Vec<f64> {
        (0..n)
            .map(|i| {
                let t = margin + (1.0 - 2.0 * margin) * i as f64 / (n - 1) as f64;
                if wide {
                    pair.r1 * (pair.r2 / pair.r1).powf(t)
                } else {
                    pair.r1 + span * t
                }
            })
            .collect()
    };

    let desitter = matches!(spec, PotentialSpec::Cosmological { lambda, .. } if *lambda > 0.0);
    let regime =
        potentials::classify_regime(spec, ctx, &RegimeOptions { allow_critical: desitter, ..Default::default() })?;
    // A critical orbit never returns, so there is no radial period to follow.
    if regime.regime == Regime::Bounded && pair.half_sweep.is_finite() {
        let rel_tol = config.rel_tol()?;
        let opts = OdeOptions { rel_tol, abs_tol: rel_tol * 1e-2, ..OdeOptions::default() };
        let periods = config.options.periods.unwrap_or(10.0);
        let rep = lrl_engine::conservation_drift(spec, ctx, c1, c2, periods, &opts)?;
        checks.push(Check::below("lrl_drift", rep.drift.max_rel, 1e-8));
    }

    // S = r g and P = ℓ ṙ h on the outgoing branch, with g optionally scaled.
    let mut moduli = Vec::new();
    let edge = if regime.regime == Regime::CriticalMax { 1e-3 } else { 0.0 };
    for r in grid(200, edge) {
        let v = lrl_engine::lrl_evaluate(&pair, r, 0.0, 1.0)?;
        moduli.push((scale_g * v.x).powi(2) + v.y.powi(2));
    }
    let m0 = moduli[0];
    let spread = moduli.iter().map(|m| (m - m0).abs() / m0).fold(0.0, f64::max);
    checks.push(Check::below("modulus_constancy", spread, 1e-10));
    if let Some(expect) = expected_modulus_squared(&pair) {
        let dev = moduli.iter().map(|m| (m - expect).abs() / expect).fold(0.0, f64::max);
        checks.push(Check::below("modulus_identity", dev, 1e-10));
    }

    let mut ode: f64 = 0.0;
    let mut recovery: f64 = 0.0;
    let (cs, cc) = (pair.spec, pair.ctx);
    for r in grid(12, 0.1) {
        let (p1, p2) = lrl_engine::ansatz_coefficients(&cs, &cc, r)?;
        let dh = |x: f64| pair.dh_dr(x).unwrap_or(f64::NAN);
        let d2 = finite_diff(&dh, r, 1, StepPolicy::Relative(1e-3), (pair.r1, pair.r2))?;
        let (h, h1) = (pair.h(r)?, pair.dh_dr(r)?);
        // |h|/r² is the natural size of h'' and keeps constant h from dividing by zero.
        let scale = d2.value.abs() + (p1 * h1).abs() + (p2 * h).abs() + h.abs() / (r * r);
        ode = ode.max((d2.value + p1 * h1 + p2 * h).abs() / scale);
        let g = scale_g * pair.g(r)?;
        let rec = lrl_engine::g_from_h(&cs, &cc, h, h1, r);
        let gs = g.abs().max((c1.abs() + c2.abs()) * cc.ell.max(1.0) / r);
        recovery = recovery.max((g - rec).abs() / gs);
    }
    checks.push(Check::below("ode_residual", ode, 1e-6));
    checks.push(Check::below("g_recovery", recovery, 1e-8));

    let r_grid: Vec<f64> = (0..50).map(|i| 0.2 + 0.2 * i as f64).collect();
    for (name, row) in [
        ("table1_linear", Table1Row::Linear),
        ("table1_quadratic", Table1Row::Quadratic),
        ("table1_cubic", Table1Row::Cubic),
        ("table1_sqrt_amended", Table1Row::SqrtAmended { mass: 1.0 }),
    ] {
        let res = lrl_engine::verify_table1_row(row, 0.8, 0.3, -0.7, 1.2, &r_grid);
        checks.push(Check::below(name, res.e5.max(res.e6), 1e-9));
    }
    Ok(VerifyReport { family: spec.family().into(), checks })
}

/// Modulus squared from the family's closed-form identity, when it has one.
fn expected_modulus_squared(pair: &lrl_engine::ConservedFieldPair) -> Option<f64> {
    let (c1, c2) = (pair.c1, pair.c2);
    let (ell, e) = (pair.ctx.ell, pair.ctx.energy);
    match (pair.form.clone(), pair.spec) {
        (Form::Kepler, PotentialSpec::Kepler { k }) => {
            Some((c1 * c1 + c2 * c2 * ell * ell) * (k * k + 2.0 * e * ell * ell))
        }
        (Form::Harmonic, PotentialSpec::Harmonic { k }) if c2 == 0.0 => {
            Some(4.0 * k * c1 * c1 * pair.r2 * pair.r2 * (e * e - 2.0 * k * ell * ell).sqrt())
        }
        (Form::Harmonic, _) => None,
        _ => Some(ell * ell * (c1 * c1 + c2 * c2)),
    }
}

fn verify_friction(config: &RunConfig, fs: &FrictionSpec) -> Result<VerifyReport, CliError> {
    let mut checks = Vec::new();
    let reach = fs.xi0().min(2.0 * PI);
    let phis: Vec<f64> = (0..40).map(|i| fs.phi0 + (0.9 * reach) * i as f64 / 39.0).collect();
    let mut z_err: f64 = 0.0;
    let mut ident: f64 = 0.0;
    for &phi in &phis {
        let z = friction_lab::z_of_phi(fs, phi)?;
        let f = |eta: f64| (phi - eta).sin() / (fs.beta - fs.alpha * eta).powi(2);
        let q = fs.mu * oracle::quadrature(&Integrand::new(&f), fs.phi0, phi, 1e-13)?.value;
        z_err = z_err.max((z - q).abs() / q.abs().max(1.0));
        if let Ok(r) = friction_lab::friction_trajectory(fs, phi) {
            ident = ident.max((r * (z + fs.a_mag * (phi - fs.phi0).cos()) - 1.0).abs());
        }
    }
    checks.push(Check::below("z_quadrature", z_err, 1e-9));
    checks.push(Check::below("trajectory_identity", ident, 1e-12));
    let rel_tol = config.rel_tol()?;
    let opts = OdeOptions { rel_tol, abs_tol: rel_tol * 1e-2, ..OdeOptions::default() };
    let r0 = 1.0 / fs.a_mag;
    let samples = oracle::integrate_friction(fs.alpha, fs.mu, fs.initial_state(), 1.0, 0.2 * r0, &opts)?;
    let h = friction_lab::hamiltonian_vector(fs, &samples)?;
    checks.push(Check::below("hamiltonian_drift", h.k_drift.max_rel, 1e-6));
    checks.push(Check::below("friction_lrl_drift", h.lrl_drift.max_rel, 1e-6));
    Ok(VerifyReport { family: "friction".into(), checks })
}

pub const SWEEP_HEADER: [&str; 14] = [
    "index",
    "param",
    "value",
    "family",
    "regime",
    "landscape",
    "r1",
    "r2",
    "r_min",
    "r_max",
    "v_max",
    "series_error",
    "drift",
    "error",
];

/// Values described by a [`Grid`].
pub fn grid_values(grid: &Grid) -> Result<Vec<f64>, CliError> {
    let values = match (&grid.values, grid.start, grid.stop, grid.count) {
        (Some(v), None, None, None) => v.clone(),
        (None, Some(a), Some(b), Some(n)) => match n {
            0 => Vec::new(),
            1 => vec![a],
            _ if grid.log => {
                if !(a > 0.0 && b > 0.0) {
                    return Err(CliError::Usage("log grids need positive bounds".into()));
                }
                (0..n).map(|i| a * (b / a).powf(i as f64 / (n - 1) as f64)).collect()
            }
            _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
        },
        _ => return Err(CliError::Usage("grid needs either \"values\" or \"start\", \"stop\", \"count\"".into())),
    };
    if values.len() > 1_000_000 {
        return Err(CliError::Usage("grid larger than 1e6 points".into()));
    }
    Ok(values)
}

/// Parameter grid, evaluated in parallel and written in grid order.
/// Returns the CSV with the number of rows and failed rows.
pub fn cmd_sweep(config: &RunConfig) -> Result<(String, usize, usize), CliError> {
    let grid = config.options.grid.as_ref().ok_or_else(|| CliError::Usage("sweep needs options.grid".into()))?;
    let values = grid_values(grid)?;
    let base_ctx = config.ctx.ok_or_else(|| CliError::Usage("missing \"ctx\"".into()))?;
    let with_drift = config.options.drift.unwrap_or(false);
    let rows: Vec<Vec<String>> = values
        .par_iter()
        .enumerate()
        .map(|(i, &value)| sweep_row(config, base_ctx, &grid.param, i, value, with_drift))
        .collect();
    let failed = rows.iter().filter(|r| !r[13].is_empty()).count();
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(SWEEP_HEADER)?;
    for row in &rows {
        w.write_record(row)?;
    }
    Ok((finish_csv(w)?, rows.len(), failed))
}

fn sweep_row(config: &RunConfig, base: CtxConfig, param: &str, i: usize, value: f64, with_drift: bool) -> Vec<String> {
    let cell = |x: Option<f64>| x.map_or(String::new(), fmt_g17);
    let mut row = vec![i.to_string(), param.to_string(), fmt_g17(value), config.spec.family.clone()];
    let result = (|| -> Result<Vec<String>, CliError> {
        let mut spec_cfg = config.spec.clone();
        let mut ctx = base;
        match param {
            "ell" => ctx.ell = value,
            "energy" => ctx.energy = value,
            "alpha" if spec_cfg.family == "oblate" => {
                let (k, b) = (spec_cfg.params.get("k").copied(), spec_cfg.params.get("b").copied());
                let (Some(k), Some(b)) = (k, b) else { return Err(CliError::Usage("oblate needs k and b".into())) };
                ctx.ell = (12.0 * k * b * value).powf(0.25);
            }
            name if spec_cfg.params.contains_key(name) => {
                spec_cfg.params.insert(name.into(), value);
            }
            other => return Err(CliError::Usage(format!("cannot sweep {other:?}"))),
        }
        let spec = spec_from(&spec_cfg)?;
        let rctx = RadialContext { ell: ctx.ell, energy: ctx.energy };
        let desitter = matches!(spec, PotentialSpec::Cosmological { lambda, .. } if lambda > 0.0);
        let report = potentials::classify_regime(
            &spec,
            &rctx,
            &RegimeOptions { allow_critical: desitter, ..Default::default() },
        )?;
        let (cspec, cctx) = potentials::canonical(&spec, &rctx);
        let st = potentials::stationary_points(&cspec, &cctx).ok();
        let r_min = st.as_ref().and_then(|s| s.min()).map(|p| p.r);
        let max = st.as_ref().and_then(|s| s.max());
        let landscape = landscape(&cspec, &cctx, max.map(|m| m.value));
        let (mut r1, mut r2) = (None, None);
        if matches!(report.regime, Regime::Bounded | Regime::CriticalMax) {
            let tp = potentials::turning_points_for(&cspec, &cctx, &report)?;
            r1 = Some(tp.r1);
            r2 = Some(tp.r2);
        }
        let series_error = match cspec {
            PotentialSpec::Cosmological { k, lambda } if lambda > 0.0 => {
                let exact = lrl_engine::desitter_exact_landmarks(k, cctx.ell, lambda)?;
                let p = lrl_engine::desitter_perturbative_landmarks(k, cctx.ell, lambda);
                Some(((p.r0 - exact.r0) / exact.r0).abs())
            }
            _ => None,
        };
        let drift = if with_drift && report.regime == Regime::Bounded {
            let opts = OdeOptions { rel_tol: config.rel_tol()?, abs_tol: 1e-14, ..OdeOptions::default() };
            let (c1, c2) = config.constants();
            let periods = config.options.periods.unwrap_or(10.0);
            Some(lrl_engine::conservation_drift(&spec, &rctx, c1, c2, periods, &opts)?.drift.max_rel)
        } else {
            None
        };
        Ok(vec![
            report.regime.name().to_string(),
            landscape.to_string(),
            cell(r1),
            cell(r2),
            cell(r_min),
            cell(max.map(|m| m.r)),
            cell(max.map(|m| m.value)),
            cell(series_error),
            cell(drift),
            String::new(),
        ])
    })();
    match result {
        Ok(rest) => row.extend(rest),
        Err(e) => {
            row.extend(std::iter::repeat_n(String::new(), 9));
            row.push(e.to_string());
        }
    }
    row
}

/// Shape of the effective potential, independent of the energy.
fn landscape(spec: &PotentialSpec, ctx: &RadialContext, v_max: Option<f64>) -> &'static str {
    match (spec, v_max) {
        (PotentialSpec::Oblate { k, b }, _) => {
            let alpha = ctx.ell.powi(4) / (12.0 * k * b);
            if alpha <= 1.0 {
                "monotone"
            } else if alpha < 4.0 / 3.0 {
                "negative_extrema"
            } else {
                "barrier_above_zero"
            }
        }
        (_, Some(v)) if v > 0.0 => "barrier_above_zero",
        (_, Some(_)) => "barrier_below_zero",
        (_, None) => "well_only",
    }
}
