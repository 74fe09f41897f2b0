//! Command-line front end: configuration, report envelopes and exit codes.
//!
//! Exit codes: 0 pass, 1 usage or input error, 2 assertion failure.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::chart_metrics::{zoo_build, SpacetimeSpec};
use crate::error::GeomError;
use crate::gf_bounds::{bounds_from, geodesic_cc_check, gf_csv, gf_samples, verify_bounds};
use crate::identity_audit::{audit_signatures, default_witness_specs, identity_terms, split_residual, SignSignature, Witness};
use crate::leaf_integrals::{l1_norm_leaf, obstruction_report};
use crate::riccati_flow::{
    closed_form_gap, riccati_closed_form, riccati_integrate, umbilicity_propagation_check, umbilicity_scan, RiccatiParams,
};
use crate::sampling::Sampler;

pub const SCHEMA_VERSION: &str = "1.0.0";
pub const SCHEMA: &str = include_str!("../schema/report-v1.schema.json");
pub const THREADS_ENV: &str = "FOLIATE_THREADS";

pub const EXIT_PASS: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_FAIL: i32 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub identity: f64,
    pub split: f64,
    pub riccati: f64,
    pub blow_up: f64,
    pub umbilicity: f64,
    pub stokes: f64,
    pub obstruction: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { identity: 1e-6, split: 1e-6, riccati: 1e-8, blow_up: 1e-6, umbilicity: 1e-8, stokes: 1e-6, obstruction: 1e-6 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub path: Option<PathBuf>,
    pub format: Format,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self { path: None, format: Format::Json }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RiccatiConfig {
    pub kappa: f64,
    pub h0: f64,
    pub s_max: f64,
}

impl Default for RiccatiConfig {
    fn default() -> Self {
        Self { kappa: 1.0, h0: 0.0, s_max: 5.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LeafConfig {
    pub leaves: Vec<f64>,
    pub nodes: usize,
    /// Propagation length; by default the time extent of the sample box above the start point.
    pub s_max: Option<f64>,
}

impl Default for LeafConfig {
    fn default() -> Self {
        Self { leaves: vec![0.0], nodes: 64, s_max: None }
    }
}

/// Everything a run depends on; printed in full into every report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub spacetime: SpacetimeSpec,
    pub sampler: Sampler,
    pub tolerances: Tolerances,
    pub output: OutputSpec,
    pub riccati: RiccatiConfig,
    pub leaf: LeafConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            spacetime: SpacetimeSpec::Minkowski { n: 3 },
            sampler: Sampler::default(),
            tolerances: Tolerances::default(),
            output: OutputSpec::default(),
            riccati: RiccatiConfig::default(),
            leaf: LeafConfig::default(),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "foliate", version, about = "Audits of spacelike foliations in Lorentzian charts")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// List zoo spacetimes and their canonical foliations.
    Zoo {
        #[arg(long)]
        filter: Option<String>,
        #[arg(long, value_enum, default_value = "text")]
        format: ZooFormat,
    },
    /// Calibrate the identity signature and audit one spacetime.
    Audit(Common),
    /// Closed-form and numerical Riccati solution.
    Riccati {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        kappa: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        h0: Option<f64>,
        #[arg(long)]
        s_max: Option<f64>,
    },
    /// Sampled invariant and mean-curvature bounds.
    Gf(Common),
    /// Umbilicity scan over leaves and propagation check.
    Umbilicity {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        leaves: Option<Vec<f64>>,
        #[arg(long)]
        nodes: Option<usize>,
    },
    /// Leaf integrals and the obstruction pattern on compact leaves.
    IntegrateLeaf {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        leaves: Option<Vec<f64>>,
        #[arg(long)]
        nodes: Option<usize>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ZooFormat {
    Text,
    Json,
}

#[derive(Args, Debug, Default, Clone)]
pub struct Common {
    /// TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Zoo entry name; resets parameters to that entry's defaults.
    #[arg(long)]
    pub spacetime: Option<String>,
    /// Spacetime parameter override, `key=value` (TOML value syntax).
    #[arg(long = "param", value_name = "KEY=VALUE")]
    pub params: Vec<String>,
    /// Shorthand for `--param c=<value>`.
    #[arg(long, allow_hyphen_values = true)]
    pub c: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub count: Option<usize>,
    /// Identity tolerance for `audit`.
    #[arg(long)]
    pub tolerance: Option<f64>,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

/// A usage or input problem: exit code 1.
#[derive(Debug)]
pub struct UsageError(pub String);

impl<E: std::fmt::Display> From<E> for UsageError {
    fn from(e: E) -> Self {
        UsageError(e.to_string())
    }
}

fn parse_value(raw: &str) -> Result<toml::Value, UsageError> {
    let table: toml::Table = format!("v = {raw}")
        .parse()
        .or_else(|_| format!("v = \"{raw}\"").parse())
        .map_err(|e| UsageError(format!("cannot parse value `{raw}`: {e}")))?;
    Ok(table["v"].clone())
}

/// Loads the file (if any) and applies flag overrides.
pub fn resolve_config(common: &Common) -> Result<RunConfig, UsageError> {
    let mut table: toml::Table = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| UsageError(format!("{}: {e}", path.display())))?;
            text.parse().map_err(|e| UsageError(format!("{}: {e}", path.display())))?
        }
        None => toml::Table::new(),
    };
    let mut st = match table.remove("spacetime") {
        Some(toml::Value::Table(t)) => t,
        Some(_) => return Err(UsageError("`spacetime` must be a table".into())),
        None => toml::Table::from_iter([("name".to_string(), toml::Value::String("minkowski".into()))]),
    };
    if let Some(name) = &common.spacetime {
        let name = match name.as_str() {
            "slab" => "slab_counterexample",
            "de_sitter" => "de_sitter_flat_slicing",
            "anti_de_sitter" | "ads" => "anti_de_sitter_chart",
            other => other,
        };
        if st.get("name").and_then(|v| v.as_str()) != Some(name) {
            st = toml::Table::from_iter([("name".to_string(), toml::Value::String(name.to_string()))]);
        }
    }
    for kv in &common.params {
        let (k, v) = kv.split_once('=').ok_or_else(|| UsageError(format!("expected KEY=VALUE, got `{kv}`")))?;
        st.insert(k.trim().to_string(), parse_value(v.trim())?);
    }
    if let Some(c) = common.c {
        st.insert("c".into(), toml::Value::Float(c));
    }
    table.insert("spacetime".into(), toml::Value::Table(st));
    let mut cfg: RunConfig = table.try_into().map_err(|e: toml::de::Error| UsageError(e.to_string()))?;
    if let Some(seed) = common.seed {
        cfg.sampler = match cfg.sampler {
            Sampler::Sobol { count, .. } => Sampler::Sobol { count, seed: seed as u32 },
            Sampler::Random { count, .. } => Sampler::Random { count, seed },
            grid => grid,
        };
    }
    if let Some(n) = common.count {
        cfg.sampler = match cfg.sampler {
            Sampler::Sobol { seed, .. } => Sampler::Sobol { count: n, seed },
            Sampler::Random { seed, .. } => Sampler::Random { count: n, seed },
            grid => grid,
        };
    }
    if let Some(t) = common.tolerance {
        cfg.tolerances.identity = t;
    }
    if let Some(p) = &common.output {
        cfg.output.path = Some(p.clone());
    }
    if let Some(f) = common.format {
        cfg.output.format = f;
    }
    zoo_build(&cfg.spacetime)?;
    Ok(cfg)
}

/// The outcome of one command.
#[derive(Debug)]
pub struct Outcome {
    pub passed: bool,
    pub result: Value,
    pub notes: Vec<String>,
    pub error: Option<GeomError>,
    pub csv: Option<String>,
}

impl Outcome {
    fn pass(result: Value) -> Self {
        Self { passed: true, result, notes: vec![], error: None, csv: None }
    }
}

/// Exit code for an engine error: assertion-type errors fail the run, input errors are usage errors.
pub fn exit_code_for(e: &GeomError) -> i32 {
    match e {
        GeomError::BoundViolated { .. }
        | GeomError::NoUniqueSignature { .. }
        | GeomError::NotConstantCurvature { .. }
        | GeomError::NotGeodesicNormal { .. }
        | GeomError::RegimeViolation(_) => EXIT_FAIL,
        _ => EXIT_USAGE,
    }
}

fn error_kind(e: &GeomError) -> String {
    let dbg = format!("{e:?}");
    let head = dbg.split([' ', '(', '{']).next().unwrap_or("");
    let mut out = String::new();
    for (i, ch) in head.chars().enumerate() {
        if ch.is_uppercase() && i > 0 {
            out.push('_');
        }
        out.push(ch.to_ascii_lowercase());
    }
    out
}

/// The versioned JSON envelope shared by every command.
pub fn envelope(command: &str, cfg: &RunConfig, outcome: &Outcome, exit_code: i32) -> Value {
    let mut v = json!({
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "timestamp": humantime::format_rfc3339_millis(std::time::SystemTime::now()).to_string(),
        "config": serde_json::to_value(cfg).expect("config serializes"),
        "status": if exit_code == EXIT_PASS { "pass" } else { "fail" },
        "exit_code": exit_code,
        "notes": outcome.notes,
        "result": outcome.result,
    });
    if let Some(e) = &outcome.error {
        v["error"] = json!({ "kind": error_kind(e), "message": e.to_string() });
    }
    v
}

/// Keys of the envelope that the shipped schema requires, checked structurally.
pub fn validate_envelope(report: &Value) -> Result<(), String> {
    let schema: Value = serde_json::from_str(SCHEMA).map_err(|e| e.to_string())?;
    let obj = report.as_object().ok_or("report is not an object")?;
    for key in schema["required"].as_array().ok_or("schema has no required list")? {
        let key = key.as_str().unwrap();
        let val = obj.get(key).ok_or_else(|| format!("missing key `{key}`"))?;
        let want = schema["properties"][key]["type"].as_str().unwrap_or("any");
        let ok = match want {
            "string" => val.is_string(),
            "integer" => val.is_i64(),
            "object" => val.is_object(),
            "array" => val.is_array(),
            _ => true,
        };
        if !ok {
            return Err(format!("key `{key}` should be {want}"));
        }
    }
    if report["schema_version"] != schema["properties"]["schema_version"]["const"] {
        return Err("schema_version mismatch".into());
    }
    Ok(())
}

fn sample_witness(spec: &SpacetimeSpec, sampler: &Sampler) -> Result<Witness, GeomError> {
    Witness::sampled(spec, sampler)
}

pub fn cmd_audit(cfg: &RunConfig) -> Result<Outcome, GeomError> {
    let tol = cfg.tolerances.identity;
    let witnesses: Vec<Witness> =
        default_witness_specs().iter().map(|s| sample_witness(s, &cfg.sampler)).collect::<Result<_, _>>()?;
    let calibration = audit_signatures(&witnesses, tol)?;
    let target = sample_witness(&cfg.spacetime, &cfg.sampler)?;
    let mut per_sig = [0.0f64; 8];
    let mut split = 0.0f64;
    for p in &target.points {
        let t = identity_terms(&target.foliation, p)?;
        for (m, s) in per_sig.iter_mut().zip(SignSignature::all()) {
            *m = m.max(t.residual(s).abs());
        }
        split = split.max(split_residual(&target.foliation, p)?.abs());
    }
    let target_residuals: Vec<Value> = SignSignature::all()
        .iter()
        .zip(per_sig)
        .map(|(s, v)| json!({ "signature": s, "max_abs_residual": v }))
        .collect();
    let winner_residual = calibration.winner.map(|w| {
        let k = SignSignature::all().iter().position(|s| *s == w).unwrap();
        per_sig[k]
    });
    let mut notes = vec![format!(
        "calibration witnesses: {}; the printed signature {} is reported, not asserted",
        calibration.spacetimes.join(", "),
        SignSignature::PRINTED
    )];
    let error = match calibration.winner {
        None => Some(GeomError::NoUniqueSignature {
            passing: calibration.passing.len(),
            tol,
            ties: calibration.passing.iter().map(|s| s.as_array()).collect(),
        }),
        Some(_) if winner_residual.unwrap() >= tol || split >= cfg.tolerances.split => {
            Some(GeomError::BoundViolated {
                which: "identity".into(),
                point: vec![],
                detail: format!(
                    "{}: calibrated residual {:e}, split residual {:e}",
                    target.name(),
                    winner_residual.unwrap(),
                    split
                ),
            })
        }
        Some(_) => None,
    };
    if let Some(e) = &error {
        notes.push(e.to_string());
    }
    Ok(Outcome {
        passed: error.is_none(),
        result: json!({
            "calibration": calibration,
            "target": {
                "spacetime": target.name(),
                "points": target.points.len(),
                "residuals": target_residuals,
                "calibrated_residual": winner_residual,
                "max_split_residual": split,
            },
        }),
        notes,
        error,
        csv: None,
    })
}

pub fn cmd_riccati(cfg: &RunConfig) -> Result<Outcome, GeomError> {
    let rc = &cfg.riccati;
    let params = RiccatiParams::new(rc.kappa, rc.h0)?;
    let closed = riccati_closed_form(params);
    let numeric = riccati_integrate(params, rc.s_max, cfg.tolerances.riccati)?;
    let gap = closed_form_gap(&numeric, &closed, 1e-3);
    let blow_up_gap = match (closed.blow_up, numeric.blow_up) {
        (Some(a), Some(b)) => Some((a - b).abs()),
        (Some(a), None) if a >= rc.s_max - cfg.tolerances.blow_up => None,
        (None, None) => None,
        _ => Some(f64::INFINITY),
    };
    let passed = gap < cfg.tolerances.riccati && blow_up_gap.is_none_or(|g| g < cfg.tolerances.blow_up);
    let mut out = Outcome::pass(json!({
        "kappa": rc.kappa,
        "h0": rc.h0,
        "s_max": rc.s_max,
        "branch": closed.branch,
        "blow_up": numeric.blow_up,
        "blow_up_closed_form": closed.blow_up,
        "blow_up_gap": blow_up_gap.map(|g| if g.is_finite() { json!(g) } else { json!("mismatch") }),
        "max_scaled_gap": gap,
        "accepted_steps": numeric.accepted,
        "rejected_steps": numeric.rejected,
    }));
    out.passed = passed;
    out.csv = Some(numeric.to_csv());
    if !passed {
        out.error = Some(GeomError::BoundViolated {
            which: "riccati".into(),
            point: vec![rc.kappa, rc.h0],
            detail: format!("closed-form gap {gap:e}, blow-up gap {blow_up_gap:?}"),
        });
    }
    Ok(out)
}

pub fn cmd_gf(cfg: &RunConfig) -> Result<Outcome, GeomError> {
    let (metric, fol) = zoo_build(&cfg.spacetime)?;
    let samples = gf_samples(&fol, &cfg.sampler)?;
    let report = bounds_from(metric.name(), &samples, &metric.sample_box)?;
    let verdict = verify_bounds(&report);
    let mut notes = vec!["the infimum is a sampled infimum over the declared sample box".to_string()];
    let cc = if cfg.spacetime.constant_curvature().is_some() {
        match geodesic_cc_check(&cfg.spacetime, &cfg.sampler) {
            Ok(r) => Some(serde_json::to_value(r).unwrap()),
            Err(e) => {
                notes.push(format!("geodesic constant-curvature check not applicable: {e}"));
                None
            }
        }
    } else {
        None
    };
    let mut out = Outcome::pass(json!({
        "spacetime": report.spacetime,
        "gf": report.gf.value,
        "supH2": report.sup_h_sq,
        "margin": report.margin,
        "sup_b_norm_sq": report.sup_b_norm_sq,
        "totally_geodesic": report.totally_geodesic,
        "estimate": report.gf,
        "sup_h_sq_at": report.sup_h_sq_at,
        "geodesic_constant_curvature": cc,
    }));
    out.csv = Some(gf_csv(&samples));
    if let Err(e) = verdict {
        notes.push(e.to_string());
        out.passed = false;
        out.error = Some(e);
    }
    out.notes = notes;
    Ok(out)
}

pub fn cmd_umbilicity(cfg: &RunConfig) -> Result<Outcome, GeomError> {
    let (metric, fol) = zoo_build(&cfg.spacetime)?;
    let scan = umbilicity_scan(&fol, &cfg.leaf.leaves, 9)?;
    let centre: Vec<f64> = metric.sample_box.map_unit(&vec![0.5; metric.dim() - 1]);
    let start = fol.leaf_point(&centre, cfg.leaf.leaves[0])?;
    let mut notes = vec![];
    let mut out = Outcome::pass(Value::Null);
    let t = metric.dim() - 1;
    let s_max = cfg.leaf.s_max.unwrap_or(0.95 * (metric.sample_box.hi[t] - start[t])).max(0.1);
    let propagation = match umbilicity_propagation_check(&fol, &start, s_max, cfg.tolerances.umbilicity) {
        Ok(r) => {
            if !r.holds {
                out.passed = false;
                out.error = Some(GeomError::BoundViolated {
                    which: "umbilicity_propagation".into(),
                    point: start.to_vec(),
                    detail: format!("umb_dev grew from {:e} to {:e}", r.initial_umb_dev, r.max_umb_dev),
                });
            }
            json!(r)
        }
        Err(e @ (GeomError::NotConstantCurvature { .. } | GeomError::NotGeodesicNormal { .. })) => {
            notes.push(format!("propagation precondition rejected: {e}"));
            json!({ "precondition": error_kind(&e), "message": e.to_string() })
        }
        Err(e) => return Err(e),
    };
    let leaves: Vec<Value> = scan
        .iter()
        .map(|l| {
            json!({
                "leaf": l.leaf,
                "points": l.points,
                "max_umb_dev": l.max_umb_dev,
                "max_h_norm": l.max_h_norm,
                "totally_geodesic": l.max_h_norm < 1e-10,
                "umbilic": l.max_umb_dev < 1e-10,
            })
        })
        .collect();
    out.result = json!({ "spacetime": metric.name(), "leaves": leaves, "propagation": propagation });
    let mut csv = String::from("leaf,points,max_umb_dev,max_h_norm\n");
    for l in &scan {
        csv.push_str(&format!("{:.17e},{},{:.17e},{:.17e}\n", l.leaf, l.points, l.max_umb_dev, l.max_h_norm));
    }
    out.csv = Some(csv);
    out.notes = notes;
    Ok(out)
}

pub fn cmd_integrate_leaf(cfg: &RunConfig) -> Result<Outcome, GeomError> {
    let (_, fol) = zoo_build(&cfg.spacetime)?;
    let report = obstruction_report(&fol, &cfg.leaf.leaves, cfg.leaf.nodes, cfg.tolerances.obstruction)?;
    let l1: Vec<f64> =
        cfg.leaf.leaves.iter().map(|&l| l1_norm_leaf(&fol, l, cfg.leaf.nodes)).collect::<Result<_, _>>()?;
    let worst_stokes = report.leaves.iter().map(|l| l.int_div_l_a.abs()).fold(0.0, f64::max);
    let mut out = Outcome::pass(json!({ "obstruction": report, "l1_norm": l1, "max_stokes_integral": worst_stokes }));
    out.notes.push(report.header.clone());
    out.csv = Some(report.to_csv());
    if worst_stokes >= cfg.tolerances.stokes {
        out.passed = false;
        out.error = Some(GeomError::BoundViolated {
            which: "stokes".into(),
            point: vec![],
            detail: format!("|integral of div_L A| = {worst_stokes:e}"),
        });
    }
    Ok(out)
}

pub fn zoo_table(filter: Option<&str>) -> Vec<SpacetimeSpec> {
    SpacetimeSpec::catalogue().into_iter().filter(|s| filter.is_none_or(|f| s.name().contains(f))).collect()
}

fn zoo_text(entries: &[SpacetimeSpec]) -> String {
    let mut out = format!("{:<24} {:>2}  {:<38} {}\n", "name", "n", "foliation", "validity");
    for s in entries {
        out.push_str(&format!(
            "{:<24} {:>2}  {:<38} {}\n",
            s.name(),
            s.leaf_dim(),
            s.canonical_foliation_label(),
            s.validity_label()
        ));
    }
    out
}

/// What one invocation produced: exit code, rendered report and its destination.
#[derive(Debug, Clone, PartialEq)]
pub struct Execution {
    pub code: i32,
    pub text: String,
    pub path: Option<PathBuf>,
    /// Diagnostic for stderr, if any.
    pub message: Option<String>,
}

impl Execution {
    fn usage(name: &str, m: String) -> Self {
        Self { code: EXIT_USAGE, text: String::new(), path: None, message: Some(format!("foliate {name}: {m}")) }
    }

    /// Writes the report to its destination; stdout when no path was configured.
    pub fn emit(&self) -> i32 {
        if let Some(m) = &self.message {
            eprintln!("{m}");
        }
        match &self.path {
            Some(p) => {
                if let Err(e) = std::fs::write(p, &self.text) {
                    eprintln!("foliate: {}: {e}", p.display());
                    return EXIT_USAGE;
                }
            }
            None => print!("{}", self.text),
        }
        self.code
    }
}

fn run_command(name: &str, common: &Common, f: impl FnOnce(&RunConfig) -> Result<Outcome, GeomError>) -> Execution {
    let cfg = match resolve_config(common) {
        Ok(c) => c,
        Err(UsageError(m)) => return Execution::usage(name, m),
    };
    let (outcome, code, message) = match f(&cfg) {
        Ok(o) => {
            let code = if o.passed { EXIT_PASS } else { EXIT_FAIL };
            (o, code, None)
        }
        Err(e) => {
            let code = exit_code_for(&e);
            let message = Some(format!("foliate {name}: {e}"));
            let o = Outcome { passed: false, result: Value::Null, notes: vec![e.to_string()], error: Some(e), csv: None };
            (o, code, message)
        }
    };
    let text = match (cfg.output.format, &outcome.csv) {
        (Format::Csv, Some(csv)) => csv.clone(),
        _ => {
            let mut s = serde_json::to_string_pretty(&envelope(name, &cfg, &outcome, code)).unwrap();
            s.push('\n');
            s
        }
    };
    Execution { code, text, path: cfg.output.path.clone(), message }
}

/// Caps the global thread pool from `FOLIATE_THREADS` when set.
pub fn init_threads() {
    if let Some(n) = std::env::var(THREADS_ENV).ok().and_then(|v| v.parse::<usize>().ok()).filter(|&n| n > 0) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn zoo_json(entries: &[SpacetimeSpec]) -> String {
    let rows: Vec<Value> = entries
        .iter()
        .map(|s| {
            json!({
                "spec": s,
                "leaf_dim": s.leaf_dim(),
                "foliation": s.canonical_foliation_label(),
                "validity": s.validity_label(),
                "constant_curvature": s.constant_curvature(),
            })
        })
        .collect();
    let mut out = serde_json::to_string_pretty(&rows).unwrap();
    out.push('\n');
    out
}

/// Runs a parsed command without touching stdout.
pub fn execute(cli: Cli) -> Execution {
    match cli.command {
        Command::Zoo { filter, format } => {
            let entries = zoo_table(filter.as_deref());
            let text = match format {
                ZooFormat::Text => zoo_text(&entries),
                ZooFormat::Json => zoo_json(&entries),
            };
            Execution { code: EXIT_PASS, text, path: None, message: None }
        }
        Command::Audit(common) => run_command("audit", &common, cmd_audit),
        Command::Riccati { common, kappa, h0, s_max } => run_command("riccati", &common, |cfg| {
            let mut cfg = cfg.clone();
            cfg.riccati.kappa = kappa.unwrap_or(cfg.riccati.kappa);
            cfg.riccati.h0 = h0.unwrap_or(cfg.riccati.h0);
            cfg.riccati.s_max = s_max.unwrap_or(cfg.riccati.s_max);
            cmd_riccati(&cfg)
        }),
        Command::Gf(common) => run_command("gf", &common, cmd_gf),
        Command::Umbilicity { common, leaves, nodes } => run_command("umbilicity", &common, |cfg| {
            let mut cfg = cfg.clone();
            if let Some(l) = leaves {
                cfg.leaf.leaves = l;
            }
            cfg.leaf.nodes = nodes.unwrap_or(cfg.leaf.nodes);
            cmd_umbilicity(&cfg)
        }),
        Command::IntegrateLeaf { common, leaves, nodes } => run_command("integrate-leaf", &common, |cfg| {
            let mut cfg = cfg.clone();
            if let Some(l) = leaves {
                cfg.leaf.leaves = l;
            }
            cfg.leaf.nodes = nodes.unwrap_or(cfg.leaf.nodes);
            cmd_integrate_leaf(&cfg)
        }),
    }
}

/// Parses `argv` (program name first) and runs; `--help` and `--version` exit 0, bad arguments 1.
pub fn execute_args<I, T>(args: I) -> Execution
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => execute(cli),
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
            let rendered = e.to_string();
            if code == EXIT_PASS {
                Execution { code, text: rendered, path: None, message: None }
            } else {
                Execution { code, text: String::new(), path: None, message: Some(rendered.trim_end().to_string()) }
            }
        }
    }
}

pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    init_threads();
    execute_args(args).emit()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_replace_spacetime_and_params() {
        let common = Common {
            spacetime: Some("robertson_walker".into()),
            params: vec!["a=[2.0, 0.5]".into(), "n=2".into()],
            seed: Some(9),
            ..Default::default()
        };
        let cfg = resolve_config(&common).unwrap();
        assert_eq!(cfg.spacetime, SpacetimeSpec::RobertsonWalker { a: vec![2.0, 0.5], n: 2 });
        assert_eq!(cfg.sampler, Sampler::Sobol { count: 200, seed: 9 });
        let c = resolve_config(&Common { spacetime: Some("de_sitter".into()), c: Some(2.0), ..Default::default() }).unwrap();
        assert_eq!(c.spacetime, SpacetimeSpec::DeSitterFlatSlicing { c: 2.0, n: 3 });
    }

    #[test]
    fn bad_inputs_are_usage_errors() {
        assert!(resolve_config(&Common { spacetime: Some("nowhere".into()), ..Default::default() }).is_err());
        assert!(resolve_config(&Common { params: vec!["c".into()], ..Default::default() }).is_err());
        let c = Common { spacetime: Some("de_sitter".into()), c: Some(-1.0), ..Default::default() };
        assert!(resolve_config(&c).is_err());
    }

    #[test]
    fn config_file_round_trips_with_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "[spacetime]\nname = \"static_lapse_torus\"\nbeta_x = 0.1\n\n[sampler]\nkind = \"grid\"\nlevel = 2\n").unwrap();
        let cfg = resolve_config(&Common { config: Some(path), ..Default::default() }).unwrap();
        assert_eq!(cfg.spacetime, SpacetimeSpec::StaticLapseTorus { beta_x: 0.1, beta_y: 0.2 });
        assert_eq!(cfg.sampler, Sampler::Grid { level: 2 });
        assert_eq!(cfg.tolerances, Tolerances::default());
        let back: RunConfig = toml::from_str(&toml::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn envelope_satisfies_schema() {
        let cfg = RunConfig::default();
        let o = Outcome::pass(json!({"x": 1}));
        let env = envelope("gf", &cfg, &o, 0);
        validate_envelope(&env).unwrap();
        let mut broken = env.clone();
        broken.as_object_mut().unwrap().remove("config");
        assert!(validate_envelope(&broken).is_err());
    }

    #[test]
    fn error_kinds_are_snake_case() {
        assert_eq!(error_kind(&GeomError::NoUniqueSignature { passing: 0, tol: 0.0, ties: vec![] }), "no_unique_signature");
        assert_eq!(error_kind(&GeomError::EmptySampleSet), "empty_sample_set");
        assert_eq!(exit_code_for(&GeomError::EmptySampleSet), EXIT_USAGE);
        assert_eq!(exit_code_for(&GeomError::RegimeViolation(String::new())), EXIT_FAIL);
    }

    #[test]
    fn zoo_filter() {
        assert_eq!(zoo_table(None).len(), 8);
        assert_eq!(zoo_table(Some("de_sitter")).len(), 2);
        assert!(zoo_table(Some("nothing")).is_empty());
    }
}
