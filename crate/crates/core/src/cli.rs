//! Config-driven experiment runner behind the `cvlearn` binary.
//!
//! Every run writes `results.csv` (or `scaling.csv`), `summary.json`,
//! `config.toml` (the effective configuration) and `manifest.json` into the
//! output directory. Re-running the emitted `config.toml` reproduces the
//! outputs byte for byte.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::baselines::{self, Schedule, Strategy};
use crate::error::{Error, Result};
use crate::fock_oracle;
use crate::protocols::{self, LearnOverrides, LearnPlan, ObservableSettings, PhaseBox, Provenance};
use crate::sampling::{SamplerBackend, SeedStream};
use crate::states::{PhasePoint, ReflectionSymmetry, StateModel, StateSpec};
use crate::Complex64;

#[derive(Debug, Parser)]
#[command(name = "cvlearn", version, about = "Characteristic-function learning experiments for continuous-variable states")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Clone, Debug, Default, Args)]
pub struct Flags {
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory; defaults to `output.dir` from the config, then `out`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Sampler backend tag: gaussian-analytic, fft-characteristic or fock-exact.
    #[arg(long, global = true)]
    pub backend: Option<String>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
}

#[derive(Clone, Debug, Subcommand)]
pub enum Command {
    /// Print planner sample sizes for ε, δ and M.
    Plan(PlanArgs),
    /// Product estimates C(α)C(ᾱ) from unrotated pairs.
    CfProduct,
    /// Square estimates C(α)² using the reflection symmetry.
    CfSquare,
    /// Point values with branch resolution.
    LearnPoints,
    /// Observable expectation from learned points over a box.
    Observable,
    /// Single-copy homodyne baseline at a fixed copy budget.
    BaselineRestricted,
    /// Restricted-versus-enhanced experiment on the lower-bound family.
    LowerboundScaling,
    /// Analytic characteristic functions against truncated Fock traces.
    OracleCheck,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Plan(_) => "plan",
            Command::CfProduct => "cf-product",
            Command::CfSquare => "cf-square",
            Command::LearnPoints => "learn-points",
            Command::Observable => "observable",
            Command::BaselineRestricted => "baseline-restricted",
            Command::LowerboundScaling => "lowerbound-scaling",
            Command::OracleCheck => "oracle-check",
        }
    }
}

#[derive(Clone, Debug, Default, Args)]
pub struct PlanArgs {
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    /// Number of points M.
    #[arg(long = "points")]
    pub m_points: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: Option<u64>,
    pub state: Option<StateSpec>,
    /// Phases of a diagonal reflection unitary; the state's declared symmetry otherwise.
    pub symmetry_phases: Option<Vec<f64>>,
    pub points: Option<PointsSource>,
    #[serde(default)]
    pub protocol: ProtocolConfig,
    pub backend: Option<SamplerBackend>,
    pub observable: Option<ObservableConfig>,
    pub restricted: Option<RestrictedConfig>,
    pub lowerbound: Option<LowerboundConfig>,
    pub output: Option<OutputConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    pub epsilon: f64,
    pub delta: f64,
    /// Pair rounds for cf-product / cf-square, or N₁ for learn-points.
    pub n_pairs: Option<u64>,
    /// Copies per sign bank for learn-points.
    pub n_sign: Option<u64>,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig { epsilon: 0.1, delta: 0.05, n_pairs: None, n_sign: None }
    }
}

/// Where the phase-space points come from. Rows hold 2k numbers
/// (re₁, im₁, …, re_k, im_k).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PointsSource {
    Inline { values: Vec<Vec<f64>> },
    /// Single-mode rectangular grid; a count of 1 uses the lower end.
    Grid { re: [f64; 2], im: [f64; 2], n_re: usize, n_im: usize },
    /// CSV with a header row and 2k columns.
    File { path: PathBuf },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservableConfig {
    /// O = |ψ⟩⟨ψ| or any density operator σ; the estimate is tr(ρσ).
    pub target: StateSpec,
    /// Box bounds per mode: [lo, hi] of Re α_j and of Im α_j.
    pub re: Vec<[f64; 2]>,
    pub im: Vec<[f64; 2]>,
    pub learn_epsilon: Option<f64>,
    pub pilot_points: Option<usize>,
    pub max_points: Option<usize>,
    #[serde(default = "yes")]
    pub check_tail: bool,
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RestrictedConfig {
    pub copies: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LowerboundConfig {
    pub ms: Vec<usize>,
    #[serde(default = "unit")]
    pub alpha_mag: f64,
    pub r: Option<f64>,
    pub trials: usize,
    pub copies: Vec<u64>,
    pub epsilons: Vec<f64>,
    pub delta: f64,
}

fn unit() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = Self::from_toml_str(&fs::read_to_string(path)?)?;
        // file points are resolved against the config's directory
        if let Some(PointsSource::File { path: p }) = &mut cfg.points {
            let joined = match path.parent() {
                Some(dir) if p.is_relative() => dir.join(&*p),
                _ => p.clone(),
            };
            *p = fs::canonicalize(&joined).unwrap_or(joined);
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    /// sha256 of the canonical TOML form.
    pub fn hash(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(self.to_toml_string()?.as_bytes())))
    }

    fn state(&self) -> Result<StateModel> {
        let spec = self.state.clone().ok_or_else(|| Error::Validation("config has no [state] table".into()))?;
        StateModel::from_spec(spec)
    }

    fn symmetry(&self) -> Option<ReflectionSymmetry> {
        self.symmetry_phases.as_deref().map(ReflectionSymmetry::diagonal)
    }

    fn seed(&self) -> Result<u64> {
        self.seed.ok_or_else(|| Error::Validation("a seed is required (config `seed` or --seed)".into()))
    }

    fn backend_for(&self, state: &StateModel) -> SamplerBackend {
        self.backend.clone().unwrap_or_else(|| SamplerBackend::auto(state))
    }

    fn points(&self) -> Result<Vec<PhasePoint>> {
        let src = self.points.as_ref().ok_or_else(|| Error::Validation("config has no [points] table".into()))?;
        let rows: Vec<Vec<f64>> = match src {
            PointsSource::Inline { values } => values.clone(),
            PointsSource::Grid { re, im, n_re, n_im } => {
                if *n_re == 0 || *n_im == 0 {
                    return Err(Error::invalid("points", "grid counts must be positive"));
                }
                let axis = |b: &[f64; 2], n: usize| -> Vec<f64> {
                    if n == 1 {
                        vec![b[0]]
                    } else {
                        (0..n).map(|i| b[0] + (b[1] - b[0]) * i as f64 / (n - 1) as f64).collect()
                    }
                };
                let (xs, ys) = (axis(re, *n_re), axis(im, *n_im));
                xs.iter().flat_map(|x| ys.iter().map(move |y| vec![*x, *y])).collect()
            }
            PointsSource::File { path } => read_points_csv(path)?,
        };
        if rows.is_empty() {
            return Err(Error::invalid("points", "empty point set"));
        }
        rows.iter()
            .map(|r| {
                if r.is_empty() || r.len() % 2 != 0 {
                    return Err(Error::invalid("points", format!("row of {} numbers; expected 2k", r.len())));
                }
                PhasePoint::new(r.chunks(2).map(|c| Complex64::new(c[0], c[1])).collect())
            })
            .collect()
    }
}

fn read_points_csv(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_path(path)?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|f| f.parse::<f64>().map_err(|e| Error::Parse(format!("{}: `{f}`: {e}", path.display()))))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

/// What a run produced, for printing and tests.
#[derive(Clone, Debug, PartialEq)]
pub struct RunReport {
    pub out_dir: Option<PathBuf>,
    pub summary: Value,
    /// False when a validation-style subcommand found failures.
    pub passed: bool,
}

/// Applies flag overrides to the file config.
pub fn effective_config(flags: &Flags) -> Result<ExperimentConfig> {
    let mut cfg = match &flags.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = flags.seed {
        cfg.seed = Some(s);
    }
    if let Some(tag) = &flags.backend {
        cfg.backend = Some(tag.parse()?);
    }
    Ok(cfg)
}

pub fn run(command: &Command, flags: &Flags) -> Result<RunReport> {
    if let Some(n) = flags.workers {
        if n == 0 {
            return Err(Error::invalid("workers", "must be at least 1"));
        }
        // a second initialisation in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let mut cfg = effective_config(flags)?;
    let out_dir = flags.out.clone().or_else(|| cfg.output.as_ref().map(|o| o.dir.clone()));
    cfg.output = None;

    let outputs = match command {
        Command::Plan(args) => plan(&cfg, args)?,
        Command::CfProduct => cf_pairs(&cfg, false)?,
        Command::CfSquare => cf_pairs(&cfg, true)?,
        Command::LearnPoints => learn(&cfg)?,
        Command::Observable => observable(&cfg)?,
        Command::BaselineRestricted => restricted(&cfg)?,
        Command::LowerboundScaling => lowerbound(&cfg)?,
        Command::OracleCheck => oracle_check()?,
    };
    let passed = outputs.passed;
    let written = match (&out_dir, matches!(command, Command::Plan(_))) {
        (None, true) => None,
        (dir, _) => {
            let dir = dir.clone().unwrap_or_else(|| PathBuf::from("out"));
            write_outputs(&dir, command.name(), &cfg, &outputs)?;
            Some(dir)
        }
    };
    Ok(RunReport { out_dir: written, summary: outputs.summary, passed })
}

struct Outputs {
    table_name: &'static str,
    table: Vec<u8>,
    summary: Value,
    passed: bool,
}

fn write_outputs(dir: &Path, subcommand: &str, cfg: &ExperimentConfig, outputs: &Outputs) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    if !outputs.table.is_empty() {
        fs::write(dir.join(outputs.table_name), &outputs.table)?;
        files.push(outputs.table_name);
    }
    fs::write(dir.join("summary.json"), pretty(&outputs.summary)?)?;
    let config_text = cfg.to_toml_string()?;
    fs::write(dir.join("config.toml"), &config_text)?;
    files.extend(["summary.json", "config.toml", "manifest.json"]);
    let manifest = json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "subcommand": subcommand,
        "config_hash": cfg.hash()?,
        "seed": cfg.seed,
        "files": files,
        "rerun": format!("cvlearn {subcommand} --config config.toml"),
    });
    fs::write(dir.join("manifest.json"), pretty(&manifest)?)?;
    Ok(())
}

fn pretty(v: &Value) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

fn plan(cfg: &ExperimentConfig, args: &PlanArgs) -> Result<Outputs> {
    let eps = args.epsilon.unwrap_or(cfg.protocol.epsilon);
    let delta = args.delta.unwrap_or(cfg.protocol.delta);
    let m = match args.m_points {
        Some(m) => m,
        None if cfg.points.is_some() => cfg.points()?.len(),
        None => 1,
    };
    let pairs = protocols::plan_product_samples(eps, delta, m)?;
    let learn = LearnPlan::new(eps, delta, m)?;
    let summary = json!({
        "epsilon": eps,
        "delta": delta,
        "m": m,
        "pair_rounds": pairs,
        "learn": learn,
        "learn_quantum_copies": learn.quantum_copies(),
        "union_bound_budget": learn.union_bound_budget(),
    });
    Ok(Outputs { table_name: "", table: Vec::new(), summary, passed: true })
}

fn results_table(
    records: &[protocols::EstimateRecord],
    truths: &[Complex64],
    ledger: Option<&protocols::CopyLedger>,
    provenance: &Provenance,
) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    protocols::write_results_csv(&mut buf, records, Some(truths), ledger, provenance)?;
    Ok(buf)
}

fn max_err(records: &[protocols::EstimateRecord], truths: &[Complex64]) -> f64 {
    records.iter().zip(truths).map(|(r, t)| (r.value - t).norm()).fold(0.0, f64::max)
}

fn cf_pairs(cfg: &ExperimentConfig, square: bool) -> Result<Outputs> {
    let seed = cfg.seed()?;
    let state = cfg.state()?;
    let points = cfg.points()?;
    let backend = cfg.backend_for(&state);
    let (eps, delta) = (cfg.protocol.epsilon, cfg.protocol.delta);
    let n = match cfg.protocol.n_pairs {
        Some(n) => n,
        None => protocols::plan_product_samples(eps, delta, points.len())?,
    };
    let label = if square { "cf-square" } else { "cf-product" };
    let stream = SeedStream::new(seed, label);
    let (values, kind, truths) = if square {
        let sym = protocols::resolve_symmetry(&state, cfg.symmetry().as_ref())?;
        let v = protocols::estimate_square_points(&state, &sym, &points, n, &backend, &stream)?;
        let t = points
            .iter()
            .map(|a| Ok(state.characteristic(a)? * state.characteristic(&sym.reflect(&a.conj()))?))
            .collect::<Result<Vec<_>>>()?;
        (v, protocols::TargetKind::Square, t)
    } else {
        let v = protocols::estimate_product_points(&state, &points, n, &backend, &stream)?;
        let t = points
            .iter()
            .map(|a| Ok(state.characteristic(a)? * state.characteristic(&a.conj())?))
            .collect::<Result<Vec<_>>>()?;
        (v, protocols::TargetKind::Product, t)
    };
    let records: Vec<protocols::EstimateRecord> = points
        .iter()
        .zip(&values)
        .map(|(a, v)| protocols::EstimateRecord {
            alpha: a.clone(),
            value: *v,
            target_kind: kind,
            epsilon: eps,
            delta,
            copies: 2 * n,
            branch: None,
            square: None,
        })
        .collect();
    let prov = Provenance { state_hash: state.hash(), backend: backend.tag().into(), seed };
    let table = results_table(&records, &truths, None, &prov)?;
    let summary = json!({
        "subcommand": label,
        "seed": seed,
        "state_hash": prov.state_hash,
        "backend": backend,
        "epsilon": eps,
        "delta": delta,
        "m": points.len(),
        "pair_rounds": n,
        "copies_quantum": 2 * n,
        "max_abs_err": max_err(&records, &truths),
    });
    Ok(Outputs { table_name: "results.csv", table, summary, passed: true })
}

fn learn(cfg: &ExperimentConfig) -> Result<Outputs> {
    let seed = cfg.seed()?;
    let state = cfg.state()?;
    let points = cfg.points()?;
    let backend = cfg.backend_for(&state);
    let (eps, delta) = (cfg.protocol.epsilon, cfg.protocol.delta);
    let overrides = LearnOverrides { n1_pairs: cfg.protocol.n_pairs, n2_copies: cfg.protocol.n_sign };
    let out = protocols::learn_points_with(
        &state,
        cfg.symmetry().as_ref(),
        &points,
        eps,
        delta,
        &backend,
        &SeedStream::new(seed, "learn-points"),
        overrides,
    )?;
    let truths = points.iter().map(|a| state.characteristic(a)).collect::<Result<Vec<_>>>()?;
    let prov = Provenance { state_hash: state.hash(), backend: backend.tag().into(), seed };
    let table = results_table(&out.records, &truths, Some(&out.ledger), &prov)?;
    let mut branches = std::collections::BTreeMap::new();
    for r in &out.records {
        *branches.entry(r.branch.map_or("none", |b| b.tag())).or_insert(0usize) += 1;
    }
    let summary = json!({
        "subcommand": "learn-points",
        "seed": seed,
        "state_hash": prov.state_hash,
        "backend": backend,
        "epsilon": eps,
        "delta": delta,
        "m": points.len(),
        "plan": out.plan,
        "ledger": out.ledger,
        "copies_quantum": out.ledger.quantum_total(),
        "union_bound_budget": out.union_bound_budget,
        "branches": branches,
        "max_abs_err": max_err(&out.records, &truths),
    });
    Ok(Outputs { table_name: "results.csv", table, summary, passed: true })
}

fn observable(cfg: &ExperimentConfig) -> Result<Outputs> {
    let seed = cfg.seed()?;
    let state = cfg.state()?;
    let oc = cfg.observable.as_ref().ok_or_else(|| Error::Validation("config has no [observable] table".into()))?;
    let target = StateModel::from_spec(oc.target.clone())?;
    let backend = cfg.backend_for(&state);
    let region = PhaseBox { re: oc.re.clone(), im: oc.im.clone() };
    let mut settings = ObservableSettings::new(cfg.protocol.epsilon, cfg.protocol.delta, backend.clone());
    settings.learn_epsilon = oc.learn_epsilon;
    settings.max_points = oc.max_points;
    settings.check_tail = oc.check_tail;
    if let Some(p) = oc.pilot_points {
        settings.pilot_points = p;
    }
    let t = target.clone();
    let obs_cf = move |a: &PhasePoint| t.characteristic(a).unwrap_or(Complex64::new(f64::NAN, f64::NAN));
    let out = protocols::estimate_observable(
        &state,
        cfg.symmetry().as_ref(),
        &obs_cf,
        &region,
        &settings,
        &SeedStream::new(seed, "observable"),
    )?;
    let truth = fock_overlap(&state, &target).ok();
    let prov = Provenance { state_hash: state.hash(), backend: backend.tag().into(), seed };
    let mut buf = Vec::new();
    let truths = truth.map(|t| vec![Complex64::new(t, 0.0)]);
    protocols::write_results_csv(&mut buf, std::slice::from_ref(&out.record), truths.as_deref(), Some(&out.ledger), &prov)?;
    let summary = json!({
        "subcommand": "observable",
        "seed": seed,
        "state_hash": prov.state_hash,
        "target_hash": target.hash(),
        "backend": backend,
        "estimate": [out.record.value.re, out.record.value.im],
        "truth": truth,
        "outcome": out,
    });
    Ok(Outputs { table_name: "results.csv", table: buf, summary, passed: true })
}

/// tr(ρσ) from truncated density matrices.
pub fn fock_overlap(rho: &StateModel, sigma: &StateModel) -> Result<f64> {
    let dim = if rho.modes() == 1 { fock_oracle::DEFAULT_DIM } else { fock_oracle::DEFAULT_JOINT_DIM };
    let a = rho.to_fock(dim, 1e-8)?;
    let b = sigma.to_fock(dim, 1e-8)?;
    Ok(a.expectation(b.matrix())?.re)
}

fn restricted(cfg: &ExperimentConfig) -> Result<Outputs> {
    let seed = cfg.seed()?;
    let state = cfg.state()?;
    let points = cfg.points()?;
    let budget = cfg.restricted.as_ref().ok_or_else(|| Error::Validation("config has no [restricted] table".into()))?.copies;
    let recs = baselines::restricted_estimate(&state, &points, budget, &SeedStream::new(seed, "baseline-restricted"))?;
    let records: Vec<protocols::EstimateRecord> = recs.iter().map(|r| r.record.clone()).collect();
    let truths = points.iter().map(|a| state.characteristic(a)).collect::<Result<Vec<_>>>()?;
    let prov = Provenance { state_hash: state.hash(), backend: "homodyne".into(), seed };
    let table = results_table(&records, &truths, None, &prov)?;
    let summary = json!({
        "subcommand": "baseline-restricted",
        "seed": seed,
        "state_hash": prov.state_hash,
        "m": points.len(),
        "copies": budget,
        "unestimated_points": recs.iter().filter(|r| !r.estimated).count(),
        "max_abs_err": max_err(&records, &truths),
    });
    Ok(Outputs { table_name: "results.csv", table, summary, passed: true })
}

fn lowerbound(cfg: &ExperimentConfig) -> Result<Outputs> {
    let seed = cfg.seed()?;
    let lb = cfg.lowerbound.as_ref().ok_or_else(|| Error::Validation("config has no [lowerbound] table".into()))?;
    let stream = SeedStream::new(seed, "lowerbound-scaling");
    let mut rows = Vec::new();
    let mut families = Vec::new();
    for &m in &lb.ms {
        let fam = baselines::build_lowerbound_family(m, lb.r, lb.alpha_mag)?;
        let backend = cfg.backend.clone().unwrap_or(SamplerBackend::GaussianAnalytic);
        let s = stream.child(m);
        rows.extend(baselines::point_function_experiment(
            &fam,
            Strategy::Restricted,
            &Schedule::Copies(lb.copies.clone()),
            lb.trials,
            &backend,
            &s.child("restricted"),
        )?);
        rows.extend(baselines::point_function_experiment(
            &fam,
            Strategy::QuantumEnhanced,
            &Schedule::Epsilons { epsilons: lb.epsilons.clone(), delta: lb.delta },
            lb.trials,
            &backend,
            &s.child("enhanced"),
        )?);
        families.push(json!({ "m": m, "r": fam.r, "diagonal_min": fam.diagonal().iter().cloned().fold(f64::INFINITY, f64::min), "off_diagonal_max": fam.off_diagonal_max() }));
    }
    let mut table = Vec::new();
    baselines::write_scaling_csv(&mut table, &rows)?;
    let report = baselines::scaling_report(rows);
    let summary = json!({
        "subcommand": "lowerbound-scaling",
        "seed": seed,
        "families": families,
        "thresholds": report.thresholds,
        "restricted_loglog": report.restricted_loglog,
        "enhanced_log": report.enhanced_log,
    });
    Ok(Outputs { table_name: "scaling.csv", table, summary, passed: true })
}

fn oracle_check() -> Result<Outputs> {
    let rows = fock_oracle::oracle_suite(&[fock_oracle::DEFAULT_DIM, fock_oracle::DEFAULT_DIM + 16], 1e-6)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["fixture", "dim", "points", "max_abs_diff", "tolerance", "passed"])?;
    for r in &rows {
        w.write_record([
            r.fixture.clone(),
            r.dim.to_string(),
            r.points.to_string(),
            format!("{:e}", r.max_abs_diff),
            format!("{:e}", r.tolerance),
            r.passed.to_string(),
        ])?;
    }
    let table = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    let failed: Vec<&str> = rows.iter().filter(|r| !r.passed).map(|r| r.fixture.as_str()).collect();
    let summary = json!({
        "subcommand": "oracle-check",
        "comparisons": rows.len(),
        "failed": failed,
        "worst": rows.iter().map(|r| r.max_abs_diff).fold(0.0, f64::max),
    });
    Ok(Outputs { table_name: "oracle.csv", table, summary, passed: failed.is_empty() })
}

/// Machine-readable error body printed on stderr.
pub fn error_json(err: &Error) -> Value {
    json!({ "error": { "kind": err.kind(), "message": err.to_string() } })
}
