//! Command-line front end.
//!
//! Every subcommand reads one JSON [`RunConfig`] and writes its results into
//! an output directory: tables as CSV, summaries as JSON. Files are written
//! to a temporary name and renamed, so a failed run never leaves a partial
//! file behind.

use std::fs;
use std::path::{Path, PathBuf};

use clap::Parser;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::analysis::{classify, identify, robustness, IdentifyOptions, IdentifyState, DEFAULT_TIE_TOL};
use crate::metrics::{distance, PhaseSignal, PrcSpace};
use crate::models::{
    goodwin_model, morris_lecar_model, radial_clock_model, GoodwinParams, MlParam, Model, MorrisLecar,
    MorrisLecarParams, RadialClockParams,
};
use crate::orbit::{find_orbit, OrbitOptions, PeriodicOrbit};
use crate::prc::{adjoint_prc, direct_prc, DirectOptions, Stimulus};
use crate::sensitivity::{sensitivity_bundle, Scaling};
use crate::Error;

/// Value of the top-level `schema` field accepted by this version.
pub const SCHEMA: &str = "prclab/1";

pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelConfig {
    Goodwin(GoodwinParams),
    RadialClock(RadialClockParams),
    MorrisLecar(MorrisLecarConfig),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MorrisLecarConfig {
    #[serde(default)]
    pub constants: MorrisLecarParams,
    /// Constants exposed as parameters, in order.
    #[serde(default = "default_ml_free")]
    pub free: Vec<MlParam>,
}

fn default_ml_free() -> Vec<MlParam> {
    vec![MlParam::IApp, MlParam::GCa]
}

impl ModelConfig {
    pub fn build(&self) -> crate::Result<Box<dyn Model>> {
        Ok(match self {
            ModelConfig::Goodwin(p) => Box::new(goodwin_model(*p)?),
            ModelConfig::RadialClock(p) => Box::new(radial_clock_model(*p)?),
            ModelConfig::MorrisLecar(c) => {
                if c.free == default_ml_free() {
                    Box::new(morris_lecar_model(c.constants)?)
                } else {
                    Box::new(MorrisLecar::with_free(c.constants, c.free.clone())?)
                }
            }
        })
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema: String,
    #[serde(default)]
    pub model: Option<ModelConfig>,
    /// Replaces the model's nominal parameter vector.
    #[serde(default)]
    pub lambda: Option<Vec<f64>>,
    #[serde(default)]
    pub orbit: OrbitOptions,
    #[serde(default = "default_space")]
    pub space: PrcSpace,
    #[serde(default)]
    pub scaling: Scaling,
    /// Seeds the random starting points of `identify`.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub prc: PrcConfig,
    #[serde(default)]
    pub robustness: RobustnessConfig,
    #[serde(default)]
    pub identify: Option<IdentifyConfig>,
    #[serde(default)]
    pub classify: ClassifyConfig,
    #[serde(default)]
    pub dist: Option<DistConfig>,
}

fn default_space() -> PrcSpace {
    PrcSpace::D
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrcConfig {
    #[serde(default)]
    pub direct: Option<DirectConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirectConfig {
    /// Impulse weights; one `delta_theta` column each.
    pub amplitudes: Vec<f64>,
    #[serde(default)]
    pub options: DirectOptions,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobustnessConfig {
    #[serde(default)]
    pub groups: Option<Vec<String>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Target {
    /// Reference PRC of the same model at these parameters.
    Lambda(Vec<f64>),
    PrcFile(PathBuf),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentifyConfig {
    pub target: Target,
    #[serde(default)]
    pub starts: Vec<Vec<f64>>,
    /// Extra starts `λ_j(1 + spread·U(−1, 1))` around the nominal vector.
    #[serde(default)]
    pub random_starts: usize,
    #[serde(default = "default_spread")]
    pub spread: f64,
    #[serde(default)]
    pub options: IdentifyOptions,
}

fn default_spread() -> f64 {
    0.2
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifyConfig {
    /// PRC to classify; the model's adjoint PRC when absent.
    #[serde(default)]
    pub prc_file: Option<PathBuf>,
    #[serde(default = "default_tie")]
    pub tie_tol: f64,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        Self { prc_file: None, tie_tol: DEFAULT_TIE_TOL }
    }
}

fn default_tie() -> f64 {
    DEFAULT_TIE_TOL
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistConfig {
    pub files: [PathBuf; 2],
    #[serde(default = "all_spaces")]
    pub spaces: Vec<PrcSpace>,
}

fn all_spaces() -> Vec<PrcSpace> {
    PrcSpace::ALL.to_vec()
}

/// Failure of a run, with the exit code it maps to.
#[derive(Debug)]
pub enum CliError {
    Usage { message: String, path: Option<String> },
    Numerical(Error),
    Io(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidArgument(_) | Error::InvalidParameter(_) => {
                CliError::Usage { message: e.to_string(), path: None }
            }
            e => CliError::Numerical(e),
        }
    }
}

fn usage(message: impl Into<String>) -> CliError {
    CliError::Usage { message: message.into(), path: None }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage { .. } | CliError::Io(_) => EXIT_USAGE,
            CliError::Numerical(_) => EXIT_NUMERICAL,
        }
    }

    /// Machine-readable diagnostic printed on stderr.
    pub fn to_json(&self) -> serde_json::Value {
        match self {
            CliError::Usage { message, path } => json!({ "error": "config", "message": message, "path": path }),
            CliError::Io(message) => json!({ "error": "io", "message": message }),
            CliError::Numerical(e) => json!({ "error": error_kind(e), "message": e.to_string() }),
        }
    }
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::InvalidParameter(_) => "invalid_parameter",
        Error::InvalidArgument(_) => "invalid_argument",
        Error::StepSizeUnderflow { .. } => "step_size_underflow",
        Error::NonFinite { .. } => "non_finite",
        Error::TooManySteps(_) => "too_many_steps",
        Error::NoCycle(_) => "no_cycle",
        Error::NewtonFailed { .. } => "newton_failed",
        Error::Singular(_) => "singular",
        Error::GridMismatch(_) => "grid_mismatch",
        Error::NotConverged(_) => "not_converged",
        Error::ZeroSignal(_) => "zero_signal",
        Error::Undefined(_) => "undefined",
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parses a configuration, reporting the JSON path of the offending key.
pub fn parse_config(text: &str) -> CliResult<RunConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        CliError::Usage { message: e.inner().to_string(), path: Some(path) }
    })?;
    if cfg.schema != SCHEMA {
        return Err(CliError::Usage {
            message: format!("unsupported schema {:?}, expected {SCHEMA:?}", cfg.schema),
            path: Some("schema".into()),
        });
    }
    Ok(cfg)
}

/// Worker count from `PRCLAB_THREADS`, if set.
pub fn thread_limit() -> CliResult<Option<usize>> {
    match std::env::var("PRCLAB_THREADS") {
        Err(_) => Ok(None),
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(usage(format!("PRCLAB_THREADS must be a positive integer, got {s:?}"))),
        },
    }
}

/// Entry point of the binary; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = thread_limit().and_then(|threads| {
        if let Some(n) = threads {
            // Fails only if the pool already exists, e.g. on a second call
            // within one process.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
        run(cli.command, &cli.config, &cli.out)
    });
    match result {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            0
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.exit_code()
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "prclab", version, about = "Periodic orbits, phase response curves and their sensitivities")]
struct Cli {
    #[arg(value_enum)]
    command: Sub,
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

/// Subcommands of `prclab`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Sub {
    /// Periodic orbit: orbit.csv and orbit.json.
    Orbit,
    /// Infinitesimal PRC, optionally with direct finite PRCs: prc.csv and prc.json.
    Prc,
    /// Sensitivities of ω, T and q: sens.csv and sens.json.
    Sens,
    /// Robustness measures and rankings: robustness.csv and robustness.json.
    Robustness,
    /// Gradient-descent identification: trace.csv and identify.json.
    Identify,
    /// Distance to the canonical PRCs: classify.json.
    Classify,
    /// Distances between two PRC files: dist.json.
    Dist,
}

/// Runs one subcommand and returns the files written.
pub fn run(sub: Sub, config: &Path, out: &Path) -> CliResult<Vec<PathBuf>> {
    let text = fs::read_to_string(config).map_err(|e| usage(format!("cannot read {}: {e}", config.display())))?;
    let cfg = parse_config(&text)?;
    let base = config.parent().map(Path::to_path_buf).unwrap_or_default();
    fs::create_dir_all(out).map_err(|e| CliError::Io(format!("cannot create {}: {e}", out.display())))?;
    let outputs = match sub {
        Sub::Orbit => cmd_orbit(&cfg)?,
        Sub::Prc => cmd_prc(&cfg)?,
        Sub::Sens => cmd_sens(&cfg)?,
        Sub::Robustness => cmd_robustness(&cfg)?,
        Sub::Identify => cmd_identify(&cfg, &base)?,
        Sub::Classify => cmd_classify(&cfg, &base)?,
        Sub::Dist => cmd_dist(&cfg, &base)?,
    };
    let mut written = vec![];
    for (name, bytes) in outputs {
        let path = out.join(name);
        write_atomic(&path, &bytes)?;
        written.push(path);
    }
    Ok(written)
}

type Outputs = Vec<(&'static str, Vec<u8>)>;

fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    use std::io::Write;
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let io = |e: std::io::Error| CliError::Io(format!("cannot write {}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

/// Seventeen significant digits, enough to round-trip any `f64`.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_bytes(header: &[String], rows: &[Vec<String>]) -> CliResult<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(vec![]);
    let err = |e: csv::Error| CliError::Io(e.to_string());
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(r).map_err(err)?;
    }
    w.into_inner().map_err(|e| CliError::Io(e.to_string()))
}

fn json_bytes(v: &impl Serialize) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("output values serialize");
    s.push('\n');
    s.into_bytes()
}

fn model_and_lambda(cfg: &RunConfig) -> CliResult<(Box<dyn Model>, Vec<f64>)> {
    let m = cfg.model.as_ref().ok_or_else(|| CliError::Usage {
        message: "this subcommand needs a model".into(),
        path: Some("model".into()),
    })?;
    let model = m.build()?;
    let lambda = match &cfg.lambda {
        Some(l) if l.len() != model.n_params() => {
            return Err(CliError::Usage {
                message: format!("model has {} parameters, lambda has {}", model.n_params(), l.len()),
                path: Some("lambda".into()),
            })
        }
        Some(l) => l.clone(),
        None => model.params(),
    };
    Ok((model, lambda))
}

fn solve(cfg: &RunConfig) -> CliResult<(Box<dyn Model>, PeriodicOrbit)> {
    let (model, lambda) = model_and_lambda(cfg)?;
    let orbit = find_orbit(&*model, &lambda, &cfg.orbit)?;
    Ok((model, orbit))
}

fn orbit_header(model: &dyn Model, orbit: &PeriodicOrbit) -> serde_json::Value {
    json!({
        "model": model.name(),
        "param_names": model.param_names(),
        "lambda": orbit.lambda(),
        "omega": orbit.omega(),
        "period": orbit.period(),
        "residual": orbit.residual_norm(),
        "scheme": orbit.scheme(),
        "segments": orbit.segments(),
    })
}

pub fn cmd_orbit(cfg: &RunConfig) -> CliResult<Outputs> {
    let (model, orbit) = solve(cfg)?;
    let mut header = vec!["theta".to_string()];
    header.extend((1..=orbit.dim()).map(|k| format!("x_{k}")));
    let rows: Vec<Vec<String>> = orbit
        .partition()
        .phases()
        .iter()
        .zip(orbit.points())
        .map(|(t, x)| std::iter::once(num(*t)).chain(x.iter().map(|v| num(*v))).collect())
        .collect();
    Ok(vec![("orbit.csv", csv_bytes(&header, &rows)?), ("orbit.json", json_bytes(&orbit_header(&*model, &orbit)))])
}

pub fn cmd_prc(cfg: &RunConfig) -> CliResult<Outputs> {
    let (model, orbit) = solve(cfg)?;
    let (gradient, q) = adjoint_prc(&*model, &orbit)?;
    let phases: Vec<f64> = (0..q.len()).map(|j| q.phase(j)).collect();
    let mut header = vec!["theta".to_string(), "q".to_string()];
    let mut columns = vec![phases.clone(), q.values().to_vec()];
    let mut agreement = vec![];
    if let Some(direct) = &cfg.prc.direct {
        let qmax = q.sup_norm();
        for &a in &direct.amplitudes {
            let prc = direct_prc(&*model, &orbit, &Stimulus::Impulse { amplitude: a }, &phases, &direct.options)?;
            // Relative deviation of the finite PRC per unit amplitude from q.
            let err = if a == 0.0 || qmax == 0.0 {
                None
            } else {
                Some(prc.shifts.iter().zip(q.values()).fold(0.0_f64, |m, (s, v)| m.max((s / a - v).abs())) / qmax)
            };
            agreement.push(json!({ "amplitude": a, "relative_sup_error": err, "epsilon": prc.epsilon }));
            header.push(format!("delta_theta_{}", num(a)));
            columns.push(prc.shifts);
        }
    }
    let rows: Vec<Vec<String>> = (0..q.len()).map(|i| columns.iter().map(|c| num(c[i])).collect()).collect();
    let mut summary = orbit_header(&*model, &orbit);
    summary["xi"] = json!(gradient.xi());
    summary["normalization_error"] = json!(gradient.normalization_error(&*model, &orbit));
    summary["direct"] = json!(agreement);
    Ok(vec![("prc.csv", csv_bytes(&header, &rows)?), ("prc.json", json_bytes(&summary))])
}

pub fn cmd_sens(cfg: &RunConfig) -> CliResult<Outputs> {
    let (model, orbit) = solve(cfg)?;
    let mut bundle = sensitivity_bundle(&*model, &orbit)?;
    if cfg.scaling == Scaling::Relative {
        bundle = bundle.relative();
    }
    let mut header = vec!["theta".to_string(), "q".to_string()];
    header.extend(bundle.param_names.iter().map(|n| format!("s_q_{n}")));
    let s_q = bundle.s_q();
    let rows: Vec<Vec<String>> = (0..bundle.q.len())
        .map(|i| {
            let mut r = vec![num(bundle.q.phase(i)), num(bundle.q.values()[i])];
            r.extend(s_q.iter().map(|s| num(s.values()[i])));
            r
        })
        .collect();
    let mut summary = orbit_header(&*model, &orbit);
    summary["scaling"] = json!(bundle.scaling);
    summary["s_omega"] = json!(bundle.s_omega());
    summary["s_period"] = json!(bundle.s_period());
    summary["s_xi"] = json!(bundle.prc.iter().map(|p| p.s_xi).collect::<Vec<_>>());
    Ok(vec![("sens.csv", csv_bytes(&header, &rows)?), ("sens.json", json_bytes(&summary))])
}

pub fn cmd_robustness(cfg: &RunConfig) -> CliResult<Outputs> {
    let (model, orbit) = solve(cfg)?;
    let bundle = sensitivity_bundle(&*model, &orbit)?;
    let mut report = robustness(&bundle, cfg.space, cfg.scaling)?;
    if let Some(g) = &cfg.robustness.groups {
        report = report.with_groups(g.clone())?;
    }
    let header: Vec<String> =
        ["param", "group", "r_omega", "r_q", "rho_omega", "rho_q"].iter().map(|s| s.to_string()).collect();
    let rows: Vec<Vec<String>> = (0..report.labels.len())
        .map(|j| {
            vec![
                report.labels[j].clone(),
                report.groups.as_ref().map(|g| g[j].clone()).unwrap_or_default(),
                num(report.r_omega[j]),
                num(report.r_q[j]),
                num(report.rho_omega[j]),
                num(report.rho_q[j]),
            ]
        })
        .collect();
    let names = |idx: Vec<usize>| idx.into_iter().map(|j| report.labels[j].clone()).collect::<Vec<_>>();
    let summary = json!({
        "report": report,
        "ranking_q": names(report.ranking_q()),
        "ranking_omega": names(report.ranking_omega()),
    });
    Ok(vec![("robustness.csv", csv_bytes(&header, &rows)?), ("robustness.json", json_bytes(&summary))])
}

fn read_prc(path: &Path) -> CliResult<PhaseSignal> {
    let io = |e: csv::Error| usage(format!("cannot read {}: {e}", path.display()));
    let mut r = csv::Reader::from_path(path).map_err(io)?;
    let headers = r.headers().map_err(io)?.clone();
    let col = match headers.iter().position(|h| h.trim() == "q") {
        Some(c) => c,
        None if headers.len() >= 2 => 1,
        None => return Err(usage(format!("{}: expected a q column", path.display()))),
    };
    let mut values = vec![];
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(io)?;
        let field = rec.get(col).unwrap_or("");
        let v = field
            .trim()
            .parse::<f64>()
            .map_err(|_| usage(format!("{}: row {}: {field:?} is not a number", path.display(), line + 2)))?;
        values.push(v);
    }
    Ok(PhaseSignal::new(values)?)
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

pub fn cmd_identify(cfg: &RunConfig, base: &Path) -> CliResult<Outputs> {
    let id = cfg.identify.as_ref().ok_or_else(|| CliError::Usage {
        message: "identify needs an \"identify\" section".into(),
        path: Some("identify".into()),
    })?;
    let (model, nominal) = model_and_lambda(cfg)?;
    let q_ref = match &id.target {
        Target::Lambda(l) => adjoint_prc(&*model, &find_orbit(&*model, l, &id.options.orbit)?)?.1,
        Target::PrcFile(p) => read_prc(&resolve(base, p))?,
    };
    let mut starts = id.starts.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for _ in 0..id.random_starts {
        starts.push(nominal.iter().map(|v| v * (1.0 + id.spread * rng.random_range(-1.0..=1.0))).collect());
    }
    if starts.is_empty() {
        starts.push(nominal.clone());
    }
    let runs: Vec<IdentifyState> =
        starts.iter().map(|s| identify(&*model, &q_ref, s, cfg.space, &id.options)).collect::<crate::Result<_>>()?;

    let names = model.param_names();
    let mut header: Vec<String> =
        ["start", "iteration", "cost", "grad_norm", "step"].iter().map(|s| s.to_string()).collect();
    header.extend(names.iter().cloned());
    let mut rows = vec![];
    for (k, run) in runs.iter().enumerate() {
        for (i, t) in run.trace.iter().enumerate() {
            let mut r = vec![k.to_string(), i.to_string(), num(t.cost), num(t.grad_norm), num(t.step)];
            r.extend(t.lambda.iter().map(|v| num(*v)));
            rows.push(r);
        }
    }
    let best = (0..runs.len()).min_by(|&a, &b| runs[a].cost.total_cmp(&runs[b].cost)).expect("at least one start");
    let summary = json!({
        "space": cfg.space,
        "param_names": names,
        "best": best,
        "runs": runs.iter().zip(&starts).map(|(r, s)| json!({
            "start": s,
            "lambda": r.lambda,
            "cost": r.cost,
            "distance": (2.0 * r.cost).sqrt(),
            "iterations": r.iterations,
            "stop": r.stop,
        })).collect::<Vec<_>>(),
    });
    Ok(vec![("trace.csv", csv_bytes(&header, &rows)?), ("identify.json", json_bytes(&summary))])
}

pub fn cmd_classify(cfg: &RunConfig, base: &Path) -> CliResult<Outputs> {
    let q = match &cfg.classify.prc_file {
        Some(p) => read_prc(&resolve(base, p))?,
        None => {
            let (model, orbit) = solve(cfg)?;
            adjoint_prc(&*model, &orbit)?.1
        }
    };
    let c = classify(&q, cfg.space, cfg.classify.tie_tol)?;
    let summary = json!({ "space": cfg.space, "label": c.label, "d_one": c.d_one, "d_two": c.d_two });
    Ok(vec![("classify.json", json_bytes(&summary))])
}

pub fn cmd_dist(cfg: &RunConfig, base: &Path) -> CliResult<Outputs> {
    let d = cfg.dist.as_ref().ok_or_else(|| CliError::Usage {
        message: "dist needs a \"dist\" section".into(),
        path: Some("dist".into()),
    })?;
    let a = read_prc(&resolve(base, &d.files[0]))?;
    let b = read_prc(&resolve(base, &d.files[1]))?;
    let mut out = vec![];
    for &s in &d.spaces {
        out.push(json!({ "space": s, "distance": distance(s, &a, &b)? }));
    }
    Ok(vec![("dist.json", json_bytes(&json!({ "files": d.files, "distances": out })))])
}
