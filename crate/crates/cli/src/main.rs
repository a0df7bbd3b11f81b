use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use thiserror::Error;
use vrleak::behavior::PanelLayout;
use vrleak::defense::{apply_bounded_laplace, Bounds};
use vrleak::env::{default_servers, parse_servers_json, PropagationModel, ServerSite};
use vrleak::evaluate::{evaluate, AccuracyTable, EvalError};
use vrleak::inference::{assemble_features, build_identity_index, fit, Label};
use vrleak::model::{
    parse_events_jsonl, parse_trace_csv, write_events_jsonl, write_trace_csv, AttackerTier, AttributeReport,
    DeviceApiSample, LatencySample, SessionBundle,
};
use vrleak::pipeline::{run_attacks, AttackConfig, InferenceModels};
use vrleak::sim::{derive_seed, sample_population, simulate_with_latency, NoiseModel, ScenarioScript, UserProfile};

const PROFILE: &str = "profile.json";
const TRACE: &str = "trace.csv";
const EVENTS: &str = "events.jsonl";
const LATENCY: &str = "latency.json";
const DEVICE_API: &str = "device_api.json";
const MANIFEST: &str = "manifest.json";

#[derive(Parser)]
#[command(name = "vrleak", version, about = "Simulate VR sessions, run attribute attacks, and score them")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a population and write one session directory per user.
    Simulate {
        #[arg(long, default_value_t = 50)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Scenario script JSON; the built-in script otherwise.
        #[arg(long)]
        script: Option<PathBuf>,
        /// Noise model JSON; the calibrated model seeded with --seed otherwise.
        #[arg(long)]
        noise: Option<PathBuf>,
        /// Server list JSON used for latency probes.
        #[arg(long)]
        servers: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every attack the tier permits against one session directory.
    Attack {
        session: PathBuf,
        #[arg(long, default_value = "PrivilegedII")]
        tier: AttackerTier,
        #[arg(long)]
        servers: Option<PathBuf>,
        #[arg(long)]
        layout: Option<PathBuf>,
        /// Fitted models from `vrleak fit`.
        #[arg(long)]
        models: Option<PathBuf>,
        /// Report id; the session directory name otherwise.
        #[arg(long)]
        session_id: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a directory of reports against a simulated population.
    Evaluate {
        population: PathBuf,
        reports: PathBuf,
        /// Output directory for accuracy.json and accuracy.md.
        #[arg(long)]
        out: PathBuf,
    },
    /// Apply the bounded Laplace defense to a session's positions.
    Defend {
        session: PathBuf,
        #[arg(long)]
        epsilon: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Per-axis bounds JSON; x ±3 m, y 0..2.5 m, z ±3 m otherwise.
        #[arg(long)]
        bounds: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit demographic models and the identity index from reports.
    Fit {
        population: PathBuf,
        reports: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{path}: {reason}")]
    Io { path: PathBuf, reason: String },
    #[error("{path}: {reason}")]
    Parse { path: PathBuf, reason: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Mismatch(#[from] EvalError),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Io { .. } | CliError::Parse { .. } => 2,
            CliError::Config(_) | CliError::Mismatch(_) => 3,
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io { path: path.to_path_buf(), reason: e.to_string() }
}

fn parse_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Parse { path: path.to_path_buf(), reason: e.to_string() }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| io_err(path, e))
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| io_err(path, e))
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|e| io_err(path, e))
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    serde_json::from_str(&read(path)?).map_err(|e| parse_err(path, e))
}

/// Config files: unreadable is an I/O failure, anything else is invalid config.
fn read_config<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    serde_json::from_str(&read(path)?).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn load_servers(path: Option<&Path>) -> Result<Vec<ServerSite>, CliError> {
    match path {
        Some(p) => parse_servers_json(&read(p)?).map_err(|e| CliError::Config(format!("{}: {e}", p.display()))),
        None => Ok(default_servers()),
    }
}

#[derive(Serialize, Deserialize)]
struct ManifestEntry {
    user_id: String,
    session_seed: u64,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    n: usize,
    seed: u64,
    noise: NoiseModel,
    servers: Vec<ServerSite>,
    users: Vec<ManifestEntry>,
}

fn simulate(
    n: usize,
    seed: u64,
    script: Option<&Path>,
    noise: Option<&Path>,
    servers: Option<&Path>,
    out: &Path,
) -> Result<u8, CliError> {
    let script = match script {
        Some(p) => ScenarioScript::from_json(&read(p)?).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?,
        None => ScenarioScript::default_script(),
    };
    let noise: NoiseModel = match noise {
        Some(p) => read_config(p)?,
        None => NoiseModel::calibrated(seed),
    };
    noise.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let servers = load_servers(servers)?;
    let propagation = PropagationModel::default();
    create_dir(out)?;

    let users = sample_population(n, seed);
    let entries: Vec<ManifestEntry> = users
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let session_seed = derive_seed(seed, i as u64);
            let bundle = simulate_with_latency(p, &script, &noise, &servers, &propagation, session_seed)
                .map_err(|e| CliError::Config(format!("{}: {e}", p.user_id)))?;
            write_session(&out.join(&p.user_id), Some(p), &bundle)?;
            Ok(ManifestEntry { user_id: p.user_id.clone(), session_seed })
        })
        .collect::<Result<_, CliError>>()?;
    let manifest = Manifest { n, seed, noise, servers, users: entries };
    write(&out.join(MANIFEST), to_json(&manifest))?;
    Ok(0)
}

fn write_session(dir: &Path, profile: Option<&UserProfile>, bundle: &SessionBundle) -> Result<(), CliError> {
    create_dir(dir)?;
    if let Some(p) = profile {
        write(&dir.join(PROFILE), to_json(p))?;
    }
    write(&dir.join(TRACE), write_trace_csv(bundle.trace()))?;
    write(&dir.join(EVENTS), write_events_jsonl(bundle.events()))?;
    write(&dir.join(LATENCY), to_json(&bundle.latency()))?;
    if let Some(api) = bundle.device_api() {
        write(&dir.join(DEVICE_API), to_json(api))?;
    }
    Ok(())
}

/// Reads a session directory as the full client view; latency and device
/// API files are optional.
fn load_session(dir: &Path) -> Result<SessionBundle, CliError> {
    let trace_path = dir.join(TRACE);
    let file = fs::File::open(&trace_path).map_err(|e| io_err(&trace_path, e))?;
    let trace = parse_trace_csv(file).map_err(|e| parse_err(&trace_path, e))?;
    let events_path = dir.join(EVENTS);
    let events = parse_events_jsonl(&read(&events_path)?).map_err(|e| parse_err(&events_path, e))?;
    let api_path = dir.join(DEVICE_API);
    let device_api: Option<DeviceApiSample> = if api_path.exists() { Some(read_json(&api_path)?) } else { None };
    let latency_path = dir.join(LATENCY);
    let latency: Vec<LatencySample> = if latency_path.exists() { read_json(&latency_path)? } else { Vec::new() };
    SessionBundle::new(trace, events, device_api, latency, AttackerTier::PrivilegedII)
        .map_err(|e| parse_err(dir, e))
}

fn dir_name(dir: &Path) -> String {
    dir.canonicalize()
        .ok()
        .and_then(|p| p.file_name().map(|s| s.to_string_lossy().into_owned()))
        .unwrap_or_else(|| dir.display().to_string())
}

#[allow(clippy::too_many_arguments)]
fn attack(
    session: &Path,
    tier: AttackerTier,
    servers: Option<&Path>,
    layout: Option<&Path>,
    models: Option<&Path>,
    session_id: Option<String>,
    out: &Path,
) -> Result<u8, CliError> {
    let mut cfg = AttackConfig { servers: load_servers(servers)?, ..AttackConfig::default() };
    if let Some(p) = layout {
        cfg.layout = PanelLayout::from_json(&read(p)?).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
    }
    if let Some(p) = models {
        cfg.models = read_config::<InferenceModels>(p)?;
    }
    let bundle = load_session(session)?.masked_for(tier);
    let id = session_id.unwrap_or_else(|| dir_name(session));
    let outcome = run_attacks(&bundle, &id, &cfg);
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    write(out, outcome.report.to_json_pretty() + "\n")?;
    let denied = outcome.report.failures.values().any(|r| r.starts_with("CapabilityDenied"));
    Ok(if denied { 4 } else { 0 })
}

/// Session subdirectories of a population directory, sorted by name.
fn session_dirs(population: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut dirs: Vec<PathBuf> = fs::read_dir(population)
        .map_err(|e| io_err(population, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(PROFILE).is_file())
        .collect();
    dirs.sort();
    Ok(dirs)
}

fn load_profiles(population: &Path) -> Result<Vec<(PathBuf, UserProfile)>, CliError> {
    session_dirs(population)?
        .into_iter()
        .map(|d| {
            let p = read_json(&d.join(PROFILE))?;
            Ok((d, p))
        })
        .collect()
}

fn load_reports(dir: &Path) -> Result<Vec<AttributeReport>, CliError> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| io_err(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    let mut reports: Vec<AttributeReport> = paths.iter().map(|p| read_json(p)).collect::<Result<_, _>>()?;
    reports.sort_by(|a, b| a.session_id.cmp(&b.session_id));
    Ok(reports)
}

fn cmd_evaluate(population: &Path, reports: &Path, out: &Path) -> Result<u8, CliError> {
    let profiles: Vec<UserProfile> = load_profiles(population)?.into_iter().map(|(_, p)| p).collect();
    let reports = load_reports(reports)?;
    let table: AccuracyTable = evaluate(&profiles, &reports)?;
    create_dir(out)?;
    write(&out.join("accuracy.json"), to_json(&table))?;
    write(&out.join("accuracy.md"), table.to_markdown())?;
    print!("{}", table.to_markdown());
    Ok(0)
}

fn defend(session: &Path, epsilon: f64, seed: u64, bounds: Option<&Path>, out: &Path) -> Result<u8, CliError> {
    let bounds: Bounds = match bounds {
        Some(p) => read_config(p)?,
        None => Bounds::default(),
    };
    let bundle = load_session(session)?;
    let trace = apply_bounded_laplace(bundle.trace(), epsilon, &bounds, seed).map_err(|e| CliError::Config(e.to_string()))?;
    let defended = SessionBundle::new(
        trace,
        bundle.events().to_vec(),
        bundle.device_api().cloned(),
        bundle.latency().to_vec(),
        bundle.attacker_tier(),
    )
    .map_err(|e| CliError::Config(e.to_string()))?;
    let profile_path = session.join(PROFILE);
    let profile: Option<UserProfile> = if profile_path.exists() { Some(read_json(&profile_path)?) } else { None };
    write_session(out, profile.as_ref(), &defended)?;
    Ok(0)
}

fn cmd_fit(population: &Path, reports: &Path, out: &Path) -> Result<u8, CliError> {
    let profiles = load_profiles(population)?;
    let reports = load_reports(reports)?;
    let mut rows = Vec::new();
    for (dir, p) in &profiles {
        let r = reports
            .iter()
            .find(|r| r.session_id == p.user_id)
            .ok_or_else(|| CliError::Config(format!("no report for {}", p.user_id)))?;
        let trace_path = dir.join(TRACE);
        let file = fs::File::open(&trace_path).map_err(|e| io_err(&trace_path, e))?;
        let duration = parse_trace_csv(file).map_err(|e| parse_err(&trace_path, e))?.duration();
        rows.push((p, assemble_features(r, Some(duration))));
    }
    let labelled = |label: fn(&UserProfile) -> Label| -> Vec<_> { rows.iter().map(|(p, f)| (f.clone(), label(p))).collect() };
    let fit_one = |attr: &str, data: Vec<_>| fit(attr, &data).map_err(|e| CliError::Config(format!("{attr}: {e}")));
    let enrolled: Vec<_> = rows.iter().map(|(p, f)| (p.user_id.clone(), f.clone())).collect();
    let models = InferenceModels {
        gender: Some(fit_one("gender", labelled(|p| Label::Class(p.gender.name().into())))?),
        age: Some(fit_one("age", labelled(|p| Label::Number(p.age_years as f64)))?),
        ethnicity: Some(fit_one("ethnicity", labelled(|p| Label::Class(p.ethnicity.name().into())))?),
        disability: Some(fit_one("disability", labelled(|p| Label::Class(p.disability.name().into())))?),
        identity: Some(build_identity_index(&enrolled).map_err(|e| CliError::Config(format!("identity: {e}")))?),
    };
    write(out, to_json(&models))?;
    Ok(0)
}

fn run(cli: Cli) -> Result<u8, CliError> {
    match cli.command {
        Command::Simulate { n, seed, script, noise, servers, out } => {
            simulate(n, seed, script.as_deref(), noise.as_deref(), servers.as_deref(), &out)
        }
        Command::Attack { session, tier, servers, layout, models, session_id, out } => {
            attack(&session, tier, servers.as_deref(), layout.as_deref(), models.as_deref(), session_id, &out)
        }
        Command::Evaluate { population, reports, out } => cmd_evaluate(&population, &reports, &out),
        Command::Defend { session, epsilon, seed, bounds, out } => defend(&session, epsilon, seed, bounds.as_deref(), &out),
        Command::Fit { population, reports, out } => cmd_fit(&population, &reports, &out),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
