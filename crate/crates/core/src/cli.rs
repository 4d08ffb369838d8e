//! Command-line surface. Exit codes: 0 success, 1 runtime failure, 2 usage
//! or configuration error.

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::analysis::{emit_report, LlmJudge, MoralJudge, ReportOptions};
use crate::cognition::{PolicyBackend, ScriptedPolicy};
use crate::config::{apply_variant, SimulationConfig, Variant};
use crate::engine::{run_dir, EngineError, RunArchive, Simulation};
use crate::llm::{GatewaySettings, HttpChatClient, LlmPolicy};
use crate::minigames::{write_results, ScenarioSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

const JUDGE_TRANSCRIPT: &str = "judge_transcript.jsonl";

#[derive(Parser, Debug)]
#[command(name = "forager", version, about = "Hunter-gatherer moral-evolution simulation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Scripted,
    Llm,
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BackendKind::Scripted => "scripted",
            BackendKind::Llm => "llm",
        })
    }
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Start a new run in a fresh directory under --out-dir.
    Run {
        /// JSON configuration; the built-in baseline when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// baseline, scarce_resource, high_social_cost, moral_invisible or single_type(<type>).
        #[arg(long, default_value = "baseline")]
        variant: String,
        #[arg(long, value_enum, default_value_t = BackendKind::Scripted)]
        backend: BackendKind,
        /// Overrides the configured seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the configured number of steps.
        #[arg(long)]
        max_steps: Option<u32>,
        #[arg(long, default_value = "runs")]
        out_dir: PathBuf,
        /// Do not echo progress lines.
        #[arg(long)]
        quiet: bool,
    },
    /// Continue a run from one of its checkpoints.
    Resume {
        #[arg(long)]
        run_dir: PathBuf,
        /// Latest checkpoint when omitted.
        #[arg(long)]
        checkpoint_step: Option<u32>,
        #[arg(long)]
        quiet: bool,
    },
    /// Write the report bundle for a finished run.
    Analyze {
        #[arg(long)]
        run_dir: PathBuf,
        /// Defaults to <run-dir>/report.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Also judge every agent's moral type with a chat model.
        #[arg(long)]
        with_judge: bool,
        /// JSON judge settings, required with --with-judge.
        #[arg(long)]
        judge_config: Option<PathBuf>,
    },
    /// Run a mini-game sweep.
    Minigame {
        /// JSON scenario document.
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = BackendKind::Scripted)]
        backend: BackendKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

/// Written to `run_meta.json` in every run directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub config_path: Option<PathBuf>,
    pub variant: String,
    pub backend: BackendKind,
    pub seed: u64,
    pub output_dir: PathBuf,
}

/// Settings for the moral-type judge.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JudgeConfig {
    pub provider_url: String,
    pub model_id: String,
    #[serde(default = "default_key_env")]
    pub api_key_env: String,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_timeout")]
    pub timeout: f64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_trials")]
    pub trials: u32,
}

fn default_key_env() -> String {
    "OPENAI_API_KEY".into()
}

fn default_temperature() -> f64 {
    1.0
}

fn default_timeout() -> f64 {
    60.0
}

fn default_retries() -> u32 {
    3
}

fn default_trials() -> u32 {
    3
}

/// An error with the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn usage(message: impl fmt::Display) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.to_string(),
        }
    }

    fn runtime(message: impl fmt::Display) -> Self {
        Self {
            code: EXIT_RUNTIME,
            message: message.to_string(),
        }
    }
}

impl From<EngineError> for Failure {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::Config(_) | EngineError::MissingCheckpoint(_) => Failure::usage(e),
            _ => Failure::runtime(e),
        }
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

pub fn execute(command: Command) -> Result<(), Failure> {
    match command {
        Command::Run {
            config,
            variant,
            backend,
            seed,
            max_steps,
            out_dir,
            quiet,
        } => cmd_run(config.as_deref(), &variant, backend, seed, max_steps, &out_dir, quiet).map(|_| ()),
        Command::Resume {
            run_dir,
            checkpoint_step,
            quiet,
        } => cmd_resume(&run_dir, checkpoint_step, quiet),
        Command::Analyze {
            run_dir,
            out_dir,
            with_judge,
            judge_config,
        } => cmd_analyze(&run_dir, out_dir.as_deref(), with_judge, judge_config.as_deref()),
        Command::Minigame {
            scenario,
            config,
            backend,
            seed,
            out_dir,
        } => cmd_minigame(&scenario, config.as_deref(), backend, seed, &out_dir),
    }
}

fn load_config(path: Option<&Path>) -> Result<SimulationConfig, Failure> {
    let config = match path {
        Some(p) => SimulationConfig::from_path(p).map_err(Failure::usage)?,
        None => SimulationConfig::baseline(),
    };
    config.validate().map_err(Failure::usage)?;
    Ok(config)
}

/// Builds the policy; the LLM backend fails fast without an API key.
pub fn make_policy(backend: BackendKind, config: &SimulationConfig) -> Result<Box<dyn PolicyBackend>, Failure> {
    match backend {
        BackendKind::Scripted => Ok(Box::new(ScriptedPolicy::new(config))),
        BackendKind::Llm => {
            let env = &config.llm.api_key_env;
            let key = HttpChatClient::key_from_env(env)
                .ok_or_else(|| Failure::usage(format!("the llm backend needs an API key in ${env}")))?;
            let client = HttpChatClient::new(&config.llm.provider_url, Some(key), config.llm.timeout);
            Ok(Box::new(LlmPolicy::new(client, config)))
        }
    }
}

fn run_id(seed: u64) -> String {
    format!("{}_seed{seed}", chrono::Local::now().format("%Y%m%dT%H%M%S%.3f"))
}

/// Creates a directory that did not exist before, adding a suffix on clashes.
fn fresh_dir(parent: &Path, id: &str) -> Result<(String, PathBuf), Failure> {
    fs::create_dir_all(parent).map_err(|e| Failure::usage(format!("{}: {e}", parent.display())))?;
    for n in 0..1000 {
        let name = if n == 0 { id.to_string() } else { format!("{id}_{n}") };
        let path = parent.join(&name);
        match fs::create_dir(&path) {
            Ok(()) => return Ok((name, path)),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(Failure::usage(format!("{}: {e}", path.display()))),
        }
    }
    Err(Failure::runtime("could not create a unique run directory"))
}

fn finish(archive: &RunArchive) {
    println!(
        "run finished at step {} ({}), {} living of {}",
        archive.final_state.step,
        archive.termination.as_str(),
        archive.final_state.living_count(),
        archive.final_state.agents.len()
    );
}

/// Returns the run directory.
pub fn cmd_run(
    config_path: Option<&Path>,
    variant: &str,
    backend: BackendKind,
    seed: Option<u64>,
    max_steps: Option<u32>,
    out_dir: &Path,
    quiet: bool,
) -> Result<PathBuf, Failure> {
    let variant = Variant::from_str(variant).map_err(Failure::usage)?;
    let mut config = apply_variant(&load_config(config_path)?, variant);
    if let Some(s) = seed {
        config.rng_seed = s;
    }
    if let Some(m) = max_steps {
        config.max_time_steps = m;
    }
    config.validate().map_err(Failure::usage)?;
    let policy = make_policy(backend, &config)?;
    let (run_id, dir) = fresh_dir(out_dir, &run_id(config.rng_seed))?;
    let manifest = RunManifest {
        run_id,
        config_path: config_path.map(Path::to_path_buf),
        variant: variant.to_string(),
        backend,
        seed: config.rng_seed,
        output_dir: dir.clone(),
    };
    let meta = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(dir.join(run_dir::META_FILE), meta).map_err(Failure::runtime)?;
    println!("run directory: {}", dir.display());
    let archive = Simulation::create_in(config, policy, &dir)?.echo_progress(!quiet).run()?;
    finish(&archive);
    Ok(dir)
}

fn read_manifest(dir: &Path) -> Result<RunManifest, Failure> {
    let path = dir.join(run_dir::META_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

pub fn cmd_resume(dir: &Path, checkpoint_step: Option<u32>, quiet: bool) -> Result<(), Failure> {
    let manifest = read_manifest(dir)?;
    let config = run_dir::read_config(dir)?;
    if let Some(step) = checkpoint_step {
        if !run_dir::checkpoint_path(dir, step).exists() {
            return Err(Failure::usage(format!("no checkpoint for step {step} in {}", dir.display())));
        }
    }
    let policy = make_policy(manifest.backend, &config)?;
    let archive = Simulation::resume_in(dir, policy, checkpoint_step)?.echo_progress(!quiet).run()?;
    finish(&archive);
    Ok(())
}

fn load_judge(path: Option<&Path>, transcript: PathBuf) -> Result<(Box<dyn MoralJudge>, u32), Failure> {
    let path = path.ok_or_else(|| Failure::usage("--with-judge needs --judge-config"))?;
    let text = fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    let jc: JudgeConfig =
        serde_json::from_str(&text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    let key = HttpChatClient::key_from_env(&jc.api_key_env)
        .ok_or_else(|| Failure::usage(format!("the judge needs an API key in ${}", jc.api_key_env)))?;
    let client = HttpChatClient::new(&jc.provider_url, Some(key), jc.timeout);
    let settings = GatewaySettings {
        model: jc.model_id,
        temperature: jc.temperature,
        timeout: jc.timeout,
        max_retries: jc.max_retries,
        reflection_enabled: false,
    };
    Ok((Box::new(LlmJudge::new(client, settings).with_transcript(transcript)), jc.trials))
}

pub fn cmd_analyze(
    dir: &Path,
    out_dir: Option<&Path>,
    with_judge: bool,
    judge_config: Option<&Path>,
) -> Result<(), Failure> {
    let mut options = ReportOptions::default();
    let out = out_dir.map_or_else(|| dir.join("report"), Path::to_path_buf);
    let mut judge = None;
    if with_judge {
        let (j, trials) = load_judge(judge_config, out.join(JUDGE_TRANSCRIPT))?;
        options.judge_trials = trials;
        judge = Some(j);
    }
    if !dir.join(run_dir::EVENTS_FILE).exists() {
        return Err(Failure::usage(format!("{} is not a run directory", dir.display())));
    }
    let archive = RunArchive::load(dir)?;
    fs::create_dir_all(&out).map_err(Failure::runtime)?;
    let _ = fs::remove_file(out.join(JUDGE_TRANSCRIPT));
    let bundle = match judge.as_mut() {
        Some(j) => emit_report(&archive, &out, &options, Some(j.as_mut())),
        None => emit_report(&archive, &out, &options, None),
    }
    .map_err(Failure::runtime)?;
    println!("report written to {}", bundle.root.display());
    Ok(())
}

pub fn cmd_minigame(
    scenario: &Path,
    config_path: Option<&Path>,
    backend: BackendKind,
    seed: u64,
    out_dir: &Path,
) -> Result<(), Failure> {
    let spec = ScenarioSpec::from_path(scenario).map_err(Failure::usage)?;
    let config = load_config(config_path)?;
    let mut policy = make_policy(backend, &config)?;
    policy.set_transcript_dir(&out_dir.join(run_dir::TRANSCRIPT_DIR));
    let results = spec.run(policy.as_mut(), &config, seed).map_err(Failure::usage)?;
    let paths = write_results(&results, out_dir).map_err(Failure::runtime)?;
    for r in &results {
        let failed = r.failures().count();
        if failed > 0 {
            eprintln!("{}: {failed} trials failed and were left out", r.name);
        }
    }
    for p in paths {
        println!("{}", p.display());
    }
    Ok(())
}
