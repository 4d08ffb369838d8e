//! The step loop: environment update, then social rounds, then production.

pub mod run_dir;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::action::{resolve, resolve_do_nothing, ActionRequest, RoundPhase, WorldCoin};
use crate::cognition::{assemble_observation, PolicyBackend};
use crate::config::{ConfigError, SimulationConfig};
use crate::moral::MoralType;
use crate::world::{
    death_record, environment_update, founding_events, initialize_world, restore, snapshot, Checkpoint,
    CheckpointError, EventKind, EventRecord, WorldState,
};

pub use run_dir::{RunDir, RunSummary};

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("no checkpoint for step {0}")]
    MissingCheckpoint(u32),
    #[error("corrupt run archive: {0}")]
    Corrupt(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxSteps,
    PopulationCollapse,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::MaxSteps => "max_steps",
            StopReason::PopulationCollapse => "population_collapse",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    Continue,
    Stop(StopReason),
}

/// Evaluated after a step completes.
pub fn check_termination(state: &WorldState, config: &SimulationConfig) -> Termination {
    if state.living_count() == 0 {
        Termination::Stop(StopReason::PopulationCollapse)
    } else if state.step >= config.max_time_steps {
        Termination::Stop(StopReason::MaxSteps)
    } else {
        Termination::Continue
    }
}

/// Everything a finished run leaves behind.
#[derive(Clone, Debug)]
pub struct RunArchive {
    pub config: SimulationConfig,
    pub events: Vec<EventRecord>,
    pub checkpoints: Vec<Checkpoint>,
    pub final_state: WorldState,
    pub termination: StopReason,
    pub decision_failures: u64,
    pub run_dir: Option<PathBuf>,
}

impl RunArchive {
    /// Loads a terminated run from disk. Only the last checkpoint is read.
    pub fn load(root: impl AsRef<Path>) -> Result<Self, EngineError> {
        let root = root.as_ref();
        let config = run_dir::read_config(root)?;
        let events = run_dir::read_events(root)?;
        let steps = run_dir::checkpoint_steps(root)?;
        let last = *steps
            .last()
            .ok_or_else(|| EngineError::Corrupt("run has no checkpoints".into()))?;
        let cp = run_dir::read_checkpoint(root, last)?;
        let final_state = restore(&cp, &config)?;
        let summary = run_dir::read_summary(root)?;
        let termination = match &summary {
            Some(s) => s.termination_reason,
            None => match check_termination(&final_state, &config) {
                Termination::Stop(r) => r,
                Termination::Continue => {
                    return Err(EngineError::Corrupt("run did not terminate".into()));
                }
            },
        };
        Ok(Self {
            config,
            events,
            checkpoints: vec![cp],
            final_state,
            termination,
            decision_failures: summary.map_or(0, |s| s.decision_failures),
            run_dir: Some(root.to_path_buf()),
        })
    }
}

/// A live simulation.
pub struct Simulation<P: PolicyBackend> {
    pub config: SimulationConfig,
    pub state: WorldState,
    pub events: Vec<EventRecord>,
    policy: P,
    dir: Option<RunDir>,
    checkpoints: Vec<Checkpoint>,
    decision_failures: u64,
    echo_progress: bool,
}

impl<P: PolicyBackend> Simulation<P> {
    /// Initializes the world at step 0 and records the founding events.
    pub fn new(config: SimulationConfig, policy: P) -> Result<Self, EngineError> {
        config.validate()?;
        let state = initialize_world(&config);
        let mut sim = Self {
            config,
            state,
            events: Vec::new(),
            policy,
            dir: None,
            checkpoints: Vec::new(),
            decision_failures: 0,
            echo_progress: false,
        };
        for rec in founding_events(&sim.state) {
            sim.push(rec)?;
        }
        Ok(sim)
    }

    /// Like `new`, persisting everything under `root`.
    pub fn create_in(config: SimulationConfig, mut policy: P, root: impl AsRef<Path>) -> Result<Self, EngineError> {
        config.validate()?;
        let dir = RunDir::create(root, &config)?;
        policy.set_transcript_dir(&dir.root().join(run_dir::TRANSCRIPT_DIR));
        let mut sim = Self::new(config, policy)?;
        let mut dir = dir;
        for rec in &sim.events {
            dir.append_event(rec)?;
        }
        sim.dir = Some(dir);
        Ok(sim)
    }

    /// Continues from a checkpoint with the events recorded up to it.
    pub fn from_checkpoint(
        config: SimulationConfig,
        policy: P,
        checkpoint: &Checkpoint,
        events: Vec<EventRecord>,
    ) -> Result<Self, EngineError> {
        let state = restore(checkpoint, &config)?;
        if events.len() as u64 != checkpoint.event_log_len {
            return Err(EngineError::Corrupt(format!(
                "{} events given, checkpoint expects {}",
                events.len(),
                checkpoint.event_log_len
            )));
        }
        Ok(Self {
            config,
            state,
            events,
            policy,
            dir: None,
            checkpoints: Vec::new(),
            decision_failures: 0,
            echo_progress: false,
        })
    }

    /// Reopens a run directory at `step` (latest checkpoint when `None`).
    pub fn resume_in(root: impl AsRef<Path>, mut policy: P, step: Option<u32>) -> Result<Self, EngineError> {
        let root = root.as_ref();
        let config = run_dir::read_config(root)?;
        let step = match step {
            Some(s) => s,
            None => *run_dir::checkpoint_steps(root)?
                .last()
                .ok_or_else(|| EngineError::Corrupt("run has no checkpoints".into()))?,
        };
        let cp = run_dir::read_checkpoint(root, step)?;
        restore(&cp, &config)?;
        let (dir, events) = RunDir::reopen(root, &cp)?;
        policy.set_transcript_dir(&root.join(run_dir::TRANSCRIPT_DIR));
        let mut sim = Self::from_checkpoint(config, policy, &cp, events)?;
        sim.dir = Some(dir);
        Ok(sim)
    }

    /// Mirror progress lines to standard output.
    pub fn echo_progress(mut self, on: bool) -> Self {
        self.echo_progress = on;
        self
    }

    pub fn policy(&self) -> &P {
        &self.policy
    }

    pub fn policy_mut(&mut self) -> &mut P {
        &mut self.policy
    }

    pub fn decision_failures(&self) -> u64 {
        self.decision_failures
    }

    fn push(&mut self, mut rec: EventRecord) -> Result<(), EngineError> {
        rec.seq = self.events.len() as u64;
        if let Some(dir) = &mut self.dir {
            dir.append_event(&rec)?;
        }
        self.events.push(rec);
        Ok(())
    }

    fn log(&mut self, line: String) -> Result<(), EngineError> {
        if self.echo_progress {
            println!("{line}");
        }
        if let Some(dir) = &mut self.dir {
            dir.log(&line)?;
        }
        Ok(())
    }

    /// Takes a checkpoint of the current state.
    pub fn checkpoint(&mut self) -> Result<Checkpoint, EngineError> {
        let cp = snapshot(&self.state, &self.config, self.events.len() as u64);
        if let Some(dir) = &mut self.dir {
            dir.write_checkpoint(&cp)?;
        }
        self.checkpoints.push(cp.clone());
        Ok(cp)
    }

    fn maybe_checkpoint(&mut self, force: bool) -> Result<(), EngineError> {
        let interval = self.config.checkpoint_interval.max(1);
        if force || self.state.step % interval == 0 {
            self.checkpoint()?;
        }
        Ok(())
    }

    /// Runs one full step and reports whether the run should go on.
    pub fn step_once(&mut self) -> Result<Termination, EngineError> {
        let first_event = self.events.len();
        self.state.step += 1;
        for rec in environment_update(&mut self.state, &self.config) {
            self.push(rec)?;
        }
        self.state.shuffle_queue();
        for phase in RoundPhase::rounds_of_step(self.state.step, self.config.social_rounds_per_step) {
            self.execute_round(&phase)?;
        }
        let step_events = &self.events[first_event..];
        let births = step_events
            .iter()
            .filter(|e| e.kind == EventKind::Reproduce && !e.is_nullified())
            .count();
        let deaths = step_events.iter().filter(|e| e.kind == EventKind::Death).count();
        let counts: Vec<String> = MoralType::ALL
            .iter()
            .map(|t| {
                let n = self.state.living_agents().filter(|a| a.moral_type == *t).count();
                format!("{t} {n}")
            })
            .collect();
        let line = format!(
            "step {} | living {} | {} | births {births} | deaths {deaths}",
            self.state.step,
            self.state.living_count(),
            counts.join(", ")
        );
        self.log(line)?;
        let decision = check_termination(&self.state, &self.config);
        self.maybe_checkpoint(decision != Termination::Continue)?;
        if let Some(dir) = &mut self.dir {
            dir.flush()?;
        }
        Ok(decision)
    }

    /// Offers every living agent in queue order one decision in `phase`.
    pub fn execute_round(&mut self, phase: &RoundPhase) -> Result<(), EngineError> {
        let queue = self.state.queue.clone();
        for agent_id in queue {
            let Ok(bundle) = assemble_observation(&self.state, &self.config, &self.events, &agent_id, phase) else {
                continue;
            };
            let outcome = match self.policy.decide(&bundle) {
                Ok(response) => {
                    let agent = self.state.agent_mut(&agent_id).expect("observed agent exists");
                    agent.memory_doc = response.long_term_memory;
                    agent.short_term_plan = response.short_term_plan;
                    let request = ActionRequest::new(agent_id.clone(), response.action);
                    resolve(&mut self.state, &self.config, phase, &request, &mut WorldCoin)
                }
                Err(failure) => {
                    self.decision_failures += 1;
                    let mut out = resolve_do_nothing(&self.state, phase, &agent_id);
                    out.record.parameters = json!({ "policy_failure": failure.to_string() });
                    out
                }
            };
            let cause = outcome.record.kind.as_str();
            let deaths = outcome.deaths.clone();
            self.push(outcome.record)?;
            for dead in deaths {
                self.push(death_record(phase.step, &dead, cause, 0))?;
            }
        }
        Ok(())
    }

    /// Steps until termination and returns the archive.
    pub fn run(mut self) -> Result<RunArchive, EngineError> {
        if self.state.step == 0 && self.checkpoints.is_empty() {
            self.checkpoint()?;
        }
        let reason = loop {
            if let Termination::Stop(reason) = check_termination(&self.state, &self.config) {
                break reason;
            }
            if let Termination::Stop(reason) = self.step_once()? {
                break reason;
            }
        };
        self.finish(reason)
    }

    fn finish(mut self, reason: StopReason) -> Result<RunArchive, EngineError> {
        let summary = RunSummary {
            termination_reason: reason,
            final_step: self.state.step,
            living: self.state.living_count(),
            total_agents: self.state.agents.len(),
            event_count: self.events.len() as u64,
            decision_failures: self.decision_failures,
        };
        self.log(format!("terminated at step {}: {}", self.state.step, reason.as_str()))?;
        let run_dir = match &mut self.dir {
            Some(dir) => {
                dir.write_summary(&summary)?;
                Some(dir.root().to_path_buf())
            }
            None => None,
        };
        Ok(RunArchive {
            config: self.config,
            events: self.events,
            checkpoints: self.checkpoints,
            final_state: self.state,
            termination: reason,
            decision_failures: self.decision_failures,
            run_dir,
        })
    }
}

/// Runs a simulation in memory.
pub fn run_simulation<P: PolicyBackend>(config: SimulationConfig, policy: P) -> Result<RunArchive, EngineError> {
    Simulation::new(config, policy)?.run()
}
