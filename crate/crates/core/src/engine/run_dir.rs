//! On-disk layout of a run:
//!
//! ```text
//! <run>/config.json            frozen configuration
//! <run>/run_meta.json          manifest written by the caller
//! <run>/events.jsonl           one EventRecord per line
//! <run>/checkpoints/checkpoint_<step>.json
//! <run>/progress.log
//! <run>/summary.json           written on termination
//! <run>/transcripts/<agent>.jsonl
//! ```

use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{EngineError, StopReason};
use crate::config::SimulationConfig;
use crate::world::{parse_event_lines, Checkpoint, EventRecord};

pub const CONFIG_FILE: &str = "config.json";
pub const META_FILE: &str = "run_meta.json";
pub const EVENTS_FILE: &str = "events.jsonl";
pub const PROGRESS_FILE: &str = "progress.log";
pub const SUMMARY_FILE: &str = "summary.json";
pub const CHECKPOINT_DIR: &str = "checkpoints";
pub const TRANSCRIPT_DIR: &str = "transcripts";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub termination_reason: StopReason,
    pub final_step: u32,
    pub living: usize,
    pub total_agents: usize,
    pub event_count: u64,
    pub decision_failures: u64,
}

/// Writer for a run directory.
pub struct RunDir {
    root: PathBuf,
    events: BufWriter<File>,
    progress: BufWriter<File>,
}

impl RunDir {
    /// Creates the layout for a fresh run. Fails if `root` already holds events.
    pub fn create(root: impl AsRef<Path>, config: &SimulationConfig) -> Result<Self, EngineError> {
        let root = root.as_ref().to_path_buf();
        if root.join(EVENTS_FILE).exists() {
            return Err(EngineError::Corrupt(format!(
                "{} already contains a run",
                root.display()
            )));
        }
        fs::create_dir_all(root.join(CHECKPOINT_DIR))?;
        fs::write(root.join(CONFIG_FILE), config.to_json())?;
        let events = BufWriter::new(File::create(root.join(EVENTS_FILE))?);
        let progress = BufWriter::new(File::create(root.join(PROGRESS_FILE))?);
        Ok(Self {
            root,
            events,
            progress,
        })
    }

    /// Reopens a run for continuation after `checkpoint`, dropping any events
    /// written after it.
    pub fn reopen(root: impl AsRef<Path>, checkpoint: &Checkpoint) -> Result<(Self, Vec<EventRecord>), EngineError> {
        let root = root.as_ref().to_path_buf();
        let mut events = read_events(&root)?;
        let keep = checkpoint.event_log_len as usize;
        if events.len() < keep {
            return Err(EngineError::Corrupt(format!(
                "event log has {} records, checkpoint expects {keep}",
                events.len()
            )));
        }
        events.truncate(keep);
        let mut text = String::new();
        for e in &events {
            text.push_str(&e.to_json_line());
            text.push('\n');
        }
        fs::write(root.join(EVENTS_FILE), text)?;
        let events_file = OpenOptions::new().append(true).open(root.join(EVENTS_FILE))?;
        let progress = OpenOptions::new()
            .create(true)
            .append(true)
            .open(root.join(PROGRESS_FILE))?;
        let mut dir = Self {
            root,
            events: BufWriter::new(events_file),
            progress: BufWriter::new(progress),
        };
        dir.log(&format!("resumed from checkpoint at step {}", checkpoint.step))?;
        Ok((dir, events))
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn append_event(&mut self, rec: &EventRecord) -> Result<(), EngineError> {
        self.events.write_all(rec.to_json_line().as_bytes())?;
        self.events.write_all(b"\n")?;
        Ok(())
    }

    pub fn log(&mut self, line: &str) -> Result<(), EngineError> {
        writeln!(self.progress, "{line}")?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<(), EngineError> {
        self.events.flush()?;
        self.progress.flush()?;
        Ok(())
    }

    pub fn write_checkpoint(&mut self, cp: &Checkpoint) -> Result<(), EngineError> {
        self.flush()?;
        let path = checkpoint_path(&self.root, cp.step);
        let tmp = path.with_extension("json.tmp");
        fs::write(&tmp, cp.to_json())?;
        fs::rename(tmp, path)?;
        Ok(())
    }

    pub fn write_summary(&mut self, summary: &RunSummary) -> Result<(), EngineError> {
        self.flush()?;
        let text = serde_json::to_string_pretty(summary).expect("summary serializes");
        fs::write(self.root.join(SUMMARY_FILE), text)?;
        Ok(())
    }
}

pub fn checkpoint_path(root: &Path, step: u32) -> PathBuf {
    root.join(CHECKPOINT_DIR).join(Checkpoint::file_name(step))
}

pub fn read_config(root: &Path) -> Result<SimulationConfig, EngineError> {
    Ok(SimulationConfig::from_path(root.join(CONFIG_FILE))?)
}

pub fn read_events(root: &Path) -> Result<Vec<EventRecord>, EngineError> {
    let text = fs::read_to_string(root.join(EVENTS_FILE))?;
    parse_event_lines(&text).map_err(|e| EngineError::Corrupt(format!("events.jsonl: {e}")))
}

pub fn read_checkpoint(root: &Path, step: u32) -> Result<Checkpoint, EngineError> {
    let path = checkpoint_path(root, step);
    if !path.exists() {
        return Err(EngineError::MissingCheckpoint(step));
    }
    Ok(Checkpoint::from_json(&fs::read_to_string(path)?)?)
}

pub fn read_summary(root: &Path) -> Result<Option<RunSummary>, EngineError> {
    let path = root.join(SUMMARY_FILE);
    if !path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text)
        .map(Some)
        .map_err(|e| EngineError::Corrupt(format!("summary.json: {e}")))
}

/// Steps for which a checkpoint file exists, ascending.
pub fn checkpoint_steps(root: &Path) -> Result<Vec<u32>, EngineError> {
    let dir = root.join(CHECKPOINT_DIR);
    if !dir.exists() {
        return Ok(Vec::new());
    }
    let mut steps: Vec<u32> = fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .filter_map(|e| {
            e.file_name()
                .to_str()?
                .strip_prefix("checkpoint_")?
                .strip_suffix(".json")?
                .parse()
                .ok()
        })
        .collect();
    steps.sort_unstable();
    Ok(steps)
}
