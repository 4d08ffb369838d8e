//! Controlled single-decision scenarios run through any policy backend.
//!
//! Each trial builds a fresh world holding only the scenario's roster, asks
//! the subject agent for one social-round decision and resolves it.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::action::{resolve, Action, ActionRequest, Intent, RoundPhase, WorldCoin};
use crate::analysis::{Column, MetricFile};
use crate::cognition::{assemble_observation, MemoryDocument, PolicyBackend, ScenarioBrief, ShortTermPlan};
use crate::config::SimulationConfig;
use crate::moral::MoralType;
use crate::rng::derive_seed;
use crate::world::{agent_id, initialize_world, AgentState, WorldState};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PaClass {
    Strong,
    Mid,
    Weak,
}

impl PaClass {
    pub const ALL: [PaClass; 3] = [PaClass::Strong, PaClass::Mid, PaClass::Weak];

    pub fn physical_ability(self) -> f64 {
        match self {
            PaClass::Strong => 8.0,
            PaClass::Mid => 6.0,
            PaClass::Weak => 4.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PaClass::Strong => "strong",
            PaClass::Mid => "mid",
            PaClass::Weak => "weak",
        }
    }
}

/// One agent placed in a scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentProfile {
    pub moral_type: MoralType,
    pub pa_class: PaClass,
    pub hp: u32,
    pub age: u32,
    /// Roster index of this agent's parent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<usize>,
}

impl AgentProfile {
    pub fn label(&self) -> String {
        format!("{}_{}", self.moral_type, self.pa_class.as_str())
    }
}

/// A roster plus the decision asked of agent 0 about agent 1.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub roster: Vec<AgentProfile>,
    pub brief: fn(String) -> ScenarioBrief,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScenarioError {
    #[error("scenario needs at least two agents")]
    TooSmall,
    #[error("agent {0} names a parent that is not an earlier roster entry")]
    BadParent(usize),
    #[error("agent {index} has {hp} HP, outside 1..={max}")]
    BadHp { index: usize, hp: u32, max: u32 },
    #[error("trials must be at least one")]
    NoTrials,
    #[error("hp grid must be non-empty and within 1..={0}")]
    BadGrid(u32),
    #[error("at least one life stage is required")]
    NoStages,
    #[error("cannot read scenario spec: {0}")]
    Spec(String),
}

impl Scenario {
    pub fn validate(&self, config: &SimulationConfig) -> Result<(), ScenarioError> {
        if self.roster.len() < 2 {
            return Err(ScenarioError::TooSmall);
        }
        for (i, p) in self.roster.iter().enumerate() {
            if p.parent.is_some_and(|q| q >= i) {
                return Err(ScenarioError::BadParent(i));
            }
            if p.hp == 0 || p.hp > config.max_hp {
                return Err(ScenarioError::BadHp {
                    index: i,
                    hp: p.hp,
                    max: config.max_hp,
                });
            }
        }
        Ok(())
    }

    /// A fresh world holding only the roster; plants and prey come from the
    /// base configuration.
    pub fn world(&self, config: &SimulationConfig, seed: u64) -> WorldState {
        let mut c = config.clone();
        c.rng_seed = seed;
        let mut state = initialize_world(&c);
        state.step = 1;
        state.agents = self
            .roster
            .iter()
            .enumerate()
            .map(|(i, p)| AgentState {
                agent_id: agent_id(i),
                moral_type: p.moral_type,
                hp: p.hp as i64,
                max_hp: config.max_hp as i64,
                age: p.age,
                physical_ability: p.pa_class.physical_ability(),
                parent_id: p.parent.map(agent_id),
                children: Vec::new(),
                alive: true,
                memory_doc: MemoryDocument::default(),
                short_term_plan: ShortTermPlan::default(),
                birth_step: 0,
                death_step: None,
            })
            .collect();
        for (i, p) in self.roster.iter().enumerate() {
            if let Some(parent) = p.parent {
                state.agents[parent].children.push(agent_id(i));
            }
        }
        state.queue = (0..self.roster.len()).map(agent_id).collect();
        state
    }
}

/// What happened in one trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub row: usize,
    pub col: usize,
    pub trial: u32,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<Action>,
    /// The cell statistic for this trial; absent when the trial failed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub completed: u32,
    pub failed: u32,
    pub sum: f64,
    pub mean: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub name: String,
    /// What `value` measures.
    pub statistic: String,
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
    pub trials: u32,
    pub cells: Vec<Vec<CellSummary>>,
    pub records: Vec<TrialRecord>,
}

impl SweepResult {
    fn new(name: &str, statistic: &str, rows: Vec<String>, cols: Vec<String>, trials: u32) -> Self {
        Self {
            name: name.to_string(),
            statistic: statistic.to_string(),
            cells: vec![vec![CellSummary::default(); cols.len()]; rows.len()],
            row_labels: rows,
            col_labels: cols,
            trials,
            records: Vec::new(),
        }
    }

    /// Cell summaries rebuilt from the raw records.
    pub fn recompute_cells(&self) -> Vec<Vec<CellSummary>> {
        let mut cells = vec![vec![CellSummary::default(); self.col_labels.len()]; self.row_labels.len()];
        for r in &self.records {
            let c = &mut cells[r.row][r.col];
            match r.value {
                Some(v) => {
                    c.completed += 1;
                    c.sum += v;
                }
                None => c.failed += 1,
            }
        }
        for c in cells.iter_mut().flatten() {
            c.mean = (c.completed > 0).then(|| c.sum / c.completed as f64);
        }
        cells
    }

    fn finish(mut self) -> Self {
        self.cells = self.recompute_cells();
        self
    }

    pub fn failures(&self) -> impl Iterator<Item = &TrialRecord> {
        self.records.iter().filter(|r| r.failure.is_some())
    }

    pub fn metric_file(&self) -> MetricFile<&SweepResult> {
        MetricFile::new(
            &self.name,
            vec![
                Column::new("row_labels", "sweep rows"),
                Column::new("col_labels", "sweep columns"),
                Column::new("cells", "per cell: completed and failed trials, sum and mean of the statistic"),
                Column::new("records", "one entry per trial with its seed, decision and value"),
            ],
            self,
        )
    }
}

/// Runs one trial and returns the decision with the resolved event's HP
/// deltas. `Err` carries the failure reason.
pub fn run_trial(
    policy: &mut dyn PolicyBackend,
    config: &SimulationConfig,
    scenario: &Scenario,
    seed: u64,
) -> Result<(Action, BTreeMap<String, i64>, bool), String> {
    let mut state = scenario.world(config, seed);
    let subject = agent_id(0);
    let phase = RoundPhase::social(1, 0);
    let mut bundle = assemble_observation(&state, config, &[], &subject, &phase).map_err(|e| e.to_string())?;
    bundle.scenario = Some((scenario.brief)(agent_id(1)));
    let response = policy.decide(&bundle).map_err(|f| f.to_string())?;
    let request = ActionRequest::new(subject, response.action.clone());
    let outcome = resolve(&mut state, config, &phase, &request, &mut WorldCoin);
    let executed = !outcome.is_nullified();
    Ok((response.action, outcome.record.hp_deltas, executed))
}

fn invitation_brief(receiver: String) -> ScenarioBrief {
    ScenarioBrief::Invitation { receiver }
}

fn sharing_brief(child: String) -> ScenarioBrief {
    ScenarioBrief::HpSharing { child }
}

fn target_brief(target: String) -> ScenarioBrief {
    ScenarioBrief::AllocationTarget { target }
}

/// HP moved from agent 0 to agent 1 by an executed allocate.
fn transferred(action: &Action, executed: bool) -> f64 {
    match action {
        Action::Allocate { allocation_plan } if executed => {
            allocation_plan.get(&agent_id(1)).copied().unwrap_or(0) as f64
        }
        _ => 0.0,
    }
}

/// The twelve profiles: every moral type at every strength class.
pub fn invitation_profiles() -> Vec<AgentProfile> {
    MoralType::ALL
        .iter()
        .flat_map(|t| {
            PaClass::ALL.iter().map(|c| AgentProfile {
                moral_type: *t,
                pa_class: *c,
                hp: 20,
                age: 10,
                parent: None,
            })
        })
        .collect()
}

/// Every ordered pair of profiles. The value is 1 when the sender invites.
pub fn run_invitation_game(
    policy: &mut dyn PolicyBackend,
    config: &SimulationConfig,
    trials: u32,
    seed: u64,
) -> Result<SweepResult, ScenarioError> {
    if trials == 0 {
        return Err(ScenarioError::NoTrials);
    }
    let profiles = invitation_profiles();
    let labels: Vec<String> = profiles.iter().map(AgentProfile::label).collect();
    let mut result = SweepResult::new("invitation", "invited", labels.clone(), labels, trials);
    for (row, sender) in profiles.iter().enumerate() {
        for (col, receiver) in profiles.iter().enumerate() {
            let scenario = Scenario {
                roster: vec![sender.clone(), receiver.clone()],
                brief: invitation_brief,
            };
            scenario.validate(config)?;
            for trial in 0..trials {
                let trial_seed = derive_seed(seed, &[row as u64, col as u64, trial as u64]);
                let outcome = run_trial(policy, config, &scenario, trial_seed);
                result.records.push(invitation_record(row, col, trial, trial_seed, outcome));
            }
        }
    }
    Ok(result.finish())
}

fn invitation_record(
    row: usize,
    col: usize,
    trial: u32,
    seed: u64,
    outcome: Result<(Action, BTreeMap<String, i64>, bool), String>,
) -> TrialRecord {
    let mut rec = TrialRecord {
        row,
        col,
        trial,
        seed,
        action: None,
        value: None,
        failure: None,
    };
    match outcome {
        Ok((action, _, _)) => {
            let invited = matches!(
                &action,
                Action::Communicate { recipients, intent: Some(Intent::Invite), .. } if recipients.contains(&agent_id(1))
            );
            rec.value = Some(if invited { 1.0 } else { 0.0 });
            rec.action = Some(action);
        }
        Err(e) => rec.failure = Some(e),
    }
    rec
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LifeStage {
    /// Young parent with an infant.
    Young,
    /// Elderly parent with an adult child.
    Elderly,
}

impl LifeStage {
    pub const ALL: [LifeStage; 2] = [LifeStage::Young, LifeStage::Elderly];

    /// (parent age, child age)
    pub fn ages(self, config: &SimulationConfig) -> (u32, u32) {
        match self {
            LifeStage::Young => (config.min_age_repro + 2, 1),
            LifeStage::Elderly => (config.max_age.saturating_sub(1), config.max_age / 2),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LifeStage::Young => "young",
            LifeStage::Elderly => "elderly",
        }
    }
}

impl fmt::Display for LifeStage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub fn default_hp_grid(config: &SimulationConfig) -> Vec<u32> {
    let mut grid = vec![1];
    grid.extend((5..=config.max_hp).step_by(5));
    grid
}

/// One table per moral type and life stage; rows are parent HP, columns
/// child HP, values the HP the parent allocated to the child.
pub fn run_hp_sharing_game(
    policy: &mut dyn PolicyBackend,
    config: &SimulationConfig,
    hp_grid: &[u32],
    stages: &[LifeStage],
    trials: u32,
    seed: u64,
) -> Result<Vec<SweepResult>, ScenarioError> {
    if trials == 0 {
        return Err(ScenarioError::NoTrials);
    }
    if hp_grid.is_empty() || hp_grid.iter().any(|h| *h == 0 || *h > config.max_hp) {
        return Err(ScenarioError::BadGrid(config.max_hp));
    }
    if stages.is_empty() {
        return Err(ScenarioError::NoStages);
    }
    let labels: Vec<String> = hp_grid.iter().map(u32::to_string).collect();
    let mut tables = Vec::new();
    for (ti, moral) in MoralType::ALL.iter().enumerate() {
        for stage in stages {
            let (parent_age, child_age) = stage.ages(config);
            let name = format!("hp_sharing_{moral}_{stage}");
            let mut result = SweepResult::new(&name, "hp_transferred", labels.clone(), labels.clone(), trials);
            for (row, parent_hp) in hp_grid.iter().enumerate() {
                for (col, child_hp) in hp_grid.iter().enumerate() {
                    let scenario = Scenario {
                        roster: vec![
                            AgentProfile {
                                moral_type: *moral,
                                pa_class: PaClass::Mid,
                                hp: *parent_hp,
                                age: parent_age,
                                parent: None,
                            },
                            AgentProfile {
                                moral_type: *moral,
                                pa_class: PaClass::Mid,
                                hp: *child_hp,
                                age: child_age,
                                parent: Some(0),
                            },
                        ],
                        brief: sharing_brief,
                    };
                    scenario.validate(config)?;
                    for trial in 0..trials {
                        let coords = [ti as u64, *stage as u64, row as u64, col as u64, trial as u64];
                        let trial_seed = derive_seed(seed, &coords);
                        let outcome = run_trial(policy, config, &scenario, trial_seed);
                        result.records.push(transfer_record(row, col, trial, trial_seed, outcome));
                    }
                }
            }
            tables.push(result.finish());
        }
    }
    Ok(tables)
}

fn transfer_record(
    row: usize,
    col: usize,
    trial: u32,
    seed: u64,
    outcome: Result<(Action, BTreeMap<String, i64>, bool), String>,
) -> TrialRecord {
    let mut rec = TrialRecord {
        row,
        col,
        trial,
        seed,
        action: None,
        value: None,
        failure: None,
    };
    match outcome {
        Ok((action, _, executed)) => {
            rec.value = Some(transferred(&action, executed));
            rec.action = Some(action);
        }
        Err(e) => rec.failure = Some(e),
    }
    rec
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetAxis {
    KinVsNonkin,
    TargetMoralType,
}

impl FromStr for TargetAxis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "kin_vs_nonkin" => Ok(TargetAxis::KinVsNonkin),
            "target_moral_type" => Ok(TargetAxis::TargetMoralType),
            other => Err(format!("unknown target axis `{other}`")),
        }
    }
}

/// Rows are sender types; columns the swept property of a low-HP target.
/// Values are the HP allocated to the target.
pub fn run_allocation_target_game(
    policy: &mut dyn PolicyBackend,
    config: &SimulationConfig,
    axis: TargetAxis,
    sender_hp: u32,
    target_hp: u32,
    trials: u32,
    seed: u64,
) -> Result<SweepResult, ScenarioError> {
    if trials == 0 {
        return Err(ScenarioError::NoTrials);
    }
    let rows: Vec<String> = MoralType::ALL.iter().map(|t| t.to_string()).collect();
    let cols: Vec<String> = match axis {
        TargetAxis::KinVsNonkin => vec!["kin".into(), "non_kin".into()],
        TargetAxis::TargetMoralType => rows.clone(),
    };
    let name = match axis {
        TargetAxis::KinVsNonkin => "allocation_kin_vs_nonkin",
        TargetAxis::TargetMoralType => "allocation_target_moral_type",
    };
    let mut result = SweepResult::new(name, "hp_transferred", rows, cols.clone(), trials);
    for (row, sender) in MoralType::ALL.iter().enumerate() {
        for col in 0..cols.len() {
            let (target_type, parent) = match axis {
                TargetAxis::KinVsNonkin => (*sender, (col == 0).then_some(0)),
                TargetAxis::TargetMoralType => (MoralType::ALL[col], None),
            };
            let scenario = Scenario {
                roster: vec![
                    AgentProfile {
                        moral_type: *sender,
                        pa_class: PaClass::Mid,
                        hp: sender_hp,
                        age: config.initial_age,
                        parent: None,
                    },
                    AgentProfile {
                        moral_type: target_type,
                        pa_class: PaClass::Mid,
                        hp: target_hp,
                        age: config.initial_age / 2,
                        parent,
                    },
                ],
                brief: target_brief,
            };
            scenario.validate(config)?;
            for trial in 0..trials {
                let trial_seed = derive_seed(seed, &[row as u64, col as u64, trial as u64]);
                let outcome = run_trial(policy, config, &scenario, trial_seed);
                result.records.push(transfer_record(row, col, trial, trial_seed, outcome));
            }
        }
    }
    Ok(result.finish())
}

/// Scenario document accepted by the command line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "game", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScenarioSpec {
    Invitation {
        #[serde(default = "default_trials")]
        trials: u32,
    },
    HpSharing {
        #[serde(default = "default_trials")]
        trials: u32,
        #[serde(default)]
        hp_grid: Option<Vec<u32>>,
        #[serde(default = "all_stages")]
        life_stages: Vec<LifeStage>,
    },
    AllocationTarget {
        #[serde(default = "default_trials")]
        trials: u32,
        target_axis: TargetAxis,
        #[serde(default = "default_sender_hp")]
        sender_hp: u32,
        #[serde(default = "default_target_hp")]
        target_hp: u32,
    },
}

fn default_trials() -> u32 {
    10
}

fn all_stages() -> Vec<LifeStage> {
    LifeStage::ALL.to_vec()
}

fn default_sender_hp() -> u32 {
    30
}

fn default_target_hp() -> u32 {
    3
}

impl ScenarioSpec {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        serde_json::from_str(text).map_err(|e| ScenarioError::Spec(e.to_string()))
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| ScenarioError::Spec(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_json(&text)
    }

    /// Runs the sweeps the scenario describes.
    pub fn run(
        &self,
        policy: &mut dyn PolicyBackend,
        config: &SimulationConfig,
        seed: u64,
    ) -> Result<Vec<SweepResult>, ScenarioError> {
        match self {
            ScenarioSpec::Invitation { trials } => Ok(vec![run_invitation_game(policy, config, *trials, seed)?]),
            ScenarioSpec::HpSharing {
                trials,
                hp_grid,
                life_stages,
            } => {
                let grid = hp_grid.clone().unwrap_or_else(|| default_hp_grid(config));
                run_hp_sharing_game(policy, config, &grid, life_stages, *trials, seed)
            }
            ScenarioSpec::AllocationTarget {
                trials,
                target_axis,
                sender_hp,
                target_hp,
            } => Ok(vec![run_allocation_target_game(
                policy,
                config,
                *target_axis,
                *sender_hp,
                *target_hp,
                *trials,
                seed,
            )?]),
        }
    }
}

/// Writes each sweep as `<name>.json` under `dir`.
pub fn write_results(results: &[SweepResult], dir: impl AsRef<Path>) -> std::io::Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let mut paths = Vec::new();
    for r in results {
        let path = dir.join(format!("{}.json", r.name));
        std::fs::write(&path, r.metric_file().to_json())?;
        paths.push(path);
    }
    Ok(paths)
}
