use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::*;
use crate::engine::RunArchive;

pub const MAIN_REPORT: &str = "main_report.md";
pub const AGENTS_DIR: &str = "agents";
pub const METRICS_DIR: &str = "metrics";
const NOTABLE_DESCENDANTS: usize = 5;

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Judge(#[from] JudgeError),
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReportOptions {
    pub hunt_window: u32,
    pub judge_trials: u32,
    pub digest_bytes: usize,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self {
            hunt_window: DEFAULT_HUNT_WINDOW,
            judge_trials: 3,
            digest_bytes: DEFAULT_DIGEST_BYTES,
        }
    }
}

/// Paths written by [`emit_report`].
#[derive(Clone, Debug, PartialEq)]
pub struct ReportBundle {
    pub root: PathBuf,
    pub main_report: PathBuf,
    pub agent_profiles: Vec<PathBuf>,
    pub metric_files: Vec<PathBuf>,
}

/// Founders, then the longest-lived descendants (survivors counted up to
/// `final_step`), ties broken by id.
pub fn notable_agents(roster: &BTreeMap<String, AgentRecord>, final_step: u32) -> Vec<String> {
    let mut ids: Vec<String> = roster.values().filter(|a| a.is_founder()).map(|a| a.agent_id.clone()).collect();
    let mut descendants: Vec<(&AgentRecord, u32)> = roster
        .values()
        .filter(|a| !a.is_founder())
        .map(|a| (a, a.death_step.unwrap_or(final_step).saturating_sub(a.birth_step)))
        .collect();
    descendants.sort_by(|(a, la), (b, lb)| lb.cmp(la).then_with(|| a.agent_id.cmp(&b.agent_id)));
    ids.extend(descendants.into_iter().take(NOTABLE_DESCENDANTS).map(|(a, _)| a.agent_id.clone()));
    ids
}

fn write(path: PathBuf, text: &str) -> Result<PathBuf, ReportError> {
    fs::write(&path, text).map_err(|source| ReportError::Io {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

fn metric<T: Serialize>(dir: &Path, name: &str, columns: &[(&str, &str)], data: T) -> Result<PathBuf, ReportError> {
    let columns = columns.iter().map(|(n, d)| Column::new(n, d)).collect();
    write(dir.join(format!("{name}.json")), &MetricFile::new(name, columns, data).to_json())
}

/// Writes `main_report.md`, `agents/<id>.md` and `metrics/*.json` under
/// `out_dir`. Output depends only on the archive, the options and the judge.
pub fn emit_report(
    archive: &RunArchive,
    out_dir: impl AsRef<Path>,
    options: &ReportOptions,
    judge: Option<&mut dyn MoralJudge>,
) -> Result<ReportBundle, ReportError> {
    let root = out_dir.as_ref().to_path_buf();
    let agents_dir = root.join(AGENTS_DIR);
    let metrics_dir = root.join(METRICS_DIR);
    for dir in [&root, &agents_dir, &metrics_dir] {
        fs::create_dir_all(dir).map_err(|source| ReportError::Io {
            path: dir.clone(),
            source,
        })?;
    }
    let events = &archive.events;
    let end = archive.final_state.step.max(final_step(events));
    let roster = agent_roster(events)?;
    let population = compute_population_series(events, end)?;
    let lifespans = compute_lifespans(events, end)?;
    let actions = compute_action_distributions(events)?;
    let hp = compute_hp_attribution(events)?;
    let (lineage, comm) = build_networks(events)?;
    let hunts = compute_hunt_traces(events, options.hunt_window);
    let judged = match judge {
        Some(j) => Some(judge_moral_types(events, j, options.judge_trials, options.digest_bytes)?),
        None => None,
    };

    let mut metric_files = vec![
        metric(
            &metrics_dir,
            "population",
            &[
                ("step", "simulation step"),
                ("total", "living agents at the end of the step"),
                ("counts", "living agents per moral type"),
                ("ratios", "share of the living per moral type"),
                ("births", "agents born during the step"),
                ("deaths", "agents that died during the step"),
            ],
            &population,
        )?,
        metric(
            &metrics_dir,
            "lifespans",
            &[
                ("agent_id", "agent"),
                ("moral_type", "moral type"),
                ("birth_step", "step of birth, zero for founders"),
                ("lifespan", "steps from birth to death, or to the final step"),
                ("censored", "true when the agent outlived the run"),
                ("histograms", "per type, lifespan to count of completed lives"),
            ],
            &lifespans,
        )?,
        metric(
            &metrics_dir,
            "actions",
            &[
                ("agents", "agents of the type that ever lived"),
                ("initiated", "executed actions by actors of the type"),
                ("received", "executed actions naming an agent of the type"),
                ("mean_initiated", "initiated per agent"),
                ("mean_received", "received per agent"),
                ("initiated_proportions", "share of each action among the type's initiated actions"),
                ("totals", "executed actions over the run"),
                ("nullified", "actions rejected at resolution"),
            ],
            &actions,
        )?,
        metric(
            &metrics_dir,
            "hp_attribution",
            &[
                ("by_cause", "HP gained and lost per cause over all agents"),
                ("by_type", "HP gained and lost per cause, by the affected agent's type"),
                ("trajectories", "per agent, HP after every event that changed it, with the cause"),
            ],
            &hp,
        )?,
        metric(
            &metrics_dir,
            "lineage",
            &[
                ("nodes", "agents with type, birth and death step"),
                ("edges", "parent, child"),
            ],
            &lineage,
        )?,
        metric(
            &metrics_dir,
            "communication",
            &[
                ("nodes", "agents with type, birth and death step"),
                ("edges", "sender, receiver and number of messages delivered"),
            ],
            &comm,
        )?,
        metric(
            &metrics_dir,
            "hunts",
            &[
                ("prey_id", "killed prey"),
                ("prey_max_hp", "prey HP at spawn"),
                ("kill_step", "step of the kill"),
                ("killer", "agent landing the last blow"),
                ("damage", "HP removed per hunter"),
                ("transfers", "allocations by the hunters within the window after the kill"),
            ],
            &hunts,
        )?,
    ];
    if let Some(j) = &judged {
        metric_files.push(metric(
            &metrics_dir,
            "confusion",
            &[
                ("rows", "true type to mean judged probability per type"),
                ("excluded", "agents the judge failed on, with the reason"),
            ],
            j,
        )?);
    }

    let mut agent_profiles = Vec::new();
    for id in notable_agents(&roster, end) {
        let text = agent_profile(&roster[&id], &roster, &lifespans, &hp, events);
        agent_profiles.push(write(agents_dir.join(format!("{id}.md")), &text)?);
    }

    let text = main_report(archive, end, &population, &lifespans, &actions, &hp, &lineage, &hunts, judged.as_ref());
    let main_report = write(root.join(MAIN_REPORT), &text)?;
    Ok(ReportBundle {
        root,
        main_report,
        agent_profiles,
        metric_files,
    })
}

#[allow(clippy::too_many_arguments)]
fn main_report(
    archive: &RunArchive,
    end: u32,
    population: &PopulationSeries,
    lifespans: &Lifespans,
    actions: &ActionDistributions,
    hp: &HpAttribution,
    lineage: &LineageGraph,
    hunts: &[HuntTrace],
    judged: Option<&JudgeOutcome>,
) -> String {
    let mut s = String::new();
    let c = &archive.config;
    let _ = writeln!(s, "# Run report\n");
    let _ = writeln!(s, "- seed: {}", c.rng_seed);
    let _ = writeln!(s, "- steps run: {end} of {}", c.max_time_steps);
    let _ = writeln!(s, "- stopped: {}", archive.termination.as_str());
    let _ = writeln!(s, "- social rounds per step: {}", c.social_rounds_per_step);
    let _ = writeln!(s, "- moral types visible: {}", c.moral_type_visible);
    let _ = writeln!(s, "- resource abundance: {}", c.resource_abundance);
    let _ = writeln!(s, "- events: {}", archive.events.len());
    let _ = writeln!(s, "- decision failures: {}", archive.decision_failures);
    let _ = writeln!(s, "- births: {}, deaths: {}\n", population.total_births(), population.total_deaths());

    let _ = writeln!(s, "## Population\n");
    let _ = writeln!(s, "| type | start | end | agents ever | mean completed lifespan |");
    let _ = writeln!(s, "|---|---|---|---|---|");
    let first = population.points.first();
    let last = population.points.last();
    for t in MoralType::ALL {
        let lives: Vec<u32> = lifespans.completed().filter(|e| e.moral_type == t).map(|e| e.lifespan).collect();
        let mean = if lives.is_empty() {
            "-".to_string()
        } else {
            format!("{:.1}", lives.iter().sum::<u32>() as f64 / lives.len() as f64)
        };
        let _ = writeln!(
            s,
            "| {t} | {} | {} | {} | {mean} |",
            first.map_or(0, |p| p.counts[&t]),
            last.map_or(0, |p| p.counts[&t]),
            actions.per_type[&t].agents,
        );
    }

    let _ = writeln!(s, "\n## Mean actions initiated per agent\n");
    let kinds: Vec<_> = crate::action::ActionKind::ALL.to_vec();
    let _ = writeln!(s, "| type | {} |", kinds.iter().map(|k| k.as_str()).collect::<Vec<_>>().join(" | "));
    let _ = writeln!(s, "|---|{}", "---|".repeat(kinds.len()));
    for t in MoralType::ALL {
        let row = &actions.per_type[&t];
        let cells: Vec<String> = kinds
            .iter()
            .map(|k| format!("{:.2}", row.mean_initiated.get(k).copied().unwrap_or(0.0)))
            .collect();
        let _ = writeln!(s, "| {t} | {} |", cells.join(" | "));
    }

    let _ = writeln!(s, "\n## HP by cause\n");
    let _ = writeln!(s, "| cause | gained | lost | events |");
    let _ = writeln!(s, "|---|---|---|---|");
    for (cause, flow) in &hp.by_cause {
        let _ = writeln!(s, "| {cause} | {} | {} | {} |", flow.gain, flow.loss, flow.events);
    }

    let _ = writeln!(s, "\n## Hunting and family\n");
    let shared: i64 = hunts.iter().flat_map(|h| &h.transfers).map(|t| t.amount).sum();
    let _ = writeln!(s, "- prey killed: {}", hunts.len());
    let _ = writeln!(s, "- HP shared by hunters after kills: {shared}");
    let _ = writeln!(s, "- parent to child links: {}", lineage.edges.len());

    if let Some(j) = judged {
        let _ = writeln!(s, "\n## Judged moral types ({}, {} trials)\n", j.judge, j.trials);
        let _ = writeln!(
            s,
            "| true type | agents | {} |",
            MoralType::ALL.iter().map(|t| t.as_str()).collect::<Vec<_>>().join(" | ")
        );
        let _ = writeln!(s, "|---|---|{}", "---|".repeat(4));
        for (t, row) in &j.matrix.rows {
            let cells: Vec<String> = MoralType::ALL.iter().map(|u| format!("{:.3}", row.probabilities[u])).collect();
            let _ = writeln!(s, "| {t} | {} | {} |", row.agents, cells.join(" | "));
        }
        if !j.excluded.is_empty() {
            let _ = writeln!(s, "\nExcluded: {}", j.excluded.iter().map(|(a, _)| a.as_str()).collect::<Vec<_>>().join(", "));
        }
    }
    s
}

fn agent_profile(
    agent: &AgentRecord,
    roster: &BTreeMap<String, AgentRecord>,
    lifespans: &Lifespans,
    hp: &HpAttribution,
    events: &[EventRecord],
) -> String {
    let mut s = String::new();
    let id = &agent.agent_id;
    let _ = writeln!(s, "# {id}\n");
    let _ = writeln!(s, "- moral type: {}", agent.moral_type);
    let _ = writeln!(s, "- parent: {}", agent.parent_id.as_deref().unwrap_or("none (founder)"));
    let _ = writeln!(s, "- born at step {}", agent.birth_step);
    match (agent.death_step, &agent.death_cause) {
        (Some(d), cause) => {
            let _ = writeln!(s, "- died at step {d} ({})", cause.as_deref().unwrap_or("unknown"));
        }
        (None, _) => {
            let _ = writeln!(s, "- alive at the end of the run");
        }
    }
    if let Some(l) = lifespans.entries.iter().find(|e| &e.agent_id == id) {
        let _ = writeln!(s, "- lifespan: {}{}", l.lifespan, if l.censored { " (still alive)" } else { "" });
    }
    let children: Vec<&str> = roster
        .values()
        .filter(|a| a.parent_id.as_deref() == Some(id))
        .map(|a| a.agent_id.as_str())
        .collect();
    let _ = writeln!(s, "- children: {}", if children.is_empty() { "none".to_string() } else { children.join(", ") });

    let mut initiated: BTreeMap<&str, u32> = BTreeMap::new();
    let mut received: BTreeMap<&str, u32> = BTreeMap::new();
    for e in events.iter().filter(|e| e.is_action() && !e.is_nullified()) {
        if e.actor_id.as_deref() == Some(id) {
            *initiated.entry(e.kind.as_str()).or_default() += 1;
        } else if e.targets.iter().any(|t| t == id) {
            *received.entry(e.kind.as_str()).or_default() += 1;
        }
    }
    let _ = writeln!(s, "\n## Actions\n");
    let _ = writeln!(s, "| action | initiated | received |");
    let _ = writeln!(s, "|---|---|---|");
    let kinds: std::collections::BTreeSet<&str> = initiated.keys().chain(received.keys()).copied().collect();
    for k in kinds {
        let _ = writeln!(
            s,
            "| {k} | {} | {} |",
            initiated.get(k).copied().unwrap_or(0),
            received.get(k).copied().unwrap_or(0)
        );
    }

    if let Some(t) = hp.trajectories.iter().find(|t| &t.agent_id == id) {
        let _ = writeln!(s, "\n## HP\n");
        let max = t.points.iter().map(|p| p.hp).max().unwrap_or(0);
        let min = t.points.iter().map(|p| p.hp).min().unwrap_or(0);
        let _ = writeln!(s, "- highest {max}, lowest {min}, final {}\n", t.final_hp());
        let mut by_cause: BTreeMap<&str, HpFlow> = BTreeMap::new();
        for p in &t.points {
            let f = by_cause.entry(p.cause.as_str()).or_default();
            if p.delta > 0 {
                f.gain += p.delta;
            } else {
                f.loss -= p.delta;
            }
            f.events += 1;
        }
        let _ = writeln!(s, "| cause | gained | lost |");
        let _ = writeln!(s, "|---|---|---|");
        for (cause, f) in by_cause {
            let _ = writeln!(s, "| {cause} | {} | {} |", f.gain, f.loss);
        }
    }
    s
}
