use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{agent_roster, per_type, AnalysisError};
use crate::moral::MoralType;
use crate::world::EventRecord;

/// Population at the end of one step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PopulationPoint {
    pub step: u32,
    pub total: u32,
    pub counts: BTreeMap<MoralType, u32>,
    /// Empty when nobody is alive.
    pub ratios: BTreeMap<MoralType, f64>,
    pub births: u32,
    pub deaths: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PopulationSeries {
    pub points: Vec<PopulationPoint>,
}

impl PopulationSeries {
    pub fn at(&self, step: u32) -> Option<&PopulationPoint> {
        self.points.iter().find(|p| p.step == step)
    }

    pub fn total_deaths(&self) -> u32 {
        self.points.iter().map(|p| p.deaths).sum()
    }

    pub fn total_births(&self) -> u32 {
        self.points.iter().map(|p| p.births).sum()
    }
}

/// One point per step from 0 to `final_step`.
pub fn compute_population_series(events: &[EventRecord], final_step: u32) -> Result<PopulationSeries, AnalysisError> {
    let roster = agent_roster(events)?;
    let mut points = Vec::with_capacity(final_step as usize + 1);
    for step in 0..=final_step {
        let mut counts = per_type::<u32>();
        let (mut births, mut deaths) = (0, 0);
        for a in roster.values() {
            if a.birth_step <= step && a.death_step.is_none_or(|d| d > step) {
                *counts.get_mut(&a.moral_type).expect("all types") += 1;
            }
            if a.birth_step == step && !a.is_founder() {
                births += 1;
            }
            if a.death_step == Some(step) {
                deaths += 1;
            }
        }
        let total: u32 = counts.values().sum();
        let ratios = if total == 0 {
            BTreeMap::new()
        } else {
            counts.iter().map(|(t, c)| (*t, *c as f64 / total as f64)).collect()
        };
        points.push(PopulationPoint {
            step,
            total,
            counts,
            ratios,
            births,
            deaths,
        });
    }
    Ok(PopulationSeries { points })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LifespanEntry {
    pub agent_id: String,
    pub moral_type: MoralType,
    pub birth_step: u32,
    pub lifespan: u32,
    /// Still alive at the final step; the lifespan is a lower bound.
    pub censored: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lifespans {
    pub entries: Vec<LifespanEntry>,
    /// Per type: lifespan -> number of completed lives.
    pub histograms: BTreeMap<MoralType, BTreeMap<u32, u32>>,
}

impl Lifespans {
    pub fn completed(&self) -> impl Iterator<Item = &LifespanEntry> {
        self.entries.iter().filter(|e| !e.censored)
    }
}

/// Survivors are censored at `final_step` and left out of the histograms.
pub fn compute_lifespans(events: &[EventRecord], final_step: u32) -> Result<Lifespans, AnalysisError> {
    let roster = agent_roster(events)?;
    let mut histograms = per_type::<BTreeMap<u32, u32>>();
    let mut entries = Vec::with_capacity(roster.len());
    for a in roster.values() {
        let (end, censored) = match a.death_step {
            Some(d) => (d, false),
            None => (final_step, true),
        };
        let lifespan = end.saturating_sub(a.birth_step);
        if !censored {
            *histograms
                .get_mut(&a.moral_type)
                .expect("all types")
                .entry(lifespan)
                .or_default() += 1;
        }
        entries.push(LifespanEntry {
            agent_id: a.agent_id.clone(),
            moral_type: a.moral_type,
            birth_step: a.birth_step,
            lifespan,
            censored,
        });
    }
    Ok(Lifespans { entries, histograms })
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::scripted_run;
    use super::super::final_step;
    use super::*;
    use crate::world::{EventKind, Phase};
    use serde_json::json;

    fn spawn(id: &str, ty: &str) -> EventRecord {
        let mut e = EventRecord::new(0, Phase::Environment, EventKind::Spawn);
        e.targets.push(id.into());
        e.parameters = json!({ "moral_type": ty });
        e
    }

    fn birth(step: u32, parent: &str, child: &str, ty: &str) -> EventRecord {
        let mut e = EventRecord::new(step, Phase::Production, EventKind::Reproduce);
        e.actor_id = Some(parent.into());
        e.parameters = json!({ "child_id": child, "moral_type": ty });
        e
    }

    fn death(step: u32, id: &str) -> EventRecord {
        crate::world::death_record(step, id, "starvation", 0)
    }

    #[test]
    fn counts_follow_births_and_deaths() {
        let events = vec![
            spawn("a", "kin"),
            spawn("b", "selfish"),
            birth(15, "a", "c", "kin"),
            death(20, "b"),
            death(30, "c"),
        ];
        let series = compute_population_series(&events, 35).unwrap();
        assert_eq!(series.at(0).unwrap().total, 2);
        assert_eq!(series.at(15).unwrap().counts[&MoralType::Kin], 2);
        assert_eq!(series.at(15).unwrap().births, 1);
        assert_eq!(series.at(19).unwrap().counts[&MoralType::Selfish], 1);
        assert_eq!(series.at(20).unwrap().counts[&MoralType::Selfish], 0);
        assert_eq!(series.at(20).unwrap().deaths, 1);

        let spans = compute_lifespans(&events, 35).unwrap();
        let c = spans.entries.iter().find(|e| e.agent_id == "c").unwrap();
        assert_eq!((c.lifespan, c.censored), (15, false));
        let a = spans.entries.iter().find(|e| e.agent_id == "a").unwrap();
        assert_eq!((a.lifespan, a.censored), (35, true));
    }

    #[test]
    fn ratios_sum_to_one_and_deaths_match_lifespans() {
        let archive = scripted_run(7, 60);
        let end = final_step(&archive.events);
        let series = compute_population_series(&archive.events, end).unwrap();
        for p in &series.points {
            assert_eq!(p.counts.values().sum::<u32>(), p.total);
            if p.total > 0 {
                assert!((p.ratios.values().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
        let spans = compute_lifespans(&archive.events, end).unwrap();
        assert_eq!(spans.completed().count() as u32, series.total_deaths());
        let max_age = archive.config.max_age;
        assert!(spans.entries.iter().all(|e| e.lifespan <= max_age + 1));
    }
}
