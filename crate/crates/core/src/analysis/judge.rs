use std::collections::BTreeMap;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{agent_roster, AgentRecord, AnalysisError};
use crate::cognition::policy::extract_json_object;
use crate::llm::{ChatClient, ChatMessage, ChatRequest, GatewaySettings, PromptAssets};
use crate::moral::MoralType;
use crate::world::EventRecord;

pub const DEFAULT_DIGEST_BYTES: usize = 16 * 1024;

/// Maps an agent's behavior to a probability for each moral type, in
/// [`MoralType::ALL`] order.
pub trait MoralJudge {
    fn judge(&mut self, agent: &AgentRecord, digest: &str) -> Result<[f64; 4], String>;
    fn name(&self) -> String;
}

impl<J: MoralJudge + ?Sized> MoralJudge for Box<J> {
    fn judge(&mut self, agent: &AgentRecord, digest: &str) -> Result<[f64; 4], String> {
        (**self).judge(agent, digest)
    }

    fn name(&self) -> String {
        (**self).name()
    }
}

/// Always certain and always right.
pub struct OneHotJudge;

impl MoralJudge for OneHotJudge {
    fn judge(&mut self, agent: &AgentRecord, _digest: &str) -> Result<[f64; 4], String> {
        let mut p = [0.0; 4];
        p[agent.moral_type.index()] = 1.0;
        Ok(p)
    }

    fn name(&self) -> String {
        "one_hot".into()
    }
}

/// No opinion at all.
pub struct UniformJudge;

impl MoralJudge for UniformJudge {
    fn judge(&mut self, _agent: &AgentRecord, _digest: &str) -> Result<[f64; 4], String> {
        Ok([0.25; 4])
    }

    fn name(&self) -> String {
        "uniform".into()
    }
}

fn strip_moral_type(v: &mut Value) {
    match v {
        Value::Object(map) => {
            map.remove("moral_type");
            map.values_mut().for_each(strip_moral_type);
        }
        Value::Array(items) => items.iter_mut().for_each(strip_moral_type),
        _ => {}
    }
}

/// The agent's events in order, one JSON line each, with moral types removed.
/// Older lines are dropped first to stay within `max_bytes`.
pub fn behavior_digest(events: &[EventRecord], agent_id: &str, max_bytes: usize) -> String {
    let lines: Vec<String> = events
        .iter()
        .filter(|e| e.involves(agent_id) || e.hp_deltas.contains_key(agent_id))
        .map(|e| {
            let mut v = serde_json::to_value(e).expect("event serializes");
            strip_moral_type(&mut v);
            if let Value::Object(map) = &mut v {
                map.remove("draws");
                map.remove("seq");
            }
            v.to_string()
        })
        .collect();
    let mut kept = Vec::new();
    let mut size = 0;
    for line in lines.iter().rev() {
        if size + line.len() + 1 > max_bytes {
            break;
        }
        size += line.len() + 1;
        kept.push(line.as_str());
    }
    kept.reverse();
    kept.join("\n")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JudgedRow {
    pub agents: u32,
    pub probabilities: BTreeMap<MoralType, f64>,
}

/// Rows are true types, cells the mean judged probability. Types with no
/// judged agent have no row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SoftConfusionMatrix {
    pub rows: BTreeMap<MoralType, JudgedRow>,
}

impl SoftConfusionMatrix {
    pub fn cell(&self, truth: MoralType, judged: MoralType) -> Option<f64> {
        self.rows.get(&truth).map(|r| r.probabilities[&judged])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JudgeOutcome {
    pub judge: String,
    pub trials: u32,
    pub matrix: SoftConfusionMatrix,
    /// Agents left out because the judge failed, with the reason.
    pub excluded: Vec<(String, String)>,
}

#[derive(Debug, thiserror::Error)]
pub enum JudgeError {
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("trials must be at least one")]
    NoTrials,
}

fn normalize(p: [f64; 4]) -> Result<[f64; 4], String> {
    if p.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(format!("invalid probabilities {p:?}"));
    }
    let sum: f64 = p.iter().sum();
    if sum <= 0.0 {
        return Err("probabilities sum to zero".into());
    }
    Ok(p.map(|x| x / sum))
}

/// Judges every agent `trials` times and averages by true type. Judge output
/// is normalised to sum to one; any failed trial excludes the agent.
pub fn judge_moral_types(
    events: &[EventRecord],
    judge: &mut dyn MoralJudge,
    trials: u32,
    digest_bytes: usize,
) -> Result<JudgeOutcome, JudgeError> {
    if trials == 0 {
        return Err(JudgeError::NoTrials);
    }
    let roster = agent_roster(events)?;
    let mut sums: BTreeMap<MoralType, ([f64; 4], u32)> = BTreeMap::new();
    let mut excluded = Vec::new();
    'agents: for agent in roster.values() {
        let digest = behavior_digest(events, &agent.agent_id, digest_bytes);
        let mut acc = [0.0; 4];
        for _ in 0..trials {
            match judge.judge(agent, &digest).and_then(normalize) {
                Ok(p) => (0..4).for_each(|i| acc[i] += p[i] / trials as f64),
                Err(e) => {
                    excluded.push((agent.agent_id.clone(), e));
                    continue 'agents;
                }
            }
        }
        let entry = sums.entry(agent.moral_type).or_insert(([0.0; 4], 0));
        (0..4).for_each(|i| entry.0[i] += acc[i]);
        entry.1 += 1;
    }
    let rows = sums
        .into_iter()
        .map(|(t, (sum, n))| {
            let probabilities = MoralType::ALL.iter().map(|j| (*j, sum[j.index()] / n as f64)).collect();
            (t, JudgedRow { agents: n, probabilities })
        })
        .collect();
    Ok(JudgeOutcome {
        judge: judge.name(),
        trials,
        matrix: SoftConfusionMatrix { rows },
        excluded,
    })
}

/// Asks a chat model for the probabilities, given the four type prompts.
pub struct LlmJudge<C: ChatClient> {
    client: C,
    settings: GatewaySettings,
    system: String,
    transcript: Option<PathBuf>,
}

impl<C: ChatClient> LlmJudge<C> {
    pub fn new(client: C, settings: GatewaySettings) -> Self {
        let assets = PromptAssets::builtin();
        let mut system = String::from(
            "You review the behavior of an agent in a survival simulation and judge which moral type guides it. \
             The four types are described below.\n",
        );
        for t in MoralType::ALL {
            system.push_str(&format!("\n## {t}\n{}\n", assets.moral[&t].trim()));
        }
        system.push_str(
            "\nAnswer with a single JSON object giving the probability of each type, with the keys \
             \"universal\", \"reciprocal\", \"kin\" and \"selfish\". The probabilities must sum to one.",
        );
        Self {
            client,
            settings,
            system,
            transcript: None,
        }
    }

    /// Appends one JSON line per judge call to `path`.
    pub fn with_transcript(mut self, path: impl Into<PathBuf>) -> Self {
        self.transcript = Some(path.into());
        self
    }

    fn log(&self, line: Value) {
        let Some(path) = &self.transcript else { return };
        let result = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .and_then(|mut f| writeln!(f, "{line}"));
        if let Err(e) = result {
            eprintln!("warning: cannot write judge transcript: {e}");
        }
    }
}

fn parse_probabilities(text: &str) -> Result<[f64; 4], String> {
    let body = extract_json_object(text).ok_or("no JSON object in response")?;
    let v: BTreeMap<String, f64> = serde_json::from_str(body).map_err(|e| e.to_string())?;
    let mut p = [0.0; 4];
    for t in MoralType::ALL {
        p[t.index()] = *v.get(t.as_str()).ok_or_else(|| format!("missing key {t}"))?;
    }
    Ok(p)
}

impl<C: ChatClient> MoralJudge for LlmJudge<C> {
    fn judge(&mut self, agent: &AgentRecord, digest: &str) -> Result<[f64; 4], String> {
        let messages = vec![
            ChatMessage::system(self.system.clone()),
            ChatMessage::user(format!(
                "Events involving {} in order, one JSON record per line:\n{digest}",
                agent.agent_id
            )),
        ];
        let request = ChatRequest {
            model: self.settings.model.clone(),
            messages,
            temperature: self.settings.temperature,
            timeout: self.settings.timeout,
        };
        let mut last = String::from("no attempt made");
        for _ in 0..self.settings.max_retries.max(1) {
            let reply = self.client.complete(&request).map_err(|e| e.to_string());
            let parsed = reply.clone().and_then(|text| parse_probabilities(&text));
            self.log(json!({
                "agent_id": agent.agent_id,
                "request": request.messages,
                "response": reply.as_ref().ok(),
                "error": parsed.as_ref().err(),
            }));
            match parsed.and_then(normalize) {
                Ok(p) => return Ok(p),
                Err(e) => last = e,
            }
        }
        Err(last)
    }

    fn name(&self) -> String {
        format!("llm:{}", self.settings.model)
    }
}
