//! Drives the LLM backend against the in-process fake chat server, then
//! replays the recorded transcripts without any server.
//!
//! cargo run --example llm_fake_server

use std::fs;

use serde_json::Value;

use forager::action::{Action, RoundKind};
use forager::cognition::{ObservationBundle, PolicyResponse};
use forager::config::SimulationConfig;
use forager::engine::run_dir::{EVENTS_FILE, TRANSCRIPT_DIR};
use forager::engine::Simulation;
use forager::llm::{FakeChatServer, FakeReply, HttpChatClient, LlmPolicy, ReplayChatClient};

/// Gathers in production rounds and idles otherwise; the first try of each
/// decision is garbage so the retry loop has work to do.
fn reply(request: &Value) -> FakeReply {
    let messages = request["messages"].as_array().cloned().unwrap_or_default();
    if messages.len() <= 2 {
        return FakeReply::Content("let me think about it".into());
    }
    let bundle: ObservationBundle = messages
        .iter()
        .filter_map(|m| m["content"].as_str())
        .find_map(|c| c.split_once("Observation:\n"))
        .and_then(|(_, body)| serde_json::from_str(body).ok())
        .expect("observation");
    let action = match (bundle.round_kind, bundle.environment.plants.iter().find(|p| p.quantity > 0)) {
        (RoundKind::Production, Some(p)) => Action::Collect {
            target: p.plant_id.clone(),
            quantity: 1,
        },
        _ => Action::DoNothing,
    };
    let response = PolicyResponse {
        agent_id: bundle.self_status.agent_id.clone(),
        thinking: "Food first.".into(),
        long_term_memory: bundle.long_term_memory.clone(),
        short_term_plan: bundle.short_term_plan.clone(),
        action,
    };
    FakeReply::Content(serde_json::to_string(&response).expect("serializes"))
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let server = FakeChatServer::with_handler(reply)?;
    let mut config = SimulationConfig::baseline();
    config.max_time_steps = 2;
    config.llm.provider_url = server.base_url();

    let tmp = tempfile::tempdir()?;
    let live = tmp.path().join("live");
    let client = HttpChatClient::new(server.base_url(), None, config.llm.timeout);
    let archive = Simulation::create_in(config.clone(), LlmPolicy::new(client, &config), &live)?.run()?;
    println!(
        "live run: {} events, {} model calls, {} decision failures",
        archive.events.len(),
        server.request_count(),
        archive.decision_failures
    );

    let replay = ReplayChatClient::from_dir(live.join(TRANSCRIPT_DIR))?;
    let replayed = tmp.path().join("replayed");
    Simulation::create_in(config.clone(), LlmPolicy::new(replay, &config), &replayed)?.run()?;
    let same = fs::read(live.join(EVENTS_FILE))? == fs::read(replayed.join(EVENTS_FILE))?;
    println!("replay without a server: event log {}", if same { "identical" } else { "DIFFERENT" });
    Ok(())
}
