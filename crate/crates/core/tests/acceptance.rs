//! Acceptance suite: one line per criterion, non-zero exit if any fails.
//!
//! `cargo test --test acceptance`

#[path = "acceptance/oracle.rs"]
mod oracle;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use serde_json::Value;

use forager::action::{resolve, success_probability, Action, ActionRequest, Coin, ForcedCoin, RoundPhase, WorldCoin};
use forager::analysis::{
    compute_hp_attribution, compute_lifespans, compute_population_series, final_step, judge_moral_types,
    reconcile_final_hp, OneHotJudge, DEFAULT_DIGEST_BYTES,
};
use forager::cognition::{
    DecisionFailure, MemoryDocument, ObservationBundle, PolicyBackend, PolicyResponse, ScriptedPolicy, ShortTermPlan,
};
use forager::config::{apply_variant, SimulationConfig, Variant};
use forager::engine::run_dir::{EVENTS_FILE, TRANSCRIPT_DIR};
use forager::engine::{run_simulation, RunArchive, Simulation, Termination};
use forager::llm::{
    numeric_literals, read_transcripts, FakeChatServer, FakeReply, HttpChatClient, LlmPolicy, PromptAssets,
};
use forager::minigames::{default_hp_grid, run_hp_sharing_game, run_invitation_game, LifeStage, SweepResult};
use forager::moral::MoralType;
use forager::rng::SimRng;
use forager::world::{initialize_world, EventKind, EventRecord, Phase, PlantNode, PreyAnimal, WorldState};

use oracle::{Act, Mini, Prey, Rules, Who};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("success-function calibration", success_calibration),
        ("resolver matches brute-force oracle", resolver_oracle),
        ("baseline parameter fidelity", baseline_fidelity),
        ("determinism and resume", determinism_and_resume),
        ("round cadence", round_cadence),
        ("validation retry loop", validation_loop),
        ("HP ledger and conservation", hp_ledger),
        ("analysis consistency", analysis_consistency),
        ("mini-game shapes", minigame_shapes),
        ("prompt numbers match config", prompt_coherence),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into());
            Err(format!("panic: {msg}"))
        });
        let secs = started.elapsed().as_secs_f64();
        let (verdict, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {:>2} {verdict} {name} [{secs:.2}s] {detail}", i + 1);
    }
    let _ = panic::take_hook();
    if failed > 0 {
        println!("{failed} of {} criteria failed", criteria.len());
        std::process::exit(1);
    }
    println!("all {} criteria passed", criteria.len());
}

fn baseline(seed: u64, steps: u32) -> SimulationConfig {
    let mut c = SimulationConfig::baseline();
    c.rng_seed = seed;
    c.max_time_steps = steps;
    c
}

fn scripted(config: &SimulationConfig) -> RunArchive {
    run_simulation(config.clone(), ScriptedPolicy::new(config)).expect("scripted run")
}

// 1

const DRAWS: u32 = 100_000;
const SIGMAS: f64 = 3.0;

fn reference_success(delta: f64, intercept: f64, slope: f64) -> f64 {
    let x = delta / slope;
    let tanh = (x.exp() - (-x).exp()) / (x.exp() + (-x).exp());
    (0.5 + intercept + 0.4 * tanh).clamp(0.1, 0.9)
}

fn success_calibration() -> Outcome {
    let started = Instant::now();
    let mut notes = Vec::new();
    for (i, (delta, intercept, slope)) in [(0.0, 0.0, 5.0), (2.0, 0.1, 5.0), (-2.0, 0.1, 5.0), (10.0, 0.1, 5.0)]
        .into_iter()
        .enumerate()
    {
        let p = success_probability(delta, intercept, slope).map_err(|e| e.to_string())?;
        let expected = reference_success(delta, intercept, slope);
        ensure!((p - expected).abs() < 1e-12, "P({delta},{intercept},{slope}) = {p}, expected {expected}");
        let mut rng = SimRng::seed_from(1000 + i as u64);
        let mut coin = WorldCoin;
        let hits = (0..DRAWS).filter(|_| coin.flip(&mut rng, p)).count();
        let freq = hits as f64 / DRAWS as f64;
        let se = (expected * (1.0 - expected) / DRAWS as f64).sqrt();
        let z = (freq - expected) / se;
        ensure!(z.abs() <= SIGMAS, "({delta},{intercept},{slope}): frequency {freq:.5} vs {expected:.5}, z = {z:.2}");
        notes.push(format!("z={z:+.2}"));
    }
    let elapsed = started.elapsed();
    ensure!(elapsed < Duration::from_secs(5), "took {elapsed:?}, limit 5 s");
    Ok(format!("{} draws per tuple, |z| <= {SIGMAS}: {}", DRAWS, notes.join(" ")))
}

// 2

fn oracle_rules() -> Rules {
    Rules {
        max_hp: 5,
        collect_cap: 2,
        nutrition: 2,
        respawn_delay: 4,
        min_age_repro: 2,
        min_hp_repro: 3,
        hp_cost_repro: 2,
        offspring_hp: 1,
        message_max_length: 5,
        intercept: 0.1,
        slope: 5.0,
    }
}

fn oracle_config(r: &Rules) -> SimulationConfig {
    let mut c = SimulationConfig::baseline();
    c.max_hp = r.max_hp as u32;
    c.collect_cap = r.collect_cap;
    c.plant_params.nutrition = r.nutrition as u32;
    c.plant_params.respawn_delay = r.respawn_delay;
    c.min_age_repro = r.min_age_repro;
    c.min_hp_repro = r.min_hp_repro as u32;
    c.hp_cost_repro = r.hp_cost_repro as u32;
    c.offspring_hp = r.offspring_hp as u32;
    c.message_max_length = r.message_max_length as u32;
    c.pa_intercept = r.intercept;
    c.pa_slope = r.slope;
    c
}

fn who_id(w: Who) -> String {
    match w {
        Who::Other => "agent_1".into(),
        Who::Me => "agent_0".into(),
        Who::Ghost => "agent_9".into(),
    }
}

fn oracle_actions() -> Vec<Act> {
    let mut acts = vec![
        Act::Collect { real: false, quantity: 1 },
        Act::Hunt { real: true },
        Act::Hunt { real: false },
        Act::Reproduce,
        Act::Allocate(vec![]),
        Act::Allocate(vec![(Who::Me, 1)]),
        Act::Allocate(vec![(Who::Ghost, 1)]),
        Act::Allocate(vec![(Who::Other, 1), (Who::Ghost, 1)]),
        Act::Communicate { to: vec![Who::Other], len: 5 },
        Act::Communicate { to: vec![Who::Other], len: 6 },
        Act::Communicate { to: vec![], len: 2 },
        Act::Communicate { to: vec![Who::Ghost], len: 2 },
        Act::Communicate { to: vec![Who::Other, Who::Ghost], len: 2 },
        Act::Fight(Who::Other),
        Act::Fight(Who::Me),
        Act::Fight(Who::Ghost),
        Act::Rob(Who::Me, 1),
        Act::Rob(Who::Ghost, 1),
        Act::DoNothing,
    ];
    for q in 0..=3 {
        acts.push(Act::Collect { real: true, quantity: q });
    }
    for a in 0..=5 {
        acts.push(Act::Allocate(vec![(Who::Other, a)]));
        acts.push(Act::Rob(Who::Other, a));
    }
    acts
}

fn to_action(act: &Act) -> Action {
    match act {
        Act::Collect { real, quantity } => Action::Collect {
            target: if *real { "plant_0" } else { "plant_7" }.into(),
            quantity: *quantity,
        },
        Act::Hunt { real } => Action::Hunt {
            target: if *real { "prey_0" } else { "prey_99" }.into(),
        },
        Act::Reproduce => Action::Reproduce,
        Act::Allocate(plan) => Action::Allocate {
            allocation_plan: plan.iter().map(|(w, a)| (who_id(*w), *a)).collect(),
        },
        Act::Communicate { to, len } => Action::Communicate {
            recipients: to.iter().map(|w| who_id(*w)).collect(),
            message: "x".repeat(*len),
            intent: None,
        },
        Act::Fight(w) => Action::Fight { target: who_id(*w) },
        Act::Rob(w, a) => Action::Rob {
            target: who_id(*w),
            amount: *a,
        },
        Act::DoNothing => Action::DoNothing,
    }
}

fn build_world(template: &WorldState, m: &Mini, r: &Rules) -> WorldState {
    let mut s = template.clone();
    let proto = s.agents[0].clone();
    s.agents = (0..2)
        .map(|i| {
            let mut a = proto.clone();
            a.agent_id = format!("agent_{i}");
            a.hp = m.hp[i];
            a.alive = m.hp[i] > 0;
            a.max_hp = r.max_hp;
            a.physical_ability = m.pa[i];
            a.age = if i == 0 { m.age } else { 5 };
            a.parent_id = None;
            a.children.clear();
            a
        })
        .collect();
    s.prey = m
        .prey
        .iter()
        .map(|p| PreyAnimal {
            prey_id: "prey_0".into(),
            hp: p.hp,
            max_hp: p.max_hp,
            physical_ability: p.pa,
            counter_damage: p.counter,
            num_agents_to_kill: 2,
        })
        .collect();
    s.plants = vec![PlantNode {
        plant_id: "plant_0".into(),
        quantity: m.plant,
        capacity: 3,
        nutrition_per_unit: r.nutrition as u32,
        respawn_delay: r.respawn_delay,
        steps_until_respawn: m.plant_timer,
    }];
    s
}

fn observe(s: &WorldState, base: &Mini) -> Mini {
    Mini {
        hp: [s.agents[0].hp, s.agents[1].hp],
        pa: base.pa,
        age: base.age,
        prey: s.prey("prey_0").map(|p| Prey {
            hp: p.hp,
            max_hp: p.max_hp,
            pa: p.physical_ability,
            counter: p.counter_damage,
        }),
        plant: s.plants[0].quantity,
        plant_timer: s.plants[0].steps_until_respawn,
        newborns: s.agents.len() as u32 - 2,
    }
}

fn mini_hp_deltas(before: &Mini, after: &Mini, r: &Rules) -> BTreeMap<String, i64> {
    let mut d = BTreeMap::new();
    for i in 0..2 {
        if after.hp[i] != before.hp[i] {
            d.insert(format!("agent_{i}"), after.hp[i] - before.hp[i]);
        }
    }
    let prey_hp = |m: &Mini| m.prey.map(|p| p.hp).unwrap_or(0);
    if prey_hp(after) != prey_hp(before) {
        d.insert("prey_0".into(), prey_hp(after) - prey_hp(before));
    }
    if after.newborns > before.newborns {
        d.insert("agent_2".into(), r.offspring_hp);
    }
    d
}

fn resolver_oracle() -> Outcome {
    let started = Instant::now();
    let rules = oracle_rules();
    let config = oracle_config(&rules);
    let template = initialize_world(&config);
    let acts = oracle_actions();
    let pa_sets = [[2.7, 1.0, 4.0], [1.0, 3.5, 0.5]];
    let mut cases = 0u64;
    let mut mismatches = Vec::new();
    for pa in pa_sets {
        for age in [1, 3] {
            for hp0 in 0..=5 {
                for hp1 in 0..=5 {
                    for prey_hp in -1..=5i64 {
                        for plant in 0..=3 {
                            let m = Mini {
                                hp: [hp0, hp1],
                                pa: [pa[0], pa[1]],
                                age,
                                prey: (prey_hp >= 0).then_some(Prey {
                                    hp: prey_hp,
                                    max_hp: 6,
                                    pa: pa[2],
                                    counter: 2,
                                }),
                                plant,
                                plant_timer: 0,
                                newborns: 0,
                            };
                            let world = build_world(&template, &m, &rules);
                            for act in &acts {
                                for social in [true, false] {
                                    for coin in [true, false] {
                                        cases += 1;
                                        let want = oracle::expected(&m, act, social, coin, &rules);
                                        let mut s = world.clone();
                                        let phase =
                                            if social { RoundPhase::social(1, 0) } else { RoundPhase::production(1, 2) };
                                        let req = ActionRequest::new("agent_0", to_action(act));
                                        let out = resolve(&mut s, &config, &phase, &req, &mut ForcedCoin(coin));
                                        let got = observe(&s, &m);
                                        let draw = match out.record.draws.as_slice() {
                                            [] => None,
                                            [d] => Some(d.probability),
                                            _ => Some(f64::NAN),
                                        };
                                        let draw_ok = match (draw, want.draw) {
                                            (None, None) => true,
                                            (Some(a), Some(b)) => (a - b).abs() < 1e-12,
                                            _ => false,
                                        };
                                        let alive_ok = (0..2).all(|i| s.agents[i].alive == (got.hp[i] > 0));
                                        let child_ok = s.agents.get(2).is_none_or(|c| {
                                            c.hp == rules.offspring_hp && c.parent_id.as_deref() == Some("agent_0")
                                        });
                                        let deltas_ok = out.record.hp_deltas == mini_hp_deltas(&m, &want.after, &rules);
                                        if out.is_nullified() != want.nullified
                                            || out.record.success != want.success
                                            || got != want.after
                                            || !draw_ok
                                            || !alive_ok
                                            || !child_ok
                                            || !deltas_ok
                                        {
                                            if mismatches.len() < 5 {
                                                mismatches.push(format!(
                                                    "{act:?} social={social} coin={coin} from {m:?}: got {got:?} \
                                                     nullified={} success={} draw={draw:?} deltas={:?}; want {want:?}",
                                                    out.is_nullified(),
                                                    out.record.success,
                                                    out.record.hp_deltas
                                                ));
                                            }
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    let elapsed = started.elapsed();
    ensure!(mismatches.is_empty(), "mismatches, first: {}", mismatches.join(" | "));
    ensure!(elapsed < Duration::from_secs(60), "took {elapsed:?}, limit 60 s");
    Ok(format!("{cases} cases, 0 mismatches"))
}

// 3

/// Reproduces in every production round of steps divisible by seven,
/// whether eligible or not, and otherwise follows the scripted rules.
struct EagerBreeder(ScriptedPolicy);

impl PolicyBackend for EagerBreeder {
    fn decide(&mut self, bundle: &ObservationBundle) -> Result<PolicyResponse, DecisionFailure> {
        let mut response = self.0.decide(bundle)?;
        if bundle.step % 7 == 0 && bundle.legal_actions.contains(&forager::action::ActionKind::Reproduce) {
            response.action = Action::Reproduce;
        }
        Ok(response)
    }

    fn name(&self) -> String {
        "eager_breeder".into()
    }
}

/// Birth step and age at birth of every agent, from spawn and birth events.
fn birth_table(events: &[EventRecord], initial_age: u32) -> BTreeMap<String, (u32, u32)> {
    let mut t = BTreeMap::new();
    for e in events {
        match e.kind {
            EventKind::Spawn => {
                t.insert(e.targets[0].clone(), (0, initial_age));
            }
            EventKind::Reproduce if !e.is_nullified() => {
                let child = e.param_str("child_id").expect("child id").to_string();
                t.insert(child, (e.step, 0));
            }
            _ => {}
        }
    }
    t
}

fn age_at(births: &BTreeMap<String, (u32, u32)>, id: &str, step: u32) -> u32 {
    let (born, age0) = births[id];
    age0 + (step - born)
}

fn baseline_fidelity() -> Outcome {
    let config = baseline(42, 80);
    ensure!(
        (config.hp_cost_repro, config.offspring_hp, config.min_age_repro, config.min_hp_repro) == (10, 3, 4, 12),
        "baseline reproduction values changed"
    );
    ensure!(
        (config.plant_params.nutrition, config.collect_cap, config.max_age) == (3, 3, 20),
        "baseline plant or age values changed"
    );
    let archive = run_simulation(config.clone(), EagerBreeder(ScriptedPolicy::new(&config))).map_err(|e| e.to_string())?;
    let events = &archive.events;
    let births = birth_table(events, config.initial_age);
    let mut hp: BTreeMap<String, i64> = BTreeMap::new();
    let (mut births_ok, mut rejected, mut collects, mut old_age) = (0, 0, 0, 0);
    for e in events {
        let actor = e.actor_id.as_deref();
        match e.kind {
            EventKind::Reproduce => {
                let a = actor.expect("actor");
                let (age, have) = (age_at(&births, a, e.step), hp[a]);
                let eligible = age >= 4 && have >= 12;
                if e.is_nullified() {
                    ensure!(!eligible, "eligible reproduction by {a} (age {age}, HP {have}) rejected at seq {}", e.seq);
                    rejected += 1;
                } else {
                    ensure!(eligible, "reproduction by {a} at age {age}, HP {have} accepted at seq {}", e.seq);
                    let child = e.param_str("child_id").expect("child");
                    ensure!(e.hp_deltas.get(a) == Some(&-10), "parent delta {:?} at seq {}", e.hp_deltas.get(a), e.seq);
                    ensure!(e.hp_deltas.get(child) == Some(&3), "child delta {:?} at seq {}", e.hp_deltas.get(child), e.seq);
                    births_ok += 1;
                }
            }
            EventKind::Collect if !e.is_nullified() => {
                let a = actor.expect("actor");
                let got = e.param_i64("collected").expect("collected");
                ensure!((1..=3).contains(&got), "collected {got} at seq {}", e.seq);
                let want = (got * 3).min(config.max_hp as i64 - hp[a]);
                let delta = e.hp_deltas.get(a).copied().unwrap_or(0);
                ensure!(delta == want, "collect of {got} gave {delta} HP, expected {want} at seq {}", e.seq);
                collects += 1;
            }
            EventKind::Death if e.param_str("cause") == Some("old_age") => {
                let age = age_at(&births, &e.targets[0], e.step);
                ensure!(age == 21, "{} died of old age at {age}", e.targets[0]);
                old_age += 1;
            }
            _ => {}
        }
        if e.is_action() {
            let a = actor.expect("actor");
            let age = age_at(&births, a, e.step);
            ensure!(age <= 20, "{a} acted at age {age} (seq {})", e.seq);
        }
        for (id, d) in &e.hp_deltas {
            *hp.entry(id.clone()).or_insert(0) += d;
        }
    }
    for a in &archive.final_state.agents {
        if a.alive {
            ensure!(age_at(&births, &a.agent_id, archive.final_state.step) <= 20, "{} alive past 20", a.agent_id);
        }
    }
    ensure!(births_ok > 0 && rejected > 0 && collects > 0 && old_age > 0, "run did not exercise every rule");
    Ok(format!(
        "{} steps: {births_ok} births, {rejected} rejected attempts, {collects} collects, {old_age} old-age deaths",
        archive.final_state.step
    ))
}

// 4

fn copy_dir(from: &Path, to: &Path) -> std::io::Result<()> {
    fs::create_dir_all(to)?;
    for entry in fs::read_dir(from)? {
        let entry = entry?;
        let target = to.join(entry.file_name());
        if entry.file_type()?.is_dir() {
            copy_dir(&entry.path(), &target)?;
        } else {
            fs::copy(entry.path(), target)?;
        }
    }
    Ok(())
}

fn run_in(dir: &Path, config: &SimulationConfig) -> Result<RunArchive, String> {
    Simulation::create_in(config.clone(), ScriptedPolicy::new(config), dir)
        .and_then(Simulation::run)
        .map_err(|e| e.to_string())
}

fn determinism_and_resume() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = baseline(7, 30);
    let a = run_in(&tmp.path().join("a"), &config)?;
    run_in(&tmp.path().join("b"), &config)?;
    let read = |d: &str| fs::read(tmp.path().join(d).join(EVENTS_FILE)).map_err(|e| e.to_string());
    let (bytes_a, bytes_b) = (read("a")?, read("b")?);
    ensure!(bytes_a == bytes_b, "events.jsonl differs between equal-seed runs");

    copy_dir(&tmp.path().join("a"), &tmp.path().join("c")).map_err(|e| e.to_string())?;
    let resumed = Simulation::resume_in(tmp.path().join("c"), ScriptedPolicy::new(&config), Some(5))
        .and_then(Simulation::run)
        .map_err(|e| e.to_string())?;
    ensure!(read("c")? == bytes_a, "events.jsonl of the resumed run differs");
    let tail = |ar: &RunArchive| ar.events.iter().filter(|e| e.step >= 5).cloned().collect::<Vec<_>>();
    ensure!(tail(&resumed) == tail(&a), "events from step 5 differ");
    ensure!(resumed.final_state == a.final_state, "final states differ");
    Ok(format!(
        "{} steps, {} events, {} bytes identical",
        a.final_state.step,
        a.events.len(),
        bytes_a.len()
    ))
}

// 5

fn cadence(events: &[EventRecord], social_rounds: u32) -> Result<u32, String> {
    let last = final_step(events);
    for step in 1..=last {
        let rounds: Vec<(u32, Phase, &str)> = events
            .iter()
            .filter(|e| e.step == step && e.is_action())
            .map(|e| (e.round_index.expect("round"), e.phase, e.actor_id.as_deref().expect("actor")))
            .collect();
        ensure!(rounds.windows(2).all(|w| w[0].0 <= w[1].0), "step {step}: rounds out of order");
        for r in 0..=social_rounds {
            let phase = if r < social_rounds { Phase::Social } else { Phase::Production };
            let actors: Vec<&str> = rounds.iter().filter(|x| x.0 == r).map(|x| x.2).collect();
            ensure!(!actors.is_empty(), "step {step}: round {r} missing");
            ensure!(rounds.iter().filter(|x| x.0 == r).all(|x| x.1 == phase), "step {step}: round {r} is not {phase}");
            let unique: BTreeSet<&str> = actors.iter().copied().collect();
            ensure!(unique.len() == actors.len(), "step {step}: an agent acted twice in round {r}");
        }
        ensure!(rounds.iter().all(|x| x.0 <= social_rounds), "step {step}: extra round");
    }
    Ok(last)
}

fn round_cadence() -> Outcome {
    let base = baseline(3, 40);
    let steps_base = cadence(&scripted(&base).events, 2)?;
    let high = apply_variant(&base, Variant::HighSocialCost);
    let steps_high = cadence(&scripted(&high).events, 1)?;
    Ok(format!("2+1 over {steps_base} steps, 1+1 over {steps_high} steps"))
}

// 6

const REJECTED: &str = "Your previous response was rejected";

fn fake_reply(request: &Value, failures: usize) -> FakeReply {
    let messages = request["messages"].as_array().cloned().unwrap_or_default();
    let rejected = messages
        .iter()
        .filter(|m| m["role"] == "user" && m["content"].as_str().is_some_and(|c| c.starts_with(REJECTED)))
        .count();
    if rejected < failures {
        return FakeReply::Content("I would rather not answer in JSON.".into());
    }
    let agent = messages
        .iter()
        .filter_map(|m| m["content"].as_str())
        .find_map(|c| c.split_once("Observation:\n").map(|(_, body)| body.to_string()))
        .and_then(|body| serde_json::from_str::<Value>(&body).ok())
        .and_then(|v| v["self_status"]["agent_id"].as_str().map(String::from))
        .unwrap_or_default();
    let response = PolicyResponse {
        agent_id: agent,
        thinking: "Resting this round.".into(),
        long_term_memory: MemoryDocument::default(),
        short_term_plan: ShortTermPlan::default(),
        action: Action::DoNothing,
    };
    FakeReply::Content(serde_json::to_string(&response).expect("serializes"))
}

fn validation_loop() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut notes = Vec::new();
    for k in 0..=10usize {
        let server = FakeChatServer::with_handler(move |req| fake_reply(req, k)).map_err(|e| e.to_string())?;
        let mut config = baseline(11, 1);
        config.llm.provider_url = server.base_url();
        config.llm.timeout = 10.0;
        let client = HttpChatClient::new(server.base_url(), None, config.llm.timeout);
        let dir = tmp.path().join(format!("k{k}"));
        let archive = Simulation::create_in(config.clone(), LlmPolicy::new(client, &config), &dir)
            .and_then(Simulation::run)
            .map_err(|e| format!("k={k}: run aborted: {e}"))?;
        let entries = read_transcripts(dir.join(TRANSCRIPT_DIR)).map_err(|e| e.to_string())?;
        let actions: Vec<&EventRecord> = archive.events.iter().filter(|e| e.is_action()).collect();
        ensure!(!entries.is_empty() && entries.len() == actions.len(), "k={k}: {} transcripts for {} actions", entries.len(), actions.len());
        ensure!(entries.iter().all(|t| t.exchange.retry_count as usize == k), "k={k}: retry counts {:?}", entries.iter().map(|t| t.exchange.retry_count).collect::<Vec<_>>());
        ensure!(archive.final_state.step == 1, "k={k}: run stopped at step {}", archive.final_state.step);
        let substituted = actions.iter().filter(|e| e.parameters.get("policy_failure").is_some()).count();
        if k < 10 {
            ensure!(entries.iter().all(|t| t.failure.is_none()), "k={k}: unexpected decision failure");
            ensure!(substituted == 0 && archive.decision_failures == 0, "k={k}: {substituted} substitutions");
        } else {
            ensure!(entries.iter().all(|t| t.failure.is_some()), "k=10: a decision succeeded");
            ensure!(
                substituted == actions.len() && actions.iter().all(|e| e.kind == EventKind::DoNothing && !e.is_nullified()),
                "k=10: {substituted} of {} decisions replaced by do_nothing",
                actions.len()
            );
            ensure!(archive.decision_failures as usize == actions.len(), "k=10: failure count {}", archive.decision_failures);
        }
        notes.push(actions.len());
    }
    Ok(format!("k = 0..9 give retry_count = k, k = 10 gives do_nothing for all {} decisions", notes[10]))
}

// 7

fn ids_of(s: &WorldState) -> impl Iterator<Item = String> + '_ {
    s.agents.iter().map(|a| a.agent_id.clone()).chain(s.prey.iter().map(|p| p.prey_id.clone()))
}

fn conservation(e: &EventRecord, hp: &BTreeMap<String, i64>, max_hp: i64) -> Result<(), String> {
    if e.is_nullified() {
        ensure!(e.hp_deltas.is_empty(), "nullified event {} changed HP", e.seq);
        return Ok(());
    }
    let actor = e.actor_id.as_deref().unwrap_or_default();
    let before = |id: &str| hp.get(id).copied().unwrap_or(0);
    let delta = |id: &str| e.hp_deltas.get(id).copied().unwrap_or(0);
    match e.kind {
        EventKind::Allocate => {
            let plan: BTreeMap<String, i64> =
                serde_json::from_value(e.parameters["allocation_plan"].clone()).map_err(|x| x.to_string())?;
            let total: i64 = plan.values().sum();
            ensure!(delta(actor) == -total, "allocate {}: actor paid {}, plan total {total}", e.seq, -delta(actor));
            for (t, amount) in &plan {
                let want = (*amount).min(max_hp - before(t));
                ensure!(delta(t) == want, "allocate {}: {t} got {}, expected {want}", e.seq, delta(t));
            }
        }
        EventKind::Rob => {
            let amount = e.param_i64("requested").expect("requested");
            let target = &e.targets[0];
            if e.draws.is_empty() {
                ensure!(delta(actor) == -1 && delta(target) == 0, "rob {}: cost-only death mismatch", e.seq);
            } else if e.success {
                ensure!(delta(target) == -amount, "rob {}: target lost {}, amount {amount}", e.seq, -delta(target));
                let want = (before(actor) - 1 + amount).min(max_hp) - before(actor);
                ensure!(delta(actor) == want, "rob {}: actor delta {}, expected {want}", e.seq, delta(actor));
            } else {
                ensure!(delta(actor) == -1 && delta(target) == 0, "rob {}: failed rob moved HP", e.seq);
            }
        }
        _ => {}
    }
    Ok(())
}

fn hp_ledger() -> Outcome {
    let (mut steps, mut checked, mut transfers) = (0, 0, 0);
    for seed in [1u64, 7, 42, 2024] {
        let config = baseline(seed, 60);
        let mut sim = Simulation::new(config.clone(), ScriptedPolicy::new(&config)).map_err(|e| e.to_string())?;
        let max_hp = config.max_hp as i64;
        loop {
            let before_state = sim.state.clone();
            let first = sim.events.len();
            let decision = sim.step_once().map_err(|e| e.to_string())?;
            let ids: BTreeSet<String> = ids_of(&before_state).chain(ids_of(&sim.state)).collect();
            let mut running: BTreeMap<String, i64> = ids.iter().map(|id| (id.clone(), before_state.entity_hp(id))).collect();
            for e in &sim.events[first..] {
                conservation(e, &running, max_hp)?;
                if matches!(e.kind, EventKind::Allocate | EventKind::Rob) && !e.is_nullified() {
                    transfers += 1;
                }
                for (id, d) in &e.hp_deltas {
                    *running.entry(id.clone()).or_insert(0) += d;
                }
                checked += 1;
            }
            for id in &ids {
                let (rebuilt, actual) = (running[id], sim.state.entity_hp(id));
                ensure!(rebuilt == actual, "seed {seed} step {}: {id} ledger {rebuilt}, state {actual}", sim.state.step);
                ensure!((0..=max_hp.max(actual)).contains(&actual), "seed {seed}: {id} HP {actual} out of range");
            }
            steps += 1;
            if decision != Termination::Continue {
                break;
            }
        }
    }
    ensure!(transfers > 0, "no allocate or rob executed");
    Ok(format!("{steps} steps reconciled, {checked} events, {transfers} transfers conserved"))
}

// 8

fn analysis_consistency() -> Outcome {
    let archive = scripted(&baseline(42, 80));
    let events = &archive.events;
    let last = final_step(events);
    let series = compute_population_series(events, last).map_err(|e| e.to_string())?;
    let start = series.at(0).ok_or("no step 0 point")?;
    let want: BTreeMap<MoralType, u32> = MoralType::ALL.iter().map(|t| (*t, 2)).collect();
    ensure!(start.counts == want, "step 0 counts {:?}", start.counts);

    let lifespans = compute_lifespans(events, last).map_err(|e| e.to_string())?;
    let deaths = events.iter().filter(|e| e.kind == EventKind::Death).count();
    ensure!(lifespans.completed().count() == deaths, "{} lifespans, {deaths} deaths", lifespans.completed().count());

    let attribution = compute_hp_attribution(events).map_err(|e| e.to_string())?;
    let off = reconcile_final_hp(&attribution, &archive.final_state);
    ensure!(off.is_empty(), "trajectories disagree with final HP: {off:?}");
    let mut summed: BTreeMap<&str, i64> = BTreeMap::new();
    for e in events {
        for (id, d) in &e.hp_deltas {
            *summed.entry(id.as_str()).or_default() += d;
        }
    }
    for a in &archive.final_state.agents {
        let rebuilt = summed.get(a.agent_id.as_str()).copied().unwrap_or(0);
        ensure!(rebuilt == a.hp, "{}: summed deltas {rebuilt}, final HP {}", a.agent_id, a.hp);
    }

    let judged = judge_moral_types(events, &mut OneHotJudge, 2, DEFAULT_DIGEST_BYTES).map_err(|e| e.to_string())?;
    for t in MoralType::ALL {
        for j in MoralType::ALL {
            let want = if t == j { 1.0 } else { 0.0 };
            let got = judged.matrix.cell(t, j).ok_or(format!("no row for {t}"))?;
            ensure!((got - want).abs() < 1e-12, "confusion[{t}][{j}] = {got}");
        }
    }
    Ok(format!(
        "{} agents, {deaths} deaths, identity matrix over {} types",
        archive.final_state.agents.len(),
        judged.matrix.rows.len()
    ))
}

// 9

fn complete(sweep: &SweepResult) -> Result<(), String> {
    let (rows, cols) = (sweep.row_labels.len(), sweep.col_labels.len());
    let keys: BTreeSet<(usize, usize, u32)> = sweep.records.iter().map(|r| (r.row, r.col, r.trial)).collect();
    ensure!(
        sweep.records.len() == rows * cols * sweep.trials as usize && keys.len() == sweep.records.len(),
        "{}: {} records for {rows}x{cols}x{}",
        sweep.name,
        sweep.records.len(),
        sweep.trials
    );
    ensure!(sweep.failures().count() == 0, "{}: failed trials", sweep.name);
    Ok(())
}

fn sweeps(config: &SimulationConfig) -> Result<(SweepResult, Vec<SweepResult>), String> {
    let mut policy = ScriptedPolicy::new(config);
    let invitation = run_invitation_game(&mut policy, config, 3, 9).map_err(|e| e.to_string())?;
    let sharing =
        run_hp_sharing_game(&mut policy, config, &default_hp_grid(config), &LifeStage::ALL, 2, 9).map_err(|e| e.to_string())?;
    Ok((invitation, sharing))
}

fn minigame_shapes() -> Outcome {
    let config = SimulationConfig::baseline();
    let (invitation, sharing) = sweeps(&config)?;
    ensure!(invitation.row_labels.len() == 12 && invitation.col_labels.len() == 12, "invitation grid is not 12x12");
    complete(&invitation)?;
    ensure!(sharing.len() == 8, "{} HP-sharing tables", sharing.len());
    let grid: Vec<String> = default_hp_grid(&config).iter().map(u32::to_string).collect();
    for table in &sharing {
        ensure!(table.row_labels == grid && table.col_labels == grid, "{} does not cover the grid", table.name);
        complete(table)?;
    }
    let selfish: Vec<&SweepResult> = sharing.iter().filter(|t| t.name.contains("selfish")).collect();
    ensure!(selfish.len() == 2, "expected two selfish tables");
    for t in &selfish {
        ensure!(t.records.iter().all(|r| r.value == Some(0.0)), "{} transferred HP", t.name);
    }
    let (again_inv, again_sharing) = sweeps(&config)?;
    ensure!(again_inv == invitation && again_sharing == sharing, "sweeps differ under the same seed");
    Ok(format!(
        "invitation 12x12x{}, {} sharing tables over {} HP levels, selfish transfers 0",
        invitation.trials,
        sharing.len(),
        grid.len()
    ))
}

// 10

/// Every number a rendered prompt may contain under `c`.
fn allowed_numbers(c: &SimulationConfig) -> BTreeSet<String> {
    let typical = ((c.prey_params.hp_mean * c.prey_params.difficulty).round() as i64).max(1);
    let per_hit = (c.pa_mean.floor() as i64).max(1);
    let to_kill = (typical + per_hit - 1) / per_hit + 1;
    [
        c.social_rounds_per_step as i64,
        c.max_age as i64,
        c.max_hp as i64,
        c.metabolic_cost_per_step as i64,
        c.hp_cost_repro as i64,
        c.min_age_repro as i64,
        c.min_hp_repro as i64,
        c.offspring_hp as i64,
        c.plant_params.nutrition as i64,
        c.collect_cap as i64,
        c.plant_params.respawn_delay as i64,
        c.prey_params.counter_damage as i64,
        typical,
        to_kill,
        c.message_max_length as i64,
        c.perception_window as i64,
        c.llm.memory_cap_bytes as i64,
        10,
        90,
        1,
        500,
        3,
    ]
    .iter()
    .map(i64::to_string)
    .collect()
}

fn perturbed() -> SimulationConfig {
    let mut c = SimulationConfig::baseline();
    c.social_rounds_per_step = 4;
    c.max_age = 33;
    c.max_hp = 57;
    c.metabolic_cost_per_step = 2;
    c.hp_cost_repro = 13;
    c.min_age_repro = 6;
    c.min_hp_repro = 17;
    c.offspring_hp = 7;
    c.plant_params.nutrition = 5;
    c.collect_cap = 4;
    c.plant_params.respawn_delay = 11;
    c.prey_params.counter_damage = 9;
    c.prey_params.hp_mean = 6.0;
    c.prey_params.difficulty = 1.5;
    c.pa_mean = 4.0;
    c.message_max_length = 280;
    c.perception_window = 12;
    c.llm.memory_cap_bytes = 8192;
    c.moral_type_visible = false;
    c.llm.reflection_enabled = false;
    c
}

fn prompt_coherence() -> Outcome {
    let assets = PromptAssets::builtin();
    let mut scanned = 0;
    let configs = [
        ("baseline", SimulationConfig::baseline()),
        ("high_social_cost", apply_variant(&SimulationConfig::baseline(), Variant::HighSocialCost)),
        ("perturbed", perturbed()),
    ];
    for (label, c) in &configs {
        c.validate().map_err(|e| format!("{label}: {e}"))?;
        let allowed = allowed_numbers(c);
        let mut texts = vec![assets.reflection_message(c).map_err(|e| e.to_string())?];
        for t in MoralType::ALL {
            texts.push(assets.system_message(c, t).map_err(|e| e.to_string())?);
        }
        for text in &texts {
            for n in numeric_literals(text) {
                ensure!(allowed.contains(&n), "{label}: literal {n} is not implied by the config");
                scanned += 1;
            }
        }
        let joined = texts.join("\n");
        let literals: BTreeSet<String> = numeric_literals(&joined).into_iter().collect();
        for must in [c.max_age, c.max_hp, c.hp_cost_repro, c.min_hp_repro, c.min_age_repro, c.offspring_hp] {
            ensure!(literals.contains(&must.to_string()), "{label}: value {must} never rendered");
        }
    }
    for t in MoralType::ALL {
        ensure!(numeric_literals(&assets.moral[&t]).is_empty(), "{t} prompt carries numbers");
    }
    Ok(format!("{scanned} literals across {} configs, none unexplained", configs.len()))
}
