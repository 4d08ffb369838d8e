//! Seed-reproducible multi-agent simulation of moral evolution among
//! hunter-gatherer agents, with scripted or LLM-driven policies.

pub mod action;
pub mod analysis;
pub mod cli;
pub mod cognition;
pub mod config;
pub mod moral;
pub mod rng;
pub mod world;
pub mod engine;
pub mod llm;
pub mod minigames;
