//! What agents see, what they remember, and how they decide.

pub mod memory;
pub mod observation;
pub mod policy;
pub mod scripted;

pub use memory::{MemoryDocument, RetaliationStage, ShortTermPlan};
pub use observation::{assemble_observation, ObservationBundle, ObservationError, ScenarioBrief};
pub use policy::{
    check_schema, parse_response, validate_context, DecisionFailure, PolicyBackend, PolicyResponse,
    ValidationLimits,
};
pub use scripted::ScriptedPolicy;
