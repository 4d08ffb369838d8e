//! Agent actions and their resolution against the world state.

mod resolve;
mod success;

pub use resolve::{
    resolve, resolve_allocate, resolve_collect, resolve_communicate, resolve_do_nothing,
    resolve_fight, resolve_hunt, resolve_reproduce, resolve_rob, ActionOutcome, Coin, ForcedCoin,
    WorldCoin, INIT_COST,
};
pub use success::{success_probability, DomainError, MAX_SUCCESS, MIN_SUCCESS};

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    Collect,
    Hunt,
    Reproduce,
    Allocate,
    Communicate,
    Fight,
    Rob,
    DoNothing,
}

impl ActionKind {
    pub const ALL: [ActionKind; 8] = [
        ActionKind::Collect,
        ActionKind::Hunt,
        ActionKind::Reproduce,
        ActionKind::Allocate,
        ActionKind::Communicate,
        ActionKind::Fight,
        ActionKind::Rob,
        ActionKind::DoNothing,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ActionKind::Collect => "collect",
            ActionKind::Hunt => "hunt",
            ActionKind::Reproduce => "reproduce",
            ActionKind::Allocate => "allocate",
            ActionKind::Communicate => "communicate",
            ActionKind::Fight => "fight",
            ActionKind::Rob => "rob",
            ActionKind::DoNothing => "do_nothing",
        }
    }
}

impl fmt::Display for ActionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ActionKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ActionKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown action `{s}`"))
    }
}

/// Structured intent attached to a message (used by the invitation game).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Intent {
    Invite,
    Decline,
}

/// A decision as emitted by a policy. The JSON form is tagged by `type`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Action {
    Collect {
        target: String,
        quantity: u32,
    },
    Hunt {
        target: String,
    },
    Reproduce,
    Allocate {
        allocation_plan: BTreeMap<String, u32>,
    },
    Communicate {
        recipients: Vec<String>,
        message: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        intent: Option<Intent>,
    },
    Fight {
        target: String,
    },
    Rob {
        target: String,
        amount: u32,
    },
    DoNothing,
}

impl Action {
    pub fn kind(&self) -> ActionKind {
        match self {
            Action::Collect { .. } => ActionKind::Collect,
            Action::Hunt { .. } => ActionKind::Hunt,
            Action::Reproduce => ActionKind::Reproduce,
            Action::Allocate { .. } => ActionKind::Allocate,
            Action::Communicate { .. } => ActionKind::Communicate,
            Action::Fight { .. } => ActionKind::Fight,
            Action::Rob { .. } => ActionKind::Rob,
            Action::DoNothing => ActionKind::DoNothing,
        }
    }

    /// Every entity the action names.
    pub fn targets(&self) -> Vec<String> {
        match self {
            Action::Collect { target, .. }
            | Action::Hunt { target }
            | Action::Fight { target }
            | Action::Rob { target, .. } => vec![target.clone()],
            Action::Allocate { allocation_plan } => allocation_plan.keys().cloned().collect(),
            Action::Communicate { recipients, .. } => recipients.clone(),
            Action::Reproduce | Action::DoNothing => Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionRequest {
    pub actor_id: String,
    pub action: Action,
}

impl ActionRequest {
    pub fn new(actor_id: impl Into<String>, action: Action) -> Self {
        Self {
            actor_id: actor_id.into(),
            action,
        }
    }
}

/// Social rounds carry interaction; the final round of a step is production.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoundKind {
    Social,
    Production,
}

impl RoundKind {
    pub fn legal_actions(self) -> &'static [ActionKind] {
        match self {
            RoundKind::Social => &[
                ActionKind::Communicate,
                ActionKind::Allocate,
                ActionKind::Fight,
                ActionKind::Rob,
                ActionKind::DoNothing,
            ],
            RoundKind::Production => &[
                ActionKind::Reproduce,
                ActionKind::Hunt,
                ActionKind::Collect,
                ActionKind::DoNothing,
            ],
        }
    }

    pub fn allows(self, kind: ActionKind) -> bool {
        self.legal_actions().contains(&kind)
    }

    pub fn phase(self) -> crate::world::Phase {
        match self {
            RoundKind::Social => crate::world::Phase::Social,
            RoundKind::Production => crate::world::Phase::Production,
        }
    }
}

/// Position of a round within a step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundPhase {
    pub step: u32,
    pub round_index: u32,
    pub kind: RoundKind,
}

impl RoundPhase {
    pub fn social(step: u32, round_index: u32) -> Self {
        Self {
            step,
            round_index,
            kind: RoundKind::Social,
        }
    }

    pub fn production(step: u32, round_index: u32) -> Self {
        Self {
            step,
            round_index,
            kind: RoundKind::Production,
        }
    }

    /// All rounds of one step: `social_rounds` social rounds, then production.
    pub fn rounds_of_step(step: u32, social_rounds: u32) -> Vec<RoundPhase> {
        (0..social_rounds)
            .map(|i| RoundPhase::social(step, i))
            .chain(std::iter::once(RoundPhase::production(step, social_rounds)))
            .collect()
    }

    pub fn legal_actions(&self) -> &'static [ActionKind] {
        self.kind.legal_actions()
    }
}
