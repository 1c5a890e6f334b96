//! Deterministic backend replaying canned replies from a JSON script.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::backend::{AgentRole, BackendError, Capabilities, ChatBackend, ChatRequest};
use crate::error::Result;
use crate::io;

/// `{"vision": bool, "replies": {"planner": [..], "programmer": [..], ...}}`.
///
/// The reply for a request is `replies[role][turn]`. Past the end of a list
/// the last entry repeats; a role without a list is an error.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Script {
    #[serde(default)]
    pub vision: bool,
    pub replies: BTreeMap<AgentRole, Vec<String>>,
}

#[derive(Clone, Debug, Default)]
pub struct ScriptedBackend {
    pub vision: bool,
    replies: BTreeMap<AgentRole, Vec<String>>,
}

impl ScriptedBackend {
    pub fn new(script: Script) -> Self {
        ScriptedBackend { vision: script.vision, replies: script.replies }
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(Self::new(io::read_json(path)?))
    }

    pub fn with_replies(mut self, role: AgentRole, replies: impl IntoIterator<Item = impl Into<String>>) -> Self {
        self.replies.insert(role, replies.into_iter().map(Into::into).collect());
        self
    }
}

impl ChatBackend for ScriptedBackend {
    fn capabilities(&self) -> Capabilities {
        Capabilities { vision: self.vision }
    }

    fn complete(&self, request: &ChatRequest) -> std::result::Result<String, BackendError> {
        let list = self
            .replies
            .get(&request.agent)
            .filter(|l| !l.is_empty())
            .ok_or_else(|| BackendError::Fatal(format!("script has no replies for {}", request.agent.name())))?;
        Ok(list[request.turn.min(list.len() - 1)].clone())
    }
}
