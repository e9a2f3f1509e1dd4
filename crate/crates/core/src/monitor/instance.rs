use serde::{Deserialize, Serialize};

use crate::canonical::Digest;
use crate::defsm::{Marking, RunStatus};
use crate::dmn::Context;

/// A document registered on chain: only its cid and signature live here.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocRecord {
    pub cid: Digest,
    pub signer: String,
    /// Hex signature over the cid's text form.
    pub signature: String,
    pub task: String,
    pub recorded_at: u64,
}

/// What a caller submits; the monitor adds `task` and `recorded_at`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocSubmission {
    pub cid: Digest,
    pub signer: String,
    pub signature: String,
}

/// The message a document signature covers.
pub fn doc_signing_bytes(cid: &Digest) -> Vec<u8> {
    cid.to_string().into_bytes()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceState {
    pub instance_id: String,
    pub contract: String,
    pub marking: Marking,
    pub variables: Context,
    pub documents: Vec<DocRecord>,
    pub status: RunStatus,
    pub completed_tasks: Vec<String>,
}

impl InstanceState {
    pub fn new(instance_id: String, contract: String) -> Self {
        InstanceState {
            instance_id,
            contract,
            marking: Marking::new(),
            variables: Context::new(),
            documents: Vec::new(),
            status: RunStatus::Running,
            completed_tasks: Vec::new(),
        }
    }
}
