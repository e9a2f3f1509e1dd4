use serde::{Deserialize, Serialize};
use serde_json::{json, Value as Json};

use super::crypto::Signer;
use crate::canonical::{self, Digest};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Target {
    Deploy,
    Contract(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transaction {
    pub sender: String,
    pub nonce: u64,
    pub contract: Target,
    pub method: String,
    pub args: Json,
    /// Hex signature over [`Transaction::signing_bytes`].
    pub signature: String,
}

impl Transaction {
    pub fn signed(signer: &dyn Signer, nonce: u64, contract: Target, method: &str, args: Json) -> Self {
        let mut tx = Transaction {
            sender: signer.actor().to_string(),
            nonce,
            contract,
            method: method.to_string(),
            args,
            signature: String::new(),
        };
        tx.signature = signer.sign(&tx.signing_bytes());
        tx
    }

    /// Canonical encoding of everything but the signature.
    pub fn signing_bytes(&self) -> Vec<u8> {
        let body = json!({
            "sender": self.sender,
            "nonce": self.nonce,
            "contract": self.contract,
            "method": self.method,
            "args": self.args,
        });
        canonical::to_canonical_bytes(&body).expect("json serializes")
    }

    pub fn to_canonical_line(&self) -> String {
        canonical::to_canonical_string(self).expect("transaction serializes")
    }

    pub fn digest(&self) -> Digest {
        Digest::of(self.to_canonical_line().as_bytes())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub tx_digest: Digest,
    pub height: u64,
    pub contract: String,
    pub name: String,
    pub payload: Json,
    /// Position within the emitting transaction.
    pub index: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum TxStatus {
    Committed,
    Rejected { code: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Receipt {
    pub tx_digest: Digest,
    pub status: TxStatus,
    pub events: Vec<Event>,
    pub gas: u64,
    /// Block height for committed transactions.
    pub height: Option<u64>,
}

impl Receipt {
    pub fn is_committed(&self) -> bool {
        self.status == TxStatus::Committed
    }

    pub fn rejection_code(&self) -> Option<&str> {
        match &self.status {
            TxStatus::Rejected { code, .. } => Some(code),
            TxStatus::Committed => None,
        }
    }
}
