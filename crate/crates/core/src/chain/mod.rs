//! A deterministic simulated blockchain: signed, totally ordered transactions,
//! per-contract key-value state, events and replay.

pub mod crypto;
pub mod ledger;
pub mod replay;
pub mod tx;

pub use crypto::{Ed25519, Identity, KeyFileError, SignatureScheme, Signer};
pub use ledger::{
    state_hash_of, Block, CallContext, Chain, ContractError, Genesis, Runtime, State, StateView, CHAIN_NAMESPACE, GAS_LIMIT,
};
pub use replay::{append_jsonl, read_jsonl, replay, write_jsonl, ReplayError};
pub use tx::{Event, Receipt, Target, Transaction, TxStatus};
