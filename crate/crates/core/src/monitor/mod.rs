//! The on-chain process monitor: executes deployed packages, records
//! document hashes and emits lifecycle events.

pub mod contract;
pub mod engine;
pub mod instance;

pub use contract::{
    complete_args, contracts, enabled_tasks, instance, instances, package, CompleteArgs, Monitor, MONITOR_NAMESPACE,
};
pub use engine::Effects;
pub use instance::{doc_signing_bytes, DocRecord, DocSubmission, InstanceState};
