use std::collections::BTreeMap;
use std::fmt;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock, RwLockReadGuard};

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;
use tokio::sync::watch;

use super::cas::{CasError, ContentStore};
use super::http::HttpClient;
use super::resolve::{load_document, resolve_task, ResolveError};
use crate::canonical::Digest;
use crate::chain::{
    append_jsonl, read_jsonl, replay, Chain, ContractError, Event, Genesis, Identity, Receipt, ReplayError, Signer,
    Target, Transaction, TxStatus,
};
use crate::defsm::DefsmPackage;
use crate::dmn::Value;
use crate::monitor::{self, doc_signing_bytes, DocSubmission, InstanceState, Monitor};

/// A failure surfaced to gateway callers: a stable code plus a message.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GatewayError {
    pub code: String,
    pub message: String,
}

impl GatewayError {
    pub fn new(code: impl Into<String>, message: impl Into<String>) -> Self {
        GatewayError { code: code.into(), message: message.into() }
    }
}

impl fmt::Display for GatewayError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}

impl std::error::Error for GatewayError {}

impl From<ContractError> for GatewayError {
    fn from(e: ContractError) -> Self {
        GatewayError::new(e.code, e.message)
    }
}

impl From<ResolveError> for GatewayError {
    fn from(e: ResolveError) -> Self {
        GatewayError::new(e.code(), e.to_string())
    }
}

impl From<CasError> for GatewayError {
    fn from(e: CasError) -> Self {
        GatewayError::new(e.code(), e.to_string())
    }
}

impl From<ReplayError> for GatewayError {
    fn from(e: ReplayError) -> Self {
        GatewayError::new(e.code(), e.to_string())
    }
}

impl From<io::Error> for GatewayError {
    fn from(e: io::Error) -> Self {
        GatewayError::new("StorageError", e.to_string())
    }
}

/// On-disk chain: genesis, committed transactions and their receipts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainFiles {
    pub genesis: PathBuf,
    pub log: PathBuf,
    pub receipts: PathBuf,
}

impl ChainFiles {
    /// `chain.jsonl` gets `chain.genesis.json` and `chain.receipts.jsonl` beside it.
    pub fn beside(log: impl AsRef<Path>) -> Self {
        let log = log.as_ref().to_path_buf();
        let stem = log.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "chain".into());
        ChainFiles {
            genesis: log.with_file_name(format!("{stem}.genesis.json")),
            receipts: log.with_file_name(format!("{stem}.receipts.jsonl")),
            log,
        }
    }

    /// Read the genesis, creating one that registers `identity` if absent.
    pub fn load_or_init_genesis(&self, identity: &Identity) -> Result<Genesis, GatewayError> {
        if self.genesis.exists() {
            let text = std::fs::read_to_string(&self.genesis)?;
            return serde_json::from_str(&text).map_err(|e| GatewayError::new("MalformedGenesis", e.to_string()));
        }
        let genesis = dev_genesis(identity);
        if let Some(dir) = self.genesis.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let text = crate::canonical::to_canonical_string(&genesis).expect("genesis serializes");
        std::fs::write(&self.genesis, text)?;
        Ok(genesis)
    }

    /// Replay the log, checking every recorded receipt.
    pub fn open(&self, genesis: Genesis) -> Result<Chain, GatewayError> {
        let log: Vec<Transaction> = read_jsonl(&self.log)?;
        let receipts: Vec<Receipt> = read_jsonl(&self.receipts)?;
        Ok(replay(genesis, Arc::new(Monitor), &log, Some(&receipts))?)
    }
}

pub fn dev_genesis(identity: &Identity) -> Genesis {
    Genesis {
        chain_id: "tabforge-dev".into(),
        identities: BTreeMap::from([(identity.actor().to_string(), identity.public_key())]),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DocStatus {
    Intact,
    Tampered,
    Missing,
    BadSignature,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocAudit {
    pub cid: Digest,
    pub task: String,
    pub signer: String,
    pub status: DocStatus,
}

/// Off-chain front end: resolves bindings, signs and submits transactions,
/// stores documents and answers queries.
pub struct Gateway {
    chain: RwLock<Chain>,
    cas: Arc<dyn ContentStore>,
    identity: Identity,
    http: Arc<dyn HttpClient>,
    files: Option<ChainFiles>,
    height_seen: watch::Sender<u64>,
}

impl Gateway {
    pub fn new(chain: Chain, cas: Arc<dyn ContentStore>, identity: Identity, http: Arc<dyn HttpClient>) -> Self {
        let (height_seen, _) = watch::channel(chain.height());
        Gateway { chain: RwLock::new(chain), cas, identity, http, files: None, height_seen }
    }

    /// Append every committed transaction and receipt to `files`.
    pub fn persist_to(mut self, files: ChainFiles) -> Self {
        self.files = Some(files);
        self
    }

    pub fn chain(&self) -> RwLockReadGuard<'_, Chain> {
        self.chain.read().expect("chain lock")
    }

    pub fn cas(&self) -> &dyn ContentStore {
        self.cas.as_ref()
    }

    pub fn identity(&self) -> &Identity {
        &self.identity
    }

    /// Sign and submit as the gateway identity. Rejections become errors.
    pub fn submit(&self, target: Target, method: &str, args: Json) -> Result<Receipt, GatewayError> {
        let mut chain = self.chain.write().expect("chain lock");
        let nonce = chain.nonce(self.identity.actor()) + 1;
        let tx = Transaction::signed(&self.identity, nonce, target, method, args);
        let receipt = chain.submit_tx(tx.clone());
        if let TxStatus::Rejected { code, message } = &receipt.status {
            return Err(GatewayError::new(code.clone(), message.clone()));
        }
        if let Some(files) = &self.files {
            append_jsonl(&files.log, &[tx])?;
            append_jsonl(&files.receipts, std::slice::from_ref(&receipt))?;
        }
        self.height_seen.send_replace(chain.height());
        Ok(receipt)
    }

    pub fn deploy(&self, pkg: &DefsmPackage) -> Result<String, GatewayError> {
        let args: Json = serde_json::from_slice(&pkg.to_bytes()).expect("package is JSON");
        self.submit(Target::Deploy, "deploy", args)?;
        Ok(pkg.package_id.to_string())
    }

    pub fn start(&self, contract: &str) -> Result<String, GatewayError> {
        let receipt = self.submit(Target::Contract(contract.to_string()), "start_instance", Json::Null)?;
        let started = receipt.events.iter().find(|e| e.name == "InstanceStarted").expect("start emits InstanceStarted");
        Ok(started.payload["instance"].as_str().expect("instance id").to_string())
    }

    /// Resolve the task's bindings against `doc_cids`, then sign and submit.
    /// Resolution failures never reach the chain.
    pub fn complete(
        &self,
        instance: &str,
        task: &str,
        params: BTreeMap<String, Value>,
        doc_cids: &[Digest],
    ) -> Result<Receipt, GatewayError> {
        let (inst, pkg, enabled) = {
            let chain = self.chain();
            let inst = monitor::instance(chain.state(), instance)?;
            let pkg = monitor::package(chain.state(), &inst.contract)?;
            let enabled = monitor::enabled_tasks(chain.state(), instance)?;
            (inst, pkg, enabled)
        };
        let mut docs = Vec::with_capacity(doc_cids.len());
        for cid in doc_cids {
            docs.push((*cid, load_document(self.cas.as_ref(), cid)?));
        }
        let mut vars = params;
        if enabled.iter().any(|t| t == task) {
            let node = pkg.node(task).expect("enabled task is in the package");
            for (name, value) in resolve_task(node, &docs, &vars, &inst.variables, self.cas.as_ref(), self.http.as_ref())? {
                match vars.get(&name) {
                    Some(given) if *given != value => {
                        return Err(ResolveError::Collision(name).into());
                    }
                    _ => {
                        vars.insert(name, value);
                    }
                }
            }
        }
        let submissions: Vec<DocSubmission> = doc_cids
            .iter()
            .map(|cid| DocSubmission {
                cid: *cid,
                signer: self.identity.actor().to_string(),
                signature: self.identity.sign(&doc_signing_bytes(cid)),
            })
            .collect();
        let args = monitor::complete_args(instance, task, &vars, &submissions);
        self.submit(Target::Contract(inst.contract), "complete_task", args)
    }

    pub fn put_document(&self, bytes: &[u8]) -> Result<Digest, GatewayError> {
        Ok(self.cas.put(bytes)?)
    }

    pub fn document(&self, cid: &Digest) -> Result<Vec<u8>, GatewayError> {
        Ok(self.cas.get(cid)?)
    }

    pub fn contracts(&self) -> Vec<String> {
        monitor::contracts(self.chain().state())
    }

    pub fn package(&self, contract: &str) -> Result<DefsmPackage, GatewayError> {
        Ok(monitor::package(self.chain().state(), contract)?)
    }

    pub fn instance(&self, id: &str) -> Result<InstanceState, GatewayError> {
        Ok(monitor::instance(self.chain().state(), id)?)
    }

    pub fn tasks(&self, id: &str) -> Result<Vec<String>, GatewayError> {
        Ok(monitor::enabled_tasks(self.chain().state(), id)?)
    }

    pub fn state_hash(&self) -> Digest {
        self.chain().state_hash()
    }

    /// An instance's events in blocks `from_height..`, in (block, index)
    /// order, plus the height to resume from.
    pub fn events(&self, instance: &str, from_height: u64) -> Result<(Vec<Event>, u64), GatewayError> {
        let chain = self.chain();
        monitor::instance(chain.state(), instance)?;
        let picked = chain
            .events()
            .iter()
            .filter(|e| e.height >= from_height)
            .filter(|e| e.payload.get("instance").and_then(Json::as_str) == Some(instance))
            .cloned()
            .collect();
        Ok((picked, chain.height().max(from_height.saturating_sub(1)) + 1))
    }

    /// Every event of the chain, in order.
    pub fn all_events(&self) -> Vec<Event> {
        self.chain().events().to_vec()
    }

    /// Tracks the committed height.
    pub fn subscribe(&self) -> watch::Receiver<u64> {
        self.height_seen.subscribe()
    }

    /// Re-hash every document recorded on the instance and re-check its signature.
    pub fn audit(&self, instance: &str) -> Result<Vec<DocAudit>, GatewayError> {
        let chain = self.chain();
        let inst = monitor::instance(chain.state(), instance)?;
        let identities = &chain.genesis().identities;
        let scheme = crate::chain::Ed25519;
        Ok(inst
            .documents
            .iter()
            .map(|d| {
                let signed = identities.get(&d.signer).is_some_and(|pk| {
                    crate::chain::SignatureScheme::verify(&scheme, pk, &doc_signing_bytes(&d.cid), &d.signature)
                });
                let status = if !signed {
                    DocStatus::BadSignature
                } else {
                    match self.cas.get(&d.cid) {
                        Err(_) => DocStatus::Missing,
                        Ok(bytes) if Digest::of(&bytes) != d.cid => DocStatus::Tampered,
                        Ok(_) => DocStatus::Intact,
                    }
                };
                DocAudit { cid: d.cid, task: d.task.clone(), signer: d.signer.clone(), status }
            })
            .collect())
    }
}
