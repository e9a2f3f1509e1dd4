use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;

use super::crypto::{Ed25519, SignatureScheme};
use super::tx::{Event, Receipt, Target, Transaction, TxStatus};
use crate::canonical::{self, Digest};

pub const GAS_LIMIT: u64 = 1_000_000;

/// Namespace holding per-sender nonces.
pub const CHAIN_NAMESPACE: &str = "$chain";

/// Contract id -> key -> value.
pub type State = BTreeMap<String, BTreeMap<String, Vec<u8>>>;

/// Read access to contract storage.
pub trait StateView {
    fn get(&self, contract: &str, key: &str) -> Option<Vec<u8>>;
    /// Keys of `contract` starting with `prefix`, sorted.
    fn keys_with_prefix(&self, contract: &str, prefix: &str) -> Vec<String>;
}

impl StateView for State {
    fn get(&self, contract: &str, key: &str) -> Option<Vec<u8>> {
        self.get(contract).and_then(|m| m.get(key)).cloned()
    }

    fn keys_with_prefix(&self, contract: &str, prefix: &str) -> Vec<String> {
        self.get(contract)
            .map(|m| m.range(prefix.to_string()..).take_while(|(k, _)| k.starts_with(prefix)).map(|(k, _)| k.clone()).collect())
            .unwrap_or_default()
    }
}

/// SHA-256 over `{contract: {key: hex(value)}}`, canonically encoded.
pub fn state_hash_of(state: &State) -> Digest {
    let view: BTreeMap<&String, BTreeMap<&String, String>> =
        state.iter().map(|(c, kv)| (c, kv.iter().map(|(k, v)| (k, hex::encode(v))).collect())).collect();
    canonical::digest_of(&view).expect("state serializes")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Genesis {
    pub chain_id: String,
    /// Actor id -> hex public key.
    pub identities: BTreeMap<String, String>,
}

impl Genesis {
    pub fn digest(&self) -> Digest {
        canonical::digest_of(self).expect("genesis serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub height: u64,
    pub parent_digest: Digest,
    pub txs: Vec<Transaction>,
    /// State digest after applying `txs`.
    pub state_hash: Digest,
}

impl Block {
    pub fn digest(&self) -> Digest {
        canonical::digest_of(self).expect("block serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[error("{code}: {message}")]
pub struct ContractError {
    pub code: String,
    pub message: String,
}

impl ContractError {
    pub fn new(code: impl Into<String>, message: impl Into<String>) -> Self {
        ContractError { code: code.into(), message: message.into() }
    }
}

/// Contract code run inside transactions. Implementations must be
/// deterministic functions of the context they are given.
pub trait Runtime: Send + Sync {
    /// Install a contract from `args`, returning its id.
    fn deploy(&self, ctx: &mut CallContext<'_>, args: &Json) -> Result<String, ContractError>;
    fn invoke(&self, ctx: &mut CallContext<'_>, contract: &str, method: &str, args: &Json) -> Result<(), ContractError>;
}

/// Everything a contract may observe or change during one transaction.
/// Writes and events are buffered and applied only on success.
pub struct CallContext<'a> {
    state: &'a State,
    writes: BTreeMap<(String, String), Vec<u8>>,
    events: Vec<(String, String, Json)>,
    gas: u64,
    height: u64,
    sender: &'a str,
    tx_digest: Digest,
    identities: &'a BTreeMap<String, String>,
    scheme: &'a dyn SignatureScheme,
}

impl<'a> CallContext<'a> {
    pub fn height(&self) -> u64 {
        self.height
    }

    pub fn sender(&self) -> &str {
        self.sender
    }

    pub fn tx_digest(&self) -> Digest {
        self.tx_digest
    }

    pub fn gas_used(&self) -> u64 {
        self.gas
    }

    pub fn charge(&mut self, steps: u64) -> Result<(), ContractError> {
        self.gas = self.gas.saturating_add(steps);
        if self.gas > GAS_LIMIT {
            return Err(ContractError::new("OutOfGas", format!("exceeded {GAS_LIMIT} steps")));
        }
        Ok(())
    }

    pub fn put(&mut self, contract: &str, key: &str, value: Vec<u8>) {
        self.writes.insert((contract.to_string(), key.to_string()), value);
    }

    pub fn emit(&mut self, contract: &str, name: &str, payload: Json) {
        self.events.push((contract.to_string(), name.to_string(), payload));
    }

    pub fn is_registered(&self, actor: &str) -> bool {
        self.identities.contains_key(actor)
    }

    /// Check `signature` over `message` against `actor`'s genesis key.
    pub fn verify_signature(&self, actor: &str, message: &[u8], signature: &str) -> bool {
        self.identities.get(actor).is_some_and(|pk| self.scheme.verify(pk, message, signature))
    }
}

impl StateView for CallContext<'_> {
    fn get(&self, contract: &str, key: &str) -> Option<Vec<u8>> {
        match self.writes.get(&(contract.to_string(), key.to_string())) {
            Some(v) => Some(v.clone()),
            None => StateView::get(self.state, contract, key),
        }
    }

    fn keys_with_prefix(&self, contract: &str, prefix: &str) -> Vec<String> {
        let mut keys = self.state.keys_with_prefix(contract, prefix);
        keys.extend(
            self.writes.keys().filter(|(c, k)| c == contract && k.starts_with(prefix)).map(|(_, k)| k.clone()),
        );
        keys.sort();
        keys.dedup();
        keys
    }
}

/// A deterministic single-writer chain: one transaction per block.
#[derive(Clone)]
pub struct Chain {
    genesis: Genesis,
    blocks: Vec<Block>,
    state: State,
    receipts: Vec<Receipt>,
    events: Vec<Event>,
    runtime: Arc<dyn Runtime>,
    scheme: Arc<dyn SignatureScheme>,
}

impl std::fmt::Debug for Chain {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Chain").field("chain_id", &self.genesis.chain_id).field("height", &self.height()).finish()
    }
}

fn nonce_key(actor: &str) -> String {
    format!("nonce/{actor}")
}

impl Chain {
    pub fn new(genesis: Genesis, runtime: Arc<dyn Runtime>) -> Self {
        Chain::with_scheme(genesis, runtime, Arc::new(Ed25519))
    }

    pub fn with_scheme(genesis: Genesis, runtime: Arc<dyn Runtime>, scheme: Arc<dyn SignatureScheme>) -> Self {
        let state = State::new();
        let block0 = Block { height: 0, parent_digest: genesis.digest(), txs: Vec::new(), state_hash: state_hash_of(&state) };
        Chain { genesis, blocks: vec![block0], state, receipts: Vec::new(), events: Vec::new(), runtime, scheme }
    }

    pub fn genesis(&self) -> &Genesis {
        &self.genesis
    }

    pub fn height(&self) -> u64 {
        self.blocks.len() as u64 - 1
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn state(&self) -> &State {
        &self.state
    }

    /// Receipts of committed transactions, in block order.
    pub fn receipts(&self) -> &[Receipt] {
        &self.receipts
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    /// Committed transactions in order.
    pub fn tx_log(&self) -> Vec<Transaction> {
        self.blocks.iter().flat_map(|b| b.txs.iter().cloned()).collect()
    }

    pub fn runtime(&self) -> &Arc<dyn Runtime> {
        &self.runtime
    }

    pub fn state_hash(&self) -> Digest {
        state_hash_of(&self.state)
    }

    /// Last committed nonce of `actor` (0 if none).
    pub fn nonce(&self, actor: &str) -> u64 {
        StateView::get(&self.state, CHAIN_NAMESPACE, &nonce_key(actor))
            .and_then(|b| String::from_utf8(b).ok())
            .and_then(|s| s.parse().ok())
            .unwrap_or(0)
    }

    fn reject(tx: &Transaction, code: &str, message: String, gas: u64) -> Receipt {
        Receipt {
            tx_digest: tx.digest(),
            status: TxStatus::Rejected { code: code.to_string(), message },
            events: Vec::new(),
            gas,
            height: None,
        }
    }

    /// Validate and execute `tx`. Committed transactions are appended as a new
    /// block; rejected ones leave the chain untouched.
    pub fn submit_tx(&mut self, tx: Transaction) -> Receipt {
        let registered = self.genesis.identities.get(&tx.sender);
        if !registered.is_some_and(|pk| self.scheme.verify(pk, &tx.signing_bytes(), &tx.signature)) {
            return Self::reject(&tx, "BadSignature", format!("signature by `{}` does not verify", tx.sender), 0);
        }
        let expected = self.nonce(&tx.sender) + 1;
        if tx.nonce != expected {
            return Self::reject(&tx, "BadNonce", format!("nonce {} but expected {expected}", tx.nonce), 0);
        }
        if let Target::Contract(id) = &tx.contract {
            if id.starts_with('$') || !self.state.contains_key(id) {
                return Self::reject(&tx, "UnknownContract", format!("no contract `{id}`"), 0);
            }
        }

        let height = self.height() + 1;
        let digest = tx.digest();
        let mut ctx = CallContext {
            state: &self.state,
            writes: BTreeMap::new(),
            events: Vec::new(),
            gas: 0,
            height,
            sender: &tx.sender,
            tx_digest: digest,
            identities: &self.genesis.identities,
            scheme: self.scheme.as_ref(),
        };
        let result = ctx.charge(1).and_then(|_| match &tx.contract {
            Target::Deploy => self.runtime.deploy(&mut ctx, &tx.args).map(|_| ()),
            Target::Contract(id) => self.runtime.invoke(&mut ctx, id, &tx.method, &tx.args),
        });
        let gas = ctx.gas;
        if let Err(e) = result {
            return Self::reject(&tx, &e.code, e.message, gas);
        }
        let CallContext { writes, events, .. } = ctx;

        for ((contract, key), value) in writes {
            self.state.entry(contract).or_default().insert(key, value);
        }
        self.state
            .entry(CHAIN_NAMESPACE.to_string())
            .or_default()
            .insert(nonce_key(&tx.sender), expected.to_string().into_bytes());

        let events: Vec<Event> = events
            .into_iter()
            .enumerate()
            .map(|(i, (contract, name, payload))| Event { tx_digest: digest, height, contract, name, payload, index: i as u32 })
            .collect();
        let receipt = Receipt { tx_digest: digest, status: TxStatus::Committed, events: events.clone(), gas, height: Some(height) };
        let parent_digest = self.blocks.last().expect("genesis block").digest();
        self.blocks.push(Block { height, parent_digest, txs: vec![tx], state_hash: self.state_hash() });
        self.events.extend(events);
        self.receipts.push(receipt.clone());
        receipt
    }

    /// Recompute the parent links and per-block state digests.
    pub fn verify_hash_chain(&self) -> bool {
        let Some(first) = self.blocks.first() else { return false };
        if first.parent_digest != self.genesis.digest() || first.height != 0 {
            return false;
        }
        self.blocks.windows(2).all(|w| w[1].height == w[0].height + 1 && w[1].parent_digest == w[0].digest())
            && self.blocks.last().is_some_and(|b| b.state_hash == self.state_hash())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::crypto::{Identity, Signer};
    use serde_json::json;

    /// Stores `args.value` under `args.key`; method "fail" rejects; "burn" loops.
    struct KvRuntime;

    impl Runtime for KvRuntime {
        fn deploy(&self, ctx: &mut CallContext<'_>, args: &Json) -> Result<String, ContractError> {
            let id = args["id"].as_str().unwrap_or("kv").to_string();
            if StateView::get(ctx, &id, "deployed").is_some() {
                return Err(ContractError::new("AlreadyDeployed", id));
            }
            ctx.put(&id, "deployed", b"1".to_vec());
            ctx.emit(&id, "ContractDeployed", json!({"contract": id}));
            Ok(id)
        }

        fn invoke(&self, ctx: &mut CallContext<'_>, contract: &str, method: &str, args: &Json) -> Result<(), ContractError> {
            match method {
                "set" => {
                    ctx.put(contract, args["key"].as_str().unwrap(), args["value"].to_string().into_bytes());
                    ctx.emit(contract, "Set", args.clone());
                    Ok(())
                }
                "fail" => {
                    ctx.put(contract, "poison", b"x".to_vec());
                    ctx.emit(contract, "Never", json!({}));
                    Err(ContractError::new("Refused", "always"))
                }
                "burn" => loop {
                    ctx.charge(1)?;
                },
                _ => Err(ContractError::new("UnknownMethod", method)),
            }
        }
    }

    fn setup() -> (Chain, Identity) {
        let id = Identity::from_seed("ba", [9; 32]);
        let genesis = Genesis { chain_id: "test".into(), identities: BTreeMap::from([("ba".into(), id.public_key())]) };
        (Chain::new(genesis, Arc::new(KvRuntime)), id)
    }

    #[test]
    fn empty_state_hash_is_digest_of_empty_object() {
        let (chain, _) = setup();
        assert_eq!(
            chain.state_hash().to_string(),
            "sha256:44136fa355b3678a1146ad16f7e8649e94fb4fc21fe77e8310c060f61caaff8a"
        );
    }

    #[test]
    fn deploy_then_invoke() {
        let (mut chain, id) = setup();
        let r = chain.submit_tx(Transaction::signed(&id, 1, Target::Deploy, "deploy", json!({"id": "kv"})));
        assert!(r.is_committed());
        assert_eq!(r.events[0].name, "ContractDeployed");
        let r = chain.submit_tx(Transaction::signed(&id, 2, Target::Contract("kv".into()), "set", json!({"key": "a", "value": 1})));
        assert!(r.is_committed());
        assert_eq!(r.height, Some(2));
        assert_eq!(chain.height(), 2);
        assert_eq!(StateView::get(chain.state(), "kv", "a"), Some(b"1".to_vec()));
        assert_eq!(chain.nonce("ba"), 2);
        assert!(chain.verify_hash_chain());
    }

    #[test]
    fn rejections_leave_state_untouched() {
        let (mut chain, id) = setup();
        chain.submit_tx(Transaction::signed(&id, 1, Target::Deploy, "deploy", json!({})));
        let before = chain.state_hash();
        let height = chain.height();

        let reused = chain.submit_tx(Transaction::signed(&id, 1, Target::Contract("kv".into()), "set", json!({"key": "a", "value": 1})));
        assert_eq!(reused.rejection_code(), Some("BadNonce"));

        let stranger = Identity::from_seed("eve", [1; 32]);
        let r = chain.submit_tx(Transaction::signed(&stranger, 1, Target::Contract("kv".into()), "set", json!({"key": "a", "value": 1})));
        assert_eq!(r.rejection_code(), Some("BadSignature"));

        let mut forged = Transaction::signed(&id, 2, Target::Contract("kv".into()), "set", json!({"key": "a", "value": 1}));
        forged.args = json!({"key": "a", "value": 2});
        assert_eq!(chain.submit_tx(forged).rejection_code(), Some("BadSignature"));

        let r = chain.submit_tx(Transaction::signed(&id, 2, Target::Contract("nope".into()), "set", json!({})));
        assert_eq!(r.rejection_code(), Some("UnknownContract"));

        let r = chain.submit_tx(Transaction::signed(&id, 2, Target::Contract("kv".into()), "fail", json!({})));
        assert_eq!(r.rejection_code(), Some("Refused"));
        assert!(r.events.is_empty());

        let r = chain.submit_tx(Transaction::signed(&id, 2, Target::Contract("kv".into()), "burn", json!({})));
        assert_eq!(r.rejection_code(), Some("OutOfGas"));
        assert_eq!(r.gas, GAS_LIMIT + 1);

        assert_eq!(chain.state_hash(), before);
        assert_eq!(chain.height(), height);
        assert_eq!(chain.nonce("ba"), 1);
    }

    #[test]
    fn one_byte_changes_the_state_hash() {
        let mut a = State::new();
        a.entry("c".into()).or_default().insert("k".into(), vec![1]);
        let mut b = a.clone();
        b.get_mut("c").unwrap().insert("k".into(), vec![2]);
        assert_ne!(state_hash_of(&a), state_hash_of(&b));
    }

    #[test]
    fn tampered_block_breaks_the_hash_chain() {
        let (mut chain, id) = setup();
        chain.submit_tx(Transaction::signed(&id, 1, Target::Deploy, "deploy", json!({})));
        chain.submit_tx(Transaction::signed(&id, 2, Target::Contract("kv".into()), "set", json!({"key": "a", "value": 1})));
        assert!(chain.verify_hash_chain());
        chain.blocks[1].txs[0].nonce = 7;
        assert!(!chain.verify_hash_chain());
    }
}
