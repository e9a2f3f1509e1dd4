use std::collections::BTreeMap;

use serde::Deserialize;
use serde_json::{json, Value as Json};

use super::engine::{self, Effects};
use super::instance::{doc_signing_bytes, DocRecord, DocSubmission, InstanceState};
use crate::canonical;
use crate::chain::{CallContext, ContractError, Runtime, StateView};
use crate::defsm::DefsmPackage;
use crate::dmn::Value;

/// Registry namespace. The leading `$` keeps transactions from targeting it.
pub const MONITOR_NAMESPACE: &str = "$monitor";

const PACKAGE_KEY: &str = "package";
const SEQ_KEY: &str = "instance_seq";

fn instance_key(id: &str) -> String {
    format!("instance/{id}")
}

fn contract_key(id: &str) -> String {
    format!("contract/{id}")
}

/// Arguments of `complete_task`.
#[derive(Debug, Clone, Deserialize)]
pub struct CompleteArgs {
    pub instance: String,
    pub task: String,
    #[serde(default)]
    pub params: BTreeMap<String, Value>,
    #[serde(default)]
    pub docs: Vec<DocSubmission>,
}

/// Build `complete_task` arguments in the wire form the monitor decodes.
pub fn complete_args(instance: &str, task: &str, params: &BTreeMap<String, Value>, docs: &[DocSubmission]) -> Json {
    json!({"instance": instance, "task": task, "params": params, "docs": docs})
}

/// The process monitor: one contract per deployed package.
#[derive(Debug, Clone, Copy, Default)]
pub struct Monitor;

struct TxEffects<'c, 'a> {
    ctx: &'c mut CallContext<'a>,
    contract: String,
}

impl Effects for TxEffects<'_, '_> {
    fn charge(&mut self, steps: u64) -> Result<(), ContractError> {
        self.ctx.charge(steps)
    }

    fn emit(&mut self, name: &str, payload: Json) {
        self.ctx.emit(&self.contract, name, payload);
    }
}

fn bad_args(e: impl std::fmt::Display) -> ContractError {
    ContractError::new("BadArgs", e.to_string())
}

fn store_instance(ctx: &mut CallContext<'_>, inst: &InstanceState) {
    let bytes = canonical::to_canonical_bytes(inst).expect("instance serializes");
    ctx.put(&inst.contract, &instance_key(&inst.instance_id), bytes);
}

impl Monitor {
    fn start_instance(&self, ctx: &mut CallContext<'_>, contract: &str) -> Result<(), ContractError> {
        let pkg = package(ctx, contract)?;
        let seq = StateView::get(ctx, MONITOR_NAMESPACE, SEQ_KEY)
            .and_then(|b| String::from_utf8(b).ok())
            .and_then(|s| s.parse::<u64>().ok())
            .unwrap_or(0)
            + 1;
        let id = format!("inst-{seq}");
        ctx.put(MONITOR_NAMESPACE, SEQ_KEY, seq.to_string().into_bytes());
        ctx.put(MONITOR_NAMESPACE, &instance_key(&id), contract.as_bytes().to_vec());
        let mut inst = InstanceState::new(id.clone(), contract.to_string());
        ctx.emit(contract, "InstanceStarted", json!({"instance": id}));
        engine::start(&pkg, &mut inst, &mut TxEffects { ctx, contract: contract.to_string() })?;
        store_instance(ctx, &inst);
        Ok(())
    }

    fn complete_task(&self, ctx: &mut CallContext<'_>, contract: &str, args: &Json) -> Result<(), ContractError> {
        let args: CompleteArgs = serde_json::from_value(args.clone()).map_err(bad_args)?;
        let pkg = package(ctx, contract)?;
        let mut inst = instance(ctx, &args.instance)?;
        if inst.contract != contract {
            return Err(ContractError::new("UnknownInstance", format!("{} does not belong to {contract}", args.instance)));
        }
        engine::fire_task(&pkg, &mut inst, &args.task)?;
        for doc in &args.docs {
            ctx.charge(1)?;
            if !ctx.verify_signature(&doc.signer, &doc_signing_bytes(&doc.cid), &doc.signature) {
                return Err(ContractError::new("BadDocSignature", format!("signature by `{}` on {} does not verify", doc.signer, doc.cid)));
            }
            inst.documents.push(DocRecord {
                cid: doc.cid,
                signer: doc.signer.clone(),
                signature: doc.signature.clone(),
                task: args.task.clone(),
                recorded_at: ctx.height(),
            });
        }
        for (k, v) in &args.params {
            inst.variables.set(k.clone(), v.clone());
        }
        let cids: Vec<String> = args.docs.iter().map(|d| d.cid.to_string()).collect();
        ctx.emit(contract, "TaskCompleted", json!({"instance": inst.instance_id, "task": args.task, "doc_cids": cids}));
        engine::propagate(&pkg, &mut inst, &mut TxEffects { ctx, contract: contract.to_string() })?;
        store_instance(ctx, &inst);
        Ok(())
    }
}

impl Runtime for Monitor {
    fn deploy(&self, ctx: &mut CallContext<'_>, args: &Json) -> Result<String, ContractError> {
        let bytes = canonical::to_canonical_bytes(args).map_err(bad_args)?;
        let pkg = DefsmPackage::from_bytes(&bytes).map_err(|e| ContractError::new("MalformedPackage", e.to_string()))?;
        let id = pkg.package_id.to_string();
        if StateView::get(ctx, &id, PACKAGE_KEY).is_some() {
            return Err(ContractError::new("AlreadyDeployed", format!("{id} is already deployed")));
        }
        ctx.charge(pkg.node_table.len() as u64 + pkg.flow_table.len() as u64)?;
        ctx.put(&id, PACKAGE_KEY, pkg.to_bytes());
        ctx.put(MONITOR_NAMESPACE, &contract_key(&id), pkg.process_id.clone().into_bytes());
        ctx.emit(&id, "ContractDeployed", json!({"contract": id, "process": pkg.process_id}));
        Ok(id)
    }

    fn invoke(&self, ctx: &mut CallContext<'_>, contract: &str, method: &str, args: &Json) -> Result<(), ContractError> {
        match method {
            "start_instance" => self.start_instance(ctx, contract),
            "complete_task" => self.complete_task(ctx, contract, args),
            other => Err(ContractError::new("UnknownMethod", format!("no method `{other}`"))),
        }
    }
}

/// The package behind a deployed contract.
pub fn package(view: &dyn StateView, contract: &str) -> Result<DefsmPackage, ContractError> {
    let bytes = view
        .get(contract, PACKAGE_KEY)
        .ok_or_else(|| ContractError::new("UnknownContract", format!("no contract `{contract}`")))?;
    serde_json::from_slice(&bytes).map_err(|e| ContractError::new("MalformedPackage", e.to_string()))
}

/// Deployed contract ids, sorted.
pub fn contracts(view: &dyn StateView) -> Vec<String> {
    view.keys_with_prefix(MONITOR_NAMESPACE, "contract/")
        .into_iter()
        .map(|k| k["contract/".len()..].to_string())
        .collect()
}

/// Instance ids in key order.
pub fn instances(view: &dyn StateView) -> Vec<String> {
    view.keys_with_prefix(MONITOR_NAMESPACE, "instance/")
        .into_iter()
        .map(|k| k["instance/".len()..].to_string())
        .collect()
}

pub fn instance(view: &dyn StateView, id: &str) -> Result<InstanceState, ContractError> {
    let unknown = || ContractError::new("UnknownInstance", format!("no instance `{id}`"));
    let contract = view.get(MONITOR_NAMESPACE, &instance_key(id)).ok_or_else(unknown)?;
    let contract = String::from_utf8(contract).map_err(|_| unknown())?;
    let bytes = view.get(&contract, &instance_key(id)).ok_or_else(unknown)?;
    serde_json::from_slice(&bytes).map_err(|e| ContractError::new("MalformedInstance", e.to_string()))
}

/// User and service tasks that may be completed next, sorted.
pub fn enabled_tasks(view: &dyn StateView, id: &str) -> Result<Vec<String>, ContractError> {
    let inst = instance(view, id)?;
    let pkg = package(view, &inst.contract)?;
    Ok(engine::enabled(&pkg, &inst))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bpmn::parse_bpmn;
    use crate::chain::{Chain, Genesis, Identity, Receipt, Signer, Target, Transaction};
    use crate::defsm::{compile, RunStatus};
    use crate::dmn::parse_dmn;
    use std::sync::Arc;

    struct Rig {
        chain: Chain,
        id: Identity,
        nonce: u64,
    }

    impl Rig {
        fn new() -> Self {
            let id = Identity::from_seed("operator", [7; 32]);
            let genesis = Genesis { chain_id: "test".into(), identities: BTreeMap::from([(id.actor().to_string(), id.public_key())]) };
            Rig { chain: Chain::new(genesis, Arc::new(Monitor)), id, nonce: 0 }
        }

        fn send(&mut self, target: Target, method: &str, args: Json) -> Receipt {
            self.nonce += 1;
            let r = self.chain.submit_tx(Transaction::signed(&self.id, self.nonce, target, method, args));
            if !r.is_committed() {
                self.nonce -= 1;
            }
            r
        }

        fn deploy(&mut self) -> String {
            let model = parse_bpmn(include_str!("../../corpus/harvester.bpmn")).unwrap();
            let table = parse_dmn(include_bytes!("../../corpus/inscost.dmn")).unwrap();
            let pkg = compile(&model, &[table]).unwrap();
            let args: Json = serde_json::from_slice(&pkg.to_bytes()).unwrap();
            assert!(self.send(Target::Deploy, "deploy", args).is_committed());
            pkg.package_id.to_string()
        }

        fn complete(&mut self, c: &str, inst: &str, task: &str, params: &[(&str, &str)]) -> Receipt {
            let params = params.iter().map(|(k, v)| (k.to_string(), Value::parse_literal(v))).collect();
            self.send(Target::Contract(c.into()), "complete_task", complete_args(inst, task, &params, &[]))
        }

        fn tasks(&self, inst: &str) -> Vec<String> {
            enabled_tasks(self.chain.state(), inst).unwrap()
        }
    }

    fn names(r: &Receipt) -> Vec<&str> {
        r.events.iter().map(|e| e.name.as_str()).collect()
    }

    fn drive_to_decision(rig: &mut Rig, c: &str, quote: &str) -> Receipt {
        rig.complete(c, "inst-1", "RecAgr", &[("productId", "\"HV-7720\""), ("price", "10000")]);
        rig.complete(c, "inst-1", "GetTrReq", &[("weight", "14500"), ("city", "\"Christchurch\"")]);
        assert_eq!(rig.tasks("inst-1"), ["GetIns", "GetTransp"]);
        rig.complete(c, "inst-1", "GetTransp", &[("carrier", "\"Kiwi\""), ("cost", "850")]);
        rig.complete(c, "inst-1", "GetIns", &[("quote", quote)])
    }

    #[test]
    fn harvester_proceeds_and_completes() {
        let mut rig = Rig::new();
        let c = rig.deploy();
        assert_eq!(contracts(rig.chain.state()), std::slice::from_ref(&c));
        let r = rig.send(Target::Contract(c.clone()), "start_instance", json!({}));
        assert_eq!(names(&r), ["InstanceStarted"]);
        assert_eq!(rig.tasks("inst-1"), ["RecAgr"]);
        let r = drive_to_decision(&mut rig, &c, "1200");
        assert_eq!(names(&r), ["TaskCompleted", "DecisionEvaluated"]);
        assert_eq!(r.events[1].payload["outcome"]["outcome"], "proceed");
        assert_eq!(rig.tasks("inst-1"), ["DoTransp"]);
        rig.complete(&c, "inst-1", "DoTransp", &[("deliveredOn", "\"2024-05-01\"")]);
        let r = rig.complete(&c, "inst-1", "RevAndFin", &[]);
        assert_eq!(names(&r), ["TaskCompleted", "InstanceCompleted"]);
        let inst = instance(rig.chain.state(), "inst-1").unwrap();
        assert_eq!(inst.status, RunStatus::Completed);
        assert!(inst.marking.is_empty());
        assert_eq!(inst.completed_tasks.len(), 6);
    }

    #[test]
    fn harvester_aborts_with_compensation_in_reverse() {
        let mut rig = Rig::new();
        let c = rig.deploy();
        rig.send(Target::Contract(c.clone()), "start_instance", json!({}));
        let r = drive_to_decision(&mut rig, &c, "2000");
        assert_eq!(
            names(&r),
            ["TaskCompleted", "DecisionEvaluated", "InstanceAborted", "CompensationRequired", "CompensationRequired", "CompensationRequired", "CompensationRequired"]
        );
        let comp: Vec<_> = r.events[3..].iter().map(|e| e.payload["task"].as_str().unwrap()).collect();
        assert_eq!(comp, ["GetIns", "GetTransp", "GetTrReq", "RecAgr"]);
        assert_eq!(r.events[2].payload["reason"], "Failed");
        assert!(rig.tasks("inst-1").is_empty());
        let r = rig.complete(&c, "inst-1", "DoTransp", &[]);
        assert_eq!(r.rejection_code(), Some("InstanceNotRunning"));
    }

    #[test]
    fn rejected_completion_changes_nothing() {
        let mut rig = Rig::new();
        let c = rig.deploy();
        rig.send(Target::Contract(c.clone()), "start_instance", json!({}));
        let before = rig.chain.state_hash();
        let height = rig.chain.height();
        let r = rig.complete(&c, "inst-1", "DoTransp", &[]);
        assert_eq!(r.rejection_code(), Some("NotEnabled"));
        assert_eq!(rig.chain.state_hash(), before);
        assert_eq!(rig.chain.height(), height);
        assert_eq!(rig.complete(&c, "inst-9", "RecAgr", &[]).rejection_code(), Some("UnknownInstance"));
        assert_eq!(rig.send(Target::Contract(c.clone()), "nope", json!({})).rejection_code(), Some("UnknownMethod"));
        assert_eq!(rig.send(Target::Contract(MONITOR_NAMESPACE.into()), "start_instance", json!({})).rejection_code(), Some("UnknownContract"));
    }

    #[test]
    fn missing_decision_input_rejects_whole_tx() {
        let mut rig = Rig::new();
        let c = rig.deploy();
        rig.send(Target::Contract(c.clone()), "start_instance", json!({}));
        rig.complete(&c, "inst-1", "RecAgr", &[("productId", "\"x\"")]);
        rig.complete(&c, "inst-1", "GetTrReq", &[]);
        rig.complete(&c, "inst-1", "GetTransp", &[]);
        let r = rig.complete(&c, "inst-1", "GetIns", &[("quote", "1")]);
        assert!(r.rejection_code().is_some_and(|c| c != "NotEnabled"));
        assert_eq!(rig.tasks("inst-1"), ["GetIns"]);
    }

    #[test]
    fn redeploy_and_malformed_are_rejected() {
        let mut rig = Rig::new();
        let c = rig.deploy();
        let args: Json = serde_json::from_slice(&package(rig.chain.state(), &c).unwrap().to_bytes()).unwrap();
        assert_eq!(rig.send(Target::Deploy, "deploy", args.clone()).rejection_code(), Some("AlreadyDeployed"));
        let mut tampered = args;
        tampered["process_id"] = json!("Other");
        assert_eq!(rig.send(Target::Deploy, "deploy", tampered).rejection_code(), Some("MalformedPackage"));
    }

    #[test]
    fn documents_need_a_registered_signature() {
        let mut rig = Rig::new();
        let c = rig.deploy();
        rig.send(Target::Contract(c.clone()), "start_instance", json!({}));
        let cid = crate::canonical::Digest::of(b"{\"price\":1}");
        let good = DocSubmission { cid, signer: "operator".into(), signature: rig.id.sign(&doc_signing_bytes(&cid)) };
        let mut bad = good.clone();
        bad.signature = rig.id.sign(b"other");
        let params = BTreeMap::new();
        let r = rig.send(Target::Contract(c.clone()), "complete_task", complete_args("inst-1", "RecAgr", &params, &[bad]));
        assert_eq!(r.rejection_code(), Some("BadDocSignature"));
        let r = rig.send(Target::Contract(c.clone()), "complete_task", complete_args("inst-1", "RecAgr", &params, &[good]));
        assert!(r.is_committed());
        assert_eq!(r.events[0].payload["doc_cids"][0], cid.to_string());
        let inst = instance(rig.chain.state(), "inst-1").unwrap();
        assert_eq!(inst.documents[0].task, "RecAgr");
        assert_eq!(inst.documents[0].recorded_at, r.height.unwrap());
    }

    #[test]
    fn resealed_package_with_dangling_guard_is_malformed() {
        let mut rig = Rig::new();
        let model = parse_bpmn(include_str!("../../corpus/harvester.bpmn")).unwrap();
        let mut pkg = compile(&model, &[parse_dmn(include_bytes!("../../corpus/inscost.dmn")).unwrap()]).unwrap();
        let xor = pkg.node_table.iter_mut().find(|n| n.guard.is_some()).unwrap();
        xor.guard.as_mut().unwrap().branches[0].flow_id = "Flow_nowhere".into();
        let pkg = pkg.seal();
        let args: Json = serde_json::from_slice(&pkg.to_bytes()).unwrap();
        assert_eq!(rig.send(Target::Deploy, "deploy", args).rejection_code(), Some("MalformedPackage"));
    }

    #[test]
    fn each_start_is_independent() {
        let mut rig = Rig::new();
        let c = rig.deploy();
        let a = rig.send(Target::Contract(c.clone()), "start_instance", json!({}));
        let b = rig.send(Target::Contract(c.clone()), "start_instance", json!({}));
        assert_eq!(a.events[0].payload["instance"], "inst-1");
        assert_eq!(b.events[0].payload["instance"], "inst-2");
        rig.complete(&c, "inst-1", "RecAgr", &[]);
        assert_eq!(rig.tasks("inst-1"), ["GetTrReq"]);
        assert_eq!(rig.tasks("inst-2"), ["RecAgr"]);
        assert_eq!(instances(rig.chain.state()), ["inst-1", "inst-2"]);
        let unknown = rig.send(Target::Contract("sha256:00".into()), "start_instance", json!({}));
        assert_eq!(unknown.rejection_code(), Some("UnknownContract"));
    }
}
