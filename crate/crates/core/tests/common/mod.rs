//! Helpers shared by the integration targets: corpus access, a gateway over
//! the harvester model, a random model generator and a marking-graph explorer
//! that drives the monitor contract through real transactions.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::path::PathBuf;
use std::sync::Arc;

use rand::Rng;
use tabforge::bpmn::{has_errors, parse_bpmn, validate, EndKind, FlowNode, NodeKind, ProcessModel, SequenceFlow};
use tabforge::chain::{Chain, Identity, Signer, Target, Transaction};
use tabforge::defsm::{compile, check_bounds, DefsmPackage, GraphState, LabelledGraph, ScriptedOutcomes};
use tabforge::dmn::{parse_dmn, DecisionTable, HitPolicy, OutputClause, Rule, Value};
use tabforge::gateway::{dev_genesis, ContentStore, Gateway, MemoryCas, UreqClient};
use tabforge::monitor::{self, Monitor};

pub fn corpus(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("corpus").join(name)
}

pub fn corpus_bytes(name: &str) -> Vec<u8> {
    std::fs::read(corpus(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn operator() -> Identity {
    Identity::from_seed("operator", [7u8; 32])
}

pub fn harvester_package() -> DefsmPackage {
    let model = parse_bpmn(corpus_bytes("harvester.bpmn")).expect("harvester parses");
    let table = parse_dmn(&corpus_bytes("inscost.dmn")).expect("inscost parses");
    compile(&model, &[table]).expect("harvester compiles")
}

pub fn gateway_with(cas: Arc<dyn ContentStore>) -> Gateway {
    let id = operator();
    let chain = Chain::new(dev_genesis(&id), Arc::new(Monitor));
    Gateway::new(chain, cas, id, Arc::new(UreqClient::default()))
}

pub fn memory_gateway() -> Gateway {
    gateway_with(Arc::new(MemoryCas::new()))
}

/// Documents attached to each harvester task on the happy path.
pub const HARVESTER_DOCS: [(&str, Option<&str>); 6] = [
    ("RecAgr", Some("salesagr.json")),
    ("GetTrReq", Some("trrequirements.json")),
    ("GetIns", Some("insurance.json")),
    ("GetTransp", Some("transport.json")),
    ("DoTransp", Some("delivery.json")),
    ("RevAndFin", None),
];

/// Complete `task` attaching the named corpus document, if any.
pub fn complete_with_doc(gw: &Gateway, inst: &str, task: &str, doc: Option<&str>) -> Result<(), String> {
    let cids = match doc {
        Some(name) => vec![gw.put_document(&corpus_bytes(&format!("docs/{name}"))).map_err(|e| e.code)?],
        None => Vec::new(),
    };
    gw.complete(inst, task, BTreeMap::new(), &cids).map(|_| ()).map_err(|e| e.code)
}

// ---------------------------------------------------------------------------
// Random block-structured models

/// A generated model with its decision tables and the outcomes they produce.
#[derive(Debug, Clone)]
pub struct Generated {
    pub model: ProcessModel,
    pub tables: Vec<DecisionTable>,
    pub scripted: ScriptedOutcomes,
}

const LETTERS: [&str; 3] = ["a", "b", "c"];

struct Builder<'r, R: Rng> {
    rng: &'r mut R,
    nodes: Vec<FlowNode>,
    flows: Vec<SequenceFlow>,
    tables: Vec<DecisionTable>,
    scripted: BTreeMap<String, BTreeMap<String, Value>>,
    counter: usize,
    splits: usize,
}

impl<R: Rng> Builder<'_, R> {
    fn fresh(&mut self, prefix: &str) -> String {
        self.counter += 1;
        format!("{prefix}{:02}", self.counter)
    }

    fn node(&mut self, prefix: &str, kind: NodeKind) -> String {
        let id = self.fresh(prefix);
        self.nodes.push(FlowNode::new(id.clone(), kind));
        id
    }

    fn link(&mut self, from: &str, to: &str, condition: Option<String>, is_default: bool) {
        let id = self.fresh("f");
        let mut flow = SequenceFlow::new(id, from, to);
        flow.condition = condition;
        flow.is_default = is_default;
        self.flows.push(flow);
    }

    /// A sequence of fragments. Returns entry and exit; no exit when every
    /// path inside ends in an error end.
    fn sequence(&mut self, depth: usize) -> (String, Option<String>) {
        let len = self.rng.gen_range(1..=if depth == 0 { 3 } else { 2 });
        let (entry, mut exit) = self.fragment(depth);
        for _ in 1..len {
            let Some(at) = exit.clone() else { break };
            let (e, x) = self.fragment(depth);
            self.link(&at, &e, None, false);
            exit = x;
        }
        (entry, exit)
    }

    fn fragment(&mut self, depth: usize) -> (String, Option<String>) {
        // gateways are likelier near the root, where the node budget is still open
        let (par, xor) = if depth == 0 { (4, 8) } else { (2, 4) };
        let roll = self.rng.gen_range(0..10);
        if depth < 2 && roll < par && self.splits < 2 {
            self.parallel(depth)
        } else if depth < 2 && roll < xor {
            self.exclusive(depth)
        } else {
            let id = self.node("T", NodeKind::UserTask);
            (id.clone(), Some(id))
        }
    }

    fn parallel(&mut self, depth: usize) -> (String, Option<String>) {
        self.splits += 1;
        let split = self.node("P", NodeKind::ParallelGateway);
        let mut live = Vec::new();
        for _ in 0..if self.rng.gen_bool(0.8) { 2 } else { 3 } {
            let (e, x) = self.sequence(depth + 1);
            self.link(&split, &e, None, false);
            live.extend(x);
        }
        (split, self.merge("J", NodeKind::ParallelGateway, live))
    }

    fn exclusive(&mut self, depth: usize) -> (String, Option<String>) {
        let rule_task = self.node("D", NodeKind::BusinessRuleTask);
        let decision = format!("dec_{rule_task}");
        let var = format!("o_{rule_task}");
        let produced = LETTERS[self.rng.gen_range(0..3)];
        self.tables.push(DecisionTable {
            id: decision.clone(),
            name: decision.clone(),
            hit_policy: HitPolicy::First,
            inputs: Vec::new(),
            outputs: vec![OutputClause { name: var.clone() }],
            rules: vec![Rule { input_entries: Vec::new(), output_entries: vec![format!("\"{produced}\"")] }],
        });
        self.scripted.insert(decision.clone(), BTreeMap::from([(var.clone(), Value::text(produced))]));
        self.nodes.last_mut().expect("just pushed").decision_ref = Some(decision);

        let split = self.node("X", NodeKind::ExclusiveGateway);
        self.link(&rule_task, &split, None, false);
        let branches = self.rng.gen_range(2..=3);
        let with_default = self.rng.gen_bool(0.5);
        let mut live = Vec::new();
        for b in 0..branches {
            let is_default = with_default && b == branches - 1;
            let condition = (!is_default).then(|| match self.rng.gen_range(0..12) {
                // ordering against text is a type error at run time
                0 => format!("{var} < 1"),
                1 => format!("{var} = 1"),
                2 => format!("{var} != \"{}\"", LETTERS[self.rng.gen_range(0..3)]),
                _ => format!("{var} = \"{}\"", LETTERS[self.rng.gen_range(0..3)]),
            });
            if self.rng.gen_bool(0.25) {
                let end = self.node("E", NodeKind::EndEvent(EndKind::Error));
                self.link(&split, &end, condition, is_default);
            } else {
                let (e, x) = self.sequence(depth + 1);
                self.link(&split, &e, condition, is_default);
                live.extend(x);
            }
        }
        (rule_task, self.merge("M", NodeKind::ExclusiveGateway, live))
    }

    /// Join live branch exits; a single survivor continues unjoined.
    fn merge(&mut self, prefix: &str, kind: NodeKind, live: Vec<String>) -> Option<String> {
        match live.len() {
            0 => None,
            1 => live.into_iter().next(),
            _ => {
                let join = self.node(prefix, kind);
                for x in &live {
                    self.link(x, &join, None, false);
                }
                Some(join)
            }
        }
    }
}

/// Nodes of any kind, events included.
pub const MAX_GENERATED_NODES: usize = 12;

/// Draw a random valid model within the exploration bounds, or `None` when
/// this draw fails a bound or validation.
pub fn generate<R: Rng>(rng: &mut R, name: &str) -> Option<Generated> {
    let mut b = Builder {
        rng,
        nodes: Vec::new(),
        flows: Vec::new(),
        tables: Vec::new(),
        scripted: BTreeMap::new(),
        counter: 0,
        splits: 0,
    };
    let start = b.node("S", NodeKind::StartEvent);
    let (entry, exit) = b.sequence(0);
    b.link(&start, &entry, None, false);
    if let Some(x) = exit {
        let end = b.node("End", NodeKind::EndEvent(EndKind::Normal));
        b.link(&x, &end, None, false);
    }
    let model = ProcessModel {
        id: name.to_string(),
        name: name.to_string(),
        nodes: b.nodes,
        flows: b.flows,
        data_objects: Vec::new(),
        associations: Vec::new(),
    };
    if model.nodes.len() > MAX_GENERATED_NODES || check_bounds(&model).is_err() || has_errors(&validate(&model)) {
        return None;
    }
    compile(&model, &b.tables).ok()?;
    Some(Generated { model, tables: b.tables, scripted: ScriptedOutcomes(b.scripted) })
}

/// Keep drawing until `count` models are produced; panics if the generator
/// rejects almost everything.
pub fn generate_many<R: Rng>(rng: &mut R, count: usize) -> Vec<Generated> {
    let mut out = Vec::new();
    let mut attempts = 0;
    while out.len() < count {
        attempts += 1;
        assert!(attempts < count * 50, "generator rejected {attempts} draws");
        if let Some(g) = generate(rng, &format!("gen{}", out.len())) {
            out.push(g);
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Monitor marking graph

fn submit(chain: &mut Chain, id: &Identity, target: Target, method: &str, args: serde_json::Value) -> Result<tabforge::chain::Receipt, String> {
    let nonce = chain.nonce(id.actor()) + 1;
    let receipt = chain.submit_tx(Transaction::signed(id, nonce, target, method, args));
    match receipt.rejection_code() {
        Some(code) => Err(code.to_string()),
        None => Ok(receipt),
    }
}

/// Explore every interleaving of task completions by cloning the chain, one
/// completion transaction per edge.
pub fn monitor_graph(pkg: &DefsmPackage) -> LabelledGraph {
    let id = operator();
    let mut chain = Chain::new(dev_genesis(&id), Arc::new(Monitor));
    let pkg_json: serde_json::Value = serde_json::from_slice(&pkg.to_bytes()).unwrap();
    submit(&mut chain, &id, Target::Deploy, "deploy", pkg_json).expect("deploy commits");
    let contract = pkg.package_id.to_string();
    let mut graph = LabelledGraph { initial: Err(String::new()), states: BTreeSet::new(), edges: BTreeSet::new() };
    let receipt = match submit(&mut chain, &id, Target::Contract(contract.clone()), "start_instance", serde_json::Value::Null) {
        Ok(r) => r,
        Err(code) => {
            graph.initial = Err(code);
            return graph;
        }
    };
    let inst = receipt.events.iter().find(|e| e.name == "InstanceStarted").unwrap().payload["instance"].as_str().unwrap().to_string();
    let label = |c: &Chain| {
        let s = monitor::instance(c.state(), &inst).unwrap();
        GraphState { marking: s.marking, status: s.status, variables: s.variables }.label()
    };
    let first = label(&chain);
    graph.initial = Ok(first.clone());
    graph.states.insert(first.clone());
    let mut queue = VecDeque::from([(first, chain)]);
    while let Some((from, chain)) = queue.pop_front() {
        for task in monitor::enabled_tasks(chain.state(), &inst).unwrap() {
            let mut next = chain.clone();
            let args = monitor::complete_args(&inst, &task, &BTreeMap::new(), &[]);
            let to = submit(&mut next, &id, Target::Contract(contract.clone()), "complete_task", args).map(|_| label(&next));
            if let Ok(l) = &to {
                if graph.states.insert(l.clone()) {
                    queue.push_back((l.clone(), next));
                }
            }
            graph.edges.insert((from.clone(), task, to));
        }
    }
    graph
}
