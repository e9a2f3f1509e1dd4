mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tabforge::bpmn::parse_bpmn;
use tabforge::chain::{Chain, Signer, Target, Transaction};
use tabforge::defsm::{compile, reachable_graph, RunStatus};
use tabforge::dmn::parse_dmn;
use tabforge::gateway::dev_genesis;
use tabforge::monitor::{self, engine, Monitor};

use common::*;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn monitor_and_reference_graphs_coincide(seed in any::<u64>()) {
        let Some(g) = generate(&mut rng(seed), "bisim") else { return Ok(()) };
        let pkg = compile(&g.model, &g.tables).unwrap();
        let reference = reachable_graph(&g.model, &g.scripted).unwrap().labelled();
        prop_assert_eq!(monitor_graph(&pkg), reference);
    }

    #[test]
    fn terminal_states_have_empty_markings_and_tokens_stay_single(seed in any::<u64>()) {
        let Some(g) = generate(&mut rng(seed), "terminal") else { return Ok(()) };
        let graph = reachable_graph(&g.model, &g.scripted).unwrap();
        for s in &graph.states {
            prop_assert!(s.marking.values().all(|&n| n == 1), "acyclic models hold at most one token per flow");
            if s.status != RunStatus::Running {
                prop_assert!(s.marking.is_empty());
            }
        }
        for s in graph.terminal_states() {
            prop_assert!(s.status != RunStatus::Running, "a running state without actions is a deadlock");
        }
    }

    /// Random walks over the monitor: every rejection leaves the state hash
    /// alone, aborted runs compensate every completed task in reverse, and the
    /// queried worklist matches the engine on the stored state.
    #[test]
    fn monitor_walks_are_atomic_and_compensate(seed in any::<u64>()) {
        let mut r = rng(seed);
        let Some(g) = generate(&mut r, "walk") else { return Ok(()) };
        let pkg = compile(&g.model, &g.tables).unwrap();
        let id = operator();
        let mut chain = Chain::new(dev_genesis(&id), Arc::new(Monitor));
        let submit = |chain: &mut Chain, target: Target, method: &str, args: serde_json::Value| {
            let nonce = chain.nonce(id.actor()) + 1;
            chain.submit_tx(Transaction::signed(&id, nonce, target, method, args))
        };
        let contract = pkg.package_id.to_string();
        let pkg_json: serde_json::Value = serde_json::from_slice(&pkg.to_bytes()).unwrap();
        prop_assert!(submit(&mut chain, Target::Deploy, "deploy", pkg_json).is_committed());
        let started = submit(&mut chain, Target::Contract(contract.clone()), "start_instance", serde_json::Value::Null);
        if !started.is_committed() {
            return Ok(());
        }
        let inst = monitor::instances(chain.state()).remove(0);
        let all_tasks: Vec<String> = g.model.tasks().map(|t| t.id.clone()).collect();
        for _ in 0..20 {
            let state = monitor::instance(chain.state(), &inst).unwrap();
            let enabled = monitor::enabled_tasks(chain.state(), &inst).unwrap();
            prop_assert_eq!(&enabled, &engine::enabled(&pkg, &state));
            let Some(task) = (if r.gen_bool(0.7) { enabled.choose(&mut r) } else { all_tasks.choose(&mut r) }).cloned() else { break };
            let before = chain.state_hash();
            let receipt = submit(&mut chain, Target::Contract(contract.clone()), "complete_task", monitor::complete_args(&inst, &task, &BTreeMap::new(), &[]));
            if !receipt.is_committed() {
                prop_assert_eq!(chain.state_hash(), before);
                prop_assert_eq!(monitor::instance(chain.state(), &inst).unwrap(), state);
            }
        }
        let state = monitor::instance(chain.state(), &inst).unwrap();
        let unique: BTreeSet<&String> = state.completed_tasks.iter().collect();
        prop_assert_eq!(unique.len(), state.completed_tasks.len());
        if state.status == RunStatus::Completed {
            prop_assert!(state.marking.is_empty());
        }
        if state.status == RunStatus::Aborted {
            let comp: Vec<String> = chain
                .events()
                .iter()
                .filter(|e| e.name == "CompensationRequired")
                .map(|e| e.payload["task"].as_str().unwrap().to_string())
                .collect();
            let mut expected = state.completed_tasks.clone();
            expected.reverse();
            prop_assert_eq!(comp, expected);
        }
        if state.status != RunStatus::Running {
            let h = chain.state_hash();
            for task in &all_tasks {
                let receipt = submit(&mut chain, Target::Contract(contract.clone()), "complete_task", monitor::complete_args(&inst, task, &BTreeMap::new(), &[]));
                prop_assert_eq!(receipt.rejection_code(), Some("InstanceNotRunning"));
            }
            prop_assert_eq!(chain.state_hash(), h);
        }
    }
}

#[test]
fn compilation_is_deterministic_and_injective_on_the_corpus() {
    let table = parse_dmn(&corpus_bytes("inscost.dmn")).unwrap();
    let mut ids = BTreeSet::new();
    for name in ["harvester.bpmn", "minimal.bpmn", "sequence3.bpmn"] {
        let model = parse_bpmn(corpus_bytes(name)).unwrap();
        let tables = if name == "harvester.bpmn" { vec![table.clone()] } else { Vec::new() };
        let a = compile(&model, &tables).unwrap();
        let b = compile(&parse_bpmn(corpus_bytes(name)).unwrap(), &tables).unwrap();
        assert_eq!(a.to_bytes(), b.to_bytes(), "{name}");
        assert!(ids.insert(a.package_id), "{name} collides");
    }
}

#[test]
fn distinct_generated_models_get_distinct_package_ids() {
    let mut r = rng(11);
    let mut by_id = BTreeMap::new();
    for mut g in generate_many(&mut r, 60) {
        // a shared process id, so only structure can tell packages apart
        g.model.id = "same".into();
        g.model.name = "same".into();
        let pkg = compile(&g.model, &g.tables).unwrap();
        let key = serde_json::to_string(&(&g.model, &g.tables)).unwrap();
        if let Some(previous) = by_id.insert(pkg.package_id, key.clone()) {
            assert_eq!(previous, key, "different models share a package id");
        }
    }
    assert!(by_id.len() > 20);
}
