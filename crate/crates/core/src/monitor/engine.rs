//! Executes a compiled package's tables against an instance.

use serde_json::{json, Map, Value as Json};

use super::instance::InstanceState;
use crate::bpmn::{EndKind, NodeKind};
use crate::chain::ContractError;
use crate::defsm::{CompiledNode, DefsmPackage, RunStatus};
use crate::dmn::{evaluate_table_metered, feel, Outcome, Value};

/// Gas meter plus event sink supplied by the caller.
pub trait Effects {
    fn charge(&mut self, steps: u64) -> Result<(), ContractError>;
    fn emit(&mut self, name: &str, payload: Json);
}

fn add(inst: &mut InstanceState, flow: &str) {
    *inst.marking.entry(flow.to_string()).or_insert(0) += 1;
}

fn take(inst: &mut InstanceState, flow: &str) {
    if let Some(n) = inst.marking.get_mut(flow) {
        *n -= 1;
        if *n == 0 {
            inst.marking.remove(flow);
        }
    }
}

fn has_token(inst: &InstanceState, flow: &str) -> bool {
    inst.marking.get(flow).is_some_and(|n| *n > 0)
}

fn is_ready(inst: &InstanceState, node: &CompiledNode) -> bool {
    match node.kind {
        NodeKind::ParallelGateway => !node.incoming.is_empty() && node.incoming.iter().all(|f| has_token(inst, f)),
        NodeKind::ExclusiveGateway | NodeKind::BusinessRuleTask | NodeKind::EndEvent(_) => {
            node.incoming.iter().any(|f| has_token(inst, f))
        }
        _ => false,
    }
}

pub fn outcome_json(outcome: &Outcome) -> Json {
    Json::Object(outcome.iter().map(|(k, v)| (k.clone(), v.to_json())).collect::<Map<_, _>>())
}

fn select_flow(node: &CompiledNode, inst: &InstanceState) -> Result<String, ContractError> {
    let Some(guard) = &node.guard else {
        return node
            .outgoing
            .first()
            .cloned()
            .ok_or_else(|| ContractError::new("MalformedPackage", format!("{} has no outgoing flow", node.node_id)));
    };
    for branch in &guard.branches {
        let value = feel::eval_expression(&branch.condition, &inst.variables)
            .map_err(|e| ContractError::new("EvalError", format!("condition on {}: {e}", branch.flow_id)))?;
        match value {
            Value::Boolean(true) => return Ok(branch.flow_id.clone()),
            Value::Boolean(false) | Value::Null => {}
            other => {
                return Err(ContractError::new(
                    "EvalError",
                    format!("condition on {} produced {}", branch.flow_id, other.type_name()),
                ))
            }
        }
    }
    guard
        .default_flow
        .clone()
        .ok_or_else(|| ContractError::new("GatewayNoPath", format!("no condition of {} holds and it has no default", node.node_id)))
}

/// Fire automatic nodes in node-table order until only user/service tasks hold tokens.
pub fn propagate(pkg: &DefsmPackage, inst: &mut InstanceState, fx: &mut dyn Effects) -> Result<(), ContractError> {
    while inst.status == RunStatus::Running {
        let Some(node) = pkg.node_table.iter().find(|n| is_ready(inst, n)) else { break };
        fx.charge(1)?;
        match node.kind {
            NodeKind::ParallelGateway => {
                for f in &node.incoming {
                    take(inst, f);
                }
                for f in &node.outgoing {
                    add(inst, f);
                }
            }
            NodeKind::ExclusiveGateway => {
                let arrived = node.incoming.iter().find(|f| has_token(inst, f)).expect("ready").clone();
                take(inst, &arrived);
                let next = select_flow(node, inst)?;
                add(inst, &next);
            }
            NodeKind::BusinessRuleTask => {
                let table = node
                    .decision
                    .as_ref()
                    .ok_or_else(|| ContractError::new("MalformedPackage", format!("{} embeds no decision", node.node_id)))?;
                let mut steps = 0;
                let outcome = evaluate_table_metered(table, &inst.variables, &mut |n| steps += n)
                    .map_err(|e| ContractError::new(e.code(), e.to_string()))?;
                fx.charge(steps)?;
                fx.emit(
                    "DecisionEvaluated",
                    json!({"instance": inst.instance_id, "decision": table.id, "outcome": outcome_json(&outcome)}),
                );
                for (k, v) in outcome {
                    inst.variables.set(k, v);
                }
                for f in &node.incoming {
                    take(inst, f);
                }
                for f in &node.outgoing {
                    add(inst, f);
                }
            }
            NodeKind::EndEvent(EndKind::Normal) => {
                let arrived = node.incoming.iter().find(|f| has_token(inst, f)).expect("ready").clone();
                take(inst, &arrived);
            }
            NodeKind::EndEvent(EndKind::Error) => {
                inst.marking.clear();
                inst.status = RunStatus::Aborted;
                fx.emit("InstanceAborted", json!({"instance": inst.instance_id, "reason": node.node_id}));
                for task in inst.completed_tasks.iter().rev() {
                    fx.emit("CompensationRequired", json!({"instance": inst.instance_id, "task": task}));
                }
            }
            NodeKind::StartEvent | NodeKind::UserTask | NodeKind::ServiceTask => unreachable!("never ready"),
        }
    }
    if inst.status == RunStatus::Running && inst.marking.is_empty() {
        inst.status = RunStatus::Completed;
        fx.emit("InstanceCompleted", json!({"instance": inst.instance_id}));
    }
    Ok(())
}

/// Tokens on the start flows, then propagation.
pub fn start(pkg: &DefsmPackage, inst: &mut InstanceState, fx: &mut dyn Effects) -> Result<(), ContractError> {
    for f in &pkg.start_flows {
        add(inst, f);
    }
    propagate(pkg, inst, fx)
}

/// User/service tasks holding a token, in node-id order.
pub fn enabled(pkg: &DefsmPackage, inst: &InstanceState) -> Vec<String> {
    if inst.status != RunStatus::Running {
        return Vec::new();
    }
    pkg.node_table
        .iter()
        .filter(|n| n.kind.is_blocking() && n.incoming.iter().any(|f| has_token(inst, f)))
        .map(|n| n.node_id.clone())
        .collect()
}

/// Move the token through a user/service task. Does not propagate.
pub fn fire_task(pkg: &DefsmPackage, inst: &mut InstanceState, task: &str) -> Result<(), ContractError> {
    if inst.status != RunStatus::Running {
        return Err(ContractError::new("InstanceNotRunning", format!("instance {} is {:?}", inst.instance_id, inst.status)));
    }
    let not_enabled = || ContractError::new("NotEnabled", format!("task {task} is not enabled"));
    let node = pkg.node(task).filter(|n| n.kind.is_blocking()).ok_or_else(not_enabled)?;
    let flow = node.incoming.iter().find(|f| has_token(inst, f)).ok_or_else(not_enabled)?.clone();
    take(inst, &flow);
    for f in &node.outgoing {
        add(inst, f);
    }
    inst.completed_tasks.push(task.to_string());
    Ok(())
}
