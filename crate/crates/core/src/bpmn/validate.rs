use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::model::{NodeKind, ProcessModel};
use crate::dmn::feel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Severity {
    Error,
    Warning,
}

/// A structured diagnostic: `{code, severity, subject_id, message}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub code: String,
    pub severity: Severity,
    pub subject_id: String,
    pub message: String,
}

impl Violation {
    fn error(code: &str, subject: &str, message: String) -> Self {
        Violation { code: code.into(), severity: Severity::Error, subject_id: subject.into(), message }
    }

    fn warning(code: &str, subject: &str, message: String) -> Self {
        Violation { code: code.into(), severity: Severity::Warning, subject_id: subject.into(), message }
    }
}

pub fn has_errors(violations: &[Violation]) -> bool {
    violations.iter().any(|v| v.severity == Severity::Error)
}

/// Check every executability rule. Total over arbitrary (even inconsistent) models.
pub fn validate(model: &ProcessModel) -> Vec<Violation> {
    let mut out = Vec::new();

    let mut seen = BTreeSet::new();
    let all_ids = model
        .nodes
        .iter()
        .map(|n| &n.id)
        .chain(model.flows.iter().map(|f| &f.id))
        .chain(model.data_objects.iter().map(|d| &d.id));
    for id in all_ids {
        if !seen.insert(id.as_str()) {
            out.push(Violation::error("DuplicateId", id, format!("id `{id}` is declared more than once")));
        }
    }

    let nodes: BTreeMap<&str, NodeKind> = model.nodes.iter().map(|n| (n.id.as_str(), n.kind)).collect();
    let data: BTreeSet<&str> = model.data_objects.iter().map(|d| d.id.as_str()).collect();

    let mut incoming: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    let mut outgoing: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, f) in model.flows.iter().enumerate() {
        let mut ok = true;
        for end in [&f.source, &f.target] {
            if !nodes.contains_key(end.as_str()) {
                ok = false;
                out.push(Violation::error("DanglingReference", &f.id, format!("flow `{}` references missing node `{end}`", f.id)));
            }
        }
        if ok {
            outgoing.entry(f.source.as_str()).or_default().push(i);
            incoming.entry(f.target.as_str()).or_default().push(i);
        }
    }
    for a in &model.associations {
        let task_to_data = nodes.get(a.from.as_str()).is_some_and(|k| k.is_task()) && data.contains(a.to.as_str());
        let data_to_task = data.contains(a.from.as_str()) && nodes.get(a.to.as_str()).is_some_and(|k| k.is_task());
        if !task_to_data && !data_to_task {
            out.push(Violation::error(
                "DanglingReference",
                &a.from,
                format!("data association `{}` -> `{}` must link a task and a data object", a.from, a.to),
            ));
        }
    }

    let starts: Vec<&str> = model.start_events().map(|n| n.id.as_str()).collect();
    match starts.len() {
        0 => out.push(Violation::error("MissingStart", &model.id, "process has no start event".into())),
        1 => {}
        _ => {
            for s in &starts[1..] {
                out.push(Violation::error("MultipleStart", s, format!("additional start event `{s}`")));
            }
        }
    }
    if !model.nodes.iter().any(|n| matches!(n.kind, NodeKind::EndEvent(_))) {
        out.push(Violation::error("MissingEnd", &model.id, "process has no end event".into()));
    }

    let count = |map: &BTreeMap<&str, Vec<usize>>, id: &str| map.get(id).map_or(0, Vec::len);
    for n in &model.nodes {
        let (i, o) = (count(&incoming, &n.id), count(&outgoing, &n.id));
        let arity = |code: &str, want: &str| {
            Violation::error(code, &n.id, format!("`{}` has {i} incoming and {o} outgoing flows; expected {want}", n.id))
        };
        match n.kind {
            NodeKind::StartEvent if i != 0 || o != 1 => out.push(arity("EventArity", "0 in, 1 out")),
            NodeKind::EndEvent(_) if o != 0 || i == 0 => out.push(arity("EventArity", ">=1 in, 0 out")),
            k if k.is_task() && (i != 1 || o != 1) => out.push(arity("TaskArity", "1 in, 1 out")),
            k if k.is_gateway() => {
                let split = i == 1 && o >= 2;
                let join = i >= 2 && o == 1;
                if !split && !join {
                    out.push(arity("GatewayArity", "a split (1 in, >=2 out) or a join (>=2 in, 1 out)"));
                }
            }
            _ => {}
        }
        if n.kind == NodeKind::BusinessRuleTask && n.decision_ref.as_deref().is_none_or(str::is_empty) {
            out.push(Violation::error("MissingDecisionRef", &n.id, format!("business rule task `{}` names no decision", n.id)));
        }
    }

    for (gateway, flows) in &outgoing {
        let kind = nodes[gateway];
        let flows: Vec<_> = flows.iter().map(|&i| &model.flows[i]).collect();
        if kind != NodeKind::ExclusiveGateway {
            for f in &flows {
                if f.condition.is_some() || f.is_default {
                    out.push(Violation::error(
                        "ConditionOutsideGateway",
                        &f.id,
                        format!("flow `{}` carries a condition/default but does not leave an exclusive gateway", f.id),
                    ));
                }
            }
            continue;
        }
        let defaults = flows.iter().filter(|f| f.is_default).count();
        if defaults > 1 {
            out.push(Violation::error("MultipleDefaults", gateway, format!("gateway `{gateway}` has {defaults} default flows")));
        }
        if flows.len() >= 2 {
            for f in flows.iter().filter(|f| !f.is_default) {
                match &f.condition {
                    None => out.push(Violation::error(
                        "MissingCondition",
                        &f.id,
                        format!("flow `{}` leaves split `{gateway}` without a condition", f.id),
                    )),
                    Some(c) => {
                        if let Err(e) = feel::parse_expression(c) {
                            out.push(Violation::error("InvalidCondition", &f.id, format!("condition `{c}`: {e}")));
                        }
                    }
                }
            }
            if defaults == 0 {
                out.push(Violation::warning(
                    "NonExhaustiveGateway",
                    gateway,
                    format!("gateway `{gateway}` has no default flow; an instance may fail with GatewayNoPath"),
                ));
            }
        }
        for f in flows.iter().filter(|f| f.is_default && f.condition.is_some()) {
            out.push(Violation::warning("ConditionOnDefault", &f.id, format!("default flow `{}` ignores its condition", f.id)));
        }
    }

    // Reachability and acyclicity over the well-formed part of the graph.
    let succ = |id: &str| -> Vec<&str> {
        outgoing.get(id).map(|v| v.iter().map(|&i| model.flows[i].target.as_str()).collect()).unwrap_or_default()
    };
    let mut reached = BTreeSet::new();
    let mut stack: Vec<&str> = starts.clone();
    while let Some(id) = stack.pop() {
        if reached.insert(id) {
            stack.extend(succ(id));
        }
    }
    if !starts.is_empty() {
        for n in &model.nodes {
            if !reached.contains(n.id.as_str()) {
                out.push(Violation::error("Unreachable", &n.id, format!("`{}` is unreachable from the start event", n.id)));
            }
        }
    }
    for n in &model.nodes {
        if !matches!(n.kind, NodeKind::EndEvent(_)) && count(&outgoing, &n.id) == 0 {
            out.push(Violation::error("DeadEnd", &n.id, format!("`{}` has no outgoing flow", n.id)));
        }
    }
    if let Some(id) = find_cycle(model.nodes.iter().map(|n| n.id.as_str()), &succ) {
        out.push(Violation::error("Cycle", id, format!("`{id}` lies on a cycle; only acyclic processes are executable")));
    }

    for obj in &model.data_objects {
        if let Some(Err(e)) = obj.binding() {
            out.push(Violation::error("InvalidBinding", &obj.id, format!("data object `{}`: {e}", obj.id)));
        }
    }
    for a in &model.associations {
        let Some(obj) = model.data_object(&a.from) else { continue };
        if obj.annotation.is_none() && nodes.get(a.to.as_str()).is_some_and(|k| k.is_task()) {
            out.push(Violation::error(
                "MissingBinding",
                &obj.id,
                format!("data object `{}` feeds `{}` but has no binding annotation", obj.id, a.to),
            ));
        }
    }

    out
}

/// Iterative three-colour DFS; returns a node on some cycle.
fn find_cycle<'a>(ids: impl Iterator<Item = &'a str>, succ: &dyn Fn(&str) -> Vec<&'a str>) -> Option<&'a str> {
    let mut colour: BTreeMap<&str, u8> = BTreeMap::new();
    for root in ids {
        if colour.contains_key(root) {
            continue;
        }
        let mut stack: Vec<(&str, Vec<&str>)> = vec![(root, succ(root))];
        colour.insert(root, 1);
        while let Some((_, pending)) = stack.last_mut() {
            match pending.pop() {
                Some(next) => match colour.get(next) {
                    Some(1) => return Some(next),
                    Some(_) => {}
                    None => {
                        colour.insert(next, 1);
                        stack.push((next, succ(next)));
                    }
                },
                None => {
                    let (done, _) = stack.pop().expect("non-empty");
                    colour.insert(done, 2);
                }
            }
        }
    }
    None
}
