use std::collections::BTreeSet;

use crate::bpmn::{has_errors, validate, DataBinding, DataObject, NodeKind, ProcessModel, Severity, Violation};
use crate::canonical::Digest;
use crate::dmn::{feel, DecisionTable};

use super::package::{CompiledFlow, CompiledGuard, CompiledNode, DataPort, DefsmPackage, EndNode, GuardBranch};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CompileError {
    #[error("model has {} validation error(s); first: {}", .0.len(), .0.first().map(|v| v.message.as_str()).unwrap_or(""))]
    ValidationFailed(Vec<Violation>),
    #[error("task `{task}` references decision `{decision}`, which was not supplied")]
    UnresolvedDecision { task: String, decision: String },
    #[error("service task `{0}` has no binding")]
    UnboundServiceTask(String),
    #[error("`{subject}` reads variable `{variable}`, which no decision or binding produces")]
    UndeclaredVariable { subject: String, variable: String },
    #[error("condition on `{flow}`: {message}")]
    InvalidCondition { flow: String, message: String },
    #[error("decision `{0}` is supplied twice")]
    DuplicateDecision(String),
}

impl CompileError {
    pub fn code(&self) -> &'static str {
        match self {
            CompileError::ValidationFailed(_) => "ValidationFailed",
            CompileError::UnresolvedDecision { .. } => "UnresolvedDecision",
            CompileError::UnboundServiceTask(_) => "UnboundServiceTask",
            CompileError::UndeclaredVariable { .. } => "UndeclaredVariable",
            CompileError::InvalidCondition { .. } => "InvalidCondition",
            CompileError::DuplicateDecision(_) => "DuplicateDecision",
        }
    }
}

fn ports<'a>(objects: impl Iterator<Item = &'a DataObject>) -> Vec<DataPort> {
    let mut ports: Vec<DataPort> = objects
        .map(|d| DataPort {
            data_object: d.id.clone(),
            name: d.name.clone(),
            binding: d.binding().and_then(Result::ok),
        })
        .collect();
    ports.sort_by(|a, b| a.data_object.cmp(&b.data_object));
    ports.dedup_by(|a, b| a.data_object == b.data_object);
    ports
}

/// Compile a validated model and its decision tables into a sealed package.
pub fn compile(model: &ProcessModel, tables: &[DecisionTable]) -> Result<DefsmPackage, CompileError> {
    let violations = validate(model);
    if has_errors(&violations) {
        return Err(CompileError::ValidationFailed(
            violations.into_iter().filter(|v| v.severity == Severity::Error).collect(),
        ));
    }
    let mut ids = BTreeSet::new();
    for t in tables {
        if !ids.insert(t.id.as_str()) {
            return Err(CompileError::DuplicateDecision(t.id.clone()));
        }
    }

    let mut variables = BTreeSet::new();
    for d in &model.data_objects {
        if let Some(Ok(b)) = d.binding() {
            variables.extend(b.produced_variables());
        }
    }

    let mut node_table = Vec::new();
    for n in &model.nodes {
        let mut incoming: Vec<String> = model.incoming(&n.id).map(|f| f.id.clone()).collect();
        let mut outgoing: Vec<String> = model.outgoing(&n.id).map(|f| f.id.clone()).collect();
        incoming.sort();
        outgoing.sort();

        let decision = match (n.kind, &n.decision_ref) {
            (NodeKind::BusinessRuleTask, Some(r)) => {
                let table = tables.iter().find(|t| &t.id == r).ok_or_else(|| CompileError::UnresolvedDecision {
                    task: n.id.clone(),
                    decision: r.clone(),
                })?;
                variables.extend(table.outputs.iter().map(|o| o.name.clone()));
                Some(table.clone())
            }
            _ => None,
        };

        let binding = match n.kind {
            NodeKind::ServiceTask => {
                let b = n.service_binding.clone().ok_or_else(|| CompileError::UnboundServiceTask(n.id.clone()))?;
                variables.extend(b.produced_variables());
                Some(b)
            }
            _ => None,
        };

        let guard = (n.kind == NodeKind::ExclusiveGateway && outgoing.len() > 1).then(|| CompiledGuard {
            branches: model
                .outgoing(&n.id)
                .filter(|f| !f.is_default)
                .map(|f| GuardBranch { flow_id: f.id.clone(), condition: f.condition.clone().unwrap_or_default() })
                .collect(),
            default_flow: model.outgoing(&n.id).find(|f| f.is_default).map(|f| f.id.clone()),
        });

        node_table.push(CompiledNode {
            node_id: n.id.clone(),
            kind: n.kind,
            name: n.name.clone(),
            incoming,
            outgoing,
            guard,
            binding,
            decision,
            inputs: ports(model.inputs_of(&n.id)),
            outputs: ports(model.outputs_of(&n.id)),
            role: None,
        });
    }
    node_table.sort_by(|a, b| a.node_id.cmp(&b.node_id));

    // Every read must be satisfied by some producer.
    let reads = |subject: &str, src: &str| -> Result<(), CompileError> {
        let expr = feel::parse_expression(src)
            .map_err(|e| CompileError::InvalidCondition { flow: subject.to_string(), message: e.to_string() })?;
        match expr.variables().into_iter().find(|v| !variables.contains(v)) {
            Some(variable) => Err(CompileError::UndeclaredVariable { subject: subject.to_string(), variable }),
            None => Ok(()),
        }
    };
    for n in &node_table {
        if let Some(g) = &n.guard {
            for b in &g.branches {
                reads(&b.flow_id, &b.condition)?;
            }
        }
        if let Some(t) = &n.decision {
            for i in &t.inputs {
                reads(&n.node_id, &i.expression)?;
            }
        }
        if let Some(DataBinding::Http { inputs, .. }) = &n.binding {
            if let Some(i) = inputs.iter().find(|i| !variables.contains(&i.var)) {
                return Err(CompileError::UndeclaredVariable { subject: n.node_id.clone(), variable: i.var.clone() });
            }
        }
    }

    let mut flow_table: Vec<CompiledFlow> = model
        .flows
        .iter()
        .map(|f| CompiledFlow { flow_id: f.id.clone(), source: f.source.clone(), target: f.target.clone() })
        .collect();
    flow_table.sort_by(|a, b| a.flow_id.cmp(&b.flow_id));

    let start_flows = node_table
        .iter()
        .filter(|n| n.kind == NodeKind::StartEvent)
        .flat_map(|n| n.outgoing.iter().cloned())
        .collect();
    let end_nodes = node_table
        .iter()
        .filter_map(|n| match n.kind {
            NodeKind::EndEvent(kind) => Some(EndNode { node_id: n.node_id.clone(), kind }),
            _ => None,
        })
        .collect();

    Ok(DefsmPackage {
        package_id: Digest::from_bytes([0; 32]),
        process_id: model.id.clone(),
        flow_table,
        node_table,
        start_flows,
        end_nodes,
        variables: variables.into_iter().collect(),
    }
    .seal())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bpmn::parse_bpmn;
    use crate::dmn::parse_dmn;

    fn harvester() -> (ProcessModel, DecisionTable) {
        (
            parse_bpmn(include_str!("../../corpus/harvester.bpmn")).unwrap(),
            parse_dmn(include_bytes!("../../corpus/inscost.dmn")).unwrap(),
        )
    }

    #[test]
    fn harvester_package_shape() {
        let (m, t) = harvester();
        let pkg = compile(&m, &[t]).unwrap();
        assert_eq!(pkg.decisions().count(), 1);
        let guard = pkg.node("InsOk").unwrap().guard.as_ref().unwrap();
        assert_eq!(guard.branches, vec![GuardBranch { flow_id: "Flow_proceed".into(), condition: "outcome = \"proceed\"".into() }]);
        assert_eq!(guard.default_flow.as_deref(), Some("Flow_abort"));
        assert_eq!(pkg.flow("Flow_abort").unwrap().target, "Failed");
        assert_eq!(pkg.start_flows, vec!["Flow_start".to_string()]);
        assert!(pkg.variables.contains(&"quote".to_string()) && pkg.variables.contains(&"price".to_string()));
        pkg.check().unwrap();
        assert_eq!(DefsmPackage::from_bytes(&pkg.to_bytes()).unwrap(), pkg);
    }

    #[test]
    fn compilation_is_byte_deterministic() {
        let (m, t) = harvester();
        let a = compile(&m, std::slice::from_ref(&t)).unwrap().to_bytes();
        let b = compile(&m, &[t]).unwrap().to_bytes();
        assert_eq!(a, b);
        assert!(!String::from_utf8(a).unwrap().contains(": "));
    }

    #[test]
    fn missing_table() {
        let (m, _) = harvester();
        assert_eq!(
            compile(&m, &[]).unwrap_err(),
            CompileError::UnresolvedDecision { task: "CheckInsCost".into(), decision: "InsCost".into() }
        );
    }

    #[test]
    fn invalid_model_is_refused() {
        let (mut m, t) = harvester();
        m.flows.retain(|f| f.id != "Flow_end");
        assert!(matches!(compile(&m, &[t]), Err(CompileError::ValidationFailed(v)) if !v.is_empty()));
    }

    #[test]
    fn undeclared_guard_variable() {
        let (mut m, t) = harvester();
        m.flows.iter_mut().find(|f| f.id == "Flow_proceed").unwrap().condition = Some("mood = \"good\"".into());
        assert_eq!(
            compile(&m, &[t]).unwrap_err(),
            CompileError::UndeclaredVariable { subject: "Flow_proceed".into(), variable: "mood".into() }
        );
    }

    #[test]
    fn unbound_service_task() {
        let (mut m, t) = harvester();
        m.nodes.iter_mut().find(|n| n.id == "GetIns").unwrap().kind = NodeKind::ServiceTask;
        assert_eq!(compile(&m, &[t]).unwrap_err(), CompileError::UnboundServiceTask("GetIns".into()));
    }

    #[test]
    fn tampered_package_is_detected() {
        let (m, t) = harvester();
        let pkg = compile(&m, &[t]).unwrap();
        let mut dangling = pkg.clone();
        dangling.node_table.iter_mut().find(|n| n.node_id == "InsOk").unwrap().guard.as_mut().unwrap().default_flow =
            Some("Flow_nowhere".into());
        assert!(matches!(dangling.check(), Err(super::super::package::PackageError::IdMismatch { .. })));
        let resealed = dangling.seal();
        assert!(matches!(resealed.check(), Err(super::super::package::PackageError::Inconsistent(_))));
    }
}
