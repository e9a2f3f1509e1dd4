use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::bpmn::{DataBinding, EndKind, NodeKind};
use crate::canonical::{self, Digest};
use crate::dmn::{feel, DecisionTable};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompiledFlow {
    pub flow_id: String,
    pub source: String,
    pub target: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GuardBranch {
    pub flow_id: String,
    pub condition: String,
}

/// Routing for an exclusive split. Branches are tried in declaration order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompiledGuard {
    pub branches: Vec<GuardBranch>,
    pub default_flow: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataPort {
    pub data_object: String,
    pub name: String,
    pub binding: Option<DataBinding>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompiledNode {
    pub node_id: String,
    pub kind: NodeKind,
    pub name: String,
    /// Flow ids, sorted.
    pub incoming: Vec<String>,
    /// Flow ids, sorted.
    pub outgoing: Vec<String>,
    pub guard: Option<CompiledGuard>,
    pub binding: Option<DataBinding>,
    pub decision: Option<DecisionTable>,
    pub inputs: Vec<DataPort>,
    pub outputs: Vec<DataPort>,
    /// Reserved for per-task access control; unused by the monitor.
    pub role: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EndNode {
    pub node_id: String,
    pub kind: EndKind,
}

/// The deployable, chain-agnostic flow-control tables for one process.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DefsmPackage {
    pub package_id: Digest,
    pub process_id: String,
    pub flow_table: Vec<CompiledFlow>,
    pub node_table: Vec<CompiledNode>,
    pub start_flows: Vec<String>,
    pub end_nodes: Vec<EndNode>,
    /// Every variable a guard or decision may read.
    pub variables: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PackageError {
    #[error("package is not valid JSON: {0}")]
    Json(String),
    #[error("package_id {declared} does not match content digest {computed}")]
    IdMismatch { declared: Digest, computed: Digest },
    #[error("inconsistent package: {0}")]
    Inconsistent(String),
}

fn digest_without_id(pkg: &DefsmPackage) -> Digest {
    let mut value = serde_json::to_value(pkg).expect("package serializes");
    if let Some(obj) = value.as_object_mut() {
        obj.remove("package_id");
    }
    canonical::digest_of(&value).expect("json value serializes")
}

impl DefsmPackage {
    /// Recompute and store the content digest.
    pub fn seal(mut self) -> Self {
        self.package_id = digest_without_id(&self);
        self
    }

    pub fn computed_id(&self) -> Digest {
        digest_without_id(self)
    }

    /// Canonical wire bytes: sorted keys, no insignificant whitespace.
    pub fn to_bytes(&self) -> Vec<u8> {
        canonical::to_canonical_bytes(self).expect("package serializes")
    }

    /// Decode and fully check a package received over the wire.
    pub fn from_bytes(bytes: &[u8]) -> Result<DefsmPackage, PackageError> {
        let pkg: DefsmPackage = serde_json::from_slice(bytes).map_err(|e| PackageError::Json(e.to_string()))?;
        pkg.check()?;
        Ok(pkg)
    }

    pub fn node(&self, id: &str) -> Option<&CompiledNode> {
        self.node_table.binary_search_by(|n| n.node_id.as_str().cmp(id)).ok().map(|i| &self.node_table[i])
    }

    pub fn flow(&self, id: &str) -> Option<&CompiledFlow> {
        self.flow_table.binary_search_by(|f| f.flow_id.as_str().cmp(id)).ok().map(|i| &self.flow_table[i])
    }

    pub fn decisions(&self) -> impl Iterator<Item = &DecisionTable> {
        self.node_table.iter().filter_map(|n| n.decision.as_ref())
    }

    /// Self-containment and internal consistency.
    pub fn check(&self) -> Result<(), PackageError> {
        let bad = |m: String| Err(PackageError::Inconsistent(m));
        let computed = self.computed_id();
        if computed != self.package_id {
            return Err(PackageError::IdMismatch { declared: self.package_id, computed });
        }
        if !self.flow_table.windows(2).all(|w| w[0].flow_id < w[1].flow_id) {
            return bad("flow table is not strictly sorted by id".into());
        }
        if !self.node_table.windows(2).all(|w| w[0].node_id < w[1].node_id) {
            return bad("node table is not strictly sorted by id".into());
        }

        let mut incoming: BTreeMap<&str, Vec<String>> = BTreeMap::new();
        let mut outgoing: BTreeMap<&str, Vec<String>> = BTreeMap::new();
        for f in &self.flow_table {
            for end in [&f.source, &f.target] {
                if self.node(end).is_none() {
                    return bad(format!("flow {} references unknown node {end}", f.flow_id));
                }
            }
            outgoing.entry(f.source.as_str()).or_default().push(f.flow_id.clone());
            incoming.entry(f.target.as_str()).or_default().push(f.flow_id.clone());
        }

        let declared: BTreeSet<&str> = self.variables.iter().map(String::as_str).collect();
        let undeclared = |src: &str, parsed: Result<Vec<String>, feel::FeelError>| -> Result<(), PackageError> {
            let vars = parsed.map_err(|e| PackageError::Inconsistent(format!("{src}: {e}")))?;
            match vars.iter().find(|v| !declared.contains(v.as_str())) {
                Some(v) => Err(PackageError::Inconsistent(format!("{src} reads undeclared variable {v}"))),
                None => Ok(()),
            }
        };

        let mut starts = Vec::new();
        let mut ends = Vec::new();
        for n in &self.node_table {
            let id = n.node_id.as_str();
            if n.incoming != incoming.get(id).cloned().unwrap_or_default()
                || n.outgoing != outgoing.get(id).cloned().unwrap_or_default()
            {
                return bad(format!("node {id} adjacency disagrees with the flow table"));
            }
            match n.kind {
                NodeKind::StartEvent => starts.extend(n.outgoing.iter().cloned()),
                NodeKind::EndEvent(kind) => ends.push(EndNode { node_id: n.node_id.clone(), kind }),
                _ => {}
            }
            if (n.kind == NodeKind::ServiceTask) != n.binding.is_some() {
                return bad(format!("node {id}: only service tasks carry a binding, and all of them must"));
            }
            match (&n.decision, n.kind) {
                (Some(table), NodeKind::BusinessRuleTask) => {
                    table.check().map_err(|e| PackageError::Inconsistent(format!("decision {}: {e}", table.id)))?;
                    for input in &table.inputs {
                        undeclared(
                            &format!("decision {}", table.id),
                            feel::parse_expression(&input.expression).map(|e| e.variables()),
                        )?;
                    }
                }
                (None, NodeKind::BusinessRuleTask) => return bad(format!("business rule task {id} embeds no decision")),
                (Some(_), _) => return bad(format!("node {id} embeds a decision but is not a business rule task")),
                (None, _) => {}
            }
            match (&n.guard, n.kind) {
                (Some(guard), NodeKind::ExclusiveGateway) => {
                    let mut routed: Vec<&String> = guard.branches.iter().map(|b| &b.flow_id).collect();
                    routed.extend(guard.default_flow.iter());
                    routed.sort();
                    if routed.len() != n.outgoing.len() || routed.iter().zip(&n.outgoing).any(|(a, b)| *a != b) {
                        return bad(format!("guard on {id} does not cover exactly its outgoing flows"));
                    }
                    for b in &guard.branches {
                        undeclared(
                            &format!("guard {}", b.flow_id),
                            feel::parse_expression(&b.condition).map(|e| e.variables()),
                        )?;
                    }
                }
                (None, NodeKind::ExclusiveGateway) if n.outgoing.len() > 1 => {
                    return bad(format!("exclusive split {id} has no guard"))
                }
                (Some(_), _) => return bad(format!("node {id} carries a guard but is not an exclusive gateway")),
                (None, _) => {}
            }
        }
        starts.sort();
        if starts != self.start_flows || starts.len() != 1 {
            return bad("start_flows must be the single flow leaving the start event".into());
        }
        if ends != self.end_nodes || ends.is_empty() {
            return bad("end_nodes disagree with the node table".into());
        }
        Ok(())
    }
}
