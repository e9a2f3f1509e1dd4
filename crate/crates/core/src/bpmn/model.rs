use serde::{Deserialize, Serialize};

use super::binding::{parse_binding, BindingError, DataBinding};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EndKind {
    Normal,
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NodeKind {
    StartEvent,
    EndEvent(EndKind),
    UserTask,
    ServiceTask,
    BusinessRuleTask,
    ParallelGateway,
    ExclusiveGateway,
}

impl NodeKind {
    /// Tasks that wait for an operator (or service) action.
    pub fn is_blocking(self) -> bool {
        matches!(self, NodeKind::UserTask | NodeKind::ServiceTask)
    }

    pub fn is_task(self) -> bool {
        matches!(self, NodeKind::UserTask | NodeKind::ServiceTask | NodeKind::BusinessRuleTask)
    }

    pub fn is_gateway(self) -> bool {
        matches!(self, NodeKind::ParallelGateway | NodeKind::ExclusiveGateway)
    }

    pub fn element_name(self) -> &'static str {
        match self {
            NodeKind::StartEvent => "startEvent",
            NodeKind::EndEvent(_) => "endEvent",
            NodeKind::UserTask => "userTask",
            NodeKind::ServiceTask => "serviceTask",
            NodeKind::BusinessRuleTask => "businessRuleTask",
            NodeKind::ParallelGateway => "parallelGateway",
            NodeKind::ExclusiveGateway => "exclusiveGateway",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowNode {
    pub id: String,
    pub kind: NodeKind,
    pub name: String,
    pub decision_ref: Option<String>,
    pub service_binding: Option<DataBinding>,
}

impl FlowNode {
    pub fn new(id: impl Into<String>, kind: NodeKind) -> Self {
        let id = id.into();
        FlowNode { name: id.clone(), id, kind, decision_ref: None, service_binding: None }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceFlow {
    pub id: String,
    pub source: String,
    pub target: String,
    pub condition: Option<String>,
    pub is_default: bool,
}

impl SequenceFlow {
    pub fn new(id: impl Into<String>, source: impl Into<String>, target: impl Into<String>) -> Self {
        SequenceFlow { id: id.into(), source: source.into(), target: target.into(), condition: None, is_default: false }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataObject {
    pub id: String,
    pub name: String,
    /// Raw binding annotation text, if the analyst attached one.
    pub annotation: Option<String>,
}

impl DataObject {
    pub fn binding(&self) -> Option<Result<DataBinding, BindingError>> {
        self.annotation.as_deref().map(parse_binding)
    }
}

/// Either `task -> data object` (output) or `data object -> task` (input).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataAssociation {
    pub from: String,
    pub to: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProcessModel {
    pub id: String,
    pub name: String,
    pub nodes: Vec<FlowNode>,
    pub flows: Vec<SequenceFlow>,
    pub data_objects: Vec<DataObject>,
    pub associations: Vec<DataAssociation>,
}

impl ProcessModel {
    pub fn node(&self, id: &str) -> Option<&FlowNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn flow(&self, id: &str) -> Option<&SequenceFlow> {
        self.flows.iter().find(|f| f.id == id)
    }

    pub fn data_object(&self, id: &str) -> Option<&DataObject> {
        self.data_objects.iter().find(|d| d.id == id)
    }

    /// Outgoing flows in declaration order.
    pub fn outgoing<'a>(&'a self, node: &'a str) -> impl Iterator<Item = &'a SequenceFlow> + 'a {
        self.flows.iter().filter(move |f| f.source == node)
    }

    pub fn incoming<'a>(&'a self, node: &'a str) -> impl Iterator<Item = &'a SequenceFlow> + 'a {
        self.flows.iter().filter(move |f| f.target == node)
    }

    pub fn start_events(&self) -> impl Iterator<Item = &FlowNode> {
        self.nodes.iter().filter(|n| n.kind == NodeKind::StartEvent)
    }

    pub fn tasks(&self) -> impl Iterator<Item = &FlowNode> {
        self.nodes.iter().filter(|n| n.kind.is_task())
    }

    /// Data objects flowing into `task`.
    pub fn inputs_of<'a>(&'a self, task: &'a str) -> impl Iterator<Item = &'a DataObject> + 'a {
        self.associations
            .iter()
            .filter(move |a| a.to == task)
            .filter_map(move |a| self.data_object(&a.from))
    }

    /// Data objects produced by `task`.
    pub fn outputs_of<'a>(&'a self, task: &'a str) -> impl Iterator<Item = &'a DataObject> + 'a {
        self.associations
            .iter()
            .filter(move |a| a.from == task)
            .filter_map(move |a| self.data_object(&a.to))
    }
}
