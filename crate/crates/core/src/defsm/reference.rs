//! Token-game interpreter over the source model. Independent of the monitor's
//! package executor; the two are compared state-for-state.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::bpmn::{EndKind, NodeKind, ProcessModel};
use crate::canonical;
use crate::dmn::{evaluate_table, feel, Context, DecisionTable, Outcome, Value};

/// Tokens per flow id. Flows without tokens are absent.
pub type Marking = BTreeMap<String, u32>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RunStatus {
    Running,
    Completed,
    Aborted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefState {
    pub marking: Marking,
    pub variables: Context,
    pub status: RunStatus,
    /// User/service tasks in completion order.
    pub completed: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Action {
    CompleteTask { node: String, params: Context },
}

impl Action {
    pub fn complete(node: impl Into<String>) -> Self {
        Action::CompleteTask { node: node.into(), params: Context::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StepError {
    #[error("task `{0}` is not enabled")]
    NotEnabled(String),
    #[error("instance is not running")]
    NotRunning,
    #[error("gateway `{0}` has no true condition and no default")]
    GatewayNoPath(String),
    #[error("decision `{decision}` failed: {message}")]
    Decision { decision: String, code: String, message: String },
    #[error("condition on `{flow}` failed: {message}")]
    Condition { flow: String, message: String },
}

impl StepError {
    pub fn code(&self) -> String {
        match self {
            StepError::NotEnabled(_) => "NotEnabled".into(),
            StepError::NotRunning => "InstanceNotRunning".into(),
            StepError::GatewayNoPath(_) => "GatewayNoPath".into(),
            StepError::Decision { code, .. } => code.clone(),
            StepError::Condition { .. } => "EvalError".into(),
        }
    }
}

/// Supplies business-rule outcomes during propagation.
pub trait DecisionOracle {
    fn decide(&self, decision: &str, variables: &Context) -> Result<Outcome, StepError>;
}

/// Fixed outcomes per decision id, regardless of inputs.
#[derive(Debug, Clone, Default)]
pub struct ScriptedOutcomes(pub BTreeMap<String, Outcome>);

impl DecisionOracle for ScriptedOutcomes {
    fn decide(&self, decision: &str, _: &Context) -> Result<Outcome, StepError> {
        self.0.get(decision).cloned().ok_or_else(|| StepError::Decision {
            decision: decision.to_string(),
            code: "NoRuleMatched".into(),
            message: "no scripted outcome".into(),
        })
    }
}

/// Evaluates real decision tables.
#[derive(Debug, Clone, Default)]
pub struct TableDecisions(pub Vec<DecisionTable>);

impl DecisionOracle for TableDecisions {
    fn decide(&self, decision: &str, variables: &Context) -> Result<Outcome, StepError> {
        let fail = |code: &str, message: String| StepError::Decision { decision: decision.to_string(), code: code.into(), message };
        let table = self.0.iter().find(|t| t.id == decision).ok_or_else(|| fail("UnresolvedDecision", "unknown table".into()))?;
        evaluate_table(table, variables).map_err(|e| fail(e.code(), e.to_string()))
    }
}

fn add(marking: &mut Marking, flow: &str) {
    *marking.entry(flow.to_string()).or_insert(0) += 1;
}

fn take(marking: &mut Marking, flow: &str) {
    if let Some(n) = marking.get_mut(flow) {
        *n -= 1;
        if *n == 0 {
            marking.remove(flow);
        }
    }
}

fn marked(marking: &Marking, flow: &str) -> bool {
    marking.contains_key(flow)
}

/// Tasks awaiting an action, sorted.
pub fn enabled_tasks(model: &ProcessModel, state: &RefState) -> Vec<String> {
    if state.status != RunStatus::Running {
        return Vec::new();
    }
    let mut out: Vec<String> = model
        .nodes
        .iter()
        .filter(|n| n.kind.is_blocking() && model.incoming(&n.id).any(|f| marked(&state.marking, &f.id)))
        .map(|n| n.id.clone())
        .collect();
    out.sort();
    out
}

fn ready(model: &ProcessModel, marking: &Marking, id: &str, kind: NodeKind) -> bool {
    let mut incoming = model.incoming(id).peekable();
    match kind {
        NodeKind::ParallelGateway => incoming.peek().is_some() && incoming.all(|f| marked(marking, &f.id)),
        NodeKind::ExclusiveGateway | NodeKind::BusinessRuleTask | NodeKind::EndEvent(_) => {
            incoming.any(|f| marked(marking, &f.id))
        }
        _ => false,
    }
}

fn route(model: &ProcessModel, gateway: &str, variables: &Context) -> Result<String, StepError> {
    let outgoing: Vec<_> = model.outgoing(gateway).collect();
    if let [only] = outgoing.as_slice() {
        return Ok(only.id.clone());
    }
    for f in outgoing.iter().filter(|f| !f.is_default) {
        let cond = f.condition.as_deref().unwrap_or("");
        let value = feel::eval_expression(cond, variables)
            .map_err(|e| StepError::Condition { flow: f.id.clone(), message: e.to_string() })?;
        match value {
            Value::Boolean(true) => return Ok(f.id.clone()),
            Value::Boolean(false) | Value::Null => {}
            other => {
                return Err(StepError::Condition {
                    flow: f.id.clone(),
                    message: format!("condition produced {} instead of a boolean", other.type_name()),
                })
            }
        }
    }
    outgoing
        .iter()
        .find(|f| f.is_default)
        .map(|f| f.id.clone())
        .ok_or_else(|| StepError::GatewayNoPath(gateway.to_string()))
}

/// Fire automatic nodes, smallest ready node id first, until none is ready.
fn quiesce(model: &ProcessModel, state: &mut RefState, oracle: &dyn DecisionOracle) -> Result<(), StepError> {
    let mut order: Vec<_> = model.nodes.iter().map(|n| (n.id.as_str(), n.kind)).collect();
    order.sort_by_key(|(id, _)| *id);
    while state.status == RunStatus::Running {
        let Some(&(id, kind)) = order.iter().find(|(id, kind)| ready(model, &state.marking, id, *kind)) else {
            break;
        };
        match kind {
            NodeKind::ParallelGateway => {
                for f in model.incoming(id) {
                    take(&mut state.marking, &f.id);
                }
                for f in model.outgoing(id) {
                    add(&mut state.marking, &f.id);
                }
            }
            NodeKind::ExclusiveGateway => {
                let mut arrived: Vec<&str> =
                    model.incoming(id).filter(|f| marked(&state.marking, &f.id)).map(|f| f.id.as_str()).collect();
                arrived.sort();
                take(&mut state.marking, arrived[0]);
                let next = route(model, id, &state.variables)?;
                add(&mut state.marking, &next);
            }
            NodeKind::BusinessRuleTask => {
                let node = model.node(id).expect("listed node");
                let decision = node.decision_ref.as_deref().unwrap_or("");
                let outcome = oracle.decide(decision, &state.variables)?;
                for (k, v) in outcome {
                    state.variables.set(k, v);
                }
                for f in model.incoming(id) {
                    take(&mut state.marking, &f.id);
                }
                for f in model.outgoing(id) {
                    add(&mut state.marking, &f.id);
                }
            }
            NodeKind::EndEvent(EndKind::Normal) => {
                let flow = model.incoming(id).find(|f| marked(&state.marking, &f.id)).expect("ready").id.clone();
                take(&mut state.marking, &flow);
            }
            NodeKind::EndEvent(EndKind::Error) => {
                state.marking.clear();
                state.status = RunStatus::Aborted;
            }
            _ => unreachable!("blocking nodes are never ready"),
        }
    }
    if state.status == RunStatus::Running && state.marking.is_empty() {
        state.status = RunStatus::Completed;
    }
    Ok(())
}

pub fn initial_state(model: &ProcessModel, oracle: &dyn DecisionOracle) -> Result<RefState, StepError> {
    let mut state = RefState {
        marking: Marking::new(),
        variables: Context::new(),
        status: RunStatus::Running,
        completed: Vec::new(),
    };
    for s in model.start_events() {
        for f in model.outgoing(&s.id) {
            add(&mut state.marking, &f.id);
        }
    }
    quiesce(model, &mut state, oracle)?;
    Ok(state)
}

/// Complete one task and propagate to quiescence. Errors leave `state` untouched.
pub fn reference_step(
    model: &ProcessModel,
    state: &RefState,
    action: &Action,
    oracle: &dyn DecisionOracle,
) -> Result<RefState, StepError> {
    let Action::CompleteTask { node, params } = action;
    if state.status != RunStatus::Running {
        return Err(StepError::NotRunning);
    }
    let n = model.node(node).filter(|n| n.kind.is_blocking()).ok_or_else(|| StepError::NotEnabled(node.clone()))?;
    let flow = model
        .incoming(&n.id)
        .find(|f| marked(&state.marking, &f.id))
        .ok_or_else(|| StepError::NotEnabled(node.clone()))?;
    let mut next = state.clone();
    next.variables.merge(params);
    take(&mut next.marking, &flow.id);
    for f in model.outgoing(&n.id) {
        add(&mut next.marking, &f.id);
    }
    next.completed.push(n.id.clone());
    quiesce(model, &mut next, oracle)?;
    Ok(next)
}

/// A node of the marking graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphState {
    pub marking: Marking,
    pub status: RunStatus,
    pub variables: Context,
}

impl GraphState {
    /// Canonical label; equal labels mean equal states.
    pub fn label(&self) -> String {
        canonical::to_canonical_string(self).expect("state serializes")
    }
}

/// Where an action leads: another state, or a rejection with its error code.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum EdgeTarget {
    State(usize),
    Rejected(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub from: usize,
    pub task: String,
    pub to: EdgeTarget,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarkingGraph {
    /// `Err(code)` when starting the instance already fails.
    pub initial: Result<usize, String>,
    pub states: Vec<GraphState>,
    pub edges: Vec<Edge>,
}

/// Label-level view used to compare graphs built by different executors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelledGraph {
    pub initial: Result<String, String>,
    pub states: BTreeSet<String>,
    pub edges: BTreeSet<(String, String, Result<String, String>)>,
}

impl MarkingGraph {
    pub fn labelled(&self) -> LabelledGraph {
        let label = |i: usize| self.states[i].label();
        LabelledGraph {
            initial: self.initial.clone().map(label),
            states: self.states.iter().map(GraphState::label).collect(),
            edges: self
                .edges
                .iter()
                .map(|e| {
                    let to = match &e.to {
                        EdgeTarget::State(i) => Ok(label(*i)),
                        EdgeTarget::Rejected(code) => Err(code.clone()),
                    };
                    (label(e.from), e.task.clone(), to)
                })
                .collect(),
        }
    }

    /// Every maximal action sequence from the initial state.
    pub fn paths(&self) -> Vec<Vec<String>> {
        let Ok(start) = self.initial else { return Vec::new() };
        let mut out = Vec::new();
        let mut stack = vec![(start, Vec::new())];
        while let Some((at, path)) = stack.pop() {
            let next: Vec<_> = self
                .edges
                .iter()
                .filter(|e| e.from == at)
                .filter_map(|e| match e.to {
                    EdgeTarget::State(to) => Some((to, e.task.clone())),
                    EdgeTarget::Rejected(_) => None,
                })
                .collect();
            if next.is_empty() {
                out.push(path);
                continue;
            }
            for (to, task) in next.into_iter().rev() {
                let mut p = path.clone();
                p.push(task);
                stack.push((to, p));
            }
        }
        out
    }

    /// States with no outgoing edges.
    pub fn terminal_states(&self) -> Vec<&GraphState> {
        let sources: BTreeSet<usize> = self.edges.iter().map(|e| e.from).collect();
        self.states.iter().enumerate().filter(|(i, _)| !sources.contains(i)).map(|(_, s)| s).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BoundsExceeded {
    #[error("model has {0} tasks and gateways (limit {MAX_ELEMENTS})")]
    TooManyElements(usize),
    #[error("model has {0} parallel splits (limit {MAX_PARALLEL_SPLITS})")]
    TooManyParallelSplits(usize),
    #[error("more than {MAX_STATES} reachable states")]
    TooManyStates,
}

pub const MAX_ELEMENTS: usize = 12;
pub const MAX_PARALLEL_SPLITS: usize = 2;
pub const MAX_STATES: usize = 100_000;

/// Check the exploration bounds: tasks+gateways and parallel splits.
pub fn check_bounds(model: &ProcessModel) -> Result<(), BoundsExceeded> {
    let elements = model.nodes.iter().filter(|n| n.kind.is_task() || n.kind.is_gateway()).count();
    if elements > MAX_ELEMENTS {
        return Err(BoundsExceeded::TooManyElements(elements));
    }
    let splits = model
        .nodes
        .iter()
        .filter(|n| n.kind == NodeKind::ParallelGateway && model.outgoing(&n.id).count() > 1)
        .count();
    if splits > MAX_PARALLEL_SPLITS {
        return Err(BoundsExceeded::TooManyParallelSplits(splits));
    }
    Ok(())
}

/// Exhaustive breadth-first exploration with tasks taken in sorted order.
pub fn reachable_graph(model: &ProcessModel, scripted: &ScriptedOutcomes) -> Result<MarkingGraph, BoundsExceeded> {
    check_bounds(model)?;
    let view = |s: &RefState| GraphState { marking: s.marking.clone(), status: s.status, variables: s.variables.clone() };
    let mut graph = MarkingGraph { initial: Err(String::new()), states: Vec::new(), edges: Vec::new() };
    let start = match initial_state(model, scripted) {
        Ok(s) => s,
        Err(e) => {
            graph.initial = Err(e.code());
            return Ok(graph);
        }
    };
    let mut index: BTreeMap<String, usize> = BTreeMap::new();
    let mut queue = VecDeque::new();
    let first = view(&start);
    index.insert(first.label(), 0);
    graph.states.push(first);
    graph.initial = Ok(0);
    queue.push_back((0usize, start));
    while let Some((at, state)) = queue.pop_front() {
        for task in enabled_tasks(model, &state) {
            let to = match reference_step(model, &state, &Action::complete(task.clone()), scripted) {
                Ok(next) => {
                    let v = view(&next);
                    let label = v.label();
                    let i = match index.get(&label) {
                        Some(&i) => i,
                        None => {
                            let i = graph.states.len();
                            if i >= MAX_STATES {
                                return Err(BoundsExceeded::TooManyStates);
                            }
                            index.insert(label, i);
                            graph.states.push(v);
                            queue.push_back((i, next));
                            i
                        }
                    };
                    EdgeTarget::State(i)
                }
                Err(e) => EdgeTarget::Rejected(e.code()),
            };
            graph.edges.push(Edge { from: at, task, to });
        }
    }
    Ok(graph)
}
