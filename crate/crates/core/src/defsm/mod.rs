//! Compilation of process models into deployable flow-control packages, and
//! the reference token-game interpreter used to check them.

pub mod compile;
pub mod package;
pub mod reference;

pub use compile::{compile, CompileError};
pub use package::{CompiledFlow, CompiledGuard, CompiledNode, DataPort, DefsmPackage, EndNode, GuardBranch, PackageError};
pub use reference::{
    check_bounds, enabled_tasks, initial_state, reachable_graph, reference_step, Action, BoundsExceeded, DecisionOracle,
    Edge, EdgeTarget, GraphState, LabelledGraph, Marking, MarkingGraph, RefState, RunStatus, ScriptedOutcomes, StepError,
    TableDecisions,
};
