pub mod bpmn;
pub mod canonical;
pub mod chain;
pub mod cli;
pub mod defsm;
pub mod dmn;
pub mod gateway;
pub mod monitor;
