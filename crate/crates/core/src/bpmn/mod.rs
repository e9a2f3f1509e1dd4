//! The supported BPMN subset: parsing, validation and serialization.

pub mod binding;
pub mod model;
pub mod parse;
pub mod validate;
pub mod write;

pub use binding::{parse_binding, render_binding, variable_name, BindingError, DataBinding, HttpInput, HttpOutput, SourceKind};
pub use model::{DataAssociation, DataObject, EndKind, FlowNode, NodeKind, ProcessModel, SequenceFlow};
pub use parse::{parse_bpmn, ParseError};
pub use validate::{has_errors, validate, Severity, Violation};
pub use write::to_xml;
