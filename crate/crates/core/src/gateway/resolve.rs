//! Turns data bindings into instance variables at task completion.
//!
//! A task's output ports are visited in data-object-id order. A file binding
//! with a fixed cid reads that document from the store; a cid-less one takes
//! the next document attached to the completion, or is skipped when the
//! explicit parameters already supply every field it declares. Input ports
//! with a fixed cid are re-read at the consumer. An http binding on the
//! service task is called last, with the variables resolved so far layered
//! over the instance's.

use std::collections::BTreeMap;

use serde_json::{Map, Value as Json};

use super::cas::{CasError, ContentStore};
use super::http::{HttpClient, HttpError};
use crate::bpmn::{variable_name, DataBinding, HttpOutput};
use crate::canonical::Digest;
use crate::defsm::CompiledNode;
use crate::dmn::{Context, Value};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ResolveError {
    #[error(transparent)]
    Store(#[from] CasError),
    #[error("stored bytes for {0} do not hash to it")]
    Integrity(Digest),
    #[error("document {0} is not JSON")]
    NotJson(Digest),
    #[error("{source_id} has no field `{path}`")]
    FieldMissing { source_id: String, path: String },
    #[error("{source_id} field `{path}` is not a scalar")]
    NonScalarField { source_id: String, path: String },
    #[error("no document attached for data object {0}")]
    MissingDocument(String),
    #[error("call to {url} failed: {error}")]
    HttpFailure { url: String, error: HttpError },
    #[error("variable `{0}` is supplied twice with different values")]
    Collision(String),
}

impl ResolveError {
    pub fn code(&self) -> &'static str {
        match self {
            ResolveError::Store(e) => e.code(),
            ResolveError::Integrity(_) => "IntegrityError",
            ResolveError::NotJson(_) => "NotJson",
            ResolveError::FieldMissing { .. } => "FieldMissing",
            ResolveError::NonScalarField { .. } => "NonScalarField",
            ResolveError::MissingDocument(_) => "MissingDocument",
            ResolveError::HttpFailure { .. } => "HttpFailure",
            ResolveError::Collision(_) => "Collision",
        }
    }
}

/// Fetch a document, check it still hashes to its cid and decode it.
pub fn load_document(cas: &dyn ContentStore, cid: &Digest) -> Result<Json, ResolveError> {
    let bytes = cas.get(cid)?;
    if Digest::of(&bytes) != *cid {
        return Err(ResolveError::Integrity(*cid));
    }
    serde_json::from_slice(&bytes).map_err(|_| ResolveError::NotJson(*cid))
}

/// Follow a dotted path through nested objects.
pub fn lookup<'a>(doc: &'a Json, path: &str) -> Option<&'a Json> {
    path.split('.').try_fold(doc, |at, seg| at.as_object()?.get(seg))
}

fn scalar_at(doc: &Json, path: &str, source_id: &str) -> Result<Value, ResolveError> {
    let found = lookup(doc, path)
        .ok_or_else(|| ResolveError::FieldMissing { source_id: source_id.to_string(), path: path.to_string() })?;
    Value::from_json(found)
        .ok_or_else(|| ResolveError::NonScalarField { source_id: source_id.to_string(), path: path.to_string() })
}

/// Variables accumulated from several sources; a name may only repeat with an equal value.
#[derive(Debug, Default)]
pub struct Resolved(BTreeMap<String, Value>);

impl Resolved {
    pub fn insert(&mut self, name: String, value: Value) -> Result<(), ResolveError> {
        match self.0.get(&name) {
            Some(existing) if *existing != value => Err(ResolveError::Collision(name)),
            _ => {
                self.0.insert(name, value);
                Ok(())
            }
        }
    }

    pub fn into_map(self) -> BTreeMap<String, Value> {
        self.0
    }
}

fn extract_fields(doc: &Json, fields: &[String], source_id: &str, out: &mut Resolved) -> Result<(), ResolveError> {
    for path in fields {
        out.insert(variable_name(path).to_string(), scalar_at(doc, path, source_id)?)?;
    }
    Ok(())
}

fn call_http(
    http: &dyn HttpClient,
    url: &str,
    inputs: &[crate::bpmn::HttpInput],
    outputs: &[HttpOutput],
    vars: &Context,
    out: &mut Resolved,
) -> Result<(), ResolveError> {
    let body: Map<String, Json> = inputs
        .iter()
        .map(|i| {
            let v = out.0.get(&i.var).cloned().unwrap_or_else(|| vars.get(&i.var));
            (i.name.clone(), v.to_json())
        })
        .collect();
    let reply = http
        .post_json(url, &Json::Object(body))
        .map_err(|error| ResolveError::HttpFailure { url: url.to_string(), error })?;
    for o in outputs {
        out.insert(o.var.clone(), scalar_at(&reply, &o.path, url)?)?;
    }
    Ok(())
}

/// Variables a completion of `node` contributes. `attached` are the documents
/// submitted with it, in submission order; `given` the explicit parameters.
pub fn resolve_task(
    node: &CompiledNode,
    attached: &[(Digest, Json)],
    given: &BTreeMap<String, Value>,
    vars: &Context,
    cas: &dyn ContentStore,
    http: &dyn HttpClient,
) -> Result<BTreeMap<String, Value>, ResolveError> {
    let mut out = Resolved::default();
    let mut pending = attached.iter();
    for port in &node.outputs {
        match &port.binding {
            Some(DataBinding::File { cid: Some(cid), fields }) => {
                extract_fields(&load_document(cas, cid)?, fields, &port.data_object, &mut out)?
            }
            Some(DataBinding::File { cid: None, fields }) => match pending.next() {
                Some((_, doc)) => extract_fields(doc, fields, &port.data_object, &mut out)?,
                None if fields.iter().all(|f| given.contains_key(variable_name(f))) => {}
                None => return Err(ResolveError::MissingDocument(port.data_object.clone())),
            },
            Some(DataBinding::Http { url, inputs, outputs }) => call_http(http, url, inputs, outputs, vars, &mut out)?,
            None => {}
        }
    }
    for port in &node.inputs {
        if let Some(DataBinding::File { cid: Some(cid), fields }) = &port.binding {
            extract_fields(&load_document(cas, cid)?, fields, &port.data_object, &mut out)?;
        }
    }
    if let Some(DataBinding::Http { url, inputs, outputs }) = &node.binding {
        call_http(http, url, inputs, outputs, vars, &mut out)?;
    }
    Ok(out.into_map())
}
