//! Data-flow annotations attached to data objects and service tasks.
//!
//! File source:
//! `[{"source":"file"},{"cid":"sha256:<hex>"},{"field":"productId"},...]`
//!
//! HTTP source:
//! `[{"source":"http"},{"url":"https://..."},{"in":{"name":"p","var":"v"}},{"out":{"var":"v","path":"a.b"}}]`

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value as Json};

use crate::canonical::Digest;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SourceKind {
    File,
    Http,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HttpInput {
    /// Request parameter name.
    pub name: String,
    /// Instance variable supplying the value.
    pub var: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HttpOutput {
    pub var: String,
    pub path: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DataBinding {
    File {
        cid: Option<Digest>,
        fields: Vec<String>,
    },
    Http {
        url: String,
        inputs: Vec<HttpInput>,
        outputs: Vec<HttpOutput>,
    },
}

impl DataBinding {
    pub fn source_kind(&self) -> SourceKind {
        match self {
            DataBinding::File { .. } => SourceKind::File,
            DataBinding::Http { .. } => SourceKind::Http,
        }
    }

    /// Names of the instance variables this binding produces.
    pub fn produced_variables(&self) -> Vec<String> {
        match self {
            DataBinding::File { fields, .. } => fields.iter().map(|f| variable_name(f).to_string()).collect(),
            DataBinding::Http { outputs, .. } => outputs.iter().map(|o| o.var.clone()).collect(),
        }
    }
}

/// A field path's final segment names the variable it lands in.
pub fn variable_name(path: &str) -> &str {
    path.rsplit('.').next().unwrap_or(path)
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BindingError {
    #[error("annotation is not valid JSON: {0}")]
    Json(String),
    #[error("annotation must be a JSON array of objects")]
    NotAnArray,
    #[error("first array element must be {{\"source\": ...}}")]
    MissingSource,
    #[error("unknown source `{0}`: only \"file\" or \"http\"")]
    UnknownSource(String),
    #[error("file binding declares no fields")]
    EmptyFields,
    #[error("http binding has no url")]
    MissingUrl,
    #[error("malformed cid `{0}`")]
    MalformedCid(String),
    #[error("unexpected entry {0}")]
    UnexpectedEntry(String),
    #[error("invalid field path `{0}`")]
    BadPath(String),
}

impl BindingError {
    pub fn code(&self) -> &'static str {
        match self {
            BindingError::Json(_) => "Json",
            BindingError::NotAnArray => "NotAnArray",
            BindingError::MissingSource => "MissingSource",
            BindingError::UnknownSource(_) => "UnknownSource",
            BindingError::EmptyFields => "EmptyFields",
            BindingError::MissingUrl => "MissingUrl",
            BindingError::MalformedCid(_) => "MalformedCid",
            BindingError::UnexpectedEntry(_) => "UnexpectedEntry",
            BindingError::BadPath(_) => "BadPath",
        }
    }
}

fn valid_path(path: &str) -> bool {
    !path.is_empty() && path.split('.').all(|seg| !seg.is_empty())
}

fn single_entry(obj: &Map<String, Json>) -> Option<(&str, &Json)> {
    if obj.len() == 1 {
        obj.iter().next().map(|(k, v)| (k.as_str(), v))
    } else {
        None
    }
}

fn str_field<'a>(v: &'a Json, key: &str) -> Option<&'a str> {
    v.get(key).and_then(Json::as_str)
}

pub fn parse_binding(annotation: &str) -> Result<DataBinding, BindingError> {
    let json: Json = serde_json::from_str(annotation).map_err(|e| BindingError::Json(e.to_string()))?;
    let items = json.as_array().ok_or(BindingError::NotAnArray)?;
    let objects: Vec<&Map<String, Json>> =
        items.iter().map(|i| i.as_object().ok_or(BindingError::NotAnArray)).collect::<Result<_, _>>()?;
    let (head, rest) = objects.split_first().ok_or(BindingError::MissingSource)?;
    let source = head.get("source").ok_or(BindingError::MissingSource)?;
    let source = source.as_str().ok_or_else(|| BindingError::UnknownSource(source.to_string()))?;
    let unexpected = |o: &Map<String, Json>| BindingError::UnexpectedEntry(Json::Object(o.clone()).to_string());

    match source {
        "file" => {
            let mut cid = None;
            let mut fields = Vec::new();
            for obj in rest {
                match single_entry(obj) {
                    Some(("cid", Json::String(s))) if cid.is_none() => {
                        cid = Some(s.parse().map_err(|_| BindingError::MalformedCid(s.clone()))?);
                    }
                    Some(("field", Json::String(path))) => {
                        if !valid_path(path) {
                            return Err(BindingError::BadPath(path.clone()));
                        }
                        fields.push(path.clone());
                    }
                    _ => return Err(unexpected(obj)),
                }
            }
            if fields.is_empty() {
                return Err(BindingError::EmptyFields);
            }
            Ok(DataBinding::File { cid, fields })
        }
        "http" => {
            let mut url = None;
            let mut inputs = Vec::new();
            let mut outputs = Vec::new();
            for obj in rest {
                match single_entry(obj) {
                    Some(("url", Json::String(u))) if url.is_none() => url = Some(u.clone()),
                    Some(("in", v)) => match (str_field(v, "name"), str_field(v, "var")) {
                        (Some(name), Some(var)) if v.as_object().is_some_and(|m| m.len() == 2) => {
                            inputs.push(HttpInput { name: name.to_string(), var: var.to_string() })
                        }
                        _ => return Err(unexpected(obj)),
                    },
                    Some(("out", v)) => match (str_field(v, "var"), str_field(v, "path")) {
                        (Some(var), Some(path)) if v.as_object().is_some_and(|m| m.len() == 2) => {
                            if !valid_path(path) {
                                return Err(BindingError::BadPath(path.to_string()));
                            }
                            outputs.push(HttpOutput { var: var.to_string(), path: path.to_string() })
                        }
                        _ => return Err(unexpected(obj)),
                    },
                    _ => return Err(unexpected(obj)),
                }
            }
            match url {
                Some(url) if !url.trim().is_empty() => Ok(DataBinding::Http { url, inputs, outputs }),
                _ => Err(BindingError::MissingUrl),
            }
        }
        other => Err(BindingError::UnknownSource(other.to_string())),
    }
}

/// Render a binding back into annotation text.
pub fn render_binding(binding: &DataBinding) -> String {
    let mut items = Vec::new();
    match binding {
        DataBinding::File { cid, fields } => {
            items.push(json!({"source": "file"}));
            if let Some(cid) = cid {
                items.push(json!({"cid": cid.to_string()}));
            }
            items.extend(fields.iter().map(|f| json!({"field": f})));
        }
        DataBinding::Http { url, inputs, outputs } => {
            items.push(json!({"source": "http"}));
            items.push(json!({"url": url}));
            items.extend(inputs.iter().map(|i| json!({"in": {"name": i.name, "var": i.var}})));
            items.extend(outputs.iter().map(|o| json!({"out": {"var": o.var, "path": o.path}})));
        }
    }
    Json::Array(items).to_string()
}
