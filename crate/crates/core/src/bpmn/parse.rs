use std::collections::{BTreeMap, BTreeSet};

use roxmltree::{Document, Node};

use super::binding::{parse_binding, BindingError};
use super::model::{DataAssociation, DataObject, EndKind, FlowNode, NodeKind, ProcessModel, SequenceFlow};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("xml: {0}")]
    Xml(String),
    #[error("unsupported element <{element}>{}", id.as_ref().map(|i| format!(" (id {i})")).unwrap_or_default())]
    UnsupportedElement { element: String, id: Option<String> },
    #[error("{element} `{from}` references missing id `{missing}`")]
    DanglingReference { element: String, from: String, missing: String },
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
    #[error("<{element}> lacks attribute `{attribute}`")]
    MissingAttribute { element: String, attribute: String },
    #[error("service task `{task}` has an invalid binding: {source}")]
    InvalidBinding { task: String, source: BindingError },
}

impl ParseError {
    pub fn code(&self) -> &'static str {
        match self {
            ParseError::Xml(_) => "XmlError",
            ParseError::UnsupportedElement { .. } => "UnsupportedElement",
            ParseError::DanglingReference { .. } => "DanglingReference",
            ParseError::DuplicateId(_) => "DuplicateId",
            ParseError::MissingAttribute { .. } => "MissingAttribute",
            ParseError::InvalidBinding { .. } => "InvalidBinding",
        }
    }
}

fn unsupported(node: Node) -> ParseError {
    ParseError::UnsupportedElement {
        element: node.tag_name().name().to_string(),
        id: node.attribute("id").map(str::to_string),
    }
}

fn required<'a>(node: Node<'a, '_>, attribute: &str) -> Result<&'a str, ParseError> {
    node.attribute(attribute).ok_or_else(|| ParseError::MissingAttribute {
        element: node.tag_name().name().to_string(),
        attribute: attribute.to_string(),
    })
}

fn elements<'a, 'i>(node: Node<'a, 'i>) -> impl Iterator<Item = Node<'a, 'i>> {
    node.children().filter(Node::is_element)
}

fn child<'a, 'i>(node: Node<'a, 'i>, name: &str) -> Option<Node<'a, 'i>> {
    elements(node).find(|c| c.tag_name().name() == name)
}

fn child_text(node: Node, name: &str) -> Option<String> {
    let text: String = child(node, name)?.descendants().filter(Node::is_text).filter_map(|t| t.text()).collect();
    let text = text.trim();
    (!text.is_empty()).then(|| text.to_string())
}

/// Attribute looked up by local name in any namespace (e.g. `camunda:decisionRef`).
fn any_ns_attribute<'a>(node: Node<'a, '_>, local: &str) -> Option<&'a str> {
    node.attributes().find(|a| a.name() == local).map(|a| a.value())
}

const IGNORED: &[&str] = &["documentation", "extensionElements", "BPMNDiagram"];

struct Annotation {
    id: String,
    text: String,
}

#[derive(Default)]
struct Collected {
    process_id: String,
    process_name: String,
    nodes: Vec<FlowNode>,
    flows: Vec<SequenceFlow>,
    defaults: Vec<(String, String)>,
    data_objects: Vec<DataObject>,
    plain_objects: BTreeSet<String>,
    associations: Vec<DataAssociation>,
    annotations: Vec<Annotation>,
    links: Vec<(String, String)>,
    /// `dataObjectReference` id -> `dataObject` id
    ref_links: Vec<(String, String)>,
}

pub fn parse_bpmn(xml: impl AsRef<[u8]>) -> Result<ProcessModel, ParseError> {
    let xml = std::str::from_utf8(xml.as_ref()).map_err(|e| ParseError::Xml(e.to_string()))?;
    let doc = Document::parse(xml).map_err(|e| ParseError::Xml(e.to_string()))?;
    let root = doc.root_element();
    if root.tag_name().name() != "definitions" {
        return Err(unsupported(root));
    }

    let mut processes = Vec::new();
    let mut c = Collected::default();
    for el in elements(root) {
        match el.tag_name().name() {
            "process" => processes.push(el),
            "collaboration" => collaboration(el, &mut c)?,
            "error" => {}
            name if IGNORED.contains(&name) => {}
            _ => return Err(unsupported(el)),
        }
    }
    match processes.as_slice() {
        [p] => process(*p, &mut c)?,
        [] => {
            return Err(ParseError::MissingAttribute { element: "definitions".into(), attribute: "process".into() })
        }
        [_, extra, ..] => return Err(unsupported(*extra)),
    }
    assemble(c)
}

fn collaboration(el: Node, c: &mut Collected) -> Result<(), ParseError> {
    let mut participants = 0;
    for item in elements(el) {
        match item.tag_name().name() {
            "participant" => {
                participants += 1;
                if participants > 1 {
                    return Err(unsupported(item));
                }
            }
            "textAnnotation" => annotation(item, c)?,
            "association" => association(item, c)?,
            name if IGNORED.contains(&name) => {}
            _ => return Err(unsupported(item)),
        }
    }
    Ok(())
}

fn annotation(el: Node, c: &mut Collected) -> Result<(), ParseError> {
    let id = required(el, "id")?.to_string();
    let text = child_text(el, "text").unwrap_or_default();
    c.annotations.push(Annotation { id, text });
    Ok(())
}

fn association(el: Node, c: &mut Collected) -> Result<(), ParseError> {
    let s = required(el, "sourceRef")?.to_string();
    let t = required(el, "targetRef")?.to_string();
    c.links.push((s, t));
    Ok(())
}

fn process(el: Node, c: &mut Collected) -> Result<(), ParseError> {
    c.process_id = required(el, "id")?.to_string();
    c.process_name = el.attribute("name").unwrap_or(&c.process_id).to_string();
    for item in elements(el) {
        let name = item.tag_name().name();
        match name {
            "startEvent" => {
                if let Some(def) = elements(item).find(|d| d.tag_name().name().ends_with("EventDefinition")) {
                    return Err(unsupported(def));
                }
                node(item, NodeKind::StartEvent, c)?;
            }
            "endEvent" => {
                let mut kind = EndKind::Normal;
                for def in elements(item).filter(|d| d.tag_name().name().ends_with("EventDefinition")) {
                    match def.tag_name().name() {
                        "errorEventDefinition" if kind == EndKind::Normal => kind = EndKind::Error,
                        _ => return Err(unsupported(def)),
                    }
                }
                node(item, NodeKind::EndEvent(kind), c)?;
            }
            "userTask" => node(item, NodeKind::UserTask, c)?,
            "serviceTask" => node(item, NodeKind::ServiceTask, c)?,
            "businessRuleTask" => node(item, NodeKind::BusinessRuleTask, c)?,
            "parallelGateway" => node(item, NodeKind::ParallelGateway, c)?,
            "exclusiveGateway" => {
                if let Some(default) = item.attribute("default") {
                    c.defaults.push((required(item, "id")?.to_string(), default.to_string()));
                }
                node(item, NodeKind::ExclusiveGateway, c)?;
            }
            "sequenceFlow" => {
                let mut flow = SequenceFlow::new(
                    required(item, "id")?,
                    required(item, "sourceRef")?,
                    required(item, "targetRef")?,
                );
                flow.condition = child_text(item, "conditionExpression");
                c.flows.push(flow);
                for sub in elements(item) {
                    if !matches!(sub.tag_name().name(), "conditionExpression" | "documentation" | "extensionElements") {
                        return Err(unsupported(sub));
                    }
                }
            }
            "dataObject" => {
                let id = required(item, "id")?.to_string();
                c.plain_objects.insert(id.clone());
                c.data_objects.push(DataObject {
                    name: item.attribute("name").unwrap_or(&id).to_string(),
                    id,
                    annotation: None,
                });
            }
            "dataObjectReference" => {
                let id = required(item, "id")?.to_string();
                let target = item.attribute("dataObjectRef").map(str::to_string);
                c.data_objects.push(DataObject {
                    name: item.attribute("name").unwrap_or(&id).to_string(),
                    id: id.clone(),
                    annotation: None,
                });
                if let Some(target) = target {
                    c.ref_links.push((id, target));
                }
            }
            "textAnnotation" => annotation(item, c)?,
            "association" => association(item, c)?,
            "laneSet" => {
                let lanes: Vec<_> = elements(item).filter(|l| l.tag_name().name() == "lane").collect();
                if lanes.len() > 1 {
                    return Err(unsupported(lanes[1]));
                }
                for lane in &lanes {
                    if let Some(nested) = child(*lane, "childLaneSet") {
                        return Err(unsupported(nested));
                    }
                }
            }
            name if IGNORED.contains(&name) => {}
            _ => return Err(unsupported(item)),
        }
    }
    Ok(())
}

fn node(el: Node, kind: NodeKind, c: &mut Collected) -> Result<(), ParseError> {
    let id = required(el, "id")?.to_string();
    let mut n = FlowNode::new(id.clone(), kind);
    if let Some(name) = el.attribute("name") {
        n.name = name.to_string();
    }
    if kind == NodeKind::BusinessRuleTask {
        n.decision_ref = any_ns_attribute(el, "decisionRef").map(str::to_string);
    }
    for sub in elements(el) {
        match sub.tag_name().name() {
            "incoming" | "outgoing" | "documentation" | "extensionElements" | "ioSpecification" | "property" => {}
            "errorEventDefinition" if matches!(kind, NodeKind::EndEvent(_)) => {}
            "dataInputAssociation" if kind.is_task() => {
                for source in elements(sub).filter(|s| s.tag_name().name() == "sourceRef") {
                    let from = source.text().unwrap_or("").trim().to_string();
                    c.associations.push(DataAssociation { from, to: id.clone() });
                }
            }
            "dataOutputAssociation" if kind.is_task() => {
                let to = child_text(sub, "targetRef").ok_or_else(|| ParseError::MissingAttribute {
                    element: "dataOutputAssociation".into(),
                    attribute: "targetRef".into(),
                })?;
                c.associations.push(DataAssociation { from: id.clone(), to });
            }
            _ => return Err(unsupported(sub)),
        }
    }
    c.nodes.push(n);
    Ok(())
}

fn assemble(mut c: Collected) -> Result<ProcessModel, ParseError> {
    let dangling = |element: &str, from: &str, missing: &str| ParseError::DanglingReference {
        element: element.to_string(),
        from: from.to_string(),
        missing: missing.to_string(),
    };

    // dataObjectReference -> dataObject resolution; the plain object folds into its reference.
    let ref_links = std::mem::take(&mut c.ref_links);
    for (r, target) in &ref_links {
        if !c.plain_objects.contains(target) {
            return Err(dangling("dataObjectReference", r, target));
        }
    }
    let folded: BTreeSet<&String> = ref_links.iter().map(|(_, t)| t).collect();
    let folded_names: BTreeMap<String, String> = c
        .data_objects
        .iter()
        .filter(|d| folded.contains(&d.id))
        .map(|d| (d.id.clone(), d.name.clone()))
        .collect();
    for (r, target) in &ref_links {
        if let Some(obj) = c.data_objects.iter_mut().find(|d| &d.id == r) {
            if obj.name == obj.id {
                if let Some(n) = folded_names.get(target) {
                    obj.name = n.clone();
                }
            }
        }
    }
    let mut data_objects: Vec<DataObject> =
        c.data_objects.into_iter().filter(|d| !folded.contains(&d.id)).collect();
    // a data association may name the plain object rather than its reference
    let alias: BTreeMap<String, String> = ref_links.iter().map(|(r, t)| (t.clone(), r.clone())).collect();

    let mut seen = BTreeSet::new();
    let ids = c
        .nodes
        .iter()
        .map(|n| &n.id)
        .chain(c.flows.iter().map(|f| &f.id))
        .chain(data_objects.iter().map(|d| &d.id))
        .chain(c.annotations.iter().map(|a| &a.id));
    for id in ids {
        if !seen.insert(id.clone()) {
            return Err(ParseError::DuplicateId(id.clone()));
        }
    }
    for id in folded.iter() {
        if !seen.insert((*id).clone()) {
            return Err(ParseError::DuplicateId((*id).clone()));
        }
    }

    let node_ids: BTreeSet<&str> = c.nodes.iter().map(|n| n.id.as_str()).collect();
    for f in &c.flows {
        for end in [&f.source, &f.target] {
            if !node_ids.contains(end.as_str()) {
                return Err(dangling("sequenceFlow", &f.id, end));
            }
        }
    }
    for (gateway, flow) in &c.defaults {
        match c.flows.iter_mut().find(|f| &f.id == flow) {
            Some(f) => f.is_default = true,
            None => return Err(dangling("exclusiveGateway", gateway, flow)),
        }
    }

    let data_ids: BTreeSet<String> = data_objects.iter().map(|d| d.id.clone()).collect();
    for a in &mut c.associations {
        for end in [&mut a.from, &mut a.to] {
            if let Some(r) = alias.get(end.as_str()) {
                *end = r.clone();
            }
        }
        let (task, data) = if node_ids.contains(a.to.as_str()) { (&a.to, &a.from) } else { (&a.from, &a.to) };
        if !data_ids.contains(data.as_str()) {
            return Err(dangling("dataAssociation", task, data));
        }
    }

    let annotations: BTreeMap<&str, &str> = c.annotations.iter().map(|a| (a.id.as_str(), a.text.as_str())).collect();
    for (s, t) in &c.links {
        let (subject, text) = match (annotations.get(s.as_str()), annotations.get(t.as_str())) {
            (Some(text), None) => (t, *text),
            (None, Some(text)) => (s, *text),
            _ => continue,
        };
        let subject = alias.get(subject).unwrap_or(subject);
        if let Some(obj) = data_objects.iter_mut().find(|d| &d.id == subject) {
            obj.annotation = Some(text.to_string());
        } else if let Some(node) = c.nodes.iter_mut().find(|n| &n.id == subject) {
            if node.kind == NodeKind::ServiceTask {
                let binding = parse_binding(text)
                    .map_err(|source| ParseError::InvalidBinding { task: node.id.clone(), source })?;
                node.service_binding = Some(binding);
            }
        } else if !seen.contains(subject) {
            return Err(dangling("association", s, subject));
        }
    }

    Ok(ProcessModel {
        id: c.process_id,
        name: c.process_name,
        nodes: c.nodes,
        flows: c.flows,
        data_objects,
        associations: c.associations,
    })
}
