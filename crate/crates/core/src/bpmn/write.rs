use std::fmt::Write as _;

use super::binding::render_binding;
use super::model::{EndKind, NodeKind, ProcessModel};

fn esc(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(ch),
        }
    }
    out
}

/// Serialize a model back into the BPMN subset accepted by [`super::parse_bpmn`].
pub fn to_xml(model: &ProcessModel) -> String {
    let mut x = String::new();
    x.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    x.push_str(
        "<definitions xmlns=\"http://www.omg.org/spec/BPMN/20100524/MODEL\" \
         xmlns:xsi=\"http://www.w3.org/2001/XMLSchema-instance\" \
         targetNamespace=\"urn:tabforge\">\n",
    );
    let _ = writeln!(x, "  <process id=\"{}\" name=\"{}\" isExecutable=\"true\">", esc(&model.id), esc(&model.name));

    for n in &model.nodes {
        let tag = n.kind.element_name();
        let _ = write!(x, "    <{tag} id=\"{}\" name=\"{}\"", esc(&n.id), esc(&n.name));
        if let Some(d) = &n.decision_ref {
            let _ = write!(x, " decisionRef=\"{}\"", esc(d));
        }
        if n.kind == NodeKind::ExclusiveGateway {
            if let Some(f) = model.outgoing(&n.id).find(|f| f.is_default) {
                let _ = write!(x, " default=\"{}\"", esc(&f.id));
            }
        }
        let inputs: Vec<_> = model.associations.iter().filter(|a| a.to == n.id).collect();
        let outputs: Vec<_> = model.associations.iter().filter(|a| a.from == n.id).collect();
        let error_end = n.kind == NodeKind::EndEvent(EndKind::Error);
        if inputs.is_empty() && outputs.is_empty() && !error_end {
            x.push_str("/>\n");
            continue;
        }
        x.push_str(">\n");
        if error_end {
            x.push_str("      <errorEventDefinition/>\n");
        }
        for a in inputs {
            let _ = writeln!(x, "      <dataInputAssociation><sourceRef>{}</sourceRef></dataInputAssociation>", esc(&a.from));
        }
        for a in outputs {
            let _ = writeln!(x, "      <dataOutputAssociation><targetRef>{}</targetRef></dataOutputAssociation>", esc(&a.to));
        }
        let _ = writeln!(x, "    </{tag}>");
    }

    for f in &model.flows {
        let _ = write!(x, "    <sequenceFlow id=\"{}\" sourceRef=\"{}\" targetRef=\"{}\"", esc(&f.id), esc(&f.source), esc(&f.target));
        match &f.condition {
            Some(c) => {
                let _ = writeln!(
                    x,
                    "><conditionExpression xsi:type=\"tFormalExpression\">{}</conditionExpression></sequenceFlow>",
                    esc(c)
                );
            }
            None => x.push_str("/>\n"),
        }
    }

    for d in &model.data_objects {
        let _ = writeln!(x, "    <dataObject id=\"{}\" name=\"{}\"/>", esc(&d.id), esc(&d.name));
    }

    let annotated = model
        .data_objects
        .iter()
        .filter_map(|d| d.annotation.clone().map(|a| (&d.id, a)))
        .chain(model.nodes.iter().filter_map(|n| n.service_binding.as_ref().map(|b| (&n.id, render_binding(b)))));
    for (subject, text) in annotated {
        let ann = format!("{subject}__binding");
        let _ = writeln!(x, "    <textAnnotation id=\"{}\"><text>{}</text></textAnnotation>", esc(&ann), esc(&text));
        let _ = writeln!(x, "    <association sourceRef=\"{}\" targetRef=\"{}\"/>", esc(subject), esc(&ann));
    }

    x.push_str("  </process>\n</definitions>\n");
    x
}
