use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::feel::{self, FeelError, UnaryTests};
use super::value::{Context, TriBool, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HitPolicy {
    Unique,
    First,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputClause {
    pub label: String,
    pub expression: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputClause {
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rule {
    pub input_entries: Vec<String>,
    pub output_entries: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionTable {
    pub id: String,
    pub name: String,
    pub hit_policy: HitPolicy,
    pub inputs: Vec<InputClause>,
    pub outputs: Vec<OutputClause>,
    pub rules: Vec<Rule>,
}

pub type Outcome = BTreeMap<String, Value>;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DmnParseError {
    #[error("XML error: {0}")]
    Xml(String),
    #[error("unsupported hit policy `{0}` (only UNIQUE and FIRST)")]
    UnsupportedHitPolicy(String),
    #[error("decision `{0}` has no rules")]
    EmptyRules(String),
    #[error("rule {rule} of `{decision}` has {found} {kind} entries, expected {expected}")]
    ArityMismatch { decision: String, rule: usize, kind: &'static str, found: usize, expected: usize },
    #[error("decision table structure: {0}")]
    Structure(String),
    #[error("FEEL error in `{decision}` ({place}): {error}")]
    Feel { decision: String, place: String, error: FeelError },
}

impl DmnParseError {
    pub fn code(&self) -> &'static str {
        match self {
            DmnParseError::Xml(_) => "XmlError",
            DmnParseError::UnsupportedHitPolicy(_) => "UnsupportedHitPolicy",
            DmnParseError::EmptyRules(_) => "EmptyRules",
            DmnParseError::ArityMismatch { .. } => "ArityMismatch",
            DmnParseError::Structure(_) => "StructureError",
            DmnParseError::Feel { .. } => "SyntaxError",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TableError {
    #[error("no rule of `{0}` matched")]
    NoRuleMatched(String),
    #[error("rules {rules:?} of `{decision}` all matched under hit policy UNIQUE")]
    MultipleMatches { decision: String, rules: Vec<usize> },
    #[error("evaluating `{decision}`: {error}")]
    Eval { decision: String, error: FeelError },
}

impl TableError {
    pub fn code(&self) -> &'static str {
        match self {
            TableError::NoRuleMatched(_) => "NoRuleMatched",
            TableError::MultipleMatches { .. } => "MultipleMatches",
            TableError::Eval { .. } => "EvalError",
        }
    }
}

impl DecisionTable {
    /// Arity and FEEL syntax checks.
    pub fn check(&self) -> Result<(), DmnParseError> {
        if self.rules.is_empty() {
            return Err(DmnParseError::EmptyRules(self.id.clone()));
        }
        if self.outputs.is_empty() {
            return Err(DmnParseError::Structure(format!("decision `{}` has no outputs", self.id)));
        }
        let feel_err = |place: String, error| DmnParseError::Feel { decision: self.id.clone(), place, error };
        for (i, input) in self.inputs.iter().enumerate() {
            feel::parse_expression(&input.expression).map_err(|e| feel_err(format!("input {i}"), e))?;
        }
        for (r, rule) in self.rules.iter().enumerate() {
            if rule.input_entries.len() != self.inputs.len() {
                return Err(DmnParseError::ArityMismatch {
                    decision: self.id.clone(),
                    rule: r,
                    kind: "input",
                    found: rule.input_entries.len(),
                    expected: self.inputs.len(),
                });
            }
            if rule.output_entries.len() != self.outputs.len() {
                return Err(DmnParseError::ArityMismatch {
                    decision: self.id.clone(),
                    rule: r,
                    kind: "output",
                    found: rule.output_entries.len(),
                    expected: self.outputs.len(),
                });
            }
            for (c, entry) in rule.input_entries.iter().enumerate() {
                feel::parse_unary_tests(entry).map_err(|e| feel_err(format!("rule {r} input {c}"), e))?;
            }
            for (c, entry) in rule.output_entries.iter().enumerate() {
                if !entry.trim().is_empty() {
                    feel::parse_expression(entry).map_err(|e| feel_err(format!("rule {r} output {c}"), e))?;
                }
            }
        }
        Ok(())
    }
}

fn eval_output(entry: &str, ctx: &Context) -> Result<Value, FeelError> {
    if entry.trim().is_empty() {
        return Ok(Value::Null);
    }
    feel::eval_expression(entry, ctx)
}

/// Evaluate a decision table. A rule matches iff every input entry is True;
/// Unknown never matches.
pub fn evaluate_table(table: &DecisionTable, ctx: &Context) -> Result<Outcome, TableError> {
    evaluate_table_metered(table, ctx, &mut |_| {})
}

/// Same as [`evaluate_table`], reporting one step per evaluated cell.
pub fn evaluate_table_metered(
    table: &DecisionTable,
    ctx: &Context,
    step: &mut dyn FnMut(u64),
) -> Result<Outcome, TableError> {
    let wrap = |error| TableError::Eval { decision: table.id.clone(), error };
    let inputs: Vec<Value> = table
        .inputs
        .iter()
        .map(|c| {
            step(1);
            feel::eval_expression(&c.expression, ctx)
        })
        .collect::<Result<_, _>>()
        .map_err(wrap)?;

    let mut matched = Vec::new();
    for (r, rule) in table.rules.iter().enumerate() {
        let mut verdict = TriBool::True;
        for (entry, input) in rule.input_entries.iter().zip(&inputs) {
            step(1);
            let tests: UnaryTests = feel::parse_unary_tests(entry).map_err(wrap)?;
            verdict = verdict.and(feel::eval_tests(&tests, input, ctx).map_err(wrap)?);
            if verdict == TriBool::False {
                break;
            }
        }
        if verdict.is_true() {
            matched.push(r);
            if table.hit_policy == HitPolicy::First {
                break;
            }
        }
    }

    let rule_index = match (table.hit_policy, matched.as_slice()) {
        (_, []) => return Err(TableError::NoRuleMatched(table.id.clone())),
        (HitPolicy::Unique, [one]) => *one,
        (HitPolicy::Unique, _) => {
            return Err(TableError::MultipleMatches { decision: table.id.clone(), rules: matched });
        }
        (HitPolicy::First, [first, ..]) => *first,
    };
    let rule = &table.rules[rule_index];
    table
        .outputs
        .iter()
        .zip(&rule.output_entries)
        .map(|(clause, entry)| {
            step(1);
            Ok((clause.name.clone(), eval_output(entry, ctx).map_err(wrap)?))
        })
        .collect()
}

// ---------------------------------------------------------------------------
// DMN XML

fn is(node: &roxmltree::Node<'_, '_>, local: &str) -> bool {
    node.is_element() && node.tag_name().name() == local
}

fn child<'a, 'i>(node: roxmltree::Node<'a, 'i>, local: &str) -> Option<roxmltree::Node<'a, 'i>> {
    node.children().find(|c| is(c, local))
}

fn text_of(node: Option<roxmltree::Node<'_, '_>>) -> String {
    node.and_then(|n| child(n, "text"))
        .and_then(|t| t.text())
        .unwrap_or("")
        .trim()
        .to_string()
}

fn parse_decision(decision: roxmltree::Node<'_, '_>) -> Result<DecisionTable, DmnParseError> {
    let id = decision
        .attribute("id")
        .ok_or_else(|| DmnParseError::Structure("decision without id".into()))?
        .to_string();
    let name = decision.attribute("name").unwrap_or(&id).to_string();
    let dt = child(decision, "decisionTable")
        .ok_or_else(|| DmnParseError::Structure(format!("decision `{id}` has no decisionTable")))?;
    let hit_policy = match dt.attribute("hitPolicy").unwrap_or("UNIQUE") {
        "UNIQUE" => HitPolicy::Unique,
        "FIRST" => HitPolicy::First,
        other => return Err(DmnParseError::UnsupportedHitPolicy(other.to_string())),
    };
    let mut inputs = Vec::new();
    let mut outputs = Vec::new();
    let mut rules = Vec::new();
    for c in dt.children().filter(|c| c.is_element()) {
        match c.tag_name().name() {
            "input" => {
                let expression = text_of(child(c, "inputExpression"));
                let label = c.attribute("label").map(str::to_string).unwrap_or_else(|| expression.clone());
                inputs.push(InputClause { label, expression });
            }
            "output" => {
                let name = c
                    .attribute("name")
                    .ok_or_else(|| DmnParseError::Structure(format!("output of `{id}` without name")))?;
                outputs.push(OutputClause { name: name.to_string() });
            }
            "rule" => {
                let input_entries = c.children().filter(|e| is(e, "inputEntry")).map(|e| text_of(Some(e))).collect();
                let output_entries = c.children().filter(|e| is(e, "outputEntry")).map(|e| text_of(Some(e))).collect();
                rules.push(Rule { input_entries, output_entries });
            }
            "annotation" | "description" | "extensionElements" => {}
            other => return Err(DmnParseError::Structure(format!("unsupported element `{other}` in decisionTable"))),
        }
    }
    let table = DecisionTable { id, name, hit_policy, inputs, outputs, rules };
    table.check()?;
    Ok(table)
}

/// Parse every decision table in a DMN document.
pub fn parse_dmn_all(xml: &[u8]) -> Result<Vec<DecisionTable>, DmnParseError> {
    let text = std::str::from_utf8(xml).map_err(|e| DmnParseError::Xml(e.to_string()))?;
    let doc = roxmltree::Document::parse(text).map_err(|e| DmnParseError::Xml(e.to_string()))?;
    let root = doc.root_element();
    if !is(&root, "definitions") {
        return Err(DmnParseError::Structure(format!("root element is `{}`, expected definitions", root.tag_name().name())));
    }
    root.children().filter(|c| is(c, "decision")).map(parse_decision).collect()
}

/// Parse a DMN document holding exactly one decision table.
pub fn parse_dmn(xml: &[u8]) -> Result<DecisionTable, DmnParseError> {
    let mut tables = parse_dmn_all(xml)?;
    match tables.len() {
        1 => Ok(tables.remove(0)),
        n => Err(DmnParseError::Structure(format!("expected one decision, found {n}"))),
    }
}
