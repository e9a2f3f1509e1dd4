//! FEEL subset: expressions and unary tests.
//!
//! The grammar is published in `grammar/feel.ebnf`. Null propagates through
//! arithmetic, comparisons touching Null are Unknown, and `and`/`or` follow
//! Kleene logic.

use std::cmp::Ordering;
use std::fmt;

use super::decimal::Decimal;
use super::value::{Context, TriBool, Value};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FeelError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("type mismatch: cannot apply `{op}` to {left} and {right}")]
    TypeMismatch { op: String, left: &'static str, right: &'static str },
}

impl FeelError {
    pub fn code(&self) -> &'static str {
        match self {
            FeelError::Syntax { .. } => "SyntaxError",
            FeelError::TypeMismatch { .. } => "TypeMismatch",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl fmt::Display for ArithOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ArithOp::Add => "+",
            ArithOp::Sub => "-",
            ArithOp::Mul => "*",
            ArithOp::Div => "/",
        })
    }
}

impl fmt::Display for CmpOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Literal(Value),
    Var(String),
    Neg(Box<Expr>),
    Arith(ArithOp, Box<Expr>, Box<Expr>),
    Compare(CmpOp, Box<Expr>, Box<Expr>),
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
    Not(Box<Expr>),
}

impl Expr {
    /// Variable names referenced anywhere in the expression.
    pub fn variables(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out.sort();
        out.dedup();
        out
    }

    fn collect_vars(&self, out: &mut Vec<String>) {
        match self {
            Expr::Literal(_) => {}
            Expr::Var(name) => out.push(name.clone()),
            Expr::Neg(e) | Expr::Not(e) => e.collect_vars(out),
            Expr::Arith(_, a, b) | Expr::Compare(_, a, b) | Expr::And(a, b) | Expr::Or(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum UnaryTest {
    /// `< e`, `<= e`, `> e`, `>= e`
    Compare(CmpOp, Expr),
    Interval { low: Expr, low_closed: bool, high: Expr, high_closed: bool },
    /// A bare endpoint: the input must equal it.
    Equals(Expr),
}

#[derive(Debug, Clone, PartialEq)]
pub enum UnaryTests {
    Any,
    Positive(Vec<UnaryTest>),
    Negated(Vec<UnaryTest>),
}

// ---------------------------------------------------------------------------
// Lexer

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Number(String),
    Str(String),
    Ident(String),
    Sym(&'static str),
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

const SYMBOLS: &[&str] = &["..", "<=", ">=", "!=", "+", "-", "*", "/", "=", "<", ">", "(", ")", "[", "]", ","];

impl<'a> Lexer<'a> {
    fn tokenize(src: &'a str) -> Result<Vec<(usize, Tok)>, FeelError> {
        let mut lexer = Lexer { src, pos: 0 };
        let mut out = Vec::new();
        while let Some(t) = lexer.next()? {
            out.push(t);
        }
        Ok(out)
    }

    fn next(&mut self) -> Result<Option<(usize, Tok)>, FeelError> {
        let rest = &self.src[self.pos..];
        let trimmed = rest.trim_start();
        self.pos += rest.len() - trimmed.len();
        let start = self.pos;
        let Some(c) = trimmed.chars().next() else {
            return Ok(None);
        };
        if c.is_ascii_digit() || (c == '.' && trimmed[1..].starts_with(|d: char| d.is_ascii_digit())) {
            let mut end = 0;
            let bytes = trimmed.as_bytes();
            let mut seen_dot = false;
            while end < bytes.len() {
                let b = bytes[end];
                if b.is_ascii_digit() {
                    end += 1;
                } else if b == b'.' && !seen_dot && bytes.get(end + 1).is_some_and(u8::is_ascii_digit) {
                    seen_dot = true;
                    end += 1;
                } else {
                    break;
                }
            }
            self.pos += end;
            return Ok(Some((start, Tok::Number(trimmed[..end].to_string()))));
        }
        if c == '"' {
            let mut text = String::new();
            let mut chars = trimmed[1..].char_indices();
            loop {
                match chars.next() {
                    None => {
                        return Err(FeelError::Syntax { offset: start, message: "unterminated string".into() });
                    }
                    Some((i, '"')) => {
                        self.pos += i + 2;
                        return Ok(Some((start, Tok::Str(text))));
                    }
                    Some((_, '\\')) => match chars.next() {
                        Some((_, '"')) => text.push('"'),
                        Some((_, '\\')) => text.push('\\'),
                        Some((_, 'n')) => text.push('\n'),
                        _ => {
                            return Err(FeelError::Syntax { offset: start, message: "bad escape in string".into() });
                        }
                    },
                    Some((_, ch)) => text.push(ch),
                }
            }
        }
        if c.is_alphabetic() || c == '_' {
            let end = trimmed
                .char_indices()
                .find(|&(_, ch)| !(ch.is_alphanumeric() || ch == '_' || ch == '.'))
                .map(|(i, _)| i)
                .unwrap_or(trimmed.len());
            // a trailing `..` belongs to a range, not to the name
            let mut ident = &trimmed[..end];
            if let Some(i) = ident.find("..") {
                ident = &ident[..i];
            }
            let ident = ident.trim_end_matches('.');
            self.pos += ident.len();
            return Ok(Some((start, Tok::Ident(ident.to_string()))));
        }
        for sym in SYMBOLS {
            if trimmed.starts_with(sym) {
                self.pos += sym.len();
                return Ok(Some((start, Tok::Sym(sym))));
            }
        }
        Err(FeelError::Syntax { offset: start, message: format!("unexpected character `{c}`") })
    }
}

// ---------------------------------------------------------------------------
// Parser

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    len: usize,
}

impl Parser {
    fn new(src: &str) -> Result<Self, FeelError> {
        Ok(Parser { toks: Lexer::tokenize(src)?, pos: 0, len: src.len() })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map(|(o, _)| *o).unwrap_or(self.len)
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T, FeelError> {
        Err(FeelError::Syntax { offset: self.offset(), message: message.into() })
    }

    fn eat_sym(&mut self, sym: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Sym(s)) if *s == sym) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Ident(s)) if s == kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, sym: &str) -> Result<(), FeelError> {
        if self.eat_sym(sym) {
            Ok(())
        } else {
            self.error(format!("expected `{sym}`"))
        }
    }

    fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    fn expression(&mut self) -> Result<Expr, FeelError> {
        let mut left = self.conjunction()?;
        while self.eat_keyword("or") {
            let right = self.conjunction()?;
            left = Expr::Or(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn conjunction(&mut self) -> Result<Expr, FeelError> {
        let mut left = self.comparison()?;
        while self.eat_keyword("and") {
            let right = self.comparison()?;
            left = Expr::And(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn cmp_op(&mut self) -> Option<CmpOp> {
        let op = match self.peek() {
            Some(Tok::Sym("=")) => CmpOp::Eq,
            Some(Tok::Sym("!=")) => CmpOp::Ne,
            Some(Tok::Sym("<")) => CmpOp::Lt,
            Some(Tok::Sym("<=")) => CmpOp::Le,
            Some(Tok::Sym(">")) => CmpOp::Gt,
            Some(Tok::Sym(">=")) => CmpOp::Ge,
            _ => return None,
        };
        self.pos += 1;
        Some(op)
    }

    fn comparison(&mut self) -> Result<Expr, FeelError> {
        let left = self.additive()?;
        if let Some(op) = self.cmp_op() {
            let right = self.additive()?;
            return Ok(Expr::Compare(op, Box::new(left), Box::new(right)));
        }
        Ok(left)
    }

    fn additive(&mut self) -> Result<Expr, FeelError> {
        let mut left = self.multiplicative()?;
        loop {
            let op = if self.eat_sym("+") {
                ArithOp::Add
            } else if self.eat_sym("-") {
                ArithOp::Sub
            } else {
                return Ok(left);
            };
            let right = self.multiplicative()?;
            left = Expr::Arith(op, Box::new(left), Box::new(right));
        }
    }

    fn multiplicative(&mut self) -> Result<Expr, FeelError> {
        let mut left = self.unary()?;
        loop {
            let op = if self.eat_sym("*") {
                ArithOp::Mul
            } else if self.eat_sym("/") {
                ArithOp::Div
            } else {
                return Ok(left);
            };
            let right = self.unary()?;
            left = Expr::Arith(op, Box::new(left), Box::new(right));
        }
    }

    fn unary(&mut self) -> Result<Expr, FeelError> {
        if self.eat_sym("-") {
            let inner = self.unary()?;
            return Ok(match inner {
                Expr::Literal(Value::Number(d)) => Expr::Literal(Value::Number(d.neg())),
                other => Expr::Neg(Box::new(other)),
            });
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, FeelError> {
        let Some((_, tok)) = self.toks.get(self.pos).cloned() else {
            return self.error("unexpected end of input");
        };
        match tok {
            Tok::Number(text) => {
                self.pos += 1;
                let d: Decimal = text.parse().map_err(|_| FeelError::Syntax {
                    offset: self.offset(),
                    message: format!("bad number `{text}`"),
                })?;
                Ok(Expr::Literal(Value::Number(d)))
            }
            Tok::Str(s) => {
                self.pos += 1;
                Ok(Expr::Literal(Value::Text(s)))
            }
            Tok::Ident(name) => {
                self.pos += 1;
                match name.as_str() {
                    "true" => Ok(Expr::Literal(Value::Boolean(true))),
                    "false" => Ok(Expr::Literal(Value::Boolean(false))),
                    "null" => Ok(Expr::Literal(Value::Null)),
                    "not" => {
                        self.expect_sym("(")?;
                        let inner = self.expression()?;
                        self.expect_sym(")")?;
                        Ok(Expr::Not(Box::new(inner)))
                    }
                    "and" | "or" => {
                        self.pos -= 1;
                        self.error(format!("unexpected keyword `{name}`"))
                    }
                    _ => Ok(Expr::Var(name)),
                }
            }
            Tok::Sym("(") => {
                self.pos += 1;
                let inner = self.expression()?;
                self.expect_sym(")")?;
                Ok(inner)
            }
            Tok::Sym(s) => self.error(format!("unexpected `{s}`")),
        }
    }

    /// Endpoints are arithmetic expressions (no comparisons or boolean ops).
    fn endpoint(&mut self) -> Result<Expr, FeelError> {
        self.additive()
    }

    fn positive_unary_test(&mut self) -> Result<UnaryTest, FeelError> {
        match self.peek() {
            Some(Tok::Sym("<")) | Some(Tok::Sym("<=")) | Some(Tok::Sym(">")) | Some(Tok::Sym(">=")) => {
                let op = self.cmp_op().expect("peeked comparison");
                Ok(UnaryTest::Compare(op, self.endpoint()?))
            }
            Some(Tok::Sym("[")) | Some(Tok::Sym("]")) => self.interval(),
            Some(Tok::Sym("(")) => {
                // `(a..b)` is an interval, `(expr)` a parenthesized endpoint
                let save = self.pos;
                if let Ok(t) = self.interval() {
                    return Ok(t);
                }
                self.pos = save;
                Ok(UnaryTest::Equals(self.endpoint()?))
            }
            _ => Ok(UnaryTest::Equals(self.endpoint()?)),
        }
    }

    fn interval(&mut self) -> Result<UnaryTest, FeelError> {
        let low_closed = if self.eat_sym("[") {
            true
        } else if self.eat_sym("(") || self.eat_sym("]") {
            false
        } else {
            return self.error("expected interval start");
        };
        let low = self.endpoint()?;
        self.expect_sym("..")?;
        let high = self.endpoint()?;
        let high_closed = if self.eat_sym("]") {
            true
        } else if self.eat_sym(")") || self.eat_sym("[") {
            false
        } else {
            return self.error("expected interval end");
        };
        Ok(UnaryTest::Interval { low, low_closed, high, high_closed })
    }

    fn positive_unary_tests(&mut self) -> Result<Vec<UnaryTest>, FeelError> {
        let mut tests = vec![self.positive_unary_test()?];
        while self.eat_sym(",") {
            tests.push(self.positive_unary_test()?);
        }
        Ok(tests)
    }

    fn unary_tests(&mut self) -> Result<UnaryTests, FeelError> {
        if matches!(self.peek(), Some(Tok::Ident(s)) if s == "not")
            && matches!(self.toks.get(self.pos + 1), Some((_, Tok::Sym("("))))
        {
            let save = self.pos;
            self.pos += 2;
            if let Ok(tests) = self.positive_unary_tests() {
                if self.eat_sym(")") && self.at_end() {
                    return Ok(UnaryTests::Negated(tests));
                }
            }
            self.pos = save;
        }
        Ok(UnaryTests::Positive(self.positive_unary_tests()?))
    }
}

pub fn parse_expression(src: &str) -> Result<Expr, FeelError> {
    let mut p = Parser::new(src)?;
    if p.at_end() {
        return p.error("empty expression");
    }
    let e = p.expression()?;
    if !p.at_end() {
        return p.error("unexpected trailing input");
    }
    Ok(e)
}

pub fn parse_unary_tests(src: &str) -> Result<UnaryTests, FeelError> {
    let trimmed = src.trim();
    if trimmed == "-" || trimmed.is_empty() {
        return Ok(UnaryTests::Any);
    }
    let mut p = Parser::new(trimmed)?;
    let tests = p.unary_tests()?;
    if !p.at_end() {
        return p.error("unexpected trailing input");
    }
    Ok(tests)
}

// ---------------------------------------------------------------------------
// Evaluation

fn mismatch(op: impl fmt::Display, l: &Value, r: &Value) -> FeelError {
    FeelError::TypeMismatch { op: op.to_string(), left: l.type_name(), right: r.type_name() }
}

fn arith(op: ArithOp, l: Value, r: Value) -> Result<Value, FeelError> {
    match (l, r) {
        (Value::Null, _) | (_, Value::Null) => Ok(Value::Null),
        (Value::Number(a), Value::Number(b)) => Ok(match op {
            ArithOp::Add => Value::Number(a.add(&b)),
            ArithOp::Sub => Value::Number(a.sub(&b)),
            ArithOp::Mul => Value::Number(a.mul(&b)),
            ArithOp::Div => a.div(&b).map(Value::Number).unwrap_or(Value::Null),
        }),
        (Value::Text(a), Value::Text(b)) if op == ArithOp::Add => Ok(Value::Text(a + &b)),
        (l, r) => Err(mismatch(op, &l, &r)),
    }
}

/// Three-valued comparison of two values.
pub fn compare(op: CmpOp, l: &Value, r: &Value) -> Result<TriBool, FeelError> {
    if matches!(op, CmpOp::Eq | CmpOp::Ne) {
        let eq = match (l, r) {
            (Value::Null, Value::Null) => TriBool::True,
            (Value::Null, _) | (_, Value::Null) => {
                // only an explicit null literal on one side makes this decidable
                TriBool::False
            }
            (Value::Number(a), Value::Number(b)) => (a == b).into(),
            (Value::Text(a), Value::Text(b)) => (a == b).into(),
            (Value::Boolean(a), Value::Boolean(b)) => (a == b).into(),
            _ => TriBool::False,
        };
        return Ok(if op == CmpOp::Eq { eq } else { !eq });
    }
    let ord = match (l, r) {
        (Value::Null, _) | (_, Value::Null) => return Ok(TriBool::Unknown),
        (Value::Number(a), Value::Number(b)) => a.cmp(b),
        (Value::Text(a), Value::Text(b)) => a.cmp(b),
        _ => return Err(mismatch(op, l, r)),
    };
    Ok(match op {
        CmpOp::Lt => ord == Ordering::Less,
        CmpOp::Le => ord != Ordering::Greater,
        CmpOp::Gt => ord == Ordering::Greater,
        CmpOp::Ge => ord != Ordering::Less,
        CmpOp::Eq | CmpOp::Ne => unreachable!(),
    }
    .into())
}

fn truth(v: &Value, op: &str) -> Result<TriBool, FeelError> {
    match v {
        Value::Boolean(b) => Ok((*b).into()),
        Value::Null => Ok(TriBool::Unknown),
        other => Err(FeelError::TypeMismatch { op: op.to_string(), left: other.type_name(), right: "boolean" }),
    }
}

pub fn eval(expr: &Expr, ctx: &Context) -> Result<Value, FeelError> {
    match expr {
        Expr::Literal(v) => Ok(v.clone()),
        Expr::Var(name) => Ok(ctx.get(name)),
        Expr::Neg(e) => match eval(e, ctx)? {
            Value::Number(d) => Ok(Value::Number(d.neg())),
            Value::Null => Ok(Value::Null),
            other => Err(mismatch("-", &Value::Number(Decimal::zero()), &other)),
        },
        Expr::Arith(op, a, b) => arith(*op, eval(a, ctx)?, eval(b, ctx)?),
        Expr::Compare(op, a, b) => {
            let (l, r) = (eval(a, ctx)?, eval(b, ctx)?);
            let null_literal = |e: &Expr| matches!(e, Expr::Literal(Value::Null));
            if matches!(op, CmpOp::Eq | CmpOp::Ne) && (l.is_null() || r.is_null()) {
                // `x = null` is a null test; any other equality touching null is unknown
                if null_literal(a) || null_literal(b) {
                    return Ok(compare(*op, &l, &r)?.to_value());
                }
                return Ok(Value::Null);
            }
            Ok(compare(*op, &l, &r)?.to_value())
        }
        Expr::And(a, b) => {
            let l = truth(&eval(a, ctx)?, "and")?;
            if l == TriBool::False {
                return Ok(Value::Boolean(false));
            }
            Ok(l.and(truth(&eval(b, ctx)?, "and")?).to_value())
        }
        Expr::Or(a, b) => {
            let l = truth(&eval(a, ctx)?, "or")?;
            if l == TriBool::True {
                return Ok(Value::Boolean(true));
            }
            Ok(l.or(truth(&eval(b, ctx)?, "or")?).to_value())
        }
        Expr::Not(e) => Ok((!truth(&eval(e, ctx)?, "not")?).to_value()),
    }
}

/// Parse and evaluate a FEEL expression.
pub fn eval_expression(src: &str, ctx: &Context) -> Result<Value, FeelError> {
    eval(&parse_expression(src)?, ctx)
}

fn eval_single_test(test: &UnaryTest, input: &Value, ctx: &Context) -> Result<TriBool, FeelError> {
    match test {
        UnaryTest::Compare(op, e) => compare(*op, input, &eval(e, ctx)?),
        UnaryTest::Interval { low, low_closed, high, high_closed } => {
            let lo = eval(low, ctx)?;
            let hi = eval(high, ctx)?;
            let lower = compare(if *low_closed { CmpOp::Ge } else { CmpOp::Gt }, input, &lo)?;
            let upper = compare(if *high_closed { CmpOp::Le } else { CmpOp::Lt }, input, &hi)?;
            Ok(lower.and(upper))
        }
        UnaryTest::Equals(e) => {
            let expected = eval(e, ctx)?;
            match (input, &expected) {
                (Value::Null, Value::Null) => Ok(TriBool::True),
                (_, Value::Null) => Ok(TriBool::False),
                (Value::Null, _) => Ok(TriBool::Unknown),
                _ => compare(CmpOp::Eq, input, &expected),
            }
        }
    }
}

pub fn eval_tests(tests: &UnaryTests, input: &Value, ctx: &Context) -> Result<TriBool, FeelError> {
    let any = |list: &[UnaryTest]| -> Result<TriBool, FeelError> {
        let mut acc = TriBool::False;
        for t in list {
            acc = acc.or(eval_single_test(t, input, ctx)?);
        }
        Ok(acc)
    };
    match tests {
        UnaryTests::Any => Ok(TriBool::True),
        UnaryTests::Positive(list) => any(list),
        UnaryTests::Negated(list) => Ok(!any(list)?),
    }
}

/// Parse and evaluate a unary test against an input value.
pub fn eval_unary_test(test: &str, input: &Value, ctx: &Context) -> Result<TriBool, FeelError> {
    eval_tests(&parse_unary_tests(test)?, input, ctx)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn num(s: &str) -> Value {
        Value::number(s)
    }

    #[test]
    fn percentage_expression() {
        let ctx = Context::new().with("quote", num("1200")).with("price", num("10000"));
        assert_eq!(eval_expression("quote / price * 100", &ctx).unwrap(), num("12"));
    }

    #[test]
    fn null_propagates_through_arithmetic() {
        assert_eq!(eval_expression("a + 1", &Context::new()).unwrap(), Value::Null);
        assert_eq!(eval_expression("-a", &Context::new()).unwrap(), Value::Null);
    }

    #[test]
    fn division_by_zero_is_null() {
        assert_eq!(eval_expression("1 / 0", &Context::new()).unwrap(), Value::Null);
        assert_eq!(eval_expression("(1 / 0) = null", &Context::new()).unwrap(), Value::Boolean(true));
    }

    #[test]
    fn precedence_and_grouping() {
        let c = Context::new();
        assert_eq!(eval_expression("1 + 2 * 3", &c).unwrap(), num("7"));
        assert_eq!(eval_expression("(1 + 2) * 3", &c).unwrap(), num("9"));
        assert_eq!(eval_expression("10 - 2 - 3", &c).unwrap(), num("5"));
        assert_eq!(eval_expression("-2 * -3", &c).unwrap(), num("6"));
        assert_eq!(eval_expression("1 < 2 and 3 >= 3", &c).unwrap(), Value::Boolean(true));
        assert_eq!(eval_expression("false or not(1 = 2)", &c).unwrap(), Value::Boolean(true));
    }

    #[test]
    fn type_mismatch_is_an_error() {
        let err = eval_expression("1 + \"a\"", &Context::new()).unwrap_err();
        assert_eq!(err.code(), "TypeMismatch");
        assert_eq!(eval_expression("\"a\" + \"b\"", &Context::new()).unwrap(), Value::text("ab"));
        assert!(eval_expression("1 and true", &Context::new()).is_err());
    }

    #[test]
    fn comparisons_with_null() {
        let c = Context::new();
        assert_eq!(eval_expression("x < 3", &c).unwrap(), Value::Null);
        assert_eq!(eval_expression("x = 3", &c).unwrap(), Value::Null);
        assert_eq!(eval_expression("x = null", &c).unwrap(), Value::Boolean(true));
        assert_eq!(eval_expression("x != null", &c).unwrap(), Value::Boolean(false));
        assert_eq!(eval_expression("x < 3 and false", &c).unwrap(), Value::Boolean(false));
        assert_eq!(eval_expression("x < 3 or true", &c).unwrap(), Value::Boolean(true));
        assert_eq!(eval_expression("x < 3 or false", &c).unwrap(), Value::Null);
    }

    #[test]
    fn syntax_errors() {
        for bad in ["", "1 +", "(1", "1 2", "\"open", "a $ b", "and"] {
            let err = eval_expression(bad, &Context::new()).unwrap_err();
            assert_eq!(err.code(), "SyntaxError", "{bad}");
        }
    }

    #[test]
    fn condition_with_text_and_dotted_names() {
        let ctx = Context::new().with("outcome", Value::text("proceed"));
        assert_eq!(eval_expression("outcome = \"proceed\"", &ctx).unwrap(), Value::Boolean(true));
        assert_eq!(parse_expression("buyer.name").unwrap(), Expr::Var("buyer.name".into()));
    }

    #[test]
    fn unary_tests_basic() {
        let c = Context::new();
        assert_eq!(eval_unary_test("< 15", &num("12"), &c).unwrap(), TriBool::True);
        assert_eq!(eval_unary_test("<= 15", &num("15"), &c).unwrap(), TriBool::True);
        assert_eq!(eval_unary_test("> 15", &num("15"), &c).unwrap(), TriBool::False);
        assert_eq!(eval_unary_test("-", &num("15"), &c).unwrap(), TriBool::True);
        assert_eq!(eval_unary_test("-", &Value::Null, &c).unwrap(), TriBool::True);
        assert_eq!(eval_unary_test("< 15", &Value::Null, &c).unwrap(), TriBool::Unknown);
        assert_eq!(eval_unary_test("-5", &num("-5"), &c).unwrap(), TriBool::True);
    }

    #[test]
    fn unary_intervals_and_lists() {
        let c = Context::new();
        let t = |s: &str, v: &str| eval_unary_test(s, &num(v), &c).unwrap();
        assert_eq!(t("[1..10]", "1"), TriBool::True);
        assert_eq!(t("[1..10]", "10"), TriBool::True);
        assert_eq!(t("(1..10)", "1"), TriBool::False);
        assert_eq!(t("]1..10[", "10"), TriBool::False);
        assert_eq!(t("[1..10)", "9.999"), TriBool::True);
        assert_eq!(t("1, 2, 3", "2"), TriBool::True);
        assert_eq!(t("1, 2, 3", "4"), TriBool::False);
        assert_eq!(t("not(1, 2)", "4"), TriBool::True);
        assert_eq!(t("not(1, 2)", "1"), TriBool::False);
        assert_eq!(t("(2 + 3)", "5"), TriBool::True);
        assert_eq!(t("< 2, > 8", "9"), TriBool::True);
    }

    #[test]
    fn unary_tests_with_text_and_null() {
        let c = Context::new();
        assert_eq!(eval_unary_test("\"proceed\"", &Value::text("proceed"), &c).unwrap(), TriBool::True);
        assert_eq!(eval_unary_test("\"proceed\"", &Value::text("abort"), &c).unwrap(), TriBool::False);
        assert_eq!(eval_unary_test("\"proceed\"", &Value::Null, &c).unwrap(), TriBool::Unknown);
        assert_eq!(eval_unary_test("null", &Value::Null, &c).unwrap(), TriBool::True);
        assert_eq!(eval_unary_test("null", &num("1"), &c).unwrap(), TriBool::False);
        assert_eq!(eval_unary_test("not(< 3)", &Value::Null, &c).unwrap(), TriBool::Unknown);
        assert!(eval_unary_test("< 3", &Value::text("a"), &c).is_err());
    }

    #[test]
    fn unary_endpoints_read_context() {
        let ctx = Context::new().with("limit", num("15"));
        assert_eq!(eval_unary_test("<= limit", &num("15"), &ctx).unwrap(), TriBool::True);
        assert_eq!(eval_unary_test("[limit - 5..limit]", &num("9"), &ctx).unwrap(), TriBool::False);
        assert_eq!(eval_unary_test("<= missing", &num("15"), &ctx).unwrap(), TriBool::Unknown);
    }

    #[test]
    fn unary_syntax_errors() {
        for bad in ["<", "[1..", "[1 10]", "< 1 2", "not(1"] {
            assert!(parse_unary_tests(bad).is_err(), "{bad}");
        }
    }
}
