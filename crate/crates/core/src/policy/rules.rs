//! IF-THEN rule files for the threshold policy.
//!
//! ```text
//! # comment
//! IF frustration_score > 0.8 THEN invoke QueryRefineSimulator
//! IF docs_saved >= 3 AND step_index > 10 OR queries_issued == 0 THEN QueryGeneration
//! DEFAULT RelevanceDecision
//! ```
//!
//! AND binds tighter than OR; both are left-associative. `invoke` is optional.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::features::{extract_features, is_rule_feature, rule_feature, FeatureVector};
use crate::model::SimulationState;
use crate::simulators::{Registry, UnknownComponent};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RuleError {
    #[error("rule syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("unknown feature \"{name}\" at line {line}, column {column}")]
    UnknownFeature { name: String, line: usize, column: usize },
    #[error("rule file has no DEFAULT line")]
    MissingDefault,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Op {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
}

impl Op {
    fn holds(self, a: f64, b: f64) -> bool {
        match self {
            Op::Lt => a < b,
            Op::Le => a <= b,
            Op::Gt => a > b,
            Op::Ge => a >= b,
            Op::Eq => a == b,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            Op::Lt => "<",
            Op::Le => "<=",
            Op::Gt => ">",
            Op::Ge => ">=",
            Op::Eq => "==",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Expr {
    Cmp { feature: String, op: Op, value: f64 },
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
}

impl Expr {
    /// Unknown features never occur after parsing; they evaluate false.
    pub fn eval(&self, state: &SimulationState, features: &FeatureVector) -> bool {
        match self {
            Expr::Cmp { feature, op, value } => {
                rule_feature(state, features, feature).is_some_and(|v| op.holds(v, *value))
            }
            Expr::And(a, b) => a.eval(state, features) && b.eval(state, features),
            Expr::Or(a, b) => a.eval(state, features) || b.eval(state, features),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Cmp { feature, op, value } => write!(f, "{feature} {} {value}", op.symbol()),
            Expr::And(a, b) => write!(f, "({a} AND {b})"),
            Expr::Or(a, b) => write!(f, "({a} OR {b})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub condition: Expr,
    pub component: String,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RulePolicy {
    pub rules: Vec<Rule>,
    pub default: String,
}

impl RulePolicy {
    /// First matching rule wins; `None` for the rule index means the default.
    pub fn select(&self, state: &SimulationState) -> (&str, Option<usize>) {
        let features = extract_features(state);
        self.rules
            .iter()
            .position(|r| r.condition.eval(state, &features))
            .map_or((self.default.as_str(), None), |i| (self.rules[i].component.as_str(), Some(i)))
    }

    pub fn components(&self) -> impl Iterator<Item = &str> {
        self.rules.iter().map(|r| r.component.as_str()).chain(std::iter::once(self.default.as_str()))
    }

    pub fn check_components(&self, registry: &Registry) -> Result<(), UnknownComponent> {
        self.components().try_for_each(|c| registry.get(c).map(|_| ()))
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Num(f64),
    Op(Op),
}

fn lex(text: &str, line: usize) -> Result<Vec<(Tok, usize)>, RuleError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let err = |column: usize, message: String| RuleError::Syntax { line, column, message };
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((Tok::Word(chars[start..i].iter().collect()), col));
        } else if c.is_ascii_digit() || c == '-' || c == '.' {
            let start = i;
            i += 1;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            let s: String = chars[start..i].iter().collect();
            let n = s.parse::<f64>().map_err(|_| err(col, format!("invalid number \"{s}\"")))?;
            out.push((Tok::Num(n), col));
        } else if matches!(c, '<' | '>' | '=') {
            let eq_next = chars.get(i + 1) == Some(&'=');
            let op = match (c, eq_next) {
                ('<', true) => Op::Le,
                ('<', false) => Op::Lt,
                ('>', true) => Op::Ge,
                ('>', false) => Op::Gt,
                ('=', true) => Op::Eq,
                _ => return Err(err(col, "expected \"==\"".into())),
            };
            i += if eq_next { 2 } else { 1 };
            out.push((Tok::Op(op), col));
        } else {
            return Err(err(col, format!("unexpected character '{c}'")));
        }
    }
    Ok(out)
}

fn is_kw(tok: &Tok, kw: &str) -> bool {
    matches!(tok, Tok::Word(w) if w.eq_ignore_ascii_case(kw))
}

const KEYWORDS: [&str; 6] = ["IF", "THEN", "AND", "OR", "DEFAULT", "INVOKE"];

struct LineParser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    line: usize,
    end_col: usize,
}

impl LineParser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn col(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end_col, |(_, c)| *c)
    }

    fn fail<T>(&self, message: impl Into<String>) -> Result<T, RuleError> {
        Err(RuleError::Syntax { line: self.line, column: self.col(), message: message.into() })
    }

    fn keyword(&mut self, kw: &str) -> Result<(), RuleError> {
        match self.peek() {
            Some(t) if is_kw(t, kw) => {
                self.pos += 1;
                Ok(())
            }
            _ => self.fail(format!("expected {kw}")),
        }
    }

    fn ident(&mut self, what: &str) -> Result<(String, usize), RuleError> {
        match self.peek() {
            Some(Tok::Word(w)) if !KEYWORDS.iter().any(|k| w.eq_ignore_ascii_case(k)) => {
                let out = (w.clone(), self.col());
                self.pos += 1;
                Ok(out)
            }
            _ => self.fail(format!("expected {what}")),
        }
    }

    fn comparison(&mut self) -> Result<Expr, RuleError> {
        let (feature, column) = self.ident("a feature name")?;
        if !is_rule_feature(&feature) {
            return Err(RuleError::UnknownFeature { name: feature, line: self.line, column });
        }
        let op = match self.peek() {
            Some(Tok::Op(op)) => *op,
            _ => return self.fail("expected a comparison operator"),
        };
        self.pos += 1;
        let value = match self.peek() {
            Some(Tok::Num(n)) => *n,
            _ => return self.fail("expected a number"),
        };
        self.pos += 1;
        Ok(Expr::Cmp { feature, op, value })
    }

    fn conjunction(&mut self) -> Result<Expr, RuleError> {
        let mut lhs = self.comparison()?;
        while self.peek().is_some_and(|t| is_kw(t, "AND")) {
            self.pos += 1;
            lhs = Expr::And(Box::new(lhs), Box::new(self.comparison()?));
        }
        Ok(lhs)
    }

    fn expr(&mut self) -> Result<Expr, RuleError> {
        let mut lhs = self.conjunction()?;
        while self.peek().is_some_and(|t| is_kw(t, "OR")) {
            self.pos += 1;
            lhs = Expr::Or(Box::new(lhs), Box::new(self.conjunction()?));
        }
        Ok(lhs)
    }

    fn finish(&self) -> Result<(), RuleError> {
        match self.peek() {
            None => Ok(()),
            Some(_) => self.fail("unexpected trailing input"),
        }
    }
}

pub fn parse_rules(source: &str) -> Result<RulePolicy, RuleError> {
    let mut rules = Vec::new();
    let mut default: Option<String> = None;
    for (i, raw) in source.lines().enumerate() {
        let line = i + 1;
        let text = raw.split('#').next().unwrap_or("");
        let toks = lex(text, line)?;
        if toks.is_empty() {
            continue;
        }
        let mut p = LineParser { toks, pos: 0, line, end_col: text.trim_end().chars().count() + 1 };
        if default.is_some() {
            return p.fail("DEFAULT must be the last rule");
        }
        if p.peek().is_some_and(|t| is_kw(t, "DEFAULT")) {
            p.pos += 1;
            default = Some(p.ident("a component id")?.0);
            p.finish()?;
            continue;
        }
        p.keyword("IF")?;
        let condition = p.expr()?;
        p.keyword("THEN")?;
        if p.peek().is_some_and(|t| is_kw(t, "invoke")) {
            p.pos += 1;
        }
        let component = p.ident("a component id")?.0;
        p.finish()?;
        rules.push(Rule { condition, component, line });
    }
    Ok(RulePolicy { rules, default: default.ok_or(RuleError::MissingDefault)? })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn and_binds_tighter_than_or() {
        let p = parse_rules("IF a_x > 1 OR b > 2 AND c > 3 THEN X\nDEFAULT Y").err();
        assert!(matches!(p, Some(RuleError::UnknownFeature { ref name, .. }) if name == "a_x"));
        let p = parse_rules("IF docs_saved > 1 OR step_index > 2 AND clicks_total > 3 THEN X\nDEFAULT Y").unwrap();
        assert_eq!(
            p.rules[0].condition.to_string(),
            "(docs_saved > 1 OR (step_index > 2 AND clicks_total > 3))"
        );
    }

    #[test]
    fn conjunctions_fold_left() {
        let p = parse_rules("IF docs_saved >= 3 AND step_index > 10 AND clicks_total < 2 THEN Stopper\nDEFAULT Y").unwrap();
        assert_eq!(
            p.rules[0].condition.to_string(),
            "((docs_saved >= 3 AND step_index > 10) AND clicks_total < 2)"
        );
    }

    #[test]
    fn syntax_errors_have_positions() {
        let e = parse_rules("IF docs_saved >> 3 THEN X\nDEFAULT Y").unwrap_err();
        assert!(matches!(e, RuleError::Syntax { line: 1, column: 16, .. }), "{e:?}");
        let e = parse_rules("IF docs_saved > 3 X\nDEFAULT Y").unwrap_err();
        assert!(matches!(e, RuleError::Syntax { line: 1, column: 19, .. }), "{e:?}");
        assert_eq!(parse_rules("# nothing\n").unwrap_err(), RuleError::MissingDefault);
        let e = parse_rules("DEFAULT Y\nIF docs_saved > 3 THEN X").unwrap_err();
        assert!(matches!(e, RuleError::Syntax { line: 2, .. }));
    }

    #[test]
    fn comments_and_blank_lines() {
        let p = parse_rules("# header\n\nIF frustration_score > 0.8 THEN invoke Q # trailing\nDEFAULT R\n").unwrap();
        assert_eq!(p.rules.len(), 1);
        assert_eq!(p.rules[0].line, 3);
        assert_eq!(p.default, "R");
    }
}
