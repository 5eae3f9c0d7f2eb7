//! Attribute sets and the policy expression language.
//!
//! Grammar (whitespace-insensitive):
//!
//! ```text
//! expr      := and_expr ( ("|" | "||") and_expr )*
//! and_expr  := atom ( ("&" | "&&") atom )*
//! atom      := "(" expr ")" | predicate
//! predicate := NAME op INTEGER
//! op        := ">=" | ">" | "<=" | "<" | "==" | "!="
//! ```
//!
//! Lines starting with `#` are comments, so policy files can be annotated.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

pub const ROLE_OBSERVER: i64 = 0;
pub const ROLE_VALIDATOR: i64 = 1;
pub const ROLE_DELEGATE: i64 = 2;

pub const DEFAULT_POLICY: &str = "(trust >= 45) & ((role == 1) | (role == 2))";

/// Declared attribute names and their inclusive value ranges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttributeSchema {
    ranges: BTreeMap<String, (i64, i64)>,
}

impl Default for AttributeSchema {
    fn default() -> Self {
        let ranges = [
            ("trust", (0, 100)),
            ("role", (0, 7)),
            ("permissions", (0, 255)),
            ("clearance", (0, 5)),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        Self { ranges }
    }
}

impl AttributeSchema {
    pub fn range(&self, name: &str) -> Option<(i64, i64)> {
        self.ranges.get(name).copied()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.ranges.keys().map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeSet {
    values: BTreeMap<String, i64>,
}

impl AttributeSet {
    /// Builds a set after checking every value against the schema. Names
    /// are unique by construction of the map.
    pub fn new<I, S>(schema: &AttributeSchema, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, i64)>,
        S: Into<String>,
    {
        let values: BTreeMap<String, i64> = pairs.into_iter().map(|(k, v)| (k.into(), v)).collect();
        let set = Self { values };
        set.check(schema)?;
        Ok(set)
    }

    pub(crate) fn from_raw(values: BTreeMap<String, i64>) -> Self {
        Self { values }
    }

    pub fn check(&self, schema: &AttributeSchema) -> Result<()> {
        if self.values.is_empty() {
            return Err(SimError::EmptyAttributes);
        }
        for (name, &value) in &self.values {
            let (min, max) = schema
                .range(name)
                .ok_or_else(|| SimError::UnknownAttribute(name.clone()))?;
            if value < min || value > max {
                return Err(SimError::AttributeOutOfRange {
                    name: name.clone(),
                    value,
                    min,
                    max,
                });
            }
        }
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<i64> {
        self.values.get(name).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, i64)> {
        self.values.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Trust in (0, 1) mapped onto the integer scale used by policy leaves.
pub fn quantize_trust(trust: f64) -> i64 {
    ((trust * 100.0).floor() as i64).clamp(0, 100)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparison {
    Ge,
    Gt,
    Le,
    Lt,
    Eq,
    Ne,
}

impl Comparison {
    pub fn holds(self, lhs: i64, rhs: i64) -> bool {
        match self {
            Comparison::Ge => lhs >= rhs,
            Comparison::Gt => lhs > rhs,
            Comparison::Le => lhs <= rhs,
            Comparison::Lt => lhs < rhs,
            Comparison::Eq => lhs == rhs,
            Comparison::Ne => lhs != rhs,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            Comparison::Ge => ">=",
            Comparison::Gt => ">",
            Comparison::Le => "<=",
            Comparison::Lt => "<",
            Comparison::Eq => "==",
            Comparison::Ne => "!=",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Policy {
    Leaf {
        attribute: String,
        op: Comparison,
        value: i64,
    },
    And(Box<Policy>, Box<Policy>),
    Or(Box<Policy>, Box<Policy>),
}

impl Policy {
    pub fn leaf(attribute: &str, op: Comparison, value: i64) -> Self {
        Policy::Leaf {
            attribute: attribute.to_string(),
            op,
            value,
        }
    }

    pub fn and(self, other: Policy) -> Self {
        Policy::And(Box::new(self), Box::new(other))
    }

    pub fn or(self, other: Policy) -> Self {
        Policy::Or(Box::new(self), Box::new(other))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cleaned: String = text
            .lines()
            .filter(|l| !l.trim_start().starts_with('#'))
            .collect::<Vec<_>>()
            .join("\n");
        let mut parser = Parser {
            src: cleaned.as_bytes(),
            pos: 0,
        };
        let policy = parser.expr()?;
        parser.skip_ws();
        if parser.pos != parser.src.len() {
            return Err(parser.error("trailing input"));
        }
        Ok(policy)
    }

    pub fn depth(&self) -> usize {
        match self {
            Policy::Leaf { .. } => 1,
            Policy::And(a, b) | Policy::Or(a, b) => 1 + a.depth().max(b.depth()),
        }
    }

    pub fn attributes(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_attributes(&mut out);
        out.sort_unstable();
        out.dedup();
        out
    }

    fn collect_attributes<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Policy::Leaf { attribute, .. } => out.push(attribute),
            Policy::And(a, b) | Policy::Or(a, b) => {
                a.collect_attributes(out);
                b.collect_attributes(out);
            }
        }
    }

    /// Every leaf must name a declared attribute.
    pub fn validate(&self, schema: &AttributeSchema) -> Result<()> {
        for name in self.attributes() {
            if schema.range(name).is_none() {
                return Err(SimError::UnknownAttribute(name.to_string()));
            }
        }
        Ok(())
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Policy::Leaf {
                attribute,
                op,
                value,
            } => write!(f, "({attribute} {} {value})", op.symbol()),
            Policy::And(a, b) => write!(f, "({a} & {b})"),
            Policy::Or(a, b) => write!(f, "({a} | {b})"),
        }
    }
}

/// Plaintext reference evaluation.
pub fn eval_policy_plain(policy: &Policy, attrs: &AttributeSet) -> Result<bool> {
    match policy {
        Policy::Leaf {
            attribute,
            op,
            value,
        } => {
            let lhs = attrs
                .get(attribute)
                .ok_or_else(|| SimError::UnknownAttribute(attribute.clone()))?;
            Ok(op.holds(lhs, *value))
        }
        // Both sides are evaluated so unknown attributes surface regardless of
        // short-circuiting.
        Policy::And(a, b) => {
            let (x, y) = (eval_policy_plain(a, attrs)?, eval_policy_plain(b, attrs)?);
            Ok(x && y)
        }
        Policy::Or(a, b) => {
            let (x, y) = (eval_policy_plain(a, attrs)?, eval_policy_plain(b, attrs)?);
            Ok(x || y)
        }
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, msg: &str) -> SimError {
        SimError::PolicyParse {
            pos: self.pos,
            msg: msg.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat_operator(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            if self.src.get(self.pos) == Some(&c) {
                self.pos += 1;
            }
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Policy> {
        let mut lhs = self.and_expr()?;
        while self.eat_operator(b'|') {
            lhs = lhs.or(self.and_expr()?);
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> Result<Policy> {
        let mut lhs = self.atom()?;
        while self.eat_operator(b'&') {
            lhs = lhs.and(self.atom()?);
        }
        Ok(lhs)
    }

    fn atom(&mut self) -> Result<Policy> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.error("expected `)`"));
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.predicate(),
            Some(_) => Err(self.error("expected `(` or attribute name")),
            None => Err(self.error("unexpected end of policy")),
        }
    }

    fn predicate(&mut self) -> Result<Policy> {
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos])
            .expect("ascii")
            .to_string();

        self.skip_ws();
        let rest = &self.src[self.pos..];
        let (op, width) = match rest {
            [b'>', b'=', ..] => (Comparison::Ge, 2),
            [b'<', b'=', ..] => (Comparison::Le, 2),
            [b'=', b'=', ..] => (Comparison::Eq, 2),
            [b'!', b'=', ..] => (Comparison::Ne, 2),
            [b'>', ..] => (Comparison::Gt, 1),
            [b'<', ..] => (Comparison::Lt, 1),
            _ => return Err(self.error("expected comparison operator")),
        };
        self.pos += width;

        self.skip_ws();
        let num_start = self.pos;
        if self.src.get(self.pos) == Some(&b'-') {
            self.pos += 1;
        }
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        let value: i64 = std::str::from_utf8(&self.src[num_start..self.pos])
            .expect("ascii")
            .parse()
            .map_err(|_| self.error("expected integer literal"))?;
        Ok(Policy::Leaf {
            attribute: name,
            op,
            value,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn attrs(pairs: &[(&str, i64)]) -> AttributeSet {
        AttributeSet::new(&AttributeSchema::default(), pairs.iter().map(|(k, v)| (*k, *v))).unwrap()
    }

    #[test]
    fn parses_default_policy() {
        let p = Policy::parse(DEFAULT_POLICY).unwrap();
        assert_eq!(p.depth(), 3);
        assert_eq!(p.attributes(), vec!["role", "trust"]);
        let round_trip = Policy::parse(&p.to_string()).unwrap();
        assert_eq!(round_trip, p);
    }

    #[test]
    fn parse_errors_carry_position() {
        for bad in ["", "(trust >= 45", "trust => 45", "trust >= x", "trust >= 1 junk"] {
            assert!(matches!(Policy::parse(bad), Err(SimError::PolicyParse { .. })), "{bad}");
        }
    }

    #[test]
    fn comments_and_double_operators() {
        let p = Policy::parse("# gate\n(trust >= 45) && (role == 2) || clearance > 4").unwrap();
        assert!(eval_policy_plain(&p, &attrs(&[("trust", 50), ("role", 2), ("clearance", 0)])).unwrap());
    }

    #[test]
    fn plain_evaluation_examples() {
        let yes = Policy::leaf("trust", Comparison::Ge, 10);
        let no = Policy::leaf("clearance", Comparison::Ge, 3);
        let a = attrs(&[("trust", 50), ("clearance", 2)]);
        assert!(eval_policy_plain(&yes.clone().and(yes.clone()), &a).unwrap());
        assert!(eval_policy_plain(&no.clone().or(yes), &a).unwrap());
        assert!(!eval_policy_plain(&no, &a).unwrap());
    }

    #[test]
    fn unknown_attribute_errors() {
        let p = Policy::leaf("clearance", Comparison::Ge, 1);
        assert!(matches!(
            eval_policy_plain(&p, &attrs(&[("trust", 5)])),
            Err(SimError::UnknownAttribute(_))
        ));
        let q = Policy::leaf("altitude", Comparison::Ge, 1);
        assert!(q.validate(&AttributeSchema::default()).is_err());
    }

    #[test]
    fn attribute_ranges_enforced() {
        let schema = AttributeSchema::default();
        assert!(AttributeSet::new(&schema, [("trust", 101)]).is_err());
        assert!(AttributeSet::new(&schema, Vec::<(&str, i64)>::new()).is_err());
        assert!(AttributeSet::new(&schema, [("trust", 100)]).is_ok());
    }

    #[test]
    fn quantization() {
        assert_eq!(quantize_trust(0.5), 50);
        assert_eq!(quantize_trust(0.449), 44);
        assert_eq!(quantize_trust(0.999), 99);
    }
}
