//! The KPI formula language.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := number | kpiref | '(' expr ')'
//! kpiref := '(' taskId ',' kpiName ')'
//! taskId := digits ('.' digits)*
//! ```
//!
//! A parenthesis opens a reference only when its content is a dotted task
//! id, a comma, and a name with at least one non-digit character; anything
//! else is grouping. A comma directly between two digits of a number is a
//! decimal separator, so `0,45` and `0.45` are the same literal.

use std::fmt;
use std::str::FromStr;

use rust_decimal::Decimal;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinaryOp {
    pub fn symbol(self) -> char {
        match self {
            BinaryOp::Add => '+',
            BinaryOp::Sub => '-',
            BinaryOp::Mul => '*',
            BinaryOp::Div => '/',
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinaryOp::Add | BinaryOp::Sub => 1,
            BinaryOp::Mul | BinaryOp::Div => 2,
        }
    }
}

/// A reference to the KPI `kpi` of the task numbered `task` (e.g. `1.5`).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct KpiRef {
    pub task: String,
    pub kpi: String,
}

impl KpiRef {
    pub fn new(task: impl Into<String>, kpi: impl Into<String>) -> Self {
        KpiRef {
            task: task.into(),
            kpi: kpi.into(),
        }
    }
}

impl fmt::Display for KpiRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.task, self.kpi)
    }
}

/// Parsed formula. `column` on binary nodes is the 1-based column of the
/// operator in the source text and does not take part in equality.
#[derive(Debug, Clone)]
pub enum FormulaExpr {
    Literal(Decimal),
    Ref(KpiRef),
    Binary {
        op: BinaryOp,
        lhs: Box<FormulaExpr>,
        rhs: Box<FormulaExpr>,
        column: usize,
    },
}

impl PartialEq for FormulaExpr {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (FormulaExpr::Literal(a), FormulaExpr::Literal(b)) => a == b,
            (FormulaExpr::Ref(a), FormulaExpr::Ref(b)) => a == b,
            (
                FormulaExpr::Binary {
                    op: o1,
                    lhs: l1,
                    rhs: r1,
                    ..
                },
                FormulaExpr::Binary {
                    op: o2,
                    lhs: l2,
                    rhs: r2,
                    ..
                },
            ) => o1 == o2 && l1 == l2 && r1 == r2,
            _ => false,
        }
    }
}

impl Eq for FormulaExpr {}

impl FormulaExpr {
    pub fn literal(value: Decimal) -> Self {
        FormulaExpr::Literal(value)
    }

    pub fn reference(task: impl Into<String>, kpi: impl Into<String>) -> Self {
        FormulaExpr::Ref(KpiRef::new(task, kpi))
    }

    pub fn binary(op: BinaryOp, lhs: FormulaExpr, rhs: FormulaExpr) -> Self {
        FormulaExpr::Binary {
            op,
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
            column: 0,
        }
    }

    /// References in left-to-right source order, duplicates kept.
    pub fn refs(&self) -> Vec<&KpiRef> {
        let mut out = Vec::new();
        self.collect_refs(&mut out);
        out
    }

    fn collect_refs<'a>(&'a self, out: &mut Vec<&'a KpiRef>) {
        match self {
            FormulaExpr::Literal(_) => {}
            FormulaExpr::Ref(r) => out.push(r),
            FormulaExpr::Binary { lhs, rhs, .. } => {
                lhs.collect_refs(out);
                rhs.collect_refs(out);
            }
        }
    }

    /// Replaces every reference for which `value` returns `Some` by a literal.
    pub fn substitute(&self, value: &impl Fn(&KpiRef) -> Option<Decimal>) -> FormulaExpr {
        match self {
            FormulaExpr::Literal(_) => self.clone(),
            FormulaExpr::Ref(r) => match value(r) {
                Some(v) => FormulaExpr::Literal(v),
                None => self.clone(),
            },
            FormulaExpr::Binary {
                op,
                lhs,
                rhs,
                column,
            } => FormulaExpr::Binary {
                op: *op,
                lhs: Box::new(lhs.substitute(value)),
                rhs: Box::new(rhs.substitute(value)),
                column: *column,
            },
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            FormulaExpr::Binary { op, .. } => op.precedence(),
            _ => 3,
        }
    }
}

impl fmt::Display for FormulaExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FormulaExpr::Literal(d) => write!(f, "{d}"),
            FormulaExpr::Ref(r) => write!(f, "{r}"),
            FormulaExpr::Binary { op, lhs, rhs, .. } => {
                let prec = op.precedence();
                if lhs.precedence() < prec {
                    write!(f, "({lhs})")?;
                } else {
                    write!(f, "{lhs}")?;
                }
                write!(f, " {} ", op.symbol())?;
                // left associative: an equal-precedence right operand needs parentheses
                if rhs.precedence() <= prec {
                    write!(f, "({rhs})")
                } else {
                    write!(f, "{rhs}")
                }
            }
        }
    }
}

impl FromStr for FormulaExpr {
    type Err = FormulaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_formula(s)
    }
}

impl Serialize for FormulaExpr {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for FormulaExpr {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        parse_formula(&text).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormulaError {
    #[error("column {column}: {message}")]
    Syntax { column: usize, message: String },
    #[error("column {column}: empty KPI name in reference")]
    EmptyKpiName { column: usize },
}

impl FormulaError {
    pub fn column(&self) -> usize {
        match self {
            FormulaError::Syntax { column, .. } | FormulaError::EmptyKpiName { column } => *column,
        }
    }
}

pub fn parse_formula(text: &str) -> Result<FormulaExpr, FormulaError> {
    let mut parser = Parser { src: text, pos: 0 };
    parser.skip_ws();
    if parser.at_end() {
        return Err(FormulaError::Syntax {
            column: 1,
            message: "empty formula".into(),
        });
    }
    let expr = parser.expr()?;
    parser.skip_ws();
    if let Some(c) = parser.peek() {
        return Err(parser.error(format!("unexpected character {c:?}")));
    }
    Ok(expr)
}

/// Canonical text: dot decimals, single spaces around operators, `(id,name)` references.
pub fn format_formula(expr: &FormulaExpr) -> String {
    expr.to_string()
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl Parser<'_> {
    fn column_at(&self, pos: usize) -> usize {
        self.src[..pos].chars().count() + 1
    }

    fn error(&self, message: String) -> FormulaError {
        FormulaError::Syntax {
            column: self.column_at(self.pos),
            message,
        }
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn at_end(&self) -> bool {
        self.pos >= self.src.len()
    }

    fn bump(&mut self) {
        if let Some(c) = self.peek() {
            self.pos += c.len_utf8();
        }
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(c) if c.is_whitespace()) {
            self.bump();
        }
    }

    fn expr(&mut self) -> Result<FormulaExpr, FormulaError> {
        let mut lhs = self.term()?;
        loop {
            self.skip_ws();
            let op = match self.peek() {
                Some('+') => BinaryOp::Add,
                Some('-') => BinaryOp::Sub,
                _ => return Ok(lhs),
            };
            let column = self.column_at(self.pos);
            self.bump();
            let rhs = self.term()?;
            lhs = FormulaExpr::Binary {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
                column,
            };
        }
    }

    fn term(&mut self) -> Result<FormulaExpr, FormulaError> {
        let mut lhs = self.factor()?;
        loop {
            self.skip_ws();
            let op = match self.peek() {
                Some('*') => BinaryOp::Mul,
                Some('/') => BinaryOp::Div,
                _ => return Ok(lhs),
            };
            let column = self.column_at(self.pos);
            self.bump();
            let rhs = self.factor()?;
            lhs = FormulaExpr::Binary {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
                column,
            };
        }
    }

    fn factor(&mut self) -> Result<FormulaExpr, FormulaError> {
        self.skip_ws();
        match self.peek() {
            Some(c) if c.is_ascii_digit() => self.number(),
            Some('(') => {
                if let Some((reference, end)) = self.kpi_ref()? {
                    self.pos = end;
                    return Ok(FormulaExpr::Ref(reference));
                }
                self.bump();
                let inner = self.expr()?;
                self.skip_ws();
                if self.peek() != Some(')') {
                    return Err(self.error("expected ')'".into()));
                }
                self.bump();
                Ok(inner)
            }
            Some(c) => Err(self.error(format!("unexpected character {c:?}"))),
            None => Err(self.error("unexpected end of formula".into())),
        }
    }

    fn number(&mut self) -> Result<FormulaExpr, FormulaError> {
        let start = self.pos;
        let bytes = self.src.as_bytes();
        let mut end = start;
        while end < bytes.len() && bytes[end].is_ascii_digit() {
            end += 1;
        }
        if end + 1 < bytes.len()
            && (bytes[end] == b'.' || bytes[end] == b',')
            && bytes[end + 1].is_ascii_digit()
        {
            end += 1;
            while end < bytes.len() && bytes[end].is_ascii_digit() {
                end += 1;
            }
        }
        let text = self.src[start..end].replace(',', ".");
        let value = Decimal::from_str_exact(&text).map_err(|_| FormulaError::Syntax {
            column: self.column_at(start),
            message: format!("number {text} is out of range"),
        })?;
        self.pos = end;
        Ok(FormulaExpr::Literal(value))
    }

    /// Tries to read `(taskId, name)` at the current '('. Returns the
    /// reference and the byte offset just past ')', or `None` when the
    /// parenthesis is grouping.
    fn kpi_ref(&self) -> Result<Option<(KpiRef, usize)>, FormulaError> {
        let bytes = self.src.as_bytes();
        let open = self.pos;
        let mut i = open + 1;
        let skip_ws = |mut i: usize| {
            while i < bytes.len() && (bytes[i] as char).is_ascii_whitespace() {
                i += 1;
            }
            i
        };
        i = skip_ws(i);
        let id_start = i;
        loop {
            let seg = i;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            if i == seg {
                return Ok(None);
            }
            if i + 1 < bytes.len() && bytes[i] == b'.' && bytes[i + 1].is_ascii_digit() {
                i += 1;
            } else {
                break;
            }
        }
        let id_end = i;
        i = skip_ws(i);
        if i >= bytes.len() || bytes[i] != b',' {
            return Ok(None);
        }
        let name_start = i + 1;
        let rest = &self.src[name_start..];
        let close = match rest.find([')', '(']) {
            Some(k) if rest.as_bytes()[k] == b')' => name_start + k,
            _ => return Ok(None),
        };
        let name = self.src[name_start..close].trim();
        if name.is_empty() {
            return Err(FormulaError::EmptyKpiName {
                column: self.column_at(open),
            });
        }
        if name.chars().all(|c| c.is_ascii_digit()) {
            return Ok(None);
        }
        Ok(Some((
            KpiRef::new(&self.src[id_start..id_end], name),
            close + 1,
        )))
    }
}
