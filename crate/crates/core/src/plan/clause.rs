use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::catalog::{is_identifier, Value};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ColumnRef {
    pub table: String,
    pub column: String,
}

impl ColumnRef {
    pub fn new(table: impl Into<String>, column: impl Into<String>) -> Self {
        Self {
            table: table.into(),
            column: column.into(),
        }
    }

    pub fn parse(text: &str) -> Option<Self> {
        let (t, c) = text.split_once('.')?;
        (is_identifier(t) && is_identifier(c)).then(|| Self::new(t, c))
    }
}

impl fmt::Display for ColumnRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.table, self.column)
    }
}

/// Comparison operators; declaration order is the canonical rank.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CompareOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl CompareOp {
    pub const ALL: [CompareOp; 6] = [
        CompareOp::Lt,
        CompareOp::Le,
        CompareOp::Gt,
        CompareOp::Ge,
        CompareOp::Eq,
        CompareOp::Ne,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            CompareOp::Lt => "<",
            CompareOp::Le => "<=",
            CompareOp::Gt => ">",
            CompareOp::Ge => ">=",
            CompareOp::Eq => "=",
            CompareOp::Ne => "<>",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "<" => CompareOp::Lt,
            "<=" | "≤" => CompareOp::Le,
            ">" => CompareOp::Gt,
            ">=" | "≥" => CompareOp::Ge,
            "=" | "==" => CompareOp::Eq,
            "<>" | "!=" | "≠" => CompareOp::Ne,
            _ => return None,
        })
    }

    /// Operator to use after swapping the two operands.
    pub fn flip(self) -> Self {
        match self {
            CompareOp::Lt => CompareOp::Gt,
            CompareOp::Le => CompareOp::Ge,
            CompareOp::Gt => CompareOp::Lt,
            CompareOp::Ge => CompareOp::Le,
            op => op,
        }
    }

    pub fn holds(self, ord: Ordering) -> bool {
        match self {
            CompareOp::Lt => ord == Ordering::Less,
            CompareOp::Le => ord != Ordering::Greater,
            CompareOp::Gt => ord == Ordering::Greater,
            CompareOp::Ge => ord != Ordering::Less,
            CompareOp::Eq => ord == Ordering::Equal,
            CompareOp::Ne => ord != Ordering::Equal,
        }
    }

    pub fn eval(self, left: &Value, right: &Value) -> bool {
        self.holds(left.total_cmp(right))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Operand {
    Const(Value),
    Column(ColumnRef),
}

/// An atomic predicate `column op (constant | column)`.
///
/// Column-column clauses are stored with the smaller column on the left so
/// that `a.x = b.y` and `b.y = a.x` are the same clause.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clause {
    pub left: ColumnRef,
    pub op: CompareOp,
    pub right: Operand,
}

impl Clause {
    pub fn constant(left: ColumnRef, op: CompareOp, value: Value) -> Self {
        Self {
            left,
            op,
            right: Operand::Const(value),
        }
    }

    pub fn columns(left: ColumnRef, op: CompareOp, right: ColumnRef) -> Self {
        if right < left {
            Self {
                left: right,
                op: op.flip(),
                right: Operand::Column(left),
            }
        } else {
            Self {
                left,
                op,
                right: Operand::Column(right),
            }
        }
    }

    pub fn constant_value(&self) -> Option<Value> {
        match &self.right {
            Operand::Const(v) => Some(*v),
            Operand::Column(_) => None,
        }
    }

    pub fn right_column(&self) -> Option<&ColumnRef> {
        match &self.right {
            Operand::Column(c) => Some(c),
            Operand::Const(_) => None,
        }
    }

    pub fn is_join_equality(&self) -> bool {
        self.op == CompareOp::Eq && matches!(self.right, Operand::Column(_))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let (left, op, right) = parse_parts(text)?;
        match right {
            RawOperand::Column(c) => Ok(Clause::columns(left, op, c)),
            RawOperand::Const(v) => Ok(Clause::constant(left, op, v)),
            RawOperand::Slot(_) => Err(Error::Parse {
                text: text.to_string(),
                reason: "parameter slots are only allowed in query templates".into(),
            }),
        }
    }

    /// Canonical ordering: by template, then by constant.
    pub fn canonical_cmp(&self, other: &Clause) -> Ordering {
        template_of(self).cmp(&template_of(other)).then_with(|| {
            match (self.constant_value(), other.constant_value()) {
                (Some(a), Some(b)) => a.total_cmp(&b),
                _ => Ordering::Equal,
            }
        })
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.right {
            Operand::Const(v) => write!(f, "{} {} {v}", self.left, self.op.symbol()),
            Operand::Column(c) => write!(f, "{} {} {c}", self.left, self.op.symbol()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RawOperand {
    Const(Value),
    Column(ColumnRef),
    Slot(String),
}

/// Splits `table.col OP rhs` into its parts. The right-hand side may be a
/// column reference, a numeric literal, or a `$name` parameter slot.
///
/// Anything else (disjunctions, NULL tests, functions) is rejected.
pub fn parse_parts(text: &str) -> Result<(ColumnRef, CompareOp, RawOperand)> {
    let err = |reason: &str| Error::Parse {
        text: text.to_string(),
        reason: reason.to_string(),
    };
    let tokens: Vec<&str> = text.split_whitespace().collect();
    if tokens.len() != 3 {
        return Err(err("expected exactly `column op operand`"));
    }
    let left = ColumnRef::parse(tokens[0]).ok_or_else(|| err("left side must be table.column"))?;
    let op = CompareOp::parse(tokens[1]).ok_or_else(|| err("unknown operator"))?;
    let rhs = tokens[2];
    let right = if let Some(name) = rhs.strip_prefix('$') {
        if !is_identifier(name) {
            return Err(err("bad parameter name"));
        }
        RawOperand::Slot(name.to_string())
    } else if let Some(c) = ColumnRef::parse(rhs) {
        RawOperand::Column(c)
    } else if let Ok(i) = rhs.parse::<i64>() {
        RawOperand::Const(Value::Int(i))
    } else if let Some(x) = rhs.parse::<f64>().ok().filter(|x| x.is_finite()) {
        RawOperand::Const(Value::Real(x))
    } else {
        return Err(err("right side must be a column, a number or $param"));
    };
    Ok((left, op, right))
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TemplateOperand {
    Const,
    Column(ColumnRef),
}

/// A clause with its constant erased. Derived ordering is the canonical
/// order: table, column, operator rank, right-operand class.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ClauseTemplate {
    pub left: ColumnRef,
    pub op: CompareOp,
    pub right: TemplateOperand,
}

impl ClauseTemplate {
    pub fn has_constant(&self) -> bool {
        self.right == TemplateOperand::Const
    }

    pub fn instantiate(&self, value: Value) -> Clause {
        match &self.right {
            TemplateOperand::Const => Clause::constant(self.left.clone(), self.op, value),
            TemplateOperand::Column(c) => Clause::columns(self.left.clone(), self.op, c.clone()),
        }
    }
}

impl fmt::Display for ClauseTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.right {
            TemplateOperand::Const => write!(f, "{} {} CONST", self.left, self.op.symbol()),
            TemplateOperand::Column(c) => write!(f, "{} {} {c}", self.left, self.op.symbol()),
        }
    }
}

pub fn template_of(clause: &Clause) -> ClauseTemplate {
    ClauseTemplate {
        left: clause.left.clone(),
        op: clause.op,
        right: match &clause.right {
            Operand::Const(_) => TemplateOperand::Const,
            Operand::Column(c) => TemplateOperand::Column(c.clone()),
        },
    }
}
