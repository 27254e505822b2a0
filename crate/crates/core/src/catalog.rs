//! In-memory relations and the synthetic data generator.
//!
//! Tables are row-oriented and immutable once built. Synthetic tables come
//! from a [`CorrelationSpec`]: every column has a marginal distribution and
//! a column may instead be derived from another one through a
//! [`DependencyRule`], which is how correlated columns are produced.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{Read, Write};

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    #[serde(alias = "integer")]
    Int,
    Real,
}

impl ColumnKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ColumnKind::Int => "int",
            ColumnKind::Real => "real",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "int" | "integer" => Some(ColumnKind::Int),
            "real" => Some(ColumnKind::Real),
            _ => None,
        }
    }
}

/// A single cell value.
///
/// Comparisons are numeric across kinds, so `Int(1) == Real(1.0)` under
/// [`Value::total_cmp`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Int(i64),
    Real(f64),
}

impl Value {
    pub fn kind(&self) -> ColumnKind {
        match self {
            Value::Int(_) => ColumnKind::Int,
            Value::Real(_) => ColumnKind::Real,
        }
    }

    pub fn as_f64(&self) -> f64 {
        match *self {
            Value::Int(v) => v as f64,
            Value::Real(v) => v,
        }
    }

    pub fn total_cmp(&self, other: &Value) -> Ordering {
        match (self, other) {
            (Value::Int(a), Value::Int(b)) => a.cmp(b),
            _ => {
                let (a, b) = (self.as_f64(), other.as_f64());
                a.partial_cmp(&b).unwrap_or_else(|| a.total_cmp(&b))
            }
        }
    }

    pub fn num_eq(&self, other: &Value) -> bool {
        match (self, other) {
            (Value::Int(a), Value::Int(b)) => a == b,
            _ => self.as_f64() == other.as_f64(),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Real(v) => write!(f, "{v:?}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnDef {
    pub name: String,
    pub kind: ColumnKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableSchema {
    name: String,
    columns: Vec<ColumnDef>,
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl TableSchema {
    pub fn new(name: impl Into<String>, columns: Vec<ColumnDef>) -> Result<Self> {
        let name = name.into();
        if !is_identifier(&name) {
            return Err(Error::InvalidSchema(format!(
                "`{name}` is not an identifier"
            )));
        }
        if columns.is_empty() {
            return Err(Error::InvalidSchema(format!(
                "table `{name}` has no columns"
            )));
        }
        let mut seen = std::collections::HashSet::new();
        for c in &columns {
            if !is_identifier(&c.name) {
                return Err(Error::InvalidSchema(format!(
                    "column `{}` of `{name}` is not an identifier",
                    c.name
                )));
            }
            if !seen.insert(c.name.as_str()) {
                return Err(Error::InvalidSchema(format!(
                    "duplicate column `{}` in `{name}`",
                    c.name
                )));
            }
        }
        Ok(Self { name, columns })
    }

    /// Shorthand for tests and examples: `("a", Int), ("b", Real)`.
    pub fn from_pairs(name: &str, cols: &[(&str, ColumnKind)]) -> Result<Self> {
        Self::new(
            name,
            cols.iter()
                .map(|(n, k)| ColumnDef {
                    name: n.to_string(),
                    kind: *k,
                })
                .collect(),
        )
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn columns(&self) -> &[ColumnDef] {
        &self.columns
    }

    pub fn arity(&self) -> usize {
        self.columns.len()
    }

    pub fn column_index(&self, column: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == column)
    }
}

pub type Row = Vec<Value>;

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    schema: TableSchema,
    rows: Vec<Row>,
}

impl Table {
    pub fn schema(&self) -> &TableSchema {
        &self.schema
    }

    pub fn name(&self) -> &str {
        self.schema.name()
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    pub fn column_values(&self, column: &str) -> Result<Vec<Value>> {
        let idx = self
            .schema
            .column_index(column)
            .ok_or_else(|| Error::Catalog(format!("unknown column `{}.{column}`", self.name())))?;
        Ok(self.rows.iter().map(|r| r[idx]).collect())
    }
}

/// Builds a table, checking arity and kinds of every row.
pub fn create_table(schema: TableSchema, rows: Vec<Row>) -> Result<Table> {
    for (i, row) in rows.iter().enumerate() {
        if row.len() != schema.arity() {
            return Err(Error::SchemaViolation {
                row: i,
                reason: format!("expected {} values, got {}", schema.arity(), row.len()),
            });
        }
        for (v, col) in row.iter().zip(schema.columns()) {
            if v.kind() != col.kind {
                return Err(Error::SchemaViolation {
                    row: i,
                    reason: format!(
                        "column `{}` is {} but value {v} is {}",
                        col.name,
                        col.kind.as_str(),
                        v.kind().as_str()
                    ),
                });
            }
            if let Value::Real(x) = v {
                if !x.is_finite() {
                    return Err(Error::SchemaViolation {
                        row: i,
                        reason: format!("non-finite value in column `{}`", col.name),
                    });
                }
            }
        }
    }
    Ok(Table { schema, rows })
}

pub fn row_count(table: &Table) -> usize {
    table.row_count()
}

/// Per-column marginal distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "lowercase")]
pub enum Marginal {
    /// Integers drawn uniformly from `lo..=hi`, or reals from `[lo, hi)`.
    Uniform {
        lo: f64,
        hi: f64,
    },
    Categorical {
        values: Vec<f64>,
        weights: Vec<f64>,
    },
    /// Row `i` takes `values[i % len]`; consumes no randomness.
    Cycle {
        values: Vec<f64>,
    },
    /// Row `i` takes `start + i`.
    Serial {
        start: i64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "fn")]
pub enum DependencyFn {
    Identity,
    Affine { mul: f64, add: f64 },
    Modulo { m: i64 },
}

impl DependencyFn {
    fn apply(&self, v: f64) -> f64 {
        match *self {
            DependencyFn::Identity => v,
            DependencyFn::Affine { mul, add } => v * mul + add,
            DependencyFn::Modulo { m } => (v as i64).rem_euclid(m) as f64,
        }
    }
}

/// `target = func(source)` with probability `p`, otherwise an independent
/// draw from the target's marginal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DependencyRule {
    pub target: String,
    pub source: String,
    #[serde(flatten)]
    pub func: DependencyFn,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CorrelationSpec {
    pub marginals: BTreeMap<String, Marginal>,
    pub rules: Vec<DependencyRule>,
    pub seed: u64,
}

impl CorrelationSpec {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            ..Default::default()
        }
    }

    pub fn marginal(mut self, column: &str, m: Marginal) -> Self {
        self.marginals.insert(column.to_string(), m);
        self
    }

    pub fn rule(mut self, target: &str, source: &str, func: DependencyFn, p: f64) -> Self {
        self.rules.push(DependencyRule {
            target: target.to_string(),
            source: source.to_string(),
            func,
            p,
        });
        self
    }

    /// Checks the spec against a schema and returns a generation order in
    /// which every rule source precedes its target.
    fn generation_order(&self, schema: &TableSchema) -> Result<Vec<usize>> {
        let n = schema.arity();
        let mut rule_of: Vec<Option<&DependencyRule>> = vec![None; n];
        for col in schema.columns() {
            let m = self.marginals.get(&col.name).ok_or_else(|| {
                Error::Config(format!(
                    "column `{}` has no marginal distribution",
                    col.name
                ))
            })?;
            validate_marginal(&col.name, col.kind, m)?;
        }
        for name in self.marginals.keys() {
            if schema.column_index(name).is_none() {
                return Err(Error::Config(format!(
                    "marginal for unknown column `{name}`"
                )));
            }
        }
        for r in &self.rules {
            if !(0.0..=1.0).contains(&r.p) {
                return Err(Error::Config(format!(
                    "rule {} <- {}: p = {} outside [0, 1]",
                    r.target, r.source, r.p
                )));
            }
            let t = schema.column_index(&r.target).ok_or_else(|| {
                Error::Config(format!("rule target `{}` is not a column", r.target))
            })?;
            schema.column_index(&r.source).ok_or_else(|| {
                Error::Config(format!("rule source `{}` is not a column", r.source))
            })?;
            if let DependencyFn::Modulo { m } = r.func {
                if m <= 0 {
                    return Err(Error::Config(format!(
                        "rule {}: modulus must be positive",
                        r.target
                    )));
                }
            }
            if rule_of[t].replace(r).is_some() {
                return Err(Error::Config(format!(
                    "column `{}` has two dependency rules",
                    r.target
                )));
            }
        }

        // Kahn's algorithm, lowest schema index first.
        let mut indegree = vec![0usize; n];
        for (t, r) in rule_of.iter().enumerate() {
            if r.is_some() {
                indegree[t] = 1;
            }
        }
        let mut order = Vec::with_capacity(n);
        let mut done = vec![false; n];
        while order.len() < n {
            let next = (0..n).find(|&i| !done[i] && indegree[i] == 0);
            let Some(i) = next else {
                let cyclic: Vec<&str> = (0..n)
                    .filter(|&i| !done[i])
                    .map(|i| schema.columns()[i].name.as_str())
                    .collect();
                return Err(Error::Config(format!(
                    "dependency rules form a cycle through {}",
                    cyclic.join(", ")
                )));
            };
            done[i] = true;
            order.push(i);
            for (t, r) in rule_of.iter().enumerate() {
                if let Some(r) = r {
                    if !done[t] && schema.column_index(&r.source) == Some(i) {
                        indegree[t] = 0;
                    }
                }
            }
        }
        Ok(order)
    }
}

fn validate_marginal(column: &str, kind: ColumnKind, m: &Marginal) -> Result<()> {
    let integral = |v: f64| v.fract() == 0.0 && v.abs() < 9.0e15;
    match m {
        Marginal::Uniform { lo, hi } => {
            if !(lo.is_finite() && hi.is_finite()) || lo > hi {
                return Err(Error::Config(format!(
                    "column `{column}`: uniform needs lo <= hi"
                )));
            }
            if kind == ColumnKind::Int && !(integral(*lo) && integral(*hi)) {
                return Err(Error::Config(format!(
                    "column `{column}`: integer bounds required"
                )));
            }
        }
        Marginal::Categorical { values, weights } => {
            if values.is_empty() || values.len() != weights.len() {
                return Err(Error::Config(format!(
                    "column `{column}`: categorical needs equally many values and weights"
                )));
            }
            if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0))
                || weights.iter().sum::<f64>() <= 0.0
            {
                return Err(Error::Config(format!(
                    "column `{column}`: bad categorical weights"
                )));
            }
            if kind == ColumnKind::Int && !values.iter().all(|v| integral(*v)) {
                return Err(Error::Config(format!(
                    "column `{column}`: integer values required"
                )));
            }
        }
        Marginal::Cycle { values } => {
            if values.is_empty() {
                return Err(Error::Config(format!("column `{column}`: empty cycle")));
            }
            if kind == ColumnKind::Int && !values.iter().all(|v| integral(*v)) {
                return Err(Error::Config(format!(
                    "column `{column}`: integer values required"
                )));
            }
        }
        Marginal::Serial { .. } => {
            if kind != ColumnKind::Int {
                return Err(Error::Config(format!(
                    "column `{column}`: serial requires int kind"
                )));
            }
        }
    }
    Ok(())
}

enum Sampler {
    UniformInt(i64, i64),
    UniformReal(f64, f64),
    Categorical(Vec<f64>, WeightedIndex<f64>),
    Cycle(Vec<f64>),
    Serial(i64),
}

impl Sampler {
    fn new(kind: ColumnKind, m: &Marginal) -> Self {
        match m {
            Marginal::Uniform { lo, hi } => match kind {
                ColumnKind::Int => Sampler::UniformInt(*lo as i64, *hi as i64),
                ColumnKind::Real => Sampler::UniformReal(*lo, *hi),
            },
            Marginal::Categorical { values, weights } => Sampler::Categorical(
                values.clone(),
                WeightedIndex::new(weights).expect("weights validated"),
            ),
            Marginal::Cycle { values } => Sampler::Cycle(values.clone()),
            Marginal::Serial { start } => Sampler::Serial(*start),
        }
    }

    fn draw(&self, row: usize, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            Sampler::UniformInt(lo, hi) => rng.gen_range(*lo..=*hi) as f64,
            Sampler::UniformReal(lo, hi) if lo == hi => *lo,
            Sampler::UniformReal(lo, hi) => rng.gen_range(*lo..*hi),
            Sampler::Categorical(values, idx) => values[idx.sample(rng)],
            Sampler::Cycle(values) => values[row % values.len()],
            Sampler::Serial(start) => (*start + row as i64) as f64,
        }
    }
}

fn to_value(kind: ColumnKind, v: f64) -> Value {
    match kind {
        ColumnKind::Int => Value::Int(v.round() as i64),
        ColumnKind::Real => Value::Real(v),
    }
}

/// Generates `n` rows deterministically from `spec` (ChaCha8 seeded with
/// `spec.seed`).
///
/// Each dependency rule consumes one uniform draw per row whether or not it
/// fires, so the random stream layout depends only on the spec.
pub fn generate_table(schema: TableSchema, n: usize, spec: &CorrelationSpec) -> Result<Table> {
    let order = spec.generation_order(&schema)?;
    let samplers: Vec<Sampler> = schema
        .columns()
        .iter()
        .map(|c| Sampler::new(c.kind, &spec.marginals[&c.name]))
        .collect();
    let rules: Vec<Option<(usize, DependencyFn, f64)>> = schema
        .columns()
        .iter()
        .map(|c| {
            spec.rules.iter().find(|r| r.target == c.name).map(|r| {
                (
                    schema.column_index(&r.source).expect("validated"),
                    r.func,
                    r.p,
                )
            })
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut raw = vec![0f64; schema.arity()];
    let mut rows = Vec::with_capacity(n);
    for row in 0..n {
        for &c in &order {
            raw[c] = match rules[c] {
                Some((src, func, p)) => {
                    let u: f64 = rng.gen();
                    if u < p {
                        func.apply(raw[src])
                    } else {
                        samplers[c].draw(row, &mut rng)
                    }
                }
                None => samplers[c].draw(row, &mut rng),
            };
        }
        rows.push(
            schema
                .columns()
                .iter()
                .zip(&raw)
                .map(|(c, v)| to_value(c.kind, *v))
                .collect(),
        );
    }
    create_table(schema, rows)
}

/// Writes the table as CSV with a `name:kind,...` header.
pub fn write_csv<W: Write>(table: &Table, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    let header: Vec<String> = table
        .schema()
        .columns()
        .iter()
        .map(|c| format!("{}:{}", c.name, c.kind.as_str()))
        .collect();
    w.write_record(&header)?;
    let mut rec = Vec::with_capacity(table.schema().arity());
    for row in table.rows() {
        rec.clear();
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(table_name: &str, input: R) -> Result<Table> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(input);
    let mut records = r.records();
    let header = records
        .next()
        .ok_or_else(|| Error::InvalidSchema(format!("`{table_name}`: missing CSV header")))??;
    let mut cols = Vec::new();
    for field in header.iter() {
        let (name, kind) = field.split_once(':').ok_or_else(|| {
            Error::InvalidSchema(format!("header field `{field}` is not `name:kind`"))
        })?;
        let kind = ColumnKind::parse(kind)
            .ok_or_else(|| Error::InvalidSchema(format!("unknown column kind `{kind}`")))?;
        cols.push(ColumnDef {
            name: name.to_string(),
            kind,
        });
    }
    let schema = TableSchema::new(table_name, cols)?;
    let mut rows = Vec::new();
    for (i, rec) in records.enumerate() {
        let rec = rec?;
        if rec.len() != schema.arity() {
            return Err(Error::SchemaViolation {
                row: i,
                reason: format!("expected {} fields, got {}", schema.arity(), rec.len()),
            });
        }
        let mut row = Vec::with_capacity(rec.len());
        for (field, col) in rec.iter().zip(schema.columns()) {
            let v = match col.kind {
                ColumnKind::Int => field.parse::<i64>().map(Value::Int).ok(),
                ColumnKind::Real => field.parse::<f64>().map(Value::Real).ok(),
            };
            row.push(v.ok_or_else(|| Error::SchemaViolation {
                row: i,
                reason: format!("`{field}` is not a valid {}", col.kind.as_str()),
            })?);
        }
        rows.push(row);
    }
    create_table(schema, rows)
}

/// Named collection of tables.
#[derive(Debug, Clone, Default)]
pub struct Catalog {
    tables: BTreeMap<String, Table>,
}

impl Catalog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, table: Table) -> Result<()> {
        let name = table.name().to_string();
        if self.tables.contains_key(&name) {
            return Err(Error::Catalog(format!("table `{name}` already exists")));
        }
        self.tables.insert(name, table);
        Ok(())
    }

    pub fn table(&self, name: &str) -> Result<&Table> {
        self.tables
            .get(name)
            .ok_or_else(|| Error::Catalog(format!("unknown table `{name}`")))
    }

    pub fn tables(&self) -> impl Iterator<Item = &Table> {
        self.tables.values()
    }

    pub fn column_kinds(&self) -> HashMap<(String, String), ColumnKind> {
        let mut out = HashMap::new();
        for t in self.tables.values() {
            for c in t.schema().columns() {
                out.insert((t.name().to_string(), c.name.clone()), c.kind);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ColumnKind::*;

    fn ab() -> TableSchema {
        TableSchema::from_pairs("t", &[("a", Int), ("b", Int)]).unwrap()
    }

    pub(crate) fn correlated_rows() -> Vec<Row> {
        let mut rows = vec![vec![Value::Int(0), Value::Int(0)]; 10000];
        rows.extend(vec![vec![Value::Int(1), Value::Int(1)]; 10000]);
        rows
    }

    #[test]
    fn empty_table() {
        let t = create_table(ab(), vec![]).unwrap();
        assert_eq!(row_count(&t), 0);
    }

    #[test]
    fn correlated_table_row_count() {
        let t = create_table(ab(), correlated_rows()).unwrap();
        assert_eq!(row_count(&t), 20000);
        assert_eq!(t.rows()[0], vec![Value::Int(0), Value::Int(0)]);
        assert_eq!(t.rows()[19999], vec![Value::Int(1), Value::Int(1)]);
    }

    #[test]
    fn arity_mismatch_reports_row() {
        let s = TableSchema::from_pairs("t", &[("a", Int)]).unwrap();
        let err = create_table(s, vec![vec![Value::Int(1), Value::Int(2)]]).unwrap_err();
        assert!(
            matches!(err, Error::SchemaViolation { row: 0, .. }),
            "{err}"
        );
    }

    #[test]
    fn kind_mismatch_reports_row() {
        let rows = vec![
            vec![Value::Int(1), Value::Int(2)],
            vec![Value::Int(1), Value::Real(2.5)],
        ];
        let err = create_table(ab(), rows).unwrap_err();
        assert!(
            matches!(err, Error::SchemaViolation { row: 1, .. }),
            "{err}"
        );
    }

    #[test]
    fn schema_rejects_duplicates_and_empty() {
        assert!(TableSchema::from_pairs("t", &[("a", Int), ("a", Real)]).is_err());
        assert!(TableSchema::from_pairs("t", &[]).is_err());
        assert!(TableSchema::from_pairs("1t", &[("a", Int)]).is_err());
    }

    fn copy_spec(seed: u64) -> CorrelationSpec {
        CorrelationSpec::new(seed)
            .marginal("a", Marginal::Uniform { lo: 0.0, hi: 1.0 })
            .marginal("b", Marginal::Uniform { lo: 0.0, hi: 1.0 })
            .rule("b", "a", DependencyFn::Identity, 1.0)
    }

    #[test]
    fn generate_zero_rows() {
        let t = generate_table(ab(), 0, &copy_spec(1)).unwrap();
        assert_eq!(t.row_count(), 0);
    }

    #[test]
    fn generate_functional_dependency_and_marginal() {
        let n = 20000;
        let t = generate_table(ab(), n, &copy_spec(7)).unwrap();
        assert!(t.rows().iter().all(|r| r[0] == r[1]));
        let zeros = t.rows().iter().filter(|r| r[0] == Value::Int(0)).count() as f64;
        // binomial(20000, 0.5): mean 10000, sd ~70.7
        let sd = (n as f64 * 0.25).sqrt();
        assert!((zeros - 10000.0).abs() <= 5.0 * sd, "zeros = {zeros}");
    }

    #[test]
    fn generate_is_deterministic() {
        let a = generate_table(ab(), 1234, &copy_spec(99)).unwrap();
        let b = generate_table(ab(), 1234, &copy_spec(99)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.row_count(), 1234);
        let c = generate_table(ab(), 1234, &copy_spec(100)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn generate_rejects_cycles_and_bad_p() {
        let cyclic = copy_spec(1).rule("a", "b", DependencyFn::Identity, 0.5);
        assert!(matches!(
            generate_table(ab(), 10, &cyclic),
            Err(Error::Config(_))
        ));
        let mut bad_p = copy_spec(1);
        bad_p.rules[0].p = 1.5;
        assert!(matches!(
            generate_table(ab(), 10, &bad_p),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn rule_order_independent_of_schema_order() {
        // b is derived from c, which appears later in the schema.
        let s = TableSchema::from_pairs("t", &[("a", Int), ("b", Int), ("c", Int)]).unwrap();
        let spec = CorrelationSpec::new(3)
            .marginal("a", Marginal::Serial { start: 0 })
            .marginal("b", Marginal::Uniform { lo: 0.0, hi: 9.0 })
            .marginal(
                "c",
                Marginal::Cycle {
                    values: vec![4.0, 5.0],
                },
            )
            .rule("b", "c", DependencyFn::Affine { mul: 2.0, add: 1.0 }, 1.0);
        let t = generate_table(s, 4, &spec).unwrap();
        let b: Vec<_> = t.rows().iter().map(|r| r[1]).collect();
        assert_eq!(
            b,
            vec![Value::Int(9), Value::Int(11), Value::Int(9), Value::Int(11)]
        );
        assert_eq!(t.rows()[3][0], Value::Int(3));
    }

    #[test]
    fn csv_round_trip() {
        let s = TableSchema::from_pairs("t", &[("a", Int), ("x", Real)]).unwrap();
        let rows = vec![
            vec![Value::Int(-3), Value::Real(0.1)],
            vec![Value::Int(7), Value::Real(1e-300)],
            vec![Value::Int(0), Value::Real(2.0)],
        ];
        let t = create_table(s, rows).unwrap();
        let mut buf = Vec::new();
        write_csv(&t, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("a:int,x:real\n"), "{text}");
        let back = read_csv("t", buf.as_slice()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn csv_bad_field() {
        let err = read_csv("t", "a:int\n1\nx\n".as_bytes()).unwrap_err();
        assert!(
            matches!(err, Error::SchemaViolation { row: 1, .. }),
            "{err}"
        );
    }
}
