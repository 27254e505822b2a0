use std::cmp::Ordering;
use std::collections::HashMap;

use crate::catalog::{Row, Table, Value};
use crate::error::{Error, Result};
use crate::plan::{Clause, ColumnRef, JoinAlgorithm, JoinPredicates, Operand};

/// Rows with named columns; joins concatenate left then right columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub columns: Vec<ColumnRef>,
    pub rows: Vec<Row>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column_index(&self, c: &ColumnRef) -> Result<usize> {
        self.columns
            .iter()
            .position(|x| x == c)
            .ok_or_else(|| Error::Execution(format!("column `{c}` is not available here")))
    }

    /// Rows sorted by total order, for multiset comparison.
    pub fn sorted_rows(&self) -> Vec<Row> {
        let mut rows = self.rows.clone();
        rows.sort_by(|a, b| cmp_rows(a, b));
        rows
    }
}

fn cmp_rows(a: &[Value], b: &[Value]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Numeric comparison with `-0.0 == 0.0`, consistent with `Value::num_eq`.
fn key_cmp(a: &Value, b: &Value) -> Ordering {
    match (a, b) {
        (Value::Int(x), Value::Int(y)) => x.cmp(y),
        _ => a
            .as_f64()
            .partial_cmp(&b.as_f64())
            .unwrap_or(Ordering::Equal),
    }
}

fn keys_cmp(a: &[Value], b: &[Value]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| key_cmp(x, y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Filtered scan of a base table.
pub fn scan(table: &Table, filters: &[Clause]) -> Result<Batch> {
    let name = table.name();
    let columns: Vec<ColumnRef> = table
        .schema()
        .columns()
        .iter()
        .map(|c| ColumnRef::new(name, &c.name))
        .collect();
    let mut compiled = Vec::with_capacity(filters.len());
    for f in filters {
        let Operand::Const(v) = f.right else {
            return Err(Error::Execution(format!("`{f}` is not a scan filter")));
        };
        if f.left.table != name {
            return Err(Error::Execution(format!(
                "`{f}` does not apply to `{name}`"
            )));
        }
        let idx = table
            .schema()
            .column_index(&f.left.column)
            .ok_or_else(|| Error::Execution(format!("unknown column `{}`", f.left)))?;
        compiled.push((idx, f.op, v));
    }
    let rows = table
        .rows()
        .iter()
        .filter(|r| compiled.iter().all(|(i, op, v)| op.eval(&r[*i], v)))
        .cloned()
        .collect();
    Ok(Batch { columns, rows })
}

/// A predicate bound to positions in the concatenated output row.
struct Residual {
    left: usize,
    op: crate::plan::CompareOp,
    right: usize,
}

type Bound = (Vec<(usize, usize)>, Vec<Residual>);

fn bind(preds: &JoinPredicates, left: &Batch, right: &Batch) -> Result<Bound> {
    let mut columns = left.columns.clone();
    columns.extend(right.columns.iter().cloned());
    let all = Batch {
        columns,
        rows: Vec::new(),
    };
    let mut equi = Vec::with_capacity(preds.equi.len());
    for (l, r) in &preds.equi {
        equi.push((left.column_index(l)?, right.column_index(r)?));
    }
    let mut residual = Vec::with_capacity(preds.theta.len());
    for c in &preds.theta {
        let rc = c
            .right_column()
            .ok_or_else(|| Error::Execution(format!("`{c}` is not a join predicate")))?;
        residual.push(Residual {
            left: all.column_index(&c.left)?,
            op: c.op,
            right: all.column_index(rc)?,
        });
    }
    Ok((equi, residual))
}

fn residual_holds(residual: &[Residual], l: &[Value], r: &[Value]) -> bool {
    let at = |i: usize| if i < l.len() { &l[i] } else { &r[i - l.len()] };
    residual.iter().all(|p| p.op.eval(at(p.left), at(p.right)))
}

fn concat(l: &[Value], r: &[Value]) -> Row {
    let mut row = Vec::with_capacity(l.len() + r.len());
    row.extend_from_slice(l);
    row.extend_from_slice(r);
    row
}

/// Joins two batches. Every algorithm produces the same multiset of rows;
/// hash and merge joins need at least one equality key.
pub fn join(
    alg: JoinAlgorithm,
    preds: &JoinPredicates,
    left: &Batch,
    right: &Batch,
) -> Result<Batch> {
    if !alg.applicable(preds) {
        return Err(Error::Execution(format!(
            "{} needs an equality join key",
            alg.name()
        )));
    }
    let (equi, residual) = bind(preds, left, right)?;
    let matches = |l: &[Value], r: &[Value]| {
        equi.iter().all(|&(i, j)| l[i].num_eq(&r[j])) && residual_holds(&residual, l, r)
    };
    let mut rows = Vec::new();
    match alg {
        JoinAlgorithm::NestedLoop => {
            for l in &left.rows {
                for r in &right.rows {
                    if matches(l, r) {
                        rows.push(concat(l, r));
                    }
                }
            }
        }
        JoinAlgorithm::Hash => {
            // Keys hash by numeric value; collisions are resolved by `matches`.
            let hash_key = |row: &[Value], cols: &mut dyn Iterator<Item = usize>| -> Vec<u64> {
                cols.map(|i| {
                    let v = row[i].as_f64();
                    if v == 0.0 {
                        0
                    } else {
                        v.to_bits()
                    }
                })
                .collect()
            };
            let mut table: HashMap<Vec<u64>, Vec<usize>> = HashMap::new();
            for (idx, r) in right.rows.iter().enumerate() {
                let k = hash_key(r, &mut equi.iter().map(|e| e.1));
                table.entry(k).or_default().push(idx);
            }
            for l in &left.rows {
                let k = hash_key(l, &mut equi.iter().map(|e| e.0));
                if let Some(bucket) = table.get(&k) {
                    for &idx in bucket {
                        let r = &right.rows[idx];
                        if matches(l, r) {
                            rows.push(concat(l, r));
                        }
                    }
                }
            }
        }
        JoinAlgorithm::Merge => {
            let key = |row: &Row, side: bool| -> Vec<Value> {
                equi.iter()
                    .map(|&(i, j)| if side { row[j] } else { row[i] })
                    .collect()
            };
            let mut ls: Vec<(Vec<Value>, &Row)> =
                left.rows.iter().map(|r| (key(r, false), r)).collect();
            let mut rs: Vec<(Vec<Value>, &Row)> =
                right.rows.iter().map(|r| (key(r, true), r)).collect();
            ls.sort_by(|a, b| keys_cmp(&a.0, &b.0));
            rs.sort_by(|a, b| keys_cmp(&a.0, &b.0));
            let (mut i, mut j) = (0, 0);
            while i < ls.len() && j < rs.len() {
                match keys_cmp(&ls[i].0, &rs[j].0) {
                    Ordering::Less => i += 1,
                    Ordering::Greater => j += 1,
                    Ordering::Equal => {
                        let i_end = i + ls[i..]
                            .iter()
                            .take_while(|x| keys_cmp(&x.0, &ls[i].0).is_eq())
                            .count();
                        let j_end = j + rs[j..]
                            .iter()
                            .take_while(|x| keys_cmp(&x.0, &rs[j].0).is_eq())
                            .count();
                        for (_, l) in &ls[i..i_end] {
                            for (_, r) in &rs[j..j_end] {
                                if matches(l, r) {
                                    rows.push(concat(l, r));
                                }
                            }
                        }
                        i = i_end;
                        j = j_end;
                    }
                }
            }
        }
    }
    let mut columns = left.columns.clone();
    columns.extend(right.columns.iter().cloned());
    Ok(Batch { columns, rows })
}
