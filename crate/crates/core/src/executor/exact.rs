use std::cell::RefCell;
use std::collections::HashMap;

use super::ops::{join, scan, Batch};
use crate::catalog::{Catalog, Value};
use crate::error::{Error, Result};
use crate::optimizer::CardinalityEstimator;
use crate::plan::{Clause, ColumnRef, CompareOp, JoinAlgorithm, JoinPredicates, LogicalNode};

type Pos = (usize, usize);
type Check = (Pos, CompareOp, Pos);

/// Runs the node's relational expression through the executor: filtered
/// scans joined one relation at a time, preferring connected relations.
pub fn materialize(node: &LogicalNode, catalog: &Catalog) -> Result<Batch> {
    let rels = node.relations();
    let scan_of = |t: &str| {
        let filters: Vec<Clause> = node
            .filters()
            .iter()
            .filter(|c| c.left.table == t)
            .cloned()
            .collect();
        scan(catalog.table(t)?, &filters)
    };
    let Some(first) = rels.first() else {
        return Err(Error::Execution("node has no relations".into()));
    };
    let mut done = vec![first.clone()];
    let mut cur = scan_of(first)?;
    while done.len() < rels.len() {
        let remaining: Vec<&String> = rels.iter().filter(|r| !done.contains(r)).collect();
        let (next, preds) = remaining
            .iter()
            .map(|t| (*t, predicates_between(node, &done, t)))
            .find(|(_, p)| !p.is_empty())
            .unwrap_or_else(|| (remaining[0], JoinPredicates::default()));
        let alg = if preds.equi.is_empty() {
            JoinAlgorithm::NestedLoop
        } else {
            JoinAlgorithm::Hash
        };
        let right = scan_of(next)?;
        cur = join(alg, &preds, &cur, &right)?;
        done.push(next.clone());
    }
    Ok(cur)
}

fn predicates_between(node: &LogicalNode, done: &[String], next: &str) -> JoinPredicates {
    let mut out = JoinPredicates::default();
    for class in node.equalities() {
        let l = class.members().iter().find(|c| done.contains(&c.table));
        let r = class.members().iter().find(|c| c.table == next);
        if let (Some(l), Some(r)) = (l, r) {
            out.equi.push((l.clone(), r.clone()));
        }
    }
    for c in node.theta() {
        let Some(rc) = c.right_column() else { continue };
        let tables = [c.left.table.as_str(), rc.table.as_str()];
        let involves_next = tables.contains(&next);
        let rest_done = tables
            .iter()
            .all(|t| *t == next || done.iter().any(|d| d == t));
        if involves_next && rest_done {
            out.theta.push(c.clone());
        }
    }
    out
}

/// Estimator returning true cardinalities, memoized per node. Used to find
/// the plan that would be optimal with perfect estimates.
pub struct ExactEstimator<'a> {
    catalog: &'a Catalog,
    memo: RefCell<HashMap<String, u64>>,
}

impl<'a> ExactEstimator<'a> {
    pub fn new(catalog: &'a Catalog) -> Self {
        Self {
            catalog,
            memo: RefCell::new(HashMap::new()),
        }
    }

    pub fn true_rows(&self, node: &LogicalNode) -> Result<u64> {
        let key = format!("{node:?}");
        if let Some(v) = self.memo.borrow().get(&key) {
            return Ok(*v);
        }
        let v = materialize(node, self.catalog)?.len() as u64;
        self.memo.borrow_mut().insert(key, v);
        Ok(v)
    }
}

impl CardinalityEstimator for ExactEstimator<'_> {
    /// Panics if the node cannot be executed against the catalog.
    fn estimate(&self, node: &LogicalNode) -> f64 {
        let rows = self
            .true_rows(node)
            .unwrap_or_else(|e| panic!("exact estimate failed: {e}"));
        (rows as f64).max(1.0)
    }
}

/// Exact cardinality by exhaustive nested iteration over the node's
/// relations, checking each predicate as soon as its columns are bound.
pub fn true_cardinality_oracle(node: &LogicalNode, catalog: &Catalog) -> Result<u64> {
    let rels = node.relations();
    let locate = |c: &ColumnRef| -> Result<(usize, usize)> {
        let t = rels
            .iter()
            .position(|r| *r == c.table)
            .ok_or_else(|| Error::Execution(format!("`{c}` is outside the node")))?;
        let col = catalog
            .table(&c.table)?
            .schema()
            .column_index(&c.column)
            .ok_or_else(|| Error::Execution(format!("unknown column `{c}`")))?;
        Ok((t, col))
    };

    let mut inputs: Vec<Vec<&Vec<Value>>> = Vec::with_capacity(rels.len());
    for (i, r) in rels.iter().enumerate() {
        let table = catalog.table(r)?;
        let mut filters = Vec::new();
        for f in node.filters().iter().filter(|f| f.left.table == *r) {
            let (_, col) = locate(&f.left)?;
            filters.push((col, f.op, f.constant_value().expect("constant filter")));
        }
        inputs.push(
            table
                .rows()
                .iter()
                .filter(|row| filters.iter().all(|(c, op, v)| op.eval(&row[*c], v)))
                .collect(),
        );
        debug_assert_eq!(inputs.len(), i + 1);
    }

    // (left pos, op, right pos), checked at the depth of the later table.
    let mut checks: Vec<Vec<Check>> = vec![Vec::new(); rels.len()];
    let mut add = |a: Pos, op: CompareOp, b: Pos| {
        checks[a.0.max(b.0)].push((a, op, b));
    };
    for class in node.equalities() {
        for w in class.members().windows(2) {
            add(locate(&w[0])?, CompareOp::Eq, locate(&w[1])?);
        }
    }
    for c in node.theta() {
        let rc = c.right_column().expect("theta clause compares columns");
        add(locate(&c.left)?, c.op, locate(rc)?);
    }

    fn count(
        depth: usize,
        bound: &mut Vec<usize>,
        inputs: &[Vec<&Vec<Value>>],
        checks: &[Vec<Check>],
    ) -> u64 {
        if depth == inputs.len() {
            return 1;
        }
        let mut total = 0;
        for i in 0..inputs[depth].len() {
            bound.push(i);
            let ok = checks[depth].iter().all(|&(a, op, b)| {
                let va = &inputs[a.0][bound[a.0]][a.1];
                let vb = &inputs[b.0][bound[b.0]][b.1];
                op.eval(va, vb)
            });
            if ok {
                total += count(depth + 1, bound, inputs, checks);
            }
            bound.pop();
        }
        total
    }
    Ok(count(
        0,
        &mut Vec::with_capacity(rels.len()),
        &inputs,
        &checks,
    ))
}
