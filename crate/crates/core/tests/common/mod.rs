#![allow(dead_code)]

use acard_core::catalog::{create_table, Catalog, ColumnKind, TableSchema, Value};
use acard_core::plan::{Clause, Query};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn ints(vals: &[i64]) -> Vec<Value> {
    vals.iter().map(|v| Value::Int(*v)).collect()
}

/// Table with 20000 rows: 10000 x (0, 0) then 10000 x (1, 1), or the
/// exclusive variant with (0, 1) and (1, 0).
pub fn pair_table(exclusive: bool) -> Catalog {
    let schema =
        TableSchema::from_pairs("t", &[("a", ColumnKind::Int), ("b", ColumnKind::Int)]).unwrap();
    let mut rows = Vec::with_capacity(20000);
    for i in 0..20000 {
        let a = (i >= 10000) as i64;
        let b = if exclusive { 1 - a } else { a };
        rows.push(ints(&[a, b]));
    }
    let mut cat = Catalog::new();
    cat.add(create_table(schema, rows).unwrap()).unwrap();
    cat
}

/// Tables `t0..tn` with int columns `id`, `k` (0..4) and `v` (0..9).
pub fn random_catalog(rng: &mut ChaCha8Rng, n: usize, max_rows: usize) -> Catalog {
    let mut cat = Catalog::new();
    for t in 0..n {
        let schema = TableSchema::from_pairs(
            &format!("t{t}"),
            &[
                ("id", ColumnKind::Int),
                ("k", ColumnKind::Int),
                ("v", ColumnKind::Int),
            ],
        )
        .unwrap();
        let rows = rng.gen_range(0..=max_rows);
        let data = (0..rows)
            .map(|i| ints(&[i as i64, rng.gen_range(0..4), rng.gen_range(0..10)]))
            .collect();
        cat.add(create_table(schema, data).unwrap()).unwrap();
    }
    cat
}

/// A connected query over `t0..tn`: a random spanning tree of join
/// clauses, sometimes an extra theta clause, and a few filters.
pub fn random_query(rng: &mut ChaCha8Rng, n: usize) -> Query {
    let cols = ["id", "k", "v"];
    let mut clauses = Vec::new();
    for t in 1..n {
        let parent = rng.gen_range(0..t);
        let (a, b) = (cols[rng.gen_range(1..3)], cols[rng.gen_range(1..3)]);
        clauses.push(Clause::parse(&format!("t{parent}.{a} = t{t}.{b}")).unwrap());
    }
    if n >= 2 && rng.gen_bool(0.3) {
        let x = rng.gen_range(0..n);
        let y = (x + 1 + rng.gen_range(0..n - 1)) % n;
        clauses.push(Clause::parse(&format!("t{x}.id < t{y}.v")).unwrap());
    }
    for t in 0..n {
        if rng.gen_bool(0.4) {
            let op = ["<", "=", ">=", "<>"][rng.gen_range(0..4)];
            let c = rng.gen_range(0..10);
            clauses.push(Clause::parse(&format!("t{t}.v {op} {c}")).unwrap());
        }
    }
    let rels = (0..n).map(|t| format!("t{t}")).collect();
    Query::new(rels, clauses).unwrap()
}
