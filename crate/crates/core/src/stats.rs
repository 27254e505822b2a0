//! Single-column statistics and the classical selectivity estimator.
//!
//! Range clauses are answered from an equi-depth histogram with linear
//! interpolation inside a bucket; equality clauses use `1 / n_distinct`.
//! Conjunctions combine clause selectivities under the independence
//! assumption, i.e. by multiplication.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use crate::catalog::{Catalog, Table, Value};
use crate::error::{Error, Result};
use crate::plan::{Clause, ColumnRef, CompareOp, Operand};

pub const DEFAULT_BUCKETS: usize = 100;

/// Fraction of rows, always in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Selectivity(f64);

impl Selectivity {
    pub const ONE: Selectivity = Selectivity(1.0);
    pub const ZERO: Selectivity = Selectivity(0.0);

    /// Clamps into `[0, 1]`; NaN becomes 0.
    pub fn new(value: f64) -> Self {
        if value.is_nan() {
            Selectivity(0.0)
        } else {
            Selectivity(value.clamp(0.0, 1.0))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn complement(self) -> Self {
        Selectivity::new(1.0 - self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquiDepthHistogram {
    /// `buckets + 1` nondecreasing edges. Bucket `i` spans
    /// `bounds[i]..=bounds[i + 1]`.
    bounds: Vec<f64>,
    counts: Vec<usize>,
}

impl EquiDepthHistogram {
    /// Builds from already sorted values. Bucket populations differ by at
    /// most one; the bucket count is reduced to `values.len()` if needed.
    pub fn from_sorted(sorted: &[f64], buckets: usize) -> Self {
        let n = sorted.len();
        if n == 0 {
            return Self {
                bounds: Vec::new(),
                counts: Vec::new(),
            };
        }
        let b = buckets.clamp(1, n);
        let start = |i: usize| i * n / b;
        let mut bounds: Vec<f64> = (0..b).map(|i| sorted[start(i)]).collect();
        bounds.push(sorted[n - 1]);
        let counts = (0..b).map(|i| start(i + 1) - start(i)).collect();
        Self { bounds, counts }
    }

    pub fn bucket_count(&self) -> usize {
        self.counts.len()
    }

    pub fn bounds(&self) -> &[f64] {
        &self.bounds
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    /// Estimated fraction of values strictly below `c`.
    pub fn fraction_below(&self, c: f64) -> f64 {
        let total = self.total();
        if total == 0 || c <= self.bounds[0] {
            return 0.0;
        }
        if c > self.bounds[self.bounds.len() - 1] {
            return 1.0;
        }
        let mut acc = 0.0;
        for (i, &count) in self.counts.iter().enumerate() {
            let (lo, hi) = (self.bounds[i], self.bounds[i + 1]);
            if c > hi {
                acc += count as f64;
            } else {
                if c > lo {
                    acc += count as f64 * (c - lo) / (hi - lo);
                }
                break;
            }
        }
        (acc / total as f64).clamp(0.0, 1.0)
    }

    /// Width of the widest bucket, the interpolation tolerance.
    pub fn max_bucket_width(&self) -> f64 {
        self.bounds
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColumnStats {
    pub histogram: EquiDepthHistogram,
    pub n_distinct: usize,
    pub min: Option<Value>,
    pub max: Option<Value>,
    pub total_rows: usize,
}

impl ColumnStats {
    pub fn is_empty(&self) -> bool {
        self.total_rows == 0
    }

    fn in_range(&self, c: &Value) -> bool {
        match (&self.min, &self.max) {
            (Some(lo), Some(hi)) => lo.total_cmp(c).is_le() && c.total_cmp(hi).is_le(),
            _ => false,
        }
    }

    fn equality(&self, c: &Value) -> Selectivity {
        if self.n_distinct == 0 || !self.in_range(c) {
            Selectivity::ZERO
        } else {
            Selectivity::new(1.0 / self.n_distinct as f64)
        }
    }

    fn below(&self, c: &Value) -> Selectivity {
        Selectivity::new(self.histogram.fraction_below(c.as_f64()))
    }
}

/// Full-scan statistics for one column.
pub fn build_column_stats(table: &Table, column: &str, buckets: usize) -> Result<ColumnStats> {
    let mut values = table.column_values(column)?;
    values.sort_by(|a, b| a.total_cmp(b));
    let n_distinct = if values.is_empty() {
        0
    } else {
        1 + values.windows(2).filter(|w| !w[0].num_eq(&w[1])).count()
    };
    let as_f64: Vec<f64> = values.iter().map(Value::as_f64).collect();
    Ok(ColumnStats {
        histogram: EquiDepthHistogram::from_sorted(&as_f64, buckets),
        n_distinct,
        min: values.first().copied(),
        max: values.last().copied(),
        total_rows: values.len(),
    })
}

/// Selectivity of a `column op constant` clause.
pub fn clause_selectivity(stats: &ColumnStats, clause: &Clause) -> Result<Selectivity> {
    let c = match &clause.right {
        Operand::Const(v) => *v,
        Operand::Column(other) => {
            return Err(Error::Unsupported(format!(
                "`{} {} {other}` compares two columns; it is a join predicate",
                clause.left,
                clause.op.symbol()
            )))
        }
    };
    let le = || Selectivity::new(stats.below(&c).value() + stats.equality(&c).value());
    Ok(match clause.op {
        CompareOp::Lt => stats.below(&c),
        CompareOp::Ge => stats.below(&c).complement(),
        CompareOp::Le => le(),
        CompareOp::Gt => le().complement(),
        CompareOp::Eq => stats.equality(&c),
        CompareOp::Ne => stats.equality(&c).complement(),
    })
}

/// Node selectivity under clause independence: the product of the inputs.
pub fn independence_node_selectivity(clause_selectivities: &[Selectivity]) -> Selectivity {
    Selectivity::new(clause_selectivities.iter().map(|s| s.value()).product())
}

/// Statistics for every column of every table in a catalog.
#[derive(Debug, Clone, Default)]
pub struct StatsCatalog {
    columns: HashMap<ColumnRef, ColumnStats>,
    row_counts: BTreeMap<String, usize>,
}

impl StatsCatalog {
    pub fn build(catalog: &Catalog, buckets: usize) -> Result<Self> {
        let mut out = Self::default();
        for t in catalog.tables() {
            out.row_counts.insert(t.name().to_string(), t.row_count());
            for c in t.schema().columns() {
                out.columns.insert(
                    ColumnRef::new(t.name(), &c.name),
                    build_column_stats(t, &c.name, buckets)?,
                );
            }
        }
        Ok(out)
    }

    pub fn column(&self, col: &ColumnRef) -> Option<&ColumnStats> {
        self.columns.get(col)
    }

    pub fn row_count(&self, table: &str) -> Option<usize> {
        self.row_counts.get(table).copied()
    }

    /// Selectivity of a constant clause, or 1 (with a warning) when the
    /// column has no statistics.
    pub fn selectivity_or_one(&self, clause: &Clause) -> Selectivity {
        match self.columns.get(&clause.left) {
            Some(s) => clause_selectivity(s, clause).unwrap_or(Selectivity::ONE),
            None => {
                log::warn!("no statistics for {}; assuming selectivity 1", clause.left);
                Selectivity::ONE
            }
        }
    }

    /// `column,n_distinct,min,max,edges...`, one line per column, sorted.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "column,n_distinct,min,max,edges")?;
        let mut cols: Vec<_> = self.columns.iter().collect();
        cols.sort_by(|a, b| a.0.cmp(b.0));
        for (col, s) in cols {
            let fmt = |v: &Option<Value>| v.map(|v| v.to_string()).unwrap_or_default();
            write!(
                out,
                "{col},{},{},{}",
                s.n_distinct,
                fmt(&s.min),
                fmt(&s.max)
            )?;
            for e in s.histogram.bounds() {
                write!(out, ",{e:?}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{create_table, ColumnKind, TableSchema};
    use proptest::prelude::*;

    fn int_table(values: impl IntoIterator<Item = i64>) -> Table {
        let s = TableSchema::from_pairs("t", &[("x", ColumnKind::Int)]).unwrap();
        create_table(s, values.into_iter().map(|v| vec![Value::Int(v)]).collect()).unwrap()
    }

    fn clause(op: CompareOp, c: i64) -> Clause {
        Clause::constant(ColumnRef::new("t", "x"), op, Value::Int(c))
    }

    /// Brute-force equi-depth split of a sorted list.
    fn oracle_edges(sorted: &[i64], b: usize) -> Vec<i64> {
        let n = sorted.len();
        let mut edges: Vec<i64> = (0..b).map(|i| sorted[i * n / b]).collect();
        edges.push(*sorted.last().unwrap());
        edges
    }

    #[test]
    fn histogram_1_to_100() {
        let s = build_column_stats(&int_table(1..=100), "x", 10).unwrap();
        let sorted: Vec<i64> = (1..=100).collect();
        let expected: Vec<f64> = oracle_edges(&sorted, 10)
            .iter()
            .map(|&v| v as f64)
            .collect();
        assert_eq!(s.histogram.bounds(), expected.as_slice());
        // 1, 11, 21, ..., 91, 100: within one of 1, 10, 20, ..., 100
        for (i, e) in s.histogram.bounds().iter().enumerate() {
            let nominal = if i == 0 { 1.0 } else { 10.0 * i as f64 };
            assert!((e - nominal).abs() <= 1.0, "edge {i} = {e}");
        }
        assert_eq!(s.n_distinct, 100);
        assert!(s.histogram.counts().iter().all(|&c| c == 10));
    }

    #[test]
    fn constant_column() {
        let s = build_column_stats(&int_table(std::iter::repeat_n(7, 50)), "x", 8).unwrap();
        assert_eq!(
            (s.min, s.max, s.n_distinct),
            (Some(Value::Int(7)), Some(Value::Int(7)), 1)
        );
    }

    #[test]
    fn correlated_table_column_stats_and_equality() {
        let t = int_table((0..20000).map(|i| (i >= 10000) as i64));
        let s = build_column_stats(&t, "x", DEFAULT_BUCKETS).unwrap();
        assert_eq!(
            (s.n_distinct, s.min, s.max),
            (2, Some(Value::Int(0)), Some(Value::Int(1)))
        );
        assert_eq!(
            clause_selectivity(&s, &clause(CompareOp::Eq, 0))
                .unwrap()
                .value(),
            0.5
        );
    }

    #[test]
    fn below_min_is_empty() {
        let s = build_column_stats(&int_table(10..20), "x", 4).unwrap();
        assert_eq!(
            clause_selectivity(&s, &clause(CompareOp::Lt, 10))
                .unwrap()
                .value(),
            0.0
        );
        assert_eq!(
            clause_selectivity(&s, &clause(CompareOp::Eq, 3))
                .unwrap()
                .value(),
            0.0
        );
        assert_eq!(
            clause_selectivity(&s, &clause(CompareOp::Gt, 25))
                .unwrap()
                .value(),
            0.0
        );
    }

    #[test]
    fn range_on_uniform_integers() {
        let s = build_column_stats(&int_table(1..=1000), "x", DEFAULT_BUCKETS).unwrap();
        let exact = (1..=1000).filter(|&v| v <= 250).count() as f64 / 1000.0;
        let est = clause_selectivity(&s, &clause(CompareOp::Le, 250))
            .unwrap()
            .value();
        let width = s.histogram.max_bucket_width() / 1000.0;
        assert!((est - exact).abs() <= width, "{est} vs {exact}");
    }

    #[test]
    fn column_clause_is_unsupported() {
        let s = build_column_stats(&int_table(0..5), "x", 4).unwrap();
        let c = Clause::columns(
            ColumnRef::new("t", "x"),
            CompareOp::Eq,
            ColumnRef::new("u", "y"),
        );
        assert!(matches!(
            clause_selectivity(&s, &c),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn independence_products() {
        let sel = |v: &[f64]| {
            let v: Vec<_> = v.iter().map(|&x| Selectivity::new(x)).collect();
            independence_node_selectivity(&v).value()
        };
        assert_eq!(sel(&[]), 1.0);
        assert_eq!(sel(&[0.5, 0.5]), 0.25);
        assert!((sel(&[0.5, 0.2, 0.1]) - 0.01).abs() < 1e-15);
    }

    #[test]
    fn missing_stats_fall_back_to_one() {
        let sc = StatsCatalog::default();
        assert_eq!(
            sc.selectivity_or_one(&clause(CompareOp::Eq, 1)),
            Selectivity::ONE
        );
    }

    proptest! {
        #[test]
        fn less_than_is_monotone(values in prop::collection::vec(-50i64..50, 1..300),
                                 buckets in 1usize..20, a in -60i64..60, b in -60i64..60) {
            let s = build_column_stats(&int_table(values), "x", buckets).unwrap();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let sl = clause_selectivity(&s, &clause(CompareOp::Lt, lo)).unwrap().value();
            let sh = clause_selectivity(&s, &clause(CompareOp::Lt, hi)).unwrap().value();
            prop_assert!(sl <= sh);
        }

        #[test]
        fn lt_and_ge_complement(values in prop::collection::vec(-50i64..50, 1..300),
                                buckets in 1usize..20, c in -60i64..60) {
            let s = build_column_stats(&int_table(values), "x", buckets).unwrap();
            let lt = clause_selectivity(&s, &clause(CompareOp::Lt, c)).unwrap().value();
            let ge = clause_selectivity(&s, &clause(CompareOp::Ge, c)).unwrap().value();
            prop_assert!((lt + ge - 1.0).abs() <= 1e-12);
            for op in CompareOp::ALL {
                let v = clause_selectivity(&s, &clause(op, c)).unwrap().value();
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }

        #[test]
        fn bucket_populations_balanced(n in 1usize..500, buckets in 1usize..40) {
            let vals: Vec<f64> = (0..n).map(|i| (i / 3) as f64).collect();
            let h = EquiDepthHistogram::from_sorted(&vals, buckets);
            let max = *h.counts().iter().max().unwrap();
            let min = *h.counts().iter().min().unwrap();
            prop_assert!(max - min <= 1);
            prop_assert_eq!(h.counts().iter().sum::<usize>(), n);
            prop_assert!(h.bounds().windows(2).all(|w| w[0] <= w[1]));
        }

        #[test]
        fn product_law(v in prop::collection::vec(0.0f64..=1.0, 0..8)) {
            let sels: Vec<_> = v.iter().map(|&x| Selectivity::new(x)).collect();
            let p = independence_node_selectivity(&sels).value();
            let mut rev = sels.clone();
            rev.reverse();
            prop_assert!((p - independence_node_selectivity(&rev).value()).abs() <= 1e-15);
            if let Some(m) = v.iter().cloned().reduce(f64::min) {
                prop_assert!(p <= m + 1e-15);
            }
        }
    }
}
