use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plan::{JoinAlgorithm, Operator, PhysicalPlan};

/// Constant in the average comparison count of a comparison sort.
pub const SORT_FACTOR: f64 = 1.39;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CostConstants {
    /// Per tuple read or emitted.
    pub c_tuple: f64,
    /// Per comparison.
    pub c_o: f64,
    /// Per hash-table insert or probe.
    pub c_hash: f64,
    /// Fixed cost of building a hash table.
    pub c_startup: f64,
}

impl Default for CostConstants {
    fn default() -> Self {
        Self {
            c_tuple: 1.0,
            c_o: 1.0,
            c_hash: 2.0,
            c_startup: 0.0,
        }
    }
}

impl CostConstants {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("c_tuple", self.c_tuple),
            ("c_o", self.c_o),
            ("c_hash", self.c_hash),
            ("c_startup", self.c_startup),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!(
                    "optimizer.{name} must be a finite value >= 0"
                )));
            }
        }
        Ok(())
    }
}

fn check(n: f64) {
    assert!(n >= 0.0, "cardinality must be nonnegative, got {n}");
}

/// `1.39 · n · log₂ n · c_o`; zero for `n <= 1`.
pub fn sort_cost(n: f64, c: &CostConstants) -> f64 {
    check(n);
    if n <= 1.0 {
        0.0
    } else {
        SORT_FACTOR * n * n.log2() * c.c_o
    }
}

pub fn scan_cost(table_rows: f64, c: &CostConstants) -> f64 {
    check(table_rows);
    table_rows * c.c_tuple
}

/// Cost of one join operator given its input and output cardinalities.
/// Merge join inputs are never pre-sorted, so both are sorted.
pub fn join_cost(alg: JoinAlgorithm, left: f64, right: f64, out: f64, c: &CostConstants) -> f64 {
    check(left);
    check(right);
    check(out);
    let emit = out * c.c_tuple;
    match alg {
        JoinAlgorithm::NestedLoop => left * right * c.c_o + emit,
        JoinAlgorithm::Hash => (left + right) * c.c_hash + c.c_startup + emit,
        JoinAlgorithm::Merge => {
            sort_cost(left, c) + sort_cost(right, c) + (left + right) * c.c_o + emit
        }
    }
}

/// Cost of a single plan node. Scans take the base table size as their
/// only input; joins take the two child cardinalities.
pub fn node_cost(op: &Operator, inputs: &[f64], output: f64, c: &CostConstants) -> f64 {
    match op {
        Operator::Scan { .. } => scan_cost(inputs[0], c),
        Operator::Join { algorithm, .. } => join_cost(*algorithm, inputs[0], inputs[1], output, c),
    }
}

/// Recomputes the cost of every node of `plan` with cardinalities from
/// `rows` (clamped to at least 1), returning the total. Scan inputs come
/// from `table_rows`.
pub fn recost(
    plan: &PhysicalPlan,
    c: &CostConstants,
    table_rows: &dyn Fn(&str) -> f64,
    rows: &mut dyn FnMut(&PhysicalPlan) -> f64,
) -> (f64, f64) {
    let out = rows(plan).max(1.0);
    let cost = match &plan.operator {
        Operator::Scan { table, .. } => scan_cost(table_rows(table), c),
        Operator::Join { algorithm, .. } => {
            let (lr, lc) = recost(&plan.children[0], c, table_rows, rows);
            let (rr, rc) = recost(&plan.children[1], c, table_rows, rows);
            join_cost(*algorithm, lr, rr, out, c) + (lc + rc)
        }
    };
    (out, cost)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sort_examples() {
        let c = CostConstants::default();
        assert!((sort_cost(1024.0, &c) - 14233.6).abs() < 1e-9);
        assert_eq!(sort_cost(1.0, &c), 0.0);
        assert_eq!(sort_cost(0.0, &c), 0.0);
    }

    #[test]
    fn nested_loop_example() {
        let c = CostConstants::default();
        assert_eq!(
            join_cost(JoinAlgorithm::NestedLoop, 100.0, 100.0, 10.0, &c),
            10010.0
        );
    }

    #[test]
    fn hash_beats_nested_loop_for_skewed_inputs() {
        let c = CostConstants::default();
        let (l, r, out) = (1e6, 10.0, 10.0);
        let nl = join_cost(JoinAlgorithm::NestedLoop, l, r, out, &c);
        let hj = join_cost(JoinAlgorithm::Hash, l, r, out, &c);
        assert_eq!(nl, 1e7 + 10.0);
        assert_eq!(hj, 2.0 * (1e6 + 10.0) + 10.0);
        assert!(hj < nl);
    }

    #[test]
    #[should_panic(expected = "nonnegative")]
    fn negative_cardinality_is_a_contract_violation() {
        sort_cost(-1.0, &CostConstants::default());
    }

    #[test]
    fn negative_constants_rejected() {
        let c = CostConstants {
            c_o: -1.0,
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }
}
