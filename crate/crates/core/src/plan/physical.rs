use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::clause::Clause;
use super::logical::JoinPredicates;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum JoinAlgorithm {
    NestedLoop,
    Hash,
    Merge,
}

impl JoinAlgorithm {
    pub const ALL: [JoinAlgorithm; 3] = [
        JoinAlgorithm::NestedLoop,
        JoinAlgorithm::Hash,
        JoinAlgorithm::Merge,
    ];

    pub fn name(self) -> &'static str {
        match self {
            JoinAlgorithm::NestedLoop => "NestedLoop",
            JoinAlgorithm::Hash => "HashJoin",
            JoinAlgorithm::Merge => "MergeJoin",
        }
    }

    /// Hash and merge joins need at least one equality key.
    pub fn applicable(self, predicates: &JoinPredicates) -> bool {
        match self {
            JoinAlgorithm::NestedLoop => true,
            JoinAlgorithm::Hash | JoinAlgorithm::Merge => !predicates.equi.is_empty(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Operator {
    Scan {
        table: String,
        filters: Vec<Clause>,
    },
    Join {
        algorithm: JoinAlgorithm,
        predicates: JoinPredicates,
    },
}

/// A physical plan tree. Join nodes have exactly two children, scans none.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicalPlan {
    pub operator: Operator,
    pub children: Vec<PhysicalPlan>,
    /// Base relations below this node, sorted.
    pub relations: Vec<String>,
    /// Estimated output rows, at least 1.
    pub estimated_rows: f64,
    /// Estimated cost of the whole subtree.
    pub estimated_cost: f64,
}

impl PhysicalPlan {
    pub fn scan(table: &str, filters: Vec<Clause>, estimated_rows: f64, cost: f64) -> Self {
        Self {
            operator: Operator::Scan {
                table: table.to_string(),
                filters,
            },
            children: Vec::new(),
            relations: vec![table.to_string()],
            estimated_rows,
            estimated_cost: cost,
        }
    }

    pub fn join(
        algorithm: JoinAlgorithm,
        predicates: JoinPredicates,
        left: PhysicalPlan,
        right: PhysicalPlan,
        estimated_rows: f64,
        cost: f64,
    ) -> Self {
        let mut relations: Vec<String> = left
            .relations
            .iter()
            .chain(&right.relations)
            .cloned()
            .collect();
        relations.sort();
        Self {
            operator: Operator::Join {
                algorithm,
                predicates,
            },
            children: vec![left, right],
            relations,
            estimated_rows,
            estimated_cost: cost,
        }
    }

    pub fn is_join(&self) -> bool {
        matches!(self.operator, Operator::Join { .. })
    }

    pub fn node_count(&self) -> usize {
        1 + self
            .children
            .iter()
            .map(PhysicalPlan::node_count)
            .sum::<usize>()
    }

    pub fn join_count(&self) -> usize {
        self.is_join() as usize
            + self
                .children
                .iter()
                .map(PhysicalPlan::join_count)
                .sum::<usize>()
    }

    /// Shape and operators only, e.g. `HashJoin(Scan(a),Scan(b))`. Used as
    /// the plan identity and as the deterministic tie-breaker.
    pub fn fingerprint(&self) -> String {
        let mut s = String::new();
        self.write_fingerprint(&mut s);
        s
    }

    fn write_fingerprint(&self, out: &mut String) {
        match &self.operator {
            Operator::Scan { table, .. } => {
                let _ = write!(out, "Scan({table})");
            }
            Operator::Join { algorithm, .. } => {
                out.push_str(algorithm.name());
                out.push('(');
                self.children[0].write_fingerprint(out);
                out.push(',');
                self.children[1].write_fingerprint(out);
                out.push(')');
            }
        }
    }

    /// Pre-order walk yielding each node with its path (`0`, `0.0`, `0.1`, ...).
    pub fn walk(&self) -> Vec<(String, &PhysicalPlan)> {
        let mut out = Vec::with_capacity(self.node_count());
        self.walk_into("0".to_string(), &mut out);
        out
    }

    fn walk_into<'a>(&'a self, path: String, out: &mut Vec<(String, &'a PhysicalPlan)>) {
        out.push((path.clone(), self));
        for (i, c) in self.children.iter().enumerate() {
            c.walk_into(format!("{path}.{i}"), out);
        }
    }
}

/// Indented EXPLAIN text, one node per line.
///
/// ```text
/// HashJoin [f.a_id = a.id]  (rows=2000.00 cost=63100.00)
///   Scan f  (rows=20000.00 cost=20000.00)
///   Scan a [a.x = 3]  (rows=100.00 cost=1000.00)
/// ```
pub fn explain(plan: &PhysicalPlan) -> String {
    let mut out = String::new();
    explain_into(plan, 0, &mut out);
    out
}

fn explain_into(plan: &PhysicalPlan, depth: usize, out: &mut String) {
    let indent = "  ".repeat(depth);
    match &plan.operator {
        Operator::Scan { table, filters } => {
            let _ = write!(out, "{indent}Scan {table}");
            if !filters.is_empty() {
                let f: Vec<String> = filters.iter().map(|c| c.to_string()).collect();
                let _ = write!(out, " [{}]", f.join(" AND "));
            }
        }
        Operator::Join {
            algorithm,
            predicates,
        } => {
            let _ = write!(out, "{indent}{}", algorithm.name());
            if predicates.is_empty() {
                out.push_str(" [cross]");
            } else {
                let _ = write!(out, " [{}]", predicates.describe());
            }
        }
    }
    let _ = writeln!(
        out,
        "  (rows={:.2} cost={:.2})",
        plan.estimated_rows, plan.estimated_cost
    );
    for c in &plan.children {
        explain_into(c, depth + 1, out);
    }
}
