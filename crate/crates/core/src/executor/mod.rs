//! In-memory execution of physical plans, recording the true cardinality
//! of every plan node.

mod exact;
mod ops;

use std::io::Write;

use serde::{Deserialize, Serialize};

pub use exact::{true_cardinality_oracle, ExactEstimator};
pub use ops::{join, scan, Batch};

use crate::catalog::Catalog;
use crate::error::Result;
use crate::optimizer::{recost, CostConstants};
use crate::plan::{feature_vector, FeatureSpaceKey, FeatureVector, PhysicalPlan, Query};
use crate::stats::StatsCatalog;

/// Execution statistics for one plan node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeObservation {
    pub key: FeatureSpaceKey,
    pub vector: FeatureVector,
    pub true_cardinality: u64,
    /// Position in the plan tree: `0` is the root, `0.1` its right child.
    pub path: String,
    pub relations: Vec<String>,
}

impl NodeObservation {
    /// Learning target `ln(max(true, 1))`.
    pub fn target(&self) -> f64 {
        (self.true_cardinality.max(1) as f64).ln()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExecutionResult {
    pub output_rows: u64,
    /// Pre-order, root first.
    pub observations: Vec<NodeObservation>,
    /// Plan cost recomputed with true cardinalities (clamped to at least 1).
    pub simulated_cost: f64,
}

/// Runs `plan` and returns the root output with per-node row counts in
/// pre-order.
pub fn run(plan: &PhysicalPlan, catalog: &Catalog) -> Result<(Batch, Vec<(String, u64)>)> {
    let mut counts = Vec::with_capacity(plan.node_count());
    let out = run_node(plan, catalog, "0".to_string(), &mut counts)?;
    Ok((out, counts))
}

fn run_node(
    plan: &PhysicalPlan,
    catalog: &Catalog,
    path: String,
    counts: &mut Vec<(String, u64)>,
) -> Result<Batch> {
    let slot = counts.len();
    counts.push((path.clone(), 0));
    let batch = match &plan.operator {
        crate::plan::Operator::Scan { table, filters } => scan(catalog.table(table)?, filters)?,
        crate::plan::Operator::Join {
            algorithm,
            predicates,
        } => {
            let l = run_node(&plan.children[0], catalog, format!("{path}.0"), counts)?;
            let r = run_node(&plan.children[1], catalog, format!("{path}.1"), counts)?;
            join(*algorithm, predicates, &l, &r)?
        }
    };
    counts[slot].1 = batch.len() as u64;
    Ok(batch)
}

/// Executes `plan` for `query`, recording one observation per node.
pub fn execute_plan(
    plan: &PhysicalPlan,
    query: &Query,
    catalog: &Catalog,
    stats: &StatsCatalog,
    constants: &CostConstants,
) -> Result<ExecutionResult> {
    let (out, counts) = run(plan, catalog)?;
    let nodes = plan.walk();
    let observations: Vec<NodeObservation> = nodes
        .iter()
        .zip(&counts)
        .map(|((path, node), (_, rows))| {
            let logical = query.node_for(&node.relations);
            NodeObservation {
                key: logical.feature_space_key(),
                vector: feature_vector(&logical, stats),
                true_cardinality: *rows,
                path: path.clone(),
                relations: node.relations.clone(),
            }
        })
        .collect();
    let mut it = counts.iter().map(|(_, r)| *r as f64);
    let table_rows = |t: &str| catalog.table(t).map_or(0.0, |t| t.row_count() as f64);
    let (_, simulated_cost) = recost(plan, constants, &table_rows, &mut |_| {
        it.next().expect("one count per node")
    });
    Ok(ExecutionResult {
        output_rows: out.len() as u64,
        observations,
        simulated_cost,
    })
}

/// Appends observations as CSV rows:
/// `iteration,query_id,path,space,true_cardinality,features` where
/// `features` is a `;`-separated list.
pub fn write_observations<W: Write>(
    out: &mut csv::Writer<W>,
    iteration: usize,
    query_id: &str,
    observations: &[NodeObservation],
) -> Result<()> {
    for o in observations {
        let features: Vec<String> = o.vector.coords().iter().map(|v| format!("{v:?}")).collect();
        out.write_record([
            iteration.to_string(),
            query_id.to_string(),
            o.path.clone(),
            o.key.fingerprint(),
            o.true_cardinality.to_string(),
            features.join(";"),
        ])?;
    }
    Ok(())
}

pub const OBSERVATION_HEADER: [&str; 6] = [
    "iteration",
    "query_id",
    "path",
    "space",
    "true_cardinality",
    "features",
];
