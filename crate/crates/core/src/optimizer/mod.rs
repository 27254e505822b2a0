//! Cost model, cardinality estimation and dynamic-programming join
//! enumeration.

mod cost;
mod dp;
mod estimate;

pub use cost::{join_cost, node_cost, recost, scan_cost, sort_cost, CostConstants, SORT_FACTOR};
pub use dp::{
    best_plan, enumerate, join_components, Memo, MemoEntry, OptimizerConfig, DEFAULT_MAX_RELATIONS,
};
pub use estimate::{
    baseline_rows, CardinalityEstimator, Estimate, EstimatorMode, EstimatorPlugin,
    THETA_SELECTIVITY,
};
