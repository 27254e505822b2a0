//! Predicate and plan algebra.
//!
//! A plan node is reduced to a `(FeatureSpaceKey, FeatureVector)` pair: the
//! key is the canonical set of base relations, constant-erased clause
//! templates and large equivalence classes; the vector holds the log
//! selectivity of each constant clause.

mod clause;
mod logical;
mod physical;

pub use clause::{
    parse_parts, template_of, Clause, ClauseTemplate, ColumnRef, CompareOp, Operand, RawOperand,
    TemplateOperand,
};
pub use logical::{
    equivalence_classes_of, feature_space_key, feature_vector, EquivalenceClass, FeatureSpaceKey,
    FeatureVector, JoinPredicates, LogicalNode, Query, SELECTIVITY_EPSILON,
};
pub use physical::{explain, JoinAlgorithm, Operator, PhysicalPlan};
