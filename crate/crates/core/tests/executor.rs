mod common;

use acard_core::catalog::{create_table, Catalog, ColumnKind, TableSchema};
use acard_core::executor::{
    execute_plan, join, scan, true_cardinality_oracle, Batch, ExactEstimator,
};
use acard_core::optimizer::{best_plan, CostConstants, EstimatorPlugin, OptimizerConfig};
use acard_core::plan::{Clause, ColumnRef, JoinAlgorithm, JoinPredicates, LogicalNode, Query};
use acard_core::stats::{StatsCatalog, DEFAULT_BUCKETS};
use common::{ints, pair_table, random_catalog, random_query};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn filters(clauses: &[&str]) -> Vec<Clause> {
    clauses.iter().map(|c| Clause::parse(c).unwrap()).collect()
}

#[test]
fn correlated_scan() {
    let cat = pair_table(false);
    let b = scan(cat.table("t").unwrap(), &filters(&["t.a = 0", "t.b = 0"])).unwrap();
    assert_eq!(b.len(), 10000);
    let node = LogicalNode::new(vec!["t".into()], filters(&["t.a = 0"]), vec![], vec![]);
    assert_eq!(true_cardinality_oracle(&node, &cat).unwrap(), 10000);
}

#[test]
fn exclusive_scan_is_empty() {
    let cat = pair_table(true);
    let b = scan(cat.table("t").unwrap(), &filters(&["t.a = 0", "t.b = 0"])).unwrap();
    assert_eq!(b.len(), 0);
}

fn sized(name: &str, rows: usize) -> acard_core::catalog::Table {
    let schema = TableSchema::from_pairs(name, &[("x", ColumnKind::Int)]).unwrap();
    create_table(schema, (0..rows as i64).map(|i| ints(&[i % 7])).collect()).unwrap()
}

#[test]
fn join_with_empty_table() {
    let mut cat = Catalog::new();
    cat.add(sized("a", 30)).unwrap();
    cat.add(sized("e", 0)).unwrap();
    let st = StatsCatalog::build(&cat, DEFAULT_BUCKETS).unwrap();
    let q = Query::new(vec!["a".into(), "e".into()], filters(&["a.x = e.x"])).unwrap();
    let plan = best_plan(
        &q,
        &st,
        &EstimatorPlugin::baseline(&st),
        &OptimizerConfig::default(),
    )
    .unwrap();
    let res = execute_plan(&plan, &q, &cat, &st, &CostConstants::default()).unwrap();
    assert_eq!(res.output_rows, 0);
    assert_eq!(res.observations[0].true_cardinality, 0);
    assert_eq!(res.observations[0].target(), 0.0);
}

#[test]
fn oracle_cross_product() {
    let mut cat = Catalog::new();
    cat.add(sized("a", 100)).unwrap();
    cat.add(sized("b", 50)).unwrap();
    let node = LogicalNode::new(vec!["a".into(), "b".into()], vec![], vec![], vec![]);
    assert_eq!(true_cardinality_oracle(&node, &cat).unwrap(), 5000);
    let a = scan(cat.table("a").unwrap(), &[]).unwrap();
    let b = scan(cat.table("b").unwrap(), &[]).unwrap();
    let out = join(
        JoinAlgorithm::NestedLoop,
        &JoinPredicates::default(),
        &a,
        &b,
    )
    .unwrap();
    assert_eq!(out.len(), 5000);
}

#[test]
fn unknown_table_is_an_execution_error() {
    let cat = pair_table(false);
    let node = LogicalNode::new(vec!["nope".into()], vec![], vec![], vec![]);
    assert!(true_cardinality_oracle(&node, &cat).is_err());
}

#[test]
fn hash_join_requires_a_key() {
    let cat = pair_table(false);
    let t = scan(cat.table("t").unwrap(), &filters(&["t.a = 5"])).unwrap();
    assert!(join(JoinAlgorithm::Hash, &JoinPredicates::default(), &t, &t).is_err());
}

#[test]
fn observations_agree_with_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..30 {
        let n = rng.gen_range(1..=4);
        let cat = random_catalog(&mut rng, n, 25);
        let st = StatsCatalog::build(&cat, DEFAULT_BUCKETS).unwrap();
        let q = random_query(&mut rng, n);
        let exact = ExactEstimator::new(&cat);
        for cross in [false, true] {
            let cfg = OptimizerConfig {
                cross_products: cross,
                ..Default::default()
            };
            let plan = best_plan(&q, &st, &EstimatorPlugin::baseline(&st), &cfg).unwrap();
            let c = CostConstants::default();
            let res = execute_plan(&plan, &q, &cat, &st, &c).unwrap();
            assert_eq!(res.observations.len(), plan.node_count());
            assert_eq!(res.output_rows, res.observations[0].true_cardinality);
            for o in &res.observations {
                let node = q.node_for(&o.relations);
                assert_eq!(
                    o.true_cardinality,
                    true_cardinality_oracle(&node, &cat).unwrap()
                );
                assert_eq!(o.true_cardinality, exact.true_rows(&node).unwrap());
                assert_eq!(o.key, node.feature_space_key());
            }
            assert_eq!(execute_plan(&plan, &q, &cat, &st, &c).unwrap(), res);

            // Planned with true cardinalities, estimated and simulated cost coincide.
            let ideal = best_plan(&q, &st, &exact, &cfg).unwrap();
            let ideal_res = execute_plan(&ideal, &q, &cat, &st, &c).unwrap();
            assert_eq!(ideal.estimated_cost, ideal_res.simulated_cost);
            assert!(ideal_res.simulated_cost <= res.simulated_cost);
        }
    }
}

fn batch(name: &str, rows: &[(i64, i64)]) -> Batch {
    Batch {
        columns: vec![ColumnRef::new(name, "k"), ColumnRef::new(name, "v")],
        rows: rows.iter().map(|(k, v)| ints(&[*k, *v])).collect(),
    }
}

proptest! {
    #[test]
    fn join_algorithms_agree(
        l in prop::collection::vec((0i64..4, 0i64..6), 0..30),
        r in prop::collection::vec((0i64..4, 0i64..6), 0..30),
        both_keys in any::<bool>(),
        theta in any::<bool>(),
    ) {
        let (lb, rb) = (batch("l", &l), batch("r", &r));
        let mut preds = JoinPredicates {
            equi: vec![(ColumnRef::new("l", "k"), ColumnRef::new("r", "k"))],
            theta: vec![],
        };
        if both_keys {
            preds.equi.push((ColumnRef::new("l", "v"), ColumnRef::new("r", "v")));
        }
        if theta {
            preds.theta.push(Clause::parse("l.v < r.v").unwrap());
        }
        let reference = join(JoinAlgorithm::NestedLoop, &preds, &lb, &rb).unwrap().sorted_rows();
        for alg in [JoinAlgorithm::Hash, JoinAlgorithm::Merge] {
            let out = join(alg, &preds, &lb, &rb).unwrap();
            prop_assert_eq!(out.sorted_rows(), reference.clone());
        }
    }
}
