use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::cost::{join_cost, scan_cost, CostConstants};
use super::estimate::CardinalityEstimator;
use crate::error::{Error, Result};
use crate::plan::{JoinAlgorithm, PhysicalPlan, Query};
use crate::stats::StatsCatalog;

pub const DEFAULT_MAX_RELATIONS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub max_relations: usize,
    pub cross_products: bool,
    #[serde(flatten)]
    pub constants: CostConstants,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            max_relations: DEFAULT_MAX_RELATIONS,
            cross_products: false,
            constants: CostConstants::default(),
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=20).contains(&self.max_relations) {
            return Err(Error::Config(
                "optimizer.max_relations must be in 1..=20".into(),
            ));
        }
        self.constants.validate()
    }
}

/// Best plan found for one relation subset.
#[derive(Debug, Clone)]
pub struct MemoEntry {
    pub mask: u32,
    pub rows: f64,
    pub cost: f64,
    pub fingerprint: String,
    choice: Choice,
}

#[derive(Debug, Clone, Copy)]
enum Choice {
    Scan,
    Join {
        left: u32,
        right: u32,
        algorithm: JoinAlgorithm,
    },
}

/// Connected components of the query's join graph, as relation lists.
pub fn join_components(query: &Query) -> Vec<Vec<String>> {
    let n = query.relations().len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    let idx = |t: &str| {
        query
            .relations()
            .iter()
            .position(|r| r == t)
            .expect("validated query")
    };
    let mut link = |a: usize, b: usize| {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        parent[ra.max(rb)] = ra.min(rb);
    };
    for class in query.classes() {
        let m = class.members();
        for w in m.windows(2) {
            link(idx(&w[0].table), idx(&w[1].table));
        }
    }
    for c in query.theta() {
        if let Some(r) = c.right_column() {
            link(idx(&c.left.table), idx(&r.table));
        }
    }
    let mut comps: Vec<Vec<String>> = vec![Vec::new(); n];
    for i in 0..n {
        let r = find(&mut parent, i);
        comps[r].push(query.relations()[i].clone());
    }
    comps.retain(|c| !c.is_empty());
    comps
}

/// Dynamic-programming memo over relation subsets.
pub struct Memo {
    entries: Vec<Option<MemoEntry>>,
}

impl Memo {
    pub fn get(&self, mask: u32) -> Option<&MemoEntry> {
        self.entries.get(mask as usize)?.as_ref()
    }

    pub fn entries(&self) -> impl Iterator<Item = &MemoEntry> {
        self.entries.iter().flatten()
    }
}

fn better(cost: f64, fp: impl FnOnce() -> String, best: &Option<(f64, String)>) -> Option<String> {
    match best {
        None => Some(fp()),
        Some((bc, bfp)) => match cost.partial_cmp(bc) {
            Some(Ordering::Less) => Some(fp()),
            Some(Ordering::Equal) => {
                let f = fp();
                (f < *bfp).then_some(f)
            }
            _ => None,
        },
    }
}

/// Fills the memo for every subset the enumeration can build.
pub fn enumerate(
    query: &Query,
    stats: &StatsCatalog,
    estimator: &dyn CardinalityEstimator,
    config: &OptimizerConfig,
) -> Result<Memo> {
    let n = query.relations().len();
    if n > config.max_relations {
        return Err(Error::Planning(format!(
            "query joins {n} relations; the limit is {}",
            config.max_relations
        )));
    }
    if !config.cross_products {
        let comps = join_components(query);
        if comps.len() > 1 {
            let names: Vec<String> = comps
                .iter()
                .map(|c| format!("{{{}}}", c.join(",")))
                .collect();
            return Err(Error::Planning(format!(
                "join graph is disconnected: {} (enable cross products to allow this)",
                names.join(" | ")
            )));
        }
    }
    let c = &config.constants;
    let full = (1u32 << n) - 1;
    let mut entries: Vec<Option<MemoEntry>> = vec![None; full as usize + 1];

    for i in 0..n {
        let mask = 1u32 << i;
        let table = &query.relations()[i];
        let rows = estimator.estimate(&query.node_for_mask(mask)).max(1.0);
        let base = stats.row_count(table).unwrap_or(0) as f64;
        entries[mask as usize] = Some(MemoEntry {
            mask,
            rows,
            cost: scan_cost(base, c),
            fingerprint: format!("Scan({table})"),
            choice: Choice::Scan,
        });
    }

    // Increasing numeric order visits every proper subset before its superset.
    for mask in 1..=full {
        if mask.count_ones() < 2 {
            continue;
        }
        let rels = query.relations_of_mask(mask);
        let mut best: Option<(f64, String)> = None;
        let mut choice = None;
        let mut rows = None;
        let mut left = (mask - 1) & mask;
        while left != 0 {
            let right = mask & !left;
            if let (Some(l), Some(r)) = (&entries[left as usize], &entries[right as usize]) {
                let preds = query.join_predicates(
                    &query.relations_of_mask(left),
                    &query.relations_of_mask(right),
                );
                if !preds.is_empty() || config.cross_products {
                    let out = *rows
                        .get_or_insert_with(|| estimator.estimate(&query.node_for(&rels)).max(1.0));
                    for alg in JoinAlgorithm::ALL {
                        if !alg.applicable(&preds) {
                            continue;
                        }
                        let cost = join_cost(alg, l.rows, r.rows, out, c) + (l.cost + r.cost);
                        let fp = || format!("{}({},{})", alg.name(), l.fingerprint, r.fingerprint);
                        if let Some(f) = better(cost, fp, &best) {
                            best = Some((cost, f));
                            choice = Some(Choice::Join {
                                left,
                                right,
                                algorithm: alg,
                            });
                        }
                    }
                }
            }
            left = (left - 1) & mask;
        }
        if let (Some((cost, fingerprint)), Some(choice), Some(rows)) = (best, choice, rows) {
            entries[mask as usize] = Some(MemoEntry {
                mask,
                rows,
                cost,
                fingerprint,
                choice,
            });
        }
    }
    Ok(Memo { entries })
}

fn build(query: &Query, memo: &Memo, mask: u32) -> PhysicalPlan {
    let e = memo.get(mask).expect("memo entry for enumerated subset");
    match e.choice {
        Choice::Scan => {
            let table = &query.relations()[mask.trailing_zeros() as usize];
            let node = query.node_for(std::slice::from_ref(table));
            PhysicalPlan::scan(table, node.filters().to_vec(), e.rows, e.cost)
        }
        Choice::Join {
            left,
            right,
            algorithm,
        } => {
            let preds = query.join_predicates(
                &query.relations_of_mask(left),
                &query.relations_of_mask(right),
            );
            let l = build(query, memo, left);
            let r = build(query, memo, right);
            PhysicalPlan::join(algorithm, preds, l, r, e.rows, e.cost)
        }
    }
}

/// Cheapest bushy plan under the given estimator. Ties go to the
/// lexicographically smallest plan fingerprint.
pub fn best_plan(
    query: &Query,
    stats: &StatsCatalog,
    estimator: &dyn CardinalityEstimator,
    config: &OptimizerConfig,
) -> Result<PhysicalPlan> {
    let memo = enumerate(query, stats, estimator, config)?;
    let full = (1u32 << query.relations().len()) - 1;
    if memo.get(full).is_none() {
        return Err(Error::Planning(format!(
            "no plan joins all relations of {query}"
        )));
    }
    Ok(build(query, &memo, full))
}
