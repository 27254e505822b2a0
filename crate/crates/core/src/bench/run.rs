use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::workload::WorkloadItem;
use crate::catalog::Catalog;
use crate::error::{Error, Result};
use crate::executor::{execute_plan, ExactEstimator, NodeObservation};
use crate::learner::LearnerRegistry;
use crate::optimizer::{best_plan, EstimatorMode, EstimatorPlugin, OptimizerConfig};
use crate::stats::StatsCatalog;

pub const DEFAULT_WINDOW: usize = 5;

/// `max(e/t, t/e)` with `t = max(true_card, 1)`. Panics if `estimated < 1`.
pub fn q_error(estimated: f64, true_card: u64) -> f64 {
    assert!(
        estimated >= 1.0,
        "estimates are clamped to at least 1, got {estimated}"
    );
    let t = true_card.max(1) as f64;
    (estimated / t).max(t / estimated)
}

/// Estimates and truth for one node of an executed plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub path: String,
    pub relations: Vec<String>,
    /// Feature-space fingerprint.
    pub space: String,
    pub estimated: f64,
    pub baseline_estimated: f64,
    pub true_cardinality: u64,
    /// Whether the estimate came from the learner.
    pub learned: bool,
}

impl NodeRecord {
    pub fn q_error(&self) -> f64 {
        q_error(self.estimated, self.true_cardinality)
    }

    pub fn baseline_q_error(&self) -> f64 {
        q_error(self.baseline_estimated, self.true_cardinality)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub template_id: String,
    pub template_iteration: usize,
    pub mode: EstimatorMode,
    pub query: String,
    pub plan: String,
    pub estimated_cost: f64,
    /// Cost of the chosen plan with true cardinalities.
    pub true_cost: f64,
    /// Cost of the best plan with true cardinalities.
    pub optimal_cost: f64,
    pub nodes: Vec<NodeRecord>,
}

/// Settings for [`run_adaptive_loop`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopConfig {
    pub mode: EstimatorMode,
    pub optimizer: OptimizerConfig,
}

/// Callback receiving each query's execution statistics.
pub type Observer<'a> = dyn FnMut(&WorkloadItem, &[NodeObservation]) -> Result<()> + 'a;

/// Plans, executes and (in adaptive mode) learns from each workload item
/// in order. Errors carry the failing iteration.
pub fn run_adaptive_loop(
    catalog: &Catalog,
    stats: &StatsCatalog,
    items: &[WorkloadItem],
    config: &LoopConfig,
    registry: &mut LearnerRegistry,
    mut observer: Option<&mut Observer<'_>>,
) -> Result<Vec<IterationRecord>> {
    let mut optimal: HashMap<String, f64> = HashMap::new();
    let mut records = Vec::with_capacity(items.len());
    for item in items {
        let wrap = |e: Error| Error::Iteration {
            iteration: item.iteration,
            source: Box::new(e),
        };
        let q = &item.query;
        q.validate(catalog).map_err(wrap)?;
        let plugin = EstimatorPlugin::new(config.mode, stats, registry);
        let plan = best_plan(q, stats, &plugin, &config.optimizer).map_err(wrap)?;
        let estimates: Vec<_> = plan
            .walk()
            .iter()
            .map(|(_, node)| plugin.estimate_detailed(&q.node_for(&node.relations)))
            .collect();
        let result =
            execute_plan(&plan, q, catalog, stats, &config.optimizer.constants).map_err(wrap)?;

        let text = q.to_string();
        let optimal_cost = match optimal.get(&text) {
            Some(c) => *c,
            None => {
                let exact = ExactEstimator::new(catalog);
                let c = best_plan(q, stats, &exact, &config.optimizer)
                    .map_err(wrap)?
                    .estimated_cost;
                optimal.insert(text.clone(), c);
                c
            }
        };

        let nodes = result
            .observations
            .iter()
            .zip(&estimates)
            .map(|(o, e)| NodeRecord {
                path: o.path.clone(),
                relations: o.relations.clone(),
                space: o.key.fingerprint(),
                estimated: e.rows,
                baseline_estimated: e.baseline,
                true_cardinality: o.true_cardinality,
                learned: e.learned,
            })
            .collect();

        if config.mode == EstimatorMode::Adaptive {
            for o in &result.observations {
                registry
                    .observe(&o.key, o.vector.coords(), o.target())
                    .map_err(wrap)?;
            }
        }
        if let Some(f) = observer.as_mut() {
            f(item, &result.observations).map_err(wrap)?;
        }
        log::debug!(
            "iteration {} ({}): {} cost {:.1}/{:.1}",
            item.iteration,
            item.template_id,
            plan.fingerprint(),
            result.simulated_cost,
            optimal_cost
        );
        records.push(IterationRecord {
            iteration: item.iteration,
            template_id: item.template_id.clone(),
            template_iteration: item.template_iteration,
            mode: config.mode,
            query: text,
            plan: plan.fingerprint(),
            estimated_cost: plan.estimated_cost,
            true_cost: result.simulated_cost,
            optimal_cost,
            nodes,
        });
    }
    Ok(records)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Convergence {
    pub converged: bool,
    /// Template-local iteration (1-based) from which the final plan has been
    /// chosen without interruption.
    pub last_change: usize,
    pub iterations: usize,
    pub final_plan: String,
}

/// A template has converged when its last `window` instances all chose
/// the same plan.
pub fn detect_convergence(
    records: &[IterationRecord],
    window: usize,
) -> BTreeMap<String, Convergence> {
    let mut plans: BTreeMap<&str, Vec<(usize, &str)>> = BTreeMap::new();
    for r in records {
        plans
            .entry(&r.template_id)
            .or_default()
            .push((r.template_iteration, &r.plan));
    }
    plans
        .into_iter()
        .map(|(id, mut seq)| {
            seq.sort_by_key(|(i, _)| *i);
            let last = seq.last().expect("nonempty").1;
            let run = seq.iter().rev().take_while(|(_, p)| *p == last).count();
            let start = seq[seq.len() - run].0;
            let c = Convergence {
                converged: seq.len() >= 2 && run >= window.max(1),
                last_change: start,
                iterations: seq.len(),
                final_plan: last.to_string(),
            };
            (id.to_string(), c)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn q_error_examples() {
        assert_eq!(q_error(100.0, 100), 1.0);
        assert_eq!(q_error(10.0, 100), 10.0);
        assert_eq!(q_error(5000.0, 10000), 2.0);
        assert_eq!(q_error(1.0, 0), 1.0);
    }

    #[test]
    #[should_panic]
    fn q_error_rejects_unclamped_estimates() {
        q_error(0.5, 1);
    }

    fn records(plans: &[&str]) -> Vec<IterationRecord> {
        plans
            .iter()
            .enumerate()
            .map(|(i, p)| IterationRecord {
                iteration: i + 1,
                template_id: "q".into(),
                template_iteration: i + 1,
                mode: EstimatorMode::Adaptive,
                query: String::new(),
                plan: p.to_string(),
                estimated_cost: 0.0,
                true_cost: 0.0,
                optimal_cost: 0.0,
                nodes: vec![],
            })
            .collect()
    }

    #[test]
    fn convergence_window() {
        let c = &detect_convergence(&records(&["A"; 6]), 5)["q"];
        assert!(c.converged);
        assert_eq!(c.last_change, 1);

        let c = &detect_convergence(&records(&["A", "B", "A", "B", "A", "B", "A", "B"]), 5)["q"];
        assert!(!c.converged);

        let c = &detect_convergence(&records(&["A", "B", "B", "B", "B", "B"]), 5)["q"];
        assert!(c.converged);
        assert_eq!(c.last_change, 2);

        let c = &detect_convergence(&records(&["A", "B", "B", "B", "B"]), 5)["q"];
        assert!(!c.converged);
    }
}
