use serde::{Deserialize, Serialize};

use super::workload::WorkloadItem;
use crate::catalog::Catalog;
use crate::error::Result;
use crate::executor::ExactEstimator;
use crate::learner::{LearnerConfig, LearnerKind, LearnerRegistry};
use crate::optimizer::baseline_rows;
use crate::plan::{feature_vector, FeatureSpaceKey, FeatureVector};
use crate::stats::StatsCatalog;

/// One point of a learning curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    /// Learner kind, or `baseline` for the standard estimator.
    pub kind: String,
    pub observations: usize,
    /// Mean `|ln(estimate / true)|` over the test queries.
    pub error: f64,
}

struct Sample {
    key: FeatureSpaceKey,
    x: FeatureVector,
    truth: f64,
    baseline: f64,
}

fn samples(items: &[WorkloadItem], catalog: &Catalog, stats: &StatsCatalog) -> Result<Vec<Sample>> {
    let exact = ExactEstimator::new(catalog);
    items
        .iter()
        .map(|it| {
            let node = it.query.node_for(it.query.relations());
            Ok(Sample {
                key: node.feature_space_key(),
                x: feature_vector(&node, stats),
                truth: exact.true_rows(&node)?.max(1) as f64,
                baseline: baseline_rows(&node, stats).max(1.0),
            })
        })
        .collect()
}

fn mean_abs_log_ratio(pairs: impl Iterator<Item = (f64, f64)>) -> f64 {
    let (mut sum, mut n) = (0.0, 0usize);
    for (e, t) in pairs {
        sum += (e / t).ln().abs();
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Learning curves: every kind sees the same training stream (the full
/// query node of each item) and is scored on the same test queries every
/// `eval_every` observations and after the last one.
pub fn compare_learners(
    catalog: &Catalog,
    stats: &StatsCatalog,
    train: &[WorkloadItem],
    test: &[WorkloadItem],
    kinds: &[LearnerKind],
    base: &LearnerConfig,
    eval_every: usize,
) -> Result<Vec<CurvePoint>> {
    let train = samples(train, catalog, stats)?;
    let test = samples(test, catalog, stats)?;
    let checkpoints: Vec<usize> = (1..=train.len())
        .filter(|n| n % eval_every.max(1) == 0 || *n == train.len())
        .collect();

    let mut out = Vec::new();
    let baseline_error = mean_abs_log_ratio(test.iter().map(|s| (s.baseline, s.truth)));
    for &n in &checkpoints {
        out.push(CurvePoint {
            kind: "baseline".into(),
            observations: n,
            error: baseline_error,
        });
    }
    for &kind in kinds {
        let mut registry = LearnerRegistry::new(LearnerConfig { kind, ..*base });
        let mut next = checkpoints.iter().peekable();
        for (i, s) in train.iter().enumerate() {
            registry.observe(&s.key, s.x.coords(), s.truth.ln())?;
            if next.peek() == Some(&&(i + 1)) {
                next.next();
                let error = mean_abs_log_ratio(test.iter().map(|t| {
                    let e = registry
                        .predict(&t.key, t.x.coords())
                        .map(|y| y.exp().max(1.0))
                        .unwrap_or(t.baseline);
                    (e, t.truth)
                }));
                out.push(CurvePoint {
                    kind: kind.as_str().into(),
                    observations: i + 1,
                    error,
                });
            }
        }
    }
    Ok(out)
}

/// Last point of each series.
pub fn final_errors(curves: &[CurvePoint]) -> Vec<(String, f64)> {
    let mut out: Vec<(String, f64)> = Vec::new();
    for p in curves {
        match out.iter_mut().find(|(k, _)| *k == p.kind) {
            Some(slot) => slot.1 = p.error,
            None => out.push((p.kind.clone(), p.error)),
        }
    }
    out
}
