use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learner::LearnerRegistry;
use crate::plan::{feature_vector, LogicalNode};
use crate::stats::StatsCatalog;

/// Selectivity assumed for a column-column comparison other than equality.
pub const THETA_SELECTIVITY: f64 = 1.0 / 3.0;

/// Anything that can put a row count on a logical node.
pub trait CardinalityEstimator {
    /// Estimated output rows, at least 1.
    fn estimate(&self, node: &LogicalNode) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorMode {
    Baseline,
    Adaptive,
}

impl EstimatorMode {
    pub fn as_str(self) -> &'static str {
        match self {
            EstimatorMode::Baseline => "baseline",
            EstimatorMode::Adaptive => "adaptive",
        }
    }
}

impl fmt::Display for EstimatorMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EstimatorMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(EstimatorMode::Baseline),
            "adaptive" => Ok(EstimatorMode::Adaptive),
            _ => Err(Error::Config(format!(
                "unknown mode `{s}` (expected baseline or adaptive)"
            ))),
        }
    }
}

/// The standard estimator: base-table sizes times clause selectivities,
/// assuming independence. Each equality class contributes
/// `1 / max(n_distinct)` per adjacent pair of members, each theta clause
/// [`THETA_SELECTIVITY`]. Not clamped.
pub fn baseline_rows(node: &LogicalNode, stats: &StatsCatalog) -> f64 {
    let mut rows: f64 = node
        .relations()
        .iter()
        .map(|r| stats.row_count(r).unwrap_or(0) as f64)
        .product();
    for f in node.filters() {
        rows *= stats.selectivity_or_one(f).value();
    }
    for class in node.equalities() {
        for w in class.members().windows(2) {
            let nd = |c| stats.column(c).map_or(1, |s| s.n_distinct).max(1);
            rows /= nd(&w[0]).max(nd(&w[1])) as f64;
        }
    }
    rows * THETA_SELECTIVITY.powi(node.theta().len() as i32)
}

/// Where an estimate came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    /// Final clamped estimate.
    pub rows: f64,
    /// Clamped standard estimate, computed regardless of mode.
    pub baseline: f64,
    pub learned: bool,
}

/// Baseline or adaptive estimation. Adaptive mode asks the learner for
/// `ln(rows)` and falls back to the baseline when it denies.
#[derive(Clone, Copy)]
pub struct EstimatorPlugin<'a> {
    mode: EstimatorMode,
    stats: &'a StatsCatalog,
    learners: Option<&'a LearnerRegistry>,
}

impl<'a> EstimatorPlugin<'a> {
    pub fn baseline(stats: &'a StatsCatalog) -> Self {
        Self {
            mode: EstimatorMode::Baseline,
            stats,
            learners: None,
        }
    }

    pub fn adaptive(stats: &'a StatsCatalog, learners: &'a LearnerRegistry) -> Self {
        Self {
            mode: EstimatorMode::Adaptive,
            stats,
            learners: Some(learners),
        }
    }

    pub fn new(
        mode: EstimatorMode,
        stats: &'a StatsCatalog,
        learners: &'a LearnerRegistry,
    ) -> Self {
        match mode {
            EstimatorMode::Baseline => Self::baseline(stats),
            EstimatorMode::Adaptive => Self::adaptive(stats, learners),
        }
    }

    pub fn mode(&self) -> EstimatorMode {
        self.mode
    }

    pub fn stats(&self) -> &'a StatsCatalog {
        self.stats
    }

    pub fn estimate_detailed(&self, node: &LogicalNode) -> Estimate {
        let baseline = baseline_rows(node, self.stats).max(1.0);
        let learned = self.learners.and_then(|reg| {
            let x = feature_vector(node, self.stats);
            reg.predict(&node.feature_space_key(), x.coords())
                .map(f64::exp)
                .filter(|v| !v.is_nan())
        });
        match learned {
            Some(v) => Estimate {
                rows: v.max(1.0),
                baseline,
                learned: true,
            },
            None => Estimate {
                rows: baseline,
                baseline,
                learned: false,
            },
        }
    }
}

impl CardinalityEstimator for EstimatorPlugin<'_> {
    fn estimate(&self, node: &LogicalNode) -> f64 {
        self.estimate_detailed(node).rows
    }
}

impl<F: Fn(&LogicalNode) -> f64> CardinalityEstimator for F {
    fn estimate(&self, node: &LogicalNode) -> f64 {
        self(node).max(1.0)
    }
}
