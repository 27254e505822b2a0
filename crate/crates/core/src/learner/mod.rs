//! Per-feature-space online regressors of `ln(cardinality)`.
//!
//! Every feature space (see [`crate::plan::FeatureSpaceKey`]) gets its own
//! learner instance, all of one [`LearnerKind`]. A learner with no data in a
//! space denies the prediction and the optimizer falls back to the
//! standard estimator.

mod baselines;
mod knn;

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use baselines::{LastKKnn, LinearSgd, PlainKnn};
pub use knn::{
    distance, similarity, similarity_gradient, KnnGradient, KnnParams, KnnStore, TrainingPoint,
    Update, SIM_OFFSET,
};

use crate::error::{Error, Result};
use crate::plan::FeatureSpaceKey;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LearnerKind {
    Fixed,
    Plain,
    LastK,
    Linear,
}

impl LearnerKind {
    pub const ALL: [LearnerKind; 4] = [
        LearnerKind::Fixed,
        LearnerKind::Plain,
        LearnerKind::LastK,
        LearnerKind::Linear,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            LearnerKind::Fixed => "fixed",
            LearnerKind::Plain => "plain",
            LearnerKind::LastK => "lastk",
            LearnerKind::Linear => "linear",
        }
    }
}

impl fmt::Display for LearnerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LearnerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed" => Ok(LearnerKind::Fixed),
            "plain" => Ok(LearnerKind::Plain),
            "lastk" => Ok(LearnerKind::LastK),
            "linear" => Ok(LearnerKind::Linear),
            _ => Err(Error::Config(format!(
                "unknown learner `{s}` (expected fixed, plain, lastk or linear)"
            ))),
        }
    }
}

/// Learner parameters. `k` and `capacity` default to 3 and 500; `delta`
/// and `eta` have no published values and default to 0.05 and 0.1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    pub kind: LearnerKind,
    pub knn: KnnParams,
    pub linear_eta: f64,
    pub linear_iterations: usize,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            kind: LearnerKind::Fixed,
            knn: KnnParams::default(),
            linear_eta: 0.05,
            linear_iterations: 10,
        }
    }
}

impl LearnerConfig {
    pub fn with_kind(kind: LearnerKind) -> Self {
        Self {
            kind,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.knn.validate()?;
        if !(self.linear_eta > 0.0 && self.linear_eta.is_finite()) {
            return Err(Error::Config("learner.linear_eta must be > 0".into()));
        }
        if self.linear_iterations == 0 {
            return Err(Error::Config(
                "learner.linear_iterations must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "state", rename_all = "lowercase")]
pub enum Learner {
    Fixed(KnnStore),
    Plain(PlainKnn),
    #[serde(rename = "lastk")]
    LastK(LastKKnn),
    Linear(LinearSgd),
}

impl Learner {
    pub fn new(config: &LearnerConfig) -> Self {
        let p = config.knn;
        match config.kind {
            LearnerKind::Fixed => Learner::Fixed(KnnStore::new(p)),
            LearnerKind::Plain => Learner::Plain(PlainKnn::new(p.k)),
            LearnerKind::LastK => Learner::LastK(LastKKnn::new(p.k, p.capacity)),
            LearnerKind::Linear => {
                Learner::Linear(LinearSgd::new(config.linear_eta, config.linear_iterations))
            }
        }
    }

    pub fn predict(&self, x: &[f64]) -> Option<f64> {
        match self {
            Learner::Fixed(s) => s.predict(x),
            Learner::Plain(s) => s.predict(x),
            Learner::LastK(s) => s.predict(x),
            Learner::Linear(s) => s.predict(x),
        }
    }

    pub fn observe(&mut self, x: &[f64], y: f64) -> Result<()> {
        match self {
            Learner::Fixed(s) => s.observe(x, y).map(|_| ()),
            Learner::Plain(s) => s.observe(x, y),
            Learner::LastK(s) => s.observe(x, y),
            Learner::Linear(s) => s.observe(x, y),
        }
    }
}

/// One learner per feature space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerRegistry {
    config: LearnerConfig,
    spaces: BTreeMap<FeatureSpaceKey, Learner>,
    observations: u64,
}

pub const SNAPSHOT_FORMAT: &str = "acard-learner-snapshot";
pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct SnapshotFile {
    format: String,
    version: u32,
    iterations_completed: usize,
    registry: LearnerRegistry,
}

impl LearnerRegistry {
    pub fn new(config: LearnerConfig) -> Self {
        Self {
            config,
            spaces: BTreeMap::new(),
            observations: 0,
        }
    }

    pub fn config(&self) -> &LearnerConfig {
        &self.config
    }

    pub fn space_count(&self) -> usize {
        self.spaces.len()
    }

    pub fn observations(&self) -> u64 {
        self.observations
    }

    pub fn learner(&self, key: &FeatureSpaceKey) -> Option<&Learner> {
        self.spaces.get(key)
    }

    /// `None` when the space has never been observed.
    pub fn predict(&self, key: &FeatureSpaceKey, x: &[f64]) -> Option<f64> {
        self.spaces.get(key)?.predict(x)
    }

    pub fn observe(&mut self, key: &FeatureSpaceKey, x: &[f64], y: f64) -> Result<()> {
        let config = self.config;
        self.spaces
            .entry(key.clone())
            .or_insert_with(|| Learner::new(&config))
            .observe(x, y)?;
        self.observations += 1;
        Ok(())
    }

    /// Writes a versioned JSON snapshot. Floats round-trip exactly.
    pub fn write_snapshot<W: Write>(&self, out: W, iterations_completed: usize) -> Result<()> {
        let file = SnapshotFile {
            format: SNAPSHOT_FORMAT.to_string(),
            version: SNAPSHOT_VERSION,
            iterations_completed,
            registry: self.clone(),
        };
        serde_json::to_writer_pretty(out, &file).map_err(|e| Error::Snapshot(e.to_string()))
    }

    /// Returns the registry and the number of iterations it has seen.
    pub fn read_snapshot<R: Read>(input: R) -> Result<(Self, usize)> {
        let file: SnapshotFile =
            serde_json::from_reader(input).map_err(|e| Error::Snapshot(e.to_string()))?;
        if file.format != SNAPSHOT_FORMAT {
            return Err(Error::Snapshot(format!(
                "unexpected format `{}`",
                file.format
            )));
        }
        if file.version != SNAPSHOT_VERSION {
            return Err(Error::Snapshot(format!(
                "unsupported version {}",
                file.version
            )));
        }
        Ok((file.registry, file.iterations_completed))
    }
}
