//! Fixed-memory k-nearest-neighbour regression.
//!
//! Prediction is the similarity-weighted mean of the targets of the `k`
//! most similar stored objects, with `sim(a, b) = 1 / (0.1 + |a - b|)`.
//!
//! The store never holds more than `capacity` objects. While below
//! capacity, a new object within `delta` of a stored one is blended into it
//! instead of being appended. At capacity, each new object triggers one
//! stochastic gradient step of `l = (ŷ - y)² / 2` with respect to the
//! coordinates and targets of the `k` neighbours used for `ŷ`, so stored
//! objects become virtual ones that summarise everything seen.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Offset in the similarity denominator; `sim(x, x) = 1 / SIM_OFFSET`.
pub const SIM_OFFSET: f64 = 0.1;

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "feature dimensions differ");
    a.iter()
        .zip(b)
        .map(|(p, q)| (p - q) * (p - q))
        .sum::<f64>()
        .sqrt()
}

/// `1 / (0.1 + |a - b|₂)`. Panics if the dimensions differ.
pub fn similarity(a: &[f64], b: &[f64]) -> f64 {
    1.0 / (SIM_OFFSET + distance(a, b))
}

/// Gradient of `similarity(stored, query)` with respect to `stored`.
/// Zero at `stored == query`, where the norm is not differentiable.
pub fn similarity_gradient(stored: &[f64], query: &[f64]) -> Vec<f64> {
    let d = distance(stored, query);
    if d == 0.0 {
        return vec![0.0; stored.len()];
    }
    let scale = -1.0 / ((SIM_OFFSET + d) * (SIM_OFFSET + d) * d);
    stored
        .iter()
        .zip(query)
        .map(|(s, q)| scale * (s - q))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingPoint {
    pub x: Vec<f64>,
    pub y: f64,
}

/// Indices of the `k` points nearest to `x`, nearest first; ties go to the
/// lower index.
pub(crate) fn nearest<'a, I>(points: I, x: &[f64], k: usize) -> Vec<(usize, f64)>
where
    I: Iterator<Item = &'a TrainingPoint>,
{
    let mut d: Vec<(usize, f64)> = points
        .enumerate()
        .map(|(i, p)| (i, distance(&p.x, x)))
        .collect();
    d.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    d.truncate(k);
    d
}

/// The weighted-mean prediction over the given neighbours.
pub(crate) fn weighted_mean(points: &[&TrainingPoint], x: &[f64]) -> Option<f64> {
    if points.is_empty() {
        return None;
    }
    let (mut num, mut den) = (0.0, 0.0);
    for p in points {
        let s = similarity(&p.x, x);
        num += p.y * s;
        den += s;
    }
    Some(num / den)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KnnParams {
    pub k: usize,
    pub capacity: usize,
    pub delta: f64,
    pub eta: f64,
}

impl Default for KnnParams {
    fn default() -> Self {
        Self {
            k: 3,
            capacity: 500,
            delta: 0.05,
            eta: 0.1,
        }
    }
}

impl KnnParams {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("learner.k must be at least 1".into()));
        }
        if self.capacity == 0 {
            return Err(Error::Config("learner.capacity must be at least 1".into()));
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(Error::Config(
                "learner.delta must be a finite value >= 0".into(),
            ));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::Config(
                "learner.eta must be a finite value > 0".into(),
            ));
        }
        Ok(())
    }
}

/// What an [`KnnStore::observe`] call did.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Update {
    Merged(usize),
    Appended,
    GradientStep,
}

/// Analytic gradient of the loss at one observation.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnGradient {
    pub neighbours: Vec<usize>,
    pub prediction: f64,
    pub d_y: Vec<f64>,
    pub d_x: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnStore {
    params: KnnParams,
    points: Vec<TrainingPoint>,
}

impl KnnStore {
    pub fn new(params: KnnParams) -> Self {
        Self {
            params,
            points: Vec::new(),
        }
    }

    pub fn params(&self) -> &KnnParams {
        &self.params
    }

    pub fn points(&self) -> &[TrainingPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.points.first().map(|p| p.x.len())
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        match self.dim() {
            Some(d) if d != x.len() => Err(Error::DimensionMismatch {
                expected: d,
                got: x.len(),
            }),
            _ => Ok(()),
        }
    }

    /// `None` when the store is empty (the caller falls back to the
    /// standard estimator) or the query has the wrong dimensionality.
    pub fn predict(&self, x: &[f64]) -> Option<f64> {
        if self.check_dim(x).is_err() {
            return None;
        }
        let nn = nearest(self.points.iter(), x, self.params.k);
        let refs: Vec<&TrainingPoint> = nn.iter().map(|&(i, _)| &self.points[i]).collect();
        weighted_mean(&refs, x)
    }

    /// Gradient of `(ŷ - y)² / 2` with respect to the neighbours' targets
    /// and coordinates, or `None` for an empty store.
    pub fn gradients(&self, x: &[f64], y: f64) -> Option<KnnGradient> {
        if self.check_dim(x).is_err() || self.points.is_empty() {
            return None;
        }
        let neighbours: Vec<usize> = nearest(self.points.iter(), x, self.params.k)
            .into_iter()
            .map(|(i, _)| i)
            .collect();
        let sims: Vec<f64> = neighbours
            .iter()
            .map(|&i| similarity(&self.points[i].x, x))
            .collect();
        let total: f64 = sims.iter().sum();
        let prediction = neighbours
            .iter()
            .zip(&sims)
            .map(|(&i, s)| self.points[i].y * s)
            .sum::<f64>()
            / total;
        let dl = prediction - y;
        let d_y = sims.iter().map(|s| dl * s / total).collect();
        let d_x = neighbours
            .iter()
            .map(|&i| {
                let p = &self.points[i];
                let coef = dl * (p.y - prediction) / total;
                similarity_gradient(&p.x, x)
                    .into_iter()
                    .map(|g| coef * g)
                    .collect()
            })
            .collect();
        Some(KnnGradient {
            neighbours,
            prediction,
            d_y,
            d_x,
        })
    }

    pub fn observe(&mut self, x: &[f64], y: f64) -> Result<Update> {
        self.check_dim(x)?;
        let KnnParams {
            capacity,
            delta,
            eta,
            ..
        } = self.params;

        if self.points.len() >= capacity {
            let g = self.gradients(x, y).expect("store at capacity is nonempty");
            for (j, &i) in g.neighbours.iter().enumerate() {
                let p = &mut self.points[i];
                p.y -= eta * g.d_y[j];
                for (xi, gi) in p.x.iter_mut().zip(&g.d_x[j]) {
                    *xi -= eta * gi;
                }
            }
            return Ok(Update::GradientStep);
        }

        // delta = 0 disables object filtering.
        if delta > 0.0 {
            let closest = self
                .points
                .iter()
                .enumerate()
                .map(|(i, p)| (i, distance(&p.x, x)))
                .filter(|&(_, d)| d <= delta)
                .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            if let Some((i, _)) = closest {
                let p = &mut self.points[i];
                for (xi, xn) in p.x.iter_mut().zip(x) {
                    *xi += eta * (xn - *xi);
                }
                p.y += eta * (y - p.y);
                return Ok(Update::Merged(i));
            }
        }

        self.points.push(TrainingPoint { x: x.to_vec(), y });
        Ok(Update::Appended)
    }
}
