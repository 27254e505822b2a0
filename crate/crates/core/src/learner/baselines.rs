//! Reference regressors the fixed-memory store is compared against.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::knn::{nearest, weighted_mean, TrainingPoint};
use crate::error::{Error, Result};

fn check_dim(expected: Option<usize>, x: &[f64]) -> Result<()> {
    match expected {
        Some(d) if d != x.len() => Err(Error::DimensionMismatch {
            expected: d,
            got: x.len(),
        }),
        _ => Ok(()),
    }
}

/// Keeps every observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlainKnn {
    k: usize,
    points: Vec<TrainingPoint>,
}

impl PlainKnn {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            points: Vec::new(),
        }
    }

    pub fn points(&self) -> &[TrainingPoint] {
        &self.points
    }

    pub fn predict(&self, x: &[f64]) -> Option<f64> {
        check_dim(self.points.first().map(|p| p.x.len()), x).ok()?;
        let nn = nearest(self.points.iter(), x, self.k);
        let refs: Vec<&TrainingPoint> = nn.iter().map(|&(i, _)| &self.points[i]).collect();
        weighted_mean(&refs, x)
    }

    pub fn observe(&mut self, x: &[f64], y: f64) -> Result<()> {
        check_dim(self.points.first().map(|p| p.x.len()), x)?;
        self.points.push(TrainingPoint { x: x.to_vec(), y });
        Ok(())
    }
}

/// Keeps only the most recent `capacity` observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LastKKnn {
    k: usize,
    capacity: usize,
    points: VecDeque<TrainingPoint>,
}

impl LastKKnn {
    pub fn new(k: usize, capacity: usize) -> Self {
        Self {
            k,
            capacity,
            points: VecDeque::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn predict(&self, x: &[f64]) -> Option<f64> {
        check_dim(self.points.front().map(|p| p.x.len()), x).ok()?;
        let nn = nearest(self.points.iter(), x, self.k);
        let refs: Vec<&TrainingPoint> = nn.iter().map(|&(i, _)| &self.points[i]).collect();
        weighted_mean(&refs, x)
    }

    pub fn observe(&mut self, x: &[f64], y: f64) -> Result<()> {
        check_dim(self.points.front().map(|p| p.x.len()), x)?;
        self.points.push_back(TrainingPoint { x: x.to_vec(), y });
        while self.points.len() > self.capacity {
            self.points.pop_front();
        }
        Ok(())
    }
}

/// Linear model `w·x + b` fitted online: each observation gets a fixed
/// number of gradient steps on `(ŷ - y)² / 2` for that object alone.
///
/// The step size is `min(eta, 1 / (1 + |x|²))`, which keeps a single step
/// from overshooting the target on large-norm inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSgd {
    eta: f64,
    iterations: usize,
    weights: Option<Vec<f64>>,
    bias: f64,
}

impl LinearSgd {
    pub fn new(eta: f64, iterations: usize) -> Self {
        Self {
            eta,
            iterations,
            weights: None,
            bias: 0.0,
        }
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    fn raw(&self, w: &[f64], x: &[f64]) -> f64 {
        w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + self.bias
    }

    /// Denied until the first observation.
    pub fn predict(&self, x: &[f64]) -> Option<f64> {
        let w = self.weights.as_ref()?;
        (w.len() == x.len()).then(|| self.raw(w, x))
    }

    pub fn observe(&mut self, x: &[f64], y: f64) -> Result<()> {
        check_dim(self.weights.as_ref().map(Vec::len), x)?;
        let mut w = self.weights.take().unwrap_or_else(|| vec![0.0; x.len()]);
        let norm2: f64 = x.iter().map(|v| v * v).sum();
        let step = self.eta.min(1.0 / (1.0 + norm2));
        for _ in 0..self.iterations {
            let g = self.raw(&w, x) - y;
            for (wi, xi) in w.iter_mut().zip(x) {
                *wi -= step * g * xi;
            }
            self.bias -= step * g;
        }
        self.weights = Some(w);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learner::knn::{KnnParams, KnnStore};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn last_k_evicts_oldest() {
        let mut l = LastKKnn::new(3, 2);
        l.observe(&[0.0], 1.0).unwrap();
        l.observe(&[1.0], 2.0).unwrap();
        l.observe(&[2.0], 3.0).unwrap();
        assert_eq!(l.len(), 2);
        assert_eq!(l.points.front().unwrap().y, 2.0);
    }

    /// Closed-form ordinary least squares for `y = a*x + b`.
    fn ols(xs: &[f64], ys: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        let a = sxy / sxx;
        (a, my - a * mx)
    }

    #[test]
    fn linear_recovers_slope() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let xs: Vec<f64> = (0..200).map(|_| rng.gen_range(-3.0..0.0)).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x).collect();
        let (slope, _) = ols(&xs, &ys);
        let mut m = LinearSgd::new(0.05, 10);
        for (x, y) in xs.iter().zip(&ys) {
            m.observe(&[*x], *y).unwrap();
        }
        let w = m.weights().unwrap()[0];
        assert!((w - slope).abs() < 0.1, "sgd slope {w}, ols slope {slope}");
        assert!((w - 2.0).abs() < 0.1);
    }

    #[test]
    fn linear_denies_before_data_and_checks_dim() {
        let mut m = LinearSgd::new(0.05, 10);
        assert_eq!(m.predict(&[1.0]), None);
        m.observe(&[1.0, 2.0], 1.0).unwrap();
        assert!(m.observe(&[1.0], 1.0).is_err());
    }

    #[test]
    fn linear_stays_finite_on_extreme_features() {
        let mut m = LinearSgd::new(0.05, 10);
        for i in 0..100 {
            let x = if i % 2 == 0 { -20.7 } else { -0.1 };
            m.observe(&[x, x], 5.0).unwrap();
        }
        assert!(m.predict(&[-20.7, -20.7]).unwrap().is_finite());
    }

    #[test]
    fn plain_matches_fixed_memory_below_capacity() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let params = KnnParams {
            k: 3,
            capacity: 50,
            delta: 0.0,
            eta: 0.1,
        };
        let mut fixed = KnnStore::new(params);
        let mut plain = PlainKnn::new(3);
        for _ in 0..50 {
            // Repeated coordinates on purpose: with delta = 0 they are not merged.
            let x = vec![rng.gen_range(0..5) as f64 * -0.5, rng.gen_range(-2.0..0.0)];
            let y = rng.gen_range(0.0..8.0);
            fixed.observe(&x, y).unwrap();
            plain.observe(&x, y).unwrap();
            assert_eq!(fixed.points(), plain.points());
            let q = vec![rng.gen_range(-2.0..0.0), rng.gen_range(-2.0..0.0)];
            assert_eq!(fixed.predict(&q), plain.predict(&q));
        }
    }
}
