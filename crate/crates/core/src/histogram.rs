use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SUM_TOLERANCE: f64 = 1e-9;

/// Discrete distribution over bins `0..len`, with weights summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Histogram {
    weights: Vec<f64>,
}

impl Histogram {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidHistogram("no bins".into()));
        }
        if let Some((i, w)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !w.is_finite() || **w < 0.0)
        {
            return Err(Error::InvalidHistogram(format!("bin {i} has weight {w}")));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidHistogram(format!(
                "weights sum to {sum}, expected 1"
            )));
        }
        Ok(Histogram { weights })
    }

    /// All mass on `bin`, over `len` bins.
    pub fn point_mass(bin: usize, len: usize) -> Self {
        assert!(bin < len, "point mass outside histogram");
        let mut weights = vec![0.0; len];
        weights[bin] = 1.0;
        Histogram { weights }
    }

    pub fn uniform(len: usize) -> Self {
        assert!(len > 0);
        Histogram {
            weights: vec![1.0 / len as f64; len],
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.weights
            .iter()
            .enumerate()
            .map(|(i, w)| i as f64 * w)
            .sum()
    }

    pub fn sampler(&self) -> HistogramSampler {
        HistogramSampler {
            inner: WeightedIndex::new(&self.weights).expect("validated weights"),
        }
    }
}

impl TryFrom<Vec<f64>> for Histogram {
    type Error = Error;

    fn try_from(weights: Vec<f64>) -> Result<Self> {
        Histogram::new(weights)
    }
}

impl From<Histogram> for Vec<f64> {
    fn from(h: Histogram) -> Self {
        h.weights
    }
}

#[derive(Debug, Clone)]
pub struct HistogramSampler {
    inner: WeightedIndex<f64>,
}

impl HistogramSampler {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.inner.sample(rng)
    }
}
