//! Empirical valuation distributions and sampling from them.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::rng::SeededRng;
use crate::model::ValuationMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lower: f64,
    pub upper: f64,
    pub frequency: f64,
}

/// Per-slot valuation histogram in INR.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ValuationHistogram {
    pub bins: Vec<HistogramBin>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HistogramError {
    #[error("empty histogram for slot {0}")]
    Empty(usize),
    #[error("slot {slot}, bin {bin}: bounds must be finite, non-negative and lower <= upper")]
    Bounds { slot: usize, bin: usize },
    #[error("slot {slot}, bin {bin}: bins must be ascending and non-overlapping")]
    Overlap { slot: usize, bin: usize },
    #[error("slot {slot}, bin {bin}: frequency must be finite and non-negative")]
    Frequency { slot: usize, bin: usize },
    #[error("slot {0}: frequencies sum to zero")]
    ZeroMass(usize),
}

impl ValuationHistogram {
    pub fn new(bins: Vec<HistogramBin>) -> Self {
        Self { bins }
    }

    /// Checks the invariants; `slot` only labels errors.
    pub fn validate(&self, slot: usize) -> Result<(), HistogramError> {
        if self.bins.is_empty() {
            return Err(HistogramError::Empty(slot));
        }
        let mut mass = 0.0;
        for (bin, b) in self.bins.iter().enumerate() {
            if !(b.lower.is_finite() && b.upper.is_finite() && b.lower >= 0.0 && b.lower <= b.upper)
            {
                return Err(HistogramError::Bounds { slot, bin });
            }
            if !(b.frequency.is_finite() && b.frequency >= 0.0) {
                return Err(HistogramError::Frequency { slot, bin });
            }
            // Touching bins share an endpoint; a degenerate bin may sit on it.
            if bin > 0 && b.lower < self.bins[bin - 1].upper {
                return Err(HistogramError::Overlap { slot, bin });
            }
            mass += b.frequency;
        }
        if mass <= 0.0 {
            return Err(HistogramError::ZeroMass(slot));
        }
        Ok(())
    }

    fn draw(&self, rng: &mut SeededRng) -> f64 {
        let weights: Vec<f64> = self.bins.iter().map(|b| b.frequency).collect();
        let b = self.bins[rng.weighted(&weights)];
        rng.range(b.lower, b.upper)
    }

    pub fn mean(&self) -> f64 {
        let mass: f64 = self.bins.iter().map(|b| b.frequency).sum();
        self.bins
            .iter()
            .map(|b| b.frequency * (b.lower + b.upper) / 2.0)
            .sum::<f64>()
            / mass
    }
}

/// Draws an `m x histograms.len()` matrix, row by row: for each movement, for
/// each slot, one bin by frequency and then a uniform value inside it.
pub fn sample_valuations(
    histograms: &[ValuationHistogram],
    m: usize,
    seed: u64,
) -> Result<ValuationMatrix, HistogramError> {
    for (j, h) in histograms.iter().enumerate() {
        h.validate(j)?;
    }
    let n = histograms.len();
    let mut rng = SeededRng::new(seed);
    let mut out = ValuationMatrix::zeros(m, n);
    for i in 0..m {
        for (j, h) in histograms.iter().enumerate() {
            out.set(i, j, h.draw(&mut rng));
        }
    }
    Ok(out)
}
