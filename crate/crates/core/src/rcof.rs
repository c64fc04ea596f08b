//! Remote city opportunity factor.
//!
//! Each movement gets a weight in `[0, 1]` that grows as its city's social
//! progress index falls and as its population rises:
//!
//! ```text
//! rho_i = alpha_i       * (spi_max - spi_i + delta) / (sum_k (spi_max - spi_k) + delta)
//!       + (1 - alpha_i) * (pop_i - pop_min + delta) / (sum_k (pop_k - pop_min) + delta)
//! ```
//!
//! Sums run over movements, so a city served by `k` movements contributes `k`
//! terms. `spi_max` and `pop_min` are taken over the movements' cities.

use serde::Serialize;
use thiserror::Error;

use crate::model::{City, Movement};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RcofError {
    #[error("cannot compute rcof for an empty movement set")]
    NoMovements,
    #[error("movement {0} references unknown city index {1}")]
    UnknownCity(usize, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RcofVector(Vec<f64>);

impl RcofVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn get(&self, i: usize) -> f64 {
        self.0[i]
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub fn compute_rcof(
    movements: &[Movement],
    cities: &[City],
    delta: f64,
) -> Result<RcofVector, RcofError> {
    if movements.is_empty() {
        return Err(RcofError::NoMovements);
    }
    let mut served = Vec::with_capacity(movements.len());
    for m in movements {
        let city = cities
            .get(m.city)
            .ok_or(RcofError::UnknownCity(m.id, m.city))?;
        served.push((city.spi, city.population as f64));
    }

    let spi_max = served
        .iter()
        .map(|&(s, _)| s)
        .fold(f64::NEG_INFINITY, f64::max);
    let pop_min = served.iter().map(|&(_, p)| p).fold(f64::INFINITY, f64::min);
    let spi_gap_sum: f64 = served.iter().map(|&(s, _)| spi_max - s).sum();
    let pop_gap_sum: f64 = served.iter().map(|&(_, p)| p - pop_min).sum();

    let values = movements
        .iter()
        .zip(&served)
        .map(|(m, &(spi, pop))| {
            let spi_term = (spi_max - spi + delta) / (spi_gap_sum + delta);
            let pop_term = (pop - pop_min + delta) / (pop_gap_sum + delta);
            let rho = m.alpha * spi_term + (1.0 - m.alpha) * pop_term;
            rho.clamp(0.0, 1.0)
        })
        .collect();
    Ok(RcofVector(values))
}
