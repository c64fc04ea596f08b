//! Domain types, instance validation and fixed-point scaling.
//!
//! A [`RawInstance`] is what a loader (or a test) produces: labels instead of
//! indices, unchecked numbers. [`validate_instance`] cross-checks it, assigns
//! dense 0-based indices in input order, computes slot thresholds and the
//! remoteness weights, and freezes the integer weights every solver works on.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rcof::{compute_rcof, RcofVector};

/// Default fixed-point multiplier applied to `rho * v` and `g`.
pub const DEFAULT_SCALE: u64 = 1_000_000;

/// Largest scaled edge weight accepted. Keeps every weight exactly
/// representable as an `f64` and every objective sum inside `i64`.
pub const MAX_SCALED_WEIGHT: i64 = 1 << 53;

const MAX_SCALED_TOTAL: i128 = 1 << 62;

/// Tolerance added before flooring `(1 - lambda) * C` so that products such as
/// `0.1 * 10` land on the integer they denote.
const THRESHOLD_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CityClass {
    Metro,
    Capital,
    Remote,
}

impl CityClass {
    pub const ALL: [CityClass; 3] = [CityClass::Metro, CityClass::Capital, CityClass::Remote];

    pub fn as_str(self) -> &'static str {
        match self {
            CityClass::Metro => "metro",
            CityClass::Capital => "capital",
            CityClass::Remote => "remote",
        }
    }
}

impl fmt::Display for CityClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for CityClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "metro" => Ok(CityClass::Metro),
            "capital" => Ok(CityClass::Capital),
            "remote" => Ok(CityClass::Remote),
            other => Err(format!(
                "unknown city class '{other}' (expected metro, capital or remote)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MechanismParams {
    /// Fraction of each slot's capacity that is congestion-prone.
    pub lambda: f64,
    /// Congestion cost per movement above the threshold, in currency units.
    pub g: f64,
    pub delta: f64,
    /// Weight on the SPI term for movements without an explicit alpha.
    pub default_alpha: f64,
    pub scale: u64,
}

impl Default for MechanismParams {
    fn default() -> Self {
        Self {
            lambda: 0.2,
            g: 15_000.0,
            delta: 1e-6,
            default_alpha: 0.5,
            scale: DEFAULT_SCALE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawSlot {
    pub label: String,
    pub capacity: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawCity {
    pub label: String,
    pub name: String,
    pub spi: f64,
    pub population: i64,
    pub class: CityClass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawMovement {
    pub label: String,
    pub airline: String,
    pub city: String,
    pub requested_slot: String,
    pub alpha: Option<f64>,
}

/// Unvalidated instance data, referencing cities and slots by label.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RawInstance {
    pub slots: Vec<RawSlot>,
    pub cities: Vec<RawCity>,
    pub movements: Vec<RawMovement>,
    /// One row per movement, one column per slot.
    pub valuations: Vec<Vec<f64>>,
    pub params: MechanismParams,
    /// Explicit remoteness weights; computed from the city data when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rcof: Option<Vec<f64>>,
}

impl RawInstance {
    pub fn new(params: MechanismParams) -> Self {
        Self {
            params,
            ..Self::default()
        }
    }

    pub fn slot(mut self, label: impl Into<String>, capacity: i64) -> Self {
        self.slots.push(RawSlot {
            label: label.into(),
            capacity,
        });
        self
    }

    pub fn city(
        mut self,
        label: impl Into<String>,
        spi: f64,
        population: i64,
        class: CityClass,
    ) -> Self {
        let label = label.into();
        self.cities.push(RawCity {
            name: label.clone(),
            label,
            spi,
            population,
            class,
        });
        self
    }

    /// Adds a movement together with its valuation row.
    pub fn movement(
        mut self,
        label: impl Into<String>,
        city: impl Into<String>,
        requested_slot: impl Into<String>,
        valuations: Vec<f64>,
    ) -> Self {
        self.movements.push(RawMovement {
            label: label.into(),
            airline: String::new(),
            city: city.into(),
            requested_slot: requested_slot.into(),
            alpha: None,
        });
        self.valuations.push(valuations);
        self
    }

    pub fn with_rcof(mut self, rcof: Vec<f64>) -> Self {
        self.rcof = Some(rcof);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Slot {
    pub id: usize,
    pub label: String,
    pub capacity: u32,
    /// Congestion-free capacity `floor((1 - lambda) * capacity)`.
    pub threshold: u32,
}

impl Slot {
    /// Degree bound of the slot's congestion dummy node.
    pub fn congestion_prone(&self) -> u32 {
        self.capacity - self.threshold
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct City {
    pub id: usize,
    pub label: String,
    pub name: String,
    pub spi: f64,
    pub population: u64,
    pub class: CityClass,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Movement {
    pub id: usize,
    pub label: String,
    pub airline: String,
    pub city: usize,
    pub requested_slot: usize,
    pub alpha: f64,
    /// Whether `alpha` came from the input rather than the default.
    pub alpha_explicit: bool,
}

/// Dense movements x slots matrix of non-negative valuations.
#[derive(Debug, Clone, PartialEq)]
pub struct ValuationMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl ValuationMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>], cols: usize) -> Option<Self> {
        if rows.iter().any(|r| r.len() != cols) {
            return None;
        }
        Some(Self {
            rows: rows.len(),
            cols,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValidationError {
    #[error("lambda outside [0,1]: {0}")]
    Lambda(f64),
    #[error("congestion cost g must be finite and non-negative: {0}")]
    CongestionCost(f64),
    #[error("delta must be finite and positive: {0}")]
    Delta(f64),
    #[error("default_alpha outside [0,1]: {0}")]
    DefaultAlpha(f64),
    #[error("scale must be at least 1")]
    Scale,
    #[error("slot '{label}': capacity must be at least 1, got {capacity}")]
    Capacity { label: String, capacity: i64 },
    #[error("duplicate {kind} id '{label}'")]
    Duplicate { kind: &'static str, label: String },
    #[error("city '{label}': spi must be finite and within [0,100], got {spi}")]
    Spi { label: String, spi: f64 },
    #[error("city '{label}': population must be at least 1, got {population}")]
    Population { label: String, population: i64 },
    #[error("movement '{movement}': dangling city reference '{city}'")]
    DanglingCity { movement: String, city: String },
    #[error("movement '{movement}': dangling slot reference '{slot}'")]
    DanglingSlot { movement: String, slot: String },
    #[error("movement '{movement}': alpha outside [0,1]: {alpha}")]
    Alpha { movement: String, alpha: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("negative valuation at ({0},{1})")]
    NegativeValuation(usize, usize),
    #[error("non-finite valuation at ({0},{1})")]
    NonFiniteValuation(usize, usize),
    #[error("rcof of movement {0} outside [0,1]: {1}")]
    Rcof(usize, f64),
    #[error("rcof: {0}")]
    RcofComputation(String),
    #[error("scaled weight at ({0},{1}) exceeds 2^53; lower the scale")]
    WeightOverflow(usize, usize),
    #[error("scaled objective may overflow 64-bit arithmetic; lower the scale")]
    TotalOverflow,
}

/// Every invariant violation found in one validation pass.
#[derive(Debug, Clone, PartialEq, Error)]
pub struct ValidationErrors(pub Vec<ValidationError>);

impl fmt::Display for ValidationErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, e) in self.0.iter().enumerate() {
            if k > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl ValidationErrors {
    pub fn errors(&self) -> &[ValidationError] {
        &self.0
    }
}

/// A validated, immutable problem instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    slots: Vec<Slot>,
    movements: Vec<Movement>,
    cities: Vec<City>,
    valuations: ValuationMatrix,
    params: MechanismParams,
    rcof: RcofVector,
    rcof_explicit: bool,
    scaled_weights: Vec<i64>,
    scaled_g: i64,
}

impl Instance {
    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn movements(&self) -> &[Movement] {
        &self.movements
    }

    pub fn cities(&self) -> &[City] {
        &self.cities
    }

    pub fn valuations(&self) -> &ValuationMatrix {
        &self.valuations
    }

    pub fn params(&self) -> &MechanismParams {
        &self.params
    }

    pub fn rcof(&self) -> &RcofVector {
        &self.rcof
    }

    pub fn num_movements(&self) -> usize {
        self.movements.len()
    }

    pub fn num_slots(&self) -> usize {
        self.slots.len()
    }

    pub fn scale(&self) -> u64 {
        self.params.scale
    }

    /// `round(scale * rho_i * v_ij)`.
    pub fn scaled_weight(&self, i: usize, j: usize) -> i64 {
        self.scaled_weights[i * self.slots.len() + j]
    }

    pub fn scaled_weight_row(&self, i: usize) -> &[i64] {
        let n = self.slots.len();
        &self.scaled_weights[i * n..(i + 1) * n]
    }

    /// `round(scale * g)`.
    pub fn scaled_g(&self) -> i64 {
        self.scaled_g
    }

    pub fn city_of(&self, i: usize) -> &City {
        &self.cities[self.movements[i].city]
    }

    /// Converts back to the unvalidated form, preserving labels and order.
    pub fn to_raw(&self) -> RawInstance {
        RawInstance {
            slots: self
                .slots
                .iter()
                .map(|s| RawSlot {
                    label: s.label.clone(),
                    capacity: i64::from(s.capacity),
                })
                .collect(),
            cities: self
                .cities
                .iter()
                .map(|c| RawCity {
                    label: c.label.clone(),
                    name: c.name.clone(),
                    spi: c.spi,
                    population: c.population as i64,
                    class: c.class,
                })
                .collect(),
            movements: self
                .movements
                .iter()
                .map(|m| RawMovement {
                    label: m.label.clone(),
                    airline: m.airline.clone(),
                    city: self.cities[m.city].label.clone(),
                    requested_slot: self.slots[m.requested_slot].label.clone(),
                    alpha: m.alpha_explicit.then_some(m.alpha),
                })
                .collect(),
            valuations: self.valuations.to_rows(),
            params: self.params.clone(),
            rcof: self.rcof_explicit.then(|| self.rcof.values().to_vec()),
        }
    }

    /// Same instance under a different congestion cost.
    pub fn with_g(&self, g: f64) -> Result<Instance, ValidationErrors> {
        let mut raw = self.to_raw();
        raw.params.g = g;
        validate_instance(&raw)
    }

    /// Same instance with movement `i` reporting `row` instead of its
    /// valuations. Remoteness weights are held fixed.
    pub fn with_reported_valuations(
        &self,
        i: usize,
        row: &[f64],
    ) -> Result<Instance, ValidationErrors> {
        let mut raw = self.to_raw();
        raw.rcof = Some(self.rcof.values().to_vec());
        raw.valuations[i] = row.to_vec();
        let mut inst = validate_instance(&raw)?;
        inst.rcof_explicit = self.rcof_explicit;
        Ok(inst)
    }

    /// The instance with movement `i` deleted. The remaining movements keep
    /// the weights they had in the full instance.
    pub fn without_movement(&self, i: usize) -> Result<Instance, ValidationErrors> {
        let mut raw = self.to_raw();
        let mut rcof = self.rcof.values().to_vec();
        rcof.remove(i);
        raw.movements.remove(i);
        raw.valuations.remove(i);
        raw.rcof = Some(rcof);
        validate_instance(&raw)
    }
}

/// `floor((1 - lambda) * capacity)`, clamped to `[0, capacity]`.
pub fn threshold_for(capacity: u32, lambda: f64) -> u32 {
    let t = ((1.0 - lambda) * f64::from(capacity) + THRESHOLD_EPS).floor();
    (t.max(0.0) as u32).min(capacity)
}

/// Round `scale * rho * v` to the nearest integer.
pub fn scale_weight(scale: u64, rho: f64, v: f64) -> f64 {
    (scale as f64 * rho * v).round()
}

fn check_unique<'a>(
    kind: &'static str,
    labels: impl Iterator<Item = &'a str>,
    errors: &mut Vec<ValidationError>,
) -> HashMap<&'a str, usize> {
    let mut index = HashMap::new();
    for (k, label) in labels.enumerate() {
        if index.insert(label, k).is_some() {
            errors.push(ValidationError::Duplicate {
                kind,
                label: label.to_string(),
            });
        }
    }
    index
}

/// Cross-checks raw data and builds an [`Instance`], or reports every
/// violated invariant.
pub fn validate_instance(raw: &RawInstance) -> Result<Instance, ValidationErrors> {
    let mut errors = Vec::new();
    let p = &raw.params;
    if !(0.0..=1.0).contains(&p.lambda) {
        errors.push(ValidationError::Lambda(p.lambda));
    }
    if !p.g.is_finite() || p.g < 0.0 {
        errors.push(ValidationError::CongestionCost(p.g));
    }
    if !p.delta.is_finite() || p.delta <= 0.0 {
        errors.push(ValidationError::Delta(p.delta));
    }
    if !(0.0..=1.0).contains(&p.default_alpha) {
        errors.push(ValidationError::DefaultAlpha(p.default_alpha));
    }
    if p.scale == 0 {
        errors.push(ValidationError::Scale);
    }

    for s in &raw.slots {
        if s.capacity < 1 || s.capacity > i64::from(u32::MAX) {
            errors.push(ValidationError::Capacity {
                label: s.label.clone(),
                capacity: s.capacity,
            });
        }
    }
    for c in &raw.cities {
        if !c.spi.is_finite() || !(0.0..=100.0).contains(&c.spi) {
            errors.push(ValidationError::Spi {
                label: c.label.clone(),
                spi: c.spi,
            });
        }
        if c.population < 1 {
            errors.push(ValidationError::Population {
                label: c.label.clone(),
                population: c.population,
            });
        }
    }
    let slot_index = check_unique(
        "slot",
        raw.slots.iter().map(|s| s.label.as_str()),
        &mut errors,
    );
    let city_index = check_unique(
        "city",
        raw.cities.iter().map(|c| c.label.as_str()),
        &mut errors,
    );
    check_unique(
        "movement",
        raw.movements.iter().map(|m| m.label.as_str()),
        &mut errors,
    );

    let mut movements = Vec::with_capacity(raw.movements.len());
    for (id, m) in raw.movements.iter().enumerate() {
        let city = city_index.get(m.city.as_str()).copied();
        if city.is_none() {
            errors.push(ValidationError::DanglingCity {
                movement: m.label.clone(),
                city: m.city.clone(),
            });
        }
        let requested = slot_index.get(m.requested_slot.as_str()).copied();
        if requested.is_none() {
            errors.push(ValidationError::DanglingSlot {
                movement: m.label.clone(),
                slot: m.requested_slot.clone(),
            });
        }
        if let Some(a) = m.alpha {
            if !(0.0..=1.0).contains(&a) {
                errors.push(ValidationError::Alpha {
                    movement: m.label.clone(),
                    alpha: a,
                });
            }
        }
        movements.push(Movement {
            id,
            label: m.label.clone(),
            airline: m.airline.clone(),
            city: city.unwrap_or(0),
            requested_slot: requested.unwrap_or(0),
            alpha: m.alpha.unwrap_or(p.default_alpha),
            alpha_explicit: m.alpha.is_some(),
        });
    }

    let m = raw.movements.len();
    let n = raw.slots.len();
    if raw.valuations.len() != m {
        errors.push(ValidationError::Dimension(format!(
            "{} valuation rows for {} movements",
            raw.valuations.len(),
            m
        )));
    }
    for (i, row) in raw.valuations.iter().enumerate() {
        if row.len() != n {
            errors.push(ValidationError::Dimension(format!(
                "valuation row {i} has {} entries for {n} slots",
                row.len()
            )));
            continue;
        }
        for (j, &v) in row.iter().enumerate() {
            if !v.is_finite() {
                errors.push(ValidationError::NonFiniteValuation(i, j));
            } else if v < 0.0 {
                errors.push(ValidationError::NegativeValuation(i, j));
            }
        }
    }
    if let Some(rcof) = &raw.rcof {
        if rcof.len() != m {
            errors.push(ValidationError::Dimension(format!(
                "{} rcof values for {} movements",
                rcof.len(),
                m
            )));
        }
        for (i, &r) in rcof.iter().enumerate() {
            if !(0.0..=1.0).contains(&r) {
                errors.push(ValidationError::Rcof(i, r));
            }
        }
    }
    if !errors.is_empty() {
        return Err(ValidationErrors(errors));
    }

    let slots: Vec<Slot> = raw
        .slots
        .iter()
        .enumerate()
        .map(|(id, s)| {
            let capacity = s.capacity as u32;
            Slot {
                id,
                label: s.label.clone(),
                capacity,
                threshold: threshold_for(capacity, p.lambda),
            }
        })
        .collect();
    let cities: Vec<City> = raw
        .cities
        .iter()
        .enumerate()
        .map(|(id, c)| City {
            id,
            label: c.label.clone(),
            name: c.name.clone(),
            spi: c.spi,
            population: c.population as u64,
            class: c.class,
        })
        .collect();
    let valuations =
        ValuationMatrix::from_rows(&raw.valuations, n).expect("row lengths checked above");

    let (rcof, rcof_explicit) = match &raw.rcof {
        Some(values) => (RcofVector::new(values.clone()), true),
        None if m == 0 => (RcofVector::new(Vec::new()), false),
        None => match compute_rcof(&movements, &cities, p.delta) {
            Ok(r) => (r, false),
            Err(e) => {
                return Err(ValidationErrors(vec![ValidationError::RcofComputation(
                    e.to_string(),
                )]))
            }
        },
    };

    let mut scaled_weights = Vec::with_capacity(m * n);
    let mut max_row_sum: i128 = 0;
    for i in 0..m {
        let rho = rcof.get(i);
        let mut row_max = 0i64;
        for j in 0..n {
            let w = scale_weight(p.scale, rho, valuations.get(i, j));
            if w > MAX_SCALED_WEIGHT as f64 {
                errors.push(ValidationError::WeightOverflow(i, j));
                scaled_weights.push(0);
                continue;
            }
            let w = w as i64;
            row_max = row_max.max(w);
            scaled_weights.push(w);
        }
        max_row_sum += i128::from(row_max);
    }
    let g_scaled = (p.scale as f64 * p.g).round();
    let total_capacity: i128 = slots.iter().map(|s| i128::from(s.capacity)).sum();
    if g_scaled > MAX_SCALED_WEIGHT as f64
        || max_row_sum + total_capacity * (g_scaled as i128) > MAX_SCALED_TOTAL
    {
        errors.push(ValidationError::TotalOverflow);
    }
    if !errors.is_empty() {
        return Err(ValidationErrors(errors));
    }

    Ok(Instance {
        slots,
        movements,
        cities,
        valuations,
        params: p.clone(),
        rcof,
        rcof_explicit,
        scaled_weights,
        scaled_g: g_scaled as i64,
    })
}

/// Assignment of movements to slots; `None` means rejected.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Allocation {
    assignment: Vec<Option<usize>>,
}

impl Allocation {
    pub fn new(assignment: Vec<Option<usize>>) -> Self {
        Self { assignment }
    }

    pub fn empty(movements: usize) -> Self {
        Self {
            assignment: vec![None; movements],
        }
    }

    pub fn assignment(&self) -> &[Option<usize>] {
        &self.assignment
    }

    pub fn slot_of(&self, i: usize) -> Option<usize> {
        self.assignment[i]
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn allocated_count(&self) -> usize {
        self.assignment.iter().filter(|a| a.is_some()).count()
    }

    /// Movements per slot. Slot ids `>= slots` are ignored.
    pub fn occupancy(&self, slots: usize) -> Vec<u32> {
        let mut occ = vec![0u32; slots];
        for j in self.assignment.iter().flatten() {
            if let Some(o) = occ.get_mut(*j) {
                *o += 1;
            }
        }
        occ
    }
}

/// Allocation, payments and derived utilities of one mechanism run.
#[derive(Debug, Clone, PartialEq)]
pub struct MechanismResult {
    pub allocation: Allocation,
    pub payments: Vec<f64>,
    pub utilities: Vec<f64>,
    /// Affine welfare of the allocation, in currency units.
    pub social_utility: f64,
    pub social_utility_scaled: i64,
    pub slot_congestion: Vec<u32>,
    /// Scaled payment numerators `h_i - (others' welfare)`.
    pub payment_numerators: Vec<i64>,
    /// Scaled surplus `rho_i * scale * u_i`, computed in integers.
    pub scaled_surplus: Vec<i64>,
    /// Movements whose rcof is positive but below 1e-9.
    pub low_rcof: Vec<usize>,
}
