//! Synthetic scenarios standing in for real airport timetables.
//!
//! Cities get an SPI in `[30, 80]` and a population in `[1e5, 2e7]`, drawn by
//! class. Demand over the day has a morning and an evening peak; requested
//! slots follow it. Each slot gets a four-bin valuation histogram (INR) whose
//! centre rises with demand, and each movement's valuation for slot `j` is a
//! histogram draw discounted by distance from its requested slot. Every
//! number is a pure function of the spec and seed.

use std::fmt::Write as _;

use super::formats::{format_config, ScenarioConfig};
use super::histogram::{sample_valuations, HistogramBin, ValuationHistogram};
use super::rng::SeededRng;
use super::ScenarioTexts;
use crate::model::{CityClass, MechanismParams};

const AIRLINES: [&str; 6] = ["AI", "6E", "SG", "UK", "QP", "IX"];

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub movements: usize,
    pub capacities: Vec<u32>,
    pub cities: usize,
    /// Relative weights of metro, capital and remote cities.
    pub class_mix: [f64; 3],
    /// Centre of the off-peak valuation histogram, INR.
    pub base_valuation: f64,
    /// When false, a day with more movements than seats is reported.
    pub allow_rejection: bool,
    pub params: MechanismParams,
    pub seed: u64,
}

impl SynthSpec {
    /// `n` slots of equal capacity with default mix and parameters.
    pub fn uniform(movements: usize, slots: usize, capacity: u32, seed: u64) -> Self {
        Self {
            movements,
            capacities: vec![capacity; slots],
            cities: 40,
            class_mix: [0.3, 0.2, 0.5],
            base_valuation: 3_500_000.0,
            allow_rejection: true,
            params: MechanismParams::default(),
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    pub texts: ScenarioTexts,
    pub warnings: Vec<String>,
}

/// Relative demand for slot `j` of `n`: a floor plus two Gaussian peaks.
pub fn demand_profile(n: usize) -> Vec<f64> {
    let width = (n as f64 * 0.12).max(0.5);
    let bump = |j: f64, centre: f64| (-((j - centre) / width).powi(2)).exp();
    (0..n)
        .map(|j| {
            let x = j as f64;
            0.35 + bump(x, 0.3 * n as f64) + 0.8 * bump(x, 0.75 * n as f64)
        })
        .collect()
}

/// Greedy request-order assignment: the requested slot, else the nearest slot
/// with room (the later one on ties), else none.
pub fn greedy_current(requests: &[usize], capacities: &[u32]) -> Vec<Option<usize>> {
    let n = capacities.len();
    let mut free: Vec<u32> = capacities.to_vec();
    requests
        .iter()
        .map(|&r| {
            let pick = (0..n)
                .filter(|&j| free[j] > 0)
                .min_by_key(|&j| (r.abs_diff(j), std::cmp::Reverse(j)));
            if let Some(j) = pick {
                free[j] -= 1;
            }
            pick
        })
        .collect()
}

pub fn synth_scenario(spec: &SynthSpec) -> SynthOutput {
    let m = spec.movements;
    let n = spec.capacities.len();
    let mut warnings = Vec::new();
    let seats: u64 = spec.capacities.iter().map(|&c| u64::from(c)).sum();
    if !spec.allow_rejection && m as u64 > seats {
        warnings.push(format!(
            "{m} movements exceed the {seats} seats of the day; some must be rejected"
        ));
    }
    if n == 0 && m > 0 {
        warnings.push("no slots to request; movements reference nothing".to_string());
    }

    let mut rng = SeededRng::fork(spec.seed, 1);
    let mut cities = String::from("city_id,name,spi,population,class\n");
    for k in 0..spec.cities.max(1) {
        let class = CityClass::ALL[rng.weighted(&spec.class_mix)];
        let ((spi_lo, spi_hi), (pop_lo, pop_hi)) = match class {
            CityClass::Metro => ((60.0, 80.0), (5e6, 2e7)),
            CityClass::Capital => ((45.0, 70.0), (1e6, 5e6)),
            CityClass::Remote => ((30.0, 50.0), (1e5, 1e6)),
        };
        let spi = (rng.range(spi_lo, spi_hi) * 10.0).round() / 10.0;
        let pop = rng.range(f64::ln(pop_lo), f64::ln(pop_hi)).exp().round() as u64;
        let _ = writeln!(cities, "c{k},City {k},{spi},{pop},{}", class.as_str());
    }

    let demand = demand_profile(n);
    let peak = demand.iter().copied().fold(f64::MIN, f64::max);
    let mut slots = String::from("slot_id,capacity\n");
    let mut histograms = String::from("slot_id,lower,upper,frequency\n");
    let mut hists = Vec::with_capacity(n);
    for (j, &c) in spec.capacities.iter().enumerate() {
        let _ = writeln!(slots, "s{j},{c}");
        let centre = spec.base_valuation * (1.0 + 0.5 * demand[j] / peak);
        let mut bins = Vec::new();
        for (k, freq) in [1.0, 3.0, 3.0, 1.0].into_iter().enumerate() {
            let lower = (centre * (0.6 + 0.2 * k as f64)).round();
            let upper = (centre * (0.8 + 0.2 * k as f64)).round();
            let _ = writeln!(histograms, "s{j},{lower},{upper},{freq}");
            bins.push(HistogramBin {
                lower,
                upper,
                frequency: freq,
            });
        }
        hists.push(ValuationHistogram::new(bins));
    }

    let mut rng = SeededRng::fork(spec.seed, 2);
    let mut movements = String::from("movement_id,airline,city_id,requested_slot_id,alpha\n");
    let mut requests = Vec::with_capacity(m);
    for i in 0..m {
        let city = rng.below(spec.cities.max(1) as u64);
        let airline = rng.pick(&AIRLINES);
        let r = if n == 0 { 0 } else { rng.weighted(&demand) };
        requests.push(r);
        let _ = writeln!(movements, "m{i},{airline},c{city},s{r},");
    }

    let mut valuations = String::from("movement_id,slot_id,valuation\n");
    if n > 0 {
        let sampled =
            sample_valuations(&hists, m, spec.seed).expect("generated histograms are well formed");
        for (i, &r) in requests.iter().enumerate() {
            for j in 0..n {
                let v = (sampled.get(i, j) / (1.0 + 0.25 * r.abs_diff(j) as f64)).round();
                let _ = writeln!(valuations, "m{i},s{j},{v}");
            }
        }
    }

    let mut current = String::from("movement_id,slot_id\n");
    for (i, a) in greedy_current(&requests, &spec.capacities)
        .iter()
        .enumerate()
    {
        if let Some(j) = a {
            let _ = writeln!(current, "m{i},s{j}");
        }
    }

    let config = format_config(&ScenarioConfig {
        params: spec.params.clone(),
        seed: spec.seed,
    });
    SynthOutput {
        texts: ScenarioTexts {
            slots,
            cities,
            movements,
            valuations: Some(valuations),
            histograms: Some(histograms),
            current: Some(current),
            config: Some(config),
        },
        warnings,
    }
}

pub const ENSEMBLE_SCENARIOS: usize = 20;
pub const ENSEMBLE_MOVEMENTS: usize = 200;
pub const ENSEMBLE_SLOTS: usize = 24;
pub const ENSEMBLE_CAPACITY: u32 = 10;
pub const DEFAULT_G_GRID: [f64; 4] = [15_000.0, 20_000.0, 25_000.0, 30_000.0];

/// The default synthetic ensemble: 20 scenarios of 200 movements over 24
/// slots of capacity 10, each with its own seed derived from `seed`.
pub fn default_ensemble(seed: u64) -> Vec<SynthSpec> {
    (0..ENSEMBLE_SCENARIOS)
        .map(|k| {
            let s = SeededRng::fork(seed, 0xE5 + k as u64).next_u64();
            SynthSpec::uniform(ENSEMBLE_MOVEMENTS, ENSEMBLE_SLOTS, ENSEMBLE_CAPACITY, s)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::build_scenario;

    #[test]
    fn empty_spec_is_valid() {
        let out = synth_scenario(&SynthSpec::uniform(0, 4, 2, 1));
        let s = build_scenario(&out.texts).unwrap();
        assert_eq!(s.instance.num_movements(), 0);
        assert_eq!(s.instance.num_slots(), 4);
    }

    #[test]
    fn byte_identical_for_same_seed() {
        let spec = SynthSpec::uniform(30, 6, 4, 77);
        assert_eq!(synth_scenario(&spec), synth_scenario(&spec));
        let other = SynthSpec {
            seed: 78,
            ..spec.clone()
        };
        assert_ne!(
            synth_scenario(&spec).texts.valuations,
            synth_scenario(&other).texts.valuations
        );
    }

    #[test]
    fn generated_values_stay_in_range() {
        let out = synth_scenario(&SynthSpec::uniform(60, 8, 6, 5));
        let s = build_scenario(&out.texts).unwrap();
        for c in s.instance.cities() {
            assert!((30.0..=80.0).contains(&c.spi));
            assert!((100_000..=20_000_000).contains(&c.population));
        }
        assert_eq!(s.current.allocated_count(), 48);
        let occ = s.current.occupancy(8);
        assert!(occ.iter().all(|&o| o <= 6));
    }

    #[test]
    fn infeasible_spec_is_flagged() {
        let spec = SynthSpec {
            allow_rejection: false,
            ..SynthSpec::uniform(10, 2, 3, 0)
        };
        let out = synth_scenario(&spec);
        assert_eq!(out.warnings.len(), 1);
        assert!(build_scenario(&out.texts).is_ok());
    }

    #[test]
    fn greedy_prefers_request_then_nearest_later() {
        assert_eq!(
            greedy_current(&[1, 1, 1, 1], &[1, 1, 1]),
            vec![Some(1), Some(2), Some(0), None]
        );
        assert_eq!(greedy_current(&[0], &[0, 0]), vec![None]);
    }
}
