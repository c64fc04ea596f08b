//! Scenario files, synthetic scenarios and result output.
//!
//! A scenario directory holds `slots.csv`, `cities.csv`, `movements.csv`,
//! either `valuations.csv` or `histograms.csv`, and optionally `current.csv`
//! and `config.txt`. See [`formats`] for the schemas.

pub mod formats;
pub mod histogram;
pub mod output;
pub mod rng;
pub mod synth;

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

pub use formats::{ParseError, ScenarioConfig};
pub use histogram::{sample_valuations, HistogramBin, HistogramError, ValuationHistogram};
pub use output::{write_results, OutputError};
pub use synth::{synth_scenario, SynthSpec};

use crate::model::{
    validate_instance, Allocation, Instance, RawCity, RawInstance, RawMovement, RawSlot,
    ValidationErrors,
};

pub const SLOTS: &str = "slots.csv";
pub const CITIES: &str = "cities.csv";
pub const MOVEMENTS: &str = "movements.csv";
pub const VALUATIONS: &str = "valuations.csv";
pub const HISTOGRAMS: &str = "histograms.csv";
pub const CURRENT: &str = "current.csv";
pub const CONFIG: &str = "config.txt";

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("{0}")]
    Validation(#[from] ValidationErrors),
    #[error("{HISTOGRAMS}: {0}")]
    Histogram(#[from] HistogramError),
    #[error("scenario needs either {VALUATIONS} or {HISTOGRAMS}")]
    NoValuations,
}

/// Paths of one scenario's input files.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioFiles {
    pub slots: PathBuf,
    pub cities: PathBuf,
    pub movements: PathBuf,
    pub valuations: Option<PathBuf>,
    pub histograms: Option<PathBuf>,
    pub current: Option<PathBuf>,
    pub config: Option<PathBuf>,
}

impl ScenarioFiles {
    /// The standard file names inside `dir`; optional files are included
    /// only when present.
    pub fn in_dir(dir: &Path) -> Self {
        let optional = |name: &str| {
            let p = dir.join(name);
            p.exists().then_some(p)
        };
        Self {
            slots: dir.join(SLOTS),
            cities: dir.join(CITIES),
            movements: dir.join(MOVEMENTS),
            valuations: optional(VALUATIONS),
            histograms: optional(HISTOGRAMS),
            current: optional(CURRENT),
            config: optional(CONFIG),
        }
    }

    pub fn read(&self) -> Result<ScenarioTexts, ScenarioError> {
        let read = |p: &Path| {
            fs::read_to_string(p).map_err(|source| ScenarioError::Io {
                path: p.to_path_buf(),
                source,
            })
        };
        let read_opt = |p: &Option<PathBuf>| p.as_deref().map(read).transpose();
        Ok(ScenarioTexts {
            slots: read(&self.slots)?,
            cities: read(&self.cities)?,
            movements: read(&self.movements)?,
            valuations: read_opt(&self.valuations)?,
            histograms: read_opt(&self.histograms)?,
            current: read_opt(&self.current)?,
            config: read_opt(&self.config)?,
        })
    }
}

/// File contents of a scenario, keyed like [`ScenarioFiles`].
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ScenarioTexts {
    pub slots: String,
    pub cities: String,
    pub movements: String,
    pub valuations: Option<String>,
    pub histograms: Option<String>,
    pub current: Option<String>,
    pub config: Option<String>,
}

impl ScenarioTexts {
    /// `(file name, contents)` for every present file.
    pub fn files(&self) -> Vec<(&'static str, &str)> {
        let mut out = vec![
            (SLOTS, self.slots.as_str()),
            (CITIES, self.cities.as_str()),
            (MOVEMENTS, self.movements.as_str()),
        ];
        for (name, text) in [
            (VALUATIONS, &self.valuations),
            (HISTOGRAMS, &self.histograms),
            (CURRENT, &self.current),
            (CONFIG, &self.config),
        ] {
            if let Some(t) = text {
                out.push((name, t.as_str()));
            }
        }
        out
    }

    pub fn write_to(&self, dir: &Path) -> Result<(), OutputError> {
        fs::create_dir_all(dir).map_err(|e| OutputError::io(dir, e))?;
        for (name, text) in self.files() {
            let p = dir.join(name);
            fs::write(&p, text).map_err(|e| OutputError::io(&p, e))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedScenario {
    pub instance: Instance,
    pub current: Allocation,
    pub config: ScenarioConfig,
}

pub fn load_scenario(files: &ScenarioFiles) -> Result<LoadedScenario, ScenarioError> {
    build_scenario(&files.read()?)
}

/// Parses and validates scenario contents already in memory.
pub fn build_scenario(texts: &ScenarioTexts) -> Result<LoadedScenario, ScenarioError> {
    let config = match &texts.config {
        Some(t) => formats::parse_config(CONFIG, t)?,
        None => ScenarioConfig::default(),
    };
    let slots = formats::parse_slots(SLOTS, &texts.slots)?;
    let cities = formats::parse_cities(CITIES, &texts.cities)?;
    let movements = formats::parse_movements(MOVEMENTS, &texts.movements)?;

    let slot_index = index_of(SLOTS, slots.iter().map(|s| (s.slot.as_str(), s.line)))?;
    let movement_index = index_of(
        MOVEMENTS,
        movements.iter().map(|m| (m.movement.as_str(), m.line)),
    )?;
    let (m, n) = (movements.len(), slots.len());

    let valuations = if let Some(text) = &texts.valuations {
        let rows = formats::parse_valuations(VALUATIONS, text)?;
        let mut matrix = vec![vec![None; n]; m];
        for r in rows {
            let i = lookup(VALUATIONS, r.line, &movement_index, &r.movement, "movement")?;
            let j = lookup(VALUATIONS, r.line, &slot_index, &r.slot, "slot")?;
            if matrix[i][j].replace(r.valuation).is_some() {
                return Err(ParseError::new(
                    VALUATIONS,
                    r.line,
                    None,
                    format!("duplicate valuation for ({}, {})", r.movement, r.slot),
                )
                .into());
            }
        }
        let missing = matrix.iter().flatten().filter(|v| v.is_none()).count();
        if missing > 0 {
            log::warn!("{missing} (movement, slot) valuation pairs missing; defaulting them to 0");
            for (i, row) in matrix.iter().enumerate() {
                for (j, v) in row.iter().enumerate() {
                    if v.is_none() {
                        log::debug!(
                            "valuation of {} for {} defaults to 0",
                            movements[i].movement,
                            slots[j].slot
                        );
                    }
                }
            }
        }
        matrix
            .into_iter()
            .map(|row| row.into_iter().map(|v| v.unwrap_or(0.0)).collect())
            .collect()
    } else if let Some(text) = &texts.histograms {
        let rows = formats::parse_histograms(HISTOGRAMS, text)?;
        let mut hists = vec![ValuationHistogram::default(); n];
        for r in rows {
            let j = lookup(HISTOGRAMS, r.line, &slot_index, &r.slot, "slot")?;
            hists[j].bins.push(HistogramBin {
                lower: r.lower,
                upper: r.upper,
                frequency: r.frequency,
            });
        }
        sample_valuations(&hists, m, config.seed)?.to_rows()
    } else {
        return Err(ScenarioError::NoValuations);
    };

    let raw = RawInstance {
        slots: slots
            .iter()
            .map(|s| RawSlot {
                label: s.slot.clone(),
                capacity: s.capacity,
            })
            .collect(),
        cities: cities
            .into_iter()
            .map(|c| RawCity {
                label: c.city,
                name: c.name,
                spi: c.spi,
                population: c.population,
                class: c.class,
            })
            .collect(),
        movements: movements
            .iter()
            .map(|mv| RawMovement {
                label: mv.movement.clone(),
                airline: mv.airline.clone(),
                city: mv.city.clone(),
                requested_slot: mv.requested_slot.clone(),
                alpha: mv.alpha,
            })
            .collect(),
        valuations,
        params: config.params.clone(),
        rcof: None,
    };
    let instance = validate_instance(&raw)?;

    let mut current = vec![None; m];
    if let Some(text) = &texts.current {
        for r in formats::parse_current(CURRENT, text)? {
            let i = lookup(CURRENT, r.line, &movement_index, &r.movement, "movement")?;
            let j = lookup(CURRENT, r.line, &slot_index, &r.slot, "slot")?;
            if current[i].replace(j).is_some() {
                return Err(ParseError::new(
                    CURRENT,
                    r.line,
                    None,
                    format!("movement '{}' listed twice", r.movement),
                )
                .into());
            }
        }
    }
    Ok(LoadedScenario {
        instance,
        current: Allocation::new(current),
        config,
    })
}

fn index_of<'a>(
    file: &str,
    labels: impl Iterator<Item = (&'a str, u64)>,
) -> Result<HashMap<&'a str, usize>, ParseError> {
    let mut index = HashMap::new();
    for (k, (label, line)) in labels.enumerate() {
        if index.insert(label, k).is_some() {
            return Err(ParseError::new(
                file,
                line,
                Some(1),
                format!("duplicate id '{label}'"),
            ));
        }
    }
    Ok(index)
}

fn lookup(
    file: &str,
    line: u64,
    index: &HashMap<&str, usize>,
    label: &str,
    kind: &str,
) -> Result<usize, ParseError> {
    index
        .get(label)
        .copied()
        .ok_or_else(|| ParseError::new(file, line, None, format!("unknown {kind} '{label}'")))
}

/// Renders an allocation as `current.csv` rows in movement order.
pub fn format_current(inst: &Instance, alloc: &Allocation) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["movement_id", "slot_id"])
        .expect("in-memory write");
    for (i, a) in alloc.assignment().iter().enumerate() {
        if let Some(j) = a {
            w.write_record([&inst.movements()[i].label, &inst.slots()[*j].label])
                .expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory write")).expect("labels are UTF-8")
}
