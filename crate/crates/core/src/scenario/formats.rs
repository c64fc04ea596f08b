//! Parsers for the scenario file formats.
//!
//! All CSV files are UTF-8, comma-separated, with a mandatory header row;
//! columns are matched by name and surrounding whitespace is trimmed.
//!
//! | file             | columns                                              |
//! |------------------|------------------------------------------------------|
//! | `slots.csv`      | `slot_id,capacity`                                   |
//! | `cities.csv`     | `city_id,name,spi,population,class`                  |
//! | `movements.csv`  | `movement_id,airline,city_id,requested_slot_id,alpha`|
//! | `valuations.csv` | `movement_id,slot_id,valuation`                      |
//! | `histograms.csv` | `slot_id,lower,upper,frequency`                      |
//! | `current.csv`    | `movement_id,slot_id`                                |
//!
//! `alpha` may be empty (the configured default applies). The config file is
//! flat `key=value` text with keys `lambda`, `g`, `delta`, `default_alpha`,
//! `scale` and `seed`; blank lines and `#` comments are ignored.

use std::fmt;
use std::str::FromStr;

use csv::{ReaderBuilder, StringRecord, Trim};
use thiserror::Error;

use crate::model::{CityClass, MechanismParams};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ParseError {
    pub file: String,
    pub line: u64,
    pub column: Option<usize>,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.column {
            Some(c) => write!(f, "{}:{}:{}: {}", self.file, self.line, c, self.message),
            None => write!(f, "{}:{}: {}", self.file, self.line, self.message),
        }
    }
}

impl ParseError {
    pub fn new(file: &str, line: u64, column: Option<usize>, message: impl Into<String>) -> Self {
        Self {
            file: file.to_string(),
            line,
            column,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlotRow {
    pub line: u64,
    pub slot: String,
    pub capacity: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CityRow {
    pub line: u64,
    pub city: String,
    pub name: String,
    pub spi: f64,
    pub population: i64,
    pub class: CityClass,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MovementRow {
    pub line: u64,
    pub movement: String,
    pub airline: String,
    pub city: String,
    pub requested_slot: String,
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValuationRow {
    pub line: u64,
    pub movement: String,
    pub slot: String,
    pub valuation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistogramRow {
    pub line: u64,
    pub slot: String,
    pub lower: f64,
    pub upper: f64,
    pub frequency: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurrentRow {
    pub line: u64,
    pub movement: String,
    pub slot: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScenarioConfig {
    pub params: MechanismParams,
    pub seed: u64,
}

/// A header-indexed CSV table.
struct Table<'a> {
    file: &'a str,
    columns: Vec<usize>,
    records: Vec<(u64, StringRecord)>,
}

impl<'a> Table<'a> {
    fn read(file: &'a str, text: &str, required: &[&str]) -> Result<Self, ParseError> {
        let mut reader = ReaderBuilder::new()
            .has_headers(true)
            .trim(Trim::All)
            .from_reader(text.as_bytes());
        let headers = reader.headers().map_err(|e| csv_error(file, e))?.clone();
        let mut columns = Vec::with_capacity(required.len());
        for name in required {
            let k = headers
                .iter()
                .position(|h| h.trim_start_matches('\u{feff}') == *name)
                .ok_or_else(|| {
                    ParseError::new(file, 1, None, format!("missing column '{name}'"))
                })?;
            columns.push(k);
        }
        let mut records = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| csv_error(file, e))?;
            let line = rec.position().map_or(0, |p| p.line());
            if rec.iter().all(str::is_empty) {
                continue;
            }
            records.push((line, rec));
        }
        Ok(Self {
            file,
            columns,
            records,
        })
    }

    fn field<'r>(
        &self,
        line: u64,
        rec: &'r StringRecord,
        col: usize,
    ) -> Result<&'r str, ParseError> {
        let k = self.columns[col];
        rec.get(k)
            .ok_or_else(|| ParseError::new(self.file, line, Some(k + 1), "missing field"))
    }

    fn text(&self, line: u64, rec: &StringRecord, col: usize) -> Result<String, ParseError> {
        let s = self.field(line, rec, col)?;
        if s.is_empty() {
            return Err(ParseError::new(
                self.file,
                line,
                Some(self.columns[col] + 1),
                "empty field",
            ));
        }
        Ok(s.to_string())
    }

    fn number<T: FromStr>(
        &self,
        line: u64,
        rec: &StringRecord,
        col: usize,
        what: &str,
    ) -> Result<T, ParseError> {
        let s = self.field(line, rec, col)?;
        s.parse().map_err(|_| {
            ParseError::new(
                self.file,
                line,
                Some(self.columns[col] + 1),
                format!("invalid {what} '{s}'"),
            )
        })
    }

    fn real(
        &self,
        line: u64,
        rec: &StringRecord,
        col: usize,
        what: &str,
    ) -> Result<f64, ParseError> {
        let v: f64 = self.number(line, rec, col, what)?;
        if !v.is_finite() {
            return Err(ParseError::new(
                self.file,
                line,
                Some(self.columns[col] + 1),
                format!("non-finite {what}"),
            ));
        }
        Ok(v)
    }
}

fn csv_error(file: &str, e: csv::Error) -> ParseError {
    let line = e.position().map_or(0, |p| p.line());
    let message = match e.kind() {
        csv::ErrorKind::Utf8 { .. } => "invalid UTF-8".to_string(),
        csv::ErrorKind::UnequalLengths {
            expected_len, len, ..
        } => {
            format!("expected {expected_len} fields, found {len}")
        }
        _ => e.to_string(),
    };
    ParseError::new(file, line, None, message)
}

pub fn parse_slots(file: &str, text: &str) -> Result<Vec<SlotRow>, ParseError> {
    let t = Table::read(file, text, &["slot_id", "capacity"])?;
    t.records
        .iter()
        .map(|(line, r)| {
            Ok(SlotRow {
                line: *line,
                slot: t.text(*line, r, 0)?,
                capacity: t.number(*line, r, 1, "capacity")?,
            })
        })
        .collect()
}

pub fn parse_cities(file: &str, text: &str) -> Result<Vec<CityRow>, ParseError> {
    let t = Table::read(
        file,
        text,
        &["city_id", "name", "spi", "population", "class"],
    )?;
    t.records
        .iter()
        .map(|(line, r)| {
            let class = t.field(*line, r, 4)?;
            Ok(CityRow {
                line: *line,
                city: t.text(*line, r, 0)?,
                name: t.field(*line, r, 1)?.to_string(),
                spi: t.real(*line, r, 2, "spi")?,
                population: t.number(*line, r, 3, "population")?,
                class: class
                    .parse()
                    .map_err(|m: String| ParseError::new(file, *line, Some(t.columns[4] + 1), m))?,
            })
        })
        .collect()
}

pub fn parse_movements(file: &str, text: &str) -> Result<Vec<MovementRow>, ParseError> {
    let t = Table::read(
        file,
        text,
        &[
            "movement_id",
            "airline",
            "city_id",
            "requested_slot_id",
            "alpha",
        ],
    )?;
    t.records
        .iter()
        .map(|(line, r)| {
            let alpha = if t.field(*line, r, 4)?.is_empty() {
                None
            } else {
                Some(t.real(*line, r, 4, "alpha")?)
            };
            Ok(MovementRow {
                line: *line,
                movement: t.text(*line, r, 0)?,
                airline: t.field(*line, r, 1)?.to_string(),
                city: t.text(*line, r, 2)?,
                requested_slot: t.text(*line, r, 3)?,
                alpha,
            })
        })
        .collect()
}

pub fn parse_valuations(file: &str, text: &str) -> Result<Vec<ValuationRow>, ParseError> {
    let t = Table::read(file, text, &["movement_id", "slot_id", "valuation"])?;
    t.records
        .iter()
        .map(|(line, r)| {
            Ok(ValuationRow {
                line: *line,
                movement: t.text(*line, r, 0)?,
                slot: t.text(*line, r, 1)?,
                valuation: t.real(*line, r, 2, "valuation")?,
            })
        })
        .collect()
}

pub fn parse_histograms(file: &str, text: &str) -> Result<Vec<HistogramRow>, ParseError> {
    let t = Table::read(file, text, &["slot_id", "lower", "upper", "frequency"])?;
    t.records
        .iter()
        .map(|(line, r)| {
            Ok(HistogramRow {
                line: *line,
                slot: t.text(*line, r, 0)?,
                lower: t.real(*line, r, 1, "lower bound")?,
                upper: t.real(*line, r, 2, "upper bound")?,
                frequency: t.real(*line, r, 3, "frequency")?,
            })
        })
        .collect()
}

pub fn parse_current(file: &str, text: &str) -> Result<Vec<CurrentRow>, ParseError> {
    let t = Table::read(file, text, &["movement_id", "slot_id"])?;
    t.records
        .iter()
        .map(|(line, r)| {
            Ok(CurrentRow {
                line: *line,
                movement: t.text(*line, r, 0)?,
                slot: t.text(*line, r, 1)?,
            })
        })
        .collect()
}

pub fn parse_config(file: &str, text: &str) -> Result<ScenarioConfig, ParseError> {
    let mut cfg = ScenarioConfig::default();
    let mut seen: Vec<&str> = Vec::new();
    for (k, raw_line) in text.lines().enumerate() {
        let line = k as u64 + 1;
        let content = raw_line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| ParseError::new(file, line, None, "expected key=value"))?;
        let key = key.trim();
        let value = value.trim();
        let column = raw_line.find('=').map(|c| c + 2);
        let real = || -> Result<f64, ParseError> {
            value
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| {
                    ParseError::new(
                        file,
                        line,
                        column,
                        format!("invalid number '{value}' for {key}"),
                    )
                })
        };
        let int = || -> Result<u64, ParseError> {
            value.parse::<u64>().map_err(|_| {
                ParseError::new(
                    file,
                    line,
                    column,
                    format!("invalid integer '{value}' for {key}"),
                )
            })
        };
        let known = match key {
            "lambda" => {
                cfg.params.lambda = real()?;
                "lambda"
            }
            "g" => {
                cfg.params.g = real()?;
                "g"
            }
            "delta" => {
                cfg.params.delta = real()?;
                "delta"
            }
            "default_alpha" => {
                cfg.params.default_alpha = real()?;
                "default_alpha"
            }
            "scale" => {
                cfg.params.scale = int()?;
                "scale"
            }
            "seed" => {
                cfg.seed = int()?;
                "seed"
            }
            other => {
                return Err(ParseError::new(
                    file,
                    line,
                    Some(1),
                    format!("unknown key '{other}'"),
                ))
            }
        };
        if seen.contains(&known) {
            return Err(ParseError::new(
                file,
                line,
                Some(1),
                format!("duplicate key '{known}'"),
            ));
        }
        seen.push(known);
    }
    Ok(cfg)
}

/// Renders a config in the format [`parse_config`] reads.
pub fn format_config(cfg: &ScenarioConfig) -> String {
    let p = &cfg.params;
    format!(
        "lambda={}\ng={}\ndelta={:e}\ndefault_alpha={}\nscale={}\nseed={}\n",
        p.lambda, p.g, p.delta, p.default_alpha, p.scale, cfg.seed
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slots_by_header_name() {
        let rows = parse_slots("slots.csv", "capacity,slot_id\n5, s0\n7,s1\n").unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].slot, "s0");
        assert_eq!(rows[1].capacity, 7);
        assert_eq!(rows[1].line, 3);
    }

    #[test]
    fn bad_number_names_line_and_column() {
        let err = parse_slots("slots.csv", "slot_id,capacity\ns0,5\ns1,\u{2212}3\n").unwrap_err();
        assert_eq!((err.line, err.column), (3, Some(2)));
        assert!(err.to_string().starts_with("slots.csv:3:2:"), "{err}");
    }

    #[test]
    fn missing_column_and_ragged_rows() {
        let err = parse_slots("slots.csv", "slot_id\ns0\n").unwrap_err();
        assert!(err.message.contains("capacity"));
        let err = parse_current("current.csv", "movement_id,slot_id\nm0,s0,extra\n").unwrap_err();
        assert_eq!(err.line, 2);
    }

    #[test]
    fn optional_alpha() {
        let text =
            "movement_id,airline,city_id,requested_slot_id,alpha\nm0,AI,c0,s0,\nm1,6E,c1,s1,0.25\n";
        let rows = parse_movements("movements.csv", text).unwrap();
        assert_eq!(rows[0].alpha, None);
        assert_eq!(rows[1].alpha, Some(0.25));
    }

    #[test]
    fn city_class_is_checked() {
        let err = parse_cities(
            "cities.csv",
            "city_id,name,spi,population,class\nc0,X,50,100,village\n",
        )
        .unwrap_err();
        assert!(err.message.contains("village"));
    }

    #[test]
    fn config_round_trip() {
        let cfg = ScenarioConfig {
            params: MechanismParams {
                lambda: 0.25,
                g: 20_000.0,
                delta: 1e-7,
                default_alpha: 0.4,
                scale: 1000,
            },
            seed: 99,
        };
        assert_eq!(
            parse_config("config.txt", &format_config(&cfg)).unwrap(),
            cfg
        );
        let partial = parse_config("c", "# comment\n\ng = 12.5\n").unwrap();
        assert_eq!(partial.params.g, 12.5);
        assert_eq!(partial.params.lambda, 0.2);
        assert!(parse_config("c", "gamma=1\n").is_err());
        assert!(parse_config("c", "g=1\ng=2\n").is_err());
        assert!(parse_config("c", "seed=-1\n").is_err());
    }
}
