//! Result files.
//!
//! * `allocation.json`: `{"movements": [{"movement", "slot", "slot_index"}]}`
//!   in movement order; `slot` and `slot_index` are null when unallocated.
//! * `payments.csv`: `movement_id,slot_id,rcof,valuation,payment,utility`,
//!   amounts with six fractional digits.
//! * `metrics.json`: welfare, congestion and utility summaries.
//! * `comparison.csv` / `comparison.json`: per-interval welfare of the three
//!   methods and percent improvements (`n/a` when the baseline is not positive).
//! * `sweep.csv`: one row per (g, method); empty cells mean "no allocated
//!   movement to average over".

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::ComparisonReport;
use crate::model::{Allocation, CityClass, Instance, MechanismResult};
use crate::payments::utilities;

pub const ALLOCATION_JSON: &str = "allocation.json";
pub const PAYMENTS_CSV: &str = "payments.csv";
pub const METRICS_JSON: &str = "metrics.json";
pub const COMPARISON_CSV: &str = "comparison.csv";
pub const COMPARISON_JSON: &str = "comparison.json";
pub const SWEEP_CSV: &str = "sweep.csv";

#[derive(Debug, Error)]
#[error("cannot write {path}: {source}")]
pub struct OutputError {
    pub path: PathBuf,
    #[source]
    pub source: std::io::Error,
}

impl OutputError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AllocationEntry {
    pub movement: String,
    pub slot: Option<String>,
    pub slot_index: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AllocationFile {
    pub movements: Vec<AllocationEntry>,
}

impl AllocationFile {
    pub fn allocation(&self) -> Allocation {
        Allocation::new(self.movements.iter().map(|e| e.slot_index).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaymentRecord {
    pub movement_id: String,
    pub slot_id: String,
    pub rcof: String,
    pub valuation: String,
    pub payment: String,
    pub utility: String,
}

impl PaymentRecord {
    pub fn payment_value(&self) -> Option<f64> {
        self.payment.parse().ok()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    pub movements: usize,
    pub slots: usize,
    pub allocated: usize,
    pub lambda: f64,
    pub g: f64,
    pub scale: u64,
    pub social_utility: f64,
    pub social_utility_scaled: i64,
    pub total_payments: f64,
    pub mean_payment: Option<f64>,
    pub mean_individual_utility: Option<f64>,
    pub class_utility: BTreeMap<CityClass, Option<f64>>,
    pub congested_movements: u64,
    pub slot_congestion: Vec<u32>,
    /// Movements whose remoteness weight is positive but below the reporting
    /// threshold; their payments divide by a tiny number.
    pub low_rcof_movements: Vec<String>,
}

fn amount(x: f64) -> String {
    // Avoid "-0.000000" for values that round to zero.
    let s = format!("{x:.6}");
    if s.trim_start_matches('-')
        .chars()
        .all(|c| c == '0' || c == '.')
    {
        s.trim_start_matches('-').to_string()
    } else {
        s
    }
}

fn opt_amount(x: Option<f64>) -> String {
    x.map(amount).unwrap_or_default()
}

fn csv_string(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::WriterBuilder::new()
        .flexible(false)
        .from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory write")).expect("UTF-8 fields")
}

fn json_string<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

pub fn render_allocation_json(inst: &Instance, alloc: &Allocation) -> String {
    let movements = alloc
        .assignment()
        .iter()
        .enumerate()
        .map(|(i, a)| AllocationEntry {
            movement: inst.movements()[i].label.clone(),
            slot: a.map(|j| inst.slots()[j].label.clone()),
            slot_index: *a,
        })
        .collect();
    json_string(&AllocationFile { movements })
}

pub fn read_allocation_json(text: &str) -> Result<AllocationFile, serde_json::Error> {
    serde_json::from_str(text)
}

pub fn render_payments_csv(inst: &Instance, result: &MechanismResult) -> String {
    let rows = (0..inst.num_movements()).map(|i| {
        let slot = result.allocation.slot_of(i);
        vec![
            inst.movements()[i].label.clone(),
            slot.map(|j| inst.slots()[j].label.clone())
                .unwrap_or_default(),
            format!("{:.12}", inst.rcof().get(i)),
            amount(slot.map_or(0.0, |j| inst.valuations().get(i, j))),
            amount(result.payments[i]),
            amount(result.utilities[i]),
        ]
    });
    csv_string(
        &[
            "movement_id",
            "slot_id",
            "rcof",
            "valuation",
            "payment",
            "utility",
        ],
        rows,
    )
}

pub fn read_payments_csv(text: &str) -> Result<Vec<PaymentRecord>, csv::Error> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes())
        .deserialize()
        .collect()
}

pub fn format_payment_records(records: &[PaymentRecord]) -> String {
    let rows = records.iter().map(|r| {
        vec![
            r.movement_id.clone(),
            r.slot_id.clone(),
            r.rcof.clone(),
            r.valuation.clone(),
            r.payment.clone(),
            r.utility.clone(),
        ]
    });
    csv_string(
        &[
            "movement_id",
            "slot_id",
            "rcof",
            "valuation",
            "payment",
            "utility",
        ],
        rows,
    )
}

pub fn metrics(inst: &Instance, result: &MechanismResult) -> Metrics {
    let report =
        utilities(inst, &result.allocation, &result.payments).expect("result matches instance");
    Metrics {
        movements: inst.num_movements(),
        slots: inst.num_slots(),
        allocated: report.allocated,
        lambda: inst.params().lambda,
        g: inst.params().g,
        scale: inst.scale(),
        social_utility: result.social_utility,
        social_utility_scaled: result.social_utility_scaled,
        total_payments: result.payments.iter().sum(),
        mean_payment: report.mean_payment_allocated,
        mean_individual_utility: report.mean_allocated,
        class_utility: report.by_class,
        congested_movements: result.slot_congestion.iter().map(|&e| u64::from(e)).sum(),
        slot_congestion: result.slot_congestion.clone(),
        low_rcof_movements: result
            .low_rcof
            .iter()
            .map(|&i| inst.movements()[i].label.clone())
            .collect(),
    }
}

pub fn render_metrics_json(inst: &Instance, result: &MechanismResult) -> String {
    json_string(&metrics(inst, result))
}

fn percent(x: Option<f64>) -> String {
    x.map_or_else(|| "n/a".to_string(), |v| format!("{v:.2}"))
}

pub fn render_comparison_csv(report: &ComparisonReport) -> String {
    let rows = report.rows.iter().map(|r| {
        vec![
            r.interval.clone(),
            r.g.to_string(),
            amount(r.mechanism),
            amount(r.current),
            amount(r.iata),
            percent(r.improvement_vs_current),
            percent(r.improvement_vs_iata),
        ]
    });
    csv_string(
        &[
            "interval",
            "g",
            "mechanism",
            "current",
            "iata",
            "improvement_vs_current_pct",
            "improvement_vs_iata_pct",
        ],
        rows,
    )
}

pub fn render_comparison_json(report: &ComparisonReport) -> String {
    json_string(report)
}

pub fn render_sweep_csv(report: &ComparisonReport) -> String {
    let rows = report.sweep.iter().map(|r| {
        let class = |c: CityClass| opt_amount(r.class_utility.get(&c).copied().flatten());
        vec![
            r.g.to_string(),
            r.method.as_str().to_string(),
            amount(r.social_utility),
            opt_amount(r.mean_payment),
            opt_amount(r.mean_individual_utility),
            class(CityClass::Metro),
            class(CityClass::Capital),
            class(CityClass::Remote),
            r.allocated.to_string(),
            r.feasible.to_string(),
        ]
    });
    csv_string(
        &[
            "g",
            "method",
            "social_utility",
            "mean_payment",
            "mean_individual_utility",
            "utility_metro",
            "utility_capital",
            "utility_remote",
            "allocated",
            "feasible",
        ],
        rows,
    )
}

fn write_files(dir: &Path, files: &[(&str, String)]) -> Result<Vec<PathBuf>, OutputError> {
    fs::create_dir_all(dir).map_err(|e| OutputError::io(dir, e))?;
    let mut written = Vec::with_capacity(files.len());
    for (name, text) in files {
        let p = dir.join(name);
        fs::write(&p, text).map_err(|e| OutputError::io(&p, e))?;
        written.push(p);
    }
    Ok(written)
}

/// `allocation.json`, `payments.csv` and `metrics.json`.
pub fn write_mechanism_results(
    dir: &Path,
    inst: &Instance,
    result: &MechanismResult,
) -> Result<Vec<PathBuf>, OutputError> {
    write_files(
        dir,
        &[
            (
                ALLOCATION_JSON,
                render_allocation_json(inst, &result.allocation),
            ),
            (PAYMENTS_CSV, render_payments_csv(inst, result)),
            (METRICS_JSON, render_metrics_json(inst, result)),
        ],
    )
}

/// `comparison.csv`, `comparison.json` and `sweep.csv`.
pub fn write_comparison(
    dir: &Path,
    report: &ComparisonReport,
) -> Result<Vec<PathBuf>, OutputError> {
    write_files(
        dir,
        &[
            (COMPARISON_CSV, render_comparison_csv(report)),
            (COMPARISON_JSON, render_comparison_json(report)),
            (SWEEP_CSV, render_sweep_csv(report)),
        ],
    )
}

pub fn write_results(
    dir: &Path,
    inst: &Instance,
    result: &MechanismResult,
    report: &ComparisonReport,
) -> Result<Vec<PathBuf>, OutputError> {
    let mut written = write_mechanism_results(dir, inst, result)?;
    written.extend(write_comparison(dir, report)?);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::compare;
    use crate::model::{validate_instance, MechanismParams, RawInstance};
    use crate::payments::run_mechanism;

    fn instance() -> Instance {
        let raw = RawInstance::new(MechanismParams {
            g: 10.0,
            ..MechanismParams::default()
        })
        .slot("s0", 1)
        .slot("s1", 2)
        .city("c0", 70.0, 5_000_000, CityClass::Metro)
        .city("c1", 35.0, 300_000, CityClass::Remote)
        .movement("m0", "c0", "s0", vec![100.0, 40.0])
        .movement("m1", "c1", "s0", vec![90.0, 80.0])
        .movement("m2", "c1", "s1", vec![5.0, 60.0]);
        validate_instance(&raw).unwrap()
    }

    #[test]
    fn allocation_round_trip() {
        let inst = instance();
        let res = run_mechanism(&inst);
        let text = render_allocation_json(&inst, &res.allocation);
        assert_eq!(
            read_allocation_json(&text).unwrap().allocation(),
            res.allocation
        );
    }

    #[test]
    fn payments_round_trip() {
        let inst = instance();
        let res = run_mechanism(&inst);
        let text = render_payments_csv(&inst, &res);
        let records = read_payments_csv(&text).unwrap();
        assert_eq!(records.len(), 3);
        assert_eq!(format_payment_records(&records), text);
        for (r, p) in records.iter().zip(&res.payments) {
            assert_eq!(r.payment, format!("{p:.6}"));
            assert!((r.payment_value().unwrap() - p).abs() <= 5e-7);
        }
    }

    #[test]
    fn empty_results_have_headers_only() {
        let raw = RawInstance::new(MechanismParams::default()).slot("s0", 1);
        let inst = validate_instance(&raw).unwrap();
        let res = run_mechanism(&inst);
        assert_eq!(
            render_payments_csv(&inst, &res),
            "movement_id,slot_id,rcof,valuation,payment,utility\n"
        );
        let report = compare(&inst, &Allocation::empty(0), &[], 6).unwrap();
        assert_eq!(render_sweep_csv(&report).lines().count(), 1);
        assert_eq!(
            read_allocation_json(&render_allocation_json(&inst, &res.allocation))
                .unwrap()
                .movements,
            vec![]
        );
    }

    #[test]
    fn sweep_counts_rows() {
        let inst = instance();
        let report = compare(
            &inst,
            &Allocation::new(vec![Some(0), Some(1), Some(1)]),
            &[1.0, 2.0, 3.0, 4.0],
            1,
        )
        .unwrap();
        assert_eq!(render_sweep_csv(&report).lines().count(), 13);
        // Two single-slot intervals plus the whole day, per g.
        assert_eq!(render_comparison_csv(&report).lines().count(), 1 + 4 * 3);
    }

    #[test]
    fn negative_zero_is_normalised() {
        assert_eq!(amount(-0.0000001), "0.000000");
        assert_eq!(amount(-1.5), "-1.500000");
    }
}
