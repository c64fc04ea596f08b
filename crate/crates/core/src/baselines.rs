//! Reference allocations and mechanism-vs-baseline comparison reports.
//!
//! Two baselines are scored under the mechanism's own welfare objective:
//! the given ("current") assignment, and a displacement-minimizing
//! allocation that grants each request as close to its requested slot as
//! capacity allows. The latter is a simplified stand-in for request-driven
//! scheduling guidelines; it ignores historic rights and other priorities.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::allocator::{self, objective_unchecked, AllocError};
use crate::flow::{ArcSpec, Transport};
use crate::model::{Allocation, CityClass, Instance, ValidationErrors};
use crate::payments::{self, utilities};

/// How every method is scored in comparison reports.
pub const EVALUATION_NOTE: &str =
    "all methods are evaluated under the mechanism's objective: sum(rcof * valuation) - g * sum(congestion)";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedEvaluation {
    pub social_utility: f64,
    pub social_utility_scaled: i64,
    pub feasible: bool,
    /// Slots whose occupancy exceeds capacity.
    pub over_capacity: Vec<usize>,
}

/// Scores an externally given assignment. Capacity violations are reported,
/// not clipped: the objective is evaluated on the assignment as given.
pub fn evaluate_fixed_allocation(
    inst: &Instance,
    alloc: &Allocation,
) -> Result<FixedEvaluation, AllocError> {
    if alloc.len() != inst.num_movements() {
        return Err(AllocError::Dimension {
            expected: inst.num_movements(),
            got: alloc.len(),
        });
    }
    let n = inst.num_slots();
    if let Some(&j) = alloc.assignment().iter().flatten().find(|&&j| j >= n) {
        return Err(AllocError::UnknownSlot(j));
    }
    let over_capacity: Vec<usize> = inst
        .slots()
        .iter()
        .zip(alloc.occupancy(n))
        .filter(|(s, occ)| *occ > s.capacity)
        .map(|(s, _)| s.id)
        .collect();
    let scaled = objective_unchecked(inst, alloc);
    Ok(FixedEvaluation {
        social_utility: scaled as f64 / inst.scale() as f64,
        social_utility_scaled: scaled,
        feasible: over_capacity.is_empty(),
        over_capacity,
    })
}

/// Minimum total displacement `sum |assigned - requested|`, each rejection
/// costing `rejection_penalty`. Ties go to the lexicographically smallest
/// assignment. Returns the assignment and its total cost.
pub fn min_displacement(
    requests: &[usize],
    capacities: &[u32],
    rejection_penalty: i64,
) -> (Vec<Option<usize>>, i64) {
    let m = requests.len();
    let n = capacities.len();
    let arcs: Vec<ArcSpec> = requests
        .iter()
        .enumerate()
        .flat_map(|(i, &r)| (0..n).map(move |j| (i, j, 1, r.abs_diff(j) as i64)))
        .collect();
    let capacity: Vec<i64> = capacities.iter().map(|&c| i64::from(c)).collect();
    let mut network = Transport::solve(&vec![1; m], &capacity, &arcs, &vec![rejection_penalty; m]);
    network.canonicalize(&(0..m).collect::<Vec<_>>());
    let assignment = (0..m).map(|i| network.target_of(i)).collect();
    (assignment, network.total_cost())
}

/// Displacement-minimizing allocation with the default rejection penalty of
/// `n` (worse than any displacement).
pub fn iata_displacement_allocate(inst: &Instance) -> Allocation {
    iata_displacement_allocate_with(inst, inst.num_slots() as i64)
}

pub fn iata_displacement_allocate_with(inst: &Instance, rejection_penalty: i64) -> Allocation {
    let requests: Vec<usize> = inst.movements().iter().map(|m| m.requested_slot).collect();
    let capacities: Vec<u32> = inst.slots().iter().map(|s| s.capacity).collect();
    Allocation::new(min_displacement(&requests, &capacities, rejection_penalty).0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Mechanism,
    Current,
    Iata,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Mechanism, Method::Current, Method::Iata];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Mechanism => "mechanism",
            Method::Current => "current",
            Method::Iata => "iata",
        }
    }
}

/// One (time interval, g) row in Table-style percent-improvement form.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub interval: String,
    pub g: f64,
    pub mechanism: f64,
    pub current: f64,
    pub iata: f64,
    /// `None` when the baseline's welfare is not positive.
    pub improvement_vs_current: Option<f64>,
    pub improvement_vs_iata: Option<f64>,
}

/// Plot-ready metrics of one method at one congestion cost.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub g: f64,
    pub method: Method,
    pub social_utility: f64,
    pub social_utility_scaled: i64,
    pub feasible: bool,
    pub allocated: usize,
    pub mean_payment: Option<f64>,
    pub mean_individual_utility: Option<f64>,
    pub class_utility: BTreeMap<CityClass, Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub evaluation: &'static str,
    pub rows: Vec<ComparisonRow>,
    pub sweep: Vec<SweepRow>,
}

impl ComparisonReport {
    pub fn sweep_row(&self, g: f64, method: Method) -> Option<&SweepRow> {
        self.sweep.iter().find(|r| r.g == g && r.method == method)
    }
}

/// `(mech - base) / |base| * 100`, only for a positive baseline.
pub fn percent_improvement(mechanism: f64, base: f64) -> Option<f64> {
    (base > 0.0).then(|| (mechanism - base) / base.abs() * 100.0)
}

/// Contiguous groups of `width` slots, labelled by slot id range.
pub fn slot_intervals(n: usize, width: usize) -> Vec<(String, std::ops::Range<usize>)> {
    let width = width.max(1);
    (0..n)
        .step_by(width)
        .map(|start| {
            let end = (start + width).min(n);
            (format!("{start}-{}", end - 1), start..end)
        })
        .collect()
}

fn interval_welfare(inst: &Instance, alloc: &Allocation, slots: std::ops::Range<usize>) -> f64 {
    let n = inst.num_slots();
    let occ = alloc.occupancy(n);
    let mut scaled: i64 = 0;
    for (i, a) in alloc.assignment().iter().enumerate() {
        if let Some(j) = a {
            if slots.contains(j) {
                scaled += inst.scaled_weight(i, *j);
            }
        }
    }
    for j in slots {
        scaled -= i64::from(occ[j].saturating_sub(inst.slots()[j].threshold)) * inst.scaled_g();
    }
    scaled as f64 / inst.scale() as f64
}

/// Runs the mechanism and both baselines at every `g`, scoring all three
/// under the mechanism's objective. Rows cover each slot interval of
/// `interval_width` slots and the whole day (`"all"`).
pub fn compare(
    inst: &Instance,
    current: &Allocation,
    g_values: &[f64],
    interval_width: usize,
) -> Result<ComparisonReport, CompareError> {
    if current.len() != inst.num_movements() {
        return Err(AllocError::Dimension {
            expected: inst.num_movements(),
            got: current.len(),
        }
        .into());
    }
    let iata = iata_displacement_allocate(inst);
    let mut intervals = slot_intervals(inst.num_slots(), interval_width);
    intervals.push(("all".to_string(), 0..inst.num_slots()));

    let mut rows = Vec::new();
    let mut sweep = Vec::new();
    for &g in g_values {
        let at_g = inst.with_g(g)?;
        let result = payments::run_mechanism(&at_g);
        for (method, alloc, pay) in [
            (
                Method::Mechanism,
                &result.allocation,
                Some(&result.payments),
            ),
            (Method::Current, current, None),
            (Method::Iata, &iata, None),
        ] {
            let eval = evaluate_fixed_allocation(&at_g, alloc)?;
            let zero = vec![0.0; alloc.len()];
            let report = utilities(&at_g, alloc, pay.unwrap_or(&zero))?;
            sweep.push(SweepRow {
                g,
                method,
                social_utility: eval.social_utility,
                social_utility_scaled: eval.social_utility_scaled,
                feasible: eval.feasible,
                allocated: report.allocated,
                mean_payment: report.mean_payment_allocated,
                mean_individual_utility: report.mean_allocated,
                class_utility: report.by_class,
            });
        }
        for (label, slots) in &intervals {
            let mech = interval_welfare(&at_g, &result.allocation, slots.clone());
            let cur = interval_welfare(&at_g, current, slots.clone());
            let base = interval_welfare(&at_g, &iata, slots.clone());
            rows.push(ComparisonRow {
                interval: label.clone(),
                g,
                mechanism: mech,
                current: cur,
                iata: base,
                improvement_vs_current: percent_improvement(mech, cur),
                improvement_vs_iata: percent_improvement(mech, base),
            });
        }
    }
    Ok(ComparisonReport {
        evaluation: EVALUATION_NOTE,
        rows,
        sweep,
    })
}

/// Ensemble means of several reports over the same intervals and g values.
///
/// Welfare and utility columns are averaged over scenarios (class means over
/// the scenarios where the class is present); `allocated` is the ensemble
/// total and `feasible` holds only if it holds everywhere. Percent
/// improvements are recomputed from the averaged welfare.
pub fn aggregate_reports(reports: &[ComparisonReport]) -> Option<ComparisonReport> {
    let first = reports.first()?;
    let same_shape = reports.iter().all(|r| {
        r.rows.len() == first.rows.len()
            && r.sweep.len() == first.sweep.len()
            && r.rows
                .iter()
                .zip(&first.rows)
                .all(|(a, b)| a.interval == b.interval && a.g == b.g)
            && r.sweep
                .iter()
                .zip(&first.sweep)
                .all(|(a, b)| a.g == b.g && a.method == b.method)
    });
    if !same_shape {
        return None;
    }
    let k = reports.len() as f64;
    let mean = |f: &dyn Fn(&ComparisonReport) -> f64| reports.iter().map(f).sum::<f64>() / k;
    let mean_opt = |values: Vec<Option<f64>>| {
        let present: Vec<f64> = values.into_iter().flatten().collect();
        (!present.is_empty()).then(|| present.iter().sum::<f64>() / present.len() as f64)
    };
    let rows = (0..first.rows.len())
        .map(|x| {
            let mech = mean(&|r| r.rows[x].mechanism);
            let cur = mean(&|r| r.rows[x].current);
            let base = mean(&|r| r.rows[x].iata);
            ComparisonRow {
                interval: first.rows[x].interval.clone(),
                g: first.rows[x].g,
                mechanism: mech,
                current: cur,
                iata: base,
                improvement_vs_current: percent_improvement(mech, cur),
                improvement_vs_iata: percent_improvement(mech, base),
            }
        })
        .collect();
    let sweep = (0..first.sweep.len())
        .map(|x| SweepRow {
            g: first.sweep[x].g,
            method: first.sweep[x].method,
            social_utility: mean(&|r| r.sweep[x].social_utility),
            social_utility_scaled: reports
                .iter()
                .map(|r| r.sweep[x].social_utility_scaled)
                .sum(),
            feasible: reports.iter().all(|r| r.sweep[x].feasible),
            allocated: reports.iter().map(|r| r.sweep[x].allocated).sum(),
            mean_payment: mean_opt(reports.iter().map(|r| r.sweep[x].mean_payment).collect()),
            mean_individual_utility: mean_opt(
                reports
                    .iter()
                    .map(|r| r.sweep[x].mean_individual_utility)
                    .collect(),
            ),
            class_utility: CityClass::ALL
                .iter()
                .map(|c| {
                    (
                        *c,
                        mean_opt(
                            reports
                                .iter()
                                .map(|r| r.sweep[x].class_utility[c])
                                .collect(),
                        ),
                    )
                })
                .collect(),
        })
        .collect();
    Some(ComparisonReport {
        evaluation: first.evaluation,
        rows,
        sweep,
    })
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CompareError {
    #[error(transparent)]
    Alloc(#[from] AllocError),
    #[error("invalid congestion cost: {0}")]
    Validation(#[from] ValidationErrors),
}

/// Total displacement of an assignment, rejections counted at `penalty`.
pub fn displacement_cost(requests: &[usize], assignment: &[Option<usize>], penalty: i64) -> i64 {
    requests
        .iter()
        .zip(assignment)
        .map(|(&r, a)| a.map_or(penalty, |j| r.abs_diff(j) as i64))
        .sum()
}

/// The allocation the mechanism chooses, for convenience in reports.
pub fn mechanism_allocation(inst: &Instance) -> Allocation {
    allocator::solve_allocation(inst).0
}
