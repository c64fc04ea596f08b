//! Marginal-contribution payments and utility metrics.
//!
//! Movement `i` pays `(h_i - W_{-i}(A)) / rho_i`, where `h_i` is the optimal
//! affine welfare without `i` and `W_{-i}(A)` is everyone else's weighted
//! value under the chosen allocation minus the full congestion charge.
//! Movements with `rho_i = 0` pay nothing. Both welfare terms are exact
//! scaled integers; the division happens only when reporting.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::allocator::{self, objective_scaled, AllocError, Solved};
use crate::model::{Allocation, CityClass, Instance, MechanismResult};

/// Remoteness weights below this are flagged in reports: the payment divides
/// by them.
pub const LOW_RCOF: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PaymentVector {
    pub values: Vec<f64>,
    /// Scaled numerators `h_i - W_{-i}(A)`; zero when `rho_i = 0`.
    pub numerators: Vec<i64>,
}

/// Optimal scaled welfare of the instance with movement `i` removed.
pub fn welfare_without(inst: &Instance, i: usize) -> Result<i64, AllocError> {
    if i >= inst.num_movements() {
        return Err(AllocError::InvalidMovement(i));
    }
    Ok(allocator::solve(inst).objective_without(i))
}

fn numerator(inst: &Instance, solved: &Solved, i: usize) -> i64 {
    if inst.rcof().get(i) == 0.0 {
        return 0;
    }
    let own = solved
        .allocation
        .slot_of(i)
        .map_or(0, |j| inst.scaled_weight(i, j));
    let others = solved.objective - own;
    solved.objective_without(i) - others
}

fn to_currency(inst: &Instance, i: usize, numerator: i64) -> f64 {
    let rho = inst.rcof().get(i);
    if rho == 0.0 {
        0.0
    } else {
        numerator as f64 / (inst.scale() as f64 * rho)
    }
}

/// Payment of movement `i` when the mechanism chose `alloc`. `alloc` must be
/// optimal for `inst`.
pub fn payment(inst: &Instance, alloc: &Allocation, i: usize) -> Result<f64, AllocError> {
    if i >= inst.num_movements() {
        return Err(AllocError::InvalidMovement(i));
    }
    let got = objective_scaled(inst, alloc)?;
    let solved = allocator::solve(inst);
    if got != solved.objective {
        return Err(AllocError::NotOptimal {
            got,
            optimum: solved.objective,
        });
    }
    if inst.rcof().get(i) == 0.0 {
        return Ok(0.0);
    }
    let own = alloc.slot_of(i).map_or(0, |j| inst.scaled_weight(i, j));
    let numer = solved.objective_without(i) - (got - own);
    Ok(to_currency(inst, i, numer))
}

pub(crate) fn payments_for(inst: &Instance, solved: &Solved) -> PaymentVector {
    let numerators: Vec<i64> = (0..inst.num_movements())
        .map(|i| numerator(inst, solved, i))
        .collect();
    let values = numerators
        .iter()
        .enumerate()
        .map(|(i, &p)| to_currency(inst, i, p))
        .collect();
    PaymentVector { values, numerators }
}

/// Payments for every movement: one full solve plus one re-optimization per
/// movement.
pub fn all_payments(inst: &Instance) -> PaymentVector {
    payments_for(inst, &allocator::solve(inst))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UtilityReport {
    pub utilities: Vec<f64>,
    pub allocated: usize,
    /// Mean utility over allocated movements; absent when none are allocated.
    pub mean_allocated: Option<f64>,
    pub mean_payment_allocated: Option<f64>,
    pub by_class: BTreeMap<CityClass, Option<f64>>,
}

/// `u_i = v_i(A) - p_i` plus the per-class summaries.
pub fn utilities(
    inst: &Instance,
    alloc: &Allocation,
    payments: &[f64],
) -> Result<UtilityReport, AllocError> {
    let m = inst.num_movements();
    for len in [alloc.len(), payments.len()] {
        if len != m {
            return Err(AllocError::Dimension {
                expected: m,
                got: len,
            });
        }
    }
    let n = inst.num_slots();
    if let Some(&j) = alloc.assignment().iter().flatten().find(|&&j| j >= n) {
        return Err(AllocError::UnknownSlot(j));
    }
    let utilities: Vec<f64> = (0..m)
        .map(|i| {
            alloc
                .slot_of(i)
                .map_or(0.0, |j| inst.valuations().get(i, j))
                - payments[i]
        })
        .collect();

    let mean = |items: &mut dyn Iterator<Item = f64>| {
        let (sum, count) = items.fold((0.0, 0usize), |(s, c), x| (s + x, c + 1));
        (count > 0).then(|| sum / count as f64)
    };
    let allocated: Vec<usize> = (0..m).filter(|&i| alloc.slot_of(i).is_some()).collect();
    let mean_allocated = mean(&mut allocated.iter().map(|&i| utilities[i]));
    let mean_payment_allocated = mean(&mut allocated.iter().map(|&i| payments[i]));
    let by_class = CityClass::ALL
        .iter()
        .map(|&class| {
            let mut of_class = allocated
                .iter()
                .filter(|&&i| inst.city_of(i).class == class)
                .map(|&i| utilities[i]);
            (class, mean(&mut of_class))
        })
        .collect();
    Ok(UtilityReport {
        utilities,
        allocated: allocated.len(),
        mean_allocated,
        mean_payment_allocated,
        by_class,
    })
}

/// Allocation, payments and utilities in one pass.
pub fn run_mechanism(inst: &Instance) -> MechanismResult {
    let solved = allocator::solve(inst);
    let pay = payments_for(inst, &solved);
    let n = inst.num_slots();
    let report = utilities(inst, &solved.allocation, &pay.values)
        .expect("solver output matches the instance");
    let scaled_surplus = (0..inst.num_movements())
        .map(|i| {
            let own = solved
                .allocation
                .slot_of(i)
                .map_or(0, |j| inst.scaled_weight(i, j));
            own - pay.numerators[i]
        })
        .collect();
    let slot_congestion = inst
        .slots()
        .iter()
        .zip(solved.allocation.occupancy(n))
        .map(|(s, occ)| occ.saturating_sub(s.threshold))
        .collect();
    let low_rcof = (0..inst.num_movements())
        .filter(|&i| {
            let r = inst.rcof().get(i);
            r > 0.0 && r < LOW_RCOF
        })
        .collect();
    MechanismResult {
        social_utility: solved.objective as f64 / inst.scale() as f64,
        social_utility_scaled: solved.objective,
        allocation: solved.allocation,
        payments: pay.values,
        utilities: report.utilities,
        slot_congestion,
        payment_numerators: pay.numerators,
        scaled_surplus,
        low_rcof,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{validate_instance, MechanismParams, RawInstance};

    fn instance(lambda: f64, g: f64, caps: &[i64], rho: &[f64], vals: &[Vec<f64>]) -> Instance {
        let mut raw = RawInstance::new(MechanismParams {
            lambda,
            g,
            ..MechanismParams::default()
        })
        .city("metro", 70.0, 5_000_000, CityClass::Metro)
        .city("remote", 35.0, 400_000, CityClass::Remote);
        for (j, &c) in caps.iter().enumerate() {
            raw = raw.slot(format!("s{j}"), c);
        }
        for (i, row) in vals.iter().enumerate() {
            let city = if i % 2 == 0 { "metro" } else { "remote" };
            raw = raw.movement(format!("m{i}"), city, "s0", row.clone());
        }
        raw.rcof = Some(rho.to_vec());
        validate_instance(&raw).unwrap()
    }

    #[test]
    fn welfare_without_examples() {
        let one = instance(0.2, 10.0, &[5], &[1.0], &[vec![100.0]]);
        assert_eq!(welfare_without(&one, 0), Ok(0));
        assert_eq!(
            welfare_without(&one, 1),
            Err(AllocError::InvalidMovement(1))
        );

        let two = instance(0.0, 999.0, &[1], &[1.0, 1.0], &[vec![100.0], vec![80.0]]);
        assert_eq!(welfare_without(&two, 0), Ok(80_000_000));
        // Movement 1 loses; deleting it changes nothing.
        assert_eq!(
            welfare_without(&two, 1),
            Ok(allocator::solve(&two).objective)
        );
    }

    #[test]
    fn second_price_structure() {
        // rho1 v1 = 0.8 * 100 = 80 > rho2 v2 = 0.5 * 120 = 60.
        let inst = instance(0.0, 0.0, &[1], &[0.8, 0.5], &[vec![100.0], vec![120.0]]);
        let pay = all_payments(&inst);
        assert!((pay.values[0] - 0.5 * 120.0 / 0.8).abs() < 1e-9);
        assert_eq!(pay.values[1], 0.0);
        let res = run_mechanism(&inst);
        assert_eq!(res.allocation.assignment(), &[Some(0), None]);
        assert!((res.utilities[0] - (100.0 - 75.0)).abs() < 1e-9);
        assert_eq!(res.utilities[1], 0.0);
        let (alloc, _) = allocator::solve_allocation(&inst);
        assert!((payment(&inst, &alloc, 0).unwrap() - 75.0).abs() < 1e-9);
    }

    #[test]
    fn zero_rcof_pays_nothing() {
        let inst = instance(
            0.2,
            5.0,
            &[2],
            &[0.0, 0.7, 0.0],
            &[vec![500.0], vec![10.0], vec![1.0]],
        );
        let pay = all_payments(&inst);
        assert_eq!(pay.values[0], 0.0);
        assert_eq!(pay.values[2], 0.0);
        let all_zero = instance(0.2, 5.0, &[2], &[0.0, 0.0], &[vec![500.0], vec![10.0]]);
        assert!(all_payments(&all_zero).values.iter().all(|&p| p == 0.0));
    }

    #[test]
    fn lone_uncongested_movement_pays_nothing() {
        let inst = instance(0.2, 50.0, &[5], &[0.4], &[vec![100.0]]);
        let pay = all_payments(&inst);
        assert_eq!(pay.values, vec![0.0]);
        assert!(all_payments(&instance(0.2, 1.0, &[1], &[], &[]))
            .values
            .is_empty());
    }

    #[test]
    fn non_optimal_allocation_is_rejected() {
        let inst = instance(0.0, 0.0, &[1], &[1.0, 1.0], &[vec![100.0], vec![80.0]]);
        let worse = Allocation::new(vec![None, Some(0)]);
        assert!(matches!(
            payment(&inst, &worse, 0),
            Err(AllocError::NotOptimal { .. })
        ));
    }

    #[test]
    fn utility_summaries() {
        let inst = instance(0.2, 1.0, &[1], &[1.0, 1.0], &[vec![10.0], vec![20.0]]);
        let none = utilities(&inst, &Allocation::empty(2), &[0.0, 0.0]).unwrap();
        assert_eq!(none.utilities, vec![0.0, 0.0]);
        assert_eq!(none.mean_allocated, None);
        assert_eq!(none.by_class[&CityClass::Remote], None);

        let one = utilities(&inst, &Allocation::new(vec![None, Some(0)]), &[0.0, 15.0]).unwrap();
        assert_eq!(one.mean_allocated, Some(5.0));
        assert_eq!(one.by_class[&CityClass::Remote], Some(5.0));
        assert_eq!(one.by_class[&CityClass::Metro], None);

        assert!(matches!(
            utilities(&inst, &Allocation::empty(2), &[0.0]),
            Err(AllocError::Dimension { .. })
        ));
    }

    #[test]
    fn surplus_and_payment_signs() {
        let inst = instance(
            0.5,
            40.0,
            &[2, 3],
            &[0.9, 0.2, 0.5, 0.7, 0.05],
            &[
                vec![100.0, 30.0],
                vec![400.0, 380.0],
                vec![90.0, 95.0],
                vec![60.0, 10.0],
                vec![1000.0, 0.0],
            ],
        );
        let res = run_mechanism(&inst);
        for i in 0..5 {
            assert!(res.payment_numerators[i] >= 0);
            assert!(res.scaled_surplus[i] >= 0);
            let own = res
                .allocation
                .slot_of(i)
                .map_or(0.0, |j| inst.valuations().get(i, j));
            assert!((res.utilities[i] - (own - res.payments[i])).abs() < 1e-9);
        }
    }
}
