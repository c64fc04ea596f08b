//! Allocation and payments against an enumeration written here from scratch.

use proptest::prelude::*;
use slotalloc::model::{CityClass, Instance, MechanismParams, RawInstance};
use slotalloc::verify::random_instance;
use slotalloc::{run_mechanism, solve_allocation, validate_instance, Allocation};

/// Best scaled welfare over all feasible assignments with movement `skip`
/// held unassigned, and the lexicographically first assignment attaining it
/// (slots ascending, unassigned last).
fn enumerate(inst: &Instance, skip: Option<usize>) -> (i64, Vec<Option<usize>>) {
    let m = inst.num_movements();
    let n = inst.num_slots();
    let mut best: Option<(i64, Vec<Option<usize>>)> = None;
    let mut pick = vec![0usize; m];
    loop {
        let mut load = vec![0u32; n];
        let mut value = 0i64;
        let mut ok = skip.is_none_or(|s| pick[s] == n);
        for (i, &c) in pick.iter().enumerate() {
            if c < n {
                load[c] += 1;
                value += inst.scaled_weight(i, c);
            }
        }
        for (j, s) in inst.slots().iter().enumerate() {
            ok &= load[j] <= s.capacity;
            value -= i64::from(load[j].saturating_sub(s.threshold)) * inst.scaled_g();
        }
        if ok && best.as_ref().is_none_or(|(b, _)| value > *b) {
            best = Some((value, pick.iter().map(|&c| (c < n).then_some(c)).collect()));
        }
        let mut k = m;
        loop {
            if k == 0 {
                return best.expect("the empty assignment is feasible");
            }
            k -= 1;
            pick[k] += 1;
            if pick[k] <= n {
                break;
            }
            pick[k] = 0;
        }
    }
}

fn own_weight(inst: &Instance, alloc: &Allocation, i: usize) -> i64 {
    alloc.slot_of(i).map_or(0, |j| inst.scaled_weight(i, j))
}

fn unit_weight_instance(capacity: i64, lambda: f64, g: f64, values: &[f64]) -> Instance {
    let mut raw = RawInstance::new(MechanismParams {
        lambda,
        g,
        ..MechanismParams::default()
    })
    .slot("s0", capacity)
    .city("c0", 40.0, 800_000, CityClass::Remote);
    for (i, &v) in values.iter().enumerate() {
        raw = raw.movement(format!("m{i}"), "c0", "s0", vec![v]);
    }
    validate_instance(&raw.with_rcof(vec![1.0; values.len()])).unwrap()
}

#[test]
fn congestion_externality_is_charged() {
    // C = 2, lambda = 0.5, so one seat is free and the second costs g = 30.
    let inst = unit_weight_instance(2, 0.5, 30.0, &[100.0, 50.0]);
    let res = run_mechanism(&inst);
    assert_eq!(res.allocation.assignment(), &[Some(0), Some(0)]);
    assert!((res.social_utility - 120.0).abs() < 1e-9);
    // Each one's presence pushes the other into the congested seat.
    assert!((res.payments[0] - 30.0).abs() < 1e-9);
    assert!((res.payments[1] - 30.0).abs() < 1e-9);
    assert!((res.utilities[1] - 20.0).abs() < 1e-9);

    let inst = unit_weight_instance(2, 0.5, 30.0, &[100.0, 20.0]);
    let res = run_mechanism(&inst);
    assert_eq!(res.allocation.assignment(), &[Some(0), None]);
    assert!((res.payments[0] - 20.0).abs() < 1e-9);
    assert_eq!(res.payments[1], 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn solver_matches_enumeration(seed in any::<u64>()) {
        let inst = random_instance(seed);
        let (best, first) = enumerate(&inst, None);
        let res = run_mechanism(&inst);
        prop_assert_eq!(res.social_utility_scaled, best);
        prop_assert_eq!(res.allocation.assignment(), &first[..]);
        prop_assert_eq!(solve_allocation(&inst).0, res.allocation);
    }

    #[test]
    fn payments_are_clarke_pivots(seed in any::<u64>()) {
        let inst = random_instance(seed);
        let res = run_mechanism(&inst);
        for i in 0..inst.num_movements() {
            let rho = inst.rcof().get(i);
            let expected = if rho == 0.0 {
                0
            } else {
                enumerate(&inst, Some(i)).0 - (res.social_utility_scaled - own_weight(&inst, &res.allocation, i))
            };
            prop_assert_eq!(res.payment_numerators[i], expected, "movement {}", i);
            prop_assert!(expected >= 0);
            prop_assert!(own_weight(&inst, &res.allocation, i) - expected >= 0);
            if rho > 0.0 {
                let p = expected as f64 / (inst.scale() as f64 * rho);
                prop_assert!((res.payments[i] - p).abs() <= 1e-9 * p.abs().max(1.0));
            } else {
                prop_assert_eq!(res.payments[i], 0.0);
            }
        }
    }

    #[test]
    fn no_report_beats_the_truth(
        seed in any::<u64>(),
        who in any::<prop::sample::Index>(),
        report in prop::collection::vec(0.0f64..300.0, 4),
    ) {
        let inst = random_instance(seed);
        let i = who.index(inst.num_movements());
        let report = &report[..inst.num_slots()];
        let truth = run_mechanism(&inst);
        let honest = own_weight(&inst, &truth.allocation, i) - truth.payment_numerators[i];
        let lied = inst.with_reported_valuations(i, report).unwrap();
        let res = run_mechanism(&lied);
        let gained = own_weight(&inst, &res.allocation, i) - res.payment_numerators[i];
        prop_assert!(gained <= honest, "report {:?} gains {} over {}", report, gained, honest);
    }

    #[test]
    fn welfare_never_rises_with_g(seed in any::<u64>(), step in 0.5f64..200.0) {
        let inst = random_instance(seed);
        let mut last = i64::MAX;
        for k in 0..8 {
            let w = run_mechanism(&inst.with_g(step * k as f64).unwrap()).social_utility_scaled;
            prop_assert!(w <= last);
            last = w;
        }
    }
}
