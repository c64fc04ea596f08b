//! Randomized checks of the mechanism's guarantees on small instances.
//!
//! Every check works on exact scaled integers. For movement `i` with
//! allocation `A`, the scaled surplus is `w_i(A) - P_i` where `P_i` is the
//! payment numerator; truthfulness means no report beats the truthful surplus
//! when evaluated at the true weights.
//!
//! Instances are drawn from a per-trial seed, so a counterexample can be
//! replayed with [`random_instance`] or from its serialized instance.

use serde::Serialize;

use crate::allocator::{
    self, brute_force_allocate, build_bmatching_graph, dummy_edge_weight, objective_scaled,
};
use crate::model::{
    validate_instance, Allocation, CityClass, Instance, MechanismParams, RawInstance,
};
use crate::payments::run_mechanism;
use crate::scenario::rng::SeededRng;

/// Payment rule under test. `PayAsBid` is a deliberately broken rule used to
/// check that the harness catches violations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PaymentRule {
    Marginal,
    PayAsBid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    OracleEquivalence,
    Dsic,
    IndividualRationality,
    PaymentSign,
    GMonotonicity,
}

impl Suite {
    pub const ALL: [Suite; 5] = [
        Suite::OracleEquivalence,
        Suite::Dsic,
        Suite::IndividualRationality,
        Suite::PaymentSign,
        Suite::GMonotonicity,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Suite::OracleEquivalence => "oracle-equivalence",
            Suite::Dsic => "dsic",
            Suite::IndividualRationality => "individual-rationality",
            Suite::PaymentSign => "payment-sign",
            Suite::GMonotonicity => "g-monotonicity",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyConfig {
    pub trials: usize,
    pub misreports: usize,
    pub seed: u64,
    pub rule: PaymentRule,
    /// Points on the increasing congestion-cost grid.
    pub g_points: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            trials: 500,
            misreports: 50,
            seed: 0,
            rule: PaymentRule::Marginal,
            g_points: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub suite: Suite,
    pub trial: usize,
    /// Seed that regenerates the instance via [`random_instance`].
    pub instance_seed: u64,
    pub movement: Option<usize>,
    pub detail: String,
    pub misreport: Option<Vec<f64>>,
    pub instance: RawInstance,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub checks: u64,
    pub violations: Vec<Violation>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub config: VerifyConfig,
    pub suites: Vec<SuiteReport>,
}

impl VerifyReport {
    pub fn violation_count(&self) -> usize {
        self.suites.iter().map(|s| s.violations.len()).sum()
    }

    pub fn is_clean(&self) -> bool {
        self.violation_count() == 0
    }
}

/// Seed of the instance used in `trial`.
pub fn trial_seed(seed: u64, trial: usize) -> u64 {
    SeededRng::fork(seed, trial as u64 + 1).next_u64()
}

/// Random instance with `m <= 6`, `n <= 4`, capacities `<= 3`, `lambda` in
/// `{0, 0.2, 0.5, 1}` and `g` zero, small or large; about one instance in
/// seven carries explicit remoteness weights, some of them zero.
pub fn random_instance(seed: u64) -> Instance {
    let mut rng = SeededRng::new(seed);
    let m = 1 + rng.below(6) as usize;
    let n = 1 + rng.below(4) as usize;
    let lambda = *rng.pick(&[0.0, 0.2, 0.5, 1.0]);
    let g = match rng.below(3) {
        0 => 0.0,
        1 => (rng.range(0.5, 20.0) * 100.0).round() / 100.0,
        _ => (rng.range(200.0, 2000.0) * 100.0).round() / 100.0,
    };
    let mut raw = RawInstance::new(MechanismParams {
        lambda,
        g,
        ..MechanismParams::default()
    });
    for j in 0..n {
        raw = raw.slot(format!("s{j}"), 1 + rng.below(3) as i64);
    }
    let cities = 1 + rng.below(3) as usize;
    for c in 0..cities {
        let class = *rng.pick(&CityClass::ALL);
        let spi = (rng.range(30.0, 80.0) * 10.0).round() / 10.0;
        let pop = 100_000 + rng.below(20_000_000) as i64;
        raw = raw.city(format!("c{c}"), spi, pop, class);
    }
    for i in 0..m {
        let vals = (0..n)
            .map(|_| {
                if rng.below(10) == 0 {
                    0.0
                } else {
                    (rng.range(0.0, 100.0) * 100.0).round() / 100.0
                }
            })
            .collect();
        let city = format!("c{}", rng.below(cities as u64));
        let req = format!("s{}", rng.below(n as u64));
        raw = raw.movement(format!("m{i}"), city, req, vals);
        if rng.below(4) == 0 {
            raw.movements[i].alpha = Some((rng.range(0.0, 1.0) * 100.0).round() / 100.0);
        }
    }
    if rng.below(7) == 0 {
        let rho = (0..m)
            .map(|_| {
                if rng.below(3) == 0 {
                    0.0
                } else {
                    (rng.range(0.0, 1.0) * 1000.0).round() / 1000.0
                }
            })
            .collect();
        raw = raw.with_rcof(rho);
    }
    validate_instance(&raw).expect("generator respects every invariant")
}

/// Serializable form of `inst` with its remoteness weights pinned.
pub fn replayable(inst: &Instance) -> RawInstance {
    let mut raw = inst.to_raw();
    raw.rcof = Some(inst.rcof().values().to_vec());
    raw
}

/// Payment numerator of every movement under `rule`.
pub fn numerators(
    inst: &Instance,
    alloc: &Allocation,
    mechanism: &[i64],
    rule: PaymentRule,
) -> Vec<i64> {
    match rule {
        PaymentRule::Marginal => mechanism.to_vec(),
        PaymentRule::PayAsBid => (0..inst.num_movements())
            .map(|i| alloc.slot_of(i).map_or(0, |j| inst.scaled_weight(i, j)))
            .collect(),
    }
}

/// Compares the solver with exhaustive search. Returns a description of the
/// first disagreement.
pub fn check_oracle(inst: &Instance) -> Result<(), String> {
    let solved = allocator::solve(inst);
    let brute = brute_force_allocate(inst).map_err(|e| e.to_string())?;
    let brute_obj = objective_scaled(inst, &brute).map_err(|e| e.to_string())?;
    if solved.objective != brute_obj {
        return Err(format!(
            "solver objective {} != enumeration {}",
            solved.objective, brute_obj
        ));
    }
    if solved.allocation != brute {
        return Err(format!(
            "tie-break differs: solver {:?}, enumeration {:?}",
            solved.allocation.assignment(),
            brute.assignment()
        ));
    }
    let graph = build_bmatching_graph(inst);
    for j in 0..inst.num_slots() {
        dummy_edge_weight(&graph, &solved.bmatching, j).map_err(|e| e.to_string())?;
    }
    let offset: i64 = (0..inst.num_slots())
        .map(|j| i64::from(graph.dummy_bounds[j]) * graph.dummy_edges[j])
        .sum();
    if solved.bmatching.objective != solved.objective + offset {
        return Err(format!(
            "b-matching objective {} != allocation objective {} + {}",
            solved.bmatching.objective, solved.objective, offset
        ));
    }
    Ok(())
}

/// Optimal scaled welfare without movement `i`, by enumeration.
fn welfare_without_oracle(inst: &Instance, i: usize) -> i64 {
    let sub = inst
        .without_movement(i)
        .expect("sub-instance of a valid instance");
    let alloc = brute_force_allocate(&sub).expect("small instance");
    objective_scaled(&sub, &alloc).expect("oracle output is feasible")
}

/// A non-negative misreport of `truth`, one of four kinds: rescaling by
/// `c in [0, 5]`, per-slot noise, all zeros, or two slots swapped.
pub fn misreport(truth: &[f64], rng: &mut SeededRng) -> Vec<f64> {
    let n = truth.len();
    match rng.below(4) {
        0 => {
            let c = rng.range(0.0, 5.0);
            truth.iter().map(|v| v * c).collect()
        }
        1 => truth
            .iter()
            .map(|v| (v + rng.range(-50.0, 50.0)).max(0.0))
            .collect(),
        2 => vec![0.0; n],
        _ => {
            let mut out = truth.to_vec();
            if n >= 2 {
                let a = rng.below(n as u64) as usize;
                let b = (a + 1 + rng.below(n as u64 - 1) as usize) % n;
                out.swap(a, b);
            }
            out
        }
    }
}

struct Trial<'a> {
    cfg: &'a VerifyConfig,
    trial: usize,
    seed: u64,
    inst: Instance,
}

impl Trial<'_> {
    fn violation(
        &self,
        suite: Suite,
        movement: Option<usize>,
        detail: String,
        misreport: Option<Vec<f64>>,
    ) -> Violation {
        Violation {
            suite,
            trial: self.trial,
            instance_seed: self.seed,
            movement,
            detail,
            misreport,
            instance: replayable(&self.inst),
        }
    }
}

fn run_oracle(t: &Trial, out: &mut SuiteReport) {
    out.checks += 1;
    if let Err(detail) = check_oracle(&t.inst) {
        out.violations
            .push(t.violation(Suite::OracleEquivalence, None, detail, None));
    }
}

fn run_dsic(t: &Trial, out: &mut SuiteReport) {
    let inst = &t.inst;
    let truth = run_mechanism(inst);
    let paid = numerators(
        inst,
        &truth.allocation,
        &truth.payment_numerators,
        t.cfg.rule,
    );
    let mut rng = SeededRng::fork(t.seed, 0xD51C);
    for i in 0..inst.num_movements() {
        let own = truth
            .allocation
            .slot_of(i)
            .map_or(0, |j| inst.scaled_weight(i, j));
        let truthful = own - paid[i];
        for _ in 0..t.cfg.misreports {
            let report = misreport(inst.valuations().row(i), &mut rng);
            out.checks += 1;
            let lied = inst
                .with_reported_valuations(i, &report)
                .expect("reports are non-negative and finite");
            let res = run_mechanism(&lied);
            let paid_lie = numerators(&lied, &res.allocation, &res.payment_numerators, t.cfg.rule);
            let gained = res
                .allocation
                .slot_of(i)
                .map_or(0, |j| inst.scaled_weight(i, j))
                - paid_lie[i];
            if gained > truthful {
                out.violations.push(t.violation(
                    Suite::Dsic,
                    Some(i),
                    format!("misreport raises scaled utility from {truthful} to {gained}"),
                    Some(report),
                ));
                break;
            }
        }
    }
}

fn run_ir(t: &Trial, out: &mut SuiteReport) {
    let inst = &t.inst;
    let res = run_mechanism(inst);
    let paid = numerators(inst, &res.allocation, &res.payment_numerators, t.cfg.rule);
    for (i, &p) in paid.iter().enumerate() {
        out.checks += 1;
        let own = res
            .allocation
            .slot_of(i)
            .map_or(0, |j| inst.scaled_weight(i, j));
        if own - p < 0 {
            out.violations.push(t.violation(
                Suite::IndividualRationality,
                Some(i),
                format!("scaled utility {} < 0", own - p),
                None,
            ));
        }
    }
}

fn run_sign(t: &Trial, out: &mut SuiteReport) {
    let inst = &t.inst;
    let res = run_mechanism(inst);
    let paid = numerators(inst, &res.allocation, &res.payment_numerators, t.cfg.rule);
    for (i, &numer) in paid.iter().enumerate() {
        out.checks += 1;
        let rho = inst.rcof().get(i);
        let detail = if numer < 0 || res.payments[i] < 0.0 {
            Some(format!(
                "negative payment {} (numerator {})",
                res.payments[i], numer
            ))
        } else if rho == 0.0 && (res.payments[i] != 0.0 || numer != 0) {
            Some(format!("zero-weight movement pays {}", res.payments[i]))
        } else if t.cfg.rule == PaymentRule::Marginal && rho > 0.0 {
            let own = res
                .allocation
                .slot_of(i)
                .map_or(0, |j| inst.scaled_weight(i, j));
            let expected = welfare_without_oracle(inst, i) - (res.social_utility_scaled - own);
            (expected != numer).then(|| format!("numerator {} != enumerated {}", numer, expected))
        } else {
            None
        };
        if let Some(d) = detail {
            out.violations
                .push(t.violation(Suite::PaymentSign, Some(i), d, None));
        }
    }
}

fn run_g_monotonicity(t: &Trial, out: &mut SuiteReport) {
    let mut rng = SeededRng::fork(t.seed, 0x6A11);
    let step = rng.range(1.0, 50.0);
    let mut previous: Option<(f64, i64)> = None;
    for k in 0..t.cfg.g_points {
        let g = step * k as f64;
        let at_g = t.inst.with_g(g).expect("non-negative g");
        let w = allocator::solve(&at_g).objective;
        out.checks += 1;
        if let Some((g0, w0)) = previous {
            if w > w0 {
                out.violations.push(t.violation(
                    Suite::GMonotonicity,
                    None,
                    format!("welfare rises from {w0} at g={g0} to {w} at g={g}"),
                    None,
                ));
                return;
            }
        }
        previous = Some((g, w));
    }
}

/// One suite over `cfg.trials` instances.
pub fn run_suite(suite: Suite, cfg: &VerifyConfig) -> SuiteReport {
    let mut out = SuiteReport {
        suite,
        checks: 0,
        violations: Vec::new(),
    };
    for trial in 0..cfg.trials {
        let seed = trial_seed(cfg.seed, trial);
        let t = Trial {
            cfg,
            trial,
            seed,
            inst: random_instance(seed),
        };
        match suite {
            Suite::OracleEquivalence => run_oracle(&t, &mut out),
            Suite::Dsic => run_dsic(&t, &mut out),
            Suite::IndividualRationality => run_ir(&t, &mut out),
            Suite::PaymentSign => run_sign(&t, &mut out),
            Suite::GMonotonicity => run_g_monotonicity(&t, &mut out),
        }
    }
    log::info!(
        "{}: {} checks, {} violations",
        suite.as_str(),
        out.checks,
        out.violations.len()
    );
    out
}

pub fn verify(cfg: &VerifyConfig) -> VerifyReport {
    VerifyReport {
        config: cfg.clone(),
        suites: Suite::ALL.iter().map(|&s| run_suite(s, cfg)).collect(),
    }
}
