//! Welfare-maximizing allocation.
//!
//! The allocation integer program maximizes `sum rho_i v_ij x_ij - g sum e_j`
//! subject to slot capacities and one slot per movement. It is solved exactly
//! as a maximum-weight b-matching: movements and one congestion dummy per
//! slot on the left, slots on the right. The dummy of slot `j` may occupy up
//! to `C_j - T_j` places at weight `g` each, so every movement admitted beyond
//! the threshold displaces a dummy unit and costs `g`.

use thiserror::Error;

use crate::flow::{ArcSpec, Transport};
use crate::model::{Allocation, Instance};

/// Enumeration limit for [`brute_force_allocate`]: `(n + 1)^m` assignments.
pub const BRUTE_FORCE_LIMIT: u128 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AllocError {
    #[error("unknown slot id {0}")]
    UnknownSlot(usize),
    #[error("invalid movement id {0}")]
    InvalidMovement(usize),
    #[error("allocation covers {got} movements, instance has {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("slot {slot} holds {occupancy} movements, capacity {capacity}")]
    OverCapacity {
        slot: usize,
        occupancy: u32,
        capacity: u32,
    },
    #[error("instance too large for enumeration: ({n}+1)^{m} > {limit}", limit = BRUTE_FORCE_LIMIT)]
    TooLarge { m: usize, n: usize },
    #[error("slot {slot}: dummy edge carries {actual}, optimal structure requires {expected}")]
    DummyMismatch {
        slot: usize,
        expected: u32,
        actual: u32,
    },
    #[error("allocation is not optimal: objective {got}, optimum {optimum} (scaled)")]
    NotOptimal { got: i64, optimum: i64 },
}

/// Bipartite graph of the b-matching reduction.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowGraph {
    movements: usize,
    slots: usize,
    /// Movement-to-slot edge weights, row-major by `(movement, slot)`.
    pub movement_edges: Vec<i64>,
    /// Weight of the edge between slot `j`'s dummy and slot `j`.
    pub dummy_edges: Vec<i64>,
    pub movement_bounds: Vec<u32>,
    pub slot_bounds: Vec<u32>,
    pub dummy_bounds: Vec<u32>,
}

impl FlowGraph {
    pub fn movement_count(&self) -> usize {
        self.movements
    }

    pub fn slot_count(&self) -> usize {
        self.slots
    }

    /// Left side: movements followed by one dummy per slot.
    pub fn left_count(&self) -> usize {
        self.movements + self.slots
    }

    pub fn right_count(&self) -> usize {
        self.slots
    }

    pub fn movement_edge(&self, i: usize, j: usize) -> i64 {
        self.movement_edges[i * self.slots + j]
    }

    /// Congestion-free capacity implied by the degree bounds.
    pub fn threshold(&self, j: usize) -> u32 {
        self.slot_bounds[j] - self.dummy_bounds[j]
    }
}

pub fn build_bmatching_graph(inst: &Instance) -> FlowGraph {
    let m = inst.num_movements();
    let n = inst.num_slots();
    let movement_edges = (0..m)
        .flat_map(|i| inst.scaled_weight_row(i).iter().copied())
        .collect();
    FlowGraph {
        movements: m,
        slots: n,
        movement_edges,
        dummy_edges: vec![inst.scaled_g(); n],
        movement_bounds: vec![1; m],
        slot_bounds: inst.slots().iter().map(|s| s.capacity).collect(),
        dummy_bounds: inst.slots().iter().map(|s| s.congestion_prone()).collect(),
    }
}

/// Integral edge weights of a b-matching on a [`FlowGraph`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BMatchingSolution {
    slots: usize,
    pub movement_edges: Vec<u32>,
    pub dummy_edges: Vec<u32>,
    /// `sum w_ij y_ij + sum g y_(t_j, j)`, scaled.
    pub objective: i64,
}

impl BMatchingSolution {
    pub fn new(graph: &FlowGraph, movement_edges: Vec<u32>, dummy_edges: Vec<u32>) -> Self {
        let objective = movement_edges
            .iter()
            .zip(&graph.movement_edges)
            .chain(dummy_edges.iter().zip(&graph.dummy_edges))
            .map(|(&y, &w)| i64::from(y) * w)
            .sum();
        Self {
            slots: graph.slots,
            movement_edges,
            dummy_edges,
            objective,
        }
    }

    pub fn movement_edge(&self, i: usize, j: usize) -> u32 {
        self.movement_edges[i * self.slots + j]
    }

    /// Total movement weight on slot `j`.
    pub fn occupancy(&self, j: usize) -> u32 {
        self.movement_edges
            .iter()
            .skip(j)
            .step_by(self.slots.max(1))
            .sum()
    }

    /// Checks every degree bound of `graph`.
    pub fn is_feasible(&self, graph: &FlowGraph) -> bool {
        let n = graph.slots;
        let rows_ok = (0..graph.movements).all(|i| {
            let row: u32 = self.movement_edges[i * n..(i + 1) * n].iter().sum();
            row <= graph.movement_bounds[i]
        });
        let dummies_ok = self
            .dummy_edges
            .iter()
            .zip(&graph.dummy_bounds)
            .all(|(y, b)| y <= b);
        let slots_ok =
            (0..n).all(|j| self.occupancy(j) + self.dummy_edges[j] <= graph.slot_bounds[j]);
        rows_ok && dummies_ok && slots_ok
    }
}

/// `max(occupancy_j - T_j, 0)`.
pub fn congestion_level(inst: &Instance, alloc: &Allocation, j: usize) -> Result<u32, AllocError> {
    let slot = inst.slots().get(j).ok_or(AllocError::UnknownSlot(j))?;
    let occ = alloc.assignment().iter().filter(|a| **a == Some(j)).count() as u32;
    Ok(occ.saturating_sub(slot.threshold))
}

/// Verifies capacity and index constraints.
pub fn check_feasible(inst: &Instance, alloc: &Allocation) -> Result<(), AllocError> {
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
    for (slot, occ) in inst.slots().iter().zip(alloc.occupancy(n)) {
        if occ > slot.capacity {
            return Err(AllocError::OverCapacity {
                slot: slot.id,
                occupancy: occ,
                capacity: slot.capacity,
            });
        }
    }
    Ok(())
}

/// Objective in scaled integers, without the feasibility check. Movements
/// assigned to unknown slots must have been rejected by the caller.
pub(crate) fn objective_unchecked(inst: &Instance, alloc: &Allocation) -> i64 {
    let n = inst.num_slots();
    let value: i64 = alloc
        .assignment()
        .iter()
        .enumerate()
        .filter_map(|(i, a)| a.map(|j| inst.scaled_weight(i, j)))
        .sum();
    let congestion: i64 = inst
        .slots()
        .iter()
        .zip(alloc.occupancy(n))
        .map(|(s, occ)| i64::from(occ.saturating_sub(s.threshold)))
        .sum();
    value - congestion * inst.scaled_g()
}

/// Affine welfare `sum rho_i v_ij x_ij - g sum e_j` in scaled units.
pub fn objective_scaled(inst: &Instance, alloc: &Allocation) -> Result<i64, AllocError> {
    check_feasible(inst, alloc)?;
    Ok(objective_unchecked(inst, alloc))
}

/// Affine welfare in currency units.
pub fn objective_value(inst: &Instance, alloc: &Allocation) -> Result<f64, AllocError> {
    Ok(objective_scaled(inst, alloc)? as f64 / inst.scale() as f64)
}

/// A solved allocation together with the flow state it came from.
#[derive(Debug, Clone)]
pub struct Solved {
    pub allocation: Allocation,
    pub bmatching: BMatchingSolution,
    /// Optimal affine welfare, scaled.
    pub objective: i64,
    network: Transport,
    dummy_offset: i64,
}

impl Solved {
    /// Optimal scaled welfare of the instance with movement `i` removed.
    pub(crate) fn objective_without(&self, i: usize) -> i64 {
        -self.network.cost_without(i) - self.dummy_offset
    }
}

/// Optimal allocation by maximum-weight b-matching.
///
/// Among optimal allocations the lexicographically smallest assignment
/// vector is returned, comparing movements in id order and slots by id with
/// "unassigned" after every slot.
pub fn solve_allocation(inst: &Instance) -> (Allocation, BMatchingSolution) {
    let s = solve(inst);
    (s.allocation, s.bmatching)
}

pub fn solve(inst: &Instance) -> Solved {
    let graph = build_bmatching_graph(inst);
    let m = graph.movements;
    let n = graph.slots;

    let mut supply: Vec<i64> = vec![1; m];
    supply.extend(graph.dummy_bounds.iter().map(|&b| i64::from(b)));
    let capacity: Vec<i64> = graph.slot_bounds.iter().map(|&c| i64::from(c)).collect();
    let mut arcs: Vec<ArcSpec> = Vec::with_capacity(m * n + n);
    for i in 0..m {
        for j in 0..n {
            arcs.push((i, j, 1, -graph.movement_edge(i, j)));
        }
    }
    for j in 0..n {
        arcs.push((
            m + j,
            j,
            i64::from(graph.dummy_bounds[j]),
            -graph.dummy_edges[j],
        ));
    }
    let mut network = Transport::solve(&supply, &capacity, &arcs, &vec![0; m + n]);
    let ranked: Vec<usize> = (0..m).collect();
    network.canonicalize(&ranked);

    let assignment: Vec<Option<usize>> = (0..m).map(|i| network.target_of(i)).collect();
    let allocation = Allocation::new(assignment);
    let mut movement_edges = vec![0u32; m * n];
    for (i, a) in allocation.assignment().iter().enumerate() {
        if let Some(j) = a {
            movement_edges[i * n + j] = 1;
        }
    }
    assert!(
        (0..m)
            .all(|i| (0..n)
                .all(|j| network.flow_between(i, j) == i64::from(movement_edges[i * n + j]))),
        "movement edges must be 0/1"
    );
    // With g = 0 the dummy edges are weightless; fill them so the solution has
    // the canonical structure.
    let occupancy = allocation.occupancy(n);
    let dummy_edges: Vec<u32> = (0..n)
        .map(|j| {
            let flowed = network.flow_between(m + j, j) as u32;
            if graph.dummy_edges[j] == 0 {
                (graph.slot_bounds[j] - occupancy[j]).min(graph.dummy_bounds[j])
            } else {
                flowed
            }
        })
        .collect();
    let bmatching = BMatchingSolution::new(&graph, movement_edges, dummy_edges);
    debug_assert!(bmatching.is_feasible(&graph));

    let dummy_offset: i64 = graph
        .dummy_bounds
        .iter()
        .zip(&graph.dummy_edges)
        .map(|(&b, &g)| i64::from(b) * g)
        .sum();
    let objective = -network.total_cost() - dummy_offset;
    debug_assert_eq!(objective, objective_unchecked(inst, &allocation));
    debug_assert_eq!(objective, bmatching.objective - dummy_offset);
    Solved {
        allocation,
        bmatching,
        objective,
        network,
        dummy_offset,
    }
}

/// Dummy-edge weight an optimal b-matching must carry on slot `j`:
/// `C_j - occupancy` when the slot is congested, else `C_j - T_j`. Errors if
/// `solution` disagrees.
pub fn dummy_edge_weight(
    graph: &FlowGraph,
    solution: &BMatchingSolution,
    j: usize,
) -> Result<u32, AllocError> {
    if j >= graph.slots {
        return Err(AllocError::UnknownSlot(j));
    }
    let capacity = graph.slot_bounds[j];
    let threshold = graph.threshold(j);
    let occupancy = solution.occupancy(j);
    if occupancy > capacity {
        return Err(AllocError::OverCapacity {
            slot: j,
            occupancy,
            capacity,
        });
    }
    let expected = if occupancy > threshold {
        capacity - occupancy
    } else {
        capacity - threshold
    };
    let actual = solution.dummy_edges[j];
    if actual != expected {
        return Err(AllocError::DummyMismatch {
            slot: j,
            expected,
            actual,
        });
    }
    Ok(expected)
}

/// Exhaustive search over every assignment, for small instances.
///
/// Candidates are visited in lexicographic order (slot ids ascending,
/// unassigned last) and only strict improvements replace the incumbent, so
/// ties resolve exactly as in [`solve_allocation`].
pub fn brute_force_allocate(inst: &Instance) -> Result<Allocation, AllocError> {
    let m = inst.num_movements();
    let n = inst.num_slots();
    let size = (n as u128 + 1).checked_pow(m as u32);
    if size.is_none_or(|s| s > BRUTE_FORCE_LIMIT) {
        return Err(AllocError::TooLarge { m, n });
    }
    let capacity: Vec<u32> = inst.slots().iter().map(|s| s.capacity).collect();
    let threshold: Vec<u32> = inst.slots().iter().map(|s| s.threshold).collect();
    let g = inst.scaled_g();

    let mut choice = vec![0usize; m];
    let mut load = vec![0u32; n];
    let mut best: Option<(i64, Vec<usize>)> = None;
    loop {
        load.iter_mut().for_each(|l| *l = 0);
        let mut value = 0i64;
        for (i, &c) in choice.iter().enumerate() {
            if c < n {
                load[c] += 1;
                value += inst.scaled_weight(i, c);
            }
        }
        if load.iter().zip(&capacity).all(|(l, c)| l <= c) {
            let congestion: i64 = load
                .iter()
                .zip(&threshold)
                .map(|(l, t)| i64::from(l.saturating_sub(*t)))
                .sum();
            let objective = value - congestion * g;
            if best.as_ref().is_none_or(|b| objective > b.0) {
                best = Some((objective, choice.clone()));
            }
        }
        // Odometer step, movement 0 most significant.
        let mut k = m;
        loop {
            if k == 0 {
                let (_, c) = best.expect("the empty allocation is always feasible");
                return Ok(Allocation::new(
                    c.into_iter().map(|c| (c < n).then_some(c)).collect(),
                ));
            }
            k -= 1;
            if choice[k] < n {
                choice[k] += 1;
                choice[k + 1..].iter_mut().for_each(|c| *c = 0);
                break;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{validate_instance, CityClass, MechanismParams, RawInstance};

    /// Instance whose movements all have weight exactly 1, so `rho * v = v`.
    pub(crate) fn unit_rho(lambda: f64, g: f64, capacities: &[i64], vals: &[Vec<f64>]) -> Instance {
        let mut raw = RawInstance::new(MechanismParams {
            lambda,
            g,
            ..MechanismParams::default()
        })
        .city("c", 50.0, 1000, CityClass::Metro);
        for (j, &c) in capacities.iter().enumerate() {
            raw = raw.slot(format!("s{j}"), c);
        }
        for (i, row) in vals.iter().enumerate() {
            raw = raw.movement(format!("m{i}"), "c", "s0", row.clone());
        }
        raw.rcof = Some(vec![1.0; vals.len()]);
        validate_instance(&raw).unwrap()
    }

    fn alloc(a: &[Option<usize>]) -> Allocation {
        Allocation::new(a.to_vec())
    }

    #[test]
    fn congestion_examples() {
        let inst = unit_rho(0.2, 1.0, &[10], &vec![vec![1.0]; 9]);
        assert_eq!(inst.slots()[0].threshold, 8);
        assert_eq!(congestion_level(&inst, &alloc(&[Some(0); 9]), 0), Ok(1));
        let mut eight = vec![Some(0); 8];
        eight.push(None);
        assert_eq!(congestion_level(&inst, &alloc(&eight), 0), Ok(0));
        assert_eq!(congestion_level(&inst, &Allocation::empty(9), 0), Ok(0));
        assert_eq!(
            congestion_level(&inst, &Allocation::empty(9), 3),
            Err(AllocError::UnknownSlot(3))
        );
    }

    #[test]
    fn objective_examples() {
        let inst = unit_rho(0.2, 30.0, &[5], &[vec![100.0]]);
        assert_eq!(objective_value(&inst, &Allocation::empty(1)), Ok(0.0));
        assert_eq!(objective_value(&inst, &alloc(&[Some(0)])), Ok(100.0));
        // C = 2, lambda = 0.5 gives T = 1: 100 + 80 - 1 * 30.
        let inst = unit_rho(0.5, 30.0, &[2], &[vec![100.0], vec![80.0]]);
        assert_eq!(inst.slots()[0].threshold, 1);
        assert_eq!(
            objective_value(&inst, &alloc(&[Some(0), Some(0)])),
            Ok(150.0)
        );
    }

    #[test]
    fn objective_rejects_infeasible() {
        let inst = unit_rho(0.0, 0.0, &[1], &[vec![1.0], vec![1.0]]);
        assert!(matches!(
            objective_value(&inst, &alloc(&[Some(0), Some(0)])),
            Err(AllocError::OverCapacity { slot: 0, .. })
        ));
        assert_eq!(
            objective_value(&inst, &alloc(&[Some(0)])),
            Err(AllocError::Dimension {
                expected: 2,
                got: 1
            })
        );
    }

    #[test]
    fn graph_shape() {
        let inst = unit_rho(
            0.2,
            0.0,
            &[10, 3, 4],
            &[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]],
        );
        let g = build_bmatching_graph(&inst);
        assert_eq!(g.left_count(), 5);
        assert_eq!(g.right_count(), 3);
        assert_eq!(g.movement_edges.len(), 6);
        assert_eq!(g.dummy_edges.len(), 3);
        assert_eq!(g.dummy_bounds[0], 2);
        assert!(g.dummy_edges.iter().all(|&w| w == 0));
        assert_eq!(g.movement_edge(1, 2), 6_000_000);
    }

    #[test]
    fn solve_examples() {
        let inst = unit_rho(0.2, 50.0, &[5], &[vec![100.0]]);
        let (a, _) = solve_allocation(&inst);
        assert_eq!(a.assignment(), &[Some(0)]);
        assert_eq!(objective_value(&inst, &a), Ok(100.0));

        // C = 1, T = 0: admitting anyone costs g = 30.
        let inst = unit_rho(1.0, 30.0, &[1], &[vec![100.0], vec![80.0]]);
        let (a, _) = solve_allocation(&inst);
        assert_eq!(a.assignment(), &[Some(0), None]);
        assert_eq!(objective_value(&inst, &a), Ok(70.0));

        let inst = unit_rho(0.0, 30.0, &[1], &[vec![50.0], vec![50.0]]);
        let (a, _) = solve_allocation(&inst);
        assert_eq!(a.assignment(), &[Some(0), None]);
    }

    #[test]
    fn two_by_one_enumeration() {
        // All four assignments, by hand: {} -> 0, {0} -> 70, {1} -> 50, {0,1} infeasible.
        let inst = unit_rho(1.0, 30.0, &[1], &[vec![100.0], vec![80.0]]);
        let values: Vec<Option<f64>> = [
            [None, None],
            [Some(0), None],
            [None, Some(0)],
            [Some(0), Some(0)],
        ]
        .iter()
        .map(|a| objective_value(&inst, &alloc(a)).ok())
        .collect();
        assert_eq!(values, vec![Some(0.0), Some(70.0), Some(50.0), None]);
        assert_eq!(
            brute_force_allocate(&inst).unwrap(),
            solve_allocation(&inst).0
        );
    }

    #[test]
    fn brute_force_edges() {
        let inst = unit_rho(0.2, 1.0, &[2], &[]);
        assert_eq!(brute_force_allocate(&inst).unwrap(), Allocation::empty(0));
        assert_eq!(solve_allocation(&inst).0, Allocation::empty(0));
        let big = unit_rho(0.2, 1.0, &[1, 1, 1], &vec![vec![1.0, 1.0, 1.0]; 10]);
        assert_eq!(
            brute_force_allocate(&big),
            Err(AllocError::TooLarge { m: 10, n: 3 })
        );
    }

    #[test]
    fn dummy_edge_cases() {
        let inst = unit_rho(0.2, 5.0, &[10], &vec![vec![1.0]; 9]);
        let graph = build_bmatching_graph(&inst);
        let case = |occ: usize, dummy: u32| {
            let mut edges = vec![0u32; 9];
            edges[..occ].iter_mut().for_each(|e| *e = 1);
            BMatchingSolution::new(&graph, edges, vec![dummy])
        };
        assert_eq!(dummy_edge_weight(&graph, &case(9, 1), 0), Ok(1));
        assert_eq!(dummy_edge_weight(&graph, &case(5, 2), 0), Ok(2));
        assert_eq!(
            dummy_edge_weight(&graph, &case(5, 1), 0),
            Err(AllocError::DummyMismatch {
                slot: 0,
                expected: 2,
                actual: 1
            })
        );

        let inst = unit_rho(1.0, 5.0, &[1], &[vec![9.0]]);
        let graph = build_bmatching_graph(&inst);
        let sol = BMatchingSolution::new(&graph, vec![1], vec![0]);
        assert_eq!(dummy_edge_weight(&graph, &sol, 0), Ok(0));
    }

    #[test]
    fn solver_output_has_dummy_structure() {
        for g in [0.0, 3.0, 7.0, 50.0] {
            let inst = unit_rho(
                0.5,
                g,
                &[3, 2, 4],
                &[
                    vec![5.0, 9.0, 1.0],
                    vec![6.0, 6.0, 6.0],
                    vec![2.0, 8.0, 0.0],
                    vec![7.0, 1.0, 4.0],
                    vec![3.0, 3.0, 9.0],
                ],
            );
            let graph = build_bmatching_graph(&inst);
            let (_, sol) = solve_allocation(&inst);
            assert!(sol.is_feasible(&graph));
            for j in 0..3 {
                dummy_edge_weight(&graph, &sol, j).unwrap();
            }
        }
    }
}
