//! Min-cost flow on bipartite supply/capacity networks.
//!
//! Left nodes carry integral supply, right nodes integral capacity. Every
//! unit of supply is routed either across a left-to-right arc or through the
//! left node's bypass arc straight to the sink, so the flow value is fixed and
//! "not matched" is an ordinary, priced choice.
//!
//! The network is solved by successive shortest paths with Johnson
//! potentials. After solving, the potentials are optimal duals: an arc with
//! residual capacity and zero reduced cost is *admissible*, and every optimal
//! flow differs from the current one by cycles of admissible arcs. That gives
//! two cheap follow-ups used by the mechanism:
//!
//! * [`Transport::canonicalize`] walks the ranked left nodes and moves each to
//!   its most preferred target reachable through an admissible cycle, which
//!   yields the lexicographically smallest optimal assignment.
//! * [`Transport::cost_without`] re-optimizes after deleting one unit-supply
//!   left node with a single shortest-path computation.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

const INF: i64 = i64::MAX / 4;
const SOURCE: usize = 0;

/// Arc specification: `(left, right, capacity, cost)`.
pub(crate) type ArcSpec = (usize, usize, i64, i64);

#[derive(Debug, Clone)]
pub(crate) struct Transport {
    n_left: usize,
    n_right: usize,
    to: Vec<usize>,
    residual: Vec<i64>,
    capacity: Vec<i64>,
    /// Cost after shifting left-out arcs to be non-negative.
    cost: Vec<i64>,
    adj: Vec<Vec<usize>>,
    potential: Vec<i64>,
    shift: i64,
    /// Per left node: `(right, edge)` sorted by right index.
    left_arcs: Vec<Vec<(usize, usize)>>,
    bypass: Vec<usize>,
    total_supply: i64,
}

impl Transport {
    /// Builds and solves the network.
    pub(crate) fn solve(
        supply: &[i64],
        capacity: &[i64],
        arcs: &[ArcSpec],
        bypass_cost: &[i64],
    ) -> Self {
        assert_eq!(supply.len(), bypass_cost.len());
        let n_left = supply.len();
        let n_right = capacity.len();
        let nodes = n_left + n_right + 2;
        let shift = arcs
            .iter()
            .map(|a| a.3)
            .chain(bypass_cost.iter().copied())
            .map(|c| -c)
            .max()
            .unwrap_or(0)
            .max(0);

        let mut net = Transport {
            n_left,
            n_right,
            to: Vec::with_capacity(2 * (arcs.len() + 2 * n_left + n_right)),
            residual: Vec::new(),
            capacity: Vec::new(),
            cost: Vec::new(),
            adj: vec![Vec::new(); nodes],
            potential: vec![0; nodes],
            shift,
            left_arcs: vec![Vec::new(); n_left],
            bypass: Vec::with_capacity(n_left),
            total_supply: supply.iter().sum(),
        };
        let sink = net.sink();
        for (p, &s) in supply.iter().enumerate() {
            net.add_edge(SOURCE, net.left(p), s, 0);
        }
        let mut sorted: Vec<ArcSpec> = arcs.to_vec();
        sorted.sort_by_key(|a| (a.0, a.1));
        for &(p, r, cap, c) in &sorted {
            let e = net.add_edge(net.left(p), net.right(r), cap, c + shift);
            net.left_arcs[p].push((r, e));
        }
        for (p, (&s, &c)) in supply.iter().zip(bypass_cost).enumerate() {
            let e = net.add_edge(net.left(p), sink, s, c + shift);
            net.bypass.push(e);
        }
        for (r, &c) in capacity.iter().enumerate() {
            net.add_edge(net.right(r), sink, c, 0);
        }
        net.run();
        net
    }

    fn left(&self, p: usize) -> usize {
        1 + p
    }

    fn right(&self, r: usize) -> usize {
        1 + self.n_left + r
    }

    fn sink(&self) -> usize {
        1 + self.n_left + self.n_right
    }

    fn from(&self, e: usize) -> usize {
        self.to[e ^ 1]
    }

    fn add_edge(&mut self, u: usize, v: usize, cap: i64, cost: i64) -> usize {
        let e = self.to.len();
        self.to.extend([v, u]);
        self.residual.extend([cap, 0]);
        self.capacity.extend([cap, 0]);
        self.cost.extend([cost, -cost]);
        self.adj[u].push(e);
        self.adj[v].push(e + 1);
        e
    }

    fn reduced(&self, e: usize) -> i64 {
        self.cost[e] + self.potential[self.from(e)] - self.potential[self.to[e]]
    }

    fn flow(&self, e: usize) -> i64 {
        self.capacity[e] - self.residual[e]
    }

    fn push(&mut self, e: usize, amount: i64) {
        self.residual[e] -= amount;
        self.residual[e ^ 1] += amount;
    }

    /// Dijkstra over reduced costs from `start`. Nodes flagged in `blocked`
    /// are never entered.
    fn shortest_paths(&self, start: usize, blocked: &[bool]) -> (Vec<i64>, Vec<usize>) {
        let nodes = self.adj.len();
        let mut dist = vec![INF; nodes];
        let mut parent = vec![usize::MAX; nodes];
        let mut heap = BinaryHeap::new();
        dist[start] = 0;
        heap.push(Reverse((0i64, start)));
        while let Some(Reverse((d, u))) = heap.pop() {
            if d > dist[u] {
                continue;
            }
            for &e in &self.adj[u] {
                if self.residual[e] <= 0 {
                    continue;
                }
                let v = self.to[e];
                if blocked[v] {
                    continue;
                }
                let nd = d + self.reduced(e);
                debug_assert!(
                    self.reduced(e) >= 0,
                    "negative reduced cost on residual arc"
                );
                if nd < dist[v] {
                    dist[v] = nd;
                    parent[v] = e;
                    heap.push(Reverse((nd, v)));
                }
            }
        }
        (dist, parent)
    }

    fn run(&mut self) {
        let sink = self.sink();
        let open = vec![false; self.adj.len()];
        let mut routed = 0i64;
        while routed < self.total_supply {
            let (dist, parent) = self.shortest_paths(SOURCE, &open);
            assert!(dist[sink] < INF, "bypass arcs keep the sink reachable");
            let reach_max = dist.iter().copied().filter(|&d| d < INF).max().unwrap_or(0);
            for (pot, &d) in self.potential.iter_mut().zip(&dist) {
                *pot += if d < INF { d } else { reach_max };
            }
            let mut amount = self.total_supply - routed;
            let mut v = sink;
            while v != SOURCE {
                let e = parent[v];
                amount = amount.min(self.residual[e]);
                v = self.from(e);
            }
            let mut v = sink;
            while v != SOURCE {
                let e = parent[v];
                self.push(e, amount);
                v = self.from(e);
            }
            routed += amount;
        }
    }

    /// Total unshifted cost of the current flow.
    pub(crate) fn total_cost(&self) -> i64 {
        let left_out: i64 = self
            .left_arcs
            .iter()
            .flatten()
            .map(|&(_, e)| e)
            .chain(self.bypass.iter().copied())
            .map(|e| self.flow(e) * (self.cost[e] - self.shift))
            .sum();
        left_out
    }

    /// Units sent from left node `p` to right node `r`.
    pub(crate) fn flow_between(&self, p: usize, r: usize) -> i64 {
        self.left_arcs[p]
            .iter()
            .find(|&&(rr, _)| rr == r)
            .map_or(0, |&(_, e)| self.flow(e))
    }

    /// The right node a unit-supply left node is routed to, if any.
    pub(crate) fn target_of(&self, p: usize) -> Option<usize> {
        self.left_arcs[p]
            .iter()
            .find(|&&(_, e)| self.flow(e) > 0)
            .map(|&(r, _)| r)
    }

    /// Current edge carrying the unit of left node `p` (arc to a right node or
    /// the bypass) and its preference rank (right index; bypass ranks last).
    fn route_of(&self, p: usize) -> (usize, usize) {
        match self.left_arcs[p].iter().find(|&&(_, e)| self.flow(e) > 0) {
            Some(&(r, e)) => (r, e),
            None => (self.n_right, self.bypass[p]),
        }
    }

    /// Re-routes ranked unit-supply left nodes, in order, to their smallest
    /// right index (bypass last) among optimal flows that keep every earlier
    /// ranked node fixed. The objective is unchanged.
    pub(crate) fn canonicalize(&mut self, ranked: &[usize]) {
        let nodes = self.adj.len();
        let mut blocked = vec![false; nodes];
        blocked[SOURCE] = true;
        let mut next = vec![usize::MAX; nodes];
        let mut seen = vec![false; nodes];
        let mut queue = VecDeque::new();
        for &p in ranked {
            let pn = self.left(p);
            let (rank, cur) = self.route_of(p);
            blocked[pn] = true;
            if rank == 0 {
                continue;
            }
            let target = self.to[cur];

            // Reverse search: which nodes reach `target` over admissible arcs?
            seen.iter_mut().for_each(|s| *s = false);
            seen[target] = true;
            queue.clear();
            queue.push_back(target);
            while let Some(v) = queue.pop_front() {
                for &e in &self.adj[v] {
                    let u = self.to[e];
                    let arc = e ^ 1;
                    if seen[u] || blocked[u] || self.residual[arc] <= 0 || self.reduced(arc) != 0 {
                        continue;
                    }
                    seen[u] = true;
                    next[u] = arc;
                    queue.push_back(u);
                }
            }

            let better = self.left_arcs[p]
                .iter()
                .take_while(|&&(r, _)| r < rank)
                .find(|&&(r, e)| {
                    self.residual[e] > 0 && self.reduced(e) == 0 && seen[self.right(r)]
                })
                .copied();
            if let Some((r, e)) = better {
                self.push(e, 1);
                let mut v = self.right(r);
                while v != target {
                    let arc = next[v];
                    self.push(arc, 1);
                    v = self.to[arc];
                }
                self.push(cur ^ 1, 1);
            }
        }
    }

    /// Minimum unshifted cost once unit-supply left node `p` is deleted.
    pub(crate) fn cost_without(&self, p: usize) -> i64 {
        let (rank, cur) = self.route_of(p);
        let removed = self.total_cost() - (self.cost[cur] - self.shift);
        if rank == self.n_right {
            return removed;
        }
        // The slot keeps its outflow but loses its inflow: route one unit from
        // the sink's surplus back to it.
        let slot = self.to[cur];
        let mut blocked = vec![false; self.adj.len()];
        blocked[SOURCE] = true;
        blocked[self.left(p)] = true;
        let sink = self.sink();
        let (dist, _) = self.shortest_paths(sink, &blocked);
        assert!(
            dist[slot] < INF,
            "the slot's own outflow can always be reduced"
        );
        removed + dist[slot] - self.potential[sink] + self.potential[slot]
    }

    #[cfg(test)]
    fn check_optimality(&self) -> bool {
        (0..self.to.len()).all(|e| self.residual[e] <= 0 || self.reduced(e) >= 0)
    }
}
