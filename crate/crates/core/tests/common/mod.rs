//! Helpers shared by the integration tests.

#![allow(dead_code)]

/// Optimal value of the transportation LP with `rows x cols` row-major
/// `costs`, found by enumerating basic feasible solutions.
///
/// Every basis of the transportation polytope is a spanning tree of the
/// complete bipartite graph. Trees are generated once each with Prüfer-style
/// decoding: for a fixed degree sequence, the smallest-labelled leaf is
/// repeatedly attached to a neighbour on the other side. The flow on a leaf
/// arc equals the leaf's remaining mass, so branches that would need a
/// negative flow are cut as soon as they appear. The result is the minimum
/// objective over all bases with nonnegative flows.
pub fn brute_force_optimum(costs: &[f64], mu: &[f64], nu: &[f64]) -> f64 {
    let (m, n) = (mu.len(), nu.len());
    assert_eq!(costs.len(), m * n);
    if m + n == 2 {
        return costs[0] * mu[0];
    }
    let mut search = Search {
        m,
        n,
        costs,
        best: f64::INFINITY,
        deg: vec![0; m + n],
        rest: mu.iter().chain(nu).copied().collect(),
    };
    let mut row_deg = vec![1usize; m];
    let mut col_deg = vec![1usize; n];
    // both sides of a spanning tree carry all m + n - 1 edges
    for_each_composition(&mut row_deg, 0, m + n - 1 - m, n, &mut |rows| {
        for_each_composition(&mut col_deg, 0, m + n - 1 - n, m, &mut |cols| {
            search.deg[..m].copy_from_slice(rows);
            search.deg[m..].copy_from_slice(cols);
            search.grow(0.0, m + n - 2);
        });
    });
    search.best
}

/// Distributes `extra` additional units over `parts[at..]`, each part at
/// most `cap`, starting from the current values (all 1).
fn for_each_composition(parts: &mut Vec<usize>, at: usize, extra: usize, cap: usize, f: &mut dyn FnMut(&[usize])) {
    if at + 1 == parts.len() {
        if extra < cap {
            parts[at] = 1 + extra;
            f(parts);
            parts[at] = 1;
        }
        return;
    }
    for add in 0..=extra.min(cap - 1) {
        parts[at] = 1 + add;
        for_each_composition(parts, at + 1, extra - add, cap, f);
    }
    parts[at] = 1;
}

struct Search<'a> {
    m: usize,
    n: usize,
    costs: &'a [f64],
    best: f64,
    /// Remaining degree; 0 once a vertex has been removed.
    deg: Vec<usize>,
    /// Mass not yet routed through a decided arc.
    rest: Vec<f64>,
}

const FLOW_TOL: f64 = 1e-12;

impl Search<'_> {
    fn cost(&self, a: usize, b: usize) -> f64 {
        let (i, j) = if a < self.m { (a, b - self.m) } else { (b, a - self.m) };
        self.costs[i * self.n + j]
    }

    fn grow(&mut self, objective: f64, steps_left: usize) {
        if objective >= self.best {
            return;
        }
        let total = self.m + self.n;
        if steps_left == 0 {
            let last: Vec<usize> = (0..total).filter(|&v| self.deg[v] == 1).collect();
            let (a, b) = (last[0], last[1]);
            if (a < self.m) == (b < self.m) {
                return;
            }
            if (self.rest[a] - self.rest[b]).abs() > FLOW_TOL {
                return;
            }
            let value = objective + self.rest[a] * self.cost(a, b);
            self.best = self.best.min(value);
            return;
        }
        let leaf = (0..total).find(|&v| self.deg[v] == 1).expect("a forest always has a leaf");
        let other = if leaf < self.m { self.m..total } else { 0..self.m };
        let flow = self.rest[leaf];
        for s in other {
            if self.deg[s] < 2 || self.rest[s] - flow < -FLOW_TOL {
                continue;
            }
            self.deg[leaf] = 0;
            self.deg[s] -= 1;
            self.rest[s] -= flow;
            let c = self.cost(leaf, s);
            self.grow(objective + flow * c, steps_left - 1);
            self.rest[s] += flow;
            self.deg[s] += 1;
            self.deg[leaf] = 1;
        }
    }
}

/// Number of spanning trees visited without the flow and bound cuts, used to
/// check the enumeration itself: `m^(n-1) n^(m-1)` for `K_{m,n}`.
pub fn count_spanning_trees(m: usize, n: usize) -> u64 {
    let mut count = 0u64;
    let mut deg = vec![0usize; m + n];
    let mut row_deg = vec![1usize; m];
    let mut col_deg = vec![1usize; n];
    if m + n == 2 {
        return 1;
    }
    for_each_composition(&mut row_deg, 0, n - 1, n, &mut |rows| {
        for_each_composition(&mut col_deg, 0, m - 1, m, &mut |cols| {
            deg[..m].copy_from_slice(rows);
            deg[m..].copy_from_slice(cols);
            count += count_trees(&mut deg, m, m + n - 2);
        });
    });
    count
}

fn count_trees(deg: &mut [usize], m: usize, steps_left: usize) -> u64 {
    let total = deg.len();
    if steps_left == 0 {
        let last: Vec<usize> = (0..total).filter(|&v| deg[v] == 1).collect();
        return u64::from((last[0] < m) != (last[1] < m));
    }
    let leaf = (0..total).find(|&v| deg[v] == 1).unwrap();
    let other = if leaf < m { m..total } else { 0..m };
    let mut count = 0;
    for s in other {
        if deg[s] < 2 {
            continue;
        }
        deg[leaf] = 0;
        deg[s] -= 1;
        count += count_trees(deg, m, steps_left - 1);
        deg[s] += 1;
        deg[leaf] = 1;
    }
    count
}
