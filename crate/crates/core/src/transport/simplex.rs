//! Primal network simplex for the uncapacitated transportation problem.
//!
//! The basis is a spanning tree over the `M + N` atoms plus an artificial root.
//! The initial tree consists of one artificial arc per atom. Artificial arcs
//! into demand atoms carry a symbolic "big M" cost: every potential is stored
//! as a pair `(k, r)` meaning `k * M + r`, and reduced costs are compared
//! lexicographically. This is the big-M method with `M` larger than any
//! finite number, so there is no finite penalty constant to tune and the
//! finite part of the potentials keeps the magnitude of the real costs.
//!
//! Leaving arcs follow the strongly feasible tree rule, which rules out
//! cycling on degenerate pivots. Entering arcs are chosen by block search:
//! the most negative reduced cost within the first block of roughly
//! `sqrt(|A|)` arcs that contains a candidate.

use super::center::center_duals;
use super::{PlanEntry, SolveStatus, TransportError, TransportSolution};

const NONE: usize = usize::MAX;

/// Entering-arc selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PivotRule {
    /// Scan blocks of about `sqrt(|A|)` arcs, take the best arc of the first
    /// block that has one.
    BlockSearch,
    /// Scan every arc and take the most negative reduced cost.
    Dantzig,
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub pivot_rule: PivotRule,
    /// Arcs with reduced cost below `-reduced_cost_tol` are eligible to enter.
    pub reduced_cost_tol: f64,
    /// Artificial flow above this amount means the active set cannot route
    /// the marginals.
    pub feasibility_tol: f64,
    /// Hard limit on pivots; `None` picks a limit proportional to the size.
    pub max_pivots: Option<usize>,
    /// Move degenerate multipliers to the middle of their admissible range
    /// instead of returning the basic ones.
    pub center_duals: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            pivot_rule: PivotRule::BlockSearch,
            reduced_cost_tol: 1e-10,
            feasibility_tol: 1e-12,
            max_pivots: None,
            center_duals: true,
        }
    }
}

/// A transportation LP over a growing set of arcs. Arcs can be added after a
/// solve; the next solve restarts from the previous optimal tree.
#[derive(Debug, Clone)]
pub struct NetworkSimplex {
    rows: usize,
    cols: usize,
    supply: Vec<f64>,
    opts: SolverOptions,

    // Arc `u < n` is the artificial arc of node `u`; real arcs follow.
    source: Vec<u32>,
    target: Vec<u32>,
    cost: Vec<f64>,
    flow: Vec<f64>,
    in_tree: Vec<bool>,
    pairs: Vec<(usize, usize)>,

    parent: Vec<usize>,
    pred: Vec<usize>,
    pred_up: Vec<bool>,
    depth: Vec<u32>,
    first_child: Vec<usize>,
    next_sib: Vec<usize>,
    prev_sib: Vec<usize>,
    pi_big: Vec<i32>,
    pi: Vec<f64>,

    next_arc: usize,
    pivots: usize,
    stack: Vec<usize>,
}

impl NetworkSimplex {
    /// Sets up the all-artificial starting tree for marginals `mu` (rows) and
    /// `nu` (columns).
    pub fn new(mu: &[f64], nu: &[f64], opts: SolverOptions) -> Result<Self, TransportError> {
        let rows = mu.len();
        let cols = nu.len();
        if rows == 0 || cols == 0 {
            return Err(TransportError::EmptyMarginal);
        }
        if let Some(&w) = mu.iter().chain(nu).find(|w| !(**w >= 0.0) || !w.is_finite()) {
            return Err(TransportError::NegativeWeight(w));
        }
        let total_mu: f64 = mu.iter().sum();
        let total_nu: f64 = nu.iter().sum();
        if (total_mu - total_nu).abs() > 1e-12 * total_mu.max(total_nu).max(1.0) {
            return Err(TransportError::MassMismatch {
                mu: total_mu,
                nu: total_nu,
            });
        }

        let n = rows + cols;
        let root = n;
        let mut supply: Vec<f64> = mu.iter().copied().chain(nu.iter().map(|v| -v)).collect();
        supply.push(total_nu - total_mu);

        let mut s = Self {
            rows,
            cols,
            supply,
            opts,
            source: Vec::with_capacity(n),
            target: Vec::with_capacity(n),
            cost: Vec::with_capacity(n),
            flow: Vec::with_capacity(n),
            in_tree: Vec::with_capacity(n),
            pairs: Vec::new(),
            parent: vec![NONE; n + 1],
            pred: vec![NONE; n + 1],
            pred_up: vec![false; n + 1],
            depth: vec![0; n + 1],
            first_child: vec![NONE; n + 1],
            next_sib: vec![NONE; n + 1],
            prev_sib: vec![NONE; n + 1],
            pi_big: vec![0; n + 1],
            pi: vec![0.0; n + 1],
            next_arc: n,
            pivots: 0,
            stack: Vec::new(),
        };
        for u in 0..n {
            let b = s.supply[u];
            if b >= 0.0 {
                // u -> root, zero cost
                s.source.push(u as u32);
                s.target.push(root as u32);
                s.flow.push(b);
                s.pred_up[u] = true;
                s.pi_big[u] = 0;
            } else {
                // root -> u, symbolic cost M
                s.source.push(root as u32);
                s.target.push(u as u32);
                s.flow.push(-b);
                s.pred_up[u] = false;
                s.pi_big[u] = 1;
            }
            s.cost.push(0.0);
            s.in_tree.push(true);
            s.parent[u] = root;
            s.pred[u] = u;
            s.depth[u] = 1;
            s.attach(u, root);
        }
        Ok(s)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn arc_count(&self) -> usize {
        self.pairs.len()
    }

    pub fn pivots(&self) -> usize {
        self.pivots
    }

    /// Adds real arcs `(row, col)` with the given costs. Adding a pair twice
    /// creates a parallel arc, which is harmless but wasteful.
    pub fn add_arcs(&mut self, pairs: &[(usize, usize)], costs: &[f64]) -> Result<(), TransportError> {
        if pairs.len() != costs.len() {
            return Err(TransportError::CostLength {
                pairs: pairs.len(),
                costs: costs.len(),
            });
        }
        for (&(i, j), &c) in pairs.iter().zip(costs) {
            if i >= self.rows || j >= self.cols {
                return Err(TransportError::PairOutOfRange { row: i, col: j });
            }
            if !c.is_finite() {
                return Err(TransportError::NonFiniteCost { row: i, col: j });
            }
            self.source.push(i as u32);
            self.target.push((self.rows + j) as u32);
            self.cost.push(c);
            self.flow.push(0.0);
            self.in_tree.push(false);
            self.pairs.push((i, j));
        }
        Ok(())
    }

    fn node_count(&self) -> usize {
        self.rows + self.cols
    }

    fn attach(&mut self, c: usize, p: usize) {
        let first = self.first_child[p];
        self.next_sib[c] = first;
        self.prev_sib[c] = NONE;
        if first != NONE {
            self.prev_sib[first] = c;
        }
        self.first_child[p] = c;
    }

    fn detach(&mut self, c: usize) {
        let p = self.parent[c];
        let (prev, next) = (self.prev_sib[c], self.next_sib[c]);
        if prev != NONE {
            self.next_sib[prev] = next;
        } else {
            self.first_child[p] = next;
        }
        if next != NONE {
            self.prev_sib[next] = prev;
        }
        self.prev_sib[c] = NONE;
        self.next_sib[c] = NONE;
    }

    /// Symbolic part of the cost of arc `e`: 1 for artificial arcs leaving the root.
    fn big_cost(&self, e: usize) -> i32 {
        if e < self.node_count() && self.source[e] as usize == self.node_count() {
            1
        } else {
            0
        }
    }

    /// Lexicographic reduced cost `(k, r)` of arc `e`.
    #[inline]
    fn reduced_cost(&self, e: usize) -> (i32, f64) {
        let s = self.source[e] as usize;
        let t = self.target[e] as usize;
        (
            self.pi_big[s] - self.pi_big[t],
            self.cost[e] + self.pi[s] - self.pi[t],
        )
    }

    fn find_entering(&mut self) -> Option<usize> {
        let n = self.node_count();
        let total = self.source.len();
        let m = total - n;
        if m == 0 {
            return None;
        }
        let block = match self.opts.pivot_rule {
            PivotRule::Dantzig => m,
            PivotRule::BlockSearch => ((m as f64).sqrt().ceil() as usize).max(10).min(m),
        };
        let eps = self.opts.reduced_cost_tol;
        if self.next_arc < n || self.next_arc >= total {
            self.next_arc = n;
        }
        let mut best: Option<(usize, i32, f64)> = None;
        let mut count = 0;
        let mut e = self.next_arc;
        for _ in 0..m {
            if !self.in_tree[e] {
                let (k, r) = self.reduced_cost(e);
                if k < 0 || (k == 0 && r < -eps) {
                    let better = match best {
                        None => true,
                        Some((_, bk, br)) => k < bk || (k == bk && r < br),
                    };
                    if better {
                        best = Some((e, k, r));
                    }
                }
            }
            e += 1;
            if e == total {
                e = n;
            }
            count += 1;
            if count == block {
                if best.is_some() {
                    break;
                }
                count = 0;
            }
        }
        self.next_arc = e;
        best.map(|(e, _, _)| e)
    }

    fn pivot(&mut self, e_in: usize) {
        let s = self.source[e_in] as usize;
        let t = self.target[e_in] as usize;

        let (mut u, mut v) = (s, t);
        while u != v {
            if self.depth[u] >= self.depth[v] {
                u = self.parent[u];
            } else {
                v = self.parent[v];
            }
        }
        let join = u;

        // Flow is pushed s -> t over the entering arc, then back to s around
        // the cycle through `join`.
        let mut delta = f64::INFINITY;
        let mut u_out = NONE;
        let mut side = 0;
        let mut u = s;
        while u != join {
            if self.pred_up[u] {
                let d = self.flow[self.pred[u]];
                if d < delta {
                    delta = d;
                    u_out = u;
                    side = 1;
                }
            }
            u = self.parent[u];
        }
        let mut u = t;
        while u != join {
            if !self.pred_up[u] {
                let d = self.flow[self.pred[u]];
                if d <= delta {
                    delta = d;
                    u_out = u;
                    side = 2;
                }
            }
            u = self.parent[u];
        }
        assert!(side != 0, "transportation arcs cannot form an unbounded cycle");

        if delta > 0.0 {
            self.flow[e_in] += delta;
            let mut u = s;
            while u != join {
                let a = self.pred[u];
                if self.pred_up[u] {
                    self.flow[a] -= delta;
                } else {
                    self.flow[a] += delta;
                }
                u = self.parent[u];
            }
            let mut u = t;
            while u != join {
                let a = self.pred[u];
                if self.pred_up[u] {
                    self.flow[a] += delta;
                } else {
                    self.flow[a] -= delta;
                }
                u = self.parent[u];
            }
        }
        let e_out = self.pred[u_out];
        self.flow[e_out] = 0.0;
        self.in_tree[e_out] = false;
        self.in_tree[e_in] = true;

        let (u_in, v_in) = if side == 1 { (s, t) } else { (t, s) };

        // Reverse the stem from u_in up to u_out and hang it below v_in.
        let mut prev = v_in;
        let mut prev_arc = e_in;
        let mut prev_up = u_in == s;
        let mut cur = u_in;
        loop {
            let old_parent = self.parent[cur];
            let old_arc = self.pred[cur];
            let old_up = self.pred_up[cur];
            self.detach(cur);
            self.parent[cur] = prev;
            self.pred[cur] = prev_arc;
            self.pred_up[cur] = prev_up;
            self.attach(cur, prev);
            if cur == u_out {
                break;
            }
            prev = cur;
            prev_arc = old_arc;
            prev_up = !old_up;
            cur = old_parent;
        }

        self.update_subtree(u_in);
        self.pivots += 1;
    }

    /// Recomputes depth and potentials below (and including) `top` from its parent.
    fn update_subtree(&mut self, top: usize) {
        let mut stack = std::mem::take(&mut self.stack);
        stack.clear();
        stack.push(top);
        while let Some(v) = stack.pop() {
            let p = self.parent[v];
            let a = self.pred[v];
            let (big, c) = (self.big_cost(a), self.cost[a]);
            self.depth[v] = self.depth[p] + 1;
            if self.pred_up[v] {
                self.pi_big[v] = self.pi_big[p] - big;
                self.pi[v] = self.pi[p] - c;
            } else {
                self.pi_big[v] = self.pi_big[p] + big;
                self.pi[v] = self.pi[p] + c;
            }
            let mut c = self.first_child[v];
            while c != NONE {
                stack.push(c);
                c = self.next_sib[c];
            }
        }
        self.stack = stack;
    }

    /// Tree nodes in preorder, starting at the root.
    fn preorder(&self) -> Vec<usize> {
        let root = self.node_count();
        let mut order = Vec::with_capacity(root + 1);
        let mut stack = vec![root];
        while let Some(v) = stack.pop() {
            order.push(v);
            let mut c = self.first_child[v];
            while c != NONE {
                stack.push(c);
                c = self.next_sib[c];
            }
        }
        order
    }

    /// Recomputes all tree flows from the supplies, removing drift from the
    /// incremental updates.
    fn recompute_flows(&mut self) {
        let order = self.preorder();
        let mut net = self.supply.clone();
        for &v in order.iter().skip(1).rev() {
            let a = self.pred[v];
            self.flow[a] = if self.pred_up[v] { net[v] } else { -net[v] };
            let p = self.parent[v];
            net[p] += net[v];
        }
        for (e, f) in self.flow.iter_mut().enumerate() {
            if !self.in_tree[e] {
                *f = 0.0;
            }
        }
    }

    fn pivot_limit(&self) -> usize {
        self.opts
            .max_pivots
            .unwrap_or(20 * (self.source.len() + 1) + 10_000)
    }

    /// Runs primal simplex pivots until no arc prices out, then extracts the
    /// plan and a dual certificate.
    pub fn solve(&mut self) -> Result<TransportSolution, TransportError> {
        let limit = self.pivots + self.pivot_limit();
        loop {
            match self.find_entering() {
                Some(e) => {
                    if self.pivots >= limit {
                        return Err(TransportError::PivotLimit(self.pivots));
                    }
                    self.pivot(e);
                }
                None => {
                    // Confirm with potentials rebuilt from the root.
                    let root = self.node_count();
                    let mut c = self.first_child[root];
                    while c != NONE {
                        self.update_subtree(c);
                        c = self.next_sib[c];
                    }
                    match self.find_entering() {
                        Some(e) => self.pivot(e),
                        None => break,
                    }
                }
            }
        }
        self.recompute_flows();
        Ok(self.extract())
    }

    fn extract(&self) -> TransportSolution {
        let n = self.node_count();
        let mut artificial = 0.0f64;
        for u in 0..n {
            if self.in_tree[u] {
                artificial = artificial.max(self.flow[u].abs());
            }
        }

        let mut plan = Vec::new();
        let mut objective = 0.0;
        for (a, &(i, j)) in self.pairs.iter().enumerate() {
            let e = n + a;
            if self.in_tree[e] {
                let mass = self.flow[e].max(0.0);
                if mass > 0.0 {
                    objective += mass * self.cost[e];
                    plan.push(PlanEntry { row: i, col: j, mass });
                }
            }
        }
        plan.sort_by_key(|p| (p.row, p.col));

        // Components of the tree hanging off demand-side artificial arcs have
        // potentials offset by the symbolic M. Replace M by the smallest value
        // that keeps every real arc dual feasible.
        let mut big_value = 0.0f64;
        for (a, _) in self.pairs.iter().enumerate() {
            let (k, r) = self.reduced_cost(n + a);
            if k > 0 {
                big_value = big_value.max(-r / k as f64);
            }
        }
        let potential = |u: usize| self.pi_big[u] as f64 * big_value + self.pi[u];
        let mut phi: Vec<f64> = (0..self.rows).map(|i| -potential(i)).collect();
        let mut psi: Vec<f64> = (0..self.cols).map(|j| potential(self.rows + j)).collect();

        let status = if artificial > self.opts.feasibility_tol {
            SolveStatus::Infeasible
        } else {
            SolveStatus::Optimal
        };
        if status == SolveStatus::Optimal && self.opts.center_duals {
            center_duals(&plan, &self.pairs, &self.cost[n..], &mut phi, &mut psi);
        }
        let gauge = psi[0];
        phi.iter_mut().for_each(|v| *v += gauge);
        psi.iter_mut().for_each(|v| *v -= gauge);
        TransportSolution {
            plan,
            phi,
            psi,
            objective,
            status,
            pivots: self.pivots,
        }
    }
}
