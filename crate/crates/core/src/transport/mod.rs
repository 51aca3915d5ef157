//! The discrete transportation LP and its reduction to an active set of pairs.

mod center;
mod simplex;

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::mesh::{Mesh, Point};

pub use simplex::{NetworkSimplex, PivotRule, SolverOptions};

/// Default guard on `M * N` for [`solve_full`].
pub const DEFAULT_FULL_LP_CAP: usize = 5_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransportError {
    #[error("marginals must be non-empty")]
    EmptyMarginal,
    #[error("marginal weight {0} is negative or not finite")]
    NegativeWeight(f64),
    #[error("marginals have different total mass ({mu} vs {nu})")]
    MassMismatch { mu: f64, nu: f64 },
    #[error("{pairs} active pairs but {costs} costs")]
    CostLength { pairs: usize, costs: usize },
    #[error("pair ({row}, {col}) is out of range")]
    PairOutOfRange { row: usize, col: usize },
    #[error("cost of pair ({row}, {col}) is not finite")]
    NonFiniteCost { row: usize, col: usize },
    #[error("full problem has {size} pairs, above the cap of {cap}; use the active-set driver")]
    TooLarge { size: usize, cap: usize },
    #[error("simplex stopped after {0} pivots without reaching optimality")]
    PivotLimit(usize),
}

/// Transport cost `c(x, y)`.
#[derive(Clone)]
pub enum CostFunction {
    /// `c_p(x, y) = |x - y|^p / p`.
    Polynomial { p: f64 },
    Custom(Arc<dyn Fn(&Point, &Point) -> f64 + Send + Sync>),
}

impl fmt::Debug for CostFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CostFunction::Polynomial { p } => write!(f, "Polynomial {{ p: {p} }}"),
            CostFunction::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl CostFunction {
    pub fn polynomial(p: f64) -> Self {
        CostFunction::Polynomial { p }
    }

    #[inline]
    pub fn eval(&self, x: &Point, y: &Point) -> f64 {
        match self {
            CostFunction::Polynomial { p } => {
                let dx = x[0] - y[0];
                let dy = x[1] - y[1];
                let d2 = dx * dx + dy * dy;
                if *p == 2.0 {
                    0.5 * d2
                } else if *p == 1.5 {
                    let d = d2.sqrt();
                    d * d.sqrt() / 1.5
                } else if *p == 3.0 {
                    d2 * d2.sqrt() / 3.0
                } else if *p == 1.0 {
                    d2.sqrt()
                } else {
                    d2.sqrt().powf(*p) / p
                }
            }
            CostFunction::Custom(c) => c(x, y),
        }
    }
}

/// Sorted, duplicate-free index pairs `(row, col)` defining a reduced LP.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ActiveSet {
    pairs: Vec<(usize, usize)>,
}

impl ActiveSet {
    pub fn new(mut pairs: Vec<(usize, usize)>) -> Self {
        pairs.sort_unstable();
        pairs.dedup();
        Self { pairs }
    }

    /// Wraps pairs the caller guarantees to be sorted and unique.
    pub(crate) fn from_sorted(pairs: Vec<(usize, usize)>) -> Self {
        debug_assert!(pairs.windows(2).all(|w| w[0] < w[1]));
        Self { pairs }
    }

    /// All `rows * cols` pairs.
    pub fn full(rows: usize, cols: usize) -> Self {
        let pairs = (0..rows).flat_map(|i| (0..cols).map(move |j| (i, j))).collect();
        Self { pairs }
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn contains(&self, pair: (usize, usize)) -> bool {
        self.pairs.binary_search(&pair).is_ok()
    }

    pub fn is_subset(&self, other: &ActiveSet) -> bool {
        self.difference(other).is_empty()
    }

    pub fn union(&self, other: &ActiveSet) -> ActiveSet {
        let mut out = Vec::with_capacity(self.len() + other.len());
        let (mut a, mut b) = (self.pairs.iter().peekable(), other.pairs.iter().peekable());
        loop {
            match (a.peek(), b.peek()) {
                (Some(&&x), Some(&&y)) => {
                    if x < y {
                        out.push(x);
                        a.next();
                    } else if y < x {
                        out.push(y);
                        b.next();
                    } else {
                        out.push(x);
                        a.next();
                        b.next();
                    }
                }
                (Some(&&x), None) => {
                    out.push(x);
                    a.next();
                }
                (None, Some(&&y)) => {
                    out.push(y);
                    b.next();
                }
                (None, None) => break,
            }
        }
        ActiveSet { pairs: out }
    }

    /// Pairs of `self` missing from `other`, in order.
    pub fn difference(&self, other: &ActiveSet) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        let mut j = 0;
        for &p in &self.pairs {
            while j < other.pairs.len() && other.pairs[j] < p {
                j += 1;
            }
            if j >= other.pairs.len() || other.pairs[j] != p {
                out.push(p);
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanEntry {
    pub row: usize,
    pub col: usize,
    pub mass: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    /// The active set cannot route all of the mass.
    Infeasible,
}

/// Optimal basic plan together with the multipliers of the marginal
/// constraints. Duals are gauged so that `psi[0] == 0`.
#[derive(Debug, Clone)]
pub struct TransportSolution {
    /// Positive entries of the plan, sorted by `(row, col)`.
    pub plan: Vec<PlanEntry>,
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
    pub objective: f64,
    pub status: SolveStatus,
    pub pivots: usize,
}

impl TransportSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    /// `Σ φ_i μ_i + Σ ψ_j ν_j`.
    pub fn dual_objective(&self, mu: &[f64], nu: &[f64]) -> f64 {
        let a: f64 = self.phi.iter().zip(mu).map(|(p, w)| p * w).sum();
        let b: f64 = self.psi.iter().zip(nu).map(|(p, w)| p * w).sum();
        a + b
    }

    pub fn row_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.phi.len()];
        for e in &self.plan {
            s[e.row] += e.mass;
        }
        s
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.psi.len()];
        for e in &self.plan {
            s[e.col] += e.mass;
        }
        s
    }
}

/// Costs `c(x_i, y_j)` for every active pair, in active-set order.
pub fn assemble(mesh_x: &Mesh, mesh_y: &Mesh, cost: &CostFunction, active: &ActiveSet) -> Vec<f64> {
    assemble_pairs(mesh_x.nodes(), mesh_y.nodes(), cost, active.pairs())
}

pub(crate) fn assemble_pairs(xs: &[Point], ys: &[Point], cost: &CostFunction, pairs: &[(usize, usize)]) -> Vec<f64> {
    pairs.iter().map(|&(i, j)| cost.eval(&xs[i], &ys[j])).collect()
}

/// Solves the transportation LP restricted to `active`.
pub fn solve_reduced(
    costs: &[f64],
    mu: &[f64],
    nu: &[f64],
    active: &ActiveSet,
) -> Result<TransportSolution, TransportError> {
    solve_reduced_with(costs, mu, nu, active, &SolverOptions::default())
}

pub fn solve_reduced_with(
    costs: &[f64],
    mu: &[f64],
    nu: &[f64],
    active: &ActiveSet,
    opts: &SolverOptions,
) -> Result<TransportSolution, TransportError> {
    let mut solver = NetworkSimplex::new(mu, nu, opts.clone())?;
    solver.add_arcs(active.pairs(), costs)?;
    solver.solve()
}

/// Solves the full `M x N` problem; refuses when `M * N > cap`.
pub fn solve_full(
    mesh_x: &Mesh,
    mesh_y: &Mesh,
    cost: &CostFunction,
    mu: &[f64],
    nu: &[f64],
    cap: usize,
) -> Result<TransportSolution, TransportError> {
    let size = mesh_x.node_count() * mesh_y.node_count();
    if size > cap {
        return Err(TransportError::TooLarge { size, cap });
    }
    let active = ActiveSet::full(mesh_x.node_count(), mesh_y.node_count());
    let costs = assemble(mesh_x, mesh_y, cost, &active);
    solve_reduced(&costs, mu, nu, &active)
}
