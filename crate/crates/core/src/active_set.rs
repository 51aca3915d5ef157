//! Active-set reduction of the transportation LP and the multilevel driver.
//!
//! Given approximate multipliers `(φ̃, ψ̃)`, only the pairs whose constraint
//! `φ̃_i + ψ̃_j <= c(x_i, y_j)` is nearly active are kept. The reduced LP is
//! solved and its multipliers are checked against every pair of the product
//! grid. On success the meshes are refined and the multipliers prolongated;
//! on failure the activation threshold is doubled.

use std::sync::Arc;
use std::time::{Duration, Instant};

use log::{debug, info};
use rayon::prelude::*;
use thiserror::Error;

use crate::measure::{discretize_density, DiscreteMeasure, MeasureError};
use crate::mesh::{build_mesh, prolongate, refine, Mesh, MeshError, Point};
use crate::problems::Problem;
use crate::transport::{
    assemble_pairs, solve_full, ActiveSet, CostFunction, NetworkSimplex, SolverOptions, TransportError,
    TransportSolution, DEFAULT_FULL_LP_CAP,
};

/// Halvings tried by the threshold auto-tuning before giving up on finding a
/// failing value.
const MAX_TUNING_HALVINGS: usize = 20;

#[derive(Debug, Clone)]
pub struct MultilevelParams {
    /// Activation threshold in units of `h^2`.
    pub theta_act: f64,
    /// Tolerance of the optimality check in units of `h^2`.
    pub c_opt: f64,
    pub level_min: u32,
    pub level_max: u32,
    pub max_tolerance_increases: usize,
    /// Start from the multipliers of a full solve on the coarsest level
    /// instead of zero.
    pub coarse_init: bool,
    /// Tune `theta_act` before the first level, see [`multilevel_solve`].
    pub auto_tune_theta: bool,
    /// Largest `M * N` for which full solves are allowed.
    pub full_lp_cap: usize,
    pub solver: SolverOptions,
}

impl Default for MultilevelParams {
    fn default() -> Self {
        Self {
            theta_act: 1.0,
            c_opt: 1.0,
            level_min: 0,
            level_max: 0,
            max_tolerance_increases: 25,
            coarse_init: true,
            auto_tune_theta: false,
            full_lp_cap: DEFAULT_FULL_LP_CAP,
            solver: SolverOptions::default(),
        }
    }
}

impl MultilevelParams {
    pub fn with_levels(level_min: u32, level_max: u32) -> Self {
        Self {
            level_min,
            level_max,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ActiveSetError> {
        let bad = |msg: String| Err(ActiveSetError::InvalidParams(msg));
        if !(self.theta_act > 0.0 && self.theta_act.is_finite()) {
            return bad(format!("theta_act must be positive, got {}", self.theta_act));
        }
        if !(self.c_opt > 0.0 && self.c_opt.is_finite()) {
            return bad(format!("c_opt must be positive, got {}", self.c_opt));
        }
        if self.level_min > self.level_max {
            return bad(format!("empty level range {}:{}", self.level_min, self.level_max));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelReport {
    pub level: u32,
    pub rows: usize,
    pub cols: usize,
    pub active_cardinality: usize,
    pub tolerance_increases: usize,
    /// Objective of the normalized discrete problem.
    pub objective: f64,
    pub wall_time: Duration,
    /// Number of violated pairs after each reduced solve on this level.
    pub violation_count_history: Vec<usize>,
    /// Activation constant in effect when the level was accepted.
    pub theta_act: f64,
}

#[derive(Debug, Clone)]
pub struct LevelResult {
    pub mesh_x: Arc<Mesh>,
    pub mesh_y: Arc<Mesh>,
    pub mu: DiscreteMeasure,
    pub nu: DiscreteMeasure,
    pub active: ActiveSet,
    pub solution: TransportSolution,
    pub report: LevelReport,
}

#[derive(Debug, Error)]
pub enum ActiveSetError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("level {} needed more than {} tolerance increases (violations: {:?})", .0.level, .0.tolerance_increases, .0.violation_count_history)]
    ToleranceIncreases(Box<LevelReport>),
    #[error("reduced problem on level {0} is infeasible after completion")]
    Infeasible(u32),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Transport(#[from] TransportError),
}

/// All pairs with `phi[i] + psi[j] >= c(x_i, y_j) - threshold`.
pub fn build_active_set(
    phi: &[f64],
    psi: &[f64],
    cost: &CostFunction,
    mesh_x: &Mesh,
    mesh_y: &Mesh,
    threshold: f64,
) -> ActiveSet {
    activate(phi, psi, cost, mesh_x.nodes(), mesh_y.nodes(), threshold)
}

/// [`build_active_set`] on bare point lists.
pub fn activate(phi: &[f64], psi: &[f64], cost: &CostFunction, xs: &[Point], ys: &[Point], threshold: f64) -> ActiveSet {
    debug_assert!(threshold >= 0.0);
    let rows: Vec<Vec<(usize, usize)>> = xs
        .par_iter()
        .zip(phi)
        .enumerate()
        .map(|(i, (x, &p))| {
            ys.iter()
                .zip(psi)
                .enumerate()
                .filter(|(_, (y, &q))| p + q >= cost.eval(x, y) - threshold)
                .map(|(j, _)| (i, j))
                .collect()
        })
        .collect();
    ActiveSet::from_sorted(rows.concat())
}

/// Support of the north-west corner plan of `mu` and `nu`. Only pairs that
/// receive positive mass are returned; when a row and a column are exhausted
/// together both indices advance.
pub fn north_west_support(mu: &[f64], nu: &[f64]) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(mu.len() + nu.len());
    let (mut i, mut j) = (0, 0);
    let mut row_left = mu.first().copied().unwrap_or(0.0);
    let mut col_left = nu.first().copied().unwrap_or(0.0);
    while i < mu.len() && j < nu.len() {
        let amount = row_left.min(col_left);
        if amount > 0.0 {
            out.push((i, j));
        }
        row_left -= amount;
        col_left -= amount;
        if row_left <= 0.0 {
            i += 1;
            row_left = mu.get(i).copied().unwrap_or(0.0);
        }
        if col_left <= 0.0 {
            j += 1;
            col_left = nu.get(j).copied().unwrap_or(0.0);
        }
    }
    out
}

/// `active` together with the north-west corner support, which carries a
/// feasible plan on its own.
pub fn complete_feasible(active: &ActiveSet, mu: &[f64], nu: &[f64]) -> ActiveSet {
    active.union(&ActiveSet::new(north_west_support(mu, nu)))
}

/// All pairs of the full grid with `phi[i] + psi[j] > c(x_i, y_j) + tolerance`.
pub fn check_optimality(
    phi: &[f64],
    psi: &[f64],
    cost: &CostFunction,
    mesh_x: &Mesh,
    mesh_y: &Mesh,
    tolerance: f64,
) -> Vec<(usize, usize)> {
    let (xs, ys) = (mesh_x.nodes(), mesh_y.nodes());
    let rows: Vec<Vec<(usize, usize)>> = xs
        .par_iter()
        .zip(phi)
        .enumerate()
        .map(|(i, (x, &p))| {
            ys.iter()
                .zip(psi)
                .enumerate()
                .filter(|(_, (y, &q))| p + q > cost.eval(x, y) + tolerance)
                .map(|(j, _)| (i, j))
                .collect()
        })
        .collect();
    rows.concat()
}

/// Number of pairs [`check_optimality`] would return, without collecting them.
pub fn count_violations(
    phi: &[f64],
    psi: &[f64],
    cost: &CostFunction,
    mesh_x: &Mesh,
    mesh_y: &Mesh,
    tolerance: f64,
) -> usize {
    let ys = mesh_y.nodes();
    mesh_x
        .nodes()
        .par_iter()
        .zip(phi)
        .map(|(x, &p)| {
            ys.iter()
                .zip(psi)
                .filter(|(y, &q)| p + q > cost.eval(x, y) + tolerance)
                .count()
        })
        .sum()
}

/// Discretized marginals on one level.
struct LevelData {
    mesh_x: Arc<Mesh>,
    mesh_y: Arc<Mesh>,
    mu: DiscreteMeasure,
    nu: DiscreteMeasure,
}

impl LevelData {
    fn new(problem: &Problem, mesh_x: Mesh, mesh_y: Mesh) -> Result<Self, ActiveSetError> {
        let mesh_x = Arc::new(mesh_x);
        let mesh_y = Arc::new(mesh_y);
        let f = problem.density_f.clone();
        let g = problem.density_g.clone();
        let mu = discretize_density(mesh_x.clone(), |x| f(x))?;
        let nu = discretize_density(mesh_y.clone(), |y| g(y))?;
        Ok(Self { mesh_x, mesh_y, mu, nu })
    }

    fn at_level(problem: &Problem, level: u32) -> Result<Self, ActiveSetError> {
        Self::new(
            problem,
            build_mesh(&problem.domain_x, level)?,
            build_mesh(&problem.domain_y, level)?,
        )
    }

    fn refined(&self, problem: &Problem) -> Result<Self, ActiveSetError> {
        Self::new(problem, refine(&self.mesh_x), refine(&self.mesh_y))
    }

    fn level(&self) -> u32 {
        self.mesh_x.level()
    }

    fn h(&self) -> f64 {
        self.mesh_x.h().max(self.mesh_y.h())
    }

    fn solve_full(&self, cost: &CostFunction, cap: usize) -> Result<TransportSolution, ActiveSetError> {
        let s = solve_full(
            &self.mesh_x,
            &self.mesh_y,
            cost,
            self.mu.weights(),
            self.nu.weights(),
            cap,
        )?;
        if !s.is_optimal() {
            return Err(ActiveSetError::Infeasible(self.level()));
        }
        Ok(s)
    }
}

/// Outcome of the activate / solve / check loop on one level.
struct LevelOutcome {
    solution: TransportSolution,
    active: ActiveSet,
    theta_act: f64,
    tolerance_increases: usize,
    history: Vec<usize>,
}

/// Activates, solves and checks on one level, starting from `theta_act` and
/// doubling it until the optimality check passes. Once `max_increases`
/// doublings are used up the last outcome is returned even if it fails.
fn solve_level(
    data: &LevelData,
    cost: &CostFunction,
    phi_tilde: &[f64],
    psi_tilde: &[f64],
    mut theta_act: f64,
    params: &MultilevelParams,
    max_increases: Option<usize>,
) -> Result<LevelOutcome, ActiveSetError> {
    let (mu, nu) = (data.mu.weights(), data.nu.weights());
    let (xs, ys) = (data.mesh_x.nodes(), data.mesh_y.nodes());
    let h2 = data.h() * data.h();
    let tolerance = params.c_opt * h2;

    let mut solver = NetworkSimplex::new(mu, nu, params.solver.clone())?;
    let mut active = ActiveSet::default();
    let mut history = Vec::new();
    let mut increases = 0;
    loop {
        let candidate = activate(phi_tilde, psi_tilde, cost, xs, ys, theta_act * h2);
        let grown = complete_feasible(&candidate, mu, nu).union(&active);
        let added = grown.difference(&active);
        solver.add_arcs(&added, &assemble_pairs(xs, ys, cost, &added))?;
        active = grown;

        let solution = solver.solve()?;
        debug_assert!(solution.is_optimal(), "completed active set is always feasible");
        if !solution.is_optimal() {
            return Err(ActiveSetError::Infeasible(data.level()));
        }
        let violations = count_violations(
            &solution.phi,
            &solution.psi,
            cost,
            &data.mesh_x,
            &data.mesh_y,
            tolerance,
        );
        history.push(violations);
        debug!(
            "level {} theta {theta_act}: |A| = {}, objective {:.12e}, {violations} violations, {} pivots",
            data.level(),
            active.len(),
            solution.objective,
            solution.pivots
        );
        let out_of_budget = max_increases.is_some_and(|m| increases >= m);
        if violations == 0 || out_of_budget {
            return Ok(LevelOutcome {
                solution,
                active,
                theta_act,
                tolerance_increases: increases,
                history,
            });
        }
        if increases >= params.max_tolerance_increases {
            return Err(ActiveSetError::ToleranceIncreases(Box::new(LevelReport {
                level: data.level(),
                rows: mu.len(),
                cols: nu.len(),
                active_cardinality: active.len(),
                tolerance_increases: increases,
                objective: solution.objective,
                wall_time: Duration::ZERO,
                violation_count_history: history,
                theta_act,
            })));
        }
        theta_act *= 2.0;
        increases += 1;
    }
}

/// Picks the activation constant on the coarsest level: multipliers of a full
/// solve one level below are prolongated, then `theta_act` is halved as long
/// as a single activation still passes the optimality check (or doubled until
/// it does).
fn tune_theta(
    problem: &Problem,
    cost: &CostFunction,
    params: &MultilevelParams,
    data: &LevelData,
) -> Result<f64, ActiveSetError> {
    if params.level_min == 0 {
        return Ok(params.theta_act);
    }
    let coarse = LevelData::at_level(problem, params.level_min - 1)?;
    let start = coarse.solve_full(cost, params.full_lp_cap)?;
    let phi = prolongate(&coarse.mesh_x, &data.mesh_x, &start.phi)?;
    let psi = prolongate(&coarse.mesh_y, &data.mesh_y, &start.psi)?;
    let passes = |theta: f64| -> Result<bool, ActiveSetError> {
        let out = solve_level(data, cost, &phi, &psi, theta, params, Some(0))?;
        Ok(out.history[0] == 0)
    };

    let mut theta = params.theta_act;
    if passes(theta)? {
        for _ in 0..MAX_TUNING_HALVINGS {
            if !passes(theta / 2.0)? {
                break;
            }
            theta /= 2.0;
        }
    } else {
        for _ in 0..params.max_tolerance_increases {
            theta *= 2.0;
            if passes(theta)? {
                break;
            }
        }
    }
    info!("tuned theta_act = {theta}");
    Ok(theta)
}

/// Multilevel active-set strategy from `level_min` to `level_max`.
///
/// Returns one result per level. The objective and multipliers are those of
/// the discrete problem with marginals normalized to unit mass.
pub fn multilevel_solve(
    problem: &Problem,
    cost: &CostFunction,
    params: &MultilevelParams,
) -> Result<Vec<LevelResult>, ActiveSetError> {
    params.validate()?;
    let mut data = LevelData::at_level(problem, params.level_min)?;
    let mut theta_act = if params.auto_tune_theta {
        tune_theta(problem, cost, params, &data)?
    } else {
        params.theta_act
    };

    let (mut phi_tilde, mut psi_tilde) = if params.coarse_init {
        let s = data.solve_full(cost, params.full_lp_cap)?;
        (s.phi, s.psi)
    } else {
        (vec![0.0; data.mu.len()], vec![0.0; data.nu.len()])
    };

    let mut results = Vec::new();
    loop {
        let started = Instant::now();
        let out = solve_level(&data, cost, &phi_tilde, &psi_tilde, theta_act, params, None)?;
        let report = LevelReport {
            level: data.level(),
            rows: data.mu.len(),
            cols: data.nu.len(),
            active_cardinality: out.active.len(),
            tolerance_increases: out.tolerance_increases,
            objective: out.solution.objective,
            wall_time: started.elapsed(),
            violation_count_history: out.history,
            theta_act: out.theta_act,
        };
        info!(
            "level {}: M = {}, N = {}, |A| = {}, increases = {}, objective = {:.12e}, {:.2?}",
            report.level,
            report.rows,
            report.cols,
            report.active_cardinality,
            report.tolerance_increases,
            report.objective,
            report.wall_time
        );
        theta_act = out.theta_act;
        let done = data.level() >= params.level_max;
        let next = if done { None } else { Some(data.refined(problem)?) };
        if let Some(fine) = &next {
            phi_tilde = prolongate(&data.mesh_x, &fine.mesh_x, &out.solution.phi)?;
            psi_tilde = prolongate(&data.mesh_y, &fine.mesh_y, &out.solution.psi)?;
            theta_act /= 2.0;
        }
        results.push(LevelResult {
            mesh_x: data.mesh_x.clone(),
            mesh_y: data.mesh_y.clone(),
            mu: data.mu.clone(),
            nu: data.nu.clone(),
            active: out.active,
            solution: out.solution,
            report,
        });
        match next {
            Some(fine) => data = fine,
            None => return Ok(results),
        }
    }
}
