//! Benchmark transport problems with known solutions.
//!
//! * `ex1`: `[0,1] -> [0,1]`, density `2(x+1)/3` to the uniform density.
//! * `ex2`: unit square to the rectangle `[0,2] x [0,3]`, density `12 x_2` to
//!   the uniform density. Both measures have total mass 6.
//! * `ex3`: an oscillating density on `[-1/2,1/2]^2` to the uniform density,
//!   built so that a smooth Brenier potential is known in closed form.
//! * `ex4`: the uniform square split into two rectangles, a discontinuous map.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::mesh::{coarse_to_fine, Domain, BoxRegion, Mesh, MeshError, Point};

pub type ScalarField = Arc<dyn Fn(&Point) -> f64 + Send + Sync>;
pub type VectorField = Arc<dyn Fn(&Point) -> Point + Send + Sync>;

pub const PROBLEM_NAMES: [&str; 4] = ["ex1", "ex2", "ex3", "ex4"];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("unknown problem {0:?}, expected one of ex1, ex2, ex3, ex4")]
    UnknownName(String),
    #[error("no reference multiplier available")]
    NoReference,
    #[error("need at least two levels for extrapolation, got {0}")]
    TooFewLevels(usize),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("multiplier has {got} values, mesh has {expected} nodes")]
    LengthMismatch { expected: usize, got: usize },
}

/// Closed-form solution for the quadratic cost `|x - y|^2 / 2`.
#[derive(Clone)]
pub struct ExactSolution {
    /// Brenier potential `Φ` with `T = ∇Φ`.
    pub potential: ScalarField,
    pub map: VectorField,
    /// `φ(x) = |x|^2 / 2 - Φ(x)`.
    pub multiplier: ScalarField,
    /// Optimal cost including the total mass.
    pub optimal_cost: f64,
}

#[derive(Clone)]
pub struct Problem {
    pub name: String,
    pub domain_x: Domain,
    pub domain_y: Domain,
    pub density_f: ScalarField,
    pub density_g: ScalarField,
    /// Common total mass of both densities. Discrete measures are normalized
    /// to unit mass, so discrete objectives are multiplied by this value.
    pub mass: f64,
    pub exact: Option<ExactSolution>,
    /// Optimal cost as a function of `p` where it is known for every `p`.
    pub cost_for_p: Option<Arc<dyn Fn(f64) -> f64 + Send + Sync>>,
}

impl fmt::Debug for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem")
            .field("name", &self.name)
            .field("domain_x", &self.domain_x)
            .field("domain_y", &self.domain_y)
            .field("mass", &self.mass)
            .field("exact", &self.exact.is_some())
            .finish()
    }
}

impl Problem {
    /// A problem without exact data, e.g. for random test instances.
    pub fn new(name: &str, domain_x: Domain, domain_y: Domain, density_f: ScalarField, density_g: ScalarField) -> Self {
        Self {
            name: name.to_string(),
            domain_x,
            domain_y,
            density_f,
            density_g,
            mass: 1.0,
            exact: None,
            cost_for_p: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.domain_x.dim()
    }

    /// Exact optimal cost for `c_p`, if known.
    pub fn exact_cost(&self, p: f64) -> Option<f64> {
        if let Some(cost) = &self.cost_for_p {
            return Some(cost(p));
        }
        match &self.exact {
            Some(e) if p == 2.0 => Some(e.optimal_cost),
            _ => None,
        }
    }

    /// Exact multiplier for `c_2`, if known.
    pub fn exact_multiplier(&self) -> Option<&ScalarField> {
        self.exact.as_ref().map(|e| &e.multiplier)
    }
}

pub fn make_problem(name: &str) -> Result<Problem, ProblemError> {
    match name {
        "ex1" => Ok(ex1()),
        "ex2" => Ok(ex2()),
        "ex3" => Ok(ex3()),
        "ex4" => Ok(ex4()),
        _ => Err(ProblemError::UnknownName(name.to_string())),
    }
}

fn ex1() -> Problem {
    let unit = Domain::interval(0.0, 1.0).unwrap();
    Problem {
        name: "ex1".into(),
        domain_x: unit.clone(),
        domain_y: unit,
        density_f: Arc::new(|x| 2.0 / 3.0 * (x[0] + 1.0)),
        density_g: Arc::new(|_| 1.0),
        mass: 1.0,
        exact: Some(ExactSolution {
            potential: Arc::new(|x| x[0].powi(3) / 9.0 + x[0] * x[0] / 3.0),
            map: Arc::new(|x| [x[0] * x[0] / 3.0 + 2.0 * x[0] / 3.0, 0.0]),
            multiplier: Arc::new(|x| x[0] * x[0] / 6.0 - x[0].powi(3) / 9.0),
            optimal_cost: 1.0 / 540.0,
        }),
        cost_for_p: None,
    }
}

fn ex2() -> Problem {
    Problem {
        name: "ex2".into(),
        domain_x: Domain::rectangle([0.0, 0.0], [1.0, 1.0]).unwrap(),
        domain_y: Domain::rectangle([0.0, 0.0], [2.0, 3.0]).unwrap(),
        density_f: Arc::new(|x| 12.0 * x[1]),
        density_g: Arc::new(|_| 1.0),
        mass: 6.0,
        exact: Some(ExactSolution {
            potential: Arc::new(|x| x[0] * x[0] + x[1].powi(3)),
            map: Arc::new(|x| [2.0 * x[0], 3.0 * x[1] * x[1]]),
            multiplier: Arc::new(|x| -x[0] * x[0] / 2.0 + x[1] * x[1] / 2.0 - x[1].powi(3)),
            optimal_cost: 4.3,
        }),
        cost_for_p: None,
    }
}

/// `(q(z), q'(z), q''(z))` for the profile used by `ex3`.
pub fn q_funcs(z: f64) -> (f64, f64, f64) {
    let (s, c) = (8.0 * PI * z).sin_cos();
    let a = -z * z / (8.0 * PI) + 1.0 / (256.0 * PI.powi(3)) + 1.0 / (32.0 * PI);
    let q = a * c + z * s / (32.0 * PI * PI);
    let w = z * z - 0.25;
    let dq = w * s;
    let ddq = 2.0 * z * s + 8.0 * PI * w * c;
    (q, dq, ddq)
}

fn ex3_density(x: &Point) -> f64 {
    let (q1, d1, dd1) = q_funcs(x[0]);
    let (q2, d2, dd2) = q_funcs(x[1]);
    1.0 + 4.0 * (dd1 * q2 + q1 * dd2) + 16.0 * (q1 * q2 * dd1 * dd2 - d1 * d1 * d2 * d2)
}

fn ex3_map(x: &Point) -> Point {
    let (q1, d1, _) = q_funcs(x[0]);
    let (q2, d2, _) = q_funcs(x[1]);
    [x[0] + 4.0 * d1 * q2, x[1] + 4.0 * q1 * d2]
}

fn ex3() -> Problem {
    let square = Domain::rectangle([-0.5, -0.5], [0.5, 0.5]).unwrap();
    let cost = gauss_legendre_2d([-0.5, -0.5], [0.5, 0.5], 64, |x| {
        let t = ex3_map(x);
        let d = [t[0] - x[0], t[1] - x[1]];
        0.5 * (d[0] * d[0] + d[1] * d[1]) * ex3_density(x)
    });
    Problem {
        name: "ex3".into(),
        domain_x: square.clone(),
        domain_y: square,
        density_f: Arc::new(ex3_density),
        density_g: Arc::new(|_| 1.0),
        mass: 1.0,
        exact: Some(ExactSolution {
            potential: Arc::new(|x| {
                0.5 * (x[0] * x[0] + x[1] * x[1]) + 4.0 * q_funcs(x[0]).0 * q_funcs(x[1]).0
            }),
            map: Arc::new(ex3_map),
            multiplier: Arc::new(|x| -4.0 * q_funcs(x[0]).0 * q_funcs(x[1]).0),
            optimal_cost: cost,
        }),
        cost_for_p: None,
    }
}

fn ex4() -> Problem {
    let target = Domain::new(
        2,
        vec![
            BoxRegion::new([-1.5, -0.5], [-1.0, 0.5]),
            BoxRegion::new([1.0, -0.5], [1.5, 0.5]),
        ],
    )
    .unwrap();
    Problem {
        name: "ex4".into(),
        domain_x: Domain::rectangle([-0.5, -0.5], [0.5, 0.5]).unwrap(),
        domain_y: target,
        density_f: Arc::new(|_| 1.0),
        density_g: Arc::new(|_| 1.0),
        mass: 1.0,
        exact: Some(ExactSolution {
            potential: Arc::new(|x| 0.5 * (x[0] * x[0] + x[1] * x[1]) + x[0].abs()),
            map: Arc::new(|x| [x[0] + x[0].signum(), x[1]]),
            multiplier: Arc::new(|x| -x[0].abs()),
            optimal_cost: 0.5,
        }),
        // every point moves by exactly one unit
        cost_for_p: Some(Arc::new(|p| 1.0 / p)),
    }
}

const GAUSS5_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683,
    0.0,
    0.538_469_310_105_683,
    0.906_179_845_938_664,
];
const GAUSS5_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189,
    0.478_628_670_499_366,
    0.568_888_888_888_889,
    0.478_628_670_499_366,
    0.236_926_885_056_189,
];

/// Composite 5-point Gauss-Legendre rule on `panels x panels` subrectangles.
pub fn gauss_legendre_2d<F>(lower: Point, upper: Point, panels: usize, f: F) -> f64
where
    F: Fn(&Point) -> f64,
{
    let hx = (upper[0] - lower[0]) / panels as f64;
    let hy = (upper[1] - lower[1]) / panels as f64;
    let mut total = 0.0;
    for py in 0..panels {
        let cy = lower[1] + (py as f64 + 0.5) * hy;
        for px in 0..panels {
            let cx = lower[0] + (px as f64 + 0.5) * hx;
            for (u, wu) in GAUSS5_NODES.iter().zip(GAUSS5_WEIGHTS) {
                for (v, wv) in GAUSS5_NODES.iter().zip(GAUSS5_WEIGHTS) {
                    let x = [cx + 0.5 * hx * u, cy + 0.5 * hy * v];
                    total += wu * wv * f(&x);
                }
            }
        }
    }
    total * 0.25 * hx * hy
}

/// Richardson extrapolation assuming second order convergence, from the
/// objectives of consecutive levels (coarse to fine).
pub fn reference_cost(objectives: &[f64]) -> Result<f64, ProblemError> {
    match objectives {
        [.., coarse, fine] => Ok(fine + (fine - coarse) / 3.0),
        _ => Err(ProblemError::TooFewLevels(objectives.len())),
    }
}

/// `min_t max_i |reference_i - (computed_i + t)|`, attained at the midpoint
/// of the range of the residuals.
pub fn gauged_sup_distance(reference: &[f64], computed: &[f64]) -> f64 {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (r, c) in reference.iter().zip(computed) {
        let d = r - c;
        lo = lo.min(d);
        hi = hi.max(d);
    }
    if lo > hi {
        return 0.0;
    }
    0.5 * (hi - lo)
}

/// Sup-norm distance of the discrete multiplier `phi` on `mesh_x` to the
/// nodal interpolant of the exact multiplier, up to an additive constant.
pub fn multiplier_error(phi: &[f64], problem: &Problem, mesh_x: &Mesh) -> Result<f64, ProblemError> {
    let exact = problem.exact_multiplier().ok_or(ProblemError::NoReference)?;
    if phi.len() != mesh_x.node_count() {
        return Err(ProblemError::LengthMismatch {
            expected: mesh_x.node_count(),
            got: phi.len(),
        });
    }
    let reference: Vec<f64> = mesh_x.nodes().iter().map(|x| exact(x)).collect();
    Ok(gauged_sup_distance(&reference, phi))
}

/// Like [`multiplier_error`], with the multiplier of the next finer level as
/// the reference, compared at the coarse nodes.
pub fn multiplier_difference(
    coarse_phi: &[f64],
    coarse_mesh: &Mesh,
    fine_phi: &[f64],
    fine_mesh: &Mesh,
) -> Result<f64, ProblemError> {
    let map = coarse_to_fine(coarse_mesh, fine_mesh)?;
    if coarse_phi.len() != map.len() || fine_phi.len() != fine_mesh.node_count() {
        return Err(ProblemError::LengthMismatch {
            expected: map.len(),
            got: coarse_phi.len(),
        });
    }
    let reference: Vec<f64> = map.iter().map(|&k| fine_phi[k]).collect();
    Ok(gauged_sup_distance(&reference, coarse_phi))
}
