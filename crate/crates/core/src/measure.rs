//! Discrete probability measures supported on mesh nodes.

use std::sync::Arc;

use thiserror::Error;

use crate::mesh::{Mesh, Point};

/// Densities slightly below zero within this tolerance are clamped to zero.
pub const NEGATIVE_DENSITY_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeasureError {
    #[error("invalid density: value {value} at node {node}")]
    InvalidDensity { node: usize, value: f64 },
    #[error("density has non-positive total mass {0}")]
    NoMass(f64),
}

/// A convex combination of Dirac masses at the nodes of a mesh.
#[derive(Debug, Clone)]
pub struct DiscreteMeasure {
    mesh: Arc<Mesh>,
    weights: Vec<f64>,
    raw_mass: f64,
}

/// Lumped image of the density under the adjoint nodal interpolation,
/// `w_i = β_i f(x_i)`, normalized to unit total mass.
pub fn discretize_density<F>(mesh: Arc<Mesh>, density: F) -> Result<DiscreteMeasure, MeasureError>
where
    F: Fn(&Point) -> f64,
{
    let mut weights = Vec::with_capacity(mesh.node_count());
    for (node, (x, beta)) in mesh.nodes().iter().zip(mesh.hat_integrals()).enumerate() {
        let value = density(x);
        if value.is_nan() || value < -NEGATIVE_DENSITY_TOL {
            return Err(MeasureError::InvalidDensity { node, value });
        }
        weights.push(beta * value.max(0.0));
    }
    let raw_mass: f64 = weights.iter().sum();
    if !(raw_mass > 0.0) || !raw_mass.is_finite() {
        return Err(MeasureError::NoMass(raw_mass));
    }
    for w in &mut weights {
        *w /= raw_mass;
    }
    Ok(DiscreteMeasure {
        mesh,
        weights,
        raw_mass,
    })
}

impl DiscreteMeasure {
    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Quadrature mass `Σ β_i f(x_i)` of the density before normalization.
    pub fn raw_mass(&self) -> f64 {
        self.raw_mass
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// `⟨μ_h, u⟩ = Σ_i w_i u(x_i)`.
    pub fn pair<U>(&self, u: U) -> f64
    where
        U: Fn(&Point) -> f64,
    {
        self.mesh
            .nodes()
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * u(x))
            .sum()
    }
}
