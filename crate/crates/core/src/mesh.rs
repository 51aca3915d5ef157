//! Structured simplicial meshes of unions of axis-aligned boxes.
//!
//! Every box is covered by a uniform grid of cells with side `2^-level`. In two
//! dimensions each square cell is split into two right triangles along the
//! diagonal from its lower-left to its upper-right corner. Nodes are numbered
//! lexicographically by `(box, y, x)`; boxes never share nodes.

use std::io::{self, Write};

use thiserror::Error;

/// A point in one or two space dimensions. One-dimensional meshes keep the
/// second coordinate at zero.
pub type Point = [f64; 2];

/// Relative tolerance used when checking that box sides are whole multiples
/// of the cell size.
const ALIGN_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("dimension must be 1 or 2, got {0}")]
    BadDimension(usize),
    #[error("domain has no boxes")]
    Empty,
    #[error("box {index} is degenerate: lower {lower:?}, upper {upper:?}")]
    DegenerateBox {
        index: usize,
        lower: Point,
        upper: Point,
    },
    #[error("boxes {0} and {1} are not disjoint")]
    Overlap(usize, usize),
    #[error("side {side} of box {index} is not a multiple of the cell size {cell} at level {level}")]
    Misaligned {
        index: usize,
        side: f64,
        cell: f64,
        level: u32,
    },
    #[error("meshes are not a coarse/fine pair (levels {coarse} and {fine})")]
    NotRefinementPair { coarse: u32, fine: u32 },
    #[error("expected {expected} nodal values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
}

/// An axis-aligned interval (1D) or rectangle (2D).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxRegion {
    pub lower: Point,
    pub upper: Point,
}

impl BoxRegion {
    pub fn new(lower: Point, upper: Point) -> Self {
        Self { lower, upper }
    }

    fn side(&self, axis: usize) -> f64 {
        self.upper[axis] - self.lower[axis]
    }
}

/// A union of pairwise disjoint boxes of a common dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    dim: usize,
    boxes: Vec<BoxRegion>,
}

impl Domain {
    /// Builds a domain, rejecting degenerate or touching boxes.
    pub fn new(dim: usize, boxes: Vec<BoxRegion>) -> Result<Self, MeshError> {
        if dim != 1 && dim != 2 {
            return Err(MeshError::BadDimension(dim));
        }
        if boxes.is_empty() {
            return Err(MeshError::Empty);
        }
        let mut boxes = boxes;
        for (index, b) in boxes.iter_mut().enumerate() {
            if dim == 1 {
                b.lower[1] = 0.0;
                b.upper[1] = 0.0;
            }
            if (0..dim).any(|a| !(b.side(a) > 0.0) || !b.side(a).is_finite()) {
                return Err(MeshError::DegenerateBox {
                    index,
                    lower: b.lower,
                    upper: b.upper,
                });
            }
        }
        for a in 0..boxes.len() {
            for b in a + 1..boxes.len() {
                let separated = (0..dim).any(|ax| {
                    boxes[a].upper[ax] < boxes[b].lower[ax] || boxes[b].upper[ax] < boxes[a].lower[ax]
                });
                if !separated {
                    return Err(MeshError::Overlap(a, b));
                }
            }
        }
        Ok(Self { dim, boxes })
    }

    pub fn interval(a: f64, b: f64) -> Result<Self, MeshError> {
        Self::new(1, vec![BoxRegion::new([a, 0.0], [b, 0.0])])
    }

    pub fn rectangle(lower: Point, upper: Point) -> Result<Self, MeshError> {
        Self::new(2, vec![BoxRegion::new(lower, upper)])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn boxes(&self) -> &[BoxRegion] {
        &self.boxes
    }

    /// Lebesgue measure (length or area) of the domain.
    pub fn measure(&self) -> f64 {
        self.boxes
            .iter()
            .map(|b| (0..self.dim).map(|a| b.side(a)).product::<f64>())
            .sum()
    }
}

/// Grid layout of one box: node indices `offset + iy * (nx + 1) + ix`.
#[derive(Debug, Clone, PartialEq)]
struct Block {
    offset: usize,
    nx: usize,
    ny: usize,
    lower: Point,
}

impl Block {
    fn index(&self, ix: usize, iy: usize) -> usize {
        self.offset + iy * (self.nx + 1) + ix
    }

    fn node_count(&self) -> usize {
        (self.nx + 1) * (self.ny + 1)
    }
}

/// A conforming P1 triangulation of a [`Domain`] at a fixed refinement level.
#[derive(Debug, Clone)]
pub struct Mesh {
    domain: Domain,
    level: u32,
    cell: f64,
    h: f64,
    nodes: Vec<Point>,
    elements: Vec<[usize; 3]>,
    hat_integrals: Vec<f64>,
    blocks: Vec<Block>,
}

fn cells_along(side: f64, cell: f64, index: usize, level: u32) -> Result<usize, MeshError> {
    let ratio = side / cell;
    let n = ratio.round();
    if n < 1.0 || (ratio - n).abs() > ALIGN_TOL * ratio.max(1.0) {
        return Err(MeshError::Misaligned {
            index,
            side,
            cell,
            level,
        });
    }
    Ok(n as usize)
}

/// Builds the uniform mesh of `domain` with cell side `2^-level`.
pub fn build_mesh(domain: &Domain, level: u32) -> Result<Mesh, MeshError> {
    let dim = domain.dim();
    let cell = (0.5f64).powi(level as i32);
    let mut blocks = Vec::with_capacity(domain.boxes().len());
    let mut offset = 0;
    for (index, b) in domain.boxes().iter().enumerate() {
        let nx = cells_along(b.side(0), cell, index, level)?;
        let ny = if dim == 2 {
            cells_along(b.side(1), cell, index, level)?
        } else {
            0
        };
        let block = Block {
            offset,
            nx,
            ny,
            lower: b.lower,
        };
        offset += block.node_count();
        blocks.push(block);
    }

    let mut nodes = Vec::with_capacity(offset);
    let mut elements = Vec::new();
    for block in &blocks {
        for iy in 0..=block.ny {
            for ix in 0..=block.nx {
                let y = if dim == 2 {
                    block.lower[1] + iy as f64 * cell
                } else {
                    0.0
                };
                nodes.push([block.lower[0] + ix as f64 * cell, y]);
            }
        }
        if dim == 1 {
            for ix in 0..block.nx {
                elements.push([block.index(ix, 0), block.index(ix + 1, 0), usize::MAX]);
            }
        } else {
            for iy in 0..block.ny {
                for ix in 0..block.nx {
                    let a = block.index(ix, iy);
                    let b = block.index(ix + 1, iy);
                    let c = block.index(ix + 1, iy + 1);
                    let d = block.index(ix, iy + 1);
                    elements.push([a, b, c]);
                    elements.push([a, c, d]);
                }
            }
        }
    }

    // Closed-form hat integrals: every element contributes |T| / (dim + 1) to
    // each of its vertices.
    let element_measure = if dim == 1 { cell } else { 0.5 * cell * cell };
    let share = element_measure / (dim + 1) as f64;
    let mut hat_integrals = vec![0.0; nodes.len()];
    for e in &elements {
        for &v in &e[..=dim] {
            hat_integrals[v] += share;
        }
    }

    let h = if dim == 1 { cell } else { cell * std::f64::consts::SQRT_2 };
    Ok(Mesh {
        domain: domain.clone(),
        level,
        cell,
        h,
        nodes,
        elements,
        hat_integrals,
        blocks,
    })
}

/// Uniform refinement: the mesh of the same domain one level finer.
pub fn refine(mesh: &Mesh) -> Mesh {
    build_mesh(&mesh.domain, mesh.level + 1).expect("a valid mesh refines to a valid mesh")
}

/// Evaluates the P1 function with nodal `values` on `coarse` at the nodes of
/// `fine`, which must be the uniform refinement of `coarse`.
pub fn prolongate(coarse: &Mesh, fine: &Mesh, values: &[f64]) -> Result<Vec<f64>, MeshError> {
    check_pair(coarse, fine)?;
    if values.len() != coarse.node_count() {
        return Err(MeshError::LengthMismatch {
            expected: coarse.node_count(),
            got: values.len(),
        });
    }
    let mut out = vec![0.0; fine.node_count()];
    for (cb, fb) in coarse.blocks.iter().zip(&fine.blocks) {
        for fy in 0..=fb.ny {
            for fx in 0..=fb.nx {
                let v = |ix: usize, iy: usize| values[cb.index(ix, iy)];
                let (cx, cy) = (fx / 2, fy / 2);
                let value = match (fx % 2, fy % 2) {
                    (0, 0) => v(cx, cy),
                    (1, 0) => 0.5 * (v(cx, cy) + v(cx + 1, cy)),
                    (0, 1) => 0.5 * (v(cx, cy) + v(cx, cy + 1)),
                    // midpoint of the lower-left to upper-right diagonal
                    _ => 0.5 * (v(cx, cy) + v(cx + 1, cy + 1)),
                };
                out[fb.index(fx, fy)] = value;
            }
        }
    }
    Ok(out)
}

/// Index in `fine` of every node of `coarse`.
pub fn coarse_to_fine(coarse: &Mesh, fine: &Mesh) -> Result<Vec<usize>, MeshError> {
    check_pair(coarse, fine)?;
    let mut map = Vec::with_capacity(coarse.node_count());
    for (cb, fb) in coarse.blocks.iter().zip(&fine.blocks) {
        for cy in 0..=cb.ny {
            for cx in 0..=cb.nx {
                map.push(fb.index(2 * cx, 2 * cy));
            }
        }
    }
    Ok(map)
}

fn check_pair(coarse: &Mesh, fine: &Mesh) -> Result<(), MeshError> {
    if fine.level != coarse.level + 1 || fine.domain != coarse.domain {
        return Err(MeshError::NotRefinementPair {
            coarse: coarse.level,
            fine: fine.level,
        });
    }
    Ok(())
}

/// Nodal values `(f(z))_z`, the coefficient vector of the nodal interpolant.
pub fn interpolate_nodal<F>(mesh: &Mesh, f: F) -> Vec<f64>
where
    F: Fn(&Point) -> f64,
{
    mesh.nodes.iter().map(f).collect()
}

impl Mesh {
    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    /// Maximal element diameter.
    pub fn h(&self) -> f64 {
        self.h
    }

    /// Side length of the grid cells.
    pub fn cell_size(&self) -> f64 {
        self.cell
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn element_count(&self) -> usize {
        self.elements.len()
    }

    /// Vertex indices of element `e` (two in 1D, three in 2D).
    pub fn element(&self, e: usize) -> &[usize] {
        &self.elements[e][..=self.dim()]
    }

    pub fn elements(&self) -> impl Iterator<Item = &[usize]> + '_ {
        (0..self.elements.len()).map(move |e| self.element(e))
    }

    /// `β_z = ∫ φ_z dx` for every node `z`.
    pub fn hat_integrals(&self) -> &[f64] {
        &self.hat_integrals
    }

    /// Writes the plain-text debugging dump: `node x [y]` and `element i j [k]` lines.
    pub fn write_dump<W: Write>(&self, mut w: W) -> io::Result<()> {
        for p in &self.nodes {
            if self.dim() == 1 {
                writeln!(w, "node {:.17e}", p[0])?;
            } else {
                writeln!(w, "node {:.17e} {:.17e}", p[0], p[1])?;
            }
        }
        for e in self.elements() {
            let ids: Vec<String> = e.iter().map(|v| v.to_string()).collect();
            writeln!(w, "element {}", ids.join(" "))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_interval() -> Domain {
        Domain::interval(0.0, 1.0).unwrap()
    }

    #[test]
    fn interval_level_one() {
        let m = build_mesh(&unit_interval(), 1).unwrap();
        let xs: Vec<f64> = m.nodes().iter().map(|p| p[0]).collect();
        assert_eq!(xs, vec![0.0, 0.5, 1.0]);
        assert_eq!(m.element_count(), 2);
        assert_eq!(m.h(), 0.5);
        assert_eq!(m.hat_integrals(), &[0.25, 0.5, 0.25]);
    }

    #[test]
    fn node_counts() {
        assert_eq!(build_mesh(&unit_interval(), 7).unwrap().node_count(), 129);
        let x = Domain::rectangle([0.0, 0.0], [1.0, 1.0]).unwrap();
        let y = Domain::rectangle([0.0, 0.0], [2.0, 3.0]).unwrap();
        let mx = build_mesh(&x, 3).unwrap();
        let my = build_mesh(&y, 3).unwrap();
        assert_eq!(mx.node_count() + my.node_count(), 506);
        assert_eq!(refine(&my).node_count(), 33 * 49);
    }

    #[test]
    fn refine_interval() {
        let m = refine(&build_mesh(&unit_interval(), 1).unwrap());
        let xs: Vec<f64> = m.nodes().iter().map(|p| p[0]).collect();
        assert_eq!(xs, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(m.level(), 2);
    }

    #[test]
    fn triangles_use_lower_left_diagonal() {
        let m = build_mesh(&Domain::rectangle([0.0, 0.0], [1.0, 1.0]).unwrap(), 0).unwrap();
        assert_eq!(m.element(0), &[0, 1, 3]);
        assert_eq!(m.element(1), &[0, 3, 2]);
        // corners on the diagonal touch both triangles
        assert_eq!(m.hat_integrals(), &[1.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 3.0]);
        assert!((m.h() - std::f64::consts::SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn misaligned_box_is_rejected() {
        let d = Domain::new(
            2,
            vec![
                BoxRegion::new([-1.5, -0.5], [-1.0, 0.5]),
                BoxRegion::new([1.0, -0.5], [1.5, 0.5]),
            ],
        )
        .unwrap();
        assert!(matches!(build_mesh(&d, 0), Err(MeshError::Misaligned { .. })));
        assert_eq!(build_mesh(&d, 1).unwrap().node_count(), 2 * 2 * 3);
    }

    #[test]
    fn overlapping_boxes_are_rejected() {
        let r = Domain::new(
            2,
            vec![
                BoxRegion::new([0.0, 0.0], [1.0, 1.0]),
                BoxRegion::new([0.5, 0.5], [2.0, 2.0]),
            ],
        );
        assert_eq!(r.unwrap_err(), MeshError::Overlap(0, 1));
    }

    #[test]
    fn prolongate_midpoint() {
        let c = build_mesh(&unit_interval(), 0).unwrap();
        let f = refine(&c);
        assert_eq!(prolongate(&c, &f, &[0.0, 1.0]).unwrap(), vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn prolongate_rejects_wrong_pair() {
        let c = build_mesh(&unit_interval(), 0).unwrap();
        let f = build_mesh(&unit_interval(), 2).unwrap();
        assert!(prolongate(&c, &f, &[0.0, 1.0]).is_err());
        let f = refine(&c);
        assert!(matches!(
            prolongate(&c, &f, &[0.0]),
            Err(MeshError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn interpolation_is_pointwise() {
        let m = build_mesh(&unit_interval(), 1).unwrap();
        assert_eq!(interpolate_nodal(&m, |_| 0.0), vec![0.0; 3]);
        assert_eq!(interpolate_nodal(&m, |p| p[0]), vec![0.0, 0.5, 1.0]);
        assert_eq!(interpolate_nodal(&m, |p| p[0] * p[0]), vec![0.0, 0.25, 1.0]);
    }

    #[test]
    fn coarse_nodes_map_to_identical_fine_nodes() {
        let d = Domain::rectangle([-0.5, -0.5], [0.5, 0.5]).unwrap();
        let c = build_mesh(&d, 2).unwrap();
        let f = refine(&c);
        for (i, fi) in coarse_to_fine(&c, &f).unwrap().into_iter().enumerate() {
            assert_eq!(c.nodes()[i], f.nodes()[fi]);
        }
    }

    #[test]
    fn dump_format() {
        let m = build_mesh(&unit_interval(), 0).unwrap();
        let mut buf = Vec::new();
        m.write_dump(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].starts_with("node "));
        assert_eq!(lines[2], "element 0 1");
    }
}
