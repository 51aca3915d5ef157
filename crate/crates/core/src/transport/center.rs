//! Centering of degenerate multipliers.
//!
//! The positive entries of an optimal plan split the atoms into connected
//! blocks. Inside a block the multipliers are fixed up to a common constant,
//! but each block can be shifted (`φ + t` on its rows, `ψ - t` on its columns)
//! as long as no active constraint becomes violated. Every block carries the
//! same mass on both sides, so the shift leaves the dual objective unchanged.
//! A basic solution sits at an end of each admissible range; here every shift
//! is moved to the middle of its range by symmetric Gauss-Seidel sweeps. A
//! block bounded from one side only is moved to that bound.

use super::PlanEntry;

const MAX_SWEEPS: usize = 500;

fn find(parent: &mut [usize], mut u: usize) -> usize {
    while parent[u] != u {
        parent[u] = parent[parent[u]];
        u = parent[u];
    }
    u
}

/// Shifts the blocks of `phi`/`psi` in place. `pairs` and `costs` describe
/// the active constraints.
pub(crate) fn center_duals(
    plan: &[PlanEntry],
    pairs: &[(usize, usize)],
    costs: &[f64],
    phi: &mut [f64],
    psi: &mut [f64],
) {
    let rows = phi.len();
    let n = rows + psi.len();
    let mut parent: Vec<usize> = (0..n).collect();
    for e in plan {
        let a = find(&mut parent, e.row);
        let b = find(&mut parent, rows + e.col);
        if a != b {
            parent[a] = b;
        }
    }
    let mut block = vec![usize::MAX; n];
    let mut blocks = 0;
    for u in 0..n {
        let r = find(&mut parent, u);
        if block[r] == usize::MAX {
            block[r] = blocks;
            blocks += 1;
        }
        block[u] = block[r];
    }
    if blocks < 2 {
        return;
    }

    // t_a - t_b <= slack for every active pair from block a to block b
    let mut edges: Vec<(usize, usize, f64)> = pairs
        .iter()
        .zip(costs)
        .filter_map(|(&(i, j), &c)| {
            let (a, b) = (block[i], block[rows + j]);
            (a != b).then(|| (a, b, (c - phi[i] - psi[j]).max(0.0)))
        })
        .collect();
    edges.sort_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)).then(x.2.total_cmp(&y.2)));
    edges.dedup_by(|later, first| later.0 == first.0 && later.1 == first.1);

    // neighbours of each block: (other, slack, is_upper_bound)
    let mut start = vec![0usize; blocks + 1];
    for &(a, b, _) in &edges {
        start[a + 1] += 1;
        start[b + 1] += 1;
    }
    for k in 0..blocks {
        start[k + 1] += start[k];
    }
    let mut fill = start.clone();
    let mut adj = vec![(0usize, 0.0f64, false); 2 * edges.len()];
    for &(a, b, w) in &edges {
        adj[fill[a]] = (b, w, true);
        fill[a] += 1;
        adj[fill[b]] = (a, w, false);
        fill[b] += 1;
    }

    let scale = costs.iter().fold(0.0f64, |m, c| m.max(c.abs())).max(1.0);
    let mut shift = vec![0.0f64; blocks];
    for sweep in 0..MAX_SWEEPS {
        let mut moved = 0.0f64;
        let order: Box<dyn Iterator<Item = usize>> = if sweep % 2 == 0 {
            Box::new(0..blocks)
        } else {
            Box::new((0..blocks).rev())
        };
        for k in order {
            let mut lo = f64::NEG_INFINITY;
            let mut hi = f64::INFINITY;
            for &(other, w, upper) in &adj[start[k]..start[k + 1]] {
                if upper {
                    hi = hi.min(shift[other] + w);
                } else {
                    lo = lo.max(shift[other] - w);
                }
            }
            let target = match (lo.is_finite(), hi.is_finite()) {
                (true, true) => 0.5 * (lo + hi),
                (false, true) => hi,
                (true, false) => lo,
                (false, false) => shift[k],
            };
            // rounding can leave lo a hair above hi
            let target = if lo > hi { shift[k] } else { target };
            moved = moved.max((target - shift[k]).abs());
            shift[k] = target;
        }
        if moved <= 1e-15 * scale {
            break;
        }
    }

    for (i, v) in phi.iter_mut().enumerate() {
        *v += shift[block[i]];
    }
    for (j, v) in psi.iter_mut().enumerate() {
        *v -= shift[block[rows + j]];
    }
}
