//! Turning selected grid squares into sliver/regular cell pairs.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Mesh, Patch, Point2};
use crate::error::{Error, Result};

/// Grid square `(i, j)`: the square with lower-left vertex `(i/n, j/n)`.
pub type GridSquare = (usize, usize);

/// Minimum Chebyshev distance between two degenerated squares.
const SEPARATION: usize = 3;
/// Squares closer than this (in square layers) to the boundary are not
/// eligible for random placement.
const BOUNDARY_GAP: usize = 2;
const PLACEMENT_ATTEMPTS: usize = 1000;

fn grid_of(mesh: &Mesh) -> Result<usize> {
    mesh.grid_size()
        .ok_or_else(|| Error::invalid("square degeneration needs a uniform-grid mesh"))
}

/// Moves the lower-right corner of square `(i, j)` towards the square's
/// diagonal until its distance to the diagonal line equals `epsilon`.
///
/// The lower cell of the square becomes the sliver, the upper cell its
/// regular companion.
pub fn degenerate_square(mesh: &Mesh, square: GridSquare, epsilon: f64) -> Result<(Mesh, Patch)> {
    let (mesh, mut patches) = degenerate_squares(mesh, &[square], epsilon)?;
    Ok((mesh, patches.pop().expect("one patch per square")))
}

/// Batch version of [`degenerate_square`]; the vertex moves are applied
/// together and the mesh is rebuilt once.
pub fn degenerate_squares(
    mesh: &Mesh,
    squares: &[GridSquare],
    epsilon: f64,
) -> Result<(Mesh, Vec<Patch>)> {
    let n = grid_of(mesh)?;
    let np = n + 1;
    let mut vertices = mesh.vertices().to_vec();
    let mut cells = Vec::with_capacity(squares.len());
    for &(i, j) in squares {
        if i < 1 || j < 1 || i + 2 > n || j + 2 > n {
            return Err(Error::invalid(format!(
                "square ({i}, {j}) is not strictly interior to the {n}x{n} grid"
            )));
        }
        let ll = j * np + i;
        let lr = ll + 1;
        let ur = ll + np + 1;
        let (a, b, c) = (vertices[ll], vertices[ur], vertices[lr]);
        let len = a.dist(b);
        // unit normal of the diagonal pointing towards the moved corner
        let normal = ((b.y - a.y) / len, -(b.x - a.x) / len);
        let height = (c.x - a.x) * normal.0 + (c.y - a.y) * normal.1;
        let slack = 1e-12 * height;
        if !(epsilon > 0.0 && epsilon <= height + slack) {
            return Err(Error::invalid(format!(
                "epsilon {epsilon:e} outside (0, {height:e}] for square ({i}, {j})"
            )));
        }
        let shift = height - epsilon;
        if shift > slack {
            vertices[lr] = Point2::new(c.x - shift * normal.0, c.y - shift * normal.1);
        }
        let lower = 2 * (j * n + i);
        cells.push((lower, lower + 1, lr));
    }

    let moved = mesh.with_vertices(vertices)?;
    let mut patches = Vec::with_capacity(cells.len());
    for (deg, nd, apex) in cells {
        let patch = Patch::new(&moved, deg, nd)?;
        debug_assert_eq!(patch.apex_vertex, apex);
        patches.push(patch);
    }
    Ok((moved, patches))
}

/// Largest number of squares with pairwise Chebyshev distance >= 3 that fit
/// in the admissible region of an `n x n` grid.
pub fn max_separated_squares(n: usize) -> usize {
    let m = admissible_range(n).len();
    let per_axis = m.div_ceil(SEPARATION);
    per_axis * per_axis
}

fn admissible_range(n: usize) -> std::ops::Range<usize> {
    BOUNDARY_GAP..n.saturating_sub(BOUNDARY_GAP).max(BOUNDARY_GAP)
}

fn separated(a: GridSquare, b: GridSquare) -> bool {
    a.0.abs_diff(b.0).max(a.1.abs_diff(b.1)) >= SEPARATION
}

/// Seeded placement of `count` squares, pairwise at Chebyshev distance >= 3
/// and at least two square layers away from the boundary. Output is sorted
/// by `(j, i)`.
pub fn select_degenerate_squares(n: usize, count: usize, seed: u64) -> Result<Vec<GridSquare>> {
    let max_feasible = max_separated_squares(n);
    if count > max_feasible {
        return Err(Error::Capacity {
            requested: count,
            max_feasible,
        });
    }
    if count == 0 {
        return Ok(Vec::new());
    }
    let range = admissible_range(n);
    let mut candidates: Vec<GridSquare> = range
        .clone()
        .flat_map(|j| range.clone().map(move |i| (i, j)))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut chosen = Vec::with_capacity(count);
    for _ in 0..PLACEMENT_ATTEMPTS {
        candidates.shuffle(&mut rng);
        chosen.clear();
        for &c in &candidates {
            if chosen.iter().all(|&o| separated(o, c)) {
                chosen.push(c);
                if chosen.len() == count {
                    break;
                }
            }
        }
        if chosen.len() == count {
            break;
        }
    }
    if chosen.len() < count {
        // Random greedy jammed every time; sample from the optimal lattice.
        let mut lattice: Vec<GridSquare> = range
            .clone()
            .step_by(SEPARATION)
            .flat_map(|j| range.clone().step_by(SEPARATION).map(move |i| (i, j)))
            .collect();
        lattice.shuffle(&mut rng);
        lattice.truncate(count);
        chosen = lattice;
    }
    chosen.sort_by_key(|&(i, j)| (j, i));
    Ok(chosen)
}

/// Densest packing allowed by disjoint extended patches: the centre square of
/// every 3x3 block of the grid.
pub fn dense_degenerate_pattern(n: usize) -> Result<Vec<GridSquare>> {
    if !n.is_multiple_of(3) || n < 9 {
        return Err(Error::invalid(format!(
            "dense pattern needs n a multiple of 3 and at least 9, got {n}"
        )));
    }
    let blocks = n / 3;
    Ok((0..blocks)
        .flat_map(|b| (0..blocks).map(move |a| (3 * a + 1, 3 * b + 1)))
        .collect())
}
