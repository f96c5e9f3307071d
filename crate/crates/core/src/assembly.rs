//! P1 element matrices, global assembly of the Poisson stiffness matrix and
//! load vector, and elimination of the homogeneous Dirichlet nodes.

use crate::error::{Error, Result};
use crate::mesh::{Mesh, Point2};
use crate::quadrature::{integrate_on_cell, QuadratureRule};
use crate::sparse::{CsrMatrix, TripletBuilder};

/// Cells with a smaller area are rejected by the element routines.
pub const MIN_CELL_AREA: f64 = 1e-300;

pub type LocalMatrix = [[f64; 3]; 3];

/// Constant gradients of the three barycentric basis functions and the area.
pub fn basis_gradients(p: [Point2; 3]) -> Result<([[f64; 2]; 3], f64)> {
    // Jacobian of the reference map, columns p1 - p0 and p2 - p0
    let j = [
        [p[1].x - p[0].x, p[2].x - p[0].x],
        [p[1].y - p[0].y, p[2].y - p[0].y],
    ];
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    let area = 0.5 * det;
    if !(area > MIN_CELL_AREA) {
        return Err(Error::DegenerateGeometry(format!(
            "cell area {area:e} is not positive"
        )));
    }
    // rows of J^{-1} are the gradients of the reference coordinates
    let g1 = [j[1][1] / det, -j[0][1] / det];
    let g2 = [-j[1][0] / det, j[0][0] / det];
    let g0 = [-g1[0] - g2[0], -g1[1] - g2[1]];
    Ok(([g0, g1, g2], area))
}

pub fn local_stiffness(mesh: &Mesh, cell: usize) -> Result<LocalMatrix> {
    let (g, area) = basis_gradients(mesh.cell_points(cell)).map_err(|e| with_cell(e, cell))?;
    let mut k = [[0.0; 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            k[a][b] = area * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
        }
    }
    Ok(k)
}

pub fn local_mass(mesh: &Mesh, cell: usize) -> Result<LocalMatrix> {
    let area = mesh.cell_area(cell);
    if !(area > MIN_CELL_AREA) {
        return Err(Error::DegenerateGeometry(format!(
            "cell {cell} area {area:e} is not positive"
        )));
    }
    let d = area / 6.0;
    let o = area / 12.0;
    Ok([[d, o, o], [o, d, o], [o, o, d]])
}

fn with_cell(e: Error, cell: usize) -> Error {
    match e {
        Error::DegenerateGeometry(m) => Error::DegenerateGeometry(format!("cell {cell}: {m}")),
        other => other,
    }
}

/// Standard stiffness matrix on the full vertex numbering.
pub fn assemble_stiffness(mesh: &Mesh) -> Result<CsrMatrix> {
    assemble_stiffness_weighted(mesh, |_| Some(1.0))
}

/// Stiffness assembled over the cells for which `weight` returns
/// `Some(s)`, each local matrix scaled by `s`. Cells are visited in index
/// order.
pub fn assemble_stiffness_weighted(
    mesh: &Mesh,
    weight: impl Fn(usize) -> Option<f64>,
) -> Result<CsrMatrix> {
    let mut b = TripletBuilder::with_capacity(mesh.num_vertices(), 9 * mesh.num_cells());
    for k in 0..mesh.num_cells() {
        let Some(s) = weight(k) else { continue };
        let mut loc = local_stiffness(mesh, k)?;
        if s != 1.0 {
            loc.iter_mut().flatten().for_each(|v| *v *= s);
        }
        b.add_local(&mesh.cell(k).v, &loc);
    }
    Ok(b.build())
}

/// Mass matrix over the cells accepted by `weight`, scaled like
/// [`assemble_stiffness_weighted`].
pub fn assemble_mass_weighted(
    mesh: &Mesh,
    weight: impl Fn(usize) -> Option<f64>,
) -> Result<CsrMatrix> {
    let mut b = TripletBuilder::with_capacity(mesh.num_vertices(), 9 * mesh.num_cells());
    for k in 0..mesh.num_cells() {
        let Some(s) = weight(k) else { continue };
        let mut loc = local_mass(mesh, k)?;
        loc.iter_mut().flatten().for_each(|v| *v *= s);
        b.add_local(&mesh.cell(k).v, &loc);
    }
    Ok(b.build())
}

/// Load vector `b_i = int f phi_i` on the full vertex numbering.
pub fn assemble_load(
    mesh: &Mesh,
    f: impl Fn(Point2) -> f64,
    rule: &QuadratureRule,
) -> Result<Vec<f64>> {
    if rule.degree < 4 {
        return Err(Error::invalid(format!(
            "load assembly needs a rule of degree >= 4, got {}",
            rule.degree
        )));
    }
    let mut b = vec![0.0; mesh.num_vertices()];
    for k in 0..mesh.num_cells() {
        let p = mesh.cell_points(k);
        let area = mesh.cell_area(k);
        let v = mesh.cell(k).v;
        let mut loc = [0.0; 3];
        for (l, w) in rule.points.iter().zip(rule.weights) {
            let x = Point2::new(
                l[0] * p[0].x + l[1] * p[1].x + l[2] * p[2].x,
                l[0] * p[0].y + l[1] * p[1].y + l[2] * p[2].y,
            );
            let fx = w * area * f(x);
            for a in 0..3 {
                loc[a] += fx * l[a];
            }
        }
        for a in 0..3 {
            b[v[a]] += loc[a];
        }
    }
    Ok(b)
}

/// `int_K f` summed over all cells.
pub fn integrate(mesh: &Mesh, f: impl Fn(Point2) -> f64, rule: &QuadratureRule) -> f64 {
    (0..mesh.num_cells())
        .map(|k| integrate_on_cell(mesh, k, &f, rule))
        .sum()
}

/// Numbering of the interior (free) vertices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DofMap {
    /// Reduced index -> vertex index.
    pub interior_of_full: Vec<usize>,
    /// Vertex index -> reduced index, `None` on the boundary.
    pub full_to_reduced: Vec<Option<usize>>,
    pub boundary: Vec<bool>,
}

impl DofMap {
    pub fn new(mesh: &Mesh) -> Self {
        let boundary = mesh.boundary_vertex().to_vec();
        let mut interior_of_full = Vec::new();
        let mut full_to_reduced = vec![None; boundary.len()];
        for (v, &b) in boundary.iter().enumerate() {
            if !b {
                full_to_reduced[v] = Some(interior_of_full.len());
                interior_of_full.push(v);
            }
        }
        DofMap {
            interior_of_full,
            full_to_reduced,
            boundary,
        }
    }

    pub fn num_free(&self) -> usize {
        self.interior_of_full.len()
    }

    pub fn num_full(&self) -> usize {
        self.boundary.len()
    }

    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.interior_of_full.iter().map(|&v| full[v]).collect()
    }

    /// Full vector with zeros on boundary vertices.
    pub fn extend(&self, reduced: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.num_full()];
        for (&v, &x) in self.interior_of_full.iter().zip(reduced) {
            full[v] = x;
        }
        full
    }
}

/// Removes boundary rows and columns; with homogeneous data the right-hand
/// side needs no correction.
pub fn apply_dirichlet(a: &CsrMatrix, b: &[f64], mesh: &Mesh) -> (CsrMatrix, Vec<f64>, DofMap) {
    let dofs = DofMap::new(mesh);
    (
        a.principal_submatrix(&dofs.interior_of_full),
        dofs.restrict(b),
        dofs,
    )
}
