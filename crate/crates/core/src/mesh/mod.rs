//! Conforming triangulations of the unit square, sliver generation, cell
//! quality metrics and the patch structure around each sliver.

mod degenerate;
mod io;
mod patch;
mod quality;

use std::collections::HashMap;

use crate::error::{Error, Result};

pub use degenerate::{
    degenerate_square, degenerate_squares, dense_degenerate_pattern, max_separated_squares,
    select_degenerate_squares, GridSquare,
};
pub use io::{read_mesh, read_mesh_file, write_mesh, write_mesh_file, MESH_HEADER};
pub use patch::{validate_assumptions, AssumptionReport, Patch, PatchCheck, DEFAULT_MAX_EXTENDED};
pub use quality::{
    cell_quality, detect_degenerate_cells, CellQuality, DEFAULT_C0, EQUILATERAL_QUALITY,
};

/// Tolerance used when deciding whether a vertex sits on the boundary of the
/// unit square.
const BOUNDARY_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn dist(self, other: Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    fn on_unit_square_boundary(self) -> bool {
        self.x.abs() <= BOUNDARY_TOL
            || (self.x - 1.0).abs() <= BOUNDARY_TOL
            || self.y.abs() <= BOUNDARY_TOL
            || (self.y - 1.0).abs() <= BOUNDARY_TOL
    }
}

/// A triangle given by three vertex indices in counterclockwise order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Cell {
    pub v: [usize; 3],
}

/// An edge of the triangulation with its one or two neighbouring cells.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Facet {
    /// Vertex indices, sorted ascending.
    pub endpoints: [usize; 2],
    pub cells: [usize; 2],
    pub interior: bool,
}

impl Facet {
    pub fn adjacent_cells(&self) -> &[usize] {
        if self.interior {
            &self.cells
        } else {
            &self.cells[..1]
        }
    }
}

/// Signed area of the triangle `(a, b, c)`; positive for counterclockwise order.
pub fn signed_area(a: Point2, b: Point2, c: Point2) -> f64 {
    0.5 * ((b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x))
}

/// Immutable conforming triangulation.
///
/// Topology (cells, facets, vertex-to-cell incidence) is fixed at
/// construction; moving vertices produces a new mesh sharing the same
/// connectivity.
#[derive(Clone, Debug)]
pub struct Mesh {
    vertices: Vec<Point2>,
    cells: Vec<Cell>,
    facets: Vec<Facet>,
    boundary_vertex: Vec<bool>,
    vertex_cells: Vec<Vec<usize>>,
    vertex_facets: Vec<Vec<usize>>,
    h: f64,
    grid: Option<usize>,
}

impl Mesh {
    /// Builds a mesh from raw arrays, deriving facets and checking conformity
    /// and cell orientation.
    pub fn new(
        vertices: Vec<Point2>,
        cells: Vec<Cell>,
        boundary_vertex: Vec<bool>,
        h: f64,
    ) -> Result<Self> {
        if boundary_vertex.len() != vertices.len() {
            return Err(Error::invalid(format!(
                "{} boundary flags for {} vertices",
                boundary_vertex.len(),
                vertices.len()
            )));
        }
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::invalid(format!(
                "mesh step must be positive, got {h}"
            )));
        }
        for (k, p) in vertices.iter().enumerate() {
            if !(p.x.is_finite() && p.y.is_finite()) {
                return Err(Error::invalid(format!(
                    "vertex {k} has non-finite coordinates"
                )));
            }
        }
        for (k, c) in cells.iter().enumerate() {
            let [a, b, d] = c.v;
            if a == b || b == d || a == d {
                return Err(Error::invalid(format!(
                    "cell {k} repeats a vertex: {:?}",
                    c.v
                )));
            }
            if c.v.iter().any(|&i| i >= vertices.len()) {
                return Err(Error::invalid(format!(
                    "cell {k} references a missing vertex"
                )));
            }
        }

        let facets = build_facets(&cells)?;
        let mut vertex_cells = vec![Vec::new(); vertices.len()];
        for (k, c) in cells.iter().enumerate() {
            for &v in &c.v {
                vertex_cells[v].push(k);
            }
        }
        let mut vertex_facets = vec![Vec::new(); vertices.len()];
        for (fi, f) in facets.iter().enumerate() {
            vertex_facets[f.endpoints[0]].push(fi);
            vertex_facets[f.endpoints[1]].push(fi);
        }

        let mesh = Mesh {
            vertices,
            cells,
            facets,
            boundary_vertex,
            vertex_cells,
            vertex_facets,
            h,
            grid: None,
        };
        mesh.check_geometry()?;
        Ok(mesh)
    }

    /// Uniform triangulation of the unit square with `n` squares per side,
    /// each square split along its lower-left to upper-right diagonal.
    ///
    /// Vertex `(i, j)` has index `j * (n + 1) + i`; square `(i, j)` owns cells
    /// `2 * (j * n + i)` (lower) and `2 * (j * n + i) + 1` (upper).
    pub fn uniform_unit_square(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid(format!(
                "uniform mesh needs n >= 2, got {n}"
            )));
        }
        let np = n + 1;
        let mut vertices = Vec::with_capacity(np * np);
        let mut boundary_vertex = Vec::with_capacity(np * np);
        for j in 0..np {
            for i in 0..np {
                vertices.push(Point2::new(i as f64 / n as f64, j as f64 / n as f64));
                boundary_vertex.push(i == 0 || j == 0 || i == n || j == n);
            }
        }
        let cells = uniform_cells(n);
        let mut mesh = Mesh::new(vertices, cells, boundary_vertex, 1.0 / n as f64)?;
        mesh.grid = Some(n);
        Ok(mesh)
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn vertex(&self, v: usize) -> Point2 {
        self.vertices[v]
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn cell(&self, k: usize) -> &Cell {
        &self.cells[k]
    }

    pub fn facets(&self) -> &[Facet] {
        &self.facets
    }

    pub fn boundary_vertex(&self) -> &[bool] {
        &self.boundary_vertex
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.boundary_vertex[v]
    }

    /// Cells incident to vertex `v`.
    pub fn vertex_cells(&self, v: usize) -> &[usize] {
        &self.vertex_cells[v]
    }

    /// Nominal mesh step.
    pub fn h(&self) -> f64 {
        self.h
    }

    /// Squares per side when the mesh has uniform-grid topology.
    pub fn grid_size(&self) -> Option<usize> {
        self.grid
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn cell_points(&self, k: usize) -> [Point2; 3] {
        let [a, b, c] = self.cells[k].v;
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn cell_area(&self, k: usize) -> f64 {
        let [a, b, c] = self.cell_points(k);
        signed_area(a, b, c)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.cells.len()).map(|k| self.cell_area(k)).sum()
    }

    /// Index of the facet joining vertices `a` and `b`, if any.
    pub fn find_facet(&self, a: usize, b: usize) -> Option<usize> {
        let key = if a < b { [a, b] } else { [b, a] };
        self.vertex_facets
            .get(key[0])?
            .iter()
            .copied()
            .find(|&fi| self.facets[fi].endpoints == key)
    }

    /// Same connectivity, new vertex positions. Every cell must keep a
    /// positive signed area.
    pub(crate) fn with_vertices(&self, vertices: Vec<Point2>) -> Result<Self> {
        debug_assert_eq!(vertices.len(), self.vertices.len());
        let mesh = Mesh {
            vertices,
            ..self.clone()
        };
        mesh.check_geometry()?;
        Ok(mesh)
    }

    pub(crate) fn with_grid(mut self, n: Option<usize>) -> Self {
        self.grid = n;
        self
    }

    fn check_geometry(&self) -> Result<()> {
        for k in 0..self.cells.len() {
            let area = self.cell_area(k);
            if !(area > 0.0) {
                return Err(Error::DegenerateGeometry(format!(
                    "cell {k} has non-positive signed area {area:e}"
                )));
            }
        }
        Ok(())
    }

    /// Checks that the mesh covers the unit square and that boundary flags
    /// match the boundary facets and the square's sides.
    pub fn validate_unit_square(&self) -> Result<()> {
        let area = self.total_area();
        if (area - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!(
                "cells cover an area of {area}, not 1"
            )));
        }
        for f in self.facets.iter().filter(|f| !f.interior) {
            for &v in &f.endpoints {
                if !self.boundary_vertex[v] {
                    return Err(Error::invalid(format!(
                        "vertex {v} lies on a boundary facet but is not flagged"
                    )));
                }
            }
        }
        for (v, &flag) in self.boundary_vertex.iter().enumerate() {
            if flag && !self.vertices[v].on_unit_square_boundary() {
                return Err(Error::invalid(format!(
                    "vertex {v} is flagged as boundary but lies inside the unit square"
                )));
            }
        }
        Ok(())
    }
}

pub(crate) fn uniform_cells(n: usize) -> Vec<Cell> {
    let np = n + 1;
    let mut cells = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let ll = j * np + i;
            let lr = ll + 1;
            let ul = ll + np;
            let ur = ul + 1;
            cells.push(Cell { v: [ll, lr, ur] });
            cells.push(Cell { v: [ll, ur, ul] });
        }
    }
    cells
}

fn build_facets(cells: &[Cell]) -> Result<Vec<Facet>> {
    let mut index: HashMap<[usize; 2], usize> = HashMap::with_capacity(cells.len() * 2);
    let mut facets: Vec<Facet> = Vec::with_capacity(cells.len() * 2);
    for (k, c) in cells.iter().enumerate() {
        for e in 0..3 {
            let (a, b) = (c.v[e], c.v[(e + 1) % 3]);
            let key = if a < b { [a, b] } else { [b, a] };
            match index.get(&key) {
                None => {
                    index.insert(key, facets.len());
                    facets.push(Facet {
                        endpoints: key,
                        cells: [k, usize::MAX],
                        interior: false,
                    });
                }
                Some(&fi) => {
                    let f = &mut facets[fi];
                    if f.interior {
                        return Err(Error::invalid(format!(
                            "edge {key:?} is shared by more than two cells"
                        )));
                    }
                    f.cells[1] = k;
                    f.interior = true;
                }
            }
        }
    }
    for f in facets.iter_mut().filter(|f| !f.interior) {
        f.cells[1] = f.cells[0];
    }
    Ok(facets)
}
