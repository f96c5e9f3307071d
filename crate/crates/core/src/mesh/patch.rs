use std::collections::HashMap;

use super::{cell_quality, Mesh};
use crate::error::{Error, Result};

/// Default bound on the number of cells in an extended patch.
///
/// A two-cell patch on the (possibly distorted) diagonal-split grid touches
/// exactly 16 cells: its own square, both cells of the four edge neighbours
/// and of the two neighbours along the split diagonal, one cell each of the
/// two remaining corner squares.
pub const DEFAULT_MAX_EXTENDED: usize = 16;

/// A sliver paired with the regular cell across its longest facet.
#[derive(Clone, Debug, PartialEq)]
pub struct Patch {
    pub deg_cell: usize,
    pub nd_cell: usize,
    /// The facet shared by the two cells.
    pub facet: usize,
    pub patch_cells: [usize; 2],
    /// Every cell sharing at least one vertex with the patch, sorted.
    pub extended_cells: Vec<usize>,
    /// Largest distance between two patch vertices.
    pub h_p: f64,
    /// Vertex of the sliver opposite the shared facet.
    pub apex_vertex: usize,
    /// Vertex of the regular cell opposite the shared facet.
    pub opposite_vertex: usize,
}

impl Patch {
    pub fn new(mesh: &Mesh, deg_cell: usize, nd_cell: usize) -> Result<Self> {
        let nc = mesh.num_cells();
        if deg_cell >= nc || nd_cell >= nc || deg_cell == nd_cell {
            return Err(Error::InvalidPatch(format!(
                "bad cell pair ({deg_cell}, {nd_cell})"
            )));
        }
        let dv = mesh.cell(deg_cell).v;
        let nv = mesh.cell(nd_cell).v;
        let shared: Vec<usize> = dv.iter().copied().filter(|v| nv.contains(v)).collect();
        if shared.len() != 2 {
            return Err(Error::InvalidPatch(format!(
                "cells {deg_cell} and {nd_cell} share {} vertices, expected a facet",
                shared.len()
            )));
        }
        let facet = mesh.find_facet(shared[0], shared[1]).ok_or_else(|| {
            Error::InvalidPatch(format!("no facet between {} and {}", shared[0], shared[1]))
        })?;
        let apex_vertex = *dv.iter().find(|v| !shared.contains(v)).unwrap();
        let opposite_vertex = *nv.iter().find(|v| !shared.contains(v)).unwrap();

        let verts = [shared[0], shared[1], apex_vertex, opposite_vertex];
        let mut h_p: f64 = 0.0;
        for a in 0..4 {
            for b in a + 1..4 {
                h_p = h_p.max(mesh.vertex(verts[a]).dist(mesh.vertex(verts[b])));
            }
        }

        let mut extended_cells: Vec<usize> = verts
            .iter()
            .flat_map(|&v| mesh.vertex_cells(v).iter().copied())
            .collect();
        extended_cells.sort_unstable();
        extended_cells.dedup();

        Ok(Patch {
            deg_cell,
            nd_cell,
            facet,
            patch_cells: [deg_cell, nd_cell],
            extended_cells,
            h_p,
            apex_vertex,
            opposite_vertex,
        })
    }

    /// Facet endpoints, sorted.
    pub fn facet_vertices(&self, mesh: &Mesh) -> [usize; 2] {
        mesh.facets()[self.facet].endpoints
    }

    /// The four patch vertices: facet endpoints, apex, opposite.
    pub fn vertices(&self, mesh: &Mesh) -> [usize; 4] {
        let [a, b] = self.facet_vertices(mesh);
        [a, b, self.apex_vertex, self.opposite_vertex]
    }

    pub fn area(&self, mesh: &Mesh) -> f64 {
        mesh.cell_area(self.deg_cell) + mesh.cell_area(self.nd_cell)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PatchCheck {
    /// Extended patches are pairwise cell-disjoint.
    pub disjoint: bool,
    /// Indices of patches whose extended patch overlaps this one.
    pub overlaps: Vec<usize>,
    pub extended_count: usize,
    pub within_bound: bool,
    pub nd_quality: f64,
    pub nd_regular: bool,
    /// The patch boundary meets the domain boundary.
    pub touches_boundary: bool,
}

impl PatchCheck {
    pub fn pass(&self) -> bool {
        self.disjoint && self.within_bound && self.nd_regular && !self.touches_boundary
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AssumptionReport {
    pub patches: Vec<PatchCheck>,
}

impl AssumptionReport {
    pub fn pass(&self) -> bool {
        self.patches.iter().all(PatchCheck::pass)
    }

    /// One line per failing patch.
    pub fn failures(&self) -> Vec<String> {
        self.patches
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.pass())
            .map(|(i, c)| {
                let mut why = Vec::new();
                if !c.disjoint {
                    why.push(format!("overlaps patches {:?}", c.overlaps));
                }
                if !c.within_bound {
                    why.push(format!("{} extended cells", c.extended_count));
                }
                if !c.nd_regular {
                    why.push(format!("companion quality {:.3}", c.nd_quality));
                }
                if c.touches_boundary {
                    why.push("touches the boundary".to_string());
                }
                format!("patch {i}: {}", why.join(", "))
            })
            .collect()
    }
}

/// Checks the separation and regularity requirements on a set of patches:
/// disjoint extended patches of at most `max_extended` cells, a companion
/// cell with `h_K / rho_K <= c0`, and no contact with the domain boundary.
pub fn validate_assumptions(
    mesh: &Mesh,
    patches: &[Patch],
    c0: f64,
    max_extended: usize,
) -> AssumptionReport {
    let mut owner: HashMap<usize, Vec<usize>> = HashMap::new();
    for (i, p) in patches.iter().enumerate() {
        for &k in &p.extended_cells {
            owner.entry(k).or_default().push(i);
        }
    }
    let checks = patches
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut overlaps: Vec<usize> = p
                .extended_cells
                .iter()
                .flat_map(|k| owner[k].iter().copied())
                .filter(|&o| o != i)
                .collect();
            overlaps.sort_unstable();
            overlaps.dedup();
            let nd_quality = cell_quality(mesh, p.nd_cell)
                .map(|q| q.quality)
                .unwrap_or(f64::INFINITY);
            let touches_boundary = p.vertices(mesh).iter().any(|&v| mesh.is_boundary_vertex(v));
            PatchCheck {
                disjoint: overlaps.is_empty(),
                overlaps,
                extended_count: p.extended_cells.len(),
                within_bound: p.extended_cells.len() <= max_extended,
                nd_quality,
                nd_regular: nd_quality <= c0,
                touches_boundary,
            }
        })
        .collect();
    AssumptionReport { patches: checks }
}
