use std::f64::consts::PI;

use super::Mesh;
use crate::error::{Error, Result};

/// Smallest attainable `h_K / rho_K`, reached by the equilateral triangle.
pub const EQUILATERAL_QUALITY: f64 = 3.464_101_615_137_754_5; // 2 * sqrt(3)

/// Default shape-regularity threshold separating slivers from regular cells.
///
/// Grid half-squares sit at `2 + 2 sqrt(2) ~ 4.83`, the two cells opened up
/// next to a moved apex reach `~ 10.4`, while a sliver of height `h^2` is at
/// `2 sqrt(2) / h` (over 25 for every ladder mesh).
pub const DEFAULT_C0: f64 = 20.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CellQuality {
    pub area: f64,
    /// Diameter, i.e. longest edge.
    pub h_k: f64,
    /// Inradius `2 * area / perimeter`.
    pub rho_k: f64,
    /// `h_k / rho_k`.
    pub quality: f64,
    pub alpha_min: f64,
    pub beta_max: f64,
}

pub fn cell_quality(mesh: &Mesh, cell: usize) -> Result<CellQuality> {
    if cell >= mesh.num_cells() {
        return Err(Error::invalid(format!("cell index {cell} out of range")));
    }
    let p = mesh.cell_points(cell);
    let area = mesh.cell_area(cell);
    if !(area > 0.0) {
        return Err(Error::DegenerateGeometry(format!(
            "cell {cell} has zero area"
        )));
    }
    // edge e is opposite vertex e
    let len = [p[1].dist(p[2]), p[2].dist(p[0]), p[0].dist(p[1])];
    let perimeter = len.iter().sum::<f64>();
    let h_k = len.iter().copied().fold(0.0, f64::max);
    let rho_k = 2.0 * area / perimeter;

    let mut angles = [0.0; 3];
    for (e, angle) in angles.iter_mut().enumerate() {
        let (a, b) = ((e + 1) % 3, (e + 2) % 3);
        let u = (p[a].x - p[e].x, p[a].y - p[e].y);
        let w = (p[b].x - p[e].x, p[b].y - p[e].y);
        // atan2 keeps full accuracy for angles near 0 and pi.
        *angle = (u.0 * w.1 - u.1 * w.0).abs().atan2(u.0 * w.0 + u.1 * w.1);
    }
    let alpha_min = angles.iter().copied().fold(PI, f64::min);
    let beta_max = angles.iter().copied().fold(0.0, f64::max);

    Ok(CellQuality {
        area,
        h_k,
        rho_k,
        quality: h_k / rho_k,
        alpha_min,
        beta_max,
    })
}

/// Cells violating `h_K / rho_K <= c0`.
pub fn detect_degenerate_cells(mesh: &Mesh, c0: f64) -> Result<Vec<usize>> {
    if !(c0 > EQUILATERAL_QUALITY) {
        return Err(Error::invalid(format!(
            "threshold {c0} is below the equilateral optimum {EQUILATERAL_QUALITY}"
        )));
    }
    let mut out = Vec::new();
    for k in 0..mesh.num_cells() {
        if cell_quality(mesh, k)?.quality > c0 {
            out.push(k);
        }
    }
    Ok(out)
}
