//! Cellwise linear fields, possibly discontinuous across cell boundaries.

use crate::assembly::basis_gradients;
use crate::error::Result;
use crate::mesh::{Mesh, Point2};

/// `value + grad . (x, y)` on one cell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearPiece {
    pub value: f64,
    pub grad: [f64; 2],
}

impl LinearPiece {
    pub fn eval(&self, p: Point2) -> f64 {
        self.value + self.grad[0] * p.x + self.grad[1] * p.y
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseLinearField {
    pub pieces: Vec<LinearPiece>,
}

impl PiecewiseLinearField {
    /// The continuous P1 field with the given vertex values.
    pub fn from_nodal(mesh: &Mesh, u: &[f64]) -> Result<Self> {
        assert_eq!(u.len(), mesh.num_vertices());
        let pieces = (0..mesh.num_cells())
            .map(|k| {
                let p = mesh.cell_points(k);
                let v = mesh.cell(k).v;
                let (g, _) = basis_gradients(p)?;
                let grad = [
                    g[0][0] * u[v[0]] + g[1][0] * u[v[1]] + g[2][0] * u[v[2]],
                    g[0][1] * u[v[0]] + g[1][1] * u[v[1]] + g[2][1] * u[v[2]],
                ];
                // anchor at the centroid to limit cancellation
                let cx = (p[0].x + p[1].x + p[2].x) / 3.0;
                let cy = (p[0].y + p[1].y + p[2].y) / 3.0;
                let mean = (u[v[0]] + u[v[1]] + u[v[2]]) / 3.0;
                Ok(LinearPiece {
                    value: mean - grad[0] * cx - grad[1] * cy,
                    grad,
                })
            })
            .collect::<Result<_>>()?;
        Ok(PiecewiseLinearField { pieces })
    }

    pub fn eval(&self, cell: usize, p: Point2) -> f64 {
        self.pieces[cell].eval(p)
    }

    pub fn grad(&self, cell: usize) -> [f64; 2] {
        self.pieces[cell].grad
    }
}
