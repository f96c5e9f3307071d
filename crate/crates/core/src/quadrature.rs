//! Symmetric Gauss rules on the reference triangle.
//!
//! Points are barycentric triples and weights sum to one; the cell area is
//! applied when a rule is pushed forward, so the same table serves every cell.

use crate::error::{Error, Result};
use crate::mesh::{Mesh, Point2};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadratureRule {
    pub points: &'static [[f64; 3]],
    pub weights: &'static [f64],
    /// Highest total polynomial degree integrated exactly.
    pub degree: usize,
}

const CENTROID: [[f64; 3]; 1] = [[1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]];
const CENTROID_W: [f64; 1] = [1.0];

const D2: [[f64; 3]; 3] = [
    [2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0],
    [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0],
    [1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0],
];
const D2_W: [f64; 3] = [1.0 / 3.0; 3];

const D4_A: f64 = 0.445_948_490_915_964_886_318_329_253_883;
const D4_B: f64 = 0.091_576_213_509_770_743_459_571_463_402_2;
const D4_WA: f64 = 0.223_381_589_678_011_465_695_007_008_433;
const D4_WB: f64 = 0.109_951_743_655_321_87;
const D4: [[f64; 3]; 6] = [
    [D4_A, D4_A, 1.0 - 2.0 * D4_A],
    [D4_A, 1.0 - 2.0 * D4_A, D4_A],
    [1.0 - 2.0 * D4_A, D4_A, D4_A],
    [D4_B, D4_B, 1.0 - 2.0 * D4_B],
    [D4_B, 1.0 - 2.0 * D4_B, D4_B],
    [1.0 - 2.0 * D4_B, D4_B, D4_B],
];
const D4_W: [f64; 6] = [D4_WA, D4_WA, D4_WA, D4_WB, D4_WB, D4_WB];

// (6 -+ sqrt 15) / 21 and (155 -+ sqrt 15) / 1200
const D5_A: f64 = 0.101_286_507_323_456_338_800_987_361_915_1;
const D5_B: f64 = 0.470_142_064_105_115_089_770_441_209_513_1;
const D5_WA: f64 = 0.125_939_180_544_827_152_595_683_945_500_2;
const D5_WB: f64 = 0.132_394_152_788_506_180_737_649_387_833_1;
const D5: [[f64; 3]; 7] = [
    [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
    [D5_A, D5_A, 1.0 - 2.0 * D5_A],
    [D5_A, 1.0 - 2.0 * D5_A, D5_A],
    [1.0 - 2.0 * D5_A, D5_A, D5_A],
    [D5_B, D5_B, 1.0 - 2.0 * D5_B],
    [D5_B, 1.0 - 2.0 * D5_B, D5_B],
    [1.0 - 2.0 * D5_B, D5_B, D5_B],
];
const D5_W: [f64; 7] = [0.225, D5_WA, D5_WA, D5_WA, D5_WB, D5_WB, D5_WB];

/// Rule exact for polynomials of total degree `degree` (1, 2, 4 or 5).
pub fn rule(degree: usize) -> Result<QuadratureRule> {
    let (points, weights): (&'static [[f64; 3]], &'static [f64]) = match degree {
        1 => (&CENTROID, &CENTROID_W),
        2 => (&D2, &D2_W),
        4 => (&D4, &D4_W),
        5 => (&D5, &D5_W),
        _ => {
            return Err(Error::invalid(format!(
                "no triangle rule of degree {degree}; supported: 1, 2, 4, 5"
            )))
        }
    };
    Ok(QuadratureRule {
        points,
        weights,
        degree,
    })
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Integral over the reference triangle `{x, y >= 0, x + y <= 1}`;
    /// `f` receives reference coordinates `(x, y) = (l1, l2)`.
    pub fn integrate_reference(&self, f: impl Fn(f64, f64) -> f64) -> f64 {
        0.5 * self
            .points
            .iter()
            .zip(self.weights)
            .map(|(l, w)| w * f(l[1], l[2]))
            .sum::<f64>()
    }

    /// Physical quadrature points and area-scaled weights on triangle `tri`.
    pub fn push_forward(&self, tri: [Point2; 3]) -> impl Iterator<Item = (Point2, f64)> + '_ {
        let area = crate::mesh::signed_area(tri[0], tri[1], tri[2]).abs();
        self.points.iter().zip(self.weights).map(move |(l, w)| {
            let x = l[0] * tri[0].x + l[1] * tri[1].x + l[2] * tri[2].x;
            let y = l[0] * tri[0].y + l[1] * tri[1].y + l[2] * tri[2].y;
            (Point2::new(x, y), w * area)
        })
    }
}

/// `sum_q w_q |K| f(x_q)` over the quadrature points of `cell`.
pub fn integrate_on_cell(
    mesh: &Mesh,
    cell: usize,
    f: impl Fn(Point2) -> f64,
    rule: &QuadratureRule,
) -> f64 {
    rule.push_forward(mesh.cell_points(cell))
        .map(|(x, w)| w * f(x))
        .sum()
}
