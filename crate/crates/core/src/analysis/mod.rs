//! Error norms against the manufactured solution, convergence rates, and the
//! study driver with its CSV/SVG reports.

mod report;
mod study;

use std::f64::consts::PI;

pub use report::{
    emit_csv, emit_csv_file, emit_svg_plot, emit_svg_plot_file, parse_csv, parse_csv_file, Column,
    CSV_HEADER,
};
pub use study::{
    build_mesh, discretize, run_single, run_study, solve_reduced, ConvergenceRecord,
    DegenerationMode, Discretization, EpsilonRule, Scheme, SolverChoice, StudyConfig,
    DEFAULT_DENSE_LADDER, DEFAULT_KAPPA_MAX_N, DEFAULT_LADDER,
};

use crate::error::{Error, Result};
use crate::field::PiecewiseLinearField;
use crate::mesh::{Mesh, Point2};
use crate::quadrature::{rule, QuadratureRule};

/// Exact solution, its gradient and the matching right-hand side of
/// `-Laplace u = f` with `u = 0` on the boundary of the unit square.
#[derive(Clone, Copy, Debug)]
pub struct ManufacturedProblem {
    pub u: fn(Point2) -> f64,
    pub grad: fn(Point2) -> [f64; 2],
    pub f: fn(Point2) -> f64,
    /// `|u|_{H^2}`.
    pub h2_seminorm: f64,
}

impl ManufacturedProblem {
    /// `u = sin(pi x) sin(pi y)`, `f = 2 pi^2 u`.
    pub fn sine() -> Self {
        ManufacturedProblem {
            u: |p| (PI * p.x).sin() * (PI * p.y).sin(),
            grad: |p| {
                [
                    PI * (PI * p.x).cos() * (PI * p.y).sin(),
                    PI * (PI * p.x).sin() * (PI * p.y).cos(),
                ]
            },
            f: |p| 2.0 * PI * PI * (PI * p.x).sin() * (PI * p.y).sin(),
            h2_seminorm: PI * PI,
        }
    }
}

impl Default for ManufacturedProblem {
    fn default() -> Self {
        Self::sine()
    }
}

fn error_rule() -> QuadratureRule {
    rule(5).expect("degree-5 rule exists")
}

/// `||u - field||_{L^2}` with a degree-5 rule on each cell.
pub fn l2_error(mesh: &Mesh, field: &PiecewiseLinearField, u: impl Fn(Point2) -> f64) -> f64 {
    let r = error_rule();
    (0..mesh.num_cells())
        .map(|k| {
            r.push_forward(mesh.cell_points(k))
                .map(|(p, w)| {
                    let d = u(p) - field.eval(k, p);
                    w * d * d
                })
                .sum::<f64>()
        })
        .sum::<f64>()
        .sqrt()
}

/// Cellwise `|u - field|_{H^1}` over `cells` (all cells when `None`). With
/// a post-processed field this is the broken seminorm.
pub fn h1_seminorm_error(
    mesh: &Mesh,
    field: &PiecewiseLinearField,
    grad: impl Fn(Point2) -> [f64; 2],
    cells: Option<&[usize]>,
) -> f64 {
    let r = error_rule();
    let cell_err = |k: usize| {
        let g = field.grad(k);
        r.push_forward(mesh.cell_points(k))
            .map(|(p, w)| {
                let e = grad(p);
                w * ((e[0] - g[0]).powi(2) + (e[1] - g[1]).powi(2))
            })
            .sum::<f64>()
    };
    let total: f64 = match cells {
        Some(list) => list.iter().map(|&k| cell_err(k)).sum(),
        None => (0..mesh.num_cells()).map(cell_err).sum(),
    };
    total.sqrt()
}

/// Slopes of `log e` against `log h`.
#[derive(Clone, Debug, PartialEq)]
pub struct Rates {
    /// Between consecutive entries; `None` where an error is zero or not
    /// finite.
    pub pairwise: Vec<Option<f64>>,
    /// Least-squares fit over all usable points; `None` with fewer than two.
    pub least_squares: Option<f64>,
    /// Indices whose error was unusable.
    pub flagged: Vec<usize>,
}

pub fn convergence_rates(h: &[f64], e: &[f64]) -> Result<Rates> {
    if h.len() != e.len() || h.len() < 2 {
        return Err(Error::invalid("need at least two (h, error) pairs"));
    }
    if h.windows(2).any(|w| !(w[1] < w[0])) || h.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::invalid("h must be positive and strictly decreasing"));
    }
    let ok = |x: f64| x > 0.0 && x.is_finite();
    let flagged: Vec<usize> = (0..e.len()).filter(|&i| !ok(e[i])).collect();
    let pairwise = (0..h.len() - 1)
        .map(|k| {
            (ok(e[k]) && ok(e[k + 1])).then(|| (e[k] / e[k + 1]).ln() / (h[k] / h[k + 1]).ln())
        })
        .collect();
    let pts: Vec<(f64, f64)> = h
        .iter()
        .zip(e)
        .filter(|(_, &e)| ok(e))
        .map(|(&h, &e)| (h.ln(), e.ln()))
        .collect();
    let least_squares = (pts.len() >= 2).then(|| {
        let m = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    });
    Ok(Rates {
        pairwise,
        least_squares,
        flagged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manufactured_problem_is_consistent() {
        let pb = ManufacturedProblem::sine();
        let d = 1e-4;
        for &(x, y) in &[(0.3, 0.7), (0.5, 0.5), (0.11, 0.93), (0.8, 0.25)] {
            let p = Point2::new(x, y);
            // fourth-order central difference of the Laplacian
            let u = |dx: f64, dy: f64| (pb.u)(Point2::new(x + dx, y + dy));
            let d2 = |a: f64, b: f64| {
                (-u(2.0 * a, 2.0 * b) + 16.0 * u(a, b) - 30.0 * u(0.0, 0.0) + 16.0 * u(-a, -b)
                    - u(-2.0 * a, -2.0 * b))
                    / (12.0 * d * d)
            };
            let lap = d2(d, 0.0) + d2(0.0, d);
            assert!((-lap - (pb.f)(p)).abs() < 1e-6);
            // closed form Laplacian is exact
            assert!((2.0 * PI * PI * (pb.u)(p) - (pb.f)(p)).abs() < 1e-12);
            let g = (pb.grad)(p);
            let gx = (u(d, 0.0) - u(-d, 0.0)) / (2.0 * d);
            assert!((g[0] - gx).abs() < 1e-6);
        }
        for t in [0.0, 0.25, 0.5, 1.0] {
            for p in [
                Point2::new(t, 0.0),
                Point2::new(t, 1.0),
                Point2::new(0.0, t),
                Point2::new(1.0, t),
            ] {
                assert!((pb.u)(p).abs() < 1e-15);
            }
        }
        // |u|_2^2 = pi^4 (1/4 + 2/4 + 1/4)
        let m = Mesh::uniform_unit_square(32).unwrap();
        let r = error_rule();
        let s: f64 = (0..m.num_cells())
            .map(|k| {
                r.push_forward(m.cell_points(k))
                    .map(|(p, w)| {
                        let (sx, cx) = ((PI * p.x).sin(), (PI * p.x).cos());
                        let (sy, cy) = ((PI * p.y).sin(), (PI * p.y).cos());
                        w * PI.powi(4) * (2.0 * (sx * sy).powi(2) + 2.0 * (cx * cy).powi(2))
                    })
                    .sum::<f64>()
            })
            .sum();
        assert!((s.sqrt() - pb.h2_seminorm).abs() < 1e-6);
    }

    #[test]
    fn interpolant_error_window() {
        let pb = ManufacturedProblem::sine();
        let m = Mesh::uniform_unit_square(16).unwrap();
        let u: Vec<f64> = m.vertices().iter().map(|&p| (pb.u)(p)).collect();
        let f = PiecewiseLinearField::from_nodal(&m, &u).unwrap();
        let e = l2_error(&m, &f, pb.u);
        assert!(e > 1e-4 && e < 1e-2, "{e}");
        let h1 = h1_seminorm_error(&m, &f, pb.grad, None);
        assert!(h1 > 1e-2 && h1 < 0.5, "{h1}");
    }

    #[test]
    fn exact_linear_field_has_zero_error() {
        let m = Mesh::uniform_unit_square(5).unwrap();
        let u: Vec<f64> = m.vertices().iter().map(|p| 2.0 * p.x - p.y + 0.5).collect();
        let f = PiecewiseLinearField::from_nodal(&m, &u).unwrap();
        assert!(l2_error(&m, &f, |p| 2.0 * p.x - p.y + 0.5) < 1e-14);
        assert!(h1_seminorm_error(&m, &f, |_| [2.0, -1.0], None) < 1e-10);
        let sub: Vec<usize> = (0..m.num_cells()).step_by(3).collect();
        assert!(h1_seminorm_error(&m, &f, |_| [3.0, -1.0], Some(&sub)) > 0.0);
    }

    #[test]
    fn subset_norms_add_up() {
        let pb = ManufacturedProblem::sine();
        let m = Mesh::uniform_unit_square(6).unwrap();
        let f = PiecewiseLinearField::from_nodal(&m, &vec![0.0; m.num_vertices()]).unwrap();
        let (a, b): (Vec<usize>, Vec<usize>) = (0..m.num_cells()).partition(|k| k % 2 == 0);
        let ea = h1_seminorm_error(&m, &f, pb.grad, Some(&a));
        let eb = h1_seminorm_error(&m, &f, pb.grad, Some(&b));
        let all = h1_seminorm_error(&m, &f, pb.grad, None);
        assert!((ea * ea + eb * eb - all * all).abs() < 1e-12);
        // |u|_1^2 = pi^2 / 2
        assert!((all * all - PI * PI / 2.0).abs() < 1e-3);
    }

    #[test]
    fn synthetic_rates() {
        let h = [0.1, 0.05, 0.02, 0.01];
        let e2: Vec<f64> = h.iter().map(|x| x * x).collect();
        let r = convergence_rates(&h, &e2).unwrap();
        assert!((r.least_squares.unwrap() - 2.0).abs() < 1e-12);
        for s in r.pairwise {
            assert!((s.unwrap() - 2.0).abs() < 1e-12);
        }
        let e1: Vec<f64> = h.to_vec();
        assert!((convergence_rates(&h, &e1).unwrap().least_squares.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_errors_flagged() {
        let r = convergence_rates(&[0.5, 0.25, 0.125], &[1.0, 0.0, 0.01]).unwrap();
        assert_eq!(r.flagged, vec![1]);
        assert_eq!(r.pairwise, vec![None, None]);
        assert!(r.least_squares.is_some());
        let r = convergence_rates(&[0.5, 0.25], &[0.0, 0.0]).unwrap();
        assert_eq!(r.least_squares, None);
        assert!(convergence_rates(&[0.5], &[1.0]).is_err());
        assert!(convergence_rates(&[0.25, 0.5], &[1.0, 2.0]).is_err());
    }
}
