//! Piecewise-linear finite elements for the Poisson problem on triangulations
//! that contain isolated sliver cells.
//!
//! Two discretizations are provided on the same meshes:
//!
//! * the standard P1 Galerkin scheme ([`assembly`]), which converges optimally
//!   but whose stiffness matrix conditioning blows up with the sliver height;
//! * a stabilized scheme ([`stabilized`]) that replaces the field on each
//!   sliver by the polynomial extended from its regular neighbour and adds a
//!   small gradient-jump penalty across the shared facet. Its conditioning
//!   behaves like that of a regular mesh of the same size.
//!
//! [`analysis`] drives convergence and conditioning studies against the
//! manufactured solution `u = sin(pi x) sin(pi y)`.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analysis;
pub mod assembly;
pub mod error;
pub mod field;
pub mod mesh;
pub mod quadrature;
pub mod solver;
pub mod sparse;
pub mod stabilized;

pub use error::{Error, Result};
pub use mesh::{Cell, Facet, Mesh, Patch, Point2};
pub use sparse::CsrMatrix;
