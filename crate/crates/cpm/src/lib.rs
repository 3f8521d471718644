//! Closest point method (CPM) for PDEs on surfaces, with interior boundary
//! conditions (IBCs) prescribed on curves or points embedded in the surface.
//!
//! The method solves a surface PDE by embedding it in a narrow Cartesian tube
//! of grid points around the surface. Every grid value is repeatedly
//! reinterpreted as a sample of a function that is constant along surface
//! normals; this "closest point extension" turns surface differential
//! operators into ordinary Cartesian stencils. Boundary conditions on curves
//! interior to the surface are imposed by duplicating grid points near the
//! curve and rerouting stencils that cross it onto the duplicated sheet.
//!
//! Pipeline, bottom to top:
//!
//! * [`geometry`]: closest point queries for analytic shapes, parametric
//!   curves/surfaces, level sets, signed distance fields, triangle meshes,
//!   polylines, and composites of those.
//! * [`grid`]: sparse tube construction by breadth-first search around the
//!   surface, with one closest point query per visited lattice cell.
//! * [`ops`]: interpolation (closest point extension) and finite-difference
//!   Laplacian stencils over the tube, plus gradient/divergence helpers.
//! * [`ibc`]: duplicated boundary degrees of freedom, side classification,
//!   stencil rerouting across the curve, and boundary condition rows.
//! * [`solver`]: a partially matrix-free BiCGSTAB with diagonal or damped
//!   Jacobi preconditioning, and a sparse-LU direct path for small systems.
//! * [`problems`]: ready-made drivers (Poisson/heat/screened-Poisson test
//!   problems, geodesic distance, diffusion curves, vector field design,
//!   harmonic maps) and a grid-refinement error harness.
//! * [`io`]: JSON problem configs, OBJ/polyline readers, PLY/CSV writers.
//!
//! Points are `nalgebra` fixed-size vectors; the embedding dimension is a
//! const generic `D` (2 or 3 in practice).

pub mod error;
pub mod geometry;
pub mod grid;
pub mod ibc;
pub mod io;
pub mod math;
pub mod ops;
pub mod problems;
pub mod solver;
pub mod tol;

/// Position in the embedding space `R^D`.
pub type Point<const D: usize> = nalgebra::SVector<f64, D>;

pub use error::Error;
