//! Centralized numerical tolerances.
//!
//! Every threshold that decides geometry classification, iteration stopping,
//! or test acceptance lives here, so the values are pinned in one place and
//! the justification sits next to the number.

/// Convergence tolerance for iterative closest point computations
/// (parametric quasi-Newton, level-set projection). Measured on the step
/// size in parameter/position space. Closest points feed second-order
/// stencils, so they must be accurate well below truncation error at any
/// practical grid spacing.
pub const CP_ITER: f64 = 1e-10;

/// Iteration cap for the parametric closest point search.
pub const CP_PARAMETRIC_MAX_ITERS: usize = 200;

/// Iteration cap for each stage of the level-set closest point search.
pub const CP_LEVELSET_MAX_ITERS: usize = 100;

/// Iteration cap for the projected-descent fallback of the level-set
/// closest point search. Descent converges linearly near folds of the
/// normal bundle, so it needs a larger budget than the Newton stages.
pub const CP_DESCENT_MAX_ITERS: usize = 500;

/// Tangential residual, relative to the query distance, accepted when the
/// projected-descent fallback can no longer resolve a decrease of the
/// squared distance in f64. The distance itself is stationary with respect
/// to tangential perturbations, so it stays accurate to roughly the square
/// of this factor.
pub const CP_DESCENT_STALL: f64 = 1e-6;

/// Gradient magnitude below which the normalized surface gradient is
/// declared zero instead of being normalized.
pub const GRAD_ZERO: f64 = 1e-14;

/// Maximum level-set residual for a point handed to an on-surface
/// evaluation such as the manufactured load.
pub const MANUFACTURED_ON_SURFACE: f64 = 1e-8;

/// Condition number estimate above which the level-set projection Hessian
/// is declared singular (query near a medial axis or level-set critical
/// point).
pub const CP_SINGULAR_COND: f64 = 1e14;

/// Relative slack when two parts of a composite shape are equidistant from
/// the query; within this band the tie breaks deterministically to the
/// part listed first.
pub const COMPOSITE_TIE: f64 = 1e-12;

/// A point counts as lying on a shape's geometric boundary when its closest
/// point and its closest boundary point coincide to this distance.
pub const BOUNDARY_COINCIDE: f64 = 1e-10;

/// Maximum allowed distance from an interior-boundary curve sample to the
/// host surface, after normalization into `[-1,1]^D`. Curves further away
/// than this are treated as misconfigured rather than silently projected.
pub const CURVE_ON_SURFACE: f64 = 1e-6;

/// Interpolation weights must reproduce polynomials of the stencil degree;
/// partition of unity is checked against this tolerance in debug assertions
/// and tests.
pub const WEIGHT_CHECK: f64 = 1e-14;

/// Scale factor for the on-curve threshold: a grid point whose closest
/// surface point lies within `ON_CURVE_FACTOR * dx^2` of the curve is
/// classified as on-curve and may be assigned to either side without
/// affecting second-order accuracy.
pub const ON_CURVE_FACTOR: f64 = 0.1;

/// BiCGSTAB declares a breakdown when the stabilization scalars fall below
/// this magnitude; one restart from the current iterate is attempted before
/// giving up.
pub const BICGSTAB_BREAKDOWN: f64 = 1e-30;

/// Default relative residual target for iterative solves.
pub const SOLVER_RTOL: f64 = 1e-10;

/// Damping factor for the weighted Jacobi smoother; the classic choice that
/// damps the upper half of the Laplacian spectrum.
pub const JACOBI_OMEGA: f64 = 2.0 / 3.0;

/// Default number of weighted Jacobi sweeps when used as a preconditioner.
pub const JACOBI_SWEEPS: usize = 5;

/// Degree-of-freedom cap for the direct (sparse LU) solve path.
pub const DIRECT_MAX_DOFS: usize = 20_000;

/// Eigenvalue gap below which a frame estimate (surface normal or curve
/// tangent from closest point Jacobians) is considered degenerate.
pub const FRAME_EIGEN_GAP: f64 = 1e-6;

/// Minimum magnitude of an interpolated (locally oriented) normal before
/// normalization; smaller results mean the stencil mixed normals from
/// inconsistently oriented sheets and the frame is unreliable.
pub const FRAME_INTERP_MIN: f64 = 1e-8;

/// Two closest point distances are considered equal (for boundary-subset
/// membership) within this tolerance.
pub const DIST_EQUAL: f64 = 1e-10;
