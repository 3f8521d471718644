//! Error types, one enum per pipeline stage plus a top-level wrapper.

use thiserror::Error;

/// Closest point queries and shape validation.
#[derive(Debug, Error)]
pub enum GeomError {
    /// The query point is equidistant from a continuum of surface points
    /// (e.g. the center of a sphere); no closest point is defined. `dist`
    /// reports the (well-defined) distance to the surface so callers far
    /// outside any band of interest can simply discard the query.
    #[error("ambiguous closest point at {point:?} (dist {dist:.3e}): {context}")]
    AmbiguousClosestPoint {
        point: Vec<f64>,
        dist: f64,
        context: String,
    },

    /// An iterative closest point search ran out of iterations.
    #[error("closest point iteration did not converge at {point:?}: {context}")]
    NoConvergence { point: Vec<f64>, context: String },

    /// The level-set projection Hessian is numerically singular.
    #[error("singular projection Hessian at {point:?} (cond ~ {cond:.2e})")]
    SingularHessian { point: Vec<f64>, cond: f64 },

    /// A closest point routine produced NaN or infinity.
    #[error("non-finite closest point for query {point:?}: {context}")]
    NonfiniteCp { point: Vec<f64>, context: String },

    /// A mesh triangle has (near-)zero area and no well-defined projection.
    #[error("degenerate triangle {tri} in mesh")]
    DegenerateTriangle { tri: usize },

    /// A shape variant is not usable in this embedding dimension.
    #[error("{what} requires embedding dimension {required}, got {got}")]
    WrongDimension {
        what: String,
        required: usize,
        got: usize,
    },

    /// Shape parameters fail validation (non-positive radius, empty mesh, ...).
    #[error("invalid shape: {0}")]
    InvalidShape(String),
}

/// Tube construction.
#[derive(Debug, Error)]
pub enum GridError {
    /// A breadth-first search seed snapped to a lattice cell outside the tube.
    #[error("seed {point:?} snapped to a cell at distance {dist:.3e}, outside tube radius {radius:.3e}")]
    SeedOutsideTube {
        point: Vec<f64>,
        dist: f64,
        radius: f64,
    },

    /// The tube exceeded the configured cell budget; almost always a sign of
    /// a degenerate closest point function flooding the grid.
    #[error("tube exceeded {max_cells} cells")]
    TubeOverflow { max_cells: usize },

    /// A grid dump file failed structural validation on restore.
    #[error("malformed grid dump: {0}")]
    BadDump(String),

    #[error(transparent)]
    Geom(#[from] GeomError),
}

/// Stencil generation and operator assembly.
#[derive(Debug, Error)]
pub enum OpsError {
    /// An interpolation stencil needs a lattice cell that is not in the tube.
    #[error("interpolation stencil for query {query:?} needs missing cell {cell:?}")]
    StencilOutsideTube { query: Vec<f64>, cell: Vec<i64> },

    /// Operator and operand sizes disagree.
    #[error("operator expects {expected} values, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A point handed to an on-surface evaluation is not on the surface.
    #[error("point {point:?} is off the surface (level-set value {phi:.3e})")]
    OffSurface { point: Vec<f64>, phi: f64 },

    #[error(transparent)]
    Geom(#[from] GeomError),
}

/// Interior boundary machinery.
#[derive(Debug, Error)]
pub enum IbcError {
    /// A boundary curve sample is too far from the host surface.
    #[error("curve point {point:?} lies {dist:.3e} from the surface (max {max:.3e})")]
    CurveOffSurface { point: Vec<f64>, dist: f64, max: f64 },

    /// The duplicated band exceeded its cell budget.
    #[error("boundary band exceeded {max_cells} cells")]
    BandOverflow { max_cells: usize },

    /// No tube cell lies near the curve; the curve misses the grid entirely.
    #[error("boundary band is empty; the curve does not intersect the tube")]
    BandEmpty,

    /// A rerouted stencil reference needs a duplicated twin that was never
    /// created; indicates the band predicate and the audit region disagree.
    #[error("stencil at {row_cell:?} reroutes to {ref_cell:?}, which has no band twin")]
    MissingBandTwin {
        row_cell: Vec<i64>,
        ref_cell: Vec<i64>,
    },

    /// Side classification was requested for a vector of ambiguous length
    /// in a context where the on-curve fallback is not allowed.
    #[error("ambiguous side for {point:?}: |cp_S - cp_C| = {norm:.3e}")]
    AmbiguousSide { point: Vec<f64>, norm: f64 },

    /// Two-sided or mixed boundary values need a curve orientation.
    #[error("boundary spec with distinct sides requires an orientation")]
    MissingOrientation,

    /// Normal/tangent estimation found no clear eigenvalue separation.
    #[error("degenerate frame at {point:?}: eigenvalue gap {gap:.3e}")]
    DegenerateFrame { point: Vec<f64>, gap: f64 },

    /// The requested boundary condition combination is not representable
    /// (e.g. two-sided values without sides on a point constraint).
    #[error("unsupported boundary condition combination: {0}")]
    UnsupportedBcCombo(String),

    /// The fixed-value baselines substitute Dirichlet data directly into
    /// grid unknowns and cannot express Neumann or two-sided conditions.
    #[error("baseline method supports one-sided Dirichlet conditions only")]
    BaselineRequiresDirichlet,

    /// A baseline was asked to impose distinct per-side data; a fixed grid
    /// cell holds a single value, so only one-sided conditions fit.
    #[error("baseline method cannot impose two-sided or mixed conditions")]
    TwoSidedUnsupported,

    #[error(transparent)]
    Ops(#[from] OpsError),

    #[error(transparent)]
    Geom(#[from] GeomError),
}

/// Linear solvers.
#[derive(Debug, Error)]
pub enum SolverError {
    /// BiCGSTAB hit the iteration cap before reaching the residual target.
    #[error("solver reached {iters} iterations with residual {residual:.3e} (target {target:.3e})")]
    MaxIters {
        iters: usize,
        residual: f64,
        target: f64,
    },

    /// BiCGSTAB broke down twice (once before and once after the restart).
    #[error("solver broke down after restart (|rho| or |omega| < {threshold:.1e})")]
    Breakdown { threshold: f64 },

    /// The direct path refuses systems above its size cap.
    #[error("direct solve refused: {dofs} unknowns exceeds cap {cap}")]
    DirectTooLarge { dofs: usize, cap: usize },

    /// Sparse LU factorization failed (structurally or numerically singular).
    #[error("direct factorization failed: {0}")]
    CannotFactor(String),

    /// A matrix/vector dimension mismatch in solver input.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A preconditioner diagonal entry of the system matrix is exactly
    /// zero, so the diagonal scaling is undefined.
    #[error("preconditioner diagonal vanishes at DOF {dof} (m + n*L_ii = 0)")]
    ZeroDiagonal { dof: usize },
}

/// Config parsing, geometry file readers, and solution writers.
#[derive(Debug, Error)]
pub enum IoError {
    #[error("i/o failure on {path}: {source}")]
    File {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Any failure the library can produce.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Ops(#[from] OpsError),
    #[error(transparent)]
    Ibc(#[from] IbcError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Io(#[from] IoError),
}
