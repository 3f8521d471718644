//! Closest point queries for every supported surface and curve representation.
//!
//! A [`Shape`] is anything that can answer "which of your points is nearest
//! to x": closed analytic surfaces, solid regions, open curves, triangle
//! meshes, implicit surfaces, or composites of those. Surfaces and interior
//! boundary curves are both `Shape`s; a curve is simply a shape of lower
//! intrinsic dimension that happens to lie on a host surface.
//!
//! Tie handling is deterministic: when several candidates are equidistant
//! within [`crate::tol::COMPOSITE_TIE`] (relative), the candidate from the
//! earliest part/segment/point wins. Continuum degeneracies (the center of a
//! sphere, the axis of a torus) have no usable winner and produce
//! [`GeomError::AmbiguousClosestPoint`] instead; the reported distance still
//! lets callers discard queries that are far outside any tube of interest.

mod analytic;
mod levelset;
mod mesh;
mod parametric;
mod polyline;
pub mod presets;

pub use levelset::LevelSet;
pub use mesh::{closest_point_triangle, TriMesh};
pub use parametric::{ParametricCurve, ParametricSurface};
pub use polyline::Polyline;

use crate::error::GeomError;
use crate::Point;
use std::sync::Arc;

/// Scalar field closure (level-set value, signed distance).
pub type ScalarFn<const D: usize> = Arc<dyn Fn(&Point<D>) -> f64 + Send + Sync>;
/// Vector field closure (gradients).
pub type VectorFn<const D: usize> = Arc<dyn Fn(&Point<D>) -> Point<D> + Send + Sync>;
/// Matrix field closure (Hessians), row-major `D x D`.
pub type MatrixFn<const D: usize> =
    Arc<dyn Fn(&Point<D>) -> nalgebra::SMatrix<f64, D, D> + Send + Sync>;

/// Result of a closest point query.
#[derive(Clone, Debug)]
pub struct CpQuery<const D: usize> {
    /// The closest point on the shape.
    pub cp: Point<D>,
    /// Euclidean distance from the query to `cp`.
    pub dist: f64,
    /// False only for iterative queries that stopped on a tolerance that is
    /// looser than requested (currently never stored in `Ok` results; kept
    /// for forward compatibility of dump files).
    pub converged: bool,
    /// Mesh queries report the triangle and barycentric coordinates of the
    /// contact; used to transfer points between meshes with shared
    /// connectivity.
    pub tri: Option<(usize, [f64; 3])>,
    /// The contact lies on the shape's geometric (open) boundary: a mesh
    /// boundary edge, a curve endpoint, the rim of a solid region.
    pub on_open_boundary: bool,
}

impl<const D: usize> CpQuery<D> {
    pub(crate) fn new(cp: Point<D>, dist: f64) -> Self {
        CpQuery {
            cp,
            dist,
            converged: true,
            tri: None,
            on_open_boundary: false,
        }
    }

    pub(crate) fn boundary(mut self, flag: bool) -> Self {
        self.on_open_boundary = flag;
        self
    }

    pub(crate) fn with_triangle(mut self, tri: usize, bary: [f64; 3]) -> Self {
        self.tri = Some((tri, bary));
        self
    }
}

/// A surface, curve, or point constellation supporting closest point queries.
///
/// The embedding dimension `D` is 2 or 3. Mesh and two-parameter variants
/// are inherently three-dimensional; querying them with `D = 2` fails with
/// [`GeomError::WrongDimension`].
#[derive(Clone)]
pub enum Shape<const D: usize> {
    /// Hypersphere: a circle in `R^2`, a sphere in `R^3`. Codimension one.
    Sphere { center: Point<D>, radius: f64 },
    /// Circle lying in the plane through `center` with unit `normal`
    /// (a codimension-two curve; `D = 3` only).
    Circle3 {
        center: Point<D>,
        radius: f64,
        normal: Point<D>,
    },
    /// Circular arc in the plane through `center` with unit `normal`,
    /// swept from `ref_dir` (in-plane unit vector) through `span` radians
    /// counterclockwise about `normal`. Open unless `span` is a full turn.
    Arc3 {
        center: Point<D>,
        radius: f64,
        normal: Point<D>,
        ref_dir: Point<D>,
        span: f64,
    },
    /// Torus around the axis `{center + t e_z}` (`D = 3` only).
    Torus {
        center: Point<D>,
        major: f64,
        minor: f64,
    },
    /// Solid axis-aligned box: a codimension-zero region whose closest
    /// point map is the componentwise clamp. Its geometric boundary is the
    /// box surface.
    SolidBox { min: Point<D>, max: Point<D> },
    /// Line segment from `a` to `b`; open, endpoints form the boundary.
    Segment { a: Point<D>, b: Point<D> },
    /// Finite point set; nearest point wins, ties break to the lowest index.
    Points(Vec<Point<D>>),
    /// Polyline curve, optionally closed.
    Polyline(Polyline<D>),
    /// One-parameter curve with analytic first derivative.
    ParametricCurve(ParametricCurve<D>),
    /// Two-parameter surface with analytic first derivatives (`D = 3` only).
    ParametricSurface(ParametricSurface),
    /// Triangle mesh (`D = 3` only).
    Mesh(Arc<TriMesh>),
    /// Implicit surface `{phi = 0}` with analytic gradient and Hessian.
    LevelSet(LevelSet<D>),
    /// Surface described by an exact signed distance `d` and its gradient;
    /// the closest point is `x - d(x) grad d(x)`.
    SignedDistance {
        dist: ScalarFn<D>,
        grad: VectorFn<D>,
    },
    /// Union of parts; the query returns the closest candidate over all
    /// parts, ties breaking to the earliest part.
    Composite(Vec<Shape<D>>),
}

impl<const D: usize> std::fmt::Debug for Shape<D> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Shape::Sphere { center, radius } => {
                write!(f, "Sphere{{c:{:?}, r:{}}}", center.as_slice(), radius)
            }
            Shape::Circle3 { radius, .. } => write!(f, "Circle3{{r:{}}}", radius),
            Shape::Arc3 { radius, span, .. } => write!(f, "Arc3{{r:{}, span:{}}}", radius, span),
            Shape::Torus { major, minor, .. } => write!(f, "Torus{{R:{}, r:{}}}", major, minor),
            Shape::SolidBox { min, max } => {
                write!(f, "SolidBox{{{:?}..{:?}}}", min.as_slice(), max.as_slice())
            }
            Shape::Segment { a, b } => {
                write!(f, "Segment{{{:?}->{:?}}}", a.as_slice(), b.as_slice())
            }
            Shape::Points(p) => write!(f, "Points[{}]", p.len()),
            Shape::Polyline(p) => write!(f, "Polyline[{}]", p.points.len()),
            Shape::ParametricCurve(_) => write!(f, "ParametricCurve"),
            Shape::ParametricSurface(_) => write!(f, "ParametricSurface"),
            Shape::Mesh(m) => write!(f, "Mesh[v:{}, t:{}]", m.n_vertices(), m.n_triangles()),
            Shape::LevelSet(_) => write!(f, "LevelSet"),
            Shape::SignedDistance { .. } => write!(f, "SignedDistance"),
            Shape::Composite(parts) => write!(f, "Composite{:?}", parts),
        }
    }
}

impl<const D: usize> Shape<D> {
    /// Intrinsic dimension of the shape (0 for points, 1 for curves,
    /// `D - 1` for hypersurfaces, `D` for solid regions). Composites report
    /// the maximum over parts.
    pub fn intrinsic_dim(&self) -> usize {
        match self {
            Shape::Sphere { .. } | Shape::LevelSet(_) | Shape::SignedDistance { .. } => D - 1,
            Shape::Circle3 { .. }
            | Shape::Arc3 { .. }
            | Shape::Segment { .. }
            | Shape::Polyline(_)
            | Shape::ParametricCurve(_) => 1,
            Shape::Torus { .. } | Shape::Mesh(_) | Shape::ParametricSurface(_) => 2,
            Shape::SolidBox { .. } => D,
            Shape::Points(_) => 0,
            Shape::Composite(parts) => parts.iter().map(Shape::intrinsic_dim).max().unwrap_or(0),
        }
    }

    /// Whether the shape has a geometric (open) boundary.
    pub fn has_boundary(&self) -> bool {
        match self {
            Shape::Sphere { .. }
            | Shape::Circle3 { .. }
            | Shape::Torus { .. }
            | Shape::Points(_)
            | Shape::LevelSet(_)
            | Shape::SignedDistance { .. } => false,
            Shape::Arc3 { span, .. } => *span < 2.0 * std::f64::consts::PI - 1e-12,
            Shape::SolidBox { .. } | Shape::Segment { .. } => true,
            Shape::Polyline(p) => !p.closed,
            Shape::ParametricCurve(c) => !c.periodic,
            Shape::ParametricSurface(s) => s.has_boundary(),
            Shape::Mesh(m) => m.has_boundary(),
            Shape::Composite(parts) => parts.iter().any(Shape::has_boundary),
        }
    }

    /// Closest point on the shape to `x`.
    pub fn cp(&self, x: &Point<D>) -> Result<CpQuery<D>, GeomError> {
        let q = self.cp_inner(x)?;
        if !q.cp.iter().all(|v| v.is_finite()) || !q.dist.is_finite() {
            return Err(GeomError::NonfiniteCp {
                point: x.as_slice().to_vec(),
                context: format!("{:?}", self),
            });
        }
        Ok(q)
    }

    fn cp_inner(&self, x: &Point<D>) -> Result<CpQuery<D>, GeomError> {
        match self {
            Shape::Sphere { center, radius } => analytic::cp_sphere(center, *radius, x),
            Shape::Circle3 {
                center,
                radius,
                normal,
            } => analytic::cp_circle3(center, *radius, normal, x),
            Shape::Arc3 {
                center,
                radius,
                normal,
                ref_dir,
                span,
            } => analytic::cp_arc3(center, *radius, normal, ref_dir, *span, x),
            Shape::Torus {
                center,
                major,
                minor,
            } => analytic::cp_torus(center, *major, *minor, x),
            Shape::SolidBox { min, max } => Ok(analytic::cp_box(min, max, x)),
            Shape::Segment { a, b } => Ok(analytic::cp_segment(a, b, x)),
            Shape::Points(pts) => analytic::cp_points(pts, x),
            Shape::Polyline(p) => p.cp(x),
            Shape::ParametricCurve(c) => c.cp(x),
            Shape::ParametricSurface(s) => {
                let x3 = require_3d::<D>("parametric surface", x)?;
                let q = s.cp(&x3)?;
                Ok(from_3d_query::<D>(q))
            }
            Shape::Mesh(m) => {
                let x3 = require_3d::<D>("triangle mesh", x)?;
                let q = m.cp(&x3)?;
                Ok(from_3d_query::<D>(q))
            }
            Shape::LevelSet(ls) => ls.cp(x),
            Shape::SignedDistance { dist, grad } => {
                let d = dist(x);
                let g = grad(x);
                let cp = x - g * d;
                Ok(CpQuery::new(cp, d.abs()))
            }
            Shape::Composite(parts) => {
                // Earliest part wins ties; strictly closer parts displace it.
                let mut best: Option<CpQuery<D>> = None;
                let mut nearest_degenerate = f64::INFINITY;
                for part in parts {
                    let q = match part.cp_inner(x) {
                        Ok(q) => q,
                        // A part's degenerate locus may be shadowed by a
                        // closer part; only fail if nothing else wins.
                        Err(GeomError::AmbiguousClosestPoint { dist, .. }) => {
                            nearest_degenerate = nearest_degenerate.min(dist);
                            continue;
                        }
                        Err(e) => return Err(e),
                    };
                    let better = match &best {
                        None => true,
                        Some(b) => q.dist < b.dist - crate::tol::COMPOSITE_TIE * b.dist.max(1.0),
                    };
                    if better {
                        best = Some(q);
                    }
                }
                best.ok_or_else(|| GeomError::AmbiguousClosestPoint {
                    point: x.as_slice().to_vec(),
                    dist: nearest_degenerate,
                    context: "every composite part was degenerate at this query".into(),
                })
            }
        }
    }

    /// Closest point on the shape's geometric boundary (curve endpoints,
    /// mesh boundary loops, the surface of a solid region).
    pub fn cp_boundary(&self, x: &Point<D>) -> Result<CpQuery<D>, GeomError> {
        match self {
            Shape::Arc3 {
                center,
                radius,
                normal,
                ref_dir,
                span,
            } => {
                if !self.has_boundary() {
                    return Err(GeomError::InvalidShape("closed arc has no boundary".into()));
                }
                analytic::cp_points(&analytic::arc_endpoints(center, *radius, normal, ref_dir, *span), x)
            }
            Shape::SolidBox { min, max } => Ok(analytic::cp_box_boundary(min, max, x)),
            Shape::Segment { a, b } => analytic::cp_points(&[*a, *b], x),
            Shape::Polyline(p) => p.cp_boundary(x),
            Shape::ParametricCurve(c) => c.cp_boundary(x),
            Shape::Mesh(m) => {
                let x3 = require_3d::<D>("triangle mesh", x)?;
                let q = m.cp_boundary(&x3)?;
                Ok(from_3d_query::<D>(q))
            }
            Shape::ParametricSurface(s) => {
                let x3 = require_3d::<D>("parametric surface", x)?;
                let q = s.cp_boundary(&x3)?;
                Ok(from_3d_query::<D>(q))
            }
            Shape::Composite(parts) => {
                let mut best: Option<CpQuery<D>> = None;
                for part in parts.iter().filter(|p| p.has_boundary()) {
                    let q = part.cp_boundary(x)?;
                    let better = match &best {
                        None => true,
                        Some(b) => q.dist < b.dist - crate::tol::COMPOSITE_TIE * b.dist.max(1.0),
                    };
                    if better {
                        best = Some(q);
                    }
                }
                best.ok_or_else(|| GeomError::InvalidShape("composite has no boundary".into()))
            }
            _ => Err(GeomError::InvalidShape(format!(
                "{:?} has no geometric boundary",
                self
            ))),
        }
    }

    /// Reflection of `x` through its own closest point, projected back onto
    /// the shape: `cp(2 cp(x) - x)`. For points inside the reach of a
    /// smooth closed surface this returns `cp(x)` itself.
    pub fn reflected_cp(&self, x: &Point<D>) -> Result<CpQuery<D>, GeomError> {
        let q = self.cp(x)?;
        let mirrored = q.cp * 2.0 - x;
        self.cp(&mirrored)
    }

    /// Sanity-checks shape parameters; cheap, intended for construction time.
    pub fn validate(&self) -> Result<(), GeomError> {
        let bad = |msg: &str| Err(GeomError::InvalidShape(msg.into()));
        match self {
            Shape::Sphere { radius, .. } => {
                if *radius <= 0.0 {
                    return bad("sphere radius must be positive");
                }
            }
            Shape::Circle3 { radius, normal, .. }
            | Shape::Arc3 { radius, normal, .. } => {
                if D != 3 {
                    return Err(GeomError::WrongDimension {
                        what: "planar circle/arc".into(),
                        required: 3,
                        got: D,
                    });
                }
                if *radius <= 0.0 {
                    return bad("circle radius must be positive");
                }
                if (normal.norm() - 1.0).abs() > 1e-9 {
                    return bad("circle normal must be unit length");
                }
                if let Shape::Arc3 { ref_dir, normal, span, .. } = self {
                    if (ref_dir.norm() - 1.0).abs() > 1e-9 || ref_dir.dot(normal).abs() > 1e-9 {
                        return bad("arc reference direction must be unit and in-plane");
                    }
                    if *span <= 0.0 {
                        return bad("arc span must be positive");
                    }
                }
            }
            Shape::Torus { major, minor, .. } => {
                if D != 3 {
                    return Err(GeomError::WrongDimension {
                        what: "torus".into(),
                        required: 3,
                        got: D,
                    });
                }
                if *minor <= 0.0 || *major <= *minor {
                    return bad("torus needs 0 < minor < major");
                }
            }
            Shape::SolidBox { min, max } => {
                if !(0..D).all(|a| min[a] < max[a]) {
                    return bad("box min must be strictly below max");
                }
            }
            Shape::Segment { a, b } => {
                if (a - b).norm() <= 1e-14 {
                    return bad("segment endpoints coincide");
                }
            }
            Shape::Points(pts) => {
                if pts.is_empty() {
                    return bad("empty point set");
                }
            }
            Shape::Polyline(p) => p.validate()?,
            Shape::ParametricCurve(c) => c.validate()?,
            Shape::ParametricSurface(s) => {
                if D != 3 {
                    return Err(GeomError::WrongDimension {
                        what: "parametric surface".into(),
                        required: 3,
                        got: D,
                    });
                }
                s.validate()?;
            }
            Shape::Mesh(m) => {
                if D != 3 {
                    return Err(GeomError::WrongDimension {
                        what: "triangle mesh".into(),
                        required: 3,
                        got: D,
                    });
                }
                m.validate()?;
            }
            Shape::LevelSet(_) | Shape::SignedDistance { .. } => {}
            Shape::Composite(parts) => {
                if parts.is_empty() {
                    return bad("composite must have at least one part");
                }
                for p in parts {
                    p.validate()?;
                }
            }
        }
        Ok(())
    }
}

/// Mirror `x` across `curve` and project the mirrored point onto `surface`:
/// `cp_S(2 cp_C(x) - x)`. On a surface this walks to the approximate mirror
/// location of `x` on the far side of the curve.
pub fn mirror_across_curve<const D: usize>(
    surface: &Shape<D>,
    curve: &Shape<D>,
    x: &Point<D>,
) -> Result<CpQuery<D>, GeomError> {
    let on_curve = curve.cp(x)?;
    let mirrored = on_curve.cp * 2.0 - x;
    surface.cp(&mirrored)
}

fn require_3d<const D: usize>(what: &str, x: &Point<D>) -> Result<Point<3>, GeomError> {
    if D != 3 {
        return Err(GeomError::WrongDimension {
            what: what.into(),
            required: 3,
            got: D,
        });
    }
    Ok(Point::<3>::from_iterator(x.iter().copied()))
}

fn from_3d_query<const D: usize>(q: CpQuery<3>) -> CpQuery<D> {
    // Only reachable when D == 3; the iterator copy keeps the types honest.
    CpQuery {
        cp: Point::<D>::from_iterator(q.cp.iter().copied()),
        dist: q.dist,
        converged: q.converged,
        tri: q.tri,
        on_open_boundary: q.on_open_boundary,
    }
}
