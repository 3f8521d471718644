//! Closed-form closest point maps for analytic shapes.
//!
//! Degenerate loci (sphere centers, torus axes) fail with
//! `AmbiguousClosestPoint` once the two nearest candidates tie within the
//! crate's relative tie tolerance; everywhere else these maps are exact up
//! to rounding.

use super::CpQuery;
use crate::error::GeomError;
use crate::tol;
use crate::Point;

fn ambiguous<const D: usize>(x: &Point<D>, dist: f64, context: &str) -> GeomError {
    GeomError::AmbiguousClosestPoint {
        point: x.as_slice().to_vec(),
        dist,
        context: context.into(),
    }
}

/// Two candidate distances tie when their gap is below the relative slack.
fn ties(d1: f64, d2: f64) -> bool {
    (d1 - d2).abs() <= tol::COMPOSITE_TIE * d1.abs().max(1.0)
}

pub fn cp_sphere<const D: usize>(
    center: &Point<D>,
    radius: f64,
    x: &Point<D>,
) -> Result<CpQuery<D>, GeomError> {
    let rel = x - center;
    let rho = rel.norm();
    // Antipodal candidates at radius -/+ rho tie when rho is tiny.
    if ties(radius - rho, radius + rho) {
        return Err(ambiguous(x, radius, "center of a sphere"));
    }
    let cp = center + rel * (radius / rho);
    Ok(CpQuery::new(cp, (x - cp).norm()))
}

/// Projects into the circle's plane, then radially onto the circle.
pub fn cp_circle3<const D: usize>(
    center: &Point<D>,
    radius: f64,
    normal: &Point<D>,
    x: &Point<D>,
) -> Result<CpQuery<D>, GeomError> {
    let rel = x - center;
    let h = rel.dot(normal);
    let in_plane = rel - normal * h;
    let rho = in_plane.norm();
    if ties(
        (radius - rho).hypot(h),
        (radius + rho).hypot(h),
    ) {
        return Err(ambiguous(x, (radius * radius + h * h).sqrt(), "axis of a circle"));
    }
    let cp = center + in_plane * (radius / rho);
    Ok(CpQuery::new(cp, (x - cp).norm()))
}

pub fn arc_endpoints<const D: usize>(
    center: &Point<D>,
    radius: f64,
    normal: &Point<D>,
    ref_dir: &Point<D>,
    span: f64,
) -> [Point<D>; 2] {
    let v = cross_in_plane(normal, ref_dir);
    let at = |phi: f64| center + (ref_dir * phi.cos() + v * phi.sin()) * radius;
    [at(0.0), at(span)]
}

/// In-plane direction 90 degrees counterclockwise from `u` about `n`
/// (the cross product n x u, written out to stay generic over D).
fn cross_in_plane<const D: usize>(n: &Point<D>, u: &Point<D>) -> Point<D> {
    assert_eq!(D, 3, "arc plane frames are three-dimensional");
    let mut v = Point::<D>::zeros();
    v[0] = n[1] * u[2] - n[2] * u[1];
    v[1] = n[2] * u[0] - n[0] * u[2];
    v[2] = n[0] * u[1] - n[1] * u[0];
    v
}

pub fn cp_arc3<const D: usize>(
    center: &Point<D>,
    radius: f64,
    normal: &Point<D>,
    ref_dir: &Point<D>,
    span: f64,
    x: &Point<D>,
) -> Result<CpQuery<D>, GeomError> {
    let rel = x - center;
    let h = rel.dot(normal);
    let in_plane = rel - normal * h;
    let rho = in_plane.norm();
    if ties((radius - rho).hypot(h), (radius + rho).hypot(h)) {
        return Err(ambiguous(x, (radius * radius + h * h).sqrt(), "axis of an arc"));
    }
    let v = cross_in_plane(normal, ref_dir);
    let phi = in_plane.dot(&v).atan2(in_plane.dot(ref_dir));
    let phi = if phi < 0.0 {
        phi + 2.0 * std::f64::consts::PI
    } else {
        phi
    };
    let full = span >= 2.0 * std::f64::consts::PI - 1e-12;
    if full || phi <= span {
        let cp = center + in_plane * (radius / rho);
        return Ok(CpQuery::new(cp, (x - cp).norm()));
    }
    // Off the swept range: nearer endpoint wins, ties to the start point.
    let [e0, e1] = arc_endpoints(center, radius, normal, ref_dir, span);
    let (d0, d1) = ((x - e0).norm(), (x - e1).norm());
    let cp = if d0 <= d1 { e0 } else { e1 };
    Ok(CpQuery::new(cp, d0.min(d1)).boundary(true))
}

/// Torus around the vertical axis through `center`.
pub fn cp_torus<const D: usize>(
    center: &Point<D>,
    major: f64,
    minor: f64,
    x: &Point<D>,
) -> Result<CpQuery<D>, GeomError> {
    assert_eq!(D, 3, "torus queries are three-dimensional");
    let rel = x - center;
    let rho_xy = (rel[0] * rel[0] + rel[1] * rel[1]).sqrt();
    // On the axis every azimuth ties.
    if rho_xy <= tol::COMPOSITE_TIE * major.max(1.0) {
        let d = ((major * major + rel[2] * rel[2]).sqrt() - minor).abs();
        return Err(ambiguous(x, d, "axis of a torus"));
    }
    // Nearest point on the spine circle.
    let scale = major / rho_xy;
    let mut spine = *center;
    spine[0] += rel[0] * scale;
    spine[1] += rel[1] * scale;
    let to_x = x - spine;
    let td = to_x.norm();
    if td <= tol::COMPOSITE_TIE * minor.max(1.0) {
        return Err(ambiguous(x, minor, "spine circle of a torus"));
    }
    let cp = spine + to_x * (minor / td);
    Ok(CpQuery::new(cp, (x - cp).norm()))
}

/// Componentwise clamp: the closest point map of a solid box.
pub fn cp_box<const D: usize>(min: &Point<D>, max: &Point<D>, x: &Point<D>) -> CpQuery<D> {
    let mut cp = *x;
    let mut outside = false;
    for a in 0..D {
        if cp[a] < min[a] {
            cp[a] = min[a];
            outside = true;
        } else if cp[a] > max[a] {
            cp[a] = max[a];
            outside = true;
        }
    }
    CpQuery::new(cp, (x - cp).norm()).boundary(outside)
}

/// Closest point on the boundary surface of a solid box. Interior queries
/// project to the nearest face; exterior queries reuse the clamp.
pub fn cp_box_boundary<const D: usize>(min: &Point<D>, max: &Point<D>, x: &Point<D>) -> CpQuery<D> {
    let clamped = cp_box(min, max, x);
    if clamped.dist > 0.0 {
        return clamped;
    }
    // Inside: push the single cheapest coordinate to its nearer face.
    let mut best_axis = 0;
    let mut best_val = f64::INFINITY;
    let mut best_face = 0.0;
    for a in 0..D {
        let lo = x[a] - min[a];
        let hi = max[a] - x[a];
        let (gap, face) = if lo <= hi { (lo, min[a]) } else { (hi, max[a]) };
        if gap < best_val {
            best_val = gap;
            best_axis = a;
            best_face = face;
        }
    }
    let mut cp = *x;
    cp[best_axis] = best_face;
    CpQuery::new(cp, best_val).boundary(true)
}

pub fn cp_segment<const D: usize>(a: &Point<D>, b: &Point<D>, x: &Point<D>) -> CpQuery<D> {
    let ab = b - a;
    let t = (x - a).dot(&ab) / ab.norm_squared();
    let tc = t.clamp(0.0, 1.0);
    let cp = a + ab * tc;
    CpQuery::new(cp, (x - cp).norm()).boundary(tc == 0.0 || tc == 1.0)
}

/// Nearest of a finite point set; equidistant candidates resolve to the
/// lowest index so repeat queries are reproducible.
pub fn cp_points<const D: usize>(
    pts: &[Point<D>],
    x: &Point<D>,
) -> Result<CpQuery<D>, GeomError> {
    if pts.is_empty() {
        return Err(GeomError::InvalidShape("empty point set".into()));
    }
    let mut best = 0;
    let mut best_d = (x - pts[0]).norm();
    for (i, p) in pts.iter().enumerate().skip(1) {
        let d = (x - p).norm();
        if d < best_d - tol::COMPOSITE_TIE * best_d.max(1.0) {
            best = i;
            best_d = d;
        }
    }
    Ok(CpQuery::new(pts[best], best_d))
}
