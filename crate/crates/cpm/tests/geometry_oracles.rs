//! Closest point queries checked against hand-computed values and
//! independent brute-force oracles.
//!
//! The oracles here deliberately avoid the production search structures:
//! meshes are scanned triangle by triangle, parametric curves by dense
//! parameter sweeps, implicit surfaces by sampling an explicit solve of the
//! defining equation. Agreement pins the accelerated paths to ground truth.

use cpm::geometry::{
    closest_point_triangle, mirror_across_curve, presets, LevelSet, ParametricCurve, Shape,
    TriMesh,
};
use cpm::error::GeomError;
use cpm::Point;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use std::sync::Arc;

/// Tolerances for this suite.
mod tols {
    /// Closed-form projections: rounding error only.
    pub const EXACT: f64 = 1e-12;
    /// Iterative projections stop on steps of 1e-10; the position error of
    /// the result is a little looser.
    pub const ITER: f64 = 1e-8;
    /// Brute-force sampling pitch for surface scans.
    pub const SCAN: f64 = 1e-3;
}

fn p2(x: f64, y: f64) -> Point<2> {
    Point::<2>::new(x, y)
}

fn p3(x: f64, y: f64, z: f64) -> Point<3> {
    Point::<3>::new(x, y, z)
}

// ---------------------------------------------------------------------------
// Analytic shapes
// ---------------------------------------------------------------------------

#[test]
fn sphere_projects_radially() {
    let q = presets::unit_sphere().cp(&p3(2.0, 0.0, 0.0)).unwrap();
    assert!((q.cp - p3(1.0, 0.0, 0.0)).norm() <= tols::EXACT);
    assert!((q.dist - 1.0).abs() <= tols::EXACT);
}

#[test]
fn circle_center_is_ambiguous() {
    let err = presets::unit_circle().cp(&p2(0.0, 0.0)).unwrap_err();
    match err {
        GeomError::AmbiguousClosestPoint { dist, .. } => {
            assert!((dist - 1.0).abs() <= tols::EXACT);
        }
        other => panic!("expected ambiguity, got {other:?}"),
    }
}

#[test]
fn composite_prefers_nearest_part() {
    // Distances by hand: 0.9 to the sphere, 0.1 to the segment tip.
    let shape = Shape::Composite(vec![
        presets::unit_sphere(),
        Shape::Segment {
            a: p3(2.0, 0.0, 0.0),
            b: p3(3.0, 0.0, 0.0),
        },
    ]);
    let q = shape.cp(&p3(1.9, 0.0, 0.0)).unwrap();
    assert!((q.cp - p3(2.0, 0.0, 0.0)).norm() <= tols::EXACT);
    assert!((q.dist - 0.1).abs() <= tols::EXACT);
    assert!(q.on_open_boundary, "segment tip contact");
}

#[test]
fn composite_distance_is_min_over_parts() {
    let parts = vec![
        presets::unit_sphere(),
        Shape::Segment {
            a: p3(2.0, 0.0, 0.0),
            b: p3(3.0, 0.0, 0.0),
        },
        presets::torus(3.0, 1.0),
    ];
    let composite = Shape::Composite(parts.clone());
    let mut rng = StdRng::seed_from_u64(7);
    for _ in 0..200 {
        let x = p3(
            rng.random_range(-4.0..4.0),
            rng.random_range(-4.0..4.0),
            rng.random_range(-4.0..4.0),
        );
        let whole = match composite.cp(&x) {
            Ok(q) => q,
            Err(_) => continue,
        };
        let best = parts
            .iter()
            .filter_map(|p| p.cp(&x).ok())
            .map(|q| q.dist)
            .fold(f64::INFINITY, f64::min);
        assert!((whole.dist - best).abs() <= tols::EXACT * best.max(1.0));
    }
}

#[test]
fn solid_region_is_identity_inside() {
    let square = presets::flat_square();
    let q = square.cp(&p2(0.25, -0.5)).unwrap();
    assert_eq!(q.dist, 0.0);
    assert!((q.cp - p2(0.25, -0.5)).norm() <= tols::EXACT);
    // Outside points clamp onto the rim and report boundary contact.
    let q = square.cp(&p2(1.3, 0.0)).unwrap();
    assert!((q.cp - p2(1.0, 0.0)).norm() <= tols::EXACT);
    assert!(q.on_open_boundary);
    // The rim projection pushes interior points to the nearest face.
    let q = square.cp_boundary(&p2(0.9, 0.2)).unwrap();
    assert!((q.cp - p2(1.0, 0.2)).norm() <= tols::EXACT);
}

#[test]
fn arc_clamps_to_nearer_endpoint() {
    let arc = presets::biconcave_equator_arc();
    // A point at angle pi/2 is past the arc's end at pi/4; the end is the
    // nearer of the two endpoints.
    let q = arc.cp(&p3(0.0, 1.0, 0.0)).unwrap();
    let end = p3(
        (std::f64::consts::PI / 4.0).cos(),
        (std::f64::consts::PI / 4.0).sin(),
        0.0,
    );
    assert!((q.cp - end).norm() <= tols::EXACT);
    assert!(q.on_open_boundary);
    // The angle pi is outside the covered range [-3pi/4, pi/4]; its nearer
    // endpoint is the start of the arc.
    let q = arc.cp(&p3(-2.0, 0.0, 0.0)).unwrap();
    let start = p3(
        (-3.0 * std::f64::consts::PI / 4.0).cos(),
        (-3.0 * std::f64::consts::PI / 4.0).sin(),
        0.0,
    );
    assert!((q.cp - start).norm() <= tols::EXACT);
    assert!(q.on_open_boundary);
    // A point inside the span projects radially and is not an endpoint.
    let q = arc.cp(&p3(1.5, -1.5, 0.0)).unwrap();
    let expect = p3(
        (-std::f64::consts::PI / 4.0).cos(),
        (-std::f64::consts::PI / 4.0).sin(),
        0.0,
    );
    assert!((q.cp - expect).norm() <= tols::EXACT);
    assert!(!q.on_open_boundary);
}

// ---------------------------------------------------------------------------
// Parametric curves
// ---------------------------------------------------------------------------

#[test]
fn parametric_circle_projects_radially() {
    let circle = Shape::ParametricCurve(ParametricCurve::<2>::new(
        Arc::new(|t: f64| Point::<2>::new(t.cos(), t.sin())),
        Arc::new(|t: f64| Point::<2>::new(-t.sin(), t.cos())),
        [0.0, 2.0 * std::f64::consts::PI],
        true,
    ));
    let q = circle.cp(&p2(2.0, 0.0)).unwrap();
    assert!((q.cp - p2(1.0, 0.0)).norm() <= tols::ITER);
    assert!((q.dist - 1.0).abs() <= tols::ITER);
}

#[test]
fn knot_point_is_a_fixed_point() {
    // Same formula evaluated here by hand for one parameter value.
    let (a, b, big_r) = (3.0f64, 7.0f64, 3.0f64);
    let s = 1.234f64;
    let ring = big_r + (b * s).cos();
    let x = p3(ring * (a * s).cos(), ring * (a * s).sin(), (b * s).sin());
    let q = presets::torus_knot(a, b, big_r).cp(&x).unwrap();
    assert!(q.dist <= tols::ITER);
    assert!((q.cp - x).norm() <= tols::ITER);
}

#[test]
fn parabola_agrees_with_dense_parameter_scan() {
    let f = |t: f64| p2(t, t * t);
    let x = p2(0.0, 1.0);
    // Oracle: one million equispaced parameters.
    let mut brute_d = f64::INFINITY;
    let mut brute_cp = p2(0.0, 0.0);
    for k in 0..=1_000_000u64 {
        let t = -3.0 + 6.0 * k as f64 / 1_000_000.0;
        let c = f(t);
        let d = (x - c).norm();
        if d < brute_d {
            brute_d = d;
            brute_cp = c;
        }
    }
    let curve = Shape::ParametricCurve(ParametricCurve::<2>::new(
        Arc::new(move |t: f64| f(t)),
        Arc::new(|t: f64| p2(1.0, 2.0 * t)),
        [-3.0, 3.0],
        false,
    ));
    let q = curve.cp(&x).unwrap();
    // The query is symmetric; both minimizers (+-1/sqrt2, 1/2) are valid.
    assert!((q.cp[0].abs() - std::f64::consts::FRAC_1_SQRT_2).abs() <= 1e-6);
    assert!((q.cp[1] - 0.5).abs() <= 1e-6);
    assert!((q.dist - brute_d).abs() <= 1e-6);
    assert!((q.cp[0].abs() - brute_cp[0].abs()).abs() <= 1e-5);
}

#[test]
fn open_curve_endpoint_contact_is_flagged() {
    let curve = Shape::ParametricCurve(ParametricCurve::<2>::new(
        Arc::new(|t: f64| p2(t, t * t)),
        Arc::new(|t: f64| p2(1.0, 2.0 * t)),
        [-1.0, 1.0],
        false,
    ));
    let q = curve.cp(&p2(5.0, 1.0)).unwrap();
    assert!(q.on_open_boundary);
    assert!((q.cp - p2(1.0, 1.0)).norm() <= tols::ITER);
    let ends = curve.cp_boundary(&p2(5.0, 1.0)).unwrap();
    assert!((ends.cp - p2(1.0, 1.0)).norm() <= tols::EXACT);
}

// ---------------------------------------------------------------------------
// Implicit surfaces
// ---------------------------------------------------------------------------

fn sphere_level_set() -> Shape<3> {
    Shape::LevelSet(LevelSet::new(
        Arc::new(|x: &Point<3>| x.norm_squared() - 1.0),
        Arc::new(|x: &Point<3>| x * 2.0),
        Arc::new(|_: &Point<3>| nalgebra::SMatrix::<f64, 3, 3>::identity() * 2.0),
    ))
}

#[test]
fn level_set_sphere_projects_radially() {
    let q = sphere_level_set().cp(&p3(0.0, 0.0, 2.0)).unwrap();
    assert!((q.cp - p3(0.0, 0.0, 1.0)).norm() <= tols::ITER);
    assert!((q.dist - 1.0).abs() <= tols::ITER);
}

#[test]
fn level_set_center_has_no_projection() {
    assert!(sphere_level_set().cp(&p3(0.0, 0.0, 0.0)).is_err());
}

#[test]
fn biconcave_point_on_surface_is_fixed() {
    let q = presets::biconcave_surface().cp(&p3(1.0, 0.0, 0.0)).unwrap();
    assert!(q.dist <= tols::ITER);
    assert!((q.cp - p3(1.0, 0.0, 0.0)).norm() <= tols::ITER);
}

#[test]
fn biconcave_projection_satisfies_stationarity() {
    let x = p3(1.2, 0.1, -0.1);
    let q = presets::biconcave_surface().cp(&x).unwrap();

    // 1. The foot point lies on the surface.
    let phi = |p: &Point<3>| {
        let a = p[0] - p[2] * p[2];
        a * a + p[1] * p[1] + p[2] * p[2] - 1.0
    };
    assert!(phi(&q.cp).abs() <= 1e-8);

    // 2. The offset is parallel to the surface normal.
    let a = q.cp[0] - q.cp[2] * q.cp[2];
    let grad = p3(
        2.0 * a,
        2.0 * q.cp[1],
        -4.0 * q.cp[2] * a + 2.0 * q.cp[2],
    );
    let offset = x - q.cp;
    let misalign = offset.cross(&grad).norm() / (offset.norm() * grad.norm());
    assert!(misalign <= 1e-6, "misalignment {misalign:.3e}");

    // 3. Brute force: solve the defining equation for x1 on a fine
    // (x2, x3) lattice and take the nearest explicit surface point.
    let mut brute = f64::INFINITY;
    let mut brute_cp = x;
    let steps = (0.7 / tols::SCAN) as i64;
    for i in -steps..=steps {
        let x2 = i as f64 * tols::SCAN;
        for j in -steps..=steps {
            let x3 = j as f64 * tols::SCAN;
            let rad = 1.0 - x2 * x2 - x3 * x3;
            if rad < 0.0 {
                continue;
            }
            let x1 = x3 * x3 + rad.sqrt();
            let cand = p3(x1, x2, x3);
            let d = (x - cand).norm();
            if d < brute {
                brute = d;
                brute_cp = cand;
            }
        }
    }
    assert!((q.dist - brute).abs() <= 2.0 * tols::SCAN);
    assert!((q.cp - brute_cp).norm() <= 4.0 * tols::SCAN);
    assert!(q.dist <= brute + tols::EXACT, "solver beats sampled minimum");
}

// ---------------------------------------------------------------------------
// Meshes
// ---------------------------------------------------------------------------

fn one_triangle() -> TriMesh {
    TriMesh::new(
        vec![p3(0.0, 0.0, 0.0), p3(1.0, 0.0, 0.0), p3(0.0, 1.0, 0.0)],
        vec![[0, 1, 2]],
    )
}

#[test]
fn triangle_interior_projection() {
    let q = Shape::<3>::Mesh(Arc::new(one_triangle()))
        .cp(&p3(0.25, 0.25, 1.0))
        .unwrap();
    assert!((q.cp - p3(0.25, 0.25, 0.0)).norm() <= tols::EXACT);
    assert!((q.dist - 1.0).abs() <= tols::EXACT);
    let (tri, bary) = q.tri.unwrap();
    assert_eq!(tri, 0);
    assert!((bary[0] - 0.5).abs() <= tols::EXACT);
    assert!((bary[1] - 0.25).abs() <= tols::EXACT);
    assert!((bary[2] - 0.25).abs() <= tols::EXACT);
}

#[test]
fn triangle_edge_projection() {
    let q = Shape::<3>::Mesh(Arc::new(one_triangle()))
        .cp(&p3(2.0, 2.0, 0.0))
        .unwrap();
    assert!((q.cp - p3(0.5, 0.5, 0.0)).norm() <= tols::EXACT);
    // A lone triangle is all boundary.
    assert!(q.on_open_boundary);
}

#[test]
fn icosphere_bvh_matches_all_triangle_scan() {
    let mesh = presets::icosphere(3);
    assert_eq!(mesh.n_triangles(), 1280);
    let shape = Shape::<3>::Mesh(Arc::new(mesh.clone()));
    let mut rng = StdRng::seed_from_u64(42);
    for _ in 0..1000 {
        let x = p3(
            rng.random_range(-2.0..2.0),
            rng.random_range(-2.0..2.0),
            rng.random_range(-2.0..2.0),
        );
        let fast = shape.cp(&x).unwrap();
        // Oracle: scan every triangle.
        let mut best = f64::INFINITY;
        let mut best_cp = x;
        for t in &mesh.tris {
            let (cand, _) = closest_point_triangle(
                &x,
                &mesh.vertices[t[0] as usize],
                &mesh.vertices[t[1] as usize],
                &mesh.vertices[t[2] as usize],
            );
            let d = (x - cand).norm();
            if d < best {
                best = d;
                best_cp = cand;
            }
        }
        assert!(
            (fast.cp - best_cp).norm() <= tols::EXACT,
            "query {x:?}: bvh {:?} vs scan {:?}",
            fast.cp,
            best_cp
        );
        assert!((fast.dist - best).abs() <= tols::EXACT);
    }
}

#[test]
fn closed_mesh_has_no_boundary_and_band_has_one_loop() {
    assert!(!presets::icosphere(1).has_boundary());
    let band = presets::twisted_band_mesh(96, 7, 0.35);
    assert!(band.has_boundary());
    band.validate().unwrap();
    // Every boundary vertex has exactly two incident boundary edges: the
    // boundary decomposes into closed loops.
    let mut degree = std::collections::HashMap::new();
    for e in band.boundary_edges() {
        *degree.entry(e[0]).or_insert(0u32) += 1;
        *degree.entry(e[1]).or_insert(0u32) += 1;
    }
    assert!(degree.values().all(|&d| d == 2));
}

// ---------------------------------------------------------------------------
// Reflected queries
// ---------------------------------------------------------------------------

#[test]
fn reflection_on_flat_surface_returns_foot_point() {
    let plane = Shape::<3>::SignedDistance {
        dist: Arc::new(|x: &Point<3>| x[2]),
        grad: Arc::new(|_: &Point<3>| p3(0.0, 0.0, 1.0)),
    };
    let q = plane.reflected_cp(&p3(0.0, 0.0, 0.3)).unwrap();
    assert!((q.cp - p3(0.0, 0.0, 0.0)).norm() <= tols::EXACT);
}

#[test]
fn reflection_past_segment_end_walks_back_inside() {
    let seg = Shape::<2>::Segment {
        a: p2(0.0, 0.0),
        b: p2(1.0, 0.0),
    };
    // cp of (1.2, 0.1) is the endpoint (1,0); the reflection (0.8, -0.1)
    // projects to the interior point (0.8, 0).
    let q = seg.reflected_cp(&p2(1.2, 0.1)).unwrap();
    assert!((q.cp - p2(0.8, 0.0)).norm() <= tols::EXACT);
}

#[test]
fn reflection_through_circle_is_radial() {
    let q = presets::unit_circle().reflected_cp(&p2(1.5, 0.0)).unwrap();
    assert!((q.cp - p2(1.0, 0.0)).norm() <= tols::EXACT);
}

#[test]
fn mirror_across_point_curve_flips_along_surface() {
    let axis = Shape::<2>::SignedDistance {
        dist: Arc::new(|x: &Point<2>| x[1]),
        grad: Arc::new(|_: &Point<2>| p2(0.0, 1.0)),
    };
    let origin = Shape::<2>::Points(vec![p2(0.0, 0.0)]);
    let q = mirror_across_curve(&axis, &origin, &p2(0.3, 0.2)).unwrap();
    assert!((q.cp - p2(-0.3, 0.0)).norm() <= tols::EXACT);
}

#[test]
fn mirror_across_curve_fixes_points_on_the_curve() {
    let sphere = presets::unit_sphere();
    let equator = presets::equator_circle();
    let x = p3(1.0, 0.0, 0.0);
    let q = mirror_across_curve(&sphere, &equator, &x).unwrap();
    assert!((q.cp - x).norm() <= tols::EXACT);
}

#[test]
fn mirror_across_equator_lands_in_other_hemisphere() {
    let sphere = presets::unit_sphere();
    let equator = presets::equator_circle();
    let x = p3(1.05, 0.0, 0.12);
    let q = mirror_across_curve(&sphere, &equator, &x).unwrap();
    assert!(q.cp[2] < 0.0, "mirror stayed in the upper hemisphere");
    // By hand: the mirrored point is (0.95, 0, -0.12), which normalizes to
    // the sphere.
    let expect = p3(0.95, 0.0, -0.12).normalize();
    assert!((q.cp - expect).norm() <= tols::EXACT);
}

// ---------------------------------------------------------------------------
// Properties across representations
// ---------------------------------------------------------------------------

#[test]
fn closest_points_are_idempotent() {
    let shapes: Vec<(&str, Shape<3>)> = vec![
        ("sphere", presets::unit_sphere()),
        ("torus", presets::torus(2.0, 1.0)),
        ("meridian", presets::meridian_circle()),
        ("biconcave", presets::biconcave_surface()),
        ("lobed", presets::lobed_tetrahedron_surface()),
        ("knot", presets::trefoil_knot()),
        ("icosphere", Shape::Mesh(Arc::new(presets::icosphere(2)))),
    ];
    let mut rng = StdRng::seed_from_u64(11);
    for (name, shape) in &shapes {
        let mut checked = 0;
        while checked < 40 {
            let x = p3(
                rng.random_range(-3.0..3.0),
                rng.random_range(-3.0..3.0),
                rng.random_range(-3.0..3.0),
            );
            let Ok(q) = shape.cp(&x) else { continue };
            let Ok(q2) = shape.cp(&q.cp) else { continue };
            assert!(
                (q2.cp - q.cp).norm() <= 1e-7,
                "{name}: cp not idempotent at {x:?}: {:?} -> {:?}",
                q.cp,
                q2.cp
            );
            assert!(q2.dist <= 1e-7, "{name}: cp lies off the surface");
            checked += 1;
        }
    }
    let planar: Vec<(&str, Shape<2>)> = vec![
        ("circle", presets::unit_circle()),
        ("flower", presets::planar_flower(-0.5)),
    ];
    for (name, shape) in &planar {
        let mut checked = 0;
        while checked < 40 {
            let x = p2(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            let Ok(q) = shape.cp(&x) else { continue };
            let Ok(q2) = shape.cp(&q.cp) else { continue };
            assert!(
                (q2.cp - q.cp).norm() <= 1e-7,
                "{name}: cp not idempotent at {x:?}"
            );
            checked += 1;
        }
    }
}

#[test]
fn distance_always_matches_returned_point() {
    let shape = presets::lobed_tetrahedron_surface();
    let mut rng = StdRng::seed_from_u64(5);
    for _ in 0..100 {
        let x = p3(
            rng.random_range(-3.0..3.0),
            rng.random_range(-3.0..3.0),
            rng.random_range(-3.0..3.0),
        );
        if let Ok(q) = shape.cp(&x) {
            assert!(((x - q.cp).norm() - q.dist).abs() <= tols::EXACT);
        }
    }
}

#[test]
fn revolution_surface_answers_queries() {
    let surf = presets::flower_revolution_surface();
    let q = surf.cp(&p3(1.0, 0.0, 0.0)).unwrap();
    assert!(q.dist.is_finite());
    // Idempotence on an iterative two-parameter surface.
    let q2 = surf.cp(&q.cp).unwrap();
    assert!(q2.dist <= 1e-6);
}
