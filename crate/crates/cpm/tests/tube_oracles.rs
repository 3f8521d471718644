//! Tube and band construction checked against exhaustive bounding-box
//! scans and hand-computed values.
//!
//! The breadth-first builder is trusted only because these scans visit
//! every lattice cell in a box that safely contains the tube and recompute
//! membership from the distance predicate alone.

use cpm::error::{GridError, IbcError};
use cpm::geometry::{presets, Shape};
use cpm::grid::{
    build_ibc_band, dof_counts_csv, tube_radius, GridParams, GridWarning, LatticeIndex,
    SparseGrid,
};
use cpm::Point;
use std::collections::HashSet;

fn p2(x: f64, y: f64) -> Point<2> {
    Point::<2>::new(x, y)
}

fn p3(x: f64, y: f64, z: f64) -> Point<3> {
    Point::<3>::new(x, y, z)
}

/// Exhaustive oracle: every lattice cell in `[lo, hi]^D` whose distance to
/// the surface is within the tube radius. Closest point failures count as
/// "outside", mirroring the builder's policy for far degenerate queries.
fn scan_tube_2d(surface: &Shape<2>, params: &GridParams<2>, lo: i64, hi: i64) -> HashSet<[i64; 2]> {
    let r = tube_radius(params.dx, 2, params.p, params.q);
    let mut kept = HashSet::new();
    for i in lo..=hi {
        for j in lo..=hi {
            let idx = LatticeIndex([i, j]);
            let x = idx.to_point(&params.origin, params.dx);
            if let Ok(q) = surface.cp(&x) {
                if q.dist <= r {
                    kept.insert(idx.0);
                }
            }
        }
    }
    kept
}

fn scan_tube_3d(surface: &Shape<3>, params: &GridParams<3>, lo: i64, hi: i64) -> HashSet<[i64; 3]> {
    let r = tube_radius(params.dx, 3, params.p, params.q);
    let mut kept = HashSet::new();
    for i in lo..=hi {
        for j in lo..=hi {
            for k in lo..=hi {
                let idx = LatticeIndex([i, j, k]);
                let x = idx.to_point(&params.origin, params.dx);
                if let Ok(q) = surface.cp(&x) {
                    if q.dist <= r {
                        kept.insert(idx.0);
                    }
                }
            }
        }
    }
    kept
}

/// Cells the search must have visited: the tube itself plus its rejected
/// frontier (every face neighbor of a kept cell).
fn visited_closure<const D: usize>(kept: &HashSet<[i64; D]>) -> usize {
    let mut all = kept.clone();
    for cell in kept {
        for nb in LatticeIndex(*cell).face_neighbors() {
            all.insert(nb.0);
        }
    }
    all.len()
}

#[test]
fn tube_radius_closed_form() {
    assert!((tube_radius(1.0, 3, 3, 1) - 17.0f64.sqrt()).abs() < 1e-15);
    assert!((tube_radius(1.0, 2, 2, 1) - 8.5f64.sqrt()).abs() < 1e-15);
    // Linear in dx, bit for bit.
    assert_eq!(tube_radius(0.1, 3, 3, 1), 0.1 * tube_radius(1.0, 3, 3, 1));
}

#[test]
fn circle_tube_matches_bounding_box_scan() {
    let circle = presets::unit_circle();
    let params = GridParams::<2>::new(0.1, 2, 1);
    let grid = SparseGrid::build(&circle, &params, &[]).unwrap();
    let oracle = scan_tube_2d(&circle, &params, -25, 25);
    let built: HashSet<[i64; 2]> = grid.indices.iter().map(|i| i.0).collect();
    assert_eq!(built, oracle);
    // One closest point query per visited cell, nothing more.
    assert_eq!(grid.cp_queries, visited_closure(&oracle));
}

#[test]
fn sphere_tube_matches_bounding_box_scan() {
    let sphere = presets::unit_sphere();
    let params = GridParams::<3>::new(0.1, 3, 1);
    let grid = SparseGrid::build(&sphere, &params, &[]).unwrap();
    let oracle = scan_tube_3d(&sphere, &params, -16, 16);
    let built: HashSet<[i64; 3]> = grid.indices.iter().map(|i| i.0).collect();
    assert_eq!(built, oracle);
    assert_eq!(grid.cp_queries, visited_closure(&oracle));
}

#[test]
fn torus_tube_matches_bounding_box_scan() {
    // Minor radius 0.5 keeps the spine circle (a medial set of the surface)
    // outside the tube radius 0.412, so no lattice point can land on it.
    let torus = presets::torus(1.0, 0.5);
    let params = GridParams::<3>::new(0.1, 3, 1);
    let grid = SparseGrid::build(&torus, &params, &[]).unwrap();
    let oracle = scan_tube_3d(&torus, &params, -20, 20);
    let built: HashSet<[i64; 3]> = grid.indices.iter().map(|i| i.0).collect();
    assert_eq!(built, oracle);
}

#[test]
fn biconcave_tube_matches_bounding_box_scan() {
    let surf = presets::biconcave_surface();
    let params = GridParams::<3>::new(0.1, 3, 1);
    let grid = SparseGrid::build(&surf, &params, &[]).unwrap();
    let oracle = scan_tube_3d(&surf, &params, -16, 16);
    let built: HashSet<[i64; 3]> = grid.indices.iter().map(|i| i.0).collect();
    assert_eq!(built, oracle);
}

#[test]
fn solid_square_interior_is_identity() {
    let square = presets::flat_square();
    let params = GridParams::<2>::new(0.5, 2, 1);
    let grid = SparseGrid::build(&square, &params, &[]).unwrap();
    let oracle = scan_tube_2d(&square, &params, -8, 8);
    let built: HashSet<[i64; 2]> = grid.indices.iter().map(|i| i.0).collect();
    assert_eq!(built, oracle);
    // Interior cells are their own closest points at distance zero; rim
    // cells past the region are flagged as exterior-boundary cells.
    for dof in 0..grid.n_dofs() as u32 {
        let x = grid.point_of(dof);
        let d = dof as usize;
        if x[0].abs() < 1.0 && x[1].abs() < 1.0 {
            assert_eq!(grid.dist_s[d], 0.0);
            assert!((grid.cp_s[d] - x).norm() == 0.0);
            assert!(!grid.on_exterior_boundary[d]);
        }
    }
    let far = grid.dof_at(&LatticeIndex([3, 0])).unwrap() as usize;
    assert!(grid.on_exterior_boundary[far]);
    assert!((grid.cp_s[far] - p2(1.0, 0.0)).norm() <= 1e-12);
}

#[test]
fn antipodal_seeds_build_identical_tubes() {
    let sphere = presets::unit_sphere();
    let params = GridParams::<3>::new(0.2, 3, 1);
    let a = SparseGrid::build(&sphere, &params, &[p3(1.0, 0.0, 0.0)]).unwrap();
    let b = SparseGrid::build(&sphere, &params, &[p3(-1.0, 0.0, 0.0)]).unwrap();
    assert_eq!(a.indices, b.indices);
    assert!(a.warnings.is_empty() && b.warnings.is_empty());
    // Both seeds together: the second discovers nothing new and warns about
    // nothing.
    let ab = SparseGrid::build(&sphere, &params, &[p3(1.0, 0.0, 0.0), p3(-1.0, 0.0, 0.0)])
        .unwrap();
    assert_eq!(ab.indices, a.indices);
    assert!(ab.warnings.is_empty());
}

#[test]
fn disconnected_components_need_their_own_seeds() {
    let two = Shape::Composite(vec![
        presets::unit_sphere(),
        Shape::Sphere {
            center: p3(5.0, 0.0, 0.0),
            radius: 1.0,
        },
    ]);
    let params = GridParams::<3>::new(0.2, 3, 1);
    let single = SparseGrid::build(&presets::unit_sphere(), &params, &[]).unwrap();
    let grid = SparseGrid::build(&two, &params, &[]).unwrap();
    // Default seeding samples each part; the second seed finds a fresh
    // component and is reported.
    assert_eq!(
        grid.warnings,
        vec![GridWarning::DisconnectedComponent { seed_index: 1 }]
    );
    // The center offset is a lattice multiple, so both components have
    // identical cell counts.
    assert_eq!(grid.n_dofs(), 2 * single.n_dofs());
}

#[test]
fn seed_outside_tube_is_rejected() {
    let err = SparseGrid::build(
        &presets::unit_sphere(),
        &GridParams::<3>::new(0.1, 3, 1),
        &[p3(3.0, 0.0, 0.0)],
    )
    .unwrap_err();
    assert!(matches!(err, GridError::SeedOutsideTube { .. }));
}

#[test]
fn segment_boundary_subset_flags() {
    let seg = Shape::<2>::Segment {
        a: p2(0.0, 0.0),
        b: p2(1.0, 0.0),
    };
    let params = GridParams::<2>::new(0.1, 3, 1);
    let grid = SparseGrid::build(&seg, &params, &[]).unwrap();
    // Past the endpoint: closest surface point and closest endpoint agree.
    let past = grid.dof_at(&LatticeIndex([13, 0])).unwrap() as usize;
    assert!(grid.on_exterior_boundary[past]);
    // Above the interior: closest point is interior, endpoint is far.
    let inside = grid.dof_at(&LatticeIndex([5, 2])).unwrap() as usize;
    assert!(!grid.on_exterior_boundary[inside]);
}

#[test]
fn twisted_band_boundary_flags_match_definition() {
    let mesh = presets::twisted_band_mesh(96, 7, 0.35);
    let boundary_segments: Vec<(Point<3>, Point<3>)> = mesh
        .boundary_edges()
        .iter()
        .map(|e| (mesh.vertices[e[0] as usize], mesh.vertices[e[1] as usize]))
        .collect();
    let shape = Shape::<3>::Mesh(std::sync::Arc::new(mesh));
    let params = GridParams::<3>::new(0.1, 3, 1);
    let grid = SparseGrid::build(&shape, &params, &[]).unwrap();

    // Independent flag recomputation: distance from the surface foot point
    // to the boundary loop via a direct segment scan.
    let dist_to_loop = |x: &Point<3>| -> f64 {
        let mut best = f64::INFINITY;
        for (a, b) in &boundary_segments {
            let ab = b - a;
            let t = ((x - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
            best = best.min((x - (a + ab * t)).norm());
        }
        best
    };
    let mut flagged = 0usize;
    for dof in 0..grid.n_dofs() {
        let d = dist_to_loop(&grid.cp_s[dof]);
        let expect = d <= 1e-10;
        assert_eq!(
            grid.on_exterior_boundary[dof], expect,
            "dof {dof}: cp {:?} has boundary distance {d:.3e}",
            grid.cp_s[dof]
        );
        flagged += expect as usize;
    }
    assert!(flagged > 0, "no half-tube cells past the boundary were found");
}

#[test]
fn band_around_point_matches_distance_scan() {
    let circle = presets::unit_circle();
    let curve = presets::circle_point(0.0);
    let params = GridParams::<2>::new(0.1, 3, 1);
    let grid = SparseGrid::build(&circle, &params, &[]).unwrap();
    let band = build_ibc_band(&grid, &circle, &curve).unwrap();

    let target = p2(1.0, 0.0);
    let r = grid.radius;
    // Oracle: scan all tube DOFs against the exact point distance.
    let mut expect_band = Vec::new();
    for dof in 0..grid.n_dofs() as u32 {
        let d = (grid.point_of(dof) - target).norm();
        if d <= r {
            expect_band.push(dof);
        }
        // Cached region is exactly the tube cells within twice the radius.
        assert_eq!(band.cp_c[dof as usize].is_some(), d < 2.0 * r, "dof {dof}");
        if let Some(cp) = band.cp_c[dof as usize] {
            assert!((cp - target).norm() <= 1e-12);
            assert!((band.dist_c[dof as usize] - d).abs() <= 1e-12);
        }
    }
    assert_eq!(band.base_dof, expect_band);
    // Slot map is the inverse of the slot list.
    for (slot, dof) in band.base_dof.iter().enumerate() {
        assert_eq!(band.slot_of[dof], slot as u32);
    }
    // A point curve has no endpoints to flag, and sides are unassigned
    // until the boundary-condition pass.
    assert!(band.on_endpoint.iter().all(|&f| !f));
    assert!(band.side.iter().all(Option::is_none));
}

#[test]
fn closed_curve_has_empty_endpoint_subset() {
    let sphere = presets::unit_sphere();
    let params = GridParams::<3>::new(0.2, 3, 1);
    let grid = SparseGrid::build(&sphere, &params, &[]).unwrap();
    let band = build_ibc_band(&grid, &sphere, &presets::meridian_circle()).unwrap();
    assert!(band.n_band() > 0);
    assert!(band.on_endpoint.iter().all(|&f| !f));
}

#[test]
fn open_arc_endpoint_subsets_present_at_both_ends() {
    let surf = presets::biconcave_surface();
    let arc = presets::biconcave_equator_arc();
    let params = GridParams::<3>::new(0.1, 3, 1);
    let grid = SparseGrid::build(&surf, &params, &[]).unwrap();
    let band = build_ibc_band(&grid, &surf, &arc).unwrap();

    let ends = [
        p3(
            (-3.0 * std::f64::consts::PI / 4.0).cos(),
            (-3.0 * std::f64::consts::PI / 4.0).sin(),
            0.0,
        ),
        p3(
            (std::f64::consts::PI / 4.0).cos(),
            (std::f64::consts::PI / 4.0).sin(),
            0.0,
        ),
    ];
    let mut seen = [0usize; 2];
    for (slot, &dof) in band.base_dof.iter().enumerate() {
        let cp_c = band.cp_c[dof as usize].unwrap();
        // Independent recomputation of the endpoint flag.
        let d_end = ends.iter().map(|e| (cp_c - e).norm()).fold(f64::INFINITY, f64::min);
        assert_eq!(band.on_endpoint[slot], d_end <= 1e-10, "slot {slot}");
        if band.on_endpoint[slot] {
            let nearer = if (cp_c - ends[0]).norm() < (cp_c - ends[1]).norm() {
                0
            } else {
                1
            };
            seen[nearer] += 1;
        }
    }
    assert!(seen[0] > 0 && seen[1] > 0, "flags per end: {seen:?}");
}

#[test]
fn off_surface_curve_is_rejected() {
    let sphere = presets::unit_sphere();
    let params = GridParams::<3>::new(0.2, 3, 1);
    let grid = SparseGrid::build(&sphere, &params, &[]).unwrap();
    // A circle of radius 0.8 at height 0.5 misses the sphere by ~0.06.
    let bad = Shape::Circle3 {
        center: p3(0.0, 0.0, 0.5),
        radius: 0.8,
        normal: p3(0.0, 0.0, 1.0),
    };
    let err = build_ibc_band(&grid, &sphere, &bad).unwrap_err();
    assert!(matches!(err, IbcError::CurveOffSurface { .. }));
}

#[test]
fn halving_dx_scales_dofs_with_intrinsic_dimension() {
    let circle = presets::unit_circle();
    let coarse = SparseGrid::build(&circle, &GridParams::<2>::new(0.1, 3, 1), &[]).unwrap();
    let fine = SparseGrid::build(&circle, &GridParams::<2>::new(0.05, 3, 1), &[]).unwrap();
    let ratio = fine.n_dofs() as f64 / coarse.n_dofs() as f64;
    assert!((1.4..=2.6).contains(&ratio), "curve ratio {ratio}");

    let sphere = presets::unit_sphere();
    let coarse = SparseGrid::build(&sphere, &GridParams::<3>::new(0.2, 3, 1), &[]).unwrap();
    let fine = SparseGrid::build(&sphere, &GridParams::<3>::new(0.1, 3, 1), &[]).unwrap();
    let ratio = fine.n_dofs() as f64 / coarse.n_dofs() as f64;
    assert!((2.8..=5.2).contains(&ratio), "surface ratio {ratio}");
}

#[test]
fn dump_restore_roundtrip_is_exact() {
    let seg = Shape::<2>::Segment {
        a: p2(0.0, 0.0),
        b: p2(1.0, 0.0),
    };
    let grid = SparseGrid::build(&seg, &GridParams::<2>::new(0.1, 3, 1), &[]).unwrap();
    let text = grid.dump();
    let back = SparseGrid::<2>::restore(&text).unwrap();
    assert_eq!(back.n_dofs(), grid.n_dofs());
    assert_eq!(back.indices, grid.indices);
    assert_eq!(back.dist_s, grid.dist_s);
    assert_eq!(back.on_exterior_boundary, grid.on_exterior_boundary);
    assert_eq!(back.edge_of_tube, grid.edge_of_tube);
    for i in 0..grid.n_dofs() {
        assert_eq!(back.cp_s[i], grid.cp_s[i]);
    }
    // Second generation dump is bitwise identical.
    assert_eq!(back.dump(), text);
    // Corrupted header fails loudly.
    assert!(SparseGrid::<2>::restore(&text.replace("cpm-tube", "cpm-cube")).is_err());
}

#[test]
fn edge_of_tube_flags_match_neighbor_presence() {
    let circle = presets::unit_circle();
    let grid = SparseGrid::build(&circle, &GridParams::<2>::new(0.1, 2, 1), &[]).unwrap();
    let built: HashSet<[i64; 2]> = grid.indices.iter().map(|i| i.0).collect();
    let mut edge_count = 0usize;
    for (i, idx) in grid.indices.iter().enumerate() {
        let missing = idx.face_neighbors().iter().any(|nb| !built.contains(&nb.0));
        assert_eq!(grid.edge_of_tube[i], missing);
        edge_count += missing as usize;
    }
    assert!(edge_count > 0, "an annulus tube must have rim cells");
}

#[test]
fn dof_counts_csv_format_is_fixed() {
    assert_eq!(
        dof_counts_csv(&[(0.1, 42), (0.05, 90)]),
        "dx,n_dofs\n0.1,42\n0.05,90\n"
    );
}
