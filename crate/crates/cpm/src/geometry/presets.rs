//! Ready-made surfaces and interior curves used by the shipped drivers,
//! the CLI, and the test suite.
//!
//! Everything here is a plain [`Shape`] constructor; nothing is cached
//! globally, so presets are safe to build per run.

use super::{LevelSet, ParametricCurve, ParametricSurface, Polyline, Shape, TriMesh};
use crate::Point;
use std::f64::consts::PI;
use std::sync::Arc;

/// Unit circle centered at the origin (planar host surface).
pub fn unit_circle() -> Shape<2> {
    Shape::Sphere {
        center: Point::<2>::zeros(),
        radius: 1.0,
    }
}

/// Unit sphere centered at the origin.
pub fn unit_sphere() -> Shape<3> {
    Shape::Sphere {
        center: Point::<3>::zeros(),
        radius: 1.0,
    }
}

/// Torus around the z axis.
pub fn torus(major: f64, minor: f64) -> Shape<3> {
    Shape::Torus {
        center: Point::<3>::zeros(),
        major,
        minor,
    }
}

/// A single point on the unit circle at angle `theta`.
pub fn circle_point(theta: f64) -> Shape<2> {
    Shape::Points(vec![Point::<2>::new(theta.cos(), theta.sin())])
}

/// Great circle of the unit sphere lying in the plane `y = 0`. It passes
/// through both poles, so fields that depend only on the polar angle have
/// zero conormal derivative across it.
pub fn meridian_circle() -> Shape<3> {
    Shape::Circle3 {
        center: Point::<3>::zeros(),
        radius: 1.0,
        normal: Point::<3>::new(0.0, 1.0, 0.0),
    }
}

/// Equator of the unit sphere (plane `z = 0`).
pub fn equator_circle() -> Shape<3> {
    Shape::Circle3 {
        center: Point::<3>::zeros(),
        radius: 1.0,
        normal: Point::<3>::new(0.0, 0.0, 1.0),
    }
}

/// North pole of the unit sphere, as a point constellation.
pub fn north_pole() -> Shape<3> {
    Shape::Points(vec![Point::<3>::new(0.0, 0.0, 1.0)])
}

/// Level-set value of the biconcave surface `(x1 - x3^2)^2 + x2^2 + x3^2 - 1`.
/// Shared by [`biconcave_surface`] and the manufactured load in `ops`.
pub fn biconcave_phi(x: &Point<3>) -> f64 {
    let a = x[0] - x[2] * x[2];
    a * a + x[1] * x[1] + x[2] * x[2] - 1.0
}

/// Gradient of [`biconcave_phi`].
pub fn biconcave_grad(x: &Point<3>) -> Point<3> {
    let a = x[0] - x[2] * x[2];
    Point::<3>::new(2.0 * a, 2.0 * x[1], -4.0 * x[2] * a + 2.0 * x[2])
}

/// Hessian of [`biconcave_phi`].
pub fn biconcave_hess(x: &Point<3>) -> nalgebra::SMatrix<f64, 3, 3> {
    let mut h = nalgebra::SMatrix::<f64, 3, 3>::zeros();
    h[(0, 0)] = 2.0;
    h[(0, 2)] = -4.0 * x[2];
    h[(2, 0)] = -4.0 * x[2];
    h[(1, 1)] = 2.0;
    h[(2, 2)] = -4.0 * x[0] + 12.0 * x[2] * x[2] + 2.0;
    h
}

/// Biconcave implicit surface `(x1 - x3^2)^2 + x2^2 + x3^2 = 1`, a smooth
/// closed genus-zero surface whose unit circle in the `x1 x2` plane lies
/// exactly on it.
pub fn biconcave_surface() -> Shape<3> {
    Shape::LevelSet(LevelSet::new(
        Arc::new(biconcave_phi),
        Arc::new(biconcave_grad),
        Arc::new(biconcave_hess),
    ))
}

/// Unit circle in the `x1 x2` plane; lies exactly on [`biconcave_surface`].
pub fn biconcave_equator() -> Shape<3> {
    Shape::Circle3 {
        center: Point::<3>::zeros(),
        radius: 1.0,
        normal: Point::<3>::new(0.0, 0.0, 1.0),
    }
}

/// Open arc of the unit circle in the `x1 x2` plane from angle `-3pi/4`
/// to `pi/4` (half a turn), measured counterclockwise about `+z`.
pub fn biconcave_equator_arc() -> Shape<3> {
    let start = -3.0 * PI / 4.0;
    Shape::Arc3 {
        center: Point::<3>::zeros(),
        radius: 1.0,
        normal: Point::<3>::new(0.0, 0.0, 1.0),
        ref_dir: Point::<3>::new(start.cos(), start.sin(), 0.0),
        span: PI,
    }
}

/// Quartic implicit surface with tetrahedral symmetry; a closed blobby
/// shape with four rounded lobes, handy as a nontrivial closed test
/// surface.
pub fn lobed_tetrahedron_surface() -> Shape<3> {
    let phi = Arc::new(|x: &Point<3>| {
        let (a, b, c) = (x[0], x[1], x[2]);
        let quartic = |t: f64| {
            let s = t * t - 4.0;
            s * s - 10.0 * t * t
        };
        quartic(a)
            + quartic(b)
            + quartic(c)
            + 3.0 * (a * a * b * b + a * a * c * c + b * b * c * c)
            + 6.0 * a * b * c
            + 22.0
    });
    let grad = Arc::new(|x: &Point<3>| {
        let g = |i: usize, j: usize, k: usize| {
            let (t, u, v) = (x[i], x[j], x[k]);
            4.0 * t * t * t - 36.0 * t + 6.0 * t * (u * u + v * v) + 6.0 * u * v
        };
        Point::<3>::new(g(0, 1, 2), g(1, 0, 2), g(2, 0, 1))
    });
    let hess = Arc::new(|x: &Point<3>| {
        let mut h = nalgebra::SMatrix::<f64, 3, 3>::zeros();
        for i in 0..3 {
            let (j, k) = ((i + 1) % 3, (i + 2) % 3);
            h[(i, i)] = 12.0 * x[i] * x[i] - 36.0 + 6.0 * (x[j] * x[j] + x[k] * x[k]);
        }
        for (i, j, k) in [(0, 1, 2), (0, 2, 1), (1, 2, 0)] {
            let v = 12.0 * x[i] * x[j] + 6.0 * x[k];
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
        h
    });
    Shape::LevelSet(LevelSet::new(phi, grad, hess))
}

/// Closed (a, b) torus knot winding on the torus of major radius `big_r`
/// and minor radius 1: `a` turns around the axis, `b` turns through the
/// hole.
pub fn torus_knot(a: f64, b: f64, big_r: f64) -> Shape<3> {
    let f = Arc::new(move |s: f64| {
        let ring = big_r + (b * s).cos();
        Point::<3>::new(ring * (a * s).cos(), ring * (a * s).sin(), (b * s).sin())
    });
    let df = Arc::new(move |s: f64| {
        let ring = big_r + (b * s).cos();
        let dring = -b * (b * s).sin();
        Point::<3>::new(
            dring * (a * s).cos() - a * ring * (a * s).sin(),
            dring * (a * s).sin() + a * ring * (a * s).cos(),
            b * (b * s).cos(),
        )
    });
    Shape::ParametricCurve(ParametricCurve::with_seeds(
        f,
        df,
        [0.0, 2.0 * PI],
        true,
        2000,
    ))
}

/// Trefoil knot on the torus with major radius 2 and minor radius 1.
pub fn trefoil_knot() -> Shape<3> {
    torus_knot(2.0, 3.0, 2.0)
}

/// The host torus for [`trefoil_knot`].
pub fn trefoil_host_torus() -> Shape<3> {
    torus(2.0, 1.0)
}

/// Flower-shaped closed planar curve with petal counts 3 and 4, offset by
/// `c` along both axes. Used as an interior curve inside a flat region.
pub fn planar_flower(c: f64) -> Shape<2> {
    let curve = planar_flower_curve(c);
    Shape::ParametricCurve(curve)
}

fn planar_flower_curve(c: f64) -> ParametricCurve<2> {
    let (a, b) = (3.0f64, 4.0f64);
    let radius = move |s: f64| {
        (s.cos() * (0.5 * (a + b) + (a * s).sin() + (b * s).sin()) + 0.5 * (a + b)) / (a + b)
    };
    let dradius = move |s: f64| {
        (-s.sin() * (0.5 * (a + b) + (a * s).sin() + (b * s).sin())
            + s.cos() * (a * (a * s).cos() + b * (b * s).cos()))
            / (a + b)
    };
    let f = Arc::new(move |s: f64| {
        let v = radius(s);
        Point::<2>::new(v * s.cos() + c, v * s.sin() + c)
    });
    let df = Arc::new(move |s: f64| {
        let v = radius(s);
        let dv = dradius(s);
        Point::<2>::new(dv * s.cos() - v * s.sin(), dv * s.sin() + v * s.cos())
    });
    ParametricCurve::with_seeds(f, df, [0.0, 2.0 * PI], true, 2000)
}

/// Flat square region `[-1, 1]^2` hosting planar problems; its closest
/// point map is the componentwise clamp.
pub fn flat_square() -> Shape<2> {
    Shape::SolidBox {
        min: Point::<2>::new(-1.0, -1.0),
        max: Point::<2>::new(1.0, 1.0),
    }
}

/// Surface of revolution: the flower curve with offset `+1/2` (kept away
/// from the axis) interpreted in the radius-height plane and revolved
/// around the z axis.
pub fn flower_revolution_surface() -> Shape<3> {
    let planar = planar_flower_curve(0.5);
    let pf = planar.f.clone();
    let pdf = planar.df.clone();
    let f = {
        let pf = pf.clone();
        Arc::new(move |s: f64, t: f64| {
            let p = pf(s);
            Point::<3>::new(p[0] * t.cos(), p[0] * t.sin(), p[1])
        })
    };
    let fu = {
        let pdf = pdf.clone();
        Arc::new(move |s: f64, t: f64| {
            let d = pdf(s);
            Point::<3>::new(d[0] * t.cos(), d[0] * t.sin(), d[1])
        })
    };
    let fv = Arc::new(move |s: f64, t: f64| {
        let p = pf(s);
        Point::<3>::new(-p[0] * t.sin(), p[0] * t.cos(), 0.0)
    });
    Shape::ParametricSurface(ParametricSurface::with_seeds(
        f,
        fu,
        fv,
        [0.0, 2.0 * PI],
        [0.0, 2.0 * PI],
        [true, true],
        700,
    ))
}

/// Triangulated unit sphere: regular icosahedron with `subdivisions`
/// rounds of 4-to-1 refinement, vertices renormalized onto the sphere.
pub fn icosphere(subdivisions: u32) -> TriMesh {
    let phi = (1.0 + 5.0f64.sqrt()) / 2.0;
    let mut vertices: Vec<Point<3>> = [
        [-1.0, phi, 0.0],
        [1.0, phi, 0.0],
        [-1.0, -phi, 0.0],
        [1.0, -phi, 0.0],
        [0.0, -1.0, phi],
        [0.0, 1.0, phi],
        [0.0, -1.0, -phi],
        [0.0, 1.0, -phi],
        [phi, 0.0, -1.0],
        [phi, 0.0, 1.0],
        [-phi, 0.0, -1.0],
        [-phi, 0.0, 1.0],
    ]
    .iter()
    .map(|v| Point::<3>::new(v[0], v[1], v[2]).normalize())
    .collect();
    let mut tris: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut midpoint: std::collections::HashMap<(u32, u32), u32> =
            std::collections::HashMap::new();
        let mut next = Vec::with_capacity(tris.len() * 4);
        for t in &tris {
            let mut mid = [0u32; 3];
            for e in 0..3 {
                let (a, b) = (t[e], t[(e + 1) % 3]);
                let key = (a.min(b), a.max(b));
                mid[e] = *midpoint.entry(key).or_insert_with(|| {
                    let m = ((vertices[a as usize] + vertices[b as usize]) * 0.5).normalize();
                    vertices.push(m);
                    (vertices.len() - 1) as u32
                });
            }
            next.push([t[0], mid[0], mid[2]]);
            next.push([t[1], mid[1], mid[0]]);
            next.push([t[2], mid[2], mid[1]]);
            next.push([mid[0], mid[1], mid[2]]);
        }
        tris = next;
    }
    TriMesh::new(vertices, tris)
}

/// Triangulated band with a half twist: the centerline circle of radius
/// one swept by a ruling that rotates by `u/2`. Nonorientable with a
/// single boundary loop; `nu` columns around, `nv` rows across the width.
pub fn twisted_band_mesh(nu: usize, nv: usize, half_width: f64) -> TriMesh {
    assert!(nu >= 8 && nv >= 2, "band mesh needs a usable resolution");
    let point = |u: f64, v: f64| {
        let r = 1.0 + v * (u / 2.0).cos();
        Point::<3>::new(r * u.cos(), r * u.sin(), v * (u / 2.0).sin())
    };
    let mut vertices = Vec::with_capacity(nu * nv);
    for i in 0..nu {
        let u = 2.0 * PI * i as f64 / nu as f64;
        for j in 0..nv {
            let v = -half_width + 2.0 * half_width * j as f64 / (nv - 1) as f64;
            vertices.push(point(u, v));
        }
    }
    // Column i+1 wraps to column 0 with the width direction reversed, which
    // realizes the half twist in the connectivity.
    let vid = |i: usize, j: usize| -> u32 {
        if i < nu {
            (i * nv + j) as u32
        } else {
            (nv - 1 - j) as u32
        }
    };
    let mut tris = Vec::with_capacity(2 * nu * (nv - 1));
    for i in 0..nu {
        for j in 0..nv - 1 {
            let (a, b, c, d) = (vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1));
            tris.push([a, b, c]);
            tris.push([a, c, d]);
        }
    }
    TriMesh::new(vertices, tris)
}

/// Centerline of [`twisted_band_mesh`] at the same angular resolution:
/// the closed chain through the mesh's width-zero vertex ring, which
/// lies exactly on the faceted band (the smooth unit circle would sit a
/// chord height off it). The natural interior curve for one-sided
/// experiments on the band.
pub fn twisted_band_centerline(nu: usize) -> Shape<3> {
    assert!(nu >= 8, "band centerline needs a usable resolution");
    let points = (0..nu)
        .map(|i| {
            let u = 2.0 * PI * i as f64 / nu as f64;
            Point::<3>::new(u.cos(), u.sin(), 0.0)
        })
        .collect();
    Shape::Polyline(Polyline::new(points, true))
}

/// Union of a torus, a sphere, and two line segments: one connected scene
/// mixing surface parts of different codimension, for end-to-end demos.
pub fn mixed_codimension_scene() -> Shape<3> {
    let sphere_center = Point::<3>::new(0.0, 0.0, 2.75);
    Shape::Composite(vec![
        torus(3.0, 1.0),
        Shape::Sphere {
            center: sphere_center,
            radius: 1.25,
        },
        Shape::Segment {
            a: Point::<3>::new(3.0, 0.0, 1.0),
            b: Point::<3>::new(1.1, 0.0, 2.2),
        },
        Shape::Segment {
            a: Point::<3>::new(-3.0, 0.0, 1.0),
            b: Point::<3>::new(-1.1, 0.0, 2.2),
        },
    ])
}
