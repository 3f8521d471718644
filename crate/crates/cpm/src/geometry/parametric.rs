//! Closest points on parametric curves and surfaces.
//!
//! Queries minimize `1/2 |f(t) - x|^2` by damped Newton from the nearest
//! member of a precomputed seed cloud (equispaced in parameter space). The
//! seed cloud bounds basin-of-attraction failures: a local descent started
//! at the nearest sample of a dense enough cloud lands in the global basin
//! for any query closer to the curve than the curve's feature size.

use super::CpQuery;
use crate::error::GeomError;
use crate::tol;
use crate::Point;
use std::collections::HashMap;
use std::sync::Arc;

/// Default seed count per parameter dimension.
pub const DEFAULT_SEEDS: usize = 1000;

/// Uniform hash grid over seed positions for exact nearest-seed lookup.
#[derive(Clone, Debug)]
struct SeedIndex<const D: usize> {
    cell: f64,
    origin: Point<D>,
    map: HashMap<[i64; D], Vec<u32>>,
}

impl<const D: usize> SeedIndex<D> {
    fn build(points: &[Point<D>]) -> Self {
        let mut lo = points[0];
        let mut hi = points[0];
        for p in points {
            for a in 0..D {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        // Aim for a few seeds per cell; a degenerate (single-point) cloud
        // still gets a positive cell size.
        let extent = (0..D).map(|a| hi[a] - lo[a]).fold(0.0f64, f64::max);
        let cell = (extent / (points.len() as f64).powf(1.0 / D as f64)).max(1e-12);
        let mut map: HashMap<[i64; D], Vec<u32>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            map.entry(Self::key(&lo, cell, p)).or_default().push(i as u32);
        }
        SeedIndex {
            cell,
            origin: lo,
            map,
        }
    }

    fn key(origin: &Point<D>, cell: f64, p: &Point<D>) -> [i64; D] {
        let mut k = [0i64; D];
        for a in 0..D {
            k[a] = ((p[a] - origin[a]) / cell).floor() as i64;
        }
        k
    }

    /// Exact nearest seed: expanding Chebyshev rings around the query cell;
    /// a ring at offset r only holds points at Euclidean distance of at
    /// least (r-1) * cell, so the scan stops once the best found beats
    /// that lower bound.
    fn nearest(&self, points: &[Point<D>], x: &Point<D>) -> usize {
        let base = Self::key(&self.origin, self.cell, x);
        let mut best = usize::MAX;
        let mut best_d = f64::INFINITY;
        let mut r: i64 = 0;
        loop {
            for key in ring::<D>(base, r) {
                if let Some(ids) = self.map.get(&key) {
                    for &i in ids {
                        let d = (x - points[i as usize]).norm();
                        if d < best_d {
                            best_d = d;
                            best = i as usize;
                        }
                    }
                }
            }
            // Points in rings beyond r sit at distance >= r * cell from the
            // query, so the scan is complete once the best beats that bound.
            if best < usize::MAX && best_d <= r as f64 * self.cell {
                break;
            }
            r += 1;
            if r > 2_000_000 {
                break;
            }
        }
        best
    }
}

/// All lattice keys at Chebyshev distance exactly `r` from `base`.
fn ring<const D: usize>(base: [i64; D], r: i64) -> Vec<[i64; D]> {
    let mut out = Vec::new();
    let mut ofs = [0i64; D];
    fn rec<const D: usize>(
        base: &[i64; D],
        r: i64,
        axis: usize,
        ofs: &mut [i64; D],
        out: &mut Vec<[i64; D]>,
    ) {
        if axis == D {
            if ofs.iter().map(|o| o.abs()).max().unwrap_or(0) == r {
                let mut key = *base;
                for a in 0..D {
                    key[a] += ofs[a];
                }
                out.push(key);
            }
            return;
        }
        for o in -r..=r {
            ofs[axis] = o;
            rec(base, r, axis + 1, ofs, out);
        }
    }
    rec(&base, r, 0, &mut ofs, &mut out);
    out
}

// ---------------------------------------------------------------------------
// One-parameter curves
// ---------------------------------------------------------------------------

#[derive(Clone)]
pub struct ParametricCurve<const D: usize> {
    pub f: Arc<dyn Fn(f64) -> Point<D> + Send + Sync>,
    pub df: Arc<dyn Fn(f64) -> Point<D> + Send + Sync>,
    pub t_range: [f64; 2],
    pub periodic: bool,
    seed_params: Vec<f64>,
    seed_points: Vec<Point<D>>,
    index: SeedIndex<D>,
}

impl<const D: usize> ParametricCurve<D> {
    pub fn new(
        f: Arc<dyn Fn(f64) -> Point<D> + Send + Sync>,
        df: Arc<dyn Fn(f64) -> Point<D> + Send + Sync>,
        t_range: [f64; 2],
        periodic: bool,
    ) -> Self {
        Self::with_seeds(f, df, t_range, periodic, DEFAULT_SEEDS)
    }

    pub fn with_seeds(
        f: Arc<dyn Fn(f64) -> Point<D> + Send + Sync>,
        df: Arc<dyn Fn(f64) -> Point<D> + Send + Sync>,
        t_range: [f64; 2],
        periodic: bool,
        n: usize,
    ) -> Self {
        let [t0, t1] = t_range;
        let n = n.max(2);
        let mut seed_params = Vec::with_capacity(n);
        if periodic {
            // Skip the duplicate endpoint.
            for i in 0..n {
                seed_params.push(t0 + (t1 - t0) * i as f64 / n as f64);
            }
        } else {
            for i in 0..n {
                seed_params.push(t0 + (t1 - t0) * i as f64 / (n - 1) as f64);
            }
        }
        let seed_points: Vec<Point<D>> = seed_params.iter().map(|&t| f(t)).collect();
        let index = SeedIndex::build(&seed_points);
        ParametricCurve {
            f,
            df,
            t_range,
            periodic,
            seed_params,
            seed_points,
            index,
        }
    }

    pub fn validate(&self) -> Result<(), GeomError> {
        if self.t_range[0] >= self.t_range[1] {
            return Err(GeomError::InvalidShape(
                "parametric range must be nonempty".into(),
            ));
        }
        Ok(())
    }

    fn wrap(&self, t: f64) -> f64 {
        let [t0, t1] = self.t_range;
        if self.periodic {
            let w = t1 - t0;
            let mut s = (t - t0) % w;
            if s < 0.0 {
                s += w;
            }
            t0 + s
        } else {
            t.clamp(t0, t1)
        }
    }

    pub fn cp(&self, x: &Point<D>) -> Result<CpQuery<D>, GeomError> {
        let seed = self.index.nearest(&self.seed_points, x);
        let mut t = self.seed_params[seed];
        let [t0, t1] = self.t_range;
        let width = t1 - t0;
        // Second derivative by central difference of the analytic first
        // derivative; only scales the Newton step, so modest accuracy is fine.
        let h = width * 1e-6;
        let energy = |t: f64| ((self.f)(t) - x).norm_squared() * 0.5;
        let mut converged = false;
        for _ in 0..tol::CP_PARAMETRIC_MAX_ITERS {
            let p = (self.f)(t);
            let dp = (self.df)(t);
            let r = p - x;
            let g = r.dot(&dp);
            // Boundary stationarity for open curves: clamped and pushing out.
            if !self.periodic
                && ((t <= t0 && g >= 0.0) || (t >= t1 && g <= 0.0))
            {
                converged = true;
                break;
            }
            let ddp = ((self.df)(t + h) - (self.df)(t - h)) / (2.0 * h);
            let curv = dp.norm_squared() + r.dot(&ddp);
            let step = if curv > 1e-300 {
                let newton = -g / curv;
                // A vanishing Newton step at positive curvature is a local
                // minimum; stop before the line search can dither around it.
                if newton.abs() < tol::CP_ITER {
                    converged = true;
                    break;
                }
                newton
            } else {
                // At a maximum or saddle, nudge downhill by one seed spacing
                // and let the backtracking sort out the scale.
                -g.signum() * width / self.seed_params.len() as f64
            };
            // Backtrack until the energy stops increasing.
            let e0 = energy(t);
            let mut taken = step;
            let mut t_new = self.wrap(t + taken);
            let mut halvings = 0;
            while energy(t_new) > e0 && halvings < 40 {
                taken *= 0.5;
                t_new = self.wrap(t + taken);
                halvings += 1;
            }
            // Measure the step modulo the period so seam crossings count as
            // the short way around.
            let mut moved = (t_new - t).abs();
            if self.periodic {
                moved = moved.min(width - moved);
            }
            t = t_new;
            if moved < tol::CP_ITER {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(GeomError::NoConvergence {
                point: x.as_slice().to_vec(),
                context: "parametric curve projection hit its iteration cap".into(),
            });
        }
        let cp = (self.f)(t);
        let at_end = !self.periodic && (t <= t0 + 1e-14 || t >= t1 - 1e-14);
        Ok(CpQuery::new(cp, (x - cp).norm()).boundary(at_end))
    }

    pub fn cp_boundary(&self, x: &Point<D>) -> Result<CpQuery<D>, GeomError> {
        if self.periodic {
            return Err(GeomError::InvalidShape(
                "periodic curve has no boundary".into(),
            ));
        }
        let ends = [(self.f)(self.t_range[0]), (self.f)(self.t_range[1])];
        super::analytic::cp_points(&ends, x)
    }
}

// ---------------------------------------------------------------------------
// Two-parameter surfaces (R^3 only)
// ---------------------------------------------------------------------------

#[derive(Clone)]
pub struct ParametricSurface {
    pub f: Arc<dyn Fn(f64, f64) -> Point<3> + Send + Sync>,
    pub fu: Arc<dyn Fn(f64, f64) -> Point<3> + Send + Sync>,
    pub fv: Arc<dyn Fn(f64, f64) -> Point<3> + Send + Sync>,
    pub u_range: [f64; 2],
    pub v_range: [f64; 2],
    pub periodic: [bool; 2],
    seed_params: Vec<[f64; 2]>,
    seed_points: Vec<Point<3>>,
    index: SeedIndex<3>,
}

impl ParametricSurface {
    #[allow(clippy::too_many_arguments)]
    pub fn with_seeds(
        f: Arc<dyn Fn(f64, f64) -> Point<3> + Send + Sync>,
        fu: Arc<dyn Fn(f64, f64) -> Point<3> + Send + Sync>,
        fv: Arc<dyn Fn(f64, f64) -> Point<3> + Send + Sync>,
        u_range: [f64; 2],
        v_range: [f64; 2],
        periodic: [bool; 2],
        n_per_dim: usize,
    ) -> Self {
        let n = n_per_dim.max(2);
        let axis = |range: [f64; 2], per: bool| -> Vec<f64> {
            (0..n)
                .map(|i| {
                    if per {
                        range[0] + (range[1] - range[0]) * i as f64 / n as f64
                    } else {
                        range[0] + (range[1] - range[0]) * i as f64 / (n - 1) as f64
                    }
                })
                .collect()
        };
        let us = axis(u_range, periodic[0]);
        let vs = axis(v_range, periodic[1]);
        let mut seed_params = Vec::with_capacity(n * n);
        let mut seed_points = Vec::with_capacity(n * n);
        for &u in &us {
            for &v in &vs {
                seed_params.push([u, v]);
                seed_points.push(f(u, v));
            }
        }
        let index = SeedIndex::build(&seed_points);
        ParametricSurface {
            f,
            fu,
            fv,
            u_range,
            v_range,
            periodic,
            seed_params,
            seed_points,
            index,
        }
    }

    pub fn has_boundary(&self) -> bool {
        !self.periodic[0] || !self.periodic[1]
    }

    pub fn validate(&self) -> Result<(), GeomError> {
        if !(self.u_range[0] < self.u_range[1] && self.v_range[0] < self.v_range[1]) {
            return Err(GeomError::InvalidShape(
                "parametric ranges must be nonempty".into(),
            ));
        }
        Ok(())
    }

    fn wrap_axis(t: f64, range: [f64; 2], periodic: bool) -> f64 {
        if periodic {
            let w = range[1] - range[0];
            let mut s = (t - range[0]) % w;
            if s < 0.0 {
                s += w;
            }
            range[0] + s
        } else {
            t.clamp(range[0], range[1])
        }
    }

    pub fn cp(&self, x: &Point<3>) -> Result<CpQuery<3>, GeomError> {
        let seed = self.index.nearest(&self.seed_points, x);
        let [mut u, mut v] = self.seed_params[seed];
        let hu = (self.u_range[1] - self.u_range[0]) * 1e-6;
        let hv = (self.v_range[1] - self.v_range[0]) * 1e-6;
        let energy = |u: f64, v: f64| ((self.f)(u, v) - x).norm_squared() * 0.5;
        let mut converged = false;
        for _ in 0..tol::CP_PARAMETRIC_MAX_ITERS {
            let r = (self.f)(u, v) - x;
            let ju = (self.fu)(u, v);
            let jv = (self.fv)(u, v);
            let g = [r.dot(&ju), r.dot(&jv)];
            // Second derivatives by differencing the analytic Jacobian.
            let fuu = ((self.fu)(u + hu, v) - (self.fu)(u - hu, v)) / (2.0 * hu);
            let fvv = ((self.fv)(u, v + hv) - (self.fv)(u, v - hv)) / (2.0 * hv);
            let fuv = ((self.fu)(u, v + hv) - (self.fu)(u, v - hv)) / (2.0 * hv);
            let mut hmat = [
                ju.norm_squared() + r.dot(&fuu),
                ju.dot(&jv) + r.dot(&fuv),
                ju.dot(&jv) + r.dot(&fuv),
                jv.norm_squared() + r.dot(&fvv),
            ];
            let mut step = [-g[0], -g[1]];
            let cond = crate::math::solve_dense(2, &mut hmat, &mut step);
            if !cond.is_finite() || cond > 1e15 {
                // Gauss-Newton fallback without curvature terms.
                let mut jj = [
                    ju.norm_squared(),
                    ju.dot(&jv),
                    ju.dot(&jv),
                    jv.norm_squared(),
                ];
                step = [-g[0], -g[1]];
                crate::math::solve_dense(2, &mut jj, &mut step);
            }
            // A vanishing Newton step is a stationary point; stop before the
            // line search can dither around it.
            if (step[0] * step[0] + step[1] * step[1]).sqrt() < tol::CP_ITER {
                converged = true;
                break;
            }
            let e0 = energy(u, v);
            let mut s = 1.0;
            let mut u_new;
            let mut v_new;
            let mut halvings = 0;
            loop {
                u_new = Self::wrap_axis(u + s * step[0], self.u_range, self.periodic[0]);
                v_new = Self::wrap_axis(v + s * step[1], self.v_range, self.periodic[1]);
                if energy(u_new, v_new) <= e0 || halvings >= 40 {
                    break;
                }
                s *= 0.5;
                halvings += 1;
            }
            let axis_dist = |a: f64, b: f64, range: [f64; 2], per: bool| {
                let d = (a - b).abs();
                if per {
                    d.min((range[1] - range[0]) - d)
                } else {
                    d
                }
            };
            let du = axis_dist(u_new, u, self.u_range, self.periodic[0]);
            let dv = axis_dist(v_new, v, self.v_range, self.periodic[1]);
            let moved = (du * du + dv * dv).sqrt();
            u = u_new;
            v = v_new;
            if moved < tol::CP_ITER {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(GeomError::NoConvergence {
                point: x.as_slice().to_vec(),
                context: "parametric surface projection hit its iteration cap".into(),
            });
        }
        let cp = (self.f)(u, v);
        let on_edge = (!self.periodic[0]
            && (u <= self.u_range[0] + 1e-14 || u >= self.u_range[1] - 1e-14))
            || (!self.periodic[1]
                && (v <= self.v_range[0] + 1e-14 || v >= self.v_range[1] - 1e-14));
        Ok(CpQuery::new(cp, (x - cp).norm()).boundary(on_edge))
    }

    pub fn cp_boundary(&self, _x: &Point<3>) -> Result<CpQuery<3>, GeomError> {
        // Open parametric surfaces are not used as host surfaces in any
        // shipped driver; meshes cover that case with exact boundary loops.
        Err(GeomError::InvalidShape(
            "boundary queries on parametric surfaces are not supported; use a mesh".into(),
        ))
    }
}
