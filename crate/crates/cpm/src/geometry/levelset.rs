//! Closest points on implicit surfaces `{x : phi(x) = 0}`.
//!
//! Three stages. Damped gradient flow walks the query onto the zero set,
//! then a constrained Newton iteration on the Lagrangian of
//! `min 1/2 |cp - x|^2 subject to phi(cp) = 0` polishes the foot point.
//! Newton fails when the query sits near a fold of the normal bundle (the
//! matrix `I + lambda H` turns singular there), so a projected-descent
//! fallback minimizes the distance along the surface itself; it is slower
//! but first order, hence fold points cannot blow it up. Feet found by the
//! fallback can carry a tangential error up to `CP_DESCENT_STALL` relative
//! to the query distance; the distance itself stays accurate because it is
//! stationary with respect to tangential perturbations.

use super::{CpQuery, MatrixFn, ScalarFn, VectorFn};
use crate::error::GeomError;
use crate::math::solve_dense;
use crate::tol;
use crate::Point;

/// Iteration budget for one retraction back onto the zero set. Retraction
/// starts near the surface, so the damped flow needs only a few steps.
const RETRACT_ITERS: usize = 30;

#[derive(Clone)]
pub struct LevelSet<const D: usize> {
    pub phi: ScalarFn<D>,
    pub grad: VectorFn<D>,
    pub hess: MatrixFn<D>,
}

impl<const D: usize> LevelSet<D> {
    pub fn new(phi: ScalarFn<D>, grad: VectorFn<D>, hess: MatrixFn<D>) -> Self {
        LevelSet { phi, grad, hess }
    }

    pub fn cp(&self, x: &Point<D>) -> Result<CpQuery<D>, GeomError> {
        let fail = |context: &str| GeomError::NoConvergence {
            point: x.as_slice().to_vec(),
            context: context.into(),
        };

        // Stage 1: gradient flow onto the zero set.
        let flowed = self
            .flow_to_surface(*x, tol::CP_LEVELSET_MAX_ITERS)
            .map_err(&fail)?;

        // Stage 2: constrained Newton, the fast path away from folds.
        if let Some(cp) = self.kkt_newton(x, flowed) {
            return Ok(CpQuery::new(cp, (x - cp).norm()));
        }

        // Stage 3: projected descent along the surface.
        let cp = self.projected_descent(x, flowed).map_err(fail)?;
        Ok(CpQuery::new(cp, (x - cp).norm()))
    }

    /// Damped gradient flow `y <- y - phi grad/|grad|^2` until the step
    /// drops below the iteration tolerance. Each full step is the Newton
    /// step for the 1-D problem along the gradient ray; backtracking on
    /// `|phi|` stops deep-interior queries from overshooting far past the
    /// surface.
    fn flow_to_surface(
        &self,
        start: Point<D>,
        max_iters: usize,
    ) -> Result<Point<D>, &'static str> {
        let mut y = start;
        for _ in 0..max_iters {
            let p = (self.phi)(&y);
            let g = (self.grad)(&y);
            let g2 = g.norm_squared();
            if g2 <= 1e-300 {
                return Err("vanishing gradient during projection");
            }
            let full = g * (p / g2);
            if full.norm() < tol::CP_ITER {
                return Ok(y);
            }
            let mut scale = 1.0;
            let mut advanced = false;
            for _ in 0..40 {
                let cand = y - full * scale;
                if (self.phi)(&cand).abs() < p.abs() {
                    y = cand;
                    advanced = true;
                    break;
                }
                scale *= 0.5;
            }
            if !advanced {
                return Err("projection stage stalled");
            }
        }
        Err("projection stage hit its iteration cap")
    }

    /// Newton on `F(cp, lambda) = [cp - x + lambda grad; phi]`, damped by
    /// backtracking on `|F|^2`. Returns `None` when the iteration cannot
    /// make progress (singular KKT matrix or a stalled line search); the
    /// caller then falls back to projected descent.
    fn kkt_newton(&self, x: &Point<D>, start: Point<D>) -> Option<Point<D>> {
        let mut cp = start;
        let g0 = (self.grad)(&cp);
        let mut lambda = (x - cp).dot(&g0) / g0.norm_squared();
        let n = D + 1;
        let mut jac = vec![0.0; n * n];
        let mut rhs = vec![0.0; n];
        let merit = |cp: &Point<D>, lambda: f64| -> f64 {
            let p = (self.phi)(cp);
            let g = (self.grad)(cp);
            let mut m = p * p;
            for i in 0..D {
                let fi = cp[i] - x[i] + lambda * g[i];
                m += fi * fi;
            }
            m
        };
        let mut stalled_rounds = 0u32;
        for _ in 0..tol::CP_LEVELSET_MAX_ITERS {
            let p = (self.phi)(&cp);
            let g = (self.grad)(&cp);
            let h = (self.hess)(&cp);
            for i in 0..D {
                for j in 0..D {
                    jac[i * n + j] = lambda * h[(i, j)] + if i == j { 1.0 } else { 0.0 };
                }
                jac[i * n + D] = g[i];
                jac[D * n + i] = g[i];
                rhs[i] = -(cp[i] - x[i] + lambda * g[i]);
            }
            jac[D * n + D] = 0.0;
            rhs[D] = -p;
            let cond = solve_dense(n, &mut jac, &mut rhs);
            if !cond.is_finite() || cond > tol::CP_SINGULAR_COND {
                return None;
            }
            let full_step: f64 = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
            let m0 = merit(&cp, lambda);
            let mut scale = 1.0;
            for _ in 0..30 {
                let mut cand = cp;
                for i in 0..D {
                    cand[i] += scale * rhs[i];
                }
                let cand_l = lambda + scale * rhs[D];
                if merit(&cand, cand_l) <= m0 {
                    break;
                }
                scale *= 0.5;
            }
            for i in 0..D {
                cp[i] += scale * rhs[i];
            }
            lambda += scale * rhs[D];
            // Near a solution the damping is inactive and the undamped step
            // collapses quadratically; repeated microscopic line-search
            // scales mean the iterate is pinned at a fold, so hand over to
            // the fallback instead of burning the whole budget.
            if full_step < tol::CP_ITER {
                return Some(cp);
            }
            if scale < 1e-6 {
                stalled_rounds += 1;
                if stalled_rounds >= 8 {
                    return None;
                }
            } else {
                stalled_rounds = 0;
            }
        }
        None
    }

    /// Minimizes `1/2 |y - x|^2` over the zero set by walking against the
    /// tangential component of `y - x` and retracting back onto the surface
    /// after each step. Stops when the tangential residual drops below the
    /// iteration tolerance. When the squared distance can no longer be
    /// resolved in f64 the iterate is accepted if the residual is small
    /// relative to the query distance.
    fn projected_descent(
        &self,
        x: &Point<D>,
        start: Point<D>,
    ) -> Result<Point<D>, &'static str> {
        let mut y = start;
        for _ in 0..tol::CP_DESCENT_MAX_ITERS {
            let g = (self.grad)(&y);
            let g2 = g.norm_squared();
            if g2 <= 1e-300 {
                return Err("vanishing gradient during projected descent");
            }
            let r = y - x;
            let t = r - g * (r.dot(&g) / g2);
            let tn = t.norm();
            if tn < tol::CP_ITER {
                return Ok(y);
            }
            let d0 = r.norm_squared();
            let mut scale = 1.0;
            let mut advanced = false;
            for _ in 0..40 {
                if let Ok(cand) = self.flow_to_surface(y - t * scale, RETRACT_ITERS) {
                    if (cand - x).norm_squared() < d0 {
                        y = cand;
                        advanced = true;
                        break;
                    }
                }
                scale *= 0.5;
            }
            if !advanced {
                return if tn <= tol::CP_DESCENT_STALL * (1.0 + r.norm()) {
                    Ok(y)
                } else {
                    Err("projected descent stalled")
                };
            }
        }
        Err("projected descent hit its iteration cap")
    }
}
