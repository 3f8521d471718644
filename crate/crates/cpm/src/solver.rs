//! Linear solvers for closest point systems.
//!
//! The system matrix is never formed for the iterative path. A closest
//! point system couples a pointwise part, a finite-difference part, and
//! the extension operator as
//!
//! ```text
//! A = m I + n [ diag(L) + (L - diag(L)) E ]
//! ```
//!
//! so `A u` costs one extension apply plus one difference apply. BiCGSTAB
//! with a diagonal or damped-Jacobi preconditioner handles large tubes;
//! a sparse LU direct path covers small systems and the stiff regimes
//! where BiCGSTAB is known to stagnate.

use crate::error::SolverError;
use crate::ops::SparseOperator;
use crate::tol;
use faer::prelude::Solve;
use faer::sparse::{SparseColMat, Triplet};
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::time::Instant;

/// One linear system in stabilized closest point form. `m` selects the
/// pointwise identity part (0 for steady problems, 1 for time steps), `n`
/// scales the difference part (1, or minus a time-step fraction), and
/// `rhs` is the fully folded right-hand side: any affine extension data
/// must already be shifted into it (see [`OperatorSpec::with_affine`]).
#[derive(Clone, Debug)]
pub struct OperatorSpec {
    pub m: f64,
    pub n: f64,
    pub ext: SparseOperator,
    pub lap: SparseOperator,
    pub rhs: Vec<f64>,
}

impl OperatorSpec {
    pub fn new(
        m: f64,
        n: f64,
        ext: SparseOperator,
        lap: SparseOperator,
        rhs: Vec<f64>,
    ) -> Result<OperatorSpec, SolverError> {
        let spec = OperatorSpec {
            m,
            n,
            ext,
            lap,
            rhs,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Builds the spec for extension rows with an affine part `e`, where
    /// ghost references read `E u + e` instead of `E u`. The affine part
    /// only enters through off-diagonal difference references, so it
    /// folds into the right-hand side as `rhs = f - n (L - diag L) e`.
    pub fn with_affine(
        m: f64,
        n: f64,
        ext: SparseOperator,
        lap: SparseOperator,
        f: &[f64],
        affine: &[f64],
    ) -> Result<OperatorSpec, SolverError> {
        if f.len() != affine.len() {
            return Err(SolverError::DimensionMismatch(format!(
                "rhs has {} entries but affine part has {}",
                f.len(),
                affine.len()
            )));
        }
        let shift = offdiag_apply(&lap, affine);
        let rhs = f
            .iter()
            .zip(&shift)
            .map(|(&fi, &si)| fi - n * si)
            .collect();
        OperatorSpec::new(m, n, ext, lap, rhs)
    }

    pub fn n_dofs(&self) -> usize {
        self.rhs.len()
    }

    /// Dimension agreement across both operators and the right-hand side.
    pub fn validate(&self) -> Result<(), SolverError> {
        let n = self.rhs.len();
        for (name, rows, cols) in [
            ("extension", self.ext.n_rows(), self.ext.n_cols),
            ("difference", self.lap.n_rows(), self.lap.n_cols),
        ] {
            if rows != n || cols != n {
                return Err(SolverError::DimensionMismatch(format!(
                    "{name} operator is {rows}x{cols} for {n} unknowns"
                )));
            }
        }
        Ok(())
    }

    /// Closes DOFs with empty difference rows (tube-edge cells and any
    /// band twins whose references were all dropped) with the tie row
    /// `L_ii = (1 - m)/n`, which makes their assembled equation
    /// `u_i = rhs_i` with no couplings. Nothing reads a tied cell's raw
    /// value during the solve (extension stencils never reference them),
    /// and the post-solve extension refresh assigns their real values;
    /// the tied right-hand side entries are zeroed as placeholders.
    /// Returns the tied DOF ids.
    pub fn tie_empty_rows(&mut self) -> Result<Vec<u32>, SolverError> {
        let mut tied = Vec::new();
        for i in 0..self.lap.n_rows() {
            if self.lap.rows[i].is_empty() {
                tied.push(i as u32);
            }
        }
        if tied.is_empty() {
            return Ok(tied);
        }
        if self.n == 0.0 {
            if self.m == 0.0 {
                return Err(SolverError::DimensionMismatch(
                    "empty difference rows cannot be tied with m = n = 0".into(),
                ));
            }
            // A = m I already pins these DOFs pointwise.
            for &i in &tied {
                self.rhs[i as usize] = 0.0;
            }
            return Ok(tied);
        }
        let value = (1.0 - self.m) / self.n;
        for &i in &tied {
            self.lap.rows[i as usize] = vec![(i, value)];
            self.rhs[i as usize] = 0.0;
        }
        Ok(tied)
    }

    /// Pins DOFs to prescribed values: the difference row becomes a tie
    /// row, the extension row becomes the identity (so other stencils
    /// that reference a pinned cell read the pinned value), and the
    /// right-hand side carries the value. Used by the first-order
    /// baseline boundary treatments.
    pub fn pin_dofs(&mut self, dofs: &[u32], values: &[f64]) -> Result<(), SolverError> {
        if dofs.len() != values.len() {
            return Err(SolverError::DimensionMismatch(format!(
                "{} pinned DOFs with {} values",
                dofs.len(),
                values.len()
            )));
        }
        if self.n == 0.0 && self.m == 0.0 {
            return Err(SolverError::DimensionMismatch(
                "cannot pin DOFs with m = n = 0".into(),
            ));
        }
        let n_dofs = self.n_dofs();
        for (&i, &v) in dofs.iter().zip(values) {
            if i as usize >= n_dofs {
                return Err(SolverError::DimensionMismatch(format!(
                    "pinned DOF {i} out of range {n_dofs}"
                )));
            }
            if self.n != 0.0 {
                // Tie row: assembled diagonal m + n (1-m)/n = 1.
                self.lap.rows[i as usize] = vec![(i, (1.0 - self.m) / self.n)];
                self.rhs[i as usize] = v;
            } else {
                // Pure pointwise system: the assembled diagonal is m.
                self.lap.rows[i as usize].clear();
                self.rhs[i as usize] = self.m * v;
            }
            self.ext.rows[i as usize] = vec![(i, 1.0)];
        }
        Ok(())
    }
}

/// Off-diagonal difference apply `(L - diag L) w`.
fn offdiag_apply(lap: &SparseOperator, w: &[f64]) -> Vec<f64> {
    lap.rows
        .par_iter()
        .enumerate()
        .map(|(i, row)| {
            row.iter()
                .filter(|&&(j, _)| j as usize != i)
                .map(|&(j, l)| l * w[j as usize])
                .sum()
        })
        .collect()
}

/// Matrix-free product `A u` in four steps: extend, difference the
/// extended field off-diagonally, difference the raw field on the
/// diagonal, and combine. The matrix is never assembled.
pub fn apply_a(spec: &OperatorSpec, u: &[f64]) -> Result<Vec<f64>, SolverError> {
    if u.len() != spec.n_dofs() {
        return Err(SolverError::DimensionMismatch(format!(
            "operand has {} entries for {} unknowns",
            u.len(),
            spec.n_dofs()
        )));
    }
    let ghost = spec
        .ext
        .apply(u)
        .map_err(|e| SolverError::DimensionMismatch(e.to_string()))?;
    let off = offdiag_apply(&spec.lap, &ghost);
    let diag = spec.lap.diagonal();
    let (m, n) = (spec.m, spec.n);
    Ok((0..u.len())
        .into_par_iter()
        .map(|i| m * u[i] + n * (diag[i] * u[i]) + n * off[i])
        .collect())
}

/// Extension refresh `u <- E u + e`: every solve ends by reading each
/// cell's value back through the (possibly rewired) extension, which
/// assigns tied cells their interpolated values and reimposes boundary
/// data on band twins.
pub fn refresh_extension(
    ext: &SparseOperator,
    affine: &[f64],
    u: &[f64],
) -> Result<Vec<f64>, SolverError> {
    if affine.len() != u.len() {
        return Err(SolverError::DimensionMismatch(format!(
            "affine part has {} entries for {} unknowns",
            affine.len(),
            u.len()
        )));
    }
    let mut out = ext
        .apply(u)
        .map_err(|e| SolverError::DimensionMismatch(e.to_string()))?;
    for (o, &e) in out.iter_mut().zip(affine) {
        *o += e;
    }
    Ok(out)
}

/// Preconditioner choice for [`bicgstab`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PrecondMode {
    /// No preconditioning (useful as a measurement baseline).
    Identity,
    /// Diagonal scaling by `m + n L_ii`.
    Diagonal,
    /// Fixed damped-Jacobi sweeps `z <- z + omega D^{-1} (r - A z)` with
    /// `omega = 2/3` and `D = diag(A) = m + n L_ii`.
    DampedJacobi { sweeps: usize },
}

impl PrecondMode {
    /// Damped Jacobi at the default sweep count.
    pub fn damped_jacobi() -> PrecondMode {
        PrecondMode::DampedJacobi {
            sweeps: tol::JACOBI_SWEEPS,
        }
    }
}

/// A realized preconditioner; apply with [`Preconditioner::apply`].
#[derive(Clone, Debug)]
pub enum Preconditioner {
    Identity,
    Diagonal { inv_diag: Vec<f64> },
    DampedJacobi { inv_diag: Vec<f64>, sweeps: usize },
}

/// Builds the preconditioner for a spec. The diagonal of `A` is exactly
/// `m + n L_ii` because extension rows only feed off-diagonal
/// difference references.
pub fn make_preconditioner(
    spec: &OperatorSpec,
    mode: PrecondMode,
) -> Result<Preconditioner, SolverError> {
    if matches!(mode, PrecondMode::Identity) {
        return Ok(Preconditioner::Identity);
    }
    let diag = spec.lap.diagonal();
    let mut inv_diag = Vec::with_capacity(diag.len());
    for (i, &l) in diag.iter().enumerate() {
        let d = spec.m + spec.n * l;
        if d == 0.0 {
            return Err(SolverError::ZeroDiagonal { dof: i });
        }
        inv_diag.push(1.0 / d);
    }
    Ok(match mode {
        PrecondMode::Identity => unreachable!(),
        PrecondMode::Diagonal => Preconditioner::Diagonal { inv_diag },
        PrecondMode::DampedJacobi { sweeps } => Preconditioner::DampedJacobi { inv_diag, sweeps },
    })
}

impl Preconditioner {
    /// Approximate solve `z with M z = r`.
    pub fn apply(&self, spec: &OperatorSpec, r: &[f64]) -> Result<Vec<f64>, SolverError> {
        match self {
            Preconditioner::Identity => Ok(r.to_vec()),
            Preconditioner::Diagonal { inv_diag } => Ok(r
                .iter()
                .zip(inv_diag)
                .map(|(&ri, &di)| ri * di)
                .collect()),
            Preconditioner::DampedJacobi { inv_diag, sweeps } => {
                let mut z = vec![0.0; r.len()];
                for _ in 0..*sweeps {
                    let az = apply_a(spec, &z)?;
                    for i in 0..z.len() {
                        z[i] += tol::JACOBI_OMEGA * inv_diag[i] * (r[i] - az[i]);
                    }
                }
                Ok(z)
            }
        }
    }
}

/// Outcome bookkeeping for one linear solve.
#[derive(Clone, Copy, Debug)]
pub struct SolveStats {
    pub iterations: usize,
    /// True relative residual `|f - A u| / |f|`, recomputed from the
    /// returned iterate rather than the recurrence.
    pub residual: f64,
    pub converged: bool,
    pub seconds: f64,
}

/// Sequential dot product. Reductions are deliberately not parallel so
/// results are bitwise identical for any thread count; the cost is
/// negligible next to the matrix applications.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Preconditioned BiCGSTAB on the matrix-free system. Converges when the
/// recurrence residual satisfies `|r| <= tol |f|`; breakdown of the
/// recurrence scalars below [`tol::BICGSTAB_BREAKDOWN`] triggers one
/// restart from the current iterate, and a second breakdown is an error.
/// Hitting `max_iter` is not an error: the iterate is returned with
/// `converged = false` (see [`solve_converged`] for the strict variant).
pub fn bicgstab(
    spec: &OperatorSpec,
    precond: &Preconditioner,
    rtol: f64,
    max_iter: Option<usize>,
) -> Result<(Vec<f64>, SolveStats), SolverError> {
    let start = Instant::now();
    spec.validate()?;
    let n = spec.n_dofs();
    let max_iter = max_iter.unwrap_or(10 * n.max(1));
    let b = &spec.rhs;
    let b_norm = norm(b);
    if b_norm == 0.0 {
        return Ok((
            vec![0.0; n],
            SolveStats {
                iterations: 0,
                residual: 0.0,
                converged: true,
                seconds: start.elapsed().as_secs_f64(),
            },
        ));
    }
    let target = rtol * b_norm;

    let mut x = vec![0.0; n];
    let mut r = b.clone();
    let mut r0 = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0f64, 1.0f64, 1.0f64);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut iterations = 0;
    let mut restarts = 0;

    // Breakdown recovery: refresh the residual from the current iterate
    // and restart the recurrence. Allowed once per solve.
    macro_rules! restart {
        () => {{
            if restarts >= 1 {
                return Err(SolverError::Breakdown {
                    threshold: tol::BICGSTAB_BREAKDOWN,
                });
            }
            restarts += 1;
            let ax = apply_a(spec, &x)?;
            for i in 0..n {
                r[i] = b[i] - ax[i];
            }
            r0.copy_from_slice(&r);
            rho = 1.0;
            alpha = 1.0;
            omega = 1.0;
            v.iter_mut().for_each(|e| *e = 0.0);
            p.iter_mut().for_each(|e| *e = 0.0);
        }};
    }

    while norm(&r) > target && iterations < max_iter {
        let rho_new = dot(&r0, &r);
        if rho_new.abs() < tol::BICGSTAB_BREAKDOWN || omega.abs() < tol::BICGSTAB_BREAKDOWN {
            restart!();
            continue;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        let y = precond.apply(spec, &p)?;
        v = apply_a(spec, &y)?;
        let r0v = dot(&r0, &v);
        // The same underflow family as rho: alpha = rho / (r0 . v).
        if r0v.abs() < tol::BICGSTAB_BREAKDOWN {
            restart!();
            continue;
        }
        alpha = rho / r0v;
        let s: Vec<f64> = (0..n).map(|i| r[i] - alpha * v[i]).collect();
        let z = precond.apply(spec, &s)?;
        let t = apply_a(spec, &z)?;
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
        for i in 0..n {
            x[i] += alpha * y[i] + omega * z[i];
            r[i] = s[i] - omega * t[i];
        }
        iterations += 1;
    }

    // Report the true residual of the returned iterate, not the
    // recurrence value, so the statistic is independently checkable.
    let ax = apply_a(spec, &x)?;
    let true_res: f64 = {
        let diff: Vec<f64> = (0..n).map(|i| b[i] - ax[i]).collect();
        norm(&diff) / b_norm
    };
    Ok((
        x,
        SolveStats {
            iterations,
            residual: true_res,
            converged: true_res <= rtol,
            seconds: start.elapsed().as_secs_f64(),
        },
    ))
}

/// [`bicgstab`] that treats non-convergence as an error.
pub fn solve_converged(
    spec: &OperatorSpec,
    precond: &Preconditioner,
    rtol: f64,
    max_iter: Option<usize>,
) -> Result<(Vec<f64>, SolveStats), SolverError> {
    let (x, stats) = bicgstab(spec, precond, rtol, max_iter)?;
    if !stats.converged {
        return Err(SolverError::MaxIters {
            iters: stats.iterations,
            residual: stats.residual,
            target: rtol,
        });
    }
    Ok((x, stats))
}

/// Assembles the system matrix sparsely and solves by LU with partial
/// pivoting. Refuses systems above [`tol::DIRECT_MAX_DOFS`] unknowns;
/// intended for coarse convergence studies and the stiff time-step
/// regimes where BiCGSTAB stagnates.
pub fn direct_solve_small(spec: &OperatorSpec) -> Result<Vec<f64>, SolverError> {
    spec.validate()?;
    let n = spec.n_dofs();
    if n > tol::DIRECT_MAX_DOFS {
        return Err(SolverError::DirectTooLarge {
            dofs: n,
            cap: tol::DIRECT_MAX_DOFS,
        });
    }

    let triplets = assemble_triplets(spec);
    let mat = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &triplets)
        .map_err(|e| SolverError::CannotFactor(format!("assembly failed: {e:?}")))?;
    let lu = mat
        .sp_lu()
        .map_err(|e| SolverError::CannotFactor(format!("LU factorization failed: {e:?}")))?;
    let rhs = faer::Mat::from_fn(n, 1, |i, _| spec.rhs[i]);
    let sol = lu.solve(&rhs);
    let x: Vec<f64> = (0..n).map(|i| sol[(i, 0)]).collect();
    if x.iter().any(|v| !v.is_finite()) {
        return Err(SolverError::CannotFactor(
            "factorization produced non-finite values (singular matrix)".into(),
        ));
    }
    Ok(x)
}

/// Explicit entries of `A = m I + n [diag(L) + (L - diag L) E]`, merged
/// per (row, column) in deterministic order.
fn assemble_triplets(spec: &OperatorSpec) -> Vec<Triplet<usize, usize, f64>> {
    let n = spec.n_dofs();
    let rows: Vec<BTreeMap<u32, f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut acc: BTreeMap<u32, f64> = BTreeMap::new();
            if spec.m != 0.0 {
                acc.insert(i as u32, spec.m);
            }
            for &(j, l) in &spec.lap.rows[i] {
                if j as usize == i {
                    *acc.entry(i as u32).or_insert(0.0) += spec.n * l;
                } else {
                    for &(k, w) in &spec.ext.rows[j as usize] {
                        *acc.entry(k).or_insert(0.0) += spec.n * l * w;
                    }
                }
            }
            acc
        })
        .collect();
    let mut triplets = Vec::new();
    for (i, acc) in rows.into_iter().enumerate() {
        for (k, a) in acc {
            triplets.push(Triplet::new(i, k as usize, a));
        }
    }
    triplets
}
