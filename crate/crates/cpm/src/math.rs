//! Small dense linear algebra over stack-friendly buffers.
//!
//! The embedding dimension is a const generic, so routines here work on
//! row-major slices of runtime size `n` (n <= 4 in practice: frame
//! estimation needs symmetric DxD eigenpairs, the level-set projection
//! solves a (D+1)x(D+1) saddle system). Hand-rolling these avoids
//! propagating type-level dimension arithmetic through every signature.

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// `a` is row-major `n x n` and is consumed as scratch. Returns
/// `(eigenvalues, eigenvectors)` with eigenvalues ascending and
/// eigenvectors stored as rows of the returned matrix (row k pairs with
/// eigenvalue k). Deterministic: fixed sweep order, no pivot choices.
pub fn sym_eigen(n: usize, a: &mut [f64]) -> (Vec<f64>, Vec<f64>) {
    debug_assert_eq!(a.len(), n * n);
    // v accumulates the rotations; starts as identity.
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    // Off-diagonal magnitude shrinks quadratically; 30 sweeps is far more
    // than 4x4 matrices ever need, the loop exits early on convergence.
    for _sweep in 0..30 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[p * n + q] * a[p * n + q];
            }
        }
        if off <= f64::EPSILON * f64::EPSILON {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                // Stable rotation: pick the smaller-magnitude root of t^2 + 2*theta*t - 1 = 0.
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vpk = v[p * n + k];
                    let vqk = v[q * n + k];
                    v[p * n + k] = c * vpk - s * vqk;
                    v[q * n + k] = s * vpk + c * vqk;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i * n + i].partial_cmp(&a[j * n + j]).unwrap());
    let evals: Vec<f64> = order.iter().map(|&i| a[i * n + i]).collect();
    let mut evecs = vec![0.0; n * n];
    for (row, &i) in order.iter().enumerate() {
        evecs[row * n..row * n + n].copy_from_slice(&v[i * n..i * n + n]);
    }
    (evals, evecs)
}

/// Solves `A x = b` in place by Gaussian elimination with partial pivoting.
///
/// `a` is row-major `n x n` and is destroyed; `b` is overwritten with the
/// solution. Returns a crude condition estimate, the ratio of the largest
/// to smallest absolute pivot (infinite for a singular system).
pub fn solve_dense(n: usize, a: &mut [f64], b: &mut [f64]) -> f64 {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(b.len(), n);
    let mut max_piv: f64 = 0.0;
    let mut min_piv = f64::INFINITY;
    for col in 0..n {
        let mut piv = col;
        for row in (col + 1)..n {
            if a[row * n + col].abs() > a[piv * n + col].abs() {
                piv = row;
            }
        }
        if piv != col {
            for k in 0..n {
                a.swap(col * n + k, piv * n + k);
            }
            b.swap(col, piv);
        }
        let d = a[col * n + col];
        max_piv = max_piv.max(d.abs());
        min_piv = min_piv.min(d.abs());
        if d == 0.0 {
            return f64::INFINITY;
        }
        for row in (col + 1)..n {
            let factor = a[row * n + col] / d;
            if factor == 0.0 {
                continue;
            }
            a[row * n + col] = 0.0;
            for k in (col + 1)..n {
                a[row * n + k] -= factor * a[col * n + k];
            }
            b[row] -= factor * b[col];
        }
    }
    for col in (0..n).rev() {
        let mut x = b[col];
        for k in (col + 1)..n {
            x -= a[col * n + k] * b[k];
        }
        b[col] = x / a[col * n + col];
    }
    max_piv / min_piv
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn eigen_diag() {
        let mut a = [3.0, 0.0, 0.0, -1.0];
        let (vals, vecs) = sym_eigen(2, &mut a);
        assert_relative_eq!(vals[0], -1.0, max_relative = 1e-14);
        assert_relative_eq!(vals[1], 3.0, max_relative = 1e-14);
        // Row 0 pairs with eigenvalue -1, i.e. the second axis.
        assert!(vecs[1].abs() > 0.99 && vecs[2].abs() > 0.99);
    }

    #[test]
    fn eigen_projection_matrix() {
        // Projector onto span{(1,1,1)/sqrt(3)}: eigenvalues {0, 0, 1}.
        let u = [1.0 / 3.0f64.sqrt(); 3];
        let mut a = [0.0; 9];
        for i in 0..3 {
            for j in 0..3 {
                a[i * 3 + j] = u[i] * u[j];
            }
        }
        let (vals, vecs) = sym_eigen(3, &mut a);
        assert_relative_eq!(vals[0], 0.0, epsilon = 1e-14);
        assert_relative_eq!(vals[1], 0.0, epsilon = 1e-14);
        assert_relative_eq!(vals[2], 1.0, epsilon = 1e-14);
        let dot: f64 = (0..3).map(|k| vecs[2 * 3 + k] * u[k]).sum();
        assert_relative_eq!(dot.abs(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn eigen_random_symmetric_reconstructs() {
        // A = Q diag Q^T reconstruction check on a fixed symmetric matrix.
        let src = [4.0, 1.0, -2.0, 1.0, 2.0, 0.5, -2.0, 0.5, 3.0];
        let mut a = src;
        let (vals, vecs) = sym_eigen(3, &mut a);
        for i in 0..3 {
            for j in 0..3 {
                let mut aij = 0.0;
                for k in 0..3 {
                    aij += vecs[k * 3 + i] * vals[k] * vecs[k * 3 + j];
                }
                assert_relative_eq!(aij, src[i * 3 + j], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn solve_matches_known_solution() {
        let mut a = [2.0, 1.0, -1.0, -3.0, -1.0, 2.0, -2.0, 1.0, 2.0];
        let mut b = [8.0, -11.0, -3.0];
        let cond = solve_dense(3, &mut a, &mut b);
        assert!(cond.is_finite());
        assert_relative_eq!(b[0], 2.0, epsilon = 1e-12);
        assert_relative_eq!(b[1], 3.0, epsilon = 1e-12);
        assert_relative_eq!(b[2], -1.0, epsilon = 1e-12);
    }

    #[test]
    fn solve_flags_singular() {
        let mut a = [1.0, 2.0, 2.0, 4.0];
        let mut b = [1.0, 2.0];
        let cond = solve_dense(2, &mut a, &mut b);
        assert!(!cond.is_finite() || cond > 1e15);
    }
}
