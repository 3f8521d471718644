//! Interpolation and finite-difference operators on a sparse tube.
//!
//! The extension operator `E` reads a field at closest points through
//! tensor-product barycentric-Lagrange interpolation of degree `p`; the
//! Laplacian `L` is the centered hyper-cross stencil. The stabilized
//! surface Laplacian applies `diag(L) + (L - diag(L)) E` without forming
//! the product. Gradient and divergence helpers use centered differences
//! per axis (one-sided at tube-edge cells) and exist for flow problems
//! that rebuild extended vector fields between steps.
//!
//! Rows are built independently and in parallel; the output is
//! deterministic because every row only depends on its own DOF.

use crate::error::OpsError;
use crate::geometry::presets;
use crate::grid::{LatticeIndex, SparseGrid};
use crate::tol;
use crate::Point;
use rayon::prelude::*;

/// One interpolation or finite-difference row before it is placed in an
/// operator: the cells it reads, their weights, and the director point
/// that side-resolution logic uses to orient the row.
#[derive(Debug, Clone)]
pub struct StencilRef<const D: usize> {
    pub dof_ids: Vec<u32>,
    pub weights: Vec<f64>,
    pub director: Point<D>,
}

/// Row-major sparse matrix. Rows hold `(column, weight)` pairs with
/// distinct columns; `n_cols` bounds the column ids.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    pub rows: Vec<Vec<(u32, f64)>>,
    pub n_cols: usize,
}

impl SparseOperator {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    /// Identity operator of size `n`.
    pub fn identity(n: usize) -> SparseOperator {
        SparseOperator {
            rows: (0..n).map(|i| vec![(i as u32, 1.0)]).collect(),
            n_cols: n,
        }
    }

    /// Matrix-vector product.
    pub fn apply(&self, u: &[f64]) -> Result<Vec<f64>, OpsError> {
        if u.len() != self.n_cols {
            return Err(OpsError::DimensionMismatch {
                expected: self.n_cols,
                got: u.len(),
            });
        }
        Ok(self
            .rows
            .par_iter()
            .map(|row| row.iter().map(|&(j, w)| w * u[j as usize]).sum())
            .collect())
    }

    /// Diagonal entries, zero where a row has no diagonal entry.
    pub fn diagonal(&self) -> Vec<f64> {
        self.rows
            .iter()
            .enumerate()
            .map(|(i, row)| {
                row.iter()
                    .find(|&&(j, _)| j as usize == i)
                    .map_or(0.0, |&(_, w)| w)
            })
            .collect()
    }

    /// Structural invariants: columns in range and distinct per row.
    pub fn validate(&self) -> Result<(), OpsError> {
        for row in &self.rows {
            let mut cols: Vec<u32> = row.iter().map(|&(j, _)| j).collect();
            cols.sort_unstable();
            let before = cols.len();
            cols.dedup();
            if cols.len() != before || cols.last().is_some_and(|&c| c as usize >= self.n_cols) {
                return Err(OpsError::DimensionMismatch {
                    expected: self.n_cols,
                    got: cols.last().map_or(0, |&c| c as usize),
                });
            }
        }
        Ok(())
    }

    /// Coordinate-format text, one `row col weight` line per entry, for
    /// diffing operators against fixtures.
    pub fn to_coordinate_text(&self) -> String {
        let mut out = String::new();
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, w) in row {
                out.push_str(&format!("{i} {j} {w:.16e}\n"));
            }
        }
        out
    }
}

/// 1-D barycentric-Lagrange weights for nodes `{0, 1, .., p}` evaluated at
/// offset `s` in node units. A query within `1e-12` of a node snaps to
/// that node so on-grid queries stay exact.
pub fn lagrange_axis_weights(p: usize, s: f64) -> Vec<f64> {
    let n = p + 1;
    for j in 0..n {
        if (s - j as f64).abs() <= 1e-12 {
            let mut w = vec![0.0; n];
            w[j] = 1.0;
            return w;
        }
    }
    // lambda_j = (-1)^j C(p, j), the barycentric weights of equispaced
    // nodes (common factors cancel in the normalized form).
    let mut lambda = vec![0.0; n];
    let mut c = 1.0;
    for (j, l) in lambda.iter_mut().enumerate() {
        *l = if j % 2 == 0 { c } else { -c };
        c = c * (p - j) as f64 / (j + 1) as f64;
    }
    let terms: Vec<f64> = (0..n).map(|j| lambda[j] / (s - j as f64)).collect();
    let total: f64 = terms.iter().sum();
    terms.iter().map(|t| t / total).collect()
}

/// Tensor-product interpolation stencil of degree `p` at `query`. The base
/// cell `floor((q - origin)/dx - (p-1)/2)` per axis centers the query in
/// the middle cell of the axis nodes.
pub fn interp_stencil<const D: usize>(
    grid: &SparseGrid<D>,
    query: &Point<D>,
    p: usize,
) -> Result<StencilRef<D>, OpsError> {
    let mut base = [0i64; D];
    let mut axis_w: Vec<Vec<f64>> = Vec::with_capacity(D);
    for i in 0..D {
        let s_global = (query[i] - grid.origin[i]) / grid.dx;
        let b = (s_global - (p as f64 - 1.0) / 2.0).floor();
        base[i] = b as i64;
        axis_w.push(lagrange_axis_weights(p, s_global - b));
    }
    let n = p + 1;
    let count = n.pow(D as u32);
    let mut dof_ids = Vec::with_capacity(count);
    let mut weights = Vec::with_capacity(count);
    let mut offset = [0usize; D];
    for _ in 0..count {
        let mut cell = base;
        let mut w = 1.0;
        for i in 0..D {
            cell[i] += offset[i] as i64;
            w *= axis_w[i][offset[i]];
        }
        let idx = LatticeIndex(cell);
        match grid.dof_at(&idx) {
            Some(dof) => {
                dof_ids.push(dof);
                weights.push(w);
            }
            None => {
                return Err(OpsError::StencilOutsideTube {
                    query: query.as_slice().to_vec(),
                    cell: cell.to_vec(),
                })
            }
        }
        for i in (0..D).rev() {
            offset[i] += 1;
            if offset[i] < n {
                break;
            }
            offset[i] = 0;
        }
    }
    Ok(StencilRef {
        dof_ids,
        weights,
        director: *query,
    })
}

/// Extension operator: row `k` interpolates at `cp_S(x_k)`. Boundary-band
/// rows are appended later by the interior-boundary machinery.
pub fn build_extension<const D: usize>(
    grid: &SparseGrid<D>,
    p: usize,
) -> Result<SparseOperator, OpsError> {
    let rows: Result<Vec<Vec<(u32, f64)>>, OpsError> = (0..grid.n_dofs())
        .into_par_iter()
        .map(|k| {
            let st = interp_stencil(grid, &grid.cp_s[k], p)?;
            Ok(st.dof_ids.into_iter().zip(st.weights).collect())
        })
        .collect();
    Ok(SparseOperator {
        rows: rows?,
        n_cols: grid.n_dofs(),
    })
}

/// Hyper-cross Laplacian: `-2D/dx^2` at the center, `1/dx^2` per face
/// neighbor. Tube-edge cells (some face neighbor missing) get an empty
/// row; they are closed by side-condition rows downstream, never by a
/// one-sided difference.
pub fn build_laplacian<const D: usize>(grid: &SparseGrid<D>) -> Result<SparseOperator, OpsError> {
    let inv2 = 1.0 / (grid.dx * grid.dx);
    let rows: Result<Vec<Vec<(u32, f64)>>, OpsError> = (0..grid.n_dofs())
        .into_par_iter()
        .map(|i| {
            if grid.edge_of_tube[i] {
                return Ok(Vec::new());
            }
            let mut row = Vec::with_capacity(2 * D + 1);
            row.push((i as u32, -2.0 * D as f64 * inv2));
            for nb in grid.indices[i].face_neighbors() {
                match grid.dof_at(&nb) {
                    Some(nd) => row.push((nd, inv2)),
                    None => {
                        return Err(OpsError::StencilOutsideTube {
                            query: grid.point_of(i as u32).as_slice().to_vec(),
                            cell: nb.0.to_vec(),
                        })
                    }
                }
            }
            Ok(row)
        })
        .collect();
    Ok(SparseOperator {
        rows: rows?,
        n_cols: grid.n_dofs(),
    })
}

/// Stabilized surface Laplacian `diag(L) u + (L - diag(L)) (E u)` applied
/// without forming the matrix product.
pub fn apply_stabilized(
    lap: &SparseOperator,
    ext: &SparseOperator,
    u: &[f64],
) -> Result<Vec<f64>, OpsError> {
    if lap.n_cols != ext.n_rows() {
        return Err(OpsError::DimensionMismatch {
            expected: lap.n_cols,
            got: ext.n_rows(),
        });
    }
    let w = ext.apply(u)?;
    if u.len() != lap.n_cols {
        return Err(OpsError::DimensionMismatch {
            expected: lap.n_cols,
            got: u.len(),
        });
    }
    Ok(lap
        .rows
        .par_iter()
        .enumerate()
        .map(|(i, row)| {
            row.iter()
                .map(|&(j, l)| {
                    if j as usize == i {
                        l * u[i]
                    } else {
                        l * w[j as usize]
                    }
                })
                .sum()
        })
        .collect())
}

/// Stabilized surface Laplacian when the extension carries an affine
/// part: `diag(L) u + (L - diag(L)) (E u + e)`. Time steppers use this
/// to evaluate the right-hand side at the current state with boundary
/// data reimposed.
pub fn apply_stabilized_affine(
    lap: &SparseOperator,
    ext: &SparseOperator,
    affine: &[f64],
    u: &[f64],
) -> Result<Vec<f64>, OpsError> {
    if lap.n_cols != ext.n_rows() {
        return Err(OpsError::DimensionMismatch {
            expected: lap.n_cols,
            got: ext.n_rows(),
        });
    }
    if u.len() != lap.n_cols {
        return Err(OpsError::DimensionMismatch {
            expected: lap.n_cols,
            got: u.len(),
        });
    }
    if affine.len() != u.len() {
        return Err(OpsError::DimensionMismatch {
            expected: u.len(),
            got: affine.len(),
        });
    }
    let mut w = ext.apply(u)?;
    for (wi, &e) in w.iter_mut().zip(affine) {
        *wi += e;
    }
    Ok(lap
        .rows
        .par_iter()
        .enumerate()
        .map(|(i, row)| {
            row.iter()
                .map(|&(j, l)| {
                    if j as usize == i {
                        l * u[i]
                    } else {
                        l * w[j as usize]
                    }
                })
                .sum()
        })
        .collect())
}

/// Centered-difference gradient at one DOF, one-sided where a face
/// neighbor is missing and zero along an axis with no neighbors at all.
pub fn gradient_centered<const D: usize>(grid: &SparseGrid<D>, u: &[f64], i: usize) -> Point<D> {
    let mut g = Point::<D>::zeros();
    for axis in 0..D {
        let mut plus = grid.indices[i].0;
        plus[axis] += 1;
        let mut minus = grid.indices[i].0;
        minus[axis] -= 1;
        let up = grid.dof_at(&LatticeIndex(plus)).map(|d| u[d as usize]);
        let um = grid.dof_at(&LatticeIndex(minus)).map(|d| u[d as usize]);
        g[axis] = match (up, um) {
            (Some(a), Some(b)) => (a - b) / (2.0 * grid.dx),
            (Some(a), None) => (a - u[i]) / grid.dx,
            (None, Some(b)) => (u[i] - b) / grid.dx,
            (None, None) => 0.0,
        };
    }
    g
}

/// Normalized negative surface gradient `-grad u / |grad u|` projected
/// onto the tangent plane by `I - n n^T` and re-extended componentwise.
/// `normals` holds one unit surface normal per DOF (zero for codimension
/// zero, where the projection is the identity). DOFs where the projected
/// gradient is below the zero guard get the zero vector.
pub fn surface_gradient_normalized<const D: usize>(
    grid: &SparseGrid<D>,
    ext: &SparseOperator,
    u: &[f64],
    normals: &[Point<D>],
) -> Result<Vec<Point<D>>, OpsError> {
    let n = grid.n_dofs();
    if u.len() != n || normals.len() != n {
        return Err(OpsError::DimensionMismatch {
            expected: n,
            got: u.len().min(normals.len()),
        });
    }
    let raw: Vec<Point<D>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let g = gradient_centered(grid, u, i);
            let nrm = normals[i];
            let tangential = g - nrm * nrm.dot(&g);
            let len = tangential.norm();
            if len < tol::GRAD_ZERO {
                Point::<D>::zeros()
            } else {
                -tangential / len
            }
        })
        .collect();
    let mut out = vec![Point::<D>::zeros(); n];
    for axis in 0..D {
        let component: Vec<f64> = raw.iter().map(|v| v[axis]).collect();
        let extended = ext.apply(&component)?;
        for (o, e) in out.iter_mut().zip(extended) {
            o[axis] = e;
        }
    }
    Ok(out)
}

/// Centered-difference divergence: sum over axes of the difference of each
/// component along its own axis, one-sided at tube-edge cells.
pub fn divergence_centered<const D: usize>(
    grid: &SparseGrid<D>,
    x_field: &[Point<D>],
) -> Result<Vec<f64>, OpsError> {
    let n = grid.n_dofs();
    if x_field.len() != n {
        return Err(OpsError::DimensionMismatch {
            expected: n,
            got: x_field.len(),
        });
    }
    Ok((0..n)
        .into_par_iter()
        .map(|i| {
            let mut div = 0.0;
            for axis in 0..D {
                let mut plus = grid.indices[i].0;
                plus[axis] += 1;
                let mut minus = grid.indices[i].0;
                minus[axis] -= 1;
                let up = grid
                    .dof_at(&LatticeIndex(plus))
                    .map(|d| x_field[d as usize][axis]);
                let um = grid
                    .dof_at(&LatticeIndex(minus))
                    .map(|d| x_field[d as usize][axis]);
                div += match (up, um) {
                    (Some(a), Some(b)) => (a - b) / (2.0 * grid.dx),
                    (Some(a), None) => (a - x_field[i][axis]) / grid.dx,
                    (None, Some(b)) => (x_field[i][axis] - b) / grid.dx,
                    (None, None) => 0.0,
                };
            }
            div
        })
        .collect())
}

/// Interpolates a DOF field at arbitrary in-tube points.
pub fn interpolate_at<const D: usize>(
    grid: &SparseGrid<D>,
    u: &[f64],
    targets: &[Point<D>],
    p: usize,
) -> Result<Vec<f64>, OpsError> {
    if u.len() != grid.n_dofs() {
        return Err(OpsError::DimensionMismatch {
            expected: grid.n_dofs(),
            got: u.len(),
        });
    }
    targets
        .par_iter()
        .map(|t| {
            let st = interp_stencil(grid, t, p)?;
            Ok(st
                .dof_ids
                .iter()
                .zip(&st.weights)
                .map(|(&d, &w)| w * u[d as usize])
                .sum())
        })
        .collect()
}

/// Manufactured load `f = -lap_S u + u` for `u = x1 x2` on the biconcave
/// surface, evaluated from the closed-form level-set identities
/// `lap_S u = lap u - n^T (D^2 u) n - kappa du/dn` with
/// `n = grad phi / |grad phi|` and
/// `kappa = (lap phi - n^T (D^2 phi) n) / |grad phi|`.
pub fn biconcave_screened_rhs(y: &Point<3>) -> Result<f64, OpsError> {
    let p = presets::biconcave_phi(y);
    if p.abs() > tol::MANUFACTURED_ON_SURFACE {
        return Err(OpsError::OffSurface {
            point: y.as_slice().to_vec(),
            phi: p,
        });
    }
    let g = presets::biconcave_grad(y);
    let gn = g.norm();
    let n = g / gn;
    let h = presets::biconcave_hess(y);
    let lap_phi = h.trace();
    let kappa = (lap_phi - n.dot(&(h * n))) / gn;
    // u = x1 x2: lap u = 0, grad u = (x2, x1, 0), n^T (D^2 u) n = 2 n1 n2.
    Ok(2.0 * n[0] * n[1] + kappa * (y[1] * n[0] + y[0] * n[1]) + y[0] * y[1])
}
