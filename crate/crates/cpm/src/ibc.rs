//! Interior boundary conditions on a closest point tube.
//!
//! A curve `C` on the surface splits its neighborhood into two sheets of
//! surface data that may disagree at `C`. Every tube cell whose curve
//! distance is within the tube radius gets a twin degree of freedom: the
//! original cell carries the sheet its own surface foot lies on, and the
//! twin broadcasts the opposite sheet. Stencils near the curve are then
//! rewired column by column. A reference whose data would come from the
//! wrong sheet is redirected to the colocated twin with the weight left
//! unchanged, so only column ids ever change. Twin extension rows carry
//! the boundary condition itself (prescribed value, mirror reflection, or
//! curve-point extension), which means boundary data enters the system
//! purely through the extension operator plus an affine offset returned
//! alongside it.
//!
//! Whether a reference "crosses" the curve relative to a row is decided
//! by comparing offsets from curve feet to surface feet. The comparison
//! is pairwise by default, which keeps all decisions local and works on
//! nonorientable surfaces. Specs that prescribe distinct data per side
//! instead label every cell globally through a user-supplied oriented
//! normal field along the curve. In robust mode the pairwise vectors are
//! first projected orthogonal to the surface normal and curve tangent,
//! which guards against misclassification near high-curvature bumps.

use crate::error::{GeomError, IbcError};
use crate::geometry::{self, ScalarFn, Shape, VectorFn};
use crate::grid::{self, IbcBand, LatticeIndex, SideTag, SparseGrid};
use crate::math;
use crate::ops::{self, SparseOperator};
use crate::tol;
use crate::Point;
use nalgebra::SMatrix;
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::sync::Arc;

/// Which condition one side of the curve carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BcKind {
    Dirichlet,
    ZeroNeumann,
}

/// Accuracy order of the boundary rows: `One` extends boundary data
/// constantly across the curve, `Two` adds the mirror-point correction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BcOrder {
    One,
    Two,
}

/// Condition and value callback for one side of the curve. The value is
/// evaluated at curve points; zero-Neumann conditions ignore it.
#[derive(Clone)]
pub struct SideCondition<const D: usize> {
    pub kind: BcKind,
    pub value: ScalarFn<D>,
}

impl<const D: usize> SideCondition<D> {
    pub fn dirichlet(value: ScalarFn<D>) -> Self {
        SideCondition {
            kind: BcKind::Dirichlet,
            value,
        }
    }

    pub fn zero_neumann() -> Self {
        SideCondition {
            kind: BcKind::ZeroNeumann,
            value: Arc::new(|_| 0.0),
        }
    }
}

/// Full boundary specification along an interior curve.
#[derive(Clone)]
pub struct BcSpec<const D: usize> {
    pub order: BcOrder,
    pub minus: SideCondition<D>,
    pub plus: SideCondition<D>,
    /// Values differ by side even if both kinds match; requires the
    /// orientation field so sides get consistent global labels.
    pub two_sided: bool,
    /// Oriented unit normal of the curve's crossing sheet, evaluated at
    /// curve points: a positive dot product with the foot offset means
    /// the Plus side.
    pub orientation: Option<VectorFn<D>>,
    /// Project pairwise crossing vectors onto the conormal direction
    /// before comparing. Defaults on for surfaces in three dimensions.
    pub robust: bool,
}

impl<const D: usize> BcSpec<D> {
    fn base(order: BcOrder, minus: SideCondition<D>, plus: SideCondition<D>) -> Self {
        BcSpec {
            order,
            minus,
            plus,
            two_sided: false,
            orientation: None,
            // Pairwise side tests in the plane cannot misclassify by
            // curvature the way bumpy embedded surfaces can, and a point
            // curve there has no tangent to project out.
            robust: D == 3,
        }
    }

    /// Same Dirichlet value approached from either side.
    pub fn dirichlet(order: BcOrder, value: ScalarFn<D>) -> Self {
        BcSpec::base(
            order,
            SideCondition::dirichlet(value.clone()),
            SideCondition::dirichlet(value),
        )
    }

    /// Distinct Dirichlet values per side; discontinuous at the curve.
    pub fn dirichlet_two_sided(
        order: BcOrder,
        minus: ScalarFn<D>,
        plus: ScalarFn<D>,
        orientation: VectorFn<D>,
    ) -> Self {
        BcSpec {
            two_sided: true,
            orientation: Some(orientation),
            ..BcSpec::base(
                order,
                SideCondition::dirichlet(minus),
                SideCondition::dirichlet(plus),
            )
        }
    }

    /// Zero normal derivative on both sides.
    pub fn zero_neumann(order: BcOrder) -> Self {
        BcSpec::base(order, SideCondition::zero_neumann(), SideCondition::zero_neumann())
    }

    /// Different condition kinds per side.
    pub fn mixed(
        order: BcOrder,
        minus: SideCondition<D>,
        plus: SideCondition<D>,
        orientation: VectorFn<D>,
    ) -> Self {
        BcSpec {
            two_sided: true,
            orientation: Some(orientation),
            ..BcSpec::base(order, minus, plus)
        }
    }

    pub fn is_mixed(&self) -> bool {
        self.minus.kind != self.plus.kind
    }

    /// Distinct per-side data forces global side labels.
    pub fn needs_orientation(&self) -> bool {
        self.two_sided || self.is_mixed()
    }

    pub fn validate(&self) -> Result<(), IbcError> {
        if self.needs_orientation() && self.orientation.is_none() {
            return Err(IbcError::MissingOrientation);
        }
        Ok(())
    }

    /// Condition carried by one side; on-curve ties resolve to Plus.
    pub fn condition(&self, side: SideTag) -> &SideCondition<D> {
        match side {
            SideTag::Minus => &self.minus,
            SideTag::Plus | SideTag::OnCurve => &self.plus,
        }
    }
}

/// Orthonormal pieces of the local frame at a DOF's curve foot.
#[derive(Clone, Copy, Debug)]
pub struct Frame<const D: usize> {
    /// Unit surface normal at the curve foot; sign is arbitrary.
    pub n_s: Point<D>,
    /// Unit curve tangent at the curve foot; `None` for point curves.
    pub t_c: Option<Point<D>>,
}

/// Frames per tube DOF, present wherever a curve foot is cached.
#[derive(Clone, Debug)]
pub struct FrameData<const D: usize> {
    pub frames: Vec<Option<Frame<D>>>,
}

/// Side labels per tube DOF, present wherever a curve foot is cached.
#[derive(Clone, Debug)]
pub struct SideAssignment {
    pub dof_side: Vec<Option<SideTag>>,
    /// Labels came from the orientation field and are globally
    /// consistent. Otherwise they are diagnostic only (Plus unless on
    /// the curve) and every enforcement decision is pairwise.
    pub global: bool,
}

/// Column-swap statistics from rewiring, for audits and debug dumps.
#[derive(Clone, Debug)]
pub struct RewireReport {
    /// References redirected to twins, per tube extension row.
    pub ext_swaps: Vec<u32>,
    /// References redirected to twins, per tube difference row.
    pub lap_swaps: Vec<u32>,
    /// References kept on the original bank, per band difference row.
    pub band_kept: Vec<u32>,
    /// References dropped from band difference rows: same side as the
    /// row but outside the band, so no twin exists to stand in.
    pub dropped_refs: usize,
    /// Tube DOFs whose rows were audited.
    pub audited_rows: usize,
}

/// Everything the rewiring stage produces: square operators over tube
/// plus band DOFs, the affine part of the extension, and diagnostics.
pub struct IbcSystem<const D: usize> {
    pub ext: SparseOperator,
    pub lap: SparseOperator,
    /// Affine offset of the extension: boundary rows evaluate to
    /// `(ext * u + affine)` at band DOFs; zero elsewhere.
    pub affine: Vec<f64>,
    pub sides: SideAssignment,
    pub frames: Option<FrameData<D>>,
    pub report: RewireReport,
}

/// Fixed DOFs and values produced by a first-order baseline.
#[derive(Clone, Debug)]
pub struct BaselineFix {
    pub dofs: Vec<u32>,
    pub values: Vec<f64>,
    /// Set when the fix is degenerate (for example, an empty set).
    pub warning: Option<String>,
}

/// Cached offset from the curve foot to the surface foot of a tube DOF.
pub fn cp_diff<const D: usize>(
    grid: &SparseGrid<D>,
    band: &IbcBand<D>,
    dof: u32,
) -> Option<Point<D>> {
    band.cp_c[dof as usize].map(|c| grid.cp_s[dof as usize] - c)
}

/// The same offset at an arbitrary point via direct queries.
pub fn cp_diff_at<const D: usize>(
    surface: &Shape<D>,
    curve: &Shape<D>,
    x: &Point<D>,
) -> Result<Point<D>, GeomError> {
    Ok(surface.cp(x)?.cp - curve.cp(x)?.cp)
}

/// Component of `v` along the crossing direction: surface normal and
/// curve tangent (when present) are projected out.
pub fn project_conormal<const D: usize>(v: &Point<D>, frame: &Frame<D>) -> Point<D> {
    let mut out = v - frame.n_s * frame.n_s.dot(v);
    if let Some(t) = frame.t_c {
        out -= t * t.dot(v);
    }
    out
}

/// True when two foot offsets point to opposite sides of the curve. Each
/// vector is projected with the frame at its own curve foot when robust
/// frames are supplied.
pub fn crossing_test<const D: usize>(
    v1: &Point<D>,
    v2: &Point<D>,
    robust: Option<(&Frame<D>, &Frame<D>)>,
) -> bool {
    let (a, b) = match robust {
        Some((f1, f2)) => (project_conormal(v1, f1), project_conormal(v2, f2)),
        None => (*v1, *v2),
    };
    a.dot(&b) < 0.0
}

/// Unoriented unit surface normal per tube cell, from the near-null
/// eigenvector of the surface-extended closest point Jacobian. The raw
/// Jacobian is differenced per cell, then evaluated at each surface foot
/// by interpolation, which smooths sub-grid bumps before the
/// eigendecomposition. Cells whose eigenstructure does not isolate a
/// single near-null direction (mesh corners, open-surface rims, medial
/// pinches) get `None`; whether such cells matter is the caller's call.
pub fn surface_normals<const D: usize>(
    grid: &SparseGrid<D>,
) -> Result<Vec<Option<Point<D>>>, IbcError> {
    Ok(surface_normals_with_gaps(grid)?
        .into_iter()
        .map(|(n, _)| n)
        .collect())
}

/// Normals plus the eigenvalue gap that justified (or vetoed) each one.
fn surface_normals_with_gaps<const D: usize>(
    grid: &SparseGrid<D>,
) -> Result<Vec<(Option<Point<D>>, f64)>, IbcError> {
    let n = grid.n_dofs();
    let raw: Vec<SMatrix<f64, D, D>> = (0..n)
        .into_par_iter()
        .map(|i| field_jacobian(grid, &|k| Some(grid.cp_s[k]), i))
        .collect();
    (0..n)
        .into_par_iter()
        .map(|i| {
            let st = ops::interp_stencil(grid, &grid.cp_s[i], grid.p)?;
            let mut m = SMatrix::<f64, D, D>::zeros();
            for (&d, &w) in st.dof_ids.iter().zip(&st.weights) {
                m += raw[d as usize] * w;
            }
            let sym = (m + m.transpose()) * 0.5;
            Ok(near_null_eigenvector(&sym))
        })
        .collect()
}

/// Estimates the frame (surface normal, curve tangent) at every cached
/// curve foot. Normals come from `surface_normals` interpolated at the
/// foot with per-stencil local orientation: each stencil negates vectors
/// disagreeing with its anchor cell, the lexicographically smallest
/// lattice index, so the unoriented field interpolates consistently.
/// Tangents come from the top eigenvector of the interpolated curve-foot
/// Jacobian, which is sign-free because matrix entries are interpolated
/// before the eigendecomposition.
pub fn estimate_frames<const D: usize>(
    grid: &SparseGrid<D>,
    band: &IbcBand<D>,
    curve: &Shape<D>,
) -> Result<FrameData<D>, IbcError> {
    let n = grid.n_dofs();
    let has_tangent = curve.intrinsic_dim() >= 1;
    let n_hat = surface_normals_with_gaps(grid)?;
    let raw_c: Vec<Option<SMatrix<f64, D, D>>> = (0..n)
        .into_par_iter()
        .map(|i| {
            band.cp_c[i]
                .is_some()
                .then(|| field_jacobian(grid, &|k| band.cp_c[k], i))
        })
        .collect();
    let frames = (0..n)
        .into_par_iter()
        .map(|i| -> Result<Option<Frame<D>>, IbcError> {
            let Some(foot) = band.cp_c[i] else {
                return Ok(None);
            };
            let st = ops::interp_stencil(grid, &foot, grid.p)?;
            // Snapped queries zero out most of the stencil; only nodes
            // that actually contribute need usable data.
            let nodes: Vec<(u32, f64)> = st
                .dof_ids
                .iter()
                .copied()
                .zip(st.weights.iter().copied())
                .filter(|&(_, w)| w != 0.0)
                .collect();
            let anchor = nodes
                .iter()
                .map(|&(d, _)| d)
                .min_by_key(|&d| grid.indices[d as usize].0)
                .expect("interpolation stencils are never empty");
            let reference = match n_hat[anchor as usize] {
                (Some(v), _) => v,
                (None, gap) => {
                    return Err(IbcError::DegenerateFrame {
                        point: grid.point_of(anchor).as_slice().to_vec(),
                        gap,
                    })
                }
            };
            let mut acc = Point::<D>::zeros();
            for &(d, w) in &nodes {
                let v = match n_hat[d as usize] {
                    (Some(v), _) => v,
                    (None, gap) => {
                        return Err(IbcError::DegenerateFrame {
                            point: grid.point_of(d).as_slice().to_vec(),
                            gap,
                        })
                    }
                };
                acc += if v.dot(&reference) < 0.0 { -v } else { v } * w;
            }
            let norm = acc.norm();
            if norm < tol::FRAME_INTERP_MIN {
                return Err(IbcError::DegenerateFrame {
                    point: foot.as_slice().to_vec(),
                    gap: norm,
                });
            }
            let n_s = acc / norm;
            let t_c = if has_tangent {
                let mut m = SMatrix::<f64, D, D>::zeros();
                for &(d, w) in &nodes {
                    let jac = raw_c[d as usize].ok_or(IbcError::DegenerateFrame {
                        point: foot.as_slice().to_vec(),
                        gap: 0.0,
                    })?;
                    m += jac * w;
                }
                let sym = (m + m.transpose()) * 0.5;
                match top_eigenvector(&sym) {
                    (Some(t), _) => Some(t),
                    (None, gap) => {
                        return Err(IbcError::DegenerateFrame {
                            point: foot.as_slice().to_vec(),
                            gap,
                        })
                    }
                }
            } else {
                None
            };
            Ok(Some(Frame { n_s, t_c }))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(FrameData { frames })
}

/// Labels the cached region with side tags and mirrors them onto the
/// band slots. Specs with per-side data label globally through the
/// orientation field; one-sided specs never consult it (their tags are
/// diagnostic, every enforcement decision is pairwise).
pub fn assign_sides<const D: usize>(
    grid: &SparseGrid<D>,
    band: &mut IbcBand<D>,
    spec: &BcSpec<D>,
) -> Result<SideAssignment, IbcError> {
    spec.validate()?;
    let global = spec.needs_orientation();
    let threshold = tol::ON_CURVE_FACTOR * grid.dx * grid.dx;
    let orientation = spec.orientation.clone();
    let dof_side: Vec<Option<SideTag>> = (0..grid.n_dofs())
        .into_par_iter()
        .map(|i| {
            let foot = band.cp_c[i]?;
            let diff = grid.cp_s[i] - foot;
            if diff.norm() < threshold {
                return Some(SideTag::OnCurve);
            }
            if global {
                let orient = orientation.as_ref().expect("validated above");
                // Sign convention: positive dot with the oriented normal
                // is the Plus side; an exactly orthogonal offset also
                // resolves to Plus.
                let f = diff.dot(&orient(&foot));
                Some(if f < 0.0 { SideTag::Minus } else { SideTag::Plus })
            } else {
                Some(SideTag::Plus)
            }
        })
        .collect();
    for (slot, &b) in band.base_dof.iter().enumerate() {
        band.side[slot] = dof_side[b as usize];
    }
    Ok(SideAssignment { dof_side, global })
}

/// How a row classifies its references against the curve.
#[derive(Clone, Copy)]
enum Director<const D: usize> {
    /// Pairwise comparison against this vector; the index names the DOF
    /// whose frame projects the vector in robust mode.
    Vector(Point<D>, usize),
    /// Global side label; references cross when their label differs.
    Label(SideTag),
    /// The row's own offset sits on the curve: stand in the first
    /// classifiable reference of the row and compare the rest to it.
    FromRefs,
    /// No classification possible; the row keeps its columns.
    Skip,
}

/// Shared lookups for crossing decisions.
struct RewireCtx<'a, const D: usize> {
    grid: &'a SparseGrid<D>,
    band: &'a IbcBand<D>,
    sides: &'a SideAssignment,
    frames: Option<&'a FrameData<D>>,
    /// Tube DOF id to band slot.
    twin_slot: Vec<Option<u32>>,
    threshold: f64,
    robust: bool,
}

impl<'a, const D: usize> RewireCtx<'a, D> {
    fn new(
        grid: &'a SparseGrid<D>,
        band: &'a IbcBand<D>,
        sides: &'a SideAssignment,
        frames: Option<&'a FrameData<D>>,
        spec: &BcSpec<D>,
    ) -> Self {
        let mut twin_slot = vec![None; grid.n_dofs()];
        for (slot, &b) in band.base_dof.iter().enumerate() {
            twin_slot[b as usize] = Some(slot as u32);
        }
        RewireCtx {
            grid,
            band,
            sides,
            frames,
            twin_slot,
            threshold: tol::ON_CURVE_FACTOR * grid.dx * grid.dx,
            robust: spec.robust && !sides.global,
        }
    }

    fn diff(&self, j: u32) -> Option<Point<D>> {
        cp_diff(self.grid, self.band, j)
    }

    /// Global label with the on-curve tie resolved to Plus.
    fn label(&self, j: u32) -> Option<SideTag> {
        match self.sides.dof_side[j as usize] {
            Some(SideTag::OnCurve) => Some(SideTag::Plus),
            other => other,
        }
    }

    /// Cached foot pinned at an endpoint of an open curve: the cell sits
    /// past the end, where offsets are not conormal to the curve.
    fn endpoint_foot(&self, j: u32) -> bool {
        match (
            self.band.cp_c[j as usize],
            self.band.cp_c_end[j as usize],
        ) {
            (Some(c), Some(e)) => (c - e).norm() <= tol::BOUNDARY_COINCIDE,
            _ => false,
        }
    }

    /// Replaces an on-curve row offset by the first reference offset that
    /// classifies; rows whose references all sit on the curve stay put.
    /// Endpoint-pinned references cannot serve as separating directions.
    fn resolve_row_director(&self, dir: Director<D>, row: &[(u32, f64)]) -> Director<D> {
        match dir {
            Director::FromRefs => {
                for &(j, _) in row {
                    if self.endpoint_foot(j) {
                        continue;
                    }
                    if let Some(d) = self.diff(j) {
                        if d.norm() >= self.threshold {
                            return Director::Vector(d, j as usize);
                        }
                    }
                }
                Director::Skip
            }
            other => other,
        }
    }

    /// Does the reference read data from the opposite side of the row?
    /// References without a cached curve foot lie beyond the audit cache
    /// and cannot straddle the curve, so they never cross. On-curve
    /// references only cross in global mode (they label Plus there); in
    /// pairwise mode either sheet serves them equally well.
    fn crosses(&self, dir: &Director<D>, j: u32) -> bool {
        match *dir {
            Director::Skip | Director::FromRefs => false,
            Director::Label(side) => match self.label(j) {
                Some(lj) => lj != side,
                None => false,
            },
            Director::Vector(d, fi) => {
                let Some(dj) = self.diff(j) else {
                    return false;
                };
                if dj.norm() < self.threshold {
                    return false;
                }
                let robust_pair = if self.robust {
                    self.frames.and_then(|fd| {
                        match (&fd.frames[fi], &fd.frames[j as usize]) {
                            (Some(a), Some(b)) => Some((a, b)),
                            _ => None,
                        }
                    })
                } else {
                    None
                };
                crossing_test(&d, &dj, robust_pair)
            }
        }
    }

    /// Redirects crossing references of a tube row to their twins.
    fn rewire_tube_row(
        &self,
        i: usize,
        dir: &Director<D>,
        row: &mut [(u32, f64)],
    ) -> Result<u32, IbcError> {
        let n_s = self.grid.n_dofs() as u32;
        let mut swaps = 0;
        for entry in row.iter_mut() {
            if self.crosses(dir, entry.0) {
                let slot = self.twin_slot[entry.0 as usize].ok_or_else(|| {
                    IbcError::MissingBandTwin {
                        row_cell: self.grid.indices[i].0.to_vec(),
                        ref_cell: self.grid.indices[entry.0 as usize].0.to_vec(),
                    }
                })?;
                entry.0 = n_s + slot;
                swaps += 1;
            }
        }
        Ok(swaps)
    }
}

/// Rewires both operators for the interior boundary and appends the band
/// difference rows, growing them to square size over tube plus band
/// DOFs. Band extension rows are left empty; `bc_extension_rows` fills
/// them. Audited rows are those touching the cached region (own DOF or
/// any reference within twice the tube radius of the curve); each row's
/// director is the offset at its own surface foot, refreshed by a direct
/// curve query so the comparison happens at the interpolation point
/// itself rather than at the cell.
#[allow(clippy::too_many_arguments)]
pub fn rewire_stencils<const D: usize>(
    ext: &mut SparseOperator,
    lap: &mut SparseOperator,
    grid: &SparseGrid<D>,
    band: &IbcBand<D>,
    curve: &Shape<D>,
    spec: &BcSpec<D>,
    sides: &SideAssignment,
    frames: Option<&FrameData<D>>,
) -> Result<RewireReport, IbcError> {
    let n_s = grid.n_dofs();
    let n_c = band.n_band();
    let ctx = RewireCtx::new(grid, band, sides, frames, spec);
    let reach = 2.0 * grid.radius;
    let near = |j: u32| band.dist_c[j as usize] < reach;

    let audit_e: Vec<bool> = (0..n_s)
        .into_par_iter()
        .map(|i| near(i as u32) || ext.rows[i].iter().any(|&(j, _)| near(j)))
        .collect();
    let audit_l: Vec<bool> = (0..n_s)
        .into_par_iter()
        .map(|i| near(i as u32) || lap.rows[i].iter().any(|&(j, _)| near(j)))
        .collect();

    // One director per audited DOF, shared by its extension row, its
    // difference row, and any band row based at it.
    let orientation = spec.orientation.clone();
    let global = sides.global;
    let open_curve = curve.has_boundary();
    let directors: Vec<Director<D>> = (0..n_s)
        .into_par_iter()
        .map(|i| -> Result<Director<D>, IbcError> {
            if !(audit_e[i] || audit_l[i]) {
                return Ok(Director::Skip);
            }
            let y = grid.cp_s[i];
            let q = match curve.cp(&y) {
                Ok(q) => q,
                // A director on the curve's medial set beyond the band
                // cannot have references on both sides; leave the row.
                Err(GeomError::AmbiguousClosestPoint { dist, .. }) if dist > grid.radius => {
                    return Ok(Director::Skip)
                }
                Err(e) => return Err(IbcError::Geom(e)),
            };
            // Past the ends of an open curve the equation holds without
            // the boundary condition, so those rows keep their original
            // stencils; their offsets spin around the endpoint and carry
            // no side information.
            if open_curve && q.on_open_boundary {
                return Ok(Director::Skip);
            }
            let d = y - q.cp;
            if global {
                if d.norm() < ctx.threshold {
                    return Ok(Director::Label(SideTag::Plus));
                }
                let orient = orientation.as_ref().expect("global labels need orientation");
                let f = d.dot(&orient(&q.cp));
                Ok(Director::Label(if f < 0.0 {
                    SideTag::Minus
                } else {
                    SideTag::Plus
                }))
            } else if d.norm() < ctx.threshold {
                Ok(Director::FromRefs)
            } else {
                Ok(Director::Vector(d, i))
            }
        })
        .collect::<Result<Vec<_>, _>>()?;

    // Band difference rows copy the base rows as they were before any
    // swapping, then repartition per reference below.
    let base_rows: Vec<Vec<(u32, f64)>> = band
        .base_dof
        .iter()
        .map(|&b| lap.rows[b as usize].clone())
        .collect();

    let ext_swaps: Vec<u32> = ext.rows[..n_s]
        .par_iter_mut()
        .enumerate()
        .map(|(i, row)| {
            if !audit_e[i] {
                return Ok(0);
            }
            let dir = ctx.resolve_row_director(directors[i], row);
            ctx.rewire_tube_row(i, &dir, row)
        })
        .collect::<Result<Vec<_>, IbcError>>()?;
    let lap_swaps: Vec<u32> = lap.rows[..n_s]
        .par_iter_mut()
        .enumerate()
        .map(|(i, row)| {
            if !audit_l[i] {
                return Ok(0);
            }
            let dir = ctx.resolve_row_director(directors[i], row);
            ctx.rewire_tube_row(i, &dir, row)
        })
        .collect::<Result<Vec<_>, IbcError>>()?;

    // Band difference rows: the diagonal moves to the twin; other
    // references default to twins (the band reads its own bank), cross
    // back to the tube when they straddle the curve, and drop when the
    // same-side reference has no twin at the band edge.
    type BuiltRow = (Vec<(u32, f64)>, u32, u32);
    let band_rows: Vec<BuiltRow> = (0..n_c)
        .into_par_iter()
        .map(|s| {
            let b = band.base_dof[s] as usize;
            let dir = ctx.resolve_row_director(directors[b], &base_rows[s]);
            let mut row = Vec::with_capacity(base_rows[s].len());
            let mut kept = 0;
            let mut dropped = 0;
            for &(j, w) in &base_rows[s] {
                if j as usize == b {
                    row.push((n_s as u32 + s as u32, w));
                } else if ctx.crosses(&dir, j) {
                    row.push((j, w));
                    kept += 1;
                } else if let Some(t) = ctx.twin_slot[j as usize] {
                    row.push((n_s as u32 + t, w));
                } else {
                    dropped += 1;
                }
            }
            (row, kept, dropped)
        })
        .collect();

    let mut band_kept = Vec::with_capacity(n_c);
    let mut dropped_refs = 0;
    for (row, kept, dropped) in band_rows {
        lap.rows.push(row);
        band_kept.push(kept);
        dropped_refs += dropped as usize;
    }
    ext.rows.resize(n_s + n_c, Vec::new());
    ext.n_cols = n_s + n_c;
    lap.n_cols = n_s + n_c;

    let audited_rows = (0..n_s).filter(|&i| audit_e[i] || audit_l[i]).count();
    Ok(RewireReport {
        ext_swaps,
        lap_swaps,
        band_kept,
        dropped_refs,
        audited_rows,
    })
}

/// Fills the band extension rows with boundary conditions and returns
/// the affine offset of the extension. A twin serves readers from the
/// opposite side, so its row carries the opposite side's data: the value
/// callbacks are evaluated for the flipped side and interpolation
/// stencils read that sheet (references default to twins and cross back
/// to the tube, with the twin's own side as the director side). Twins
/// past an open curve's endpoints copy their base row verbatim, so the
/// boundary is not enforced beyond the endpoints. Must run after
/// `rewire_stencils`.
#[allow(clippy::too_many_arguments)]
pub fn bc_extension_rows<const D: usize>(
    ext: &mut SparseOperator,
    grid: &SparseGrid<D>,
    band: &IbcBand<D>,
    surface: &Shape<D>,
    curve: &Shape<D>,
    spec: &BcSpec<D>,
    sides: &SideAssignment,
    frames: Option<&FrameData<D>>,
) -> Result<Vec<f64>, IbcError> {
    let n_s = grid.n_dofs();
    let n_c = band.n_band();
    debug_assert_eq!(ext.rows.len(), n_s + n_c, "rewire_stencils must run first");
    let ctx = RewireCtx::new(grid, band, sides, frames, spec);

    let built: Vec<(Vec<(u32, f64)>, f64)> = (0..n_c)
        .into_par_iter()
        .map(|s| -> Result<(Vec<(u32, f64)>, f64), IbcError> {
            let b = band.base_dof[s] as usize;
            if band.on_endpoint[s] {
                return Ok((ext.rows[b].clone(), 0.0));
            }
            let own_side = band.side[s].expect("assign_sides labels every band slot");
            // On-curve ties label Plus everywhere else, so an on-curve
            // twin serves the Minus sheet.
            let effective = match own_side {
                SideTag::OnCurve => SideTag::Plus,
                side => side,
            };
            let foot = band.cp_c[b].expect("band slots cache their curve foot");
            let data = spec.condition(effective.flip());
            let (query, sign, offset) = match (data.kind, spec.order) {
                (BcKind::Dirichlet, BcOrder::One) => {
                    // Constant extension of the boundary value.
                    return Ok((Vec::new(), (data.value)(&foot)));
                }
                (BcKind::Dirichlet, BcOrder::Two) => {
                    let mirror = geometry::mirror_across_curve(surface, curve, &grid.point_of(b as u32))?;
                    (mirror.cp, -1.0, 2.0 * (data.value)(&foot))
                }
                (BcKind::ZeroNeumann, BcOrder::One) => (foot, 1.0, 0.0),
                (BcKind::ZeroNeumann, BcOrder::Two) => {
                    let mirror = geometry::mirror_across_curve(surface, curve, &grid.point_of(b as u32))?;
                    (mirror.cp, 1.0, 0.0)
                }
            };
            let st = ops::interp_stencil(grid, &query, grid.p)?;
            let pairs: Vec<(u32, f64)> = st.dof_ids.iter().copied().zip(st.weights.iter().copied()).collect();
            let dir = match ctx.diff(b as u32) {
                Some(d) if d.norm() >= ctx.threshold => {
                    if sides.global {
                        Director::Label(effective)
                    } else {
                        Director::Vector(d, b)
                    }
                }
                _ => {
                    if sides.global {
                        Director::Label(SideTag::Plus)
                    } else {
                        ctx.resolve_row_director(Director::FromRefs, &pairs)
                    }
                }
            };
            let mut row = Vec::with_capacity(pairs.len());
            for &(j, w) in &pairs {
                if ctx.crosses(&dir, j) {
                    row.push((j, sign * w));
                } else {
                    // Same-side references must come from the band bank;
                    // interpolation cannot drop weights, so a missing
                    // twin is a configuration error, not a fallback.
                    let t = ctx.twin_slot[j as usize].ok_or_else(|| IbcError::MissingBandTwin {
                        row_cell: grid.indices[b].0.to_vec(),
                        ref_cell: grid.indices[j as usize].0.to_vec(),
                    })?;
                    row.push((n_s as u32 + t, sign * w));
                }
            }
            Ok((row, offset))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut affine = vec![0.0; n_s + n_c];
    for (s, (row, offset)) in built.into_iter().enumerate() {
        ext.rows[n_s + s] = row;
        affine[n_s + s] = offset;
    }
    Ok(affine)
}

/// Builds the complete interior-boundary system: base operators, frames
/// when robust pairwise tests apply, side labels, rewiring, and boundary
/// rows. Global-label specs skip frame estimation because their crossing
/// decisions use the analytic orientation directly.
pub fn apply_ibc<const D: usize>(
    grid: &SparseGrid<D>,
    band: &mut IbcBand<D>,
    surface: &Shape<D>,
    curve: &Shape<D>,
    spec: &BcSpec<D>,
) -> Result<IbcSystem<D>, IbcError> {
    spec.validate()?;
    let mut ext = ops::build_extension(grid, grid.p)?;
    let mut lap = ops::build_laplacian(grid)?;
    let frames = if spec.robust && !spec.needs_orientation() {
        Some(estimate_frames(grid, band, curve)?)
    } else {
        None
    };
    let sides = assign_sides(grid, band, spec)?;
    let report = rewire_stencils(
        &mut ext,
        &mut lap,
        grid,
        band,
        curve,
        spec,
        &sides,
        frames.as_ref(),
    )?;
    let affine = bc_extension_rows(
        &mut ext,
        grid,
        band,
        surface,
        curve,
        spec,
        &sides,
        frames.as_ref(),
    )?;
    Ok(IbcSystem {
        ext,
        lap,
        affine,
        sides,
        frames,
        report,
    })
}

fn baseline_guard<const D: usize>(spec: &BcSpec<D>) -> Result<(), IbcError> {
    if spec.two_sided || spec.is_mixed() {
        return Err(IbcError::TwoSidedUnsupported);
    }
    if spec.minus.kind != BcKind::Dirichlet {
        return Err(IbcError::BaselineRequiresDirichlet);
    }
    Ok(())
}

/// Nearest tube cell to a target point: the rounded lattice cell when it
/// is in the tube, otherwise the closest in-tube cell of the surrounding
/// block (ties break to the smallest lattice index).
fn nearest_tube_dof<const D: usize>(grid: &SparseGrid<D>, target: &Point<D>) -> Option<u32> {
    let center = LatticeIndex::nearest(&grid.origin, grid.dx, target);
    if let Some(d) = grid.dof_at(&center) {
        return Some(d);
    }
    let mut best: Option<(f64, [i64; D], u32)> = None;
    let mut offset = [-1i64; D];
    loop {
        let mut cell = center.0;
        for a in 0..D {
            cell[a] += offset[a];
        }
        let idx = LatticeIndex(cell);
        if let Some(d) = grid.dof_at(&idx) {
            let dist = (idx.to_point(&grid.origin, grid.dx) - target).norm();
            let candidate = (dist, cell, d);
            best = Some(match best {
                Some(cur) if (cur.0, cur.1) <= (candidate.0, candidate.1) => cur,
                _ => candidate,
            });
        }
        let mut a = D;
        loop {
            if a == 0 {
                return best.map(|(_, _, d)| d);
            }
            a -= 1;
            offset[a] += 1;
            if offset[a] <= 1 {
                break;
            }
            offset[a] = -1;
        }
    }
}

/// First-order baseline: fix the tube cells nearest to the curve with
/// the prescribed Dirichlet value and remove them from the unknowns. A
/// point fixes a single cell; a curve fixes the raster of nearest cells
/// along a dense sampling.
pub fn baseline_nearest_point<const D: usize>(
    grid: &SparseGrid<D>,
    curve: &Shape<D>,
    spec: &BcSpec<D>,
) -> Result<BaselineFix, IbcError> {
    baseline_guard(spec)?;
    let samples = grid::curve_samples(curve, grid.dx * 0.5).map_err(IbcError::Geom)?;
    // BTreeMap keeps the fixed set sorted by DOF id regardless of sample
    // order, so output is deterministic.
    let mut fixed: BTreeMap<u32, f64> = BTreeMap::new();
    for s in &samples {
        let Some(dof) = nearest_tube_dof(grid, s) else {
            continue;
        };
        if let std::collections::btree_map::Entry::Vacant(e) = fixed.entry(dof) {
            let q = curve.cp(&grid.point_of(dof)).map_err(IbcError::Geom)?;
            e.insert((spec.minus.value)(&q.cp));
        }
    }
    let warning = fixed
        .is_empty()
        .then(|| "no tube cell lies near the curve; nothing was fixed".to_string());
    Ok(BaselineFix {
        dofs: fixed.keys().copied().collect(),
        values: fixed.values().copied().collect(),
        warning,
    })
}

/// First-order baseline: fix every tube cell within `radius` of the
/// curve (default: the tube radius) with the prescribed Dirichlet value.
pub fn baseline_ball<const D: usize>(
    grid: &SparseGrid<D>,
    curve: &Shape<D>,
    spec: &BcSpec<D>,
    radius: Option<f64>,
) -> Result<BaselineFix, IbcError> {
    baseline_guard(spec)?;
    let r = radius.unwrap_or(grid.radius);
    let picks: Vec<Option<(u32, f64)>> = (0..grid.n_dofs())
        .into_par_iter()
        .map(|i| -> Result<Option<(u32, f64)>, IbcError> {
            let x = grid.point_of(i as u32);
            match curve.cp(&x) {
                Ok(q) if q.dist <= r => Ok(Some((i as u32, (spec.minus.value)(&q.cp)))),
                Ok(_) => Ok(None),
                Err(GeomError::AmbiguousClosestPoint { dist, .. }) if dist > r => Ok(None),
                Err(e) => Err(IbcError::Geom(e)),
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut dofs = Vec::new();
    let mut values = Vec::new();
    for (d, v) in picks.into_iter().flatten() {
        dofs.push(d);
        values.push(v);
    }
    let warning = dofs
        .is_empty()
        .then(|| format!("no tube cell within {r:.3e} of the curve; nothing was fixed"));
    Ok(BaselineFix {
        dofs,
        values,
        warning,
    })
}

/// CSV dump of side tags and per-row swap counts over the cached region
/// plus all band rows, for visual audits.
pub fn debug_side_csv<const D: usize>(
    grid: &SparseGrid<D>,
    band: &IbcBand<D>,
    system: &IbcSystem<D>,
) -> String {
    let n_s = grid.n_dofs();
    let mut out = String::from("kind,dof,slot");
    for a in 0..D {
        out.push_str(&format!(",i{a}"));
    }
    out.push_str(",side,ext_swaps,lap_swaps\n");
    for i in 0..n_s {
        let side = system.sides.dof_side[i];
        let swaps = (system.report.ext_swaps[i], system.report.lap_swaps[i]);
        if side.is_none() && swaps == (0, 0) {
            continue;
        }
        out.push_str(&format!("tube,{i},"));
        for a in 0..D {
            out.push_str(&format!(",{}", grid.indices[i].0[a]));
        }
        out.push_str(&format!(
            ",{},{},{}\n",
            side.map_or("", SideTag::glyph),
            swaps.0,
            swaps.1
        ));
    }
    for slot in 0..band.n_band() {
        let b = band.base_dof[slot] as usize;
        // Band extension swaps are the references kept on the tube bank.
        let ext_kept = system.ext.rows[n_s + slot]
            .iter()
            .filter(|&&(j, _)| (j as usize) < n_s)
            .count();
        out.push_str(&format!("band,{},{slot}", n_s + slot));
        for a in 0..D {
            out.push_str(&format!(",{}", grid.indices[b].0[a]));
        }
        out.push_str(&format!(
            ",{},{},{}\n",
            band.side[slot].map_or("", SideTag::glyph),
            ext_kept,
            system.report.band_kept[slot]
        ));
    }
    out
}

/// Centered-difference Jacobian of a per-cell point field, one-sided
/// where a neighbor lacks data and zero along axes with no data at all.
fn field_jacobian<const D: usize>(
    grid: &SparseGrid<D>,
    value: &impl Fn(usize) -> Option<Point<D>>,
    i: usize,
) -> SMatrix<f64, D, D> {
    let here = value(i);
    let mut jac = SMatrix::<f64, D, D>::zeros();
    for axis in 0..D {
        let mut plus = grid.indices[i].0;
        plus[axis] += 1;
        let mut minus = grid.indices[i].0;
        minus[axis] -= 1;
        let vp = grid
            .dof_at(&LatticeIndex(plus))
            .and_then(|d| value(d as usize));
        let vm = grid
            .dof_at(&LatticeIndex(minus))
            .and_then(|d| value(d as usize));
        let col = match (vp, vm, here) {
            (Some(a), Some(b), _) => (a - b) / (2.0 * grid.dx),
            (Some(a), None, Some(h)) => (a - h) / grid.dx,
            (None, Some(b), Some(h)) => (h - b) / grid.dx,
            _ => Point::<D>::zeros(),
        };
        jac.set_column(axis, &col);
    }
    jac
}

/// Eigenvector of the eigenvalue closest to zero, with the gap to the
/// next-smallest magnitude; `None` when the gap is below the detection
/// threshold.
fn near_null_eigenvector<const D: usize>(m: &SMatrix<f64, D, D>) -> (Option<Point<D>>, f64) {
    let (vals, vecs) = sym_eigen_smatrix(m);
    let mut order: Vec<usize> = (0..D).collect();
    order.sort_by(|&a, &b| vals[a].abs().partial_cmp(&vals[b].abs()).unwrap());
    let gap = vals[order[1]].abs() - vals[order[0]].abs();
    if gap < tol::FRAME_EIGEN_GAP {
        return (None, gap);
    }
    (Some(eigvec_row(&vecs, order[0])), gap)
}

/// Eigenvector of the largest eigenvalue, with the gap to the runner-up;
/// `None` when the gap is below the detection threshold.
fn top_eigenvector<const D: usize>(m: &SMatrix<f64, D, D>) -> (Option<Point<D>>, f64) {
    let (vals, vecs) = sym_eigen_smatrix(m);
    let gap = vals[D - 1] - vals[D - 2];
    if gap < tol::FRAME_EIGEN_GAP {
        return (None, gap);
    }
    (Some(eigvec_row(&vecs, D - 1)), gap)
}

fn sym_eigen_smatrix<const D: usize>(m: &SMatrix<f64, D, D>) -> (Vec<f64>, Vec<f64>) {
    let mut buf = vec![0.0; D * D];
    for r in 0..D {
        for c in 0..D {
            buf[r * D + c] = m[(r, c)];
        }
    }
    math::sym_eigen(D, &mut buf)
}

fn eigvec_row<const D: usize>(vecs: &[f64], row: usize) -> Point<D> {
    let mut v = Point::<D>::zeros();
    for a in 0..D {
        v[a] = vecs[row * D + a];
    }
    v.normalize()
}
