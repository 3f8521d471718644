//! Sparse computational tube construction.
//!
//! The solver never allocates a full grid. Instead a breadth-first search
//! walks face-neighbor lattice cells outward from seed cells on the
//! surface, keeps every cell whose distance to the surface is at most the
//! tube radius, and records the closest point found along the way. Each
//! lattice cell is queried exactly once. A second, smaller search near an
//! interior curve builds the boundary-condition band and caches curve
//! closest points out to twice the tube radius for later stencil audits.
//!
//! Degree-of-freedom ids are canonical: after the search the kept cells
//! are sorted lexicographically by lattice index, so the same surface,
//! spacing, and origin produce the same ids regardless of seed choice.

use crate::error::{GeomError, GridError, IbcError};
use crate::geometry::Shape;
use crate::tol;
use crate::Point;
use std::collections::{HashMap, HashSet, VecDeque};

/// Hard cap on visited cells; a search that exceeds it aborts instead of
/// exhausting memory on a bad configuration.
pub const MAX_CELLS: usize = 80_000_000;

/// Integer lattice coordinates; the embedding is `x = origin + dx * index`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct LatticeIndex<const D: usize>(pub [i64; D]);

impl<const D: usize> LatticeIndex<D> {
    pub fn to_point(&self, origin: &Point<D>, dx: f64) -> Point<D> {
        let mut p = *origin;
        for a in 0..D {
            p[a] += dx * self.0[a] as f64;
        }
        p
    }

    /// Lattice cell whose point is nearest to `x`.
    pub fn nearest(origin: &Point<D>, dx: f64, x: &Point<D>) -> Self {
        let mut k = [0i64; D];
        for a in 0..D {
            k[a] = ((x[a] - origin[a]) / dx).round() as i64;
        }
        LatticeIndex(k)
    }

    /// The `2D` face neighbors in a fixed axis-then-sign order.
    pub fn face_neighbors(&self) -> Vec<LatticeIndex<D>> {
        let mut out = Vec::with_capacity(2 * D);
        for a in 0..D {
            for s in [-1i64, 1i64] {
                let mut k = self.0;
                k[a] += s;
                out.push(LatticeIndex(k));
            }
        }
        out
    }
}

/// Computational tube radius: the farthest a stencil of interpolation
/// degree `p` and difference radius `q` can reach from a point at the edge
/// of the tube, so every referenced cell is itself in the tube.
pub fn tube_radius(dx: f64, d: usize, p: usize, q: usize) -> f64 {
    let half = (p as f64 + 1.0) / 2.0;
    dx * ((d as f64 - 1.0) * half * half + (q as f64 + half) * (q as f64 + half)).sqrt()
}

/// Construction parameters for [`SparseGrid::build`].
#[derive(Clone, Debug)]
pub struct GridParams<const D: usize> {
    pub dx: f64,
    /// Interpolation degree of the closest point extension.
    pub p: usize,
    /// Radius of the finite-difference stencil (1 for the second-order
    /// Laplacian).
    pub q: usize,
    pub origin: Point<D>,
    pub max_cells: usize,
}

impl<const D: usize> GridParams<D> {
    pub fn new(dx: f64, p: usize, q: usize) -> Self {
        GridParams {
            dx,
            p,
            q,
            origin: Point::<D>::zeros(),
            max_cells: MAX_CELLS,
        }
    }
}

/// Non-fatal observations made during construction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GridWarning {
    /// A later seed discovered cells the earlier seeds did not reach; the
    /// surface tube has several connected components.
    DisconnectedComponent { seed_index: usize },
}

/// The sparse tube: one degree of freedom per kept lattice cell, stored as
/// parallel arrays indexed by DOF id.
#[derive(Clone, Debug)]
pub struct SparseGrid<const D: usize> {
    pub dx: f64,
    pub p: usize,
    pub q: usize,
    pub origin: Point<D>,
    /// Tube radius used for the build.
    pub radius: f64,
    dof_of: HashMap<[i64; D], u32>,
    pub indices: Vec<LatticeIndex<D>>,
    pub cp_s: Vec<Point<D>>,
    pub dist_s: Vec<f64>,
    /// Closest point on the surface's geometric boundary, for open surfaces.
    pub cp_exterior: Option<Vec<Point<D>>>,
    /// DOF sits in the half-tube past the surface's geometric boundary.
    pub on_exterior_boundary: Vec<bool>,
    /// DOF is missing at least one face neighbor inside the tube.
    pub edge_of_tube: Vec<bool>,
    /// Closest point evaluations performed by the build (one per visited
    /// cell).
    pub cp_queries: usize,
    pub warnings: Vec<GridWarning>,
}

impl<const D: usize> SparseGrid<D> {
    pub fn n_dofs(&self) -> usize {
        self.indices.len()
    }

    pub fn dof_at(&self, idx: &LatticeIndex<D>) -> Option<u32> {
        self.dof_of.get(&idx.0).copied()
    }

    pub fn point_of(&self, dof: u32) -> Point<D> {
        self.indices[dof as usize].to_point(&self.origin, self.dx)
    }

    /// Builds the tube by breadth-first search from `seeds` (surface points;
    /// pass an empty slice to use a sample supplied by the shape itself).
    pub fn build(
        surface: &Shape<D>,
        params: &GridParams<D>,
        seeds: &[Point<D>],
    ) -> Result<SparseGrid<D>, GridError> {
        let radius = tube_radius(params.dx, D, params.p, params.q);
        let auto;
        let seeds: &[Point<D>] = if seeds.is_empty() {
            auto = default_seeds(surface);
            &auto
        } else {
            seeds
        };

        let mut visited: HashSet<[i64; D]> = HashSet::new();
        let mut kept: Vec<(LatticeIndex<D>, Point<D>, f64)> = Vec::new();
        let mut queue: VecDeque<LatticeIndex<D>> = VecDeque::new();
        let mut cp_queries = 0usize;
        let mut warnings = Vec::new();

        for (si, seed) in seeds.iter().enumerate() {
            let q = surface.cp(seed).map_err(GridError::Geom)?;
            if q.dist > radius {
                return Err(GridError::SeedOutsideTube {
                    point: seed.as_slice().to_vec(),
                    dist: q.dist,
                    radius,
                });
            }
            let cell = LatticeIndex::nearest(&params.origin, params.dx, seed);
            if visited.contains(&cell.0) {
                continue;
            }
            if si > 0 && !kept.is_empty() {
                warnings.push(GridWarning::DisconnectedComponent { seed_index: si });
            }
            queue.push_back(cell);
            while let Some(idx) = queue.pop_front() {
                if !visited.insert(idx.0) {
                    continue;
                }
                if visited.len() > params.max_cells {
                    return Err(GridError::TubeOverflow {
                        max_cells: params.max_cells,
                    });
                }
                let x = idx.to_point(&params.origin, params.dx);
                cp_queries += 1;
                let q = match surface.cp(&x) {
                    Ok(q) => q,
                    // A degenerate (medial-axis) query outside the tube is
                    // simply not part of the tube; inside it is fatal.
                    Err(GeomError::AmbiguousClosestPoint { dist, .. }) if dist > radius => {
                        continue;
                    }
                    Err(e) => return Err(GridError::Geom(e)),
                };
                if q.dist <= radius {
                    kept.push((idx, q.cp, q.dist));
                    for nb in idx.face_neighbors() {
                        if !visited.contains(&nb.0) {
                            queue.push_back(nb);
                        }
                    }
                }
            }
        }

        // Canonical ids: lexicographic lattice order, independent of the
        // search order that found each cell.
        kept.sort_by_key(|entry| entry.0 .0);
        let n = kept.len();
        let mut dof_of = HashMap::with_capacity(n);
        let mut indices = Vec::with_capacity(n);
        let mut cp_s = Vec::with_capacity(n);
        let mut dist_s = Vec::with_capacity(n);
        for (i, (idx, cp, dist)) in kept.into_iter().enumerate() {
            dof_of.insert(idx.0, i as u32);
            indices.push(idx);
            cp_s.push(cp);
            dist_s.push(dist);
        }

        let mut grid = SparseGrid {
            dx: params.dx,
            p: params.p,
            q: params.q,
            origin: params.origin,
            radius,
            dof_of,
            indices,
            cp_s,
            dist_s,
            cp_exterior: None,
            on_exterior_boundary: vec![false; n],
            edge_of_tube: vec![false; n],
            cp_queries,
            warnings,
        };
        for i in 0..n {
            grid.edge_of_tube[i] = grid.indices[i]
                .face_neighbors()
                .iter()
                .any(|nb| !grid.dof_of.contains_key(&nb.0));
        }
        if surface.has_boundary() {
            grid.mark_boundary_subsets(surface)?;
        }
        Ok(grid)
    }

    /// Flags DOFs whose surface closest point lies on the surface's
    /// geometric boundary (the half-tube past an open edge). Also stores
    /// the boundary closest points. No-op for closed surfaces.
    pub fn mark_boundary_subsets(&mut self, surface: &Shape<D>) -> Result<(), GridError> {
        if !surface.has_boundary() {
            return Ok(());
        }
        let n = self.n_dofs();
        let mut cps = Vec::with_capacity(n);
        for i in 0..n {
            let x = self.point_of(i as u32);
            let qb = surface.cp_boundary(&x).map_err(GridError::Geom)?;
            self.on_exterior_boundary[i] =
                (self.cp_s[i] - qb.cp).norm() <= tol::BOUNDARY_COINCIDE;
            cps.push(qb.cp);
        }
        self.cp_exterior = Some(cps);
        Ok(())
    }

    /// Serializes the grid as a plain text table (fixture format).
    pub fn dump(&self) -> String {
        let mut out = String::new();
        out.push_str("cpm-tube 1\n");
        out.push_str(&format!("dim {}\n", D));
        out.push_str(&format!("dx {:.17e}\n", self.dx));
        out.push_str(&format!("p {}\nq {}\n", self.p, self.q));
        out.push_str("origin");
        for a in 0..D {
            out.push_str(&format!(" {:.17e}", self.origin[a]));
        }
        out.push('\n');
        out.push_str(&format!(
            "dofs {} boundary {}\n",
            self.n_dofs(),
            self.cp_exterior.is_some() as u8
        ));
        for i in 0..self.n_dofs() {
            for a in 0..D {
                out.push_str(&format!("{} ", self.indices[i].0[a]));
            }
            for a in 0..D {
                out.push_str(&format!("{:.17e} ", self.cp_s[i][a]));
            }
            out.push_str(&format!("{:.17e}", self.dist_s[i]));
            out.push_str(&format!(
                " {} {}",
                self.edge_of_tube[i] as u8, self.on_exterior_boundary[i] as u8
            ));
            if let Some(ext) = &self.cp_exterior {
                for v in ext[i].iter() {
                    out.push_str(&format!(" {v:.17e}"));
                }
            }
            out.push('\n');
        }
        out
    }

    /// Rebuilds a grid from [`SparseGrid::dump`] output.
    pub fn restore(text: &str) -> Result<SparseGrid<D>, GridError> {
        let bad = |msg: &str| GridError::BadDump(msg.to_string());
        let mut lines = text.lines();
        let mut expect = |prefix: &str| -> Result<Vec<String>, GridError> {
            let line = lines.next().ok_or_else(|| bad("truncated header"))?;
            let mut parts = line.split_whitespace();
            if parts.next() != Some(prefix) {
                return Err(bad(&format!("expected `{prefix}` line")));
            }
            Ok(parts.map(str::to_string).collect())
        };
        let version = expect("cpm-tube")?;
        if version.first().map(String::as_str) != Some("1") {
            return Err(bad("unsupported dump version"));
        }
        let dim: usize = expect("dim")?
            .first()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad("bad dim"))?;
        if dim != D {
            return Err(bad("dump dimension mismatch"));
        }
        let dx: f64 = expect("dx")?
            .first()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad("bad dx"))?;
        let p: usize = expect("p")?
            .first()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad("bad p"))?;
        let q: usize = expect("q")?
            .first()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad("bad q"))?;
        let ovals = expect("origin")?;
        if ovals.len() != D {
            return Err(bad("bad origin"));
        }
        let mut origin = Point::<D>::zeros();
        for a in 0..D {
            origin[a] = ovals[a].parse().map_err(|_| bad("bad origin value"))?;
        }
        let dofline = expect("dofs")?;
        let n: usize = dofline
            .first()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad("bad dof count"))?;
        let has_boundary = dofline.get(2).map(String::as_str) == Some("1");

        let mut grid = SparseGrid {
            dx,
            p,
            q,
            origin,
            radius: tube_radius(dx, D, p, q),
            dof_of: HashMap::with_capacity(n),
            indices: Vec::with_capacity(n),
            cp_s: Vec::with_capacity(n),
            dist_s: Vec::with_capacity(n),
            cp_exterior: if has_boundary {
                Some(Vec::with_capacity(n))
            } else {
                None
            },
            on_exterior_boundary: Vec::with_capacity(n),
            edge_of_tube: Vec::with_capacity(n),
            cp_queries: 0,
            warnings: Vec::new(),
        };
        for i in 0..n {
            let line = lines.next().ok_or_else(|| bad("truncated table"))?;
            let vals: Vec<&str> = line.split_whitespace().collect();
            let expected = 2 * D + 3 + if has_boundary { D } else { 0 };
            if vals.len() != expected {
                return Err(bad(&format!("row {i}: wrong column count")));
            }
            let mut idx = [0i64; D];
            let mut cp = Point::<D>::zeros();
            for a in 0..D {
                idx[a] = vals[a].parse().map_err(|_| bad("bad index"))?;
                cp[a] = vals[D + a].parse().map_err(|_| bad("bad cp"))?;
            }
            let dist: f64 = vals[2 * D].parse().map_err(|_| bad("bad dist"))?;
            let edge = vals[2 * D + 1] == "1";
            let on_b = vals[2 * D + 2] == "1";
            grid.dof_of.insert(idx, i as u32);
            grid.indices.push(LatticeIndex(idx));
            grid.cp_s.push(cp);
            grid.dist_s.push(dist);
            grid.edge_of_tube.push(edge);
            grid.on_exterior_boundary.push(on_b);
            if let Some(ext) = &mut grid.cp_exterior {
                let mut e = Point::<D>::zeros();
                for a in 0..D {
                    e[a] = vals[2 * D + 3 + a].parse().map_err(|_| bad("bad cp_ext"))?;
                }
                ext.push(e);
            }
        }
        Ok(grid)
    }
}

/// One line per entry of `(dx, dof count)`, with a fixed header.
pub fn dof_counts_csv(entries: &[(f64, usize)]) -> String {
    let mut out = String::from("dx,n_dofs\n");
    for (dx, n) in entries {
        out.push_str(&format!("{dx},{n}\n"));
    }
    out
}

/// Side label of a band DOF relative to the interior curve. `OnCurve`
/// marks DOFs whose surface foot is within the classification threshold
/// of the curve itself; such a DOF can serve either side and resolves to
/// `Plus` wherever a concrete side is required.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SideTag {
    Minus,
    Plus,
    OnCurve,
}

impl SideTag {
    pub fn flip(self) -> SideTag {
        match self {
            SideTag::Minus => SideTag::Plus,
            SideTag::Plus => SideTag::Minus,
            SideTag::OnCurve => SideTag::OnCurve,
        }
    }

    /// Single-character form for debug dumps.
    pub fn glyph(self) -> &'static str {
        match self {
            SideTag::Minus => "-",
            SideTag::Plus => "+",
            SideTag::OnCurve => "0",
        }
    }
}

/// Boundary-condition band around an interior curve, plus the wider cached
/// region used by stencil audits.
///
/// Sides are assigned by the boundary-condition module after construction;
/// until then every `side` entry is `None`.
#[derive(Clone, Debug)]
pub struct IbcBand<const D: usize> {
    /// Band slot -> colocated tube DOF id. Global band DOF ids start at
    /// `grid.n_dofs()`.
    pub base_dof: Vec<u32>,
    /// Tube DOF id -> band slot, inverse of `base_dof`.
    pub slot_of: HashMap<u32, u32>,
    /// Per tube DOF: closest point on the curve, cached when the curve is
    /// within twice the tube radius.
    pub cp_c: Vec<Option<Point<D>>>,
    /// Per tube DOF: distance to the curve; infinity outside the cached
    /// region.
    pub dist_c: Vec<f64>,
    /// Per tube DOF: closest curve endpoint, for open curves (same cached
    /// region).
    pub cp_c_end: Vec<Option<Point<D>>>,
    /// Per band slot: the DOF sits in the half-region past a curve endpoint.
    pub on_endpoint: Vec<bool>,
    /// Per band slot: side of the curve, filled in by side assignment.
    pub side: Vec<Option<SideTag>>,
}

impl<const D: usize> IbcBand<D> {
    pub fn n_band(&self) -> usize {
        self.base_dof.len()
    }

    /// Global DOF id of a band slot.
    pub fn band_dof_id(&self, grid: &SparseGrid<D>, slot: u32) -> u32 {
        grid.n_dofs() as u32 + slot
    }
}

/// Builds the band around `curve`: caches curve closest points for every
/// tube DOF within `2 * radius` of the curve and allocates one band DOF
/// for every tube DOF within `radius`.
pub fn build_ibc_band<const D: usize>(
    grid: &SparseGrid<D>,
    surface: &Shape<D>,
    curve: &Shape<D>,
) -> Result<IbcBand<D>, IbcError> {
    let n = grid.n_dofs();
    let mut band = IbcBand {
        base_dof: Vec::new(),
        slot_of: HashMap::new(),
        cp_c: vec![None; n],
        dist_c: vec![f64::INFINITY; n],
        cp_c_end: vec![None; n],
        on_endpoint: Vec::new(),
        side: Vec::new(),
    };

    // Seed cells from a dense sampling of the curve; the sampling also
    // verifies the curve actually lies on the surface.
    let samples = curve_samples(curve, grid.dx * 0.5).map_err(IbcError::Geom)?;
    let mut queue: VecDeque<u32> = VecDeque::new();
    let mut seen: HashSet<u32> = HashSet::new();
    for s in &samples {
        let on_s = surface.cp(s).map_err(IbcError::Geom)?;
        if on_s.dist > tol::CURVE_ON_SURFACE {
            return Err(IbcError::CurveOffSurface {
                point: s.as_slice().to_vec(),
                dist: on_s.dist,
                max: tol::CURVE_ON_SURFACE,
            });
        }
        let cell = LatticeIndex::nearest(&grid.origin, grid.dx, s);
        if let Some(dof) = grid.dof_at(&cell) {
            if seen.insert(dof) {
                queue.push_back(dof);
            }
        }
    }
    if queue.is_empty() {
        return Err(IbcError::BandEmpty);
    }

    let open_curve = curve.has_boundary();
    let reach = 2.0 * grid.radius;
    let mut in_band: Vec<u32> = Vec::new();
    while let Some(dof) = queue.pop_front() {
        let x = grid.point_of(dof);
        let qc = match curve.cp(&x) {
            Ok(q) => q,
            // A tube cell on the curve's medial axis has no unique nearest
            // curve point. Beyond the band radius only the distance matters
            // (consumers treat a missing foot as "leave this row alone"),
            // so record it and keep walking; inside the band the cell would
            // feed boundary stencils, so the ambiguity stays fatal.
            Err(GeomError::AmbiguousClosestPoint { dist, .. }) if dist > grid.radius => {
                if dist < reach {
                    band.dist_c[dof as usize] = dist;
                    for nb in grid.indices[dof as usize].face_neighbors() {
                        if let Some(nd) = grid.dof_at(&nb) {
                            if seen.insert(nd) {
                                queue.push_back(nd);
                            }
                        }
                    }
                }
                continue;
            }
            Err(e) => return Err(IbcError::Geom(e)),
        };
        if qc.dist >= reach {
            continue;
        }
        band.cp_c[dof as usize] = Some(qc.cp);
        band.dist_c[dof as usize] = qc.dist;
        if open_curve {
            let qe = curve.cp_boundary(&x).map_err(IbcError::Geom)?;
            band.cp_c_end[dof as usize] = Some(qe.cp);
        }
        if qc.dist <= grid.radius {
            in_band.push(dof);
        }
        for nb in grid.indices[dof as usize].face_neighbors() {
            if let Some(nd) = grid.dof_at(&nb) {
                if seen.insert(nd) {
                    queue.push_back(nd);
                }
            }
        }
    }

    // Canonical band slots: ascending tube DOF id.
    in_band.sort_unstable();
    for (slot, dof) in in_band.iter().enumerate() {
        band.slot_of.insert(*dof, slot as u32);
    }
    band.base_dof = in_band;
    band.on_endpoint = band
        .base_dof
        .iter()
        .map(|&dof| {
            if !open_curve {
                return false;
            }
            match (&band.cp_c[dof as usize], &band.cp_c_end[dof as usize]) {
                (Some(cp), Some(end)) => (cp - end).norm() <= tol::BOUNDARY_COINCIDE,
                _ => false,
            }
        })
        .collect();
    band.side = vec![None; band.base_dof.len()];
    Ok(band)
}

/// Default seed points when the caller does not supply any: one sample per
/// composite part, chosen on the shape.
pub fn default_seeds<const D: usize>(shape: &Shape<D>) -> Vec<Point<D>> {
    match shape {
        Shape::Composite(parts) => parts.iter().flat_map(default_seeds).collect(),
        other => vec![sample_point(other)],
    }
}

fn sample_point<const D: usize>(shape: &Shape<D>) -> Point<D> {
    match shape {
        Shape::Sphere { center, radius } => {
            let mut p = *center;
            p[0] += radius;
            p
        }
        Shape::Circle3 {
            center,
            radius,
            normal,
        } => {
            let u = in_plane_unit(normal);
            center + u * *radius
        }
        Shape::Arc3 {
            center,
            radius,
            ref_dir,
            ..
        } => center + ref_dir * *radius,
        Shape::Torus {
            center,
            major,
            minor,
        } => {
            let mut p = *center;
            p[0] += major + minor;
            p
        }
        Shape::SolidBox { min, max } => (min + max) * 0.5,
        Shape::Segment { a, .. } => *a,
        Shape::Points(pts) => pts[0],
        Shape::Polyline(p) => p.points[0],
        Shape::ParametricCurve(c) => (c.f)(c.t_range[0]),
        Shape::ParametricSurface(s) => {
            // Only reachable with D == 3; copy across the width mismatch.
            let p3 = (s.f)(s.u_range[0], s.v_range[0]);
            Point::<D>::from_iterator(p3.iter().copied())
        }
        Shape::Mesh(m) => Point::<D>::from_iterator(m.vertices[0].iter().copied()),
        Shape::LevelSet(_) | Shape::SignedDistance { .. } => {
            // No parametrization to evaluate; project a fixed probe list and
            // take the first that converges.
            let probes: [[f64; 3]; 5] = [
                [0.41, 0.33, 0.27],
                [1.0, 0.0, 0.0],
                [0.0, 1.0, 0.0],
                [0.0, 0.0, 1.0],
                [-0.73, 0.52, -0.31],
            ];
            for probe in probes {
                let mut x = Point::<D>::zeros();
                for a in 0..D {
                    x[a] = probe[a];
                }
                if let Ok(q) = shape.cp(&x) {
                    return q.cp;
                }
            }
            Point::<D>::zeros()
        }
        Shape::Composite(parts) => sample_point(&parts[0]),
    }
}

/// Any unit vector orthogonal to `n`.
fn in_plane_unit<const D: usize>(n: &Point<D>) -> Point<D> {
    // Pick the axis least aligned with n and orthogonalize it.
    let mut best = 0;
    for a in 1..D {
        if n[a].abs() < n[best].abs() {
            best = a;
        }
    }
    let mut e = Point::<D>::zeros();
    e[best] = 1.0;
    (e - n * n.dot(&e)).normalize()
}

/// Points along a curve shape with spacing at most `spacing`, used to seed
/// the band search and to verify the curve sits on the surface.
pub fn curve_samples<const D: usize>(
    curve: &Shape<D>,
    spacing: f64,
) -> Result<Vec<Point<D>>, GeomError> {
    let mut out = Vec::new();
    curve_samples_into(curve, spacing, &mut out)?;
    Ok(out)
}

fn curve_samples_into<const D: usize>(
    curve: &Shape<D>,
    spacing: f64,
    out: &mut Vec<Point<D>>,
) -> Result<(), GeomError> {
    match curve {
        Shape::Points(pts) => out.extend_from_slice(pts),
        Shape::Segment { a, b } => sample_segment(a, b, spacing, out),
        Shape::Polyline(p) => {
            let n = p.points.len();
            let last = if p.closed { n } else { n - 1 };
            for i in 0..last {
                sample_segment(&p.points[i], &p.points[(i + 1) % n], spacing, out);
            }
        }
        Shape::Circle3 {
            center,
            radius,
            normal,
        } => {
            let u = in_plane_unit(normal);
            let v = cross_d(normal, &u);
            let steps = arc_steps(2.0 * std::f64::consts::PI * radius, spacing);
            for k in 0..steps {
                let t = 2.0 * std::f64::consts::PI * k as f64 / steps as f64;
                out.push(center + u * (radius * t.cos()) + v * (radius * t.sin()));
            }
        }
        Shape::Arc3 {
            center,
            radius,
            normal,
            ref_dir,
            span,
        } => {
            let v = cross_d(normal, ref_dir);
            let steps = arc_steps(span * radius, spacing);
            for k in 0..=steps {
                let t = span * k as f64 / steps as f64;
                out.push(center + ref_dir * (radius * t.cos()) + v * (radius * t.sin()));
            }
        }
        Shape::ParametricCurve(c) => {
            // March the parameter, splitting steps until the chord length
            // drops under the target spacing.
            let [t0, t1] = c.t_range;
            let coarse = 512usize;
            let mut prev = (c.f)(t0);
            out.push(prev);
            for k in 1..=coarse {
                let t = t0 + (t1 - t0) * k as f64 / coarse as f64;
                let next = (c.f)(t);
                let chord = (next - prev).norm();
                let extra = (chord / spacing).ceil() as usize;
                if extra > 1 {
                    let ta = t0 + (t1 - t0) * (k - 1) as f64 / coarse as f64;
                    for j in 1..extra {
                        out.push((c.f)(ta + (t - ta) * j as f64 / extra as f64));
                    }
                }
                out.push(next);
                prev = next;
            }
        }
        Shape::Sphere { center, radius } if D == 2 => {
            let steps = arc_steps(2.0 * std::f64::consts::PI * radius, spacing);
            for k in 0..steps {
                let t = 2.0 * std::f64::consts::PI * k as f64 / steps as f64;
                let mut p = *center;
                p[0] += radius * t.cos();
                p[1] += radius * t.sin();
                out.push(p);
            }
        }
        Shape::Composite(parts) => {
            for part in parts {
                curve_samples_into(part, spacing, out)?;
            }
        }
        other => {
            return Err(GeomError::InvalidShape(format!(
                "{:?} cannot be sampled as an interior curve",
                other
            )))
        }
    }
    Ok(())
}

fn sample_segment<const D: usize>(
    a: &Point<D>,
    b: &Point<D>,
    spacing: f64,
    out: &mut Vec<Point<D>>,
) {
    let len = (b - a).norm();
    let steps = (len / spacing).ceil().max(1.0) as usize;
    for k in 0..=steps {
        out.push(a + (b - a) * (k as f64 / steps as f64));
    }
}

fn arc_steps(length: f64, spacing: f64) -> usize {
    ((length / spacing).ceil() as usize).max(8)
}

/// Cross product lifted to the const-generic point type; only meaningful
/// for `D = 3` and unreachable otherwise.
fn cross_d<const D: usize>(a: &Point<D>, b: &Point<D>) -> Point<D> {
    assert!(D == 3, "cross product requires three dimensions");
    let mut out = Point::<D>::zeros();
    out[0] = a[1] * b[2] - a[2] * b[1];
    out[1] = a[2] * b[0] - a[0] * b[2];
    out[2] = a[0] * b[1] - a[1] * b[0];
    out
}
