//! Triangle meshes with accelerated closest-point queries.
//!
//! Queries walk a bounding-volume hierarchy (median split on the longest
//! axis, small leaves) and test candidate triangles exactly, so the result
//! is the true closest point on the mesh, not an approximation. Each query
//! also reports the triangle hit and its barycentric coordinates, which
//! field-transfer code uses to interpolate per-vertex data.

use super::CpQuery;
use crate::error::GeomError;
use crate::Point;
use std::collections::{HashMap, HashSet};

const LEAF_SIZE: usize = 8;
/// Triangles with twice-area below this are rejected by validation.
const DEGENERATE_AREA: f64 = 1e-14;
/// Barycentric components at or below this count as "on the edge" when
/// testing whether a contact lies on the mesh boundary.
const BARY_EDGE: f64 = 1e-9;

#[derive(Clone, Debug)]
struct BvhNode {
    lo: Point<3>,
    hi: Point<3>,
    // Interior nodes store child ids; leaves store a range into `order`.
    left: u32,
    right: u32,
    start: u32,
    count: u32,
}

#[derive(Clone, Debug)]
pub struct TriMesh {
    pub vertices: Vec<Point<3>>,
    pub tris: Vec<[u32; 3]>,
    nodes: Vec<BvhNode>,
    order: Vec<u32>,
    boundary_edges: Vec<[u32; 2]>,
    boundary_vertices: HashSet<u32>,
    boundary_edge_set: HashSet<(u32, u32)>,
}

impl TriMesh {
    pub fn new(vertices: Vec<Point<3>>, tris: Vec<[u32; 3]>) -> Self {
        let mut mesh = TriMesh {
            vertices,
            tris,
            nodes: Vec::new(),
            order: Vec::new(),
            boundary_edges: Vec::new(),
            boundary_vertices: HashSet::new(),
            boundary_edge_set: HashSet::new(),
        };
        mesh.build_boundary();
        mesh.build_bvh();
        mesh
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.tris.len()
    }

    pub fn has_boundary(&self) -> bool {
        !self.boundary_edges.is_empty()
    }

    pub fn boundary_edges(&self) -> &[[u32; 2]] {
        &self.boundary_edges
    }

    pub fn validate(&self) -> Result<(), GeomError> {
        if self.vertices.is_empty() || self.tris.is_empty() {
            return Err(GeomError::InvalidShape("mesh has no geometry".into()));
        }
        for (i, t) in self.tris.iter().enumerate() {
            for &v in t {
                if v as usize >= self.vertices.len() {
                    return Err(GeomError::InvalidShape(format!(
                        "triangle {i} references vertex {v} out of range"
                    )));
                }
            }
            let [a, b, c] = self.corners(t);
            if (b - a).cross(&(c - a)).norm() <= DEGENERATE_AREA {
                return Err(GeomError::DegenerateTriangle { tri: i });
            }
        }
        Ok(())
    }

    fn corners(&self, t: &[u32; 3]) -> [Point<3>; 3] {
        [
            self.vertices[t[0] as usize],
            self.vertices[t[1] as usize],
            self.vertices[t[2] as usize],
        ]
    }

    /// Edges used by exactly one triangle form the boundary loops.
    fn build_boundary(&mut self) {
        let mut counts: HashMap<(u32, u32), u32> = HashMap::new();
        for t in &self.tris {
            for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                let key = (a.min(b), a.max(b));
                *counts.entry(key).or_insert(0) += 1;
            }
        }
        let mut edges: Vec<[u32; 2]> = counts
            .iter()
            .filter(|&(_, &c)| c == 1)
            .map(|(&(a, b), _)| [a, b])
            .collect();
        edges.sort_unstable();
        for &[a, b] in &edges {
            self.boundary_vertices.insert(a);
            self.boundary_vertices.insert(b);
            self.boundary_edge_set.insert((a, b));
        }
        self.boundary_edges = edges;
    }

    fn tri_bounds(&self, ti: u32) -> (Point<3>, Point<3>) {
        let [a, b, c] = self.corners(&self.tris[ti as usize]);
        let mut lo = a;
        let mut hi = a;
        for p in [b, c] {
            for ax in 0..3 {
                lo[ax] = lo[ax].min(p[ax]);
                hi[ax] = hi[ax].max(p[ax]);
            }
        }
        (lo, hi)
    }

    fn build_bvh(&mut self) {
        self.order = (0..self.tris.len() as u32).collect();
        self.nodes.clear();
        if self.tris.is_empty() {
            return;
        }
        let centroids: Vec<Point<3>> = self
            .tris
            .iter()
            .map(|t| {
                let [a, b, c] = self.corners(t);
                (a + b + c) / 3.0
            })
            .collect();
        // Iterative construction over (node id, range) work items; ranges
        // index into `order`, which gets permuted in place.
        self.nodes.push(BvhNode {
            lo: Point::<3>::zeros(),
            hi: Point::<3>::zeros(),
            left: 0,
            right: 0,
            start: 0,
            count: 0,
        });
        let mut stack = vec![(0usize, 0usize, self.tris.len())];
        while let Some((node, start, end)) = stack.pop() {
            let mut lo = Point::<3>::from_element(f64::INFINITY);
            let mut hi = Point::<3>::from_element(f64::NEG_INFINITY);
            for &ti in &self.order[start..end] {
                let (tlo, thi) = self.tri_bounds(ti);
                for ax in 0..3 {
                    lo[ax] = lo[ax].min(tlo[ax]);
                    hi[ax] = hi[ax].max(thi[ax]);
                }
            }
            self.nodes[node].lo = lo;
            self.nodes[node].hi = hi;
            if end - start <= LEAF_SIZE {
                self.nodes[node].start = start as u32;
                self.nodes[node].count = (end - start) as u32;
                continue;
            }
            // Split at the centroid median along the widest axis.
            let mut axis = 0;
            for ax in 1..3 {
                if hi[ax] - lo[ax] > hi[axis] - lo[axis] {
                    axis = ax;
                }
            }
            let mid = (start + end) / 2;
            self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
                centroids[a as usize][axis]
                    .partial_cmp(&centroids[b as usize][axis])
                    .unwrap_or(std::cmp::Ordering::Equal)
            });
            let left = self.nodes.len();
            let right = left + 1;
            for _ in 0..2 {
                self.nodes.push(BvhNode {
                    lo: Point::<3>::zeros(),
                    hi: Point::<3>::zeros(),
                    left: 0,
                    right: 0,
                    start: 0,
                    count: 0,
                });
            }
            self.nodes[node].left = left as u32;
            self.nodes[node].right = right as u32;
            stack.push((left, start, mid));
            stack.push((right, mid, end));
        }
    }

    fn aabb_dist2(lo: &Point<3>, hi: &Point<3>, x: &Point<3>) -> f64 {
        let mut d2 = 0.0;
        for ax in 0..3 {
            let d = if x[ax] < lo[ax] {
                lo[ax] - x[ax]
            } else if x[ax] > hi[ax] {
                x[ax] - hi[ax]
            } else {
                0.0
            };
            d2 += d * d;
        }
        d2
    }

    /// Closest point on the mesh. Ties between triangles keep the lowest
    /// triangle id, so repeated queries are deterministic.
    pub fn cp(&self, x: &Point<3>) -> Result<CpQuery<3>, GeomError> {
        if self.nodes.is_empty() {
            return Err(GeomError::InvalidShape("mesh has no geometry".into()));
        }
        let mut best_d2 = f64::INFINITY;
        let mut best_cp = *x;
        let mut best_tri = usize::MAX;
        let mut best_bary = [0.0; 3];
        let mut stack = vec![0u32];
        while let Some(node_id) = stack.pop() {
            let node = &self.nodes[node_id as usize];
            if Self::aabb_dist2(&node.lo, &node.hi, x) >= best_d2 {
                continue;
            }
            if node.count > 0 {
                let mut leaf: Vec<u32> = self.order
                    [node.start as usize..(node.start + node.count) as usize]
                    .to_vec();
                leaf.sort_unstable();
                for ti in leaf {
                    let [a, b, c] = self.corners(&self.tris[ti as usize]);
                    let (cp, bary) = closest_point_triangle(x, &a, &b, &c);
                    let d2 = (x - cp).norm_squared();
                    if d2 < best_d2 || (d2 == best_d2 && (ti as usize) < best_tri) {
                        best_d2 = d2;
                        best_cp = cp;
                        best_tri = ti as usize;
                        best_bary = bary;
                    }
                }
            } else {
                // Visit the nearer child last so it pops first.
                let l = node.left;
                let r = node.right;
                let dl = Self::aabb_dist2(&self.nodes[l as usize].lo, &self.nodes[l as usize].hi, x);
                let dr = Self::aabb_dist2(&self.nodes[r as usize].lo, &self.nodes[r as usize].hi, x);
                if dl <= dr {
                    stack.push(r);
                    stack.push(l);
                } else {
                    stack.push(l);
                    stack.push(r);
                }
            }
        }
        let on_boundary = self.contact_on_boundary(best_tri, &best_bary);
        Ok(CpQuery::new(best_cp, best_d2.sqrt())
            .with_triangle(best_tri, best_bary)
            .boundary(on_boundary))
    }

    /// A contact lies on the mesh boundary when its barycentric support is
    /// an edge or vertex that belongs to a boundary loop.
    fn contact_on_boundary(&self, tri: usize, bary: &[f64; 3]) -> bool {
        if tri == usize::MAX || self.boundary_edges.is_empty() {
            return false;
        }
        let t = self.tris[tri];
        let zero: Vec<usize> = (0..3).filter(|&k| bary[k] <= BARY_EDGE).collect();
        match zero.len() {
            1 => {
                // Contact on the edge opposite the zero corner.
                let others: Vec<u32> = (0..3)
                    .filter(|&k| k != zero[0])
                    .map(|k| t[k])
                    .collect();
                let key = (others[0].min(others[1]), others[0].max(others[1]));
                self.boundary_edge_set.contains(&key)
            }
            2 => {
                // Contact at the corner left over.
                let corner = (0..3).find(|k| !zero.contains(k)).unwrap();
                self.boundary_vertices.contains(&t[corner])
            }
            _ => false,
        }
    }

    /// Closest point on the boundary loops (segment scan; boundary loops
    /// are tiny compared to the full mesh).
    pub fn cp_boundary(&self, x: &Point<3>) -> Result<CpQuery<3>, GeomError> {
        if self.boundary_edges.is_empty() {
            return Err(GeomError::InvalidShape(
                "mesh is closed and has no boundary".into(),
            ));
        }
        let mut best_d = f64::INFINITY;
        let mut best_cp = *x;
        for &[a, b] in &self.boundary_edges {
            let pa = self.vertices[a as usize];
            let pb = self.vertices[b as usize];
            let ab = pb - pa;
            let t = ((x - pa).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
            let cand = pa + ab * t;
            let d = (x - cand).norm();
            if d < best_d {
                best_d = d;
                best_cp = cand;
            }
        }
        Ok(CpQuery::new(best_cp, best_d).boundary(true))
    }
}

/// Exact closest point on a triangle, with barycentric coordinates of the
/// result (cp = u*a + v*b + w*c). Follows the standard Voronoi-region case
/// analysis on the triangle's features.
pub fn closest_point_triangle(
    p: &Point<3>,
    a: &Point<3>,
    b: &Point<3>,
    c: &Point<3>,
) -> (Point<3>, [f64; 3]) {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return (*a, [1.0, 0.0, 0.0]);
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return (*b, [0.0, 1.0, 0.0]);
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return (a + ab * v, [1.0 - v, v, 0.0]);
    }
    let cp_vec = p - c;
    let d5 = ab.dot(&cp_vec);
    let d6 = ac.dot(&cp_vec);
    if d6 >= 0.0 && d5 <= d6 {
        return (*c, [0.0, 0.0, 1.0]);
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return (a + ac * w, [1.0 - w, 0.0, w]);
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (b + (c - b) * w, [0.0, 1.0 - w, w]);
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    (a + ab * v + ac * w, [1.0 - v - w, v, w])
}
