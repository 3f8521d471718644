//! Polyline curves: a chain of segments, optionally closed.

use super::{analytic, CpQuery};
use crate::error::GeomError;
use crate::tol;
use crate::Point;

#[derive(Clone, Debug)]
pub struct Polyline<const D: usize> {
    pub points: Vec<Point<D>>,
    pub closed: bool,
}

impl<const D: usize> Polyline<D> {
    pub fn new(points: Vec<Point<D>>, closed: bool) -> Self {
        Polyline { points, closed }
    }

    pub fn validate(&self) -> Result<(), GeomError> {
        if self.points.len() < 2 {
            return Err(GeomError::InvalidShape(
                "polyline needs at least two points".into(),
            ));
        }
        for w in self.points.windows(2) {
            if (w[0] - w[1]).norm() <= 1e-14 {
                return Err(GeomError::InvalidShape(
                    "polyline has a zero-length segment".into(),
                ));
            }
        }
        Ok(())
    }

    fn segment_count(&self) -> usize {
        if self.closed {
            self.points.len()
        } else {
            self.points.len() - 1
        }
    }

    fn segment(&self, i: usize) -> (Point<D>, Point<D>) {
        let a = self.points[i];
        let b = self.points[(i + 1) % self.points.len()];
        (a, b)
    }

    /// Scans all segments; the earliest segment keeps ties so folds resolve
    /// deterministically. Linear scan: interior-boundary curves are short
    /// relative to tube sizes, and queries cache nothing.
    pub fn cp(&self, x: &Point<D>) -> Result<CpQuery<D>, GeomError> {
        let mut best: Option<CpQuery<D>> = None;
        for i in 0..self.segment_count() {
            let (a, b) = self.segment(i);
            let q = analytic::cp_segment(&a, &b, x);
            let better = match &best {
                None => true,
                Some(cur) => q.dist < cur.dist - tol::COMPOSITE_TIE * cur.dist.max(1.0),
            };
            if better {
                best = Some(q);
            }
        }
        let mut q = best.expect("validated polyline has segments");
        // Endpoint contact only counts as boundary contact for open chains.
        q.on_open_boundary = !self.closed
            && ((q.cp - self.points[0]).norm() <= 1e-12
                || (q.cp - self.points[self.points.len() - 1]).norm() <= 1e-12);
        Ok(q)
    }

    pub fn cp_boundary(&self, x: &Point<D>) -> Result<CpQuery<D>, GeomError> {
        if self.closed {
            return Err(GeomError::InvalidShape(
                "closed polyline has no boundary".into(),
            ));
        }
        analytic::cp_points(&[self.points[0], self.points[self.points.len() - 1]], x)
    }
}
