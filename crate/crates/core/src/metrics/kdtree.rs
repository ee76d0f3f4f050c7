//! Static 3-d tree with exact nearest-neighbour search.

use crate::geometry::Vec3;

#[derive(Debug, Clone)]
pub struct KdTree {
    /// points permuted into tree order; node i of a range is its median
    points: Vec<Vec3>,
    axes: Vec<u8>,
}

impl KdTree {
    pub fn build(points: &[Vec3]) -> KdTree {
        let mut pts = points.to_vec();
        let mut axes = vec![0u8; pts.len()];
        build_range(&mut pts, &mut axes);
        KdTree { points: pts, axes }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Squared distance to the closest stored point; infinity when empty.
    pub fn nearest_distance_squared(&self, q: Vec3) -> f64 {
        let mut best = f64::INFINITY;
        self.search(0, self.points.len(), q, &mut best);
        best
    }

    pub fn nearest_distance(&self, q: Vec3) -> f64 {
        self.nearest_distance_squared(q).sqrt()
    }

    fn search(&self, lo: usize, hi: usize, q: Vec3, best: &mut f64) {
        if lo >= hi {
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let p = self.points[mid];
        *best = best.min(p.distance_squared(q));
        let axis = self.axes[mid] as usize;
        let diff = q[axis] - p[axis];
        let (near, far) = if diff < 0.0 { ((lo, mid), (mid + 1, hi)) } else { ((mid + 1, hi), (lo, mid)) };
        self.search(near.0, near.1, q, best);
        // every point on the far side is at least |diff| away along `axis`
        if diff * diff <= *best {
            self.search(far.0, far.1, q, best);
        }
    }
}

fn build_range(pts: &mut [Vec3], axes: &mut [u8]) {
    if pts.len() <= 1 {
        return;
    }
    let lo = pts.iter().fold(Vec3::splat(f64::INFINITY), |a, &p| a.min(p));
    let hi = pts.iter().fold(Vec3::splat(f64::NEG_INFINITY), |a, &p| a.max(p));
    let e = hi - lo;
    let axis = if e.x >= e.y && e.x >= e.z { 0 } else if e.y >= e.z { 1 } else { 2 };
    let mid = pts.len() / 2;
    pts.select_nth_unstable_by(mid, |a, b| a[axis].total_cmp(&b[axis]));
    axes[mid] = axis as u8;
    let (left, rest) = pts.split_at_mut(mid);
    let (left_axes, rest_axes) = axes.split_at_mut(mid);
    build_range(left, left_axes);
    build_range(&mut rest[1..], &mut rest_axes[1..]);
}
