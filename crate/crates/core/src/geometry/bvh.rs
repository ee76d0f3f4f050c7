//! Axis-aligned bounding-volume hierarchy over a [`TriangleMesh`].
//!
//! Built top-down by splitting each node at the median triangle centroid
//! along the longest centroid-extent axis. The tree is stored flat; the
//! root is node 0.

use super::query::{better, ray_triangle, triangle_distance_squared};
use super::{Aabb, GeometryError, Ray, TriangleMesh, Vec3};

pub const MAX_LEAF_SIZE: usize = 8;

/// Relative padding applied to leaf boxes so floating-point rounding in the
/// slab and box-distance tests can never cull a triangle that touches the query.
const BOX_PAD: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum BvhNode {
    Leaf { bounds: Aabb, start: usize, count: usize },
    Interior { bounds: Aabb, left: usize, right: usize },
}

impl BvhNode {
    pub fn bounds(&self) -> &Aabb {
        match self {
            BvhNode::Leaf { bounds, .. } | BvhNode::Interior { bounds, .. } => bounds,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bvh {
    nodes: Vec<BvhNode>,
    /// Triangle indices; leaves reference contiguous ranges.
    order: Vec<usize>,
}

impl Bvh {
    pub fn build(mesh: &TriangleMesh) -> Result<Bvh, GeometryError> {
        if mesh.is_empty() {
            return Err(GeometryError::EmptyMesh);
        }
        let centroids: Vec<Vec3> = (0..mesh.len()).map(|i| mesh.centroid(i)).collect();
        let mut bvh = Bvh { nodes: Vec::with_capacity(2 * mesh.len() / MAX_LEAF_SIZE + 1), order: (0..mesh.len()).collect() };
        bvh.build_node(mesh, &centroids, 0, mesh.len());
        Ok(bvh)
    }

    fn build_node(&mut self, mesh: &TriangleMesh, centroids: &[Vec3], start: usize, end: usize) -> usize {
        let slot = self.nodes.len();
        let count = end - start;
        if count <= MAX_LEAF_SIZE {
            let bounds = self.order[start..end]
                .iter()
                .flat_map(|&t| mesh.triangle(t))
                .fold(Aabb::EMPTY, Aabb::grow);
            self.nodes.push(BvhNode::Leaf { bounds: pad(bounds), start, count });
            return slot;
        }
        let cbounds = Aabb::from_points(self.order[start..end].iter().map(|&t| centroids[t]));
        let axis = cbounds.longest_axis();
        self.order[start..end].sort_by(|&a, &b| centroids[a][axis].total_cmp(&centroids[b][axis]).then(a.cmp(&b)));
        let mid = start + count / 2;
        // placeholder, patched once both children exist
        self.nodes.push(BvhNode::Leaf { bounds: Aabb::EMPTY, start: 0, count: 0 });
        let left = self.build_node(mesh, centroids, start, mid);
        let right = self.build_node(mesh, centroids, mid, end);
        let bounds = self.nodes[left].bounds().union(*self.nodes[right].bounds());
        self.nodes[slot] = BvhNode::Interior { bounds, left, right };
        slot
    }

    pub fn nodes(&self) -> &[BvhNode] {
        &self.nodes
    }

    /// Triangle indices held by a leaf.
    pub fn leaf_triangles(&self, start: usize, count: usize) -> &[usize] {
        &self.order[start..start + count]
    }

    pub fn bounds(&self) -> Aabb {
        *self.nodes[0].bounds()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[BvhNode], i: usize) -> usize {
            match nodes[i] {
                BvhNode::Leaf { .. } => 0,
                BvhNode::Interior { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    /// Nearest `(t, triangle)` along the ray. Ties on `t` resolve to the
    /// lowest triangle index, matching the brute-force scan.
    pub(crate) fn nearest_hit(&self, ray: &Ray, mesh: &TriangleMesh) -> Option<(f64, usize)> {
        let origin = ray.origin();
        let inv = ray.inv_direction();
        let mut best: Option<(f64, usize)> = None;
        let mut stack: Vec<(usize, f64)> = Vec::with_capacity(64);
        if let Some(t) = self.nodes[0].bounds().ray_entry(origin, inv, ray.t_max()) {
            stack.push((0, t));
        }
        while let Some((node, entry)) = stack.pop() {
            if matches!(best, Some((bt, _)) if entry > bt) {
                continue;
            }
            match self.nodes[node] {
                BvhNode::Leaf { start, count, .. } => {
                    for &tri in &self.order[start..start + count] {
                        if let Some(t) = ray_triangle(ray, mesh.triangle(tri)) {
                            if better(t, tri, best) {
                                best = Some((t, tri));
                            }
                        }
                    }
                }
                BvhNode::Interior { left, right, .. } => {
                    let limit = best.map_or(ray.t_max(), |(bt, _)| bt);
                    let l = self.nodes[left].bounds().ray_entry(origin, inv, limit);
                    let r = self.nodes[right].bounds().ray_entry(origin, inv, limit);
                    match (l, r) {
                        (Some(tl), Some(tr)) => {
                            // far child first so the near one is popped next
                            if tl <= tr {
                                stack.push((right, tr));
                                stack.push((left, tl));
                            } else {
                                stack.push((left, tl));
                                stack.push((right, tr));
                            }
                        }
                        (Some(tl), None) => stack.push((left, tl)),
                        (None, Some(tr)) => stack.push((right, tr)),
                        (None, None) => {}
                    }
                }
            }
        }
        best
    }

    /// Squared distance from `p` to the nearest triangle.
    pub(crate) fn nearest_distance_squared(&self, p: Vec3, mesh: &TriangleMesh) -> f64 {
        let mut best = f64::INFINITY;
        let mut stack: Vec<(usize, f64)> = Vec::with_capacity(64);
        stack.push((0, self.nodes[0].bounds().distance_squared(p)));
        while let Some((node, lower)) = stack.pop() {
            if lower > best {
                continue;
            }
            match self.nodes[node] {
                BvhNode::Leaf { start, count, .. } => {
                    for &tri in &self.order[start..start + count] {
                        best = best.min(triangle_distance_squared(p, mesh.triangle(tri)));
                    }
                }
                BvhNode::Interior { left, right, .. } => {
                    let dl = self.nodes[left].bounds().distance_squared(p);
                    let dr = self.nodes[right].bounds().distance_squared(p);
                    if dl <= dr {
                        stack.push((right, dr));
                        stack.push((left, dl));
                    } else {
                        stack.push((left, dl));
                        stack.push((right, dr));
                    }
                }
            }
        }
        best
    }
}

fn pad(b: Aabb) -> Aabb {
    let scale = b.min.x.abs().max(b.min.y.abs()).max(b.min.z.abs())
        .max(b.max.x.abs()).max(b.max.y.abs()).max(b.max.z.abs());
    let eps = Vec3::splat(BOX_PAD * (1.0 + scale));
    Aabb { min: b.min - eps, max: b.max + eps }
}
