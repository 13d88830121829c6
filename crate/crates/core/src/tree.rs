//! Radial spanning tree construction and the structural statistics computed
//! on it.
//!
//! Every vertex `x` of a sample of `B(0, R)` is linked to `Ψ(x)`, the
//! nearest sampled point strictly closer to the origin (or the origin
//! itself). `Ψ(x)` only depends on points of norm `< ‖x‖`, so the tree built
//! on a ball sample is exactly the restriction of the infinite-process tree:
//! no boundary correction is needed.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::geom::Vector;
use crate::index::{constrained_nearest, CellStore, Nearest};
use crate::ppp::PointSet;

/// Parent of a vertex: the origin sentinel or another vertex (by index).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Parent {
    Origin,
    Vertex(usize),
}

/// The tree over a point set plus the origin.
#[derive(Clone, Debug, PartialEq)]
pub struct RstTree {
    vertices: PointSet,
    parent: Vec<Parent>,
}

/// Id used for the origin in exported files.
pub const ORIGIN_ID: u64 = 0;

/// `Ψ(x)` against an arbitrary cell store.
pub fn psi<S: CellStore + ?Sized>(x: &Vector, points: &S) -> Vector {
    constrained_nearest(points, x).into_vector(points.dim())
}

/// Builds the tree on `points`, one grid query per vertex.
pub fn build_rst(points: &PointSet) -> RstTree {
    let grid = points.index();
    let parent = points
        .points()
        .iter()
        .map(|p| match constrained_nearest(&grid, p) {
            Nearest::Origin => Parent::Origin,
            Nearest::Point { handle, .. } => Parent::Vertex(handle as usize),
        })
        .collect();
    RstTree { vertices: points.clone(), parent }
}

/// A structural defect found by [`RstTree::validate`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum TreeDefect {
    /// `‖parent(x)‖ >= ‖x‖`.
    NormNotDecreasing { child: u64 },
    /// Parent chain from `child` never reaches the origin.
    Cycle { child: u64 },
    EdgeCount { edges: usize, vertices: usize },
}

impl RstTree {
    /// Assembles a tree from an explicit parent list, e.g. an imported file.
    pub fn from_parents(vertices: PointSet, parent: Vec<Parent>) -> Result<Self> {
        if parent.len() != vertices.len() {
            return Err(invalid("parent list length differs from vertex count"));
        }
        if parent.iter().any(|p| matches!(p, Parent::Vertex(i) if *i >= vertices.len())) {
            return Err(invalid("parent index out of range"));
        }
        Ok(Self { vertices, parent })
    }

    pub fn dim(&self) -> usize {
        self.vertices.dim()
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn vertices(&self) -> &PointSet {
        &self.vertices
    }

    pub fn parents(&self) -> &[Parent] {
        &self.parent
    }

    pub fn parent_point(&self, i: usize) -> Vector {
        match self.parent[i] {
            Parent::Origin => Vector::zeros(self.dim()),
            Parent::Vertex(j) => self.vertices.points()[j].clone(),
        }
    }

    pub fn parent_id(&self, i: usize) -> u64 {
        match self.parent[i] {
            Parent::Origin => ORIGIN_ID,
            Parent::Vertex(j) => self.vertices.ids()[j],
        }
    }

    /// `(child_id, parent_id)` pairs in vertex order.
    pub fn edges(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        (0..self.len()).map(|i| (self.vertices.ids()[i], self.parent_id(i)))
    }

    /// Children lists (by index); the origin's children are returned apart.
    pub fn children(&self) -> (Vec<usize>, Vec<Vec<usize>>) {
        let mut roots = Vec::new();
        let mut kids = vec![Vec::new(); self.len()];
        for (i, p) in self.parent.iter().enumerate() {
            match p {
                Parent::Origin => roots.push(i),
                Parent::Vertex(j) => kids[*j].push(i),
            }
        }
        (roots, kids)
    }

    /// Checks strict norm decrease along edges, acyclicity, connectivity
    /// to the origin and the edge count. Returns every defect found.
    pub fn validate(&self) -> Vec<TreeDefect> {
        let mut defects = Vec::new();
        let pts = self.vertices.points();
        let ids = self.vertices.ids();
        for i in 0..self.len() {
            if self.parent_point(i).norm() >= pts[i].norm() {
                defects.push(TreeDefect::NormNotDecreasing { child: ids[i] });
            }
        }
        // 0 = unvisited, 1 = on current chain, 2 = reaches origin,
        // 3 = leads into a cycle.
        let mut state = vec![0u8; self.len()];
        for (start, &id) in ids.iter().enumerate() {
            let mut chain = Vec::new();
            let mut cur = start;
            let ok = loop {
                match state[cur] {
                    2 => break true,
                    1 | 3 => break false,
                    _ => {}
                }
                state[cur] = 1;
                chain.push(cur);
                match self.parent[cur] {
                    Parent::Origin => break true,
                    Parent::Vertex(j) => cur = j,
                }
            };
            if !ok {
                defects.push(TreeDefect::Cycle { child: id });
            }
            for c in chain {
                state[c] = if ok { 2 } else { 3 };
            }
        }
        if self.parent.len() != self.vertices.len() {
            defects.push(TreeDefect::EdgeCount {
                edges: self.parent.len(),
                vertices: self.vertices.len(),
            });
        }
        defects
    }

    /// Vertex indices sorted so that every parent precedes its children.
    fn norm_order(&self) -> Vec<usize> {
        let pts = self.vertices.points();
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| pts[a].norm_sq().total_cmp(&pts[b].norm_sq()));
        order
    }
}

/// Histogram of in-degrees over all vertices plus the origin.
pub fn in_degree_histogram(tree: &RstTree) -> BTreeMap<usize, usize> {
    let mut deg = vec![0usize; tree.len()];
    let mut origin = 0usize;
    for p in tree.parents() {
        match p {
            Parent::Origin => origin += 1,
            Parent::Vertex(j) => deg[*j] += 1,
        }
    }
    let mut hist = BTreeMap::new();
    *hist.entry(origin).or_insert(0) += 1;
    for d in deg {
        *hist.entry(d).or_insert(0) += 1;
    }
    hist
}

/// Per-vertex maximal angle between the vertex and any member of its
/// subtree.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StraightnessRecord {
    pub vertex_id: u64,
    pub norm: f64,
    pub max_angle: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StraightnessProfile {
    pub records: Vec<StraightnessRecord>,
}

impl StraightnessProfile {
    /// Ids of vertices whose subtree leaves the cone of aperture
    /// `‖u‖^(−1/2 + ε)` around `u`.
    pub fn violations(&self, epsilon: f64) -> Vec<u64> {
        self.records
            .iter()
            .filter(|r| r.max_angle > r.norm.powf(-0.5 + epsilon))
            .map(|r| r.vertex_id)
            .collect()
    }

    /// Median of `max_angle` over vertices with `lo <= ‖u‖ < hi`.
    pub fn band_median(&self, lo: f64, hi: f64) -> Option<f64> {
        let mut v: Vec<f64> = self
            .records
            .iter()
            .filter(|r| r.norm >= lo && r.norm < hi)
            .map(|r| r.max_angle)
            .collect();
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        let m = v.len() / 2;
        Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
    }

    /// Fraction of unit directions in a coarse partition of the sphere
    /// that contain at least one vertex of norm `>= min_norm`. Descriptive
    /// only: on a finite window it has no pass/fail meaning.
    pub fn direction_coverage(&self, tree: &RstTree, min_norm: f64, bins: usize) -> f64 {
        if tree.dim() != 2 || bins == 0 {
            return f64::NAN;
        }
        let mut hit = vec![false; bins];
        for p in tree.vertices().points() {
            if p.norm() >= min_norm {
                let a = p[1].atan2(p[0]) + std::f64::consts::PI;
                let b = ((a / std::f64::consts::TAU) * bins as f64) as usize;
                hit[b.min(bins - 1)] = true;
            }
        }
        hit.iter().filter(|&&h| h).count() as f64 / bins as f64
    }
}

/// Computes the subtree angular spread of every vertex.
///
/// Each vertex pushes its unit direction up its ancestor chain, keeping at
/// every ancestor the smallest cosine seen. Cost is `O(Σ depth)` with
/// `O(n)` memory; one `acos` per vertex.
pub fn straightness_profile(tree: &RstTree) -> StraightnessProfile {
    let pts = tree.vertices().points();
    let units: Vec<Vector> = pts.iter().map(|p| p.scale(1.0 / p.norm())).collect();
    let mut min_cos = vec![1.0f64; tree.len()];
    for v in 0..tree.len() {
        let mut cur = tree.parents()[v];
        while let Parent::Vertex(u) = cur {
            let c = units[v].dot(&units[u]);
            if c < min_cos[u] {
                min_cos[u] = c;
            }
            cur = tree.parents()[u];
        }
    }
    let records = (0..tree.len())
        .map(|i| StraightnessRecord {
            vertex_id: tree.vertices().ids()[i],
            norm: pts[i].norm(),
            max_angle: min_cos[i].clamp(-1.0, 1.0).acos(),
        })
        .collect();
    StraightnessProfile { records }
}

fn orient(a: &[f64; 2], b: &[f64; 2], c: &[f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn segments_cross(a: &[f64; 2], b: &[f64; 2], c: &[f64; 2], d: &[f64; 2]) -> bool {
    let o1 = orient(a, b, c);
    let o2 = orient(a, b, d);
    let o3 = orient(c, d, a);
    let o4 = orient(c, d, b);
    o1 * o2 < 0.0 && o3 * o4 < 0.0
}

/// Proper crossings between tree edges in the plane, as pairs of child ids
/// `(a, b)` with `a < b`. Edges sharing an endpoint are never reported.
pub fn check_planarity(tree: &RstTree) -> Result<Vec<(u64, u64)>> {
    if tree.dim() != 2 {
        return Err(invalid(format!("planarity check requires d = 2, got {}", tree.dim())));
    }
    let n = tree.len();
    let pts = tree.vertices().points();
    let ids = tree.vertices().ids();
    let seg: Vec<([f64; 2], [f64; 2])> = (0..n)
        .map(|i| {
            let q = tree.parent_point(i);
            ([pts[i][0], pts[i][1]], [q[0], q[1]])
        })
        .collect();
    let endpoint = |i: usize| -> (Option<usize>, usize) {
        match tree.parents()[i] {
            Parent::Origin => (None, i),
            Parent::Vertex(j) => (Some(j), i),
        }
    };
    let cs = 2.0;
    let key = |x: f64| (x / cs).floor() as i64;
    let mut buckets: std::collections::HashMap<(i64, i64), Vec<usize>> =
        std::collections::HashMap::new();
    for (i, (a, b)) in seg.iter().enumerate() {
        let (x0, x1) = (key(a[0].min(b[0])), key(a[0].max(b[0])));
        let (y0, y1) = (key(a[1].min(b[1])), key(a[1].max(b[1])));
        for gx in x0..=x1 {
            for gy in y0..=y1 {
                buckets.entry((gx, gy)).or_default().push(i);
            }
        }
    }
    let mut found = std::collections::BTreeSet::new();
    for list in buckets.values() {
        for (s, &i) in list.iter().enumerate() {
            for &j in &list[s + 1..] {
                let (pi, ci) = endpoint(i);
                let (pj, cj) = endpoint(j);
                // Shared endpoints: common parent (or both at the origin),
                // or one edge's child being the other's parent.
                if pi == pj || pi == Some(cj) || pj == Some(ci) {
                    continue;
                }
                let (a, b) = &seg[i];
                let (c, d) = &seg[j];
                if segments_cross(a, b, c, d) {
                    let (x, y) = (ids[i].min(ids[j]), ids[i].max(ids[j]));
                    found.insert((x, y));
                }
            }
        }
    }
    Ok(found.into_iter().collect())
}

/// Rebuilds parents by scanning vertices in increasing norm; used to
/// confirm the construction does not depend on vertex order.
pub fn build_rst_by_norm_order(points: &PointSet) -> RstTree {
    let tree = build_rst(points);
    let order = tree.norm_order();
    let grid = points.index();
    let mut parent = vec![Parent::Origin; points.len()];
    for i in order {
        parent[i] = match constrained_nearest(&grid, &points.points()[i]) {
            Nearest::Origin => Parent::Origin,
            Nearest::Point { handle, .. } => Parent::Vertex(handle as usize),
        };
    }
    RstTree { vertices: points.clone(), parent }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(pts: &[[f64; 2]]) -> PointSet {
        PointSet::new(2, pts.iter().map(|&p| p.into()).collect()).unwrap()
    }

    #[test]
    fn single_point_links_to_origin() {
        let t = build_rst(&set(&[[1.0, 2.0]]));
        assert_eq!(t.parents(), &[Parent::Origin]);
        assert_eq!(in_degree_histogram(&t), BTreeMap::from([(0, 1), (1, 1)]));
    }

    #[test]
    fn two_point_chain() {
        let t = build_rst(&set(&[[1.0, 0.0], [2.0, 0.0]]));
        assert_eq!(t.parents(), &[Parent::Origin, Parent::Vertex(0)]);
        assert!(t.validate().is_empty());
        assert!(check_planarity(&t).unwrap().is_empty());
    }

    #[test]
    fn psi_example_through_tree_api() {
        let pts = set(&[[2.5, 0.5], [1.0, 1.0], [3.5, 0.0]]);
        let grid = pts.index();
        assert_eq!(psi(&[3.0, 0.0].into(), &grid).coords(), &[2.5, 0.5]);
    }

    #[test]
    fn straightness_examples() {
        // Leaf and collinear chain.
        let t = build_rst(&set(&[[1.0, 0.0], [2.0, 0.0]]));
        let prof = straightness_profile(&t);
        assert_eq!(prof.records[0].max_angle, 0.0);
        assert_eq!(prof.records[1].max_angle, 0.0);
        // u = (2,0) with child v = (2,1).
        let t = build_rst(&set(&[[2.0, 0.0], [2.0, 1.0]]));
        assert_eq!(t.parents()[1], Parent::Vertex(0));
        let prof = straightness_profile(&t);
        assert!((prof.records[0].max_angle - 0.5f64.atan()).abs() < 1e-12);
        assert!((prof.records[0].max_angle - 0.4636).abs() < 1e-4);
        assert_eq!(prof.records[1].max_angle, 0.0);
    }

    #[test]
    fn degree_sum_equals_vertex_count() {
        let pts = crate::ppp::sample_ball(2, 15.0, 4).unwrap();
        let t = build_rst(&pts);
        let hist = in_degree_histogram(&t);
        let sum: usize = hist.iter().map(|(d, c)| d * c).sum();
        assert_eq!(sum, t.len());
    }

    #[test]
    fn detects_corrupted_crossing() {
        // a=(1,1)->0 and b=(1,-1)->0 do not cross; rewire so that
        // c=(2,1) hangs from b and d=(2,-1) hangs from a.
        let pts = set(&[[1.0, 1.0], [1.0, -1.0], [2.0, 1.0], [2.0, -1.0]]);
        let good = build_rst(&pts);
        assert!(check_planarity(&good).unwrap().is_empty());
        let bad = RstTree::from_parents(
            pts,
            vec![Parent::Origin, Parent::Origin, Parent::Vertex(1), Parent::Vertex(0)],
        )
        .unwrap();
        assert_eq!(check_planarity(&bad).unwrap(), vec![(3, 4)]);
    }

    #[test]
    fn planarity_requires_dimension_two() {
        let pts = PointSet::new(3, vec![[1.0, 0.0, 0.0].into()]).unwrap();
        assert!(check_planarity(&build_rst(&pts)).is_err());
    }

    #[test]
    fn validate_reports_cycles_and_norm_increase() {
        let pts = set(&[[1.0, 0.0], [2.0, 0.0]]);
        let bad =
            RstTree::from_parents(pts, vec![Parent::Vertex(1), Parent::Vertex(0)]).unwrap();
        let defects = bad.validate();
        assert!(defects.contains(&TreeDefect::NormNotDecreasing { child: 1 }));
        assert!(defects.iter().any(|d| matches!(d, TreeDefect::Cycle { .. })));
    }

    #[test]
    fn order_independent_construction() {
        let pts = crate::ppp::sample_ball(2, 12.0, 8).unwrap();
        assert_eq!(build_rst(&pts), build_rst_by_norm_order(&pts));
    }
}
