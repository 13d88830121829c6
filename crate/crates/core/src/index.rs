//! Uniform-grid spatial indexing and the constrained nearest-neighbour
//! search behind the parent map `Ψ`.
//!
//! Both the eager [`DenseGrid`] and the lazily realized
//! [`LazyField`](crate::ppp::LazyField) expose their contents as integer
//! lattice cells through [`CellStore`]; every query in this module is
//! written once against that trait.

use std::sync::atomic::{AtomicU64, Ordering};

use smallvec::SmallVec;

use crate::geom::{Lens, Vector};

pub type CellKey = SmallVec<[i64; 4]>;

static TIE_EVENTS: AtomicU64 = AtomicU64::new(0);
static BOUNDARY_HITS: AtomicU64 = AtomicU64::new(0);

/// Number of exact distance ties met by `Ψ` queries since process start.
/// Ties have probability zero; a nonzero value flags degenerate input.
pub fn tie_events() -> u64 {
    TIE_EVENTS.load(Ordering::Relaxed)
}

/// Number of points found within rounding distance of a lens boundary by
/// lens counts since process start.
pub fn boundary_hits() -> u64 {
    BOUNDARY_HITS.load(Ordering::Relaxed)
}

/// Read access to points bucketed by lattice cell `floor(x / cell_size)`.
pub trait CellStore: Sync {
    fn dim(&self) -> usize;
    fn cell_size(&self) -> f64;
    /// Calls `f(handle, point)` for every point stored in `cell`. The handle
    /// is store-specific (a global index for eager grids).
    fn visit_cell(&self, cell: &[i64], f: &mut dyn FnMut(u32, &Vector));
}

#[inline]
pub fn cell_of(x: &Vector, cell_size: f64) -> CellKey {
    x.coords().iter().map(|c| (c / cell_size).floor() as i64).collect()
}

/// Squared distance from `p` to the box of `cell`.
#[inline]
fn box_dist_sq(p: &[f64], cell: &[i64], cs: f64) -> f64 {
    let mut acc = 0.0;
    for (x, &k) in p.iter().zip(cell) {
        let lo = k as f64 * cs;
        let hi = lo + cs;
        let g = if *x < lo {
            lo - x
        } else if *x > hi {
            x - hi
        } else {
            0.0
        };
        acc += g * g;
    }
    acc
}

#[inline]
fn origin_box_dist_sq(cell: &[i64], cs: f64) -> f64 {
    let mut acc = 0.0;
    for &k in cell {
        let lo = k as f64 * cs;
        let hi = lo + cs;
        let g = if lo > 0.0 {
            lo
        } else if hi < 0.0 {
            -hi
        } else {
            0.0
        };
        acc += g * g;
    }
    acc
}

/// Calls `f` on every offset of Chebyshev norm exactly `k` in `dim` dims.
fn for_each_ring_offset(dim: usize, k: i64, mut f: impl FnMut(&[i64])) {
    if k == 0 {
        f(&vec![0; dim]);
        return;
    }
    let mut off = vec![-k; dim];
    loop {
        if off.iter().any(|o| o.abs() == k) {
            f(&off);
        }
        let mut i = 0;
        loop {
            if i == dim {
                return;
            }
            if off[i] < k {
                off[i] += 1;
                break;
            }
            off[i] = -k;
            i += 1;
        }
    }
}

/// Result of a constrained nearest-neighbour query.
#[derive(Clone, Debug, PartialEq)]
pub enum Nearest {
    Origin,
    Point { handle: u32, point: Vector },
}

impl Nearest {
    pub fn into_vector(self, dim: usize) -> Vector {
        match self {
            Nearest::Origin => Vector::zeros(dim),
            Nearest::Point { point, .. } => point,
        }
    }
}

/// Minimizer of `‖y − x‖` over stored points with `‖y‖ < ‖x‖`, plus the
/// origin. Exact ties are broken lexicographically and counted.
///
/// The ring search stops once the ring's distance lower bound exceeds the
/// current best; since the origin is a candidate at distance `‖x‖` the
/// search always terminates.
pub fn constrained_nearest<S: CellStore + ?Sized>(store: &S, x: &Vector) -> Nearest {
    let xn2 = x.norm_sq();
    if xn2 == 0.0 {
        return Nearest::Origin;
    }
    let dim = store.dim();
    let cs = store.cell_size();
    let home = cell_of(x, cs);
    let mut best_d2 = xn2;
    let mut best = Nearest::Origin;
    let mut best_vec = Vector::zeros(dim);
    let mut cell: CellKey = home.clone();
    let mut k: i64 = 0;
    loop {
        if k >= 1 {
            let lb = (k - 1) as f64 * cs;
            if lb * lb > best_d2 {
                break;
            }
        }
        for_each_ring_offset(dim, k, |off| {
            for i in 0..dim {
                cell[i] = home[i] + off[i];
            }
            if box_dist_sq(x.coords(), &cell, cs) > best_d2 {
                return;
            }
            if origin_box_dist_sq(&cell, cs) >= xn2 {
                return;
            }
            store.visit_cell(&cell, &mut |handle, y| {
                if y.norm_sq() >= xn2 {
                    return;
                }
                let d2 = y.dist_sq(x);
                if d2 < best_d2 {
                    best_d2 = d2;
                    best_vec = y.clone();
                    best = Nearest::Point { handle, point: y.clone() };
                } else if d2 == best_d2 {
                    TIE_EVENTS.fetch_add(1, Ordering::Relaxed);
                    if y.lex_cmp(&best_vec) == std::cmp::Ordering::Less {
                        best_vec = y.clone();
                        best = Nearest::Point { handle, point: y.clone() };
                    }
                }
            });
        });
        k += 1;
    }
    best
}

/// Calls `f` for every stored point with `‖p − center‖ < radius`.
pub fn for_each_in_ball<S: CellStore + ?Sized>(
    store: &S,
    center: &Vector,
    radius: f64,
    mut f: impl FnMut(u32, &Vector),
) {
    if radius <= 0.0 {
        return;
    }
    let dim = store.dim();
    let cs = store.cell_size();
    let lo: CellKey = center
        .coords()
        .iter()
        .map(|c| ((c - radius) / cs).floor() as i64)
        .collect();
    let hi: CellKey = center
        .coords()
        .iter()
        .map(|c| ((c + radius) / cs).floor() as i64)
        .collect();
    let r2 = radius * radius;
    let mut cell = lo.clone();
    loop {
        if box_dist_sq(center.coords(), &cell, cs) < r2 {
            store.visit_cell(&cell, &mut |h, p| {
                if p.dist_sq(center) < r2 {
                    f(h, p);
                }
            });
        }
        let mut i = 0;
        loop {
            if i == dim {
                return;
            }
            if cell[i] < hi[i] {
                cell[i] += 1;
                break;
            }
            cell[i] = lo[i];
            i += 1;
        }
    }
}

/// Number of stored points in the open lens, with near-boundary points
/// reported separately.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LensCount {
    pub count: usize,
    pub boundary: usize,
}

pub fn count_in_lens<S: CellStore + ?Sized>(store: &S, lens: &Lens) -> LensCount {
    let mut out = LensCount::default();
    if lens.is_empty() {
        return out;
    }
    let cn = lens.center.norm();
    let tol = 1e-12 * cn.max(1.0);
    for_each_in_ball(store, &lens.center, lens.radius + tol, |_, p| {
        let dc = p.dist(&lens.center);
        let pn = p.norm();
        if (dc - lens.radius).abs() <= tol || (pn - cn).abs() <= tol {
            // The lens center itself is an exploration point and sits on
            // the norm boundary by construction; it is never counted.
            if p != &lens.center {
                out.boundary += 1;
                BOUNDARY_HITS.fetch_add(1, Ordering::Relaxed);
            }
        }
        if lens.contains(p) {
            out.count += 1;
        }
    });
    out
}

/// A source of Poisson points that the exploration process can query.
pub trait PointSource: Sync {
    fn dimension(&self) -> usize;
    /// `Ψ(x)`: the nearest point strictly closer to the origin, or the origin.
    fn psi(&self, x: &Vector) -> Vector;
    fn lens_count(&self, lens: &Lens) -> LensCount;
}

impl<S: CellStore> PointSource for S {
    fn dimension(&self) -> usize {
        self.dim()
    }

    fn psi(&self, x: &Vector) -> Vector {
        constrained_nearest(self, x).into_vector(self.dim())
    }

    fn lens_count(&self, lens: &Lens) -> LensCount {
        count_in_lens(self, lens)
    }
}

/// Immutable uniform grid over a fixed point list, stored in cell order
/// (compressed rows).
#[derive(Clone, Debug)]
pub struct DenseGrid {
    dim: usize,
    cell_size: f64,
    lo: CellKey,
    extent: CellKey,
    strides: Vec<usize>,
    starts: Vec<u32>,
    points: Vec<Vector>,
    handles: Vec<u32>,
}

impl DenseGrid {
    /// Builds a grid whose cells hold about one point on average for unit
    /// intensity samples, coarsened when the bounding box is sparse.
    pub fn new(dim: usize, points: &[Vector]) -> Self {
        let n = points.len();
        let (mut bmin, mut bmax) = (vec![0.0f64; dim], vec![0.0f64; dim]);
        for p in points {
            for i in 0..dim {
                bmin[i] = bmin[i].min(p[i]);
                bmax[i] = bmax[i].max(p[i]);
            }
        }
        let volume: f64 = (0..dim).map(|i| (bmax[i] - bmin[i]).max(1e-9)).product();
        let budget = (2 * n + 64) as f64;
        let mut cell_size = 1.0f64.max((volume / budget).powf(1.0 / dim as f64));
        // Guard against pathological elongated boxes.
        loop {
            let cells: f64 = (0..dim)
                .map(|i| (bmax[i] / cell_size).floor() - (bmin[i] / cell_size).floor() + 1.0)
                .product();
            if cells <= 4.0 * budget {
                break;
            }
            cell_size *= 1.5;
        }
        Self::with_cell_size(dim, points, cell_size)
    }

    pub fn with_cell_size(dim: usize, points: &[Vector], cell_size: f64) -> Self {
        let mut lo: CellKey = SmallVec::from_elem(0, dim);
        let mut hi: CellKey = SmallVec::from_elem(0, dim);
        for p in points {
            let k = cell_of(p, cell_size);
            for i in 0..dim {
                lo[i] = lo[i].min(k[i]);
                hi[i] = hi[i].max(k[i]);
            }
        }
        let extent: CellKey = (0..dim).map(|i| hi[i] - lo[i] + 1).collect();
        let mut strides = vec![1usize; dim];
        for i in 1..dim {
            strides[i] = strides[i - 1] * extent[i - 1] as usize;
        }
        let total = strides[dim - 1] * extent[dim - 1] as usize;
        let mut grid = Self {
            dim,
            cell_size,
            lo,
            extent,
            strides,
            starts: vec![0; total + 1],
            points: Vec::with_capacity(points.len()),
            handles: Vec::with_capacity(points.len()),
        };
        let lin: Vec<usize> = points
            .iter()
            .map(|p| grid.linear(&cell_of(p, cell_size)).expect("point inside its own bounds"))
            .collect();
        for &l in &lin {
            grid.starts[l + 1] += 1;
        }
        for i in 0..total {
            grid.starts[i + 1] += grid.starts[i];
        }
        let mut order: Vec<u32> = (0..points.len() as u32).collect();
        order.sort_by_key(|&i| lin[i as usize]);
        for i in order {
            grid.points.push(points[i as usize].clone());
            grid.handles.push(i);
        }
        grid
    }

    #[inline]
    fn linear(&self, cell: &[i64]) -> Option<usize> {
        let mut idx = 0usize;
        for (i, &c) in cell.iter().enumerate().take(self.dim) {
            let o = c - self.lo[i];
            if o < 0 || o >= self.extent[i] {
                return None;
            }
            idx += o as usize * self.strides[i];
        }
        Some(idx)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

impl CellStore for DenseGrid {
    fn dim(&self) -> usize {
        self.dim
    }

    fn cell_size(&self) -> f64 {
        self.cell_size
    }

    #[inline]
    fn visit_cell(&self, cell: &[i64], f: &mut dyn FnMut(u32, &Vector)) {
        if let Some(l) = self.linear(cell) {
            let (a, b) = (self.starts[l] as usize, self.starts[l + 1] as usize);
            for j in a..b {
                f(self.handles[j], &self.points[j]);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, uniform_in_ball};

    fn brute(points: &[Vector], x: &Vector) -> Vector {
        let mut best = Vector::zeros(x.dim());
        let mut bd = x.norm_sq();
        for p in points {
            if p.norm_sq() < x.norm_sq() {
                let d = p.dist_sq(x);
                if d < bd {
                    bd = d;
                    best = p.clone();
                }
            }
        }
        best
    }

    #[test]
    fn psi_example() {
        let pts: Vec<Vector> = vec![[2.5, 0.5].into(), [1.0, 1.0].into(), [3.5, 0.0].into()];
        let grid = DenseGrid::new(2, &pts);
        assert_eq!(grid.psi(&[3.0, 0.0].into()).coords(), &[2.5, 0.5]);
        let empty = DenseGrid::new(2, &[]);
        assert!(empty.psi(&[3.0, 0.0].into()).is_zero());
    }

    #[test]
    fn ring_offsets_cover_the_cube_once() {
        for dim in 1..=4 {
            let mut all = std::collections::HashSet::new();
            for k in 0..=2 {
                for_each_ring_offset(dim, k, |o| {
                    assert!(all.insert(o.to_vec()));
                });
            }
            assert_eq!(all.len(), 5usize.pow(dim as u32));
        }
    }

    #[test]
    fn grid_search_matches_brute_force() {
        let mut rng = stream_rng(17, 0);
        for dim in [2, 3, 4] {
            let c = Vector::zeros(dim);
            let pts: Vec<Vector> = (0..300).map(|_| uniform_in_ball(&mut rng, &c, 6.0)).collect();
            for cs in [0.37, 1.0, 2.5] {
                let grid = DenseGrid::with_cell_size(dim, &pts, cs);
                for _ in 0..200 {
                    let x = uniform_in_ball(&mut rng, &c, 7.0);
                    assert_eq!(grid.psi(&x), brute(&pts, &x));
                }
            }
        }
    }

    #[test]
    fn lens_count_matches_brute_force() {
        let mut rng = stream_rng(23, 0);
        let c = Vector::zeros(2);
        let pts: Vec<Vector> = (0..500).map(|_| uniform_in_ball(&mut rng, &c, 10.0)).collect();
        let grid = DenseGrid::new(2, &pts);
        for _ in 0..100 {
            let center = uniform_in_ball(&mut rng, &c, 10.0);
            let lens = Lens::new(center, rng_radius(&mut rng)).unwrap();
            let expected = pts.iter().filter(|p| lens.contains(p)).count();
            assert_eq!(grid.lens_count(&lens).count, expected);
        }
    }

    fn rng_radius(rng: &mut impl rand::Rng) -> f64 {
        rng.random_range(0.0..4.0)
    }
}
