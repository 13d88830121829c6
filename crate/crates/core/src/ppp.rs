//! Homogeneous unit-intensity Poisson point processes: eager ball sampling,
//! a lazily realized cell-hashed field, and region resampling.

use std::collections::{HashMap, HashSet};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{invalid, Error, Result};
use crate::geom::{ball_volume, Lens, Vector};
use crate::index::{CellKey, CellStore, DenseGrid};
use crate::rng::{cell_seed, poisson_count, rng_from_seed, stream_rng, uniform_in_ball, SimRng};

static DUPLICATE_REDRAWS: AtomicU64 = AtomicU64::new(0);

/// Number of coordinate collisions redrawn by the samplers since process
/// start.
pub fn duplicate_redraws() -> u64 {
    DUPLICATE_REDRAWS.load(Ordering::Relaxed)
}

type Bits = SmallVec<[u64; 4]>;

fn bits(v: &Vector) -> Bits {
    v.coords().iter().map(|c| c.to_bits()).collect()
}

/// A finite point configuration with stable identifiers (`>= 1`; id `0`
/// is reserved for the origin).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointSet {
    dim: usize,
    points: Vec<Vector>,
    ids: Vec<u64>,
}

impl PointSet {
    pub fn new(dim: usize, points: Vec<Vector>) -> Result<Self> {
        let ids = (1..=points.len() as u64).collect();
        Self::with_ids(dim, points, ids)
    }

    pub fn with_ids(dim: usize, points: Vec<Vector>, ids: Vec<u64>) -> Result<Self> {
        if dim < 1 {
            return Err(invalid("dimension must be positive"));
        }
        if points.len() != ids.len() {
            return Err(invalid("points and ids differ in length"));
        }
        if let Some(p) = points.iter().find(|p| p.dim() != dim) {
            return Err(invalid(format!("point {p:?} does not have dimension {dim}")));
        }
        let mut seen_ids = HashSet::with_capacity(ids.len());
        for &id in &ids {
            if id == 0 || !seen_ids.insert(id) {
                return Err(invalid(format!("invalid or duplicate id {id}")));
            }
        }
        let mut seen = HashSet::with_capacity(points.len());
        for p in &points {
            if !seen.insert(bits(p)) {
                return Err(invalid(format!("duplicate point {p:?}")));
            }
        }
        Ok(Self { dim, points, ids })
    }

    pub fn empty(dim: usize) -> Self {
        Self { dim, points: Vec::new(), ids: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vector] {
        &self.points
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, &Vector)> {
        self.ids.iter().copied().zip(self.points.iter())
    }

    /// Applies `f` to every point, keeping ids.
    pub fn map_points(&self, f: impl Fn(&Vector) -> Vector) -> Self {
        Self {
            dim: self.dim,
            points: self.points.iter().map(f).collect(),
            ids: self.ids.clone(),
        }
    }

    /// Spatial index over this set; handles are indices into `points()`.
    pub fn index(&self) -> DenseGrid {
        DenseGrid::new(self.dim, &self.points)
    }
}

/// Draws `count` uniform points of `B(0, radius)` accepted by `keep`,
/// redrawing coordinate collisions.
fn draw_unique(
    rng: &mut SimRng,
    dim: usize,
    radius: f64,
    count: u64,
    seen: &mut HashSet<Bits>,
    out: &mut Vec<Vector>,
) {
    let origin = Vector::zeros(dim);
    for _ in 0..count {
        loop {
            let p = uniform_in_ball(rng, &origin, radius);
            if seen.insert(bits(&p)) {
                out.push(p);
                break;
            }
            DUPLICATE_REDRAWS.fetch_add(1, Ordering::Relaxed);
        }
    }
}

/// Poisson process of unit intensity on `B(0, radius)`: a
/// `Poisson(|B(0,R)|)` count of i.i.d. uniform points.
pub fn sample_ball(dim: usize, radius: f64, seed: u64) -> Result<PointSet> {
    if dim < 1 {
        return Err(invalid("dimension must be positive"));
    }
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(invalid(format!("radius must be positive, got {radius}")));
    }
    let mut rng = rng_from_seed(seed);
    let n = poisson_count(&mut rng, ball_volume(dim, radius)?);
    let mut seen = HashSet::with_capacity(n as usize);
    let mut points = Vec::with_capacity(n as usize);
    draw_unique(&mut rng, dim, radius, n, &mut seen, &mut points);
    PointSet::new(dim, points)
}

/// Bounded sampling region centred at the origin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RegionSpec {
    Ball { radius: f64 },
    Annulus { inner: f64, outer: f64 },
    /// `B(0, radius)` minus the closure of the listed lenses.
    BallMinusLenses { radius: f64, lenses: Vec<Lens> },
}

impl RegionSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = |r: f64| r >= 0.0 && r.is_finite();
        match self {
            RegionSpec::Ball { radius } | RegionSpec::BallMinusLenses { radius, .. } => {
                if !ok(*radius) {
                    return Err(invalid(format!("region radius must be finite and >= 0, got {radius}")));
                }
            }
            RegionSpec::Annulus { inner, outer } => {
                if !ok(*inner) || !ok(*outer) || inner > outer {
                    return Err(invalid(format!("bad annulus [{inner}, {outer})")));
                }
            }
        }
        Ok(())
    }

    /// Radius of the origin-centred ball enclosing the region.
    pub fn outer_radius(&self) -> f64 {
        match self {
            RegionSpec::Ball { radius } | RegionSpec::BallMinusLenses { radius, .. } => *radius,
            RegionSpec::Annulus { outer, .. } => *outer,
        }
    }

    pub fn contains(&self, p: &Vector) -> bool {
        let n2 = p.norm_sq();
        match self {
            RegionSpec::Ball { radius } => n2 < radius * radius,
            RegionSpec::Annulus { inner, outer } => n2 >= inner * inner && n2 < outer * outer,
            RegionSpec::BallMinusLenses { radius, lenses } => {
                n2 < radius * radius && !lenses.iter().any(|l| l.closure_contains(p))
            }
        }
    }
}

/// Unit-intensity Poisson field realized cell by cell on demand. The
/// content of a cell is a pure function of `(global_seed, cell)`.
#[derive(Debug)]
pub struct LazyField {
    dim: usize,
    cell_size: f64,
    global_seed: u64,
    cells: RwLock<HashMap<CellKey, Arc<[Vector]>>>,
}

impl LazyField {
    pub fn new(dim: usize, cell_size: f64, global_seed: u64) -> Result<Self> {
        if dim < 1 {
            return Err(invalid("dimension must be positive"));
        }
        if !(cell_size > 0.0) || !cell_size.is_finite() {
            return Err(invalid(format!("cell size must be positive, got {cell_size}")));
        }
        Ok(Self { dim, cell_size, global_seed, cells: RwLock::new(HashMap::new()) })
    }

    /// Field with the default unit cell size.
    pub fn with_seed(dim: usize, global_seed: u64) -> Self {
        Self::new(dim, 1.0, global_seed).expect("valid default field")
    }

    pub fn global_seed(&self) -> u64 {
        self.global_seed
    }

    pub fn realized_cell_count(&self) -> usize {
        self.cells.read().expect("cell cache poisoned").len()
    }

    fn generate_cell(&self, cell: &[i64]) -> Vec<Vector> {
        let mut rng = rng_from_seed(cell_seed(self.global_seed, cell));
        let cs = self.cell_size;
        let n = poisson_count(&mut rng, cs.powi(self.dim as i32));
        let mut seen = HashSet::with_capacity(n as usize);
        let mut out = Vec::with_capacity(n as usize);
        use rand::Rng;
        for _ in 0..n {
            loop {
                let p = Vector::from_finite(
                    cell.iter().map(|&k| (k as f64 + rng.random::<f64>()) * cs),
                );
                if seen.insert(bits(&p)) {
                    out.push(p);
                    break;
                }
                DUPLICATE_REDRAWS.fetch_add(1, Ordering::Relaxed);
            }
        }
        out
    }

    /// Points of one lattice cell, realizing it if needed. Concurrent
    /// callers may both generate the cell; the first insert wins and the
    /// contents are identical either way.
    pub fn cell(&self, cell: &[i64]) -> Arc<[Vector]> {
        if let Some(c) = self.cells.read().expect("cell cache poisoned").get(cell) {
            return c.clone();
        }
        let fresh: Arc<[Vector]> = self.generate_cell(cell).into();
        let mut map = self.cells.write().expect("cell cache poisoned");
        map.entry(cell.iter().copied().collect()).or_insert(fresh).clone()
    }

    /// Materializes every point of the field inside `region` as a point
    /// set, realizing exactly the cells that meet the region's bounding
    /// ball. Points are listed in cell order.
    pub fn realize(&self, region: &RegionSpec) -> Result<PointSet> {
        region.validate()?;
        let r = region.outer_radius();
        let cs = self.cell_size;
        let lo: Vec<i64> = (0..self.dim).map(|_| (-r / cs).floor() as i64).collect();
        let hi: Vec<i64> = (0..self.dim).map(|_| (r / cs).floor() as i64).collect();
        let mut cell = lo.clone();
        let mut points = Vec::new();
        let r2 = r * r;
        loop {
            let near2: f64 = cell
                .iter()
                .map(|&k| {
                    let (a, b) = (k as f64 * cs, (k + 1) as f64 * cs);
                    let g = if a > 0.0 { a } else if b < 0.0 { -b } else { 0.0 };
                    g * g
                })
                .sum();
            if near2 < r2 {
                for p in self.cell(&cell).iter() {
                    if region.contains(p) {
                        points.push(p.clone());
                    }
                }
            }
            let mut i = 0;
            loop {
                if i == self.dim {
                    return PointSet::new(self.dim, points);
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
}

impl CellStore for LazyField {
    fn dim(&self) -> usize {
        self.dim
    }

    fn cell_size(&self) -> f64 {
        self.cell_size
    }

    fn visit_cell(&self, cell: &[i64], f: &mut dyn FnMut(u32, &Vector)) {
        let pts = self.cell(cell);
        for (i, p) in pts.iter().enumerate() {
            f(i as u32, p);
        }
    }
}

/// All points of `field` inside `region`.
pub fn realize_cells(field: &LazyField, region: &RegionSpec) -> Result<PointSet> {
    field.realize(region)
}

/// Minimum acceptance rate tolerated by region resampling.
pub const MIN_ACCEPTANCE: f64 = 1e-4;

/// Replaces the points of `base` inside `region` by a fresh Poisson sample
/// of the region: a unit-intensity sample of the bounding ball thinned to
/// the region. Replacement points get new ids above the current maximum.
pub fn resample_region(base: &PointSet, region: &RegionSpec, seed: u64) -> Result<PointSet> {
    region.validate()?;
    let dim = base.dim();
    let mut points = Vec::with_capacity(base.len());
    let mut ids = Vec::with_capacity(base.len());
    let mut seen = HashSet::with_capacity(base.len());
    for (id, p) in base.iter() {
        if !region.contains(p) {
            points.push(p.clone());
            ids.push(id);
            seen.insert(bits(p));
        }
    }
    let r = region.outer_radius();
    if r > 0.0 {
        let mut rng = stream_rng(seed, 0);
        let n = poisson_count(&mut rng, ball_volume(dim, r)?);
        let mut drawn = Vec::with_capacity(n as usize);
        draw_unique(&mut rng, dim, r, n, &mut seen, &mut drawn);
        let kept: Vec<Vector> = drawn.into_iter().filter(|p| region.contains(p)).collect();
        if n >= 1000 && (kept.len() as f64) < MIN_ACCEPTANCE * n as f64 {
            return Err(Error::Sampling(format!(
                "acceptance rate {} below {MIN_ACCEPTANCE}",
                kept.len() as f64 / n as f64
            )));
        }
        let first = base.ids().iter().copied().max().unwrap_or(0) + 1;
        ids.extend((first..).take(kept.len()));
        points.extend(kept);
    }
    PointSet::with_ids(dim, points, ids)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_ball_is_deterministic() {
        let a = sample_ball(2, 10.0, 42).unwrap();
        let b = sample_ball(2, 10.0, 42).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, sample_ball(2, 10.0, 43).unwrap());
        assert!(a.points().iter().all(|p| p.norm() < 10.0));
    }

    #[test]
    fn sample_ball_rejects_bad_radius() {
        assert!(sample_ball(2, 0.0, 1).is_err());
        assert!(sample_ball(2, -1.0, 1).is_err());
    }

    #[test]
    fn tiny_ball_is_almost_always_empty() {
        let nonempty = (0..200).filter(|&s| !sample_ball(2, 1e-4, s).unwrap().is_empty()).count();
        assert!(nonempty <= 1);
    }

    #[test]
    fn mean_count_matches_volume() {
        let vol = 100.0 * std::f64::consts::PI;
        let total: usize = (0..1000).map(|s| sample_ball(2, 10.0, s).unwrap().len()).sum();
        let mean = total as f64 / 1000.0;
        assert!((mean - vol).abs() < 3.0 * (vol / 1000.0).sqrt(), "mean {mean}");
    }

    #[test]
    fn cells_are_reproducible() {
        let f = LazyField::with_seed(3, 9);
        let g = LazyField::with_seed(3, 9);
        let a = f.cell(&[1, -2, 3]);
        assert_eq!(&*a, &*g.cell(&[1, -2, 3]));
        assert_eq!(&*a, &*f.cell(&[1, -2, 3]));
        assert!(a.iter().all(|p| (1.0..2.0).contains(&p[0]) && (-2.0..-1.0).contains(&p[1])));
    }

    #[test]
    fn overlapping_realizations_agree() {
        let f = LazyField::with_seed(2, 5);
        let big = f.realize(&RegionSpec::Ball { radius: 8.0 }).unwrap();
        let fresh = LazyField::with_seed(2, 5);
        let ring = fresh.realize(&RegionSpec::Annulus { inner: 3.0, outer: 10.0 }).unwrap();
        let in_big: HashSet<Bits> = big.points().iter().map(bits).collect();
        let overlap: Vec<_> = ring.points().iter().filter(|p| p.norm() < 8.0).collect();
        assert!(!overlap.is_empty());
        assert!(overlap.iter().all(|p| in_big.contains(&bits(p))));
        let expected = big.points().iter().filter(|p| p.norm() >= 3.0).count();
        assert_eq!(overlap.len(), expected);
    }

    #[test]
    fn unbounded_region_rejected() {
        let f = LazyField::with_seed(2, 5);
        assert!(f.realize(&RegionSpec::Ball { radius: f64::INFINITY }).is_err());
    }

    #[test]
    fn resample_empty_region_keeps_base() {
        let base = sample_ball(2, 5.0, 1).unwrap();
        let out = resample_region(&base, &RegionSpec::Ball { radius: 0.0 }, 3).unwrap();
        assert_eq!(out, base);
    }

    #[test]
    fn resample_whole_window_is_fresh() {
        let base = sample_ball(2, 5.0, 1).unwrap();
        let out = resample_region(&base, &RegionSpec::Ball { radius: 5.0 }, 3).unwrap();
        let old: HashSet<Bits> = base.points().iter().map(bits).collect();
        assert!(out.points().iter().all(|p| !old.contains(&bits(p))));
        assert!(out.points().iter().all(|p| p.norm() < 5.0));
    }

    #[test]
    fn resample_avoids_excluded_lenses() {
        let base = sample_ball(2, 6.0, 2).unwrap();
        let lens = Lens::new([4.0, 0.0].into(), 2.0).unwrap();
        let region = RegionSpec::BallMinusLenses { radius: 5.0, lenses: vec![lens.clone()] };
        for seed in 0..20 {
            let out = resample_region(&base, &region, seed).unwrap();
            let fresh: Vec<_> = out
                .iter()
                .filter(|(id, _)| *id > base.len() as u64)
                .map(|(_, p)| p)
                .collect();
            assert!(fresh.iter().all(|p| !lens.contains(p) && p.norm() < 5.0));
            // Points of the base inside the excluded lens survive untouched.
            let kept_in_lens = out.points().iter().filter(|p| lens.contains(p)).count();
            let base_in_lens = base.points().iter().filter(|p| lens.contains(p)).count();
            assert_eq!(kept_in_lens, base_in_lens);
        }
    }
}
