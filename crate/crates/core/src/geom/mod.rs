//! Dimension-generic geometric primitives.
//!
//! Every ball in this module is open: membership tests use strict
//! inequalities.

use std::fmt;
use std::ops::{Add, Index, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{invalid, Result};

pub mod lemmas;

pub use lemmas::{
    alpha, check_flatness_bound, check_radial_progress, empty_ball_witness, EmptyBallInstance,
    FlatnessInstance, RadialProgressInstance,
};

/// A point of `R^d`. Coordinates are stored inline for `d <= 4`.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct Vector(SmallVec<[f64; 4]>);

impl Vector {
    /// Builds a vector, rejecting empty input and non-finite coordinates.
    pub fn new(coords: impl IntoIterator<Item = f64>) -> Result<Self> {
        let coords: SmallVec<[f64; 4]> = coords.into_iter().collect();
        if coords.is_empty() {
            return Err(invalid("vector must have at least one coordinate"));
        }
        if let Some(bad) = coords.iter().find(|c| !c.is_finite()) {
            return Err(invalid(format!("non-finite coordinate {bad}")));
        }
        Ok(Self(coords))
    }

    /// Builds a vector from coordinates already known to be finite.
    pub(crate) fn from_finite(coords: impl IntoIterator<Item = f64>) -> Self {
        let v = Self(coords.into_iter().collect());
        debug_assert!(v.0.iter().all(|c| c.is_finite()));
        v
    }

    pub fn zeros(dim: usize) -> Self {
        Self(SmallVec::from_elem(0.0, dim))
    }

    /// The `axis`-th standard basis vector.
    pub fn unit(dim: usize, axis: usize) -> Self {
        let mut v = Self::zeros(dim);
        v.0[axis] = 1.0;
        v
    }

    /// `norm * e_1`.
    pub fn on_first_axis(dim: usize, norm: f64) -> Self {
        let mut v = Self::zeros(dim);
        v.0[0] = norm;
        v
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    #[inline]
    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    #[inline]
    pub fn dot(&self, other: &Vector) -> f64 {
        self.0.iter().zip(other.0.iter()).map(|(a, b)| a * b).sum()
    }

    #[inline]
    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    #[inline]
    pub fn dist_sq(&self, other: &Vector) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    #[inline]
    pub fn dist(&self, other: &Vector) -> f64 {
        self.dist_sq(other).sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0.0)
    }

    pub fn scale(&self, s: f64) -> Vector {
        Vector(self.0.iter().map(|c| c * s).collect())
    }

    /// `self + s * other`.
    pub fn add_scaled(&self, s: f64, other: &Vector) -> Vector {
        Vector(self.0.iter().zip(other.0.iter()).map(|(a, b)| a + s * b).collect())
    }

    /// Lexicographic comparison of coordinates, used to break exact ties.
    pub fn lex_cmp(&self, other: &Vector) -> std::cmp::Ordering {
        for (a, b) in self.0.iter().zip(other.0.iter()) {
            match a.total_cmp(b) {
                std::cmp::Ordering::Equal => continue,
                ord => return ord,
            }
        }
        std::cmp::Ordering::Equal
    }

    /// Unsigned angle between two nonzero vectors, computed from a clamped
    /// cosine so collinear inputs never produce NaN.
    pub fn angle_to(&self, other: &Vector) -> f64 {
        let denom = self.norm() * other.norm();
        if denom == 0.0 {
            return 0.0;
        }
        (self.dot(other) / denom).clamp(-1.0, 1.0).acos()
    }
}

impl fmt::Debug for Vector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0.as_slice())
    }
}

impl Index<usize> for Vector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl<const N: usize> From<[f64; N]> for Vector {
    fn from(a: [f64; N]) -> Self {
        Vector::new(a).expect("literal vector must be finite and nonempty")
    }
}

impl Add<&Vector> for &Vector {
    type Output = Vector;
    fn add(self, rhs: &Vector) -> Vector {
        Vector(self.0.iter().zip(rhs.0.iter()).map(|(a, b)| a + b).collect())
    }
}

impl Sub<&Vector> for &Vector {
    type Output = Vector;
    fn sub(self, rhs: &Vector) -> Vector {
        Vector(self.0.iter().zip(rhs.0.iter()).map(|(a, b)| a - b).collect())
    }
}

impl Mul<f64> for &Vector {
    type Output = Vector;
    fn mul(self, s: f64) -> Vector {
        self.scale(s)
    }
}

impl Neg for &Vector {
    type Output = Vector;
    fn neg(self) -> Vector {
        self.scale(-1.0)
    }
}

fn same_dim(a: &Vector, b: &Vector) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(invalid(format!(
            "dimension mismatch: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    Ok(())
}

/// Radial lens `B(center, radius) ∩ B(0, ‖center‖)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lens {
    pub center: Vector,
    pub radius: f64,
}

impl Lens {
    pub fn new(center: Vector, radius: f64) -> Result<Self> {
        if !(radius >= 0.0) || !radius.is_finite() {
            return Err(invalid(format!("lens radius must be finite and >= 0, got {radius}")));
        }
        Ok(Self { center, radius })
    }

    /// Infimum of `‖x‖` over the lens: `max(‖center‖ − radius, 0)`.
    pub fn inner_reach(&self) -> f64 {
        (self.center.norm() - self.radius).max(0.0)
    }

    pub fn is_empty(&self) -> bool {
        self.radius == 0.0 || self.center.is_zero()
    }

    /// Open membership: `‖p − center‖ < radius` and `‖p‖ < ‖center‖`.
    pub fn contains(&self, p: &Vector) -> bool {
        p.dist_sq(&self.center) < self.radius * self.radius && p.norm_sq() < self.center.norm_sq()
    }

    /// Closed membership, used for the closure of history sets.
    pub fn closure_contains(&self, p: &Vector) -> bool {
        p.dist_sq(&self.center) <= self.radius * self.radius
            && p.norm_sq() <= self.center.norm_sq()
    }
}

/// Cone `{x : x·direction >= ‖x‖ cos(aperture)}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Cone {
    direction: Vector,
    aperture: f64,
}

impl Cone {
    pub fn new(direction: Vector, aperture: f64) -> Result<Self> {
        if (direction.norm() - 1.0).abs() > 1e-12 {
            return Err(invalid("cone direction must have unit norm"));
        }
        if !(0.0..=std::f64::consts::PI).contains(&aperture) {
            return Err(invalid(format!("cone aperture {aperture} outside [0, pi]")));
        }
        Ok(Self { direction, aperture })
    }

    /// Cone around the direction of a nonzero vector.
    pub fn around(axis: &Vector, aperture: f64) -> Result<Self> {
        let n = axis.norm();
        if n == 0.0 {
            return Err(invalid("cone axis must be nonzero"));
        }
        Self::new(axis.scale(1.0 / n), aperture)
    }

    pub fn direction(&self) -> &Vector {
        &self.direction
    }

    pub fn aperture(&self) -> f64 {
        self.aperture
    }

    pub fn contains(&self, x: &Vector) -> bool {
        x.dot(&self.direction) >= x.norm() * self.aperture.cos()
    }
}

/// Volume of the `d`-dimensional ball of radius `r`.
pub fn ball_volume(d: usize, r: f64) -> Result<f64> {
    if d == 0 {
        return Err(invalid("ball_volume requires d >= 1"));
    }
    if !(r >= 0.0) {
        return Err(invalid(format!("ball_volume requires r >= 0, got {r}")));
    }
    Ok(unit_ball_volume(d) * r.powi(d as i32))
}

/// `|B(0,1)|` via the recurrence `V_d = 2π/d · V_{d−2}`.
pub fn unit_ball_volume(d: usize) -> f64 {
    let (mut v, start) = if d.is_multiple_of(2) { (1.0, 2) } else { (2.0, 3) };
    let mut k = start;
    while k <= d {
        v *= 2.0 * std::f64::consts::PI / k as f64;
        k += 2;
    }
    v
}

/// Component of `u` orthogonal to `x`; returns `u` when `x = 0`.
pub fn perp_component(x: &Vector, u: &Vector) -> Result<Vector> {
    same_dim(x, u)?;
    Ok(perp_unchecked(x, u))
}

#[inline]
pub(crate) fn perp_unchecked(x: &Vector, u: &Vector) -> Vector {
    let xx = x.norm_sq();
    if xx == 0.0 {
        return u.clone();
    }
    u.add_scaled(-x.dot(u) / xx, x)
}

/// Axial symmetry about the line through `x`, applied inside `B(0, ‖x‖)`
/// only; identity outside.
pub fn reflect_in_ball(x: &Vector, y: &Vector) -> Result<Vector> {
    same_dim(x, y)?;
    if x.is_zero() {
        return Err(invalid("reflection axis must be nonzero"));
    }
    if y.norm_sq() < x.norm_sq() {
        let p = perp_unchecked(x, y);
        Ok(y.add_scaled(-2.0, &p))
    } else {
        Ok(y.clone())
    }
}
