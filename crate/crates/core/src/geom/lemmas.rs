//! Constructive witnesses and checkers for the deterministic ball/lens
//! lemmas, together with the random instance generators used to fuzz them.
//!
//! All statements are in normalized coordinates: unit outer ball and base
//! point `−e_d`. Checkers take `SLACK` as additive tolerance.

use rand::Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::Vector;
use crate::error::{invalid, Error, Result};
use crate::rng::{uniform_direction, uniform_in_ball};

/// Additive slack absorbing floating-point rounding in every check.
pub const SLACK: f64 = 1e-12;

/// `α_ℓ = √(2 − ℓ) − 1` for `ℓ ∈ [0, 1]`.
pub fn alpha(ell: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&ell) {
        return Err(invalid(format!("alpha requires ell in [0,1], got {ell}")));
    }
    Ok((2.0 - ell).sqrt() - 1.0)
}

fn minus_e_d(dim: usize) -> Vector {
    Vector::unit(dim, dim - 1).scale(-1.0)
}

/// Empty ball inside the normalized lens `B⁰(−e_d, ℓ)`: center
/// `−(1 − ℓ + α_ℓ ℓ / 2) e_d`, radius `α_ℓ ℓ / 2`.
pub fn empty_ball_witness(dim: usize, ell: f64) -> Result<(Vector, f64)> {
    if dim < 1 {
        return Err(invalid("dimension must be positive"));
    }
    let a = alpha(ell)?;
    let radius = a * ell / 2.0;
    let center = minus_e_d(dim).scale(1.0 - ell + radius);
    Ok((center, radius))
}

/// Whether `1 + c·e_d <= 2ℓ²` holds for a configuration satisfying the
/// flatness preconditions. Returns a precondition error otherwise.
pub fn check_flatness_bound(c: &Vector, rho: f64, ell: f64) -> Result<bool> {
    let d = c.dim();
    let cn = c.norm();
    if cn < 1.0 - SLACK {
        return Err(Error::Precondition(format!("‖c‖ = {cn} < 1")));
    }
    if !(0.0..=0.5).contains(&ell) {
        return Err(Error::Precondition(format!("ell = {ell} outside [0, 1/2]")));
    }
    if !(rho >= 0.0) {
        return Err(Error::Precondition(format!("rho = {rho} < 0")));
    }
    if cn < rho + 1.0 - ell - SLACK {
        return Err(Error::Precondition(
            "B(c, rho) meets B(0, 1 - ell)".to_string(),
        ));
    }
    let to_base = c.dist(&minus_e_d(d));
    if to_base > rho + ell + SLACK {
        return Err(Error::Precondition(
            "closed balls around c and -e_d do not meet".to_string(),
        ));
    }
    Ok(1.0 + c[d - 1] <= 2.0 * ell * ell + SLACK)
}

/// Whether `1 − ‖x‖ >= (h − 1/2) ρ` holds for `x` in the (closed) lens
/// `B⁰(−e_d, ρ)` with height `1 + x·e_d >= hρ`.
pub fn check_radial_progress(x: &Vector, rho: f64, h: f64) -> Result<bool> {
    let d = x.dim();
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::Precondition(format!("rho = {rho} outside [0, 1]")));
    }
    if !(0.5..=1.0).contains(&h) {
        return Err(Error::Precondition(format!("h = {h} outside [1/2, 1]")));
    }
    if x.dist(&minus_e_d(d)) > rho + SLACK || x.norm() > 1.0 + SLACK {
        return Err(Error::Precondition("x outside the lens B⁰(-e_d, rho)".to_string()));
    }
    if 1.0 + x[d - 1] < h * rho - SLACK {
        return Err(Error::Precondition("height constraint 1 + x·e_d >= h·rho fails".to_string()));
    }
    Ok(1.0 - x.norm() >= (h - 0.5) * rho - SLACK)
}

/// A randomly generated lemma configuration that can be checked and
/// serialized for replay.
pub trait LemmaInstance: Sized + Serialize + DeserializeOwned + Clone + std::fmt::Debug {
    const NAME: &'static str;

    /// Draws one candidate; `None` means the draw was rejected.
    fn generate<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Option<Self>;

    /// `Ok(true)` when the lemma's conclusion holds.
    fn check(&self) -> Result<bool>;
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct EmptyBallInstance {
    pub ell: f64,
    pub c: Vector,
    pub rho: f64,
}

impl EmptyBallInstance {
    fn validate(&self) -> Result<()> {
        let d = self.c.dim();
        let cn = self.c.norm();
        if !(0.0..=1.0).contains(&self.ell) || !(self.rho >= 0.0) || cn < 1.0 - SLACK {
            return Err(Error::Precondition(format!("invalid instance {self:?}")));
        }
        if self.rho > cn - (1.0 - self.ell) + SLACK {
            return Err(Error::Precondition("B(c, rho) meets B(0, 1 - ell)".to_string()));
        }
        if self.rho > self.c.dist(&minus_e_d(d)) + SLACK {
            return Err(Error::Precondition("-e_d lies in B(c, rho)".to_string()));
        }
        Ok(())
    }
}

impl LemmaInstance for EmptyBallInstance {
    const NAME: &'static str = "empty-ball";

    /// `ℓ ~ U[0,1]`, `‖c‖ ~ U[1,3]` with uniform direction,
    /// `ρ = min(ℓ + ‖c‖ − 1, ‖c + e_d‖) · U[0,1]`. Never rejects.
    fn generate<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Option<Self> {
        let ell: f64 = rng.random();
        let norm = rng.random_range(1.0..=3.0);
        let c = uniform_direction(rng, dim).scale(norm);
        let cap = (ell + norm - 1.0).min(c.dist(&minus_e_d(dim)));
        let rho = cap * rng.random::<f64>();
        Some(Self { ell, c, rho })
    }

    fn check(&self) -> Result<bool> {
        self.validate()?;
        let d = self.c.dim();
        let (x, r) = empty_ball_witness(d, self.ell)?;
        let disjoint = x.dist(&self.c) >= self.rho + r - SLACK;
        let in_unit_ball = x.norm() + r <= 1.0 + SLACK;
        let in_base_ball = x.dist(&minus_e_d(d)) + r <= self.ell + SLACK;
        Ok(disjoint && in_unit_ball && in_base_ball)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct FlatnessInstance {
    pub c: Vector,
    pub rho: f64,
    pub ell: f64,
}

impl LemmaInstance for FlatnessInstance {
    const NAME: &'static str = "flatness";

    /// `ℓ ~ U[0,1/2]`; `‖c‖ = 1 + δ` with `δ ~ U[0,2]` (and `δ = 0` for a
    /// quarter of the draws, where the bound is tight) along a uniform
    /// direction; rejected unless some admissible `ρ` exists, then `ρ` is
    /// uniform on the admissible interval.
    fn generate<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Option<Self> {
        let ell = rng.random_range(0.0..=0.5);
        let excess = if rng.random_bool(0.25) {
            0.0
        } else {
            rng.random_range(0.0..=2.0)
        };
        let c = uniform_direction(rng, dim).scale(1.0 + excess);
        let to_base = c.dist(&minus_e_d(dim));
        let lo = (to_base - ell).max(0.0);
        let hi = excess + ell;
        if lo > hi {
            return None;
        }
        let rho = lo + (hi - lo) * rng.random::<f64>();
        Some(Self { c, rho, ell })
    }

    fn check(&self) -> Result<bool> {
        check_flatness_bound(&self.c, self.rho, self.ell)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct RadialProgressInstance {
    pub x: Vector,
    pub rho: f64,
    pub h: f64,
}

impl LemmaInstance for RadialProgressInstance {
    const NAME: &'static str = "radial-progress";

    /// `ρ ~ U[0,1]`, `h ~ U[1/2,1]`, `x` uniform in `B(−e_d, ρ)`; rejected
    /// unless `‖x‖ < 1` and `1 + x·e_d >= hρ`.
    fn generate<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Option<Self> {
        let rho: f64 = rng.random();
        let h = rng.random_range(0.5..=1.0);
        let x = uniform_in_ball(rng, &minus_e_d(dim), rho);
        if x.norm() >= 1.0 || 1.0 + x[dim - 1] < h * rho {
            return None;
        }
        Some(Self { x, rho, h })
    }

    fn check(&self) -> Result<bool> {
        check_radial_progress(&self.x, self.rho, self.h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, SimRng};

    #[test]
    fn alpha_values() {
        assert!((alpha(0.0).unwrap() - (2f64.sqrt() - 1.0)).abs() < 1e-15);
        assert!((alpha(0.0).unwrap() - 0.41421356).abs() < 1e-8);
        assert_eq!(alpha(1.0).unwrap(), 0.0);
        // √1.5 − 1 to 20 digits: 0.22474487139158904909
        assert!((alpha(0.5).unwrap() - 0.224_744_871_391_589_05).abs() < 1e-15);
        assert!(alpha(-0.1).is_err());
        assert!(alpha(1.5).is_err());
    }

    #[test]
    fn alpha_is_non_increasing() {
        let mut prev = alpha(0.0).unwrap();
        for i in 1..=1000 {
            let a = alpha(i as f64 / 1000.0).unwrap();
            assert!(a <= prev);
            prev = a;
        }
    }

    #[test]
    fn witness_examples() {
        let (c, r) = empty_ball_witness(3, 0.0).unwrap();
        assert_eq!(c.coords(), &[0.0, 0.0, -1.0]);
        assert_eq!(r, 0.0);

        let (c, r) = empty_ball_witness(2, 0.5).unwrap();
        // α = 0.2247448713915890, r = α/4, center = −(0.5 + r).
        assert!((r - 0.056_186_217_847_897_26).abs() < 1e-15);
        assert!((c[1] + 0.556_186_217_847_897_3).abs() < 1e-15);
        assert_eq!(c[0], 0.0);

        let (c, r) = empty_ball_witness(2, 1.0).unwrap();
        assert_eq!(r, 0.0);
        assert!(c.norm() == 0.0);
        assert!(empty_ball_witness(2, 1.1).is_err());
    }

    #[test]
    fn flatness_examples() {
        assert!(check_flatness_bound(&[0.0, -1.0].into(), 0.0, 0.0).unwrap());
        for &ell in &[0.05f64, 0.2, 0.35, 0.5] {
            // Extremal configuration: ‖c‖ = 1, ‖c + e_d‖ = 2ℓ, ρ = ℓ.
            let cos = 1.0 - 2.0 * ell * ell;
            let c: Vector = [(1.0 - cos * cos).sqrt(), -cos].into();
            assert!(((c.dist(&[0.0, -1.0].into())) - 2.0 * ell).abs() < 1e-12);
            assert!(((1.0 + c[1]) - 2.0 * ell * ell).abs() < 1e-12);
            assert!(check_flatness_bound(&c, ell, ell).unwrap());
        }
        assert!(matches!(
            check_flatness_bound(&[0.0, 0.5].into(), 0.1, 0.2),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn radial_progress_examples() {
        assert!(check_radial_progress(&[0.0, -1.0].into(), 0.0, 0.7).unwrap());
        assert!(check_radial_progress(&[0.1, -0.7].into(), 0.5, 0.5).unwrap());
        assert!(matches!(
            check_radial_progress(&[0.0, 0.0].into(), 0.5, 0.7),
            Err(Error::Precondition(_))
        ));
        assert!(check_radial_progress(&[0.0, -1.0].into(), 0.5, 0.4).is_err());
    }

    #[test]
    fn random_instances_at_pinned_parameters() {
        let mut rng: SimRng = stream_rng(99, 0);
        // Flatness at ℓ = 0.3: ‖c‖ = 1 + δ, ρ drawn from the admissible interval.
        let ell = 0.3;
        let mut accepted = 0;
        while accepted < 500 {
            let excess = rng.random_range(0.0..1.0);
            let c = uniform_direction(&mut rng, 2).scale(1.0 + excess);
            let lo = (c.dist(&minus_e_d(2)) - ell).max(0.0);
            let hi = excess + ell;
            if lo > hi {
                continue;
            }
            let rho = lo + (hi - lo) * rng.random::<f64>();
            assert!(check_flatness_bound(&c, rho, ell).unwrap(), "{c:?} {rho}");
            accepted += 1;
        }
        // Radial progress at ρ = 0.8, h = 0.9.
        let (rho, h) = (0.8, 0.9);
        let mut accepted = 0;
        while accepted < 500 {
            let x = uniform_in_ball(&mut rng, &minus_e_d(2), rho);
            if x.norm() >= 1.0 || 1.0 + x[1] < h * rho {
                continue;
            }
            assert!(check_radial_progress(&x, rho, h).unwrap(), "{x:?}");
            accepted += 1;
        }
    }

    #[test]
    fn generated_instances_hold() {
        let mut rng: SimRng = stream_rng(7, 1);
        for dim in [2, 3] {
            for _ in 0..1000 {
                let inst = EmptyBallInstance::generate(&mut rng, dim).unwrap();
                assert!(inst.check().unwrap(), "{inst:?}");
                if let Some(inst) = FlatnessInstance::generate(&mut rng, dim) {
                    assert!(inst.check().unwrap(), "{inst:?}");
                }
                if let Some(inst) = RadialProgressInstance::generate(&mut rng, dim) {
                    assert!(inst.check().unwrap(), "{inst:?}");
                }
            }
        }
    }
}
