//! Counter-based seeding.
//!
//! Every random stream is keyed by `(global_seed, index)` through the
//! SplitMix64 finalizer, so parallel execution order cannot change which
//! numbers a trial or a cell sees.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use crate::geom::Vector;

pub type SimRng = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output function.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of stream `index` under `global_seed`.
#[inline]
pub fn stream_seed(global_seed: u64, index: u64) -> u64 {
    mix64(mix64(global_seed) ^ index.wrapping_mul(GOLDEN).rotate_left(17))
}

/// Seed of a nested stream, e.g. `(seed, norm index, trial)`.
pub fn nested_seed(global_seed: u64, path: &[u64]) -> u64 {
    path.iter().fold(global_seed, |acc, &i| stream_seed(acc, i))
}

/// Seed of the lattice cell with integer coordinates `cell`.
pub fn cell_seed(global_seed: u64, cell: &[i64]) -> u64 {
    let mut h = mix64(global_seed ^ 0xC311_5EED);
    for &c in cell {
        h = mix64(h ^ c as u64);
    }
    h
}

pub fn rng_from_seed(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

pub fn stream_rng(global_seed: u64, index: u64) -> SimRng {
    rng_from_seed(stream_seed(global_seed, index))
}

/// Uniform point of the unit sphere `S^{d−1}`.
pub fn uniform_direction<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vector {
    loop {
        let g: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let n = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-300 {
            return Vector::from_finite(g.into_iter().map(|x| x / n));
        }
    }
}

/// Uniform point of the open ball `B(center, radius)`.
pub fn uniform_in_ball<R: Rng + ?Sized>(rng: &mut R, center: &Vector, radius: f64) -> Vector {
    let dim = center.dim();
    let dir = uniform_direction(rng, dim);
    let u: f64 = rng.random();
    let r = radius * u.powf(1.0 / dim as f64);
    center.add_scaled(r, &dir)
}

/// Poisson variate with the given mean (0 for a zero mean).
pub fn poisson_count<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    let p = Poisson::new(mean).expect("finite positive Poisson mean");
    let x: f64 = p.sample(rng);
    x as u64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_distinct_and_stable() {
        assert_eq!(stream_seed(1, 2), stream_seed(1, 2));
        assert_ne!(stream_seed(1, 2), stream_seed(1, 3));
        assert_ne!(stream_seed(1, 2), stream_seed(2, 2));
        assert_ne!(cell_seed(5, &[1, 2]), cell_seed(5, &[2, 1]));
        assert_eq!(cell_seed(5, &[1, -2]), cell_seed(5, &[1, -2]));
    }

    #[test]
    fn uniform_in_ball_stays_inside() {
        let mut rng = stream_rng(3, 0);
        let c: Vector = [1.0, -2.0, 0.5].into();
        for _ in 0..1000 {
            assert!(uniform_in_ball(&mut rng, &c, 0.7).dist(&c) < 0.7);
        }
    }

    #[test]
    fn poisson_mean_is_close() {
        let mut rng = stream_rng(11, 0);
        let n = 20_000;
        let total: u64 = (0..n).map(|_| poisson_count(&mut rng, 3.5)).sum();
        let mean = total as f64 / n as f64;
        assert!((mean - 3.5).abs() < 4.0 * (3.5f64 / n as f64).sqrt());
        assert_eq!(poisson_count(&mut rng, 0.0), 0);
    }
}
