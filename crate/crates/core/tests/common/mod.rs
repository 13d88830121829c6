//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use rstlab::tree::Parent;
use rstlab::Vector;

/// Quadratic reference: for every point, the closest point of strictly
/// smaller norm, or the origin when the origin is at least as close.
pub fn brute_parents(points: &[Vector]) -> Vec<Parent> {
    points
        .iter()
        .map(|x| {
            let nx = x.norm();
            let mut best = Parent::Origin;
            let mut best_d = nx;
            for (j, y) in points.iter().enumerate() {
                if y.norm() < nx {
                    let d = x.dist(y);
                    if d < best_d {
                        best_d = d;
                        best = Parent::Vertex(j);
                    }
                }
            }
            best
        })
        .collect()
}

/// Minimum norm over `B(c, s) ∩ B(0, ‖c‖)` by grid search over the
/// bounding sphere of `B(c, s)` on four successively finer grids.
/// Angles are polar `u` and azimuth `v`; in the plane only `v` is used.
pub fn lens_min_norm(c: &Vector, s: f64) -> f64 {
    if c.norm() < s {
        return 0.0;
    }
    let point = |u: f64, v: f64| -> f64 {
        if c.dim() == 2 {
            Vector::from([c[0] + s * v.cos(), c[1] + s * v.sin()]).norm()
        } else {
            Vector::from([
                c[0] + s * u.sin() * v.cos(),
                c[1] + s * u.sin() * v.sin(),
                c[2] + s * u.cos(),
            ])
            .norm()
        }
    };
    let pi = std::f64::consts::PI;
    let (mut u0, mut u1, mut v0, mut v1) = (0.0, pi, -pi, pi);
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for _ in 0..4 {
        let m = 200;
        let mu = if c.dim() == 2 { 0 } else { m };
        let (du, dv) = ((u1 - u0) / m as f64, (v1 - v0) / m as f64);
        for i in 0..=mu {
            for j in 0..=m {
                let (u, v) = (u0 + i as f64 * du, v0 + j as f64 * dv);
                let val = point(u, v);
                if val < best.0 {
                    best = (val, u, v);
                }
            }
        }
        (u0, u1) = ((best.1 - 2.0 * du).max(0.0), (best.1 + 2.0 * du).min(pi));
        (v0, v1) = (best.2 - 2.0 * dv, best.2 + 2.0 * dv);
    }
    best.0
}
