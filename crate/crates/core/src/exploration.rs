//! The exploration process `π_{n+1} = Ψ(π_n)` with its history bookkeeping,
//! stopping times and pseudo-renewal decomposition.
//!
//! Per step `n` the process records `R_n = ‖π_n‖`, the inner reach `r_n` of
//! the history `H_n` (union of the lenses `B⁰(π_k, ‖π_{k+1} − π_k‖)`,
//! `k < n`) and the width `L_n = R_n − r_n`. On top of these scalars:
//!
//! * `Θ`: first `n` with `R_n < 1 + κ` or `L_n^{d+1} > λ R_n`;
//! * good steps `τ_0 = 0`, `τ_{k+1} = Θ ∧ inf{i > τ_k : L_i < κ, R_{τ_k} − R_i >= κ + 1}`;
//! * events `Q_{τ_k+1}`: the lenses `B⁰(π_{τ_k}, κ+1)` and `B⁰(π↑_{τ_k}, 1)`
//!   each hold exactly one point;
//! * `I_Θ = inf{k : τ_k = Θ}`, `η_0 = 0`,
//!   `η_{k+1} = I_Θ ∧ inf{i > η_k : Q_{τ_i+1}, τ_{i+1} < Θ}` and renewal
//!   times `w_k = τ_{η_k}`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geom::{lemmas::alpha, perp_component, reflect_in_ball, Lens, Vector};
use crate::index::{DenseGrid, PointSource};
use crate::ppp::{LazyField, PointSet, RegionSpec};

/// Tunable constants of the process.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub kappa: f64,
    pub lambda: f64,
    pub delta: f64,
    pub epsilon: f64,
}

impl Constants {
    pub const DEFAULT_KAPPA: f64 = 2.0;
    pub const DEFAULT_EPSILON: f64 = 0.25;

    /// `λ = (1/(4d)) (α_{1/2}/2)^d`.
    pub fn default_lambda(dim: usize) -> f64 {
        let a = alpha(0.5).expect("1/2 is in range");
        (a / 2.0).powi(dim as i32) / (4.0 * dim as f64)
    }

    /// `δ = α_{1/2}/8`.
    pub fn default_delta() -> f64 {
        alpha(0.5).expect("1/2 is in range") / 8.0
    }

    /// Defaults for dimension `dim`.
    pub fn for_dim(dim: usize) -> Self {
        Self {
            kappa: Self::DEFAULT_KAPPA,
            lambda: Self::default_lambda(dim),
            delta: Self::default_delta(),
            epsilon: Self::DEFAULT_EPSILON,
        }
    }

    /// Exponent of the block-length scale `A = t^{δ_A}`:
    /// `δ_A = (4/5) · 2ε / (1 + 2ε)`.
    pub fn delta_a(&self) -> f64 {
        0.8 * 2.0 * self.epsilon / (1.0 + 2.0 * self.epsilon)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 1.0) || !self.kappa.is_finite() {
            return Err(invalid(format!("kappa must be > 1, got {}", self.kappa)));
        }
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return Err(invalid(format!("lambda must be > 0, got {}", self.lambda)));
        }
        if !(self.delta > 0.0) || !self.delta.is_finite() {
            return Err(invalid(format!("delta must be > 0, got {}", self.delta)));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 0.5) {
            return Err(invalid(format!("epsilon must lie in (0, 1/2), got {}", self.epsilon)));
        }
        Ok(())
    }
}

/// Per-step scalars.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StepStats {
    /// `R_n`.
    pub radius: f64,
    /// `r_n`.
    pub reach: f64,
    /// `L_n = R_n − r_n`.
    pub width: f64,
}

/// Stopping times and renewal structure of one run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EventTrace {
    pub theta: usize,
    /// Distinct good steps `τ_0 < τ_1 < … < τ_{I_Θ} = Θ`.
    pub taus: Vec<usize>,
    pub i_theta: usize,
    /// `q[k]` tells whether `Q_{τ_k+1}` occurred, for `k < I_Θ`.
    pub q: Vec<bool>,
    /// Points found within rounding distance of a Q-lens boundary.
    pub q_boundary_hits: usize,
    /// Distinct `η_0 < η_1 < … = I_Θ`.
    pub etas: Vec<usize>,
    /// Distinct renewal times `w_0 = 0 < w_1 < … = Θ`.
    pub ws: Vec<usize>,
}

impl EventTrace {
    pub fn is_tau(&self, n: usize) -> bool {
        self.taus.binary_search(&n).is_ok()
    }

    /// Whether row `n` is a good step `τ_k` at which `Q_{τ_k+1}` occurred.
    pub fn is_q(&self, n: usize) -> bool {
        self.taus.binary_search(&n).map(|k| self.q.get(k).copied().unwrap_or(false)).unwrap_or(false)
    }

    pub fn is_w(&self, n: usize) -> bool {
        self.ws.binary_search(&n).is_ok()
    }
}

/// A complete exploration run from `π_0` down to the origin.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Exploration {
    pub constants: Constants,
    pub path: Vec<Vector>,
    pub stats: Vec<StepStats>,
    pub trace: EventTrace,
}

/// `π↑ = π (1 − κ/‖π‖)`, and `0` for `π = 0`.
pub fn pi_up(pi: &Vector, kappa: f64) -> Vector {
    let r = pi.norm();
    if r == 0.0 {
        return Vector::zeros(pi.dim());
    }
    pi.scale(1.0 - kappa / r)
}

/// Runs the exploration process from `pi0` on `source`.
pub fn explore<S: PointSource + ?Sized>(
    pi0: &Vector,
    source: &S,
    constants: &Constants,
) -> Result<Exploration> {
    constants.validate()?;
    if pi0.is_zero() {
        return Err(invalid("exploration must start away from the origin"));
    }
    if pi0.dim() != source.dimension() {
        return Err(invalid(format!(
            "start point has dimension {}, field has dimension {}",
            pi0.dim(),
            source.dimension()
        )));
    }
    let dim = pi0.dim();
    let mut path = vec![pi0.clone()];
    let r0 = pi0.norm();
    let mut stats = vec![StepStats { radius: r0, reach: r0, width: 0.0 }];
    let mut theta = None;
    loop {
        let n = path.len() - 1;
        let s = stats[n];
        if theta.is_none()
            && (s.radius < 1.0 + constants.kappa
                || s.width.powi(dim as i32 + 1) > constants.lambda * s.radius)
        {
            theta = Some(n);
        }
        if s.radius == 0.0 {
            break;
        }
        let next = source.psi(&path[n]);
        let step = next.dist(&path[n]);
        let radius = next.norm();
        if !(radius < s.radius) {
            return Err(Error::Sampling(format!(
                "Psi did not decrease the norm at step {n} ({} -> {radius})",
                s.radius
            )));
        }
        let reach = s.reach.min((s.radius - step).max(0.0)).min(radius);
        stats.push(StepStats { radius, reach, width: radius - reach });
        path.push(next);
    }
    let theta = theta.expect("the origin always triggers the stopping rule");
    let trace = build_trace(&path, &stats, theta, source, constants);
    Ok(Exploration { constants: *constants, path, stats, trace })
}

fn build_trace<S: PointSource + ?Sized>(
    path: &[Vector],
    stats: &[StepStats],
    theta: usize,
    source: &S,
    c: &Constants,
) -> EventTrace {
    let mut taus = vec![0usize];
    while *taus.last().unwrap() != theta {
        let prev = *taus.last().unwrap();
        let base = stats[prev].radius;
        let next = ((prev + 1)..theta)
            .find(|&i| stats[i].width < c.kappa && base - stats[i].radius >= c.kappa + 1.0)
            .unwrap_or(theta);
        taus.push(next);
    }
    let i_theta = taus.len() - 1;
    let mut q_boundary_hits = 0;
    let q: Vec<bool> = taus[..i_theta]
        .iter()
        .map(|&t| {
            let pi = &path[t];
            let outer = source.lens_count(&Lens { center: pi.clone(), radius: c.kappa + 1.0 });
            let inner = source.lens_count(&Lens { center: pi_up(pi, c.kappa), radius: 1.0 });
            q_boundary_hits += outer.boundary + inner.boundary;
            outer.count == 1 && inner.count == 1
        })
        .collect();
    let mut etas = vec![0usize];
    while *etas.last().unwrap() != i_theta {
        let prev = *etas.last().unwrap();
        let next = ((prev + 1)..i_theta)
            .find(|&i| q[i] && i + 1 < i_theta)
            .unwrap_or(i_theta);
        etas.push(next);
    }
    let ws = etas.iter().map(|&e| taus[e]).collect();
    EventTrace { theta, taus, i_theta, q, q_boundary_hits, etas, ws }
}

impl Exploration {
    pub fn dim(&self) -> usize {
        self.path[0].dim()
    }

    pub fn start(&self) -> &Vector {
        &self.path[0]
    }

    /// Number of steps until the origin is reached.
    pub fn steps(&self) -> usize {
        self.path.len() - 1
    }

    pub fn step_length(&self, k: usize) -> f64 {
        self.path[k + 1].dist(&self.path[k])
    }

    /// The lens added to the history at step `k`.
    pub fn lens(&self, k: usize) -> Lens {
        Lens { center: self.path[k].clone(), radius: self.step_length(k) }
    }

    /// `H_n` as its list of lenses.
    pub fn history(&self, n: usize) -> Vec<Lens> {
        (0..n).map(|k| self.lens(k)).collect()
    }

    pub fn radius_at_theta(&self) -> f64 {
        self.stats[self.trace.theta].radius
    }

    /// Gaps `τ_{k+1} − τ_k` between distinct good steps.
    pub fn tau_gaps(&self) -> Vec<usize> {
        self.trace.taus.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Gaps `w_{k+1} − w_k` between distinct renewal times.
    pub fn w_gaps(&self) -> Vec<usize> {
        self.trace.ws.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Violated bookkeeping invariants, as readable messages. `tol` is the
    /// absolute tolerance for the floating-point identities.
    pub fn audit(&self, tol: f64) -> Vec<String> {
        let mut out = Vec::new();
        let c = &self.constants;
        for n in 0..self.stats.len() {
            let s = self.stats[n];
            if (s.radius - self.path[n].norm()).abs() > 1e-12 * s.radius.max(1.0) {
                out.push(format!("R_{n} differs from the norm of pi_{n}"));
            }
            if s.width < 0.0 {
                out.push(format!("L_{n} is negative"));
            }
            if n + 1 < self.stats.len() {
                let t = self.stats[n + 1];
                if !(t.radius < s.radius) {
                    out.push(format!("R not strictly decreasing at step {n}"));
                }
                if t.reach > s.reach {
                    out.push(format!("r increases at step {n}"));
                }
                let lhs = (self.step_length(n) - s.width).max(0.0);
                let rhs = s.reach - t.reach;
                if (lhs - rhs).abs() > tol {
                    out.push(format!("width identity fails at step {n}: {lhs} vs {rhs}"));
                }
            }
        }
        let taus = &self.trace.taus;
        for k in 0..taus.len().saturating_sub(1) {
            if taus[k + 1] < self.trace.theta
                && self.stats[taus[k]].radius - self.stats[taus[k + 1]].radius < c.kappa + 1.0
            {
                out.push(format!("good-step block {k} drops less than kappa + 1"));
            }
        }
        if self.trace.i_theta as f64 > self.start().norm() {
            out.push(format!("I_Theta = {} exceeds |pi_0|", self.trace.i_theta));
        }
        out
    }
}

/// `sup_n ‖p_⊥π_0(π_n)‖` over the path.
pub fn deviation_sup(path: &[Vector], pi0: &Vector) -> Result<f64> {
    path.iter().try_fold(0.0f64, |m, p| Ok(m.max(perp_component(pi0, p)?.norm())))
}

/// Increment between consecutive renewal times.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RenewalBlock {
    pub block: usize,
    pub w_start: usize,
    pub w_end: usize,
    /// `Σ_{k=w_start}^{w_end−1} ‖π_{k+1} − π_k‖`.
    pub length: f64,
    /// `Δ = π_{w_end} − π_{w_start}`.
    pub delta: Vector,
    /// `p_⊥π_{w_start}(Δ)`.
    pub perp: Vector,
    /// Component of `Δ` along `π_{w_start}/‖π_{w_start}‖`.
    pub radial: f64,
}

/// Blocks between consecutive distinct renewal times. Every block starts
/// before `Θ`, so its base point is away from the origin.
pub fn renewal_increments(run: &Exploration) -> Vec<RenewalBlock> {
    run.trace
        .ws
        .windows(2)
        .enumerate()
        .map(|(block, w)| {
            let (a, b) = (w[0], w[1]);
            let base = &run.path[a];
            let delta = &run.path[b] - base;
            let length = (a..b).map(|k| run.step_length(k)).sum();
            let perp = crate::geom::perp_unchecked(base, &delta);
            let radial = delta.dot(base) / base.norm();
            RenewalBlock { block, w_start: a, w_end: b, length, delta, perp, radial }
        })
        .collect()
}

/// A fixed unit vector orthogonal to `axis`, used to turn perpendicular
/// components into signed scalars: the 90° rotation of the axis direction
/// in the plane, and otherwise the normalized perpendicular part of the
/// coordinate vector least aligned with the axis.
pub fn orthogonal_reference(axis: &Vector) -> Vector {
    let d = axis.dim();
    let n = axis.norm();
    if d == 2 {
        return Vector::from([-axis[1] / n, axis[0] / n]);
    }
    let j = (0..d)
        .min_by(|&a, &b| axis[a].abs().total_cmp(&axis[b].abs()))
        .expect("positive dimension");
    let p = crate::geom::perp_unchecked(axis, &Vector::unit(d, j));
    p.scale(1.0 / p.norm())
}

/// Signed first orthogonal coordinate of `p_⊥axis(v)`.
pub fn signed_perp_coordinate(axis: &Vector, v: &Vector) -> f64 {
    crate::geom::perp_unchecked(axis, v).dot(&orthogonal_reference(axis))
}

/// Runs the process on `N ∩ B(0, ‖π_0‖)` realized from `field` and indexed
/// by a dense grid. Traces coincide with [`explore`] run on the field.
pub fn explore_window(pi0: &Vector, field: &LazyField, constants: &Constants) -> Result<Exploration> {
    let window = field.realize(&RegionSpec::Ball { radius: pi0.norm() })?;
    explore(pi0, &window.index(), constants)
}

/// Outcome of the reflection coupling on one configuration.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "kebab-case")]
pub enum CouplingOutcome {
    /// `w_1 = Θ`: no pseudo-renewal before the stopping time.
    NoRenewal,
    /// The reflected run's renewal structure differs from the original's.
    CouplingBroken { divergence_step: usize },
    Matched(CouplingMatch),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CouplingMatch {
    pub w1: usize,
    pub w2: usize,
    /// Paths agree bitwise up to `w_1` and in radius at `w_1 + 1`.
    pub prefix_identical: bool,
    pub perp_original: Vector,
    pub perp_reflected: Vector,
    /// `‖p' + p‖_∞` between the two perpendicular components.
    pub negation_error: f64,
    pub passed: bool,
}

/// Tolerance of the perpendicular negation check.
pub const COUPLING_TOL: f64 = 1e-9;

/// Explores `points`, reflects the configuration about `π↑_{w_1}` and
/// re-explores, comparing `p_⊥π_{w_1}(π_{w_2})` across the two runs.
pub fn run_coupling(pi0: &Vector, points: &PointSet, constants: &Constants) -> Result<CouplingOutcome> {
    Ok(couple(pi0, points, constants)?.1)
}

/// [`run_coupling`], also returning the run on the original configuration.
pub fn couple(
    pi0: &Vector,
    points: &PointSet,
    constants: &Constants,
) -> Result<(Exploration, CouplingOutcome)> {
    let original = explore(pi0, &points.index(), constants)?;
    let ws = &original.trace.ws;
    if ws.len() < 3 {
        return Ok((original, CouplingOutcome::NoRenewal));
    }
    let (w1, w2) = (ws[1], ws[2]);
    let axis = pi_up(&original.path[w1], constants.kappa);
    let mirrored = reflect_points(points, &axis)?;
    let reflected = explore(pi0, &mirrored.index(), constants)?;
    if reflected.trace.ws.get(1) != Some(&w1) || reflected.trace.ws.get(2) != Some(&w2) {
        let divergence_step = first_divergence(&original, &reflected);
        return Ok((original, CouplingOutcome::CouplingBroken { divergence_step }));
    }
    let prefix_identical = original.path[..=w1] == reflected.path[..=w1]
        && (original.stats[w1 + 1].radius - reflected.stats[w1 + 1].radius).abs() <= COUPLING_TOL;
    let base = &original.path[w1];
    let perp_original = perp_component(base, &original.path[w2])?;
    let perp_reflected = perp_component(base, &reflected.path[w2])?;
    let negation_error = perp_original
        .coords()
        .iter()
        .zip(perp_reflected.coords())
        .map(|(a, b)| (a + b).abs())
        .fold(0.0, f64::max);
    let passed = prefix_identical && negation_error <= COUPLING_TOL;
    let outcome = CouplingOutcome::Matched(CouplingMatch {
        w1,
        w2,
        prefix_identical,
        perp_original,
        perp_reflected,
        negation_error,
        passed,
    });
    Ok((original, outcome))
}

/// Applies `Φ_axis` to every point, keeping ids.
pub fn reflect_points(points: &PointSet, axis: &Vector) -> Result<PointSet> {
    let moved = points
        .points()
        .iter()
        .map(|p| reflect_in_ball(axis, p))
        .collect::<Result<Vec<_>>>()?;
    PointSet::with_ids(points.dim(), moved, points.ids().to_vec())
}

fn first_divergence(a: &Exploration, b: &Exploration) -> usize {
    let n = a.stats.len().min(b.stats.len());
    (0..n)
        .find(|&k| {
            (a.stats[k].radius - b.stats[k].radius).abs() > COUPLING_TOL
                || a.trace.is_w(k) != b.trace.is_w(k)
                || a.trace.is_tau(k) != b.trace.is_tau(k)
        })
        .unwrap_or(n)
}

/// Convenience: the default window source for a field.
pub fn window_grid(pi0: &Vector, field: &LazyField) -> Result<DenseGrid> {
    Ok(field.realize(&RegionSpec::Ball { radius: pi0.norm() })?.index())
}
