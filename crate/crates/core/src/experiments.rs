//! Deterministic Monte Carlo campaigns.
//!
//! Every trial draws its randomness from a stream keyed by the campaign seed
//! and the trial index, and trials are collected in index order, so results
//! do not depend on the number of worker threads.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::exploration::{
    couple, deviation_sup, explore, renewal_increments, signed_perp_coordinate, Constants,
    CouplingOutcome, Exploration,
};
use crate::geom::lemmas::{
    EmptyBallInstance, FlatnessInstance, LemmaInstance, RadialProgressInstance,
};
use crate::geom::{unit_ball_volume, Vector};
use crate::index::PointSource;
use crate::ppp::{resample_region, LazyField, PointSet, RegionSpec};
use crate::rng::{nested_seed, stream_rng, stream_seed};
use crate::stats::{
    correlation, ks_two_sample, linear_fit, mean_and_se, median, quantile, sign_test,
    KsResult, SignTest, TailEstimate,
};
use crate::tree::{build_rst, straightness_profile};

/// Evaluates `f(0..n)` on a pool of `workers` threads (`0` = all cores),
/// returning results in index order.
pub fn map_trials<T, F>(workers: usize, n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| invalid(format!("cannot build worker pool: {e}")))?;
    pool.install(|| (0..n).into_par_iter().map(&f).collect())
}

fn require_trials(trials: usize, min: usize) -> Result<()> {
    if trials < min {
        return Err(invalid(format!("at least {min} trials required, got {trials}")));
    }
    Ok(())
}

/// Window of the field seen by an exploration from `pi0`.
fn window(dim: usize, seed: u64, radius: f64) -> Result<PointSet> {
    LazyField::with_seed(dim, seed).realize(&RegionSpec::Ball { radius })
}

// ---------------------------------------------------------------------------
// Ψ tail

/// `e^{−(t/2)^d |B(0,1)|}` for `t < ‖x‖`, and `0` beyond.
pub fn psi_tail_bound(dim: usize, x_norm: f64, t: f64) -> f64 {
    if t >= x_norm {
        return 0.0;
    }
    (-(t / 2.0).powi(dim as i32) * unit_ball_volume(dim)).exp()
}

#[derive(Clone, Debug, Serialize)]
pub struct PsiTailReport {
    pub dim: usize,
    pub x_norm: f64,
    pub seed: u64,
    pub estimate: TailEstimate,
    pub bound: Vec<f64>,
    /// Thresholds at which the survival exceeds bound + half-width.
    pub violations: Vec<f64>,
}

impl PsiTailReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Empirical survival of `‖Ψ(x) − x‖` at `x = x_norm · e_1` over independent
/// fields.
pub fn estimate_psi_tail(
    dim: usize,
    x_norm: f64,
    thresholds: &[f64],
    trials: usize,
    seed: u64,
    workers: usize,
) -> Result<PsiTailReport> {
    require_trials(trials, 100)?;
    if !(x_norm > 0.0) {
        return Err(invalid("x_norm must be positive"));
    }
    let x = Vector::on_first_axis(dim, x_norm);
    let samples = map_trials(workers, trials, |i| {
        let field = LazyField::with_seed(dim, stream_seed(seed, i as u64));
        Ok(field.psi(&x).dist(&x))
    })?;
    let estimate = TailEstimate::from_samples(&samples, thresholds)?;
    let bound: Vec<f64> = thresholds.iter().map(|&t| psi_tail_bound(dim, x_norm, t)).collect();
    let violations = (0..thresholds.len())
        .filter(|&i| estimate.survival[i] > bound[i] + estimate.half_width[i])
        .map(|i| thresholds[i])
        .collect();
    Ok(PsiTailReport { dim, x_norm, seed, estimate, bound, violations })
}

// ---------------------------------------------------------------------------
// Deviation

#[derive(Clone, Debug, Serialize)]
pub struct DeviationRow {
    pub norm: f64,
    pub threshold: f64,
    pub trials: usize,
    pub exceedance: f64,
    pub half_width: f64,
    pub median: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct DeviationReport {
    pub dim: usize,
    pub epsilon: f64,
    pub seed: u64,
    pub rows: Vec<DeviationRow>,
    /// Least-squares slope of `log median` against `log ‖π_0‖`.
    pub slope: Option<f64>,
    /// `(norm, trial, sup deviation)` per run.
    pub per_trial: Vec<(f64, usize, f64)>,
}

impl DeviationReport {
    /// Exceedance never rises by more than the two neighbouring
    /// half-widths combined.
    pub fn non_increasing_within_half_widths(&self) -> bool {
        self.rows
            .windows(2)
            .all(|w| w[1].exceedance <= w[0].exceedance + w[0].half_width + w[1].half_width)
    }
}

/// Seed of trial `trial` at start norm `norm`.
pub fn deviation_trial_seed(seed: u64, norm: f64, trial: usize) -> u64 {
    nested_seed(seed, &[norm.to_bits(), trial as u64])
}

/// Per-norm fraction of runs whose deviation exceeds `‖π_0‖^{1/2+ε}`.
pub fn estimate_deviation_tail(
    dim: usize,
    norms: &[f64],
    epsilon: f64,
    trials: usize,
    seed: u64,
    workers: usize,
) -> Result<DeviationReport> {
    require_trials(trials, 100)?;
    if norms.is_empty() || norms.iter().any(|&n| !(n > 0.0)) {
        return Err(invalid("start norms must be positive"));
    }
    let constants = Constants { epsilon, ..Constants::for_dim(dim) };
    constants.validate()?;
    let mut rows = Vec::new();
    let mut per_trial = Vec::new();
    for &norm in norms {
        let pi0 = Vector::on_first_axis(dim, norm);
        let sups = map_trials(workers, trials, |i| {
            let field = LazyField::with_seed(dim, deviation_trial_seed(seed, norm, i));
            let run = explore(&pi0, &field, &constants)?;
            deviation_sup(&run.path, &pi0)
        })?;
        let threshold = norm.powf(0.5 + epsilon);
        let exceedance = sups.iter().filter(|&&s| s > threshold).count() as f64 / trials as f64;
        rows.push(DeviationRow {
            norm,
            threshold,
            trials,
            exceedance,
            half_width: crate::stats::binomial_half_width(exceedance, trials),
            median: median(&sups).expect("trials >= 100"),
        });
        per_trial.extend(sups.into_iter().enumerate().map(|(i, s)| (norm, i, s)));
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.norm.ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.median.ln()).collect();
    let slope = if rows.iter().all(|r| r.median > 0.0) {
        linear_fit(&xs, &ys).map(|(s, _)| s)
    } else {
        None
    };
    Ok(DeviationReport { dim, epsilon, seed, rows, slope, per_trial })
}

// ---------------------------------------------------------------------------
// Spacing and terminal tails

#[derive(Clone, Debug, Serialize)]
pub struct SpacingReport {
    pub dim: usize,
    pub start_norm: f64,
    pub constants: Constants,
    pub trials: usize,
    pub seed: u64,
    /// Pooled `τ_{k+1} − τ_k` survival at `k = 0, 1, …`.
    pub tau_gaps: TailEstimate,
    /// Gaps stratified by block index `k ∈ {0, 1, 2}` (if observed).
    pub tau_gaps_by_index: Vec<Option<TailEstimate>>,
    /// Slope of `log survival` against `k` over positive survivals.
    pub tau_log_slope: Option<f64>,
    pub w_gaps: TailEstimate,
    pub block_lengths: TailEstimate,
    /// Slope of `log survival` against `√t` for block lengths.
    pub block_log_slope: Option<f64>,
    pub r_theta: TailEstimate,
    /// Pearson correlation of `log P(R_Θ > t)` with `t^{d/(d+1)}`.
    pub r_theta_correlation: Option<f64>,
    pub theta_mean: f64,
    pub i_theta_max: usize,
}

/// Number of integer gap thresholds reported (`k = 0..GAP_THRESHOLDS`).
pub const GAP_THRESHOLDS: usize = 21;
/// Number of `R_Θ` thresholds.
pub const R_THETA_THRESHOLDS: usize = 12;

impl SpacingReport {
    /// Survival strictly decreasing over `k = 1..=10`.
    pub fn tau_strictly_decreasing(&self) -> bool {
        (1..10).all(|k| self.tau_gaps.survival[k + 1] < self.tau_gaps.survival[k])
    }

    /// `P(gap > 10) <= P(gap > 2) / 2`.
    pub fn tau_halving(&self) -> bool {
        self.tau_gaps.survival[10] <= 0.5 * self.tau_gaps.survival[2]
    }
}

/// `R_Θ` thresholds: evenly spaced in `t^{d/(d+1)}` between the empirical
/// 5% and 99% quantiles, where every survival estimate rests on at least 1%
/// of the runs.
pub fn r_theta_thresholds(samples: &[f64], dim: usize) -> Vec<f64> {
    let e = dim as f64 / (dim as f64 + 1.0);
    let lo = quantile(samples, 0.05).unwrap_or(0.0).max(0.0).powf(e);
    let hi = quantile(samples, 0.99).unwrap_or(0.0).max(0.0).powf(e);
    (0..R_THETA_THRESHOLDS)
        .map(|i| (lo + (hi - lo) * i as f64 / (R_THETA_THRESHOLDS - 1) as f64).powf(1.0 / e))
        .collect()
}

fn log_fit(est: &TailEstimate, transform: impl Fn(f64) -> f64) -> (Vec<f64>, Vec<f64>) {
    est.thresholds
        .iter()
        .zip(&est.survival)
        .filter(|(_, &s)| s > 0.0)
        .map(|(&t, &s)| (transform(t), s.ln()))
        .unzip()
}

/// Pooled tails of good-step gaps, renewal gaps, block path lengths and
/// `R_Θ` from runs started at `start_norm · e_1`.
pub fn estimate_spacing_tails(
    dim: usize,
    start_norm: f64,
    constants: &Constants,
    trials: usize,
    seed: u64,
    workers: usize,
) -> Result<SpacingReport> {
    require_trials(trials, 100)?;
    constants.validate()?;
    let pi0 = Vector::on_first_axis(dim, start_norm);
    let runs: Vec<Exploration> = map_trials(workers, trials, |i| {
        let field = LazyField::with_seed(dim, stream_seed(seed, i as u64));
        explore(&pi0, &field, constants)
    })?;
    let tau_gaps: Vec<Vec<usize>> = runs.iter().map(|r| r.tau_gaps()).collect();
    let pooled: Vec<f64> = tau_gaps.iter().flatten().map(|&g| g as f64).collect();
    if pooled.len() < 50 {
        return Err(Error::InsufficientData(format!(
            "only {} good-step gaps observed (need 50)",
            pooled.len()
        )));
    }
    let ks: Vec<f64> = (0..GAP_THRESHOLDS).map(|k| k as f64).collect();
    let tau_est = TailEstimate::from_samples(&pooled, &ks)?;
    let tau_gaps_by_index = (0..3)
        .map(|k| {
            let s: Vec<f64> = tau_gaps.iter().filter_map(|g| g.get(k)).map(|&g| g as f64).collect();
            TailEstimate::from_samples(&s, &ks).ok()
        })
        .collect();
    let (x, y) = log_fit(&tau_est, |t| t);
    let tau_log_slope = linear_fit(&x, &y).map(|(s, _)| s);

    let w: Vec<f64> = runs.iter().flat_map(|r| r.w_gaps()).map(|g| g as f64).collect();
    let w_gaps = TailEstimate::from_samples(&w, &ks)?;

    let lengths: Vec<f64> =
        runs.iter().flat_map(|r| renewal_increments(r).into_iter().map(|b| b.length)).collect();
    let max_len = lengths.iter().copied().fold(0.0, f64::max);
    let len_thresholds: Vec<f64> = (0..=20).map(|i| max_len * i as f64 / 20.0).collect();
    let block_lengths = TailEstimate::from_samples(&lengths, &len_thresholds)?;
    let (x, y) = log_fit(&block_lengths, f64::sqrt);
    let block_log_slope = linear_fit(&x, &y).map(|(s, _)| s);

    let r_theta: Vec<f64> = runs.iter().map(|r| r.radius_at_theta()).collect();
    let thresholds = r_theta_thresholds(&r_theta, dim);
    let r_est = TailEstimate::from_samples(&r_theta, &thresholds)?;
    let e = dim as f64 / (dim as f64 + 1.0);
    let (x, y) = log_fit(&r_est, |t| t.powf(e));
    let r_theta_correlation = correlation(&x, &y);

    Ok(SpacingReport {
        dim,
        start_norm,
        constants: *constants,
        trials,
        seed,
        tau_gaps: tau_est,
        tau_gaps_by_index,
        tau_log_slope,
        w_gaps,
        block_lengths,
        block_log_slope,
        r_theta: r_est,
        r_theta_correlation,
        theta_mean: runs.iter().map(|r| r.trace.theta as f64).sum::<f64>() / trials as f64,
        i_theta_max: runs.iter().map(|r| r.trace.i_theta).max().unwrap_or(0),
    })
}

// ---------------------------------------------------------------------------
// Lemma fuzz

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LemmaKind {
    EmptyBall,
    Flatness,
    RadialProgress,
}

impl LemmaKind {
    pub const ALL: [LemmaKind; 3] = [Self::EmptyBall, Self::Flatness, Self::RadialProgress];

    pub fn name(self) -> &'static str {
        match self {
            Self::EmptyBall => EmptyBallInstance::NAME,
            Self::Flatness => FlatnessInstance::NAME,
            Self::RadialProgress => RadialProgressInstance::NAME,
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == name)
            .ok_or_else(|| invalid(format!("unknown lemma {name:?}")))
    }
}

/// Cap on generator draws per accepted instance.
pub const MAX_DRAWS_PER_INSTANCE: u64 = 100_000;

#[derive(Clone, Debug, Serialize)]
pub struct FuzzReport {
    pub lemma: &'static str,
    pub dim: usize,
    pub instances: usize,
    pub seed: u64,
    /// Total candidate draws, rejected ones included.
    pub draws: u64,
    pub acceptance_rate: f64,
    pub violations: usize,
    /// Instances whose check reported a precondition failure.
    pub invalid: usize,
    /// Up to ten failing instances, serialized for replay.
    pub failing: Vec<serde_json::Value>,
}

impl FuzzReport {
    pub fn passed(&self) -> bool {
        self.violations == 0 && self.invalid == 0
    }
}

enum FuzzOutcome {
    Holds,
    Violated(serde_json::Value),
    Invalid(serde_json::Value),
}

fn fuzz_one<L: LemmaInstance>(dim: usize, seed: u64, i: usize) -> Result<(u64, FuzzOutcome)> {
    let mut rng = stream_rng(seed, i as u64);
    for draws in 1..=MAX_DRAWS_PER_INSTANCE {
        if let Some(inst) = L::generate(&mut rng, dim) {
            let json = serde_json::to_value(&inst).expect("instances serialize");
            let outcome = match inst.check() {
                Ok(true) => FuzzOutcome::Holds,
                Ok(false) => FuzzOutcome::Violated(json),
                Err(_) => FuzzOutcome::Invalid(json),
            };
            return Ok((draws, outcome));
        }
    }
    Err(Error::Sampling(format!("{} generator rejected {MAX_DRAWS_PER_INSTANCE} draws", L::NAME)))
}

fn fuzz<L: LemmaInstance>(dim: usize, instances: usize, seed: u64, workers: usize) -> Result<FuzzReport> {
    let results = map_trials(workers, instances, |i| fuzz_one::<L>(dim, seed, i))?;
    let draws: u64 = results.iter().map(|(d, _)| d).sum();
    let mut violations = 0;
    let mut invalid = 0;
    let mut failing = Vec::new();
    for (_, outcome) in results {
        let json = match outcome {
            FuzzOutcome::Holds => continue,
            FuzzOutcome::Violated(j) => {
                violations += 1;
                j
            }
            FuzzOutcome::Invalid(j) => {
                invalid += 1;
                j
            }
        };
        if failing.len() < 10 {
            failing.push(json);
        }
    }
    Ok(FuzzReport {
        lemma: L::NAME,
        dim,
        instances,
        seed,
        draws,
        acceptance_rate: instances as f64 / draws as f64,
        violations,
        invalid,
        failing,
    })
}

/// Checks `instances` random valid configurations of a lemma.
pub fn run_lemma_fuzz(
    lemma: LemmaKind,
    dim: usize,
    instances: usize,
    seed: u64,
    workers: usize,
) -> Result<FuzzReport> {
    if instances == 0 {
        return Err(invalid("instances must be at least 1"));
    }
    if dim < 2 {
        return Err(invalid("lemma fuzzing requires d >= 2"));
    }
    match lemma {
        LemmaKind::EmptyBall => fuzz::<EmptyBallInstance>(dim, instances, seed, workers),
        LemmaKind::Flatness => fuzz::<FlatnessInstance>(dim, instances, seed, workers),
        LemmaKind::RadialProgress => fuzz::<RadialProgressInstance>(dim, instances, seed, workers),
    }
}

/// Re-checks a serialized instance.
pub fn replay_instance(lemma: LemmaKind, json: &serde_json::Value) -> Result<bool> {
    fn go<L: LemmaInstance>(json: &serde_json::Value) -> Result<bool> {
        let inst: L = serde_json::from_value(json.clone())
            .map_err(|e| invalid(format!("cannot decode instance: {e}")))?;
        inst.check()
    }
    match lemma {
        LemmaKind::EmptyBall => go::<EmptyBallInstance>(json),
        LemmaKind::Flatness => go::<FlatnessInstance>(json),
        LemmaKind::RadialProgress => go::<RadialProgressInstance>(json),
    }
}

// ---------------------------------------------------------------------------
// Symmetry

#[derive(Clone, Debug, Serialize)]
pub struct CouplingFailure {
    pub trial: usize,
    pub field_seed: u64,
    pub negation_error: f64,
    pub prefix_identical: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct SymmetryReport {
    pub dim: usize,
    pub start_norm: f64,
    pub constants: Constants,
    pub seed: u64,
    pub trials_run: usize,
    pub applicable: usize,
    pub passed: usize,
    pub no_renewal: usize,
    /// `(trial, divergence step)` of runs whose coupling broke.
    pub broken: Vec<(usize, usize)>,
    pub failures: Vec<CouplingFailure>,
    pub min_applicable: usize,
    pub max_negation_error: f64,
    /// Sign test on the signed coordinate of the coupled block of each
    /// applicable run.
    pub coupled_sign: Option<SignTest>,
    /// Sign test on the signed coordinates of all renewal blocks.
    pub pooled_sign: Option<SignTest>,
    pub pooled_blocks: usize,
    pub pooled_mean: Option<f64>,
    pub pooled_se: Option<f64>,
}

impl SymmetryReport {
    pub fn sufficient(&self) -> bool {
        self.applicable >= self.min_applicable
    }

    /// Every applicable run negates exactly and enough runs were applicable.
    pub fn exact(&self) -> bool {
        self.sufficient() && self.failures.is_empty()
    }
}

struct TrialCoupling {
    field_seed: u64,
    outcome: CouplingOutcome,
    /// Signed coordinate of `p_⊥π_{w_1}(π_{w_2})` when the run is applicable.
    coupled_coord: Option<f64>,
    block_coords: Vec<f64>,
}

fn couple_trial(
    dim: usize,
    pi0: &Vector,
    constants: &Constants,
    field_seed: u64,
) -> Result<TrialCoupling> {
    let points = window(dim, field_seed, pi0.norm())?;
    let (run, outcome) = couple(pi0, &points, constants)?;
    let block_coords = renewal_increments(&run)
        .iter()
        .map(|b| signed_perp_coordinate(&run.path[b.w_start], &b.delta))
        .collect();
    let coupled_coord = match &outcome {
        CouplingOutcome::Matched(m) => Some(signed_perp_coordinate(&run.path[m.w1], &m.perp_original)),
        _ => None,
    };
    Ok(TrialCoupling { field_seed, outcome, coupled_coord, block_coords })
}

/// Reflection-coupling campaign. Runs batches of `trials` runs until
/// `min_applicable` runs had a pseudo-renewal before `Θ`, or until
/// `max(trials, max_trials)` runs were made.
#[allow(clippy::too_many_arguments)]
pub fn run_symmetry_campaign(
    dim: usize,
    start_norm: f64,
    constants: &Constants,
    trials: usize,
    seed: u64,
    min_applicable: usize,
    max_trials: usize,
    workers: usize,
) -> Result<SymmetryReport> {
    require_trials(trials, 100)?;
    constants.validate()?;
    let cap = max_trials.max(trials);
    let pi0 = Vector::on_first_axis(dim, start_norm);
    let mut report = SymmetryReport {
        dim,
        start_norm,
        constants: *constants,
        seed,
        trials_run: 0,
        applicable: 0,
        passed: 0,
        no_renewal: 0,
        broken: Vec::new(),
        failures: Vec::new(),
        min_applicable,
        max_negation_error: 0.0,
        coupled_sign: None,
        pooled_sign: None,
        pooled_blocks: 0,
        pooled_mean: None,
        pooled_se: None,
    };
    let mut coupled = Vec::new();
    let mut pooled = Vec::new();
    while report.trials_run < cap && (report.trials_run == 0 || report.applicable < min_applicable) {
        let start = report.trials_run;
        let batch = trials.min(cap - start);
        let results = map_trials(workers, batch, |j| {
            couple_trial(dim, &pi0, constants, stream_seed(seed, (start + j) as u64))
        })?;
        for (j, t) in results.into_iter().enumerate() {
            let trial = start + j;
            pooled.extend(t.block_coords);
            coupled.extend(t.coupled_coord);
            match t.outcome {
                CouplingOutcome::NoRenewal => report.no_renewal += 1,
                CouplingOutcome::CouplingBroken { divergence_step } => {
                    report.broken.push((trial, divergence_step))
                }
                CouplingOutcome::Matched(m) => {
                    report.applicable += 1;
                    report.max_negation_error = report.max_negation_error.max(m.negation_error);
                    if m.passed {
                        report.passed += 1;
                    } else {
                        report.failures.push(CouplingFailure {
                            trial,
                            field_seed: t.field_seed,
                            negation_error: m.negation_error,
                            prefix_identical: m.prefix_identical,
                        });
                    }
                }
            }
        }
        report.trials_run += batch;
    }
    report.coupled_sign = sign_test(&coupled).ok();
    report.pooled_sign = sign_test(&pooled).ok();
    report.pooled_blocks = pooled.len();
    if let Some((m, se)) = mean_and_se(&pooled) {
        report.pooled_mean = Some(m);
        report.pooled_se = Some(se);
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// Markov resampling

#[derive(Clone, Debug, Serialize)]
pub struct ResamplingReport {
    pub dim: usize,
    pub start_norm: f64,
    pub step: usize,
    pub trials_per_arm: usize,
    pub seed: u64,
    /// `R_{n+1}` from continuing on the original field.
    pub continuation: Vec<f64>,
    /// `R_{n+1}` after resampling `B(0, R_n)` minus the closed history.
    pub resampled: Vec<f64>,
    pub ks: KsResult,
}

impl ResamplingReport {
    pub fn passed(&self, alpha: f64) -> bool {
        self.ks.p_value >= alpha
    }
}

/// Compares the law of `R_{n+1}` under continuation with its law after
/// replacing the unexplored part of `B(0, R_n)` by a fresh sample.
/// Continuation runs use trials `0..trials`, resampled runs use
/// `trials..2·trials`, so the two arms are independent.
pub fn resampling_check(
    dim: usize,
    start_norm: f64,
    step: usize,
    trials: usize,
    seed: u64,
    workers: usize,
) -> Result<ResamplingReport> {
    require_trials(trials, 100)?;
    let constants = Constants::for_dim(dim);
    let pi0 = Vector::on_first_axis(dim, start_norm);
    let continuation = map_trials(workers, trials, |i| {
        let points = window(dim, stream_seed(seed, i as u64), start_norm)?;
        let run = explore(&pi0, &points.index(), &constants)?;
        Ok(run.stats.get(step + 1).map(|s| s.radius).unwrap_or(0.0))
    })?;
    let resampled = map_trials(workers, trials, |j| {
        let i = (trials + j) as u64;
        let points = window(dim, stream_seed(seed, i), start_norm)?;
        let run = explore(&pi0, &points.index(), &constants)?;
        let Some(stats) = run.stats.get(step) else {
            return Ok(0.0);
        };
        if stats.radius == 0.0 {
            return Ok(0.0);
        }
        let region = RegionSpec::BallMinusLenses { radius: stats.radius, lenses: run.history(step) };
        let fresh = resample_region(&points, &region, nested_seed(seed, &[i, 1]))?;
        Ok(fresh.index().psi(&run.path[step]).norm())
    })?;
    let ks = ks_two_sample(&continuation, &resampled)?;
    Ok(ResamplingReport { dim, start_norm, step, trials_per_arm: trials, seed, continuation, resampled, ks })
}

// ---------------------------------------------------------------------------
// Straightness trend

#[derive(Clone, Debug, Serialize)]
pub struct StraightnessTrend {
    pub seed: u64,
    /// `(lower edge, median max-angle)` of each dyadic band `[2^k, 2^{k+1})`
    /// intersected with the window.
    pub bands: Vec<(f64, f64)>,
    pub decreasing: bool,
}

/// Band medians of the subtree angular spread for one sample of `B(0, R)`.
pub fn straightness_trend(dim: usize, radius: f64, seed: u64) -> Result<StraightnessTrend> {
    let tree = build_rst(&crate::ppp::sample_ball(dim, radius, seed)?);
    let profile = straightness_profile(&tree);
    let mut bands = Vec::new();
    let mut lo = 1.0;
    while lo < radius {
        let hi = (2.0 * lo).min(radius);
        if let Some(m) = profile.band_median(lo, hi) {
            bands.push((lo, m));
        }
        lo *= 2.0;
    }
    let decreasing = bands.len() >= 2 && bands.windows(2).all(|w| w[1].1 < w[0].1);
    Ok(StraightnessTrend { seed, bands, decreasing })
}
