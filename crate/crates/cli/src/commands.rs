//! One function per command: resolve the configuration, run the library
//! pipeline, write artifacts and record checks.

use std::path::PathBuf;
use std::time::Instant;

use rstlab::experiments::{
    estimate_deviation_tail, estimate_psi_tail, estimate_spacing_tails, run_lemma_fuzz,
    run_symmetry_campaign, LemmaKind,
};
use rstlab::exploration::{self, deviation_sup, renewal_increments, Constants};
use rstlab::io;
use rstlab::ppp::{sample_ball, LazyField, PointSet};
use rstlab::stats::TailEstimate;
use rstlab::tree::{build_rst, check_planarity, in_degree_histogram, straightness_profile};
use rstlab::Vector;
use serde::Serialize;

use crate::config::{
    check_dim, check_epsilon, check_positive, check_trials, DeviationArgs, ExploreArgs, Globals,
    LemmasArgs, PointsArgs, PsiTailArgs, SampleArgs, SampleConfig, SpacingArgs, StraightnessArgs,
    SymmetryArgs,
};
use crate::output::Run;
use crate::CliError;

fn finish(run: Run, start: Instant, g: &Globals) -> Result<bool, CliError> {
    run.finish(start.elapsed().as_secs_f64(), g.workers)
}

fn f(x: f64) -> String {
    x.to_string()
}

pub fn sample(a: &SampleArgs, g: &Globals) -> Result<bool, CliError> {
    let start = Instant::now();
    let cfg = a.resolve()?;
    let mut run = Run::new("sample", &g.out_dir, &cfg)?;
    let pts = sample_ball(cfg.dim, cfg.radius, cfg.seed)?;
    run.file("points.csv", |w| io::write_points(w, &pts))?;
    run.count("points", pts.len());
    finish(run, start, g)
}

#[derive(Serialize)]
struct PointsConfig {
    points: Option<PathBuf>,
    sample: Option<SampleConfig>,
}

impl PointsArgs {
    fn resolve(&self) -> Result<PointsConfig, CliError> {
        Ok(match &self.points {
            Some(p) => PointsConfig { points: Some(p.clone()), sample: None },
            None => PointsConfig { points: None, sample: Some(self.sample.resolve()?) },
        })
    }
}

impl PointsConfig {
    fn load(&self, run: &mut Run) -> Result<PointSet, CliError> {
        match (&self.points, &self.sample) {
            (Some(path), _) => {
                let bytes = std::fs::read(path)
                    .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
                let pts = io::read_points(bytes.as_slice())?;
                check_dim(pts.dim())?;
                run.input(path, bytes);
                Ok(pts)
            }
            (None, Some(s)) => Ok(sample_ball(s.dim, s.radius, s.seed)?),
            (None, None) => unreachable!("resolve fills one source"),
        }
    }
}

pub fn build(a: &PointsArgs, g: &Globals) -> Result<bool, CliError> {
    let start = Instant::now();
    let cfg = a.resolve()?;
    let mut run = Run::new("build", &g.out_dir, &cfg)?;
    let pts = cfg.load(&mut run)?;
    let tree = build_rst(&pts);
    run.file("tree.csv", |w| io::write_tree(w, &tree))?;
    let rows: Vec<Vec<String>> = in_degree_histogram(&tree)
        .into_iter()
        .map(|(k, v)| vec![k.to_string(), v.to_string()])
        .collect();
    run.file("in_degree.csv", |w| io::write_rows(w, &["in_degree", "count"], &rows))?;
    run.count("vertices", tree.len());
    run.check("valid_tree", tree.validate().is_empty());
    finish(run, start, g)
}

#[derive(Serialize)]
struct ExploreConfig {
    dim: usize,
    start_norm: f64,
    seed: u64,
    constants: Constants,
}

pub fn explore(a: &ExploreArgs, g: &Globals) -> Result<bool, CliError> {
    let start = Instant::now();
    let dim = check_dim(a.dim.unwrap_or(2))?;
    let cfg = ExploreConfig {
        dim,
        start_norm: check_positive("start-norm", a.start_norm.unwrap_or(100.0))?,
        seed: a.seed.unwrap_or(0),
        constants: a.constants.resolve(dim)?,
    };
    let mut run = Run::new("explore", &g.out_dir, &cfg)?;
    let pi0 = Vector::on_first_axis(dim, cfg.start_norm);
    let field = LazyField::with_seed(dim, cfg.seed);
    let ex = exploration::explore(&pi0, &field, &cfg.constants)?;
    run.file("trace.csv", |w| io::write_trace(w, &ex))?;
    let blocks = renewal_increments(&ex);
    run.file("renewals.csv", |w| io::write_renewals(w, dim, &blocks))?;
    run.count("steps", ex.steps());
    run.count("theta", ex.trace.theta);
    run.count("i_theta", ex.trace.i_theta);
    run.count("r_theta", ex.radius_at_theta());
    run.count("q_events", ex.trace.q.iter().filter(|&&q| q).count());
    run.count("renewal_times", &ex.trace.ws);
    run.count("deviation_sup", deviation_sup(&ex.path, &pi0)?);
    let audit = ex.audit(1e-9);
    run.count("audit", &audit);
    run.check("bookkeeping", audit.is_empty());
    finish(run, start, g)
}

#[derive(Serialize)]
struct StraightnessConfig {
    input: PointsConfig,
    epsilon: f64,
}

pub fn straightness(a: &StraightnessArgs, g: &Globals) -> Result<bool, CliError> {
    let start = Instant::now();
    let cfg = StraightnessConfig {
        input: a.input.resolve()?,
        epsilon: check_epsilon(a.epsilon.unwrap_or(0.25))?,
    };
    let mut run = Run::new("straightness", &g.out_dir, &cfg)?;
    let pts = cfg.input.load(&mut run)?;
    let tree = build_rst(&pts);
    let profile = straightness_profile(&tree);
    run.file("profile.csv", |w| io::write_straightness(w, &profile))?;
    let max_norm = profile.records.iter().map(|r| r.norm).fold(0.0, f64::max);
    let mut rows = Vec::new();
    let mut lo = 1.0;
    while lo <= max_norm {
        let hi = 2.0 * lo;
        let count = profile.records.iter().filter(|r| r.norm >= lo && r.norm < hi).count();
        if let Some(m) = profile.band_median(lo, hi) {
            rows.push(vec![f(lo), f(hi), count.to_string(), f(m)]);
        }
        lo = hi;
    }
    run.file("bands.csv", |w| io::write_rows(w, &["band_lo", "band_hi", "vertices", "median_max_angle"], &rows))?;
    run.count("vertices", tree.len());
    run.count("cone_violations", profile.violations(cfg.epsilon).len());
    finish(run, start, g)
}

#[derive(Serialize)]
struct PsiTailConfig {
    dim: usize,
    x_norm: f64,
    thresholds: Vec<f64>,
    trials: usize,
    seed: u64,
}

pub fn psi_tail(a: &PsiTailArgs, g: &Globals) -> Result<bool, CliError> {
    let start = Instant::now();
    let cfg = PsiTailConfig {
        dim: check_dim(a.dim.unwrap_or(2))?,
        x_norm: check_positive("x-norm", a.x_norm.unwrap_or(10.0))?,
        thresholds: a.thresholds.clone().unwrap_or_else(|| vec![0.5, 1.0, 2.0]),
        trials: check_trials(a.trials.unwrap_or(10_000), 100)?,
        seed: a.seed.unwrap_or(0),
    };
    let mut run = Run::new("psi_tail", &g.out_dir, &cfg)?;
    let rep = estimate_psi_tail(cfg.dim, cfg.x_norm, &cfg.thresholds, cfg.trials, cfg.seed, g.workers)?;
    run.file("tail.csv", |w| io::write_tail(w, &rep.estimate, Some(&rep.bound)))?;
    run.count("violations", &rep.violations);
    run.check("below_bound", rep.passed());
    finish(run, start, g)
}

#[derive(Serialize)]
struct DeviationConfig {
    dim: usize,
    norms: Vec<f64>,
    epsilon: f64,
    trials: usize,
    seed: u64,
}

pub fn deviation(a: &DeviationArgs, g: &Globals) -> Result<bool, CliError> {
    let start = Instant::now();
    let cfg = DeviationConfig {
        dim: check_dim(a.dim.unwrap_or(2))?,
        norms: a.norms.clone().unwrap_or_else(|| vec![50.0, 100.0, 200.0, 400.0]),
        epsilon: check_epsilon(a.epsilon.unwrap_or(0.25))?,
        trials: check_trials(a.trials.unwrap_or(500), 100)?,
        seed: a.seed.unwrap_or(0),
    };
    for &n in &cfg.norms {
        check_positive("norms", n)?;
    }
    let mut run = Run::new("deviation", &g.out_dir, &cfg)?;
    let rep = estimate_deviation_tail(cfg.dim, &cfg.norms, cfg.epsilon, cfg.trials, cfg.seed, g.workers)?;
    let rows: Vec<Vec<String>> = rep
        .rows
        .iter()
        .map(|r| {
            vec![f(r.norm), f(r.threshold), r.trials.to_string(), f(r.exceedance), f(r.half_width), f(r.median)]
        })
        .collect();
    let header = ["norm", "threshold", "trials", "exceedance", "half_width", "median_deviation"];
    run.file("summary.csv", |w| io::write_rows(w, &header, &rows))?;
    let trials: Vec<Vec<String>> =
        rep.per_trial.iter().map(|(n, t, d)| vec![f(*n), t.to_string(), f(*d)]).collect();
    run.file("trials.csv", |w| io::write_rows(w, &["norm", "trial", "deviation_sup"], &trials))?;
    run.count("log_median_slope", rep.slope);
    run.check("exceedance_non_increasing", rep.non_increasing_within_half_widths());
    run.check(
        "exceedance_at_largest_norm_at_most_5pct",
        rep.rows.last().is_some_and(|r| r.exceedance <= 0.05),
    );
    run.check("slope_in_0.3_0.7", rep.slope.is_some_and(|s| (0.3..=0.7).contains(&s)));
    finish(run, start, g)
}

#[derive(Serialize)]
struct SpacingConfig {
    dim: usize,
    start_norm: f64,
    trials: usize,
    seed: u64,
    constants: Constants,
}

pub fn spacing(a: &SpacingArgs, g: &Globals) -> Result<bool, CliError> {
    let start = Instant::now();
    let dim = check_dim(a.dim.unwrap_or(2))?;
    let cfg = SpacingConfig {
        dim,
        start_norm: check_positive("start-norm", a.start_norm.unwrap_or(200.0))?,
        trials: check_trials(a.trials.unwrap_or(1000), 100)?,
        seed: a.seed.unwrap_or(0),
        constants: a.constants.resolve(dim)?,
    };
    let mut run = Run::new("spacing", &g.out_dir, &cfg)?;
    let rep = estimate_spacing_tails(dim, cfg.start_norm, &cfg.constants, cfg.trials, cfg.seed, g.workers)?;
    let tails: [(&str, &TailEstimate); 4] = [
        ("tau_gaps.csv", &rep.tau_gaps),
        ("w_gaps.csv", &rep.w_gaps),
        ("block_lengths.csv", &rep.block_lengths),
        ("r_theta.csv", &rep.r_theta),
    ];
    for (name, est) in tails {
        run.file(name, |w| io::write_tail(w, est, None))?;
    }
    let mut strata = Vec::new();
    for (k, est) in rep.tau_gaps_by_index.iter().enumerate() {
        if let Some(est) = est {
            for i in 0..est.thresholds.len() {
                strata.push(vec![
                    k.to_string(),
                    f(est.thresholds[i]),
                    f(est.survival[i]),
                    f(est.half_width[i]),
                    est.trials.to_string(),
                ]);
            }
        }
    }
    let header = ["index", "threshold", "survival", "half_width", "samples"];
    run.file("tau_gaps_by_index.csv", |w| io::write_rows(w, &header, &strata))?;
    run.count("theta_mean", rep.theta_mean);
    run.count("i_theta_max", rep.i_theta_max);
    run.count("tau_log_slope", rep.tau_log_slope);
    run.count("block_log_slope", rep.block_log_slope);
    run.count("r_theta_correlation", rep.r_theta_correlation);
    run.check("tau_strictly_decreasing", rep.tau_strictly_decreasing());
    run.check("tau_halving", rep.tau_halving());
    run.check("r_theta_correlation_at_most_-0.9", rep.r_theta_correlation.is_some_and(|c| c <= -0.9));
    run.check(
        "survivals_monotone",
        rep.w_gaps.is_monotone() && rep.block_lengths.is_monotone() && rep.r_theta.is_monotone(),
    );
    finish(run, start, g)
}

#[derive(Serialize)]
struct SymmetryConfig {
    dim: usize,
    start_norm: f64,
    trials: usize,
    min_applicable: usize,
    max_trials: usize,
    seed: u64,
    constants: Constants,
}

pub fn symmetry(a: &SymmetryArgs, g: &Globals) -> Result<bool, CliError> {
    let start = Instant::now();
    let dim = check_dim(a.dim.unwrap_or(2))?;
    let cfg = SymmetryConfig {
        dim,
        start_norm: check_positive("start-norm", a.start_norm.unwrap_or(100.0))?,
        trials: check_trials(a.trials.unwrap_or(200), 100)?,
        min_applicable: a.min_applicable.unwrap_or(50),
        max_trials: a.max_trials.unwrap_or(2000),
        seed: a.seed.unwrap_or(0),
        constants: a.constants.resolve(dim)?,
    };
    let mut run = Run::new("symmetry", &g.out_dir, &cfg)?;
    let rep = run_symmetry_campaign(
        dim,
        cfg.start_norm,
        &cfg.constants,
        cfg.trials,
        cfg.seed,
        cfg.min_applicable,
        cfg.max_trials,
        g.workers,
    )?;
    run.json("report.json", &rep)?;
    let rows: Vec<Vec<String>> = rep
        .failures
        .iter()
        .map(|x| vec![x.trial.to_string(), x.field_seed.to_string(), f(x.negation_error), x.prefix_identical.to_string()])
        .collect();
    let header = ["trial", "field_seed", "negation_error", "prefix_identical"];
    run.file("failures.csv", |w| io::write_rows(w, &header, &rows))?;
    run.count("trials_run", rep.trials_run);
    run.count("applicable", rep.applicable);
    run.check("enough_applicable_runs", rep.sufficient());
    run.check("exact_negation", rep.failures.is_empty());
    run.check("pooled_sign_test_not_rejected_at_0.01", rep.pooled_sign.is_none_or(|t| t.p_value >= 0.01));
    finish(run, start, g)
}

#[derive(Serialize)]
struct LemmasConfig {
    lemmas: Vec<LemmaKind>,
    dim: usize,
    instances: usize,
    seed: u64,
}

pub fn lemmas(a: &LemmasArgs, g: &Globals) -> Result<bool, CliError> {
    let start = Instant::now();
    let lemmas = match a.lemma.as_deref().unwrap_or("all") {
        "all" => LemmaKind::ALL.to_vec(),
        name => vec![LemmaKind::from_name(name).map_err(|e| CliError::Config(e.to_string()))?],
    };
    let cfg = LemmasConfig {
        lemmas,
        dim: check_dim(a.dim.unwrap_or(2))?,
        instances: check_trials(a.instances.unwrap_or(100_000), 1)?,
        seed: a.seed.unwrap_or(0),
    };
    let mut run = Run::new("lemmas", &g.out_dir, &cfg)?;
    let mut rows = Vec::new();
    let mut failing = Vec::new();
    for &kind in &cfg.lemmas {
        let rep = run_lemma_fuzz(kind, cfg.dim, cfg.instances, cfg.seed, g.workers)?;
        rows.push(vec![
            rep.lemma.to_string(),
            rep.dim.to_string(),
            rep.instances.to_string(),
            rep.draws.to_string(),
            f(rep.acceptance_rate),
            rep.violations.to_string(),
            rep.invalid.to_string(),
        ]);
        run.check(&format!("{}_holds", rep.lemma), rep.passed());
        failing.push(serde_json::json!({ "lemma": rep.lemma, "instances": rep.failing }));
    }
    let header = ["lemma", "dim", "instances", "draws", "acceptance_rate", "violations", "invalid"];
    run.file("fuzz.csv", |w| io::write_rows(w, &header, &rows))?;
    run.json("failing.json", &failing)?;
    finish(run, start, g)
}

pub fn planarity(a: &PointsArgs, g: &Globals) -> Result<bool, CliError> {
    let start = Instant::now();
    let cfg = a.resolve()?;
    if cfg.sample.as_ref().is_some_and(|s| s.dim != 2) {
        return Err(CliError::Config("planarity requires dim = 2".into()));
    }
    let mut run = Run::new("planarity", &g.out_dir, &cfg)?;
    let pts = cfg.load(&mut run)?;
    let tree = build_rst(&pts);
    let crossings = check_planarity(&tree)?;
    run.file("crossings.csv", |w| io::write_crossings(w, &crossings))?;
    run.count("edges", tree.len());
    run.count("crossings", crossings.len());
    run.check("no_crossings", crossings.is_empty());
    finish(run, start, g)
}

pub fn tree(a: &PointsArgs, g: &Globals) -> Result<bool, CliError> {
    let start = Instant::now();
    let cfg = a.resolve()?;
    let mut run = Run::new("tree", &g.out_dir, &cfg)?;
    let pts = cfg.load(&mut run)?;
    let tree = build_rst(&pts);
    let defects = tree.validate();
    let rows: Vec<Vec<String>> = defects.iter().map(|d| vec![format!("{d:?}")]).collect();
    run.file("defects.csv", |w| io::write_rows(w, &["defect"], &rows))?;
    run.count("vertices", tree.len());
    run.count("defects", defects.len());
    run.check("valid_tree", defects.is_empty());
    finish(run, start, g)
}
