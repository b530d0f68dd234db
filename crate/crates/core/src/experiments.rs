//! Named experiments with deterministic seeding and flat, self-describing
//! records.
//!
//! A record echoes the full experiment config and the master seed, which
//! together reproduce it bit for bit. The worker count and wall-clock time
//! are deliberately left out so that records never depend on them.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::capacity::{
    ball_capacity_exact, capsule_capacity_mc, check_transient_dim, CapacityConfig,
};
use crate::covering::{shepp_classify_harmonic, simulate_covering, Coverage, LengthSequence};
use crate::error::{ensure, Error, Result};
use crate::excursions::{
    ball_measure_exact, estimate_a_theta_measure, estimate_ball_measure, gap_sequence,
    order_statistics_check, sample_shadow_ppp, shadow_measure_exact, visibility_to_infinity_sim,
    ExcursionConfig, MeasureEstimate, MeasureMethod, ShadowProcessSample,
};
use crate::geometry::{positive, Capsule, PointD, Segment};
use crate::interlacements::{
    estimate_f_mc, estimate_pvis_mc, exponent_fit, PointEstimate, VisibilityConfig,
    VisibilityEstimate,
};
use crate::rng::Replicator;
use crate::stats::{
    ks_exponential_test, kuiper_uniform_test, mean_var, variance_mean_ratio, wilson_ci,
    StatTestResult,
};

pub const CODE_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), "-", env!("CARGO_PKG_VERSION"));

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Ball,
    Capsule,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapacityExperiment {
    pub d: usize,
    pub shape: Shape,
    pub radius: f64,
    /// Axis length; ignored for balls.
    pub length: f64,
    pub mc: CapacityConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterlacementExperiment {
    pub visibility: VisibilityConfig,
    /// Capacity estimator for the reference value `e^{-α·cap([0,r·e_1]^ρ)}`.
    pub capacity: CapacityConfig,
    /// Bootstrap resamples for the exponent fit; unused by the f experiment.
    pub n_boot: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "target", rename_all = "snake_case")]
pub enum MeasureTarget {
    /// Excursions whose shadow has length at least `theta`.
    Shadow { theta: f64, method: MeasureMethod },
    /// Excursions hitting `B(0, radius)`.
    Ball { radius: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExcursionMeasureExperiment {
    pub target: MeasureTarget,
    pub eps: f64,
    pub n: u64,
    pub excursion: ExcursionConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShadowPppExperiment {
    pub alpha: f64,
    pub theta_min: f64,
    pub replicas: u64,
    /// Significance level of the KS and Kuiper tests.
    pub level: f64,
    /// Ranks for the order-statistic check.
    pub ranks: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoveringExperiment {
    /// Harmonic lengths `l_n = c/n` on the unit circle.
    pub c: f64,
    pub n_arcs: Vec<usize>,
    pub replicas: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseDiagramExperiment {
    pub alphas: Vec<f64>,
    pub theta_mins: Vec<f64>,
    pub replicas: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "kebab-case")]
pub enum ExperimentConfig {
    Capacity(CapacityExperiment),
    InterlacementF(InterlacementExperiment),
    InterlacementPvis(InterlacementExperiment),
    ExcursionMeasure(ExcursionMeasureExperiment),
    ShadowPpp(ShadowPppExperiment),
    Covering(CoveringExperiment),
    PhaseDiagram(PhaseDiagramExperiment),
}

impl ExperimentConfig {
    pub fn id(&self) -> &'static str {
        match self {
            ExperimentConfig::Capacity(_) => "capacity",
            ExperimentConfig::InterlacementF(_) => "interlacement-f",
            ExperimentConfig::InterlacementPvis(_) => "interlacement-pvis",
            ExperimentConfig::ExcursionMeasure(_) => "excursion-measure",
            ExperimentConfig::ShadowPpp(_) => "shadow-ppp",
            ExperimentConfig::Covering(_) => "covering",
            ExperimentConfig::PhaseDiagram(_) => "phase-diagram",
        }
    }

    /// Cheap parameter checks, run before any sampling.
    pub fn validate(&self) -> Result<()> {
        match self {
            ExperimentConfig::Capacity(c) => {
                check_transient_dim(c.d)?;
                capacity_target(c)?;
                ensure(c.mc.n >= 1, "n", "need at least one sample")?;
                ensure(c.mc.launch_factor > 1.0, "launch_factor", "must exceed 1")?;
                ensure(
                    c.mc.kill_factor >= 10.0,
                    "kill_factor",
                    "must be at least 10",
                )?;
                positive("shell_frac", c.mc.shell_frac)
            }
            ExperimentConfig::InterlacementF(c) | ExperimentConfig::InterlacementPvis(c) => {
                c.visibility.validate()?;
                ensure(
                    !c.visibility.r_values.is_empty(),
                    "r_values",
                    "need at least one r",
                )?;
                ensure(c.capacity.n >= 1, "n_capacity", "need at least one sample")?;
                ensure(
                    c.capacity.launch_factor > 1.0,
                    "launch_factor",
                    "must exceed 1",
                )?;
                if matches!(self, ExperimentConfig::InterlacementPvis(_)) {
                    ensure(
                        c.visibility.r_values.iter().all(|r| *r >= 1.0),
                        "r_values",
                        "P_vis needs r >= 1",
                    )?;
                }
                Ok(())
            }
            ExperimentConfig::ExcursionMeasure(c) => {
                ensure(c.eps > 0.0 && c.eps < 1.0, "eps", "must lie in (0, 1)")?;
                ensure(c.n >= 1, "n", "need at least one sample")?;
                c.excursion.validate()?;
                match c.target {
                    MeasureTarget::Shadow { theta, .. } => {
                        ensure(theta > 0.0 && theta <= TAU, "theta", "must lie in (0, 2π]")
                    }
                    MeasureTarget::Ball { radius } => ensure(
                        radius > 0.0 && radius < 1.0 - c.eps,
                        "radius",
                        "need 0 < radius < 1 - eps",
                    ),
                }
            }
            ExperimentConfig::ShadowPpp(c) => {
                ensure(
                    c.alpha > 0.0 && c.alpha.is_finite(),
                    "alpha",
                    "must be positive",
                )?;
                ensure(
                    c.theta_min > 0.0 && c.theta_min < TAU,
                    "theta_min",
                    "must lie in (0, 2π)",
                )?;
                ensure(c.replicas >= 2, "replicas", "need at least two replicas")?;
                ensure(
                    c.level > 0.0 && c.level < 1.0,
                    "level",
                    "must lie in (0, 1)",
                )?;
                ensure(
                    c.ranks.iter().all(|n| *n >= 1),
                    "ranks",
                    "must be at least 1",
                )
            }
            ExperimentConfig::Covering(c) => {
                ensure(
                    c.c >= 0.0 && c.c.is_finite(),
                    "c",
                    "must be finite and >= 0",
                )?;
                ensure(
                    !c.n_arcs.is_empty(),
                    "n_arcs",
                    "need at least one arc count",
                )?;
                ensure(c.replicas >= 1, "replicas", "need at least one replica")
            }
            ExperimentConfig::PhaseDiagram(c) => {
                ensure(!c.alphas.is_empty(), "alphas", "need at least one level")?;
                ensure(
                    c.alphas.iter().all(|a| *a >= 0.0 && a.is_finite()),
                    "alphas",
                    "must be finite and >= 0",
                )?;
                ensure(
                    !c.theta_mins.is_empty(),
                    "theta_mins",
                    "need at least one truncation",
                )?;
                ensure(
                    c.theta_mins.iter().all(|t| *t > 0.0 && *t < TAU),
                    "theta_mins",
                    "must lie in (0, 2π)",
                )?;
                ensure(c.replicas >= 1, "replicas", "need at least one replica")
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UncertaintyMethod {
    BinomialWilson,
    Bootstrap,
    StandardError,
    /// Distribution-free interval for a median from order statistics.
    RankInterval,
    /// Closed-form or deterministic value.
    Exact,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Uncertainty {
    pub method: UncertaintyMethod,
    pub std_err: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
}

impl Uncertainty {
    pub fn exact() -> Self {
        Self {
            method: UncertaintyMethod::Exact,
            std_err: Some(0.0),
            ci_low: None,
            ci_high: None,
        }
    }

    pub fn std_err(se: f64) -> Self {
        Self {
            method: UncertaintyMethod::StandardError,
            std_err: Some(se),
            ci_low: None,
            ci_high: None,
        }
    }

    fn wilson(se: f64, lo: f64, hi: f64) -> Self {
        Self {
            method: UncertaintyMethod::BinomialWilson,
            std_err: Some(se),
            ci_low: Some(lo),
            ci_high: Some(hi),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub experiment: String,
    pub config: ExperimentConfig,
    pub seed: u64,
    pub metric: String,
    /// Coordinates of the estimate within the experiment, such as `r`.
    pub point: BTreeMap<String, f64>,
    pub estimate: f64,
    /// Bracket end with UNRESOLVED outcomes counted against the event.
    pub pessimistic: Option<f64>,
    pub uncertainty: Uncertainty,
    pub n: u64,
    pub test: Option<StatTestResult>,
    pub warning: Option<String>,
    pub version: String,
}

/// Records plus the errors of sub-operations that failed.
#[derive(Clone, Debug, Default)]
pub struct RunOutput {
    pub records: Vec<ExperimentRecord>,
    pub errors: Vec<String>,
}

struct Emitter<'a> {
    cfg: &'a ExperimentConfig,
    seed: u64,
    out: RunOutput,
}

impl<'a> Emitter<'a> {
    fn push(
        &mut self,
        metric: &str,
        point: &[(&str, f64)],
        estimate: f64,
        uncertainty: Uncertainty,
        n: u64,
    ) -> &mut ExperimentRecord {
        self.out.records.push(ExperimentRecord {
            experiment: self.cfg.id().to_string(),
            config: self.cfg.clone(),
            seed: self.seed,
            metric: metric.to_string(),
            point: point.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            estimate,
            pessimistic: None,
            uncertainty,
            n,
            test: None,
            warning: None,
            version: CODE_VERSION.to_string(),
        });
        self.out.records.last_mut().expect("just pushed")
    }

    fn visibility(&mut self, metric: &str, v: &VisibilityEstimate) {
        let rec = self.push(
            metric,
            &[("r", v.r)],
            v.p_hat,
            Uncertainty::wilson(v.std_err(), v.ci_low, v.ci_high),
            v.n_reps,
        );
        rec.pessimistic = Some(v.pessimistic_p_hat);
    }

    fn measure(&mut self, metric: &str, point: &[(&str, f64)], m: &MeasureEstimate) {
        let rec = self.push(
            metric,
            point,
            m.value,
            Uncertainty::wilson(m.std_err, m.ci_low, m.ci_high),
            m.n,
        );
        rec.warning = m.warning.clone();
    }

    fn test(&mut self, metric: &str, point: &[(&str, f64)], t: StatTestResult) {
        let rec = self.push(metric, point, t.statistic, Uncertainty::exact(), t.n as u64);
        rec.uncertainty.std_err = None;
        rec.test = Some(t);
    }

    fn fail(&mut self, what: &str, e: Error) {
        self.out.errors.push(format!("{what}: {e}"));
    }
}

/// Runs one experiment. Parameter errors are returned up front; failures of
/// individual sub-operations are collected next to the records that did
/// succeed.
pub fn run_experiment(cfg: &ExperimentConfig, seed: u64, workers: usize) -> Result<RunOutput> {
    cfg.validate()?;
    let rep = Replicator::new(seed).with_workers(workers);
    let mut em = Emitter {
        cfg,
        seed,
        out: RunOutput::default(),
    };
    match cfg {
        ExperimentConfig::Capacity(c) => run_capacity(&mut em, c, &rep)?,
        ExperimentConfig::InterlacementF(c) => run_f(&mut em, c, seed, &rep),
        ExperimentConfig::InterlacementPvis(c) => run_pvis(&mut em, c, seed, &rep),
        ExperimentConfig::ExcursionMeasure(c) => run_measure(&mut em, c, &rep)?,
        ExperimentConfig::ShadowPpp(c) => run_shadow_ppp(&mut em, c, &rep)?,
        ExperimentConfig::Covering(c) => run_covering(&mut em, c, &rep)?,
        ExperimentConfig::PhaseDiagram(c) => run_phase(&mut em, c, &rep)?,
    }
    Ok(em.out)
}

fn capacity_target(c: &CapacityExperiment) -> Result<Capsule> {
    let o = PointD::origin(c.d)?;
    match c.shape {
        Shape::Ball => Capsule::ball(o, c.radius),
        Shape::Capsule => {
            positive("length", c.length)?;
            let half = 0.5 * c.length;
            Capsule::new(
                Segment::new(
                    PointD::on_axis(c.d, 0, -half)?,
                    PointD::on_axis(c.d, 0, half)?,
                )?,
                c.radius,
            )
        }
    }
}

fn run_capacity(em: &mut Emitter, c: &CapacityExperiment, rep: &Replicator) -> Result<()> {
    let target = capacity_target(c)?;
    let est = capsule_capacity_mc(&target, &c.mc, rep)?;
    let rec = em.push(
        "capacity",
        &[],
        est.value,
        Uncertainty::std_err(est.std_err),
        est.n_samples,
    );
    rec.pessimistic = Some(est.lower_value);
    em.push(
        "kill_bias_bound",
        &[],
        est.bias_bound,
        Uncertainty::exact(),
        est.n_samples,
    );
    if c.shape == Shape::Ball {
        em.push(
            "capacity_exact",
            &[],
            ball_capacity_exact(c.radius, c.d)?,
            Uncertainty::exact(),
            0,
        );
    }
    Ok(())
}

/// `e^{-α·cap}` for the capsule `[0, r·e_1]^ρ`, with a delta-method error.
pub fn f_from_capacity(
    r: f64,
    vis: &VisibilityConfig,
    capacity: &CapacityConfig,
    rep: &Replicator,
) -> Result<PointEstimate> {
    let o = PointD::origin(vis.d)?;
    let c = Capsule::new(Segment::new(o, PointD::on_axis(vis.d, 0, r)?)?, vis.rho)?;
    // Distinct streams per r.
    let label_rep = Replicator::new(rep.seed ^ r.to_bits()).with_workers(rep.workers);
    let est = capsule_capacity_mc(&c, capacity, &label_rep)?;
    let f = (-vis.alpha * est.value).exp();
    Ok(PointEstimate::new(f, f * vis.alpha * est.std_err))
}

fn visibility_for(c: &InterlacementExperiment, seed: u64) -> VisibilityConfig {
    VisibilityConfig {
        seed,
        ..c.visibility.clone()
    }
}

fn run_f(em: &mut Emitter, c: &InterlacementExperiment, seed: u64, rep: &Replicator) {
    let vis = visibility_for(c, seed);
    for &r in &vis.r_values {
        match estimate_f_mc(r, &vis, rep.workers) {
            Ok(v) => em.visibility("f", &v),
            Err(e) => em.fail(&format!("f at r = {r}"), e),
        }
        match f_from_capacity(r, &vis, &c.capacity, rep) {
            Ok(p) => {
                em.push(
                    "f_capacity",
                    &[("r", r)],
                    p.value,
                    Uncertainty::std_err(p.std_err),
                    c.capacity.n,
                );
            }
            Err(e) => em.fail(&format!("capacity at r = {r}"), e),
        }
    }
}

fn run_pvis(em: &mut Emitter, c: &InterlacementExperiment, seed: u64, rep: &Replicator) {
    let vis = visibility_for(c, seed);
    let mut fit_rows = Vec::new();
    for &r in &vis.r_values {
        let p = match estimate_pvis_mc(r, &vis, rep.workers) {
            Ok(p) => p,
            Err(e) => {
                em.fail(&format!("P_vis at r = {r}"), e);
                continue;
            }
        };
        em.visibility("pvis", &p.pvis);
        em.visibility("f_same_sample", &p.f);
        em.push(
            "n_directions",
            &[("r", r)],
            p.n_directions as f64,
            Uncertainty::exact(),
            1,
        );
        match f_from_capacity(r, &vis, &c.capacity, rep) {
            Ok(f) => {
                em.push(
                    "f_capacity",
                    &[("r", r)],
                    f.value,
                    Uncertainty::std_err(f.std_err),
                    c.capacity.n,
                );
                fit_rows.push((r, PointEstimate::from(&p.pvis), f));
            }
            Err(e) => em.fail(&format!("capacity at r = {r}"), e),
        }
    }
    if fit_rows.len() >= 3 {
        let r: Vec<f64> = fit_rows.iter().map(|x| x.0).collect();
        let pv: Vec<PointEstimate> = fit_rows.iter().map(|x| x.1).collect();
        let f: Vec<PointEstimate> = fit_rows.iter().map(|x| x.2).collect();
        match exponent_fit(&r, &pv, &f, c.n_boot, seed) {
            Ok(fit) => {
                em.push(
                    "exponent_slope",
                    &[("d", vis.d as f64)],
                    fit.slope,
                    Uncertainty {
                        method: UncertaintyMethod::Bootstrap,
                        std_err: Some(fit.slope_std_err),
                        ci_low: Some(fit.band_low),
                        ci_high: Some(fit.band_high),
                    },
                    fit.n_boot,
                );
            }
            Err(e) => em.fail("exponent fit", e),
        }
    }
}

fn run_measure(em: &mut Emitter, c: &ExcursionMeasureExperiment, rep: &Replicator) -> Result<()> {
    match c.target {
        MeasureTarget::Shadow { theta, method } => {
            let m = estimate_a_theta_measure(theta, c.eps, c.n, method, &c.excursion, rep)?;
            em.measure("a_theta_measure", &[("theta", theta)], &m);
            em.push(
                "a_theta_exact",
                &[("theta", theta)],
                shadow_measure_exact(theta),
                Uncertainty::exact(),
                0,
            );
        }
        MeasureTarget::Ball { radius } => {
            let m = estimate_ball_measure(radius, c.eps, c.n, rep)?;
            em.measure("ball_measure", &[("radius", radius)], &m);
            em.push(
                "ball_measure_exact",
                &[("radius", radius)],
                ball_measure_exact(radius),
                Uncertainty::exact(),
                0,
            );
        }
    }
    Ok(())
}

fn run_shadow_ppp(em: &mut Emitter, c: &ShadowPppExperiment, rep: &Replicator) -> Result<()> {
    let samples: Vec<ShadowProcessSample> = rep
        .run("shadow-ppp", c.replicas, |_, rng| {
            sample_shadow_ppp(c.alpha, c.theta_min, rng)
        })
        .into_iter()
        .collect::<Result<_>>()?;
    let n = c.replicas;
    let at = [("alpha", c.alpha), ("theta_min", c.theta_min)];
    let counts: Vec<f64> = samples.iter().map(|s| s.arcs.len() as f64).collect();
    let (m, v) = mean_var(&counts);
    em.push(
        "count_mean",
        &at,
        m,
        Uncertainty::std_err((v / n as f64).sqrt()),
        n,
    );
    let expected = 8.0 * c.alpha * (1.0 / c.theta_min - 1.0 / TAU);
    em.push("count_expected", &at, expected, Uncertainty::exact(), 0);
    let full: Vec<f64> = samples.iter().map(|s| s.n_full as f64).collect();
    let (mf, vf) = mean_var(&full);
    em.push(
        "full_count_mean",
        &at,
        mf,
        Uncertainty::std_err((vf / n as f64).sqrt()),
        n,
    );
    em.push(
        "full_count_expected",
        &at,
        4.0 * c.alpha / PI,
        Uncertainty::exact(),
        0,
    );
    match variance_mean_ratio(&counts, 0.9, 1.1) {
        Ok(t) => em.test("count_variance_mean_ratio", &at, t),
        Err(e) => em.fail("variance/mean ratio", e),
    }
    let gaps: Vec<f64> = samples
        .iter()
        .flat_map(|s| gap_sequence(s).deltas)
        .collect();
    match ks_exponential_test(&gaps, 8.0 * c.alpha, c.level) {
        Ok(t) => em.test("gap_ks_exponential", &at, t),
        Err(e) => em.fail("gap KS test", e),
    }
    let centers: Vec<f64> = samples
        .iter()
        .flat_map(|s| s.arcs.iter().map(|a| a.center))
        .collect();
    match kuiper_uniform_test(&centers, TAU, c.level) {
        Ok(t) => em.test("center_kuiper_uniform", &at, t),
        Err(e) => em.fail("center Kuiper test", e),
    }
    if !c.ranks.is_empty() {
        match order_statistics_check(&samples, &c.ranks) {
            Ok(report) => {
                for row in &report.rows {
                    em.push(
                        "order_stat_median_scaled",
                        &[
                            ("alpha", c.alpha),
                            ("theta_min", c.theta_min),
                            ("rank", row.n as f64),
                        ],
                        row.median_scaled,
                        Uncertainty {
                            method: UncertaintyMethod::RankInterval,
                            std_err: None,
                            ci_low: Some(row.median_scaled_low),
                            ci_high: Some(row.median_scaled_high),
                        },
                        n,
                    );
                }
            }
            Err(e) => em.fail("order statistics", e),
        }
    }
    Ok(())
}

fn run_covering(em: &mut Emitter, c: &CoveringExperiment, rep: &Replicator) -> Result<()> {
    let covered = shepp_classify_harmonic(c.c)? == Coverage::Covered;
    em.push(
        "shepp_covered",
        &[("c", c.c)],
        f64::from(u8::from(covered)),
        Uncertainty::exact(),
        0,
    );
    let l = LengthSequence::harmonic(c.c)?;
    for &n_arcs in &c.n_arcs {
        // Same substream per replica for every N: smaller runs place a
        // prefix of the same arcs.
        let uncovered: Vec<f64> = rep.run("covering", c.replicas, |_, rng| {
            simulate_covering(&l, n_arcs, rng).uncovered_measure
        });
        let k = uncovered.iter().filter(|m| **m > 0.0).count() as u64;
        let (lo, hi) = wilson_ci(k, c.replicas, 0.95)?;
        let p = k as f64 / c.replicas as f64;
        em.push(
            "survival",
            &[("c", c.c), ("n_arcs", n_arcs as f64)],
            p,
            Uncertainty::wilson((p * (1.0 - p) / c.replicas as f64).sqrt(), lo, hi),
            c.replicas,
        );
    }
    Ok(())
}

fn run_phase(em: &mut Emitter, c: &PhaseDiagramExperiment, rep: &Replicator) -> Result<()> {
    for &alpha in &c.alphas {
        for pt in visibility_to_infinity_sim(alpha, &c.theta_mins, c.replicas, rep)? {
            let p = pt.survival;
            em.push(
                "survival",
                &[("alpha", alpha), ("theta_min", pt.theta_min)],
                p,
                Uncertainty::wilson(
                    (p * (1.0 - p) / pt.n_replicas as f64).sqrt(),
                    pt.ci_low,
                    pt.ci_high,
                ),
                pt.n_replicas,
            );
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Ndjson,
    Table,
}

/// Column names of the tabular format, in order.
pub const TABLE_COLUMNS: [&str; 13] = [
    "experiment",
    "metric",
    "point",
    "estimate",
    "pessimistic",
    "method",
    "std_err",
    "ci_low",
    "ci_high",
    "n",
    "seed",
    "version",
    "warning",
];

pub fn write_ndjson<W: Write>(records: &[ExperimentRecord], mut w: W) -> Result<()> {
    for r in records {
        let line = serde_json::to_string(r).map_err(|e| Error::Io(e.to_string()))?;
        writeln!(w, "{line}").map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::Io(e.to_string()))
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Flat table with a header row. `point` is rendered as `k=v;k=v`; the
/// config echo is only in the ndjson format.
pub fn write_table<W: Write>(records: &[ExperimentRecord], w: W) -> Result<()> {
    let io = |e: csv::Error| Error::Io(e.to_string());
    let mut out = csv::Writer::from_writer(w);
    out.write_record(TABLE_COLUMNS).map_err(io)?;
    for r in records {
        let point = r
            .point
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(";");
        let method = serde_json::to_value(r.uncertainty.method)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_default();
        out.write_record([
            r.experiment.clone(),
            r.metric.clone(),
            point,
            r.estimate.to_string(),
            opt(r.pessimistic),
            method,
            opt(r.uncertainty.std_err),
            opt(r.uncertainty.ci_low),
            opt(r.uncertainty.ci_high),
            r.n.to_string(),
            r.seed.to_string(),
            r.version.clone(),
            r.warning.clone().unwrap_or_default(),
        ])
        .map_err(io)?;
    }
    out.flush().map_err(|e| Error::Io(e.to_string()))
}

pub fn write_records<W: Write>(
    records: &[ExperimentRecord],
    format: OutputFormat,
    w: W,
) -> Result<()> {
    match format {
        OutputFormat::Ndjson => write_ndjson(records, w),
        OutputFormat::Table => write_table(records, w),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_configs() -> Vec<ExperimentConfig> {
        vec![
            ExperimentConfig::Capacity(CapacityExperiment {
                d: 3,
                shape: Shape::Ball,
                radius: 1.0,
                length: 0.0,
                mc: CapacityConfig {
                    n: 5000,
                    ..CapacityConfig::default()
                },
            }),
            ExperimentConfig::ShadowPpp(ShadowPppExperiment {
                alpha: 0.5,
                theta_min: 0.05,
                replicas: 50,
                level: 0.01,
                ranks: vec![1, 5],
            }),
            ExperimentConfig::Covering(CoveringExperiment {
                c: 0.5,
                n_arcs: vec![100, 1000],
                replicas: 30,
            }),
            ExperimentConfig::PhaseDiagram(PhaseDiagramExperiment {
                alphas: vec![0.1, 1.2],
                theta_mins: vec![0.01, 0.001],
                replicas: 20,
            }),
            ExperimentConfig::ExcursionMeasure(ExcursionMeasureExperiment {
                target: MeasureTarget::Shadow {
                    theta: PI,
                    method: MeasureMethod::Halfplane,
                },
                eps: 1e-3,
                n: 20_000,
                excursion: ExcursionConfig::default(),
            }),
        ]
    }

    #[test]
    fn records_round_trip_and_carry_uncertainty() {
        for cfg in small_configs() {
            let out = run_experiment(&cfg, 7, 1).unwrap();
            assert!(out.errors.is_empty(), "{:?}", out.errors);
            assert!(!out.records.is_empty());
            for r in &out.records {
                assert_eq!(r.config, cfg);
                let line = serde_json::to_string(r).unwrap();
                let back: ExperimentRecord = serde_json::from_str(&line).unwrap();
                assert_eq!(back.config, cfg);
                assert_eq!(serde_json::to_string(&back).unwrap(), line);
                let u = r.uncertainty;
                assert!(u.std_err.is_some() || u.ci_low.is_some() || r.test.is_some());
            }
        }
    }

    #[test]
    fn records_are_worker_independent() {
        for cfg in small_configs() {
            let mut a = Vec::new();
            let mut b = Vec::new();
            write_ndjson(&run_experiment(&cfg, 3, 1).unwrap().records, &mut a).unwrap();
            write_ndjson(&run_experiment(&cfg, 3, 4).unwrap().records, &mut b).unwrap();
            assert_eq!(a, b, "{}", cfg.id());
        }
    }

    #[test]
    fn table_has_header_and_one_row_per_record() {
        let cfg = small_configs().remove(0);
        let out = run_experiment(&cfg, 1, 1).unwrap();
        let mut buf = Vec::new();
        write_table(&out.records, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], TABLE_COLUMNS.join(","));
        assert_eq!(lines.len(), out.records.len() + 1);
    }

    #[test]
    fn invalid_parameters_fail_before_sampling() {
        let bad = ExperimentConfig::PhaseDiagram(PhaseDiagramExperiment {
            alphas: vec![0.1],
            theta_mins: vec![7.0],
            replicas: 10,
        });
        assert!(matches!(
            run_experiment(&bad, 1, 1),
            Err(Error::InvalidParameter { .. })
        ));
        let bad = ExperimentConfig::Capacity(CapacityExperiment {
            d: 2,
            shape: Shape::Ball,
            radius: 1.0,
            length: 0.0,
            mc: CapacityConfig::default(),
        });
        assert!(run_experiment(&bad, 1, 1).is_err());
    }

    #[test]
    fn pvis_experiment_reports_fit_or_error() {
        let cfg = ExperimentConfig::InterlacementPvis(InterlacementExperiment {
            visibility: VisibilityConfig {
                d: 3,
                alpha: 0.3,
                rho: 0.5,
                r_values: vec![1.0, 1.5, 2.0],
                n_reps: 40,
                eps_rule: crate::interlacements::EpsRule::Constant { eps: 0.3 },
                ..VisibilityConfig::default()
            },
            capacity: CapacityConfig {
                n: 2000,
                launch_factor: 1.1,
                ..CapacityConfig::default()
            },
            n_boot: 200,
        });
        let out = run_experiment(&cfg, 5, 1).unwrap();
        let has_fit = out.records.iter().any(|r| r.metric == "exponent_slope");
        assert!(has_fit || !out.errors.is_empty());
        assert_eq!(out.records.iter().filter(|r| r.metric == "pvis").count(), 3);
    }
}
