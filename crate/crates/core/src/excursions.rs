//! Brownian excursions in the unit disc and their shadows.
//!
//! Three samplers of the shadow length `Θ`:
//! * ε-paths: planar Brownian motion from the circle of radius `1-ε`,
//!   stepped until it reaches the unit circle;
//! * half-plane: `Θ = min(sqrt(T)·R(1), 2π)` with `T = a²/Z²` the hitting
//!   time of 0 from `a = log|x|` and `R(1)` the standard Brownian range;
//! * the shadow point process with intensity `α·8/t² dt` on `(0, 2π)` plus
//!   an independent Poisson(`4α/π`) count of full-circle shadows.

use std::f64::consts::{PI, TAU};

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::covering::ArcCoveringState;
use crate::error::{ensure, Error, Result};
use crate::geometry::{
    angle_range, AngleTracker, PointD, Polyline, ShadowArc, DEFAULT_ORIGIN_EXCLUSION,
};
use crate::quadrature::{integrate, QuadConfig};
use crate::range::{bridge_max, bridge_min, open_unit, sample_brownian_range, RangeDistribution};
use crate::rng::{Replicator, SimRng};
use crate::stats::{quantile, wilson_ci};

/// `μ(A_θ) = 8/θ` for `θ ∈ (0, 2π]`.
pub fn shadow_measure_exact(theta: f64) -> f64 {
    8.0 / theta
}

/// Excursion measure of the paths hitting `B(0, r)`, `-2π / log r`.
pub fn ball_measure_exact(r: f64) -> f64 {
    -TAU / r.ln()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExcursionConfig {
    /// Step standard deviation over the distance to the unit circle.
    pub step_factor: f64,
    /// Lower bound on the step standard deviation near the boundary.
    pub step_floor: f64,
    /// The path stops once `|z| >= 1 - boundary_tol`.
    pub boundary_tol: f64,
    pub origin_exclusion: f64,
    pub max_steps: usize,
    /// Widen the angular range by the Brownian-bridge extremes of each step.
    pub bridge_extremes: bool,
}

impl Default for ExcursionConfig {
    fn default() -> Self {
        Self {
            step_factor: 0.1,
            step_floor: 1e-5,
            boundary_tol: 1e-6,
            origin_exclusion: DEFAULT_ORIGIN_EXCLUSION,
            max_steps: 50_000_000,
            bridge_extremes: true,
        }
    }
}

impl ExcursionConfig {
    pub fn validate(&self) -> Result<()> {
        ensure(
            self.step_factor > 0.0 && self.step_factor <= 0.25,
            "step_factor",
            "must lie in (0, 0.25]",
        )?;
        ensure(self.step_floor > 0.0, "step_floor", "must be positive")?;
        ensure(
            self.boundary_tol > 0.0 && self.boundary_tol < 0.5,
            "boundary_tol",
            "must lie in (0, 0.5)",
        )?;
        ensure(
            self.origin_exclusion >= 0.0,
            "origin_exclusion",
            "must be nonnegative",
        )?;
        Ok(())
    }

    /// Step standard deviation at modulus `r`. The `step_factor·r` cap keeps
    /// angular increments far below π/2.
    #[inline]
    fn step_sd(&self, r: f64) -> f64 {
        (self.step_factor * (1.0 - r))
            .max(self.step_floor)
            .min(self.step_factor * r)
    }
}

/// One step of the planar stepper.
struct Step {
    t: f64,
    prev: (f64, f64),
    next: (f64, f64),
    var: f64,
    /// Uniforms in `(0, 1]` for the bridge extremes of the step.
    u: (f64, f64),
}

/// Planar stepper shared by the path and streaming samplers. `visit` sees
/// each step and returns `false` to stop early.
fn run_path<R, F>(start: (f64, f64), cfg: &ExcursionConfig, rng: &mut R, mut visit: F) -> Result<()>
where
    R: Rng + ?Sized,
    F: FnMut(&Step) -> Result<bool>,
{
    let (mut x, mut y) = start;
    let mut t = 0.0;
    let stop = 1.0 - cfg.boundary_tol;
    for _ in 0..cfg.max_steps {
        let r = x.hypot(y);
        if r >= stop {
            return Ok(());
        }
        let sd = cfg.step_sd(r);
        let zx: f64 = rng.sample(StandardNormal);
        let zy: f64 = rng.sample(StandardNormal);
        let (mut nx, mut ny) = (x + sd * zx, y + sd * zy);
        let nr = nx.hypot(ny);
        if nr > 1.0 {
            nx /= nr;
            ny /= nr;
        }
        t += sd * sd;
        let u = if cfg.bridge_extremes {
            (open_unit(rng), open_unit(rng))
        } else {
            (1.0, 1.0)
        };
        let step = Step {
            t,
            prev: (x, y),
            next: (nx, ny),
            var: sd * sd,
            u,
        };
        if !visit(&step)? {
            return Ok(());
        }
        x = nx;
        y = ny;
    }
    Err(Error::StepBudgetExceeded {
        budget: cfg.max_steps,
        last_modulus: x.hypot(y),
    })
}

/// Feeds one step into the tracker, widening by the Brownian-bridge
/// extremes of the angle when enabled. Over a short step the angle moves
/// like a Brownian bridge with variance `var / (|z_prev| |z_next|)`.
fn track_step(tracker: &mut AngleTracker, step: &Step, bridge: bool) -> Result<()> {
    let a0 = tracker.current();
    tracker.push(step.next.0, step.next.1)?;
    if bridge && !tracker.through_origin() {
        let a1 = tracker.current();
        let v = step.var / (step.prev.0.hypot(step.prev.1) * step.next.0.hypot(step.next.1));
        tracker.extend_to(bridge_max(a0, a1, v, step.u.0));
        tracker.extend_to(bridge_min(a0, a1, v, step.u.1));
    }
    Ok(())
}

fn start_point<R: Rng + ?Sized>(eps: f64, rng: &mut R) -> (f64, f64) {
    let phi = rng.random::<f64>() * TAU;
    let r = 1.0 - eps;
    (r * phi.cos(), r * phi.sin())
}

fn check_eps(eps: f64) -> Result<()> {
    ensure(
        eps > 0.0 && eps < 0.5,
        "eps",
        format!("must lie in (0, 0.5), got {eps}"),
    )
}

#[derive(Clone, Debug, PartialEq)]
pub struct Excursion {
    pub path: Polyline,
    pub eps: f64,
    /// Shadow length with bridge-corrected extremes; equals the polyline
    /// range when bridge extremes are disabled.
    pub bridged_theta: f64,
}

fn planar(z: (f64, f64)) -> PointD {
    PointD::from_array(2, [z.0, z.1, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0])
}

/// Full excursion path from a uniform point of the circle of radius `1-eps`.
pub fn sample_excursion_eps<R: Rng + ?Sized>(
    eps: f64,
    cfg: &ExcursionConfig,
    rng: &mut R,
) -> Result<Excursion> {
    check_eps(eps)?;
    cfg.validate()?;
    let start = start_point(eps, rng);
    let mut path = Polyline::start(0.0, planar(start));
    let mut tracker = AngleTracker::new(cfg.origin_exclusion);
    tracker.push(start.0, start.1)?;
    run_path(start, cfg, rng, |step| {
        path.push(step.t, planar(step.next));
        track_step(&mut tracker, step, cfg.bridge_extremes)?;
        Ok(true)
    })?;
    Ok(Excursion {
        path,
        eps,
        bridged_theta: tracker.width(),
    })
}

/// Shadow of an excursion from its polyline.
pub fn shadow_of_excursion(exc: &Excursion) -> Result<ShadowArc> {
    Ok(angle_range(&exc.path, DEFAULT_ORIGIN_EXCLUSION)?.into())
}

/// Shadow length of one ε-excursion without storing the path. With
/// `stop_at = Some(θ)` the walk ends as soon as the range reaches `θ`; the
/// returned value is then only known to be `>= θ`.
pub fn excursion_shadow_length<R: Rng + ?Sized>(
    eps: f64,
    cfg: &ExcursionConfig,
    stop_at: Option<f64>,
    rng: &mut R,
) -> Result<f64> {
    check_eps(eps)?;
    cfg.validate()?;
    let start = start_point(eps, rng);
    let mut tracker = AngleTracker::new(cfg.origin_exclusion);
    tracker.push(start.0, start.1)?;
    let limit = stop_at.unwrap_or(f64::INFINITY);
    run_path(start, cfg, rng, |step| {
        track_step(&mut tracker, step, cfg.bridge_extremes)?;
        Ok(tracker.width() < limit && !tracker.through_origin())
    })?;
    Ok(tracker.width())
}

/// Steps of the discretized path used for `R(1)` in the half-plane sampler.
pub const RANGE_STEPS: usize = 256;

/// Above this value `P(R(1) >= r) <= 4(1 - Φ(r/2)) < 3e-15`.
const RANGE_CUTOFF: f64 = 16.0;

/// Hitting time of 0 by Brownian motion from `a`: `a²/Z²` with `Z`
/// standard normal, whose density is `|a| e^{-a²/2t} / sqrt(2πt³)`.
pub fn sample_hitting_time<R: Rng + ?Sized>(a: f64, rng: &mut R) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    a * a / (z * z)
}

fn check_x_mod(x_mod: f64) -> Result<()> {
    ensure(
        x_mod > 0.0 && x_mod < 1.0,
        "x_mod",
        format!("must lie in (0, 1), got {x_mod}"),
    )
}

/// Shadow length of an excursion from `|x| = x_mod`, sampled as
/// `min(sqrt(T)·R(1), 2π)`.
pub fn sample_shadow_length_halfplane<R: Rng + ?Sized>(x_mod: f64, rng: &mut R) -> Result<f64> {
    check_x_mod(x_mod)?;
    let t = sample_hitting_time(x_mod.ln(), rng);
    let r = sample_brownian_range(RANGE_STEPS, rng);
    Ok((t.sqrt() * r).min(TAU))
}

/// Whether a half-plane shadow from `x_mod` reaches `theta`. `R(1)` is
/// simulated only when the required range is below [`RANGE_CUTOFF`].
fn halfplane_reaches<R: Rng + ?Sized>(a: f64, theta: f64, rng: &mut R) -> bool {
    let t = sample_hitting_time(a, rng);
    let needed = theta / t.sqrt();
    needed <= RANGE_CUTOFF && sample_brownian_range(RANGE_STEPS, rng) >= needed
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeasureMethod {
    Paths,
    Halfplane,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureEstimate {
    /// `(2π/ε)·p̂`.
    pub value: f64,
    pub std_err: f64,
    /// Wilson 95% interval, scaled like `value`.
    pub ci_low: f64,
    pub ci_high: f64,
    pub hits: u64,
    pub n: u64,
    pub eps: f64,
    pub warning: Option<String>,
}

/// Relative CI half-width above which an estimate carries a warning.
pub const TARGET_REL_HALF_WIDTH: f64 = 0.05;

fn scaled_measure(hits: u64, n: u64, eps: f64) -> Result<MeasureEstimate> {
    let scale = TAU / eps;
    let p = hits as f64 / n as f64;
    let (lo, hi) = wilson_ci(hits, n, 0.95)?;
    let value = scale * p;
    let half = 0.5 * scale * (hi - lo);
    let warning = if hits == 0 || half > TARGET_REL_HALF_WIDTH * value {
        Some(format!(
            "n = {n} gives {hits} hits; 95% half-width {:.1}% exceeds the {:.0}% target",
            if value > 0.0 {
                100.0 * half / value
            } else {
                f64::INFINITY
            },
            100.0 * TARGET_REL_HALF_WIDTH
        ))
    } else {
        None
    };
    Ok(MeasureEstimate {
        value,
        std_err: scale * (p * (1.0 - p) / n as f64).sqrt(),
        ci_low: scale * lo,
        ci_high: scale * hi,
        hits,
        n,
        eps,
        warning,
    })
}

/// `(2π/ε)·P(Θ >= θ)` for excursions started at modulus `1-ε`.
pub fn estimate_a_theta_measure(
    theta: f64,
    eps: f64,
    n: u64,
    method: MeasureMethod,
    cfg: &ExcursionConfig,
    rep: &Replicator,
) -> Result<MeasureEstimate> {
    ensure(
        theta > 0.0 && theta <= TAU,
        "theta",
        format!("must lie in (0, 2π], got {theta}"),
    )?;
    check_eps(eps)?;
    cfg.validate()?;
    ensure(n >= 1, "n", "need at least one sample")?;
    let a = (1.0 - eps).ln();
    let blocks: Vec<Result<u64>> = match method {
        MeasureMethod::Halfplane => rep.run_blocks("a-theta-halfplane", n, 1 << 16, |len, rng| {
            Ok((0..len)
                .filter(|_| halfplane_reaches(a, theta, rng))
                .count() as u64)
        }),
        MeasureMethod::Paths => rep.run_blocks("a-theta-paths", n, 1 << 12, |len, rng| {
            let mut hits = 0;
            for _ in 0..len {
                if excursion_shadow_length(eps, cfg, Some(theta), rng)? >= theta {
                    hits += 1;
                }
            }
            Ok(hits)
        }),
    };
    let hits = blocks.into_iter().sum::<Result<u64>>()?;
    scaled_measure(hits, n, eps)
}

/// `(2π/ε)·P(hit B(0, r))` for excursions from modulus `1-ε`, by
/// walk-on-circles in the annulus `r < |z| < 1`.
pub fn estimate_ball_measure(
    r: f64,
    eps: f64,
    n: u64,
    rep: &Replicator,
) -> Result<MeasureEstimate> {
    ensure(r > 0.0 && r < 1.0 - eps, "r", "need 0 < r < 1 - eps")?;
    check_eps(eps)?;
    ensure(n >= 1, "n", "need at least one sample")?;
    let tol = 1e-9;
    let blocks = rep.run_blocks("ball-measure", n, 1 << 16, |len, rng| {
        let mut hits = 0u64;
        for _ in 0..len {
            let (mut x, mut y) = start_point(eps, rng);
            loop {
                let m = x.hypot(y);
                let (outer, inner) = (1.0 - m, m - r);
                if outer < tol {
                    break;
                }
                if inner < tol {
                    hits += 1;
                    break;
                }
                let phi = rng.random::<f64>() * TAU;
                let jump = outer.min(inner);
                x += jump * phi.cos();
                y += jump * phi.sin();
            }
        }
        hits
    });
    scaled_measure(blocks.iter().sum(), n, eps)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShadowProcessSample {
    pub alpha: f64,
    pub theta_min: f64,
    /// Shadows with length in `(theta_min, 2π)`, in generation order.
    pub arcs: Vec<ShadowArc>,
    pub n_full: u64,
}

pub(crate) fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean)
        .map(|p| p.sample(rng) as u64)
        .unwrap_or(0)
}

fn check_ppp_params(alpha: f64, theta_min: f64) -> Result<()> {
    ensure(
        alpha >= 0.0 && alpha.is_finite(),
        "alpha",
        format!("must be nonnegative, got {alpha}"),
    )?;
    ensure(
        theta_min > 0.0 && theta_min < TAU,
        "theta_min",
        format!("must lie in (0, 2π), got {theta_min}"),
    )
}

/// One realization of the shadow process truncated at `theta_min`.
pub fn sample_shadow_ppp<R: Rng + ?Sized>(
    alpha: f64,
    theta_min: f64,
    rng: &mut R,
) -> Result<ShadowProcessSample> {
    check_ppp_params(alpha, theta_min)?;
    let (inv_lo, inv_hi) = (1.0 / TAU, 1.0 / theta_min);
    let n = poisson(8.0 * alpha * (inv_hi - inv_lo), rng);
    let mut arcs = Vec::with_capacity(n as usize);
    for _ in 0..n {
        // 1/Θ is uniform on (1/2π, 1/θ_min).
        let inv = inv_lo + rng.random::<f64>() * (inv_hi - inv_lo);
        let center = rng.random::<f64>() * TAU;
        arcs.push(ShadowArc {
            center,
            length: (1.0 / inv).clamp(theta_min, TAU),
        });
    }
    let n_full = poisson(4.0 * alpha / PI, rng);
    Ok(ShadowProcessSample {
        alpha,
        theta_min,
        arcs,
        n_full,
    })
}

impl ShadowProcessSample {
    /// Synthetic sample with the given lengths, all centred at 0.
    pub fn from_lengths(alpha: f64, theta_min: f64, lengths: &[f64]) -> Result<Self> {
        let arcs = lengths
            .iter()
            .map(|&l| ShadowArc::new(0.0, l))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            alpha,
            theta_min,
            arcs,
            n_full: 0,
        })
    }

    /// The same realization truncated at a larger `theta_min`.
    pub fn restrict(&self, theta_min: f64) -> Self {
        Self {
            alpha: self.alpha,
            theta_min,
            arcs: self
                .arcs
                .iter()
                .filter(|a| a.length > theta_min)
                .copied()
                .collect(),
            n_full: self.n_full,
        }
    }

    pub fn count_at_least(&self, theta: f64) -> usize {
        self.arcs.iter().filter(|a| a.length >= theta).count()
    }

    pub fn lengths_desc(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.arcs.iter().map(|a| a.length).collect();
        v.sort_unstable_by(|a, b| b.total_cmp(a));
        v
    }

    /// Covered set of the circle; any full shadow covers everything.
    pub fn covering(&self) -> ArcCoveringState {
        if self.n_full > 0 {
            return ArcCoveringState::from_arcs(TAU, [(0.0, TAU)]).expect("valid circumference");
        }
        ArcCoveringState::from_arcs(TAU, self.arcs.iter().map(|a| (a.center, a.length)))
            .expect("valid circumference")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapSequence {
    /// `1/(2π)`, the left end of the inverse-length process.
    pub offset: f64,
    pub deltas: Vec<f64>,
}

impl GapSequence {
    /// `1/Θ_(n)` recovered as `offset + Δ_1 + … + Δ_n`.
    pub fn inverse_lengths(&self) -> Vec<f64> {
        self.deltas
            .iter()
            .scan(self.offset, |acc, d| {
                *acc += d;
                Some(*acc)
            })
            .collect()
    }
}

/// Spacings of the ordered inverse lengths `1/Θ_(1) < 1/Θ_(2) < …`,
/// starting from `1/(2π)`. Full shadows are excluded.
pub fn gap_sequence(sample: &ShadowProcessSample) -> GapSequence {
    let mut inv: Vec<f64> = sample.arcs.iter().map(|a| 1.0 / a.length).collect();
    inv.sort_unstable_by(f64::total_cmp);
    let offset = 1.0 / TAU;
    let mut prev = offset;
    let deltas = inv
        .into_iter()
        .map(|v| {
            let d = v - prev;
            prev = v;
            d
        })
        .collect();
    GapSequence { offset, deltas }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderStatRow {
    pub n: usize,
    pub median_theta_n: f64,
    pub expected: f64,
    /// Median over replicas of `n·Θ_(n)/(8α)`.
    pub median_scaled: f64,
    /// Distribution-free 95% interval for that median, from order
    /// statistics of the replicas.
    pub median_scaled_low: f64,
    pub median_scaled_high: f64,
    /// 0.99-quantile over replicas of `n^{5/4}·|Θ_(n) - 8α/n|`.
    pub q99_deviation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderStatsReport {
    pub rows: Vec<OrderStatRow>,
    /// Largest `q99_deviation` over the first one; bounded means <= 1.5.
    pub growth: f64,
    pub bounded: bool,
}

/// Ranks `m/2 ∓ 0.98·sqrt(m)` of the sorted sample: the number of values
/// below the median is Binomial(m, 1/2).
fn median_interval(x: &[f64]) -> (f64, f64) {
    let mut v = x.to_vec();
    v.sort_unstable_by(f64::total_cmp);
    let m = v.len() as f64;
    let half = 0.5 * 1.96 * m.sqrt();
    let lo = (0.5 * m - half).floor().max(0.0) as usize;
    let hi = ((0.5 * m + half).ceil() as usize).min(v.len() - 1);
    (v[lo], v[hi])
}

/// Order-statistic table over replicas of the shadow process.
pub fn order_statistics_check(
    samples: &[ShadowProcessSample],
    ns: &[usize],
) -> Result<OrderStatsReport> {
    ensure(!samples.is_empty(), "samples", "need at least one replica")?;
    ensure(
        !ns.is_empty() && ns.iter().all(|&n| n >= 1),
        "ns",
        "need ranks >= 1",
    )?;
    let alpha = samples[0].alpha;
    ensure(alpha > 0.0, "alpha", "must be positive")?;
    let n_max = *ns.iter().max().unwrap_or(&1);
    let sorted: Vec<Vec<f64>> = samples.iter().map(|s| s.lengths_desc()).collect();
    if let Some((i, s)) = sorted.iter().enumerate().find(|(_, s)| s.len() < n_max) {
        return Err(Error::InsufficientData(format!(
            "replica {i} has {} shadows, rank {n_max} requested; lower theta_min",
            s.len()
        )));
    }
    let rows: Vec<OrderStatRow> = ns
        .iter()
        .map(|&n| {
            let expected = 8.0 * alpha / n as f64;
            let theta: Vec<f64> = sorted.iter().map(|s| s[n - 1]).collect();
            let scaled: Vec<f64> = theta.iter().map(|t| t / expected).collect();
            let (lo, hi) = median_interval(&scaled);
            let dev: Vec<f64> = theta
                .iter()
                .map(|t| (n as f64).powf(1.25) * (t - expected).abs())
                .collect();
            OrderStatRow {
                n,
                median_theta_n: quantile(&theta, 0.5),
                expected,
                median_scaled: quantile(&scaled, 0.5),
                median_scaled_low: lo,
                median_scaled_high: hi,
                q99_deviation: quantile(&dev, 0.99),
            }
        })
        .collect();
    let first = rows[0].q99_deviation;
    let growth = rows.iter().map(|r| r.q99_deviation).fold(0.0, f64::max) / first;
    Ok(OrderStatsReport {
        rows,
        growth,
        bounded: growth <= 1.5,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurvivalPoint {
    pub theta_min: f64,
    /// Fraction of replicas whose circle is not fully covered.
    pub survival: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub mean_uncovered_measure: f64,
    pub n_replicas: u64,
}

/// Coverage of the circle by the truncated shadow process. Replicas are
/// coupled across `theta_mins` by sampling once at the smallest value and
/// discarding shorter arcs, so survival is monotone in `theta_min` replica
/// by replica. Dropping arcs only removes coverage, so each value bounds the
/// untruncated survival from above.
pub fn visibility_to_infinity_sim(
    alpha: f64,
    theta_mins: &[f64],
    n_replicas: u64,
    rep: &Replicator,
) -> Result<Vec<SurvivalPoint>> {
    ensure(
        !theta_mins.is_empty(),
        "theta_mins",
        "need at least one truncation level",
    )?;
    ensure(n_replicas >= 1, "n_replicas", "need at least one replica")?;
    let smallest = theta_mins.iter().copied().fold(f64::INFINITY, f64::min);
    check_ppp_params(alpha, smallest)?;
    ensure(
        theta_mins.iter().all(|t| *t < TAU),
        "theta_mins",
        "must lie in (0, 2π)",
    )?;
    let per_replica: Vec<Vec<f64>> = rep.run("phase", n_replicas, |_, rng: &mut SimRng| {
        let base = sample_shadow_ppp(alpha, smallest, rng).expect("validated parameters");
        theta_mins
            .iter()
            .map(|&t| base.restrict(t).covering().uncovered_measure())
            .collect()
    });
    theta_mins
        .iter()
        .enumerate()
        .map(|(j, &theta_min)| {
            let survivors = per_replica.iter().filter(|m| m[j] > 0.0).count() as u64;
            let (ci_low, ci_high) = wilson_ci(survivors, n_replicas, 0.95)?;
            Ok(SurvivalPoint {
                theta_min,
                survival: survivors as f64 / n_replicas as f64,
                ci_low,
                ci_high,
                mean_uncovered_measure: per_replica.iter().map(|m| m[j]).sum::<f64>()
                    / n_replicas as f64,
                n_replicas,
            })
        })
        .collect()
}

/// `P(Θ >= θ)` for the excursion from `|x| = x_mod`, as the double integral
/// of `f_a(t)·h(r)` over `{r·sqrt(t) >= θ}`. The inner `t`-integral is taken
/// in `u = t^{-1/2}`, where it becomes a Gaussian integral over
/// `[0, r/θ]`.
pub fn shadow_cdf_numeric(x_mod: f64, theta: f64, range: &dyn RangeDistribution) -> Result<f64> {
    check_x_mod(x_mod)?;
    ensure(
        theta > 0.0 && theta <= TAU,
        "theta",
        format!("must lie in (0, 2π], got {theta}"),
    )?;
    let a = x_mod.ln().abs();
    let c = 2.0 * a / (2.0 * PI).sqrt();
    let inner_cfg = QuadConfig {
        abs_tol: 1e-13,
        rel_tol: 1e-11,
        max_intervals: 500,
    };
    let outer_cfg = QuadConfig {
        abs_tol: 1e-10,
        rel_tol: 1e-9,
        max_intervals: 2000,
    };
    let inner_err = std::cell::Cell::new(None);
    let outer = |r: f64| -> f64 {
        let h = range.pdf(r);
        if h == 0.0 {
            return 0.0;
        }
        // Beyond u = 40/|a| the integrand is below e^{-800}.
        let upper = (r / theta).min(40.0 / a);
        match integrate(|u| c * (-0.5 * a * a * u * u).exp(), 0.0, upper, &inner_cfg) {
            Ok(q) => h * q.value,
            Err(e) => {
                inner_err.set(Some(e));
                0.0
            }
        }
    };
    let r_max = range.support_max();
    let mut total = 0.0;
    for (lo, hi) in [(0.0, 1.0), (1.0, r_max.max(1.0))] {
        total += integrate(outer, lo, hi, &outer_cfg)?.value;
    }
    if let Some(e) = inner_err.take() {
        return Err(e);
    }
    Ok(total.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::range::FellerSeries;
    use crate::rng::substream;
    use crate::stats::ks_two_sample;

    #[test]
    fn excursion_endpoints() {
        let cfg = ExcursionConfig::default();
        let mut rng = substream(1, "exc", 0);
        for _ in 0..50 {
            let e = sample_excursion_eps(0.01, &cfg, &mut rng).unwrap();
            let pts = e.path.points();
            assert!((pts[0].norm() - 0.99).abs() < 1e-15);
            let end = pts[pts.len() - 1].norm();
            assert!((1.0 - 1e-6..=1.0 + 1e-15).contains(&end), "{end}");
            assert!(pts[1..pts.len() - 1].iter().all(|p| p.norm() < 1.0));
            let arc = shadow_of_excursion(&e).unwrap();
            assert!(arc.length <= e.bridged_theta + 1e-12);
        }
        assert!(sample_excursion_eps(0.5, &cfg, &mut rng).is_err());
    }

    #[test]
    fn step_budget_is_reported() {
        let cfg = ExcursionConfig {
            max_steps: 3,
            ..Default::default()
        };
        let mut rng = substream(2, "exc", 0);
        assert!(matches!(
            sample_excursion_eps(0.4, &cfg, &mut rng),
            Err(Error::StepBudgetExceeded { budget: 3, .. })
        ));
    }

    fn synthetic(points: &[(f64, f64)]) -> Excursion {
        let pts: Vec<PointD> = points.iter().map(|&z| planar(z)).collect();
        let times = (0..pts.len()).map(|i| i as f64).collect();
        Excursion {
            path: Polyline::new(times, pts).unwrap(),
            eps: 0.1,
            bridged_theta: 0.0,
        }
    }

    #[test]
    fn synthetic_shadows() {
        let radial = synthetic(&[(0.0, 0.9), (0.0, 0.5), (0.0, 0.3), (0.0, 1.0)]);
        assert_eq!(shadow_of_excursion(&radial).unwrap().length, 0.0);
        let spiral: Vec<(f64, f64)> = (0..=240)
            .map(|i| {
                let a = 1.2 * TAU * i as f64 / 240.0;
                let r = 0.9 - 0.3 * i as f64 / 240.0;
                (r * a.cos(), r * a.sin())
            })
            .collect();
        assert_eq!(
            shadow_of_excursion(&synthetic(&spiral)).unwrap().length,
            TAU
        );
    }

    #[test]
    fn halfplane_short_excursions() {
        let mut rng = substream(3, "hp", 0);
        let v: Vec<f64> = (0..10_000)
            .map(|_| sample_shadow_length_halfplane(0.9999, &mut rng).unwrap())
            .collect();
        assert!(quantile(&v, 0.5) < 0.05);
        assert!(v.iter().all(|t| (0.0..=TAU).contains(t)));
        assert!(sample_shadow_length_halfplane(1.0, &mut rng).is_err());
    }

    #[test]
    fn samplers_agree_in_distribution() {
        let cfg = ExcursionConfig::default();
        let eps = 0.05;
        let n = 3000;
        let mut rng = substream(4, "equiv", 0);
        let paths: Vec<f64> = (0..n)
            .map(|_| excursion_shadow_length(eps, &cfg, None, &mut rng).unwrap())
            .collect();
        let half: Vec<f64> = (0..n)
            .map(|_| sample_shadow_length_halfplane(1.0 - eps, &mut rng).unwrap())
            .collect();
        let r = ks_two_sample(&paths, &half, 0.01).unwrap();
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn ball_measure_small_run() {
        let est =
            estimate_ball_measure((-1.0f64).exp(), 0.01, 200_000, &Replicator::new(5)).unwrap();
        // Finite-ε value is 2π·(-log(1-ε))/ε.
        let target = TAU * -(0.99f64.ln()) / 0.01;
        assert!((est.value - target).abs() < 4.0 * est.std_err, "{est:?}");
    }

    #[test]
    fn ppp_counts_and_truncation() {
        let theta = 0.5 * PI;
        let n = 2000;
        let counts: Vec<f64> = (0..n)
            .map(|i| {
                let s = sample_shadow_ppp(1.0, 1e-2, &mut substream(6, "ppp", i)).unwrap();
                assert!(s.arcs.iter().all(|a| a.length > 1e-2 && a.length < TAU));
                assert!(s.arcs.iter().all(|a| (0.0..TAU).contains(&a.center)));
                s.count_at_least(theta) as f64
            })
            .collect();
        let expected = 8.0 * (1.0 / theta - 1.0 / TAU);
        let mean = counts.iter().sum::<f64>() / n as f64;
        assert!((mean - expected).abs() < 3.5 * (expected / n as f64).sqrt());
        let near = sample_shadow_ppp(1.0, TAU - 1e-12, &mut substream(6, "ppp", 0)).unwrap();
        assert!(near.arcs.is_empty());
        assert!(sample_shadow_ppp(1.0, 0.0, &mut substream(6, "ppp", 0)).is_err());
    }

    #[test]
    fn gaps_rebuild_inverse_lengths() {
        let s = sample_shadow_ppp(1.0, 1e-2, &mut substream(7, "gap", 0)).unwrap();
        let g = gap_sequence(&s);
        assert!(g.deltas.iter().all(|d| *d > 0.0));
        let mut inv: Vec<f64> = s.arcs.iter().map(|a| 1.0 / a.length).collect();
        inv.sort_unstable_by(f64::total_cmp);
        for (a, b) in g.inverse_lengths().iter().zip(&inv) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn exact_order_statistics_have_zero_deviation() {
        let alpha = 1.0;
        let lengths: Vec<f64> = (1..=200)
            .map(|n| 8.0 * alpha / n as f64)
            .filter(|l| *l < TAU)
            .collect();
        let s = ShadowProcessSample::from_lengths(alpha, 1e-3, &lengths).unwrap();
        let offset = 200 - lengths.len();
        let ns: Vec<usize> = [10usize, 50, 100].iter().map(|n| n - offset).collect();
        let report = order_statistics_check(std::slice::from_ref(&s), &ns).unwrap();
        for row in &report.rows {
            let n = row.n + offset;
            assert!((row.median_theta_n - 8.0 * alpha / n as f64).abs() < 1e-15);
        }
        assert!(order_statistics_check(&[s], &[500]).is_err());
    }

    #[test]
    fn zero_intensity_never_covers() {
        let pts = visibility_to_infinity_sim(0.0, &[1e-3], 10, &Replicator::new(1)).unwrap();
        assert_eq!(pts[0].survival, 1.0);
        assert!((pts[0].mean_uncovered_measure - TAU).abs() < 1e-12);
    }

    #[test]
    fn coupled_survival_is_monotone() {
        let pts =
            visibility_to_infinity_sim(0.785, &[1e-2, 1e-3], 100, &Replicator::new(2)).unwrap();
        assert!(pts[1].survival <= pts[0].survival);
        assert!(pts[1].mean_uncovered_measure <= pts[0].mean_uncovered_measure);
    }

    /// `P(Θ >= θ) = ∫ h(r) erf(|a| r / (θ sqrt 2)) dr`, since
    /// `P(T >= s) = P(|Z| <= |a|/sqrt(s))`; composite Simpson on `[0, 10]`.
    fn cdf_oracle(x_mod: f64, theta: f64) -> f64 {
        let a = x_mod.ln().abs();
        let m = 20_000;
        let h = 10.0 / m as f64;
        (0..=m)
            .map(|i| {
                let r = i as f64 * h;
                let w = if i == 0 || i == m {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                w * crate::range::range_density(r) * libm::erf(a * r / (theta * 2f64.sqrt()))
            })
            .sum::<f64>()
            * h
            / 3.0
    }

    #[test]
    fn shadow_cdf_matches_closed_inner_integral() {
        let feller = FellerSeries::new().unwrap();
        for (x, th) in [(0.5, 0.5 * PI), (0.5, PI), (0.9, 1.0), (0.2, TAU)] {
            let q = shadow_cdf_numeric(x, th, &feller).unwrap();
            assert!((q - cdf_oracle(x, th)).abs() < 1e-8, "x={x}, θ={th}");
        }
        assert!(shadow_cdf_numeric(0.5, 1e-6, &feller).unwrap() > 0.999_99);
        assert!(shadow_cdf_numeric(1.0 - 1e-9, 1.0, &feller).unwrap() < 1e-8);
        assert!(shadow_cdf_numeric(0.5, 7.0, &feller).is_err());
    }
}
