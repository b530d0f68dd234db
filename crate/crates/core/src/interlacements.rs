//! Brownian interlacements seen through a ball window, and Monte Carlo
//! estimators of directional visibility `f(r)` and omnidirectional
//! visibility `P_vis(r)`.
//!
//! Inside a compact `K` the occupied set is the union of ρ-sausages of
//! `N_K ~ Poisson(α·cap(K))` independent Brownian motions started from the
//! normalized equilibrium measure of `K`. For a ball window that measure is
//! uniform on the sphere, so ball windows never need the harmonic sampler.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::brownian::{
    bridge_refine, gaussian_point, uniform_direction, uniform_on_sphere, walk_to_shell,
    walk_to_target, WalkConfig, WalkOutcome,
};
use crate::capacity::{ball_capacity_exact, check_transient_dim, MAX_JUMPS};
use crate::directions::{
    blocking_cap, segment_distance_by_angle, BlockState, DirectionGrid, DirectionTree,
};
use crate::error::{ensure, invalid, Error, Result};
use crate::excursions::poisson;
use crate::geometry::{
    polyline_capsule_intersect, positive, Capsule, Intersection, PointD, Polyline, Segment,
};
use crate::rng::{substream, Replicator};
use crate::stats::{ols, quantile, wilson_ci};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumConfig {
    /// Entrance shell width over the target radius.
    pub shell_frac: f64,
    /// Kill radius over the launch radius.
    pub kill_factor: f64,
    /// Acceptance rate below which sampling is declared impractical.
    pub min_acceptance: f64,
    /// Attempts before the acceptance floor is enforced.
    pub min_attempts: u64,
}

impl Default for EquilibriumConfig {
    fn default() -> Self {
        Self {
            shell_frac: 1e-4,
            kill_factor: 1e3,
            min_acceptance: 1e-3,
            min_attempts: 1000,
        }
    }
}

/// Harmonic measure from infinity of a capsule, realized as the entrance
/// point of Brownian motion launched uniformly on a sphere around it.
///
/// For any launch sphere enclosing the target the entrance law conditioned
/// on hitting is exactly the normalized equilibrium measure, because the
/// sphere average of `G(·, z)` does not depend on `z` inside. Only the kill
/// radius biases the sample.
#[derive(Clone, Debug)]
pub struct EquilibriumSampler {
    target: Capsule,
    center: PointD,
    launch: f64,
    walk: WalkConfig,
    cfg: EquilibriumConfig,
    attempts: u64,
    accepted: u64,
}

impl EquilibriumSampler {
    /// The target must lie in `B(center(target), launch/5)`.
    pub fn new(target: &Capsule, launch: f64, cfg: &EquilibriumConfig) -> Result<Self> {
        check_transient_dim(target.dim())?;
        ensure(
            target.circumradius() <= launch / 5.0,
            "launch",
            format!(
                "target of circumradius {} needs a launch radius of at least {}",
                target.circumradius(),
                5.0 * target.circumradius()
            ),
        )?;
        positive("shell_frac", cfg.shell_frac)?;
        ensure(cfg.kill_factor > 1.0, "kill_factor", "must exceed 1")?;
        ensure(
            (0.0..1.0).contains(&cfg.min_acceptance),
            "min_acceptance",
            "must lie in [0, 1)",
        )?;
        let center = target.center();
        Ok(Self {
            target: *target,
            center,
            launch,
            walk: WalkConfig {
                shell: cfg.shell_frac * target.radius,
                kill_center: center,
                kill_radius: cfg.kill_factor * launch,
                max_jumps: MAX_JUMPS,
            },
            cfg: *cfg,
            attempts: 0,
            accepted: 0,
        })
    }

    pub fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<PointD> {
        loop {
            self.attempts += 1;
            let start = uniform_on_sphere(&self.center, self.launch, rng);
            if let Some((x, delta)) = walk_to_shell(start, &self.target, &self.walk, rng) {
                if delta.is_finite() {
                    self.accepted += 1;
                    return Ok(x);
                }
            }
            if self.attempts >= self.cfg.min_attempts
                && self.acceptance_rate() < self.cfg.min_acceptance
            {
                return Err(Error::LowAcceptance {
                    rate: self.acceptance_rate(),
                    floor: self.cfg.min_acceptance,
                    accepted: self.accepted,
                    attempts: self.attempts,
                });
            }
        }
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.attempts == 0 {
            1.0
        } else {
            self.accepted as f64 / self.attempts as f64
        }
    }

    pub fn attempts(&self) -> u64 {
        self.attempts
    }

    pub fn accepted(&self) -> u64 {
        self.accepted
    }
}

/// One draw from the normalized equilibrium measure of `target`.
pub fn sample_equilibrium_start<R: Rng + ?Sized>(
    target: &Capsule,
    launch: f64,
    rng: &mut R,
) -> Result<PointD> {
    EquilibriumSampler::new(target, launch, &EquilibriumConfig::default())?.sample(rng)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum StartRule {
    /// Exact: uniform on the window sphere.
    Uniform,
    /// Harmonic measure from a launch sphere of `launch_factor · r_w`.
    Harmonic { launch_factor: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalConfig {
    /// Gaussian step sd over ρ.
    pub step_frac: f64,
    /// Tri-state margin over ρ; bridge refinement keeps sample gaps below it.
    pub margin_frac: f64,
    /// Kill radius over the window radius.
    pub kill_factor: f64,
    pub start: StartRule,
    pub equilibrium: EquilibriumConfig,
    /// Fine steps allowed per trajectory.
    pub max_steps: usize,
}

impl Default for LocalConfig {
    fn default() -> Self {
        Self {
            step_frac: 0.05,
            margin_frac: 0.1,
            kill_factor: 1e3,
            start: StartRule::Uniform,
            equilibrium: EquilibriumConfig::default(),
            max_steps: 100_000_000,
        }
    }
}

impl LocalConfig {
    fn validate(&self) -> Result<()> {
        positive("step_frac", self.step_frac)?;
        ensure(
            self.margin_frac > 0.0 && self.margin_frac < 1.0,
            "margin_frac",
            "must lie in (0, 1)",
        )?;
        ensure(self.kill_factor > 1.0, "kill_factor", "must exceed 1")?;
        if let StartRule::Harmonic { launch_factor } = self.start {
            ensure(launch_factor >= 5.0, "launch_factor", "must be at least 5")?;
        }
        Ok(())
    }
}

/// Forward path of one trajectory. Samples within `r_w + 2ρ` of the origin
/// are kept as polyline pieces with gaps at most the margin; between pieces
/// the path stays beyond `r_w + ρ + margin`. Times restart nominally after
/// each excursion outside.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub start: PointD,
    pub pieces: Vec<Polyline>,
    pub killed_at: PointD,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LocalInterlacementSample {
    pub dim: usize,
    pub window_radius: f64,
    pub alpha: f64,
    pub rho: f64,
    pub margin: f64,
    pub n_poisson: u64,
    pub trajectories: Vec<Trajectory>,
}

impl LocalInterlacementSample {
    /// Tri-state test of whether some ρ-sausage meets `target`, which must
    /// lie in the window.
    pub fn sausage_status(&self, target: &Capsule) -> Result<Intersection> {
        target.axis.a.check_same_dim(&PointD::origin(self.dim)?)?;
        let reach = target.axis.a.norm().max(target.axis.b.norm()) + target.radius;
        ensure(
            reach <= self.window_radius * (1.0 + 1e-12),
            "target",
            format!(
                "reaches radius {reach}, outside the window {}",
                self.window_radius
            ),
        )?;
        let inflated = target.inflated(self.rho)?;
        let mut status = Intersection::Miss;
        for piece in self.trajectories.iter().flat_map(|t| &t.pieces) {
            status = status.or(polyline_capsule_intersect(piece, &inflated, self.margin)?);
            if status == Intersection::Hit {
                break;
            }
        }
        Ok(status)
    }

    pub fn ball_status(&self, center: &PointD, radius: f64) -> Result<Intersection> {
        self.sausage_status(&Capsule::ball(*center, radius)?)
    }
}

/// Samples the interlacement at level `alpha`, thickness `rho`, inside the
/// window `B(0, window_radius)` of `R^d`.
pub fn sample_local_interlacement<R: Rng + ?Sized>(
    d: usize,
    window_radius: f64,
    alpha: f64,
    rho: f64,
    cfg: &LocalConfig,
    rng: &mut R,
) -> Result<LocalInterlacementSample> {
    check_transient_dim(d)?;
    positive("window_radius", window_radius)?;
    positive("rho", rho)?;
    ensure(
        alpha >= 0.0 && alpha.is_finite(),
        "alpha",
        "must be finite and >= 0",
    )?;
    cfg.validate()?;
    let origin = PointD::origin(d)?;
    let n_poisson = poisson(alpha * ball_capacity_exact(window_radius, d)?, rng);
    let mut sampler = match cfg.start {
        StartRule::Uniform => None,
        StartRule::Harmonic { launch_factor } => Some(EquilibriumSampler::new(
            &Capsule::ball(origin, window_radius)?,
            launch_factor * window_radius,
            &cfg.equilibrium,
        )?),
    };
    let mut trajectories = Vec::with_capacity(n_poisson as usize);
    for _ in 0..n_poisson {
        let start = match sampler.as_mut() {
            None => uniform_on_sphere(&origin, window_radius, rng),
            Some(s) => s.sample(rng)?,
        };
        trajectories.push(forward_path(start, window_radius, rho, cfg, rng)?);
    }
    Ok(LocalInterlacementSample {
        dim: d,
        window_radius,
        alpha,
        rho,
        margin: cfg.margin_frac * rho,
        n_poisson,
        trajectories,
    })
}

fn forward_path<R: Rng + ?Sized>(
    start: PointD,
    r_w: f64,
    rho: f64,
    cfg: &LocalConfig,
    rng: &mut R,
) -> Result<Trajectory> {
    let d = start.dim();
    let sd = cfg.step_frac * rho;
    let dt = sd * sd;
    let margin = cfg.margin_frac * rho;
    let fine_radius = r_w + 2.0 * rho;
    let kill = cfg.kill_factor * r_w;
    let mut pieces = Vec::new();
    let mut piece: Option<Polyline> = None;
    let (mut x, mut t) = (start, 0.0);
    let mut buf = Vec::new();
    let mut steps = 0usize;
    loop {
        let s = x.norm();
        if let Some(pl) = piece.as_mut() {
            if s > fine_radius {
                pieces.push(piece.take().expect("piece is open"));
                continue;
            }
            steps += 1;
            if steps > cfg.max_steps {
                return Err(Error::StepBudgetExceeded {
                    budget: cfg.max_steps,
                    last_modulus: s,
                });
            }
            let next = x + gaussian_point(d, sd, rng);
            buf.clear();
            bridge_refine(t, x, t + dt, next, margin, rng, &mut buf);
            for &(tb, p) in &buf {
                pl.push(tb, p);
            }
            x = next;
            t += dt;
        } else if s > kill {
            return Ok(Trajectory {
                start,
                pieces,
                killed_at: x,
            });
        } else if s <= fine_radius {
            piece = Some(Polyline::start(t, x));
        } else {
            // The jump ball stays beyond r_w + ρ + margin.
            let jump = s - (r_w + rho + margin);
            x = x.add_scaled(&uniform_direction(d, rng), jump);
            t += jump * jump / d as f64;
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum EpsRule {
    /// `ε(r) = 1/r`.
    InverseR,
    Constant {
        eps: f64,
    },
}

impl EpsRule {
    pub fn eps(&self, r: f64) -> f64 {
        match *self {
            EpsRule::InverseR => 1.0 / r,
            EpsRule::Constant { eps } => eps,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VisibilityConfig {
    pub d: usize,
    pub alpha: f64,
    pub rho: f64,
    pub r_values: Vec<f64>,
    pub n_reps: u64,
    pub eps_rule: EpsRule,
    pub seed: u64,
    pub step_frac: f64,
    pub margin_frac: f64,
    /// Window radius is `r + ρ + window_margin·ρ`.
    pub window_margin: f64,
    pub kill_factor: f64,
    /// Walk-on-spheres shell width over ρ, for the direct f estimator.
    pub shell_frac: f64,
    pub max_directions: usize,
}

impl Default for VisibilityConfig {
    fn default() -> Self {
        Self {
            d: 3,
            alpha: 0.5,
            rho: 0.5,
            r_values: vec![2.0, 4.0, 8.0],
            n_reps: 1000,
            eps_rule: EpsRule::InverseR,
            seed: 0,
            step_frac: 0.05,
            margin_frac: 0.1,
            window_margin: 2.0,
            kill_factor: 1e3,
            shell_frac: 1e-4,
            max_directions: 2_000_000,
        }
    }
}

impl VisibilityConfig {
    pub fn validate(&self) -> Result<()> {
        check_transient_dim(self.d)?;
        ensure(
            self.alpha >= 0.0 && self.alpha.is_finite(),
            "alpha",
            "must be finite and >= 0",
        )?;
        positive("rho", self.rho)?;
        ensure(
            self.r_values.iter().all(|r| *r > 0.0 && r.is_finite()),
            "r_values",
            "must be positive",
        )?;
        ensure(
            self.r_values.windows(2).all(|w| w[0] < w[1]),
            "r_values",
            "must be increasing",
        )?;
        ensure(self.n_reps >= 1, "n_reps", "need at least one replica")?;
        if let EpsRule::Constant { eps } = self.eps_rule {
            positive("eps", eps)?;
        }
        positive("step_frac", self.step_frac)?;
        ensure(
            self.margin_frac > 0.0 && self.margin_frac < 1.0,
            "margin_frac",
            "must lie in (0, 1)",
        )?;
        ensure(self.window_margin >= 0.0, "window_margin", "must be >= 0")?;
        ensure(self.kill_factor > 1.0, "kill_factor", "must exceed 1")?;
        positive("shell_frac", self.shell_frac)?;
        Ok(())
    }

    pub fn window_radius(&self, r: f64) -> f64 {
        r + (1.0 + self.window_margin) * self.rho
    }

    fn replicator(&self, workers: usize) -> Replicator {
        Replicator::new(self.seed).with_workers(workers)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VisibilityEstimate {
    pub r: f64,
    /// UNRESOLVED outcomes counted as clear.
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// UNRESOLVED outcomes counted as blocked.
    pub pessimistic_p_hat: f64,
    pub pessimistic_ci_low: f64,
    pub pessimistic_ci_high: f64,
    pub successes: u64,
    pub pessimistic_successes: u64,
    pub n_reps: u64,
}

impl VisibilityEstimate {
    fn from_counts(r: f64, successes: u64, pessimistic: u64, n: u64) -> Result<Self> {
        let (ci_low, ci_high) = wilson_ci(successes, n, 0.95)?;
        let (pl, ph) = wilson_ci(pessimistic, n, 0.95)?;
        Ok(Self {
            r,
            p_hat: successes as f64 / n as f64,
            ci_low,
            ci_high,
            pessimistic_p_hat: pessimistic as f64 / n as f64,
            pessimistic_ci_low: pl,
            pessimistic_ci_high: ph,
            successes,
            pessimistic_successes: pessimistic,
            n_reps: n,
        })
    }

    /// Binomial standard error of `p_hat`.
    pub fn std_err(&self) -> f64 {
        (self.p_hat * (1.0 - self.p_hat) / self.n_reps as f64).sqrt()
    }
}

fn label(kind: &str, r: f64) -> String {
    format!("{kind}/r={r:e}")
}

/// Fraction of replicas in which no sausage meets `[0, r·e_1]`, with
/// trajectories resolved against the capsule `[0, r·e_1]^ρ` by
/// walk-on-spheres.
pub fn estimate_f_mc(r: f64, cfg: &VisibilityConfig, workers: usize) -> Result<VisibilityEstimate> {
    cfg.validate()?;
    positive("r", r)?;
    let d = cfg.d;
    let origin = PointD::origin(d)?;
    let segment = Capsule::new(Segment::new(origin, PointD::on_axis(d, 0, r)?)?, cfg.rho)?;
    let r_w = cfg.window_radius(r);
    let mean = cfg.alpha * ball_capacity_exact(r_w, d)?;
    let walk = WalkConfig {
        shell: cfg.shell_frac * cfg.rho,
        kill_center: origin,
        kill_radius: cfg.kill_factor * r_w,
        max_jumps: MAX_JUMPS,
    };
    const BLOCK: u64 = 256;
    let counts = cfg.replicator(workers).run_blocks(
        &label("interlacement-f", r),
        cfg.n_reps,
        BLOCK,
        |len, rng| {
            let (mut clear, mut clear_pess) = (0u64, 0u64);
            for _ in 0..len {
                let n = poisson(mean, rng);
                let mut unresolved = false;
                let mut hit = false;
                for _ in 0..n {
                    let start = uniform_on_sphere(&origin, r_w, rng);
                    match walk_to_target(start, &segment, &walk, rng) {
                        WalkOutcome::Hit(_) => {
                            hit = true;
                            break;
                        }
                        WalkOutcome::Unresolved(_) => unresolved = true,
                        WalkOutcome::Escaped => {}
                    }
                }
                clear += u64::from(!hit);
                clear_pess += u64::from(!hit && !unresolved);
            }
            (clear, clear_pess)
        },
    );
    let (k, kp) = counts.iter().fold((0, 0), |(a, b), &(x, y)| (a + x, b + y));
    VisibilityEstimate::from_counts(r, k, kp, cfg.n_reps)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PvisEstimate {
    pub pvis: VisibilityEstimate,
    /// Directional visibility along `e_1`, the first grid direction, from
    /// the same replicas.
    pub f: VisibilityEstimate,
    pub n_directions: u64,
    pub mean_trajectories: f64,
}

struct PvisWalker<'a> {
    tree: &'a DirectionTree,
    r: f64,
    thin: f64,
    thick: f64,
    sd: f64,
    margin: f64,
    jump_min: f64,
    kill: f64,
}

/// Number of fine steps between recomputations of the jump radius.
const FINE_BATCH: u32 = 16;

impl PvisWalker<'_> {
    /// Marks the directions blocked by `p`; false once all are blocked.
    fn mark(&self, state: &mut BlockState, p: &PointD) -> bool {
        let s = p.norm();
        if s <= self.thin {
            state.block_all();
            return false;
        }
        let u = *p * (1.0 / s);
        let ch = blocking_cap(s, self.r, self.thin);
        let cp = blocking_cap(s, self.r, self.thick);
        self.tree.mark(state, u.coords(), ch, cp);
        state.open_count() > 0
    }

    /// Runs one trajectory; false once every direction is blocked.
    ///
    /// `gap` is a lower bound on the distance from the current sample to
    /// the `(ρ + margin)`-neighbourhood of every open segment; samples with
    /// a positive gap cannot change any status and are not marked. With a
    /// gap above `jump_min` the path jumps across the ball of that radius.
    /// Otherwise it takes Gaussian steps refined by bridges to sample gaps
    /// of at most `margin`.
    fn run<R: Rng + ?Sized>(
        &self,
        state: &mut BlockState,
        start: PointD,
        rng: &mut R,
        buf: &mut Vec<(f64, PointD)>,
    ) -> bool {
        let d = start.dim();
        let dt = self.sd * self.sd;
        let mut x = start;
        let mut gap = f64::NEG_INFINITY;
        let mut since = FINE_BATCH;
        // Set when the last exact gap was already nonpositive.
        let mut inside = false;
        loop {
            let s = x.norm();
            if s > self.kill {
                return true;
            }
            if since >= FINE_BATCH || (gap <= 0.0 && !inside) {
                if s <= self.thin {
                    state.block_all();
                    return false;
                }
                let u = x * (1.0 / s);
                let Some(c) = self.tree.best_open(state, u.coords()) else {
                    return false;
                };
                gap = segment_distance_by_angle(s, self.r, c) - self.thick;
                since = 0;
                inside = gap <= 0.0;
                if gap > self.jump_min {
                    x = x.add_scaled(&uniform_direction(d, rng), gap);
                    since = FINE_BATCH;
                    continue;
                }
                if inside && !self.mark(state, &x) {
                    return false;
                }
            }
            since += 1;
            let next = x + gaussian_point(d, self.sd, rng);
            buf.clear();
            bridge_refine(0.0, x, dt, next, self.margin, rng, buf);
            let mut prev = x;
            for (_, p) in buf.iter() {
                gap -= p.dist(&prev);
                prev = *p;
                if gap <= 0.0 && !self.mark(state, p) {
                    return false;
                }
            }
            x = next;
        }
    }
}

/// Direction grid used by [`estimate_pvis_mc`] at distance `r`.
pub fn pvis_grid(r: f64, cfg: &VisibilityConfig) -> Result<DirectionGrid> {
    let delta = cfg.eps_rule.eps(r) / r;
    DirectionGrid::with_resolution(cfg.d, delta, cfg.max_directions)
}

/// Fraction of replicas with at least one grid direction `u` whose segment
/// `[0, r·u]` avoids every sausage.
///
/// A direction is blocked when a sample comes within `ρ - margin` of its
/// segment and possibly blocked within `ρ + margin`. The optimistic value
/// counts directions that are not blocked, the pessimistic one directions
/// that are not even possibly blocked.
pub fn estimate_pvis_mc(r: f64, cfg: &VisibilityConfig, workers: usize) -> Result<PvisEstimate> {
    cfg.validate()?;
    ensure(r >= 1.0, "r", format!("need r >= 1, got {r}"))?;
    let d = cfg.d;
    let tree = DirectionTree::build(pvis_grid(r, cfg)?);
    let origin = PointD::origin(d)?;
    let r_w = cfg.window_radius(r);
    let mean = cfg.alpha * ball_capacity_exact(r_w, d)?;
    let margin = cfg.margin_frac * cfg.rho;
    let walker = PvisWalker {
        tree: &tree,
        r,
        thin: cfg.rho - margin,
        thick: cfg.rho + margin,
        sd: cfg.step_frac * cfg.rho,
        margin,
        jump_min: 0.5 * cfg.rho,
        kill: cfg.kill_factor * r_w,
    };
    let outcomes =
        cfg.replicator(workers)
            .run(&label("interlacement-pvis", r), cfg.n_reps, |_, rng| {
                let mut state = tree.fresh_state();
                let mut buf = Vec::new();
                let n = poisson(mean, rng);
                for _ in 0..n {
                    let start = uniform_on_sphere(&origin, r_w, rng);
                    if !walker.run(&mut state, start, rng, &mut buf) {
                        break;
                    }
                }
                [
                    state.open_count() > 0,
                    state.clear_count() > 0,
                    !state.is_hit(0),
                    !state.is_possible(0),
                ]
                .map(u64::from)
                .into_iter()
                .chain([n])
                .collect::<Vec<u64>>()
            });
    let mut sums = [0u64; 5];
    for o in &outcomes {
        for (s, v) in sums.iter_mut().zip(o) {
            *s += v;
        }
    }
    let n = cfg.n_reps;
    Ok(PvisEstimate {
        pvis: VisibilityEstimate::from_counts(r, sums[0], sums[1], n)?,
        f: VisibilityEstimate::from_counts(r, sums[2], sums[3], n)?,
        n_directions: tree.len() as u64,
        mean_trajectories: sums[4] as f64 / n as f64,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointEstimate {
    pub value: f64,
    pub std_err: f64,
}

impl PointEstimate {
    pub fn new(value: f64, std_err: f64) -> Self {
        Self { value, std_err }
    }
}

impl From<&VisibilityEstimate> for PointEstimate {
    fn from(v: &VisibilityEstimate) -> Self {
        Self::new(v.p_hat, v.std_err())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_std_err: f64,
    /// Central 95% band of parametric-bootstrap slopes.
    pub band_low: f64,
    pub band_high: f64,
    pub n_boot: u64,
}

/// OLS slope of `log(P_vis/f)` against `log r`, with a parametric
/// bootstrap band that perturbs each log-ratio by its delta-method error.
pub fn exponent_fit(
    r_grid: &[f64],
    pvis: &[PointEstimate],
    f: &[PointEstimate],
    n_boot: u64,
    seed: u64,
) -> Result<ExponentFit> {
    ensure(
        r_grid.len() == pvis.len() && r_grid.len() == f.len(),
        "pvis",
        "r_grid, pvis and f differ in length",
    )?;
    ensure(r_grid.len() >= 3, "r_grid", "need at least three points")?;
    ensure(
        r_grid.iter().all(|r| *r > 0.0),
        "r_grid",
        "must be positive",
    )?;
    for (i, e) in pvis.iter().chain(f).enumerate() {
        if e.value <= 0.0 || !e.value.is_finite() {
            return Err(Error::ZeroEstimate {
                index: i % r_grid.len(),
            });
        }
        if e.std_err < 0.0 {
            return Err(invalid(
                "std_err",
                format!("negative at index {}", i % r_grid.len()),
            ));
        }
    }
    let mut rows: Vec<(f64, f64, f64)> = r_grid
        .iter()
        .zip(pvis.iter().zip(f))
        .map(|(r, (p, q))| {
            let y = p.value.ln() - q.value.ln();
            let se = ((p.std_err / p.value).powi(2) + (q.std_err / q.value).powi(2)).sqrt();
            (r.ln(), y, se)
        })
        .collect();
    rows.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let x: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let fit = ols(&x, &y)?;
    let mut rng = substream(seed, "exponent-fit", 0);
    let mut slopes = Vec::with_capacity(n_boot as usize);
    let mut yb = y.clone();
    for _ in 0..n_boot {
        for (v, row) in yb.iter_mut().zip(&rows) {
            let z: f64 = rng.sample(rand_distr::StandardNormal);
            *v = row.1 + row.2 * z;
        }
        slopes.push(ols(&x, &yb)?.slope);
    }
    let (band_low, band_high) = if slopes.is_empty() {
        (fit.slope, fit.slope)
    } else {
        (quantile(&slopes, 0.025), quantile(&slopes, 0.975))
    };
    Ok(ExponentFit {
        slope: fit.slope,
        intercept: fit.intercept,
        slope_std_err: fit.slope_std_err,
        band_low,
        band_high,
        n_boot,
    })
}
