//! Newtonian capacity: closed forms for balls and a launch-sphere Monte
//! Carlo estimator for capsules.
//!
//! For `K ⊂ B(c, R)` the number of Brownian paths started from the
//! normalized equilibrium measure of `B(c, R)` that reach `K` satisfies
//! `cap(K) = cap(B(c,R)) · P_{σ_R}(hit K)`, where `σ_R` is uniform on the
//! sphere. The estimator simulates that probability with walk-on-spheres
//! and a kill sphere of radius `R_kill`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::brownian::{uniform_on_sphere, walk_to_target, WalkConfig, WalkOutcome};
use crate::error::{ensure, Error, Result};
use crate::geometry::{positive, Capsule, PointD};
use crate::rng::Replicator;

pub(crate) fn check_transient_dim(d: usize) -> Result<()> {
    if (3..=crate::geometry::MAX_DIM).contains(&d) {
        Ok(())
    } else {
        Err(Error::UnsupportedDimension {
            got: d,
            min: 3,
            max: crate::geometry::MAX_DIM,
        })
    }
}

/// `c_d` in `G(x, y) = c_d |x - y|^{2-d}`.
pub fn green_constant(d: usize) -> Result<f64> {
    check_transient_dim(d)?;
    let h = d as f64 / 2.0;
    Ok(gamma(h - 1.0) / (2.0 * PI.powf(h)))
}

/// Probability that Brownian motion from `x` ever hits `B(0, t)`.
pub fn ball_hitting_prob(x: &PointD, t: f64) -> Result<f64> {
    check_transient_dim(x.dim())?;
    positive("t", t)?;
    let r = x.norm();
    ensure(
        r >= t,
        "x",
        format!("|x| = {r} lies inside the ball of radius {t}"),
    )?;
    Ok((t / r).powi(x.dim() as i32 - 2))
}

pub fn ball_capacity_exact(t: f64, d: usize) -> Result<f64> {
    positive("t", t)?;
    Ok(t.powi(d as i32 - 2) / green_constant(d)?)
}

/// Capacity of the hyperbolic disc of radius `r_h` for the excursion
/// measure, `2π / log coth(r_h / 2)`.
pub fn hyperbolic_ball_capacity(r_h: f64) -> Result<f64> {
    positive("r_h", r_h)?;
    let coth = 1.0 / (0.5 * r_h).tanh();
    Ok(2.0 * PI / coth.ln())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapacityEstimate {
    /// UNRESOLVED walks counted as hits.
    pub value: f64,
    /// UNRESOLVED walks counted as misses.
    pub lower_value: f64,
    pub std_err: f64,
    pub bias_bound: f64,
    pub n_samples: u64,
    pub launch_radius: f64,
    pub kill_radius: f64,
    pub hits: u64,
    pub unresolved: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapacityConfig {
    pub n: u64,
    /// Launch radius over the capsule circumradius; must exceed 1.
    pub launch_factor: f64,
    /// Kill radius over the launch radius; at least 10.
    pub kill_factor: f64,
    /// Walk-on-spheres shell width over the capsule radius.
    pub shell_frac: f64,
}

impl Default for CapacityConfig {
    fn default() -> Self {
        Self {
            n: 100_000,
            launch_factor: 5.0,
            kill_factor: 2.0e4,
            shell_frac: 1e-4,
        }
    }
}

pub(crate) const MAX_JUMPS: u64 = 10_000_000;
const BLOCK: u64 = 4096;

/// Capacity of `c` from walks launched uniformly on `∂B(center(c), R)`.
pub fn capsule_capacity_mc(
    c: &Capsule,
    cfg: &CapacityConfig,
    rep: &Replicator,
) -> Result<CapacityEstimate> {
    let d = c.dim();
    check_transient_dim(d)?;
    ensure(cfg.n >= 1, "n", "need at least one sample")?;
    ensure(
        cfg.launch_factor > 1.0,
        "launch_factor",
        format!(
            "capsule must lie strictly inside the launch sphere; got factor {}",
            cfg.launch_factor
        ),
    )?;
    ensure(
        cfg.kill_factor >= 10.0,
        "kill_factor",
        format!("need R_kill >= 10 R, got factor {}", cfg.kill_factor),
    )?;
    positive("shell_frac", cfg.shell_frac)?;
    let center = c.center();
    let launch = cfg.launch_factor * c.circumradius();
    let walk = WalkConfig {
        shell: cfg.shell_frac * c.radius,
        kill_center: center,
        kill_radius: cfg.kill_factor * launch,
        max_jumps: MAX_JUMPS,
    };
    let counts = rep.run_blocks("capacity", cfg.n, BLOCK, |len, rng| {
        let (mut hits, mut unresolved) = (0u64, 0u64);
        for _ in 0..len {
            let start = uniform_on_sphere(&center, launch, rng);
            match walk_to_target(start, c, &walk, rng) {
                WalkOutcome::Hit(_) => hits += 1,
                WalkOutcome::Unresolved(_) => unresolved += 1,
                WalkOutcome::Escaped => {}
            }
        }
        (hits, unresolved)
    });
    let (hits, unresolved) = counts
        .iter()
        .fold((0, 0), |(h, u), &(bh, bu)| (h + bh, u + bu));
    let scale = ball_capacity_exact(launch, d)?;
    Ok(scaled_estimate(
        hits,
        unresolved,
        cfg.n,
        scale,
        cfg.kill_factor,
        d,
        launch,
    ))
}

fn scaled_estimate(
    hits: u64,
    unresolved: u64,
    n: u64,
    scale: f64,
    kill_factor: f64,
    d: usize,
    launch: f64,
) -> CapacityEstimate {
    let nf = n as f64;
    let p = (hits + unresolved) as f64 / nf;
    CapacityEstimate {
        value: scale * p,
        lower_value: scale * hits as f64 / nf,
        std_err: scale * (p * (1.0 - p) / nf).sqrt(),
        bias_bound: scale * kill_factor.powi(-(d as i32 - 2)),
        n_samples: n,
        launch_radius: launch,
        kill_radius: kill_factor * launch,
        hits,
        unresolved,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HittingEstimate {
    pub p_hat: f64,
    pub std_err: f64,
    pub hits: u64,
    pub n: u64,
}

/// Monte Carlo estimate of `P_x(hit B(0, t))` by walk-on-spheres, killed at
/// `kill_factor · |x|`.
pub fn ball_hitting_mc(
    x: &PointD,
    t: f64,
    n: u64,
    kill_factor: f64,
    rep: &Replicator,
) -> Result<HittingEstimate> {
    let d = x.dim();
    ensure(n >= 1, "n", "need at least one sample")?;
    ball_hitting_prob(x, t)?;
    ensure(kill_factor > 1.0, "kill_factor", "must exceed 1")?;
    let origin = PointD::origin(d)?;
    let ball = Capsule::ball(origin, t)?;
    let walk = WalkConfig {
        shell: 1e-6 * t,
        kill_center: origin,
        kill_radius: kill_factor * x.norm(),
        max_jumps: MAX_JUMPS,
    };
    let start = *x;
    let hits: u64 = rep
        .run_blocks("ball-hitting", n, BLOCK, |len, rng| {
            (0..len)
                .filter(|_| {
                    matches!(
                        walk_to_target(start, &ball, &walk, rng),
                        WalkOutcome::Hit(_)
                    )
                })
                .count() as u64
        })
        .iter()
        .sum();
    let p = hits as f64 / n as f64;
    Ok(HittingEstimate {
        p_hat: p,
        std_err: (p * (1.0 - p) / n as f64).sqrt(),
        hits,
        n,
    })
}
