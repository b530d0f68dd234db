//! Brownian path primitives: Gaussian steps, uniform directions,
//! walk-on-spheres hitting, and Brownian-bridge refinement.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::geometry::{Capsule, PointD, MAX_DIM};

pub fn gaussian_point<R: Rng + ?Sized>(dim: usize, sd: f64, rng: &mut R) -> PointD {
    let mut c = [0.0; MAX_DIM];
    for x in c.iter_mut().take(dim) {
        let z: f64 = rng.sample(StandardNormal);
        *x = sd * z;
    }
    PointD::from_array(dim, c)
}

/// Uniform point on the unit sphere `S^{dim-1}`.
pub fn uniform_direction<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> PointD {
    loop {
        let g = gaussian_point(dim, 1.0, rng);
        let n = g.norm();
        if n > 1e-300 {
            return g * (1.0 / n);
        }
    }
}

pub fn uniform_on_sphere<R: Rng + ?Sized>(center: &PointD, radius: f64, rng: &mut R) -> PointD {
    center.add_scaled(&uniform_direction(center.dim(), rng), radius)
}

/// Walk-on-spheres parameters.
#[derive(Clone, Copy, Debug)]
pub struct WalkConfig {
    /// The walk stops once within this distance of the target surface.
    pub shell: f64,
    pub kill_center: PointD,
    pub kill_radius: f64,
    /// Safety cap; exceeding it yields `Unresolved`.
    pub max_jumps: u64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum WalkOutcome {
    Hit(PointD),
    Unresolved(PointD),
    Escaped,
}

/// Walk-on-spheres until the `shell`-neighbourhood of `target` or the kill
/// sphere. Hit/escape outcomes of Brownian motion are preserved by each
/// jump, since a jump samples the exit point of the largest ball that
/// avoids the target.
pub fn walk_to_shell<R: Rng + ?Sized>(
    start: PointD,
    target: &Capsule,
    cfg: &WalkConfig,
    rng: &mut R,
) -> Option<(PointD, f64)> {
    let dim = start.dim();
    let kill_sq = cfg.kill_radius * cfg.kill_radius;
    let mut x = start;
    for _ in 0..cfg.max_jumps {
        let delta = target.signed_distance(&x);
        if delta <= cfg.shell {
            return Some((x, delta.max(0.0)));
        }
        if (x - cfg.kill_center).norm_sq() > kill_sq {
            return None;
        }
        x = x.add_scaled(&uniform_direction(dim, rng), delta);
    }
    Some((x, f64::INFINITY))
}

/// Hitting test for a capsule target by walk-on-spheres.
///
/// On reaching the shell at distance δ, the path hits the inscribed ball of
/// radius ρ tangent below it with probability `(ρ/(ρ+δ))^{d-2}`; that is a
/// definite HIT. Otherwise the outcome is exact (MISS) for a ball target and
/// UNRESOLVED for a proper capsule.
pub fn walk_to_target<R: Rng + ?Sized>(
    start: PointD,
    target: &Capsule,
    cfg: &WalkConfig,
    rng: &mut R,
) -> WalkOutcome {
    let Some((x, delta)) = walk_to_shell(start, target, cfg, rng) else {
        return WalkOutcome::Escaped;
    };
    if !delta.is_finite() {
        return WalkOutcome::Unresolved(x);
    }
    let rho = target.radius;
    let p_hit = (rho / (rho + delta)).powi(x.dim() as i32 - 2);
    if rng.random::<f64>() < p_hit {
        WalkOutcome::Hit(x)
    } else if target.axis.a == target.axis.b {
        // Missing the ball from distance δ means escaping the tangent ball,
        // which is the target itself.
        WalkOutcome::Escaped
    } else {
        WalkOutcome::Unresolved(x)
    }
}

/// Inserts Brownian-bridge midpoints between `x0` and `x1` (time gap `dt`)
/// until consecutive points are at most `max_gap` apart. Appends the new
/// points after `x0`, ending with `x1`, with their times.
pub fn bridge_refine<R: Rng + ?Sized>(
    t0: f64,
    x0: PointD,
    t1: f64,
    x1: PointD,
    max_gap: f64,
    rng: &mut R,
    out: &mut Vec<(f64, PointD)>,
) {
    // Depth-first on a stack of pending intervals, right halves pushed first.
    let mut stack = vec![(t0, x0, t1, x1)];
    let dim = x0.dim();
    while let Some((ta, a, tb, b)) = stack.pop() {
        let dt = tb - ta;
        if a.dist(&b) <= max_gap || dt <= 1e-300 {
            out.push((tb, b));
            continue;
        }
        let tm = 0.5 * (ta + tb);
        let m = (a + b) * 0.5 + gaussian_point(dim, (0.25 * dt).sqrt(), rng);
        stack.push((tm, m, tb, b));
        stack.push((ta, a, tm, m));
    }
}
