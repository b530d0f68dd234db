//! Law of the range `R(1) = max - min` of standard Brownian motion on
//! `[0, 1]`, with two interchangeable backends.
//!
//! [`FellerSeries`] tabulates the CDF of the series density by quadrature.
//! [`EmpiricalRange`] is built from simulated ranges. Tests cross-validate
//! the two.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{ensure, Result};
use crate::quadrature::{integrate, QuadConfig};

/// `2·sqrt(2/π)`.
pub fn range_mean_exact() -> f64 {
    2.0 * (2.0 / PI).sqrt()
}

pub trait RangeDistribution: Send + Sync {
    fn pdf(&self, r: f64) -> f64;
    fn cdf(&self, r: f64) -> f64;
    /// Inverse CDF on `(0, 1)`.
    fn quantile(&self, u: f64) -> f64;
    /// Upper end of the effective support.
    fn support_max(&self) -> f64;

    fn sample(&self, rng: &mut dyn rand::RngCore) -> f64 {
        let u: f64 = rng.random();
        self.quantile(u)
    }
}

fn phi(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Density from the large-`r` series `8 Σ_{k≥1} (-1)^{k-1} k² φ(kr)`.
fn density_large(r: f64) -> f64 {
    let mut s = 0.0;
    for k in 1..200 {
        let kf = k as f64;
        let term = kf * kf * phi(kf * r);
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-300 || kf * r > 40.0 {
            break;
        }
    }
    8.0 * s
}

/// Density from the theta-function form, accurate for small `r`:
/// with `x = r²/2` and `c_n = π²(n+½)²`,
/// `h(r) = (8/sqrt(2π))·sqrt(π)·Σ_{n≥0} e^{-c_n/x}(c_n x^{-5/2} - x^{-3/2}/2)`.
fn density_small(r: f64) -> f64 {
    if r <= 0.0 {
        return 0.0;
    }
    let x = 0.5 * r * r;
    let mut s = 0.0;
    for n in 0..200 {
        let nf = n as f64 + 0.5;
        let c = PI * PI * nf * nf;
        if c / x > 745.0 {
            break;
        }
        s += (-c / x).exp() * (c * x.powf(-2.5) - 0.5 * x.powf(-1.5));
    }
    8.0 / (2.0 * PI).sqrt() * PI.sqrt() * s
}

/// Series density of `R(1)`; switches form at `r = 1`.
pub fn range_density(r: f64) -> f64 {
    if r <= 0.0 {
        0.0
    } else if r < 1.0 {
        density_small(r)
    } else {
        density_large(r)
    }
}

/// Closed-form tail `P(R(1) > r) = 8 Σ_{k≥1} (-1)^{k-1} k (1 - Φ(kr))`,
/// usable for `r ≳ 0.5`.
pub fn range_tail_series(r: f64) -> f64 {
    let mut s = 0.0;
    for k in 1..400 {
        let kf = k as f64;
        let term = kf * 0.5 * libm::erfc(kf * r / 2f64.sqrt());
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-300 {
            break;
        }
    }
    8.0 * s
}

/// CDF tabulated on a uniform grid by Gauss–Kronrod per cell; quantiles by
/// bisection on the table and Newton refinement within the cell.
#[derive(Clone, Debug)]
pub struct FellerSeries {
    step: f64,
    cdf: Vec<f64>,
}

const FELLER_RMAX: f64 = 10.0;

impl FellerSeries {
    pub fn new() -> Result<Self> {
        let cells = 2560;
        let step = FELLER_RMAX / cells as f64;
        let cfg = QuadConfig {
            abs_tol: 1e-15,
            rel_tol: 1e-12,
            max_intervals: 200,
        };
        let mut cdf = Vec::with_capacity(cells + 1);
        cdf.push(0.0);
        let mut acc = 0.0;
        for i in 0..cells {
            let a = i as f64 * step;
            acc += integrate(range_density, a, a + step, &cfg)?.value;
            cdf.push(acc);
        }
        Ok(Self { step, cdf })
    }

    /// Tabulated total mass; 1 up to quadrature error.
    pub fn total_mass(&self) -> f64 {
        *self.cdf.last().unwrap_or(&0.0)
    }

    /// `∫ r h(r) dr` by quadrature of the series density.
    pub fn mean(&self) -> f64 {
        let cfg = QuadConfig::default();
        integrate(|r| r * range_density(r), 0.0, FELLER_RMAX, &cfg)
            .map(|q| q.value)
            .unwrap_or(f64::NAN)
    }
}

impl RangeDistribution for FellerSeries {
    fn pdf(&self, r: f64) -> f64 {
        range_density(r)
    }

    fn cdf(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        if r >= FELLER_RMAX {
            return 1.0;
        }
        let i = ((r / self.step) as usize).min(self.cdf.len() - 2);
        let a = i as f64 * self.step;
        // Five-point Gauss–Legendre on the partial cell.
        let h = 0.5 * (r - a);
        let c = a + h;
        const X: [f64; 3] = [0.0, 0.538_469_310_105_683_1, 0.906_179_845_938_664];
        const W: [f64; 3] = [
            0.568_888_888_888_888_9,
            0.478_628_670_499_366_5,
            0.236_926_885_056_189_1,
        ];
        let mut s = W[0] * range_density(c);
        for j in 1..3 {
            s += W[j] * (range_density(c - h * X[j]) + range_density(c + h * X[j]));
        }
        (self.cdf[i] + h * s).clamp(0.0, 1.0)
    }

    fn quantile(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        let i = self
            .cdf
            .partition_point(|&f| f <= u)
            .clamp(1, self.cdf.len() - 1)
            - 1;
        let (f0, f1) = (self.cdf[i], self.cdf[i + 1]);
        let a = i as f64 * self.step;
        let mut r = if f1 > f0 {
            a + self.step * (u - f0) / (f1 - f0)
        } else {
            a
        };
        for _ in 0..3 {
            let d = range_density(r);
            if d <= 0.0 {
                break;
            }
            r = (r - (self.cdf(r) - u) / d).clamp(a, a + self.step);
        }
        r
    }

    fn support_max(&self) -> f64 {
        FELLER_RMAX
    }
}

/// Empirical law of simulated ranges.
#[derive(Clone, Debug)]
pub struct EmpiricalRange {
    sorted: Vec<f64>,
    bandwidth: f64,
}

impl EmpiricalRange {
    pub fn from_samples(mut samples: Vec<f64>) -> Result<Self> {
        ensure(samples.len() >= 100, "samples", "need at least 100 samples")?;
        ensure(
            samples.iter().all(|x| x.is_finite() && *x >= 0.0),
            "samples",
            "must be finite and nonnegative",
        )?;
        samples.sort_unstable_by(f64::total_cmp);
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let sd = (samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
        Ok(Self {
            sorted: samples,
            bandwidth: 1.06 * sd * n.powf(-0.2),
        })
    }

    /// Simulates `n` ranges with `steps`-step bridge-corrected paths.
    pub fn simulate<R: Rng + ?Sized>(n: usize, steps: usize, rng: &mut R) -> Result<Self> {
        Self::from_samples((0..n).map(|_| sample_brownian_range(steps, rng)).collect())
    }

    pub fn samples(&self) -> &[f64] {
        &self.sorted
    }
}

impl RangeDistribution for EmpiricalRange {
    /// Gaussian kernel density estimate.
    fn pdf(&self, r: f64) -> f64 {
        let h = self.bandwidth;
        let lo = self.sorted.partition_point(|&x| x < r - 8.0 * h);
        let hi = self.sorted.partition_point(|&x| x <= r + 8.0 * h);
        let s: f64 = self.sorted[lo..hi].iter().map(|x| phi((r - x) / h)).sum();
        s / (self.sorted.len() as f64 * h)
    }

    fn cdf(&self, r: f64) -> f64 {
        self.sorted.partition_point(|&x| x <= r) as f64 / self.sorted.len() as f64
    }

    fn quantile(&self, u: f64) -> f64 {
        let n = self.sorted.len();
        let pos = (u.clamp(0.0, 1.0) * (n - 1) as f64).max(0.0);
        let i = (pos as usize).min(n - 2);
        let w = pos - i as f64;
        self.sorted[i] * (1.0 - w) + self.sorted[i + 1] * w
    }

    fn support_max(&self) -> f64 {
        *self.sorted.last().unwrap_or(&0.0) + 8.0 * self.bandwidth
    }
}

/// Maximum of a Brownian bridge from `a` to `b` with variance `v` over the
/// interval, sampled exactly from its reflection-principle law.
#[inline]
pub(crate) fn bridge_max(a: f64, b: f64, v: f64, u: f64) -> f64 {
    0.5 * (a + b + ((b - a) * (b - a) - 2.0 * v * u.ln()).sqrt())
}

#[inline]
pub(crate) fn bridge_min(a: f64, b: f64, v: f64, u: f64) -> f64 {
    0.5 * (a + b - ((b - a) * (b - a) - 2.0 * v * u.ln()).sqrt())
}

/// `1 - U` in `(0, 1]`, safe for logarithms.
#[inline]
pub(crate) fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    1.0 - rng.random::<f64>()
}

/// Range of standard Brownian motion on `[0, 1]`, from a `steps`-step
/// Gaussian walk whose per-step maxima and minima are drawn from the
/// Brownian-bridge laws.
pub fn sample_brownian_range<R: Rng + ?Sized>(steps: usize, rng: &mut R) -> f64 {
    let steps = steps.max(1);
    let v = 1.0 / steps as f64;
    let sd = v.sqrt();
    let (mut x, mut hi, mut lo) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..steps {
        let z: f64 = rng.sample(StandardNormal);
        let y = x + sd * z;
        hi = hi.max(bridge_max(x, y, v, open_unit(rng)));
        lo = lo.min(bridge_min(x, y, v, open_unit(rng)));
        x = y;
    }
    hi - lo
}
