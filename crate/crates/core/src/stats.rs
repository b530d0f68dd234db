//! Goodness-of-fit tests, binomial intervals and least squares.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{ensure, Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatTestResult {
    pub test: String,
    pub statistic: f64,
    /// Asymptotic p-value; `None` for range checks without one.
    pub p_value: Option<f64>,
    /// Significance level, or the accepted interval for range checks.
    pub level: f64,
    pub passed: bool,
    pub n: usize,
}

/// `P(K > λ)` for the Kolmogorov distribution.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// `P(V > λ)` for Kuiper's statistic.
pub fn kuiper_q(lambda: f64) -> f64 {
    if lambda < 0.4 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let l2 = kf * kf * lambda * lambda;
        let term = (4.0 * l2 - 1.0) * (-2.0 * l2).exp();
        s += term;
        if term.abs() < 1e-17 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// `(D+, D-)` of sorted samples against `cdf`.
fn ecdf_deviations(sorted: &[f64], cdf: impl Fn(f64) -> f64) -> (f64, f64) {
    let n = sorted.len() as f64;
    let (mut dp, mut dm) = (0.0f64, 0.0f64);
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        dp = dp.max((i + 1) as f64 / n - f);
        dm = dm.max(f - i as f64 / n);
    }
    (dp, dm)
}

fn sorted_finite(samples: &[f64]) -> Result<Vec<f64>> {
    ensure(
        samples.iter().all(|x| x.is_finite()),
        "samples",
        "must be finite",
    )?;
    let mut v = samples.to_vec();
    v.sort_unstable_by(f64::total_cmp);
    Ok(v)
}

fn check_level(level: f64) -> Result<()> {
    ensure(
        level > 0.0 && level < 1.0,
        "level",
        format!("must lie in (0,1), got {level}"),
    )
}

/// One-sample KS test with the asymptotic p-value.
pub fn ks_test(samples: &[f64], cdf: impl Fn(f64) -> f64, level: f64) -> Result<StatTestResult> {
    check_level(level)?;
    ensure(!samples.is_empty(), "samples", "empty sample")?;
    let sorted = sorted_finite(samples)?;
    let (dp, dm) = ecdf_deviations(&sorted, cdf);
    let d = dp.max(dm);
    let sn = (sorted.len() as f64).sqrt();
    let p = kolmogorov_q((sn + 0.12 + 0.11 / sn) * d);
    Ok(StatTestResult {
        test: "KS".into(),
        statistic: d,
        p_value: Some(p),
        level,
        passed: p >= level,
        n: sorted.len(),
    })
}

/// KS test against Exponential(`rate`); needs at least 50 samples.
pub fn ks_exponential_test(samples: &[f64], rate: f64, level: f64) -> Result<StatTestResult> {
    if samples.len() < 50 {
        return Err(Error::InsufficientData(format!(
            "KS exponential test needs >= 50 samples, got {}",
            samples.len()
        )));
    }
    ensure(rate > 0.0, "rate", format!("must be positive, got {rate}"))?;
    let mut r = ks_test(
        samples,
        |x| if x <= 0.0 { 0.0 } else { -(-rate * x).exp_m1() },
        level,
    )?;
    r.test = "KS-exponential".into();
    Ok(r)
}

/// Kuiper test of uniformity on `[0, period)`.
pub fn kuiper_uniform_test(samples: &[f64], period: f64, level: f64) -> Result<StatTestResult> {
    check_level(level)?;
    ensure(period > 0.0, "period", "must be positive")?;
    ensure(samples.len() >= 2, "samples", "need at least two samples")?;
    let sorted = sorted_finite(samples)?;
    let (dp, dm) = ecdf_deviations(&sorted, |x| (x / period).clamp(0.0, 1.0));
    let v = dp + dm;
    let sn = (sorted.len() as f64).sqrt();
    let p = kuiper_q((sn + 0.155 + 0.24 / sn) * v);
    Ok(StatTestResult {
        test: "Kuiper".into(),
        statistic: v,
        p_value: Some(p),
        level,
        passed: p >= level,
        n: sorted.len(),
    })
}

/// Two-sample KS test.
pub fn ks_two_sample(a: &[f64], b: &[f64], level: f64) -> Result<StatTestResult> {
    check_level(level)?;
    ensure(!a.is_empty() && !b.is_empty(), "samples", "empty sample")?;
    let (sa, sb) = (sorted_finite(a)?, sorted_finite(b)?);
    let (na, nb) = (sa.len() as f64, sb.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < sa.len() && j < sb.len() {
        let x = sa[i].min(sb[j]);
        while i < sa.len() && sa[i] <= x {
            i += 1;
        }
        while j < sb.len() && sb[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let ne = (na * nb / (na + nb)).sqrt();
    let p = kolmogorov_q((ne + 0.12 + 0.11 / ne) * d);
    Ok(StatTestResult {
        test: "KS-two-sample".into(),
        statistic: d,
        p_value: Some(p),
        level,
        passed: p >= level,
        n: sa.len() + sb.len(),
    })
}

pub fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0);
    (m, v)
}

/// Sample variance over mean of counts, accepted within `[lo, hi]`.
pub fn variance_mean_ratio(counts: &[f64], lo: f64, hi: f64) -> Result<StatTestResult> {
    ensure(counts.len() >= 2, "counts", "need at least two replicas")?;
    let (m, v) = mean_var(counts);
    ensure(m > 0.0, "counts", "mean count is zero")?;
    let ratio = v / m;
    Ok(StatTestResult {
        test: format!("variance/mean in [{lo}, {hi}]"),
        statistic: ratio,
        p_value: None,
        level: hi - lo,
        passed: (lo..=hi).contains(&ratio),
        n: counts.len(),
    })
}

pub fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// Wilson score interval for `k` successes in `n` trials.
pub fn wilson_ci(k: u64, n: u64, level: f64) -> Result<(f64, f64)> {
    ensure(n >= 1, "n", "need n >= 1")?;
    ensure(k <= n, "k", format!("k = {k} exceeds n = {n}"))?;
    check_level(level)?;
    let z = normal_quantile(0.5 + 0.5 * level);
    let (kf, nf) = (k as f64, n as f64);
    let z2 = z * z;
    let denom = nf + z2;
    let center = (kf + 0.5 * z2) / denom;
    let half = z / denom * (kf * (nf - kf) / nf + 0.25 * z2).sqrt();
    let low = if k == 0 {
        0.0
    } else {
        (center - half).max(0.0)
    };
    let high = if k == n {
        1.0
    } else {
        (center + half).min(1.0)
    };
    Ok((low, high))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_std_err: f64,
}

/// Ordinary least squares `y ≈ intercept + slope·x`. Points are sorted
/// first, so the result is bit-identical under permutation of the input.
pub fn ols(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    ensure(x.len() == y.len(), "y", "x and y differ in length")?;
    ensure(x.len() >= 2, "x", "need at least two points")?;
    let mut pts: Vec<(f64, f64)> = x.iter().copied().zip(y.iter().copied()).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
    let (x, y) = (x.as_slice(), y.as_slice());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    ensure(sxx > 0.0, "x", "all abscissae are equal")?;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let slope_std_err = if x.len() > 2 {
        let rss: f64 = x
            .iter()
            .zip(y)
            .map(|(a, b)| (b - intercept - slope * a).powi(2))
            .sum();
        (rss / (n - 2.0) / sxx).sqrt()
    } else {
        f64::NAN
    };
    Ok(LinearFit {
        slope,
        intercept,
        slope_std_err,
    })
}

/// Empirical quantile with linear interpolation; sorts a copy.
pub fn quantile(x: &[f64], q: f64) -> f64 {
    let mut v = x.to_vec();
    v.sort_unstable_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let i = pos.floor() as usize;
    if i + 1 >= v.len() {
        return v[v.len() - 1];
    }
    let w = pos - i as f64;
    v[i] * (1.0 - w) + v[i + 1] * w
}
