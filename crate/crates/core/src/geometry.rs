//! Points, segments, capsules, polylines and circle arcs.

use std::f64::consts::{PI, TAU};
use std::ops::{Add, Index, Mul, Sub};

use crate::error::{ensure, invalid, Error, Result};

/// Largest supported ambient dimension. Points are stored inline.
pub const MAX_DIM: usize = 8;

#[derive(Clone, Copy, PartialEq)]
pub struct PointD {
    dim: usize,
    c: [f64; MAX_DIM],
}

impl std::fmt::Debug for PointD {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_tuple("PointD").field(&self.coords()).finish()
    }
}

pub(crate) fn check_dim(d: usize) -> Result<()> {
    if (2..=MAX_DIM).contains(&d) {
        Ok(())
    } else {
        Err(Error::UnsupportedDimension {
            got: d,
            min: 2,
            max: MAX_DIM,
        })
    }
}

impl PointD {
    pub fn new(coords: &[f64]) -> Result<Self> {
        check_dim(coords.len())?;
        ensure(
            coords.iter().all(|x| x.is_finite()),
            "coords",
            "all coordinates must be finite",
        )?;
        let mut c = [0.0; MAX_DIM];
        c[..coords.len()].copy_from_slice(coords);
        Ok(Self {
            dim: coords.len(),
            c,
        })
    }

    pub fn origin(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self {
            dim,
            c: [0.0; MAX_DIM],
        })
    }

    /// `len · e_axis`.
    pub fn on_axis(dim: usize, axis: usize, len: f64) -> Result<Self> {
        let mut p = Self::origin(dim)?;
        ensure(
            axis < dim,
            "axis",
            format!("axis {axis} out of range for d={dim}"),
        )?;
        ensure(len.is_finite(), "len", "must be finite")?;
        p.c[axis] = len;
        Ok(p)
    }

    /// Unchecked constructor for hot loops; `dim` must already be valid.
    pub(crate) fn from_array(dim: usize, c: [f64; MAX_DIM]) -> Self {
        debug_assert!((2..=MAX_DIM).contains(&dim));
        Self { dim, c }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coords(&self) -> &[f64] {
        &self.c[..self.dim]
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.coords()
            .iter()
            .zip(other.coords())
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn dist(&self, other: &Self) -> f64 {
        (*self - *other).norm()
    }

    /// `self + t·v`.
    pub fn add_scaled(&self, v: &Self, t: f64) -> Self {
        let mut out = *self;
        for i in 0..self.dim {
            out.c[i] += t * v.c[i];
        }
        out
    }

    pub(crate) fn check_same_dim(&self, other: &Self) -> Result<()> {
        if self.dim == other.dim {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(self.dim, other.dim))
        }
    }
}

impl Index<usize> for PointD {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.coords()[i]
    }
}

impl Add for PointD {
    type Output = PointD;
    fn add(mut self, rhs: PointD) -> PointD {
        debug_assert_eq!(self.dim, rhs.dim);
        for i in 0..self.dim {
            self.c[i] += rhs.c[i];
        }
        self
    }
}

impl Sub for PointD {
    type Output = PointD;
    fn sub(mut self, rhs: PointD) -> PointD {
        debug_assert_eq!(self.dim, rhs.dim);
        for i in 0..self.dim {
            self.c[i] -= rhs.c[i];
        }
        self
    }
}

impl Mul<f64> for PointD {
    type Output = PointD;
    fn mul(mut self, rhs: f64) -> PointD {
        for i in 0..self.dim {
            self.c[i] *= rhs;
        }
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Segment {
    pub a: PointD,
    pub b: PointD,
}

impl Segment {
    /// A proper segment; `a == b` is rejected.
    pub fn new(a: PointD, b: PointD) -> Result<Self> {
        a.check_same_dim(&b)?;
        ensure(
            a != b,
            "segment",
            "endpoints coincide; use Segment::degenerate",
        )?;
        Ok(Self { a, b })
    }

    /// The zero-length segment `[p, p]`.
    pub fn degenerate(p: PointD) -> Self {
        Self { a: p, b: p }
    }

    pub fn dim(&self) -> usize {
        self.a.dim
    }

    pub fn length(&self) -> f64 {
        self.a.dist(&self.b)
    }

    pub fn midpoint(&self) -> PointD {
        (self.a + self.b) * 0.5
    }
}

/// Distance from `p` to the segment `[a, b]`; dimensions are not checked.
#[inline]
pub(crate) fn segment_distance(p: &PointD, a: &PointD, b: &PointD) -> f64 {
    let mut ab2 = 0.0;
    let mut ap_ab = 0.0;
    for i in 0..p.dim {
        let ab = b.c[i] - a.c[i];
        ab2 += ab * ab;
        ap_ab += (p.c[i] - a.c[i]) * ab;
    }
    let t = if ab2 > 0.0 {
        (ap_ab / ab2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let mut d2 = 0.0;
    for i in 0..p.dim {
        let q = a.c[i] + t * (b.c[i] - a.c[i]);
        let e = p.c[i] - q;
        d2 += e * e;
    }
    d2.sqrt()
}

pub fn dist_point_segment(p: &PointD, s: &Segment) -> Result<f64> {
    p.check_same_dim(&s.a)?;
    Ok(segment_distance(p, &s.a, &s.b))
}

/// Closed (default) or open ρ-neighbourhood of a segment. The two differ
/// only on the boundary, which Brownian motion hits with the same
/// probability, so capacities agree.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Capsule {
    pub axis: Segment,
    pub radius: f64,
    pub open: bool,
}

impl Capsule {
    pub fn new(axis: Segment, radius: f64) -> Result<Self> {
        ensure(
            radius > 0.0 && radius.is_finite(),
            "radius",
            format!("must be positive and finite, got {radius}"),
        )?;
        Ok(Self {
            axis,
            radius,
            open: false,
        })
    }

    /// The ball `B(center, radius)` as a zero-length capsule.
    pub fn ball(center: PointD, radius: f64) -> Result<Self> {
        Self::new(Segment::degenerate(center), radius)
    }

    pub fn with_open(mut self, open: bool) -> Self {
        self.open = open;
        self
    }

    pub fn dim(&self) -> usize {
        self.axis.dim()
    }

    pub fn axis_distance(&self, p: &PointD) -> f64 {
        segment_distance(p, &self.axis.a, &self.axis.b)
    }

    /// Signed distance to the capsule surface, negative inside.
    pub fn signed_distance(&self, p: &PointD) -> f64 {
        self.axis_distance(p) - self.radius
    }

    pub fn contains(&self, p: &PointD) -> bool {
        let d = self.axis_distance(p);
        if self.open {
            d < self.radius
        } else {
            d <= self.radius
        }
    }

    pub fn center(&self) -> PointD {
        self.axis.midpoint()
    }

    /// Radius of the smallest ball about `center()` containing the capsule.
    pub fn circumradius(&self) -> f64 {
        0.5 * self.axis.length() + self.radius
    }

    /// Same axis, radius changed by `delta`.
    pub fn inflated(&self, delta: f64) -> Result<Self> {
        Capsule::new(self.axis, self.radius + delta).map(|c| c.with_open(self.open))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Polyline {
    times: Vec<f64>,
    points: Vec<PointD>,
    step_bound: f64,
}

impl Polyline {
    pub fn new(times: Vec<f64>, points: Vec<PointD>) -> Result<Self> {
        ensure(
            times.len() == points.len(),
            "points",
            format!("{} times but {} points", times.len(), points.len()),
        )?;
        ensure(!points.is_empty(), "points", "polyline is empty")?;
        ensure(
            times.windows(2).all(|w| w[0] < w[1]),
            "times",
            "must be strictly increasing",
        )?;
        let dim = points[0].dim;
        if let Some(p) = points.iter().find(|p| p.dim != dim) {
            return Err(Error::DimensionMismatch(dim, p.dim));
        }
        let step_bound = points
            .windows(2)
            .map(|w| w[0].dist(&w[1]))
            .fold(0.0, f64::max);
        Ok(Self {
            times,
            points,
            step_bound,
        })
    }

    /// Single-point polyline, extended with `push`.
    pub fn start(t: f64, p: PointD) -> Self {
        Self {
            times: vec![t],
            points: vec![p],
            step_bound: 0.0,
        }
    }

    /// Appends a sample; `t` must exceed the last time.
    pub fn push(&mut self, t: f64, p: PointD) {
        debug_assert!(t > *self.times.last().unwrap_or(&f64::NEG_INFINITY));
        if let Some(last) = self.points.last() {
            self.step_bound = self.step_bound.max(last.dist(&p));
        }
        self.times.push(t);
        self.points.push(p);
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn points(&self) -> &[PointD] {
        &self.points
    }

    pub fn step_bound(&self) -> f64 {
        self.step_bound
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].dim
    }

    pub fn reversed(&self) -> Self {
        let t_end = *self.times.last().unwrap_or(&0.0);
        let times = self.times.iter().rev().map(|t| t_end - t).collect();
        let points = self.points.iter().rev().copied().collect();
        Self {
            times,
            points,
            step_bound: self.step_bound,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Intersection {
    Hit,
    Miss,
    Unresolved,
}

impl Intersection {
    /// Combines outcomes of disjoint pieces of one path.
    pub fn or(self, other: Intersection) -> Intersection {
        use Intersection::*;
        match (self, other) {
            (Hit, _) | (_, Hit) => Hit,
            (Unresolved, _) | (_, Unresolved) => Unresolved,
            _ => Miss,
        }
    }
}

/// Tri-state test of a sampled path against a capsule.
///
/// HIT needs a sample within `radius - margin` of the axis. MISS needs every
/// sample beyond `radius + margin` and `step_bound <= margin`.
pub fn polyline_capsule_intersect(pl: &Polyline, c: &Capsule, margin: f64) -> Result<Intersection> {
    ensure(
        (0.0..c.radius).contains(&margin),
        "margin",
        format!("need 0 <= margin < radius = {}, got {margin}", c.radius),
    )?;
    pl.points[0].check_same_dim(&c.axis.a)?;
    let mut all_far = true;
    for p in &pl.points {
        let d = c.axis_distance(p);
        if d <= c.radius - margin {
            return Ok(Intersection::Hit);
        }
        if d <= c.radius + margin {
            all_far = false;
        }
    }
    if all_far && pl.step_bound <= margin {
        Ok(Intersection::Miss)
    } else {
        Ok(Intersection::Unresolved)
    }
}

/// Euclidean radius of the hyperbolic disc `B_H(0, r_h)` in the Poincaré model.
pub fn hyp_to_euc_radius(r_h: f64) -> Result<f64> {
    ensure(r_h > 0.0, "r_h", format!("must be positive, got {r_h}"))?;
    Ok((0.5 * r_h).tanh())
}

/// Hyperbolic distance from the origin to `v` in the unit disc.
pub fn hyperbolic_distance_from_origin(v_mod: f64) -> Result<f64> {
    ensure(
        (0.0..1.0).contains(&v_mod),
        "v_mod",
        format!("must lie in [0,1), got {v_mod}"),
    )?;
    Ok(2.0 * v_mod.atanh())
}

/// Default origin exclusion radius for angular ranges.
pub const DEFAULT_ORIGIN_EXCLUSION: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AngleRange {
    /// `min(max - min, 2π)` of the unwrapped angle.
    pub theta: f64,
    /// Unwrapped extremes; meaningless when `through_origin`.
    pub min: f64,
    pub max: f64,
    /// The path entered the exclusion disc; `theta` is then 2π.
    pub through_origin: bool,
}

/// Streaming unwrapped-angle tracker for planar paths.
#[derive(Clone, Debug)]
pub struct AngleTracker {
    exclusion: f64,
    last: Option<(f64, f64)>,
    angle: f64,
    min: f64,
    max: f64,
    index: usize,
    through_origin: bool,
}

impl AngleTracker {
    pub fn new(exclusion: f64) -> Self {
        Self {
            exclusion,
            last: None,
            angle: 0.0,
            min: 0.0,
            max: 0.0,
            index: 0,
            through_origin: false,
        }
    }

    /// Feeds the next point. Errors if the angular change is not below π/2.
    pub fn push(&mut self, x: f64, y: f64) -> Result<()> {
        let idx = self.index;
        self.index += 1;
        if self.through_origin {
            return Ok(());
        }
        if x.hypot(y) < self.exclusion {
            self.through_origin = true;
            return Ok(());
        }
        match self.last {
            None => {
                self.angle = y.atan2(x);
                self.min = self.angle;
                self.max = self.angle;
            }
            Some((px, py)) => {
                let delta = (px * y - py * x).atan2(px * x + py * y);
                if delta.abs() >= 0.5 * PI {
                    return Err(Error::AmbiguousUnwrap { index: idx, delta });
                }
                self.angle += delta;
                self.min = self.min.min(self.angle);
                self.max = self.max.max(self.angle);
            }
        }
        self.last = Some((x, y));
        Ok(())
    }

    /// Widens the extremes to include `angle` (unwrapped, same branch).
    pub fn extend_to(&mut self, angle: f64) {
        self.min = self.min.min(angle);
        self.max = self.max.max(angle);
    }

    pub fn current(&self) -> f64 {
        self.angle
    }

    pub fn through_origin(&self) -> bool {
        self.through_origin
    }

    pub fn width(&self) -> f64 {
        if self.through_origin {
            TAU
        } else {
            (self.max - self.min).min(TAU)
        }
    }

    pub fn finish(&self) -> AngleRange {
        AngleRange {
            theta: self.width(),
            min: self.min,
            max: self.max,
            through_origin: self.through_origin,
        }
    }
}

/// Angular range of a planar polyline seen from the origin.
pub fn angle_range(pl: &Polyline, exclusion: f64) -> Result<AngleRange> {
    if pl.dim() != 2 {
        return Err(Error::DimensionMismatch(pl.dim(), 2));
    }
    ensure(exclusion >= 0.0, "exclusion", "must be nonnegative")?;
    let mut tracker = AngleTracker::new(exclusion);
    for p in &pl.points {
        tracker.push(p.c[0], p.c[1])?;
        if tracker.through_origin() {
            break;
        }
    }
    Ok(tracker.finish())
}

/// An arc of the circle of circumference 2π.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ShadowArc {
    pub center: f64,
    pub length: f64,
}

impl ShadowArc {
    pub fn new(center: f64, length: f64) -> Result<Self> {
        ensure(
            (0.0..=TAU).contains(&length),
            "length",
            format!("must lie in [0, 2π], got {length}"),
        )?;
        ensure(center.is_finite(), "center", "must be finite")?;
        Ok(Self {
            center: center.rem_euclid(TAU),
            length,
        })
    }

    pub fn is_full(&self) -> bool {
        self.length >= TAU
    }
}

impl From<AngleRange> for ShadowArc {
    fn from(r: AngleRange) -> Self {
        if r.theta >= TAU {
            ShadowArc {
                center: 0.0,
                length: TAU,
            }
        } else {
            ShadowArc {
                center: (0.5 * (r.min + r.max)).rem_euclid(TAU),
                length: r.theta,
            }
        }
    }
}

/// Rejects a NaN or negative value for a named length parameter.
pub(crate) fn positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(
            name,
            format!("must be positive and finite, got {v}"),
        ))
    }
}
