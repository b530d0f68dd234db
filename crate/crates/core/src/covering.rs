//! Random covering of the circle: Shepp's series, the harmonic family
//! `l_n = c/n`, and an exact union-of-arcs engine.
//!
//! Shepp series use circumference 1; shadow arcs use circumference 2π.
//! [`shadow_to_shepp`] is the only conversion between the two.

use std::f64::consts::{PI, TAU};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, invalid, Result};

/// Merge tolerance for arc endpoints.
pub const MERGE_TOL: f64 = 1e-12;

/// Converts a shadow length on the circle of circumference 2π to the
/// circumference-1 convention of Shepp's criterion.
pub fn shadow_to_shepp(length: f64) -> f64 {
    length / TAU
}

/// Harmonic constant of the shadow process at intensity `alpha`: the
/// `n`-th largest shadow is about `8α/n`, i.e. `(4α/π)/n` of the circle.
pub fn shadow_harmonic_constant(alpha: f64) -> f64 {
    4.0 * alpha / PI
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum LengthSequence {
    /// `l_n = c / n`; `c = 0` gives the zero sequence.
    Harmonic { c: f64 },
    /// Explicit nonincreasing list; terms past the end are zero.
    Explicit(Vec<f64>),
}

impl LengthSequence {
    pub fn harmonic(c: f64) -> Result<Self> {
        ensure(
            c >= 0.0 && c.is_finite(),
            "c",
            format!("must be nonnegative and finite, got {c}"),
        )?;
        Ok(Self::Harmonic { c })
    }

    pub fn explicit(lengths: Vec<f64>) -> Result<Self> {
        ensure(
            lengths.iter().all(|l| *l >= 0.0 && l.is_finite()),
            "lengths",
            "must be nonnegative and finite",
        )?;
        if let Some(i) = lengths.windows(2).position(|w| w[1] > w[0]) {
            return Err(invalid(
                "lengths",
                format!("sequence increases at index {}", i + 1),
            ));
        }
        Ok(Self::Explicit(lengths))
    }

    /// `l_n` for `n >= 1`.
    pub fn get(&self, n: usize) -> f64 {
        debug_assert!(n >= 1);
        match self {
            Self::Harmonic { c } => c / n as f64,
            Self::Explicit(v) => v.get(n - 1).copied().unwrap_or(0.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SheppSeries {
    /// `S_n` for `n = 1..=N`; may be `inf` when the sum overflows.
    pub partial_sums: Vec<f64>,
    /// `ln S_n`, finite even when `S_n` overflows.
    pub log_partial_sums: Vec<f64>,
    /// `S_{2^{j+1}-1} - S_{2^j - 1}` over complete dyadic blocks `[2^j, 2^{j+1})`.
    pub block_increments: Vec<f64>,
    /// Ratio of the last two block increments. Terms behaving like
    /// `n^{c-2}` give ratio `2^{c-1}`; ratio ≥ 1 means no decay.
    pub tail_ratio: f64,
    /// `1 + log2(tail_ratio)`: the harmonic constant the tail resembles.
    pub effective_c: f64,
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Partial sums of `Σ n^{-2} exp(l_1 + … + l_n)` with log-domain
/// accumulation. No verdict is returned: divergence cannot be decided at a
/// finite horizon, only the tail decay is reported.
pub fn shepp_partial_sums(l: &LengthSequence, n_max: usize) -> Result<SheppSeries> {
    ensure(n_max >= 1, "N", "need N >= 1")?;
    if let LengthSequence::Explicit(v) = l {
        LengthSequence::explicit(v.clone())?;
    }
    let mut cum = 0.0;
    let mut log_s = f64::NEG_INFINITY;
    let mut partial_sums = Vec::with_capacity(n_max);
    let mut log_partial_sums = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        cum += l.get(n);
        log_s = log_add_exp(log_s, cum - 2.0 * (n as f64).ln());
        log_partial_sums.push(log_s);
        partial_sums.push(log_s.exp());
    }
    let s_before = |n: usize| if n <= 1 { 0.0 } else { partial_sums[n - 2] };
    let mut block_increments = Vec::new();
    let mut lo = 1usize;
    while 2 * lo - 1 <= n_max {
        block_increments.push(s_before(2 * lo) - s_before(lo));
        lo *= 2;
    }
    let k = block_increments.len();
    let tail_ratio = if k >= 2 && block_increments[k - 2] > 0.0 {
        block_increments[k - 1] / block_increments[k - 2]
    } else {
        f64::NAN
    };
    Ok(SheppSeries {
        partial_sums,
        log_partial_sums,
        block_increments,
        tail_ratio,
        effective_c: 1.0 + tail_ratio.log2(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Coverage {
    Covered,
    NotCovered,
}

/// Almost-sure coverage for `l_n = c/n`: covered iff `c >= 1`.
pub fn shepp_classify_harmonic(c: f64) -> Result<Coverage> {
    ensure(c > 0.0, "c", format!("must be positive, got {c}"))?;
    Ok(if c >= 1.0 {
        Coverage::Covered
    } else {
        Coverage::NotCovered
    })
}

/// Union of closed arcs on a circle, stored as sorted disjoint intervals of
/// `[0, C]`. An arc across the seam at 0 is stored as two pieces.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArcCoveringState {
    circumference: f64,
    covered: Vec<(f64, f64)>,
}

impl ArcCoveringState {
    pub fn new(circumference: f64) -> Result<Self> {
        ensure(
            circumference > 0.0 && circumference.is_finite(),
            "circumference",
            "must be positive and finite",
        )?;
        Ok(Self {
            circumference,
            covered: Vec::new(),
        })
    }

    pub fn unit() -> Self {
        Self {
            circumference: 1.0,
            covered: Vec::new(),
        }
    }

    pub fn full_circle() -> Self {
        Self {
            circumference: TAU,
            covered: Vec::new(),
        }
    }

    pub fn circumference(&self) -> f64 {
        self.circumference
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.covered
    }

    /// Pieces of the closed arc of `length` centred at `center`.
    fn pieces(&self, center: f64, length: f64) -> ([(f64, f64); 2], usize) {
        let c = self.circumference;
        if length >= c - MERGE_TOL {
            return ([(0.0, c), (0.0, 0.0)], 1);
        }
        let start = (center - 0.5 * length).rem_euclid(c);
        let end = start + length;
        if end <= c {
            ([(start, end), (0.0, 0.0)], 1)
        } else {
            ([(start, c), (0.0, end - c)], 2)
        }
    }

    /// Inserts a closed arc, merging overlaps within [`MERGE_TOL`].
    pub fn place_arc(&mut self, center: f64, length: f64) {
        debug_assert!(length >= 0.0);
        let (pieces, k) = self.pieces(center, length);
        for &(a, b) in &pieces[..k] {
            self.insert(a, b);
        }
    }

    fn insert(&mut self, mut a: f64, mut b: f64) {
        // First interval whose end reaches a - tol.
        let lo = self.covered.partition_point(|&(_, e)| e < a - MERGE_TOL);
        let mut hi = lo;
        while hi < self.covered.len() && self.covered[hi].0 <= b + MERGE_TOL {
            a = a.min(self.covered[hi].0);
            b = b.max(self.covered[hi].1);
            hi += 1;
        }
        self.covered.splice(lo..hi, std::iter::once((a, b)));
    }

    /// Builds the union of many arcs by sorting once and sweeping.
    pub fn from_arcs(
        circumference: f64,
        arcs: impl IntoIterator<Item = (f64, f64)>,
    ) -> Result<Self> {
        let mut state = Self::new(circumference)?;
        let mut raw = Vec::new();
        for (center, length) in arcs {
            let (pieces, k) = state.pieces(center, length);
            if k == 1 && pieces[0] == (0.0, circumference) {
                state.covered = vec![(0.0, circumference)];
                return Ok(state);
            }
            raw.extend_from_slice(&pieces[..k]);
        }
        raw.sort_unstable_by(|x, y| x.0.total_cmp(&y.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(raw.len());
        for (a, b) in raw {
            match merged.last_mut() {
                Some(last) if a <= last.1 + MERGE_TOL => last.1 = last.1.max(b),
                _ => merged.push((a, b)),
            }
        }
        state.covered = merged;
        Ok(state)
    }

    pub fn covered_measure(&self) -> f64 {
        self.covered.iter().map(|(a, b)| b - a).sum()
    }

    /// Total length of the gaps, computed from the gaps themselves.
    pub fn uncovered_measure(&self) -> f64 {
        self.gaps().iter().map(|(a, b)| b - a).sum()
    }

    /// Open gaps as `(start, end)` with `end` possibly beyond `C` for the
    /// gap across the seam.
    pub fn gaps(&self) -> Vec<(f64, f64)> {
        let c = self.circumference;
        let Some(&(first_a, _)) = self.covered.first() else {
            return vec![(0.0, c)];
        };
        let mut gaps = Vec::with_capacity(self.covered.len());
        for w in self.covered.windows(2) {
            if w[1].0 - w[0].1 > MERGE_TOL {
                gaps.push((w[0].1, w[1].0));
            }
        }
        let last_b = self.covered[self.covered.len() - 1].1;
        let wrap = (c - last_b) + first_a;
        if wrap > MERGE_TOL {
            gaps.push((last_b, c + first_a));
        }
        gaps
    }

    pub fn uncovered_components(&self) -> usize {
        self.gaps().len()
    }

    pub fn is_covered(&self) -> bool {
        self.gaps().is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoveringOutcome {
    pub uncovered_measure: f64,
    pub uncovered_components: usize,
}

/// Places arcs `l_1..l_N` with i.i.d. uniform centres on the unit circle.
/// Centres are drawn in order, so a run with smaller `N` and the same
/// generator state places a prefix of the same arcs.
pub fn simulate_covering<R: Rng + ?Sized>(
    l: &LengthSequence,
    n: usize,
    rng: &mut R,
) -> CoveringOutcome {
    let state = ArcCoveringState::from_arcs(1.0, (1..=n).map(|k| (rng.random::<f64>(), l.get(k))))
        .expect("unit circumference is valid");
    CoveringOutcome {
        uncovered_measure: state.uncovered_measure(),
        uncovered_components: state.uncovered_components(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use proptest::prelude::*;

    #[test]
    fn zero_sequence_sums_to_basel() {
        let s = shepp_partial_sums(&LengthSequence::harmonic(0.0).unwrap(), 100_000).unwrap();
        let last = *s.partial_sums.last().unwrap();
        // Tail of Σ 1/k² beyond N is about 1/N.
        assert!((last - PI * PI / 6.0).abs() < 1.1e-5);
    }

    #[test]
    fn harmonic_tail_diagnostic() {
        let div = shepp_partial_sums(&LengthSequence::harmonic(1.0).unwrap(), 10_000).unwrap();
        assert!(div.tail_ratio > 0.97, "{}", div.tail_ratio);
        // S_n grows like e^γ ln n.
        let s = &div.partial_sums;
        assert!(s[9_999] - s[999] > 0.9 * 1.78 * 10f64.ln());
        let conv = shepp_partial_sums(&LengthSequence::harmonic(0.5).unwrap(), 10_000).unwrap();
        assert!((conv.tail_ratio - 0.5f64.sqrt()).abs() < 0.01);
        assert!((conv.effective_c - 0.5).abs() < 0.02);
    }

    #[test]
    fn log_domain_survives_overflow() {
        let s = shepp_partial_sums(&LengthSequence::harmonic(800.0).unwrap(), 10).unwrap();
        assert!(s.partial_sums[9].is_infinite());
        assert!(s.log_partial_sums[9].is_finite());
    }

    #[test]
    fn rejects_increasing_lengths() {
        assert!(LengthSequence::explicit(vec![0.5, 0.6]).is_err());
        assert!(LengthSequence::harmonic(-1.0).is_err());
        assert!(shepp_partial_sums(&LengthSequence::Explicit(vec![0.1, 0.2]), 2).is_err());
    }

    #[test]
    fn classification() {
        assert_eq!(shepp_classify_harmonic(1.0).unwrap(), Coverage::Covered);
        assert_eq!(shepp_classify_harmonic(1.5).unwrap(), Coverage::Covered);
        assert_eq!(
            shepp_classify_harmonic(0.999).unwrap(),
            Coverage::NotCovered
        );
        assert_eq!(shepp_classify_harmonic(0.5).unwrap(), Coverage::NotCovered);
        assert_eq!(
            shepp_classify_harmonic(shadow_harmonic_constant(PI / 4.0)).unwrap(),
            Coverage::Covered
        );
        assert!(shepp_classify_harmonic(0.0).is_err());
    }

    #[test]
    fn place_arc_examples() {
        let mut s = ArcCoveringState::full_circle();
        s.place_arc(1.0, 0.5);
        s.place_arc(3.0, 0.25);
        assert!((s.covered_measure() - 0.75).abs() < 1e-15);
        let before = s.clone();
        s.place_arc(1.0, 0.5);
        assert_eq!(s, before);

        let mut w = ArcCoveringState::full_circle();
        w.place_arc(0.5 * PI, PI);
        w.place_arc(0.5 * (PI - 0.1 + TAU), TAU - (PI - 0.1));
        assert!((w.covered_measure() - TAU).abs() < 1e-12);
        assert!(w.is_covered());
    }

    #[test]
    fn seam_gap_is_one_component() {
        let mut s = ArcCoveringState::unit();
        s.place_arc(0.5, 0.5);
        assert_eq!(s.uncovered_components(), 1);
        assert!((s.uncovered_measure() - 0.5).abs() < 1e-15);
        s.place_arc(0.0, 0.2);
        assert_eq!(s.intervals().len(), 3);
        assert_eq!(s.uncovered_components(), 2);
    }

    #[test]
    fn single_full_arc_covers() {
        let mut rng = substream(1, "cov", 0);
        let out = simulate_covering(&LengthSequence::explicit(vec![1.0]).unwrap(), 1, &mut rng);
        assert_eq!(out.uncovered_measure, 0.0);
        assert_eq!(out.uncovered_components, 0);
    }

    #[test]
    fn nested_prefix_is_monotone() {
        let l = LengthSequence::harmonic(0.8).unwrap();
        let mut last = f64::INFINITY;
        for n in [10, 100, 1000, 10_000] {
            let out = simulate_covering(&l, n, &mut substream(3, "cov", 0));
            assert!(out.uncovered_measure <= last + 1e-12);
            last = out.uncovered_measure;
        }
    }

    proptest! {
        #[test]
        fn measures_add_up(arcs in prop::collection::vec((0.0..TAU, 0.0..1.5f64), 0..200)) {
            let s = ArcCoveringState::from_arcs(TAU, arcs.iter().copied()).unwrap();
            prop_assert!((s.covered_measure() + s.uncovered_measure() - TAU).abs() < 1e-9);
        }

        #[test]
        fn incremental_matches_batch_and_is_order_free(
            arcs in prop::collection::vec((0.0..1.0f64, 0.0..0.3f64), 1..60)
        ) {
            let batch = ArcCoveringState::from_arcs(1.0, arcs.iter().copied()).unwrap();
            let mut fwd = ArcCoveringState::unit();
            for &(c, l) in &arcs { fwd.place_arc(c, l); }
            let mut rev = ArcCoveringState::unit();
            for &(c, l) in arcs.iter().rev() { rev.place_arc(c, l); }
            prop_assert!((fwd.covered_measure() - batch.covered_measure()).abs() < 1e-9);
            prop_assert!((rev.covered_measure() - batch.covered_measure()).abs() < 1e-9);
            prop_assert_eq!(fwd.uncovered_components(), batch.uncovered_components());
            prop_assert_eq!(rev.uncovered_components(), batch.uncovered_components());
            let mut again = fwd.clone();
            for &(c, l) in &arcs { again.place_arc(c, l); }
            prop_assert_eq!(again, fwd);
        }
    }
}
