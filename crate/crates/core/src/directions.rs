//! Deterministic quasi-uniform direction grids on `S^{d-1}` and a kd-tree
//! that tracks which directions a path has blocked.
//!
//! A direction `u` is blocked by a point `X` at thickness `t` when
//! `dist(X, [0, r·u]) <= t`. That distance is increasing in the angle
//! between `X` and `u`, so the blocked set is a spherical cap around
//! `X/|X|` (see [`blocking_cap`]).

use std::f64::consts::PI;

use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::geometry::{check_dim, PointD, MAX_DIM};

/// Surface area of `S^{d-1}`.
pub fn sphere_area(d: usize) -> f64 {
    2.0 * PI.powf(d as f64 / 2.0) / gamma(d as f64 / 2.0)
}

/// Volume of the unit ball in `R^k`.
pub fn ball_volume(k: usize) -> f64 {
    PI.powf(k as f64 / 2.0) / gamma(k as f64 / 2.0 + 1.0)
}

/// Number of caps of angular radius `delta` whose total area equals the
/// sphere's.
pub fn grid_size(d: usize, delta: f64) -> f64 {
    (sphere_area(d) / (ball_volume(d - 1) * delta.powi(d as i32 - 1))).ceil()
}

#[derive(Clone, Debug)]
pub struct DirectionGrid {
    dim: usize,
    /// Row-major unit vectors.
    coords: Vec<f64>,
}

impl DirectionGrid {
    /// `n` quasi-uniform directions with `e_1` first.
    ///
    /// d = 2: equally spaced angles. d = 3: Fibonacci spiral. d >= 4: the
    /// additive recurrence with the generalized golden ratio, pushed through
    /// the inverse normal CDF and normalized.
    pub fn quasi_uniform(dim: usize, n: usize) -> Result<Self> {
        check_dim(dim)?;
        let n = n.max(1);
        let mut coords = Vec::with_capacity(n * dim);
        let mut e1 = [0.0; MAX_DIM];
        e1[0] = 1.0;
        coords.extend_from_slice(&e1[..dim]);
        let rest = n - 1;
        match dim {
            2 => {
                for k in 1..n {
                    let a = 2.0 * PI * k as f64 / n as f64;
                    coords.extend_from_slice(&[a.cos(), a.sin()]);
                }
            }
            3 => {
                let golden = PI * (3.0 - 5f64.sqrt());
                for k in 0..rest {
                    let z = 1.0 - (2.0 * k as f64 + 1.0) / rest as f64;
                    let rad = (1.0 - z * z).max(0.0).sqrt();
                    let a = golden * k as f64;
                    coords.extend_from_slice(&[rad * a.cos(), rad * a.sin(), z]);
                }
            }
            _ => {
                // phi^{dim+1} = phi + 1.
                let mut phi = 2.0f64;
                for _ in 0..64 {
                    phi = (1.0 + phi).powf(1.0 / (dim as f64 + 1.0));
                }
                let alpha: Vec<f64> = (1..=dim).map(|j| phi.powi(-(j as i32)).fract()).collect();
                let normal = Normal::standard();
                let mut v = [0.0; MAX_DIM];
                for k in 1..=rest {
                    for j in 0..dim {
                        let u = (0.5 + k as f64 * alpha[j])
                            .fract()
                            .clamp(1e-12, 1.0 - 1e-12);
                        v[j] = normal.inverse_cdf(u);
                    }
                    let norm = v[..dim].iter().map(|x| x * x).sum::<f64>().sqrt();
                    coords.extend(v[..dim].iter().map(|x| x / norm));
                }
            }
        }
        Ok(Self { dim, coords })
    }

    /// Grid with angular resolution `delta`, refused beyond `budget` points.
    pub fn with_resolution(dim: usize, delta: f64, budget: usize) -> Result<Self> {
        check_dim(dim)?;
        crate::geometry::positive("delta", delta)?;
        let m = grid_size(dim, delta);
        if m > budget as f64 {
            return Err(Error::GridTooLarge {
                requested: m.min(usize::MAX as f64) as usize,
                budget,
            });
        }
        Self::quasi_uniform(dim, m as usize)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn get(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn point(&self, i: usize) -> PointD {
        PointD::new(self.get(i)).expect("grid directions are valid points")
    }
}

/// `cos β` of the cap of directions `u` with `dist(X, [0, r·u]) <= t`,
/// where `s = |X|`. Returns `-1` when every direction qualifies and a value
/// above 1 when none does.
pub fn blocking_cap(s: f64, r: f64, t: f64) -> f64 {
    if s <= t {
        -1.0
    } else if s * s - t * t <= r * r {
        (1.0 - (t / s).powi(2)).sqrt()
    } else {
        (s * s + r * r - t * t) / (2.0 * s * r)
    }
}

/// `dist(X, [0, r·u])` from `s = |X|` and `c = cos(angle(X, u))`.
pub fn segment_distance_by_angle(s: f64, r: f64, c: f64) -> f64 {
    let proj = s * c;
    if proj <= 0.0 {
        s
    } else if proj <= r {
        s * (1.0 - c * c).max(0.0).sqrt()
    } else {
        (s * s + r * r - 2.0 * s * r * c).max(0.0).sqrt()
    }
}

const LEAF: usize = 8;

#[derive(Clone, Debug)]
struct Node {
    start: u32,
    end: u32,
    /// Children indices; `0` marks a leaf (the root is never a child).
    left: u32,
    right: u32,
    /// Bounding cone: every direction is within angle γ of `axis`.
    axis: [f64; MAX_DIM],
    cos_gamma: f64,
    sin_gamma: f64,
}

/// Static kd-tree over a direction grid.
#[derive(Clone, Debug)]
pub struct DirectionTree {
    grid: DirectionGrid,
    /// Grid indices in tree order.
    perm: Vec<u32>,
    nodes: Vec<Node>,
}

impl DirectionTree {
    pub fn build(grid: DirectionGrid) -> Self {
        let n = grid.len();
        let mut perm: Vec<u32> = (0..n as u32).collect();
        let mut nodes = Vec::with_capacity(2 * n / LEAF + 2);
        Self::build_node(&grid, &mut perm, 0, n, &mut nodes);
        Self { grid, perm, nodes }
    }

    fn build_node(
        grid: &DirectionGrid,
        perm: &mut [u32],
        start: usize,
        end: usize,
        nodes: &mut Vec<Node>,
    ) -> usize {
        let d = grid.dim;
        let mut lo = [f64::INFINITY; MAX_DIM];
        let mut hi = [f64::NEG_INFINITY; MAX_DIM];
        for &i in &perm[start..end] {
            for (j, &x) in grid.get(i as usize).iter().enumerate() {
                lo[j] = lo[j].min(x);
                hi[j] = hi[j].max(x);
            }
        }
        let mut axis = [0.0; MAX_DIM];
        for &i in &perm[start..end] {
            for (a, &x) in axis.iter_mut().zip(grid.get(i as usize)) {
                *a += x;
            }
        }
        let norm = axis[..d].iter().map(|a| a * a).sum::<f64>().sqrt();
        let (cos_gamma, sin_gamma) = if norm > 1e-9 * (end - start) as f64 {
            axis.iter_mut().for_each(|a| *a /= norm);
            let c = perm[start..end]
                .iter()
                .map(|&i| {
                    grid.get(i as usize)
                        .iter()
                        .zip(&axis)
                        .map(|(x, a)| x * a)
                        .sum::<f64>()
                })
                .fold(1.0f64, f64::min)
                .clamp(-1.0, 1.0);
            // Slack absorbs rounding in the dot products.
            let g = (c.acos() + 1e-9).min(std::f64::consts::PI);
            (g.cos(), g.sin())
        } else {
            (-1.0, 0.0)
        };
        let id = nodes.len();
        nodes.push(Node {
            start: start as u32,
            end: end as u32,
            left: 0,
            right: 0,
            axis,
            cos_gamma,
            sin_gamma,
        });
        if end - start > LEAF {
            let axis = (0..d)
                .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
                .unwrap_or(0);
            let mid = (start + end) / 2;
            perm[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
                grid.get(a as usize)[axis].total_cmp(&grid.get(b as usize)[axis])
            });
            let left = Self::build_node(grid, perm, start, mid, nodes);
            let right = Self::build_node(grid, perm, mid, end, nodes);
            nodes[id].left = left as u32;
            nodes[id].right = right as u32;
        }
        id
    }

    pub fn grid(&self) -> &DirectionGrid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Upper bound of `u·x` over the node's cone: `cos(max(0, a - γ))`
    /// with `a` the angle between `x` and the cone axis.
    #[inline]
    fn max_dot(&self, node: &Node, x: &[f64]) -> f64 {
        let c: f64 = x.iter().zip(&node.axis).map(|(a, b)| a * b).sum();
        if c >= node.cos_gamma {
            return 1.0;
        }
        let s = (1.0 - c * c).max(0.0).sqrt();
        c * node.cos_gamma + s * node.sin_gamma
    }

    fn dot(&self, i: u32, x: &[f64]) -> f64 {
        self.grid
            .get(i as usize)
            .iter()
            .zip(x)
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn fresh_state(&self) -> BlockState {
        let counts: Vec<u32> = self.nodes.iter().map(|n| n.end - n.start).collect();
        BlockState {
            status: vec![0; self.len()],
            open_hit: counts.clone(),
            open_possible: counts,
        }
    }

    /// Marks directions with `u·x >= cos_possible` as possibly blocked and
    /// those with `u·x >= cos_hit` as blocked. `x` is a unit vector and
    /// `cos_hit >= cos_possible`.
    pub fn mark(&self, state: &mut BlockState, x: &[f64], cos_hit: f64, cos_possible: f64) {
        if cos_possible > 1.0 {
            return;
        }
        self.mark_node(0, state, x, cos_hit, cos_possible);
    }

    fn mark_node(&self, id: usize, st: &mut BlockState, x: &[f64], ch: f64, cp: f64) -> (u32, u32) {
        let node = &self.nodes[id];
        if st.open_hit[id] == 0 {
            return (0, 0);
        }
        let bound = self.max_dot(node, x);
        if bound < cp || (st.open_possible[id] == 0 && bound < ch) {
            return (0, 0);
        }
        let (mut new_hit, mut new_possible) = (0u32, 0u32);
        if node.left == 0 {
            for k in node.start..node.end {
                let i = self.perm[k as usize];
                let s = &mut st.status[i as usize];
                if *s & HIT != 0 {
                    continue;
                }
                let c = self.dot(i, x);
                if c >= cp && *s & POSSIBLE == 0 {
                    *s |= POSSIBLE;
                    new_possible += 1;
                }
                if c >= ch {
                    *s |= HIT;
                    new_hit += 1;
                }
            }
        } else {
            let (l, r) = (node.left as usize, node.right as usize);
            let a = self.mark_node(l, st, x, ch, cp);
            let b = self.mark_node(r, st, x, ch, cp);
            new_hit = a.0 + b.0;
            new_possible = a.1 + b.1;
        }
        st.open_hit[id] -= new_hit;
        st.open_possible[id] -= new_possible;
        (new_hit, new_possible)
    }

    /// Largest `u·x` over directions not yet blocked, or `None` if every
    /// direction is blocked.
    pub fn best_open(&self, state: &BlockState, x: &[f64]) -> Option<f64> {
        let mut best = f64::NEG_INFINITY;
        self.best_node(0, state, x, &mut best);
        (best > f64::NEG_INFINITY).then_some(best)
    }

    fn best_node(&self, id: usize, st: &BlockState, x: &[f64], best: &mut f64) {
        let node = &self.nodes[id];
        if st.open_hit[id] == 0 || self.max_dot(node, x) <= *best {
            return;
        }
        if node.left == 0 {
            for k in node.start..node.end {
                let i = self.perm[k as usize];
                if st.status[i as usize] & HIT == 0 {
                    *best = best.max(self.dot(i, x));
                }
            }
            return;
        }
        let (l, r) = (node.left as usize, node.right as usize);
        let (bl, br) = (
            self.max_dot(&self.nodes[l], x),
            self.max_dot(&self.nodes[r], x),
        );
        let (first, second) = if bl >= br { (l, r) } else { (r, l) };
        self.best_node(first, st, x, best);
        self.best_node(second, st, x, best);
    }
}

const HIT: u8 = 1;
const POSSIBLE: u8 = 2;

/// Per-replica blocking status of every grid direction.
#[derive(Clone, Debug)]
pub struct BlockState {
    status: Vec<u8>,
    open_hit: Vec<u32>,
    open_possible: Vec<u32>,
}

impl BlockState {
    /// Directions not definitely blocked.
    pub fn open_count(&self) -> u32 {
        self.open_hit[0]
    }

    /// Directions not even possibly blocked.
    pub fn clear_count(&self) -> u32 {
        self.open_possible[0]
    }

    pub fn is_hit(&self, i: usize) -> bool {
        self.status[i] & HIT != 0
    }

    pub fn is_possible(&self, i: usize) -> bool {
        self.status[i] & POSSIBLE != 0
    }

    pub fn block_all(&mut self) {
        self.status.iter_mut().for_each(|s| *s = HIT | POSSIBLE);
        self.open_hit.iter_mut().for_each(|c| *c = 0);
        self.open_possible.iter_mut().for_each(|c| *c = 0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{dist_point_segment, Segment};
    use crate::rng::substream;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn sphere_constants() {
        assert!((sphere_area(3) - 4.0 * PI).abs() < 1e-12);
        assert!((sphere_area(4) - 2.0 * PI * PI).abs() < 1e-12);
        assert!((ball_volume(2) - PI).abs() < 1e-12);
        assert!((ball_volume(3) - 4.0 * PI / 3.0).abs() < 1e-12);
    }

    #[test]
    fn grids_are_unit_and_start_at_e1() {
        for d in 2..=5 {
            let g = DirectionGrid::quasi_uniform(d, 500).unwrap();
            assert_eq!(g.len(), 500);
            assert_eq!(g.get(0)[0], 1.0);
            for i in 0..g.len() {
                let n: f64 = g.get(i).iter().map(|x| x * x).sum();
                assert!((n - 1.0).abs() < 1e-12);
            }
        }
    }

    /// Every random direction has a grid point within a few times the
    /// nominal resolution.
    #[test]
    fn grids_cover_the_sphere() {
        let mut rng = substream(1, "grid", 0);
        for d in 3..=4 {
            let delta = 0.15;
            let g = DirectionGrid::with_resolution(d, delta, 1_000_000).unwrap();
            let tree = DirectionTree::build(g);
            let state = tree.fresh_state();
            for _ in 0..500 {
                let u = crate::brownian::uniform_direction(d, &mut rng);
                let best = tree.best_open(&state, u.coords()).unwrap();
                assert!(best.clamp(-1.0, 1.0).acos() < 3.0 * delta, "d={d}");
            }
        }
    }

    #[test]
    fn budget_is_enforced() {
        let err = DirectionGrid::with_resolution(4, 1.0 / 144.0, 2_000_000).unwrap_err();
        assert!(matches!(err, Error::GridTooLarge { .. }));
    }

    #[test]
    fn cap_matches_direct_distance() {
        let mut rng = substream(2, "cap", 0);
        for _ in 0..20_000 {
            let s = rng.random::<f64>() * 15.0;
            let r = 1.0 + rng.random::<f64>() * 10.0;
            let t = rng.random::<f64>() * 2.0;
            let c = rng.random::<f64>() * 2.0 - 1.0;
            let x = PointD::new(&[s, 0.0, 0.0]).unwrap();
            let u = PointD::new(&[c, (1.0 - c * c).sqrt(), 0.0]).unwrap();
            let seg = Segment::new(PointD::origin(3).unwrap(), u * r).unwrap();
            let direct = dist_point_segment(&x, &seg).unwrap();
            assert!((segment_distance_by_angle(s, r, c) - direct).abs() < 1e-9);
            let blocked = direct <= t;
            let cap = blocking_cap(s, r, t);
            if (direct - t).abs() > 1e-9 {
                assert_eq!(blocked, c >= cap, "s={s} r={r} t={t} c={c}");
            }
        }
    }

    fn brute(tree: &DirectionTree, x: &[f64], cos: f64, excluded: &BlockState) -> Option<f64> {
        (0..tree.len())
            .filter(|&i| !excluded.is_hit(i))
            .map(|i| tree.dot(i as u32, x))
            .filter(|&c| c >= cos)
            .max_by(f64::total_cmp)
    }

    proptest! {
        #[test]
        fn tree_marking_matches_brute_force(
            seeds in prop::collection::vec(0u64..1_000_000, 1..8),
            ch in 0.5f64..0.99, gap in 0.0f64..0.2
        ) {
            let tree = DirectionTree::build(DirectionGrid::quasi_uniform(4, 3000).unwrap());
            let mut st = tree.fresh_state();
            let cp = ch - gap;
            let mut expect_hit = vec![false; tree.len()];
            let mut expect_pos = vec![false; tree.len()];
            for s in seeds {
                let mut rng = substream(s, "prop", 0);
                let x = crate::brownian::uniform_direction(4, &mut rng);
                for i in 0..tree.len() {
                    let c = tree.dot(i as u32, x.coords());
                    expect_hit[i] |= c >= ch;
                    expect_pos[i] |= c >= cp;
                }
                let before = brute(&tree, x.coords(), -2.0, &st);
                prop_assert_eq!(tree.best_open(&st, x.coords()), before);
                tree.mark(&mut st, x.coords(), ch, cp);
            }
            for i in 0..tree.len() {
                prop_assert_eq!(st.is_hit(i), expect_hit[i]);
                prop_assert_eq!(st.is_possible(i), expect_pos[i]);
            }
            prop_assert_eq!(st.open_count() as usize, expect_hit.iter().filter(|h| !**h).count());
            prop_assert_eq!(st.clear_count() as usize, expect_pos.iter().filter(|h| !**h).count());
        }
    }
}
