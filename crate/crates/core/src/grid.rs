//! Discretization `t_0 < … < t_r = λ` of the integral and the coefficient
//! families of the lower and upper programs.
//!
//! With `f(s) = tr[(sσ − ρ)₊]` convex and nonnegative, the lower program
//! replaces `∫ ds/s f(s)` on each interval by `max_{0⪯P⪯1} tr[P ∫(σ − ρ/s) ds]`,
//! which gives `α_k = −ln(t_k/t_{k−1})`, `β_k = t_k − t_{k−1}`. The upper
//! program overestimates `f` by its chord on every interval; integrating the
//! chord against `ds/s` yields the node weights `c_k`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::IntervalBounds;

/// `t_0 = λ·FLOOR_RATIO` when `μ` lies below it.
pub const FLOOR_RATIO: f64 = 1e-6;

/// Constant of the starting grid size `r = ⌈C·√(λ/ε)⌉`.
pub const R_CONSTANT: f64 = 2.0;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridScheme {
    #[default]
    Geometric,
    Uniform,
}

impl FromStr for GridScheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "geometric" => Ok(GridScheme::Geometric),
            "uniform" => Ok(GridScheme::Uniform),
            other => Err(Error::InvalidParameter(format!("unknown grid scheme '{other}'"))),
        }
    }
}

impl fmt::Display for GridScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GridScheme::Geometric => "geometric",
            GridScheme::Uniform => "uniform",
        })
    }
}

/// Optional adjustments of the node placement.
#[derive(Clone, Copy, Debug, Default)]
pub struct GridOptions {
    /// Lower cut-off used when `μ` is smaller; defaults to `λ·FLOOR_RATIO`.
    pub floor: Option<f64>,
    /// A value in `(t_0, λ)` that must be a node.
    pub anchor: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Grid {
    nodes: Vec<f64>,
    scheme: GridScheme,
    /// The interval's `μ`; `nodes[0] > mu` means the floor was applied.
    mu: f64,
}

impl Grid {
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn r(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn scheme(&self) -> GridScheme {
        self.scheme
    }

    pub fn t0(&self) -> f64 {
        self.nodes[0]
    }

    pub fn lambda(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn is_floored(&self) -> bool {
        self.nodes[0] > self.mu
    }

    pub fn is_degenerate(&self) -> bool {
        self.lambda() - self.t0() <= 1e-12 * self.lambda()
    }

    /// Grid from explicit nodes; used for hand-built examples.
    pub fn from_nodes(nodes: Vec<f64>, mu: f64) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::InvalidParameter("a grid needs at least two nodes".into()));
        }
        if !(nodes[0] >= 0.0) || nodes.windows(2).any(|w| !(w[1] >= w[0])) || mu > nodes[0] {
            return Err(Error::InvalidParameter("grid nodes must be nondecreasing, nonnegative and start at or above mu".into()));
        }
        Ok(Self { nodes, scheme: GridScheme::Geometric, mu })
    }
}

fn spaced(a: f64, b: f64, r: usize, scheme: GridScheme) -> Vec<f64> {
    let mut v: Vec<f64> = (0..=r)
        .map(|k| {
            let f = k as f64 / r as f64;
            match scheme {
                GridScheme::Geometric => a * (b / a).powf(f),
                GridScheme::Uniform => a + (b - a) * f,
            }
        })
        .collect();
    v[0] = a;
    v[r] = b;
    v
}

pub fn build_grid(interval: &IntervalBounds, r: usize, scheme: GridScheme) -> Result<Grid> {
    build_grid_with(interval, r, scheme, GridOptions::default())
}

pub fn build_grid_with(interval: &IntervalBounds, r: usize, scheme: GridScheme, opts: GridOptions) -> Result<Grid> {
    if !interval.is_finite() {
        return Err(Error::InfiniteDivergence);
    }
    if r == 0 {
        return Err(Error::InvalidParameter("the grid needs r >= 1".into()));
    }
    let lambda = interval.lambda;
    let floor = opts.floor.unwrap_or(lambda * FLOOR_RATIO);
    if !(floor > 0.0) {
        return Err(Error::InvalidParameter(format!("grid floor must be positive, got {floor}")));
    }
    let t0 = interval.mu.max(floor.min(lambda));
    if lambda - t0 <= 1e-12 * lambda {
        return Ok(Grid { nodes: vec![t0; r + 1], scheme, mu: interval.mu });
    }
    let nodes = match opts.anchor {
        Some(p) if p > t0 * (1.0 + 1e-12) && p < lambda * (1.0 - 1e-12) && r >= 2 => {
            let (left, right) = match scheme {
                GridScheme::Geometric => ((p / t0).ln(), (lambda / p).ln()),
                GridScheme::Uniform => (p - t0, lambda - p),
            };
            let r1 = ((r as f64 * left / (left + right)).round() as usize).clamp(1, r - 1);
            let mut v = spaced(t0, p, r1, scheme);
            v.extend_from_slice(&spaced(p, lambda, r - r1, scheme)[1..]);
            v
        }
        _ => spaced(t0, lambda, r, scheme),
    };
    Ok(Grid { nodes, scheme, mu: interval.mu })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LowerCoefficients {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

pub fn lower_coefficients(g: &Grid) -> Result<LowerCoefficients> {
    if !(g.t0() > 0.0) {
        return Err(Error::InvalidParameter("lower coefficients need t_0 > 0".into()));
    }
    let alpha = g.nodes.windows(2).map(|w| -(w[1] / w[0]).ln()).collect();
    let beta = g.nodes.windows(2).map(|w| w[1] - w[0]).collect();
    Ok(LowerCoefficients { alpha, beta })
}

/// Chord weight at the left end of `[a, b]` against `ds/s`.
pub fn w_left(a: f64, b: f64) -> f64 {
    let h = b - a;
    if h <= 1e-12 * b {
        return 0.0;
    }
    (b * (b / a).ln() - h) / h
}

/// Chord weight at the right end of `[a, b]` against `ds/s`.
pub fn w_right(a: f64, b: f64) -> f64 {
    let h = b - a;
    if h <= 1e-12 * b {
        return 0.0;
    }
    (h - a * (b / a).ln()) / h
}

/// Node weight for the cut-off node `t_0` when the floor was applied.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FloorNode {
    pub t: f64,
    pub weight: f64,
}

/// Index 0 holds the trace term (`γ_0 = 1`, `δ_0 = −1`); index `k ≥ 1`
/// belongs to node `t_k` with `γ_k = −c_k`, `δ_k = c_k t_k`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UpperCoefficients {
    pub gamma: Vec<f64>,
    pub delta: Vec<f64>,
    /// Present when `t_0 > μ`. On `[0, t_0]` the chord of `f` from the
    /// origin integrates to exactly `f(t_0)`, which bounds the discarded
    /// tail, so `t_0` carries weight `1 + w_L(t_0, t_1)`.
    pub floor: Option<FloorNode>,
}

impl UpperCoefficients {
    pub fn weights(&self) -> Vec<f64> {
        self.gamma[1..].iter().map(|g| -g).collect()
    }
}

pub fn upper_coefficients(g: &Grid) -> Result<UpperCoefficients> {
    if !(g.t0() > 0.0) {
        return Err(Error::InvalidParameter("upper coefficients need t_0 > 0".into()));
    }
    let t = &g.nodes;
    let r = g.r();
    let mut gamma = vec![1.0];
    let mut delta = vec![-1.0];
    for k in 1..=r {
        let mut c = w_right(t[k - 1], t[k]);
        if k < r {
            c += w_left(t[k], t[k + 1]);
        }
        gamma.push(-c);
        delta.push(c * t[k]);
    }
    let floor = g.is_floored().then(|| FloorNode { t: t[0], weight: 1.0 + w_left(t[0], t[1]) });
    Ok(UpperCoefficients { gamma, delta, floor })
}

/// Starting grid size `⌈C·√(λ/ε)⌉`, or `C` for a trivial interval.
pub fn r_for_epsilon(interval: &IntervalBounds, eps: f64) -> Result<usize> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!("epsilon must be positive, got {eps}")));
    }
    if !interval.is_finite() {
        return Err(Error::InfiniteDivergence);
    }
    if interval.is_degenerate() || interval.lambda <= 1.0 {
        return Ok(R_CONSTANT as usize);
    }
    Ok((R_CONSTANT * (interval.lambda / eps).sqrt()).ceil() as usize)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::E;

    fn iv(lambda: f64, mu: f64) -> IntervalBounds {
        IntervalBounds::new(lambda, mu).unwrap()
    }

    /// `∫_{t0}^{λ} ds/s · max(qs − p, 0)` in closed form.
    fn exact(p: f64, q: f64, t0: f64, lambda: f64) -> f64 {
        let s = (p / q).max(t0);
        if s >= lambda {
            return 0.0;
        }
        q * (lambda - s) - p * (lambda / s).ln()
    }

    fn upper_sum(c: &UpperCoefficients, g: &Grid, p: f64, q: f64) -> f64 {
        let w = c.weights();
        let mut acc: f64 = w.iter().zip(&g.nodes()[1..]).map(|(wk, t)| wk * (q * t - p).max(0.0)).sum();
        if let Some(f) = c.floor {
            acc += f.weight * (q * f.t - p).max(0.0);
        }
        acc
    }

    fn lower_sum(c: &LowerCoefficients, p: f64, q: f64) -> f64 {
        c.alpha.iter().zip(&c.beta).map(|(a, b)| (b * q + a * p).max(0.0)).sum()
    }

    #[test]
    fn degenerate_grid() {
        let g = build_grid(&iv(1.0, 1.0), 1, GridScheme::Geometric).unwrap();
        assert!(g.is_degenerate());
        let l = lower_coefficients(&g).unwrap();
        assert_eq!(l.alpha, vec![0.0]);
        assert_eq!(l.beta, vec![0.0]);
        let u = upper_coefficients(&g).unwrap();
        assert_eq!(u.weights(), vec![0.0]);
    }

    #[test]
    fn geometric_nodes() {
        let g = build_grid(&iv(E, 1.0), 2, GridScheme::Geometric).unwrap();
        let want = [1.0, E.sqrt(), E];
        for (a, b) in g.nodes().iter().zip(want) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!(!g.is_floored());
        let u = build_grid(&iv(3.0, 1.0), 4, GridScheme::Uniform).unwrap();
        assert_eq!(u.nodes(), &[1.0, 1.5, 2.0, 2.5, 3.0]);
    }

    #[test]
    fn floor_when_mu_vanishes() {
        let g = build_grid(&iv(4.0, 0.0), 8, GridScheme::Geometric).unwrap();
        assert!((g.t0() - 4e-6).abs() < 1e-20);
        assert!(g.is_floored());
        assert_eq!(g.lambda(), 4.0);
        // tail below t_0 is at most t_0·tr σ for the scalar pair (p, q) = (0.3, 1)
        let tail = exact(0.3, 1.0, 1e-300, g.t0()) ;
        assert!(tail <= g.t0() * 1.0);
        assert!(build_grid(&IntervalBounds::infinite(), 4, GridScheme::Geometric).is_err());
    }

    #[test]
    fn anchor_is_a_node() {
        let g = build_grid_with(
            &iv(3.0, 0.0),
            10,
            GridScheme::Geometric,
            GridOptions { floor: Some(1e-3), anchor: Some(1.0) },
        )
        .unwrap();
        assert_eq!(g.r(), 10);
        assert!(g.nodes().iter().any(|&t| t == 1.0));
        assert!(g.nodes().windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn lower_coefficient_examples() {
        let l = lower_coefficients(&Grid::from_nodes(vec![1.0, E], 1.0).unwrap()).unwrap();
        assert!((l.alpha[0] + 1.0).abs() < 1e-15);
        assert!((l.beta[0] - (E - 1.0)).abs() < 1e-15);
        let l = lower_coefficients(&Grid::from_nodes(vec![1.0, 2.0, 4.0], 1.0).unwrap()).unwrap();
        for a in &l.alpha {
            assert!((a + 2f64.ln()).abs() < 1e-15);
        }
        assert_eq!(l.beta, vec![1.0, 2.0]);
        assert!(lower_coefficients(&Grid::from_nodes(vec![0.0, 1.0], 0.0).unwrap()).is_err());
    }

    #[test]
    fn upper_coefficient_example() {
        let g = Grid::from_nodes(vec![1.0, E], 1.0).unwrap();
        let u = upper_coefficients(&g).unwrap();
        let c1 = (E - 2.0) / (E - 1.0);
        assert!((u.gamma[1] + c1).abs() < 1e-15);
        assert!((u.delta[1] - c1 * E).abs() < 1e-14);
        assert_eq!((u.gamma[0], u.delta[0]), (1.0, -1.0));
        assert!(u.floor.is_none());
    }

    #[test]
    fn affine_integrand_is_exact() {
        // p = 0: f(s) = qs is affine, so the chord is exact
        let g = build_grid(&iv(5.0, 0.5), 7, GridScheme::Geometric).unwrap();
        let u = upper_coefficients(&g).unwrap();
        let mut acc = 0.0;
        let w = u.weights();
        let t = g.nodes();
        acc += w_left(t[0], t[1]) * 2.0 * t[0];
        for k in 0..w.len() {
            acc += w[k] * 2.0 * t[k + 1];
        }
        assert!((acc - exact(0.0, 2.0, g.t0(), g.lambda())).abs() < 1e-12);
    }

    #[test]
    fn r_for_epsilon_scaling() {
        assert_eq!(r_for_epsilon(&iv(1.0, 1.0), 1e-3).unwrap(), 2);
        assert_eq!(r_for_epsilon(&iv(4.0, 0.0), 1e-2).unwrap(), 40);
        assert_eq!(r_for_epsilon(&iv(16.0, 0.0), 1e-2).unwrap(), 80);
        assert_eq!(r_for_epsilon(&iv(4.0, 0.0), 1e-2 / 4.0).unwrap(), 80);
        assert!(r_for_epsilon(&iv(4.0, 0.0), 0.0).is_err());
    }

    #[test]
    fn scalar_sandwich_gaps_shrink() {
        let (p, q) = (0.7, 1.3);
        let interval = iv(6.0, 0.0);
        let mut prev = (f64::INFINITY, f64::INFINITY);
        for r in [4, 8, 16, 32] {
            let g = build_grid(&interval, r, GridScheme::Geometric).unwrap();
            let truth = exact(p, q, g.t0(), g.lambda());
            let full = exact(p, q, 1e-300, g.lambda());
            let lo = lower_sum(&lower_coefficients(&g).unwrap(), p, q);
            let up = upper_sum(&upper_coefficients(&g).unwrap(), &g, p, q);
            assert!(lo <= truth + 1e-12 && truth <= full + 1e-12 && full <= up + 1e-12, "r={r}: {lo} {truth} {up}");
            assert!(truth - lo <= prev.0 + 1e-12 && up - full <= prev.1 + 1e-12);
            prev = (truth - lo, up - full);
        }
    }

    proptest! {
        #[test]
        fn chord_weights_integrate_constant(a in 1e-4f64..10.0, h in 1e-3f64..10.0) {
            let b = a + h;
            prop_assert!((w_left(a, b) + w_right(a, b) - (b / a).ln()).abs() < 1e-12 * (1.0 + (b / a).ln()));
            prop_assert!(w_left(a, b) >= 0.0 && w_right(a, b) >= 0.0);
        }

        #[test]
        fn scalar_pairs_are_sandwiched(p in 0.01f64..2.0, q in 0.05f64..2.0, r in 1usize..40) {
            prop_assume!(p <= 8.0 * q);
            let interval = iv(8.0, 0.0);
            let g = build_grid(&interval, r, GridScheme::Geometric).unwrap();
            let lo = lower_sum(&lower_coefficients(&g).unwrap(), p, q);
            let up = upper_sum(&upper_coefficients(&g).unwrap(), &g, p, q);
            let full = exact(p, q, 1e-300, 8.0);
            prop_assert!(lo <= full + 1e-10);
            prop_assert!(full <= up + 1e-10);
        }
    }
}
