//! Rank-based reward functions.
//!
//! A reward `H: [0,1] → ℝ` pays `H(r)` to a player finishing at rank `r`
//! (the fraction of the population done no later than them) and `floor`
//! (the non-completion payment `R∞`) to anyone who misses the deadline.
//! Two shapes are supported: right-open step functions and piecewise-linear
//! interpolants of sampled values.

use crate::error::{domain, Error, Result};
use serde::{Deserialize, Serialize};

const MONOTONE_TOL: f64 = 1e-12;

/// `H(r) = levels[k]` on `[thresholds[k-1], thresholds[k])`, last level up to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StepRaw")]
pub struct StepReward {
    thresholds: Vec<f64>,
    levels: Vec<f64>,
    floor: f64,
}

#[derive(Deserialize)]
struct StepRaw {
    thresholds: Vec<f64>,
    levels: Vec<f64>,
    floor: f64,
}

impl TryFrom<StepRaw> for StepReward {
    type Error = Error;
    fn try_from(r: StepRaw) -> Result<Self> {
        StepReward::new(r.thresholds, r.levels, r.floor)
    }
}

impl StepReward {
    pub fn new(thresholds: Vec<f64>, levels: Vec<f64>, floor: f64) -> Result<Self> {
        if levels.len() != thresholds.len() + 1 {
            return domain(format!(
                "a step reward with {} thresholds needs {} levels, got {}",
                thresholds.len(),
                thresholds.len() + 1,
                levels.len()
            ));
        }
        if !floor.is_finite() || levels.iter().chain(&thresholds).any(|v| !v.is_finite()) {
            return domain("step reward contains a non-finite value");
        }
        let mut prev = 0.0;
        for &r in &thresholds {
            if r <= prev || r >= 1.0 {
                return domain(format!("thresholds must increase strictly inside (0, 1), got {r}"));
            }
            prev = r;
        }
        check_decreasing(&levels, floor)?;
        Ok(Self { thresholds, levels, floor })
    }

    /// A reward paying `level` at every rank.
    pub fn constant(level: f64, floor: f64) -> Result<Self> {
        Self::new(Vec::new(), vec![level], floor)
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn eval(&self, r: f64) -> f64 {
        self.levels[self.thresholds.partition_point(|&t| t <= r)]
    }
}

/// Piecewise-linear interpolant of `values` on `grid` (from 0 to 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SmoothRaw")]
pub struct SmoothReward {
    grid: Vec<f64>,
    values: Vec<f64>,
    floor: f64,
}

#[derive(Deserialize)]
struct SmoothRaw {
    grid: Vec<f64>,
    values: Vec<f64>,
    floor: f64,
}

impl TryFrom<SmoothRaw> for SmoothReward {
    type Error = Error;
    fn try_from(r: SmoothRaw) -> Result<Self> {
        SmoothReward::new(r.grid, r.values, r.floor)
    }
}

impl SmoothReward {
    pub fn new(grid: Vec<f64>, values: Vec<f64>, floor: f64) -> Result<Self> {
        if grid.len() < 2 || grid.len() != values.len() {
            return domain("a sampled reward needs at least two grid points and one value per point");
        }
        if grid[0] != 0.0 || grid[grid.len() - 1] != 1.0 {
            return domain("the rank grid must start at 0 and end at 1");
        }
        if grid.windows(2).any(|w| w[1] <= w[0]) {
            return domain("the rank grid must be strictly increasing");
        }
        if !floor.is_finite() || values.iter().any(|v| !v.is_finite()) {
            return domain("sampled reward contains a non-finite value");
        }
        check_decreasing(&values, floor)?;
        Ok(Self { grid, values, floor })
    }

    /// Samples `f` on a uniform grid with `cells` intervals.
    pub fn from_fn(f: impl Fn(f64) -> f64, cells: usize, floor: f64) -> Result<Self> {
        let cells = cells.max(1);
        let grid: Vec<f64> = (0..=cells).map(|i| i as f64 / cells as f64).collect();
        let values = grid.iter().map(|&r| f(r)).collect();
        Self::new(grid, values, floor)
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn eval(&self, r: f64) -> f64 {
        let g = &self.grid;
        if r <= 0.0 {
            return self.values[0];
        }
        if r >= 1.0 {
            return self.values[g.len() - 1];
        }
        let j = g.partition_point(|&x| x <= r) - 1;
        let w = (r - g[j]) / (g[j + 1] - g[j]);
        self.values[j] + w * (self.values[j + 1] - self.values[j])
    }
}

fn check_decreasing(values: &[f64], floor: f64) -> Result<()> {
    for w in values.windows(2) {
        if w[1] > w[0] + MONOTONE_TOL * (1.0 + w[0].abs()) {
            return domain(format!("reward must be non-increasing in rank ({} then {})", w[0], w[1]));
        }
    }
    let last = values[values.len() - 1];
    if last < floor - MONOTONE_TOL * (1.0 + floor.abs()) {
        return domain(format!("reward {last} falls below the non-completion payment {floor}"));
    }
    Ok(())
}

/// A decreasing rank reward together with its non-completion payment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RankReward {
    Step(StepReward),
    Smooth(SmoothReward),
}

impl From<StepReward> for RankReward {
    fn from(s: StepReward) -> Self {
        RankReward::Step(s)
    }
}

impl From<SmoothReward> for RankReward {
    fn from(s: SmoothReward) -> Self {
        RankReward::Smooth(s)
    }
}

impl RankReward {
    pub fn eval(&self, r: f64) -> f64 {
        match self {
            RankReward::Step(s) => s.eval(r),
            RankReward::Smooth(s) => s.eval(r),
        }
    }

    /// Non-completion payment `R∞`.
    pub fn floor(&self) -> f64 {
        match self {
            RankReward::Step(s) => s.floor,
            RankReward::Smooth(s) => s.floor,
        }
    }

    pub fn is_step(&self) -> bool {
        matches!(self, RankReward::Step(_))
    }

    /// `H(0)`, the largest payment.
    pub fn max_level(&self) -> f64 {
        match self {
            RankReward::Step(s) => s.levels[0],
            RankReward::Smooth(s) => s.values[0],
        }
    }

    /// `H(1−)`, the smallest payment to a finisher.
    pub fn min_level(&self) -> f64 {
        match self {
            RankReward::Step(s) => s.levels[s.levels.len() - 1],
            RankReward::Smooth(s) => s.values[s.values.len() - 1],
        }
    }

    /// Breakpoints and the values just right of each, covering `[0, 1]`.
    /// Step rewards have constant cells; smooth ones are linear between nodes.
    fn cells(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            RankReward::Step(s) => {
                let mut nodes = Vec::with_capacity(s.thresholds.len() + 2);
                nodes.push(0.0);
                nodes.extend_from_slice(&s.thresholds);
                nodes.push(1.0);
                (nodes, s.levels.clone())
            }
            RankReward::Smooth(s) => (s.grid.clone(), s.values.clone()),
        }
    }

    /// `∫_a^b H(r) dr` for `0 <= a <= b <= 1`, exact for both shapes.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        let (a, b) = (a.clamp(0.0, 1.0), b.clamp(0.0, 1.0));
        if b <= a {
            return 0.0;
        }
        let (nodes, vals) = self.cells();
        let step = self.is_step();
        let mut total = 0.0;
        for j in 0..nodes.len() - 1 {
            let lo = nodes[j].max(a);
            let hi = nodes[j + 1].min(b);
            if hi <= lo {
                continue;
            }
            total += if step { vals[j] * (hi - lo) } else { 0.5 * (self.eval(lo) + self.eval(hi)) * (hi - lo) };
        }
        total
    }

    /// Total budget `∫_0^1 H(r) dr`.
    pub fn mean(&self) -> f64 {
        self.integral(0.0, 1.0)
    }

    /// Cell averages of `H` on `bins` uniform bins.
    pub fn discretize(&self, bins: usize) -> Result<StepReward> {
        if bins == 0 {
            return domain("discretization needs at least one bin");
        }
        let d = bins as f64;
        let thresholds: Vec<f64> = (1..bins).map(|k| k as f64 / d).collect();
        let mut levels: Vec<f64> = (0..bins).map(|k| d * self.integral(k as f64 / d, (k + 1) as f64 / d)).collect();
        // rounding in the averages must not break monotonicity
        for k in 1..levels.len() {
            if levels[k] > levels[k - 1] {
                levels[k] = levels[k - 1];
            }
        }
        let floor = self.floor();
        let last = levels.len() - 1;
        if levels[last] < floor {
            levels[last] = floor;
        }
        StepReward::new(thresholds, levels, floor)
    }

    /// `δ·H` with the same floor.
    pub fn scaled(&self, delta: f64) -> Result<RankReward> {
        if !(delta.is_finite() && delta >= 0.0) {
            return domain(format!("reward multiplier must be non-negative, got {delta}"));
        }
        Ok(match self {
            RankReward::Step(s) => RankReward::Step(StepReward::new(
                s.thresholds.clone(),
                s.levels.iter().map(|v| v * delta).collect(),
                s.floor,
            )?),
            RankReward::Smooth(s) => RankReward::Smooth(SmoothReward::new(
                s.grid.clone(),
                s.values.iter().map(|v| v * delta).collect(),
                s.floor,
            )?),
        })
    }

    /// Cumulative integrals of `exp((H(1−) − H(r))/κ)`, exact per cell.
    pub fn exp_cumulative(&self, kappa: f64) -> ExpCumulative {
        let (nodes, vals) = self.cells();
        let h_min = self.min_level();
        let step = self.is_step();
        let m = nodes.len() - 1;
        let mut log_left = Vec::with_capacity(m);
        let mut rate = Vec::with_capacity(m);
        let mut cum = Vec::with_capacity(m + 1);
        cum.push(0.0);
        for j in 0..m {
            let width = nodes[j + 1] - nodes[j];
            let a = (h_min - vals[j]) / kappa;
            let b = if step { 0.0 } else { (vals[j] - vals[j + 1]) / (kappa * width) };
            log_left.push(a);
            rate.push(b);
            let prev = cum[j];
            cum.push(prev + cell_integral(a, b, width));
        }
        ExpCumulative { nodes, log_left, rate, cum, h_min, kappa }
    }
}

/// `∫_0^w exp(a + b s) ds` without overflow for large `|a|`, `b >= 0`.
fn cell_integral(a: f64, b: f64, w: f64) -> f64 {
    let bw = b * w;
    if bw > 1.0 {
        (a + bw).exp() * (-(-bw).exp_m1()) / b
    } else if bw > 1e-300 {
        a.exp() * w * (bw.exp_m1() / bw)
    } else {
        a.exp() * w
    }
}

/// Running integral `I(r) = ∫_0^r exp((H_min − H(z))/κ) dz` of a reward.
///
/// The shift by `H_min = H(1−)` keeps the integrand in `(0, 1]`, so `I` never
/// overflows; integrals against `exp((R∞ − H)/κ)` are `exp((R∞ − H_min)/κ)·I`.
#[derive(Debug, Clone)]
pub struct ExpCumulative {
    nodes: Vec<f64>,
    log_left: Vec<f64>,
    rate: Vec<f64>,
    cum: Vec<f64>,
    h_min: f64,
    kappa: f64,
}

impl ExpCumulative {
    pub fn h_min(&self) -> f64 {
        self.h_min
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn total(&self) -> f64 {
        self.cum[self.cum.len() - 1]
    }

    fn cell_of(&self, r: f64) -> usize {
        let m = self.nodes.len() - 1;
        (self.nodes.partition_point(|&x| x <= r).max(1) - 1).min(m - 1)
    }

    pub fn integral(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        if r >= 1.0 {
            return self.total();
        }
        let j = self.cell_of(r);
        self.cum[j] + cell_integral(self.log_left[j], self.rate[j], r - self.nodes[j])
    }

    /// The integrand `exp((H_min − H(r))/κ)`.
    pub fn integrand(&self, r: f64) -> f64 {
        let r = r.clamp(0.0, 1.0);
        let j = self.cell_of(r);
        (self.log_left[j] + self.rate[j] * (r - self.nodes[j])).exp()
    }

    /// Smallest `r` with `I(r) = v`, for `0 <= v <= I(1)`.
    pub fn inverse(&self, v: f64) -> f64 {
        if v <= 0.0 {
            return 0.0;
        }
        if v >= self.total() {
            return 1.0;
        }
        let j = self.cum.partition_point(|&c| c < v).max(1) - 1;
        let j = j.min(self.nodes.len() - 2);
        let target = v - self.cum[j];
        let width = self.nodes[j + 1] - self.nodes[j];
        let cell = self.cum[j + 1] - self.cum[j];
        if cell <= 0.0 || target <= 0.0 {
            return self.nodes[j];
        }
        let (a, b) = (self.log_left[j], self.rate[j]);
        let w = if b * width <= 1e-12 {
            // nearly constant integrand: linear in the cell
            width * (target / cell)
        } else {
            // e^a (e^{b w} − 1)/b = target
            let lv = (b * target).ln() - a;
            let bw = if lv > 30.0 { lv + (-lv).exp().ln_1p() } else { lv.exp().ln_1p() };
            bw / b
        };
        (self.nodes[j] + w.clamp(0.0, width)).min(self.nodes[j + 1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadratic(m: usize) -> RankReward {
        SmoothReward::from_fn(|r| 6.0 * (1.0 - r).powi(2), m, 0.0).unwrap().into()
    }

    #[test]
    fn step_evaluation_is_right_open() {
        let h = StepReward::new(vec![0.25, 0.5], vec![5.0, 2.0, 1.0], 0.0).unwrap();
        assert_eq!(h.eval(0.0), 5.0);
        assert_eq!(h.eval(0.25), 2.0);
        assert_eq!(h.eval(0.4999), 2.0);
        assert_eq!(h.eval(0.5), 1.0);
        assert_eq!(h.eval(1.0), 1.0);
    }

    #[test]
    fn validation() {
        assert!(StepReward::new(vec![0.5], vec![1.0, 2.0], 0.0).is_err());
        assert!(StepReward::new(vec![0.5], vec![1.0], 0.0).is_err());
        assert!(StepReward::new(vec![0.5, 0.4], vec![3.0, 2.0, 1.0], 0.0).is_err());
        assert!(StepReward::new(vec![], vec![1.0], 2.0).is_err());
        assert!(SmoothReward::new(vec![0.0, 0.5], vec![1.0, 0.0], 0.0).is_err());
        assert!(SmoothReward::new(vec![0.0, 1.0], vec![1.0, f64::NAN], 0.0).is_err());
    }

    #[test]
    fn discretize_single_bin_is_mean() {
        let h = quadratic(2000);
        let d = RankReward::Step(h.discretize(1).unwrap());
        assert!((d.eval(0.3) - 2.0).abs() < 1e-5);
        assert!((h.mean() - 2.0).abs() < 1e-5);
    }

    #[test]
    fn discretize_preserves_budget() {
        let h = quadratic(37);
        let d: RankReward = h.discretize(13).unwrap().into();
        assert!((d.mean() - h.mean()).abs() < 1e-12);
    }

    #[test]
    fn cumulative_matches_quadrature() {
        for h in [quadratic(50), StepReward::new(vec![0.25, 0.5], vec![5.0, 2.0, 1.0], 0.0).unwrap().into()] {
            let kappa = 0.125;
            let ec = h.exp_cumulative(kappa);
            let hmin = h.min_level();
            for &r in &[0.0, 0.1, 0.25, 0.33, 0.5, 0.77, 1.0] {
                let mut pts: Vec<f64> = [0.0, 0.25, 0.5, r].into_iter().filter(|&b| b <= r).collect();
                pts.dedup();
                let q = crate::quad::integrate_pieces(|z| ((hmin - h.eval(z)) / kappa).exp(), &pts, 1e-15, 1e-13);
                assert!((ec.integral(r) - q.value).abs() < 1e-12, "r={r}");
                if r > 0.0 && r < 1.0 {
                    assert!((ec.inverse(ec.integral(r)) - r).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn cumulative_survives_extreme_scales() {
        let h = quadratic(100);
        let ec = h.exp_cumulative(1e-6);
        assert!(ec.total().is_finite() && ec.total() > 0.0);
        let r = ec.inverse(0.5 * ec.total());
        assert!(r > 0.99 && r < 1.0);
    }

    #[test]
    fn serde_round_trip_validates() {
        let h: RankReward = StepReward::new(vec![0.5], vec![2.0, 1.0], 0.0).unwrap().into();
        let s = serde_json::to_string(&h).unwrap();
        let back: RankReward = serde_json::from_str(&s).unwrap();
        assert_eq!(h, back);
        let bad = r#"{"kind":"step","thresholds":[0.5],"levels":[1.0,2.0],"floor":0.0}"#;
        assert!(serde_json::from_str::<RankReward>(bad).is_err());
    }
}
