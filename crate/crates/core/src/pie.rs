//! Prize pools that grow with the completion rate.
//!
//! When the reward `H(r, β)` and the non-completion payment `R∞(β)` depend on
//! the equilibrium completion rate `β`, equilibria are the roots of
//!
//! ```text
//! φ(β) = 1/(1 − β) ∫_0^β exp((R∞(β) − H(z, β))/κ) dz = F°(T)/(1 − F°(T)),
//! ```
//!
//! which may have several solutions. Roots are bracketed on a grid and refined
//! by bisection; the dominant equilibrium is the largest root.

use crate::equilibrium_hom::{Horizon, ModelParams};
use crate::error::{domain, Result};
use crate::reward::{RankReward, SmoothReward, StepReward};
use serde::Serialize;

/// A family of rank rewards indexed by the completion rate.
pub trait PieFamily: Sync {
    /// Reward (with its floor `R∞(β)`) in force when the completion rate is `β`.
    fn reward_at(&self, beta: f64) -> Result<RankReward>;
}

impl<F: Fn(f64) -> Result<RankReward> + Sync> PieFamily for F {
    fn reward_at(&self, beta: f64) -> Result<RankReward> {
        self(beta)
    }
}

/// `H(r, β) = R∞(β) + β` with `R∞(β) = floor + floor_slope·β`: a flat bonus
/// equal to the completion rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct RateBonus {
    pub floor: f64,
    pub floor_slope: f64,
}

impl PieFamily for RateBonus {
    fn reward_at(&self, beta: f64) -> Result<RankReward> {
        let r_inf = self.floor + self.floor_slope * beta;
        Ok(StepReward::constant(r_inf + beta, r_inf)?.into())
    }
}

/// Pool `Π(β) = K(1 + β)`: a share `γ` pays participation, the rest is split
/// among finishers by `H_ε(r) = 1 + ε(1 − 2r)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct SharedPool {
    pub pool: f64,
    pub participation: f64,
    pub inequality: f64,
}

impl PieFamily for SharedPool {
    fn reward_at(&self, beta: f64) -> Result<RankReward> {
        let (g, e) = (self.participation, self.inequality);
        if !(0.0..=1.0).contains(&g) || !(0.0..=1.0).contains(&e) {
            return domain("participation share and inequality must lie in [0, 1]");
        }
        let pi = self.pool * (1.0 + beta);
        let top = pi * (g + (1.0 - g) * (1.0 + e));
        let bottom = pi * (g + (1.0 - g) * (1.0 - e));
        Ok(SmoothReward::new(vec![0.0, 1.0], vec![top, bottom], pi * g)?.into())
    }
}

/// One equilibrium of a pie game.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PieRoot {
    pub beta: f64,
    pub value: f64,
    pub expected_effort: f64,
    /// 2 for a tangency (double root), 1 otherwise.
    pub multiplicity: u8,
}

/// All equilibria found for one parameter set.
#[derive(Debug, Clone, Serialize)]
pub struct PieEquilibria {
    pub roots: Vec<PieRoot>,
    /// Index of the dominant equilibrium, the largest root.
    pub dominant: usize,
    /// Set when two roots lie within two grid cells of each other.
    pub resolution_warning: bool,
}

/// `ln φ(β)`.
pub fn ln_phi(family: &dyn PieFamily, kappa: f64, beta: f64) -> Result<f64> {
    let h = family.reward_at(beta)?;
    let ec = h.exp_cumulative(kappa);
    let shift = (h.floor() - ec.h_min()) / kappa;
    Ok(shift + ec.integral(beta).ln() - (-beta).ln_1p())
}

/// Grid on `(0, 1)` that is uniform in the bulk and geometric near both ends.
fn beta_grid(points: usize) -> Vec<f64> {
    let n = points.max(16);
    let mut g: Vec<f64> = (1..n).map(|i| i as f64 / n as f64).collect();
    let tail = n / 5;
    for i in 0..tail {
        let s = -14.0 + (14.0 - (n as f64).log10()) * i as f64 / tail as f64;
        let e = 10f64.powf(s);
        g.push(e);
        g.push(1.0 - e);
    }
    g.sort_by(f64::total_cmp);
    g.dedup();
    g.retain(|&b| b > 0.0 && b < 1.0);
    g
}

fn golden_extremum<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, maximize: bool) -> f64 {
    let sgn = if maximize { 1.0 } else { -1.0 };
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = hi - phi * (hi - lo);
    let mut d = lo + phi * (hi - lo);
    let (mut fc, mut fd) = (sgn * f(c), sgn * f(d));
    for _ in 0..200 {
        if hi - lo <= 1e-15 * (1.0 + hi.abs()) {
            break;
        }
        if fc >= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - phi * (hi - lo);
            fc = sgn * f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + phi * (hi - lo);
            fd = sgn * f(d);
        }
    }
    0.5 * (lo + hi)
}

/// Enumerates every equilibrium of the pie game on a grid of `grid_points`.
pub fn enumerate_pie_equilibria(
    params: &ModelParams,
    family: &dyn PieFamily,
    grid_points: usize,
) -> Result<PieEquilibria> {
    params.validate()?;
    if !params.horizon.is_finite() {
        return domain("a completion-rate dependent pool needs a finite deadline");
    }
    let kappa = params.kappa();
    let f_t = params.baseline_completion();
    if f_t <= 0.0 {
        return domain("uncontrolled completion probability underflows at the deadline");
    }
    let ln_c = f_t.ln() - (-f_t).ln_1p();
    let resid = |b: f64| ln_phi(family, kappa, b).map(|v| v - ln_c);
    let grid = beta_grid(grid_points);
    let vals: Vec<f64> = grid.iter().map(|&b| resid(b)).collect::<Result<_>>()?;
    let mut found: Vec<(f64, u8)> = Vec::new();
    for i in 0..grid.len() - 1 {
        let (a, b) = (vals[i], vals[i + 1]);
        if a == 0.0 {
            found.push((grid[i], 1));
        } else if a.signum() != b.signum() && b != 0.0 {
            let (mut lo, mut hi) = (grid[i], grid[i + 1]);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if resid(mid)?.signum() == a.signum() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            found.push((0.5 * (lo + hi), 1));
        }
    }
    // tangencies: interior extrema of the residual that touch zero without a sign change
    for i in 1..grid.len() - 1 {
        let (l, m, r) = (vals[i - 1], vals[i], vals[i + 1]);
        let is_max = m >= l && m >= r && m < 0.0;
        let is_min = m <= l && m <= r && m > 0.0;
        if !(is_max || is_min) {
            continue;
        }
        let f = |b: f64| resid(b).unwrap_or(f64::NAN);
        let b = golden_extremum(f, grid[i - 1], grid[i + 1], is_max);
        if f(b).abs() < 1e-10 {
            found.push((b, 2));
        }
    }
    found.sort_by(|a, b| a.0.total_cmp(&b.0));
    found.dedup_by(|b, a| {
        let same = (b.0 - a.0).abs() < 1e-8;
        if same {
            a.1 = a.1.max(b.1);
        }
        same
    });
    let mut roots = Vec::with_capacity(found.len());
    for &(beta, multiplicity) in &found {
        let h = family.reward_at(beta)?;
        let value = h.floor() + kappa * ((-f_t).ln_1p() - (-beta).ln_1p());
        let expected_effort = params.x0 * (beta - f_t) / (1.0 - f_t);
        roots.push(PieRoot { beta, value, expected_effort, multiplicity });
    }
    let dominant = roots.len().saturating_sub(1);
    let cell = 1.0 / grid_points.max(16) as f64;
    let resolution_warning = found.windows(2).any(|w| w[1].0 - w[0].0 < 2.0 * cell);
    Ok(PieEquilibria { roots, dominant, resolution_warning })
}

/// Values of `F°(T)` at which the number of equilibria changes.
///
/// The root count of `φ(β) = F°/(1 − F°)` changes exactly when the right-hand
/// side crosses a local extremum of `φ`, so each threshold is `φ*/(1 + φ*)`
/// for an extremal value `φ*`.
pub fn pie_critical_thresholds(kappa: f64, family: &dyn PieFamily, grid_points: usize) -> Result<Vec<f64>> {
    crate::error::check_positive("kappa", kappa)?;
    let grid = beta_grid(grid_points);
    let f = |b: f64| ln_phi(family, kappa, b);
    let vals: Vec<f64> = grid.iter().map(|&b| f(b)).collect::<Result<_>>()?;
    let mut out = Vec::new();
    for i in 1..grid.len() - 1 {
        let (l, m, r) = (vals[i - 1], vals[i], vals[i + 1]);
        let is_max = m > l && m >= r;
        let is_min = m < l && m <= r;
        if is_max || is_min {
            let b = golden_extremum(|b| f(b).unwrap_or(f64::NAN), grid[i - 1], grid[i + 1], is_max);
            let phi = f(b)?.exp();
            out.push(phi / (1.0 + phi));
        }
    }
    out.sort_by(f64::total_cmp);
    Ok(out)
}

/// Number of equilibria when `F°(T) = f_t`, counting a tangency twice.
pub fn root_count(kappa: f64, family: &dyn PieFamily, f_t: f64, grid_points: usize) -> Result<usize> {
    // any (x0, σ, T) with this F°(T) gives the same count; pick T = 1, σ from κ with c = 1
    let sigma = (kappa / 2.0).sqrt();
    let y = level_for_probability(f_t)?;
    let params = ModelParams::new(y * sigma, sigma, 1.0, Horizon::Finite(1.0))?;
    let eq = enumerate_pie_equilibria(&params, family, grid_points)?;
    Ok(eq.roots.iter().map(|r| r.multiplicity as usize).sum())
}

/// Level `y` with `P(τ_y <= 1) = p`.
fn level_for_probability(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return domain(format!("completion probability must lie in (0, 1), got {p}"));
    }
    // τ_y = y² τ_1, so P(τ_y <= 1) = P(τ_1 <= 1/y²)
    let unit = crate::fpt::FirstPassage::new(1.0)?;
    Ok(unit.quantile(p).sqrt().recip())
}

/// One point of a bifurcation diagram.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BranchPoint {
    pub parameter: f64,
    pub branch: usize,
    pub beta: f64,
    pub value: f64,
}

/// Equilibria traced along a one-parameter family.
#[derive(Debug, Clone, Serialize)]
pub struct BifurcationScan {
    pub points: Vec<BranchPoint>,
    /// Maximal runs `[start, end]` of parameter values with more than one equilibrium.
    pub multi_valued: Vec<(f64, f64)>,
}

/// Traces equilibria over `parameters`, linking each root to the nearest root
/// of the previous parameter value.
pub fn bifurcation_scan<P, F>(
    params: &ModelParams,
    family_at: F,
    parameters: &[f64],
    grid_points: usize,
) -> Result<BifurcationScan>
where
    P: PieFamily,
    F: Fn(f64) -> P + Sync,
{
    let mut points = Vec::new();
    let mut multi_valued = Vec::new();
    let mut run: Option<(f64, f64)> = None;
    let mut prev: Vec<(usize, f64)> = Vec::new();
    let mut next_branch = 0;
    for &p in parameters {
        let eq = enumerate_pie_equilibria(params, &family_at(p), grid_points)?;
        let mut current = Vec::with_capacity(eq.roots.len());
        let mut used = vec![false; prev.len()];
        for root in &eq.roots {
            let near = prev
                .iter()
                .enumerate()
                .filter(|(i, _)| !used[*i])
                .min_by(|a, b| (a.1 .1 - root.beta).abs().total_cmp(&(b.1 .1 - root.beta).abs()));
            let branch = match near {
                Some((i, &(id, b))) if (b - root.beta).abs() < 0.05 => {
                    used[i] = true;
                    id
                }
                _ => {
                    next_branch += 1;
                    next_branch - 1
                }
            };
            current.push((branch, root.beta));
            points.push(BranchPoint { parameter: p, branch, beta: root.beta, value: root.value });
        }
        if eq.roots.len() > 1 {
            run = Some(match run {
                Some((s, _)) => (s, p),
                None => (p, p),
            });
        } else if let Some(r) = run.take() {
            multi_valued.push(r);
        }
        prev = current;
    }
    if let Some(r) = run {
        multi_valued.push(r);
    }
    Ok(BifurcationScan { points, multi_valued })
}
