//! Reward design for a homogeneous population.
//!
//! Each routine returns a reward scheme together with the organizer's
//! objective at the induced equilibrium:
//!
//! * [`reverse_engineer`] recovers the reward that makes a target completion
//!   law an equilibrium, from the likelihood ratio `ζ = f_μ/f°`;
//! * [`min_quantile_reward`], [`min_budget`] and [`max_completion_rate`]
//!   handle the speed, budget and rate questions, all solved by a
//!   single-cutoff scheme paying a bonus to the first `α` finishers;
//! * [`max_welfare_reward`] maximizes the players' equilibrium value;
//! * [`max_net_profit`] trades the organizer's time-dependent profit `g`
//!   against the prize budget.

use crate::equilibrium_hom::{Horizon, ModelParams};
use crate::error::{domain, Error, Result};
use crate::fpt::FirstPassage;
use crate::quad;
use crate::reward::{RankReward, SmoothReward, StepReward};
use serde::Serialize;

/// A target law of completion times sampled on a time grid.
///
/// With a finite horizon the grid must end at the deadline and the mass
/// `1 − cdf(T)` sits on non-completion.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TargetDistribution {
    times: Vec<f64>,
    density: Vec<f64>,
    cdf: Vec<f64>,
}

impl TargetDistribution {
    pub fn new(times: Vec<f64>, density: Vec<f64>, cdf: Vec<f64>) -> Result<Self> {
        if times.len() < 2 || density.len() != times.len() || cdf.len() != times.len() {
            return domain("target distribution needs matching times, density and cdf with at least two points");
        }
        if times[0] < 0.0 || times.windows(2).any(|w| w[1] <= w[0]) {
            return domain("target times must be non-negative and strictly increasing");
        }
        if density.iter().any(|d| !d.is_finite() || *d < 0.0) {
            return domain("target density must be finite and non-negative");
        }
        if cdf.iter().any(|c| !(0.0..=1.0 + 1e-12).contains(c)) || cdf.windows(2).any(|w| w[1] < w[0] - 1e-14) {
            return domain("target cdf must be non-decreasing with values in [0, 1]");
        }
        Ok(Self { times, density, cdf })
    }

    /// Builds the cdf by trapezoidal integration, taking `cdf(times[0]) = 0`.
    pub fn from_density(times: Vec<f64>, density: Vec<f64>) -> Result<Self> {
        if times.len() != density.len() {
            return domain("times and density must have the same length");
        }
        let mut cdf = Vec::with_capacity(times.len());
        let mut acc = 0.0;
        for i in 0..times.len() {
            if i > 0 {
                acc += 0.5 * (density[i] + density[i - 1]) * (times[i] - times[i - 1]);
            }
            cdf.push(acc);
        }
        if acc > 1.0 + 1e-6 {
            return domain(format!("target density integrates to {acc} > 1"));
        }
        Self::new(times, density, cdf.into_iter().map(|c| c.min(1.0)).collect())
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn cdf(&self) -> &[f64] {
        &self.cdf
    }
}

/// Reward recovered from a target distribution.
#[derive(Debug, Clone, Serialize)]
pub struct ReverseEngineered {
    /// Cheapest admissible reward realizing the target.
    pub reward: RankReward,
    /// Values of the recovered reward at the ranks of the target grid.
    pub ranks: Vec<f64>,
    pub values: Vec<f64>,
    /// Smallest additive constant keeping the reward above the floor
    /// (infinite horizon only; zero otherwise).
    pub min_shift: f64,
    /// Prize budget `∫_0^1 H` of [`Self::reward`].
    pub budget_needed: f64,
}

impl ReverseEngineered {
    pub fn within_budget(&self, budget: f64) -> bool {
        self.budget_needed <= budget + 1e-12 * (1.0 + budget.abs())
    }
}

fn rank_reward_from_nodes(mut ranks: Vec<f64>, mut values: Vec<f64>, floor: f64) -> Result<SmoothReward> {
    // drop ranks that coincide to rounding so the grid is strictly increasing
    let mut grid = Vec::with_capacity(ranks.len() + 2);
    let mut vals = Vec::with_capacity(ranks.len() + 2);
    for (r, v) in ranks.drain(..).zip(values.drain(..)) {
        let r = r.clamp(0.0, 1.0);
        if let Some(&last) = grid.last() {
            if r <= last + 1e-14 {
                continue;
            }
        }
        grid.push(r);
        vals.push(v);
    }
    if grid.is_empty() {
        return domain("target distribution has no mass on its grid");
    }
    if grid[0] > 0.0 {
        grid.insert(0, 0.0);
        vals.insert(0, vals[0]);
    }
    if *grid.last().unwrap() < 1.0 {
        if 1.0 - grid.last().unwrap() <= 1e-14 {
            *grid.last_mut().unwrap() = 1.0;
        } else {
            grid.push(1.0);
            vals.push(*vals.last().unwrap());
        }
    }
    // round-off in ln ζ must not register as an increase
    for k in 1..vals.len() {
        if vals[k] > vals[k - 1] {
            vals[k] = vals[k - 1];
        }
    }
    SmoothReward::new(grid, vals, floor)
}

/// Recovers the rank reward under which `target` is the equilibrium law.
///
/// With an infinite horizon, `H(r) = κ ln ζ(F_μ⁻¹(r)) + C` for any `C` keeping
/// `H` above the floor; the cheapest such reward is returned. With a deadline,
/// `H(r) = R∞ + κ (ln ζ(F_μ⁻¹(r)) − ln δ)` on `[0, β]` and `R∞` above, where
/// `β = F_μ(T)` and `δ = (1 − β)/(1 − F°(T))`; this needs `ζ >= δ`.
pub fn reverse_engineer(params: &ModelParams, floor: f64, target: &TargetDistribution) -> Result<ReverseEngineered> {
    params.validate()?;
    let kappa = params.kappa();
    let fpt = params.fpt();
    let (times, dens, cdf) = (&target.times, &target.density, &target.cdf);
    if let Horizon::Finite(t) = params.horizon {
        if (times[times.len() - 1] - t).abs() > 1e-12 * t.max(1.0) {
            return domain("with a deadline the target grid must end at the deadline");
        }
    }
    let mut ln_zeta = Vec::with_capacity(times.len());
    let mut keep = Vec::with_capacity(times.len());
    for i in 0..times.len() {
        let f0 = fpt.pdf(times[i]);
        if f0 <= 0.0 || dens[i] <= 0.0 {
            if dens[i] > 0.0 {
                return Err(Error::Infeasible(format!(
                    "target puts density on t = {} where the uncontrolled law has none",
                    times[i]
                )));
            }
            continue;
        }
        let lz = (dens[i] / f0).ln();
        if !lz.is_finite() {
            return Err(Error::Infeasible("likelihood ratio is unbounded".into()));
        }
        ln_zeta.push(lz);
        keep.push(i);
    }
    if keep.len() < 2 {
        return domain("target grid has fewer than two usable points");
    }
    for w in ln_zeta.windows(2) {
        if w[1] > w[0] + 1e-9 * (1.0 + w[0].abs()) {
            return Err(Error::Infeasible(
                "likelihood ratio against the uncontrolled law increases; no decreasing reward realizes it".into(),
            ));
        }
    }
    let ranks: Vec<f64> = keep.iter().map(|&i| cdf[i]).collect();
    // ∫ ln ζ dμ over the grid, extending ln ζ flat outside it
    let mut e_ln = cdf[keep[0]] * ln_zeta[0];
    for j in 1..keep.len() {
        e_ln += 0.5 * (ln_zeta[j] + ln_zeta[j - 1]) * (cdf[keep[j]] - cdf[keep[j - 1]]);
    }
    let last = *ln_zeta.last().unwrap();
    match params.horizon {
        Horizon::Infinite => {
            e_ln += (1.0 - cdf[keep[keep.len() - 1]]) * last;
            let min_shift = floor - kappa * last;
            let values: Vec<f64> = ln_zeta.iter().map(|lz| kappa * lz + min_shift).collect();
            let reward = rank_reward_from_nodes(ranks.clone(), values.clone(), floor)?;
            Ok(ReverseEngineered {
                reward: reward.into(),
                ranks,
                values,
                min_shift,
                budget_needed: kappa * e_ln + min_shift,
            })
        }
        Horizon::Finite(t) => {
            let beta = cdf[cdf.len() - 1];
            if beta >= 1.0 {
                return Err(Error::Infeasible("a deadline leaves positive mass on non-completion".into()));
            }
            let ln_delta = (-beta).ln_1p() - (-fpt.cdf(t)).ln_1p();
            if last < ln_delta - 1e-9 {
                return Err(Error::Infeasible(format!(
                    "likelihood ratio {} drops below (1 − β)/(1 − F°(T)) = {}",
                    last.exp(),
                    ln_delta.exp()
                )));
            }
            let values: Vec<f64> = ln_zeta.iter().map(|lz| floor + kappa * (lz - ln_delta).max(0.0)).collect();
            let mut grid_r = ranks.clone();
            let mut grid_v = values.clone();
            if beta < 1.0 {
                let eta = (1e-9_f64).min(0.5 * (1.0 - beta));
                grid_r.push(beta + eta);
                grid_v.push(floor);
            }
            let reward = rank_reward_from_nodes(grid_r, grid_v, floor)?;
            let budget_needed = RankReward::from(reward.clone()).mean();
            Ok(ReverseEngineered { reward: reward.into(), ranks, values, min_shift: 0.0, budget_needed })
        }
    }
}

/// Outcome of a design problem.
#[derive(Debug, Clone, Serialize)]
pub struct DesignSolution {
    pub reward: RankReward,
    /// Optimal objective: a time for the quantile problem, a budget for the
    /// budget problem, a rate for the rate problem, a value for welfare.
    /// `None` when no admissible reward reaches the target before the deadline.
    pub objective: Option<f64>,
    /// Equilibrium value of a player under `reward`.
    pub value: f64,
}

fn check_budget(floor: f64, budget: f64) -> Result<()> {
    if !floor.is_finite() || !budget.is_finite() || budget < floor {
        return domain(format!("budget {budget} must be at least the non-completion payment {floor}"));
    }
    Ok(())
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return domain(format!("target fraction must lie in (0, 1), got {alpha}"));
    }
    Ok(())
}

/// `R∞ + (K − R∞)/α` to the first `α` finishers and `R∞` to the rest.
pub fn cutoff_reward(floor: f64, budget: f64, alpha: f64) -> Result<StepReward> {
    check_alpha(alpha)?;
    check_budget(floor, budget)?;
    StepReward::new(vec![alpha], vec![floor + (budget - floor) / alpha, floor], floor)
}

/// `T*_α` reached under the cutoff scheme, ignoring any deadline.
pub fn cutoff_quantile_time(params: &ModelParams, floor: f64, budget: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    check_budget(floor, budget)?;
    let e = (budget - floor) / (alpha * params.kappa());
    let lead = alpha * (-e).exp();
    Ok(params.fpt().quantile(lead / (lead + 1.0 - alpha)))
}

/// Equilibrium law under the cutoff scheme when `α` is reached in time.
pub fn cutoff_cdf(params: &ModelParams, floor: f64, budget: f64, alpha: f64, t: f64) -> Result<f64> {
    let t_star = cutoff_quantile_time(params, floor, budget, alpha)?;
    let e = (budget - floor) / (alpha * params.kappa());
    let f0 = params.fpt().cdf(t);
    Ok(if t <= t_star {
        if f0 <= 0.0 {
            return Ok(0.0);
        }
        // (α + (1 − α)e^E) F°(t), written to stay finite for large E
        (f0.ln() + e).exp() * (alpha * (-e).exp() + 1.0 - alpha)
    } else {
        f0 + alpha * (1.0 - f0) * (-(-e).exp_m1())
    }
    .min(1.0))
}

/// Fastest `α`-quantile for budget `K`: the cutoff scheme is optimal and
/// `T*_α = F°⁻¹(α/(α + (1 − α) e^{(K − R∞)/(ακ)}))`.
pub fn min_quantile_reward(params: &ModelParams, floor: f64, budget: f64, alpha: f64) -> Result<DesignSolution> {
    params.validate()?;
    let reward = cutoff_reward(floor, budget, alpha)?;
    let t_star = cutoff_quantile_time(params, floor, budget, alpha)?;
    let kappa = params.kappa();
    let e = (budget - floor) / (alpha * kappa);
    let objective = match params.horizon {
        Horizon::Finite(t) if t < t_star => None,
        _ => Some(t_star),
    };
    let value = match params.horizon {
        Horizon::Infinite => floor - kappa * (alpha * (-e).exp() + 1.0 - alpha).ln(),
        Horizon::Finite(_) => crate::equilibrium_hom::solve_hom(params, &reward.clone().into())?.value(),
    };
    Ok(DesignSolution { reward: reward.into(), objective, value })
}

/// Smallest budget for which an `α` fraction finishes by the deadline.
pub fn min_budget(params: &ModelParams, floor: f64, alpha: f64) -> Result<DesignSolution> {
    params.validate()?;
    check_alpha(alpha)?;
    let kappa = params.kappa();
    let budget = match params.horizon {
        Horizon::Infinite => floor,
        Horizon::Finite(_) => {
            let f_t = params.baseline_completion();
            if f_t <= 0.0 {
                return Err(Error::Infeasible("uncontrolled completion probability is zero".into()));
            }
            let ln_c = alpha.ln() - (-alpha).ln_1p() + (-f_t).ln_1p() - f_t.ln();
            floor + (alpha * kappa * ln_c).max(0.0)
        }
    };
    let reward = cutoff_reward(floor, budget, alpha)?;
    let value = crate::equilibrium_hom::solve_hom(params, &reward.clone().into())?.value();
    Ok(DesignSolution { reward: reward.into(), objective: Some(budget), value })
}

/// Largest completion rate reachable with budget `K` and the cutoff scheme at it.
///
/// Solves `F°/(1 − F°) = α/(1 − α) · e^{(R∞ − K)/(ακ)}` by bisection.
pub fn max_completion_rate(params: &ModelParams, floor: f64, budget: f64) -> Result<DesignSolution> {
    params.validate()?;
    check_budget(floor, budget)?;
    let alpha = match params.horizon {
        Horizon::Infinite => 1.0,
        Horizon::Finite(_) => max_rate_value(params, floor, budget)?,
    };
    let reward: RankReward = if alpha >= 1.0 || budget == floor {
        StepReward::constant(budget, floor)?.into()
    } else {
        cutoff_reward(floor, budget, alpha)?.into()
    };
    let value = crate::equilibrium_hom::solve_hom(params, &reward)?.value();
    Ok(DesignSolution { reward, objective: Some(alpha), value })
}

fn max_rate_value(params: &ModelParams, floor: f64, budget: f64) -> Result<f64> {
    let f_t = params.baseline_completion();
    if f_t <= 0.0 {
        return Ok(0.0);
    }
    let kappa = params.kappa();
    let ln_c = f_t.ln() - (-f_t).ln_1p();
    let g = |a: f64| a.ln() - (-a).ln_1p() - (budget - floor) / (a * kappa) - ln_c;
    let (mut lo, mut hi) = (f_t, 1.0_f64);
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Reward maximizing the equilibrium value of players under budget `K`.
///
/// Without a deadline the flat reward `H ≡ K` attains `K`; with one, the
/// cutoff scheme at the maximal completion rate does.
pub fn max_welfare_reward(params: &ModelParams, floor: f64, budget: f64) -> Result<DesignSolution> {
    params.validate()?;
    check_budget(floor, budget)?;
    match params.horizon {
        Horizon::Infinite => Ok(DesignSolution {
            reward: StepReward::constant(budget, floor)?.into(),
            objective: Some(budget),
            value: budget,
        }),
        Horizon::Finite(_) => {
            let alpha = max_rate_value(params, floor, budget)?;
            let f_t = params.baseline_completion();
            let value = floor + params.kappa() * ((-f_t).ln_1p() - (-alpha).ln_1p());
            let reward: RankReward = if budget == floor {
                StepReward::constant(floor, floor)?.into()
            } else {
                cutoff_reward(floor, budget, alpha)?.into()
            };
            Ok(DesignSolution { reward, objective: Some(value), value })
        }
    }
}

/// Organizer's profit from a completion at time `t`, non-increasing in `t`.
pub trait ProfitCurve: Sync {
    fn at(&self, t: f64) -> f64;
    /// `g(∞)`.
    fn at_infinity(&self) -> f64;
    /// Times at which `g` has kinks, used as quadrature breakpoints.
    fn kinks(&self) -> Vec<f64> {
        Vec::new()
    }
}

/// Piecewise-linear profit through sampled points, flat outside them.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct ProfitTable {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl ProfitTable {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() {
            return domain("profit table needs matching, non-empty time and value columns");
        }
        if times[0] < 0.0 || times.windows(2).any(|w| w[1] <= w[0]) {
            return domain("profit table times must be non-negative and strictly increasing");
        }
        if values.iter().any(|v| !v.is_finite()) {
            return domain("profit table contains a non-finite value");
        }
        if values.windows(2).any(|w| w[1] > w[0] + 1e-12 * (1.0 + w[0].abs())) {
            return domain("profit must be non-increasing in completion time");
        }
        Ok(Self { times, values })
    }
}

impl ProfitCurve for ProfitTable {
    fn at(&self, t: f64) -> f64 {
        let n = self.times.len();
        if t <= self.times[0] {
            return self.values[0];
        }
        if t >= self.times[n - 1] {
            return self.values[n - 1];
        }
        let j = self.times.partition_point(|&x| x <= t) - 1;
        let w = (t - self.times[j]) / (self.times[j + 1] - self.times[j]);
        self.values[j] + w * (self.values[j + 1] - self.values[j])
    }

    fn at_infinity(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    fn kinks(&self) -> Vec<f64> {
        self.times.clone()
    }
}

/// Profit given by a closure with a known limit at infinity.
pub struct FnProfit<F> {
    f: F,
    limit: f64,
}

impl<F: Fn(f64) -> f64 + Sync> FnProfit<F> {
    pub fn new(f: F, limit: f64) -> Self {
        Self { f, limit }
    }
}

impl<F: Fn(f64) -> f64 + Sync> ProfitCurve for FnProfit<F> {
    fn at(&self, t: f64) -> f64 {
        if t.is_infinite() {
            self.limit
        } else {
            (self.f)(t)
        }
    }

    fn at_infinity(&self) -> f64 {
        self.limit
    }
}

/// Solution of the net-profit problem.
#[derive(Debug, Clone, Serialize)]
pub struct ProfitDesign {
    pub reward: RankReward,
    /// Maximal expected net profit `U`.
    pub net_profit: f64,
    /// Time after which the optimal reward stops discriminating (`t*_b`).
    pub cutoff_time: f64,
    /// Maximizer of the reduced objective found by the search.
    pub maximizer: f64,
    /// All grid maximizers within tolerance of the best value.
    pub maximizers: Vec<f64>,
    /// Normalizing constant `b*` of the optimal density.
    pub scale: f64,
    /// Optimal completion-time density as `(t, f)` pairs on a log grid.
    pub density: Vec<(f64, f64)>,
}

struct ProfitIntegrals<'a> {
    g: &'a dyn ProfitCurve,
    fpt: FirstPassage,
    kappa: f64,
    g0: f64,
    grid: Vec<f64>,
    /// ∫_0^{z_i} f° e^{(g − g0)/κ}
    a: Vec<f64>,
    /// ∫_{z_i}^∞ g f°
    b: Vec<f64>,
}

impl<'a> ProfitIntegrals<'a> {
    fn new(g: &'a dyn ProfitCurve, fpt: FirstPassage, kappa: f64, points: usize) -> Self {
        let y2 = fpt.level().powi(2);
        let (lo, hi) = ((1e-3 * y2).ln(), (1e9 * y2).ln());
        let mut grid: Vec<f64> = (0..points).map(|i| (lo + (hi - lo) * i as f64 / (points - 1) as f64).exp()).collect();
        let (first, end) = (grid[0], grid[points - 1]);
        grid.extend(g.kinks().into_iter().filter(|&k| k > first && k < end));
        grid.sort_by(f64::total_cmp);
        grid.dedup();
        let g0 = g.at(0.0);
        let mut me = Self { g, fpt, kappa, g0, grid, a: Vec::new(), b: Vec::new() };
        let n = me.grid.len();
        let mut a = Vec::with_capacity(n);
        a.push(me.a_piece(0.0, me.grid[0]));
        for i in 1..n {
            let prev = a[i - 1];
            a.push(prev + me.a_piece(me.grid[i - 1], me.grid[i]));
        }
        let mut b = vec![0.0; n];
        let y = fpt.level();
        let s_max = y / me.grid[n - 1].sqrt();
        b[n - 1] = quad::integrate(
            |s| if s <= 0.0 { 0.0 } else { 2.0 * g.at(y * y / (s * s)) * crate::fpt::normal_pdf(s) },
            0.0,
            s_max,
            1e-16,
            1e-13,
        )
        .value;
        for i in (0..n - 1).rev() {
            b[i] = b[i + 1] + quad::integrate(|t| g.at(t) * fpt.pdf(t), me.grid[i], me.grid[i + 1], 1e-17, 1e-13).value;
        }
        me.a = a;
        me.b = b;
        me
    }

    fn weight(&self, t: f64) -> f64 {
        ((self.g.at(t) - self.g0) / self.kappa).exp()
    }

    fn a_piece(&self, lo: f64, hi: f64) -> f64 {
        quad::integrate(|t| self.fpt.pdf(t) * self.weight(t), lo, hi, 1e-17, 1e-13).value
    }

    /// `(A(z), B(z))` at an arbitrary `z`.
    fn at(&self, z: f64) -> (f64, f64) {
        if z <= 0.0 {
            return (0.0, self.b[0] + self.b_piece(0.0, self.grid[0]));
        }
        if z.is_infinite() {
            return (self.a[self.a.len() - 1] + self.a_tail(), 0.0);
        }
        let n = self.grid.len();
        if z >= self.grid[n - 1] {
            let y = self.fpt.level();
            let s_max = y / z.sqrt();
            let b = quad::integrate(
                |s| if s <= 0.0 { 0.0 } else { 2.0 * self.g.at(y * y / (s * s)) * crate::fpt::normal_pdf(s) },
                0.0,
                s_max,
                1e-16,
                1e-13,
            )
            .value;
            return (self.a[n - 1] + self.a_piece(self.grid[n - 1], z), b);
        }
        if z < self.grid[0] {
            return (self.a_piece(0.0, z), self.b[0] + self.b_piece(z, self.grid[0]));
        }
        let j = self.grid.partition_point(|&x| x <= z) - 1;
        let part = self.a_piece(self.grid[j], z);
        (self.a[j] + part, self.b[j] - self.b_piece(self.grid[j], z))
    }

    fn b_piece(&self, lo: f64, hi: f64) -> f64 {
        quad::integrate(|t| self.g.at(t) * self.fpt.pdf(t), lo, hi, 1e-17, 1e-13).value
    }

    fn a_tail(&self) -> f64 {
        let n = self.grid.len();
        let y = self.fpt.level();
        let s_max = y / self.grid[n - 1].sqrt();
        quad::integrate(
            |s| {
                if s <= 0.0 {
                    0.0
                } else {
                    2.0 * self.weight(y * y / (s * s)) * crate::fpt::normal_pdf(s)
                }
            },
            0.0,
            s_max,
            1e-17,
            1e-13,
        )
        .value
    }

    /// `Ũ(z) + R∞` and the normalizer `∫ f° e^{(g(s∧z) − g0)/κ} ds`.
    fn objective(&self, z: f64) -> (f64, f64) {
        let (a, b) = self.at(z);
        let gz = self.g.at(z);
        let wz = self.weight(z);
        let tail = if z.is_infinite() { 0.0 } else { self.fpt.sf(z) };
        let den = a + wz * tail;
        ((gz * a + wz * b) / den, den)
    }
}

/// Maximizes expected net profit `E[g(τ)] − E[prize]` without a deadline.
///
/// The optimum pays `H*(r) = R∞ + g(F⁻¹(r) ∧ t_b) − g(t_b)`: players race
/// while profit still falls and the reward flattens once it stops mattering.
pub fn max_net_profit(params: &ModelParams, floor: f64, g: &dyn ProfitCurve) -> Result<ProfitDesign> {
    params.validate()?;
    if params.horizon.is_finite() {
        return domain("net-profit design is solved for an infinite horizon only");
    }
    if !floor.is_finite() || !g.at_infinity().is_finite() || !g.at(0.0).is_finite() {
        return domain("profit and floor must be finite");
    }
    let kappa = params.kappa();
    let fpt = params.fpt();
    let pi = ProfitIntegrals::new(g, fpt, kappa, 10_000);
    check_profit_shape(g, &pi.grid)?;
    let grid = &pi.grid;
    let n = grid.len();
    let mut vals: Vec<f64> = Vec::with_capacity(n + 2);
    let mut pts: Vec<f64> = Vec::with_capacity(n + 2);
    pts.push(0.0);
    for &z in grid {
        pts.push(z);
    }
    pts.push(f64::INFINITY);
    for &z in &pts {
        vals.push(pi.objective(z).0);
    }
    let best = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tol = 1e-10 * (1.0 + best.abs());
    let mut maximizers = Vec::new();
    let mut prev_hit = false;
    for (i, &v) in vals.iter().enumerate() {
        let hit = v >= best - tol;
        if hit && !prev_hit {
            maximizers.push(pts[i]);
        }
        prev_hit = hit;
    }
    // a maximizer at the origin means no bonus window; prefer it on ties
    let i_best = if vals[0] >= best - tol { 0 } else { vals.iter().position(|&v| v == best).unwrap() };
    // golden-section refinement between the neighbours of the best grid point
    let mut z_star = pts[i_best];
    if i_best > 0 && i_best + 1 < pts.len() && pts[i_best + 1].is_finite() {
        let (mut lo, mut hi) = (pts[i_best - 1], pts[i_best + 1]);
        let phi = 0.5 * (5f64.sqrt() - 1.0);
        let mut c = hi - phi * (hi - lo);
        let mut d = lo + phi * (hi - lo);
        let (mut fc, mut fd) = (pi.objective(c).0, pi.objective(d).0);
        for _ in 0..200 {
            if hi - lo <= 1e-13 * hi {
                break;
            }
            if fc >= fd {
                hi = d;
                d = c;
                fd = fc;
                c = hi - phi * (hi - lo);
                fc = pi.objective(c).0;
            } else {
                lo = c;
                c = d;
                fc = fd;
                d = lo + phi * (hi - lo);
                fd = pi.objective(d).0;
            }
        }
        let cand = 0.5 * (lo + hi);
        if pi.objective(cand).0 >= best {
            z_star = cand;
        }
    }
    // first time the profit reaches its level at the maximizer
    let g_star = g.at(z_star);
    let t_b = if z_star.is_infinite() || z_star == 0.0 {
        z_star
    } else {
        let level_hit = |t: f64| g.at(t) <= g_star + 1e-12 * (1.0 + g_star.abs());
        let j = pts.iter().position(|&t| t.is_finite() && level_hit(t)).unwrap_or(0);
        if j == 0 {
            0.0
        } else {
            let (mut lo, mut hi) = (pts[j - 1], pts[j].min(z_star));
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if level_hit(mid) {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            hi
        }
    };
    let (obj, den) = pi.objective(t_b);
    let w_b = pi.weight(t_b);
    let scale = w_b / den;
    let net_profit = obj - floor;

    // reward on the ranks of the optimal law
    let g_b = g.at(t_b);
    let cdf = |t: f64| -> f64 {
        if t.is_infinite() {
            return 1.0;
        }
        let (a, _) = pi.at(t.min(t_b));
        let extra = if t > t_b { fpt.cdf(t) - fpt.cdf(t_b) } else { 0.0 };
        (scale * (a / w_b + extra)).min(1.0)
    };
    let mut ranks = vec![0.0];
    let mut values = vec![floor + g.at(0.0) - g_b];
    for &t in grid {
        ranks.push(cdf(t));
        values.push(floor + g.at(t.min(t_b)) - g_b);
    }
    ranks.push(1.0);
    values.push(floor);
    let reward = rank_reward_from_nodes(ranks, values, floor)?;
    let density = grid
        .iter()
        .step_by(50)
        .map(|&t| {
            let tilt = if t < t_b { pi.weight(t) / w_b } else { 1.0 };
            (t, scale * fpt.pdf(t) * tilt)
        })
        .collect();
    Ok(ProfitDesign {
        reward: reward.into(),
        net_profit,
        cutoff_time: t_b,
        maximizer: z_star,
        maximizers,
        scale,
        density,
    })
}

fn check_profit_shape(g: &dyn ProfitCurve, grid: &[f64]) -> Result<()> {
    let mut prev = g.at(0.0);
    for &t in grid {
        let v = g.at(t);
        if v > prev + 1e-12 * (1.0 + prev.abs()) {
            return domain(format!("profit increases near t = {t}"));
        }
        prev = v;
    }
    if g.at(0.0) - g.at_infinity() <= 1e-14 * (1.0 + g.at(0.0).abs()) {
        return domain("profit is constant; there is nothing to design");
    }
    Ok(())
}

/// Reduced objective `Ũ(z)`: net profit of the reward that discriminates
/// among completion times up to `z` and pays the floor afterwards.
pub fn net_profit_curve(params: &ModelParams, floor: f64, g: &dyn ProfitCurve, zs: &[f64]) -> Result<Vec<f64>> {
    params.validate()?;
    if params.horizon.is_finite() {
        return domain("net-profit design is solved for an infinite horizon only");
    }
    let pi = ProfitIntegrals::new(g, params.fpt(), params.kappa(), 2_000);
    Ok(zs.iter().map(|&z| pi.objective(z).0 - floor).collect())
}

/// Optimum of the auxiliary problem behind the quantile design: minimize
/// `J(h) = ∫_0^α h` over increasing `0 < h <= e^{−R∞/κ}` with
/// `∫_0^α −ln h <= (K − R∞(1 − α))/κ`. The constant
/// `h* = exp(−(K − R∞(1 − α))/(ακ))` is optimal by Jensen's inequality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AuxiliaryOptimum {
    pub level: f64,
    pub objective: f64,
}

pub fn auxiliary_optimum(alpha: f64, budget: f64, floor: f64, kappa: f64) -> Result<AuxiliaryOptimum> {
    check_alpha(alpha)?;
    check_budget(floor, budget)?;
    let level = (-(budget - floor * (1.0 - alpha)) / (alpha * kappa)).exp();
    Ok(AuxiliaryOptimum { level, objective: alpha * level })
}
