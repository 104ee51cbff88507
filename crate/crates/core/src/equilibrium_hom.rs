//! Mean-field equilibrium for a population of identical players.
//!
//! Each player controls `dX = −a dt + σ dW` from `X_0 = x0`, pays `c a²` per unit
//! time and is rewarded by rank on reaching zero before the deadline `T`. With
//! `κ = 2cσ²`, the equilibrium completion rate `β` solves
//!
//! ```text
//! F°(T) = (1 − F°(T))/(1 − β) · ∫_0^β exp((R∞ − H(z))/κ) dz
//! ```
//!
//! where `F°` is the law of the uncontrolled hitting time. Quantiles, value and
//! the density follow in closed form; the value function and effort come from
//! the Cole–Hopf transform `u = exp(v/κ)`, which solves the backward heat
//! equation with terminal data given by the equilibrium reward schedule.

use crate::error::{check_positive, domain, Error, Result};
use crate::fpt::{self, FirstPassage};
use crate::quad;
use crate::reward::{ExpCumulative, RankReward};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Deadline of the tournament.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Horizon {
    Finite(f64),
    Infinite,
}

impl Horizon {
    /// The deadline as a number, infinite for [`Horizon::Infinite`].
    pub fn time(self) -> f64 {
        match self {
            Horizon::Finite(t) => t,
            Horizon::Infinite => f64::INFINITY,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Horizon::Finite(_))
    }

    pub fn from_time(t: f64) -> Self {
        if t.is_infinite() {
            Horizon::Infinite
        } else {
            Horizon::Finite(t)
        }
    }
}

impl Serialize for Horizon {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Horizon::Finite(t) => s.serialize_f64(*t),
            Horizon::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Horizon {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(t) => Ok(Horizon::from_time(t)),
            Raw::Text(s) => match s.trim().to_ascii_lowercase().as_str() {
                "inf" | "infinity" | "∞" => Ok(Horizon::Infinite),
                other => other
                    .parse::<f64>()
                    .map(Horizon::from_time)
                    .map_err(|_| serde::de::Error::custom(format!("invalid horizon {s:?}"))),
            },
        }
    }
}

/// Model primitives shared by every player.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Initial distance to completion.
    pub x0: f64,
    /// Volatility of progress.
    pub sigma: f64,
    /// Effort cost coefficient `c` in `c a²`.
    pub cost: f64,
    pub horizon: Horizon,
}

impl ModelParams {
    pub fn new(x0: f64, sigma: f64, cost: f64, horizon: Horizon) -> Result<Self> {
        let p = Self { x0, sigma, cost, horizon };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        check_positive("x0", self.x0)?;
        check_positive("sigma", self.sigma)?;
        check_positive("cost", self.cost)?;
        if let Horizon::Finite(t) = self.horizon {
            check_positive("horizon", t)?;
        }
        Ok(())
    }

    /// `κ = 2cσ²`, the scale of the exponential transform.
    pub fn kappa(&self) -> f64 {
        2.0 * self.cost * self.sigma * self.sigma
    }

    /// Uncontrolled hitting time of zero from `x0`.
    pub fn fpt(&self) -> FirstPassage {
        FirstPassage::for_state(self.x0, self.sigma).expect("validated parameters")
    }

    /// `F°(T)`, one when the horizon is infinite.
    pub fn baseline_completion(&self) -> f64 {
        self.fpt().cdf(self.horizon.time())
    }
}

/// Piecewise-constant payment as a function of completion time.
///
/// Pays `levels[j]` for completion in `[breaks[j-1], breaks[j])` and `floor`
/// after the last break. The fields `u`, `v` and the effort then have closed
/// forms in terms of hitting-time distributions.
#[derive(Debug, Clone)]
pub struct BoundarySchedule {
    breaks: Vec<f64>,
    levels: Vec<f64>,
    floor: f64,
    kappa: f64,
    sigma: f64,
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

impl BoundarySchedule {
    pub fn new(breaks: Vec<f64>, levels: Vec<f64>, floor: f64, kappa: f64, sigma: f64) -> Result<Self> {
        if breaks.len() != levels.len() || breaks.is_empty() {
            return domain("a schedule needs one level per break");
        }
        if breaks.windows(2).any(|w| w[1] < w[0]) || breaks[0] < 0.0 {
            return domain("schedule breaks must be non-decreasing and non-negative");
        }
        Ok(Self { breaks, levels, floor, kappa, sigma })
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    /// Payment for completing at time `s`.
    pub fn payment(&self, s: f64) -> f64 {
        let j = self.breaks.partition_point(|&b| b <= s);
        if j < self.levels.len() {
            self.levels[j]
        } else if s <= self.breaks[self.breaks.len() - 1] {
            self.levels[self.levels.len() - 1]
        } else {
            self.floor
        }
    }

    /// `ln u(t, x)` where `u = E[exp(payment(t + τ_{x/σ})/κ)]`.
    pub fn ln_u(&self, t: f64, x: f64) -> f64 {
        if x <= 0.0 {
            return self.payment(t) / self.kappa;
        }
        let g = FirstPassage::for_state(x, self.sigma).expect("positive state");
        let big_g = |s: f64| if s <= t { 0.0 } else { g.cdf(s - t) };
        let mut terms = Vec::with_capacity(self.breaks.len() + 1);
        let mut prev = 0.0;
        for (j, &s) in self.breaks.iter().enumerate() {
            let cur = big_g(s);
            let dg = cur - prev;
            if dg > 0.0 {
                terms.push(self.levels[j] / self.kappa + dg.ln());
            }
            prev = cur;
        }
        let rest = 1.0 - prev;
        if rest > 0.0 {
            terms.push(self.floor / self.kappa + rest.ln());
        }
        log_sum_exp(&terms)
    }

    pub fn u(&self, t: f64, x: f64) -> f64 {
        self.ln_u(t, x).exp()
    }

    /// Value function `v = κ ln u`.
    pub fn value(&self, t: f64, x: f64) -> f64 {
        self.kappa * self.ln_u(t, x)
    }

    /// `u_x / u`.
    pub fn ln_u_dx(&self, t: f64, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let lu = self.ln_u(t, x);
        let mut acc = 0.0;
        for (j, &s) in self.breaks.iter().enumerate() {
            if s <= t || s.is_infinite() {
                continue;
            }
            let next = if j + 1 < self.levels.len() { self.levels[j + 1] } else { self.floor };
            let gap = (next - self.levels[j]) / self.kappa;
            if gap >= 0.0 {
                continue;
            }
            let lt = self.levels[j] / self.kappa + (-gap.exp_m1()).ln() + fpt::ln_abs_cdf_dx(s - t, x, self.sigma);
            acc -= (lt - lu).exp();
        }
        acc
    }

    /// Optimal effort `a* = −σ² u_x/u`.
    pub fn effort(&self, t: f64, x: f64) -> f64 {
        -self.sigma * self.sigma * self.ln_u_dx(t, x)
    }
}

/// Equilibrium of the homogeneous game.
#[derive(Debug, Clone)]
pub struct HomEquilibrium {
    params: ModelParams,
    reward: RankReward,
    ec: ExpCumulative,
    f_t: f64,
    beta: f64,
    value: f64,
    i_beta: f64,
    residual: f64,
    schedule: Option<BoundarySchedule>,
}

/// Solves the homogeneous equilibrium for a decreasing rank reward.
pub fn solve_hom(params: &ModelParams, reward: &RankReward) -> Result<HomEquilibrium> {
    params.validate()?;
    let kappa = params.kappa();
    let ec = reward.exp_cumulative(kappa);
    let floor = reward.floor();
    let shift = (floor - ec.h_min()) / kappa;
    let f_t = params.baseline_completion();
    let (beta, value, i_beta, residual) = match params.horizon {
        Horizon::Infinite => {
            let total = ec.total();
            (1.0, ec.h_min() - kappa * total.ln(), total, 0.0)
        }
        Horizon::Finite(_) if f_t <= 0.0 => (0.0, floor, 0.0, 0.0),
        Horizon::Finite(_) => {
            let target = f_t.ln() - (-f_t).ln_1p() - shift;
            let g = |b: f64| ec.integral(b).ln() - (-b).ln_1p() - target;
            let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
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
            let beta = if g(hi).abs() < g(lo).abs() { hi } else { lo };
            if !(beta > 0.0 && beta < 1.0) {
                return Err(Error::Convergence(format!("completion rate bisection ended at {beta}")));
            }
            let i_beta = ec.integral(beta);
            let residual = f_t * (-g(beta).exp_m1());
            let value = floor + kappa * ((-f_t).ln_1p() - (-beta).ln_1p());
            (beta, value, i_beta, residual)
        }
    };
    let mut eq = HomEquilibrium {
        params: *params,
        reward: reward.clone(),
        ec,
        f_t,
        beta,
        value,
        i_beta,
        residual,
        schedule: None,
    };
    if let RankReward::Step(step) = reward {
        let mut breaks = Vec::new();
        let mut levels = Vec::new();
        for (k, &r) in step.thresholds().iter().enumerate() {
            match eq.quantile(r) {
                Some(t) if t.is_finite() && r < beta => {
                    breaks.push(t);
                    levels.push(step.levels()[k]);
                }
                _ => {
                    levels.push(step.levels()[k]);
                    break;
                }
            }
        }
        if levels.len() == breaks.len() {
            levels.push(step.levels()[breaks.len()]);
        }
        breaks.push(params.horizon.time());
        eq.schedule = Some(BoundarySchedule::new(breaks, levels, floor, kappa, params.sigma)?);
    }
    Ok(eq)
}

impl HomEquilibrium {
    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn reward(&self) -> &RankReward {
        &self.reward
    }

    /// Equilibrium completion rate `β = F_μ(T)`.
    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Equilibrium value `V = v(0, x0)`.
    pub fn value(&self) -> f64 {
        self.value
    }

    /// Residual of the completion-rate equation at the returned `β`.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// `F°(T)`.
    pub fn baseline_completion(&self) -> f64 {
        self.f_t
    }

    /// Closed-form payment schedule, available for step rewards.
    pub fn schedule(&self) -> Option<&BoundarySchedule> {
        self.schedule.as_ref()
    }

    /// Time by which a fraction `r` of players is done; `None` if that never
    /// happens before the deadline.
    pub fn quantile(&self, r: f64) -> Option<f64> {
        if r <= 0.0 {
            return Some(0.0);
        }
        let fpt = self.params.fpt();
        match self.params.horizon {
            Horizon::Infinite => {
                if r >= 1.0 {
                    return Some(f64::INFINITY);
                }
                Some(fpt.quantile(self.ec.integral(r) / self.ec.total()))
            }
            Horizon::Finite(t) => {
                if r > self.beta || self.beta == 0.0 {
                    return None;
                }
                let p = (self.f_t * self.ec.integral(r) / self.i_beta).min(self.f_t);
                Some(fpt.quantile(p).min(t))
            }
        }
    }

    /// Equilibrium distribution function of completion times.
    pub fn cdf(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let f0 = self.params.fpt().cdf(t);
        match self.params.horizon {
            Horizon::Infinite => self.ec.inverse(self.ec.total() * f0),
            Horizon::Finite(big_t) => {
                if t >= big_t {
                    self.beta
                } else if self.f_t <= 0.0 {
                    0.0
                } else {
                    self.ec.inverse(self.i_beta * f0 / self.f_t).min(self.beta)
                }
            }
        }
    }

    /// Density of completion times on `(0, T)`.
    pub fn density(&self, t: f64) -> f64 {
        if t <= 0.0 || t >= self.params.horizon.time() || self.f_t <= 0.0 {
            return 0.0;
        }
        let f0 = self.params.fpt().pdf(t);
        let r = self.cdf(t);
        let scale = match self.params.horizon {
            Horizon::Infinite => self.ec.total(),
            Horizon::Finite(_) => self.i_beta / self.f_t,
        };
        f0 * scale / self.ec.integrand(r)
    }

    /// Likelihood ratio `ζ(t) = u(t, 0)/u(0, x0)` of the equilibrium law against
    /// the uncontrolled one, on `[0, T]`.
    pub fn zeta(&self, t: f64) -> f64 {
        ((self.reward_at_time(t) - self.value) / self.params.kappa()).exp()
    }

    /// Payment `R_μ(t)` for completing at time `t`.
    pub fn reward_at_time(&self, t: f64) -> f64 {
        if t > self.params.horizon.time() {
            return self.reward.floor();
        }
        if let Some(s) = &self.schedule {
            return s.payment(t);
        }
        self.reward.eval(self.cdf(t))
    }

    /// `E[∫_0^{τ∧T} a_t dt] = x0 (β − F°(T))/(1 − F°(T))`; undefined without a deadline.
    pub fn expected_effort(&self) -> Option<f64> {
        match self.params.horizon {
            Horizon::Infinite => None,
            Horizon::Finite(_) => Some(self.params.x0 * (self.beta - self.f_t) / (1.0 - self.f_t)),
        }
    }

    /// `ln u(t, x)` of the Cole–Hopf transform.
    pub fn ln_u(&self, t: f64, x: f64) -> f64 {
        match &self.schedule {
            Some(s) => s.ln_u(t, x),
            None => self.smooth_field(t, x).0,
        }
    }

    pub fn u(&self, t: f64, x: f64) -> f64 {
        self.ln_u(t, x).exp()
    }

    /// Value function `v(t, x) = κ ln u(t, x)`.
    pub fn value_field(&self, t: f64, x: f64) -> f64 {
        self.params.kappa() * self.ln_u(t, x)
    }

    /// Optimal feedback effort `a*(t, x) = −σ² u_x/u`.
    pub fn effort(&self, t: f64, x: f64) -> f64 {
        match &self.schedule {
            Some(s) => s.effort(t, x),
            None => -self.params.sigma.powi(2) * self.smooth_field(t, x).1,
        }
    }

    /// `(v(t, x), a*(t, x))` from a single evaluation of the field.
    pub fn value_and_effort(&self, t: f64, x: f64) -> (f64, f64) {
        let kappa = self.params.kappa();
        let sigma2 = self.params.sigma.powi(2);
        match &self.schedule {
            Some(s) => (kappa * s.ln_u(t, x), s.effort(t, x)),
            None => {
                let (ln_u, dx) = self.smooth_field(t, x);
                (kappa * ln_u, -sigma2 * dx)
            }
        }
    }

    /// `(ln u, u_x/u)` by quadrature over `τ = y²/Z²`, `Z` half-normal.
    fn smooth_field(&self, t: f64, x: f64) -> (f64, f64) {
        let kappa = self.params.kappa();
        let floor = self.reward.floor();
        let big_t = self.params.horizon.time();
        if x <= 0.0 {
            return (self.reward_at_time(t) / kappa, 0.0);
        }
        if t >= big_t {
            return (floor / kappa, 0.0);
        }
        let top = self.reward.max_level().max(floor);
        let y = x / self.params.sigma;
        let z_t = if big_t.is_finite() { y / (big_t - t).sqrt() } else { 0.0 };
        let w_floor = ((floor - top) / kappa).exp();
        let mass0 = 1.0 - fpt::normal_sf(z_t) * 2.0;
        let slope0 = 2.0 * z_t * fpt::normal_pdf(z_t);
        let weight = |z: f64| {
            if z <= 0.0 {
                return 0.0;
            }
            let s = t + y * y / (z * z);
            ((self.reward.eval(self.cdf(s)) - top) / kappa).exp()
        };
        // the half-normal tail beyond z_t decays on the scale 1/z_t
        let width = 1.0 / z_t.max(1.0);
        let mut points: Vec<f64> = [0.0, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0].iter().map(|k| z_t + k * width).collect();
        if points[points.len() - 1] < z_t + 40.0 {
            points.push(z_t + 40.0);
        }
        // the interpolated reward has kinks at its grid ranks
        if let RankReward::Smooth(h) = &self.reward {
            let r_lo = self.cdf(t);
            for &rho in h.grid() {
                if rho <= r_lo {
                    continue;
                }
                match self.quantile(rho) {
                    Some(s) if s > t && s < big_t => points.push(y / (s - t).sqrt()),
                    _ => break,
                }
            }
            points.sort_by(f64::total_cmp);
            points.dedup();
        }
        let m = quad::integrate_pieces(|z| 2.0 * weight(z) * fpt::normal_pdf(z), &points, 0.0, 1e-12).value;
        let total = w_floor * mass0 + m;
        // the integrand changes sign, so its accuracy is measured against `total`
        let d = quad::integrate_pieces(
            |z| 2.0 * weight(z) * (1.0 - z * z) * fpt::normal_pdf(z),
            &points,
            1e-13 * total,
            1e-12,
        )
        .value;
        let ln_u = top / kappa + total.ln();
        let dx = (w_floor * slope0 + d) / (x * total);
        (ln_u, dx)
    }
}

/// Equilibrium when the reward is scaled by `δ_k` on successive time windows.
#[derive(Debug, Clone)]
pub struct StagedEquilibrium {
    params: ModelParams,
    stage_ends: Vec<f64>,
    betas: Vec<f64>,
    value: f64,
    ratio: f64,
    stages: Vec<(ExpCumulative, f64)>,
}

/// Solves the game where completion in `(T_{k−1}, T_k]` pays `δ_k H(r)`.
///
/// `stage_ends` must increase and end at the deadline in `params`.
pub fn solve_staged(
    params: &ModelParams,
    reward: &RankReward,
    stage_ends: &[f64],
    multipliers: &[f64],
) -> Result<StagedEquilibrium> {
    params.validate()?;
    let big_t = match params.horizon {
        Horizon::Finite(t) => t,
        Horizon::Infinite => return domain("staged rewards need a finite deadline"),
    };
    let n = stage_ends.len();
    if n == 0 || multipliers.len() != n {
        return domain("need one multiplier per stage");
    }
    if stage_ends.windows(2).any(|w| w[1] <= w[0]) || stage_ends[0] <= 0.0 {
        return domain("stage ends must be positive and increasing");
    }
    if (stage_ends[n - 1] - big_t).abs() > 1e-12 * big_t {
        return domain("the last stage must end at the deadline");
    }
    let kappa = params.kappa();
    let floor = reward.floor();
    let mut stages = Vec::with_capacity(n);
    for &delta in multipliers {
        let scaled = reward.scaled(delta)?;
        let ec = scaled.exp_cumulative(kappa);
        let shift = (floor - ec.h_min()) / kappa;
        stages.push((ec, shift));
    }
    let fpt = params.fpt();
    let alphas: Vec<f64> = stage_ends.iter().map(|&t| fpt.cdf(t)).collect();
    let alpha_n = alphas[n - 1];
    if alpha_n <= 0.0 {
        return domain("uncontrolled completion probability underflows at the deadline");
    }

    // Inner sweep for a trial β_n: stage boundaries and the log-residual of the last stage.
    let sweep = |b: f64| -> (Vec<f64>, f64) {
        let ln_ratio = (-alpha_n).ln_1p() - (-b).ln_1p();
        let mut betas = Vec::with_capacity(n);
        let mut prev = 0.0;
        let mut prev_alpha = 0.0;
        for (k, (ec, shift)) in stages.iter().enumerate() {
            let d_alpha = alphas[k] - prev_alpha;
            prev_alpha = alphas[k];
            let ln_target = d_alpha.ln() - ln_ratio - shift;
            if k + 1 == n {
                let avail = ec.integral(b) - ec.integral(prev);
                betas.push(b);
                let res = if avail > 0.0 { avail.ln() - ln_target } else { f64::NEG_INFINITY };
                return (betas, res);
            }
            let avail = ec.integral(b) - ec.integral(prev);
            let next = if avail <= 0.0 || ln_target >= avail.ln() {
                b
            } else {
                ec.inverse(ec.integral(prev) + ln_target.exp()).min(b)
            };
            betas.push(next);
            prev = next;
        }
        unreachable!("loop returns on the last stage")
    };

    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sweep(mid).1 < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let b = if sweep(hi).1.abs() < sweep(lo).1.abs() { hi } else { lo };
    if !(b > 0.0 && b < 1.0) {
        return Err(Error::Convergence(format!("staged completion rate bisection ended at {b}")));
    }
    let (betas, _) = sweep(b);
    let ln_ratio = (-alpha_n).ln_1p() - (-b).ln_1p();
    Ok(StagedEquilibrium {
        params: *params,
        stage_ends: stage_ends.to_vec(),
        betas,
        value: floor + kappa * ln_ratio,
        ratio: ln_ratio.exp(),
        stages,
    })
}

impl StagedEquilibrium {
    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn stage_ends(&self) -> &[f64] {
        &self.stage_ends
    }

    /// Ranks reached at the end of each stage; the last is the completion rate.
    pub fn stage_ranks(&self) -> &[f64] {
        &self.betas
    }

    pub fn beta(&self) -> f64 {
        self.betas[self.betas.len() - 1]
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn quantile(&self, r: f64) -> Option<f64> {
        if r <= 0.0 {
            return Some(0.0);
        }
        if r > self.beta() {
            return None;
        }
        let mut prev = 0.0_f64;
        let mut p = 0.0;
        for ((ec, shift), &bk) in self.stages.iter().zip(&self.betas) {
            let (lo, hi) = (prev.min(r), bk.min(r));
            p += shift.exp() * (ec.integral(hi) - ec.integral(lo));
            prev = bk;
        }
        let big_t = self.params.horizon.time();
        Some(self.params.fpt().quantile(self.ratio * p).min(big_t))
    }
}
