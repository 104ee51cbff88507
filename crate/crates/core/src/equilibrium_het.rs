//! Equilibrium for a finite mixture of player types under a step reward.
//!
//! Type `i` starts at `x0ᵢ`, pays `cᵢ a²` and has `κᵢ = 2cᵢσ²`. With rank
//! thresholds `r_1 < … < r_d` and quantile times `T_1 <= … <= T_{k0} <= T`,
//! the normalizers
//!
//! ```text
//! uᵢ = Σ_{k<=k0} e^{R_k/κᵢ} (Fᵢ(T_k) − Fᵢ(T_{k−1}))
//!      + e^{R_{k0+1}/κᵢ} (Fᵢ(T) − Fᵢ(T_{k0})) + e^{R∞/κᵢ} (1 − Fᵢ(T))
//! ```
//!
//! and the rank equations
//!
//! ```text
//! r_k − r_{k−1} = Σᵢ wᵢ e^{R_k/κᵢ} (Fᵢ(T_k) − Fᵢ(T_{k−1})) / uᵢ
//! ```
//!
//! characterize the equilibrium. For fixed `u` the rank equations determine
//! `T_1, T_2, …` one at a time, so the system is solved as a fixed point in
//! `ln u` of dimension equal to the number of types.

use crate::equilibrium_hom::{BoundarySchedule, Horizon, ModelParams};
use crate::error::{check_positive, domain, Error, Result};
use crate::fpt::FirstPassage;
use crate::reward::StepReward;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// One player type.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub x0: f64,
    pub cost: f64,
    pub weight: f64,
}

/// Finite population of player types sharing a volatility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationMix {
    pub atoms: Vec<Atom>,
    pub sigma: f64,
}

impl PopulationMix {
    pub fn new(atoms: Vec<Atom>, sigma: f64) -> Result<Self> {
        let mix = Self { atoms, sigma };
        mix.validate()?;
        Ok(mix)
    }

    /// A single type of unit weight.
    pub fn degenerate(x0: f64, cost: f64, sigma: f64) -> Result<Self> {
        Self::new(vec![Atom { x0, cost, weight: 1.0 }], sigma)
    }

    pub fn validate(&self) -> Result<()> {
        check_positive("sigma", self.sigma)?;
        if self.atoms.is_empty() {
            return domain("population needs at least one type");
        }
        for a in &self.atoms {
            check_positive("x0", a.x0)?;
            check_positive("cost", a.cost)?;
            check_positive("weight", a.weight)?;
        }
        let total: f64 = self.atoms.iter().map(|a| a.weight).sum();
        if (total - 1.0).abs() > 1e-12 {
            return domain(format!("type weights must sum to 1, got {total}"));
        }
        Ok(())
    }

    /// Parameters of type `i` as a homogeneous game.
    pub fn params(&self, i: usize, horizon: Horizon) -> Result<ModelParams> {
        let a = self.atoms[i];
        ModelParams::new(a.x0, self.sigma, a.cost, horizon)
    }

    fn kappa(&self, i: usize) -> f64 {
        2.0 * self.atoms[i].cost * self.sigma * self.sigma
    }
}

/// Completion rate and value of one type in equilibrium.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TypeOutcome {
    pub beta: f64,
    pub value: f64,
}

/// Probability that the population finishes in the top cell when everyone
/// finishing before the deadline is paid the top prize.
pub fn compute_a_t(mix: &PopulationMix, reward: &StepReward, t: f64) -> Result<f64> {
    mix.validate()?;
    check_positive("horizon", t)?;
    if t.is_infinite() {
        return domain("the feasibility quantity needs a finite deadline");
    }
    let top = reward.levels()[0];
    let mut acc = 0.0;
    for (i, a) in mix.atoms.iter().enumerate() {
        let f = FirstPassage::for_state(a.x0, mix.sigma)?.cdf(t);
        if f > 0.0 {
            let odds = ((reward.floor() - top) / mix.kappa(i)).exp() * (1.0 - f) / f;
            acc += a.weight / (1.0 + odds);
        }
    }
    Ok(acc)
}

/// Precomputed per-type data for the rank equations.
struct System<'a> {
    mix: &'a PopulationMix,
    fpt: Vec<FirstPassage>,
    /// `(R_k − R_1)/κᵢ` for `k = 1..=d+1`.
    ln_a: Vec<Vec<f64>>,
    /// `(R∞ − R_1)/κᵢ`.
    ln_a_floor: Vec<f64>,
    ranks: Vec<f64>,
    horizon: f64,
}

/// Quantile times reached by a forward sweep.
struct Sweep {
    times: Vec<f64>,
}

fn log_sum_exp(terms: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = terms.filter(|t| *t > f64::NEG_INFINITY).collect();
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

impl<'a> System<'a> {
    fn new(mix: &'a PopulationMix, reward: &StepReward, horizon: f64) -> Result<Self> {
        let levels = reward.levels();
        let mut fpt = Vec::new();
        let mut ln_a = Vec::new();
        let mut ln_a_floor = Vec::new();
        for (i, a) in mix.atoms.iter().enumerate() {
            let k = mix.kappa(i);
            fpt.push(FirstPassage::for_state(a.x0, mix.sigma)?);
            ln_a.push(levels.iter().map(|r| (r - levels[0]) / k).collect());
            ln_a_floor.push((reward.floor() - levels[0]) / k);
        }
        let mut ranks = vec![0.0];
        ranks.extend_from_slice(reward.thresholds());
        ranks.push(1.0);
        Ok(Self { mix, fpt, ln_a, ln_a_floor, ranks, horizon })
    }

    fn types(&self) -> usize {
        self.fpt.len()
    }

    fn d(&self) -> usize {
        self.ranks.len() - 2
    }

    fn cdf(&self, i: usize, t: f64) -> f64 {
        self.fpt[i].cdf(t)
    }

    /// Mass of type `i` finishing in `(a, b]`.
    fn mass(&self, i: usize, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        // the survival difference is more accurate once both cdfs are near one
        let fa = self.cdf(i, a);
        if fa > 0.5 {
            (self.fpt[i].sf(a) - self.fpt[i].sf(b)).max(0.0)
        } else {
            (self.cdf(i, b) - fa).max(0.0)
        }
    }

    /// Population share finishing in `(a, b]` while paid level `k` (0-based).
    fn share(&self, ln_u: &[f64], k: usize, a: f64, b: f64) -> f64 {
        (0..self.types())
            .map(|i| self.mix.atoms[i].weight * (self.ln_a[i][k] - ln_u[i]).exp() * self.mass(i, a, b))
            .sum()
    }

    /// Solves the rank equations in order until one cannot be met by the deadline.
    fn sweep(&self, ln_u: &[f64]) -> Sweep {
        let mut times = Vec::new();
        let mut prev = 0.0;
        for k in 1..=self.d() {
            let need = self.ranks[k] - self.ranks[k - 1];
            if self.share(ln_u, k - 1, prev, self.horizon) < need {
                break;
            }
            // bisect on s = t/(1 + t), which maps [0, ∞] to [0, 1]
            let to_t = |s: f64| if s >= 1.0 { f64::INFINITY } else { s / (1.0 - s) };
            let mut lo = prev / (1.0 + prev);
            let mut hi = if self.horizon.is_finite() { self.horizon / (1.0 + self.horizon) } else { 1.0 };
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if self.share(ln_u, k - 1, prev, to_t(mid)) < need {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let t = to_t(hi).min(self.horizon);
            times.push(t);
            prev = t;
        }
        Sweep { times }
    }

    /// `ln uᵢ − R_1/κᵢ` implied by the quantile times.
    fn ln_normalizers(&self, times: &[f64]) -> Vec<f64> {
        let k0 = times.len();
        (0..self.types())
            .map(|i| {
                let mut prev = 0.0;
                let mut terms = Vec::with_capacity(k0 + 2);
                for (k, &t) in times.iter().enumerate() {
                    terms.push(self.ln_a[i][k] + self.mass(i, prev, t).ln());
                    prev = t;
                }
                terms.push(self.ln_a[i][k0] + self.mass(i, prev, self.horizon).ln());
                if self.horizon.is_finite() {
                    terms.push(self.ln_a_floor[i] + self.fpt[i].sf(self.horizon).ln());
                }
                log_sum_exp(terms.into_iter())
            })
            .collect()
    }

    fn map(&self, ln_u: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let s = self.sweep(ln_u);
        let next = self.ln_normalizers(&s.times);
        (next, s.times)
    }

    fn gap(&self, ln_u: &[f64]) -> Vec<f64> {
        let (next, _) = self.map(ln_u);
        next.iter().zip(ln_u).map(|(a, b)| a - b).collect()
    }

    /// Quantiles of the population when nobody exerts effort.
    fn uncontrolled_times(&self) -> Vec<f64> {
        let mixture = |t: f64| -> f64 { (0..self.types()).map(|i| self.mix.atoms[i].weight * self.cdf(i, t)).sum() };
        let mut times = Vec::new();
        for k in 1..=self.d() {
            let r = self.ranks[k];
            if mixture(self.horizon) < r {
                break;
            }
            let (mut lo, mut hi) =
                (0.0_f64, if self.horizon.is_finite() { self.horizon / (1.0 + self.horizon) } else { 1.0 });
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if mixture(mid / (1.0 - mid)) < r {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            times.push((hi / (1.0 - hi)).min(self.horizon));
        }
        times
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for c in col..n {
                a[row][c] -= f * a[col][c];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|c| a[row][c] * x[c]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

const FIXED_POINT_TOL: f64 = 1e-13;
const MAX_ITER: usize = 300;

/// Newton iteration on `Φ(ℓ) − ℓ = 0` with backtracking and a damped fallback.
fn solve_fixed_point(sys: &System, start: Vec<f64>) -> Result<Vec<f64>> {
    let n = start.len();
    let mut x = start;
    let mut g = sys.gap(&x);
    for _ in 0..MAX_ITER {
        let norm = max_abs(&g);
        if norm < FIXED_POINT_TOL {
            return Ok(x);
        }
        let h = 1e-7;
        let mut jac = vec![vec![0.0; n]; n];
        for j in 0..n {
            let mut xp = x.clone();
            xp[j] += h;
            let gp = sys.gap(&xp);
            for i in 0..n {
                jac[i][j] = (gp[i] - g[i]) / h;
            }
        }
        let step = solve_linear(jac, g.iter().map(|v| -v).collect());
        let mut accepted = false;
        if let Some(step) = step.filter(|s| s.iter().all(|v| v.is_finite())) {
            let mut lambda = 1.0;
            for _ in 0..40 {
                let trial: Vec<f64> = x.iter().zip(&step).map(|(a, s)| a + lambda * s).collect();
                let gt = sys.gap(&trial);
                if max_abs(&gt) < norm {
                    x = trial;
                    g = gt;
                    accepted = true;
                    break;
                }
                lambda *= 0.5;
            }
        }
        if !accepted {
            let trial: Vec<f64> = x.iter().zip(&g).map(|(a, d)| a + 0.5 * d).collect();
            let gt = sys.gap(&trial);
            if max_abs(&gt) >= norm && norm < 1e-10 {
                // stalled at rounding level
                return Ok(x);
            }
            x = trial;
            g = gt;
        }
    }
    Err(Error::Convergence(format!("heterogeneous fixed point did not converge; last residuals {g:?}")))
}

/// Equilibrium of a heterogeneous population.
#[derive(Debug, Clone, Serialize)]
pub struct HetEquilibrium {
    mix: PopulationMix,
    reward: StepReward,
    horizon: f64,
    /// Finite quantile times `T_1, …, T_{k0}`.
    times: Vec<f64>,
    /// `ln uᵢ − R_1/κᵢ`.
    ln_norm: Vec<f64>,
    per_type: Vec<TypeOutcome>,
    beta: f64,
    welfare: f64,
    a_t: Option<f64>,
    max_residual: f64,
    restart_spread: f64,
    restarts_agree: bool,
}

/// Number of random restarts used to probe for other fixed points.
pub const RESTARTS: usize = 5;
const RESTART_AGREEMENT: f64 = 1e-6;

/// Solves the heterogeneous equilibrium for a step reward.
pub fn solve_het(mix: &PopulationMix, reward: &StepReward, horizon: Horizon, seed: u64) -> Result<HetEquilibrium> {
    mix.validate()?;
    let t = horizon.time();
    if !(t > 0.0) {
        return domain(format!("horizon must be positive, got {t}"));
    }
    let sys = System::new(mix, reward, t)?;
    let a_t = if t.is_finite() { Some(compute_a_t(mix, reward, t)?) } else { None };
    let all_late = matches!(a_t, Some(a) if reward.thresholds().first().is_some_and(|&r1| a < r1));
    let (ln_norm, times, spread) = if all_late || sys.d() == 0 {
        let times = Vec::new();
        (sys.ln_normalizers(&times), times, 0.0)
    } else {
        let start = sys.ln_normalizers(&sys.uncontrolled_times());
        let main = solve_fixed_point(&sys, start.clone())?;
        let starts: Vec<Vec<f64>> = (0..RESTARTS)
            .map(|r| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (r as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
                start.iter().map(|v| v + rng.random_range(-1.5..1.5)).collect()
            })
            .collect();
        let others: Vec<Option<Vec<f64>>> = starts.into_par_iter().map(|s| solve_fixed_point(&sys, s).ok()).collect();
        let (_, base_times) = sys.map(&main);
        let mut spread: f64 = 0.0;
        for o in others.iter().flatten() {
            let (_, tt) = sys.map(o);
            if tt.len() != base_times.len() {
                spread = f64::INFINITY;
            } else {
                for (a, b) in tt.iter().zip(&base_times) {
                    spread = spread.max((a - b).abs());
                }
            }
        }
        let (next, times) = sys.map(&main);
        (next, times, spread)
    };
    let levels = reward.levels();
    let k0 = times.len();
    let mut per_type = Vec::with_capacity(sys.types());
    for i in 0..sys.types() {
        let kappa = mix.kappa(i);
        let late = if t.is_finite() { (sys.ln_a_floor[i] + sys.fpt[i].sf(t).ln() - ln_norm[i]).exp() } else { 0.0 };
        per_type.push(TypeOutcome { beta: 1.0 - late, value: levels[0] + kappa * ln_norm[i] });
    }
    let beta = per_type.iter().zip(&mix.atoms).map(|(o, a)| a.weight * o.beta).sum();
    let welfare = per_type.iter().zip(&mix.atoms).map(|(o, a)| a.weight * o.value).sum();
    let mut eq = HetEquilibrium {
        mix: mix.clone(),
        reward: reward.clone(),
        horizon: t,
        times,
        ln_norm,
        per_type,
        beta,
        welfare,
        a_t,
        max_residual: 0.0,
        restart_spread: spread,
        restarts_agree: spread <= RESTART_AGREEMENT,
    };
    eq.max_residual = max_abs(&eq.residuals());
    let slack = eq.cutoff_slack();
    if eq.max_residual > 1e-9 || slack.0 < -1e-9 || slack.1 < -1e-9 {
        return Err(Error::Convergence(format!(
            "heterogeneous solution inconsistent: residual {:e}, cutoff slack {slack:?} at k0 = {k0}",
            eq.max_residual
        )));
    }
    Ok(eq)
}

impl HetEquilibrium {
    pub fn mix(&self) -> &PopulationMix {
        &self.mix
    }

    pub fn reward(&self) -> &StepReward {
        &self.reward
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Quantile times for every threshold; `None` marks a threshold not reached by the deadline.
    pub fn quantiles(&self) -> Vec<Option<f64>> {
        let d = self.reward.thresholds().len();
        (0..d).map(|k| self.times.get(k).copied()).collect()
    }

    /// Number of thresholds reached by the deadline.
    pub fn k0(&self) -> usize {
        self.times.len()
    }

    pub fn per_type(&self) -> &[TypeOutcome] {
        &self.per_type
    }

    /// Aggregate completion rate.
    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// `Σ wᵢ Vᵢ`.
    pub fn welfare(&self) -> f64 {
        self.welfare
    }

    /// Feasibility quantity, `None` for an infinite deadline.
    pub fn a_t(&self) -> Option<f64> {
        self.a_t
    }

    pub fn max_residual(&self) -> f64 {
        self.max_residual
    }

    /// Largest quantile difference between the solution and the random restarts.
    pub fn restart_spread(&self) -> f64 {
        self.restart_spread
    }

    pub fn restarts_agree(&self) -> bool {
        self.restarts_agree
    }

    fn system(&self) -> System<'_> {
        System::new(&self.mix, &self.reward, self.horizon).expect("validated at solve time")
    }

    /// Residual of each rank equation at the returned quantiles.
    pub fn residuals(&self) -> Vec<f64> {
        let sys = self.system();
        let mut prev = 0.0;
        self.times
            .iter()
            .enumerate()
            .map(|(k, &t)| {
                let r = sys.ranks[k + 1] - sys.ranks[k] - sys.share(&self.ln_norm, k, prev, t);
                prev = t;
                r
            })
            .collect()
    }

    /// Margins `(q, r_{k0+1} − r_{k0} − q)` of the cutoff condition, where `q`
    /// is the share finishing between `T_{k0}` and the deadline; both are
    /// non-negative in equilibrium.
    pub fn cutoff_slack(&self) -> (f64, f64) {
        let sys = self.system();
        let k0 = self.k0();
        let last = self.times.last().copied().unwrap_or(0.0);
        let q = sys.share(&self.ln_norm, k0, last, self.horizon);
        let room = sys.ranks[k0 + 1] - sys.ranks[k0];
        (q, room - q)
    }

    /// Aggregate completion-time distribution at `t`.
    pub fn cdf(&self, t: f64) -> f64 {
        let sys = self.system();
        let t = t.min(self.horizon);
        let mut prev = 0.0;
        let mut acc = 0.0;
        for (k, &tk) in self.times.iter().enumerate() {
            acc += sys.share(&self.ln_norm, k, prev, tk.min(t));
            prev = tk;
        }
        acc + sys.share(&self.ln_norm, self.k0(), prev, t)
    }

    /// Payment schedule in completion time seen by type `i`.
    pub fn schedule(&self, i: usize) -> Result<BoundarySchedule> {
        if i >= self.mix.atoms.len() {
            return domain(format!("type index {i} out of range"));
        }
        let mut breaks = self.times.clone();
        breaks.push(self.horizon);
        let levels = self.reward.levels()[..=self.k0()].to_vec();
        BoundarySchedule::new(breaks, levels, self.reward.floor(), self.mix.kappa(i), self.mix.sigma)
    }

    /// Optimal effort of type `i` at time `t` and distance `x`.
    pub fn effort(&self, i: usize, t: f64, x: f64) -> Result<f64> {
        Ok(self.schedule(i)?.effort(t, x))
    }
}

/// Solves [`solve_het`] for `h.discretize(d)` over several `d`, for stability checks.
pub fn refine_discretization(
    mix: &PopulationMix,
    reward: &crate::reward::RankReward,
    horizon: Horizon,
    bins: &[usize],
    seed: u64,
) -> Result<Vec<(usize, HetEquilibrium)>> {
    bins.par_iter().map(|&d| Ok((d, solve_het(mix, &reward.discretize(d)?, horizon, seed)?))).collect()
}
