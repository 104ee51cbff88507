#![allow(dead_code)]

use mft_core::equilibrium_het::{Atom, PopulationMix};
use mft_core::{Horizon, ModelParams, RankReward, SmoothReward, StepReward};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `x0 = 1`, `σ = 0.25`, `c = 1`.
pub fn bench(horizon: Horizon) -> ModelParams {
    ModelParams::new(1.0, 0.25, 1.0, horizon).unwrap()
}

pub fn quadratic(scale: f64) -> RankReward {
    SmoothReward::from_fn(|r| scale * (1.0 - r).powi(2), 4000, 0.0).unwrap().into()
}

/// `(T, Q1, median, Q3, β, V)`; `NaN` marks a quartile beyond the deadline.
pub const QUADRATIC_SIX: [(f64, f64, f64, f64, f64, f64); 7] = [
    (0.5, 0.281, f64::NAN, f64::NAN, 0.449, 0.074),
    (1.0, 0.285, 0.613, f64::NAN, 0.619, 0.121),
    (2.0, 0.289, 0.630, f64::NAN, 0.736, 0.166),
    (5.0, 0.293, 0.649, 2.424, 0.834, 0.215),
    (10.0, 0.295, 0.658, 2.545, 0.881, 0.237),
    (100.0, 0.296, 0.666, 2.661, 0.960, 0.256),
    (f64::INFINITY, 0.296, 0.667, 2.667, 1.0, 0.257),
];

/// Mixtures over `(x0, c, weight)` with `β, β_AD, β_DA, V_AD, V_DA, welfare`
/// for `15(1 − r)²`, `T = 1`, `σ = 0.25`; `NaN` marks an absent group.
pub struct MixCase {
    pub atoms: &'static [(f64, f64, f64)],
    pub beta: f64,
    pub beta_ad: f64,
    pub beta_da: f64,
    pub v_ad: f64,
    pub v_da: f64,
    pub welfare: f64,
}

const N: f64 = f64::NAN;

pub const QUADRATIC_FIFTEEN_MIXES: [MixCase; 11] = [
    MixCase {
        atoms: &[(1.0, 1.0, 1.0)],
        beta: 0.759,
        beta_ad: 0.759,
        beta_da: N,
        v_ad: 0.178,
        v_da: N,
        welfare: 0.178,
    },
    MixCase {
        atoms: &[(1.0, 1.0, 0.8), (2.0, 1.0, 0.2)],
        beta: 0.738,
        beta_ad: 0.922,
        beta_da: 0.0,
        v_ad: 0.319,
        v_da: 0.0,
        welfare: 0.255,
    },
    MixCase {
        atoms: &[(1.0, 1.0, 0.6), (2.0, 1.0, 0.4)],
        beta: 0.600,
        beta_ad: 1.0,
        beta_da: 0.0,
        v_ad: 1.701,
        v_da: 0.0,
        welfare: 1.020,
    },
    MixCase {
        atoms: &[(1.0, 1.0, 0.4), (2.0, 1.0, 0.6)],
        beta: 0.498,
        beta_ad: 1.0,
        beta_da: 0.164,
        v_ad: 4.276,
        v_da: 0.022,
        welfare: 1.724,
    },
    MixCase {
        atoms: &[(1.0, 1.0, 0.2), (2.0, 1.0, 0.8)],
        beta: 0.498,
        beta_ad: 1.0,
        beta_da: 0.373,
        v_ad: 7.338,
        v_da: 0.058,
        welfare: 1.514,
    },
    MixCase {
        atoms: &[(2.0, 1.0, 1.0)],
        beta: 0.498,
        beta_ad: N,
        beta_da: 0.498,
        v_ad: N,
        v_da: 0.086,
        welfare: 0.086,
    },
    MixCase {
        atoms: &[(1.0, 1.0, 0.8), (1.0, 4.0, 0.2)],
        beta: 0.738,
        beta_ad: 0.922,
        beta_da: 0.001,
        v_ad: 0.319,
        v_da: 0.0,
        welfare: 0.255,
    },
    MixCase {
        atoms: &[(1.0, 1.0, 0.6), (1.0, 4.0, 0.4)],
        beta: 0.604,
        beta_ad: 1.0,
        beta_da: 0.009,
        v_ad: 1.675,
        v_da: 0.005,
        welfare: 1.007,
    },
    MixCase {
        atoms: &[(1.0, 1.0, 0.4), (1.0, 4.0, 0.6)],
        beta: 0.519,
        beta_ad: 1.0,
        beta_da: 0.198,
        v_ad: 4.030,
        v_da: 0.110,
        welfare: 1.678,
    },
    MixCase {
        atoms: &[(1.0, 1.0, 0.2), (1.0, 4.0, 0.8)],
        beta: 0.518,
        beta_ad: 1.0,
        beta_da: 0.398,
        v_ad: 7.091,
        v_da: 0.253,
        welfare: 1.621,
    },
    MixCase {
        atoms: &[(1.0, 4.0, 1.0)],
        beta: 0.518,
        beta_ad: N,
        beta_da: 0.518,
        v_ad: N,
        v_da: 0.365,
        welfare: 0.365,
    },
];

impl MixCase {
    pub fn mix(&self) -> PopulationMix {
        let atoms = self.atoms.iter().map(|&(x0, cost, weight)| Atom { x0, cost, weight }).collect();
        PopulationMix::new(atoms, 0.25).unwrap()
    }
}

/// Random decreasing step reward with `1..=max_steps` thresholds above `floor`.
pub fn random_step(rng: &mut ChaCha8Rng, max_steps: usize, floor: f64, top: f64) -> StepReward {
    let d = rng.random_range(1..=max_steps);
    let mut thresholds: Vec<f64> = (0..d).map(|_| rng.random_range(0.02..0.98)).collect();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
    let mut levels: Vec<f64> = (0..=thresholds.len()).map(|_| floor + rng.random_range(0.0..top)).collect();
    levels.sort_by(|a, b| b.total_cmp(a));
    StepReward::new(thresholds, levels, floor).unwrap()
}

/// Random decreasing piecewise-linear reward on a few nodes.
pub fn random_smooth(rng: &mut ChaCha8Rng, floor: f64, top: f64) -> SmoothReward {
    let m = rng.random_range(2..8);
    let mut inner: Vec<f64> = (0..m - 1).map(|_| rng.random_range(0.05..0.95)).collect();
    inner.sort_by(f64::total_cmp);
    inner.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
    let mut grid = vec![0.0];
    grid.extend(inner);
    grid.push(1.0);
    let mut values: Vec<f64> = grid.iter().map(|_| floor + rng.random_range(0.0..top)).collect();
    values.sort_by(|a, b| b.total_cmp(a));
    SmoothReward::new(grid, values, floor).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Principal branch of Lambert W for `x >= 0` by Newton's method.
pub fn lambert_w(x: f64) -> f64 {
    let mut w = if x < 1.0 { x } else { x.ln() - x.ln().ln().max(0.0) };
    for _ in 0..100 {
        let e = w.exp();
        let step = (w * e - x) / (e * (w + 1.0));
        w -= step;
        if step.abs() < 1e-15 * (1.0 + w.abs()) {
            break;
        }
    }
    w
}

pub fn norm_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

pub fn norm_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Density of the first hitting time of zero for `x0 + σW`.
pub fn hitting_pdf(s: f64, x0: f64, sigma: f64) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    let y = x0 / sigma;
    y / (2.0 * std::f64::consts::PI * s.powi(3)).sqrt() * (-y * y / (2.0 * s)).exp()
}

pub fn hitting_cdf(s: f64, x0: f64, sigma: f64) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    libm::erfc(x0 / (sigma * (2.0 * s).sqrt()))
}

/// Adaptive Simpson rule.
pub fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn rec<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 40)
}
