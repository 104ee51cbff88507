//! First-passage time of a driftless Brownian motion to zero.
//!
//! For a standard Brownian motion started at `y > 0` the hitting time of zero
//! `τ_y` has density
//!
//! ```text
//! f(s) = y / (s √(2π s)) · exp(−y² / 2s)
//! ```
//!
//! and distribution `F(t) = 2(1 − Φ(y/√t)) = erfc(y/√(2t))`. A state process
//! `x + σW` reaches zero at `τ_{x/σ}`, so every routine here takes the level in
//! Brownian units `y = x/σ` except [`cdf_dx`], which differentiates in `x`.

use crate::error::{check_positive, domain, Result};
use crate::quad;
use libm::erfc;
use std::f64::consts::{PI, SQRT_2};

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal density.
#[inline]
pub fn normal_pdf(z: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * z * z).exp()
}

/// Logarithm of the standard normal density.
#[inline]
pub fn normal_ln_pdf(z: f64) -> f64 {
    -0.5 * z * z - 0.5 * (2.0 * PI).ln()
}

/// Standard normal distribution function.
#[inline]
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

/// Upper tail `1 − Φ(z)`, accurate far into the tail.
#[inline]
pub fn normal_sf(z: f64) -> f64 {
    0.5 * erfc(z / SQRT_2)
}

/// Rational approximation of `Φ⁻¹(p)` with relative error below `1.2e-9`.
fn normal_quantile_guess(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] =
        [7.784_695_709_041_462e-3, 3.224_671_290_700_398e-1, 2.445_134_137_142_996, 3.754_408_661_907_416];
    let tail = |q: f64| {
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    const P_LOW: f64 = 0.02425;
    if p < P_LOW {
        tail((-2.0 * p.ln()).sqrt())
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -tail((-2.0 * (1.0 - p).ln()).sqrt())
    }
}

/// Hitting time of zero for a standard Brownian motion started at `y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirstPassage {
    y: f64,
}

impl FirstPassage {
    pub fn new(y: f64) -> Result<Self> {
        check_positive("first-passage level", y)?;
        Ok(Self { y })
    }

    /// Level for a process `x + σW`.
    pub fn for_state(x: f64, sigma: f64) -> Result<Self> {
        check_positive("sigma", sigma)?;
        Self::new(x / sigma)
    }

    pub fn level(&self) -> f64 {
        self.y
    }

    /// Density at `s`; zero for `s <= 0` and at infinity.
    pub fn pdf(&self, s: f64) -> f64 {
        if s <= 0.0 || s.is_infinite() {
            return 0.0;
        }
        let y = self.y;
        y / (s * (2.0 * PI * s).sqrt()) * (-y * y / (2.0 * s)).exp()
    }

    /// `P(τ_y <= t)`.
    pub fn cdf(&self, t: f64) -> f64 {
        if t <= 0.0 {
            0.0
        } else if t.is_infinite() {
            1.0
        } else {
            erfc(self.y / (2.0 * t).sqrt())
        }
    }

    /// `P(τ_y > t)`.
    pub fn sf(&self, t: f64) -> f64 {
        if t <= 0.0 {
            1.0
        } else if t.is_infinite() {
            0.0
        } else {
            1.0 - erfc(self.y / (2.0 * t).sqrt())
        }
    }

    /// Inverse distribution function: `p = 0` gives 0 and `p = 1` gives infinity.
    pub fn quantile(&self, p: f64) -> f64 {
        if p <= 0.0 {
            return 0.0;
        }
        if p >= 1.0 {
            return f64::INFINITY;
        }
        // F(t) = erfc(z/√2) with z = y/√t, i.e. z = −Φ⁻¹(p/2)
        let mut z = -normal_quantile_guess(0.5 * p);
        let dens = 2.0 * normal_pdf(z);
        if dens > 0.0 && z.is_finite() {
            z += (erfc(z / SQRT_2) - p) / dens;
        }
        if z <= 0.0 {
            return f64::INFINITY;
        }
        (self.y / z).powi(2)
    }

    /// `E[g(τ_y)]` via `τ_y = y²/Z²` with `Z` half-normal.
    pub fn expect<G: Fn(f64) -> f64>(&self, g: G, tol: f64) -> quad::Quadrature {
        let y2 = self.y * self.y;
        quad::integrate(|z| if z <= 0.0 { 0.0 } else { 2.0 * g(y2 / (z * z)) * normal_pdf(z) }, 0.0, 40.0, tol, tol)
    }
}

/// `P(τ_y <= t)`, validating the level.
pub fn fpt_cdf(t: f64, y: f64) -> Result<f64> {
    if t.is_nan() {
        return domain("time is NaN");
    }
    Ok(FirstPassage::new(y)?.cdf(t))
}

/// Density of `τ_y` at `s`, validating the level.
pub fn fpt_pdf(s: f64, y: f64) -> Result<f64> {
    if s.is_nan() {
        return domain("time is NaN");
    }
    Ok(FirstPassage::new(y)?.pdf(s))
}

/// Inverse distribution function of `τ_y`, validating both arguments.
pub fn fpt_quantile(p: f64, y: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return domain(format!("probability must lie in [0, 1], got {p}"));
    }
    Ok(FirstPassage::new(y)?.quantile(p))
}

/// `∂/∂x P(τ_{x/σ} <= s) = −2 φ(x/(σ√s)) / (σ√s)`; zero for `s <= 0`.
pub fn cdf_dx(s: f64, x: f64, sigma: f64) -> f64 {
    if s <= 0.0 || s.is_infinite() {
        return 0.0;
    }
    let w = sigma * s.sqrt();
    -2.0 * normal_pdf(x / w) / w
}

/// Natural log of `|cdf_dx(s, x, σ)|`, finite even where the value underflows.
pub fn ln_abs_cdf_dx(s: f64, x: f64, sigma: f64) -> f64 {
    if s <= 0.0 || s.is_infinite() {
        return f64::NEG_INFINITY;
    }
    let w = sigma * s.sqrt();
    2f64.ln() + normal_ln_pdf(x / w) - w.ln()
}
