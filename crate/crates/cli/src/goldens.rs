//! Published reference values with the tolerances they are checked against.

use mft_core::equilibrium_het::{Atom, PopulationMix};

pub const QUARTILE_TOL: f64 = 0.002;
pub const RATE_TOL: f64 = 0.001;
pub const VALUE_TOL: f64 = 0.001;
pub const MIX_RATE_TOL: f64 = 0.005;
pub const MIX_VALUE_TOL: f64 = 0.01;
pub const THRESHOLD_TOL: f64 = 0.0005;

/// `H(r) = 6(1 − r)²`, `x0 = 1`, `σ = 0.25`, `c = 1`, `R∞ = 0`.
pub struct HomRow {
    pub horizon: f64,
    /// First quartile, median, third quartile; `None` beyond the deadline.
    pub quartiles: [Option<f64>; 3],
    pub beta: f64,
    pub value: f64,
}

pub const TABLE1: [HomRow; 7] = [
    HomRow { horizon: 0.5, quartiles: [Some(0.281), None, None], beta: 0.449, value: 0.074 },
    HomRow { horizon: 1.0, quartiles: [Some(0.285), Some(0.613), None], beta: 0.619, value: 0.121 },
    HomRow { horizon: 2.0, quartiles: [Some(0.289), Some(0.630), None], beta: 0.736, value: 0.166 },
    HomRow { horizon: 5.0, quartiles: [Some(0.293), Some(0.649), Some(2.424)], beta: 0.834, value: 0.215 },
    HomRow { horizon: 10.0, quartiles: [Some(0.295), Some(0.658), Some(2.545)], beta: 0.881, value: 0.237 },
    HomRow { horizon: 100.0, quartiles: [Some(0.296), Some(0.666), Some(2.661)], beta: 0.960, value: 0.256 },
    HomRow { horizon: f64::INFINITY, quartiles: [Some(0.296), Some(0.667), Some(2.667)], beta: 1.0, value: 0.257 },
];

/// `R = 1_{t ≤ 1}·15(1 − r)²`, `σ = 0.25`. Types are listed advantaged
/// first; `per_type` holds `(β, V)` for each listed atom.
pub struct MixRow {
    pub atoms: &'static [(f64, f64, f64)],
    pub beta: f64,
    pub per_type: &'static [(f64, f64)],
    pub welfare: f64,
}

impl MixRow {
    pub fn mix(&self, sigma: f64) -> mft_core::Result<PopulationMix> {
        let atoms = self.atoms.iter().map(|&(x0, cost, weight)| Atom { x0, cost, weight }).collect();
        PopulationMix::new(atoms, sigma)
    }
}

pub const TABLE2: [MixRow; 11] = [
    MixRow { atoms: &[(1.0, 1.0, 1.0)], beta: 0.759, per_type: &[(0.759, 0.178)], welfare: 0.178 },
    MixRow {
        atoms: &[(1.0, 1.0, 0.8), (2.0, 1.0, 0.2)],
        beta: 0.738,
        per_type: &[(0.922, 0.319), (0.0, 0.0)],
        welfare: 0.255,
    },
    MixRow {
        atoms: &[(1.0, 1.0, 0.6), (2.0, 1.0, 0.4)],
        beta: 0.600,
        per_type: &[(1.0, 1.701), (0.0, 0.0)],
        welfare: 1.020,
    },
    MixRow {
        atoms: &[(1.0, 1.0, 0.4), (2.0, 1.0, 0.6)],
        beta: 0.498,
        per_type: &[(1.0, 4.276), (0.164, 0.022)],
        welfare: 1.724,
    },
    MixRow {
        atoms: &[(1.0, 1.0, 0.2), (2.0, 1.0, 0.8)],
        beta: 0.498,
        per_type: &[(1.0, 7.338), (0.373, 0.058)],
        welfare: 1.514,
    },
    MixRow { atoms: &[(2.0, 1.0, 1.0)], beta: 0.498, per_type: &[(0.498, 0.086)], welfare: 0.086 },
    MixRow {
        atoms: &[(1.0, 1.0, 0.8), (1.0, 4.0, 0.2)],
        beta: 0.738,
        per_type: &[(0.922, 0.319), (0.001, 0.0)],
        welfare: 0.255,
    },
    MixRow {
        atoms: &[(1.0, 1.0, 0.6), (1.0, 4.0, 0.4)],
        beta: 0.604,
        per_type: &[(1.0, 1.675), (0.009, 0.005)],
        welfare: 1.007,
    },
    MixRow {
        atoms: &[(1.0, 1.0, 0.4), (1.0, 4.0, 0.6)],
        beta: 0.519,
        per_type: &[(1.0, 4.030), (0.198, 0.110)],
        welfare: 1.678,
    },
    MixRow {
        atoms: &[(1.0, 1.0, 0.2), (1.0, 4.0, 0.8)],
        beta: 0.518,
        per_type: &[(1.0, 7.091), (0.398, 0.253)],
        welfare: 1.621,
    },
    MixRow { atoms: &[(1.0, 4.0, 1.0)], beta: 0.518, per_type: &[(0.518, 0.365)], welfare: 0.365 },
];

/// Cases with a single type, reproducible by the closed-form solver.
pub const TABLE2_HOMOGENEOUS: [usize; 3] = [0, 5, 10];

/// Completion-rate thresholds where the number of equilibria changes for the
/// flat bonus `H(r, β) = R∞ + β` at `c = 1`, `σ = 0.25`.
pub const FIG5_THRESHOLDS: [f64; 2] = [0.0063, 0.0505];

/// `(F°(T), number of equilibria)` on either side of and between the thresholds.
pub const FIG5_COUNTS: [(f64, usize); 3] = [(0.003, 1), (0.02, 3), (0.1, 1)];
