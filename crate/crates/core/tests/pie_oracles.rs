mod common;

use common::*;
use mft_core::pie::*;
use mft_core::{solve_hom, Horizon, ModelParams, RankReward, Result};

const KAPPA: f64 = 0.125;

/// For a flat bonus `β`, `φ(β) = β e^{−β/κ}/(1 − β)`, whose extrema solve
/// `β² − β + κ = 0`.
fn rate_bonus_thresholds(kappa: f64) -> [f64; 2] {
    let d = (1.0 - 4.0 * kappa).sqrt();
    let phi = |b: f64| b * (-b / kappa).exp() / (1.0 - b);
    let mut t = [0.5 * (1.0 - d), 0.5 * (1.0 + d)].map(|b| phi(b) / (1.0 + phi(b)));
    t.sort_by(f64::total_cmp);
    t
}

/// Parameters with `c = 1`, `σ = 0.25`, `T = 1` and `F°(T) = f_t`.
fn params_with_rate(f_t: f64) -> ModelParams {
    let (mut lo, mut hi) = (1e-6_f64, 1e3_f64);
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if hitting_cdf(1.0, mid, 0.25) > f_t {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    ModelParams::new(0.5 * (lo + hi), 0.25, 1.0, Horizon::Finite(1.0)).unwrap()
}

#[test]
fn flat_bonus_thresholds() {
    let family = RateBonus { floor: 0.0, floor_slope: 0.0 };
    let got = pie_critical_thresholds(KAPPA, &family, 2000).unwrap();
    let oracle = rate_bonus_thresholds(KAPPA);
    assert_eq!(got.len(), 2, "{got:?}");
    for (g, o) in got.iter().zip(oracle) {
        assert!((g - o).abs() < 1e-10, "{g} vs {o}");
    }
    assert!((got[0] - 0.0063).abs() <= 0.0005);
    assert!((got[1] - 0.0505).abs() <= 0.0005);
}

#[test]
fn floor_slope_does_not_move_flat_bonus_thresholds() {
    let a = pie_critical_thresholds(KAPPA, &RateBonus { floor: 0.0, floor_slope: 0.0 }, 1000).unwrap();
    let b = pie_critical_thresholds(KAPPA, &RateBonus { floor: 0.3, floor_slope: 0.7 }, 1000).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 1e-10);
    }
}

#[test]
fn flat_bonus_root_counts_across_bracket() {
    let family = RateBonus { floor: 0.0, floor_slope: 0.0 };
    for (f_t, count) in [(0.003, 1), (0.02, 3), (0.04, 3), (0.06, 1), (0.1, 1)] {
        assert_eq!(root_count(KAPPA, &family, f_t, 2000).unwrap(), count, "F = {f_t}");
        let eq = enumerate_pie_equilibria(&params_with_rate(f_t), &family, 2000).unwrap();
        assert_eq!(eq.roots.len(), count, "F = {f_t}");
        assert_eq!(eq.dominant, count - 1);
    }
}

#[test]
fn roots_are_self_consistent_fixed_pie_equilibria() {
    let family = RateBonus { floor: 0.1, floor_slope: 0.2 };
    let params = params_with_rate(0.02);
    let eq = enumerate_pie_equilibria(&params, &family, 2000).unwrap();
    assert_eq!(eq.roots.len(), 3);
    for root in &eq.roots {
        let frozen = family.reward_at(root.beta).unwrap();
        let hom = solve_hom(&params, &frozen).unwrap();
        assert!((hom.beta() - root.beta).abs() < 1e-9, "{} vs {}", hom.beta(), root.beta);
        assert!((hom.value() - root.value).abs() < 1e-9);
        assert!((hom.expected_effort().unwrap() - root.expected_effort).abs() < 1e-9);
        let b = root.beta;
        let phi = b * (-b / KAPPA).exp() / (1.0 - b);
        let f_t = params.baseline_completion();
        assert!((phi.ln() - (f_t / (1.0 - f_t)).ln()).abs() < 1e-10);
    }
}

#[test]
fn values_rise_with_completion_rate_across_roots() {
    let family = RateBonus { floor: 0.0, floor_slope: 0.5 };
    let eq = enumerate_pie_equilibria(&params_with_rate(0.03), &family, 2000).unwrap();
    assert!(eq.roots.len() > 1);
    assert!(eq.roots.windows(2).all(|w| w[1].beta > w[0].beta && w[1].value > w[0].value));
    let dom = eq.roots[eq.dominant];
    assert!(eq.roots.iter().all(|r| r.beta <= dom.beta));
}

#[test]
fn fixed_pool_reduces_to_plain_equilibrium() {
    let fixed = quadratic(6.0);
    let family = |_: f64| -> Result<RankReward> { Ok(quadratic(6.0)) };
    for t in [0.5, 1.0, 5.0] {
        let params = bench(Horizon::Finite(t));
        let eq = enumerate_pie_equilibria(&params, &family, 1000).unwrap();
        let hom = solve_hom(&params, &fixed).unwrap();
        assert_eq!(eq.roots.len(), 1);
        assert!((eq.roots[0].beta - hom.beta()).abs() < 1e-10);
        assert!((eq.roots[0].value - hom.value()).abs() < 1e-10);
    }
    assert!(pie_critical_thresholds(KAPPA, &family, 1000).unwrap().is_empty());
}

#[test]
fn tangency_is_reported_as_double_root() {
    let family = RateBonus { floor: 0.0, floor_slope: 0.0 };
    let low = rate_bonus_thresholds(KAPPA)[0];
    let eq = enumerate_pie_equilibria(&params_with_rate(low), &family, 2000).unwrap();
    let total: usize = eq.roots.iter().map(|r| r.multiplicity as usize).sum();
    assert_eq!(total, 3, "{eq:?}");
    let double = eq.roots.iter().find(|r| r.multiplicity == 2).expect("double root");
    let tangent = 0.5 * (1.0 + (1.0 - 4.0 * KAPPA).sqrt());
    assert!((double.beta - tangent).abs() < 1e-6, "{}", double.beta);
}

/// `φ` for the shared pool has a closed form since `H` is linear in rank.
#[test]
fn shared_pool_phi_matches_closed_form() {
    for (k, e) in [(1.5, 0.17), (1.0, 0.5), (3.0, 0.0)] {
        let family = SharedPool { pool: k, participation: 0.5, inequality: e };
        for b in [0.05, 0.3, 0.7, 0.95] {
            let pi = k * (1.0 + b);
            let slope = pi * 0.5 * 2.0 * e / KAPPA;
            // R∞ − H(z) = −π(1 − γ)(1 + ε(1 − 2z))
            let base = -pi * 0.5 * (1.0 + e) / KAPPA;
            let integral = if slope == 0.0 { b * base.exp() } else { base.exp() * (slope * b).exp_m1() / slope };
            let oracle = integral.ln() - (-b).ln_1p();
            let got = ln_phi(&family, KAPPA, b).unwrap();
            assert!((got - oracle).abs() < 1e-10, "K={k} e={e} b={b}: {got} vs {oracle}");
        }
    }
}

fn shared_scan(pool: f64) -> BifurcationScan {
    let params = ModelParams::new(1.0, 0.25, 1.0, Horizon::Finite(1.0)).unwrap();
    let eps: Vec<f64> = (0..=200).map(|i| i as f64 * 0.005).collect();
    bifurcation_scan(&params, |e| SharedPool { pool, participation: 0.5, inequality: e }, &eps, 800).unwrap()
}

#[test]
fn shared_pool_is_multi_valued_at_intermediate_size() {
    let scan = shared_scan(1.5);
    assert!(!scan.multi_valued.is_empty());
    let (start, end) = scan.multi_valued[0];
    assert!(start > 0.1 && end < 0.25, "{:?}", scan.multi_valued);
    let branches: std::collections::BTreeSet<usize> = scan.points.iter().map(|p| p.branch).collect();
    assert!(branches.len() >= 2);
}

#[test]
fn shared_pool_is_single_valued_for_small_and_large_pools() {
    for pool in [1.0, 5.0] {
        let scan = shared_scan(pool);
        assert!(scan.multi_valued.is_empty(), "K={pool}: {:?}", scan.multi_valued);
        assert_eq!(scan.points.len(), 201);
    }
}

#[test]
fn pie_requires_a_deadline() {
    let family = RateBonus { floor: 0.0, floor_slope: 0.0 };
    assert!(enumerate_pie_equilibria(&bench(Horizon::Infinite), &family, 100).is_err());
    let bad = SharedPool { pool: 1.0, participation: 1.5, inequality: 0.0 };
    assert!(bad.reward_at(0.5).is_err());
}
