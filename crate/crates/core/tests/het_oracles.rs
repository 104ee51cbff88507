mod common;

use common::*;
use mft_core::equilibrium_het::*;
use mft_core::{solve_hom, Horizon, RankReward, StepReward};
use rand::Rng;

fn fifteen(d: usize) -> StepReward {
    quadratic(15.0).discretize(d).unwrap()
}

/// Completion rate of a lone type when every finisher before the deadline
/// is paid `top`: `β/(1 − β) = e^{(top − R∞)/κ} F°/(1 − F°)`.
fn flat_top_rate(x0: f64, cost: f64, sigma: f64, t: f64, top: f64, floor: f64) -> f64 {
    let f = hitting_cdf(t, x0, sigma);
    let kappa = 2.0 * cost * sigma * sigma;
    1.0 / (1.0 + ((floor - top) / kappa).exp() * (1.0 - f) / f)
}

#[test]
fn single_type_matches_homogeneous_solver() {
    let mut rng = rng(29);
    for case in 0..20 {
        let floor = rng.random_range(-0.3..0.3);
        let reward = random_step(&mut rng, 8, floor, 3.0);
        let x0 = rng.random_range(0.5..1.5);
        let cost = rng.random_range(0.5..2.0);
        let horizon = if case % 5 == 4 { Horizon::Infinite } else { Horizon::Finite(rng.random_range(0.5..3.0)) };
        let mix = PopulationMix::degenerate(x0, cost, 0.25).unwrap();
        let het = solve_het(&mix, &reward, horizon, 1).unwrap();
        let hom = solve_hom(&mix.params(0, horizon).unwrap(), &reward.clone().into()).unwrap();
        assert!((het.beta() - hom.beta()).abs() < 1e-8, "case {case}: {} vs {}", het.beta(), hom.beta());
        assert!((het.per_type()[0].value - hom.value()).abs() < 1e-8, "case {case}");
        for (q, &r) in het.quantiles().iter().zip(reward.thresholds()) {
            match (*q, hom.quantile(r)) {
                (Some(a), Some(b)) => assert!((a - b).abs() < 1e-8 * (1.0 + b), "case {case} r={r}: {a} vs {b}"),
                (None, None) => {}
                // a threshold reached exactly at the deadline may land on either side
                (None, Some(b)) | (Some(b), None) => assert!((b - horizon.time()).abs() < 1e-8, "case {case} r={r}"),
            }
        }
        for s in [0.2, 0.7, 1.5] {
            assert!((het.cdf(s) - hom.cdf(s)).abs() < 1e-8, "case {case} t={s}");
        }
    }
}

#[test]
fn feasibility_quantity_is_flat_top_completion() {
    let reward = fifteen(400);
    for case in &QUADRATIC_FIFTEEN_MIXES {
        let mix = case.mix();
        for t in [0.3, 1.0, 2.0] {
            let oracle: f64 = mix
                .atoms
                .iter()
                .map(|a| a.weight * flat_top_rate(a.x0, a.cost, mix.sigma, t, reward.levels()[0], reward.floor()))
                .sum();
            let got = compute_a_t(&mix, &reward, t).unwrap();
            assert!((got - oracle).abs() < 1e-12, "{got} vs {oracle}");
            let hom_top = StepReward::constant(reward.levels()[0], reward.floor()).unwrap();
            let by_hom: f64 = (0..mix.atoms.len())
                .map(|i| {
                    let p = mix.params(i, Horizon::Finite(t)).unwrap();
                    mix.atoms[i].weight * solve_hom(&p, &hom_top.clone().into()).unwrap().beta()
                })
                .sum();
            assert!((got - by_hom).abs() < 1e-10);
        }
    }
    assert!(compute_a_t(&QUADRATIC_FIFTEEN_MIXES[0].mix(), &reward, f64::INFINITY).is_err());
}

#[test]
fn nobody_reaches_first_threshold() {
    let mix = QUADRATIC_FIFTEEN_MIXES[4].mix();
    let reward = StepReward::new(vec![0.95], vec![1.0, 0.5], 0.0).unwrap();
    let t = 0.3;
    let a_t = compute_a_t(&mix, &reward, t).unwrap();
    assert!(a_t < 0.95);
    let eq = solve_het(&mix, &reward, Horizon::Finite(t), 3).unwrap();
    assert_eq!(eq.k0(), 0);
    assert!(eq.quantiles().iter().all(Option::is_none));
    assert!((eq.beta() - a_t).abs() < 1e-10, "{} vs {a_t}", eq.beta());
    for (o, a) in eq.per_type().iter().zip(&mix.atoms) {
        let b = flat_top_rate(a.x0, a.cost, mix.sigma, t, 1.0, 0.0);
        assert!((o.beta - b).abs() < 1e-10);
    }
}

fn check_case(index: usize, d: usize) -> HetEquilibrium {
    let case = &QUADRATIC_FIFTEEN_MIXES[index];
    let mix = case.mix();
    let eq = solve_het(&mix, &fifteen(d), Horizon::Finite(1.0), 7).unwrap();
    assert!((eq.beta() - case.beta).abs() <= 0.005, "case {index}: beta {}", eq.beta());
    assert!((eq.welfare() - case.welfare).abs() <= 0.01, "case {index}: welfare {}", eq.welfare());
    let groups = [(case.beta_ad, case.v_ad), (case.beta_da, case.v_da)];
    let present: Vec<(f64, f64)> = groups.into_iter().filter(|g| !g.0.is_nan()).collect();
    for (o, (b, v)) in eq.per_type().iter().zip(present) {
        assert!((o.beta - b).abs() <= 0.005, "case {index}: type beta {} vs {b}", o.beta);
        assert!((o.value - v).abs() <= 0.01, "case {index}: type value {} vs {v}", o.value);
    }
    eq
}

#[test]
fn homogeneous_and_mixed_cases_match_table_values() {
    for index in [0, 1, 5, 6] {
        check_case(index, 400);
    }
}

#[test]
fn aggregates_are_consistent_with_types() {
    let eq = check_case(8, 400);
    let mix = eq.mix();
    let beta: f64 = eq.per_type().iter().zip(&mix.atoms).map(|(o, a)| a.weight * o.beta).sum();
    assert!((beta - eq.beta()).abs() < 1e-14);
    assert!((eq.cdf(1.0) - eq.beta()).abs() < 1e-9);
    assert!((eq.cdf(5.0) - eq.beta()).abs() < 1e-9);
    assert!(eq.max_residual() < 1e-9);
    assert!(eq.residuals().iter().all(|r| r.abs() < 1e-9));
    let (q, room) = eq.cutoff_slack();
    assert!(q >= -1e-9 && room >= -1e-9);
    assert!(eq.restarts_agree(), "spread {}", eq.restart_spread());
    // the schedule of each type reproduces its value and completion rate
    for (i, (o, a)) in eq.per_type().iter().zip(&mix.atoms).enumerate() {
        let s = eq.schedule(i).unwrap();
        assert!((s.value(0.0, a.x0) - o.value).abs() < 1e-9, "type {i}");
    }
    // quantile times hit the reward thresholds in the aggregate law
    let thresholds = eq.reward().thresholds().to_vec();
    for (q, r) in eq.quantiles().iter().zip(&thresholds).take(eq.k0()) {
        let q = q.unwrap();
        assert!((eq.cdf(q) - r).abs() < 1e-9, "r={r}: {}", eq.cdf(q));
    }
    let grid: Vec<f64> = (0..=50).map(|j| j as f64 / 50.0).collect();
    assert!(grid.windows(2).all(|w| eq.cdf(w[1]) >= eq.cdf(w[0])));
}

#[test]
fn effort_is_non_negative_and_cheaper_types_work_harder() {
    let eq = check_case(6, 200);
    for j in 0..20 {
        let t = 0.05 * j as f64;
        for x in [0.05, 0.3, 0.7, 1.0, 1.5] {
            let cheap = eq.effort(0, t, x).unwrap();
            let dear = eq.effort(1, t, x).unwrap();
            assert!(cheap >= 0.0 && dear >= 0.0, "t={t} x={x}");
            assert!(cheap >= dear - 1e-12, "t={t} x={x}: {cheap} < {dear}");
        }
    }
    let p = eq.per_type();
    assert!(p[0].beta > p[1].beta && p[0].value > p[1].value);
}

#[test]
fn finer_rank_bins_converge() {
    let mix = QUADRATIC_FIFTEEN_MIXES[3].mix();
    let h: RankReward = quadratic(15.0);
    let runs = refine_discretization(&mix, &h, Horizon::Finite(1.0), &[25, 50, 100, 200], 5).unwrap();
    let betas: Vec<f64> = runs.iter().map(|(_, e)| e.beta()).collect();
    let gaps: Vec<f64> = betas.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    assert!(gaps.windows(2).all(|g| g[1] < g[0]), "{betas:?}");
    assert!(gaps[gaps.len() - 1] < 2e-3, "{betas:?}");
}

#[test]
fn restarts_are_seed_deterministic() {
    let mix = QUADRATIC_FIFTEEN_MIXES[2].mix();
    let a = solve_het(&mix, &fifteen(100), Horizon::Finite(1.0), 42).unwrap();
    let b = solve_het(&mix, &fifteen(100), Horizon::Finite(1.0), 42).unwrap();
    assert_eq!(a.beta().to_bits(), b.beta().to_bits());
    assert_eq!(a.restart_spread().to_bits(), b.restart_spread().to_bits());
}

#[test]
fn invalid_mixtures_are_rejected() {
    let bad = PopulationMix { atoms: vec![Atom { x0: 1.0, cost: 1.0, weight: 0.7 }], sigma: 0.25 };
    assert!(bad.validate().is_err());
    assert!(PopulationMix::new(vec![], 0.25).is_err());
    assert!(PopulationMix::degenerate(-1.0, 1.0, 0.25).is_err());
    let eq = check_case(0, 50);
    assert!(eq.schedule(3).is_err());
}
