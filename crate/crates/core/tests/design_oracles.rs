mod common;

use common::*;
use mft_core::design::*;
use mft_core::{solve_hom, Error, Horizon, ModelParams, RankReward, SmoothReward, StepReward};
use rand::Rng;

/// Rescales a reward so that `∫_0^1 H = budget`, keeping the floor.
fn with_budget(reward: &RankReward, budget: f64) -> RankReward {
    let floor = reward.floor();
    let k = (budget - floor) / (reward.mean() - floor);
    match reward {
        RankReward::Step(s) => StepReward::new(
            s.thresholds().to_vec(),
            s.levels().iter().map(|l| floor + k * (l - floor)).collect(),
            floor,
        )
        .unwrap()
        .into(),
        RankReward::Smooth(s) => {
            SmoothReward::new(s.grid().to_vec(), s.values().iter().map(|v| floor + k * (v - floor)).collect(), floor)
                .unwrap()
                .into()
        }
    }
}

fn random_reward(rng: &mut rand_chacha::ChaCha8Rng, floor: f64) -> RankReward {
    if rng.random_bool(0.5) {
        random_step(rng, 8, floor, 2.0).into()
    } else {
        random_smooth(rng, floor, 2.0).into()
    }
}

fn invert_hitting_cdf(p: f64, x0: f64, sigma: f64) -> f64 {
    let (mut lo, mut hi) = (1e-12_f64, 1e12_f64);
    for _ in 0..400 {
        let mid = (lo * hi).sqrt();
        if hitting_cdf(mid, x0, sigma) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo * hi).sqrt()
}

#[test]
fn fastest_quantile_time_formula() {
    let p = bench(Horizon::Infinite);
    let kappa = p.kappa();
    for (floor, budget, alpha) in [(0.0, 1.0, 0.5), (0.2, 0.5, 0.25), (-0.1, 2.0, 0.9)] {
        let sol = min_quantile_reward(&p, floor, budget, alpha).unwrap();
        let e = (budget - floor) / (alpha * kappa);
        let oracle = invert_hitting_cdf(alpha / (alpha + (1.0 - alpha) * e.exp()), 1.0, 0.25);
        let t_star = sol.objective.unwrap();
        assert!((t_star - oracle).abs() < 1e-9 * oracle, "{t_star} vs {oracle}");
        let eq = solve_hom(&p, &sol.reward).unwrap();
        assert!((eq.quantile(alpha).unwrap() - t_star).abs() < 1e-9 * t_star);
        assert!((eq.value() - sol.value).abs() < 1e-10);
        assert!((sol.reward.mean() - budget).abs() < 1e-12);
    }
}

#[test]
fn fastest_quantile_unreachable_before_deadline() {
    let p = bench(Horizon::Finite(0.2));
    let sol = min_quantile_reward(&p, 0.0, 1.0, 0.5).unwrap();
    assert!(sol.objective.is_none());
}

#[test]
fn cutoff_beats_random_schemes_on_speed() {
    let p = bench(Horizon::Infinite);
    let mut rng = rng(3);
    for case in 0..200 {
        let floor = rng.random_range(-0.3..0.3);
        let budget = floor + rng.random_range(0.1..1.5);
        let alpha = rng.random_range(0.05..0.95);
        let best = min_quantile_reward(&p, floor, budget, alpha).unwrap().objective.unwrap();
        let other = with_budget(&random_reward(&mut rng, floor), budget);
        let q = solve_hom(&p, &other).unwrap().quantile(alpha).unwrap();
        assert!(q >= best * (1.0 - 1e-9), "case {case}: {q} < {best}");
    }
}

#[test]
fn budget_and_rate_invert_each_other() {
    for t in [0.5, 1.0, 3.0] {
        let p = bench(Horizon::Finite(t));
        for (floor, budget) in [(0.0, 0.5), (0.0, 1.0), (0.3, 2.0)] {
            let rate = max_completion_rate(&p, floor, budget).unwrap();
            let alpha = rate.objective.unwrap();
            let back = min_budget(&p, floor, alpha).unwrap().objective.unwrap();
            assert!((back - budget).abs() < 1e-8, "T={t}: {back} vs {budget}");
            let eq = solve_hom(&p, &rate.reward).unwrap();
            assert!((eq.beta() - alpha).abs() < 1e-8, "T={t}: {} vs {alpha}", eq.beta());
        }
        for alpha in [0.3, 0.6, 0.9] {
            let budget = min_budget(&p, 0.0, alpha).unwrap().objective.unwrap();
            let t_star = min_quantile_reward(&p, 0.0, budget, alpha).unwrap().objective.unwrap();
            assert!((t_star - t).abs() < 1e-8 * t, "T={t} alpha={alpha}: {t_star}");
            let again = max_completion_rate(&p, 0.0, budget).unwrap().objective.unwrap();
            assert!((again - alpha).abs() < 1e-8);
        }
    }
}

/// `α/(1 − α) · e^{−a/α} = C_T` with `a = (K − R∞)/κ`; writing `s = 1/α − 1`
/// turns it into `a s e^{a s} = a e^{−a}/C_T`.
#[test]
fn largest_rate_matches_lambert_w() {
    let p = bench(Horizon::Finite(1.0));
    let f0 = hitting_cdf(1.0, 1.0, 0.25);
    let c_t = f0 / (1.0 - f0);
    for (floor, budget) in [(0.0, 1.0), (0.0, 0.3), (0.5, 2.5)] {
        let a = (budget - floor) / p.kappa();
        let s = lambert_w(a * (-a).exp() / c_t) / a;
        let oracle = 1.0 / (1.0 + s);
        let got = max_completion_rate(&p, floor, budget).unwrap().objective.unwrap();
        assert!((got - oracle).abs() < 1e-10, "{got} vs {oracle}");
        if floor == 0.0 && budget == 1.0 {
            assert!((got - 0.74496).abs() < 5e-6, "{got}");
        }
    }
}

#[test]
fn no_budget_no_boost() {
    let p = bench(Horizon::Finite(1.0));
    let rate = max_completion_rate(&p, 0.0, 0.0).unwrap().objective.unwrap();
    assert!((rate - p.baseline_completion()).abs() < 1e-12);
    let inf = max_completion_rate(&bench(Horizon::Infinite), 0.0, 1.0).unwrap();
    assert_eq!(inf.objective, Some(1.0));
}

#[test]
fn flat_reward_gives_full_welfare_without_deadline() {
    let p = bench(Horizon::Infinite);
    for budget in [0.0, 0.5, 2.0] {
        let sol = max_welfare_reward(&p, 0.0, budget).unwrap();
        assert_eq!(sol.value, budget);
        let eq = solve_hom(&p, &sol.reward).unwrap();
        assert!((eq.value() - budget).abs() < 1e-14 * (1.0 + budget));
    }
}

#[test]
fn welfare_optimum_beats_random_schemes() {
    let mut rng = rng(5);
    for case in 0..200 {
        let t = [0.5, 1.0, 2.0, f64::INFINITY][case % 4];
        let p = bench(Horizon::from_time(t));
        let floor = rng.random_range(-0.3..0.3);
        let budget = floor + rng.random_range(0.1..1.5);
        let best = max_welfare_reward(&p, floor, budget).unwrap();
        if case < 8 {
            let own = solve_hom(&p, &best.reward).unwrap().value();
            assert!((own - best.value).abs() < 1e-9, "case {case}: {own} vs {}", best.value);
        }
        let other = with_budget(&random_reward(&mut rng, floor), budget);
        let v = solve_hom(&p, &other).unwrap().value();
        assert!(v <= best.value + 1e-9, "case {case}: {v} > {}", best.value);
    }
}

#[test]
fn cutoff_lemma_beats_random_feasible_profiles() {
    let mut rng = rng(17);
    for case in 0..500 {
        let alpha = rng.random_range(0.05..0.95);
        let floor = rng.random_range(-0.5..0.5);
        let budget = floor + rng.random_range(0.0..2.0);
        let kappa = rng.random_range(0.05..2.0);
        let opt = auxiliary_optimum(alpha, budget, floor, kappa).unwrap();
        // increasing step profile of h on [0, α] meeting both constraints
        let m = rng.random_range(1..10);
        let mut widths: Vec<f64> = (0..m).map(|_| rng.random_range(0.1..1.0)).collect();
        let total: f64 = widths.iter().sum();
        widths.iter_mut().for_each(|w| *w *= alpha / total);
        let mut excess: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..1.0)).collect();
        excess.sort_by(|a, b| b.total_cmp(a));
        let mean: f64 = excess.iter().zip(&widths).map(|(e, w)| e * w).sum::<f64>() / alpha;
        let room = (budget - floor * (1.0 - alpha)) / (alpha * kappa) - floor / kappa;
        let lambda = rng.random_range(0.0..=1.0) * room / mean.max(1e-300);
        let neg_ln_h: Vec<f64> = excess.iter().map(|e| floor / kappa + lambda * e).collect();
        let spent: f64 = neg_ln_h.iter().zip(&widths).map(|(v, w)| v * w).sum();
        assert!(spent <= (budget - floor * (1.0 - alpha)) / kappa * (1.0 + 1e-12) + 1e-12);
        let j: f64 = neg_ln_h.iter().zip(&widths).map(|(v, w)| (-v).exp() * w).sum();
        assert!(j >= opt.objective * (1.0 - 1e-12), "case {case}: {j} < {}", opt.objective);
        assert!(opt.level <= (-floor / kappa).exp() * (1.0 + 1e-12));
    }
}

#[test]
fn cutoff_cdf_matches_solver() {
    let p = bench(Horizon::Infinite);
    for (budget, alpha) in [(1.0, 0.5), (0.4, 0.1)] {
        let eq = solve_hom(&p, &cutoff_reward(0.0, budget, alpha).unwrap().into()).unwrap();
        let t_star = cutoff_quantile_time(&p, 0.0, budget, alpha).unwrap();
        for t in [0.1, 0.5, 0.9, 1.1, 3.0, 20.0].map(|k| k * t_star) {
            let a = cutoff_cdf(&p, 0.0, budget, alpha, t).unwrap();
            let b = eq.cdf(t);
            assert!((a - b).abs() < 1e-9, "t={t}: {a} vs {b}");
        }
    }
}

/// Profit `e^{−t}` with `x0 = σ = 1`. For a cutoff `z`, the law tilts `f°` by
/// `exp(g(t ∧ z)/κ)` and the net profit is
/// `w_z (∫_z^∞ g f° − g(z) P(τ° > z))/N + g(z) − R∞`.
fn net_profit_oracle(kappa: f64, floor: f64, z: f64) -> f64 {
    let g = |t: f64| (-t).exp();
    let pdf = |t: f64| hitting_pdf(t, 1.0, 1.0);
    let w = |t: f64| ((g(t.min(z)) - 1.0) / kappa).exp();
    let head = simpson(&|t| pdf(t) * w(t), 0.0, z, 1e-15);
    let sf = 1.0 - hitting_cdf(z, 1.0, 1.0);
    let norm = head + w(z) * sf;
    let mut tail = 0.0;
    let mut a = z;
    for b in [1.0, 4.0, 16.0, 64.0] {
        if b > a {
            tail += simpson(&|t| g(t) * pdf(t), a, b, 1e-15);
            a = b;
        }
    }
    w(z) * (tail - g(z) * sf) / norm + g(z) - floor
}

fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..200 {
        let c = hi - phi * (hi - lo);
        let d = lo + phi * (hi - lo);
        if f(c) >= f(d) {
            hi = d;
        } else {
            lo = c;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn net_profit_matches_tilted_law_oracle() {
    let p = ModelParams::new(1.0, 1.0, 0.05, Horizon::Infinite).unwrap();
    let g = FnProfit::new(|t: f64| (-t).exp(), 0.0);
    let zs = [0.1, 0.5, 0.68642389, 1.5, 4.0];
    let curve = net_profit_curve(&p, 0.0, &g, &zs).unwrap();
    for (&z, &u) in zs.iter().zip(&curve) {
        let oracle = net_profit_oracle(p.kappa(), 0.0, z);
        assert!((u - oracle).abs() < 1e-8, "z={z}: {u} vs {oracle}");
    }
    let z_star = golden_max(|z| net_profit_oracle(p.kappa(), 0.0, z), 0.2, 2.0);
    assert!((z_star - 0.68642389).abs() < 1e-5, "{z_star}");
    let u_star = net_profit_oracle(p.kappa(), 0.0, z_star);
    assert!((u_star - 0.403372970427).abs() < 1e-9, "{u_star}");

    let design = max_net_profit(&p, 0.0, &g).unwrap();
    assert!((design.net_profit - u_star).abs() < 1e-8, "{}", design.net_profit);
    assert!((design.maximizer - z_star).abs() < 1e-5);
    assert!((design.cutoff_time - z_star).abs() < 1e-5);
    let at_b = net_profit_curve(&p, 0.0, &g, &[design.cutoff_time]).unwrap()[0];
    assert!((at_b - design.net_profit).abs() < 1e-8);
    let at_inf = net_profit_curve(&p, 0.0, &g, &[f64::INFINITY]).unwrap()[0];
    assert!(at_inf.abs() < 1e-12, "{at_inf}");
}

#[test]
fn expensive_effort_means_no_bonus() {
    let p = ModelParams::new(1.0, 1.0, 1.0, Horizon::Infinite).unwrap();
    let g = FnProfit::new(|t: f64| (-t).exp(), 0.0);
    let design = max_net_profit(&p, 0.0, &g).unwrap();
    let oracle = (-(2f64.sqrt())).exp();
    assert!((design.net_profit - oracle).abs() < 1e-8, "{}", design.net_profit);
    assert_eq!(design.cutoff_time, 0.0);
}

/// Net profit `E[g(τ)] − ∫H` of an arbitrary reward, with
/// `E[g(τ)] = ∫ F_μ(t) e^{−t} dt` after integrating by parts.
#[test]
fn net_profit_optimum_beats_random_schemes() {
    let p = ModelParams::new(1.0, 1.0, 0.05, Horizon::Infinite).unwrap();
    let g = FnProfit::new(|t: f64| (-t).exp(), 0.0);
    let best = max_net_profit(&p, 0.0, &g).unwrap().net_profit;
    let mut rng = rng(23);
    for case in 0..30 {
        let reward = with_budget(&random_reward(&mut rng, 0.0), rng.random_range(0.02..0.6));
        let eq = solve_hom(&p, &reward).unwrap();
        let e_g: f64 = [0.0, 0.25, 1.0, 4.0, 40.0]
            .windows(2)
            .map(|w| simpson(&|t| eq.cdf(t) * (-t).exp(), w[0], w[1], 1e-13))
            .sum();
        let u = e_g - reward.mean();
        assert!(u <= best + 1e-7, "case {case}: {u} > {best}");
    }
}

#[test]
fn optimal_profit_reward_realizes_its_value() {
    let p = ModelParams::new(1.0, 1.0, 0.05, Horizon::Infinite).unwrap();
    let g = FnProfit::new(|t: f64| (-t).exp(), 0.0);
    let design = max_net_profit(&p, 0.0, &g).unwrap();
    let eq = solve_hom(&p, &design.reward).unwrap();
    let e_g: f64 =
        [0.0, 0.25, 1.0, 4.0, 40.0].windows(2).map(|w| simpson(&|t| eq.cdf(t) * (-t).exp(), w[0], w[1], 1e-13)).sum();
    let u = e_g - design.reward.mean();
    assert!((u - design.net_profit).abs() < 1e-5, "{u} vs {}", design.net_profit);
}

#[test]
fn profit_table_agrees_with_closure() {
    let p = ModelParams::new(1.0, 1.0, 0.05, Horizon::Infinite).unwrap();
    let times: Vec<f64> = (0..=4000).map(|i| i as f64 * 0.01).collect();
    let values: Vec<f64> = times.iter().map(|t| (-t).exp()).collect();
    let table = ProfitTable::new(times, values).unwrap();
    let design = max_net_profit(&p, 0.0, &table).unwrap();
    assert!((design.net_profit - 0.403372970427).abs() < 1e-4, "{}", design.net_profit);
}

fn round_trip(t: f64) {
    let p = bench(Horizon::from_time(t));
    let h = quadratic(6.0);
    let eq = solve_hom(&p, &h).unwrap();
    let end = if t.is_finite() { t } else { 1e9 };
    let n = 20_000;
    let times: Vec<f64> = (1..=n).map(|i| 0.02 * (end / 0.02).powf(i as f64 / n as f64)).collect();
    let density: Vec<f64> = times.iter().map(|&s| eq.density(s.min(end * (1.0 - 1e-15)))).collect();
    let cdf: Vec<f64> = times.iter().map(|&s| eq.cdf(s)).collect();
    let target = TargetDistribution::new(times.clone(), density, cdf.clone()).unwrap();
    let rec = reverse_engineer(&p, 0.0, &target).unwrap();
    // the rank reward is recovered up to a constant without a deadline
    let offsets: Vec<f64> = rec.ranks.iter().zip(&rec.values).map(|(&r, &v)| v - h.eval(r)).collect();
    let spread = offsets.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        - offsets.iter().copied().fold(f64::INFINITY, f64::min);
    assert!(spread < 1e-6, "T={t}: spread {spread}");
    if t.is_finite() {
        assert!(offsets[0].abs() < 1e-6);
    }
    let again = solve_hom(&p, &rec.reward).unwrap();
    for (&s, &c) in times.iter().zip(&cdf).step_by(397) {
        assert!((again.cdf(s) - c).abs() < 1e-6, "T={t} t={s}: {} vs {c}", again.cdf(s));
    }
    assert!((again.beta() - eq.beta()).abs() < 1e-6);
}

#[test]
fn reverse_engineering_round_trip_with_deadline() {
    round_trip(1.0);
    round_trip(5.0);
}

#[test]
fn reverse_engineering_round_trip_without_deadline() {
    round_trip(f64::INFINITY);
}

#[test]
fn reverse_engineering_rejects_rising_likelihood_ratio() {
    let p = bench(Horizon::Infinite);
    // a law slower than the uncontrolled one
    let slow = ModelParams::new(1.5, 0.25, 1.0, Horizon::Infinite).unwrap();
    let times: Vec<f64> = (1..=200).map(|i| 0.05 * i as f64).collect();
    let density: Vec<f64> = times.iter().map(|&s| hitting_pdf(s, slow.x0, slow.sigma)).collect();
    let cdf: Vec<f64> = times.iter().map(|&s| hitting_cdf(s, slow.x0, slow.sigma)).collect();
    let target = TargetDistribution::new(times, density, cdf).unwrap();
    assert!(matches!(reverse_engineer(&p, 0.0, &target), Err(Error::Infeasible(_))));
}

#[test]
fn invalid_design_inputs_are_rejected() {
    let p = bench(Horizon::Finite(1.0));
    assert!(matches!(min_budget(&p, 0.0, 1.5), Err(Error::Domain(_))));
    assert!(matches!(min_quantile_reward(&p, 0.0, 1.0, 0.0), Err(Error::Domain(_))));
    assert!(matches!(max_completion_rate(&p, 1.0, 0.5), Err(Error::Domain(_))));
    assert!(matches!(auxiliary_optimum(0.5, -1.0, 0.0, 1.0), Err(Error::Domain(_))));
    let g = FnProfit::new(|t: f64| (-t).exp(), 0.0);
    assert!(matches!(max_net_profit(&p, 0.0, &g), Err(Error::Domain(_))));
    let inf = bench(Horizon::Infinite);
    let rising = FnProfit::new(|t: f64| t.min(1.0), 1.0);
    assert!(matches!(max_net_profit(&inf, 0.0, &rising), Err(Error::Domain(_))));
    let flat = FnProfit::new(|_| 1.0, 1.0);
    assert!(matches!(max_net_profit(&inf, 0.0, &flat), Err(Error::Domain(_))));
    assert!(ProfitTable::new(vec![0.0, 1.0], vec![0.0, 1.0]).is_err());
    assert!(TargetDistribution::new(vec![1.0, 0.5], vec![0.1, 0.1], vec![0.1, 0.2]).is_err());
}
