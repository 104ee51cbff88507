use crate::config::need;
use crate::error::CliResult;
use crate::output::{num, opt, Outputs, Table};
use crate::Context;
use mft_core::equilibrium_het::solve_het;
use mft_core::{solve_hom, RankReward};
use serde_json::json;

pub fn reward_summary(r: &RankReward) -> serde_json::Value {
    json!({
        "kind": if r.is_step() { "step" } else { "smooth" },
        "floor": r.floor(),
        "mean": r.mean(),
        "max": r.max_level(),
        "min": r.min_level(),
    })
}

/// Evenly spaced points on `(0, end]`.
fn times(end: f64, n: usize) -> Vec<f64> {
    (1..=n).map(|i| end * i as f64 / n as f64).collect()
}

pub fn hom(ctx: &Context) -> CliResult<Outputs> {
    let cfg = &ctx.cfg;
    let params = cfg.params()?;
    let reward = cfg.rank_reward()?;
    let n = need(cfg.grid, "grid")?.max(2);
    let eq = solve_hom(&params, &reward)?;
    let quartiles: Vec<Option<f64>> = [0.25, 0.5, 0.75].iter().map(|&r| eq.quantile(r)).collect();
    let doc = json!({
        "params": params,
        "kappa": params.kappa(),
        "reward": reward_summary(&reward),
        "beta": eq.beta(),
        "value": eq.value(),
        "baseline_completion": eq.baseline_completion(),
        "residual": eq.residual(),
        "quartiles": quartiles,
        "expected_effort": eq.expected_effort(),
    });

    let end = if params.horizon.is_finite() { params.horizon.time() } else { eq.quantile(0.99).unwrap_or(10.0) };
    let mut quantiles = Table::new(&["rank", "time"]);
    for i in 1..100 {
        let r = i as f64 / 100.0;
        quantiles.push(vec![num(r), opt(eq.quantile(r))]);
    }
    let mut law = Table::new(&["t", "cdf", "density", "zeta", "payment"]);
    for t in times(end, n) {
        law.push(vec![num(t), num(eq.cdf(t)), num(eq.density(t)), num(eq.zeta(t)), num(eq.reward_at_time(t))]);
    }
    let side = ((n as f64).sqrt().ceil() as usize).max(2);
    let mut effort = Table::new(&["t", "x", "effort", "value"]);
    for i in 0..side {
        let t = end * i as f64 / side as f64;
        for j in 1..=side {
            let x = 2.0 * params.x0 * j as f64 / side as f64;
            let (value, a) = eq.value_and_effort(t, x);
            effort.push(vec![num(t), num(x), num(a), num(value)]);
        }
    }
    let mut out = Outputs::default();
    out.json("equilibrium.json", &doc)?;
    out.csv("quantiles.csv", quantiles)?;
    out.csv("law.csv", law)?;
    out.csv("effort.csv", effort)?;
    Ok(out)
}

pub fn het(ctx: &Context) -> CliResult<Outputs> {
    let cfg = &ctx.cfg;
    let mix = cfg.population()?;
    let (reward, _) = cfg.step_reward()?;
    let horizon = need(cfg.horizon, "T")?;
    let seed = need(cfg.seed, "seed")?;
    let n = need(cfg.grid, "grid")?.max(2);
    let eq = solve_het(&mix, &reward, horizon, seed)?;
    let quantiles = eq.quantiles();
    let doc = json!({
        "mix": mix,
        "horizon": horizon,
        "reward": reward_summary(&reward.clone().into()),
        "bins": reward.thresholds().len() + 1,
        "beta": eq.beta(),
        "welfare": eq.welfare(),
        "per_type": eq.per_type(),
        "k0": eq.k0(),
        "a_t": eq.a_t(),
        "quantiles": quantiles,
        "max_residual": eq.max_residual(),
        "restart_spread": eq.restart_spread(),
        "restarts_agree": eq.restarts_agree(),
    });
    let end = if horizon.is_finite() {
        horizon.time()
    } else {
        2.0 * quantiles.iter().flatten().copied().fold(0.0, f64::max).max(1.0)
    };
    let mut law = Table::new(&["t", "cdf"]);
    for t in times(end, n) {
        law.push(vec![num(t), num(eq.cdf(t))]);
    }
    let side = 21;
    let x_max = 2.0 * mix.atoms.iter().map(|a| a.x0).fold(0.0, f64::max);
    let mut effort = Table::new(&["type", "t", "x", "effort"]);
    for i in 0..mix.atoms.len() {
        for k in 0..side {
            let t = end * k as f64 / side as f64;
            for j in 1..=side {
                let x = x_max * j as f64 / side as f64;
                effort.push(vec![i.to_string(), num(t), num(x), num(eq.effort(i, t, x)?)]);
            }
        }
    }
    let mut out = Outputs::default();
    out.json("equilibrium.json", &doc)?;
    out.csv("law.csv", law)?;
    out.csv("effort.csv", effort)?;
    Ok(out)
}
