use crate::config::need;
use crate::error::{config_err, CliError, CliResult};
use crate::output::{num, Outputs, Table};
use crate::solve::reward_summary;
use crate::Context;
use clap::ValueEnum;
use mft_core::design::{
    max_completion_rate, max_net_profit, max_welfare_reward, min_budget, min_quantile_reward, ProfitCurve, ProfitTable,
};
use mft_core::quad;
use mft_core::solve_hom;
use serde_json::json;
use std::path::Path;

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Problem {
    /// Fastest time for a given fraction to finish.
    Quantile,
    /// Smallest budget reaching a completion rate.
    Budget,
    /// Largest completion rate for a budget.
    Rate,
    /// Largest game value for a budget.
    Welfare,
    /// Largest expected profit net of prizes.
    Profit,
}

/// A number, or `R_inf` for a budget equal to the floor.
pub fn parse_budget(s: &str, floor: f64) -> CliResult<f64> {
    match s {
        "R_inf" | "R∞" | "floor" => Ok(floor),
        _ => s.parse().map_err(|_| CliError::Config(format!("invalid budget {s:?}"))),
    }
}

fn read_profit(path: &Path) -> CliResult<ProfitTable> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| CliError::Config(format!("cannot read profit table {}: {e}", path.display())))?;
    let header = reader.headers()?.clone();
    if header.len() != 2 || &header[0] != "t" || &header[1] != "g" {
        return config_err(format!("{}: expected header t,g", path.display()));
    }
    let (mut times, mut values) = (Vec::new(), Vec::new());
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let parse = |i: usize| {
            record[i].trim().parse::<f64>().map_err(|_| {
                CliError::Config(format!("{}: line {}: invalid number {:?}", path.display(), line + 2, &record[i]))
            })
        };
        times.push(parse(0)?);
        values.push(parse(1)?);
    }
    Ok(ProfitTable::new(times, values)?)
}

pub fn run(problem: Problem, ctx: &Context, budget: Option<f64>) -> CliResult<(Outputs, CliResult<()>)> {
    let cfg = &ctx.cfg;
    let params = cfg.params()?;
    let floor = cfg.floor();
    let budget = budget.or(cfg.budget);
    let mut out = Outputs::default();
    let solution = match problem {
        Problem::Quantile => min_quantile_reward(&params, floor, need(budget, "K")?, need(cfg.alpha, "alpha")?)?,
        Problem::Budget => min_budget(&params, floor, need(cfg.alpha, "alpha")?)?,
        Problem::Rate => max_completion_rate(&params, floor, need(budget, "K")?)?,
        Problem::Welfare => max_welfare_reward(&params, floor, need(budget, "K")?)?,
        Problem::Profit => return profit(ctx),
    };
    let name = problem.to_possible_value().expect("named problem").get_name().to_string();
    let doc = json!({
        "problem": name,
        "params": params,
        "floor": floor,
        "budget": budget,
        "alpha": cfg.alpha,
        "solution": solution,
    });
    out.json("design.json", &doc)?;
    Ok((out, Ok(())))
}

fn profit(ctx: &Context) -> CliResult<(Outputs, CliResult<()>)> {
    let cfg = &ctx.cfg;
    let params = cfg.params()?;
    let floor = cfg.floor();
    let path = need(cfg.g.clone(), "g")?;
    let table = read_profit(&path)?;
    let design = max_net_profit(&params, floor, &table)?;

    // independent check: E[g(τ)] = g(0) + ∫ g'(t)(1 − F(t)) dt under the designed reward
    let eq = solve_hom(&params, &design.reward)?;
    let mut knots = table.kinks();
    knots.retain(|&t| t > 0.0);
    knots.insert(0, 0.0);
    let survival = |t: f64| 1.0 - eq.cdf(t);
    let mut e_g = table.at(0.0);
    for w in knots.windows(2) {
        let slope = (table.at(w[1]) - table.at(w[0])) / (w[1] - w[0]);
        if slope != 0.0 {
            e_g += slope * quad::integrate(survival, w[0], w[1], 1e-12, 1e-10).value;
        }
    }
    let oracle = e_g - design.reward.mean();
    let tol = ctx.tolerance.unwrap_or(1e-4);
    let agrees = (oracle - design.net_profit).abs() <= tol;

    let doc = json!({
        "problem": "profit",
        "params": params,
        "floor": floor,
        "profit_table": path.display().to_string(),
        "maximizer": design.maximizer,
        "cutoff_time": design.cutoff_time,
        "net_profit": design.net_profit,
        "maximizers": design.maximizers,
        "scale": design.scale,
        "oracle": { "net_profit": oracle, "tolerance": tol, "agrees": agrees },
        "reward": reward_summary(&design.reward),
    });
    let mut density = Table::new(&["t", "density"]);
    for &(t, f) in &design.density {
        density.push(vec![num(t), num(f)]);
    }
    let mut out = Outputs::default();
    out.json("design.json", &doc)?;
    out.json("profit_reward.json", &design.reward)?;
    out.csv("profit_density.csv", density)?;
    let verdict = if agrees {
        Ok(())
    } else {
        Err(CliError::Mismatch(format!(
            "net profit {} disagrees with the direct expectation {oracle}",
            design.net_profit
        )))
    };
    Ok((out, verdict))
}
