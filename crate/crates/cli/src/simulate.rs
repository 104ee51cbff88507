use crate::config::need;
use crate::error::{config_err, CliResult};
use crate::output::{num, Outputs, Table};
use crate::Context;
use mft_core::equilibrium_het::{solve_het, HetEquilibrium};
use mft_core::nplayer_sim::{MeanField, SimConfig, SimReport, Simulator};
use mft_core::{solve_hom, HomEquilibrium, StepReward};
use rayon::prelude::*;
use serde_json::json;

enum Solved {
    Hom(HomEquilibrium),
    Het(HetEquilibrium),
}

impl Solved {
    fn mean_field(&self) -> MeanField<'_> {
        match self {
            Solved::Hom(eq) => MeanField::Hom(eq),
            Solved::Het(eq) => MeanField::Het(eq),
        }
    }

    fn summary(&self) -> serde_json::Value {
        match self {
            Solved::Hom(eq) => json!({ "kind": "homogeneous", "beta": eq.beta(), "value": eq.value() }),
            Solved::Het(eq) => {
                json!({ "kind": "heterogeneous", "beta": eq.beta(), "welfare": eq.welfare(), "per_type": eq.per_type() })
            }
        }
    }
}

fn mean_field(ctx: &Context) -> CliResult<(Solved, bool)> {
    let cfg = &ctx.cfg;
    let (reward, was_step) = match cfg.effort.as_deref().unwrap_or("equilibrium") {
        "equilibrium" => cfg.step_reward()?,
        "zero" => (StepReward::constant(cfg.floor(), cfg.floor())?, false),
        other => return config_err(format!("unknown effort {other:?}; known: equilibrium, zero")),
    };
    let solved = if cfg.mix.is_none() && cfg.case.is_none() {
        Solved::Hom(solve_hom(&cfg.params()?, &reward.into())?)
    } else {
        let seed = need(cfg.seed, "seed")?;
        Solved::Het(solve_het(&cfg.population()?, &reward, need(cfg.horizon, "T")?, seed)?)
    };
    Ok((solved, was_step))
}

fn sim_config(ctx: &Context, players: usize) -> CliResult<SimConfig> {
    let cfg = &ctx.cfg;
    let mut sim =
        SimConfig::new(players, need(cfg.dt, "dt")?, need(cfg.seed, "seed")?, need(cfg.replications, "replications")?);
    sim.deviations = cfg.deviations.clone().unwrap_or_default();
    sim.x_cells = need(cfg.x_cells, "x_cells")?;
    sim.validate()?;
    Ok(sim)
}

/// Least-squares slope of `ln y` against `ln x` over positive `y`.
fn log_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points.iter().filter(|p| p.1 > 0.0).map(|&(x, y)| (x.ln(), y.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}

pub fn run(ctx: &Context, trace: bool) -> CliResult<Outputs> {
    let cfg = &ctx.cfg;
    let (solved, was_step) = mean_field(ctx)?;
    let mf = solved.mean_field();
    let simulator = Simulator::new(mf, need(cfg.dt, "dt")?, need(cfg.x_cells, "x_cells")?)?;
    let scope = if was_step {
        "outside the convergence guarantee: the input reward is a step function, not Lipschitz"
    } else {
        "within the convergence guarantee: Lipschitz input reward"
    };
    let mut out = Outputs::default();

    if let Some(sweep) = cfg.sweep.as_ref().filter(|s| !s.is_empty()) {
        let configs = sweep.iter().map(|&n| sim_config(ctx, n)).collect::<CliResult<Vec<_>>>()?;
        let reports: Vec<SimReport> =
            configs.par_iter().map(|c| simulator.run(mf, c)).collect::<mft_core::Result<_>>()?;
        let mut table = Table::new(&["N", "rate", "se", "rank_error", "certificate", "max_gain"]);
        for r in &reports {
            table.push(vec![
                r.players.to_string(),
                num(r.completion_rate.mean),
                num(r.completion_rate.std_error),
                num(r.rank_error.mean),
                num(r.certificate),
                num(r.max_gain),
            ]);
        }
        let pairs: Vec<(f64, f64)> = reports.iter().map(|r| (r.players as f64, r.certificate)).collect();
        out.json(
            "sweep.json",
            &json!({
                "mean_field": solved.summary(),
                "players": sweep,
                "certificate_slope": log_slope(&pairs),
                "scope": scope,
            }),
        )?;
        out.csv("sweep.csv", table)?;
        for (c, r) in configs.iter().zip(&reports) {
            out.json(&format!("report_N{}.json", c.players), &json!({ "settings": c, "report": r }))?;
        }
        return Ok(out);
    }

    let sim = sim_config(ctx, need(cfg.players, "N")?)?;
    let report = simulator.run(mf, &sim)?;
    out.json(
        "report.json",
        &json!({ "settings": sim, "mean_field": solved.summary(), "report": report, "scope": scope }),
    )?;
    if trace {
        let mut table = Table::new(&["player", "t", "x", "effort"]);
        for player in 0..need(cfg.trace_players, "trace_players")?.min(sim.players) {
            for p in simulator.trace(&sim, 0, player)? {
                table.push(vec![player.to_string(), num(p.t), num(p.x), num(p.effort)]);
            }
        }
        out.csv("trace.csv", table)?;
    }
    Ok(out)
}
