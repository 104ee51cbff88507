use crate::config::need;
use crate::error::{config_err, CliResult};
use crate::output::{num, Outputs, Table};
use crate::Context;
use clap::ValueEnum;
use mft_core::pie::{
    bifurcation_scan, enumerate_pie_equilibria, pie_critical_thresholds, PieFamily, RateBonus, SharedPool,
};
use mft_core::ModelParams;
use serde_json::json;

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Mode {
    /// All equilibria for the given parameters.
    Roots,
    /// Uncontrolled completion rates where the number of equilibria changes.
    Thresholds,
    /// Equilibrium branches of the shared pool against its inequality.
    Scan,
}

fn family(ctx: &Context) -> CliResult<Box<dyn PieFamily>> {
    let cfg = &ctx.cfg;
    match cfg.family.as_deref().unwrap_or("rate-bonus") {
        "rate-bonus" => Ok(Box::new(RateBonus { floor: cfg.floor(), floor_slope: cfg.floor_slope.unwrap_or(0.0) })),
        "shared-pool" => Ok(Box::new(shared(ctx, cfg.inequality.unwrap_or(0.0))?)),
        other => config_err(format!("unknown family {other:?}; known: rate-bonus, shared-pool")),
    }
}

fn shared(ctx: &Context, inequality: f64) -> CliResult<SharedPool> {
    Ok(SharedPool { pool: need(ctx.cfg.budget, "K")?, participation: ctx.cfg.participation.unwrap_or(0.5), inequality })
}

/// Moves `x0` so that `F°(T)` equals `target`.
fn with_baseline(params: ModelParams, target: f64) -> CliResult<ModelParams> {
    if !(target > 0.0 && target < 1.0) || !params.horizon.is_finite() {
        return config_err("a baseline completion rate needs a finite deadline and a value in (0, 1)");
    }
    let (mut lo, mut hi) = (1e-9_f64, 1e9_f64);
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if (ModelParams { x0: mid, ..params }).baseline_completion() > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(ModelParams::new((lo * hi).sqrt(), params.sigma, params.cost, params.horizon)?)
}

pub fn run(mode: Mode, ctx: &Context, baseline: Option<f64>) -> CliResult<Outputs> {
    let cfg = &ctx.cfg;
    let mut params = cfg.params()?;
    if let Some(f) = baseline {
        params = with_baseline(params, f)?;
    }
    let points = need(cfg.grid_points, "grid_points")?;
    let mut out = Outputs::default();
    match mode {
        Mode::Roots => {
            let fam = family(ctx)?;
            let eq = enumerate_pie_equilibria(&params, fam.as_ref(), points)?;
            out.json(
                "pie.json",
                &json!({ "params": params, "baseline_completion": params.baseline_completion(), "equilibria": eq }),
            )?;
        }
        Mode::Thresholds => {
            let fam = family(ctx)?;
            let t = pie_critical_thresholds(params.kappa(), fam.as_ref(), points)?;
            out.json("pie.json", &json!({ "kappa": params.kappa(), "thresholds": t }))?;
        }
        Mode::Scan => {
            let eps = need(cfg.eps.clone(), "eps")?;
            let base = shared(ctx, 0.0)?;
            let scan = bifurcation_scan(&params, |e| SharedPool { inequality: e, ..base }, &eps, points)?;
            let mut table = Table::new(&["inequality", "branch", "beta", "value"]);
            for p in &scan.points {
                table.push(vec![num(p.parameter), p.branch.to_string(), num(p.beta), num(p.value)]);
            }
            out.json(
                "pie.json",
                &json!({ "params": params, "family": base, "multi_valued": scan.multi_valued, "points": table.len() }),
            )?;
            out.csv("branches.csv", table)?;
        }
    }
    Ok(out)
}
