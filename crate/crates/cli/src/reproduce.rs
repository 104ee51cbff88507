//! Recomputes the reference tables and figure data and diffs them against
//! the embedded values.

use crate::config::{need, parse_reward};
use crate::error::{CliError, CliResult};
use crate::goldens::{self, TABLE1, TABLE2};
use crate::output::{num, opt, Outputs, Table};
use crate::Context;
use clap::ValueEnum;
use mft_core::equilibrium_het::solve_het;
use mft_core::pie::{bifurcation_scan, pie_critical_thresholds, root_count, RateBonus, SharedPool};
use mft_core::{solve_hom, Horizon, ModelParams};
use serde::Serialize;
use serde_json::json;

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Target {
    Table1,
    Table2,
    Fig3,
    Fig4,
    Fig5,
    Fig6,
}

/// One compared quantity.
#[derive(Debug, Serialize)]
struct Diff {
    item: String,
    field: String,
    computed: String,
    reference: String,
    delta: Option<f64>,
    tolerance: Option<f64>,
    pass: bool,
}

#[derive(Default)]
struct Report {
    rows: Vec<Diff>,
    tolerance: Option<f64>,
}

impl Report {
    fn number(&mut self, item: impl Into<String>, field: &str, computed: f64, reference: f64, tol: f64) {
        let tol = self.tolerance.unwrap_or(tol);
        let delta = computed - reference;
        self.rows.push(Diff {
            item: item.into(),
            field: field.into(),
            computed: num(computed),
            reference: num(reference),
            delta: Some(delta),
            tolerance: Some(tol),
            pass: delta.abs() <= tol,
        });
    }

    /// A quantile that may lie beyond the deadline.
    fn quantile(
        &mut self,
        item: impl Into<String>,
        field: &str,
        computed: Option<f64>,
        reference: Option<f64>,
        tol: f64,
    ) {
        match (computed, reference) {
            (Some(c), Some(r)) => self.number(item, field, c, r, tol),
            (c, r) => self.rows.push(Diff {
                item: item.into(),
                field: field.into(),
                computed: opt(c),
                reference: opt(r),
                delta: None,
                tolerance: None,
                pass: c.is_none() && r.is_none(),
            }),
        }
    }

    fn shape(&mut self, item: impl Into<String>, field: &str, computed: &str, reference: &str) {
        self.rows.push(Diff {
            item: item.into(),
            field: field.into(),
            computed: computed.into(),
            reference: reference.into(),
            delta: None,
            tolerance: None,
            pass: computed == reference,
        });
    }

    fn failed(&self) -> usize {
        self.rows.iter().filter(|d| !d.pass).count()
    }
}

pub fn run(target: Target, ctx: &Context) -> CliResult<(Outputs, CliResult<()>)> {
    let mut report = Report { tolerance: ctx.tolerance, ..Report::default() };
    let mut out = Outputs::default();
    let name = target.to_possible_value().expect("named target").get_name().to_string();
    let data = match target {
        Target::Table1 => table1(&mut report)?,
        Target::Table2 => table2(ctx, &mut report)?,
        Target::Fig3 => fig3(ctx, &mut report)?,
        Target::Fig4 => fig4(ctx, &mut report)?,
        Target::Fig5 => fig5(ctx, &mut report)?,
        Target::Fig6 => fig6(ctx, &mut report)?,
    };
    let max_delta = report.rows.iter().filter_map(|d| d.delta).fold(0.0, |m: f64, d| m.max(d.abs()));
    let failed = report.failed();
    let summary = json!({
        "target": name,
        "compared": report.rows.len(),
        "failed": failed,
        "max_abs_delta": max_delta,
        "failures": report.rows.iter().filter(|d| !d.pass).collect::<Vec<_>>(),
    });
    out.json(&format!("{name}_summary.json"), &summary)?;
    for (file, table) in data {
        out.csv(&file, table)?;
    }
    let mut diff = Table::new(&["item", "field", "computed", "reference", "delta", "tolerance", "pass"]);
    for d in &report.rows {
        diff.push(vec![
            d.item.clone(),
            d.field.clone(),
            d.computed.clone(),
            d.reference.clone(),
            opt(d.delta),
            opt(d.tolerance),
            d.pass.to_string(),
        ]);
    }
    out.csv(&format!("{name}_diff.csv"), diff)?;
    let verdict = if failed == 0 {
        Ok(())
    } else {
        Err(CliError::Mismatch(format!("{failed} of {} {name} comparisons outside tolerance", report.rows.len())))
    };
    Ok((out, verdict))
}

type Files = Vec<(String, Table)>;

fn benchmark(horizon: Horizon) -> CliResult<ModelParams> {
    Ok(ModelParams::new(1.0, 0.25, 1.0, horizon)?)
}

fn table1(report: &mut Report) -> CliResult<Files> {
    let h = parse_reward("quadratic:6", 0.0)?;
    let mut table = Table::new(&["T", "q1", "median", "q3", "beta", "value", "expected_effort"]);
    for row in &TABLE1 {
        let eq = solve_hom(&benchmark(Horizon::from_time(row.horizon))?, &h)?;
        let item = format!("T={}", row.horizon);
        let q: Vec<Option<f64>> = [0.25, 0.5, 0.75].iter().map(|&r| eq.quantile(r)).collect();
        for (k, field) in ["q1", "median", "q3"].iter().enumerate() {
            report.quantile(&item, field, q[k], row.quartiles[k], goldens::QUARTILE_TOL);
        }
        report.number(&item, "beta", eq.beta(), row.beta, goldens::RATE_TOL);
        report.number(&item, "value", eq.value(), row.value, goldens::VALUE_TOL);
        table.push(vec![
            num(row.horizon),
            opt(q[0]),
            opt(q[1]),
            opt(q[2]),
            num(eq.beta()),
            num(eq.value()),
            opt(eq.expected_effort()),
        ]);
    }
    Ok(vec![("table1.csv".into(), table)])
}

fn table2(ctx: &Context, report: &mut Report) -> CliResult<Files> {
    let bins = need(ctx.cfg.bins, "bins")?;
    let smooth = parse_reward("quadratic:15", 0.0)?;
    let step = smooth.discretize(bins)?;
    let mut table = Table::new(&["case", "method", "beta", "beta_1", "value_1", "beta_2", "value_2", "welfare"]);
    for &k in &goldens::TABLE2_HOMOGENEOUS {
        let row = &TABLE2[k];
        let (x0, cost, _) = row.atoms[0];
        let eq = solve_hom(&ModelParams::new(x0, 0.25, cost, Horizon::Finite(1.0))?, &smooth)?;
        let item = format!("case {k} closed form");
        report.number(&item, "beta", eq.beta(), row.beta, goldens::RATE_TOL);
        report.number(&item, "value", eq.value(), row.welfare, goldens::VALUE_TOL);
        let (b, v) = (num(eq.beta()), num(eq.value()));
        table.push(vec![k.to_string(), "closed_form".into(), b.clone(), b, v.clone(), String::new(), String::new(), v]);
    }
    for (k, row) in TABLE2.iter().enumerate() {
        let eq = solve_het(&row.mix(0.25)?, &step, Horizon::Finite(1.0), k as u64)?;
        let item = format!("case {k}");
        report.number(&item, "beta", eq.beta(), row.beta, goldens::MIX_RATE_TOL);
        report.number(&item, "welfare", eq.welfare(), row.welfare, goldens::MIX_VALUE_TOL);
        for (i, (o, &(b, v))) in eq.per_type().iter().zip(row.per_type).enumerate() {
            report.number(&item, &format!("beta_{}", i + 1), o.beta, b, goldens::MIX_RATE_TOL);
            report.number(&item, &format!("value_{}", i + 1), o.value, v, goldens::MIX_VALUE_TOL);
        }
        let mut cells = vec![k.to_string(), format!("mixture_d{bins}"), num(eq.beta())];
        for i in 0..2 {
            match eq.per_type().get(i) {
                Some(o) => cells.extend([num(o.beta), num(o.value)]),
                None => cells.extend([String::new(), String::new()]),
            }
        }
        cells.push(num(eq.welfare()));
        table.push(cells);
    }
    Ok(vec![("table2.csv".into(), table)])
}

fn monotone(v: &[f64]) -> &'static str {
    if v.windows(2).all(|w| w[1] < w[0]) {
        "decreasing"
    } else if v.windows(2).all(|w| w[1] > w[0]) {
        "increasing"
    } else {
        "mixed"
    }
}

/// Budget `K` and convexity `p` of `H(r) = K(1 + p)(1 − r)^p`.
fn fig3(ctx: &Context, report: &mut Report) -> CliResult<Files> {
    let params = ctx.cfg.params()?;
    let n = need(ctx.cfg.grid, "grid")?.max(2);
    let budgets = [0.25, 0.5, 1.0, 1.5, 2.0, 3.0];
    let powers = [0.25, 0.5, 1.0, 2.0, 4.0, 8.0];
    let mut values = Table::new(&["K", "p", "beta", "value", "expected_effort"]);
    let mut law = Table::new(&["K", "p", "t", "cdf", "density"]);
    let end = if params.horizon.is_finite() { params.horizon.time() } else { 5.0 };
    for &k in &budgets {
        let mut betas = Vec::new();
        let mut vals = Vec::new();
        for &p in &powers {
            let eq = solve_hom(&params, &parse_reward(&format!("power:{k},{p}"), 0.0)?)?;
            betas.push(eq.beta());
            vals.push(eq.value());
            values.push(vec![num(k), num(p), num(eq.beta()), num(eq.value()), opt(eq.expected_effort())]);
            if k == 2.0 || k == 0.25 {
                for i in 1..=n {
                    let t = end * i as f64 / n as f64;
                    law.push(vec![num(k), num(p), num(t), num(eq.cdf(t)), num(eq.density(t))]);
                }
            }
        }
        if k == 2.0 {
            report.shape("K=2", "beta in p", monotone(&betas), "decreasing");
            report.shape("K=2", "value in p", monotone(&vals), "decreasing");
        }
        if k == 0.25 {
            report.shape("K=0.25", "beta in p", monotone(&betas), "increasing");
        }
    }
    Ok(vec![("fig3_values.csv".into(), values), ("fig3_law.csv".into(), law)])
}

/// Game value against the cost coefficient.
fn fig4(ctx: &Context, report: &mut Report) -> CliResult<Files> {
    let base = ctx.cfg.params()?;
    let h = ctx.cfg.rank_reward()?;
    let costs: Vec<f64> = (0..=40).map(|i| 0.02 * (2500f64).powf(i as f64 / 40.0)).collect();
    let mut table = Table::new(&["c", "beta", "value", "expected_effort"]);
    let mut vals = Vec::new();
    for &c in &costs {
        let eq = solve_hom(&ModelParams { cost: c, ..base }, &h)?;
        vals.push(eq.value());
        table.push(vec![num(c), num(eq.beta()), num(eq.value()), opt(eq.expected_effort())]);
    }
    let best = vals.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| i).unwrap_or(0);
    let shape = if best > 0 && best + 1 < vals.len() { "interior maximum" } else { "monotone" };
    let expected = if base.horizon.is_finite() { "interior maximum" } else { "monotone" };
    report.shape("value in c", "shape", shape, expected);
    Ok(vec![("fig4.csv".into(), table)])
}

/// Equilibrium counts for the flat bonus `H(r, β) = R∞ + β`.
fn fig5(ctx: &Context, report: &mut Report) -> CliResult<Files> {
    let params = ctx.cfg.params()?;
    let kappa = params.kappa();
    let points = need(ctx.cfg.grid_points, "grid_points")?;
    let family = RateBonus { floor: ctx.cfg.floor(), floor_slope: ctx.cfg.floor_slope.unwrap_or(0.0) };
    let found = pie_critical_thresholds(kappa, &family, points)?;
    for (i, want) in goldens::FIG5_THRESHOLDS.iter().enumerate() {
        match found.get(i) {
            Some(&got) => report.number("threshold", &format!("F_{}", i + 1), got, *want, goldens::THRESHOLD_TOL),
            None => report.quantile("threshold", &format!("F_{}", i + 1), None, Some(*want), goldens::THRESHOLD_TOL),
        }
    }
    for &(f, count) in &goldens::FIG5_COUNTS {
        let got = root_count(kappa, &family, f, points)?;
        report.shape(format!("F={f}"), "equilibria", &got.to_string(), &count.to_string());
    }
    let mut table = Table::new(&["baseline_completion", "equilibria"]);
    for i in 0..=200 {
        let f = 1e-4 * (5000f64).powf(i as f64 / 200.0);
        table.push(vec![num(f), root_count(kappa, &family, f, points)?.to_string()]);
    }
    let mut thresholds = Table::new(&["threshold"]);
    for t in &found {
        thresholds.push(vec![num(*t)]);
    }
    Ok(vec![("fig5_counts.csv".into(), table), ("fig5_thresholds.csv".into(), thresholds)])
}

/// Branches of the shared-pool equilibria against the inequality `ε`.
fn fig6(ctx: &Context, report: &mut Report) -> CliResult<Files> {
    let params = ctx.cfg.params()?;
    let points = need(ctx.cfg.grid_points, "grid_points")?;
    let eps: Vec<f64> = ctx.cfg.eps.clone().unwrap_or_else(|| (0..=200).map(|i| i as f64 * 0.005).collect());
    let participation = ctx.cfg.participation.unwrap_or(0.5);
    let mut table = Table::new(&["K", "inequality", "branch", "beta", "value"]);
    let mut intervals = Table::new(&["K", "start", "end"]);
    for pool in [1.0, 1.5, 5.0] {
        let scan = bifurcation_scan(&params, |e| SharedPool { pool, participation, inequality: e }, &eps, points)?;
        for p in &scan.points {
            table.push(vec![num(pool), num(p.parameter), p.branch.to_string(), num(p.beta), num(p.value)]);
        }
        for &(a, b) in &scan.multi_valued {
            intervals.push(vec![num(pool), num(a), num(b)]);
        }
        let got = if scan.multi_valued.is_empty() { "single-valued" } else { "multi-valued" };
        let want = if pool == 1.5 { "multi-valued" } else { "single-valued" };
        report.shape(format!("K={pool}"), "branches", got, want);
    }
    Ok(vec![("fig6_branches.csv".into(), table), ("fig6_intervals.csv".into(), intervals)])
}
