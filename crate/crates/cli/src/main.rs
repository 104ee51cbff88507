//! `mft`: command-line front end for mean-field tournament experiments.

mod config;
mod design;
mod error;
mod goldens;
mod output;
mod pie;
mod reproduce;
mod simulate;
mod solve;

use clap::{Args, Parser, Subcommand};
use config::{parse_horizon, ExperimentConfig, RewardSource};
use error::{CliError, CliResult};
use mft_core::Horizon;
use output::Outputs;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "mft", version, about = "Mean-field rank-based tournaments: equilibria, design and simulation")]
struct Cli {
    /// JSON experiment config; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for output files; without it only the summary is printed.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Named parameter set: table1, table2, fig5, fig6, nash.
    #[arg(long, global = true)]
    preset: Option<String>,
    /// Absolute tolerance replacing the built-in ones in `reproduce` and the profit cross-check.
    #[arg(long, global = true)]
    tolerance: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default, Clone)]
struct ModelArgs {
    #[arg(long, allow_negative_numbers = true)]
    x0: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    sigma: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    cost: Option<f64>,
    /// Deadline, a number or `inf`.
    #[arg(long = "T", value_parser = parse_horizon)]
    horizon: Option<Horizon>,
    /// constant:L, quadratic:A, power:K,p, step:r1,../l0,.., cutoff:K,alpha or file:path.json
    #[arg(long)]
    reward: Option<String>,
    /// Payment for missing the deadline.
    #[arg(long, allow_negative_numbers = true)]
    floor: Option<f64>,
    /// Rank bins used when a smooth reward must be discretized.
    #[arg(long)]
    bins: Option<usize>,
}

impl ModelArgs {
    fn config(&self) -> ExperimentConfig {
        ExperimentConfig {
            x0: self.x0,
            sigma: self.sigma,
            cost: self.cost,
            horizon: self.horizon,
            reward: self.reward.clone().map(RewardSource::Text),
            floor: self.floor,
            bins: self.bins,
            ..ExperimentConfig::default()
        }
    }
}

#[derive(Args, Default, Clone)]
struct MixArgs {
    /// Population as x0:cost:weight atoms, comma separated.
    #[arg(long)]
    mix: Option<String>,
    /// Mixture from the reference heterogeneous table, 0 to 10.
    #[arg(long)]
    case: Option<usize>,
}

impl MixArgs {
    fn apply(&self, cfg: &mut ExperimentConfig) -> CliResult<()> {
        if let Some(m) = &self.mix {
            cfg.mix = Some(config::parse_mix(m)?);
        }
        cfg.case = self.case;
        Ok(())
    }
}

#[derive(Subcommand)]
enum Command {
    /// Equilibrium of a homogeneous population.
    SolveHom {
        #[command(flatten)]
        model: ModelArgs,
        /// Points per output grid.
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Equilibrium of a mixture of player types under a step reward.
    SolveHet {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        mix: MixArgs,
    },
    /// Recompute a reference table or figure and diff it against embedded values.
    Reproduce {
        #[arg(value_enum)]
        target: reproduce::Target,
    },
    /// Optimal reward design.
    Design {
        #[arg(value_enum)]
        problem: design::Problem,
        #[command(flatten)]
        model: ModelArgs,
        /// Budget `∫H`; `R_inf` means no budget beyond the floor.
        #[arg(long = "K", allow_hyphen_values = true)]
        budget: Option<String>,
        #[arg(long, allow_negative_numbers = true)]
        alpha: Option<f64>,
        /// CSV profit table with columns t,g.
        #[arg(long)]
        g: Option<PathBuf>,
    },
    /// Equilibria when the prize pool depends on the completion rate.
    Pie {
        #[arg(value_enum)]
        mode: pie::Mode,
        #[command(flatten)]
        model: ModelArgs,
        /// rate-bonus or shared-pool.
        #[arg(long)]
        family: Option<String>,
        #[arg(long, allow_negative_numbers = true)]
        floor_slope: Option<f64>,
        /// Pool size of the shared-pool family.
        #[arg(long = "K", allow_negative_numbers = true)]
        pool: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        participation: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        inequality: Option<f64>,
        /// Inequality grid for scans, start:end:step.
        #[arg(long)]
        eps: Option<String>,
        #[arg(long)]
        grid_points: Option<usize>,
        /// Uncontrolled completion rate at the deadline; sets x0 accordingly.
        #[arg(long, allow_negative_numbers = true)]
        baseline: Option<f64>,
    },
    /// Monte Carlo simulation of the finite-player game.
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        mix: MixArgs,
        #[arg(long = "N")]
        players: Option<usize>,
        #[arg(long, allow_negative_numbers = true)]
        dt: Option<f64>,
        #[arg(long)]
        replications: Option<usize>,
        /// zero, scaled:λ or constant:a; repeatable or comma separated.
        #[arg(long, value_delimiter = ',')]
        deviation: Vec<String>,
        /// equilibrium or zero.
        #[arg(long)]
        effort: Option<String>,
        /// Player counts, N=n1,n2,...
        #[arg(long)]
        sweep: Option<String>,
        /// Dump per-path traces (player, t, X, a).
        #[arg(long)]
        trace: bool,
        #[arg(long)]
        trace_players: Option<usize>,
        #[arg(long)]
        x_cells: Option<usize>,
    },
}

/// Resolved settings and global options handed to each command.
pub struct Context {
    pub cfg: ExperimentConfig,
    pub tolerance: Option<f64>,
}

fn resolve(cli: &Cli, mut flags: ExperimentConfig) -> CliResult<Context> {
    flags.seed = cli.seed;
    flags.check_files()?;
    let file = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    let preset = match &cli.preset {
        Some(name) => ExperimentConfig::preset(name)?,
        None => ExperimentConfig::defaults(),
    };
    let cfg = flags.over(&file).over(&preset).over(&ExperimentConfig::defaults());
    if let Some(t) = cli.tolerance {
        if !(t.is_finite() && t > 0.0) {
            return error::config_err(format!("tolerance must be positive, got {t}"));
        }
    }
    Ok(Context { cfg, tolerance: cli.tolerance })
}

fn configure_threads() -> CliResult<()> {
    if let Ok(v) = std::env::var("MFT_THREADS") {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| CliError::Config(format!("MFT_THREADS must be a positive integer, got {v:?}")))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::Config(e.to_string()))?;
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    configure_threads()?;
    let (outputs, verdict): (Outputs, CliResult<()>) = match &cli.command {
        Command::SolveHom { model, grid } => {
            let mut flags = model.config();
            flags.grid = *grid;
            (solve::hom(&resolve(&cli, flags)?)?, Ok(()))
        }
        Command::SolveHet { model, mix } => {
            let mut flags = model.config();
            mix.apply(&mut flags)?;
            (solve::het(&resolve(&cli, flags)?)?, Ok(()))
        }
        Command::Reproduce { target } => {
            let ctx = resolve(&cli, ExperimentConfig::default())?;
            reproduce::run(*target, &ctx)?
        }
        Command::Design { problem, model, budget, alpha, g } => {
            let mut flags = model.config();
            flags.alpha = *alpha;
            flags.g = g.clone();
            let ctx = resolve(&cli, flags)?;
            let budget = budget.as_deref().map(|b| design::parse_budget(b, ctx.cfg.floor())).transpose()?;
            design::run(*problem, &ctx, budget)?
        }
        Command::Pie {
            mode,
            model,
            family,
            floor_slope,
            pool,
            participation,
            inequality,
            eps,
            grid_points,
            baseline,
        } => {
            let mut flags = model.config();
            flags.family = family.clone();
            flags.floor_slope = *floor_slope;
            flags.budget = *pool;
            flags.participation = *participation;
            flags.inequality = *inequality;
            flags.eps = eps.as_deref().map(config::parse_range).transpose()?;
            flags.grid_points = *grid_points;
            (pie::run(*mode, &resolve(&cli, flags)?, *baseline)?, Ok(()))
        }
        Command::Simulate {
            model,
            mix,
            players,
            dt,
            replications,
            deviation,
            effort,
            sweep,
            trace,
            trace_players,
            x_cells,
        } => {
            let mut flags = model.config();
            mix.apply(&mut flags)?;
            flags.players = *players;
            flags.dt = *dt;
            flags.replications = *replications;
            if !deviation.is_empty() {
                flags.deviations =
                    Some(deviation.iter().map(|d| config::parse_deviation(d)).collect::<CliResult<_>>()?);
            }
            flags.effort = effort.clone();
            flags.sweep = sweep.as_deref().map(config::parse_sweep).transpose()?;
            flags.trace_players = *trace_players;
            flags.x_cells = *x_cells;
            (simulate::run(&resolve(&cli, flags)?, *trace)?, Ok(()))
        }
    };
    outputs.commit(cli.out.as_deref())?;
    verdict
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mft: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
