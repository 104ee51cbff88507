//! Experiment configuration: flags over a JSON config file over a preset over
//! built-in defaults.

use crate::error::{config_err, CliError, CliResult};
use crate::goldens;
use mft_core::equilibrium_het::{Atom, PopulationMix};
use mft_core::nplayer_sim::Deviation;
use mft_core::{Horizon, ModelParams, RankReward, SmoothReward, StepReward};
use serde::Deserialize;
use std::path::{Path, PathBuf};

/// Every setting any command reads; absent fields fall through to the next layer.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub x0: Option<f64>,
    pub sigma: Option<f64>,
    pub cost: Option<f64>,
    #[serde(rename = "T")]
    pub horizon: Option<Horizon>,
    pub reward: Option<RewardSource>,
    pub floor: Option<f64>,
    pub bins: Option<usize>,
    pub mix: Option<Vec<Atom>>,
    pub case: Option<usize>,
    pub seed: Option<u64>,
    pub grid: Option<usize>,
    #[serde(rename = "K")]
    pub budget: Option<f64>,
    pub alpha: Option<f64>,
    pub g: Option<PathBuf>,
    pub family: Option<String>,
    pub floor_slope: Option<f64>,
    pub participation: Option<f64>,
    pub inequality: Option<f64>,
    pub eps: Option<Vec<f64>>,
    pub grid_points: Option<usize>,
    #[serde(rename = "N")]
    pub players: Option<usize>,
    pub dt: Option<f64>,
    pub replications: Option<usize>,
    pub deviations: Option<Vec<Deviation>>,
    pub effort: Option<String>,
    pub sweep: Option<Vec<usize>>,
    pub x_cells: Option<usize>,
    pub trace_players: Option<usize>,
}

/// A reward given inline as JSON or as a short string.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum RewardSource {
    Text(String),
    Reward(RankReward),
}

macro_rules! fill {
    ($a:ident, $b:ident, $($f:ident),*) => {
        $( if $a.$f.is_none() { $a.$f = $b.$f.clone(); } )*
    };
}

impl ExperimentConfig {
    /// Fills unset fields from `lower`.
    pub fn over(mut self, lower: &ExperimentConfig) -> Self {
        fill!(
            self,
            lower,
            x0,
            sigma,
            cost,
            horizon,
            reward,
            floor,
            bins,
            mix,
            case,
            seed,
            grid,
            budget,
            alpha,
            g,
            family,
            floor_slope,
            participation,
            inequality,
            eps,
            grid_points,
            players,
            dt,
            replications,
            deviations,
            effort,
            sweep,
            x_cells,
            trace_players
        );
        self
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: ExperimentConfig =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        // relative paths inside a config resolve against its directory
        let base = path.parent().unwrap_or(Path::new("."));
        let mut cfg = cfg;
        if let Some(g) = &cfg.g {
            if g.is_relative() {
                cfg.g = Some(base.join(g));
            }
        }
        if let Some(RewardSource::Text(s)) = &cfg.reward {
            if let Some(file) = s.strip_prefix("file:") {
                if Path::new(file).is_relative() {
                    cfg.reward = Some(RewardSource::Text(format!("file:{}", base.join(file).display())));
                }
            }
        }
        cfg.check_files()?;
        Ok(cfg)
    }

    /// Referenced files must exist before anything runs.
    pub fn check_files(&self) -> CliResult<()> {
        if let Some(g) = &self.g {
            if !g.is_file() {
                return config_err(format!("profit table {} does not exist", g.display()));
            }
        }
        if let Some(RewardSource::Text(s)) = &self.reward {
            if let Some(file) = s.strip_prefix("file:") {
                if !Path::new(file).is_file() {
                    return config_err(format!("reward file {file} does not exist"));
                }
            }
        }
        Ok(())
    }

    pub fn preset(name: &str) -> CliResult<Self> {
        let base = Self::defaults();
        let p = match name {
            "table1" => base,
            "table2" => Self { reward: Some(RewardSource::Text("quadratic:15".into())), case: Some(0), ..base },
            "fig5" => Self { family: Some("rate-bonus".into()), ..base },
            "fig6" => Self {
                family: Some("shared-pool".into()),
                budget: Some(1.5),
                participation: Some(0.5),
                eps: Some((0..=200).map(|i| i as f64 * 0.005).collect()),
                ..base
            },
            "nash" => Self {
                sweep: Some(vec![64, 256, 1024, 4096]),
                replications: Some(16),
                deviations: Some(vec![
                    Deviation::Zero,
                    Deviation::Scaled { factor: 0.8 },
                    Deviation::Scaled { factor: 1.2 },
                ]),
                ..base
            },
            other => return config_err(format!("unknown preset {other:?}; known: table1, table2, fig5, fig6, nash")),
        };
        Ok(p)
    }

    /// `x0 = 1`, `σ = 0.25`, `c = 1`, `T = 1`, `H(r) = 6(1 − r)²`, `R∞ = 0`.
    pub fn defaults() -> Self {
        Self {
            x0: Some(1.0),
            sigma: Some(0.25),
            cost: Some(1.0),
            horizon: Some(Horizon::Finite(1.0)),
            reward: Some(RewardSource::Text("quadratic:6".into())),
            floor: Some(0.0),
            bins: Some(400),
            seed: Some(0),
            grid: Some(200),
            grid_points: Some(2000),
            players: Some(1024),
            dt: Some(1e-3),
            replications: Some(8),
            x_cells: Some(400),
            trace_players: Some(4),
            effort: Some("equilibrium".into()),
            ..Self::default()
        }
    }

    pub fn params(&self) -> CliResult<ModelParams> {
        Ok(ModelParams::new(
            need(self.x0, "x0")?,
            need(self.sigma, "sigma")?,
            need(self.cost, "cost")?,
            need(self.horizon, "T")?,
        )?)
    }

    pub fn floor(&self) -> f64 {
        self.floor.unwrap_or(0.0)
    }

    pub fn rank_reward(&self) -> CliResult<RankReward> {
        match self.reward.as_ref() {
            Some(RewardSource::Text(s)) => parse_reward(s, self.floor()),
            Some(RewardSource::Reward(r)) => Ok(r.clone()),
            None => config_err("no reward given"),
        }
    }

    /// The reward as steps, discretizing smooth rewards into `bins` ranks.
    pub fn step_reward(&self) -> CliResult<(StepReward, bool)> {
        match self.rank_reward()? {
            RankReward::Step(s) => Ok((s, true)),
            r => Ok((r.discretize(need(self.bins, "bins")?)?, false)),
        }
    }

    pub fn population(&self) -> CliResult<PopulationMix> {
        let sigma = need(self.sigma, "sigma")?;
        match (&self.mix, self.case) {
            (Some(atoms), _) => Ok(PopulationMix::new(atoms.clone(), sigma)?),
            (None, Some(k)) => {
                let case =
                    goldens::TABLE2.get(k).ok_or_else(|| CliError::Config(format!("case {k} out of range 0..=10")))?;
                Ok(case.mix(sigma)?)
            }
            (None, None) => Ok(PopulationMix::degenerate(need(self.x0, "x0")?, need(self.cost, "cost")?, sigma)?),
        }
    }
}

pub fn need<T: Clone>(v: Option<T>, name: &str) -> CliResult<T> {
    v.ok_or_else(|| CliError::Config(format!("missing setting {name}")))
}

pub fn parse_horizon(s: &str) -> Result<Horizon, String> {
    match s.trim().to_ascii_lowercase().as_str() {
        "inf" | "infinity" | "∞" => Ok(Horizon::Infinite),
        t => t.parse::<f64>().map(Horizon::from_time).map_err(|_| format!("invalid horizon {s:?}")),
    }
}

fn numbers(s: &str) -> CliResult<Vec<f64>> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| p.trim().parse::<f64>().map_err(|_| CliError::Config(format!("invalid number {p:?}"))))
        .collect()
}

/// Parses a reward string:
///
/// ```text
/// constant:L             H ≡ L
/// quadratic:A            H(r) = R∞ + A(1 − r)²
/// power:K,p              H(r) = R∞ + K(1 + p)(1 − r)^p
/// step:r1,r2/l0,l1,l2    H = l_k on [r_k, r_{k+1})
/// cutoff:K,alpha         top prize to the first α, budget K
/// file:path.json         reward document
/// ```
pub fn parse_reward(text: &str, floor: f64) -> CliResult<RankReward> {
    let (kind, body) = text.split_once(':').unwrap_or((text, ""));
    let args = || numbers(body);
    let smooth = |f: &dyn Fn(f64) -> f64| -> CliResult<RankReward> {
        Ok(SmoothReward::from_fn(|r| floor + f(r), 4000, floor)?.into())
    };
    match kind {
        "constant" => match args()?.as_slice() {
            [l] => Ok(StepReward::constant(*l, floor)?.into()),
            _ => config_err("constant reward takes one level, e.g. constant:0"),
        },
        "quadratic" => match args()?.as_slice() {
            [a] => smooth(&|r| a * (1.0 - r).powi(2)),
            _ => config_err("quadratic reward takes one scale, e.g. quadratic:6"),
        },
        "power" => match args()?.as_slice() {
            [k, p] if *p > 0.0 => smooth(&|r| k * (1.0 + p) * (1.0 - r).powf(*p)),
            _ => config_err("power reward takes a budget and a positive exponent, e.g. power:2,1.5"),
        },
        "step" => {
            let (t, l) =
                body.split_once('/').ok_or_else(|| CliError::Config("step reward is step:r1,r2/l0,l1,l2".into()))?;
            Ok(StepReward::new(numbers(t)?, numbers(l)?, floor)?.into())
        }
        "cutoff" => match args()?.as_slice() {
            [k, alpha] => Ok(mft_core::design::cutoff_reward(floor, *k, *alpha)?.into()),
            _ => config_err("cutoff reward takes a budget and a rank, e.g. cutoff:1,0.5"),
        },
        "file" => {
            let text = std::fs::read_to_string(body)
                .map_err(|e| CliError::Config(format!("cannot read reward {body}: {e}")))?;
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{body}: {e}")))
        }
        other => {
            config_err(format!("unknown reward kind {other:?}; known: constant, quadratic, power, step, cutoff, file"))
        }
    }
}

/// Parses `x0:c:w,x0:c:w,...`.
pub fn parse_mix(s: &str) -> CliResult<Vec<Atom>> {
    s.split(',')
        .map(|atom| {
            let v: Vec<&str> = atom.split(':').collect();
            let num = |x: &str| {
                x.trim().parse::<f64>().map_err(|_| CliError::Config(format!("invalid mixture atom {atom:?}")))
            };
            match v.as_slice() {
                [x0, c, w] => Ok(Atom { x0: num(x0)?, cost: num(c)?, weight: num(w)? }),
                _ => config_err(format!("mixture atoms are x0:cost:weight, got {atom:?}")),
            }
        })
        .collect()
}

/// Parses `zero`, `scaled:λ` or `constant:a`.
pub fn parse_deviation(s: &str) -> CliResult<Deviation> {
    let (kind, arg) = s.split_once(':').unwrap_or((s, ""));
    let num = || arg.parse::<f64>().map_err(|_| CliError::Config(format!("invalid deviation {s:?}")));
    match kind {
        "zero" => Ok(Deviation::Zero),
        "scaled" => Ok(Deviation::Scaled { factor: num()? }),
        "constant" => Ok(Deviation::Constant { effort: num()? }),
        _ => config_err(format!("unknown deviation {s:?}; known: zero, scaled:λ, constant:a")),
    }
}

/// Parses `a:b:step` into an inclusive grid.
pub fn parse_range(s: &str) -> CliResult<Vec<f64>> {
    let v = s.split(':').map(|p| p.parse::<f64>()).collect::<Result<Vec<f64>, _>>();
    match v.as_deref() {
        Ok([a, b, h]) if *h > 0.0 && b >= a => {
            let n = ((b - a) / h + 1e-9).floor() as usize;
            Ok((0..=n).map(|i| a + i as f64 * h).collect())
        }
        _ => config_err(format!("ranges are start:end:step with a positive step, got {s:?}")),
    }
}

/// Parses `N=64,256,1024`.
pub fn parse_sweep(s: &str) -> CliResult<Vec<usize>> {
    let body = s.strip_prefix("N=").ok_or_else(|| CliError::Config(format!("sweeps are N=n1,n2,..., got {s:?}")))?;
    body.split(',')
        .map(|n| n.trim().parse::<usize>().map_err(|_| CliError::Config(format!("invalid player count {n:?}"))))
        .collect()
}
