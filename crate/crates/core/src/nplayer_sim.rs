//! Monte Carlo simulation of the N-player game under the mean-field strategy.
//!
//! Every player follows the feedback effort of its type against the mean-field
//! payment schedule, `dX = −a(t, X) dt + σ dW`, and is paid by its empirical
//! rank among the N completion times. Deviations are evaluated with common
//! random numbers: the deviating player reuses its own noise and everyone else
//! keeps their equilibrium paths.

use crate::equilibrium_het::{HetEquilibrium, PopulationMix};
use crate::equilibrium_hom::{BoundarySchedule, HomEquilibrium};
use crate::error::{check_positive, domain, Result};
use crate::reward::{RankReward, StepReward};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Equilibrium whose feedback strategy the players follow.
#[derive(Debug, Clone, Copy)]
pub enum MeanField<'a> {
    Hom(&'a HomEquilibrium),
    Het(&'a HetEquilibrium),
}

impl MeanField<'_> {
    fn mix(&self) -> Result<PopulationMix> {
        match self {
            MeanField::Hom(eq) => {
                let p = eq.params();
                PopulationMix::degenerate(p.x0, p.cost, p.sigma)
            }
            MeanField::Het(eq) => Ok(eq.mix().clone()),
        }
    }

    fn horizon(&self) -> f64 {
        match self {
            MeanField::Hom(eq) => eq.params().horizon.time(),
            MeanField::Het(eq) => eq.horizon(),
        }
    }

    fn reward(&self) -> Result<StepReward> {
        match self {
            MeanField::Hom(eq) => match eq.reward() {
                RankReward::Step(s) => Ok(s.clone()),
                RankReward::Smooth(_) => domain("simulation needs a step reward; discretize smooth rewards first"),
            },
            MeanField::Het(eq) => Ok(eq.reward().clone()),
        }
    }

    fn schedule(&self, i: usize) -> Result<BoundarySchedule> {
        match self {
            MeanField::Hom(eq) => match eq.schedule() {
                Some(s) => Ok(s.clone()),
                None => domain("simulation needs a step reward; discretize smooth rewards first"),
            },
            MeanField::Het(eq) => eq.schedule(i),
        }
    }

    /// Mean-field distribution function of completion times.
    pub fn cdf(&self, t: f64) -> f64 {
        match self {
            MeanField::Hom(eq) => eq.cdf(t),
            MeanField::Het(eq) => eq.cdf(t),
        }
    }

    fn type_outcome(&self, i: usize) -> (f64, f64) {
        match self {
            MeanField::Hom(eq) => (eq.beta(), eq.value()),
            MeanField::Het(eq) => {
                let o = eq.per_type()[i];
                (o.beta, o.value)
            }
        }
    }
}

/// Alternative feedback rule for a single deviating player.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Deviation {
    /// `λ` times the equilibrium effort.
    Scaled {
        factor: f64,
    },
    /// A constant effort until completion or the deadline.
    Constant {
        effort: f64,
    },
    Zero,
}

impl Deviation {
    fn apply(self, equilibrium_effort: f64) -> f64 {
        match self {
            Deviation::Scaled { factor } => factor * equilibrium_effort,
            Deviation::Constant { effort } => effort,
            Deviation::Zero => 0.0,
        }
    }
}

fn default_deviators() -> usize {
    32
}

fn default_cells() -> usize {
    400
}

fn default_bridge() -> bool {
    true
}

/// Simulation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub players: usize,
    pub dt: f64,
    pub seed: u64,
    pub replications: usize,
    #[serde(default)]
    pub deviations: Vec<Deviation>,
    /// Players per replication whose deviations are evaluated.
    #[serde(default = "default_deviators")]
    pub deviators: usize,
    /// Absorb with the Brownian-bridge crossing probability within each step.
    #[serde(default = "default_bridge")]
    pub bridge: bool,
    /// Cells of the state grid on which effort is tabulated.
    #[serde(default = "default_cells")]
    pub x_cells: usize,
}

impl SimConfig {
    pub fn new(players: usize, dt: f64, seed: u64, replications: usize) -> Self {
        Self {
            players,
            dt,
            seed,
            replications,
            deviations: Vec::new(),
            deviators: default_deviators(),
            bridge: true,
            x_cells: default_cells(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.players < 2 {
            return domain("simulation needs at least two players");
        }
        if self.replications < 1 {
            return domain("simulation needs at least one replication");
        }
        if self.x_cells < 2 {
            return domain("effort table needs at least two state cells");
        }
        check_positive("dt", self.dt)
    }
}

/// Batch-mean estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    /// Standard error across replications; NaN with a single replication.
    pub std_error: f64,
}

impl Estimate {
    pub fn from_batches(v: &[f64]) -> Self {
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Self { mean, std_error: (var / n).sqrt() }
    }

    /// Whether the mean is positive at one-sided level 99%.
    pub fn significantly_positive(&self) -> bool {
        self.mean - 2.326_347_874_040_841 * self.std_error > 0.0
    }
}

/// Per-type results.
#[derive(Debug, Clone, Serialize)]
pub struct TypeReport {
    pub players: usize,
    pub completion_rate: Estimate,
    pub payoff: Estimate,
    pub mean_field_completion_rate: f64,
    pub mean_field_value: f64,
}

/// Results for one deviation rule.
#[derive(Debug, Clone, Serialize)]
pub struct DeviationReport {
    pub deviation: Deviation,
    /// Deviator payoff minus equilibrium payoff.
    pub gain: Estimate,
    pub significantly_positive: bool,
    /// `E|R_ν̄(τ′) − R_μ(τ′)|` for the deviator's completion time `τ′`.
    pub rank_error: Estimate,
}

/// Results of [`simulate_nplayer`].
#[derive(Debug, Clone, Serialize)]
pub struct SimReport {
    pub players: usize,
    pub replications: usize,
    /// Step actually used, `T` divided by a whole number of steps.
    pub dt: f64,
    pub bridge: bool,
    pub completion_rate: Estimate,
    /// Completion-time e.c.d.f. averaged over replications, as `(t, F)` pairs.
    pub empirical_cdf: Vec<(f64, f64)>,
    /// Kolmogorov distance between the e.c.d.f. and the mean-field law.
    pub cdf_sup_distance: Estimate,
    pub types: Vec<TypeReport>,
    pub deviations: Vec<DeviationReport>,
    /// Positive part of the largest mean deviation gain.
    pub max_gain: f64,
    /// `E|R_μ̄(τ) − R_μ(τ)|` over all players.
    pub rank_error: Estimate,
    /// `rank_error` plus the largest deviator rank error: bounds what any
    /// tested deviation can gain over its mean-field counterpart.
    pub certificate: f64,
}

/// Effort of one type tabulated on the time steps and a uniform state grid.
struct EffortTable {
    schedule: BoundarySchedule,
    x_max: f64,
    cells: usize,
    values: Vec<f64>,
}

impl EffortTable {
    fn new(schedule: BoundarySchedule, steps: usize, dt: f64, x_max: f64, cells: usize) -> Self {
        let h = x_max / cells as f64;
        let values = (0..steps)
            .into_par_iter()
            .flat_map_iter(|j| {
                let t = j as f64 * dt;
                let s = &schedule;
                (0..=cells).map(move |m| if m == 0 { 0.0 } else { s.effort(t, m as f64 * h) })
            })
            .collect();
        Self { schedule, x_max, cells, values }
    }

    fn eval(&self, step: usize, t: f64, x: f64) -> f64 {
        if x >= self.x_max {
            return self.schedule.effort(t, x);
        }
        let pos = x / self.x_max * self.cells as f64;
        let m = (pos as usize).min(self.cells - 1);
        let w = pos - m as f64;
        let row = &self.values[step * (self.cells + 1)..];
        (1.0 - w) * row[m] + w * row[m + 1]
    }
}

/// Simulator with effort tables built once for a mean field and step size.
pub struct Simulator {
    mix: PopulationMix,
    horizon: f64,
    reward: StepReward,
    payment: BoundarySchedule,
    tables: Vec<EffortTable>,
    steps: usize,
    dt: f64,
    cdf_grid: Vec<(f64, f64)>,
}

/// One step of a recorded path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TracePoint {
    pub t: f64,
    pub x: f64,
    pub effort: f64,
}

/// Per-path outcome.
#[derive(Debug, Clone, Copy)]
struct Path {
    tau: f64,
    cost: f64,
}

fn stream(seed: u64, rep: usize, player: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((rep as u64) << 32) | player as u64);
    rng
}

/// Splits `n` players across weights by largest remainder.
fn allocate(weights: &[f64], n: usize) -> Vec<usize> {
    let raw: Vec<f64> = weights.iter().map(|w| w * n as f64).collect();
    let mut counts: Vec<usize> = raw.iter().map(|r| r.floor() as usize).collect();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| (raw[b] - raw[b].floor()).total_cmp(&(raw[a] - raw[a].floor())).then(a.cmp(&b)));
    let mut left = n - counts.iter().sum::<usize>();
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    counts
}

impl Simulator {
    pub fn new(mf: MeanField<'_>, dt: f64, x_cells: usize) -> Result<Self> {
        check_positive("dt", dt)?;
        let horizon = mf.horizon();
        if !horizon.is_finite() {
            return domain("simulation needs a finite deadline");
        }
        let mix = mf.mix()?;
        let reward = mf.reward()?;
        let steps = ((horizon / dt) - 1e-9).ceil().max(1.0) as usize;
        let dt = horizon / steps as f64;
        let x_top = mix.atoms.iter().map(|a| a.x0).fold(0.0, f64::max);
        let x_max = x_top + 6.0 * mix.sigma * horizon.sqrt();
        let mut tables = Vec::with_capacity(mix.atoms.len());
        for (i, a) in mix.atoms.iter().enumerate() {
            let schedule = mf.schedule(i)?;
            let start = schedule.effort(0.0, a.x0);
            if start * dt > a.x0 / 10.0 {
                return domain(format!(
                    "dt = {dt} too large: initial effort {start} moves type {i} more than a tenth of its distance per step"
                ));
            }
            tables.push(EffortTable::new(schedule, steps, dt, x_max, x_cells.max(2)));
        }
        let payment = mf.schedule(0)?;
        let cdf_grid = (0..=50).map(|k| k as f64 * horizon / 50.0).map(|t| (t, mf.cdf(t))).collect();
        Ok(Self { mix, horizon, reward, payment, tables, steps, dt, cdf_grid })
    }

    /// Step used by the simulation.
    pub fn dt(&self) -> f64 {
        self.dt
    }

    fn run_path(&self, ty: usize, rng: &mut ChaCha8Rng, deviation: Option<Deviation>, bridge: bool) -> Path {
        self.run_path_traced(ty, rng, deviation, bridge, None)
    }

    fn run_path_traced(
        &self,
        ty: usize,
        rng: &mut ChaCha8Rng,
        deviation: Option<Deviation>,
        bridge: bool,
        mut trace: Option<&mut Vec<TracePoint>>,
    ) -> Path {
        let sigma = self.mix.sigma;
        let cost_coef = self.mix.atoms[ty].cost;
        let sd = sigma * self.dt.sqrt();
        let mut x = self.mix.atoms[ty].x0;
        let mut cost = 0.0;
        for j in 0..self.steps {
            let t = j as f64 * self.dt;
            let eq = self.tables[ty].eval(j, t, x);
            let a = deviation.map_or(eq, |d| d.apply(eq));
            if let Some(tr) = trace.as_deref_mut() {
                tr.push(TracePoint { t, x, effort: a });
            }
            let z: f64 = rng.sample(StandardNormal);
            let u: f64 = rng.random();
            cost += cost_coef * a * a * self.dt;
            let next = x - a * self.dt + sd * z;
            if next <= 0.0 {
                return Path { tau: t + self.dt * x / (x - next), cost };
            }
            if bridge {
                let hit = (-2.0 * x * next / (sigma * sigma * self.dt)).exp();
                if u < hit {
                    // u/hit is uniform on (0, 1) given a hit
                    return Path { tau: t + self.dt * (u / hit), cost };
                }
            }
            x = next;
        }
        Path { tau: f64::INFINITY, cost }
    }

    fn empirical_payment(&self, rank: f64, tau: f64) -> f64 {
        if tau <= self.horizon {
            self.reward.eval(rank)
        } else {
            self.reward.floor()
        }
    }

    fn mean_field_payment(&self, tau: f64) -> f64 {
        if tau <= self.horizon {
            self.payment.payment(tau)
        } else {
            self.reward.floor()
        }
    }

    /// Simulates `cfg.replications` independent games of `cfg.players` players.
    pub fn run(&self, mf: MeanField<'_>, cfg: &SimConfig) -> Result<SimReport> {
        cfg.validate()?;
        let n = cfg.players;
        let weights: Vec<f64> = self.mix.atoms.iter().map(|a| a.weight).collect();
        let counts = allocate(&weights, n);
        let types: Vec<usize> = counts.iter().enumerate().flat_map(|(i, &c)| std::iter::repeat_n(i, c)).collect();
        let deviators: Vec<usize> = {
            let m = cfg.deviators.clamp(1, n);
            (0..m).map(|k| k * n / m).collect()
        };
        let ntypes = self.mix.atoms.len();
        let mut rate_b = Vec::new();
        let mut sup_b = Vec::new();
        let mut rank_err_b = Vec::new();
        let mut type_rate_b = vec![Vec::new(); ntypes];
        let mut type_pay_b = vec![Vec::new(); ntypes];
        let mut gain_b = vec![Vec::new(); cfg.deviations.len()];
        let mut dev_err_b = vec![Vec::new(); cfg.deviations.len()];
        let mut ecdf_acc = vec![0.0; self.cdf_grid.len()];
        for rep in 0..cfg.replications {
            let paths: Vec<Path> = (0..n)
                .into_par_iter()
                .map(|p| self.run_path(types[p], &mut stream(cfg.seed, rep, p), None, cfg.bridge))
                .collect();
            // positions with index tie-breaks
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| paths[a].tau.total_cmp(&paths[b].tau).then(a.cmp(&b)));
            let mut rank = vec![0.0; n];
            for (pos, &p) in order.iter().enumerate() {
                rank[p] = (pos + 1) as f64 / n as f64;
            }
            let sorted: Vec<f64> = order.iter().map(|&p| paths[p].tau).collect();
            let done = sorted.partition_point(|&t| t <= self.horizon);
            rate_b.push(done as f64 / n as f64);
            let mut sup: f64 = 0.0;
            for (j, &t) in sorted[..done].iter().enumerate() {
                let f = mf.cdf(t);
                sup = sup.max((j as f64 / n as f64 - f).abs()).max(((j + 1) as f64 / n as f64 - f).abs());
            }
            sup = sup.max((done as f64 / n as f64 - mf.cdf(self.horizon)).abs());
            sup_b.push(sup);
            for (k, &(t, _)) in self.cdf_grid.iter().enumerate() {
                ecdf_acc[k] += sorted.partition_point(|&s| s <= t) as f64 / n as f64;
            }
            let payoff: Vec<f64> =
                (0..n).map(|p| self.empirical_payment(rank[p], paths[p].tau) - paths[p].cost).collect();
            let err: f64 = (0..n)
                .map(|p| (self.empirical_payment(rank[p], paths[p].tau) - self.mean_field_payment(paths[p].tau)).abs())
                .sum::<f64>()
                / n as f64;
            rank_err_b.push(err);
            for ty in 0..ntypes {
                let members: Vec<usize> = (0..n).filter(|&p| types[p] == ty).collect();
                if members.is_empty() {
                    continue;
                }
                let m = members.len() as f64;
                type_rate_b[ty].push(members.iter().filter(|&&p| paths[p].tau <= self.horizon).count() as f64 / m);
                type_pay_b[ty].push(members.iter().map(|&p| payoff[p]).sum::<f64>() / m);
            }
            for (di, &dev) in cfg.deviations.iter().enumerate() {
                let outcomes: Vec<(f64, f64)> = deviators
                    .par_iter()
                    .map(|&p| {
                        let alt = self.run_path(types[p], &mut stream(cfg.seed, rep, p), Some(dev), cfg.bridge);
                        // rank among the others, who keep their equilibrium paths
                        let before = |q: usize| paths[q].tau.total_cmp(&alt.tau).then(q.cmp(&p)).is_lt();
                        let mut ahead = order.partition_point(|&q| before(q));
                        if before(p) {
                            ahead -= 1;
                        }
                        let r = (ahead + 1) as f64 / n as f64;
                        let pay = self.empirical_payment(r, alt.tau);
                        let gain = pay - alt.cost - payoff[p];
                        (gain, (pay - self.mean_field_payment(alt.tau)).abs())
                    })
                    .collect();
                let m = outcomes.len() as f64;
                gain_b[di].push(outcomes.iter().map(|o| o.0).sum::<f64>() / m);
                dev_err_b[di].push(outcomes.iter().map(|o| o.1).sum::<f64>() / m);
            }
        }
        let reps = cfg.replications as f64;
        let empirical_cdf = self.cdf_grid.iter().zip(&ecdf_acc).map(|(&(t, _), &f)| (t, f / reps)).collect();
        let types_report = (0..ntypes)
            .map(|ty| {
                let (b, v) = mf.type_outcome(ty);
                let empty = Estimate { mean: f64::NAN, std_error: f64::NAN };
                TypeReport {
                    players: counts[ty],
                    completion_rate: if counts[ty] > 0 { Estimate::from_batches(&type_rate_b[ty]) } else { empty },
                    payoff: if counts[ty] > 0 { Estimate::from_batches(&type_pay_b[ty]) } else { empty },
                    mean_field_completion_rate: b,
                    mean_field_value: v,
                }
            })
            .collect();
        let deviations: Vec<DeviationReport> = cfg
            .deviations
            .iter()
            .enumerate()
            .map(|(di, &deviation)| {
                let gain = Estimate::from_batches(&gain_b[di]);
                DeviationReport {
                    deviation,
                    gain,
                    significantly_positive: gain.significantly_positive(),
                    rank_error: Estimate::from_batches(&dev_err_b[di]),
                }
            })
            .collect();
        let max_gain = deviations.iter().map(|d| d.gain.mean).fold(0.0, f64::max);
        let rank_error = Estimate::from_batches(&rank_err_b);
        let certificate = rank_error.mean + deviations.iter().map(|d| d.rank_error.mean).fold(0.0, f64::max);
        Ok(SimReport {
            players: n,
            replications: cfg.replications,
            dt: self.dt,
            bridge: cfg.bridge,
            completion_rate: Estimate::from_batches(&rate_b),
            empirical_cdf,
            cdf_sup_distance: Estimate::from_batches(&sup_b),
            types: types_report,
            deviations,
            max_gain,
            rank_error,
            certificate,
        })
    }

    /// Common-random-numbers estimate of one player's gain from `deviation`.
    pub fn deviation_gain(&self, cfg: &SimConfig, player: usize, deviation: Deviation) -> Result<Estimate> {
        cfg.validate()?;
        if player >= cfg.players {
            return domain(format!("player {player} out of range"));
        }
        let n = cfg.players;
        let weights: Vec<f64> = self.mix.atoms.iter().map(|a| a.weight).collect();
        let counts = allocate(&weights, n);
        let types: Vec<usize> = counts.iter().enumerate().flat_map(|(i, &c)| std::iter::repeat_n(i, c)).collect();
        let gains: Vec<f64> = (0..cfg.replications)
            .map(|rep| {
                let taus: Vec<f64> = (0..n)
                    .into_par_iter()
                    .map(|p| self.run_path(types[p], &mut stream(cfg.seed, rep, p), None, cfg.bridge).tau)
                    .collect();
                let base = self.run_path(types[player], &mut stream(cfg.seed, rep, player), None, cfg.bridge);
                let alt = self.run_path(types[player], &mut stream(cfg.seed, rep, player), Some(deviation), cfg.bridge);
                let position = |tau: f64| {
                    let ahead = taus
                        .iter()
                        .enumerate()
                        .filter(|&(q, &t)| q != player && (t < tau || (t == tau && q < player)))
                        .count();
                    (ahead + 1) as f64 / n as f64
                };
                let j = |p: Path| self.empirical_payment(position(p.tau), p.tau) - p.cost;
                j(alt) - j(base)
            })
            .collect();
        Ok(Estimate::from_batches(&gains))
    }
}

impl Simulator {
    /// State and effort along one player's equilibrium path, stopping at completion.
    pub fn trace(&self, cfg: &SimConfig, rep: usize, player: usize) -> Result<Vec<TracePoint>> {
        cfg.validate()?;
        if player >= cfg.players {
            return domain(format!("player {player} out of range"));
        }
        let weights: Vec<f64> = self.mix.atoms.iter().map(|a| a.weight).collect();
        let counts = allocate(&weights, cfg.players);
        let ty = counts.iter().scan(0, |acc, &c| {
            *acc += c;
            Some(*acc)
        });
        let ty = ty.take_while(|&end| end <= player).count();
        let mut out = Vec::new();
        let mut rng = stream(cfg.seed, rep, player);
        self.run_path_traced(ty, &mut rng, None, cfg.bridge, Some(&mut out));
        Ok(out)
    }
}

/// Builds a [`Simulator`] for `mf` and runs it with `cfg`.
pub fn simulate_nplayer(mf: MeanField<'_>, cfg: &SimConfig) -> Result<SimReport> {
    cfg.validate()?;
    Simulator::new(mf, cfg.dt, cfg.x_cells)?.run(mf, cfg)
}

/// Gain of `player` from switching to `deviation`, with the others unchanged.
pub fn estimate_deviation_gain(
    mf: MeanField<'_>,
    cfg: &SimConfig,
    player: usize,
    deviation: Deviation,
) -> Result<Estimate> {
    cfg.validate()?;
    Simulator::new(mf, cfg.dt, cfg.x_cells)?.deviation_gain(cfg, player, deviation)
}
