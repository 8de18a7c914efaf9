//! Replicated experiments: configuration, parallel runs and summaries.
//!
//! Replication `r` draws all randomness from `ReplicationStream::new(seed, r)`,
//! so results do not depend on the number of worker threads.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::{
    make_batch_random_adversary, make_iid_bernoulli_table, make_switching_adversary, AdversarialRewardTable,
    LinearBanditInstance, NoiseKind, RewardKind, StochasticMabInstance,
};
use crate::error::{Error, Result};
use crate::export;
use crate::policy_adversarial::{make_uniform_schedule, run_batched_adversarial};
use crate::policy_linear::{run_batched_linear, run_infinite_linear, ActionSetDescription};
use crate::policy_mab::run_batched_mab;
use crate::regret::{theoretical_bound_mab, theoretical_bound_mab_with_q, RegretTrace};
use crate::rng::{Lane, ReplicationStream};

pub const DEFAULT_REPS: usize = 100;
pub const DEFAULT_SEED: u64 = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Mab,
    Linear,
    Adversarial,
    Sweep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdversaryKind {
    /// Two arms; each batch a fair coin picks the arm paying 1.
    BatchRandom,
    /// Two arms paying 0 until a random round, after which a random arm pays 1.
    Switching,
    /// A reward table read from `table`.
    File,
    /// Independent Bernoulli rewards with probabilities `means`.
    Iid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
    Svg,
}

/// Experiment description. Absent fields take defaults or are reported as
/// missing when the experiment needs them.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Option<ExperimentKind>,
    /// Experiment repeated across `batches` by a sweep (default `mab`).
    pub sweep_kind: Option<ExperimentKind>,
    pub means: Option<Vec<f64>>,
    pub reward: Option<RewardKind>,
    pub theta: Option<Vec<f64>>,
    pub actions: Option<Vec<Vec<f64>>>,
    /// CSV file with one action per row and no header.
    pub actions_file: Option<PathBuf>,
    /// Dense stand-in for an infinite action set; played through a `1/T`-net.
    pub action_set: Option<ActionSetDescription>,
    pub noise: Option<NoiseKind>,
    pub adversary: Option<AdversaryKind>,
    pub table: Option<PathBuf>,
    pub horizon: Option<u64>,
    pub batches: Option<Vec<u64>>,
    pub reps: Option<usize>,
    pub seed: Option<u64>,
    pub q: Option<f64>,
    pub out: Option<PathBuf>,
    pub format: Option<OutputFormat>,
}

macro_rules! overlay {
    ($base:ident, $over:ident; $($field:ident),*) => {
        $(if $over.$field.is_some() { $base.$field = $over.$field; })*
    };
}

impl RunConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_reader(BufReader::new(file)).map_err(|e| Error::Parse {
            what: format!("config {}", path.display()),
            message: e.to_string(),
        })
    }

    /// Fields set in `over` replace those in `self`.
    pub fn merged(mut self, over: RunConfig) -> Self {
        overlay!(self, over; experiment, sweep_kind, means, reward, theta, actions, actions_file,
            action_set, noise, adversary, table, horizon, batches, reps, seed, q, out, format);
        self
    }

    fn require<'a, T>(value: &'a Option<T>, field: &str) -> Result<&'a T> {
        value
            .as_ref()
            .ok_or_else(|| Error::validation(field, "is required"))
    }

    pub fn reps(&self) -> usize {
        self.reps.unwrap_or(DEFAULT_REPS)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    fn horizon(&self) -> Result<u64> {
        let t = *Self::require(&self.horizon, "horizon")?;
        if t < 1 {
            return Err(Error::validation("horizon", "must be at least 1"));
        }
        Ok(t)
    }

    fn batch_list(&self, horizon: u64) -> Result<Vec<u64>> {
        let list = Self::require(&self.batches, "batches")?;
        if list.is_empty() {
            return Err(Error::validation("batches", "is empty"));
        }
        if let Some(&b) = list.iter().find(|&&b| b < 1 || b > horizon) {
            return Err(Error::validation(
                "batches",
                format!("need 1 <= B <= T, got B = {b}, T = {horizon}"),
            ));
        }
        Ok(list.clone())
    }
}

/// Statistics over the final regret of each replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub experiment: String,
    pub horizon: u64,
    pub batches: u64,
    pub reps: usize,
    pub mean: f64,
    /// Sample standard deviation (0 for one replication).
    pub sd: f64,
    /// `1.96 sd / sqrt(R)`.
    pub ci_half_width: f64,
    pub min: f64,
    pub max: f64,
    pub finals: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch_count: Option<BatchCountStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchCountStats {
    pub mean: f64,
    pub min: usize,
    pub max: usize,
}

/// Sample mean and standard deviation (`n - 1` denominator).
pub fn mean_and_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // rounding in the sum can push the quotient just outside [min, max]
    let mean = (values.iter().sum::<f64>() / n as f64).clamp(min, max);
    if n == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, (ss / (n - 1) as f64).sqrt())
}

impl RunSummary {
    pub fn from_finals(experiment: impl Into<String>, horizon: u64, batches: u64, finals: Vec<f64>) -> Self {
        let (mean, sd) = mean_and_sd(&finals);
        let reps = finals.len();
        Self {
            experiment: experiment.into(),
            horizon,
            batches,
            reps,
            mean,
            sd,
            ci_half_width: 1.96 * sd / (reps as f64).sqrt(),
            min: finals.iter().copied().fold(f64::INFINITY, f64::min),
            max: finals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            finals,
            bound: None,
            batch_count: None,
        }
    }
}

/// A trace tagged with its experiment label and replication index.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledTrace {
    pub experiment: String,
    pub rep: usize,
    pub trace: RegretTrace,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub summaries: Vec<RunSummary>,
    pub traces: Vec<LabeledTrace>,
}

/// Outcome of one replication.
#[derive(Debug, Clone)]
pub struct Replication {
    pub trace: RegretTrace,
    pub batch_count: usize,
}

/// A fully built experiment for one `(T, B)`.
enum Prepared {
    Mab {
        instance: StochasticMabInstance,
        q: Option<f64>,
    },
    Linear(LinearBanditInstance),
    Infinite {
        description: ActionSetDescription,
        theta: DVector<f64>,
        noise: NoiseKind,
    },
    Adversarial {
        kind: AdversaryKind,
        num_arms: usize,
        means: Option<Vec<f64>>,
        table: Option<AdversarialRewardTable>,
    },
}

fn read_actions_csv(path: &Path) -> Result<Vec<Vec<f64>>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(file);
    let parse_err = |message: String| Error::Parse {
        what: format!("actions file {}", path.display()),
        message,
    };
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| parse_err(e.to_string()))?;
        let row = record
            .iter()
            .map(|s| s.parse::<f64>().map_err(|e| parse_err(format!("{s:?}: {e}"))))
            .collect::<Result<Vec<f64>>>()?;
        out.push(row);
    }
    Ok(out)
}

fn prepare(config: &RunConfig, kind: ExperimentKind, horizon: u64) -> Result<Prepared> {
    match kind {
        ExperimentKind::Mab => {
            let means = RunConfig::require(&config.means, "means")?.clone();
            let instance = StochasticMabInstance::new(means, config.reward.unwrap_or_default())?;
            Ok(Prepared::Mab {
                instance,
                q: config.q,
            })
        }
        ExperimentKind::Linear => {
            let theta = DVector::from_vec(RunConfig::require(&config.theta, "theta")?.clone());
            let noise = config.noise.unwrap_or_default();
            if let Some(description) = &config.action_set {
                return Ok(Prepared::Infinite {
                    description: description.clone(),
                    theta,
                    noise,
                });
            }
            let rows = match (&config.actions, &config.actions_file) {
                (Some(a), _) => a.clone(),
                (None, Some(path)) => read_actions_csv(path)?,
                (None, None) => return Err(Error::validation("actions", "is required")),
            };
            let actions = rows.into_iter().map(DVector::from_vec).collect();
            Ok(Prepared::Linear(LinearBanditInstance::new(
                theta, actions, noise,
            )?))
        }
        ExperimentKind::Adversarial => {
            let kind = *RunConfig::require(&config.adversary, "adversary")?;
            let mut num_arms = config.means.as_ref().map_or(2, Vec::len);
            let mut table = None;
            match kind {
                AdversaryKind::File => {
                    let path = RunConfig::require(&config.table, "table")?;
                    let file = File::open(path).map_err(|e| Error::io(path, e))?;
                    let t = AdversarialRewardTable::read_csv(BufReader::new(file))?;
                    if t.horizon() as u64 != horizon {
                        return Err(Error::validation(
                            "horizon",
                            format!("table covers {} rounds, T = {horizon}", t.horizon()),
                        ));
                    }
                    num_arms = t.num_arms();
                    table = Some(t);
                }
                AdversaryKind::Iid => {
                    RunConfig::require(&config.means, "means")?;
                }
                AdversaryKind::BatchRandom if num_arms != 2 => {
                    return Err(Error::validation(
                        "means",
                        "the batch-random adversary has exactly two arms",
                    ));
                }
                AdversaryKind::BatchRandom | AdversaryKind::Switching => {}
            }
            Ok(Prepared::Adversarial {
                kind,
                num_arms,
                means: config.means.clone(),
                table,
            })
        }
        ExperimentKind::Sweep => Err(Error::validation("sweep_kind", "a sweep cannot contain a sweep")),
    }
}

fn replicate(
    prepared: &Prepared,
    horizon: u64,
    batches: u64,
    stream: &ReplicationStream,
) -> Result<Replication> {
    let (trace, batch_count) = match prepared {
        Prepared::Mab { instance, q } => {
            let run = run_batched_mab(instance, horizon, batches, *q, stream)?;
            (run.trace, run.batch_count)
        }
        Prepared::Linear(instance) => {
            let run = run_batched_linear(instance, horizon, batches, stream)?;
            (run.trace, run.batch_count)
        }
        Prepared::Infinite {
            description,
            theta,
            noise,
        } => {
            let run = run_infinite_linear(description, theta.clone(), *noise, horizon, batches, stream)?;
            (run.trace, run.run.batch_count)
        }
        Prepared::Adversarial {
            kind,
            num_arms,
            means,
            table,
        } => {
            let t = horizon as usize;
            let mut rng = stream.lane(Lane::Adversary);
            let built;
            let table = match kind {
                AdversaryKind::File => table.as_ref().expect("loaded in prepare"),
                AdversaryKind::BatchRandom => {
                    built = make_batch_random_adversary(
                        *num_arms,
                        &make_uniform_schedule(t, batches as usize)?,
                        &mut rng,
                    )?;
                    &built
                }
                AdversaryKind::Switching => {
                    built = make_switching_adversary(*num_arms, t, &mut rng)?;
                    &built
                }
                AdversaryKind::Iid => {
                    built =
                        make_iid_bernoulli_table(means.as_deref().expect("checked in prepare"), t, &mut rng)?;
                    &built
                }
            };
            let run = run_batched_adversarial(table, t, batches as usize, stream)?;
            (run.regret.hindsight, run.batch_count)
        }
    };
    if trace.len() as u64 != horizon || batch_count as u64 > batches {
        return Err(Error::Protocol(format!(
            "run played {} rounds in {batch_count} batches (T = {horizon}, B = {batches})",
            trace.len()
        )));
    }
    Ok(Replication { trace, batch_count })
}

/// Runs `reps` replications of one prepared experiment in parallel; results
/// are in replication order.
fn replicate_all(
    prepared: &Prepared,
    horizon: u64,
    batches: u64,
    reps: usize,
    seed: u64,
) -> Result<Vec<Replication>> {
    (0..reps)
        .into_par_iter()
        .map(|r| {
            replicate(
                prepared,
                horizon,
                batches,
                &ReplicationStream::new(seed, r as u64),
            )
        })
        .collect()
}

fn summarize(
    label: String,
    horizon: u64,
    batches: u64,
    reps: &[Replication],
    prepared: &Prepared,
) -> RunSummary {
    let finals = reps.iter().map(|r| r.trace.final_regret()).collect();
    let mut summary = RunSummary::from_finals(label, horizon, batches, finals);
    let counts: Vec<usize> = reps.iter().map(|r| r.batch_count).collect();
    summary.batch_count = Some(BatchCountStats {
        mean: counts.iter().sum::<usize>() as f64 / counts.len() as f64,
        min: counts.iter().copied().min().unwrap_or(0),
        max: counts.iter().copied().max().unwrap_or(0),
    });
    if let Prepared::Mab { instance, q } = prepared {
        summary.bound = Some(match q {
            None => theoretical_bound_mab(instance, horizon as usize, batches as usize),
            Some(q) => theoretical_bound_mab_with_q(instance, horizon as usize, batches as usize, *q),
        });
    }
    summary
}

fn label(kind: ExperimentKind) -> &'static str {
    match kind {
        ExperimentKind::Mab => "mab",
        ExperimentKind::Linear => "linear",
        ExperimentKind::Adversarial => "adversarial",
        ExperimentKind::Sweep => "sweep",
    }
}

/// Runs every replication and writes `config.out` when set.
pub fn run_experiment(config: &RunConfig) -> Result<ExperimentOutput> {
    let experiment = *RunConfig::require(&config.experiment, "experiment")?;
    let horizon = config.horizon()?;
    let batch_list = config.batch_list(horizon)?;
    let reps = config.reps();
    if reps < 1 {
        return Err(Error::validation("reps", "must be at least 1"));
    }
    let (kind, sweep) = match experiment {
        ExperimentKind::Sweep => (config.sweep_kind.unwrap_or(ExperimentKind::Mab), true),
        other => {
            if batch_list.len() != 1 {
                return Err(Error::validation(
                    "batches",
                    "a single value is required outside sweeps",
                ));
            }
            (other, false)
        }
    };
    let prepared = prepare(config, kind, horizon)?;
    let mut summaries = Vec::new();
    let mut traces = Vec::new();
    for &b in &batch_list {
        let name = if sweep {
            format!("{}_B{b}", label(kind))
        } else {
            label(kind).to_string()
        };
        let runs = replicate_all(&prepared, horizon, b, reps, config.seed())?;
        let summary = summarize(name.clone(), horizon, b, &runs, &prepared);
        log::info!(
            "{name}: T = {horizon}, B = {b}, mean regret {:.3} +/- {:.3}",
            summary.mean,
            summary.ci_half_width
        );
        summaries.push(summary);
        traces.extend(runs.into_iter().enumerate().map(|(rep, r)| LabeledTrace {
            experiment: name.clone(),
            rep,
            trace: r.trace,
        }));
    }
    let output = ExperimentOutput { summaries, traces };
    if let Some(path) = &config.out {
        export::write_output(&output, path, config.format.unwrap_or_default())?;
    }
    Ok(output)
}
