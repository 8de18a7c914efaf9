//! Reward-generating environments.
//!
//! Three environment families are provided: stochastic multi-armed bandits
//! with `[0, 1]`-supported rewards, stochastic linear bandits with subgaussian
//! noise, and fixed adversarial reward tables. The two hard adversaries for
//! batched play (per-batch random winner, and a single random switch) build
//! tables directly.

use std::io::{Read, Write};

use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::{erfc, erfc_inv};

use crate::error::{Error, Result};

/// Slack allowed when checking unit-ball constraints on user vectors.
const NORM_SLACK: f64 = 1e-9;

/// Per-arm reward distribution of a stochastic bandit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RewardKind {
    #[default]
    Bernoulli,
    /// Normal distribution truncated to `[0, 1]`, located so that its mean is
    /// the arm mean.
    TruncatedGaussian { sigma: f64 },
}

#[derive(Debug, Clone, PartialEq)]
enum ArmSampler {
    Bernoulli(f64),
    PointMass(f64),
    Truncated(TruncatedNormal),
}

/// True arm means of a stochastic multi-armed bandit.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticMabInstance {
    means: Vec<f64>,
    reward_kind: RewardKind,
    samplers: Vec<ArmSampler>,
}

impl StochasticMabInstance {
    pub fn new(means: Vec<f64>, reward_kind: RewardKind) -> Result<Self> {
        if means.is_empty() {
            return Err(Error::validation("means", "at least one arm is required"));
        }
        if let Some((i, m)) = means.iter().enumerate().find(|(_, m)| !(0.0..=1.0).contains(*m)) {
            return Err(Error::validation(
                "means",
                format!("mean of arm {i} is {m}, outside [0, 1]"),
            ));
        }
        let samplers = means
            .iter()
            .map(|&m| match reward_kind {
                RewardKind::Bernoulli => Ok(ArmSampler::Bernoulli(m)),
                RewardKind::TruncatedGaussian { sigma } => {
                    if !(sigma.is_finite() && sigma > 0.0) {
                        return Err(Error::validation("sigma", "must be finite and positive"));
                    }
                    if m == 0.0 || m == 1.0 {
                        Ok(ArmSampler::PointMass(m))
                    } else {
                        TruncatedNormal::with_mean(m, sigma).map(ArmSampler::Truncated)
                    }
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            means,
            reward_kind,
            samplers,
        })
    }

    pub fn bernoulli(means: Vec<f64>) -> Result<Self> {
        Self::new(means, RewardKind::Bernoulli)
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn num_arms(&self) -> usize {
        self.means.len()
    }

    pub fn reward_kind(&self) -> RewardKind {
        self.reward_kind
    }

    pub fn best_mean(&self) -> f64 {
        self.means.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Lowest-index arm with the largest mean.
    pub fn best_arm(&self) -> usize {
        argmax_lowest(&self.means).expect("instance has at least one arm")
    }

    /// Gap of every arm relative to the best mean.
    pub fn gaps(&self) -> Vec<f64> {
        let best = self.best_mean();
        self.means.iter().map(|m| best - m).collect()
    }

    /// One reward draw from `arm`.
    pub fn sample<R: Rng + ?Sized>(&self, arm: usize, rng: &mut R) -> Result<f64> {
        let sampler = self.samplers.get(arm).ok_or(Error::IndexOutOfRange {
            what: "arms",
            index: arm,
            len: self.means.len(),
        })?;
        Ok(match sampler {
            ArmSampler::Bernoulli(p) => {
                if rng.random::<f64>() < *p {
                    1.0
                } else {
                    0.0
                }
            }
            ArmSampler::PointMass(v) => *v,
            ArmSampler::Truncated(t) => t.sample(rng),
        })
    }
}

/// `max_a means[a] - means[i]` for each arm.
pub fn gaps(instance: &StochasticMabInstance) -> Vec<f64> {
    instance.gaps()
}

/// Index of the largest value, lowest index on ties. `None` for empty input.
pub fn argmax_lowest(values: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in values.iter().enumerate() {
        match best {
            Some((_, b)) if v <= b => {}
            _ => best = Some((i, v)),
        }
    }
    best.map(|(i, _)| i)
}

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

fn std_normal_sf(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Normal law restricted to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct TruncatedNormal {
    loc: f64,
    sigma: f64,
}

impl TruncatedNormal {
    /// How far outside `[0, 1]` the location may be pushed, in units of sigma.
    const LOC_RANGE: f64 = 30.0;

    /// Finds the location whose truncation to `[0, 1]` has the given mean.
    fn with_mean(mean: f64, sigma: f64) -> Result<Self> {
        let mut lo = -Self::LOC_RANGE * sigma;
        let mut hi = 1.0 + Self::LOC_RANGE * sigma;
        let reachable_lo = Self { loc: lo, sigma }.mean();
        let reachable_hi = Self { loc: hi, sigma }.mean();
        if !(reachable_lo..=reachable_hi).contains(&mean) {
            return Err(Error::validation(
                "means",
                format!(
                    "mean {mean} is not attainable by a [0,1]-truncated Gaussian with sigma {sigma} \
                     (reachable range [{reachable_lo:.3e}, {reachable_hi:.6}])"
                ),
            ));
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if (Self { loc: mid, sigma }).mean() < mean {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(Self {
            loc: 0.5 * (lo + hi),
            sigma,
        })
    }

    fn bounds(&self) -> (f64, f64) {
        ((0.0 - self.loc) / self.sigma, (1.0 - self.loc) / self.sigma)
    }

    /// Probability mass of `[alpha, beta]` under the standard normal, computed
    /// from whichever tail keeps precision.
    fn mass(alpha: f64, beta: f64) -> f64 {
        if alpha > 0.0 {
            std_normal_sf(alpha) - std_normal_sf(beta)
        } else if beta < 0.0 {
            std_normal_cdf(beta) - std_normal_cdf(alpha)
        } else {
            1.0 - std_normal_cdf(alpha) - std_normal_sf(beta)
        }
    }

    fn mean(&self) -> f64 {
        let (alpha, beta) = self.bounds();
        let z = Self::mass(alpha, beta);
        let m = self.loc + self.sigma * (std_normal_pdf(alpha) - std_normal_pdf(beta)) / z;
        m.clamp(0.0, 1.0)
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let (alpha, beta) = self.bounds();
        let u: f64 = rng.random();
        let z = if alpha > 0.0 {
            // upper tail: invert the survival function
            let lo = std_normal_sf(beta);
            let hi = std_normal_sf(alpha);
            let p = lo + u * (hi - lo);
            std::f64::consts::SQRT_2 * erfc_inv(2.0 * p)
        } else {
            let lo = std_normal_cdf(alpha);
            let p = lo + u * Self::mass(alpha, beta);
            -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p)
        };
        (self.loc + self.sigma * z).clamp(0.0, 1.0)
    }
}

/// Zero-mean noise added to linear rewards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    /// Deterministic rewards.
    None,
    /// `N(0, sigma^2)` with `sigma <= 1`.
    Gaussian { sigma: f64 },
    /// Uniform on `[-1, 1]`.
    BoundedUniform,
}

impl Default for NoiseKind {
    fn default() -> Self {
        NoiseKind::Gaussian { sigma: 1.0 }
    }
}

impl NoiseKind {
    fn validate(&self) -> Result<()> {
        match *self {
            NoiseKind::Gaussian { sigma } if !(sigma.is_finite() && (0.0..=1.0).contains(&sigma)) => {
                Err(Error::validation(
                    "noise",
                    format!("gaussian sigma {sigma} must lie in [0, 1] to be 1-subgaussian"),
                ))
            }
            _ => Ok(()),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            NoiseKind::None => 0.0,
            NoiseKind::Gaussian { sigma } => {
                let z: f64 = StandardNormal.sample(rng);
                sigma * z
            }
            NoiseKind::BoundedUniform => rng.random_range(-1.0..=1.0),
        }
    }
}

/// Hidden parameter and finite action set of a stochastic linear bandit.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearBanditInstance {
    theta_star: DVector<f64>,
    actions: Vec<DVector<f64>>,
    noise: NoiseKind,
}

fn check_unit_ball(field: &str, v: &DVector<f64>) -> Result<()> {
    let norm = v.norm();
    if !norm.is_finite() || norm > 1.0 + NORM_SLACK {
        return Err(Error::validation(
            field,
            format!("euclidean norm {norm} exceeds 1"),
        ));
    }
    Ok(())
}

impl LinearBanditInstance {
    pub fn new(theta_star: DVector<f64>, actions: Vec<DVector<f64>>, noise: NoiseKind) -> Result<Self> {
        let d = theta_star.len();
        if d == 0 {
            return Err(Error::validation("theta", "dimension must be at least 1"));
        }
        if actions.is_empty() {
            return Err(Error::validation("actions", "at least one action is required"));
        }
        check_unit_ball("theta", &theta_star)?;
        for (i, a) in actions.iter().enumerate() {
            if a.len() != d {
                return Err(Error::validation(
                    "actions",
                    format!("action {i} has dimension {}, expected {d}", a.len()),
                ));
            }
            check_unit_ball(&format!("actions[{i}]"), a)?;
        }
        noise.validate()?;
        Ok(Self {
            theta_star,
            actions,
            noise,
        })
    }

    pub fn dim(&self) -> usize {
        self.theta_star.len()
    }

    pub fn num_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn theta_star(&self) -> &DVector<f64> {
        &self.theta_star
    }

    pub fn actions(&self) -> &[DVector<f64>] {
        &self.actions
    }

    pub fn noise(&self) -> NoiseKind {
        self.noise
    }

    /// `<a, theta*>` for every action.
    pub fn expected_rewards(&self) -> Vec<f64> {
        self.actions.iter().map(|a| a.dot(&self.theta_star)).collect()
    }

    pub fn best_value(&self) -> f64 {
        self.expected_rewards()
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Noisy reward for an arbitrary vector in the unit ball.
    pub fn reward<R: Rng + ?Sized>(&self, action: &DVector<f64>, rng: &mut R) -> Result<f64> {
        if action.len() != self.dim() {
            return Err(Error::validation(
                "action",
                format!("dimension {} does not match {}", action.len(), self.dim()),
            ));
        }
        check_unit_ball("action", action)?;
        Ok(action.dot(&self.theta_star) + self.noise.sample(rng))
    }

    /// Noisy reward for the action at `index`.
    pub fn reward_of<R: Rng + ?Sized>(&self, index: usize, rng: &mut R) -> Result<f64> {
        let a = self.actions.get(index).ok_or(Error::IndexOutOfRange {
            what: "actions",
            index,
            len: self.actions.len(),
        })?;
        Ok(a.dot(&self.theta_star) + self.noise.sample(rng))
    }
}

/// `<action, theta*>` plus one noise draw.
pub fn linear_reward<R: Rng + ?Sized>(
    instance: &LinearBanditInstance,
    action: &DVector<f64>,
    rng: &mut R,
) -> Result<f64> {
    instance.reward(action, rng)
}

/// Sizes of consecutive batches covering the horizon.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchSchedule {
    sizes: Vec<usize>,
}

impl BatchSchedule {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::validation("schedule", "at least one batch is required"));
        }
        if sizes.contains(&0) {
            return Err(Error::validation("schedule", "every batch must be nonempty"));
        }
        Ok(Self { sizes })
    }

    /// Sizes differing by at most one; the first `T mod B` batches are larger.
    pub fn uniform(horizon: usize, batches: usize) -> Result<Self> {
        if batches < 1 || batches > horizon {
            return Err(Error::validation(
                "batches",
                format!("need 1 <= B <= T, got B = {batches}, T = {horizon}"),
            ));
        }
        let base = horizon / batches;
        let extra = horizon % batches;
        Self::new(
            (0..batches)
                .map(|i| if i < extra { base + 1 } else { base })
                .collect(),
        )
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn num_batches(&self) -> usize {
        self.sizes.len()
    }

    pub fn horizon(&self) -> usize {
        self.sizes.iter().sum()
    }

    /// Half-open round ranges `[start, end)` of each batch.
    pub fn ranges(&self) -> impl Iterator<Item = std::ops::Range<usize>> + '_ {
        self.sizes.iter().scan(0usize, |start, &len| {
            let r = *start..*start + len;
            *start += len;
            Some(r)
        })
    }
}

/// Which constructor produced an adversarial table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// One uniformly random winning arm per batch.
    BatchRandom { winners: Vec<usize> },
    /// All zeros before round `tau` (1-based), then `arm` pays 1.
    Switching { tau: usize, arm: usize },
    /// Independent Bernoulli draws per arm and round.
    IidBernoulli { probabilities: Vec<f64> },
    /// Loaded from a file or supplied directly.
    External,
}

/// Full `K x T` reward matrix of an oblivious adversary.
#[derive(Debug, Clone, PartialEq)]
pub struct AdversarialRewardTable {
    rewards: Vec<Vec<f64>>,
    provenance: Provenance,
}

impl AdversarialRewardTable {
    pub fn new(rewards: Vec<Vec<f64>>, provenance: Provenance) -> Result<Self> {
        let Some(first) = rewards.first() else {
            return Err(Error::validation("table", "at least one arm is required"));
        };
        let horizon = first.len();
        if horizon == 0 {
            return Err(Error::validation("table", "horizon must be at least 1"));
        }
        for (i, row) in rewards.iter().enumerate() {
            if row.len() != horizon {
                return Err(Error::validation(
                    "table",
                    format!("arm {i} has {} rounds, expected {horizon}", row.len()),
                ));
            }
            if let Some((t, r)) = row.iter().enumerate().find(|(_, r)| !(0.0..=1.0).contains(*r)) {
                return Err(Error::validation(
                    "table",
                    format!("reward {r} of arm {i} at round {} is outside [0, 1]", t + 1),
                ));
            }
        }
        Ok(Self { rewards, provenance })
    }

    pub fn num_arms(&self) -> usize {
        self.rewards.len()
    }

    pub fn horizon(&self) -> usize {
        self.rewards[0].len()
    }

    /// Reward of `arm` at 0-based `round`.
    pub fn reward(&self, arm: usize, round: usize) -> f64 {
        self.rewards[arm][round]
    }

    pub fn row(&self, arm: usize) -> &[f64] {
        &self.rewards[arm]
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// Per-arm totals over the whole horizon.
    pub fn totals(&self) -> Vec<f64> {
        self.rewards.iter().map(|r| r.iter().sum()).collect()
    }

    /// Writes `arm,t1,...,tT` followed by one row per arm.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let header = std::iter::once("arm".to_string()).chain((1..=self.horizon()).map(|t| format!("t{t}")));
        w.write_record(header).map_err(csv_err)?;
        for (i, row) in self.rewards.iter().enumerate() {
            let record = std::iter::once(i.to_string()).chain(row.iter().map(|r| r.to_string()));
            w.write_record(record).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::io("adversarial table", e))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let header = r.headers().map_err(csv_err)?.clone();
        if header.get(0) != Some("arm") {
            return Err(parse_err("header must start with `arm`"));
        }
        for (t, h) in header.iter().skip(1).enumerate() {
            if h != format!("t{}", t + 1) {
                return Err(parse_err(format!("unexpected column `{h}`")));
            }
        }
        let mut rows = Vec::new();
        for (i, record) in r.records().enumerate() {
            let record = record.map_err(csv_err)?;
            let arm: usize = record
                .get(0)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| parse_err(format!("row {i}: bad arm index")))?;
            if arm != i {
                return Err(parse_err(format!("row {i}: arm index {arm} out of order")));
            }
            let row = record
                .iter()
                .skip(1)
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|e| parse_err(format!("row {i}: {e}")))
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Self::new(rows, Provenance::External)
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse {
        what: "csv".into(),
        message: e.to_string(),
    }
}

fn parse_err(message: impl Into<String>) -> Error {
    Error::Parse {
        what: "adversarial table".into(),
        message: message.into(),
    }
}

fn require_two_arms(num_arms: usize) -> Result<()> {
    if num_arms != 2 {
        return Err(Error::Unsupported(format!(
            "hard adversaries are defined for exactly 2 arms, got {num_arms}"
        )));
    }
    Ok(())
}

/// Per batch, a fair coin picks the arm that pays 1 for the whole batch; the
/// other arm pays 0.
pub fn make_batch_random_adversary<R: Rng + ?Sized>(
    num_arms: usize,
    schedule: &BatchSchedule,
    rng: &mut R,
) -> Result<AdversarialRewardTable> {
    require_two_arms(num_arms)?;
    let horizon = schedule.horizon();
    let mut rewards = vec![vec![0.0; horizon]; 2];
    let mut winners = Vec::with_capacity(schedule.num_batches());
    for range in schedule.ranges() {
        let winner = usize::from(rng.random::<bool>());
        rewards[winner][range].fill(1.0);
        winners.push(winner);
    }
    AdversarialRewardTable::new(rewards, Provenance::BatchRandom { winners })
}

/// Zero rewards until a uniformly random round `tau`, after which one
/// uniformly chosen arm pays 1 to the end.
pub fn make_switching_adversary<R: Rng + ?Sized>(
    num_arms: usize,
    horizon: usize,
    rng: &mut R,
) -> Result<AdversarialRewardTable> {
    require_two_arms(num_arms)?;
    if horizon == 0 {
        return Err(Error::validation("horizon", "must be at least 1"));
    }
    let tau = rng.random_range(1..=horizon);
    let arm = usize::from(rng.random::<bool>());
    switching_table(horizon, tau, arm)
}

/// Switching table with a fixed switch round `tau` (1-based) and winning arm.
pub fn switching_table(horizon: usize, tau: usize, arm: usize) -> Result<AdversarialRewardTable> {
    if !(1..=horizon).contains(&tau) {
        return Err(Error::validation(
            "tau",
            format!("switch round {tau} outside 1..={horizon}"),
        ));
    }
    if arm > 1 {
        return Err(Error::IndexOutOfRange {
            what: "arms",
            index: arm,
            len: 2,
        });
    }
    let mut rewards = vec![vec![0.0; horizon]; 2];
    rewards[arm][tau - 1..].fill(1.0);
    AdversarialRewardTable::new(rewards, Provenance::Switching { tau, arm })
}

/// Independent Bernoulli rewards, one probability per arm.
pub fn make_iid_bernoulli_table<R: Rng + ?Sized>(
    probabilities: &[f64],
    horizon: usize,
    rng: &mut R,
) -> Result<AdversarialRewardTable> {
    if probabilities.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::validation("means", "probabilities must lie in [0, 1]"));
    }
    // round-major draws so that a prefix of the table does not depend on T
    let mut rewards = vec![vec![0.0; horizon]; probabilities.len()];
    for t in 0..horizon {
        for (row, &p) in rewards.iter_mut().zip(probabilities) {
            row[t] = if rng.random::<f64>() < p { 1.0 } else { 0.0 };
        }
    }
    AdversarialRewardTable::new(
        rewards,
        Provenance::IidBernoulli {
            probabilities: probabilities.to_vec(),
        },
    )
}
