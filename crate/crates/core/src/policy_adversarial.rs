//! Non-adaptive batched player for adversarial bandits.
//!
//! Reward-form EXP3 whose feedback arrives only at batch boundaries: within
//! a batch every round is drawn i.i.d. from the distribution frozen at the
//! batch start, and the importance-weighted rewards of the whole batch are
//! folded into the log-weights when it ends.

use rand::Rng;

use crate::env::{AdversarialRewardTable, BatchSchedule};
use crate::error::{Error, Result};
use crate::regret::{compute_adversarial_regret, AdversarialRegret};
use crate::rng::{Lane, ReplicationStream};

/// Lower clamp on sampling probabilities.
pub const PROBABILITY_FLOOR: f64 = 1e-12;

/// Batches of sizes `ceil(T/B)` (the first `T mod B`) and `floor(T/B)`.
pub fn make_uniform_schedule(horizon: usize, batches: usize) -> Result<BatchSchedule> {
    BatchSchedule::uniform(horizon, batches)
}

/// `eta = sqrt(ln K / (T (K + ceil(T/B))))`.
pub fn default_learning_rate(num_arms: usize, horizon: usize, batches: usize) -> f64 {
    let k = num_arms as f64;
    let delay = horizon.div_ceil(batches.max(1)) as f64;
    (k.ln() / (horizon as f64 * (k + delay))).sqrt()
}

/// Softmax of `log_weights` with the maximum subtracted, clamped below at
/// [`PROBABILITY_FLOOR`] and renormalized.
pub fn softmax(log_weights: &[f64]) -> Vec<f64> {
    let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut p: Vec<f64> = log_weights.iter().map(|&w| (w - max).exp()).collect();
    let total: f64 = p.iter().sum();
    for x in &mut p {
        *x = (*x / total).max(PROBABILITY_FLOOR);
    }
    let total: f64 = p.iter().sum();
    for x in &mut p {
        *x /= total;
    }
    p
}

/// One round of feedback: `probability` is the chance the arm had when played.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exp3Observation {
    pub round: usize,
    pub arm: usize,
    pub reward: f64,
    pub probability: f64,
}

#[derive(Debug, Clone)]
pub struct Exp3DelayedState {
    log_weights: Vec<f64>,
    eta: f64,
    schedule: BatchSchedule,
    batch_index: usize,
    batch_start: usize,
    probabilities: Vec<f64>,
}

impl Exp3DelayedState {
    pub fn new(num_arms: usize, schedule: BatchSchedule, eta: f64) -> Result<Self> {
        if num_arms == 0 {
            return Err(Error::validation("arms", "at least one arm is required"));
        }
        if !(eta.is_finite() && eta > 0.0) {
            return Err(Error::validation(
                "eta",
                format!("{eta} must be finite and positive"),
            ));
        }
        Ok(Self {
            log_weights: vec![0.0; num_arms],
            eta,
            schedule,
            batch_index: 0,
            batch_start: 0,
            probabilities: vec![1.0 / num_arms as f64; num_arms],
        })
    }

    /// Uniform schedule and the default learning rate.
    pub fn with_defaults(num_arms: usize, horizon: usize, batches: usize) -> Result<Self> {
        let schedule = make_uniform_schedule(horizon, batches)?;
        Self::new(
            num_arms,
            schedule,
            default_learning_rate(num_arms, horizon, batches),
        )
    }

    pub fn num_arms(&self) -> usize {
        self.log_weights.len()
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn schedule(&self) -> &BatchSchedule {
        &self.schedule
    }

    /// Completed batches.
    pub fn batch_index(&self) -> usize {
        self.batch_index
    }

    /// Rounds of the batch awaiting feedback.
    pub fn current_batch(&self) -> Option<std::ops::Range<usize>> {
        let size = *self.schedule.sizes().get(self.batch_index)?;
        Some(self.batch_start..self.batch_start + size)
    }

    /// The distribution frozen for the current batch.
    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    /// Overwrites the log-weights and refreshes the sampling distribution.
    pub fn set_log_weights(&mut self, log_weights: Vec<f64>) -> Result<()> {
        if log_weights.len() != self.num_arms() || log_weights.iter().any(|w| w.is_nan()) {
            return Err(Error::validation("log_weights", "wrong length or NaN entry"));
        }
        self.log_weights = log_weights;
        self.probabilities = softmax(&self.log_weights);
        Ok(())
    }
}

/// Draws an arm from the frozen distribution.
pub fn exp3_sample<R: Rng + ?Sized>(state: &Exp3DelayedState, rng: &mut R) -> (usize, f64) {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (arm, &p) in state.probabilities.iter().enumerate() {
        acc += p;
        if u < acc {
            return (arm, p);
        }
    }
    // u fell in the rounding gap at the top
    let arm = state
        .probabilities
        .iter()
        .rposition(|&p| p > 0.0)
        .expect("valid distribution");
    (arm, state.probabilities[arm])
}

/// Folds the completed batch into the log-weights: `w_a += eta * r / p` for
/// each observation, in round order.
pub fn exp3_delayed_update(state: &mut Exp3DelayedState, observations: &[Exp3Observation]) -> Result<()> {
    let range = state
        .current_batch()
        .ok_or_else(|| Error::Protocol("every batch has already been processed".into()))?;
    if observations.len() != range.len() {
        return Err(Error::Protocol(format!(
            "batch {} has {} rounds, {} observations given",
            state.batch_index + 1,
            range.len(),
            observations.len()
        )));
    }
    for (expected, obs) in range.clone().zip(observations) {
        if obs.round != expected {
            return Err(Error::Protocol(format!(
                "observation for round {} where round {expected} was expected",
                obs.round
            )));
        }
        if obs.arm >= state.num_arms() {
            return Err(Error::Protocol(format!(
                "observation for unknown arm {}",
                obs.arm
            )));
        }
        if obs.probability.is_nan() || obs.probability <= 0.0 {
            return Err(Error::Protocol(format!(
                "probability {} at round {} is not positive",
                obs.probability, obs.round
            )));
        }
    }
    for obs in observations {
        state.log_weights[obs.arm] += state.eta * obs.reward / obs.probability;
    }
    state.probabilities = softmax(&state.log_weights);
    state.batch_index += 1;
    state.batch_start = range.end;
    log::debug!(
        "adversarial batch {} ({} rounds): next distribution {:?}",
        state.batch_index,
        range.len(),
        state.probabilities
    );
    Ok(())
}

#[derive(Debug, Clone)]
pub struct AdversarialRun {
    pub actions: Vec<usize>,
    pub regret: AdversarialRegret,
    pub schedule: BatchSchedule,
    pub batch_count: usize,
}

/// Plays `table` for `horizon` rounds in `batches` uniform batches. The draw
/// for round `t` comes from the policy lane of `stream` at `t`.
pub fn run_batched_adversarial(
    table: &AdversarialRewardTable,
    horizon: usize,
    batches: usize,
    stream: &ReplicationStream,
) -> Result<AdversarialRun> {
    if table.horizon() != horizon {
        return Err(Error::validation(
            "horizon",
            format!("table covers {} rounds, T = {horizon}", table.horizon()),
        ));
    }
    let mut state = Exp3DelayedState::with_defaults(table.num_arms(), horizon, batches)?;
    let schedule = state.schedule().clone();
    let mut actions = Vec::with_capacity(horizon);
    let mut observations = Vec::new();
    for range in schedule.ranges() {
        observations.clear();
        for t in range {
            let (arm, probability) = exp3_sample(&state, &mut stream.at(Lane::Policy, t as u64));
            observations.push(Exp3Observation {
                round: t,
                arm,
                reward: table.reward(arm, t),
                probability,
            });
            actions.push(arm);
        }
        exp3_delayed_update(&mut state, &observations)?;
    }
    Ok(AdversarialRun {
        regret: compute_adversarial_regret(&actions, table)?,
        batch_count: schedule.num_batches(),
        schedule,
        actions,
    })
}
