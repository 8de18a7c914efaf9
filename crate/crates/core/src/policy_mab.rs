//! Batched arm elimination for stochastic multi-armed bandits.
//!
//! Batch `i` pulls every active arm `floor(q^i)` times, after which an arm is
//! eliminated when its empirical mean trails the best empirical mean by more
//! than `sqrt(2 ln(2KTB) / c_i)`, with `c_i = sum_{j<=i} floor(q^j)`. The
//! final batch plays the empirical best for all remaining rounds. With
//! `q = T^{1/B}` at most `B` batches are used.

use num_bigint::BigUint;

use crate::env::StochasticMabInstance;
use crate::error::{Error, Result};
use crate::regret::{compute_pseudo_regret, RegretTrace};
use crate::rng::{Lane, ReplicationStream};

/// Growth factor `q` of the geometric batch sizes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Growth {
    /// `q = T^{1/B}`, with `floor(q^i)` evaluated exactly.
    HorizonRoot { horizon: u64, batches: u64 },
    /// A caller-chosen `q >= 1`.
    Fixed(f64),
}

impl Growth {
    pub fn value(&self) -> f64 {
        match *self {
            Growth::HorizonRoot { horizon, batches } => (horizon as f64).powf(1.0 / batches as f64),
            Growth::Fixed(q) => q,
        }
    }

    /// `floor(q^i)`, saturating at `u64::MAX`.
    pub fn floor_pow(&self, i: u64) -> u64 {
        match *self {
            Growth::HorizonRoot { horizon, batches } => floor_root_power(horizon, i, batches),
            Growth::Fixed(q) => {
                let x = q.powf(i as f64);
                if x >= u64::MAX as f64 {
                    u64::MAX
                } else {
                    x.floor() as u64
                }
            }
        }
    }

    /// `c_i = sum_{j=1..i} floor(q^j)`, saturating.
    pub fn cumulative(&self, i: u64) -> u64 {
        (1..=i).fold(0u64, |acc, j| acc.saturating_add(self.floor_pow(j)))
    }
}

/// `floor(T^{i/B})` without the drift of `powf` near integers
/// (`1000f64.powf(1.0 / 3.0)` is just below 10).
fn floor_root_power(horizon: u64, i: u64, batches: u64) -> u64 {
    let x = (i as f64 / batches as f64 * (horizon as f64).ln()).exp();
    if x >= 1e18 {
        return u64::MAX;
    }
    let nearest = x.round();
    if (x - nearest).abs() > 1e-6 * x.max(1.0) {
        return x.floor() as u64;
    }
    // decide m^B <= T^i exactly
    let m = nearest as u64;
    let lhs = BigUint::from(m).pow(batches as u32);
    let rhs = BigUint::from(horizon).pow(i as u32);
    if lhs <= rhs {
        m
    } else {
        m - 1
    }
}

/// Next step of the elimination protocol.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MabPlan {
    /// Each listed arm is pulled the given number of times.
    Explore(Vec<(usize, u64)>),
    /// The last batch: one arm for every remaining round.
    Exploit { arm: usize, rounds: u64 },
    /// No rounds remain.
    Finished,
}

#[derive(Debug, Clone)]
pub struct MabEliminationState {
    num_arms: usize,
    horizon: u64,
    batches: u64,
    growth: Growth,
    active: Vec<usize>,
    sums: Vec<f64>,
    pulls: Vec<u64>,
    /// Exploration batches completed so far.
    batch_index: u64,
    /// Pulls of each active arm so far (`c_i`).
    pulls_per_arm: u64,
    remaining: u64,
    log_term: f64,
}

fn validate_horizon(horizon: u64, batches: u64) -> Result<()> {
    if horizon < 1 {
        return Err(Error::validation("horizon", "must be at least 1"));
    }
    if batches < 1 || batches > horizon {
        return Err(Error::validation(
            "batches",
            format!("need 1 <= B <= T, got B = {batches}, T = {horizon}"),
        ));
    }
    Ok(())
}

impl MabEliminationState {
    pub fn new(num_arms: usize, horizon: u64, batches: u64, q_override: Option<f64>) -> Result<Self> {
        if num_arms == 0 {
            return Err(Error::validation("means", "at least one arm is required"));
        }
        validate_horizon(horizon, batches)?;
        let growth = match q_override {
            None => Growth::HorizonRoot { horizon, batches },
            Some(q) => {
                if !(q.is_finite() && q >= 1.0) {
                    return Err(Error::validation("q", format!("{q} must be finite and >= 1")));
                }
                let g = Growth::Fixed(q);
                let c_b = g.cumulative(batches);
                if c_b < horizon {
                    return Err(Error::validation(
                        "q",
                        format!("sum of floor(q^i) over {batches} batches is {c_b} < T = {horizon}"),
                    ));
                }
                g
            }
        };
        let log_term = (2.0 * num_arms as f64 * horizon as f64 * batches as f64).ln();
        Ok(Self {
            num_arms,
            horizon,
            batches,
            growth,
            active: (0..num_arms).collect(),
            sums: vec![0.0; num_arms],
            pulls: vec![0; num_arms],
            batch_index: 0,
            pulls_per_arm: 0,
            remaining: horizon,
            log_term,
        })
    }

    pub fn active(&self) -> &[usize] {
        &self.active
    }

    pub fn growth(&self) -> Growth {
        self.growth
    }

    pub fn q(&self) -> f64 {
        self.growth.value()
    }

    pub fn batch_index(&self) -> u64 {
        self.batch_index
    }

    pub fn pulls_per_arm(&self) -> u64 {
        self.pulls_per_arm
    }

    pub fn remaining_rounds(&self) -> u64 {
        self.remaining
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    /// Total pulls of each arm so far.
    pub fn pull_counts(&self) -> &[u64] {
        &self.pulls
    }

    /// Empirical mean of `arm` (0 before its first pull).
    pub fn estimate(&self, arm: usize) -> f64 {
        if self.pulls[arm] == 0 {
            0.0
        } else {
            self.sums[arm] / self.pulls[arm] as f64
        }
    }

    /// Elimination radius after `c` pulls per arm.
    pub fn threshold(&self, c: u64) -> f64 {
        (2.0 * self.log_term / c as f64).sqrt()
    }

    /// Active arm with the largest empirical mean, lowest index on ties.
    pub fn empirical_best(&self) -> usize {
        let mut best = self.active[0];
        for &a in &self.active[1..] {
            if self.estimate(a) > self.estimate(best) {
                best = a;
            }
        }
        best
    }

    pub fn is_finished(&self) -> bool {
        self.remaining == 0
    }

    pub fn plan(&self) -> MabPlan {
        plan_mab_batch(self)
    }
}

pub fn plan_mab_batch(state: &MabEliminationState) -> MabPlan {
    if state.remaining == 0 {
        return MabPlan::Finished;
    }
    let i = state.batch_index + 1;
    if i < state.batches {
        let per_arm = state.growth.floor_pow(i);
        let needed = per_arm.saturating_mul(state.active.len() as u64);
        if needed <= state.remaining {
            return MabPlan::Explore(state.active.iter().map(|&a| (a, per_arm)).collect());
        }
    }
    MabPlan::Exploit {
        arm: state.empirical_best(),
        rounds: state.remaining,
    }
}

/// Folds in one exploration batch and returns the arms it eliminated.
pub fn update_mab(state: &mut MabEliminationState, observations: &[(usize, f64)]) -> Result<Vec<usize>> {
    let MabPlan::Explore(plan) = plan_mab_batch(state) else {
        return Err(Error::Protocol(
            "no exploration batch is pending; the next batch is the last".into(),
        ));
    };
    let mut seen = vec![0u64; state.num_arms];
    for &(arm, _) in observations {
        if arm >= state.num_arms || !state.active.contains(&arm) {
            return Err(Error::Protocol(format!("observation for inactive arm {arm}")));
        }
        seen[arm] += 1;
    }
    if let Some(&(arm, want)) = plan.iter().find(|&&(a, want)| seen[a] != want) {
        return Err(Error::Protocol(format!(
            "arm {arm} observed {} times, planned {want}",
            seen[arm]
        )));
    }
    for &(arm, reward) in observations {
        state.sums[arm] += reward;
        state.pulls[arm] += 1;
    }
    let per_arm = plan[0].1;
    state.batch_index += 1;
    state.pulls_per_arm += per_arm;
    state.remaining -= observations.len() as u64;

    let radius = state.threshold(state.pulls_per_arm);
    let best = state.estimate(state.empirical_best());
    let (kept, eliminated): (Vec<usize>, Vec<usize>) = state
        .active
        .iter()
        .partition(|&&a| state.estimate(a) >= best - radius);
    state.active = kept;
    log::debug!(
        "mab batch {}: size {}, c = {}, threshold {:.4}, eliminated {:?}, active {:?}",
        state.batch_index,
        observations.len(),
        state.pulls_per_arm,
        radius,
        eliminated,
        state.active
    );
    Ok(eliminated)
}

/// Records the last batch (`rounds` pulls of `arm`) and closes the run.
fn finish_with_exploit(state: &mut MabEliminationState, arm: usize, rounds: u64) {
    state.pulls[arm] += rounds;
    state.remaining = 0;
    log::debug!("mab last batch: arm {arm} x {rounds}");
}

/// Outcome of one batched-elimination run.
#[derive(Debug, Clone)]
pub struct MabRun {
    pub trace: RegretTrace,
    /// Nonempty batches played.
    pub batch_count: usize,
    pub batch_sizes: Vec<u64>,
    pub pull_counts: Vec<u64>,
    pub final_active: Vec<usize>,
    /// Arm played in each round.
    pub actions: Vec<usize>,
}

/// Runs the elimination protocol for `horizon` rounds in at most `batches`
/// batches. Reward draws for round `t` come from the environment lane of
/// `stream` at `t`.
pub fn run_batched_mab(
    instance: &StochasticMabInstance,
    horizon: u64,
    batches: u64,
    q_override: Option<f64>,
    stream: &ReplicationStream,
) -> Result<MabRun> {
    let mut state = MabEliminationState::new(instance.num_arms(), horizon, batches, q_override)?;
    let mut actions: Vec<usize> = Vec::with_capacity(horizon as usize);
    let mut batch_sizes = Vec::new();
    let mut observations = Vec::new();
    loop {
        match plan_mab_batch(&state) {
            MabPlan::Finished => break,
            MabPlan::Explore(plan) => {
                observations.clear();
                for (arm, reps) in plan {
                    for _ in 0..reps {
                        let t = actions.len() as u64;
                        let reward = instance.sample(arm, &mut stream.at(Lane::Environment, t))?;
                        observations.push((arm, reward));
                        actions.push(arm);
                    }
                }
                batch_sizes.push(observations.len() as u64);
                update_mab(&mut state, &observations)?;
            }
            MabPlan::Exploit { arm, rounds } => {
                actions.extend(std::iter::repeat_n(arm, rounds as usize));
                batch_sizes.push(rounds);
                finish_with_exploit(&mut state, arm, rounds);
            }
        }
    }
    debug_assert_eq!(actions.len() as u64, horizon);
    Ok(MabRun {
        trace: compute_pseudo_regret(&actions, instance)?,
        batch_count: batch_sizes.len(),
        batch_sizes,
        pull_counts: state.pulls.clone(),
        final_active: state.active.clone(),
        actions,
    })
}

/// Sequential UCB with index `mean + sqrt(2 ln t / n_a)`; each arm is tried
/// once first.
pub fn ucb_baseline(
    instance: &StochasticMabInstance,
    horizon: u64,
    stream: &ReplicationStream,
) -> Result<RegretTrace> {
    let k = instance.num_arms();
    let mut sums = vec![0.0; k];
    let mut counts = vec![0u64; k];
    let mut actions = Vec::with_capacity(horizon as usize);
    for t in 0..horizon {
        let arm = match counts.iter().position(|&c| c == 0) {
            Some(a) => a,
            None => {
                let log_t = ((t + 1) as f64).ln();
                let mut best = 0;
                let mut best_index = f64::NEG_INFINITY;
                for a in 0..k {
                    let n = counts[a] as f64;
                    let index = sums[a] / n + (2.0 * log_t / n).sqrt();
                    if index > best_index {
                        best_index = index;
                        best = a;
                    }
                }
                best
            }
        };
        sums[arm] += instance.sample(arm, &mut stream.at(Lane::Environment, t))?;
        counts[arm] += 1;
        actions.push(arm);
    }
    compute_pseudo_regret(&actions, instance)
}
