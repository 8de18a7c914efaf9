//! Batched elimination for stochastic linear bandits.
//!
//! Batch `i` plays a rounded approximate G-optimal design over the active
//! actions, sized for accuracy `eps_i = sqrt(d ln(K T^2) / q^i)` with
//! `q = (T / c)^{1/B}`, refits `theta_hat` by least squares on that batch
//! alone, and drops every action whose estimated value trails the best by
//! more than `2 eps_i`. Infinite action sets are handled by running on a
//! `1/T`-net of a dense candidate set.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::design::{
    epsilon_net, frank_wolfe_with_options, project_to_span, round_design, FrankWolfeOptions,
    LeastSquaresAccumulator, SpanProjection, DESIGN_C_LOWER,
};
use crate::env::{argmax_lowest, LinearBanditInstance, NoiseKind};
use crate::error::{Error, Result};
use crate::regret::{compute_pseudo_regret, RegretKind, RegretTrace};
use crate::rng::{Lane, ReplicationStream};

/// Working coordinates for the active set: the ambient space when the
/// active actions span it, otherwise their span.
#[derive(Debug, Clone)]
enum Coordinates {
    Ambient,
    Span(SpanProjection),
}

impl Coordinates {
    fn of(&self, v: &DVector<f64>) -> DVector<f64> {
        match self {
            Coordinates::Ambient => v.clone(),
            Coordinates::Span(p) => p.project(v),
        }
    }

    fn lift(&self, v: DVector<f64>) -> DVector<f64> {
        match self {
            Coordinates::Ambient => v,
            Coordinates::Span(p) => p.lift(&v),
        }
    }
}

/// An exploration batch: rounded design counts over the active actions.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearBatchPlan {
    /// `(action index, pulls)` for every action with a positive count.
    pub pulls: Vec<(usize, u64)>,
    pub eps: f64,
    /// Design budget `n` before per-action rounding up.
    pub budget: u64,
    pub g: f64,
    pub rank: usize,
    pub design_converged: bool,
}

impl LinearBatchPlan {
    pub fn total(&self) -> u64 {
        self.pulls.iter().map(|&(_, c)| c).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LinearPlan {
    Explore(LinearBatchPlan),
    /// The last batch: one action for every remaining round.
    Exploit {
        action: usize,
        rounds: u64,
    },
    Finished,
}

/// Summary of one completed exploration batch.
#[derive(Debug, Clone, Serialize)]
pub struct LinearBatchRecord {
    pub index: u64,
    pub eps: f64,
    pub budget: u64,
    pub size: u64,
    pub g: f64,
    pub rank: usize,
    pub active_before: Vec<usize>,
    pub survivors: Vec<usize>,
    /// Ambient-space estimate from this batch's pulls only.
    pub theta_hat: Vec<f64>,
}

#[derive(Debug, Clone)]
struct Pending {
    plan: LinearBatchPlan,
    coords: Coordinates,
}

#[derive(Debug, Clone)]
pub struct LinearEliminationState {
    actions: Vec<DVector<f64>>,
    active: Vec<usize>,
    theta_hat: DVector<f64>,
    batch_index: u64,
    batches: u64,
    horizon: u64,
    remaining: u64,
    q: f64,
    eps_dim: usize,
    log_kt2: f64,
    delta: f64,
    design_options: FrankWolfeOptions,
    pending: Option<Pending>,
}

impl LinearEliminationState {
    pub fn new(actions: Vec<DVector<f64>>, horizon: u64, batches: u64) -> Result<Self> {
        if actions.is_empty() {
            return Err(Error::validation("actions", "at least one action is required"));
        }
        if horizon < 1 {
            return Err(Error::validation("horizon", "must be at least 1"));
        }
        if batches < 1 || batches > horizon {
            return Err(Error::validation(
                "batches",
                format!("need 1 <= B <= T, got B = {batches}, T = {horizon}"),
            ));
        }
        let dim = actions[0].len();
        let eps_dim = match project_to_span(&actions) {
            Ok(p) => p.rank(),
            Err(Error::Degenerate(_)) => 0,
            Err(e) => return Err(e),
        };
        let k = actions.len() as f64;
        let t = horizon as f64;
        Ok(Self {
            active: (0..actions.len()).collect(),
            theta_hat: DVector::zeros(dim),
            batch_index: 0,
            batches,
            horizon,
            remaining: horizon,
            q: (t / DESIGN_C_LOWER).max(1.0).powf(1.0 / batches as f64),
            eps_dim,
            log_kt2: (k * t * t).ln(),
            delta: 1.0 / (k * t * t),
            design_options: FrankWolfeOptions::default(),
            pending: None,
            actions,
        })
    }

    pub fn with_design_options(mut self, options: FrankWolfeOptions) -> Self {
        self.design_options = options;
        self
    }

    pub fn active(&self) -> &[usize] {
        &self.active
    }

    pub fn theta_hat(&self) -> &DVector<f64> {
        &self.theta_hat
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn batch_index(&self) -> u64 {
        self.batch_index
    }

    pub fn remaining_rounds(&self) -> u64 {
        self.remaining
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// `eps_i = sqrt(d ln(K T^2) / q^i)` with `d` the rank of the initial actions.
    pub fn epsilon(&self, i: u64) -> f64 {
        (self.eps_dim as f64 * self.log_kt2 / self.q.powf(i as f64)).sqrt()
    }

    /// Active action with the largest `<a, theta_hat>`, lowest index on ties.
    pub fn empirical_best(&self) -> usize {
        let values: Vec<f64> = self
            .active
            .iter()
            .map(|&a| self.actions[a].dot(&self.theta_hat))
            .collect();
        self.active[argmax_lowest(&values).expect("active set is nonempty")]
    }

    fn exploit(&self) -> LinearPlan {
        LinearPlan::Exploit {
            action: self.empirical_best(),
            rounds: self.remaining,
        }
    }
}

/// Plans the next batch and remembers it for [`update_linear`].
pub fn plan_linear_batch(state: &mut LinearEliminationState) -> Result<LinearPlan> {
    state.pending = None;
    if state.remaining == 0 {
        return Ok(LinearPlan::Finished);
    }
    let i = state.batch_index + 1;
    if i >= state.batches || state.active.len() == 1 || state.eps_dim == 0 {
        return Ok(state.exploit());
    }
    let active: Vec<DVector<f64>> = state.active.iter().map(|&a| state.actions[a].clone()).collect();
    let dim = active[0].len();
    let coords = match project_to_span(&active) {
        Ok(p) if p.rank() == dim => Coordinates::Ambient,
        Ok(p) => Coordinates::Span(p),
        Err(Error::Degenerate(_)) => return Ok(state.exploit()),
        Err(e) => return Err(e),
    };
    let working: Vec<DVector<f64>> = active.iter().map(|a| coords.of(a)).collect();
    let rank = working[0].len();
    let design = frank_wolfe_with_options(&working, state.design_options)?;
    let eps = state.epsilon(i);
    let multiset = round_design(&design, eps, state.delta)?;
    let pulls: Vec<(usize, u64)> = multiset
        .counts
        .iter()
        .enumerate()
        .filter(|&(_, &c)| c > 0)
        .map(|(j, &c)| (state.active[j], c as u64))
        .collect();
    let plan = LinearBatchPlan {
        pulls,
        eps,
        budget: multiset.budget as u64,
        g: design.g_value,
        rank,
        design_converged: design.converged,
    };
    if plan.total() > state.remaining {
        return Ok(state.exploit());
    }
    state.pending = Some(Pending {
        plan: plan.clone(),
        coords,
    });
    Ok(LinearPlan::Explore(plan))
}

/// Actions in `active` whose estimated value is not below the best by more
/// than `2 eps`.
pub fn eliminate_linear(
    actions: &[DVector<f64>],
    active: &[usize],
    theta_hat: &DVector<f64>,
    eps: f64,
) -> Vec<usize> {
    let values: Vec<f64> = active.iter().map(|&a| actions[a].dot(theta_hat)).collect();
    let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    active
        .iter()
        .zip(&values)
        .filter(|&(_, &v)| v >= best - 2.0 * eps)
        .map(|(&a, _)| a)
        .collect()
}

/// Fits `theta_hat` on the planned batch and filters the active set.
pub fn update_linear(
    state: &mut LinearEliminationState,
    observations: &[(usize, f64)],
) -> Result<LinearBatchRecord> {
    let Pending { plan, coords } = state
        .pending
        .take()
        .ok_or_else(|| Error::Protocol("no exploration batch is pending".into()))?;
    let mut seen = vec![0u64; state.actions.len()];
    for &(a, _) in observations {
        if a >= state.actions.len() {
            return Err(Error::Protocol(format!("observation for unknown action {a}")));
        }
        seen[a] += 1;
    }
    let planned_total: u64 = plan.total();
    if observations.len() as u64 != planned_total || plan.pulls.iter().any(|&(a, c)| seen[a] != c) {
        return Err(Error::Protocol(
            "observations do not match the planned batch".into(),
        ));
    }
    let mut acc = LeastSquaresAccumulator::new(plan.rank);
    for &(a, r) in observations {
        acc.push(&coords.of(&state.actions[a]), r);
    }
    state.theta_hat = coords.lift(acc.solve()?.theta_hat);
    state.batch_index += 1;
    state.remaining -= planned_total;

    let active_before = state.active.clone();
    state.active = eliminate_linear(&state.actions, &state.active, &state.theta_hat, plan.eps);
    log::debug!(
        "linear batch {}: n = {}, size {}, g = {:.4}, eps = {:.5}, survivors {:?}",
        state.batch_index,
        plan.budget,
        planned_total,
        plan.g,
        plan.eps,
        state.active
    );
    Ok(LinearBatchRecord {
        index: state.batch_index,
        eps: plan.eps,
        budget: plan.budget,
        size: planned_total,
        g: plan.g,
        rank: plan.rank,
        active_before,
        survivors: state.active.clone(),
        theta_hat: state.theta_hat.iter().copied().collect(),
    })
}

#[derive(Debug, Clone)]
pub struct LinearRun {
    pub trace: RegretTrace,
    /// Nonempty batches played.
    pub batch_count: usize,
    pub batch_sizes: Vec<u64>,
    pub pull_counts: Vec<u64>,
    pub actions: Vec<usize>,
    pub batches: Vec<LinearBatchRecord>,
}

/// Runs linear elimination for `horizon` rounds in at most `batches`
/// batches. Reward noise for round `t` comes from the environment lane of
/// `stream` at `t`.
pub fn run_batched_linear(
    instance: &LinearBanditInstance,
    horizon: u64,
    batches: u64,
    stream: &ReplicationStream,
) -> Result<LinearRun> {
    run_batched_linear_with(instance, horizon, batches, stream, FrankWolfeOptions::default())
}

pub fn run_batched_linear_with(
    instance: &LinearBanditInstance,
    horizon: u64,
    batches: u64,
    stream: &ReplicationStream,
    design_options: FrankWolfeOptions,
) -> Result<LinearRun> {
    let mut state = LinearEliminationState::new(instance.actions().to_vec(), horizon, batches)?
        .with_design_options(design_options);
    let mut actions: Vec<usize> = Vec::with_capacity(horizon as usize);
    let mut batch_sizes = Vec::new();
    let mut records = Vec::new();
    let mut observations = Vec::new();
    loop {
        match plan_linear_batch(&mut state)? {
            LinearPlan::Finished => break,
            LinearPlan::Explore(plan) => {
                observations.clear();
                for &(a, reps) in &plan.pulls {
                    for _ in 0..reps {
                        let t = actions.len() as u64;
                        let r = instance.reward_of(a, &mut stream.at(Lane::Environment, t))?;
                        observations.push((a, r));
                        actions.push(a);
                    }
                }
                batch_sizes.push(observations.len() as u64);
                records.push(update_linear(&mut state, &observations)?);
            }
            LinearPlan::Exploit { action, rounds } => {
                log::debug!("linear last batch: action {action} x {rounds}");
                actions.extend(std::iter::repeat_n(action, rounds as usize));
                batch_sizes.push(rounds);
                state.remaining = 0;
            }
        }
    }
    let mut pull_counts = vec![0u64; instance.num_actions()];
    for &a in &actions {
        pull_counts[a] += 1;
    }
    Ok(LinearRun {
        trace: compute_pseudo_regret(&actions, instance)?,
        batch_count: batch_sizes.len(),
        batch_sizes,
        pull_counts,
        actions,
        batches: records,
    })
}

/// A finite, dense stand-in for a possibly infinite action set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum ActionSetDescription {
    Points {
        points: Vec<Vec<f64>>,
    },
    /// Evenly spaced points on the unit circle, starting at angle 0.
    CircleMesh {
        points: usize,
    },
    /// Uniform points on the unit sphere in `R^dim`.
    SphereSample {
        dim: usize,
        points: usize,
        seed: u64,
    },
}

impl ActionSetDescription {
    pub fn candidates(&self) -> Result<Vec<DVector<f64>>> {
        let out: Vec<DVector<f64>> = match self {
            ActionSetDescription::Points { points } => {
                points.iter().map(|p| DVector::from_column_slice(p)).collect()
            }
            ActionSetDescription::CircleMesh { points } => (0..*points)
                .map(|j| {
                    let angle = std::f64::consts::TAU * j as f64 / *points as f64;
                    DVector::from_vec(vec![angle.cos(), angle.sin()])
                })
                .collect(),
            ActionSetDescription::SphereSample { dim, points, seed } => {
                if *dim == 0 {
                    return Err(Error::validation("dim", "must be at least 1"));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let mut out = Vec::with_capacity(*points);
                while out.len() < *points {
                    let v: DVector<f64> = DVector::from_fn(*dim, |_, _| StandardNormal.sample(&mut rng));
                    let norm = v.norm();
                    if norm > 1e-12 {
                        out.push(v / norm);
                    }
                }
                out
            }
        };
        if out.is_empty() {
            return Err(Error::validation("actions", "the candidate set is empty"));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone)]
pub struct InfiniteLinearRun {
    /// Regret against the best candidate.
    pub trace: RegretTrace,
    pub net_size: usize,
    /// Net members as indices into the candidates.
    pub net: Vec<usize>,
    pub best_candidate_value: f64,
    pub best_net_value: f64,
    pub run: LinearRun,
}

/// Runs linear elimination on a `1/T`-net of the described candidates.
pub fn run_infinite_linear(
    description: &ActionSetDescription,
    theta_star: DVector<f64>,
    noise: NoiseKind,
    horizon: u64,
    batches: u64,
    stream: &ReplicationStream,
) -> Result<InfiniteLinearRun> {
    if horizon < 1 {
        return Err(Error::validation("horizon", "must be at least 1"));
    }
    let candidates = description.candidates()?;
    let net = epsilon_net(&candidates, 1.0 / horizon as f64);
    let instance = LinearBanditInstance::new(
        theta_star.clone(),
        net.iter().map(|&i| candidates[i].clone()).collect(),
        noise,
    )?;
    let run = run_batched_linear(&instance, horizon, batches, stream)?;
    let best_candidate_value = candidates
        .iter()
        .map(|a| a.dot(&theta_star))
        .fold(f64::NEG_INFINITY, f64::max);
    let values = instance.expected_rewards();
    let trace = RegretTrace::from_increments(
        RegretKind::Pseudo,
        run.actions.iter().map(|&a| best_candidate_value - values[a]),
    );
    Ok(InfiniteLinearRun {
        trace,
        net_size: net.len(),
        best_net_value: instance.best_value(),
        net,
        best_candidate_value,
        run,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    fn stream() -> ReplicationStream {
        ReplicationStream::new(99, 0)
    }

    #[test]
    fn eliminate_one_dimensional_example() {
        let actions = vec![v(&[1.0]), v(&[-1.0])];
        assert_eq!(eliminate_linear(&actions, &[0, 1], &v(&[0.5]), 0.2), vec![0]);
        // deficit 1.0 equals 2 eps: kept
        assert_eq!(eliminate_linear(&actions, &[0, 1], &v(&[0.5]), 0.5), vec![0, 1]);
        assert_eq!(eliminate_linear(&actions, &[0, 1], &v(&[0.0]), 0.01), vec![0, 1]);
    }

    #[test]
    fn basis_batch_is_uniform_with_sizing_formula() {
        let d = 3;
        let actions: Vec<_> = (0..d)
            .map(|i| DVector::from_fn(d, |j, _| (i == j) as u8 as f64))
            .collect();
        let (t, b) = (100_000u64, 3u64);
        let mut s = LinearEliminationState::new(actions, t, b).unwrap();
        let LinearPlan::Explore(plan) = plan_linear_batch(&mut s).unwrap() else {
            panic!("expected exploration")
        };
        let k = 3.0;
        let tf = t as f64;
        let q = (tf / 2.0).powf(1.0 / 3.0);
        let eps = (d as f64 * (k * tf * tf).ln() / q).sqrt();
        assert_abs_diff_eq!(plan.eps, eps, epsilon = 1e-12);
        let n = (2.0 * d as f64 * (2.0 * k * tf * tf).ln() / (eps * eps)).ceil() as u64;
        assert!(plan.budget.abs_diff(n) <= 1, "{} vs {n}", plan.budget);
        let per = plan.pulls[0].1;
        assert!(plan.pulls.iter().all(|&(_, c)| c == per));
        assert_eq!(plan.pulls.len(), 3);
    }

    #[test]
    fn epsilon_schedule_decreases_geometrically() {
        let actions = vec![v(&[1.0, 0.0]), v(&[0.0, 1.0])];
        let s = LinearEliminationState::new(actions, 2000, 4).unwrap();
        let ratio = s.q().powf(-0.5);
        for i in 1..4 {
            assert!(s.epsilon(i + 1) < s.epsilon(i));
            assert_abs_diff_eq!(s.epsilon(i + 1) / s.epsilon(i), ratio, epsilon = 1e-12);
        }
    }

    #[test]
    fn single_action_exploits_and_finishes() {
        let mut s = LinearEliminationState::new(vec![v(&[0.3, 0.4])], 10, 3).unwrap();
        assert_eq!(
            plan_linear_batch(&mut s).unwrap(),
            LinearPlan::Exploit {
                action: 0,
                rounds: 10
            }
        );
        let inst = LinearBanditInstance::new(v(&[1.0, 0.0]), vec![v(&[0.3, 0.4])], NoiseKind::None).unwrap();
        let run = run_batched_linear(&inst, 50, 3, &stream()).unwrap();
        assert_eq!(run.trace.final_regret(), 0.0);
        assert_eq!(run.batch_count, 1);
    }

    #[test]
    fn oversized_first_batch_exploits_lowest_index() {
        let actions = vec![v(&[1.0, 0.0, 0.0]), v(&[0.0, 1.0, 0.0]), v(&[0.0, 0.0, 1.0])];
        let mut s = LinearEliminationState::new(actions, 2, 2).unwrap();
        assert_eq!(
            plan_linear_batch(&mut s).unwrap(),
            LinearPlan::Exploit { action: 0, rounds: 2 }
        );
    }

    #[test]
    fn zero_actions_exploit_immediately() {
        let mut s = LinearEliminationState::new(vec![v(&[0.0]), v(&[0.0])], 1000, 3).unwrap();
        assert_eq!(
            plan_linear_batch(&mut s).unwrap(),
            LinearPlan::Exploit {
                action: 0,
                rounds: 1000
            }
        );
    }

    #[test]
    fn update_requires_matching_plan() {
        let actions = vec![v(&[1.0]), v(&[-1.0])];
        let mut s = LinearEliminationState::new(actions, 100_000, 3).unwrap();
        assert!(matches!(update_linear(&mut s, &[]), Err(Error::Protocol(_))));
        plan_linear_batch(&mut s).unwrap();
        assert!(matches!(
            update_linear(&mut s, &[(0, 1.0)]),
            Err(Error::Protocol(_))
        ));
    }

    #[test]
    fn one_dimensional_noiseless_trace() {
        let inst =
            LinearBanditInstance::new(v(&[0.5]), vec![v(&[1.0]), v(&[-1.0])], NoiseKind::None).unwrap();
        let run = run_batched_linear(&inst, 1_000_000, 2, &stream()).unwrap();
        let first = &run.batches[0];
        assert_eq!(first.survivors, vec![0]);
        assert_abs_diff_eq!(first.theta_hat[0], 0.5, epsilon = 1e-12);
        let bad_pulls = run
            .actions
            .iter()
            .take(first.size as usize)
            .filter(|&&a| a == 1)
            .count();
        assert_eq!(run.trace.final_regret(), bad_pulls as f64);
        assert_eq!(run.pull_counts[1] as usize, bad_pulls);
        assert_eq!(run.actions.len(), 1_000_000);
        assert_eq!(run.batch_count, 2);
    }

    #[test]
    fn noiseless_survivors_match_gap_filter() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let actions: Vec<_> = (0..12)
            .map(|_| {
                let x: DVector<f64> = DVector::from_fn(3, |_, _| StandardNormal.sample(&mut rng));
                x.normalize()
            })
            .collect();
        let theta = v(&[0.6, -0.3, 0.5]);
        let inst = LinearBanditInstance::new(theta.clone(), actions, NoiseKind::None).unwrap();
        let run = run_batched_linear(&inst, 200_000, 4, &stream()).unwrap();
        assert!(!run.batches.is_empty());
        let values = inst.expected_rewards();
        let best = inst.best_value();
        for rec in &run.batches {
            for (x, y) in rec.theta_hat.iter().zip(theta.iter()) {
                assert!((x - y).abs() < 1e-10);
            }
            let expected: Vec<usize> = (0..values.len())
                .filter(|&a| best - values[a] <= 2.0 * rec.eps)
                .collect();
            assert_eq!(rec.survivors, expected);
        }
    }

    #[test]
    fn rank_drop_reprojects() {
        // once the far actions go, the survivors lie on the first axis
        let actions = vec![v(&[1.0, 0.0]), v(&[0.9, 0.0]), v(&[0.0, 1.0]), v(&[-0.5, 0.5])];
        let inst = LinearBanditInstance::new(v(&[0.7, -0.7]), actions, NoiseKind::None).unwrap();
        let run = run_batched_linear(&inst, 1_000_000, 4, &stream()).unwrap();
        let drop = run
            .batches
            .iter()
            .position(|r| r.survivors == vec![0, 1])
            .unwrap();
        assert!(drop + 1 < run.batches.len());
        assert!(run.batches[..=drop].iter().all(|r| r.rank == 2));
        assert!(run.batches[drop + 1..].iter().all(|r| r.rank == 1));
        assert_abs_diff_eq!(run.batches.last().unwrap().theta_hat[0], 0.7, epsilon = 1e-10);
        assert_eq!(run.actions.len(), 1_000_000);
        assert_eq!(*run.actions.last().unwrap(), 0);
    }

    #[test]
    fn circle_net_covers_mesh() {
        let desc = ActionSetDescription::CircleMesh { points: 10_000 };
        let cands = desc.candidates().unwrap();
        let t = 1000u64;
        let net = epsilon_net(&cands, 1.0 / t as f64);
        assert!(net.len() <= (std::f64::consts::TAU * t as f64).ceil() as usize);
        for c in &cands {
            let nearest = net
                .iter()
                .map(|&i| (c - &cands[i]).norm())
                .fold(f64::INFINITY, f64::min);
            assert!(nearest <= 1.0 / t as f64 + 1e-15);
        }
    }

    #[test]
    fn infinite_run_regret_against_candidates() {
        let desc = ActionSetDescription::CircleMesh { points: 2000 };
        let theta = v(&[0.3, 0.8]);
        let run = run_infinite_linear(
            &desc,
            theta,
            NoiseKind::Gaussian { sigma: 0.5 },
            500,
            3,
            &stream(),
        )
        .unwrap();
        assert!(run.best_candidate_value - run.best_net_value <= 1.0 / 500.0);
        assert!(run.best_candidate_value >= run.best_net_value);
        assert_eq!(run.trace.len(), 500);
        assert!(run.trace.is_nondecreasing());
    }

    #[test]
    fn separated_candidates_form_their_own_net() {
        let pts = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![-1.0, 0.0]];
        let desc = ActionSetDescription::Points { points: pts.clone() };
        let theta = v(&[0.2, 0.7]);
        let noise = NoiseKind::Gaussian { sigma: 1.0 };
        let inf = run_infinite_linear(&desc, theta.clone(), noise, 5000, 3, &stream()).unwrap();
        assert_eq!(inf.net, vec![0, 2, 1]);
        let inst =
            LinearBanditInstance::new(theta, inf.net.iter().map(|&i| v(&pts[i])).collect(), noise).unwrap();
        let direct = run_batched_linear(&inst, 5000, 3, &stream()).unwrap();
        assert_eq!(direct.actions, inf.run.actions);
        assert_eq!(direct.trace, inf.trace);
    }

    #[test]
    fn empty_candidates_rejected() {
        let desc = ActionSetDescription::Points { points: vec![] };
        assert!(matches!(desc.candidates(), Err(Error::Validation { .. })));
    }
}
