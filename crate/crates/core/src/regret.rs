//! Regret traces and the closed-form MAB bound.

use serde::{Deserialize, Serialize};

use crate::env::{AdversarialRewardTable, LinearBanditInstance, StochasticMabInstance};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegretKind {
    /// Gap-weighted regret computed from the true means of the played arms.
    Pseudo,
    /// Hindsight regret against a fixed reward table.
    Adversarial,
}

/// Cumulative regret after each round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretTrace {
    pub kind: RegretKind,
    pub cumulative: Vec<f64>,
}

impl RegretTrace {
    pub fn len(&self) -> usize {
        self.cumulative.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cumulative.is_empty()
    }

    /// Total regret (0 for an empty trace).
    pub fn final_regret(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }

    pub fn is_nondecreasing(&self) -> bool {
        self.cumulative.windows(2).all(|w| w[1] >= w[0])
    }

    pub(crate) fn from_increments(kind: RegretKind, increments: impl Iterator<Item = f64>) -> Self {
        let cumulative = increments
            .scan(0.0, |acc, x| {
                *acc += x;
                Some(*acc)
            })
            .collect();
        Self { kind, cumulative }
    }
}

/// Environments whose arms have known expected rewards.
pub trait ArmValues {
    fn arm_values(&self) -> Vec<f64>;
}

impl ArmValues for StochasticMabInstance {
    fn arm_values(&self) -> Vec<f64> {
        self.means().to_vec()
    }
}

impl ArmValues for LinearBanditInstance {
    fn arm_values(&self) -> Vec<f64> {
        self.expected_rewards()
    }
}

/// `sum_t (best value - value of a_t)` accumulated round by round.
pub fn compute_pseudo_regret<I: ArmValues + ?Sized>(actions: &[usize], instance: &I) -> Result<RegretTrace> {
    let values = instance.arm_values();
    let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let gaps: Vec<f64> = values.iter().map(|v| best - v).collect();
    if let Some(&bad) = actions.iter().find(|&&a| a >= gaps.len()) {
        return Err(Error::IndexOutOfRange {
            what: "arms",
            index: bad,
            len: gaps.len(),
        });
    }
    Ok(RegretTrace::from_increments(
        RegretKind::Pseudo,
        actions.iter().map(|&a| gaps[a]),
    ))
}

/// Both adversarial regret variants for one play sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct AdversarialRegret {
    /// Best arm over each prefix minus the player's prefix reward.
    pub running: RegretTrace,
    /// The overall hindsight-best arm's prefix reward minus the player's.
    /// May be negative before the end.
    pub hindsight: RegretTrace,
    pub best_arm: usize,
}

impl AdversarialRegret {
    /// The reported regret: hindsight-best total minus player total.
    pub fn final_regret(&self) -> f64 {
        self.hindsight.final_regret()
    }
}

pub fn compute_adversarial_regret(
    actions: &[usize],
    table: &AdversarialRewardTable,
) -> Result<AdversarialRegret> {
    if actions.len() != table.horizon() {
        return Err(Error::validation(
            "actions",
            format!(
                "{} actions for a table of horizon {}",
                actions.len(),
                table.horizon()
            ),
        ));
    }
    let k = table.num_arms();
    if let Some(&bad) = actions.iter().find(|&&a| a >= k) {
        return Err(Error::IndexOutOfRange {
            what: "arms",
            index: bad,
            len: k,
        });
    }
    let totals = table.totals();
    let best_arm = crate::env::argmax_lowest(&totals).expect("table has arms");

    let mut prefix = vec![0.0; k];
    let mut player = 0.0;
    let mut running = Vec::with_capacity(actions.len());
    let mut hindsight = Vec::with_capacity(actions.len());
    for (t, &a) in actions.iter().enumerate() {
        for (arm, p) in prefix.iter_mut().enumerate() {
            *p += table.reward(arm, t);
        }
        player += table.reward(a, t);
        let best_prefix = prefix.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        running.push(best_prefix - player);
        hindsight.push(prefix[best_arm] - player);
    }
    Ok(AdversarialRegret {
        running: RegretTrace {
            kind: RegretKind::Adversarial,
            cumulative: running,
        },
        hindsight: RegretTrace {
            kind: RegretKind::Adversarial,
            cumulative: hindsight,
        },
        best_arm,
    })
}

/// `9 T^{1/B} ln(2KTB) sum_{j: gap_j > 0} 1/gap_j`.
pub fn theoretical_bound_mab(instance: &StochasticMabInstance, horizon: usize, batches: usize) -> f64 {
    let q = (horizon as f64).powf(1.0 / batches as f64);
    theoretical_bound_mab_with_q(instance, horizon, batches, q)
}

/// The same bound with an explicit growth factor `q` in place of `T^{1/B}`.
pub fn theoretical_bound_mab_with_q(
    instance: &StochasticMabInstance,
    horizon: usize,
    batches: usize,
    q: f64,
) -> f64 {
    let inverse_gaps: f64 = instance
        .gaps()
        .into_iter()
        .filter(|&g| g > 0.0)
        .map(|g| 1.0 / g)
        .sum();
    if inverse_gaps == 0.0 {
        return 0.0;
    }
    let k = instance.num_arms() as f64;
    9.0 * q * (2.0 * k * horizon as f64 * batches as f64).ln() * inverse_gaps
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{switching_table, NoiseKind, Provenance};
    use approx::assert_abs_diff_eq;
    use nalgebra::DVector;

    #[test]
    fn best_arm_gives_zero_trace() {
        let inst = StochasticMabInstance::bernoulli(vec![0.2, 0.9]).unwrap();
        let tr = compute_pseudo_regret(&[1; 20], &inst).unwrap();
        assert!(tr.cumulative.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn suboptimal_pulls_accumulate_gap() {
        let inst = StochasticMabInstance::bernoulli(vec![0.9, 0.6]).unwrap();
        let tr = compute_pseudo_regret(&[1; 10], &inst).unwrap();
        assert_abs_diff_eq!(tr.final_regret(), 3.0, epsilon = 1e-12);
        assert!(tr.is_nondecreasing());
        assert!(compute_pseudo_regret(&[2], &inst).is_err());
    }

    #[test]
    fn linear_alternating_regret() {
        let inst = LinearBanditInstance::new(
            DVector::from_vec(vec![1.0, 0.0]),
            vec![
                DVector::from_vec(vec![1.0, 0.0]),
                DVector::from_vec(vec![0.0, 1.0]),
            ],
            NoiseKind::None,
        )
        .unwrap();
        let actions: Vec<usize> = (0..10).map(|t| t % 2).collect();
        let tr = compute_pseudo_regret(&actions, &inst).unwrap();
        assert_abs_diff_eq!(tr.final_regret(), 5.0);
    }

    #[test]
    fn adversarial_examples() {
        let table = switching_table(8, 3, 1).unwrap();
        let r = compute_adversarial_regret(&[1; 8], &table).unwrap();
        assert_eq!(r.final_regret(), 0.0);
        assert_eq!(r.best_arm, 1);

        let flat = AdversarialRewardTable::new(vec![vec![0.4; 5]; 3], Provenance::External).unwrap();
        let r = compute_adversarial_regret(&[0, 2, 1, 1, 0], &flat).unwrap();
        assert_eq!(r.final_regret(), 0.0);

        // arm 0 wins the first 40 rounds, arm 1 the last 60; always playing arm 0
        let mut rows = vec![vec![0.0; 100]; 2];
        rows[0][..40].fill(1.0);
        rows[1][40..].fill(1.0);
        let table = AdversarialRewardTable::new(rows, Provenance::External).unwrap();
        let r = compute_adversarial_regret(&[0; 100], &table).unwrap();
        assert_eq!(r.final_regret(), 20.0);
        assert_eq!(r.best_arm, 1);
        assert_eq!(r.running.final_regret(), 20.0);
        assert!(compute_adversarial_regret(&[0; 99], &table).is_err());
    }

    #[test]
    fn hindsight_trace_can_go_negative() {
        let mut rows = vec![vec![0.0; 4]; 2];
        rows[1][0] = 1.0;
        rows[0][1..].fill(1.0);
        let table = AdversarialRewardTable::new(rows, Provenance::External).unwrap();
        let r = compute_adversarial_regret(&[1, 0, 0, 0], &table).unwrap();
        assert_eq!(r.hindsight.cumulative[0], -1.0);
        assert_eq!(r.running.cumulative[0], 0.0);
        assert_eq!(r.final_regret(), -1.0);
    }

    #[test]
    fn bound_examples() {
        let flat = StochasticMabInstance::bernoulli(vec![0.5, 0.5]).unwrap();
        assert_eq!(theoretical_bound_mab(&flat, 1000, 3), 0.0);
        let inst = StochasticMabInstance::bernoulli(vec![0.9, 0.6]).unwrap();
        let b = theoretical_bound_mab(&inst, 1000, 3);
        assert_abs_diff_eq!(b, 9.0 * 10.0 * 12000f64.ln() / 0.3, epsilon = 1e-9);
        assert!((b - 2817.8).abs() < 0.01, "{b}");
        let half_gap = StochasticMabInstance::bernoulli(vec![0.9, 0.75]).unwrap();
        assert_abs_diff_eq!(theoretical_bound_mab(&half_gap, 1000, 3), 2.0 * b, epsilon = 1e-9);
    }
}
