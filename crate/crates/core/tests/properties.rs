use batched_bandits::design::{epsilon_net, frank_wolfe_goptimal, max_leverage, project_to_span};
use batched_bandits::env::{BatchSchedule, LinearBanditInstance, NoiseKind, StochasticMabInstance};
use batched_bandits::export::{finals_by_experiment, read_traces_csv, write_output, write_traces_csv};
use batched_bandits::harness::{ExperimentOutput, LabeledTrace, OutputFormat, RunSummary};
use batched_bandits::policy_adversarial::{make_uniform_schedule, softmax};
use batched_bandits::policy_linear::run_batched_linear;
use batched_bandits::policy_mab::{run_batched_mab, Growth};
use batched_bandits::regret::{RegretKind, RegretTrace};
use batched_bandits::rng::ReplicationStream;
use batched_bandits::DVector;
use proptest::prelude::*;

fn vectors(dim: usize, count: std::ops::Range<usize>) -> impl Strategy<Value = Vec<DVector<f64>>> {
    prop::collection::vec(prop::collection::vec(-1.0f64..1.0, dim), count).prop_map(|rows| {
        rows.into_iter()
            .map(|r| {
                let v = DVector::from_vec(r);
                let n = v.norm();
                if n > 1.0 {
                    v / n
                } else {
                    v
                }
            })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mab_runs_conserve_pulls_and_batches(
        means in prop::collection::vec(0.0f64..=1.0, 1..5),
        horizon in 1u64..3000,
        b_frac in 0.0f64..1.0,
        seed in any::<u64>(),
    ) {
        let batches = 1 + ((horizon.min(10) - 1) as f64 * b_frac) as u64;
        let inst = StochasticMabInstance::bernoulli(means.clone()).unwrap();
        let run = run_batched_mab(&inst, horizon, batches, None, &ReplicationStream::new(seed, 0)).unwrap();
        prop_assert_eq!(run.pull_counts.iter().sum::<u64>(), horizon);
        prop_assert_eq!(run.actions.len() as u64, horizon);
        prop_assert!(run.batch_count as u64 <= batches);
        prop_assert!(run.trace.is_nondecreasing());
        prop_assert!(!run.final_active.is_empty());
        // once absent from an exploration batch, an arm is never played again
        let mut start = 0usize;
        let mut alive = vec![true; means.len()];
        for &size in &run.batch_sizes {
            let end = start + size as usize;
            let mut seen = vec![false; means.len()];
            for &a in &run.actions[start..end] {
                prop_assert!(alive[a]);
                seen[a] = true;
            }
            alive = seen;
            start = end;
        }
    }

    #[test]
    fn horizon_root_schedule_reaches_horizon(horizon in 1u64..2_000_000, b_frac in 0.0f64..1.0) {
        let batches = 1 + ((horizon.min(64) - 1) as f64 * b_frac) as u64;
        let g = Growth::HorizonRoot { horizon, batches };
        prop_assert_eq!(g.floor_pow(batches), horizon);
        prop_assert!(g.cumulative(batches) >= horizon);
        for i in 1..batches {
            prop_assert!(g.floor_pow(i) <= g.floor_pow(i + 1));
        }
    }

    #[test]
    fn gaps_translation_invariant(means in prop::collection::vec(0.0f64..0.5, 1..6), shift in 0.0f64..0.5) {
        let a = StochasticMabInstance::bernoulli(means.clone()).unwrap().gaps();
        let b = StochasticMabInstance::bernoulli(means.iter().map(|m| m + shift).collect()).unwrap().gaps();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn uniform_schedule_is_balanced(horizon in 1usize..10_000, b_frac in 0.0f64..1.0) {
        let batches = 1 + ((horizon - 1) as f64 * b_frac) as usize;
        let s = make_uniform_schedule(horizon, batches).unwrap();
        prop_assert_eq!(s.horizon(), horizon);
        prop_assert_eq!(s.num_batches(), batches);
        let max = *s.sizes().iter().max().unwrap();
        let min = *s.sizes().iter().min().unwrap();
        prop_assert!(max - min <= 1);
        prop_assert!(s.sizes().windows(2).all(|w| w[0] >= w[1]));
        prop_assert_eq!(s, BatchSchedule::uniform(horizon, batches).unwrap());
    }

    #[test]
    fn softmax_is_a_distribution(weights in prop::collection::vec(-1e6f64..1e6, 1..8)) {
        let p = softmax(&weights);
        prop_assert!(p.iter().all(|&x| x >= 0.0 && x.is_finite()));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn epsilon_net_covers_and_separates(points in vectors(2, 1..200), eps in 0.01f64..0.5) {
        let net = epsilon_net(&points, eps);
        for p in &points {
            prop_assert!(net.iter().any(|&i| (p - &points[i]).norm() <= eps));
        }
        for (x, &i) in net.iter().enumerate() {
            for &j in &net[x + 1..] {
                prop_assert!((&points[i] - &points[j]).norm() > eps);
            }
        }
    }

    #[test]
    fn converged_designs_satisfy_kiefer_wolfowitz(actions in vectors(3, 3..40)) {
        prop_assume!(project_to_span(&actions).map(|p| p.rank() == 3).unwrap_or(false));
        let design = frank_wolfe_goptimal(&actions, 0.01, 100_000).unwrap();
        prop_assume!(design.converged);
        let (_, g) = max_leverage(&actions, &design).unwrap();
        prop_assert!(g >= 3.0 - 1e-7, "g = {}", g);
        prop_assert!(g <= 3.0 * 1.01 + 1e-9, "g = {}", g);
        prop_assert!((design.weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn linear_runs_conserve_and_keep_best_when_noiseless(
        actions in vectors(2, 2..8),
        theta in vectors(2, 1..2),
        horizon in 50u64..5000,
        batches in 1u64..6,
    ) {
        prop_assume!(actions.iter().any(|a| a.norm() > 1e-3));
        let inst = LinearBanditInstance::new(theta[0].clone(), actions, NoiseKind::None).unwrap();
        let run = run_batched_linear(&inst, horizon, batches, &ReplicationStream::new(1, 0)).unwrap();
        prop_assert_eq!(run.actions.len() as u64, horizon);
        prop_assert_eq!(run.pull_counts.iter().sum::<u64>(), horizon);
        prop_assert!(run.batch_count as u64 <= batches);
        prop_assert!(run.trace.is_nondecreasing());
        let values = inst.expected_rewards();
        let best = inst.best_value();
        for rec in &run.batches {
            prop_assert!(rec.survivors.iter().any(|&a| best - values[a] <= 1e-9));
            prop_assert!(rec.survivors.iter().all(|a| rec.active_before.contains(a)));
        }
    }

    #[test]
    fn csv_round_trip_is_exact(
        rows in prop::collection::vec(prop::collection::vec(-1e6f64..1e6, 1..20), 0..6),
    ) {
        let traces: Vec<LabeledTrace> = rows
            .iter()
            .enumerate()
            .map(|(rep, v)| LabeledTrace {
                experiment: "x".into(),
                rep,
                trace: RegretTrace { kind: RegretKind::Pseudo, cumulative: v.clone() },
            })
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("traces.csv");
        let output = ExperimentOutput { summaries: vec![], traces: traces.clone() };
        write_output(&output, &path, OutputFormat::Csv).unwrap();
        let parsed = read_traces_csv(std::fs::File::open(&path).unwrap()).unwrap();
        prop_assert_eq!(parsed.len(), traces.len());
        for (p, t) in parsed.iter().zip(&traces) {
            prop_assert_eq!(&p.cumulative, &t.trace.cumulative);
        }
        if !rows.is_empty() {
            let finals: Vec<f64> = rows.iter().map(|r| *r.last().unwrap()).collect();
            let grouped = finals_by_experiment(&parsed);
            prop_assert_eq!(
                RunSummary::from_finals("x", 0, 0, grouped[0].1.clone()),
                RunSummary::from_finals("x", 0, 0, finals)
            );
        }
        let mut buf = Vec::new();
        write_traces_csv(&traces, &mut buf).unwrap();
        prop_assert_eq!(buf, std::fs::read(&path).unwrap());
    }

    #[test]
    fn summary_mean_within_range(finals in prop::collection::vec(-1e3f64..1e3, 1..50)) {
        let s = RunSummary::from_finals("x", 1, 1, finals.clone());
        prop_assert!(s.min <= s.mean && s.mean <= s.max);
        let direct = finals.iter().sum::<f64>() / finals.len() as f64;
        prop_assert!((s.mean - direct).abs() <= 1e-12 * direct.abs().max(1.0));
    }
}
