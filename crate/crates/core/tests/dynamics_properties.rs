mod common;

use common::{action_count, max_abs_diff, payoff_signal};
use proptest::prelude::*;
use regretlab_core::dynamics::matched_initialization;
use regretlab_core::sim::rk4_step;
use regretlab_core::{simulate, DynamicsModel, DynamicsState, PayoffSignal, Rule, SinusoidTerm, StateSpaceSiso};

fn channel(signal: &PayoffSignal, i: usize) -> PayoffSignal {
    match signal {
        PayoffSignal::Analytic { offset, terms } => PayoffSignal::Analytic {
            offset: vec![offset[i]],
            terms: terms
                .iter()
                .map(|t| SinusoidTerm { amplitude: vec![t.amplitude[i]], ..t.clone() })
                .collect(),
        },
        PayoffSignal::Sampled { .. } => unreachable!(),
    }
}

fn example1() -> PayoffSignal {
    PayoffSignal::analytic(vec![0.0, 0.5], vec![SinusoidTerm::sin(vec![1.0, 0.0], 1.0)]).unwrap()
}

#[test]
fn decay_matches_closed_form() {
    let model = DynamicsModel::new(Rule::exrd(), 1)
        .unwrap()
        .with_initial_state(DynamicsState(vec![1.0]))
        .unwrap();
    let zero = PayoffSignal::constant(vec![0.0]).unwrap();
    let error = |h: f64| {
        let traj = simulate(&model, &zero, 1.0, h).unwrap();
        (traj.states.last().unwrap()[0] - (-1.0f64).exp()).abs()
    };
    assert!(error(0.01) < 1e-9);
    let ratio = error(0.1) / error(0.05);
    assert!((ratio - 16.0).abs() < 1.0, "ratio {ratio}");
}

#[test]
fn single_step_matches_hand_rk4() {
    let model = DynamicsModel::new(Rule::exrd(), 1).unwrap();
    let signal = PayoffSignal::analytic(vec![0.0], vec![SinusoidTerm::sin(vec![1.0], 1.0)]).unwrap();
    let (t, h, z) = (0.3f64, 0.1f64, 0.2f64);
    let f = |t: f64, z: f64| t.sin() - z;
    let k1 = f(t, z);
    let k2 = f(t + h / 2.0, z + h / 2.0 * k1);
    let k3 = f(t + h / 2.0, z + h / 2.0 * k2);
    let k4 = f(t + h, z + h * k3);
    let expected = z + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    let next = rk4_step(&model, &[z], &signal, t, h).unwrap();
    assert!((next[0] - expected).abs() < 1e-15);
}

#[test]
fn halving_the_step_barely_moves_averages() {
    let signal = example1();
    for rule in [Rule::Rd, Rule::Bnn, Rule::Smith, Rule::Tp] {
        let model = DynamicsModel::new(rule.clone(), 2).unwrap();
        let coarse = simulate(&model, &signal, 200.0, 1e-2).unwrap().final_average();
        let fine = simulate(&model, &signal, 200.0, 5e-3).unwrap().final_average();
        assert!((coarse - fine).abs() < 1e-4, "{:?}: {coarse} vs {fine}", rule.kind());
    }
}

#[test]
fn simulation_is_deterministic() {
    let signal = example1();
    let model = DynamicsModel::new(Rule::Tp, 2).unwrap();
    assert_eq!(simulate(&model, &signal, 20.0, 1e-2).unwrap(), simulate(&model, &signal, 20.0, 1e-2).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn population_states_stay_on_simplex((n, signal) in action_count().prop_flat_map(|n| (Just(n), payoff_signal(n)))) {
        for rule in [Rule::Bnn, Rule::Smith, Rule::Tp] {
            let traj = simulate(&DynamicsModel::new(rule, n).unwrap(), &signal, 20.0, 1e-2).unwrap();
            for x in &traj.states {
                prop_assert!((x.iter().sum::<f64>() - 1.0).abs() < 1e-6);
                prop_assert!(x.iter().all(|v| *v >= -1e-6));
            }
        }
    }

    #[test]
    fn oracle_score_leads_by_the_payoff(signal in payoff_signal(3), alpha in -1.0..1.0f64) {
        let (sa, sb) = matched_initialization(&Rule::OracleRd, &Rule::Rd, 3, alpha).unwrap();
        let oracle = DynamicsModel::new(Rule::OracleRd, 3).unwrap().with_initial_state(sa).unwrap();
        let plain = DynamicsModel::new(Rule::Rd, 3).unwrap().with_initial_state(sb).unwrap();
        let a = simulate(&oracle, &signal, 10.0, 1e-2).unwrap();
        let b = simulate(&plain, &signal, 10.0, 1e-2).unwrap();
        for k in 0..a.len() {
            let p = &a.payoffs[k];
            let za = oracle.score(&a.states[k], p).unwrap().unwrap();
            let zb = plain.score(&b.states[k], p).unwrap().unwrap();
            let lead: Vec<f64> = za.iter().zip(&zb).map(|(x, y)| x - y).collect();
            prop_assert!(max_abs_diff(&lead, p) < 1e-12);
        }
    }

    #[test]
    fn predictive_forgetting_doubles_the_score(signal in payoff_signal(3), alpha in -1.0..1.0f64) {
        let (sa, sb) = matched_initialization(&Rule::PredictiveExrd, &Rule::exrd(), 3, alpha).unwrap();
        let pe = DynamicsModel::new(Rule::PredictiveExrd, 3).unwrap().with_initial_state(sa).unwrap();
        let e = DynamicsModel::new(Rule::exrd(), 3).unwrap().with_initial_state(sb).unwrap();
        let a = simulate(&pe, &signal, 10.0, 1e-2).unwrap();
        let b = simulate(&e, &signal, 10.0, 1e-2).unwrap();
        for k in 0..a.len() {
            let p = &a.payoffs[k];
            let za = pe.score(&a.states[k], p).unwrap().unwrap();
            let zb: Vec<f64> = e.score(&b.states[k], p).unwrap().unwrap().iter().map(|v| 2.0 * v).collect();
            prop_assert!(max_abs_diff(&za, &zb) < 1e-9);
        }
    }

    #[test]
    fn anticipatory_equals_low_pass_prediction(
        signal in payoff_signal(3),
        gamma in 0.2..3.0f64,
        lambda in 0.2..3.0f64,
        alpha in -1.0..1.0f64,
    ) {
        let ant = Rule::Anticipatory { gamma, lambda };
        let pred = Rule::predictive_low_pass(gamma, lambda);
        let (sa, sb) = matched_initialization(&ant, &pred, 3, alpha).unwrap();
        let a = simulate(&DynamicsModel::new(ant, 3).unwrap().with_initial_state(sa).unwrap(), &signal, 10.0, 1e-2).unwrap();
        let b = simulate(&DynamicsModel::new(pred, 3).unwrap().with_initial_state(sb).unwrap(), &signal, 10.0, 1e-2).unwrap();
        for (x, y) in a.strategies.iter().zip(&b.strategies) {
            prop_assert!(max_abs_diff(x, y) < 1e-10);
        }
    }

    #[test]
    fn predictor_acts_channel_by_channel(signal in payoff_signal(3)) {
        // (s + 3)/(s² + 3s + 2) in controllable form
        let filter = StateSpaceSiso::new(vec![vec![0.0, 1.0], vec![-2.0, -3.0]], vec![0.0, 1.0], vec![3.0, 1.0]).unwrap();
        let rule = Rule::PredictiveRd { predictor: filter };
        let joint = simulate(&DynamicsModel::new(rule.clone(), 3).unwrap(), &signal, 10.0, 1e-2).unwrap();
        for i in 0..3 {
            let single = simulate(&DynamicsModel::new(rule.clone(), 1).unwrap(), &channel(&signal, i), 10.0, 1e-2).unwrap();
            for (big, small) in joint.states.iter().zip(&single.states) {
                // layout: r (n), then the predictor states channel-major
                prop_assert_eq!(big[i], small[0]);
                prop_assert_eq!(&big[3 + 2 * i..3 + 2 * i + 2], &small[1..3]);
            }
        }
    }
}
