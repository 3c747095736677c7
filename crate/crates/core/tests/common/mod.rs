#![allow(dead_code)]

use persuasion_core::{ActionModel, Belief, DecisionProblem, Experiment, StrategyNode};
use rand::Rng;

pub fn random_belief<R: Rng>(rng: &mut R, dim: usize, floor: f64) -> Belief {
    let raw: Vec<f64> = (0..dim).map(|_| floor + rng.gen::<f64>()).collect();
    let total: f64 = raw.iter().sum();
    Belief::new(raw.into_iter().map(|x| x / total).collect()).unwrap()
}

pub fn random_experiment<R: Rng>(rng: &mut R, states: usize, signals: usize) -> Experiment {
    let kernel = (0..states)
        .map(|_| random_belief(rng, signals, 0.01).into_inner())
        .collect();
    Experiment::new((0..signals).map(|i| format!("s{i}")).collect(), kernel).unwrap()
}

pub fn random_finite_problem<R: Rng>(
    rng: &mut R,
    states: usize,
    actions: usize,
) -> DecisionProblem {
    let mut table = || -> Vec<Vec<f64>> {
        (0..states)
            .map(|_| (0..actions).map(|_| rng.gen::<f64>()).collect())
            .collect()
    };
    let receiver_u = table();
    let sender_v = table();
    let prior = random_belief(rng, states, 0.05);
    DecisionProblem::new(
        (0..states).map(|s| format!("w{s}")).collect(),
        prior,
        ActionModel::Finite {
            actions: (0..actions).map(|a| format!("a{a}")).collect(),
            receiver_u,
            sender_v,
        },
    )
    .unwrap()
}

/// A random tree of depth at most `depth`; the root always runs an experiment.
pub fn random_strategy<R: Rng>(rng: &mut R, states: usize, depth: usize) -> StrategyNode {
    fn node<R: Rng>(rng: &mut R, states: usize, depth: usize, root: bool) -> StrategyNode {
        if depth == 0 || (!root && rng.gen_bool(0.3)) {
            return StrategyNode::Stop;
        }
        let signals = rng.gen_range(2..=3);
        let exp = random_experiment(rng, states, signals);
        let children = (0..signals)
            .map(|_| node(rng, states, depth - 1, false))
            .collect();
        StrategyNode::continue_with(exp, children).unwrap()
    }
    node(rng, states, depth, true)
}
