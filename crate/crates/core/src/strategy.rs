//! Finite sequential persuasion strategies and their exact evaluation.
//!
//! A strategy is a tree: every internal node runs an experiment and has one child per signal.
//! Evaluation walks the tree depth-first in signal order, carrying the receiver's
//! [`ProcedureState`] and the sender's belief along each history. Branch probabilities are
//! always computed from the sender's belief, so the resulting outcome list is the sender's
//! view of the terminal distribution.

use std::collections::BTreeMap;

use crate::belief::{
    bayes_posterior_at, signal_marginal, Belief, BiasParam, Experiment, ProcedureState,
    UpdateProcedure,
};
use crate::decision::{best_response, v_hat_alpha, DecisionProblem};
use crate::error::{Error, Result};

/// Histories whose probability falls below this are dropped.
pub const PRUNE_TOL: f64 = 1e-15;
/// Receiver beliefs closer than this (coordinatewise) are merged in posterior distributions.
pub const MERGE_TOL: f64 = 1e-9;
pub const DEFAULT_MAX_DEPTH: usize = 32;
pub const DEFAULT_MAX_LEAVES: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub enum StrategyNode {
    Stop,
    Continue {
        experiment: Experiment,
        /// One child per signal, in the experiment's signal order.
        children: Vec<StrategyNode>,
    },
}

impl StrategyNode {
    pub fn continue_with(experiment: Experiment, children: Vec<StrategyNode>) -> Result<Self> {
        if children.len() != experiment.num_signals() {
            return Err(Error::InvalidStrategy(format!(
                "experiment has {} signals but {} children were given",
                experiment.num_signals(),
                children.len()
            )));
        }
        Ok(StrategyNode::Continue {
            experiment,
            children,
        })
    }

    /// Builds a node from children keyed by signal label; every signal needs exactly one child.
    pub fn from_children_map(
        experiment: Experiment,
        mut children: BTreeMap<String, StrategyNode>,
    ) -> Result<Self> {
        let mut ordered = Vec::with_capacity(experiment.num_signals());
        for s in experiment.signals() {
            let child = children
                .remove(s)
                .ok_or_else(|| Error::InvalidStrategy(format!("no child for signal `{s}`")))?;
            ordered.push(child);
        }
        if let Some(extra) = children.keys().next() {
            return Err(Error::InvalidStrategy(format!(
                "child for unknown signal `{extra}`"
            )));
        }
        StrategyNode::continue_with(experiment, ordered)
    }

    /// Runs `experiment` once and stops on every signal.
    pub fn single(experiment: Experiment) -> Self {
        let children = vec![StrategyNode::Stop; experiment.num_signals()];
        StrategyNode::Continue {
            experiment,
            children,
        }
    }

    /// Runs `experiment` in every period for `periods` periods regardless of history.
    pub fn repeat(experiment: &Experiment, periods: usize) -> Self {
        let mut node = StrategyNode::Stop;
        for _ in 0..periods {
            let children = vec![node; experiment.num_signals()];
            node = StrategyNode::Continue {
                experiment: experiment.clone(),
                children,
            };
        }
        node
    }

    pub fn is_stop(&self) -> bool {
        matches!(self, StrategyNode::Stop)
    }

    /// Number of experiments on the longest history.
    pub fn depth(&self) -> usize {
        match self {
            StrategyNode::Stop => 0,
            StrategyNode::Continue { children, .. } => {
                1 + children.iter().map(StrategyNode::depth).max().unwrap_or(0)
            }
        }
    }

    /// Number of terminal histories, counting zero-probability ones.
    pub fn leaf_count(&self) -> usize {
        match self {
            StrategyNode::Stop => 1,
            StrategyNode::Continue { children, .. } => {
                children.iter().map(StrategyNode::leaf_count).sum()
            }
        }
    }

    pub fn num_states(&self) -> Option<usize> {
        match self {
            StrategyNode::Stop => None,
            StrategyNode::Continue { experiment, .. } => Some(experiment.num_states()),
        }
    }
}

/// How the sender forms beliefs along a history.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SenderModel {
    /// Plain Bayes from the common prior.
    Bayesian,
    /// Same procedure and bias as the receiver.
    BiasedSameAsReceiver,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EngineLimits {
    pub max_depth: usize,
    pub max_leaves: usize,
}

impl Default for EngineLimits {
    fn default() -> Self {
        EngineLimits {
            max_depth: DEFAULT_MAX_DEPTH,
            max_leaves: DEFAULT_MAX_LEAVES,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TerminalOutcome {
    pub history: Vec<String>,
    /// Probability under the sender's belief model.
    pub probability: f64,
    pub sender_belief: Belief,
    pub receiver_belief: Belief,
}

/// Evaluates strategies for one problem under a fixed bias, procedure and sender model.
#[derive(Debug, Clone)]
pub struct Engine<'a> {
    problem: &'a DecisionProblem,
    alpha: BiasParam,
    procedure: UpdateProcedure,
    sender: SenderModel,
    limits: EngineLimits,
}

impl<'a> Engine<'a> {
    pub fn new(
        problem: &'a DecisionProblem,
        alpha: BiasParam,
        procedure: UpdateProcedure,
        sender: SenderModel,
    ) -> Result<Self> {
        if sender == SenderModel::BiasedSameAsReceiver && procedure == UpdateProcedure::Lp {
            return Err(Error::IncompatibleSenderModel(
                "a biased sender cannot follow the LP procedure".into(),
            ));
        }
        Ok(Engine {
            problem,
            alpha,
            procedure,
            sender,
            limits: EngineLimits::default(),
        })
    }

    pub fn with_limits(mut self, limits: EngineLimits) -> Self {
        self.limits = limits;
        self
    }

    pub fn problem(&self) -> &DecisionProblem {
        self.problem
    }

    /// All terminal histories with positive probability, in depth-first signal order.
    pub fn enumerate(&self, strategy: &StrategyNode) -> Result<Vec<TerminalOutcome>> {
        check_shape(strategy, self.problem.num_states(), self.limits.max_depth)?;
        let prior = self.problem.prior().clone();
        let receiver = ProcedureState::start(self.procedure, self.alpha, prior.clone());
        let sender_bayes = match self.sender {
            SenderModel::Bayesian => Some(prior),
            SenderModel::BiasedSameAsReceiver => None,
        };
        let mut out = Vec::new();
        let mut history = Vec::new();
        self.walk(
            strategy,
            &mut history,
            1.0,
            receiver,
            sender_bayes,
            &mut out,
        )?;
        Ok(out)
    }

    fn walk(
        &self,
        node: &StrategyNode,
        history: &mut Vec<String>,
        prob: f64,
        receiver: ProcedureState,
        sender_bayes: Option<Belief>,
        out: &mut Vec<TerminalOutcome>,
    ) -> Result<()> {
        match node {
            StrategyNode::Stop => {
                if out.len() >= self.limits.max_leaves {
                    return Err(Error::LeafCapExceeded(self.limits.max_leaves));
                }
                let receiver_belief = receiver.finalize();
                let sender_belief = sender_bayes.unwrap_or_else(|| receiver_belief.clone());
                out.push(TerminalOutcome {
                    history: history.clone(),
                    probability: prob,
                    sender_belief,
                    receiver_belief,
                });
            }
            StrategyNode::Continue {
                experiment,
                children,
            } => {
                let sender_view = sender_bayes
                    .as_ref()
                    .unwrap_or_else(|| receiver.current_biased());
                let marginal = signal_marginal(sender_view, experiment)?;
                for (i, child) in children.iter().enumerate() {
                    let branch = prob * marginal[i];
                    if branch < PRUNE_TOL {
                        continue;
                    }
                    let next_receiver = receiver.step_at(experiment, i)?;
                    let next_sender = match &sender_bayes {
                        Some(b) => Some(bayes_posterior_at(b, experiment, i)?),
                        None => None,
                    };
                    history.push(experiment.signals()[i].clone());
                    self.walk(child, history, branch, next_receiver, next_sender, out)?;
                    history.pop();
                }
            }
        }
        Ok(())
    }

    /// Sender's expected payoff: each terminal history weighs the sender's expected utility
    /// of the receiver's best response at the receiver's terminal belief.
    pub fn sender_expected_payoff(&self, strategy: &StrategyNode) -> Result<f64> {
        Ok(payoff_of_outcomes(self.problem, &self.enumerate(strategy)?))
    }

    /// Distribution of the receiver's terminal beliefs, merged at [`MERGE_TOL`] and sorted.
    pub fn receiver_posterior_distribution(
        &self,
        strategy: &StrategyNode,
    ) -> Result<Vec<(Belief, f64)>> {
        let outcomes = self.enumerate(strategy)?;
        Ok(merge_distribution(
            outcomes
                .into_iter()
                .map(|o| (o.receiver_belief, o.probability))
                .collect(),
        ))
    }
}

fn check_shape(strategy: &StrategyNode, num_states: usize, max_depth: usize) -> Result<()> {
    fn rec(node: &StrategyNode, num_states: usize, level: usize, max_depth: usize) -> Result<()> {
        if let StrategyNode::Continue {
            experiment,
            children,
        } = node
        {
            if level >= max_depth {
                return Err(Error::DepthCapExceeded(max_depth));
            }
            if experiment.num_states() != num_states {
                return Err(Error::DimensionMismatch {
                    expected: num_states,
                    found: experiment.num_states(),
                });
            }
            if children.len() != experiment.num_signals() {
                return Err(Error::InvalidStrategy(
                    "child count differs from signal count".into(),
                ));
            }
            for c in children {
                rec(c, num_states, level + 1, max_depth)?;
            }
        }
        Ok(())
    }
    rec(strategy, num_states, 0, max_depth)
}

/// `sum_h P(h) * E_{sender belief}[v(w, a(receiver belief))]`, summed in outcome order.
pub fn payoff_of_outcomes(problem: &DecisionProblem, outcomes: &[TerminalOutcome]) -> f64 {
    outcomes
        .iter()
        .map(|o| {
            let action = best_response(problem, &o.receiver_belief);
            o.probability * problem.expected_sender_utility(&o.sender_belief, &action)
        })
        .sum()
}

/// Merges beliefs within [`MERGE_TOL`] and sorts the result lexicographically.
pub fn merge_distribution(mut points: Vec<(Belief, f64)>) -> Vec<(Belief, f64)> {
    points.sort_by(|a, b| {
        a.0.weights()
            .iter()
            .zip(b.0.weights())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut merged: Vec<(Belief, f64)> = Vec::new();
    for (belief, p) in points {
        let hit = merged
            .iter_mut()
            .rev()
            .take_while(|(m, _)| (m[0] - belief[0]).abs() <= MERGE_TOL)
            .find(|(m, _)| m.approx_eq(&belief, MERGE_TOL));
        match hit {
            Some((_, mass)) => *mass += p,
            None => merged.push((belief, p)),
        }
    }
    merged
}

pub fn enumerate_outcomes(
    strategy: &StrategyNode,
    problem: &DecisionProblem,
    alpha: BiasParam,
    procedure: UpdateProcedure,
    sender: SenderModel,
) -> Result<Vec<TerminalOutcome>> {
    Engine::new(problem, alpha, procedure, sender)?.enumerate(strategy)
}

pub fn sender_expected_payoff(
    strategy: &StrategyNode,
    problem: &DecisionProblem,
    alpha: BiasParam,
    procedure: UpdateProcedure,
    sender: SenderModel,
) -> Result<f64> {
    Engine::new(problem, alpha, procedure, sender)?.sender_expected_payoff(strategy)
}

/// Receiver's terminal belief distribution as seen by a Bayesian sender.
pub fn receiver_posterior_distribution(
    strategy: &StrategyNode,
    problem: &DecisionProblem,
    alpha: BiasParam,
    procedure: UpdateProcedure,
) -> Result<Vec<(Belief, f64)>> {
    Engine::new(problem, alpha, procedure, SenderModel::Bayesian)?
        .receiver_posterior_distribution(strategy)
}

/// Label of a terminal history when used as a signal of the one-shot equivalent.
pub fn history_label(history: &[String]) -> String {
    format!("({})", history.join(","))
}

/// The single experiment whose signals are the terminal histories of `strategy`.
///
/// `P(h | w)` is the product of the per-period conditionals along `h`. Histories that are
/// impossible in every state are dropped.
pub fn one_shot_equivalent(strategy: &StrategyNode, num_states: usize) -> Result<Experiment> {
    one_shot_equivalent_with(strategy, num_states, EngineLimits::default())
}

pub fn one_shot_equivalent_with(
    strategy: &StrategyNode,
    num_states: usize,
    limits: EngineLimits,
) -> Result<Experiment> {
    check_shape(strategy, num_states, limits.max_depth)?;
    fn rec(
        node: &StrategyNode,
        history: &mut Vec<String>,
        probs: Vec<f64>,
        limits: &EngineLimits,
        out: &mut Vec<(String, Vec<f64>)>,
    ) -> Result<()> {
        match node {
            StrategyNode::Stop => {
                if probs.iter().any(|&p| p > 0.0) {
                    if out.len() >= limits.max_leaves {
                        return Err(Error::LeafCapExceeded(limits.max_leaves));
                    }
                    out.push((history_label(history), probs));
                }
            }
            StrategyNode::Continue {
                experiment,
                children,
            } => {
                for (i, child) in children.iter().enumerate() {
                    let next: Vec<f64> = probs
                        .iter()
                        .enumerate()
                        .map(|(s, p)| p * experiment.prob(s, i))
                        .collect();
                    if next.iter().all(|&p| p == 0.0) {
                        continue;
                    }
                    history.push(experiment.signals()[i].clone());
                    rec(child, history, next, limits, out)?;
                    history.pop();
                }
            }
        }
        Ok(())
    }
    let mut columns = Vec::new();
    rec(
        strategy,
        &mut Vec::new(),
        vec![1.0; num_states],
        &limits,
        &mut columns,
    )?;
    let signals = columns.iter().map(|(l, _)| l.clone()).collect();
    let kernel = (0..num_states)
        .map(|s| columns.iter().map(|(_, p)| p[s]).collect())
        .collect();
    Experiment::new(signals, kernel)
}

/// Sender's payoff from running `exp` once with the bias applied a single time to the
/// Bayesian posterior: `sum_x P(x) * v_hat_alpha(posterior_x)`.
pub fn one_shot_payoff(
    exp: &Experiment,
    problem: &DecisionProblem,
    alpha: BiasParam,
) -> Result<f64> {
    let prior = problem.prior();
    let marginal = signal_marginal(prior, exp)?;
    let mut total = 0.0;
    for (i, p) in marginal.iter().enumerate() {
        if *p < PRUNE_TOL {
            continue;
        }
        let post = bayes_posterior_at(prior, exp, i)?;
        total += p * v_hat_alpha(problem, &post, alpha);
    }
    Ok(total)
}
