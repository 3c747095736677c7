//! Decision problems, receiver best responses and the sender's value functions.

use crate::belief::{apply_bias, Belief, BiasParam};
use crate::error::{Error, Result};
use crate::grid;
use nalgebra::DMatrix;

/// Two expected utilities closer than this count as a tie.
pub const INDIFFERENCE_TOL: f64 = 1e-9;

/// The receiver's action space and both players' utilities.
#[derive(Debug, Clone, PartialEq)]
pub enum ActionModel {
    /// Finitely many actions; `receiver_u[state][action]`, `sender_v[state][action]`.
    Finite {
        actions: Vec<String>,
        receiver_u: Vec<Vec<f64>>,
        sender_v: Vec<Vec<f64>>,
    },
    /// States on the real line, `u = -(a - w)^2`, `v = -(a - (w + b))^2`, `a` real.
    QuadraticCs {
        state_values: Vec<f64>,
        sender_bias: f64,
    },
    /// States in `R^k`, receiver plays the posterior mean, sender gets `beta . a`.
    MeanActionLinear {
        state_vectors: Vec<Vec<f64>>,
        sender_beta: Vec<f64>,
    },
}

impl ActionModel {
    pub fn kind(&self) -> &'static str {
        match self {
            ActionModel::Finite { .. } => "finite",
            ActionModel::QuadraticCs { .. } => "quadratic_cs",
            ActionModel::MeanActionLinear { .. } => "mean_action_linear",
        }
    }
}

/// An action of the receiver: an index into a finite action list, or a point in `R^k`.
#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    Discrete(usize),
    Point(Vec<f64>),
}

impl Action {
    pub fn index(&self) -> Option<usize> {
        match self {
            Action::Discrete(i) => Some(*i),
            Action::Point(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionProblem {
    state_labels: Vec<String>,
    prior: Belief,
    action_model: ActionModel,
}

impl DecisionProblem {
    pub fn new(
        state_labels: Vec<String>,
        prior: Belief,
        action_model: ActionModel,
    ) -> Result<Self> {
        let n = state_labels.len();
        if n == 0 {
            return Err(Error::InvalidProblem("no states".into()));
        }
        if prior.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: prior.dim(),
            });
        }
        if !prior.has_full_support() {
            return Err(Error::InvalidProblem("prior must have full support".into()));
        }
        for (i, s) in state_labels.iter().enumerate() {
            if state_labels[..i].contains(s) {
                return Err(Error::InvalidProblem(format!(
                    "duplicate state label `{s}`"
                )));
            }
        }
        match &action_model {
            ActionModel::Finite {
                actions,
                receiver_u,
                sender_v,
            } => {
                if actions.is_empty() {
                    return Err(Error::InvalidProblem(
                        "at least one action is required".into(),
                    ));
                }
                for (name, m) in [("receiver_u", receiver_u), ("sender_v", sender_v)] {
                    if m.len() != n || m.iter().any(|row| row.len() != actions.len()) {
                        return Err(Error::InvalidProblem(format!(
                            "{name} must be a {n} x {} matrix",
                            actions.len()
                        )));
                    }
                    if m.iter().flatten().any(|x| !x.is_finite()) {
                        return Err(Error::InvalidProblem(format!(
                            "{name} has non-finite entries"
                        )));
                    }
                }
            }
            ActionModel::QuadraticCs {
                state_values,
                sender_bias,
            } => {
                if state_values.len() != n {
                    return Err(Error::InvalidProblem(format!(
                        "state_values must have {n} entries"
                    )));
                }
                if !sender_bias.is_finite() || state_values.iter().any(|x| !x.is_finite()) {
                    return Err(Error::InvalidProblem(
                        "non-finite quadratic parameters".into(),
                    ));
                }
            }
            ActionModel::MeanActionLinear {
                state_vectors,
                sender_beta,
            } => {
                let k = sender_beta.len();
                if k == 0 || sender_beta.iter().all(|&b| b == 0.0) {
                    return Err(Error::InvalidProblem(
                        "sender_beta must be a non-zero vector".into(),
                    ));
                }
                if state_vectors.len() != n || state_vectors.iter().any(|v| v.len() != k) {
                    return Err(Error::InvalidProblem(format!(
                        "state_vectors must hold {n} vectors of length {k}"
                    )));
                }
                if affine_rank(state_vectors) != k {
                    return Err(Error::InvalidProblem(
                        "convex hull of the state vectors is not full-dimensional".into(),
                    ));
                }
            }
        }
        Ok(DecisionProblem {
            state_labels,
            prior,
            action_model,
        })
    }

    pub fn state_labels(&self) -> &[String] {
        &self.state_labels
    }

    pub fn num_states(&self) -> usize {
        self.state_labels.len()
    }

    pub fn prior(&self) -> &Belief {
        &self.prior
    }

    pub fn action_model(&self) -> &ActionModel {
        &self.action_model
    }

    /// The same problem with a different prior.
    pub fn with_prior(&self, prior: Belief) -> Result<Self> {
        DecisionProblem::new(self.state_labels.clone(), prior, self.action_model.clone())
    }

    /// The receiver's utility from `action` in `state`.
    pub fn receiver_utility(&self, state: usize, action: &Action) -> f64 {
        match (&self.action_model, action) {
            (ActionModel::Finite { receiver_u, .. }, Action::Discrete(a)) => receiver_u[state][*a],
            (ActionModel::QuadraticCs { state_values, .. }, Action::Point(a)) => {
                -(a[0] - state_values[state]).powi(2)
            }
            (ActionModel::MeanActionLinear { state_vectors, .. }, Action::Point(a)) => -a
                .iter()
                .zip(&state_vectors[state])
                .map(|(x, w)| (x - w).powi(2))
                .sum::<f64>(),
            _ => panic!("action does not belong to this action model"),
        }
    }

    /// The sender's utility from `action` in `state`.
    pub fn sender_utility(&self, state: usize, action: &Action) -> f64 {
        match (&self.action_model, action) {
            (ActionModel::Finite { sender_v, .. }, Action::Discrete(a)) => sender_v[state][*a],
            (
                ActionModel::QuadraticCs {
                    state_values,
                    sender_bias,
                },
                Action::Point(a),
            ) => -(a[0] - (state_values[state] + sender_bias)).powi(2),
            (ActionModel::MeanActionLinear { sender_beta, .. }, Action::Point(a)) => {
                sender_beta.iter().zip(a).map(|(b, x)| b * x).sum()
            }
            _ => panic!("action does not belong to this action model"),
        }
    }

    /// `E_{state ~ belief}[v(state, action)]`.
    pub fn expected_sender_utility(&self, belief: &Belief, action: &Action) -> f64 {
        (0..self.num_states())
            .filter(|&s| belief[s] != 0.0)
            .map(|s| belief[s] * self.sender_utility(s, action))
            .sum()
    }

    /// Whether the sender's utility depends on the action only.
    pub fn is_transparent(&self) -> bool {
        match &self.action_model {
            ActionModel::Finite { sender_v, .. } => (0..sender_v[0].len()).all(|a| {
                let first = sender_v[0][a];
                sender_v.iter().all(|row| (row[a] - first).abs() < 1e-12)
            }),
            ActionModel::QuadraticCs { .. } => false,
            ActionModel::MeanActionLinear { .. } => true,
        }
    }

    /// Whether receiver and sender utilities coincide.
    pub fn has_common_preferences(&self) -> bool {
        match &self.action_model {
            ActionModel::Finite {
                receiver_u,
                sender_v,
                ..
            } => receiver_u
                .iter()
                .flatten()
                .zip(sender_v.iter().flatten())
                .all(|(u, v)| (u - v).abs() < 1e-12),
            ActionModel::QuadraticCs { sender_bias, .. } => *sender_bias == 0.0,
            ActionModel::MeanActionLinear { .. } => false,
        }
    }
}

/// Dimension of the affine hull of `points`.
fn affine_rank(points: &[Vec<f64>]) -> usize {
    if points.len() < 2 {
        return 0;
    }
    let k = points[0].len();
    let rows = points.len() - 1;
    let m = DMatrix::from_fn(rows, k, |i, j| points[i + 1][j] - points[0][j]);
    m.rank(1e-9)
}

fn posterior_mean(problem: &DecisionProblem, mu: &Belief) -> Vec<f64> {
    match problem.action_model() {
        ActionModel::QuadraticCs { state_values, .. } => vec![mu.expectation(state_values)],
        ActionModel::MeanActionLinear { state_vectors, .. } => {
            let k = state_vectors[0].len();
            (0..k)
                .map(|j| (0..mu.dim()).map(|s| mu[s] * state_vectors[s][j]).sum())
                .collect()
        }
        ActionModel::Finite { .. } => unreachable!(),
    }
}

/// Indices of all actions within [`INDIFFERENCE_TOL`] of the receiver's optimum at `mu`.
pub fn receiver_optimal_actions(problem: &DecisionProblem, mu: &Belief) -> Result<Vec<usize>> {
    let ActionModel::Finite {
        receiver_u,
        actions,
        ..
    } = problem.action_model()
    else {
        return Err(Error::UnsupportedActionModel(problem.action_model().kind()));
    };
    let eu: Vec<f64> = (0..actions.len())
        .map(|a| (0..mu.dim()).map(|s| mu[s] * receiver_u[s][a]).sum())
        .collect();
    let best = eu.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((0..actions.len())
        .filter(|&a| eu[a] >= best - INDIFFERENCE_TOL)
        .collect())
}

/// Receiver's exact argmax (no indifference band), lowest index on exact ties.
pub(crate) fn exact_receiver_argmax(problem: &DecisionProblem, mu: &Belief) -> Option<usize> {
    let ActionModel::Finite {
        receiver_u,
        actions,
        ..
    } = problem.action_model()
    else {
        return None;
    };
    let mut best = (0, f64::NEG_INFINITY);
    for a in 0..actions.len() {
        let eu: f64 = (0..mu.dim()).map(|s| mu[s] * receiver_u[s][a]).sum();
        if eu > best.1 {
            best = (a, eu);
        }
    }
    Some(best.0)
}

/// The receiver's action at `mu`, breaking ties in the sender's favour and then by lowest index.
pub fn best_response(problem: &DecisionProblem, mu: &Belief) -> Action {
    match problem.action_model() {
        ActionModel::Finite { sender_v, .. } => {
            let ties = receiver_optimal_actions(problem, mu).expect("finite model");
            let mut best = ties[0];
            let mut best_v = f64::NEG_INFINITY;
            for a in ties {
                let ev: f64 = (0..mu.dim()).map(|s| mu[s] * sender_v[s][a]).sum();
                if ev > best_v {
                    best = a;
                    best_v = ev;
                }
            }
            Action::Discrete(best)
        }
        _ => Action::Point(posterior_mean(problem, mu)),
    }
}

/// Sender's expected payoff when both players hold `mu`.
pub fn v_hat(problem: &DecisionProblem, mu: &Belief) -> f64 {
    problem.expected_sender_utility(mu, &best_response(problem, mu))
}

/// Sender's expected payoff when the sender holds the Bayesian posterior `mu` and the receiver
/// acts at `D_alpha(mu; mu0)`.
pub fn v_hat_alpha(problem: &DecisionProblem, mu: &Belief, alpha: BiasParam) -> f64 {
    let receiver = apply_bias(alpha, problem.prior(), mu);
    problem.expected_sender_utility(mu, &best_response(problem, &receiver))
}

/// `sum_w mu0(w) * max_a v(w, a)`; infinite when the sender's utility is unbounded.
pub fn full_information_payoff(problem: &DecisionProblem) -> f64 {
    let mu0 = problem.prior();
    match problem.action_model() {
        ActionModel::Finite { sender_v, .. } => (0..mu0.dim())
            .map(|s| {
                mu0[s]
                    * sender_v[s]
                        .iter()
                        .copied()
                        .fold(f64::NEG_INFINITY, f64::max)
            })
            .sum(),
        ActionModel::QuadraticCs { .. } => 0.0,
        ActionModel::MeanActionLinear { .. } => f64::INFINITY,
    }
}

/// Outcome of the empty-intersection test over `F(mu0, alpha)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corollary2Check {
    pub holds: bool,
    pub witness_state: Option<usize>,
}

/// Default mesh subdivisions for [`corollary2_condition`].
pub const DEFAULT_CONDITION_RESOLUTION: usize = 200;

/// Checks whether some state `w` has no optimal action that is also receiver-optimal anywhere
/// on a mesh of `F(mu0, alpha)`. Sufficient for a gain from sequential persuasion under common
/// preferences.
pub fn corollary2_condition(
    problem: &DecisionProblem,
    alpha: BiasParam,
    grid_resolution: usize,
) -> Result<Corollary2Check> {
    let ActionModel::Finite { receiver_u, .. } = problem.action_model() else {
        return Err(Error::UnsupportedActionModel(problem.action_model().kind()));
    };
    if !problem.has_common_preferences() {
        return Err(Error::NotCommonPreferences);
    }
    if grid_resolution < 1 {
        return Err(Error::InvalidGrid("resolution must be positive".into()));
    }
    let mesh = grid::feasible_set_grid(alpha, problem.prior(), grid_resolution);
    let optimal_sets = mesh
        .iter()
        .map(|mu| receiver_optimal_actions(problem, mu))
        .collect::<Result<Vec<_>>>()?;
    for state in 0..problem.num_states() {
        let row = &receiver_u[state];
        let top = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let state_best: Vec<usize> = (0..row.len())
            .filter(|&a| row[a] >= top - INDIFFERENCE_TOL)
            .collect();
        let disjoint = optimal_sets
            .iter()
            .all(|set| set.iter().all(|a| !state_best.contains(a)));
        if disjoint {
            return Ok(Corollary2Check {
                holds: true,
                witness_state: Some(state),
            });
        }
    }
    Ok(Corollary2Check {
        holds: false,
        witness_state: None,
    })
}

/// Ready-made problems used throughout the tests, the CLI and the reproduction suites.
pub mod library {
    use super::*;

    fn labels(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    /// Two states (innocent, guilty), actions (acquit, convict); the judge wants to match the
    /// state and the prosecutor always wants a conviction.
    pub fn prosecutor(prior_guilty: f64) -> DecisionProblem {
        DecisionProblem::new(
            labels(&["innocent", "guilty"]),
            Belief::binary(prior_guilty).expect("valid prior"),
            ActionModel::Finite {
                actions: labels(&["acquit", "convict"]),
                receiver_u: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
                sender_v: vec![vec![0.0, 1.0], vec![0.0, 1.0]],
            },
        )
        .expect("valid problem")
    }

    /// Two states, two actions, both players get `1` for matching the state; matching
    /// `w1` pays `w1_payoff`.
    pub fn matching(prior_w1: f64, w1_payoff: f64) -> DecisionProblem {
        let u = vec![vec![1.0, 0.0], vec![0.0, w1_payoff]];
        DecisionProblem::new(
            labels(&["w0", "w1"]),
            Belief::binary(prior_w1).expect("valid prior"),
            ActionModel::Finite {
                actions: labels(&["a0", "a1"]),
                receiver_u: u.clone(),
                sender_v: u,
            },
        )
        .expect("valid problem")
    }

    /// States `{0, 1}` with quadratic loss and sender bias `b`.
    pub fn quadratic_cs(prior_w1: f64, b: f64) -> DecisionProblem {
        DecisionProblem::new(
            labels(&["0", "1"]),
            Belief::binary(prior_w1).expect("valid prior"),
            ActionModel::QuadraticCs {
                state_values: vec![0.0, 1.0],
                sender_bias: b,
            },
        )
        .expect("valid problem")
    }

    /// States `{0, 1}` on the line, receiver plays the mean, sender gets `beta * a`.
    pub fn linear(prior_w1: f64, beta: f64) -> DecisionProblem {
        DecisionProblem::new(
            labels(&["0", "1"]),
            Belief::binary(prior_w1).expect("valid prior"),
            ActionModel::MeanActionLinear {
                state_vectors: vec![vec![0.0], vec![1.0]],
                sender_beta: vec![beta],
            },
        )
        .expect("valid problem")
    }
}
