//! Explicit sequential strategies that beat one-shot persuasion, and the Markov absorbing
//! process that drives a biased sender's payoff toward the unbiased concavification.

use nalgebra::{DMatrix, DVector};

use crate::belief::{
    apply_bias, experiment_from_posteriors, invert_bias, is_feasible_biased_posterior, Belief,
    BiasParam, Experiment, ProcedureState, UpdateProcedure, FEASIBILITY_TOL,
};
use crate::concavify::ConcavificationResult;
use crate::decision::{best_response, v_hat, Action, ActionModel, DecisionProblem};
use crate::error::{Error, Result};
use crate::strategy::{merge_distribution, StrategyNode};

/// Tolerance for affine independence and barycentric membership.
pub const GEOMETRY_TOL: f64 = 1e-9;
/// Upper cap on the stretch factor returned by [`find_gamma_bar`].
pub const GAMMA_CAP: f64 = 1e6;
const GAMMA_SHRINK: f64 = 1e-9;
const LEMMA1_TOL: f64 = 1e-9;

pub const DEFAULT_BOOST_PERIODS: usize = 40;
pub const DEFAULT_BOOST_EPSILON: f64 = 0.1;

/// Reveals `state` again for `remaining` more periods; off-state signals stop.
fn reveal_chain(reveal: &Experiment, state: usize, remaining: usize) -> StrategyNode {
    let mut node = StrategyNode::Stop;
    for _ in 0..remaining {
        let children = (0..reveal.num_signals())
            .map(|s| {
                if s == state {
                    node.clone()
                } else {
                    StrategyNode::Stop
                }
            })
            .collect();
        node = StrategyNode::Continue {
            experiment: reveal.clone(),
            children,
        };
    }
    node
}

/// Full revelation first, then `extra` further revelations on the branches picked by `repeat_on`.
fn reveal_then_repeat(
    problem: &DecisionProblem,
    repeat_on: impl Fn(usize) -> bool,
    extra: usize,
) -> StrategyNode {
    let reveal = Experiment::fully_revealing(problem.state_labels());
    let children = (0..problem.num_states())
        .map(|s| {
            if repeat_on(s) {
                reveal_chain(&reveal, s, extra)
            } else {
                StrategyNode::Stop
            }
        })
        .collect();
    StrategyNode::Continue {
        experiment: reveal,
        children,
    }
}

/// Full revelation in each of `periods` periods.
///
/// Signals that contradict an earlier revelation have probability zero and are mapped to
/// `Stop`, so the tree has `periods * |states|` nodes instead of `|states|^periods` leaves.
pub fn repeated_full_revelation(problem: &DecisionProblem, periods: usize) -> Result<StrategyNode> {
    if periods == 0 {
        return Err(Error::PreconditionViolated(
            "at least one period is required".into(),
        ));
    }
    Ok(reveal_then_repeat(problem, |_| true, periods - 1))
}

/// Full revelation, then a second revelation only when the extreme state in the direction of
/// the sender's bias comes up.
pub fn cs_two_stage(problem: &DecisionProblem) -> Result<StrategyNode> {
    let ActionModel::QuadraticCs {
        state_values,
        sender_bias,
    } = problem.action_model()
    else {
        return Err(Error::UnsupportedActionModel(problem.action_model().kind()));
    };
    let key = |s: usize| {
        if *sender_bias >= 0.0 {
            state_values[s]
        } else {
            -state_values[s]
        }
    };
    let extreme = (0..state_values.len())
        .max_by(|&a, &b| key(a).total_cmp(&key(b)))
        .expect("problem has states");
    Ok(reveal_then_repeat(problem, |s| s == extreme, 1))
}

/// The state maximizing `beta . w` among those with `beta . w > beta . E[w]`.
pub fn linear_target_state(problem: &DecisionProblem) -> Result<usize> {
    let ActionModel::MeanActionLinear {
        state_vectors,
        sender_beta,
    } = problem.action_model()
    else {
        return Err(Error::UnsupportedActionModel(problem.action_model().kind()));
    };
    let score: Vec<f64> = state_vectors
        .iter()
        .map(|w| w.iter().zip(sender_beta).map(|(x, b)| x * b).sum())
        .collect();
    let mean = problem.prior().expectation(&score);
    (0..score.len())
        .filter(|&s| score[s] > mean + GEOMETRY_TOL)
        .max_by(|&a, &b| score[a].total_cmp(&score[b]))
        .ok_or_else(|| {
            Error::DegenerateGeometry("no state improves on the prior mean along beta".into())
        })
}

/// Full revelation, then a second revelation only on the state that raises `beta . a`.
pub fn linear_two_stage(problem: &DecisionProblem) -> Result<StrategyNode> {
    linear_repeated(problem, 2)
}

/// Full revelation, then `periods - 1` further revelations on the target state only.
pub fn linear_repeated(problem: &DecisionProblem, periods: usize) -> Result<StrategyNode> {
    if periods == 0 {
        return Err(Error::PreconditionViolated(
            "at least one period is required".into(),
        ));
    }
    let target = linear_target_state(problem)?;
    Ok(reveal_then_repeat(problem, |s| s == target, periods - 1))
}

/// Signal labels of the drift experiment, favourable signal first.
pub const DRIFT_SIGNALS: [&str; 2] = ["xbar", "x"];

/// Binary experiment pointing at `target`: the favourable signal has probability `1 - eps`
/// in `target` and `eps` elsewhere.
pub fn drift_experiment(num_states: usize, target: usize, epsilon: f64) -> Result<Experiment> {
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(Error::PreconditionViolated(format!(
            "epsilon must lie in (0, 0.5), got {epsilon}"
        )));
    }
    let kernel = (0..num_states)
        .map(|s| {
            if s == target {
                vec![1.0 - epsilon, epsilon]
            } else {
                vec![epsilon, 1.0 - epsilon]
            }
        })
        .collect();
    Experiment::new(
        DRIFT_SIGNALS.iter().map(|s| s.to_string()).collect(),
        kernel,
    )
}

/// Receiver's probability of `target` along the all-favourable path of [`drift_experiment`]
/// under PbP-N, starting from `start` (entry 0) for `periods` periods.
pub fn drift_belief_path(alpha: BiasParam, epsilon: f64, start: f64, periods: usize) -> Vec<f64> {
    let a = alpha.value();
    let mut path = Vec::with_capacity(periods + 1);
    let mut mu = start;
    path.push(mu);
    for _ in 0..periods {
        let bayes = mu * (1.0 - epsilon) / (mu * (1.0 - epsilon) + (1.0 - mu) * epsilon);
        mu = a * mu + (1.0 - a) * bayes;
        path.push(mu);
    }
    path
}

struct TwoActions {
    preferred: usize,
    target_state: usize,
}

fn check_two_actions(problem: &DecisionProblem) -> Result<TwoActions> {
    let violated = |m: &str| Error::PreconditionViolated(m.to_string());
    let ActionModel::Finite {
        actions,
        receiver_u,
        sender_v,
    } = problem.action_model()
    else {
        return Err(violated("the action model must be finite"));
    };
    if actions.len() != 2 {
        return Err(violated("exactly two actions are required"));
    }
    if !problem.is_transparent() {
        return Err(violated(
            "the sender's utility must not depend on the state",
        ));
    }
    let (preferred, other) = match sender_v[0][0].total_cmp(&sender_v[0][1]) {
        std::cmp::Ordering::Greater => (0, 1),
        std::cmp::Ordering::Less => (1, 0),
        std::cmp::Ordering::Equal => {
            return Err(violated("the sender must strictly prefer one action"))
        }
    };
    if best_response(problem, problem.prior()) != Action::Discrete(other) {
        return Err(violated(
            "the receiver must choose the sender's less preferred action at the prior",
        ));
    }
    let gain = |s: usize| receiver_u[s][preferred] - receiver_u[s][other];
    let target_state = (0..problem.num_states())
        .filter(|&s| gain(s) > 0.0)
        .max_by(|&a, &b| gain(a).total_cmp(&gain(b)))
        .ok_or_else(|| violated("no belief makes the receiver choose the preferred action"))?;
    Ok(TwoActions {
        preferred,
        target_state,
    })
}

/// One-shot split realizing `base` (biased posteriors), followed on every branch where the
/// receiver still picks the less preferred action by up to `periods` drift experiments.
///
/// Each drift stage stops on the unfavourable signal and as soon as the receiver switches.
/// Receiver beliefs are tracked under PbP-N.
pub fn two_action_booster(
    problem: &DecisionProblem,
    alpha: BiasParam,
    epsilon: f64,
    periods: usize,
    base: &ConcavificationResult,
) -> Result<StrategyNode> {
    let plan = check_two_actions(problem)?;
    let drift = drift_experiment(problem.num_states(), plan.target_state, epsilon)?;
    let mu0 = problem.prior();
    let mut targets = Vec::new();
    for (biased, w) in base.support.iter().filter(|(_, w)| *w > 0.0) {
        if !is_feasible_biased_posterior(alpha, mu0, biased) {
            return Err(Error::PreconditionViolated(format!(
                "base posterior {biased} lies outside the feasible set"
            )));
        }
        targets.push((invert_bias(alpha, mu0, biased)?, *w));
    }
    let first = experiment_from_posteriors(mu0, &targets)
        .map_err(|e| Error::PreconditionViolated(format!("base is not Bayes plausible: {e}")))?;

    let start = ProcedureState::start(UpdateProcedure::PbpN, alpha, mu0.clone());
    let mut children = Vec::with_capacity(first.num_signals());
    for i in 0..first.num_signals() {
        let receiver = start.step_at(&first, i)?;
        children.push(boost_chain(problem, &plan, &drift, receiver, periods)?);
    }
    StrategyNode::continue_with(first, children)
}

fn boost_chain(
    problem: &DecisionProblem,
    plan: &TwoActions,
    drift: &Experiment,
    receiver: ProcedureState,
    remaining: usize,
) -> Result<StrategyNode> {
    let converted = |r: &ProcedureState| {
        best_response(problem, &r.finalize()) == Action::Discrete(plan.preferred)
    };
    // Build bottom-up along the single favourable path.
    let mut path = vec![receiver];
    while path.len() <= remaining && !converted(path.last().expect("non-empty")) {
        let next = path.last().expect("non-empty").step_at(drift, 0)?;
        path.push(next);
    }
    let mut node = StrategyNode::Stop;
    for _ in 1..path.len() {
        node = StrategyNode::Continue {
            experiment: drift.clone(),
            children: vec![node, StrategyNode::Stop],
        };
    }
    Ok(node)
}

/// Affinely independent interior beliefs with a precomputed barycentric solver.
#[derive(Debug, Clone)]
pub struct BarycentricFrame {
    support: Vec<Belief>,
    /// Pseudo-inverse of the support matrix stacked on a row of ones.
    inverse: DMatrix<f64>,
    min_coordinate: f64,
}

impl BarycentricFrame {
    pub fn new(support: Vec<Belief>) -> Result<Self> {
        let Some(first) = support.first() else {
            return Err(Error::DegenerateGeometry("empty support".into()));
        };
        let d = first.dim();
        for b in &support {
            b.check_dim(d)?;
        }
        let m = support.len();
        let a = DMatrix::from_fn(d + 1, m, |r, c| if r < d { support[c][r] } else { 1.0 });
        if a.rank(GEOMETRY_TOL) < m {
            return Err(Error::DegenerateGeometry(
                "support beliefs are affinely dependent".into(),
            ));
        }
        let min_coordinate = support
            .iter()
            .flat_map(|b| b.weights().iter().copied())
            .fold(f64::INFINITY, f64::min);
        if min_coordinate < GEOMETRY_TOL {
            return Err(Error::DegenerateGeometry(
                "support beliefs must be interior".into(),
            ));
        }
        let inverse = a
            .pseudo_inverse(1e-12)
            .map_err(|e| Error::DegenerateGeometry(e.to_string()))?;
        Ok(BarycentricFrame {
            support,
            inverse,
            min_coordinate,
        })
    }

    pub fn support(&self) -> &[Belief] {
        &self.support
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    /// Smallest coordinate over all support beliefs.
    pub fn min_coordinate(&self) -> f64 {
        self.min_coordinate
    }

    /// Barycentric coefficients of `mu`; fails with `NotInHull` outside the convex hull.
    pub fn coefficients(&self, mu: &Belief) -> Result<Vec<f64>> {
        let d = self.support[0].dim();
        mu.check_dim(d)?;
        let rhs = DVector::from_fn(d + 1, |r, _| if r < d { mu[r] } else { 1.0 });
        let beta = &self.inverse * &rhs;
        let recon = (0..d)
            .map(|r| {
                (0..self.len())
                    .map(|i| beta[i] * self.support[i][r])
                    .sum::<f64>()
                    - mu[r]
            })
            .fold(0.0f64, |acc, e| acc.max(e.abs()));
        if recon > GEOMETRY_TOL
            || beta
                .iter()
                .any(|&b| b < -GEOMETRY_TOL || b > 1.0 + GEOMETRY_TOL)
        {
            return Err(Error::NotInHull);
        }
        let clamped: Vec<f64> = beta.iter().map(|b| b.clamp(0.0, 1.0)).collect();
        let total: f64 = clamped.iter().sum();
        Ok(clamped.into_iter().map(|b| b / total).collect())
    }
}

/// One state of the absorbing chain: the receiver's current belief inside the frame's hull.
#[derive(Debug, Clone)]
pub struct MarkovPersuasionState<'a> {
    pub frame: &'a BarycentricFrame,
    pub alpha: BiasParam,
    pub current: Belief,
    pub absorbed: Option<usize>,
}

/// One branch of a chain transition.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub probability: f64,
    pub next: Belief,
    /// Support index reached, when the branch lands on the support.
    pub absorbed: Option<usize>,
}

impl<'a> MarkovPersuasionState<'a> {
    pub fn new(frame: &'a BarycentricFrame, alpha: BiasParam, current: Belief) -> Result<Self> {
        frame.coefficients(&current)?;
        Ok(MarkovPersuasionState {
            frame,
            alpha,
            current,
            absorbed: None,
        })
    }

    /// Support points reachable in one step: those in `F(current, alpha)`.
    pub fn reachable(&self) -> Vec<bool> {
        self.frame
            .support
            .iter()
            .map(|s| is_feasible_biased_posterior(self.alpha, &self.current, s))
            .collect()
    }

    pub fn transitions(&self) -> Result<Vec<Transition>> {
        if let Some(i) = self.absorbed {
            return Ok(vec![Transition {
                probability: 1.0,
                next: self.frame.support[i].clone(),
                absorbed: Some(i),
            }]);
        }
        let beta = self.frame.coefficients(&self.current)?;
        let reach = self.reachable();
        let a = self.alpha.value();
        let reached_mass: f64 = beta
            .iter()
            .zip(&reach)
            .filter(|(_, r)| **r)
            .map(|(b, _)| b)
            .sum();
        let z = 1.0 - a * reached_mass;
        let mut out = Vec::new();
        for (i, star) in self.frame.support.iter().enumerate() {
            if beta[i] <= 0.0 {
                continue;
            }
            let t = if reach[i] {
                Transition {
                    probability: (1.0 - a) * beta[i] / z,
                    next: star.clone(),
                    absorbed: Some(i),
                }
            } else {
                Transition {
                    probability: beta[i] / z,
                    next: apply_bias(self.alpha, &self.current, star),
                    absorbed: None,
                }
            };
            out.push(t);
        }
        check_lemma1(self.alpha, &self.current, &out)?;
        Ok(out)
    }
}

fn check_lemma1(alpha: BiasParam, mu: &Belief, branches: &[Transition]) -> Result<()> {
    let total: f64 = branches.iter().map(|t| t.probability).sum();
    let mut dev = (total - 1.0).abs();
    for s in 0..mu.dim() {
        let mean: f64 = branches.iter().map(|t| t.probability * t.next[s]).sum();
        dev = dev.max((mean - mu[s]).abs());
    }
    if dev > LEMMA1_TOL {
        return Err(Error::Invariant(format!(
            "transition does not average to the current belief ({dev:e})"
        )));
    }
    if let Some(t) = branches
        .iter()
        .find(|t| !is_feasible_biased_posterior(alpha, mu, &t.next))
    {
        return Err(Error::Invariant(format!(
            "transition target {} is not a feasible posterior",
            t.next
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarkovRun {
    /// Mass absorbed at each support point after the last period.
    pub absorbed: Vec<f64>,
    /// Mass still unabsorbed after the last period.
    pub residual: f64,
    /// Sender payoff if the process were stopped after period `n`, for `n = 0..=periods`.
    pub payoff_trace: Vec<f64>,
}

/// Exact forward recursion of the absorbing chain from `mu0` for `periods` periods.
///
/// Unabsorbed beliefs are merged at the engine's merge tolerance. The payoff counts each
/// absorbed support point and each unabsorbed belief at `v_hat` of that belief.
pub fn markov_absorbing_run(
    problem: &DecisionProblem,
    frame: &BarycentricFrame,
    alpha: BiasParam,
    target_weights: &[f64],
    mu0: &Belief,
    periods: usize,
) -> Result<MarkovRun> {
    let beta0 = frame.coefficients(mu0)?;
    if target_weights.len() != frame.len() {
        return Err(Error::DimensionMismatch {
            expected: frame.len(),
            found: target_weights.len(),
        });
    }
    let mismatch = beta0
        .iter()
        .zip(target_weights)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    if mismatch > GEOMETRY_TOL {
        return Err(Error::WeightMismatch(mismatch));
    }
    let values: Vec<f64> = frame.support.iter().map(|s| v_hat(problem, s)).collect();
    let mut absorbed = vec![0.0; frame.len()];
    let mut open = vec![(mu0.clone(), 1.0)];
    let payoff = |absorbed: &[f64], open: &[(Belief, f64)]| -> f64 {
        absorbed
            .iter()
            .zip(&values)
            .map(|(m, v)| m * v)
            .sum::<f64>()
            + open.iter().map(|(b, m)| m * v_hat(problem, b)).sum::<f64>()
    };
    let mut trace = vec![payoff(&absorbed, &open)];
    for _ in 0..periods {
        let mut next = Vec::new();
        for (mu, mass) in &open {
            let state = MarkovPersuasionState {
                frame,
                alpha,
                current: mu.clone(),
                absorbed: None,
            };
            for t in state.transitions()? {
                match t.absorbed {
                    Some(i) => absorbed[i] += mass * t.probability,
                    None => next.push((t.next, mass * t.probability)),
                }
            }
        }
        open = merge_distribution(next);
        trace.push(payoff(&absorbed, &open));
    }
    let residual = open.iter().map(|(_, m)| m).sum();
    Ok(MarkovRun {
        absorbed,
        residual,
        payoff_trace: trace,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbsorptionBound {
    /// Smallest support coordinate.
    pub c: f64,
    pub k_bar: u32,
    pub delta_bar: f64,
    /// Upper bound on the unabsorbed mass after the given number of periods.
    pub bound: f64,
}

/// Geometric bound on the mass the chain leaves unabsorbed after `periods` periods.
pub fn absorption_bound(
    frame: &BarycentricFrame,
    alpha: BiasParam,
    periods: usize,
) -> AbsorptionBound {
    let a = alpha.value();
    let c = frame.min_coordinate();
    let mut k: u32 = 1;
    while a.powi(k as i32) / (1.0 - a + a.powi(k as i32)) >= c {
        k += 1;
    }
    let delta_bar = ((1.0 - a) / frame.len() as f64).powi(k as i32);
    let bound = (1.0 - delta_bar).powi((periods / k as usize) as i32);
    AbsorptionBound {
        c,
        k_bar: k,
        delta_bar,
        bound,
    }
}

/// Largest admissible stretch before the safety shrink, see [`find_gamma_bar`].
pub fn max_gamma(mu0: &Belief, target: &Belief, alpha: BiasParam) -> Result<f64> {
    target.check_dim(mu0.dim())?;
    if !is_feasible_biased_posterior(alpha, mu0, target) {
        return Err(Error::TargetInfeasible);
    }
    let a = alpha.value();
    let slack = (0..mu0.dim())
        .filter(|&s| target[s] > mu0[s])
        .map(|s| (1.0 - a) * mu0[s] / (target[s] - mu0[s]))
        .fold(f64::INFINITY, f64::min);
    Ok((1.0 + slack).min(GAMMA_CAP))
}

/// The stretch `gamma > 1` keeping `gamma * mu0 + (1 - gamma) * target` in `F(mu0, alpha)`,
/// taken maximal and then pulled strictly inside.
pub fn find_gamma_bar(mu0: &Belief, target: &Belief, alpha: BiasParam) -> Result<f64> {
    let g = max_gamma(mu0, target, alpha)?;
    Ok(1.0 + (g - 1.0) * (1.0 - GAMMA_SHRINK))
}

/// Split parameters of the geometric PbP-O scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometricPlan {
    pub target: Belief,
    /// The belief the receiver is parked at between attempts.
    pub fallback: Belief,
    /// Probability of the target in the first period.
    pub t1: f64,
    /// Probability of the target in every later period.
    pub t2: f64,
}

impl GeometricPlan {
    pub fn new(
        problem: &DecisionProblem,
        alpha: BiasParam,
        target: &Belief,
        gamma: f64,
    ) -> Result<Self> {
        let mu0 = problem.prior();
        target.check_dim(mu0.dim())?;
        if !is_feasible_biased_posterior(alpha, mu0, target) {
            return Err(Error::TargetInfeasible);
        }
        if !(gamma > 1.0) || !gamma.is_finite() {
            return Err(Error::GammaOutOfRange(gamma));
        }
        let raw: Vec<f64> = (0..mu0.dim())
            .map(|s| gamma * mu0[s] + (1.0 - gamma) * target[s])
            .collect();
        if raw.iter().any(|&x| x < -FEASIBILITY_TOL) {
            return Err(Error::GammaOutOfRange(gamma));
        }
        let fallback = Belief::new(raw).map_err(|_| Error::GammaOutOfRange(gamma))?;
        if !is_feasible_biased_posterior(alpha, mu0, &fallback) {
            return Err(Error::GammaOutOfRange(gamma));
        }
        let t1 = (gamma - 1.0) / gamma;
        Ok(GeometricPlan {
            target: target.clone(),
            fallback,
            t1,
            t2: alpha.value() * t1,
        })
    }

    /// Coordinatewise residuals of the first-period and later-period averaging identities.
    pub fn residuals(&self, mu0: &Belief, alpha: BiasParam) -> (f64, f64) {
        let a = alpha.value();
        let mut r1 = 0.0f64;
        let mut r2 = 0.0f64;
        for s in 0..mu0.dim() {
            let first = self.t1 * self.target[s] + (1.0 - self.t1) * self.fallback[s];
            r1 = r1.max((first - mu0[s]).abs());
            let later = self.t2 * self.target[s] + (1.0 - self.t2) * self.fallback[s];
            r2 = r2.max((later - (a * mu0[s] + (1.0 - a) * self.fallback[s])).abs());
        }
        (r1, r2)
    }

    /// Probability that the target has not been reached after `periods` periods.
    pub fn miss_probability(&self, periods: usize) -> f64 {
        if periods == 0 {
            return 1.0;
        }
        (1.0 - self.t1) * (1.0 - self.t2).powi(periods as i32 - 1)
    }

    /// Closed-form payoff of the scheme over `periods` periods.
    pub fn payoff(&self, problem: &DecisionProblem, periods: usize) -> f64 {
        if periods == 0 {
            return v_hat(problem, problem.prior());
        }
        let miss = self.miss_probability(periods);
        (1.0 - miss) * v_hat(problem, &self.target) + miss * v_hat(problem, &self.fallback)
    }
}

/// Repeated attempts at a biased posterior `target` for a biased sender under PbP-O.
///
/// Every period splits the receiver between `target` (stop) and a fixed fallback belief from
/// which the next attempt starts.
pub fn pbpo_geometric(
    problem: &DecisionProblem,
    alpha: BiasParam,
    target: &Belief,
    gamma_bar: f64,
    periods: usize,
) -> Result<StrategyNode> {
    let mu0 = problem.prior();
    target.check_dim(mu0.dim())?;
    if !is_feasible_biased_posterior(alpha, mu0, target) {
        return Err(Error::TargetInfeasible);
    }
    if periods == 0 || target.approx_eq(mu0, 1e-12) {
        return Ok(StrategyNode::Stop);
    }
    let plan = GeometricPlan::new(problem, alpha, target, gamma_bar)?;
    let hit = invert_bias(alpha, mu0, &plan.target)?;
    let miss = invert_bias(alpha, mu0, &plan.fallback)?;
    let first = experiment_from_posteriors(
        mu0,
        &[(hit.clone(), plan.t1), (miss.clone(), 1.0 - plan.t1)],
    )?;
    let later =
        experiment_from_posteriors(&plan.fallback, &[(hit, plan.t2), (miss, 1.0 - plan.t2)])?;
    let mut node = StrategyNode::Stop;
    for _ in 1..periods {
        node = StrategyNode::continue_with(later.clone(), vec![StrategyNode::Stop, node])?;
    }
    StrategyNode::continue_with(first, vec![StrategyNode::Stop, node])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decision::library::{linear, matching, prosecutor, quadratic_cs};
    use crate::strategy::{Engine, SenderModel};

    fn a(x: f64) -> BiasParam {
        BiasParam::new(x).unwrap()
    }

    fn b(p: f64) -> Belief {
        Belief::binary(p).unwrap()
    }

    fn payoff(
        p: &DecisionProblem,
        alpha: f64,
        proc_: UpdateProcedure,
        s: SenderModel,
        st: &StrategyNode,
    ) -> f64 {
        Engine::new(p, a(alpha), proc_, s)
            .unwrap()
            .sender_expected_payoff(st)
            .unwrap()
    }

    #[test]
    fn repeated_revelation_beliefs() {
        let p = matching(0.5, 1.0);
        let st = repeated_full_revelation(&p, 2).unwrap();
        let e = Engine::new(&p, a(0.5), UpdateProcedure::PbpN, SenderModel::Bayesian).unwrap();
        let out = e.enumerate(&st).unwrap();
        assert_eq!(out.len(), 2);
        assert!((out[0].receiver_belief[0] - 0.875).abs() < 1e-12);
        let st1 = repeated_full_revelation(&p, 1).unwrap();
        let out = e.enumerate(&st1).unwrap();
        assert!((out[0].receiver_belief[0] - 0.75).abs() < 1e-12);
        assert!(repeated_full_revelation(&p, 0).is_err());
    }

    #[test]
    fn repeated_revelation_approaches_full_information() {
        let p = matching(0.3, 2.0);
        let st = repeated_full_revelation(&p, 20).unwrap();
        let v = payoff(&p, 0.5, UpdateProcedure::PbpN, SenderModel::Bayesian, &st);
        let full = crate::decision::full_information_payoff(&p);
        assert!((v - full).abs() < 1e-6);
    }

    #[test]
    fn cs_two_stage_payoff() {
        let p = quadratic_cs(0.5, 0.1);
        let st = cs_two_stage(&p).unwrap();
        let v = payoff(&p, 0.5, UpdateProcedure::PbpN, SenderModel::Bayesian, &st);
        assert!((v + 0.0365625).abs() < 1e-12);
        let neg = quadratic_cs(0.5, -0.1);
        let st = cs_two_stage(&neg).unwrap();
        let v = payoff(&neg, 0.5, UpdateProcedure::PbpN, SenderModel::Bayesian, &st);
        assert!((v + 0.0365625).abs() < 1e-12);
        assert!(cs_two_stage(&prosecutor(0.3)).is_err());
    }

    #[test]
    fn linear_two_stage_payoffs() {
        let p = linear(0.5, 1.0);
        let st = linear_two_stage(&p).unwrap();
        assert!(
            (payoff(&p, 0.5, UpdateProcedure::PbpN, SenderModel::Bayesian, &st) - 0.5625).abs()
                < 1e-12
        );
        assert!(
            (payoff(&p, 0.0, UpdateProcedure::PbpN, SenderModel::Bayesian, &st) - 0.5).abs()
                < 1e-12
        );
        let m = linear(0.5, -1.0);
        assert_eq!(linear_target_state(&m).unwrap(), 0);
        let st = linear_two_stage(&m).unwrap();
        assert!(payoff(&m, 0.5, UpdateProcedure::PbpN, SenderModel::Bayesian, &st) > -0.5 + 1e-6);
        let long = linear_repeated(&p, 25).unwrap();
        let v = payoff(&p, 0.5, UpdateProcedure::PbpN, SenderModel::Bayesian, &long);
        assert!((v - 0.625).abs() < 1e-6);
    }

    #[test]
    fn drift_path_increases() {
        let path = drift_belief_path(a(0.5), 0.1, 0.15, 40);
        assert!(path.windows(2).all(|w| w[1] > w[0]));
        assert!((path[1] - (0.075 + 0.5 * 0.135 / 0.22)).abs() < 1e-15);
    }

    fn prosecutor_base() -> ConcavificationResult {
        ConcavificationResult {
            value: 3.0 / 7.0,
            support: vec![(b(0.15), 4.0 / 7.0), (b(0.5), 3.0 / 7.0)],
            certificate_gap: 0.0,
        }
    }

    #[test]
    fn booster_gains() {
        let p = prosecutor(0.3);
        let base = prosecutor_base();
        let none = two_action_booster(&p, a(0.5), 0.1, 0, &base).unwrap();
        let v0 = payoff(&p, 0.5, UpdateProcedure::PbpN, SenderModel::Bayesian, &none);
        assert!((v0 - 3.0 / 7.0).abs() < 1e-12);
        let st = two_action_booster(&p, a(0.5), 0.1, 40, &base).unwrap();
        let v = payoff(&p, 0.5, UpdateProcedure::PbpN, SenderModel::Bayesian, &st);
        assert!(v > 3.0 / 7.0 + 1e-4, "{v}");
        assert!(st.leaf_count() < 20);
    }

    #[test]
    fn booster_preconditions() {
        let base = prosecutor_base();
        let high = prosecutor(0.7);
        assert!(matches!(
            two_action_booster(&high, a(0.5), 0.1, 5, &base),
            Err(Error::PreconditionViolated(_))
        ));
        let p = prosecutor(0.3);
        assert!(two_action_booster(&p, a(0.5), 0.6, 5, &base).is_err());
        assert!(two_action_booster(&quadratic_cs(0.5, 0.1), a(0.5), 0.1, 5, &base).is_err());
    }

    fn frame() -> BarycentricFrame {
        BarycentricFrame::new(vec![b(0.05), b(0.5)]).unwrap()
    }

    #[test]
    fn frame_validation() {
        assert!(BarycentricFrame::new(vec![b(0.0), b(0.5)]).is_err());
        assert!(BarycentricFrame::new(vec![b(0.2), b(0.2)]).is_err());
        let f = frame();
        let beta = f.coefficients(&b(0.3)).unwrap();
        assert!((beta[0] - 4.0 / 9.0).abs() < 1e-12 && (beta[1] - 5.0 / 9.0).abs() < 1e-12);
        assert_eq!(f.coefficients(&b(0.7)), Err(Error::NotInHull));
    }

    #[test]
    fn markov_run_converges() {
        let p = prosecutor(0.3);
        let f = frame();
        let w = [4.0 / 9.0, 5.0 / 9.0];
        let run = markov_absorbing_run(&p, &f, a(0.5), &w, &b(0.3), 200).unwrap();
        assert!(run.residual < 1e-12);
        assert!((run.absorbed[0] - w[0]).abs() < 1e-9 && (run.absorbed[1] - w[1]).abs() < 1e-9);
        assert!((run.payoff_trace.last().unwrap() - 5.0 / 9.0).abs() < 1e-9);
        let zero = markov_absorbing_run(&p, &f, BiasParam::ZERO, &w, &b(0.3), 1).unwrap();
        assert!((zero.absorbed[1] - w[1]).abs() < 1e-12 && zero.residual < 1e-15);
        assert!(matches!(
            markov_absorbing_run(&p, &f, a(0.5), &[0.5, 0.5], &b(0.3), 10),
            Err(Error::WeightMismatch(_))
        ));
    }

    #[test]
    fn absorption_bound_values() {
        let bound = absorption_bound(&frame(), a(0.5), 200);
        assert_eq!(bound.k_bar, 6);
        assert!((bound.delta_bar - 0.25f64.powi(6)).abs() < 1e-15);
        assert!((bound.bound - (1.0 - 0.25f64.powi(6)).powi(33)).abs() < 1e-15);
    }

    #[test]
    fn gamma_examples() {
        assert!((max_gamma(&b(0.3), &b(0.5), a(0.5)).unwrap() - 1.75).abs() < 1e-12);
        let g = find_gamma_bar(&b(0.3), &b(0.5), a(0.5)).unwrap();
        assert!(g < 1.75 && g > 1.75 - 1e-8);
        assert_eq!(max_gamma(&b(0.3), &b(0.3), a(0.5)).unwrap(), GAMMA_CAP);
        assert!((max_gamma(&b(0.3), &b(0.5), BiasParam::ZERO).unwrap() - 2.5).abs() < 1e-12);
        assert_eq!(
            find_gamma_bar(&b(0.3), &b(0.1), a(0.5)),
            Err(Error::TargetInfeasible)
        );
    }

    #[test]
    fn geometric_scheme() {
        let p = prosecutor(0.3);
        let plan = GeometricPlan::new(&p, a(0.5), &b(0.5), 1.75).unwrap();
        assert!((plan.fallback[1] - 0.15).abs() < 1e-12);
        assert!((plan.t1 - 3.0 / 7.0).abs() < 1e-15 && (plan.t2 - 3.0 / 14.0).abs() < 1e-15);
        let (r1, r2) = plan.residuals(p.prior(), a(0.5));
        assert!(r1 <= 1e-12 && r2 <= 1e-12);
        for n in 1..=10 {
            let st = pbpo_geometric(&p, a(0.5), &b(0.5), 1.75, n).unwrap();
            let v = payoff(
                &p,
                0.5,
                UpdateProcedure::PbpO,
                SenderModel::BiasedSameAsReceiver,
                &st,
            );
            assert!((v - plan.payoff(&p, n)).abs() < 1e-9);
        }
        assert_eq!(
            pbpo_geometric(&p, a(0.5), &b(0.3), 1.75, 5).unwrap(),
            StrategyNode::Stop
        );
        assert_eq!(
            pbpo_geometric(&p, a(0.5), &b(0.5), 3.0, 5),
            Err(Error::GammaOutOfRange(3.0))
        );
        assert_eq!(
            pbpo_geometric(&p, a(0.5), &b(0.7), 1.5, 5),
            Err(Error::TargetInfeasible)
        );
    }
}
