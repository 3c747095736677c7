//! Beliefs on the probability simplex, experiments, Bayes' rule and the
//! conservative-Bayesian distortion `D_alpha(mu; anchor) = alpha * anchor + (1 - alpha) * mu`.
//!
//! All types here are immutable values; every update returns a fresh value.

use std::fmt;
use std::ops::Index;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coordinates must sum to one within this tolerance after construction.
pub const NORMALIZATION_TOL: f64 = 1e-12;
/// Inputs whose sum deviates from one by less than this are renormalized; beyond it they are rejected.
pub const RENORMALIZE_TOL: f64 = 1e-9;
/// Tolerance for the weak inequality `mu' >= alpha * mu0`.
pub const FEASIBILITY_TOL: f64 = 1e-12;
/// Tolerance for Bayes plausibility of a target posterior distribution.
pub const PLAUSIBILITY_TOL: f64 = 1e-9;

/// A probability vector over the finite state set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Belief(Vec<f64>);

impl Belief {
    /// Validates and normalizes `weights`.
    ///
    /// Coordinates slightly below zero (within [`FEASIBILITY_TOL`]) are clamped, and a sum within
    /// [`RENORMALIZE_TOL`] of one is rescaled to one. Anything further off is rejected.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidBelief("belief has no coordinates".into()));
        }
        let mut weights = weights;
        for (i, w) in weights.iter_mut().enumerate() {
            if !w.is_finite() {
                return Err(Error::InvalidBelief(format!(
                    "coordinate {i} is not finite"
                )));
            }
            if *w < -FEASIBILITY_TOL {
                return Err(Error::InvalidBelief(format!(
                    "coordinate {i} is negative ({w})"
                )));
            }
            if *w < 0.0 {
                *w = 0.0;
            }
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > RENORMALIZE_TOL {
            return Err(Error::InvalidBelief(format!(
                "coordinates sum to {sum}, not 1"
            )));
        }
        weights.iter_mut().for_each(|w| *w /= sum);
        Ok(Belief(weights))
    }

    /// Rescales an arithmetically produced vector whose sum has drifted.
    /// Used internally where the inputs are already known to lie on the simplex.
    pub(crate) fn renormalized(mut weights: Vec<f64>) -> Self {
        for w in weights.iter_mut() {
            if *w < 0.0 {
                *w = 0.0;
            }
        }
        let sum: f64 = weights.iter().sum();
        debug_assert!(sum > 0.0, "renormalizing a zero vector");
        weights.iter_mut().for_each(|w| *w /= sum);
        Belief(weights)
    }

    pub fn uniform(n: usize) -> Self {
        assert!(n > 0, "uniform belief over zero states");
        Belief(vec![1.0 / n as f64; n])
    }

    /// The point mass `delta_state`.
    pub fn vertex(n: usize, state: usize) -> Self {
        assert!(state < n, "vertex index out of range");
        let mut w = vec![0.0; n];
        w[state] = 1.0;
        Belief(w)
    }

    /// Two-state shorthand: the belief that puts `p` on the second state.
    pub fn binary(p: f64) -> Result<Self> {
        Belief::new(vec![1.0 - p, p])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn has_full_support(&self) -> bool {
        self.0.iter().all(|&w| w > 0.0)
    }

    /// `E_mu[f(state)]`.
    pub fn expectation(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.dim());
        self.0.iter().zip(values).map(|(w, v)| w * v).sum()
    }

    /// `t * self + (1 - t) * other`.
    pub fn mix(&self, t: f64, other: &Belief) -> Belief {
        assert_eq!(
            self.dim(),
            other.dim(),
            "mixing beliefs of different dimension"
        );
        Belief::renormalized(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| t * a + (1.0 - t) * b)
                .collect(),
        )
    }

    pub fn max_abs_diff(&self, other: &Belief) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn approx_eq(&self, other: &Belief, tol: f64) -> bool {
        self.dim() == other.dim() && self.max_abs_diff(other) <= tol
    }

    pub(crate) fn check_dim(&self, expected: usize) -> Result<()> {
        if self.dim() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: self.dim(),
            });
        }
        Ok(())
    }
}

impl TryFrom<Vec<f64>> for Belief {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Belief::new(v)
    }
}

impl From<Belief> for Vec<f64> {
    fn from(b: Belief) -> Vec<f64> {
        b.0
    }
}

impl Index<usize> for Belief {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl fmt::Display for Belief {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, w) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{w:.6}")?;
        }
        write!(f, ")")
    }
}

/// A state-conditional distribution over a finite, ordered set of signals.
///
/// `kernel[state][signal]` is `P(signal | state)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawExperiment", into = "RawExperiment")]
pub struct Experiment {
    signals: Vec<String>,
    kernel: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct RawExperiment {
    signals: Vec<String>,
    kernel: Vec<Vec<f64>>,
}

impl TryFrom<RawExperiment> for Experiment {
    type Error = Error;

    fn try_from(raw: RawExperiment) -> Result<Self> {
        Experiment::new(raw.signals, raw.kernel)
    }
}

impl From<Experiment> for RawExperiment {
    fn from(e: Experiment) -> Self {
        RawExperiment {
            signals: e.signals,
            kernel: e.kernel,
        }
    }
}

impl Experiment {
    pub fn new(signals: Vec<String>, kernel: Vec<Vec<f64>>) -> Result<Self> {
        if signals.is_empty() {
            return Err(Error::InvalidExperiment(
                "at least one signal is required".into(),
            ));
        }
        for (i, s) in signals.iter().enumerate() {
            if signals[..i].contains(s) {
                return Err(Error::InvalidExperiment(format!(
                    "duplicate signal label `{s}`"
                )));
            }
        }
        if kernel.is_empty() {
            return Err(Error::InvalidExperiment("kernel has no rows".into()));
        }
        let mut kernel = kernel;
        for (state, row) in kernel.iter_mut().enumerate() {
            if row.len() != signals.len() {
                return Err(Error::InvalidExperiment(format!(
                    "row {state} has {} entries for {} signals",
                    row.len(),
                    signals.len()
                )));
            }
            for p in row.iter_mut() {
                if !p.is_finite() || *p < -FEASIBILITY_TOL {
                    return Err(Error::InvalidExperiment(format!(
                        "row {state} has an invalid probability {p}"
                    )));
                }
                if *p < 0.0 {
                    *p = 0.0;
                }
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > RENORMALIZE_TOL {
                return Err(Error::InvalidExperiment(format!(
                    "row {state} sums to {sum}"
                )));
            }
            row.iter_mut().for_each(|p| *p /= sum);
        }
        Ok(Experiment { signals, kernel })
    }

    /// One signal per state, named after `labels`, each realized only in its own state.
    pub fn fully_revealing(labels: &[String]) -> Self {
        let n = labels.len();
        let kernel = (0..n)
            .map(|s| (0..n).map(|x| if s == x { 1.0 } else { 0.0 }).collect())
            .collect();
        Experiment {
            signals: labels.to_vec(),
            kernel,
        }
    }

    /// A single signal realized with certainty in every state.
    pub fn uninformative(num_states: usize, label: &str) -> Self {
        Experiment {
            signals: vec![label.to_string()],
            kernel: vec![vec![1.0]; num_states],
        }
    }

    /// Two states, signals `x0`/`x1`, each matching the state with probability `beta`.
    pub fn symmetric_binary(beta: f64) -> Result<Self> {
        Experiment::new(
            vec!["x0".into(), "x1".into()],
            vec![vec![beta, 1.0 - beta], vec![1.0 - beta, beta]],
        )
    }

    pub fn signals(&self) -> &[String] {
        &self.signals
    }

    pub fn kernel(&self) -> &[Vec<f64>] {
        &self.kernel
    }

    pub fn num_signals(&self) -> usize {
        self.signals.len()
    }

    pub fn num_states(&self) -> usize {
        self.kernel.len()
    }

    /// `P(signal | state)`.
    pub fn prob(&self, state: usize, signal: usize) -> f64 {
        self.kernel[state][signal]
    }

    pub fn signal_index(&self, label: &str) -> Result<usize> {
        self.signals
            .iter()
            .position(|s| s == label)
            .ok_or_else(|| Error::UnknownSignal(label.to_string()))
    }
}

/// The bias strength `alpha` in `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct BiasParam(f64);

impl BiasParam {
    pub const ZERO: BiasParam = BiasParam(0.0);

    pub fn new(alpha: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&alpha) {
            return Err(Error::InvalidAlpha(alpha));
        }
        Ok(BiasParam(alpha))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for BiasParam {
    type Error = Error;

    fn try_from(a: f64) -> Result<Self> {
        BiasParam::new(a)
    }
}

impl From<BiasParam> for f64 {
    fn from(a: BiasParam) -> f64 {
        a.0
    }
}

/// How a receiver folds a sequence of signals into a final belief.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum UpdateProcedure {
    /// Plain Bayes' rule.
    #[serde(rename = "bayes")]
    Bayes,
    /// Bias applied every period, anchored at the previous period's belief.
    #[serde(rename = "pbp-n")]
    PbpN,
    /// Bias applied every period, anchored at the original prior.
    #[serde(rename = "pbp-o")]
    PbpO,
    /// Bayesian throughout, bias applied once to the final posterior.
    #[serde(rename = "lp")]
    Lp,
}

impl UpdateProcedure {
    pub fn as_str(self) -> &'static str {
        match self {
            UpdateProcedure::Bayes => "bayes",
            UpdateProcedure::PbpN => "pbp-n",
            UpdateProcedure::PbpO => "pbp-o",
            UpdateProcedure::Lp => "lp",
        }
    }
}

impl FromStr for UpdateProcedure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bayes" => Ok(UpdateProcedure::Bayes),
            "pbp-n" => Ok(UpdateProcedure::PbpN),
            "pbp-o" => Ok(UpdateProcedure::PbpO),
            "lp" => Ok(UpdateProcedure::Lp),
            other => Err(Error::InvalidProblem(format!(
                "unknown update procedure `{other}`"
            ))),
        }
    }
}

impl fmt::Display for UpdateProcedure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Probability of each signal: `sum_state prior(state) * P(signal | state)`.
pub fn signal_marginal(prior: &Belief, exp: &Experiment) -> Result<Vec<f64>> {
    prior.check_dim(exp.num_states())?;
    let mut out = vec![0.0; exp.num_signals()];
    for (state, row) in exp.kernel.iter().enumerate() {
        let w = prior[state];
        for (acc, p) in out.iter_mut().zip(row) {
            *acc += w * p;
        }
    }
    Ok(out)
}

pub fn bayes_posterior(prior: &Belief, exp: &Experiment, signal: &str) -> Result<Belief> {
    let idx = exp.signal_index(signal)?;
    bayes_posterior_at(prior, exp, idx)
}

/// Bayes' rule for the signal at position `signal` of `exp`.
pub fn bayes_posterior_at(prior: &Belief, exp: &Experiment, signal: usize) -> Result<Belief> {
    prior.check_dim(exp.num_states())?;
    let joint: Vec<f64> = (0..prior.dim())
        .map(|s| prior[s] * exp.prob(s, signal))
        .collect();
    let marginal: f64 = joint.iter().sum();
    if !(marginal > 0.0) {
        return Err(Error::ZeroLikelihoodSignal(exp.signals[signal].clone()));
    }
    Ok(Belief(joint.into_iter().map(|j| j / marginal).collect()))
}

/// `alpha * anchor + (1 - alpha) * bayes`.
pub fn apply_bias(alpha: BiasParam, anchor: &Belief, bayes: &Belief) -> Belief {
    assert_eq!(
        anchor.dim(),
        bayes.dim(),
        "anchor and posterior differ in dimension"
    );
    let a = alpha.value();
    Belief::renormalized(
        anchor
            .0
            .iter()
            .zip(&bayes.0)
            .map(|(m0, m)| a * m0 + (1.0 - a) * m)
            .collect(),
    )
}

/// The unique Bayesian posterior `mu` with `apply_bias(alpha, anchor, mu) == biased`.
pub fn invert_bias(alpha: BiasParam, anchor: &Belief, biased: &Belief) -> Result<Belief> {
    biased.check_dim(anchor.dim())?;
    let a = alpha.value();
    let mut out = Vec::with_capacity(anchor.dim());
    for state in 0..anchor.dim() {
        let bound = a * anchor[state];
        let value = biased[state];
        if value < bound - FEASIBILITY_TOL {
            return Err(Error::InfeasibleBiasedPosterior {
                state,
                value,
                bound,
            });
        }
        out.push(((value - bound) / (1.0 - a)).max(0.0));
    }
    Ok(Belief::renormalized(out))
}

/// Whether `candidate` lies in `F(prior, alpha) = { mu : mu >= alpha * prior }`.
pub fn is_feasible_biased_posterior(alpha: BiasParam, prior: &Belief, candidate: &Belief) -> bool {
    prior.dim() == candidate.dim()
        && (0..prior.dim()).all(|s| candidate[s] >= alpha.value() * prior[s] - FEASIBILITY_TOL)
}

/// Builds the experiment whose signal `x_i` has probability `prob_i` and Bayesian posterior `mu_i`.
///
/// `P(x_i | state) = prob_i * mu_i(state) / prior(state)`. Zero-probability targets are dropped,
/// and the surviving signals are labelled `x0, x1, ...` in order.
pub fn experiment_from_posteriors(prior: &Belief, targets: &[(Belief, f64)]) -> Result<Experiment> {
    let n = prior.dim();
    if let Some(state) = (0..n).find(|&s| !(prior[s] > 0.0)) {
        return Err(Error::ZeroPriorState(state));
    }
    let mut kept = Vec::new();
    let mut total = 0.0;
    let mut mean = vec![0.0; n];
    for (mu, p) in targets {
        mu.check_dim(n)?;
        if !p.is_finite() || *p < 0.0 {
            return Err(Error::NotBayesPlausible(f64::NAN));
        }
        total += p;
        for s in 0..n {
            mean[s] += p * mu[s];
        }
        if *p > 0.0 {
            kept.push((mu, *p));
        }
    }
    let deviation = mean
        .iter()
        .zip(prior.weights())
        .map(|(m, p)| (m - p).abs())
        .fold((total - 1.0).abs(), f64::max);
    if deviation > PLAUSIBILITY_TOL {
        return Err(Error::NotBayesPlausible(deviation));
    }
    let signals = (0..kept.len()).map(|i| format!("x{i}")).collect();
    let kernel = (0..n)
        .map(|s| {
            let row: Vec<f64> = kept.iter().map(|(mu, p)| p * mu[s] / prior[s]).collect();
            let sum: f64 = row.iter().sum();
            row.into_iter().map(|x| x / sum).collect()
        })
        .collect();
    Experiment::new(signals, kernel)
}

/// Per-agent bookkeeping for one of the sequential updating procedures.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcedureState {
    procedure: UpdateProcedure,
    alpha: BiasParam,
    original_prior: Belief,
    current_biased: Belief,
    current_bayes: Option<Belief>,
}

impl ProcedureState {
    pub fn start(procedure: UpdateProcedure, alpha: BiasParam, prior: Belief) -> Self {
        let current_bayes = (procedure == UpdateProcedure::Lp).then(|| prior.clone());
        ProcedureState {
            procedure,
            alpha,
            current_biased: prior.clone(),
            original_prior: prior,
            current_bayes,
        }
    }

    pub fn procedure(&self) -> UpdateProcedure {
        self.procedure
    }

    pub fn alpha(&self) -> BiasParam {
        self.alpha
    }

    pub fn original_prior(&self) -> &Belief {
        &self.original_prior
    }

    /// The belief the agent currently holds (the original prior under LP until finalized).
    pub fn current_biased(&self) -> &Belief {
        &self.current_biased
    }

    /// Running Bayesian posterior; only tracked under LP.
    pub fn current_bayes(&self) -> Option<&Belief> {
        self.current_bayes.as_ref()
    }

    /// The prior that the next Bayes update conditions on.
    pub fn updating_prior(&self) -> &Belief {
        self.current_bayes.as_ref().unwrap_or(&self.current_biased)
    }

    pub fn step(&self, exp: &Experiment, signal: &str) -> Result<ProcedureState> {
        self.step_at(exp, exp.signal_index(signal)?)
    }

    pub fn step_at(&self, exp: &Experiment, signal: usize) -> Result<ProcedureState> {
        let mut next = self.clone();
        match self.procedure {
            UpdateProcedure::Bayes => {
                next.current_biased = bayes_posterior_at(&self.current_biased, exp, signal)?;
            }
            UpdateProcedure::PbpN => {
                let mu = bayes_posterior_at(&self.current_biased, exp, signal)?;
                next.current_biased = apply_bias(self.alpha, &self.current_biased, &mu);
            }
            UpdateProcedure::PbpO => {
                let mu = bayes_posterior_at(&self.current_biased, exp, signal)?;
                next.current_biased = apply_bias(self.alpha, &self.original_prior, &mu);
            }
            UpdateProcedure::Lp => {
                let bayes = self
                    .current_bayes
                    .as_ref()
                    .expect("LP tracks a Bayesian posterior");
                next.current_bayes = Some(bayes_posterior_at(bayes, exp, signal)?);
            }
        }
        Ok(next)
    }

    /// The belief the agent acts on if the process ends now.
    pub fn finalize(&self) -> Belief {
        match &self.current_bayes {
            Some(bayes) => apply_bias(self.alpha, &self.original_prior, bayes),
            None => self.current_biased.clone(),
        }
    }
}
