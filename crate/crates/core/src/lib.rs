//! Sequential persuasion of a receiver whose posterior is anchored toward a reference belief.

pub mod belief;
pub mod concavify;
pub mod constructions;
pub mod decision;
pub mod error;
pub mod grid;
mod lp;
pub mod strategy;

pub use belief::{
    apply_bias, bayes_posterior, invert_bias, is_feasible_biased_posterior, Belief, BiasParam,
    Experiment, ProcedureState, UpdateProcedure,
};
pub use concavify::{ConcavificationResult, GridSpec};
pub use decision::{best_response, v_hat, v_hat_alpha, Action, ActionModel, DecisionProblem};
pub use error::{Error, Result};
pub use strategy::{Engine, SenderModel, StrategyNode, TerminalOutcome};
