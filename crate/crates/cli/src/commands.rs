use std::io::Write;

use clap::ValueEnum;
use persuasion_core::concavify::{
    solve_transparent, solve_v, solve_v_alpha, solve_v_alpha_biased, sup_over_feasible,
    ConcavificationResult,
};
use persuasion_core::constructions::{
    cs_two_stage, find_gamma_bar, linear_repeated, pbpo_geometric, repeated_full_revelation,
    two_action_booster,
};
use persuasion_core::strategy::{merge_distribution, EngineLimits, TerminalOutcome};
use persuasion_core::{
    bayes_posterior, best_response, Action, ActionModel, Belief, DecisionProblem, Engine,
    Experiment, GridSpec, ProcedureState, StrategyNode,
};
use serde_json::{json, Value};

use crate::error::CliError;
use crate::schema::Scenario;

pub const LEAF_CAP_ENV: &str = "PERSUADE_LEAF_CAP";

pub fn limits_from_env() -> Result<EngineLimits, CliError> {
    let mut limits = EngineLimits::default();
    if let Ok(raw) = std::env::var(LEAF_CAP_ENV) {
        limits.max_leaves = raw.trim().parse().map_err(|_| {
            CliError::validation(format!(
                "{LEAF_CAP_ENV} must be a positive integer, got `{raw}`"
            ))
        })?;
    }
    Ok(limits)
}

fn check_states(exp: &Experiment, problem: &DecisionProblem) -> Result<(), CliError> {
    if exp.num_states() != problem.num_states() {
        return Err(CliError::validation(format!(
            "experiment has {} state rows, scenario has {} states",
            exp.num_states(),
            problem.num_states()
        )));
    }
    Ok(())
}

/// Prints one JSON line per period with the Bayesian and the biased belief.
pub fn update(
    scenario: &Scenario,
    experiments: &[Experiment],
    signals: &[String],
    out: &mut dyn Write,
) -> Result<(), CliError> {
    if experiments.len() != 1 && experiments.len() < signals.len() {
        return Err(CliError::validation(format!(
            "{} experiments given for {} signals",
            experiments.len(),
            signals.len()
        )));
    }
    for exp in experiments {
        check_states(exp, &scenario.problem)?;
    }
    let prior = scenario.problem.prior().clone();
    let mut bayes = prior.clone();
    let mut state = ProcedureState::start(scenario.procedure, scenario.alpha, prior);
    let line = |period: usize, signal: Option<&str>, bayes: &Belief, biased: &Belief| json!({ "period": period, "signal": signal, "bayesian": bayes, "biased": biased });
    let mut emit = |v: Value| writeln!(out, "{v}").map_err(CliError::io);
    emit(line(0, None, &bayes, &state.finalize()))?;
    for (t, signal) in signals.iter().enumerate() {
        let exp = if experiments.len() == 1 {
            &experiments[0]
        } else {
            &experiments[t]
        };
        bayes = bayes_posterior(&bayes, exp, signal)?;
        state = state.step(exp, signal)?;
        emit(line(t + 1, Some(signal), &bayes, &state.finalize()))?;
    }
    Ok(())
}

fn action_json(problem: &DecisionProblem, action: &Action) -> Value {
    match (action, problem.action_model()) {
        (Action::Discrete(i), ActionModel::Finite { actions, .. }) => json!(actions[*i]),
        (Action::Point(p), _) => json!(p),
        (Action::Discrete(i), _) => json!(i),
    }
}

fn outcome_json(problem: &DecisionProblem, o: &TerminalOutcome) -> Value {
    let action = best_response(problem, &o.receiver_belief);
    json!({
        "history": o.history,
        "probability": o.probability,
        "sender_belief": o.sender_belief,
        "receiver_belief": o.receiver_belief,
        "action": action_json(problem, &action),
        "sender_utility": problem.expected_sender_utility(&o.sender_belief, &action),
    })
}

fn distribution_json(points: &[(Belief, f64)]) -> Value {
    points
        .iter()
        .map(|(b, p)| json!({ "belief": b, "probability": p }))
        .collect()
}

pub fn eval(
    scenario: &Scenario,
    strategy: &StrategyNode,
    limits: EngineLimits,
) -> Result<Value, CliError> {
    let engine = Engine::new(
        &scenario.problem,
        scenario.alpha,
        scenario.procedure,
        scenario.sender,
    )?
    .with_limits(limits);
    let outcomes = engine.enumerate(strategy)?;
    let payoff = persuasion_core::strategy::payoff_of_outcomes(&scenario.problem, &outcomes);
    let distribution = merge_distribution(
        outcomes
            .iter()
            .map(|o| (o.receiver_belief.clone(), o.probability))
            .collect(),
    );
    Ok(json!({
        "alpha": scenario.alpha.value(),
        "procedure": scenario.procedure,
        "payoff": payoff,
        "outcomes": outcomes.iter().map(|o| outcome_json(&scenario.problem, o)).collect::<Vec<_>>(),
        "receiver_distribution": distribution_json(&distribution),
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Program {
    #[value(name = "V")]
    V,
    #[value(name = "V-alpha")]
    VAlpha,
    #[value(name = "V-alpha-biased")]
    VAlphaBiased,
    #[value(name = "transparent")]
    Transparent,
    #[value(name = "sup-F")]
    SupF,
}

impl Program {
    pub fn name(self) -> &'static str {
        match self {
            Program::V => "V",
            Program::VAlpha => "V-alpha",
            Program::VAlphaBiased => "V-alpha-biased",
            Program::Transparent => "transparent",
            Program::SupF => "sup-F",
        }
    }
}

fn solution_json(program: Program, r: &ConcavificationResult) -> Value {
    json!({
        "program": program.name(),
        "value": r.value,
        "support": distribution_json(&r.support),
        "certificate_gap": r.certificate_gap,
    })
}

pub fn solve(scenario: &Scenario, program: Program, grid: GridSpec) -> Result<Value, CliError> {
    let (p, a) = (&scenario.problem, scenario.alpha);
    let r = match program {
        Program::V => solve_v(p, grid)?,
        Program::VAlpha => solve_v_alpha(p, a, grid)?,
        Program::VAlphaBiased => solve_v_alpha_biased(p, a, grid)?,
        Program::Transparent => solve_transparent(p, a, grid)?,
        Program::SupF => {
            let (value, argmax) = sup_over_feasible(p, a, grid)?;
            return Ok(json!({ "program": program.name(), "value": value, "argmax": argmax }));
        }
    };
    Ok(solution_json(program, &r))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Construction {
    RepeatedFullRevelation,
    CsTwoStage,
    LinearTwoStage,
    Booster,
    PbpoGeometric,
}

#[derive(Debug, Clone)]
pub struct ConstructOptions {
    pub periods: Option<usize>,
    pub epsilon: f64,
    pub target: Option<Vec<f64>>,
    pub gamma: Option<f64>,
    pub grid: GridSpec,
}

pub fn construct(
    scenario: &Scenario,
    kind: Construction,
    opts: &ConstructOptions,
) -> Result<StrategyNode, CliError> {
    let (p, a) = (&scenario.problem, scenario.alpha);
    let node = match kind {
        Construction::RepeatedFullRevelation => {
            repeated_full_revelation(p, opts.periods.unwrap_or(2))?
        }
        Construction::CsTwoStage => cs_two_stage(p)?,
        Construction::LinearTwoStage => linear_repeated(p, opts.periods.unwrap_or(2))?,
        Construction::Booster => {
            let base = solve_transparent(p, a, opts.grid)?;
            two_action_booster(p, a, opts.epsilon, opts.periods.unwrap_or(40), &base)?
        }
        Construction::PbpoGeometric => {
            let raw = opts
                .target
                .clone()
                .ok_or_else(|| CliError::validation("--target is required for pbpo-geometric"))?;
            let target =
                Belief::new(raw).map_err(|e| CliError::validation(format!("--target: {e}")))?;
            let gamma = match opts.gamma {
                Some(g) => g,
                None => find_gamma_bar(p.prior(), &target, a)?,
            };
            pbpo_geometric(p, a, &target, gamma, opts.periods.unwrap_or(20))?
        }
    };
    Ok(node)
}
