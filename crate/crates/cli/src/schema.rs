//! JSON file formats for scenarios and strategies.

use std::collections::BTreeMap;
use std::path::Path;

use persuasion_core::{
    ActionModel, Belief, BiasParam, DecisionProblem, Experiment, SenderModel, StrategyNode,
    UpdateProcedure,
};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub states: Vec<String>,
    pub prior: Vec<f64>,
    pub alpha: f64,
    pub procedure: UpdateProcedure,
    pub sender_model: SenderModelName,
    pub action_model: ActionModelFile,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SenderModelName {
    Bayesian,
    Biased,
}

impl From<SenderModelName> for SenderModel {
    fn from(s: SenderModelName) -> Self {
        match s {
            SenderModelName::Bayesian => SenderModel::Bayesian,
            SenderModelName::Biased => SenderModel::BiasedSameAsReceiver,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ActionModelFile {
    Finite {
        actions: Vec<String>,
        receiver_u: Vec<Vec<f64>>,
        sender_v: Vec<Vec<f64>>,
    },
    QuadraticCs {
        state_values: Vec<f64>,
        sender_bias: f64,
    },
    MeanActionLinear {
        state_vectors: Vec<Vec<f64>>,
        sender_beta: Vec<f64>,
    },
}

impl From<ActionModelFile> for ActionModel {
    fn from(m: ActionModelFile) -> Self {
        match m {
            ActionModelFile::Finite {
                actions,
                receiver_u,
                sender_v,
            } => ActionModel::Finite {
                actions,
                receiver_u,
                sender_v,
            },
            ActionModelFile::QuadraticCs {
                state_values,
                sender_bias,
            } => ActionModel::QuadraticCs {
                state_values,
                sender_bias,
            },
            ActionModelFile::MeanActionLinear {
                state_vectors,
                sender_beta,
            } => ActionModel::MeanActionLinear {
                state_vectors,
                sender_beta,
            },
        }
    }
}

/// A validated scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub problem: DecisionProblem,
    pub alpha: BiasParam,
    pub procedure: UpdateProcedure,
    pub sender: SenderModel,
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let inner = e.inner();
            CliError::validation(format!(
                "scenario field `{}` (line {}, column {}): {inner}",
                e.path(),
                inner.line(),
                inner.column()
            ))
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        Self::parse(&read(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<Scenario, CliError> {
        let field = |name: &str, e: persuasion_core::Error| {
            CliError::validation(format!("scenario field `{name}`: {e}"))
        };
        let prior = Belief::new(self.prior.clone()).map_err(|e| field("prior", e))?;
        let alpha = BiasParam::new(self.alpha).map_err(|e| field("alpha", e))?;
        let problem =
            DecisionProblem::new(self.states.clone(), prior, self.action_model.clone().into())
                .map_err(|e| field("action_model", e))?;
        Ok(Scenario {
            problem,
            alpha,
            procedure: self.procedure,
            sender: self.sender_model.into(),
        })
    }
}

pub fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::validation(format!("cannot read {}: {e}", path.display())))
}

/// One experiment, or a list with one experiment per period.
pub fn parse_experiments(text: &str) -> Result<Vec<Experiment>, CliError> {
    let value: Value = serde_json::from_str(text)
        .map_err(|e| CliError::validation(format!("experiment file: {e}")))?;
    let one = |v: Value, at: String| {
        serde_json::from_value::<Experiment>(v)
            .map_err(|e| CliError::validation(format!("experiment {at}: {e}")))
    };
    match value {
        Value::Array(items) => items
            .into_iter()
            .enumerate()
            .map(|(i, v)| one(v, format!("[{i}]")))
            .collect(),
        v => Ok(vec![one(v, String::new())?]),
    }
}

pub fn parse_strategy(text: &str) -> Result<StrategyNode, CliError> {
    let value: Value = serde_json::from_str(text)
        .map_err(|e| CliError::validation(format!("strategy file: {e}")))?;
    strategy_from_value(&value, "$")
}

fn strategy_from_value(value: &Value, path: &str) -> Result<StrategyNode, CliError> {
    let err = |m: String| CliError::validation(format!("strategy node {path}: {m}"));
    let Value::Object(obj) = value else {
        return Err(err("expected an object".into()));
    };
    if let Some(stop) = obj.get("stop") {
        if obj.len() != 1 || stop != &Value::Bool(true) {
            return Err(err("a stop node must be exactly {\"stop\": true}".into()));
        }
        return Ok(StrategyNode::Stop);
    }
    if let Some(key) = obj.keys().find(|k| *k != "experiment" && *k != "children") {
        return Err(err(format!("unknown field `{key}`")));
    }
    let experiment: Experiment = serde_json::from_value(
        obj.get("experiment")
            .cloned()
            .ok_or_else(|| err("missing `experiment`".into()))?,
    )
    .map_err(|e| err(format!("experiment: {e}")))?;
    let Some(Value::Object(children)) = obj.get("children") else {
        return Err(err("missing `children` object".into()));
    };
    let mut map = BTreeMap::new();
    for (signal, child) in children {
        map.insert(
            signal.clone(),
            strategy_from_value(child, &format!("{path}.{signal}"))?,
        );
    }
    StrategyNode::from_children_map(experiment, map).map_err(|e| err(e.to_string()))
}

pub fn strategy_to_value(node: &StrategyNode) -> Value {
    match node {
        StrategyNode::Stop => json!({ "stop": true }),
        StrategyNode::Continue {
            experiment,
            children,
        } => {
            let mut map = Map::new();
            for (signal, child) in experiment.signals().iter().zip(children) {
                map.insert(signal.clone(), strategy_to_value(child));
            }
            json!({ "experiment": experiment, "children": map })
        }
    }
}
