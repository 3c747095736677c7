//! Reproduction suites: named checks plus `(series, x, y)` rows for plotting.

use clap::ValueEnum;
use persuasion_core::concavify::{solve_transparent, solve_v_alpha};
use persuasion_core::constructions::{
    absorption_bound, cs_two_stage, drift_belief_path, linear_repeated, markov_absorbing_run,
    max_gamma, pbpo_geometric, two_action_booster, BarycentricFrame, GeometricPlan,
};
use persuasion_core::strategy::merge_distribution;
use persuasion_core::{Belief, BiasParam, Engine, GridSpec, StrategyNode};

use crate::error::CliError;
use crate::schema::{parse_strategy, Scenario, ScenarioFile};

pub const EXAMPLE1: &str = include_str!("../scenarios/example1.json");
pub const EXAMPLE1_STRATEGY: &str = include_str!("../scenarios/example1_strategy.json");
pub const EXAMPLE2: &str = include_str!("../scenarios/example2.json");
pub const EXAMPLE2_STRATEGY: &str = include_str!("../scenarios/example2_strategy.json");
pub const PROSECUTOR: &str = include_str!("../scenarios/prosecutor.json");
pub const PROSECUTOR_BIASED_PBPO: &str = include_str!("../scenarios/prosecutor_biased_pbpo.json");
pub const CS: &str = include_str!("../scenarios/cs.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Example1,
    Example2,
    Prop2,
    Prop4,
    Prop5,
    Prop6,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub checks: Vec<CheckResult>,
    pub rows: Vec<(String, f64, f64)>,
}

impl Report {
    fn check(&mut self, name: &str, passed: bool, detail: String) {
        self.checks.push(CheckResult {
            name: name.to_string(),
            passed,
            detail,
        });
    }

    fn close(&mut self, name: &str, got: f64, want: f64, tol: f64) {
        let passed = (got - want).abs() <= tol;
        self.check(
            name,
            passed,
            format!("got {got:.12}, expected {want:.12} (tol {tol:e})"),
        );
    }

    fn row(&mut self, series: &str, x: f64, y: f64) {
        self.rows.push((series.to_string(), x, y));
    }

    pub fn first_failure(&self) -> Option<&CheckResult> {
        self.checks.iter().find(|c| !c.passed)
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<(), CliError> {
        let mut out = csv::Writer::from_writer(w);
        let csv_err = |e: csv::Error| CliError::validation(format!("csv: {e}"));
        out.write_record(["series", "x", "y"]).map_err(csv_err)?;
        for (s, x, y) in &self.rows {
            out.write_record([s.clone(), x.to_string(), y.to_string()])
                .map_err(csv_err)?;
        }
        out.flush().map_err(CliError::io)
    }
}

fn bundled(text: &str) -> Scenario {
    ScenarioFile::parse(text)
        .and_then(|f| f.validate())
        .expect("bundled scenario is valid")
}

fn alpha(a: f64) -> BiasParam {
    BiasParam::new(a).expect("valid bias")
}

fn binary(p: f64) -> Belief {
    Belief::binary(p).expect("valid belief")
}

fn payoff(s: &Scenario, a: BiasParam, strategy: &StrategyNode) -> Result<f64, CliError> {
    Ok(Engine::new(&s.problem, a, s.procedure, s.sender)?.sender_expected_payoff(strategy)?)
}

pub fn run(suite: Suite) -> Result<Report, CliError> {
    let mut r = Report::default();
    match suite {
        Suite::Example1 => example1(&mut r)?,
        Suite::Example2 => example2(&mut r)?,
        Suite::Prop2 => prop2(&mut r)?,
        Suite::Prop4 => prop4(&mut r)?,
        Suite::Prop5 => prop5(&mut r)?,
        Suite::Prop6 => prop6(&mut r)?,
    }
    Ok(r)
}

fn example1(r: &mut Report) -> Result<(), CliError> {
    let s = bundled(EXAMPLE1);
    let strategy = parse_strategy(EXAMPLE1_STRATEGY)?;
    let outcomes = Engine::new(&s.problem, s.alpha, s.procedure, s.sender)?.enumerate(&strategy)?;
    let sender = merge_distribution(
        outcomes
            .iter()
            .map(|o| (o.sender_belief.clone(), o.probability))
            .collect(),
    );
    let receiver = merge_distribution(
        outcomes
            .iter()
            .map(|o| (o.receiver_belief.clone(), o.probability))
            .collect(),
    );
    let mut sender: Vec<(f64, f64)> = sender.iter().map(|(b, p)| (b[1], *p)).collect();
    let mut receiver: Vec<(f64, f64)> = receiver.iter().map(|(b, p)| (b[1], *p)).collect();
    sender.sort_by(|a, b| a.0.total_cmp(&b.0));
    receiver.sort_by(|a, b| a.0.total_cmp(&b.0));
    for (x, p) in &sender {
        r.row("sender", *x, *p);
    }
    for (x, p) in &receiver {
        r.row("receiver", *x, *p);
    }
    let want_s = [(0.1, 0.3125), (0.5, 0.375), (0.9, 0.3125)];
    let want_r = [
        (0.2708, 0.3125),
        (0.4911, 0.1875),
        (0.5089, 0.1875),
        (0.7292, 0.3125),
    ];
    r.check(
        "sender support size",
        sender.len() == 3,
        format!("{} points", sender.len()),
    );
    r.check(
        "receiver support size",
        receiver.len() == 4,
        format!("{} points", receiver.len()),
    );
    for (i, ((x, p), (wx, wp))) in sender.iter().zip(want_s).enumerate() {
        r.close(&format!("sender belief {i}"), *x, wx, 5e-5);
        r.close(&format!("sender mass {i}"), *p, wp, 5e-5);
    }
    for (i, ((x, p), (wx, wp))) in receiver.iter().zip(want_r).enumerate() {
        r.close(&format!("receiver belief {i}"), *x, wx, 5e-5);
        r.close(&format!("receiver mass {i}"), *p, wp, 5e-5);
    }
    Ok(())
}

fn example2(r: &mut Report) -> Result<(), CliError> {
    let s = bundled(EXAMPLE2);
    let two = payoff(&s, s.alpha, &parse_strategy(EXAMPLE2_STRATEGY)?)?;
    r.close("two-period payoff", two, 0.5625, 1e-12);
    let unbiased = payoff(&s, BiasParam::ZERO, &parse_strategy(EXAMPLE2_STRATEGY)?)?;
    r.close("two-period payoff without bias", unbiased, 0.5, 1e-12);
    let mut previous = f64::NEG_INFINITY;
    let mut increasing = true;
    let mut last = 0.0;
    for n in 1..=25 {
        last = payoff(&s, s.alpha, &linear_repeated(&s.problem, n)?)?;
        r.row("payoff", n as f64, last);
        increasing &= last >= previous;
        previous = last;
    }
    r.check(
        "payoff non-decreasing in horizon",
        increasing,
        format!("N = 25 payoff {last:.12}"),
    );
    r.close("25-period payoff", last, 0.625, 1e-6);
    Ok(())
}

fn prop2(r: &mut Report) -> Result<(), CliError> {
    let s = bundled(CS);
    let grid = GridSpec::new(200, true)?;
    let strategy = cs_two_stage(&s.problem)?;
    let seq = payoff(&s, s.alpha, &strategy)?;
    let one = solve_v_alpha(&s.problem, s.alpha, grid)?.value;
    r.close("two-stage payoff", seq, -0.0365625, 1e-9);
    r.close("one-shot value", one, -0.0725, 1e-6);
    r.check(
        "two-stage beats one-shot",
        seq > one + 1e-6,
        format!("{seq:.10} vs {one:.10}"),
    );
    for i in 1..10 {
        let a = alpha(i as f64 / 10.0);
        let seq = payoff(&s, a, &strategy)?;
        let one = solve_v_alpha(&s.problem, a, grid)?.value;
        r.row("two_stage", a.value(), seq);
        r.row("one_shot", a.value(), one);
        r.check(
            &format!("gain at alpha {}", a.value()),
            seq > one,
            format!("{seq:.8} vs {one:.8}"),
        );
    }
    Ok(())
}

fn prop4(r: &mut Report) -> Result<(), CliError> {
    let s = bundled(PROSECUTOR);
    let grid = GridSpec::new(200, true)?;
    let base = solve_transparent(&s.problem, s.alpha, grid)?;
    r.close("one-shot value", base.value, 3.0 / 7.0, 1e-9);
    let mut at40 = 0.0;
    for n in 0..=40 {
        let v = payoff(
            &s,
            s.alpha,
            &two_action_booster(&s.problem, s.alpha, 0.1, n, &base)?,
        )?;
        r.row("booster_payoff", n as f64, v);
        if n == 0 {
            r.close("no boost equals one-shot", v, 3.0 / 7.0, 1e-12);
        }
        at40 = v;
    }
    r.check(
        "boost gains at least 1e-4",
        at40 >= 3.0 / 7.0 + 1e-4,
        format!("payoff {at40:.8}"),
    );
    let path = drift_belief_path(s.alpha, 0.1, 0.15, 40);
    for (t, mu) in path.iter().enumerate() {
        r.row("drift_belief", t as f64, *mu);
    }
    let increasing = path.windows(2).all(|w| w[1] > w[0]);
    r.check(
        "drift path strictly increasing",
        increasing,
        format!("{:.4} -> {:.4}", path[0], path[40]),
    );
    Ok(())
}

fn prop5(r: &mut Report) -> Result<(), CliError> {
    let s = bundled(PROSECUTOR);
    let frame = BarycentricFrame::new(vec![binary(0.05), binary(0.5)])?;
    let mu0 = s.problem.prior().clone();
    let target = frame.coefficients(&mu0)?;
    let run = markov_absorbing_run(&s.problem, &frame, s.alpha, &target, &mu0, 200)?;
    for (n, v) in run.payoff_trace.iter().enumerate().take(21) {
        r.row("payoff", n as f64, *v);
    }
    let total: f64 = run.absorbed.iter().sum();
    let tv = 0.5
        * run
            .absorbed
            .iter()
            .zip([4.0 / 9.0, 5.0 / 9.0])
            .map(|(m, w)| (m / total - w).abs())
            .sum::<f64>();
    r.check(
        "absorbed distribution",
        tv <= 1e-4,
        format!("total variation {tv:.2e}"),
    );
    let bound = absorption_bound(&frame, s.alpha, 200);
    r.check(
        "unabsorbed mass within bound",
        run.residual <= bound.bound,
        format!(
            "{:.2e} <= {:.6} (k = {}, delta = {:.3e})",
            run.residual, bound.bound, bound.k_bar, bound.delta_bar
        ),
    );
    r.close(
        "payoff",
        *run.payoff_trace.last().expect("non-empty trace"),
        5.0 / 9.0,
        1e-4,
    );
    Ok(())
}

fn prop6(r: &mut Report) -> Result<(), CliError> {
    let s = bundled(PROSECUTOR_BIASED_PBPO);
    let target = binary(0.5);
    let gamma = max_gamma(s.problem.prior(), &target, s.alpha)?;
    r.close("maximal stretch", gamma, 1.75, 1e-12);
    let plan = GeometricPlan::new(&s.problem, s.alpha, &target, gamma)?;
    let (r1, r2) = plan.residuals(s.problem.prior(), s.alpha);
    r.check(
        "averaging residuals",
        r1 <= 1e-12 && r2 <= 1e-12,
        format!("{r1:.1e}, {r2:.1e}"),
    );
    let mut worst = 0.0f64;
    for n in 1..=30 {
        let v = payoff(
            &s,
            s.alpha,
            &pbpo_geometric(&s.problem, s.alpha, &target, gamma, n)?,
        )?;
        let closed = plan.payoff(&s.problem, n);
        worst = worst.max((v - closed).abs());
        r.row("engine", n as f64, v);
        r.row("closed_form", n as f64, closed);
        if n == 20 {
            r.close(
                "payoff at N = 20",
                v,
                1.0 - (4.0 / 7.0) * (11.0f64 / 14.0).powi(19),
                1e-9,
            );
            r.check("payoff at N = 20 above 0.99", v > 0.99, format!("{v:.8}"));
        }
    }
    r.check(
        "engine matches closed form",
        worst <= 1e-9,
        format!("max gap {worst:.2e}"),
    );
    Ok(())
}
