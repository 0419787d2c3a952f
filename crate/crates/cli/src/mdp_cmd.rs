use std::path::PathBuf;

use clap::{Args, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use dplab::mdp::random::{random_mdp_seeded, RandomMdpConfig};
use dplab::mdp::*;

use crate::config::{parse_list, require_positive, resolve, Common};
use crate::error::{CliError, CliResult};
use crate::output::{real, reals, write_json, write_with};

#[derive(Debug, Subcommand)]
pub enum MdpCmd {
    /// Optimal cost and policy by policy or value iteration
    Solve(SolveArgs),
    /// One rollout step from a base policy
    Rollout(RolloutArgs),
    /// Multistep lookahead policy, optionally with the search tree at one state
    Lookahead(LookaheadArgs),
    /// Check J >= T J for a terminal cost function
    Lyapunov(LyapunovArgs),
    /// Write a seeded random model
    Generate(GenerateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Pi,
    Vi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum CeArg {
    Exact,
    CeAfterFirst,
    CeAll,
}

impl From<CeArg> for CeMode {
    fn from(c: CeArg) -> Self {
        match c {
            CeArg::Exact => CeMode::Exact,
            CeArg::CeAfterFirst => CeMode::CeAfterFirst,
            CeArg::CeAll => CeMode::CeAll,
        }
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct ModelArg {
    /// MDP document (JSON)
    #[arg(long)]
    pub file: Option<PathBuf>,
}

impl ModelArg {
    fn load(&self) -> CliResult<FiniteMdp> {
        let path = self.file.as_ref().ok_or_else(|| CliError::invalid("file", "required"))?;
        Ok(load_mdp(path)?)
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct SolveArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArg,
    /// [default: pi]
    #[arg(long)]
    pub method: Option<Method>,
    /// Initial policy for pi, one control id per state [default: lowest id everywhere]
    #[arg(long)]
    pub initial: Option<String>,
    /// Bellman residual target for vi [default: 1e-10]
    #[arg(long)]
    pub tol: Option<f64>,
    /// Iteration limit for vi [default: 100000]
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct RolloutArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArg,
    /// Base policy, one control id per state [default: lowest id everywhere]
    #[arg(long)]
    pub base: Option<String>,
    /// Truncate the base policy's cost to m stages [default: exact cost]
    #[arg(long)]
    pub m: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct LookaheadArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArg,
    /// Lookahead depth [default: 1]
    #[arg(long)]
    pub ell: Option<usize>,
    /// Truncated rollout length at the leaves [default: 0]
    #[arg(long)]
    pub m: Option<usize>,
    /// Base policy for m > 0, one control id per state
    #[arg(long)]
    pub base: Option<String>,
    /// Terminal cost, one value per state [default: zeros]
    #[arg(long)]
    pub terminal: Option<String>,
    /// [default: exact]
    #[arg(long)]
    pub ce: Option<CeArg>,
    /// Also expand the search tree at this state and report its size
    #[arg(long)]
    pub state: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct LyapunovArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArg,
    /// Candidate function, one value per state [default: zeros]
    #[arg(long)]
    pub terminal: Option<String>,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct GenerateArgs {
    /// [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// [default: 0.9]
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Make control 0 of every state reach termination with positive probability
    #[arg(long)]
    pub proper: Option<bool>,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

pub fn run(cmd: MdpCmd) -> CliResult<()> {
    match cmd {
        MdpCmd::Solve(args) => {
            let path = args.common.config.clone();
            solve(resolve(args, path.as_deref())?)
        }
        MdpCmd::Rollout(args) => {
            let path = args.common.config.clone();
            rollout(resolve(args, path.as_deref())?)
        }
        MdpCmd::Lookahead(args) => {
            let path = args.common.config.clone();
            lookahead(resolve(args, path.as_deref())?)
        }
        MdpCmd::Lyapunov(args) => {
            let path = args.common.config.clone();
            lyapunov(resolve(args, path.as_deref())?)
        }
        MdpCmd::Generate(args) => {
            let path = args.common.config.clone();
            generate(resolve(args, path.as_deref())?)
        }
    }
}

fn lowest_ids(mdp: &FiniteMdp) -> StationaryPolicy {
    let choice = (0..mdp.state_count())
        .map(|x| mdp.controls(x).first().map_or(0, |c| c.id))
        .collect();
    StationaryPolicy::new(mdp, choice).expect("lowest ids are admissible")
}

fn policy_arg(mdp: &FiniteMdp, field: &str, text: Option<&str>) -> CliResult<StationaryPolicy> {
    match text {
        None => Ok(lowest_ids(mdp)),
        Some(t) => StationaryPolicy::new(mdp, parse_list(field, t)?).map_err(|e| match e {
            dplab::Error::Invalid { path, reason } => {
                CliError::invalid(path.replacen("policy", field, 1), reason)
            }
            other => other.into(),
        }),
    }
}

fn values_arg(mdp: &FiniteMdp, field: &str, text: Option<&str>) -> CliResult<ValueFunction> {
    let values = match text {
        None => return Ok(ValueFunction::zeros(mdp.state_count())),
        Some(t) => parse_list::<f64>(field, t)?,
    };
    if values.len() != mdp.state_count() {
        return Err(CliError::invalid(
            field,
            format!("has {} entries, model has {} states", values.len(), mdp.state_count()),
        ));
    }
    ValueFunction::new(values).map_err(|e| match e {
        dplab::Error::Invalid { reason, .. } => CliError::invalid(field, reason),
        other => other.into(),
    })
}

fn properness_name(p: Properness) -> &'static str {
    match p {
        Properness::Stable => "stable",
        Properness::Unstable => "unstable",
    }
}

fn solve(args: SolveArgs) -> CliResult<()> {
    let mdp = args.model.load()?;
    let method = args.method.unwrap_or(Method::Pi);
    let (values, policy, iterations, residual) = match method {
        Method::Pi => {
            let initial = policy_arg(&mdp, "initial", args.initial.as_deref())?;
            if properness_check(&mdp, &initial)? == Properness::Unstable {
                return Err(CliError::invalid(
                    "initial",
                    "initial policy has infinite cost from some state",
                ));
            }
            let out = policy_iteration_mdp(&mdp, &initial)?;
            (out.values, out.policy, out.iterations, None)
        }
        Method::Vi => {
            let tol = require_positive("tol", args.tol.unwrap_or(1e-10))?;
            let max_iters = args.max_iters.unwrap_or(100_000);
            let out = value_iteration_mdp(&mdp, &ValueFunction::zeros(mdp.state_count()), tol, max_iters)?;
            let policy = greedy_policy(&mdp, &out.values)?;
            (out.values, policy, out.iterations, Some(out.residual))
        }
    };
    write_json(
        &args.common.out_dir(),
        "solve.json",
        &json!({
            "method": method,
            "iterations": iterations,
            "residual": residual.map(real),
            "values": reals(values.values()),
            "policy": policy.choices(),
        }),
    )?;
    println!("values={}", join(values.values()));
    println!("policy={}", join_ids(policy.choices()));
    println!("iterations={iterations}");
    Ok(())
}

fn rollout(args: RolloutArgs) -> CliResult<()> {
    let mdp = args.model.load()?;
    let base = policy_arg(&mdp, "base", args.base.as_deref())?;
    if properness_check(&mdp, &base)? == Properness::Unstable {
        return Err(CliError::invalid("base", "base policy has infinite cost from some state"));
    }
    let horizon = args.m.map_or(RolloutHorizon::Infinite, RolloutHorizon::Truncated);
    let improved = rollout_policy_mdp(&mdp, &base, horizon)?;
    let base_values = policy_evaluation_mdp(&mdp, &base)?;
    let values = policy_evaluation_mdp(&mdp, &improved)?;
    write_json(
        &args.common.out_dir(),
        "rollout.json",
        &json!({
            "m": args.m,
            "base": base.choices(),
            "base_values": reals(base_values.values()),
            "policy": improved.choices(),
            "values": reals(values.values()),
        }),
    )?;
    println!("policy={}", join_ids(improved.choices()));
    println!("values={}", join(values.values()));
    Ok(())
}

fn lookahead(args: LookaheadArgs) -> CliResult<()> {
    let mdp = args.model.load()?;
    let terminal = values_arg(&mdp, "terminal", args.terminal.as_deref())?;
    let mut spec = LookaheadSpec::one_step(terminal)
        .with_depth(args.ell.unwrap_or(1))
        .with_ce(args.ce.unwrap_or(CeArg::Exact).into());
    let m = args.m.unwrap_or(0);
    if m > 0 {
        let base = args
            .base
            .as_deref()
            .ok_or_else(|| CliError::invalid("base", "required when m > 0"))?;
        spec = spec.with_truncated_rollout(m, policy_arg(&mdp, "base", Some(base))?);
    }
    let (policy, backed_up) = lookahead_policy(&mdp, &spec)?;
    let properness = properness_check(&mdp, &policy)?;
    let values = policy_evaluation_mdp(&mdp, &policy)?;
    let tree: Value = match args.state {
        None => Value::Null,
        Some(x) => {
            let d = lookahead_policy_mdp(&mdp, &spec, x).map_err(|e| match e {
                dplab::Error::Invalid { reason, .. } => CliError::invalid("state", reason),
                other => other.into(),
            })?;
            println!("state={x} control={} nodes={} leaves={}", d.control, d.stats.nodes, d.stats.leaves);
            json!({
                "state": x,
                "control": d.control,
                "value": real(d.value),
                "nodes": d.stats.nodes,
                "leaves": d.stats.leaves,
            })
        }
    };
    write_json(
        &args.common.out_dir(),
        "lookahead.json",
        &json!({
            "ell": spec.ell,
            "m": spec.m,
            "ce_mode": spec.ce_mode,
            "policy": policy.choices(),
            "lookahead_values": reals(backed_up.values()),
            "policy_values": reals(values.values()),
            "properness": properness_name(properness),
            "tree": tree,
        }),
    )?;
    println!("policy={}", join_ids(policy.choices()));
    println!("properness={}", properness_name(properness));
    Ok(())
}

fn lyapunov(args: LyapunovArgs) -> CliResult<()> {
    let mdp = args.model.load()?;
    let j = values_arg(&mdp, "terminal", args.terminal.as_deref())?;
    let report = lyapunov_check(&mdp, &j)?;
    let greedy = greedy_policy(&mdp, &j)?;
    let properness = properness_check(&mdp, &greedy)?;
    write_json(
        &args.common.out_dir(),
        "lyapunov.json",
        &json!({
            "holds": report.holds,
            "violations": report.violations,
            "greedy_policy": greedy.choices(),
            "greedy_properness": properness_name(properness),
        }),
    )?;
    println!("holds={}", report.holds);
    println!("violations={}", join_ids(&report.violations));
    println!("greedy_properness={}", properness_name(properness));
    Ok(())
}

fn generate(args: GenerateArgs) -> CliResult<()> {
    let alpha = args.alpha.unwrap_or(0.9);
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(CliError::invalid("alpha", format!("must lie in (0, 1], got {alpha}")));
    }
    let config = RandomMdpConfig {
        alpha,
        ensure_proper: args.proper.unwrap_or(false),
    };
    let mdp = random_mdp_seeded(args.seed.unwrap_or(0), config);
    let path = write_with(&args.common.out_dir(), "mdp.json", |out| {
        use std::io::Write;
        writeln!(out, "{}", mdp_to_json(&mdp))
    })?;
    println!("file={}", path.display());
    Ok(())
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

fn join_ids(ids: &[usize]) -> String {
    ids.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}
