use std::io::Write;

use clap::{Args, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use dplab::adaptive::*;
use dplab::csv::format_real;
use dplab::ScalarLq;

use crate::config::{parse_grid, parse_schedule, require_positive, resolve, Common};
use crate::error::{CliError, CliResult};
use crate::output::{real, write_json, write_with};

#[derive(Debug, Subcommand)]
pub enum AdaptiveCmd {
    /// Optimal, rollout and fixed-gain cost coefficients over parameter grids
    Sweep(SweepArgs),
    /// Closed-loop simulation under a parameter schedule
    Replan(ReplanArgs),
    /// (K_newton - K*) / (K - K*) on K* + 2^-i
    Ratio(RatioArgs),
}

/// Nominal problem `x' = x + b u`, cost `x^2 + r u^2`, whose optimal gain is
/// kept fixed.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct Nominal {
    /// [default: 2]
    #[arg(long, allow_hyphen_values = true)]
    pub nominal_b: Option<f64>,
    /// [default: 0.5]
    #[arg(long)]
    pub nominal_r: Option<f64>,
}

impl Nominal {
    fn design(&self) -> CliResult<NominalDesign> {
        let problem = ScalarLq::new(1.0, self.nominal_b.unwrap_or(2.0), 1.0, self.nominal_r.unwrap_or(0.5))
            .map_err(|e| match e {
                dplab::Error::Invalid { path, reason } => {
                    CliError::invalid(format!("nominal_{path}"), reason)
                }
                other => other.into(),
            })?;
        Ok(NominalDesign::new(problem))
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct SweepArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub nominal: Nominal,
    /// b values as start:stop:step, swept at r = fixed_r [default: 0.5:3.0:0.05]
    #[arg(long)]
    pub grid_b: Option<String>,
    /// r values as start:stop:step, swept at b = fixed_b [default: 0.1:2.0:0.05]
    #[arg(long)]
    pub grid_r: Option<String>,
    /// [default: nominal b]
    #[arg(long, allow_hyphen_values = true)]
    pub fixed_b: Option<f64>,
    /// [default: nominal r]
    #[arg(long)]
    pub fixed_r: Option<f64>,
    /// Tolerance of the ordering check K* <= K_rollout <= K_L [default: 1e-9]
    #[arg(long)]
    pub tol: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum ModeArg {
    All,
    FixedBase,
    RolloutReplan,
    OracleReoptimize,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct ReplanArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub nominal: Nominal,
    /// time:b:r entries, comma separated [default: 0:2:0.5,10:1:0.5]
    #[arg(long)]
    pub schedule: Option<String>,
    /// [default: 1]
    #[arg(long, allow_hyphen_values = true)]
    pub x0: Option<f64>,
    /// [default: 40]
    #[arg(long)]
    pub horizon: Option<usize>,
    /// [default: all]
    #[arg(long)]
    pub mode: Option<ModeArg>,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct RatioArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub nominal: Nominal,
    /// Perturbed b [default: 1]
    #[arg(long, allow_hyphen_values = true)]
    pub b: Option<f64>,
    /// Perturbed r [default: 0.5]
    #[arg(long)]
    pub r: Option<f64>,
    /// Number of grid points K* + 2^-i [default: 20]
    #[arg(long)]
    pub halvings: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

pub fn run(cmd: AdaptiveCmd) -> CliResult<()> {
    match cmd {
        AdaptiveCmd::Sweep(args) => {
            let path = args.common.config.clone();
            sweep(resolve(args, path.as_deref())?)
        }
        AdaptiveCmd::Replan(args) => {
            let path = args.common.config.clone();
            replan(resolve(args, path.as_deref())?)
        }
        AdaptiveCmd::Ratio(args) => {
            let path = args.common.config.clone();
            ratio(resolve(args, path.as_deref())?)
        }
    }
}

/// Maps a parameter error at a sweep point onto the grid option that
/// produced it.
fn sweep_points(design: &NominalDesign, bs: &[f64], rs: &[f64], b_field: &str, r_field: &str) -> CliResult<Vec<SweepPoint>> {
    robustness_sweep(design, bs, rs).map_err(|e| match e {
        dplab::Error::Invalid { path, reason } => {
            let field = if path == "b" { b_field } else { r_field };
            CliError::invalid(field, reason)
        }
        other => other.into(),
    })
}

fn sweep(args: SweepArgs) -> CliResult<()> {
    let design = args.nominal.design()?;
    let bs = parse_grid("grid_b", args.grid_b.as_deref().unwrap_or("0.5:3.0:0.05"))?;
    let rs = parse_grid("grid_r", args.grid_r.as_deref().unwrap_or("0.1:2.0:0.05"))?;
    let fixed_b = args.fixed_b.unwrap_or(design.nominal().b());
    let fixed_r = args.fixed_r.unwrap_or(design.nominal().r());
    let tol = require_positive("tol", args.tol.unwrap_or(1e-9))?;
    let over_b = sweep_points(&design, &bs, &[fixed_r], "grid_b", "fixed_r")?;
    let over_r = sweep_points(&design, &[fixed_b], &rs, "fixed_b", "grid_r")?;
    let dir = args.common.out_dir();
    write_with(&dir, "sweep_b.csv", |out| write_sweep_csv(out, &over_b))?;
    write_with(&dir, "sweep_r.csv", |out| write_sweep_csv(out, &over_r))?;
    let bad: Vec<&SweepPoint> = over_b.iter().chain(&over_r).filter(|p| !p.ordered(tol)).collect();
    let finite = over_b.iter().chain(&over_r).filter(|p| p.k_l.is_finite()).count();
    println!("points={}", over_b.len() + over_r.len());
    println!("finite={finite}");
    println!("violations={}", bad.len());
    if let Some(p) = bad.first() {
        return Err(CliError::Violation(format!(
            "ordering K* <= K_rollout <= K_L fails at b={}, r={}: {} {} {}",
            p.b, p.r, p.k_star, p.k_rollout, p.k_l
        )));
    }
    Ok(())
}

fn replan(args: ReplanArgs) -> CliResult<()> {
    let design = args.nominal.design()?;
    let schedule = parse_schedule(args.schedule.as_deref().unwrap_or("0:2:0.5,10:1:0.5"))?;
    let x0 = args.x0.unwrap_or(1.0);
    let horizon = args.horizon.unwrap_or(40);
    let modes: Vec<ReplanMode> = match args.mode.unwrap_or(ModeArg::All) {
        ModeArg::All => ReplanMode::ALL.to_vec(),
        ModeArg::FixedBase => vec![ReplanMode::FixedBase],
        ModeArg::RolloutReplan => vec![ReplanMode::RolloutReplan],
        ModeArg::OracleReoptimize => vec![ReplanMode::OracleReoptimize],
    };
    let traces = modes
        .iter()
        .map(|&m| replan_simulation(&design, &schedule, x0, horizon, m))
        .collect::<Result<Vec<_>, _>>()?;
    let dir = args.common.out_dir();
    write_with(&dir, "trace.csv", |out| write_trace_csv(out, &traces))?;
    let last_switch = schedule.last().map_or(0, |e| e.time);
    let summary: Vec<_> = traces
        .iter()
        .map(|t| {
            println!(
                "{} total={} tail={} diverged={}",
                t.mode.name(),
                format_real(t.total_cost),
                format_real(t.tail_bound),
                t.diverged
            );
            json!({
                "mode": t.mode,
                "steps": t.steps.len(),
                "total_cost": real(t.total_cost),
                "cost_after_last_switch": real(t.cost_from(last_switch)),
                "tail_bound": real(t.tail_bound),
                "final_state": real(t.final_state),
                "diverged": t.diverged,
                "limit_gain_steps": t.steps.iter().filter(|s| s.limit_gain).count(),
            })
        })
        .collect();
    write_json(
        &dir,
        "replan_summary.json",
        &json!({ "x0": x0, "horizon": horizon, "last_switch": last_switch, "modes": summary }),
    )?;
    Ok(())
}

fn ratio(args: RatioArgs) -> CliResult<()> {
    let design = args.nominal.design()?;
    let problem = design.perturbed(args.b.unwrap_or(1.0), args.r.unwrap_or(0.5))?;
    let halvings = args.halvings.unwrap_or(20);
    let report = superlinear_ratio(&problem, &geometric_grid(problem.solve_riccati().value(), halvings));
    let dir = args.common.out_dir();
    write_with(&dir, "ratio.csv", |out| {
        writeln!(out, "K,offset,ratio")?;
        for p in &report.points {
            writeln!(
                out,
                "{},{},{}",
                format_real(p.k),
                format_real(p.k - report.k_star),
                format_real(p.ratio)
            )?;
        }
        Ok(())
    })?;
    for (k, why) in &report.skipped {
        eprintln!("skipped K={k}: {why}");
    }
    let decreasing = report.points.windows(2).all(|w| w[1].ratio < w[0].ratio);
    println!("K*={}", report.k_star);
    println!("points={}", report.points.len());
    println!("decreasing={decreasing}");
    if let Some(r) = rollout_ratio(&design, &problem) {
        println!("rollout_ratio={r}");
    }
    Ok(())
}
