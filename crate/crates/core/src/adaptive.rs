//! Adaptive control by rollout on the scalar linear-quadratic problem.
//!
//! A gain is designed once for nominal parameters and kept fixed. When the
//! parameters `(b, r)` change, the controller either keeps the fixed gain,
//! uses it as the base policy of a rollout under the new parameters, or
//! reoptimizes exactly. Parameter changes are assumed to be known as soon as
//! they happen.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::Serialize;

use crate::csv::format_real;
use crate::error::{Error, Result};
use crate::riccati::{Coefficient, ScalarLq};

/// A problem together with the gain that is optimal for it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NominalDesign {
    nominal: ScalarLq,
    fixed_gain: f64,
}

impl NominalDesign {
    pub fn new(nominal: ScalarLq) -> Self {
        NominalDesign {
            nominal,
            fixed_gain: nominal.optimal_gain().value(),
        }
    }

    /// `x' = x + 2u`, stage cost `x^2 + 0.5 u^2`.
    pub fn reference() -> Self {
        NominalDesign::new(ScalarLq::new(1.0, 2.0, 1.0, 0.5).expect("valid reference problem"))
    }

    pub fn nominal(&self) -> &ScalarLq {
        &self.nominal
    }

    pub fn fixed_gain(&self) -> f64 {
        self.fixed_gain
    }

    /// The nominal problem with `b` and `r` replaced.
    pub fn perturbed(&self, b: f64, r: f64) -> Result<ScalarLq> {
        ScalarLq::new(self.nominal.a(), b, self.nominal.q(), r)
    }
}

/// Cost coefficients at one parameter point: optimal, rollout of the fixed
/// gain, and the fixed gain itself.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepPoint {
    pub b: f64,
    pub r: f64,
    pub k_star: f64,
    pub k_rollout: f64,
    pub k_l: f64,
}

impl SweepPoint {
    pub fn evaluate(design: &NominalDesign, b: f64, r: f64) -> Result<Self> {
        let problem = design.perturbed(b, r)?;
        let k_star = problem.solve_riccati().value();
        let k_l = problem.policy_cost(design.fixed_gain()).value();
        let k_rollout = match problem.rollout(design.fixed_gain()) {
            Ok(res) => res.cost.value(),
            Err(Error::UnstableBase(_)) => f64::INFINITY,
            Err(e) => return Err(e),
        };
        Ok(SweepPoint {
            b,
            r,
            k_star,
            k_rollout,
            k_l,
        })
    }

    /// `K* <= K_rollout <= K_L` within `tol * max(1, K_L)`; vacuous when the
    /// fixed gain is unstable here.
    pub fn ordered(&self, tol: f64) -> bool {
        if !self.k_l.is_finite() {
            return true;
        }
        let slack = tol * self.k_l.max(1.0);
        self.k_star <= self.k_rollout + slack && self.k_rollout <= self.k_l + slack
    }
}

/// Evaluates every `(b, r)` of the grid product, `b` outermost. Points are
/// computed in parallel and returned in grid order.
pub fn robustness_sweep(
    design: &NominalDesign,
    b_grid: &[f64],
    r_grid: &[f64],
) -> Result<Vec<SweepPoint>> {
    if b_grid.is_empty() {
        return Err(Error::invalid("b_grid", "empty grid"));
    }
    if r_grid.is_empty() {
        return Err(Error::invalid("r_grid", "empty grid"));
    }
    let pairs: Vec<(f64, f64)> = b_grid
        .iter()
        .flat_map(|&b| r_grid.iter().map(move |&r| (b, r)))
        .collect();
    pairs
        .par_iter()
        .map(|&(b, r)| SweepPoint::evaluate(design, b, r))
        .collect()
}

/// Evenly spaced grid `start, start + step, ..., stop` (inclusive up to
/// rounding), computed as `start + i * step`.
pub fn linear_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(start.is_finite() && stop.is_finite() && step.is_finite()) || step <= 0.0 || stop < start {
        return Err(Error::invalid(
            "grid",
            format!("need start <= stop and step > 0, got {start}:{stop}:{step}"),
        ));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=count).map(|i| start + i as f64 * step).collect())
}

pub fn write_sweep_csv<W: Write>(mut out: W, points: &[SweepPoint]) -> io::Result<()> {
    writeln!(out, "b,r,K_star,K_rollout,K_L")?;
    for p in points {
        writeln!(
            out,
            "{},{},{},{},{}",
            format_real(p.b),
            format_real(p.r),
            format_real(p.k_star),
            format_real(p.k_rollout),
            format_real(p.k_l)
        )?;
    }
    Ok(())
}

/// Parameters `(b, r)` in force from step `time` on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScheduleEntry {
    pub time: usize,
    pub b: f64,
    pub r: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplanMode {
    FixedBase,
    RolloutReplan,
    OracleReoptimize,
}

impl ReplanMode {
    pub const ALL: [ReplanMode; 3] = [
        ReplanMode::FixedBase,
        ReplanMode::RolloutReplan,
        ReplanMode::OracleReoptimize,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ReplanMode::FixedBase => "fixed_base",
            ReplanMode::RolloutReplan => "rollout_replan",
            ReplanMode::OracleReoptimize => "oracle_reoptimize",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReplanStep {
    pub k: usize,
    pub b: f64,
    pub r: f64,
    pub x: f64,
    pub u: f64,
    pub stage_cost: f64,
    pub gain: f64,
    /// Set when rollout's base was unstable and the deadbeat limit gain
    /// `-a/b` was applied.
    pub limit_gain: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplanTrace {
    pub mode: ReplanMode,
    pub schedule: Vec<ScheduleEntry>,
    pub steps: Vec<ReplanStep>,
    /// State after the last simulated step.
    pub final_state: f64,
    pub total_cost: f64,
    /// Cost-to-go estimate `K x_H^2` of the last gain under the last
    /// parameters; `inf` after divergence or with an unstable final gain.
    pub tail_bound: f64,
    pub diverged: bool,
}

const DIVERGENCE_LIMIT: f64 = 1e12;

fn validate_schedule(design: &NominalDesign, schedule: &[ScheduleEntry]) -> Result<Vec<ScalarLq>> {
    if schedule.is_empty() {
        return Err(Error::invalid("schedule", "empty schedule"));
    }
    if schedule[0].time != 0 {
        return Err(Error::invalid("schedule[0].time", "first entry must start at time 0"));
    }
    for (i, pair) in schedule.windows(2).enumerate() {
        if pair[1].time <= pair[0].time {
            return Err(Error::invalid(
                format!("schedule[{}].time", i + 1),
                "times must be strictly increasing",
            ));
        }
    }
    schedule
        .iter()
        .enumerate()
        .map(|(i, e)| {
            design.perturbed(e.b, e.r).map_err(|err| match err {
                Error::Invalid { path, reason } => Error::invalid(format!("schedule[{i}].{path}"), reason),
                other => other,
            })
        })
        .collect()
}

/// Closed-loop simulation of `x_{k+1} = a x_k + b_k u_k` under a parameter
/// schedule, choosing the gain at every step according to `mode`.
pub fn replan_simulation(
    design: &NominalDesign,
    schedule: &[ScheduleEntry],
    x0: f64,
    horizon: usize,
    mode: ReplanMode,
) -> Result<ReplanTrace> {
    if horizon == 0 {
        return Err(Error::invalid("horizon", "must be >= 1"));
    }
    if !x0.is_finite() {
        return Err(Error::invalid("x0", "must be finite"));
    }
    let problems = validate_schedule(design, schedule)?;
    let mut steps = Vec::with_capacity(horizon);
    let mut x = x0;
    let mut total_cost = 0.0;
    let mut diverged = false;
    let mut active = 0;
    let mut last_gain = design.fixed_gain();
    for k in 0..horizon {
        while active + 1 < schedule.len() && schedule[active + 1].time <= k {
            active += 1;
        }
        let problem = &problems[active];
        let (gain, limit_gain) = match mode {
            ReplanMode::FixedBase => (design.fixed_gain(), false),
            ReplanMode::OracleReoptimize => (problem.optimal_gain().value(), false),
            ReplanMode::RolloutReplan => match problem.rollout(design.fixed_gain()) {
                Ok(res) => (res.gain.value(), false),
                // Lookahead against an infinite base cost forces a x + b u = 0.
                Err(Error::UnstableBase(_)) => {
                    (problem.greedy_gain(Coefficient::INFINITY).value(), true)
                }
                Err(e) => return Err(e),
            },
        };
        let u = gain * x;
        let stage_cost = problem.q() * x * x + problem.r() * u * u;
        total_cost += stage_cost;
        steps.push(ReplanStep {
            k,
            b: problem.b(),
            r: problem.r(),
            x,
            u,
            stage_cost,
            gain,
            limit_gain,
        });
        last_gain = gain;
        x = problem.a() * x + problem.b() * u;
        if x.is_nan() || x.abs() > DIVERGENCE_LIMIT {
            diverged = true;
            break;
        }
    }
    let tail_bound = if diverged {
        f64::INFINITY
    } else {
        let k_tail = problems[active].policy_cost(last_gain).value();
        if x == 0.0 { 0.0 } else { k_tail * x * x }
    };
    Ok(ReplanTrace {
        mode,
        schedule: schedule.to_vec(),
        steps,
        final_state: x,
        total_cost,
        tail_bound,
        diverged,
    })
}

impl ReplanTrace {
    /// Realized cost of the steps at times `>= k`.
    pub fn cost_from(&self, k: usize) -> f64 {
        self.steps.iter().filter(|s| s.k >= k).map(|s| s.stage_cost).sum()
    }
}

pub fn write_trace_csv<W: Write>(mut out: W, traces: &[ReplanTrace]) -> io::Result<()> {
    writeln!(out, "k,b,r,mode,x,u,stage_cost")?;
    for t in traces {
        for s in &t.steps {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                s.k,
                format_real(s.b),
                format_real(s.r),
                t.mode.name(),
                format_real(s.x),
                format_real(s.u),
                format_real(s.stage_cost)
            )?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatioPoint {
    pub k: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioReport {
    pub k_star: f64,
    pub points: Vec<RatioPoint>,
    /// Grid values that were excluded, with the reason.
    pub skipped: Vec<(f64, String)>,
}

/// `(K_newton(K) - K*) / (K - K*)` along `grid`, where `K_newton(K)` is the
/// cost of the one-step lookahead gain at `K`. The ratio vanishes as
/// `K -> K*` at the rate of `|K - K*|`.
pub fn superlinear_ratio(problem: &ScalarLq, grid: &[f64]) -> RatioReport {
    let k_star = problem.solve_riccati().value();
    let region = problem.stability_region();
    let mut points = Vec::new();
    let mut skipped = Vec::new();
    for &k in grid {
        if !(k.is_finite() && k >= 0.0) {
            skipped.push((k, "not a finite nonnegative coefficient".to_string()));
        } else if k == k_star {
            skipped.push((k, "equal to K*".to_string()));
        } else if !region.contains(k) {
            skipped.push((k, "outside the region of stability".to_string()));
        } else {
            let newton = problem
                .newton_step(Coefficient::new(k).expect("checked nonnegative"))
                .cost
                .value();
            points.push(RatioPoint {
                k,
                ratio: (newton - k_star) / (k - k_star),
            });
        }
    }
    RatioReport {
        k_star,
        points,
        skipped,
    }
}

/// `K* + 2^-i` for `i = 0..halvings`, cut off once the offset drops
/// below `1e-8`.
pub fn geometric_grid(k_star: f64, halvings: usize) -> Vec<f64> {
    (0..halvings)
        .map(|i| 0.5f64.powi(i as i32))
        .take_while(|&d| d >= 1e-8)
        .map(|d| k_star + d)
        .collect()
}

/// `(K_rollout - K*) / (K_L - K*)` for the fixed gain under `problem`;
/// `None` where the fixed gain is unstable or already optimal.
pub fn rollout_ratio(design: &NominalDesign, problem: &ScalarLq) -> Option<f64> {
    let k_star = problem.solve_riccati().value();
    let k_l = problem.policy_cost(design.fixed_gain()).value();
    if !k_l.is_finite() || k_l == k_star {
        return None;
    }
    let k_rollout = problem.rollout(design.fixed_gain()).ok()?.cost.value();
    Some((k_rollout - k_star) / (k_l - k_star))
}
