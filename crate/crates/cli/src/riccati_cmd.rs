use std::io::Write;

use clap::{Args, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

use dplab::csv::format_real;
use dplab::{Coefficient, ScalarLq};

use crate::config::{parse_grid, require_positive, resolve, Common};
use crate::error::{CliError, CliResult};
use crate::output::{real, write_json, write_with};

#[derive(Debug, Subcommand)]
pub enum RiccatiCmd {
    /// Closed-form K* and L*
    Solve(SolveArgs),
    /// Value iteration K <- F(K)
    Vi(ViArgs),
    /// Policy iteration on linear gains
    Pi(PiArgs),
    /// Newton iterates K <- cost of the greedy gain at K
    Newton(NewtonArgs),
    /// Stability of one-step and multistep lookahead across K
    SweepStability(SweepStabilityArgs),
}

/// `x' = a x + b u`, stage cost `q x^2 + r u^2`.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct Problem {
    #[arg(long, allow_hyphen_values = true)]
    pub a: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub b: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub q: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub r: Option<f64>,
}

impl Problem {
    fn build(&self) -> CliResult<ScalarLq> {
        let field = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| CliError::invalid(name, "required"))
        };
        Ok(ScalarLq::new(
            field(self.a, "a")?,
            field(self.b, "b")?,
            field(self.q, "q")?,
            field(self.r, "r")?,
        )?)
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct SolveArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub problem: Problem,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct ViArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub problem: Problem,
    /// Starting coefficient [default: 0]
    #[arg(long)]
    pub k0: Option<f64>,
    /// Iteration limit [default: 200]
    #[arg(long)]
    pub iters: Option<usize>,
    /// Stop once |F(K) - K| <= tol * max(1, K) [default: 1e-12]
    #[arg(long)]
    pub tol: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct PiArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub problem: Problem,
    /// Initial stable gain [default: -a/b]
    #[arg(long, allow_hyphen_values = true)]
    pub l0: Option<f64>,
    /// Relative tolerance on K and L [default: 1e-12]
    #[arg(long)]
    pub tol: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct NewtonArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub problem: Problem,
    /// Starting coefficient [default: 10 K*]
    #[arg(long)]
    pub k0: Option<f64>,
    /// Step limit [default: 10]
    #[arg(long)]
    pub max_steps: Option<usize>,
    /// Stop once |K - K*| <= tol * max(1, K*) [default: 1e-12]
    #[arg(long)]
    pub tol: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct SweepStabilityArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub problem: Problem,
    /// Grid of K as start:stop:step [default: 0 to 3 K_S in 60 steps, or 0 to 3 K* when every K is stable]
    #[arg(long)]
    pub k_grid: Option<String>,
    /// Terminal coefficient of the multistep scan [default: 0]
    #[arg(long)]
    pub k_tilde: Option<f64>,
    /// Deepest lookahead of the multistep scan [default: 64]
    #[arg(long)]
    pub ell_max: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

fn coefficient(field: &str, v: f64) -> CliResult<Coefficient> {
    Coefficient::new(v).map_err(|_| CliError::invalid(field, format!("must be >= 0, got {v}")))
}

pub fn run(cmd: RiccatiCmd) -> CliResult<()> {
    match cmd {
        RiccatiCmd::Solve(args) => {
            let path = args.common.config.clone();
            solve(resolve(args, path.as_deref())?)
        }
        RiccatiCmd::Vi(args) => {
            let path = args.common.config.clone();
            vi(resolve(args, path.as_deref())?)
        }
        RiccatiCmd::Pi(args) => {
            let path = args.common.config.clone();
            pi(resolve(args, path.as_deref())?)
        }
        RiccatiCmd::Newton(args) => {
            let path = args.common.config.clone();
            newton(resolve(args, path.as_deref())?)
        }
        RiccatiCmd::SweepStability(args) => {
            let path = args.common.config.clone();
            sweep_stability(resolve(args, path.as_deref())?)
        }
    }
}

fn solve(args: SolveArgs) -> CliResult<()> {
    let p = args.problem.build()?;
    let k = p.solve_riccati().value();
    let l = p.optimal_gain();
    let ks = p.stability_region().k_s();
    println!("K*={k}");
    println!("L*={}", l.value());
    println!("closed_loop={}", l.closed_loop());
    write_json(
        &args.common.out_dir(),
        "solve.json",
        &json!({
            "a": p.a(), "b": p.b(), "q": p.q(), "r": p.r(),
            "K_star": real(k),
            "L_star": real(l.value()),
            "closed_loop": real(l.closed_loop()),
            "K_S": ks.map(real),
        }),
    )?;
    Ok(())
}

fn vi(args: ViArgs) -> CliResult<()> {
    let p = args.problem.build()?;
    let k0 = coefficient("k0", args.k0.unwrap_or(0.0))?;
    let iters = args.iters.unwrap_or(200);
    let tol = require_positive("tol", args.tol.unwrap_or(1e-12))?;
    let mut seq = vec![k0];
    let residual = loop {
        let k = *seq.last().expect("nonempty");
        let next = p.riccati_operator(k);
        let residual = (next.value() - k.value()).abs();
        if residual <= tol * k.value().max(1.0) || seq.len() > iters {
            break residual;
        }
        seq.push(next);
    };
    write_with(&args.common.out_dir(), "vi.csv", |out| {
        writeln!(out, "k,K")?;
        for (i, k) in seq.iter().enumerate() {
            writeln!(out, "{i},{}", format_real(k.value()))?;
        }
        Ok(())
    })?;
    let last = seq.last().expect("nonempty").value();
    let iterations = seq.len() - 1;
    if residual > tol * last.max(1.0) {
        return Err(CliError::NonConvergence {
            iterations,
            residual,
        });
    }
    println!("K={last}");
    println!("iterations={iterations}");
    println!("residual={residual:e}");
    Ok(())
}

fn pi(args: PiArgs) -> CliResult<()> {
    let p = args.problem.build()?;
    let l0 = args.l0.unwrap_or(-p.a() / p.b());
    let tol = require_positive("tol", args.tol.unwrap_or(1e-12))?;
    if !p.gain(l0).is_stable() {
        return Err(CliError::invalid(
            "l0",
            format!("gain {l0} is unstable (closed loop {})", p.gain(l0).closed_loop()),
        ));
    }
    let its = p.policy_iteration(l0, tol)?;
    write_with(&args.common.out_dir(), "pi.csv", |out| {
        writeln!(out, "k,L,K")?;
        for (i, it) in its.iter().enumerate() {
            writeln!(out, "{i},{},{}", format_real(it.gain.value()), format_real(it.cost.value()))?;
        }
        Ok(())
    })?;
    let last = its.last().expect("nonempty");
    println!("L={}", last.gain.value());
    println!("K={}", last.cost.value());
    println!("iterations={}", its.len() - 1);
    Ok(())
}

fn newton(args: NewtonArgs) -> CliResult<()> {
    let p = args.problem.build()?;
    let k_star = p.solve_riccati().value();
    let k0 = args.k0.unwrap_or(10.0 * k_star);
    coefficient("k0", k0)?;
    if !p.stability_region().contains(k0) {
        return Err(CliError::invalid("k0", format!("{k0} is outside the region of stability")));
    }
    let max_steps = args.max_steps.unwrap_or(10);
    let tol = require_positive("tol", args.tol.unwrap_or(1e-12))?;
    let done = |k: f64| (k - k_star).abs() <= tol * k_star.max(1.0);
    let mut ks = vec![k0];
    let mut gains = Vec::new();
    while !done(*ks.last().expect("nonempty")) && gains.len() < max_steps {
        let step = p.newton_step(coefficient("k0", *ks.last().expect("nonempty"))?);
        gains.push(step.gain.value());
        ks.push(step.cost.value());
    }
    // |K_{j+1} - K*| / |K_j - K*|^2, reported while the error is resolvable
    let ratios: Vec<Option<f64>> = (0..ks.len())
        .map(|j| {
            let e = ks[j] - k_star;
            (j + 1 < ks.len() && e.abs() > 1e-6 * k_star.max(1.0))
                .then(|| (ks[j + 1] - k_star).abs() / (e * e))
        })
        .collect();
    write_with(&args.common.out_dir(), "newton.csv", |out| {
        writeln!(out, "k,K,L,error,ratio")?;
        for (j, k) in ks.iter().enumerate() {
            let l = gains.get(j).map_or(String::new(), |&l| format_real(l));
            let ratio = ratios[j].map_or(String::new(), format_real);
            writeln!(out, "{j},{},{l},{},{ratio}", format_real(*k), format_real(k - k_star))?;
        }
        Ok(())
    })?;
    let last = *ks.last().expect("nonempty");
    if !done(last) {
        return Err(CliError::NonConvergence {
            iterations: gains.len(),
            residual: (last - k_star).abs(),
        });
    }
    let max_ratio = ratios.iter().flatten().fold(0.0f64, |m, &r| m.max(r));
    println!("K={last}");
    println!("steps={}", gains.len());
    println!("max_ratio={max_ratio}");
    Ok(())
}

fn sweep_stability(args: SweepStabilityArgs) -> CliResult<()> {
    let p = args.problem.build()?;
    let region = p.stability_region();
    let grid = match &args.k_grid {
        Some(text) => parse_grid("k_grid", text)?,
        None => {
            let top = match region.k_s() {
                Some(ks) if ks > 0.0 => 3.0 * ks,
                _ => 3.0 * p.solve_riccati().value(),
            };
            (0..=60).map(|i| top * i as f64 / 60.0).collect()
        }
    };
    if grid.iter().any(|&k| k < 0.0) {
        return Err(CliError::invalid("k_grid", "coefficients must be >= 0"));
    }
    let k_tilde = coefficient("k_tilde", args.k_tilde.unwrap_or(0.0))?;
    let ell_max = args.ell_max.unwrap_or(64);
    if ell_max == 0 {
        return Err(CliError::invalid("ell_max", "must be >= 1"));
    }
    let dir = args.common.out_dir();
    write_with(&dir, "stability.csv", |out| {
        writeln!(out, "K,in_region,closed_loop,K_newton")?;
        for &k in &grid {
            let step = p.newton_step(Coefficient::new(k).expect("checked nonnegative"));
            writeln!(
                out,
                "{},{},{},{}",
                format_real(k),
                u8::from(region.contains(k)),
                format_real(step.gain.closed_loop()),
                format_real(step.cost.value())
            )?;
        }
        Ok(())
    })?;
    let depth: Vec<_> = (1..=ell_max)
        .map(|ell| p.lookahead(k_tilde, ell, 0, None))
        .collect::<Result<_, _>>()?;
    write_with(&dir, "lookahead_depth.csv", |out| {
        writeln!(out, "ell,K_start,closed_loop,cost")?;
        for (i, d) in depth.iter().enumerate() {
            writeln!(
                out,
                "{},{},{},{}",
                i + 1,
                format_real(d.effective_start.value()),
                format_real(d.gain.closed_loop()),
                format_real(d.cost.value())
            )?;
        }
        Ok(())
    })?;
    // smallest ell from which every deeper lookahead is stable
    let ell0 = depth
        .iter()
        .rposition(|d| !d.cost.is_finite())
        .map_or(1, |i| i + 2);
    match region.k_s() {
        Some(ks) => println!("K_S={ks}"),
        None => println!("K_S=none"),
    }
    if ell0 <= ell_max {
        println!("ell0={ell0}");
    } else {
        println!("ell0=none");
    }
    Ok(())
}
