//! Python bindings: `ScalarLQ`, `FiniteMDP` and the adaptive experiments.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use dplab::adaptive::{self, NominalDesign, ReplanMode, ScheduleEntry};
use dplab::mdp::random::{random_mdp_seeded, RandomMdpConfig};
use dplab::mdp::{self, CeMode, FiniteMdp, LookaheadSpec, RolloutHorizon, StationaryPolicy, ValueFunction};
use dplab::{Coefficient, ScalarLq};

fn py_err(e: dplab::Error) -> PyErr {
    match e {
        dplab::Error::NonConvergence { .. } => PyRuntimeError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn coef(k: f64) -> PyResult<Coefficient> {
    Coefficient::new(k).map_err(py_err)
}

#[pyclass(name = "ScalarLQ", frozen)]
struct PyScalarLq(ScalarLq);

#[pymethods]
impl PyScalarLq {
    #[new]
    fn new(a: f64, b: f64, q: f64, r: f64) -> PyResult<Self> {
        ScalarLq::new(a, b, q, r).map(PyScalarLq).map_err(py_err)
    }

    #[getter]
    fn a(&self) -> f64 {
        self.0.a()
    }
    #[getter]
    fn b(&self) -> f64 {
        self.0.b()
    }
    #[getter]
    fn q(&self) -> f64 {
        self.0.q()
    }
    #[getter]
    fn r(&self) -> f64 {
        self.0.r()
    }

    fn solve_riccati(&self) -> f64 {
        self.0.solve_riccati().value()
    }

    fn optimal_gain(&self) -> f64 {
        self.0.optimal_gain().value()
    }

    fn greedy_gain(&self, k: f64) -> PyResult<f64> {
        Ok(self.0.greedy_gain(coef(k)?).value())
    }

    fn riccati_operator(&self, k: f64) -> PyResult<f64> {
        Ok(self.0.riccati_operator(coef(k)?).value())
    }

    fn policy_operator(&self, l: f64, k: f64) -> PyResult<f64> {
        Ok(self.0.policy_operator(l, coef(k)?).value())
    }

    fn policy_cost(&self, l: f64) -> f64 {
        self.0.policy_cost(l).value()
    }

    fn value_iterate(&self, k0: f64, n: usize) -> PyResult<Vec<f64>> {
        Ok(self.0.value_iterate(coef(k0)?, n).iter().map(|k| k.value()).collect())
    }

    /// `(gain, cost)` of the greedy gain at `k`.
    fn newton_step(&self, k: f64) -> PyResult<(f64, f64)> {
        let s = self.0.newton_step(coef(k)?);
        Ok((s.gain.value(), s.cost.value()))
    }

    fn tangent_newton_iterate(&self, k: f64) -> PyResult<f64> {
        Ok(self.0.tangent_newton_iterate(coef(k)?))
    }

    #[pyo3(signature = (k_tilde, ell, m = 0, base = None))]
    fn lookahead(&self, k_tilde: f64, ell: usize, m: usize, base: Option<f64>) -> PyResult<(f64, f64)> {
        let s = self.0.lookahead(coef(k_tilde)?, ell, m, base).map_err(py_err)?;
        Ok((s.gain.value(), s.cost.value()))
    }

    fn rollout(&self, base: f64) -> PyResult<(f64, f64)> {
        let s = self.0.rollout(base).map_err(py_err)?;
        Ok((s.gain.value(), s.cost.value()))
    }

    fn double_newton(&self, k_tilde: f64) -> PyResult<(f64, f64)> {
        let s = self.0.double_newton(coef(k_tilde)?).map_err(py_err)?;
        Ok((s.gain.value(), s.cost.value()))
    }

    #[pyo3(signature = (l0, tol = 1e-12))]
    fn policy_iteration(&self, l0: f64, tol: f64) -> PyResult<Vec<(f64, f64)>> {
        let its = self.0.policy_iteration(l0, tol).map_err(py_err)?;
        Ok(its.iter().map(|it| (it.gain.value(), it.cost.value())).collect())
    }

    /// `K_S`, or `None` when every `K >= 0` is in the region of stability.
    fn stability_threshold(&self) -> Option<f64> {
        self.0.stability_region().k_s()
    }

    fn in_stability_region(&self, k: f64) -> bool {
        self.0.stability_region().contains(k)
    }

    fn __repr__(&self) -> String {
        format!("ScalarLQ(a={}, b={}, q={}, r={})", self.0.a(), self.0.b(), self.0.q(), self.0.r())
    }
}

fn ce_mode(name: &str) -> PyResult<CeMode> {
    match name {
        "exact" => Ok(CeMode::Exact),
        "ce_after_first" => Ok(CeMode::CeAfterFirst),
        "ce_all" => Ok(CeMode::CeAll),
        _ => Err(PyValueError::new_err(format!("invalid ce: {name:?}"))),
    }
}

#[pyclass(name = "FiniteMDP", frozen)]
struct PyFiniteMdp(FiniteMdp);

impl PyFiniteMdp {
    fn values(&self, j: Vec<f64>) -> PyResult<ValueFunction> {
        if j.len() != self.0.state_count() {
            return Err(PyValueError::new_err(format!(
                "expected {} values, got {}",
                self.0.state_count(),
                j.len()
            )));
        }
        ValueFunction::new(j).map_err(py_err)
    }

    fn policy(&self, choice: Option<Vec<usize>>) -> PyResult<StationaryPolicy> {
        let choice = choice.unwrap_or_else(|| {
            (0..self.0.state_count())
                .map(|x| self.0.controls(x).first().map_or(0, |c| c.id))
                .collect()
        });
        StationaryPolicy::new(&self.0, choice).map_err(py_err)
    }
}

#[pymethods]
impl PyFiniteMdp {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        mdp::mdp_from_json(text).map(PyFiniteMdp).map_err(py_err)
    }

    #[staticmethod]
    fn load(path: std::path::PathBuf) -> PyResult<Self> {
        mdp::load_mdp(&path).map(PyFiniteMdp).map_err(py_err)
    }

    #[staticmethod]
    #[pyo3(signature = (seed, alpha = 0.9, proper = false))]
    fn random(seed: u64, alpha: f64, proper: bool) -> Self {
        PyFiniteMdp(random_mdp_seeded(seed, RandomMdpConfig { alpha, ensure_proper: proper }))
    }

    fn to_json(&self) -> String {
        mdp::mdp_to_json(&self.0)
    }

    #[getter]
    fn states(&self) -> usize {
        self.0.state_count()
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.0.discount()
    }

    fn bellman(&self, j: Vec<f64>) -> PyResult<Vec<f64>> {
        let tj = mdp::bellman_operator(&self.0, &self.values(j)?).map_err(py_err)?;
        Ok(tj.values().to_vec())
    }

    fn greedy(&self, j: Vec<f64>) -> PyResult<Vec<usize>> {
        let mu = mdp::greedy_policy(&self.0, &self.values(j)?).map_err(py_err)?;
        Ok(mu.choices().to_vec())
    }

    fn evaluate(&self, policy: Vec<usize>) -> PyResult<Vec<f64>> {
        let j = mdp::policy_evaluation_mdp(&self.0, &self.policy(Some(policy))?).map_err(py_err)?;
        Ok(j.values().to_vec())
    }

    fn is_proper(&self, policy: Vec<usize>) -> PyResult<bool> {
        let p = mdp::properness_check(&self.0, &self.policy(Some(policy))?).map_err(py_err)?;
        Ok(p == mdp::Properness::Stable)
    }

    /// `(values, iterations)` of value iteration from zero.
    #[pyo3(signature = (tol = 1e-10, max_iters = 100_000))]
    fn value_iteration(&self, tol: f64, max_iters: usize) -> PyResult<(Vec<f64>, usize)> {
        let zeros = ValueFunction::zeros(self.0.state_count());
        let out = mdp::value_iteration_mdp(&self.0, &zeros, tol, max_iters).map_err(py_err)?;
        Ok((out.values.values().to_vec(), out.iterations))
    }

    /// `(policy, values)`; starts from the lowest control ids by default.
    #[pyo3(signature = (initial = None))]
    fn policy_iteration(&self, initial: Option<Vec<usize>>) -> PyResult<(Vec<usize>, Vec<f64>)> {
        let out = mdp::policy_iteration_mdp(&self.0, &self.policy(initial)?).map_err(py_err)?;
        Ok((out.policy.choices().to_vec(), out.values.values().to_vec()))
    }

    #[pyo3(signature = (base, m = None))]
    fn rollout(&self, base: Vec<usize>, m: Option<usize>) -> PyResult<Vec<usize>> {
        let horizon = m.map_or(RolloutHorizon::Infinite, RolloutHorizon::Truncated);
        let mu = mdp::rollout_policy_mdp(&self.0, &self.policy(Some(base))?, horizon).map_err(py_err)?;
        Ok(mu.choices().to_vec())
    }

    /// `(policy, backed-up values)` of the lookahead policy at every state.
    #[pyo3(signature = (terminal, ell = 1, m = 0, base = None, ce = "exact"))]
    fn lookahead(
        &self,
        terminal: Vec<f64>,
        ell: usize,
        m: usize,
        base: Option<Vec<usize>>,
        ce: &str,
    ) -> PyResult<(Vec<usize>, Vec<f64>)> {
        let spec = self.spec(terminal, ell, m, base, ce)?;
        let (mu, v) = mdp::lookahead_policy(&self.0, &spec).map_err(py_err)?;
        Ok((mu.choices().to_vec(), v.values().to_vec()))
    }

    /// `(control, value, nodes, leaves)` from the explicit search tree at `state`.
    #[pyo3(signature = (state, terminal, ell = 1, m = 0, base = None, ce = "exact"))]
    fn lookahead_at(
        &self,
        state: usize,
        terminal: Vec<f64>,
        ell: usize,
        m: usize,
        base: Option<Vec<usize>>,
        ce: &str,
    ) -> PyResult<(usize, f64, u64, u64)> {
        let spec = self.spec(terminal, ell, m, base, ce)?;
        let d = mdp::lookahead_policy_mdp(&self.0, &spec, state).map_err(py_err)?;
        Ok((d.control, d.value, d.stats.nodes, d.stats.leaves))
    }

    /// `(holds, violating states)` for `J >= T J`.
    fn lyapunov(&self, j: Vec<f64>) -> PyResult<(bool, Vec<usize>)> {
        let rep = mdp::lyapunov_check(&self.0, &self.values(j)?).map_err(py_err)?;
        Ok((rep.holds, rep.violations))
    }
}

impl PyFiniteMdp {
    fn spec(
        &self,
        terminal: Vec<f64>,
        ell: usize,
        m: usize,
        base: Option<Vec<usize>>,
        ce: &str,
    ) -> PyResult<LookaheadSpec> {
        let mut spec = LookaheadSpec::one_step(self.values(terminal)?)
            .with_depth(ell)
            .with_ce(ce_mode(ce)?);
        if m > 0 {
            let base = base.ok_or_else(|| PyValueError::new_err("invalid base: required when m > 0"))?;
            spec = spec.with_truncated_rollout(m, self.policy(Some(base))?);
        }
        Ok(spec)
    }
}

fn design(nominal_b: f64, nominal_r: f64) -> PyResult<NominalDesign> {
    ScalarLq::new(1.0, nominal_b, 1.0, nominal_r)
        .map(NominalDesign::new)
        .map_err(py_err)
}

/// Rows `(b, r, K_star, K_rollout, K_L)` over the grid product, `b` outermost.
#[pyfunction]
#[pyo3(signature = (b_grid, r_grid, nominal_b = 2.0, nominal_r = 0.5))]
#[allow(clippy::type_complexity)]
fn robustness_sweep(
    b_grid: Vec<f64>,
    r_grid: Vec<f64>,
    nominal_b: f64,
    nominal_r: f64,
) -> PyResult<Vec<(f64, f64, f64, f64, f64)>> {
    let pts = adaptive::robustness_sweep(&design(nominal_b, nominal_r)?, &b_grid, &r_grid).map_err(py_err)?;
    Ok(pts.iter().map(|p| (p.b, p.r, p.k_star, p.k_rollout, p.k_l)).collect())
}

/// `(x, u, stage_cost, total_cost, tail_bound, diverged)`; `schedule` holds
/// `(time, b, r)` triples.
#[pyfunction]
#[pyo3(signature = (schedule, x0 = 1.0, horizon = 40, mode = "rollout_replan", nominal_b = 2.0, nominal_r = 0.5))]
#[allow(clippy::type_complexity)]
fn replan_simulation(
    schedule: Vec<(usize, f64, f64)>,
    x0: f64,
    horizon: usize,
    mode: &str,
    nominal_b: f64,
    nominal_r: f64,
) -> PyResult<(Vec<f64>, Vec<f64>, Vec<f64>, f64, f64, bool)> {
    let mode = ReplanMode::ALL
        .into_iter()
        .find(|m| m.name() == mode)
        .ok_or_else(|| PyValueError::new_err(format!("invalid mode: {mode:?}")))?;
    let schedule: Vec<ScheduleEntry> = schedule
        .into_iter()
        .map(|(time, b, r)| ScheduleEntry { time, b, r })
        .collect();
    let t = adaptive::replan_simulation(&design(nominal_b, nominal_r)?, &schedule, x0, horizon, mode)
        .map_err(py_err)?;
    Ok((
        t.steps.iter().map(|s| s.x).collect(),
        t.steps.iter().map(|s| s.u).collect(),
        t.steps.iter().map(|s| s.stage_cost).collect(),
        t.total_cost,
        t.tail_bound,
        t.diverged,
    ))
}

/// `(K, ratio)` on `K* + 2^-i` for the problem with parameters `(b, r)`.
#[pyfunction]
#[pyo3(signature = (b, r, halvings = 20))]
fn superlinear_ratio(b: f64, r: f64, halvings: usize) -> PyResult<Vec<(f64, f64)>> {
    let p = ScalarLq::new(1.0, b, 1.0, r).map_err(py_err)?;
    let grid = adaptive::geometric_grid(p.solve_riccati().value(), halvings);
    Ok(adaptive::superlinear_ratio(&p, &grid).points.iter().map(|q| (q.k, q.ratio)).collect())
}

#[pymodule]
fn pydplab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyScalarLq>()?;
    m.add_class::<PyFiniteMdp>()?;
    m.add_function(wrap_pyfunction!(robustness_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(replan_simulation, m)?)?;
    m.add_function(wrap_pyfunction!(superlinear_ratio, m)?)?;
    Ok(())
}
