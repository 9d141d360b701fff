//! Comparison solvers and the high-precision Newton oracle.
//!
//! First-order methods charge one processed sample per stochastic iteration
//! (or `n` per full-gradient iteration for GD), the same axis the k-TAN trace
//! uses, so traces from every method can be overlaid.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::risk::{Dataset, RiskConfig, RiskView};
use crate::solver::{self, EigBackend, RunOutcome, SolverConfig};
use crate::trace::{AttemptKind, Stopwatch, TraceRecord, WorkMeter};
use crate::{Error, Result};

/// Iterates with a norm above this are treated as divergence.
pub const DIVERGENCE_NORM: f64 = 1e8;
/// Armijo sufficient-decrease fraction of the oracle line search.
pub const ARMIJO_SLOPE: f64 = 0.25;
/// Step shrink factor of the oracle line search.
pub const ARMIJO_SHRINK: f64 = 0.5;
pub const ORACLE_MAX_ITERS: usize = 200;
pub const ORACLE_DEFAULT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Gd,
    Sgd,
    Saga,
    AdaNewton,
    NewtonOracle,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Gd => "gd",
            Method::Sgd => "sgd",
            Method::Saga => "saga",
            Method::AdaNewton => "adanewton",
            Method::NewtonOracle => "newton_oracle",
        }
    }

    pub fn is_first_order(self) -> bool {
        matches!(self, Method::Gd | Method::Sgd | Method::Saga)
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gd" => Ok(Method::Gd),
            "sgd" => Ok(Method::Sgd),
            "saga" => Ok(Method::Saga),
            "adanewton" => Ok(Method::AdaNewton),
            "newton_oracle" | "oracle" => Ok(Method::NewtonOracle),
            other => Err(Error::validation(format!("unknown method '{other}'"))),
        }
    }
}

/// Settings of a stochastic first-order run.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineConfig {
    pub method: Method,
    /// Constant step size η.
    pub step_size: f64,
    /// Iteration budget; each iteration draws one sample.
    pub iterations: u64,
    /// Wall-clock budget, checked between iterations.
    pub budget_ms: Option<u64>,
    /// Seed of the uniform with-replacement index stream.
    pub seed: u64,
    /// Trace every this many iterations (0: only the final iterate).
    pub log_every: u64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            method: Method::Sgd,
            step_size: 0.08,
            iterations: 0,
            budget_ms: None,
            seed: 0,
            log_every: 0,
        }
    }
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.method.is_first_order() && !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::validation(format!(
                "step size must be positive, got {}",
                self.step_size
            )));
        }
        Ok(())
    }
}

/// Result of a first-order run.
#[derive(Debug, Clone)]
pub struct BaselineOutcome {
    pub x: DVector<f64>,
    pub iterations: u64,
    pub trace: Vec<TraceRecord>,
    /// Iterates matching the trace rows one to one.
    pub iterates: Vec<DVector<f64>>,
}

fn first_order_record(
    iteration: u64,
    n: usize,
    processed: u64,
    evaluated: u64,
    wall_ms: u64,
    grad_norm: f64,
) -> TraceRecord {
    TraceRecord {
        stage: iteration as usize,
        attempt: 0,
        n,
        samples_cum: processed,
        grad_evals_cum: evaluated,
        wall_ms,
        grad_norm,
        k: None,
        epsilon: None,
        alpha_used: None,
        rho_used: None,
        subopt: None,
        accepted: true,
        kind: AttemptKind::FirstOrder,
    }
}

fn check_divergence(x: &DVector<f64>, iteration: u64, trace: &[TraceRecord]) -> Result<()> {
    let norm = x.norm();
    if !(norm <= DIVERGENCE_NORM) {
        return Err(Error::Solver {
            message: format!("iterate norm {norm:.3e} exceeded {DIVERGENCE_NORM:e} at iteration {iteration}"),
            trace: Box::new(trace.to_vec()),
        });
    }
    Ok(())
}

/// Settings of a full-gradient descent run.
#[derive(Debug, Clone, PartialEq)]
pub struct GdConfig {
    /// Iterations performed regardless of the tolerance.
    pub min_iters: usize,
    pub max_iters: usize,
    /// Stop once `‖∇R_n‖ < grad_tol` (after `min_iters`).
    pub grad_tol: f64,
    /// Trace every this many iterations (0: only the final iterate).
    pub log_every: usize,
    pub budget_ms: Option<u64>,
}

impl Default for GdConfig {
    fn default() -> Self {
        Self {
            min_iters: 100,
            max_iters: 100,
            grad_tol: 0.0,
            log_every: 0,
            budget_ms: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GdOutcome {
    pub x: DVector<f64>,
    pub iterations: usize,
    /// `‖∇R_n(x)‖` at the returned point.
    pub grad_norm: f64,
    pub trace: Vec<TraceRecord>,
    pub iterates: Vec<DVector<f64>>,
}

/// Gradient descent with step `1/(M + cV_n)`.
///
/// Each iteration charges `n` processed samples to the view's meter, if any.
pub fn gd_run(view: &RiskView<'_>, cfg: &GdConfig, x0: DVector<f64>) -> Result<GdOutcome> {
    let step = 1.0 / (view.lipschitz() + view.reg());
    let clock = Stopwatch::start();
    let local = WorkMeter::new();
    let meter = view.meter().unwrap_or(&local);
    let view = view.with_meter(meter);
    let n = view.n();
    let mut x = x0;
    let mut trace = Vec::new();
    let mut iterates = Vec::new();
    let mut iterations = 0;
    let mut g = view.grad(&x)?;
    loop {
        let gn = g.norm();
        let done = (iterations >= cfg.min_iters && gn < cfg.grad_tol)
            || iterations >= cfg.max_iters
            || cfg.budget_ms.is_some_and(|b| clock.elapsed_ms() >= b);
        if done || (cfg.log_every > 0 && iterations % cfg.log_every == 0) {
            trace.push(first_order_record(
                iterations as u64,
                n,
                meter.processed(),
                meter.evaluated(),
                clock.elapsed_ms(),
                gn,
            ));
            iterates.push(x.clone());
        }
        if done {
            return Ok(GdOutcome {
                x,
                iterations,
                grad_norm: gn,
                trace,
                iterates,
            });
        }
        x.axpy(-step, &g, 1.0);
        meter.charge_processed(n as u64);
        iterations += 1;
        check_divergence(&x, iterations as u64, &trace)?;
        g = view.grad(&x)?;
    }
}

/// `∇f_i(x) = ℓ'(y_i a_iᵀx) y_i a_i` as the scalar multiplying `a_i`.
fn sample_scalar(view: &RiskView<'_>, x: &DVector<f64>, i: usize) -> f64 {
    let s = view.data().sample(i);
    s.label * view.config().loss.deriv(s.label * s.dot(x.as_slice()))
}

/// One SGD update `x ← x - η(∇f_i(x) + cV_N x)`.
pub fn sgd_step(view: &RiskView<'_>, x: &mut DVector<f64>, i: usize, eta: f64) {
    let d = sample_scalar(view, x, i);
    let reg = view.reg();
    *x *= 1.0 - eta * reg;
    view.data().sample(i).axpy(-eta * d, x.as_mut_slice());
}

fn uniform_indices(n: usize, seed: u64) -> impl Iterator<Item = usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    std::iter::repeat_with(move || rng.random_range(0..n))
}

/// SGD with uniform with-replacement sampling over the view's prefix.
pub fn sgd_run(view: &RiskView<'_>, cfg: &BaselineConfig, x0: DVector<f64>) -> Result<BaselineOutcome> {
    sgd_run_with_indices(view, cfg, x0, uniform_indices(view.n(), cfg.seed))
}

/// [`sgd_run`] driven by a caller-supplied index stream.
pub fn sgd_run_with_indices<I>(
    view: &RiskView<'_>,
    cfg: &BaselineConfig,
    x0: DVector<f64>,
    indices: I,
) -> Result<BaselineOutcome>
where
    I: IntoIterator<Item = usize>,
{
    cfg.validate()?;
    first_order_loop(view, cfg, x0, indices, |x, i| sgd_step(view, x, i, cfg.step_size))
}

fn first_order_loop<I, F>(
    view: &RiskView<'_>,
    cfg: &BaselineConfig,
    mut x: DVector<f64>,
    indices: I,
    mut update: F,
) -> Result<BaselineOutcome>
where
    I: IntoIterator<Item = usize>,
    F: FnMut(&mut DVector<f64>, usize),
{
    let clock = Stopwatch::start();
    let local = WorkMeter::new();
    let meter = view.meter().unwrap_or(&local);
    // Trace gradient norms are diagnostics and stay off the meter.
    let diag = view.unmetered();
    let n = view.n();
    let mut trace = Vec::new();
    let mut iterates = Vec::new();
    let mut log = |x: &DVector<f64>, it: u64, trace: &mut Vec<TraceRecord>| -> Result<()> {
        let gn = diag.grad(x)?.norm();
        trace.push(first_order_record(
            it,
            n,
            meter.processed(),
            meter.evaluated(),
            clock.elapsed_ms(),
            gn,
        ));
        iterates.push(x.clone());
        Ok(())
    };
    let mut it = 0u64;
    let mut indices = indices.into_iter();
    while it < cfg.iterations {
        if cfg.budget_ms.is_some_and(|b| clock.elapsed_ms() >= b) {
            break;
        }
        if cfg.log_every > 0 && it.is_multiple_of(cfg.log_every) {
            log(&x, it, &mut trace)?;
        }
        let Some(i) = indices.next() else { break };
        if i >= n {
            return Err(Error::validation(format!(
                "sample index {i} outside prefix of size {n}"
            )));
        }
        update(&mut x, i);
        meter.charge_processed(1);
        meter.charge_evaluated(1);
        it += 1;
        check_divergence(&x, it, &trace)?;
    }
    log(&x, it, &mut trace)?;
    Ok(BaselineOutcome {
        x,
        iterations: it,
        trace,
        iterates,
    })
}

/// SAGA memory: one scalar per sample plus the running table average.
#[derive(Debug, Clone)]
pub struct SagaState {
    table: Vec<f64>,
    average: DVector<f64>,
}

impl SagaState {
    /// Zero-initialized table.
    pub fn new(view: &RiskView<'_>) -> Self {
        Self {
            table: vec![0.0; view.n()],
            average: DVector::zeros(view.dim()),
        }
    }

    /// Table filled with the per-sample gradients at `x`.
    pub fn at_point(view: &RiskView<'_>, x: &DVector<f64>) -> Self {
        let mut st = Self::new(view);
        for i in 0..view.n() {
            let d = sample_scalar(view, x, i);
            st.table[i] = d;
            view.data()
                .sample(i)
                .axpy(d / view.n() as f64, st.average.as_mut_slice());
        }
        st
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn average(&self) -> &DVector<f64> {
        &self.average
    }

    /// Update direction `∇f_j(x) - table_j a_j + mean(table) + cV_N x`
    /// without modifying the state.
    pub fn direction(&self, view: &RiskView<'_>, x: &DVector<f64>, j: usize) -> DVector<f64> {
        let d = sample_scalar(view, x, j);
        let mut out = &self.average + x * view.reg();
        view.data().sample(j).axpy(d - self.table[j], out.as_mut_slice());
        out
    }

    /// One SAGA update with sample `j`.
    pub fn step(&mut self, view: &RiskView<'_>, x: &mut DVector<f64>, j: usize, eta: f64) {
        let d = sample_scalar(view, x, j);
        let delta = d - self.table[j];
        let s = view.data().sample(j);
        let mut dir = &self.average + &*x * view.reg();
        s.axpy(delta, dir.as_mut_slice());
        x.axpy(-eta, &dir, 1.0);
        s.axpy(delta / view.n() as f64, self.average.as_mut_slice());
        self.table[j] = d;
    }
}

/// SAGA from a zero-initialized table with uniform with-replacement sampling.
pub fn saga_run(view: &RiskView<'_>, cfg: &BaselineConfig, x0: DVector<f64>) -> Result<BaselineOutcome> {
    saga_run_with_indices(view, cfg, x0, uniform_indices(view.n(), cfg.seed))
}

pub fn saga_run_with_indices<I>(
    view: &RiskView<'_>,
    cfg: &BaselineConfig,
    x0: DVector<f64>,
    indices: I,
) -> Result<BaselineOutcome>
where
    I: IntoIterator<Item = usize>,
{
    cfg.validate()?;
    let mut state = SagaState::new(view);
    first_order_loop(view, cfg, x0, indices, |x, j| state.step(view, x, j, cfg.step_size))
}

/// Newton direction `d = (∇²R_n(x))⁻¹ g` and the squared decrement `gᵀd`.
fn newton_direction(view: &RiskView<'_>, x: &DVector<f64>, g: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
    let mut h = view.data_hessian(x)?;
    let r = view.reg();
    for i in 0..h.nrows() {
        h[(i, i)] += r;
    }
    let d = h
        .cholesky()
        .ok_or_else(|| Error::numeric("regularized Hessian is not positive definite"))?
        .solve(g);
    let dec2 = g.dot(&d);
    Ok((d, dec2))
}

/// Step length for the damped Newton step: 1 inside the quadratic region,
/// otherwise Armijo backtracking on `R_n`.
fn newton_step_length(view: &RiskView<'_>, x: &DVector<f64>, d: &DVector<f64>, dec2: f64) -> Result<f64> {
    if dec2.sqrt() < solver::QUADRATIC_REGION {
        return Ok(1.0);
    }
    let plain = view.unmetered();
    let mut t = 1.0;
    for _ in 0..60 {
        let trial = x - d * t;
        if plain.value_difference(&trial, x)? <= -ARMIJO_SLOPE * t * dec2 {
            return Ok(t);
        }
        t *= ARMIJO_SHRINK;
    }
    Err(Error::numeric("line search failed to find a decrease"))
}

/// One damped Newton iteration on `R_n`. The gradient is charged to the
/// view's meter.
pub fn damped_newton_step(view: &RiskView<'_>, x: &DVector<f64>) -> Result<DVector<f64>> {
    let g = view.grad(x)?;
    let (d, dec2) = newton_direction(view, x, &g)?;
    let t = newton_step_length(view, x, &d, dec2)?;
    Ok(x - d * t)
}

#[derive(Debug, Clone)]
pub struct OracleOutcome {
    pub x: DVector<f64>,
    pub iterations: usize,
    pub grad_norm: f64,
}

/// Minimizer of `R_n` to gradient norm `tol`, from the origin.
pub fn newton_oracle(view: &RiskView<'_>, tol: f64) -> Result<OracleOutcome> {
    newton_oracle_from(view, DVector::zeros(view.dim()), tol)
}

/// [`newton_oracle`] from a given start. Never charges the work meter.
pub fn newton_oracle_from(view: &RiskView<'_>, x0: DVector<f64>, tol: f64) -> Result<OracleOutcome> {
    if !(tol >= 0.0) {
        return Err(Error::validation(format!("tolerance must be non-negative, got {tol}")));
    }
    let view = view.unmetered();
    if !view.dense_available() {
        return Err(Error::Capability {
            dim: view.dim(),
            cap: view.dense_cap(),
        });
    }
    let mut x = x0;
    let mut g = view.grad(&x)?;
    for iterations in 0..=ORACLE_MAX_ITERS {
        let gn = g.norm();
        if gn <= tol {
            return Ok(OracleOutcome {
                x,
                iterations,
                grad_norm: gn,
            });
        }
        if iterations == ORACLE_MAX_ITERS {
            break;
        }
        let (d, dec2) = newton_direction(&view, &x, &g)?;
        let t = newton_step_length(&view, &x, &d, dec2)?;
        x.axpy(-t, &d, 1.0);
        g = view.grad(&x)?;
    }
    Err(Error::Oracle(format!(
        "Newton oracle did not reach gradient norm {tol:e} within {ORACLE_MAX_ITERS} iterations (at {:.3e})",
        g.norm()
    )))
}

/// k-TAN with exact inverses (`ρ = 0`, dense factors).
pub fn adanewton_run(data: &Dataset, risk: &RiskConfig, config: &SolverConfig) -> Result<RunOutcome> {
    solver::run(data, risk, &adanewton_config(config))
}

/// The AdaNewton variant of a k-TAN configuration.
pub fn adanewton_config(config: &SolverConfig) -> SolverConfig {
    SolverConfig {
        rho0: 0.0,
        backend: EigBackend::Dense,
        ..config.clone()
    }
}
