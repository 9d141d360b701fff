//! The k-TAN main loop.
//!
//! Each stage grows the prefix from `m` to `n = min(⌊αm⌋, N)` and takes one
//! step `x_n = x_m - Ĥ⁻¹ ∇R_n(x_m)`, where `Ĥ` keeps the data-Hessian
//! eigenpairs above `ρ c V_n` and replaces the rest by the ridge `c V_n`. The
//! stage is accepted once `‖∇R_n(x_n)‖ < √(2c) V_n`; otherwise `α` and `ρ` shrink
//! by `β` and `δ` and the step is retried from `x_m`.

mod theory;

pub use theory::{
    cond1_lhs, cond2_lhs, decrement_step_bound, k_constant, newton_decrement, simplified_lhs1, simplified_lhs2,
    stage_report, stage_subopt, subopt_step_bound, suggested_c_threshold, suggested_rho, theory_report,
    DiagnosticsReport, SuboptSource, TheoryInputs, QUADRATIC_REGION,
};

use nalgebra::DVector;

use crate::baselines::{damped_newton_step, gd_run, GdConfig};
use crate::linalg::{
    full_sym_eig, randomized_truncated_eig, select_rank, RandomizedEigParams, TruncatedEig, TruncatedInverse,
};
use crate::risk::{Dataset, RiskConfig, RiskView};
use crate::trace::{AttemptKind, Stopwatch, TraceRecord, WorkMeter};
use crate::{Error, Result};

/// How the truncated factors of the data Hessian are obtained.
#[derive(Debug, Clone, PartialEq)]
pub enum EigBackend {
    /// Assemble `∇²L_n` and decompose it with Jacobi.
    Dense,
    /// Matrix-free randomized range finder on Hessian-vector products.
    Randomized(RandomizedEigParams),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Sample growth factor `α₀ > 1`.
    pub alpha0: f64,
    /// Truncation factor `ρ₀ ∈ [0, 1]`; 0 keeps every eigenpair.
    pub rho0: f64,
    /// Backtracking multiplier for `α`.
    pub beta: f64,
    /// Backtracking multiplier for `ρ`.
    pub delta: f64,
    /// Initial prefix size.
    pub m0: usize,
    /// Failed attempts allowed per stage before the damped-Newton safeguard.
    pub max_backtracks: usize,
    pub backend: EigBackend,
    /// Seed for the randomized backend.
    pub seed: u64,
    /// Warm-start gradient descent runs at least this many iterations.
    pub init_min_iters: usize,
    pub init_max_iters: usize,
    pub safeguard_max_iters: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            alpha0: 2.0,
            rho0: 0.1,
            beta: 0.5,
            delta: 0.5,
            m0: 124,
            max_backtracks: 10,
            backend: EigBackend::Dense,
            seed: 0,
            init_min_iters: 100,
            init_max_iters: 1000,
            safeguard_max_iters: 50,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha0 > 1.0) || !self.alpha0.is_finite() {
            return Err(Error::validation(format!("alpha0 must exceed 1, got {}", self.alpha0)));
        }
        if !(0.0..=1.0).contains(&self.rho0) {
            return Err(Error::validation(format!("rho0 must lie in [0, 1], got {}", self.rho0)));
        }
        for (name, v) in [("beta", self.beta), ("delta", self.delta)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::validation(format!("{name} must lie in (0, 1), got {v}")));
            }
        }
        if self.m0 == 0 {
            return Err(Error::validation("m0 must be at least 1"));
        }
        if self.init_min_iters > self.init_max_iters {
            return Err(Error::validation("init_min_iters exceeds init_max_iters"));
        }
        Ok(())
    }
}

/// Iterate, prefix sizes, work meters and the trace of a run.
#[derive(Debug, Clone)]
pub struct SolverState {
    pub x: DVector<f64>,
    pub m: usize,
    pub n: usize,
    pub samples_cum: u64,
    pub grad_evals_cum: u64,
    pub wall_ms: u64,
    pub trace: Vec<TraceRecord>,
}

#[derive(Debug, Clone)]
pub struct InitOutcome {
    pub x: DVector<f64>,
    pub iterations: usize,
    pub grad_norm: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub state: SolverState,
    /// The iterate after each trace record.
    pub iterates: Vec<DVector<f64>>,
    pub init: InitOutcome,
}

impl RunOutcome {
    pub fn x(&self) -> &DVector<f64> {
        &self.state.x
    }

    pub fn trace(&self) -> &[TraceRecord] {
        &self.state.trace
    }

    /// Number of accepted truncated-Newton stages.
    pub fn stages(&self) -> usize {
        self.state
            .trace
            .iter()
            .filter(|r| r.accepted && r.kind == AttemptKind::Stage)
            .count()
    }

    pub fn backtracks(&self) -> usize {
        self.state.trace.iter().filter(|r| !r.accepted).count()
    }
}

/// Everything an observer sees about one attempt.
#[derive(Debug)]
pub struct StageEvent<'a> {
    pub stage: usize,
    pub attempt: usize,
    pub m: usize,
    pub n: usize,
    pub x_m: &'a DVector<f64>,
    pub x_n: &'a DVector<f64>,
    pub k: usize,
    pub epsilon: f64,
    pub alpha: f64,
    pub rho: f64,
    pub accepted: bool,
    pub kind: AttemptKind,
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub x_n: DVector<f64>,
    pub k: usize,
    pub epsilon: f64,
    /// `‖∇R_n(x_m)‖`.
    pub grad_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccuracyCheck {
    pub pass: bool,
    pub grad_norm: f64,
    /// `√(2c) V_n`.
    pub threshold: f64,
    /// Strong-convexity bound `‖∇R_n‖² / (2 c V_n)` on the suboptimality.
    pub bound: f64,
}

impl AccuracyCheck {
    pub fn from_grad_norm(grad_norm: f64, c: f64, accuracy: f64) -> Self {
        let threshold = (2.0 * c).sqrt() * accuracy;
        AccuracyCheck {
            pass: grad_norm < threshold,
            grad_norm,
            threshold,
            bound: grad_norm * grad_norm / (2.0 * c * accuracy),
        }
    }
}

/// Exit test `‖∇R_n(x)‖ < √(2c) V_n` (strict).
pub fn accuracy_check(view: &RiskView<'_>, x: &DVector<f64>) -> Result<AccuracyCheck> {
    let g = view.grad(x)?;
    Ok(AccuracyCheck::from_grad_norm(
        g.norm(),
        view.config().c,
        view.accuracy(),
    ))
}

/// Next prefix size `min(⌊αm⌋, N)`, never below `m + 1`.
pub fn next_sample_size(m: usize, alpha: f64, total: usize) -> usize {
    let grown = (alpha * m as f64).floor() as usize;
    grown.max(m + 1).min(total)
}

/// Truncated factors of `∇²L_n(x)` at threshold `ρ c V_n`; `ρ = 0` keeps all `p` pairs.
pub fn truncated_factors(
    view: &RiskView<'_>,
    x: &DVector<f64>,
    rho: f64,
    backend: &EigBackend,
) -> Result<TruncatedEig> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::validation(format!("rho must lie in [0, 1], got {rho}")));
    }
    let p = view.dim();
    if rho == 0.0 {
        let full = full_sym_eig(&view.data_hessian(x)?)?;
        return TruncatedEig::from_sym_eig(&full, p);
    }
    let threshold = rho * view.reg();
    match backend {
        EigBackend::Dense => {
            let full = full_sym_eig(&view.data_hessian(x)?)?;
            let clipped: Vec<f64> = full.eigvals.iter().map(|&v| v.max(0.0)).collect();
            let k = select_rank(&clipped, threshold)?;
            TruncatedEig::from_sym_eig(&full, k)
        }
        EigBackend::Randomized(params) => {
            let weights = view.hessian_weights(x)?;
            randomized_truncated_eig(
                |block| view.apply_weighted_block(&weights, block),
                p,
                threshold,
                params,
                None,
            )
        }
    }
}

/// One k-TAN step from `x_m` on `R_n`.
pub fn ktan_step(x_m: &DVector<f64>, view_n: &RiskView<'_>, rho: f64, backend: &EigBackend) -> Result<StepOutcome> {
    let g = view_n.grad(x_m)?;
    let factors = truncated_factors(view_n, x_m, rho, backend)?;
    let k = factors.rank();
    let inverse = TruncatedInverse::new(factors, view_n.reg())?;
    let epsilon = inverse.epsilon();
    let x_n = x_m - inverse.apply(&g)?;
    if x_n.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric("k-TAN step produced a non-finite iterate"));
    }
    Ok(StepOutcome {
        x_n,
        k,
        epsilon,
        grad_norm: g.norm(),
    })
}

/// Gradient descent on `R_{m0}` from the origin with step `1/(M + cV_{m0})`,
/// for at least `init_min_iters` iterations and until the entry condition
/// `‖∇R_{m0}‖ < √(2c) V_{m0}` holds.
pub fn init_seed(
    data: &Dataset,
    risk: &RiskConfig,
    config: &SolverConfig,
    meter: Option<&WorkMeter>,
) -> Result<InitOutcome> {
    if config.m0 > data.len() {
        return Err(Error::validation(format!(
            "m0 = {} exceeds the dataset size {}",
            config.m0,
            data.len()
        )));
    }
    // The warm start is excluded from the processed-sample axis; only its
    // gradient evaluations are carried over.
    let local = WorkMeter::new();
    let view = RiskView::new(data, config.m0, *risk)?.with_meter(&local);
    let bound = (2.0 * risk.c).sqrt() * view.accuracy();
    let gd = gd_run(
        &view,
        &GdConfig {
            min_iters: config.init_min_iters,
            max_iters: config.init_max_iters,
            grad_tol: bound,
            log_every: 0,
            budget_ms: None,
        },
        DVector::zeros(data.dim()),
    )?;
    if let Some(m) = meter {
        m.charge_evaluated(local.evaluated());
    }
    if !(gd.grad_norm < bound) {
        return Err(Error::Init {
            iterations: gd.iterations,
            grad_norm: gd.grad_norm,
            bound,
        });
    }
    Ok(InitOutcome {
        x: gd.x,
        iterations: gd.iterations,
        grad_norm: gd.grad_norm,
    })
}

/// Runs k-TAN to the statistical accuracy of the full dataset.
pub fn run(data: &Dataset, risk: &RiskConfig, config: &SolverConfig) -> Result<RunOutcome> {
    run_observed(data, risk, config, |_| {})
}

/// [`run`] with a callback invoked after every attempt.
pub fn run_observed<F>(data: &Dataset, risk: &RiskConfig, config: &SolverConfig, mut observer: F) -> Result<RunOutcome>
where
    F: FnMut(&StageEvent<'_>),
{
    config.validate()?;
    risk.validate()?;
    let total = data.len();
    let clock = Stopwatch::start();
    let meter = WorkMeter::new();
    let init = init_seed(data, risk, config, Some(&meter))?;

    let mut state = SolverState {
        x: init.x.clone(),
        m: config.m0,
        n: config.m0,
        samples_cum: 0,
        grad_evals_cum: meter.evaluated(),
        wall_ms: clock.elapsed_ms(),
        trace: Vec::new(),
    };
    let mut iterates = Vec::new();
    let mut stage = 0;

    while state.n < total {
        stage += 1;
        state.m = state.n;
        let m = state.m;
        let x_m = state.x.clone();
        let mut alpha = config.alpha0;
        let mut rho = config.rho0;
        let mut attempt = 0;
        loop {
            let n = next_sample_size(m, alpha, total);
            let view = RiskView::new(data, n, *risk)?.with_meter(&meter);
            meter.charge_processed(n as u64);
            let step = match ktan_step(&x_m, &view, rho, &config.backend) {
                Ok(step) => Some(step),
                Err(Error::Numeric(_)) => None,
                Err(e) => return Err(e),
            };
            let (check, k, epsilon, x_n) = match step {
                Some(s) => (accuracy_check(&view, &s.x_n)?, s.k, s.epsilon, s.x_n),
                None => (
                    AccuracyCheck::from_grad_norm(f64::INFINITY, risk.c, view.accuracy()),
                    0,
                    f64::NAN,
                    x_m.clone(),
                ),
            };
            state.n = n;
            state.samples_cum = meter.processed();
            state.grad_evals_cum = meter.evaluated();
            state.wall_ms = clock.elapsed_ms();
            state.trace.push(TraceRecord {
                stage,
                attempt,
                n,
                samples_cum: state.samples_cum,
                grad_evals_cum: state.grad_evals_cum,
                wall_ms: state.wall_ms,
                grad_norm: check.grad_norm,
                k: Some(k),
                epsilon: Some(epsilon),
                alpha_used: Some(alpha),
                rho_used: Some(rho),
                subopt: None,
                accepted: check.pass,
                kind: AttemptKind::Stage,
            });
            observer(&StageEvent {
                stage,
                attempt,
                m,
                n,
                x_m: &x_m,
                x_n: &x_n,
                k,
                epsilon,
                alpha,
                rho,
                accepted: check.pass,
                kind: AttemptKind::Stage,
            });
            if check.pass {
                iterates.push(x_n.clone());
                state.x = x_n;
                break;
            }
            iterates.push(x_m.clone());
            attempt += 1;
            alpha *= config.beta;
            rho *= config.delta;
            if attempt >= config.max_backtracks {
                state.x = safeguard(
                    data,
                    risk,
                    config,
                    &meter,
                    &clock,
                    &mut state,
                    &mut iterates,
                    &mut observer,
                    stage,
                    attempt,
                    m,
                    n,
                    &x_m,
                )?;
                break;
            }
        }
    }
    state.samples_cum = meter.processed();
    state.grad_evals_cum = meter.evaluated();
    state.wall_ms = clock.elapsed_ms();
    Ok(RunOutcome { state, iterates, init })
}

/// Damped Newton on the frozen prefix `n` until the exit test passes.
#[allow(clippy::too_many_arguments)]
fn safeguard<F>(
    data: &Dataset,
    risk: &RiskConfig,
    config: &SolverConfig,
    meter: &WorkMeter,
    clock: &Stopwatch,
    state: &mut SolverState,
    iterates: &mut Vec<DVector<f64>>,
    observer: &mut F,
    stage: usize,
    first_attempt: usize,
    m: usize,
    n: usize,
    x_m: &DVector<f64>,
) -> Result<DVector<f64>>
where
    F: FnMut(&StageEvent<'_>),
{
    let view = RiskView::new(data, n, *risk)?.with_meter(meter);
    let p = data.dim();
    let mut x = x_m.clone();
    for i in 0..config.safeguard_max_iters {
        meter.charge_processed(n as u64);
        x = damped_newton_step(&view, &x)?;
        let check = accuracy_check(&view, &x)?;
        state.samples_cum = meter.processed();
        state.grad_evals_cum = meter.evaluated();
        state.wall_ms = clock.elapsed_ms();
        state.trace.push(TraceRecord {
            stage,
            attempt: first_attempt + i,
            n,
            samples_cum: state.samples_cum,
            grad_evals_cum: state.grad_evals_cum,
            wall_ms: state.wall_ms,
            grad_norm: check.grad_norm,
            k: Some(p),
            epsilon: Some(0.0),
            alpha_used: Some(n as f64 / m as f64),
            rho_used: Some(0.0),
            subopt: None,
            accepted: check.pass,
            kind: AttemptKind::Safeguard,
        });
        iterates.push(x.clone());
        observer(&StageEvent {
            stage,
            attempt: first_attempt + i,
            m,
            n,
            x_m,
            x_n: &x,
            k: p,
            epsilon: 0.0,
            alpha: n as f64 / m as f64,
            rho: 0.0,
            accepted: check.pass,
            kind: AttemptKind::Safeguard,
        });
        if check.pass {
            return Ok(x);
        }
    }
    Err(Error::Solver {
        message: format!(
            "safeguard did not reach accuracy on n = {n} within {} iterations",
            config.safeguard_max_iters
        ),
        trace: Box::new(state.trace.clone()),
    })
}
