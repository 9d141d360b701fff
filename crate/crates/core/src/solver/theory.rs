//! Numeric evaluators for the convergence certificates of k-TAN.
//!
//! None of these feed back into the solver's control flow; they exist to be
//! checked against measured quantities.

use nalgebra::{DMatrix, DVector};

use crate::risk::{RiskView, Schedule};
use crate::{Error, Result};

/// Newton decrement below which `x` is in the quadratic convergence region.
pub const QUADRATIC_REGION: f64 = 0.25;

/// `λ_n(x) = (∇R_nᵀ ∇²R_n⁻¹ ∇R_n)^{1/2}`.
///
/// Uses a Cholesky solve when the dense Hessian is available and conjugate
/// gradients on Hessian-vector products otherwise. Never charges the work meter.
pub fn newton_decrement(view: &RiskView<'_>, x: &DVector<f64>) -> Result<f64> {
    let plain = view.unmetered();
    let g = plain.grad(x)?;
    let r = plain.reg();
    let d = if plain.dense_available() {
        let mut h = plain.data_hessian(x)?;
        for i in 0..h.nrows() {
            h[(i, i)] += r;
        }
        h.cholesky()
            .ok_or_else(|| Error::numeric("regularized Hessian is not positive definite"))?
            .solve(&g)
    } else {
        let weights = plain.hessian_weights(x)?;
        conjugate_gradient(
            |v| {
                let block = DMatrix::from_column_slice(v.len(), 1, v.as_slice());
                let hv: DVector<f64> = plain.apply_weighted_block(&weights, &block).column(0).into_owned();
                hv + v * r
            },
            &g,
            1e-10,
        )?
    };
    Ok(g.dot(&d).max(0.0).sqrt())
}

fn conjugate_gradient<F>(mut apply: F, b: &DVector<f64>, rel_tol: f64) -> Result<DVector<f64>>
where
    F: FnMut(&DVector<f64>) -> DVector<f64>,
{
    let bnorm = b.norm();
    let mut x = DVector::zeros(b.len());
    if bnorm == 0.0 {
        return Ok(x);
    }
    let mut r = b.clone();
    let mut p = r.clone();
    let mut rr = r.norm_squared();
    let max_iters = 10 * b.len().max(10);
    for _ in 0..max_iters {
        if rr.sqrt() <= rel_tol * bnorm {
            return Ok(x);
        }
        let ap = apply(&p);
        let pap = p.dot(&ap);
        if !(pap > 0.0) {
            return Err(Error::numeric(
                "conjugate gradients hit a non-positive curvature direction",
            ));
        }
        let step = rr / pap;
        x.axpy(step, &p, 1.0);
        r.axpy(-step, &ap, 1.0);
        let rr_next = r.norm_squared();
        p = &r + &p * (rr_next / rr);
        rr = rr_next;
    }
    Err(Error::numeric(format!(
        "conjugate gradients stagnated at relative residual {:.3e}",
        rr.sqrt() / bnorm
    )))
}

/// `S_n(x) = R_n(x) - R_n(x_n*)`, with `x_n*` from the high-precision oracle.
/// Values below `-1e-12` mean the supplied minimizer is not one.
pub fn stage_subopt(view: &RiskView<'_>, x: &DVector<f64>, xstar: &DVector<f64>) -> Result<f64> {
    let s = view.value_difference(x, xstar)?;
    if s < -1e-12 {
        return Err(Error::Oracle(format!(
            "suboptimality {s:.3e} is negative; the reference point is not a minimizer"
        )));
    }
    Ok(s.max(0.0))
}

/// `K = 3 + (2 + c‖x*‖²/2)(1 - 1/α)`.
pub fn k_constant(c: f64, xstar_norm: f64, alpha: f64) -> f64 {
    3.0 + (2.0 + 0.5 * c * xstar_norm * xstar_norm) * (1.0 - 1.0 / alpha)
}

/// Left side of the quadratic-region condition on the growth from `m` to `n`
/// (must be ≤ 1/4).
pub fn cond1_lhs(lipschitz: f64, c: f64, v_m: f64, v_n: f64, m: usize, n: usize, xstar_norm: f64) -> f64 {
    let (mf, nf) = (m as f64, n as f64);
    (2.0 * (lipschitz + c * v_m) * v_m / (c * v_n)).sqrt()
        + 2.0 * (nf - mf) / (nf * c.sqrt())
        + ((2.0 + 2f64.sqrt()) * c.sqrt() + c * xstar_norm) * (v_m - v_n) / (c * v_n).sqrt()
}

/// Left side of the one-step sufficiency condition (must be ≤ `V_n`).
pub fn cond2_lhs(k: f64, rho: f64, v_m: f64) -> f64 {
    16.0 / (3.0 - rho).powi(4)
        * (36.0 * k * k * (1.0 + rho).powi(2) * v_m * v_m
            + 30.0 * k.powf(1.5) * rho * (1.0 + rho) * v_m.powf(1.5)
            + 6.0 * k * rho * rho * v_m)
}

/// Large-`m` form of the first condition: `(2αM/c)^{1/2} + 2(α-1)/(α√c)` (≤ 1/4).
pub fn simplified_lhs1(alpha: f64, lipschitz: f64, c: f64) -> f64 {
    (2.0 * alpha * lipschitz / c).sqrt() + 2.0 * (alpha - 1.0) / (alpha * c.sqrt())
}

/// Large-`m` form of the second condition: `96 K ρ² / (3-ρ)²` (≤ 1/α).
pub fn simplified_lhs2(alpha: f64, c: f64, xstar_norm: f64, rho: f64) -> f64 {
    96.0 * k_constant(c, xstar_norm, alpha) * rho * rho / (3.0 - rho).powi(2)
}

/// Truncation factor of the suggested `(α = 2, ρ)` pair: `9 / (21√(c‖x*‖² + 16) + 3)`.
pub fn suggested_rho(c: f64, xstar_norm: f64) -> f64 {
    9.0 / (21.0 * (c * xstar_norm * xstar_norm + 16.0).sqrt() + 3.0)
}

/// Regularization level `16(2√M + 1)²` the suggested pair requires `c` to exceed.
pub fn suggested_c_threshold(lipschitz: f64) -> f64 {
    16.0 * (2.0 * lipschitz.sqrt() + 1.0).powi(2)
}

/// Bound on `S_n(x_n)` after one truncated step from a point with
/// `S_n(x_m) = subopt` inside the quadratic region.
pub fn subopt_step_bound(epsilon: f64, subopt: f64) -> f64 {
    let e = epsilon;
    16.0 / (3.0 - e).powi(4)
        * (36.0 * (1.0 + e).powi(2) * subopt * subopt + 30.0 * e * (1.0 + e) * subopt.powf(1.5) + 6.0 * e * e * subopt)
}

/// Bound on `λ_n(x_n)` given `λ_n(x_m) = lambda`. Infinite when
/// `(1+ε)λ ≥ 1`, where the bound says nothing.
pub fn decrement_step_bound(epsilon: f64, lambda: f64) -> f64 {
    let e = epsilon;
    let denom = 1.0 - (1.0 + e) * lambda;
    if denom <= 0.0 {
        return f64::INFINITY;
    }
    ((1.0 + e) * lambda * lambda + e * lambda) / (denom * denom)
}

/// Where the `S_n(x_m)` fed into the suboptimality bound came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SuboptSource {
    /// Measured against an oracle minimizer.
    Oracle,
    /// Strong-convexity bound `‖∇R_n(x_m)‖²/(2cV_n)`.
    GradientBound,
}

/// Scalar inputs of [`theory_report`].
#[derive(Debug, Clone, PartialEq)]
pub struct TheoryInputs {
    pub m: usize,
    pub n: usize,
    pub c: f64,
    pub schedule: Schedule,
    pub rho: f64,
    /// Realized `ε_n` of the step taken from `x_m`.
    pub epsilon: f64,
    pub lipschitz: f64,
    /// Plug-in value for the unknown `‖x*‖`.
    pub xstar_norm: f64,
    /// `λ_n(x_m)`.
    pub lambda_m: f64,
    /// `S_n(x_m)`.
    pub subopt_m: f64,
    pub subopt_source: SuboptSource,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsReport {
    pub m: usize,
    pub n: usize,
    pub alpha: f64,
    pub v_m: f64,
    pub v_n: f64,
    pub lambda_m: f64,
    pub k_const: f64,
    /// `K V_m`.
    pub growth_subopt_bound: f64,
    pub cond1_lhs: f64,
    pub cond2_lhs: f64,
    pub simplified_lhs1: f64,
    pub simplified_lhs2: f64,
    pub subopt_step_bound: f64,
    pub decrement_step_bound: f64,
    /// `λ²/6`.
    pub sandwich_lo: f64,
    /// `λ²`.
    pub sandwich_hi: f64,
    pub xstar_norm_used: f64,
    pub subopt_m: f64,
    pub subopt_source: SuboptSource,
    pub epsilon: f64,
}

impl DiagnosticsReport {
    pub fn in_quadratic_region(&self) -> bool {
        self.lambda_m < QUADRATIC_REGION
    }

    pub fn cond1_holds(&self) -> bool {
        self.cond1_lhs <= 0.25
    }

    pub fn cond2_holds(&self) -> bool {
        self.cond2_lhs <= self.v_n
    }

    pub fn simplified1_holds(&self) -> bool {
        self.simplified_lhs1 <= 0.25
    }

    pub fn simplified2_holds(&self) -> bool {
        self.simplified_lhs2 <= 1.0 / self.alpha
    }

    /// `field=value` pairs on one line.
    pub fn to_record(&self) -> String {
        format!(
            "m={} n={} alpha={} v_m={} v_n={} lambda_m={} K={} growth_subopt_bound={} \
             cond1_lhs={} cond1_holds={} cond2_lhs={} cond2_holds={} \
             simplified_lhs1={} simplified1_holds={} simplified_lhs2={} simplified2_holds={} \
             epsilon={} subopt_m={} subopt_source={} subopt_step_bound={} decrement_step_bound={} \
             sandwich_lo={} sandwich_hi={} xstar_norm_used={}",
            self.m,
            self.n,
            self.alpha,
            self.v_m,
            self.v_n,
            self.lambda_m,
            self.k_const,
            self.growth_subopt_bound,
            self.cond1_lhs,
            self.cond1_holds(),
            self.cond2_lhs,
            self.cond2_holds(),
            self.simplified_lhs1,
            self.simplified1_holds(),
            self.simplified_lhs2,
            self.simplified2_holds(),
            self.epsilon,
            self.subopt_m,
            match self.subopt_source {
                SuboptSource::Oracle => "oracle",
                SuboptSource::GradientBound => "gradient_bound",
            },
            self.subopt_step_bound,
            self.decrement_step_bound,
            self.sandwich_lo,
            self.sandwich_hi,
            self.xstar_norm_used,
        )
    }
}

/// Evaluates every certificate at the supplied measurements. Pure.
pub fn theory_report(inp: &TheoryInputs) -> Result<DiagnosticsReport> {
    if inp.m == 0 || inp.m >= inp.n {
        return Err(Error::validation(format!(
            "need 1 <= m < n, got m = {}, n = {}",
            inp.m, inp.n
        )));
    }
    if !(inp.c > 0.0) {
        return Err(Error::validation("c must be positive"));
    }
    let alpha = inp.n as f64 / inp.m as f64;
    let v_m = inp.schedule.accuracy(inp.m);
    let v_n = inp.schedule.accuracy(inp.n);
    let k_const = k_constant(inp.c, inp.xstar_norm, alpha);
    let lam = inp.lambda_m;
    Ok(DiagnosticsReport {
        m: inp.m,
        n: inp.n,
        alpha,
        v_m,
        v_n,
        lambda_m: lam,
        k_const,
        growth_subopt_bound: k_const * v_m,
        cond1_lhs: cond1_lhs(inp.lipschitz, inp.c, v_m, v_n, inp.m, inp.n, inp.xstar_norm),
        cond2_lhs: cond2_lhs(k_const, inp.rho, v_m),
        simplified_lhs1: simplified_lhs1(alpha, inp.lipschitz, inp.c),
        simplified_lhs2: simplified_lhs2(alpha, inp.c, inp.xstar_norm, inp.rho),
        subopt_step_bound: subopt_step_bound(inp.epsilon, inp.subopt_m),
        decrement_step_bound: decrement_step_bound(inp.epsilon, lam),
        sandwich_lo: lam * lam / 6.0,
        sandwich_hi: lam * lam,
        xstar_norm_used: inp.xstar_norm,
        subopt_m: inp.subopt_m,
        subopt_source: inp.subopt_source,
        epsilon: inp.epsilon,
    })
}

/// Measures `λ_n(x_m)` and `S_n(x_m)` on `view_n` and evaluates the report.
///
/// `xstar_norm` defaults to `‖x_m‖`. With `xstar_n` the suboptimality is
/// measured exactly, otherwise the strong-convexity bound stands in for it.
pub fn stage_report(
    view_n: &RiskView<'_>,
    x_m: &DVector<f64>,
    m: usize,
    rho: f64,
    epsilon: f64,
    xstar_norm: Option<f64>,
    xstar_n: Option<&DVector<f64>>,
) -> Result<DiagnosticsReport> {
    let plain = view_n.unmetered();
    let lambda_m = newton_decrement(&plain, x_m)?;
    let (subopt_m, subopt_source) = match xstar_n {
        Some(xs) => (stage_subopt(&plain, x_m, xs)?, SuboptSource::Oracle),
        None => {
            let g = plain.grad(x_m)?;
            (g.norm_squared() / (2.0 * plain.reg()), SuboptSource::GradientBound)
        }
    };
    theory_report(&TheoryInputs {
        m,
        n: view_n.n(),
        c: view_n.config().c,
        schedule: view_n.config().schedule,
        rho,
        epsilon,
        lipschitz: view_n.lipschitz(),
        xstar_norm: xstar_norm.unwrap_or_else(|| x_m.norm()),
        lambda_m,
        subopt_m,
        subopt_source,
    })
}
