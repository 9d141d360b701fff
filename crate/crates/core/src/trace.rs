//! Work meters and the per-attempt trace schema shared by every solver.

use std::io::Write;
use std::sync::atomic::{AtomicU64, Ordering};
#[cfg(not(all(target_arch = "wasm32", target_os = "unknown")))]
use std::time::Instant;
#[cfg(all(target_arch = "wasm32", target_os = "unknown"))]
use web_time::Instant;

/// Column order of the trace CSV. Stable across versions.
pub const CSV_HEADER: &str =
    "stage,attempt,n,samples_cum,grad_evals_cum,wall_ms,grad_norm,k,epsilon,alpha_used,rho_used,subopt";

/// Cumulative work counters.
///
/// `processed` is the x-axis of the convergence plots: second-order stages
/// charge their sample size `n` once per attempt, stochastic methods charge 1
/// per iteration. `evaluated` counts every per-sample gradient actually
/// computed (exit checks, warm start and line searches included).
#[derive(Debug, Default)]
pub struct WorkMeter {
    processed: AtomicU64,
    evaluated: AtomicU64,
}

impl WorkMeter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn charge_processed(&self, samples: u64) {
        self.processed.fetch_add(samples, Ordering::Relaxed);
    }

    pub fn charge_evaluated(&self, samples: u64) {
        self.evaluated.fetch_add(samples, Ordering::Relaxed);
    }

    pub fn processed(&self) -> u64 {
        self.processed.load(Ordering::Relaxed)
    }

    pub fn evaluated(&self) -> u64 {
        self.evaluated.load(Ordering::Relaxed)
    }
}

/// Monotonic wall clock in whole milliseconds since construction.
#[derive(Debug, Clone, Copy)]
pub struct Stopwatch(Instant);

impl Stopwatch {
    pub fn start() -> Self {
        Stopwatch(Instant::now())
    }

    pub fn elapsed_ms(&self) -> u64 {
        self.0.elapsed().as_millis() as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttemptKind {
    /// A truncated Newton step on a new prefix.
    Stage,
    /// Damped Newton iteration on a frozen prefix after backtracking ran out.
    Safeguard,
    /// A logged iterate of a first-order baseline.
    FirstOrder,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub stage: usize,
    pub attempt: usize,
    pub n: usize,
    pub samples_cum: u64,
    pub grad_evals_cum: u64,
    pub wall_ms: u64,
    pub grad_norm: f64,
    pub k: Option<usize>,
    pub epsilon: Option<f64>,
    pub alpha_used: Option<f64>,
    pub rho_used: Option<f64>,
    pub subopt: Option<f64>,
    /// Whether this attempt passed the accuracy test (always true for
    /// first-order records).
    pub accepted: bool,
    pub kind: AttemptKind,
}

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn opt_f(v: Option<f64>) -> String {
    v.map(|v| format!("{v:e}")).unwrap_or_default()
}

impl TraceRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{:e},{},{},{},{},{}",
            self.stage,
            self.attempt,
            self.n,
            self.samples_cum,
            self.grad_evals_cum,
            self.wall_ms,
            self.grad_norm,
            opt(self.k),
            opt_f(self.epsilon),
            opt_f(self.alpha_used),
            opt_f(self.rho_used),
            opt_f(self.subopt),
        )
    }
}

/// Writes the header and one row per record. `prefix` columns (e.g. a solver
/// name) are prepended to every row when given.
pub fn write_csv<W: Write>(out: &mut W, records: &[TraceRecord], prefix: Option<(&str, &str)>) -> std::io::Result<()> {
    match prefix {
        Some((col, _)) => writeln!(out, "{col},{CSV_HEADER}")?,
        None => writeln!(out, "{CSV_HEADER}")?,
    }
    for r in records {
        match prefix {
            Some((_, val)) => writeln!(out, "{val},{}", r.csv_row())?,
            None => writeln!(out, "{}", r.csv_row())?,
        }
    }
    Ok(())
}
