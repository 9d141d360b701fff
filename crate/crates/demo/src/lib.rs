//! WebAssembly front end for the k-TAN solver. Each exported function takes
//! plain numbers and returns a JSON string for the page to plot.

use ktan::baselines::{adanewton_run, newton_oracle, sgd_run, BaselineConfig, Method};
use ktan::data::{synthesize, SpectrumDecay, SyntheticSpec};
use ktan::linalg::{full_sym_eig, select_rank, TruncatedEig, TruncatedInverse};
use ktan::risk::{Dataset, RiskConfig, RiskView};
use ktan::solver::{self, stage_subopt, RunOutcome, SolverConfig};
use ktan::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Largest dimension the page accepts; every view here uses dense factors.
pub const MAX_DIM: usize = 120;
pub const MAX_SAMPLES: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Problem {
    pub n: usize,
    pub p: usize,
    pub decay: f64,
    pub c: f64,
    pub seed: u64,
}

impl Problem {
    fn validate(&self) -> Result<(), String> {
        if !(2..=MAX_SAMPLES).contains(&self.n) {
            return Err(format!("n must be in 2..={MAX_SAMPLES}"));
        }
        if !(1..=MAX_DIM).contains(&self.p) {
            return Err(format!("p must be in 1..={MAX_DIM}"));
        }
        Ok(())
    }

    fn dataset(&self) -> Result<Dataset, String> {
        self.validate()?;
        let spec = SyntheticSpec {
            n_samples: self.n,
            dim: self.p,
            decay: SpectrumDecay::Geometric(self.decay),
            seed: self.seed,
            ..Default::default()
        };
        synthesize(&spec).map(|(d, _)| d).map_err(|e| e.to_string())
    }

    fn risk(&self) -> RiskConfig {
        RiskConfig {
            c: self.c,
            ..Default::default()
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Point {
    /// Samples processed so far.
    pub samples: u64,
    /// `R_N(x) - R_N(x_N*)`.
    pub subopt: f64,
}

#[derive(Debug, Serialize)]
pub struct StageRow {
    pub n: usize,
    pub k: usize,
    pub epsilon: f64,
    pub accepted: bool,
    pub grad_norm: f64,
}

#[derive(Debug, Serialize)]
pub struct Comparison {
    pub total: usize,
    /// `V_N`, the target suboptimality scale.
    pub accuracy: f64,
    pub ktan: Vec<Point>,
    pub adanewton: Vec<Point>,
    pub sgd: Vec<Point>,
    pub stages: Vec<StageRow>,
}

fn curve(full: &RiskView<'_>, xs: &DVector<f64>, out: &RunOutcome) -> Result<Vec<Point>, String> {
    out.trace()
        .iter()
        .zip(&out.iterates)
        .map(|(r, x)| {
            Ok(Point {
                samples: r.samples_cum,
                subopt: stage_subopt(full, x, xs).map_err(|e| e.to_string())?,
            })
        })
        .collect()
}

/// Runs k-TAN, AdaNewton and SGD on one synthetic problem and measures all
/// three against the full-data minimizer. SGD gets the sample budget k-TAN used.
pub fn compare(problem: Problem, rho0: f64, m0: usize, sgd_step: f64) -> Result<Comparison, String> {
    let data = problem.dataset()?;
    let risk = problem.risk();
    let full = RiskView::new(&data, data.len(), risk).map_err(|e| e.to_string())?;
    let xs = newton_oracle(&full, 1e-10).map_err(|e| e.to_string())?.x;
    let cfg = SolverConfig {
        m0,
        rho0,
        seed: problem.seed,
        ..Default::default()
    };
    let ktan = solver::run(&data, &risk, &cfg).map_err(|e| e.to_string())?;
    let ada = adanewton_run(&data, &risk, &cfg).map_err(|e| e.to_string())?;

    let budget = ktan.state.samples_cum;
    let points = 60u64;
    let sgd_cfg = BaselineConfig {
        method: Method::Sgd,
        step_size: sgd_step,
        iterations: budget,
        seed: problem.seed,
        log_every: (budget / points).max(1),
        budget_ms: None,
    };
    let sgd = sgd_run(&full, &sgd_cfg, DVector::zeros(data.dim())).map_err(|e| e.to_string())?;
    let sgd_curve = sgd
        .trace
        .iter()
        .zip(&sgd.iterates)
        .map(|(r, x)| {
            Ok(Point {
                samples: r.samples_cum,
                subopt: stage_subopt(&full, x, &xs).map_err(|e| e.to_string())?,
            })
        })
        .collect::<Result<_, String>>()?;

    let stages = ktan
        .trace()
        .iter()
        .map(|r| StageRow {
            n: r.n,
            k: r.k.unwrap_or(data.dim()),
            epsilon: r.epsilon.unwrap_or(0.0),
            accepted: r.accepted,
            grad_norm: r.grad_norm,
        })
        .collect();
    Ok(Comparison {
        total: data.len(),
        accuracy: full.accuracy(),
        ktan: curve(&full, &xs, &ktan)?,
        adanewton: curve(&full, &xs, &ada)?,
        sgd: sgd_curve,
        stages,
    })
}

#[derive(Debug, Serialize)]
pub struct Spectrum {
    /// Data Hessian eigenvalues, non-increasing.
    pub eigenvalues: Vec<f64>,
    /// `ρ c V_n`: eigenvalues at or below it are dropped.
    pub threshold: f64,
    pub rank: usize,
    pub epsilon: f64,
}

/// Data Hessian spectrum at the full-data minimizer and the rank kept at `rho`.
pub fn spectrum(problem: Problem, rho: f64) -> Result<Spectrum, String> {
    let data = problem.dataset()?;
    let full = RiskView::new(&data, data.len(), problem.risk()).map_err(|e| e.to_string())?;
    let xs = newton_oracle(&full, 1e-10).map_err(|e| e.to_string())?.x;
    let h = full.data_hessian(&xs).map_err(|e| e.to_string())?;
    let eig = full_sym_eig(&h).map_err(|e| e.to_string())?;
    let eigenvalues: Vec<f64> = eig.eigvals.iter().map(|&v| v.max(0.0)).collect();
    let threshold = rho * full.reg();
    let rank = if rho == 0.0 {
        eigenvalues.len()
    } else {
        select_rank(&eigenvalues, threshold).map_err(|e| e.to_string())?
    };
    let epsilon = eigenvalues.get(rank).map_or(0.0, |&mu| mu / full.reg());
    Ok(Spectrum {
        eigenvalues,
        threshold,
        rank,
        epsilon,
    })
}

#[derive(Debug, Serialize)]
pub struct ProbeRow {
    pub k: usize,
    /// Relative error bound `ε` for rank `k`.
    pub bound: f64,
    /// Largest measured `‖Ĥ⁻¹g - H⁻¹g‖ / ‖H⁻¹g‖` over the random probes.
    pub worst: f64,
    /// The same ratio for `g` along the first dropped eigenvector.
    pub tight: f64,
}

/// Truncated-inverse error against its bound for every rank of one random
/// PSD matrix plus `r I`.
pub fn inverse_probe(p: usize, r: f64, probes: usize, seed: u64) -> Result<Vec<ProbeRow>, String> {
    if !(1..=MAX_DIM).contains(&p) {
        return Err(format!("p must be in 1..={MAX_DIM}"));
    }
    if r.is_nan() || r <= 0.0 {
        return Err("r must be positive".into());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = DMatrix::from_fn(p, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    let h = &b * b.transpose() / p as f64;
    let h = (&h + h.transpose()) * 0.5;
    let reg = &h + DMatrix::identity(p, p) * r;
    let chol = reg.cholesky().ok_or("matrix is not positive definite")?;
    let eig = full_sym_eig(&h).map_err(|e| e.to_string())?;
    let gs: Vec<DVector<f64>> = (0..probes)
        .map(|_| DVector::from_fn(p, |_, _| rng.sample::<f64, _>(StandardNormal)))
        .collect();
    let rel = |inv: &TruncatedInverse, g: &DVector<f64>| -> Result<f64, String> {
        let exact = chol.solve(g);
        let approx = inv.apply(g).map_err(|e| e.to_string())?;
        Ok((approx - &exact).norm() / exact.norm())
    };
    (0..=p)
        .map(|k| {
            let factors = TruncatedEig::from_sym_eig(&eig, k).map_err(|e| e.to_string())?;
            let inv = TruncatedInverse::new(factors, r).map_err(|e| e.to_string())?;
            let mut worst = 0.0f64;
            for g in &gs {
                worst = worst.max(rel(&inv, g)?);
            }
            let tight = if k < p {
                rel(&inv, &eig.eigvecs.column(k).into_owned())?
            } else {
                0.0
            };
            Ok(ProbeRow {
                k,
                bound: inv.epsilon(),
                worst,
                tight,
            })
        })
        .collect()
}

fn to_js<T: Serialize>(v: Result<T, String>) -> Result<String, JsError> {
    let v = v.map_err(|e| JsError::new(&e))?;
    serde_json::to_string(&v).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = runComparison)]
#[allow(clippy::too_many_arguments)]
pub fn run_comparison(
    n: usize,
    p: usize,
    decay: f64,
    c: f64,
    rho0: f64,
    m0: usize,
    sgd_step: f64,
    seed: u64,
) -> Result<String, JsError> {
    to_js(compare(Problem { n, p, decay, c, seed }, rho0, m0, sgd_step))
}

#[wasm_bindgen(js_name = hessianSpectrum)]
pub fn hessian_spectrum(n: usize, p: usize, decay: f64, c: f64, rho: f64, seed: u64) -> Result<String, JsError> {
    to_js(spectrum(Problem { n, p, decay, c, seed }, rho))
}

#[wasm_bindgen(js_name = inverseProbe)]
pub fn inverse_probe_js(p: usize, r: f64, probes: usize, seed: u64) -> Result<String, JsError> {
    to_js(inverse_probe(p, r, probes, seed))
}
