use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::anyhow;
use clap::Args;
use ktan::baselines::{self, gd_run, saga_run, sgd_run, BaselineConfig, GdConfig, Method};
use ktan::risk::{Dataset, RiskConfig, RiskView};
use ktan::solver::{self, SolverConfig};
use ktan::trace::{TraceRecord, CSV_HEADER};
use ktan::DVector;

use super::{apply_determinism, write_trace, OracleCache};
use crate::failure::{CmdResult, Failure};
use crate::manifest::{now, RunManifest};
use crate::settings::{CommonArgs, Settings};
use crate::source;

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Comma-separated subset of ktan, adanewton, sgd, saga, gd.
    #[arg(long, default_value = "ktan,adanewton,sgd,saga,gd")]
    pub solvers: String,
    /// Processed-sample budget per solver (defaults to three passes).
    #[arg(long)]
    pub budget_grads: Option<u64>,
    /// Wall-clock budget per solver.
    #[arg(long)]
    pub budget_ms: Option<u64>,
    #[arg(long)]
    pub sgd_step: Option<f64>,
    #[arg(long)]
    pub saga_step: Option<f64>,
    /// Trace rows per first-order run.
    #[arg(long, default_value_t = 100)]
    pub points: u64,
    /// Directory for per-solver traces, `merged.csv` and `manifest.json`.
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    /// Run the solvers on separate threads.
    #[arg(long)]
    pub parallel: bool,
    #[arg(long, default_value_t = 1e-12)]
    pub oracle_tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Solver {
    Ktan,
    Baseline(Method),
}

impl Solver {
    pub fn name(self) -> &'static str {
        match self {
            Solver::Ktan => "ktan",
            Solver::Baseline(m) => m.name(),
        }
    }
}

pub fn parse_solvers(list: &str) -> anyhow::Result<Vec<Solver>> {
    let mut out = Vec::new();
    for name in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let s = if name.eq_ignore_ascii_case("ktan") {
            Solver::Ktan
        } else {
            match name.parse::<Method>() {
                Ok(Method::NewtonOracle) | Err(_) => return Err(anyhow!("unknown solver `{name}`")),
                Ok(m) => Solver::Baseline(m),
            }
        };
        if !out.contains(&s) {
            out.push(s);
        }
    }
    if out.is_empty() {
        return Err(anyhow!("no solvers given"));
    }
    Ok(out)
}

struct Plan<'a> {
    data: &'a Dataset,
    risk: RiskConfig,
    solver: SolverConfig,
    budget: u64,
    budget_ms: Option<u64>,
    sgd_step: f64,
    saga_step: f64,
    points: u64,
    seed: u64,
}

type Run = (Vec<TraceRecord>, Vec<DVector<f64>>);

fn within_budget(run: Run, budget: u64, budget_ms: Option<u64>) -> Run {
    let (trace, iterates) = run;
    trace
        .into_iter()
        .zip(iterates)
        .filter(|(r, _)| r.samples_cum <= budget && budget_ms.is_none_or(|b| r.wall_ms <= b))
        .unzip()
}

fn run_one(plan: &Plan<'_>, which: Solver) -> CmdResult<Run> {
    if plan.budget == 0 {
        return Ok((Vec::new(), Vec::new()));
    }
    let n = plan.data.len();
    let view = RiskView::new(plan.data, n, plan.risk)?;
    let x0 = DVector::zeros(plan.data.dim());
    let log_every = (plan.budget / plan.points.max(1)).max(1);
    let first_order = |method, step| BaselineConfig {
        method,
        step_size: step,
        iterations: plan.budget,
        budget_ms: plan.budget_ms,
        seed: plan.seed,
        log_every,
    };
    let run = match which {
        Solver::Ktan | Solver::Baseline(Method::AdaNewton) => {
            let out = if which == Solver::Ktan {
                solver::run(plan.data, &plan.risk, &plan.solver)?
            } else {
                baselines::adanewton_run(plan.data, &plan.risk, &plan.solver)?
            };
            within_budget((out.state.trace, out.iterates), plan.budget, plan.budget_ms)
        }
        Solver::Baseline(Method::Sgd) => {
            let out = sgd_run(&view, &first_order(Method::Sgd, plan.sgd_step), x0)?;
            (out.trace, out.iterates)
        }
        Solver::Baseline(Method::Saga) => {
            let out = saga_run(&view, &first_order(Method::Saga, plan.saga_step), x0)?;
            (out.trace, out.iterates)
        }
        Solver::Baseline(Method::Gd) => {
            let iters = (plan.budget / n as u64) as usize;
            let cfg = GdConfig {
                min_iters: 0,
                max_iters: iters,
                grad_tol: 0.0,
                log_every: (iters as u64 / plan.points.max(1)).max(1) as usize,
                budget_ms: plan.budget_ms,
            };
            let out = gd_run(&view, &cfg, x0)?;
            (out.trace, out.iterates)
        }
        Solver::Baseline(Method::NewtonOracle) => unreachable!("rejected by parse_solvers"),
    };
    Ok(run)
}

fn finish(
    which: Solver,
    run: Run,
    oracle: &DVector<f64>,
    view: &RiskView<'_>,
    dir: &Path,
) -> CmdResult<Vec<TraceRecord>> {
    let (mut trace, iterates) = run;
    for (r, x) in trace.iter_mut().zip(&iterates) {
        r.subopt = Some(solver::stage_subopt(view, x, oracle)?);
    }
    write_trace(Some(&dir.join(format!("{}.csv", which.name()))), &trace, None)?;
    Ok(trace)
}

pub fn run(args: CompareArgs) -> CmdResult {
    let started = now();
    let extra = [
        ("sgd_step", args.sgd_step.map(|v| v.to_string())),
        ("saga_step", args.saga_step.map(|v| v.to_string())),
        ("budget_grads", args.budget_grads.map(|v| v.to_string())),
        ("budget_ms", args.budget_ms.map(|v| v.to_string())),
    ];
    let settings = Settings::resolve(&args.common, &extra).map_err(Failure::usage)?;
    let solvers = parse_solvers(&args.solvers).map_err(Failure::usage)?;
    apply_determinism(&settings)?;
    let risk = settings.risk().map_err(Failure::usage)?;
    let cfg = settings.solver().map_err(Failure::usage)?;
    let (data, info) = source::load(&settings)?;
    let plan = Plan {
        data: &data,
        risk,
        budget: settings
            .get_or("budget_grads", 3 * data.len() as u64)
            .map_err(Failure::usage)?,
        budget_ms: settings.get("budget_ms").map_err(Failure::usage)?,
        sgd_step: settings.get_or("sgd_step", 0.08).map_err(Failure::usage)?,
        saga_step: settings.get_or("saga_step", 0.08).map_err(Failure::usage)?,
        points: args.points,
        seed: cfg.seed,
        solver: cfg,
    };
    std::fs::create_dir_all(&args.out_dir).map_err(|e| {
        Failure::runtime(anyhow::Error::from(e).context(format!("creating {}", args.out_dir.display())))
    })?;

    let full = RiskView::new(&data, data.len(), risk)?;
    let xstar = OracleCache::new(&data, risk, args.oracle_tol)
        .minimizer(data.len())?
        .clone();

    let results: Vec<CmdResult<Vec<TraceRecord>>> = if args.parallel {
        std::thread::scope(|scope| {
            let handles: Vec<_> = solvers
                .iter()
                .map(|&s| {
                    let (plan, xstar, full, dir) = (&plan, &xstar, &full, &args.out_dir);
                    scope.spawn(move || finish(s, run_one(plan, s)?, xstar, full, dir))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("solver thread panicked"))
                .collect()
        })
    } else {
        solvers
            .iter()
            .map(|&s| finish(s, run_one(&plan, s)?, &xstar, &full, &args.out_dir))
            .collect()
    };

    let mut merged = format!("solver,{CSV_HEADER}\n");
    for (s, res) in solvers.iter().zip(results) {
        let trace = res?;
        for r in &trace {
            writeln!(merged, "{},{}", s.name(), r.csv_row()).expect("writing to a String");
        }
        match trace.last() {
            Some(r) => eprintln!(
                "{:<10} rows={:<5} samples_cum={:<9} wall_ms={:<6} subopt={:e}",
                s.name(),
                trace.len(),
                r.samples_cum,
                r.wall_ms,
                r.subopt.unwrap_or(f64::NAN)
            ),
            None => eprintln!("{:<10} rows=0", s.name()),
        }
    }
    source::write_text(&args.out_dir.join("merged.csv"), &merged)?;

    let seeds = BTreeMap::from([
        ("solver".to_string(), plan.seed),
        ("order".to_string(), info.order_seed),
    ]);
    let config = settings
        .with_default("budget_grads", plan.budget)
        .with_default("sgd_step", plan.sgd_step)
        .with_default("saga_step", plan.saga_step)
        .entries()
        .clone();
    RunManifest::new(config, info, seeds, started).write(&args.out_dir.join("manifest.json"))
}
