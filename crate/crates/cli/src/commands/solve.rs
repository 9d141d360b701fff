use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::Args;
use ktan::solver;

use super::{apply_determinism, write_trace, OracleCache};
use crate::failure::{CmdResult, Failure};
use crate::manifest::{now, RunManifest};
use crate::settings::{CommonArgs, Settings};
use crate::source;

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Trace CSV path (stdout when omitted). A manifest is written beside it.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Fill the `subopt` column against a per-stage Newton oracle.
    #[arg(long)]
    pub with_oracle: bool,
    #[arg(long, default_value_t = 1e-12)]
    pub oracle_tol: f64,
}

pub fn run(args: SolveArgs) -> CmdResult {
    let started = now();
    let settings = Settings::resolve(&args.common, &[]).map_err(Failure::usage)?;
    apply_determinism(&settings)?;
    let risk = settings.risk().map_err(Failure::usage)?;
    let cfg = settings.solver().map_err(Failure::usage)?;
    let (data, info) = source::load(&settings)?;

    let outcome = match solver::run(&data, &risk, &cfg) {
        Ok(o) => o,
        Err(ktan::Error::Solver { message, trace }) => {
            // Keep what was done so far for inspection.
            write_trace(args.out.as_deref(), &trace, None)?;
            return Err(Failure::runtime(anyhow::anyhow!(message)));
        }
        Err(e) => return Err(e.into()),
    };
    let mut records = outcome.trace().to_vec();
    if args.with_oracle {
        let mut oracle = OracleCache::new(&data, risk, args.oracle_tol);
        for (rec, x) in records.iter_mut().zip(&outcome.iterates) {
            rec.subopt = Some(oracle.subopt(rec.n, x)?);
        }
    }
    write_trace(args.out.as_deref(), &records, None)?;

    let last = records.last();
    eprintln!(
        "stages={} backtracks={} samples_cum={} grad_evals_cum={} final_grad_norm={:e} threshold={:e}",
        outcome.stages(),
        outcome.backtracks(),
        outcome.state.samples_cum,
        outcome.state.grad_evals_cum,
        last.map_or(outcome.init.grad_norm, |r| r.grad_norm),
        (2.0 * risk.c).sqrt() * risk.schedule.accuracy(data.len()),
    );

    if let Some(out) = &args.out {
        let seeds = BTreeMap::from([("solver".to_string(), cfg.seed), ("order".to_string(), info.order_seed)]);
        let config = settings
            .with_default("c", risk.c)
            .with_default("alpha0", cfg.alpha0)
            .with_default("rho0", cfg.rho0)
            .with_default("beta", cfg.beta)
            .with_default("delta", cfg.delta)
            .with_default("m0", cfg.m0)
            .with_default("max_backtracks", cfg.max_backtracks)
            .entries()
            .clone();
        RunManifest::new(config, info, seeds, started).write(&source::manifest_path(out))?;
    }
    Ok(())
}
