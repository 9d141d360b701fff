use std::fmt::Write as _;
use std::path::PathBuf;

use clap::Args;
use ktan::baselines::newton_oracle;
use ktan::risk::RiskView;

use super::apply_determinism;
use crate::failure::{CmdResult, Failure};
use crate::settings::{CommonArgs, Settings};
use crate::source;

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Prefix size (defaults to the whole dataset).
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
    /// Output path (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(args: OracleArgs) -> CmdResult {
    let settings = Settings::resolve(&args.common, &[]).map_err(Failure::usage)?;
    apply_determinism(&settings)?;
    let risk = settings.risk().map_err(Failure::usage)?;
    let (data, _) = source::load(&settings)?;
    let n = args.n.unwrap_or(data.len());
    let view = RiskView::new(&data, n, risk)?;
    let sol = newton_oracle(&view, args.tol)?;
    let mut text = String::new();
    for v in sol.x.iter() {
        writeln!(text, "{v:.16e}").expect("writing to a String");
    }
    writeln!(
        text,
        "# grad_norm={:e} iterations={} n={n}",
        sol.grad_norm, sol.iterations
    )
    .expect("writing to a String");
    match &args.out {
        Some(path) => source::write_text(path, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
