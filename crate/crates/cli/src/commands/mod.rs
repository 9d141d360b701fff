pub mod check;
pub mod compare;
pub mod oracle;
pub mod solve;

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use ktan::baselines::newton_oracle;
use ktan::risk::{Dataset, RiskConfig, RiskView};
use ktan::trace::{write_csv, TraceRecord};
use ktan::DVector;

use crate::failure::{CmdResult, Failure};
use crate::settings::Settings;

/// Pins the worker pool to one thread when the run must be reproducible.
pub fn apply_determinism(settings: &Settings) -> CmdResult {
    if settings.flag("deterministic").map_err(Failure::usage)? {
        #[cfg(feature = "parallel")]
        std::env::set_var("RAYON_NUM_THREADS", "1");
    }
    Ok(())
}

/// High-precision minimizers of `R_n`, computed once per prefix size.
pub struct OracleCache<'a> {
    data: &'a Dataset,
    risk: RiskConfig,
    tol: f64,
    solutions: HashMap<usize, DVector<f64>>,
}

impl<'a> OracleCache<'a> {
    pub fn new(data: &'a Dataset, risk: RiskConfig, tol: f64) -> Self {
        OracleCache {
            data,
            risk,
            tol,
            solutions: HashMap::new(),
        }
    }

    pub fn minimizer(&mut self, n: usize) -> CmdResult<&DVector<f64>> {
        if !self.solutions.contains_key(&n) {
            let view = RiskView::new(self.data, n, self.risk)?;
            let x = newton_oracle(&view, self.tol)?.x;
            self.solutions.insert(n, x);
        }
        Ok(&self.solutions[&n])
    }

    /// `R_n(x) - R_n(x_n*)`.
    pub fn subopt(&mut self, n: usize, x: &DVector<f64>) -> CmdResult<f64> {
        let view = RiskView::new(self.data, n, self.risk)?;
        let xs = self.minimizer(n)?.clone();
        Ok(ktan::solver::stage_subopt(&view, x, &xs)?)
    }
}

pub fn write_trace(out: Option<&Path>, records: &[TraceRecord], prefix: Option<(&str, &str)>) -> CmdResult {
    let mut buf = Vec::new();
    write_csv(&mut buf, records, prefix)?;
    match out {
        Some(path) => crate::source::write_text(path, std::str::from_utf8(&buf).expect("CSV is UTF-8")),
        None => {
            std::io::stdout().write_all(&buf)?;
            Ok(())
        }
    }
}
