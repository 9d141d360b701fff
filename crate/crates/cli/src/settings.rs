//! Resolution of command-line flags, `key = value` config files and defaults.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context};
use clap::Args;
use ktan::linalg::RandomizedEigParams;
use ktan::risk::{RiskConfig, Schedule};
use ktan::solver::{EigBackend, SolverConfig};

pub const CONFIG_KEYS: &[&str] = &[
    "data",
    "dim",
    "c",
    "schedule",
    "alpha0",
    "rho0",
    "beta",
    "delta",
    "m0",
    "max_backtracks",
    "backend",
    "seed",
    "permute_seed",
    "normalize",
    "deterministic",
    "sgd_step",
    "saga_step",
    "budget_grads",
    "budget_ms",
];

/// Flags shared by every subcommand that runs the solver.
#[derive(Debug, Clone, Args, Default)]
pub struct CommonArgs {
    /// Dataset: a libsvm file or `synth:n=..,p=..,decay=geo:0.5,noise=..,seed=..`.
    #[arg(long)]
    pub data: Option<String>,
    /// Feature dimension of a libsvm file (inferred when omitted).
    #[arg(long)]
    pub dim: Option<usize>,
    /// Regularization constant c.
    #[arg(long)]
    pub c: Option<f64>,
    /// Statistical accuracy schedule: inv_n or inv_sqrt_n.
    #[arg(long)]
    pub schedule: Option<String>,
    #[arg(long)]
    pub alpha0: Option<f64>,
    #[arg(long)]
    pub rho0: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub m0: Option<usize>,
    #[arg(long)]
    pub max_backtracks: Option<usize>,
    /// Eigensolver: dense or randomized.
    #[arg(long)]
    pub backend: Option<String>,
    /// Seed of the randomized eigensolver and of first-order sampling.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Shuffle the sample order with this seed before solving (0 keeps file order).
    #[arg(long)]
    pub permute_seed: Option<u64>,
    /// Scale every sample to unit norm.
    #[arg(long)]
    pub normalize: bool,
    /// Single-threaded run whose trace is reproducible byte for byte (wall_ms aside).
    #[arg(long)]
    pub deterministic: bool,
    /// `key = value` config file; flags given on the command line win.
    #[arg(long)]
    pub config: Option<String>,
}

/// Key/value configuration after merging the command line over a config file.
#[derive(Debug, Clone, Default)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

pub fn parse_config_text(text: &str) -> anyhow::Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("config line {}: expected `key = value`", i + 1))?;
        let key = k.trim().replace('-', "_");
        if !CONFIG_KEYS.contains(&key.as_str()) {
            bail!("config line {}: unknown key `{}`", i + 1, k.trim());
        }
        out.insert(key, v.trim().to_string());
    }
    Ok(out)
}

impl Settings {
    pub fn resolve(args: &CommonArgs, extra: &[(&str, Option<String>)]) -> anyhow::Result<Settings> {
        let mut values = match &args.config {
            Some(path) => {
                let text =
                    std::fs::read_to_string(Path::new(path)).with_context(|| format!("reading config file {path}"))?;
                parse_config_text(&text)?
            }
            None => BTreeMap::new(),
        };
        let mut set = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                values.insert(k.to_string(), v);
            }
        };
        set("data", args.data.clone());
        set("dim", args.dim.map(|v| v.to_string()));
        set("c", args.c.map(|v| v.to_string()));
        set("schedule", args.schedule.clone());
        set("alpha0", args.alpha0.map(|v| v.to_string()));
        set("rho0", args.rho0.map(|v| v.to_string()));
        set("beta", args.beta.map(|v| v.to_string()));
        set("delta", args.delta.map(|v| v.to_string()));
        set("m0", args.m0.map(|v| v.to_string()));
        set("max_backtracks", args.max_backtracks.map(|v| v.to_string()));
        set("backend", args.backend.clone());
        set("seed", args.seed.map(|v| v.to_string()));
        set("permute_seed", args.permute_seed.map(|v| v.to_string()));
        set("normalize", args.normalize.then(|| "true".to_string()));
        set("deterministic", args.deterministic.then(|| "true".to_string()));
        for (k, v) in extra {
            set(k, v.clone());
        }
        Ok(Settings { values })
    }

    pub fn get<T: FromStr>(&self, key: &str) -> anyhow::Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.values
            .get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| anyhow!("invalid value `{v}` for {key}: {e}"))
            })
            .transpose()
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> anyhow::Result<T>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn flag(&self, key: &str) -> anyhow::Result<bool> {
        self.get_or(key, false)
    }

    pub fn data(&self) -> anyhow::Result<String> {
        self.values
            .get("data")
            .cloned()
            .ok_or_else(|| anyhow!("--data is required (a libsvm path or synth:...)"))
    }

    pub fn risk(&self) -> anyhow::Result<RiskConfig> {
        let schedule = match self.values.get("schedule").map(String::as_str) {
            None | Some("inv_n") => Schedule::InvN,
            Some("inv_sqrt_n") => Schedule::InvSqrtN,
            Some(other) => bail!("unknown schedule `{other}` (expected inv_n or inv_sqrt_n)"),
        };
        let risk = RiskConfig {
            c: self.get_or("c", 1.0)?,
            schedule,
            ..Default::default()
        };
        risk.validate()?;
        Ok(risk)
    }

    pub fn solver(&self) -> anyhow::Result<SolverConfig> {
        let d = SolverConfig::default();
        let seed = self.get_or("seed", d.seed)?;
        let backend = match self.values.get("backend").map(String::as_str) {
            None | Some("dense") => EigBackend::Dense,
            Some("randomized") => EigBackend::Randomized(RandomizedEigParams {
                seed,
                ..Default::default()
            }),
            Some(other) => bail!("unknown backend `{other}` (expected dense or randomized)"),
        };
        let cfg = SolverConfig {
            alpha0: self.get_or("alpha0", d.alpha0)?,
            rho0: self.get_or("rho0", d.rho0)?,
            beta: self.get_or("beta", d.beta)?,
            delta: self.get_or("delta", d.delta)?,
            m0: self.get_or("m0", d.m0)?,
            max_backtracks: self.get_or("max_backtracks", d.max_backtracks)?,
            backend,
            seed,
            ..d
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Every resolved key, in the config-file grammar.
    pub fn entries(&self) -> &BTreeMap<String, String> {
        &self.values
    }

    pub fn with_default(mut self, key: &str, value: impl ToString) -> Self {
        self.values.entry(key.to_string()).or_insert_with(|| value.to_string());
        self
    }
}
