use std::collections::BTreeMap;
use std::path::Path;

use chrono::{SecondsFormat, Utc};
use serde::Serialize;

use crate::failure::{CmdResult, Failure};
use crate::source::DatasetInfo;

/// Provenance record written beside every trace. `config` uses the config-file
/// keys, so writing it out as `key = value` lines and passing that file with
/// `--config` repeats the run.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command_line: Vec<String>,
    pub config: BTreeMap<String, String>,
    pub dataset: DatasetInfo,
    pub seeds: BTreeMap<String, u64>,
    pub started_at: String,
    pub finished_at: String,
    pub version: String,
}

pub fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

impl RunManifest {
    pub fn new(
        config: BTreeMap<String, String>,
        dataset: DatasetInfo,
        seeds: BTreeMap<String, u64>,
        started_at: String,
    ) -> Self {
        RunManifest {
            command_line: std::env::args().collect(),
            config,
            dataset,
            seeds,
            started_at,
            finished_at: now(),
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    pub fn write(&self, path: &Path) -> CmdResult {
        let text = serde_json::to_string_pretty(self).map_err(Failure::runtime)?;
        crate::source::write_text(path, &(text + "\n"))
    }
}
