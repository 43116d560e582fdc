use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{DerivedConstants, ExperimentConfig, RoundMetrics};
use crate::error::{Error, Result};

/// Column order of metric files.
pub const METRIC_COLUMNS: [&str; 7] =
    ["round", "avg_grad_norm_sq", "consensus", "loss_at_avg", "gap_to_opt", "messages_sent", "bytes_sent"];

fn io(e: impl std::fmt::Display) -> Error {
    Error::param("output", e.to_string())
}

/// Header plus one row per sampled round.
pub fn write_metrics_csv<W: Write>(writer: W, metrics: &[RoundMetrics]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    w.write_record(METRIC_COLUMNS).map_err(io)?;
    for m in metrics {
        w.serialize(m).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// One JSON object per sampled round, keyed like the CSV columns.
pub fn write_metrics_jsonl<W: Write>(mut writer: W, metrics: &[RoundMetrics]) -> Result<()> {
    for m in metrics {
        serde_json::to_writer(&mut writer, m).map_err(io)?;
        writer.write_all(b"\n").map_err(io)?;
    }
    writer.flush().map_err(io)
}

/// Record of what a run actually used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub derived: DerivedConstants,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl Manifest {
    pub fn new(config: &ExperimentConfig, derived: &DerivedConstants) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: config.seed,
            config: config.clone(),
            derived: derived.clone(),
            warnings: config.warnings(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(io)
    }
}
