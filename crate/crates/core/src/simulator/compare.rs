use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use super::{run_full, DerivedConstants, ExperimentConfig, RoundMetrics, METRIC_COLUMNS};
use crate::error::{Error, Result};
use crate::problems::ProblemSpec;

/// Metrics of every run at one round.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub round: u64,
    pub runs: Vec<RoundMetrics>,
}

/// Final state of one run in a comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub label: String,
    pub last: RoundMetrics,
    /// First sampled round with `gap_to_opt` below the threshold.
    pub rounds_to_threshold: Option<u64>,
    pub derived: DerivedConstants,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub threshold: Option<f64>,
    pub rows: Vec<ComparisonRow>,
    pub summaries: Vec<RunSummary>,
}

/// First sampled round whose `gap_to_opt` is below `threshold`.
pub fn rounds_to_threshold(metrics: &[RoundMetrics], threshold: f64) -> Option<u64> {
    metrics.iter().find(|m| m.gap_to_opt < threshold).map(|m| m.round)
}

fn effective_problem(cfg: &ExperimentConfig) -> ProblemSpec {
    let mut p = cfg.problem.clone();
    let seed = Some(p.seed().unwrap_or(cfg.seed));
    match &mut p {
        ProblemSpec::Quadratic { seed: s, .. }
        | ProblemSpec::DirichletQuadratic { seed: s, .. }
        | ProblemSpec::Dataset { seed: s, .. } => *s = seed,
    }
    p
}

fn check_comparable(configs: &[ExperimentConfig]) -> Result<()> {
    let first = configs.first().ok_or_else(|| Error::MismatchedConfigs("no configs given".into()))?;
    let problem = effective_problem(first);
    for (k, c) in configs.iter().enumerate().skip(1) {
        let why = if c.n != first.n {
            Some("n differs")
        } else if c.d != first.d {
            Some("d differs")
        } else if effective_problem(c) != problem {
            Some("problem or problem seed differs")
        } else if c.rounds != first.rounds {
            Some("T differs")
        } else if c.metrics_every != first.metrics_every {
            Some("metrics_every differs")
        } else {
            None
        };
        if let Some(why) = why {
            return Err(Error::MismatchedConfigs(format!("config {k}: {why}")));
        }
    }
    Ok(())
}

/// Runs every config (in parallel) and lines the metrics up by round.
pub fn compare(configs: &[ExperimentConfig], threshold: Option<f64>) -> Result<Comparison> {
    check_comparable(configs)?;
    let outputs = configs.par_iter().map(run_full).collect::<Result<Vec<_>>>()?;
    let rows = (0..outputs[0].metrics.len())
        .map(|r| ComparisonRow {
            round: outputs[0].metrics[r].round,
            runs: outputs.iter().map(|o| o.metrics[r].clone()).collect(),
        })
        .collect();
    let summaries = configs
        .iter()
        .zip(&outputs)
        .map(|(c, o)| RunSummary {
            label: c.topology.label(),
            last: o.metrics.last().cloned().expect("at least one sampled round"),
            rounds_to_threshold: threshold.and_then(|t| rounds_to_threshold(&o.metrics, t)),
            derived: o.derived.clone(),
        })
        .collect();
    Ok(Comparison { threshold, rows, summaries })
}

impl Comparison {
    /// Wide CSV: `round`, then `<label>:<metric>` for every run and metric.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let err = |e: csv::Error| Error::param("output", e.to_string());
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["round".to_string()];
        for (k, s) in self.summaries.iter().enumerate() {
            for col in &METRIC_COLUMNS[1..] {
                header.push(format!("{k}:{}:{col}", s.label));
            }
        }
        w.write_record(&header).map_err(err)?;
        for row in &self.rows {
            let mut rec = vec![row.round.to_string()];
            for m in &row.runs {
                rec.extend([
                    m.avg_grad_norm_sq.to_string(),
                    m.consensus.to_string(),
                    m.loss_at_avg.to_string(),
                    m.gap_to_opt.to_string(),
                    m.messages_sent.to_string(),
                    m.bytes_sent.to_string(),
                ]);
            }
            w.write_record(&rec).map_err(err)?;
        }
        w.flush().map_err(|e| Error::param("output", e.to_string()))
    }

    /// Plain-text final-round summary, one line per run.
    pub fn summary_table(&self) -> String {
        let mut out = format!(
            "{:<24} {:>14} {:>14} {:>14} {:>12}\n",
            "topology", "grad_norm_sq", "consensus", "gap_to_opt", "rounds_to_thr"
        );
        for s in &self.summaries {
            let thr = s.rounds_to_threshold.map_or_else(|| "-".to_string(), |r| r.to_string());
            out.push_str(&format!(
                "{:<24} {:>14.6e} {:>14.6e} {:>14.6e} {:>12}\n",
                s.label, s.last.avg_grad_norm_sq, s.last.consensus, s.last.gap_to_opt, thr
            ));
        }
        out
    }
}
