use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use epidemic::mixing::{
    binomial_cdf, check_average_preservation, indegree_histogram, indegree_tail, mc_average_variance, mc_contraction,
    IndegreeHistogram, Variant,
};
use epidemic::problems::{dirichlet_partition, DataSource, LabeledDataset};
use epidemic::rng::{derive_seed, stream, Purpose};
use epidemic::simulator::{
    compare, write_metrics_csv, write_metrics_jsonl, Comparison, ExperimentConfig, Manifest, Simulation,
};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::files::{decode, ensure_dir, read_config, write_atomic, write_text};
use crate::{CliError, CliResult, Common};

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

fn out_dir(common: &Common) -> CliResult<PathBuf> {
    ensure_dir(common.out.as_deref().unwrap_or(Path::new("out")))
}

/// Files written by `run`.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub csv: PathBuf,
    pub jsonl: PathBuf,
    pub manifest_path: PathBuf,
    pub rows: usize,
    pub manifest: Manifest,
}

impl RunReport {
    pub fn describe(&self) -> String {
        let d = &self.manifest.derived;
        format!(
            "{} rows -> {}\ngamma = {:.6e}, L = {:.4}, sigma = {:.4}, H = {:.4}, Delta0 = {:.6e}",
            self.rows,
            self.csv.display(),
            d.gamma,
            d.smoothness,
            d.sigma,
            d.heterogeneity,
            d.delta0
        )
    }
}

pub fn cmd_run(common: &Common) -> CliResult<RunReport> {
    let path = common.config.as_deref();
    let mut config: ExperimentConfig = decode(read_config(path, "run")?, path)?;
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    let mut sim = Simulation::new(&config).map_err(|e| config_err(format!("run: {e}")))?;
    for w in config.warnings() {
        eprintln!("warning: {w}");
    }
    let metrics = sim.run_to_end().map_err(|e| runtime(format!("run: {e}")))?;
    let dir = out_dir(common)?;
    let manifest = Manifest::new(&config, sim.derived());
    let (csv, jsonl, manifest_path) = (dir.join("metrics.csv"), dir.join("metrics.jsonl"), dir.join("manifest.json"));
    write_atomic(&csv, |w| write_metrics_csv(w, &metrics).map_err(runtime))?;
    write_atomic(&jsonl, |w| write_metrics_jsonl(w, &metrics).map_err(runtime))?;
    write_text(&manifest_path, &manifest.to_json().map_err(runtime)?)?;
    Ok(RunReport { csv, jsonl, manifest_path, rows: metrics.len(), manifest })
}

/// Reads a compare file: the fields of one experiment plus a `[[topologies]]`
/// list and an optional `threshold`.
fn compare_configs(common: &Common) -> CliResult<(Vec<ExperimentConfig>, Option<f64>)> {
    let path = common.config.as_deref();
    let mut table = read_config(path, "compare")?;
    let topologies = match table.remove("topologies") {
        Some(toml::Value::Array(list)) if !list.is_empty() => list,
        _ => return Err(CliError::Config("compare: config needs a non-empty [[topologies]] list".into())),
    };
    let threshold = match table.remove("threshold") {
        None => None,
        Some(v) => Some(
            v.as_float()
                .or_else(|| v.as_integer().map(|i| i as f64))
                .ok_or_else(|| CliError::Config("compare: threshold must be a number".into()))?,
        ),
    };
    let mut configs = Vec::with_capacity(topologies.len());
    for topo in topologies {
        let mut t = table.clone();
        t.insert("topology".into(), topo);
        let mut cfg: ExperimentConfig = decode(t, path)?;
        if let Some(seed) = common.seed {
            cfg.seed = seed;
        }
        cfg.validate().map_err(|e| config_err(format!("compare: {}: {e}", cfg.topology.label())))?;
        configs.push(cfg);
    }
    Ok((configs, threshold))
}

pub fn cmd_compare(common: &Common, threshold: Option<f64>) -> CliResult<Comparison> {
    let (configs, file_threshold) = compare_configs(common)?;
    let result = compare(&configs, threshold.or(file_threshold)).map_err(|e| match e {
        epidemic::Error::MismatchedConfigs(_) => config_err(e),
        other => runtime(other),
    })?;
    let dir = out_dir(common)?;
    write_atomic(&dir.join("compare.csv"), |w| result.write_csv(w).map_err(runtime))?;
    let summary = serde_json::to_string_pretty(&result.summaries).map_err(runtime)?;
    write_text(&dir.join("compare_summary.json"), &summary)?;
    Ok(result)
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct VerifyFile {
    #[serde(default = "default_grid")]
    grid: Vec<(usize, usize)>,
    #[serde(default = "default_variants")]
    variants: Vec<Variant>,
    #[serde(default = "default_trials")]
    trials: u64,
    #[serde(default = "default_dim")]
    dim: usize,
    #[serde(default)]
    seed: u64,
}

fn default_grid() -> Vec<(usize, usize)> {
    vec![(8, 2), (16, 3)]
}

fn default_variants() -> Vec<Variant> {
    vec![Variant::Oracle, Variant::Local]
}

fn default_trials() -> u64 {
    100_000
}

fn default_dim() -> usize {
    4
}

impl Default for VerifyFile {
    fn default() -> Self {
        Self { grid: default_grid(), variants: default_variants(), trials: default_trials(), dim: default_dim(), seed: 0 }
    }
}

/// Below this many trials the standard errors are too wide to mean much.
pub const MIN_MEANINGFUL_TRIALS: u64 = 1000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyRow {
    pub n: usize,
    pub s: usize,
    pub variant: Variant,
    pub check: &'static str,
    pub closed_form: f64,
    pub estimate: f64,
    pub std_error: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub trials: u64,
    pub rows: Vec<VerifyRow>,
    pub warnings: Vec<String>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| !r.pass).count()
    }

    pub fn table(&self) -> String {
        let mut out = format!(
            "{:>6} {:>4} {:<7} {:<12} {:>13} {:>13} {:>11}  result\n",
            "n", "s", "variant", "check", "closed-form", "estimate", "std-error"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:>6} {:>4} {:<7} {:<12} {:>13.6e} {:>13.6e} {:>11.3e}  {}",
                r.n,
                r.s,
                r.variant.name().trim_start_matches("el-"),
                r.check,
                r.closed_form,
                r.estimate,
                r.std_error,
                if r.pass { "PASS" } else { "FAIL" }
            );
        }
        out
    }
}

fn gaussian_vectors(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = stream(seed, Purpose::Init, n as u64, d as u64);
    (0..n)
        .map(|_| (0..d).map(|_| 1.0 + <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)).collect())
        .collect()
}

pub fn cmd_verify_mixing(common: &Common) -> CliResult<VerifyReport> {
    let mut spec = match common.config.as_deref() {
        Some(p) => decode::<VerifyFile>(read_config(Some(p), "verify-mixing")?, Some(p))?,
        None => VerifyFile::default(),
    };
    if let Some(t) = common.trials {
        spec.trials = t;
    }
    if let Some(s) = common.seed {
        spec.seed = s;
    }
    if spec.trials < 2 {
        return Err(CliError::Config("verify-mixing: need at least 2 trials".into()));
    }
    if spec.dim == 0 {
        return Err(CliError::Config("verify-mixing: dim must be at least 1".into()));
    }
    let mut warnings = Vec::new();
    if spec.trials < MIN_MEANINGFUL_TRIALS {
        warnings.push(format!(
            "verify-mixing: {} trials give standard errors too wide to be meaningful (use at least {MIN_MEANINGFUL_TRIALS})",
            spec.trials
        ));
    }
    let mut rows = Vec::new();
    for &(n, s) in &spec.grid {
        let vectors = gaussian_vectors(n, spec.dim, spec.seed);
        for &variant in &spec.variants {
            let tag = match variant {
                Variant::Oracle => 1,
                Variant::Local => 2,
            };
            let seed = derive_seed(spec.seed, Purpose::MonteCarlo, (n as u64) << 32 | s as u64, tag);
            let c = mc_contraction(variant, s, &vectors, spec.trials, seed).map_err(|e| config_err(format!("verify-mixing: {e}")))?;
            rows.push(VerifyRow {
                n,
                s,
                variant,
                check: "contraction",
                closed_form: c.target,
                estimate: c.mean_ratio,
                std_error: c.std_error,
                pass: c.agrees(3.0),
            });
            let a = check_average_preservation(variant, s, &vectors, spec.trials, seed).map_err(runtime)?;
            rows.push(match variant {
                Variant::Oracle => VerifyRow {
                    n,
                    s,
                    variant,
                    check: "average",
                    closed_form: 0.0,
                    estimate: a.relative_max_residual(),
                    std_error: 0.0,
                    pass: a.relative_max_residual() <= 1e-12,
                },
                Variant::Local => VerifyRow {
                    n,
                    s,
                    variant,
                    check: "average",
                    closed_form: 0.0,
                    estimate: a.mean_residual_vector_norm,
                    std_error: a.std_error,
                    pass: a.drift_within(3.0),
                },
            });
            if variant == Variant::Local {
                let v = mc_average_variance(s, &vectors, spec.trials, seed).map_err(runtime)?;
                rows.push(VerifyRow {
                    n,
                    s,
                    variant,
                    check: "avg-variance",
                    closed_form: v.bound,
                    estimate: v.estimate,
                    std_error: v.std_error,
                    pass: v.within_bound(3.0),
                });
            }
        }
    }
    let report = VerifyReport { trials: spec.trials, rows, warnings };
    if let Some(dir) = &common.out {
        let dir = ensure_dir(dir)?;
        write_text(&dir.join("verify_mixing.json"), &serde_json::to_string_pretty(&report).map_err(runtime)?)?;
    }
    Ok(report)
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct IndegreeFile {
    n: Option<usize>,
    s: Option<usize>,
    rounds: Option<u64>,
    #[serde(default)]
    seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndegreeReport {
    pub histogram: IndegreeHistogram,
    /// Empirical 99th-percentile indegree.
    pub p99: usize,
    /// 99th percentile of Binomial(n - 1, s / (n - 1)).
    pub exact_p99: usize,
    /// Exact `P(indegree >= p99)`.
    pub tail_at_p99: f64,
    pub ks_distance: f64,
    pub csv: Option<PathBuf>,
}

impl IndegreeReport {
    pub fn describe(&self) -> String {
        let h = &self.histogram;
        format!(
            "n = {}, s = {}, rounds = {}\n99th-percentile indegree: {} (exact binomial: {})\nexact P(indegree >= {}) = {:.6}\nmean indegree {:.4}, KS distance to binomial {:.3e}",
            h.n,
            h.s,
            h.rounds,
            self.p99,
            self.exact_p99,
            self.p99,
            self.tail_at_p99,
            h.mean(),
            self.ks_distance
        )
    }
}

pub fn cmd_indegree(common: &Common, n: Option<usize>, s: Option<usize>, rounds: Option<u64>) -> CliResult<IndegreeReport> {
    let file = match common.config.as_deref() {
        Some(p) => decode::<IndegreeFile>(read_config(Some(p), "indegree")?, Some(p))?,
        None => IndegreeFile::default(),
    };
    let n = n.or(file.n).ok_or_else(|| CliError::Config("indegree: n is required (--n or config)".into()))?;
    let s = s.or(file.s).ok_or_else(|| CliError::Config("indegree: s is required (--s or config)".into()))?;
    let rounds = rounds.or(file.rounds).unwrap_or(5000);
    let seed = common.seed.unwrap_or(file.seed);
    if rounds == 0 {
        return Err(CliError::Config("indegree: rounds must be at least 1".into()));
    }
    let exact = binomial_cdf(n, s).map_err(|e| config_err(format!("indegree: {e}")))?;
    let histogram = indegree_histogram(n, s, rounds, seed).map_err(runtime)?;
    let p99 = histogram.quantile(0.99);
    let exact_p99 = exact.iter().position(|&c| c >= 0.99).unwrap_or(n - 1);
    let tail_at_p99 = indegree_tail(n, s, p99).map_err(runtime)?;
    let ks_distance = histogram.ks_distance(&exact);
    let csv = match &common.out {
        Some(dir) => {
            let dir = ensure_dir(dir)?;
            let path = dir.join("indegree.csv");
            let observed_max = histogram.counts.iter().rposition(|&c| c > 0).unwrap_or(0);
            let exact_max = exact.iter().position(|&c| c >= 1.0 - 1e-12).unwrap_or(n - 1);
            let kmax = observed_max.max(exact_max).min(n - 1);
            let cdf = histogram.cdf();
            let mut text = String::from("k,empirical_cdf,binomial_cdf\n");
            for k in 0..=kmax {
                let _ = writeln!(text, "{k},{},{}", cdf[k], exact[k]);
            }
            write_text(&path, &text)?;
            Some(path)
        }
        None => None,
    };
    Ok(IndegreeReport { histogram, p99, exact_p99, tail_at_p99, ks_distance, csv })
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct PartitionFile {
    n: usize,
    #[serde(default = "default_alpha")]
    alpha: f64,
    #[serde(default)]
    seed: u64,
    data: DataSource,
}

fn default_alpha() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartitionReport {
    pub classes: usize,
    /// `counts[node][class]`.
    pub counts: Vec<Vec<usize>>,
}

impl PartitionReport {
    /// Share of the largest class on each non-empty node.
    pub fn dominant_shares(&self) -> Vec<Option<f64>> {
        self.counts
            .iter()
            .map(|row| {
                let total: usize = row.iter().sum();
                (total > 0).then(|| *row.iter().max().unwrap_or(&0) as f64 / total as f64)
            })
            .collect()
    }

    pub fn table(&self) -> String {
        let mut out = format!("{:>5} {:>7} {:>8} {:>9}\n", "node", "items", "classes", "dominant");
        for (i, (row, dom)) in self.counts.iter().zip(self.dominant_shares()).enumerate() {
            let present = row.iter().filter(|&&c| c > 0).count();
            let dom = dom.map_or_else(|| "-".to_string(), |d| format!("{d:.3}"));
            let _ = writeln!(out, "{i:>5} {:>7} {present:>8} {dom:>9}", row.iter().sum::<usize>());
        }
        out
    }
}

pub fn cmd_partition_stats(common: &Common) -> CliResult<PartitionReport> {
    let path = common.config.as_deref();
    let file: PartitionFile = decode(read_config(path, "partition-stats")?, path)?;
    let seed = common.seed.unwrap_or(file.seed);
    let mut rng = stream(seed, Purpose::Partition, 0, 0);
    let data = match &file.data {
        DataSource::Csv { path } => LabeledDataset::from_csv_path(path).map_err(config_err)?,
        DataSource::Gaussian { classes, per_class, features, separation } => {
            LabeledDataset::gaussian_clusters(*classes, *per_class, *features, *separation, &mut rng)
                .map_err(config_err)?
        }
    };
    let parts = dirichlet_partition(&data, file.alpha, file.n, &mut rng).map_err(|e| config_err(format!("partition-stats: {e}")))?;
    let counts: Vec<Vec<usize>> = parts
        .iter()
        .map(|p| {
            let mut row = vec![0usize; data.classes];
            p.iter().for_each(|&i| row[data.labels[i]] += 1);
            row
        })
        .collect();
    let report = PartitionReport { classes: data.classes, counts };
    if let Some(dir) = &common.out {
        let dir = ensure_dir(dir)?;
        let mut text = String::from("node,class,count\n");
        for (i, row) in report.counts.iter().enumerate() {
            for (c, count) in row.iter().enumerate() {
                let _ = writeln!(text, "{i},{c},{count}");
            }
        }
        write_text(&dir.join("partition.csv"), &text)?;
    }
    Ok(report)
}
