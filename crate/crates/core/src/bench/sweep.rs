//! Monte Carlo sweeps over equal per-user rate targets.
//!
//! Each (grid point, trial) draws one Rayleigh instance from a seed derived
//! with SplitMix64 from `(master seed, grid index, trial index)`; every
//! selected method runs on that same instance. Rows are emitted in
//! (grid, trial, method) order so the CSV bytes do not depend on the number
//! of worker threads.

use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde::Deserialize;

use super::{baseline_order_seed, run_method, to_db, BenchError, Method};
use crate::instance::sample_rayleigh_instance;
use crate::ordering::MAX_EXHAUSTIVE_USERS;
use crate::relaxation::RelaxationParams;

/// Missing-value marker in CSV output.
pub const NA: &str = "NA";

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub num_users: usize,
    pub num_tx_antennas: usize,
    /// Equal per-user targets in bits, strictly positive and increasing.
    pub rate_grid: Vec<f64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub max_iters: Option<usize>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// Wall time breaks byte-for-byte reproducibility, so it is opt-in.
    #[serde(default)]
    pub record_wall_time: bool,
}

fn default_trials() -> usize {
    1000
}

fn default_methods() -> Vec<Method> {
    Method::ALL.to_vec()
}

impl SweepConfig {
    pub fn from_json(text: &str) -> Result<Self, BenchError> {
        let cfg: Self = serde_json::from_str(text)
            .map_err(|e| BenchError::Validation(format!("sweep config schema error: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let fail = |msg: String| Err(BenchError::Validation(msg));
        if self.num_users == 0 || self.num_tx_antennas == 0 {
            return fail("num_users and num_tx_antennas must be positive".into());
        }
        if self.trials == 0 {
            return fail("trials must be at least 1".into());
        }
        if self.rate_grid.is_empty() {
            return fail("rate_grid must not be empty".into());
        }
        if self.rate_grid.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return fail("rate_grid entries must be finite and strictly positive".into());
        }
        if self.rate_grid.windows(2).any(|w| w[1] <= w[0]) {
            return fail("rate_grid must be strictly increasing".into());
        }
        if self.methods.is_empty() {
            return fail("methods must not be empty".into());
        }
        if self.methods.contains(&Method::Exhaustive) && self.num_users > MAX_EXHAUSTIVE_USERS {
            return fail(format!(
                "exhaustive search needs num_users <= {MAX_EXHAUSTIVE_USERS}"
            ));
        }
        if let Some(t) = self.tol {
            if !(t.is_finite() && t > 0.0) {
                return fail("tol must be positive".into());
            }
        }
        if self.max_iters == Some(0) {
            return fail("max_iters must be positive".into());
        }
        Ok(())
    }

    pub fn relaxation_params(&self) -> RelaxationParams {
        let mut p = RelaxationParams::default();
        if let Some(t) = self.tol {
            p.tol = t;
        }
        if let Some(n) = self.max_iters {
            p.max_iters = n;
        }
        p
    }

    fn methods_dedup(&self) -> Vec<Method> {
        let mut out: Vec<Method> = Vec::new();
        for &m in &self.methods {
            if !out.contains(&m) {
                out.push(m);
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub rate_target: f64,
    pub method: Method,
    pub trial: usize,
    pub seed: u64,
    pub sum_power: f64,
    pub sum_power_db: f64,
    pub iterations: usize,
    pub termination: String,
    /// `None` for methods where time-sharing does not apply.
    pub time_sharing: Option<bool>,
    pub wall_time_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub rate_target: f64,
    pub method: Method,
    pub trials: usize,
    pub mean_sum_power: f64,
    /// `10 log10` of the mean linear power.
    pub mean_sum_power_db: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    pub rows: Vec<SweepRow>,
    pub summary: Vec<SummaryRow>,
}

/// SplitMix64 finalizer.
pub fn mix_seed(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Instance seed of one trial; independent of how many trials or grid points exist.
pub fn trial_seed(master: u64, grid_index: usize, trial: usize) -> u64 {
    mix_seed(mix_seed(mix_seed(master) ^ grid_index as u64) ^ trial as u64)
}

fn run_trial(
    cfg: &SweepConfig,
    methods: &[Method],
    params: &RelaxationParams,
    grid_index: usize,
    trial: usize,
) -> Result<Vec<SweepRow>, BenchError> {
    let rate = cfg.rate_grid[grid_index];
    let seed = trial_seed(cfg.seed, grid_index, trial);
    let instance = sample_rayleigh_instance(cfg.num_users, cfg.num_tx_antennas, rate, seed)
        .map_err(|e| BenchError::Validation(e.to_string()))?;
    let order_seed = baseline_order_seed(seed);
    methods
        .iter()
        .map(|&method| {
            let start = Instant::now();
            let report = run_method(&instance, method, order_seed, params)?;
            let elapsed = start.elapsed().as_secs_f64();
            Ok(SweepRow {
                rate_target: rate,
                method,
                trial,
                seed,
                sum_power: report.sum_power,
                sum_power_db: report.sum_power_db,
                iterations: report.iterations,
                termination: report.termination,
                time_sharing: (method == Method::Relaxation).then(|| report.time_sharing.is_some()),
                wall_time_s: cfg.record_wall_time.then_some(elapsed),
            })
        })
        .collect()
}

/// Runs the sweep. `on_grid_point` receives each completed grid point's rows
/// as soon as they are available (used for incremental flushing).
pub fn run_sweep(
    cfg: &SweepConfig,
    threads: Option<usize>,
    mut on_grid_point: impl FnMut(&[SweepRow]) -> Result<(), BenchError>,
) -> Result<SweepOutput, BenchError> {
    cfg.validate()?;
    let methods = cfg.methods_dedup();
    let params = cfg.relaxation_params();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| BenchError::Solver(e.to_string()))?;

    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for grid_index in 0..cfg.rate_grid.len() {
        let per_trial: Vec<Vec<SweepRow>> = pool.install(|| {
            (0..cfg.trials)
                .into_par_iter()
                .map(|trial| run_trial(cfg, &methods, &params, grid_index, trial))
                .collect::<Result<_, _>>()
        })?;
        let block: Vec<SweepRow> = per_trial.into_iter().flatten().collect();
        on_grid_point(&block)?;
        for &method in &methods {
            let powers: Vec<f64> = block
                .iter()
                .filter(|r| r.method == method)
                .map(|r| r.sum_power)
                .collect();
            let mean = powers.iter().sum::<f64>() / powers.len() as f64;
            summary.push(SummaryRow {
                rate_target: cfg.rate_grid[grid_index],
                method,
                trials: powers.len(),
                mean_sum_power: mean,
                mean_sum_power_db: to_db(mean),
            });
        }
        rows.extend(block);
    }
    Ok(SweepOutput { rows, summary })
}

pub const ROW_HEADER: &str =
    "rate_target,method,trial,seed,sum_power,sum_power_db,iterations,termination,time_sharing,wall_time_s";
pub const SUMMARY_HEADER: &str = "rate_target,method,trials,mean_sum_power,mean_sum_power_db";

pub fn format_row(row: &SweepRow) -> String {
    let ts = row.time_sharing.map_or(NA.to_string(), |b| b.to_string());
    let wall = row.wall_time_s.map_or(NA.to_string(), |w| w.to_string());
    format!(
        "{},{},{},{},{},{},{},{},{},{}",
        row.rate_target,
        row.method.name(),
        row.trial,
        row.seed,
        row.sum_power,
        row.sum_power_db,
        row.iterations,
        row.termination,
        ts,
        wall
    )
}

pub fn sweep_to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(ROW_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&format_row(row));
        out.push('\n');
    }
    out
}

pub fn summary_to_csv(summary: &[SummaryRow]) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for s in summary {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            s.rate_target,
            s.method.name(),
            s.trials,
            s.mean_sum_power,
            s.mean_sum_power_db
        );
    }
    out
}

/// Writes rows to `out` as they complete and the summary to a sibling
/// `<stem>.summary.csv`. Returns the summary path.
pub fn write_sweep(
    cfg: &SweepConfig,
    out: &std::path::Path,
    threads: Option<usize>,
) -> Result<(SweepOutput, PathBuf), BenchError> {
    cfg.validate()?;
    let io_err = |e: std::io::Error| BenchError::Io(format!("{}: {e}", out.display()));
    let file = std::fs::File::create(out).map_err(io_err)?;
    let mut writer = std::io::BufWriter::new(file);
    writeln!(writer, "{ROW_HEADER}").map_err(io_err)?;
    let result = run_sweep(cfg, threads, |block| {
        for row in block {
            writeln!(writer, "{}", format_row(row)).map_err(io_err)?;
        }
        writer.flush().map_err(io_err)
    })?;
    writer.flush().map_err(io_err)?;
    let summary_path = out.with_extension("summary.csv");
    std::fs::write(&summary_path, summary_to_csv(&result.summary))
        .map_err(|e| BenchError::Io(format!("{}: {e}", summary_path.display())))?;
    Ok((result, summary_path))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(methods: Vec<Method>, trials: usize) -> SweepConfig {
        SweepConfig {
            num_users: 3,
            num_tx_antennas: 3,
            rate_grid: vec![0.5, 1.0, 1.5],
            trials,
            seed: 5,
            methods,
            tol: None,
            max_iters: None,
            out: None,
            record_wall_time: false,
        }
    }

    #[test]
    fn seeds_are_stable_and_distinct() {
        assert_eq!(trial_seed(1, 2, 3), trial_seed(1, 2, 3));
        assert_ne!(trial_seed(1, 2, 3), trial_seed(1, 3, 2));
        assert_ne!(trial_seed(1, 0, 0), trial_seed(2, 0, 0));
    }

    #[test]
    fn config_validation() {
        let mut cfg = config(Method::ALL.to_vec(), 1);
        assert!(cfg.validate().is_ok());
        cfg.rate_grid = vec![1.0, 1.0];
        assert!(cfg.validate().is_err());
        cfg.rate_grid = vec![0.0, 1.0];
        assert!(cfg.validate().is_err());
        let mut cfg = config(vec![Method::Exhaustive], 1);
        cfg.num_users = 9;
        assert!(cfg.validate().is_err());
        let mut cfg = config(vec![Method::Random], 0);
        assert!(cfg.validate().is_err());
        cfg.trials = 1;
        assert!(SweepConfig::from_json(
            r#"{"num_users":2,"num_tx_antennas":2,"rate_grid":[1.0],"bogus":1}"#
        )
        .is_err());
    }

    #[test]
    fn row_count_and_schema() {
        let cfg = config(Method::ALL.to_vec(), 10);
        let out = run_sweep(&cfg, Some(1), |_| Ok(())).unwrap();
        assert_eq!(out.rows.len(), 120);
        assert_eq!(out.summary.len(), 12);
        let csv = sweep_to_csv(&out.rows);
        let cols = ROW_HEADER.split(',').count();
        for line in csv.lines() {
            assert_eq!(line.split(',').count(), cols);
            assert!(line.split(',').all(|f| !f.is_empty()));
        }
        for row in &out.rows {
            assert!((row.sum_power_db - 10.0 * row.sum_power.log10()).abs() <= 1e-12);
        }
    }
}
