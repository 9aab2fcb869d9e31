//! Benchmark driver behind the command-line interface: instance files,
//! per-method solve reports, order certification and Monte Carlo sweeps.

pub mod io;
mod sweep;

use serde::Serialize;
use thiserror::Error;

pub use io::{instance_to_json, load_instance, parse_instance, InstanceFile};
pub use sweep::{
    format_row, mix_seed, run_sweep, summary_to_csv, sweep_to_csv, trial_seed, write_sweep,
    SummaryRow, SweepConfig, SweepOutput, SweepRow, NA, ROW_HEADER, SUMMARY_HEADER,
};

use crate::certificate::{certify_solution, DualCertificate};
use crate::duality::mac_to_bc;
use crate::error::SolveError;
use crate::fixed_order::{solve_fixed_order, FixedOrderSolution};
use crate::instance::{PrecodingOrder, ProblemInstance};
use crate::ordering::{default_heuristic_iters, exhaustive_search, heuristic_search, random_order};
use crate::relaxation::{ellipsoid_solve, RelaxationParams, RelaxationSolution, TimeSharing};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BenchError {
    #[error("validation error: {0}")]
    Validation(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("I/O error: {0}")]
    Io(String),
}

impl BenchError {
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Validation(_) => 2,
            BenchError::Solver(_) => 3,
            BenchError::Io(_) => 4,
        }
    }
}

impl From<SolveError> for BenchError {
    fn from(e: SolveError) -> Self {
        match e {
            SolveError::Model(m) => BenchError::Validation(m.to_string()),
            other => BenchError::Solver(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Random,
    Heuristic,
    Exhaustive,
    Relaxation,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::Random,
        Method::Heuristic,
        Method::Exhaustive,
        Method::Relaxation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Random => "random",
            Method::Heuristic => "heuristic",
            Method::Exhaustive => "exhaustive",
            Method::Relaxation => "relaxation",
        }
    }

    pub fn parse(s: &str) -> Result<Self, BenchError> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s.trim())
            .ok_or_else(|| BenchError::Validation(format!("unknown method `{s}`")))
    }

    /// Comma-separated list.
    pub fn parse_list(s: &str) -> Result<Vec<Self>, BenchError> {
        let mut out = Vec::new();
        for part in s.split(',').filter(|p| !p.trim().is_empty()) {
            let m = Method::parse(part)?;
            if !out.contains(&m) {
                out.push(m);
            }
        }
        if out.is_empty() {
            return Err(BenchError::Validation("no method given".into()));
        }
        Ok(out)
    }
}

/// Seed of the random baseline order drawn for an instance seed. The
/// heuristic starts from the same order.
pub fn baseline_order_seed(instance_seed: u64) -> u64 {
    mix_seed(instance_seed ^ 0x6a09_e667_f3bc_c908)
}

/// Result of one method on one instance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodReport {
    pub method: Method,
    pub sum_power: f64,
    pub sum_power_db: f64,
    pub powers: Vec<f64>,
    pub rates: Vec<f64>,
    /// Single decoding order (the lowest-multiplier-first order for the relaxation).
    pub order: Vec<usize>,
    pub certificate: Option<DualCertificate>,
    pub time_sharing: Option<TimeSharing>,
    /// Downlink powers for single-order solutions.
    pub downlink_powers: Option<Vec<f64>>,
    pub iterations: usize,
    pub termination: String,
    pub converged: bool,
    pub multipliers: Option<Vec<f64>>,
    pub dual_gap_bound: Option<f64>,
}

pub fn to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

fn single_order_report(
    instance: &ProblemInstance,
    method: Method,
    sol: &FixedOrderSolution,
    iterations: usize,
    termination: &str,
    certificate: Option<DualCertificate>,
) -> Result<MethodReport, BenchError> {
    let downlink = mac_to_bc(instance, &sol.order, &sol.powers)?;
    Ok(MethodReport {
        method,
        sum_power: sol.sum_power(),
        sum_power_db: to_db(sol.sum_power()),
        powers: sol.powers.powers().to_vec(),
        rates: sol.achieved_rates.clone(),
        order: sol.order.as_slice().to_vec(),
        certificate: Some(certificate.unwrap_or_else(|| certify_solution(instance, sol))),
        time_sharing: None,
        downlink_powers: Some(downlink.beams.downlink_powers),
        iterations,
        termination: termination.to_string(),
        converged: true,
        multipliers: None,
        dual_gap_bound: None,
    })
}

fn relaxation_report(
    instance: &ProblemInstance,
    sol: &RelaxationSolution,
) -> Result<MethodReport, BenchError> {
    let vertex = solve_fixed_order(instance, &sol.order)?;
    Ok(MethodReport {
        method: Method::Relaxation,
        sum_power: sol.sum_power,
        sum_power_db: to_db(sol.sum_power),
        powers: sol.powers.powers().to_vec(),
        rates: sol.achieved_rates.clone(),
        order: sol.order.as_slice().to_vec(),
        certificate: Some(certify_solution(instance, &vertex)),
        time_sharing: sol.time_sharing.clone(),
        downlink_powers: None,
        iterations: sol.iterations,
        termination: if sol.converged {
            "Converged"
        } else {
            "IterationCap"
        }
        .to_string(),
        converged: sol.converged,
        multipliers: Some(sol.multipliers.clone()),
        dual_gap_bound: Some(sol.dual_gap_bound),
    })
}

/// Runs `method` on `instance`. `order_seed` seeds the random baseline order
/// (also the heuristic's starting order). A relaxation that exhausts its
/// iterations still yields a report with `converged == false`.
pub fn run_method(
    instance: &ProblemInstance,
    method: Method,
    order_seed: u64,
    params: &RelaxationParams,
) -> Result<MethodReport, BenchError> {
    let m = instance.num_users();
    match method {
        Method::Random => {
            let sol = solve_fixed_order(instance, &random_order(m, order_seed))?;
            single_order_report(instance, method, &sol, 1, "NA", None)
        }
        Method::Heuristic => {
            let start = random_order(m, order_seed);
            let (_, sol, cert, trace) =
                heuristic_search(instance, &start, default_heuristic_iters(m))?;
            single_order_report(
                instance,
                method,
                &sol,
                trace.iterations(),
                trace.termination.as_str(),
                Some(cert),
            )
        }
        Method::Exhaustive => {
            let (_, sol) = exhaustive_search(instance)?;
            let count = (1..=m).product();
            single_order_report(instance, method, &sol, count, "NA", None)
        }
        Method::Relaxation => match ellipsoid_solve(instance, params) {
            Ok(sol) => relaxation_report(instance, &sol),
            Err(SolveError::NotConverged(sol)) => relaxation_report(instance, &sol),
            Err(e) => Err(e.into()),
        },
    }
}

/// JSON document printed by `solve`.
#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub instance: InstanceFile,
    pub results: Vec<MethodReport>,
}

pub fn cmd_solve(
    instance: &ProblemInstance,
    methods: &[Method],
    order_seed: u64,
    params: &RelaxationParams,
) -> Result<SolveReport, BenchError> {
    let results = methods
        .iter()
        .map(|&m| run_method(instance, m, order_seed, params))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SolveReport {
        instance: InstanceFile::from(instance),
        results,
    })
}

/// JSON document printed by `certify`.
#[derive(Debug, Clone, Serialize)]
pub struct CertifyReport {
    pub order: Vec<usize>,
    pub multipliers: Vec<f64>,
    pub verdict: crate::certificate::Verdict,
    pub tie_positions: Vec<usize>,
    pub sum_power: f64,
}

pub fn cmd_certify(
    instance: &ProblemInstance,
    order: &[usize],
) -> Result<CertifyReport, BenchError> {
    let order =
        PrecodingOrder::new(order.to_vec()).map_err(|e| BenchError::Validation(e.to_string()))?;
    if order.len() != instance.num_users() {
        return Err(BenchError::Validation(format!(
            "order has {} entries, instance has {} users",
            order.len(),
            instance.num_users()
        )));
    }
    let sol = solve_fixed_order(instance, &order)?;
    let cert = certify_solution(instance, &sol);
    Ok(CertifyReport {
        order: order.into_vec(),
        multipliers: cert.multipliers,
        verdict: cert.verdict,
        tie_positions: cert.tie_positions,
        sum_power: sol.sum_power(),
    })
}

/// Parses `M,NT,RATE,SEED`.
pub fn parse_sample_spec(spec: &str) -> Result<(usize, usize, f64, u64), BenchError> {
    let parts: Vec<&str> = spec.split(',').map(str::trim).collect();
    let bad = || BenchError::Validation(format!("--sample expects M,NT,RATE,SEED, got `{spec}`"));
    if parts.len() != 4 {
        return Err(bad());
    }
    let m = parts[0].parse().map_err(|_| bad())?;
    let nt = parts[1].parse().map_err(|_| bad())?;
    let rate: f64 = parts[2].parse().map_err(|_| bad())?;
    let seed = parts[3].parse().map_err(|_| bad())?;
    if m == 0 || nt == 0 || !rate.is_finite() || rate < 0.0 {
        return Err(bad());
    }
    Ok((m, nt, rate, seed))
}

/// Parses a comma-separated 0-based permutation.
pub fn parse_order(spec: &str) -> Result<Vec<usize>, BenchError> {
    spec.split(',')
        .map(|p| p.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|_| {
            BenchError::Validation(format!(
                "order must be comma-separated user indices, got `{spec}`"
            ))
        })
}
