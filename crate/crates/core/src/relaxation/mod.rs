//! Minimum sum power over the full MAC capacity region (time-sharing allowed)
//! by maximizing the Lagrangian dual with the ellipsoid method.
//!
//! The dual is `g(lambda) = sum_m lambda_m R_target_m - max_p F(p)`, where
//! `max_p F` combines the best SIC vertex for `lambda` with the sum power
//! (see [`inner`]). `g` is concave; `R_target - R(lambda)` is a
//! supergradient, so the ellipsoid keeps the half-space whose normal is the
//! rate excess `nu = R - R_target`. Multipliers are priced per bit.
//!
//! After the dual has converged, the multiplier tie pattern identifies which
//! nested sum-rate constraints are active. The primal point is then solved
//! exactly on that chain and certified (multiplier signs plus all `2^M - 1`
//! region constraints); a tie group whose vertex rates miss the targets is
//! resolved into a time-sharing mix of decoding orders.

mod ellipsoid;
mod inner;
mod polish;
mod timesharing;

use std::f64::consts::LN_2;

pub use ellipsoid::{log_det_ratio_per_cut, EllipsoidState};
pub use inner::{
    dual_inner_maximize, inner_maximize_from, inner_objective, kkt_residual, telescoped_weights,
    InnerSolution,
};
pub use timesharing::{orders_consistent_with, recover_time_sharing, tie_groups, TimeSharing};

use crate::certificate::{certify, lagrange_multipliers, Verdict, DEFAULT_TIE_TOL as CERT_TIE_TOL};
use crate::error::SolveError;
use crate::fixed_order::solve_fixed_order;
use crate::instance::{
    capacity_region_check, mac_rates, sinr_from_rate, PowerAllocation, PrecodingOrder,
    ProblemInstance,
};

/// Relative tie tolerance on converged multipliers.
pub const DEFAULT_TIE_TOL: f64 = 1e-5;
/// Bits; region check used to accept a recovered primal point.
const PRIMAL_REGION_TOL: f64 = 1e-9;
/// Fraction of the multiplier bound that counts as touching it.
const BOUND_PROXIMITY: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelaxationParams {
    /// Relative dual gap.
    pub tol: f64,
    pub max_iters: usize,
    /// Gradient tolerance of the inner maximization.
    pub inner_tol: f64,
    /// Bits.
    pub feasibility_tol: f64,
    pub tie_tol: f64,
    pub max_restarts: usize,
}

impl Default for RelaxationParams {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iters: 2000,
            inner_tol: 1e-9,
            feasibility_tol: 1e-7,
            tie_tol: DEFAULT_TIE_TOL,
            max_restarts: 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelaxationSolution {
    /// Dual optimum, per bit, by user.
    pub multipliers: Vec<f64>,
    pub powers: PowerAllocation,
    /// Rates delivered at `powers` (the time-sharing average when present).
    pub achieved_rates: Vec<f64>,
    pub sum_power: f64,
    /// Decoding order with ascending multipliers.
    pub order: PrecodingOrder,
    pub time_sharing: Option<TimeSharing>,
    /// Ellipsoid iterations summed over restarts.
    pub iterations: usize,
    pub restarts: usize,
    /// Best dual value found.
    pub dual_value: f64,
    /// `sum_power - dual_value`.
    pub dual_gap_bound: f64,
    /// Best dual value after each iteration of the final run.
    pub dual_history: Vec<f64>,
    pub converged: bool,
}

/// Per-user multiplier bound `ln 2 * 2^{sum R_target} / ||h_m||^2`, the
/// marginal power per bit of a single user carrying the whole rate budget.
pub fn lambda_upper_bound(instance: &ProblemInstance) -> Vec<f64> {
    let total = instance.total_rate();
    instance
        .channels()
        .iter()
        .map(|h| LN_2 * (total * LN_2).exp() / crate::linalg::norm_sqr(h))
        .collect()
}

/// Bound on `sum_m lambda*_m` from strict feasibility. If `p` meets every
/// target plus a margin `s` bits under some order, then
/// `g(lambda) <= sum p - s sum lambda` for all `lambda >= 0`, and
/// `g(lambda*) = P*` is at least the single-user power sum, which bounds the
/// multipliers of any dual optimum. The tightest over a few margins and two
/// orders is returned.
pub fn slater_multiplier_bound(instance: &ProblemInstance) -> f64 {
    let lower: f64 = instance
        .channels()
        .iter()
        .zip(instance.rate_targets())
        .map(|(h, &r)| sinr_from_rate(r) / crate::linalg::norm_sqr(h))
        .sum();
    let norms: Vec<f64> = instance
        .channels()
        .iter()
        .map(|h| crate::linalg::norm_sqr(h))
        .collect();
    let ascending = PrecodingOrder::ascending_by(&norms);
    let descending = PrecodingOrder::new(ascending.as_slice().iter().rev().copied().collect())
        .expect("reversed permutation");
    let mut best = f64::INFINITY;
    for margin in [0.05, 0.1, 0.25, 0.5, 1.0, 2.0, 4.0] {
        let targets: Vec<f64> = instance.rate_targets().iter().map(|r| r + margin).collect();
        let Ok(padded) = instance.with_rate_targets(targets) else {
            continue;
        };
        for order in [&ascending, &descending] {
            if let Ok(sol) = solve_fixed_order(&padded, order) {
                let b = (sol.sum_power() - lower).max(0.0) / margin;
                if b.is_finite() {
                    best = best.min(b);
                }
            }
        }
    }
    best
}

/// `nu_m = R_m - R_target_m`.
pub fn rate_subgradient(rates: &[f64], targets: &[f64]) -> Vec<f64> {
    rates.iter().zip(targets).map(|(r, t)| r - t).collect()
}

/// Dual function value given an inner maximizer at `lambda`.
pub fn dual_value(lambda: &[f64], targets: &[f64], inner: &InnerSolution) -> f64 {
    inner.powers.sum_power()
        + lambda
            .iter()
            .zip(targets)
            .zip(&inner.rates)
            .map(|((l, t), r)| l * (t - r))
            .sum::<f64>()
}

struct DualRun {
    lambda: Vec<f64>,
    inner: InnerSolution,
    value: f64,
    iterations: usize,
    history: Vec<f64>,
    converged: bool,
}

/// Ellipsoid iterations from the ball around `bound / 2` that contains the box `[0, bound]`.
fn run_ellipsoid(
    instance: &ProblemInstance,
    bound: &[f64],
    params: &RelaxationParams,
) -> Result<DualRun, SolveError> {
    let m = instance.num_users();
    let targets = instance.rate_targets();
    let center: Vec<f64> = bound.iter().map(|b| b / 2.0).collect();
    let radius = (m as f64).sqrt();
    let axes: Vec<f64> = bound.iter().map(|b| radius * b / 2.0).collect();
    let mut state = EllipsoidState::new(center, &axes);
    let mut warm = vec![0.0; m];
    let mut best: Option<(Vec<f64>, InnerSolution, f64)> = None;
    let mut history = Vec::new();
    let mut converged = false;

    while state.iterations() < params.max_iters {
        let c = state.center().to_vec();
        if let Some(k) = (0..m)
            .filter(|&k| c[k] < 0.0)
            .min_by(|&a, &b| c[a].total_cmp(&c[b]))
        {
            let mut normal = vec![0.0; m];
            normal[k] = -1.0;
            if state.cut(&normal).is_none() {
                break;
            }
            continue;
        }
        let inner = inner_maximize_from(instance, &c, params.inner_tol, &warm)?;
        warm.clone_from(&inner.powers.powers().to_vec());
        let value = dual_value(&c, targets, &inner);
        let nu = rate_subgradient(&inner.rates, targets);
        let improved = best.as_ref().is_none_or(|(_, _, v)| value > *v);
        if improved {
            best = Some((c.clone(), inner, value));
        }
        history.push(best.as_ref().expect("best set").2);

        let gap = state.width_along(&nu);
        if nu.iter().all(|&x| x == 0.0)
            || (gap <= params.tol * (1.0 + value.abs()) && localized(&state, &c, params.tie_tol))
        {
            converged = true;
            break;
        }
        if state.cut(&nu).is_none() {
            // Shape matrix exhausted numerically; the center is as good as it gets.
            converged = true;
            break;
        }
    }

    let (lambda, inner, value) = match best {
        Some(b) => b,
        None => {
            let c = state
                .center()
                .iter()
                .map(|x| x.max(0.0))
                .collect::<Vec<_>>();
            let inner = inner_maximize_from(instance, &c, params.inner_tol, &warm)?;
            let v = dual_value(&c, targets, &inner);
            (c, inner, v)
        }
    };
    Ok(DualRun {
        lambda,
        inner,
        value,
        iterations: state.iterations(),
        history,
        converged,
    })
}

/// Adjacent multipliers (in sorted order) are either resolved below the tie
/// tolerance or certainly separated.
fn localized(state: &EllipsoidState, center: &[f64], tie_tol: f64) -> bool {
    let m = center.len();
    if m < 2 {
        return true;
    }
    let order = PrecodingOrder::ascending_by(center);
    let scale = center.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    order.as_slice().windows(2).all(|w| {
        let mut d = vec![0.0; m];
        d[w[0]] = 1.0;
        d[w[1]] = -1.0;
        let width = state.width_along(&d);
        width <= 0.1 * tie_tol * scale || (center[w[1]] - center[w[0]]) > 2.0 * width
    })
}

struct Primal {
    powers: Vec<f64>,
    rates: Vec<f64>,
    order: PrecodingOrder,
    time_sharing: Option<TimeSharing>,
}

/// Primal point on the active chain given by `groups`, or `None` if that
/// chain does not satisfy the KKT conditions of the relaxation.
fn primal_on_chain(
    instance: &ProblemInstance,
    groups: &[Vec<usize>],
    lambda: &[f64],
    start: &[f64],
    params: &RelaxationParams,
) -> Result<Option<Primal>, SolveError> {
    let order = PrecodingOrder::new(groups.concat()).expect("groups partition the users");
    let targets = instance.rate_targets();
    if groups.iter().all(|g| g.len() == 1) {
        let sol = solve_fixed_order(instance, &order)?;
        let cert = certify(&lagrange_multipliers(instance, &sol), CERT_TIE_TOL);
        if cert.verdict == Verdict::NotOptimal {
            return Ok(None);
        }
        return Ok(Some(Primal {
            powers: sol.powers.powers().to_vec(),
            rates: sol.achieved_rates,
            order,
            time_sharing: None,
        }));
    }

    let mut prev = 0.0;
    let theta0: Vec<f64> = groups
        .iter()
        .map(|g| {
            let mean = g.iter().map(|&u| lambda[u]).sum::<f64>() / g.len() as f64;
            let t = (mean - prev).max(0.0);
            prev = mean;
            t
        })
        .collect();
    let Some(point) = polish::polish_chain(instance, groups, start, &theta0) else {
        return Ok(None);
    };
    let theta_scale = point.theta.iter().fold(0.0f64, |a, t| a.max(t.abs()));
    if point.theta.iter().any(|&t| t < -1e-9 * theta_scale)
        || point.powers.iter().any(|&p| !(p >= 0.0))
    {
        return Ok(None);
    }
    let powers = PowerAllocation::from_valid(point.powers);
    if !capacity_region_check(instance, &powers, targets, PRIMAL_REGION_TOL)?.is_feasible() {
        return Ok(None);
    }
    let vertex = mac_rates(instance, &order, &powers)?;
    let misses = vertex
        .iter()
        .zip(targets)
        .any(|(r, t)| (r - t).abs() > params.feasibility_tol);
    let (rates, time_sharing) = if misses {
        let ts = match timesharing::decompose(
            instance,
            &powers,
            groups,
            targets,
            params.feasibility_tol,
        ) {
            Ok(ts) => ts,
            Err(SolveError::TimeSharingInfeasible { .. }) => return Ok(None),
            Err(e) => return Err(e),
        };
        let rates = ts.combined_rates(instance, &powers)?;
        let ts = (ts.orders.len() > 1).then_some(ts);
        (rates, ts)
    } else {
        (vertex, None)
    };
    Ok(Some(Primal {
        powers: powers.powers().to_vec(),
        rates,
        order,
        time_sharing,
    }))
}

/// Recovers the primal optimum from the converged multipliers.
fn recover_primal(
    instance: &ProblemInstance,
    lambda: &[f64],
    start: &[f64],
    params: &RelaxationParams,
) -> Result<Primal, SolveError> {
    let groups = tie_groups(lambda, params.tie_tol);
    if let Some(primal) = primal_on_chain(instance, &groups, lambda, start, params)? {
        return Ok(primal);
    }
    // Tie pattern ambiguous: try every way of merging neighbours in the
    // sorted order and keep the cheapest certified point.
    let sorted = PrecodingOrder::ascending_by(lambda).into_vec();
    let m = sorted.len();
    let mut best: Option<Primal> = None;
    for mask in 0u32..(1 << (m - 1)) {
        let mut comp: Vec<Vec<usize>> = vec![vec![sorted[0]]];
        for (i, &u) in sorted.iter().enumerate().skip(1) {
            if mask & (1 << (i - 1)) != 0 {
                comp.last_mut().expect("non-empty").push(u);
            } else {
                comp.push(vec![u]);
            }
        }
        if let Some(p) = primal_on_chain(instance, &comp, lambda, start, params)? {
            let better = best
                .as_ref()
                .is_none_or(|b| sum(&p.powers) < sum(&b.powers));
            if better {
                best = Some(p);
            }
        }
    }
    if let Some(b) = best {
        return Ok(b);
    }
    // Fall back to the cheapest single order compatible with the tie groups;
    // feasible, but only an upper bound.
    let mut fallback: Option<Primal> = None;
    for order in orders_consistent_with(&groups)? {
        let sol = solve_fixed_order(instance, &order)?;
        if fallback
            .as_ref()
            .is_none_or(|f| sol.sum_power() < sum(&f.powers))
        {
            fallback = Some(Primal {
                powers: sol.powers.powers().to_vec(),
                rates: sol.achieved_rates,
                order,
                time_sharing: None,
            });
        }
    }
    Ok(fallback.expect("at least one order"))
}

fn sum(v: &[f64]) -> f64 {
    v.iter().sum()
}

/// Solves the time-sharing relaxation. Users with a zero target are removed
/// up front and receive zero power.
///
/// On iteration exhaustion the best iterate is returned inside
/// [`SolveError::NotConverged`].
pub fn ellipsoid_solve(
    instance: &ProblemInstance,
    params: &RelaxationParams,
) -> Result<RelaxationSolution, SolveError> {
    let m = instance.num_users();
    let active: Vec<usize> = (0..m)
        .filter(|&u| instance.rate_targets()[u] > 0.0)
        .collect();
    let idle: Vec<usize> = (0..m)
        .filter(|&u| instance.rate_targets()[u] == 0.0)
        .collect();
    if active.is_empty() {
        return Ok(RelaxationSolution {
            multipliers: vec![0.0; m],
            powers: PowerAllocation::zeros(m),
            achieved_rates: vec![0.0; m],
            sum_power: 0.0,
            order: PrecodingOrder::identity(m),
            time_sharing: None,
            iterations: 0,
            restarts: 0,
            dual_value: 0.0,
            dual_gap_bound: 0.0,
            dual_history: Vec::new(),
            converged: true,
        });
    }
    let reduced = instance.subset(&active);

    let slater = slater_multiplier_bound(&reduced);
    let mut bound: Vec<f64> = lambda_upper_bound(&reduced)
        .into_iter()
        .map(|b| b.min(slater))
        .collect();
    let mut iterations = 0;
    let mut restarts = 0;
    let run = loop {
        let run = run_ellipsoid(&reduced, &bound, params)?;
        iterations += run.iterations;
        let touches = run
            .lambda
            .iter()
            .zip(&bound)
            .any(|(l, b)| *l >= BOUND_PROXIMITY * b);
        if touches && restarts < params.max_restarts {
            bound.iter_mut().for_each(|b| *b *= 2.0);
            restarts += 1;
            continue;
        }
        break run;
    };

    let primal = recover_primal(&reduced, &run.lambda, run.inner.powers.powers(), params)?;

    // Embed back into the full instance; idle users are decoded first.
    let mut multipliers = vec![0.0; m];
    let mut powers = vec![0.0; m];
    let mut rates = vec![0.0; m];
    for (i, &u) in active.iter().enumerate() {
        multipliers[u] = run.lambda[i];
        powers[u] = primal.powers[i];
        rates[u] = primal.rates[i];
    }
    let lift = |o: &PrecodingOrder| {
        let mut perm = idle.clone();
        perm.extend(o.as_slice().iter().map(|&i| active[i]));
        PrecodingOrder::new(perm).expect("lifted permutation")
    };
    let order = lift(&primal.order);
    let time_sharing = primal.time_sharing.map(|ts| TimeSharing {
        orders: ts.orders.iter().map(lift).collect(),
        weights: ts.weights,
    });
    let powers = PowerAllocation::from_valid(powers);
    let sum_power = powers.sum_power();
    let solution = RelaxationSolution {
        multipliers,
        powers,
        achieved_rates: rates,
        sum_power,
        order,
        time_sharing,
        iterations,
        restarts,
        dual_value: run.value,
        dual_gap_bound: (sum_power - run.value).max(0.0),
        dual_history: run.history,
        converged: run.converged,
    };
    if run.converged {
        Ok(solution)
    } else {
        Err(SolveError::NotConverged(Box::new(solution)))
    }
}
