//! Inner maximization of the Lagrangian for fixed multipliers.
//!
//! For multipliers sorted ascending along the decoding order, the weighted
//! rate sum telescopes into `F(p) = sum_m delta_m log2|Z_m| - sum_m p_m` with
//! `delta_m = lambda_{pi(m)} - lambda_{pi(m-1)} >= 0`, which is concave in `p`.
//! `F` is maximized over `p >= 0` by projected Newton ascent with Armijo
//! backtracking on the projection arc.

use std::f64::consts::LN_2;

use nalgebra::{DMatrix, DVector};

use crate::error::SolveError;
use crate::instance::{mac_rates, PowerAllocation, PrecodingOrder, ProblemInstance};
use crate::linalg::{inner, HermitianMatrix, LinalgError, C64};

/// Maximum Newton iterations per inner solve.
pub const MAX_INNER_ITERS: usize = 200;
const ARMIJO_SLOPE: f64 = 1e-4;
const BACKTRACK: f64 = 0.5;
const MIN_STEP: f64 = 1e-12;
const ROUNDING_GAIN: f64 = 1e-12;
const MAX_GROWTH: f64 = 1e3;

/// Maximizer of `F` for one multiplier vector.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerSolution {
    /// Decoding order with ascending multipliers.
    pub order: PrecodingOrder,
    pub powers: PowerAllocation,
    /// SIC rates at `powers` under `order`, in user index order.
    pub rates: Vec<f64>,
    /// `F(p)` at the returned powers.
    pub objective: f64,
    /// KKT residual of the returned point.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Sort order and telescoped weights `delta` (by position).
pub fn telescoped_weights(lambda: &[f64]) -> (PrecodingOrder, Vec<f64>) {
    let order = PrecodingOrder::ascending_by(lambda);
    let mut prev = 0.0;
    let delta = order
        .as_slice()
        .iter()
        .map(|&u| {
            let d = (lambda[u] - prev).max(0.0);
            prev = lambda[u];
            d
        })
        .collect();
    (order, delta)
}

pub(crate) struct Evaluation {
    pub value: f64,
    /// Gradient by user.
    pub grad: Vec<f64>,
    /// Hessian by user, row-major.
    pub hess: Vec<f64>,
}

/// Value, gradient and (optionally) Hessian of `F`.
pub(crate) fn evaluate(
    instance: &ProblemInstance,
    order: &PrecodingOrder,
    delta: &[f64],
    p: &[f64],
    derivatives: bool,
) -> Result<Evaluation, LinalgError> {
    let m = instance.num_users();
    let perm = order.as_slice();
    let mut value = -p.iter().sum::<f64>();
    let mut grad = vec![-1.0; m];
    let mut hess = if derivatives {
        vec![0.0; m * m]
    } else {
        Vec::new()
    };
    let mut z = HermitianMatrix::identity(instance.num_tx_antennas());
    let mut whitened: Vec<Vec<C64>> = Vec::with_capacity(m);
    for n in (0..m).rev() {
        let user = perm[n];
        z.add_rank_one(p[user], instance.channel(user));
        if delta[n] <= 0.0 {
            continue;
        }
        let factor = z.cholesky()?;
        value += delta[n] * factor.log_det() / LN_2;
        if !derivatives {
            continue;
        }
        let w = delta[n] / LN_2;
        whitened.clear();
        whitened.extend(
            perm[n..]
                .iter()
                .map(|&u| factor.whiten(instance.channel(u))),
        );
        for (a, &ua) in perm[n..].iter().enumerate() {
            for (b, &ub) in perm[n..].iter().enumerate().skip(a) {
                let g = inner(&whitened[a], &whitened[b]);
                if a == b {
                    grad[ua] += w * g.re;
                    hess[ua * m + ua] -= w * g.re * g.re;
                } else {
                    let v = w * g.norm_sqr();
                    hess[ua * m + ub] -= v;
                    hess[ub * m + ua] -= v;
                }
            }
        }
    }
    Ok(Evaluation { value, grad, hess })
}

/// `F(p)` and its gradient (by user) for multipliers `lambda`.
pub fn inner_objective(
    instance: &ProblemInstance,
    lambda: &[f64],
    p: &[f64],
) -> Result<(f64, Vec<f64>), SolveError> {
    let m = instance.num_users();
    if lambda.len() != m || p.len() != m {
        return Err(crate::error::ModelError::LengthMismatch {
            expected: m,
            got: p.len().min(lambda.len()),
        }
        .into());
    }
    let (order, delta) = telescoped_weights(lambda);
    let ev = evaluate(instance, &order, &delta, p, true)?;
    Ok((ev.value, ev.grad))
}

/// Optimality measure: `|g_m|` where `p_m > 0`, `max(g_m, 0)` where `p_m = 0`.
pub fn kkt_residual(p: &[f64], grad: &[f64]) -> f64 {
    p.iter()
        .zip(grad)
        .map(|(&pm, &g)| if pm > 0.0 { g.abs() } else { g.max(0.0) })
        .fold(0.0, f64::max)
}

/// Maximizes `F` starting from the origin.
pub fn dual_inner_maximize(
    instance: &ProblemInstance,
    lambda: &[f64],
    tol: f64,
) -> Result<InnerSolution, SolveError> {
    let start = vec![0.0; instance.num_users()];
    let sol = inner_maximize_from(instance, lambda, tol, &start)?;
    if !sol.converged {
        return Err(SolveError::InnerIterationLimit {
            residual: sol.residual,
        });
    }
    Ok(sol)
}

/// Warm-started maximization. Returns the best iterate with
/// `converged == false` instead of failing when the iteration limit is hit.
pub fn inner_maximize_from(
    instance: &ProblemInstance,
    lambda: &[f64],
    tol: f64,
    start: &[f64],
) -> Result<InnerSolution, SolveError> {
    let m = instance.num_users();
    if lambda.len() != m || start.len() != m {
        return Err(crate::error::ModelError::LengthMismatch {
            expected: m,
            got: lambda.len(),
        }
        .into());
    }
    if let Some(bad) = lambda.iter().position(|l| !(*l >= 0.0) || !l.is_finite()) {
        return Err(crate::error::ModelError::InvalidTarget {
            user: bad,
            value: lambda[bad],
        }
        .into());
    }
    let (order, delta) = telescoped_weights(lambda);
    let mut p: Vec<f64> = start.iter().map(|&x| x.max(0.0)).collect();
    if delta.iter().all(|&d| d == 0.0) {
        p.iter_mut().for_each(|x| *x = 0.0);
    }

    let mut iterations = 0;
    let mut ev = evaluate(instance, &order, &delta, &p, true)?;
    let mut residual = kkt_residual(&p, &ev.grad);
    let mut converged = residual <= tol;
    while !converged && iterations < MAX_INNER_ITERS {
        iterations += 1;
        let direction = newton_direction(&p, &ev);
        let Some((next_p, next_ev)) = line_search(instance, &order, &delta, &p, &ev, &direction)?
        else {
            break;
        };
        p = next_p;
        ev = next_ev;
        residual = kkt_residual(&p, &ev.grad);
        converged = residual <= tol;
    }

    let powers = PowerAllocation::from_valid(p);
    let rates = mac_rates(instance, &order, &powers)?;
    Ok(InnerSolution {
        order,
        powers,
        rates,
        objective: ev.value,
        residual,
        iterations,
        converged,
    })
}

/// Newton direction on the free variables (those with `p > 0` or an
/// ascent gradient), regularized until the negated Hessian factors.
fn newton_direction(p: &[f64], ev: &Evaluation) -> Vec<f64> {
    let m = p.len();
    let free: Vec<usize> = (0..m).filter(|&i| p[i] > 0.0 || ev.grad[i] > 0.0).collect();
    let mut direction = vec![0.0; m];
    if free.is_empty() {
        return direction;
    }
    let k = free.len();
    let neg_hess = DMatrix::from_fn(k, k, |a, b| -ev.hess[free[a] * m + free[b]]);
    let rhs = DVector::from_iterator(k, free.iter().map(|&i| ev.grad[i]));
    let diag_scale = (0..k)
        .map(|i| neg_hess[(i, i)])
        .fold(0.0f64, f64::max)
        .max(1e-300);
    let mut mu = 0.0;
    for _ in 0..30 {
        let mut a = neg_hess.clone();
        for i in 0..k {
            a[(i, i)] += mu;
        }
        if let Some(chol) = a.cholesky() {
            let d = chol.solve(&rhs);
            if d.iter().all(|x| x.is_finite()) {
                for (a, &i) in free.iter().enumerate() {
                    direction[i] = d[a];
                }
                return direction;
            }
        }
        mu = if mu == 0.0 {
            1e-12 * diag_scale
        } else {
            mu * 100.0
        };
    }
    // Hessian unusable: plain projected gradient.
    for &i in &free {
        direction[i] = ev.grad[i];
    }
    direction
}

fn line_search(
    instance: &ProblemInstance,
    order: &PrecodingOrder,
    delta: &[f64],
    p: &[f64],
    ev: &Evaluation,
    direction: &[f64],
) -> Result<Option<(Vec<f64>, Evaluation)>, LinalgError> {
    // Nearly flat directions (more users than antennas) can ask for
    // absurd steps; keep each trial within a bounded growth of `p`.
    let dmax = direction.iter().fold(0.0f64, |a, d| a.max(d.abs()));
    let pmax = p.iter().fold(0.0f64, |a, x| a.max(*x));
    let cap = MAX_GROWTH * (1.0 + pmax);
    let scale = if dmax > cap { cap / dmax } else { 1.0 };
    let project = |t: f64| -> Vec<f64> {
        p.iter()
            .zip(direction)
            .map(|(&x, &d)| (x + t * scale * d).max(0.0))
            .collect()
    };
    // A trial point too ill-conditioned to factor is treated as a rejected step.
    let try_eval =
        |cand: &[f64], derivatives: bool| match evaluate(instance, order, delta, cand, derivatives)
        {
            Ok(e) => Ok(Some(e)),
            Err(LinalgError::NotPositiveDefinite { .. }) => Ok(None),
            Err(e) => Err(e),
        };
    // Once the predicted gain is at rounding level the objective cannot rank
    // steps; take the full Newton step if it lowers the KKT residual.
    let full_pred: f64 = project(1.0)
        .iter()
        .zip(p)
        .zip(&ev.grad)
        .map(|((c, x), g)| g * (c - x))
        .sum();
    let rounding = full_pred.abs() <= ROUNDING_GAIN * (1.0 + ev.value.abs());
    if rounding {
        let cand = project(1.0);
        if let Some(full) = try_eval(&cand, true)? {
            if kkt_residual(&cand, &full.grad) < kkt_residual(p, &ev.grad) {
                return Ok(Some((cand, full)));
            }
        }
    }
    let mut t = 1.0;
    while t >= MIN_STEP {
        let cand = project(t);
        if let Some(trial) = try_eval(&cand, false)? {
            let predicted: f64 = cand
                .iter()
                .zip(p)
                .zip(&ev.grad)
                .map(|((c, x), g)| g * (c - x))
                .sum();
            if trial.value >= ev.value + ARMIJO_SLOPE * predicted && predicted >= 0.0 {
                if let Some(full) = try_eval(&cand, true)? {
                    return Ok(Some((cand, full)));
                }
            }
        }
        t *= BACKTRACK;
    }
    if rounding {
        return Ok(None);
    }
    // Near the optimum the objective difference drowns in rounding; fall back
    // to the full Newton step when it reduces the KKT residual.
    let cand = project(1.0);
    if let Some(full) = try_eval(&cand, true)? {
        if kkt_residual(&cand, &full.grad) < kkt_residual(p, &ev.grad) {
            return Ok(Some((cand, full)));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn real(v: &[f64]) -> Vec<C64> {
        v.iter().map(|&x| C64::new(x, 0.0)).collect()
    }

    #[test]
    fn zero_multipliers_give_zero_power() {
        let inst = crate::instance::sample_rayleigh_instance(3, 2, 1.0, 5).unwrap();
        let sol = dual_inner_maximize(&inst, &[0.0; 3], 1e-9).unwrap();
        assert_eq!(sol.powers.powers(), &[0.0; 3]);
        assert_eq!(sol.rates, vec![0.0; 3]);
    }

    #[test]
    fn single_user_calculus() {
        let inst = ProblemInstance::new(vec![real(&[1.0])], vec![1.0]).unwrap();
        let sol = dual_inner_maximize(&inst, &[3.0], 1e-12).unwrap();
        let expected = 3.0 / LN_2 - 1.0;
        assert!(
            (sol.powers.powers()[0] - expected).abs() < 1e-10,
            "{:?}",
            sol.powers
        );
        // small multiplier: power stays at zero
        let sol = dual_inner_maximize(&inst, &[0.5], 1e-12).unwrap();
        assert_eq!(sol.powers.powers()[0], 0.0);
    }

    #[test]
    fn orthogonal_users_decouple() {
        let inst = ProblemInstance::new(vec![real(&[1.0, 0.0]), real(&[0.0, 1.0])], vec![1.0, 1.0])
            .unwrap();
        let sol = dual_inner_maximize(&inst, &[2.0, 4.0], 1e-12).unwrap();
        let oracle = [
            (2.0 / LN_2 - 1.0f64).max(0.0),
            (4.0 / LN_2 - 1.0f64).max(0.0),
        ];
        for (p, o) in sol.powers.powers().iter().zip(oracle) {
            assert!((p - o).abs() < 1e-9);
        }
    }

    #[test]
    fn telescoping_breaks_ties_by_index() {
        let (order, delta) = telescoped_weights(&[2.0, 1.0, 2.0]);
        assert_eq!(order.as_slice(), &[1, 0, 2]);
        assert_eq!(delta, vec![1.0, 1.0, 0.0]);
    }
}
