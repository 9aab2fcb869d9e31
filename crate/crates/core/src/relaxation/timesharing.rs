//! Time-sharing between decoding orders at a fixed power vector.

use itertools::Itertools;
use serde::Serialize;

use crate::error::{ModelError, SolveError};
use crate::instance::{mac_rates, PowerAllocation, PrecodingOrder, ProblemInstance};

/// Upper limit on the number of candidate orders enumerated.
const MAX_CANDIDATE_ORDERS: usize = 40_320;

/// Convex combination of decoding orders, all at the same powers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeSharing {
    #[serde(serialize_with = "serialize_orders")]
    pub orders: Vec<PrecodingOrder>,
    pub weights: Vec<f64>,
}

fn serialize_orders<S: serde::Serializer>(
    orders: &[PrecodingOrder],
    s: S,
) -> Result<S::Ok, S::Error> {
    s.collect_seq(orders.iter().map(PrecodingOrder::as_slice))
}

impl TimeSharing {
    /// Weighted rate vector at `powers`.
    pub fn combined_rates(
        &self,
        instance: &ProblemInstance,
        powers: &PowerAllocation,
    ) -> Result<Vec<f64>, SolveError> {
        let mut out = vec![0.0; instance.num_users()];
        for (order, &w) in self.orders.iter().zip(&self.weights) {
            for (acc, r) in out.iter_mut().zip(mac_rates(instance, order, powers)?) {
                *acc += w * r;
            }
        }
        Ok(out)
    }
}

/// Users sorted by ascending multiplier, split into groups wherever two
/// consecutive multipliers differ by more than `rel_tol * max|lambda|`.
pub fn tie_groups(lambda: &[f64], rel_tol: f64) -> Vec<Vec<usize>> {
    let order = PrecodingOrder::ascending_by(lambda);
    let scale = lambda.iter().fold(0.0f64, |a, l| a.max(l.abs()));
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut prev: Option<f64> = None;
    for &u in order.as_slice() {
        match prev {
            Some(p) if lambda[u] - p <= rel_tol * scale => {
                groups.last_mut().expect("group").push(u)
            }
            _ => groups.push(vec![u]),
        }
        prev = Some(lambda[u]);
    }
    groups
}

/// Every order that decodes the groups in sequence, with any arrangement
/// inside each group.
pub fn orders_consistent_with(groups: &[Vec<usize>]) -> Result<Vec<PrecodingOrder>, ModelError> {
    let count = groups
        .iter()
        .map(|g| (1..=g.len()).product::<usize>())
        .try_fold(1usize, |a, b| a.checked_mul(b));
    let total: usize = groups.iter().map(Vec::len).sum();
    match count {
        Some(c) if c <= MAX_CANDIDATE_ORDERS => {}
        _ => {
            return Err(ModelError::TooManyUsers {
                what: "time-sharing enumeration",
                limit: 8,
                got: total,
            })
        }
    }
    let per_group: Vec<Vec<Vec<usize>>> = groups
        .iter()
        .map(|g| g.iter().copied().permutations(g.len()).collect())
        .collect();
    Ok(per_group
        .into_iter()
        .multi_cartesian_product()
        .map(|parts| PrecodingOrder::new(parts.concat()).expect("groups partition the users"))
        .collect())
}

/// Finds weights over the orders consistent with the multiplier tie groups
/// so that the averaged SIC rates at `powers` meet `targets - tol`.
pub fn recover_time_sharing(
    instance: &ProblemInstance,
    powers: &PowerAllocation,
    multipliers: &[f64],
    targets: &[f64],
    tol: f64,
) -> Result<TimeSharing, SolveError> {
    let groups = tie_groups(multipliers, super::DEFAULT_TIE_TOL);
    decompose(instance, powers, &groups, targets, tol)
}

pub(crate) fn decompose(
    instance: &ProblemInstance,
    powers: &PowerAllocation,
    groups: &[Vec<usize>],
    targets: &[f64],
    tol: f64,
) -> Result<TimeSharing, SolveError> {
    let orders = orders_consistent_with(groups)?;
    let vertices: Vec<Vec<f64>> = orders
        .iter()
        .map(|o| mac_rates(instance, o, powers))
        .collect::<Result<_, _>>()?;
    let lower: Vec<f64> = targets.iter().map(|t| t - tol).collect();

    if let Some(k) = vertices
        .iter()
        .position(|v| v.iter().zip(&lower).all(|(r, l)| r >= l))
    {
        return Ok(TimeSharing {
            orders: vec![orders[k].clone()],
            weights: vec![1.0],
        });
    }
    match convex_cover(&vertices, &lower) {
        Ok(weights) => {
            let (orders, weights): (Vec<_>, Vec<_>) = orders
                .into_iter()
                .zip(weights)
                .filter(|(_, w)| *w > 0.0)
                .unzip();
            Ok(TimeSharing { orders, weights })
        }
        Err(shortfall) => Err(SolveError::TimeSharingInfeasible { shortfall }),
    }
}

/// Phase-one simplex for `w >= 0, sum w = 1, sum_k w_k v_k >= lower`.
/// Returns a basic (hence sparse) feasible `w`, or the residual
/// infeasibility.
pub(crate) fn convex_cover(vertices: &[Vec<f64>], lower: &[f64]) -> Result<Vec<f64>, f64> {
    let k = vertices.len();
    let m = lower.len();
    let rows = m + 1;
    // columns: weights | surplus | artificial | rhs
    let cols = k + m + rows;
    let width = cols + 1;
    let mut t = vec![0.0; rows * width];
    for i in 0..m {
        let sign = if lower[i] < 0.0 { -1.0 } else { 1.0 };
        for (j, v) in vertices.iter().enumerate() {
            t[i * width + j] = sign * v[i];
        }
        t[i * width + k + i] = -sign;
        t[i * width + cols] = sign * lower[i];
    }
    for j in 0..k {
        t[m * width + j] = 1.0;
    }
    t[m * width + cols] = 1.0;
    for i in 0..rows {
        t[i * width + k + m + i] = 1.0;
    }
    let mut basis: Vec<usize> = (0..rows).map(|i| k + m + i).collect();
    let is_artificial = |j: usize| j >= k + m;
    let eps = 1e-12;

    for _ in 0..10_000 {
        // reduced costs of phase-one objective (sum of artificials)
        let entering = (0..k + m).find(|&j| {
            let r: f64 = -(0..rows)
                .filter(|&i| is_artificial(basis[i]))
                .map(|i| t[i * width + j])
                .sum::<f64>();
            r < -eps
        });
        let Some(j) = entering else { break };
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..rows {
            let a = t[i * width + j];
            if a > eps {
                let ratio = t[i * width + cols] / a;
                let better = match leave {
                    None => true,
                    Some((li, lr)) => {
                        ratio < lr - 1e-15 || (ratio <= lr + 1e-15 && basis[i] < basis[li])
                    }
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
        }
        let Some((r, _)) = leave else { break };
        let pivot = t[r * width + j];
        for c in 0..width {
            t[r * width + c] /= pivot;
        }
        for i in 0..rows {
            if i != r {
                let f = t[i * width + j];
                if f != 0.0 {
                    for c in 0..width {
                        t[i * width + c] -= f * t[r * width + c];
                    }
                }
            }
        }
        basis[r] = j;
    }

    let infeasibility: f64 = (0..rows)
        .filter(|&i| is_artificial(basis[i]))
        .map(|i| t[i * width + cols])
        .sum();
    if infeasibility > 1e-10 {
        return Err(infeasibility);
    }
    let mut w = vec![0.0; k];
    for i in 0..rows {
        if basis[i] < k {
            w[basis[i]] = t[i * width + cols].max(0.0);
        }
    }
    let total: f64 = w.iter().sum();
    if total <= 0.0 {
        return Err(1.0);
    }
    w.iter_mut().for_each(|x| *x /= total);
    Ok(w)
}
