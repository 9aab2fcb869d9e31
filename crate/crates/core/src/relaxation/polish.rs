//! Primal recovery for a given chain of active nested constraints.
//!
//! With users partitioned into groups `G_1, ..., G_k` (decoded in that
//! order), the active constraints of the relaxation are the suffix unions
//! `S_j = G_j u ... u G_k`. The KKT system of
//! `min sum p  s.t.  log2|I + sum_{S_j} p h h^H| >= sum_{S_j} R_target`
//! is solved by damped Newton iterations with a minimum-norm step, which
//! also copes with the rank deficiency of exactly symmetric instances.

use std::f64::consts::LN_2;

use nalgebra::{DMatrix, DVector};

use crate::instance::ProblemInstance;
use crate::linalg::{inner, HermitianMatrix, C64};

const MAX_NEWTON_ITERS: usize = 80;
const RESIDUAL_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub(crate) struct ChainPoint {
    pub powers: Vec<f64>,
    /// Nested-subset multipliers (bits), one per group.
    pub theta: Vec<f64>,
    #[cfg_attr(not(test), allow(dead_code))]
    pub residual: f64,
}

struct System {
    residual: DVector<f64>,
    jacobian: DMatrix<f64>,
}

fn group_index(groups: &[Vec<usize>], m: usize) -> Vec<usize> {
    let mut g = vec![0; m];
    for (j, grp) in groups.iter().enumerate() {
        for &u in grp {
            g[u] = j;
        }
    }
    g
}

fn assemble(
    instance: &ProblemInstance,
    groups: &[Vec<usize>],
    group_of: &[usize],
    p: &[f64],
    theta: &[f64],
) -> Option<System> {
    let m = instance.num_users();
    let k = groups.len();
    let n = m + k;
    let mut residual = DVector::zeros(n);
    let mut jac = DMatrix::zeros(n, n);
    for i in 0..m {
        residual[i] = -1.0;
    }
    let targets = instance.rate_targets();
    let mut z = HermitianMatrix::identity(instance.num_tx_antennas());
    let mut members: Vec<usize> = Vec::with_capacity(m);
    for j in (0..k).rev() {
        for &u in &groups[j] {
            z.add_rank_one(p[u], instance.channel(u));
            members.push(u);
        }
        let factor = z.cholesky().ok()?;
        let demand: f64 = members.iter().map(|&u| targets[u]).sum();
        residual[m + j] = factor.log_det() / LN_2 - demand;
        let w: Vec<Vec<C64>> = members
            .iter()
            .map(|&u| factor.whiten(instance.channel(u)))
            .collect();
        for (a, &ua) in members.iter().enumerate() {
            let gain = crate::linalg::norm_sqr(&w[a]) / LN_2;
            residual[ua] += theta[j] * gain;
            jac[(ua, m + j)] = gain;
            jac[(m + j, ua)] = gain;
            for (b, &ub) in members.iter().enumerate() {
                jac[(ua, ub)] -= theta[j] * inner(&w[a], &w[b]).norm_sqr() / LN_2;
            }
        }
    }
    debug_assert!(group_of.len() == m);
    Some(System {
        residual,
        jacobian: jac,
    })
}

/// Newton solve of the chain KKT system from `(p0, theta0)`.
pub(crate) fn polish_chain(
    instance: &ProblemInstance,
    groups: &[Vec<usize>],
    p0: &[f64],
    theta0: &[f64],
) -> Option<ChainPoint> {
    let m = instance.num_users();
    let group_of = group_index(groups, m);
    let mut p: Vec<f64> = p0.iter().map(|&x| x.max(1e-12)).collect();
    let mut theta = theta0.to_vec();
    let mut sys = assemble(instance, groups, &group_of, &p, &theta)?;
    let mut norm = sys.residual.norm();
    for _ in 0..MAX_NEWTON_ITERS {
        if sys.residual.amax() <= RESIDUAL_TOL {
            break;
        }
        let svd = sys.jacobian.clone().svd(true, true);
        let cutoff = svd.singular_values.max() * 1e-13;
        let step = svd.solve(&(-&sys.residual), cutoff).ok()?;
        // keep powers strictly positive
        let mut t: f64 = 1.0;
        for i in 0..m {
            if step[i] < 0.0 {
                t = t.min(0.95 * p[i] / -step[i]);
            }
        }
        let mut accepted = false;
        while t > 1e-10 {
            let cand_p: Vec<f64> = (0..m).map(|i| p[i] + t * step[i]).collect();
            let cand_theta: Vec<f64> = (0..theta.len())
                .map(|j| theta[j] + t * step[m + j])
                .collect();
            if let Some(cand) = assemble(instance, groups, &group_of, &cand_p, &cand_theta) {
                let cnorm = cand.residual.norm();
                if cnorm < (1.0 - 1e-4 * t) * norm || cand.residual.amax() <= RESIDUAL_TOL {
                    p = cand_p;
                    theta = cand_theta;
                    sys = cand;
                    norm = cnorm;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let residual = sys.residual.amax();
    (residual <= 1e-9).then_some(ChainPoint {
        powers: p,
        theta,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn singleton_chain_matches_fixed_order() {
        let inst = crate::instance::sample_rayleigh_instance(3, 3, 1.5, 21).unwrap();
        let order = crate::instance::PrecodingOrder::new(vec![1, 2, 0]).unwrap();
        let exact = crate::fixed_order::solve_fixed_order(&inst, &order).unwrap();
        let groups: Vec<Vec<usize>> = order.as_slice().iter().map(|&u| vec![u]).collect();
        let start: Vec<f64> = exact.powers.powers().iter().map(|p| p * 1.3).collect();
        let point = polish_chain(&inst, &groups, &start, &[1.0, 1.0, 1.0]).unwrap();
        for (a, b) in point.powers.iter().zip(exact.powers.powers()) {
            assert!((a - b).abs() <= 1e-9 * b.max(1.0));
        }
    }

    #[test]
    fn symmetric_group_converges() {
        let h = vec![C64::new(1.0, 0.0)];
        let inst = ProblemInstance::new(vec![h.clone(), h], vec![1.0, 1.0]).unwrap();
        let point = polish_chain(&inst, &[vec![0, 1]], &[1.0, 1.0], &[2.0]).unwrap();
        assert!(point.residual <= 1e-9);
        assert!((point.powers[0] + point.powers[1] - 3.0).abs() < 1e-10);
        assert!((point.theta[0] - 4.0 * LN_2).abs() < 1e-10);
    }
}
