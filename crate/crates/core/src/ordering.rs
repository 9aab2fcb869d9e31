//! Precoding-order search: exhaustive enumeration, the certificate-driven
//! resorting heuristic, and a random baseline.

use std::collections::HashSet;

use itertools::Itertools;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::certificate::{
    certify, lagrange_multipliers, DualCertificate, Verdict, DEFAULT_TIE_TOL,
};
use crate::error::{ModelError, SolveError};
use crate::fixed_order::{solve_fixed_order, FixedOrderSolution};
use crate::instance::{PrecodingOrder, ProblemInstance};

/// Largest `M` for [`exhaustive_search`].
pub const MAX_EXHAUSTIVE_USERS: usize = 8;
/// Relative tie window for exhaustive search.
const EXHAUSTIVE_TIE_REL: f64 = 1e-10;

/// Minimum sum power over all `M!` orders. Ties within a relative `1e-10`
/// go to the lexicographically smallest permutation.
pub fn exhaustive_search(
    instance: &ProblemInstance,
) -> Result<(PrecodingOrder, FixedOrderSolution), SolveError> {
    let m = instance.num_users();
    if m > MAX_EXHAUSTIVE_USERS {
        return Err(ModelError::TooManyUsers {
            what: "exhaustive search",
            limit: MAX_EXHAUSTIVE_USERS,
            got: m,
        }
        .into());
    }
    let mut best: Option<FixedOrderSolution> = None;
    // `permutations` of a sorted range yields lexicographic order.
    for perm in (0..m).permutations(m) {
        let order = PrecodingOrder::new(perm).expect("permutation");
        let sol = solve_fixed_order(instance, &order)?;
        let replace = match &best {
            None => true,
            Some(b) => sol.sum_power() < b.sum_power() * (1.0 - EXHAUSTIVE_TIE_REL),
        };
        if replace {
            best = Some(sol);
        }
    }
    let best = best.expect("at least one permutation");
    Ok((best.order.clone(), best))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TerminationReason {
    CertificateOptimal,
    CertificateBoundary,
    VertexRevisited,
    IterationCap,
}

impl TerminationReason {
    pub fn as_str(self) -> &'static str {
        match self {
            TerminationReason::CertificateOptimal => "CertificateOptimal",
            TerminationReason::CertificateBoundary => "CertificateBoundary",
            TerminationReason::VertexRevisited => "VertexRevisited",
            TerminationReason::IterationCap => "IterationCap",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeuristicTrace {
    /// Orders in visiting sequence; the last entry may repeat an earlier one.
    pub visited: Vec<PrecodingOrder>,
    /// Multipliers (by position) of every solved order.
    pub multipliers: Vec<Vec<f64>>,
    pub sum_powers: Vec<f64>,
    pub termination: TerminationReason,
}

impl HeuristicTrace {
    /// Number of fixed-order solves performed.
    pub fn iterations(&self) -> usize {
        self.sum_powers.len()
    }
}

/// Default iteration cap `2 M`.
pub fn default_heuristic_iters(num_users: usize) -> usize {
    2 * num_users
}

/// Resorts users by their rate prices until the certificate accepts the
/// current order, an order repeats, or `max_iters` solves have been done.
/// Returns the cheapest visited order.
pub fn heuristic_search(
    instance: &ProblemInstance,
    initial_order: &PrecodingOrder,
    max_iters: usize,
) -> Result<
    (
        PrecodingOrder,
        FixedOrderSolution,
        DualCertificate,
        HeuristicTrace,
    ),
    SolveError,
> {
    let max_iters = max_iters.max(1);
    let mut seen: HashSet<PrecodingOrder> = HashSet::new();
    let mut visited = Vec::new();
    let mut multipliers = Vec::new();
    let mut sum_powers = Vec::new();
    let mut best: Option<(FixedOrderSolution, DualCertificate)> = None;
    let mut order = initial_order.clone();

    let termination = loop {
        seen.insert(order.clone());
        visited.push(order.clone());
        let sol = solve_fixed_order(instance, &order)?;
        let lambda = lagrange_multipliers(instance, &sol);
        let cert = certify(&lambda, DEFAULT_TIE_TOL);
        multipliers.push(lambda.clone());
        sum_powers.push(sol.sum_power());
        let verdict = cert.verdict;
        if best
            .as_ref()
            .is_none_or(|(b, _)| sol.sum_power() < b.sum_power())
        {
            best = Some((sol, cert));
        }
        match verdict {
            Verdict::Optimal => break TerminationReason::CertificateOptimal,
            Verdict::TimeSharingBoundary => break TerminationReason::CertificateBoundary,
            Verdict::NotOptimal => {}
        }
        if sum_powers.len() >= max_iters {
            break TerminationReason::IterationCap;
        }
        // Stable sort of positions by multiplier keeps the incumbent order on ties.
        let mut positions: Vec<usize> = (0..order.len()).collect();
        positions.sort_by(|&a, &b| lambda[a].total_cmp(&lambda[b]));
        let next = PrecodingOrder::new(positions.iter().map(|&p| order.user_at(p)).collect())
            .expect("reordered permutation");
        if seen.contains(&next) {
            visited.push(next);
            break TerminationReason::VertexRevisited;
        }
        order = next;
    };

    let (sol, cert) = best.expect("at least one solve");
    let trace = HeuristicTrace {
        visited,
        multipliers,
        sum_powers,
        termination,
    };
    Ok((sol.order.clone(), sol, cert, trace))
}

/// Uniformly random permutation drawn from `seed`.
pub fn random_order(num_users: usize, seed: u64) -> PrecodingOrder {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perm: Vec<usize> = (0..num_users).collect();
    perm.shuffle(&mut rng);
    PrecodingOrder::new(perm).expect("shuffled permutation")
}

pub fn random_order_baseline(
    instance: &ProblemInstance,
    seed: u64,
) -> Result<FixedOrderSolution, SolveError> {
    solve_fixed_order(instance, &random_order(instance.num_users(), seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::C64;

    fn real(v: &[f64]) -> Vec<C64> {
        v.iter().map(|&x| C64::new(x, 0.0)).collect()
    }

    #[test]
    fn single_user_cases() {
        let inst = ProblemInstance::new(vec![real(&[1.0])], vec![1.0]).unwrap();
        let (order, _) = exhaustive_search(&inst).unwrap();
        assert_eq!(order.as_slice(), &[0]);
        let (_, _, cert, trace) = heuristic_search(&inst, &PrecodingOrder::identity(1), 2).unwrap();
        assert_eq!(cert.verdict, Verdict::Optimal);
        assert_eq!(trace.termination, TerminationReason::CertificateOptimal);
        assert_eq!(trace.iterations(), 1);
        assert_eq!(
            random_order_baseline(&inst, 3).unwrap().order.as_slice(),
            &[0]
        );
    }

    #[test]
    fn orthogonal_tie_goes_to_identity() {
        let inst = ProblemInstance::new(vec![real(&[1.0, 0.0]), real(&[0.0, 1.0])], vec![1.0, 1.0])
            .unwrap();
        let (order, sol) = exhaustive_search(&inst).unwrap();
        assert_eq!(order.as_slice(), &[0, 1]);
        assert!((sol.sum_power() - 2.0).abs() < 1e-14);
        let (_, _, _, trace) =
            heuristic_search(&inst, &PrecodingOrder::new(vec![1, 0]).unwrap(), 4).unwrap();
        assert_eq!(trace.termination, TerminationReason::CertificateBoundary);
        assert_eq!(trace.iterations(), 1);
    }

    #[test]
    fn scalar_channels_pick_cheaper_recursion() {
        let inst = ProblemInstance::new(vec![real(&[1.0]), real(&[2.0])], vec![1.0, 1.0]).unwrap();
        // Order [0, 1]: user 1 decoded last, p1 = 1/4, then p0 = (1 + 4 * 1/4) / 1 = 2.
        // Order [1, 0]: p0 = 1, then p1 = (1 + 1) / 4 = 1/2.
        let cost_01 = 0.25 + 2.0;
        let cost_10 = 1.0 + 0.5;
        let (order, sol) = exhaustive_search(&inst).unwrap();
        assert!(cost_10 < cost_01);
        assert_eq!(order.as_slice(), &[1, 0]);
        assert!((sol.sum_power() - cost_10).abs() < 1e-14);
    }

    #[test]
    fn exhaustive_refuses_large_instances() {
        let inst = crate::instance::sample_rayleigh_instance(9, 2, 0.1, 1).unwrap();
        assert!(matches!(
            exhaustive_search(&inst),
            Err(SolveError::Model(ModelError::TooManyUsers { .. }))
        ));
    }

    #[test]
    fn random_order_is_seeded() {
        assert_eq!(random_order(6, 99), random_order(6, 99));
    }
}
