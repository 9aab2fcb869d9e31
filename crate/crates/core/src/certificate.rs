//! Optimality certificate for a fixed precoding order.
//!
//! The fixed-order solution keeps every SIC rate constraint active, so its
//! Lagrange multipliers follow from stationarity by a forward recursion over
//! positions. The order is globally optimal exactly when the nested-subset
//! multipliers `theta_1 = lambda_1`, `theta_m = lambda_m - lambda_{m-1}` are
//! all positive. A zero difference means the corresponding nested subset
//! constraint can be dropped and the order is a vertex of a time-sharing
//! optimum.

use std::f64::consts::LN_2;

use serde::Serialize;

use crate::fixed_order::FixedOrderSolution;
use crate::instance::ProblemInstance;

/// Default tie tolerance on `lambda / lambda_1`.
pub const DEFAULT_TIE_TOL: f64 = 1e-7;

/// Unit in which rate constraints are priced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateUnit {
    Nats,
    Bits,
}

impl RateUnit {
    fn per_nat(self) -> f64 {
        match self {
            RateUnit::Nats => 1.0,
            RateUnit::Bits => 1.0 / LN_2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Optimal,
    NotOptimal,
    TimeSharingBoundary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualCertificate {
    /// Multipliers indexed by order position.
    pub multipliers: Vec<f64>,
    pub verdict: Verdict,
    /// Positions `m >= 1` whose difference `lambda_m - lambda_{m-1}` is within tolerance.
    pub tie_positions: Vec<usize>,
}

/// Multipliers in natural-log rate units (power per nat).
pub fn lagrange_multipliers(instance: &ProblemInstance, solution: &FixedOrderSolution) -> Vec<f64> {
    lagrange_multipliers_in(instance, solution, RateUnit::Nats)
}

/// Multipliers with rates measured in `unit`. Bits and nats differ by exactly
/// a factor `ln 2`.
pub fn lagrange_multipliers_in(
    instance: &ProblemInstance,
    solution: &FixedOrderSolution,
    unit: RateUnit,
) -> Vec<f64> {
    let m = instance.num_users();
    let scale = unit.per_nat();
    let mut lambda: Vec<f64> = Vec::with_capacity(m);
    for pos in 0..m {
        let h = instance.channel(solution.order.user_at(pos));
        // gains[n] = h^H Z_n^{-1} h for n = 0..=pos
        let gains: Vec<f64> = (0..=pos)
            .map(|n| solution.interference(n).gain(h))
            .collect();
        let correction: f64 = (0..pos)
            .map(|n| lambda[n] * (gains[n] - gains[n + 1]))
            .sum();
        lambda.push((1.0 - scale * correction) / (scale * gains[pos]));
    }
    lambda
}

/// Renders the verdict from multipliers in position order.
pub fn certify(multipliers: &[f64], tie_tol: f64) -> DualCertificate {
    let norm = match multipliers.first() {
        Some(&l1) if l1 > 0.0 => l1,
        _ => multipliers
            .iter()
            .fold(0.0f64, |a, &l| a.max(l.abs()))
            .max(f64::MIN_POSITIVE),
    };
    let diffs: Vec<f64> = multipliers
        .windows(2)
        .map(|w| (w[1] - w[0]) / norm)
        .collect();
    let tie_positions: Vec<usize> = diffs
        .iter()
        .enumerate()
        .filter(|(_, d)| d.abs() <= tie_tol)
        .map(|(i, _)| i + 1)
        .collect();
    let verdict = if diffs.iter().all(|&d| d > tie_tol) {
        Verdict::Optimal
    } else if diffs.iter().all(|&d| d >= -tie_tol) && !tie_positions.is_empty() {
        Verdict::TimeSharingBoundary
    } else {
        Verdict::NotOptimal
    };
    DualCertificate {
        multipliers: multipliers.to_vec(),
        verdict,
        tie_positions,
    }
}

/// Multipliers plus verdict at the default tolerance.
pub fn certify_solution(
    instance: &ProblemInstance,
    solution: &FixedOrderSolution,
) -> DualCertificate {
    certify(&lagrange_multipliers(instance, solution), DEFAULT_TIE_TOL)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixed_order::solve_fixed_order;
    use crate::instance::PrecodingOrder;
    use crate::linalg::C64;

    fn real(v: &[f64]) -> Vec<C64> {
        v.iter().map(|&x| C64::new(x, 0.0)).collect()
    }

    #[test]
    fn single_user_multiplier() {
        let inst = ProblemInstance::new(vec![real(&[1.0])], vec![1.0]).unwrap();
        let sol = solve_fixed_order(&inst, &PrecodingOrder::identity(1)).unwrap();
        let l = lagrange_multipliers(&inst, &sol);
        assert!((l[0] - 2.0).abs() < 1e-14);
        assert_eq!(certify(&l, DEFAULT_TIE_TOL).verdict, Verdict::Optimal);
    }

    #[test]
    fn orthogonal_multipliers() {
        let inst = ProblemInstance::new(vec![real(&[1.0, 0.0]), real(&[0.0, 1.0])], vec![1.0, 1.0])
            .unwrap();
        let sol = solve_fixed_order(&inst, &PrecodingOrder::identity(2)).unwrap();
        let l = lagrange_multipliers(&inst, &sol);
        assert!((l[0] - 2.0).abs() < 1e-14 && (l[1] - 2.0).abs() < 1e-14);
        let cert = certify(&l, DEFAULT_TIE_TOL);
        assert_eq!(cert.verdict, Verdict::TimeSharingBoundary);
        assert_eq!(cert.tie_positions, vec![1]);
    }

    #[test]
    fn verdict_examples() {
        assert_eq!(certify(&[1.0, 2.0, 3.0], 1e-8).verdict, Verdict::Optimal);
        assert_eq!(
            certify(&[2.0, 2.0], 1e-8).verdict,
            Verdict::TimeSharingBoundary
        );
        assert_eq!(certify(&[3.0, 1.0], 1e-8).verdict, Verdict::NotOptimal);
        assert_eq!(certify(&[5.0], 1e-8).verdict, Verdict::Optimal);
        // a tie followed by a decrease is not a boundary
        assert_eq!(certify(&[2.0, 2.0, 1.0], 1e-8).verdict, Verdict::NotOptimal);
    }

    #[test]
    fn bits_and_nats_differ_by_ln2() {
        let inst = crate::instance::sample_rayleigh_instance(4, 3, 1.5, 11).unwrap();
        let sol =
            solve_fixed_order(&inst, &PrecodingOrder::new(vec![2, 0, 3, 1]).unwrap()).unwrap();
        let nats = lagrange_multipliers_in(&inst, &sol, RateUnit::Nats);
        let bits = lagrange_multipliers_in(&inst, &sol, RateUnit::Bits);
        for (n, b) in nats.iter().zip(&bits) {
            assert!((b / n - LN_2).abs() < 1e-12);
        }
        assert_eq!(certify(&nats, 1e-7).verdict, certify(&bits, 1e-7).verdict);
    }
}
