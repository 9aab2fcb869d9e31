//! Closed-form minimum sum power for a fixed precoding order.

use crate::error::SolveError;
use crate::instance::{
    rates_from_chain, sinr_from_rate, InterferenceMatrix, PowerAllocation, PrecodingOrder,
    ProblemInstance,
};
use crate::linalg::HermitianMatrix;

/// Output of [`solve_fixed_order`].
#[derive(Debug, Clone, PartialEq)]
pub struct FixedOrderSolution {
    pub order: PrecodingOrder,
    pub powers: PowerAllocation,
    /// Per-user rates in user index order.
    pub achieved_rates: Vec<f64>,
    /// `chain[m]` is `Z_{m+1}` in 1-based notation: `chain[0] = Z_1`, `chain[M] = I`.
    pub chain: Vec<InterferenceMatrix>,
}

impl FixedOrderSolution {
    pub fn sum_power(&self) -> f64 {
        self.powers.sum_power()
    }

    /// Interference-plus-noise matrix seen at `position`.
    pub fn interference(&self, position: usize) -> &InterferenceMatrix {
        &self.chain[position]
    }
}

/// Backward recursion from the last decoded user to the first:
/// `p_{pi(m)} = (2^{R_{pi(m)}} - 1) / (h^H Z_{m+1}^{-1} h)`, then
/// `Z_m = Z_{m+1} + p_{pi(m)} h h^H`, which makes every SIC rate exactly
/// equal to its target.
pub fn solve_fixed_order(
    instance: &ProblemInstance,
    order: &PrecodingOrder,
) -> Result<FixedOrderSolution, SolveError> {
    let m = instance.num_users();
    if order.len() != m {
        return Err(crate::error::ModelError::LengthMismatch {
            expected: m,
            got: order.len(),
        }
        .into());
    }
    let targets = instance.rate_targets();
    let mut powers = vec![0.0; m];
    let mut chain = Vec::with_capacity(m + 1);
    let mut z = HermitianMatrix::identity(instance.num_tx_antennas());
    chain.push(InterferenceMatrix::from_matrix(z.clone())?);
    for pos in (0..m).rev() {
        let user = order.user_at(pos);
        let h = instance.channel(user);
        let gain = chain.last().expect("non-empty chain").gain(h);
        let p = sinr_from_rate(targets[user]) / gain;
        powers[user] = p;
        z.add_rank_one(p, h);
        chain.push(InterferenceMatrix::from_matrix(z.clone())?);
    }
    chain.reverse();
    let achieved_rates = rates_from_chain(order, &chain);
    Ok(FixedOrderSolution {
        order: order.clone(),
        powers: PowerAllocation::from_valid(powers),
        achieved_rates,
        chain,
    })
}

pub fn sum_power(solution: &FixedOrderSolution) -> f64 {
    solution.sum_power()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::C64;

    fn real(v: &[f64]) -> Vec<C64> {
        v.iter().map(|&x| C64::new(x, 0.0)).collect()
    }

    #[test]
    fn single_user() {
        let inst = ProblemInstance::new(vec![real(&[1.0])], vec![1.0]).unwrap();
        let sol = solve_fixed_order(&inst, &PrecodingOrder::identity(1)).unwrap();
        assert!((sol.powers.powers()[0] - 1.0).abs() < 1e-15);
        assert!((sol.achieved_rates[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_users_decouple() {
        let inst = ProblemInstance::new(vec![real(&[1.0, 0.0]), real(&[0.0, 1.0])], vec![1.0, 2.0])
            .unwrap();
        for perm in [vec![0, 1], vec![1, 0]] {
            let sol = solve_fixed_order(&inst, &PrecodingOrder::new(perm).unwrap()).unwrap();
            assert!((sol.powers.powers()[0] - 1.0).abs() < 1e-14);
            assert!((sol.powers.powers()[1] - 3.0).abs() < 1e-14);
            assert!((sum_power(&sol) - 4.0).abs() < 1e-14);
        }
    }

    #[test]
    fn scalar_recursion() {
        let inst = ProblemInstance::new(vec![real(&[1.0]), real(&[1.0])], vec![1.0, 1.0]).unwrap();
        let sol = solve_fixed_order(&inst, &PrecodingOrder::identity(2)).unwrap();
        // user at position 2 first: p = 1, then position 1 sees 1 + 1.
        assert!((sol.powers.powers()[1] - 1.0).abs() < 1e-15);
        assert!((sol.powers.powers()[0] - 2.0).abs() < 1e-15);
        assert!((sol.sum_power() - 3.0).abs() < 1e-15);
    }

    #[test]
    fn zero_target_is_transparent() {
        let inst = ProblemInstance::new(vec![real(&[1.0]), real(&[0.5])], vec![0.0, 1.0]).unwrap();
        let sol = solve_fixed_order(&inst, &PrecodingOrder::identity(2)).unwrap();
        assert_eq!(sol.powers.powers()[0], 0.0);
        assert!((sol.powers.powers()[1] - 4.0).abs() < 1e-14);
        assert_eq!(sol.interference(0).matrix(), sol.interference(1).matrix());
    }

    #[test]
    fn sum_power_of_zeros() {
        let inst = ProblemInstance::new(vec![real(&[1.0]), real(&[2.0])], vec![0.0, 0.0]).unwrap();
        let sol = solve_fixed_order(&inst, &PrecodingOrder::identity(2)).unwrap();
        assert_eq!(sum_power(&sol), 0.0);
    }
}
