//! Problem instances, precoding orders, and the dual-MAC rate model.
//!
//! Order convention used throughout the crate: a [`PrecodingOrder`] stores
//! `[pi(1), ..., pi(M)]` (0-based user indices). In the downlink, the user at
//! the *last* position is encoded first; in the dual uplink, the user at the
//! *first* position is decoded first. Position `m` therefore sees
//! uplink interference from every user at positions `> m`.
//!
//! Rates are in bits per channel use and all noise variances are one.

use std::f64::consts::LN_2;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::ModelError;
use crate::linalg::{norm_sqr, Cholesky, HermitianMatrix, LinalgError, C64};

/// Largest `M` accepted by [`capacity_region_check`].
pub const MAX_REGION_USERS: usize = 20;

/// Channel vectors and per-user rate targets of a MISO downlink.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    channels: Vec<Vec<C64>>,
    rate_targets: Vec<f64>,
}

impl ProblemInstance {
    pub fn new(channels: Vec<Vec<C64>>, rate_targets: Vec<f64>) -> Result<Self, ModelError> {
        if channels.is_empty() {
            return Err(ModelError::NoUsers);
        }
        let nt = channels[0].len();
        if nt == 0 {
            return Err(ModelError::NoAntennas);
        }
        if rate_targets.len() != channels.len() {
            return Err(ModelError::LengthMismatch {
                expected: channels.len(),
                got: rate_targets.len(),
            });
        }
        for (user, h) in channels.iter().enumerate() {
            if h.len() != nt {
                return Err(ModelError::ChannelLength {
                    user,
                    expected: nt,
                    got: h.len(),
                });
            }
            if h.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(ModelError::NonFiniteChannel { user });
            }
            if norm_sqr(h) <= 0.0 {
                return Err(ModelError::ZeroChannel { user });
            }
        }
        validate_targets(&rate_targets)?;
        Ok(Self {
            channels,
            rate_targets,
        })
    }

    /// Same channels, new targets.
    pub fn with_rate_targets(&self, rate_targets: Vec<f64>) -> Result<Self, ModelError> {
        if rate_targets.len() != self.num_users() {
            return Err(ModelError::LengthMismatch {
                expected: self.num_users(),
                got: rate_targets.len(),
            });
        }
        validate_targets(&rate_targets)?;
        Ok(Self {
            channels: self.channels.clone(),
            rate_targets,
        })
    }

    /// The instance restricted to `users`, in the given order.
    pub fn subset(&self, users: &[usize]) -> Self {
        Self {
            channels: users.iter().map(|&u| self.channels[u].clone()).collect(),
            rate_targets: users.iter().map(|&u| self.rate_targets[u]).collect(),
        }
    }

    pub fn num_users(&self) -> usize {
        self.channels.len()
    }

    pub fn num_tx_antennas(&self) -> usize {
        self.channels[0].len()
    }

    pub fn channel(&self, user: usize) -> &[C64] {
        &self.channels[user]
    }

    pub fn channels(&self) -> &[Vec<C64>] {
        &self.channels
    }

    pub fn rate_targets(&self) -> &[f64] {
        &self.rate_targets
    }

    pub fn total_rate(&self) -> f64 {
        self.rate_targets.iter().sum()
    }
}

fn validate_targets(targets: &[f64]) -> Result<(), ModelError> {
    for (user, &value) in targets.iter().enumerate() {
        if !value.is_finite() || value < 0.0 {
            return Err(ModelError::InvalidTarget { user, value });
        }
    }
    Ok(())
}

/// A permutation of the users; see the module docs for the direction convention.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PrecodingOrder(Vec<usize>);

impl PrecodingOrder {
    pub fn new(perm: Vec<usize>) -> Result<Self, ModelError> {
        let mut seen = vec![false; perm.len()];
        for &u in &perm {
            if u >= perm.len() || seen[u] {
                return Err(ModelError::InvalidPermutation {
                    len: perm.len(),
                    perm,
                });
            }
            seen[u] = true;
        }
        Ok(Self(perm))
    }

    pub fn identity(num_users: usize) -> Self {
        Self((0..num_users).collect())
    }

    /// Orders users by ascending `key`, ties broken by ascending user index.
    pub fn ascending_by(key: &[f64]) -> Self {
        let mut perm: Vec<usize> = (0..key.len()).collect();
        perm.sort_by(|&a, &b| key[a].total_cmp(&key[b]).then(a.cmp(&b)));
        Self(perm)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// User at `position` (0-based).
    pub fn user_at(&self, position: usize) -> usize {
        self.0[position]
    }

    /// `position_of()[user]` is the position of `user`.
    pub fn positions(&self) -> Vec<usize> {
        let mut pos = vec![0; self.0.len()];
        for (p, &u) in self.0.iter().enumerate() {
            pos[u] = p;
        }
        pos
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<usize> {
        self.0
    }
}

/// Dual-uplink powers `p_m` (linear, noise-normalized).
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    powers: Vec<f64>,
    sum_power: f64,
}

impl PowerAllocation {
    pub fn new(powers: Vec<f64>) -> Result<Self, ModelError> {
        for (user, &value) in powers.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(ModelError::InvalidPower { user, value });
            }
        }
        Ok(Self::from_valid(powers))
    }

    pub(crate) fn from_valid(powers: Vec<f64>) -> Self {
        let sum_power = powers.iter().sum();
        Self { powers, sum_power }
    }

    pub fn zeros(num_users: usize) -> Self {
        Self {
            powers: vec![0.0; num_users],
            sum_power: 0.0,
        }
    }

    pub fn powers(&self) -> &[f64] {
        &self.powers
    }

    pub fn sum_power(&self) -> f64 {
        self.sum_power
    }

    pub fn len(&self) -> usize {
        self.powers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.powers.is_empty()
    }
}

/// `Z = I + sum_i p_i h_i h_i^H` over a suffix of a precoding order,
/// kept together with its Cholesky factor.
#[derive(Debug, Clone, PartialEq)]
pub struct InterferenceMatrix {
    matrix: HermitianMatrix,
    factor: Cholesky,
}

impl InterferenceMatrix {
    pub fn from_matrix(matrix: HermitianMatrix) -> Result<Self, LinalgError> {
        let factor = matrix.cholesky()?;
        Ok(Self { matrix, factor })
    }

    /// `Z_position = I + sum_{i >= position} p_{pi(i)} h_{pi(i)} h_{pi(i)}^H`.
    /// `position == M` gives the identity.
    pub fn suffix(
        instance: &ProblemInstance,
        order: &PrecodingOrder,
        powers: &[f64],
        position: usize,
    ) -> Result<Self, LinalgError> {
        let mut z = HermitianMatrix::identity(instance.num_tx_antennas());
        for &u in &order.as_slice()[position..] {
            z.add_rank_one(powers[u], instance.channel(u));
        }
        Self::from_matrix(z)
    }

    /// The full chain `[Z_1, ..., Z_M, Z_{M+1} = I]`, indexed by position.
    pub fn chain(
        instance: &ProblemInstance,
        order: &PrecodingOrder,
        powers: &[f64],
    ) -> Result<Vec<Self>, LinalgError> {
        let m = order.len();
        let mut chain = Vec::with_capacity(m + 1);
        let mut z = HermitianMatrix::identity(instance.num_tx_antennas());
        chain.push(Self::from_matrix(z.clone())?);
        for &u in order.as_slice().iter().rev() {
            z.add_rank_one(powers[u], instance.channel(u));
            chain.push(Self::from_matrix(z.clone())?);
        }
        chain.reverse();
        Ok(chain)
    }

    pub fn matrix(&self) -> &HermitianMatrix {
        &self.matrix
    }

    pub fn factor(&self) -> &Cholesky {
        &self.factor
    }

    /// `h^H Z^{-1} h`.
    pub fn gain(&self, h: &[C64]) -> f64 {
        self.factor.inverse_quadratic(h)
    }

    /// `log2 |Z|`.
    pub fn log2_det(&self) -> f64 {
        self.factor.log_det() / LN_2
    }
}

/// Unit-norm transmit beamformers with their downlink powers.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformerSet {
    pub beamformers: Vec<Vec<C64>>,
    pub downlink_powers: Vec<f64>,
}

impl BeamformerSet {
    pub fn sum_power(&self) -> f64 {
        self.downlink_powers.iter().sum()
    }
}

/// `R = log2(1 + sinr)`.
pub fn rate_from_sinr(sinr: f64) -> f64 {
    sinr.ln_1p() / LN_2
}

/// `sinr = 2^R - 1`.
pub fn sinr_from_rate(rate: f64) -> f64 {
    (rate * LN_2).exp_m1()
}

/// `h^H Z^{-1} h` through a Cholesky solve.
pub fn effective_gain(h: &[C64], z: &HermitianMatrix) -> Result<f64, LinalgError> {
    if h.len() != z.dim() {
        return Err(LinalgError::DimensionMismatch {
            expected: z.dim(),
            got: h.len(),
        });
    }
    Ok(z.cholesky()?.inverse_quadratic(h))
}

/// Per-user dual-MAC rates under SIC with the given decoding order, reported
/// in user index order: `R_{pi(m)} = log2(|Z_m| / |Z_{m+1}|)`.
pub fn mac_rates(
    instance: &ProblemInstance,
    order: &PrecodingOrder,
    powers: &PowerAllocation,
) -> Result<Vec<f64>, LinalgError> {
    let chain = InterferenceMatrix::chain(instance, order, powers.powers())?;
    Ok(rates_from_chain(order, &chain))
}

pub(crate) fn rates_from_chain(order: &PrecodingOrder, chain: &[InterferenceMatrix]) -> Vec<f64> {
    let logdets: Vec<f64> = chain.iter().map(InterferenceMatrix::log2_det).collect();
    let mut rates = vec![0.0; order.len()];
    for (pos, &u) in order.as_slice().iter().enumerate() {
        rates[u] = (logdets[pos] - logdets[pos + 1]).max(0.0);
    }
    rates
}

/// `log2 |I + sum_{m in S} p_m h_m h_m^H|` for the subset encoded in `mask`.
pub fn subset_log2_det(
    instance: &ProblemInstance,
    powers: &[f64],
    mask: u32,
) -> Result<f64, LinalgError> {
    let mut z = HermitianMatrix::identity(instance.num_tx_antennas());
    for u in 0..instance.num_users() {
        if mask & (1 << u) != 0 {
            z.add_rank_one(powers[u], instance.channel(u));
        }
    }
    Ok(z.cholesky()?.log_det() / LN_2)
}

/// Outcome of [`capacity_region_check`]. `Violated` carries the users of one
/// violated subset in ascending order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RegionCheck {
    Feasible,
    Violated(Vec<usize>),
}

impl RegionCheck {
    pub fn is_feasible(&self) -> bool {
        matches!(self, RegionCheck::Feasible)
    }
}

/// Slack `log2|I + sum_S p h h^H| - sum_S targets` of every nonempty subset,
/// indexed by bitmask (entry 0 is unused and zero).
pub fn region_slacks(
    instance: &ProblemInstance,
    powers: &PowerAllocation,
    targets: &[f64],
) -> Result<Vec<f64>, crate::error::SolveError> {
    let m = instance.num_users();
    if m > MAX_REGION_USERS {
        return Err(ModelError::TooManyUsers {
            what: "capacity region enumeration",
            limit: MAX_REGION_USERS,
            got: m,
        }
        .into());
    }
    if targets.len() != m || powers.len() != m {
        return Err(ModelError::LengthMismatch {
            expected: m,
            got: targets.len().min(powers.len()),
        }
        .into());
    }
    let mut slacks = vec![0.0; 1 << m];
    for mask in 1u32..(1 << m) {
        let demand: f64 = (0..m)
            .filter(|u| mask & (1 << u) != 0)
            .map(|u| targets[u])
            .sum();
        slacks[mask as usize] = subset_log2_det(instance, powers.powers(), mask)? - demand;
    }
    Ok(slacks)
}

/// Checks every one of the `2^M - 1` sum-rate constraints of the MAC
/// capacity region at powers `p`.
pub fn capacity_region_check(
    instance: &ProblemInstance,
    powers: &PowerAllocation,
    targets: &[f64],
    tol: f64,
) -> Result<RegionCheck, crate::error::SolveError> {
    let slacks = region_slacks(instance, powers, targets)?;
    let m = instance.num_users();
    for (mask, &slack) in slacks.iter().enumerate().skip(1) {
        if slack < -tol {
            return Ok(RegionCheck::Violated(
                (0..m).filter(|u| mask & (1 << u) != 0).collect(),
            ));
        }
    }
    Ok(RegionCheck::Feasible)
}

/// I.i.d. Rayleigh channels (entries `CN(0, 1)`) with a common rate target.
pub fn sample_rayleigh_instance(
    num_users: usize,
    num_tx_antennas: usize,
    rate_target: f64,
    seed: u64,
) -> Result<ProblemInstance, ModelError> {
    if num_users == 0 {
        return Err(ModelError::NoUsers);
    }
    if num_tx_antennas == 0 {
        return Err(ModelError::NoAntennas);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, std::f64::consts::FRAC_1_SQRT_2).expect("valid std dev");
    let channels = (0..num_users)
        .map(|_| {
            (0..num_tx_antennas)
                .map(|_| {
                    let re = normal.sample(&mut rng);
                    let im = normal.sample(&mut rng);
                    C64::new(re, im)
                })
                .collect()
        })
        .collect();
    ProblemInstance::new(channels, vec![rate_target; num_users])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn real(v: &[f64]) -> Vec<C64> {
        v.iter().map(|&x| C64::new(x, 0.0)).collect()
    }

    #[test]
    fn sinr_rate_map() {
        assert_eq!(rate_from_sinr(1.0), 1.0);
        assert_eq!(rate_from_sinr(0.0), 0.0);
        assert!((sinr_from_rate(3.0) - 7.0).abs() < 1e-14);
    }

    #[test]
    fn sampling_is_deterministic_and_shaped() {
        let a = sample_rayleigh_instance(3, 3, 2.0, 42).unwrap();
        let b = sample_rayleigh_instance(3, 3, 2.0, 42).unwrap();
        assert_eq!(a, b);
        let single = sample_rayleigh_instance(1, 1, 1.0, 9).unwrap();
        assert_eq!(single.num_users(), 1);
        assert_eq!(single.num_tx_antennas(), 1);
        assert_eq!(single.rate_targets(), &[1.0]);
    }

    #[test]
    fn sampled_entries_have_unit_variance() {
        // 10^5 entries.
        let inst = sample_rayleigh_instance(1000, 100, 1.0, 7).unwrap();
        let total: f64 = inst.channels().iter().map(|h| norm_sqr(h)).sum();
        let mean = total / 1e5;
        assert!((0.99..=1.01).contains(&mean), "mean |h|^2 = {mean}");
    }

    #[test]
    fn instance_validation() {
        assert_eq!(
            ProblemInstance::new(vec![], vec![]),
            Err(ModelError::NoUsers)
        );
        assert_eq!(
            ProblemInstance::new(vec![real(&[0.0, 0.0])], vec![1.0]),
            Err(ModelError::ZeroChannel { user: 0 })
        );
        assert!(matches!(
            ProblemInstance::new(vec![real(&[1.0])], vec![-1.0]),
            Err(ModelError::InvalidTarget { user: 0, .. })
        ));
        assert!(matches!(
            ProblemInstance::new(vec![real(&[1.0]), real(&[1.0, 2.0])], vec![1.0, 1.0]),
            Err(ModelError::ChannelLength { user: 1, .. })
        ));
        assert!(matches!(
            ProblemInstance::new(vec![vec![C64::new(f64::NAN, 0.0)]], vec![1.0]),
            Err(ModelError::NonFiniteChannel { user: 0 })
        ));
    }

    #[test]
    fn permutation_validation() {
        assert!(PrecodingOrder::new(vec![2, 0, 1]).is_ok());
        assert!(PrecodingOrder::new(vec![0, 0, 1]).is_err());
        assert!(PrecodingOrder::new(vec![0, 3, 1]).is_err());
        let o = PrecodingOrder::new(vec![2, 0, 1]).unwrap();
        assert_eq!(o.positions(), vec![1, 2, 0]);
        assert_eq!(
            PrecodingOrder::ascending_by(&[3.0, 1.0, 1.0]).as_slice(),
            &[1, 2, 0]
        );
    }

    #[test]
    fn effective_gain_examples() {
        let h = real(&[1.0, 0.0]);
        let eye = HermitianMatrix::identity(2);
        assert!((effective_gain(&h, &eye).unwrap() - 1.0).abs() < 1e-15);
        assert!((effective_gain(&h, &eye.scaled(2.0)).unwrap() - 0.5).abs() < 1e-15);
        assert!(effective_gain(&real(&[1.0]), &eye).is_err());
        let bad = HermitianMatrix::from_fn(2, |i, j| C64::new(if i == j { 1.0 } else { 3.0 }, 0.0));
        assert!(matches!(
            effective_gain(&h, &bad),
            Err(LinalgError::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn mac_rates_simple() {
        let inst = ProblemInstance::new(vec![real(&[1.0])], vec![1.0]).unwrap();
        let order = PrecodingOrder::identity(1);
        let r = mac_rates(&inst, &order, &PowerAllocation::new(vec![1.0]).unwrap()).unwrap();
        assert!((r[0] - 1.0).abs() < 1e-15);
        let inst3 = sample_rayleigh_instance(3, 2, 1.0, 1).unwrap();
        let zero = mac_rates(
            &inst3,
            &PrecodingOrder::identity(3),
            &PowerAllocation::zeros(3),
        )
        .unwrap();
        assert_eq!(zero, vec![0.0; 3]);
    }

    #[test]
    fn region_check_examples() {
        let inst = sample_rayleigh_instance(3, 2, 0.0, 3).unwrap();
        let check =
            capacity_region_check(&inst, &PowerAllocation::zeros(3), &[0.0; 3], 0.0).unwrap();
        assert_eq!(check, RegionCheck::Feasible);

        let single = ProblemInstance::new(vec![real(&[1.0])], vec![1.0]).unwrap();
        let p = PowerAllocation::new(vec![1.0]).unwrap();
        let slacks = region_slacks(&single, &p, &[1.0]).unwrap();
        assert!(slacks[1].abs() < 1e-15);
        assert!(capacity_region_check(&single, &p, &[1.0], 1e-12)
            .unwrap()
            .is_feasible());
        assert_eq!(
            capacity_region_check(&single, &p, &[1.5], 1e-12).unwrap(),
            RegionCheck::Violated(vec![0])
        );
    }
}
