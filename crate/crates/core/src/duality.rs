//! Uplink-to-downlink transformation of a fixed-order solution.
//!
//! The uplink uses whitened matched filters `u_m ~ Z_{m+1}^{-1} h_{pi(m)}`;
//! the same vectors serve as downlink beamformers. With
//! `A = diag(|u_m^H h_m|^2 / gamma_m)` and `B_{mn} = |u_m^H h_n|^2` for
//! `n > m`, uplink powers solve `(A - B) p = 1` and downlink powers solve
//! `(A - B^T) q = 1`, so `1^T q = 1^T p`. The downlink system is lower
//! triangular in position order and is solved by forward substitution.

use crate::error::SolveError;
use crate::instance::{
    sinr_from_rate, BeamformerSet, InterferenceMatrix, PowerAllocation, PrecodingOrder,
    ProblemInstance,
};
use crate::linalg::{inner, norm_sqr, C64};

#[derive(Debug, Clone, PartialEq)]
pub struct DownlinkSolution {
    pub beams: BeamformerSet,
    pub order: PrecodingOrder,
    /// Downlink SINRs by user, recomputed from the beamformers.
    pub sinrs: Vec<f64>,
}

fn normalized(v: Vec<C64>) -> Vec<C64> {
    let n = norm_sqr(&v).sqrt();
    v.into_iter().map(|z| z / n).collect()
}

/// Maps uplink powers (which must make every rate tight for `order`) to
/// downlink beamformers and powers with identical SINRs and sum power.
pub fn mac_to_bc(
    instance: &ProblemInstance,
    order: &PrecodingOrder,
    powers: &PowerAllocation,
) -> Result<DownlinkSolution, SolveError> {
    let m = instance.num_users();
    let chain = InterferenceMatrix::chain(instance, order, powers.powers())?;
    let targets: Vec<f64> = instance
        .rate_targets()
        .iter()
        .map(|&r| sinr_from_rate(r))
        .collect();

    let mut beamformers = vec![Vec::new(); m];
    for pos in 0..m {
        let u = order.user_at(pos);
        let h = instance.channel(u);
        beamformers[u] = normalized(chain[pos + 1].factor().solve(h));
    }

    let mut downlink = vec![0.0; m];
    for pos in 0..m {
        let u = order.user_at(pos);
        if targets[u] == 0.0 {
            continue;
        }
        let h = instance.channel(u);
        let signal = inner(&beamformers[u], h).norm_sqr();
        let interference: f64 = order.as_slice()[..pos]
            .iter()
            .map(|&v| downlink[v] * inner(&beamformers[v], h).norm_sqr())
            .sum();
        let diag = signal / targets[u];
        if !(diag > 0.0) || !diag.is_finite() {
            return Err(SolveError::SingularDuality { position: pos });
        }
        downlink[u] = (1.0 + interference) / diag;
    }

    let beams = BeamformerSet {
        beamformers,
        downlink_powers: downlink,
    };
    let sinrs = bc_sinr(instance, order, &beams);
    Ok(DownlinkSolution {
        beams,
        order: order.clone(),
        sinrs,
    })
}

/// Downlink SINR under DPC: the user at position `m` is interfered only by
/// users at positions `< m` (encoded after it).
pub fn bc_sinr(
    instance: &ProblemInstance,
    order: &PrecodingOrder,
    beams: &BeamformerSet,
) -> Vec<f64> {
    let m = instance.num_users();
    let mut sinr = vec![0.0; m];
    for pos in 0..m {
        let u = order.user_at(pos);
        let h = instance.channel(u);
        let signal = beams.downlink_powers[u] * inner(&beams.beamformers[u], h).norm_sqr();
        let interference: f64 = order.as_slice()[..pos]
            .iter()
            .map(|&v| beams.downlink_powers[v] * inner(&beams.beamformers[v], h).norm_sqr())
            .sum();
        sinr[u] = signal / (1.0 + interference);
    }
    sinr
}
