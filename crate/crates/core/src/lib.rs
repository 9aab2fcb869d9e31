//! Minimum sum-power beamforming for the MISO downlink with dirty-paper
//! coding, and the choice of the precoding order.
//!
//! Problems are solved on the dual multiple-access channel, where a fixed
//! decoding order gives powers in closed form ([`fixed_order`]). The
//! multipliers of that solution certify whether the order is optimal
//! ([`certificate`]). A convex relaxation over all orders, solved by an
//! ellipsoid method on its Lagrange dual ([`relaxation`]), gives the global
//! optimum, possibly a time-sharing of several orders. [`ordering`] holds
//! exhaustive, heuristic and random order selection, and [`duality`] maps an
//! uplink solution back to downlink beamformers.
//!
//! Conventions: rates and rate targets are in bits per channel use; noise
//! power is 1; a [`PrecodingOrder`] lists user indices (0-based) from the
//! first decoded on the uplink, which is the last encoded on the downlink.
//!
//! ```
//! use dpc_precoding::{sample_rayleigh_instance, solve_fixed_order, PrecodingOrder};
//!
//! let inst = sample_rayleigh_instance(3, 2, 1.0, 7).unwrap();
//! let sol = solve_fixed_order(&inst, &PrecodingOrder::identity(3)).unwrap();
//! for r in &sol.achieved_rates {
//!     assert!((r - 1.0).abs() < 1e-9);
//! }
//! ```

// `!(x > 0.0)` deliberately rejects NaN; index loops mirror the math.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bench;
pub mod certificate;
pub mod duality;
pub mod error;
pub mod fixed_order;
pub mod instance;
pub mod linalg;
pub mod ordering;
pub mod relaxation;

pub use certificate::{
    certify, certify_solution, lagrange_multipliers, lagrange_multipliers_in, DualCertificate,
    RateUnit, Verdict,
};
pub use duality::{bc_sinr, mac_to_bc, DownlinkSolution};
pub use error::{ModelError, SolveError};
pub use fixed_order::{solve_fixed_order, sum_power, FixedOrderSolution};
pub use instance::{
    capacity_region_check, effective_gain, mac_rates, rate_from_sinr, sample_rayleigh_instance,
    sinr_from_rate, BeamformerSet, InterferenceMatrix, PowerAllocation, PrecodingOrder,
    ProblemInstance, RegionCheck,
};
pub use linalg::{HermitianMatrix, C64};
pub use ordering::{
    exhaustive_search, heuristic_search, random_order, random_order_baseline, HeuristicTrace,
    TerminationReason,
};
pub use relaxation::{ellipsoid_solve, RelaxationParams, RelaxationSolution, TimeSharing};
