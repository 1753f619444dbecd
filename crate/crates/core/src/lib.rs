//! Asynchronous grant-free random access in a massive-MIMO uplink.
//!
//! Users pick a pilot from a shared pool and transmit with an integer
//! symbol delay. Extending every pilot by all admissible shifts and mapping
//! the antenna axis to angular bins turns joint activity detection and
//! channel estimation into a row- and cluster-sparse recovery problem in the
//! delay-angle domain. The crate contains:
//!
//! * [`pilot`]: pilot pool and the delay-extended sensing matrix,
//! * [`channel`]: one-ring multipath channels for the active users,
//! * [`airlink`]: ground truth assembly, DFT transform, noisy observation
//!   and the complex-to-real stacking used by the solvers,
//! * [`sbl`]: the cluster-extended SBL solver and the M-SBL baseline,
//! * [`detect`]: row/cluster detection and scoring,
//! * [`capacity`]: identifiability bounds and a brute-force uniqueness check,
//! * [`harness`]: seeded Monte-Carlo trials and parameter sweeps.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod airlink;
pub mod capacity;
pub mod channel;
pub mod detect;
mod error;
pub mod harness;
pub mod linalg;
pub mod pilot;
pub mod sbl;
pub mod verify;

pub use error::{Error, Result};

pub use num_complex::Complex64;

/// Dense complex matrix, column-major.
pub type CMat = nalgebra::DMatrix<Complex64>;
/// Dense real matrix, column-major.
pub type RMat = nalgebra::DMatrix<f64>;
