//! Sum-rate maximization for RIS-assisted NOMA backscatter networks.
//!
//! A carrier transmitter illuminates `K` backscatter devices (BDs) whose
//! reflected signals reach a receiver both directly and through a
//! reconfigurable intelligent surface. The solver alternates between the
//! BD reflection coefficients, which have a closed form per decoding order,
//! and the RIS phase shifts, handled with a penalty/SCA step followed by
//! descent on the unit-modulus manifold.

pub mod ao;
pub mod baselines;
pub mod channel;
pub mod error;
pub mod experiments;
pub mod manifold;
pub mod power_alloc;
pub mod qcqp;
pub mod sca;

pub use error::{Error, Result};
