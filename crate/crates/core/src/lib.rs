//! Exact verification and Monte Carlo simulation for anisotropic oriented
//! percolation on `ℤ^d`.
//!
//! * [`prob`]: weight vectors, edge parameters, `μ` and `Var Y₀`.
//! * [`oracle`]: brute-force path-pair enumeration in exact rationals.
//! * [`walk`]: two-walk collision series, first-meeting law, lazy walks and
//!   the multinomial/Stirling bound chain.
//! * [`packer`]: the packing map on capped probability vectors.
//! * [`certifier`]: percolation certificates.
//! * [`sim`]: seeded level-by-level cluster growth.
//! * [`suite`]: the end-to-end verification suite.

pub mod certifier;
pub mod error;
pub mod oracle;
pub mod packer;
pub mod prob;
pub mod sim;
pub mod suite;
pub mod walk;

pub use error::{Error, Result};
pub use prob::{EdgeParams, ProbVector};
