//! Two-seller sequential search on a platform that commits to a ranking rule.
//!
//! The crate is organised bottom-up:
//!
//! - [`search`]: consumer stopping rule, rank-conditional demands, bonus and
//!   social values.
//! - [`deviation`]: a seller's best price when demoted to rank two.
//! - [`feasible`]: the implementable price set, its `H` function, the
//!   search-order interval and boundary tracing.
//! - [`objectives`]: contract objectives and the optimal-contract solvers.
//! - [`corner`]: modified incentive constraints for prices at or above the
//!   reservation threshold.
//! - [`sim`]: Monte-Carlo consumers, ranking algorithms and Nash checks.
//! - [`io`]: CSV formats for boundary traces, sweeps and constraint loci.

pub mod corner;
pub mod deviation;
mod error;
pub mod feasible;
pub mod io;
pub mod numeric;
pub mod objectives;
pub mod search;
pub mod sim;

pub use error::{Error, Result};
pub use search::{Distribution, PricePair, SearchEnv, Seller};
