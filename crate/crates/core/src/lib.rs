//! Pricing and welfare in a two-sided Internet market where consumer and
//! content-provider types follow power laws.
//!
//! The ISP charges consumers a flat membership fee `c` and CPs a fee `b` per
//! unit of type. Network speed falls with total traffic. The crate computes
//! revenue-optimal and socially optimal participation thresholds, the
//! welfare comparison between net neutrality (`b = 0`) and revenue
//! maximization, and a two-channel ("Paris metro") split of the bandwidth.
//! Every closed form is paired with a brute-force check in [`oracle`].

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod market;
pub mod oracle;
pub mod pmp;
pub mod powerlaw;
pub mod quadrature;
pub mod roots;
pub mod solver;
pub mod valuefn;
pub mod verify;

pub use error::{Error, Result};
pub use market::{MarketParams, Pricing, Thresholds};
pub use pmp::{ChannelSplit, PmpSolution};
pub use powerlaw::Exponent;
pub use solver::{Regime, RegimeSolution, ThresholdConstants};
pub use valuefn::PhiSpec;
