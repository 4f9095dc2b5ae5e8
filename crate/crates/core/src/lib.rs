//! Exact and limiting mixing distances for the colored top-`m`-to-random
//! shuffle on `C_p ≀ S_n`.
//!
//! - [`group`]: elements, the group law, enumeration, nested sets `A_u` and
//!   the statistic `L_p`.
//! - [`occupancy`]: exact mixture weights from the coupon-collector model.
//! - [`distances`]: exact TV, separation, `L^q`, `L^∞`, χ² and KL of a
//!   nested-set mixture through its one-statistic likelihood ratio.
//! - [`profiles`]: limiting cutoff-window profiles.
//! - [`oracle`]: brute-force convolution over the enumerated group and Monte
//!   Carlo simulation, used to certify the formulas.

pub mod distances;
pub mod error;
pub mod exact;
pub mod group;
pub mod occupancy;
pub mod oracle;
pub mod profiles;

pub use distances::{DistanceReport, LikelihoodProfile, LqValue, MixtureSpec, TvResult};
pub use error::{Error, Result};
pub use group::{ColoredPermutation, GroupParams};
pub use num_bigint::BigInt;
pub use num_rational::BigRational;
pub use occupancy::{OccupancyWeights, SamplingParams};
pub use oracle::GroupDistribution;
pub use profiles::{LinftyLimit, ProfilePoint, SeriesControl};
