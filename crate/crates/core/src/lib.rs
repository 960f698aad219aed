//! Online learning for dynamic k-clustering.
//!
//! Each round a learner commits to at most `k` centers in a finite metric
//! space, then a (possibly adversarial) set of clients arrives and the
//! learner pays the p-norm of the client-to-nearest-center distances.
//!
//! The learner keeps a fractional opening on the scaled simplex, updated
//! by exponentiated gradient with subgradients read off a combinatorial
//! dual certificate ([`fractional`], [`learner`]), and rounds it to centers
//! either deterministically or randomly ([`rounding`], [`integral`]).
//! [`stream`] generates client streams, [`oracle`] holds brute-force
//! references, [`harness`] runs whole experiments and [`verify`] checks
//! the provable properties on random instances.

pub mod error;
pub mod fractional;
pub mod harness;
pub mod integral;
pub mod learner;
pub mod metric;
pub mod oracle;
pub mod rounding;
pub mod stream;
pub mod verify;

pub use error::{Error, Result};
pub use fractional::{
    dual_certificate, fractional_cost, subgradient, water_fill, DualCertificate,
    FractionalOpening, SubgradientVector,
};
pub use integral::{Combiner, IntegralLearner, RoundingMode};
pub use learner::{FractionalLearner, LearnerConfig};
pub use metric::{connection_cost, CenterSet, ClientRound, MetricSpace, NormOrder};
pub use rounding::{round_deterministic, round_randomized};
