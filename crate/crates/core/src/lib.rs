//! Large-sample and catalytic relative majorization of pairs of flat quantum
//! states.
//!
//! A pair of cq-states with pure components is stored as a [`FlatPair`], a
//! list of blocks `(p, q, F)`. The crate evaluates the alpha-z relative
//! entropy family on such pairs, checks the entropy inequalities that decide
//! asymptotic and catalytic convertibility, computes optimal conversion rates,
//! and builds and verifies explicit channels, including a numerical
//! channel-existence oracle.
//!
//! Every numerical type is generic over [`Real`] (`f32` or `f64`); the root
//! aliases fix `f64`, with `*32` variants for `f32`.

pub mod channels;
pub mod conditions;
pub mod entropies;
pub mod error;
pub mod feasibility;
pub mod flatpair;
pub mod jordan;
pub mod json;
pub mod linalg;
pub mod minimize;
pub mod rates;
pub mod sample;
pub mod scalar;

pub use error::{Error, Result};
pub use flatpair::{Block as GenericBlock, FlatPair as GenericFlatPair, PairClass};
pub use scalar::{log_sum_exp, Real, C};

pub type Block = flatpair::Block<f64>;
pub type FlatPair = flatpair::FlatPair<f64>;
pub type ParamPoint = entropies::ParamPoint<f64>;
pub type CompactParam = entropies::CompactParam<f64>;
pub type DenseOperatorPair = jordan::DenseOperatorPair<f64>;
pub type JordanDecomposition = jordan::JordanDecomposition<f64>;
pub type Verdict = conditions::Verdict<f64>;
pub type RateReport = rates::RateReport<f64>;
pub type ChannelRep = channels::ChannelRep<f64>;
pub type FeasibilityProblem = feasibility::FeasibilityProblem<f64>;
pub type FeasibilityResult = feasibility::FeasibilityResult<f64>;
pub type CMat = linalg::CMat<f64>;

pub type Block32 = flatpair::Block<f32>;
pub type FlatPair32 = flatpair::FlatPair<f32>;
pub type ParamPoint32 = entropies::ParamPoint<f32>;
pub type CompactParam32 = entropies::CompactParam<f32>;
pub type DenseOperatorPair32 = jordan::DenseOperatorPair<f32>;
pub type Verdict32 = conditions::Verdict<f32>;
pub type RateReport32 = rates::RateReport<f32>;
pub type ChannelRep32 = channels::ChannelRep<f32>;
pub type CMat32 = linalg::CMat<f32>;
