//! Suggestion mining over forum text: normalization, class rebalancing,
//! sparse and recurrent classifiers, positive-class evaluation and error
//! analysis.

pub mod cli;
pub mod config;
pub mod corpus;
pub mod eval;
pub mod features;
pub mod fingerprint;
pub mod linear;
pub mod model;
pub mod neural;
pub mod normalize;
