//! Core library for an NFT buyer recommender.
//!
//! The pipeline runs in this order:
//!
//! 1. [`ingest`] parses marketplace events, cleans them into labeled
//!    interaction records, samples negatives, groups and splits.
//! 2. [`eda`] computes descriptive statistics over events and records.
//! 3. [`ffm`] builds a field/feature vocabulary and encodes records as
//!    libffm text rows.
//! 4. [`model`] trains the xDeepFM scorer; [`baselines`] trains logistic
//!    regression and Gaussian naive Bayes on the same rows.
//! 5. [`metrics`] scores predictions with AUC and logloss.
//! 6. [`recommend`] pairs a user with catalog assets and ranks them.

pub mod baselines;
pub mod container;
pub mod eda;
pub mod ffm;
pub mod ingest;
pub mod metrics;
pub mod model;
pub mod recommend;

pub(crate) mod util;
