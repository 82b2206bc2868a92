//! Information-theoretic sample-complexity lower bounds for learning the
//! structure of Bayesian networks, together with the brute-force machinery
//! needed to check every bound on small instances.
//!
//! The crate is organised bottom-up:
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`dag`] | labeled DAGs, Markov equivalence, exhaustive enumeration |
//! | [`ensembles`] | the restricted (essential) and layered DAG families: exact counts, closed-form bounds, uniform sampling |
//! | [`expfam`] | exponential-family conditionals (CPT, Gaussian, noisy-OR, logistic), parameter maps, forward sampling |
//! | [`bounds`] | per-family `Δ_max`, sample-count thresholds, the summary table |
//! | [`infotheory`] | exact entropy and mutual information, the latent-variable Fano inequality, MI bounds |
//! | [`experiments`] | decoders and the seeded error-curve harness |
//!
//! All logarithms are natural; every information quantity is in nats.

pub mod bounds;
pub mod dag;
pub mod ensembles;
mod error;
pub mod experiments;
pub mod expfam;
pub mod infotheory;
pub mod rng;

pub use error::{Error, Result};
