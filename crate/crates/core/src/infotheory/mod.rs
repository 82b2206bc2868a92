//! Exact information quantities on finite joints, the latent-variable Fano
//! inequality, and exact / Monte Carlo mutual information between a data set
//! and the structure that generated it. All values are in nats.

mod fano;
mod mi;

pub use fano::{
    entropy, fano_bound, random_fano_model, run_fano_trials, verify_fano_extension, FanoCheck, FanoTrials,
    FiniteJoint, SupForm, MASS_TOLERANCE,
};
pub use mi::{
    expected_delta, expected_kl, mi_exact, mi_monte_carlo, mi_report, mi_upper_bound, MiMethod, MiReport,
    MAX_EXACT_WORK,
};
