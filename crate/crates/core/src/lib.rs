//! Steady-state equilibria of repeated funding contests in which rejected
//! applicants may be temporarily excluded, together with a finite-population
//! simulator used to check the analytic solutions.

pub mod analysis;
pub mod cli_io;
pub mod contest;
pub mod distributions;
pub mod equilibria;
pub mod par;
pub mod roots;
pub mod sim;

pub use contest::{Cutoff, ExtReal, ModelParams, ResearcherType, SubmissionProfile, SuccessEvaluation};
pub use distributions::ScalarDistribution;
pub use equilibria::{EquilibriumOutcome, Policy, Regime};
pub use par::Execution;
