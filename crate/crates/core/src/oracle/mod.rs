//! Ground-truth engines: exact conditional laws, conditioned sampling,
//! finite-`n` rates and the occupancy oracle.

pub mod empirical;
pub mod exact;
pub mod occupancy;
pub mod sim;

pub use empirical::{
    dp_conditional_laplace, empirical_rate, mdp_empirical, EmpiricalMethod, OracleMetadata, RateEstimate, RateSequence,
};
pub use exact::{exact_conditional_law, exact_conditional_law_with_budget, ConditionalLawExact, DpEngine, MarkGrid, Side};
pub use occupancy::{occupancy_oracle, OccupancyLaw, OccupancyMethod};
pub use sim::{sample_conditioned, two_sample_chi_square, ChiSquareTest, Proposal, SampleSet, SimConfig};
