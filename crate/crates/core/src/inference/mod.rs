//! Correlation estimators, CHSH evaluation and the joint-distribution test.

mod chsh;
mod estimate;
mod fine;
mod law;
mod simplex;

pub use chsh::{
    chsh, chsh_from_correlations, chsh_variants, ChshResult, ChshVariant, SettingCorrelation,
};
pub use estimate::{
    conditional_average, estimate_correlation, estimate_correlation_eq4, estimate_marginal,
    CorrelationEstimate,
};
pub use fine::{atom, joint_feasibility, JointFeasibility, FEASIBILITY_TOLERANCE};
pub use law::{estimate_correlation_measurement_time, DetectionLaw};
