//! Monte Carlo evaluation: `L_p` risk by quadrature, the fixed-bandwidth
//! oracle, concentration audits and theoretical rates.

mod audit;
mod experiment;
mod lp;
mod rate;
mod scenario;
mod truth;

pub use audit::{concentration_audit, quantile_probes, unbiasedness_check, ConcentrationAudit, ExceedanceRow, UnbiasednessRow};
pub use experiment::{
    run_risk_experiment, run_risk_experiment_with, FailureRecord, Method, OracleRow, RatePrediction, RiskReport, RiskRow,
    SlopeFit, MIN_SLOPE_POINTS,
};
pub use lp::{lp_distance, lp_distance_values, truth_on_grid, QuadGrid, MASS_DEFICIT_TOL};
pub use rate::{theoretical_rate, RateSpec, Regime};
pub use scenario::{default_probe, GridConfig, NoiseDescription, NoiseLaw, Scenario, TargetDescription};
pub use truth::{expected_estimate, observation_density, observation_marginal, observation_quantile, observation_support, smoothed_truth, true_sigma2};
