//! Reduced distribution system model: per-area equivalent feeders feeding
//! one composite load each, fitted to root-level measurements.

mod dataset;
mod feeder;
mod fit;
pub mod optimize;
mod pipeline;
mod submodel;

pub use dataset::{generate_surrogate_dataset, steady_records, AreaRecord, FitDataset, ScenarioRecord, ScenarioSweepSpec};
pub use fit::{
    calibrate_load, evaluate_fit, fit_parameters, objective, parameters_from_vector, ChannelNrmse, FitConfig, FitProblem,
    FitResult, StartSummary, FIT_PARAMETERS,
};

pub use feeder::{estimate_feeder_equivalent, SteadyRecord};
pub use pipeline::{
    census_file, census_parameters, feeder_equivalents, fit_area, fit_prior, fit_rdsm, AreaFitSummary, FitProvenance, FittedParamsFile,
    FITTED_FORMAT_VERSION,
};
pub use submodel::{simulate_submodel, EquivalentFeeder, SubModelParameters, SubModelTrace};
