//! Verifiable experiments on assembled pencils and the config-driven runner.

mod checks;
mod cover;
mod deformation;
mod distance;
mod localization;
mod run;

pub use checks::{check_adjacent_degree, check_duality, check_partial_relations, degree_spectra, CheckReport};
pub use cover::{build_gromov_cover, partition_localization_check, PartitionOfUnity, PartitionReport};
pub use deformation::{deformation_experiment, DeformationFamily, DeformationPoint, DeformationReport};
pub use distance::{spectra_distance, windowed_hausdorff};
pub use localization::{
    dirichlet_ball_eigenvalue, fit_log_slope, localization_experiment, LocalizationReport,
    LOCALIZATION_SLOPE_RANGE,
};
pub use run::{run, ComplexSource, Experiment, ProbeKind, RandomWeights, RunConfig, RunRecord, SCHEMA_VERSION};
