//! Simulation and statistical checks for soft random simplicial complexes.
//!
//! Pipeline: [`point_process`] draws a binomial or Poisson cloud,
//! [`geometry`] links points within distance `r`, [`complex`] builds the
//! Vietoris-Rips or Čech complex and thins it by a retention vector,
//! [`constants`] estimates the limit constants that govern face-count
//! moments, and [`experiments`] replicates the whole thing and checks the
//! normal approximations.

pub mod complex;
pub mod constants;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod meb;
pub mod point_process;
pub mod rng;
pub mod stats;

pub use complex::{
    build_cech, build_cech_from_graph, build_rips, euler_characteristic, face_counts, soft_thin, FaceCounts, FaceList,
    Flavor, RhoVector, SimplicialComplex,
};
pub use constants::{
    estimate_mu, estimate_nu, estimate_phi, estimate_theta, predicted_moments, regime_check, retention_exponent,
    ConstantEstimate, ConstantKind, ConstantSet, RegimeMode, RegimeReport, RegimeThresholds,
};
pub use error::{Error, Result};
pub use experiments::{
    clt_report, depoisson_compare, run_experiment, variance_ratio_report, CltReport, ExperimentConfig, ProcessKind,
    RadiusRule, ReplicationResult, RhoRule, Statistic,
};
pub use geometry::{build_graph, in_region, leftmost_point, GeometricGraph, RegionSpec};
pub use meb::min_enclosing_ball_radius;
pub use point_process::{density_eval, sample_binomial, sample_poisson, Density, PointCloud, Provenance};
