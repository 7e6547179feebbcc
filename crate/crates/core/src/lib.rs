//! Stein-rule combinations of two linear-regression estimators.
//!
//! The crate provides the estimators (`model`, `shrinkage`), samplers for
//! their joint law (`distributions`), Monte Carlo checks of the risk bounds
//! (`risk`), simulation sweeps (`simulation`) and a dataset pipeline with a
//! bootstrap efficiency estimate (`analysis`).

pub mod error;
pub mod linalg;
pub mod rng;
pub mod stats;

pub mod model;
pub mod shrinkage;
pub mod distributions;
pub mod risk;
pub mod simulation;
pub mod analysis;

pub use error::{Error, Result};
pub use model::{
    estimate_pair, fit_diag_competitor, fit_ols, fit_restricted, joint_moments_diag,
    joint_moments_restricted, Competitor, EstimatePair, JointMoments, LinearModel,
    LinearRestriction,
};
pub use shrinkage::{combine, EstimatorSpec, HFunction, HKind, HSpec, ShrinkageSpec};
pub use distributions::{
    inv_chisq_mean, sample_joint_elliptical, sample_joint_gaussian, sample_joint_singular,
    EllipticalSpec, JointDraws, JointSampler, JointSource, RegressionSampler,
};
pub use risk::{estimate_risk_moments, mse_analytic, BoundReport, RiskMoments};
pub use simulation::{gamma_sweep, run_sweep, SimConfig, SweepResult, SweepRow};
pub use analysis::{bootstrap_efficiency, correlation_table, load_csv, point_estimates, Dataset, EfficiencyReport};
