//! Semi-supervised node classification with random-walk diffusions whose
//! step coefficients are learned per class.
//!
//! A class diffusion is a convex combination of the landing probabilities
//! `p^(1), …, p^(K)` of a walk seeded uniformly on the labeled nodes of that
//! class. [`fit_adadif`] learns the combination by trading a degree-weighted
//! fit on labeled nodes against graph smoothness. [`fit_radadif`] instead
//! fits leave-one-out predictions while modelling mislabeled seeds as
//! row-sparse outliers.

pub mod diffusion;
pub mod error;
pub mod graph;
pub mod optim;
pub mod robust;
pub mod theory;
pub mod walks;

pub use diffusion::{
    assemble_system, count_unscored, default_dictionary, fit_adadif, fit_fixed, hk_coefficients,
    kstep_classifier, label_propagation, ppr_coefficients, predict, predict_top_m,
    ClassDiffusion, HyperParams, LabeledSet,
};
pub use error::{Error, Result};
pub use graph::{load_graph, spectral_summary, Graph, SpectralSummary};
pub use optim::{
    project_simplex, row_group_soft_threshold, solve_hyperplane_qp, solve_simplex_qp,
    CoefficientVector, Constraint, QuadraticSystem, SolverOptions,
};
pub use robust::{
    build_loo_matrix, detection_counts, fit_radadif, robust_loss, LeaveOneOutMatrix, OutlierStep,
    RobustFit, RobustParams,
};
pub use theory::{empirical_kgamma, kgamma_bound, kgamma_bound_ppr, BoundInputs, EmpiricalKGamma};
pub use walks::{
    dictionary_diffusions, landing_probabilities, leave_one_out_walks, Dictionary,
    DifferentialMatrix, LandingProbMatrix, SeedVector,
};
