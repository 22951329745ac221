//! Bilevel hyperparameter selection for support vector classification.
//!
//! The cross-validated choice of the penalty `C` and feature bounds `w̄` is
//! posed as a single-level MPEC and solved by a global relaxation whose
//! subproblems are handled with the LP-Newton method. Grid search and a
//! fixed-relaxation baseline are provided for comparison.

pub mod dataio;
pub mod error;
pub mod fixtures;
pub mod gridsearch;
pub mod grlpn;
pub mod lpnewton;
pub mod lpsolve;
pub mod metrics;
pub mod mpec;
pub mod report;
pub mod residual;
pub mod sparse;
pub mod svcqp;

pub use dataio::{augment_bias, kfold_split, parse_libsvm, parse_libsvm_str, CvSplit, Dataset};
pub use error::{Error, Result};
pub use gridsearch::{grid_search, GridConfig, GridResult};
pub use grlpn::{
    solve, solve_inlp, threshold_features, EpsilonMode, InitConfig, SolveReport, SolveStatus,
    SolverConfig,
};
pub use lpnewton::{InnerStatus, LpNewtonConfig};
pub use mpec::{assemble, Bounds, MpecDims, MpecProblem, VariableVector};
pub use residual::IterateZ;
pub use sparse::CsrMatrix;
