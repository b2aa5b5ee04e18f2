//! Sparse regression around the `γ_{s,ρ−}` design index.
//!
//! * [`matrix`]: design matrices, coherence, restricted singular values.
//! * [`sphere`]: uniform-sphere random matrices and the law of `|⟨X_j, v⟩|`.
//! * [`gamma`]: exact, net-certified and Monte-Carlo evaluation of the index.
//! * [`lasso`] and [`bounds`]: certified coordinate-descent LASSO and the λ rule.
//! * [`augment`]: appending a random sphere block to an arbitrary design.
//! * [`verify`]: seeded Monte-Carlo suites and the prediction experiment.

pub mod augment;
pub mod bounds;
pub mod error;
pub mod gamma;
pub mod io;
pub mod lasso;
pub mod matrix;
pub mod sphere;
pub mod stats;
pub mod verify;

pub use augment::{AugmentConfig, AugmentedFit};
pub use bounds::{BoundReport, SigmaSource, TheoremInputs};
pub use error::{Error, Result};
pub use gamma::{GammaBracket, GammaEstimate, GammaParams};
pub use lasso::{LassoFit, SolverOptions};
pub use matrix::{DesignMatrix, IndexSet, SpectralInterval};
pub use sphere::{DotLaw, Seed};
pub use verify::{SuiteReport, TrialPlan};

/// Crate version, stamped into every report.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
