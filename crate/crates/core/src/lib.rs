//! Panel-data treatment-effect estimation under latent factor structures.
//!
//! The crate covers interactive fixed effects (static and dynamic
//! specifications), the synthetic-control family (SC, demeaned SC,
//! generalized SC, synthetic difference-in-differences), seeded Monte Carlo
//! designs with heterogeneous effects, and permutation placebo inference.

pub mod dgp;
pub mod error;
pub mod estimator;
pub mod factor;
pub mod ife;
pub mod inference;
pub mod panel;
pub mod rng;
pub mod scfamily;

pub use error::{Error, Result};
pub use factor::{annihilator, d_functional, principal_factors, FactorModel, Projection};
pub use panel::{
    load_panel, load_result, save_panel, save_result, treatment_mask, AttEstimate, ColumnSchema,
    PanelData, ResultDocument,
};
