//! Low-rank matrix recovery with a flexible group sparse regularizer.
//!
//! The library factors the unknown matrix as XYᵀ, partitions the factor
//! columns into groups, and penalizes the group norms with a capped concave
//! function so that whole groups vanish and the product drops rank. An
//! inexact restarted augmented Lagrangian outer loop ([`iral`]) drives an
//! extrapolated linearized alternating minimization inner solver ([`elam`])
//! with closed-form group proximal steps ([`regularizer`]).
//!
//! The [`cli`] module and the `flgsr` binary run the image-inpainting and
//! synthetic-recovery experiments end to end, with PSNR/SSIM reporting.

pub mod cli;
pub mod data;
pub mod elam;
pub mod error;
pub mod grouping;
pub mod iral;
pub mod linalg;
pub mod linops;
pub mod metrics;
pub mod regularizer;

pub use error::{FlgsrError, Result};
