//! Scale-hierarchical sparse representations of scattered data with a
//! Gaussian kernel.
//!
//! [`hierfit::fit`] walks length scales from coarse to fine, picks a subset of
//! sites at each scale and stops once the projection residual meets a
//! tolerance. The resulting [`HierModel`] is enough to reconstruct or predict
//! anywhere; [`predict`] adds t-based bands and [`diagnostics`] exposes the
//! quantities behind the convergence and stability theory.

pub mod baseline;
pub mod basis;
pub mod data;
pub mod diagnostics;
pub mod error;
pub mod hierfit;
pub mod kernel;
pub mod linalg;
pub mod predict;
mod real;

pub use faer;

pub use data::{Dataset, GridSpec, NormalizationInfo, Sampling, TestFunction};
pub use baseline::{CascadeModel, ComparisonReport};
pub use error::{Error, Result};
pub use hierfit::{fit, FitSettings, FitTrace, HierModel, ScaleFit, ScaleRecord, TerminalStatus};
pub use predict::IntervalBand;
