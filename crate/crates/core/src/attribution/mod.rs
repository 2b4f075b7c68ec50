//! Integrated-gradients attribution of fused predictions to image pixels
//! and question tokens.

mod export;
mod ig;
mod model;

pub use export::{export_attribution, graymap, read_attribution};
pub use ig::{completeness_check, integrated_gradients, IGConfig, IgScores};
pub use model::{attribute, AttributionResult};
