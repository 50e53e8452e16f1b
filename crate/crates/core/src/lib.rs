pub mod cli;
pub mod dataset;
pub mod diagnostics;
pub mod error;
pub mod evaluate;
pub mod features;
pub mod ingest;
pub mod learners;
pub mod outliers;
pub mod pipeline;
pub mod resample;
pub mod selection;

pub use dataset::{Dataset, Matrix};
pub use error::{Error, Result};
