//! Data model and analyses for catalogues of movable-type impressions.

pub mod analytics;
pub mod curation;
pub mod ingest;
pub mod model;
pub mod raster;
pub mod synth;
