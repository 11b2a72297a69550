//! Non-semantic image forgeries built from camera-pipeline traces.
//!
//! A clean half-resolution reference is rendered through two simulated
//! camera pipelines that differ only in one trace family (raw noise law,
//! CFA phase, demosaicing algorithm, JPEG grid or quality). The two renders
//! are merged through a mask, so forged and authentic regions share their
//! content and differ only in those traces. Simple trace probes and a
//! heatmap-weighted MCC score close the loop.

pub mod cfa;
pub mod error;
pub mod forgery;
pub mod jpeg_sim;
pub mod masks;
pub mod metrics;
pub mod pipeline;
pub mod probes;
pub mod raster_io;
pub mod raw_model;
pub mod synthetic;
pub mod tone;

pub use error::{Error, Result};
