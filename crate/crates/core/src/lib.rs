//! Shape-based comparison and clustering of annual rainfall series.
//!
//! The pipeline runs in stages:
//!
//! 1. [`ingest`]: read a daily rain-gauge record and cut it into
//!    September-to-August hydrological years;
//! 2. [`warp`] and [`matrix`]: compare every pair of years with an iterative
//!    multiscale dynamic time warping and collect the scores in a symmetric
//!    dissimilarity matrix;
//! 3. [`clustering`]: group years with K-medoids on that matrix;
//! 4. [`indices`]: describe clusters with precipitation indices and label them;
//! 5. [`trend`]: count cluster frequencies in sliding multi-decade windows.
//!
//! [`pipeline`] chains the stages over files and [`figures`] renders the
//! heatmap and alignment plots as SVG.

pub mod clustering;
pub mod exec;
pub mod figures;
pub mod indices;
pub mod ingest;
pub mod matrix;
pub mod pipeline;
pub mod synthetic;
pub mod trend;
pub mod warp;

pub use exec::Execution;
