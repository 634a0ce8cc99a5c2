pub mod autodiff;
pub mod classifier;
pub mod edge;
pub mod encoder;
pub mod experiment;
pub mod gradcheck;
pub mod graph;
pub mod metrics;
pub mod model;
pub mod oversample;
pub mod train;
