pub mod numerics;
pub mod domain;
pub mod config;
pub mod model;
pub mod metrics;
pub mod training;
pub mod synth;
