//! GAN-based anomaly detection for RF I/Q frames.

pub mod anomaly;
pub mod ganmodels;
pub mod harness;
pub mod metrics;
pub mod rfdata;
pub mod training;
