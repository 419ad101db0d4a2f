//! Nyquist-spaced WDM coherent transmission simulator with electronic
//! dispersion compensation and multi-channel digital back-propagation.

pub mod channel;
pub mod cli;
pub mod config;
pub mod equalizer;
pub mod experiments;
pub mod metrics;
pub mod modem;
pub mod sigproc;
