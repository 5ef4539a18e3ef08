//! Studies on top of `rbffd`: single runs with stage timing, convergence
//! fits, accuracy/time trade-offs, spectra and the four-dimensional scenario.

pub mod analysis;
pub mod config;
pub mod output;
pub mod run;
pub mod scenario;
pub mod spectrum;
