//! Node-cardinality estimation for heterogeneous wireless networks read by a
//! mobile base station.

pub mod analysis;
pub mod binomial;
pub mod channel;
pub mod config;
pub mod energy;
pub mod error;
pub mod exec;
pub mod experiment;
pub mod hsrc_m1;
pub mod hsrc_m2;
pub mod omt;
pub mod protocol;
pub mod rng;
pub mod scenario;
pub mod srcm;

pub use error::{Error, Result};
