//! Boolean FHE over the discretized torus, plaintext and homomorphic
//! Trivium, encrypted Hamming-threshold matching, and a three-party
//! transciphering protocol for biometric authentication together with two
//! two-party baselines.

pub mod btf_protocol;
pub mod error;
pub mod etm_circuits;
pub mod gate_boot;
pub mod harness;
pub mod hom_trivium;
pub mod serial;
pub mod torus_lwe;
pub mod trivium;

pub use error::{Error, Result};
