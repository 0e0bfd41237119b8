//! Coordinate-chart tensor calculus and numerical verification of modified
//! Ricci solitons and the modified Ricci-harmonic flow.

pub mod catalog;
pub mod chart;
pub mod config;
pub mod error;
pub mod field;
pub mod flow;
pub mod jet;
pub mod quadrature;
pub mod report;
pub mod run;
pub mod tensor;
pub mod verifier;

pub use error::{Error, Result};
