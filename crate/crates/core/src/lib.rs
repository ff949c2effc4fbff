//! Desk-scale recurrence toolkit.
//!
//! Bohr sets and Bohr-Hamming neighborhoods over certified-independent
//! frequency vectors, simultaneous Diophantine (Kronecker) approximation,
//! return-time sets of rotation systems, Hamming-ball pigeonhole checks on
//! `Z_k^d`, and the staged Cantor/KS-measure construction.
//!
//! Every infinite object is handled through an explicit finite [`Window`]:
//! statements produced here are of the form "inside this window, no
//! counterexample".

pub mod bohr;
pub mod cli;
pub mod diophantine;
pub mod dynamics;
mod error;
pub mod kleitman;
pub mod ks;
pub mod torus;
pub mod window;

pub use error::{Error, Result};
pub use torus::{Guard, Threshold, TorusPoint, Verdict, Q};
pub use window::{Window, WindowedSet};
