//! Planar grasp simulation for compliant parallel-jaw grippers.
//!
//! The simulator advances a 2D scene (deformable jaw pads, a stiff object, rigid
//! backings and a ground slab) with implicit Euler steps. Each step minimizes an
//! incremental potential made of inertia, Neo-Hookean strain energy, a smoothed
//! log-barrier contact term and lagged, mollified friction. A CCD-filtered line
//! search keeps every accepted state intersection- and inversion-free.
//!
//! On top of the dynamics sit the grasp state machine (squeeze until the pad
//! strain energies cross a threshold, lift, evaluate), Monte-Carlo robustness
//! estimation under grasp-pose noise, an analytic soft-point-contact baseline and
//! an evaluation harness computing precision, recall and F1 against labels.

// validation uses `!(x > 0.0)` so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod config;
pub mod contact;
pub mod elastic;
pub mod error;
pub mod grasp;
pub mod harness;
pub mod linalg;
pub mod scene;
pub mod stepper;

pub use error::{Error, Result};

/// 2D point or vector, meters unless stated otherwise.
pub type Vec2 = nalgebra::Vector2<f64>;
