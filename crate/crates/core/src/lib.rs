//! Automatic gaze annotation for mobile eye-tracking recordings.
//!
//! Pose keypoints become head, hand and torso areas of interest; aligned gaze
//! samples are coded against them frame by frame. The crate also evaluates
//! detectors (PR curves, F1, AP) and compares codings with inter-coder
//! agreement statistics.

// `!(x > 0.0)` guards are deliberate: they reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod ingest;
pub mod labeling;
pub mod par;
pub mod reliability;

pub use error::{Error, Result};
