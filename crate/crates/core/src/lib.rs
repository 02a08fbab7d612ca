//! Preprocessing, classification and attribution for eye-tracking
//! recordings from Concealed Information Test sessions.
//!
//! The pipeline reads per-trial gaze samples and ocular events, derives a
//! fixed 60-column feature vector per trial, trains boosted-tree
//! classifiers under participant-grouped cross-validation and ranks
//! features by mean absolute Shapley value.

pub mod config;
pub mod events;
pub mod explain;
pub mod features;
pub mod gbdt;
pub mod ingest;
pub mod harness;
pub mod pupil;
pub mod seed;
pub mod synth;
pub mod verify;
