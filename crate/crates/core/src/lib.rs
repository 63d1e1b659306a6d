//! Bid-rigging detection on procurement data.
//!
//! The crate turns tabular bid records into screening-variable features and a
//! multi-relation graph over bids, then trains either a three-layer
//! feedforward network or a three-layer relational graph convolutional network
//! (R-GCN) with class-weighted cross-entropy. Experiments cover within-market
//! evaluation with company-level splits and cross-validated grid search, and
//! zero-shot transfer of trained models to other markets.

pub mod error;
pub mod tensor;

pub use error::{Error, Result};
pub mod dataio;
pub mod experiments;
pub mod graph;
pub mod metrics;
pub mod models;
pub mod screens;
pub mod training;
