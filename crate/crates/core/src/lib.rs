//! Dropout prediction for crowdsourcing contest markets.
//!
//! The crate turns a log of contest participations into per-worker degree
//! features, labels workers as dropouts, measures how success rate relates to
//! dropping out, and classifies workers with k-nearest-neighbors and Gaussian
//! naive Bayes. A seeded market simulator produces logs with the same shape.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, ingestion and the
//! command line live in the `churnforge` crate.
//!
//! ```
//! use churnforge_core::{analysis, label, network, synth};
//!
//! let mut config = synth::default_config(3);
//! config.n_workers = 60;
//! config.n_tasks = 400;
//! let log = synth::generate_market(&config).unwrap();
//!
//! let features = network::worker_features(&network::build_networks(&log));
//! let rho = analysis::degree_correlation(&features).unwrap().rho;
//! assert!(rho > 0.0);
//!
//! let cut = label::split_cut_time(&log, 2.0 / 3.0).unwrap();
//! let labeled = label::label_dataset(&log, cut);
//! assert!(!labeled.is_empty());
//! ```
#![cfg_attr(not(any(feature = "std", test)), no_std)]

extern crate alloc;

pub mod analysis;
pub mod classify;
pub mod eval;
pub mod label;
pub mod model;
pub mod network;
pub mod synth;

pub use model::{
    finalize_log, ArrivalEvent, BinRow, BinTable, DropoutLabel, EventLog, Finalized, LabelRule,
    ModelError, WorkerFeatures,
};
