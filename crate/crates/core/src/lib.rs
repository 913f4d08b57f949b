//! Live per-class call-count telemetry rendered as a software city with a
//! linked time-by-class scatter history.
//!
//! Events flow from a profiler (or the synthetic [`harness`]) through the
//! line-delimited [`ingest`] protocol into fixed-length windows, whose
//! frames fill the [`history`] buffer. [`layout`] turns the static
//! [`model`] into city geometry, and [`service`] streams both to clients.

pub mod harness;
pub mod history;
pub mod ingest;
pub mod layout;
pub mod model;
pub mod service;
