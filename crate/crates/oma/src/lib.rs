//! Operational memory for Kubernetes-style clusters: a durable causal event
//! log with typed edges, point-in-time snapshots, forensic queries, a
//! simulator that reproduces the one-termination-record blind spot of live
//! cluster state, and benchmark harnesses.

pub mod bench;
pub mod cli;
pub mod engine;
pub mod fixtures;
pub mod http;
pub mod ingest;
pub mod query;
pub mod store;
