//! Periodic event-triggered consensus of identical linear agents.
//!
//! The crate is `no_std` (with `alloc`) and holds the whole algorithmic
//! core: dense linear algebra ([`matlib`]), undirected topologies and
//! their Laplacian spectra ([`graph`]), controller and trigger synthesis
//! ([`synthesis`]), the per-agent runtime ([`agents`]) and the sampled-time
//! world with its delayed channel ([`netsim`]).
//!
//! File formats, the command line and batch execution live in the `petc`
//! companion crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod agents;
pub mod graph;
pub mod matlib;
pub mod netsim;
pub mod synthesis;
pub mod tol;

pub use matlib::{Matrix, SpectralResult};
