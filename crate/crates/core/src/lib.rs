//! Simulation lab for data location protocols.

pub mod audit;
pub mod directory;
pub mod error;
pub mod explore;
pub mod hash;
pub mod measure;
pub mod net;
pub mod proto;
pub mod scenario;
