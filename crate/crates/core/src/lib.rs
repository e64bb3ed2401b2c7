//! Resource-dependent branching processes: joint weakest-first resource
//! sharing between sub-populations, equilibrium thresholds, the expected-size
//! bound for a weakest-first society, and the transport view of the
//! allocation rule.

pub mod numeric;
pub mod dists;
pub mod society;
pub mod sim;
pub mod equilibrium;
pub mod brs;
pub mod transport;
pub mod config;
pub mod io;
