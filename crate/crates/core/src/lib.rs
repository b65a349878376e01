//! Sojourn-time analysis for open Jackson queueing networks.
//!
//! - [`network`]: model validation, traffic equations, product form, topology.
//! - [`moments`]: exact moments from the network flow equations and closed forms.
//! - [`uniformization`]: certified distribution bounds and moment lower bounds
//!   for any stable network.
//! - [`simulator`]: discrete-event simulation used as an independent oracle.
//! - [`compare`]: joins the three views on one time grid.

pub mod compare;
pub mod erlang;
pub mod error;
pub mod io;
pub mod moments;
pub mod network;
pub mod simulator;
pub mod uniformization;

pub use error::{Result, SojournError};
pub use network::{NetworkSpec, TopologyClass, TrafficSolution};
