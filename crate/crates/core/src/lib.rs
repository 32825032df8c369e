//! Simulation of a disinformation-driven demand attack on a power
//! distribution grid.
//!
//! A fake "discount" notification spreads over a synthetic scale-free social
//! network under modified independent-cascade or linear-threshold dynamics.
//! The resulting follow-through rate decides which households shift demand
//! (and EV charging) into the 20:00-22:00 window, and the grid side of the
//! crate measures how many homes end up disconnected once overloaded feeder
//! lines trip.
//!
//! Module map:
//!
//! * [`social_graph`]: preferential-attachment networks and stranger sampling
//! * [`profiles`]: per-participant follow/forward behaviour
//! * [`influence`]: the cascade engine and trace utilities
//! * [`grid`]: city geometry, substation partitioning and feeder trees
//! * [`load`]: hourly household and EV demand
//! * [`power`]: flows, overload trips and blackout fractions
//! * [`harness`]: experiment configuration, sweeps and CSV output

pub mod error;
pub mod grid;
pub mod harness;
pub mod histogram;
pub mod influence;
pub mod load;
pub mod power;
pub mod profiles;
pub mod seed;
pub mod social_graph;

pub use error::{Error, Result};
