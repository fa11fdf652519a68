//! Junction-level platoon coordination for connected vehicles.
//!
//! The crate is `no_std` (it needs `alloc`) and contains every numerical piece
//! of the system: the road-network model, vehicle and flow physics, Poisson
//! demand, the threshold merge policy and its solver, polynomial cost-to-go
//! approximation, adaptive travel-time tables and a deterministic mesoscopic
//! discrete-event simulator. File formats, the command line and experiment
//! sweeps live in the `platoon-cli` crate.

#![no_std]
#![forbid(unsafe_code)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod arrivals;
pub mod dynamics;
pub mod lsq;
mod math;
pub mod micro;
pub mod network;
pub mod platoon;
pub mod quadrature;
pub mod routing;
pub mod sim;
pub mod threshold;
pub mod value_approx;

pub use arrivals::{HeadwayHistory, PoissonSource};
pub use dynamics::{CostWeights, FuelModel, GreenshieldModel, IdmParams, PlatoonParams};
pub use network::{EdgeId, RoadNetwork, VertexId};
pub use routing::TravelTimeTable;
pub use sim::{MetricsReport, PolicyKind, Scenario};
pub use threshold::{PolicyParams, ThresholdSolution};
