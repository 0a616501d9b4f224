//! Two-stage traffic equilibrium: entropy trip distribution coupled with
//! Wardrop route assignment, solved through a convex dual in link times.
//!
//! ```no_run
//! use twostage::{demand::DemandSpec, solver, tntp};
//!
//! let net = tntp::parse_net(&std::fs::read_to_string("net.tntp")?)?;
//! let trips = tntp::parse_trips(&std::fs::read_to_string("trips.tntp")?)?;
//! let demand = DemandSpec::from_trips(&trips)?;
//! let result = solver::solve_two_stage(&net, &demand, &solver::SolverConfig::default())?;
//! println!("{} after {} iterations", result.status, result.iterations);
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

pub mod cli;
pub mod demand;
pub mod entropy;
pub mod error;
pub mod fixtures;
pub mod link_cost;
pub mod network;
pub mod selfcheck;
pub mod shortest_paths;
pub mod solver;
pub mod tables;
pub mod tntp;

pub use demand::{DemandSpec, TripTable};
pub use error::{Error, Result};
pub use link_cost::LinkParams;
pub use network::{Link, Network};
pub use solver::{EquilibriumResult, Mode, SolverConfig, Status};
