//! Gradient flows on varying Hilbert spaces: minimizing movements, connecting
//! operators and Mosco-type convergence diagnostics.

pub mod connect;
pub mod energies;
pub mod error;
pub mod experiments;
pub mod flow;
pub mod numerics;
pub mod profiles;
pub mod prox;
pub mod simplex;
pub mod space;

pub use connect::LinearConnector;
pub use energies::{Boundary, Energy, EnergySpec, EnergyValue, ThinSlab};
pub use error::{Error, Result};
pub use flow::{minimizing_movements, FlowRunSpec, Trajectory};
pub use profiles::Profile;
pub use prox::{prox, ProxCertificate, ProxMethod, ProxOptions, ProxSolver, WarmStart};
pub use simplex::TorusGrid;
pub use space::{inner, norm, StateVector, WeightedSpace};
