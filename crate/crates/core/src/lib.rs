//! Optimal-path chaos diagnostics for a qubit continuously monitored along
//! σx and σz, with the σz measurement strength periodically kicked.

pub mod chaos;
pub mod error;
pub mod integrator;
pub mod kicklimit;
pub mod manifold;
pub mod model;
pub mod quad;
pub mod sqt;

pub use error::{Error, Result};
pub use integrator::{FlowEnd, IntegratorConfig, Method, OpPath, PathStatus};
pub use model::{MeasurementSchedule, PhasePoint, Readouts};
