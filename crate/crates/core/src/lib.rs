pub mod baselines;
pub mod costs;
pub mod error;
pub mod harness;
pub mod human_motion;
pub mod kinematics;
pub mod metrics;
pub mod optimizer;
pub mod report;
pub mod scenario;

pub use error::{Error, Result};
