//! Structural DFG transformations.

mod reassign;
mod replicate;
mod widen;

use thiserror::Error;

use crate::analysis::AnalysisError;
use crate::platform::PlatformError;
use crate::resources::Resource;

pub use reassign::{plan_reassignment, reassign_channels, ReassignmentPlan};
pub use replicate::{max_replication_factor, replicate, ReplicationFactor};
pub use widen::widen_bus;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransformError {
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Platform(#[from] PlatformError),
    #[error("design already exceeds the utilization limit on {0}")]
    ExceedsLimit(Resource),
    #[error("replication factor must be at least 1")]
    ZeroFactor,
    #[error("replication factor {factor} exceeds the resource limit (max {max})")]
    FactorTooLarge { factor: u64, max: u64 },
    #[error("module is already replicated")]
    AlreadyReplicated,
    #[error("module is already widened")]
    AlreadyWidened,
    #[error("channel `{channel}` is {width} bits wide, more than the {bus}-bit bus")]
    ElementTooWide {
        channel: String,
        width: u32,
        bus: u32,
    },
    #[error("bus width must be at least 1")]
    ZeroBus,
}
