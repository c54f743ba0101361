//! Olympus: a dataflow-graph IR for FPGA system architectures, with
//! analyses and transformations that spread off-chip traffic over HBM
//! pseudo-channels, pack narrow data onto wide buses and share on-chip
//! memories, plus emitters for the vendor-tool inputs.

pub mod analysis;
pub mod emit;
pub mod ir;
pub mod iris;
pub mod layout;
pub mod pipeline;
pub mod platform;
pub mod plm;
pub mod resources;
pub mod transforms;

pub use ir::{
    parse_module, print_module, verify_module, ChannelOp, Diagnostic, Direction, KernelOp,
    OlympusModule, Op, ParamType, PcOp, ValueId,
};
pub use layout::Layout;
pub use pipeline::{run_pipeline, sanitize, Pass, PassContext, PassPipeline, PipelineReport};
pub use platform::Platform;
pub use plm::LifetimeSpec;
pub use resources::{Resource, ResourceVector};
