//! Back-end artifacts: port-mapping configuration, build plan, host API
//! stubs and Graphviz rendering. All emitters are deterministic.

mod api;
mod cfg;
mod dot;
mod plan;

pub use api::{emit_host_api, HostApi, HostFunction, HostFunctionKind};
pub use cfg::emit_cfg;
pub use dot::emit_dot;
pub use plan::{
    build_plan, emit_build_plan, AdapterEntry, AxiPort, Bridge, BuildPlan, Fifo, PlmEntry,
    PortMapEntry, BUILD_PLAN_VERSION,
};

use thiserror::Error;

use crate::analysis::AnalysisError;
use crate::ir::{OlympusModule, Op, PcOp};
use crate::platform::{MemoryChannelClass, Platform, PlatformError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EmitError {
    #[error(transparent)]
    Unsanitized(#[from] AnalysisError),
    #[error(transparent)]
    Platform(#[from] PlatformError),
    #[error("pc id {id} on channel `{channel}` is out of range for {class} ({count} channels)")]
    PcOutOfRange {
        channel: String,
        class: String,
        id: u32,
        count: u32,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmitOptions {
    /// Appended to kernel names in `.cfg` port references.
    pub instance_suffix: String,
    /// Prepended to channel names in `.cfg` port references.
    pub interface_prefix: String,
    /// Opaque kernel implementation paths recorded in the build plan.
    pub kernel_sources: Vec<String>,
}

impl Default for EmitOptions {
    fn default() -> Self {
        EmitOptions {
            instance_suffix: "_1".into(),
            interface_prefix: "m_axi_".into(),
            kernel_sources: Vec::new(),
        }
    }
}

/// Memory class of a PC node, checking its id against the class size.
fn pc_target<'p>(
    m: &OlympusModule,
    pc: &PcOp,
    p: &'p Platform,
) -> Result<&'p MemoryChannelClass, EmitError> {
    let class = p.resolve_class(pc.class.as_deref())?;
    if pc.id >= class.count {
        return Err(EmitError::PcOutOfRange {
            channel: m
                .channel(pc.channel)
                .map_or_else(String::new, |c| c.name.clone()),
            class: class.name.clone(),
            id: pc.id,
            count: class.count,
        });
    }
    Ok(class)
}

/// Instance names of the kernels on the memory-facing side of a channel,
/// sorted and deduplicated (lanes share one instance).
fn side_instances(m: &OlympusModule, kernels: &[usize]) -> Vec<String> {
    let mut names: Vec<String> = kernels
        .iter()
        .filter_map(|&i| match &m.ops[i] {
            Op::Kernel(k) => Some(k.instance_name().to_string()),
            _ => None,
        })
        .collect();
    names.sort();
    names.dedup();
    names
}
