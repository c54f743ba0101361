//! The Olympus dataflow-graph IR.
//!
//! A module is a flat list of three operation kinds:
//!
//! * `olympus.make_channel` defines a channel value (an edge of the DFG),
//! * `olympus.kernel` consumes and produces channel values (a node),
//! * `olympus.pc` terminates a channel at an off-chip memory pseudo-channel.
//!
//! Kernels only ever reference channels, so the graph is bipartite by
//! construction.

mod graph;
mod parse;
mod print;
mod verify;

use std::fmt;

use serde::Serialize;

use crate::layout::Layout;
use crate::resources::ResourceVector;

pub use graph::{ChannelInfo, ConsumerKey, GraphIndex};
pub use parse::{parse_module, parse_module_with_lines, ParseError, ParsedModule};
pub use print::print_module;
pub use verify::{verify_module, Diagnostic, Rule};

/// SSA value identifier, printed as `%N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct ValueId(pub u32);

impl fmt::Display for ValueId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "%{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamType {
    /// In-order, statically sized elements; `depth` is the channel depth.
    Stream,
    /// Random access, at most a few hundred kB; `depth` is the element count.
    Small,
    /// Arbitrary access; `depth` is the byte count.
    Complex,
}

impl ParamType {
    pub fn as_str(self) -> &'static str {
        match self {
            ParamType::Stream => "stream",
            ParamType::Small => "small",
            ParamType::Complex => "complex",
        }
    }

    pub fn parse(s: &str) -> Option<ParamType> {
        match s {
            "stream" => Some(ParamType::Stream),
            "small" => Some(ParamType::Small),
            "complex" => Some(ParamType::Complex),
            _ => None,
        }
    }
}

impl fmt::Display for ParamType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Memory to kernel.
    Read,
    /// Kernel to memory.
    Write,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Read => "read",
            Direction::Write => "write",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ChannelOp {
    pub result: ValueId,
    pub name: String,
    pub element_width: u32,
    pub param_type: ParamType,
    pub depth: u64,
    pub layout: Option<Layout>,
    /// Number of meaningful elements when `depth` was rounded up by widening.
    pub valid: Option<u64>,
    /// Shared PLM instance, set by PLM sharing on `small` channels.
    pub plm_instance: Option<u32>,
}

impl ChannelOp {
    pub fn new(
        result: ValueId,
        name: impl Into<String>,
        element_width: u32,
        param_type: ParamType,
        depth: u64,
    ) -> Self {
        ChannelOp {
            result,
            name: name.into(),
            element_width,
            param_type,
            depth,
            layout: None,
            valid: None,
            plm_instance: None,
        }
    }

    /// Payload size in bits.
    pub fn total_bits(&self) -> u64 {
        match self.param_type {
            ParamType::Complex => self.depth * 8,
            _ => self.depth * self.element_width as u64,
        }
    }

    pub fn size_bytes(&self) -> u64 {
        self.total_bits().div_ceil(8)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct KernelOp {
    pub callee: String,
    pub latency: u64,
    pub ii: u64,
    pub resources: ResourceVector,
    /// Inputs followed by outputs, split by `segment_sizes`.
    pub operands: Vec<ValueId>,
    pub segment_sizes: [u32; 2],
    /// Super-node name shared by the lane instances of a widened kernel.
    pub group: Option<String>,
    pub lane: Option<u32>,
    pub replica_index: Option<u32>,
}

impl KernelOp {
    pub fn new(
        callee: impl Into<String>,
        latency: u64,
        ii: u64,
        resources: ResourceVector,
        inputs: Vec<ValueId>,
        outputs: Vec<ValueId>,
    ) -> Self {
        let segment_sizes = [inputs.len() as u32, outputs.len() as u32];
        let mut operands = inputs;
        operands.extend(outputs);
        KernelOp {
            callee: callee.into(),
            latency,
            ii,
            resources,
            operands,
            segment_sizes,
            group: None,
            lane: None,
            replica_index: None,
        }
    }

    fn split(&self) -> usize {
        (self.segment_sizes[0] as usize).min(self.operands.len())
    }

    pub fn inputs(&self) -> &[ValueId] {
        &self.operands[..self.split()]
    }

    pub fn outputs(&self) -> &[ValueId] {
        &self.operands[self.split()..]
    }

    /// Name of the hardware instance: the super-node for lanes, else the callee.
    pub fn instance_name(&self) -> &str {
        self.group.as_deref().unwrap_or(&self.callee)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PcOp {
    pub channel: ValueId,
    pub id: u32,
    pub direction: Direction,
    /// Memory class; `None` means the platform's default class.
    pub class: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Op {
    Channel(ChannelOp),
    Kernel(KernelOp),
    Pc(PcOp),
}

impl Op {
    pub fn name(&self) -> &'static str {
        match self {
            Op::Channel(_) => "olympus.make_channel",
            Op::Kernel(_) => "olympus.kernel",
            Op::Pc(_) => "olympus.pc",
        }
    }

    /// Short human-readable label used in diagnostics.
    pub fn label(&self) -> String {
        match self {
            Op::Channel(c) => format!("channel `{}` ({})", c.name, c.result),
            Op::Kernel(k) => format!("kernel `{}`", k.callee),
            Op::Pc(p) => format!("pc on {}", p.channel),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct OlympusModule {
    pub ops: Vec<Op>,
}

impl OlympusModule {
    pub fn new(ops: Vec<Op>) -> Self {
        OlympusModule { ops }
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn channels(&self) -> impl Iterator<Item = &ChannelOp> {
        self.ops.iter().filter_map(|op| match op {
            Op::Channel(c) => Some(c),
            _ => None,
        })
    }

    pub fn kernels(&self) -> impl Iterator<Item = &KernelOp> {
        self.ops.iter().filter_map(|op| match op {
            Op::Kernel(k) => Some(k),
            _ => None,
        })
    }

    pub fn pcs(&self) -> impl Iterator<Item = &PcOp> {
        self.ops.iter().filter_map(|op| match op {
            Op::Pc(p) => Some(p),
            _ => None,
        })
    }

    pub fn pcs_mut(&mut self) -> impl Iterator<Item = &mut PcOp> {
        self.ops.iter_mut().filter_map(|op| match op {
            Op::Pc(p) => Some(p),
            _ => None,
        })
    }

    pub fn channel(&self, id: ValueId) -> Option<&ChannelOp> {
        self.channels().find(|c| c.result == id)
    }

    pub fn channel_by_name(&self, name: &str) -> Option<&ChannelOp> {
        self.channels().find(|c| c.name == name)
    }

    /// A value id not used by any channel in the module.
    pub fn next_value_id(&self) -> ValueId {
        ValueId(self.channels().map(|c| c.result.0 + 1).max().unwrap_or(0))
    }
}

impl fmt::Display for OlympusModule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print_module(self))
    }
}
