use std::collections::BTreeMap;

use super::{Direction, KernelOp, OlympusModule, Op, ValueId};

/// Identity of a DFG node. Lane instances of a widened kernel share their
/// group and count as one node.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ConsumerKey {
    Group(String),
    Kernel(usize),
}

impl ConsumerKey {
    pub fn of(op_index: usize, k: &KernelOp) -> ConsumerKey {
        match &k.group {
            Some(g) => ConsumerKey::Group(g.clone()),
            None => ConsumerKey::Kernel(op_index),
        }
    }
}

/// Connectivity of one channel value.
#[derive(Debug, Clone, Default)]
pub struct ChannelInfo {
    /// Index of the defining `make_channel` op (first one if duplicated).
    pub def: Option<usize>,
    pub defs: usize,
    /// Kernel op indices reading the channel.
    pub consumers: Vec<usize>,
    /// Kernel op indices writing the channel.
    pub producers: Vec<usize>,
    pub pcs: Vec<usize>,
}

impl ChannelInfo {
    /// Memory-facing channels have kernels on exactly one side.
    pub fn direction(&self) -> Option<Direction> {
        match (self.consumers.is_empty(), self.producers.is_empty()) {
            (false, true) => Some(Direction::Read),
            (true, false) => Some(Direction::Write),
            _ => None,
        }
    }

    pub fn is_memory_facing(&self) -> bool {
        self.direction().is_some()
    }

    /// Kernel ops on the memory-facing side (all lanes of a super-node).
    pub fn kernels(&self) -> &[usize] {
        if self.consumers.is_empty() {
            &self.producers
        } else {
            &self.consumers
        }
    }
}

/// Use-def index over a module.
#[derive(Debug, Clone, Default)]
pub struct GraphIndex {
    pub channels: BTreeMap<ValueId, ChannelInfo>,
}

impl GraphIndex {
    pub fn build(m: &OlympusModule) -> GraphIndex {
        let mut channels: BTreeMap<ValueId, ChannelInfo> = BTreeMap::new();
        for (i, op) in m.ops.iter().enumerate() {
            match op {
                Op::Channel(c) => {
                    let info = channels.entry(c.result).or_default();
                    info.defs += 1;
                    info.def.get_or_insert(i);
                }
                Op::Kernel(k) => {
                    for v in k.inputs() {
                        channels.entry(*v).or_default().consumers.push(i);
                    }
                    for v in k.outputs() {
                        channels.entry(*v).or_default().producers.push(i);
                    }
                }
                Op::Pc(p) => channels.entry(p.channel).or_default().pcs.push(i),
            }
        }
        GraphIndex { channels }
    }

    pub fn info(&self, v: ValueId) -> Option<&ChannelInfo> {
        self.channels.get(&v)
    }

    /// Distinct DFG nodes among a list of kernel op indices.
    pub fn distinct_nodes(m: &OlympusModule, kernels: &[usize]) -> Vec<ConsumerKey> {
        let mut keys: Vec<ConsumerKey> = kernels
            .iter()
            .filter_map(|&i| match &m.ops[i] {
                Op::Kernel(k) => Some(ConsumerKey::of(i, k)),
                _ => None,
            })
            .collect();
        keys.sort();
        keys.dedup();
        keys
    }

    /// The kernel that sets the rate of a memory-facing channel: the first
    /// instance on its kernel side.
    pub fn rate_kernel<'m>(&self, m: &'m OlympusModule, v: ValueId) -> Option<&'m KernelOp> {
        let info = self.channels.get(&v)?;
        info.kernels().first().and_then(|&i| match &m.ops[i] {
            Op::Kernel(k) => Some(k),
            _ => None,
        })
    }
}
