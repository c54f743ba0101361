use std::collections::HashMap;

use super::TransformError;
use crate::analysis::{check_sanitized, module_resources, replication_headroom};
use crate::ir::{GraphIndex, OlympusModule, Op, ValueId};
use crate::layout::Layout;
use crate::platform::Platform;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReplicationFactor {
    /// As many copies as the utilization limit allows, optionally capped.
    Max {
        cap: Option<u64>,
    },
    Exact(u64),
}

/// Largest r >= 1 such that r copies of the whole DFG stay within the
/// platform's utilization limit. A module with no resource use gives 1.
pub fn max_replication_factor(m: &OlympusModule, p: &Platform) -> Result<u64, TransformError> {
    let (kernels, infra) = module_resources(m);
    replication_headroom(&(kernels + infra), p).map_err(TransformError::ExceedsLimit)
}

fn suffixed(name: &str, k: u64) -> String {
    format!("{name}_r{k}")
}

/// `a` -> `a_r1`, `a#2` -> `a_r1#2`.
fn suffixed_array(name: &str, k: u64) -> String {
    match name.split_once('#') {
        Some((base, lane)) => format!("{}#{lane}", suffixed(base, k)),
        None => suffixed(name, k),
    }
}

fn rename_layout(l: &Layout, k: u64) -> Layout {
    let mut out = l.clone();
    for p in &mut out.placements {
        p.array = suffixed_array(&p.array, k);
    }
    out
}

/// Copies the entire DFG. Copy 0 keeps the original names; copy k >= 1 gets
/// fresh value ids and `_r<k>` suffixes on channel names, callees and
/// groups. PC ops of every copy keep the original PC ids.
pub fn replicate(
    m: &OlympusModule,
    p: &Platform,
    factor: ReplicationFactor,
) -> Result<OlympusModule, TransformError> {
    check_sanitized(m, &GraphIndex::build(m))?;
    if m.kernels().any(|k| k.replica_index.is_some()) {
        return Err(TransformError::AlreadyReplicated);
    }
    let max = max_replication_factor(m, p)?;
    let r = match factor {
        ReplicationFactor::Exact(0) => return Err(TransformError::ZeroFactor),
        ReplicationFactor::Exact(f) if f > max => {
            return Err(TransformError::FactorTooLarge { factor: f, max })
        }
        ReplicationFactor::Exact(f) => f,
        ReplicationFactor::Max { cap: Some(0) } => return Err(TransformError::ZeroFactor),
        ReplicationFactor::Max { cap } => cap.map_or(max, |c| c.min(max)),
    };

    let base_id = m.next_value_id().0 as u64;
    let plm_stride = m
        .channels()
        .filter_map(|c| c.plm_instance)
        .max()
        .map_or(0, |i| i as u64 + 1);
    let mut ops = Vec::with_capacity(m.ops.len() * r as usize);
    for op in &m.ops {
        let mut op = op.clone();
        if let Op::Kernel(k) = &mut op {
            k.replica_index = Some(0);
        }
        ops.push(op);
    }
    for copy in 1..r {
        let remap: HashMap<ValueId, ValueId> = m
            .channels()
            .map(|c| {
                let id = base_id * copy + c.result.0 as u64;
                (c.result, ValueId(id as u32))
            })
            .collect();
        for op in &m.ops {
            let op = match op {
                Op::Channel(c) => {
                    let mut c = c.clone();
                    c.result = remap[&c.result];
                    c.name = suffixed(&c.name, copy);
                    c.layout = c.layout.as_ref().map(|l| rename_layout(l, copy));
                    c.plm_instance = c
                        .plm_instance
                        .map(|i| (i as u64 + copy * plm_stride) as u32);
                    Op::Channel(c)
                }
                Op::Kernel(k) => {
                    let mut k = k.clone();
                    k.callee = suffixed(&k.callee, copy);
                    k.group = k.group.as_ref().map(|g| suffixed(g, copy));
                    k.operands = k.operands.iter().map(|v| remap[v]).collect();
                    k.replica_index = Some(copy as u32);
                    Op::Kernel(k)
                }
                Op::Pc(pc) => {
                    let mut pc = pc.clone();
                    pc.channel = remap[&pc.channel];
                    Op::Pc(pc)
                }
            };
            ops.push(op);
        }
    }
    Ok(OlympusModule::new(ops))
}
