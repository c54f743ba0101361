use std::collections::{BTreeMap, BTreeSet};

use super::TransformError;
use crate::analysis::{check_sanitized, module_resources, replication_headroom};
use crate::ir::{GraphIndex, OlympusModule, Op, ParamType};
use crate::layout::Layout;
use crate::platform::Platform;

/// Bus widening.
///
/// Each kernel whose memory-facing `stream`/`small` channels are narrower
/// than the bus becomes a super-node of `L` lane instances, where `L` is the
/// smallest `floor(bus / width)` over those channels. The channels are
/// widened to `L x width` bits with depth `ceil(depth / L)`, and their
/// layouts become `L` side-by-side lanes. If the result would exceed the
/// utilization limit, every `L` is capped at the largest value that fits.
pub fn widen_bus(
    m: &OlympusModule,
    p: &Platform,
    bus_width: u32,
) -> Result<OlympusModule, TransformError> {
    if bus_width == 0 {
        return Err(TransformError::ZeroBus);
    }
    let index = GraphIndex::build(m);
    check_sanitized(m, &index)?;
    if m.kernels().any(|k| k.group.is_some()) {
        return Err(TransformError::AlreadyWidened);
    }

    // kernel op index -> lane count; channel op index -> owning kernel
    let mut lanes: BTreeMap<usize, u32> = BTreeMap::new();
    let mut widened: BTreeMap<usize, usize> = BTreeMap::new();
    for (i, op) in m.ops.iter().enumerate() {
        let Op::Channel(c) = op else { continue };
        if c.param_type == ParamType::Complex {
            continue;
        }
        let info = &index.channels[&c.result];
        if !info.is_memory_facing() {
            continue;
        }
        if c.element_width > bus_width {
            return Err(TransformError::ElementTooWide {
                channel: c.name.clone(),
                width: c.element_width,
                bus: bus_width,
            });
        }
        let kernel = info.kernels()[0];
        let fit = match &c.layout {
            Some(l) if l.is_single_element() => bus_width / c.element_width,
            // Already packed; leave the kernel at one lane.
            _ => 1,
        };
        let slot = lanes.entry(kernel).or_insert(u32::MAX);
        *slot = (*slot).min(fit);
        widened.insert(i, kernel);
    }

    let max_lanes = lanes.values().copied().max().unwrap_or(1);
    for cap in (1..=max_lanes).rev() {
        let candidate = build(m, &lanes, &widened, cap);
        let (k, infra) = module_resources(&candidate);
        match replication_headroom(&(k + infra), p) {
            Ok(_) => return Ok(candidate),
            Err(r) if cap == 1 => return Err(TransformError::ExceedsLimit(r)),
            Err(_) => {}
        }
    }
    let (k, infra) = module_resources(m);
    replication_headroom(&(k + infra), p).map_err(TransformError::ExceedsLimit)?;
    Ok(m.clone())
}

fn build(
    m: &OlympusModule,
    lanes: &BTreeMap<usize, u32>,
    widened: &BTreeMap<usize, usize>,
    cap: u32,
) -> OlympusModule {
    let lanes_of = |kernel: usize| lanes.get(&kernel).map_or(1, |&l| l.min(cap));
    let mut used_groups = BTreeSet::new();
    let mut ops = Vec::with_capacity(m.ops.len());
    for (i, op) in m.ops.iter().enumerate() {
        match op {
            Op::Channel(c) => {
                let l = widened.get(&i).map_or(1, |&k| lanes_of(k));
                if l <= 1 {
                    ops.push(op.clone());
                    continue;
                }
                let mut c = c.clone();
                let depth = c.depth.div_ceil(l as u64);
                c.layout = Some(Layout::lanes(&c.name, c.element_width, l, depth));
                c.element_width *= l;
                c.valid = Some(c.depth);
                c.depth = depth;
                ops.push(Op::Channel(c));
            }
            Op::Kernel(k) => {
                let l = lanes_of(i);
                if l <= 1 {
                    ops.push(op.clone());
                    continue;
                }
                let mut group = format!("{}_x{l}", k.callee);
                let mut n = 1;
                while !used_groups.insert(group.clone()) {
                    group = format!("{}_x{l}_{n}", k.callee);
                    n += 1;
                }
                for lane in 0..l {
                    let mut inst = k.clone();
                    inst.group = Some(group.clone());
                    inst.lane = Some(lane);
                    ops.push(Op::Kernel(inst));
                }
            }
            Op::Pc(_) => ops.push(op.clone()),
        }
    }
    OlympusModule::new(ops)
}
