//! Bandwidth and resource analyses.
//!
//! Bandwidth model: a memory-facing channel carries one layout pattern per
//! `k` kernel iterations, and its kernel starts an iteration every `ii`
//! cycles, so its demand is `useful_bits_per_pattern / (k * ii)` bits per
//! cycle. A pseudo-channel supplies `width` bits per cycle. `complex`
//! channels have no known access pattern and contribute no demand; they only
//! occupy their PC.
//!
//! Resource model: kernel estimates from the IR, plus one FIFO per `stream`
//! channel and one PLM per `small` channel (or per shared PLM instance), both
//! sized in 36Kb BRAM blocks of 36 x 1024 bits.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::ir::{ChannelOp, GraphIndex, OlympusModule, Op, ParamType};
use crate::platform::{Platform, PlatformError};
use crate::resources::{Resource, ResourceVector};

const BRAM_WIDTH: u64 = 36;
const BRAM_DEPTH: u64 = 1024;
const FIFO_CONTROL_LUT: u64 = 50;
const FIFO_CONTROL_FF: u64 = 50;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AnalysisError {
    #[error("channel `{0}` has not been sanitized (missing layout or pc node)")]
    Unsanitized(String),
    #[error("pc id {id} on channel `{channel}` is out of range for {class} ({count} channels)")]
    PcOutOfRange {
        channel: String,
        class: String,
        id: u32,
        count: u32,
    },
    #[error(transparent)]
    Platform(#[from] PlatformError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PcUsage {
    pub class: String,
    pub id: u32,
    pub channels: Vec<String>,
    pub demand_bits_per_cycle: f64,
    pub capacity_bits_per_cycle: f64,
    pub utilization: f64,
    pub oversubscribed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandwidthReport {
    /// Used pseudo-channels, ordered by class (platform order) then id.
    pub per_pc: Vec<PcUsage>,
    pub total_demand_bits_per_cycle: f64,
    /// Total demand over the capacity of the PCs in use.
    pub aggregate_utilization: f64,
    /// Total demand over the capacity of every PC of the classes in use.
    pub device_utilization: f64,
    pub max_utilization: f64,
    pub layout_efficiency: BTreeMap<String, f64>,
}

impl BandwidthReport {
    pub fn usage(&self, class: &str, id: u32) -> Option<&PcUsage> {
        self.per_pc.iter().find(|u| u.class == class && u.id == id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResourceReport {
    pub totals: ResourceVector,
    pub kernels: ResourceVector,
    pub infrastructure: ResourceVector,
    pub utilization: BTreeMap<Resource, f64>,
    /// Resource with the highest utilization; `None` when nothing is used.
    pub bottleneck: Option<Resource>,
    /// Largest r with r x totals within the limit; 0 when the design does
    /// not fit at all.
    pub headroom_factor: u64,
}

/// BRAM blocks, control LUTs and FFs for a FIFO of `depth` elements.
pub fn fifo_estimate(width: u32, depth: u64) -> ResourceVector {
    ResourceVector {
        ff: FIFO_CONTROL_FF,
        lut: FIFO_CONTROL_LUT,
        bram: bram_blocks(width, depth),
        uram: 0,
        dsp: 0,
    }
}

/// BRAM blocks for a private local memory of `depth` elements.
pub fn plm_estimate(width: u32, depth: u64) -> ResourceVector {
    ResourceVector {
        bram: bram_blocks(width, depth),
        ..ResourceVector::ZERO
    }
}

fn bram_blocks(width: u32, depth: u64) -> u64 {
    (width as u64).div_ceil(BRAM_WIDTH) * depth.div_ceil(BRAM_DEPTH)
}

/// On-chip cost of one channel, ignoring PLM sharing.
pub fn channel_estimate(c: &ChannelOp) -> ResourceVector {
    match c.param_type {
        ParamType::Stream => fifo_estimate(c.element_width, c.depth),
        ParamType::Small => plm_estimate(c.element_width, c.depth),
        ParamType::Complex => ResourceVector::ZERO,
    }
}

/// Demand of one channel in bits per cycle. Needs a layout.
pub fn channel_demand(m: &OlympusModule, index: &GraphIndex, c: &ChannelOp) -> f64 {
    if c.param_type == ParamType::Complex {
        return 0.0;
    }
    let (Some(layout), Some(kernel)) = (&c.layout, index.rate_kernel(m, c.result)) else {
        return 0.0;
    };
    layout.useful_bits_per_pattern() as f64 / (layout.k as u64 * kernel.ii) as f64
}

/// Every channel has a layout and every memory-facing channel has a PC node.
pub fn check_sanitized(m: &OlympusModule, index: &GraphIndex) -> Result<(), AnalysisError> {
    for c in m.channels() {
        let info = &index.channels[&c.result];
        if c.layout.is_none() || (info.is_memory_facing() && info.pcs.is_empty()) {
            return Err(AnalysisError::Unsanitized(c.name.clone()));
        }
    }
    Ok(())
}

pub fn bandwidth_analysis(
    m: &OlympusModule,
    p: &Platform,
) -> Result<BandwidthReport, AnalysisError> {
    let index = GraphIndex::build(m);
    check_sanitized(m, &index)?;
    let layout_efficiency = m
        .channels()
        .filter_map(|c| Some((c.name.clone(), c.layout.as_ref()?.efficiency())))
        .collect();

    // (class position, id) -> usage
    let mut rows: BTreeMap<(usize, u32), PcUsage> = BTreeMap::new();
    for op in &m.ops {
        let Op::Pc(pc) = op else { continue };
        let Some(c) = m.channel(pc.channel) else {
            continue;
        };
        let class = p.resolve_class(pc.class.as_deref())?;
        if pc.id >= class.count {
            return Err(AnalysisError::PcOutOfRange {
                channel: c.name.clone(),
                class: class.name.clone(),
                id: pc.id,
                count: class.count,
            });
        }
        let pos = p.memory.iter().position(|k| k.name == class.name).unwrap();
        let row = rows.entry((pos, pc.id)).or_insert_with(|| PcUsage {
            class: class.name.clone(),
            id: pc.id,
            channels: Vec::new(),
            demand_bits_per_cycle: 0.0,
            capacity_bits_per_cycle: class.width as f64,
            utilization: 0.0,
            oversubscribed: false,
        });
        row.channels.push(c.name.clone());
        row.demand_bits_per_cycle += channel_demand(m, &index, c);
    }

    let mut per_pc: Vec<PcUsage> = rows.into_values().collect();
    let mut total = 0.0;
    let mut used_capacity = 0.0;
    let mut max_utilization: f64 = 0.0;
    for row in &mut per_pc {
        row.utilization = row.demand_bits_per_cycle / row.capacity_bits_per_cycle;
        row.oversubscribed = row.demand_bits_per_cycle > row.capacity_bits_per_cycle;
        total += row.demand_bits_per_cycle;
        used_capacity += row.capacity_bits_per_cycle;
        max_utilization = max_utilization.max(row.utilization);
    }
    let mut classes: Vec<&str> = per_pc.iter().map(|r| r.class.as_str()).collect();
    classes.dedup();
    let device_capacity: f64 = classes
        .iter()
        .map(|name| {
            let c = p.class(name).expect("class resolved above");
            c.count as f64 * c.width as f64
        })
        .sum();

    Ok(BandwidthReport {
        per_pc,
        total_demand_bits_per_cycle: total,
        aggregate_utilization: ratio(total, used_capacity),
        device_utilization: ratio(total, device_capacity),
        max_utilization,
        layout_efficiency,
    })
}

fn ratio(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        0.0
    } else {
        a / b
    }
}

/// Kernel totals plus FIFO/PLM infrastructure, honoring shared PLM instances.
pub fn module_resources(m: &OlympusModule) -> (ResourceVector, ResourceVector) {
    let kernels: ResourceVector = m.kernels().map(|k| k.resources).sum();
    let mut infrastructure = ResourceVector::ZERO;
    let mut instances: BTreeMap<u32, ResourceVector> = BTreeMap::new();
    for c in m.channels() {
        let est = channel_estimate(c);
        match (c.param_type, c.plm_instance) {
            (ParamType::Small, Some(inst)) => {
                let slot = instances.entry(inst).or_default();
                *slot = slot.max(&est);
            }
            _ => infrastructure += est,
        }
    }
    infrastructure += instances.into_values().sum();
    (kernels, infrastructure)
}

const FIT_TOLERANCE: f64 = 1e-12;

fn fits(amount: u64, budget: f64) -> bool {
    amount as f64 <= budget * (1.0 + FIT_TOLERANCE)
}

/// Largest r >= 1 with r x totals within `limit x available`.
/// `Err` names the first resource already over budget at r = 1.
pub fn replication_headroom(totals: &ResourceVector, p: &Platform) -> Result<u64, Resource> {
    let mut best: Option<u64> = None;
    for r in Resource::ALL {
        let amount = totals.get(r);
        let budget = p.resource_budget(r);
        if amount == 0 {
            continue;
        }
        if !fits(amount, budget) {
            return Err(r);
        }
        let mut n = (budget / amount as f64).floor() as u64;
        while fits((n + 1) * amount, budget) {
            n += 1;
        }
        while n > 1 && !fits(n * amount, budget) {
            n -= 1;
        }
        best = Some(best.map_or(n, |b| b.min(n)));
    }
    Ok(best.unwrap_or(1).max(1))
}

pub fn resource_analysis(m: &OlympusModule, p: &Platform) -> ResourceReport {
    let (kernels, infrastructure) = module_resources(m);
    let totals = kernels + infrastructure;
    let mut utilization = BTreeMap::new();
    let mut bottleneck: Option<(Resource, f64)> = None;
    for r in Resource::ALL {
        let available = p.resources.get(r);
        let used = totals.get(r);
        let frac = if available == 0 {
            if used == 0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            used as f64 / available as f64
        };
        utilization.insert(r, frac);
        if frac > 0.0 && bottleneck.is_none_or(|(_, best)| frac > best) {
            bottleneck = Some((r, frac));
        }
    }
    ResourceReport {
        totals,
        kernels,
        infrastructure,
        utilization,
        bottleneck: bottleneck.map(|(r, _)| r),
        headroom_factor: replication_headroom(&totals, p).unwrap_or(0),
    }
}
