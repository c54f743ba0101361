use std::collections::BTreeMap;

use serde::Serialize;

use super::{pc_target, side_instances, EmitError, EmitOptions};
use crate::analysis::{check_sanitized, plm_estimate};
use crate::ir::{Direction, GraphIndex, OlympusModule, ParamType};
use crate::iris::{adapter_spec, AdapterSpec};
use crate::platform::Platform;
use crate::plm::{port_count, LifetimeSpec};
use crate::resources::ResourceVector;

pub const BUILD_PLAN_VERSION: u32 = 1;

pub const BRIDGE_NAME: &str = "olympus_bridge";

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Fifo {
    pub name: String,
    pub width: u32,
    pub depth: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub valid: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PlmEntry {
    pub instance: String,
    pub id: u32,
    pub size_bytes: u64,
    pub members: Vec<String>,
    pub ports: u32,
    pub estimate: ResourceVector,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AdapterEntry {
    pub channel: String,
    /// `unpack` for memory-to-kernel channels, `pack` for kernel-to-memory.
    pub kind: &'static str,
    pub layout: String,
    pub spec: AdapterSpec,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AxiPort {
    pub kernel: String,
    pub channel: String,
    pub class: Option<String>,
    pub pc_id: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PortMapEntry {
    pub kernel: String,
    pub interface: String,
    pub class: String,
    pub pc_id: u32,
}

/// The single glue module instantiated next to the kernels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Bridge {
    pub name: String,
    pub fifos: Vec<String>,
    pub plms: Vec<String>,
    pub adapters: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BuildPlan {
    pub version: u32,
    pub fifos: Vec<Fifo>,
    pub plms: Vec<PlmEntry>,
    pub adapters: Vec<AdapterEntry>,
    pub axi_ports: Vec<AxiPort>,
    pub port_map: Vec<PortMapEntry>,
    pub bridge: Bridge,
    pub kernel_sources: Vec<String>,
}

/// Stream channels become FIFOs, small channels PLM instances (one each
/// unless a `plm_instance` groups them) and complex channels AXI ports.
/// Channels with packed or laned layouts also get an adapter.
pub fn build_plan(
    m: &OlympusModule,
    p: &Platform,
    lifetimes: Option<&LifetimeSpec>,
    options: &EmitOptions,
) -> Result<BuildPlan, EmitError> {
    let index = GraphIndex::build(m);
    check_sanitized(m, &index)?;
    let empty = LifetimeSpec::default();
    let lifetimes = lifetimes.unwrap_or(&empty);

    let mut fifos = Vec::new();
    let mut adapters = Vec::new();
    let mut axi_ports = Vec::new();
    let mut shared: BTreeMap<u32, Vec<&crate::ir::ChannelOp>> = BTreeMap::new();
    let mut unshared = Vec::new();
    for c in m.channels() {
        let info = &index.channels[&c.result];
        match c.param_type {
            ParamType::Stream => fifos.push(Fifo {
                name: c.name.clone(),
                width: c.element_width,
                depth: c.depth,
                valid: c.valid,
            }),
            ParamType::Small => match c.plm_instance {
                Some(i) => shared.entry(i).or_default().push(c),
                None => unshared.push(c),
            },
            ParamType::Complex => {
                let pc = info.pcs.first().and_then(|&i| match &m.ops[i] {
                    crate::ir::Op::Pc(pc) => Some(pc),
                    _ => None,
                });
                let class = match pc {
                    Some(pc) => Some(pc_target(m, pc, p)?.name.clone()),
                    None => None,
                };
                axi_ports.push(AxiPort {
                    kernel: side_instances(m, info.kernels())
                        .into_iter()
                        .next()
                        .unwrap_or_default(),
                    channel: c.name.clone(),
                    class,
                    pc_id: pc.map(|pc| pc.id),
                });
            }
        }
        if let Some(layout) = c.layout.as_ref().filter(|l| !l.is_single_element()) {
            adapters.push(AdapterEntry {
                channel: c.name.clone(),
                kind: match info.direction() {
                    Some(Direction::Write) => "pack",
                    _ => "unpack",
                },
                layout: layout.to_string(),
                spec: adapter_spec(layout),
            });
        }
    }

    let first_free = shared.keys().next_back().map_or(0, |&i| i + 1);
    let mut groups: Vec<(u32, Vec<&crate::ir::ChannelOp>)> = shared.into_iter().collect();
    groups.extend((first_free..).zip(unshared.into_iter().map(|c| vec![c])));
    let plms = groups
        .into_iter()
        .map(|(id, members)| {
            let names: Vec<String> = members.iter().map(|c| c.name.clone()).collect();
            PlmEntry {
                instance: format!("plm{id}"),
                id,
                size_bytes: members.iter().map(|c| c.size_bytes()).max().unwrap_or(0),
                ports: port_count(&names, lifetimes),
                members: names,
                estimate: members
                    .iter()
                    .map(|c| plm_estimate(c.element_width, c.depth))
                    .fold(ResourceVector::ZERO, |a, b| a.max(&b)),
            }
        })
        .collect::<Vec<_>>();

    let mut port_map = Vec::new();
    for pc in m.pcs() {
        let class = pc_target(m, pc, p)?;
        let (Some(c), Some(info)) = (m.channel(pc.channel), index.info(pc.channel)) else {
            continue;
        };
        for kernel in side_instances(m, info.kernels()) {
            port_map.push(PortMapEntry {
                kernel,
                interface: format!("{}{}", options.interface_prefix, c.name),
                class: class.name.clone(),
                pc_id: pc.id,
            });
        }
    }
    port_map.sort_by(|a, b| (&a.kernel, &a.interface).cmp(&(&b.kernel, &b.interface)));

    let bridge = Bridge {
        name: BRIDGE_NAME.into(),
        fifos: fifos.iter().map(|f| f.name.clone()).collect(),
        plms: plms.iter().map(|p| p.instance.clone()).collect(),
        adapters: adapters.iter().map(|a| a.channel.clone()).collect(),
    };
    Ok(BuildPlan {
        version: BUILD_PLAN_VERSION,
        fifos,
        plms,
        adapters,
        axi_ports,
        port_map,
        bridge,
        kernel_sources: options.kernel_sources.clone(),
    })
}

pub fn emit_build_plan(
    m: &OlympusModule,
    p: &Platform,
    lifetimes: Option<&LifetimeSpec>,
    options: &EmitOptions,
) -> Result<String, EmitError> {
    let plan = build_plan(m, p, lifetimes, options)?;
    let mut text = serde_json::to_string_pretty(&plan).expect("plan serializes");
    text.push('\n');
    Ok(text)
}
