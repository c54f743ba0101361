//! Sharing of private local memories between `small` buffers.
//!
//! Buffers whose live intervals are disjoint can occupy the same physical
//! memory. Liveness comes from a sidecar file, one buffer per line:
//!
//! ```text
//! # name  start end  [slots]
//! a       0     10   slots=0|2
//! b       10    20   slots=1
//! ```
//!
//! Intervals are half-open, so `[0,10)` and `[10,20)` do not conflict.
//! Buffers that share a memory and have pairwise disjoint access slots also
//! share a single port.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::analysis::{channel_estimate, check_sanitized};
use crate::ir::{GraphIndex, OlympusModule, Op, ParamType};
use crate::resources::ResourceVector;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PlmError {
    #[error("lifetimes line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("buffer `{name}`: interval [{start}, {end}) is empty")]
    EmptyInterval { name: String, start: u64, end: u64 },
    #[error("buffer `{0}` listed twice")]
    Duplicate(String),
    #[error(transparent)]
    Unsanitized(#[from] crate::analysis::AnalysisError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Lifetime {
    pub start: u64,
    pub end: u64,
    /// Access slots within one iteration.
    pub slots: Option<BTreeSet<u64>>,
}

impl Lifetime {
    pub const ALWAYS: Lifetime = Lifetime {
        start: 0,
        end: u64::MAX,
        slots: None,
    };

    pub fn overlaps(&self, other: &Lifetime) -> bool {
        self.start < other.end && other.start < self.end
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct LifetimeSpec {
    pub buffers: BTreeMap<String, Lifetime>,
}

impl LifetimeSpec {
    pub fn insert(&mut self, name: impl Into<String>, lifetime: Lifetime) -> Result<(), PlmError> {
        let name = name.into();
        if lifetime.start >= lifetime.end {
            return Err(PlmError::EmptyInterval {
                name,
                start: lifetime.start,
                end: lifetime.end,
            });
        }
        if self.buffers.contains_key(&name) {
            return Err(PlmError::Duplicate(name));
        }
        self.buffers.insert(name, lifetime);
        Ok(())
    }

    pub fn parse(text: &str) -> Result<LifetimeSpec, PlmError> {
        let mut spec = LifetimeSpec::default();
        for (n, raw) in text.lines().enumerate() {
            let line = n + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let syntax = |reason: String| PlmError::Syntax { line, reason };
            let fields: Vec<&str> = content.split_whitespace().collect();
            if !(3..=4).contains(&fields.len()) {
                return Err(syntax("expected `name start end [slots=s1|s2|...]`".into()));
            }
            let num = |s: &str| {
                s.parse::<u64>()
                    .map_err(|_| syntax(format!("`{s}` is not a non-negative integer")))
            };
            let slots = match fields.get(3) {
                None => None,
                Some(f) => {
                    let list = f
                        .strip_prefix("slots=")
                        .ok_or_else(|| syntax(format!("unexpected field `{f}`")))?;
                    Some(
                        list.split('|')
                            .map(num)
                            .collect::<Result<BTreeSet<_>, _>>()?,
                    )
                }
            };
            spec.insert(
                fields[0],
                Lifetime {
                    start: num(fields[1])?,
                    end: num(fields[2])?,
                    slots,
                },
            )?;
        }
        Ok(spec)
    }

    fn lifetime(&self, name: &str) -> &Lifetime {
        self.buffers.get(name).unwrap_or(&Lifetime::ALWAYS)
    }
}

/// Undirected graph with an edge between every pair of buffers whose
/// lifetimes overlap.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConflictGraph {
    pub nodes: Vec<String>,
    pub adjacency: Vec<BTreeSet<usize>>,
}

impl ConflictGraph {
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (a, ns) in self.adjacency.iter().enumerate() {
            out.extend(ns.iter().filter(|&&b| b > a).map(|&b| (a, b)));
        }
        out
    }

    pub fn max_degree(&self) -> usize {
        self.adjacency.iter().map(BTreeSet::len).max().unwrap_or(0)
    }
}

/// Buffers missing from `lifetimes` are live forever and conflict with
/// everything.
pub fn build_conflict_graph(buffers: &[String], lifetimes: &LifetimeSpec) -> ConflictGraph {
    let n = buffers.len();
    let mut adjacency = vec![BTreeSet::new(); n];
    for a in 0..n {
        for b in a + 1..n {
            if lifetimes
                .lifetime(&buffers[a])
                .overlaps(lifetimes.lifetime(&buffers[b]))
            {
                adjacency[a].insert(b);
                adjacency[b].insert(a);
            }
        }
    }
    ConflictGraph {
        nodes: buffers.to_vec(),
        adjacency,
    }
}

/// First-fit coloring in order of interval start (then end, then name).
/// On interval graphs this uses exactly as many colors as the largest set
/// of mutually overlapping buffers.
pub fn color_buffers(graph: &ConflictGraph, lifetimes: &LifetimeSpec) -> Vec<u32> {
    let mut order: Vec<usize> = (0..graph.nodes.len()).collect();
    order.sort_by(|&a, &b| {
        let la = lifetimes.lifetime(&graph.nodes[a]);
        let lb = lifetimes.lifetime(&graph.nodes[b]);
        (la.start, la.end, &graph.nodes[a]).cmp(&(lb.start, lb.end, &graph.nodes[b]))
    });
    let mut colors: Vec<Option<u32>> = vec![None; graph.nodes.len()];
    for v in order {
        let taken: BTreeSet<u32> = graph.adjacency[v]
            .iter()
            .filter_map(|&u| colors[u])
            .collect();
        colors[v] = Some((0..).find(|c| !taken.contains(c)).unwrap());
    }
    colors.into_iter().map(Option::unwrap).collect()
}

/// One port when every member has access slots and they are pairwise
/// disjoint, otherwise one port per member.
pub fn port_count(members: &[String], lifetimes: &LifetimeSpec) -> u32 {
    let slots: Vec<Option<&BTreeSet<u64>>> = members
        .iter()
        .map(|n| lifetimes.lifetime(n).slots.as_ref())
        .collect();
    let disjoint = slots.iter().all(Option::is_some)
        && slots.iter().enumerate().all(|(a, sa)| {
            slots[a + 1..]
                .iter()
                .all(|sb| sa.unwrap().is_disjoint(sb.unwrap()))
        });
    if disjoint {
        1
    } else {
        members.len() as u32
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PlmInstance {
    pub id: u32,
    pub members: Vec<String>,
    pub size_bytes: u64,
    pub ports: u32,
    pub estimate: ResourceVector,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SharingPlan {
    pub assignment: BTreeMap<String, u32>,
    pub instances: Vec<PlmInstance>,
    pub savings: ResourceVector,
    pub warnings: Vec<String>,
}

/// Colors the conflict graph of all `small` channels and annotates each with
/// its `plm_instance`. An instance is as large as its largest member.
pub fn share_plm(
    m: &OlympusModule,
    lifetimes: &LifetimeSpec,
) -> Result<(OlympusModule, SharingPlan), PlmError> {
    check_sanitized(m, &GraphIndex::build(m))?;
    let buffers: Vec<&crate::ir::ChannelOp> = m
        .channels()
        .filter(|c| c.param_type == ParamType::Small)
        .collect();
    let names: Vec<String> = buffers.iter().map(|c| c.name.clone()).collect();
    let mut warnings: Vec<String> = names
        .iter()
        .filter(|n| !lifetimes.buffers.contains_key(*n))
        .map(|n| format!("no lifetime for buffer `{n}`; kept unshared"))
        .collect();
    for name in lifetimes.buffers.keys() {
        if !names.contains(name) {
            warnings.push(format!("lifetime given for unknown small buffer `{name}`"));
        }
    }

    let graph = build_conflict_graph(&names, lifetimes);
    let colors = color_buffers(&graph, lifetimes);

    let mut members: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, &c) in colors.iter().enumerate() {
        members.entry(c).or_default().push(i);
    }
    let mut individual = ResourceVector::ZERO;
    let mut shared = ResourceVector::ZERO;
    let mut instances = Vec::new();
    for (&id, idx) in &members {
        let mut estimate = ResourceVector::ZERO;
        let mut size_bytes = 0;
        for &i in idx {
            let est = channel_estimate(buffers[i]);
            individual += est;
            estimate = estimate.max(&est);
            size_bytes = size_bytes.max(buffers[i].size_bytes());
        }
        shared += estimate;
        let member_names: Vec<String> = idx.iter().map(|&i| names[i].clone()).collect();
        instances.push(PlmInstance {
            id,
            ports: port_count(&member_names, lifetimes),
            members: member_names,
            size_bytes,
            estimate,
        });
    }

    let assignment: BTreeMap<String, u32> = names.iter().cloned().zip(colors).collect();
    let mut out = m.clone();
    for op in &mut out.ops {
        if let Op::Channel(c) = op {
            if c.param_type == ParamType::Small {
                c.plm_instance = assignment.get(&c.name).copied();
            }
        }
    }
    Ok((
        out,
        SharingPlan {
            assignment,
            instances,
            savings: individual.saturating_sub(&shared),
            warnings,
        },
    ))
}
