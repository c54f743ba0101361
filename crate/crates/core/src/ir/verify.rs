use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use super::graph::GraphIndex;
use super::{OlympusModule, Op, ParamType};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    ChannelWidth,
    ChannelDepth,
    LayoutInvalid,
    LayoutShape,
    PlmOnNonSmall,
    DuplicateDefinition,
    UndefinedValue,
    SegmentSizes,
    KernelTiming,
    OperandOverlap,
    MultipleConsumers,
    MultipleProducers,
    MultiplePcs,
    PcBothSides,
    PcUnconnected,
    PcDirection,
    GroupMismatch,
}

impl Rule {
    pub fn as_str(self) -> &'static str {
        match self {
            Rule::ChannelWidth => "channel-width",
            Rule::ChannelDepth => "channel-depth",
            Rule::LayoutInvalid => "layout-invalid",
            Rule::LayoutShape => "layout-shape",
            Rule::PlmOnNonSmall => "plm-on-non-small",
            Rule::DuplicateDefinition => "duplicate-definition",
            Rule::UndefinedValue => "undefined-value",
            Rule::SegmentSizes => "segment-sizes",
            Rule::KernelTiming => "kernel-timing",
            Rule::OperandOverlap => "operand-overlap",
            Rule::MultipleConsumers => "multiple-consumers",
            Rule::MultipleProducers => "multiple-producers",
            Rule::MultiplePcs => "multiple-pcs",
            Rule::PcBothSides => "pc-both-sides",
            Rule::PcUnconnected => "pc-unconnected",
            Rule::PcDirection => "pc-direction",
            Rule::GroupMismatch => "group-mismatch",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub op_index: usize,
    pub op: String,
    pub rule: Rule,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "op #{} ({}): [{}] {}",
            self.op_index, self.op, self.rule, self.message
        )
    }
}

/// Structural checks. An empty result means the module is well formed.
pub fn verify_module(m: &OlympusModule) -> Vec<Diagnostic> {
    let index = GraphIndex::build(m);
    let mut diags = Vec::new();
    let mut push = |i: usize, rule: Rule, message: String| {
        diags.push(Diagnostic {
            op_index: i,
            op: m.ops[i].label(),
            rule,
            message,
        })
    };

    for (i, op) in m.ops.iter().enumerate() {
        match op {
            Op::Channel(c) => {
                if c.element_width == 0 {
                    push(
                        i,
                        Rule::ChannelWidth,
                        "element width must be at least 1".into(),
                    );
                }
                if c.depth == 0 {
                    push(i, Rule::ChannelDepth, "depth must be at least 1".into());
                }
                let info = &index.channels[&c.result];
                if info.def != Some(i) {
                    push(
                        i,
                        Rule::DuplicateDefinition,
                        format!("{} is already defined", c.result),
                    );
                }
                if let Some(l) = &c.layout {
                    if let Err(e) = l.validate() {
                        push(i, Rule::LayoutInvalid, e.to_string());
                    } else {
                        if l.bus_width != c.element_width {
                            push(
                                i,
                                Rule::LayoutShape,
                                format!(
                                    "layout word is {} bits but the channel carries i{}",
                                    l.bus_width, c.element_width
                                ),
                            );
                        }
                        if c.param_type != ParamType::Complex && l.total_words() != c.depth {
                            push(
                                i,
                                Rule::LayoutShape,
                                format!(
                                    "layout covers {} words but depth is {}",
                                    l.total_words(),
                                    c.depth
                                ),
                            );
                        }
                    }
                }
                if c.plm_instance.is_some() && c.param_type != ParamType::Small {
                    push(
                        i,
                        Rule::PlmOnNonSmall,
                        format!("plm_instance set on a {} channel", c.param_type),
                    );
                }
                let consumers = GraphIndex::distinct_nodes(m, &info.consumers);
                if consumers.len() > 1 {
                    push(
                        i,
                        Rule::MultipleConsumers,
                        format!("consumed by {} kernels", consumers.len()),
                    );
                }
                let producers = GraphIndex::distinct_nodes(m, &info.producers);
                if producers.len() > 1 {
                    push(
                        i,
                        Rule::MultipleProducers,
                        format!("produced by {} kernels", producers.len()),
                    );
                }
                if info.pcs.len() > 1 {
                    push(
                        i,
                        Rule::MultiplePcs,
                        format!("attached to {} pc ops", info.pcs.len()),
                    );
                }
            }
            Op::Kernel(k) => {
                let total = k.segment_sizes[0] as usize + k.segment_sizes[1] as usize;
                if total != k.operands.len() {
                    push(
                        i,
                        Rule::SegmentSizes,
                        format!(
                            "operand_segment_sizes [{}, {}] does not match {} operands",
                            k.segment_sizes[0],
                            k.segment_sizes[1],
                            k.operands.len()
                        ),
                    );
                }
                if k.ii < 1 || k.latency < k.ii {
                    push(
                        i,
                        Rule::KernelTiming,
                        format!(
                            "need latency >= ii >= 1, got latency {} ii {}",
                            k.latency, k.ii
                        ),
                    );
                }
                let mut seen = BTreeSet::new();
                for v in &k.operands {
                    if !index.channels[v].def.is_some() {
                        push(i, Rule::UndefinedValue, format!("{v} is not defined"));
                    } else if !seen.insert(*v) {
                        push(
                            i,
                            Rule::OperandOverlap,
                            format!("{v} appears more than once among the operands"),
                        );
                    }
                }
                if let Some(g) = &k.group {
                    let first = m.ops.iter().find_map(|op| match op {
                        Op::Kernel(o) if o.group.as_deref() == Some(g) => Some(o),
                        _ => None,
                    });
                    if let Some(first) = first {
                        if first.operands != k.operands || first.segment_sizes != k.segment_sizes {
                            push(
                                i,
                                Rule::GroupMismatch,
                                format!("lanes of group `{g}` must share their operands"),
                            );
                        }
                    }
                }
            }
            Op::Pc(p) => {
                let Some(info) = index.channels.get(&p.channel).filter(|c| c.def.is_some()) else {
                    push(
                        i,
                        Rule::UndefinedValue,
                        format!("{} is not defined", p.channel),
                    );
                    continue;
                };
                let consumed = !info.consumers.is_empty();
                let produced = !info.producers.is_empty();
                match info.direction() {
                    _ if consumed && produced => push(
                        i,
                        Rule::PcBothSides,
                        "channel connects kernels on both sides".into(),
                    ),
                    None => push(
                        i,
                        Rule::PcUnconnected,
                        "channel is not connected to any kernel".into(),
                    ),
                    Some(d) if d != p.direction => push(
                        i,
                        Rule::PcDirection,
                        format!(
                            "direction is {} but the channel is a kernel {}",
                            p.direction,
                            if consumed { "input" } else { "output" }
                        ),
                    ),
                    Some(_) => {}
                }
            }
        }
    }
    diags
}
