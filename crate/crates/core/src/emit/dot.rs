use std::collections::BTreeMap;
use std::fmt::Write;

use crate::ir::{ConsumerKey, Direction, GraphIndex, OlympusModule, Op};

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// Graphviz digraph: one box per DFG node (lanes of a widened kernel
/// collapse into one), one hexagon per PC node, one edge per channel
/// endpoint pair labeled `name:width`.
pub fn emit_dot(m: &OlympusModule) -> String {
    let index = GraphIndex::build(m);
    let mut nodes: BTreeMap<ConsumerKey, (String, String)> = BTreeMap::new();
    let mut order: Vec<ConsumerKey> = Vec::new();
    for (i, op) in m.ops.iter().enumerate() {
        let Op::Kernel(k) = op else { continue };
        let key = ConsumerKey::of(i, k);
        if !nodes.contains_key(&key) {
            let id = format!("k{}", nodes.len());
            nodes.insert(key.clone(), (id, k.instance_name().to_string()));
            order.push(key);
        }
    }
    let node_id = |i: usize| match &m.ops[i] {
        Op::Kernel(k) => nodes[&ConsumerKey::of(i, k)].0.clone(),
        _ => unreachable!("channel endpoints are kernels"),
    };

    let mut out = String::from("digraph olympus {\n");
    for key in &order {
        let (id, label) = &nodes[key];
        writeln!(out, "  {id} [shape=box, label={}];", quote(label)).unwrap();
    }
    let mut edges = Vec::new();
    let mut pc_count = 0;
    for (i, op) in m.ops.iter().enumerate() {
        let Op::Pc(pc) = op else { continue };
        let id = format!("pc{pc_count}");
        pc_count += 1;
        let label = format!("{}[{}]", pc.class.as_deref().unwrap_or("PC"), pc.id);
        writeln!(out, "  {id} [shape=hexagon, label={}];", quote(&label)).unwrap();
        let (Some(c), Some(info)) = (m.channel(pc.channel), index.info(pc.channel)) else {
            continue;
        };
        let edge_label = quote(&format!("{}:{}", c.name, c.element_width));
        let mut ends: Vec<String> = info.kernels().iter().map(|&k| node_id(k)).collect();
        ends.dedup();
        for end in ends {
            let (from, to) = match pc.direction {
                Direction::Read => (id.clone(), end),
                Direction::Write => (end, id.clone()),
            };
            edges.push((i, format!("  {from} -> {to} [label={edge_label}];")));
        }
    }
    for c in m.channels() {
        let info = &index.channels[&c.result];
        if info.consumers.is_empty() || info.producers.is_empty() {
            continue;
        }
        let label = quote(&format!("{}:{}", c.name, c.element_width));
        let mut pairs = Vec::new();
        for &p in &info.producers {
            for &q in &info.consumers {
                let pair = (node_id(p), node_id(q));
                if !pairs.contains(&pair) {
                    pairs.push(pair);
                }
            }
        }
        let at = info.def.unwrap_or(0);
        for (from, to) in pairs {
            edges.push((at, format!("  {from} -> {to} [label={label}];")));
        }
    }
    edges.sort_by_key(|(at, _)| *at);
    for (_, e) in edges {
        out.push_str(&e);
        out.push('\n');
    }
    out.push_str("}\n");
    out
}
