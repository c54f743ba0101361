mod common;

use std::collections::BTreeMap;

use bitvec::prelude::*;
use olympus::emit::{
    build_plan, emit_build_plan, emit_cfg, emit_dot, emit_host_api, EmitError, EmitOptions,
    HostFunctionKind,
};
use olympus::ir::{parse_module, ChannelOp, KernelOp, OlympusModule, Op, ParamType, ValueId};
use olympus::iris::{apply_iris, Bits, IrisOptions};
use olympus::plm::{share_plm, LifetimeSpec};
use olympus::transforms::{reassign_channels, replicate, ReplicationFactor};
use olympus::{sanitize, ResourceVector};
use petgraph::algo::{connected_components, is_isomorphic};
use petgraph::graph::{DiGraph, NodeIndex};

fn sanitized() -> OlympusModule {
    sanitize(&common::module("matmul.mlir")).unwrap()
}

fn reassigned() -> OlympusModule {
    reassign_channels(&sanitized(), &common::u280(), "HBM").unwrap()
}

fn replicated() -> OlympusModule {
    replicate(&reassigned(), &common::u280(), ReplicationFactor::Exact(2)).unwrap()
}

#[test]
fn cfg_for_reassigned_module() {
    let cfg = emit_cfg(&reassigned(), &common::u280(), &EmitOptions::default()).unwrap();
    assert_eq!(
        cfg,
        "[connectivity]\n\
         sp=matmul_1.m_axi_a:HBM[0]\n\
         sp=matmul_1.m_axi_b:HBM[1]\n\
         sp=matmul_1.m_axi_c:HBM[2]\n"
    );
}

#[test]
fn cfg_options_and_default_class() {
    let options = EmitOptions {
        instance_suffix: "_2".into(),
        interface_prefix: "p_".into(),
        ..EmitOptions::default()
    };
    let cfg = emit_cfg(&sanitized(), &common::u280(), &options).unwrap();
    assert_eq!(cfg.lines().nth(1), Some("sp=matmul_2.p_a:HBM[0]"));
}

#[test]
fn cfg_replicas_share_ids() {
    let cfg = emit_cfg(&replicated(), &common::u280(), &EmitOptions::default()).unwrap();
    let lines: Vec<&str> = cfg.lines().skip(1).collect();
    assert_eq!(lines.len(), 6);
    let target = |l: &str| l.rsplit(':').next().unwrap().to_string();
    for (a, b) in lines[..3].iter().zip(&lines[3..]) {
        assert_eq!(target(a), target(b));
    }
    assert!(lines[3].starts_with("sp=matmul_r1_1.m_axi_a_r1:"));

    // every referenced class and id exists on the platform
    let p = common::u280();
    for l in lines {
        let t = target(l);
        let (class, id) = t.trim_end_matches(']').split_once('[').unwrap();
        assert!(id.parse::<u32>().unwrap() < p.class(class).unwrap().count);
    }
}

fn internal_only() -> OlympusModule {
    let v = ValueId(0);
    let ops = vec![
        Op::Channel(ChannelOp::new(v, "t", 16, ParamType::Stream, 4)),
        Op::Kernel(KernelOp::new(
            "src",
            1,
            1,
            ResourceVector::ZERO,
            vec![],
            vec![v],
        )),
        Op::Kernel(KernelOp::new(
            "dst",
            1,
            1,
            ResourceVector::ZERO,
            vec![v],
            vec![],
        )),
    ];
    sanitize(&OlympusModule::new(ops)).unwrap()
}

#[test]
fn cfg_without_memory_channels() {
    let cfg = emit_cfg(&internal_only(), &common::u280(), &EmitOptions::default()).unwrap();
    assert_eq!(cfg, "[connectivity]\n");
}

#[test]
fn cfg_rejects_out_of_range_ids() {
    let mut m = reassigned();
    m.pcs_mut().next().unwrap().id = 32;
    let err = emit_cfg(&m, &common::u280(), &EmitOptions::default()).unwrap_err();
    assert!(matches!(
        err,
        EmitError::PcOutOfRange {
            id: 32,
            count: 32,
            ..
        }
    ));
    let raw = common::module("matmul.mlir");
    assert!(matches!(
        emit_cfg(&raw, &common::u280(), &EmitOptions::default()),
        Err(EmitError::Unsanitized(_))
    ));
}

#[test]
fn plan_fifos_for_matmul() {
    let plan = build_plan(&reassigned(), &common::u280(), None, &EmitOptions::default()).unwrap();
    let fifos: Vec<_> = plan
        .fifos
        .iter()
        .map(|f| (f.name.as_str(), f.width, f.depth))
        .collect();
    assert_eq!(fifos, [("a", 32, 20), ("b", 32, 20), ("c", 32, 20)]);
    assert!(plan.plms.is_empty() && plan.adapters.is_empty() && plan.axi_ports.is_empty());
    assert_eq!(plan.port_map.len(), 3);
    assert_eq!(plan.bridge.fifos, ["a", "b", "c"]);
    let json: serde_json::Value = serde_json::from_str(
        &emit_build_plan(&reassigned(), &common::u280(), None, &EmitOptions::default()).unwrap(),
    )
    .unwrap();
    assert_eq!(json["version"], 1);
}

#[test]
fn plan_complex_channel_is_an_axi_port() {
    let text = r#"
        %0 = "olympus.make_channel"() {name = "graph", encapsulatedType = i8, paramType = "complex", depth = 4096} : () -> !olympus.channel<i8>
        %1 = "olympus.make_channel"() {name = "rank", encapsulatedType = i32, paramType = "stream", depth = 64} : () -> !olympus.channel<i32>
        "olympus.kernel"(%0, %1) {callee = "pagerank", latency = 10, ii = 1, ff = 0, lut = 0, bram = 0, uram = 0, dsp = 0, operand_segment_sizes = array<i32: 1, 1>} : (!olympus.channel<i8>, !olympus.channel<i32>) -> ()
    "#;
    let m = sanitize(&parse_module(text).unwrap()).unwrap();
    let plan = build_plan(&m, &common::u280(), None, &EmitOptions::default()).unwrap();
    assert_eq!(plan.axi_ports.len(), 1);
    let port = &plan.axi_ports[0];
    assert_eq!(
        (port.kernel.as_str(), port.channel.as_str()),
        ("pagerank", "graph")
    );
    assert_eq!((port.class.as_deref(), port.pc_id), (Some("HBM"), Some(0)));
    assert_eq!(plan.fifos.len(), 1);
    assert_eq!(plan.fifos[0].name, "rank");
}

#[test]
fn plan_partitions_channels() {
    let p = common::u280();
    let raw = sanitize(&common::module("plm_chain.mlir")).unwrap();
    let lifetimes = LifetimeSpec::parse(&common::fixture("plm_chain.lifetimes")).unwrap();
    let (shared, _) = share_plm(&raw, &lifetimes).unwrap();
    for (m, instances) in [(&raw, 3), (&shared, 2)] {
        let plan = build_plan(m, &p, Some(&lifetimes), &EmitOptions::default()).unwrap();
        assert_eq!(plan.plms.len(), instances);
        let mut seen: BTreeMap<String, &str> = BTreeMap::new();
        for f in &plan.fifos {
            assert!(seen.insert(f.name.clone(), "fifo").is_none());
        }
        for inst in &plan.plms {
            for member in &inst.members {
                assert!(seen.insert(member.clone(), "plm").is_none());
            }
        }
        for a in &plan.axi_ports {
            assert!(seen.insert(a.channel.clone(), "axi").is_none());
        }
        let expected: BTreeMap<String, &str> = m
            .channels()
            .map(|c| {
                let kind = match c.param_type {
                    ParamType::Stream => "fifo",
                    ParamType::Small => "plm",
                    ParamType::Complex => "axi",
                };
                (c.name.clone(), kind)
            })
            .collect();
        assert_eq!(seen, expected);
    }
}

#[test]
fn plan_adapters_replay() {
    let m = sanitize(&common::module("iris72.mlir")).unwrap();
    let m = apply_iris(&m, &["p".into(), "q".into()], 128, &IrisOptions::default()).unwrap();
    let plan = build_plan(&m, &common::u280(), None, &EmitOptions::default()).unwrap();
    assert_eq!(plan.adapters.len(), 1);
    let adapter = &plan.adapters[0];
    assert_eq!((adapter.channel.as_str(), adapter.kind), ("pq", "unpack"));
    let spec = &adapter.spec;

    // 64 elements each of p and q; element i of p is i, of q is 1000 + i
    let elem = |v: u64| {
        let mut b: Bits = BitVec::new();
        for bit in 0..72 {
            b.push(bit < 64 && (v >> bit) & 1 == 1);
        }
        b
    };
    let data = vec![
        (0..64).map(elem).collect::<Vec<_>>(),
        (0..64).map(|i| elem(1000 + i)).collect::<Vec<_>>(),
    ];
    let stream = spec.pack(&data);
    // reference: p0 q0 p1 q1 ... back to back, 9 words of 128 bits per 8 pairs
    let mut reference: Bits = BitVec::new();
    for (p, q) in data[0].iter().zip(&data[1]) {
        reference.extend_from_bitslice(p);
        reference.extend_from_bitslice(q);
    }
    assert_eq!(stream, reference);
    assert_eq!(spec.unpack(&stream, spec.repetitions), data);
}

#[test]
fn host_api_names() {
    let api = emit_host_api(&reassigned());
    assert_eq!(
        api.names(),
        [
            "init",
            "create_buffer_a",
            "create_buffer_b",
            "create_buffer_c",
            "write_a",
            "write_b",
            "read_c",
            "run_matmul"
        ]
    );
    assert_eq!(api.functions[1].bytes, Some(80));
    let header = api.header();
    assert!(header.contains("int run_matmul(void);"));
    assert!(header.contains("int write_a(olympus_buffer *buffer, const void *src, size_t bytes);"));
    let json: serde_json::Value = serde_json::from_str(&api.json()).unwrap();
    assert_eq!(json["functions"].as_array().unwrap().len(), 8);

    let empty = emit_host_api(&OlympusModule::default());
    assert_eq!(empty.names(), ["init"]);
}

#[test]
fn host_api_replica_index() {
    let api = emit_host_api(&replicated());
    assert_eq!(api.names().len(), 8);
    let run = api
        .functions
        .iter()
        .find(|f| f.kind == HostFunctionKind::Run)
        .unwrap();
    assert_eq!((run.name.as_str(), run.replicas), ("run_matmul", 2));
    assert!(api.header().contains("int run_matmul(unsigned replica);"));
}

/// Reads back the nodes and edges of an emitted digraph.
fn parse_dot(text: &str) -> DiGraph<String, String> {
    let mut g = DiGraph::new();
    let mut ids: BTreeMap<String, NodeIndex> = BTreeMap::new();
    let label = |line: &str| {
        let start = line.find("label=\"").unwrap() + 7;
        line[start..line[start..].find('"').unwrap() + start].to_string()
    };
    for line in text.lines().map(str::trim) {
        if line.contains("->") {
            let (from, rest) = line.split_once(" -> ").unwrap();
            let to = rest.split_whitespace().next().unwrap();
            g.add_edge(ids[from], ids[to], label(line));
        } else if line.contains("shape=") {
            let id = line.split_whitespace().next().unwrap().to_string();
            let shape = if line.contains("shape=box") {
                "box"
            } else {
                "hexagon"
            };
            ids.insert(id, g.add_node(format!("{shape}:{}", label(line))));
        }
    }
    g
}

#[test]
fn dot_shapes() {
    let dot = emit_dot(&reassigned());
    let g = parse_dot(&dot);
    assert_eq!((g.node_count(), g.edge_count()), (4, 3));
    assert!(dot.contains("[shape=hexagon, label=\"HBM[2]\"]"));
    assert!(dot.contains("label=\"c:32\""));
    assert_eq!(
        emit_dot(&OlympusModule::default()),
        "digraph olympus {\n}\n"
    );
    let g = parse_dot(&emit_dot(&internal_only()));
    assert_eq!((g.node_count(), g.edge_count()), (2, 1));
}

#[test]
fn dot_replicas_are_isomorphic_components() {
    let g = parse_dot(&emit_dot(&replicated()));
    assert_eq!(connected_components(&g), 2);
    let original = parse_dot(&emit_dot(&reassigned()));
    // split by replica: nodes named `_r1` or touching an `_r1` channel
    let component = |g: &DiGraph<String, String>, keep_r1: bool| {
        let mut c = g.clone();
        let in_replica: Vec<bool> = c
            .node_indices()
            .map(|n| {
                c[n].contains("_r1")
                    || c.edges_directed(n, petgraph::Direction::Incoming)
                        .chain(c.edges_directed(n, petgraph::Direction::Outgoing))
                        .any(|e| e.weight().contains("_r1"))
            })
            .collect();
        c.retain_nodes(|_, n| in_replica[n.index()] == keep_r1);
        c
    };
    let first = component(&g, false);
    let second = component(&g, true);
    assert_eq!(first.node_count(), 4);
    assert!(is_isomorphic(&first, &second));
    assert!(is_isomorphic(&first, &original));
}

#[test]
fn emitters_are_deterministic() {
    let p = common::u280();
    let o = EmitOptions::default();
    for m in [sanitized(), reassigned(), replicated()] {
        assert_eq!(
            emit_cfg(&m, &p, &o).unwrap(),
            emit_cfg(&m.clone(), &p, &o).unwrap()
        );
        assert_eq!(
            emit_build_plan(&m, &p, None, &o).unwrap(),
            emit_build_plan(&m.clone(), &p, None, &o).unwrap()
        );
        assert_eq!(emit_dot(&m), emit_dot(&m.clone()));
        assert_eq!(
            emit_host_api(&m).header(),
            emit_host_api(&m.clone()).header()
        );
    }
}
