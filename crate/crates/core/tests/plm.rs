mod common;

use olympus::analysis::resource_analysis;
use olympus::ir::{verify_module, ChannelOp, KernelOp, OlympusModule, Op, ParamType, ValueId};
use olympus::plm::{share_plm, Lifetime, LifetimeSpec};
use olympus::{sanitize, ResourceVector};
use petgraph::graph::UnGraph;
use proptest::prelude::*;

fn conflict_graph(intervals: &[(u64, u64)]) -> UnGraph<(), ()> {
    let mut g = UnGraph::new_undirected();
    let nodes: Vec<_> = intervals.iter().map(|_| g.add_node(())).collect();
    for i in 0..intervals.len() {
        for j in i + 1..intervals.len() {
            let (a, b) = (intervals[i], intervals[j]);
            if a.0 < b.1 && b.0 < a.1 {
                g.add_edge(nodes[i], nodes[j], ());
            }
        }
    }
    g
}

fn colorable(g: &UnGraph<(), ()>, k: usize, colors: &mut Vec<usize>) -> bool {
    let v = colors.len();
    if v == g.node_count() {
        return true;
    }
    for c in 0..k {
        let clash = g
            .neighbors(petgraph::graph::NodeIndex::new(v))
            .any(|u| u.index() < v && colors[u.index()] == c);
        if !clash {
            colors.push(c);
            if colorable(g, k, colors) {
                return true;
            }
            colors.pop();
        }
    }
    false
}

fn chromatic_number(g: &UnGraph<(), ()>) -> usize {
    (0..=g.node_count())
        .find(|&k| colorable(g, k, &mut Vec::new()))
        .unwrap()
}

/// One memory-read `small` buffer per interval, each feeding its own kernel.
fn buffer_module(sizes: &[u64]) -> OlympusModule {
    let mut ops = Vec::new();
    for (i, &depth) in sizes.iter().enumerate() {
        let v = ValueId(i as u32);
        ops.push(Op::Channel(ChannelOp::new(
            v,
            format!("b{i}"),
            32,
            ParamType::Small,
            depth,
        )));
        ops.push(Op::Kernel(KernelOp::new(
            format!("k{i}"),
            10,
            1,
            ResourceVector {
                lut: 100,
                ..ResourceVector::ZERO
            },
            vec![v],
            vec![],
        )));
    }
    sanitize(&OlympusModule::new(ops)).unwrap()
}

fn spec(intervals: &[(u64, u64)]) -> LifetimeSpec {
    let mut s = LifetimeSpec::default();
    for (i, &(start, end)) in intervals.iter().enumerate() {
        s.insert(
            format!("b{i}"),
            Lifetime {
                start,
                end,
                slots: None,
            },
        )
        .unwrap();
    }
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn instance_count_is_chromatic_number(
        raw in proptest::collection::vec((0u64..20, 1u64..10, 1u64..5000), 1..=8)
    ) {
        let intervals: Vec<(u64, u64)> = raw.iter().map(|&(s, l, _)| (s, s + l)).collect();
        let sizes: Vec<u64> = raw.iter().map(|&(_, _, d)| d).collect();
        let m = buffer_module(&sizes);
        let (out, plan) = share_plm(&m, &spec(&intervals)).unwrap();
        prop_assert_eq!(plan.instances.len(), chromatic_number(&conflict_graph(&intervals)));
        prop_assert!(verify_module(&out).is_empty());

        // members of an instance never overlap in time
        for inst in &plan.instances {
            for a in &inst.members {
                for b in &inst.members {
                    let (ia, ib) = (a[1..].parse::<usize>().unwrap(), b[1..].parse::<usize>().unwrap());
                    if ia != ib {
                        let (x, y) = (intervals[ia], intervals[ib]);
                        prop_assert!(!(x.0 < y.1 && y.0 < x.1));
                    }
                }
            }
        }

        // savings match the analysis before and after
        let p = common::u280();
        let before = resource_analysis(&m, &p).totals;
        let after = resource_analysis(&out, &p).totals;
        prop_assert!(after.fits_within(&before));
        prop_assert_eq!(before - after, plan.savings);
    }
}

#[test]
fn chain_fixture_shares_disjoint_buffers() {
    let m = sanitize(&common::module("plm_chain.mlir")).unwrap();
    let lifetimes = LifetimeSpec::parse(&common::fixture("plm_chain.lifetimes")).unwrap();
    let (out, plan) = share_plm(&m, &lifetimes).unwrap();
    assert_eq!(plan.assignment["w0"], plan.assignment["w1"]);
    assert_ne!(plan.assignment["w0"], plan.assignment["w2"]);
    assert_eq!(plan.instances.len(), 2);
    let shared = &plan.instances[0];
    assert_eq!(shared.members, ["w0", "w1"]);
    assert_eq!(shared.ports, 1);
    assert_eq!(shared.size_bytes, 8192);
    // two 32x2048 buffers need 2 BRAMs each; sharing saves one pair
    assert_eq!(
        plan.savings,
        ResourceVector {
            bram: 2,
            ..ResourceVector::ZERO
        }
    );
    assert!(plan.warnings.is_empty());
    assert_eq!(out.channel_by_name("w1").unwrap().plm_instance, Some(0));
    assert_eq!(out.channel_by_name("s01").unwrap().plm_instance, None);
}

#[test]
fn missing_lifetimes_stay_unshared() {
    let m = buffer_module(&[16, 16, 16]);
    let (_, plan) = share_plm(&m, &spec(&[(0, 5)])).unwrap();
    assert_eq!(plan.instances.len(), 3);
    assert_eq!(plan.warnings.len(), 2);
    assert_eq!(plan.savings, ResourceVector::ZERO);
}

#[test]
fn overlapping_slots_need_separate_ports() {
    let m = buffer_module(&[16, 16]);
    let mut s = LifetimeSpec::default();
    let at = |slots: &[u64]| Some(slots.iter().copied().collect());
    s.insert(
        "b0",
        Lifetime {
            start: 0,
            end: 5,
            slots: at(&[0, 1]),
        },
    )
    .unwrap();
    s.insert(
        "b1",
        Lifetime {
            start: 5,
            end: 9,
            slots: at(&[1]),
        },
    )
    .unwrap();
    let (_, plan) = share_plm(&m, &s).unwrap();
    assert_eq!(plan.instances.len(), 1);
    assert_eq!(plan.instances[0].ports, 2);
}
