mod common;

use olympus::analysis::{bandwidth_analysis, module_resources, resource_analysis};
use olympus::ir::{
    verify_module, ChannelOp, Direction, KernelOp, OlympusModule, Op, ParamType, ValueId,
};
use olympus::transforms::{
    max_replication_factor, plan_reassignment, reassign_channels, replicate, widen_bus,
    ReplicationFactor, TransformError,
};
use olympus::{sanitize, Layout, Platform, Resource, ResourceVector};
use proptest::prelude::*;

fn sanitized(name: &str) -> OlympusModule {
    sanitize(&common::module(name)).unwrap()
}

#[test]
fn sanitize_adds_terminals_and_layouts() {
    let raw = common::module("matmul.mlir");
    let m = sanitize(&raw).unwrap();
    let pcs: Vec<_> = m.pcs().collect();
    assert_eq!(pcs.len(), 3);
    assert!(pcs.iter().all(|pc| pc.id == 0 && pc.class.is_none()));
    let dirs: Vec<(String, Direction)> = pcs
        .iter()
        .map(|pc| (m.channel(pc.channel).unwrap().name.clone(), pc.direction))
        .collect();
    assert_eq!(
        dirs,
        [
            ("a".to_string(), Direction::Read),
            ("b".to_string(), Direction::Read),
            ("c".to_string(), Direction::Write)
        ]
    );
    for c in m.channels() {
        let l = c.layout.as_ref().unwrap();
        assert!(l.is_single_element());
        assert_eq!((l.bus_width, l.k, l.repetitions), (32, 1, 20));
    }
    assert_eq!(m.ops.len(), raw.ops.len() + 3);
    assert_eq!(sanitize(&m).unwrap(), m);
    assert!(verify_module(&m).is_empty());
}

#[test]
fn sanitize_skips_internal_channels() {
    let m = sanitized("plm_chain.mlir");
    let names: Vec<_> = m
        .pcs()
        .map(|pc| m.channel(pc.channel).unwrap().name.clone())
        .collect();
    assert_eq!(names, ["w0", "w1", "w2", "out"]);
}

#[test]
fn reassign_gives_distinct_ids() {
    let p = common::u280();
    let m = reassign_channels(&sanitized("matmul.mlir"), &p, "HBM").unwrap();
    let mut ids: Vec<u32> = m.pcs().map(|pc| pc.id).collect();
    ids.sort();
    assert_eq!(ids, [0, 1, 2]);
    assert!(m.pcs().all(|pc| pc.class.as_deref() == Some("HBM")));
    assert!(verify_module(&m).is_empty());
}

#[test]
fn reassign_lowers_peak_utilization() {
    let p = common::u280();
    let before = sanitized("matmul.mlir");
    let after = reassign_channels(&before, &p, "HBM").unwrap();
    let b = bandwidth_analysis(&before, &p).unwrap();
    let a = bandwidth_analysis(&after, &p).unwrap();
    assert!(a.max_utilization <= b.max_utilization);
    assert!((a.total_demand_bits_per_cycle - b.total_demand_bits_per_cycle).abs() < 1e-12);
    // 32-bit element every 268 cycles, on a 256-bit channel
    let one = 32.0 / 268.0 / 256.0;
    assert!((a.max_utilization - one).abs() < 1e-15);
    assert!((b.max_utilization - 3.0 * one).abs() < 1e-15);
}

#[test]
fn reassign_unknown_class() {
    let err = reassign_channels(&sanitized("matmul.mlir"), &common::u280(), "QDR").unwrap_err();
    assert!(matches!(err, TransformError::Platform(_)));
}

/// Module with one kernel per channel, so each channel's demand is
/// `width / ii`.
fn load_module(items: &[(u32, u64)]) -> OlympusModule {
    let mut ops = Vec::new();
    for (i, &(width, ii)) in items.iter().enumerate() {
        let v = ValueId(i as u32);
        ops.push(Op::Channel(ChannelOp::new(
            v,
            format!("c{i}"),
            width,
            ParamType::Stream,
            8,
        )));
        ops.push(Op::Kernel(KernelOp::new(
            format!("k{i}"),
            ii,
            ii,
            ResourceVector::ZERO,
            vec![v],
            vec![],
        )));
    }
    sanitize(&OlympusModule::new(ops)).unwrap()
}

fn brute_force_max_load(demands: &[f64], pcs: usize) -> f64 {
    let mut best = f64::INFINITY;
    let total = pcs.pow(demands.len() as u32);
    for code in 0..total {
        let mut loads = vec![0.0; pcs];
        let mut c = code;
        for d in demands {
            loads[c % pcs] += d;
            c /= pcs;
        }
        best = best.min(loads.iter().copied().fold(0.0, f64::max));
    }
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn greedy_within_four_thirds(
        items in proptest::collection::vec((1u32..512, 1u64..16), 1..=8),
        pcs in 1u32..=3,
    ) {
        let p = common::small_platform(pcs, 512);
        let m = load_module(&items);
        let plan = plan_reassignment(&m, &p, "HBM").unwrap();
        let demands: Vec<f64> = items.iter().map(|&(w, ii)| w as f64 / ii as f64).collect();

        // loads recomputed from the plan's ids
        let mut loads = vec![0.0; pcs as usize];
        for (&(_, id), d) in plan.ids.iter().zip(&demands) {
            loads[id as usize] += d;
        }
        let max = loads.iter().copied().fold(0.0, f64::max);
        prop_assert!((max - plan.max_load()).abs() <= 1e-9 * max.max(1.0));

        let opt = brute_force_max_load(&demands, pcs as usize);
        prop_assert!(max <= opt * 4.0 / 3.0 + 1e-9);

        if items.len() <= pcs as usize {
            let mut ids: Vec<u32> = plan.ids.iter().map(|&(_, id)| id).collect();
            ids.sort();
            ids.dedup();
            prop_assert_eq!(ids.len(), items.len());
        }
    }
}

#[test]
fn replicate_by_two() {
    let p = common::u280();
    let m = reassign_channels(&sanitized("matmul.mlir"), &p, "HBM").unwrap();
    let r = replicate(&m, &p, ReplicationFactor::Exact(2)).unwrap();
    assert!(verify_module(&r).is_empty());
    assert_eq!(r.ops.len(), 2 * m.ops.len());
    assert_eq!(r.channels().count(), 6);
    assert_eq!(r.kernels().count(), 2);
    assert_eq!(r.pcs().count(), 6);
    for c in m.channels() {
        let copy = r.channel_by_name(&format!("{}_r1", c.name)).unwrap();
        let id_of = |m: &OlympusModule, v: ValueId| m.pcs().find(|pc| pc.channel == v).unwrap().id;
        assert_eq!(id_of(&r, copy.result), id_of(&m, c.result));
        assert_eq!(id_of(&r, c.result), id_of(&m, c.result));
    }
    let (k1, i1) = module_resources(&m);
    let (k2, i2) = module_resources(&r);
    assert_eq!(k2, k1 * 2);
    assert_eq!(i2, i1 * 2);
    let replicas: Vec<_> = r
        .kernels()
        .map(|k| (k.callee.clone(), k.replica_index))
        .collect();
    assert_eq!(
        replicas,
        [("matmul".into(), Some(0)), ("matmul_r1".into(), Some(1))]
    );
    assert!(matches!(
        replicate(&r, &p, ReplicationFactor::Exact(2)),
        Err(TransformError::AlreadyReplicated)
    ));
}

/// Totals per copy: matmul plus three 32x20 FIFOs.
fn per_copy() -> ResourceVector {
    ResourceVector {
        ff: 3106 + 150,
        lut: 6174 + 150,
        bram: 61 + 3,
        uram: 0,
        dsp: 48,
    }
}

#[test]
fn replicate_max_is_tight() {
    let p = common::u280();
    let m = sanitized("matmul.mlir");
    let unit = per_copy();
    let (k, i) = module_resources(&m);
    assert_eq!(k + i, unit);

    // direct arithmetic: largest r with r * used <= 0.8 * available for all
    let fits = |r: u64| {
        Resource::ALL
            .iter()
            .all(|&res| (r * unit.get(res)) as f64 <= 0.8 * p.resources.get(res) as f64)
    };
    let mut expected = 1;
    while fits(expected + 1) {
        expected += 1;
    }
    assert_eq!(expected, 25); // bram: 25 * 64 = 1600 <= 1612.8 < 1664
    assert_eq!(max_replication_factor(&m, &p).unwrap(), expected);

    let r = replicate(&m, &p, ReplicationFactor::Max { cap: None }).unwrap();
    assert_eq!(r.kernels().count() as u64, expected);
    let report = resource_analysis(&r, &p);
    assert!(report.utilization.values().all(|&u| u <= 0.8));
    assert_eq!(report.totals, unit * expected);
    assert!(!fits(expected + 1));
    assert!(matches!(
        replicate(&m, &p, ReplicationFactor::Exact(expected + 1)),
        Err(TransformError::FactorTooLarge { .. })
    ));
    let capped = replicate(&m, &p, ReplicationFactor::Max { cap: Some(4) }).unwrap();
    assert_eq!(capped.kernels().count(), 4);
    assert!(matches!(
        replicate(&m, &p, ReplicationFactor::Exact(0)),
        Err(TransformError::ZeroFactor)
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn replication_scales_linearly(r in 1u64..=8) {
        let p = common::u280();
        let m = sanitized("plm_chain.mlir");
        let out = replicate(&m, &p, ReplicationFactor::Exact(r)).unwrap();
        let (k1, i1) = module_resources(&m);
        let (k2, i2) = module_resources(&out);
        prop_assert_eq!(k2, k1 * r);
        prop_assert_eq!(i2, i1 * r);
        prop_assert_eq!(out.ops.len() as u64, m.ops.len() as u64 * r);
        prop_assert!(verify_module(&out).is_empty());
    }
}

fn lanes_of(m: &OlympusModule) -> Vec<u32> {
    m.channels()
        .filter(|c| c.name.len() == 1)
        .map(|c| c.layout.as_ref().unwrap().placements.len() as u32)
        .collect()
}

#[test]
fn widen_64_bit_channels() {
    let p = common::u280();
    let m = sanitized("widen64.mlir");
    let w = widen_bus(&m, &p, 256).unwrap();
    assert!(verify_module(&w).is_empty());
    assert_eq!(lanes_of(&w), [4, 4, 4]);
    assert_eq!(w.kernels().count(), 4);
    let lanes: Vec<_> = w
        .kernels()
        .map(|k| (k.group.clone().unwrap(), k.lane.unwrap()))
        .collect();
    assert_eq!(lanes[3], ("vadd_x4".to_string(), 3));
    for c in w.channels() {
        assert_eq!((c.element_width, c.depth, c.valid), (256, 256, Some(1024)));
    }

    let w = widen_bus(&m, &p, 128).unwrap();
    assert_eq!(lanes_of(&w), [2, 2, 2]);
    assert_eq!(w.kernels().count(), 2);
    assert!(matches!(
        widen_bus(&w, &p, 256),
        Err(TransformError::AlreadyWidened)
    ));
    assert!(matches!(
        widen_bus(&m, &p, 32),
        Err(TransformError::ElementTooWide { .. })
    ));
}

#[test]
fn widen_respects_resource_limit() {
    // room for two copies of the kernel but not four
    let p =
        Platform::load(&common::fixture("u280.toml").replace("ff = 2607360", "ff = 6000")).unwrap();
    let w = widen_bus(&sanitized("widen64.mlir"), &p, 256).unwrap();
    assert_eq!(w.kernels().count(), 2);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn widening_conserves_data(width in 1u32..=64, depth in 1u64..5000, bus in 64u32..=512) {
        let mut ops = vec![Op::Channel(ChannelOp::new(ValueId(0), "x", width, ParamType::Stream, depth))];
        ops.push(Op::Kernel(KernelOp::new("k", 4, 1, ResourceVector::ZERO, vec![ValueId(0)], vec![])));
        let m = sanitize(&OlympusModule::new(ops)).unwrap();
        let w = widen_bus(&m, &common::small_platform(4, bus), bus).unwrap();
        let c = w.channels().next().unwrap();
        let lanes = bus / width;
        let layout: &Layout = c.layout.as_ref().unwrap();
        prop_assert_eq!(c.element_width, lanes * width);
        prop_assert!(c.element_width <= bus);
        // every element fits, with less than one word of padding
        let capacity = c.depth * lanes as u64;
        prop_assert!(capacity >= depth);
        prop_assert!(capacity - depth < lanes as u64);
        prop_assert_eq!(layout.useful_bits_per_pattern() * layout.repetitions, capacity * width as u64);
        prop_assert_eq!(c.valid, if lanes > 1 { Some(depth) } else { None });
        prop_assert!(verify_module(&w).is_empty());
    }
}
