mod common;

use std::collections::BTreeMap;

use bitvec::prelude::*;
use olympus::ir::verify_module;
use olympus::iris::{
    adapter_spec, apply_iris, best_k, default_groups, naive_efficiency, naive_layout, pack,
    packing_efficiency, ArraySpec, Bits, IrisError, IrisOptions,
};
use olympus::{sanitize, Layout};
use proptest::prelude::*;

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn exhaustive_best(bits: u64, bus: u32, k_max: u32) -> (u32, f64) {
    let mut best = (1, 0.0);
    for k in 1..=k_max {
        let payload = k as u64 * bits;
        let e = payload as f64 / (payload.div_ceil(bus as u64) * bus as u64) as f64;
        if e > best.1 + 1e-15 {
            best = (k, e);
        }
    }
    best
}

#[test]
fn wide_elements_on_narrow_bus() {
    let a = [ArraySpec::new("a", 72, 1, 1024)];
    assert_eq!(naive_efficiency(&a, 128).unwrap(), 0.5625);
    let l = pack(&a, 128, 64).unwrap();
    assert_eq!(l.k, 16);
    assert_eq!(l.efficiency(), 1.0);
    assert_eq!(exhaustive_best(72, 128, 64), (16, 1.0));
    assert_eq!(l.words_per_pattern(), 9);
    assert_eq!(l.repetitions, 64);
}

#[test]
fn rejects_bad_specs() {
    assert!(matches!(pack(&[], 64, 8), Err(IrisError::Empty)));
    assert!(matches!(
        pack(&[ArraySpec::new("a", 0, 1, 1)], 64, 8),
        Err(IrisError::NonPositive(_))
    ));
    assert!(matches!(
        naive_efficiency(&[ArraySpec::new("a", 65, 1, 1)], 64),
        Err(IrisError::TooWide { .. })
    ));
}

/// Stream order: for each iteration, every array's elements for that
/// iteration in array order, each element low bit first; each pattern
/// padded with zeros to whole words.
fn reference_stream(arrays: &[ArraySpec], data: &[Vec<Bits>], l: &Layout) -> Bits {
    let mut stream = Bits::new();
    let pattern_bits = l.words_per_pattern() as usize * l.bus_width as usize;
    for pattern in 0..l.repetitions as usize {
        let start = stream.len();
        for it in 0..l.k as usize {
            for (a, values) in arrays.iter().zip(data) {
                for j in 0..a.rate as usize {
                    let n = (pattern * l.k as usize + it) * a.rate as usize + j;
                    stream.extend_from_bitslice(&values[n]);
                }
            }
        }
        stream.resize(start + pattern_bits, false);
    }
    stream
}

fn random_data(arrays: &[ArraySpec], l: &Layout, seed: u64) -> Vec<Vec<Bits>> {
    let mut state = seed | 1;
    let mut next = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        state
    };
    arrays
        .iter()
        .map(|a| {
            let n = l.repetitions as usize * l.k as usize * a.rate as usize;
            (0..n)
                .map(|_| {
                    (0..a.element_width)
                        .map(|_| next() & 1 == 1)
                        .collect::<Bits>()
                })
                .collect()
        })
        .collect()
}

fn array_specs() -> impl Strategy<Value = (Vec<ArraySpec>, u32)> {
    prop_oneof![
        Just(32u32),
        Just(64),
        Just(128),
        Just(256),
        Just(512),
        8u32..200
    ]
    .prop_flat_map(|bus| {
        let one = (1u32..=bus.min(130), 1u32..=4, 1u64..=120);
        (proptest::collection::vec(one, 1..=4), Just(bus)).prop_map(|(specs, bus)| {
            let arrays = specs
                .into_iter()
                .enumerate()
                .map(|(i, (w, r, t))| ArraySpec::new(format!("a{i}"), w, r, t))
                .collect();
            (arrays, bus)
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn packing_properties((arrays, bus) in array_specs(), seed in any::<u64>()) {
        let l = pack(&arrays, bus, 16).unwrap();
        prop_assert!(l.validate().is_ok());
        let bits: u64 = arrays.iter().map(|a| a.rate as u64 * a.element_width as u64).sum();

        // best k matches an exhaustive scan
        let (k, e) = exhaustive_best(bits, bus, 16);
        prop_assert_eq!(l.k, k);
        prop_assert!((l.efficiency() - e).abs() < 1e-12);
        prop_assert!((packing_efficiency(bits, bus, k) - e).abs() < 1e-12);

        // bit conservation: every element bit placed exactly once
        prop_assert_eq!(l.useful_bits_per_pattern(), l.k as u64 * bits);
        prop_assert_eq!(
            l.words_per_pattern() as u64,
            (l.k as u64 * bits).div_ceil(bus as u64)
        );
        let mut covered: BTreeMap<(&str, u32), Vec<(u32, u32)>> = BTreeMap::new();
        for p in &l.placements {
            covered.entry((p.array.as_str(), p.elem)).or_default().push((p.bit_lo, p.bit_hi));
        }
        for a in &arrays {
            for e in 0..l.k * a.rate {
                let mut ranges = covered.remove(&(a.name.as_str(), e)).unwrap();
                ranges.sort();
                let mut next = 0;
                for (lo, hi) in ranges {
                    prop_assert_eq!(lo, next);
                    next = hi + 1;
                }
                prop_assert_eq!(next, a.element_width);
            }
        }
        prop_assert!(covered.is_empty());

        // order: along the stream each array's bits appear in element order
        let mut by_position = l.placements.clone();
        by_position.sort_by_key(|p| (p.word, p.offset));
        let mut last: BTreeMap<&str, (u32, u32)> = BTreeMap::new();
        for p in &by_position {
            if let Some(prev) = last.insert(p.array.as_str(), (p.elem, p.bit_lo)) {
                prop_assert!(prev < (p.elem, p.bit_lo));
            }
        }

        // adapter round trip against the reference stream
        let spec = adapter_spec(&l);
        let data = random_data(&arrays, &l, seed);
        let stream = spec.pack(&data);
        prop_assert_eq!(&stream, &reference_stream(&arrays, &data, &l));
        prop_assert_eq!(spec.unpack(&stream, l.repetitions), data);
    }

    #[test]
    fn packed_dominates_naive((arrays, bus) in array_specs()) {
        let closed = naive_efficiency(&arrays, bus).unwrap();
        // iterations until every array's run of whole-element words is full
        let k = arrays.iter().fold(1u64, |k, a| {
            let per_word = (bus / a.element_width) as u64;
            let need = per_word / gcd(a.rate as u64, per_word);
            k / gcd(k, need) * need
        });
        let bits: u64 = arrays.iter().map(|a| a.rate as u64 * a.element_width as u64).sum();
        if k <= 256 {
            let naive = naive_layout(&arrays, bus).unwrap();
            prop_assert_eq!(naive.k as u64, k);
            prop_assert!(naive.validate().is_ok());
            prop_assert!((naive.efficiency() - closed).abs() < 1e-12);
            // same iteration budget as the naive pattern
            let packed = pack(&arrays, bus, k as u32).unwrap();
            prop_assert!(packed.efficiency() >= closed - 1e-12);
        } else {
            let packed = packing_efficiency(bits, bus, best_k(bits, bus, k as u32));
            prop_assert!(packed >= closed - 1e-12);
        }
    }

    #[test]
    fn best_k_is_smallest_maximizer(bits in 1u64..2000, bus in 1u32..600, k_max in 1u32..80) {
        let k = best_k(bits, bus, k_max);
        prop_assert_eq!(k, exhaustive_best(bits, bus, k_max).0);
    }
}

#[test]
fn merges_channels_of_one_kernel() {
    let m = sanitize(&common::module("iris72.mlir")).unwrap();
    assert_eq!(
        default_groups(&m, 128),
        vec![vec!["p".to_string(), "q".to_string()]]
    );
    let out = apply_iris(&m, &["p".into(), "q".into()], 128, &IrisOptions::default()).unwrap();
    assert!(verify_module(&out).is_empty());
    assert_eq!(out.channels().count(), 2);
    let pq = out.channel_by_name("pq").unwrap();
    let l = pq.layout.as_ref().unwrap();
    // 2 x 72 bits per iteration: 8 iterations fill 9 words exactly
    assert_eq!((l.k, l.words_per_pattern(), l.efficiency()), (8, 9, 1.0));
    assert_eq!((pq.element_width, pq.depth), (128, 72));
    assert_eq!(out.pcs().count(), 2);

    let err = apply_iris(&m, &["p".into(), "r".into()], 128, &IrisOptions::default()).unwrap_err();
    assert_eq!(err, IrisError::MixedDirections);
    let err = apply_iris(&m, &["p".into(), "p".into()], 128, &IrisOptions::default()).unwrap_err();
    assert!(matches!(err, IrisError::Duplicate(_)));
    let bad_rates = IrisOptions {
        rates: Some(vec![1]),
        ..IrisOptions::default()
    };
    let err = apply_iris(&m, &["p".into(), "q".into()], 128, &bad_rates).unwrap_err();
    assert!(matches!(err, IrisError::RateCount { .. }));
}

#[test]
fn bitvec_reference_is_lsb_first() {
    let spec = adapter_spec(&Layout::single_element("a", 4, 1));
    let stream = spec.pack(&[vec![bitvec![u64, Lsb0; 1, 0, 1, 1]]]);
    assert_eq!(stream, bitvec![u64, Lsb0; 1, 0, 1, 1]);
}
