//! Bus packing: interleaving several arrays onto one bus word stream.
//!
//! [`pack`] concatenates, for each of `k` kernel iterations, every array's
//! per-iteration elements in round-robin array order into a single
//! bitstream, then slices the stream into bus words. Elements are split at
//! word boundaries, so the only padding is at the end of the pattern. With
//! `B` payload bits per iteration and a `W`-bit bus the efficiency is
//!
//! ```text
//! e(k) = k*B / (ceil(k*B / W) * W)
//! ```
//!
//! and `k` is the smallest value in `1..=k_max` that maximizes it.
//!
//! [`naive_layout`] is the comparison baseline: whole elements only, each
//! array in its own run of words.

use std::collections::BTreeMap;

use bitvec::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::analysis::check_sanitized;
use crate::ir::{ConsumerKey, GraphIndex, OlympusModule, Op, ParamType, ValueId};
use crate::layout::{Layout, LayoutError, Placement};

pub const DEFAULT_K_MAX: u32 = 64;

/// Upper bound on placements in a generated layout.
const MAX_PLACEMENTS: u64 = 1 << 20;

pub type Bits = BitVec<u64, Lsb0>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IrisError {
    #[error("no arrays to pack")]
    Empty,
    #[error("array `{0}`: width, rate and total must all be positive")]
    NonPositive(String),
    #[error("bus width and k_max must be at least 1")]
    BadParameters,
    #[error("array `{name}` has {width}-bit elements, wider than the {bus}-bit bus")]
    TooWide { name: String, width: u32, bus: u32 },
    #[error("layout would need more than {MAX_PLACEMENTS} placements")]
    TooLarge,
    #[error("unknown channel `{0}`")]
    UnknownChannel(String),
    #[error("channel `{0}` is not connected to memory")]
    NotMemoryFacing(String),
    #[error("channel `{0}` is complex and cannot be packed")]
    Complex(String),
    #[error("channels in a packing group must have the same direction")]
    MixedDirections,
    #[error("channels in a packing group must have the same paramType")]
    MixedParamTypes,
    #[error("channels in a packing group must attach to the same kernel")]
    DifferentKernels,
    #[error("channel `{0}` already has a packed or laned layout")]
    AlreadyPacked(String),
    #[error("{given} rates given for {expected} channels")]
    RateCount { given: usize, expected: usize },
    #[error("channel `{0}` appears twice in the group")]
    Duplicate(String),
    #[error(transparent)]
    Unsanitized(#[from] crate::analysis::AnalysisError),
    #[error(transparent)]
    Layout(#[from] LayoutError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ArraySpec {
    pub name: String,
    pub element_width: u32,
    /// Elements consumed per kernel iteration.
    pub rate: u32,
    /// Total element count.
    pub total: u64,
}

impl ArraySpec {
    pub fn new(name: impl Into<String>, element_width: u32, rate: u32, total: u64) -> Self {
        ArraySpec {
            name: name.into(),
            element_width,
            rate,
            total,
        }
    }

    fn iterations(&self) -> u64 {
        self.total.div_ceil(self.rate as u64)
    }
}

fn check_arrays(arrays: &[ArraySpec], bus_width: u32) -> Result<(), IrisError> {
    if arrays.is_empty() {
        return Err(IrisError::Empty);
    }
    if bus_width == 0 {
        return Err(IrisError::BadParameters);
    }
    for a in arrays {
        if a.element_width == 0 || a.rate == 0 || a.total == 0 {
            return Err(IrisError::NonPositive(a.name.clone()));
        }
    }
    Ok(())
}

fn bits_per_iteration(arrays: &[ArraySpec]) -> u64 {
    arrays
        .iter()
        .map(|a| a.rate as u64 * a.element_width as u64)
        .sum()
}

fn repetitions(arrays: &[ArraySpec], k: u64) -> u64 {
    let iterations = arrays.iter().map(ArraySpec::iterations).max().unwrap_or(1);
    iterations.div_ceil(k).max(1)
}

/// Closed-form `e(k)` for `bits` payload bits per iteration.
pub fn packing_efficiency(bits: u64, bus_width: u32, k: u32) -> f64 {
    let payload = k as u64 * bits;
    let words = payload.div_ceil(bus_width as u64);
    payload as f64 / (words * bus_width as u64) as f64
}

/// Smallest `k` in `1..=k_max` maximizing `e(k)`, compared exactly.
pub fn best_k(bits: u64, bus_width: u32, k_max: u32) -> u32 {
    let words = |k: u32| (k as u64 * bits).div_ceil(bus_width as u64);
    let mut best = 1u32;
    for k in 2..=k_max {
        // e(k) > e(best)  <=>  k * words(best) > best * words(k)
        if k as u128 * words(best) as u128 > best as u128 * words(k) as u128 {
            best = k;
        }
    }
    best
}

pub fn pack(arrays: &[ArraySpec], bus_width: u32, k_max: u32) -> Result<Layout, IrisError> {
    check_arrays(arrays, bus_width)?;
    if k_max == 0 {
        return Err(IrisError::BadParameters);
    }
    let bits = bits_per_iteration(arrays);
    let k = best_k(bits, bus_width, k_max);
    let per_iteration: u64 = arrays.iter().map(|a| a.rate as u64).sum();
    if k as u64 * per_iteration > MAX_PLACEMENTS {
        return Err(IrisError::TooLarge);
    }

    let w = bus_width as u64;
    let mut placements = Vec::new();
    let mut pos: u64 = 0;
    for it in 0..k {
        for a in arrays {
            for j in 0..a.rate {
                let elem = it * a.rate + j;
                let mut lo = 0u32;
                while lo < a.element_width {
                    let offset = (pos % w) as u32;
                    let take = (a.element_width - lo).min(bus_width - offset);
                    placements.push(Placement {
                        array: a.name.clone(),
                        elem,
                        bit_lo: lo,
                        bit_hi: lo + take - 1,
                        word: (pos / w) as u32,
                        offset,
                    });
                    pos += take as u64;
                    lo += take;
                }
            }
        }
    }
    Ok(Layout {
        bus_width,
        k,
        repetitions: repetitions(arrays, k as u64),
        placements,
    })
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Efficiency of [`naive_layout`] without building it: the mean of each
/// array's per-word efficiency `floor(W/w)*w/W`, weighted by its share of
/// words.
pub fn naive_efficiency(arrays: &[ArraySpec], bus_width: u32) -> Result<f64, IrisError> {
    check_arrays(arrays, bus_width)?;
    let mut payload = 0.0;
    let mut words = 0.0;
    for a in arrays {
        if a.element_width > bus_width {
            return Err(IrisError::TooWide {
                name: a.name.clone(),
                width: a.element_width,
                bus: bus_width,
            });
        }
        let per_word = (bus_width / a.element_width) as f64;
        payload += a.rate as f64 * a.element_width as f64;
        words += a.rate as f64 / per_word;
    }
    Ok(payload / (words * bus_width as f64))
}

/// Whole elements only. Each array gets its own run of words holding
/// `floor(W / width)` elements each; `k` is the fewest iterations that fill
/// every run exactly.
pub fn naive_layout(arrays: &[ArraySpec], bus_width: u32) -> Result<Layout, IrisError> {
    naive_efficiency(arrays, bus_width)?;
    let mut k: u64 = 1;
    for a in arrays {
        let per_word = (bus_width / a.element_width) as u64;
        let need = per_word / gcd(a.rate as u64, per_word);
        k = k / gcd(k, need) * need;
        if k > MAX_PLACEMENTS {
            return Err(IrisError::TooLarge);
        }
    }
    let per_iteration: u64 = arrays.iter().map(|a| a.rate as u64).sum();
    if k * per_iteration > MAX_PLACEMENTS {
        return Err(IrisError::TooLarge);
    }

    let mut placements = Vec::new();
    let mut word_base: u64 = 0;
    for a in arrays {
        let per_word = (bus_width / a.element_width) as u64;
        let count = k * a.rate as u64;
        for e in 0..count {
            placements.push(Placement {
                array: a.name.clone(),
                elem: e as u32,
                bit_lo: 0,
                bit_hi: a.element_width - 1,
                word: (word_base + e / per_word) as u32,
                offset: ((e % per_word) * a.element_width as u64) as u32,
            });
        }
        word_base += count / per_word;
    }
    Ok(Layout {
        bus_width,
        k: k as u32,
        repetitions: repetitions(arrays, k),
        placements,
    })
}

pub fn layout_efficiency(l: &Layout) -> f64 {
    l.efficiency()
}

/// One bit-range read from the word stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Read {
    pub word: u32,
    pub offset: u32,
    pub length: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ArrayProgram {
    pub array: String,
    pub element_width: u32,
    /// Reads per element of one pattern, low bits first.
    pub elements: Vec<Vec<Read>>,
}

/// Extraction programs for every array of a layout; what a pack/unpack
/// adapter executes once per pattern.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AdapterSpec {
    pub bus_width: u32,
    pub words_per_pattern: u32,
    pub repetitions: u64,
    pub arrays: Vec<ArrayProgram>,
}

pub fn adapter_spec(l: &Layout) -> AdapterSpec {
    let shapes = l.arrays();
    let mut by_elem: BTreeMap<(&str, u32), Vec<&Placement>> = BTreeMap::new();
    for p in &l.placements {
        by_elem
            .entry((p.array.as_str(), p.elem))
            .or_default()
            .push(p);
    }
    let arrays = shapes
        .iter()
        .map(|s| ArrayProgram {
            array: s.name.clone(),
            element_width: s.element_width,
            elements: (0..s.elements_per_pattern)
                .map(|e| {
                    let mut segs = by_elem
                        .get(&(s.name.as_str(), e))
                        .cloned()
                        .unwrap_or_default();
                    segs.sort_by_key(|p| p.bit_lo);
                    segs.iter()
                        .map(|p| Read {
                            word: p.word,
                            offset: p.offset,
                            length: p.len(),
                        })
                        .collect()
                })
                .collect(),
        })
        .collect();
    AdapterSpec {
        bus_width: l.bus_width,
        words_per_pattern: l.words_per_pattern(),
        repetitions: l.repetitions,
        arrays,
    }
}

impl AdapterSpec {
    fn bit_at(&self, pattern: u64, read: &Read) -> usize {
        ((pattern * self.words_per_pattern as u64 + read.word as u64) * self.bus_width as u64
            + read.offset as u64) as usize
    }

    pub fn stream_bits(&self) -> usize {
        (self.repetitions * self.words_per_pattern as u64 * self.bus_width as u64) as usize
    }

    /// Splits a word stream into per-array element sequences, in element
    /// order. Reads past the end of `stream` yield zero bits.
    pub fn unpack(&self, stream: &BitSlice<u64, Lsb0>, patterns: u64) -> Vec<Vec<Bits>> {
        self.arrays
            .iter()
            .map(|prog| {
                let mut out = Vec::with_capacity(prog.elements.len() * patterns as usize);
                for pattern in 0..patterns {
                    for reads in &prog.elements {
                        let mut value = Bits::with_capacity(prog.element_width as usize);
                        for r in reads {
                            let start = self.bit_at(pattern, r);
                            for b in start..start + r.length as usize {
                                value.push(stream.get(b).is_some_and(|bit| *bit));
                            }
                        }
                        out.push(value);
                    }
                }
                out
            })
            .collect()
    }

    /// Inverse of [`unpack`](Self::unpack): writes per-array element
    /// sequences into a zeroed stream covering every repetition. Missing
    /// elements stay zero.
    pub fn pack(&self, arrays: &[Vec<Bits>]) -> Bits {
        let mut stream = bitvec![u64, Lsb0; 0; self.stream_bits()];
        for (prog, data) in self.arrays.iter().zip(arrays) {
            let per_pattern = prog.elements.len();
            for (n, value) in data.iter().enumerate() {
                let pattern = (n / per_pattern) as u64;
                if pattern >= self.repetitions {
                    break;
                }
                let mut bit = 0;
                for r in &prog.elements[n % per_pattern] {
                    let start = self.bit_at(pattern, r);
                    for b in start..start + r.length as usize {
                        stream.set(b, value.get(bit).is_some_and(|v| *v));
                        bit += 1;
                    }
                }
            }
        }
        stream
    }
}

/// Options for merging channels with [`apply_iris`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IrisOptions {
    /// Elements per kernel iteration for each channel; all 1 when absent.
    pub rates: Option<Vec<u32>>,
    pub k_max: u32,
}

impl Default for IrisOptions {
    fn default() -> Self {
        IrisOptions {
            rates: None,
            k_max: DEFAULT_K_MAX,
        }
    }
}

/// Replaces a group of memory-facing channels of one kernel by a single
/// `bus_width` channel whose layout interleaves them. The merged channel
/// reuses the first channel's value id, op position and PC node.
pub fn apply_iris(
    m: &OlympusModule,
    group: &[String],
    bus_width: u32,
    options: &IrisOptions,
) -> Result<OlympusModule, IrisError> {
    if group.is_empty() {
        return Err(IrisError::Empty);
    }
    let index = GraphIndex::build(m);
    check_sanitized(m, &index)?;

    let mut members = Vec::with_capacity(group.len());
    for name in group {
        let c = m
            .channel_by_name(name)
            .ok_or_else(|| IrisError::UnknownChannel(name.clone()))?;
        if members.iter().any(|(v, _): &(ValueId, _)| *v == c.result) {
            return Err(IrisError::Duplicate(name.clone()));
        }
        members.push((c.result, c));
    }
    let rates = match &options.rates {
        Some(r) if r.len() != group.len() => {
            return Err(IrisError::RateCount {
                given: r.len(),
                expected: group.len(),
            })
        }
        Some(r) => r.clone(),
        None => vec![1; group.len()],
    };

    let mut direction = None;
    let mut node: Option<Vec<ConsumerKey>> = None;
    let mut specs = Vec::with_capacity(group.len());
    for ((_, c), rate) in members.iter().zip(&rates) {
        let info = &index.channels[&c.result];
        let Some(dir) = info.direction() else {
            return Err(IrisError::NotMemoryFacing(c.name.clone()));
        };
        if c.param_type == ParamType::Complex {
            return Err(IrisError::Complex(c.name.clone()));
        }
        if c.param_type != members[0].1.param_type {
            return Err(IrisError::MixedParamTypes);
        }
        if *direction.get_or_insert(dir) != dir {
            return Err(IrisError::MixedDirections);
        }
        let keys = GraphIndex::distinct_nodes(m, info.kernels());
        if *node.get_or_insert_with(|| keys.clone()) != keys {
            return Err(IrisError::DifferentKernels);
        }
        if !c.layout.as_ref().is_some_and(Layout::is_single_element) {
            return Err(IrisError::AlreadyPacked(c.name.clone()));
        }
        specs.push(ArraySpec::new(&c.name, c.element_width, *rate, c.depth));
    }

    let layout = pack(&specs, bus_width, options.k_max)?;
    let keep = members[0].0;
    let drop: Vec<ValueId> = members[1..].iter().map(|(v, _)| *v).collect();
    let mut merged = members[0].1.clone();
    merged.name = group.concat();
    merged.element_width = bus_width;
    merged.depth = layout.total_words();
    merged.layout = Some(layout);
    merged.valid = None;
    merged.plm_instance = None;

    let mut ops = Vec::with_capacity(m.ops.len());
    for op in &m.ops {
        match op {
            Op::Channel(c) if c.result == keep => ops.push(Op::Channel(merged.clone())),
            Op::Channel(c) if drop.contains(&c.result) => {}
            Op::Pc(pc) if drop.contains(&pc.channel) => {}
            Op::Kernel(k) => {
                let mut k = k.clone();
                let n_inputs = k.inputs().iter().filter(|v| !drop.contains(v)).count();
                k.operands.retain(|v| !drop.contains(v));
                k.segment_sizes = [n_inputs as u32, (k.operands.len() - n_inputs) as u32];
                ops.push(Op::Kernel(k));
            }
            _ => ops.push(op.clone()),
        }
    }
    Ok(OlympusModule::new(ops))
}

/// Default grouping: per kernel node and direction, every memory-facing
/// channel that still has a single-element layout narrower than the bus.
/// Only groups of two or more are returned.
pub fn default_groups(m: &OlympusModule, bus_width: u32) -> Vec<Vec<String>> {
    let index = GraphIndex::build(m);
    let mut groups: BTreeMap<(Vec<ConsumerKey>, u8, u8), Vec<String>> = BTreeMap::new();
    let mut order = Vec::new();
    for c in m.channels() {
        let Some(info) = index.channels.get(&c.result) else {
            continue;
        };
        let Some(dir) = info.direction() else {
            continue;
        };
        let eligible = c.param_type != ParamType::Complex
            && c.element_width < bus_width
            && c.layout.as_ref().is_some_and(Layout::is_single_element);
        if !eligible {
            continue;
        }
        let key = (
            GraphIndex::distinct_nodes(m, info.kernels()),
            dir as u8,
            c.param_type as u8,
        );
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups.entry(key).or_default().push(c.name.clone());
    }
    order
        .into_iter()
        .filter_map(|key| groups.remove(&key).filter(|g| g.len() > 1))
        .collect()
}
