//! Synthetic workloads for the benchmarks.

use olympus::ir::{ChannelOp, KernelOp, OlympusModule, Op, ParamType, ValueId};
use olympus::iris::ArraySpec;
use olympus::{Platform, ResourceVector};

/// Small xorshift so workloads are stable across runs and crate versions.
struct Lcg(u64);

impl Lcg {
    fn next(&mut self, bound: u64) -> u64 {
        self.0 ^= self.0 << 13;
        self.0 ^= self.0 >> 7;
        self.0 ^= self.0 << 17;
        self.0 % bound
    }
}

/// Chain of `n` kernels, each reading one memory channel and writing one.
pub fn chain_module(n: usize, seed: u64) -> OlympusModule {
    let mut rng = Lcg(seed | 1);
    let mut ops = Vec::new();
    for i in 0..n {
        let input = ValueId(2 * i as u32);
        let output = ValueId(2 * i as u32 + 1);
        let width = [8, 16, 32, 64, 72][rng.next(5) as usize];
        ops.push(Op::Channel(ChannelOp::new(
            input,
            format!("in{i}"),
            width,
            ParamType::Stream,
            64 + rng.next(4096),
        )));
        ops.push(Op::Channel(ChannelOp::new(
            output,
            format!("out{i}"),
            width,
            ParamType::Stream,
            64 + rng.next(4096),
        )));
        let ii = 1 + rng.next(8);
        let resources = ResourceVector {
            ff: 500 + rng.next(2000),
            lut: 500 + rng.next(2000),
            bram: rng.next(8),
            uram: 0,
            dsp: rng.next(16),
        };
        ops.push(Op::Kernel(KernelOp::new(
            format!("k{i}"),
            ii + 10,
            ii,
            resources,
            vec![input],
            vec![output],
        )));
    }
    OlympusModule::new(ops)
}

/// `n` arrays with widths below `bus`.
pub fn array_specs(n: usize, bus: u32, seed: u64) -> Vec<ArraySpec> {
    let mut rng = Lcg(seed | 1);
    (0..n)
        .map(|i| {
            ArraySpec::new(
                format!("a{i}"),
                1 + rng.next(bus as u64 - 1) as u32,
                1 + rng.next(3) as u32,
                1024,
            )
        })
        .collect()
}

pub fn u280() -> Platform {
    Platform::load(include_str!("../../../fixtures/u280.toml")).expect("fixture platform")
}
