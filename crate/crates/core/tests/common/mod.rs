#![allow(dead_code)]

use std::path::PathBuf;

use olympus::ir::{parse_module, OlympusModule};
use olympus::Platform;

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

pub fn fixture(name: &str) -> String {
    std::fs::read_to_string(fixture_path(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn module(name: &str) -> OlympusModule {
    parse_module(&fixture(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn u280() -> Platform {
    Platform::load(&fixture("u280.toml")).unwrap()
}

/// Single-class platform with `count` pseudo-channels and ample resources.
pub fn small_platform(count: u32, width: u32) -> Platform {
    Platform::load(&format!(
        "name = \"test\"\n\
         [memory.HBM]\ncount = {count}\nwidth_bits = {width}\nclock_mhz = 300\ncapacity_mb = 256\n\
         [resources]\nff = 1000000\nlut = 1000000\nbram = 4000\nuram = 1000\ndsp = 4000\n"
    ))
    .unwrap()
}
