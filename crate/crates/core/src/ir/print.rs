use std::fmt::Write;

use super::{ChannelOp, KernelOp, OlympusModule, Op, PcOp, ValueId};

/// Canonical text: one op per line, fixed attribute order, integer
/// attributes suffixed with `: i64`. An empty module prints as "".
pub fn print_module(m: &OlympusModule) -> String {
    let widths: std::collections::HashMap<ValueId, u32> =
        m.channels().map(|c| (c.result, c.element_width)).collect();
    let ty = |v: &ValueId| match widths.get(v) {
        Some(w) => format!("!olympus.channel<i{w}>"),
        // Unverified module; print something the parser will reject.
        None => "!olympus.channel<i0>".to_string(),
    };

    let mut out = String::new();
    for op in &m.ops {
        match op {
            Op::Channel(c) => print_channel(&mut out, c),
            Op::Kernel(k) => print_kernel(&mut out, k, &ty),
            Op::Pc(p) => print_pc(&mut out, p, &ty),
        }
        out.push('\n');
    }
    out
}

fn quote(s: &str) -> String {
    let mut q = String::with_capacity(s.len() + 2);
    q.push('"');
    for c in s.chars() {
        match c {
            '"' => q.push_str("\\\""),
            '\\' => q.push_str("\\\\"),
            '\n' => q.push_str("\\n"),
            c => q.push(c),
        }
    }
    q.push('"');
    q
}

fn print_channel(out: &mut String, c: &ChannelOp) {
    let w = c.element_width;
    write!(
        out,
        "{} = \"olympus.make_channel\"() {{name = {}, encapsulatedType = i{w}, paramType = \"{}\", depth = {} : i64",
        c.result,
        quote(&c.name),
        c.param_type,
        c.depth
    )
    .unwrap();
    if let Some(l) = &c.layout {
        write!(out, ", layout = \"{l}\"").unwrap();
    }
    if let Some(v) = c.valid {
        write!(out, ", valid = {v} : i64").unwrap();
    }
    if let Some(i) = c.plm_instance {
        write!(out, ", plm_instance = {i} : i64").unwrap();
    }
    write!(out, "}} : () -> !olympus.channel<i{w}>").unwrap();
}

fn print_kernel(out: &mut String, k: &KernelOp, ty: &dyn Fn(&ValueId) -> String) {
    let operands: Vec<String> = k.operands.iter().map(|v| v.to_string()).collect();
    let r = &k.resources;
    write!(
        out,
        "\"olympus.kernel\"({}) {{callee = {}, latency = {} : i64, ii = {} : i64, ff = {} : i64, lut = {} : i64, bram = {} : i64, uram = {} : i64, dsp = {} : i64, operand_segment_sizes = array<i32: {}, {}>",
        operands.join(", "),
        quote(&k.callee),
        k.latency,
        k.ii,
        r.ff,
        r.lut,
        r.bram,
        r.uram,
        r.dsp,
        k.segment_sizes[0],
        k.segment_sizes[1]
    )
    .unwrap();
    if let Some(g) = &k.group {
        write!(out, ", group = {}", quote(g)).unwrap();
    }
    if let Some(l) = k.lane {
        write!(out, ", lane = {l} : i64").unwrap();
    }
    if let Some(i) = k.replica_index {
        write!(out, ", replica_index = {i} : i64").unwrap();
    }
    let types: Vec<String> = k.operands.iter().map(ty).collect();
    write!(out, "}} : ({}) -> ()", types.join(", ")).unwrap();
}

fn print_pc(out: &mut String, p: &PcOp, ty: &dyn Fn(&ValueId) -> String) {
    write!(
        out,
        "\"olympus.pc\"({}) {{id = {} : i64, direction = \"{}\"",
        p.channel, p.id, p.direction
    )
    .unwrap();
    if let Some(c) = &p.class {
        write!(out, ", class = {}", quote(c)).unwrap();
    }
    write!(out, "}} : ({}) -> ()", ty(&p.channel)).unwrap();
}
