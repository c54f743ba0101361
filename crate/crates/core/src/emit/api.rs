use std::collections::BTreeSet;
use std::fmt::Write;

use serde::Serialize;

use crate::ir::{Direction, GraphIndex, KernelOp, OlympusModule, Op};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum HostFunctionKind {
    Init,
    CreateBuffer,
    /// Host to device.
    Write,
    /// Device to host.
    Read,
    Run,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HostFunction {
    pub name: String,
    pub kind: HostFunctionKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub channel: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bytes: Option<u64>,
    /// Number of replicas; functions take a replica index when above 1.
    pub replicas: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HostApi {
    pub version: u32,
    pub functions: Vec<HostFunction>,
}

/// Callee with any `_r<k>` replica suffix removed.
fn family(k: &KernelOp) -> &str {
    match k.replica_index {
        Some(r) if r > 0 => k
            .callee
            .strip_suffix(&format!("_r{r}"))
            .unwrap_or(&k.callee),
        _ => &k.callee,
    }
}

fn ident(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// Host-side functions per kernel family: one buffer and one transfer per
/// memory-facing channel of the first replica, then `run_<callee>`.
/// Channels read by kernels get `write_<ch>`, channels written by kernels
/// get `read_<ch>`.
pub fn emit_host_api(m: &OlympusModule) -> HostApi {
    let index = GraphIndex::build(m);
    let mut functions = vec![HostFunction {
        name: "init".into(),
        kind: HostFunctionKind::Init,
        kernel: None,
        channel: None,
        bytes: None,
        replicas: 1,
    }];

    let mut families: Vec<String> = Vec::new();
    for k in m.kernels() {
        let f = family(k).to_string();
        if !families.contains(&f) {
            families.push(f);
        }
    }
    let mut seen_channels = BTreeSet::new();
    for fam in families {
        let replicas = m
            .kernels()
            .filter(|k| family(k) == fam)
            .map(|k| k.replica_index.unwrap_or(0) + 1)
            .max()
            .unwrap_or(1);
        let first_replica = |i: usize| matches!(&m.ops[i], Op::Kernel(k) if family(k) == fam && k.replica_index.unwrap_or(0) == 0);
        let mut buffers = Vec::new();
        let mut writes = Vec::new();
        let mut reads = Vec::new();
        for c in m.channels() {
            let info = &index.channels[&c.result];
            let Some(direction) = info.direction() else {
                continue;
            };
            if !info.kernels().iter().any(|&i| first_replica(i)) || !seen_channels.insert(c.result)
            {
                continue;
            }
            let name = ident(&c.name);
            let entry = |prefix: &str, kind| HostFunction {
                name: format!("{prefix}_{name}"),
                kind,
                kernel: Some(fam.clone()),
                channel: Some(c.name.clone()),
                bytes: Some(c.size_bytes()),
                replicas,
            };
            buffers.push(entry("create_buffer", HostFunctionKind::CreateBuffer));
            match direction {
                Direction::Read => writes.push(entry("write", HostFunctionKind::Write)),
                Direction::Write => reads.push(entry("read", HostFunctionKind::Read)),
            }
        }
        functions.extend(buffers);
        functions.extend(writes);
        functions.extend(reads);
        functions.push(HostFunction {
            name: format!("run_{}", ident(&fam)),
            kind: HostFunctionKind::Run,
            kernel: Some(fam.clone()),
            channel: None,
            bytes: None,
            replicas,
        });
    }
    HostApi {
        version: 1,
        functions,
    }
}

impl HostApi {
    pub fn names(&self) -> Vec<&str> {
        self.functions.iter().map(|f| f.name.as_str()).collect()
    }

    /// C header listing.
    pub fn header(&self) -> String {
        let mut out = String::new();
        out.push_str("#ifndef OLYMPUS_HOST_API_H\n#define OLYMPUS_HOST_API_H\n\n");
        out.push_str("#include <stddef.h>\n\n");
        out.push_str("typedef struct olympus_buffer olympus_buffer;\n\n");
        let mut current: Option<&str> = None;
        for f in &self.functions {
            if f.kernel.as_deref() != current {
                current = f.kernel.as_deref();
                if let Some(k) = current {
                    let replicas = match f.replicas {
                        1 => String::new(),
                        n => format!(", {n} replicas"),
                    };
                    writeln!(out, "\n/* kernel {k}{replicas} */").unwrap();
                }
            }
            let replica = if f.replicas > 1 {
                "unsigned replica"
            } else {
                ""
            };
            let with = |rest: &str| match (replica.is_empty(), rest.is_empty()) {
                (true, true) => "void".to_string(),
                (true, false) => rest.to_string(),
                (false, true) => replica.to_string(),
                (false, false) => format!("{replica}, {rest}"),
            };
            let line = match f.kind {
                HostFunctionKind::Init => format!("int {}(const char *binary_path);", f.name),
                HostFunctionKind::CreateBuffer => format!(
                    "olympus_buffer *{}({}); /* {} bytes */",
                    f.name,
                    with(""),
                    f.bytes.unwrap_or(0)
                ),
                HostFunctionKind::Write => format!(
                    "int {}({});",
                    f.name,
                    with("olympus_buffer *buffer, const void *src, size_t bytes")
                ),
                HostFunctionKind::Read => format!(
                    "int {}({});",
                    f.name,
                    with("olympus_buffer *buffer, void *dst, size_t bytes")
                ),
                HostFunctionKind::Run => format!("int {}({});", f.name, with("")),
            };
            out.push_str(&line);
            out.push('\n');
        }
        out.push_str("\n#endif\n");
        out
    }

    pub fn json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("api serializes");
        text.push('\n');
        text
    }
}
