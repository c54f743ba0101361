use std::fmt::Write;

use super::{pc_target, side_instances, EmitError, EmitOptions};
use crate::analysis::check_sanitized;
use crate::ir::{GraphIndex, OlympusModule};
use crate::platform::Platform;

/// `[connectivity]` section with one `sp=` line per kernel instance and
/// memory-facing channel, sorted by kernel then channel name.
pub fn emit_cfg(
    m: &OlympusModule,
    p: &Platform,
    options: &EmitOptions,
) -> Result<String, EmitError> {
    let index = GraphIndex::build(m);
    check_sanitized(m, &index)?;
    let mut lines: Vec<(String, String, String)> = Vec::new();
    for pc in m.pcs() {
        let class = pc_target(m, pc, p)?;
        let (Some(channel), Some(info)) = (m.channel(pc.channel), index.info(pc.channel)) else {
            continue;
        };
        let target = format!("{}[{}]", class.name, pc.id);
        for kernel in side_instances(m, info.kernels()) {
            lines.push((kernel, channel.name.clone(), target.clone()));
        }
    }
    lines.sort();
    lines.dedup();
    let mut out = String::from("[connectivity]\n");
    for (kernel, channel, target) in lines {
        writeln!(
            out,
            "sp={kernel}{}.{}{channel}:{target}",
            options.instance_suffix, options.interface_prefix
        )
        .unwrap();
    }
    Ok(out)
}
