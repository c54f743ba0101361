use serde::Serialize;

use super::TransformError;
use crate::analysis::{channel_demand, check_sanitized};
use crate::ir::{GraphIndex, OlympusModule, Op};
use crate::platform::Platform;

/// New PC ids for every PC op of a module, all on one memory class.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReassignmentPlan {
    pub class: String,
    /// `(op index of the pc op, new id)`, in op order.
    pub ids: Vec<(usize, u32)>,
    /// Resulting demand per PC id, in bits per cycle.
    pub loads: Vec<f64>,
}

impl ReassignmentPlan {
    pub fn max_load(&self) -> f64 {
        self.loads.iter().copied().fold(0.0, f64::max)
    }
}

/// Longest-processing-time balancing: channels in decreasing demand order
/// (op order among equals) each go to the PC with the least demand, then the
/// fewest channels, then the lowest id.
pub fn plan_reassignment(
    m: &OlympusModule,
    p: &Platform,
    class: &str,
) -> Result<ReassignmentPlan, TransformError> {
    let target = p.class(class)?;
    let index = GraphIndex::build(m);
    check_sanitized(m, &index)?;

    let mut items: Vec<(usize, f64)> = m
        .ops
        .iter()
        .enumerate()
        .filter_map(|(i, op)| match op {
            Op::Pc(pc) => {
                let demand = m
                    .channel(pc.channel)
                    .map_or(0.0, |c| channel_demand(m, &index, c));
                Some((i, demand))
            }
            _ => None,
        })
        .collect();
    // Stable: equal demands keep op order.
    items.sort_by(|a, b| b.1.total_cmp(&a.1));

    let n = target.count as usize;
    let mut loads = vec![0.0f64; n];
    let mut counts = vec![0usize; n];
    let mut ids = Vec::with_capacity(items.len());
    for (op_index, demand) in items {
        let pc = (0..n)
            .min_by(|&a, &b| {
                loads[a]
                    .total_cmp(&loads[b])
                    .then(counts[a].cmp(&counts[b]))
                    .then(a.cmp(&b))
            })
            .expect("class has at least one channel");
        loads[pc] += demand;
        counts[pc] += 1;
        ids.push((op_index, pc as u32));
    }
    ids.sort_unstable();
    Ok(ReassignmentPlan {
        class: target.name.clone(),
        ids,
        loads,
    })
}

/// Spreads the PC ops of a sanitized module over the channels of `class`.
/// Only PC `id` and `class` fields change.
pub fn reassign_channels(
    m: &OlympusModule,
    p: &Platform,
    class: &str,
) -> Result<OlympusModule, TransformError> {
    let plan = plan_reassignment(m, p, class)?;
    let mut out = m.clone();
    for (op_index, id) in &plan.ids {
        if let Op::Pc(pc) = &mut out.ops[*op_index] {
            pc.id = *id;
            pc.class = Some(plan.class.clone());
        }
    }
    Ok(out)
}
