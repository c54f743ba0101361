//! Pass pipeline: sanitize, then the analyses and transformations in the
//! order the user asks for.
//!
//! Pipeline text is a comma-separated list of pass names, each with optional
//! `[key=value;...]` options:
//!
//! ```text
//! sanitize,reassign[class=HBM],iris[bus=128;group=a+b],replicate[max=4]
//! ```

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::analysis::{
    bandwidth_analysis, resource_analysis, AnalysisError, BandwidthReport, ResourceReport,
};
use crate::ir::{verify_module, Diagnostic, GraphIndex, OlympusModule, Op, PcOp};
use crate::iris::{apply_iris, default_groups, IrisError, IrisOptions, DEFAULT_K_MAX};
use crate::layout::Layout;
use crate::platform::{Platform, PlatformError};
use crate::plm::{share_plm, LifetimeSpec, PlmError, SharingPlan};
use crate::transforms::{
    reassign_channels, replicate, widen_bus, ReplicationFactor, TransformError,
};

pub const DEFAULT_PIPELINE: &str = "sanitize,reassign,widen,iris,plm,replicate";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("unknown pass '{0}'")]
    UnknownPass(String),
    #[error("pass '{pass}': {reason}")]
    BadOption { pass: String, reason: String },
    #[error("malformed pipeline: {0}")]
    Syntax(String),
    #[error("pass {index} ({pass}): {source}")]
    Pass {
        index: usize,
        pass: String,
        #[source]
        source: PassError,
    },
}

#[derive(Debug, Error)]
pub enum PassError {
    #[error("input does not verify: {}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Diagnostic>),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Platform(#[from] PlatformError),
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error(transparent)]
    Iris(#[from] IrisError),
    #[error(transparent)]
    Plm(#[from] PlmError),
}

/// Attaches a single-element layout to every channel and a PC node (id 0)
/// to every channel with kernels on exactly one side. PC nodes go right
/// after their channel's definition. Already-sanitized modules come back
/// unchanged.
pub fn sanitize(m: &OlympusModule) -> Result<OlympusModule, PassError> {
    let diags = verify_module(m);
    if !diags.is_empty() {
        return Err(PassError::Invalid(diags));
    }
    let index = GraphIndex::build(m);
    let mut ops = Vec::with_capacity(m.ops.len());
    for op in &m.ops {
        let Op::Channel(c) = op else {
            ops.push(op.clone());
            continue;
        };
        let mut c = c.clone();
        if c.layout.is_none() {
            c.layout = Some(Layout::single_element(&c.name, c.element_width, c.depth));
        }
        let info = &index.channels[&c.result];
        let pc = match info.direction() {
            Some(direction) if info.pcs.is_empty() => Some(PcOp {
                channel: c.result,
                id: 0,
                direction,
                class: None,
            }),
            _ => None,
        };
        ops.push(Op::Channel(c));
        ops.extend(pc.map(Op::Pc));
    }
    Ok(OlympusModule::new(ops))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Pass {
    Sanitize,
    Reassign {
        class: Option<String>,
    },
    Replicate(ReplicationFactor),
    Widen {
        bus: Option<u32>,
        class: Option<String>,
    },
    Iris {
        bus: Option<u32>,
        class: Option<String>,
        groups: Option<Vec<Vec<String>>>,
        rates: Option<Vec<Vec<u32>>>,
        k_max: u32,
    },
    Plm,
}

impl Pass {
    pub fn name(&self) -> &'static str {
        match self {
            Pass::Sanitize => "sanitize",
            Pass::Reassign { .. } => "reassign",
            Pass::Replicate(_) => "replicate",
            Pass::Widen { .. } => "widen",
            Pass::Iris { .. } => "iris",
            Pass::Plm => "plm",
        }
    }

    fn parse(name: &str, options: &[(String, Option<String>)]) -> Result<Pass, PipelineError> {
        let bad = |reason: String| PipelineError::BadOption {
            pass: name.to_string(),
            reason,
        };
        let value = |key: &str, v: &Option<String>| {
            v.clone()
                .ok_or_else(|| bad(format!("option '{key}' needs a value")))
        };
        let number = |key: &str, v: &Option<String>| -> Result<u64, PipelineError> {
            value(key, v)?
                .parse::<u64>()
                .map_err(|_| bad(format!("option '{key}' needs a non-negative integer")))
        };
        let unknown = |key: &str| bad(format!("unknown option '{key}'"));

        match name {
            "sanitize" | "plm" => match options.first() {
                Some((k, _)) => Err(unknown(k)),
                None if name == "plm" => Ok(Pass::Plm),
                None => Ok(Pass::Sanitize),
            },
            "reassign" => {
                let mut class = None;
                for (k, v) in options {
                    match k.as_str() {
                        "class" => class = Some(value(k, v)?),
                        _ => return Err(unknown(k)),
                    }
                }
                Ok(Pass::Reassign { class })
            }
            "replicate" => {
                let mut factor = ReplicationFactor::Max { cap: None };
                for (k, v) in options {
                    factor = match (k.as_str(), v) {
                        ("max", None) => ReplicationFactor::Max { cap: None },
                        ("max", Some(_)) => ReplicationFactor::Max {
                            cap: Some(number(k, v)?),
                        },
                        ("factor", _) => ReplicationFactor::Exact(number(k, v)?),
                        _ => return Err(unknown(k)),
                    };
                }
                Ok(Pass::Replicate(factor))
            }
            "widen" => {
                let (mut bus, mut class) = (None, None);
                for (k, v) in options {
                    match k.as_str() {
                        "bus" => bus = Some(to_u32(number(k, v)?, &bad)?),
                        "class" => class = Some(value(k, v)?),
                        _ => return Err(unknown(k)),
                    }
                }
                Ok(Pass::Widen { bus, class })
            }
            "iris" => {
                let (mut bus, mut class, mut groups, mut rates) = (None, None, None, None);
                let mut k_max = DEFAULT_K_MAX;
                for (k, v) in options {
                    match k.as_str() {
                        "bus" => bus = Some(to_u32(number(k, v)?, &bad)?),
                        "class" => class = Some(value(k, v)?),
                        "kmax" => k_max = to_u32(number(k, v)?, &bad)?,
                        "group" => {
                            groups = Some(
                                value(k, v)?
                                    .split('|')
                                    .map(|g| g.split('+').map(str::to_string).collect())
                                    .collect::<Vec<Vec<String>>>(),
                            )
                        }
                        "rates" => {
                            let text = value(k, v)?;
                            let parsed: Result<Vec<Vec<u32>>, _> = text
                                .split('|')
                                .map(|g| g.split('+').map(str::parse::<u32>).collect())
                                .collect();
                            rates = Some(
                                parsed.map_err(|_| bad("option 'rates' needs integers".into()))?,
                            );
                        }
                        _ => return Err(unknown(k)),
                    }
                }
                if rates.is_some() && groups.is_none() {
                    return Err(bad("option 'rates' requires 'group'".into()));
                }
                if let (Some(g), Some(r)) = (&groups, &rates) {
                    if g.len() != r.len() {
                        return Err(bad("'rates' must list one entry per group".into()));
                    }
                }
                Ok(Pass::Iris {
                    bus,
                    class,
                    groups,
                    rates,
                    k_max,
                })
            }
            other => Err(PipelineError::UnknownPass(other.to_string())),
        }
    }
}

fn to_u32(v: u64, bad: &dyn Fn(String) -> PipelineError) -> Result<u32, PipelineError> {
    u32::try_from(v).map_err(|_| bad(format!("{v} is out of range")))
}

impl fmt::Display for Pass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut opts: Vec<String> = Vec::new();
        match self {
            Pass::Sanitize | Pass::Plm => {}
            Pass::Reassign { class } => opts.extend(class.iter().map(|c| format!("class={c}"))),
            Pass::Replicate(ReplicationFactor::Max { cap: None }) => {}
            Pass::Replicate(ReplicationFactor::Max { cap: Some(c) }) => {
                opts.push(format!("max={c}"))
            }
            Pass::Replicate(ReplicationFactor::Exact(n)) => opts.push(format!("factor={n}")),
            Pass::Widen { bus, class } => {
                opts.extend(bus.iter().map(|b| format!("bus={b}")));
                opts.extend(class.iter().map(|c| format!("class={c}")));
            }
            Pass::Iris {
                bus,
                class,
                groups,
                rates,
                k_max,
            } => {
                opts.extend(bus.iter().map(|b| format!("bus={b}")));
                opts.extend(class.iter().map(|c| format!("class={c}")));
                if let Some(g) = groups {
                    let g: Vec<String> = g.iter().map(|g| g.join("+")).collect();
                    opts.push(format!("group={}", g.join("|")));
                }
                if let Some(r) = rates {
                    let r: Vec<String> = r
                        .iter()
                        .map(|g| g.iter().map(u32::to_string).collect::<Vec<_>>().join("+"))
                        .collect();
                    opts.push(format!("rates={}", r.join("|")));
                }
                if *k_max != DEFAULT_K_MAX {
                    opts.push(format!("kmax={k_max}"));
                }
            }
        }
        f.write_str(self.name())?;
        if !opts.is_empty() {
            write!(f, "[{}]", opts.join(";"))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PassPipeline {
    pub passes: Vec<Pass>,
}

impl PassPipeline {
    pub fn parse(text: &str) -> Result<PassPipeline, PipelineError> {
        let mut passes = Vec::new();
        for item in split_top_level(text)? {
            let item = item.trim();
            if item.is_empty() {
                continue;
            }
            let (name, options) = match item.split_once('[') {
                Some((name, rest)) => {
                    let body = rest
                        .strip_suffix(']')
                        .ok_or_else(|| PipelineError::Syntax(format!("missing ']' in '{item}'")))?;
                    let options = body
                        .split(';')
                        .map(str::trim)
                        .filter(|o| !o.is_empty())
                        .map(|o| match o.split_once('=') {
                            Some((k, v)) => (k.trim().to_string(), Some(v.trim().to_string())),
                            None => (o.to_string(), None),
                        })
                        .collect::<Vec<_>>();
                    (name.trim(), options)
                }
                None => (item, Vec::new()),
            };
            passes.push(Pass::parse(name, &options)?);
        }
        Ok(PassPipeline { passes })
    }

    pub fn default_pipeline() -> PassPipeline {
        PassPipeline::parse(DEFAULT_PIPELINE).expect("default pipeline parses")
    }
}

impl fmt::Display for PassPipeline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<String> = self.passes.iter().map(Pass::to_string).collect();
        f.write_str(&names.join(","))
    }
}

fn split_top_level(text: &str) -> Result<Vec<&str>, PipelineError> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, ch) in text.char_indices() {
        match ch {
            '[' => depth += 1,
            ']' => {
                depth -= 1;
                if depth < 0 {
                    return Err(PipelineError::Syntax("unbalanced ']'".into()));
                }
            }
            ',' if depth == 0 => {
                out.push(&text[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    if depth != 0 {
        return Err(PipelineError::Syntax("unbalanced '['".into()));
    }
    out.push(&text[start..]);
    Ok(out)
}

/// Inputs the passes may need besides the module.
#[derive(Debug, Clone, Copy)]
pub struct PassContext<'a> {
    pub platform: &'a Platform,
    pub lifetimes: Option<&'a LifetimeSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Snapshot {
    pub ops: usize,
    pub channels: usize,
    pub kernels: usize,
    pub pcs: usize,
    /// `None` until the module is sanitized.
    pub bandwidth: Option<BandwidthReport>,
    pub resources: ResourceReport,
}

impl Snapshot {
    pub fn take(m: &OlympusModule, p: &Platform) -> Snapshot {
        Snapshot {
            ops: m.ops.len(),
            channels: m.channels().count(),
            kernels: m.kernels().count(),
            pcs: m.pcs().count(),
            bandwidth: bandwidth_analysis(m, p).ok(),
            resources: resource_analysis(m, p),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PassRecord {
    pub index: usize,
    pub pass: String,
    pub before: Snapshot,
    pub after: Snapshot,
    pub changes: Vec<String>,
    pub warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub plm_plan: Option<SharingPlan>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PipelineReport {
    pub pipeline: String,
    pub entries: Vec<PassRecord>,
}

pub fn run_pipeline(
    m: &OlympusModule,
    ctx: &PassContext<'_>,
    pipe: &PassPipeline,
) -> Result<(OlympusModule, PipelineReport), PipelineError> {
    let mut report = PipelineReport {
        pipeline: pipe.to_string(),
        entries: Vec::new(),
    };
    let mut current = m.clone();
    let mut before = pipe
        .passes
        .first()
        .map(|_| Snapshot::take(&current, ctx.platform));
    for (index, pass) in pipe.passes.iter().enumerate() {
        let wrap = |source: PassError| PipelineError::Pass {
            index,
            pass: pass.to_string(),
            source,
        };
        let (next, warnings, plm_plan) = run_pass(&current, ctx, pass).map_err(wrap)?;
        let diags = verify_module(&next);
        if !diags.is_empty() {
            return Err(wrap(PassError::Invalid(diags)));
        }
        let after = Snapshot::take(&next, ctx.platform);
        report.entries.push(PassRecord {
            index,
            pass: pass.to_string(),
            before: before.take().expect("snapshot"),
            after: after.clone(),
            changes: describe_changes(&current, &next),
            warnings,
            plm_plan,
        });
        before = Some(after);
        current = next;
    }
    Ok((current, report))
}

type PassOutput = (OlympusModule, Vec<String>, Option<SharingPlan>);

fn run_pass(
    m: &OlympusModule,
    ctx: &PassContext<'_>,
    pass: &Pass,
) -> Result<PassOutput, PassError> {
    let p = ctx.platform;
    let class_name = |class: &Option<String>| -> Result<String, PassError> {
        Ok(p.resolve_class(class.as_deref())?.name.clone())
    };
    let out = match pass {
        Pass::Sanitize => sanitize(m)?,
        Pass::Reassign { class } => reassign_channels(m, p, &class_name(class)?)?,
        Pass::Replicate(factor) => replicate(m, p, *factor)?,
        Pass::Widen { bus, class } => {
            let bus = match bus {
                Some(b) => *b,
                None => p.class(&class_name(class)?)?.width,
            };
            widen_bus(m, p, bus)?
        }
        Pass::Iris {
            bus,
            class,
            groups,
            rates,
            k_max,
        } => {
            let bus = match bus {
                Some(b) => *b,
                None => p.class(&class_name(class)?)?.width,
            };
            let groups = match groups {
                Some(g) => g.clone(),
                None => default_groups(m, bus),
            };
            let mut out = m.clone();
            for (i, group) in groups.iter().enumerate() {
                let options = IrisOptions {
                    rates: rates.as_ref().map(|r| r[i].clone()),
                    k_max: *k_max,
                };
                out = apply_iris(&out, group, bus, &options)?;
            }
            out
        }
        Pass::Plm => {
            let empty = LifetimeSpec::default();
            let (out, plan) = share_plm(m, ctx.lifetimes.unwrap_or(&empty))?;
            let mut warnings = plan.warnings.clone();
            if ctx.lifetimes.is_none() && !plan.assignment.is_empty() {
                warnings.insert(
                    0,
                    "no lifetime file given; small buffers kept unshared".into(),
                );
            }
            return Ok((out, warnings, Some(plan)));
        }
    };
    Ok((out, Vec::new(), None))
}

fn describe_changes(before: &OlympusModule, after: &OlympusModule) -> Vec<String> {
    let mut out = Vec::new();
    let names = |m: &OlympusModule| -> BTreeMap<String, Option<String>> {
        m.channels()
            .map(|c| (c.name.clone(), c.layout.as_ref().map(Layout::to_string)))
            .collect()
    };
    let (b, a) = (names(before), names(after));
    for name in b.keys().filter(|n| !a.contains_key(*n)) {
        out.push(format!("removed channel `{name}`"));
    }
    for (name, layout) in &a {
        match b.get(name) {
            None => out.push(format!("added channel `{name}`")),
            Some(old) if old != layout => out.push(format!(
                "layout of `{name}`: {}",
                layout.as_deref().unwrap_or("none")
            )),
            _ => {}
        }
    }
    let pcs = |m: &OlympusModule| -> BTreeMap<String, String> {
        m.pcs()
            .filter_map(|pc| {
                let c = m.channel(pc.channel)?;
                Some((
                    c.name.clone(),
                    format!("{}[{}]", pc.class.as_deref().unwrap_or("default"), pc.id),
                ))
            })
            .collect()
    };
    let (pb, pa) = (pcs(before), pcs(after));
    for (name, target) in &pa {
        match pb.get(name) {
            None => out.push(format!("pc for `{name}` at {target}")),
            Some(old) if old != target => out.push(format!("pc for `{name}`: {old} -> {target}")),
            _ => {}
        }
    }
    let kb = before.kernels().count();
    let ka = after.kernels().count();
    if kb != ka {
        out.push(format!("kernels: {kb} -> {ka}"));
    }
    let plm = |m: &OlympusModule| -> BTreeMap<String, u32> {
        m.channels()
            .filter_map(|c| Some((c.name.clone(), c.plm_instance?)))
            .collect()
    };
    for (name, inst) in plm(after) {
        if plm(before).get(&name) != Some(&inst) {
            out.push(format!("`{name}` placed in plm instance {inst}"));
        }
    }
    out
}
