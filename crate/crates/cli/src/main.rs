use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use olympus::emit::{emit_build_plan, emit_cfg, emit_dot, emit_host_api, EmitOptions};
use olympus::ir::parse_module_with_lines;
use olympus::{
    print_module, run_pipeline, verify_module, LifetimeSpec, PassContext, PassPipeline, Platform,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum)]
enum EmitTarget {
    Ir,
    Cfg,
    Dot,
    Plan,
    Api,
    Report,
}

/// Optimize an Olympus dataflow graph for a memory platform and emit
/// build artifacts.
#[derive(Debug, Parser)]
#[command(name = "olympus-opt", version, arg_required_else_help = true)]
struct Cli {
    /// Input module (.mlir).
    input: PathBuf,
    /// Platform description (TOML).
    #[arg(long)]
    platform: PathBuf,
    /// Buffer lifetime sidecar for PLM sharing.
    #[arg(long)]
    lifetimes: Option<PathBuf>,
    /// Comma-separated pass pipeline, e.g. `sanitize,reassign,replicate[max=4]`.
    #[arg(long, default_value = olympus::pipeline::DEFAULT_PIPELINE)]
    passes: String,
    /// Artifacts to write.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "ir")]
    emit: Vec<EmitTarget>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Reserved; no pass is randomized.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Kernel implementation file recorded in the build plan (repeatable).
    #[arg(long = "kernel")]
    kernels: Vec<String>,
}

struct Failure(Vec<String>);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(vec![e.to_string()])
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure(vec![format!("{}: {e}", path.display())]))
}

fn run(cli: &Cli) -> Result<Vec<String>, Failure> {
    let pipeline = PassPipeline::parse(&cli.passes)?;
    let platform_text = read(&cli.platform)?;
    let platform = Platform::load(&platform_text)
        .map_err(|e| Failure(vec![format!("{}: {e}", cli.platform.display())]))?;
    let lifetimes = match &cli.lifetimes {
        Some(path) => Some(
            LifetimeSpec::parse(&read(path)?)
                .map_err(|e| Failure(vec![format!("{}: {e}", path.display())]))?,
        ),
        None => None,
    };

    let input = cli.input.display().to_string();
    let parsed = parse_module_with_lines(&read(&cli.input)?)
        .map_err(|e| Failure(vec![format!("{input}:{e}")]))?;
    let diags = verify_module(&parsed.module);
    if !diags.is_empty() {
        return Err(Failure(
            diags
                .iter()
                .map(|d| {
                    let line = parsed.lines.get(d.op_index).copied().unwrap_or(0);
                    format!("{input}:{line}: [{}] {} ({})", d.rule, d.message, d.op)
                })
                .collect(),
        ));
    }

    let ctx = PassContext {
        platform: &platform,
        lifetimes: lifetimes.as_ref(),
    };
    let (module, report) = run_pipeline(&parsed.module, &ctx, &pipeline)?;
    let warnings = report
        .entries
        .iter()
        .flat_map(|e| e.warnings.clone())
        .collect();

    let options = EmitOptions {
        kernel_sources: cli.kernels.clone(),
        ..EmitOptions::default()
    };
    let stem = cli
        .input
        .file_stem()
        .map_or_else(|| "out".to_string(), |s| s.to_string_lossy().into_owned());
    let mut targets = cli.emit.clone();
    targets.sort();
    targets.dedup();
    let mut files: Vec<(String, String)> = Vec::new();
    for target in targets {
        match target {
            EmitTarget::Ir => files.push((format!("{stem}.opt.mlir"), print_module(&module))),
            EmitTarget::Cfg => files.push((
                format!("{stem}.cfg"),
                emit_cfg(&module, &platform, &options)?,
            )),
            EmitTarget::Dot => files.push((format!("{stem}.dot"), emit_dot(&module))),
            EmitTarget::Plan => files.push((
                format!("{stem}.plan.json"),
                emit_build_plan(&module, &platform, lifetimes.as_ref(), &options)?,
            )),
            EmitTarget::Api => {
                let api = emit_host_api(&module);
                files.push((format!("{stem}.api.h"), api.header()));
                files.push((format!("{stem}.api.json"), api.json()));
            }
            EmitTarget::Report => {
                let mut text = serde_json::to_string_pretty(&report)?;
                text.push('\n');
                files.push((format!("{stem}.report.json"), text));
            }
        }
    }
    fs::create_dir_all(&cli.out)
        .map_err(|e| Failure(vec![format!("{}: {e}", cli.out.display())]))?;
    for (name, text) in files {
        let path = cli.out.join(name);
        fs::write(&path, text).map_err(|e| Failure(vec![format!("{}: {e}", path.display())]))?;
    }
    Ok(warnings)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let color = std::env::var("OLYMPUS_COLOR").is_ok_and(|v| v == "1");
    let (error, warning) = if color {
        ("\x1b[1;31merror:\x1b[0m", "\x1b[1;33mwarning:\x1b[0m")
    } else {
        ("error:", "warning:")
    };
    let mut stderr = std::io::stderr().lock();
    match run(&cli) {
        Ok(warnings) => {
            for w in warnings {
                let _ = writeln!(stderr, "{warning} {w}");
            }
            ExitCode::SUCCESS
        }
        Err(Failure(messages)) => {
            for m in messages {
                let _ = writeln!(stderr, "{error} {m}");
            }
            ExitCode::from(1)
        }
    }
}
