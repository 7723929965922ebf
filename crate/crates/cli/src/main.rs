//! `agmon` — build, verify, and run assumption monitors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};

use agmon_core::annotate::annotate;
use agmon_core::case_study;
use agmon_core::effects::build_external_efsm;
use agmon_core::files;
use agmon_core::inclusion::{
    check_inclusion, undetectable_deviations, CheckOptions, DeviationOptions, VerdictStatus,
};
use agmon_core::monitor::{run_trace, AlarmPolicy, StructuralViolationPolicy};
use agmon_core::skeleton::{extract_skeleton, ExtractionMode};

const EXIT_USAGE: u8 = 64;
const EXIT_BAD_INPUT: u8 = 65;

#[derive(Parser)]
#[command(
    name = "agmon",
    version,
    about = "Assumption monitors for assume-guarantee contracts: extract from CFGs, \
             model I/O API effects, verify language inclusion, and monitor event streams"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    /// Directive transitions only.
    Plain,
    /// Extended fragments modeling I/O API effects.
    ApiEffects,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PolicyArg {
    /// Skip events with no matching channel and keep monitoring.
    DropEvent,
    /// End the session on the first structural violation.
    Halt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Text,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Extract a type-labeled skeleton NFA from a control-flow graph.
    Extract {
        #[arg(long)]
        cfg: PathBuf,
        #[arg(long)]
        apis: PathBuf,
        #[arg(long, value_enum, default_value = "plain")]
        mode: ModeArg,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Bind channels, guards, and updates to a skeleton, producing an EFSM.
    Annotate {
        #[arg(long)]
        skeleton: PathBuf,
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Extract with API effects and annotate in one step.
    BuildExternal {
        #[arg(long)]
        cfg: PathBuf,
        #[arg(long)]
        apis: PathBuf,
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check that every trace of the assumption is a trace of the candidate.
    /// Exit code: 0 verified, 1 falsified, 2 unknown.
    Verify {
        #[arg(long)]
        assumption: PathBuf,
        #[arg(long)]
        candidate: PathBuf,
        /// Maximum events per differential trace.
        #[arg(long, default_value_t = 50)]
        bound: usize,
        /// Differential traces to try when implication falls short.
        #[arg(long, default_value_t = 2000)]
        traces: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, value_enum, default_value = "text")]
        format: FormatArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Enumerate deviations accepted by the candidate but rejected by the
    /// assumption — the monitor's blind spot.
    Deviations {
        #[arg(long)]
        assumption: PathBuf,
        #[arg(long)]
        candidate: PathBuf,
        /// Maximum symbol-string length explored.
        #[arg(long, default_value_t = 5)]
        bound: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, value_enum, default_value = "text")]
        format: FormatArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an EFSM as a monitor over a JSON Lines event stream.
    /// Exit code: 0 no alarms, 1 alarms raised.
    Monitor {
        #[arg(long)]
        efsm: PathBuf,
        #[arg(long)]
        events: PathBuf,
        #[arg(long, value_enum, default_value = "drop-event")]
        policy: PolicyArg,
        #[arg(long, value_enum, default_value = "text")]
        format: FormatArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reproduce the GPS case study: the deviation-detection matrix.
    CaseStudy {
        /// Points per generated trace.
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, value_enum, default_value = "text")]
        format: FormatArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn emit(out: &Option<PathBuf>, text: &str) -> std::io::Result<()> {
    match out {
        Some(path) => std::fs::write(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn emit_json<T: serde::Serialize>(out: &Option<PathBuf>, value: &T) -> agmon_core::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    emit(out, &text).map_err(|source| agmon_core::Error::Io {
        file: out
            .as_ref()
            .map(|p| p.display().to_string())
            .unwrap_or_else(|| "<stdout>".to_string()),
        source,
    })
}

fn print_cfg_warnings(path: &Path) -> agmon_core::Result<()> {
    let cfg = files::load_cfg(path)?;
    for w in cfg.validate()? {
        eprintln!("warning: {}: {w}", path.display());
    }
    Ok(())
}

fn run(cli: Cli) -> agmon_core::Result<u8> {
    match cli.command {
        Command::Extract {
            cfg,
            apis,
            mode,
            out,
        } => {
            print_cfg_warnings(&cfg)?;
            let graph = files::load_cfg(&cfg)?;
            let table = files::load_api_table(&apis)?;
            let mode = match mode {
                ModeArg::Plain => ExtractionMode::Plain,
                ModeArg::ApiEffects => ExtractionMode::ApiEffects,
            };
            let skeleton = extract_skeleton(&graph, &table, mode)?;
            emit_json(&out, &skeleton)?;
            Ok(0)
        }
        Command::Annotate {
            skeleton,
            spec,
            out,
        } => {
            let sk = files::load_skeleton(&skeleton)?;
            let annotations = files::load_annotations(&spec)?;
            let machine = annotate(&sk, &annotations)?;
            emit_json(&out, &machine)?;
            Ok(0)
        }
        Command::BuildExternal {
            cfg,
            apis,
            spec,
            out,
        } => {
            print_cfg_warnings(&cfg)?;
            let graph = files::load_cfg(&cfg)?;
            let table = files::load_api_table(&apis)?;
            let annotations = files::load_annotations(&spec)?;
            let machine = build_external_efsm(&graph, &table, &annotations)?;
            emit_json(&out, &machine)?;
            Ok(0)
        }
        Command::Verify {
            assumption,
            candidate,
            bound,
            traces,
            seed,
            format,
            out,
        } => {
            let a = files::load_efsm(&assumption)?;
            let b = files::load_efsm(&candidate)?;
            let mut opts = CheckOptions::seeded(seed);
            opts.max_events = bound;
            opts.traces = traces;
            let verdict = check_inclusion(&a, &b, &opts)?;
            match format {
                FormatArg::Json => emit_json(&out, &verdict)?,
                FormatArg::Text => {
                    let mut text = format!("{:?}\n{}\n", verdict.status, verdict.explanation);
                    if let Some(w) = &verdict.witness {
                        text.push_str(&format!("witness: {w}\n"));
                    }
                    for o in &verdict.obligations {
                        text.push_str(&format!("unproven: {o}\n"));
                    }
                    emit(&out, &text).map_err(|source| agmon_core::Error::Io {
                        file: "<out>".to_string(),
                        source,
                    })?;
                }
            }
            Ok(match verdict.status {
                VerdictStatus::Verified => 0,
                VerdictStatus::Falsified => 1,
                VerdictStatus::Unknown => 2,
            })
        }
        Command::Deviations {
            assumption,
            candidate,
            bound,
            seed,
            format,
            out,
        } => {
            let a = files::load_efsm(&assumption)?;
            let b = files::load_efsm(&candidate)?;
            let report = undetectable_deviations(&a, &b, bound, &DeviationOptions::seeded(seed))?;
            match format {
                FormatArg::Json => emit_json(&out, &report)?,
                FormatArg::Text => {
                    let mut text = format!(
                        "{} undetectable deviation witness(es) up to length {}\n",
                        report.witnesses.len(),
                        report.bound
                    );
                    for w in &report.witnesses {
                        let symbols: Vec<String> =
                            w.symbols.iter().map(|s| s.to_string()).collect();
                        text.push_str(&format!("[{:?}] {}", w.kind, symbols.join(" ")));
                        if let Some(t) = &w.trace {
                            text.push_str(&format!("  e.g. {t}"));
                        }
                        text.push('\n');
                    }
                    emit(&out, &text).map_err(|source| agmon_core::Error::Io {
                        file: "<out>".to_string(),
                        source,
                    })?;
                }
            }
            Ok(0)
        }
        Command::Monitor {
            efsm,
            events,
            policy,
            format,
            out,
        } => {
            let machine = files::load_efsm(&efsm)?;
            let trace = files::load_events(&events)?;
            let alarm_policy = AlarmPolicy {
                on_structural_violation: match policy {
                    PolicyArg::DropEvent => StructuralViolationPolicy::DropEvent,
                    PolicyArg::Halt => StructuralViolationPolicy::Halt,
                },
                ..AlarmPolicy::default()
            };
            let report = run_trace(&machine, &trace, alarm_policy)?;
            match format {
                FormatArg::Json => emit_json(&out, &report)?,
                FormatArg::Text => {
                    let mut text = report.human_log();
                    if !text.is_empty() {
                        text.push('\n');
                    }
                    text.push_str(&format!(
                        "{} event(s) observed, {} alarm(s), final locations {{{}}}\n",
                        report.events_observed,
                        report.alarms.len(),
                        report.final_locations.join(",")
                    ));
                    emit(&out, &text).map_err(|source| agmon_core::Error::Io {
                        file: "<out>".to_string(),
                        source,
                    })?;
                }
            }
            Ok(if report.alarms.is_empty() { 0 } else { 1 })
        }
        Command::CaseStudy {
            n,
            seed,
            format,
            out,
        } => {
            let matrix = case_study::detection_matrix(n, seed)?;
            match format {
                FormatArg::Json => emit_json(&out, &matrix)?,
                FormatArg::Text => {
                    emit(&out, &matrix.to_string()).map_err(|source| agmon_core::Error::Io {
                        file: "<out>".to_string(),
                        source,
                    })?;
                }
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_BAD_INPUT)
        }
    }
}
