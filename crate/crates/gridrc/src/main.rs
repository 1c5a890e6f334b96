use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use gridrc_core::convert::to_grid_drvs;
use gridrc_core::dataset::GenParams;
use gridrc_core::dsl::{parse_program, run_program};
use gridrc_core::eval::{render_report, EmptyConvention};
use gridrc_core::render::{render_layout, Format};
use gridrc_core::rules::{builtin_demo_techfile, check_rule, TechFile};
use gridrc::agent::backend::load_backend;
use gridrc::agent::{run_generation, write_outputs, Mode, RunConfig};
use gridrc::dataset_dir::{load_dataset, write_dataset};
use gridrc::io::{self, DrvJson};
use gridrc::parallel::{eval_config, evaluate_parallel, pool};
use gridrc::{Error, Result};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "gridrc", version, about = "Grid-based design rule checking workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labeled synthetic layout dataset.
    GenDataset {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        count: usize,
        /// Techfile JSON; the built-in demo deck when omitted.
        #[arg(long)]
        tech: Option<PathBuf>,
        /// Generator parameters JSON.
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Report DRVs of one rule on one layout.
    Check {
        #[arg(long)]
        tech: Option<PathBuf>,
        #[arg(long)]
        rule: String,
        #[arg(long)]
        layout: PathBuf,
        /// Run a drcdsl program instead of the built-in checker.
        #[arg(long)]
        program: Option<PathBuf>,
    },
    /// Convert a physical polygon report to grid DRVs.
    ConvertReport {
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        layout: PathBuf,
        #[arg(long)]
        tech: Option<PathBuf>,
    },
    /// Score a drcdsl program against a dataset's golden DRVs.
    Evaluate {
        #[arg(long)]
        program: PathBuf,
        #[arg(long)]
        rule: String,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        jobs: Option<usize>,
        /// Score of a prediction/golden pair that are both empty.
        #[arg(long, value_enum, default_value = "perfect")]
        empty: EmptyArg,
    },
    /// Draw a layout, optionally with DRVs.
    Render {
        #[arg(long)]
        layout: PathBuf,
        #[arg(long)]
        drvs: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: FormatArg,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Agent commands.
    Agent {
        #[command(subcommand)]
        command: AgentCommand,
    },
}

#[derive(Subcommand)]
enum AgentCommand {
    /// Generate a checker program with the Planner/Programmer loop.
    Run {
        #[arg(long)]
        rule: String,
        #[arg(long)]
        dataset: PathBuf,
        /// Backend config JSON.
        #[arg(long)]
        backend: PathBuf,
        #[arg(long, default_value = "multi_agent_vision")]
        mode: String,
        #[arg(long = "max-iter", default_value_t = 10)]
        max_iter: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long = "f1-threshold", default_value_t = 1.0)]
        f1_threshold: f64,
        /// Output directory; `runs/<rule>` when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        jobs: Option<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum EmptyArg {
    Perfect,
    Zero,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Svg,
    Ascii,
}

fn load_tech(path: Option<&Path>) -> Result<TechFile> {
    match path {
        Some(p) => io::load_techfile(p),
        None => Ok(builtin_demo_techfile()),
    }
}

fn print_json<T: Serialize>(v: &T) {
    print!("{}", io::to_json(v));
}

fn load_program(path: &Path) -> Result<gridrc_core::dsl::RuleProgram> {
    parse_program(&io::read_text(path)?).map_err(|d| Error::parse(path, d))
}

#[derive(Serialize)]
struct RuleDrvJson {
    rule: String,
    #[serde(flatten)]
    drv: DrvJson,
}

#[derive(Serialize)]
struct ConvertedJson {
    cell: String,
    drvs: Vec<RuleDrvJson>,
    warnings: Vec<String>,
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::GenDataset { seed, count, tech, params, out, jobs } => {
            let tech = load_tech(tech.as_deref())?;
            let params: GenParams = match params {
                Some(p) => io::read_json(&p)?,
                None => GenParams::default(),
            };
            let manifest = pool(jobs)?.install(|| write_dataset(&out, seed, count, &params, &tech))?;
            eprintln!("wrote {} layouts to {}", manifest.count, out.display());
            print_json(&manifest);
        }
        Command::Check { tech, rule, layout, program } => {
            let tech = load_tech(tech.as_deref())?;
            let spec = tech.require_rule(&rule).map_err(|e| Error::Usage(e.to_string()))?;
            let layout = io::load_layout(&layout)?;
            let drvs = match program {
                Some(p) => run_program(&load_program(&p)?, &layout)
                    .into_iter()
                    .map(|d| d.with_rule_id(rule.as_str()))
                    .collect(),
                None => check_rule(&layout, spec).map_err(Error::data)?,
            };
            print_json(&io::DrvFile::new(layout.cell_name(), &rule, &drvs));
        }
        Command::ConvertReport { report, layout, tech } => {
            let tech = load_tech(tech.as_deref())?;
            let report = io::load_report(&report)?;
            let layout = io::load_layout(&layout)?;
            let transform = tech.grid_transform.unwrap_or_default();
            let conv = to_grid_drvs(&report, &layout, &transform, Some(&tech)).map_err(Error::data)?;
            for w in &conv.warnings {
                eprintln!("warning: {w}");
            }
            let mut by_rule: BTreeMap<String, std::collections::BTreeSet<_>> = BTreeMap::new();
            for d in conv.drvs {
                by_rule.entry(d.rule_id().to_string()).or_default().insert(d);
            }
            let drvs = by_rule
                .into_iter()
                .flat_map(|(rule, set)| {
                    io::DrvFile::new(layout.cell_name(), &rule, &set)
                        .drvs
                        .into_iter()
                        .map(move |drv| RuleDrvJson { rule: rule.clone(), drv })
                })
                .collect();
            print_json(&ConvertedJson {
                cell: layout.cell_name().into(),
                drvs,
                warnings: conv.warnings.iter().map(ToString::to_string).collect(),
            });
        }
        Command::Evaluate { program, rule, dataset, jobs, empty } => {
            let prog = load_program(&program)?;
            let ds = load_dataset(&dataset)?;
            let spec = ds.rule(&rule)?;
            let mut cfg = eval_config(spec);
            cfg.convention = match empty {
                EmptyArg::Perfect => EmptyConvention::Perfect,
                EmptyArg::Zero => EmptyConvention::Zero,
            };
            let report = evaluate_parallel(&pool(jobs)?, &prog, &rule, &ds.cases(&rule), &cfg);
            eprint!("{}", render_report(&report));
            print_json(&report);
            return Ok(if report.is_perfect() { ExitCode::SUCCESS } else { ExitCode::from(1) });
        }
        Command::Render { layout, drvs, format, out } => {
            let layout = io::load_layout(&layout)?;
            let drvs = match drvs {
                Some(p) => Some(io::load_drvs(&p)?.1),
                None => None,
            };
            let format = match format {
                FormatArg::Svg => Format::Svg,
                FormatArg::Ascii => Format::Ascii,
            };
            let text = render_layout(&layout, drvs.as_ref(), format);
            match out {
                Some(p) => io::write_text(&p, &text)?,
                None => print!("{text}"),
            }
        }
        Command::Agent { command: AgentCommand::Run { rule, dataset, backend, mode, max_iter, seed, f1_threshold, out, jobs } } => {
            let mode: Mode = mode.parse().map_err(Error::Usage)?;
            let ds = load_dataset(&dataset)?;
            let loaded = load_backend(&backend)?;
            let cfg = RunConfig {
                mode,
                max_iterations: max_iter,
                seed,
                f1_threshold,
                backoff: loaded.backoff,
                logical_clock: loaded.logical_clock,
                jobs,
                ..RunConfig::default()
            };
            let out = out.unwrap_or_else(|| PathBuf::from("runs").join(&rule));
            let start = Instant::now();
            let (outcome, error) = match run_generation(&ds, &rule, loaded.backend.as_ref(), &cfg) {
                Ok(o) => (o, None),
                Err(a) => (a.outcome, Some(a.error)),
            };
            let wall = start.elapsed().as_secs_f64();
            // Setup failures leave nothing worth writing.
            if outcome.conversation.iteration == 0 {
                if let Some(e) = error {
                    return Err(e);
                }
            }
            let summary = write_outputs(&out, &outcome, &cfg, error.as_ref())?;
            eprintln!("{:?} after {} iterations; outputs in {}", summary.status, summary.iterations, out.display());
            println!("{}", outcome.summary_line(wall));
            if let Some(e) = error {
                return Err(e);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            eprintln!("{}", Error::Usage(first.to_string()).one_line());
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{}", e.one_line());
            ExitCode::from(e.category().exit_code() as u8)
        }
    }
}
