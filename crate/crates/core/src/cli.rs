//! Command-line front end.

use std::ffi::OsString;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::domain::{validate_network, Scenario, ValidationReport};
use crate::engine::{run_traced, run_with, RunOptions};
use crate::error::{Error, Result};
use crate::experiment::{
    plot_data, run_sweep, summarize, write_plot_csv, ExperimentGrid, Factor, ResultTable,
};
use crate::metrics::compute_metrics;
use crate::netgen::{generate_case_study_org, generate_projects, NetGenConfig, DEFAULT_N_TASKS};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_IO: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "bidsim", version, about = "Bid proposal development simulator")]
pub struct Cli {
    /// Emit machine-readable JSON on stdout.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a scenario file and report every violation.
    Validate {
        scenario: PathBuf,
        /// Supplies or replaces the file's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run one scenario and print its result and metrics.
    Run {
        scenario: PathBuf,
        /// Simulation seed; required unless the file has one.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write one JSON line per agent per tick to this file.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Include per-tick aggregate counts in the result.
        #[arg(long)]
        trace_summary: bool,
    },
    /// Run a factorial sweep and write the result table as CSV.
    Sweep {
        /// Grid file; omitted fields (or the whole file) take defaults.
        grid: Option<PathBuf>,
        /// Master seed; required unless the grid has master_seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        overrides: GridOverrides,
        /// Worker threads.
        #[arg(long, env = "BIDSIM_JOBS")]
        jobs: Option<usize>,
    },
    /// Estimate main effects and interactions from a result table.
    Summarize {
        table: PathBuf,
        #[arg(long, default_value_t = 1000)]
        bootstrap: usize,
        /// Bootstrap seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-panel means and intervals for plotting.
    Plotdata {
        table: PathBuf,
        #[arg(long, value_enum, default_value_t = Panel::G)]
        panel: Panel,
        #[arg(long, default_value_t = 1000)]
        bootstrap: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate task networks at a target dependence.
    GenNetwork {
        #[arg(long, default_value_t = DEFAULT_N_TASKS)]
        tasks: u32,
        #[arg(long)]
        d: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        projects: u32,
        #[arg(long, default_value_t = 1)]
        exchanges: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the case-study organization.
    GenOrg {
        #[arg(long, default_value_t = 2)]
        helpers: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct GridOverrides {
    #[arg(long, value_delimiter = ',')]
    pub g_levels: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub d_levels: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub m_levels: Option<Vec<f64>>,
    #[arg(long)]
    pub replications: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Panel {
    G,
    D,
}

/// Parse `args` (including the program name) and execute. Returns the
/// process exit code.
pub fn main_with_args<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_IO } else { EXIT_OK };
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(stderr, "{text}");
            } else {
                let _ = write!(stdout, "{text}");
            }
            return code;
        }
    };
    let json = cli.json;
    match execute(cli, stdout) {
        Ok(()) => EXIT_OK,
        Err(e) => report_error(&e, json, stdout, stderr),
    }
}

fn report_error(e: &Error, json: bool, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let code = match e {
        Error::Validation(_) | Error::InvalidCell { .. } | Error::Config(_) => EXIT_INVALID,
        Error::Io { .. } | Error::Json(_) | Error::Csv(_) | Error::Contract(_) => EXIT_IO,
    };
    if json {
        let doc = match e {
            Error::Validation(r) => json!({"valid": false, "violations": r.violations}),
            Error::InvalidCell {
                g_index,
                d_index,
                m_index,
                rep,
                report,
            } => json!({
                "valid": false,
                "cell": {"g_index": g_index, "d_index": d_index, "m_index": m_index, "rep": rep},
                "violations": report.violations,
            }),
            other => json!({"error": other.to_string()}),
        };
        let _ = writeln!(stdout, "{doc}");
    } else {
        let _ = writeln!(stderr, "error: {e}");
    }
    code
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn emit(out: Option<&Path>, stdout: &mut dyn Write, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| Error::io(p, e)),
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| Error::io("<stdout>", e)),
    }
}

fn emit_bytes(out: Option<&Path>, stdout: &mut dyn Write, bytes: Vec<u8>) -> Result<()> {
    emit(
        out,
        stdout,
        &String::from_utf8(bytes).expect("utf-8 output"),
    )
}

fn execute(cli: Cli, stdout: &mut dyn Write) -> Result<()> {
    let json = cli.json;
    match cli.command {
        Command::Validate { scenario, seed } => {
            Scenario::from_json_with_seed(&read(&scenario)?, seed)?;
            let text = if json {
                format!("{}\n", json!({"valid": true}))
            } else {
                "OK\n".into()
            };
            emit(None, stdout, &text)
        }
        Command::Run {
            scenario,
            seed,
            out,
            trace,
            trace_summary,
        } => {
            let s = Scenario::from_json_with_seed(&read(&scenario)?, seed)?;
            let result = match trace {
                Some(path) => {
                    let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
                    let mut w = BufWriter::new(file);
                    let r = run_traced(&s, &mut w)?;
                    w.flush().map_err(|e| Error::io(&path, e))?;
                    r
                }
                None => run_with(&s, RunOptions { trace_summary }, &mut |_| {})?,
            };
            let metrics = compute_metrics(&result, &s)?;
            let doc = json!({"seed": s.seed, "result": result, "metrics": metrics});
            emit(
                out.as_deref(),
                stdout,
                &format!("{}\n", serde_json::to_string_pretty(&doc)?),
            )
        }
        Command::Sweep {
            grid,
            seed,
            out,
            overrides,
            jobs,
        } => {
            let text = match &grid {
                Some(p) => read(p)?,
                None => "{}".into(),
            };
            let mut g = ExperimentGrid::from_json_with_seed(&text, seed)?;
            if let Some(v) = overrides.g_levels {
                g.g_levels = v;
            }
            if let Some(v) = overrides.d_levels {
                g.d_levels = v;
            }
            if let Some(v) = overrides.m_levels {
                g.m_levels = v;
            }
            if let Some(r) = overrides.replications {
                g.replications = r;
            }
            g.validate()?;
            let table = run_sweep(&g, jobs)?;
            let csv = table.to_csv_string()?;
            match (&out, json) {
                (Some(p), true) => {
                    emit(Some(p), stdout, &csv)?;
                    emit(
                        None,
                        stdout,
                        &format!("{}\n", json!({"rows": table.rows.len(), "out": p})),
                    )
                }
                (Some(p), false) => emit(Some(p), stdout, &csv),
                (None, _) => emit(None, stdout, &csv),
            }
        }
        Command::Summarize {
            table,
            bootstrap,
            seed,
            out,
        } => {
            let t = read_table(&table)?;
            let summary = summarize(&t, bootstrap, seed)?;
            emit(
                out.as_deref(),
                stdout,
                &format!("{}\n", serde_json::to_string_pretty(&summary)?),
            )
        }
        Command::Plotdata {
            table,
            panel,
            bootstrap,
            seed,
            out,
        } => {
            let t = read_table(&table)?;
            let factor = match panel {
                Panel::G => Factor::G,
                Panel::D => Factor::D,
            };
            let points = plot_data(&t, factor, bootstrap, seed)?;
            let mut buf = Vec::new();
            write_plot_csv(&points, &mut buf)?;
            emit_bytes(out.as_deref(), stdout, buf)
        }
        Command::GenNetwork {
            tasks,
            d,
            seed,
            projects,
            exchanges,
            out,
        } => {
            let mut cfg = NetGenConfig::new(tasks, d, seed);
            cfg.exchanges_per_edge = exchanges;
            let nets = generate_projects(&cfg, projects)?;
            let mut report = ValidationReport::default();
            for n in &nets {
                report.extend(validate_network(n));
            }
            if !report.is_valid() {
                return Err(Error::Validation(report));
            }
            let text = if projects == 1 {
                serde_json::to_string_pretty(&nets[0])?
            } else {
                serde_json::to_string_pretty(&nets)?
            };
            emit(out.as_deref(), stdout, &format!("{text}\n"))
        }
        Command::GenOrg { helpers, out } => {
            let org = generate_case_study_org(helpers);
            emit(
                out.as_deref(),
                stdout,
                &format!("{}\n", serde_json::to_string_pretty(&org)?),
            )
        }
    }
}

fn read_table(path: &Path) -> Result<ResultTable> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    ResultTable::read_csv(file)
}
