//! Batch front end: single runs, sweeps, address translation, capacity
//! tables and trace generation.

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use eccsim::geometry::ModuleGeometry;
use eccsim::harness::{
    self, capacity_report, capacity_text, sweep_csv, RunConfig, SweepAxis,
};
use eccsim::layout::{LayoutMode, RegionConfig};
use eccsim::workload::{format_trace, gen_trace, GenSpec, TraceKind};
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "eccsim", version, about = "ECC DRAM capacity/reliability simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration and print the JSON report.
    Simulate {
        /// TOML run configuration.
        config: PathBuf,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write per-interval counters as CSV.
        #[arg(long)]
        intervals_csv: Option<PathBuf>,
        /// Write the command log (one command per line).
        #[arg(long)]
        command_log: Option<PathBuf>,
    },
    /// Run one report per axis value and emit a CSV (or JSON) table.
    Sweep {
        config: PathBuf,
        /// mode | secded-fraction | intensive-fraction | frames-headroom
        #[arg(long)]
        axis: String,
        /// Comma-separated axis values.
        #[arg(long, value_delimiter = ',')]
        values: Vec<String>,
        /// Write the CSV table here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the full per-row JSON reports.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Describe where a cache line lives and the device operations that
    /// access it.
    Translate {
        #[command(flatten)]
        layout: LayoutArgs,
        /// Cache-line address (64B units), hex with 0x prefix or decimal.
        #[arg(long)]
        addr: String,
        /// Emit JSON instead of the line-oriented text.
        #[arg(long)]
        json: bool,
    },
    /// Capacity summary and address-range map for a layout.
    Capacity {
        #[command(flatten)]
        layout: LayoutArgs,
        #[arg(long)]
        json: bool,
    },
    /// Generate a synthetic trace file.
    GenTrace {
        /// uniform | zipf | kv
        #[arg(long)]
        kind: String,
        #[arg(long, default_value_t = 100_000)]
        ops: u64,
        /// Pages in the virtual footprint.
        #[arg(long, default_value_t = 144)]
        pages: u64,
        #[arg(long, default_value_t = 0.99)]
        zipf_exponent: f64,
        #[arg(long, default_value_t = 0.95)]
        read_fraction: f64,
        #[arg(long, default_value_t = 40.0)]
        mpki: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Output file; `-` for stdout.
        out: PathBuf,
    },
}

#[derive(Args)]
struct LayoutArgs {
    /// baseline | packed | packed-rs | inter-wrap | parity
    #[arg(long)]
    mode: String,
    /// Boundary in pages (whole row-groups); defaults to the full module
    /// for the adaptive layouts.
    #[arg(long)]
    boundary: Option<u64>,
    #[arg(long, default_value_t = 16)]
    rows_per_bank: u32,
    /// Use the 8GB module shape (2^18 rows per bank).
    #[arg(long)]
    full_size: bool,
}

impl LayoutArgs {
    fn region(&self) -> Result<RegionConfig> {
        let mode: LayoutMode = self.mode.parse().map_err(anyhow::Error::msg)?;
        let geometry = if self.full_size {
            ModuleGeometry::full_size()
        } else {
            ModuleGeometry {
                rows_per_bank: self.rows_per_bank,
                ..ModuleGeometry::desk()
            }
        };
        let boundary = self.boundary.unwrap_or(match mode {
            LayoutMode::BaselineSecded => 0,
            _ => geometry.baseline_pages(),
        });
        Ok(RegionConfig::new(mode, boundary, geometry)?)
    }
}

fn parse_addr(text: &str) -> Result<u64> {
    let text = text.trim();
    if let Some(hex) = text.strip_prefix("0x").or_else(|| text.strip_prefix("0X")) {
        u64::from_str_radix(hex, 16).context("bad hex address")
    } else {
        text.parse().context("bad address")
    }
}

fn write_or_print(path: &Option<PathBuf>, content: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, content).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Simulate {
            config,
            out,
            intervals_csv,
            command_log,
        } => {
            let mut config = RunConfig::from_path(&config)?;
            if command_log.is_some() {
                config.sim.command_log = true;
            }
            let artifacts = harness::run(&config)?;
            let mut json = artifacts.report.to_json();
            json.push('\n');
            write_or_print(&out, &json)?;
            if let Some(path) = intervals_csv {
                std::fs::write(&path, harness::intervals_csv(&artifacts.intervals))
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            if let Some(path) = command_log {
                let mut text = artifacts.command_log.join("\n");
                if !text.is_empty() {
                    text.push('\n');
                }
                std::fs::write(&path, text)
                    .with_context(|| format!("writing {}", path.display()))?;
            }
        }
        Command::Sweep {
            config,
            axis,
            values,
            out,
            json,
        } => {
            if values.is_empty() {
                bail!("sweep needs at least one --values entry");
            }
            let config = RunConfig::from_path(&config)?;
            let axis: SweepAxis = axis.parse().map_err(anyhow::Error::msg)?;
            let rows = harness::sweep(&config, axis, &values);
            write_or_print(&out, &sweep_csv(&rows))?;
            if let Some(path) = json {
                let text = serde_json::to_string_pretty(&rows)?;
                std::fs::write(&path, text)
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            if rows.iter().any(|r| r.error.is_some()) {
                for row in rows.iter().filter(|r| r.error.is_some()) {
                    eprintln!(
                        "sweep row {}={} failed: {}",
                        row.axis,
                        row.value,
                        row.error.as_deref().unwrap_or("unknown")
                    );
                }
                bail!("one or more sweep rows failed");
            }
        }
        Command::Translate { layout, addr, json } => {
            let region = layout.region()?;
            let line = parse_addr(&addr)?;
            let text = if json {
                harness::translate_json(&region, line)? + "\n"
            } else {
                harness::translate_text(&region, line)?
            };
            print!("{text}");
        }
        Command::Capacity { layout, json } => {
            let region = layout.region()?;
            let report = capacity_report(&region);
            if json {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                print!("{}", capacity_text(&report));
            }
        }
        Command::GenTrace {
            kind,
            ops,
            pages,
            zipf_exponent,
            read_fraction,
            mpki,
            seed,
            out,
        } => {
            let kind: TraceKind = kind.parse().map_err(anyhow::Error::msg)?;
            let spec = GenSpec {
                kind,
                ops,
                pages,
                lines_per_page: 64,
                zipf_exponent,
                read_fraction,
                mpki,
                seed,
            };
            let text = format_trace(&gen_trace(&spec)?);
            if out.as_os_str() == "-" {
                print!("{text}");
            } else {
                std::fs::write(&out, text)
                    .with_context(|| format!("writing {}", out.display()))?;
            }
        }
    }
    Ok(())
}
