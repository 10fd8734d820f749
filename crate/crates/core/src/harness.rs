//! Configuration, experiment orchestration and report emission.
//!
//! A run is described by a TOML file with sections `[geometry]`, `[timing]`,
//! `[mode]`, `[cpu]`, `[workload]`, `[paging]` and `[sim]`; every field has
//! a documented default, so a minimal config is just the mode. Reports are
//! JSON with a fixed field order: the same config produces byte-identical
//! output on every run.

use crate::engine::{CoreStats, EngineError, IntervalRow, System, SystemConfig};
use crate::geometry::{ModuleGeometry, TimingParams};
use crate::layout::{LayoutMode, RegionConfig, Region, SideBand};
use crate::paging::FaultModel;
use crate::workload::{
    self, gen_trace, parse_trace, weighted_speedup, CoreModel, GenSpec, MixSpec, Rng64,
    TraceEntry, TraceKind,
};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error("config parse: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("io {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Geometry(#[from] crate::geometry::GeometryError),
    #[error(transparent)]
    Layout(#[from] crate::layout::LayoutError),
    #[error(transparent)]
    Workload(#[from] crate::workload::WorkloadError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeSection {
    pub layout: LayoutMode,
    /// Pages below the boundary use the adaptive layout; whole row-groups.
    /// Defaults to the full module for the adaptive layouts, 0 for baseline.
    pub boundary_pages: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CpuSection {
    pub cores: u32,
    pub retire_width: u32,
    pub rob_entries: u32,
    pub max_inflight_loads: u32,
    pub freq_ghz: f64,
    pub instruction_budget: u64,
}

impl Default for CpuSection {
    fn default() -> Self {
        let m = CoreModel::default();
        CpuSection {
            cores: 4,
            retire_width: m.retire_width,
            rob_entries: m.rob_entries,
            max_inflight_loads: m.max_inflight_loads,
            freq_ghz: m.freq_ghz,
            instruction_budget: 2_000_000,
        }
    }
}

impl CpuSection {
    pub fn core_model(&self) -> CoreModel {
        CoreModel {
            retire_width: self.retire_width,
            rob_entries: self.rob_entries,
            max_inflight_loads: self.max_inflight_loads,
            freq_ghz: self.freq_ghz,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorkloadSection {
    /// uniform | zipf | kv | mix; ignored when trace files are given.
    pub kind: String,
    pub trace_files: Vec<PathBuf>,
    pub ops: u64,
    /// Virtual page span per core; defaults to the module's capacity.
    pub pages: Option<u64>,
    pub zipf_exponent: f64,
    pub read_fraction: f64,
    pub mpki: f64,
    /// mix kind: fraction of cores running the memory-intensive workload.
    pub intensive_fraction: f64,
    pub intensive_mpki: f64,
    pub non_intensive_mpki: f64,
}

impl Default for WorkloadSection {
    fn default() -> Self {
        WorkloadSection {
            kind: "kv".to_string(),
            trace_files: Vec::new(),
            ops: 100_000,
            pages: None,
            zipf_exponent: 0.99,
            read_fraction: 0.95,
            mpki: 40.0,
            intensive_fraction: 0.5,
            intensive_mpki: 40.0,
            non_intensive_mpki: 2.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PagingSection {
    pub enabled: bool,
    pub penalty_ns: u64,
    pub ssd_ns: u64,
    pub software_ns: u64,
}

impl Default for PagingSection {
    fn default() -> Self {
        let m = FaultModel::default();
        PagingSection {
            enabled: false,
            penalty_ns: m.penalty_ns,
            ssd_ns: m.ssd_ns,
            software_ns: m.software_ns,
        }
    }
}

impl PagingSection {
    pub fn fault_model(&self) -> FaultModel {
        FaultModel {
            penalty_ns: self.penalty_ns,
            ssd_ns: self.ssd_ns,
            software_ns: self.software_ns,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    pub seed: u64,
    pub write_queue: usize,
    /// Also run each core alone and report the weighted speedup.
    pub weighted_speedup: bool,
    pub interval_cycles: u64,
    pub command_log: bool,
    pub max_cycles: Option<u64>,
}

impl Default for SimSection {
    fn default() -> Self {
        SimSection {
            seed: 1,
            write_queue: 64,
            weighted_speedup: false,
            interval_cycles: 10_000,
            command_log: false,
            max_cycles: None,
        }
    }
}

/// One complete experiment description.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub geometry: ModuleGeometry,
    #[serde(default)]
    pub timing: TimingParams,
    pub mode: ModeSection,
    #[serde(default)]
    pub cpu: CpuSection,
    #[serde(default)]
    pub workload: WorkloadSection,
    #[serde(default)]
    pub paging: PagingSection,
    #[serde(default)]
    pub sim: SimSection,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let config: RunConfig = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn minimal(mode: LayoutMode) -> Self {
        RunConfig {
            geometry: ModuleGeometry::desk(),
            timing: TimingParams::ddr3_1333(),
            mode: ModeSection {
                layout: mode,
                boundary_pages: None,
            },
            cpu: CpuSection::default(),
            workload: WorkloadSection::default(),
            paging: PagingSection::default(),
            sim: SimSection::default(),
        }
    }

    /// Boundary after defaulting: the whole module for adaptive layouts.
    pub fn boundary_pages(&self) -> u64 {
        match self.mode.boundary_pages {
            Some(b) => b,
            None => match self.mode.layout {
                LayoutMode::BaselineSecded => 0,
                _ => self.geometry.baseline_pages(),
            },
        }
    }

    pub fn region(&self) -> Result<RegionConfig, HarnessError> {
        Ok(RegionConfig::new(
            self.mode.layout,
            self.boundary_pages(),
            self.geometry,
        )?)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.geometry.validate()?;
        self.timing.validate(&self.geometry)?;
        self.region()?;
        self.cpu.core_model().validate()?;
        self.paging.fault_model().validate().map_err(|e| {
            HarnessError::Config(e.to_string())
        })?;
        if self.cpu.cores == 0 {
            return Err(HarnessError::Config("cpu.cores must be >= 1".into()));
        }
        if self.cpu.instruction_budget == 0 {
            return Err(HarnessError::Config(
                "cpu.instruction_budget must be >= 1".into(),
            ));
        }
        if !self.workload.trace_files.is_empty()
            && self.workload.trace_files.len() != self.cpu.cores as usize
        {
            return Err(HarnessError::Config(format!(
                "{} trace files for {} cores",
                self.workload.trace_files.len(),
                self.cpu.cores
            )));
        }
        if self.workload.trace_files.is_empty() {
            match self.workload.kind.as_str() {
                "uniform" | "zipf" | "kv" | "mix" => {}
                other => {
                    return Err(HarnessError::Config(format!(
                        "unknown workload kind `{other}`"
                    )))
                }
            }
        }
        Ok(())
    }

    /// Per-core traces: from files, or generated with per-core seeds
    /// derived from the base seed.
    pub fn build_traces(&self) -> Result<Vec<Vec<TraceEntry>>, HarnessError> {
        if !self.workload.trace_files.is_empty() {
            let mut traces = Vec::new();
            for path in &self.workload.trace_files {
                let file = std::fs::File::open(path).map_err(|source| HarnessError::Io {
                    path: path.clone(),
                    source,
                })?;
                traces.push(parse_trace(std::io::BufReader::new(file))?);
            }
            return Ok(traces);
        }

        let region = self.region()?;
        let pages = self.workload.pages.unwrap_or_else(|| region.capacity_pages());
        let w = &self.workload;
        let base = GenSpec {
            kind: TraceKind::Kv,
            ops: w.ops,
            pages,
            lines_per_page: self.geometry.lines_per_row,
            zipf_exponent: w.zipf_exponent,
            read_fraction: w.read_fraction,
            mpki: w.mpki,
            seed: 0,
        };
        let mut traces = Vec::new();
        match w.kind.as_str() {
            "mix" => {
                let mix = MixSpec {
                    n_cores: self.cpu.cores,
                    intensive_fraction: w.intensive_fraction,
                    seed: self.sim.seed,
                };
                for (core, intensive) in mix.intensive_slots().into_iter().enumerate() {
                    let spec = GenSpec {
                        kind: TraceKind::Kv,
                        mpki: if intensive {
                            w.intensive_mpki
                        } else {
                            w.non_intensive_mpki
                        },
                        seed: derive_seed(self.sim.seed, core as u64),
                        ..base
                    };
                    traces.push(gen_trace(&spec)?);
                }
            }
            kind => {
                let kind: TraceKind = kind.parse().map_err(HarnessError::Config)?;
                for core in 0..self.cpu.cores {
                    let spec = GenSpec {
                        kind,
                        seed: derive_seed(self.sim.seed, core as u64),
                        ..base
                    };
                    traces.push(gen_trace(&spec)?);
                }
            }
        }
        Ok(traces)
    }
}

/// Stable per-core seed derivation.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    Rng64::new(base ^ index.wrapping_mul(0xA24B_AED4_963E_E407)).next_u64()
}

/// Configuration echo carried in every report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigEcho {
    pub mode: String,
    pub boundary_pages: u64,
    pub baseline_pages: u64,
    pub extra_pages: u64,
    pub capacity_pages: u64,
    pub cores: u32,
    pub instruction_budget: u64,
    pub paging: bool,
    pub seed: u64,
}

/// Run metrics; kept separate from the config echo so layout degeneracy
/// can be stated as metric equality.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    pub per_core_ipc: Vec<f64>,
    pub alone_ipc: Option<Vec<f64>>,
    pub weighted_speedup: Option<f64>,
    pub logical_requests: u64,
    pub device_ops: u64,
    pub device_ops_per_request: f64,
    /// Device ops if packed extra-page writes were plain writes instead of
    /// read-modify-write pairs.
    pub device_ops_plain_write: u64,
    pub rmw_read_legs: u64,
    pub row_hits: u64,
    pub row_misses: u64,
    pub row_hit_rate: f64,
    pub mean_concurrency: f64,
    pub peak_concurrency: u32,
    pub mean_read_latency_cycles: f64,
    pub mean_read_latency_ns: f64,
    pub page_faults: u64,
    pub mem_cycles: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimReport {
    pub config: ConfigEcho,
    pub metrics: Metrics,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub per_core: Vec<CoreStats>,
}

impl PartialEq for CoreStats {
    fn eq(&self, other: &Self) -> bool {
        self.instructions == other.instructions
            && self.core_cycles == other.core_cycles
            && self.ipc == other.ipc
            && self.mem_reads == other.mem_reads
            && self.mem_writes == other.mem_writes
            && self.page_faults == other.page_faults
    }
}

impl SimReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization")
    }
}

/// Full run result: the report plus optional side channels.
#[derive(Debug)]
pub struct RunArtifacts {
    pub report: SimReport,
    pub command_log: Vec<String>,
    pub intervals: Vec<IntervalRow>,
}

fn system_config(config: &RunConfig) -> Result<SystemConfig, HarnessError> {
    let region = config.region()?;
    Ok(SystemConfig {
        region,
        timing: config.timing,
        core_model: config.cpu.core_model(),
        fault_model: config.paging.fault_model(),
        paging: config.paging.enabled,
        write_queue: config.sim.write_queue,
        instruction_budget: config.cpu.instruction_budget,
        capture_commands: config.sim.command_log,
        interval_cycles: config.sim.interval_cycles,
        max_cycles: config.sim.max_cycles,
    })
}

/// Execute one configuration and assemble its report.
pub fn run(config: &RunConfig) -> Result<RunArtifacts, HarnessError> {
    config.validate()?;
    let traces = config.build_traces()?;
    let sys_config = system_config(config)?;
    let region = sys_config.region;
    let system = System::new(system_config(config)?, traces.clone())?;
    let output = system.run()?;

    // Interference-free baselines for weighted speedup: each application
    // alone on the same machine configuration.
    let (alone_ipc, ws) = if config.sim.weighted_speedup {
        let mut alone = Vec::new();
        for trace in traces {
            let mut solo = system_config(config)?;
            solo.capture_commands = false;
            solo.interval_cycles = 0;
            let out = System::new(solo, vec![trace])?.run()?;
            alone.push(out.per_core[0].ipc);
        }
        let shared: Vec<f64> = output.per_core.iter().map(|c| c.ipc).collect();
        let ws = weighted_speedup(&shared, &alone)?;
        (Some(alone), Some(ws))
    } else {
        (None, None)
    };

    let stats = output.engine;
    let tck = config.timing.tck_ns;
    let metrics = Metrics {
        per_core_ipc: output.per_core.iter().map(|c| c.ipc).collect(),
        alone_ipc,
        weighted_speedup: ws,
        logical_requests: stats.requests_completed,
        device_ops: stats.device_ops_completed,
        device_ops_per_request: stats.ops_per_request(),
        device_ops_plain_write: stats.device_ops_completed - stats.packed_extra_write_read_legs,
        rmw_read_legs: stats.rmw_read_legs,
        row_hits: stats.row_hits,
        row_misses: stats.row_misses,
        row_hit_rate: stats.row_hit_rate(),
        mean_concurrency: stats.mean_concurrency(),
        peak_concurrency: stats.peak_concurrency,
        mean_read_latency_cycles: stats.mean_read_latency(),
        mean_read_latency_ns: stats.mean_read_latency() * tck,
        page_faults: output.page_faults,
        mem_cycles: output.mem_cycles,
    };
    let report = SimReport {
        config: ConfigEcho {
            mode: config.mode.layout.name().to_string(),
            boundary_pages: config.boundary_pages(),
            baseline_pages: config.geometry.baseline_pages(),
            extra_pages: region.extra_pages(),
            capacity_pages: region.capacity_pages(),
            cores: config.cpu.cores,
            instruction_budget: config.cpu.instruction_budget,
            paging: config.paging.enabled,
            seed: config.sim.seed,
        },
        metrics,
        per_core: output.per_core,
    };
    Ok(RunArtifacts {
        report,
        command_log: output.command_log.iter().map(|c| c.format()).collect(),
        intervals: output.intervals,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Mode,
    SecdedFraction,
    IntensiveFraction,
    FramesHeadroom,
}

impl std::str::FromStr for SweepAxis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mode" => Ok(SweepAxis::Mode),
            "secded-fraction" => Ok(SweepAxis::SecdedFraction),
            "intensive-fraction" => Ok(SweepAxis::IntensiveFraction),
            "frames-headroom" => Ok(SweepAxis::FramesHeadroom),
            other => Err(format!(
                "unknown sweep axis `{other}` (mode, secded-fraction, intensive-fraction, frames-headroom)"
            )),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct SweepRow {
    pub axis: String,
    pub value: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<SimReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

fn parse_fraction(value: &str) -> Result<f64, HarnessError> {
    let trimmed = value.trim().trim_end_matches('%');
    let f: f64 = trimmed
        .parse()
        .map_err(|_| HarnessError::Config(format!("bad fraction `{value}`")))?;
    let f = if f > 1.0 { f / 100.0 } else { f };
    if !(0.0..=1.0).contains(&f) {
        return Err(HarnessError::Config(format!(
            "fraction `{value}` outside [0, 1]"
        )));
    }
    Ok(f)
}

/// Snap a page count to whole row-groups, rounding to nearest.
fn snap_to_row_groups(pages: f64, banks: u32) -> u64 {
    let group = banks as u64;
    let groups = (pages / group as f64).round() as u64;
    groups * group
}

/// Apply one sweep value to a copy of the base config.
fn apply_axis(
    base: &RunConfig,
    axis: SweepAxis,
    value: &str,
) -> Result<RunConfig, HarnessError> {
    let mut config = base.clone();
    match axis {
        SweepAxis::Mode => {
            config.mode.layout = value
                .parse()
                .map_err(HarnessError::Config)?;
        }
        SweepAxis::SecdedFraction => {
            // The knob is a fraction of the module kept under SECDED; the
            // boundary is the complement, in whole row-groups.
            let f = parse_fraction(value)?;
            let baseline = base.geometry.baseline_pages() as f64;
            config.mode.boundary_pages =
                Some(snap_to_row_groups((1.0 - f) * baseline, base.geometry.banks));
        }
        SweepAxis::IntensiveFraction => {
            config.workload.kind = "mix".to_string();
            config.workload.intensive_fraction = parse_fraction(value)?;
        }
        SweepAxis::FramesHeadroom => {
            let h: f64 = value
                .parse()
                .map_err(|_| HarnessError::Config(format!("bad headroom `{value}`")))?;
            if !h.is_finite() || h <= 0.0 {
                return Err(HarnessError::Config("headroom must be positive".into()));
            }
            config.paging.enabled = true;
            let frames = config.region()?.capacity_pages() as f64;
            config.workload.pages = Some(((h * frames).round() as u64).max(1));
        }
    }
    Ok(config)
}

/// Run one report per axis value, with per-row seeds derived from the base
/// seed. Row failures are reported in place; the sweep continues.
pub fn sweep(base: &RunConfig, axis: SweepAxis, values: &[String]) -> Vec<SweepRow> {
    let axis_name = match axis {
        SweepAxis::Mode => "mode",
        SweepAxis::SecdedFraction => "secded-fraction",
        SweepAxis::IntensiveFraction => "intensive-fraction",
        SweepAxis::FramesHeadroom => "frames-headroom",
    };
    values
        .iter()
        .enumerate()
        .map(|(i, value)| {
            let result = apply_axis(base, axis, value).and_then(|mut config| {
                config.sim.seed = derive_seed(base.sim.seed, i as u64);
                run(&config)
            });
            match result {
                Ok(artifacts) => SweepRow {
                    axis: axis_name.to_string(),
                    value: value.clone(),
                    report: Some(artifacts.report),
                    error: None,
                },
                Err(e) => SweepRow {
                    axis: axis_name.to_string(),
                    value: value.clone(),
                    report: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect()
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(
        "axis,value,mode,boundary_pages,capacity_pages,weighted_speedup,ipc_sum,\
         logical_requests,device_ops,device_ops_per_request,row_hit_rate,\
         mean_concurrency,mean_read_latency_cycles,page_faults,mem_cycles,error\n",
    );
    for row in rows {
        match &row.report {
            Some(r) => {
                let m = &r.metrics;
                let ipc_sum: f64 = m.per_core_ipc.iter().sum();
                out.push_str(&format!(
                    "{},{},{},{},{},{},{:.6},{},{},{:.6},{:.6},{:.6},{:.3},{},{},\n",
                    row.axis,
                    row.value,
                    r.config.mode,
                    r.config.boundary_pages,
                    r.config.capacity_pages,
                    m.weighted_speedup
                        .map(|w| format!("{w:.6}"))
                        .unwrap_or_default(),
                    ipc_sum,
                    m.logical_requests,
                    m.device_ops,
                    m.device_ops_per_request,
                    m.row_hit_rate,
                    m.mean_concurrency,
                    m.mean_read_latency_cycles,
                    m.page_faults,
                    m.mem_cycles,
                ));
            }
            None => {
                out.push_str(&format!(
                    "{},{},,,,,,,,,,,,,,{}\n",
                    row.axis,
                    row.value,
                    row.error.as_deref().unwrap_or("unknown")
                ));
            }
        }
    }
    out
}

pub fn intervals_csv(rows: &[IntervalRow]) -> String {
    let mut out = String::from(
        "cycle,requests_completed,device_ops_completed,row_hits,page_faults,resident_pages\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.cycle,
            r.requests_completed,
            r.device_ops_completed,
            r.row_hits,
            r.page_faults,
            r.resident_pages
        ));
    }
    out
}

/// Address-range map and capacity summary for one layout configuration.
#[derive(Debug, Clone, Serialize)]
pub struct CapacityReport {
    pub mode: String,
    pub boundary_pages: u64,
    pub baseline_pages: u64,
    pub extra_pages: u64,
    pub capacity_pages: u64,
    pub gain_percent: f64,
    pub regions: Vec<RegionRange>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RegionRange {
    pub name: String,
    pub start_line: u64,
    pub end_line: u64,
    pub pages: u64,
}

pub fn capacity_report(region: &RegionConfig) -> CapacityReport {
    let lpr = region.geometry.lines_per_row as u64;
    let mut regions = Vec::new();
    let boundary = match region.mode {
        LayoutMode::BaselineSecded => 0,
        _ => region.boundary_pages,
    };
    if boundary > 0 {
        regions.push(RegionRange {
            name: "adaptive".to_string(),
            start_line: 0,
            end_line: boundary * lpr,
            pages: boundary,
        });
    }
    let baseline = region.geometry.baseline_pages();
    if boundary < baseline {
        regions.push(RegionRange {
            name: "secded".to_string(),
            start_line: boundary * lpr,
            end_line: baseline * lpr,
            pages: baseline - boundary,
        });
    }
    let extra = region.extra_pages();
    if extra > 0 {
        regions.push(RegionRange {
            name: "extra".to_string(),
            start_line: baseline * lpr,
            end_line: (baseline + extra) * lpr,
            pages: extra,
        });
    }
    CapacityReport {
        mode: region.mode.name().to_string(),
        boundary_pages: region.boundary_pages,
        baseline_pages: baseline,
        extra_pages: extra,
        capacity_pages: region.capacity_pages(),
        gain_percent: 100.0 * extra as f64 / baseline as f64,
        regions,
    }
}

pub fn capacity_text(report: &CapacityReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "mode {} boundary {} pages\n",
        report.mode, report.boundary_pages
    ));
    out.push_str(&format!(
        "baseline {} extra {} capacity {} gain {:.2}%\n",
        report.baseline_pages, report.extra_pages, report.capacity_pages, report.gain_percent
    ));
    for r in &report.regions {
        out.push_str(&format!(
            "region {} lines {:#x}..{:#x} pages {}\n",
            r.name, r.start_line, r.end_line, r.pages
        ));
    }
    out
}

/// Line-oriented description of where a cache line lives and how it is
/// accessed; the `translate` subcommand's stable output format.
pub fn translate_text(region: &RegionConfig, line: u64) -> Result<String, HarnessError> {
    let footprint = region.locate(line)?;
    let lpr = region.geometry.lines_per_row as u64;
    let region_name = match region.region_of(line)? {
        Region::Adaptive => "adaptive",
        Region::Secded => "secded",
        Region::Extra => "extra",
    };
    let mut out = String::new();
    out.push_str(&format!(
        "line {:#x} mode {} region {} page {} line-in-page {}\n",
        line,
        region.mode,
        region_name,
        line / lpr,
        line % lpr
    ));
    for (i, cell) in footprint.lanes.iter().enumerate() {
        out.push_str(&format!(
            "lane {i} chip {} bank {} row {} col {}\n",
            cell.slice.chip, cell.slice.bank, cell.row, cell.col
        ));
    }
    match footprint.side {
        Some(SideBand::Secded(cell)) => out.push_str(&format!(
            "side ecc chip {} bank {} row {} col {}\n",
            cell.slice.chip, cell.slice.bank, cell.row, cell.col
        )),
        Some(SideBand::ParityByte { cell, byte_in_col }) => out.push_str(&format!(
            "side parity chip {} bank {} row {} col {} byte {}\n",
            cell.slice.chip, cell.slice.bank, cell.row, cell.col, byte_in_col
        )),
        None => {}
    }
    for rw in [crate::layout::Rw::Read, crate::layout::Rw::Write] {
        let plan = region.plan_access(line, rw)?;
        let name = match rw {
            crate::layout::Rw::Read => "read",
            crate::layout::Rw::Write => "write",
        };
        let staging = match plan.staging {
            crate::layout::Staging::None => "none",
            crate::layout::Staging::Rmw => "rmw",
        };
        out.push_str(&format!("plan {name} ops {} staging {staging}\n", plan.ops.len()));
        for (i, op) in plan.ops.iter().enumerate() {
            let slices: Vec<String> = op.slices.iter().map(|s| s.to_string()).collect();
            let kind = match op.rw {
                crate::layout::Rw::Read => "RD",
                crate::layout::Rw::Write => "WR",
            };
            out.push_str(&format!(
                "op {i} {kind} {} {} row {} col {}\n",
                op.role.name(),
                slices.join(","),
                op.row,
                op.column
            ));
        }
    }
    Ok(out)
}

/// JSON form of the same translation.
pub fn translate_json(region: &RegionConfig, line: u64) -> Result<String, HarnessError> {
    #[derive(Serialize)]
    struct Translation {
        line: u64,
        mode: String,
        footprint: crate::layout::Footprint,
        read_plan: crate::layout::AccessPlan,
        write_plan: crate::layout::AccessPlan,
        extra_translation: Option<[u64; 8]>,
    }
    let extra_translation = region.translate_extra(line).ok();
    let t = Translation {
        line,
        mode: region.mode.name().to_string(),
        footprint: region.locate(line)?,
        read_plan: region.plan_access(line, crate::layout::Rw::Read)?,
        write_plan: region.plan_access(line, crate::layout::Rw::Write)?,
        extra_translation,
    };
    Ok(serde_json::to_string_pretty(&t).expect("translation serialization"))
}

/// MPKI classification of a trace file, for workload curation.
pub fn classify_trace(path: &Path) -> Result<(f64, bool), HarnessError> {
    let file = std::fs::File::open(path).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let trace = parse_trace(std::io::BufReader::new(file))?;
    Ok((
        workload::mpki(&trace),
        workload::classify_mpki(&trace, None),
    ))
}
