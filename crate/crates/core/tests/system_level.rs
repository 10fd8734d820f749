//! Full-system integration: layout degeneracy at the command-trace level,
//! the nine-group parallelism of the wrap-around layout, paging benefits
//! from the extra capacity, and timing legality of everything emitted.

mod support;

use eccsim::engine::{RunOutput, System, SystemConfig};
use eccsim::geometry::{ModuleGeometry, TimingParams};
use eccsim::harness::{self, RunConfig};
use eccsim::layout::{LayoutMode, RegionConfig, Rw};
use eccsim::workload::{gen_trace, GenSpec, TraceEntry, TraceKind};
use support::TimingChecker;

fn region(mode: LayoutMode, boundary: u64) -> RegionConfig {
    RegionConfig::new(mode, boundary, ModuleGeometry::desk()).unwrap()
}

fn run_with_log(
    mode: LayoutMode,
    boundary: u64,
    traces: Vec<Vec<TraceEntry>>,
    budget: u64,
) -> RunOutput {
    let mut config = SystemConfig::new(region(mode, boundary), TimingParams::ddr3_1333());
    config.instruction_budget = budget;
    config.capture_commands = true;
    config.interval_cycles = 0;
    System::new(config, traces).unwrap().run().unwrap()
}

fn log_lines(output: &RunOutput) -> Vec<String> {
    output.command_log.iter().map(|c| c.format()).collect()
}

fn assert_legal(lines: &[String], context: &str) {
    let violations = TimingChecker::check_log(
        TimingParams::ddr3_1333(),
        ModuleGeometry::desk(),
        lines,
    );
    assert!(
        violations.is_empty(),
        "{context}: {} violations, first: {}",
        violations.len(),
        violations[0]
    );
}

/// A 10k-operation mixed trace over the baseline address space.
fn baseline_span_traces(cores: usize, ops: u64) -> Vec<Vec<TraceEntry>> {
    (0..cores)
        .map(|core| {
            let spec = GenSpec {
                read_fraction: 0.7,
                mpki: 1000.0,
                ..GenSpec::new(TraceKind::Uniform, ops, 128, 40 + core as u64)
            };
            gen_trace(&spec).unwrap()
        })
        .collect()
}

#[test]
fn zero_boundary_command_traces_are_cycle_identical() {
    let traces = baseline_span_traces(2, 5_000);
    let budget = 10_000;
    let baseline = run_with_log(LayoutMode::BaselineSecded, 0, traces.clone(), budget);
    let base_lines = log_lines(&baseline);
    assert!(base_lines.len() > 10_000, "trace too small: {}", base_lines.len());
    assert_legal(&base_lines, "baseline");

    for mode in [
        LayoutMode::Packed,
        LayoutMode::PackedRs,
        LayoutMode::InterWrap,
        LayoutMode::Parity,
    ] {
        let output = run_with_log(mode, 0, traces.clone(), budget);
        assert_eq!(log_lines(&output), base_lines, "{mode} diverged from baseline");
    }
}

/// One load stream confined to a single slice group: eight consecutive
/// lines per page, then the next page of the same group (a fresh row), a
/// short compute burst between loads. Row hits dominate unless another
/// stream shares the bank and thrashes the open row.
fn group_stream(pages: &[u64]) -> Vec<TraceEntry> {
    let mut trace = Vec::new();
    for &page in pages {
        for cl in 0..8 {
            trace.push(TraceEntry {
                bubbles: 100,
                rw: Rw::Read,
                vline: page * 64 + cl,
            });
        }
    }
    trace
}

const STREAM_BUDGET: u64 = 6_000;

fn stream_system(mode: LayoutMode, boundary: u64, traces: Vec<Vec<TraceEntry>>) -> RunOutput {
    let mut config = SystemConfig::new(region(mode, boundary), TimingParams::ddr3_1333());
    config.instruction_budget = STREAM_BUDGET;
    config.capture_commands = true;
    config.interval_cycles = 0;
    config.core_model.max_inflight_loads = 1;
    System::new(config, traces).unwrap().run().unwrap()
}

#[test]
fn interwrap_sustains_nine_groups_and_beats_baseline() {
    // Nine independent single-group streams. The wrap layout gives each
    // stream its own slice group (pages 8r+k all share slot k; the extra
    // pages form the ninth group). On the baseline module the ninth
    // stream must share a bank with another and the two thrash each
    // other's open rows.
    let slot_pages = |k: u64| (0..16).map(|r| 8 * r + k).collect::<Vec<_>>();
    let mut iw_traces: Vec<Vec<TraceEntry>> =
        (0..8u64).map(|k| group_stream(&slot_pages(k))).collect();
    iw_traces.push(group_stream(&(0..16).map(|r| 128 + r).collect::<Vec<_>>()));
    let iw = stream_system(LayoutMode::InterWrap, 128, iw_traces);

    let mut base_traces: Vec<Vec<TraceEntry>> =
        (0..8u64).map(|k| group_stream(&slot_pages(k))).collect();
    base_traces.push(group_stream(
        &(0..16u64).map(|r| 8 * ((r + 5) % 16)).collect::<Vec<_>>(),
    ));
    let base = stream_system(LayoutMode::BaselineSecded, 0, base_traces);

    // All nine wrap groups in flight at once; the baseline tops out at its
    // eight bank groups.
    assert_eq!(iw.engine.peak_concurrency, 9);
    assert!(base.engine.peak_concurrency <= 8);
    assert!(
        iw.engine.mean_concurrency() > base.engine.mean_concurrency(),
        "concurrency {} vs {}",
        iw.engine.mean_concurrency(),
        base.engine.mean_concurrency()
    );
    // Fixed work, so throughput is budget instructions over the makespan;
    // the completed-request rate would also count post-budget looping.
    let goodput = |out: &RunOutput| 9.0 * STREAM_BUDGET as f64 / out.mem_cycles as f64;
    assert!(
        goodput(&iw) > goodput(&base),
        "throughput {} vs {}",
        goodput(&iw),
        goodput(&base)
    );
    assert_legal(&log_lines(&iw), "inter-wrap streams");
    assert_legal(&log_lines(&base), "baseline streams");
}

#[test]
fn staged_write_legs_follow_their_read_legs_on_the_bus() {
    // Packed extra-page writes: every WR to a column comes after the RD of
    // that column has returned its data.
    let region = region(LayoutMode::Packed, 128);
    let extra = region.extra_start_line();
    let trace: Vec<TraceEntry> = (0..32)
        .map(|i| TraceEntry {
            bubbles: 0,
            rw: if i % 2 == 0 { Rw::Write } else { Rw::Read },
            vline: extra + i % 16,
        })
        .collect();
    let output = run_with_log(LayoutMode::Packed, 128, vec![trace], 64);
    let lines = log_lines(&output);
    assert_legal(&lines, "packed extra writes");

    let timing = TimingParams::ddr3_1333();
    let data_lead = timing.tcl as u64 + timing.tburst as u64;
    let mut last_read_at: std::collections::HashMap<(String, u32), u64> =
        std::collections::HashMap::new();
    for cmd in &output.command_log {
        let key = (
            cmd.slices
                .iter()
                .map(|s| s.to_string())
                .collect::<Vec<_>>()
                .join(","),
            cmd.column.unwrap_or(u32::MAX),
        );
        match cmd.kind {
            eccsim::engine::CmdKind::Rd => {
                last_read_at.insert(key, cmd.cycle);
            }
            eccsim::engine::CmdKind::Wr => {
                if let Some(&rd) = last_read_at.get(&key) {
                    assert!(
                        cmd.cycle >= rd + data_lead,
                        "write at {} before read data of cycle {rd}",
                        cmd.cycle
                    );
                }
            }
            _ => {}
        }
    }
}

fn paging_config(mode: LayoutMode, pages_per_core: u64) -> RunConfig {
    let mut config = RunConfig::minimal(mode);
    config.cpu.cores = 4;
    config.cpu.instruction_budget = 8_000;
    config.paging.enabled = true;
    config.sim.weighted_speedup = true;
    config.sim.interval_cycles = 0;
    config.workload.kind = "zipf".to_string();
    config.workload.zipf_exponent = 0.99;
    config.workload.read_fraction = 0.95;
    config.workload.mpki = 40.0;
    config.workload.ops = 20_000;
    config.workload.pages = Some(pages_per_core);
    config
}

#[test]
fn extra_capacity_cuts_faults_and_lifts_weighted_speedup() {
    // Aggregate working set: 4 cores x 35 pages = 140 pages, which is 110%
    // of the 128 baseline frames and just inside the 144 wrap frames.
    let base = {
        let config = paging_config(LayoutMode::BaselineSecded, 35);
        harness::run(&config).unwrap().report
    };
    let wrap = {
        let config = paging_config(LayoutMode::InterWrap, 35);
        harness::run(&config).unwrap().report
    };
    assert_eq!(base.config.capacity_pages, 128);
    assert_eq!(wrap.config.capacity_pages, 144);
    assert!(
        wrap.metrics.page_faults < base.metrics.page_faults,
        "faults {} vs {}",
        wrap.metrics.page_faults,
        base.metrics.page_faults
    );
    assert!(
        wrap.metrics.weighted_speedup.unwrap() > base.metrics.weighted_speedup.unwrap(),
        "weighted speedup {:?} vs {:?}",
        wrap.metrics.weighted_speedup,
        base.metrics.weighted_speedup
    );
}

#[test]
fn fault_stalls_serialise_on_the_faulting_core_only() {
    // Core 0 takes two cold faults back to back; core 1 runs a pure
    // compute stretch. The stalls add up on core 0 and leave core 1's
    // cycle count untouched.
    let region = region(LayoutMode::BaselineSecded, 0);
    let mut config = SystemConfig::new(region, TimingParams::ddr3_1333());
    config.paging = true;
    config.instruction_budget = 2;
    let faulting = vec![
        TraceEntry {
            bubbles: 0,
            rw: Rw::Read,
            vline: 0,
        },
        TraceEntry {
            bubbles: 0,
            rw: Rw::Read,
            vline: 64,
        },
    ];
    let compute = vec![TraceEntry {
        bubbles: 1_000_000,
        rw: Rw::Read,
        vline: 0,
    }];
    let output = System::new(config, vec![faulting, compute]).unwrap().run().unwrap();

    let stall = eccsim::paging::FaultModel::default().stall_core_cycles(2.6);
    assert_eq!(stall, 1_300_000);
    assert_eq!(output.per_core[0].page_faults, 2);
    assert!(
        output.per_core[0].core_cycles >= 2 * stall,
        "core 0 cycles {} < {}",
        output.per_core[0].core_cycles,
        2 * stall
    );
    // Core 1 retires its 2-instruction budget in its first cycle, at full
    // speed, regardless of core 0's stalls.
    assert!(output.per_core[1].core_cycles <= 2);
    assert_eq!(output.per_core[1].page_faults, 1);
}

#[test]
fn frames_headroom_sweep_faults_fall_with_capacity() {
    let mut base = RunConfig::minimal(LayoutMode::InterWrap);
    base.cpu.cores = 1;
    base.cpu.instruction_budget = 30_000;
    base.workload.kind = "zipf".to_string();
    base.workload.ops = 10_000;
    base.sim.interval_cycles = 0;
    let values: Vec<String> = ["1.2", "1.0", "0.8", "0.5"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let rows = harness::sweep(&base, harness::SweepAxis::FramesHeadroom, &values);
    let faults: Vec<u64> = rows
        .iter()
        .map(|r| r.report.as_ref().unwrap().metrics.page_faults)
        .collect();
    // Shrinking the working set relative to the frames never faults more.
    for pair in faults.windows(2) {
        assert!(pair[1] <= pair[0], "{faults:?}");
    }
    assert!(faults[0] > faults[3], "{faults:?}");
}
