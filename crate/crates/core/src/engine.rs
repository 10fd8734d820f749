//! Cycle-level timing simulation: per-slice row-buffer state machines,
//! FR-FCFS scheduling over device operations, read-modify-write staging,
//! and the trace-driven core models feeding the controller.
//!
//! # Timing contract
//!
//! One command may issue per memory cycle. Commands address a lockstep
//! slice group; activate/precharge may address the subset of a group that
//! still needs row work. Per slice (chip, bank):
//!
//! * `ACT`  requires the slice closed, `t >= next_act` (tRC after the
//!   previous ACT, tRP after a precharge) and, per rank, tRRD since the
//!   last ACT command and at most 4 ACT commands in any tFAW window.
//!   Effects: row open, column commands legal at `t + tRCD`, precharge
//!   legal at `t + tRAS`, next ACT at `t + tRC`.
//! * `PRE`  requires the slice open and `t >= next_pre`. Effects: closed,
//!   ACT legal at `t + tRP`.
//! * `RD`   requires every slice open at the row, `t >= col_ready` (tRCD)
//!   and `t >= next_col` (tCCD per slice); per member chip, `t >=
//!   rd_ready` (tWTR after a write burst) and a free data lane over
//!   `[t+tCL, t+tCL+tBURST)`. Effects: lane busy until `t+tCL+tBURST`,
//!   precharge legal at `t + tRTP`.
//! * `WR`   as RD but data occupies `[t+tCWL, t+tCWL+tBURST)`, write
//!   recovery delays precharge to `t+tCWL+tBURST+tWR`, and reads on the
//!   same chip wait tWTR past the data burst.
//!
//! Each chip owns an independent 8-bit data lane: bursts overlap in time
//! exactly when their chip sets are disjoint. A read request is complete,
//! and its core woken, `bridge_delay` cycles after its last data burst
//! when the address was translated by the DIMM bridge (the rank-subsetting
//! layouts, below the boundary or in the extra region); SECDED-region
//! requests take no bridge delay in any mode. Write legs of staged plans
//! wait for their read leg's data plus the same bridge delay.

use crate::geometry::{SliceId, TimingParams};
use crate::layout::{LayoutMode, Region, RegionConfig, Rw, Staging};
use crate::paging::{FaultModel, FrameTable};
use crate::workload::{CoreModel, TraceEntry};
use serde::Serialize;
use std::collections::{BinaryHeap, HashMap, VecDeque};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Layout(#[from] crate::layout::LayoutError),
    #[error(transparent)]
    Paging(#[from] crate::paging::PagingError),
    #[error(transparent)]
    Workload(#[from] crate::workload::WorkloadError),
    #[error("controller write queue is full")]
    WriteQueueFull,
    #[error("core {0} has an empty trace")]
    EmptyTrace(u32),
    #[error("simulation exceeded {0} memory cycles")]
    CycleCap(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmdKind {
    Act,
    Pre,
    Rd,
    Wr,
}

impl CmdKind {
    pub fn name(&self) -> &'static str {
        match self {
            CmdKind::Act => "ACT",
            CmdKind::Pre => "PRE",
            CmdKind::Rd => "RD",
            CmdKind::Wr => "WR",
        }
    }
}

/// One bus command, as recorded in the command log.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommandEvent {
    pub cycle: u64,
    pub kind: CmdKind,
    pub slices: Vec<SliceId>,
    pub row: u32,
    /// Column for RD/WR; None for ACT/PRE.
    pub column: Option<u32>,
}

impl CommandEvent {
    /// Stable line format: `cycle kind slice,slice,... r<row> c<col|->`.
    pub fn format(&self) -> String {
        let slices: Vec<String> = self.slices.iter().map(|s| s.to_string()).collect();
        let col = match self.column {
            Some(c) => c.to_string(),
            None => "-".to_string(),
        };
        format!(
            "{} {} {} r{} c{}",
            self.cycle,
            self.kind.name(),
            slices.join(","),
            self.row,
            col
        )
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct SliceTiming {
    open: Option<u32>,
    col_ready: u64,
    next_pre: u64,
    next_act: u64,
    next_col: u64,
}

#[derive(Debug, Clone, Copy, Default)]
struct ChipTiming {
    /// Next cycle a data burst may start on this chip's lane.
    lane_free: u64,
    /// Earliest RD command after a write burst (tWTR).
    rd_ready: u64,
}

#[derive(Debug, Default)]
struct RankTiming {
    next_act_rrd: u64,
    act_history: VecDeque<u64>,
    next_ref: u64,
    ref_busy_until: u64,
    refreshing: bool,
}

#[derive(Debug)]
struct OpRuntime {
    rw: Rw,
    row: u32,
    column: u32,
    slices: Vec<SliceId>,
    slice_idx: Vec<usize>,
    chip_idx: Vec<usize>,
    group_key: u32,
    /// Index of the read leg this write leg stages behind, if any.
    dep: Option<usize>,
    ready_at: u64,
    col_issued: bool,
    done: bool,
    data_end: u64,
    row_work_done: bool,
}

#[derive(Debug)]
struct Request {
    core: u32,
    rw: Rw,
    arrival: u64,
    ops: Vec<OpRuntime>,
    ops_remaining: usize,
    bridge: u64,
}

/// Read-completion notice delivered back to a core.
#[derive(Debug, Clone, Copy)]
pub struct Wake {
    pub req: u64,
    pub core: u32,
    pub at: u64,
}

/// Aggregate controller counters for one run.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct EngineStats {
    pub requests_injected: u64,
    pub requests_completed: u64,
    pub reads_completed: u64,
    pub writes_completed: u64,
    pub device_ops: u64,
    pub device_ops_completed: u64,
    /// Read legs of staged (read-modify-write) plans.
    pub rmw_read_legs: u64,
    /// Read legs that exist only because packed extra-page writes are
    /// staged; subtracting them gives the plain-write operation count.
    pub packed_extra_write_read_legs: u64,
    pub row_hits: u64,
    pub row_misses: u64,
    pub acts: u64,
    pub pres: u64,
    pub refreshes: u64,
    pub concurrency_sum: u128,
    pub concurrency_samples: u64,
    pub peak_concurrency: u32,
    pub read_latency_sum: u128,
}

impl EngineStats {
    pub fn mean_concurrency(&self) -> f64 {
        if self.concurrency_samples == 0 {
            0.0
        } else {
            self.concurrency_sum as f64 / self.concurrency_samples as f64
        }
    }

    pub fn mean_read_latency(&self) -> f64 {
        if self.reads_completed == 0 {
            0.0
        } else {
            self.read_latency_sum as f64 / self.reads_completed as f64
        }
    }

    pub fn ops_per_request(&self) -> f64 {
        if self.requests_completed == 0 {
            0.0
        } else {
            self.device_ops_completed as f64 / self.requests_completed as f64
        }
    }

    pub fn row_hit_rate(&self) -> f64 {
        let cols = self.row_hits + self.row_misses;
        if cols == 0 {
            0.0
        } else {
            self.row_hits as f64 / cols as f64
        }
    }
}

/// The DRAM module plus memory controller.
pub struct Sim {
    region: RegionConfig,
    timing: TimingParams,
    cycle: u64,
    slices: Vec<SliceTiming>,
    chips: Vec<ChipTiming>,
    rank: RankTiming,
    order: Vec<u64>,
    requests: HashMap<u64, Request>,
    events: BinaryHeap<std::cmp::Reverse<(u64, u64, usize)>>,
    wakes: Vec<Wake>,
    next_id: u64,
    writes_pending: usize,
    write_queue_cap: usize,
    group_intern: HashMap<Vec<usize>, u32>,
    group_active: HashMap<u32, u32>,
    claim_scratch: Vec<u64>,
    log: Option<Vec<CommandEvent>>,
    stats: EngineStats,
}

impl Sim {
    pub fn new(region: RegionConfig, timing: TimingParams, write_queue_cap: usize) -> Self {
        let slice_count = region.geometry.slice_count() as usize;
        let chip_count = region.geometry.total_chips() as usize;
        let rank = RankTiming {
            next_ref: timing.trefi as u64,
            ..RankTiming::default()
        };
        Sim {
            region,
            timing,
            cycle: 0,
            slices: vec![SliceTiming::default(); slice_count],
            chips: vec![ChipTiming::default(); chip_count],
            rank,
            order: Vec::new(),
            requests: HashMap::new(),
            events: BinaryHeap::new(),
            wakes: Vec::new(),
            next_id: 0,
            writes_pending: 0,
            write_queue_cap,
            group_intern: HashMap::new(),
            group_active: HashMap::new(),
            claim_scratch: Vec::new(),
            log: None,
            stats: EngineStats::default(),
        }
    }

    pub fn capture_commands(&mut self, on: bool) {
        self.log = if on { Some(Vec::new()) } else { None };
    }

    pub fn take_log(&mut self) -> Vec<CommandEvent> {
        match &mut self.log {
            Some(log) => std::mem::take(log),
            None => Vec::new(),
        }
    }

    pub fn region(&self) -> &RegionConfig {
        &self.region
    }

    pub fn cycle(&self) -> u64 {
        self.cycle
    }

    pub fn stats(&self) -> &EngineStats {
        &self.stats
    }

    pub fn pending_requests(&self) -> usize {
        self.order.len()
    }

    pub fn can_accept_write(&self) -> bool {
        self.writes_pending < self.write_queue_cap
    }

    fn bridge_cycles(&self, line: u64) -> u64 {
        let translated = self.region.mode.uses_bridge()
            && !matches!(self.region.region_of(line), Ok(Region::Secded));
        if translated {
            self.timing.bridge_delay as u64
        } else {
            0
        }
    }

    /// Accept one logical request at the current cycle.
    pub fn admit(&mut self, core: u32, rw: Rw, line: u64) -> Result<u64, EngineError> {
        let plan = self.region.plan_access(line, rw)?;
        if rw == Rw::Write {
            if !self.can_accept_write() {
                return Err(EngineError::WriteQueueFull);
            }
            self.writes_pending += 1;
        }

        let geometry = self.region.geometry;
        let staged = plan.staging == Staging::Rmw;
        let packed_extra_write = self.region.mode == LayoutMode::Packed
            && rw == Rw::Write
            && matches!(self.region.region_of(line), Ok(Region::Extra));

        let mut ops: Vec<OpRuntime> = Vec::with_capacity(plan.ops.len());
        for op in plan.ops {
            let mut slices = op.slices;
            slices.sort();
            let slice_idx: Vec<usize> = slices.iter().map(|s| s.index(&geometry)).collect();
            let mut chip_idx: Vec<usize> = slices.iter().map(|s| s.chip as usize).collect();
            chip_idx.dedup();
            let next_key = self.group_intern.len() as u32;
            let group_key = *self
                .group_intern
                .entry(slice_idx.clone())
                .or_insert(next_key);
            let dep = if staged && op.rw == Rw::Write {
                ops.iter()
                    .rposition(|prev: &OpRuntime| {
                        prev.rw == Rw::Read
                            && prev.column == op.column
                            && prev.slice_idx == slice_idx
                    })
            } else {
                None
            };
            if op.rw == Rw::Read && rw == Rw::Write {
                self.stats.rmw_read_legs += 1;
                if packed_extra_write {
                    self.stats.packed_extra_write_read_legs += 1;
                }
            }
            ops.push(OpRuntime {
                rw: op.rw,
                row: op.row,
                column: op.column,
                slices,
                slice_idx,
                chip_idx,
                group_key,
                dep,
                ready_at: if staged && dep.is_some() { u64::MAX } else { 0 },
                col_issued: false,
                done: false,
                data_end: 0,
                row_work_done: false,
            });
        }

        for op in &ops {
            *self.group_active.entry(op.group_key).or_insert(0) += 1;
        }
        self.stats.requests_injected += 1;
        self.stats.device_ops += ops.len() as u64;

        let id = self.next_id;
        self.next_id += 1;
        let ops_remaining = ops.len();
        self.requests.insert(
            id,
            Request {
                core,
                rw,
                arrival: self.cycle,
                ops,
                ops_remaining,
                bridge: self.bridge_cycles(line),
            },
        );
        self.order.push(id);
        Ok(id)
    }

    /// Retire every data burst finishing by the current cycle; returns the
    /// read completions whose bridge delay has also elapsed.
    pub fn process_completions(&mut self) -> Vec<Wake> {
        let now = self.cycle;
        while let Some(&std::cmp::Reverse((when, id, op_idx))) = self.events.peek() {
            if when > now {
                break;
            }
            self.events.pop();
            let (key, finished) = {
                let req = self.requests.get_mut(&id).expect("event for dead request");
                let data_end = req.ops[op_idx].data_end;
                req.ops[op_idx].done = true;
                req.ops_remaining -= 1;
                // Release staged write legs: data is in the controller once
                // the burst (plus any bridge hop) lands.
                let release = data_end + req.bridge;
                let key = req.ops[op_idx].group_key;
                for op in req.ops.iter_mut() {
                    if op.dep == Some(op_idx) {
                        op.ready_at = release;
                    }
                }
                let finished = if req.ops_remaining == 0 {
                    Some((req.rw, req.core, req.arrival, data_end + req.bridge))
                } else {
                    None
                };
                (key, finished)
            };
            self.stats.device_ops_completed += 1;
            if let Some(count) = self.group_active.get_mut(&key) {
                *count -= 1;
                if *count == 0 {
                    self.group_active.remove(&key);
                }
            }
            if let Some((rw, core, arrival, wake_at)) = finished {
                self.stats.requests_completed += 1;
                match rw {
                    Rw::Read => {
                        self.stats.reads_completed += 1;
                        self.stats.read_latency_sum += (wake_at - arrival) as u128;
                        self.wakes.push(Wake {
                            req: id,
                            core,
                            at: wake_at,
                        });
                    }
                    Rw::Write => {
                        self.stats.writes_completed += 1;
                        self.writes_pending -= 1;
                    }
                }
                self.requests.remove(&id);
                self.order.retain(|&x| x != id);
            }
        }
        let ready: Vec<Wake> = self
            .wakes
            .iter()
            .copied()
            .filter(|w| w.at <= now)
            .collect();
        self.wakes.retain(|w| w.at > now);
        ready
    }

    fn log_command(&mut self, kind: CmdKind, slices: Vec<SliceId>, row: u32, column: Option<u32>) {
        match kind {
            CmdKind::Act => self.stats.acts += 1,
            CmdKind::Pre => self.stats.pres += 1,
            _ => {}
        }
        if let Some(log) = &mut self.log {
            log.push(CommandEvent {
                cycle: self.cycle,
                kind,
                slices,
                row,
                column,
            });
        }
    }

    fn column_legal(&self, op: &OpRuntime) -> bool {
        let t = self.cycle;
        if op.ready_at > t {
            return false;
        }
        for &s in &op.slice_idx {
            let slice = &self.slices[s];
            if slice.open != Some(op.row) || slice.col_ready > t || slice.next_col > t {
                return false;
            }
        }
        let data_start = t + match op.rw {
            Rw::Read => self.timing.tcl,
            Rw::Write => self.timing.tcwl,
        } as u64;
        for &c in &op.chip_idx {
            let chip = &self.chips[c];
            if data_start < chip.lane_free {
                return false;
            }
            if op.rw == Rw::Read && chip.rd_ready > t {
                return false;
            }
        }
        true
    }

    fn issue_column(&mut self, id: u64, op_idx: usize) {
        let t = self.cycle;
        let timing = self.timing;
        let req = self.requests.get_mut(&id).unwrap();
        let op = &mut req.ops[op_idx];
        op.col_issued = true;
        let (lead, kind) = match op.rw {
            Rw::Read => (timing.tcl as u64, CmdKind::Rd),
            Rw::Write => (timing.tcwl as u64, CmdKind::Wr),
        };
        let data_end = t + lead + timing.tburst as u64;
        op.data_end = data_end;
        if op.row_work_done {
            self.stats.row_misses += 1;
        } else {
            self.stats.row_hits += 1;
        }
        let slices = op.slices.clone();
        let row = op.row;
        let column = op.column;
        let slice_idx = op.slice_idx.clone();
        let chip_idx = op.chip_idx.clone();
        let rw = op.rw;
        for &s in &slice_idx {
            let slice = &mut self.slices[s];
            slice.next_col = t + timing.tccd as u64;
            slice.next_pre = slice.next_pre.max(match rw {
                Rw::Read => t + timing.trtp as u64,
                Rw::Write => data_end + timing.twr as u64,
            });
        }
        for &c in &chip_idx {
            let chip = &mut self.chips[c];
            chip.lane_free = data_end;
            if rw == Rw::Write {
                chip.rd_ready = data_end + timing.twtr as u64;
            }
        }
        self.events.push(std::cmp::Reverse((data_end, id, op_idx)));
        self.log_command(kind, slices, row, Some(column));
    }

    fn act_rank_legal(&self) -> bool {
        let t = self.cycle;
        if t < self.rank.next_act_rrd {
            return false;
        }
        let hist = &self.rank.act_history;
        if hist.len() >= 4 {
            let fourth_back = hist[hist.len() - 4];
            if t < fourth_back + self.timing.tfaw as u64 {
                return false;
            }
        }
        true
    }

    fn issue_act(&mut self, id: u64, op_idx: usize, subset: Vec<usize>) {
        let t = self.cycle;
        let timing = self.timing;
        let req = self.requests.get_mut(&id).unwrap();
        let op = &mut req.ops[op_idx];
        op.row_work_done = true;
        let row = op.row;
        let slices: Vec<SliceId> = subset
            .iter()
            .map(|&s| op.slices[op.slice_idx.iter().position(|&x| x == s).unwrap()])
            .collect();
        for &s in &subset {
            let slice = &mut self.slices[s];
            debug_assert!(slice.open.is_none() && slice.next_act <= t);
            slice.open = Some(row);
            slice.col_ready = t + timing.trcd as u64;
            slice.next_pre = slice.next_pre.max(t + timing.tras as u64);
            slice.next_act = t + timing.trc as u64;
        }
        self.rank.next_act_rrd = t + timing.trrd as u64;
        self.rank.act_history.push_back(t);
        if self.rank.act_history.len() > 4 {
            self.rank.act_history.pop_front();
        }
        self.log_command(CmdKind::Act, slices, row, None);
    }

    fn issue_pre(&mut self, id: u64, op_idx: usize, subset: Vec<usize>) {
        let t = self.cycle;
        let trp = self.timing.trp as u64;
        let req = self.requests.get_mut(&id).unwrap();
        let op = &mut req.ops[op_idx];
        op.row_work_done = true;
        let row = op.row;
        let slices: Vec<SliceId> = subset
            .iter()
            .map(|&s| op.slices[op.slice_idx.iter().position(|&x| x == s).unwrap()])
            .collect();
        for &s in &subset {
            let slice = &mut self.slices[s];
            debug_assert!(slice.open.is_some() && slice.next_pre <= t);
            slice.open = None;
            slice.next_act = slice.next_act.max(t + trp);
        }
        self.log_command(CmdKind::Pre, slices, row, None);
    }

    /// Refresh: close everything, then hold the rank for tRFC.
    fn refresh_step(&mut self) -> bool {
        if !self.timing.refresh_enabled {
            return false;
        }
        let t = self.cycle;
        if t < self.rank.ref_busy_until {
            return true;
        }
        if !self.rank.refreshing {
            if t < self.rank.next_ref {
                return false;
            }
            self.rank.refreshing = true;
        }
        // Precharge any open slice that is allowed to close.
        let mut subset = Vec::new();
        let mut any_open = false;
        for (i, slice) in self.slices.iter().enumerate() {
            if slice.open.is_some() {
                any_open = true;
                if slice.next_pre <= t {
                    subset.push(i);
                }
            }
        }
        if !subset.is_empty() {
            let geometry = self.region.geometry;
            let slices: Vec<SliceId> = subset
                .iter()
                .map(|&i| SliceId::from_index(i, &geometry))
                .collect();
            for &s in &subset {
                self.slices[s].open = None;
                self.slices[s].next_act = self.slices[s].next_act.max(t + self.timing.trp as u64);
            }
            self.log_command(CmdKind::Pre, slices, 0, None);
            return true;
        }
        if any_open {
            return true; // waiting for precharge windows
        }
        let busy_until = t + self.timing.trfc as u64;
        self.rank.ref_busy_until = busy_until;
        for slice in &mut self.slices {
            slice.next_act = slice.next_act.max(busy_until);
        }
        self.rank.next_ref += self.timing.trefi as u64;
        self.rank.refreshing = false;
        self.stats.refreshes += 1;
        true
    }

    /// FR-FCFS: first any legal column command, oldest request first (these
    /// are row hits by construction, since the row is already open); then
    /// row work (precharge/activate) for the oldest request that may drive
    /// the slices it targets. Hot path: no allocation unless a command
    /// actually issues.
    fn issue_command(&mut self) {
        if self.refresh_step() {
            return;
        }
        if self.order.is_empty() {
            return;
        }

        // Column commands to open rows.
        let mut pick: Option<(u64, usize)> = None;
        'column: for &id in &self.order {
            let req = &self.requests[&id];
            for (op_idx, op) in req.ops.iter().enumerate() {
                if op.done || op.col_issued {
                    continue;
                }
                if self.column_legal(op) {
                    pick = Some((id, op_idx));
                    break 'column;
                }
            }
        }
        if let Some((id, op_idx)) = pick {
            self.issue_column(id, op_idx);
            return;
        }

        // Row work. A slice may only be steered by the oldest request that
        // still wants it, so a younger request can never blow away a row an
        // older one is working toward.
        let mut claims = std::mem::take(&mut self.claim_scratch);
        claims.clear();
        claims.resize(self.slices.len(), u64::MAX);
        for &id in &self.order {
            let req = &self.requests[&id];
            for op in &req.ops {
                if op.done || op.col_issued {
                    continue;
                }
                for &s in &op.slice_idx {
                    if claims[s] == u64::MAX {
                        claims[s] = id;
                    }
                }
            }
        }

        let t = self.cycle;
        let mut decision: Option<(u64, usize, Vec<usize>, CmdKind)> = None;
        'row_work: for &id in &self.order {
            let req = &self.requests[&id];
            for (op_idx, op) in req.ops.iter().enumerate() {
                if op.done || op.col_issued {
                    continue;
                }
                let mut any_pre = false;
                let mut any_act = false;
                for &s in &op.slice_idx {
                    if claims[s] != id {
                        continue;
                    }
                    let slice = &self.slices[s];
                    match slice.open {
                        Some(row) if row != op.row => any_pre |= slice.next_pre <= t,
                        None => any_act |= slice.next_act <= t,
                        _ => {}
                    }
                }
                let kind = if any_pre {
                    CmdKind::Pre
                } else if any_act && self.act_rank_legal() {
                    CmdKind::Act
                } else {
                    continue;
                };
                let subset: Vec<usize> = op
                    .slice_idx
                    .iter()
                    .copied()
                    .filter(|&s| {
                        claims[s] == id
                            && match (kind, self.slices[s].open) {
                                (CmdKind::Pre, Some(row)) => {
                                    row != op.row && self.slices[s].next_pre <= t
                                }
                                (CmdKind::Act, None) => self.slices[s].next_act <= t,
                                _ => false,
                            }
                    })
                    .collect();
                decision = Some((id, op_idx, subset, kind));
                break 'row_work;
            }
        }
        self.claim_scratch = claims;
        match decision {
            Some((id, op_idx, subset, CmdKind::Pre)) => self.issue_pre(id, op_idx, subset),
            Some((id, op_idx, subset, CmdKind::Act)) => self.issue_act(id, op_idx, subset),
            _ => {}
        }
    }

    /// Issue at most one command for the current cycle, sample concurrency,
    /// and advance the clock.
    pub fn issue_and_advance(&mut self) {
        self.issue_command();
        let active = self.group_active.len() as u32;
        self.stats.concurrency_sum += active as u128;
        self.stats.concurrency_samples += 1;
        self.stats.peak_concurrency = self.stats.peak_concurrency.max(active);
        self.cycle += 1;
    }

    /// Skip `cycles` idle cycles at once. Callers guarantee the queue is
    /// empty and nothing is in flight.
    fn skip_idle(&mut self, cycles: u64) {
        debug_assert!(self.order.is_empty() && self.events.is_empty());
        self.stats.concurrency_samples += cycles;
        self.cycle += cycles;
    }

    /// Drive the memory system until every accepted request has completed.
    /// Returns the read wakes in completion order.
    pub fn run_until_idle(&mut self) -> Vec<Wake> {
        let mut wakes = Vec::new();
        while !self.order.is_empty() || !self.wakes.is_empty() {
            wakes.extend(self.process_completions());
            self.issue_and_advance();
        }
        wakes
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CoreStats {
    pub instructions: u64,
    pub core_cycles: u64,
    pub ipc: f64,
    pub mem_reads: u64,
    pub mem_writes: u64,
    pub page_faults: u64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct IntervalRow {
    pub cycle: u64,
    pub requests_completed: u64,
    pub device_ops_completed: u64,
    pub row_hits: u64,
    pub page_faults: u64,
    pub resident_pages: u64,
}

/// Everything a full-system run produces.
#[derive(Debug)]
pub struct RunOutput {
    pub mem_cycles: u64,
    pub per_core: Vec<CoreStats>,
    pub engine: EngineStats,
    pub page_faults: u64,
    pub command_log: Vec<CommandEvent>,
    pub intervals: Vec<IntervalRow>,
}

enum RobSlot {
    Bubbles(u64),
    Load { req: u64 },
    Store { line: u64 },
}

struct CoreState {
    trace: Vec<TraceEntry>,
    cursor: usize,
    pending_bubbles: u64,
    /// Fetched memory op awaiting translation.
    pending_entry: Option<(Rw, u64)>,
    /// Translated memory op awaiting dispatch.
    pending_mem: Option<(Rw, u64)>,
    rob: VecDeque<RobSlot>,
    rob_used: u32,
    inflight: u32,
    done_loads: std::collections::HashSet<u64>,
    retired: u64,
    core_cycles: u64,
    stall_until: u64,
    clock_acc: u64,
    at_budget: Option<(u64, u64)>,
    mem_reads: u64,
    mem_writes: u64,
    faults: u64,
}

impl CoreState {
    fn new(trace: Vec<TraceEntry>) -> Self {
        CoreState {
            trace,
            cursor: 0,
            pending_bubbles: 0,
            pending_entry: None,
            pending_mem: None,
            rob: VecDeque::new(),
            rob_used: 0,
            inflight: 0,
            done_loads: std::collections::HashSet::new(),
            retired: 0,
            core_cycles: 0,
            stall_until: 0,
            clock_acc: 0,
            at_budget: None,
            mem_reads: 0,
            mem_writes: 0,
            faults: 0,
        }
    }

    fn stalled(&self) -> bool {
        self.core_cycles < self.stall_until
    }
}

/// Full-system configuration: module, controller, cores and paging.
pub struct SystemConfig {
    pub region: RegionConfig,
    pub timing: TimingParams,
    pub core_model: CoreModel,
    pub fault_model: FaultModel,
    pub paging: bool,
    pub write_queue: usize,
    pub instruction_budget: u64,
    pub capture_commands: bool,
    pub interval_cycles: u64,
    pub max_cycles: Option<u64>,
}

impl SystemConfig {
    pub fn new(region: RegionConfig, timing: TimingParams) -> Self {
        SystemConfig {
            region,
            timing,
            core_model: CoreModel::default(),
            fault_model: FaultModel::default(),
            paging: false,
            write_queue: 64,
            instruction_budget: 2_000_000,
            capture_commands: false,
            interval_cycles: 0,
            max_cycles: None,
        }
    }
}

#[derive(Clone, Copy)]
struct CycleCtx<'a> {
    model: &'a CoreModel,
    fault_stall: u64,
    budget: u64,
    draining: bool,
}

/// Trace-driven multi-core system around one memory controller.
pub struct System {
    config: SystemConfig,
    sim: Sim,
    cores: Vec<CoreState>,
    frames: Option<FrameTable>,
    fault_stall: u64,
    clock_ratio_q32: u64,
    intervals: Vec<IntervalRow>,
    next_interval: u64,
}

impl System {
    pub fn new(config: SystemConfig, traces: Vec<Vec<TraceEntry>>) -> Result<Self, EngineError> {
        config.region.validate()?;
        config.timing.validate(&config.region.geometry).map_err(|e| {
            EngineError::Layout(crate::layout::LayoutError::Geometry(e))
        })?;
        config.core_model.validate()?;
        config.fault_model.validate()?;
        for (i, trace) in traces.iter().enumerate() {
            if trace.is_empty() {
                return Err(EngineError::EmptyTrace(i as u32));
            }
        }
        let mut sim = Sim::new(config.region, config.timing, config.write_queue);
        sim.capture_commands(config.capture_commands);
        let frames = if config.paging {
            Some(FrameTable::new(crate::paging::frames_for(&config.region))?)
        } else {
            None
        };
        let fault_stall = config.fault_model.stall_core_cycles(config.core_model.freq_ghz);
        let clock_ratio_q32 = config
            .core_model
            .cycles_per_mem_cycle_q32(config.timing.tck_ns);
        let cores = traces.into_iter().map(CoreState::new).collect();
        let next_interval = config.interval_cycles;
        Ok(System {
            config,
            sim,
            cores,
            frames,
            fault_stall,
            clock_ratio_q32,
            intervals: Vec::new(),
            next_interval,
        })
    }

    fn translate(
        core_id: u32,
        rw: Rw,
        vline: u64,
        frames: &mut Option<FrameTable>,
        region: &RegionConfig,
        faults: &mut u64,
    ) -> (u64, bool) {
        match frames {
            None => (vline, false),
            Some(table) => {
                let lpr = region.geometry.lines_per_row as u64;
                let outcome = table.access(core_id, vline / lpr, rw);
                if outcome.is_fault() {
                    *faults += 1;
                }
                (outcome.frame() * lpr + vline % lpr, outcome.is_fault())
            }
        }
    }

    /// One core cycle: dispatch (translating and issuing memory operations
    /// in program order), then retire from the head of the ROB.
    fn core_cycle(
        core_id: u32,
        core: &mut CoreState,
        sim: &mut Sim,
        frames: &mut Option<FrameTable>,
        ctx: &CycleCtx,
    ) -> Result<(), EngineError> {
        let CycleCtx {
            model,
            fault_stall,
            budget,
            draining,
        } = *ctx;
        if core.stalled() {
            core.core_cycles += 1;
            return Ok(());
        }

        // Dispatch.
        let mut width = model.retire_width;
        while width > 0 && core.rob_used < model.rob_entries && !draining {
            if core.pending_bubbles > 0 {
                let space = (model.rob_entries - core.rob_used) as u64;
                let take = core.pending_bubbles.min(width as u64).min(space);
                if let Some(RobSlot::Bubbles(n)) = core.rob.back_mut() {
                    *n += take;
                } else {
                    core.rob.push_back(RobSlot::Bubbles(take));
                }
                core.pending_bubbles -= take;
                core.rob_used += take as u32;
                width -= take as u32;
                continue;
            }
            if let Some((rw, vline)) = core.pending_entry.take() {
                let region = sim.region;
                let (line, faulted) = Self::translate(
                    core_id,
                    rw,
                    vline,
                    frames,
                    &region,
                    &mut core.faults,
                );
                core.pending_mem = Some((rw, line));
                if faulted {
                    core.stall_until = core.core_cycles + fault_stall;
                    break;
                }
            }
            if let Some((rw, line)) = core.pending_mem {
                match rw {
                    Rw::Read => {
                        if core.inflight >= model.max_inflight_loads {
                            break;
                        }
                        let req = sim.admit(core_id, Rw::Read, line)?;
                        core.rob.push_back(RobSlot::Load { req });
                        core.inflight += 1;
                        core.mem_reads += 1;
                    }
                    Rw::Write => {
                        core.rob.push_back(RobSlot::Store { line });
                        core.mem_writes += 1;
                    }
                }
                core.pending_mem = None;
                core.rob_used += 1;
                width -= 1;
                continue;
            }
            // Fetch the next trace entry, looping for contention when the
            // budget outlives the trace.
            let entry = core.trace[core.cursor];
            core.cursor = (core.cursor + 1) % core.trace.len();
            core.pending_bubbles = entry.bubbles;
            core.pending_entry = Some((entry.rw, entry.vline));
        }

        // Retire.
        let mut width = model.retire_width;
        while width > 0 {
            match core.rob.front_mut() {
                None => break,
                Some(RobSlot::Bubbles(n)) => {
                    let take = (*n).min(width as u64);
                    *n -= take;
                    core.retired += take;
                    core.rob_used -= take as u32;
                    width -= take as u32;
                    if *n == 0 {
                        core.rob.pop_front();
                    }
                }
                Some(RobSlot::Load { req }) => {
                    let req = *req;
                    if core.done_loads.remove(&req) {
                        core.rob.pop_front();
                        core.rob_used -= 1;
                        core.retired += 1;
                        width -= 1;
                    } else {
                        break;
                    }
                }
                Some(RobSlot::Store { line }) => {
                    let line = *line;
                    if sim.can_accept_write() {
                        sim.admit(core_id, Rw::Write, line)?;
                        core.rob.pop_front();
                        core.rob_used -= 1;
                        core.retired += 1;
                        width -= 1;
                    } else {
                        break; // write-queue backpressure
                    }
                }
            }
        }

        core.core_cycles += 1;
        if core.at_budget.is_none() && core.retired >= budget {
            core.at_budget = Some((core.retired, core.core_cycles));
        }
        Ok(())
    }

    /// All cores fault-stalled with an idle memory system: jump the clock
    /// to just before the first core wakes.
    fn idle_skip(&mut self) -> u64 {
        if self.sim.pending_requests() != 0 || !self.sim.wakes.is_empty() {
            return 0;
        }
        let mut max_skip = u64::MAX;
        for core in &self.cores {
            if !core.stalled() {
                return 0;
            }
            let remaining = core.stall_until - core.core_cycles;
            // Largest tick count that keeps this core strictly inside its
            // stall window.
            let headroom = (remaining << 32).saturating_sub(core.clock_acc + 1);
            max_skip = max_skip.min(headroom / self.clock_ratio_q32);
        }
        if max_skip == u64::MAX || max_skip == 0 {
            return 0;
        }
        for core in &mut self.cores {
            let acc = core.clock_acc + max_skip * self.clock_ratio_q32;
            core.core_cycles += acc >> 32;
            core.clock_acc = acc & 0xFFFF_FFFF;
            debug_assert!(core.stalled());
        }
        self.sim.skip_idle(max_skip);
        max_skip
    }

    fn interval_row(&self, cycle: u64) -> IntervalRow {
        let stats = self.sim.stats();
        IntervalRow {
            cycle,
            requests_completed: stats.requests_completed,
            device_ops_completed: stats.device_ops_completed,
            row_hits: stats.row_hits,
            page_faults: self.cores.iter().map(|c| c.faults).sum(),
            resident_pages: self.frames.as_ref().map_or(0, |f| f.resident()),
        }
    }

    fn sample_interval(&mut self) {
        if self.config.interval_cycles == 0 {
            return;
        }
        while self.sim.cycle() >= self.next_interval {
            let row = self.interval_row(self.next_interval);
            self.intervals.push(row);
            self.next_interval += self.config.interval_cycles;
        }
    }

    pub fn run(mut self) -> Result<RunOutput, EngineError> {
        let budget = self.config.instruction_budget;
        loop {
            let all_done = self.cores.iter().all(|c| c.at_budget.is_some());
            if all_done && self.sim.pending_requests() == 0 && self.sim.wakes.is_empty() {
                break;
            }
            if let Some(cap) = self.config.max_cycles {
                if self.sim.cycle() > cap {
                    return Err(EngineError::CycleCap(cap));
                }
            }
            if !all_done && self.idle_skip() > 0 {
                self.sample_interval();
                continue;
            }

            let wakes = self.sim.process_completions();
            for wake in wakes {
                let core = &mut self.cores[wake.core as usize];
                core.done_loads.insert(wake.req);
                core.inflight -= 1;
            }
            for i in 0..self.cores.len() {
                let core = &mut self.cores[i];
                core.clock_acc += self.clock_ratio_q32;
                let whole = core.clock_acc >> 32;
                core.clock_acc &= 0xFFFF_FFFF;
                let ctx = CycleCtx {
                    model: &self.config.core_model,
                    fault_stall: self.fault_stall,
                    budget,
                    draining: all_done,
                };
                for _ in 0..whole {
                    Self::core_cycle(
                        i as u32,
                        &mut self.cores[i],
                        &mut self.sim,
                        &mut self.frames,
                        &ctx,
                    )?;
                }
            }
            self.sim.issue_and_advance();
            self.sample_interval();
        }
        // Close the trailing partial interval.
        if self.config.interval_cycles > 0 {
            let row = self.interval_row(self.sim.cycle());
            self.intervals.push(row);
        }

        let per_core = self
            .cores
            .iter()
            .map(|core| {
                let (instructions, cycles) = core.at_budget.unwrap_or((core.retired, core.core_cycles));
                CoreStats {
                    instructions,
                    core_cycles: cycles,
                    ipc: if cycles == 0 {
                        0.0
                    } else {
                        instructions as f64 / cycles as f64
                    },
                    mem_reads: core.mem_reads,
                    mem_writes: core.mem_writes,
                    page_faults: core.faults,
                }
            })
            .collect();
        let page_faults = self.cores.iter().map(|c| c.faults).sum();
        Ok(RunOutput {
            mem_cycles: self.sim.cycle(),
            per_core,
            engine: *self.sim.stats(),
            page_faults,
            command_log: self.sim.take_log(),
            intervals: self.intervals,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ModuleGeometry;

    fn desk_sim(mode: LayoutMode, boundary: u64) -> Sim {
        let region =
            RegionConfig::new(mode, boundary, ModuleGeometry::desk()).unwrap();
        let mut sim = Sim::new(region, TimingParams::ddr3_1333(), 64);
        sim.capture_commands(true);
        sim
    }

    fn run_to_idle(sim: &mut Sim) -> Vec<Wake> {
        sim.run_until_idle()
    }

    #[test]
    fn single_read_closed_row_completes_at_trcd_tcl_tburst() {
        // ACT at 0, RD at tRCD=9, data at 9 + 9 + 4 = 22, no bridge hop in
        // the baseline layout.
        let mut sim = desk_sim(LayoutMode::BaselineSecded, 0);
        sim.admit(0, Rw::Read, 0).unwrap();
        let wakes = run_to_idle(&mut sim);
        assert_eq!(wakes.len(), 1);
        assert_eq!(wakes[0].at, 22);
        let log = sim.take_log();
        assert_eq!(log[0].kind, CmdKind::Act);
        assert_eq!(log[0].cycle, 0);
        assert_eq!(log[1].kind, CmdKind::Rd);
        assert_eq!(log[1].cycle, 9);
        assert_eq!(log[0].slices.len(), 9);
    }

    #[test]
    fn interwrap_read_takes_one_bridge_cycle_extra() {
        let mut sim = desk_sim(LayoutMode::InterWrap, 128);
        sim.admit(0, Rw::Read, 0).unwrap();
        let wakes = run_to_idle(&mut sim);
        assert_eq!(wakes[0].at, 23);
        // SECDED-region lines skip the bridge even in bridge modes.
        let mut sim = desk_sim(LayoutMode::InterWrap, 64);
        let secded_line = 64 * 64; // page 64 is beyond the 64-page boundary
        sim.admit(0, Rw::Read, secded_line).unwrap();
        let wakes = run_to_idle(&mut sim);
        assert_eq!(wakes[0].at, 22);
    }

    #[test]
    fn row_hit_follows_burst_spacing() {
        // Second read to the same open row: tCCD (=tBURST) after the first.
        let mut sim = desk_sim(LayoutMode::BaselineSecded, 0);
        sim.admit(0, Rw::Read, 0).unwrap();
        sim.admit(0, Rw::Read, 1).unwrap();
        let wakes = run_to_idle(&mut sim);
        assert_eq!(wakes[0].at, 22);
        assert_eq!(wakes[1].at, 26);
        assert_eq!(sim.stats().row_hits, 1);
        assert_eq!(sim.stats().row_misses, 1);
    }

    #[test]
    fn frfcfs_prefers_ready_row_hit_over_older_miss() {
        let mut sim = desk_sim(LayoutMode::BaselineSecded, 0);
        // Warm bank 0 row 2 (page 16) and leave the row open.
        sim.admit(0, Rw::Read, 16 * 64).unwrap();
        run_to_idle(&mut sim);
        let warmup_cmds = sim.stats().acts + sim.stats().row_hits + sim.stats().row_misses;
        assert!(warmup_cmds > 0);

        // Older request misses (row 5), younger hits the open row 2.
        sim.admit(0, Rw::Read, 40 * 64).unwrap();
        sim.admit(0, Rw::Read, 16 * 64 + 1).unwrap();
        run_to_idle(&mut sim);

        let log = sim.take_log();
        let tail: Vec<(CmdKind, u32)> = log[2..].iter().map(|c| (c.kind, c.row)).collect();
        assert_eq!(
            tail,
            vec![
                (CmdKind::Rd, 2),  // the row hit goes first
                (CmdKind::Pre, 5), // then the older miss gets its row work
                (CmdKind::Act, 5),
                (CmdKind::Rd, 5),
            ]
        );
    }

    #[test]
    fn rmw_write_leg_waits_for_read_data() {
        // Packed regular write: read leg, then the write leg no earlier
        // than the read data's return.
        let mut sim = desk_sim(LayoutMode::Packed, 128);
        sim.admit(0, Rw::Write, 0).unwrap();
        run_to_idle(&mut sim);
        let log = sim.take_log();
        let rd = log.iter().find(|c| c.kind == CmdKind::Rd).unwrap();
        let wr = log.iter().find(|c| c.kind == CmdKind::Wr).unwrap();
        let rd_data_end = rd.cycle + 9 + 4; // tCL + tBURST
        assert!(
            wr.cycle >= rd_data_end,
            "write leg at {} before read data at {}",
            wr.cycle,
            rd_data_end
        );
    }

    #[test]
    fn packed_extra_write_is_eight_rmw_pairs_in_order() {
        let mut sim = desk_sim(LayoutMode::Packed, 128);
        let extra_line = sim.region().extra_start_line();
        sim.admit(0, Rw::Write, extra_line).unwrap();
        run_to_idle(&mut sim);
        assert_eq!(sim.stats().device_ops_completed, 16);
        assert_eq!(sim.stats().packed_extra_write_read_legs, 8);
        let log = sim.take_log();
        // Every write to a column follows a read of that column by at
        // least the data return time.
        for wr in log.iter().filter(|c| c.kind == CmdKind::Wr) {
            let rd = log
                .iter()
                .find(|c| c.kind == CmdKind::Rd && c.column == wr.column)
                .expect("write leg without read leg");
            assert!(wr.cycle >= rd.cycle + 13);
        }
    }

    #[test]
    fn fifth_act_waits_for_the_faw_window() {
        let mut sim = desk_sim(LayoutMode::BaselineSecded, 0);
        for page in 0..5 {
            sim.admit(0, Rw::Read, page * 64).unwrap();
        }
        run_to_idle(&mut sim);
        let acts: Vec<u64> = sim
            .take_log()
            .iter()
            .filter(|c| c.kind == CmdKind::Act)
            .map(|c| c.cycle)
            .collect();
        // tRRD=4 spaces the first four; the fifth waits for tFAW=20 past
        // the first.
        assert_eq!(acts, vec![0, 4, 8, 12, 20]);
    }

    #[test]
    fn rank_subset_bursts_overlap_but_full_rank_bursts_serialize() {
        // PackedRS: chips 0-7 and chip 8 are disjoint lanes, so once both
        // rows are open the two reads' bursts overlap in time.
        let mut sim = desk_sim(LayoutMode::PackedRs, 128);
        let extra_line = sim.region().extra_start_line(); // chip 8, bank 0
        sim.admit(0, Rw::Read, 0).unwrap(); // chips 0-7, bank 0
        sim.admit(1, Rw::Read, extra_line).unwrap();
        run_to_idle(&mut sim);
        sim.take_log();
        sim.admit(0, Rw::Read, 1).unwrap();
        sim.admit(1, Rw::Read, extra_line + 1).unwrap();
        run_to_idle(&mut sim);
        let rds: Vec<u64> = sim
            .take_log()
            .iter()
            .filter(|c| c.kind == CmdKind::Rd)
            .map(|c| c.cycle)
            .collect();
        assert!(
            rds[1] < rds[0] + 4,
            "disjoint-chip bursts should overlap: {rds:?}"
        );

        // Baseline: all nine chips in every burst, so data serialises even
        // across open rows in different banks.
        let mut sim = desk_sim(LayoutMode::BaselineSecded, 0);
        sim.admit(0, Rw::Read, 0).unwrap(); // bank 0
        sim.admit(1, Rw::Read, 64).unwrap(); // bank 1
        run_to_idle(&mut sim);
        sim.take_log();
        sim.admit(0, Rw::Read, 1).unwrap();
        sim.admit(1, Rw::Read, 65).unwrap();
        run_to_idle(&mut sim);
        let rds: Vec<u64> = sim
            .take_log()
            .iter()
            .filter(|c| c.kind == CmdKind::Rd)
            .map(|c| c.cycle)
            .collect();
        assert!(rds[1] >= rds[0] + 4, "shared-chip bursts overlapped: {rds:?}");
    }

    #[test]
    fn interwrap_peaks_at_nine_groups_baseline_at_eight() {
        let mut sim = desk_sim(LayoutMode::InterWrap, 128);
        // One read into each of the nine slot groups: pages 0..8 of
        // row-group 0 plus the extra page.
        for page in 0..8 {
            sim.admit(0, Rw::Read, page * 64).unwrap();
        }
        sim.admit(0, Rw::Read, sim.region().extra_start_line()).unwrap();
        run_to_idle(&mut sim);
        assert_eq!(sim.stats().peak_concurrency, 9);

        let mut sim = desk_sim(LayoutMode::BaselineSecded, 0);
        for page in 0..16 {
            sim.admit(0, Rw::Read, page * 64).unwrap();
        }
        run_to_idle(&mut sim);
        assert_eq!(sim.stats().peak_concurrency, 8);
    }

    #[test]
    fn conservation_and_determinism() {
        let run = || {
            let mut sim = desk_sim(LayoutMode::Parity, 128);
            let mut rng = crate::workload::Rng64::new(5);
            let lines = sim.region().capacity_lines();
            for i in 0..200 {
                let line = rng.below(lines);
                let rw = if i % 3 == 0 { Rw::Write } else { Rw::Read };
                // Space the injections out a little and respect the write
                // queue's backpressure.
                if i % 7 == 0 {
                    sim.process_completions();
                    sim.issue_and_advance();
                }
                while rw == Rw::Write && !sim.can_accept_write() {
                    sim.process_completions();
                    sim.issue_and_advance();
                }
                sim.admit(0, rw, line).unwrap();
            }
            run_to_idle(&mut sim);
            let formatted: Vec<String> = sim.take_log().iter().map(|c| c.format()).collect();
            (formatted, *sim.stats())
        };
        let (log_a, stats_a) = run();
        let (log_b, stats_b) = run();
        assert_eq!(log_a, log_b);
        assert_eq!(stats_a.requests_completed, stats_a.requests_injected);
        assert_eq!(stats_a.device_ops_completed, stats_a.device_ops);
        assert_eq!(stats_b.requests_completed, stats_a.requests_completed);
    }

    #[test]
    fn write_queue_applies_backpressure() {
        let region =
            RegionConfig::new(LayoutMode::BaselineSecded, 0, ModuleGeometry::desk()).unwrap();
        let mut sim = Sim::new(region, TimingParams::ddr3_1333(), 1);
        sim.admit(0, Rw::Write, 0).unwrap();
        assert!(!sim.can_accept_write());
        assert!(matches!(
            sim.admit(0, Rw::Write, 64),
            Err(EngineError::WriteQueueFull)
        ));
        run_to_idle(&mut sim);
        assert!(sim.can_accept_write());
    }

    #[test]
    fn refresh_closes_rows_and_blocks_the_rank() {
        let region =
            RegionConfig::new(LayoutMode::BaselineSecded, 0, ModuleGeometry::desk()).unwrap();
        let timing = TimingParams {
            refresh_enabled: true,
            trefi: 60,
            trfc: 20,
            ..TimingParams::ddr3_1333()
        };
        let mut sim = Sim::new(region, timing, 64);
        sim.capture_commands(true);
        sim.admit(0, Rw::Read, 0).unwrap();
        run_to_idle(&mut sim);
        while sim.cycle() < 200 {
            sim.process_completions();
            sim.issue_and_advance();
        }
        assert!(sim.stats().refreshes >= 2, "{}", sim.stats().refreshes);
        // The open row was force-closed for refresh: next read reactivates.
        sim.admit(0, Rw::Read, 1).unwrap();
        let wakes = run_to_idle(&mut sim);
        assert_eq!(wakes.len(), 1);
        let acts = sim.take_log().iter().filter(|c| c.kind == CmdKind::Act).count();
        assert_eq!(acts, 2);
    }
}
