#![allow(dead_code)]

//! Shared test support: an independent DDR timing-legality checker that
//! replays formatted command logs against its own constraint tables.
//!
//! The checker is written from the engine's documented timing contract,
//! not from its code: it parses the stable log line format
//! `cycle KIND c<chip>b<bank>[,...] r<row> c<col|->` and tracks per-slice,
//! per-chip and rank state on its own.

use eccsim::geometry::{ModuleGeometry, SliceId, TimingParams};
use eccsim::layout::{RegionConfig, SideBand};
use std::collections::BTreeMap;

/// Byte-granular account of the whole module: maps every used byte to the
/// line that owns it and panics on any double-use. The exhaustive oracle
/// behind the layout bijectivity checks.
pub struct StorageMap {
    /// (slice index, row, byte offset within the row) -> owning line
    pub bytes: BTreeMap<(usize, u32, u32), (u64, &'static str)>,
    geometry: ModuleGeometry,
}

impl StorageMap {
    pub fn new(geometry: ModuleGeometry) -> Self {
        StorageMap {
            bytes: BTreeMap::new(),
            geometry,
        }
    }

    pub fn claim_byte(
        &mut self,
        slice: SliceId,
        row: u32,
        byte: u32,
        line: u64,
        kind: &'static str,
    ) {
        assert!(row < self.geometry.rows_per_bank);
        assert!(byte < self.geometry.chip_row_bytes());
        let key = (slice.index(&self.geometry), row, byte);
        if let Some(prev) = self.bytes.insert(key, (line, kind)) {
            panic!(
                "byte {slice} row {row} offset {byte} claimed by {kind} of line {line:#x} \
                 and {} of line {:#x}",
                prev.1, prev.0
            );
        }
    }

    pub fn claim_col(&mut self, slice: SliceId, row: u32, col: u32, line: u64, kind: &'static str) {
        for b in 0..self.geometry.chip_bytes_per_line {
            self.claim_byte(
                slice,
                row,
                col * self.geometry.chip_bytes_per_line + b,
                line,
                kind,
            );
        }
    }

    pub fn count(&self, kind: &'static str) -> usize {
        self.bytes.values().filter(|(_, k)| *k == kind).count()
    }
}

/// Enumerate every line's footprint into a byte map, asserting pairwise
/// disjointness along the way.
pub fn build_storage_map(config: &RegionConfig) -> StorageMap {
    let mut map = StorageMap::new(config.geometry);
    for (line, footprint) in config.enumerate_footprints().unwrap() {
        assert_eq!(footprint.lanes.len(), 8, "line {line:#x} lane count");
        for cell in &footprint.lanes {
            map.claim_col(cell.slice, cell.row, cell.col, line, "data");
        }
        match footprint.side {
            Some(SideBand::Secded(cell)) => {
                map.claim_col(cell.slice, cell.row, cell.col, line, "ecc")
            }
            Some(SideBand::ParityByte { cell, byte_in_col }) => map.claim_byte(
                cell.slice,
                cell.row,
                cell.col * config.geometry.chip_bytes_per_line + byte_in_col,
                line,
                "parity",
            ),
            None => {}
        }
    }
    map
}

#[derive(Clone, Copy, Default)]
struct SliceTable {
    open: Option<u32>,
    col_ready: u64,
    next_pre: u64,
    next_act: u64,
    next_col: u64,
}

#[derive(Clone, Copy, Default)]
struct ChipTable {
    lane_free: u64,
    rd_ready: u64,
}

pub struct TimingChecker {
    timing: TimingParams,
    geometry: ModuleGeometry,
    slices: Vec<SliceTable>,
    chips: Vec<ChipTable>,
    act_history: Vec<u64>,
    last_cmd_cycle: Option<u64>,
    pub violations: Vec<String>,
}

struct ParsedCmd {
    cycle: u64,
    kind: String,
    slices: Vec<(u32, u32)>,
    row: u32,
    col: Option<u32>,
}

fn parse_line(line: &str) -> Result<ParsedCmd, String> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() != 5 {
        return Err(format!("bad command line `{line}`"));
    }
    let cycle: u64 = fields[0].parse().map_err(|_| format!("bad cycle in `{line}`"))?;
    let kind = fields[1].to_string();
    let mut slices = Vec::new();
    for part in fields[2].split(',') {
        let rest = part.strip_prefix('c').ok_or_else(|| format!("bad slice `{part}`"))?;
        let (chip, bank) = rest
            .split_once('b')
            .ok_or_else(|| format!("bad slice `{part}`"))?;
        slices.push((
            chip.parse().map_err(|_| format!("bad chip in `{part}`"))?,
            bank.parse().map_err(|_| format!("bad bank in `{part}`"))?,
        ));
    }
    let row: u32 = fields[3]
        .strip_prefix('r')
        .ok_or_else(|| format!("bad row in `{line}`"))?
        .parse()
        .map_err(|_| format!("bad row in `{line}`"))?;
    let col_text = fields[4]
        .strip_prefix('c')
        .ok_or_else(|| format!("bad col in `{line}`"))?;
    let col = if col_text == "-" {
        None
    } else {
        Some(col_text.parse().map_err(|_| format!("bad col in `{line}`"))?)
    };
    Ok(ParsedCmd {
        cycle,
        kind,
        slices,
        row,
        col,
    })
}

impl TimingChecker {
    pub fn new(timing: TimingParams, geometry: ModuleGeometry) -> Self {
        TimingChecker {
            timing,
            geometry,
            slices: vec![SliceTable::default(); geometry.slice_count() as usize],
            chips: vec![ChipTable::default(); geometry.total_chips() as usize],
            act_history: Vec::new(),
            last_cmd_cycle: None,
            violations: Vec::new(),
        }
    }

    fn fail(&mut self, line: &str, reason: String) {
        self.violations.push(format!("{reason} | {line}"));
    }

    pub fn check_line(&mut self, line: &str) {
        let cmd = match parse_line(line) {
            Ok(c) => c,
            Err(e) => {
                self.violations.push(e);
                return;
            }
        };
        let t = cmd.cycle;

        // One command per bus cycle, log in time order.
        if let Some(last) = self.last_cmd_cycle {
            if t <= last {
                self.fail(line, format!("command bus conflict: cycle {t} after {last}"));
            }
        }
        self.last_cmd_cycle = Some(t);

        let banks = self.geometry.banks;
        let slice_indices: Vec<usize> = cmd
            .slices
            .iter()
            .map(|&(chip, bank)| (chip * banks + bank) as usize)
            .collect();
        let mut chip_indices: Vec<usize> = cmd.slices.iter().map(|&(c, _)| c as usize).collect();
        chip_indices.sort_unstable();
        chip_indices.dedup();

        let tm = self.timing;
        match cmd.kind.as_str() {
            "ACT" => {
                if self.act_history.len() >= 4 {
                    let fourth_back = self.act_history[self.act_history.len() - 4];
                    if t < fourth_back + tm.tfaw as u64 {
                        self.fail(line, format!("tFAW: 5th ACT at {t} within window of {fourth_back}"));
                    }
                }
                if let Some(&last_act) = self.act_history.last() {
                    if t < last_act + tm.trrd as u64 {
                        self.fail(line, format!("tRRD: ACT at {t} after ACT at {last_act}"));
                    }
                }
                for &s in &slice_indices {
                    let slice = self.slices[s];
                    if slice.open.is_some() {
                        self.fail(line, format!("ACT to open slice {s}"));
                    }
                    if t < slice.next_act {
                        self.fail(line, format!("tRC/tRP: ACT at {t} before {}", slice.next_act));
                    }
                    let slice = &mut self.slices[s];
                    slice.open = Some(cmd.row);
                    slice.col_ready = t + tm.trcd as u64;
                    slice.next_pre = slice.next_pre.max(t + tm.tras as u64);
                    slice.next_act = t + tm.trc as u64;
                }
                self.act_history.push(t);
            }
            "PRE" => {
                for &s in &slice_indices {
                    let slice = self.slices[s];
                    if slice.open.is_none() {
                        self.fail(line, format!("PRE to closed slice {s}"));
                    }
                    if t < slice.next_pre {
                        self.fail(
                            line,
                            format!("tRAS/tRTP/tWR: PRE at {t} before {}", slice.next_pre),
                        );
                    }
                    let slice = &mut self.slices[s];
                    slice.open = None;
                    slice.next_act = slice.next_act.max(t + tm.trp as u64);
                }
            }
            "RD" | "WR" => {
                if cmd.col.is_none() {
                    self.fail(line, "column command without a column".to_string());
                }
                for &s in &slice_indices {
                    let slice = self.slices[s];
                    if slice.open != Some(cmd.row) {
                        self.fail(
                            line,
                            format!("column command to slice {s} open at {:?}", slice.open),
                        );
                    }
                    if t < slice.col_ready {
                        self.fail(line, format!("tRCD: column at {t} before {}", slice.col_ready));
                    }
                    if t < slice.next_col {
                        self.fail(line, format!("tCCD: column at {t} before {}", slice.next_col));
                    }
                }
                let (lead, is_read) = if cmd.kind == "RD" {
                    (tm.tcl as u64, true)
                } else {
                    (tm.tcwl as u64, false)
                };
                let data_start = t + lead;
                let data_end = data_start + tm.tburst as u64;
                for &c in &chip_indices {
                    let chip = self.chips[c];
                    if data_start < chip.lane_free {
                        self.fail(
                            line,
                            format!(
                                "lane overlap on chip {c}: data at {data_start} before {}",
                                chip.lane_free
                            ),
                        );
                    }
                    if is_read && t < chip.rd_ready {
                        self.fail(line, format!("tWTR: RD at {t} before {}", chip.rd_ready));
                    }
                }
                for &s in &slice_indices {
                    let slice = &mut self.slices[s];
                    slice.next_col = t + tm.tccd as u64;
                    slice.next_pre = slice.next_pre.max(if is_read {
                        t + tm.trtp as u64
                    } else {
                        data_end + tm.twr as u64
                    });
                }
                for &c in &chip_indices {
                    let chip = &mut self.chips[c];
                    chip.lane_free = data_end;
                    if !is_read {
                        chip.rd_ready = data_end + tm.twtr as u64;
                    }
                }
            }
            other => self.fail(line, format!("unknown command `{other}`")),
        }
    }

    pub fn check_log(
        timing: TimingParams,
        geometry: ModuleGeometry,
        lines: &[String],
    ) -> Vec<String> {
        let mut checker = TimingChecker::new(timing, geometry);
        for line in lines {
            checker.check_line(line);
        }
        checker.violations
    }
}
