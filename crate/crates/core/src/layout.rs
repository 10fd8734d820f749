//! Data layouts: maps every physical cache-line address to the exact storage
//! it occupies and expands logical reads/writes into ordered device
//! operations.
//!
//! The physical address space, in 64B cache-line units, is split in three:
//!
//! ```text
//! 0 .. boundary          reduced-protection region, laid out per mode
//! boundary .. baseline   SECDED region, conventional ECC placement
//! baseline .. capacity   extra pages carved out of the ninth chip
//! ```
//!
//! The boundary moves in whole row-groups (one row across all banks), so
//! extra pages and wrap groups never straddle it.

use crate::geometry::{GeometryError, ModuleGeometry, SliceId};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LayoutError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("boundary of {boundary} pages exceeds the {baseline} baseline pages")]
    BoundaryRange { boundary: u64, baseline: u64 },
    #[error("boundary of {boundary} pages is not a whole number of row-groups ({banks} pages)")]
    BoundaryGranularity { boundary: u64, banks: u32 },
    #[error("layout `{mode}` requires an 8+1-chip module with 8 banks and 64 lines per row")]
    UnsupportedShape { mode: LayoutMode },
    #[error("line address {line:#x} is outside the {capacity}-line address space")]
    AddressRange { line: u64, capacity: u64 },
    #[error("line address {line:#x} is below the extra region starting at {start:#x}")]
    NotExtra { line: u64, start: u64 },
    #[error("extra-region translation is only defined for the packed layouts, not `{0}`")]
    NotPacked(LayoutMode),
    #[error("refusing to enumerate {lines} footprints (limit {limit})")]
    TooLarge { lines: u64, limit: u64 },
}

/// The five supported data layouts. Exactly one governs the
/// reduced-protection region; pages beyond the boundary always keep the
/// conventional SECDED placement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LayoutMode {
    /// Unmodified ECC DRAM: every line striped over chips 0-7 with its
    /// SECDED word on chip 8.
    BaselineSecded,
    /// Extra pages packed into chip 8; the rank stays fully lockstep, so
    /// every write becomes a read-modify-write.
    Packed,
    /// Packed layout plus rank subsetting (chips 0-7 / chip 8), which
    /// removes the read-modify-writes.
    PackedRs,
    /// Inter-bank wrap-around: pages wrap into the neighbouring bank's high
    /// chips so all lines stay one operation wide; the 72 slices form 9
    /// independent groups.
    InterWrap,
    /// Detection only: one parity byte per line on chip 8, remaining chip-8
    /// space packed with extra pages.
    Parity,
}

impl LayoutMode {
    pub const ALL: [LayoutMode; 5] = [
        LayoutMode::BaselineSecded,
        LayoutMode::Packed,
        LayoutMode::PackedRs,
        LayoutMode::InterWrap,
        LayoutMode::Parity,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            LayoutMode::BaselineSecded => "baseline",
            LayoutMode::Packed => "packed",
            LayoutMode::PackedRs => "packed-rs",
            LayoutMode::InterWrap => "inter-wrap",
            LayoutMode::Parity => "parity",
        }
    }

    /// Commands for translated addresses pass through the DIMM bridge chip
    /// in the rank-subsetting layouts.
    pub fn uses_bridge(&self) -> bool {
        matches!(
            self,
            LayoutMode::PackedRs | LayoutMode::InterWrap | LayoutMode::Parity
        )
    }
}

impl std::fmt::Display for LayoutMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for LayoutMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "baseline" | "baseline-secded" => Ok(LayoutMode::BaselineSecded),
            "packed" => Ok(LayoutMode::Packed),
            "packed-rs" => Ok(LayoutMode::PackedRs),
            "inter-wrap" => Ok(LayoutMode::InterWrap),
            "parity" => Ok(LayoutMode::Parity),
            other => Err(format!(
                "unknown layout `{other}` (expected baseline, packed, packed-rs, inter-wrap or parity)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rw {
    Read,
    Write,
}

/// One 8-byte storage cell: a column of one slice's row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Cell {
    pub slice: SliceId,
    pub row: u32,
    pub col: u32,
}

/// Side-band storage accompanying a cache line's data lanes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SideBand {
    /// Full 8-byte SECDED word on the ECC chip, same bank/row/column.
    Secded(Cell),
    /// Single parity byte within a chip-8 column of the partner bank.
    ParityByte { cell: Cell, byte_in_col: u32 },
}

/// Where one cache line lives: eight 8-byte data cells plus optional
/// side-band protection data.
///
/// For striped placements the cells are the byte lanes (lane j carries byte
/// j of every burst) and share one column; for packed placements the line
/// sits in eight consecutive columns of a single chip-8 slice.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Footprint {
    pub lanes: Vec<Cell>,
    pub side: Option<SideBand>,
}

impl Footprint {
    /// Distinct slices touched by the data lanes.
    pub fn data_slices(&self) -> Vec<SliceId> {
        let mut slices: Vec<SliceId> = self.lanes.iter().map(|c| c.slice).collect();
        slices.sort();
        slices.dedup();
        slices
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OpRole {
    Data,
    EccSide,
    ParityRead,
    ParityWrite,
}

impl OpRole {
    pub fn name(&self) -> &'static str {
        match self {
            OpRole::Data => "data",
            OpRole::EccSide => "ecc-side",
            OpRole::ParityRead => "parity-read",
            OpRole::ParityWrite => "parity-write",
        }
    }
}

/// One lockstep device operation: a read or write of one column addressed
/// to a set of slices sharing a row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DeviceOp {
    pub rw: Rw,
    pub slices: Vec<SliceId>,
    pub row: u32,
    pub column: u32,
    pub role: OpRole,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Staging {
    None,
    /// Read legs stage 64B in the controller; each write leg may only issue
    /// after the read leg covering the same column has returned.
    Rmw,
}

/// The ordered device operations one logical request expands into.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AccessPlan {
    pub ops: Vec<DeviceOp>,
    pub staging: Staging,
}

impl AccessPlan {
    fn simple(op: DeviceOp) -> Self {
        AccessPlan {
            ops: vec![op],
            staging: Staging::None,
        }
    }
}

/// Region of the physical line address space a line falls in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    /// Reduced-protection region below the boundary.
    Adaptive,
    /// Conventionally laid out SECDED region.
    Secded,
    /// Extra pages carved out of the ninth chip.
    Extra,
}

/// Layout mode plus the boundary splitting the module into an adaptive
/// region and a SECDED region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionConfig {
    pub mode: LayoutMode,
    pub boundary_pages: u64,
    pub geometry: ModuleGeometry,
}

impl RegionConfig {
    pub fn new(
        mode: LayoutMode,
        boundary_pages: u64,
        geometry: ModuleGeometry,
    ) -> Result<Self, LayoutError> {
        let config = RegionConfig {
            mode,
            boundary_pages,
            geometry,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), LayoutError> {
        self.geometry.validate()?;
        let baseline = self.geometry.baseline_pages();
        if self.boundary_pages > baseline {
            return Err(LayoutError::BoundaryRange {
                boundary: self.boundary_pages,
                baseline,
            });
        }
        if !self.boundary_pages.is_multiple_of(self.geometry.banks as u64) {
            return Err(LayoutError::BoundaryGranularity {
                boundary: self.boundary_pages,
                banks: self.geometry.banks,
            });
        }
        // The adaptive layouts are defined for the 8+1 x8 module shape: a
        // wrap group spans exactly the 9 chips, and a packed page fills
        // exactly one chip-8 row across the 8 banks.
        if self.mode != LayoutMode::BaselineSecded {
            let g = &self.geometry;
            if g.data_chips != 8 || g.banks != 8 || g.lines_per_row != 64 {
                return Err(LayoutError::UnsupportedShape { mode: self.mode });
            }
        }
        Ok(())
    }

    /// Row-groups inside the adaptive region.
    pub fn row_groups(&self) -> u64 {
        match self.mode {
            LayoutMode::BaselineSecded => 0,
            _ => self.boundary_pages / self.geometry.banks as u64,
        }
    }

    /// Chip-8 rows holding parity for regular pages (parity mode only).
    /// One parity row covers eight pages.
    pub fn regular_parity_rows(&self) -> u64 {
        let per_row = (self.geometry.chip_row_bytes() / self.geometry.lines_per_row) as u64;
        self.row_groups().div_ceil(per_row)
    }

    /// Chip-8 rows holding parity for extra pages (parity mode only).
    /// One row covers 64 extra pages (8 parity bytes per page per bank).
    pub fn extra_parity_rows(&self) -> u64 {
        self.extra_pages().div_ceil(self.extra_pages_per_parity_row())
    }

    fn extra_pages_per_parity_row(&self) -> u64 {
        let g = &self.geometry;
        (g.chip_row_bytes() / (g.lines_per_row / g.banks)) as u64
    }

    /// Extra pages the layout exposes beyond the baseline capacity.
    pub fn extra_pages(&self) -> u64 {
        let row_groups = self.row_groups();
        match self.mode {
            LayoutMode::BaselineSecded => 0,
            LayoutMode::Packed | LayoutMode::PackedRs | LayoutMode::InterWrap => row_groups,
            LayoutMode::Parity => {
                // Chip-8 rows in the adaptive region must hold the extra
                // pages, the regular parity and the extra pages' own parity:
                //   e + ceil(G/8) + ceil(e/64) <= G
                let budget = match row_groups.checked_sub(self.regular_parity_rows()) {
                    Some(b) => b,
                    None => return 0,
                };
                let per_row = self.extra_pages_per_parity_row();
                let fits = |e: u64| e + e.div_ceil(per_row) <= budget;
                let (mut lo, mut hi) = (0u64, budget);
                while lo < hi {
                    let mid = (lo + hi).div_ceil(2);
                    if fits(mid) {
                        lo = mid;
                    } else {
                        hi = mid - 1;
                    }
                }
                lo
            }
        }
    }

    /// Total addressable pages: baseline plus the extra pages.
    pub fn capacity_pages(&self) -> u64 {
        self.geometry.baseline_pages() + self.extra_pages()
    }

    pub fn capacity_lines(&self) -> u64 {
        self.capacity_pages() * self.geometry.lines_per_row as u64
    }

    pub fn boundary_lines(&self) -> u64 {
        self.boundary_pages * self.geometry.lines_per_row as u64
    }

    /// First line of the extra region (also the baseline line count).
    pub fn extra_start_line(&self) -> u64 {
        self.geometry.baseline_lines()
    }

    pub fn region_of(&self, line: u64) -> Result<Region, LayoutError> {
        if line >= self.capacity_lines() {
            return Err(LayoutError::AddressRange {
                line,
                capacity: self.capacity_lines(),
            });
        }
        let baseline = self.geometry.baseline_lines();
        Ok(if line >= baseline {
            Region::Extra
        } else if self.mode != LayoutMode::BaselineSecded && line < self.boundary_lines() {
            Region::Adaptive
        } else {
            Region::Secded
        })
    }

    fn ecc_chip(&self) -> u32 {
        self.geometry.ecc_chip()
    }

    /// Chip left out of the wrap group for a slot (`8 - slot`). Slot 8 is
    /// the extra page, which skips chip 0.
    pub fn ignored_chip(&self, slot: u32) -> u32 {
        self.ecc_chip() - slot
    }

    /// Byte lanes of an inter-wrap slot: lanes that no longer fit in the
    /// slot's own bank spill into the previous bank's high chips.
    fn interwrap_lanes(&self, slot: u32, row: u32, col: u32) -> Vec<Cell> {
        let banks = self.geometry.banks;
        (0..self.geometry.data_chips)
            .map(|lane| {
                let (chip, bank) = if lane + slot < self.geometry.data_chips {
                    (lane, slot)
                } else {
                    (lane + 1, slot - 1)
                };
                debug_assert!(bank < banks && chip != self.ignored_chip(slot));
                Cell {
                    slice: SliceId::new(chip, bank),
                    row,
                    col,
                }
            })
            .collect()
    }

    /// The slice set a wrap slot always operates on, independent of the row.
    pub fn interwrap_group(&self, slot: u32) -> Vec<SliceId> {
        let mut slices: Vec<SliceId> = self
            .interwrap_lanes(slot, 0, 0)
            .into_iter()
            .map(|c| c.slice)
            .collect();
        slices.sort();
        slices
    }

    fn baseline_lanes(&self, bank: u32, row: u32, col: u32) -> Vec<Cell> {
        (0..self.geometry.data_chips)
            .map(|chip| Cell {
                slice: SliceId::new(chip, bank),
                row,
                col,
            })
            .collect()
    }

    /// Packed placement of one extra-page line: eight consecutive columns of
    /// a single chip-8 row. `chip8_row` differs between the packed layouts
    /// (row = page index) and parity (pages sit above the parity rows).
    fn packed_lanes(&self, chip8_row: u32, cl: u32) -> Vec<Cell> {
        let lines_per_bank = self.geometry.lines_per_row / self.geometry.banks;
        let bank = cl / lines_per_bank;
        let col0 = (cl % lines_per_bank) * self.geometry.chip_bytes_per_line;
        (0..self.geometry.chip_bytes_per_line)
            .map(|d| Cell {
                slice: SliceId::new(self.ecc_chip(), bank),
                row: chip8_row,
                col: col0 + d,
            })
            .collect()
    }

    /// Parity byte for a line whose data sits in `data_bank`: stored on
    /// chip 8 of bank (b+4) mod banks to dodge row-buffer conflicts.
    fn parity_bank(&self, data_bank: u32) -> u32 {
        (data_bank + 4) % self.geometry.banks
    }

    fn parity_side_regular(&self, page: u64, cl: u32) -> SideBand {
        let g = &self.geometry;
        let bank = (page % g.banks as u64) as u32;
        let page_row = (page / g.banks as u64) as u32;
        let byte_offset = (page_row % 8) * g.page_bytes() / g.line_bytes + cl;
        SideBand::ParityByte {
            cell: Cell {
                slice: SliceId::new(self.ecc_chip(), self.parity_bank(bank)),
                row: page_row / 8,
                col: byte_offset / g.chip_bytes_per_line,
            },
            byte_in_col: byte_offset % g.chip_bytes_per_line,
        }
    }

    fn parity_side_extra(&self, extra_page: u64, cl: u32) -> SideBand {
        let g = &self.geometry;
        let lines_per_bank = g.lines_per_row / g.banks;
        let data_bank = cl / lines_per_bank;
        let per_row = self.extra_pages_per_parity_row();
        let row = self.regular_parity_rows() + extra_page / per_row;
        SideBand::ParityByte {
            cell: Cell {
                slice: SliceId::new(self.ecc_chip(), self.parity_bank(data_bank)),
                row: row as u32,
                col: (extra_page % per_row) as u32,
            },
            byte_in_col: cl % lines_per_bank,
        }
    }

    /// Chip-8 row holding extra page `e`. The packed layouts use the page
    /// index directly; parity appends the extra pages after the parity rows.
    fn extra_page_row(&self, extra_page: u64) -> u32 {
        let base = match self.mode {
            LayoutMode::Parity => self.regular_parity_rows() + self.extra_parity_rows(),
            _ => 0,
        };
        (base + extra_page) as u32
    }

    /// Storage occupied by one cache line.
    pub fn locate(&self, line: u64) -> Result<Footprint, LayoutError> {
        let g = self.geometry;
        let region = self.region_of(line)?;
        let lpr = g.lines_per_row as u64;
        let cl = (line % lpr) as u32;

        Ok(match region {
            Region::Secded => {
                let page = line / lpr;
                let bank = (page % g.banks as u64) as u32;
                let row = (page / g.banks as u64) as u32;
                Footprint {
                    lanes: self.baseline_lanes(bank, row, cl),
                    side: Some(SideBand::Secded(Cell {
                        slice: SliceId::new(self.ecc_chip(), bank),
                        row,
                        col: cl,
                    })),
                }
            }
            Region::Adaptive => {
                let page = line / lpr;
                match self.mode {
                    LayoutMode::BaselineSecded => unreachable!("baseline has no adaptive region"),
                    LayoutMode::Packed | LayoutMode::PackedRs => {
                        let bank = (page % g.banks as u64) as u32;
                        let row = (page / g.banks as u64) as u32;
                        Footprint {
                            lanes: self.baseline_lanes(bank, row, cl),
                            side: None,
                        }
                    }
                    LayoutMode::InterWrap => {
                        let slot = (page % g.banks as u64) as u32;
                        let row = (page / g.banks as u64) as u32;
                        Footprint {
                            lanes: self.interwrap_lanes(slot, row, cl),
                            side: None,
                        }
                    }
                    LayoutMode::Parity => {
                        let bank = (page % g.banks as u64) as u32;
                        let row = (page / g.banks as u64) as u32;
                        Footprint {
                            lanes: self.baseline_lanes(bank, row, cl),
                            side: Some(self.parity_side_regular(page, cl)),
                        }
                    }
                }
            }
            Region::Extra => {
                let extra_page = (line - self.extra_start_line()) / lpr;
                match self.mode {
                    LayoutMode::BaselineSecded => unreachable!("baseline has no extra region"),
                    LayoutMode::Packed | LayoutMode::PackedRs => Footprint {
                        lanes: self.packed_lanes(self.extra_page_row(extra_page), cl),
                        side: None,
                    },
                    LayoutMode::InterWrap => Footprint {
                        lanes: self.interwrap_lanes(g.banks, extra_page as u32, cl),
                        side: None,
                    },
                    LayoutMode::Parity => Footprint {
                        lanes: self.packed_lanes(self.extra_page_row(extra_page), cl),
                        side: Some(self.parity_side_extra(extra_page, cl)),
                    },
                }
            }
        })
    }

    /// Baseline lines whose chip-8 columns compose an extra-region line in
    /// the packed layouts: `(line - baseline) * 8 + 0..8`.
    pub fn translate_extra(&self, line: u64) -> Result<[u64; 8], LayoutError> {
        if !matches!(self.mode, LayoutMode::Packed | LayoutMode::PackedRs) {
            return Err(LayoutError::NotPacked(self.mode));
        }
        let start = self.extra_start_line();
        if line >= self.capacity_lines() {
            return Err(LayoutError::AddressRange {
                line,
                capacity: self.capacity_lines(),
            });
        }
        if line < start {
            return Err(LayoutError::NotExtra { line, start });
        }
        let base = (line - start) * self.geometry.chip_bytes_per_line as u64;
        Ok(std::array::from_fn(|d| base + d as u64))
    }

    fn full_rank_group(&self, bank: u32) -> Vec<SliceId> {
        (0..self.geometry.total_chips())
            .map(|chip| SliceId::new(chip, bank))
            .collect()
    }

    fn data_subset_group(&self, bank: u32) -> Vec<SliceId> {
        (0..self.geometry.data_chips)
            .map(|chip| SliceId::new(chip, bank))
            .collect()
    }

    fn ecc_subset_group(&self, bank: u32) -> Vec<SliceId> {
        vec![SliceId::new(self.ecc_chip(), bank)]
    }

    /// Ordered device operations for one logical request.
    pub fn plan_access(&self, line: u64, rw: Rw) -> Result<AccessPlan, LayoutError> {
        let g = self.geometry;
        let region = self.region_of(line)?;
        let lpr = g.lines_per_row as u64;
        let cl = (line % lpr) as u32;
        let footprint = self.locate(line)?;

        let op = |rw: Rw, slices: Vec<SliceId>, row: u32, column: u32, role: OpRole| DeviceOp {
            rw,
            slices,
            row,
            column,
            role,
        };

        // SECDED pages are serviced exactly as on an unmodified module: one
        // lockstep operation over all nine chips.
        if matches!(region, Region::Secded) {
            let lane = footprint.lanes[0];
            return Ok(AccessPlan::simple(op(
                rw,
                self.full_rank_group(lane.slice.bank),
                lane.row,
                cl,
                OpRole::Data,
            )));
        }

        Ok(match self.mode {
            LayoutMode::BaselineSecded => unreachable!("handled as SECDED region"),
            LayoutMode::Packed => {
                // No module changes: every command drives all nine chips.
                match region {
                    Region::Adaptive => {
                        let lane = footprint.lanes[0];
                        let group = self.full_rank_group(lane.slice.bank);
                        match rw {
                            Rw::Read => AccessPlan::simple(op(
                                Rw::Read,
                                group,
                                lane.row,
                                cl,
                                OpRole::Data,
                            )),
                            // Chip 8 holds some extra page's bytes at this
                            // column; read them first and write them back.
                            Rw::Write => AccessPlan {
                                ops: vec![
                                    op(Rw::Read, group.clone(), lane.row, cl, OpRole::Data),
                                    op(Rw::Write, group, lane.row, cl, OpRole::Data),
                                ],
                                staging: Staging::Rmw,
                            },
                        }
                    }
                    Region::Extra => {
                        // Eight one-column operations; writes clobber chips
                        // 0-7 (another page's lines), hence eight RMW pairs.
                        let mut ops = Vec::new();
                        for lane in &footprint.lanes {
                            let group = self.full_rank_group(lane.slice.bank);
                            match rw {
                                Rw::Read => {
                                    ops.push(op(Rw::Read, group, lane.row, lane.col, OpRole::Data))
                                }
                                Rw::Write => {
                                    ops.push(op(
                                        Rw::Read,
                                        group.clone(),
                                        lane.row,
                                        lane.col,
                                        OpRole::Data,
                                    ));
                                    ops.push(op(Rw::Write, group, lane.row, lane.col, OpRole::Data));
                                }
                            }
                        }
                        AccessPlan {
                            ops,
                            staging: match rw {
                                Rw::Read => Staging::None,
                                Rw::Write => Staging::Rmw,
                            },
                        }
                    }
                    Region::Secded => unreachable!(),
                }
            }
            LayoutMode::PackedRs => match region {
                // The bridge enables only the subset holding the data, so
                // no RMW anywhere.
                Region::Adaptive => {
                    let lane = footprint.lanes[0];
                    AccessPlan::simple(op(
                        rw,
                        self.data_subset_group(lane.slice.bank),
                        lane.row,
                        cl,
                        OpRole::Data,
                    ))
                }
                Region::Extra => AccessPlan {
                    ops: footprint
                        .lanes
                        .iter()
                        .map(|lane| {
                            op(
                                rw,
                                self.ecc_subset_group(lane.slice.bank),
                                lane.row,
                                lane.col,
                                OpRole::Data,
                            )
                        })
                        .collect(),
                    staging: Staging::None,
                },
                Region::Secded => unreachable!(),
            },
            LayoutMode::InterWrap => {
                // Every line is striped over its slot's eight slices: one
                // operation, read or write, no exceptions.
                let row = footprint.lanes[0].row;
                let mut slices: Vec<SliceId> =
                    footprint.lanes.iter().map(|c| c.slice).collect();
                slices.sort();
                AccessPlan::simple(op(rw, slices, row, cl, OpRole::Data))
            }
            LayoutMode::Parity => {
                let Some(SideBand::ParityByte { cell: parity, .. }) = footprint.side else {
                    unreachable!("parity lines carry a parity byte")
                };
                let parity_group = self.ecc_subset_group(parity.slice.bank);
                let mut ops = Vec::new();
                match region {
                    Region::Adaptive => {
                        let lane = footprint.lanes[0];
                        let group = self.data_subset_group(lane.slice.bank);
                        ops.push(op(rw, group, lane.row, cl, OpRole::Data));
                    }
                    Region::Extra => {
                        for lane in &footprint.lanes {
                            ops.push(op(
                                rw,
                                self.ecc_subset_group(lane.slice.bank),
                                lane.row,
                                lane.col,
                                OpRole::Data,
                            ));
                        }
                    }
                    Region::Secded => unreachable!(),
                }
                match rw {
                    Rw::Read => {
                        ops.push(op(
                            Rw::Read,
                            parity_group,
                            parity.row,
                            parity.col,
                            OpRole::ParityRead,
                        ));
                        AccessPlan {
                            ops,
                            staging: Staging::None,
                        }
                    }
                    Rw::Write => {
                        // The column holds parity for other lines too:
                        // read-modify-write the 8-byte column.
                        ops.push(op(
                            Rw::Read,
                            parity_group.clone(),
                            parity.row,
                            parity.col,
                            OpRole::ParityRead,
                        ));
                        ops.push(op(
                            Rw::Write,
                            parity_group,
                            parity.row,
                            parity.col,
                            OpRole::ParityWrite,
                        ));
                        AccessPlan {
                            ops,
                            staging: Staging::Rmw,
                        }
                    }
                }
            }
        })
    }

    /// Footprints for the whole address space. Guarded so the exhaustive
    /// oracle stays a desk-scale tool.
    pub fn enumerate_footprints(&self) -> Result<Vec<(u64, Footprint)>, LayoutError> {
        const LIMIT: u64 = 1 << 22;
        let lines = self.capacity_lines();
        if lines > LIMIT {
            return Err(LayoutError::TooLarge {
                lines,
                limit: LIMIT,
            });
        }
        (0..lines)
            .map(|line| Ok((line, self.locate(line)?)))
            .collect()
    }
}
