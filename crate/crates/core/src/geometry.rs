//! Physical shape and timing constants of the simulated ECC DIMM.
//!
//! The unit of independent row-buffer state is a *bank slice*: one
//! (chip, bank) pair. A default module has 9 chips x 8 banks = 72 slices.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GeometryError {
    #[error("data chips ({chips}) x {per_line}B per chip must equal the {line}B cache line")]
    ChipsLineMismatch { chips: u32, per_line: u32, line: u32 },
    #[error("module needs exactly one ECC chip, got {0}")]
    EccChips(u32),
    #[error("field `{0}` must be positive")]
    ZeroField(&'static str),
    #[error("tRC ({trc}) must cover tRAS + tRP ({tras} + {trp})")]
    RowCycle { trc: u32, tras: u32, trp: u32 },
    #[error("tBURST must be {expected} cycles for {bursts} double-data-rate bursts, got {got}")]
    BurstLength { expected: u32, bursts: u32, got: u32 },
}

/// Shape of the simulated DIMM.
///
/// Desk-scale default keeps 16 rows per bank so exhaustive enumeration of
/// every cache-line footprint stays trivially cheap; `full_size()` gives the
/// 8GB module shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModuleGeometry {
    pub data_chips: u32,
    pub ecc_chips: u32,
    /// Banks per chip (and per rank, since chips move in lockstep).
    pub banks: u32,
    pub rows_per_bank: u32,
    /// Cache lines per DRAM row; 64 lines x 64B = one 4KB page per row.
    pub lines_per_row: u32,
    pub line_bytes: u32,
    /// Bytes each chip contributes to one cache line (x8 chips -> 8B).
    pub chip_bytes_per_line: u32,
    pub bursts_per_line: u32,
}

impl Default for ModuleGeometry {
    fn default() -> Self {
        Self {
            data_chips: 8,
            ecc_chips: 1,
            banks: 8,
            rows_per_bank: 16,
            lines_per_row: 64,
            line_bytes: 64,
            chip_bytes_per_line: 8,
            bursts_per_line: 8,
        }
    }
}

impl ModuleGeometry {
    /// Desk-scale module: 9 chips x 8 banks x 16 rows (128 baseline pages).
    pub fn desk() -> Self {
        Self::default()
    }

    /// 8GB module shape: 2^21 baseline pages of 4KB.
    pub fn full_size() -> Self {
        Self {
            rows_per_bank: 1 << 18,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        for (name, v) in [
            ("data_chips", self.data_chips),
            ("banks", self.banks),
            ("rows_per_bank", self.rows_per_bank),
            ("lines_per_row", self.lines_per_row),
            ("line_bytes", self.line_bytes),
            ("chip_bytes_per_line", self.chip_bytes_per_line),
            ("bursts_per_line", self.bursts_per_line),
        ] {
            if v == 0 {
                return Err(GeometryError::ZeroField(name));
            }
        }
        if self.data_chips * self.chip_bytes_per_line != self.line_bytes {
            return Err(GeometryError::ChipsLineMismatch {
                chips: self.data_chips,
                per_line: self.chip_bytes_per_line,
                line: self.line_bytes,
            });
        }
        // The adaptive layouts carve capacity out of the ninth chip; a module
        // without it (or with several) is outside the model.
        if self.ecc_chips != 1 {
            return Err(GeometryError::EccChips(self.ecc_chips));
        }
        Ok(())
    }

    pub fn total_chips(&self) -> u32 {
        self.data_chips + self.ecc_chips
    }

    /// Index of the ECC chip (the last one).
    pub fn ecc_chip(&self) -> u32 {
        self.data_chips
    }

    pub fn slice_count(&self) -> u32 {
        self.total_chips() * self.banks
    }

    pub fn baseline_pages(&self) -> u64 {
        self.banks as u64 * self.rows_per_bank as u64
    }

    pub fn baseline_lines(&self) -> u64 {
        self.baseline_pages() * self.lines_per_row as u64
    }

    /// Payload bytes one chip holds per row (512B at defaults).
    pub fn chip_row_bytes(&self) -> u32 {
        self.lines_per_row * self.chip_bytes_per_line
    }

    pub fn page_bytes(&self) -> u32 {
        self.lines_per_row * self.line_bytes
    }
}

/// One (chip, bank) pair: the finest independently trackable row-buffer unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SliceId {
    pub chip: u32,
    pub bank: u32,
}

impl SliceId {
    pub fn new(chip: u32, bank: u32) -> Self {
        Self { chip, bank }
    }

    /// Dense index in chip-major order.
    pub fn index(&self, geometry: &ModuleGeometry) -> usize {
        (self.chip * geometry.banks + self.bank) as usize
    }

    pub fn from_index(index: usize, geometry: &ModuleGeometry) -> Self {
        let banks = geometry.banks as usize;
        Self {
            chip: (index / banks) as u32,
            bank: (index % banks) as u32,
        }
    }
}

impl std::fmt::Display for SliceId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "c{}b{}", self.chip, self.bank)
    }
}

/// DDR3-class timing constants, in memory-clock cycles unless noted.
///
/// The speed grade pins tCK; the sub-timings follow a JEDEC-style
/// DDR3-1333 profile so that runs are reproducible from the config alone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimingParams {
    /// Memory clock period in nanoseconds.
    pub tck_ns: f64,
    pub trcd: u32,
    pub trp: u32,
    pub tcl: u32,
    pub tcwl: u32,
    pub tras: u32,
    pub trc: u32,
    pub tccd: u32,
    pub tburst: u32,
    pub twr: u32,
    pub twtr: u32,
    pub trtp: u32,
    pub trrd: u32,
    pub tfaw: u32,
    pub trefi: u32,
    pub trfc: u32,
    /// Extra cycles spent in the DIMM bridge chip for translated requests.
    pub bridge_delay: u32,
    /// Refresh is noise on desk-scale traces; off unless asked for.
    pub refresh_enabled: bool,
}

impl Default for TimingParams {
    fn default() -> Self {
        Self::ddr3_1333()
    }
}

impl TimingParams {
    /// DDR3-1333H profile at tCK = 1.5ns.
    pub fn ddr3_1333() -> Self {
        Self {
            tck_ns: 1.5,
            trcd: 9,
            trp: 9,
            tcl: 9,
            tcwl: 7,
            tras: 24,
            trc: 33,
            tccd: 4,
            tburst: 4,
            twr: 10,
            twtr: 5,
            trtp: 5,
            trrd: 4,
            tfaw: 20,
            trefi: 5200,
            trfc: 74,
            bridge_delay: 1,
            refresh_enabled: false,
        }
    }

    pub fn validate(&self, geometry: &ModuleGeometry) -> Result<(), GeometryError> {
        if !self.tck_ns.is_finite() || self.tck_ns <= 0.0 {
            return Err(GeometryError::ZeroField("tck_ns"));
        }
        for (name, v) in [
            ("trcd", self.trcd),
            ("trp", self.trp),
            ("tcl", self.tcl),
            ("tcwl", self.tcwl),
            ("tras", self.tras),
            ("trc", self.trc),
            ("tccd", self.tccd),
            ("tburst", self.tburst),
            ("twr", self.twr),
            ("twtr", self.twtr),
            ("trtp", self.trtp),
            ("trrd", self.trrd),
            ("tfaw", self.tfaw),
            ("trefi", self.trefi),
            ("trfc", self.trfc),
        ] {
            if v == 0 {
                return Err(GeometryError::ZeroField(name));
            }
        }
        if self.trc < self.tras + self.trp {
            return Err(GeometryError::RowCycle {
                trc: self.trc,
                tras: self.tras,
                trp: self.trp,
            });
        }
        // Double data rate: two transfers per cycle.
        let expected = geometry.bursts_per_line / 2;
        if self.tburst != expected {
            return Err(GeometryError::BurstLength {
                expected,
                bursts: geometry.bursts_per_line,
                got: self.tburst,
            });
        }
        Ok(())
    }
}
