//! Trace ingestion, synthetic workload generation and classification.
//!
//! The trace format is plain text, one memory operation per line:
//!
//! ```text
//! <bubbles> <R|W> <hex-vaddr>
//! ```
//!
//! `bubbles` is the number of non-memory instructions retired before the
//! operation. Blank lines and lines starting with `#` are skipped.
//! Addresses are byte addresses, normalised to 64B-line granularity.
//!
//! Generation is integer-only end to end (splitmix64 plus fixed-point
//! zipf weights), so a given seed produces bit-identical trace files on
//! every platform.

use crate::layout::Rw;
use serde::{Deserialize, Serialize};
use std::io::BufRead;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum WorkloadError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("trace io: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid generator parameter: {0}")]
    Params(String),
    #[error("alone IPC must be positive, got {0}")]
    ZeroAloneIpc(f64),
    #[error("per-core IPC vectors differ in length ({shared} vs {alone})")]
    IpcLength { shared: usize, alone: usize },
}

/// One trace record: bubbles retired before a read or write of `vline`
/// (a virtual 64B-line index).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceEntry {
    pub bubbles: u64,
    pub rw: Rw,
    pub vline: u64,
}

pub const LINE_BYTES: u64 = 64;

/// Parse a trace from a reader. Addresses are floored to line granularity.
pub fn parse_trace<R: BufRead>(reader: R) -> Result<Vec<TraceEntry>, WorkloadError> {
    let mut entries = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        entries.push(parse_line(text).map_err(|reason| WorkloadError::Parse {
            line: line_no,
            reason,
        })?);
    }
    Ok(entries)
}

fn parse_line(text: &str) -> Result<TraceEntry, String> {
    let mut fields = text.split_whitespace();
    let bubbles = fields.next().ok_or("missing bubble count")?;
    let rw = fields.next().ok_or("missing R/W field")?;
    let addr = fields.next().ok_or("missing address field")?;
    if fields.next().is_some() {
        return Err("trailing fields".into());
    }
    let bubbles: u64 = bubbles
        .parse()
        .map_err(|_| format!("bad bubble count `{bubbles}`"))?;
    let rw = match rw {
        "R" => Rw::Read,
        "W" => Rw::Write,
        other => return Err(format!("bad R/W field `{other}`")),
    };
    let hex = addr
        .strip_prefix("0x")
        .or_else(|| addr.strip_prefix("0X"))
        .ok_or_else(|| format!("address `{addr}` lacks 0x prefix"))?;
    let vaddr = u64::from_str_radix(hex, 16).map_err(|_| format!("bad address `{addr}`"))?;
    Ok(TraceEntry {
        bubbles,
        rw,
        vline: vaddr / LINE_BYTES,
    })
}

pub fn format_trace(entries: &[TraceEntry]) -> String {
    let mut out = String::new();
    for e in entries {
        let rw = match e.rw {
            Rw::Read => 'R',
            Rw::Write => 'W',
        };
        out.push_str(&format!("{} {} {:#x}\n", e.bubbles, rw, e.vline * LINE_BYTES));
    }
    out
}

/// splitmix64: tiny, fast, and identical everywhere.
#[derive(Debug, Clone)]
pub struct Rng64 {
    state: u64,
}

impl Rng64 {
    pub fn new(seed: u64) -> Self {
        Rng64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^ (z >> 31)
    }

    /// Unbiased uniform draw in `0..bound` (Lemire with rejection).
    pub fn below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0);
        loop {
            let x = self.next_u64();
            let m = (x as u128) * (bound as u128);
            if (m as u64) < bound {
                let threshold = bound.wrapping_neg() % bound;
                if (m as u64) < threshold {
                    continue;
                }
            }
            return (m >> 64) as u64;
        }
    }

    /// True with probability `num / 2^64`.
    fn chance_raw(&mut self, num: u128) -> bool {
        (self.next_u64() as u128) < num
    }
}

/// Q62 fixed-point helpers for the zipf weight table. All integer, so the
/// table is identical on every platform.
mod fixed {
    const FRAC: u32 = 62;
    pub const ONE: u64 = 1 << FRAC;

    fn isqrt_u128(n: u128) -> u128 {
        if n < 2 {
            return n;
        }
        let mut x = 1u128 << (n.ilog2() / 2 + 1);
        loop {
            let next = (x + n / x) / 2;
            if next >= x {
                return x;
            }
            x = next;
        }
    }

    /// Constants 2^(-2^-i) for i = 1..=62, in Q62: repeated square roots of
    /// one half.
    fn root_table() -> [u64; 63] {
        let mut table = [0u64; 63];
        table[0] = ONE / 2; // 2^-1
        for i in 1..63 {
            table[i] = isqrt_u128((table[i - 1] as u128) << FRAC) as u64;
        }
        table
    }

    /// log2(k) in Q32 for k >= 1.
    pub fn log2_q32(k: u64) -> u64 {
        debug_assert!(k >= 1);
        let int = k.ilog2() as u64;
        // Mantissa in [1, 2) as Q32, refined bit by bit through squaring.
        let mut x = (k as u128) << (32 - k.ilog2());
        let mut frac = 0u64;
        for _ in 0..32 {
            frac <<= 1;
            x = (x * x) >> 32;
            if x >= 1u128 << 33 {
                frac |= 1;
                x >>= 1;
            }
        }
        (int << 32) | frac
    }

    /// 2^(-y) for y in Q32, result in Q32 (so at most 2^32 = 1.0).
    pub fn exp2_neg_q32(y: u64) -> u64 {
        let int = y >> 32;
        if int >= 62 {
            return 0;
        }
        let table = root_table();
        let mut acc: u128 = ONE as u128;
        let frac = y & 0xFFFF_FFFF;
        for bit in 0..32 {
            if frac & (1u64 << (31 - bit)) != 0 {
                acc = (acc * table[bit as usize + 1] as u128) >> FRAC;
            }
        }
        // Down from Q62 to Q32, then the integer part.
        ((acc >> (FRAC - 32)) >> int) as u64
    }
}

/// Cumulative zipf weight table over ranks 1..=n with weight k^-s,
/// s supplied in Q32.
struct ZipfTable {
    cum: Vec<u64>,
}

impl ZipfTable {
    fn new(n: u64, exponent_q32: u64) -> Self {
        let mut cum = Vec::with_capacity(n as usize);
        let mut total = 0u64;
        for k in 1..=n {
            let y = ((exponent_q32 as u128 * fixed::log2_q32(k) as u128) >> 32) as u64;
            let w = fixed::exp2_neg_q32(y).max(1);
            total += w;
            cum.push(total);
        }
        ZipfTable { cum }
    }

    fn sample(&self, rng: &mut Rng64) -> u64 {
        let r = rng.below(*self.cum.last().unwrap());
        self.cum.partition_point(|&c| c <= r) as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceKind {
    /// Uniform over the page span.
    Uniform,
    /// Zipf-distributed page popularity, rank 0 hottest.
    Zipf,
    /// Key-value-store style: zipf keys, read-mostly, MPKI-targeted bubbles.
    Kv,
}

impl std::str::FromStr for TraceKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "uniform" => Ok(TraceKind::Uniform),
            "zipf" => Ok(TraceKind::Zipf),
            "kv" => Ok(TraceKind::Kv),
            other => Err(format!("unknown trace kind `{other}`")),
        }
    }
}

/// Synthetic trace parameters. `mpki` sets the bubble budget so that
/// 1000 * memOps / (memOps + bubbles) hits the target in the long run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    pub kind: TraceKind,
    pub ops: u64,
    /// Pages in the virtual footprint.
    pub pages: u64,
    pub lines_per_page: u32,
    pub zipf_exponent: f64,
    pub read_fraction: f64,
    pub mpki: f64,
    pub seed: u64,
}

impl GenSpec {
    pub fn new(kind: TraceKind, ops: u64, pages: u64, seed: u64) -> Self {
        GenSpec {
            kind,
            ops,
            pages,
            lines_per_page: 64,
            zipf_exponent: 0.99,
            read_fraction: 0.95,
            mpki: 40.0,
            seed,
        }
    }

    fn validate(&self) -> Result<(), WorkloadError> {
        if self.pages == 0 {
            return Err(WorkloadError::Params("page span must be >= 1".into()));
        }
        if self.lines_per_page == 0 {
            return Err(WorkloadError::Params("lines per page must be >= 1".into()));
        }
        if matches!(self.kind, TraceKind::Zipf | TraceKind::Kv) && self.zipf_exponent < 0.0 {
            return Err(WorkloadError::Params("zipf exponent must be >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.read_fraction) {
            return Err(WorkloadError::Params("read fraction must be in [0, 1]".into()));
        }
        if !self.mpki.is_finite() || self.mpki <= 0.0 || self.mpki > 1000.0 {
            return Err(WorkloadError::Params("MPKI target must be in (0, 1000]".into()));
        }
        Ok(())
    }
}

/// Generate a deterministic synthetic trace.
pub fn gen_trace(spec: &GenSpec) -> Result<Vec<TraceEntry>, WorkloadError> {
    spec.validate()?;
    let mut rng = Rng64::new(spec.seed);
    let zipf = match spec.kind {
        TraceKind::Uniform => None,
        TraceKind::Zipf | TraceKind::Kv => {
            let q32 = (spec.zipf_exponent * (1u64 << 32) as f64).round() as u64;
            Some(ZipfTable::new(spec.pages, q32))
        }
    };
    let read_threshold = (spec.read_fraction * 2f64.powi(64)) as u128;
    // Bubbles per op in Q16, paid out with an error accumulator so the
    // long-run MPKI is exact.
    let bubbles_q16 = ((1000.0 / spec.mpki - 1.0) * 65536.0).round() as u64;
    let mut bubble_acc = 0u64;

    let mut entries = Vec::with_capacity(spec.ops as usize);
    for _ in 0..spec.ops {
        let page = match &zipf {
            None => rng.below(spec.pages),
            Some(table) => table.sample(&mut rng),
        };
        let line_in_page = rng.below(spec.lines_per_page as u64);
        let rw = if rng.chance_raw(read_threshold) {
            Rw::Read
        } else {
            Rw::Write
        };
        bubble_acc += bubbles_q16;
        let bubbles = bubble_acc >> 16;
        bubble_acc &= 0xFFFF;
        entries.push(TraceEntry {
            bubbles,
            rw,
            vline: page * spec.lines_per_page as u64 + line_in_page,
        });
    }
    Ok(entries)
}

/// MPKI of a trace: memory operations per thousand instructions, where the
/// instruction count is the memory operations plus their bubbles. Traces
/// here are post-cache, so every entry is a memory request by construction.
pub fn mpki(trace: &[TraceEntry]) -> f64 {
    let ops = trace.len() as u64;
    if ops == 0 {
        return 0.0;
    }
    let bubbles: u64 = trace.iter().map(|e| e.bubbles).sum();
    1000.0 * ops as f64 / (ops + bubbles) as f64
}

pub const INTENSIVE_MPKI: f64 = 10.0;

/// Memory-intensive iff MPKI strictly exceeds 10, computed over the first
/// `window` entries (or the whole trace).
pub fn classify_mpki(trace: &[TraceEntry], window: Option<usize>) -> bool {
    let slice = match window {
        Some(w) => &trace[..w.min(trace.len())],
        None => trace,
    };
    mpki(slice) > INTENSIVE_MPKI
}

/// In-order-retire core front end parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoreModel {
    pub retire_width: u32,
    pub rob_entries: u32,
    pub max_inflight_loads: u32,
    pub freq_ghz: f64,
}

impl Default for CoreModel {
    fn default() -> Self {
        CoreModel {
            retire_width: 4,
            rob_entries: 128,
            max_inflight_loads: 16,
            freq_ghz: 2.6,
        }
    }
}

impl CoreModel {
    pub fn validate(&self) -> Result<(), WorkloadError> {
        if self.retire_width == 0 || self.rob_entries == 0 || self.max_inflight_loads == 0 {
            return Err(WorkloadError::Params(
                "core widths and capacities must be positive".into(),
            ));
        }
        if !self.freq_ghz.is_finite() || self.freq_ghz <= 0.0 {
            return Err(WorkloadError::Params("core frequency must be positive".into()));
        }
        Ok(())
    }

    /// Core cycles per memory cycle, in Q32.
    pub fn cycles_per_mem_cycle_q32(&self, tck_ns: f64) -> u64 {
        (self.freq_ghz * tck_ns * (1u64 << 32) as f64).round() as u64
    }
}

/// Multiprogrammed mix: which of the `n_cores` slots run a memory-intensive
/// workload.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixSpec {
    pub n_cores: u32,
    pub intensive_fraction: f64,
    pub seed: u64,
}

impl MixSpec {
    /// Slot flags: the first `round(fraction * n)` slots are intensive.
    pub fn intensive_slots(&self) -> Vec<bool> {
        let k = (self.intensive_fraction * self.n_cores as f64).round() as u32;
        (0..self.n_cores).map(|i| i < k.min(self.n_cores)).collect()
    }
}

/// Run one core's trace against an otherwise idle memory system, without
/// paging: the single-application configuration used both for core-model
/// tests and for the interference-free runs behind weighted speedup.
pub fn run_core(
    model: CoreModel,
    trace: Vec<TraceEntry>,
    region: crate::layout::RegionConfig,
    timing: crate::geometry::TimingParams,
    instruction_budget: u64,
) -> Result<crate::engine::CoreStats, crate::engine::EngineError> {
    let mut config = crate::engine::SystemConfig::new(region, timing);
    config.core_model = model;
    config.instruction_budget = instruction_budget;
    let system = crate::engine::System::new(config, vec![trace])?;
    let output = system.run()?;
    Ok(output.per_core[0])
}

/// Sum of per-application speedups against their interference-free runs.
pub fn weighted_speedup(shared: &[f64], alone: &[f64]) -> Result<f64, WorkloadError> {
    if shared.len() != alone.len() {
        return Err(WorkloadError::IpcLength {
            shared: shared.len(),
            alone: alone.len(),
        });
    }
    let mut sum = 0.0;
    for (&s, &a) in shared.iter().zip(alone) {
        if !a.is_finite() || a <= 0.0 {
            return Err(WorkloadError::ZeroAloneIpc(a));
        }
        sum += s / a;
    }
    Ok(sum)
}
