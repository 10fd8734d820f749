//! Virtual-memory layer: maps workload pages onto the physical frames the
//! layout provides, with a Linux-flavoured two-list replacement policy.
//!
//! Pages enter at the head of the inactive list on first touch and are
//! promoted to the active list when referenced again; the active list is
//! kept below a 2:1 ratio over the inactive list by demoting its tail.
//! Eviction takes the inactive tail. Faulted-in pages land in the
//! lowest-numbered free frame, and frame index equals physical page number.

use crate::layout::{RegionConfig, Rw};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashMap};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PagingError {
    #[error("fault penalty {penalty}ns must equal SSD {ssd}ns + software {software}ns")]
    PenaltySplit { penalty: u64, ssd: u64, software: u64 },
    #[error("frame table needs at least one frame")]
    NoFrames,
}

/// Page-fault cost model. The single penalty folds in the device access and
/// the software path, plus any write-back of the victim.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FaultModel {
    pub penalty_ns: u64,
    pub ssd_ns: u64,
    pub software_ns: u64,
}

impl Default for FaultModel {
    fn default() -> Self {
        FaultModel {
            penalty_ns: 500_000,
            ssd_ns: 300_000,
            software_ns: 200_000,
        }
    }
}

impl FaultModel {
    pub fn validate(&self) -> Result<(), PagingError> {
        if self.penalty_ns != self.ssd_ns + self.software_ns {
            return Err(PagingError::PenaltySplit {
                penalty: self.penalty_ns,
                ssd: self.ssd_ns,
                software: self.software_ns,
            });
        }
        Ok(())
    }

    /// Core cycles a faulting core stalls: penalty * core frequency.
    pub fn stall_core_cycles(&self, freq_ghz: f64) -> u64 {
        (self.penalty_ns as f64 * freq_ghz).round() as u64
    }
}

/// Physical frames available to paging under a layout config.
pub fn frames_for(config: &RegionConfig) -> u64 {
    config.capacity_pages()
}

/// A paged-in page is identified by its owner (one address space per core)
/// and virtual page number.
pub type PageKey = (u32, u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccessOutcome {
    Hit { frame: u64 },
    Fault { frame: u64, victim: Option<PageKey> },
}

impl AccessOutcome {
    pub fn frame(&self) -> u64 {
        match *self {
            AccessOutcome::Hit { frame } | AccessOutcome::Fault { frame, .. } => frame,
        }
    }

    pub fn is_fault(&self) -> bool {
        matches!(self, AccessOutcome::Fault { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ListTag {
    Active,
    Inactive,
}

#[derive(Debug, Clone, Copy)]
struct FrameSlot {
    page: Option<PageKey>,
    prev: Option<u32>,
    next: Option<u32>,
    tag: ListTag,
}

#[derive(Debug, Clone, Copy, Default)]
struct ListEnds {
    head: Option<u32>,
    tail: Option<u32>,
    len: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct PagingStats {
    pub accesses: u64,
    pub hits: u64,
    pub faults: u64,
    pub evictions: u64,
}

/// Resident-page tracking over a fixed set of frames.
#[derive(Debug)]
pub struct FrameTable {
    slots: Vec<FrameSlot>,
    map: HashMap<PageKey, u32>,
    free: BTreeSet<u32>,
    active: ListEnds,
    inactive: ListEnds,
    stats: PagingStats,
}

impl FrameTable {
    pub fn new(frames: u64) -> Result<Self, PagingError> {
        if frames == 0 {
            return Err(PagingError::NoFrames);
        }
        Ok(FrameTable {
            slots: vec![
                FrameSlot {
                    page: None,
                    prev: None,
                    next: None,
                    tag: ListTag::Inactive,
                };
                frames as usize
            ],
            map: HashMap::new(),
            free: (0..frames as u32).collect(),
            active: ListEnds::default(),
            inactive: ListEnds::default(),
            stats: PagingStats::default(),
        })
    }

    pub fn frames(&self) -> u64 {
        self.slots.len() as u64
    }

    pub fn resident(&self) -> u64 {
        self.map.len() as u64
    }

    pub fn active_len(&self) -> u64 {
        self.active.len
    }

    pub fn inactive_len(&self) -> u64 {
        self.inactive.len
    }

    pub fn stats(&self) -> PagingStats {
        self.stats
    }

    fn ends_mut(&mut self, tag: ListTag) -> &mut ListEnds {
        match tag {
            ListTag::Active => &mut self.active,
            ListTag::Inactive => &mut self.inactive,
        }
    }

    fn push_front(&mut self, tag: ListTag, frame: u32) {
        let old_head = self.ends_mut(tag).head;
        self.slots[frame as usize].tag = tag;
        self.slots[frame as usize].prev = None;
        self.slots[frame as usize].next = old_head;
        if let Some(h) = old_head {
            self.slots[h as usize].prev = Some(frame);
        }
        let ends = self.ends_mut(tag);
        ends.head = Some(frame);
        if ends.tail.is_none() {
            ends.tail = Some(frame);
        }
        ends.len += 1;
    }

    fn unlink(&mut self, frame: u32) {
        let slot = self.slots[frame as usize];
        match slot.prev {
            Some(p) => self.slots[p as usize].next = slot.next,
            None => self.ends_mut(slot.tag).head = slot.next,
        }
        match slot.next {
            Some(n) => self.slots[n as usize].prev = slot.prev,
            None => self.ends_mut(slot.tag).tail = slot.prev,
        }
        self.ends_mut(slot.tag).len -= 1;
        self.slots[frame as usize].prev = None;
        self.slots[frame as usize].next = None;
    }

    /// Keep the active list at or below twice the inactive list.
    fn rebalance(&mut self) {
        while self.active.len > 2 * self.inactive.len {
            let Some(tail) = self.active.tail else { break };
            self.unlink(tail);
            self.push_front(ListTag::Inactive, tail);
        }
    }

    /// Touch a page: promote on hit, replace on miss. The `rw` flag is
    /// accepted for interface completeness; dirtiness is folded into the
    /// single fault penalty.
    pub fn access(&mut self, owner: u32, vpage: u64, _rw: Rw) -> AccessOutcome {
        self.stats.accesses += 1;
        let key = (owner, vpage);
        if let Some(&frame) = self.map.get(&key) {
            self.stats.hits += 1;
            self.unlink(frame);
            self.push_front(ListTag::Active, frame);
            self.rebalance();
            return AccessOutcome::Hit {
                frame: frame as u64,
            };
        }

        self.stats.faults += 1;
        let (frame, victim) = match self.free.pop_first() {
            Some(frame) => (frame, None),
            None => {
                let frame = self
                    .inactive
                    .tail
                    .or(self.active.tail)
                    .expect("no free frame and no resident page");
                self.unlink(frame);
                let victim = self.slots[frame as usize].page.take().expect("victim unmapped");
                self.map.remove(&victim);
                self.stats.evictions += 1;
                (frame, Some(victim))
            }
        };
        self.slots[frame as usize].page = Some(key);
        self.map.insert(key, frame);
        self.push_front(ListTag::Inactive, frame);
        self.rebalance();
        AccessOutcome::Fault {
            frame: frame as u64,
            victim,
        }
    }

    #[cfg(test)]
    fn check_invariants(&self) {
        assert_eq!(self.active.len + self.inactive.len, self.resident());
        assert!(self.resident() <= self.frames());
        let mut seen = std::collections::HashSet::new();
        for (ends, tag) in [(self.active, ListTag::Active), (self.inactive, ListTag::Inactive)] {
            let mut cursor = ends.head;
            let mut count = 0;
            while let Some(f) = cursor {
                assert_eq!(self.slots[f as usize].tag, tag);
                assert!(seen.insert(f), "frame {f} on two lists");
                count += 1;
                cursor = self.slots[f as usize].next;
            }
            assert_eq!(count, ends.len);
        }
    }
}
