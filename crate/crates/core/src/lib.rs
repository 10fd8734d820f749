//! Trace-driven simulator of an ECC DRAM module and its memory controller.
//!
//! An ECC DIMM carries a ninth chip that normally stores SECDED code words.
//! This crate models the module at bank-slice granularity and simulates data
//! layouts that trade that protection for usable capacity:
//!
//! * `baseline` - unmodified SECDED ECC DRAM;
//! * `packed` - extra pages packed into the ninth chip, controller-driven
//!   read expansion and read-modify-writes;
//! * `packed-rs` - the packed layout plus rank subsetting, which removes the
//!   read-modify-writes;
//! * `inter-wrap` - pages wrap across neighbouring banks so every cache line
//!   stays one operation wide and the module gains a ninth independent
//!   bank-slice group;
//! * `parity` - detection-only protection: one parity byte per cache line on
//!   the ninth chip, with the remaining space packed with extra pages.
//!
//! The crate is organised around six modules: [`geometry`] (module shape and
//! DDR3 timing), [`layout`] (address translation and access planning),
//! [`engine`] (cycle-level timing, FR-FCFS scheduling, core models),
//! [`paging`] (two-list page replacement and fault penalties), [`workload`]
//! (trace parsing/generation and classification) and [`harness`]
//! (configuration, runs, sweeps and reports).

pub mod engine;
pub mod geometry;
pub mod harness;
pub mod layout;
pub mod paging;
pub mod workload;

pub use geometry::{ModuleGeometry, SliceId, TimingParams};
pub use layout::{AccessPlan, DeviceOp, Footprint, LayoutMode, RegionConfig, Rw};
