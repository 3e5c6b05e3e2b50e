//! Scheduling-optimization toolkit for minimizing total weighted completion
//! time on uniformly related machines.
//!
//! The crate provides, bottom-up:
//!
//! * [`geo`], [`instance`], [`schedule`], [`cost`] — exact geometric values,
//!   the instance/schedule data model, and the cost functionals (true cost,
//!   Γ-values, U-cost, pseudo-cost, timeliness).
//! * [`oracle`] — exhaustive exact solvers used as ground truth at desk
//!   scale.
//! * [`params`], [`rounding`] — parameter packs and the instance
//!   transformations (geometric rounding, density shifting, bands,
//!   divisions/pseudo-sizes).
//! * [`milp`] — a self-contained LP/branch-and-bound MILP solver for the
//!   configuration programs.
//! * [`bands`] — the configuration-MILP approximation pipeline for instances
//!   without release dates.
//! * [`timeline`] — release-date schedule calculus: time augmentation,
//!   interval lists, time stretching, job classification, job shifting.
//! * [`release`] — the release-date pipeline: release-date shifting,
//!   palettes, sparse elimination, the time-indexed configuration MILP, and
//!   the combining passes.

pub mod bands;
pub mod cost;
pub mod error;
pub mod geo;
pub mod instance;
pub mod milp;
pub mod oracle;
pub mod params;
pub mod release;
pub mod rounding;
pub mod schedule;
pub mod timeline;

pub use error::{Error, Result};
pub use instance::{Instance, Job, Machine};
pub use params::{ParamPack, Profile};
pub use schedule::{OrderedSchedule, TimedJob, TimedSchedule};
