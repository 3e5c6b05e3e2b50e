//! Release-date schedule calculus.
//!
//! Timely schedules live on a geometric timeline: machine `ℓ` is cut into
//! intervals `J_{i,ℓ} = [(1+δ)^i, (1+δ)^{i+1})` of length
//! `Z = s_ℓ δ (1+δ)^i`.  This module provides the operations on that
//! timeline:
//!
//! * [`time_augment`] — multiply all completion times by a factor `υ > 1`.
//! * [`shift_schedule`] — move every event one interval later, for the input
//!   whose job sizes are stretched by `1+δ`.
//! * [`IntervalList`] — the list form of a schedule (which jobs start and
//!   complete in which interval), with the four validity conditions and the
//!   constructive sweep that rebuilds explicit times from a valid list.
//! * [`time_stretch`] — the stretched schedule with reserved/basic/actual
//!   times and guaranteed gaps inside qualifying intervals.
//! * [`classify_job`] — the small/medium/large/huge size bands of a job
//!   relative to one interval.
//! * [`is_organized`] / [`organize_fixture`] — the priority-consistency
//!   conditions on schedules of pseudo-size instances, and a best-effort
//!   generator of schedules satisfying them.
//! * [`job_shift`] — the release-date modification that bounds, per density
//!   and release date, the total size of jobs kept at that release date.
//! * [`pack_release_batch`] — the constructive packing of a shifted release
//!   batch into a bounded time window.

use crate::cost;
use crate::error::{Error, Result};
use crate::geo;
use crate::instance::{Instance, Job, Machine};
use crate::params::ParamPack;
use crate::schedule::{TimedJob, TimedSchedule};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

// ---------------------------------------------------------------------------
// Interval keys and size bands
// ---------------------------------------------------------------------------

/// One timeline interval `J_{i,ℓ}` on machine index `ell`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntervalKey {
    /// Time-window exponent: the interval covers `[(1+δ)^i, (1+δ)^{i+1})`.
    pub i: i64,
    /// Machine index (position in the instance's machine list).
    pub ell: usize,
    /// Interval length in size units: `Z = s_ℓ δ (1+δ)^i`.
    pub length: f64,
    /// The global minimum release exponent θ of the surrounding timeline.
    pub theta: i64,
}

impl IntervalKey {
    /// Builds the key for `J_{i,ℓ}` on a machine of speed `speed`.
    pub fn new(i: i64, ell: usize, speed: f64, delta: f64, theta: i64) -> Self {
        IntervalKey {
            i,
            ell,
            length: speed * delta * geo::pow1p(delta, i),
            theta,
        }
    }

    /// Left endpoint `(1+δ)^i` (inclusive).
    pub fn start(&self, delta: f64) -> f64 {
        geo::pow1p(delta, self.i)
    }

    /// Right endpoint `(1+δ)^{i+1}` (exclusive).
    pub fn end(&self, delta: f64) -> f64 {
        geo::pow1p(delta, self.i + 1)
    }

    /// The interval total order: later time window first, machine index as
    /// tie-break.
    pub fn order_key(&self) -> (i64, usize) {
        (self.i, self.ell)
    }
}

/// Size band of a job relative to one interval.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SizeBand {
    /// `size < δ^{10} Z` (equivalently `δ^{11} s_ℓ (1+δ)^i`).
    Small,
    /// `δ^{10} Z <= size < Z/δ`; the lower boundary is closed.  This band
    /// also absorbs the range `[Z, Z/δ)` left unnamed between the medium and
    /// large definitions, so that big = medium ∪ large is exhaustive.
    Medium,
    /// `Z/δ <= size < (1+δ) Z/δ²` (equivalently `[s_ℓ (1+δ)^i, (s_ℓ/δ)(1+δ)^{i+1})`).
    Large,
    /// `size >= (1+δ) Z/δ²`; such a job cannot start in the interval in any
    /// timely schedule.
    Huge,
}

impl SizeBand {
    /// Big means medium or large.
    pub fn is_big(self) -> bool {
        matches!(self, SizeBand::Medium | SizeBand::Large)
    }
}

/// Classifies a size against one interval.  Boundaries are resolved with the
/// usual relative tolerance; a size exactly on the small/medium boundary
/// `δ^{10} Z` is medium.
pub fn classify_job(size: f64, interval: &IntervalKey, delta: f64) -> SizeBand {
    let z = interval.length;
    if geo::geo_lt(size, delta.powi(10) * z) {
        SizeBand::Small
    } else if geo::geo_ge(size, (1.0 + delta) * z / (delta * delta)) {
        SizeBand::Huge
    } else if geo::geo_ge(size, z / delta) {
        SizeBand::Large
    } else {
        SizeBand::Medium
    }
}

// ---------------------------------------------------------------------------
// Time augmentation and shifted schedules
// ---------------------------------------------------------------------------

/// Multiplies every completion time by `upsilon > 1`, keeping machine
/// assignments.  The result is valid for the same instance (slots only move
/// right and stretch apart) and its cost is exactly `upsilon` times the
/// input's.  For `upsilon >= (1+δ)³` the result is additionally timely for
/// the geometrically rounded instance.
pub fn time_augment(
    instance: &Instance,
    schedule: &TimedSchedule,
    upsilon: f64,
) -> Result<TimedSchedule> {
    if !(upsilon > 1.0) {
        return Err(Error::InvalidParams(format!(
            "time augmentation factor must exceed 1, got {upsilon}"
        )));
    }
    schedule.validate(instance)?;
    let jobs = schedule
        .jobs
        .iter()
        .map(|t| TimedJob {
            job: t.job,
            machine: t.machine,
            completion: t.completion * upsilon,
        })
        .collect();
    let out = TimedSchedule { jobs };
    debug_assert!(out.validate(instance).is_ok());
    Ok(out)
}

/// The shifted schedule: every start and completion time is multiplied by
/// `1+δ`, which moves each event one interval later.  Returns the stretched
/// instance (same machines and release dates, sizes multiplied by `1+δ`) and
/// the schedule for it.  The pseudo-cost of the result is exactly `1+δ`
/// times the pseudo-cost of the input.
pub fn shift_schedule(
    instance: &Instance,
    schedule: &TimedSchedule,
    delta: f64,
) -> Result<(Instance, TimedSchedule)> {
    schedule.validate(instance)?;
    if let Err((job, start)) = cost::is_timely(instance, schedule, delta) {
        return Err(Error::InvalidSchedule(format!(
            "shifting requires a timely schedule; job {job} starts at {start}"
        )));
    }
    let jobs = instance
        .jobs
        .iter()
        .map(|j| Job {
            size: j.size * (1.0 + delta),
            ..*j
        })
        .collect();
    let machines = instance.machines.clone();
    let stretched = Instance::new(jobs, machines, instance.has_release_dates)?;
    let shifted = TimedSchedule {
        jobs: schedule
            .jobs
            .iter()
            .map(|t| TimedJob {
                job: t.job,
                machine: t.machine,
                completion: t.completion * (1.0 + delta),
            })
            .collect(),
    };
    shifted.validate(&stretched)?;
    Ok((stretched, shifted))
}

// ---------------------------------------------------------------------------
// Interval lists
// ---------------------------------------------------------------------------

/// Events of one interval: which jobs start there and which complete there.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntervalEvents {
    /// Job ids starting in the interval, in schedule order.
    pub starts: Vec<usize>,
    /// Job ids completing in the interval, in schedule order.
    pub completions: Vec<usize>,
}

/// The list form of a timely schedule: per interval `(i, ell)`, the jobs
/// starting and completing there.  Explicit times are forgotten; a valid
/// list can be turned back into a schedule of identical pseudo-cost by
/// [`schedule_from_list`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntervalList {
    /// The global minimum release exponent θ.
    pub theta: i64,
    /// Events keyed by `(interval exponent, machine index)`.
    pub events: BTreeMap<(i64, usize), IntervalEvents>,
}

impl IntervalList {
    /// The start interval `(i, ell)` of each job; errors on jobs missing or
    /// listed twice.
    fn start_map(&self) -> Result<BTreeMap<usize, (i64, usize)>> {
        let mut map = BTreeMap::new();
        for (&key, ev) in &self.events {
            for &j in &ev.starts {
                if map.insert(j, key).is_some() {
                    return Err(Error::InvalidSchedule(format!(
                        "job {j} has more than one listed starting interval"
                    )));
                }
            }
        }
        Ok(map)
    }

    /// The completion interval of each job.
    fn completion_map(&self) -> Result<BTreeMap<usize, (i64, usize)>> {
        let mut map = BTreeMap::new();
        for (&key, ev) in &self.events {
            for &j in &ev.completions {
                if map.insert(j, key).is_some() {
                    return Err(Error::InvalidSchedule(format!(
                        "job {j} has more than one listed completion interval"
                    )));
                }
            }
        }
        Ok(map)
    }
}

/// Checks the four list conditions; the error message names the violated
/// condition index and the offending interval.
///
/// 1. A job's start and completion are on the same machine, the completion
///    interval is not earlier, and the release date is at most the start
///    interval's left endpoint.
/// 2. For every machine and every window of consecutive intervals, the jobs
///    with both endpoints inside the window have total size strictly below
///    the window's capacity.
/// 3. An interval strictly inside some job's start-to-completion span has no
///    events at all.
/// 4. Each interval has at most one boundary-crossing start and at most one
///    boundary-crossing completion.
pub fn check_list(instance: &Instance, list: &IntervalList, delta: f64) -> Result<()> {
    let starts = list.start_map()?;
    let completions = list.completion_map()?;
    let ids: BTreeSet<usize> = instance.jobs.iter().map(|j| j.id).collect();
    if starts.keys().copied().collect::<BTreeSet<_>>() != ids
        || completions.keys().copied().collect::<BTreeSet<_>>() != ids
    {
        return Err(Error::InvalidSchedule(
            "interval list must mention every instance job exactly once as a start and once as a completion".into(),
        ));
    }

    // Condition 1: machine match, interval order, release feasibility.
    for job in &instance.jobs {
        let (i1, l1) = starts[&job.id];
        let (i2, l2) = completions[&job.id];
        if l1 != l2 {
            return Err(Error::InvalidSchedule(format!(
                "list condition 1 violated at interval ({i2}, {l2}): job {} starts on machine {l1} but completes on machine {l2}",
                job.id
            )));
        }
        if i2 < i1 {
            return Err(Error::InvalidSchedule(format!(
                "list condition 1 violated at interval ({i2}, {l2}): job {} completes before its start interval {i1}",
                job.id
            )));
        }
        if !geo::geo_le(job.release, geo::pow1p(delta, i1)) {
            return Err(Error::InvalidSchedule(format!(
                "list condition 1 violated at interval ({i1}, {l1}): job {} is released at {} after the interval start",
                job.id, job.release
            )));
        }
    }

    // Condition 2: strict prefix-capacity bound per machine.
    for ell in 0..instance.m() {
        let rows: Vec<(i64, i64, f64)> = instance
            .jobs
            .iter()
            .filter(|j| starts[&j.id].1 == ell)
            .map(|j| (starts[&j.id].0, completions[&j.id].0, j.size))
            .collect();
        if rows.is_empty() {
            continue;
        }
        let lo = rows.iter().map(|r| r.0).min().unwrap();
        let hi = rows.iter().map(|r| r.1).max().unwrap();
        let speed = instance.machines[ell].speed;
        for win_lo in lo..=hi {
            for win_hi in win_lo..=hi {
                let total: f64 = rows
                    .iter()
                    .filter(|r| r.0 >= win_lo && r.1 <= win_hi)
                    .map(|r| r.2)
                    .sum();
                let capacity =
                    speed * (geo::pow1p(delta, win_hi + 1) - geo::pow1p(delta, win_lo));
                if total > 0.0 && !geo::geo_lt(total, capacity) {
                    return Err(Error::InvalidSchedule(format!(
                        "list condition 2 violated at interval ({win_hi}, {ell}): jobs confined to intervals {win_lo}..={win_hi} have total size {total} >= capacity {capacity}"
                    )));
                }
            }
        }
    }

    // Condition 3: no events strictly inside a crossing job's span.
    for job in &instance.jobs {
        let (i1, ell) = starts[&job.id];
        let (i2, _) = completions[&job.id];
        for interior in (i1 + 1)..i2 {
            if let Some(ev) = list.events.get(&(interior, ell)) {
                if !ev.starts.is_empty() || !ev.completions.is_empty() {
                    return Err(Error::InvalidSchedule(format!(
                        "list condition 3 violated at interval ({interior}, {ell}): events listed under job {} spanning intervals {i1}..{i2}",
                        job.id
                    )));
                }
            }
        }
    }

    // Condition 4: at most one crossing start and one crossing completion.
    for (&(i, ell), ev) in &list.events {
        let crossing_starts = ev
            .starts
            .iter()
            .filter(|j| completions[j].0 > i)
            .count();
        if crossing_starts > 1 {
            return Err(Error::InvalidSchedule(format!(
                "list condition 4 violated at interval ({i}, {ell}): {crossing_starts} boundary-crossing starts"
            )));
        }
        let crossing_completions = ev
            .completions
            .iter()
            .filter(|j| starts[j].0 < i)
            .count();
        if crossing_completions > 1 {
            return Err(Error::InvalidSchedule(format!(
                "list condition 4 violated at interval ({i}, {ell}): {crossing_completions} boundary-crossing completions"
            )));
        }
    }
    Ok(())
}

/// Converts a timely schedule to its list form; every job's start time must
/// be positive.  The produced list always passes [`check_list`].
pub fn list_from_schedule(
    instance: &Instance,
    schedule: &TimedSchedule,
    delta: f64,
) -> Result<IntervalList> {
    schedule.validate(instance)?;
    let mut rows: Vec<(usize, usize, f64, f64)> = schedule
        .jobs
        .iter()
        .map(|t| {
            (
                t.job,
                t.machine,
                schedule.start(instance, t.job),
                t.completion,
            )
        })
        .collect();
    rows.sort_by(|a, b| a.2.partial_cmp(&b.2).unwrap().then(a.0.cmp(&b.0)));
    let mut events: BTreeMap<(i64, usize), IntervalEvents> = BTreeMap::new();
    for &(job, machine, start, _) in &rows {
        if start <= 0.0 {
            return Err(Error::InvalidSchedule(format!(
                "job {job} starts at non-positive time {start}; interval lists need positive start times"
            )));
        }
        let i = geo::floor_log(delta, start);
        events.entry((i, machine)).or_default().starts.push(job);
    }
    rows.sort_by(|a, b| a.3.partial_cmp(&b.3).unwrap().then(a.0.cmp(&b.0)));
    for &(job, machine, _, completion) in &rows {
        let i = geo::floor_log(delta, completion);
        events
            .entry((i, machine))
            .or_default()
            .completions
            .push(job);
    }
    let theta = if instance.has_release_dates
        && instance.jobs.iter().all(|j| j.release > 0.0)
    {
        instance
            .jobs
            .iter()
            .map(|j| geo::floor_log(delta, j.release))
            .min()
            .unwrap()
    } else {
        events.keys().map(|&(i, _)| i).min().unwrap_or(0)
    };
    let list = IntervalList { theta, events };
    check_list(instance, &list, delta)?;
    Ok(list)
}

/// Rebuilds explicit times from a valid list via the constructive sweep: per
/// machine, intervals are visited in increasing order; jobs with both
/// endpoints in the current interval run consecutively from the later of the
/// interval start and the last assigned completion; a boundary-crossing job
/// completes at the later of its completion interval's start and the point
/// reached so far plus its processing time.  The result's completion
/// intervals equal the listed ones, so the round trip preserves pseudo-cost
/// exactly.
pub fn schedule_from_list(
    instance: &Instance,
    list: &IntervalList,
    delta: f64,
) -> Result<TimedSchedule> {
    check_list(instance, list, delta)?;
    let starts = list.start_map()?;
    let completions = list.completion_map()?;
    let mut out = Vec::with_capacity(instance.n());
    for ell in 0..instance.m() {
        let speed = instance.machines[ell].speed;
        let mut start_intervals: Vec<i64> = list
            .events
            .iter()
            .filter(|&(&(_, l), ev)| l == ell && !ev.starts.is_empty())
            .map(|(&(i, _), _)| i)
            .collect();
        start_intervals.sort_unstable();
        let mut last = 0.0_f64;
        for &i in &start_intervals {
            let boundary = geo::pow1p(delta, i);
            let ev = &list.events[&(i, ell)];
            let mut crossing: Option<usize> = None;
            let mut cursor = boundary.max(last);
            for &job in &ev.starts {
                let (i2, _) = completions[&job];
                if i2 > i {
                    crossing = Some(job);
                    continue;
                }
                let completion = cursor + instance.job(job).size / speed;
                out.push(TimedJob {
                    job,
                    machine: ell,
                    completion,
                });
                cursor = completion;
                last = completion;
            }
            if let Some(job) = crossing {
                let (i2, _) = completions[&job];
                let base = boundary.max(last);
                let completion =
                    geo::pow1p(delta, i2).max(base + instance.job(job).size / speed);
                out.push(TimedJob {
                    job,
                    machine: ell,
                    completion,
                });
                last = completion;
            }
        }
    }
    let schedule = TimedSchedule { jobs: out };
    schedule.validate(instance)?;
    // The lemma guarantees that a valid list is realizable; verify that the
    // sweep indeed landed every completion in its listed interval.
    for t in &schedule.jobs {
        let listed = completions[&t.job].0;
        let got = geo::floor_log(delta, t.completion);
        if got != listed {
            return Err(Error::InvalidSchedule(format!(
                "constructive sweep placed job {} in interval {got} instead of listed {listed}; the list is too tight",
                t.job
            )));
        }
        let listed_start = starts[&t.job].0;
        let got_start = geo::floor_log(delta, schedule.start(instance, t.job));
        if got_start != listed_start {
            return Err(Error::InvalidSchedule(format!(
                "constructive sweep started job {} in interval {got_start} instead of listed {listed_start}; the list is too tight",
                t.job
            )));
        }
    }
    Ok(schedule)
}

// ---------------------------------------------------------------------------
// Time stretching
// ---------------------------------------------------------------------------

/// One job of a stretched schedule.  The job's original slot `[t, t')` turns
/// into the reserved period `[(1+δ)t, (1+δ)t')`; the basic times shrink the
/// reserved period by `δ p/(2s)` on each side; the actual times equal the
/// basic times unless the job was shifted earlier inside its interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StretchedJob {
    /// Job id.
    pub job: usize,
    /// Machine index.
    pub machine: usize,
    /// Reserved start `(1+δ)t`.
    pub reserved_start: f64,
    /// Reserved end `(1+δ)t'`.
    pub reserved_end: f64,
    /// Basic start `(1+δ)t + δp/(2s)`.
    pub basic_start: f64,
    /// Basic end `(1+δ)t' − δp/(2s)`.
    pub basic_end: f64,
    /// Actual start; at most the basic start.
    pub actual_start: f64,
    /// Actual end; at most the basic end.
    pub actual_end: f64,
}

/// A time-stretched schedule: per-job reserved/basic/actual times plus the
/// idle segments ("gaps") of every interval that is not contained in some
/// job's reserved period.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StretchedSchedule {
    /// One entry per job, sorted by job id.
    pub jobs: Vec<StretchedJob>,
    /// Idle segments per interval `(i, ell)`, clipped to the interval, for
    /// intervals not contained in any reserved period.
    pub gaps: BTreeMap<(i64, usize), Vec<(f64, f64)>>,
}

impl StretchedSchedule {
    /// The actual times as a plain schedule.
    pub fn timed(&self) -> TimedSchedule {
        TimedSchedule {
            jobs: self
                .jobs
                .iter()
                .map(|j| TimedJob {
                    job: j.job,
                    machine: j.machine,
                    completion: j.actual_end,
                })
                .collect(),
        }
    }
}

/// Stretches a timely schedule by `1+δ`.  Every interval that is fully
/// idle, or contains a reserved start, or contains a reserved completion
/// ends up with idle time of length at least `δ³ Z`; the pseudo-cost grows by
/// at most `1+δ`; and any job that is small for the interval containing its
/// actual start also completes in that interval.  Jobs are shifted to run as
/// early as possible after the incoming boundary-crossing job, which is the
/// gap normalization the cross-band combiner relies on.
pub fn time_stretch(
    instance: &Instance,
    schedule: &TimedSchedule,
    params: &ParamPack,
) -> Result<StretchedSchedule> {
    let delta = params.delta;
    schedule.validate(instance)?;
    if let Err((job, start)) = cost::is_timely(instance, schedule, delta) {
        return Err(Error::InvalidSchedule(format!(
            "time stretching requires a timely schedule; job {job} starts at {start}"
        )));
    }
    let mut jobs: Vec<StretchedJob> = schedule
        .jobs
        .iter()
        .map(|t| {
            let j = instance.job(t.job);
            let s = instance.machines[t.machine].speed;
            let start = t.completion - j.size / s;
            let reserved_start = (1.0 + delta) * start;
            let reserved_end = (1.0 + delta) * t.completion;
            let half = delta * j.size / (2.0 * s);
            StretchedJob {
                job: t.job,
                machine: t.machine,
                reserved_start,
                reserved_end,
                basic_start: reserved_start + half,
                basic_end: reserved_end - half,
                actual_start: reserved_start + half,
                actual_end: reserved_end - half,
            }
        })
        .collect();
    jobs.sort_by(|a, b| a.job.cmp(&b.job));

    let mut gaps: BTreeMap<(i64, usize), Vec<(f64, f64)>> = BTreeMap::new();
    for ell in 0..instance.m() {
        let speed = instance.machines[ell].speed;
        let idx: Vec<usize> = (0..jobs.len())
            .filter(|&k| jobs[k].machine == ell)
            .collect();
        if idx.is_empty() {
            continue;
        }
        let lo = idx
            .iter()
            .map(|&k| geo::floor_log(delta, jobs[k].reserved_start))
            .min()
            .unwrap();
        let hi = idx
            .iter()
            .map(|&k| geo::floor_log(delta, jobs[k].reserved_end))
            .max()
            .unwrap();
        for i in lo..=hi {
            let b = geo::pow1p(delta, i);
            let bb = geo::pow1p(delta, i + 1);
            let z = speed * delta * b;
            let contained = idx.iter().any(|&k| {
                geo::geo_le(jobs[k].reserved_start, b) && geo::geo_ge(jobs[k].reserved_end, bb)
            });
            if contained {
                continue;
            }
            // The jobs of J_{i,ell}: reserved period inside the interval,
            // plus a boundary-crossing starter that is small for it.
            let mut members: Vec<usize> = idx
                .iter()
                .copied()
                .filter(|&k| {
                    let si = geo::floor_log(delta, jobs[k].reserved_start);
                    if si != i {
                        return false;
                    }
                    let ci = geo::floor_log(delta, jobs[k].reserved_end);
                    let size = instance.job(jobs[k].job).size;
                    ci == i || geo::geo_lt(size, delta.powi(10) * z)
                })
                .collect();
            let incoming = idx.iter().copied().find(|&k| {
                geo::floor_log(delta, jobs[k].reserved_start) < i
                    && geo::floor_log(delta, jobs[k].reserved_end) == i
            });
            if !members.is_empty() {
                members.sort_by(|&a, &b| {
                    jobs[a].basic_start.partial_cmp(&jobs[b].basic_start).unwrap()
                });
                let mut cursor = match incoming {
                    Some(k) => b.max(jobs[k].basic_end),
                    None => b,
                };
                for &k in &members {
                    let size = instance.job(jobs[k].job).size;
                    let run = size / speed;
                    jobs[k].actual_start = cursor;
                    jobs[k].actual_end = cursor + run;
                    cursor = jobs[k].actual_end;
                }
                // The interval always has room for its jobs; a violation
                // here means the input was not timely after all.
                if !geo::geo_le(cursor, bb) {
                    return Err(Error::InvalidSchedule(format!(
                        "jobs of interval ({i}, {ell}) overflow it during time stretching; input schedule is inconsistent"
                    )));
                }
            }
            gaps.insert((i, ell), Vec::new());
        }
    }

    // Second pass: with all actual times fixed, record the idle segments of
    // every non-contained interval.
    let keys: Vec<(i64, usize)> = gaps.keys().copied().collect();
    for (i, ell) in keys {
        let b = geo::pow1p(delta, i);
        let bb = geo::pow1p(delta, i + 1);
        let mut busy: Vec<(f64, f64)> = jobs
            .iter()
            .filter(|j| j.machine == ell && j.actual_end > b && j.actual_start < bb)
            .map(|j| (j.actual_start.max(b), j.actual_end.min(bb)))
            .collect();
        busy.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut segments = Vec::new();
        let mut t = b;
        for (s, e) in busy {
            if s > t + geo::GEO_TOL * bb {
                segments.push((t, s));
            }
            t = t.max(e);
        }
        if bb > t + geo::GEO_TOL * bb {
            segments.push((t, bb));
        }
        gaps.insert((i, ell), segments);
    }

    let out = StretchedSchedule { jobs, gaps };
    debug_assert!(out.timed().validate(instance).is_ok());
    Ok(out)
}

/// Searches the *original* (pre-stretch) schedule for an idle segment on
/// machine `ell` intersecting `[(1+δ)^{i-1}, (1+δ)^i/δ²)`.  Whenever the
/// stretched schedule has a gap in `J_{i,ell}`, such a segment exists; this
/// is the constructive check of that claim.  Time after the machine's last
/// completion counts as idle.
///
/// The window starts two grid steps below the interval rather than one step
/// above it: when the gap sits in the interval holding the first job's
/// reserved start (the bottom of a long busy run), the idle paying for it is
/// the leading idle just before that job, which lies at or above
/// `(1+δ)^{i-1}` but below `(1+δ)^{i+1}`.
pub fn backward_gap_witness(
    instance: &Instance,
    schedule: &TimedSchedule,
    ell: usize,
    i: i64,
    delta: f64,
) -> Option<(f64, f64)> {
    let lo = geo::pow1p(delta, i - 1);
    let hi = geo::pow1p(delta, i) / (delta * delta);
    if hi <= lo {
        return None;
    }
    let mut busy: Vec<(f64, f64)> = schedule
        .jobs
        .iter()
        .filter(|t| t.machine == ell)
        .map(|t| {
            let start = schedule.start(instance, t.job);
            (start, t.completion)
        })
        .filter(|&(s, e)| e > lo && s < hi)
        .map(|(s, e)| (s.max(lo), e.min(hi)))
        .collect();
    busy.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut t = lo;
    for (s, e) in busy {
        if s > t + geo::GEO_TOL * hi {
            return Some((t, s));
        }
        t = t.max(e);
    }
    if hi > t + geo::GEO_TOL * hi {
        return Some((t, hi));
    }
    None
}

// ---------------------------------------------------------------------------
// Organized schedules
// ---------------------------------------------------------------------------

/// A violation of the organized-schedule conditions, naming the rule and
/// the job (pair) involved.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrganizedWitness {
    /// Human-readable name of the violated rule.
    pub rule: String,
    /// The job violating the rule.
    pub first: usize,
    /// The higher-priority partner, for the pairwise rules.
    pub second: Option<usize>,
}

/// Derived per-job data used by the organized conditions and the shifting
/// procedure: division, pseudo-size and density class of a job whose size
/// lies in `[(1+δ)^e, (1+δ)^{e+1})` (grid sizes and pseudo-sizes both
/// qualify).
fn job_shape(job: &Job, params: &ParamPack) -> (i64, f64, f64) {
    let e = geo::floor_log(params.delta, job.size);
    let info = crate::rounding::divisions(geo::GeoValue::new(e), params);
    let density = job.weight / geo::pow1p(params.delta, e);
    (info.division, info.pseudo_size(params.delta), density)
}

/// Checks whether a schedule (in list form) of a pseudo-size instance is
/// organized.  Returns `None` when it is, or a witness naming the violated
/// rule:
///
/// 1. a job small for its start interval must complete in that interval;
/// 2. for two jobs of equal division and density where the second starts in
///    a strictly later interval yet was released by the first interval's
///    start: (a) if the first job's pseudo-size is smaller, the second must
///    not be small for the first interval; (b) if the pseudo-sizes are
///    equal, the second's release date must not be smaller; (c) if releases
///    are also equal, the second's id must be smaller.
pub fn is_organized(
    instance: &Instance,
    list: &IntervalList,
    params: &ParamPack,
) -> Result<Option<OrganizedWitness>> {
    let delta = params.delta;
    check_list(instance, list, delta)?;
    let starts = list.start_map()?;
    let completions = list.completion_map()?;

    // Condition 1: small jobs complete in their start interval.
    for job in &instance.jobs {
        let (i1, ell) = starts[&job.id];
        let (i2, _) = completions[&job.id];
        let key = IntervalKey::new(i1, ell, instance.machines[ell].speed, delta, list.theta);
        if classify_job(job.size, &key, delta) == SizeBand::Small && i2 > i1 {
            return Ok(Some(OrganizedWitness {
                rule: "small job crosses its start interval".into(),
                first: job.id,
                second: None,
            }));
        }
    }

    // Condition 2: priority consistency across the interval order.
    for j1 in &instance.jobs {
        let (div1, pi1, d1) = job_shape(j1, params);
        let (i1, l1) = starts[&j1.id];
        for j2 in &instance.jobs {
            if j1.id == j2.id {
                continue;
            }
            let (div2, pi2, d2) = job_shape(j2, params);
            if div1 != div2 || !geo::geo_eq(d1, d2) {
                continue;
            }
            let (i2, l2) = starts[&j2.id];
            let later = i2 > i1 || (i2 == i1 && l2 > l1);
            if !later || !geo::geo_le(j2.release, geo::pow1p(delta, i1)) {
                continue;
            }
            let key1 = IntervalKey::new(i1, l1, instance.machines[l1].speed, delta, list.theta);
            if geo::geo_lt(pi1, pi2) {
                if classify_job(pi2, &key1, delta) == SizeBand::Small {
                    return Ok(Some(OrganizedWitness {
                        rule: "larger-pseudo-size job starts later although small for the earlier interval".into(),
                        first: j2.id,
                        second: Some(j1.id),
                    }));
                }
            } else if geo::geo_eq(pi1, pi2) {
                if geo::geo_lt(j2.release, j1.release) {
                    return Ok(Some(OrganizedWitness {
                        rule: "equal pseudo-size jobs scheduled against release-date priority".into(),
                        first: j2.id,
                        second: Some(j1.id),
                    }));
                }
                if geo::geo_eq(j2.release, j1.release) && j2.id > j1.id {
                    return Ok(Some(OrganizedWitness {
                        rule: "equal pseudo-size, equal-release jobs scheduled against index priority".into(),
                        first: j2.id,
                        second: Some(j1.id),
                    }));
                }
            }
        }
    }
    Ok(None)
}

/// Selection priority of the shifting procedure: smaller initial release
/// date first; among equal release dates, larger id first.  This is a strict
/// total order on jobs.
pub fn priority_before(a: &Job, b: &Job) -> bool {
    if geo::geo_lt(a.release, b.release) {
        return true;
    }
    if geo::geo_lt(b.release, a.release) {
        return false;
    }
    a.id > b.id
}

/// Best-effort generator of organized schedules, used to build test
/// fixtures: jobs are placed by selection priority on the machine giving
/// the earliest timely completion, nudging small jobs forward so they
/// complete in their start interval; the result is verified with
/// [`is_organized`] and rejected if a witness remains.
pub fn organize_fixture(instance: &Instance, params: &ParamPack) -> Result<TimedSchedule> {
    let delta = params.delta;
    let mut order: Vec<usize> = (0..instance.n()).collect();
    order.sort_by(|&a, &b| {
        if priority_before(&instance.jobs[a], &instance.jobs[b]) {
            std::cmp::Ordering::Less
        } else {
            std::cmp::Ordering::Greater
        }
    });
    let mut cursor = vec![0.0_f64; instance.m()];
    let mut out = Vec::with_capacity(instance.n());
    for &k in &order {
        let job = &instance.jobs[k];
        let mut best: Option<(f64, f64, usize)> = None;
        for ell in 0..instance.m() {
            let s = instance.machines[ell].speed;
            let mut start = cursor[ell].max(job.release).max(delta * job.size / s);
            // Keep small jobs inside their start interval.
            for _ in 0..200 {
                let i = geo::floor_log(delta, start.max(f64::MIN_POSITIVE));
                let key = IntervalKey::new(i, ell, s, delta, 0);
                let completion = start + job.size / s;
                let small = start > 0.0 && classify_job(job.size, &key, delta) == SizeBand::Small;
                if small && geo::floor_log(delta, completion) > i {
                    start = geo::pow1p(delta, i + 1);
                } else {
                    break;
                }
            }
            let completion = start + job.size / s;
            if best.is_none() || completion < best.unwrap().0 {
                best = Some((completion, start, ell));
            }
        }
        let (completion, _, ell) = best.unwrap();
        cursor[ell] = completion;
        out.push(TimedJob {
            job: job.id,
            machine: ell,
            completion,
        });
    }
    let schedule = TimedSchedule { jobs: out };
    schedule.validate(instance)?;
    let list = list_from_schedule(instance, &schedule, delta)?;
    if let Some(w) = is_organized(instance, &list, params)? {
        return Err(Error::InvalidSchedule(format!(
            "fixture generator left an unorganized pair: {} (job {}, partner {:?})",
            w.rule, w.first, w.second
        )));
    }
    Ok(schedule)
}

// ---------------------------------------------------------------------------
// Job shifting
// ---------------------------------------------------------------------------

/// Audit trail of [`job_shift`]: for every density class, release exponent
/// and machine, the total size selected to stay at that release date, and
/// the guaranteed bound `Z/δ^{23}`.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ShiftLedger {
    /// The distinct density classes, in decreasing order.
    pub densities: Vec<f64>,
    /// Selected size per `(density index, release exponent, machine)`.
    pub selected: BTreeMap<(usize, i64, usize), f64>,
    /// The bound `s_ℓ δ (1+δ)^i / δ^{23}` for the same keys.
    pub bounds: BTreeMap<(usize, i64, usize), f64>,
    /// Number of release exponents processed across all densities.
    pub steps: u64,
}

/// The release-date shifting procedure.  Releases must be positive grid
/// points.  Per density class, release exponents are processed in increasing
/// order; at each exponent `i`, every interval `J_{i,ℓ}` selects — among the
/// still-pending jobs released at `(1+δ)^i` — the highest-priority job of
/// each big size (plus `1/δ^{10}` extra per medium size), and small jobs per
/// division in non-increasing size order until their total reaches
/// `s_ℓ δ (1+δ)^i`.  Selected jobs keep their release date; all others move
/// to `(1+δ)^{i+1}`.  The procedure never decreases a release date and is
/// idempotent.
pub fn job_shift(instance: &Instance, params: &ParamPack) -> Result<(Instance, ShiftLedger)> {
    let delta = params.delta;
    if !instance.has_release_dates {
        return Err(Error::InvalidInstance(
            "job shifting needs a release-date instance".into(),
        ));
    }
    let mut exponent = vec![0_i64; instance.n()];
    for (k, job) in instance.jobs.iter().enumerate() {
        exponent[k] = geo::exact_exponent(delta, job.release).ok_or_else(|| {
            Error::InvalidInstance(format!(
                "job {} release {} is not a positive grid point; round the instance first",
                job.id, job.release
            ))
        })?;
    }

    // Density classes, deduplicated geometrically, in decreasing order.
    let mut densities: Vec<f64> = Vec::new();
    let mut class = vec![0_usize; instance.n()];
    let mut keyed: Vec<(f64, usize)> = instance
        .jobs
        .iter()
        .enumerate()
        .map(|(k, j)| (job_shape(j, params).2, k))
        .collect();
    keyed.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    for (d, k) in keyed {
        if densities.is_empty() || !geo::geo_eq(*densities.last().unwrap(), d) {
            densities.push(d);
        }
        class[k] = densities.len() - 1;
    }

    let medium_extra: usize = {
        let q = (params.inv_delta as u128).saturating_pow(10);
        q.min(usize::MAX as u128) as usize
    };
    let mut ledger = ShiftLedger {
        densities: densities.clone(),
        ..Default::default()
    };

    for d_idx in 0..densities.len() {
        let members: Vec<usize> = (0..instance.n()).filter(|&k| class[k] == d_idx).collect();
        let mut frozen = vec![false; instance.n()];
        let mut i = members.iter().map(|&k| exponent[k]).min().unwrap();
        let mut guard = 0_u64;
        loop {
            let pending: Vec<usize> =
                members.iter().copied().filter(|&k| !frozen[k]).collect();
            if pending.is_empty() {
                break;
            }
            let min_exp = pending.iter().map(|&k| exponent[k]).min().unwrap();
            if min_exp > i {
                i = min_exp;
            }
            guard += 1;
            if guard > 1_000_000 {
                return Err(Error::CapExceeded(
                    "job shifting did not converge within 10^6 release exponents".into(),
                ));
            }
            ledger.steps += 1;
            let mut candidates: Vec<usize> = pending
                .iter()
                .copied()
                .filter(|&k| exponent[k] == i)
                .collect();
            // Priority order: initial release ascending, id descending.
            candidates.sort_by(|&a, &b| {
                if priority_before(&instance.jobs[a], &instance.jobs[b]) {
                    std::cmp::Ordering::Less
                } else {
                    std::cmp::Ordering::Greater
                }
            });
            let mut selected = vec![false; instance.n()];
            for ell in 0..instance.m() {
                let speed = instance.machines[ell].speed;
                let z = speed * delta * geo::pow1p(delta, i);
                let key = IntervalKey::new(i, ell, speed, delta, i);
                // Distinct sizes among candidates, decreasing.
                let mut sizes: Vec<f64> = Vec::new();
                for &k in &candidates {
                    let p = instance.jobs[k].size;
                    if !sizes.iter().any(|&q| geo::geo_eq(q, p)) {
                        sizes.push(p);
                    }
                }
                sizes.sort_by(|a, b| b.partial_cmp(a).unwrap());
                // Big sizes: one job each, plus the medium surplus quota.
                for &p in &sizes {
                    let band = classify_job(p, &key, delta);
                    if !band.is_big() {
                        continue;
                    }
                    let quota = 1 + if band == SizeBand::Medium { medium_extra } else { 0 };
                    let mut taken = 0_usize;
                    for &k in &candidates {
                        if taken == quota {
                            break;
                        }
                        if selected[k] || !geo::geo_eq(instance.jobs[k].size, p) {
                            continue;
                        }
                        selected[k] = true;
                        taken += 1;
                        *ledger.selected.entry((d_idx, i, ell)).or_insert(0.0) +=
                            instance.jobs[k].size;
                    }
                }
                // Small sizes, per division, until the wave reaches Z.
                let mut divisions_here: Vec<i64> = Vec::new();
                for &k in &candidates {
                    let p = instance.jobs[k].size;
                    if classify_job(p, &key, delta) == SizeBand::Small {
                        let div = job_shape(&instance.jobs[k], params).0;
                        if !divisions_here.contains(&div) {
                            divisions_here.push(div);
                        }
                    }
                }
                divisions_here.sort_unstable();
                for div in divisions_here {
                    let mut wave = 0.0_f64;
                    'sizes: for &p in &sizes {
                        if classify_job(p, &key, delta) != SizeBand::Small {
                            continue;
                        }
                        for &k in &candidates {
                            if selected[k]
                                || !geo::geo_eq(instance.jobs[k].size, p)
                                || job_shape(&instance.jobs[k], params).0 != div
                            {
                                continue;
                            }
                            if geo::geo_ge(wave, z) {
                                break 'sizes;
                            }
                            selected[k] = true;
                            wave += instance.jobs[k].size;
                            *ledger.selected.entry((d_idx, i, ell)).or_insert(0.0) +=
                                instance.jobs[k].size;
                        }
                    }
                }
                ledger
                    .bounds
                    .insert((d_idx, i, ell), z / delta.powi(23));
            }
            for &k in &candidates {
                if selected[k] {
                    frozen[k] = true;
                } else {
                    exponent[k] = i + 1;
                }
            }
            i += 1;
        }
    }

    let jobs: Vec<Job> = instance
        .jobs
        .iter()
        .enumerate()
        .map(|(k, j)| Job {
            release: geo::pow1p(delta, exponent[k]),
            ..*j
        })
        .collect();
    let shifted = Instance::new(jobs, instance.machines.clone(), true)?;
    Ok((shifted, ledger))
}

// ---------------------------------------------------------------------------
// Release-batch packing
// ---------------------------------------------------------------------------

/// Which form of release batch is being packed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BatchForm {
    /// All jobs have (modified) release date exactly `r`; deadline
    /// `t + r ŷ / δ^{22}`.
    Uniform,
    /// Jobs have release dates at most `r`; requires `t > r`; deadline
    /// `t + r ŷ (1+δ) / δ^{23}`.
    Cumulative,
}

/// A packed release batch: the schedule fragment and the deadline that all
/// completions respect.
#[derive(Clone, Debug)]
pub struct BatchPack {
    /// Completion times of the batch jobs; a fragment, not a full schedule.
    pub fragment: TimedSchedule,
    /// All completions are at most this time.
    pub deadline: f64,
    /// The number ŷ of distinct density classes among the batch jobs.
    pub densities: usize,
}

/// Packs the jobs of a shifted release batch (at most ŷ densities) onto the
/// machines starting at time `t`, completing everything by the form's
/// deadline.  Per density, machine `ℓ` accepts at most `s_ℓ r / δ^{22}`
/// total size (uniform form) or `s_ℓ r (1+δ) / δ^{23}` (cumulative form),
/// which is exactly what the shifting procedure guarantees fits.
pub fn pack_release_batch(
    jobs: &[Job],
    r: f64,
    t: f64,
    machines: &[Machine],
    params: &ParamPack,
    form: BatchForm,
) -> Result<BatchPack> {
    let delta = params.delta;
    if r <= 0.0 || machines.is_empty() {
        return Err(Error::InvalidParams(
            "release-batch packing needs r > 0 and at least one machine".into(),
        ));
    }
    match form {
        BatchForm::Uniform => {
            if geo::geo_lt(t, r) {
                return Err(Error::InvalidParams(format!(
                    "uniform batch needs t >= r, got t = {t}, r = {r}"
                )));
            }
            for j in jobs {
                if !geo::geo_eq(j.release, r) {
                    return Err(Error::InvalidParams(format!(
                        "uniform batch job {} has release {} != r = {r}",
                        j.id, j.release
                    )));
                }
            }
        }
        BatchForm::Cumulative => {
            if geo::geo_le(t, r) {
                return Err(Error::InvalidParams(format!(
                    "cumulative batch needs t > r, got t = {t}, r = {r}"
                )));
            }
            for j in jobs {
                if !geo::geo_le(j.release, r) {
                    return Err(Error::InvalidParams(format!(
                        "cumulative batch job {} has release {} > r = {r}",
                        j.id, j.release
                    )));
                }
            }
        }
    }
    // Density classes among the batch jobs.
    let mut densities: Vec<f64> = Vec::new();
    let mut class = vec![0_usize; jobs.len()];
    for (k, j) in jobs.iter().enumerate() {
        let e = geo::floor_log(delta, j.size);
        let d = j.weight / geo::pow1p(delta, e);
        match densities.iter().position(|&q| geo::geo_eq(q, d)) {
            Some(p) => class[k] = p,
            None => {
                densities.push(d);
                class[k] = densities.len() - 1;
            }
        }
    }
    let per_density_budget = |speed: f64| match form {
        BatchForm::Uniform => speed * r / delta.powi(22),
        BatchForm::Cumulative => speed * r * (1.0 + delta) / delta.powi(23),
    };
    let horizon = r * densities.len() as f64
        * match form {
            BatchForm::Uniform => 1.0 / delta.powi(22),
            BatchForm::Cumulative => (1.0 + delta) / delta.powi(23),
        };
    let deadline = t + horizon;

    // First-fit by decreasing size within per-(density, machine) budgets.
    let mut load = vec![vec![0.0_f64; machines.len()]; densities.len()];
    let mut assignment: Vec<Vec<usize>> = vec![Vec::new(); machines.len()];
    let mut order: Vec<usize> = (0..jobs.len()).collect();
    order.sort_by(|&a, &b| {
        jobs[b]
            .size
            .partial_cmp(&jobs[a].size)
            .unwrap()
            .then(jobs[a].id.cmp(&jobs[b].id))
    });
    for k in order {
        let d = class[k];
        let mut placed = false;
        for (ell, machine) in machines.iter().enumerate() {
            let budget = per_density_budget(machine.speed);
            if geo::geo_le(load[d][ell] + jobs[k].size, budget) {
                load[d][ell] += jobs[k].size;
                assignment[ell].push(k);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::InvalidParams(format!(
                "job {} does not fit any machine's per-density budget; not a shifted release batch",
                jobs[k].id
            )));
        }
    }
    let mut fragment = Vec::new();
    for (ell, machine) in machines.iter().enumerate() {
        let mut cursor = t;
        for &k in &assignment[ell] {
            cursor += jobs[k].size / machine.speed;
            fragment.push(TimedJob {
                job: jobs[k].id,
                machine: ell,
                completion: cursor,
            });
        }
        debug_assert!(geo::geo_le(cursor, deadline));
    }
    Ok(BatchPack {
        fragment: TimedSchedule { jobs: fragment },
        deadline,
        densities: densities.len(),
    })
}
