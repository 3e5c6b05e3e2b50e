//! Schedules: ordered (per-machine job sequences) and timed (explicit
//! completion times), plus the natural priority order.
//!
//! The time slot a job occupies is half open, `[C - p/s, C)`: two slots that
//! merely touch at a boundary do not overlap.

use crate::error::{Error, Result};
use crate::geo;
use crate::instance::{Instance, Job};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fmt::Write as _;

/// Jobs listed per machine; jobs run back-to-back from time 0 in list order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderedSchedule {
    /// `machines[k]` holds the job ids run on the machine with index `k` in
    /// the instance's (speed-sorted) machine list.
    pub machines: Vec<Vec<usize>>,
}

impl OrderedSchedule {
    /// An empty schedule over `m` machines.
    pub fn empty(m: usize) -> Self {
        OrderedSchedule {
            machines: vec![Vec::new(); m],
        }
    }

    /// Checks that every instance job appears exactly once.
    pub fn validate(&self, instance: &Instance) -> Result<()> {
        if self.machines.len() != instance.m() {
            return Err(Error::InvalidSchedule(format!(
                "schedule has {} machines, instance has {}",
                self.machines.len(),
                instance.m()
            )));
        }
        let mut seen: Vec<usize> = self.machines.iter().flatten().copied().collect();
        seen.sort_unstable();
        let mut expected: Vec<usize> = instance.jobs.iter().map(|j| j.id).collect();
        expected.sort_unstable();
        if seen != expected {
            return Err(Error::InvalidSchedule(
                "jobs in schedule do not match instance jobs exactly once".into(),
            ));
        }
        Ok(())
    }
}

/// One job's placement in a timed schedule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimedJob {
    /// Job id.
    pub job: usize,
    /// Index of the machine in the instance's machine list.
    pub machine: usize,
    /// Completion time `C`; the occupied slot is `[C - p/s, C)`.
    pub completion: f64,
}

/// Explicit completion times per job.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimedSchedule {
    /// One entry per instance job, in no particular order.
    pub jobs: Vec<TimedJob>,
}

impl TimedSchedule {
    /// The entry for a job id.
    pub fn entry(&self, job: usize) -> &TimedJob {
        self.jobs
            .iter()
            .find(|t| t.job == job)
            .unwrap_or_else(|| panic!("job {job} missing from schedule"))
    }

    /// Start time of a job: `C - p/s`.
    pub fn start(&self, instance: &Instance, job: usize) -> f64 {
        let t = self.entry(job);
        let p = instance.job(job).size;
        let s = instance.machines[t.machine].speed;
        t.completion - p / s
    }

    /// Validates coverage, machine indices, release dates, and the half-open
    /// no-overlap condition.
    pub fn validate(&self, instance: &Instance) -> Result<()> {
        let mut seen: Vec<usize> = self.jobs.iter().map(|t| t.job).collect();
        seen.sort_unstable();
        let mut expected: Vec<usize> = instance.jobs.iter().map(|j| j.id).collect();
        expected.sort_unstable();
        if seen != expected {
            return Err(Error::InvalidSchedule(
                "jobs in timed schedule do not match instance jobs exactly once".into(),
            ));
        }
        let mut by_machine: HashMap<usize, Vec<(f64, f64, usize)>> = HashMap::new();
        for t in &self.jobs {
            if t.machine >= instance.m() {
                return Err(Error::InvalidSchedule(format!(
                    "job {} placed on unknown machine index {}",
                    t.job, t.machine
                )));
            }
            let j = instance.job(t.job);
            let s = instance.machines[t.machine].speed;
            let start = t.completion - j.size / s;
            if geo::geo_lt(start, j.release) || start < -geo::GEO_TOL {
                return Err(Error::InvalidSchedule(format!(
                    "job {} starts at {start} before its release {} (or before 0)",
                    t.job, j.release
                )));
            }
            by_machine
                .entry(t.machine)
                .or_default()
                .push((start, t.completion, t.job));
        }
        for (mi, mut slots) in by_machine {
            slots.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            for w in slots.windows(2) {
                let (_, end_a, job_a) = w[0];
                let (start_b, _, job_b) = w[1];
                if geo::geo_lt(start_b, end_a) {
                    return Err(Error::InvalidSchedule(format!(
                        "jobs {job_a} and {job_b} overlap on machine index {mi}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Parses the schedule file format: one `job <id> machine <id> completion
    /// <decimal>` line per job.
    pub fn parse(text: &str, instance: &Instance) -> Result<Self> {
        let mut jobs = Vec::new();
        for line in text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
        {
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.len() != 6 || toks[0] != "job" || toks[2] != "machine" || toks[4] != "completion"
            {
                return Err(Error::Parse(format!("unrecognized schedule line `{line}`")));
            }
            let job: usize = toks[1]
                .parse()
                .map_err(|_| Error::Parse(format!("bad job id `{}`", toks[1])))?;
            let machine_id: usize = toks[3]
                .parse()
                .map_err(|_| Error::Parse(format!("bad machine id `{}`", toks[3])))?;
            let completion: f64 = toks[5]
                .parse()
                .map_err(|_| Error::Parse(format!("bad completion `{}`", toks[5])))?;
            let machine = instance
                .machines
                .iter()
                .position(|m| m.id == machine_id)
                .ok_or_else(|| Error::Parse(format!("unknown machine id {machine_id}")))?;
            jobs.push(TimedJob {
                job,
                machine,
                completion,
            });
        }
        let sched = TimedSchedule { jobs };
        sched.validate(instance)?;
        Ok(sched)
    }

    /// Renders the schedule file format (machine column uses machine ids).
    pub fn render(&self, instance: &Instance) -> String {
        let mut out = String::new();
        let mut rows = self.jobs.clone();
        rows.sort_by_key(|t| t.job);
        for t in rows {
            let _ = writeln!(
                out,
                "job {} machine {} completion {}",
                t.job, instance.machines[t.machine].id, t.completion
            );
        }
        out
    }
}

/// Sorts job ids by non-increasing density `w/p`; equal densities are broken
/// by non-increasing size, then by increasing id.  On a single machine this
/// order minimizes the total weighted completion time, and swapping
/// equal-density neighbors never changes the cost (so the tie-breaks only fix
/// determinism).  Density comparison is cross-multiplied (`w_a * p_b` vs
/// `w_b * p_a`) to avoid division noise.
pub fn natural_order(jobs: &[Job]) -> Vec<usize> {
    let mut ids: Vec<usize> = (0..jobs.len()).collect();
    ids.sort_by(|&a, &b| {
        let (ja, jb) = (&jobs[a], &jobs[b]);
        let lhs = ja.weight * jb.size;
        let rhs = jb.weight * ja.size;
        rhs.partial_cmp(&lhs)
            .unwrap()
            .then(jb.size.partial_cmp(&ja.size).unwrap())
            .then(ja.id.cmp(&jb.id))
    });
    ids.into_iter().map(|i| jobs[i].id).collect()
}

/// Turns an ordered schedule into a timed one: jobs run back-to-back from
/// time 0 (release dates, if any, are ignored — callers on release-date
/// instances must use a timing routine that respects them).
pub fn timed_from_ordered(instance: &Instance, ordered: &OrderedSchedule) -> TimedSchedule {
    let mut jobs = Vec::with_capacity(instance.n());
    for (mi, list) in ordered.machines.iter().enumerate() {
        let s = instance.machines[mi].speed;
        let mut t = 0.0;
        for &id in list {
            t += instance.job(id).size / s;
            jobs.push(TimedJob {
                job: id,
                machine: mi,
                completion: t,
            });
        }
    }
    TimedSchedule { jobs }
}

/// Timed schedule for an ordered schedule on a release-date instance: each
/// job starts at `max(previous completion, release)`; with `min_start_factor
/// = Some(delta)` additionally at `delta * p / s`, which makes the result
/// timely by construction.
pub fn timed_from_ordered_release(
    instance: &Instance,
    ordered: &OrderedSchedule,
    min_start_factor: Option<f64>,
) -> TimedSchedule {
    let mut jobs = Vec::with_capacity(instance.n());
    for (mi, list) in ordered.machines.iter().enumerate() {
        let s = instance.machines[mi].speed;
        let mut t: f64 = 0.0;
        for &id in list {
            let j = instance.job(id);
            let mut start = t.max(j.release);
            if let Some(delta) = min_start_factor {
                start = start.max(delta * j.size / s);
            }
            t = start + j.size / s;
            jobs.push(TimedJob {
                job: id,
                machine: mi,
                completion: t,
            });
        }
    }
    TimedSchedule { jobs }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::Machine;

    fn inst() -> Instance {
        Instance::new(
            vec![
                Job { id: 0, size: 2.0, weight: 1.0, release: 0.0 },
                Job { id: 1, size: 1.0, weight: 2.0, release: 0.0 },
                Job { id: 2, size: 1.0, weight: 1.0, release: 0.0 },
            ],
            vec![Machine { id: 0, speed: 1.0 }, Machine { id: 1, speed: 1.0 }],
            false,
        )
        .unwrap()
    }

    #[test]
    fn natural_order_puts_high_density_first() {
        let inst = inst();
        // Densities: job0 = 0.5, job1 = 2, job2 = 1.
        assert_eq!(natural_order(&inst.jobs), vec![1, 2, 0]);
    }

    #[test]
    fn natural_order_breaks_density_ties_by_id() {
        let jobs = vec![
            Job { id: 7, size: 2.0, weight: 2.0, release: 0.0 },
            Job { id: 3, size: 5.0, weight: 5.0, release: 0.0 },
        ];
        assert_eq!(natural_order(&jobs), vec![3, 7]);
    }

    #[test]
    fn touching_slots_are_not_overlaps() {
        let inst = inst();
        let sched = TimedSchedule {
            jobs: vec![
                TimedJob { job: 0, machine: 0, completion: 2.0 },
                TimedJob { job: 1, machine: 0, completion: 3.0 },
                TimedJob { job: 2, machine: 1, completion: 1.0 },
            ],
        };
        sched.validate(&inst).unwrap();
    }

    #[test]
    fn overlap_is_rejected() {
        let inst = inst();
        let sched = TimedSchedule {
            jobs: vec![
                TimedJob { job: 0, machine: 0, completion: 2.0 },
                TimedJob { job: 1, machine: 0, completion: 2.5 },
                TimedJob { job: 2, machine: 1, completion: 1.0 },
            ],
        };
        assert!(sched.validate(&inst).is_err());
    }

    #[test]
    fn schedule_file_round_trip() {
        let inst = inst();
        let ordered = OrderedSchedule {
            machines: vec![vec![1, 0], vec![2]],
        };
        let timed = timed_from_ordered(&inst, &ordered);
        let parsed = TimedSchedule::parse(&timed.render(&inst), &inst).unwrap();
        for j in [0, 1, 2] {
            assert_eq!(parsed.entry(j).machine, timed.entry(j).machine);
            assert!((parsed.entry(j).completion - timed.entry(j).completion).abs() < 1e-12);
        }
    }
}
