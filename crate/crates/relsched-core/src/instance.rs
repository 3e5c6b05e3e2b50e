//! Instances: jobs, machines, and the text format used by the CLI.
//!
//! A job has a positive size, a positive weight, and a non-negative release
//! date; a machine has a positive speed.  Running a job of size `p` on a
//! machine of speed `s` takes `p / s` time units.  The *density* of a job is
//! `weight / size` — the natural priority under which a single machine is
//! optimally ordered.
//!
//! Rounded instances carry the same `f64` fields, but every field is an exact
//! grid point `(1 + delta)^k`; [`crate::geo::exact_exponent`] recovers the
//! exponent on demand.

use crate::error::{Error, Result};
use crate::geo;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

/// A single job.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Job {
    /// Identifier, stable across all transformations of an instance.
    pub id: usize,
    /// Processing requirement (size), strictly positive.
    pub size: f64,
    /// Weight in the objective, strictly positive.
    pub weight: f64,
    /// Release date; zero for instances without release dates.
    pub release: f64,
}

impl Job {
    /// `weight / size`, the priority of the job under the natural order.
    pub fn density(&self) -> f64 {
        self.weight / self.size
    }
}

/// A single machine.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Machine {
    /// Identifier, stable across all transformations of an instance.
    pub id: usize,
    /// Speed, strictly positive.  Machines are kept sorted by non-increasing
    /// speed, so machine index 0 is (one of) the fastest.
    pub speed: f64,
}

/// A scheduling instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    /// Jobs; ids are unique but not necessarily contiguous.
    pub jobs: Vec<Job>,
    /// Machines, sorted by non-increasing speed.
    pub machines: Vec<Machine>,
    /// Whether release dates are meaningful for this instance.
    pub has_release_dates: bool,
}

impl Instance {
    /// Builds an instance, sorting machines by non-increasing speed and
    /// validating the structural invariants.
    pub fn new(jobs: Vec<Job>, mut machines: Vec<Machine>, has_release_dates: bool) -> Result<Self> {
        if machines.is_empty() {
            return Err(Error::InvalidInstance("machine list is empty".into()));
        }
        for m in &machines {
            if !(m.speed > 0.0) || !m.speed.is_finite() {
                return Err(Error::InvalidInstance(format!(
                    "machine {} has non-positive speed {}",
                    m.id, m.speed
                )));
            }
        }
        for j in &jobs {
            if !(j.size > 0.0) || !(j.weight > 0.0) || j.release < 0.0 {
                return Err(Error::InvalidInstance(format!(
                    "job {} has invalid fields (size {}, weight {}, release {})",
                    j.id, j.size, j.weight, j.release
                )));
            }
            if !has_release_dates && j.release != 0.0 {
                return Err(Error::InvalidInstance(format!(
                    "job {} carries a release date but the instance declares none",
                    j.id
                )));
            }
        }
        let mut ids: Vec<usize> = jobs.iter().map(|j| j.id).collect();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() != jobs.len() {
            return Err(Error::InvalidInstance("duplicate job ids".into()));
        }
        machines.sort_by(|a, b| b.speed.partial_cmp(&a.speed).unwrap().then(a.id.cmp(&b.id)));
        Ok(Instance {
            jobs,
            machines,
            has_release_dates,
        })
    }

    /// Number of jobs.
    pub fn n(&self) -> usize {
        self.jobs.len()
    }

    /// Number of machines.
    pub fn m(&self) -> usize {
        self.machines.len()
    }

    /// The job with the given id.
    pub fn job(&self, id: usize) -> &Job {
        self.jobs
            .iter()
            .find(|j| j.id == id)
            .unwrap_or_else(|| panic!("unknown job id {id}"))
    }

    /// The machine with the given id.
    pub fn machine(&self, id: usize) -> &Machine {
        self.machines
            .iter()
            .find(|m| m.id == id)
            .unwrap_or_else(|| panic!("unknown machine id {id}"))
    }

    /// Fastest speed in the instance.
    pub fn max_speed(&self) -> f64 {
        self.machines[0].speed
    }

    /// True if every job/machine field is an exact grid point for `delta`
    /// (release dates are exempt when the instance has none).
    pub fn is_geometric(&self, delta: f64) -> bool {
        self.machines
            .iter()
            .all(|m| geo::exact_exponent(delta, m.speed).is_some())
            && self.jobs.iter().all(|j| {
                geo::exact_exponent(delta, j.size).is_some()
                    && geo::exact_exponent(delta, j.weight).is_some()
                    && (!self.has_release_dates
                        || j.release == 0.0
                        || geo::exact_exponent(delta, j.release).is_some())
            })
    }

    /// Parses the text format: one header line `m n has_release`, then
    /// `machine <id> <speed>` lines, then `job <id> <size> <weight> <release>`
    /// lines.  Blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty instance file".into()))?;
        let head: Vec<&str> = header.split_whitespace().collect();
        if head.len() != 3 {
            return Err(Error::Parse(format!(
                "header must be `m n has_release`, got `{header}`"
            )));
        }
        let m: usize = head[0]
            .parse()
            .map_err(|_| Error::Parse(format!("bad machine count `{}`", head[0])))?;
        let n: usize = head[1]
            .parse()
            .map_err(|_| Error::Parse(format!("bad job count `{}`", head[1])))?;
        let has_release = match head[2] {
            "0" | "false" => false,
            "1" | "true" => true,
            other => return Err(Error::Parse(format!("bad has_release flag `{other}`"))),
        };
        let mut machines = Vec::with_capacity(m);
        let mut jobs = Vec::with_capacity(n);
        for line in lines {
            let toks: Vec<&str> = line.split_whitespace().collect();
            match toks.first().copied() {
                Some("machine") if toks.len() == 3 => machines.push(Machine {
                    id: parse_num(toks[1])? as usize,
                    speed: parse_num(toks[2])?,
                }),
                Some("job") if toks.len() == 5 => jobs.push(Job {
                    id: parse_num(toks[1])? as usize,
                    size: parse_num(toks[2])?,
                    weight: parse_num(toks[3])?,
                    release: parse_num(toks[4])?,
                }),
                _ => return Err(Error::Parse(format!("unrecognized line `{line}`"))),
            }
        }
        if machines.len() != m || jobs.len() != n {
            return Err(Error::Parse(format!(
                "header declared {m} machines / {n} jobs, found {} / {}",
                machines.len(),
                jobs.len()
            )));
        }
        Instance::new(jobs, machines, has_release)
    }

    /// Renders the text format accepted by [`Instance::parse`].
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{} {} {}",
            self.m(),
            self.n(),
            if self.has_release_dates { 1 } else { 0 }
        );
        for m in &self.machines {
            let _ = writeln!(out, "machine {} {}", m.id, m.speed);
        }
        for j in &self.jobs {
            let _ = writeln!(out, "job {} {} {} {}", j.id, j.size, j.weight, j.release);
        }
        out
    }
}

fn parse_num(tok: &str) -> Result<f64> {
    let v: f64 = tok
        .parse()
        .map_err(|_| Error::Parse(format!("bad number `{tok}`")))?;
    if !v.is_finite() {
        return Err(Error::Parse(format!("non-finite number `{tok}`")));
    }
    Ok(v)
}
