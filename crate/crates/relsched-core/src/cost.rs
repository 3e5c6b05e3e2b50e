//! Cost functionals: true weighted completion time, half-point values
//! (Γ-values), threshold costs (U-cost), and the interval-rounded pseudo-cost.
//!
//! The Γ-value of a job is its weight times the moment half of it has been
//! processed, `Γ_j = w_j (C_j − p_j / (2 s_i))`.  Γ-values are the workhorse
//! of every lower bound in this toolkit: they are order-invariant for
//! equal-density blocks and admit the closed-form bound
//! `φ Φ² / (2 v)` for any job set of total size `Φ` and minimum density `φ`
//! on a machine of speed `v`.

use crate::error::{Error, Result};
use crate::geo;
use crate::instance::{Instance, Job};
use crate::schedule::{timed_from_ordered, OrderedSchedule, TimedSchedule};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Which functional a [`CostReport`] carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CostKind {
    /// `Σ w_j C_j`.
    TrueCost,
    /// `Σ Γ_j`.
    GammaSum,
    /// Weighted completion for jobs at or above a threshold, Γ below it.
    UCost,
    /// Interval-rounded cost: `w_j (1+δ)^{i+1}` for `C_j` in interval `i`.
    PseudoCost,
}

/// A cost broken down per job (and, for pseudo-cost, per interval).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CostReport {
    /// Which functional was evaluated.
    pub kind: CostKind,
    /// Sum of all per-job contributions.
    pub total: f64,
    /// `(job id, contribution)` pairs.
    pub per_job: Vec<(usize, f64)>,
    /// For pseudo-cost: contribution totals keyed by interval index.
    pub per_interval: BTreeMap<i64, f64>,
}

impl CostReport {
    fn from_contributions(kind: CostKind, per_job: Vec<(usize, f64)>) -> Self {
        let total = per_job.iter().map(|(_, c)| c).sum();
        CostReport {
            kind,
            total,
            per_job,
            per_interval: BTreeMap::new(),
        }
    }
}

/// Total weighted completion time of an ordered schedule (jobs back-to-back
/// from time 0).  Fails if the schedule is invalid for the instance.
pub fn cost_ordered(instance: &Instance, schedule: &OrderedSchedule) -> Result<CostReport> {
    schedule.validate(instance)?;
    cost_timed(instance, &timed_from_ordered(instance, schedule))
}

/// Total weighted completion time of a timed schedule.
pub fn cost_timed(instance: &Instance, schedule: &TimedSchedule) -> Result<CostReport> {
    schedule.validate(instance)?;
    let per_job = schedule
        .jobs
        .iter()
        .map(|t| (t.job, instance.job(t.job).weight * t.completion))
        .collect();
    Ok(CostReport::from_contributions(CostKind::TrueCost, per_job))
}

/// Γ-value of one job: `w (C − p / (2 s))`.  The completion must be at least
/// the processing time `p / s`.
pub fn gamma_value(job: &Job, completion: f64, speed: f64) -> Result<f64> {
    let proc = job.size / speed;
    if geo::geo_lt(completion, proc) {
        return Err(Error::InvalidSchedule(format!(
            "job {} completion {completion} is below its processing time {proc}",
            job.id
        )));
    }
    Ok(job.weight * (completion - proc / 2.0))
}

/// Closed-form lower bound `φ Φ² / (2 v)` on the Γ-sum (hence on the cost) of
/// any schedule that runs `jobs` on a machine of speed `speed`, where `Φ` is
/// the total size and `φ` the minimum density.  Empty set → 0.
pub fn gamma_lower_bound(jobs: &[&Job], speed: f64) -> f64 {
    if jobs.is_empty() {
        return 0.0;
    }
    let phi_total: f64 = jobs.iter().map(|j| j.size).sum();
    let min_density = jobs
        .iter()
        .map(|j| j.density())
        .fold(f64::INFINITY, f64::min);
    min_density * phi_total * phi_total / (2.0 * speed)
}

/// Γ-sum of a consecutive block of equal-density jobs: `Δ (τ + Φ/(2s)) Φ` for
/// density `Δ`, start time `τ`, total size `Φ`, speed `s`.  The value does not
/// depend on how the block is split into jobs.
pub fn block_gamma(total_size: f64, density: f64, start: f64, speed: f64) -> f64 {
    density * (start + total_size / (2.0 * speed)) * total_size
}

/// U-cost of one machine's ordered job list: jobs of size `>= U` contribute
/// their full weighted completion `w C`, jobs of size `< U` contribute their
/// Γ-value.  Jobs run back-to-back from time 0 at the given speed.
///
/// The identity `cost = u_cost + Σ_{p_j < U} w_j p_j / (2 s)` holds for every
/// threshold `U`.
pub fn u_cost(jobs: &[Job], u: f64, speed: f64) -> f64 {
    let mut t = 0.0;
    let mut total = 0.0;
    for j in jobs {
        t += j.size / speed;
        if j.size >= u {
            total += j.weight * t;
        } else {
            total += j.weight * (t - j.size / (2.0 * speed));
        }
    }
    total
}

/// Interval-rounded pseudo-cost: a job completing in `[(1+δ)^i, (1+δ)^{i+1})`
/// contributes `w (1+δ)^{i+1}`; a completion exactly on a grid point
/// `(1+δ)^i` belongs to interval `i`.  Satisfies
/// `cost <= pseudo_cost <= (1+δ) cost`.  Completion times must be positive.
pub fn pseudo_cost(instance: &Instance, schedule: &TimedSchedule, delta: f64) -> Result<CostReport> {
    schedule.validate(instance)?;
    let mut per_job = Vec::with_capacity(schedule.jobs.len());
    let mut per_interval: BTreeMap<i64, f64> = BTreeMap::new();
    for t in &schedule.jobs {
        if t.completion <= 0.0 {
            return Err(Error::InvalidSchedule(format!(
                "job {} has non-positive completion {} in pseudo-cost",
                t.job, t.completion
            )));
        }
        let i = geo::floor_log(delta, t.completion);
        let contribution = instance.job(t.job).weight * geo::pow1p(delta, i + 1);
        per_job.push((t.job, contribution));
        *per_interval.entry(i).or_insert(0.0) += contribution;
    }
    let mut report = CostReport::from_contributions(CostKind::PseudoCost, per_job);
    report.per_interval = per_interval;
    Ok(report)
}

/// Pseudo-cost total without the per-job report; convenience wrapper.
pub fn pseudo_cost_total(instance: &Instance, schedule: &TimedSchedule, delta: f64) -> Result<f64> {
    Ok(pseudo_cost(instance, schedule, delta)?.total)
}

/// Checks the timeliness condition: every job's start time is at least
/// `delta * p_j / s_i` (boundary included).  Returns `Ok(())` or the first
/// violating job with its start time.
pub fn is_timely(instance: &Instance, schedule: &TimedSchedule, delta: f64) -> std::result::Result<(), (usize, f64)> {
    let mut rows: Vec<_> = schedule.jobs.iter().collect();
    rows.sort_by_key(|t| t.job);
    for t in rows {
        let j = instance.job(t.job);
        let s = instance.machines[t.machine].speed;
        let start = t.completion - j.size / s;
        if geo::geo_lt(start, delta * j.size / s) {
            return Err((t.job, start));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::Machine;
    use crate::schedule::{natural_order, TimedJob};
    use proptest::prelude::*;

    fn single_machine(jobs: Vec<Job>, speed: f64) -> Instance {
        Instance::new(jobs, vec![Machine { id: 0, speed }], false).unwrap()
    }

    #[test]
    fn cost_single_job_on_fast_machine() {
        let inst = single_machine(vec![Job { id: 0, size: 3.0, weight: 2.0, release: 0.0 }], 1.5);
        let sched = OrderedSchedule { machines: vec![vec![0]] };
        let report = cost_ordered(&inst, &sched).unwrap();
        assert!((report.total - 4.0).abs() < 1e-12);
    }

    #[test]
    fn cost_two_unit_jobs() {
        let inst = single_machine(
            vec![
                Job { id: 0, size: 1.0, weight: 1.0, release: 0.0 },
                Job { id: 1, size: 1.0, weight: 1.0, release: 0.0 },
            ],
            1.0,
        );
        let sched = OrderedSchedule { machines: vec![vec![0, 1]] };
        assert!((cost_ordered(&inst, &sched).unwrap().total - 3.0).abs() < 1e-12);
    }

    #[test]
    fn natural_order_beats_reverse_on_spec_pair() {
        // (p=2,w=1) and (p=1,w=2): the dense job first gives 2*1 + 1*3 = 5.
        let inst = single_machine(
            vec![
                Job { id: 1, size: 2.0, weight: 1.0, release: 0.0 },
                Job { id: 2, size: 1.0, weight: 2.0, release: 0.0 },
            ],
            1.0,
        );
        let order = natural_order(&inst.jobs);
        assert_eq!(order, vec![2, 1]);
        let good = cost_ordered(&inst, &OrderedSchedule { machines: vec![order] }).unwrap();
        let bad = cost_ordered(&inst, &OrderedSchedule { machines: vec![vec![1, 2]] }).unwrap();
        assert!((good.total - 5.0).abs() < 1e-12);
        assert!((bad.total - 8.0).abs() < 1e-12);
    }

    #[test]
    fn gamma_value_examples() {
        let j = Job { id: 0, size: 2.0, weight: 4.0, release: 0.0 };
        assert!((gamma_value(&j, 3.0, 1.0).unwrap() - 8.0).abs() < 1e-12);
        assert!((gamma_value(&j, 2.0, 1.0).unwrap() - 4.0).abs() < 1e-12);
        let unit = Job { id: 1, size: 1.0, weight: 1.0, release: 0.0 };
        assert!((gamma_value(&unit, 1.0, 1.0).unwrap() - 0.5).abs() < 1e-12);
        // Completion below processing time is a domain error.
        assert!(gamma_value(&j, 1.0, 1.0).is_err());
    }

    #[test]
    fn gamma_lower_bound_examples() {
        let j = Job { id: 0, size: 2.0, weight: 4.0, release: 0.0 }; // density 2
        assert!((gamma_lower_bound(&[&j], 1.0) - 4.0).abs() < 1e-12);
        assert_eq!(gamma_lower_bound(&[], 1.0), 0.0);
        let a = Job { id: 0, size: 1.0, weight: 1.0, release: 0.0 };
        let b = Job { id: 1, size: 1.0, weight: 1.0, release: 0.0 };
        // Two unit jobs, density 1: bound 1*4/2 = 2, matching the exact Γ-sum.
        assert!((gamma_lower_bound(&[&a, &b], 1.0) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn block_gamma_examples() {
        assert!((block_gamma(2.0, 1.0, 0.0, 1.0) - 2.0).abs() < 1e-12);
        assert_eq!(block_gamma(0.0, 5.0, 3.0, 2.0), 0.0);
        // Three unit jobs of density 2 starting at τ=1 on speed 1:
        // Γ = 2*(1.5 + 2.5 + 3.5) = 15.
        assert!((block_gamma(3.0, 2.0, 1.0, 1.0) - 15.0).abs() < 1e-12);
    }

    #[test]
    fn u_cost_extremes_and_identity() {
        let jobs = vec![
            Job { id: 0, size: 4.0, weight: 3.0, release: 0.0 },
            Job { id: 1, size: 1.0, weight: 2.0, release: 0.0 },
        ];
        let s = 1.0;
        let full: f64 = {
            let mut t = 0.0;
            jobs.iter()
                .map(|j| {
                    t += j.size / s;
                    j.weight * t
                })
                .sum()
        };
        // U below all sizes: every job is "large" → full cost.
        assert!((u_cost(&jobs, 0.5, s) - full).abs() < 1e-12);
        // U above all sizes: every job is "small" → pure Γ-sum.
        let gamma_sum = u_cost(&jobs, 100.0, s);
        assert!(gamma_sum < full);
        // Identity cost = u_cost + Σ_{small} w p / (2 s) for a mixed U.
        let u = 2.0;
        let correction: f64 = jobs
            .iter()
            .filter(|j| j.size < u)
            .map(|j| j.weight * j.size / (2.0 * s))
            .sum();
        assert!((u_cost(&jobs, u, s) + correction - full).abs() < 1e-12);
    }

    #[test]
    fn pseudo_cost_examples() {
        let delta = 0.25;
        let inst = single_machine(vec![Job { id: 0, size: 1.3, weight: 1.0, release: 0.0 }], 1.0);
        let sched = TimedSchedule {
            jobs: vec![TimedJob { job: 0, machine: 0, completion: 1.3 }],
        };
        // 1.25 <= 1.3 < 1.5625 → interval 1, contribution (1+δ)² = 1.5625.
        let report = pseudo_cost(&inst, &sched, delta).unwrap();
        assert!((report.total - 1.5625).abs() < 1e-12);
        assert!((report.per_interval[&1] - 1.5625).abs() < 1e-12);

        // Completion exactly on a grid point belongs to that interval.
        let inst2 = single_machine(vec![Job { id: 0, size: 1.25, weight: 1.0, release: 0.0 }], 1.0);
        let sched2 = TimedSchedule {
            jobs: vec![TimedJob { job: 0, machine: 0, completion: 1.25 }],
        };
        let report2 = pseudo_cost(&inst2, &sched2, delta).unwrap();
        assert!((report2.total - 1.5625).abs() < 1e-12);
    }

    #[test]
    fn timeliness_boundary() {
        let delta = 0.125;
        let inst = single_machine(vec![Job { id: 0, size: 1.0, weight: 1.0, release: 0.0 }], 1.0);
        let at_boundary = TimedSchedule {
            jobs: vec![TimedJob { job: 0, machine: 0, completion: 1.0 + delta }],
        };
        assert!(is_timely(&inst, &at_boundary, delta).is_ok());
        let at_zero = TimedSchedule {
            jobs: vec![TimedJob { job: 0, machine: 0, completion: 1.0 }],
        };
        assert_eq!(is_timely(&inst, &at_zero, delta), Err((0, 0.0)));
    }

    proptest! {
        /// Pseudo-cost brackets the true cost: cost <= pseudo <= (1+δ) cost.
        #[test]
        fn pseudo_cost_brackets_cost(
            sizes in proptest::collection::vec(0.1f64..10.0, 1..6),
            weights in proptest::collection::vec(0.1f64..10.0, 6),
            inv in 4u32..40,
        ) {
            let delta = 1.0 / inv as f64;
            let jobs: Vec<Job> = sizes
                .iter()
                .zip(&weights)
                .enumerate()
                .map(|(i, (&p, &w))| Job { id: i, size: p, weight: w, release: 0.0 })
                .collect();
            let inst = single_machine(jobs, 1.0);
            let order: Vec<usize> = inst.jobs.iter().map(|j| j.id).collect();
            let sched = OrderedSchedule { machines: vec![order] };
            let timed = timed_from_ordered(&inst, &sched);
            let c = cost_timed(&inst, &timed).unwrap().total;
            let pc = pseudo_cost(&inst, &timed, delta).unwrap().total;
            prop_assert!(c <= pc * (1.0 + 1e-9));
            prop_assert!(pc <= (1.0 + delta) * c * (1.0 + 1e-9));
        }

        /// block_gamma equals the per-job Γ-sum for random equal-density blocks.
        #[test]
        fn block_gamma_matches_per_job_sum(
            sizes in proptest::collection::vec(0.1f64..5.0, 1..6),
            density in 0.1f64..5.0,
            start in 0.0f64..10.0,
            speed in 0.5f64..4.0,
        ) {
            let mut t = start;
            let mut direct = 0.0;
            for (i, &p) in sizes.iter().enumerate() {
                let j = Job { id: i, size: p, weight: density * p, release: 0.0 };
                t += p / speed;
                direct += gamma_value(&j, t, speed).unwrap();
            }
            let phi: f64 = sizes.iter().sum();
            let formula = block_gamma(phi, density, start, speed);
            prop_assert!((direct - formula).abs() <= 1e-9 * formula.abs().max(1.0));
        }

        /// cost = u_cost + Σ_{small} w p/(2s) for arbitrary thresholds.
        #[test]
        fn u_cost_identity(
            sizes in proptest::collection::vec(0.1f64..10.0, 1..6),
            weights in proptest::collection::vec(0.1f64..10.0, 6),
            u in 0.05f64..12.0,
            speed in 0.5f64..4.0,
        ) {
            let jobs: Vec<Job> = sizes
                .iter()
                .zip(&weights)
                .enumerate()
                .map(|(i, (&p, &w))| Job { id: i, size: p, weight: w, release: 0.0 })
                .collect();
            let mut t = 0.0;
            let full: f64 = jobs.iter().map(|j| { t += j.size / speed; j.weight * t }).sum();
            let correction: f64 = jobs
                .iter()
                .filter(|j| j.size < u)
                .map(|j| j.weight * j.size / (2.0 * speed))
                .sum();
            let lhs = u_cost(&jobs, u, speed) + correction;
            prop_assert!((lhs - full).abs() <= 1e-9 * full.max(1.0));
        }
    }
}
