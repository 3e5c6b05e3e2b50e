//! Exact reference solvers used as ground truth at desk scale.
//!
//! Every approximation claim in this toolkit is measured against these
//! oracles, so they are deliberately simple: exhaustive enumeration with
//! cheap admissible pruning, deterministic tie-breaking (lexicographic
//! assignment order, first optimum kept), and hard input-size limits that
//! refuse oversized instances instead of silently truncating.

use crate::cost::{gamma_lower_bound, pseudo_cost_total};
use crate::error::{Error, Result};
use crate::instance::{Instance, Job};
use crate::schedule::{
    natural_order, timed_from_ordered_release, OrderedSchedule, TimedSchedule,
};
use itertools::Itertools;
use serde::{Deserialize, Serialize};

/// Objective selector for the release-date oracle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Objective {
    /// True weighted completion time.
    Cost,
    /// Interval-rounded pseudo-cost for the given `delta`.
    PseudoCost { delta: f64 },
}

/// Enumeration limits; the solvers refuse larger inputs.
#[derive(Clone, Copy, Debug)]
pub struct OracleLimits {
    /// Maximum number of jobs.
    pub max_jobs: usize,
    /// Maximum number of machines.
    pub max_machines: usize,
}

impl Default for OracleLimits {
    fn default() -> Self {
        OracleLimits {
            max_jobs: 8,
            max_machines: 3,
        }
    }
}

impl OracleLimits {
    /// Default limits for the release-date oracle (one job fewer: the search
    /// space there includes per-machine permutations).
    pub fn release_default() -> Self {
        OracleLimits {
            max_jobs: 7,
            max_machines: 3,
        }
    }

    fn check(&self, instance: &Instance) -> Result<()> {
        if instance.n() > self.max_jobs || instance.m() > self.max_machines {
            return Err(Error::OracleLimit(format!(
                "instance has {} jobs / {} machines, limits are {} / {}",
                instance.n(),
                instance.m(),
                self.max_jobs,
                self.max_machines
            )));
        }
        Ok(())
    }
}

/// Optimal single-machine schedule without release dates: the natural order
/// (non-increasing density) is optimal, so no search is needed.
pub fn smith_single_machine(jobs: &[Job], speed: f64) -> Result<(OrderedSchedule, f64)> {
    if jobs.iter().any(|j| j.release > 0.0) {
        return Err(Error::InvalidInstance(
            "smith_single_machine does not support release dates".into(),
        ));
    }
    let order = natural_order(jobs);
    let mut t = 0.0;
    let mut cost = 0.0;
    for &id in &order {
        let j = jobs.iter().find(|j| j.id == id).unwrap();
        t += j.size / speed;
        cost += j.weight * t;
    }
    Ok((
        OrderedSchedule {
            machines: vec![order],
        },
        cost,
    ))
}

/// Exact optimum without release dates: enumerates machine assignments in
/// lexicographic order (jobs pre-sorted into the natural order so each
/// machine's sequence is automatically optimal for its set) and prunes with
/// the closed-form Γ lower bound.  Returns the first optimum found.
pub fn opt_no_release(instance: &Instance, limits: &OracleLimits) -> Result<(OrderedSchedule, f64)> {
    opt_no_release_inner(instance, limits, true)
}

/// Pruning-disabled twin of [`opt_no_release`], used to validate the bound.
pub fn opt_no_release_unpruned(
    instance: &Instance,
    limits: &OracleLimits,
) -> Result<(OrderedSchedule, f64)> {
    opt_no_release_inner(instance, limits, false)
}

fn opt_no_release_inner(
    instance: &Instance,
    limits: &OracleLimits,
    prune: bool,
) -> Result<(OrderedSchedule, f64)> {
    limits.check(instance)?;
    if instance.has_release_dates && instance.jobs.iter().any(|j| j.release > 0.0) {
        return Err(Error::InvalidInstance(
            "opt_no_release called on an instance with release dates".into(),
        ));
    }
    let order = natural_order(&instance.jobs);
    let jobs: Vec<&Job> = order.iter().map(|&id| instance.job(id)).collect();
    let m = instance.m();
    let speeds: Vec<f64> = instance.machines.iter().map(|mc| mc.speed).collect();
    let total_speed: f64 = speeds.iter().sum();
    let max_speed = speeds.iter().cloned().fold(0.0, f64::max);

    // Suffix data for the pruning bound: total size, min density, and the
    // Σ w p / (2 s_max) start-independent part, over jobs[k..].
    let n = jobs.len();
    let mut suffix_size = vec![0.0; n + 1];
    let mut suffix_min_density = vec![f64::INFINITY; n + 1];
    let mut suffix_half = vec![0.0; n + 1];
    for k in (0..n).rev() {
        suffix_size[k] = suffix_size[k + 1] + jobs[k].size;
        suffix_min_density[k] = suffix_min_density[k + 1].min(jobs[k].density());
        suffix_half[k] = suffix_half[k + 1] + jobs[k].weight * jobs[k].size / (2.0 * max_speed);
    }

    struct Search<'a> {
        jobs: &'a [&'a Job],
        speeds: &'a [f64],
        total_speed: f64,
        suffix_size: &'a [f64],
        suffix_min_density: &'a [f64],
        suffix_half: &'a [f64],
        prune: bool,
        best_cost: f64,
        best_assign: Vec<usize>,
        assign: Vec<usize>,
        loads: Vec<f64>,
    }

    impl Search<'_> {
        fn go(&mut self, k: usize, cost: f64) {
            if k == self.jobs.len() {
                if cost < self.best_cost {
                    self.best_cost = cost;
                    self.best_assign = self.assign.clone();
                }
                return;
            }
            if self.prune && self.suffix_size[k] > 0.0 {
                // Remaining jobs contribute at least their Γ lower bound
                // (machines pooled at total speed) plus the half-size terms.
                let phi = self.suffix_size[k];
                let bound = self.suffix_min_density[k] * phi * phi / (2.0 * self.total_speed)
                    + self.suffix_half[k];
                if cost + bound >= self.best_cost {
                    return;
                }
            }
            for mi in 0..self.speeds.len() {
                let p = self.jobs[k].size / self.speeds[mi];
                let completion = self.loads[mi] + p;
                let add = self.jobs[k].weight * completion;
                self.assign[k] = mi;
                self.loads[mi] = completion;
                self.go(k + 1, cost + add);
                self.loads[mi] = completion - p;
            }
        }
    }

    let mut search = Search {
        jobs: &jobs,
        speeds: &speeds,
        total_speed,
        suffix_size: &suffix_size,
        suffix_min_density: &suffix_min_density,
        suffix_half: &suffix_half,
        prune,
        best_cost: f64::INFINITY,
        best_assign: vec![0; n],
        assign: vec![0; n],
        loads: vec![0.0; m],
    };
    search.go(0, 0.0);

    let mut machines = vec![Vec::new(); m];
    for (k, &mi) in search.best_assign.iter().enumerate() {
        machines[mi].push(jobs[k].id);
    }
    Ok((OrderedSchedule { machines }, search.best_cost))
}

/// Exact optimum with release dates: enumerates every machine assignment and
/// every per-machine permutation; for a fixed sequence, starting each job at
/// `max(release, previous completion)` is optimal, so start times are not
/// searched.  With `timely = Some(delta)` the search is restricted to timely
/// schedules (each start additionally at least `delta * p / s`).
pub fn opt_release(
    instance: &Instance,
    limits: &OracleLimits,
    objective: Objective,
    timely: Option<f64>,
) -> Result<(TimedSchedule, f64)> {
    limits.check(instance)?;
    let m = instance.m();
    let ids: Vec<usize> = instance.jobs.iter().map(|j| j.id).collect();
    let n = ids.len();
    let mut best: Option<(TimedSchedule, f64)> = None;

    // Assignment vectors in lexicographic order.
    let mut assign = vec![0usize; n];
    loop {
        // Group jobs per machine under this assignment.
        let mut groups: Vec<Vec<usize>> = vec![Vec::new(); m];
        for (k, &mi) in assign.iter().enumerate() {
            groups[mi].push(ids[k]);
        }
        // Enumerate permutations machine by machine (cartesian product).
        let perms_per_machine: Vec<Vec<Vec<usize>>> = groups
            .iter()
            .map(|g| {
                if g.is_empty() {
                    vec![Vec::new()]
                } else {
                    g.iter().copied().permutations(g.len()).collect()
                }
            })
            .collect();
        for combo in perms_per_machine
            .iter()
            .map(|ps| ps.iter())
            .multi_cartesian_product()
        {
            let ordered = OrderedSchedule {
                machines: combo.into_iter().cloned().collect(),
            };
            let timed = timed_from_ordered_release(instance, &ordered, timely);
            let value = match objective {
                Objective::Cost => timed
                    .jobs
                    .iter()
                    .map(|t| instance.job(t.job).weight * t.completion)
                    .sum(),
                Objective::PseudoCost { delta } => pseudo_cost_total(instance, &timed, delta)?,
            };
            if best.as_ref().map_or(true, |(_, b)| value < *b) {
                best = Some((timed, value));
            }
        }
        // Advance the assignment vector.
        let mut k = n;
        loop {
            if k == 0 {
                return Ok(best.expect("at least one assignment exists"));
            }
            k -= 1;
            if assign[k] + 1 < m {
                assign[k] += 1;
                assign[k + 1..].fill(0);
                break;
            }
        }
    }
}

/// Convenience: the Γ lower bound of a job set on one machine, re-exported at
/// oracle level for pruning audits.
pub fn machine_gamma_bound(jobs: &[&Job], speed: f64) -> f64 {
    gamma_lower_bound(jobs, speed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::Machine;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_inst(seed: u64, n: usize, m: usize, releases: bool) -> Instance {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let jobs = (0..n)
            .map(|i| Job {
                id: i,
                size: rng.gen_range(0.2..5.0),
                weight: rng.gen_range(0.2..5.0),
                release: if releases { rng.gen_range(0.0..6.0) } else { 0.0 },
            })
            .collect();
        let machines = (0..m)
            .map(|i| Machine {
                id: i,
                speed: rng.gen_range(0.5..3.0),
            })
            .collect();
        Instance::new(jobs, machines, releases).unwrap()
    }

    #[test]
    fn smith_matches_spec_pair() {
        let jobs = vec![
            Job { id: 0, size: 2.0, weight: 1.0, release: 0.0 },
            Job { id: 1, size: 1.0, weight: 2.0, release: 0.0 },
        ];
        let (_, cost) = smith_single_machine(&jobs, 1.0).unwrap();
        assert!((cost - 5.0).abs() < 1e-12);
    }

    #[test]
    fn smith_rejects_release_dates() {
        let jobs = vec![Job { id: 0, size: 1.0, weight: 1.0, release: 2.0 }];
        assert!(smith_single_machine(&jobs, 1.0).is_err());
    }

    #[test]
    fn one_machine_opt_equals_smith() {
        for seed in 0..20 {
            let inst = rand_inst(seed, 5, 1, false);
            let (_, smith) = smith_single_machine(&inst.jobs, inst.machines[0].speed).unwrap();
            let (_, opt) = opt_no_release(&inst, &OracleLimits::default()).unwrap();
            assert!((smith - opt).abs() < 1e-9, "seed {seed}");
        }
    }

    #[test]
    fn pruning_does_not_change_the_optimum() {
        for seed in 0..25 {
            let inst = rand_inst(seed, 6, 3, false);
            let (_, pruned) = opt_no_release(&inst, &OracleLimits::default()).unwrap();
            let (_, raw) = opt_no_release_unpruned(&inst, &OracleLimits::default()).unwrap();
            assert!((pruned - raw).abs() < 1e-9, "seed {seed}");
        }
    }

    #[test]
    fn identical_jobs_balance_across_identical_machines() {
        // 4 unit jobs on 2 unit machines: optimal split is 2+2,
        // cost = 2*(1+2) per machine = 6.
        let jobs = (0..4)
            .map(|i| Job { id: i, size: 1.0, weight: 1.0, release: 0.0 })
            .collect();
        let machines = (0..2).map(|i| Machine { id: i, speed: 1.0 }).collect();
        let inst = Instance::new(jobs, machines, false).unwrap();
        let (_, opt) = opt_no_release(&inst, &OracleLimits::default()).unwrap();
        assert!((opt - 6.0).abs() < 1e-9);
    }

    #[test]
    fn limits_are_enforced() {
        let inst = rand_inst(1, 9, 2, false);
        assert!(matches!(
            opt_no_release(&inst, &OracleLimits::default()),
            Err(Error::OracleLimit(_))
        ));
    }

    #[test]
    fn release_oracle_with_zero_releases_matches_no_release() {
        for seed in 0..10 {
            let mut inst = rand_inst(seed, 4, 2, false);
            inst.has_release_dates = true;
            let (_, a) = opt_no_release(&inst, &OracleLimits::default()).unwrap();
            let (_, b) = opt_release(
                &inst,
                &OracleLimits::release_default(),
                Objective::Cost,
                None,
            )
            .unwrap();
            assert!((a - b).abs() < 1e-9, "seed {seed}: {a} vs {b}");
        }
    }

    #[test]
    fn far_apart_releases_start_at_release() {
        // One machine, releases far beyond any processing: each job starts at
        // its own release, cost = Σ w (ρ + p).
        let jobs = vec![
            Job { id: 0, size: 1.0, weight: 2.0, release: 0.0 },
            Job { id: 1, size: 1.0, weight: 1.0, release: 100.0 },
            Job { id: 2, size: 1.0, weight: 3.0, release: 200.0 },
        ];
        let expected: f64 = jobs.iter().map(|j| j.weight * (j.release + j.size)).sum();
        let inst = Instance::new(jobs, vec![Machine { id: 0, speed: 1.0 }], true).unwrap();
        let (_, v) = opt_release(
            &inst,
            &OracleLimits::release_default(),
            Objective::Cost,
            None,
        )
        .unwrap();
        assert!((v - expected).abs() < 1e-9);
    }

    #[test]
    fn pseudo_objective_brackets_cost_objective() {
        let delta = 0.125;
        for seed in 0..8 {
            let inst = rand_inst(seed, 4, 2, true);
            let limits = OracleLimits::release_default();
            let (_, c) = opt_release(&inst, &limits, Objective::Cost, None).unwrap();
            let (_, pc) =
                opt_release(&inst, &limits, Objective::PseudoCost { delta }, None).unwrap();
            assert!(c <= pc + 1e-9, "seed {seed}");
            assert!(pc <= (1.0 + delta) * c + 1e-9, "seed {seed}");
        }
    }

    #[test]
    fn determinism() {
        let inst = rand_inst(7, 5, 2, true);
        let limits = OracleLimits::release_default();
        let (s1, v1) = opt_release(&inst, &limits, Objective::Cost, None).unwrap();
        let (s2, v2) = opt_release(&inst, &limits, Objective::Cost, None).unwrap();
        assert_eq!(v1, v2);
        assert_eq!(s1, s2);
    }

    #[test]
    fn rng_gen_range_sanity() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x: f64 = rng.gen_range(0.2..5.0);
        assert!((0.2..5.0).contains(&x));
    }
}
