//! Acceptance checks for the whole toolkit: one test per criterion, each
//! a self-contained audit of a pipeline stage at desk scale, with the
//! stated numeric tolerance and a wall-clock budget asserted at the end.

use std::collections::BTreeMap;
use std::time::Instant;

use itertools::Itertools;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use relsched_core::bands::{eptas_no_release, pi_lower_bound, NRParams};
use relsched_core::cost::{
    self, block_gamma, cost_ordered, gamma_lower_bound, gamma_value, is_timely,
    pseudo_cost_total,
};
use relsched_core::geo::{self, GeoValue};
use relsched_core::oracle::{self, Objective, OracleLimits};
use relsched_core::release::{
    combine_density_bands, enumerate_palettes, eptas_release, idle_insertion,
    release_shift, solve_pi_release, Palette, ReleaseParams,
};
use relsched_core::rounding::{
    density_shift, divisions, effective_zetas, round_no_release, round_release,
};
use relsched_core::timeline::{
    backward_gap_witness, check_list, job_shift, list_from_schedule, organize_fixture,
    schedule_from_list, time_stretch, IntervalEvents, IntervalList, StretchedJob,
};
use relsched_core::{
    Error, Instance, Job, Machine, OrderedSchedule, ParamPack, TimedJob, TimedSchedule,
};

fn limits() -> OracleLimits {
    OracleLimits {
        max_jobs: 8,
        max_machines: 3,
    }
}

/// A random instance with floating sizes/weights and speed-sorted machines.
fn random_instance(seed: u64, max_n: usize, max_m: usize, with_release: bool) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = rng.gen_range(1..=max_m);
    let mut speeds: Vec<f64> = (0..m).map(|_| rng.gen_range(0.5..2.0)).collect();
    speeds.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let machines = speeds
        .into_iter()
        .enumerate()
        .map(|(id, speed)| Machine { id, speed })
        .collect();
    let n = rng.gen_range(1..=max_n);
    let jobs = (0..n)
        .map(|id| Job {
            id,
            size: rng.gen_range(0.3..4.0),
            weight: rng.gen_range(0.2..3.0),
            release: if with_release {
                rng.gen_range(0.0..4.0)
            } else {
                0.0
            },
        })
        .collect();
    Instance::new(jobs, machines, with_release).unwrap()
}

/// A random timely schedule on a random grid instance (sizes, weights,
/// speeds and releases all powers of `1 + delta`).
fn random_timely(seed: u64, d: f64, with_release: bool) -> (Instance, TimedSchedule) {
    let grid = |e: i64| geo::pow1p(d, e);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = rng.gen_range(1..=3usize);
    let mut exps: Vec<i64> = (0..m).map(|_| rng.gen_range(-2..=2)).collect();
    exps.sort_by(|a, b| b.cmp(a));
    let machines = exps
        .into_iter()
        .enumerate()
        .map(|(id, e)| Machine { id, speed: grid(e) })
        .collect();
    let n = rng.gen_range(1..=8usize);
    let jobs = (0..n)
        .map(|id| Job {
            id,
            size: grid(rng.gen_range(-3..=5)),
            weight: grid(rng.gen_range(-2..=3)),
            release: if with_release {
                grid(rng.gen_range(0..=4))
            } else {
                0.0
            },
        })
        .collect();
    let inst = Instance::new(jobs, machines, with_release).unwrap();
    let mut cursor = vec![0.0_f64; inst.m()];
    let mut timed = Vec::new();
    for job in &inst.jobs {
        let ell = rng.gen_range(0..inst.m());
        let s = inst.machines[ell].speed;
        let mut start = cursor[ell].max(job.release).max(d * job.size / s);
        if rng.gen_bool(0.4) {
            start *= 1.0 + rng.gen_range(0.05..0.8);
        }
        let completion = start + job.size / s;
        cursor[ell] = completion;
        timed.push(TimedJob {
            job: job.id,
            machine: ell,
            completion,
        });
    }
    let schedule = TimedSchedule { jobs: timed };
    schedule.validate(&inst).unwrap();
    assert!(is_timely(&inst, &schedule, d).is_ok());
    (inst, schedule)
}

// Criterion 1: the single-machine order oracle matches exhaustive
// permutation search on 200 seeded instances with up to 7 jobs.
#[test]
fn criterion_01_single_machine_oracle_matches_exhaustive_search() {
    let clock = Instant::now();
    for seed in 0..200u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let speed = rng.gen_range(0.5..2.0);
        let n = rng.gen_range(1..=7usize);
        let jobs: Vec<Job> = (0..n)
            .map(|id| Job {
                id,
                size: rng.gen_range(0.2..4.0),
                weight: rng.gen_range(0.2..3.0),
                release: 0.0,
            })
            .collect();
        let inst = Instance::new(
            jobs.clone(),
            vec![Machine { id: 0, speed }],
            false,
        )
        .unwrap();
        let (sched, cost) = oracle::smith_single_machine(&jobs, speed).unwrap();
        sched.validate(&inst).unwrap();
        let best = (0..n)
            .permutations(n)
            .map(|perm| {
                let s = OrderedSchedule {
                    machines: vec![perm],
                };
                cost_ordered(&inst, &s).unwrap().total
            })
            .fold(f64::INFINITY, f64::min);
        assert!(
            (cost - best).abs() <= 1e-9 * best.max(1.0),
            "seed {seed}: oracle {cost} vs exhaustive {best}"
        );
    }
    assert!(clock.elapsed().as_secs_f64() < 10.0, "over the 10 s budget");
}

// Criterion 2: geometric rounding sandwiches the cost of every schedule:
// SOL(A) <= SOL(A') <= (1+delta)^3 SOL(A), on 100 instances x 5 random
// schedules for delta in {1/8, 1/16}.
#[test]
fn criterion_02_rounding_sandwiches_every_schedule_cost() {
    let clock = Instant::now();
    for inv in [8u64, 16u64] {
        let pack = ParamPack::practical_with_inv_delta(0.5, inv).unwrap();
        let d = pack.delta;
        for seed in 0..100u64 {
            let inst = random_instance(10_000 + seed, 6, 2, false);
            let rounded = round_no_release(&inst, &pack).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(20_000 + seed);
            for _ in 0..5 {
                let mut machines = vec![Vec::new(); inst.m()];
                for job in &inst.jobs {
                    machines[rng.gen_range(0..inst.m())].push(job.id);
                }
                for list in &mut machines {
                    list.shuffle(&mut rng);
                }
                let sched = OrderedSchedule { machines };
                let a = cost_ordered(&inst, &sched).unwrap().total;
                let b = cost_ordered(&rounded, &sched).unwrap().total;
                assert!(a <= b * (1.0 + 1e-9), "seed {seed}: {a} > {b}");
                assert!(
                    b <= (1.0 + d).powi(3) * a * (1.0 + 1e-9),
                    "seed {seed}: {b} above (1+d)^3 * {a}"
                );
            }
        }
    }
    assert!(clock.elapsed().as_secs_f64() < 5.0, "over the 5 s budget");
}

// Criterion 3: the per-machine lower bound never exceeds the realized
// value of any placement of up to 6 jobs, and the block formula agrees
// with the per-job sum on 10^4 random equal-density blocks, all at 1e-9.
#[test]
fn criterion_03_gamma_bound_and_block_formula() {
    let clock = Instant::now();
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let speed = rng.gen_range(0.5..2.0);
        let n = rng.gen_range(1..=6usize);
        let jobs: Vec<Job> = (0..n)
            .map(|id| Job {
                id,
                size: rng.gen_range(0.2..3.0),
                weight: rng.gen_range(0.2..3.0),
                release: 0.0,
            })
            .collect();
        let refs: Vec<&Job> = jobs.iter().collect();
        let bound = gamma_lower_bound(&refs, speed);
        for perm in (0..n).permutations(n) {
            let mut t = 0.0;
            let mut total = 0.0;
            for &k in &perm {
                t += jobs[k].size / speed;
                total += gamma_value(&jobs[k], t, speed).unwrap();
            }
            assert!(
                bound <= total + 1e-9 * total.max(1.0),
                "seed {seed}: bound {bound} above placement value {total}"
            );
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(999);
    for case in 0..10_000u32 {
        let speed = rng.gen_range(0.5..2.0);
        let density = rng.gen_range(0.2..4.0);
        let start = rng.gen_range(0.0..5.0);
        let pieces = rng.gen_range(1..=6usize);
        let sizes: Vec<f64> = (0..pieces).map(|_| rng.gen_range(0.1..2.0)).collect();
        let total_size: f64 = sizes.iter().sum();
        let mut t = start;
        let mut summed = 0.0;
        for &p in &sizes {
            let job = Job {
                id: 0,
                size: p,
                weight: density * p,
                release: 0.0,
            };
            t += p / speed;
            summed += gamma_value(&job, t, speed).unwrap();
        }
        let block = block_gamma(total_size, density, start, speed);
        assert!(
            (block - summed).abs() <= 1e-9 * summed.max(1.0),
            "case {case}: block {block} vs per-job sum {summed}"
        );
    }
    assert!(clock.elapsed().as_secs_f64() < 10.0, "over the 10 s budget");
}

// Criterion 4: density shifting never cheapens the optimum, and the best
// offset stays within 1 + 2 delta of it, on 100 seeded instances.
#[test]
fn criterion_04_density_shift_brackets_the_optimum() {
    let clock = Instant::now();
    let pack = ParamPack::practical(0.5).unwrap();
    let d = pack.delta;
    let limits = limits();
    for seed in 0..100u64 {
        let inst = random_instance(30_000 + seed, 5, 2, false);
        let rounded = round_no_release(&inst, &pack).unwrap();
        let (_, opt) = oracle::opt_no_release(&rounded, &limits).unwrap();
        let zetas = effective_zetas(&rounded, &pack).unwrap();
        assert!(!zetas.is_empty());
        let mut best = f64::INFINITY;
        for &zeta in &zetas {
            let shifted = density_shift(&rounded, zeta, &pack).unwrap();
            let (_, opt_z) = oracle::opt_no_release(&shifted, &limits).unwrap();
            assert!(
                opt <= opt_z + 1e-9 * opt.max(1.0),
                "seed {seed}, zeta {zeta}: shifted optimum {opt_z} below {opt}"
            );
            best = best.min(opt_z);
        }
        assert!(
            best <= (1.0 + 2.0 * d) * opt + 1e-9,
            "seed {seed}: best shifted optimum {best} above (1+2d) * {opt}"
        );
    }
    assert!(clock.elapsed().as_secs_f64() < 30.0, "over the 30 s budget");
}

// Criterion 5: the configuration-program relaxation is a true lower bound
// on the exact optimum, on 20 seeded instances.
#[test]
fn criterion_05_configuration_relaxation_lower_bounds_the_optimum() {
    let clock = Instant::now();
    let pack = ParamPack::practical(0.5).unwrap();
    let nr = NRParams::practical(&pack);
    let limits = limits();
    for seed in 0..20u64 {
        let inst = random_instance(40_000 + seed, 6, 2, false);
        let rounded = round_no_release(&inst, &pack).unwrap();
        let z = pi_lower_bound(&rounded, &pack, &nr).unwrap();
        let (_, opt) = oracle::opt_no_release(&rounded, &limits).unwrap();
        assert!(
            z <= opt + 1e-7,
            "seed {seed}: relaxation value {z} above optimum {opt}"
        );
    }
    assert!(clock.elapsed().as_secs_f64() < 300.0, "over the 5 min budget");
}

// Criterion 6: the end-to-end no-release pipeline stays within 1 + eps of
// the exact optimum at eps = 0.5, with a nonnegative-slack stage ledger.
#[test]
fn criterion_06_no_release_pipeline_ratio_and_ledger() {
    let clock = Instant::now();
    let eps = 0.5;
    let pack = ParamPack::practical(eps).unwrap();
    let nr = NRParams::practical(&pack);
    let limits = limits();
    for seed in 0..12u64 {
        let mut inst = random_instance(50_000 + seed, 6, 2, false);
        if inst.n() < 2 {
            inst = random_instance(51_000 + seed, 6, 2, false);
        }
        let (sched, report) = eptas_no_release(&inst, &pack, &nr).unwrap();
        sched.validate(&inst).unwrap();
        let (_, opt) = oracle::opt_no_release(&inst, &limits).unwrap();
        assert!(
            report.cost_original <= (1.0 + eps) * opt * (1.0 + 1e-9),
            "seed {seed}: ratio {} above 1 + eps",
            report.cost_original / opt
        );
        for stage in &report.stages {
            assert!(
                stage.slack() >= -1e-9,
                "seed {seed}: stage '{}' has negative slack {}",
                stage.name,
                stage.slack()
            );
        }
    }
    assert!(clock.elapsed().as_secs_f64() < 600.0, "over the 10 min budget");
}

// Criterion 7: 500 valid timely schedules pass the list conditions and
// round-trip with exactly preserved pseudo-cost; 50 hand-built violations
// are rejected with the right condition index.
#[test]
fn criterion_07_interval_list_conditions_and_round_trip() {
    let clock = Instant::now();
    let d = ParamPack::practical(0.5).unwrap().delta;
    for seed in 0..500u64 {
        let (inst, sched) = random_timely(seed, d, true);
        let list = list_from_schedule(&inst, &sched, d).unwrap();
        check_list(&inst, &list, d).unwrap();
        let rebuilt = schedule_from_list(&inst, &list, d).unwrap();
        let before = pseudo_cost_total(&inst, &sched, d).unwrap();
        let after = pseudo_cost_total(&inst, &rebuilt, d).unwrap();
        assert!(
            (after - before).abs() <= 1e-12 * before.max(1.0),
            "seed {seed}: round trip changed the pseudo-cost"
        );
    }
    // 50 violations cycling through the four conditions.
    for case in 0..50u32 {
        let condition = case % 4 + 1;
        let (inst, events) = match condition {
            1 => {
                // Start and completion on different machines.
                let inst = Instance::new(
                    vec![Job { id: 0, size: 0.01, weight: 1.0, release: 0.0 }],
                    vec![Machine { id: 0, speed: 1.0 }, Machine { id: 1, speed: 1.0 }],
                    false,
                )
                .unwrap();
                let mut events = BTreeMap::new();
                events.insert((0, 0), IntervalEvents { starts: vec![0], completions: vec![] });
                events.insert((0, 1), IntervalEvents { starts: vec![], completions: vec![0] });
                (inst, events)
            }
            2 => {
                // Two size-8 jobs confined to one interval of capacity delta.
                let inst = Instance::new(
                    vec![
                        Job { id: 0, size: 8.0, weight: 1.0, release: 0.0 },
                        Job { id: 1, size: 8.0, weight: 1.0, release: 0.0 },
                    ],
                    vec![Machine { id: 0, speed: 1.0 }],
                    false,
                )
                .unwrap();
                let mut events = BTreeMap::new();
                events.insert(
                    (0, 0),
                    IntervalEvents { starts: vec![0, 1], completions: vec![0, 1] },
                );
                (inst, events)
            }
            3 => {
                // An event strictly inside a crossing job's span.
                let inst = Instance::new(
                    vec![
                        Job { id: 0, size: 0.5, weight: 1.0, release: 0.0 },
                        Job { id: 1, size: 0.001, weight: 1.0, release: 0.0 },
                    ],
                    vec![Machine { id: 0, speed: 1.0 }],
                    false,
                )
                .unwrap();
                let mut events = BTreeMap::new();
                events.insert((0, 0), IntervalEvents { starts: vec![0], completions: vec![] });
                events.insert((2, 0), IntervalEvents { starts: vec![1], completions: vec![1] });
                events.insert((5, 0), IntervalEvents { starts: vec![], completions: vec![0] });
                (inst, events)
            }
            _ => {
                // Two boundary-crossing starts in one interval.
                let inst = Instance::new(
                    vec![
                        Job { id: 0, size: 0.1, weight: 1.0, release: 0.0 },
                        Job { id: 1, size: 0.1, weight: 1.0, release: 0.0 },
                    ],
                    vec![Machine { id: 0, speed: 1.0 }],
                    false,
                )
                .unwrap();
                let mut events = BTreeMap::new();
                events.insert((0, 0), IntervalEvents { starts: vec![0, 1], completions: vec![] });
                events.insert((3, 0), IntervalEvents { starts: vec![], completions: vec![0, 1] });
                (inst, events)
            }
        };
        let err = check_list(&inst, &IntervalList { theta: 0, events }, d).unwrap_err();
        let needle = format!("condition {condition}");
        assert!(
            err.to_string().contains(&needle),
            "case {case}: expected {needle}, got: {err}"
        );
    }
    assert!(clock.elapsed().as_secs_f64() < 10.0, "over the 10 s budget");
}

// Criterion 8: time stretching on 200 random timely schedules leaves the
// required idle time in qualifying intervals, grows the pseudo-cost by at
// most 1 + delta, and every recorded gap has a constructive backward
// witness in the original schedule.
#[test]
fn criterion_08_time_stretch_idle_cost_and_backward_gaps() {
    let clock = Instant::now();
    let pack = ParamPack::practical(0.5).unwrap();
    let d = pack.delta;
    for seed in 0..200u64 {
        let (inst, sched) = random_timely(70_000 + seed, d, false);
        let out = time_stretch(&inst, &sched, &pack).unwrap();
        let timed = out.timed();
        timed.validate(&inst).unwrap();

        let before = pseudo_cost_total(&inst, &sched, d).unwrap();
        let after = pseudo_cost_total(&inst, &timed, d).unwrap();
        assert!(
            after <= (1.0 + d) * before * (1.0 + 1e-9),
            "seed {seed}: pseudo-cost grew by more than 1 + delta"
        );

        for ell in 0..inst.m() {
            let speed = inst.machines[ell].speed;
            let mine: Vec<&StretchedJob> =
                out.jobs.iter().filter(|j| j.machine == ell).collect();
            if mine.is_empty() {
                continue;
            }
            let lo = mine
                .iter()
                .map(|j| geo::floor_log(d, j.reserved_start))
                .min()
                .unwrap();
            let hi = mine
                .iter()
                .map(|j| geo::floor_log(d, j.reserved_end))
                .max()
                .unwrap();
            for i in lo..=hi {
                let b = geo::pow1p(d, i);
                let bb = geo::pow1p(d, i + 1);
                let z = speed * d * b;
                let mut busy: Vec<(f64, f64)> = mine
                    .iter()
                    .filter(|j| j.actual_end > b && j.actual_start < bb)
                    .map(|j| (j.actual_start.max(b), j.actual_end.min(bb)))
                    .collect();
                busy.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
                let mut idle = 0.0;
                let mut t = b;
                for (s, e) in busy {
                    idle += (s - t).max(0.0);
                    t = t.max(e);
                }
                idle += (bb - t).max(0.0);
                let fully_idle = idle >= (bb - b) * (1.0 - 1e-9);
                let has_endpoint = mine.iter().any(|j| {
                    geo::floor_log(d, j.reserved_start) == i
                        || geo::floor_log(d, j.reserved_end) == i
                });
                if fully_idle || has_endpoint {
                    assert!(
                        idle * speed >= d.powi(3) * z * (1.0 - 1e-9),
                        "seed {seed}: interval ({i}, {ell}) idle {idle} below delta^3 bound"
                    );
                }
            }
        }

        for (&(i, ell), segments) in &out.gaps {
            if segments.is_empty() {
                continue;
            }
            assert!(
                backward_gap_witness(&inst, &sched, ell, i, d).is_some(),
                "seed {seed}: no backward witness for gap in interval ({i}, {ell})"
            );
        }
    }
    assert!(clock.elapsed().as_secs_f64() < 30.0, "over the 30 s budget");
}

// Criterion 9: pseudo-sizes across exponents -30..=30 stay within one grid
// step of the size, divisions stay in range, pseudo-sizes in one division
// form a divisible chain, and the worked size-exponent-1 case comes out as
// division 1, subdivision 0.
#[test]
fn criterion_09_divisions_and_pseudo_sizes() {
    let clock = Instant::now();
    for inv in [8u64, 36u64] {
        let pack = ParamPack::practical_with_inv_delta(0.5, inv).unwrap();
        let d = pack.delta;
        let mut by_division: BTreeMap<i64, Vec<f64>> = BTreeMap::new();
        for i in -30..=30i64 {
            let info = divisions(GeoValue::new(i), &pack);
            assert_eq!(info.exponent, i);
            let p = geo::pow1p(d, i);
            let pi = info.pseudo_size(d);
            assert!(
                pi >= p * (1.0 - 1e-9) && pi < (1.0 + d) * p * (1.0 + 1e-9),
                "inv {inv}, exponent {i}: pseudo-size {pi} outside [p, (1+d)p)"
            );
            assert!(
                info.division >= 1 && info.division <= info.delta_cap,
                "inv {inv}, exponent {i}: division {} outside [1, {}]",
                info.division,
                info.delta_cap
            );
            by_division.entry(info.division).or_default().push(pi);
        }
        for (division, mut sizes) in by_division {
            sizes.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for w in sizes.windows(2) {
                let ratio = w[1] / w[0];
                let log2 = ratio.log2();
                assert!(
                    (log2 - log2.round()).abs() <= 1e-9,
                    "inv {inv}, division {division}: ratio {ratio} is not a power of two"
                );
            }
        }
        let worked = divisions(GeoValue::new(1), &pack);
        assert_eq!(worked.division, 1);
        assert_eq!(worked.subdivision, 0);
        assert!((worked.pseudo_size(d) - (1.0 + d)).abs() <= 1e-12);
    }
    assert!(clock.elapsed().as_secs_f64() < 1.0, "over the 1 s budget");
}

// Criterion 10: job shifting keeps every selection within its ledger
// bound, only raises release dates, is idempotent, and the organized
// fixtures it feeds remain feasible with no job starting before release.
#[test]
fn criterion_10_job_shift_ledger_idempotence_and_fixtures() {
    let clock = Instant::now();
    let pack = ParamPack::practical(0.5).unwrap();
    let d = pack.delta;
    let mut organized = 0usize;
    for seed in 0..30u64 {
        let (inst, _) = random_timely(80_000 + seed, d, true);
        let (shifted, ledger) = job_shift(&inst, &pack).unwrap();
        for (key, &selected) in &ledger.selected {
            let bound = ledger.bounds[key];
            assert!(
                selected <= bound + 1e-9,
                "seed {seed}: selection {selected} above bound {bound} at {key:?}"
            );
        }
        for (a, b) in shifted.jobs.iter().zip(inst.jobs.iter()) {
            assert!(
                a.release >= b.release - geo::GEO_TOL,
                "seed {seed}: job {} release decreased",
                a.id
            );
        }
        let (twice, _) = job_shift(&shifted, &pack).unwrap();
        for (a, b) in twice.jobs.iter().zip(shifted.jobs.iter()) {
            assert!(
                (a.release - b.release).abs() <= geo::GEO_TOL * b.release.max(1.0),
                "seed {seed}: job {} moved again on the second pass",
                a.id
            );
        }
        if let Ok(sched) = organize_fixture(&shifted, &pack) {
            organized += 1;
            sched.validate(&shifted).unwrap();
            let violations = shifted
                .jobs
                .iter()
                .filter(|job| {
                    sched.start(&shifted, job.id) < job.release - geo::GEO_TOL
                })
                .count();
            assert_eq!(violations, 0, "seed {seed}: start-before-release violations");
        }
    }
    assert!(organized >= 20, "only {organized}/30 fixtures organized");
    assert!(clock.elapsed().as_secs_f64() < 30.0, "over the 30 s budget");
}

// Criterion 11: inserting idle time keeps every shift offset feasible, the
// ledger's summed cost stays below (k_count + (1+delta) alpha) OPT, and
// the best offset is within 1 + 2 delta of OPT, on 20 oracle-solvable
// instances with the runnable alpha.
#[test]
fn criterion_11_release_shift_and_idle_insertion_bounds() {
    let clock = Instant::now();
    let pack = ParamPack::practical_with_inv_delta(0.5, 2).unwrap();
    let d = pack.delta;
    let grid = |e: i64| geo::pow1p(d, e);
    let limits = OracleLimits::release_default();
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(90_000 + seed);
        let m = rng.gen_range(1..=2usize);
        let mut exps: Vec<i64> = (0..m).map(|_| rng.gen_range(-1..=1)).collect();
        exps.sort_by(|a, b| b.cmp(a));
        let machines = exps
            .into_iter()
            .enumerate()
            .map(|(id, e)| Machine { id, speed: grid(e) })
            .collect();
        let n = rng.gen_range(2..=4usize);
        let jobs = (0..n)
            .map(|id| Job {
                id,
                size: grid(rng.gen_range(-2..=3)),
                weight: grid(rng.gen_range(-2..=3)),
                release: grid(rng.gen_range(0..=4)),
            })
            .collect();
        let inst = Instance::new(jobs, machines, true).unwrap();
        let params = ReleaseParams::practical(&pack, &inst).unwrap();
        let (opt_sched, opt_cost) =
            oracle::opt_release(&inst, &limits, Objective::Cost, None).unwrap();
        let mut total = 0.0;
        let mut best = f64::INFINITY;
        for k in 0..params.k_count {
            let (ak, _) = release_shift(&inst, k, &params).unwrap();
            let sol = idle_insertion(&inst, &opt_sched, k, &params);
            sol.validate(&ak).unwrap();
            let c = cost::cost_timed(&ak, &sol).unwrap().total;
            assert!(c >= opt_cost - 1e-9, "seed {seed}, offset {k}: cost dropped");
            total += c;
            best = best.min(c);
        }
        let sum_cap = (params.k_count as f64 + (1.0 + d) * params.alpha) * opt_cost;
        assert!(
            total <= sum_cap + 1e-6 * sum_cap.max(1.0),
            "seed {seed}: summed cost {total} above {sum_cap}"
        );
        assert!(
            best <= (1.0 + 2.0 * d) * opt_cost + 1e-9,
            "seed {seed}: best offset cost {best} above (1+2d) * {opt_cost}"
        );
    }
    assert!(clock.elapsed().as_secs_f64() < 300.0, "over the 5 min budget");
}

// Criterion 12: combining per-band schedules respects all four audited
// capacities — sparse-gap load, postpone-gap load, charged size, and the
// per-machine 1 + delta cost ratio — on constructed multi-band fixtures.
#[test]
fn criterion_12_combining_respects_all_audit_caps() {
    let clock = Instant::now();
    let pack = ParamPack::practical_with_inv_delta(0.5, 2).unwrap();
    let d = pack.delta;

    // Fixture 1: a single band passes through unchanged.
    let solo = Instance::new(
        vec![Job { id: 0, size: 1.0, weight: 2.0, release: 1.0 }],
        vec![Machine { id: 0, speed: 1.0 }],
        true,
    )
    .unwrap();
    let solo_sched = TimedSchedule {
        jobs: vec![TimedJob { job: 0, machine: 0, completion: 2.0 }],
    };
    // Fixture 2: a heavy high band blocks a light low band on one machine.
    let duo = Instance::new(
        vec![
            Job { id: 0, size: 1.0, weight: 1000.0, release: 1.0 },
            Job { id: 1, size: 0.5, weight: 1.0, release: 1.0 },
        ],
        vec![Machine { id: 0, speed: 1.0 }],
        true,
    )
    .unwrap();
    // Fixture 3: the same conflict replicated on two machines.
    let pair = Instance::new(
        vec![
            Job { id: 0, size: 1.0, weight: 1000.0, release: 1.0 },
            Job { id: 1, size: 0.5, weight: 1.0, release: 1.0 },
            Job { id: 2, size: 1.0, weight: 2000.0, release: 1.0 },
            Job { id: 3, size: 0.25, weight: 1.0, release: 1.0 },
        ],
        vec![Machine { id: 0, speed: 1.0 }, Machine { id: 1, speed: 1.0 }],
        true,
    )
    .unwrap();

    let cases: Vec<(Instance, Vec<(i64, TimedSchedule)>)> = vec![
        (solo.clone(), vec![(0, solo_sched)]),
        (
            duo.clone(),
            vec![
                (
                    1,
                    TimedSchedule {
                        jobs: vec![TimedJob { job: 0, machine: 0, completion: 2.0 }],
                    },
                ),
                (
                    0,
                    TimedSchedule {
                        jobs: vec![TimedJob { job: 1, machine: 0, completion: 1.5 }],
                    },
                ),
            ],
        ),
        (
            pair.clone(),
            vec![
                (
                    1,
                    TimedSchedule {
                        jobs: vec![
                            TimedJob { job: 0, machine: 0, completion: 2.0 },
                            TimedJob { job: 2, machine: 1, completion: 2.0 },
                        ],
                    },
                ),
                (
                    0,
                    TimedSchedule {
                        jobs: vec![
                            TimedJob { job: 1, machine: 0, completion: 1.5 },
                            TimedJob { job: 3, machine: 1, completion: 1.25 },
                        ],
                    },
                ),
            ],
        ),
    ];

    let mut violations: Vec<String> = Vec::new();
    for (case, (inst, bands)) in cases.into_iter().enumerate() {
        let params = ReleaseParams::practical(&pack, &inst).unwrap();
        let (out, audit) = combine_density_bands(&inst, &bands, &params).unwrap();
        assert_eq!(out.jobs.len(), inst.n(), "case {case}: jobs lost");
        out.validate(&inst).unwrap();
        for &(u, t, load, cap) in &audit.sparse_gaps {
            if load > cap + 1e-12 {
                violations.push(format!(
                    "case {case}: sparse-gap ({u}, {t}) load {load} above {cap}"
                ));
            }
        }
        for &(u, t, load, cap) in &audit.postpone_gaps {
            if load > cap + 1e-12 {
                violations.push(format!(
                    "case {case}: postpone-gap ({u}, {t}) load {load} above {cap}"
                ));
            }
        }
        for &(u, kp, tp, mu, charged, cap) in &audit.charges {
            if charged > cap + 1e-12 {
                violations.push(format!(
                    "case {case}: charge ({u}, {kp}, {tp}, mu {mu}) size {charged} above {cap}"
                ));
            }
        }
        for &(u, combined, summed) in &audit.machine_costs {
            if combined > (1.0 + d) * summed + 1e-9 {
                violations.push(format!(
                    "case {case}: machine {u} combined cost {combined} above (1+d) * {summed}"
                ));
            }
        }
    }
    assert!(violations.is_empty(), "audit cap violations: {violations:#?}");
    assert!(clock.elapsed().as_secs_f64() < 60.0, "over the 1 min budget");
}

// Criterion 13: the end-to-end release pipeline at eps = 0.75 returns
// feasible timely schedules within 1 + eps of the timely pseudo-cost
// optimum of the rounded instance, with the palette enumeration cap
// engaging at runnable constants.
#[test]
fn criterion_13_release_pipeline_end_to_end() {
    let clock = Instant::now();
    let eps = 0.75;
    let limits = OracleLimits::release_default();
    let pack = ParamPack::practical(eps).unwrap();
    let d = pack.delta;
    let fixtures = vec![
        Instance::new(
            vec![
                Job { id: 0, size: 1.3, weight: 2.0, release: 0.7 },
                Job { id: 1, size: 0.4, weight: 1.0, release: 0.0 },
                Job { id: 2, size: 2.0, weight: 3.0, release: 1.9 },
            ],
            vec![Machine { id: 0, speed: 1.3 }, Machine { id: 1, speed: 0.7 }],
            true,
        )
        .unwrap(),
        Instance::new(
            vec![
                Job { id: 0, size: 0.9, weight: 1.0, release: 0.0 },
                Job { id: 1, size: 1.1, weight: 4.0, release: 2.5 },
            ],
            vec![Machine { id: 0, speed: 1.0 }],
            true,
        )
        .unwrap(),
        Instance::new(
            vec![
                Job { id: 0, size: 0.6, weight: 1.5, release: 0.0 },
                Job { id: 1, size: 1.8, weight: 0.5, release: 1.2 },
                Job { id: 2, size: 0.9, weight: 2.0, release: 0.3 },
                Job { id: 3, size: 0.5, weight: 1.0, release: 2.8 },
            ],
            vec![Machine { id: 0, speed: 1.5 }, Machine { id: 1, speed: 0.8 }],
            true,
        )
        .unwrap(),
        Instance::new(
            vec![
                Job { id: 0, size: 2.2, weight: 1.0, release: 0.5 },
                Job { id: 1, size: 0.7, weight: 3.0, release: 0.5 },
                Job { id: 2, size: 1.4, weight: 1.0, release: 3.1 },
                Job { id: 3, size: 0.3, weight: 0.4, release: 0.0 },
            ],
            vec![Machine { id: 0, speed: 1.0 }],
            true,
        )
        .unwrap(),
    ];

    // The palette enumeration cap engages at runnable constants.
    let rounded0 = round_release(&fixtures[0], &pack).unwrap();
    let params = ReleaseParams::practical(&pack, &rounded0).unwrap();
    assert!(matches!(
        enumerate_palettes(fixtures[0].m(), 0, &params),
        Err(Error::CapExceeded(_))
    ));

    for (case, inst) in fixtures.iter().enumerate() {
        let (sched, report) = eptas_release(inst, eps, &limits).unwrap();
        assert!(report.fallback, "case {case}: structural branch at desk scale");
        assert!(
            report.stages.iter().all(|s| s.pass),
            "case {case}: a ledger stage failed"
        );
        let rounded = round_release(inst, &pack).unwrap();
        sched.validate(&rounded).unwrap();
        assert!(
            is_timely(&rounded, &sched, d).is_ok(),
            "case {case}: output not timely"
        );
        let (_, ref_pseudo) = oracle::opt_release(
            &rounded,
            &limits,
            Objective::PseudoCost { delta: d },
            Some(d),
        )
        .unwrap();
        assert!(
            report.pseudo_cost <= (1.0 + eps) * ref_pseudo + 1e-9,
            "case {case}: pseudo-cost ratio {} above 1 + eps",
            report.pseudo_cost / ref_pseudo
        );
    }
    assert!(clock.elapsed().as_secs_f64() < 1800.0, "over the 30 min budget");
}

// Criterion 14: the release-date configuration program's optimum never
// exceeds the timely pseudo-cost optimum under a full palette on ten
// single-machine fixtures, and its rounding serves every job.
#[test]
fn criterion_14_release_program_lower_bounds_palette_consistent_schedules() {
    let clock = Instant::now();
    let pack = ParamPack::practical_with_inv_delta(0.5, 2).unwrap();
    let d = pack.delta;
    let limits = OracleLimits::release_default();
    // (size exponent, weight exponent, release exponent) on the delta = 1/2
    // grid of powers of 1.5.
    let specs: Vec<Vec<(i64, i64, i64)>> = vec![
        vec![(0, 0, 0)],
        vec![(-1, 1, 0)],
        vec![(2, 0, 0)],
        vec![(0, 2, 1)],
        vec![(1, 0, 2)],
        vec![(-1, -1, 2)],
        vec![(0, 0, 0), (-1, 1, 0)],
        vec![(0, 1, 0), (0, 0, 1)],
        vec![(-1, 0, 0), (2, 0, 2)],
        vec![(1, 1, 1), (-1, 0, 1)],
    ];
    for (case, spec) in specs.iter().enumerate() {
        let jobs: Vec<Job> = spec
            .iter()
            .enumerate()
            .map(|(id, &(se, we, re))| Job {
                id,
                size: geo::pow1p(d, se),
                weight: geo::pow1p(d, we),
                release: geo::pow1p(d, re),
            })
            .collect();
        let inst =
            Instance::new(jobs, vec![Machine { id: 0, speed: 1.0 }], true).unwrap();
        let mut params = ReleaseParams::practical(&pack, &inst).unwrap();
        params.fast_span = 1;
        if inst.n() > 1 {
            // Shrink the interval range so enumeration stays under the cap.
            params.l_value = 3.0;
        }
        let kept: Vec<usize> = (0..inst.n()).collect();
        let palette = Palette {
            colors: vec![(params.theta..=params.palette_hi).collect()],
            lo: params.theta,
            hi: params.palette_hi,
        };
        let (z_star, sched, audit) =
            solve_pi_release(&inst, &kept, &palette, 0, &params, 200_000).unwrap();
        let (_, oracle_pseudo) = oracle::opt_release(
            &inst,
            &limits,
            Objective::PseudoCost { delta: d },
            Some(d),
        )
        .unwrap();
        assert!(
            z_star <= oracle_pseudo + 1e-7,
            "case {case}: program value {z_star} above oracle pseudo-cost {oracle_pseudo}"
        );
        assert!(
            audit.overflow_jobs.is_empty(),
            "case {case}: rounding overflowed jobs {:?}",
            audit.overflow_jobs
        );
        sched.validate(&inst).unwrap();
    }
    assert!(clock.elapsed().as_secs_f64() < 300.0, "over the 5 min budget");
}

