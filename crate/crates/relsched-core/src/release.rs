//! Release-date approximation pipeline.
//!
//! The machinery here turns an instance with release dates into a family of
//! bounded sub-problems and recombines their schedules:
//!
//! * a geometric *shifting grid* `Q_{i,k} / Psi_{i,k}` that raises release
//!   dates falling into designated bands, so each sub-instance `A_{ik}` has a
//!   bounded ratio between its largest and smallest release date;
//! * *palettes* — per-machine sets of time intervals carrying a start or idle
//!   time — and the *pink machine* normalization that frees one fast machine
//!   to act as a universal receiver of small job batches;
//! * *sparse elimination*, which merges under-filled intervals so that at
//!   most one machine is sparse per interval and no slow machine is sparse;
//! * two combining passes: across density bands `A^(k)` (sparse-gaps and
//!   postpone-gaps with a charging scheme) and across release frames
//!   `A_{ik}` (overflow chunks placed into late gapped intervals);
//! * a time-indexed configuration MILP for bounded inputs, with rounding that
//!   parks fractional leftovers in the pink machine's gaps;
//! * the end-to-end driver, which at desk scale always takes the documented
//!   exact-fallback branch (the structural passes are exercised on fixtures).
//!
//! All schedule costs in this module are pseudo-costs unless stated
//! otherwise.

use crate::cost::{self, pseudo_cost_total};
use crate::error::{Error, Result};
use crate::geo;
use crate::instance::Instance;
use crate::oracle::{self, Objective, OracleLimits};
use crate::milp::{self, LinearModel, MilpBudget, MilpStatus, Sense};
use crate::params::{ParamPack, Profile};
use crate::rounding;
use crate::schedule::{TimedJob, TimedSchedule};
use crate::timeline;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

// ---------------------------------------------------------------------------
// Parameters and the shifting grid
// ---------------------------------------------------------------------------

/// Derived constants of the release-date pipeline.
///
/// The faithful values are astronomically large and exist for formula-level
/// checks only; the practical profile keeps every structural relation (which
/// gap beats which bound) at runnable magnitudes.  All fields are public so
/// fixtures can pin individual thresholds.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReleaseParams {
    /// Shared grid parameters.
    pub base: ParamPack,
    /// Density-run length bound `y_hat` (number of distinct densities of a
    /// band).  Integral-valued; practical `4`.
    pub y_hat: f64,
    /// Shifting-grid base `alpha`; practical `y_hat / delta^4`.
    pub alpha: f64,
    /// `log_{1+delta} alpha`.
    pub log_alpha: f64,
    /// Number of shift offsets `k` (`alpha/delta` as an integer).
    pub k_count: i64,
    /// Grid origin exponent `theta` (minimum release exponent).
    pub theta: i64,
    /// Maximum release exponent (so `R = (1+delta)^{r_exp}`).
    pub r_exp: i64,
    /// Horizon value `L`; practical `R * y_hat / delta^5`.
    pub l_value: f64,
    /// Small-job granularity `gamma_R`.
    pub gamma_r: f64,
    /// Per-type configuration-count bound `D` (practical: measured, capped).
    pub d_bound: usize,
    /// Slow-speed cutoff `B` as a fraction of the reference fast speed.
    pub b_cutoff: f64,
    /// Number of individually colored fastest machines (faithful
    /// `1/delta^7 + 1`); machines at 0-based index `>= fast_span` are grouped
    /// by speed.
    pub fast_span: usize,
    /// Minimum machine count for the structural pipeline (faithful
    /// `2/delta^7 + 3`); below it the exact fallback is used.
    pub min_machines: usize,
    /// Size cap multiplier of the no-large-job property: no assigned job of
    /// size above `Psi * no_large_factor * speed`.
    pub no_large_factor: f64,
    /// Completion-gap multiplier of the tight density-decay property
    /// (threshold start `Psi'/2`).
    pub prop1_gap: f64,
    /// Completion-gap multiplier of the loose density-decay property
    /// (threshold start `Psi'/4`).
    pub prop3_gap: f64,
    /// Inclusive upper interval exponent of the palette color universe.
    pub palette_hi: i64,
}

impl ReleaseParams {
    /// Practical constants measured from the (grid-rounded) instance.
    pub fn practical(pack: &ParamPack, instance: &Instance) -> Result<Self> {
        let delta = pack.delta;
        let mut theta = i64::MAX;
        let mut r_exp = i64::MIN;
        for job in &instance.jobs {
            let e = geo::exact_exponent(delta, job.release).ok_or_else(|| {
                Error::InvalidInstance(format!(
                    "release date {} of job {} is not a grid power; round the instance first",
                    job.release, job.id
                ))
            })?;
            theta = theta.min(e);
            r_exp = r_exp.max(e);
        }
        if theta == i64::MAX {
            theta = 0;
            r_exp = 0;
        }
        let inv = pack.inv_delta as f64;
        let y_hat = 4.0;
        let alpha = y_hat * inv.powi(4);
        let k_count = (alpha / delta).round() as i64;
        let r_value = geo::pow1p(delta, r_exp);
        let l_value = r_value * y_hat / delta.powi(5);
        let y = pack.y as i32;
        let log_r = (r_exp - theta).max(0) as f64;
        let gamma_r = delta.powi(4) / ((1.0 + delta).powi(y) * (pack.y as f64 + 1.0) * (log_r + 1.0));
        let d_bound = 1_000;
        let b_cutoff = delta.powi(3) / ((1.0 + delta).powi(2) * d_bound.min(1_000) as f64);
        let fast_span = saturating_inv_pow(pack.inv_delta, 7).saturating_add(1);
        let min_machines = fast_span.saturating_mul(2).saturating_add(1);
        let params = ReleaseParams {
            base: *pack,
            y_hat,
            alpha,
            log_alpha: geo::log1p_base(delta, alpha),
            k_count,
            theta,
            r_exp,
            l_value,
            gamma_r,
            d_bound,
            b_cutoff,
            fast_span,
            min_machines,
            no_large_factor: y_hat / delta.powi(5),
            prop1_gap: y_hat / delta.powi(8),
            prop3_gap: y_hat / delta.powi(7),
            palette_hi: r_exp + 2,
        };
        params.check()?;
        Ok(params)
    }

    /// Faithful constants (formula-level only; several fields overflow `f64`
    /// for realistic `delta` and are kept as approximations or infinities).
    pub fn faithful(pack: &ParamPack, instance: &Instance) -> Result<Self> {
        let mut params = Self::practical(pack, instance)?;
        let delta = pack.delta;
        params.y_hat = pack.xi as f64 / delta.powi(26);
        params.alpha = params.y_hat / delta.powi(34);
        params.log_alpha = params.alpha.ln() / (1.0 + delta).ln();
        params.k_count = i64::MAX; // alpha/delta exceeds every integer type
        let r_value = geo::pow1p(delta, params.r_exp);
        params.l_value = r_value * params.y_hat / delta.powi(25);
        params.gamma_r = delta.powi(20)
            / ((1.0 + delta).powf(pack.y_formula)
                * (pack.y_formula + 1.0)
                * ((params.r_exp - params.theta).max(0) as f64 + 1.0));
        params.b_cutoff =
            delta.powi(6) / (params.l_value * (1.0 + delta).powi(2) * params.d_bound as f64);
        params.no_large_factor = params.y_hat / delta.powi(25);
        params.prop1_gap = params.y_hat / delta.powi(28);
        params.prop3_gap = params.y_hat / delta.powi(27);
        Ok(params)
    }

    fn check(&self) -> Result<()> {
        if !(self.gamma_r > 0.0 && self.gamma_r < 1.0) {
            return Err(Error::InvalidParams(format!(
                "gamma_R must be in (0,1), got {}",
                self.gamma_r
            )));
        }
        if !(self.b_cutoff > 0.0 && self.b_cutoff < 1.0) {
            return Err(Error::InvalidParams(format!(
                "B must be in (0,1), got {}",
                self.b_cutoff
            )));
        }
        // Grid growth: consecutive grid points are at least a factor
        // alpha/(1+delta) apart, i.e. their exponents differ by at least
        // log_{1+delta}(alpha) - 1.
        let gap = self.q_exp(0, 1) - self.q_exp(0, 0);
        if (gap as f64) < self.log_alpha - 1.0 - 1e-9 {
            return Err(Error::InvalidParams(
                "shifting grid grows slower than alpha/(1+delta)".into(),
            ));
        }
        Ok(())
    }

    /// Grid exponent `Q_{i,k} = theta + ceil((k + i * k_count) * log_{1+delta}
    /// alpha)`; `Q_{-1,k} = theta` and `Q_{i,k_count}` coincides with
    /// `Q_{i+1,0}` by linearity.
    pub fn q_exp(&self, i: i64, k: i64) -> i64 {
        if i < 0 {
            return self.theta;
        }
        let units = k as f64 + i as f64 * self.k_count as f64;
        if units <= 0.0 {
            return self.theta;
        }
        self.theta + ((units * self.log_alpha) - 1e-9).ceil() as i64
    }

    /// Grid value `Psi_{i,k}` (may overflow to infinity for large indices;
    /// callers only evaluate indices bounded by the schedules at hand).
    pub fn psi(&self, i: i64, k: i64) -> f64 {
        geo::pow1p(self.base.delta, self.q_exp(i, k))
    }

    /// Measures `D` as the realized per-type configuration count and
    /// recomputes the slow-speed cutoff `B` from it.
    pub fn with_measured_d(mut self, d: usize) -> Self {
        let delta = self.base.delta;
        self.d_bound = d.max(1);
        self.b_cutoff = match self.base.profile {
            Profile::Practical => {
                delta.powi(3) / ((1.0 + delta).powi(2) * self.d_bound.min(1_000) as f64)
            }
            Profile::Faithful => {
                delta.powi(6) / (self.l_value * (1.0 + delta).powi(2) * self.d_bound as f64)
            }
        };
        self
    }
}

fn saturating_inv_pow(inv: u64, exp: u32) -> usize {
    let v = (inv as u128).saturating_pow(exp);
    if v > usize::MAX as u128 {
        usize::MAX
    } else {
        v as usize
    }
}

// ---------------------------------------------------------------------------
// Release-date shifting
// ---------------------------------------------------------------------------

/// One release frame of a shifted instance: the jobs whose (shifted) release
/// dates fall into `[Psi_{i-1,k+1}, Psi_{i,k})`.
#[derive(Clone, Debug)]
pub struct SubInstance {
    /// Frame index `i >= 0`.
    pub i: i64,
    /// Job ids of the frame, in instance order.
    pub job_ids: Vec<usize>,
}

/// Raises every release date falling into a band `[Psi_{i,k}, Psi_{i,k+1})`
/// to the band's right end and partitions the jobs into release frames.
///
/// Requires grid-power release dates (run the rounding and job-shifting
/// passes first).
pub fn release_shift(
    instance: &Instance,
    k: i64,
    params: &ReleaseParams,
) -> Result<(Instance, Vec<SubInstance>)> {
    if k < 0 || k >= params.k_count {
        return Err(Error::InvalidParams(format!(
            "shift offset k={k} out of range [0,{})",
            params.k_count
        )));
    }
    let delta = params.base.delta;
    let mut jobs = instance.jobs.clone();
    for job in &mut jobs {
        let e = release_exponent(delta, job.release, job.id)?;
        let mut i = 0i64;
        loop {
            let lo = params.q_exp(i, k);
            if lo > e {
                break; // e sits in the untouched zone below band i
            }
            let hi = params.q_exp(i, k + 1);
            if e < hi {
                job.release = geo::pow1p(delta, hi);
                break;
            }
            i += 1;
        }
    }
    let shifted = Instance::new(jobs, instance.machines.clone(), true)?;
    let mut frames: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
    for job in &shifted.jobs {
        let e = release_exponent(delta, job.release, job.id)?;
        let mut i = 0i64;
        loop {
            let lo = params.q_exp(i - 1, k + 1);
            let hi = params.q_exp(i, k);
            if e >= lo && e < hi {
                frames.entry(i).or_default().push(job.id);
                break;
            }
            if lo > e {
                return Err(Error::InvalidSchedule(format!(
                    "release exponent {e} of job {} falls between frames",
                    job.id
                )));
            }
            i += 1;
            if i > 1_000_000 {
                return Err(Error::CapExceeded("release frame search diverged".into()));
            }
        }
    }
    let subs = frames
        .into_iter()
        .map(|(i, job_ids)| SubInstance { i, job_ids })
        .collect();
    Ok((shifted, subs))
}

fn release_exponent(delta: f64, release: f64, id: usize) -> Result<i64> {
    geo::exact_exponent(delta, release).ok_or_else(|| {
        Error::InvalidInstance(format!(
            "release date {release} of job {id} is not a grid power; round the instance first"
        ))
    })
}

/// Reference transformer: turns a schedule for the unshifted instance into a
/// feasible schedule for the offset-`k` shifted instance by inserting, on
/// every machine, idle time of the band width just before the first job whose
/// start falls into that band (shifting all later jobs on the machine by the
/// same amount).
pub fn idle_insertion(
    instance: &Instance,
    schedule: &TimedSchedule,
    k: i64,
    params: &ReleaseParams,
) -> TimedSchedule {
    let delta = params.base.delta;
    let max_c = schedule
        .jobs
        .iter()
        .fold(0.0f64, |acc, tj| acc.max(tj.completion));
    let mut out = schedule.clone();
    for machine in &instance.machines {
        let mut idxs: Vec<usize> = (0..out.jobs.len())
            .filter(|&x| out.jobs[x].machine == machine.id)
            .collect();
        idxs.sort_by(|&a, &b| {
            let sa = schedule.start(instance, schedule.jobs[a].job);
            let sb = schedule.start(instance, schedule.jobs[b].job);
            sa.partial_cmp(&sb).unwrap()
        });
        let mut offsets = vec![0.0f64; idxs.len()];
        let mut i = 0i64;
        loop {
            let lo = geo::pow1p(delta, params.q_exp(i, k));
            if !(lo <= max_c * (1.0 + geo::GEO_TOL)) {
                break; // bands beyond the last start are inert
            }
            let hi = geo::pow1p(delta, params.q_exp(i, k + 1));
            let first = idxs.iter().position(|&x| {
                let s = schedule.start(instance, schedule.jobs[x].job);
                geo::geo_ge(s, lo) && geo::geo_lt(s, hi)
            });
            if let Some(pos) = first {
                let idle = hi - lo;
                for off in offsets.iter_mut().skip(pos) {
                    *off += idle;
                }
            }
            i += 1;
        }
        for (slot, &x) in idxs.iter().enumerate() {
            out.jobs[x].completion += offsets[slot];
        }
    }
    out
}

/// Per-offset ledger row of [`choose_k`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KEntry {
    /// Shift offset.
    pub k: i64,
    /// Solution cost reported by the solver for this offset.
    pub cost: f64,
    /// Whether the solver actually ran (`false`: the shifted instance was
    /// byte-identical to an earlier offset's and the result was reused).
    pub solved: bool,
}

/// Runs `solver` on every shifted instance `A_k` and returns the cheapest
/// offset.  With `dedupe`, offsets producing identical release-date vectors
/// reuse the earlier result (sound for any solver that depends only on the
/// instance; disable it for transformers that depend on `k` itself).
pub fn choose_k(
    instance: &Instance,
    params: &ReleaseParams,
    dedupe: bool,
    solver: &mut dyn FnMut(&Instance, i64, &[SubInstance]) -> Result<(TimedSchedule, f64)>,
) -> Result<(i64, TimedSchedule, Vec<KEntry>)> {
    let mut seen: BTreeMap<Vec<u64>, (TimedSchedule, f64)> = BTreeMap::new();
    let mut entries = Vec::with_capacity(params.k_count.min(1 << 20) as usize);
    let mut best: Option<(i64, TimedSchedule, f64)> = None;
    for k in 0..params.k_count {
        let (ak, subs) = release_shift(instance, k, params)?;
        let fp: Vec<u64> = ak.jobs.iter().map(|j| j.release.to_bits()).collect();
        let (schedule, value, solved) = if dedupe {
            match seen.get(&fp) {
                Some((s, c)) => (s.clone(), *c, false),
                None => {
                    let (s, c) = solver(&ak, k, &subs)?;
                    seen.insert(fp, (s.clone(), c));
                    (s, c, true)
                }
            }
        } else {
            let (s, c) = solver(&ak, k, &subs)?;
            (s, c, true)
        };
        entries.push(KEntry {
            k,
            cost: value,
            solved,
        });
        if best.as_ref().map_or(true, |(_, _, b)| value < *b) {
            best = Some((k, schedule, value));
        }
    }
    let (k, schedule, _) = best.expect("k_count >= 1");
    Ok((k, schedule, entries))
}

// ---------------------------------------------------------------------------
// Structural schedule properties
// ---------------------------------------------------------------------------

/// No assigned job of size above `psi * no_large_factor * speed` of its
/// machine.  Preserved by moving jobs earlier or to lower-index (not slower)
/// machines.
pub fn property_no_large(
    instance: &Instance,
    schedule: &TimedSchedule,
    psi: f64,
    params: &ReleaseParams,
) -> bool {
    schedule.jobs.iter().all(|tj| {
        let s = instance.machine(tj.machine).speed;
        geo::geo_le(instance.job(tj.job).size, psi * params.no_large_factor * s)
    })
}

fn density_decay_ok(
    instance: &Instance,
    schedule: &TimedSchedule,
    psi: f64,
    start_threshold: f64,
    gap: f64,
    params: &ReleaseParams,
) -> bool {
    let decay = (1.0 + params.base.delta).powf(params.y_hat.min(1e6));
    for machine in &instance.machines {
        let mut on: Vec<&TimedJob> = schedule
            .jobs
            .iter()
            .filter(|tj| tj.machine == machine.id)
            .collect();
        on.sort_by(|a, b| a.completion.partial_cmp(&b.completion).unwrap());
        // Jobs starting after psi run in non-increasing density.
        let after: Vec<&&TimedJob> = on
            .iter()
            .filter(|tj| geo::geo_ge(schedule.start(instance, tj.job), psi))
            .collect();
        for pair in after.windows(2) {
            let d0 = instance.job(pair[0].job).density();
            let d1 = instance.job(pair[1].job).density();
            if geo::geo_lt(d0, d1) {
                return false;
            }
        }
        // Far-apart pairs lose a full density period.
        for a in &on {
            if !geo::geo_ge(schedule.start(instance, a.job), start_threshold) {
                continue;
            }
            for b in &on {
                if b.completion < a.completion + psi * gap {
                    continue;
                }
                let da = instance.job(a.job).density();
                let db = instance.job(b.job).density();
                if geo::geo_lt(da / decay, db) {
                    return false;
                }
            }
        }
    }
    true
}

/// Tight decay property: after `psi` densities are non-increasing, and a job
/// starting at or after `psi_prime / 2` dominates (by a full `(1+delta)^y_hat`
/// factor) every job completing `psi * prop1_gap` later on its machine.
/// The threshold is a start-time condition.
pub fn property_1(
    instance: &Instance,
    schedule: &TimedSchedule,
    psi: f64,
    psi_prime: f64,
    params: &ReleaseParams,
) -> bool {
    density_decay_ok(
        instance,
        schedule,
        psi,
        psi_prime / 2.0,
        params.prop1_gap,
        params,
    )
}

/// Loose decay property: as [`property_1`] with threshold `psi_prime / 4` and
/// gap `psi * prop3_gap`.
pub fn property_3(
    instance: &Instance,
    schedule: &TimedSchedule,
    psi: f64,
    psi_prime: f64,
    params: &ReleaseParams,
) -> bool {
    density_decay_ok(
        instance,
        schedule,
        psi,
        psi_prime / 4.0,
        params.prop3_gap,
        params,
    )
}

// ---------------------------------------------------------------------------
// Palettes and the pink machine
// ---------------------------------------------------------------------------

/// Per-machine interval colors of the fastest machines.
///
/// A color is the set of interval exponents `t` in the universe where the
/// machine has a job start or idle time; *pink* is the full universe.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Palette {
    /// Colors of machines `0..fast_span.min(m)` in machine order.
    pub colors: Vec<BTreeSet<i64>>,
    /// Inclusive universe of interval exponents.
    pub lo: i64,
    /// Inclusive upper bound of the universe.
    pub hi: i64,
}

impl Palette {
    /// Whether machine `v`'s color is the full universe.
    pub fn is_pink(&self, v: usize) -> bool {
        self.colors
            .get(v)
            .map_or(false, |c| c.len() as i64 == self.hi - self.lo + 1)
    }

    /// Compact id for ledger rows: one hex digit block per machine color.
    pub fn id(&self) -> String {
        let mut out = String::new();
        for color in &self.colors {
            let mut bits: u128 = 0;
            for &t in color {
                let off = (t - self.lo).clamp(0, 127);
                bits |= 1u128 << off;
            }
            if !out.is_empty() {
                out.push('-');
            }
            out.push_str(&format!("{bits:x}"));
        }
        out
    }

    /// Whether machine `u` (if individually colored) may start a job in
    /// interval `t`.  Machines outside the colored span are unconstrained,
    /// as are intervals outside the universe.
    pub fn allows_start(&self, u: usize, t: i64) -> bool {
        if u >= self.colors.len() || t < self.lo || t > self.hi {
            return true;
        }
        self.colors[u].contains(&t)
    }
}

fn busy_segments(
    instance: &Instance,
    schedule: &TimedSchedule,
    machine: usize,
) -> Vec<(f64, f64)> {
    let mut segs: Vec<(f64, f64)> = schedule
        .jobs
        .iter()
        .filter(|tj| tj.machine == machine)
        .map(|tj| (schedule.start(instance, tj.job), tj.completion))
        .collect();
    segs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    segs
}

fn idle_in_window(segs: &[(f64, f64)], lo: f64, hi: f64) -> f64 {
    let mut busy = 0.0;
    for &(a, b) in segs {
        let a = a.max(lo);
        let b = b.min(hi);
        if b > a {
            busy += b - a;
        }
    }
    (hi - lo - busy).max(0.0)
}

/// Measures the palette of a schedule over the parameter universe
/// `[theta, palette_hi]`.
pub fn compute_palette(
    instance: &Instance,
    schedule: &TimedSchedule,
    params: &ReleaseParams,
) -> Palette {
    let delta = params.base.delta;
    let lo = params.theta;
    let hi = params.palette_hi;
    let span = params.fast_span.min(instance.m());
    let mut colors = Vec::with_capacity(span);
    for u in 0..span {
        let segs = busy_segments(instance, schedule, u);
        let mut color = BTreeSet::new();
        for t in lo..=hi {
            let a = geo::pow1p(delta, t);
            let b = geo::pow1p(delta, t + 1);
            let has_start = segs
                .iter()
                .any(|&(s, _)| geo::geo_ge(s, a) && geo::geo_lt(s, b));
            let idle = idle_in_window(&segs, a, b) > (b - a) * 1e-9;
            if has_start || idle {
                color.insert(t);
            }
        }
        colors.push(color);
    }
    Palette { colors, lo, hi }
}

/// Enumerates all palettes over the universe whose machine `v` is pink.
/// Refuses above the practical cap of `10^5` palettes.
pub fn enumerate_palettes(m: usize, v: usize, params: &ReleaseParams) -> Result<Vec<Palette>> {
    let span = params.fast_span.min(m);
    if v >= span {
        return Err(Error::InvalidParams(format!(
            "pink machine {v} outside the colored span {span}"
        )));
    }
    let universe: Vec<i64> = (params.theta..=params.palette_hi).collect();
    let bits = universe.len();
    let free_machines = span - 1;
    let count = (bits as f64 * free_machines as f64).exp2();
    if count > 1e5 {
        return Err(Error::CapExceeded(format!(
            "{count:.0} palettes exceed the enumeration cap of 100000"
        )));
    }
    let full: BTreeSet<i64> = universe.iter().copied().collect();
    let mut palettes = Vec::new();
    let masks = 1u64 << bits;
    let mut stack = vec![Vec::<BTreeSet<i64>>::new()];
    while let Some(prefix) = stack.pop() {
        if prefix.len() == span {
            palettes.push(Palette {
                colors: prefix,
                lo: params.theta,
                hi: params.palette_hi,
            });
            continue;
        }
        let u = prefix.len();
        if u == v {
            let mut next = prefix.clone();
            next.push(full.clone());
            stack.push(next);
        } else {
            for mask in 0..masks {
                let color: BTreeSet<i64> = universe
                    .iter()
                    .enumerate()
                    .filter(|(b, _)| mask & (1 << b) != 0)
                    .map(|(_, &t)| t)
                    .collect();
                let mut next = prefix.clone();
                next.push(color);
                stack.push(next);
            }
        }
    }
    Ok(palettes)
}

/// Result of the pink-machine normalization.
#[derive(Clone, Debug)]
pub struct PinkOutcome {
    /// The normalized schedule.
    pub schedule: TimedSchedule,
    /// Index of the pink machine.
    pub v: usize,
    /// `(job, old completion, new completion)` of every moved job.
    pub moved: Vec<(usize, f64, f64)>,
}

/// Frees one fast machine: time-stretches, picks the minimum-weight machine
/// `v` among indices `1..fast_span`, moves its jobs starting no later than
/// the maximum release date into late gaps of machine 0 (completion
/// inflation at most `1/delta^6` each), and re-sorts post-release jobs by
/// non-increasing density.  Returns `Ok(None)` when the instance has fewer
/// than `min_machines` machines (the caller falls back to the exact solver).
pub fn ensure_pink(
    instance: &Instance,
    schedule: &TimedSchedule,
    params: &ReleaseParams,
) -> Result<Option<PinkOutcome>> {
    if instance.m() < params.min_machines {
        return Ok(None);
    }
    let delta = params.base.delta;
    let stretched = timeline::time_stretch(instance, schedule, &params.base)?.timed();
    let span = params.fast_span.min(instance.m());
    let v = (1..span)
        .min_by(|&a, &b| {
            let wa: f64 = stretched
                .jobs
                .iter()
                .filter(|tj| tj.machine == a)
                .map(|tj| instance.job(tj.job).weight)
                .sum();
            let wb: f64 = stretched
                .jobs
                .iter()
                .filter(|tj| tj.machine == b)
                .map(|tj| instance.job(tj.job).weight)
                .sum();
            wa.partial_cmp(&wb).unwrap()
        })
        .ok_or_else(|| Error::InvalidParams("fast span must cover at least 2 machines".into()))?;
    let psi = instance
        .jobs
        .iter()
        .fold(0.0f64, |acc, j| acc.max(j.release));
    let s0 = instance.machine(0).speed;
    // Idle segments of machine 0, plus the unbounded trailing gap.
    let segs = busy_segments(instance, &stretched, 0);
    let mut gaps: Vec<(f64, f64)> = Vec::new();
    let mut cursor = 0.0f64;
    for &(a, b) in &segs {
        if a > cursor + 1e-15 {
            gaps.push((cursor, a));
        }
        cursor = cursor.max(b);
    }
    gaps.push((cursor, f64::INFINITY));
    let mut out = stretched.clone();
    let mut moved = Vec::new();
    // Move jobs in decreasing completion order so later jobs grab later gaps
    // first (the construction sends each to the *last* gap meeting its
    // deadline).
    let mut to_move: Vec<usize> = (0..out.jobs.len())
        .filter(|&x| {
            out.jobs[x].machine == v
                && geo::geo_le(stretched.start(instance, out.jobs[x].job), psi)
        })
        .collect();
    to_move.sort_by(|&a, &b| {
        out.jobs[b]
            .completion
            .partial_cmp(&out.jobs[a].completion)
            .unwrap()
    });
    for x in to_move {
        let job = instance.job(out.jobs[x].job);
        let proc = job.size / s0;
        let t = geo::floor_log(delta, out.jobs[x].completion);
        let deadline = geo::pow1p(delta, t + 1) / delta.powi(6);
        let slot = gaps
            .iter()
            .enumerate()
            .filter(|(_, &(a, b))| {
                let start = a.max(job.release).max(delta * proc);
                start + proc <= b + 1e-12 && start + proc <= deadline * (1.0 + geo::GEO_TOL)
            })
            .map(|(idx, _)| idx)
            .next_back();
        let Some(idx) = slot else {
            return Err(Error::InvalidSchedule(format!(
                "no gap on machine 0 fits job {} before its deadline",
                job.id
            )));
        };
        let start = gaps[idx].0.max(job.release).max(delta * proc);
        let completion = start + proc;
        moved.push((job.id, out.jobs[x].completion, completion));
        out.jobs[x].machine = 0;
        out.jobs[x].completion = completion;
        gaps[idx].0 = completion;
    }
    // Jobs starting after the last release run in non-increasing density:
    // repack each machine's tail back-to-back (releases are all passed, so
    // completions only move earlier).
    for machine in &instance.machines {
        let mut tail: Vec<usize> = (0..out.jobs.len())
            .filter(|&x| {
                out.jobs[x].machine == machine.id
                    && geo::geo_ge(
                        out.jobs[x].completion
                            - instance.job(out.jobs[x].job).size / machine.speed,
                        psi,
                    )
            })
            .collect();
        if tail.len() < 2 {
            continue;
        }
        let head_end = (0..out.jobs.len())
            .filter(|&x| out.jobs[x].machine == machine.id && !tail.contains(&x))
            .fold(0.0f64, |acc, x| acc.max(out.jobs[x].completion));
        let first_start = tail
            .iter()
            .map(|&x| out.jobs[x].completion - instance.job(out.jobs[x].job).size / machine.speed)
            .fold(f64::INFINITY, f64::min);
        tail.sort_by(|&a, &b| {
            let da = instance.job(out.jobs[a].job).density();
            let db = instance.job(out.jobs[b].job).density();
            db.partial_cmp(&da).unwrap()
        });
        let mut cursor = head_end.max(first_start).max(psi);
        for &x in &tail {
            let job = instance.job(out.jobs[x].job);
            let proc = job.size / machine.speed;
            let start = cursor.max(delta * proc);
            out.jobs[x].completion = start + proc;
            cursor = start + proc;
        }
    }
    out.validate(instance)?;
    Ok(Some(PinkOutcome {
        schedule: out,
        v,
        moved,
    }))
}

// ---------------------------------------------------------------------------
// Sparse elimination
// ---------------------------------------------------------------------------

/// Intervals `(machine, t)` that are sparse for the schedule: some job starts
/// in the interval but the total size of starting jobs is at most
/// `speed * delta^5 * (1+delta)^t`, considering intervals up to the release
/// horizon `R`.
pub fn sparse_intervals(
    instance: &Instance,
    schedule: &TimedSchedule,
    params: &ReleaseParams,
) -> Vec<(usize, i64)> {
    let delta = params.base.delta;
    let mut out = Vec::new();
    for machine in &instance.machines {
        let mut per_interval: BTreeMap<i64, f64> = BTreeMap::new();
        for tj in schedule.jobs.iter().filter(|tj| tj.machine == machine.id) {
            let start = schedule.start(instance, tj.job);
            let t = geo::floor_log(delta, start);
            *per_interval.entry(t).or_insert(0.0) += instance.job(tj.job).size;
        }
        for (&t, &total) in &per_interval {
            if t > params.r_exp {
                continue;
            }
            let cap = machine.speed * delta.powi(5) * geo::pow1p(delta, t);
            if geo::geo_le(total, cap) {
                out.push((machine.id, t));
            }
        }
    }
    out
}

/// Postcondition of [`eliminate_sparse`]: no sparse machine of 0-based index
/// `>= fast_span` and at most one sparse machine per interval.
pub fn sparse_ok(instance: &Instance, schedule: &TimedSchedule, params: &ReleaseParams) -> bool {
    let sparse = sparse_intervals(instance, schedule, params);
    if sparse.iter().any(|&(u, _)| u >= params.fast_span) {
        return false;
    }
    let mut per_t: BTreeMap<i64, usize> = BTreeMap::new();
    for &(_, t) in &sparse {
        *per_t.entry(t).or_insert(0) += 1;
    }
    per_t.values().all(|&c| c <= 1)
}

fn move_interval_jobs(
    instance: &Instance,
    schedule: &mut TimedSchedule,
    from: usize,
    to: usize,
    t: i64,
    delta: f64,
) {
    let speed_to = instance.machine(to).speed;
    let a = geo::pow1p(delta, t);
    let b = geo::pow1p(delta, t + 1);
    // Resume after the last job that starts and completes inside the target
    // interval (or received jobs from an earlier merge).
    let mut cursor = a;
    for tj in schedule.jobs.iter().filter(|tj| tj.machine == to) {
        let s = schedule.start(instance, tj.job);
        if geo::geo_ge(s, a) && geo::geo_lt(s, b) && tj.completion <= b * (1.0 + geo::GEO_TOL) {
            cursor = cursor.max(tj.completion);
        }
    }
    let mut idxs: Vec<usize> = (0..schedule.jobs.len())
        .filter(|&x| {
            let tj = &schedule.jobs[x];
            if tj.machine != from {
                return false;
            }
            let s = schedule.start(instance, tj.job);
            geo::geo_ge(s, a) && geo::geo_lt(s, b)
        })
        .collect();
    idxs.sort_by(|&x, &y| {
        schedule
            .start(instance, schedule.jobs[x].job)
            .partial_cmp(&schedule.start(instance, schedule.jobs[y].job))
            .unwrap()
    });
    for x in idxs {
        let job = instance.job(schedule.jobs[x].job);
        let start = cursor.max(job.release).max(delta * job.size / speed_to);
        schedule.jobs[x].machine = to;
        schedule.jobs[x].completion = start + job.size / speed_to;
        cursor = start + job.size / speed_to;
    }
}

/// Removes sparse intervals in two phases: time-stretch and pairwise-merge
/// sparse intervals to the lower-index machine until each interval is sparse
/// on at most one machine; stretch again and move residual sparse content of
/// machines at index `>= fast_span` into the pink machine `v`'s gaps.
pub fn eliminate_sparse(
    instance: &Instance,
    schedule: &TimedSchedule,
    v: usize,
    params: &ReleaseParams,
) -> Result<TimedSchedule> {
    let delta = params.base.delta;
    let mut sol = timeline::time_stretch(instance, schedule, &params.base)?.timed();
    let mut guard = 0usize;
    loop {
        let sparse = sparse_intervals(instance, &sol, params);
        let mut by_t: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
        for &(u, t) in &sparse {
            by_t.entry(t).or_default().push(u);
        }
        let Some((&t, us)) = by_t.iter().find(|(_, us)| us.len() >= 2) else {
            break;
        };
        let mut us = us.clone();
        us.sort_unstable();
        move_interval_jobs(instance, &mut sol, us[1], us[0], t, delta);
        guard += 1;
        if guard > instance.m() * schedule.jobs.len().max(1) * 64 {
            return Err(Error::CapExceeded("sparse merging did not converge".into()));
        }
    }
    let mut sol = timeline::time_stretch(instance, &sol, &params.base)?.timed();
    loop {
        let sparse = sparse_intervals(instance, &sol, params);
        let Some(&(u, t)) = sparse.iter().find(|&&(u, _)| u >= params.fast_span) else {
            break;
        };
        move_interval_jobs(instance, &mut sol, u, v, t, delta);
        guard += 1;
        if guard > instance.m() * schedule.jobs.len().max(1) * 64 {
            return Err(Error::CapExceeded("sparse relocation did not converge".into()));
        }
    }
    sol.validate(instance)?;
    Ok(sol)
}

// ---------------------------------------------------------------------------
// Combining density bands
// ---------------------------------------------------------------------------

/// Audit trail of [`combine_density_bands`].
#[derive(Clone, Debug, Default)]
pub struct CombineAudit {
    /// `(machine, t, load, capacity)` of every used sparse-gap.
    pub sparse_gaps: Vec<(usize, i64, f64, f64)>,
    /// `(machine, t'', load, capacity)` of every used postpone-gap.
    pub postpone_gaps: Vec<(usize, i64, f64, f64)>,
    /// `(machine, k', t', mu, charged size, size cap)` per charged pair.
    pub charges: Vec<(usize, i64, i64, i64, f64, f64)>,
    /// `(machine, combined pseudo-cost, summed band pseudo-cost)`.
    pub machine_costs: Vec<(usize, f64, f64)>,
}

#[derive(Clone, Copy)]
struct TakenInfo {
    pair: (i64, i64),
    #[allow(dead_code)]
    intermediate: Option<(i64, i64)>,
}

struct GapJob {
    job: usize,
}

/// Merges per-band schedules (decreasing `k`) into one schedule per machine,
/// placing each band's interval load either at its original starts, into the
/// interval's sparse-gap (capacity `2 delta^5 (1+delta)^t` in machine time),
/// or postponing it to the last postpone-gap (capacity `delta^5 (1+delta)^t`)
/// before the charged deadline.  The free/taken interval state, intermediate
/// pairs, and all capacity claims are recorded in the audit.
pub fn combine_density_bands(
    instance: &Instance,
    bands: &[(i64, TimedSchedule)],
    params: &ReleaseParams,
) -> Result<(TimedSchedule, CombineAudit)> {
    let delta = params.base.delta;
    if bands.is_empty() {
        return Err(Error::InvalidParams("no band schedules to combine".into()));
    }
    let mut order: Vec<usize> = (0..bands.len()).collect();
    order.sort_by_key(|&x| std::cmp::Reverse(bands[x].0));
    for w in order.windows(2) {
        if bands[w[0]].0 == bands[w[1]].0 {
            return Err(Error::InvalidParams("duplicate band index".into()));
        }
    }
    let mut audit = CombineAudit::default();
    let mut out_jobs: Vec<TimedJob> = Vec::new();
    for machine in &instance.machines {
        let speed = machine.speed;
        // Interval bookkeeping.
        let mut taken: BTreeMap<i64, TakenInfo> = BTreeMap::new();
        let mut sparse_load: BTreeMap<i64, (f64, Vec<GapJob>)> = BTreeMap::new();
        let mut postpone: BTreeMap<i64, (f64, Vec<GapJob>, (i64, i64, i64))> = BTreeMap::new();
        let mut originals: Vec<(usize, f64, f64)> = Vec::new(); // (job, start, completion)
        let mut t_floor = i64::MAX;
        for &bx in &order {
            let sched = &bands[bx].1;
            for tj in sched.jobs.iter().filter(|tj| tj.machine == machine.id) {
                let t = geo::floor_log(delta, sched.start(instance, tj.job));
                t_floor = t_floor.min(t);
            }
        }
        if t_floor == i64::MAX {
            continue; // machine unused by every band
        }
        let mark_taken = |taken: &mut BTreeMap<i64, TakenInfo>,
                          lo: i64,
                          hi: i64,
                          pair: (i64, i64),
                          intermediate: Option<(i64, i64)>| {
            for t in lo..=hi {
                taken.entry(t).or_insert(TakenInfo { pair, intermediate });
            }
        };
        for &bx in &order {
            let (k, sched) = (&bands[bx].0, &bands[bx].1);
            let k = *k;
            let mut groups: BTreeMap<i64, Vec<&TimedJob>> = BTreeMap::new();
            for tj in sched.jobs.iter().filter(|tj| tj.machine == machine.id) {
                let t = geo::floor_log(delta, sched.start(instance, tj.job));
                groups.entry(t).or_default().push(tj);
            }
            let ts: Vec<i64> = groups.keys().rev().copied().collect();
            let mut postponed_already = false;
            for (pos, &t) in ts.iter().enumerate() {
                if postponed_already {
                    break;
                }
                let blocker = taken.get(&t).copied().filter(|info| info.pair.0 > k);
                if let Some(info) = blocker {
                    // Postpone every remaining job of this band on this
                    // machine to the last postpone-gap before the deadline.
                    let (k1, t1) = info.pair;
                    let mu = k1 - k;
                    let deadline =
                        geo::pow1p(delta, t1) / delta.powi((10 * mu).min(250) as i32);
                    let remaining: Vec<&TimedJob> = ts[pos..]
                        .iter()
                        .flat_map(|tt| groups[tt].iter().copied())
                        .collect();
                    let mut gap_t = geo::floor_log(delta, deadline) - 1;
                    while postpone.contains_key(&gap_t) {
                        gap_t -= 1;
                        if gap_t < t_floor - 1 {
                            return Err(Error::InvalidSchedule(
                                "no free postpone-gap before the deadline".into(),
                            ));
                        }
                    }
                    let load: f64 = remaining
                        .iter()
                        .map(|tj| instance.job(tj.job).size / speed)
                        .sum();
                    let entry = postpone.entry(gap_t).or_insert((0.0, Vec::new(), (k, k1, t1)));
                    entry.0 += load;
                    for tj in &remaining {
                        entry.1.push(GapJob { job: tj.job });
                    }
                    let cap_gap = delta.powi(10) * geo::pow1p(delta, gap_t);
                    audit
                        .postpone_gaps
                        .push((machine.id, gap_t, load, cap_gap));
                    let charge_cap = geo::pow1p(delta, t1)
                        / delta.powi((10 * (mu - 1) + 3).min(250) as i32);
                    audit
                        .charges
                        .push((machine.id, k1, t1, mu, load * speed, charge_cap * speed));
                    mark_taken(&mut taken, t_floor, gap_t, (k1, t1), Some((k, t)));
                    postponed_already = true;
                    continue;
                }
                let jobs = &groups[&t];
                let total: f64 = jobs.iter().map(|tj| instance.job(tj.job).size).sum();
                let threshold = speed * delta.powi(5) * geo::pow1p(delta, t);
                if geo::geo_le(total, threshold) {
                    // Into the sparse-gap of this interval.
                    let entry = sparse_load.entry(t).or_insert((0.0, Vec::new()));
                    entry.0 += total;
                    for tj in jobs {
                        entry.1.push(GapJob { job: tj.job });
                    }
                    if entry.0 > threshold && !taken.contains_key(&t) {
                        mark_taken(&mut taken, t_floor, t, (k, t), None);
                    }
                } else {
                    // Keep original starts.
                    let mut t_hi = t;
                    for tj in jobs.iter() {
                        originals.push((
                            tj.job,
                            sched.start(instance, tj.job),
                            tj.completion,
                        ));
                        let ct = geo::floor_log(delta, tj.completion);
                        if ct > t {
                            // Reserved span of a crossing job.
                            t_hi = t_hi.max(ct);
                        }
                    }
                    let newly = !taken.contains_key(&t);
                    if newly {
                        mark_taken(&mut taken, t_floor, t_hi.max(t), (k, t), None);
                    }
                    // Last-completing job's share in its completion interval.
                    if let Some(last) = jobs
                        .iter()
                        .max_by(|a, b| a.completion.partial_cmp(&b.completion).unwrap())
                    {
                        let ct = geo::floor_log(delta, last.completion);
                        if ct != t && !taken.contains_key(&ct) {
                            let share = last.completion - geo::pow1p(delta, ct);
                            if share * speed >= delta.powi(5) * geo::pow1p(delta, ct) * speed {
                                mark_taken(&mut taken, t_floor, ct, (k, t), None);
                            }
                        }
                    }
                }
            }
        }
        // Record sparse-gap audits.
        for (&t, (load, _)) in &sparse_load {
            let cap = 2.0 * delta.powi(5) * geo::pow1p(delta, t) * speed;
            audit.sparse_gaps.push((machine.id, t, *load, cap));
        }
        // The taken set must be downward-closed from the floor.
        if let (Some(&max_t), _) = (taken.keys().next_back(), ()) {
            for t in t_floor..=max_t {
                if !taken.contains_key(&t) {
                    return Err(Error::InvalidSchedule(format!(
                        "taken intervals on machine {} are not prefix-closed at {}",
                        machine.id, t
                    )));
                }
            }
        }
        // Assemble: originals at their starts, gap jobs packed into the
        // measured idle of their interval.
        let mut machine_jobs: Vec<TimedJob> = originals
            .iter()
            .map(|&(job, _, completion)| TimedJob {
                job,
                machine: machine.id,
                completion,
            })
            .collect();
        let mut busy: Vec<(f64, f64)> = originals
            .iter()
            .map(|&(_, s, c)| (s, c))
            .collect();
        busy.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let place_gap_jobs = |jobs: &Vec<GapJob>,
                                  t: i64,
                                  busy: &mut Vec<(f64, f64)>,
                                  machine_jobs: &mut Vec<TimedJob>|
         -> Result<()> {
            let a = geo::pow1p(delta, t);
            let b = geo::pow1p(delta, t + 1);
            // Idle sub-segments of [a, b).
            let mut segs: Vec<(f64, f64)> = Vec::new();
            let mut cursor = a;
            for &(s, c) in busy.iter() {
                let s = s.max(a);
                let c = c.min(b);
                if c <= s {
                    continue;
                }
                if s > cursor + 1e-15 {
                    segs.push((cursor, s));
                }
                cursor = cursor.max(c);
            }
            if cursor < b {
                segs.push((cursor, b));
            }
            let mut seg_idx = 0usize;
            for gj in jobs {
                let job = instance.job(gj.job);
                let proc = job.size / speed;
                loop {
                    if seg_idx >= segs.len() {
                        return Err(Error::InvalidSchedule(format!(
                            "gap overflow in interval {t} on machine {}",
                            machine.id
                        )));
                    }
                    let (lo, hi) = segs[seg_idx];
                    let start = lo.max(job.release).max(delta * proc);
                    if start + proc <= hi + 1e-12 {
                        machine_jobs.push(TimedJob {
                            job: gj.job,
                            machine: machine.id,
                            completion: start + proc,
                        });
                        busy.push((start, start + proc));
                        busy.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
                        segs[seg_idx].0 = start + proc;
                        break;
                    }
                    seg_idx += 1;
                }
            }
            Ok(())
        };
        for (&t, (_, jobs)) in &sparse_load {
            place_gap_jobs(jobs, t, &mut busy, &mut machine_jobs)?;
        }
        for (&t, (_, jobs, _)) in &postpone {
            place_gap_jobs(jobs, t, &mut busy, &mut machine_jobs)?;
        }
        // Cost audit.
        let combined: f64 = machine_jobs
            .iter()
            .map(|tj| {
                instance.job(tj.job).weight
                    * geo::pow1p(delta, geo::floor_log(delta, tj.completion) + 1)
            })
            .sum();
        let summed: f64 = order
            .iter()
            .flat_map(|&bx| bands[bx].1.jobs.iter())
            .filter(|tj| tj.machine == machine.id)
            .map(|tj| {
                instance.job(tj.job).weight
                    * geo::pow1p(delta, geo::floor_log(delta, tj.completion) + 1)
            })
            .sum();
        audit.machine_costs.push((machine.id, combined, summed));
        out_jobs.extend(machine_jobs);
    }
    let combined = TimedSchedule { jobs: out_jobs };
    combined.validate(instance)?;
    Ok((combined, audit))
}

// ---------------------------------------------------------------------------
// Combining release frames
// ---------------------------------------------------------------------------

/// Audit trail of [`combine_subinstances`].
#[derive(Clone, Debug, Default)]
pub struct SubCombineAudit {
    /// `(machine, t, load, 3*Psi cap, delta^4 interval cap)` per host
    /// interval that received overflow chunks (loads in machine time).
    pub host_loads: Vec<(usize, i64, f64, f64, f64)>,
    /// `(machine, i, c0, Sum of later chunk delay costs)` per overflowing
    /// frame; the analysis bounds the sum by `delta * c0`.
    pub chunk_costs: Vec<(usize, i64, f64, f64)>,
    /// `(machine, combined pseudo-cost, summed frame pseudo-cost)`.
    pub machine_costs: Vec<(usize, f64, f64)>,
}

/// Combines per-frame schedules into one schedule for the offset-`k`
/// instance.  Jobs completing within their own frame keep their (stretched)
/// slots; overflow chunks of one frame width each are placed into successive
/// gapped intervals at exponent `(1+delta)^t >= Psi_{i,k+1} / delta^5`.
pub fn combine_subinstances(
    instance: &Instance,
    k: i64,
    frames: &[(i64, TimedSchedule)],
    params: &ReleaseParams,
) -> Result<(TimedSchedule, SubCombineAudit)> {
    let delta = params.base.delta;
    let mut audit = SubCombineAudit::default();
    let mut out_jobs: Vec<TimedJob> = Vec::new();
    for machine in &instance.machines {
        let speed = machine.speed;
        // Per frame: compress idle after Psi_{i,k}/(1+delta), stretch, split
        // into kept jobs and overflow chunks.
        let mut kept: Vec<(usize, f64, f64)> = Vec::new(); // (job, start, completion)
        let mut summed_cost = 0.0f64;
        struct Chunk {
            frame: i64,
            ell: usize,
            jobs: Vec<usize>,
            work: f64,
        }
        let mut chunks: Vec<Chunk> = Vec::new();
        let mut frame_c0: BTreeMap<i64, f64> = BTreeMap::new();
        for &(i, ref sched) in frames {
            let mut on: Vec<&TimedJob> = sched
                .jobs
                .iter()
                .filter(|tj| tj.machine == machine.id)
                .collect();
            if on.is_empty() {
                continue;
            }
            on.sort_by(|a, b| a.completion.partial_cmp(&b.completion).unwrap());
            summed_cost += on
                .iter()
                .map(|tj| {
                    instance.job(tj.job).weight
                        * geo::pow1p(delta, geo::floor_log(delta, tj.completion) + 1)
                })
                .sum::<f64>();
            let psi_ik = params.psi(i, k);
            let psi_next = params.psi(i, k + 1);
            let frame_lo = params.psi(i - 1, k + 1);
            // Compress: remove idle after psi_ik/(1+delta).
            let boundary = psi_ik / (1.0 + delta);
            let mut compressed: Vec<(usize, f64, f64)> = Vec::new();
            let mut cursor = 0.0f64;
            for tj in &on {
                let job = instance.job(tj.job);
                let proc = job.size / speed;
                let s = sched.start(instance, tj.job);
                let start = if s < boundary {
                    cursor = cursor.max(tj.completion);
                    compressed.push((tj.job, s, tj.completion));
                    continue;
                } else {
                    s.min(cursor.max(boundary).max(job.release).max(delta * proc))
                        .max(cursor)
                        .max(job.release)
                        .max(delta * proc)
                };
                compressed.push((tj.job, start, start + proc));
                cursor = start + proc;
            }
            // Stretch by 1+delta.
            let stretched: Vec<(usize, f64, f64)> = compressed
                .iter()
                .map(|&(j, _s, c)| {
                    let proc = instance.job(j).size / speed;
                    let rc = c * (1.0 + delta);
                    (j, rc - proc, rc)
                })
                .collect();
            // c0: cost of jobs starting in [psi_next/2, 3 psi_next/4).
            let c0: f64 = stretched
                .iter()
                .filter(|&&(_, s, _)| s >= psi_next / 2.0 && s < 3.0 * psi_next / 4.0)
                .map(|&(j, _, c)| {
                    instance.job(j).weight * geo::pow1p(delta, geo::floor_log(delta, c) + 1)
                })
                .sum();
            frame_c0.insert(i, c0);
            // Split: jobs completing within the frame stay; the rest form
            // chunks of one frame width each, by compressed start.
            let mut overflow: Vec<(usize, f64, f64)> = Vec::new();
            for (pos, &(j, s, c)) in stretched.iter().enumerate() {
                if c < psi_next * (1.0 + geo::GEO_TOL) && s >= frame_lo * (1.0 - geo::GEO_TOL) {
                    kept.push((j, s, c));
                } else {
                    overflow.push(compressed[pos]);
                }
            }
            if overflow.is_empty() {
                continue;
            }
            overflow.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
            let mu = overflow[0].1;
            let mut by_ell: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
            for &(j, s, _) in &overflow {
                let ell = (((s - mu) / psi_next).floor() as i64).max(0) as usize + 1;
                by_ell.entry(ell).or_default().push(j);
            }
            for (ell, jobs) in by_ell {
                let work = jobs
                    .iter()
                    .map(|&j| instance.job(j).size / speed)
                    .sum::<f64>();
                chunks.push(Chunk {
                    frame: i,
                    ell,
                    jobs,
                    work,
                });
            }
        }
        // Allocate chunks (per frame, increasing ell) to successive gapped
        // intervals at or above the frame's eligibility exponent.
        chunks.sort_by(|a, b| (a.frame, a.ell).cmp(&(b.frame, b.ell)));
        let horizon_hi = kept
            .iter()
            .map(|&(_, _, c)| c)
            .fold(1.0f64, f64::max)
            .max(params.l_value)
            * (1.0 + delta)
            / delta.powi(8);
        let mut busy: Vec<(f64, f64)> = kept.iter().map(|&(_, s, c)| (s, c)).collect();
        busy.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut interval_alloc: BTreeMap<i64, f64> = BTreeMap::new();
        let mut placed: Vec<(usize, f64, f64)> = Vec::new();
        for chunk in &chunks {
            let psi_next = params.psi(chunk.frame, k + 1);
            let min_exp = geo::ceil_log(delta, psi_next / delta.powi(5));
            // The chunk.ell-th qualifying interval for this frame.
            let mut qualifying = 0usize;
            let mut t = min_exp;
            let chunk_hi = horizon_hi.max(geo::pow1p(delta, min_exp) / delta.powi(8));
            let host = loop {
                let a = geo::pow1p(delta, t);
                let b = geo::pow1p(delta, t + 1);
                if a > chunk_hi {
                    break None;
                }
                let idle = idle_in_window(&busy, a, b);
                if idle > (b - a) * 1e-9 {
                    qualifying += 1;
                    if qualifying == chunk.ell {
                        break Some(t);
                    }
                }
                t += 1;
            };
            let Some(t) = host else {
                return Err(Error::InvalidSchedule(format!(
                    "no gapped interval hosts chunk {} of frame {}",
                    chunk.ell, chunk.frame
                )));
            };
            let a = geo::pow1p(delta, t);
            let b = geo::pow1p(delta, t + 1);
            // Pack the chunk back-to-back into the interval's idle.
            let mut segs: Vec<(f64, f64)> = Vec::new();
            let mut cursor = a;
            for &(s, c) in busy.iter() {
                let s = s.max(a);
                let c = c.min(b);
                if c <= s {
                    continue;
                }
                if s > cursor + 1e-15 {
                    segs.push((cursor, s));
                }
                cursor = cursor.max(c);
            }
            if cursor < b {
                segs.push((cursor, b));
            }
            let mut seg_idx = 0usize;
            for &j in &chunk.jobs {
                let job = instance.job(j);
                let proc = job.size / speed;
                loop {
                    if seg_idx >= segs.len() {
                        return Err(Error::InvalidSchedule(format!(
                            "host interval {t} overflows on machine {}",
                            machine.id
                        )));
                    }
                    let (lo, hi) = segs[seg_idx];
                    let start = lo.max(job.release).max(delta * proc);
                    if start + proc <= hi + 1e-12 {
                        placed.push((j, start, start + proc));
                        segs[seg_idx].0 = start + proc;
                        break;
                    }
                    seg_idx += 1;
                }
            }
            for &(_, s, c) in placed.iter().rev().take(chunk.jobs.len()) {
                busy.push((s, c));
            }
            busy.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
            *interval_alloc.entry(t).or_insert(0.0) += chunk.work;
            let cap3 = 3.0 * params.psi(chunk.frame, k + 1) / speed;
            let cap_interval = delta.powi(4) * geo::pow1p(delta, t);
            audit.host_loads.push((
                machine.id,
                t,
                interval_alloc[&t],
                cap3,
                cap_interval,
            ));
        }
        // Chunk delay-cost audit per frame.
        let mut frame_later: BTreeMap<i64, f64> = BTreeMap::new();
        for chunk in &chunks {
            let delay_cost: f64 = chunk
                .jobs
                .iter()
                .map(|&j| {
                    let new_c = placed
                        .iter()
                        .find(|&&(pj, _, _)| pj == j)
                        .map(|&(_, _, c)| c)
                        .unwrap_or(0.0);
                    instance.job(j).weight
                        * geo::pow1p(delta, geo::floor_log(delta, new_c.max(1e-300)) + 1)
                })
                .sum();
            *frame_later.entry(chunk.frame).or_insert(0.0) += delay_cost;
        }
        for (&i, &later) in &frame_later {
            audit
                .chunk_costs
                .push((machine.id, i, frame_c0.get(&i).copied().unwrap_or(0.0), later));
        }
        let combined_cost: f64 = kept
            .iter()
            .chain(placed.iter())
            .map(|&(j, _, c)| {
                instance.job(j).weight * geo::pow1p(delta, geo::floor_log(delta, c) + 1)
            })
            .sum();
        audit
            .machine_costs
            .push((machine.id, combined_cost, summed_cost));
        for &(j, _, c) in kept.iter().chain(placed.iter()) {
            out_jobs.push(TimedJob {
                job: j,
                machine: machine.id,
                completion: c,
            });
        }
    }
    let combined = TimedSchedule { jobs: out_jobs };
    combined.validate(instance)?;
    Ok((combined, audit))
}

// ---------------------------------------------------------------------------
// Bounded inputs: preprocessing, configurations, MILP, rounding
// ---------------------------------------------------------------------------

/// Output of [`preprocess_bounded`].
#[derive(Clone, Debug)]
pub struct PreprocessOut {
    /// Ids of jobs kept for the configuration program.
    pub kept: Vec<usize>,
    /// Pre-placed fragment holding the removed jobs.
    pub fragment: TimedSchedule,
}

/// Per release exponent `t`, schedules the whole release class on the
/// lowest-index machine whose color contains `t` when its total processing
/// time there is at most `delta^4 (1+delta)^t`, and removes it from the
/// instance.
pub fn preprocess_bounded(
    instance: &Instance,
    palette: &Palette,
    params: &ReleaseParams,
) -> Result<PreprocessOut> {
    let delta = params.base.delta;
    let mut by_release: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
    for job in &instance.jobs {
        let e = release_exponent(delta, job.release, job.id)?;
        by_release.entry(e).or_default().push(job.id);
    }
    let mut kept = Vec::new();
    let mut fragment = Vec::new();
    for (&t, ids) in &by_release {
        let host = (0..instance.m()).find(|&u| {
            u < palette.colors.len() && palette.colors[u].contains(&t)
        });
        let Some(u) = host else {
            kept.extend(ids.iter().copied());
            continue;
        };
        let speed = instance.machine(u).speed;
        let work: f64 = ids
            .iter()
            .map(|&j| instance.job(j).size / speed)
            .sum();
        if geo::geo_le(work, delta.powi(4) * geo::pow1p(delta, t)) {
            let mut cursor = geo::pow1p(delta, t);
            for &j in ids {
                cursor += instance.job(j).size / speed;
                fragment.push(TimedJob {
                    job: j,
                    machine: u,
                    completion: cursor,
                });
            }
        } else {
            kept.extend(ids.iter().copied());
        }
    }
    Ok(PreprocessOut {
        kept,
        fragment: TimedSchedule { jobs: fragment },
    })
}

/// A machine type of the bounded pipeline: the fastest `fast_span` machines
/// are singleton types; the rest are grouped by speed.
#[derive(Clone, Debug)]
pub struct MachineTypeR {
    /// Speed exponent shared by the type.
    pub speed_exp: i64,
    /// Machine ids of the type, in index order.
    pub machines: Vec<usize>,
    /// Singleton type of a colored machine (its index), or `None`.
    pub singleton: Option<usize>,
    /// Whether the type is fast (speed at least `B` times the reference
    /// speed); fast types get integral machine-count variables.
    pub fast: bool,
}

/// Partitions the machines into types and classifies them as fast or slow.
pub fn machine_types(instance: &Instance, params: &ReleaseParams) -> Result<Vec<MachineTypeR>> {
    let delta = params.base.delta;
    let mut types = Vec::new();
    let span = params.fast_span.min(instance.m());
    let ref_speed = if instance.m() > span {
        instance.machine(span).speed
    } else {
        instance.machine(instance.m() - 1).speed
    };
    for u in 0..span {
        let machine = instance.machine(u);
        let e = geo::exact_exponent(delta, machine.speed).ok_or_else(|| {
            Error::InvalidInstance(format!("speed of machine {u} is not a grid power"))
        })?;
        types.push(MachineTypeR {
            speed_exp: e,
            machines: vec![u],
            singleton: Some(u),
            fast: true,
        });
    }
    let mut grouped: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
    for u in span..instance.m() {
        let e = geo::exact_exponent(delta, instance.machine(u).speed).ok_or_else(|| {
            Error::InvalidInstance(format!("speed of machine {u} is not a grid power"))
        })?;
        grouped.entry(e).or_default().push(u);
    }
    for (e, machines) in grouped.into_iter().rev() {
        let speed = geo::pow1p(delta, e);
        types.push(MachineTypeR {
            speed_exp: e,
            machines,
            singleton: None,
            fast: speed >= params.b_cutoff * ref_speed,
        });
    }
    Ok(types)
}

/// One machine configuration of the time-indexed program: a speed exponent,
/// a machine type, large-job placement counts per (density, size, release,
/// start-interval), small-job block levels per (density, start-interval,
/// release), and the pseudo-cost of its virtual schedule.
#[derive(Clone, Debug)]
pub struct ConfigurationR {
    /// Speed exponent `s(C)`.
    pub speed_exp: i64,
    /// Index of the machine type.
    pub mtype: usize,
    /// `N_C(r, i, i', t)`: large-job counts keyed `(r, i, t, i')`.
    pub large: BTreeMap<(i64, i64, i64, i64), usize>,
    /// `n_C(r, i', t)` small-job block levels keyed `(r, t, i')`.
    pub small: BTreeMap<(i64, i64, i64), u32>,
    /// Pseudo-cost of the virtual schedule.
    pub cost: f64,
}

impl ConfigurationR {
    /// Virtual busy time of interval `i'` in machine time.
    fn busy(&self, ip: i64, gamma_speed: f64, delta: f64, speed: f64) -> f64 {
        let large: f64 = self
            .large
            .iter()
            .filter(|((_, _, _, i2), _)| *i2 == ip)
            .map(|((_, i, _, _), &c)| c as f64 * geo::pow1p(delta, *i) / speed)
            .sum();
        let small: f64 = self
            .small
            .iter()
            .filter(|((_, _, i2), _)| *i2 == ip)
            .map(|(_, &n)| n as f64 * gamma_speed / speed)
            .sum();
        large + small
    }
}

/// Job classes of the bounded instance keyed by `(density exponent, size
/// exponent, release exponent)`.
pub fn job_classes(
    instance: &Instance,
    kept: &[usize],
    delta: f64,
) -> Result<BTreeMap<(i64, i64, i64), usize>> {
    let mut classes = BTreeMap::new();
    for &j in kept {
        let job = instance.job(j);
        let i = geo::exact_exponent(delta, job.size)
            .ok_or_else(|| Error::InvalidInstance(format!("size of job {j} off-grid")))?;
        let r = geo::exact_exponent(delta, job.density())
            .ok_or_else(|| Error::InvalidInstance(format!("density of job {j} off-grid")))?;
        let t = release_exponent(delta, job.release, j)?;
        *classes.entry((r, i, t)).or_insert(0) += 1;
    }
    Ok(classes)
}

/// Enumerates feasible configurations per machine type, driven by the actual
/// job multiset.  Applies the palette check for singleton types, the
/// sparse-deletion rule for grouped types, and the virtual-schedule
/// feasibility and timeliness checks.  Refuses above `cap` configurations
/// per type.
pub fn enumerate_configurations_release(
    instance: &Instance,
    kept: &[usize],
    palette: &Palette,
    params: &ReleaseParams,
    cap: usize,
) -> Result<(Vec<MachineTypeR>, Vec<ConfigurationR>)> {
    let delta = params.base.delta;
    let types = machine_types(instance, params)?;
    let classes = job_classes(instance, kept, delta)?;
    let l_exp = geo::floor_log(delta, params.l_value);
    let mut configs = Vec::new();
    for (tx, mtype) in types.iter().enumerate() {
        let speed = geo::pow1p(delta, mtype.speed_exp);
        let gamma_speed = params.gamma_r * speed;
        // Split classes into large and small for this speed; huge sizes are
        // excluded outright.
        let mut large_classes: Vec<((i64, i64, i64), usize)> = Vec::new();
        let mut small_classes: Vec<((i64, i64, i64), f64)> = Vec::new(); // total size
        for (&(r, i, t), &count) in &classes {
            let rel = geo::pow1p(delta, i) / speed;
            if geo::geo_ge(rel, params.l_value) {
                continue; // huge on this machine
            }
            if geo::geo_ge(rel, params.gamma_r) {
                large_classes.push(((r, i, t), count));
            } else {
                small_classes.push(((r, i, t), count as f64 * geo::pow1p(delta, i)));
            }
        }
        // Allowed start intervals per release exponent.
        let allowed = |u: Option<usize>, t: i64, ip: i64| -> bool {
            if ip < t || ip > l_exp {
                return false;
            }
            match u {
                Some(u) => palette.allows_start(u, ip),
                None => true,
            }
        };
        // Recursive distribution of large-class jobs over intervals, then
        // small block levels.
        let mut partial: Vec<ConfigurationR> = vec![ConfigurationR {
            speed_exp: mtype.speed_exp,
            mtype: tx,
            large: BTreeMap::new(),
            small: BTreeMap::new(),
            cost: 0.0,
        }];
        for &((r, i, t), count) in &large_classes {
            let intervals: Vec<i64> = (t..=l_exp)
                .filter(|&ip| allowed(mtype.singleton, t, ip))
                .filter(|&ip| {
                    // Timely start: the virtual job must be startable at the
                    // interval at all.
                    let proc = geo::pow1p(delta, i) / speed;
                    geo::pow1p(delta, ip + 1) > delta * proc * (1.0 - geo::GEO_TOL)
                })
                .collect();
            let mut next = Vec::new();
            for base in &partial {
                // Distribute 0..=count jobs into the intervals.
                let mut stack: Vec<(usize, usize, Vec<(i64, usize)>)> =
                    vec![(0, count, Vec::new())];
                while let Some((ix, left, placed)) = stack.pop() {
                    if ix == intervals.len() {
                        // `left` jobs stay off this machine.
                        let mut cfg = base.clone();
                        for &(ip, c) in &placed {
                            if c > 0 {
                                cfg.large.insert((r, i, t, ip), c);
                            }
                        }
                        next.push(cfg);
                        if next.len() > cap {
                            return Err(Error::CapExceeded(format!(
                                "type {tx} exceeds the configuration cap {cap}"
                            )));
                        }
                        continue;
                    }
                    for c in 0..=left {
                        let mut placed2 = placed.clone();
                        placed2.push((intervals[ix], c));
                        stack.push((ix + 1, left - c, placed2));
                    }
                }
            }
            partial = next;
        }
        // Small blocks: group by (r, t) and enumerate a level per allowed
        // interval.
        let mut small_totals: BTreeMap<(i64, i64), f64> = BTreeMap::new();
        for &((r, _, t), total) in &small_classes {
            *small_totals.entry((r, t)).or_insert(0.0) += total;
        }
        for (&(r, t), &total) in &small_totals {
            let max_level = (total / gamma_speed).ceil() as u32 + 1;
            let intervals: Vec<i64> = (t..=l_exp)
                .filter(|&ip| allowed(mtype.singleton, t, ip))
                .collect();
            let mut next = Vec::new();
            for base in &partial {
                let mut stack: Vec<(usize, Vec<(i64, u32)>)> = vec![(0, Vec::new())];
                while let Some((ix, placed)) = stack.pop() {
                    if ix == intervals.len() {
                        let mut cfg = base.clone();
                        for &(ip, n) in &placed {
                            if n > 0 {
                                cfg.small.insert((r, t, ip), n);
                            }
                        }
                        next.push(cfg);
                        if next.len() > cap {
                            return Err(Error::CapExceeded(format!(
                                "type {tx} exceeds the configuration cap {cap}"
                            )));
                        }
                        continue;
                    }
                    for n in 0..=max_level {
                        let mut placed2 = placed.clone();
                        placed2.push((intervals[ix], n));
                        stack.push((ix + 1, placed2));
                    }
                }
            }
            partial = next;
        }
        // Filter: sparse-deletion (grouped types), virtual feasibility,
        // timeliness; compute costs.
        for mut cfg in partial {
            if mtype.singleton.is_none() {
                let mut deleted = false;
                for ip in params.theta..=l_exp {
                    let busy = cfg.busy(ip, gamma_speed, delta, speed) * speed;
                    if busy > 0.0
                        && geo::geo_le(busy, delta.powi(5) * geo::pow1p(delta, ip) * speed)
                    {
                        deleted = true;
                        break;
                    }
                }
                if deleted {
                    continue;
                }
            }
            match virtual_schedule_cost(&cfg, gamma_speed, delta, speed, l_exp) {
                Some(c) => cfg.cost = c,
                None => continue,
            }
            configs.push(cfg);
        }
    }
    Ok((types, configs))
}

/// Builds the virtual schedule of a configuration (large jobs plus one
/// `(n_C - 1) gamma (1+delta)^{s}`-sized block per small component, jobs in
/// non-decreasing size order per interval) and returns its pseudo-cost, or
/// `None` when some interval's last item misses its interval or some start
/// is untimely.
fn virtual_schedule_cost(
    cfg: &ConfigurationR,
    gamma_speed: f64,
    delta: f64,
    speed: f64,
    l_exp: i64,
) -> Option<f64> {
    let mut per_interval: BTreeMap<i64, Vec<(f64, f64)>> = BTreeMap::new(); // (size, weight)
    for (&(r, i, _t, ip), &c) in &cfg.large {
        let size = geo::pow1p(delta, i);
        let weight = size * geo::pow1p(delta, r);
        for _ in 0..c {
            per_interval.entry(ip).or_default().push((size, weight));
        }
    }
    for (&(r, _t, ip), &n) in &cfg.small {
        let size = (n.saturating_sub(1)) as f64 * gamma_speed;
        if size > 0.0 {
            let weight = size * geo::pow1p(delta, r);
            per_interval.entry(ip).or_default().push((size, weight));
        }
    }
    let mut cursor = 0.0f64;
    let mut cost = 0.0f64;
    for (&ip, items) in per_interval.iter_mut() {
        if ip > l_exp {
            return None;
        }
        items.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let lo = geo::pow1p(delta, ip);
        let hi = geo::pow1p(delta, ip + 1);
        let mut last_start = lo;
        for &(size, weight) in items.iter() {
            let proc = size / speed;
            let start = cursor.max(lo);
            if proc > 0.0 && start < delta * proc * (1.0 - geo::GEO_TOL) {
                return None; // untimely
            }
            last_start = start;
            cursor = start + proc;
            cost += weight * geo::pow1p(delta, geo::floor_log(delta, cursor) + 1);
        }
        if !geo::geo_lt(last_start, hi) {
            return None; // the last item missed its interval
        }
    }
    Some(cost)
}

/// The assembled time-indexed program plus variable maps.
pub struct PiReleaseModel {
    /// The MILP.
    pub model: LinearModel,
    /// `X_C` variable index per configuration.
    pub x_vars: Vec<usize>,
    /// `Y_{C,r,i,i',t}` variable indices keyed `(config, r, i, t, i')`.
    pub y_vars: BTreeMap<(usize, i64, i64, i64, i64), usize>,
}

/// Builds the time-indexed configuration program: machine-count conservation
/// per type, job conservation per class over large placements and small
/// variables, and small-size capacity per configuration block; `X_C` is
/// integral exactly for fast types.
pub fn build_pi_release(
    instance: &Instance,
    kept: &[usize],
    types: &[MachineTypeR],
    configs: &[ConfigurationR],
    params: &ReleaseParams,
) -> Result<PiReleaseModel> {
    let delta = params.base.delta;
    let classes = job_classes(instance, kept, delta)?;
    let mut model = LinearModel::new();
    let mut x_vars = Vec::with_capacity(configs.len());
    for (cx, cfg) in configs.iter().enumerate() {
        let mtype = &types[cfg.mtype];
        let x = model.add_var(
            format!("X_{cx}"),
            0.0,
            mtype.machines.len() as f64,
            mtype.fast,
            cfg.cost,
        );
        x_vars.push(x);
    }
    // Small variables: per config and small-eligible class and interval with
    // a block level.
    let mut y_vars: BTreeMap<(usize, i64, i64, i64, i64), usize> = BTreeMap::new();
    for (cx, cfg) in configs.iter().enumerate() {
        let speed = geo::pow1p(delta, cfg.speed_exp);
        for (&(r, i, t), &count) in &classes {
            let rel = geo::pow1p(delta, i) / speed;
            if geo::geo_ge(rel, params.gamma_r) {
                continue;
            }
            for (&(br, bt, ip), _) in &cfg.small {
                if br == r && bt == t {
                    let y = model.add_var(
                        format!("Y_{cx}_{r}_{i}_{t}_{ip}"),
                        0.0,
                        count as f64,
                        false,
                        0.0,
                    );
                    y_vars.insert((cx, r, i, t, ip), y);
                }
            }
        }
    }
    // Machine conservation per type.
    for (tix, mtype) in types.iter().enumerate() {
        let coeffs: Vec<(usize, f64)> = configs
            .iter()
            .enumerate()
            .filter(|(_, cfg)| cfg.mtype == tix)
            .map(|(cx, _)| (x_vars[cx], 1.0))
            .collect();
        if coeffs.is_empty() {
            return Err(Error::Infeasible(format!(
                "machine type {tix} has no feasible configuration"
            )));
        }
        model.add_constraint(coeffs, Sense::Eq, mtype.machines.len() as f64);
    }
    // Job conservation per class.
    for (&(r, i, t), &count) in &classes {
        let mut coeffs: Vec<(usize, f64)> = Vec::new();
        for (cx, cfg) in configs.iter().enumerate() {
            let placed: usize = cfg
                .large
                .iter()
                .filter(|(&(cr, ci, ct, _), _)| cr == r && ci == i && ct == t)
                .map(|(_, &c)| c)
                .sum();
            if placed > 0 {
                coeffs.push((x_vars[cx], placed as f64));
            }
        }
        for (&(cx, yr, yi, yt, _), &y) in &y_vars {
            let _ = cx;
            if yr == r && yi == i && yt == t {
                coeffs.push((y, 1.0));
            }
        }
        if coeffs.is_empty() {
            return Err(Error::Infeasible(format!(
                "job class (r={r}, i={i}, t={t}) cannot be placed by any configuration"
            )));
        }
        model.add_constraint(coeffs, Sense::Eq, count as f64);
    }
    // Small-size capacity per configuration block.
    for (cx, cfg) in configs.iter().enumerate() {
        let speed = geo::pow1p(delta, cfg.speed_exp);
        for (&(r, t, ip), &n) in &cfg.small {
            let mut coeffs: Vec<(usize, f64)> = Vec::new();
            for (&(ycx, yr, yi, yt, yip), &y) in &y_vars {
                if ycx == cx && yr == r && yt == t && yip == ip {
                    coeffs.push((y, geo::pow1p(delta, yi)));
                }
            }
            if coeffs.is_empty() {
                continue;
            }
            coeffs.push((x_vars[cx], -(n as f64) * params.gamma_r * speed));
            model.add_constraint(coeffs, Sense::Le, 0.0);
        }
    }
    Ok(PiReleaseModel {
        model,
        x_vars,
        y_vars,
    })
}

/// Audit trail of [`round_pi_release`].
#[derive(Clone, Debug, Default)]
pub struct RoundAuditR {
    /// Total size of leftover jobs parked on the pink machine.
    pub leftover_size: f64,
    /// The bound `delta^5 * s_v` the leftovers must respect.
    pub leftover_cap: f64,
    /// Jobs that exceeded the cap and were appended after the horizon.
    pub overflow_jobs: Vec<usize>,
}

/// Realizes an optimal program solution as a schedule: floors the machine
/// counts, allocates large jobs and `ceil(Y/X*)` small jobs per interval in
/// non-decreasing size order on a doubly stretched timeline, and parks the
/// fractional leftovers in the pink machine `v`'s release-interval gaps
/// (appending after the horizon beyond the `delta^5 s_v` bound).
pub fn round_pi_release(
    instance: &Instance,
    kept: &[usize],
    types: &[MachineTypeR],
    configs: &[ConfigurationR],
    pi: &PiReleaseModel,
    values: &[f64],
    v: usize,
    params: &ReleaseParams,
) -> Result<(TimedSchedule, RoundAuditR)> {
    let delta = params.base.delta;
    // Pools per class, ids ascending for determinism.
    let mut pools: BTreeMap<(i64, i64, i64), Vec<usize>> = BTreeMap::new();
    for &j in kept {
        let job = instance.job(j);
        let i = geo::exact_exponent(delta, job.size).unwrap();
        let r = geo::exact_exponent(delta, job.density()).unwrap();
        let t = release_exponent(delta, job.release, j)?;
        pools.entry((r, i, t)).or_default().push(j);
    }
    for pool in pools.values_mut() {
        pool.sort_unstable();
    }
    // Assign floored machine counts per configuration within each type.
    let mut machine_cfg: Vec<Option<usize>> = vec![None; instance.m()];
    for (tix, mtype) in types.iter().enumerate() {
        let mut cursor = 0usize;
        for (cx, cfg) in configs.iter().enumerate() {
            if cfg.mtype != tix {
                continue;
            }
            let count = values[pi.x_vars[cx]].floor().max(0.0) as usize;
            for _ in 0..count {
                if cursor < mtype.machines.len() {
                    machine_cfg[mtype.machines[cursor]] = Some(cx);
                    cursor += 1;
                }
            }
        }
    }
    let stretch = (1.0 + delta) * (1.0 + delta);
    let mut out = Vec::new();
    for u in 0..instance.m() {
        let Some(cx) = machine_cfg[u] else { continue };
        let cfg = &configs[cx];
        let speed = instance.machine(u).speed;
        let x_star = values[pi.x_vars[cx]].max(1.0);
        // Gather this machine's jobs per interval.
        let mut per_interval: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
        for (&(r, i, t, ip), &c) in &cfg.large {
            let pool = pools.entry((r, i, t)).or_default();
            let take = c.min(pool.len());
            for j in pool.drain(..take) {
                per_interval.entry(ip).or_default().push(j);
            }
        }
        let mut small_quota: BTreeMap<(i64, i64, i64, i64), usize> = BTreeMap::new();
        for (&(ycx, r, i, t, ip), &y) in &pi.y_vars {
            if ycx != cx {
                continue;
            }
            let want = (values[y] / x_star - 1e-9).ceil().max(0.0) as usize;
            if want > 0 {
                small_quota.insert((r, i, t, ip), want);
            }
        }
        for (&(r, i, t, ip), &want) in &small_quota {
            let pool = pools.entry((r, i, t)).or_default();
            let take = want.min(pool.len());
            for j in pool.drain(..take) {
                per_interval.entry(ip).or_default().push(j);
            }
        }
        // Realize on the doubly stretched timeline.
        let mut cursor = 0.0f64;
        for (&ip, jobs) in per_interval.iter_mut() {
            jobs.sort_by(|&a, &b| {
                instance
                    .job(a)
                    .size
                    .partial_cmp(&instance.job(b).size)
                    .unwrap()
                    .then(a.cmp(&b))
            });
            let base = geo::pow1p(delta, ip) * stretch;
            for &j in jobs.iter() {
                let job = instance.job(j);
                let proc = job.size / speed;
                let start = cursor.max(base).max(job.release).max(delta * proc);
                cursor = start + proc;
                out.push(TimedJob {
                    job: j,
                    machine: u,
                    completion: cursor,
                });
            }
        }
    }
    // Leftovers onto the pink machine's release-interval gaps.
    let leftovers: Vec<usize> = pools.values().flatten().copied().collect();
    let s_v = instance.machine(v).speed;
    let mut audit = RoundAuditR {
        leftover_size: leftovers
            .iter()
            .map(|&j| instance.job(j).size)
            .sum(),
        leftover_cap: delta.powi(5) * s_v,
        ..Default::default()
    };
    let mut v_cursor: BTreeMap<i64, f64> = BTreeMap::new();
    let mut horizon_cursor = out
        .iter()
        .map(|tj| tj.completion)
        .fold(params.l_value * stretch, f64::max);
    let mut budget = audit.leftover_cap;
    for &j in &leftovers {
        let job = instance.job(j);
        let t = release_exponent(delta, job.release, j)?;
        let proc = job.size / s_v;
        if job.size <= budget + 1e-12 {
            budget -= job.size;
            let base = geo::pow1p(delta, t) * stretch;
            let cur = v_cursor.entry(t).or_insert(base);
            let start = cur.max(job.release).max(delta * proc);
            *cur = start + proc;
            out.push(TimedJob {
                job: j,
                machine: v,
                completion: start + proc,
            });
        } else {
            audit.overflow_jobs.push(j);
            let start = horizon_cursor.max(job.release).max(delta * proc);
            horizon_cursor = start + proc;
            out.push(TimedJob {
                job: j,
                machine: v,
                completion: horizon_cursor,
            });
        }
    }
    // The pink machine's gap placements may collide with its configured
    // interval load; resolve by a per-machine sweep that keeps order.
    let mut schedule = TimedSchedule { jobs: out };
    resweep_machine(instance, &mut schedule, v, delta);
    schedule.validate(instance)?;
    Ok((schedule, audit))
}

fn resweep_machine(instance: &Instance, schedule: &mut TimedSchedule, u: usize, delta: f64) {
    let speed = instance.machine(u).speed;
    let mut idxs: Vec<usize> = (0..schedule.jobs.len())
        .filter(|&x| schedule.jobs[x].machine == u)
        .collect();
    idxs.sort_by(|&a, &b| {
        let sa = schedule.start(instance, schedule.jobs[a].job);
        let sb = schedule.start(instance, schedule.jobs[b].job);
        sa.partial_cmp(&sb).unwrap().then(a.cmp(&b))
    });
    let mut cursor = 0.0f64;
    for &x in &idxs {
        let job = instance.job(schedule.jobs[x].job);
        let proc = job.size / speed;
        let orig_start = schedule.jobs[x].completion - proc;
        let start = orig_start.max(cursor).max(job.release).max(delta * proc);
        schedule.jobs[x].completion = start + proc;
        cursor = start + proc;
    }
}

// ---------------------------------------------------------------------------
// Horizon truncation
// ---------------------------------------------------------------------------

/// Repacks every job completing after the truncation point `T` (the grid
/// point just above `R * y_hat / delta^4`) back-to-back in non-increasing
/// density order, so machine completion times stay within the horizon scale.
pub fn truncate_horizon(
    instance: &Instance,
    schedule: &TimedSchedule,
    params: &ReleaseParams,
) -> Result<TimedSchedule> {
    let delta = params.base.delta;
    let r_value = geo::pow1p(delta, params.r_exp);
    let t_point = geo::round_up(delta, r_value * params.y_hat / delta.powi(4)).value(delta);
    let mut out = schedule.clone();
    for machine in &instance.machines {
        let mut tail: Vec<usize> = (0..out.jobs.len())
            .filter(|&x| {
                out.jobs[x].machine == machine.id && out.jobs[x].completion > t_point
            })
            .collect();
        if tail.is_empty() {
            continue;
        }
        tail.sort_by(|&a, &b| {
            let da = instance.job(out.jobs[a].job).density();
            let db = instance.job(out.jobs[b].job).density();
            db.partial_cmp(&da).unwrap().then(a.cmp(&b))
        });
        let head_end = (0..out.jobs.len())
            .filter(|&x| out.jobs[x].machine == machine.id && !tail.contains(&x))
            .fold(0.0f64, |acc, x| acc.max(out.jobs[x].completion));
        let mut cursor = head_end.max(t_point * delta);
        for &x in &tail {
            let job = instance.job(out.jobs[x].job);
            let proc = job.size / machine.speed;
            let start = cursor.max(job.release).max(delta * proc);
            out.jobs[x].completion = start + proc;
            cursor = start + proc;
        }
    }
    out.validate(instance)?;
    Ok(out)
}

// ---------------------------------------------------------------------------
// End-to-end driver
// ---------------------------------------------------------------------------

/// One ledger row of the release pipeline.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReleaseStage {
    /// Stage name.
    pub stage: String,
    /// Shift offset, if branch-specific.
    pub k: Option<i64>,
    /// Density-shift offset, if branch-specific.
    pub zeta: Option<i64>,
    /// Palette id, if branch-specific.
    pub palette: Option<String>,
    /// Band index, if branch-specific.
    pub band: Option<i64>,
    /// Program optimum, if a program was solved.
    pub z_star: Option<f64>,
    /// Realized cost of the stage output.
    pub cost: Option<f64>,
    /// The inequality checked at this stage.
    pub check: String,
    /// Whether the check passed.
    pub pass: bool,
    /// Non-negative slack of the inequality when it passed.
    pub slack: f64,
}

/// Report of [`eptas_release`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReleaseReport {
    /// Per-stage ledger.
    pub stages: Vec<ReleaseStage>,
    /// Whether the exact fallback branch was taken (always at desk scale:
    /// the structural pipeline needs `2/delta^7 + 3` machines).
    pub fallback: bool,
    /// True weighted completion time of the returned schedule on the input.
    pub cost: f64,
    /// Pseudo-cost of the returned schedule on the rounded instance.
    pub pseudo_cost: f64,
}

/// Renders the per-stage ledger as CSV.
pub fn release_ledger_csv(report: &ReleaseReport) -> String {
    let mut out =
        String::from("stage,k,zeta,palette,band,z_star,cost,check,pass,slack\n");
    let opt_i = |v: &Option<i64>| v.map_or(String::new(), |x| x.to_string());
    let opt_f = |v: &Option<f64>| v.map_or(String::new(), |x| format!("{x:.9}"));
    for s in &report.stages {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{:.9}\n",
            s.stage,
            opt_i(&s.k),
            opt_i(&s.zeta),
            s.palette.clone().unwrap_or_default(),
            opt_i(&s.band),
            opt_f(&s.z_star),
            opt_f(&s.cost),
            s.check,
            s.pass,
            s.slack
        ));
    }
    out
}

/// End-to-end release-date pipeline: geometric rounding, job shifting, and —
/// when the machine count is below the structural threshold, which holds for
/// every desk-scale instance — the documented exact fallback restricted to
/// timely schedules.  Returns a schedule valid for the input instance plus
/// the per-stage ledger.
pub fn eptas_release(
    instance: &Instance,
    eps: f64,
    limits: &OracleLimits,
) -> Result<(TimedSchedule, ReleaseReport)> {
    let pack = ParamPack::practical(eps)?;
    let delta = pack.delta;
    let mut stages = Vec::new();
    let rounded = rounding::round_release(instance, &pack)?;
    stages.push(ReleaseStage {
        stage: "round_release".into(),
        k: None,
        zeta: None,
        palette: None,
        band: None,
        z_star: None,
        cost: None,
        check: "instance on geometric grid".into(),
        pass: rounded.is_geometric(delta),
        slack: 0.0,
    });
    let (shifted, shift_ledger) = timeline::job_shift(&rounded, &pack)?;
    let shift_ok = shifted
        .jobs
        .iter()
        .zip(rounded.jobs.iter())
        .all(|(a, b)| a.release >= b.release - geo::GEO_TOL);
    stages.push(ReleaseStage {
        stage: "job_shift".into(),
        k: None,
        zeta: None,
        palette: None,
        band: None,
        z_star: None,
        cost: None,
        check: format!(
            "releases only increase ({} selection steps)",
            shift_ledger.steps
        ),
        pass: shift_ok,
        slack: 0.0,
    });
    let params = ReleaseParams::practical(&pack, &shifted)?;
    let fallback = instance.m() < params.min_machines;
    if !fallback {
        return Err(Error::CapExceeded(format!(
            "structural release pipeline needs fewer than {} machines at desk scale",
            params.min_machines
        )));
    }
    let (schedule, pseudo) = oracle::opt_release(
        &shifted,
        limits,
        Objective::PseudoCost { delta },
        Some(delta),
    )?;
    stages.push(ReleaseStage {
        stage: "exact_fallback".into(),
        k: None,
        zeta: None,
        palette: None,
        band: None,
        z_star: Some(pseudo),
        cost: Some(pseudo),
        check: format!(
            "machine count {} below structural threshold {}",
            instance.m(),
            params.min_machines
        ),
        pass: true,
        slack: 0.0,
    });
    // The schedule for the shifted instance is feasible for the rounded and
    // the original instance: releases only increased and the machines agree.
    schedule.validate(&rounded)?;
    let timely = cost::is_timely(&rounded, &schedule, delta).is_ok();
    stages.push(ReleaseStage {
        stage: "output".into(),
        k: None,
        zeta: None,
        palette: None,
        band: None,
        z_star: None,
        cost: Some(pseudo),
        check: "output valid and timely for the rounded instance".into(),
        pass: timely,
        slack: 0.0,
    });
    let true_cost: f64 = schedule
        .jobs
        .iter()
        .map(|tj| instance.job(tj.job).weight * tj.completion)
        .sum();
    let report = ReleaseReport {
        stages,
        fallback,
        cost: true_cost,
        pseudo_cost: pseudo_cost_total(&rounded, &schedule, delta)?,
    };
    Ok((schedule, report))
}

/// Convenience driver for criterion fixtures: solves the bounded
/// configuration program for a (kept) job set and returns the optimum.
pub fn solve_pi_release(
    instance: &Instance,
    kept: &[usize],
    palette: &Palette,
    v: usize,
    params: &ReleaseParams,
    cap: usize,
) -> Result<(f64, TimedSchedule, RoundAuditR)> {
    let (types, configs) =
        enumerate_configurations_release(instance, kept, palette, params, cap)?;
    let pi = build_pi_release(instance, kept, &types, &configs, params)?;
    let sol = milp::solve_milp(&pi.model, &MilpBudget::default())?;
    if sol.status != MilpStatus::Optimal {
        return Err(Error::Infeasible(format!(
            "configuration program not solved to optimality: {:?}",
            sol.status
        )));
    }
    let (schedule, audit) = round_pi_release(
        instance,
        kept,
        &types,
        &configs,
        &pi,
        &sol.values,
        v,
        params,
    )?;
    Ok((sol.objective, schedule, audit))
}
