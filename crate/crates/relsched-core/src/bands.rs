//! The no-release-dates approximation pipeline: scale guessing,
//! configuration enumeration, the configuration MILP, solution rounding, and
//! band combination.
//!
//! A *configuration* describes one machine's content at class granularity:
//! its work class `j1` (total work in `((1+δ)^{j1-2}, (1+δ)^{j1}]`), its
//! speed class `j2`, exact per-class counts of large jobs, and per-density
//! counts of small-job blocks of size `U(C) = γ (1+δ)^{j1-1}`.  The MILP
//! picks how many machines of each speed run each configuration and how the
//! small jobs are distributed over the reserved blocks; rounding turns an
//! optimal solution back into a concrete schedule with First-Fit packing.

use crate::cost::{block_gamma, cost_ordered};
use crate::error::{Error, Result};
use crate::geo;
use crate::instance::{Instance, Job};
use crate::milp::{solve_milp, LinearModel, MilpBudget, MilpSolution, MilpStatus, Sense};
use crate::params::ParamPack;
use crate::rounding::{density_shift, effective_zetas, round_no_release, split_into_bands};
use crate::schedule::{natural_order, OrderedSchedule};
use num_bigint::BigUint;
use std::collections::BTreeMap;

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

/// A work/speed class threshold.  The analysis-exact slow-machine threshold
/// is `-(1/δ)^{(1/δ)^{300}}`: its *exponent* is a big integer, and the value
/// lies below every representable class index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ClassThreshold {
    /// A plain class index.
    Index(i64),
    /// `-(base^exponent) - offset`; compares below every `i64` class index.
    HugeNegative {
        /// Power base (`1/δ` as an integer).
        base: u64,
        /// Power exponent (itself a power like `(1/δ)^{300}`).
        exponent: BigUint,
        /// Additive offset subtracted after negation.
        offset: u64,
    },
}

impl ClassThreshold {
    /// Whether the threshold is strictly below the class index `j`.
    pub fn below(&self, j: i64) -> bool {
        match self {
            ClassThreshold::Index(g) => *g < j,
            // base ≥ 2 and exponent ≥ (1/δ)^300 put the value far below
            // i64::MIN; every representable class index is above it.
            ClassThreshold::HugeNegative { .. } => true,
        }
    }
}

/// Constants of the no-release pipeline.
#[derive(Clone, Debug)]
pub struct NRParams {
    /// Small-job block fraction `γ`.
    pub gamma: f64,
    /// `⌈log_{1+δ} γ⌉`; sizes with exponent `i ≥ j1 - 1 + ⌈log γ⌉` are the
    /// large jobs of a configuration with work class `j1`.
    pub gamma_ceil_log: i64,
    /// Heavy threshold `g`: a configuration is heavy iff `j1 > g`.
    pub g_delta: ClassThreshold,
    /// Fast threshold `f < g`: a machine speed class is fast iff `j2 > f`.
    pub f_delta: ClassThreshold,
    /// Refusal cap on the number of enumerated configurations.
    pub config_cap: usize,
}

impl NRParams {
    /// Runnable constants: `g = -⌈1/δ³⌉`, `f = g - ⌈2/δ²⌉`,
    /// `γ = δ³/(1+δ)^y`.
    pub fn practical(pack: &ParamPack) -> NRParams {
        let inv = pack.inv_delta as i64;
        let g = -(inv * inv * inv);
        let f = g - 2 * inv * inv;
        let gamma = pack.delta.powi(3) / pack.pow(pack.y);
        NRParams {
            gamma,
            gamma_ceil_log: ceil_log_guarded(pack, gamma),
            g_delta: ClassThreshold::Index(g),
            f_delta: ClassThreshold::Index(f),
            config_cap: 1_000_000,
        }
    }

    /// Analysis-exact constants: `γ = δ^{12}/(1+δ)^y`,
    /// `g = -(1/δ)^{(1/δ)^{300}}`, `f = g - ⌈2/δ²⌉`.  These exist for
    /// formula-level tests; enumeration under them exceeds any cap.
    pub fn faithful(pack: &ParamPack) -> NRParams {
        let exponent = BigUint::from(pack.inv_delta).pow(300);
        // γ underflows to 0 for large y; its ceil-log stays finite via the
        // closed form  log γ = 12·log_{1+δ} δ - y.
        let log_gamma = 12.0 * geo::log1p_base(pack.delta, pack.delta) - pack.y as f64;
        let gamma = pack.delta.powi(12) / pack.pow(pack.y);
        let inv = pack.inv_delta;
        NRParams {
            gamma,
            gamma_ceil_log: log_gamma.ceil() as i64,
            g_delta: ClassThreshold::HugeNegative {
                base: inv,
                exponent: exponent.clone(),
                offset: 0,
            },
            f_delta: ClassThreshold::HugeNegative {
                base: inv,
                exponent,
                offset: 2 * inv * inv,
            },
            config_cap: 1_000_000,
        }
    }
}

/// `⌈log_{1+δ} x⌉` for a positive non-grid value, with a verification nudge.
fn ceil_log_guarded(pack: &ParamPack, x: f64) -> i64 {
    let mut k = geo::log1p_base(pack.delta, x).ceil() as i64;
    while geo::geo_lt(pack.pow(k), x) {
        k += 1;
    }
    while geo::geo_ge(pack.pow(k - 1), x) {
        k -= 1;
    }
    k
}

// ---------------------------------------------------------------------------
// Scale guesses
// ---------------------------------------------------------------------------

/// One guess `(j, b)`: the most loaded fastest machine carries work in
/// `D_{j,b} = [(1+δ)^{b-1} p_j, (1+δ)^b p_j)`; dividing all sizes by
/// `(1+δ)^b p_j` lands that work in `[1/(1+δ), 1)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScaleGuess {
    /// The job id `j` anchoring the interval.
    pub job: usize,
    /// The shift `b ∈ [1, n/δ]`.
    pub shift: i64,
    /// Interval lower end `(1+δ)^{b-1} p_j` (inclusive).
    pub low: f64,
    /// Interval upper end `(1+δ)^b p_j` (exclusive); also the divisor.
    pub high: f64,
}

/// All `n²/δ` scale guesses of an instance, ordered by `(job, shift)`.
pub fn scale_guesses(instance: &Instance, pack: &ParamPack) -> Vec<ScaleGuess> {
    let n = instance.n() as i64;
    let mut out = Vec::new();
    let mut jobs: Vec<&Job> = instance.jobs.iter().collect();
    jobs.sort_by_key(|j| j.id);
    for j in jobs {
        for b in 1..=(n * pack.inv_delta as i64) {
            out.push(ScaleGuess {
                job: j.id,
                shift: b,
                low: j.size * pack.pow(b - 1),
                high: j.size * pack.pow(b),
            });
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Grid view: the instance regrouped by exact size/density/speed classes
// ---------------------------------------------------------------------------

/// Class-level view of a grid instance: jobs keyed by `(r, i)` where `r` is
/// the density exponent relative to the minimum density present and `i` the
/// absolute size exponent; machines keyed by speed exponent relative to the
/// fastest machine.
struct GridView {
    /// `(r, i) -> job ids` (ascending id).
    classes: BTreeMap<(i64, i64), Vec<usize>>,
    /// `(r, i) -> (size, weight)` of one class member (all members agree).
    class_dims: BTreeMap<(i64, i64), (f64, f64)>,
    /// Normalized speed exponent `j2 ≤ 0` → machine indices (instance order).
    speed_groups: BTreeMap<i64, Vec<usize>>,
    /// Normalized speed exponent → actual machine speed.
    speed_value: BTreeMap<i64, f64>,
    /// Total work (sum of sizes).
    total_work: f64,
    /// Smallest size exponent present, if any job exists.
    min_size_exp: Option<i64>,
}

fn grid_view(instance: &Instance, pack: &ParamPack) -> Result<GridView> {
    let need = |x: f64, what: &str, id: usize| {
        geo::exact_exponent(pack.delta, x).ok_or_else(|| {
            Error::InvalidInstance(format!(
                "{what} {x} of entity {id} is not a (1+δ)-power; round the instance first"
            ))
        })
    };
    let mut dens_exp: Vec<(usize, i64, i64)> = Vec::new(); // (job id, e_dens, e_size)
    for j in &instance.jobs {
        let ep = need(j.size, "size", j.id)?;
        let ew = need(j.weight, "weight", j.id)?;
        dens_exp.push((j.id, ew - ep, ep));
    }
    let d_min = dens_exp.iter().map(|&(_, d, _)| d).min();
    let mut classes: BTreeMap<(i64, i64), Vec<usize>> = BTreeMap::new();
    let mut class_dims = BTreeMap::new();
    for (id, d, i) in dens_exp {
        let key = (d - d_min.unwrap(), i);
        classes.entry(key).or_default().push(id);
        let job = instance.job(id);
        class_dims.entry(key).or_insert((job.size, job.weight));
    }
    for ids in classes.values_mut() {
        ids.sort_unstable();
    }
    let mut speed_exps = Vec::new();
    for mach in &instance.machines {
        speed_exps.push(need(mach.speed, "speed", mach.id)?);
    }
    let top = *speed_exps.iter().max().expect("instances have machines");
    let mut speed_groups: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
    let mut speed_value = BTreeMap::new();
    for (idx, e) in speed_exps.iter().enumerate() {
        speed_groups.entry(e - top).or_default().push(idx);
        speed_value.entry(e - top).or_insert(instance.machines[idx].speed);
    }
    Ok(GridView {
        classes,
        class_dims,
        speed_groups,
        speed_value,
        total_work: instance.jobs.iter().map(|j| j.size).sum(),
        min_size_exp: instance
            .jobs
            .iter()
            .map(|j| geo::exact_exponent(pack.delta, j.size).unwrap())
            .min(),
    })
}

// ---------------------------------------------------------------------------
// Configurations
// ---------------------------------------------------------------------------

/// One machine-content template.  See the module docs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigurationNR {
    /// Work class: total work in `((1+δ)^{j1-2}, (1+δ)^{j1}]`.
    pub j1: i64,
    /// Speed class (normalized; fastest machines have `j2 = 0`).
    pub j2: i64,
    /// Large-job counts keyed by `(r, i)` with `i` in
    /// `[j1 - 1 + ⌈log γ⌉, j1]`.
    pub n_large: BTreeMap<(i64, i64), u32>,
    /// Small-block counts `t_r` keyed by density class `r`.
    pub t_small: BTreeMap<i64, u32>,
}

impl ConfigurationNR {
    /// Load class `j3 = j1 - j2`.
    pub fn j3(&self) -> i64 {
        self.j1 - self.j2
    }

    /// Small-job threshold `U(C) = γ (1+δ)^{j1-1}`.
    pub fn u_threshold(&self, pack: &ParamPack, nr: &NRParams) -> f64 {
        nr.gamma * pack.pow(self.j1 - 1)
    }

    /// Lowest large size exponent `j1 - 1 + ⌈log γ⌉`.
    pub fn large_floor(&self, nr: &NRParams) -> i64 {
        self.j1 - 1 + nr.gamma_ceil_log
    }

    /// Counted work: exact large sizes plus `t_r` blocks of `U(C)` each.
    pub fn work(&self, pack: &ParamPack, nr: &NRParams) -> f64 {
        let large: f64 = self
            .n_large
            .iter()
            .map(|(&(_, i), &n)| n as f64 * pack.pow(i))
            .sum();
        let blocks: f64 = self
            .t_small
            .iter()
            .map(|(_, &t)| t as f64 * self.u_threshold(pack, nr))
            .sum();
        large + blocks
    }

    /// Heavy iff `j1 > g`.
    pub fn is_heavy(&self, nr: &NRParams) -> bool {
        nr.g_delta.below(self.j1)
    }

    /// Fast iff `j2 > f`.
    pub fn is_fast(&self, nr: &NRParams) -> bool {
        nr.f_delta.below(self.j2)
    }
}

/// Enumerates every valid configuration of a grid instance: all `(j1, j2)`
/// class pairs within the load bound `(1+δ)^{j3-2} < 2/δ`, with large-job
/// counts limited by the jobs actually present and block counts by the small
/// work actually present.  Refuses with the count when the cap is exceeded.
pub fn enumerate_configurations(
    instance: &Instance,
    pack: &ParamPack,
    nr: &NRParams,
) -> Result<Vec<ConfigurationNR>> {
    let view = grid_view(instance, pack)?;
    let mut out = Vec::new();
    let Some(min_i) = view.min_size_exp else {
        return Ok(out);
    };
    let j1_hi = geo::ceil_log(pack.delta, view.total_work) + 1;
    let two_over_delta = 2.0 * pack.inv_delta as f64;
    let ln1p = pack.delta.ln_1p();
    for (&j2, _) in &view.speed_groups {
        for j1 in min_i..=j1_hi {
            // Load bound (1+δ)^{j1-j2-2} < 2/δ, compared in log space.
            if ((j1 - j2 - 2) as f64) * ln1p >= two_over_delta.ln() - 1e-12 {
                continue;
            }
            let u = nr.gamma * pack.pow(j1 - 1);
            let large_floor = j1 - 1 + nr.gamma_ceil_log;
            let window_low = pack.pow(j1 - 2);
            let window_high = pack.pow(j1);
            // Large classes available for this work class, largest size first
            // for effective pruning.
            let mut larges: Vec<((i64, i64), u32, f64)> = view
                .classes
                .iter()
                .filter(|(&(_, i), _)| i >= large_floor && i <= j1)
                .map(|(&key, ids)| (key, ids.len() as u32, pack.pow(key.1)))
                .collect();
            larges.sort_by(|a, b| b.2.partial_cmp(&a.2).unwrap().then(a.0.cmp(&b.0)));
            // Density classes that have small jobs for this work class, with
            // a cap from both (1+δ)/γ and the small work present.
            let mut small_caps: BTreeMap<i64, u32> = BTreeMap::new();
            for (&(r, i), ids) in &view.classes {
                if i < large_floor {
                    let work = ids.len() as f64 * pack.pow(i);
                    *small_caps.entry(r).or_insert(0) += (work / u).floor() as u32 + 1;
                }
            }
            let hard_cap = ((1.0 + pack.delta) / nr.gamma).min(u32::MAX as f64) as u32;
            let smalls: Vec<(i64, u32)> = small_caps
                .into_iter()
                .map(|(r, c)| (r, c.min(hard_cap)))
                .collect();
            dfs_configs(
                pack, nr, &mut out, j1, j2, &larges, &smalls, 0, 0.0, u, window_low, window_high,
                &mut BTreeMap::new(),
                &mut BTreeMap::new(),
            )?;
        }
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn dfs_configs(
    pack: &ParamPack,
    nr: &NRParams,
    out: &mut Vec<ConfigurationNR>,
    j1: i64,
    j2: i64,
    larges: &[((i64, i64), u32, f64)],
    smalls: &[(i64, u32)],
    pos: usize,
    work: f64,
    u: f64,
    window_low: f64,
    window_high: f64,
    n_large: &mut BTreeMap<(i64, i64), u32>,
    t_small: &mut BTreeMap<i64, u32>,
) -> Result<()> {
    if pos < larges.len() {
        let (key, avail, size) = larges[pos];
        let mut n = 0u32;
        loop {
            let w = work + n as f64 * size;
            if n > avail || geo::geo_lt(window_high, w) {
                break;
            }
            if n > 0 {
                n_large.insert(key, n);
            }
            dfs_configs(
                pack, nr, out, j1, j2, larges, smalls, pos + 1, w, u, window_low, window_high,
                n_large, t_small,
            )?;
            n_large.remove(&key);
            n += 1;
        }
        return Ok(());
    }
    let spos = pos - larges.len();
    if spos < smalls.len() {
        let (r, cap) = smalls[spos];
        let mut t = 0u32;
        loop {
            let w = work + t as f64 * u;
            if t > cap || geo::geo_lt(window_high, w) {
                break;
            }
            if t > 0 {
                t_small.insert(r, t);
            }
            dfs_configs(
                pack, nr, out, j1, j2, larges, smalls, pos + 1, w, u, window_low, window_high,
                n_large, t_small,
            )?;
            t_small.remove(&r);
            t += 1;
        }
        return Ok(());
    }
    // Leaf: accept when the counted work lands in the window.
    if geo::geo_lt(window_low, work) && geo::geo_le(work, window_high) {
        if out.len() >= nr.config_cap {
            return Err(Error::CapExceeded(format!(
                "configuration count exceeds the cap of {}",
                nr.config_cap
            )));
        }
        out.push(ConfigurationNR {
            j1,
            j2,
            n_large: n_large.clone(),
            t_small: t_small.clone(),
        });
    }
    Ok(())
}

/// Threshold cost of a configuration's canonical content: the listed large
/// jobs in natural order interleaved with one equal-density block of size
/// `t_r U(C)` per density class, run back-to-back on a machine of the
/// configuration's speed.  Large jobs contribute full weighted completion,
/// blocks contribute their Γ-value.
pub fn config_cost(
    config: &ConfigurationNR,
    instance: &Instance,
    pack: &ParamPack,
    nr: &NRParams,
) -> Result<f64> {
    let view = grid_view(instance, pack)?;
    let speed = *view.speed_value.get(&config.j2).ok_or_else(|| {
        Error::InvalidParams(format!("no machine with speed class {}", config.j2))
    })?;
    let d_min = instance
        .jobs
        .iter()
        .map(|j| j.density())
        .fold(f64::INFINITY, f64::min);
    // Items: (density, size, weight, is_block), sorted in natural order.
    let mut items: Vec<(f64, f64, f64, bool)> = Vec::new();
    for (&(r, i), &n) in &config.n_large {
        let (size, weight) = *view.class_dims.get(&(r, i)).ok_or_else(|| {
            Error::InvalidParams(format!("no job class (r={r}, i={i}) in instance"))
        })?;
        for _ in 0..n {
            items.push((weight / size, size, weight, false));
        }
    }
    let u = config.u_threshold(pack, nr);
    for (&r, &t) in &config.t_small {
        let density = d_min * pack.pow(r);
        let size = t as f64 * u;
        items.push((density, size, density * size, true));
    }
    items.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap()
            .then(b.1.partial_cmp(&a.1).unwrap())
    });
    let mut t = 0.0;
    let mut total = 0.0;
    for (density, size, weight, is_block) in items {
        if is_block {
            total += block_gamma(size, density, t, speed);
            t += size / speed;
        } else {
            t += size / speed;
            total += weight * t;
        }
    }
    Ok(total)
}

// ---------------------------------------------------------------------------
// The configuration MILP
// ---------------------------------------------------------------------------

/// The assembled configuration model with its variable maps.
pub struct PiModel {
    /// The underlying minimization model.
    pub model: LinearModel,
    /// Machine-count variable index per configuration (parallel slice).
    pub x_vars: Vec<usize>,
    /// Small-job flow variable index keyed by `(config index, r, i)`.
    pub y_vars: BTreeMap<(usize, i64, i64), usize>,
}

/// Builds the configuration model: minimize
/// `Σ cost(C) X_C + Σ w p/(2 s_C) Y_{r,i,C}` subject to machine counts per
/// speed, exact job conservation per class, block capacity
/// `Σ p_i Y_{r,i,C} ≤ (t_r(C)+1) U(C) X_C`, and at least one fastest-speed
/// machine with work class in `{-1, 0}` (the scale-guess anchor).  `X_C` is
/// integral iff `C` is heavy or fast.
pub fn build_pi(
    instance: &Instance,
    configs: &[ConfigurationNR],
    pack: &ParamPack,
    nr: &NRParams,
) -> Result<PiModel> {
    if !configs
        .iter()
        .any(|c| c.j2 == 0 && (c.j1 == 0 || c.j1 == -1))
    {
        return Err(Error::Infeasible(
            "no fastest-speed configuration with work class in {-1, 0}; scale guess unusable"
                .into(),
        ));
    }
    let view = grid_view(instance, pack)?;
    let mut model = LinearModel::new();
    let mut x_vars = Vec::with_capacity(configs.len());
    for (idx, c) in configs.iter().enumerate() {
        let cap = view.speed_groups[&c.j2].len() as f64;
        let cost = config_cost(c, instance, pack, nr)?;
        x_vars.push(model.add_var(
            format!("x_{idx}"),
            0.0,
            cap,
            c.is_heavy(nr) || c.is_fast(nr),
            cost,
        ));
    }
    let mut y_vars = BTreeMap::new();
    for (idx, c) in configs.iter().enumerate() {
        let speed = view.speed_value[&c.j2];
        for (&(r, i), ids) in &view.classes {
            if i < c.large_floor(nr) {
                let (size, weight) = view.class_dims[&(r, i)];
                let var = model.add_var(
                    format!("y_{idx}_{r}_{i}"),
                    0.0,
                    ids.len() as f64,
                    false,
                    weight * size / (2.0 * speed),
                );
                y_vars.insert((idx, r, i), var);
            }
        }
    }
    // Machine counts per speed class.
    for (&j2, machines) in &view.speed_groups {
        let coeffs: Vec<(usize, f64)> = configs
            .iter()
            .enumerate()
            .filter(|(_, c)| c.j2 == j2)
            .map(|(idx, _)| (x_vars[idx], 1.0))
            .collect();
        if !coeffs.is_empty() {
            model.add_constraint(coeffs, Sense::Le, machines.len() as f64);
        }
    }
    // Exact job conservation per class.
    for (&(r, i), ids) in &view.classes {
        let mut coeffs: Vec<(usize, f64)> = Vec::new();
        for (idx, c) in configs.iter().enumerate() {
            if let Some(&n) = c.n_large.get(&(r, i)) {
                coeffs.push((x_vars[idx], n as f64));
            }
            if let Some(&y) = y_vars.get(&(idx, r, i)) {
                coeffs.push((y, 1.0));
            }
        }
        model.add_constraint(coeffs, Sense::Eq, ids.len() as f64);
    }
    // Block capacity per (configuration, density class).
    for (idx, c) in configs.iter().enumerate() {
        let u = c.u_threshold(pack, nr);
        let mut by_density: BTreeMap<i64, Vec<(usize, f64)>> = BTreeMap::new();
        for (&(cidx, r, i), &var) in &y_vars {
            if cidx == idx {
                by_density.entry(r).or_default().push((var, pack.pow(i)));
            }
        }
        for (r, mut coeffs) in by_density {
            let t = c.t_small.get(&r).copied().unwrap_or(0);
            coeffs.push((x_vars[idx], -((t as f64 + 1.0) * u)));
            model.add_constraint(coeffs, Sense::Le, 0.0);
        }
    }
    // The scale-guess anchor: some fastest machine carries work near 1.
    let anchor: Vec<(usize, f64)> = configs
        .iter()
        .enumerate()
        .filter(|(_, c)| c.j2 == 0 && (c.j1 == 0 || c.j1 == -1))
        .map(|(idx, _)| (x_vars[idx], 1.0))
        .collect();
    model.add_constraint(anchor, Sense::Ge, 1.0);
    Ok(PiModel {
        model,
        x_vars,
        y_vars,
    })
}

// ---------------------------------------------------------------------------
// Rounding
// ---------------------------------------------------------------------------

/// Bookkeeping of the rounding step.
#[derive(Clone, Debug, Default)]
pub struct RoundLedger {
    /// Total size of jobs never demanded by any rounded configuration.
    pub unassigned_size: f64,
    /// Bound `Σ_{C light} 2 (1+δ)^{j1(C)}` the unassigned size must respect.
    pub unassigned_bound: f64,
    /// Total size of demanded jobs that overflowed every packing bin.
    pub overflow_size: f64,
}

/// Rounds an optimal model solution to a complete schedule.  Machine counts
/// are floored (identity for the integral heavy/fast configurations), small
/// flows are ceiled for heavy and scaled-floored for light configurations,
/// and the selected small jobs are First-Fit packed — per configuration and
/// density, non-increasing size, reserved blocks before the slack bin.
/// Leftover and overflowing jobs are appended to the fastest machine.
pub fn round_pi_solution(
    solution: &MilpSolution,
    instance: &Instance,
    configs: &[ConfigurationNR],
    pi: &PiModel,
    pack: &ParamPack,
    nr: &NRParams,
) -> Result<(OrderedSchedule, RoundLedger)> {
    let view = grid_view(instance, pack)?;
    let mut ledger = RoundLedger::default();
    let x_rounded: Vec<usize> = configs
        .iter()
        .enumerate()
        .map(|(idx, c)| {
            let x = solution.values[pi.x_vars[idx]];
            if c.is_heavy(nr) {
                x.round() as usize
            } else {
                (x + 1e-9).floor() as usize
            }
        })
        .collect();
    for (idx, c) in configs.iter().enumerate() {
        if !c.is_heavy(nr) {
            ledger.unassigned_bound += 2.0 * pack.pow(c.j1);
        }
        let _ = idx;
    }
    // Hand out machines per speed class in configuration order.
    let mut machine_of: Vec<Vec<usize>> = vec![Vec::new(); configs.len()];
    {
        let mut cursor: BTreeMap<i64, usize> = BTreeMap::new();
        for (idx, c) in configs.iter().enumerate() {
            let group = &view.speed_groups[&c.j2];
            let at = cursor.entry(c.j2).or_insert(0);
            for _ in 0..x_rounded[idx] {
                machine_of[idx].push(group[*at]);
                *at += 1;
            }
        }
    }
    let mut assigned: Vec<Vec<usize>> = vec![Vec::new(); instance.m()];
    let mut pools: BTreeMap<(i64, i64), Vec<usize>> = view.classes.clone();
    // Large jobs: exact counts per machine instance.
    for (idx, c) in configs.iter().enumerate() {
        for &mach in &machine_of[idx] {
            for (&key, &n) in &c.n_large {
                let pool = pools.get_mut(&key).expect("class exists");
                for _ in 0..n {
                    if let Some(id) = pool.first().copied() {
                        pool.remove(0);
                        assigned[mach].push(id);
                    }
                }
            }
        }
    }
    // Small jobs: select per rounded flow, then First-Fit pack into blocks.
    for (idx, c) in configs.iter().enumerate() {
        if machine_of[idx].is_empty() && !c.is_heavy(nr) {
            // No machine instance: scaled floor zeroes the flows.
            continue;
        }
        let u = c.u_threshold(pack, nr);
        let slack_cap = (3.0 * nr.gamma / pack.delta) * pack.pow(c.j1 - 1);
        let x_star = solution.values[pi.x_vars[idx]];
        let mut by_density: BTreeMap<i64, Vec<(i64, usize)>> = BTreeMap::new();
        for (&(cidx, r, i), &var) in &pi.y_vars {
            if cidx == idx {
                by_density.entry(r).or_default().push((i, var));
            }
        }
        for (r, mut classes) in by_density {
            classes.sort_by_key(|&(i, _)| std::cmp::Reverse(i));
            let mut items: Vec<usize> = Vec::new();
            for (i, var) in classes {
                let y = solution.values[var];
                let demand = if c.is_heavy(nr) {
                    (y - 1e-9).ceil().max(0.0) as usize
                } else if x_star > 1e-9 {
                    ((x_rounded[idx] as f64 / x_star) * y + 1e-9).floor() as usize
                } else {
                    0
                };
                let pool = pools.get_mut(&(r, i)).expect("class exists");
                let take = demand.min(pool.len());
                items.extend(pool.drain(..take));
            }
            // Bins: per machine instance a reserved block bin, then per
            // machine instance one slack bin.
            let t = c.t_small.get(&r).copied().unwrap_or(0);
            let mut bins: Vec<(usize, f64, f64)> = Vec::new(); // (machine, load, cap)
            for &mach in &machine_of[idx] {
                bins.push((mach, 0.0, t as f64 * u));
            }
            for &mach in &machine_of[idx] {
                bins.push((mach, 0.0, slack_cap));
            }
            for id in items {
                let size = instance.job(id).size;
                match bins
                    .iter_mut()
                    .find(|(_, load, cap)| geo::geo_le(*load + size, *cap))
                {
                    Some((mach, load, _)) => {
                        *load += size;
                        assigned[*mach].push(id);
                    }
                    None => {
                        ledger.overflow_size += size;
                        assigned[view.speed_groups[&0][0]].push(id);
                    }
                }
            }
        }
    }
    // Leftover pools: never demanded; append to the fastest machine.
    let fastest = view.speed_groups[&0][0];
    let mut extras: Vec<usize> = Vec::new();
    for (_, pool) in pools {
        for id in pool {
            ledger.unassigned_size += instance.job(id).size;
            extras.push(id);
        }
    }
    // Natural order per machine; appended extras form a trailing block.
    let mut machines = Vec::with_capacity(instance.m());
    for (mach, ids) in assigned.into_iter().enumerate() {
        let mut jobs: Vec<Job> = ids.iter().map(|&id| *instance.job(id)).collect();
        let mut ordered = natural_order(&jobs);
        if mach == fastest && !extras.is_empty() {
            jobs = extras.iter().map(|&id| *instance.job(id)).collect();
            ordered.extend(natural_order(&jobs));
        }
        machines.push(ordered);
    }
    let schedule = OrderedSchedule { machines };
    schedule.validate(instance)?;
    Ok((schedule, ledger))
}

// ---------------------------------------------------------------------------
// The bounded-ratio solver (one band)
// ---------------------------------------------------------------------------

/// Outcome statistics of a bounded-ratio solve.
#[derive(Clone, Debug)]
pub struct BandReport {
    /// Scale guesses enumerated.
    pub guesses_total: usize,
    /// Distinct scale divisors among them (equal divisors share one solve).
    pub distinct_scales: usize,
    /// Guesses for which the model was feasible and solved to optimality.
    pub solved: usize,
    /// Minimum model optimum over the solved guesses, in instance units.
    pub z_star_min: f64,
    /// The `(job, shift)` pair behind the returned schedule.
    pub chosen: Option<(usize, i64)>,
    /// Rounding bookkeeping of the returned schedule.
    pub round: RoundLedger,
}

/// Runs the full guess → model → round loop on one band instance and returns
/// the cheapest feasible schedule (measured on the band instance) with its
/// report.
pub fn solve_bounded_ratio(
    band: &Instance,
    pack: &ParamPack,
    nr: &NRParams,
) -> Result<(OrderedSchedule, BandReport)> {
    if band.n() == 0 {
        return Ok((
            OrderedSchedule::empty(band.m()),
            BandReport {
                guesses_total: 0,
                distinct_scales: 0,
                solved: 0,
                z_star_min: 0.0,
                chosen: None,
                round: RoundLedger::default(),
            },
        ));
    }
    let delta = pack.delta;
    let top = geo::exact_exponent(delta, band.max_speed()).ok_or_else(|| {
        Error::InvalidInstance("band speeds are not (1+δ)-powers; round first".into())
    })?;
    // Normalized machines: fastest speed exactly 1.
    let machines: Vec<crate::instance::Machine> = band
        .machines
        .iter()
        .map(|m| crate::instance::Machine {
            id: m.id,
            speed: pack.pow(geo::exact_exponent(delta, m.speed).unwrap() - top),
        })
        .collect();
    let size_exps: BTreeMap<usize, i64> = band
        .jobs
        .iter()
        .map(|j| (j.id, geo::exact_exponent(delta, j.size).unwrap()))
        .collect();
    let guesses = scale_guesses(band, pack);
    // Guesses with equal divisors produce the same scaled instance; keep the
    // lexicographically first (job, shift) representative of each.
    let mut by_exponent: BTreeMap<i64, (usize, i64)> = BTreeMap::new();
    for g in &guesses {
        by_exponent
            .entry(size_exps[&g.job] + g.shift)
            .or_insert((g.job, g.shift));
    }
    let mut best: Option<(f64, OrderedSchedule, (usize, i64), RoundLedger)> = None;
    let mut z_min = f64::INFINITY;
    let mut solved = 0usize;
    for (&a, &(job, shift)) in &by_exponent {
        let jobs: Vec<Job> = band
            .jobs
            .iter()
            .map(|j| Job {
                id: j.id,
                size: pack.pow(size_exps[&j.id] - a),
                weight: j.weight,
                release: 0.0,
            })
            .collect();
        let scaled = Instance::new(jobs, machines.clone(), false)?;
        let configs = enumerate_configurations(&scaled, pack, nr)?;
        let pi = match build_pi(&scaled, &configs, pack, nr) {
            Ok(p) => p,
            Err(Error::Infeasible(_)) => continue,
            Err(e) => return Err(e),
        };
        let sol = solve_milp(&pi.model, &MilpBudget::default())?;
        if sol.status != MilpStatus::Optimal {
            continue;
        }
        solved += 1;
        // Scaled costs relate to instance costs by the divisor over the
        // speed normalization: C_scaled = C · (1+δ)^{top} / (1+δ)^{a}.
        let z_real = sol.objective * pack.pow(a - top);
        z_min = z_min.min(z_real);
        let (schedule, round) = match round_pi_solution(&sol, &scaled, &configs, &pi, pack, nr) {
            Ok(r) => r,
            Err(_) => continue,
        };
        let cost = cost_ordered(band, &schedule)?.total;
        if best.as_ref().map_or(true, |(c, ..)| cost < *c - 1e-12) {
            best = Some((cost, schedule, (job, shift), round));
        }
    }
    let Some((_, schedule, chosen, round)) = best else {
        return Err(Error::Infeasible(
            "no scale guess yielded a feasible configuration model".into(),
        ));
    };
    Ok((
        schedule,
        BandReport {
            guesses_total: guesses.len(),
            distinct_scales: by_exponent.len(),
            solved,
            z_star_min: z_min,
            chosen: Some(chosen),
            round,
        },
    ))
}

/// Minimum model optimum over all scale guesses, in instance units: a lower
/// bound on the optimal cost of the (grid) instance.
pub fn pi_lower_bound(instance: &Instance, pack: &ParamPack, nr: &NRParams) -> Result<f64> {
    let (_, report) = solve_bounded_ratio(instance, pack, nr)?;
    if report.solved == 0 {
        return Err(Error::Infeasible("no scale guess was solvable".into()));
    }
    Ok(report.z_star_min)
}

// ---------------------------------------------------------------------------
// Band combination and the top-level driver
// ---------------------------------------------------------------------------

/// Merges per-band schedules over a common machine set: per machine,
/// concatenate the bands' job lists and re-run everything in natural order.
pub fn combine_band_solutions(
    full: &Instance,
    parts: &[OrderedSchedule],
) -> Result<OrderedSchedule> {
    let m = full.m();
    let mut merged: Vec<Vec<usize>> = vec![Vec::new(); m];
    for part in parts {
        if part.machines.len() != m {
            return Err(Error::InvalidSchedule(
                "band schedules must share the machine set".into(),
            ));
        }
        for (mach, ids) in part.machines.iter().enumerate() {
            merged[mach].extend_from_slice(ids);
        }
    }
    let machines = merged
        .into_iter()
        .map(|ids| {
            let jobs: Vec<Job> = ids.iter().map(|&id| *full.job(id)).collect();
            natural_order(&jobs)
        })
        .collect();
    let schedule = OrderedSchedule { machines };
    schedule.validate(full)?;
    Ok(schedule)
}

/// One measured stage inequality `lhs ≤ rhs` of a pipeline run.
#[derive(Clone, Debug)]
pub struct StageEntry {
    /// What the inequality asserts.
    pub name: String,
    /// Left-hand side.
    pub lhs: f64,
    /// Right-hand side.
    pub rhs: f64,
}

impl StageEntry {
    /// `rhs - lhs`; nonnegative when the stage inequality holds.
    pub fn slack(&self) -> f64 {
        self.rhs - self.lhs
    }
}

/// Full report of a no-release pipeline run.
#[derive(Clone, Debug)]
pub struct NoReleaseReport {
    /// The density-shift offset behind the returned schedule.
    pub chosen_zeta: i64,
    /// Cost of the returned schedule on the input instance.
    pub cost_original: f64,
    /// Cost of the returned schedule on the rounded instance.
    pub cost_rounded: f64,
    /// Cost of the returned schedule on the chosen shifted instance.
    pub cost_shifted: f64,
    /// Sum of the per-band schedule costs for the chosen shift.
    pub band_cost_sum: f64,
    /// Number of shift offsets tried.
    pub zetas_tried: usize,
    /// Number of bands of the chosen shift.
    pub bands: usize,
    /// Measured stage inequalities (`lhs ≤ rhs`) of the chosen run.
    pub stages: Vec<StageEntry>,
}

/// The no-release pipeline: round the instance, try every effective density
/// shift, split each shifted instance into bands, solve each band, combine,
/// and return the cheapest combined schedule measured on the input instance.
pub fn eptas_no_release(
    instance: &Instance,
    pack: &ParamPack,
    nr: &NRParams,
) -> Result<(OrderedSchedule, NoReleaseReport)> {
    if instance.jobs.iter().any(|j| j.release > 0.0) {
        return Err(Error::InvalidInstance(
            "the no-release pipeline requires all release dates to be zero".into(),
        ));
    }
    let rounded = round_no_release(instance, pack)?;
    let zetas = effective_zetas(&rounded, pack)?;
    let mut best: Option<(f64, OrderedSchedule, i64, f64, f64, f64, usize)> = None;
    for &zeta in &zetas {
        let shifted = density_shift(&rounded, zeta, pack)?;
        let bands = split_into_bands(&shifted, zeta, pack)?;
        // Bands arrive in increasing density; combine from densest down.
        let mut parts = Vec::with_capacity(bands.len());
        let mut band_sum = 0.0;
        for band in bands.iter().rev() {
            let (part, _) = solve_bounded_ratio(&band.instance, pack, nr)?;
            band_sum += cost_ordered(&band.instance, &part)?.total;
            parts.push(part);
        }
        let combined = combine_band_solutions(&shifted, &parts)?;
        // Map machine indices back to the input instance by machine id
        // (rounding can reorder equal-speed machines).
        let remapped = remap_machines(&combined, &shifted, instance);
        let c_orig = cost_ordered(instance, &remapped)?.total;
        if best.as_ref().map_or(true, |(c, ..)| c_orig < *c - 1e-12) {
            let c_round = cost_ordered(&rounded, &combined)?.total;
            let c_shift = cost_ordered(&shifted, &combined)?.total;
            best = Some((
                c_orig,
                remapped,
                zeta,
                c_round,
                c_shift,
                band_sum,
                bands.len(),
            ));
        }
    }
    let (cost_original, schedule, chosen_zeta, cost_rounded, cost_shifted, band_cost_sum, bands) =
        best.expect("at least one shift offset exists");
    let stages = vec![
        StageEntry {
            name: "input cost at most rounded cost".into(),
            lhs: cost_original,
            rhs: cost_rounded,
        },
        StageEntry {
            name: "rounded cost at most shifted cost".into(),
            lhs: cost_rounded,
            rhs: cost_shifted,
        },
        StageEntry {
            name: "combined cost within (1+8δ) of the band sum".into(),
            lhs: cost_shifted,
            rhs: (1.0 + 8.0 * pack.delta) * band_cost_sum,
        },
    ];
    Ok((
        schedule,
        NoReleaseReport {
            chosen_zeta,
            cost_original,
            cost_rounded,
            cost_shifted,
            band_cost_sum,
            zetas_tried: zetas.len(),
            bands,
            stages,
        },
    ))
}

/// Rewrites machine indices of a schedule from one instance's machine order
/// to another's, matching machines by id.
fn remap_machines(
    schedule: &OrderedSchedule,
    from: &Instance,
    to: &Instance,
) -> OrderedSchedule {
    let mut index_of: BTreeMap<usize, usize> = BTreeMap::new();
    for (idx, m) in to.machines.iter().enumerate() {
        index_of.insert(m.id, idx);
    }
    let mut machines = vec![Vec::new(); to.m()];
    for (k, ids) in schedule.machines.iter().enumerate() {
        machines[index_of[&from.machines[k].id]] = ids.clone();
    }
    OrderedSchedule { machines }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::Machine;
    use crate::oracle::{opt_no_release, OracleLimits};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pack() -> ParamPack {
        ParamPack::practical(0.5).unwrap()
    }

    fn grid_instance(
        rng: &mut ChaCha8Rng,
        pack: &ParamPack,
        n: usize,
        m: usize,
    ) -> Instance {
        let jobs = (0..n)
            .map(|id| {
                let i = rng.gen_range(-6..=6);
                let d = rng.gen_range(0..=5);
                Job {
                    id,
                    size: pack.pow(i),
                    weight: pack.pow(i + d),
                    release: 0.0,
                }
            })
            .collect();
        let machines = (0..m)
            .map(|id| Machine {
                id,
                speed: pack.pow(-(rng.gen_range(0..=2) as i64)),
            })
            .collect();
        Instance::new(jobs, machines, false).unwrap()
    }

    #[test]
    fn practical_constants_satisfy_invariants() {
        let p = pack();
        let nr = NRParams::practical(&p);
        let (g, f) = match (&nr.g_delta, &nr.f_delta) {
            (ClassThreshold::Index(g), ClassThreshold::Index(f)) => (*g, *f),
            _ => panic!("practical thresholds are plain indices"),
        };
        assert!(f < g && g < 0);
        assert!(nr.gamma > 0.0 && nr.gamma < 1.0);
        // γ = δ³/(1+δ)^y at the defaults: 1/512 / 1.125^12.
        assert!((nr.gamma - (1.0f64 / 512.0) / 1.125f64.powi(12)).abs() < 1e-15);
        assert!(p.pow(nr.gamma_ceil_log) >= nr.gamma - 1e-15);
        assert!(p.pow(nr.gamma_ceil_log - 1) < nr.gamma);
    }

    #[test]
    fn faithful_threshold_formula() {
        let p = ParamPack::faithful_no_release(0.24, 3).unwrap();
        let nr = NRParams::faithful(&p);
        match &nr.g_delta {
            ClassThreshold::HugeNegative { base, exponent, offset } => {
                assert_eq!(*base, p.inv_delta);
                assert_eq!(*exponent, BigUint::from(p.inv_delta).pow(300));
                assert_eq!(*offset, 0);
            }
            _ => panic!("faithful g is the huge threshold"),
        }
        // Every representable work class counts as heavy, every representable
        // speed class as fast.
        assert!(nr.g_delta.below(i64::MIN));
        assert!(nr.f_delta.below(i64::MIN));
    }

    #[test]
    fn guess_count_and_tiling() {
        let p = pack();
        let inst = Instance::new(
            vec![Job { id: 0, size: 2.0, weight: 1.0, release: 0.0 }],
            vec![Machine { id: 0, speed: 1.0 }],
            false,
        )
        .unwrap();
        let guesses = scale_guesses(&inst, &p);
        // n = 1 → exactly 1/δ guesses.
        assert_eq!(guesses.len(), p.inv_delta as usize);
        // Half-open tiling: each interval starts where the previous ended,
        // the union covering [p_j, (1+δ)^{n/δ} p_j) ⊇ [p_j, (n+1) p_j).
        assert!((guesses[0].low - 2.0).abs() < 1e-12);
        for w in guesses.windows(2) {
            assert!((w[0].high - w[1].low).abs() < 1e-9);
        }
        let top = guesses.last().unwrap().high;
        assert!(top >= 2.0 * 2.0); // (n+1) p_j = 4
    }

    #[test]
    fn enumerate_empty_instance() {
        let p = pack();
        let inst = Instance::new(
            Vec::new(),
            vec![Machine { id: 0, speed: 1.0 }],
            false,
        )
        .unwrap();
        let nr = NRParams::practical(&p);
        assert!(enumerate_configurations(&inst, &p, &nr).unwrap().is_empty());
    }

    /// Independent reference enumeration for one machine class: all
    /// sub-multisets of job classes (no small blocks in range), filtered by
    /// the work window.
    fn reference_configs(
        inst: &Instance,
        p: &ParamPack,
        nr: &NRParams,
        j1: i64,
    ) -> usize {
        let mut by_class: BTreeMap<(i64, i64), usize> = BTreeMap::new();
        for j in &inst.jobs {
            let i = geo::exact_exponent(p.delta, j.size).unwrap();
            let ew = geo::exact_exponent(p.delta, j.weight).unwrap();
            *by_class.entry((ew - i, i)).or_insert(0) += 1;
        }
        let d_min = by_class.keys().map(|&(d, _)| d).min().unwrap();
        let classes: Vec<((i64, i64), usize)> = by_class
            .into_iter()
            .map(|((d, i), c)| ((d - d_min, i), c))
            .filter(|&((_, i), _)| i >= j1 - 1 + nr.gamma_ceil_log && i <= j1)
            .collect();
        let mut count = 0usize;
        let mut choice = vec![0usize; classes.len()];
        loop {
            let work: f64 = classes
                .iter()
                .zip(&choice)
                .map(|(((_, i), _), &n)| n as f64 * p.pow(*i))
                .sum();
            if work > p.pow(j1 - 2) + 1e-12 && work <= p.pow(j1) + 1e-12 {
                count += 1;
            }
            let mut k = 0;
            loop {
                if k == classes.len() {
                    return count;
                }
                choice[k] += 1;
                if choice[k] <= classes[k].1 {
                    break;
                }
                choice[k] = 0;
                k += 1;
            }
        }
    }

    #[test]
    fn enumeration_matches_reference_counts() {
        let p = pack();
        let nr = NRParams::practical(&p);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let inst = grid_instance(&mut rng, &p, 4, 1);
            let configs = enumerate_configurations(&inst, &p, &nr).unwrap();
            let mut by_j1: BTreeMap<i64, usize> = BTreeMap::new();
            for c in &configs {
                assert!(c.t_small.is_empty(), "no small classes at this spread");
                *by_j1.entry(c.j1).or_insert(0) += 1;
            }
            let min_i = inst
                .jobs
                .iter()
                .map(|j| geo::exact_exponent(p.delta, j.size).unwrap())
                .min()
                .unwrap();
            let total: f64 = inst.jobs.iter().map(|j| j.size).sum();
            for j1 in min_i..=geo::ceil_log(p.delta, total) + 1 {
                let expect = reference_configs(&inst, &p, &nr, j1);
                assert_eq!(by_j1.get(&j1).copied().unwrap_or(0), expect, "j1={j1}");
            }
        }
    }

    #[test]
    fn single_unit_job_hand_case() {
        // One machine of speed 1, one job of size 1: work class windows
        // ((1+δ)^{-2}, 1] and ((1+δ)^{-1}, 1+δ] both contain 1, so exactly
        // the two single-job configurations exist.
        let p = pack();
        let nr = NRParams {
            gamma: 0.5,
            gamma_ceil_log: ceil_log_guarded(&p, 0.5),
            g_delta: ClassThreshold::Index(-10),
            f_delta: ClassThreshold::Index(-50),
            config_cap: 1000,
        };
        let inst = Instance::new(
            vec![Job { id: 0, size: 1.0, weight: 1.0, release: 0.0 }],
            vec![Machine { id: 0, speed: 1.0 }],
            false,
        )
        .unwrap();
        let configs = enumerate_configurations(&inst, &p, &nr).unwrap();
        let mut j1s: Vec<i64> = configs.iter().map(|c| c.j1).collect();
        j1s.sort_unstable();
        assert_eq!(j1s, vec![0, 1]);
        for c in &configs {
            assert_eq!(c.n_large.len(), 1);
            assert_eq!(c.n_large.values().copied().sum::<u32>(), 1);
        }
    }

    #[test]
    fn slow_configurations_are_light() {
        // Under thresholds with the analysis-mandated gap
        // f ≤ g - 2 - log_{1+δ}(2/δ), every slow-speed configuration is
        // light: the load bound caps j1 at j2 + 2 + log(2/δ) ≤ g.
        let p = pack();
        let nr = NRParams {
            gamma: 0.5,
            gamma_ceil_log: ceil_log_guarded(&p, 0.5),
            g_delta: ClassThreshold::Index(-2),
            f_delta: ClassThreshold::Index(-30),
            config_cap: 100_000,
        };
        let inst = Instance::new(
            vec![
                Job { id: 0, size: p.pow(-40), weight: p.pow(-40), release: 0.0 },
                Job { id: 1, size: p.pow(-34), weight: p.pow(-33), release: 0.0 },
            ],
            vec![
                Machine { id: 0, speed: 1.0 },
                Machine { id: 1, speed: p.pow(-31) },
            ],
            false,
        )
        .unwrap();
        let configs = enumerate_configurations(&inst, &p, &nr).unwrap();
        assert!(configs.iter().any(|c| !nr.f_delta.below(c.j2)));
        for c in &configs {
            if !c.is_fast(&nr) {
                assert!(!c.is_heavy(&nr), "slow config with j1={} is heavy", c.j1);
            }
        }
    }

    #[test]
    fn config_cost_single_job_and_block() {
        let p = pack();
        let nr = NRParams::practical(&p);
        let inst = Instance::new(
            vec![Job { id: 0, size: 1.0, weight: p.pow(2), release: 0.0 }],
            vec![Machine { id: 0, speed: 1.0 }],
            false,
        )
        .unwrap();
        let single = ConfigurationNR {
            j1: 0,
            j2: 0,
            n_large: BTreeMap::from([((0, 0), 1)]),
            t_small: BTreeMap::new(),
        };
        // One large job: full weighted completion w·p/s.
        let c = config_cost(&single, &inst, &p, &nr).unwrap();
        assert!((c - p.pow(2)).abs() < 1e-12);

        // One small block: the block's Γ-value from time 0.
        let block = ConfigurationNR {
            j1: 0,
            j2: 0,
            n_large: BTreeMap::new(),
            t_small: BTreeMap::from([(0, 3)]),
        };
        let u = block.u_threshold(&p, &nr);
        let expect = block_gamma(3.0 * u, p.pow(2), 0.0, 1.0);
        let c = config_cost(&block, &inst, &p, &nr).unwrap();
        assert!((c - expect).abs() < 1e-12 * expect.max(1.0));
    }

    #[test]
    fn config_cost_lower_bound_holds() {
        // With minimum density 1, cost(C) ≥ (1+δ)^{2j1-4} / (2(1+δ)^{j2}).
        let p = pack();
        let nr = NRParams::practical(&p);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            let jobs = (0..4)
                .map(|id| {
                    let i = rng.gen_range(-4..=4);
                    let d = rng.gen_range(0..=4);
                    Job { id, size: p.pow(i), weight: p.pow(i + d), release: 0.0 }
                })
                .collect();
            let machines = vec![
                Machine { id: 0, speed: 1.0 },
                Machine { id: 1, speed: p.pow(-2) },
            ];
            let inst = Instance::new(jobs, machines, false).unwrap();
            for c in enumerate_configurations(&inst, &p, &nr).unwrap() {
                let cost = config_cost(&c, &inst, &p, &nr).unwrap();
                let bound = p.pow(2 * c.j1 - 4) / (2.0 * p.pow(c.j2));
                assert!(
                    cost >= bound * (1.0 - 1e-9),
                    "cost {cost} below bound {bound} for j1={} j2={}",
                    c.j1,
                    c.j2
                );
            }
        }
    }

    #[test]
    fn pi_hand_counts_for_unit_instance() {
        let p = pack();
        let nr = NRParams::practical(&p);
        let inst = Instance::new(
            vec![Job { id: 0, size: 1.0, weight: 1.0, release: 0.0 }],
            vec![Machine { id: 0, speed: 1.0 }],
            false,
        )
        .unwrap();
        let configs = enumerate_configurations(&inst, &p, &nr).unwrap();
        assert_eq!(configs.len(), 2); // work classes 0 and 1, one job each
        let pi = build_pi(&inst, &configs, &p, &nr).unwrap();
        // Two machine-count variables, no small-flow variables; one row per
        // speed class, one conservation row, no capacity rows, one anchor.
        assert_eq!(pi.model.variables.len(), 2);
        assert!(pi.y_vars.is_empty());
        assert_eq!(pi.model.constraints.len(), 3);
        let sol = solve_milp(&pi.model, &MilpBudget::default()).unwrap();
        assert_eq!(sol.status, MilpStatus::Optimal);
        // The optimum schedules the unit job alone: cost 1.
        assert!((sol.objective - 1.0).abs() < 1e-9);
    }

    #[test]
    fn dropping_anchor_never_increases_optimum() {
        let p = pack();
        let nr = NRParams::practical(&p);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..5 {
            let inst = grid_instance(&mut rng, &p, 4, 2);
            let configs = enumerate_configurations(&inst, &p, &nr).unwrap();
            let pi = match build_pi(&inst, &configs, &p, &nr) {
                Ok(pi) => pi,
                Err(_) => continue,
            };
            let with = solve_milp(&pi.model, &MilpBudget::default()).unwrap();
            let mut relaxed = pi.model.clone();
            relaxed.constraints.pop(); // the anchor row is added last
            let without = solve_milp(&relaxed, &MilpBudget::default()).unwrap();
            if with.status == MilpStatus::Optimal {
                assert_eq!(without.status, MilpStatus::Optimal);
                assert!(without.objective <= with.objective + 1e-7);
            }
        }
    }

    #[test]
    fn model_bound_below_oracle_on_seeds() {
        let p = pack();
        let nr = NRParams::practical(&p);
        let limits = OracleLimits { max_jobs: 5, max_machines: 2 };
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut checked = 0;
        for _ in 0..4 {
            let raw = grid_instance(&mut rng, &p, 4, 2);
            let inst = round_no_release(&raw, &p).unwrap();
            let (_, opt) = opt_no_release(&inst, &limits).unwrap();
            let z = pi_lower_bound(&inst, &p, &nr).unwrap();
            assert!(z <= opt + 1e-7, "model bound {z} above oracle {opt}");
            checked += 1;
        }
        assert_eq!(checked, 4);
    }

    #[test]
    fn rounding_outputs_complete_schedules() {
        let p = pack();
        let nr = NRParams::practical(&p);
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for _ in 0..5 {
            let inst = grid_instance(&mut rng, &p, 5, 2);
            let (schedule, report) = solve_bounded_ratio(&inst, &p, &nr).unwrap();
            schedule.validate(&inst).unwrap();
            // All configurations are heavy at this scale, so floors are
            // identity and nothing is left unassigned.
            assert!(report.round.unassigned_size <= report.round.unassigned_bound + 1e-9);
            assert_eq!(report.round.unassigned_size, 0.0);
        }
    }

    #[test]
    fn single_job_band_is_optimal() {
        let p = pack();
        let nr = NRParams::practical(&p);
        let inst = Instance::new(
            vec![Job { id: 7, size: p.pow(3), weight: p.pow(5), release: 0.0 }],
            vec![
                Machine { id: 0, speed: 1.0 },
                Machine { id: 1, speed: p.pow(-2) },
            ],
            false,
        )
        .unwrap();
        let (schedule, _) = solve_bounded_ratio(&inst, &p, &nr).unwrap();
        // The single job runs on the fastest machine: cost w·p/s.
        assert_eq!(schedule.machines[0], vec![7]);
        let cost = cost_ordered(&inst, &schedule).unwrap().total;
        assert!((cost - p.pow(5) * p.pow(3)).abs() < 1e-9);
    }

    #[test]
    fn combine_identity_and_disjoint_sum() {
        let p = pack();
        let inst = Instance::new(
            vec![
                Job { id: 0, size: 1.0, weight: p.pow(4), release: 0.0 },
                Job { id: 1, size: 1.0, weight: 1.0, release: 0.0 },
            ],
            vec![
                Machine { id: 0, speed: 1.0 },
                Machine { id: 1, speed: 1.0 },
            ],
            false,
        )
        .unwrap();
        // One part: identity (up to natural order).
        let part = OrderedSchedule { machines: vec![vec![0], vec![1]] };
        let combined = combine_band_solutions(&inst, &[part.clone()]).unwrap();
        assert_eq!(combined, part);
        // Two parts on disjoint machines: cost is exactly the sum.
        let a = Instance::new(
            vec![Job { id: 0, size: 1.0, weight: p.pow(4), release: 0.0 }],
            inst.machines.clone(),
            false,
        )
        .unwrap();
        let b = Instance::new(
            vec![Job { id: 1, size: 1.0, weight: 1.0, release: 0.0 }],
            inst.machines.clone(),
            false,
        )
        .unwrap();
        let pa = OrderedSchedule { machines: vec![vec![0], vec![]] };
        let pb = OrderedSchedule { machines: vec![vec![], vec![1]] };
        let sum = cost_ordered(&a, &pa).unwrap().total + cost_ordered(&b, &pb).unwrap().total;
        let merged = combine_band_solutions(&inst, &[pa, pb]).unwrap();
        assert!((cost_ordered(&inst, &merged).unwrap().total - sum).abs() < 1e-12);
    }

    #[test]
    fn single_machine_pipeline_matches_smith() {
        let p = pack();
        let nr = NRParams::practical(&p);
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        for _ in 0..3 {
            let jobs: Vec<Job> = (0..4)
                .map(|id| Job {
                    id,
                    size: rng.gen_range(0.5..4.0),
                    weight: rng.gen_range(0.5..4.0),
                    release: 0.0,
                })
                .collect();
            let inst =
                Instance::new(jobs.clone(), vec![Machine { id: 0, speed: 1.0 }], false).unwrap();
            let (schedule, report) = eptas_no_release(&inst, &p, &nr).unwrap();
            let (_, smith) = crate::oracle::smith_single_machine(&jobs, 1.0).unwrap();
            let cost = cost_ordered(&inst, &schedule).unwrap().total;
            assert!(
                (cost - smith).abs() <= 1e-9 * smith,
                "pipeline {cost} vs single-machine optimum {smith}"
            );
            for stage in &report.stages {
                assert!(stage.slack() >= -1e-9 * stage.rhs.abs().max(1.0), "{}", stage.name);
            }
        }
    }
}
