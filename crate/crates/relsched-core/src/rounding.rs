//! Instance transformations: geometric rounding, density shifting,
//! density-band splitting, and divisions/pseudo-sizes.
//!
//! All transformations keep job and machine ids stable, so any schedule for a
//! transformed instance is directly a schedule for the original (only the
//! numbers differ), which is how the sandwich inequalities are measured.

use crate::error::{Error, Result};
use crate::geo;
use crate::instance::{Instance, Job};
use crate::params::ParamPack;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

// ---------------------------------------------------------------------------
// Geometric rounding
// ---------------------------------------------------------------------------

/// Rounds an instance without release dates onto the geometric grid: machine
/// speeds *down* to `(1+delta)^{floor log}`, job weights and sizes *up* to
/// `(1+delta)^{ceil log}`.  Every resulting field is an exact grid point, and
/// for any fixed schedule `SOL(A) <= SOL(A') <= (1+delta)^3 SOL(A)`.
pub fn round_no_release(instance: &Instance, params: &ParamPack) -> Result<Instance> {
    if instance.has_release_dates && instance.jobs.iter().any(|j| j.release > 0.0) {
        return Err(Error::InvalidInstance(
            "round_no_release called on an instance with release dates".into(),
        ));
    }
    let d = params.delta;
    let jobs = instance
        .jobs
        .iter()
        .map(|j| Job {
            id: j.id,
            size: geo::round_up(d, j.size).value(d),
            weight: geo::round_up(d, j.weight).value(d),
            release: 0.0,
        })
        .collect();
    let machines = instance
        .machines
        .iter()
        .map(|m| crate::instance::Machine {
            id: m.id,
            speed: geo::round_down(d, m.speed).value(d),
        })
        .collect();
    Instance::new(jobs, machines, false)
}

/// Rounds a release-date instance: sizes/weights/speeds as in
/// [`round_no_release`], and each release date becomes
/// `(1+delta)^{ceil log (release + beta)}` with `beta = delta^2 * min size`
/// (so no rounded release date is zero).  Speeds are then normalized so the
/// fastest machine has speed 1; job sizes are divided by the same factor,
/// which keeps every processing time `p/s` — and hence every schedule's cost
/// — exactly unchanged.
pub fn round_release(instance: &Instance, params: &ParamPack) -> Result<Instance> {
    if instance.jobs.is_empty() {
        return Err(Error::InvalidInstance(
            "round_release needs at least one job".into(),
        ));
    }
    let d = params.delta;
    let a_min = instance
        .jobs
        .iter()
        .map(|j| j.size)
        .fold(f64::INFINITY, f64::min);
    let beta = d * d * a_min;
    // Speed normalization exponent: the fastest machine's rounded exponent.
    let top = geo::floor_log(d, instance.max_speed());
    let jobs = instance
        .jobs
        .iter()
        .map(|j| Job {
            id: j.id,
            size: geo::GeoValue::new(geo::ceil_log(d, j.size) - top).value(d),
            weight: geo::round_up(d, j.weight).value(d),
            release: geo::round_up(d, j.release + beta).value(d),
        })
        .collect();
    let machines = instance
        .machines
        .iter()
        .map(|m| crate::instance::Machine {
            id: m.id,
            speed: geo::GeoValue::new(geo::floor_log(d, m.speed) - top).value(d),
        })
        .collect();
    Instance::new(jobs, machines, true)
}

// ---------------------------------------------------------------------------
// Density shifting
// ---------------------------------------------------------------------------

/// The forbidden-density pattern for a fixed offset `zeta`.
///
/// Density exponents are grouped into windows of width `xi`:
/// window `c` covers exponents `{c*xi + 1, ..., (c+1)*xi}`.  For offset
/// `zeta` every window with `c ≡ zeta (mod band_period)` is *forbidden*;
/// allowed exponents between two consecutive forbidden windows form one
/// *band*.  Multiplying a job's weight by `(1+delta)^xi` moves its density
/// exponent up by exactly one window, out of a forbidden window into an
/// allowed one.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct DensityBandMap {
    /// The offset, in `[0, band_period - 1]`.
    pub zeta: i64,
    /// Window width `xi`.
    pub xi: i64,
    /// Pattern period in windows.
    pub period: i64,
}

impl DensityBandMap {
    /// Builds the map for an offset; `zeta` must lie in `[0, period - 1]`.
    pub fn new(params: &ParamPack, zeta: i64) -> Result<Self> {
        let period = params.band_period();
        if !(0..period).contains(&zeta) {
            return Err(Error::InvalidParams(format!(
                "zeta {zeta} outside [0, {})",
                period - 1
            )));
        }
        Ok(DensityBandMap {
            zeta,
            xi: params.xi,
            period,
        })
    }

    /// Window index of a density exponent: the `c` with
    /// `beta in {c*xi+1, ..., (c+1)*xi}`.
    pub fn window(&self, beta: i64) -> i64 {
        (beta - 1).div_euclid(self.xi)
    }

    /// Whether the exponent lies in a forbidden window for this offset.
    pub fn is_forbidden(&self, beta: i64) -> bool {
        self.window(beta).rem_euclid(self.period) == self.zeta.rem_euclid(self.period)
    }

    /// The offset for which this exponent *would* be forbidden (each exponent
    /// is forbidden for exactly one offset).
    pub fn forbidding_zeta(params: &ParamPack, beta: i64) -> i64 {
        let xi = params.xi;
        (beta - 1).div_euclid(xi).rem_euclid(params.band_period())
    }

    /// Band index of an allowed exponent: which allowed run between forbidden
    /// windows it belongs to.  Larger index means higher density.
    pub fn band_index(&self, beta: i64) -> i64 {
        debug_assert!(!self.is_forbidden(beta), "band index of forbidden exponent");
        // Shift so that forbidden windows sit at multiples of `period`.
        (self.window(beta) - self.zeta - 1).div_euclid(self.period)
    }
}

/// Density exponent of a rounded job: `beta` with density `(1+delta)^beta`.
/// The job's weight and size must be exact grid points.
pub fn density_exponent(params: &ParamPack, job: &Job) -> Result<i64> {
    let d = params.delta;
    let w = geo::exact_exponent(d, job.weight).ok_or_else(|| {
        Error::InvalidInstance(format!("job {} weight {} is not a grid point", job.id, job.weight))
    })?;
    let p = geo::exact_exponent(d, job.size).ok_or_else(|| {
        Error::InvalidInstance(format!("job {} size {} is not a grid point", job.id, job.size))
    })?;
    Ok(w - p)
}

/// Multiplies the weight of every job whose density exponent is forbidden for
/// `zeta` by `(1+delta)^xi`; all resulting densities are allowed for `zeta`.
pub fn density_shift(instance: &Instance, zeta: i64, params: &ParamPack) -> Result<Instance> {
    let map = DensityBandMap::new(params, zeta)?;
    let factor = params.pow(params.xi);
    let jobs = instance
        .jobs
        .iter()
        .map(|j| {
            let beta = density_exponent(params, j)?;
            Ok(if map.is_forbidden(beta) {
                Job {
                    weight: j.weight * factor,
                    ..*j
                }
            } else {
                *j
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Instance::new(jobs, instance.machines.clone(), instance.has_release_dates)
}

/// The offsets worth trying for this instance: for each job density exponent,
/// the unique offset that forbids it, plus one offset that forbids none of
/// them (all other offsets produce the identical shifted instance).  Sorted,
/// deduplicated.
pub fn effective_zetas(instance: &Instance, params: &ParamPack) -> Result<Vec<i64>> {
    let period = params.band_period();
    let mut zetas: Vec<i64> = instance
        .jobs
        .iter()
        .map(|j| Ok(DensityBandMap::forbidding_zeta(params, density_exponent(params, j)?)))
        .collect::<Result<Vec<_>>>()?;
    zetas.sort_unstable();
    zetas.dedup();
    // One representative "clean" offset (exists whenever n < period).
    if (zetas.len() as i64) < period {
        let clean = (0..period).find(|z| !zetas.contains(z)).unwrap();
        zetas.push(clean);
    }
    Ok(zetas)
}

/// One density band of a shifted instance.
#[derive(Clone, Debug)]
pub struct DensityBand {
    /// Band index per [`DensityBandMap::band_index`]; bands are returned in
    /// increasing index (increasing density).
    pub index: i64,
    /// The band's jobs together with all machines of the parent instance.
    pub instance: Instance,
}

/// Splits a density-shifted instance into its bands: maximal groups of jobs
/// whose (allowed) density exponents fall between two consecutive forbidden
/// windows.  Every job lands in exactly one band; each band instance carries
/// the full machine list.
pub fn split_into_bands(
    instance: &Instance,
    zeta: i64,
    params: &ParamPack,
) -> Result<Vec<DensityBand>> {
    let map = DensityBandMap::new(params, zeta)?;
    let mut groups: BTreeMap<i64, Vec<Job>> = BTreeMap::new();
    for j in &instance.jobs {
        let beta = density_exponent(params, j)?;
        if map.is_forbidden(beta) {
            return Err(Error::InvalidInstance(format!(
                "job {} still has a forbidden density exponent {beta}; shift first",
                j.id
            )));
        }
        groups.entry(map.band_index(beta)).or_default().push(*j);
    }
    groups
        .into_iter()
        .map(|(index, jobs)| {
            Ok(DensityBand {
                index,
                instance: Instance::new(
                    jobs,
                    instance.machines.clone(),
                    instance.has_release_dates,
                )?,
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Divisions and pseudo-sizes
// ---------------------------------------------------------------------------

/// Division data of one size grid point `(1+delta)^i`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DivisionInfo {
    /// The size exponent `i`.
    pub exponent: i64,
    /// Subdivision `k_i`: the unique integer with `2^{k_i} (1+delta)^i` in
    /// `(1, 2]`.
    pub subdivision: i64,
    /// Division `k'_i = ceil(log_{1+delta} 2^{k_i}) + i`, always in
    /// `[1, Delta]` where `Delta = ceil(log_{1+delta} 2)`.
    pub division: i64,
    /// `Delta = ceil(log_{1+delta} 2)`.
    pub delta_cap: i64,
}

impl DivisionInfo {
    /// The pseudo-size `pi_i = (1+delta)^{k'_i} / 2^{k_i}`, always in
    /// `[(1+delta)^i, (1+delta)^{i+1})`.  Within one division, pseudo-sizes
    /// differ by exact powers of two, so they form a divisible chain.
    pub fn pseudo_size(&self, delta: f64) -> f64 {
        geo::pow1p(delta, self.division) * (-(self.subdivision as f64)).exp2()
    }
}

/// Computes the division data of a size grid point.
pub fn divisions(size: geo::GeoValue, params: &ParamPack) -> DivisionInfo {
    let d = params.delta;
    let i = size.exponent;
    // k_i: 1 < 2^k (1+delta)^i <= 2, i.e. -i*log2(1+delta) < k <= 1 - i*log2(1+delta).
    let lg = (1.0 + d).log2();
    let mut k = (1.0 - i as f64 * lg).floor() as i64;
    // Verification: nudge until 2^k (1+delta)^i lies in (1, 2].  A value
    // within tolerance of 1 counts as exactly 1 and is excluded (the paper's
    // worked case: i = 0 gives k = 1, value 2, not k = 0, value 1).
    let val = |k: i64| (k as f64 * std::f64::consts::LN_2 + i as f64 * d.ln_1p()).exp();
    while geo::geo_le(val(k), 1.0) {
        k += 1;
    }
    while geo::geo_lt(2.0, val(k)) {
        k -= 1;
    }
    debug_assert!(!geo::geo_le(val(k), 1.0) && geo::geo_le(val(k), 2.0));
    let division = geo::ceil_log(d, (k as f64).exp2()) + i;
    let delta_cap = geo::ceil_log(d, 2.0);
    DivisionInfo {
        exponent: i,
        subdivision: k,
        division,
        delta_cap,
    }
}

/// Replaces every job size of a rounded release-date instance by its
/// pseudo-size.  Sizes must be grid points; the resulting sizes are *not*
/// grid points but satisfy `size <= pseudo < (1+delta) * size`.
pub fn to_pseudo_instance(instance: &Instance, params: &ParamPack) -> Result<Instance> {
    let d = params.delta;
    let jobs = instance
        .jobs
        .iter()
        .map(|j| {
            let e = geo::exact_exponent(d, j.size).ok_or_else(|| {
                Error::InvalidInstance(format!(
                    "job {} size {} is not a grid point",
                    j.id, j.size
                ))
            })?;
            let info = divisions(geo::GeoValue::new(e), params);
            Ok(Job {
                size: info.pseudo_size(d),
                ..*j
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Instance::new(jobs, instance.machines.clone(), instance.has_release_dates)
}
