//! Parameter packs: every derived constant of the approximation pipelines in
//! one place, under two profiles.
//!
//! * `faithful` — constants exactly as the analysis prescribes.  Several of
//!   them (the slow-machine thresholds, the release-date horizon constants)
//!   are astronomically large: they exist for formula-level unit tests and
//!   are never enumerable.
//! * `practical` — the same structural relations at runnable magnitudes.
//!   Every guarantee under this profile is empirical and flagged as such in
//!   reports.
//!
//! Throughout, `1/delta` is an integer, `xi = ceil(ell * log_{1+delta}
//! (1/delta))` is the forbidden-run length of the density-shifting machinery
//! (so that `(1+delta)^xi` is within a factor `1+delta` of `delta^{-ell}`),
//! and `y + 1` is the length of an allowed density run between two forbidden
//! runs.

use crate::error::{Error, Result};
use crate::geo;
use serde::{Deserialize, Serialize};

/// Which constant regime a [`ParamPack`] uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Profile {
    /// Constants exactly as analyzed; guarantees provable, runs infeasible.
    Faithful,
    /// Runnable magnitudes; guarantees empirical.
    Practical,
}

/// The shared parameter pack.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ParamPack {
    /// Target approximation slack; the pipelines aim at ratio `1 + eps`.
    pub eps: f64,
    /// Grid parameter; `1/delta` is an integer.
    pub delta: f64,
    /// `1/delta` as an integer.
    pub inv_delta: u64,
    /// Window-width exponent `ell` of the density-shifting machinery.
    pub ell: u32,
    /// Forbidden-run length `xi = ceil(ell * log_{1+delta}(1/delta))`.
    pub xi: i64,
    /// Allowed-run length minus one.  Faithful value is
    /// `xi / delta^{ell+1} - xi - 1`; the practical profile caps it (the
    /// structural machinery is unchanged, see [`ParamPack::band_period`]).
    pub y: i64,
    /// `xi / delta^{ell+1} - xi - 1` before any practical cap.  Exact for
    /// every runnable profile; for faithful release-date parameters the value
    /// exceeds every integer type and the `f64` is an approximation kept for
    /// formula-level sanity checks only.
    pub y_formula: f64,
    /// Constant regime.
    pub profile: Profile,
}

impl ParamPack {
    /// Faithful profile without release dates: `delta = eps/48`,
    /// `delta <= 1/8`, `3 <= ell <= 5`.
    pub fn faithful_no_release(eps: f64, ell: u32) -> Result<Self> {
        if !(3..=5).contains(&ell) {
            return Err(Error::InvalidParams(format!("ell must be in [3,5], got {ell}")));
        }
        let delta = eps / 48.0;
        if delta > 1.0 / 8.0 + geo::GEO_TOL {
            return Err(Error::InvalidParams(format!(
                "faithful profile needs delta = eps/48 <= 1/8, got {delta}"
            )));
        }
        Self::build(eps, delta, ell, None, Profile::Faithful)
    }

    /// Faithful profile with release dates: `delta <= 1/36`, `ell = 25`.
    pub fn faithful_release(eps: f64) -> Result<Self> {
        let delta = eps / 48.0;
        if delta > 1.0 / 36.0 + geo::GEO_TOL {
            return Err(Error::InvalidParams(format!(
                "faithful release profile needs delta = eps/48 <= 1/36, got {delta}"
            )));
        }
        Self::build(eps, delta, 25, None, Profile::Faithful)
    }

    /// Practical profile: `ell = 3`, `delta = 1/max(8, ceil(4/eps))`, and `y`
    /// capped at 12.  All downstream constants use the runnable overrides.
    pub fn practical(eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(Error::InvalidParams(format!("eps must be in (0,1], got {eps}")));
        }
        let inv = ((4.0 / eps).ceil() as u64).max(8);
        let delta = 1.0 / inv as f64;
        Self::build(eps, delta, 3, Some(12), Profile::Practical)
    }

    /// Practical profile with an explicit `1/delta`; used by tests that pin
    /// `delta` directly (e.g. `delta = 1/8` vs `1/16` sweeps).
    pub fn practical_with_inv_delta(eps: f64, inv_delta: u64) -> Result<Self> {
        if inv_delta < 2 {
            return Err(Error::InvalidParams("1/delta must be >= 2".into()));
        }
        Self::build(eps, 1.0 / inv_delta as f64, 3, Some(12), Profile::Practical)
    }

    fn build(eps: f64, delta: f64, ell: u32, y_cap: Option<i64>, profile: Profile) -> Result<Self> {
        let inv_f = 1.0 / delta;
        let inv_delta = inv_f.round() as u64;
        if !geo::geo_eq(inv_delta as f64, inv_f) {
            return Err(Error::InvalidParams(format!(
                "1/delta must be an integer, got {inv_f}"
            )));
        }
        let xi = {
            // xi = ceil(ell * log_{1+delta}(1/delta)).
            let raw = ell as f64 * geo::log1p_base(delta, inv_f);
            let mut k = raw.ceil() as i64;
            // Verify: (1+delta)^xi >= delta^{-ell} > (1+delta)^{xi-1}.
            let target = (ell as f64) * inv_f.ln();
            while (k as f64) * delta.ln_1p() < target - 1e-12 {
                k += 1;
            }
            while ((k - 1) as f64) * delta.ln_1p() >= target - 1e-12 {
                k -= 1;
            }
            k
        };
        let period = (inv_delta as f64).powi(ell as i32 + 1);
        let y_formula = xi as f64 * period - xi as f64 - 1.0;
        let y = match y_cap {
            Some(cap) => (cap as f64).min(y_formula) as i64,
            None => {
                if y_formula > i64::MAX as f64 {
                    // Faithful release-date parameters: the allowed-run
                    // length is beyond any runnable magnitude; keep a marker
                    // value and rely on y_formula for formula checks.
                    i64::MAX
                } else {
                    y_formula as i64
                }
            }
        };
        Ok(ParamPack {
            eps,
            delta,
            inv_delta,
            ell,
            xi,
            y,
            y_formula,
            profile,
        })
    }

    /// Period of the forbidden-window pattern, measured in windows of width
    /// `xi`: a window index `c` is forbidden for offset `zeta` iff
    /// `c ≡ zeta (mod band_period)`.  Only called on runnable profiles, where
    /// it fits comfortably in an `i64`.
    pub fn band_period(&self) -> i64 {
        let p = (self.inv_delta as f64).powi(self.ell as i32 + 1);
        assert!(
            p <= i64::MAX as f64,
            "band period is not enumerable under these parameters"
        );
        p as i64
    }

    /// `(1+delta)^k` shorthand.
    pub fn pow(&self, k: i64) -> f64 {
        geo::pow1p(self.delta, k)
    }
}
