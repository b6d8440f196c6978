//! Heterogeneous commuter population.

use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::rng::{self, streams, SimRng};
use crate::{Error, Result};

/// Rejections allowed per truncated draw before giving up.
pub const MAX_REJECTIONS: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TravelerProfile {
    pub id: usize,
    /// Trip length in meters.
    pub trip_length: f64,
    /// Value of time in DKK per minute.
    pub value_of_time: f64,
    /// Early-arrival penalty factor.
    pub sde: f64,
    /// Late-arrival penalty factor.
    pub sdl: f64,
    /// Desired arrival time, minutes from the start of the window.
    pub desired_arrival: f64,
    /// Candidate departure minutes, strictly increasing, all before `desired_arrival`.
    pub time_window: Vec<f64>,
}

impl TravelerProfile {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(format!("traveler {}: {msg}", self.id)));
        if !(self.trip_length > 0.0) {
            return bad("trip length must be positive");
        }
        if !(self.value_of_time >= 0.0) {
            return bad("value of time must be non-negative");
        }
        if self.time_window.is_empty() {
            return bad("empty departure-time menu");
        }
        if self.time_window.windows(2).any(|w| w[1] <= w[0]) {
            return bad("menu not strictly increasing");
        }
        if self.time_window[0] < 0.0 {
            return bad("menu has negative departure times");
        }
        if *self.time_window.last().unwrap() >= self.desired_arrival {
            return bad("menu contains departures at or after the desired arrival");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PopulationConfig {
    pub n_travelers: usize,
    pub trip_length_mean: f64,
    pub trip_length_sd: f64,
    /// DKK per minute, shared by all travelers.
    pub value_of_time: f64,
    /// Means of (SDE, SDL).
    pub penalty_mean: [f64; 2],
    pub penalty_cov: [[f64; 2]; 2],
    /// Truncation bounds `[lo, hi]` for SDE and SDL.
    pub penalty_bounds: [[f64; 2]; 2],
    pub desired_arrival_lo: f64,
    pub desired_arrival_hi: f64,
    /// Earliest menu slot sits this many minutes before the desired arrival.
    pub window_before: f64,
    /// Latest menu slot sits this many minutes before the desired arrival.
    pub window_after: f64,
    pub window_step: f64,
    pub seed: u64,
}

impl Default for PopulationConfig {
    fn default() -> Self {
        Self {
            n_travelers: 3700,
            trip_length_mean: 4600.0,
            trip_length_sd: 0.2 * 4600.0,
            value_of_time: 1.1,
            penalty_mean: [0.5, 4.0],
            penalty_cov: [[0.05 * 0.05, 0.1 * 0.1], [0.1 * 0.1, 0.4 * 0.4]],
            penalty_bounds: [[0.3, 0.7], [2.5, 5.5]],
            desired_arrival_lo: 85.0,
            desired_arrival_hi: 95.0,
            window_before: 90.0,
            window_after: 1.0,
            window_step: 1.0,
            seed: 42,
        }
    }
}

impl PopulationConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(format!("population: {msg}")));
        if self.n_travelers == 0 {
            return bad("n_travelers must be positive".into());
        }
        if !(self.trip_length_sd >= 0.0) || !self.trip_length_mean.is_finite() {
            return bad("trip length distribution is invalid".into());
        }
        if !(self.value_of_time >= 0.0) {
            return bad("value_of_time must be non-negative".into());
        }
        if self.penalty_cov[0][1] != self.penalty_cov[1][0] {
            return bad("penalty_cov must be symmetric".into());
        }
        psd_factor_2x2(&self.penalty_cov)?;
        for (k, [lo, hi]) in self.penalty_bounds.iter().enumerate() {
            if !(lo < hi) {
                return bad(format!("penalty_bounds[{k}] must satisfy lo < hi"));
            }
        }
        if !(self.desired_arrival_lo <= self.desired_arrival_hi) {
            return bad("desired_arrival_lo must not exceed desired_arrival_hi".into());
        }
        if !(self.window_step > 0.0) {
            return bad("window_step must be positive".into());
        }
        if !(self.window_after > 0.0) || !(self.window_before >= self.window_after) {
            return bad("need 0 < window_after <= window_before".into());
        }
        if self.desired_arrival_lo - self.window_after < 0.0 {
            return bad("menus would contain no non-negative departure time".into());
        }
        Ok(())
    }

    /// Minute grid of departure options for a traveler with the given desired arrival.
    pub fn menu_for(&self, desired_arrival: f64) -> Vec<f64> {
        let first = desired_arrival - self.window_before;
        let last = desired_arrival - self.window_after;
        let steps = ((last - first) / self.window_step + 1e-9).floor() as usize;
        (0..=steps)
            .map(|k| first + k as f64 * self.window_step)
            .filter(|&t| t >= 0.0 && t < desired_arrival)
            .collect()
    }
}

/// Draws from `N(mean, sd^2)` conditioned on `[lo, hi]` by rejection.
pub fn sample_truncated_normal<R: Rng + ?Sized>(
    mean: f64,
    sd: f64,
    lo: f64,
    hi: f64,
    rng: &mut R,
) -> Result<f64> {
    if !(lo < hi) || !(sd >= 0.0) {
        return Err(Error::Sampling(format!(
            "invalid truncated normal (mean={mean}, sd={sd}, [{lo}, {hi}])"
        )));
    }
    if sd == 0.0 {
        return if (lo..=hi).contains(&mean) {
            Ok(mean)
        } else {
            Err(Error::Sampling(format!("degenerate mass at {mean} outside [{lo}, {hi}]")))
        };
    }
    for _ in 0..MAX_REJECTIONS {
        let z: f64 = rng.sample(StandardNormal);
        let x = mean + sd * z;
        if x >= lo && x <= hi {
            return Ok(x);
        }
    }
    Err(Error::Sampling(format!(
        "no draw of N({mean}, {sd}^2) landed in [{lo}, {hi}] after {MAX_REJECTIONS} tries"
    )))
}

/// Lower-triangular factor of a 2x2 PSD matrix, tolerating zero rows.
fn psd_factor_2x2(cov: &[[f64; 2]; 2]) -> Result<[[f64; 2]; 2]> {
    let err = || Error::Config(format!("penalty covariance {cov:?} is not positive semi-definite"));
    let (a, b, d) = (cov[0][0], cov[1][0], cov[1][1]);
    if !(a >= 0.0) || !(d >= 0.0) || (cov[0][1] - b).abs() > 1e-15 {
        return Err(err());
    }
    let l11 = a.sqrt();
    let l21 = if l11 > 0.0 {
        b / l11
    } else if b == 0.0 {
        0.0
    } else {
        return Err(err());
    };
    let rem = d - l21 * l21;
    if rem < -1e-12 * d.max(1.0) {
        return Err(err());
    }
    Ok([[l11, 0.0], [l21, rem.max(0.0).sqrt()]])
}

/// Bivariate normal draw of (SDE, SDL), rejection-resampled into the bounds.
pub fn sample_penalties<R: Rng + ?Sized>(cfg: &PopulationConfig, rng: &mut R) -> Result<(f64, f64)> {
    let l = psd_factor_2x2(&cfg.penalty_cov)?;
    let [m0, m1] = cfg.penalty_mean;
    let [[lo0, hi0], [lo1, hi1]] = cfg.penalty_bounds;
    for _ in 0..MAX_REJECTIONS {
        let z0: f64 = rng.sample(StandardNormal);
        let z1: f64 = rng.sample(StandardNormal);
        let sde = m0 + l[0][0] * z0;
        let sdl = m1 + l[1][0] * z0 + l[1][1] * z1;
        if (lo0..=hi0).contains(&sde) && (lo1..=hi1).contains(&sdl) {
            return Ok((sde, sdl));
        }
    }
    Err(Error::Sampling(format!(
        "penalty draws never fell inside the bounds after {MAX_REJECTIONS} tries"
    )))
}

/// Builds `n_travelers` profiles. Pure in `cfg` (seed included).
pub fn build_population(cfg: &PopulationConfig) -> Result<Vec<TravelerProfile>> {
    cfg.validate()?;
    let mut length_rng: SimRng = rng::stream(cfg.seed, streams::TRIP_LENGTH);
    let mut penalty_rng: SimRng = rng::stream(cfg.seed, streams::PENALTIES);
    let mut arrival_rng: SimRng = rng::stream(cfg.seed, streams::DESIRED_ARRIVAL);

    (0..cfg.n_travelers)
        .map(|id| {
            let trip_length = sample_truncated_normal(
                cfg.trip_length_mean,
                cfg.trip_length_sd,
                0.0,
                f64::INFINITY,
                &mut length_rng,
            )?;
            // L > 0 strictly; the closed bound admits an exact zero only with sd = 0.
            if trip_length <= 0.0 {
                return Err(Error::Sampling("trip length must be positive".into()));
            }
            let (sde, sdl) = sample_penalties(cfg, &mut penalty_rng)?;
            let desired_arrival = if cfg.desired_arrival_hi > cfg.desired_arrival_lo {
                arrival_rng.random_range(cfg.desired_arrival_lo..cfg.desired_arrival_hi)
            } else {
                cfg.desired_arrival_lo
            };
            let profile = TravelerProfile {
                id,
                trip_length,
                value_of_time: cfg.value_of_time,
                sde,
                sdl,
                desired_arrival,
                time_window: cfg.menu_for(desired_arrival),
            };
            profile.validate()?;
            Ok(profile)
        })
        .collect()
}

/// One row per traveler: `id,L,theta,sde,sdl,t_star`.
pub fn write_population_csv<W: Write>(population: &[TravelerProfile], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["id", "L", "theta", "sde", "sdl", "t_star"])?;
    for p in population {
        w.write_record([
            p.id.to_string(),
            p.trip_length.to_string(),
            p.value_of_time.to_string(),
            p.sde.to_string(),
            p.sdl.to_string(),
            p.desired_arrival.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
