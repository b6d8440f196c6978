//! Gaussian-mixture time-of-day toll profiles.
//!
//! Decision vectors lay components out as `[A1, xi1, s1, ..., AK, xiK, sK]`.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const PARAMS_PER_COMPONENT: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianComponent {
    pub amplitude: f64,
    /// Peak time, minutes.
    pub mean: f64,
    /// Spread, minutes.
    pub width: f64,
}

impl GaussianComponent {
    pub fn new(amplitude: f64, mean: f64, width: f64) -> Result<Self> {
        let c = Self { amplitude, mean, width };
        c.validate()?;
        Ok(c)
    }

    fn validate(&self) -> Result<()> {
        if !(self.amplitude >= 0.0) || !self.amplitude.is_finite() {
            return Err(Error::Encoding(format!("amplitude {} must be >= 0", self.amplitude)));
        }
        if !(self.width > 0.0) || !self.width.is_finite() {
            return Err(Error::Encoding(format!("width {} must be > 0", self.width)));
        }
        if !self.mean.is_finite() {
            return Err(Error::Encoding("mean must be finite".into()));
        }
        Ok(())
    }

    pub fn eval(&self, t: f64) -> f64 {
        let z = (t - self.mean) / self.width;
        self.amplitude * (-0.5 * z * z).exp()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<GaussianComponent>", into = "Vec<GaussianComponent>")]
pub struct TollProfile {
    components: Vec<GaussianComponent>,
}

impl TryFrom<Vec<GaussianComponent>> for TollProfile {
    type Error = Error;

    fn try_from(components: Vec<GaussianComponent>) -> Result<Self> {
        Self::new(components)
    }
}

impl From<TollProfile> for Vec<GaussianComponent> {
    fn from(p: TollProfile) -> Self {
        p.components
    }
}

impl TollProfile {
    pub fn new(components: Vec<GaussianComponent>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::Encoding("a toll profile needs at least one component".into()));
        }
        for c in &components {
            c.validate()?;
        }
        Ok(Self { components })
    }

    pub fn single(amplitude: f64, mean: f64, width: f64) -> Result<Self> {
        Self::new(vec![GaussianComponent::new(amplitude, mean, width)?])
    }

    pub fn components(&self) -> &[GaussianComponent] {
        &self.components
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    /// Toll rate at minute `t`.
    pub fn eval(&self, t: f64) -> f64 {
        self.components.iter().map(|c| c.eval(t)).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(|c| c.amplitude == 0.0)
    }

    pub fn to_vector(&self) -> Vec<f64> {
        self.components
            .iter()
            .flat_map(|c| [c.amplitude, c.mean, c.width])
            .collect()
    }

    /// Decodes a decision vector, rejecting wrong lengths and out-of-bounds entries.
    pub fn from_vector(v: &[f64], k: usize, bounds: &TollBounds) -> Result<Self> {
        if k == 0 || v.len() != PARAMS_PER_COMPONENT * k {
            return Err(Error::Encoding(format!(
                "expected {} entries for K = {k}, got {}",
                PARAMS_PER_COMPONENT * k,
                v.len()
            )));
        }
        for (i, &x) in v.iter().enumerate() {
            let [lo, hi] = bounds.range(i);
            if !(x >= lo && x <= hi) {
                return Err(Error::Encoding(format!(
                    "entry {i} = {x} lies outside [{lo}, {hi}]"
                )));
            }
        }
        let components = v
            .chunks_exact(PARAMS_PER_COMPONENT)
            .map(|c| GaussianComponent::new(c[0], c[1], c[2]))
            .collect::<Result<Vec<_>>>()?;
        Self::new(components)
    }
}

/// Per-component parameter ranges, replicated over every mixture component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TollBounds {
    pub amplitude_range: [f64; 2],
    pub mean_range: [f64; 2],
    pub width_range: [f64; 2],
}

impl Default for TollBounds {
    fn default() -> Self {
        Self {
            amplitude_range: [4.0, 30.0],
            mean_range: [30.0, 90.0],
            width_range: [10.0, 50.0],
        }
    }
}

impl TollBounds {
    pub fn validate(&self) -> Result<()> {
        for (name, [lo, hi]) in [
            ("amplitude_range", self.amplitude_range),
            ("mean_range", self.mean_range),
            ("width_range", self.width_range),
        ] {
            if !(lo < hi) {
                return Err(Error::Config(format!("toll bounds: {name} needs lo < hi")));
            }
        }
        if self.amplitude_range[0] < 0.0 || self.width_range[0] <= 0.0 {
            return Err(Error::Config(
                "toll bounds: amplitudes must be >= 0 and widths > 0".into(),
            ));
        }
        Ok(())
    }

    /// Range of decision-vector coordinate `i`.
    pub fn range(&self, i: usize) -> [f64; 2] {
        match i % PARAMS_PER_COMPONENT {
            0 => self.amplitude_range,
            1 => self.mean_range,
            _ => self.width_range,
        }
    }

    /// Lower and upper corners for a `k`-component decision vector.
    pub fn box_for(&self, k: usize) -> Vec<[f64; 2]> {
        (0..PARAMS_PER_COMPONENT * k).map(|i| self.range(i)).collect()
    }

    pub fn clamp(&self, v: &[f64]) -> Vec<f64> {
        v.iter()
            .enumerate()
            .map(|(i, &x)| {
                let [lo, hi] = self.range(i);
                x.clamp(lo, hi)
            })
            .collect()
    }
}

/// Projects each coordinate of `v` into its range.
pub fn clamp_to_bounds(v: &[f64], bounds: &TollBounds) -> Vec<f64> {
    bounds.clamp(v)
}
