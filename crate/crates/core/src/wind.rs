//! Stochastic lateral wind with a -5/3 power-law spectrum.
//!
//! A profile is synthesised as a mean speed plus a sum of cosines. Component
//! frequencies are log-spaced over a configurable band, each amplitude carries
//! the square root of the spectral density integrated over its bin, and the
//! amplitude set is rescaled globally so the analytic standard deviation of the
//! sum matches the requested value. Phases come from a counter-based generator
//! seeded explicitly, so a profile is a pure function of its spec.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::{Result, SimError};

/// Spectral exponent of the wind speed law.
const SPECTRAL_EXPONENT: f64 = -5.0 / 3.0;

/// Parameters of a synthetic wind profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WindSpec {
    /// Mean lateral wind speed, m/s.
    pub mean_speed: f64,
    /// Standard deviation of the fluctuating part, m/s.
    pub std_dev: f64,
    /// Length of the generated record, s.
    pub duration: f64,
    /// Sample spacing of the generated record, s.
    pub sample_dt: f64,
    /// Lower edge of the synthesis band, Hz.
    pub freq_min: f64,
    /// Upper edge of the synthesis band, Hz.
    pub freq_max: f64,
    /// Number of log-spaced spectral bins.
    pub n_bins: usize,
    /// Seed for the phase generator.
    pub seed: u64,
}

impl Default for WindSpec {
    fn default() -> Self {
        WindSpec {
            mean_speed: 10.0 * crate::KMH_TO_MPS,
            std_dev: 1.0,
            duration: 60.0,
            sample_dt: 0.01,
            freq_min: 0.02,
            freq_max: 5.0,
            n_bins: 64,
            seed: 0,
        }
    }
}

impl WindSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.mean_speed.is_finite() && self.mean_speed >= 0.0) {
            return Err(SimError::Parameter("wind.mean_speed must be >= 0".into()));
        }
        if !(self.std_dev.is_finite() && self.std_dev >= 0.0) {
            return Err(SimError::Parameter("wind.std_dev must be >= 0".into()));
        }
        if !(self.duration > 0.0) {
            return Err(SimError::Parameter("wind.duration must be > 0".into()));
        }
        if !(self.sample_dt > 0.0 && self.sample_dt < self.duration) {
            return Err(SimError::Parameter(
                "wind.sample_dt must be > 0 and < duration".into(),
            ));
        }
        if !(self.freq_min > 0.0 && self.freq_max > self.freq_min) {
            return Err(SimError::Parameter(
                "wind band requires 0 < freq_min < freq_max".into(),
            ));
        }
        if self.n_bins < 2 {
            return Err(SimError::Parameter("wind.n_bins must be >= 2".into()));
        }
        Ok(())
    }
}

/// One cosine component of a synthesised profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindComponent {
    /// Frequency, Hz.
    pub freq: f64,
    /// Amplitude, m/s.
    pub amp: f64,
    /// Phase at t = 0, rad.
    pub phase: f64,
}

/// A sampled wind record plus the components it was built from.
///
/// Sample `i` sits at time `i * spec.sample_dt`; spacing is uniform by
/// construction.
#[derive(Debug, Clone, PartialEq)]
pub struct WindProfile {
    /// The spec this profile was generated from.
    pub spec: WindSpec,
    /// Speed samples, m/s.
    pub samples: Vec<f64>,
    /// Cosine components underlying the samples.
    pub components: Vec<WindComponent>,
}

/// Spectral density of the wind speed law: `v0 * f^(-5/3)`.
///
/// `f` must be strictly positive; `v0` is the speed scale at 1 Hz.
pub fn spectrum_amplitude(f: f64, v0: f64) -> Result<f64> {
    if !(f > 0.0) || !f.is_finite() {
        return Err(SimError::Domain(format!(
            "spectrum frequency must be finite and > 0, got {f}"
        )));
    }
    if !v0.is_finite() {
        return Err(SimError::Domain("spectrum v0 must be finite".into()));
    }
    Ok(v0 * f.powf(SPECTRAL_EXPONENT))
}

/// Integral of `f^(-5/3)` over `[lo, hi]`, closed form.
fn band_power(lo: f64, hi: f64) -> f64 {
    1.5 * (lo.powf(-2.0 / 3.0) - hi.powf(-2.0 / 3.0))
}

/// Builds the sampled profile for `spec`.
///
/// The record covers `[0, duration]`. Identical specs produce bitwise-identical
/// profiles.
pub fn generate_profile(spec: &WindSpec) -> Result<WindProfile> {
    spec.validate()?;

    let n = spec.n_bins;
    let ratio = spec.freq_max / spec.freq_min;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    // Bin edges are log-spaced; each component sits at its bin's geometric
    // centre, so component frequencies are themselves log-spaced.
    let mut components = Vec::with_capacity(n);
    let mut total_power = 0.0;
    for k in 0..n {
        let lo = spec.freq_min * ratio.powf(k as f64 / n as f64);
        let hi = spec.freq_min * ratio.powf((k + 1) as f64 / n as f64);
        let power = band_power(lo, hi);
        total_power += power;
        components.push(WindComponent {
            freq: (lo * hi).sqrt(),
            amp: power, // placeholder until the global rescale below
            phase: rng.random::<f64>() * TAU,
        });
    }

    // A cosine of amplitude a contributes a^2/2 of variance, so scale the set
    // so that sum(a_k^2)/2 equals std_dev^2 exactly.
    for c in &mut components {
        c.amp = if spec.std_dev > 0.0 {
            (2.0 * c.amp / total_power).sqrt() * spec.std_dev
        } else {
            0.0
        };
    }

    let n_steps = ((spec.duration / spec.sample_dt) - 1e-9).ceil() as usize;
    let mut samples = Vec::with_capacity(n_steps + 1);
    for i in 0..=n_steps {
        let t = i as f64 * spec.sample_dt;
        let mut s = spec.mean_speed;
        for c in &components {
            s += c.amp * (TAU * c.freq * t + c.phase).cos();
        }
        samples.push(s);
    }

    Ok(WindProfile {
        spec: spec.clone(),
        samples,
        components,
    })
}

impl WindProfile {
    /// Time span covered by the samples, s.
    pub fn duration(&self) -> f64 {
        (self.samples.len() - 1) as f64 * self.spec.sample_dt
    }

    /// Linearly interpolated speed at time `t`, exact at sample instants.
    ///
    /// `t` must lie within the record.
    pub fn wind_at(&self, t: f64) -> Result<f64> {
        if !t.is_finite() || t < 0.0 || t > self.duration() + 1e-9 {
            return Err(SimError::Domain(format!(
                "wind lookup at t={t} outside record [0, {}]",
                self.duration()
            )));
        }
        let dt = self.spec.sample_dt;
        let pos = (t / dt).min((self.samples.len() - 1) as f64);
        let i = pos.floor() as usize;
        if i + 1 >= self.samples.len() {
            return Ok(self.samples[self.samples.len() - 1]);
        }
        let frac = pos - i as f64;
        Ok(self.samples[i] * (1.0 - frac) + self.samples[i + 1] * frac)
    }
}
