//! Damped single-degree-of-freedom response and the destructiveness integral.
//!
//! The oscillator is driven by ground acceleration `a_g(t)`, linearly
//! interpolated between samples, starting from rest:
//!
//! ```text
//! x'' + 2 ξ ω x' + ω² x = -a_g(t),    ω = 2π φ
//! ```
//!
//! Each step is advanced with the closed-form solution for linear forcing, so
//! the scheme is exact for the interpolated record and stable for any `dt`.
//! The quantity of interest is the absolute acceleration of the mass,
//! `w_a = -(2 ξ ω x' + ω² x)`, and its energy-like integral
//! `EIS(φ) = ∫ w_a² dt` taken over the full record (no duration windowing).

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::ValidationError;

/// Default viscous damping ratio of the reference oscillator.
pub const DEFAULT_DAMPING_RATIO: f64 = 0.05;

/// Above this value of `φ·dt` the record is too coarse for the oscillator and
/// a warning is logged. The response is still computed.
pub const ALIASING_WARNING_THRESHOLD: f64 = 0.1;

/// Component label of a recorded trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Component {
    H1,
    H2,
    V,
    #[serde(rename = "UNSPECIFIED")]
    Unspecified,
}

impl Component {
    pub fn as_str(self) -> &'static str {
        match self {
            Component::H1 => "H1",
            Component::H2 => "H2",
            Component::V => "V",
            Component::Unspecified => "UNSPECIFIED",
        }
    }

    pub fn is_vertical(self) -> bool {
        self == Component::V
    }
}

impl std::fmt::Display for Component {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Component {
    type Err = ValidationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "H1" => Ok(Component::H1),
            "H2" => Ok(Component::H2),
            "V" => Ok(Component::V),
            "UNSPECIFIED" => Ok(Component::Unspecified),
            other => Err(ValidationError::new(
                "component",
                format!("unknown component label {other:?} (expected H1, H2 or V)"),
            )),
        }
    }
}

/// Uniformly sampled ground acceleration in m/s².
#[derive(Debug, Clone, PartialEq)]
pub struct Accelerogram {
    samples: Vec<f64>,
    dt: f64,
    component: Component,
    station_code: String,
}

impl Accelerogram {
    pub fn new(
        samples: Vec<f64>,
        dt: f64,
        component: Component,
        station_code: impl Into<String>,
    ) -> Result<Self, ValidationError> {
        validate_dt(dt)?;
        if samples.len() < 2 {
            return Err(ValidationError::new(
                "samples",
                format!("need at least 2 samples, got {}", samples.len()),
            ));
        }
        if let Some(i) = samples.iter().position(|a| !a.is_finite()) {
            return Err(ValidationError::new(
                "samples",
                format!("sample {i} is not finite"),
            ));
        }
        Ok(Self {
            samples,
            dt,
            component,
            station_code: station_code.into(),
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn component(&self) -> Component {
        self.component
    }

    pub fn station_code(&self) -> &str {
        &self.station_code
    }

    /// Record length in seconds.
    pub fn duration(&self) -> f64 {
        (self.samples.len() - 1) as f64 * self.dt
    }

    /// Same record with every sample multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self, ValidationError> {
        Self::new(
            self.samples.iter().map(|a| a * factor).collect(),
            self.dt,
            self.component,
            self.station_code.clone(),
        )
    }
}

/// Natural frequency and damping of the reference oscillator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdofConfig {
    pub natural_frequency: f64,
    pub damping_ratio: f64,
}

impl SdofConfig {
    pub fn new(natural_frequency: f64, damping_ratio: f64) -> Result<Self, ValidationError> {
        let cfg = Self {
            natural_frequency,
            damping_ratio,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// 5 % damped oscillator at `natural_frequency`.
    pub fn with_default_damping(natural_frequency: f64) -> Result<Self, ValidationError> {
        Self::new(natural_frequency, DEFAULT_DAMPING_RATIO)
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        if !(self.natural_frequency.is_finite() && self.natural_frequency > 0.0) {
            return Err(ValidationError::new(
                "natural_frequency",
                format!("must be finite and > 0, got {}", self.natural_frequency),
            ));
        }
        validate_damping(self.damping_ratio)
    }
}

pub(crate) fn validate_damping(xi: f64) -> Result<(), ValidationError> {
    if !(xi > 0.0 && xi < 1.0) {
        return Err(ValidationError::new(
            "damping_ratio",
            format!("must lie in (0, 1), got {xi}"),
        ));
    }
    Ok(())
}

fn validate_dt(dt: f64) -> Result<(), ValidationError> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(ValidationError::new(
            "dt",
            format!("must be finite and > 0, got {dt}"),
        ));
    }
    Ok(())
}

/// Destructiveness integral sampled on a frequency grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EisSpectrum {
    frequencies: Vec<f64>,
    eis_values: Vec<f64>,
    damping_ratio: f64,
}

impl EisSpectrum {
    /// Builds a spectrum from already computed values, e.g. for analytic
    /// fixtures. Frequencies must be strictly increasing and positive, values
    /// finite and non-negative.
    pub fn new(
        frequencies: Vec<f64>,
        eis_values: Vec<f64>,
        damping_ratio: f64,
    ) -> Result<Self, ValidationError> {
        validate_frequency_grid(&frequencies)?;
        validate_damping(damping_ratio)?;
        if eis_values.len() != frequencies.len() {
            return Err(ValidationError::new(
                "eis_values",
                format!(
                    "length {} does not match {} frequencies",
                    eis_values.len(),
                    frequencies.len()
                ),
            ));
        }
        if let Some(i) = eis_values.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(ValidationError::new(
                "eis_values",
                format!("value {i} ({}) is negative or not finite", eis_values[i]),
            ));
        }
        Ok(Self {
            frequencies,
            eis_values,
            damping_ratio,
        })
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn eis_values(&self) -> &[f64] {
        &self.eis_values
    }

    pub fn damping_ratio(&self) -> f64 {
        self.damping_ratio
    }

    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.frequencies
            .iter()
            .copied()
            .zip(self.eis_values.iter().copied())
    }
}

pub(crate) fn validate_frequency_grid(frequencies: &[f64]) -> Result<(), ValidationError> {
    if frequencies.is_empty() {
        return Err(ValidationError::new("frequencies", "grid is empty"));
    }
    if let Some(i) = frequencies.iter().position(|f| !(f.is_finite() && *f > 0.0)) {
        return Err(ValidationError::new(
            "frequencies",
            format!("frequency {i} ({}) must be finite and > 0", frequencies[i]),
        ));
    }
    if let Some(i) = frequencies.windows(2).position(|w| w[1] <= w[0]) {
        return Err(ValidationError::new(
            "frequencies",
            format!("grid not strictly increasing at index {}", i + 1),
        ));
    }
    Ok(())
}

/// Per-step propagator for one (φ, ξ, dt) triple.
///
/// Over a step of length `h` with forcing `f(τ) = f0 + s τ` the particular
/// solution is `x_p(τ) = (f0 + s τ)/ω² - 2 ξ s/ω³`, `x_p' = s/ω²`. The
/// homogeneous remainder is carried by the free-vibration transition matrix.
#[derive(Debug, Clone, Copy)]
struct Propagator {
    omega: f64,
    xi: f64,
    dt: f64,
    a11: f64,
    a12: f64,
    a21: f64,
    a22: f64,
}

impl Propagator {
    fn new(cfg: &SdofConfig, dt: f64) -> Self {
        let omega = 2.0 * PI * cfg.natural_frequency;
        let xi = cfg.damping_ratio;
        let root = (1.0 - xi * xi).sqrt();
        let omega_d = omega * root;
        let decay = (-xi * omega * dt).exp();
        let (sin, cos) = (omega_d * dt).sin_cos();
        let ratio = xi / root;
        Self {
            omega,
            xi,
            dt,
            a11: decay * (cos + ratio * sin),
            a12: decay * sin / omega_d,
            a21: -decay * omega * sin / root,
            a22: decay * (cos - ratio * sin),
        }
    }

    /// Advances `(x, v)` across one step with ground acceleration going
    /// linearly from `ag0` to `ag1`.
    #[inline]
    fn step(&self, x: f64, v: f64, ag0: f64, ag1: f64) -> (f64, f64) {
        let w2 = self.omega * self.omega;
        let f0 = -ag0;
        let f1 = -ag1;
        let slope = (f1 - f0) / self.dt;
        let vp = slope / w2;
        let shift = 2.0 * self.xi * slope / (w2 * self.omega);
        let xp0 = f0 / w2 - shift;
        let xp1 = f1 / w2 - shift;
        let hx = x - xp0;
        let hv = v - vp;
        (
            xp1 + self.a11 * hx + self.a12 * hv,
            vp + self.a21 * hx + self.a22 * hv,
        )
    }

    #[inline]
    fn absolute_acceleration(&self, x: f64, v: f64) -> f64 {
        -(2.0 * self.xi * self.omega * v + self.omega * self.omega * x)
    }
}

fn warn_if_coarse(cfg: &SdofConfig, dt: f64, station: &str) {
    let ratio = cfg.natural_frequency * dt;
    if ratio > ALIASING_WARNING_THRESHOLD {
        log::warn!(
            "station {station}: phi*dt = {ratio:.3} exceeds {ALIASING_WARNING_THRESHOLD} \
             at {} Hz; response may be aliased",
            cfg.natural_frequency
        );
    }
}

/// Absolute acceleration `w_a(t_i)` of the oscillator, one value per input
/// sample, starting from rest.
pub fn sdof_absolute_acceleration(
    acc: &Accelerogram,
    cfg: &SdofConfig,
) -> Result<Vec<f64>, ValidationError> {
    cfg.validate()?;
    warn_if_coarse(cfg, acc.dt, &acc.station_code);
    let prop = Propagator::new(cfg, acc.dt);
    let mut out = Vec::with_capacity(acc.samples.len());
    let (mut x, mut v) = (0.0, 0.0);
    out.push(prop.absolute_acceleration(x, v));
    for w in acc.samples.windows(2) {
        (x, v) = prop.step(x, v, w[0], w[1]);
        out.push(prop.absolute_acceleration(x, v));
    }
    Ok(out)
}

/// Trapezoidal `∫ w_a² dt` over the whole series.
pub fn destructiveness_integral(w_a: &[f64], dt: f64) -> Result<f64, ValidationError> {
    validate_dt(dt)?;
    if w_a.len() < 2 {
        return Err(ValidationError::new(
            "w_a",
            format!("need at least 2 samples, got {}", w_a.len()),
        ));
    }
    let n = w_a.len();
    let interior: f64 = w_a[1..n - 1].iter().map(|a| a * a).sum();
    let ends = 0.5 * (w_a[0] * w_a[0] + w_a[n - 1] * w_a[n - 1]);
    Ok((interior + ends) * dt)
}

/// EIS at a single frequency, without materialising the response series.
pub fn eis_at(acc: &Accelerogram, cfg: &SdofConfig) -> Result<f64, ValidationError> {
    cfg.validate()?;
    warn_if_coarse(cfg, acc.dt, &acc.station_code);
    let prop = Propagator::new(cfg, acc.dt);
    let samples = &acc.samples;
    let (mut x, mut v) = (0.0, 0.0);
    // w_a(t0) = 0 from rest, so the first trapezoid end contributes nothing.
    let mut interior = 0.0;
    let mut last = 0.0;
    let n = samples.len();
    for (i, w) in samples.windows(2).enumerate() {
        (x, v) = prop.step(x, v, w[0], w[1]);
        let a = prop.absolute_acceleration(x, v);
        if i + 2 == n {
            last = a;
        } else {
            interior += a * a;
        }
    }
    Ok((interior + 0.5 * last * last) * acc.dt)
}

/// Destructiveness integral at every frequency of `frequencies`.
///
/// Frequencies are evaluated independently (in parallel); the output order
/// follows the input grid and does not depend on scheduling.
pub fn eis_spectrum(
    acc: &Accelerogram,
    frequencies: &[f64],
    damping_ratio: f64,
) -> Result<EisSpectrum, ValidationError> {
    validate_frequency_grid(frequencies)?;
    validate_damping(damping_ratio)?;
    let eis_values = frequencies
        .par_iter()
        .map(|&f| eis_at(acc, &SdofConfig::new(f, damping_ratio)?))
        .collect::<Result<Vec<_>, _>>()?;
    EisSpectrum::new(frequencies.to_vec(), eis_values, damping_ratio)
}

/// `n` log-spaced frequencies from `f_low` to `f_high`, both included.
pub fn log_spaced(f_low: f64, f_high: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2, "log_spaced needs at least two points");
    let (u0, u1) = (f_low.ln(), f_high.ln());
    (0..n)
        .map(|i| match i {
            0 => f_low,
            i if i == n - 1 => f_high,
            i => (u0 + (u1 - u0) * i as f64 / (n - 1) as f64).exp(),
        })
        .collect()
}
