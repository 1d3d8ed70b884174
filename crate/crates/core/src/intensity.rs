//! Instrumental intensity from destructiveness integrals.
//!
//! Pointwise intensity at one oscillator frequency:
//!
//! ```text
//! i_d(φ) = log_4(EIS(φ)) + 5.75
//! ```
//!
//! Band-averaged intensity over `[φ', φ'']`, with the integral taken in the
//! logarithmic measure `dφ/φ`:
//!
//! ```text
//! i_d*(φ', φ'') = log_7.5( ∫ EIS(φ) dφ/φ / ln(φ''/φ') ) + 6.45
//! ```
//!
//! The reference band 0.25–16 Hz is split into twelve sub-bands with a
//! frequency ratio of √2 each ("3 dB" in amplitude terms). Band `k` is
//! labelled `Id12k` and bands are numbered upward in frequency, so `Id124`
//! covers periods 1.00–1.41 s.

use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};

use crate::error::{IntensityError, ValidationError};
use crate::spectral::{
    self, log_spaced, validate_damping, Accelerogram, Component, EisSpectrum,
    DEFAULT_DAMPING_RATIO,
};

pub const BAND_COUNT: usize = 12;
pub const REFERENCE_BAND_LOW_HZ: f64 = 0.25;
pub const REFERENCE_BAND_HIGH_HZ: f64 = 16.0;
pub const DEFAULT_GRID_POINTS_PER_BAND: usize = 25;

/// Relative slack used when matching grid frequencies to band edges.
const EDGE_TOLERANCE: f64 = 1e-12;

/// Calibration constants of the two intensity formulas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntensityModel {
    pub pointwise_log_base: f64,
    pub pointwise_offset: f64,
    pub band_log_base: f64,
    pub band_offset: f64,
    pub damping_ratio: f64,
}

impl Default for IntensityModel {
    fn default() -> Self {
        Self {
            pointwise_log_base: 4.0,
            pointwise_offset: 5.75,
            band_log_base: 7.5,
            band_offset: 6.45,
            damping_ratio: DEFAULT_DAMPING_RATIO,
        }
    }
}

impl IntensityModel {
    pub fn validate(&self) -> Result<(), ValidationError> {
        for (field, base) in [
            ("pointwise_log_base", self.pointwise_log_base),
            ("band_log_base", self.band_log_base),
        ] {
            if !(base.is_finite() && base > 1.0) {
                return Err(ValidationError::new(
                    field,
                    format!("logarithm base must be finite and > 1, got {base}"),
                ));
            }
        }
        for (field, offset) in [
            ("pointwise_offset", self.pointwise_offset),
            ("band_offset", self.band_offset),
        ] {
            if !offset.is_finite() {
                return Err(ValidationError::new(field, "must be finite"));
            }
        }
        validate_damping(self.damping_ratio)
    }

    /// Maps a log-mean destructiveness integral through the band formula.
    pub fn band_intensity_from_mean(&self, mean: f64) -> Result<f64, IntensityError> {
        log_with_offset(mean, self.band_log_base, self.band_offset)
    }
}

fn log_with_offset(value: f64, base: f64, offset: f64) -> Result<f64, IntensityError> {
    if value == 0.0 {
        return Err(IntensityError::Quiescent);
    }
    if !(value.is_finite() && value > 0.0) {
        return Err(IntensityError::Undefined(value));
    }
    Ok(value.ln() / base.ln() + offset)
}

/// Intensity for a single destructiveness integral value (m²/s³).
pub fn pointwise_intensity(eis: f64, model: &IntensityModel) -> Result<f64, IntensityError> {
    model.validate()?;
    log_with_offset(eis, model.pointwise_log_base, model.pointwise_offset)
}

/// One of the twelve √2-ratio sub-bands of 0.25–16 Hz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandDefinition {
    pub index: usize,
    pub f_low: f64,
    pub f_high: f64,
    pub label: String,
    /// Shortest period of the band, `1 / f_high`.
    pub t_low: f64,
    /// Longest period of the band, `1 / f_low`.
    pub t_high: f64,
}

impl BandDefinition {
    /// Band `index` in 1..=12.
    pub fn new(index: usize) -> Result<Self, ValidationError> {
        if !(1..=BAND_COUNT).contains(&index) {
            return Err(ValidationError::new(
                "band index",
                format!("must be in 1..={BAND_COUNT}, got {index}"),
            ));
        }
        let f_low = band_edge(index - 1);
        let f_high = band_edge(index);
        Ok(Self {
            index,
            f_low,
            f_high,
            label: format!("Id12{index}"),
            t_low: 1.0 / f_high,
            t_high: 1.0 / f_low,
        })
    }

    /// Looks a band up by its `Id12k` label.
    pub fn from_label(label: &str) -> Option<Self> {
        band_table().into_iter().find(|b| b.label == label)
    }

    /// Geometric centre frequency.
    pub fn center(&self) -> f64 {
        (self.f_low * self.f_high).sqrt()
    }

    /// Quadrature grid for this band, log-spaced, edges included.
    pub fn grid(&self, points: usize) -> Vec<f64> {
        log_spaced(self.f_low, self.f_high, points)
    }
}

/// Edge `j` (0..=12) of the sub-band partition, computed so that shared
/// edges are bit-identical and the outer edges are exactly 0.25 and 16 Hz.
fn band_edge(j: usize) -> f64 {
    let octaves = (j / 2) as i32;
    let base = REFERENCE_BAND_LOW_HZ * 2f64.powi(octaves);
    if j.is_multiple_of(2) {
        base
    } else {
        base * SQRT_2
    }
}

/// All twelve bands, lowest frequency first.
pub fn band_table() -> Vec<BandDefinition> {
    (1..=BAND_COUNT)
        .map(|k| BandDefinition::new(k).expect("index in range"))
        .collect()
}

pub fn band_labels() -> Vec<String> {
    band_table().into_iter().map(|b| b.label).collect()
}

/// Frequencies covering all twelve bands, `points_per_band` per band with
/// the shared edges kept once: `12 * (points_per_band - 1) + 1` values.
pub fn composite_grid(points_per_band: usize) -> Result<Vec<f64>, ValidationError> {
    validate_points(points_per_band)?;
    let mut grid = Vec::with_capacity(BAND_COUNT * (points_per_band - 1) + 1);
    for band in band_table() {
        let g = band.grid(points_per_band);
        let skip = usize::from(!grid.is_empty());
        grid.extend_from_slice(&g[skip..]);
    }
    Ok(grid)
}

fn validate_points(points: usize) -> Result<(), ValidationError> {
    if points < 2 {
        return Err(ValidationError::new(
            "grid_points_per_band",
            format!("must be at least 2, got {points}"),
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandIntensityResult {
    pub band: BandDefinition,
    pub intensity: f64,
    /// Log-frequency mean of EIS over the band (m²/s³).
    pub eis_log_mean: f64,
    pub component_used: Component,
}

fn near(a: f64, b: f64) -> bool {
    (a - b).abs() <= EDGE_TOLERANCE * a.abs().max(b.abs())
}

/// EIS at frequency `f`: the grid value when `f` is a grid point, otherwise
/// linear in `ln φ` between the neighbouring points. `f` must lie within the
/// grid.
fn interpolate_log(freqs: &[f64], values: &[f64], f: f64) -> f64 {
    if let Some(j) = freqs.iter().position(|&g| near(g, f)) {
        return values[j];
    }
    let u = f.ln();
    let i = freqs.partition_point(|f| f.ln() <= u).clamp(1, freqs.len() - 1);
    let (u0, u1) = (freqs[i - 1].ln(), freqs[i].ln());
    let t = ((u - u0) / (u1 - u0)).clamp(0.0, 1.0);
    values[i - 1] + t * (values[i] - values[i - 1])
}

/// `(1 / ln(f_high/f_low)) ∫ EIS dφ/φ` over the band, trapezoidal in `ln φ`.
pub fn band_log_mean(spectrum: &EisSpectrum, band: &BandDefinition) -> Result<f64, IntensityError> {
    let freqs = spectrum.frequencies();
    let values = spectrum.eis_values();
    let coverage = |reason: String| IntensityError::Coverage {
        label: band.label.clone(),
        f_low: band.f_low,
        f_high: band.f_high,
        reason,
    };
    let (first, last) = (freqs[0], freqs[freqs.len() - 1]);
    if first > band.f_low && !near(first, band.f_low) {
        return Err(coverage(format!("grid starts at {first} Hz")));
    }
    if last < band.f_high && !near(last, band.f_high) {
        return Err(coverage(format!("grid ends at {last} Hz")));
    }
    let inside = freqs
        .iter()
        .filter(|&&f| (f >= band.f_low || near(f, band.f_low)) && (f <= band.f_high || near(f, band.f_high)))
        .count();
    if inside < 2 {
        return Err(coverage(format!("only {inside} grid point(s) inside the band")));
    }

    let (u_low, u_high) = (band.f_low.ln(), band.f_high.ln());
    let mut nodes: Vec<(f64, f64)> = Vec::with_capacity(inside + 2);
    nodes.push((u_low, interpolate_log(freqs, values, band.f_low)));
    for (&f, &e) in freqs.iter().zip(values) {
        if f > band.f_low && f < band.f_high && !near(f, band.f_low) && !near(f, band.f_high) {
            nodes.push((f.ln(), e));
        }
    }
    nodes.push((u_high, interpolate_log(freqs, values, band.f_high)));

    let integral: f64 = nodes
        .windows(2)
        .map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1))
        .sum();
    Ok(integral / (u_high - u_low))
}

/// Band-averaged intensity of one spectrum.
///
/// The returned `component_used` is [`Component::Unspecified`]; station-level
/// aggregation fills in the winning component.
pub fn band_averaged_intensity(
    spectrum: &EisSpectrum,
    band: &BandDefinition,
    model: &IntensityModel,
) -> Result<BandIntensityResult, IntensityError> {
    model.validate()?;
    let mean = band_log_mean(spectrum, band)?;
    let intensity = model.band_intensity_from_mean(mean).map_err(|e| match e {
        IntensityError::Quiescent => IntensityError::QuiescentBand(band.label.clone()),
        other => other,
    })?;
    Ok(BandIntensityResult {
        band: band.clone(),
        intensity,
        eis_log_mean: mean,
        component_used: Component::Unspecified,
    })
}

/// Which components take part in the per-station maximum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ComponentPolicy {
    /// Horizontal (and unlabelled) components only; vertical traces ignored.
    #[default]
    HorizontalOnly,
    All,
}

impl ComponentPolicy {
    fn admits(self, c: Component) -> bool {
        match self {
            ComponentPolicy::HorizontalOnly => !c.is_vertical(),
            ComponentPolicy::All => true,
        }
    }
}

fn eligible(
    components: &[Accelerogram],
    policy: ComponentPolicy,
) -> Result<Vec<&Accelerogram>, IntensityError> {
    let first = components
        .first()
        .ok_or_else(|| IntensityError::NoComponents(String::new()))?;
    if let Some(other) = components
        .iter()
        .find(|a| a.station_code() != first.station_code())
    {
        return Err(IntensityError::MixedStations(
            first.station_code().to_string(),
            other.station_code().to_string(),
        ));
    }
    let used: Vec<_> = components
        .iter()
        .filter(|a| policy.admits(a.component()))
        .collect();
    if used.is_empty() {
        return Err(IntensityError::NoComponents(first.station_code().to_string()));
    }
    Ok(used)
}

/// Larger of the per-component results. Quiescent components never win;
/// on an exact tie the earlier component is kept.
fn component_max(
    per_component: impl IntoIterator<Item = (Component, Result<BandIntensityResult, IntensityError>)>,
    band: &BandDefinition,
) -> Result<BandIntensityResult, IntensityError> {
    let mut best: Option<BandIntensityResult> = None;
    for (component, result) in per_component {
        match result {
            Ok(mut r) => {
                r.component_used = component;
                if best.as_ref().is_none_or(|b| r.intensity > b.intensity) {
                    best = Some(r);
                }
            }
            Err(e) if e.is_quiescent() => {}
            Err(e) => return Err(e),
        }
    }
    best.ok_or_else(|| IntensityError::QuiescentBand(band.label.clone()))
}

/// Station intensity for one band: the maximum over the horizontal
/// components.
pub fn station_band_intensity(
    components: &[Accelerogram],
    band: &BandDefinition,
    model: &IntensityModel,
    grid_points_per_band: usize,
) -> Result<BandIntensityResult, IntensityError> {
    station_band_intensity_with(
        components,
        band,
        model,
        grid_points_per_band,
        ComponentPolicy::default(),
    )
}

pub fn station_band_intensity_with(
    components: &[Accelerogram],
    band: &BandDefinition,
    model: &IntensityModel,
    grid_points_per_band: usize,
    policy: ComponentPolicy,
) -> Result<BandIntensityResult, IntensityError> {
    model.validate()?;
    validate_points(grid_points_per_band)?;
    let used = eligible(components, policy)?;
    let grid = band.grid(grid_points_per_band);
    let mut results = Vec::with_capacity(used.len());
    for acc in used {
        let spectrum = spectral::eis_spectrum(acc, &grid, model.damping_ratio)?;
        results.push((acc.component(), band_averaged_intensity(&spectrum, band, model)));
    }
    component_max(results, band)
}

/// Station intensities for several bands at once.
///
/// Each component's spectrum is computed once on the composite grid; for
/// every band the values are identical to [`station_band_intensity_with`].
/// The outer error covers problems with the station as a whole, the inner
/// one per-band failures such as quiescence.
pub fn station_band_intensities(
    components: &[Accelerogram],
    bands: &[BandDefinition],
    model: &IntensityModel,
    grid_points_per_band: usize,
    policy: ComponentPolicy,
) -> Result<Vec<Result<BandIntensityResult, IntensityError>>, IntensityError> {
    model.validate()?;
    let used = eligible(components, policy)?;
    let grid = composite_grid(grid_points_per_band)?;
    let spectra = used
        .iter()
        .map(|acc| {
            spectral::eis_spectrum(acc, &grid, model.damping_ratio).map(|s| (acc.component(), s))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(bands
        .iter()
        .map(|band| {
            component_max(
                spectra
                    .iter()
                    .map(|(c, s)| (*c, band_averaged_intensity(s, band, model))),
                band,
            )
        })
        .collect())
}
