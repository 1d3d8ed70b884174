//! Run configuration: defaults, overridden by a `key = value` file, then by
//! `--set key=value` flags.

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::ValidationError;
use crate::intensity::{ComponentPolicy, IntensityModel, DEFAULT_GRID_POINTS_PER_BAND};
use crate::mapping::{default_contour_levels, GridSpec, DEFAULT_IDW_POWER};
use crate::spectral::DEFAULT_DAMPING_RATIO;

/// Explicit map bounds, in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundingBox {
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub damping_ratio: f64,
    pub pointwise_log_base: f64,
    pub pointwise_offset: f64,
    pub band_log_base: f64,
    pub band_offset: f64,
    pub grid_points_per_band: usize,
    pub include_vertical: bool,
    pub idw_power: f64,
    pub grid_nx: usize,
    pub grid_ny: usize,
    pub contour_levels: Vec<f64>,
    pub max_distance_mask_km: Option<f64>,
    /// Fraction of the station span added around the stations when no
    /// `bbox` is given.
    pub grid_padding: f64,
    pub grid_min_padding_deg: f64,
    pub bbox: Option<BoundingBox>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            damping_ratio: DEFAULT_DAMPING_RATIO,
            pointwise_log_base: 4.0,
            pointwise_offset: 5.75,
            band_log_base: 7.5,
            band_offset: 6.45,
            grid_points_per_band: DEFAULT_GRID_POINTS_PER_BAND,
            include_vertical: false,
            idw_power: DEFAULT_IDW_POWER,
            grid_nx: 200,
            grid_ny: 200,
            contour_levels: default_contour_levels(),
            max_distance_mask_km: None,
            grid_padding: 0.1,
            grid_min_padding_deg: 0.1,
            bbox: None,
        }
    }
}

pub const KEYS: &[&str] = &[
    "damping_ratio",
    "pointwise_log_base",
    "pointwise_offset",
    "band_log_base",
    "band_offset",
    "grid_points_per_band",
    "include_vertical",
    "idw_power",
    "grid_nx",
    "grid_ny",
    "contour_levels",
    "max_distance_mask_km",
    "grid_padding",
    "grid_min_padding_deg",
    "bbox",
];

fn number<T: std::str::FromStr>(key: &'static str, value: &str) -> Result<T, ValidationError> {
    value
        .parse()
        .map_err(|_| ValidationError::new(key, format!("cannot parse {value:?}")))
}

fn optional(value: &str) -> Option<&str> {
    match value {
        "" | "none" | "off" => None,
        v => Some(v),
    }
}

/// `start:step:stop` (inclusive) or a comma-separated list.
pub fn parse_levels(value: &str) -> Result<Vec<f64>, ValidationError> {
    let parts: Vec<&str> = value.split(':').map(str::trim).collect();
    if parts.len() == 3 {
        let start: f64 = number("contour_levels", parts[0])?;
        let step: f64 = number("contour_levels", parts[1])?;
        let stop: f64 = number("contour_levels", parts[2])?;
        if !(step > 0.0 && stop >= start) {
            return Err(ValidationError::new("contour_levels", "need step > 0 and stop >= start"));
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize;
        return Ok((0..=count).map(|k| start + step * k as f64).collect());
    }
    if parts.len() != 1 {
        return Err(ValidationError::new("contour_levels", "expected start:step:stop or a comma list"));
    }
    value
        .split(',')
        .map(|v| number("contour_levels", v.trim()))
        .collect()
}

impl RunConfig {
    /// Sets one key. Unknown keys are rejected.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ValidationError> {
        let value = value.trim();
        match key.trim() {
            "damping_ratio" => self.damping_ratio = number("damping_ratio", value)?,
            "pointwise_log_base" => self.pointwise_log_base = number("pointwise_log_base", value)?,
            "pointwise_offset" => self.pointwise_offset = number("pointwise_offset", value)?,
            "band_log_base" => self.band_log_base = number("band_log_base", value)?,
            "band_offset" => self.band_offset = number("band_offset", value)?,
            "grid_points_per_band" => self.grid_points_per_band = number("grid_points_per_band", value)?,
            "include_vertical" => self.include_vertical = number("include_vertical", value)?,
            "idw_power" => self.idw_power = number("idw_power", value)?,
            "grid_nx" => self.grid_nx = number("grid_nx", value)?,
            "grid_ny" => self.grid_ny = number("grid_ny", value)?,
            "contour_levels" => self.contour_levels = parse_levels(value)?,
            "max_distance_mask_km" => {
                self.max_distance_mask_km = optional(value)
                    .map(|v| number("max_distance_mask_km", v))
                    .transpose()?
            }
            "grid_padding" => self.grid_padding = number("grid_padding", value)?,
            "grid_min_padding_deg" => self.grid_min_padding_deg = number("grid_min_padding_deg", value)?,
            "bbox" => {
                self.bbox = match optional(value) {
                    None => None,
                    Some(v) => {
                        let parts = v
                            .split(',')
                            .map(|p| number::<f64>("bbox", p.trim()))
                            .collect::<Result<Vec<_>, _>>()?;
                        let [lat_min, lat_max, lon_min, lon_max] = parts[..] else {
                            return Err(ValidationError::new(
                                "bbox",
                                "expected lat_min,lat_max,lon_min,lon_max",
                            ));
                        };
                        Some(BoundingBox {
                            lat_min,
                            lat_max,
                            lon_min,
                            lon_max,
                        })
                    }
                }
            }
            other => {
                return Err(ValidationError::new(
                    "config",
                    format!("unknown key {other:?}; known keys: {}", KEYS.join(", ")),
                ))
            }
        }
        Ok(())
    }

    /// Applies a `key = value` text. `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ValidationError> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                ValidationError::new("config", format!("line {}: expected key = value", n + 1))
            })?;
            self.set(key, value).map_err(|e| {
                ValidationError::new(e.field, format!("line {}: {}", n + 1, e.message))
            })?;
        }
        Ok(())
    }

    /// Defaults, then `file`, then `overrides` (`key=value` each).
    pub fn resolve(file: Option<&Path>, overrides: &[String]) -> Result<Self, ValidationError> {
        let mut cfg = Self::default();
        if let Some(path) = file {
            let text = fs::read_to_string(path).map_err(|e| {
                ValidationError::new("config", format!("{}: {e}", path.display()))
            })?;
            cfg.apply_text(&text)?;
        }
        for item in overrides {
            let (k, v) = item.split_once('=').ok_or_else(|| {
                ValidationError::new("config", format!("--set expects KEY=VALUE, got {item:?}"))
            })?;
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn model(&self) -> IntensityModel {
        IntensityModel {
            pointwise_log_base: self.pointwise_log_base,
            pointwise_offset: self.pointwise_offset,
            band_log_base: self.band_log_base,
            band_offset: self.band_offset,
            damping_ratio: self.damping_ratio,
        }
    }

    pub fn component_policy(&self) -> ComponentPolicy {
        if self.include_vertical {
            ComponentPolicy::All
        } else {
            ComponentPolicy::HorizontalOnly
        }
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        self.model().validate()?;
        if self.grid_points_per_band < 2 {
            return Err(ValidationError::new("grid_points_per_band", "must be at least 2"));
        }
        if !(self.idw_power.is_finite() && self.idw_power > 0.0) {
            return Err(ValidationError::new("idw_power", "must be > 0"));
        }
        if self.grid_nx < 2 || self.grid_ny < 2 {
            return Err(ValidationError::new("grid_nx/grid_ny", "must be at least 2"));
        }
        if self.contour_levels.iter().any(|l| !l.is_finite())
            || self.contour_levels.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(ValidationError::new("contour_levels", "must be finite and strictly increasing"));
        }
        if let Some(d) = self.max_distance_mask_km {
            if !(d.is_finite() && d > 0.0) {
                return Err(ValidationError::new("max_distance_mask_km", "must be > 0"));
            }
        }
        if !(self.grid_padding.is_finite() && self.grid_padding >= 0.0) {
            return Err(ValidationError::new("grid_padding", "must be >= 0"));
        }
        if !(self.grid_min_padding_deg.is_finite() && self.grid_min_padding_deg >= 0.0) {
            return Err(ValidationError::new("grid_min_padding_deg", "must be >= 0"));
        }
        if let Some(b) = self.bbox {
            GridSpec::new(b.lat_min, b.lat_max, b.lon_min, b.lon_max, self.grid_nx, self.grid_ny)?;
        }
        Ok(())
    }

    /// Grid for the map: the configured box, or the stations' box padded.
    pub fn grid_spec(&self, stations: &[(f64, f64)]) -> Result<GridSpec, ValidationError> {
        match self.bbox {
            Some(b) => GridSpec::new(b.lat_min, b.lat_max, b.lon_min, b.lon_max, self.grid_nx, self.grid_ny),
            None => GridSpec::around(
                stations,
                self.grid_nx,
                self.grid_ny,
                self.grid_padding,
                self.grid_min_padding_deg,
            ),
        }
    }
}
