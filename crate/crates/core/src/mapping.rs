//! Gridded intensity fields and iso-intensity contours.
//!
//! Station values are spread onto a regular latitude/longitude lattice by
//! inverse-distance weighting, then level curves are traced with marching
//! squares. Both outputs serialise to plain formats: the grid to CSV, the
//! contours to a GeoJSON `FeatureCollection`.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{MappingError, ValidationError};

/// Mean Earth radius (km).
pub const EARTH_RADIUS_KM: f64 = 6371.0088;

/// Nodes closer than this to a station copy the station value.
pub const COINCIDENCE_KM: f64 = 1e-9;

pub const DEFAULT_IDW_POWER: f64 = 2.0;

/// 5.0, 5.5, ..., 9.0
pub fn default_contour_levels() -> Vec<f64> {
    (0..=8).map(|k| 5.0 + 0.5 * k as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntensityObservation {
    pub station_code: String,
    pub latitude: f64,
    pub longitude: f64,
    pub band_label: String,
    pub intensity: f64,
}

impl IntensityObservation {
    fn validate(&self) -> Result<(), ValidationError> {
        if !self.intensity.is_finite() {
            return Err(ValidationError::new(
                "intensity",
                format!("station {}: intensity is not finite", self.station_code),
            ));
        }
        if !((-90.0..=90.0).contains(&self.latitude) && (-180.0..=180.0).contains(&self.longitude)) {
            return Err(ValidationError::new(
                "coordinates",
                format!("station {}: coordinates out of range", self.station_code),
            ));
        }
        Ok(())
    }
}

/// Regular lattice of `nx` × `ny` nodes spanning the bounding box, edges
/// included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    pub fn new(
        lat_min: f64,
        lat_max: f64,
        lon_min: f64,
        lon_max: f64,
        nx: usize,
        ny: usize,
    ) -> Result<Self, ValidationError> {
        let spec = Self {
            lat_min,
            lat_max,
            lon_min,
            lon_max,
            nx,
            ny,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        let finite = [self.lat_min, self.lat_max, self.lon_min, self.lon_max]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.lat_max <= self.lat_min {
            return Err(ValidationError::new("lat_min/lat_max", "need lat_max > lat_min"));
        }
        if self.lon_max <= self.lon_min {
            return Err(ValidationError::new("lon_min/lon_max", "need lon_max > lon_min"));
        }
        if self.lat_min < -90.0 || self.lat_max > 90.0 || self.lon_min < -180.0 || self.lon_max > 180.0 {
            return Err(ValidationError::new("bbox", "bounding box outside valid coordinates"));
        }
        if self.nx < 2 || self.ny < 2 {
            return Err(ValidationError::new("nx/ny", format!("need at least 2 nodes per axis, got {}x{}", self.nx, self.ny)));
        }
        Ok(())
    }

    /// Bounding box of `points` (lat, lon) widened by `padding` of its span on
    /// every side, with at least `min_padding_deg` degrees.
    pub fn around(
        points: &[(f64, f64)],
        nx: usize,
        ny: usize,
        padding: f64,
        min_padding_deg: f64,
    ) -> Result<Self, ValidationError> {
        if points.is_empty() {
            return Err(ValidationError::new("bbox", "no points to bound"));
        }
        let fold = |f: fn(f64, f64) -> f64, init: f64, pick: fn(&(f64, f64)) -> f64| {
            points.iter().map(pick).fold(init, f)
        };
        let (lat0, lat1) = (fold(f64::min, f64::INFINITY, |p| p.0), fold(f64::max, f64::NEG_INFINITY, |p| p.0));
        let (lon0, lon1) = (fold(f64::min, f64::INFINITY, |p| p.1), fold(f64::max, f64::NEG_INFINITY, |p| p.1));
        let pad_lat = ((lat1 - lat0) * padding).max(min_padding_deg);
        let pad_lon = ((lon1 - lon0) * padding).max(min_padding_deg);
        Self::new(
            (lat0 - pad_lat).max(-90.0),
            (lat1 + pad_lat).min(90.0),
            (lon0 - pad_lon).max(-180.0),
            (lon1 + pad_lon).min(180.0),
            nx,
            ny,
        )
    }

    pub fn lon_at(&self, i: usize) -> f64 {
        if i + 1 == self.nx {
            return self.lon_max;
        }
        self.lon_min + (self.lon_max - self.lon_min) * i as f64 / (self.nx - 1) as f64
    }

    pub fn lat_at(&self, j: usize) -> f64 {
        if j + 1 == self.ny {
            return self.lat_max;
        }
        self.lat_min + (self.lat_max - self.lat_min) * j as f64 / (self.ny - 1) as f64
    }

    pub fn mid_latitude(&self) -> f64 {
        0.5 * (self.lat_min + self.lat_max)
    }

    pub fn contains(&self, lat: f64, lon: f64) -> bool {
        (self.lat_min..=self.lat_max).contains(&lat) && (self.lon_min..=self.lon_max).contains(&lon)
    }
}

/// Equirectangular projection about a reference latitude, in km.
#[derive(Debug, Clone, Copy)]
pub struct LocalProjection {
    cos_ref: f64,
}

impl LocalProjection {
    pub fn new(reference_latitude: f64) -> Self {
        Self {
            cos_ref: reference_latitude.to_radians().cos(),
        }
    }

    pub fn project(&self, lat: f64, lon: f64) -> (f64, f64) {
        (
            EARTH_RADIUS_KM * lon.to_radians() * self.cos_ref,
            EARTH_RADIUS_KM * lat.to_radians(),
        )
    }

    pub fn distance_km(&self, a: (f64, f64), b: (f64, f64)) -> f64 {
        let (ax, ay) = self.project(a.0, a.1);
        let (bx, by) = self.project(b.0, b.1);
        (ax - bx).hypot(ay - by)
    }
}

/// Intensity values on a [`GridSpec`] lattice, row-major with rows running
/// south to north. `None` marks nodes masked as too far from any station.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntensityGrid {
    pub spec: GridSpec,
    pub values: Vec<Option<f64>>,
    pub band_label: String,
}

impl IntensityGrid {
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.values[j * self.spec.nx + i]
    }

    pub fn iter_defined(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().flatten().copied()
    }

    /// Smallest and largest defined value.
    pub fn range(&self) -> Option<(f64, f64)> {
        self.iter_defined().fold(None, |acc, v| match acc {
            None => Some((v, v)),
            Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
        })
    }

    /// Node `(i, j)` holding the largest defined value; the first in row-major
    /// order wins ties.
    pub fn argmax(&self) -> Option<(usize, usize)> {
        let mut best: Option<(usize, f64)> = None;
        for (k, v) in self.values.iter().enumerate() {
            if let Some(v) = *v {
                if best.is_none_or(|(_, b)| v > b) {
                    best = Some((k, v));
                }
            }
        }
        best.map(|(k, _)| (k % self.spec.nx, k / self.spec.nx))
    }

    /// Bilinear interpolation at `(lat, lon)`; `None` outside the grid or
    /// next to a masked node.
    pub fn bilinear(&self, lat: f64, lon: f64) -> Option<f64> {
        let s = &self.spec;
        if !s.contains(lat, lon) {
            return None;
        }
        let fx = (lon - s.lon_min) / (s.lon_max - s.lon_min) * (s.nx - 1) as f64;
        let fy = (lat - s.lat_min) / (s.lat_max - s.lat_min) * (s.ny - 1) as f64;
        let i = (fx.floor() as usize).min(s.nx - 2);
        let j = (fy.floor() as usize).min(s.ny - 2);
        let (tx, ty) = (fx - i as f64, fy - j as f64);
        let v00 = self.get(i, j)?;
        let v10 = self.get(i + 1, j)?;
        let v01 = self.get(i, j + 1)?;
        let v11 = self.get(i + 1, j + 1)?;
        Some(
            v00 * (1.0 - tx) * (1.0 - ty) + v10 * tx * (1.0 - ty) + v01 * (1.0 - tx) * ty + v11 * tx * ty,
        )
    }
}

fn check_observations(observations: &[IntensityObservation]) -> Result<&str, MappingError> {
    let first = observations.first().ok_or(MappingError::Empty)?;
    for o in observations {
        o.validate()?;
        if o.band_label != first.band_label {
            return Err(MappingError::MixedBands(first.band_label.clone(), o.band_label.clone()));
        }
    }
    Ok(&first.band_label)
}

/// Inverse-distance-weighted field with weights `d^-power`.
pub fn interpolate_field(
    observations: &[IntensityObservation],
    spec: &GridSpec,
    power: f64,
) -> Result<IntensityGrid, MappingError> {
    interpolate_field_masked(observations, spec, power, None)
}

/// As [`interpolate_field`], additionally leaving undefined every node
/// farther than `max_distance_km` from the nearest station.
pub fn interpolate_field_masked(
    observations: &[IntensityObservation],
    spec: &GridSpec,
    power: f64,
    max_distance_km: Option<f64>,
) -> Result<IntensityGrid, MappingError> {
    let band = check_observations(observations)?.to_string();
    spec.validate()?;
    if !(power.is_finite() && power > 0.0) {
        return Err(ValidationError::new("idw_power", format!("must be > 0, got {power}")).into());
    }
    if let Some(d) = max_distance_km {
        if !(d.is_finite() && d > 0.0) {
            return Err(ValidationError::new("max_distance_mask_km", format!("must be > 0, got {d}")).into());
        }
    }
    let proj = LocalProjection::new(spec.mid_latitude());
    let stations: Vec<((f64, f64), f64)> = observations
        .iter()
        .map(|o| (proj.project(o.latitude, o.longitude), o.intensity))
        .collect();

    let values = (0..spec.nx * spec.ny)
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k % spec.nx, k / spec.nx);
            let (x, y) = proj.project(spec.lat_at(j), spec.lon_at(i));
            idw_at(&stations, x, y, power, max_distance_km)
        })
        .collect();
    Ok(IntensityGrid {
        spec: *spec,
        values,
        band_label: band,
    })
}

fn idw_at(
    stations: &[((f64, f64), f64)],
    x: f64,
    y: f64,
    power: f64,
    max_distance_km: Option<f64>,
) -> Option<f64> {
    // Weighted mean of offsets from the smallest value, so that equal
    // observations reproduce their value exactly.
    let floor = stations.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
    let mut nearest = f64::INFINITY;
    let (mut num, mut den) = (0.0, 0.0);
    let (mut hit_sum, mut hits) = (0.0, 0usize);
    for &((sx, sy), value) in stations {
        let d = (x - sx).hypot(y - sy);
        nearest = nearest.min(d);
        if d <= COINCIDENCE_KM {
            hit_sum += value;
            hits += 1;
            continue;
        }
        let w = d.powf(-power);
        num += w * (value - floor);
        den += w;
    }
    if max_distance_km.is_some_and(|limit| nearest > limit) {
        return None;
    }
    if hits > 0 {
        return Some(hit_sum / hits as f64);
    }
    Some(floor + num / den)
}

/// An iso-line as (lat, lon) vertices. Closed rings repeat the first vertex
/// at the end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polyline {
    pub points: Vec<(f64, f64)>,
    pub closed: bool,
}

impl Polyline {
    /// Shoelace area in squared degrees (lon × lat); positive when the ring
    /// runs counter-clockwise. Zero for open lines.
    pub fn signed_area(&self) -> f64 {
        if !self.closed {
            return 0.0;
        }
        0.5 * self
            .points
            .windows(2)
            .map(|w| w[0].1 * w[1].0 - w[1].1 * w[0].0)
            .sum::<f64>()
    }

    /// Even-odd point-in-ring test; false for open lines.
    pub fn contains(&self, lat: f64, lon: f64) -> bool {
        if !self.closed {
            return false;
        }
        let mut inside = false;
        for w in self.points.windows(2) {
            let ((la, lo_a), (lb, lo_b)) = (w[0], w[1]);
            if (la > lat) != (lb > lat) {
                let cross = lo_a + (lat - la) / (lb - la) * (lo_b - lo_a);
                if lon < cross {
                    inside = !inside;
                }
            }
        }
        inside
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelContours {
    pub level: f64,
    pub polylines: Vec<Polyline>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourSet {
    pub band_label: String,
    pub contours: Vec<LevelContours>,
}

impl ContourSet {
    pub fn levels(&self) -> Vec<f64> {
        self.contours.iter().map(|c| c.level).collect()
    }

    pub fn polyline_count(&self) -> usize {
        self.contours.iter().map(|c| c.polylines.len()).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Edge {
    /// Between nodes (i, j) and (i + 1, j).
    Horizontal(usize, usize),
    /// Between nodes (i, j) and (i, j + 1).
    Vertical(usize, usize),
}

const BOTTOM: u8 = 0;
const RIGHT: u8 = 1;
const TOP: u8 = 2;
const LEFT: u8 = 3;

/// Edge pairs crossed by the level inside one cell. Corner bits: bottom-left
/// 1, bottom-right 2, top-right 4, top-left 8; a bit is set when the corner
/// is at or above the level. Saddles use the mean of the four corners.
fn cell_segments(case: u8, center_above: bool) -> &'static [(u8, u8)] {
    match case {
        0 | 15 => &[],
        1 | 14 => &[(LEFT, BOTTOM)],
        2 | 13 => &[(BOTTOM, RIGHT)],
        3 | 12 => &[(LEFT, RIGHT)],
        4 | 11 => &[(RIGHT, TOP)],
        6 | 9 => &[(BOTTOM, TOP)],
        7 | 8 => &[(LEFT, TOP)],
        5 if center_above => &[(BOTTOM, RIGHT), (LEFT, TOP)],
        5 => &[(LEFT, BOTTOM), (RIGHT, TOP)],
        10 if center_above => &[(LEFT, BOTTOM), (RIGHT, TOP)],
        10 => &[(BOTTOM, RIGHT), (LEFT, TOP)],
        _ => unreachable!("case index is 4 bits"),
    }
}

fn cell_edge(side: u8, i: usize, j: usize) -> Edge {
    match side {
        BOTTOM => Edge::Horizontal(i, j),
        TOP => Edge::Horizontal(i, j + 1),
        LEFT => Edge::Vertical(i, j),
        _ => Edge::Vertical(i + 1, j),
    }
}

fn crossing(grid: &IntensityGrid, edge: Edge, level: f64) -> (f64, f64) {
    let s = &grid.spec;
    let value = |i, j| grid.get(i, j).expect("segment cells are fully defined");
    match edge {
        Edge::Horizontal(i, j) => {
            let (a, b) = (value(i, j), value(i + 1, j));
            let t = (level - a) / (b - a);
            let (lo0, lo1) = (s.lon_at(i), s.lon_at(i + 1));
            (s.lat_at(j), lo0 + t * (lo1 - lo0))
        }
        Edge::Vertical(i, j) => {
            let (a, b) = (value(i, j), value(i, j + 1));
            let t = (level - a) / (b - a);
            let (la0, la1) = (s.lat_at(j), s.lat_at(j + 1));
            (la0 + t * (la1 - la0), s.lon_at(i))
        }
    }
}

fn lex(a: &(f64, f64), b: &(f64, f64)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1))
}

fn trace_level(grid: &IntensityGrid, level: f64) -> Vec<Polyline> {
    let s = &grid.spec;
    let mut segments: Vec<(Edge, Edge)> = Vec::new();
    for j in 0..s.ny - 1 {
        for i in 0..s.nx - 1 {
            let corners = [
                grid.get(i, j),
                grid.get(i + 1, j),
                grid.get(i + 1, j + 1),
                grid.get(i, j + 1),
            ];
            let Some(c) = corners.iter().copied().collect::<Option<Vec<f64>>>() else {
                continue;
            };
            let case = c
                .iter()
                .enumerate()
                .fold(0u8, |acc, (bit, v)| acc | (u8::from(*v >= level) << bit));
            let center_above = (c[0] + c[1] + c[2] + c[3]) / 4.0 >= level;
            for &(a, b) in cell_segments(case, center_above) {
                segments.push((cell_edge(a, i, j), cell_edge(b, i, j)));
            }
        }
    }

    let mut by_edge: BTreeMap<Edge, Vec<usize>> = BTreeMap::new();
    for (k, (a, b)) in segments.iter().enumerate() {
        by_edge.entry(*a).or_default().push(k);
        by_edge.entry(*b).or_default().push(k);
    }
    let mut used = vec![false; segments.len()];

    let walk = |start: Edge, used: &mut Vec<bool>| -> Option<(Vec<Edge>, bool)> {
        let mut chain = vec![start];
        let mut at = start;
        loop {
            let next = by_edge[&at].iter().copied().find(|&k| !used[k]);
            let Some(k) = next else { break };
            used[k] = true;
            let (a, b) = segments[k];
            at = if a == at { b } else { a };
            chain.push(at);
            if at == start {
                return Some((chain, true));
            }
        }
        (chain.len() > 1).then_some((chain, false))
    };

    let mut chains = Vec::new();
    let open_starts: Vec<Edge> = by_edge
        .iter()
        .filter(|(_, segs)| segs.len() == 1)
        .map(|(e, _)| *e)
        .collect();
    for e in open_starts {
        if let Some(c) = walk(e, &mut used) {
            chains.push(c);
        }
    }
    for k in 0..segments.len() {
        if !used[k] {
            if let Some(c) = walk(segments[k].0, &mut used) {
                chains.push(c);
            }
        }
    }

    let mut polylines: Vec<Polyline> = chains
        .into_iter()
        .map(|(edges, closed)| {
            let mut points: Vec<(f64, f64)> = edges.iter().map(|e| crossing(grid, *e, level)).collect();
            if closed {
                points.pop();
                let start = points
                    .iter()
                    .enumerate()
                    .min_by(|a, b| lex(a.1, b.1))
                    .map_or(0, |(k, _)| k);
                points.rotate_left(start);
                points.push(points[0]);
            }
            Polyline { points, closed }
        })
        .collect();
    polylines.sort_by(|a, b| lex(&a.points[0], &b.points[0]));
    polylines
}

/// Marching-squares level curves, one entry per level in input order.
pub fn extract_contours(grid: &IntensityGrid, levels: &[f64]) -> Result<ContourSet, ValidationError> {
    if let Some(l) = levels.iter().find(|l| !l.is_finite()) {
        return Err(ValidationError::new("levels", format!("level {l} is not finite")));
    }
    if levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(ValidationError::new("levels", "levels must be strictly increasing"));
    }
    Ok(ContourSet {
        band_label: grid.band_label.clone(),
        contours: levels
            .iter()
            .map(|&level| LevelContours {
                level,
                polylines: trace_level(grid, level),
            })
            .collect(),
    })
}

/// RFC 7946 `FeatureCollection`: closed rings become `Polygon`s wound
/// counter-clockwise, open lines `LineString`s. Coordinates are `[lon, lat]`.
pub fn to_geojson(contours: &ContourSet) -> String {
    let mut features = Vec::new();
    for level in &contours.contours {
        for line in &level.polylines {
            let mut coords: Vec<Value> = line.points.iter().map(|(lat, lon)| json!([lon, lat])).collect();
            let geometry = if line.closed && line.points.len() >= 4 {
                if line.signed_area() < 0.0 {
                    coords.reverse();
                }
                json!({ "type": "Polygon", "coordinates": [coords] })
            } else {
                json!({ "type": "LineString", "coordinates": coords })
            };
            features.push(json!({
                "type": "Feature",
                "geometry": geometry,
                "properties": { "band": contours.band_label, "level": level.level },
            }));
        }
    }
    let doc = json!({ "type": "FeatureCollection", "features": features });
    serde_json::to_string(&doc).expect("GeoJSON serialises") + "\n"
}

/// `lat,lon,intensity` rows, south to north then west to east. Intensities
/// use 4 decimals; masked nodes leave the field empty.
pub fn grid_to_csv(grid: &IntensityGrid) -> String {
    let s = &grid.spec;
    let mut out = String::with_capacity(s.nx * s.ny * 32 + 20);
    out.push_str("lat,lon,intensity\n");
    for j in 0..s.ny {
        let lat = s.lat_at(j);
        for i in 0..s.nx {
            let _ = write!(out, "{lat:.6},{:.6},", s.lon_at(i));
            if let Some(v) = grid.get(i, j) {
                let _ = write!(out, "{v:.4}");
            }
            out.push('\n');
        }
    }
    out
}

/// Reads a grid written by [`grid_to_csv`]. Lattice size and bounds come
/// from the distinct coordinates, which must form a full rectangle in the
/// documented order.
pub fn grid_from_csv(text: &str, band_label: &str) -> Result<IntensityGrid, ValidationError> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (k, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| ValidationError::new("csv", format!("row {}: {e}", k + 2)))?;
        let num = |idx: usize, name: &'static str| -> Result<f64, ValidationError> {
            rec.get(idx)
                .and_then(|t| t.trim().parse().ok())
                .ok_or_else(|| ValidationError::new(name, format!("row {}: not a number", k + 2)))
        };
        let value = match rec.get(2).map(str::trim) {
            None | Some("") => None,
            Some(_) => Some(num(2, "intensity")?),
        };
        rows.push((num(0, "lat")?, num(1, "lon")?, value));
    }
    let ny = rows.iter().filter(|r| r.1 == rows[0].1).count();
    if ny == 0 || rows.len() % ny != 0 {
        return Err(ValidationError::new("csv", "rows do not form a rectangular grid"));
    }
    let nx = rows.len() / ny;
    let (first, last) = (rows[0], rows[rows.len() - 1]);
    let spec = GridSpec::new(first.0, last.0, first.1, last.1, nx, ny)?;
    Ok(IntensityGrid {
        spec,
        values: rows.into_iter().map(|r| r.2).collect(),
        band_label: band_label.to_string(),
    })
}
