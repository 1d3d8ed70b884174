//! Record, station table and event readers.
//!
//! Accelerogram files are plain UTF-8 text: `key=value` header lines followed
//! by samples in decimal notation, one per line. `#` starts a comment.
//!
//! ```text
//! # Station one, north-south
//! station=STA1
//! component=H1
//! dt=0.01
//! units=cm/s2
//! instrument=SMA-1
//! 0.0
//! 1.25
//! ...
//! ```
//!
//! Required header keys are `station`, `component` (`H1`, `H2`, `V`), `dt`
//! (seconds) and `units` (`m/s2`, `cm/s2`, `g`). Any other key is kept as
//! opaque metadata. Samples are converted to m/s² on load.
//!
//! An event directory holds `event.json`, `stations.csv` and a `records/`
//! directory with one file per trace.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{IngestError, ValidationError};
use crate::spectral::{Accelerogram, Component};

/// Standard gravity, m/s².
pub const STANDARD_GRAVITY: f64 = 9.80665;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Units {
    #[serde(rename = "m/s2")]
    MetersPerSecondSquared,
    #[serde(rename = "cm/s2")]
    CentimetersPerSecondSquared,
    #[serde(rename = "g")]
    StandardGravity,
}

impl Units {
    /// Multiplier taking a value in these units to m/s².
    pub fn to_si_factor(self) -> f64 {
        match self {
            Units::MetersPerSecondSquared => 1.0,
            Units::CentimetersPerSecondSquared => 0.01,
            Units::StandardGravity => STANDARD_GRAVITY,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Units::MetersPerSecondSquared => "m/s2",
            Units::CentimetersPerSecondSquared => "cm/s2",
            Units::StandardGravity => "g",
        }
    }
}

impl FromStr for Units {
    type Err = ValidationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "m/s2" => Ok(Units::MetersPerSecondSquared),
            "cm/s2" => Ok(Units::CentimetersPerSecondSquared),
            "g" => Ok(Units::StandardGravity),
            other => Err(ValidationError::new(
                "units",
                format!("unknown unit {other:?} (expected m/s2, cm/s2 or g)"),
            )),
        }
    }
}

/// A parsed record file: the trace plus header keys that computation does
/// not use.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordFile {
    pub accelerogram: Accelerogram,
    pub units: Units,
    pub metadata: BTreeMap<String, String>,
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> IngestError {
    IngestError::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Parses record text. `path` is only used in error messages.
///
/// `declared_units` fills in a missing `units` header; if both are present
/// they must agree.
pub fn parse_accelerogram(
    text: &str,
    path: &Path,
    declared_units: Option<Units>,
) -> Result<RecordFile, IngestError> {
    let mut header: BTreeMap<String, (usize, String)> = BTreeMap::new();
    let mut samples = Vec::new();
    let mut last_line = 0;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        last_line = line_no;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some((key, value)) = line.split_once('=') {
            if !samples.is_empty() {
                return Err(parse_err(path, line_no, "header line after samples"));
            }
            let key = key.trim().to_string();
            if key.is_empty() {
                return Err(parse_err(path, line_no, "empty header key"));
            }
            if header.contains_key(&key) {
                return Err(parse_err(path, line_no, format!("duplicate header key {key:?}")));
            }
            header.insert(key, (line_no, value.trim().to_string()));
            continue;
        }
        for token in line.split(|c: char| c == ',' || c.is_whitespace()) {
            if token.is_empty() {
                continue;
            }
            let value: f64 = token
                .parse()
                .map_err(|_| parse_err(path, line_no, format!("non-numeric sample {token:?}")))?;
            if !value.is_finite() {
                return Err(parse_err(path, line_no, format!("non-finite sample {token:?}")));
            }
            samples.push(value);
        }
    }

    let mut take = |key: &str| header.remove(key);
    let required = |entry: Option<(usize, String)>, key: &str| {
        entry.ok_or_else(|| parse_err(path, last_line, format!("missing header key {key:?}")))
    };

    let (station_line, station) = required(take("station"), "station")?;
    if station.is_empty() {
        return Err(parse_err(path, station_line, "invalid station: empty code"));
    }
    let (component_line, component) = required(take("component"), "component")?;
    let component = match Component::from_str(&component) {
        Ok(Component::Unspecified) | Err(_) => {
            return Err(parse_err(
                path,
                component_line,
                format!("invalid component {component:?} (expected H1, H2 or V)"),
            ))
        }
        Ok(c) => c,
    };
    let (dt_line, dt_text) = required(take("dt"), "dt")?;
    let dt: f64 = dt_text
        .parse()
        .map_err(|_| parse_err(path, dt_line, format!("invalid dt: {dt_text:?} is not a number")))?;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(parse_err(path, dt_line, format!("invalid dt: must be > 0, got {dt_text}")));
    }
    let units = match (take("units"), declared_units) {
        (Some((line, text)), declared) => {
            let u = Units::from_str(&text).map_err(|e| parse_err(path, line, e.to_string()))?;
            if let Some(d) = declared.filter(|d| *d != u) {
                return Err(parse_err(
                    path,
                    line,
                    format!("units {} conflict with declared units {}", u.as_str(), d.as_str()),
                ));
            }
            u
        }
        (None, Some(d)) => d,
        (None, None) => return Err(parse_err(path, last_line, "missing header key \"units\"")),
    };

    let factor = units.to_si_factor();
    if factor != 1.0 {
        samples.iter_mut().for_each(|a| *a *= factor);
    }
    let accelerogram = Accelerogram::new(samples, dt, component, station)
        .map_err(|e| parse_err(path, last_line, e.to_string()))?;
    Ok(RecordFile {
        accelerogram,
        units,
        metadata: header.into_iter().map(|(k, (_, v))| (k, v)).collect(),
    })
}

/// Reads and parses one record file.
pub fn load_accelerogram(path: &Path, declared_units: Option<Units>) -> Result<RecordFile, IngestError> {
    let text = fs::read_to_string(path).map_err(|e| IngestError::io(path, e))?;
    parse_accelerogram(&text, path, declared_units)
}

/// Serialises a trace in m/s². Samples use the shortest representation that
/// parses back to the same `f64`.
pub fn format_accelerogram(acc: &Accelerogram, metadata: &BTreeMap<String, String>) -> String {
    let mut out = String::with_capacity(acc.samples().len() * 12 + 128);
    let component = match acc.component() {
        Component::Unspecified => Component::H1,
        c => c,
    };
    let _ = writeln!(out, "station={}", acc.station_code());
    let _ = writeln!(out, "component={component}");
    let _ = writeln!(out, "dt={}", acc.dt());
    let _ = writeln!(out, "units=m/s2");
    for (k, v) in metadata {
        if !matches!(k.as_str(), "station" | "component" | "dt" | "units") {
            let _ = writeln!(out, "{k}={v}");
        }
    }
    for a in acc.samples() {
        let _ = writeln!(out, "{a}");
    }
    out
}

pub fn write_accelerogram(path: &Path, acc: &Accelerogram) -> Result<(), IngestError> {
    fs::write(path, format_accelerogram(acc, &BTreeMap::new())).map_err(|e| IngestError::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationMeta {
    pub code: String,
    pub name: String,
    pub latitude: f64,
    pub longitude: f64,
}

impl StationMeta {
    pub fn validate(&self) -> Result<(), ValidationError> {
        if self.code.trim().is_empty() {
            return Err(ValidationError::new("code", "station code is empty"));
        }
        if !(self.latitude.is_finite() && (-90.0..=90.0).contains(&self.latitude)) {
            return Err(ValidationError::new(
                "lat",
                format!("latitude {} outside [-90, 90]", self.latitude),
            ));
        }
        if !(self.longitude.is_finite() && (-180.0..=180.0).contains(&self.longitude)) {
            return Err(ValidationError::new(
                "lon",
                format!("longitude {} outside [-180, 180]", self.longitude),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Deserialize)]
struct StationRow {
    code: String,
    name: String,
    lat: f64,
    lon: f64,
}

/// Parses `stations.csv` content (`code,name,lat,lon`). Row numbers in
/// errors count the header as row 1.
pub fn parse_station_table(text: &str, path: &Path) -> Result<Vec<StationMeta>, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| row_err(path, 1, e.to_string()))?
        .clone();
    let expected = ["code", "name", "lat", "lon"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(row_err(
            path,
            1,
            format!("header must be {:?}, got {:?}", expected.join(","), headers.iter().collect::<Vec<_>>().join(",")),
        ));
    }
    let mut stations = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, row) in reader.deserialize::<StationRow>().enumerate() {
        let row_no = i + 2;
        let row = row.map_err(|e| row_err(path, row_no, e.to_string()))?;
        let station = StationMeta {
            code: row.code,
            name: row.name,
            latitude: row.lat,
            longitude: row.lon,
        };
        station
            .validate()
            .map_err(|e| row_err(path, row_no, e.to_string()))?;
        if !seen.insert(station.code.clone()) {
            return Err(row_err(path, row_no, format!("duplicate station code {:?}", station.code)));
        }
        stations.push(station);
    }
    Ok(stations)
}

fn row_err(path: &Path, row: usize, message: String) -> IngestError {
    IngestError::Row {
        path: path.to_path_buf(),
        row,
        message,
    }
}

pub fn load_station_table(path: &Path) -> Result<Vec<StationMeta>, IngestError> {
    let text = fs::read_to_string(path).map_err(|e| IngestError::io(path, e))?;
    parse_station_table(&text, path)
}

/// Writes a station table in the format read by [`load_station_table`].
pub fn format_station_table(stations: &[StationMeta]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let _ = w.write_record(["code", "name", "lat", "lon"]);
    for s in stations {
        let _ = w.write_record([
            s.code.clone(),
            s.name.clone(),
            s.latitude.to_string(),
            s.longitude.to_string(),
        ]);
    }
    String::from_utf8(w.into_inner().unwrap_or_default()).unwrap_or_default()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Epicenter {
    pub lat: f64,
    pub lon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventMeta {
    pub id: String,
    pub date: NaiveDate,
    #[serde(rename = "mw")]
    pub moment_magnitude: f64,
    pub depth_km: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epicenter: Option<Epicenter>,
}

impl EventMeta {
    pub fn validate(&self) -> Result<(), ValidationError> {
        if self.id.trim().is_empty() {
            return Err(ValidationError::new("id", "event id is empty"));
        }
        if !(self.moment_magnitude > 0.0 && self.moment_magnitude < 10.0) {
            return Err(ValidationError::new(
                "mw",
                format!("moment magnitude {} outside (0, 10)", self.moment_magnitude),
            ));
        }
        if !(self.depth_km.is_finite() && self.depth_km > 0.0) {
            return Err(ValidationError::new(
                "depth_km",
                format!("focal depth must be > 0, got {}", self.depth_km),
            ));
        }
        if let Some(e) = self.epicenter {
            if !((-90.0..=90.0).contains(&e.lat) && (-180.0..=180.0).contains(&e.lon)) {
                return Err(ValidationError::new("epicenter", "coordinates out of range"));
            }
        }
        Ok(())
    }
}

pub fn parse_event(text: &str, path: &Path) -> Result<EventMeta, IngestError> {
    let event: EventMeta = serde_json::from_str(text).map_err(|e| IngestError::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })?;
    event
        .validate()
        .map_err(|e| IngestError::dataset(path, e.to_string()))?;
    Ok(event)
}

/// One event: metadata, station table and traces grouped by station.
#[derive(Debug, Clone, PartialEq)]
pub struct EventDataset {
    pub event: EventMeta,
    pub stations: Vec<StationMeta>,
    /// Traces per station code, each list sorted by component label.
    pub records: BTreeMap<String, Vec<Accelerogram>>,
}

impl EventDataset {
    /// Cross-validates and assembles a dataset. Traces are grouped by
    /// station and ordered by component, so the input order is irrelevant.
    pub fn new(
        event: EventMeta,
        stations: Vec<StationMeta>,
        traces: Vec<Accelerogram>,
    ) -> Result<Self, ValidationError> {
        event.validate()?;
        let mut codes = BTreeSet::new();
        for s in &stations {
            s.validate()?;
            if !codes.insert(s.code.as_str()) {
                return Err(ValidationError::new(
                    "stations",
                    format!("duplicate station code {:?}", s.code),
                ));
            }
        }
        let mut records: BTreeMap<String, Vec<Accelerogram>> = BTreeMap::new();
        for acc in traces {
            if !codes.contains(acc.station_code()) {
                return Err(ValidationError::new(
                    "records",
                    format!("record references unknown station {:?}", acc.station_code()),
                ));
            }
            let list = records.entry(acc.station_code().to_string()).or_default();
            if list.iter().any(|a| a.component() == acc.component()) {
                return Err(ValidationError::new(
                    "records",
                    format!(
                        "duplicate component {} for station {:?}",
                        acc.component(),
                        acc.station_code()
                    ),
                ));
            }
            list.push(acc);
        }
        for list in records.values_mut() {
            list.sort_by_key(|a| a.component());
        }
        Ok(Self {
            event,
            stations,
            records,
        })
    }

    pub fn station(&self, code: &str) -> Option<&StationMeta> {
        self.stations.iter().find(|s| s.code == code)
    }

    /// Station codes with no trace at all, in table order.
    pub fn stations_without_data(&self) -> Vec<&str> {
        self.stations
            .iter()
            .filter(|s| !self.records.contains_key(&s.code))
            .map(|s| s.code.as_str())
            .collect()
    }

    pub fn record_count(&self) -> usize {
        self.records.values().map(Vec::len).sum()
    }
}

pub const EVENT_FILE: &str = "event.json";
pub const STATIONS_FILE: &str = "stations.csv";
pub const RECORDS_DIR: &str = "records";

/// Regular files in `dir/records`, sorted by file name.
pub fn record_paths(dir: &Path) -> Result<Vec<PathBuf>, IngestError> {
    let records_dir = dir.join(RECORDS_DIR);
    let entries = fs::read_dir(&records_dir).map_err(|e| IngestError::io(&records_dir, e))?;
    let mut paths = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| IngestError::io(&records_dir, e))?;
        let path = entry.path();
        let name = entry.file_name();
        if path.is_file() && !name.to_string_lossy().starts_with('.') {
            paths.push(path);
        }
    }
    paths.sort();
    Ok(paths)
}

/// Loads and cross-validates an event directory.
///
/// Stations without traces are kept; a trace naming an unknown station, a
/// repeated (station, component) pair or an empty `records/` directory is
/// an error.
pub fn load_event_dataset(dir: &Path) -> Result<EventDataset, IngestError> {
    let event_path = dir.join(EVENT_FILE);
    let text = fs::read_to_string(&event_path).map_err(|e| IngestError::io(&event_path, e))?;
    let event = parse_event(&text, &event_path)?;
    let stations = load_station_table(&dir.join(STATIONS_FILE))?;
    let paths = record_paths(dir)?;
    if paths.is_empty() {
        return Err(IngestError::dataset(dir.join(RECORDS_DIR), "no records found"));
    }
    let traces = paths
        .iter()
        .map(|p| load_accelerogram(p, None).map(|r| r.accelerogram))
        .collect::<Result<Vec<_>, _>>()?;
    EventDataset::new(event, stations, traces).map_err(|e| IngestError::dataset(dir, e.to_string()))
}

/// Writes a dataset directory that [`load_event_dataset`] reads back.
/// Record files are named `<station>_<component>.txt`.
pub fn write_event_dataset(dir: &Path, dataset: &EventDataset) -> Result<(), IngestError> {
    let records_dir = dir.join(RECORDS_DIR);
    fs::create_dir_all(&records_dir).map_err(|e| IngestError::io(&records_dir, e))?;
    let event_path = dir.join(EVENT_FILE);
    let json = serde_json::to_string_pretty(&dataset.event).expect("event serialises");
    fs::write(&event_path, json + "\n").map_err(|e| IngestError::io(&event_path, e))?;
    let stations_path = dir.join(STATIONS_FILE);
    fs::write(&stations_path, format_station_table(&dataset.stations))
        .map_err(|e| IngestError::io(&stations_path, e))?;
    for (code, traces) in &dataset.records {
        for acc in traces {
            let path = records_dir.join(format!("{code}_{}.txt", acc.component()));
            write_accelerogram(&path, acc)?;
        }
    }
    Ok(())
}
