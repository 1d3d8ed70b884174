//! `instint` command line: `bands`, `spectrum`, `intensity` and `map`.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data or
//! validation error, 3 internal error.

pub mod config;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::error::{IngestError, IntensityError, MappingError, ValidationError};
use crate::ingestion::{self, EventDataset, EventMeta, Units};
use crate::intensity::{self, BandDefinition, BandIntensityResult};
use crate::mapping::{self, IntensityObservation};
use crate::spectral::{self, Component};

pub use config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "instint", version, about = "Band-averaged instrumental seismic intensity and intensity maps")]
pub struct Cli {
    /// Configuration file with `key = value` lines
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Machine-readable output on stdout
    #[arg(long, global = true)]
    pub json: bool,
    /// Override one configuration key (repeatable)
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// List the twelve frequency bands
    Bands,
    /// Destructiveness integral and pointwise intensity over the band grid
    Spectrum {
        record: PathBuf,
        /// Units to assume when the record header has none (m/s2, cm/s2, g)
        #[arg(long)]
        units: Option<String>,
        /// Write spectrum.csv and run.json here instead of printing
        #[arg(long, value_name = "DIR")]
        out_dir: Option<PathBuf>,
    },
    /// Per-station band intensities for an event directory
    Intensity {
        dataset: PathBuf,
        /// Write intensity.json and run.json here
        #[arg(long, value_name = "DIR")]
        out_dir: Option<PathBuf>,
    },
    /// Gridded field and contours for one band
    Map {
        dataset: PathBuf,
        /// Band label, Id121 .. Id1212
        #[arg(long)]
        band: String,
        /// Directory receiving <band>_grid.csv, <band>_contours.geojson and run.json
        #[arg(long, value_name = "DIR")]
        out_dir: PathBuf,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Internal(_) => 3,
        }
    }
}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<IntensityError> for CliError {
    fn from(e: IntensityError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<MappingError> for CliError {
    fn from(e: MappingError) -> Self {
        CliError::Data(e.to_string())
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::Internal(format!("{}: {e}", path.display()))
}

/// Parses `args` (program name first) and runs the command, writing normal
/// output to `out` and diagnostics to stderr. Returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    0
                }
                _ => {
                    eprint!("{e}");
                    1
                }
            };
        }
    };
    match execute(&cli, out) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let cfg = RunConfig::resolve(cli.config.as_deref(), &cli.overrides)
        .map_err(|e| CliError::Usage(format!("configuration: {e}")))?;
    let emit = |out: &mut dyn Write, text: &str| {
        out.write_all(text.as_bytes())
            .map_err(|e| CliError::Internal(format!("stdout: {e}")))
    };
    match &cli.command {
        Command::Bands => emit(out, &bands_output(cli.json)),
        Command::Spectrum { record, units, out_dir } => {
            let declared = units
                .as_deref()
                .map(|u| u.parse::<Units>().map_err(|e| CliError::Usage(e.to_string())))
                .transpose()?;
            let rows = spectrum_rows(record, declared, &cfg)?;
            let text = if cli.json {
                serde_json::to_string_pretty(&rows).map_err(|e| CliError::Internal(e.to_string()))? + "\n"
            } else {
                spectrum_csv(&rows)
            };
            match out_dir {
                Some(dir) => {
                    fs::create_dir_all(dir).map_err(io_err(dir))?;
                    let path = dir.join("spectrum.csv");
                    fs::write(&path, spectrum_csv(&rows)).map_err(io_err(&path))?;
                    let inputs = vec![input_entry(record, &file_name(record))?];
                    write_manifest(dir, "spectrum", json!({ "record": file_name(record) }), &cfg, cli, inputs, &["spectrum.csv"])?;
                    emit(out, &format!("wrote {} rows to {}\n", rows.len(), path.display()))
                }
                None => emit(out, &text),
            }
        }
        Command::Intensity { dataset, out_dir } => {
            let data = ingestion::load_event_dataset(dataset)?;
            let report = intensity_report(&data, &cfg)?;
            let json_text = serde_json::to_string_pretty(&report.to_json())
                .map_err(|e| CliError::Internal(e.to_string()))?
                + "\n";
            if let Some(dir) = out_dir {
                fs::create_dir_all(dir).map_err(io_err(dir))?;
                let path = dir.join("intensity.json");
                fs::write(&path, &json_text).map_err(io_err(&path))?;
                write_manifest(dir, "intensity", json!({}), &cfg, cli, dataset_inputs(dataset)?, &["intensity.json"])?;
            }
            if cli.json {
                emit(out, &json_text)
            } else {
                emit(out, &report.table())
            }
        }
        Command::Map { dataset, band, out_dir } => {
            let band = BandDefinition::from_label(band).ok_or_else(|| {
                CliError::Usage(format!(
                    "unknown band {band:?}; valid labels: {}",
                    intensity::band_labels().join(", ")
                ))
            })?;
            let data = ingestion::load_event_dataset(dataset)?;
            let summary = map_outputs(&data, &band, &cfg)?;
            fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
            let grid_name = format!("{}_grid.csv", band.label);
            let contour_name = format!("{}_contours.geojson", band.label);
            let grid_path = out_dir.join(&grid_name);
            let contour_path = out_dir.join(&contour_name);
            fs::write(&grid_path, &summary.grid_csv).map_err(io_err(&grid_path))?;
            fs::write(&contour_path, &summary.geojson).map_err(io_err(&contour_path))?;
            write_manifest(
                out_dir,
                "map",
                json!({ "band": band.label }),
                &cfg,
                cli,
                dataset_inputs(dataset)?,
                &[&grid_name, &contour_name],
            )?;
            emit(out, &summary.describe(cli.json))
        }
    }
}

/// Band listing, as a fixed-width table or a JSON array.
pub fn bands_output(as_json: bool) -> String {
    let bands = intensity::band_table();
    if as_json {
        return serde_json::to_string_pretty(&bands).expect("bands serialise") + "\n";
    }
    let mut s = format!(
        "{:>5}  {:<7} {:>10} {:>10} {:>8} {:>8}\n",
        "index", "label", "f_low_hz", "f_high_hz", "T_low_s", "T_high_s"
    );
    for b in &bands {
        s += &format!(
            "{:>5}  {:<7} {:>10.5} {:>10.5} {:>8.2} {:>8.2}\n",
            b.index, b.label, b.f_low, b.f_high, b.t_low, b.t_high
        );
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumRow {
    pub freq: f64,
    pub eis: f64,
    /// `None` where the integral is zero and the intensity undefined.
    pub i_d: Option<f64>,
}

/// EIS and pointwise intensity on the composite twelve-band grid.
pub fn spectrum_rows(record: &Path, declared: Option<Units>, cfg: &RunConfig) -> Result<Vec<SpectrumRow>, CliError> {
    let rec = ingestion::load_accelerogram(record, declared)?;
    let grid = intensity::composite_grid(cfg.grid_points_per_band).map_err(|e| CliError::Usage(e.to_string()))?;
    let spectrum = spectral::eis_spectrum(&rec.accelerogram, &grid, cfg.damping_ratio)
        .map_err(|e| CliError::Data(e.to_string()))?;
    let model = cfg.model();
    spectrum
        .iter()
        .map(|(freq, eis)| {
            let i_d = match intensity::pointwise_intensity(eis, &model) {
                Ok(v) => Some(v),
                Err(IntensityError::Quiescent) => None,
                Err(e) => return Err(CliError::Data(e.to_string())),
            };
            Ok(SpectrumRow { freq, eis, i_d })
        })
        .collect()
}

/// `freq,eis,i_d`; an empty `i_d` field means undefined (zero EIS).
pub fn spectrum_csv(rows: &[SpectrumRow]) -> String {
    let mut s = String::from("freq,eis,i_d\n");
    for r in rows {
        match r.i_d {
            Some(i) => s += &format!("{},{},{}\n", r.freq, r.eis, i),
            None => s += &format!("{},{},\n", r.freq, r.eis),
        }
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationReport {
    pub code: String,
    pub latitude: f64,
    pub longitude: f64,
    /// One entry per band in band order; `None` for a quiescent band.
    pub bands: Vec<(BandDefinition, Option<BandIntensityResult>)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntensityReport {
    pub event: EventMeta,
    pub stations: Vec<StationReport>,
    /// Stations with no usable component, in code order.
    pub no_data: Vec<String>,
}

impl IntensityReport {
    pub fn to_json(&self) -> Value {
        let stations: Vec<Value> = self
            .stations
            .iter()
            .map(|s| {
                let mut bands = Map::new();
                let mut used = Map::new();
                for (band, r) in &s.bands {
                    bands.insert(band.label.clone(), r.as_ref().map_or(Value::Null, |r| json!(r.intensity)));
                    used.insert(
                        band.label.clone(),
                        r.as_ref().map_or(Value::Null, |r| json!(r.component_used.as_str())),
                    );
                }
                json!({
                    "code": s.code,
                    "lat": s.latitude,
                    "lon": s.longitude,
                    "bands": bands,
                    "component_used": used,
                })
            })
            .collect();
        json!({ "event": self.event, "stations": stations, "no_data": self.no_data })
    }

    /// Fixed-width table, intensities to 2 decimals, `-` for quiescent bands.
    pub fn table(&self) -> String {
        let mut s = format!("event {} ({}), Mw {}, h = {} km\n", self.event.id, self.event.date, self.event.moment_magnitude, self.event.depth_km);
        s += &format!("{:<8}", "station");
        for b in intensity::band_table() {
            s += &format!(" {:>7}", b.label);
        }
        s.push('\n');
        for st in &self.stations {
            s += &format!("{:<8}", st.code);
            for (_, r) in &st.bands {
                match r {
                    Some(r) => s += &format!(" {:>7.2}", r.intensity),
                    None => s += &format!(" {:>7}", "-"),
                }
            }
            s.push('\n');
        }
        if !self.no_data.is_empty() {
            s += &format!("no data: {}\n", self.no_data.join(", "));
        }
        s
    }

    /// Observations for one band from every station where it is defined.
    pub fn observations(&self, band: &BandDefinition) -> Vec<IntensityObservation> {
        self.stations
            .iter()
            .filter_map(|s| {
                let (_, r) = s.bands.iter().find(|(b, _)| b.label == band.label)?;
                r.as_ref().map(|r| IntensityObservation {
                    station_code: s.code.clone(),
                    latitude: s.latitude,
                    longitude: s.longitude,
                    band_label: band.label.clone(),
                    intensity: r.intensity,
                })
            })
            .collect()
    }
}

/// Component-max band intensities for every station with usable traces.
pub fn intensity_report(data: &EventDataset, cfg: &RunConfig) -> Result<IntensityReport, CliError> {
    band_report(data, cfg, &intensity::band_table())
}

fn band_report(data: &EventDataset, cfg: &RunConfig, bands: &[BandDefinition]) -> Result<IntensityReport, CliError> {
    let model = cfg.model();
    let policy = cfg.component_policy();
    let per_station: Vec<(String, Option<StationReport>)> = data
        .records
        .par_iter()
        .map(|(code, traces)| {
            let station = data.station(code).expect("dataset is cross-validated");
            let usable = traces
                .iter()
                .any(|t| policy == intensity::ComponentPolicy::All || t.component() != Component::V);
            if !usable {
                return Ok((code.clone(), None));
            }
            let results = intensity::station_band_intensities(traces, bands, &model, cfg.grid_points_per_band, policy)?;
            let bands = bands
                .iter()
                .cloned()
                .zip(results)
                .map(|(b, r)| match r {
                    Ok(r) => Ok((b, Some(r))),
                    Err(e) if e.is_quiescent() => Ok((b, None)),
                    Err(e) => Err(e),
                })
                .collect::<Result<Vec<_>, IntensityError>>()?;
            Ok((
                code.clone(),
                Some(StationReport {
                    code: code.clone(),
                    latitude: station.latitude,
                    longitude: station.longitude,
                    bands,
                }),
            ))
        })
        .collect::<Result<_, IntensityError>>()?;

    let mut stations = Vec::new();
    let mut no_data: Vec<String> = data.stations_without_data().into_iter().map(String::from).collect();
    for (code, report) in per_station {
        match report {
            Some(r) => stations.push(r),
            None => no_data.push(code),
        }
    }
    no_data.sort();
    Ok(IntensityReport {
        event: data.event.clone(),
        stations,
        no_data,
    })
}

/// Everything `map` writes, plus a summary.
#[derive(Debug, Clone)]
pub struct MapOutputs {
    pub band: String,
    pub station_count: usize,
    pub observation_range: (f64, f64),
    pub grid: mapping::IntensityGrid,
    pub contours: mapping::ContourSet,
    pub grid_csv: String,
    pub geojson: String,
}

impl MapOutputs {
    pub fn describe(&self, as_json: bool) -> String {
        let (gmin, gmax) = self.grid.range().unwrap_or((f64::NAN, f64::NAN));
        if as_json {
            let v = json!({
                "band": self.band,
                "stations": self.station_count,
                "station_min": self.observation_range.0,
                "station_max": self.observation_range.1,
                "grid_min": self.grid.range().map(|r| r.0),
                "grid_max": self.grid.range().map(|r| r.1),
                "contour_lines": self.contours.polyline_count(),
            });
            return serde_json::to_string_pretty(&v).expect("summary serialises") + "\n";
        }
        format!(
            "band {}: {} stations, intensity {:.2}..{:.2}, grid {:.2}..{:.2}, {} contour lines\n",
            self.band,
            self.station_count,
            self.observation_range.0,
            self.observation_range.1,
            gmin,
            gmax,
            self.contours.polyline_count()
        )
    }
}

pub fn map_outputs(data: &EventDataset, band: &BandDefinition, cfg: &RunConfig) -> Result<MapOutputs, CliError> {
    let report = band_report(data, cfg, std::slice::from_ref(band))?;
    let observations = report.observations(band);
    if observations.is_empty() {
        return Err(CliError::Data(format!("no usable station for band {}", band.label)));
    }
    let points: Vec<(f64, f64)> = observations.iter().map(|o| (o.latitude, o.longitude)).collect();
    let spec = cfg.grid_spec(&points).map_err(|e| CliError::Usage(e.to_string()))?;
    let grid = mapping::interpolate_field_masked(&observations, &spec, cfg.idw_power, cfg.max_distance_mask_km)?;
    let contours = mapping::extract_contours(&grid, &cfg.contour_levels).map_err(|e| CliError::Usage(e.to_string()))?;
    let lo = observations.iter().map(|o| o.intensity).fold(f64::INFINITY, f64::min);
    let hi = observations.iter().map(|o| o.intensity).fold(f64::NEG_INFINITY, f64::max);
    Ok(MapOutputs {
        band: band.label.clone(),
        station_count: observations.len(),
        observation_range: (lo, hi),
        grid_csv: mapping::grid_to_csv(&grid),
        geojson: mapping::to_geojson(&contours),
        grid,
        contours,
    })
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok(hex::encode(Sha256::digest(bytes)))
}

fn input_entry(path: &Path, label: &str) -> Result<Value, CliError> {
    Ok(json!({ "path": label, "sha256": sha256_file(path)? }))
}

/// Checksums of every file the dataset loader reads, by relative path.
fn dataset_inputs(dir: &Path) -> Result<Vec<Value>, CliError> {
    let mut inputs = vec![
        input_entry(&dir.join(ingestion::EVENT_FILE), ingestion::EVENT_FILE)?,
        input_entry(&dir.join(ingestion::STATIONS_FILE), ingestion::STATIONS_FILE)?,
    ];
    for p in ingestion::record_paths(dir)? {
        inputs.push(input_entry(&p, &format!("{}/{}", ingestion::RECORDS_DIR, file_name(&p)))?);
    }
    Ok(inputs)
}

fn write_manifest(
    dir: &Path,
    command: &str,
    arguments: Value,
    cfg: &RunConfig,
    cli: &Cli,
    mut inputs: Vec<Value>,
    outputs: &[&str],
) -> Result<(), CliError> {
    if let Some(c) = &cli.config {
        inputs.push(input_entry(c, &format!("config:{}", file_name(c)))?);
    }
    let manifest = json!({
        "tool": "instint",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "arguments": arguments,
        "overrides": cli.overrides,
        "config": cfg,
        "inputs": inputs,
        "outputs": outputs,
    });
    let path = dir.join("run.json");
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Internal(e.to_string()))? + "\n";
    fs::write(&path, text).map_err(io_err(&path))
}

impl From<ValidationError> for CliError {
    fn from(e: ValidationError) -> Self {
        CliError::Data(e.to_string())
    }
}
