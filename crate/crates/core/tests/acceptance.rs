//! Acceptance criteria AC1–AC9. Each test prints one `[PASS]`/`[FAIL]` line
//! (visible with `--nocapture`) and then fails if the criterion did.
//! Tolerances and runtime budgets are the constants next to each check.

mod common;

use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use common::*;
use instrumental_intensity::cli::{self, intensity_report, map_outputs, spectrum_rows, RunConfig};
use instrumental_intensity::ingestion::{load_accelerogram, write_accelerogram, EventDataset};
use instrumental_intensity::intensity::{
    band_averaged_intensity, band_table, pointwise_intensity, BandDefinition, IntensityModel,
};
use instrumental_intensity::mapping::{
    extract_contours, grid_from_csv, grid_to_csv, interpolate_field, to_geojson, GridSpec,
    IntensityGrid, IntensityObservation,
};
use instrumental_intensity::spectral::{eis_at, EisSpectrum};
use instrumental_intensity::{sdof_absolute_acceleration, Accelerogram, Component, SdofConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn criterion(id: &str, title: &str, budget: Duration, body: impl FnOnce() -> Check) {
    let start = Instant::now();
    let outcome = body();
    let elapsed = start.elapsed();
    let outcome = outcome.and_then(|detail| {
        if elapsed <= budget {
            Ok(detail)
        } else {
            Err(format!("runtime {elapsed:.2?} exceeds {budget:?}"))
        }
    });
    match &outcome {
        Ok(detail) => println!("[PASS] {id} {title} ({elapsed:.2?}) {detail}"),
        Err(why) => println!("[FAIL] {id} {title} ({elapsed:.2?}) {why}"),
    }
    if let Err(why) = outcome {
        panic!("{id} failed: {why}");
    }
}

#[test]
fn ac1_pointwise_calibration() {
    const TOL: f64 = 1e-12;
    criterion("AC1", "pointwise calibration at powers of 4", Duration::from_secs(1), || {
        let m = IntensityModel::default();
        let mut worst = 0.0f64;
        for k in -2..=4 {
            let i = pointwise_intensity(4f64.powi(k), &m).map_err(|e| e.to_string())?;
            let err = (i - (5.75 + k as f64)).abs();
            worst = worst.max(err);
            ensure(err <= TOL, || format!("k={k}: {i}"))?;
        }
        Ok(format!("max error {worst:.1e}"))
    });
}

#[test]
fn ac2_constant_spectrum_calibration() {
    const TOL: f64 = 1e-9;
    criterion("AC2", "constant-spectrum band calibration", Duration::from_secs(1), || {
        let m = IntensityModel::default();
        for band in band_table() {
            for (c, expected) in [(1.0, 6.45), (7.5, 7.45)] {
                let grid = band.grid(25);
                let n = grid.len();
                let s = EisSpectrum::new(grid, vec![c; n], 0.05).map_err(|e| e.to_string())?;
                let i = band_averaged_intensity(&s, &band, &m).map_err(|e| e.to_string())?.intensity;
                ensure((i - expected).abs() <= TOL, || format!("{} EIS={c}: {i}", band.label))?;
            }
        }
        Ok("12 bands".into())
    });
}

#[test]
fn ac3_band_table() {
    const PERIOD_TOL: f64 = 0.005;
    const RATIO_TOL: f64 = 1e-12;
    criterion("AC3", "band table periods and tiling", Duration::from_secs(1), || {
        let bands = band_table();
        ensure(bands.len() == 12, || format!("{} bands", bands.len()))?;
        let table = [(4, 1.00, 1.41), (5, 0.71, 1.00), (6, 0.50, 0.71), (7, 0.35, 0.50)];
        for (k, lo, hi) in table {
            let b = &bands[k - 1];
            ensure(b.index == k, || format!("band order at {k}"))?;
            ensure(
                (b.t_low - lo).abs() <= PERIOD_TOL && (b.t_high - hi).abs() <= PERIOD_TOL,
                || format!("band {k}: {:.4}–{:.4} s", b.t_low, b.t_high),
            )?;
        }
        ensure(bands[0].f_low == 0.25 && bands[11].f_high == 16.0, || "outer edges".into())?;
        for w in bands.windows(2) {
            ensure(w[0].f_high == w[1].f_low, || format!("gap after {}", w[0].label))?;
        }
        for b in &bands {
            ensure((b.f_high / b.f_low - 2f64.sqrt()).abs() <= RATIO_TOL, || format!("{} ratio", b.label))?;
        }
        Ok("bands 4–7 periods, contiguous √2 tiling of 0.25–16 Hz".into())
    });
}

#[test]
fn ac4_sdof_oracle_equivalence() {
    const EIS_REL: f64 = 0.005;
    const PEAK_REL: f64 = 0.01;
    const XI: f64 = 0.05;
    criterion("AC4", "oscillator vs RK4 oracle and transmissibility", Duration::from_secs(30), || {
        let mut rng = ChaCha8Rng::seed_from_u64(0xac4);
        let mut worst = 0.0f64;
        for r in 0..20 {
            let n = rng.gen_range(200..=2000);
            let dt = rng.gen_range(0.004..0.02);
            let f = rng.gen_range(0.25..=16.0f64).min(0.02 / dt);
            let samples = random_record(&mut rng, n, 3.0);
            let acc = trace(samples.clone(), dt, Component::H1, "AC4");
            let eis = eis_at(&acc, &SdofConfig::new(f, XI).unwrap()).map_err(|e| e.to_string())?;
            let oracle = rk4_oracle(&samples, dt, f, XI, 20).eis();
            worst = worst.max(rel(eis, oracle));
            ensure(rel(eis, oracle) <= EIS_REL, || format!("record {r} (n={n}, f={f:.3}): {eis} vs {oracle}"))?;
        }
        let (amp, f) = (1.0, 2.0);
        let dt = 1.0 / (200.0 * f);
        let acc = trace(sine(amp, f, dt, 80 * 200 + 1), dt, Component::H1, "AC4");
        let w = sdof_absolute_acceleration(&acc, &SdofConfig::new(f, XI).unwrap()).map_err(|e| e.to_string())?;
        let peak = w[w.len() - 2000..].iter().fold(0.0f64, |m, a| m.max(a.abs()));
        let expected = amp * (1.0 + 4.0 * XI * XI).sqrt() / (2.0 * XI);
        ensure(rel(peak, expected) <= PEAK_REL, || format!("resonant peak {peak} vs {expected}"))?;
        Ok(format!("worst EIS rel {worst:.1e}, peak rel {:.1e}", rel(peak, expected)))
    });
}

#[test]
fn ac5_scaling_laws_end_to_end() {
    const POINTWISE_TOL: f64 = 1e-9;
    const BAND_TOL: f64 = 1e-6;
    criterion("AC5", "doubling a dataset shifts intensities", Duration::from_secs(60), || {
        let dt = 0.005;
        let base = broadband(55, dt, 16.0, 1.5);
        let doubled: Vec<f64> = base.iter().map(|a| 2.0 * a).collect();
        let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        write_dataset(d1.path(), &five_station_event(&base, dt));
        write_dataset(d2.path(), &five_station_event(&doubled, dt));
        let cfg = RunConfig::default();
        let load = |p: &Path| instrumental_intensity::ingestion::load_event_dataset(p).map_err(|e| e.to_string());
        let (a, b) = (load(d1.path())?, load(d2.path())?);
        let ra = intensity_report(&a, &cfg).map_err(|e| e.to_string())?;
        let rb = intensity_report(&b, &cfg).map_err(|e| e.to_string())?;
        let shift = 2.0 * 2f64.ln() / 7.5f64.ln();
        let mut count = 0;
        for (sa, sb) in ra.stations.iter().zip(&rb.stations) {
            for ((band, x), (_, y)) in sa.bands.iter().zip(&sb.bands) {
                let (x, y) = (x.as_ref().unwrap().intensity, y.as_ref().unwrap().intensity);
                ensure((y - x - shift).abs() <= BAND_TOL, || format!("{} {}: {}", sa.code, band.label, y - x))?;
                count += 1;
            }
        }
        // pointwise: every record of the dataset, through the spectrum command path
        for code in a.records.keys() {
            for comp in ["H1", "H2"] {
                let name = format!("records/{code}_{comp}.txt");
                let pa = spectrum_rows(&d1.path().join(&name), None, &cfg).map_err(|e| e.to_string())?;
                let pb = spectrum_rows(&d2.path().join(&name), None, &cfg).map_err(|e| e.to_string())?;
                for (x, y) in pa.iter().zip(&pb) {
                    let d = y.i_d.unwrap() - x.i_d.unwrap();
                    ensure((d - 1.0).abs() <= POINTWISE_TOL, || format!("{name} at {} Hz: {d}", x.freq))?;
                }
            }
        }
        Ok(format!("{count} band values, 10 pointwise spectra"))
    });
}

#[test]
fn ac6_linear_spectrum_quadrature() {
    const TOL: f64 = 1e-3;
    criterion("AC6", "EIS(φ)=φ on [1,2] Hz quadrature", Duration::from_secs(1), || {
        let band = BandDefinition {
            index: 0,
            f_low: 1.0,
            f_high: 2.0,
            label: "one-two".into(),
            t_low: 0.5,
            t_high: 1.0,
        };
        let exact = 6.45 + (1.0 / 2f64.ln()).ln() / 7.5f64.ln();
        let m = IntensityModel::default();
        let mut errors = Vec::new();
        for points in [25, 49, 97, 193] {
            let grid = band.grid(points);
            let s = EisSpectrum::new(grid.clone(), grid, 0.05).map_err(|e| e.to_string())?;
            let i = band_averaged_intensity(&s, &band, &m).map_err(|e| e.to_string())?.intensity;
            errors.push((i - exact).abs());
        }
        ensure(errors[0] <= TOL, || format!("25 points: error {}", errors[0]))?;
        ensure(errors.windows(2).all(|w| w[1] < w[0]), || format!("not improving: {errors:?}"))?;
        Ok(format!("errors {:.1e} → {:.1e}", errors[0], errors[3]))
    });
}

fn obs(code: &str, lat: f64, lon: f64, v: f64) -> IntensityObservation {
    IntensityObservation {
        station_code: code.into(),
        latitude: lat,
        longitude: lon,
        band_label: "Id125".into(),
        intensity: v,
    }
}

#[test]
fn ac7_mapping_properties() {
    const EXACT: f64 = 1e-9;
    const LEVEL: f64 = 1e-6;
    criterion("AC7", "IDW and contour properties", Duration::from_secs(10), || {
        let spec = GridSpec::new(43.5, 48.3, 20.2, 30.0, 49, 41).map_err(|e| e.to_string())?;
        let mut rng = ChaCha8Rng::seed_from_u64(0xac7);
        for set in 0..100 {
            let n = rng.gen_range(1..20);
            let o: Vec<_> = (0..n)
                .map(|k| obs(&format!("S{k}"), rng.gen_range(43.5..48.3), rng.gen_range(20.2..30.0), rng.gen_range(4.0..9.5)))
                .collect();
            let lo = o.iter().map(|x| x.intensity).fold(f64::INFINITY, f64::min);
            let hi = o.iter().map(|x| x.intensity).fold(f64::NEG_INFINITY, f64::max);
            let g = interpolate_field(&o, &spec, 2.0).map_err(|e| e.to_string())?;
            ensure(g.iter_defined().all(|v| v >= lo && v <= hi), || format!("set {set} out of bounds"))?;
            if set < 10 {
                let c = extract_contours(&g, &[5.0, 6.0, 7.0, 8.0, 9.0]).map_err(|e| e.to_string())?;
                for lc in &c.contours {
                    for &(lat, lon) in lc.polylines.iter().flat_map(|p| &p.points) {
                        let v = g.bilinear(lat, lon).ok_or("vertex outside grid")?;
                        ensure((v - lc.level).abs() <= LEVEL, || format!("vertex at {v} for level {}", lc.level))?;
                    }
                }
            }
        }
        // stations on nodes, and a node midway between two stations
        let (i, j) = (20, 17);
        let o = vec![
            obs("A", spec.lat_at(j), spec.lon_at(i - 3), 6.2),
            obs("B", spec.lat_at(j), spec.lon_at(i + 3), 8.9),
            obs("C", spec.lat_at(j + 9), spec.lon_at(i + 11), 5.1),
        ];
        let g = interpolate_field(&o, &spec, 2.0).map_err(|e| e.to_string())?;
        ensure((g.get(i - 3, j).unwrap() - 6.2).abs() <= EXACT, || "station A not reproduced".into())?;
        ensure((g.get(i + 11, j + 9).unwrap() - 5.1).abs() <= EXACT, || "station C not reproduced".into())?;
        let two = interpolate_field(&o[..2], &spec, 2.0).map_err(|e| e.to_string())?;
        let mid = two.get(i, j).unwrap();
        ensure((mid - 0.5 * (6.2 + 8.9)).abs() <= EXACT, || format!("midpoint {mid}"))?;
        // planar field
        let mut values = Vec::new();
        for jj in 0..spec.ny {
            for ii in 0..spec.nx {
                values.push(Some(0.7 * spec.lat_at(jj) + 0.3 * spec.lon_at(ii) - 30.0));
            }
        }
        let plane = IntensityGrid { spec, values, band_label: "Id125".into() };
        let c = extract_contours(&plane, &[9.0, 9.5, 10.0]).map_err(|e| e.to_string())?;
        let mut worst = 0.0f64;
        for lc in &c.contours {
            ensure(lc.polylines.len() == 1, || format!("level {}: {} lines", lc.level, lc.polylines.len()))?;
            let pts = &lc.polylines[0].points;
            let (p0, p1) = (pts[0], pts[pts.len() - 1]);
            let len = ((p1.0 - p0.0).powi(2) + (p1.1 - p0.1).powi(2)).sqrt();
            for &(lat, lon) in pts {
                let d = ((p1.0 - p0.0) * (lon - p0.1) - (p1.1 - p0.1) * (lat - p0.0)) / len;
                worst = worst.max(d.abs());
            }
        }
        ensure(worst <= EXACT, || format!("planar contour deviates by {worst}"))?;
        Ok(format!("100 random sets; planar deviation {worst:.1e}"))
    });
}

fn read_dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn ac8_synthetic_event_end_to_end() {
    criterion("AC8", "five-station synthetic event", Duration::from_secs(60), || {
        let dt = 0.005;
        let data_dir = tempfile::tempdir().unwrap();
        write_dataset(data_dir.path(), &five_station_event(&broadband(88, dt, 24.0, 2.0), dt));
        let data: EventDataset =
            instrumental_intensity::ingestion::load_event_dataset(data_dir.path()).map_err(|e| e.to_string())?;
        let cfg = RunConfig::default();
        let scale = |code: &str| -> f64 { match code {
            "CEN1" => 1.0,
            "NOR1" => 0.8,
            "EAS1" => 0.6,
            "SOU1" => 0.4,
            _ => 0.2,
        } };

        let report = intensity_report(&data, &cfg).map_err(|e| e.to_string())?;
        let mut stations = report.stations.clone();
        stations.sort_by(|a, b| scale(&b.code).total_cmp(&scale(&a.code)));
        for (k, band) in band_table().iter().enumerate() {
            let values: Vec<f64> = stations.iter().map(|s| s.bands[k].1.as_ref().unwrap().intensity).collect();
            ensure(values.windows(2).all(|w| w[0] > w[1]), || format!("{} not ordered: {values:?}", band.label))?;
        }

        let mut rings = 0;
        for band in band_table() {
            let out = map_outputs(&data, &band, &cfg).map_err(|e| e.to_string())?;
            let g = &out.grid;
            // on a symmetric layout the station can be equidistant from several
            // nodes; the maximum must sit on one of them
            let coslat = g.spec.mid_latitude().to_radians().cos();
            let dist = |i: usize, j: usize| {
                ((g.spec.lat_at(j) - 45.0).powi(2) + ((g.spec.lon_at(i) - 26.5) * coslat).powi(2)).sqrt()
            };
            let (ai, aj) = g.argmax().ok_or("empty grid")?;
            let dmin = (0..g.spec.nx)
                .flat_map(|i| (0..g.spec.ny).map(move |j| (i, j)))
                .map(|(i, j)| dist(i, j))
                .fold(f64::INFINITY, f64::min);
            ensure(dist(ai, aj) <= dmin * (1.0 + 1e-9), || {
                format!("{}: argmax {:?} is {} deg from CEN1, nearest node {dmin}", band.label, (ai, aj), dist(ai, aj))
            })?;

            // levels between the centre and the runner-up close around the centre
            let obs = report.observations(&band);
            let top = obs.iter().find(|o| o.station_code == "CEN1").unwrap().intensity;
            let second = obs.iter().find(|o| o.station_code == "NOR1").unwrap().intensity;
            let levels: Vec<f64> = (1..=4).map(|k| top - (top - second) * k as f64 / 5.0).rev().collect();
            let c = extract_contours(g, &levels).map_err(|e| e.to_string())?;
            // ascending levels: each ring must lie inside the previous one
            let mut outer: Option<&instrumental_intensity::mapping::Polyline> = None;
            for lc in &c.contours {
                ensure(lc.polylines.len() == 1 && lc.polylines[0].closed, || format!("{} level {}: not one closed ring", band.label, lc.level))?;
                let ring = &lc.polylines[0];
                ensure(ring.contains(45.0, 26.5), || format!("{} level {}: centre outside", band.label, lc.level))?;
                if let Some(outer) = outer {
                    ensure(ring.points.iter().all(|&(a, b)| outer.contains(a, b)), || format!("{}: rings cross", band.label))?;
                }
                outer = Some(ring);
                rings += 1;
            }
        }

        let runs: Vec<_> = (0..2)
            .map(|_| {
                let out = tempfile::tempdir().unwrap();
                let mut sink = Vec::new();
                let d = data_dir.path().to_str().unwrap();
                let o = out.path().to_str().unwrap();
                let a = cli::run(["instint", "map", d, "--band", "Id127", "--out-dir", o], &mut sink);
                let b = cli::run(["instint", "intensity", d, "--out-dir", o], &mut sink);
                (a, b, read_dir_bytes(out.path()), sink)
            })
            .collect();
        ensure(runs[0].0 == 0 && runs[0].1 == 0, || "cli exit code".into())?;
        ensure(runs[0].2 == runs[1].2 && runs[0].3 == runs[1].3, || "reruns differ".into())?;
        Ok(format!("12 bands ordered, {rings} nested rings, reruns identical"))
    });
}

#[test]
fn ac9_format_round_trips() {
    const CSV_TOL: f64 = 5e-5;
    criterion("AC9", "record, GeoJSON and grid CSV formats", Duration::from_secs(10), || {
        let mut rng = ChaCha8Rng::seed_from_u64(0xac9);
        let dir = tempfile::tempdir().unwrap();
        for k in 0..20 {
            let n = rng.gen_range(2..3000);
            let samples: Vec<f64> = (0..n).map(|_| rng.gen_range(-50.0..50.0) * 10f64.powi(rng.gen_range(-6..3))).collect();
            let dt = rng.gen_range(1e-4..0.05);
            let acc = Accelerogram::new(samples, dt, Component::H2, "RT9").map_err(|e| e.to_string())?;
            let p = dir.path().join(format!("r{k}.txt"));
            write_accelerogram(&p, &acc).map_err(|e| e.to_string())?;
            let back = load_accelerogram(&p, None).map_err(|e| e.to_string())?.accelerogram;
            let exact = back.dt().to_bits() == dt.to_bits()
                && back.samples().iter().zip(acc.samples()).all(|(a, b)| a.to_bits() == b.to_bits())
                && back == acc;
            ensure(exact, || format!("record {k} not bit-exact"))?;
        }

        let spec = GridSpec::new(44.0, 46.5, 24.0, 28.5, 57, 43).map_err(|e| e.to_string())?;
        let o: Vec<_> = (0..9)
            .map(|k| obs(&format!("G{k}"), rng.gen_range(44.0..46.5), rng.gen_range(24.0..28.5), rng.gen_range(5.0..9.0)))
            .collect();
        let g = interpolate_field(&o, &spec, 2.0).map_err(|e| e.to_string())?;
        let c = extract_contours(&g, &[5.5, 6.0, 6.5, 7.0, 7.5, 8.0, 8.5]).map_err(|e| e.to_string())?;
        let doc: Value = serde_json::from_str(&to_geojson(&c)).map_err(|e| e.to_string())?;
        let features = validate_geojson(&doc)?;

        let back = grid_from_csv(&grid_to_csv(&g), "Id125").map_err(|e| e.to_string())?;
        ensure(back.spec.nx == spec.nx && back.spec.ny == spec.ny, || "grid shape".into())?;
        let worst = back
            .values
            .iter()
            .zip(&g.values)
            .map(|(a, b)| (a.unwrap() - b.unwrap()).abs())
            .fold(0.0f64, f64::max);
        ensure(worst <= CSV_TOL, || format!("csv error {worst}"))?;
        Ok(format!("20 records bit-exact, {features} features valid, csv error {worst:.1e}"))
    });
}

/// RFC 7946 structure: FeatureCollection of Features with object
/// properties; positions are [lon, lat] in range; LineStrings have ≥ 2
/// positions; Polygon rings are closed, have ≥ 4 positions and exterior rings
/// wind counter-clockwise.
fn validate_geojson(doc: &Value) -> Result<usize, String> {
    ensure(doc["type"] == "FeatureCollection", || "not a FeatureCollection".into())?;
    let features = doc["features"].as_array().ok_or("features is not an array")?;
    let position = |p: &Value| -> Result<(f64, f64), String> {
        let p = p.as_array().ok_or("position not an array")?;
        ensure(p.len() == 2 || p.len() == 3, || "position arity".into())?;
        let (x, y) = (p[0].as_f64().ok_or("lon")?, p[1].as_f64().ok_or("lat")?);
        ensure((-180.0..=180.0).contains(&x) && (-90.0..=90.0).contains(&y), || format!("position {x},{y}"))?;
        Ok((x, y))
    };
    for f in features {
        ensure(f["type"] == "Feature", || "not a Feature".into())?;
        ensure(f["properties"].is_object(), || "properties".into())?;
        let coords = f["geometry"]["coordinates"].as_array().ok_or("coordinates")?;
        match f["geometry"]["type"].as_str() {
            Some("LineString") => {
                ensure(coords.len() >= 2, || "short LineString".into())?;
                for p in coords {
                    position(p)?;
                }
            }
            Some("Polygon") => {
                for (k, ring) in coords.iter().enumerate() {
                    let pts = ring.as_array().ok_or("ring")?.iter().map(position).collect::<Result<Vec<_>, _>>()?;
                    ensure(pts.len() >= 4 && pts.first() == pts.last(), || "ring not closed".into())?;
                    let area: f64 = pts.windows(2).map(|w| w[0].0 * w[1].1 - w[1].0 * w[0].1).sum();
                    ensure((k == 0) == (area > 0.0), || "ring winding".into())?;
                }
            }
            other => return Err(format!("geometry {other:?}")),
        }
    }
    Ok(features.len())
}
