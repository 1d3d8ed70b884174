#![allow(dead_code)]

//! Test-only oracles and fixtures. Nothing here calls into the closed-form
//! stepper: the reference oscillator is a plain fine-step RK4 integration.

use std::f64::consts::PI;
use std::path::Path;

use chrono::NaiveDate;
use instrumental_intensity::ingestion::{self, EventDataset, EventMeta, StationMeta};
use instrumental_intensity::{Accelerogram, Component};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Reference response of `x'' + 2ξωx' + ω²x = -a_g(t)` from rest, with
/// `a_g` linear between samples, integrated by classical RK4 using
/// `substeps` steps per sample interval.
pub struct OracleResponse {
    /// Absolute acceleration at every fine step (`substeps` per interval).
    pub fine: Vec<f64>,
    pub fine_dt: f64,
    pub substeps: usize,
}

impl OracleResponse {
    /// Absolute acceleration at the original sample instants.
    pub fn at_samples(&self) -> Vec<f64> {
        self.fine.iter().step_by(self.substeps).copied().collect()
    }

    /// Composite Simpson integral of `w_a²` on the fine grid.
    pub fn eis(&self) -> f64 {
        simpson(&self.fine.iter().map(|a| a * a).collect::<Vec<_>>(), self.fine_dt)
    }

    pub fn peak(&self) -> f64 {
        self.fine.iter().fold(0.0f64, |m, a| m.max(a.abs()))
    }
}

pub fn rk4_oracle(samples: &[f64], dt: f64, freq: f64, xi: f64, substeps: usize) -> OracleResponse {
    assert!(substeps.is_multiple_of(2), "Simpson needs an even number of fine steps per interval");
    let w = 2.0 * PI * freq;
    let h = dt / substeps as f64;
    let accel = |x: f64, v: f64, ag: f64| -ag - 2.0 * xi * w * v - w * w * x;
    let abs_acc = |x: f64, v: f64| -(2.0 * xi * w * v + w * w * x);
    let (mut x, mut v) = (0.0f64, 0.0f64);
    let mut fine = Vec::with_capacity((samples.len() - 1) * substeps + 1);
    fine.push(abs_acc(x, v));
    for pair in samples.windows(2) {
        let (a0, a1) = (pair[0], pair[1]);
        let ag = |tau: f64| a0 + (a1 - a0) * tau / dt;
        for k in 0..substeps {
            let t = k as f64 * h;
            let (k1x, k1v) = (v, accel(x, v, ag(t)));
            let (k2x, k2v) = (
                v + 0.5 * h * k1v,
                accel(x + 0.5 * h * k1x, v + 0.5 * h * k1v, ag(t + 0.5 * h)),
            );
            let (k3x, k3v) = (
                v + 0.5 * h * k2v,
                accel(x + 0.5 * h * k2x, v + 0.5 * h * k2v, ag(t + 0.5 * h)),
            );
            let (k4x, k4v) = (v + h * k3v, accel(x + h * k3x, v + h * k3v, ag(t + h)));
            x += h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
            v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
            fine.push(abs_acc(x, v));
        }
    }
    OracleResponse {
        fine,
        fine_dt: h,
        substeps,
    }
}

pub fn simpson(y: &[f64], h: f64) -> f64 {
    let n = y.len() - 1;
    assert!(n.is_multiple_of(2));
    let mut s = y[0] + y[n];
    for (i, v) in y.iter().enumerate().take(n).skip(1) {
        s += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    s * h / 3.0
}

/// EIS of a unit-area velocity impulse applied at rest, integrated to
/// infinity: `∫v² = v0²/(4ξω)`, `∫x² = v0²/(4ξω³)`, `∫xv = 0`, hence
/// `∫ (2ξωv + ω²x)² dt = v0² ω (1 + 4ξ²) / (4ξ)`.
pub fn impulse_eis(impulse: f64, freq: f64, xi: f64) -> f64 {
    let w = 2.0 * PI * freq;
    impulse * impulse * w * (1.0 + 4.0 * xi * xi) / (4.0 * xi)
}

/// Log-frequency mean of [`impulse_eis`] over `[f_low, f_high]`: the
/// integrand is linear in φ, so `∫ c φ dφ/φ = c (f_high - f_low)`.
pub fn impulse_band_mean(impulse: f64, f_low: f64, f_high: f64, xi: f64) -> f64 {
    impulse_eis(impulse, 1.0, xi) * (f_high - f_low) / (f_high / f_low).ln()
}

/// Discrete impulse: one sample of height `impulse / dt` after a leading
/// zero, so the interpolated pulse has area `impulse`.
pub fn impulse_record(impulse: f64, dt: f64, duration: f64) -> Vec<f64> {
    let n = (duration / dt).round() as usize + 1;
    let mut s = vec![0.0; n];
    s[1] = impulse / dt;
    s
}

pub fn sine(amplitude: f64, freq: f64, dt: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| amplitude * (2.0 * PI * freq * i as f64 * dt).sin())
        .collect()
}

/// Broadband transient: log-spaced sines between 0.2 and 20 Hz with seeded
/// random phases under a `t·exp(-t/τ)` envelope; starts at exactly zero.
pub fn broadband(seed: u64, dt: f64, duration: f64, peak: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = (duration / dt).round() as usize + 1;
    let tones: Vec<(f64, f64)> = (0..60)
        .map(|k| {
            let f = 0.2 * 100f64.powf(k as f64 / 59.0);
            (f, rng.gen_range(0.0..2.0 * PI))
        })
        .collect();
    let tau = duration / 8.0;
    let raw: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 * dt;
            let env = t / tau * (1.0 - t / tau).exp();
            env * tones
                .iter()
                .map(|(f, p)| (2.0 * PI * f * t + p).sin() / f.sqrt())
                .sum::<f64>()
        })
        .collect();
    let max = raw.iter().fold(0.0f64, |m, a| m.max(a.abs()));
    raw.into_iter().map(|a| a * peak / max).collect()
}

/// Seeded white noise with a short cosine taper at the start.
pub fn random_record(rng: &mut ChaCha8Rng, n: usize, peak: f64) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let taper = if i < 20 { 0.5 * (1.0 - (PI * i as f64 / 20.0).cos()) } else { 1.0 };
            taper * rng.gen_range(-peak..peak)
        })
        .collect()
}

pub fn trace(samples: Vec<f64>, dt: f64, component: Component, station: &str) -> Accelerogram {
    Accelerogram::new(samples, dt, component, station).unwrap()
}

pub fn event() -> EventMeta {
    EventMeta {
        id: "synthetic-1".into(),
        date: NaiveDate::from_ymd_opt(2000, 1, 1).unwrap(),
        moment_magnitude: 6.5,
        depth_km: 100.0,
        epicenter: None,
    }
}

pub fn station(code: &str, lat: f64, lon: f64) -> StationMeta {
    StationMeta {
        code: code.into(),
        name: format!("Station {code}"),
        latitude: lat,
        longitude: lon,
    }
}

/// Five stations on a cross around (45, 26.5); records are scaled copies of
/// one broadband trace, scale 1.0 at the centre. Illustrative coordinates.
pub fn five_station_event(base: &[f64], dt: f64) -> EventDataset {
    let layout = [
        ("CEN1", 45.0, 26.5, 1.0),
        ("NOR1", 45.8, 26.5, 0.8),
        ("EAS1", 45.0, 27.6, 0.6),
        ("SOU1", 44.2, 26.5, 0.4),
        ("WES1", 45.0, 25.4, 0.2),
    ];
    let stations = layout.iter().map(|(c, la, lo, _)| station(c, *la, *lo)).collect();
    let mut traces = Vec::new();
    for (code, _, _, scale) in layout {
        let h1: Vec<f64> = base.iter().map(|a| a * scale).collect();
        let h2: Vec<f64> = base.iter().map(|a| a * scale * 0.7).collect();
        traces.push(trace(h1, dt, Component::H1, code));
        traces.push(trace(h2, dt, Component::H2, code));
    }
    EventDataset::new(event(), stations, traces).unwrap()
}

pub fn write_dataset(dir: &Path, data: &EventDataset) {
    ingestion::write_event_dataset(dir, data).unwrap();
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}
