use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::substream;

/// Uniformly sampled horizontal ground acceleration (m/s²); sample `k` is at `t = k·dt`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundMotion {
    pub dt: f64,
    pub accel: Vec<f64>,
}

#[derive(Deserialize, Serialize)]
struct Row {
    t: f64,
    accel: f64,
}

impl GroundMotion {
    pub fn new(dt: f64, accel: Vec<f64>) -> Result<Self> {
        if dt.is_nan() || dt <= 0.0 || accel.is_empty() {
            return Err(Error::Config(
                "ground motion needs dt > 0 and at least one sample".into(),
            ));
        }
        if accel.iter().any(|a| !a.is_finite()) {
            return Err(Error::NonFinite("ground acceleration".into()));
        }
        Ok(GroundMotion { dt, accel })
    }

    pub fn zeros(n_steps: usize, dt: f64) -> Self {
        GroundMotion {
            dt,
            accel: vec![0.0; n_steps],
        }
    }

    pub fn n_steps(&self) -> usize {
        self.accel.len()
    }

    pub fn duration(&self) -> f64 {
        self.dt * self.accel.len() as f64
    }

    pub fn scaled(&self, c: f64) -> Self {
        GroundMotion {
            dt: self.dt,
            accel: self.accel.iter().map(|a| a * c).collect(),
        }
    }

    /// First `n` samples.
    pub fn truncated(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.accel.len() {
            return Err(Error::Config(format!(
                "cannot take {n} of {} ground-motion samples",
                self.accel.len()
            )));
        }
        GroundMotion::new(self.dt, self.accel[..n].to_vec())
    }

    /// Read a `t,accel` CSV with a header row; the time column must be uniform.
    pub fn load_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
        let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
        if headers.iter().map(str::trim).collect::<Vec<_>>() != ["t", "accel"] {
            return Err(Error::Format(format!(
                "{}: expected header `t,accel`, found `{}`",
                path.display(),
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let rows: Vec<Row> = reader
            .deserialize()
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| csv_error(path, e))?;
        if rows.len() < 2 {
            return Err(Error::Format(format!(
                "{}: need at least two samples",
                path.display()
            )));
        }
        let dt = rows[1].t - rows[0].t;
        for (k, r) in rows.iter().enumerate() {
            let expect = rows[0].t + k as f64 * dt;
            if (r.t - expect).abs() > 1e-6 * dt.abs().max(1e-12) + 1e-9 * r.t.abs() {
                return Err(Error::Format(format!(
                    "{}: non-uniform sampling at row {} (t = {}, expected {expect})",
                    path.display(),
                    k + 2,
                    r.t
                )));
            }
        }
        GroundMotion::new(dt, rows.into_iter().map(|r| r.accel).collect())
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
        for (k, &a) in self.accel.iter().enumerate() {
            w.serialize(Row {
                t: k as f64 * self.dt,
                accel: a,
            })
            .map_err(|e| csv_error(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Stationary band-limited noise (1–10 Hz random-phase harmonics) under
    /// a build-up / strong-motion / decay envelope, scaled to peak `pga`.
    pub fn synthetic(n_steps: usize, dt: f64, pga: f64, seed: u64) -> Result<Self> {
        if n_steps < 2 {
            return Err(Error::Config(
                "synthetic record needs at least two steps".into(),
            ));
        }
        let mut rng = substream(seed, 0);
        let harmonics: Vec<(f64, f64, f64)> = (0..60)
            .map(|_| {
                let f: f64 = rng.random_range(1.0..10.0);
                let phase = rng.random_range(0.0..std::f64::consts::TAU);
                let amp = rng.random_range(0.5..1.0) / f.sqrt();
                (f, phase, amp)
            })
            .collect();
        let duration = n_steps as f64 * dt;
        let (t1, t2) = (duration / 6.0, duration / 2.0);
        let decay = 3.0 / (duration - t2);
        let mut accel: Vec<f64> = (0..n_steps)
            .map(|k| {
                let t = k as f64 * dt;
                let env = if t < t1 {
                    (t / t1).powi(2)
                } else if t < t2 {
                    1.0
                } else {
                    (-decay * (t - t2)).exp()
                };
                env * harmonics
                    .iter()
                    .map(|(f, p, a)| a * (std::f64::consts::TAU * f * t + p).sin())
                    .sum::<f64>()
            })
            .collect();
        let peak = accel.iter().fold(0.0f64, |m, a| m.max(a.abs()));
        accel.iter_mut().for_each(|a| *a *= pga / peak);
        GroundMotion::new(dt, accel)
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    if !e.is_io_error() {
        return Error::Format(format!("{}: {e}", path.display()));
    }
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Format(format!("{}: {other:?}", path.display())),
    }
}
