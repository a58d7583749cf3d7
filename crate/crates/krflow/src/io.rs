//! Trace CSV, snapshot JSON, sidecar metadata and run manifests.
//!
//! The CSV column set is part of the external contract; numbers are written
//! with 17 significant digits so files round-trip bit-exactly.

use crate::flow::{DiagRecord, FlowTrace, Termination};
use crate::geometry::MetricState;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("malformed trace csv at line {0}")]
    BadCsv(usize),
}

pub const TRACE_HEADER: &str = "t,Y_X,b,mu_X,F_X,res_C0,res_L2,grad_u_C0,lap_u_C0,phidot_C0,X2_max,h_min,h_max,lambda,lambda_X,theta_min,theta_max";

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_trace_csv(trace: &FlowTrace, path: &Path) -> Result<(), IoError> {
    let mut out = String::new();
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for r in &trace.records {
        let cols = [
            r.t, r.y_x, r.b, r.mu_x, r.f_x, r.res_c0, r.res_l2, r.grad_u_c0, r.lap_u_c0,
            r.phidot_c0, r.x2_max, r.h_min, r.h_max, r.lambda, r.lambda_x, r.theta_min,
            r.theta_max,
        ];
        let line: Vec<String> = cols.iter().map(|v| fmt(*v)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// The parsed 17-column trace series.
#[derive(Debug, Clone, Default)]
pub struct TraceCsv {
    pub times: Vec<f64>,
    pub columns: Vec<Vec<f64>>,
    pub names: Vec<String>,
}

impl TraceCsv {
    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.columns[i].as_slice())
    }
}

pub fn read_trace_csv(path: &Path) -> Result<TraceCsv, IoError> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines.next().ok_or(IoError::BadCsv(0))?;
    let names: Vec<String> = header.split(',').map(|s| s.to_string()).collect();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
    for (idx, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != names.len() {
            return Err(IoError::BadCsv(idx + 2));
        }
        for (c, p) in parts.iter().enumerate() {
            columns[c].push(p.parse().map_err(|_| IoError::BadCsv(idx + 2))?);
        }
    }
    let times = columns[0].clone();
    Ok(TraceCsv { times, columns, names })
}

/// Sidecar metadata written next to the trace CSV: termination, the config
/// echo and the per-sample scalars needed to reconstruct the constant
/// channel after the fact.
#[derive(Debug, Serialize, Deserialize)]
pub struct TraceMeta {
    pub config: crate::flow::FlowConfig,
    pub termination: Termination,
    pub mu0: f64,
    pub times: Vec<f64>,
    pub y_x: Vec<f64>,
    pub mean_theta_u: Vec<f64>,
    pub kappa_f: Vec<f64>,
    pub psi_max: Vec<f64>,
    pub psi_min: Vec<f64>,
    pub u_minus_b_c0: Vec<f64>,
    pub grad_u_c0: Vec<f64>,
    pub lap_u_c0: Vec<f64>,
    pub lambda_x: Vec<f64>,
    pub futaki_projection: Vec<f64>,
    pub res_c0: Vec<f64>,
}

impl TraceMeta {
    pub fn from_trace(trace: &FlowTrace) -> Self {
        TraceMeta {
            config: trace.config.clone(),
            termination: trace.termination,
            mu0: trace.mu0,
            times: trace.times.clone(),
            y_x: trace.series(|r| r.y_x),
            mean_theta_u: trace.series(|r| r.mean_theta_u),
            kappa_f: trace.series(|r| r.kappa_f),
            psi_max: trace.series(|r| r.psi_max),
            psi_min: trace.series(|r| r.psi_min),
            u_minus_b_c0: trace.series(|r| r.u_minus_b_c0),
            grad_u_c0: trace.series(|r| r.grad_u_c0),
            lap_u_c0: trace.series(|r| r.lap_u_c0),
            lambda_x: trace.series(|r| r.lambda_x),
            futaki_projection: trace.series(|r| r.futaki_projection),
            res_c0: trace.series(|r| r.res_c0),
        }
    }
}

pub fn write_meta(meta: &TraceMeta, path: &Path) -> Result<(), IoError> {
    let file = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(file, meta)?;
    Ok(())
}

pub fn read_meta(path: &Path) -> Result<TraceMeta, IoError> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Snapshot JSON schema: background id, dimension, time and the nodal fields
/// of the state plus its potentials.
#[derive(Debug, Serialize, Deserialize)]
pub struct Snapshot {
    pub background: String,
    pub n: usize,
    pub t: f64,
    pub nodes: Vec<f64>,
    pub psi: Vec<f64>,
    pub h: Vec<f64>,
    #[serde(rename = "R")]
    pub ricci: Vec<f64>,
    pub theta: Vec<f64>,
    pub f: Vec<f64>,
    pub u: Vec<f64>,
}

impl Snapshot {
    pub fn from_state(s: &MetricState, bundle: &crate::potentials::PotentialBundle) -> Self {
        Snapshot {
            background: s.background.id.name().to_string(),
            n: s.background.dim,
            t: s.t,
            nodes: s.background.grid.nodes.clone(),
            psi: s.psi.clone(),
            h: s.h.clone(),
            ricci: s.ricci.clone(),
            theta: bundle.theta.clone(),
            f: bundle.f.clone(),
            u: bundle.u.clone(),
        }
    }
}

pub fn write_snapshot(snap: &Snapshot, path: &Path) -> Result<(), IoError> {
    // 17 significant digits through the shortest-roundtrip f64 formatting of
    // serde_json
    let file = std::fs::File::create(path)?;
    serde_json::to_writer(file, snap)?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot, IoError> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Per-run entry of a sweep or simulate invocation.
#[derive(Debug, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub label: String,
    pub exit_status: i32,
    pub files: Vec<PathBuf>,
    pub detail: String,
}

/// Manifest of an orchestrated invocation: config echo, code version, output
/// files and per-run status.
#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub config_echo: String,
    pub grid: usize,
    pub dt_init: f64,
    pub runs: Vec<ManifestEntry>,
}

impl RunManifest {
    pub fn new(config_echo: String, grid: usize, dt_init: f64) -> Self {
        RunManifest {
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_echo,
            grid,
            dt_init,
            runs: Vec::new(),
        }
    }
}

pub fn write_manifest(manifest: &RunManifest, path: &Path) -> Result<(), IoError> {
    let file = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(file, manifest)?;
    Ok(())
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<(), IoError> {
    let file = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(file, value)?;
    Ok(())
}

/// Write every artifact of a finished run into a directory: trace.csv,
/// meta.json and snapshots/snap_XXXX.json. Returns the file list.
pub fn write_run_artifacts(trace: &FlowTrace, dir: &Path) -> Result<Vec<PathBuf>, IoError> {
    std::fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    let trace_path = dir.join("trace.csv");
    write_trace_csv(trace, &trace_path)?;
    files.push(trace_path);
    let meta_path = dir.join("meta.json");
    write_meta(&TraceMeta::from_trace(trace), &meta_path)?;
    files.push(meta_path);
    let snapdir = dir.join("snapshots");
    std::fs::create_dir_all(&snapdir)?;
    for (i, s) in trace.snapshots.iter().enumerate() {
        let bundle = crate::potentials::modified_potential(s, &trace.x);
        let snap = Snapshot::from_state(s, &bundle);
        let p = snapdir.join(format!("snap_{i:04}.json"));
        write_snapshot(&snap, &p)?;
        files.push(p);
    }
    Ok(files)
}

/// Reconstruct per-sample record stubs from a parsed CSV (used by the
/// report subcommand when only the CSV is available).
pub fn records_from_csv(csv: &TraceCsv) -> Vec<DiagRecord> {
    let n = csv.times.len();
    let col = |name: &str| -> Vec<f64> {
        csv.column(name).map(|s| s.to_vec()).unwrap_or_else(|| vec![f64::NAN; n])
    };
    let (y, b, mu, f_x) = (col("Y_X"), col("b"), col("mu_X"), col("F_X"));
    let (rc, rl) = (col("res_C0"), col("res_L2"));
    let (gu, lu, pd) = (col("grad_u_C0"), col("lap_u_C0"), col("phidot_C0"));
    let (x2, hmin, hmax) = (col("X2_max"), col("h_min"), col("h_max"));
    let (la, lx, tmin, tmax) = (col("lambda"), col("lambda_X"), col("theta_min"), col("theta_max"));
    (0..n)
        .map(|i| DiagRecord {
            t: csv.times[i],
            y_x: y[i],
            b: b[i],
            mu_x: mu[i],
            f_x: f_x[i],
            res_c0: rc[i],
            res_l2: rl[i],
            grad_u_c0: gu[i],
            lap_u_c0: lu[i],
            phidot_c0: pd[i],
            x2_max: x2[i],
            h_min: hmin[i],
            h_max: hmax[i],
            lambda: la[i],
            lambda_x: lx[i],
            theta_min: tmin[i],
            theta_max: tmax[i],
            a_w: f64::NAN,
            futaki_projection: f64::NAN,
            w_norm_theta_sq: f64::NAN,
            u_minus_b_c0: f64::NAN,
            mean_theta_u: f64::NAN,
            kappa_f: f64::NAN,
            u_max: f64::NAN,
            u_min: f64::NAN,
            psi_max: f64::NAN,
            psi_min: f64::NAN,
            lap_theta_c0: f64::NAN,
            channel_a: f64::NAN,
        })
        .collect()
}

/// Write a small two-column CSV (t, value); used by decay-audit inputs and
/// the spectra output assembles its own wider table.
pub fn write_series_csv(header: &str, rows: &[(f64, Vec<f64>)], path: &Path) -> Result<(), IoError> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "{header}")?;
    for (t, vals) in rows {
        let mut line = fmt(*t);
        for v in vals {
            line.push(',');
            line.push_str(&fmt(*v));
        }
        writeln!(f, "{line}")?;
    }
    Ok(())
}

pub fn read_series_csv(path: &Path) -> Result<(Vec<f64>, Vec<f64>), IoError> {
    let text = std::fs::read_to_string(path)?;
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || idx == 0 && line.chars().any(|c| c.is_alphabetic()) {
            continue;
        }
        let mut parts = line.split(',');
        let t: f64 = parts
            .next()
            .and_then(|s| s.trim().parse().ok())
            .ok_or(IoError::BadCsv(idx + 1))?;
        let v: f64 = parts
            .next()
            .and_then(|s| s.trim().parse().ok())
            .ok_or(IoError::BadCsv(idx + 1))?;
        times.push(t);
        values.push(v);
    }
    Ok((times, values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{run, FlowConfig, PerturbationFamily};
    use crate::geometry::BackgroundId;

    #[test]
    fn csv_roundtrip_is_bit_exact() {
        let mut config = FlowConfig::new(BackgroundId::Cp1);
        config.grid = 33;
        config.t_max = 0.3;
        config.sample_dt = 0.1;
        config.family = PerturbationFamily::Mode2;
        config.amplitude = 0.05;
        let trace = run(&config).unwrap();
        let dir = std::env::temp_dir().join("krflow_io_test");
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join("trace.csv");
        write_trace_csv(&trace, &p).unwrap();
        let parsed = read_trace_csv(&p).unwrap();
        assert_eq!(parsed.names.len(), 17);
        assert_eq!(parsed.times.len(), trace.times.len());
        for (i, r) in trace.records.iter().enumerate() {
            assert_eq!(parsed.column("Y_X").unwrap()[i], r.y_x);
            assert_eq!(parsed.column("lambda").unwrap()[i], r.lambda);
        }
        // determinism: a rerun with the same config produces identical bytes
        let trace2 = run(&config).unwrap();
        let p2 = dir.join("trace2.csv");
        write_trace_csv(&trace2, &p2).unwrap();
        let b1 = std::fs::read(&p).unwrap();
        let b2 = std::fs::read(&p2).unwrap();
        assert_eq!(b1, b2, "reruns are not bit-identical");
    }

    #[test]
    fn snapshot_and_meta_roundtrip() {
        let mut config = FlowConfig::new(BackgroundId::Cp1);
        config.grid = 33;
        config.t_max = 0.2;
        config.sample_dt = 0.1;
        config.snapshot_dt = 0.1;
        let trace = run(&config).unwrap();
        let dir = std::env::temp_dir().join("krflow_io_test2");
        let files = write_run_artifacts(&trace, &dir).unwrap();
        assert!(files.iter().all(|f| f.exists()));
        let snap = read_snapshot(&dir.join("snapshots/snap_0000.json")).unwrap();
        assert_eq!(snap.background, "cp1");
        assert_eq!(snap.psi.len(), 33);
        let meta = read_meta(&dir.join("meta.json")).unwrap();
        assert_eq!(meta.times.len(), trace.times.len());
    }
}
