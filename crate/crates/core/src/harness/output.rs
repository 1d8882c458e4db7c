//! CSV output with a fixed column order. Floats use the shortest decimal
//! form that parses back to the same value.

use std::path::Path;

use super::runs::{PolicyRun, Summary, TrainingRow};
use crate::{Error, Result};

pub fn format_float(x: f64) -> String {
    format!("{x:e}")
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_owned(),
        source,
    }
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.to_owned(),
            source,
        })?;
    }
    csv::Writer::from_path(path).map_err(csv_err(path))
}

fn finish(mut w: csv::Writer<std::fs::File>, path: &Path) -> Result<()> {
    w.flush().map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })
}

pub fn write_summary_csv(path: &Path, rows: &[Summary]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record([
        "policy",
        "jamming_dbm",
        "frames",
        "c_av_eff",
        "p_av_ot",
        "mean_mu",
    ])
    .map_err(csv_err(path))?;
    for r in rows {
        w.write_record([
            r.policy.clone(),
            format_float(r.jamming_dbm),
            r.frames.to_string(),
            format_float(r.c_av_eff),
            format_float(r.p_av_ot),
            format_float(r.mean_mu),
        ])
        .map_err(csv_err(path))?;
    }
    finish(w, path)
}

fn parse_f64(path: &Path, field: Option<&str>) -> Result<f64> {
    field
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Input(format!("{}: malformed number", path.display())))
}

pub fn read_summary_csv(path: &Path) -> Result<Vec<Summary>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err(path))?;
        out.push(Summary {
            policy: rec.get(0).unwrap_or_default().to_owned(),
            jamming_dbm: parse_f64(path, rec.get(1))?,
            frames: parse_f64(path, rec.get(2))? as usize,
            c_av_eff: parse_f64(path, rec.get(3))?,
            p_av_ot: parse_f64(path, rec.get(4))?,
            mean_mu: parse_f64(path, rec.get(5))?,
        });
    }
    Ok(out)
}

/// One row per frame. Per-stream SINR columns follow the fixed scalar
/// columns, users outermost.
pub fn write_frames_csv(path: &Path, runs: &[PolicyRun]) -> Result<()> {
    let mut w = writer(path)?;
    let first = runs.iter().find_map(|r| r.frames.first());
    let mut header: Vec<String> = [
        "policy",
        "frame",
        "action",
        "n_estimation",
        "n_monitor",
        "n_preamble",
        "n_data",
        "mu",
        "rho_estimation",
        "rho_data",
        "outage",
        "reward",
        "effective_se",
        "residual_jamming",
    ]
    .map(String::from)
    .to_vec();
    if let Some(first) = first {
        for (k, streams) in first.sinr_db.iter().enumerate() {
            for m in 0..streams.len() {
                header.push(format!("sinr_u{k}_s{m}"));
            }
        }
        for (k, streams) in first.sinr_est_db.iter().enumerate() {
            for m in 0..streams.len() {
                header.push(format!("sinr_est_u{k}_s{m}"));
            }
        }
    }
    w.write_record(&header).map_err(csv_err(path))?;
    for run in runs {
        for f in &run.frames {
            let residual = f.residual_jamming.iter().sum::<f64>() / f.residual_jamming.len() as f64;
            let mut rec = vec![
                run.name.clone(),
                f.frame.to_string(),
                f.action.map(|a| a.number().to_string()).unwrap_or_default(),
                f.durations.estimation.to_string(),
                f.monitor_samples.to_string(),
                f.preamble_samples.to_string(),
                f.durations.data.to_string(),
                format_float(f.mu),
                format_float(f.rho_estimation),
                format_float(f.rho_data),
                u8::from(f.outage).to_string(),
                format_float(f.reward),
                format_float(f.effective_se()),
                format_float(residual),
            ];
            rec.extend(f.sinr_db.iter().flatten().map(|&s| format_float(s)));
            rec.extend(f.sinr_est_db.iter().flatten().map(|&s| format_float(s)));
            w.write_record(&rec).map_err(csv_err(path))?;
        }
    }
    finish(w, path)
}

/// The per-frame fields needed to recompute long-run metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameRecord {
    pub policy: String,
    pub n_estimation: usize,
    pub n_monitor: usize,
    pub n_preamble: usize,
    pub n_data: usize,
    pub sinr_db: Vec<f64>,
}

impl FrameRecord {
    pub fn mu(&self) -> f64 {
        self.n_data as f64
            / (self.n_estimation + self.n_monitor + self.n_preamble + self.n_data) as f64
    }

    pub fn effective_se(&self) -> f64 {
        let mu = self.mu();
        self.sinr_db
            .iter()
            .map(|&s| mu * (1.0 + 10f64.powf(s / 10.0)).log2())
            .sum::<f64>()
            / self.sinr_db.len() as f64
    }

    pub fn outage_fraction(&self, threshold_db: f64) -> f64 {
        self.sinr_db.iter().filter(|&&s| s < threshold_db).count() as f64
            / self.sinr_db.len() as f64
    }
}

pub fn read_frames_csv(path: &Path) -> Result<Vec<FrameRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let header = r.headers().map_err(csv_err(path))?.clone();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Input(format!("{}: missing column {name}", path.display())))
    };
    let (ie, im, ip, id) = (
        col("n_estimation")?,
        col("n_monitor")?,
        col("n_preamble")?,
        col("n_data")?,
    );
    let sinr_cols: Vec<usize> = header
        .iter()
        .enumerate()
        .filter(|(_, h)| h.starts_with("sinr_u"))
        .map(|(i, _)| i)
        .collect();
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err(path))?;
        out.push(FrameRecord {
            policy: rec.get(0).unwrap_or_default().to_owned(),
            n_estimation: parse_f64(path, rec.get(ie))? as usize,
            n_monitor: parse_f64(path, rec.get(im))? as usize,
            n_preamble: parse_f64(path, rec.get(ip))? as usize,
            n_data: parse_f64(path, rec.get(id))? as usize,
            sinr_db: sinr_cols
                .iter()
                .map(|&c| parse_f64(path, rec.get(c)))
                .collect::<Result<_>>()?,
        });
    }
    Ok(out)
}

pub fn write_training_csv(path: &Path, rows: &[TrainingRow]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record([
        "iteration",
        "action",
        "epsilon",
        "explored",
        "reward",
        "effective_se",
        "outage_fraction",
        "loss",
        "rho_estimation",
        "rho_data",
        "rolling_se",
        "rolling_outage",
    ])
    .map_err(csv_err(path))?;
    for r in rows {
        w.write_record([
            r.iteration.to_string(),
            r.action.to_string(),
            format_float(r.epsilon),
            u8::from(r.explored).to_string(),
            format_float(r.reward),
            format_float(r.effective_se),
            format_float(r.outage_fraction),
            r.loss.map(format_float).unwrap_or_default(),
            format_float(r.rho_estimation),
            format_float(r.rho_data),
            format_float(r.rolling_se),
            format_float(r.rolling_outage),
        ])
        .map_err(csv_err(path))?;
    }
    finish(w, path)
}
