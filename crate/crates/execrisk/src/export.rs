//! CSV and JSON outputs for simulated ensembles and reports.
//!
//! Floats are written with 17 significant digits so that re-parsing a CSV or
//! sidecar reproduces the original values bit for bit; re-running a command
//! with the same inputs therefore yields byte-identical files.

use crate::numeric::fmt_full;
use crate::objective::RevenueReport;
use crate::params::ModelParams;
use crate::policy::PolicyKind;
use crate::simulate::PathEnsemble;
use crate::verify::VerificationReport;
use serde::Serialize;
use std::path::Path;
use thiserror::Error;

/// Errors from writing outputs.
#[derive(Debug, Error)]
pub enum ExportError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Objective(#[from] crate::objective::ObjectiveError),
}

/// Everything needed to reproduce and interpret one simulation run.
#[derive(Debug, Serialize)]
pub struct RunSidecar<'a> {
    pub params: &'a ModelParams,
    pub derived: crate::params::DerivedParams,
    pub policy: PolicyKind,
    pub seed: u64,
    pub n_paths: usize,
    pub n_steps: usize,
    pub dt: f64,
}

impl<'a> RunSidecar<'a> {
    pub fn for_ensemble(ens: &'a PathEnsemble) -> Self {
        Self {
            params: ens.params(),
            derived: ens.params().derived(),
            policy: ens.policy(),
            seed: ens.seed(),
            n_paths: ens.n_paths(),
            n_steps: ens.n_steps(),
            dt: ens.dt(),
        }
    }
}

/// Write one ensemble as CSV: `path,k,t,y,v,H,S0,S`, path-major order.
pub fn write_ensemble_csv(ens: &PathEnsemble, path: &Path) -> Result<(), ExportError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["path", "k", "t", "y", "v", "H", "S0", "S"])?;
    let times = ens.times();
    for p in 0..ens.n_paths() {
        let y = ens.holdings_path(p);
        let v = ens.rates_path(p);
        let h = ens.impact_noise_path(p);
        let s0 = ens.base_price_path(p);
        for k in 0..=ens.n_steps() {
            w.write_record([
                p.to_string(),
                k.to_string(),
                fmt_full(times[k]),
                fmt_full(y[k]),
                fmt_full(v[k]),
                fmt_full(h[k]),
                fmt_full(s0[k]),
                fmt_full(ens.exec_price(p, k)),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Write the JSON sidecar describing a run.
pub fn write_run_sidecar(sidecar: &RunSidecar<'_>, path: &Path) -> Result<(), ExportError> {
    write_json(sidecar, path)
}

/// Write a revenue report as JSON.
pub fn write_revenue_report(report: &RevenueReport, path: &Path) -> Result<(), ExportError> {
    write_json(report, path)
}

/// Write a verification report as JSON.
pub fn write_verification_report(
    report: &VerificationReport,
    path: &Path,
) -> Result<(), ExportError> {
    write_json(report, path)
}

/// Per-path revenue rows: `path,raw,terminal_penalty,permanent,drift,risk_interaction,temporary`.
pub fn write_per_path_revenue(ens: &PathEnsemble, path: &Path) -> Result<(), ExportError> {
    use crate::objective::{raw_revenue_path, rewritten_revenue_path};
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "path",
        "raw",
        "terminal_penalty",
        "permanent",
        "drift",
        "risk_interaction",
        "temporary",
    ])?;
    for p in 0..ens.n_paths() {
        // Infinite-penalty ensembles are rejected on the first row.
        let raw = raw_revenue_path(ens, p)?;
        let d = rewritten_revenue_path(ens, p)?;
        w.write_record([
            p.to_string(),
            fmt_full(raw),
            fmt_full(d.terminal_penalty),
            fmt_full(d.permanent),
            fmt_full(d.drift),
            fmt_full(d.risk_interaction),
            fmt_full(d.temporary),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<(), ExportError> {
    let file = std::fs::File::create(path)?;
    let mut writer = std::io::BufWriter::new(file);
    serde_json::to_writer_pretty(&mut writer, value)?;
    use std::io::Write;
    writer.write_all(b"\n")?;
    writer.flush()?;
    Ok(())
}
