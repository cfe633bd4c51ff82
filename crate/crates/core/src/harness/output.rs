//! CSV and JSON emission. Floats use Rust's shortest round-trip formatting,
//! so identical results give identical bytes.

use std::io::Write;

use serde::Serialize;

use super::{BestProportionRow, SweepResult};
use crate::bounds::{add_lower_bound, gstar_upper_bounds, ismap_upper_bound, smap_upper_bound};
use crate::error::{Error, Result};

pub const CSV_COLUMNS: [&str; 18] = [
    "procedure",
    "scenario",
    "K",
    "q",
    "alpha",
    "rho",
    "rho_assumed",
    "c",
    "fdr",
    "se_fdr",
    "add",
    "se_add",
    "ano",
    "se_ano",
    "censored_fraction",
    "n_runs",
    "seed",
    "weighted_risk",
];

/// Bound overlay columns appended by `--bounds`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundColumns {
    /// `D(f1 || f0)` of the scenario.
    pub kl: f64,
    pub g_star: Option<f64>,
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Record(format!("{other:?}")),
    }
}

pub fn write_sweep_csv<W: Write>(out: W, sweep: &SweepResult, bounds: Option<BoundColumns>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = CSV_COLUMNS.to_vec();
    if let Some(b) = bounds {
        header.extend(["add_lb", "smap_ub", "ismap_ub"]);
        if b.g_star.is_some() {
            header.extend(["smap_ub_gstar", "ismap_ub_gstar"]);
        }
    }
    w.write_record(&header).map_err(csv_err)?;

    for row in &sweep.rows {
        let s = &row.summary;
        let mut fields: Vec<String> = vec![
            row.label(),
            row.scenario.clone(),
            row.k.to_string(),
            row.q.to_string(),
            row.alpha.to_string(),
            row.rho.to_string(),
            row.rho_assumed.to_string(),
            s.c.to_string(),
            s.fdr.to_string(),
            s.se_fdr.to_string(),
            s.add.to_string(),
            s.se_add.to_string(),
            s.ano.to_string(),
            s.se_ano.to_string(),
            s.censored_fraction.to_string(),
            s.n_runs.to_string(),
            row.seed.to_string(),
            s.weighted_risk.to_string(),
        ];
        if let Some(b) = bounds {
            fields.push(add_lower_bound(row.alpha, b.kl, row.rho_assumed).to_string());
            fields.push(smap_upper_bound(row.alpha, row.rho_assumed, row.k).to_string());
            fields.push(ismap_upper_bound(row.alpha, row.rho_assumed).to_string());
            if let Some(g) = b.g_star {
                let (s_ub, i_ub) = gstar_upper_bounds(row.alpha, row.rho_assumed, b.kl, g, row.k);
                fields.push(s_ub.to_string());
                fields.push(i_ub.to_string());
            }
        }
        w.write_record(&fields).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn sweep_csv_string(sweep: &SweepResult, bounds: Option<BoundColumns>) -> Result<String> {
    let mut buf = Vec::new();
    write_sweep_csv(&mut buf, sweep, bounds)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

#[derive(Debug, Serialize)]
pub struct JsonSummary<'a> {
    pub sweep: &'a SweepResult,
    pub best_proportions: &'a [BestProportionRow],
    pub gate_failures: usize,
}

pub fn write_json_summary<W: Write>(
    mut out: W,
    sweep: &SweepResult,
    best: &[BestProportionRow],
) -> Result<()> {
    let summary = JsonSummary {
        sweep,
        best_proportions: best,
        gate_failures: sweep.gate_failures().len(),
    };
    serde_json::to_writer_pretty(&mut out, &summary).map_err(|e| Error::Record(e.to_string()))?;
    writeln!(out)?;
    Ok(())
}

/// Bound curves over `k_values` for the `bounds` subcommand.
pub fn write_bound_curves<W: Write>(
    out: W,
    alpha: f64,
    rho: f64,
    kl: f64,
    g_star: Option<f64>,
    k_values: &[usize],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["K", "alpha", "rho", "kl", "add_lb", "smap_ub", "ismap_ub", "ub_ratio"];
    if g_star.is_some() {
        header.extend(["g_star", "smap_ub_gstar", "ismap_ub_gstar"]);
    }
    w.write_record(&header).map_err(csv_err)?;
    for &k in k_values {
        let s_ub = smap_upper_bound(alpha, rho, k);
        let i_ub = ismap_upper_bound(alpha, rho);
        let mut fields = vec![
            k.to_string(),
            alpha.to_string(),
            rho.to_string(),
            kl.to_string(),
            add_lower_bound(alpha, kl, rho).to_string(),
            s_ub.to_string(),
            i_ub.to_string(),
            (i_ub / s_ub).to_string(),
        ];
        if let Some(g) = g_star {
            let (sg, ig) = gstar_upper_bounds(alpha, rho, kl, g, k);
            fields.extend([g.to_string(), sg.to_string(), ig.to_string()]);
        }
        w.write_record(&fields).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}
