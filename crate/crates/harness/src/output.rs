//! CSV tables and plot series. Floats use the shortest round-trip form so
//! files are byte-stable.

use std::path::Path;

use crate::diagnose::DiagnoseReport;
use crate::error::HarnessError;
use crate::suite::{mode_label, SuiteResults};

pub const DIAGNOSE_CSV: &str = "diagnose.csv";
pub const REPLICATIONS_CSV: &str = "replications.csv";
pub const SUMMARY_CSV: &str = "summary.csv";
pub const PLOT_CSV: &str = "plot_series.csv";
pub const MANIFEST: &str = "manifest.json";

fn num(x: f64) -> String {
    format!("{x}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn writer(dir: &Path, name: &str, header: &[&str]) -> Result<csv::Writer<std::fs::File>, HarnessError> {
    let mut w = csv::Writer::from_path(dir.join(name))?;
    w.write_record(header)?;
    Ok(w)
}

/// `item,s,status,value,detail`; shell rows carry the distance in `s`.
pub fn write_diagnose(dir: &Path, report: &DiagnoseReport) -> Result<(), HarnessError> {
    let mut w = writer(dir, DIAGNOSE_CSV, &["item", "s", "status", "value", "detail"])?;
    for c in &report.checks {
        w.write_record([c.item.as_str(), "", c.status.as_str(), &opt(c.value), c.detail.as_str()])?;
    }
    for (s, avg) in report.shells.iter().enumerate() {
        w.write_record(["shell_size", &s.to_string(), "", &num(*avg), ""])?;
    }
    w.flush().map_err(|e| HarnessError::Io(dir.join(DIAGNOSE_CSV), e))?;
    Ok(())
}

/// `experiment,variant,n,replication,value`.
pub fn write_replications(dir: &Path, res: &SuiteResults) -> Result<(), HarnessError> {
    let mut w = writer(dir, REPLICATIONS_CSV, &["experiment", "variant", "n", "replication", "value"])?;
    for u in &res.ulln {
        for (row, devs) in u.rows.iter().zip(&u.deviations) {
            for (r, d) in devs.iter().enumerate() {
                w.write_record(["ulln", mode_label(u.mode), &row.n.to_string(), &r.to_string(), &num(*d)])?;
            }
        }
    }
    if let Some(m) = &res.maximal {
        let variant = format!("p{}", m.p);
        for (row, samples) in m.rows.iter().zip(&m.samples) {
            for (r, v) in samples.iter().enumerate() {
                w.write_record(["maximal", &variant, &row.n.to_string(), &r.to_string(), &num(*v)])?;
            }
        }
    }
    for e in &res.estimates {
        for (row, fits) in e.table.rows.iter().zip(&e.table.estimates) {
            for (r, fit) in fits.iter().enumerate() {
                w.write_record(["estimate", e.choice.label(), &row.n.to_string(), &r.to_string(), &num(fit.theta_hat[0])])?;
            }
        }
    }
    w.flush().map_err(|e| HarnessError::Io(dir.join(REPLICATIONS_CSV), e))?;
    Ok(())
}

/// `experiment,variant,n,metric,value`; `n` is empty for grid-wide metrics.
pub fn write_summary(dir: &Path, res: &SuiteResults) -> Result<(), HarnessError> {
    let mut w = writer(dir, SUMMARY_CSV, &["experiment", "variant", "n", "metric", "value"])?;
    let mut put = |exp: &str, var: &str, n: Option<usize>, metric: &str, v: String| {
        w.write_record([exp, var, &n.map(|n| n.to_string()).unwrap_or_default(), metric, &v])
    };
    for u in &res.ulln {
        let var = mode_label(u.mode);
        for r in &u.rows {
            let n = Some(r.n);
            put("ulln", var, n, "delta", num(r.delta))?;
            put("ulln", var, n, "net_size", r.net_size.to_string())?;
            put("ulln", var, n, "median", num(r.median))?;
            put("ulln", var, n, "upper_quartile", num(r.upper_quartile))?;
            put("ulln", var, n, "net_slack", opt(r.slack))?;
            put("ulln", var, n, "oracle_se", num(r.oracle_se))?;
            put("ulln", var, n, "window_feasible", r.window_feasible.map(|b| u8::from(b).to_string()).unwrap_or_default())?;
        }
        put("ulln", var, None, "loglog_slope", opt(u.loglog_slope()))?;
    }
    if let Some(m) = &res.maximal {
        let var = format!("p{}", m.p);
        for r in &m.rows {
            let n = Some(r.n);
            put("maximal", &var, n, "moment", num(r.moment))?;
            put("maximal", &var, n, "se", num(r.se))?;
            put("maximal", &var, n, "block_size", r.block_size.to_string())?;
            put("maximal", &var, n, "window_feasible", u8::from(r.window_feasible).to_string())?;
            put("maximal", &var, n, "block_sum_violations", r.block_sum_violations.to_string())?;
        }
        put("maximal", &var, None, "slope", num(m.fit.slope))?;
        put("maximal", &var, None, "ci_lo", num(m.fit.ci_lo))?;
        put("maximal", &var, None, "ci_hi", num(m.fit.ci_hi))?;
        put("maximal", &var, None, "beta", num(m.beta))?;
        put("maximal", &var, None, "cap", num(m.cap()))?;
    }
    for b in &res.blocks {
        // `n` holds the block size for these rows
        let n = Some(b.block_size);
        put("block_moment", "block_size", n, "blocks", b.blocks.to_string())?;
        put("block_moment", "block_size", n, "separation", b.separation.to_string())?;
        put("block_moment", "block_size", n, "moment", num(b.moment))?;
        put("block_moment", "block_size", n, "se", num(b.se))?;
        put("block_moment", "block_size", n, "ratio", num(b.ratio))?;
    }
    for e in &res.estimates {
        let var = e.choice.label();
        for r in &e.table.rows {
            let n = Some(r.n);
            put("estimate", var, n, "bias", num(r.bias[0]))?;
            put("estimate", var, n, "median_bias", num(r.median_bias[0]))?;
            put("estimate", var, n, "rmse", num(r.rmse))?;
            put("estimate", var, n, "q50_abs_error", num(r.q50_abs_error))?;
            put("estimate", var, n, "q90_abs_error", num(r.q90_abs_error))?;
        }
        put("estimate", var, None, "rmse_ratio", num(e.table.rmse_ratio()))?;
        put("estimate", var, None, "population_optimum", num(e.table.identification.population_optimum[0]))?;
    }
    if let Some((gap, scale)) = crate::suite::gmm_gap(res) {
        put("estimate", "gmm_weighting", None, "paired_rms_difference", num(gap))?;
        put("estimate", "gmm_weighting", None, "larger_rmse", num(scale))?;
    }
    w.flush().map_err(|e| HarnessError::Io(dir.join(SUMMARY_CSV), e))?;
    Ok(())
}

/// `series,x,y`: deviation against n, log moment against log n, RMSE against n.
pub fn write_plot_series(dir: &Path, res: &SuiteResults) -> Result<(), HarnessError> {
    let mut w = writer(dir, PLOT_CSV, &["series", "x", "y"])?;
    for u in &res.ulln {
        let series = format!("ulln_{}_median", mode_label(u.mode));
        for r in &u.rows {
            w.write_record([series.as_str(), &r.n.to_string(), &num(r.median)])?;
        }
    }
    if let Some(m) = &res.maximal {
        for r in &m.rows {
            w.write_record(["maximal_log_moment", &num((r.n as f64).ln()), &num(r.moment.ln())])?;
        }
        // reference line of slope p β through the first point
        if let Some(first) = m.rows.first() {
            let (x0, y0) = ((first.n as f64).ln(), first.moment.ln());
            for r in &m.rows {
                let x = (r.n as f64).ln();
                w.write_record(["maximal_cap_line", &num(x), &num(y0 + m.cap() * (x - x0))])?;
            }
        }
    }
    for e in &res.estimates {
        let series = format!("estimate_{}_rmse", e.choice.label());
        for r in &e.table.rows {
            w.write_record([series.as_str(), &r.n.to_string(), &num(r.rmse)])?;
        }
    }
    w.flush().map_err(|e| HarnessError::Io(dir.join(PLOT_CSV), e))?;
    Ok(())
}

