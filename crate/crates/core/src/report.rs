//! Per-trial results and their CSV forms.

use std::io::Write;

use crate::bcd::{SolveState, TraceEntry};
use crate::error::{Error, Result};
use crate::montecarlo::{fairness, AggregateReport, Algorithm};

#[derive(Debug, Clone, PartialEq)]
pub struct TrialReport {
    pub trial: u64,
    pub algorithm: Algorithm,
    pub feasible: bool,
    /// Minimum average BD throughput (NaN when infeasible).
    pub objective: f64,
    pub jain_fi: Option<f64>,
    /// Selected AD antenna, 0-based.
    pub antenna: Option<usize>,
    pub iterations: usize,
    pub q: Vec<f64>,
    pub alpha: Vec<f64>,
    /// Average throughput of each BD.
    pub rbd: Vec<f64>,
    /// Rate of each BD while it holds the channel.
    pub bd_rate: Vec<f64>,
    pub trace: Vec<TraceEntry>,
    /// Why the trial is infeasible, if it is.
    pub note: Option<String>,
}

impl TrialReport {
    pub fn from_state(trial: u64, algorithm: Algorithm, s: &SolveState) -> Self {
        Self {
            trial,
            algorithm,
            feasible: true,
            objective: s.t,
            jain_fi: fairness(&s.throughputs),
            antenna: Some(s.antenna),
            iterations: s.iterations,
            q: s.q.clone(),
            alpha: s.alpha.clone(),
            rbd: s.throughputs.clone(),
            bd_rate: s.bd_rates.clone(),
            trace: s.trace.clone(),
            note: None,
        }
    }

    pub fn infeasible(trial: u64, algorithm: Algorithm, bds: usize, note: String) -> Self {
        Self {
            trial,
            algorithm,
            feasible: false,
            objective: f64::NAN,
            jain_fi: None,
            antenna: None,
            iterations: 0,
            q: vec![f64::NAN; bds],
            alpha: vec![f64::NAN; bds],
            rbd: vec![f64::NAN; bds],
            bd_rate: vec![f64::NAN; bds],
            trace: Vec::new(),
            note: Some(note),
        }
    }
}

fn num(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x:.15e}")
    }
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, num)
}

/// One header row, then one row per report:
/// `trial,algorithm,feasible,objective,jain_fi,antenna,iterations,q_*,alpha_*,rbd_*`.
/// Antennas are written 1-based; missing values are left empty.
pub fn emit_csv<W: Write>(reports: &[TrialReport], out: W) -> Result<()> {
    let first = reports.first().ok_or(Error::EmptyReports)?;
    let n = first.q.len();
    if reports
        .iter()
        .any(|r| r.q.len() != n || r.alpha.len() != n || r.rbd.len() != n)
    {
        return Err(Error::invalid("reports disagree on the number of BDs"));
    }
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = [
        "trial",
        "algorithm",
        "feasible",
        "objective",
        "jain_fi",
        "antenna",
        "iterations",
    ]
    .map(String::from)
    .to_vec();
    for prefix in ["q", "alpha", "rbd"] {
        header.extend((1..=n).map(|i| format!("{prefix}_{i}")));
    }
    w.write_record(&header)?;
    for r in reports {
        let mut row = vec![
            r.trial.to_string(),
            r.algorithm.label().to_string(),
            r.feasible.to_string(),
            num(r.objective),
            opt(r.jain_fi),
            r.antenna.map_or_else(String::new, |m| (m + 1).to_string()),
            r.iterations.to_string(),
        ];
        row.extend(r.q.iter().chain(&r.alpha).chain(&r.rbd).map(|&x| num(x)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Per-iteration objective traces: `trial,algorithm,iteration,t,t_bar,t_hat`.
pub fn emit_trace_csv<W: Write>(reports: &[TrialReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["trial", "algorithm", "iteration", "t", "t_bar", "t_hat"])?;
    for r in reports {
        for (i, e) in r.trace.iter().enumerate() {
            w.write_record([
                r.trial.to_string(),
                r.algorithm.label().to_string(),
                (i + 1).to_string(),
                num(e.t),
                num(e.t_bar),
                num(e.t_hat),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// One row per (batch, algorithm), led by the batch's sweep columns.
pub fn emit_aggregate_csv<W: Write>(batches: &[AggregateReport], out: W) -> Result<()> {
    let first = batches.first().ok_or(Error::EmptyReports)?;
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = first.sweep.iter().map(|(k, _)| k.clone()).collect();
    header.extend(
        [
            "algorithm",
            "trials",
            "feasible",
            "feasibility_rate",
            "mean_objective",
            "median_objective",
            "ci95_half_width",
            "mean_jain_fi",
        ]
        .map(String::from),
    );
    w.write_record(&header)?;
    for b in batches {
        for s in &b.summaries {
            let mut row: Vec<String> = b.sweep.iter().map(|(_, v)| num(*v)).collect();
            row.extend([
                s.algorithm.label().to_string(),
                s.trials.to_string(),
                s.feasible.to_string(),
                num(s.feasibility_rate),
                opt(s.mean),
                opt(s.median),
                opt(s.ci_half_width),
                opt(s.mean_jain_fi),
            ]);
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}
