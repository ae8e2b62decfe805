use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use backcom_core::channel::{draw_trial, CHANNEL_CSV_HEADER};
use backcom_core::config::config_from_value;
use backcom_core::montecarlo::{run_trials, AggregateReport, Algorithm};
use backcom_core::report::{emit_aggregate_csv, emit_csv, emit_trace_csv};
use backcom_core::SystemConfig;
use clap::Parser;
use serde_json::{Map, Value};

/// Monte-Carlo evaluation of max-min fair backscatter resource allocation.
#[derive(Debug, Parser)]
#[command(name = "backcom", version)]
struct Args {
    /// JSON scenario file; missing keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Scheme to run, repeatable: proposed, ecap, frc, rtas, tdma, tc or all.
    #[arg(long = "algorithm", default_value = "proposed")]
    algorithms: Vec<String>,

    /// Overrides the document's trial count.
    #[arg(long)]
    trials: Option<usize>,

    /// Overrides the document's RNG seed.
    #[arg(long)]
    seed: Option<u64>,

    /// `key=v1,v2,...`; repeat for a cross-product sweep.
    #[arg(long = "sweep")]
    sweeps: Vec<String>,

    /// Per-trial CSV path. Aggregates go to `<stem>.agg.csv` next to it.
    /// Without it, per-trial rows go to stdout.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Also write per-iteration objective traces to `<stem>.trace.csv`.
    #[arg(long, requires = "out")]
    trace: bool,

    /// Write every channel coefficient of every trial to this CSV file.
    #[arg(long)]
    dump_channels: Option<PathBuf>,
}

fn parse_algorithms(raw: &[String]) -> Result<Vec<Algorithm>> {
    let mut out = Vec::new();
    for name in raw.iter().flat_map(|s| s.split(',')) {
        let name = name.trim();
        if name.eq_ignore_ascii_case("all") {
            out.extend(Algorithm::ALL);
        } else {
            out.push(name.parse()?);
        }
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

fn parse_sweep(raw: &str) -> Result<(String, Vec<f64>)> {
    let (key, values) = raw
        .split_once('=')
        .with_context(|| format!("sweep '{raw}' is not key=v1,v2,..."))?;
    let values = values
        .split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .with_context(|| format!("bad sweep value '{v}' for {key}"))
        })
        .collect::<Result<Vec<_>>>()?;
    if values.is_empty() {
        bail!("sweep for {key} has no values");
    }
    Ok((key.trim().to_string(), values))
}

fn json_number(v: f64) -> Value {
    if v.fract() == 0.0 && (0.0..9.0e15).contains(&v) {
        Value::from(v as u64)
    } else {
        Value::from(v)
    }
}

/// Every combination of the sweep axes, first axis slowest.
fn grid(axes: &[(String, Vec<f64>)]) -> Vec<Vec<(String, f64)>> {
    axes.iter().fold(vec![Vec::new()], |acc, (key, values)| {
        acc.iter()
            .flat_map(|prefix| {
                values.iter().map(move |&v| {
                    let mut point = prefix.clone();
                    point.push((key.clone(), v));
                    point
                })
            })
            .collect()
    })
}

fn with_suffix(out: &Path, suffix: &str) -> PathBuf {
    let stem = match out.extension() {
        Some(ext) if ext == "csv" => out.with_extension(""),
        _ => out.to_path_buf(),
    };
    let mut name = stem.into_os_string();
    name.push(suffix);
    PathBuf::from(name)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| {
        format!("cannot write {}", path.display())
    })?))
}

fn dump_channels(cfg: &SystemConfig, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(CHANNEL_CSV_HEADER)?;
    for trial in 0..cfg.trials as u64 {
        let (_, ch) = draw_trial(cfg, trial)?;
        ch.write_csv(trial, &mut w)?;
    }
    w.flush()?;
    Ok(())
}

fn print_summary(agg: &AggregateReport) {
    let sweep: Vec<String> = agg.sweep.iter().map(|(k, v)| format!("{k}={v}")).collect();
    if !sweep.is_empty() {
        eprintln!("[{}]", sweep.join(", "));
    }
    for s in &agg.summaries {
        let fmt = |x: Option<f64>| x.map_or_else(|| "-".to_string(), |x| format!("{x:.6}"));
        eprintln!(
            "{:>9}  feasible {:>4}/{:<4} mean {} ± {}  median {}  jain {}",
            s.algorithm.label(),
            s.feasible,
            s.trials,
            fmt(s.mean),
            fmt(s.ci_half_width),
            fmt(s.median),
            fmt(s.mean_jain_fi),
        );
    }
}

fn run(args: Args) -> Result<()> {
    let text = match &args.config {
        Some(path) => std::fs::read_to_string(path)
            .with_context(|| format!("cannot read {}", path.display()))?,
        None => String::new(),
    };
    let mut doc: Map<String, Value> = if text.trim().is_empty() {
        Map::new()
    } else {
        serde_json::from_str(&text).context("config: malformed document")?
    };
    if let Some(t) = args.trials {
        doc.insert("trials".into(), t.into());
    }
    if let Some(s) = args.seed {
        doc.insert("seed".into(), s.into());
    }
    let algorithms = parse_algorithms(&args.algorithms)?;
    let axes = args
        .sweeps
        .iter()
        .map(|s| parse_sweep(s))
        .collect::<Result<Vec<_>>>()?;
    let points = grid(&axes);
    let sweeping = !axes.is_empty();

    let mut batches = Vec::with_capacity(points.len());
    for (i, point) in points.iter().enumerate() {
        let mut doc = doc.clone();
        for (k, v) in point {
            doc.insert(k.clone(), json_number(*v));
        }
        let cfg = config_from_value(Value::Object(doc))?;
        if i == 0 {
            if let Some(path) = &args.dump_channels {
                dump_channels(&cfg, path)?;
            }
        }
        let (mut agg, reports) = run_trials(&cfg, &algorithms)?;
        agg.sweep.clone_from(point);
        print_summary(&agg);

        match &args.out {
            Some(out) => {
                let path = if sweeping {
                    with_suffix(out, &format!(".sweep{i}.csv"))
                } else {
                    out.clone()
                };
                emit_csv(&reports, create(&path)?)?;
                if args.trace {
                    let suffix = if sweeping {
                        format!(".sweep{i}.trace.csv")
                    } else {
                        ".trace.csv".to_string()
                    };
                    emit_trace_csv(&reports, create(&with_suffix(out, &suffix))?)?;
                }
            }
            None => {
                let stdout = io::stdout();
                let mut lock = stdout.lock();
                emit_csv(&reports, &mut lock)?;
                lock.flush()?;
            }
        }
        batches.push(agg);
    }
    if let Some(out) = &args.out {
        emit_aggregate_csv(&batches, create(&with_suffix(out, ".agg.csv"))?)?;
    }
    Ok(())
}

fn main() -> Result<()> {
    run(Args::parse())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_grid_is_a_cross_product() {
        let axes = vec![
            ("p_max".to_string(), vec![0.5, 1.0]),
            ("N".to_string(), vec![2.0, 4.0, 8.0]),
        ];
        let g = grid(&axes);
        assert_eq!(g.len(), 6);
        assert_eq!(
            g[1],
            vec![("p_max".to_string(), 0.5), ("N".to_string(), 4.0)]
        );
        assert_eq!(grid(&[]), vec![Vec::new()]);
    }

    #[test]
    fn suffixes() {
        assert_eq!(
            with_suffix(Path::new("r/out.csv"), ".agg.csv"),
            PathBuf::from("r/out.agg.csv")
        );
        assert_eq!(
            with_suffix(Path::new("out"), ".agg.csv"),
            PathBuf::from("out.agg.csv")
        );
    }

    #[test]
    fn algorithm_lists() {
        assert_eq!(parse_algorithms(&["all".into()]).unwrap().len(), 6);
        assert_eq!(
            parse_algorithms(&["tc,proposed".into(), "tc".into()]).unwrap(),
            vec![Algorithm::Proposed, Algorithm::Tc]
        );
        assert!(parse_algorithms(&["noma".into()]).is_err());
        assert!(parse_sweep("p_max").is_err());
        assert_eq!(parse_sweep("N=2,4").unwrap().1, vec![2.0, 4.0]);
        assert_eq!(json_number(4.0), Value::from(4u64));
    }
}
