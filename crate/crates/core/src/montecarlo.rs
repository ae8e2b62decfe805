//! Monte-Carlo harness: paired trials over independent channel draws,
//! aggregation, and an empirical slotted-ALOHA simulator.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;

use crate::bcd::{greedy_tas, SolveState};
use crate::benchmarks::{solve_ecap, solve_frc, solve_rtas, solve_tc, solve_tdma};
use crate::channel::{draw_trial, ChannelRealization, Purpose, TrialStreams};
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::linkmodel::jain_fi;
use crate::report::TrialReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    Proposed,
    Ecap,
    Frc,
    Rtas,
    Tdma,
    Tc,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::Proposed,
        Algorithm::Ecap,
        Algorithm::Frc,
        Algorithm::Rtas,
        Algorithm::Tdma,
        Algorithm::Tc,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Algorithm::Proposed => "proposed",
            Algorithm::Ecap => "ecap",
            Algorithm::Frc => "frc",
            Algorithm::Rtas => "rtas",
            Algorithm::Tdma => "tdma",
            Algorithm::Tc => "tc",
        }
    }

    /// Solve one channel draw.
    pub fn solve(
        self,
        ch: &ChannelRealization,
        cfg: &SystemConfig,
        streams: &TrialStreams,
    ) -> Result<SolveState> {
        match self {
            Algorithm::Proposed => greedy_tas(ch, cfg),
            Algorithm::Ecap => solve_ecap(ch, cfg),
            Algorithm::Frc => solve_frc(ch, cfg),
            Algorithm::Rtas => solve_rtas(ch, cfg, &mut streams.rng(Purpose::AntennaDraw, 0)),
            Algorithm::Tdma => solve_tdma(ch, cfg).map(|(s, _)| s),
            Algorithm::Tc => solve_tc(ch, cfg),
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid(format!("unknown algorithm '{s}'")))
    }
}

/// Run every requested algorithm on trial `trial`'s channel draw.
pub fn run_trial(
    cfg: &SystemConfig,
    trial: u64,
    algorithms: &[Algorithm],
) -> Result<Vec<TrialReport>> {
    let streams = TrialStreams::new(cfg.seed, trial);
    let (_, ch) = draw_trial(cfg, trial)?;
    algorithms
        .iter()
        .map(|&alg| match alg.solve(&ch, cfg, &streams) {
            Ok(state) => Ok(TrialReport::from_state(trial, alg, &state)),
            Err(e) if e.is_infeasibility() => {
                Ok(TrialReport::infeasible(trial, alg, cfg.bds, e.to_string()))
            }
            Err(e) => Err(e),
        })
        .collect()
}

/// Run `cfg.trials` paired trials in parallel. Reports come back ordered by
/// trial, then by the order of `algorithms`.
pub fn run_trials(
    cfg: &SystemConfig,
    algorithms: &[Algorithm],
) -> Result<(AggregateReport, Vec<TrialReport>)> {
    cfg.validate()?;
    if algorithms.is_empty() {
        return Err(Error::invalid("no algorithms requested"));
    }
    let per_trial: Vec<Vec<TrialReport>> = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|t| run_trial(cfg, t, algorithms))
        .collect::<Result<_>>()?;
    let reports: Vec<TrialReport> = per_trial.into_iter().flatten().collect();
    if reports.iter().all(|r| !r.feasible) {
        return Err(Error::AllInfeasible);
    }
    Ok((
        AggregateReport::from_reports(&reports, algorithms, Vec::new()),
        reports,
    ))
}

/// Summary of one algorithm over a batch of trials. Statistics are over
/// feasible trials only.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgorithmSummary {
    pub algorithm: Algorithm,
    pub trials: usize,
    pub feasible: usize,
    pub feasibility_rate: f64,
    pub mean: Option<f64>,
    pub median: Option<f64>,
    /// Normal-approximation 95 % half-width; needs two feasible trials.
    pub ci_half_width: Option<f64>,
    pub mean_jain_fi: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateReport {
    /// Swept parameters and their values for this batch.
    pub sweep: Vec<(String, f64)>,
    pub summaries: Vec<AlgorithmSummary>,
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn median(v: &[f64]) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let mid = s.len() / 2;
    Some(if s.len() % 2 == 1 {
        s[mid]
    } else {
        0.5 * (s[mid - 1] + s[mid])
    })
}

impl AggregateReport {
    pub fn from_reports(
        reports: &[TrialReport],
        algorithms: &[Algorithm],
        sweep: Vec<(String, f64)>,
    ) -> Self {
        let summaries = algorithms
            .iter()
            .map(|&alg| {
                let mine: Vec<&TrialReport> =
                    reports.iter().filter(|r| r.algorithm == alg).collect();
                let objectives: Vec<f64> = mine
                    .iter()
                    .filter(|r| r.feasible)
                    .map(|r| r.objective)
                    .collect();
                let fis: Vec<f64> = mine.iter().filter_map(|r| r.jain_fi).collect();
                let m = mean(&objectives);
                let ci = (objectives.len() >= 2).then(|| {
                    let mu = m.expect("non-empty");
                    let var = objectives.iter().map(|x| (x - mu).powi(2)).sum::<f64>()
                        / (objectives.len() - 1) as f64;
                    1.96 * (var / objectives.len() as f64).sqrt()
                });
                AlgorithmSummary {
                    algorithm: alg,
                    trials: mine.len(),
                    feasible: objectives.len(),
                    feasibility_rate: if mine.is_empty() {
                        0.0
                    } else {
                        objectives.len() as f64 / mine.len() as f64
                    },
                    mean: m,
                    median: median(&objectives),
                    ci_half_width: ci,
                    mean_jain_fi: mean(&fis),
                }
            })
            .collect();
        Self { sweep, summaries }
    }

    pub fn summary(&self, alg: Algorithm) -> Option<&AlgorithmSummary> {
        self.summaries.iter().find(|s| s.algorithm == alg)
    }
}

/// Empirical per-slot throughput: each slot, BD `n` transmits with
/// probability `q[n]`, and is credited `rbar[n]` only if nobody else did.
pub fn simulate_access<R: Rng + ?Sized>(
    q: &[f64],
    rbar: &[f64],
    slots: usize,
    rng: &mut R,
) -> Vec<f64> {
    assert_eq!(q.len(), rbar.len());
    let mut credit = vec![0.0; q.len()];
    let mut talking = Vec::with_capacity(q.len());
    for _ in 0..slots {
        talking.clear();
        talking.extend(
            q.iter()
                .enumerate()
                .filter(|(_, &p)| rng.random_bool(p.clamp(0.0, 1.0)))
                .map(|(n, _)| n),
        );
        if let [only] = talking[..] {
            credit[only] += rbar[only];
        }
    }
    credit.iter().map(|c| c / slots.max(1) as f64).collect()
}

pub(crate) fn fairness(throughputs: &[f64]) -> Option<f64> {
    jain_fi(throughputs).ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;
    use crate::linkmodel::avg_throughput_bd;
    use rand::SeedableRng;

    #[test]
    fn algorithm_labels_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(a.label().parse::<Algorithm>().unwrap(), a);
        }
        assert!("noma".parse::<Algorithm>().is_err());
    }

    #[test]
    fn access_simulation_cases() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        assert_eq!(
            simulate_access(&[1.0, 0.0], &[3.0, 5.0], 10_000, &mut rng),
            vec![3.0, 0.0]
        );
        assert_eq!(
            simulate_access(&[1.0, 1.0], &[3.0, 5.0], 1000, &mut rng),
            vec![0.0, 0.0]
        );
        let emp = simulate_access(&[0.5, 0.5], &[2.0, 4.0], 100_000, &mut rng);
        for (n, r) in [2.0, 4.0].iter().enumerate() {
            let analytic = avg_throughput_bd(&[0.5, 0.5], n, *r).unwrap();
            assert!((emp[n] - analytic).abs() / analytic < 0.02);
        }
    }

    #[test]
    fn single_trial_single_algorithm() {
        let cfg = parse_config(r#"{"trials": 1, "N": 2, "K": 2, "M": 2}"#).unwrap();
        let (agg, reports) = run_trials(&cfg, &[Algorithm::Proposed]).unwrap();
        assert_eq!(reports.len(), 1);
        assert_eq!(agg.summaries.len(), 1);
        assert_eq!(agg.summaries[0].ci_half_width, None);
    }

    #[test]
    fn runs_are_reproducible() {
        let cfg = parse_config(r#"{"trials": 6, "N": 2, "K": 2, "M": 2}"#).unwrap();
        let algs = [Algorithm::Proposed, Algorithm::Ecap, Algorithm::Rtas];
        let a = run_trials(&cfg, &algs).unwrap();
        let b = run_trials(&cfg, &algs).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.1.len(), 18);
    }

    #[test]
    fn statistics() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(mean(&[]), None);
    }
}
