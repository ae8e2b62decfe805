//! Block-coordinate descent over (beams, power and RCs, access
//! probabilities) for one transmit antenna, and exhaustive transmit-antenna
//! selection on top of it.
//!
//! Each block is solved exactly given the others, so the objective never
//! decreases from one iteration to the next:
//!
//! * beams do not enter the objective, only the AD rate constraint, and the
//!   SINR-maximising beam keeps the current RCs feasible;
//! * the closed-form RCs are the largest feasible ones and throughput grows
//!   with the RC;
//! * the access probabilities are the max-min optimum for the new rates.

use crate::beamforming::{active_beam, mrc, BeamPair};
use crate::cap::{solve_cap, CAP_EPS, CAP_GAP_TOL};
use crate::channel::ChannelRealization;
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::linkmodel::{avg_throughputs, beam_gain, rate, sinr_ad};
use crate::powerrc::{
    alpha_ad_bound, alpha_eh_bound, bd_rate, min_power, optimal_power, optimal_rc,
    subproblem_value, BdLink,
};

/// Objective values recorded in one BCD iteration: before the iteration,
/// after the power/RC block and after the access-probability block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    pub t: f64,
    pub t_bar: f64,
    pub t_hat: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveState {
    /// Selected AD antenna (0-based).
    pub antenna: usize,
    pub p: f64,
    pub alpha: Vec<f64>,
    /// Access probabilities (TDMA stores its slot fractions here).
    pub q: Vec<f64>,
    pub beams: Vec<BeamPair>,
    /// Minimum average BD throughput.
    pub t: f64,
    pub trace: Vec<TraceEntry>,
    pub iterations: usize,
    /// Rate of each BD when it holds the channel.
    pub bd_rates: Vec<f64>,
    /// AD rate while each BD holds the channel.
    pub ad_rates: Vec<f64>,
    /// Average throughput of each BD.
    pub throughputs: Vec<f64>,
    /// Converged objective per antenna (`None` where infeasible); filled by
    /// antenna selection.
    pub antenna_objectives: Vec<Option<f64>>,
}

/// How the reflection coefficients are chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RcPolicy {
    Optimal,
    Fixed(f64),
}

/// How the access probabilities are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CapPolicy {
    Optimal,
    /// `1/N` for every BD.
    Equal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Policy {
    pub rc: RcPolicy,
    pub cap: CapPolicy,
}

impl Policy {
    pub const PROPOSED: Policy = Policy {
        rc: RcPolicy::Optimal,
        cap: CapPolicy::Optimal,
    };
}

/// Channels seen from one AD antenna.
struct AntennaView<'a> {
    h_d: &'a crate::CVector,
    h_b: &'a [crate::CVector],
    gains: Vec<f64>,
}

impl<'a> AntennaView<'a> {
    fn new(ch: &'a ChannelRealization, m: usize) -> Result<Self> {
        if m >= ch.tx_antennas() {
            return Err(Error::invalid(format!("antenna {m} out of range")));
        }
        let gains = (0..ch.bds()).map(|n| ch.forward_gain(m, n)).collect();
        Ok(Self {
            h_d: &ch.direct[m],
            h_b: &ch.backscatter,
            gains,
        })
    }

    fn links(&self, beams: &[BeamPair]) -> Vec<BdLink> {
        beams
            .iter()
            .enumerate()
            .map(|(n, b)| BdLink {
                forward_gain: self.gains[n],
                trd: beam_gain(&b.v_a, self.h_d),
                trb: beam_gain(&b.v_a, &self.h_b[n]),
                hb_norm2: self.h_b[n].norm_squared(),
            })
            .collect()
    }

    /// Beam block: MRC for the BD signal, max-SINR for the AD signal.
    fn beams(&self, alpha: &[f64], p: f64, cfg: &SystemConfig) -> Result<Vec<BeamPair>> {
        let mut beams = Vec::with_capacity(alpha.len());
        for (n, &a) in alpha.iter().enumerate() {
            let (v_a, diag) = active_beam(
                self.h_d,
                &self.h_b[n],
                self.gains[n],
                a,
                p,
                cfg.sigma_w2,
                cfg.r_min,
            )?;
            if !diag.feasible {
                return Err(Error::infeasible(format!(
                    "AD rate target unreachable while BD {n} reflects"
                )));
            }
            beams.push(BeamPair {
                v_a,
                v_b: mrc(&self.h_b[n])?,
            });
        }
        Ok(beams)
    }

    fn ad_rates(&self, beams: &[BeamPair], alpha: &[f64], p: f64, sigma_w2: f64) -> Vec<f64> {
        beams
            .iter()
            .enumerate()
            .map(|(n, b)| {
                let s = sinr_ad(
                    &b.v_a,
                    self.h_d,
                    &self.h_b[n],
                    self.gains[n],
                    alpha[n],
                    p,
                    sigma_w2,
                );
                rate(s).expect("non-negative SINR")
            })
            .collect()
    }
}

fn min_throughput(q: &[f64], rates: &[f64]) -> f64 {
    avg_throughputs(q, rates)
        .into_iter()
        .fold(f64::INFINITY, f64::min)
}

pub(crate) fn equal_access(n: usize) -> Vec<f64> {
    vec![(1.0 / n as f64).clamp(CAP_EPS, 1.0 - CAP_EPS); n]
}

/// Starting point: full power, half of the largest RC that is feasible for
/// the direct-link beam, equal access probabilities.
fn initial_alpha(view: &AntennaView, cfg: &SystemConfig) -> Result<Vec<f64>> {
    let n = view.h_b.len();
    let zero = vec![0.0; n];
    let beams = view.beams(&zero, cfg.p_max, cfg)?;
    let links = view.links(&beams);
    let (_, floor) = min_power(&links, &cfg.eh, &cfg.p_circuit, cfg.r_min, cfg.sigma_w2)?;
    let p = optimal_power(cfg.p_max, floor)?;
    links
        .iter()
        .enumerate()
        .map(|(i, link)| {
            let eh = alpha_eh_bound(link.forward_gain, p, &cfg.eh[i], cfg.p_circuit[i])?;
            let ad = alpha_ad_bound(link, p, cfg.r_min, cfg.sigma_w2);
            let a = eh.min(ad).min(1.0) / 2.0;
            if a > 0.0 {
                Ok(a)
            } else {
                Err(Error::infeasible(format!(
                    "BD {i} cannot reflect at any RC"
                )))
            }
        })
        .collect()
}

/// Run the BCD loop on antenna `m` with the proposed policy.
pub fn inner_bcd(ch: &ChannelRealization, cfg: &SystemConfig, m: usize) -> Result<SolveState> {
    inner_bcd_with(ch, cfg, m, Policy::PROPOSED)
}

/// Run the BCD loop on antenna `m`, with either block optionally replaced
/// by a fixed rule.
pub fn inner_bcd_with(
    ch: &ChannelRealization,
    cfg: &SystemConfig,
    m: usize,
    policy: Policy,
) -> Result<SolveState> {
    let view = AntennaView::new(ch, m)?;
    let n = ch.bds();
    let sigma_w2 = cfg.sigma_w2;
    let mut p = cfg.p_max;
    let mut alpha = match policy.rc {
        RcPolicy::Optimal => initial_alpha(&view, cfg)?,
        RcPolicy::Fixed(a) => vec![a; n],
    };
    let mut q = equal_access(n);
    let mut trace = Vec::new();

    for _ in 0..cfg.max_iter_a3 {
        // Beams.
        let beams = view.beams(&alpha, p, cfg)?;
        let links = view.links(&beams);
        let rates: Vec<f64> = links
            .iter()
            .zip(&alpha)
            .map(|(l, &a)| bd_rate(l, a, p, sigma_w2))
            .collect();
        let t = min_throughput(&q, &rates);

        // Power and reflection coefficients.
        let (_, floor) = min_power(&links, &cfg.eh, &cfg.p_circuit, cfg.r_min, sigma_w2)?;
        p = optimal_power(cfg.p_max, floor)?;
        let t_bar = match policy.rc {
            RcPolicy::Optimal => {
                let rc = optimal_rc(&links, p, cfg.r_min, sigma_w2, &cfg.eh, &cfg.p_circuit)?;
                if !rc.feasible {
                    return Err(Error::infeasible(
                        "some BD has no feasible reflection coefficient",
                    ));
                }
                alpha = rc.alpha.clone();
                subproblem_value(
                    &rc,
                    &links,
                    &q,
                    cfg.r_min,
                    sigma_w2,
                    &cfg.eh,
                    &cfg.p_circuit,
                )?
                .0
            }
            RcPolicy::Fixed(a) => {
                for (i, link) in links.iter().enumerate() {
                    let eh = alpha_eh_bound(link.forward_gain, p, &cfg.eh[i], cfg.p_circuit[i])?;
                    if a > eh {
                        return Err(Error::infeasible(format!(
                            "RC {a} leaves BD {i} short of circuit power"
                        )));
                    }
                }
                let rates: Vec<f64> = links.iter().map(|l| bd_rate(l, a, p, sigma_w2)).collect();
                min_throughput(&q, &rates)
            }
        };

        // Access probabilities.
        let rbar: Vec<f64> = links
            .iter()
            .zip(&alpha)
            .map(|(l, &a)| bd_rate(l, a, p, sigma_w2))
            .collect();
        let t_hat = match policy.cap {
            CapPolicy::Optimal => {
                let sol = solve_cap(&rbar, cfg.phi_th.min(CAP_GAP_TOL), cfg.max_iter_a2)?;
                q = sol.q;
                sol.t_hat
            }
            CapPolicy::Equal => min_throughput(&q, &rbar),
        };

        trace.push(TraceEntry { t, t_bar, t_hat });
        if (t - t_bar).abs() <= cfg.eps_th && (t - t_hat).abs() <= cfg.eps_th {
            return finish(&view, cfg, m, p, alpha, q, trace);
        }
    }
    let state = finish(&view, cfg, m, p, alpha, q, trace)?;
    Err(Error::BcdNotConverged(Box::new(state)))
}

fn finish(
    view: &AntennaView,
    cfg: &SystemConfig,
    m: usize,
    p: f64,
    alpha: Vec<f64>,
    q: Vec<f64>,
    trace: Vec<TraceEntry>,
) -> Result<SolveState> {
    let beams = view.beams(&alpha, p, cfg)?;
    let links = view.links(&beams);
    let bd_rates: Vec<f64> = links
        .iter()
        .zip(&alpha)
        .map(|(l, &a)| bd_rate(l, a, p, cfg.sigma_w2))
        .collect();
    let throughputs = avg_throughputs(&q, &bd_rates);
    let t = throughputs.iter().copied().fold(f64::INFINITY, f64::min);
    let ad_rates = view.ad_rates(&beams, &alpha, p, cfg.sigma_w2);
    Ok(SolveState {
        antenna: m,
        p,
        alpha,
        q,
        beams,
        t,
        iterations: trace.len(),
        trace,
        bd_rates,
        ad_rates,
        throughputs,
        antenna_objectives: Vec::new(),
    })
}

/// Run the BCD loop on every antenna. Infeasible antennas come back as
/// errors for which [`Error::is_infeasibility`] holds.
pub fn per_antenna(
    ch: &ChannelRealization,
    cfg: &SystemConfig,
    policy: Policy,
) -> Vec<Result<SolveState>> {
    (0..ch.tx_antennas())
        .map(|m| inner_bcd_with(ch, cfg, m, policy))
        .collect()
}

/// Pick the best of the per-antenna results, lowest index on ties.
pub(crate) fn select_best(results: Vec<Result<SolveState>>) -> Result<SolveState> {
    let mut objectives = Vec::with_capacity(results.len());
    let mut best: Option<SolveState> = None;
    let mut last_err = None;
    for r in results {
        match r {
            Ok(state) => {
                objectives.push(Some(state.t));
                if best.as_ref().is_none_or(|b| state.t > b.t) {
                    best = Some(state);
                }
            }
            Err(e) if e.is_infeasibility() => {
                objectives.push(None);
                last_err = Some(e);
            }
            Err(e) => return Err(e),
        }
    }
    match best {
        Some(mut state) => {
            state.antenna_objectives = objectives;
            Ok(state)
        }
        None => Err(Error::infeasible(format!(
            "no feasible antenna ({})",
            last_err.map_or_else(|| "none".to_string(), |e| e.to_string())
        ))),
    }
}

/// Exhaustive transmit-antenna selection with the proposed BCD loop.
pub fn greedy_tas(ch: &ChannelRealization, cfg: &SystemConfig) -> Result<SolveState> {
    greedy_tas_with(ch, cfg, Policy::PROPOSED)
}

pub fn greedy_tas_with(
    ch: &ChannelRealization,
    cfg: &SystemConfig,
    policy: Policy,
) -> Result<SolveState> {
    select_best(per_antenna(ch, cfg, policy))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::draw_trial;
    use crate::linkmodel::real_vector;
    use crate::C64;
    use approx::assert_relative_eq;

    fn cfg_with(m: usize, n: usize, k: usize) -> SystemConfig {
        let mut cfg =
            crate::config::parse_config(&format!(r#"{{"M": {m}, "N": {n}, "K": {k}}}"#)).unwrap();
        cfg.seed = 11;
        cfg
    }

    #[test]
    fn single_bd_closed_form() {
        let cfg = cfg_with(1, 1, 1);
        let ch = ChannelRealization {
            forward: vec![vec![C64::new(0.2, 0.1)]],
            direct: vec![real_vector(&[0.05])],
            backscatter: vec![real_vector(&[0.03])],
        };
        let s = inner_bcd(&ch, &cfg, 0).unwrap();
        assert!(s.iterations <= 3, "{:?}", s.trace);
        assert_relative_eq!(s.q[0], 1.0 - CAP_EPS, max_relative = 1e-12);
        // Closed-form composition.
        let g = 0.05f64;
        let link = BdLink {
            forward_gain: g,
            trd: 0.0025,
            trb: 0.0009,
            hb_norm2: 0.0009,
        };
        let ad = alpha_ad_bound(&link, 1.0, 1.0, 1e-8);
        let eh = alpha_eh_bound(g, 1.0, &cfg.eh[0], 1e-3).unwrap();
        let a = ad.min(eh).min(1.0);
        assert_relative_eq!(s.alpha[0], a, max_relative = 1e-9);
        let expected = (1.0 - CAP_EPS) * bd_rate(&link, a, 1.0, 1e-8);
        assert_relative_eq!(s.t, expected, max_relative = 1e-9);
    }

    #[test]
    fn traces_are_monotone_and_short() {
        let cfg = cfg_with(4, 4, 4);
        let mut iters = Vec::new();
        for trial in 0..20 {
            let (_, ch) = draw_trial(&cfg, trial).unwrap();
            for m in 0..4 {
                if let Ok(s) = inner_bcd(&ch, &cfg, m) {
                    for w in s.trace.windows(2) {
                        assert!(w[1].t >= w[0].t - 1e-9);
                    }
                    for e in &s.trace {
                        assert!(e.t_bar >= e.t - 1e-9 && e.t_hat >= e.t_bar - 1e-9, "{e:?}");
                    }
                    assert!(s.alpha.iter().all(|a| (0.0..=1.0).contains(a)));
                    assert!(s.beams.iter().all(|b| (b.v_a.norm() - 1.0).abs() < 1e-12));
                    iters.push(s.iterations);
                }
            }
        }
        iters.sort_unstable();
        assert!(!iters.is_empty());
        assert!(iters[iters.len() / 2] <= 5);
    }

    #[test]
    fn selection_is_exhaustive_and_deterministic() {
        let cfg = cfg_with(4, 3, 2);
        let (_, ch) = draw_trial(&cfg, 3).unwrap();
        let best = greedy_tas(&ch, &cfg).unwrap();
        let per: Vec<f64> = (0..4)
            .filter_map(|m| inner_bcd(&ch, &cfg, m).ok().map(|s| s.t))
            .collect();
        let max = per.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(best.t, max);
        assert_eq!(best, greedy_tas(&ch, &cfg).unwrap());
    }

    #[test]
    fn single_antenna_matches_inner_loop() {
        let cfg = cfg_with(1, 2, 2);
        let (_, ch) = draw_trial(&cfg, 0).unwrap();
        let mut inner = inner_bcd(&ch, &cfg, 0).unwrap();
        let best = greedy_tas(&ch, &cfg).unwrap();
        inner.antenna_objectives = vec![Some(inner.t)];
        assert_eq!(best, inner);
    }

    #[test]
    fn stronger_forward_links_win() {
        let cfg = cfg_with(4, 3, 2);
        let (_, mut ch) = draw_trial(&cfg, 5).unwrap();
        for row in ch.forward.iter_mut().skip(1) {
            row.iter_mut().for_each(|h| *h *= 0.5);
        }
        for h in ch.forward[2].iter_mut() {
            *h *= 10.0;
        }
        let best = greedy_tas(&ch, &cfg).unwrap();
        assert_eq!(best.antenna, 2);
    }

    #[test]
    fn identical_antennas_pick_the_first() {
        let cfg = cfg_with(3, 2, 2);
        let (_, mut ch) = draw_trial(&cfg, 1).unwrap();
        let row = ch.forward[0].clone();
        let direct = ch.direct[0].clone();
        for m in 1..3 {
            ch.forward[m] = row.clone();
            ch.direct[m] = direct.clone();
        }
        let best = greedy_tas(&ch, &cfg).unwrap();
        assert_eq!(best.antenna, 0);
        assert_eq!(best.antenna_objectives.len(), 3);
    }

    #[test]
    fn starved_bd_makes_the_antenna_infeasible() {
        let cfg = cfg_with(1, 2, 2);
        let (_, mut ch) = draw_trial(&cfg, 0).unwrap();
        ch.forward[0][1] *= 1e-3;
        let err = inner_bcd(&ch, &cfg, 0).unwrap_err();
        assert!(err.is_infeasibility(), "{err}");
        assert!(greedy_tas(&ch, &cfg).unwrap_err().is_infeasibility());
    }
}
