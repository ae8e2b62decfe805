//! Comparison schemes.
//!
//! * ECAP: every BD accesses the channel with probability `1/N`.
//! * FRC: every BD uses the same fixed reflection coefficient.
//! * RTAS: a uniformly random feasible transmit antenna.
//! * TDMA: BDs get dedicated time fractions instead of contending.
//! * TC: every BD transmits in every slot and the AP separates them with
//!   MMSE beams, so BDs interfere with each other and with the AD.

use rand::Rng;

use crate::bcd::{greedy_tas_with, per_antenna, CapPolicy, Policy, RcPolicy, SolveState};
use crate::beamforming::{active_beam_multi, mmse_beam, BeamPair, C3_SLACK};
use crate::channel::ChannelRealization;
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::linkmodel::{beam_gain, rate};
use crate::powerrc::alpha_eh_bound;
use crate::{CVector, C64};

pub fn solve_ecap(ch: &ChannelRealization, cfg: &SystemConfig) -> Result<SolveState> {
    greedy_tas_with(
        ch,
        cfg,
        Policy {
            rc: RcPolicy::Optimal,
            cap: CapPolicy::Equal,
        },
    )
}

pub fn solve_frc(ch: &ChannelRealization, cfg: &SystemConfig) -> Result<SolveState> {
    let policy = Policy {
        rc: RcPolicy::Fixed(cfg.benchmark.frc_alpha),
        cap: CapPolicy::Optimal,
    };
    greedy_tas_with(ch, cfg, policy)
}

pub fn solve_rtas<R: Rng + ?Sized>(
    ch: &ChannelRealization,
    cfg: &SystemConfig,
    rng: &mut R,
) -> Result<SolveState> {
    let mut feasible = Vec::new();
    for r in per_antenna(ch, cfg, Policy::PROPOSED) {
        match r {
            Ok(s) => feasible.push(s),
            Err(e) if e.is_infeasibility() => {}
            Err(e) => return Err(e),
        }
    }
    if feasible.is_empty() {
        return Err(Error::infeasible("no feasible antenna"));
    }
    let pick = rng.random_range(0..feasible.len());
    Ok(feasible.swap_remove(pick))
}

/// Max-min time allocation.
#[derive(Debug, Clone, PartialEq)]
pub struct TdmaSolution {
    /// Fraction of the frame given to each BD.
    pub tau: Vec<f64>,
    /// `min_n τ_n·r_n`.
    pub t: f64,
}

/// Maximise `min_n τ_n r_n` subject to `Σ τ_n = 1` and a time-averaged AD
/// rate of at least `r_min`, where the AD achieves `r_ad[n]` during BD `n`'s
/// share. For a target `t` the cheapest allocation is `τ_n = t / r_n` with
/// all spare time given to the BD under which the AD does best, so
/// feasibility of `t` is two linear inequalities and `t` is found by
/// bisection.
pub fn solve_tdma_allocation(r: &[f64], r_ad: &[f64], r_min: f64) -> Result<TdmaSolution> {
    if r.is_empty() || r.len() != r_ad.len() || r.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::invalid(
            "TDMA allocation needs one positive rate per BD",
        ));
    }
    let (best, &best_ad) = r_ad
        .iter()
        .enumerate()
        .fold((0, &f64::NEG_INFINITY), |acc, (i, x)| {
            if *x > *acc.1 {
                (i, x)
            } else {
                acc
            }
        });
    if best_ad < r_min {
        return Err(Error::infeasible(
            "AD rate target unreachable in every slot",
        ));
    }
    let inv_sum: f64 = r.iter().map(|x| 1.0 / x).sum();
    let ad_sum: f64 = r.iter().zip(r_ad).map(|(x, a)| a / x).sum();
    let feasible =
        |t: f64| t * inv_sum <= 1.0 && t * ad_sum + (1.0 - t * inv_sum) * best_ad >= r_min;
    let (mut lo, mut hi) = (0.0, 1.0 / inv_sum);
    if feasible(hi) {
        lo = hi;
    } else {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if feasible(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }
    let t = lo;
    let mut tau: Vec<f64> = r.iter().map(|x| t / x).collect();
    tau[best] += (1.0 - t * inv_sum).max(0.0);
    Ok(TdmaSolution { tau, t })
}

/// Beams, power and RCs as in the proposed scheme, then time sharing
/// instead of random access; the best antenna is kept.
pub fn solve_tdma(
    ch: &ChannelRealization,
    cfg: &SystemConfig,
) -> Result<(SolveState, TdmaSolution)> {
    let mut best: Option<(SolveState, TdmaSolution)> = None;
    let mut objectives = Vec::with_capacity(ch.tx_antennas());
    for r in per_antenna(ch, cfg, Policy::PROPOSED) {
        let state = match r {
            Ok(s) => s,
            Err(e) if e.is_infeasibility() => {
                objectives.push(None);
                continue;
            }
            Err(e) => return Err(e),
        };
        let sol = match solve_tdma_allocation(&state.bd_rates, &state.ad_rates, cfg.r_min) {
            Ok(sol) => sol,
            Err(e) if e.is_infeasibility() => {
                objectives.push(None);
                continue;
            }
            Err(e) => return Err(e),
        };
        objectives.push(Some(sol.t));
        if best.as_ref().is_none_or(|(_, b)| sol.t > b.t) {
            best = Some((state, sol));
        }
    }
    let (mut state, sol) = best.ok_or_else(|| Error::infeasible("no feasible antenna"))?;
    state.q.clone_from(&sol.tau);
    state.throughputs = sol
        .tau
        .iter()
        .zip(&state.bd_rates)
        .map(|(t, r)| t * r)
        .collect();
    state.t = sol.t;
    state.trace.clear();
    state.antenna_objectives = objectives;
    Ok((state, sol))
}

/// All BDs reflecting at once from antenna `m`.
struct Concurrent<'a> {
    h_d: &'a CVector,
    h_b: &'a [CVector],
    gains: Vec<f64>,
    alpha_eh: Vec<f64>,
    p: f64,
    sigma_w2: f64,
    r_min: f64,
}

struct ConcurrentEval {
    beams: Vec<BeamPair>,
    rates: Vec<f64>,
    ad_rate: f64,
}

impl Concurrent<'_> {
    fn interferers(&self, alpha: &[f64]) -> Vec<(&CVector, f64)> {
        self.h_b
            .iter()
            .zip(&self.gains)
            .zip(alpha)
            .map(|((h, g), a)| (h, a * g))
            .collect()
    }

    fn ad_feasible(&self, alpha: &[f64]) -> Result<bool> {
        let (_, diag) = active_beam_multi(
            self.h_d,
            &self.interferers(alpha),
            self.p,
            self.sigma_w2,
            self.r_min,
        )?;
        Ok(diag.feasible)
    }

    fn bd_rates(&self, alpha: &[f64]) -> Result<(Vec<f64>, Vec<CVector>)> {
        let eff: Vec<CVector> = self
            .h_b
            .iter()
            .zip(&self.gains)
            .zip(alpha)
            .map(|((h, g), a)| h * C64::from((a * g).sqrt()))
            .collect();
        let mut rates = Vec::with_capacity(eff.len());
        let mut beams = Vec::with_capacity(eff.len());
        for n in 0..eff.len() {
            if alpha[n] <= 0.0 {
                rates.push(0.0);
                beams.push(self.h_b[n].normalize());
                continue;
            }
            let others: Vec<CVector> = (0..eff.len())
                .filter(|&j| j != n)
                .map(|j| eff[j].clone())
                .collect();
            let v = mmse_beam(&eff[n], &others, self.p, self.sigma_w2)?;
            let signal = beam_gain(&v, &eff[n]) * self.p;
            let interference: f64 = others.iter().map(|h| beam_gain(&v, h)).sum::<f64>() * self.p;
            rates.push(rate(signal / (interference + self.sigma_w2))?);
            beams.push(v);
        }
        Ok((rates, beams))
    }

    fn evaluate(&self, alpha: &[f64]) -> Result<ConcurrentEval> {
        let (v_a, diag) = active_beam_multi(
            self.h_d,
            &self.interferers(alpha),
            self.p,
            self.sigma_w2,
            self.r_min,
        )?;
        let (rates, v_b) = self.bd_rates(alpha)?;
        let beams = v_b
            .into_iter()
            .map(|v_b| BeamPair {
                v_a: v_a.clone(),
                v_b,
            })
            .collect();
        Ok(ConcurrentEval {
            beams,
            rates,
            ad_rate: diag.c3_margin + self.r_min,
        })
    }

    /// Largest `x ∈ [0, 1]` with `pred(x)`, assuming `pred` holds at 0 and
    /// is monotone.
    fn bisect(mut pred: impl FnMut(f64) -> Result<bool>) -> Result<f64> {
        if pred(1.0)? {
            return Ok(1.0);
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..50 {
            let mid = 0.5 * (lo + hi);
            if pred(mid)? {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(lo)
    }
}

fn min_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::INFINITY, f64::min)
}

fn tc_on_antenna(ch: &ChannelRealization, cfg: &SystemConfig, m: usize) -> Result<SolveState> {
    let n = ch.bds();
    let p = cfg.p_max;
    let gains: Vec<f64> = (0..n).map(|i| ch.forward_gain(m, i)).collect();
    let alpha_eh = (0..n)
        .map(|i| alpha_eh_bound(gains[i], p, &cfg.eh[i], cfg.p_circuit[i]))
        .collect::<Result<Vec<_>>>()?;
    if let Some(i) = alpha_eh.iter().position(|&a| a <= 0.0) {
        return Err(Error::infeasible(format!(
            "BD {i} cannot harvest enough at full power"
        )));
    }
    let sys = Concurrent {
        h_d: &ch.direct[m],
        h_b: &ch.backscatter,
        gains,
        alpha_eh: alpha_eh.iter().map(|a| a.min(1.0)).collect(),
        p,
        sigma_w2: cfg.sigma_w2,
        r_min: cfg.r_min,
    };
    if !sys.ad_feasible(&vec![0.0; n])? {
        return Err(Error::infeasible(
            "AD rate target unreachable even without reflection",
        ));
    }

    // Common scaling of the harvesting bounds that keeps the AD feasible.
    let scaled = |s: f64| -> Vec<f64> { sys.alpha_eh.iter().map(|a| a * s).collect() };
    let s = Concurrent::bisect(|s| sys.ad_feasible(&scaled(s)))?;
    let mut alpha = scaled(s);
    let mut value = min_of(&sys.bd_rates(&alpha)?.0);
    let mut trace = Vec::new();

    for _ in 0..cfg.benchmark.tc_max_sweeps {
        let before = value;
        for i in 0..n {
            let with = |x: f64, alpha: &[f64]| -> Vec<f64> {
                let mut a = alpha.to_vec();
                a[i] = x;
                a
            };
            let ceiling = sys.alpha_eh[i];
            let upper =
                ceiling * Concurrent::bisect(|f| sys.ad_feasible(&with(f * ceiling, &alpha)))?;
            // Own rate rises and everyone else's falls with alpha_i; the
            // max-min point is where they cross, or the ceiling.
            let gap = |x: f64| -> Result<f64> {
                let (rates, _) = sys.bd_rates(&with(x, &alpha))?;
                let others = (0..n)
                    .filter(|&j| j != i)
                    .map(|j| rates[j])
                    .fold(f64::INFINITY, f64::min);
                Ok(rates[i] - others)
            };
            let candidate = if gap(upper)? <= 0.0 {
                upper
            } else {
                upper * Concurrent::bisect(|f| Ok(gap(f * upper)? <= 0.0))?
            };
            let trial = with(candidate, &alpha);
            let v = min_of(&sys.bd_rates(&trial)?.0);
            if v > value {
                value = v;
                alpha = trial;
            }
        }
        trace.push(crate::bcd::TraceEntry {
            t: before,
            t_bar: value,
            t_hat: value,
        });
        if value - before < cfg.eps_th {
            break;
        }
    }

    let eval = sys.evaluate(&alpha)?;
    if eval.ad_rate < cfg.r_min - C3_SLACK {
        return Err(Error::infeasible("AD rate target violated"));
    }
    Ok(SolveState {
        antenna: m,
        p,
        alpha,
        q: vec![1.0; n],
        beams: eval.beams,
        t: min_of(&eval.rates),
        iterations: trace.len(),
        trace,
        throughputs: eval.rates.clone(),
        bd_rates: eval.rates,
        ad_rates: vec![eval.ad_rate; n],
        antenna_objectives: Vec::new(),
    })
}

/// Concurrent transmission with MMSE separation, best antenna.
pub fn solve_tc(ch: &ChannelRealization, cfg: &SystemConfig) -> Result<SolveState> {
    crate::bcd::select_best(
        (0..ch.tx_antennas())
            .map(|m| tc_on_antenna(ch, cfg, m))
            .collect(),
    )
}
