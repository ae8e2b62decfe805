//! Closed-form transmit power and reflection coefficients.
//!
//! With the beams and access probabilities fixed, every BD's throughput is
//! increasing in both the AD power and its own reflection coefficient, so the
//! AD transmits at `P_max` and each BD reflects as much as the two upper
//! bounds on its coefficient allow:
//!
//! * `α_AD`, the largest coefficient at which the AD still meets its rate
//!   target, and
//! * `α_EH`, the largest coefficient that still leaves enough harvested power
//!   for the BD's circuit.

use crate::energy::EhParams;
use crate::error::{Error, Result};
use crate::linkmodel::{rate, success_prob};

/// Per-BD link quantities that the closed forms depend on, for the selected
/// antenna and the current AD beam.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BdLink {
    /// `|h_f|²`
    pub forward_gain: f64,
    /// `Tr(H_d V) = |v_aᴴ h_d|²`
    pub trd: f64,
    /// `Tr(H_b V) = |v_aᴴ h_b|²`
    pub trb: f64,
    /// `‖h_b‖²`, the MRC gain of the backscatter link.
    pub hb_norm2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RcSolution {
    pub alpha: Vec<f64>,
    /// Uncapped AD-side bound (may exceed 1 or be infinite).
    pub alpha_ad: Vec<f64>,
    pub alpha_eh: Vec<f64>,
    pub p: f64,
    pub p_min: Vec<f64>,
    pub feasible_bd: Vec<bool>,
    pub feasible: bool,
}

/// Minimum AD power for each BD and the overall floor (their maximum).
pub fn min_power(
    links: &[BdLink],
    eh: &[EhParams],
    p_circuit: &[f64],
    r_min: f64,
    sigma_w2: f64,
) -> Result<(Vec<f64>, f64)> {
    let gamma = r_min.exp2() - 1.0;
    let mut per_bd = Vec::with_capacity(links.len());
    for ((link, eh), &pc) in links.iter().zip(eh).zip(p_circuit) {
        if !(link.trd > 0.0) {
            return Err(Error::invalid("direct-link beam gain must be positive"));
        }
        let harvest = eh.inverse(pc)? / link.forward_gain;
        let qos = gamma * sigma_w2 / link.trd;
        per_bd.push(harvest.max(qos));
    }
    let floor = per_bd.iter().copied().fold(0.0, f64::max);
    Ok((per_bd, floor))
}

/// The AD transmits at full power whenever that clears the floor.
pub fn optimal_power(p_max: f64, floor: f64) -> Result<f64> {
    if p_max > floor {
        Ok(p_max)
    } else {
        Err(Error::infeasible(format!(
            "power floor {floor:.6e} W is not below P_max = {p_max} W"
        )))
    }
}

/// `α_AD`: largest coefficient keeping the AD SINR at `2^R_min − 1`.
pub fn alpha_ad_bound(link: &BdLink, p: f64, r_min: f64, sigma_w2: f64) -> f64 {
    let gamma = r_min.exp2() - 1.0;
    let denom = gamma * link.trb * link.forward_gain * p;
    if denom <= 0.0 {
        return f64::INFINITY;
    }
    (link.trd * p - gamma * sigma_w2) / denom
}

/// `α_EH`: largest coefficient leaving `Φ⁻¹(P_C)` for the harvester.
pub fn alpha_eh_bound(forward_gain: f64, p: f64, eh: &EhParams, p_circuit: f64) -> Result<f64> {
    Ok(1.0 - eh.inverse(p_circuit)? / (p * forward_gain))
}

/// Reflection coefficients at power `p` (normally `P_max`).
#[allow(clippy::too_many_arguments)]
pub fn optimal_rc(
    links: &[BdLink],
    p: f64,
    r_min: f64,
    sigma_w2: f64,
    eh: &[EhParams],
    p_circuit: &[f64],
) -> Result<RcSolution> {
    let (p_min, _) = min_power(links, eh, p_circuit, r_min, sigma_w2)?;
    let mut alpha = Vec::with_capacity(links.len());
    let mut alpha_ad = Vec::with_capacity(links.len());
    let mut alpha_eh = Vec::with_capacity(links.len());
    let mut feasible_bd = Vec::with_capacity(links.len());
    for (n, link) in links.iter().enumerate() {
        let ad = alpha_ad_bound(link, p, r_min, sigma_w2);
        let ehb = alpha_eh_bound(link.forward_gain, p, &eh[n], p_circuit[n])?;
        let a = ad.min(1.0).min(ehb).clamp(0.0, 1.0);
        feasible_bd.push(a > 0.0 && p > p_min[n]);
        alpha.push(a);
        alpha_ad.push(ad);
        alpha_eh.push(ehb);
    }
    let feasible = feasible_bd.iter().all(|&f| f);
    Ok(RcSolution {
        alpha,
        alpha_ad,
        alpha_eh,
        p,
        p_min,
        feasible_bd,
        feasible,
    })
}

/// Achievable backscatter rate with MRC at the AP.
pub fn bd_rate(link: &BdLink, alpha: f64, p: f64, sigma_w2: f64) -> f64 {
    rate(alpha * link.forward_gain * link.hb_norm2 * p / sigma_w2).expect("non-negative SNR")
}

/// Per-BD subproblem values from the two-branch closed form and their
/// minimum.
pub fn subproblem_value(
    rc: &RcSolution,
    links: &[BdLink],
    q: &[f64],
    r_min: f64,
    sigma_w2: f64,
    eh: &[EhParams],
    p_circuit: &[f64],
) -> Result<(f64, Vec<f64>)> {
    let gamma = r_min.exp2() - 1.0;
    let p = rc.p;
    let mut per_bd = Vec::with_capacity(links.len());
    for (n, link) in links.iter().enumerate() {
        let pr = success_prob(q, n)?;
        if rc.alpha[n] <= 0.0 {
            per_bd.push(0.0);
            continue;
        }
        let snr = if rc.alpha_ad[n] < rc.alpha_eh[n] {
            (link.trd * p - gamma * sigma_w2) / (gamma * link.trb * sigma_w2) * link.hb_norm2
        } else {
            let floor = eh[n].inverse(p_circuit[n])?;
            (link.forward_gain * link.hb_norm2 * p - link.hb_norm2 * floor) / sigma_w2
        };
        per_bd.push(pr * rate(snr)?);
    }
    let t = per_bd.iter().copied().fold(f64::INFINITY, f64::min);
    Ok((t, per_bd))
}
