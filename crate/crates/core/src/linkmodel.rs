//! Link-level figures of merit.
//!
//! The AD signal is decoded first with the backscattered signal as
//! interference; after successive interference cancellation the BD signal
//! sees noise only. A slot carries BD `n` only if it is the sole BD that
//! decided to transmit.

use crate::error::{Error, Result};
use crate::CVector;
#[cfg(test)]
use crate::C64;

/// Receive beams for the active and the backscattered signal of one BD.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamPair {
    pub v_a: CVector,
    pub v_b: CVector,
}

/// `|vᴴh|²`
pub fn beam_gain(v: &CVector, h: &CVector) -> f64 {
    v.dotc(h).norm_sqr()
}

/// SINR of the AD signal when a BD reflects a fraction `alpha`.
pub fn sinr_ad(
    v_a: &CVector,
    h_d: &CVector,
    h_b: &CVector,
    h_f_gain: f64,
    alpha: f64,
    p: f64,
    sigma_w2: f64,
) -> f64 {
    let signal = beam_gain(v_a, h_d) * p;
    let interference = alpha * h_f_gain * beam_gain(v_a, h_b) * p;
    signal / (interference + sigma_w2)
}

/// SNR of the backscattered signal after the AD signal is cancelled.
pub fn snr_bd(
    v_b: &CVector,
    h_b: &CVector,
    h_f_gain: f64,
    alpha: f64,
    p: f64,
    sigma_w2: f64,
) -> f64 {
    alpha * h_f_gain * beam_gain(v_b, h_b) * p / sigma_w2
}

/// Shannon rate `log2(1 + x)` in bits/s/Hz.
pub fn rate(x: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::invalid(format!("SINR {x} must be non-negative")));
    }
    Ok(x.ln_1p() / std::f64::consts::LN_2)
}

/// Probability that BD `n` is the only BD transmitting in a slot.
pub fn success_prob(q: &[f64], n: usize) -> Result<f64> {
    if n >= q.len() {
        return Err(Error::invalid(format!(
            "BD index {n} out of range for {} BDs",
            q.len()
        )));
    }
    Ok(q.iter()
        .enumerate()
        .map(|(j, &qj)| if j == n { qj } else { 1.0 - qj })
        .product())
}

/// Average throughput of BD `n` given its rate when it has the channel.
pub fn avg_throughput_bd(q: &[f64], n: usize, rate_n: f64) -> Result<f64> {
    Ok(success_prob(q, n)? * rate_n)
}

/// All per-BD average throughputs.
pub fn avg_throughputs(q: &[f64], rates: &[f64]) -> Vec<f64> {
    debug_assert_eq!(q.len(), rates.len());
    rates
        .iter()
        .enumerate()
        .map(|(n, &r)| avg_throughput_bd(q, n, r).expect("index in range"))
        .collect()
}

/// Jain's fairness index `(Σv)² / (N·Σv²)`.
pub fn jain_fi(values: &[f64]) -> Result<f64> {
    if values.is_empty() || values.iter().any(|&v| !(v >= 0.0)) {
        return Err(Error::invalid("Jain's index needs non-negative values"));
    }
    let sum: f64 = values.iter().sum();
    let sum_sq: f64 = values.iter().map(|v| v * v).sum();
    if sum_sq == 0.0 {
        return Err(Error::invalid(
            "Jain's index is undefined for an all-zero vector",
        ));
    }
    Ok(sum * sum / (values.len() as f64 * sum_sq))
}

#[cfg(test)]
pub(crate) fn real_vector(values: &[f64]) -> CVector {
    CVector::from_iterator(values.len(), values.iter().map(|&x| C64::new(x, 0.0)))
}
