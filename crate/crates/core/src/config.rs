//! Scenario parameters.
//!
//! The on-disk form is a flat JSON object. Every key is optional and falls
//! back to the reference scenario (4 AD antennas, 4 BDs, 4 AP antennas,
//! AD at the origin, AP 6 m away, BDs in a 2 m circle around (3, 3)).
//! Harvester constants and circuit powers accept either one number for all
//! BDs or an array with one entry per BD. Everything is in SI units (watts,
//! metres); the Rician factor is the only dB quantity and it is converted to
//! linear scale once, here.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::energy::EhParams;
use crate::error::{Error, Result};

/// How BD positions are drawn across Monte-Carlo trials.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BdPlacement {
    /// Fresh positions for every trial.
    #[default]
    PerTrial,
    /// One set of positions shared by every trial.
    Fixed,
}

/// Knobs of the comparison schemes.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkConfig {
    /// Reflection coefficient used by the fixed-RC scheme.
    pub frc_alpha: f64,
    /// Cap on coordinate sweeps of the collision (TC) scheme.
    pub tc_max_sweeps: usize,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            frc_alpha: 0.3,
            tc_max_sweeps: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    /// AD transmit antennas (`M`).
    pub tx_antennas: usize,
    /// Backscatter devices (`N`).
    pub bds: usize,
    /// AP receive antennas (`K`).
    pub rx_antennas: usize,
    pub ad_pos: [f64; 2],
    pub ap_pos: [f64; 2],
    pub bd_circle_center: [f64; 2],
    pub bd_circle_radius: f64,
    pub bd_placement: BdPlacement,
    pub path_loss_exponent: f64,
    pub rician_factor_db: f64,
    /// Linear Rician factor, derived from `rician_factor_db`.
    pub rician_k: f64,
    pub p_max: f64,
    /// Minimum AD rate in bits/s/Hz.
    pub r_min: f64,
    /// Circuit power of each BD.
    pub p_circuit: Vec<f64>,
    /// Harvester constants of each BD.
    pub eh: Vec<EhParams>,
    /// AP noise power.
    pub sigma_w2: f64,
    /// BD noise power. Carried for completeness; no rate depends on it.
    pub sigma_n2: f64,
    pub omega_th: f64,
    pub phi_th: f64,
    pub eps_th: f64,
    pub max_iter_a1: usize,
    pub max_iter_a2: usize,
    pub max_iter_a3: usize,
    pub trials: usize,
    pub seed: u64,
    pub benchmark: BenchmarkConfig,
}

impl Default for SystemConfig {
    fn default() -> Self {
        let n = 4;
        let rician_factor_db = 2.8;
        Self {
            tx_antennas: 4,
            bds: n,
            rx_antennas: 4,
            ad_pos: [0.0, 0.0],
            ap_pos: [6.0, 0.0],
            bd_circle_center: [3.0, 3.0],
            bd_circle_radius: 2.0,
            bd_placement: BdPlacement::PerTrial,
            path_loss_exponent: 2.2,
            rician_factor_db,
            rician_k: db_to_linear(rician_factor_db),
            p_max: 1.0,
            r_min: 1.0,
            p_circuit: vec![1e-3; n],
            eh: vec![EhParams::reference(); n],
            sigma_w2: 1e-8,
            sigma_n2: 1e-8,
            omega_th: 1e-3,
            phi_th: 1e-3,
            eps_th: 1e-3,
            max_iter_a1: 1000,
            max_iter_a2: 1000,
            max_iter_a3: 1000,
            trials: 200,
            seed: 0x5A10_BAC0,
            benchmark: BenchmarkConfig::default(),
        }
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Scalar-or-per-BD value in the document.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(untagged)]
enum PerBd {
    One(f64),
    Each(Vec<f64>),
}

impl PerBd {
    fn expand(&self, key: &str, n: usize) -> Result<Vec<f64>> {
        match self {
            PerBd::One(v) => Ok(vec![*v; n]),
            PerBd::Each(vs) if vs.len() == n => Ok(vs.clone()),
            PerBd::Each(vs) => Err(Error::Config(format!(
                "{key} has {} entries but N = {n}",
                vs.len()
            ))),
        }
    }

    fn compact(values: &[f64]) -> Self {
        match values.first() {
            Some(&first) if values.iter().all(|&v| v == first) => PerBd::One(first),
            _ => PerBd::Each(values.to_vec()),
        }
    }
}

#[derive(Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct Document {
    #[serde(rename = "M", skip_serializing_if = "Option::is_none")]
    m: Option<usize>,
    #[serde(rename = "N", skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
    #[serde(rename = "K", skip_serializing_if = "Option::is_none")]
    k: Option<usize>,
    ad_pos: Option<[f64; 2]>,
    ap_pos: Option<[f64; 2]>,
    bd_circle_center: Option<[f64; 2]>,
    bd_circle_radius: Option<f64>,
    bd_placement: Option<BdPlacement>,
    path_loss_exponent: Option<f64>,
    rician_factor_db: Option<f64>,
    p_max: Option<f64>,
    r_min: Option<f64>,
    p_circuit: Option<PerBd>,
    eh_a: Option<PerBd>,
    eh_b: Option<PerBd>,
    eh_p_se: Option<PerBd>,
    eh_p_sa: Option<PerBd>,
    sigma_w2: Option<f64>,
    sigma_n2: Option<f64>,
    omega_th: Option<f64>,
    phi_th: Option<f64>,
    eps_th: Option<f64>,
    max_iter_a1: Option<usize>,
    max_iter_a2: Option<usize>,
    max_iter_a3: Option<usize>,
    trials: Option<usize>,
    seed: Option<u64>,
    frc_alpha: Option<f64>,
    tc_max_sweeps: Option<usize>,
}

/// Parse a JSON scenario document. Empty or whitespace-only text yields the
/// reference scenario.
pub fn parse_config(text: &str) -> Result<SystemConfig> {
    let value: Value = if text.trim().is_empty() {
        Value::Object(Map::new())
    } else {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("malformed document: {e}")))?
    };
    config_from_value(value)
}

/// Build a config from an already-parsed JSON object. Used by sweeps, which
/// patch individual keys before validation.
pub fn config_from_value(value: Value) -> Result<SystemConfig> {
    let doc: Document = serde_json::from_value(value)
        .map_err(|e| Error::Config(format!("malformed document: {e}")))?;
    let d = SystemConfig::default();
    let n = doc.n.unwrap_or(d.bds);
    let ref_eh = EhParams::reference();

    let expand = |key: &str, v: &Option<PerBd>, default: f64| -> Result<Vec<f64>> {
        match v {
            Some(v) => v.expand(key, n),
            None => Ok(vec![default; n]),
        }
    };
    let a = expand("eh_a", &doc.eh_a, ref_eh.a)?;
    let b = expand("eh_b", &doc.eh_b, ref_eh.b)?;
    let p_se = expand("eh_p_se", &doc.eh_p_se, ref_eh.p_se)?;
    let p_sa = expand("eh_p_sa", &doc.eh_p_sa, ref_eh.p_sa)?;
    let eh = (0..n)
        .map(|i| EhParams {
            a: a[i],
            b: b[i],
            p_se: p_se[i],
            p_sa: p_sa[i],
        })
        .collect();

    let rician_factor_db = doc.rician_factor_db.unwrap_or(d.rician_factor_db);
    let cfg = SystemConfig {
        tx_antennas: doc.m.unwrap_or(d.tx_antennas),
        bds: n,
        rx_antennas: doc.k.unwrap_or(d.rx_antennas),
        ad_pos: doc.ad_pos.unwrap_or(d.ad_pos),
        ap_pos: doc.ap_pos.unwrap_or(d.ap_pos),
        bd_circle_center: doc.bd_circle_center.unwrap_or(d.bd_circle_center),
        bd_circle_radius: doc.bd_circle_radius.unwrap_or(d.bd_circle_radius),
        bd_placement: doc.bd_placement.unwrap_or(d.bd_placement),
        path_loss_exponent: doc.path_loss_exponent.unwrap_or(d.path_loss_exponent),
        rician_factor_db,
        rician_k: db_to_linear(rician_factor_db),
        p_max: doc.p_max.unwrap_or(d.p_max),
        r_min: doc.r_min.unwrap_or(d.r_min),
        p_circuit: expand("p_circuit", &doc.p_circuit, d.p_circuit[0])?,
        eh,
        sigma_w2: doc.sigma_w2.unwrap_or(d.sigma_w2),
        sigma_n2: doc.sigma_n2.unwrap_or(d.sigma_n2),
        omega_th: doc.omega_th.unwrap_or(d.omega_th),
        phi_th: doc.phi_th.unwrap_or(d.phi_th),
        eps_th: doc.eps_th.unwrap_or(d.eps_th),
        max_iter_a1: doc.max_iter_a1.unwrap_or(d.max_iter_a1),
        max_iter_a2: doc.max_iter_a2.unwrap_or(d.max_iter_a2),
        max_iter_a3: doc.max_iter_a3.unwrap_or(d.max_iter_a3),
        trials: doc.trials.unwrap_or(d.trials),
        seed: doc.seed.unwrap_or(d.seed),
        benchmark: BenchmarkConfig {
            frc_alpha: doc.frc_alpha.unwrap_or(d.benchmark.frc_alpha),
            tc_max_sweeps: doc.tc_max_sweeps.unwrap_or(d.benchmark.tc_max_sweeps),
        },
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Render every field as a JSON document that [`parse_config`] maps back to
/// the same config.
pub fn render_config(cfg: &SystemConfig) -> String {
    let per =
        |f: fn(&EhParams) -> f64| Some(PerBd::compact(&cfg.eh.iter().map(f).collect::<Vec<_>>()));
    let doc = Document {
        m: Some(cfg.tx_antennas),
        n: Some(cfg.bds),
        k: Some(cfg.rx_antennas),
        ad_pos: Some(cfg.ad_pos),
        ap_pos: Some(cfg.ap_pos),
        bd_circle_center: Some(cfg.bd_circle_center),
        bd_circle_radius: Some(cfg.bd_circle_radius),
        bd_placement: Some(cfg.bd_placement),
        path_loss_exponent: Some(cfg.path_loss_exponent),
        rician_factor_db: Some(cfg.rician_factor_db),
        p_max: Some(cfg.p_max),
        r_min: Some(cfg.r_min),
        p_circuit: Some(PerBd::compact(&cfg.p_circuit)),
        eh_a: per(|e| e.a),
        eh_b: per(|e| e.b),
        eh_p_se: per(|e| e.p_se),
        eh_p_sa: per(|e| e.p_sa),
        sigma_w2: Some(cfg.sigma_w2),
        sigma_n2: Some(cfg.sigma_n2),
        omega_th: Some(cfg.omega_th),
        phi_th: Some(cfg.phi_th),
        eps_th: Some(cfg.eps_th),
        max_iter_a1: Some(cfg.max_iter_a1),
        max_iter_a2: Some(cfg.max_iter_a2),
        max_iter_a3: Some(cfg.max_iter_a3),
        trials: Some(cfg.trials),
        seed: Some(cfg.seed),
        frc_alpha: Some(cfg.benchmark.frc_alpha),
        tc_max_sweeps: Some(cfg.benchmark.tc_max_sweeps),
    };
    serde_json::to_string_pretty(&doc).expect("config document is always serializable")
}

/// Render a config to a JSON value (for sweeps that patch keys).
pub fn config_to_value(cfg: &SystemConfig) -> Value {
    serde_json::from_str(&render_config(cfg)).expect("rendered config is valid JSON")
}

fn positive(key: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{key} must be positive")))
    }
}

fn non_negative(key: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{key} must be non-negative")))
    }
}

fn unit_open(key: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("{key} must lie in (0, 1)")))
    }
}

impl SystemConfig {
    pub fn validate(&self) -> Result<()> {
        for (key, v) in [
            ("M", self.tx_antennas),
            ("N", self.bds),
            ("K", self.rx_antennas),
        ] {
            if v < 1 {
                return Err(Error::Config(format!("{key} must be at least 1")));
            }
        }
        if self.p_circuit.len() != self.bds || self.eh.len() != self.bds {
            return Err(Error::Config("per-BD arrays must have N entries".into()));
        }
        for p in self
            .ad_pos
            .iter()
            .chain(&self.ap_pos)
            .chain(&self.bd_circle_center)
        {
            if !p.is_finite() {
                return Err(Error::Config("positions must be finite".into()));
            }
        }
        non_negative("bd_circle_radius", self.bd_circle_radius)?;
        positive("path_loss_exponent", self.path_loss_exponent)?;
        if self.rician_factor_db.is_nan() {
            return Err(Error::Config("rician_factor_db must be a number".into()));
        }
        positive("p_max", self.p_max)?;
        non_negative("r_min", self.r_min)?;
        for &p in &self.p_circuit {
            non_negative("p_circuit", p)?;
        }
        for e in &self.eh {
            positive("eh_a", e.a)?;
            if !e.b.is_finite() {
                return Err(Error::Config("eh_b must be finite".into()));
            }
            non_negative("eh_p_se", e.p_se)?;
            positive("eh_p_sa", e.p_sa)?;
        }
        positive("sigma_w2", self.sigma_w2)?;
        positive("sigma_n2", self.sigma_n2)?;
        unit_open("omega_th", self.omega_th)?;
        unit_open("phi_th", self.phi_th)?;
        unit_open("eps_th", self.eps_th)?;
        for (key, v) in [
            ("max_iter_a1", self.max_iter_a1),
            ("max_iter_a2", self.max_iter_a2),
            ("max_iter_a3", self.max_iter_a3),
            ("trials", self.trials),
        ] {
            if v < 1 {
                return Err(Error::Config(format!("{key} must be at least 1")));
            }
        }
        let a = self.benchmark.frc_alpha;
        if !(a > 0.0 && a <= 1.0) {
            return Err(Error::Config("frc_alpha must lie in (0, 1]".into()));
        }
        if self.benchmark.tc_max_sweeps < 1 {
            return Err(Error::Config("tc_max_sweeps must be at least 1".into()));
        }
        Ok(())
    }

    /// `2^R_min - 1`, the SINR the AD needs.
    pub fn sinr_threshold(&self) -> f64 {
        self.r_min.exp2() - 1.0
    }
}
