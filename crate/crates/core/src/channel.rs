//! Node geometry and block-fading channel draws.
//!
//! Every random quantity comes from its own ChaCha stream keyed by
//! `(seed, trial, purpose, index)`. Consequences worth knowing:
//!
//! * the same `(seed, trial)` always gives the same realization, whatever
//!   order trials run in;
//! * the first `K` entries of an AP-side vector do not depend on `K`, and BD
//!   `n`'s position and channels do not depend on `N`, so sweeps over `K` or
//!   `N` compare nested scenarios under common random numbers.

use std::f64::consts::PI;
use std::io::Write;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::config::{BdPlacement, SystemConfig};
use crate::error::{Error, Result};
use crate::{CVector, C64};

/// Trial index reserved for draws shared by all trials.
const SHARED_TRIAL: u64 = 0xFFFF_FFFF;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    BdPosition,
    Forward,
    Direct,
    Backscatter,
    AntennaDraw,
    AccessSlots,
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::BdPosition => 1,
            Purpose::Forward => 2,
            Purpose::Direct => 3,
            Purpose::Backscatter => 4,
            Purpose::AntennaDraw => 5,
            Purpose::AccessSlots => 6,
        }
    }
}

/// Source of independent per-trial random streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialStreams {
    pub seed: u64,
    pub trial: u64,
}

impl TrialStreams {
    pub fn new(seed: u64, trial: u64) -> Self {
        assert!(trial < SHARED_TRIAL, "trial index out of range");
        Self { seed, trial }
    }

    fn shared(self) -> Self {
        Self {
            seed: self.seed,
            trial: SHARED_TRIAL,
        }
    }

    /// Stream for `(purpose, index)`; `index` must fit in 24 bits.
    pub fn rng(&self, purpose: Purpose, index: u64) -> ChaCha12Rng {
        debug_assert!(index < 1 << 24);
        let mut rng = ChaCha12Rng::seed_from_u64(self.seed);
        rng.set_stream((self.trial << 32) | (purpose.tag() << 24) | index);
        rng
    }
}

fn pair_index(a: usize, b: usize) -> u64 {
    ((a as u64) << 12) | b as u64
}

#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub ad_pos: [f64; 2],
    pub ap_pos: [f64; 2],
    pub bd_pos: Vec<[f64; 2]>,
}

impl Topology {
    /// Place the BDs uniformly at random in the configured circle.
    pub fn draw(cfg: &SystemConfig, streams: &TrialStreams) -> Self {
        let streams = match cfg.bd_placement {
            BdPlacement::PerTrial => *streams,
            BdPlacement::Fixed => streams.shared(),
        };
        let bd_pos = (0..cfg.bds)
            .map(|n| {
                let mut rng = streams.rng(Purpose::BdPosition, n as u64);
                let r = cfg.bd_circle_radius * rng.random::<f64>().sqrt();
                let theta = 2.0 * PI * rng.random::<f64>();
                [
                    cfg.bd_circle_center[0] + r * theta.cos(),
                    cfg.bd_circle_center[1] + r * theta.sin(),
                ]
            })
            .collect();
        Self {
            ad_pos: cfg.ad_pos,
            ap_pos: cfg.ap_pos,
            bd_pos,
        }
    }
}

fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Distance path loss `d^-mu` as a linear power gain.
pub fn path_loss(d: f64, mu: f64) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::Geometry(format!("distance {d} m must be positive")));
    }
    Ok(d.powf(-mu))
}

/// Circularly symmetric complex Gaussian sample with unit variance.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Rician vector with unit average power per entry and an all-ones LOS part.
pub fn rician_vector<R: Rng + ?Sized>(dim: usize, kappa_db: f64, rng: &mut R) -> Result<CVector> {
    if dim < 1 {
        return Err(Error::invalid("Rician vector needs at least one entry"));
    }
    let (los, nlos) = if kappa_db == f64::INFINITY {
        (1.0, 0.0)
    } else {
        let kappa = 10f64.powf(kappa_db / 10.0);
        ((kappa / (1.0 + kappa)).sqrt(), (1.0 / (1.0 + kappa)).sqrt())
    };
    Ok(CVector::from_fn(dim, |_, _| {
        let scatter = complex_gaussian(rng);
        C64::new(los, 0.0) + scatter * nlos
    }))
}

/// One block-fading draw of every link.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// `forward[m][n]`: AD antenna `m` to BD `n`.
    pub forward: Vec<Vec<C64>>,
    /// `direct[m]`: AD antenna `m` to the AP array.
    pub direct: Vec<CVector>,
    /// `backscatter[n]`: BD `n` to the AP array.
    pub backscatter: Vec<CVector>,
}

impl ChannelRealization {
    pub fn tx_antennas(&self) -> usize {
        self.direct.len()
    }

    pub fn bds(&self) -> usize {
        self.backscatter.len()
    }

    pub fn rx_antennas(&self) -> usize {
        self.direct.first().map_or(0, |h| h.len())
    }

    pub fn forward_gain(&self, m: usize, n: usize) -> f64 {
        self.forward[m][n].norm_sqr()
    }

    /// Scale every forward coefficient of BD `n` by `factor` (used by tests
    /// and scenario construction).
    pub fn scale_forward(&mut self, n: usize, factor: f64) {
        for row in &mut self.forward {
            row[n] *= factor;
        }
    }

    /// Write every coefficient as CSV rows
    /// `trial,link,antenna,bd,rx,re,im`. Indices that do not apply to a link
    /// are left empty.
    pub fn write_csv<W: Write>(&self, trial: u64, out: &mut csv::Writer<W>) -> Result<()> {
        for (m, row) in self.forward.iter().enumerate() {
            for (n, h) in row.iter().enumerate() {
                out.write_record(record(trial, "forward", Some(m), Some(n), None, *h))?;
            }
        }
        for (m, h) in self.direct.iter().enumerate() {
            for (k, x) in h.iter().enumerate() {
                out.write_record(record(trial, "direct", Some(m), None, Some(k), *x))?;
            }
        }
        for (n, h) in self.backscatter.iter().enumerate() {
            for (k, x) in h.iter().enumerate() {
                out.write_record(record(trial, "backscatter", None, Some(n), Some(k), *x))?;
            }
        }
        Ok(())
    }
}

pub const CHANNEL_CSV_HEADER: [&str; 7] = ["trial", "link", "antenna", "bd", "rx", "re", "im"];

fn record(
    trial: u64,
    link: &str,
    m: Option<usize>,
    n: Option<usize>,
    k: Option<usize>,
    h: C64,
) -> [String; 7] {
    let idx = |i: Option<usize>| i.map(|i| i.to_string()).unwrap_or_default();
    [
        trial.to_string(),
        link.to_string(),
        idx(m),
        idx(n),
        idx(k),
        format!("{:.17e}", h.re),
        format!("{:.17e}", h.im),
    ]
}

/// Draw all channels for one trial.
pub fn realize_channels(
    topology: &Topology,
    cfg: &SystemConfig,
    streams: &TrialStreams,
) -> Result<ChannelRealization> {
    let mu = cfg.path_loss_exponent;
    let kappa_db = cfg.rician_factor_db;
    let k = cfg.rx_antennas;
    let m_count = cfg.tx_antennas;

    let link_amp = |a: [f64; 2], b: [f64; 2], what: &str| -> Result<f64> {
        path_loss(distance(a, b), mu)
            .map(f64::sqrt)
            .map_err(|_| Error::Geometry(format!("{what} endpoints coincide")))
    };

    let direct_amp = link_amp(topology.ad_pos, topology.ap_pos, "AD-AP")?;
    let mut forward = vec![Vec::with_capacity(topology.bd_pos.len()); m_count];
    let mut backscatter = Vec::with_capacity(topology.bd_pos.len());
    for (n, &bd) in topology.bd_pos.iter().enumerate() {
        let f_amp = link_amp(topology.ad_pos, bd, "AD-BD")?;
        for (m, row) in forward.iter_mut().enumerate() {
            let mut rng = streams.rng(Purpose::Forward, pair_index(m, n));
            row.push(rician_vector(1, kappa_db, &mut rng)?[0] * f_amp);
        }
        let b_amp = link_amp(bd, topology.ap_pos, "BD-AP")?;
        let mut rng = streams.rng(Purpose::Backscatter, n as u64);
        backscatter.push(rician_vector(k, kappa_db, &mut rng)? * C64::from(b_amp));
    }
    let direct = (0..m_count)
        .map(|m| {
            let mut rng = streams.rng(Purpose::Direct, m as u64);
            Ok(rician_vector(k, kappa_db, &mut rng)? * C64::from(direct_amp))
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(ChannelRealization {
        forward,
        direct,
        backscatter,
    })
}

/// Topology plus channels for trial `trial`.
pub fn draw_trial(cfg: &SystemConfig, trial: u64) -> Result<(Topology, ChannelRealization)> {
    let streams = TrialStreams::new(cfg.seed, trial);
    let topo = Topology::draw(cfg, &streams);
    let ch = realize_channels(&topo, cfg, &streams)?;
    Ok((topo, ch))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn path_loss_values() {
        assert_eq!(path_loss(1.0, 2.2).unwrap(), 1.0);
        // 6^-2.2 evaluated directly.
        assert_relative_eq!(
            path_loss(6.0, 2.2).unwrap(),
            0.019_411_864_410_321_64,
            max_relative = 1e-12
        );
        assert!(path_loss(0.0, 2.2).is_err());
        assert!(path_loss(-1.0, 2.2).is_err());
    }

    #[test]
    fn rician_limits() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let los = rician_vector(4, f64::INFINITY, &mut rng).unwrap();
        assert!(los.iter().all(|&h| h == C64::new(1.0, 0.0)));
        assert!(rician_vector(0, 2.8, &mut rng).is_err());

        let draws = 100_000;
        let mut mean = C64::new(0.0, 0.0);
        for _ in 0..draws {
            mean += rician_vector(1, f64::NEG_INFINITY, &mut rng).unwrap()[0];
        }
        mean /= draws as f64;
        assert!(mean.norm() < 0.01, "{mean}");
    }

    #[test]
    fn rician_unit_power() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let draws = 100_000;
        let mut power = [0.0; 4];
        for _ in 0..draws {
            let h = rician_vector(4, 2.8, &mut rng).unwrap();
            for (p, x) in power.iter_mut().zip(h.iter()) {
                *p += x.norm_sqr();
            }
        }
        for p in power {
            assert!((p / draws as f64 - 1.0).abs() < 0.02, "{p}");
        }
    }

    #[test]
    fn direct_link_power_matches_path_loss() {
        let cfg = SystemConfig {
            tx_antennas: 1,
            bds: 1,
            ..SystemConfig::default()
        };
        let expected = 6f64.powf(-2.2);
        let mut acc = 0.0;
        let trials = 100_000u64;
        for t in 0..trials {
            let streams = TrialStreams::new(7, t);
            let mut rng = streams.rng(Purpose::Direct, 0);
            let h = rician_vector(1, cfg.rician_factor_db, &mut rng).unwrap()[0] * expected.sqrt();
            acc += h.norm_sqr();
        }
        assert!((acc / trials as f64 / expected - 1.0).abs() < 0.02);

        // Same check through the full realization path.
        let mut acc = 0.0;
        let trials = 20_000u64;
        let topo = Topology {
            ad_pos: [0.0, 0.0],
            ap_pos: [6.0, 0.0],
            bd_pos: vec![[3.0, 3.0]],
        };
        for t in 0..trials {
            let ch = realize_channels(&topo, &cfg, &TrialStreams::new(3, t)).unwrap();
            acc += ch.direct[0].iter().map(|x| x.norm_sqr()).sum::<f64>() / cfg.rx_antennas as f64;
        }
        assert!((acc / trials as f64 / expected - 1.0).abs() < 0.02);
    }

    #[test]
    fn coincident_nodes_rejected() {
        let cfg = SystemConfig::default();
        let topo = Topology {
            ad_pos: [0.0, 0.0],
            ap_pos: [6.0, 0.0],
            bd_pos: vec![[6.0, 0.0]],
        };
        let err = realize_channels(&topo, &cfg, &TrialStreams::new(1, 0)).unwrap_err();
        assert!(matches!(err, Error::Geometry(_)));
    }

    #[test]
    fn deterministic_and_nested() {
        let cfg = SystemConfig::default();
        let (t1, c1) = draw_trial(&cfg, 5).unwrap();
        let (t2, c2) = draw_trial(&cfg, 5).unwrap();
        assert_eq!(t1, t2);
        assert_eq!(c1, c2);
        let (_, other) = draw_trial(&cfg, 6).unwrap();
        assert_ne!(c1, other);

        let big = SystemConfig {
            rx_antennas: 8,
            bds: 6,
            ..cfg.clone()
        };
        let (tb, cb) = draw_trial(&big, 5).unwrap();
        assert_eq!(&tb.bd_pos[..4], &t1.bd_pos[..]);
        for m in 0..4 {
            assert_eq!(cb.direct[m].rows(0, 4), c1.direct[m].rows(0, 4));
            assert_eq!(&cb.forward[m][..4], &c1.forward[m][..]);
        }
        for n in 0..4 {
            assert_eq!(cb.backscatter[n].rows(0, 4), c1.backscatter[n].rows(0, 4));
        }
    }

    #[test]
    fn bds_inside_circle_and_fixed_mode() {
        let cfg = SystemConfig::default();
        for t in 0..200 {
            let topo = Topology::draw(&cfg, &TrialStreams::new(11, t));
            for p in &topo.bd_pos {
                assert!(distance(*p, cfg.bd_circle_center) <= cfg.bd_circle_radius + 1e-12);
            }
        }
        let fixed = SystemConfig {
            bd_placement: BdPlacement::Fixed,
            ..cfg
        };
        let a = Topology::draw(&fixed, &TrialStreams::new(11, 0));
        let b = Topology::draw(&fixed, &TrialStreams::new(11, 9));
        assert_eq!(a, b);
    }

    #[test]
    fn distance_scaling() {
        // Doubling every distance scales each channel power by 2^-mu.
        let cfg = SystemConfig::default();
        let streams = TrialStreams::new(4, 0);
        let topo = Topology::draw(&cfg, &streams);
        let scaled = Topology {
            ad_pos: [2.0 * topo.ad_pos[0], 2.0 * topo.ad_pos[1]],
            ap_pos: [2.0 * topo.ap_pos[0], 2.0 * topo.ap_pos[1]],
            bd_pos: topo
                .bd_pos
                .iter()
                .map(|p| [2.0 * p[0], 2.0 * p[1]])
                .collect(),
        };
        let a = realize_channels(&topo, &cfg, &streams).unwrap();
        let b = realize_channels(&scaled, &cfg, &streams).unwrap();
        let factor = 2f64.powf(-cfg.path_loss_exponent);
        for m in 0..cfg.tx_antennas {
            assert_relative_eq!(
                b.forward_gain(m, 0),
                factor * a.forward_gain(m, 0),
                max_relative = 1e-12
            );
            assert_relative_eq!(
                b.direct[m].norm_squared(),
                factor * a.direct[m].norm_squared(),
                max_relative = 1e-12
            );
        }
    }
}
