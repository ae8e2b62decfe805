//! Nonlinear (logistic) energy harvesting.
//!
//! The harvester output is a logistic curve shifted so that it is exactly
//! zero at the sensitivity threshold and approaches the saturation level as
//! the input grows:
//!
//! ```text
//! Φ(P) = [ P_sa / E · ( (1 + E) / (1 + exp(-a·P + b)) − 1 ) ]⁺,   E = exp(-a·P_se + b)
//! ```

use crate::error::{Error, Result};

/// Harvester constants of one BD, all in watts (and 1/W for `a`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EhParams {
    pub a: f64,
    pub b: f64,
    pub p_se: f64,
    pub p_sa: f64,
}

impl EhParams {
    /// Measured constants of a commercial rectifier: a = 274, b = 0.29,
    /// sensitivity 0.064 mW, saturation 4.927 mW.
    pub const fn reference() -> Self {
        Self {
            a: 274.0,
            b: 0.29,
            p_se: 6.4e-5,
            p_sa: 4.927e-3,
        }
    }

    /// `exp(-a·P_se + b)`
    fn offset(&self) -> f64 {
        (-self.a * self.p_se + self.b).exp()
    }

    /// Harvested DC power for RF input `p_eh`.
    pub fn transfer(&self, p_eh: f64) -> f64 {
        let e = self.offset();
        let logistic = (1.0 + e) / (1.0 + (-self.a * p_eh + self.b).exp());
        (self.p_sa / e * (logistic - 1.0)).max(0.0)
    }

    /// RF input needed to harvest `x` watts. Below the sensitivity the clamp
    /// makes the answer the sensitivity threshold itself.
    pub fn inverse(&self, x: f64) -> Result<f64> {
        if !(x >= 0.0) {
            return Err(Error::invalid(format!(
                "harvest target {x} W must be non-negative"
            )));
        }
        if x >= self.p_sa {
            return Err(Error::Saturation {
                requested: x,
                saturation: self.p_sa,
            });
        }
        let e = self.offset();
        let scale = e / self.p_sa;
        let ratio = (1.0 + e) / (scale * x + 1.0) - 1.0;
        Ok(((self.b - ratio.ln()) / self.a).max(0.0))
    }
}

impl Default for EhParams {
    fn default() -> Self {
        Self::reference()
    }
}

/// RF power left for harvesting after reflecting a fraction `alpha`.
pub fn harvested_input(alpha: f64, p: f64, h_f_gain: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&alpha) && p >= 0.0);
    (1.0 - alpha) * p * h_f_gain
}
