//! Channel-access probabilities.
//!
//! Maximise `min_n Pr(n)·r_n` over `q ∈ (0,1)^N` where
//! `Pr(n) = q_n Π_{j≠n}(1 − q_j)`. In the log domain each constraint
//! `ln q_n + Σ_{j≠n} ln(1 − q_j) + ln r_n ≥ τ` is concave in `q`, so the
//! epigraph problem `max τ` is convex. It is solved with a log-barrier
//! interior-point method: damped Newton steps on
//!
//! ```text
//! s·τ + Σ_n ln(g_n(q) − τ) + Σ_n ln(q_n − ε) + Σ_n ln(1 − ε − q_n)
//! ```
//!
//! for an increasing barrier weight `s`, until the duality-gap bound
//! `3N / s` drops below the requested tolerance.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linkmodel::success_prob;

/// Distance kept from the open interval's end points.
pub const CAP_EPS: f64 = 1e-6;

/// Tightest duality gap the solver is asked for by the BCD loop.
pub const CAP_GAP_TOL: f64 = 1e-12;

const CENTERING_STEPS: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct CapSolution {
    pub q: Vec<f64>,
    /// `min_n Pr(n)·r_n` at `q`.
    pub t_hat: f64,
    /// Whether BD `n`'s throughput equals the minimum (within 1e-6 relative).
    pub active: Vec<bool>,
    /// Newton steps (solver) or grid levels (oracle).
    pub iterations: usize,
    /// Bound on `ln(optimum) − ln(t_hat)` certified by the barrier method.
    pub gap_bound: f64,
}

impl CapSolution {
    fn from_q(q: Vec<f64>, rbar: &[f64], iterations: usize, gap_bound: f64) -> Self {
        let throughput: Vec<f64> = (0..q.len())
            .map(|n| success_prob(&q, n).expect("index in range") * rbar[n])
            .collect();
        let t_hat = throughput.iter().copied().fold(f64::INFINITY, f64::min);
        let active = throughput
            .iter()
            .map(|&x| (x - t_hat) <= 1e-6 * t_hat)
            .collect();
        Self {
            q,
            t_hat,
            active,
            iterations,
            gap_bound,
        }
    }
}

fn check_rates(rbar: &[f64]) -> Result<()> {
    if rbar.is_empty() {
        return Err(Error::invalid("need at least one BD"));
    }
    if let Some(r) = rbar.iter().find(|&&r| !(r > 0.0 && r.is_finite())) {
        return Err(Error::invalid(format!(
            "access-probability solve needs positive rates, got {r}"
        )));
    }
    Ok(())
}

/// Evaluates the barrier objective and its derivatives.
struct Barrier<'a> {
    log_r: &'a [f64],
    weight: f64,
}

impl Barrier<'_> {
    fn n(&self) -> usize {
        self.log_r.len()
    }

    /// `g_n(q) = ln q_n + Σ_{j≠n} ln(1−q_j) + ln r_n`
    fn constraints(&self, q: &[f64]) -> Vec<f64> {
        let sum_ln1m: f64 = q.iter().map(|&x| (-x).ln_1p()).sum();
        (0..self.n())
            .map(|n| q[n].ln() + sum_ln1m - (-q[n]).ln_1p() + self.log_r[n])
            .collect()
    }

    fn interior(&self, x: &[f64]) -> bool {
        let (q, tau) = x.split_at(self.n());
        q.iter().all(|&v| v > CAP_EPS && v < 1.0 - CAP_EPS)
            && self.constraints(q).iter().all(|&g| g - tau[0] > 0.0)
    }

    /// `f(y) − f(x)`, summed term by term so that the large linear term
    /// does not swamp the barrier terms.
    fn gain(&self, x: &[f64], y: &[f64]) -> f64 {
        let n = self.n();
        let (qx, tx) = (&x[..n], x[n]);
        let (qy, ty) = (&y[..n], y[n]);
        let mut d = self.weight * (ty - tx);
        for (gx, gy) in self.constraints(qx).into_iter().zip(self.constraints(qy)) {
            d += ((gy - ty) / (gx - tx)).ln();
        }
        for (a, b) in qx.iter().zip(qy) {
            d += ((b - CAP_EPS) / (a - CAP_EPS)).ln()
                + ((1.0 - CAP_EPS - b) / (1.0 - CAP_EPS - a)).ln();
        }
        d
    }

    fn gradient_hessian(&self, x: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
        let n = self.n();
        let (q, tau) = x.split_at(n);
        let tau = tau[0];
        let g = self.constraints(q);
        let mut grad = DVector::zeros(n + 1);
        let mut hess = DMatrix::zeros(n + 1, n + 1);
        grad[n] = self.weight;
        let mut dg = DVector::zeros(n + 1);
        for (i, &gi) in g.iter().enumerate() {
            let slack = gi - tau;
            for k in 0..n {
                dg[k] = if k == i {
                    1.0 / q[k]
                } else {
                    -1.0 / (1.0 - q[k])
                };
            }
            dg[n] = -1.0;
            grad.axpy(1.0 / slack, &dg, 1.0);
            for k in 0..n {
                let curv = if k == i {
                    -1.0 / (q[k] * q[k])
                } else {
                    -1.0 / ((1.0 - q[k]) * (1.0 - q[k]))
                };
                hess[(k, k)] += curv / slack;
            }
            hess.ger(-1.0 / (slack * slack), &dg, &dg, 1.0);
        }
        for k in 0..n {
            let lo = q[k] - CAP_EPS;
            let hi = 1.0 - CAP_EPS - q[k];
            grad[k] += 1.0 / lo - 1.0 / hi;
            hess[(k, k)] -= 1.0 / (lo * lo) + 1.0 / (hi * hi);
        }
        (grad, hess)
    }
}

/// Maximise `min_n Pr(n)·r_n`. `tol` bounds the log-domain optimality gap;
/// `max_iter` caps the total number of Newton steps.
pub fn solve_cap(rbar: &[f64], tol: f64, max_iter: usize) -> Result<CapSolution> {
    check_rates(rbar)?;
    let n = rbar.len();
    let log_r: Vec<f64> = rbar.iter().map(|r| r.ln()).collect();
    let barrier_terms = (3 * n) as f64;
    let tol = tol.max(1e-15);

    let mut x: Vec<f64> = vec![1.0 / (n as f64 + 1.0); n];
    let mut barrier = Barrier {
        log_r: &log_r,
        weight: 1.0,
    };
    let g0 = barrier.constraints(&x);
    x.push(g0.iter().copied().fold(f64::INFINITY, f64::min) - 1.0);

    let mut iterations = 0;
    loop {
        // Centering. Near the optimum the Newton decrement is limited by
        // rounding, so a stage also ends when a step stops making progress.
        for _ in 0..CENTERING_STEPS {
            if iterations >= max_iter {
                let q = x[..n].to_vec();
                let best = CapSolution::from_q(q, rbar, iterations, barrier_terms / barrier.weight);
                return Err(Error::CapNotConverged(Box::new(best)));
            }
            iterations += 1;
            let (grad, hess) = barrier.gradient_hessian(&x);
            // Indefinite only through rounding; a gradient step is safe then.
            let step = (-hess)
                .cholesky()
                .map_or_else(|| grad.clone(), |chol| chol.solve(&grad));
            let decrement = grad.dot(&step);
            if decrement / 2.0 <= 1e-10 {
                break;
            }
            let mut t = 1.0;
            let mut accepted = None;
            for _ in 0..60 {
                let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, d)| a + t * d).collect();
                if barrier.interior(&trial) && barrier.gain(&x, &trial) >= 0.25 * t * decrement {
                    accepted = Some(trial);
                    break;
                }
                t *= 0.5;
            }
            match accepted {
                Some(next) => {
                    let moved = next
                        .iter()
                        .zip(&x)
                        .map(|(a, b)| (a - b).abs())
                        .fold(0.0, f64::max);
                    x = next;
                    if moved <= 1e-15 {
                        break;
                    }
                }
                None => break,
            }
        }
        if barrier_terms / barrier.weight <= tol {
            break;
        }
        barrier.weight *= 10.0;
    }

    let q: Vec<f64> = x[..n]
        .iter()
        .map(|v| v.clamp(CAP_EPS, 1.0 - CAP_EPS))
        .collect();
    Ok(CapSolution::from_q(
        q,
        rbar,
        iterations,
        barrier_terms / barrier.weight,
    ))
}

/// Exhaustive grid search over `[ε, 1−ε]^N` at spacing `step`, followed by
/// repeated ten-times finer grids centred on the incumbent. Only for `N ≤ 3`.
pub fn cap_oracle_grid(rbar: &[f64], step: f64) -> Result<CapSolution> {
    check_rates(rbar)?;
    let n = rbar.len();
    if n > 3 {
        return Err(Error::invalid(format!(
            "grid oracle supports N ≤ 3, got {n}"
        )));
    }
    if !(step > 0.0 && step < 0.5) {
        return Err(Error::invalid("grid step must lie in (0, 0.5)"));
    }
    let objective = |q: &[f64]| -> f64 {
        (0..n)
            .map(|i| success_prob(q, i).expect("index in range") * rbar[i])
            .fold(f64::INFINITY, f64::min)
    };
    let axis = |lo: f64, hi: f64, h: f64| -> Vec<f64> {
        let lo = lo.max(CAP_EPS);
        let hi = hi.min(1.0 - CAP_EPS);
        let count = ((hi - lo) / h).floor() as usize;
        let mut pts: Vec<f64> = (0..=count).map(|i| lo + i as f64 * h).collect();
        if pts.last().is_some_and(|&p| p < hi) {
            pts.push(hi);
        }
        pts
    };

    let mut centre = vec![0.5; n];
    let mut half_width = 0.5;
    let mut h = step;
    let mut best_q = centre.clone();
    let mut best = f64::NEG_INFINITY;
    let mut levels = 0;
    while h > 1e-10 {
        levels += 1;
        let axes: Vec<Vec<f64>> = centre
            .iter()
            .map(|&c| axis(c - half_width, c + half_width, h))
            .collect();
        let mut idx = vec![0usize; n];
        let mut q = vec![0.0; n];
        'outer: loop {
            for d in 0..n {
                q[d] = axes[d][idx[d]];
            }
            let v = objective(&q);
            if v > best {
                best = v;
                best_q.clone_from(&q);
            }
            for d in 0..n {
                idx[d] += 1;
                if idx[d] < axes[d].len() {
                    continue 'outer;
                }
                idx[d] = 0;
            }
            break;
        }
        centre.clone_from(&best_q);
        half_width = 3.0 * h;
        h /= 10.0;
    }
    Ok(CapSolution::from_q(best_q, rbar, levels, 0.0))
}
