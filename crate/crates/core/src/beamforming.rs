//! Receive beam design at the AP.
//!
//! * [`mrc`] for the backscattered signal, which sees noise only.
//! * [`active_beam`] for the AD signal, which sees the BD as interference.
//!   The beamforming subproblem has a constant objective, so it is really a
//!   feasibility question: does some unit `v` meet the AD rate target? The
//!   SINR-maximising beam `v ∝ (c·h_b h_bᴴ + σ²I)⁻¹ h_d` answers it, because
//!   it dominates every other unit vector. Its outer product is rank one by
//!   construction.
//! * [`mmse_beam`] for the collision benchmark, where every BD interferes.
//! * [`certify_rank_one`] solves the semidefinite relaxation independently
//!   (projected gradient over unit-trace PSD matrices) and reports the
//!   eigenvalue ratio of its solution. It is verification tooling and is not
//!   on the solve path.

use nalgebra::SymmetricEigen;

use crate::error::{Error, Result};
pub use crate::linkmodel::BeamPair;
use crate::linkmodel::{beam_gain, rate};
use crate::{CMatrix, CVector, C64};

/// Outcome of an active-beam solve.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamSolveDiagnostics {
    /// `λ₂/λ₁` of `v·vᴴ`.
    pub rank_ratio: f64,
    /// Achieved AD rate minus `R_min`.
    pub c3_margin: f64,
    pub feasible: bool,
}

/// Slack on the AD rate margin, absorbing rounding at the boundary.
pub const C3_SLACK: f64 = 1e-9;

/// Maximum-ratio combining `h/‖h‖`.
pub fn mrc(h_b: &CVector) -> Result<CVector> {
    let norm = h_b.norm();
    if !(norm > 0.0) {
        return Err(Error::invalid("MRC needs a non-zero channel"));
    }
    Ok(h_b.unscale(norm))
}

fn hermitian_identity(dim: usize, diag: f64) -> CMatrix {
    CMatrix::from_diagonal_element(dim, dim, C64::from(diag))
}

/// `(Σ wᵢ hᵢhᵢᴴ + noise·I)⁻¹ target`, normalised.
fn whitened_beam(
    target: &CVector,
    interference: &[(&CVector, f64)],
    noise: f64,
) -> Result<CVector> {
    let dim = target.len();
    if !(target.norm() > 0.0) {
        return Err(Error::invalid("beam target channel is zero"));
    }
    let mut cov = hermitian_identity(dim, noise);
    for (h, w) in interference {
        cov.gerc(C64::from(*w), h, h, C64::from(1.0));
    }
    let chol = cov
        .cholesky()
        .ok_or_else(|| Error::invalid("interference-plus-noise matrix is not positive definite"))?;
    let x = chol.solve(target);
    let norm = x.norm();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::invalid("degenerate beam solve"));
    }
    Ok(x.unscale(norm))
}

/// Rotate so the first non-negligible entry is real and positive.
fn normalize_phase(mut v: CVector) -> CVector {
    if let Some(lead) = v.iter().find(|x| x.norm() > 1e-300).copied() {
        let rot = lead.conj() / lead.norm();
        v *= rot;
    }
    v
}

/// `λ₂/λ₁` of a Hermitian PSD matrix, `0` for a 1×1 matrix.
pub fn rank_ratio(m: &CMatrix) -> f64 {
    if m.nrows() < 2 {
        return 0.0;
    }
    let mut eig: Vec<f64> = SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .copied()
        .collect();
    eig.sort_by(|a, b| b.total_cmp(a));
    if eig[0] <= 0.0 {
        return 1.0;
    }
    (eig[1].abs() / eig[0]).min(1.0)
}

fn outer(v: &CVector) -> CMatrix {
    v * v.adjoint()
}

/// SINR-maximising AD beam when a BD with forward gain `h_f_gain` reflects
/// a fraction `alpha`, plus whether the AD rate target is met.
pub fn active_beam(
    h_d: &CVector,
    h_b: &CVector,
    h_f_gain: f64,
    alpha: f64,
    p: f64,
    sigma_w2: f64,
    r_min: f64,
) -> Result<(CVector, BeamSolveDiagnostics)> {
    active_beam_multi(h_d, &[(h_b, alpha * h_f_gain)], p, sigma_w2, r_min)
}

/// [`active_beam`] with several simultaneous backscatter interferers, each
/// given as `(h_b, α·|h_f|²)`.
pub fn active_beam_multi(
    h_d: &CVector,
    interferers: &[(&CVector, f64)],
    p: f64,
    sigma_w2: f64,
    r_min: f64,
) -> Result<(CVector, BeamSolveDiagnostics)> {
    if !(p > 0.0) {
        return Err(Error::invalid("transmit power must be positive"));
    }
    let weighted: Vec<(&CVector, f64)> = interferers.iter().map(|&(h, w)| (h, w * p)).collect();
    let v = normalize_phase(whitened_beam(h_d, &weighted, sigma_w2)?);
    let interference: f64 = weighted.iter().map(|(h, w)| w * beam_gain(&v, h)).sum();
    let sinr = beam_gain(&v, h_d) * p / (interference + sigma_w2);
    let c3_margin = rate(sinr)? - r_min;
    let diag = BeamSolveDiagnostics {
        rank_ratio: rank_ratio(&outer(&v)),
        c3_margin,
        feasible: c3_margin >= -C3_SLACK,
    };
    Ok((v, diag))
}

/// MMSE combiner `(h_t h_tᴴ + Σ hᵢhᵢᴴ + (σ²/p)I)⁻¹ h_t`, normalised. The
/// caller folds `sqrt(α)·h_f` into each channel.
pub fn mmse_beam(
    h_target: &CVector,
    h_interf: &[CVector],
    p: f64,
    sigma_w2: f64,
) -> Result<CVector> {
    if !(p > 0.0) {
        return Err(Error::invalid("transmit power must be positive"));
    }
    let mut terms: Vec<(&CVector, f64)> = Vec::with_capacity(h_interf.len() + 1);
    terms.push((h_target, 1.0));
    terms.extend(h_interf.iter().map(|h| (h, 1.0)));
    whitened_beam(h_target, &terms, sigma_w2 / p)
}

/// Solution of the relaxed beamforming SDP.
#[derive(Debug, Clone)]
pub struct PsdCertificate {
    /// Unit-trace PSD matrix maximising the AD rate margin.
    pub matrix: CMatrix,
    pub rank_ratio: f64,
    /// Beam recovered from the principal eigenpair.
    pub beam: CVector,
    /// `Tr(A·V) − (2^R_min − 1)σ²` at the solution; non-negative iff the
    /// relaxed problem is feasible.
    pub linear_margin: f64,
    /// AD rate of [`Self::beam`] minus `R_min`.
    pub c3_margin: f64,
    pub feasible: bool,
    pub iterations: usize,
}

/// Euclidean projection of a Hermitian matrix onto `{V ⪰ 0, Tr V = 1}`.
fn project_spectraplex(w: CMatrix) -> CMatrix {
    let eig = SymmetricEigen::new(w);
    let mut sorted: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let candidate = (cumsum - 1.0) / (j + 1) as f64;
        if u - candidate > 0.0 {
            theta = candidate;
        }
    }
    let lambdas = eig.eigenvalues.map(|l| C64::from((l - theta).max(0.0)));
    &eig.eigenvectors * CMatrix::from_diagonal(&lambdas) * eig.eigenvectors.adjoint()
}

/// Solve `max Tr(A·V) s.t. Tr V = 1, V ⪰ 0` with
/// `A = p·h_d h_dᴴ − γ·α|h_f|²p·h_b h_bᴴ` by projected gradient ascent with a
/// growing step, stopping once successive iterates move less than `tol` in
/// Frobenius norm.
#[allow(clippy::too_many_arguments)]
pub fn certify_rank_one(
    h_d: &CVector,
    h_b: &CVector,
    h_f_gain: f64,
    alpha: f64,
    p: f64,
    sigma_w2: f64,
    r_min: f64,
    tol: f64,
    max_iter: usize,
) -> Result<PsdCertificate> {
    let dim = h_d.len();
    let gamma = r_min.exp2() - 1.0;
    let a = outer(h_d) * C64::from(p) - outer(h_b) * C64::from(gamma * alpha * h_f_gain * p);
    let scale = a.norm();
    if !(scale > 0.0) {
        return Err(Error::invalid(
            "relaxed beamforming problem has a zero objective",
        ));
    }
    let mut v = hermitian_identity(dim, 1.0 / dim as f64);
    let mut step = 1.0 / scale;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let mut next = project_spectraplex(&v + &a * C64::from(step));
        next = (&next + next.adjoint()) * C64::from(0.5);
        let moved = (&next - &v).norm();
        v = next;
        if moved < tol {
            break;
        }
        step *= 2.0;
    }

    let eig = SymmetricEigen::new(v.clone());
    let top = eig.eigenvalues.imax();
    let beam = normalize_phase(eig.eigenvectors.column(top).into_owned());
    let linear_margin = (&a * &v).trace().re - gamma * sigma_w2;
    let sinr =
        beam_gain(&beam, h_d) * p / (alpha * h_f_gain * beam_gain(&beam, h_b) * p + sigma_w2);
    let c3_margin = rate(sinr)? - r_min;
    Ok(PsdCertificate {
        rank_ratio: rank_ratio(&v),
        matrix: v,
        beam,
        linear_margin,
        c3_margin,
        feasible: linear_margin >= 0.0,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::complex_gaussian;
    use crate::linkmodel::{real_vector, sinr_ad, snr_bd};
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_vec(rng: &mut ChaCha8Rng, k: usize) -> CVector {
        CVector::from_fn(k, |_, _| complex_gaussian(rng))
    }

    fn random_unit(rng: &mut ChaCha8Rng, k: usize) -> CVector {
        random_vec(rng, k).normalize()
    }

    #[test]
    fn mrc_cases() {
        assert_eq!(
            mrc(&real_vector(&[1.0, 0.0])).unwrap(),
            real_vector(&[1.0, 0.0])
        );
        let v = mrc(&real_vector(&[3.0, 4.0])).unwrap();
        assert_relative_eq!(v[0].re, 0.6);
        assert_relative_eq!(v[1].re, 0.8);
        assert!(mrc(&real_vector(&[0.0, 0.0])).is_err());
    }

    #[test]
    fn mrc_beats_random_beams() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h_b = random_vec(&mut rng, 4);
        let best = snr_bd(&mrc(&h_b).unwrap(), &h_b, 0.01, 0.8, 1.0, 1e-8);
        for _ in 0..1000 {
            let v = random_unit(&mut rng, 4);
            assert!(snr_bd(&v, &h_b, 0.01, 0.8, 1.0, 1e-8) <= best * (1.0 + 1e-12));
        }
    }

    #[test]
    fn active_beam_scalar_case() {
        let h_d = CVector::from_element(1, C64::new(0.1, -0.2));
        let h_b = CVector::from_element(1, C64::new(0.05, 0.3));
        let (v, diag) = active_beam(&h_d, &h_b, 0.04, 0.5, 1.0, 1e-8, 1.0).unwrap();
        assert_relative_eq!(v[0].re, 1.0, max_relative = 1e-14);
        assert!(v[0].im.abs() < 1e-15);
        assert_eq!(diag.rank_ratio, 0.0);
    }

    #[test]
    fn active_beam_without_interference_is_mrc() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h_d = random_vec(&mut rng, 3);
        let zero = CVector::zeros(3);
        let (v, _) = active_beam(&h_d, &zero, 0.04, 0.5, 1.0, 1e-8, 1.0).unwrap();
        let mrc_v = mrc(&h_d).unwrap();
        // Collinear: |vᴴ mrc| = 1.
        assert_relative_eq!(v.dotc(&mrc_v).norm(), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn active_beam_beats_random_beams() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let h_d = random_vec(&mut rng, 2) * C64::from(0.14);
        let h_b = random_vec(&mut rng, 2) * C64::from(0.2);
        let (v, diag) = active_beam(&h_d, &h_b, 0.04, 0.9, 1.0, 1e-8, 1.0).unwrap();
        assert!((v.norm() - 1.0).abs() < 1e-12);
        assert!(diag.rank_ratio <= 1e-12);
        assert!(diag.c3_margin >= 0.0 && diag.feasible);
        let best = sinr_ad(&v, &h_d, &h_b, 0.04, 0.9, 1.0, 1e-8);
        for _ in 0..10_000 {
            let u = random_unit(&mut rng, 2);
            assert!(sinr_ad(&u, &h_d, &h_b, 0.04, 0.9, 1.0, 1e-8) <= best * (1.0 + 1e-9));
        }
    }

    #[test]
    fn active_beam_reports_infeasibility() {
        let h = real_vector(&[1e-5]);
        let (_, diag) = active_beam(&h, &h, 0.1, 1.0, 1.0, 1e-8, 1.0).unwrap();
        assert!(!diag.feasible && diag.c3_margin < 0.0);
        assert!(active_beam(&CVector::zeros(2), &h, 0.1, 1.0, 1.0, 1e-8, 1.0).is_err());
    }

    #[test]
    fn mmse_collinear_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = random_vec(&mut rng, 4);
        let v = mmse_beam(&h, &[], 1.0, 1e-8).unwrap();
        assert_relative_eq!(v.dotc(&h.normalize()).norm(), 1.0, max_relative = 1e-12);

        let target = real_vector(&[1.0, 1.0, 0.0]);
        let orth = real_vector(&[1.0, -1.0, 0.5]);
        let v = mmse_beam(&target, &[orth], 1.0, 1e-2).unwrap();
        assert_relative_eq!(
            v.dotc(&target.normalize()).norm(),
            1.0,
            max_relative = 1e-12
        );
        assert!(mmse_beam(&CVector::zeros(2), &[], 1.0, 1e-8).is_err());
    }

    #[test]
    fn mmse_beats_random_beams() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let target = random_vec(&mut rng, 4) * C64::from(0.01);
        let interf = [
            random_vec(&mut rng, 4) * C64::from(0.01),
            random_vec(&mut rng, 4) * C64::from(0.01),
        ];
        let (p, s2) = (1.0, 1e-8);
        let sinr = |v: &CVector| {
            beam_gain(v, &target) * p
                / (interf.iter().map(|h| beam_gain(v, h) * p).sum::<f64>() + s2)
        };
        let v = mmse_beam(&target, &interf, p, s2).unwrap();
        let best = sinr(&v);
        for _ in 0..10_000 {
            assert!(sinr(&random_unit(&mut rng, 4)) <= best * (1.0 + 1e-9));
        }
    }

    #[test]
    fn phase_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let h_d = random_vec(&mut rng, 3) * C64::from(0.1);
        let h_b = random_vec(&mut rng, 3) * C64::from(0.2);
        let (v, _) = active_beam(&h_d, &h_b, 0.04, 0.7, 1.0, 1e-8, 1.0).unwrap();
        let s0 = sinr_ad(&v, &h_d, &h_b, 0.04, 0.7, 1.0, 1e-8);
        let rot = C64::from_polar(1.0, 1.234);
        let (h_d2, h_b2) = (&h_d * rot, &h_b * rot.conj());
        let (v2, _) = active_beam(&h_d2, &h_b2, 0.04, 0.7, 1.0, 1e-8, 1.0).unwrap();
        assert_relative_eq!(
            sinr_ad(&v2, &h_d2, &h_b2, 0.04, 0.7, 1.0, 1e-8),
            s0,
            max_relative = 1e-10
        );
    }

    #[test]
    fn certificate_is_rank_one_and_agrees_on_feasibility() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for k in [2usize, 4] {
            for _ in 0..20 {
                let h_d = random_vec(&mut rng, k) * C64::from(0.14);
                let h_b = random_vec(&mut rng, k) * C64::from(0.2);
                let cert =
                    certify_rank_one(&h_d, &h_b, 0.04, 0.9, 1.0, 1e-8, 1.0, 1e-3, 1000).unwrap();
                assert!(cert.rank_ratio < 1e-6, "{}", cert.rank_ratio);
                assert_relative_eq!(cert.matrix.trace().re, 1.0, max_relative = 1e-9);
                let (_, diag) = active_beam(&h_d, &h_b, 0.04, 0.9, 1.0, 1e-8, 1.0).unwrap();
                assert_eq!(cert.feasible, diag.feasible);
                assert!(cert.c3_margin <= diag.c3_margin + 1e-9);
            }
        }
    }

    #[test]
    fn spectraplex_projection() {
        let w = CMatrix::from_diagonal(&real_vector(&[3.0, 1.0, -2.0]));
        let v = project_spectraplex(w);
        assert_relative_eq!(v[(0, 0)].re, 1.0, max_relative = 1e-12);
        assert!(v[(1, 1)].norm() < 1e-12 && v[(2, 2)].norm() < 1e-12);
        let w = CMatrix::from_diagonal(&real_vector(&[0.2, 0.1]));
        let v = project_spectraplex(w);
        assert_relative_eq!(v[(0, 0)].re, 0.55, max_relative = 1e-12);
        assert_relative_eq!(v[(1, 1)].re, 0.45, max_relative = 1e-12);
    }
}
