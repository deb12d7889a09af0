//! Scalar mismatch indicators: distribution distance, covariance deviation
//! from the identity, spatial degrees of freedom and ergodic capacity.

use num_complex::Complex64;
use rand::RngCore;
use serde::Serialize;

use crate::channel::{normalize_channel, ChannelSampler};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};

/// Condition numbers are reported as this value when the matrix is singular
/// to working precision.
pub const CONDITION_CEILING: f64 = 1e18;

pub const DEFAULT_DOF_THRESHOLD: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    pub name: String,
    pub value: f64,
    pub units: String,
    /// Hash of the configuration that produced the value.
    pub fingerprint: String,
    /// Set when `value` was clamped to a floor or ceiling.
    pub clamped: Option<String>,
}

/// KL divergence `D(N(mu1, var1) || N(mu2, var2))` in nats.
pub fn kl_gaussian(mu1: f64, var1: f64, mu2: f64, var2: f64) -> Result<f64> {
    if !(var1 > 0.0 && var2 > 0.0) {
        return Err(Error::invalid(format!("variances must be > 0, got {var1} and {var2}")));
    }
    let d = mu1 - mu2;
    let kl = 0.5 * (var2 / var1).ln() + (var1 + d * d) / (2.0 * var2) - 0.5;
    // rounding can leave a tiny negative value for equal inputs
    Ok(kl.max(0.0))
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Gaussian moment-matched KL divergence between two sample sets.
pub fn kl_from_samples(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() < 100 || q.len() < 100 {
        return Err(Error::invalid(format!(
            "need at least 100 samples per set, got {} and {}",
            p.len(),
            q.len()
        )));
    }
    if p.iter().chain(q).any(|v| !v.is_finite()) {
        return Err(Error::invalid("samples must be finite"));
    }
    let (m1, v1) = mean_var(p);
    let (m2, v2) = mean_var(q);
    if v1 < 1e-15 || v2 < 1e-15 {
        return Err(Error::invalid(format!("degenerate sample variance ({v1:.3e}, {v2:.3e})")));
    }
    kl_gaussian(m1, v1, m2, v2)
}

/// `(|N C / tr C - I|_F, lambda_max / lambda_min)`.
pub fn covariance_identity_deviation(c: &CMatrix) -> Result<(f64, f64)> {
    if !c.is_square() || c.nrows() == 0 {
        return Err(Error::invalid("covariance must be square and non-empty"));
    }
    let tr = c.trace().re;
    if !(tr.abs() > 0.0) {
        return Err(Error::invalid("covariance has zero trace"));
    }
    let n = c.nrows();
    let scaled = c * Complex64::from(n as f64 / tr);
    let dev = (&scaled - linalg::identity(n)).norm();
    let ev = linalg::hermitian_eigenvalues(c);
    let max = ev[ev.len() - 1];
    let min = ev[0];
    let cond = if min <= 1e-18 * max {
        CONDITION_CEILING
    } else {
        (max / min).min(CONDITION_CEILING)
    };
    Ok((dev, cond))
}

/// Number of singular values at or above `tau_rel` times the largest.
pub fn spatial_dof(h: &CMatrix, tau_rel: f64) -> Result<usize> {
    if !(tau_rel > 0.0 && tau_rel < 1.0) {
        return Err(Error::invalid(format!("threshold must lie in (0, 1), got {tau_rel}")));
    }
    let sv = linalg::singular_values(h);
    let Some(&top) = sv.first() else {
        return Ok(0);
    };
    if top == 0.0 {
        return Ok(0);
    }
    Ok(sv.iter().filter(|&&s| s >= tau_rel * top).count())
}

/// `log2 det(I + (rho / N_ue) H^H H)`.
pub fn capacity(h: &CMatrix, rho: f64) -> Result<f64> {
    let n_ue = h.ncols();
    let m = linalg::identity(n_ue) + h.adjoint() * h * Complex64::from(rho / n_ue as f64);
    let chol = m
        .cholesky()
        .ok_or_else(|| Error::numerical("capacity matrix is not positive definite"))?;
    let logdet: f64 = chol.l_dirty().diagonal().iter().map(|d| 2.0 * d.re.ln()).sum();
    Ok(logdet / std::f64::consts::LN_2)
}

/// Mean over draws of [`capacity`] with normalised channels, bits/s/Hz.
pub fn ergodic_capacity(sampler: &dyn ChannelSampler, rho: f64, n_mc: usize, rng: &mut dyn RngCore) -> Result<f64> {
    if !(rho > 0.0) || n_mc == 0 {
        return Err(Error::invalid("need rho > 0 and n_mc >= 1"));
    }
    let mut total = 0.0;
    for _ in 0..n_mc {
        let h = normalize_channel(sampler.sample(rng)?)?.h;
        total += capacity(&h, rho)?;
    }
    Ok(total / n_mc as f64)
}

/// Mean post-LMMSE stream SINR of one channel, dB.
///
/// With `M = I + (rho / N_ue) H^H H`, stream `u` sees `1 / [M^-1]_uu - 1`.
pub fn lmmse_sinr_db(h: &CMatrix, rho: f64) -> Result<f64> {
    let n_ue = h.ncols();
    let m = linalg::identity(n_ue) + h.adjoint() * h * Complex64::from(rho / n_ue as f64);
    let inv = linalg::solve_hpd(&m, &linalg::identity(n_ue))?;
    let mean = (0..n_ue).map(|u| 1.0 / inv[(u, u)].re - 1.0).sum::<f64>() / n_ue as f64;
    Ok(crate::geometry::linear_to_db(mean))
}

/// Per-draw [`lmmse_sinr_db`] samples with normalised channels.
pub fn sinr_samples_db(
    sampler: &dyn ChannelSampler,
    rho: f64,
    n: usize,
    rng: &mut dyn RngCore,
) -> Result<Vec<f64>> {
    (0..n)
        .map(|_| lmmse_sinr_db(&normalize_channel(sampler.sample(rng)?)?.h, rho))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{FfRayleighSampler, FixedChannel};
    use crate::rng::SimRng;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn kl_closed_forms() {
        assert_eq!(kl_gaussian(0.3, 2.0, 0.3, 2.0).unwrap(), 0.0);
        assert_relative_eq!(kl_gaussian(1.0, 1.0, 0.0, 1.0).unwrap(), 0.5, epsilon = 1e-15);
        assert_relative_eq!(kl_gaussian(0.0, 4.0, 0.0, 1.0).unwrap(), 0.5f64.ln() + 1.5, epsilon = 1e-15);
        assert!((kl_gaussian(0.0, 4.0, 0.0, 1.0).unwrap() - 0.80685).abs() < 1e-5);
        assert!(kl_gaussian(0.0, 0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn kl_samples() {
        let mut rng = SimRng::seed_from_u64(5);
        let n = Normal::new(0.0, 1.0).unwrap();
        let a: Vec<f64> = (0..100_000).map(|_| n.sample(&mut rng)).collect();
        let b: Vec<f64> = (0..100_000).map(|_| n.sample(&mut rng)).collect();
        let c: Vec<f64> = b.iter().map(|v| v + 1.0).collect();
        assert!(kl_from_samples(&a, &b).unwrap() < 0.01);
        assert!((kl_from_samples(&a, &c).unwrap() - 0.5).abs() < 0.05);
        assert!(kl_from_samples(&a[..50], &b).is_err());
        assert!(kl_from_samples(&[1.0; 200], &b).is_err());
    }

    #[test]
    fn identity_deviation_examples() {
        let (d, k) = covariance_identity_deviation(&linalg::identity(5)).unwrap();
        assert_eq!((d, k), (0.0, 1.0));
        let (d, k) = covariance_identity_deviation(&(linalg::identity(3) * Complex64::from(7.5))).unwrap();
        assert!(d < 1e-14);
        assert_relative_eq!(k, 1.0, epsilon = 1e-12);
        let c = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![Complex64::from(2.0), Complex64::from(0.0)]));
        let (d, k) = covariance_identity_deviation(&c).unwrap();
        assert_relative_eq!(d, 2f64.sqrt(), epsilon = 1e-15);
        assert_eq!(k, CONDITION_CEILING);
        assert!(covariance_identity_deviation(&CMatrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn dof_examples() {
        assert_eq!(spatial_dof(&linalg::identity(4), 0.01).unwrap(), 4);
        let u = CMatrix::from_fn(5, 1, |i, _| Complex64::new(i as f64, 1.0));
        let v = CMatrix::from_fn(1, 3, |_, j| Complex64::new(1.0, -(j as f64)));
        assert_eq!(spatial_dof(&(&u * &v), 0.01).unwrap(), 1);
        assert_eq!(spatial_dof(&CMatrix::zeros(3, 3), 0.01).unwrap(), 0);
        assert!(spatial_dof(&linalg::identity(2), 1.0).is_err());
    }

    #[test]
    fn capacity_examples() {
        let mut rng = SimRng::seed_from_u64(0);
        let one = FixedChannel(linalg::identity(1));
        assert_relative_eq!(ergodic_capacity(&one, 1.0, 1, &mut rng).unwrap(), 1.0, epsilon = 1e-14);
        assert_relative_eq!(ergodic_capacity(&one, 3.0, 1, &mut rng).unwrap(), 2.0, epsilon = 1e-14);
        let ray = FfRayleighSampler::new(2, 2).unwrap();
        assert!(ergodic_capacity(&ray, 1e-3, 200, &mut rng).unwrap() < 0.01);
    }

    #[test]
    fn siso_sinr_is_snr() {
        let h = linalg::identity(1);
        assert_relative_eq!(lmmse_sinr_db(&h, 10.0).unwrap(), 10.0, epsilon = 1e-12);
    }
}
