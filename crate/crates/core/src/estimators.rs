//! LMMSE channel estimation under an assumed covariance, and LMMSE MIMO
//! detection with Monte Carlo symbol error rates.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use rand::{Rng, RngCore, SeedableRng};
use serde::Serialize;

use crate::channel::{complex_gaussian, normalize_channel, ChannelSampler, CovarianceModel};
use crate::error::{Error, Result};
use crate::geometry::{db_to_linear, linear_to_db};
use crate::linalg::{self, CMatrix};
use crate::rng::SimRng;

/// Floor of the channel-estimation mismatch metric, dB.
pub const CHEST_FLOOR_DB: f64 = -60.0;

/// Linear estimator `h_hat = W y` for the pilot model `y = h + n`.
#[derive(Debug, Clone)]
pub struct LmmseFilter {
    pub weights: CMatrix,
    pub assumed: CovarianceModel,
    pub sigma2: f64,
}

/// `W = C (C + sigma^2 I)^-1`, computed by a Cholesky solve.
pub fn lmmse_weights(assumed: &CovarianceModel, sigma2: f64) -> Result<LmmseFilter> {
    if !(sigma2 > 0.0) {
        return Err(Error::invalid(format!("noise variance must be > 0, got {sigma2}")));
    }
    let c = assumed.matrix();
    let n = c.nrows();
    let a = c + linalg::identity(n) * Complex64::from(sigma2);
    // (C + s I) W^H = C^H = C
    let wh = linalg::solve_hpd(&a, c)?;
    let weights = wh.adjoint();
    if weights.iter().any(|z| !z.is_finite()) {
        return Err(Error::numerical("LMMSE weights are not finite"));
    }
    Ok(LmmseFilter {
        weights,
        assumed: assumed.clone(),
        sigma2,
    })
}

/// `tr((I-W) C (I-W)^H) + sigma^2 tr(W W^H)`.
pub fn lmmse_mse(w: &CMatrix, c_true: &CMatrix, sigma2: f64) -> Result<f64> {
    let n = c_true.nrows();
    if w.nrows() != n || w.ncols() != n || !c_true.is_square() {
        return Err(Error::invalid("filter and covariance dimensions differ"));
    }
    let e = linalg::identity(n) - w;
    let bias = (&e * c_true * e.adjoint()).trace().re;
    let noise = sigma2 * w.iter().map(|z| z.norm_sqr()).sum::<f64>();
    Ok(bias + noise)
}

/// `10 log10((MSE(W_I) - MSE(W_C)) / MSE(W_C))`, floored at [`CHEST_FLOOR_DB`].
pub fn chest_mismatch_metric(c_true: &CovarianceModel, sigma2: f64) -> Result<f64> {
    let n = c_true.dim();
    let matched = lmmse_weights(c_true, sigma2)?;
    let identity = lmmse_weights(&CovarianceModel::identity(n), sigma2)?;
    let mse_c = lmmse_mse(&matched.weights, c_true.matrix(), sigma2)?;
    let mse_i = lmmse_mse(&identity.weights, c_true.matrix(), sigma2)?;
    if !(mse_c > 0.0) {
        return Err(Error::numerical(format!("matched MSE is {mse_c}")));
    }
    Ok(floor_db((mse_i - mse_c) / mse_c, CHEST_FLOOR_DB))
}

fn floor_db(ratio: f64, floor_db: f64) -> f64 {
    let floor = db_to_linear(floor_db);
    if ratio.is_nan() {
        return f64::NAN;
    }
    linear_to_db(ratio.max(floor))
}

/// Draws `h ~ CN(0, C)` through the eigen-square-root of `C` (works for
/// singular `C`).
#[derive(Debug, Clone)]
pub struct GaussianVectorSampler {
    root: CMatrix,
}

impl GaussianVectorSampler {
    pub fn new(c: &CMatrix) -> Result<Self> {
        if linalg::hermitian_defect(c) > 1e-10 {
            return Err(Error::invalid("covariance is not Hermitian"));
        }
        let eig = nalgebra::SymmetricEigen::new(c.clone());
        let mut root = eig.eigenvectors.clone();
        for (j, &lam) in eig.eigenvalues.iter().enumerate() {
            let s = Complex64::from(lam.max(0.0).sqrt());
            for i in 0..root.nrows() {
                root[(i, j)] *= s;
            }
        }
        Ok(Self { root })
    }

    pub fn sample(&self, rng: &mut dyn RngCore) -> CMatrix {
        let n = self.root.ncols();
        let z = CMatrix::from_fn(n, 1, |_, _| complex_gaussian(rng, 1.0));
        &self.root * z
    }
}

/// Sample MSE of `h_hat = W (h + n)` over `n_draws` draws.
pub fn empirical_estimation_mse(
    w: &CMatrix,
    c_true: &CMatrix,
    sigma2: f64,
    n_draws: usize,
    rng: &mut dyn RngCore,
) -> Result<f64> {
    if n_draws == 0 {
        return Err(Error::invalid("need at least one draw"));
    }
    let sampler = GaussianVectorSampler::new(c_true)?;
    let n = c_true.nrows();
    let mut total = 0.0;
    for _ in 0..n_draws {
        let h = sampler.sample(rng);
        let y = CMatrix::from_fn(n, 1, |i, _| h[(i, 0)] + complex_gaussian(rng, sigma2));
        let e = w * y - h;
        total += e.iter().map(|z| z.norm_sqr()).sum::<f64>();
    }
    Ok(total / n_draws as f64)
}

/// Gray-mapped unit-energy QPSK: index bits `(b1 b0)` map to
/// `((1 - 2 b0) + j (1 - 2 b1)) / sqrt 2`.
pub fn qpsk_symbol(index: u8) -> Complex64 {
    let re = if index & 1 == 0 { 1.0 } else { -1.0 };
    let im = if index & 2 == 0 { 1.0 } else { -1.0 };
    Complex64::new(re * FRAC_1_SQRT_2, im * FRAC_1_SQRT_2)
}

/// Nearest constellation point index.
pub fn qpsk_decide(z: Complex64) -> u8 {
    u8::from(z.re < 0.0) | (u8::from(z.im < 0.0) << 1)
}

/// Detector matrix `G = (H^H H + (N_ue/rho) I)^-1 H^H` so that `x_soft = G y`.
pub fn lmmse_detector(h: &CMatrix, rho: f64) -> Result<CMatrix> {
    if !(rho > 0.0) {
        return Err(Error::invalid(format!("SNR must be > 0, got {rho}")));
    }
    let n_ue = h.ncols();
    if n_ue == 0 {
        return Err(Error::invalid("channel has no columns"));
    }
    let hh = h.adjoint();
    let gram = &hh * h + linalg::identity(n_ue) * Complex64::from(n_ue as f64 / rho);
    linalg::solve_hpd(&gram, &hh)
}

/// Soft LMMSE estimate and hard QPSK decisions for one received vector.
pub fn lmmse_detect(h: &CMatrix, y: &[Complex64], rho: f64) -> Result<(Vec<Complex64>, Vec<u8>)> {
    if y.len() != h.nrows() {
        return Err(Error::invalid("received vector length differs from channel rows"));
    }
    let g = lmmse_detector(h, rho)?;
    let soft: Vec<Complex64> = (0..g.nrows())
        .map(|u| (0..g.ncols()).map(|n| g[(u, n)] * y[n]).sum())
        .collect();
    let hard = soft.iter().map(|&z| qpsk_decide(z)).collect();
    Ok((soft, hard))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SerCurvePoint {
    pub snr_db: f64,
    pub ser: f64,
    pub n_symbols: u64,
    pub std_error: f64,
}

/// Monte Carlo control for [`simulate_ser`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SerOptions {
    /// Symbol vectors transmitted per channel draw.
    pub vectors_per_draw: usize,
}

impl Default for SerOptions {
    fn default() -> Self {
        Self { vectors_per_draw: 8 }
    }
}

/// Monte Carlo SER of LMMSE detection over the sampler's channels.
///
/// Each stream carries unit-energy QPSK, `y = H x / sqrt(N_ue) + n` with
/// `n ~ CN(0, 1/rho)` and `H` normalised, so that `rho` is the received SNR
/// per BS antenna. At least `n_symbols` stream symbols are sent.
pub fn simulate_ser(
    sampler: &dyn ChannelSampler,
    rho: f64,
    n_symbols: u64,
    rng: &mut dyn RngCore,
    opts: &SerOptions,
) -> Result<SerCurvePoint> {
    if n_symbols == 0 {
        return Err(Error::invalid("n_symbols must be >= 1"));
    }
    if !(rho > 0.0) {
        return Err(Error::invalid(format!("SNR must be > 0, got {rho}")));
    }
    let n_bs = sampler.n_bs();
    let n_ue = sampler.n_ue();
    let per_draw = opts.vectors_per_draw.max(1);
    let amp = 1.0 / (n_ue as f64).sqrt();
    let noise_var = 1.0 / rho;
    let mut y = vec![Complex64::new(0.0, 0.0); n_bs];
    let mut tx = vec![0u8; n_ue];
    let mut sent = 0u64;
    let mut errors = 0u64;
    while sent < n_symbols {
        let draw = normalize_channel(sampler.sample(rng)?)?;
        let h = draw.h;
        let g = lmmse_detector(&h, rho)?;
        for _ in 0..per_draw {
            for t in tx.iter_mut() {
                *t = (rng.next_u32() & 3) as u8;
            }
            for (n, yn) in y.iter_mut().enumerate() {
                let mut acc = complex_gaussian(rng, noise_var);
                for (u, &t) in tx.iter().enumerate() {
                    acc += h[(n, u)] * qpsk_symbol(t) * amp;
                }
                *yn = acc;
            }
            for (u, &t) in tx.iter().enumerate() {
                let mut soft = Complex64::new(0.0, 0.0);
                for (n, yn) in y.iter().enumerate() {
                    soft += g[(u, n)] * yn;
                }
                if qpsk_decide(soft) != t {
                    errors += 1;
                }
            }
            sent += n_ue as u64;
        }
    }
    let ser = errors as f64 / sent as f64;
    Ok(SerCurvePoint {
        snr_db: linear_to_db(rho),
        ser,
        n_symbols: sent,
        std_error: (ser * (1.0 - ser) / sent as f64).sqrt(),
    })
}

/// Closed-form SER of Gray QPSK on SISO AWGN, `2Q(sqrt rho) - Q(sqrt rho)^2`.
pub fn qpsk_awgn_ser(rho: f64) -> f64 {
    let q = gaussian_q(rho.sqrt());
    2.0 * q - q * q
}

pub fn gaussian_q(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(x / std::f64::consts::SQRT_2)
}

/// Controls for [`snr_for_target_ser`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnrSearchOptions {
    pub tol_db: f64,
    pub start_db: f64,
    pub min_db: f64,
    pub max_db: f64,
    /// Two-sided normal quantile of the per-probe confidence interval.
    pub z: f64,
    pub ser: SerOptions,
}

impl Default for SnrSearchOptions {
    fn default() -> Self {
        Self {
            tol_db: 0.25,
            start_db: 10.0,
            min_db: -20.0,
            max_db: 60.0,
            z: 1.96,
            ser: SerOptions::default(),
        }
    }
}

impl SnrSearchOptions {
    /// Symbols per probe. The SER falls at least as fast as `1/rho`, so a
    /// `tol_db` SNR step moves it by a relative `1 - 10^(-tol_db/10)` or more;
    /// the probe is sized so the confidence interval at the target is that narrow.
    pub fn symbols_per_probe(&self, target_ser: f64) -> u64 {
        let rel = 1.0 - 10f64.powf(-self.tol_db / 10.0);
        let n = self.z * self.z * (1.0 - target_ser) / (target_ser * rel * rel);
        n.max(100.0 / target_ser).ceil() as u64
    }
}

/// Outcome of [`snr_for_target_ser`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SnrSearchResult {
    pub snr_db: f64,
    pub lower_db: f64,
    pub upper_db: f64,
    pub probes: Vec<SerCurvePoint>,
}

/// SNR at which the Monte Carlo SER crosses `target_ser`.
///
/// Every probe replays the same random stream (common random numbers), so
/// the estimated curve is smooth in `rho` and bisection is well behaved.
pub fn snr_for_target_ser(
    sampler: &dyn ChannelSampler,
    target_ser: f64,
    rng: &mut dyn RngCore,
    opts: &SnrSearchOptions,
) -> Result<SnrSearchResult> {
    if !(target_ser > 0.0 && target_ser < 0.5) {
        return Err(Error::invalid(format!("target SER must lie in (0, 0.5), got {target_ser}")));
    }
    if !(opts.tol_db > 0.0) || !(opts.min_db < opts.max_db) {
        return Err(Error::invalid("tol_db must be > 0 and min_db < max_db"));
    }
    let probe_seed = rng.next_u64();
    let n = opts.symbols_per_probe(target_ser);
    let mut probes = Vec::new();
    let mut probe = |db: f64| -> Result<bool> {
        let mut r = SimRng::seed_from_u64(probe_seed);
        let p = simulate_ser(sampler, db_to_linear(db), n, &mut r, &opts.ser)?;
        probes.push(p);
        Ok(p.ser <= target_ser)
    };

    let start = opts.start_db.clamp(opts.min_db, opts.max_db);
    let (mut lo, mut hi);
    let mut step = 1.0;
    if probe(start)? {
        hi = start;
        loop {
            if hi <= opts.min_db {
                return Err(Error::NoSolution(format!(
                    "SER stays below {target_ser} down to {} dB",
                    opts.min_db
                )));
            }
            let next = (hi - step).max(opts.min_db);
            if probe(next)? {
                hi = next;
                step *= 2.0;
            } else {
                lo = next;
                break;
            }
        }
    } else {
        lo = start;
        loop {
            if lo >= opts.max_db {
                return Err(Error::NoSolution(format!(
                    "SER stays above {target_ser} up to {} dB",
                    opts.max_db
                )));
            }
            let next = (lo + step).min(opts.max_db);
            if probe(next)? {
                hi = next;
                break;
            }
            lo = next;
            step *= 2.0;
        }
    }
    while hi - lo > opts.tol_db {
        let mid = 0.5 * (lo + hi);
        if probe(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(SnrSearchResult {
        snr_db: 0.5 * (lo + hi),
        lower_db: lo,
        upper_db: hi,
        probes,
    })
}

/// Required-SNR difference NF minus FF at `target_ser`, dB.
pub fn snr_mismatch(
    nf: &dyn ChannelSampler,
    ff: &dyn ChannelSampler,
    target_ser: f64,
    rng: &mut dyn RngCore,
    opts: &SnrSearchOptions,
) -> Result<f64> {
    let mut nf_rng = SimRng::seed_from_u64(rng.gen());
    let mut ff_rng = SimRng::seed_from_u64(rng.gen());
    let a = snr_for_target_ser(nf, target_ser, &mut nf_rng, opts)?;
    let b = snr_for_target_ser(ff, target_ser, &mut ff_rng, opts)?;
    Ok(a.snr_db - b.snr_db)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::FixedChannel;
    use approx::assert_relative_eq;

    fn scalar(c: f64) -> CovarianceModel {
        CovarianceModel::new(CMatrix::from_element(1, 1, Complex64::from(c)), false).unwrap()
    }

    #[test]
    fn weights_examples() {
        let w = lmmse_weights(&CovarianceModel::identity(3), 1.0).unwrap();
        assert!((w.weights - linalg::identity(3) * Complex64::from(0.5)).norm() < 1e-14);
        let w = lmmse_weights(&CovarianceModel::identity(4), 1e-12).unwrap();
        assert!((w.weights - linalg::identity(4)).norm() < 1e-6);
        assert_relative_eq!(lmmse_weights(&scalar(1.0), 1.0).unwrap().weights[(0, 0)].re, 0.5);
        assert!(lmmse_weights(&scalar(1.0), 0.0).is_err());
    }

    #[test]
    fn scalar_mse_examples() {
        let half = CMatrix::from_element(1, 1, Complex64::from(0.5));
        let one = CMatrix::from_element(1, 1, Complex64::from(1.0));
        let two = CMatrix::from_element(1, 1, Complex64::from(2.0));
        assert_relative_eq!(lmmse_mse(&half, &one, 1.0).unwrap(), 0.5, epsilon = 1e-15);
        assert_relative_eq!(lmmse_mse(&half, &two, 1.0).unwrap(), 0.75, epsilon = 1e-15);
        let matched = lmmse_weights(&scalar(2.0), 1.0).unwrap();
        assert_relative_eq!(matched.weights[(0, 0)].re, 2.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(lmmse_mse(&matched.weights, &two, 1.0).unwrap(), 2.0 / 3.0, epsilon = 1e-15);
        assert_eq!(lmmse_mse(&one, &two, 0.0).unwrap(), 0.0);
        // 2/3 minimises the scalar MSE over a dense grid
        let best = (0..=10_000)
            .map(|i| i as f64 / 10_000.0)
            .min_by(|a, b| {
                let f = |w: f64| (1.0 - w).powi(2) * 2.0 + w * w;
                f(*a).total_cmp(&f(*b))
            })
            .unwrap();
        assert!((best - 2.0 / 3.0).abs() < 1e-4);
    }

    #[test]
    fn chest_metric_examples() {
        assert_eq!(chest_mismatch_metric(&CovarianceModel::identity(8), 0.3).unwrap(), -60.0);
        let m = chest_mismatch_metric(&scalar(2.0), 1.0).unwrap();
        assert_relative_eq!(m, 10.0 * (0.75f64 / (2.0 / 3.0) - 1.0).log10(), epsilon = 1e-12);
        assert!((m + 9.03).abs() < 0.01);
    }

    #[test]
    fn qpsk_gray_map() {
        for i in 0..4u8 {
            let s = qpsk_symbol(i);
            assert_relative_eq!(s.norm(), 1.0, epsilon = 1e-15);
            assert_eq!(qpsk_decide(s), i);
        }
        // neighbours differ in one bit
        assert_eq!((qpsk_decide(Complex64::new(1.0, 1.0)) ^ qpsk_decide(Complex64::new(-1.0, 1.0))).count_ones(), 1);
    }

    #[test]
    fn noiseless_identity_detection() {
        let h = linalg::identity(1);
        for i in 0..4u8 {
            let (_, hard) = lmmse_detect(&h, &[qpsk_symbol(i)], 1e6).unwrap();
            assert_eq!(hard, vec![i]);
        }
    }

    #[test]
    fn high_snr_is_error_free() {
        let s = FixedChannel(linalg::identity(1));
        let mut rng = SimRng::seed_from_u64(1);
        let p = simulate_ser(&s, db_to_linear(60.0), 100_000, &mut rng, &SerOptions::default()).unwrap();
        assert_eq!(p.ser, 0.0);
        assert!(p.n_symbols >= 100_000);
    }

    #[test]
    fn closed_form_targets() {
        assert!((qpsk_awgn_ser(db_to_linear(10.34512)) - 1e-3).abs() < 1e-8);
        assert!((qpsk_awgn_ser(db_to_linear(-5.27283)) - 0.5).abs() < 1e-6);
    }
}
