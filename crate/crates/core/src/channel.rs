//! Stochastic MIMO channels and channel covariances.
//!
//! The near-field channel mixes deterministic spherical LoS components with
//! diffuse NLoS components, switched per BS antenna by a spatially
//! correlated Bernoulli field (partial blockage of a large aperture). The
//! marginal LoS probability of each antenna follows the 3GPP TR 38.901
//! urban-micro street-canyon model; correlation comes from a Gaussian copula
//! with exponential kernel `exp(-|q_n - q_m| / d_corr)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::geometry::{ArrayGeometry, OfdmGrid, Point};
use crate::linalg::{self, CMatrix, RMatrix};
use crate::wavefront::{nf_response, NearFieldModel, NfParams};

/// Breakpoint of the UMi street-canyon LoS probability, m.
const UMI_D1_M: f64 = 18.0;
/// Decay length of the UMi street-canyon LoS probability, m.
const UMI_D2_M: f64 = 36.0;

/// Default blockage correlation distance, m.
pub const DEFAULT_BLOCKAGE_CORRELATION_M: f64 = 10.0;

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

/// 3GPP TR 38.901 UMi street-canyon LoS probability.
pub fn los_probability_umi(d2d_m: f64) -> Result<f64> {
    if !(d2d_m >= 0.0) {
        return Err(Error::invalid(format!("2D distance must be >= 0, got {d2d_m}")));
    }
    if d2d_m <= UMI_D1_M {
        return Ok(1.0);
    }
    let e = (-d2d_m / UMI_D2_M).exp();
    Ok(UMI_D1_M / d2d_m * (1.0 - e) + e)
}

/// Per-BS-antenna LoS indicators of one draw.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockageField {
    pub los: Vec<bool>,
    pub probabilities: Vec<f64>,
    pub correlation_distance_m: f64,
}

impl BlockageField {
    pub fn los_fraction(&self) -> f64 {
        self.los.iter().filter(|&&b| b).count() as f64 / self.los.len() as f64
    }
}

/// Precomputed copula for repeated blockage sampling at a fixed UE position.
#[derive(Debug, Clone)]
pub struct BlockageModel {
    probabilities: Vec<f64>,
    thresholds: Vec<f64>,
    chol: RMatrix,
    correlation_distance_m: f64,
}

impl BlockageModel {
    pub fn new(geom: &ArrayGeometry, ue_position: &Point, correlation_distance_m: f64) -> Result<Self> {
        if !(correlation_distance_m.is_finite() && correlation_distance_m > 0.0) {
            return Err(Error::invalid(format!(
                "blockage correlation distance must be > 0, got {correlation_distance_m}"
            )));
        }
        let probabilities = geom
            .elements()
            .iter()
            .map(|q| los_probability_umi(nalgebra::distance(q, ue_position)))
            .collect::<Result<Vec<_>>>()?;
        Self::from_marginals(geom.elements(), probabilities, correlation_distance_m)
    }

    /// Copula over arbitrary marginals; used directly by tests.
    pub fn from_marginals(
        positions: &[Point],
        probabilities: Vec<f64>,
        correlation_distance_m: f64,
    ) -> Result<Self> {
        if positions.len() != probabilities.len() {
            return Err(Error::invalid("one marginal probability per antenna required"));
        }
        if let Some(p) = probabilities.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::invalid(format!("marginal probability {p} outside [0, 1]")));
        }
        let normal = std_normal();
        let thresholds = probabilities
            .iter()
            .map(|&p| {
                if p >= 1.0 {
                    f64::INFINITY
                } else if p <= 0.0 {
                    f64::NEG_INFINITY
                } else {
                    normal.inverse_cdf(p)
                }
            })
            .collect();
        let corr = copula_correlation(positions, correlation_distance_m);
        let chol = jittered_cholesky(&corr)?;
        Ok(Self {
            probabilities,
            thresholds,
            chol,
            correlation_distance_m,
        })
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn sample(&self, rng: &mut dyn RngCore) -> BlockageField {
        let n = self.thresholds.len();
        let los = if self.probabilities.iter().all(|&p| p >= 1.0) {
            vec![true; n]
        } else if self.probabilities.iter().all(|&p| p <= 0.0) {
            vec![false; n]
        } else {
            let u: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            (0..n)
                .map(|i| {
                    let z: f64 = (0..=i).map(|j| self.chol[(i, j)] * u[j]).sum();
                    z <= self.thresholds[i]
                })
                .collect()
        };
        BlockageField {
            los,
            probabilities: self.probabilities.clone(),
            correlation_distance_m: self.correlation_distance_m,
        }
    }

    /// `E[b_n b_m]` under the copula.
    pub fn joint_los_probabilities(&self) -> RMatrix {
        let n = self.probabilities.len();
        let corr = &self.chol * self.chol.transpose();
        RMatrix::from_fn(n, n, |i, j| {
            if i == j {
                self.probabilities[i]
            } else {
                bivariate_normal_cdf(self.thresholds[i], self.thresholds[j], corr[(i, j)].clamp(-1.0, 1.0))
            }
        })
    }
}

fn copula_correlation(positions: &[Point], d_corr: f64) -> RMatrix {
    let n = positions.len();
    RMatrix::from_fn(n, n, |i, j| (-nalgebra::distance(&positions[i], &positions[j]) / d_corr).exp())
}

fn jittered_cholesky(m: &RMatrix) -> Result<RMatrix> {
    let n = m.nrows();
    let mut jitter = 0.0;
    for _ in 0..8 {
        let trial = m + RMatrix::identity(n, n) * jitter;
        if let Some(ch) = trial.cholesky() {
            return Ok(ch.l());
        }
        jitter = if jitter == 0.0 { 1e-12 } else { jitter * 10.0 };
    }
    Err(Error::numerical("blockage correlation matrix is not positive definite after jitter"))
}

/// Draws one correlated blockage field for a UE at `ue_position`.
pub fn sample_blockage(
    geom: &ArrayGeometry,
    ue_position: &Point,
    correlation_distance_m: f64,
    rng: &mut dyn RngCore,
) -> Result<BlockageField> {
    Ok(BlockageModel::new(geom, ue_position, correlation_distance_m)?.sample(rng))
}

/// `P(X <= h, Y <= k)` for standard bivariate normal with correlation `rho`.
///
/// Uses `Phi(h)Phi(k) + 1/(2 pi) * int_0^{asin rho} exp(-(h^2 - 2hk sin t + k^2) / (2 cos^2 t)) dt`
/// with adaptive Simpson quadrature.
pub fn bivariate_normal_cdf(h: f64, k: f64, rho: f64) -> f64 {
    let normal = std_normal();
    if h == f64::NEG_INFINITY || k == f64::NEG_INFINITY {
        return 0.0;
    }
    if h == f64::INFINITY {
        return normal.cdf(k);
    }
    if k == f64::INFINITY {
        return normal.cdf(h);
    }
    if rho >= 1.0 {
        return normal.cdf(h.min(k));
    }
    if rho <= -1.0 {
        return (normal.cdf(h) - normal.cdf(-k)).max(0.0);
    }
    let integrand = |t: f64| {
        let (s, c) = t.sin_cos();
        let c2 = c * c;
        if c2 <= 0.0 {
            return 0.0;
        }
        (-(h * h - 2.0 * h * k * s + k * k) / (2.0 * c2)).exp()
    };
    let upper = rho.asin();
    let integral = adaptive_simpson(&integrand, 0.0, upper, 1e-14, 50);
    (normal.cdf(h) * normal.cdf(k) + integral / (2.0 * PI)).clamp(0.0, 1.0)
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, eps: f64, depth: u32) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        eps: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * eps {
            left + right + delta / 15.0
        } else {
            recurse(f, a, m, fa, flm, fm, left, eps / 2.0, depth - 1)
                + recurse(f, m, b, fm, frm, fb, right, eps / 2.0, depth - 1)
        }
    }
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = simpson(fa, fm, fb, a, b);
    recurse(f, a, b, fa, fm, fb, whole, eps, depth)
}

/// One channel realisation `H` (BS antennas by UE antennas).
#[derive(Debug, Clone)]
pub struct ChannelDraw {
    pub h: CMatrix,
    pub blockage: Option<BlockageField>,
    /// Scale factor applied by [`normalize_channel`] (1 for raw draws).
    pub normalization: f64,
}

impl ChannelDraw {
    pub fn raw(h: CMatrix, blockage: Option<BlockageField>) -> Self {
        Self {
            h,
            blockage,
            normalization: 1.0,
        }
    }

    pub fn mean_column_energy(&self) -> f64 {
        self.h.iter().map(|z| z.norm_sqr()).sum::<f64>() / self.h.ncols() as f64
    }
}

/// Scales `H` so that the mean column energy equals the number of BS antennas.
pub fn normalize_channel(draw: ChannelDraw) -> Result<ChannelDraw> {
    let energy = draw.mean_column_energy();
    if !(energy > 0.0) || !energy.is_finite() {
        return Err(Error::invalid("cannot normalise an all-zero or non-finite channel"));
    }
    let factor = (draw.h.nrows() as f64 / energy).sqrt();
    Ok(ChannelDraw {
        h: draw.h * Complex64::from(factor),
        blockage: draw.blockage,
        normalization: draw.normalization * factor,
    })
}

pub(crate) fn complex_gaussian(rng: &mut dyn RngCore, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

/// Anything that can produce raw channel draws of a fixed shape.
pub trait ChannelSampler: Send + Sync {
    fn n_bs(&self) -> usize;
    fn n_ue(&self) -> usize;
    fn sample(&self, rng: &mut dyn RngCore) -> Result<ChannelDraw>;
}

/// Mixed LoS/NLoS near-field channel for a fixed UE antenna layout.
#[derive(Debug, Clone)]
pub struct NfMixedSampler {
    los: CMatrix,
    nlos_variance: Vec<f64>,
    blockage: BlockageModel,
}

impl NfMixedSampler {
    /// `ue_positions` are the UE antenna positions; blockage is evaluated at
    /// their centroid and shared across columns.
    pub fn new(geom: &ArrayGeometry, ue_positions: &[Point], correlation_distance_m: f64) -> Result<Self> {
        if ue_positions.is_empty() {
            return Err(Error::invalid("need at least one UE antenna"));
        }
        let grid = OfdmGrid::single(geom.carrier_hz())?;
        let cols = unit_los_columns(geom, &grid, ue_positions)?;
        let los = CMatrix::from_columns(&cols.iter().map(|c| nalgebra::DVector::from_vec(c.clone())).collect::<Vec<_>>());
        let nlos_variance = cols
            .iter()
            .map(|c| c.iter().map(|z| z.norm_sqr()).sum::<f64>() / c.len() as f64)
            .collect();
        let centre = centroid(ue_positions);
        let blockage = BlockageModel::new(geom, &centre, correlation_distance_m)?;
        Ok(Self {
            los,
            nlos_variance,
            blockage,
        })
    }

    pub fn los_matrix(&self) -> &CMatrix {
        &self.los
    }

    pub fn blockage_model(&self) -> &BlockageModel {
        &self.blockage
    }

    /// Draw with an externally supplied blockage field.
    pub fn sample_with_blockage(&self, field: BlockageField, rng: &mut dyn RngCore) -> ChannelDraw {
        let (n_bs, n_ue) = self.los.shape();
        let mut h = CMatrix::zeros(n_bs, n_ue);
        for u in 0..n_ue {
            for n in 0..n_bs {
                h[(n, u)] = if field.los[n] {
                    self.los[(n, u)]
                } else {
                    complex_gaussian(rng, self.nlos_variance[u])
                };
            }
        }
        ChannelDraw::raw(h, Some(field))
    }
}

impl ChannelSampler for NfMixedSampler {
    fn n_bs(&self) -> usize {
        self.los.nrows()
    }

    fn n_ue(&self) -> usize {
        self.los.ncols()
    }

    fn sample(&self, rng: &mut dyn RngCore) -> Result<ChannelDraw> {
        let field = self.blockage.sample(rng);
        Ok(self.sample_with_blockage(field, rng))
    }
}

pub fn centroid(points: &[Point]) -> Point {
    let n = points.len() as f64;
    let (sx, sy) = points.iter().fold((0.0, 0.0), |(a, b), p| (a + p.x, b + p.y));
    Point::new(sx / n, sy / n)
}

fn unit_los_columns(geom: &ArrayGeometry, grid: &OfdmGrid, ue_positions: &[Point]) -> Result<Vec<Vec<Complex64>>> {
    ue_positions
        .iter()
        .map(|p| {
            Ok(nf_response(geom, grid, &NfParams::new(*p, Complex64::new(1.0, 0.0)), NearFieldModel::SwmSns)?
                .column(0))
        })
        .collect()
}

/// One draw of the mixed LoS/NLoS near-field channel.
pub fn nf_mixed_channel(
    geom: &ArrayGeometry,
    ue_positions: &[Point],
    correlation_distance_m: f64,
    rng: &mut dyn RngCore,
) -> Result<ChannelDraw> {
    NfMixedSampler::new(geom, ue_positions, correlation_distance_m)?.sample(rng)
}

/// I.i.d. unit-variance Rayleigh fading.
#[derive(Debug, Clone, Copy)]
pub struct FfRayleighSampler {
    pub n_bs: usize,
    pub n_ue: usize,
}

impl FfRayleighSampler {
    pub fn new(n_bs: usize, n_ue: usize) -> Result<Self> {
        if n_bs == 0 || n_ue == 0 {
            return Err(Error::invalid("channel dimensions must be >= 1"));
        }
        Ok(Self { n_bs, n_ue })
    }
}

impl ChannelSampler for FfRayleighSampler {
    fn n_bs(&self) -> usize {
        self.n_bs
    }

    fn n_ue(&self) -> usize {
        self.n_ue
    }

    fn sample(&self, rng: &mut dyn RngCore) -> Result<ChannelDraw> {
        let mut h = CMatrix::zeros(self.n_bs, self.n_ue);
        // column-major fill keeps the draw order fixed
        for u in 0..self.n_ue {
            for n in 0..self.n_bs {
                h[(n, u)] = complex_gaussian(rng, 1.0);
            }
        }
        Ok(ChannelDraw::raw(h, None))
    }
}

pub fn ff_rayleigh_channel(n_bs: usize, n_ue: usize, rng: &mut dyn RngCore) -> Result<ChannelDraw> {
    FfRayleighSampler::new(n_bs, n_ue)?.sample(rng)
}

/// Always returns the same matrix. Handy for AWGN calibration.
#[derive(Debug, Clone)]
pub struct FixedChannel(pub CMatrix);

impl ChannelSampler for FixedChannel {
    fn n_bs(&self) -> usize {
        self.0.nrows()
    }

    fn n_ue(&self) -> usize {
        self.0.ncols()
    }

    fn sample(&self, _rng: &mut dyn RngCore) -> Result<ChannelDraw> {
        Ok(ChannelDraw::raw(self.0.clone(), None))
    }
}

/// Hermitian channel covariance.
#[derive(Debug, Clone)]
pub struct CovarianceModel {
    matrix: CMatrix,
    normalized: bool,
}

impl CovarianceModel {
    pub fn new(matrix: CMatrix, normalized: bool) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::invalid("covariance must be square"));
        }
        if linalg::hermitian_defect(&matrix) > 1e-12 {
            return Err(Error::invalid("covariance is not Hermitian"));
        }
        Ok(Self { matrix, normalized })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            matrix: linalg::identity(n),
            normalized: true,
        }
    }

    /// Scales to trace `N`.
    pub fn trace_normalized(matrix: CMatrix) -> Result<Self> {
        let tr = matrix.trace().re;
        if !(tr > 0.0) {
            return Err(Error::invalid("covariance has non-positive trace"));
        }
        let n = matrix.nrows() as f64;
        let mut m = matrix * Complex64::from(n / tr);
        // exact Hermitian symmetry
        let adj = m.adjoint();
        m = (m + adj) * Complex64::from(0.5);
        Self::new(m, true)
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }
}

/// Trace-normalised sample covariance of the unit-gain SWM+SNS responses of
/// the given UE antenna positions.
pub fn nf_covariance(geom: &ArrayGeometry, ue_positions: &[Point]) -> Result<CovarianceModel> {
    if ue_positions.is_empty() {
        return Err(Error::invalid("need at least one UE antenna position"));
    }
    let grid = OfdmGrid::single(geom.carrier_hz())?;
    let n = geom.len();
    let mut c = CMatrix::zeros(n, n);
    for col in unit_los_columns(geom, &grid, ue_positions)? {
        let v = nalgebra::DVector::from_vec(col);
        c += &v * v.adjoint();
    }
    CovarianceModel::trace_normalized(c / Complex64::from(ue_positions.len() as f64))
}

/// Trace-normalised expected covariance `E[h h^H]` of the mixed LoS/NLoS
/// channel, averaged over the UE antennas. Blocked antennas contribute
/// diffuse power, so the matrix tends to the identity as LoS becomes rare.
pub fn nf_mixed_covariance(
    geom: &ArrayGeometry,
    ue_positions: &[Point],
    correlation_distance_m: f64,
) -> Result<CovarianceModel> {
    let sampler = NfMixedSampler::new(geom, ue_positions, correlation_distance_m)?;
    let joint = sampler.blockage.joint_los_probabilities();
    let p = sampler.blockage.probabilities();
    let n = geom.len();
    let mut c = CMatrix::zeros(n, n);
    for (u, var) in sampler.nlos_variance.iter().enumerate() {
        let s = sampler.los.column(u);
        for i in 0..n {
            for j in 0..n {
                c[(i, j)] += s[i] * s[j].conj() * joint[(i, j)];
            }
            c[(i, i)] += Complex64::from((1.0 - p[i]) * var);
        }
    }
    CovarianceModel::trace_normalized(c / Complex64::from(ue_positions.len() as f64))
}
